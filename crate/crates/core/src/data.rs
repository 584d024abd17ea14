//! Data model and file ingestion: language pairs, system outputs, token
//! log-probabilities, human judgments and assembled evaluation datasets.
//!
//! `seg_id` is the join key everywhere. Files carry explicit ids (or an
//! explicit choice of implicit line numbering) rather than relying on
//! positional alignment across files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source/target language codes, normalized to lowercase.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguagePair {
    source: String,
    target: String,
}

/// Column grouping used in correlation reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairGroup {
    #[serde(rename = "en-xx")]
    EnXx,
    #[serde(rename = "xx-en")]
    XxEn,
    #[serde(rename = "xx-yy")]
    XxYy,
}

impl PairGroup {
    pub fn label(self) -> &'static str {
        match self {
            PairGroup::EnXx => "en-xx",
            PairGroup::XxEn => "xx-en",
            PairGroup::XxYy => "xx-yy",
        }
    }
}

fn normalize_code(code: &str) -> Result<String> {
    let code = code.trim().to_lowercase();
    if code.chars().count() < 2 || !code.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(Error::Domain(format!("invalid language code {code:?}")));
    }
    Ok(code)
}

impl LanguagePair {
    pub fn new(source: &str, target: &str) -> Result<Self> {
        let source = normalize_code(source)?;
        let target = normalize_code(target)?;
        if source == target {
            return Err(Error::Domain(format!(
                "language pair {source}-{target} has identical source and target"
            )));
        }
        Ok(LanguagePair { source, target })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn group(&self) -> PairGroup {
        if self.source == "en" {
            PairGroup::EnXx
        } else if self.target == "en" {
            PairGroup::XxEn
        } else {
            PairGroup::XxYy
        }
    }
}

impl FromStr for LanguagePair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (src, tgt) = s
            .split_once('-')
            .ok_or_else(|| Error::Domain(format!("language pair {s:?} is not of the form xx-yy")))?;
        LanguagePair::new(src, tgt)
    }
}

impl TryFrom<String> for LanguagePair {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LanguagePair> for String {
    fn from(lp: LanguagePair) -> String {
        lp.to_string()
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

/// One source/target segment. Texts may be empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPair {
    pub seg_id: usize,
    pub source_text: String,
    pub target_text: String,
}

/// Per-token natural-log probabilities of one target segment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TokenScoredSegment {
    seg_id: usize,
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

impl TokenScoredSegment {
    pub fn new(seg_id: usize, tokens: Vec<String>, logprobs: Vec<f64>) -> Result<Self> {
        let context = || format!("segment {seg_id}");
        if tokens.len() != logprobs.len() {
            return Err(Error::Structure {
                context: context(),
                message: format!(
                    "{} tokens but {} log-probabilities",
                    tokens.len(),
                    logprobs.len()
                ),
            });
        }
        if tokens.is_empty() {
            return Err(Error::Structure {
                context: context(),
                message: "segment has no tokens".into(),
            });
        }
        if let Some((i, lp)) = logprobs
            .iter()
            .enumerate()
            .find(|(_, lp)| !lp.is_finite() || **lp > 0.0)
        {
            return Err(Error::Domain(format!(
                "segment {seg_id}: token {i} has log-probability {lp}, expected a finite value <= 0"
            )));
        }
        Ok(TokenScoredSegment {
            seg_id,
            tokens,
            logprobs,
        })
    }

    pub fn seg_id(&self) -> usize {
        self.seg_id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    /// Sequence length T.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Output of one MT system for one language pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemOutput {
    system_name: String,
    lang_pair: LanguagePair,
    segments: Vec<SegmentPair>,
    token_scores: Option<Vec<TokenScoredSegment>>,
}

impl SystemOutput {
    pub fn new(
        system_name: impl Into<String>,
        lang_pair: LanguagePair,
        mut segments: Vec<SegmentPair>,
        token_scores: Option<Vec<TokenScoredSegment>>,
    ) -> Result<Self> {
        let system_name = system_name.into();
        segments.sort_by_key(|s| s.seg_id);
        if let Some(dup) = segments.windows(2).find(|w| w[0].seg_id == w[1].seg_id) {
            return Err(Error::Structure {
                context: format!("system {system_name}"),
                message: format!("duplicate seg_id {}", dup[0].seg_id),
            });
        }
        let token_scores = match token_scores {
            Some(mut ts) => {
                ts.sort_by_key(|t| t.seg_id);
                let a: Vec<usize> = segments.iter().map(|s| s.seg_id).collect();
                let b: Vec<usize> = ts.iter().map(|t| t.seg_id).collect();
                if a != b {
                    return Err(Error::Structure {
                        context: format!("system {system_name}"),
                        message: "token score seg_ids do not match segment seg_ids".into(),
                    });
                }
                Some(ts)
            }
            None => None,
        };
        Ok(SystemOutput {
            system_name,
            lang_pair,
            segments,
            token_scores,
        })
    }

    pub fn system_name(&self) -> &str {
        &self.system_name
    }

    pub fn lang_pair(&self) -> &LanguagePair {
        &self.lang_pair
    }

    pub fn segments(&self) -> &[SegmentPair] {
        &self.segments
    }

    pub fn token_scores(&self) -> Option<&[TokenScoredSegment]> {
        self.token_scores.as_deref()
    }

    pub fn seg_ids(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.seg_id).collect()
    }
}

/// `(lang_pair, system) -> score`.
pub type SystemTable = BTreeMap<(LanguagePair, String), f64>;
/// `(lang_pair, system, seg_id) -> score`.
pub type SegmentTable = BTreeMap<(LanguagePair, String, usize), f64>;

/// System-level human scores with optional segment-level scores.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HumanJudgments {
    system_scores: SystemTable,
    segment_scores: Option<SegmentTable>,
}

impl HumanJudgments {
    pub fn new(system_scores: SystemTable, segment_scores: Option<SegmentTable>) -> Result<Self> {
        if let Some(seg) = &segment_scores {
            let missing: BTreeSet<String> = seg
                .keys()
                .filter(|(lp, sys, _)| !system_scores.contains_key(&(lp.clone(), sys.clone())))
                .map(|(lp, sys, _)| format!("{lp}/{sys}"))
                .collect();
            if !missing.is_empty() {
                return Err(Error::Structure {
                    context: "human judgments".into(),
                    message: format!(
                        "segment scores without a system score: {}",
                        missing.into_iter().collect::<Vec<_>>().join(", ")
                    ),
                });
            }
        }
        Ok(HumanJudgments {
            system_scores,
            segment_scores,
        })
    }

    pub fn system_scores(&self) -> &SystemTable {
        &self.system_scores
    }

    pub fn segment_scores(&self) -> Option<&SegmentTable> {
        self.segment_scores.as_ref()
    }

    pub fn system_score(&self, lp: &LanguagePair, system: &str) -> Option<f64> {
        self.system_scores
            .get(&(lp.clone(), system.to_string()))
            .copied()
    }

    pub fn lang_pairs(&self) -> Vec<LanguagePair> {
        let set: BTreeSet<&LanguagePair> = self.system_scores.keys().map(|(lp, _)| lp).collect();
        set.into_iter().cloned().collect()
    }

    /// System scores of one language pair, keyed by system name.
    pub fn systems(&self, lp: &LanguagePair) -> BTreeMap<String, f64> {
        self.system_scores
            .iter()
            .filter(|((l, _), _)| l == lp)
            .map(|((_, s), v)| (s.clone(), *v))
            .collect()
    }

    /// Segment scores of one system, ordered by seg_id.
    pub fn segment_scores_for(&self, lp: &LanguagePair, system: &str) -> Option<BTreeMap<usize, f64>> {
        let table = self.segment_scores.as_ref()?;
        let scores: BTreeMap<usize, f64> = segment_rows(table, lp, system).collect();
        (!scores.is_empty()).then_some(scores)
    }

    /// Judgments restricted to one language pair.
    pub fn restrict(&self, lp: &LanguagePair) -> HumanJudgments {
        HumanJudgments {
            system_scores: self
                .system_scores
                .iter()
                .filter(|((l, _), _)| l == lp)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            segment_scores: self.segment_scores.as_ref().map(|t| {
                t.iter()
                    .filter(|((l, _, _), _)| l == lp)
                    .map(|(k, v)| (k.clone(), *v))
                    .collect()
            }),
        }
    }
}

/// Rows of a segment table for one (lang_pair, system), ordered by seg_id.
pub fn segment_rows<'a>(
    table: &'a SegmentTable,
    lp: &LanguagePair,
    system: &str,
) -> impl Iterator<Item = (usize, f64)> + 'a {
    let lo = (lp.clone(), system.to_string(), 0usize);
    let hi = (lp.clone(), system.to_string(), usize::MAX);
    table.range(lo..=hi).map(|((_, _, id), v)| (*id, *v))
}

/// Systems of one language pair with aligned segments and matching human scores.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalDataset {
    pub lang_pair: LanguagePair,
    /// Sorted by system name.
    pub systems: Vec<SystemOutput>,
    pub references: Option<BTreeMap<usize, String>>,
    pub human: HumanJudgments,
}

impl EvalDataset {
    pub fn seg_ids(&self) -> Vec<usize> {
        self.systems[0].seg_ids()
    }

    pub fn system(&self, name: &str) -> Option<&SystemOutput> {
        self.systems.iter().find(|s| s.system_name() == name)
    }
}

/// Validates seg_id alignment across systems and attaches human scores.
pub fn assemble_dataset(
    outputs: Vec<SystemOutput>,
    human: &HumanJudgments,
    references: Option<BTreeMap<usize, String>>,
) -> Result<EvalDataset> {
    let mut outputs = outputs;
    if outputs.len() < 2 {
        return Err(Error::Domain(format!(
            "a dataset needs at least 2 systems, got {}",
            outputs.len()
        )));
    }
    outputs.sort_by(|a, b| a.system_name.cmp(&b.system_name));
    if let Some(w) = outputs.windows(2).find(|w| w[0].system_name == w[1].system_name) {
        return Err(Error::Structure {
            context: "dataset".into(),
            message: format!("system {} appears twice", w[0].system_name),
        });
    }
    let lp = outputs[0].lang_pair.clone();
    if let Some(o) = outputs.iter().find(|o| o.lang_pair != lp) {
        return Err(Error::Structure {
            context: "dataset".into(),
            message: format!(
                "system {} is {} but the dataset is {lp}",
                o.system_name, o.lang_pair
            ),
        });
    }

    // Reference id set is the majority id set when no references are given.
    let expected: Vec<usize> = match &references {
        Some(r) => r.keys().copied().collect(),
        None => {
            let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            for o in &outputs {
                *counts.entry(o.seg_ids()).or_default() += 1;
            }
            counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .map(|(ids, _)| ids)
                .unwrap_or_default()
        }
    };
    let misaligned: Vec<String> = outputs
        .iter()
        .filter(|o| o.seg_ids() != expected)
        .map(|o| o.system_name.clone())
        .collect();
    if !misaligned.is_empty() {
        return Err(Error::Alignment {
            systems: misaligned,
        });
    }

    let missing: Vec<String> = outputs
        .iter()
        .filter(|o| human.system_score(&lp, &o.system_name).is_none())
        .map(|o| o.system_name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingJudgment {
            lang_pair: lp.to_string(),
            systems: missing,
        });
    }

    Ok(EvalDataset {
        human: human.restrict(&lp),
        lang_pair: lp,
        systems: outputs,
        references,
    })
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    open(path)?
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenScoreRecord {
    seg: usize,
    tokens: Vec<String>,
    logp: Vec<f64>,
}

#[derive(Serialize)]
struct TokenScoreRecordRef<'a> {
    seg: usize,
    tokens: &'a [String],
    logp: &'a [f64],
}

/// Loads a JSON-lines token score file, sorted by seg_id.
pub fn load_token_scores(path: impl AsRef<Path>) -> Result<Vec<TokenScoredSegment>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TokenScoreRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if let Some(prev) = seen.insert(rec.seg, lineno) {
            return Err(Error::Duplicate {
                path: path.into(),
                line: lineno,
                key: format!("seg {} (first at line {prev})", rec.seg),
            });
        }
        let seg = TokenScoredSegment::new(rec.seg, rec.tokens, rec.logp).map_err(|e| match e {
            Error::Structure { message, .. } => Error::Structure {
                context: format!("{}:{lineno}", path.display()),
                message,
            },
            Error::Domain(message) => Error::Domain(format!("{}:{lineno}: {message}", path.display())),
            other => other,
        })?;
        out.push(seg);
    }
    out.sort_by_key(|s| s.seg_id);
    Ok(out)
}

/// Writes token scores as JSON lines. Floats are written in shortest
/// round-trip form, so reloading reproduces them bit for bit.
pub fn write_token_scores<W: Write>(mut w: W, segments: &[TokenScoredSegment]) -> std::io::Result<()> {
    for s in segments {
        let rec = TokenScoreRecordRef {
            seg: s.seg_id,
            tokens: &s.tokens,
            logp: &s.logprobs,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn split_fields<'a>(path: &Path, lineno: usize, line: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != n {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected {n} tab-separated fields, found {}", fields.len()),
        ));
    }
    Ok(fields)
}

fn parse_score(path: &Path, lineno: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, lineno, format!("score {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, lineno, format!("score {s:?} is not finite")));
    }
    Ok(v)
}

fn parse_lp(path: &Path, lineno: usize, s: &str) -> Result<LanguagePair> {
    s.parse()
        .map_err(|e: Error| Error::parse(path, lineno, e.to_string()))
}

/// Reads `lang_pair<TAB>system<TAB>score` rows (header optional).
pub fn load_system_table(path: impl AsRef<Path>) -> Result<SystemTable> {
    let path = path.as_ref();
    let mut table = SystemTable::new();
    let mut lines: BTreeMap<(LanguagePair, String), usize> = BTreeMap::new();
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        let lineno = i + 1;
        if line.is_empty() || (i == 0 && line.starts_with("lang_pair\t")) {
            continue;
        }
        let f = split_fields(path, lineno, &line, 3)?;
        let lp = parse_lp(path, lineno, f[0])?;
        let score = parse_score(path, lineno, f[2])?;
        let key = (lp, f[1].to_string());
        if let Some(first) = lines.insert(key.clone(), lineno) {
            return Err(Error::Duplicate {
                path: path.into(),
                line: lineno,
                key: format!("{}/{} (first at line {first})", key.0, key.1),
            });
        }
        table.insert(key, score);
    }
    Ok(table)
}

/// Reads `lang_pair<TAB>system<TAB>seg<TAB>score` rows (header optional).
pub fn load_segment_table(path: impl AsRef<Path>) -> Result<SegmentTable> {
    let path = path.as_ref();
    let mut table = SegmentTable::new();
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        let lineno = i + 1;
        if line.is_empty() || (i == 0 && line.starts_with("lang_pair\t")) {
            continue;
        }
        let f = split_fields(path, lineno, &line, 4)?;
        let lp = parse_lp(path, lineno, f[0])?;
        let seg: usize = f[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("seg id {:?} is not an integer", f[2])))?;
        let score = parse_score(path, lineno, f[3])?;
        let key = (lp, f[1].to_string(), seg);
        if table.insert(key.clone(), score).is_some() {
            return Err(Error::Duplicate {
                path: path.into(),
                line: lineno,
                key: format!("{}/{}/seg {}", key.0, key.1, key.2),
            });
        }
    }
    Ok(table)
}

/// Loads human scores: a system-level TSV plus an optional segment-level TSV.
pub fn load_human_scores(
    system_path: impl AsRef<Path>,
    segment_path: Option<&Path>,
) -> Result<HumanJudgments> {
    let system = load_system_table(system_path)?;
    let segment = segment_path.map(load_segment_table).transpose()?;
    HumanJudgments::new(system, segment).map_err(|e| match (e, segment_path) {
        (Error::Structure { message, .. }, Some(p)) => Error::Structure {
            context: p.display().to_string(),
            message,
        },
        (e, _) => e,
    })
}

pub fn write_segment_table<W: Write>(mut w: W, table: &SegmentTable) -> std::io::Result<()> {
    writeln!(w, "lang_pair\tsystem\tseg\tscore")?;
    for ((lp, sys, seg), v) in table {
        writeln!(w, "{lp}\t{sys}\t{seg}\t{v:?}")?;
    }
    Ok(())
}

/// One row of a system score file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub system: String,
    pub lang_pair: LanguagePair,
    pub score: f64,
    pub n_segments: usize,
}

pub const SCORE_HEADER: &str = "system\tlang_pair\tscore\tn_segments";

pub fn write_score_rows<W: Write>(mut w: W, rows: &[ScoreRow]) -> std::io::Result<()> {
    writeln!(w, "{SCORE_HEADER}")?;
    for r in rows {
        writeln!(w, "{}\t{}\t{:?}\t{}", r.system, r.lang_pair, r.score, r.n_segments)?;
    }
    Ok(())
}

/// Reads a `system<TAB>lang_pair<TAB>score<TAB>n_segments` file.
pub fn load_score_rows(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let mut rows = Vec::new();
    let mut seen = BTreeMap::new();
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        let lineno = i + 1;
        if line.is_empty() || (i == 0 && line == SCORE_HEADER) {
            continue;
        }
        let f = split_fields(path, lineno, &line, 4)?;
        let lang_pair = parse_lp(path, lineno, f[1])?;
        let score = parse_score(path, lineno, f[2])?;
        let n_segments = f[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("n_segments {:?} is not an integer", f[3])))?;
        if let Some(first) = seen.insert((lang_pair.clone(), f[0].to_string()), lineno) {
            return Err(Error::Duplicate {
                path: path.into(),
                line: lineno,
                key: format!("{lang_pair}/{} (first at line {first})", f[0]),
            });
        }
        rows.push(ScoreRow {
            system: f[0].to_string(),
            lang_pair,
            score,
            n_segments,
        });
    }
    Ok(rows)
}

pub fn score_rows_to_table(rows: &[ScoreRow]) -> SystemTable {
    rows.iter()
        .map(|r| ((r.lang_pair.clone(), r.system.clone()), r.score))
        .collect()
}

/// How segment ids are assigned to plain-text lines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SegmentIds {
    /// 0-based line numbers.
    LineNumbers,
    /// One integer per line in a sidecar file.
    Sidecar(PathBuf),
}

/// Reads a plain-text file, one segment per line, keyed by seg_id.
pub fn load_text_segments(path: impl AsRef<Path>, ids: &SegmentIds) -> Result<BTreeMap<usize, String>> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let ids: Vec<usize> = match ids {
        SegmentIds::LineNumbers => (0..lines.len()).collect(),
        SegmentIds::Sidecar(id_path) => {
            let raw = read_lines(id_path)?;
            let ids = raw
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(id_path, i + 1, format!("seg id {s:?} is not an integer")))
                })
                .collect::<Result<Vec<_>>>()?;
            if ids.len() != lines.len() {
                return Err(Error::Structure {
                    context: id_path.display().to_string(),
                    message: format!("{} ids for {} lines in {}", ids.len(), lines.len(), path.display()),
                });
            }
            ids
        }
    };
    let mut out = BTreeMap::new();
    for (lineno, (id, text)) in ids.into_iter().zip(lines).enumerate() {
        if out.insert(id, text).is_some() {
            return Err(Error::Duplicate {
                path: path.into(),
                line: lineno + 1,
                key: format!("seg {id}"),
            });
        }
    }
    Ok(out)
}

/// Builds a [`SystemOutput`] from keyed target texts and optional sources.
pub fn system_output_from_texts(
    name: &str,
    lang_pair: &LanguagePair,
    targets: BTreeMap<usize, String>,
    sources: Option<&BTreeMap<usize, String>>,
) -> Result<SystemOutput> {
    let segments = targets
        .into_iter()
        .map(|(seg_id, target_text)| SegmentPair {
            seg_id,
            source_text: sources
                .and_then(|s| s.get(&seg_id).cloned())
                .unwrap_or_default(),
            target_text,
        })
        .collect();
    SystemOutput::new(name, lang_pair.clone(), segments, None)
}

/// Loads every language pair under a dataset directory:
///
/// ```text
/// <dir>/human.tsv                     lang_pair, system, score
/// <dir>/human-seg.tsv                 optional segment-level scores
/// <dir>/<lang_pair>/ref.txt           one reference per line
/// <dir>/<lang_pair>/src.txt           optional source text
/// <dir>/<lang_pair>/systems/<name>.txt
/// ```
///
/// System files without a human system score are skipped with a warning.
pub fn load_dataset_dir(dir: impl AsRef<Path>) -> Result<Vec<EvalDataset>> {
    let dir = dir.as_ref();
    let seg_path = dir.join("human-seg.tsv");
    let human = load_human_scores(
        dir.join("human.tsv"),
        seg_path.exists().then_some(seg_path.as_path()),
    )?;
    let mut datasets = Vec::new();
    for lp in human.lang_pairs() {
        let lp_dir = dir.join(lp.to_string());
        if !lp_dir.is_dir() {
            log::warn!("{}: no directory for {lp}, skipping", lp_dir.display());
            continue;
        }
        let refs = load_text_segments(lp_dir.join("ref.txt"), &SegmentIds::LineNumbers)?;
        let src_path = lp_dir.join("src.txt");
        let sources = if src_path.exists() {
            Some(load_text_segments(&src_path, &SegmentIds::LineNumbers)?)
        } else {
            None
        };
        let sys_dir = lp_dir.join("systems");
        let mut entries: Vec<PathBuf> = fs::read_dir(&sys_dir)
            .map_err(|e| Error::io(&sys_dir, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(&sys_dir, err)))
            .collect::<Result<_>>()?;
        entries.sort();
        let mut outputs = Vec::new();
        for path in entries {
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            if human.system_score(&lp, &name).is_none() {
                log::warn!("{}: no human score for {lp}/{name}, skipping", path.display());
                continue;
            }
            let texts = load_text_segments(&path, &SegmentIds::LineNumbers)?;
            outputs.push(system_output_from_texts(&name, &lp, texts, sources.as_ref())?);
        }
        datasets.push(assemble_dataset(outputs, &human, Some(refs))?);
    }
    Ok(datasets)
}
