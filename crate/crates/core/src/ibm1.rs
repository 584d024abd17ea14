//! IBM Model 1 lexical translation model, used as a self-contained token
//! scorer.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;

use crate::data::TokenScoredSegment;
use crate::error::{Error, Result};
use crate::stats::stable_sum;

pub const NULL_TOKEN: &str = "<NULL>";
/// Probability assigned to target tokens the table has never seen.
pub const PROB_FLOOR: f64 = 1e-12;

/// t(target | source), stored per source token.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LexicalTable {
    t: BTreeMap<String, BTreeMap<String, f64>>,
}

impl LexicalTable {
    pub fn prob(&self, target: &str, source: &str) -> f64 {
        self.t
            .get(source)
            .and_then(|row| row.get(target))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.t.keys().map(String::as_str)
    }

    pub fn row(&self, source: &str) -> Option<&BTreeMap<String, f64>> {
        self.t.get(source)
    }

    pub fn len(&self) -> usize {
        self.t.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut t: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [target, source, prob] = fields[..] else {
                return Err(Error::parse(path, i + 1, "expected target<TAB>source<TAB>prob"));
            };
            let p: f64 = prob
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("probability {prob:?} is not a number")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::parse(path, i + 1, format!("probability {p} outside [0, 1]")));
            }
            if t.entry(source.to_string())
                .or_default()
                .insert(target.to_string(), p)
                .is_some()
            {
                return Err(Error::Duplicate {
                    path: path.to_path_buf(),
                    line: i + 1,
                    key: format!("{target}|{source}"),
                });
            }
        }
        Ok(LexicalTable { t })
    }

    /// Writes `target<TAB>source<TAB>prob` rows sorted by source, then target.
    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (source, row) in &self.t {
            for (target, p) in row {
                writeln!(w, "{target}\t{source}\t{p:?}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Model1Trace {
    /// Corpus log-likelihood before each iteration, then once after the last.
    pub log_likelihoods: Vec<f64>,
    /// Sentence pairs skipped because one side was empty.
    pub skipped: usize,
}

pub fn train_model1(parallel: &[(Vec<String>, Vec<String>)], iterations: usize) -> Result<LexicalTable> {
    train_model1_traced(parallel, iterations).map(|(t, _)| t)
}

pub fn train_model1_traced(
    parallel: &[(Vec<String>, Vec<String>)],
    iterations: usize,
) -> Result<(LexicalTable, Model1Trace)> {
    if iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    let mut src_vocab: BTreeSet<&str> = BTreeSet::new();
    let mut tgt_vocab: BTreeSet<&str> = BTreeSet::new();
    let mut skipped = 0;
    for (x, y) in parallel {
        if x.is_empty() || y.is_empty() {
            skipped += 1;
            continue;
        }
        src_vocab.extend(x.iter().map(String::as_str));
        tgt_vocab.extend(y.iter().map(String::as_str));
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} sentence pairs with an empty side");
    }
    if tgt_vocab.is_empty() {
        return Err(Error::Empty("parallel corpus has no usable sentence pairs".into()));
    }
    // Source id 0 is NULL.
    let src_names: Vec<&str> = std::iter::once(NULL_TOKEN).chain(src_vocab.iter().copied().filter(|s| *s != NULL_TOKEN)).collect();
    let tgt_names: Vec<&str> = tgt_vocab.into_iter().collect();
    let src_id: HashMap<&str, usize> = src_names.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let tgt_id: HashMap<&str, usize> = tgt_names.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let corpus: Vec<(Vec<usize>, Vec<usize>)> = parallel
        .iter()
        .filter(|(x, y)| !x.is_empty() && !y.is_empty())
        .map(|(x, y)| {
            let xs = std::iter::once(0).chain(x.iter().map(|s| src_id[s.as_str()])).collect();
            let ys = y.iter().map(|s| tgt_id[s.as_str()]).collect();
            (xs, ys)
        })
        .collect();

    let uniform = 1.0 / tgt_names.len() as f64;
    let mut t: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); src_names.len()];
    for (xs, ys) in &corpus {
        for &s in xs {
            for &y in ys {
                t[s].insert(y, uniform);
            }
        }
    }

    let mut lls = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let mut counts: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); src_names.len()];
        let mut ll = 0.0;
        for (xs, ys) in &corpus {
            let norm = xs.len() as f64;
            for &y in ys {
                let denom: f64 = xs.iter().map(|&s| t[s][&y]).sum();
                ll += (denom / norm).ln();
                for &s in xs {
                    *counts[s].entry(y).or_default() += t[s][&y] / denom;
                }
            }
        }
        lls.push(ll);
        for (row, c) in t.iter_mut().zip(counts) {
            let values: Vec<f64> = c.values().copied().collect();
            let total = stable_sum(&values);
            for (y, v) in c {
                row.insert(y, v / total);
            }
        }
    }
    lls.push(
        corpus
            .iter()
            .map(|(xs, ys)| {
                ys.iter()
                    .map(|&y| (xs.iter().map(|&s| t[s][&y]).sum::<f64>() / xs.len() as f64).ln())
                    .sum::<f64>()
            })
            .sum(),
    );

    let table = LexicalTable {
        t: t
            .into_iter()
            .enumerate()
            .filter(|(_, row)| !row.is_empty())
            .map(|(s, row)| {
                (
                    src_names[s].to_string(),
                    row.into_iter().map(|(y, p)| (tgt_names[y].to_string(), p)).collect(),
                )
            })
            .collect(),
    };
    Ok((
        table,
        Model1Trace {
            log_likelihoods: lls,
            skipped,
        },
    ))
}

/// Per-token log-probabilities of `target` given `source` under Model 1.
/// The source-side sum is order-independent, so permuting the source tokens
/// gives identical output.
pub fn score_tokens(
    table: &LexicalTable,
    seg_id: usize,
    source: &[String],
    target: &[String],
) -> Result<TokenScoredSegment> {
    if target.is_empty() {
        return Err(Error::Domain(format!("segment {seg_id}: empty target")));
    }
    let norm = (source.len() + 1) as f64;
    let logprobs = target
        .iter()
        .map(|y| {
            let probs: Vec<f64> = std::iter::once(NULL_TOKEN)
                .chain(source.iter().map(String::as_str))
                .map(|s| table.prob(y, s))
                .collect();
            let p = (stable_sum(&probs) / norm).max(PROB_FLOOR);
            p.ln().min(0.0)
        })
        .collect();
    TokenScoredSegment::new(seg_id, target.to_vec(), logprobs)
}

/// Whitespace tokenization used by the toy scorer.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(x: &str, y: &str) -> (Vec<String>, Vec<String>) {
        (tokenize(x), tokenize(y))
    }

    #[test]
    fn single_pair_converges() {
        let corpus = vec![pair("a", "x"); 100];
        let t = train_model1(&corpus, 10).unwrap();
        assert!(t.prob("x", "a") >= 0.99);
    }

    #[test]
    fn alignment_disambiguation() {
        let corpus = vec![pair("a", "x"), pair("b", "y"), pair("a b", "x y")];
        let t = train_model1(&corpus, 20).unwrap();
        assert!(t.prob("x", "a") > t.prob("y", "a"));
        assert!(t.prob("y", "b") > t.prob("x", "b"));
    }

    #[test]
    fn first_iteration_closed_form() {
        // Uniform start 1/2 over {x, y}. Pair 1 splits x between NULL and a;
        // pair 2 gives each of NULL, a, b a third of x and of y.
        let corpus = vec![pair("a", "x"), pair("a b", "x y")];
        let t = train_model1(&corpus, 1).unwrap();
        assert!((t.prob("x", "a") - 5.0 / 7.0).abs() < 1e-12);
        assert!((t.prob("y", "a") - 2.0 / 7.0).abs() < 1e-12);
        assert!((t.prob("x", "b") - 0.5).abs() < 1e-12);
        assert!((t.prob("x", NULL_TOKEN) - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn rows_normalized_and_ll_monotone() {
        let corpus = vec![pair("a b c", "x y z"), pair("a c", "x z"), pair("b", "y"), pair("c a", "z z x")];
        let (t, trace) = train_model1_traced(&corpus, 15).unwrap();
        for s in t.sources() {
            let total: f64 = t.row(s).unwrap().values().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert_eq!(trace.log_likelihoods.len(), 16);
        for w in trace.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn score_direct_substitution() {
        let corpus = vec![pair("a", "x"); 10];
        let t = train_model1(&corpus, 5).unwrap();
        assert_eq!(t.prob("x", "a"), 1.0);
        let seg = score_tokens(&t, 0, &tokenize("a"), &tokenize("x")).unwrap();
        let expected = (0.5 * (1.0 + t.prob("x", NULL_TOKEN))).ln().min(0.0);
        assert_eq!(seg.logprobs(), &[expected]);
    }

    #[test]
    fn unseen_target_floor_and_shape() {
        let t = train_model1(&[pair("a", "x")], 3).unwrap();
        let seg = score_tokens(&t, 3, &tokenize("a"), &tokenize("q x")).unwrap();
        assert_eq!(seg.len(), 2);
        assert_eq!(seg.logprobs()[0], PROB_FLOOR.ln());
        assert!(score_tokens(&t, 3, &tokenize("a"), &[]).is_err());
    }

    #[test]
    fn skips_empty_pairs() {
        let corpus = vec![pair("a", "x"), pair("", "y"), pair("b", "")];
        let (_, trace) = train_model1_traced(&corpus, 2).unwrap();
        assert_eq!(trace.skipped, 2);
        assert!(train_model1(&[pair("", "")], 2).is_err());
        assert!(train_model1(&corpus, 0).is_err());
    }

    #[test]
    fn table_round_trip() {
        let corpus = vec![pair("a b", "x y"), pair("a", "x")];
        let t = train_model1(&corpus, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        t.save(fs::File::create(&p).unwrap()).unwrap();
        assert_eq!(LexicalTable::load(&p).unwrap(), t);
    }
}
