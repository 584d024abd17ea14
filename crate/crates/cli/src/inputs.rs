//! Argument shapes shared by several subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use refless_core::data::{
    load_score_rows, load_system_table, load_token_scores, score_rows_to_table, LanguagePair, SystemTable,
    TokenScoredSegment, SCORE_HEADER,
};

use crate::error::{CliError, CliResult};

/// `NAME=PATH[,PATH...]` or a bare path named after its file stem.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedFiles {
    pub name: String,
    pub paths: Vec<PathBuf>,
}

pub fn parse_named(spec: &str) -> CliResult<NamedFiles> {
    let (name, rest) = match spec.split_once('=') {
        Some((n, r)) if !n.is_empty() && !n.contains('/') => (Some(n.to_string()), r),
        _ => (None, spec),
    };
    let paths: Vec<PathBuf> = rest.split(',').filter(|p| !p.is_empty()).map(PathBuf::from).collect();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no file in {spec:?}")));
    }
    let name = match name {
        Some(n) => n,
        None if paths.len() == 1 => stem(&paths[0])?,
        None => return Err(CliError::Usage(format!("several files need a NAME= prefix: {spec:?}"))),
    };
    Ok(NamedFiles { name, paths })
}

pub fn parse_single(spec: &str) -> CliResult<(String, PathBuf)> {
    let mut nf = parse_named(spec)?;
    if nf.paths.len() != 1 {
        return Err(CliError::Usage(format!("expected one file in {spec:?}")));
    }
    Ok((nf.name, nf.paths.remove(0)))
}

fn stem(path: &Path) -> CliResult<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Usage(format!("cannot name {}", path.display())))
}

/// Metric system scores in either the 4-column score-row format or the
/// 3-column `lang_pair, system, score` format.
pub fn load_metric_scores(path: &Path) -> CliResult<SystemTable> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut first = String::new();
    io::BufReader::new(f)
        .read_line(&mut first)
        .map_err(|e| CliError::io(path, e))?;
    let first = first.trim_end_matches(['\n', '\r']);
    if first == SCORE_HEADER || first.split('\t').count() == 4 {
        Ok(score_rows_to_table(&load_score_rows(path)?))
    } else {
        Ok(load_system_table(path)?)
    }
}

pub fn read_lines(path: Option<&Path>) -> CliResult<Vec<String>> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Ok(text.lines().map(str::to_string).collect())
        }
        None => io::stdin()
            .lock()
            .lines()
            .collect::<io::Result<_>>()
            .map_err(|e| CliError::io("<stdin>", e)),
    }
}

/// Token score files of one system: one entry per regularization sample.
pub type SampleFiles = Vec<Vec<TokenScoredSegment>>;

fn sorted_entries(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| CliError::io(dir, err)))
        .collect::<CliResult<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn is_jsonl(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()) == Some("jsonl")
}

/// Reads `<dir>/<lang_pair>/<system>.jsonl` (one sample) and
/// `<dir>/<lang_pair>/<system>/*.jsonl` (K samples, sorted by file name).
/// Subdirectories whose name is not a language pair are ignored.
pub fn load_token_score_dir(dir: &Path) -> CliResult<BTreeMap<(LanguagePair, String), SampleFiles>> {
    let mut out = BTreeMap::new();
    for lp_dir in sorted_entries(dir)? {
        if !lp_dir.is_dir() {
            continue;
        }
        let Some(lp) = lp_dir
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse::<LanguagePair>().ok())
        else {
            log::debug!("{}: not a language pair, ignored", lp_dir.display());
            continue;
        };
        for entry in sorted_entries(&lp_dir)? {
            let (name, files) = if entry.is_dir() {
                let files: Vec<PathBuf> = sorted_entries(&entry)?.into_iter().filter(|p| is_jsonl(p)).collect();
                (stem(&entry)?, files)
            } else if is_jsonl(&entry) {
                (stem(&entry)?, vec![entry.clone()])
            } else {
                continue;
            };
            if files.is_empty() {
                return Err(CliError::Usage(format!("{}: no .jsonl samples", entry.display())));
            }
            let samples = files.iter().map(load_token_scores).collect::<Result<Vec<_>, _>>()?;
            out.insert((lp.clone(), name), samples);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("{}: no token score files found", dir.display())));
    }
    Ok(out)
}
