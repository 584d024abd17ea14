//! Corpus BLEU, chrF and cross-BLEU, computed the same way as the usual
//! reference toolkit so scores are comparable with published numbers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    /// International tokenization: splits punctuation and symbols except
    /// between digits.
    #[default]
    Intl,
    /// The classic mteval-v13a tokenizer.
    #[serde(rename = "13a")]
    Mteval13a,
    /// Split on whitespace only.
    #[serde(rename = "none")]
    Whitespace,
    /// One token per CJK character, 13a rules elsewhere.
    Zh,
}

impl Tokenizer {
    pub fn name(self) -> &'static str {
        match self {
            Tokenizer::Intl => "intl",
            Tokenizer::Mteval13a => "13a",
            Tokenizer::Whitespace => "none",
            Tokenizer::Zh => "zh",
        }
    }

    pub fn tokenize(self, line: &str) -> String {
        match self {
            Tokenizer::Intl => tokenize_intl(line),
            Tokenizer::Mteval13a => tokenize_13a(line),
            Tokenizer::Whitespace => collapse(line),
            Tokenizer::Zh => tokenize_zh(line),
        }
    }
}

impl fmt::Display for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tokenizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intl" => Ok(Tokenizer::Intl),
            "13a" => Ok(Tokenizer::Mteval13a),
            "none" | "whitespace" => Ok(Tokenizer::Whitespace),
            "zh" | "char" => Ok(Tokenizer::Zh),
            _ => Err(Error::Config(format!(
                "unknown tokenizer {s:?} (expected intl, 13a, none or zh)"
            ))),
        }
    }
}

fn collapse(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

static INTL: LazyLock<[(Regex, &str); 3]> = LazyLock::new(|| {
    [
        (Regex::new(r"(\P{N})(\p{P})").unwrap(), "${1} ${2} "),
        (Regex::new(r"(\p{P})(\P{N})").unwrap(), " ${1} ${2}"),
        (Regex::new(r"(\p{S})").unwrap(), " ${1} "),
    ]
});

static MTEVAL: LazyLock<[(Regex, &str); 4]> = LazyLock::new(|| {
    [
        (Regex::new(r"([\{-~\[-` -&\(-\+:-@/])").unwrap(), " ${1} "),
        (Regex::new(r"([^0-9])([\.,])").unwrap(), "${1} ${2} "),
        (Regex::new(r"([\.,])([^0-9])").unwrap(), " ${1} ${2}"),
        (Regex::new(r"([0-9])(-)").unwrap(), "${1} ${2} "),
    ]
});

fn tokenize_intl(line: &str) -> String {
    let mut s = line.to_string();
    for (re, rep) in INTL.iter() {
        s = re.replace_all(&s, *rep).into_owned();
    }
    collapse(&s)
}

fn mteval_post(line: &str) -> String {
    let mut s = line.to_string();
    for (re, rep) in MTEVAL.iter() {
        s = re.replace_all(&s, *rep).into_owned();
    }
    collapse(&s)
}

fn tokenize_13a(line: &str) -> String {
    let mut s = line.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if s.contains('&') {
        s = s
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    mteval_post(&format!(" {s} "))
}

/// Code point ranges treated as CJK by the zh tokenizer. Two entries are
/// wider than the blocks they are named after; the reference toolkit's
/// table has the same quirk and scores must match it.
const CJK_RANGES: &[(u32, u32)] = &[
    (0x3400, 0x4db5),
    (0x4e00, 0x9fa5),
    (0x9fa6, 0x9fbb),
    (0xf900, 0xfa2d),
    (0xfa30, 0xfa6a),
    (0xfa70, 0xfad9),
    (0x2001, 0x2a6d),
    (0x2f81, 0x2fa1),
    (0xff00, 0xffef),
    (0x2e80, 0x2eff),
    (0x3000, 0x303f),
    (0x31c0, 0x31ef),
    (0x2f00, 0x2fdf),
    (0x2ff0, 0x2fff),
    (0x3100, 0x312f),
    (0x31a0, 0x31bf),
    (0xfe10, 0xfe1f),
    (0xfe30, 0xfe4f),
    (0x2600, 0x26ff),
    (0x2700, 0x27bf),
    (0x3200, 0x32ff),
    (0x3300, 0x33ff),
];

fn is_cjk(c: char) -> bool {
    let c = c as u32;
    CJK_RANGES.iter().any(|&(lo, hi)| lo <= c && c <= hi)
}

fn tokenize_zh(line: &str) -> String {
    let mut s = String::with_capacity(line.len() * 2);
    for c in line.trim().chars() {
        if is_cjk(c) {
            s.push(' ');
            s.push(c);
            s.push(' ');
        } else {
            s.push(c);
        }
    }
    mteval_post(&s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    #[default]
    None,
    /// Each zero-match order gets precision 1 / (2^k · total), k counting
    /// the zero-match orders so far.
    Exp,
}

impl FromStr for Smoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Smoothing::None),
            "exp" | "exp-floor" => Ok(Smoothing::Exp),
            _ => Err(Error::Config(format!("unknown smoothing {s:?} (expected none or exp)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing: Smoothing,
    pub tokenizer: Tokenizer,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_order: 4,
            smoothing: Smoothing::None,
            tokenizer: Tokenizer::Intl,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChrfConfig {
    pub char_order: usize,
    pub beta: f64,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        ChrfConfig {
            char_order: 6,
            beta: 2.0,
        }
    }
}

/// Sufficient statistics for corpus BLEU.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BleuStats {
    pub correct: Vec<u64>,
    pub total: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    fn zero(max_order: usize) -> Self {
        BleuStats {
            correct: vec![0; max_order],
            total: vec![0; max_order],
            hyp_len: 0,
            ref_len: 0,
        }
    }

    fn add(mut self, other: BleuStats) -> Self {
        for (a, b) in self.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        self
    }

    pub fn score(&self, smoothing: Smoothing) -> f64 {
        let max_order = self.correct.len();
        let bp = if self.hyp_len < self.ref_len {
            if self.hyp_len > 0 {
                (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
            } else {
                0.0
            }
        } else {
            1.0
        };
        if self.correct.iter().all(|&c| c == 0) {
            return 0.0;
        }
        let mut precisions = vec![0.0; max_order];
        let mut smooth = 1.0;
        for n in 0..max_order {
            if self.total[n] == 0 {
                break;
            }
            if self.correct[n] == 0 {
                if smoothing == Smoothing::Exp {
                    smooth *= 2.0;
                    precisions[n] = 100.0 / (smooth * self.total[n] as f64);
                }
            } else {
                precisions[n] = 100.0 * self.correct[n] as f64 / self.total[n] as f64;
            }
        }
        if precisions.iter().any(|&p| p == 0.0) {
            return 0.0;
        }
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_order as f64;
        bp * log_mean.exp()
    }
}

fn ngram_counts<'a, T: Eq + std::hash::Hash>(items: &'a [T], n: usize) -> HashMap<&'a [T], u64> {
    let mut m = HashMap::new();
    if items.len() >= n {
        for w in items.windows(n) {
            *m.entry(w).or_default() += 1;
        }
    }
    m
}

fn check_corpus(hyps: &[String], refs: &[String], what: &str) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::Structure {
            context: what.into(),
            message: format!("{} hypotheses but {} references", hyps.len(), refs.len()),
        });
    }
    if refs.is_empty() {
        return Err(Error::Domain(format!("{what}: empty reference corpus")));
    }
    Ok(())
}

fn check_bleu_config(cfg: &BleuConfig) -> Result<()> {
    if cfg.max_order == 0 {
        return Err(Error::Config("BLEU max_order must be at least 1".into()));
    }
    Ok(())
}

fn segment_bleu_stats(hyp: &str, reference: &str, cfg: &BleuConfig) -> BleuStats {
    let h = cfg.tokenizer.tokenize(hyp);
    let r = cfg.tokenizer.tokenize(reference);
    let h: Vec<&str> = h.split_whitespace().collect();
    let r: Vec<&str> = r.split_whitespace().collect();
    let mut st = BleuStats::zero(cfg.max_order);
    st.hyp_len = h.len() as u64;
    st.ref_len = r.len() as u64;
    for n in 1..=cfg.max_order {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        st.total[n - 1] = h.len().saturating_sub(n - 1) as u64;
        st.correct[n - 1] = hc
            .iter()
            .map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0)))
            .sum();
    }
    st
}

pub fn bleu_stats(hypotheses: &[String], references: &[String], cfg: &BleuConfig) -> Result<BleuStats> {
    check_bleu_config(cfg)?;
    check_corpus(hypotheses, references, "bleu")?;
    Ok(hypotheses
        .par_iter()
        .zip(references)
        .map(|(h, r)| segment_bleu_stats(h, r, cfg))
        .reduce(|| BleuStats::zero(cfg.max_order), BleuStats::add))
}

/// Corpus-level BLEU in [0, 100].
pub fn bleu(hypotheses: &[String], references: &[String], cfg: &BleuConfig) -> Result<f64> {
    Ok(bleu_stats(hypotheses, references, cfg)?.score(cfg.smoothing))
}

/// Per-order character n-gram counts: (hypothesis, reference, matched).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ChrfStats {
    pub hyp: Vec<u64>,
    pub reference: Vec<u64>,
    pub matched: Vec<u64>,
}

impl ChrfStats {
    fn zero(order: usize) -> Self {
        ChrfStats {
            hyp: vec![0; order],
            reference: vec![0; order],
            matched: vec![0; order],
        }
    }

    fn add(mut self, other: ChrfStats) -> Self {
        for i in 0..self.hyp.len() {
            self.hyp[i] += other.hyp[i];
            self.reference[i] += other.reference[i];
            self.matched[i] += other.matched[i];
        }
        self
    }

    /// F-beta of the precision and recall averaged over the orders where
    /// both sides have n-grams, scaled to [0, 100].
    pub fn score(&self, beta: f64) -> f64 {
        let factor = beta * beta;
        let (mut p, mut r, mut eff) = (0.0, 0.0, 0usize);
        for i in 0..self.hyp.len() {
            if self.hyp[i] > 0 && self.reference[i] > 0 {
                p += self.matched[i] as f64 / self.hyp[i] as f64;
                r += self.matched[i] as f64 / self.reference[i] as f64;
                eff += 1;
            }
        }
        if eff == 0 {
            return 0.0;
        }
        p /= eff as f64;
        r /= eff as f64;
        if p + r == 0.0 {
            return 0.0;
        }
        100.0 * (1.0 + factor) * p * r / (factor * p + r)
    }
}

fn segment_chrf_stats(hyp: &str, reference: &str, order: usize) -> ChrfStats {
    let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let mut st = ChrfStats::zero(order);
    for n in 1..=order {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        st.hyp[n - 1] = hc.values().sum();
        st.reference[n - 1] = rc.values().sum();
        st.matched[n - 1] = hc
            .iter()
            .map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0)))
            .sum();
    }
    st
}

pub fn chrf_stats(hypotheses: &[String], references: &[String], cfg: &ChrfConfig) -> Result<ChrfStats> {
    if cfg.char_order == 0 || !(cfg.beta > 0.0) {
        return Err(Error::Config(format!(
            "chrF needs char_order >= 1 and beta > 0, got {} and {}",
            cfg.char_order, cfg.beta
        )));
    }
    check_corpus(hypotheses, references, "chrf")?;
    Ok(hypotheses
        .par_iter()
        .zip(references)
        .map(|(h, r)| segment_chrf_stats(h, r, cfg.char_order))
        .reduce(|| ChrfStats::zero(cfg.char_order), ChrfStats::add))
}

/// Corpus-level chrF in [0, 100]. Whitespace is ignored.
pub fn chrf(hypotheses: &[String], references: &[String], cfg: &ChrfConfig) -> Result<f64> {
    Ok(chrf_stats(hypotheses, references, cfg)?.score(cfg.beta))
}

/// BLEU of `output_a` scored against `output_b` as the reference.
pub fn cross_bleu(output_a: &[String], output_b: &[String], cfg: &BleuConfig) -> Result<f64> {
    bleu(output_a, output_b, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossBleuMatrix {
    pub systems: Vec<String>,
    /// `scores[i][j]` is system i scored against system j.
    pub scores: Vec<Vec<f64>>,
    /// Per system, the mean of `scores[i][j]` over every j != i.
    pub averages: Vec<f64>,
}

pub fn cross_bleu_matrix(outputs: &[(String, Vec<String>)], cfg: &BleuConfig) -> Result<CrossBleuMatrix> {
    if outputs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "cross-BLEU matrix needs at least 2 systems, got {}",
            outputs.len()
        )));
    }
    let s = outputs.len();
    let cells: Vec<(usize, usize)> = (0..s).flat_map(|i| (0..s).map(move |j| (i, j))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| cross_bleu(&outputs[i].1, &outputs[j].1, cfg))
        .collect::<Result<_>>()?;
    let scores: Vec<Vec<f64>> = values.chunks(s).map(<[f64]>::to_vec).collect();
    let averages = scores
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let others: Vec<f64> = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| *v)
                .collect();
            crate::stats::stable_sum(&others) / others.len() as f64
        })
        .collect();
    Ok(CrossBleuMatrix {
        systems: outputs.iter().map(|(n, _)| n.clone()).collect(),
        scores,
        averages,
    })
}
