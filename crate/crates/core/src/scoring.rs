//! Segment and system scores from token log-probabilities: aggregation
//! statistics, K-sample regularization, confidence thresholds and the
//! threshold grid search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{HumanJudgments, LanguagePair, SystemTable, TokenScoredSegment};
use crate::error::{Error, Result};
use crate::meta::metric_report;
use crate::stats::{median, stable_mean, stable_sum};

/// How token log-probabilities become a segment score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum AggregationMethod {
    Sum,
    Mean,
    Median,
    Min,
    /// Negated population standard deviation, so higher is better.
    NegStdDev,
    /// Maps the mean token log-probability to -1 / 0 / +1.
    ConfidenceThreshold { low: f64, high: f64 },
}

impl AggregationMethod {
    pub fn threshold(low: f64, high: f64) -> Result<Self> {
        check_thresholds(low, high)?;
        Ok(AggregationMethod::ConfidenceThreshold { low, high })
    }

    pub fn name(&self) -> &'static str {
        match self {
            AggregationMethod::Sum => "sum",
            AggregationMethod::Mean => "mean",
            AggregationMethod::Median => "median",
            AggregationMethod::Min => "min",
            AggregationMethod::NegStdDev => "negstd",
            AggregationMethod::ConfidenceThreshold { .. } => "threshold",
        }
    }
}

impl fmt::Display for AggregationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregationMethod::ConfidenceThreshold { low, high } => write!(f, "threshold({low},{high})"),
            m => f.write_str(m.name()),
        }
    }
}

/// Parses the method names accepted by the command line; thresholds take
/// the default (-1, -0.6) and can be replaced afterwards.
impl FromStr for AggregationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sum" => AggregationMethod::Sum,
            "mean" => AggregationMethod::Mean,
            "median" => AggregationMethod::Median,
            "min" => AggregationMethod::Min,
            "negstd" => AggregationMethod::NegStdDev,
            "threshold" => AggregationMethod::ConfidenceThreshold {
                low: DEFAULT_THRESHOLDS.0,
                high: DEFAULT_THRESHOLDS.1,
            },
            other => return Err(Error::Config(format!("unknown aggregation method {other:?}"))),
        })
    }
}

/// Thresholds `(low, high)` tuned on WMT18 development data.
pub const DEFAULT_THRESHOLDS: (f64, f64) = (-1.0, -0.6);

fn check_thresholds(low: f64, high: f64) -> Result<()> {
    if !(low.is_finite() && high.is_finite()) || !(low < high) || high > 0.0 {
        return Err(Error::Config(format!(
            "thresholds need low < high <= 0, got ({low}, {high})"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SegmentScore {
    pub seg_id: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemScore {
    pub system_name: String,
    pub lang_pair: LanguagePair,
    pub value: f64,
    pub method: AggregationMethod,
    pub n_segments: usize,
}

impl SystemScore {
    pub fn from_segments(
        system_name: impl Into<String>,
        lang_pair: LanguagePair,
        method: AggregationMethod,
        segments: &[SegmentScore],
    ) -> Result<Self> {
        Ok(SystemScore {
            system_name: system_name.into(),
            lang_pair,
            value: system_score(segments)?,
            method,
            n_segments: segments.len(),
        })
    }
}

/// Applies a statistic to a log-probability sequence.
pub fn aggregate_logprobs(logprobs: &[f64], method: AggregationMethod) -> Result<f64> {
    if logprobs.is_empty() {
        return Err(Error::Empty("segment has no tokens".into()));
    }
    let t = logprobs.len() as f64;
    Ok(match method {
        AggregationMethod::Sum => stable_sum(logprobs),
        AggregationMethod::Mean => stable_sum(logprobs) / t,
        AggregationMethod::Median => median(logprobs).expect("nonempty"),
        AggregationMethod::Min => logprobs.iter().copied().fold(f64::INFINITY, f64::min),
        AggregationMethod::NegStdDev => {
            let mean = stable_sum(logprobs) / t;
            let sq: Vec<f64> = logprobs.iter().map(|x| (x - mean) * (x - mean)).collect();
            -(stable_sum(&sq) / t).sqrt()
        }
        AggregationMethod::ConfidenceThreshold { low, high } => {
            check_thresholds(low, high)?;
            threshold_value(stable_sum(logprobs) / t, low, high)
        }
    })
}

/// -1 below `low`, +1 above `high`, 0 in between (boundaries included).
pub fn threshold_value(mean_logprob: f64, low: f64, high: f64) -> f64 {
    if mean_logprob < low {
        -1.0
    } else if mean_logprob > high {
        1.0
    } else {
        0.0
    }
}

pub fn aggregate_segment(seg: &TokenScoredSegment, method: AggregationMethod) -> Result<SegmentScore> {
    Ok(SegmentScore {
        seg_id: seg.seg_id(),
        value: aggregate_logprobs(seg.logprobs(), method)?,
    })
}

pub fn threshold_segment(seg: &TokenScoredSegment, low: f64, high: f64) -> Result<SegmentScore> {
    aggregate_segment(seg, AggregationMethod::threshold(low, high)?)
}

/// How K regularization samples of a segment are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SampleMode {
    /// Samples share a tokenization (MC-dropout); average per token.
    Token,
    /// Samples may differ in tokenization (subword sampling); average the
    /// segment log-probabilities.
    Segment,
}

impl FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(SampleMode::Token),
            "segment" => Ok(SampleMode::Segment),
            other => Err(Error::Config(format!("unknown sample mode {other:?}"))),
        }
    }
}

/// Per-token mean across samples with identical token sequences.
pub fn regularize_tokens(samples: &[TokenScoredSegment]) -> Result<TokenScoredSegment> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Empty("no regularization samples".into()))?;
    if samples.len() == 1 {
        return Ok(first.clone());
    }
    if let Some(s) = samples
        .iter()
        .find(|s| s.tokens() != first.tokens() || s.seg_id() != first.seg_id())
    {
        return Err(Error::TokenizationMismatch { seg_id: s.seg_id() });
    }
    let k = samples.len() as f64;
    let logprobs = (0..first.len())
        .map(|t| {
            let col: Vec<f64> = samples.iter().map(|s| s.logprobs()[t]).collect();
            if col.iter().all(|&v| v == col[0]) {
                return col[0];
            }
            (stable_sum(&col) / k).min(0.0)
        })
        .collect();
    TokenScoredSegment::new(first.seg_id(), first.tokens().to_vec(), logprobs)
}

/// Segment-level regularized estimate: the mean over samples of the
/// segment log-probability, optionally divided by the mean sample length.
pub fn regularize_segment(samples: &[TokenScoredSegment], length_normalize: bool) -> Result<SegmentScore> {
    let (sum, len) = segment_sample_stats(samples)?;
    Ok(SegmentScore {
        seg_id: samples[0].seg_id(),
        value: if length_normalize { sum / len } else { sum },
    })
}

/// Mean segment log-probability and mean length over samples.
fn segment_sample_stats(samples: &[TokenScoredSegment]) -> Result<(f64, f64)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Empty("no regularization samples".into()))?;
    if let Some(s) = samples.iter().find(|s| s.seg_id() != first.seg_id()) {
        return Err(Error::Structure {
            context: format!("segment {}", first.seg_id()),
            message: format!("sample for seg {} mixed in", s.seg_id()),
        });
    }
    let sums: Vec<f64> = samples.iter().map(|s| stable_sum(s.logprobs())).collect();
    let lens: Vec<f64> = samples.iter().map(|s| s.len() as f64).collect();
    Ok((stable_mean(&sums).expect("nonempty"), stable_mean(&lens).expect("nonempty")))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Regularized {
    Tokens(TokenScoredSegment),
    Segment(SegmentScore),
}

pub fn regularized_logprobs(samples: &[TokenScoredSegment], mode: SampleMode) -> Result<Regularized> {
    match mode {
        SampleMode::Token => regularize_tokens(samples).map(Regularized::Tokens),
        SampleMode::Segment => regularize_segment(samples, false).map(Regularized::Segment),
    }
}

/// Scores one sample-set of a segment under `method`.
///
/// In segment mode only length-level statistics are defined: Sum is the
/// mean sample log-probability, Mean divides it by the mean sample length,
/// and thresholds apply to that mean.
pub fn score_samples(samples: &[TokenScoredSegment], mode: SampleMode, method: AggregationMethod) -> Result<SegmentScore> {
    match mode {
        SampleMode::Token => aggregate_segment(&regularize_tokens(samples)?, method),
        SampleMode::Segment => {
            let (sum, len) = segment_sample_stats(samples)?;
            let value = match method {
                AggregationMethod::Sum => sum,
                AggregationMethod::Mean => sum / len,
                AggregationMethod::ConfidenceThreshold { low, high } => {
                    check_thresholds(low, high)?;
                    threshold_value(sum / len, low, high)
                }
                other => {
                    return Err(Error::Config(format!(
                        "method {other} needs token-level samples"
                    )))
                }
            };
            Ok(SegmentScore {
                seg_id: samples[0].seg_id(),
                value,
            })
        }
    }
}

/// Groups K sample files by seg_id. Every file must cover the same seg_ids.
pub fn align_samples(files: &[Vec<TokenScoredSegment>]) -> Result<Vec<Vec<TokenScoredSegment>>> {
    let first = files
        .first()
        .ok_or_else(|| Error::Empty("no regularization sample files".into()))?;
    let ids: Vec<usize> = first.iter().map(|s| s.seg_id()).collect();
    for (k, f) in files.iter().enumerate().skip(1) {
        let other: Vec<usize> = f.iter().map(|s| s.seg_id()).collect();
        if other != ids {
            return Err(Error::Structure {
                context: format!("sample {k}"),
                message: "seg_ids differ from sample 0".into(),
            });
        }
    }
    Ok((0..ids.len())
        .map(|i| files.iter().map(|f| f[i].clone()).collect())
        .collect())
}

/// Scores every segment of a system from K aligned sample files.
pub fn score_segments(
    files: &[Vec<TokenScoredSegment>],
    mode: SampleMode,
    method: AggregationMethod,
) -> Result<Vec<SegmentScore>> {
    align_samples(files)?
        .par_iter()
        .map(|samples| score_samples(samples, mode, method))
        .collect()
}

/// System score: arithmetic mean of segment scores.
pub fn system_score(segments: &[SegmentScore]) -> Result<f64> {
    let values: Vec<f64> = segments.iter().map(|s| s.value).collect();
    stable_mean(&values).ok_or_else(|| Error::Empty("system has no segment scores".into()))
}

/// Default threshold grid: 16 equally spaced points in [-3, 0].
pub fn default_grid() -> Vec<f64> {
    (0..16).map(|i| (i as f64 - 15.0) / 5.0).collect()
}

/// Development data for threshold tuning: token scores per system and
/// human system scores for one language pair.
#[derive(Clone, Debug)]
pub struct DevSet {
    pub lang_pair: LanguagePair,
    pub human: BTreeMap<String, f64>,
    pub systems: BTreeMap<String, Vec<TokenScoredSegment>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub low: f64,
    pub high: f64,
    pub correlation: f64,
}

/// Correlations within this distance are ties during grid search.
pub const GRID_TIE_TOLERANCE: f64 = 1e-12;

/// Fisher-weighted correlation of threshold scoring with thresholds
/// `(low, high)` over the dev sets, or None if undefined.
fn threshold_correlation(
    means: &[(LanguagePair, BTreeMap<String, Vec<f64>>)],
    human: &HumanJudgments,
    low: f64,
    high: f64,
) -> Option<f64> {
    let mut table = SystemTable::new();
    for (lp, systems) in means {
        for (name, ms) in systems {
            let vals: Vec<f64> = ms.iter().map(|&m| threshold_value(m, low, high)).collect();
            table.insert((lp.clone(), name.clone()), stable_mean(&vals)?);
        }
    }
    metric_report(human, &table).ok().map(|r| r.weighted_average)
}

/// Grid search over all `(low, high)` pairs with `low < high` from `grid`,
/// maximizing the outlier-filtered Fisher-weighted Pearson correlation.
/// Ties go to the smaller `high`, then the larger `low`.
pub fn tune_thresholds(dev: &[DevSet], grid: &[f64]) -> Result<ThresholdChoice> {
    if grid.len() < 2 {
        return Err(Error::Config("threshold grid needs at least 2 points".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|g| !g.is_finite() || *g > 0.0) {
        return Err(Error::Config("threshold grid must be strictly ascending and <= 0".into()));
    }
    if dev.is_empty() {
        return Err(Error::Config("no development data".into()));
    }
    let mut human_table = SystemTable::new();
    let mut means = Vec::new();
    for d in dev {
        let mut systems = BTreeMap::new();
        for (name, segs) in &d.systems {
            let h = d.human.get(name).ok_or_else(|| Error::MissingJudgment {
                lang_pair: d.lang_pair.to_string(),
                systems: vec![name.clone()],
            })?;
            human_table.insert((d.lang_pair.clone(), name.clone()), *h);
            let ms = segs
                .iter()
                .map(|s| aggregate_logprobs(s.logprobs(), AggregationMethod::Mean))
                .collect::<Result<Vec<_>>>()?;
            systems.insert(name.clone(), ms);
        }
        means.push((d.lang_pair.clone(), systems));
    }
    let human = HumanJudgments::new(human_table, None)?;

    let mut candidates = Vec::new();
    for (i, &low) in grid.iter().enumerate() {
        for &high in &grid[i + 1..] {
            candidates.push((low, high));
        }
    }
    let scored: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|&(l, h)| threshold_correlation(&means, &human, l, h))
        .collect();

    let mut best: Option<ThresholdChoice> = None;
    for (&(low, high), r) in candidates.iter().zip(scored) {
        let Some(r) = r else { continue };
        let better = match best {
            None => true,
            Some(b) if r > b.correlation + GRID_TIE_TOLERANCE => true,
            Some(b) if (r - b.correlation).abs() <= GRID_TIE_TOLERANCE => {
                high < b.high || (high == b.high && low > b.low)
            }
            _ => false,
        };
        if better {
            best = Some(ThresholdChoice {
                low,
                high,
                correlation: r,
            });
        }
    }
    best.ok_or_else(|| Error::Config("no threshold pair yields a defined correlation".into()))
}
