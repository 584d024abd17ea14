//! Meta-evaluation of a metric against human judgments: outlier filtering,
//! per-language-pair Pearson correlation, Fisher-weighted group averages,
//! Williams significance between two metrics, pairwise system comparisons
//! and test-set-size subsampling.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{segment_rows, HumanJudgments, LanguagePair, PairGroup, SegmentTable, SystemTable};
use crate::error::{Error, Result};
use crate::stats::{
    fisher_weighted_average, median, paired_t_test, pearson, rank_sum_test, stable_mean, williams_test, Tails,
    WilliamsResult,
};

/// Scale factor making the MAD a consistent estimator of the standard deviation.
pub const MAD_SCALE: f64 = 1.483;
/// Systems whose scaled deviation strictly exceeds this are outliers.
pub const MAD_CUTOFF: f64 = 2.5;
/// Minimum kept systems for a language pair to enter averages.
pub const MIN_RELIABLE_SYSTEMS: usize = 4;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OutlierSplit {
    pub kept: BTreeSet<String>,
    pub outliers: BTreeSet<String>,
}

/// Splits systems by `|h - med| / (1.483 * MAD) > 2.5`. When the MAD is zero
/// every system that deviates from the median at all is an outlier.
pub fn mad_outliers(human_scores: &BTreeMap<String, f64>) -> Result<OutlierSplit> {
    let values: Vec<f64> = human_scores.values().copied().collect();
    let med = median(&values).ok_or_else(|| Error::Domain("outlier filter on an empty score set".into()))?;
    let deviations: Vec<f64> = values.iter().map(|h| (h - med).abs()).collect();
    let mad = median(&deviations).expect("nonempty");
    let denom = MAD_SCALE * mad;
    let mut split = OutlierSplit::default();
    for (name, h) in human_scores {
        let dev = (h - med).abs();
        let is_outlier = if denom > 0.0 { dev / denom > MAD_CUTOFF } else { dev > 0.0 };
        if is_outlier {
            split.outliers.insert(name.clone());
        } else {
            split.kept.insert(name.clone());
        }
    }
    Ok(split)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub lang_pair: LanguagePair,
    pub r: f64,
    /// Systems remaining after outlier removal.
    pub n_systems: usize,
    pub outliers: Vec<String>,
    /// False when fewer than [`MIN_RELIABLE_SYSTEMS`] systems remain; such
    /// pairs are excluded from averages.
    pub reliable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ReportGroup {
    All,
    Pairs(PairGroup),
}

impl ReportGroup {
    pub const ORDER: [ReportGroup; 4] = [
        ReportGroup::All,
        ReportGroup::Pairs(PairGroup::EnXx),
        ReportGroup::Pairs(PairGroup::XxEn),
        ReportGroup::Pairs(PairGroup::XxYy),
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReportGroup::All => "All",
            ReportGroup::Pairs(g) => g.label(),
        }
    }

    pub fn contains(self, lp: &LanguagePair) -> bool {
        match self {
            ReportGroup::All => true,
            ReportGroup::Pairs(g) => lp.group() == g,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupAverage {
    pub group: ReportGroup,
    /// None when the group has no reliable language pair.
    pub average: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    /// Sorted by language pair.
    pub per_pair: Vec<CorrelationResult>,
    pub weighted_average: f64,
    /// All, en-xx, xx-en, xx-yy in that order.
    pub groups: Vec<GroupAverage>,
}

impl MetricReport {
    pub fn group(&self, g: ReportGroup) -> Option<f64> {
        self.groups.iter().find(|a| a.group == g).and_then(|a| a.average)
    }

    pub fn pair(&self, lp: &LanguagePair) -> Option<&CorrelationResult> {
        self.per_pair.iter().find(|c| &c.lang_pair == lp)
    }
}

/// Kept human and metric vectors (aligned, by system name) for one pair.
struct PairVectors {
    names: Vec<String>,
    human: Vec<f64>,
    metric: Vec<f64>,
    outliers: Vec<String>,
}

fn pair_vectors(lp: &LanguagePair, human: &BTreeMap<String, f64>, metric: &SystemTable) -> Result<PairVectors> {
    let split = mad_outliers(human)?;
    let mut v = PairVectors {
        names: Vec::new(),
        human: Vec::new(),
        metric: Vec::new(),
        outliers: split.outliers.into_iter().collect(),
    };
    let mut missing = Vec::new();
    for name in split.kept {
        match metric.get(&(lp.clone(), name.clone())) {
            Some(m) => {
                v.human.push(human[&name]);
                v.metric.push(*m);
                v.names.push(name);
            }
            None => missing.push(name),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingData(format!(
            "no metric score for {lp} system(s): {}",
            missing.join(", ")
        )));
    }
    Ok(v)
}

/// Outlier-filtered Pearson correlation for one language pair.
pub fn pair_correlation(
    lp: &LanguagePair,
    human: &BTreeMap<String, f64>,
    metric: &SystemTable,
) -> Result<CorrelationResult> {
    let v = pair_vectors(lp, human, metric)?;
    let r = pearson(&v.metric, &v.human).map_err(|e| match e {
        Error::UndefinedCorrelation(m) => Error::UndefinedCorrelation(format!("{lp}: {m}")),
        Error::InsufficientData(m) => Error::InsufficientData(format!("{lp}: {m}")),
        e => e,
    })?;
    Ok(CorrelationResult {
        lang_pair: lp.clone(),
        r,
        n_systems: v.names.len(),
        outliers: v.outliers,
        reliable: v.names.len() >= MIN_RELIABLE_SYSTEMS,
    })
}

/// Fisher-weighted average over the reliable results matching `group`.
pub fn group_average(per_pair: &[CorrelationResult], group: ReportGroup) -> Result<GroupAverage> {
    let items: Vec<(f64, f64)> = per_pair
        .iter()
        .filter(|c| c.reliable && group.contains(&c.lang_pair))
        .map(|c| (c.r, c.n_systems as f64))
        .collect();
    let average = if items.is_empty() {
        None
    } else {
        Some(fisher_weighted_average(&items)?)
    };
    Ok(GroupAverage {
        group,
        average,
        n_pairs: items.len(),
    })
}

/// Per-pair correlations for every language pair in `human`, with the
/// overall and per-group Fisher-weighted averages.
pub fn metric_report(human: &HumanJudgments, metric: &SystemTable) -> Result<MetricReport> {
    let pairs = human.lang_pairs();
    let per_pair = pairs
        .par_iter()
        .map(|lp| pair_correlation(lp, &human.systems(lp), metric))
        .collect::<Result<Vec<_>>>()?;
    let groups = ReportGroup::ORDER
        .iter()
        .map(|&g| group_average(&per_pair, g))
        .collect::<Result<Vec<_>>>()?;
    let weighted_average = groups[0].average.ok_or_else(|| {
        Error::InsufficientData(format!(
            "no language pair has at least {MIN_RELIABLE_SYSTEMS} systems after outlier removal"
        ))
    })?;
    Ok(MetricReport {
        per_pair,
        weighted_average,
        groups,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WilliamsComparison {
    pub lang_pair: LanguagePair,
    pub r_a: f64,
    pub r_b: f64,
    /// Correlation between the two metrics on the kept systems.
    pub r_ab: f64,
    pub n: usize,
    /// None when the test is not applicable (n < 4 or a degenerate matrix).
    pub test: Option<WilliamsResult>,
    /// Metric A correlates significantly better than metric B.
    pub a_better: bool,
    /// Metric B correlates significantly better than metric A.
    pub b_better: bool,
}

/// Williams significance marks between two metrics, per language pair.
pub fn compare_metrics(
    human: &HumanJudgments,
    metric_a: &SystemTable,
    metric_b: &SystemTable,
    tails: Tails,
    alpha: f64,
) -> Result<Vec<WilliamsComparison>> {
    human
        .lang_pairs()
        .into_iter()
        .map(|lp| {
            let h = human.systems(&lp);
            let a = pair_vectors(&lp, &h, metric_a)?;
            let b = pair_vectors(&lp, &h, metric_b)?;
            let r_a = pearson(&a.metric, &a.human)?;
            let r_b = pearson(&b.metric, &b.human)?;
            let r_ab = pearson(&a.metric, &b.metric)?;
            let n = a.names.len();
            let (test, a_better, b_better) = match williams_test(r_a, r_b, r_ab, n, tails) {
                Ok(w) => {
                    let (a_better, b_better) = match tails {
                        Tails::One => {
                            let reverse = williams_test(r_b, r_a, r_ab, n, Tails::One)?;
                            (w.p < alpha, reverse.p < alpha)
                        }
                        Tails::Two => (w.t > 0.0 && w.p < alpha, w.t < 0.0 && w.p < alpha),
                    };
                    (Some(w), a_better, b_better)
                }
                Err(Error::InsufficientData(_)) | Err(Error::Degenerate(_)) => (None, false, false),
                Err(e) => return Err(e),
            };
            Ok(WilliamsComparison {
                lang_pair: lp,
                r_a,
                r_b,
                r_ab,
                n,
                test,
                a_better,
                b_better,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DecisionCounts {
    /// Metric difference significant and in the human direction.
    pub correct: usize,
    /// Metric difference significant against the human direction.
    pub incorrect: usize,
    /// Metric difference not significant.
    pub not_significant: usize,
}

impl DecisionCounts {
    pub fn total(&self) -> usize {
        self.correct + self.incorrect + self.not_significant
    }
}

/// Pairwise ranking decisions split by human significance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PairwiseTally {
    pub human_significant: DecisionCounts,
    pub human_not_significant: DecisionCounts,
}

impl PairwiseTally {
    pub fn total(&self) -> usize {
        self.human_significant.total() + self.human_not_significant.total()
    }

    pub fn merge(&mut self, other: &PairwiseTally) {
        let add = |a: &mut DecisionCounts, b: &DecisionCounts| {
            a.correct += b.correct;
            a.incorrect += b.incorrect;
            a.not_significant += b.not_significant;
        };
        add(&mut self.human_significant, &other.human_significant);
        add(&mut self.human_not_significant, &other.human_not_significant);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Decision {
    Correct,
    Incorrect,
    NotSignificant,
}

/// Classification of one system pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairDecision {
    pub system_a: String,
    pub system_b: String,
    pub human_significant: bool,
    pub human_p: f64,
    pub metric_p: f64,
    pub decision: Decision,
}

/// Classifies one system pair. Human significance comes from a two-sided
/// rank-sum test on the human segment scores, human direction from the
/// system-level human scores; metric significance and direction from a
/// two-sided paired t-test on metric segment scores joined by seg_id.
pub fn compare_system_pair(
    system_a: &str,
    system_b: &str,
    human_system: (f64, f64),
    human_segments: (&BTreeMap<usize, f64>, &BTreeMap<usize, f64>),
    metric_segments: (&BTreeMap<usize, f64>, &BTreeMap<usize, f64>),
    alpha: f64,
) -> Result<PairDecision> {
    let ha: Vec<f64> = human_segments.0.values().copied().collect();
    let hb: Vec<f64> = human_segments.1.values().copied().collect();
    let human = rank_sum_test(&ha, &hb)?;
    let (ma, mb): (Vec<f64>, Vec<f64>) = metric_segments
        .0
        .iter()
        .filter_map(|(id, a)| metric_segments.1.get(id).map(|b| (*a, *b)))
        .unzip();
    if ma.len() < 2 {
        return Err(Error::MissingData(format!(
            "{system_a} and {system_b} share {} metric-scored segments, need at least 2",
            ma.len()
        )));
    }
    let metric = paired_t_test(&ma, &mb)?;
    let human_significant = human.p < alpha;
    let human_dir = (human_system.0 - human_system.1).signum();
    let decision = if metric.p >= alpha {
        Decision::NotSignificant
    } else if human_system.0 != human_system.1 && metric.mean_diff.signum() == human_dir {
        Decision::Correct
    } else {
        Decision::Incorrect
    };
    Ok(PairDecision {
        system_a: system_a.to_string(),
        system_b: system_b.to_string(),
        human_significant,
        human_p: human.p,
        metric_p: metric.p,
        decision,
    })
}

/// Classifies every unordered system pair of one language pair.
pub fn pairwise_decisions(
    lp: &LanguagePair,
    human: &HumanJudgments,
    metric_segments: &SegmentTable,
    alpha: f64,
) -> Result<Vec<PairDecision>> {
    let systems = human.systems(lp);
    if systems.len() < 2 {
        return Err(Error::InsufficientData(format!("{lp}: pairwise comparison needs 2 systems")));
    }
    let human_seg = human
        .segment_scores()
        .ok_or_else(|| Error::MissingData("no human segment scores".into()))?;
    let mut hs = BTreeMap::new();
    let mut ms = BTreeMap::new();
    for name in systems.keys() {
        let h: BTreeMap<usize, f64> = segment_rows(human_seg, lp, name).collect();
        let m: BTreeMap<usize, f64> = segment_rows(metric_segments, lp, name).collect();
        if h.is_empty() {
            return Err(Error::MissingData(format!("no human segment scores for {lp}/{name}")));
        }
        if m.is_empty() {
            return Err(Error::MissingData(format!("no metric segment scores for {lp}/{name}")));
        }
        hs.insert(name.clone(), h);
        ms.insert(name.clone(), m);
    }
    let names: Vec<&String> = systems.keys().collect();
    let mut pairs = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            pairs.push((names[i], names[j]));
        }
    }
    pairs
        .par_iter()
        .map(|(a, b)| {
            compare_system_pair(
                a,
                b,
                (systems[*a], systems[*b]),
                (&hs[*a], &hs[*b]),
                (&ms[*a], &ms[*b]),
                alpha,
            )
        })
        .collect()
}

pub fn tally(decisions: &[PairDecision]) -> PairwiseTally {
    let mut t = PairwiseTally::default();
    for d in decisions {
        let c = if d.human_significant {
            &mut t.human_significant
        } else {
            &mut t.human_not_significant
        };
        match d.decision {
            Decision::Correct => c.correct += 1,
            Decision::Incorrect => c.incorrect += 1,
            Decision::NotSignificant => c.not_significant += 1,
        }
    }
    t
}

/// Six-count tally over all unordered system pairs of one language pair.
pub fn pairwise_compare(
    lp: &LanguagePair,
    human: &HumanJudgments,
    metric_segments: &SegmentTable,
    alpha: f64,
) -> Result<PairwiseTally> {
    Ok(tally(&pairwise_decisions(lp, human, metric_segments, alpha)?))
}

/// Seed for one subsampling draw, derived from the run seed, subset size
/// and draw index.
pub fn derive_seed(seed: u64, size: usize, draw: usize) -> u64 {
    let mut z = seed ^ (size as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (draw as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean outlier-filtered correlation per subset size.
///
/// `metric_segments` maps system name to its per-segment metric scores; every
/// system must cover the same seg_ids. For each size, `draws` subsets are
/// drawn without replacement, system scores are recomputed as the mean over
/// the subset, and the Pearson correlation with the human system scores of
/// the kept systems is averaged over draws.
pub fn subsample_correlations(
    lp: &LanguagePair,
    human: &BTreeMap<String, f64>,
    metric_segments: &BTreeMap<String, BTreeMap<usize, f64>>,
    sizes: &[usize],
    draws: usize,
    seed: u64,
) -> Result<BTreeMap<usize, f64>> {
    if draws == 0 {
        return Err(Error::Config("draws must be at least 1".into()));
    }
    let split = mad_outliers(human)?;
    let kept: Vec<&String> = split.kept.iter().collect();
    let mut ids: Option<Vec<usize>> = None;
    let mut columns = Vec::with_capacity(kept.len());
    for name in &kept {
        let segs = metric_segments
            .get(*name)
            .ok_or_else(|| Error::MissingData(format!("no metric segment scores for {lp}/{name}")))?;
        let these: Vec<usize> = segs.keys().copied().collect();
        match &ids {
            None => ids = Some(these),
            Some(first) if *first != these => {
                return Err(Error::Alignment {
                    systems: vec![name.to_string()],
                })
            }
            _ => {}
        }
        columns.push(segs.values().copied().collect::<Vec<f64>>());
    }
    let n_total = ids.map(|v| v.len()).unwrap_or(0);
    let human_vec: Vec<f64> = kept.iter().map(|n| human[*n]).collect();
    let mut out = BTreeMap::new();
    for &size in sizes {
        if size == 0 || size > n_total {
            return Err(Error::Domain(format!(
                "{lp}: subset size {size} outside 1..={n_total}"
            )));
        }
        let rs = (0..draws)
            .into_par_iter()
            .map(|draw| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, size, draw));
                let mut chosen = rand::seq::index::sample(&mut rng, n_total, size).into_vec();
                chosen.sort_unstable();
                let scores: Vec<f64> = columns
                    .iter()
                    .map(|col| {
                        let vals: Vec<f64> = chosen.iter().map(|&i| col[i]).collect();
                        stable_mean(&vals).expect("size >= 1")
                    })
                    .collect();
                pearson(&scores, &human_vec)
            })
            .collect::<Result<Vec<f64>>>()?;
        out.insert(size, stable_mean(&rs).expect("draws >= 1"));
    }
    Ok(out)
}

/// Full-set outlier-filtered correlation computed from segment scores the
/// same way [`subsample_correlations`] does.
pub fn segment_level_correlation(
    lp: &LanguagePair,
    human: &BTreeMap<String, f64>,
    metric_segments: &BTreeMap<String, BTreeMap<usize, f64>>,
) -> Result<f64> {
    let table: SystemTable = metric_segments
        .iter()
        .map(|(name, segs)| {
            let vals: Vec<f64> = segs.values().copied().collect();
            let mean = stable_mean(&vals)
                .ok_or_else(|| Error::MissingData(format!("{lp}/{name} has no segments")))?;
            Ok(((lp.clone(), name.clone()), mean))
        })
        .collect::<Result<_>>()?;
    Ok(pair_correlation(lp, human, &table)?.r)
}
