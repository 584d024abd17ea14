//! Acceptance suite. Prints one PASS / FAIL / BLOCKED line per criterion and
//! exits non-zero if any criterion fails. Criteria 1 and 2 need the public
//! WMT19 metrics-task data, laid out as a dataset directory and pointed to
//! by `WMT19_DIR`; without it they report BLOCKED.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refless_core::data::{LanguagePair, SegmentTable, SystemTable, HumanJudgments};
use refless_core::ibm1::{score_tokens, train_model1};
use refless_core::meta::{mad_outliers, pairwise_decisions, subsample_correlations, tally};
use refless_core::scoring::{aggregate_segment, system_score, AggregationMethod};
use refless_core::stats::{fisher_weighted_average, paired_t_test, pearson, rank_sum_test, williams_test, Tails};
use refless_core::subword::{sampling_weights, train_unigram_traced, TrainConfig, UnigramSubwordModel};
use refless_core::synthetic::{
    correlation_benchmark, noise_benchmark, CorrelationBenchmarkConfig, NoiseBenchmarkConfig,
};
use serde_json::Value;
use statrs::distribution::{ChiSquared, ContinuousCDF};

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

use Outcome::*;

type Criterion = fn() -> Outcome;

const BIN: &str = env!("CARGO_BIN_EXE_refless");

fn main() {
    let criteria: [(u8, &str, Criterion); 9] = [
        (1, "WMT19 BLEU correlations", wmt19_bleu),
        (2, "WMT19 outlier lists", wmt19_outliers),
        (3, "toy scorer on the noise benchmark", toy_scorer_noise),
        (4, "statistics oracle suite", stats_oracles),
        (5, "MAD filter properties", mad_properties),
        (6, "subword suite", subword_suite),
        (7, "subsampling trend", subsampling_trend),
        (8, "pairwise tally identity", pairwise_identity),
        (9, "end-to-end determinism", determinism),
    ];
    // Failures are reported through the summary line, not the panic hook.
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, f) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Fail(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Blocked(d) => ("BLOCKED", d),
        };
        println!("{tag} criterion {n} ({name}) [{secs:.1}s]: {detail}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn refless(args: &[&str]) -> std::process::Output {
    let out = Command::new(BIN).args(args).output().expect("run refless");
    assert!(
        out.status.success(),
        "refless {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn wmt19_dir() -> Option<PathBuf> {
    std::env::var_os("WMT19_DIR").map(PathBuf::from).filter(|p| p.is_dir())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

// Published BLEU row: per-pair correlations and group averages.
const BLEU_PAIRS: [(&str, f64); 18] = [
    ("en-cs", 0.994),
    ("en-de", 0.806),
    ("en-fi", 0.939),
    ("en-gu", 0.737),
    ("en-kk", 0.575),
    ("en-lt", 0.986),
    ("en-ru", 0.946),
    ("en-zh", 0.802),
    ("de-en", 0.794),
    ("fi-en", 0.985),
    ("gu-en", 0.975),
    ("kk-en", 0.912),
    ("lt-en", 0.967),
    ("ru-en", 0.812),
    ("zh-en", 0.808),
    ("de-cs", 0.743),
    ("de-fr", 0.891),
    ("fr-de", 0.846),
];
const BLEU_GROUPS: [(&str, f64); 4] = [("All", 0.911), ("en-xx", 0.917), ("xx-en", 0.921), ("xx-yy", 0.838)];

fn wmt19_bleu() -> Outcome {
    let Some(dir) = wmt19_dir() else {
        return Blocked("WMT19_DIR not set; the data cannot be downloaded here".into());
    };
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("bleu.tsv");
    let report = tmp.path().join("report.json");
    let start = Instant::now();
    refless(&["bleu", "--dataset", dir.to_str().unwrap(), "-o", scores.to_str().unwrap()]);
    refless(&[
        "meta-eval",
        "--human",
        dir.join("human.tsv").to_str().unwrap(),
        "--scores",
        &format!("bleu={}", scores.display()),
        "--format",
        "json",
        "-o",
        report.to_str().unwrap(),
    ]);
    let elapsed = start.elapsed();
    let v = read_json(&report);
    let metric = &v["metrics"][0]["report"];
    let mut problems = Vec::new();
    let mut worst: f64 = 0.0;
    for (lp, want) in BLEU_PAIRS {
        let got = metric["per_pair"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["lang_pair"] == lp)
            .and_then(|c| c["r"].as_f64());
        match got {
            Some(r) if (r - want).abs() <= 0.02 => worst = worst.max((r - want).abs()),
            Some(r) => problems.push(format!("{lp} {r:.3} vs {want}")),
            None => problems.push(format!("{lp} missing")),
        }
    }
    for (g, want) in BLEU_GROUPS {
        let got = metric["groups"]
            .as_array()
            .unwrap()
            .iter()
            .find(|a| a["group"] == g || a["group"]["Pairs"] == g)
            .and_then(|a| a["average"].as_f64());
        match got {
            Some(r) if (r - want).abs() <= 0.015 => {}
            Some(r) => problems.push(format!("{g} {r:.3} vs {want}")),
            None => problems.push(format!("{g} missing")),
        }
    }
    if elapsed > Duration::from_secs(300) {
        problems.push(format!("runtime {:.0}s", elapsed.as_secs_f64()));
    }
    if problems.is_empty() {
        Pass(format!("18 pairs within 0.02 (worst {worst:.3}), groups within 0.015"))
    } else {
        Fail(problems.join("; "))
    }
}

const OUTLIERS: [(&str, &[&str]); 18] = [
    ("de-cs", &["CAiRE.6949"]),
    ("de-en", &["online-X.0"]),
    ("de-fr", &[]),
    ("en-cs", &[]),
    ("en-de", &["online-X.0", "en_de_task.6790"]),
    ("en-fi", &["apertium-fin-eng-unconstrained-en-fi.6448"]),
    ("en-gu", &[]),
    ("en-kk", &["NICT.6550", "DBMS-KU_ENKK.6730"]),
    ("en-lt", &[]),
    ("en-ru", &["NICT.6563"]),
    ("en-zh", &[]),
    ("fi-en", &[]),
    ("fr-de", &["MSRA.MADL.6893", "eTranslation.6262", "online-X.0"]),
    ("gu-en", &["Ju_Saarland.6525"]),
    ("kk-en", &["UMD.6736", "DBMS-KU_KKEN.6726"]),
    ("lt-en", &["online-X.0"]),
    ("ru-en", &["NICT.6561"]),
    ("zh-en", &["online-X.0", "Apprentice-c.6706"]),
];

fn wmt19_outliers() -> Outcome {
    let Some(dir) = wmt19_dir() else {
        return Blocked("WMT19_DIR not set; the data cannot be downloaded here".into());
    };
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("outliers.json");
    refless(&[
        "outliers",
        "--human",
        dir.join("human.tsv").to_str().unwrap(),
        "--format",
        "json",
        "-o",
        out.to_str().unwrap(),
    ]);
    let v = read_json(&out);
    let mut problems = Vec::new();
    for (lp, want) in OUTLIERS {
        let want: BTreeSet<&str> = want.iter().copied().collect();
        match v[lp]["outliers"].as_array() {
            Some(got) => {
                let got: BTreeSet<&str> = got.iter().map(|s| s.as_str().unwrap()).collect();
                if got != want {
                    problems.push(format!("{lp}: {got:?} vs {want:?}"));
                }
            }
            None => problems.push(format!("{lp} missing")),
        }
    }
    if problems.is_empty() {
        Pass("all 18 language pairs match exactly".into())
    } else {
        Fail(problems.join("; "))
    }
}

fn toy_scorer_noise() -> Outcome {
    let mut lines = Vec::new();
    for seed in [1u64, 2, 3, 4, 5] {
        let bench = noise_benchmark(&NoiseBenchmarkConfig::new(seed)).unwrap();
        assert_eq!(bench.systems.len(), 6);
        assert_eq!(bench.references.len(), 1000);
        let table = train_model1(&bench.train, 5).unwrap();
        let mut scores = Vec::new();
        let mut negated = Vec::new();
        for sys in &bench.systems {
            let segs: Vec<_> = sys
                .outputs
                .iter()
                .zip(&bench.sources)
                .enumerate()
                .map(|(i, (y, x))| aggregate_segment(&score_tokens(&table, i, x, y).unwrap(), AggregationMethod::Mean).unwrap())
                .collect();
            scores.push(system_score(&segs).unwrap());
            negated.push(-sys.noise_rate);
        }
        let monotone = scores.windows(2).all(|w| w[0] > w[1]);
        let r = pearson(&scores, &negated).unwrap();
        if !monotone || r < 0.95 {
            return Fail(format!("seed {seed}: monotone={monotone} r={r:.4} scores={scores:?}"));
        }
        lines.push(format!("{r:.3}"));
    }
    Pass(format!("strictly monotone for 5 seeds, r = {}", lines.join(", ")))
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn stats_oracles() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/stats_oracle.json");
    let o = read_json(Path::new(path));
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6;
    let mut counts = BTreeMap::new();
    let mut problems = Vec::new();
    let mut check = |family: &str, ok: bool, case: &Value| {
        *counts.entry(family.to_string()).or_insert(0usize) += 1;
        if !ok {
            problems.push(format!("{family}: {case}"));
        }
    };
    for c in o["pearson"].as_array().unwrap() {
        let r = pearson(&floats(&c["x"]), &floats(&c["y"])).unwrap();
        check("pearson", close(r, c["r"].as_f64().unwrap()), c);
    }
    for c in o["fisher"].as_array().unwrap() {
        let pairs: Vec<(f64, f64)> = floats(&c["r"]).into_iter().zip(floats(&c["w"])).collect();
        check("fisher", close(fisher_weighted_average(&pairs).unwrap(), c["avg"].as_f64().unwrap()), c);
    }
    for c in o["williams"].as_array().unwrap() {
        let (r1, r2, r12) = (c["r1h"].as_f64().unwrap(), c["r2h"].as_f64().unwrap(), c["r12"].as_f64().unwrap());
        let n = c["n"].as_u64().unwrap() as usize;
        let one = williams_test(r1, r2, r12, n, Tails::One).unwrap();
        let two = williams_test(r1, r2, r12, n, Tails::Two).unwrap();
        let ok = close(one.t, c["t"].as_f64().unwrap())
            && close(one.p, c["p_one"].as_f64().unwrap())
            && close(two.p, c["p_two"].as_f64().unwrap());
        check("williams", ok, c);
    }
    for c in o["ranksum"].as_array().unwrap() {
        let res = rank_sum_test(&floats(&c["a"]), &floats(&c["b"])).unwrap();
        let ok = res.exact == c["exact"].as_bool().unwrap()
            && close(res.w, c["w"].as_f64().unwrap())
            && close(res.p, c["p"].as_f64().unwrap());
        check("wilcoxon", ok, c);
    }
    for c in o["paired_t"].as_array().unwrap() {
        let res = paired_t_test(&floats(&c["a"]), &floats(&c["b"])).unwrap();
        check("paired_t", close(res.t, c["t"].as_f64().unwrap()) && close(res.p, c["p"].as_f64().unwrap()), c);
    }
    // Hand-derived examples.
    let w = williams_test(0.9, 0.8, 0.7, 12, Tails::One).unwrap();
    let derived = [
        close(w.t, 1.0034138671442119) && close(w.p, 0.17093731108110494),
        close(pearson(&[1.0, 2.0, 3.0, 4.0], &[1.2, 1.9, 3.3, 3.9]).unwrap(), 0.9874961105449667),
        close(fisher_weighted_average(&[(0.8, 8.0), (0.9, 16.0)]).unwrap(), 0.8735054747536375),
    ];
    if derived.iter().any(|ok| !ok) {
        problems.push(format!("worked examples: {derived:?}"));
    }
    let few: Vec<String> = counts.iter().filter(|(_, &n)| n < 20).map(|(k, n)| format!("{k}={n}")).collect();
    if !few.is_empty() {
        problems.push(format!("fewer than 20 cases: {}", few.join(", ")));
    }
    if problems.is_empty() {
        let summary: Vec<String> = counts.iter().map(|(k, n)| format!("{k} {n}")).collect();
        Pass(format!("all within 1e-6 ({})", summary.join(", ")))
    } else {
        Fail(problems.join("; "))
    }
}

fn named(values: &[f64]) -> BTreeMap<String, f64> {
    values.iter().enumerate().map(|(i, v)| (format!("s{i:02}"), *v)).collect()
}

fn outlier_names(values: &[(&str, f64)]) -> BTreeSet<String> {
    let m: BTreeMap<String, f64> = values.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    mad_outliers(&m).unwrap().outliers
}

fn mad_properties() -> Outcome {
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let worked = outlier_names(&[("A", 0.1), ("B", 0.2), ("C", 0.25), ("D", 0.3), ("E", 0.9)]);
    if worked != set(&["E"]) {
        return Fail(format!("worked example gave {worked:?}"));
    }
    let equal = outlier_names(&[("A", 3.0), ("B", 3.0), ("C", 3.0)]);
    if !equal.is_empty() {
        return Fail(format!("equal scores gave {equal:?}"));
    }
    let zero_mad = outlier_names(&[("A", 1.0), ("B", 1.0), ("C", 1.0), ("D", 1.0 + 1e-9), ("E", 0.5)]);
    if zero_mad != set(&["D", "E"]) {
        return Fail(format!("MAD = 0 case gave {zero_mad:?}"));
    }
    // Integer scores under power-of-two scaling and integer shifts are
    // represented exactly, so the partition must not move at all.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cases = 2000;
    for case in 0..cases {
        let n = rng.random_range(2..25);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1000..1000) as f64).collect();
        let scale = 2f64.powi(rng.random_range(-4..6));
        let shift = rng.random_range(-1000..1000) as f64;
        let moved: Vec<f64> = raw.iter().map(|s| s * scale + shift).collect();
        if mad_outliers(&named(&raw)).unwrap() != mad_outliers(&named(&moved)).unwrap() {
            return Fail(format!("affine case {case}: {raw:?} x{scale} +{shift}"));
        }
    }
    Pass(format!("worked example, equal scores, MAD = 0 and {cases} affine cases exact"))
}

/// Every segmentation of `text[start..]` with its score.
fn enumerate(model: &UnigramSubwordModel, text: &[char], start: usize) -> Vec<(Vec<String>, f64)> {
    if start == text.len() {
        return vec![(Vec::new(), 0.0)];
    }
    let mut out = Vec::new();
    for end in start + 1..=text.len() {
        let piece: String = text[start..end].iter().collect();
        if let Some(lp) = model.logprob(&piece) {
            for (mut rest, score) in enumerate(model, text, end) {
                rest.insert(0, piece.clone());
                out.push((rest, lp + score));
            }
        }
    }
    out
}

const ALPHABET: [char; 4] = ['a', 'b', 'c', 'd'];

fn random_vocab(rng: &mut ChaCha8Rng, size: usize) -> UnigramSubwordModel {
    let mut pieces: BTreeSet<String> = ALPHABET.iter().map(|c| c.to_string()).collect();
    while pieces.len() < size {
        let len = rng.random_range(2..=4);
        pieces.insert((0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect());
    }
    let weights: Vec<f64> = (0..size).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    UnigramSubwordModel::new(pieces.into_iter().zip(weights.iter().map(|w| (w / total).ln()))).unwrap()
}

fn subword_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut max_segs = 0;
    for case in 0..200 {
        let model = random_vocab(&mut rng, 50);
        let len = rng.random_range(1..=12);
        let text: String = (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect();
        let chars: Vec<char> = text.chars().collect();
        let mut all = enumerate(&model, &chars, 0);
        all.sort_by(|a, b| b.1.total_cmp(&a.1));
        max_segs = max_segs.max(all.len());
        let scores: BTreeMap<Vec<String>, f64> = all.iter().cloned().collect();
        for n in [10, all.len()] {
            let list = model.nbest(&text, n).unwrap();
            if list.len() != n.min(all.len()) {
                return Fail(format!("case {case} {text:?}: {} of {} segmentations", list.len(), n.min(all.len())));
            }
            let distinct: BTreeSet<&Vec<String>> = list.iter().map(|s| &s.pieces).collect();
            if distinct.len() != list.len() {
                return Fail(format!("case {case} {text:?}: duplicate segmentations"));
            }
            for (got, want) in list.iter().zip(&all) {
                let own = scores.get(&got.pieces);
                if (got.score - want.1).abs() > 1e-9 || own.is_none_or(|s| (s - got.score).abs() > 1e-9) {
                    return Fail(format!("case {case} {text:?}: {:?} scored {}", got.pieces, got.score));
                }
            }
        }
    }

    // Sampling against the softmax over the n-best list.
    let model = random_vocab(&mut rng, 50);
    let (text, n, alpha) = ("abcabdcab", 10, 0.5);
    let list = model.nbest(text, n).unwrap();
    let probs = sampling_weights(&list, alpha).unwrap();
    let draws = 10_000;
    let mut counts = vec![0usize; list.len()];
    let mut sampler = ChaCha8Rng::seed_from_u64(66);
    for _ in 0..draws {
        let s = model.sample(text, n, alpha, &mut sampler).unwrap();
        counts[list.iter().position(|x| x.pieces == s.pieces).unwrap()] += 1;
    }
    // Pool bins with expected count below 5 into one.
    let (mut stat, mut bins) = (0.0, 0);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (c, p) in counts.iter().zip(&probs) {
        let e = p * draws as f64;
        if e < 5.0 {
            pooled_obs += *c as f64;
            pooled_exp += e;
        } else {
            stat += (*c as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    }
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    if !(p > 0.01) {
        return Fail(format!("chi-square {stat:.2} on {} dof, p = {p:.4}", bins - 1));
    }

    // EM on a 1,000-sentence corpus of random words.
    let words: Vec<String> = (0..60)
        .map(|_| {
            let len = rng.random_range(2..=7);
            (0..len).map(|_| (b'a' + rng.random_range(0..8u8)) as char).collect()
        })
        .collect();
    let corpus: Vec<String> = (0..1000)
        .map(|_| {
            let k = rng.random_range(3..=8);
            (0..k).map(|_| words[rng.random_range(0..words.len())].as_str()).collect::<Vec<_>>().join(" ")
        })
        .collect();
    let (_, trace) = train_unigram_traced(&corpus, &TrainConfig::new(120, 10)).unwrap();
    let rounds = trace.iter().map(|s| s.round).max().unwrap_or(0);
    let drops: Vec<String> = trace
        .windows(2)
        .filter(|w| !w[1].after_prune && w[1].log_likelihood < w[0].log_likelihood - 1e-9)
        .map(|w| format!("round {}: {} -> {}", w[1].round, w[0].log_likelihood, w[1].log_likelihood))
        .collect();
    if !drops.is_empty() || rounds + 1 < 10 {
        return Fail(format!("EM over {} rounds, decreases: {}", rounds + 1, drops.join(", ")));
    }
    Pass(format!(
        "200 n-best cases exact (up to {max_segs} segmentations), chi-square p = {p:.3}, EM nondecreasing over {} steps in 10 rounds",
        trace.len()
    ))
}

fn subsampling_trend() -> Outcome {
    let sizes = [100, 200, 400, 800];
    let mut good = 0;
    let mut firsts = Vec::new();
    let mut lasts = Vec::new();
    for seed in 0..20u64 {
        let bench = correlation_benchmark(&CorrelationBenchmarkConfig::new(seed)).unwrap();
        let human = bench.human.systems(&bench.lang_pair);
        let r = subsample_correlations(&bench.lang_pair, &human, &bench.metric, &sizes, 10, seed).unwrap();
        let v: Vec<f64> = sizes.iter().map(|s| r[s]).collect();
        if v.windows(2).all(|w| w[1] >= w[0]) {
            good += 1;
        }
        firsts.push(v[0]);
        lasts.push(v[3]);
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let detail = format!(
        "{good}/20 seeds nondecreasing; mean r {:.3} at 100 -> {:.3} at 800",
        mean(&firsts),
        mean(&lasts)
    );
    if good >= 18 {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

/// Systems with human and metric segment scores drawn around the given
/// per-system levels.
fn fixture(levels: &[(f64, f64)], spread: f64, segments: usize, rng: &mut ChaCha8Rng) -> (HumanJudgments, SegmentTable) {
    let lp: LanguagePair = "de-en".parse().unwrap();
    let mut sys = SystemTable::new();
    let mut hseg = SegmentTable::new();
    let mut mseg = SegmentTable::new();
    for (i, (h, m)) in levels.iter().enumerate() {
        let name = format!("sys{i:02}");
        let mut total = 0.0;
        for j in 0..segments {
            let hv = h + rng.random_range(-spread..spread);
            total += hv;
            hseg.insert((lp.clone(), name.clone(), j), hv);
            mseg.insert((lp.clone(), name.clone(), j), m + rng.random_range(-spread..spread) / 10.0);
        }
        sys.insert((lp.clone(), name), total / segments as f64);
    }
    (HumanJudgments::new(sys, Some(hseg)).unwrap(), mseg)
}

fn pairwise_identity() -> Outcome {
    let lp: LanguagePair = "de-en".parse().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut fixtures = Vec::new();
    for _ in 0..25 {
        let s = rng.random_range(2..9);
        let levels: Vec<(f64, f64)> = (0..s).map(|_| (rng.random_range(0.0..100.0), rng.random_range(-5.0..0.0))).collect();
        let spread = rng.random_range(1.0..60.0);
        fixtures.push((levels, spread));
    }
    for (levels, spread) in &fixtures {
        let (human, metric) = fixture(levels, *spread, 40, &mut rng);
        let s = levels.len();
        let t = tally(&pairwise_decisions(&lp, &human, &metric, 0.05).unwrap());
        if t.total() != s * (s - 1) / 2 {
            return Fail(format!("{s} systems gave {} decisions", t.total()));
        }
    }
    // Maximal separation: human and metric levels far apart and in the same
    // order, tiny within-system spread.
    let levels: Vec<(f64, f64)> = (0..8).map(|i| (10.0 * i as f64, -8.0 + i as f64)).collect();
    let (human, metric) = fixture(&levels, 0.5, 50, &mut rng);
    let t = tally(&pairwise_decisions(&lp, &human, &metric, 0.05).unwrap());
    let sig = t.human_significant;
    if t.total() != 28 || sig.total() != 28 || sig.correct != 28 {
        return Fail(format!("maximal separation tally {t:?}"));
    }
    Pass(format!("{} fixtures sum to S(S-1)/2; maximal separation 28/28 correct", fixtures.len() + 1))
}

/// Every file under `dir` with its bytes, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// The whole synthetic pipeline in `dir`; returns concatenated stdout.
fn pipeline(dir: &Path) -> Vec<u8> {
    let p = |rel: &str| dir.join(rel).to_str().unwrap().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["synth", "noise", "--seed", "9", "--segments", "300", "--train-pairs", "1000", "--out", &p("bench")].into_iter().map(String::from).collect(),
        vec!["synth", "correlation", "--seed", "9", "--segments", "400", "--out", &p("corr")].into_iter().map(String::from).collect(),
        vec!["toy-scorer", "train", "--source", &p("bench/train.src"), "--target", &p("bench/train.tgt"), "-t", &p("lex.tsv")]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["toy-scorer", "score", "--table", &p("lex.tsv"), "--dataset", &p("bench"), "--out-dir", &p("tok")]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["score", "--token-scores", &p("tok"), "--segments", &p("seg.tsv"), "-o", &p("scores.tsv")]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["score", "--token-scores", &p("tok"), "--method", "threshold", "-o", &p("thr.json"), "--format", "json"]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["bleu", "--dataset", &p("bench"), "-o", &p("bleu.tsv")].into_iter().map(String::from).collect(),
        vec!["chrf", "--dataset", &p("bench"), "-o", &p("chrf.tsv")].into_iter().map(String::from).collect(),
        vec![
            "meta-eval", "--human", &p("bench/human.tsv"), "--scores", &format!("toy={}", p("scores.tsv")),
            "--scores", &format!("bleu={}", p("bleu.tsv")), "--scores", &format!("chrf={}", p("chrf.tsv")),
            "-o", &p("meta.tsv"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec!["meta-eval", "--human", &p("bench/human.tsv"), "--scores", &p("scores.tsv"), "--format", "json", "-o", &p("meta.json")]
            .into_iter()
            .map(String::from)
            .collect(),
        vec![
            "pairwise", "--human", &p("bench/human.tsv"), "--human-seg", &p("bench/human-seg.tsv"), "--metric-seg",
            &p("seg.tsv"), "--decisions", &p("decisions.tsv"), "-o", &p("pairwise.tsv"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec!["outliers", "--human", &p("bench/human.tsv"), "-o", &p("outliers.tsv")].into_iter().map(String::from).collect(),
        vec![
            "subsample", "--human", &p("corr/human.tsv"), "--metric-seg", &p("corr/metric-seg.tsv"), "--sizes", "50,100,200,400", "--plot",
            &p("curves.csv"), "-o", &p("subsample.tsv"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec!["tune-thresholds", "--human", &p("bench/human.tsv"), "--token-scores", &p("tok"), "-o", &p("tune.tsv")]
            .into_iter()
            .map(String::from)
            .collect(),
        vec![
            "cross-bleu", "--matrix", &p("bench/src-tgt/systems/noise-00.txt"), &p("bench/src-tgt/systems/noise-20.txt"),
            &p("bench/src-tgt/systems/noise-40.txt"), "-o", &p("cross.tsv"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec!["subword", "train", "--corpus", &p("bench/train.tgt"), "--vocab-size", "300", "--rounds", "4", "-m", &p("sw.tsv")]
            .into_iter()
            .map(String::from)
            .collect(),
        vec![
            "subword", "sample", "--model", &p("sw.tsv"), "--input", &p("bench/src-tgt/ref.txt"), "-k", "3", "--out-prefix",
            &p("samples/ref"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec!["subword", "nbest", "--model", &p("sw.tsv"), "--input", &p("bench/src-tgt/ref.txt"), "-n", "3", "-o", &p("nbest.tsv")]
            .into_iter()
            .map(String::from)
            .collect(),
    ];
    let mut stdout = Vec::new();
    for args in &runs {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        stdout.extend(refless(&refs).stdout);
    }
    stdout
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (out_a, out_b) = (pipeline(a.path()), pipeline(b.path()));
    let (snap_a, snap_b) = (snapshot(a.path()), snapshot(b.path()));
    if snap_a.keys().ne(snap_b.keys()) {
        return Fail("runs produced different file sets".into());
    }
    let differing: Vec<String> = snap_a
        .iter()
        .filter(|(k, v)| snap_b[*k] != **v)
        .map(|(k, _)| k.display().to_string())
        .collect();
    if !differing.is_empty() {
        return Fail(format!("files differ: {}", differing.join(", ")));
    }
    if out_a != out_b {
        return Fail("stdout differs".into());
    }
    let bytes: usize = snap_a.values().map(Vec::len).sum();
    Pass(format!("{} files ({bytes} bytes) and stdout byte-identical across two runs", snap_a.len()))
}
