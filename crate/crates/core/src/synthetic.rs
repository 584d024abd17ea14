//! Seeded synthetic benchmarks: a word-substitution "language" with noisy
//! systems for the toy scorer, and a latent-quality benchmark with
//! per-segment metric noise for subsampling studies.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::data::{HumanJudgments, LanguagePair, SegmentTable, SystemTable};
use crate::error::{Error, Result};
use crate::stats::stable_mean;

pub const DEFAULT_NOISE_RATES: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Clone, Debug)]
pub struct NoiseBenchmarkConfig {
    pub seed: u64,
    pub vocab_size: usize,
    pub train_pairs: usize,
    pub test_segments: usize,
    pub noise_rates: Vec<f64>,
    pub min_len: usize,
    pub max_len: usize,
    /// Chance that a source word is rendered by its secondary translation.
    pub synonym_rate: f64,
    /// Standard deviation of the simulated annotator noise on segment scores.
    pub human_noise: f64,
}

impl NoiseBenchmarkConfig {
    pub fn new(seed: u64) -> Self {
        NoiseBenchmarkConfig {
            seed,
            vocab_size: 200,
            train_pairs: 3000,
            test_segments: 1000,
            noise_rates: DEFAULT_NOISE_RATES.to_vec(),
            min_len: 4,
            max_len: 14,
            synonym_rate: 0.1,
            human_noise: 10.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSystem {
    pub name: String,
    pub noise_rate: f64,
    pub outputs: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct NoiseBenchmark {
    pub lang_pair: LanguagePair,
    pub train: Vec<(Vec<String>, Vec<String>)>,
    pub sources: Vec<Vec<String>>,
    pub references: Vec<Vec<String>>,
    pub systems: Vec<SyntheticSystem>,
    pub human: HumanJudgments,
}

pub fn synthetic_lang_pair() -> LanguagePair {
    LanguagePair::new("src", "tgt").expect("valid language pair")
}

struct Lexicon {
    primary: Vec<usize>,
    secondary: Vec<usize>,
    zipf: WeightedIndex<f64>,
    target_size: usize,
}

impl Lexicon {
    fn new(vocab: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut perm: Vec<usize> = (0..vocab).collect();
        perm.shuffle(rng);
        let secondary = (0..vocab).map(|i| vocab + (perm[i] + 1) % vocab).collect();
        let zipf = WeightedIndex::new((0..vocab).map(|i| 1.0 / (i + 1) as f64)).expect("positive weights");
        Lexicon {
            primary: perm,
            secondary,
            zipf,
            target_size: 2 * vocab,
        }
    }

    fn sentence(&self, cfg: &NoiseBenchmarkConfig, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
        let len = rng.random_range(cfg.min_len..=cfg.max_len);
        let mut src = Vec::with_capacity(len);
        let mut tgt = Vec::with_capacity(len);
        for _ in 0..len {
            let w = self.zipf.sample(rng);
            src.push(format!("s{w}"));
            let t = if rng.random_bool(cfg.synonym_rate) {
                self.secondary[w]
            } else {
                self.primary[w]
            };
            tgt.push(format!("t{t}"));
        }
        (src, tgt)
    }
}

/// Replaces each token with a different random target word with
/// probability `rate`. Returns the corrupted sentence and the number of
/// replaced tokens.
fn corrupt(reference: &[String], rate: f64, target_size: usize, rng: &mut ChaCha8Rng) -> (Vec<String>, usize) {
    let mut changed = 0;
    let out = reference
        .iter()
        .map(|tok| {
            if rate > 0.0 && rng.random_bool(rate) {
                changed += 1;
                loop {
                    let cand = format!("t{}", rng.random_range(0..target_size));
                    if &cand != tok {
                        break cand;
                    }
                }
            } else {
                tok.clone()
            }
        })
        .collect();
    (out, changed)
}

fn system_name(rate: f64) -> String {
    format!("noise-{:02}", (rate * 100.0).round() as u32)
}

/// Builds the noise benchmark. Human segment scores are the percentage of
/// untouched tokens plus Gaussian annotator noise; a system's human score is
/// the mean of its segment scores.
pub fn noise_benchmark(cfg: &NoiseBenchmarkConfig) -> Result<NoiseBenchmark> {
    if cfg.vocab_size < 2 || cfg.min_len == 0 || cfg.min_len > cfg.max_len || cfg.test_segments == 0 {
        return Err(Error::Config("invalid noise benchmark configuration".into()));
    }
    if cfg.noise_rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Config("noise rates must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lex = Lexicon::new(cfg.vocab_size, &mut rng);
    let train = (0..cfg.train_pairs).map(|_| lex.sentence(cfg, &mut rng)).collect();
    let (sources, references): (Vec<_>, Vec<_>) = (0..cfg.test_segments).map(|_| lex.sentence(cfg, &mut rng)).unzip();
    let annotator = Normal::new(0.0, cfg.human_noise).map_err(|e| Error::Config(e.to_string()))?;
    let lp = synthetic_lang_pair();
    let mut systems = Vec::new();
    let mut sys_table = SystemTable::new();
    let mut seg_table = SegmentTable::new();
    for &rate in &cfg.noise_rates {
        let name = system_name(rate);
        let mut outputs = Vec::with_capacity(references.len());
        let mut human = Vec::with_capacity(references.len());
        for (seg, r) in references.iter().enumerate() {
            let (out, changed) = corrupt(r, rate, lex.target_size, &mut rng);
            let kept = 100.0 * (1.0 - changed as f64 / r.len() as f64);
            let h = kept + annotator.sample(&mut rng);
            seg_table.insert((lp.clone(), name.clone(), seg), h);
            human.push(h);
            outputs.push(out);
        }
        sys_table.insert((lp.clone(), name.clone()), stable_mean(&human).expect("nonempty"));
        systems.push(SyntheticSystem {
            name,
            noise_rate: rate,
            outputs,
        });
    }
    Ok(NoiseBenchmark {
        lang_pair: lp,
        train,
        sources,
        references,
        systems,
        human: HumanJudgments::new(sys_table, Some(seg_table))?,
    })
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_human(dir: &Path, human: &HumanJudgments) -> Result<()> {
    write_lines(
        &dir.join("human.tsv"),
        std::iter::once("lang_pair\tsystem\tscore".to_string()).chain(
            human
                .system_scores()
                .iter()
                .map(|((lp, s), v)| format!("{lp}\t{s}\t{v:?}")),
        ),
    )?;
    if let Some(seg) = human.segment_scores() {
        write_lines(
            &dir.join("human-seg.tsv"),
            std::iter::once("lang_pair\tsystem\tseg\tscore".to_string())
                .chain(seg.iter().map(|((lp, s, i), v)| format!("{lp}\t{s}\t{i}\t{v:?}"))),
        )?;
    }
    Ok(())
}

impl NoiseBenchmark {
    /// Writes the benchmark in the dataset-directory layout read by
    /// [`crate::data::load_dataset_dir`], plus `train.src` / `train.tgt`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let join = |toks: &Vec<String>| toks.join(" ");
        let lp_dir = dir.join(self.lang_pair.to_string());
        let sys_dir = lp_dir.join("systems");
        fs::create_dir_all(&sys_dir).map_err(|e| Error::io(&sys_dir, e))?;
        write_human(dir, &self.human)?;
        write_lines(&dir.join("train.src"), self.train.iter().map(|(s, _)| join(s)))?;
        write_lines(&dir.join("train.tgt"), self.train.iter().map(|(_, t)| join(t)))?;
        write_lines(&lp_dir.join("src.txt"), self.sources.iter().map(join))?;
        write_lines(&lp_dir.join("ref.txt"), self.references.iter().map(join))?;
        for s in &self.systems {
            write_lines(&sys_dir.join(format!("{}.txt", s.name)), s.outputs.iter().map(join))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CorrelationBenchmarkConfig {
    pub seed: u64,
    pub n_systems: usize,
    pub n_segments: usize,
    /// Spread of per-segment difficulty shared by all systems.
    pub difficulty_sd: f64,
    /// Per-(system, segment) metric noise.
    pub metric_noise: f64,
    /// Per-(system, segment) noise on human segment scores.
    pub human_noise: f64,
}

impl CorrelationBenchmarkConfig {
    pub fn new(seed: u64) -> Self {
        CorrelationBenchmarkConfig {
            seed,
            n_systems: 10,
            n_segments: 1000,
            difficulty_sd: 1.0,
            metric_noise: 3.0,
            human_noise: 30.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CorrelationBenchmark {
    pub lang_pair: LanguagePair,
    /// Latent quality per system, evenly spaced in [0, 1].
    pub quality: BTreeMap<String, f64>,
    /// Metric segment scores: quality + segment difficulty + noise.
    pub metric: BTreeMap<String, BTreeMap<usize, f64>>,
    /// Human system scores are 100 × quality; segment scores add noise.
    pub human: HumanJudgments,
}

pub fn correlation_benchmark(cfg: &CorrelationBenchmarkConfig) -> Result<CorrelationBenchmark> {
    if cfg.n_systems < 2 || cfg.n_segments == 0 {
        return Err(Error::Config("correlation benchmark needs >= 2 systems and >= 1 segment".into()));
    }
    let normal = |sd: f64| Normal::new(0.0, sd).map_err(|e| Error::Config(e.to_string()));
    let (difficulty, metric_noise, human_noise) = (normal(cfg.difficulty_sd)?, normal(cfg.metric_noise)?, normal(cfg.human_noise)?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lp = synthetic_lang_pair();
    let d: Vec<f64> = (0..cfg.n_segments).map(|_| difficulty.sample(&mut rng)).collect();
    let mut quality = BTreeMap::new();
    let mut metric = BTreeMap::new();
    let mut sys_table = SystemTable::new();
    let mut seg_table = SegmentTable::new();
    for s in 0..cfg.n_systems {
        let name = format!("sys-{s:02}");
        let q = s as f64 / (cfg.n_systems - 1) as f64;
        let scores: BTreeMap<usize, f64> = d
            .iter()
            .enumerate()
            .map(|(i, di)| (i, q + di + metric_noise.sample(&mut rng)))
            .collect();
        for i in 0..cfg.n_segments {
            seg_table.insert((lp.clone(), name.clone(), i), 100.0 * q + human_noise.sample(&mut rng));
        }
        sys_table.insert((lp.clone(), name.clone()), 100.0 * q);
        quality.insert(name.clone(), q);
        metric.insert(name, scores);
    }
    Ok(CorrelationBenchmark {
        lang_pair: lp,
        quality,
        metric,
        human: HumanJudgments::new(sys_table, Some(seg_table))?,
    })
}
