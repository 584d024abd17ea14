use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use refless_core::data::LanguagePair;
use refless_core::ngram::{Smoothing, Tokenizer};
use refless_core::scoring::{AggregationMethod, SampleMode};

use crate::output::OutputArgs;

/// Seed used by every randomized subcommand unless `--seed` is given.
pub const DEFAULT_SEED: u64 = 20190801;

#[derive(Parser, Debug)]
#[command(name = "refless", version, about = "Reference-free MT metrics and their meta-evaluation")]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Aggregate token log-probabilities into segment and system scores.
    Score(ScoreArgs),
    /// System-level correlation report against human scores.
    MetaEval(MetaEvalArgs),
    /// Pairwise system ranking agreement with human significance tests.
    Pairwise(PairwiseArgs),
    /// List human-score outlier systems per language pair.
    Outliers(OutliersArgs),
    /// Corpus BLEU per system.
    Bleu(BleuArgs),
    /// Corpus chrF per system.
    Chrf(ChrfArgs),
    /// BLEU of one system output against another.
    CrossBleu(CrossBleuArgs),
    /// Correlation as a function of test-set size.
    Subsample(SubsampleArgs),
    /// Grid search for confidence-threshold parameters.
    TuneThresholds(TuneArgs),
    /// Unigram subword model: train, n-best, sampling.
    #[command(subcommand)]
    Subword(SubwordCommand),
    /// Lexical translation scorer: train and score.
    #[command(subcommand)]
    ToyScorer(ToyCommand),
    /// Generate synthetic benchmarks.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Args, Debug)]
pub struct HumanArgs {
    /// Human system scores: lang_pair, system, score.
    #[arg(long)]
    pub human: PathBuf,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Systems as NAME=FILE[,FILE...] (one file per regularization sample)
    /// or a bare FILE named after its stem.
    pub systems: Vec<String>,

    /// Directory laid out as <lang_pair>/<system>.jsonl or
    /// <lang_pair>/<system>/<sample>.jsonl.
    #[arg(long, conflicts_with = "systems")]
    pub token_scores: Option<PathBuf>,

    /// Language pair of positional systems.
    #[arg(long, required_unless_present = "token_scores")]
    pub lang_pair: Option<LanguagePair>,

    /// sum, mean, median, min, negstd or threshold.
    #[arg(long, default_value = "mean")]
    pub method: AggregationMethod,

    /// Lower threshold (threshold method only).
    #[arg(long, allow_negative_numbers = true)]
    pub low: Option<f64>,

    /// Upper threshold (threshold method only).
    #[arg(long, allow_negative_numbers = true)]
    pub high: Option<f64>,

    /// How multiple samples per segment combine: token or segment.
    #[arg(long, default_value = "token")]
    pub mode: SampleMode,

    /// Also write segment scores (lang_pair, system, seg, score).
    #[arg(long)]
    pub segments: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct MetaEvalArgs {
    #[command(flatten)]
    pub human: HumanArgs,

    /// Metric system scores as [NAME=]FILE; repeat to compare metrics.
    #[arg(long = "scores", required = true)]
    pub scores: Vec<String>,

    /// Williams test tails.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub tails: u8,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct PairwiseArgs {
    #[command(flatten)]
    pub human: HumanArgs,

    /// Human segment scores: lang_pair, system, seg, score.
    #[arg(long)]
    pub human_seg: PathBuf,

    /// Metric segment scores: lang_pair, system, seg, score.
    #[arg(long)]
    pub metric_seg: PathBuf,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Also write every per-pair decision.
    #[arg(long)]
    pub decisions: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct OutliersArgs {
    #[command(flatten)]
    pub human: HumanArgs,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CorpusArgs {
    /// Dataset directory (human.tsv, <lang_pair>/ref.txt, <lang_pair>/systems/*.txt).
    #[arg(long, conflicts_with_all = ["reference", "hypotheses"])]
    pub dataset: Option<PathBuf>,

    /// Reference file, one segment per line.
    #[arg(long = "ref", requires = "lang_pair", required_unless_present = "dataset")]
    pub reference: Option<PathBuf>,

    #[arg(long)]
    pub lang_pair: Option<LanguagePair>,

    /// Hypothesis files as [NAME=]FILE.
    pub hypotheses: Vec<String>,

    /// Also write sentence-level scores (lang_pair, system, seg, score).
    #[arg(long)]
    pub segments: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BleuOptions {
    /// intl, 13a, none or zh. Default: zh for Chinese targets, intl otherwise.
    #[arg(long)]
    pub tokenize: Option<Tokenizer>,

    /// none or exp.
    #[arg(long, default_value = "none")]
    pub smooth: Smoothing,

    #[arg(long, default_value_t = 4)]
    pub max_order: usize,
}

#[derive(Args, Debug)]
pub struct BleuArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[command(flatten)]
    pub bleu: BleuOptions,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ChrfArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[arg(long, default_value_t = 6)]
    pub char_order: usize,

    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CrossBleuArgs {
    /// System outputs as [NAME=]FILE.
    #[arg(required = true, num_args = 2..)]
    pub systems: Vec<String>,

    /// Full matrix over all systems; without it exactly two are expected.
    #[arg(long)]
    pub matrix: bool,

    #[command(flatten)]
    pub bleu: BleuOptions,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SubsampleArgs {
    #[command(flatten)]
    pub human: HumanArgs,

    /// Metric segment scores: lang_pair, system, seg, score.
    #[arg(long)]
    pub metric_seg: PathBuf,

    #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
    pub sizes: Vec<usize>,

    #[arg(long, default_value_t = 10)]
    pub draws: usize,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Plot-ready CSV: lang_pair,size,correlation.
    #[arg(long)]
    pub plot: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub human: HumanArgs,

    /// Token score directory, laid out as for `score --token-scores`.
    #[arg(long)]
    pub token_scores: PathBuf,

    /// Candidate thresholds, ascending; defaults to 16 points over [-3, 0].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub grid: Option<Vec<f64>>,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Subcommand, Debug)]
pub enum SubwordCommand {
    /// Train a unigram model on a text corpus, one sentence per line.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab_size: usize,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        /// Model file: piece<TAB>logprob.
        #[arg(short, long)]
        model: PathBuf,
    },
    /// N-best segmentations of each input line.
    Nbest {
        #[arg(long)]
        model: PathBuf,
        /// Input text; stdin when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(short, long, default_value_t = refless_core::subword::DEFAULT_NBEST)]
        n: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Draw K sampled segmentations of each input line.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(short, long, default_value_t = 1)]
        k: usize,
        #[arg(short, long, default_value_t = refless_core::subword::DEFAULT_NBEST)]
        n: usize,
        #[arg(long, default_value_t = refless_core::subword::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write sample k to <PREFIX>.<k>.txt instead of stdout.
        #[arg(long)]
        out_prefix: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ToyCommand {
    /// Estimate lexical translation probabilities from a parallel corpus.
    Train {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        /// Table file: target<TAB>source<TAB>prob.
        #[arg(short, long)]
        table: PathBuf,
    },
    /// Token log-probabilities of target text given source text.
    Score {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, conflicts_with = "dataset", requires_all = ["target", "output"])]
        source: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Token score file (JSON lines).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Score every system of a dataset directory (needs <lang_pair>/src.txt).
        #[arg(long, requires = "out_dir", required_unless_present = "source")]
        dataset: Option<PathBuf>,
        /// Receives <lang_pair>/<system>.jsonl.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum SynthCommand {
    /// Word-substitution benchmark with known noise rates, as a dataset directory.
    Noise {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long)]
        train_pairs: Option<usize>,
    },
    /// Latent-quality benchmark: human.tsv, human-seg.tsv and metric-seg.tsv.
    Correlation {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long)]
        systems: Option<usize>,
    },
}
