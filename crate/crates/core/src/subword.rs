//! Unigram subword model: n-best segmentation, temperature sampling over
//! the n-best list, and a small EM trainer.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default n-best list size for sampling.
pub const DEFAULT_NBEST: usize = 10;
/// Default sampling exponent.
pub const DEFAULT_ALPHA: f64 = 1.0;
/// Longest seed piece considered by the trainer, in characters.
pub const MAX_SEED_PIECE_CHARS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct UnigramSubwordModel {
    pieces: HashMap<String, f64>,
    max_piece_chars: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Segmentation {
    pub pieces: Vec<String>,
    /// Sum of the pieces' unigram log-probabilities.
    pub score: f64,
}

/// One partial path in the segmentation lattice.
#[derive(Clone, Debug)]
struct Hyp {
    score: f64,
    /// Character positions where pieces end.
    ends: Vec<usize>,
}

/// Best first; ties broken by the lexicographically smaller boundary list.
fn hyp_order(a: &Hyp, b: &Hyp) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.ends.cmp(&b.ends))
}

impl UnigramSubwordModel {
    pub fn new(pieces: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut map = HashMap::new();
        for (piece, logp) in pieces {
            if piece.is_empty() {
                return Err(Error::Domain("empty subword piece".into()));
            }
            if !logp.is_finite() || logp > 0.0 {
                return Err(Error::Domain(format!(
                    "piece {piece:?} has log-probability {logp}, expected a finite value <= 0"
                )));
            }
            if map.insert(piece.clone(), logp).is_some() {
                return Err(Error::Domain(format!("duplicate piece {piece:?}")));
            }
        }
        let mass: f64 = map.values().map(|l| l.exp()).sum();
        if mass > 1.0 + 1e-6 {
            return Err(Error::Domain(format!(
                "unigram probabilities sum to {mass}, more than 1"
            )));
        }
        let max_piece_chars = map.keys().map(|p| p.chars().count()).max().unwrap_or(0);
        Ok(UnigramSubwordModel {
            pieces: map,
            max_piece_chars,
        })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn logprob(&self, piece: &str) -> Option<f64> {
        self.pieces.get(piece).copied()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.pieces.contains_key(piece)
    }

    /// Pieces sorted by descending log-probability, then by string.
    pub fn pieces(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.pieces.iter().map(|(p, l)| (p.as_str(), *l)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Up to `n` distinct segmentations of `text` in nonincreasing score
    /// order. Each lattice position keeps its `n` best partial paths, which
    /// makes the result the exact n-best list.
    pub fn nbest(&self, text: &str, n: usize) -> Result<Vec<Segmentation>> {
        self.nbest_excluding(text, n, None)
    }

    fn nbest_excluding(&self, text: &str, n: usize, exclude: Option<&str>) -> Result<Vec<Segmentation>> {
        if n == 0 {
            return Err(Error::Config("n-best size must be at least 1".into()));
        }
        if text.is_empty() {
            return Err(Error::Domain("cannot segment an empty string".into()));
        }
        let offsets: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let len = offsets.len() - 1;
        let mut lattice: Vec<Vec<Hyp>> = vec![Vec::new(); len + 1];
        lattice[0].push(Hyp {
            score: 0.0,
            ends: Vec::new(),
        });
        for end in 1..=len {
            let mut cands = Vec::new();
            for start in end.saturating_sub(self.max_piece_chars)..end {
                if lattice[start].is_empty() {
                    continue;
                }
                let piece = &text[offsets[start]..offsets[end]];
                if exclude == Some(piece) {
                    continue;
                }
                let Some(lp) = self.logprob(piece) else {
                    continue;
                };
                for h in &lattice[start] {
                    let mut ends = h.ends.clone();
                    ends.push(end);
                    cands.push(Hyp {
                        score: h.score + lp,
                        ends,
                    });
                }
            }
            cands.sort_by(hyp_order);
            cands.truncate(n);
            lattice[end] = cands;
        }
        if lattice[len].is_empty() {
            let ch = text
                .chars()
                .find(|c| !self.contains(c.encode_utf8(&mut [0; 4])))
                .unwrap_or_else(|| text.chars().next().expect("nonempty"));
            return Err(Error::Coverage { ch });
        }
        Ok(lattice[len]
            .iter()
            .map(|h| {
                let mut prev = 0;
                let pieces = h
                    .ends
                    .iter()
                    .map(|&e| {
                        let p = text[offsets[prev]..offsets[e]].to_string();
                        prev = e;
                        p
                    })
                    .collect();
                Segmentation {
                    pieces,
                    score: h.score,
                }
            })
            .collect())
    }

    /// Highest-scoring segmentation.
    pub fn viterbi(&self, text: &str) -> Result<Segmentation> {
        Ok(self.nbest(text, 1)?.remove(0))
    }

    /// Samples from the n-best list with probability proportional to
    /// `exp(alpha * score)`.
    pub fn sample<R: Rng + ?Sized>(&self, text: &str, n: usize, alpha: f64, rng: &mut R) -> Result<Segmentation> {
        let mut list = self.nbest(text, n)?;
        let weights = sampling_weights(&list, alpha)?;
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Domain(format!("sampling weights: {e}")))?;
        Ok(list.swap_remove(dist.sample(rng)))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut pieces = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (piece, lp) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected piece<TAB>logprob"))?;
            let lp: f64 = lp
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("log-probability {lp:?} is not a number")))?;
            pieces.push((piece.to_string(), lp));
        }
        UnigramSubwordModel::new(pieces).map_err(|e| match e {
            Error::Domain(m) => Error::Domain(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (piece, lp) in self.pieces() {
            writeln!(w, "{piece}\t{lp:?}")?;
        }
        Ok(())
    }
}

/// Normalized sampling probabilities `exp(alpha * score_i) / Σ_j exp(alpha * score_j)`.
pub fn sampling_weights(list: &[Segmentation], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let top = list.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = list.iter().map(|s| (alpha * (s.score - top)).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

pub fn nbest_segmentations(model: &UnigramSubwordModel, text: &str, n: usize) -> Result<Vec<Segmentation>> {
    model.nbest(text, n)
}

/// Seeded single draw; see [`UnigramSubwordModel::sample`].
pub fn sample_segmentation(
    model: &UnigramSubwordModel,
    text: &str,
    n: usize,
    alpha: f64,
    rng_seed: u64,
) -> Result<Segmentation> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    model.sample(text, n, alpha, &mut rng)
}

/// One EM step of training.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainStep {
    pub round: usize,
    /// Corpus Viterbi log-likelihood under the model entering this step.
    pub log_likelihood: f64,
    pub vocab_size: usize,
    /// The vocabulary was pruned right before this step.
    pub after_prune: bool,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub vocab_size: usize,
    pub rounds: usize,
    /// EM steps per round before pruning.
    pub em_steps_per_round: usize,
    /// Minimum corpus count for a multi-character seed piece.
    pub min_seed_count: usize,
    /// Fraction of the vocabulary kept by one pruning pass.
    pub shrink: f64,
}

impl TrainConfig {
    pub fn new(vocab_size: usize, rounds: usize) -> Self {
        TrainConfig {
            vocab_size,
            rounds,
            em_steps_per_round: 2,
            min_seed_count: 2,
            shrink: 0.75,
        }
    }
}

/// Log-probability given to characters that no Viterbi path uses, so the
/// model keeps covering its alphabet.
const UNUSED_CHAR_LOGP: f64 = -30.0;

pub fn train_unigram(corpus: &[String], vocab_size: usize, rounds: usize) -> Result<UnigramSubwordModel> {
    train_unigram_traced(corpus, &TrainConfig::new(vocab_size, rounds)).map(|(m, _)| m)
}

/// Trains a unigram model: seeds with frequent substrings plus every
/// character, then alternates hard-EM re-estimation under Viterbi
/// segmentation with pruning of the lowest-utility pieces. Characters are
/// never pruned.
pub fn train_unigram_traced(corpus: &[String], cfg: &TrainConfig) -> Result<(UnigramSubwordModel, Vec<TrainStep>)> {
    let texts: Vec<&str> = corpus.iter().map(String::as_str).filter(|s| !s.is_empty()).collect();
    if texts.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }
    let alphabet: HashSet<char> = texts.iter().flat_map(|s| s.chars()).collect();
    if cfg.vocab_size < alphabet.len() {
        return Err(Error::Config(format!(
            "vocab_size {} is smaller than the alphabet ({} characters)",
            cfg.vocab_size,
            alphabet.len()
        )));
    }

    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in &texts {
        let chars: Vec<char> = t.chars().collect();
        for i in 0..chars.len() {
            for j in i + 1..=(i + MAX_SEED_PIECE_CHARS).min(chars.len()) {
                *counts.entry(chars[i..j].iter().collect()).or_default() += 1;
            }
        }
    }
    let mut seeds: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(p, c)| p.chars().count() == 1 || *c >= cfg.min_seed_count)
        .collect();
    seeds.sort_by(|a, b| {
        let ca = a.0.chars().count() == 1;
        let cb = b.0.chars().count() == 1;
        cb.cmp(&ca).then(b.1.cmp(&a.1)).then_with(|| a.0.cmp(&b.0))
    });
    let seed_limit = (4 * cfg.vocab_size).max(alphabet.len());
    seeds.truncate(seed_limit);
    let total: f64 = seeds.iter().map(|(_, c)| *c as f64).sum();
    let mut model = UnigramSubwordModel::new(
        seeds
            .into_iter()
            .map(|(p, c)| (p, (c as f64 / total).ln())),
    )?;

    let mut trace = Vec::new();
    let mut after_prune = false;
    for round in 0..cfg.rounds {
        for _ in 0..cfg.em_steps_per_round.max(1) {
            let (next, ll) = em_step(&model, &texts, &alphabet)?;
            trace.push(TrainStep {
                round,
                log_likelihood: ll,
                vocab_size: model.len(),
                after_prune,
            });
            after_prune = false;
            model = next;
        }
        if model.len() > cfg.vocab_size {
            let target = ((model.len() as f64 * cfg.shrink) as usize).max(cfg.vocab_size);
            model = prune(&model, &texts, &alphabet, target)?;
            after_prune = true;
        }
    }
    if model.len() > cfg.vocab_size {
        model = prune(&model, &texts, &alphabet, cfg.vocab_size)?;
        after_prune = true;
    }
    if after_prune {
        let (next, ll) = em_step(&model, &texts, &alphabet)?;
        trace.push(TrainStep {
            round: cfg.rounds,
            log_likelihood: ll,
            vocab_size: model.len(),
            after_prune,
        });
        model = next;
    }
    Ok((model, trace))
}

/// Corpus Viterbi log-likelihood under `model`.
pub fn corpus_log_likelihood(model: &UnigramSubwordModel, corpus: &[String]) -> Result<f64> {
    corpus
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| model.viterbi(s).map(|seg| seg.score))
        .sum()
}

/// Viterbi-segments the corpus, then sets each used piece's probability to
/// its relative frequency. Unused multi-character pieces are dropped;
/// unused characters keep a small floor. Returns the new model and the
/// log-likelihood under the old one.
fn em_step(model: &UnigramSubwordModel, texts: &[&str], alphabet: &HashSet<char>) -> Result<(UnigramSubwordModel, f64)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut ll = 0.0;
    for t in texts {
        let seg = model.viterbi(t)?;
        ll += seg.score;
        for p in seg.pieces {
            *counts.entry(p).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    let mut pieces: Vec<(String, f64)> = counts
        .iter()
        .map(|(p, c)| (p.clone(), (*c as f64 / total as f64).ln()))
        .collect();
    let mut unused: Vec<char> = alphabet
        .iter()
        .copied()
        .filter(|c| !counts.contains_key(c.encode_utf8(&mut [0; 4]) as &str))
        .collect();
    unused.sort_unstable();
    pieces.extend(unused.into_iter().map(|c| (c.to_string(), UNUSED_CHAR_LOGP)));
    Ok((UnigramSubwordModel::new(pieces)?, ll))
}

/// Drops the lowest-utility multi-character pieces until `target` remain.
/// Utility is the Viterbi count times the log-probability lost by
/// re-segmenting the piece without itself.
fn prune(
    model: &UnigramSubwordModel,
    texts: &[&str],
    alphabet: &HashSet<char>,
    target: usize,
) -> Result<UnigramSubwordModel> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let segs: Vec<Segmentation> = texts.iter().map(|t| model.viterbi(t)).collect::<Result<_>>()?;
    for s in &segs {
        for p in &s.pieces {
            if let Some((k, _)) = model.pieces.get_key_value(p.as_str()) {
                *counts.entry(k.as_str()).or_default() += 1;
            }
        }
    }
    let mut utilities: Vec<(f64, &str)> = Vec::new();
    for (piece, &lp) in &model.pieces {
        if piece.chars().count() == 1 {
            continue;
        }
        let count = counts.get(piece.as_str()).copied().unwrap_or(0);
        let utility = if count == 0 {
            0.0
        } else {
            let alt = model.nbest_excluding(piece, 1, Some(piece))?[0].score;
            count as f64 * (lp - alt)
        };
        utilities.push((utility, piece.as_str()));
    }
    utilities.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let n_chars = model.pieces.keys().filter(|p| p.chars().count() == 1).count();
    debug_assert!(alphabet.len() <= n_chars);
    let keep_multi = target.saturating_sub(n_chars);
    let drop = utilities.len().saturating_sub(keep_multi);
    let dropped: HashSet<&str> = utilities.iter().take(drop).map(|(_, p)| *p).collect();
    UnigramSubwordModel::new(
        model
            .pieces
            .iter()
            .filter(|(p, _)| !dropped.contains(p.as_str()))
            .map(|(p, l)| (p.clone(), *l)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(items: &[(&str, f64)]) -> UnigramSubwordModel {
        UnigramSubwordModel::new(items.iter().map(|(p, l)| (p.to_string(), *l))).unwrap()
    }

    #[test]
    fn nbest_two_paths() {
        let m = model(&[("a", -1.0), ("b", -1.0), ("ab", -1.5)]);
        let list = m.nbest("ab", 10).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].pieces, vec!["ab"]);
        assert_eq!(list[0].score, -1.5);
        assert_eq!(list[1].pieces, vec!["a", "b"]);
        assert_eq!(list[1].score, -2.0);
        assert_eq!(m.nbest("ab", 1).unwrap(), vec![list[0].clone()]);
        assert_eq!(m.nbest("a", 5).unwrap().len(), 1);
    }

    #[test]
    fn coverage_error_names_character() {
        let m = model(&[("a", -1.0)]);
        assert!(matches!(m.nbest("aza", 3), Err(Error::Coverage { ch: 'z' })));
        assert!(m.nbest("", 3).is_err());
    }

    #[test]
    fn model_invariants() {
        assert!(UnigramSubwordModel::new(vec![("a".to_string(), 0.1)]).is_err());
        assert!(UnigramSubwordModel::new(vec![("a".to_string(), -0.1), ("b".to_string(), -0.1)]).is_err());
    }

    #[test]
    fn softmax_weights_closed_form() {
        let m = model(&[("a", -1.0), ("b", -1.0), ("ab", -1.5)]);
        let w = sampling_weights(&m.nbest("ab", 10).unwrap(), 1.0).unwrap();
        let expected = (-1.5f64).exp() / ((-1.5f64).exp() + (-2.0f64).exp());
        assert!((w[0] - expected).abs() < 1e-15);
        assert!((w[0] - 0.6225).abs() < 1e-4);
    }

    #[test]
    fn large_alpha_picks_top() {
        let m = model(&[("a", -1.0), ("b", -1.0), ("ab", -1.5)]);
        for seed in 0..50 {
            assert_eq!(sample_segmentation(&m, "ab", 10, 1e6, seed).unwrap().pieces, vec!["ab"]);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let m = model(&[("a", -1.0), ("b c", -2.5), ("ab", -1.5)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        m.save(fs::File::create(&p).unwrap()).unwrap();
        assert_eq!(UnigramSubwordModel::load(&p).unwrap(), m);
    }

    #[test]
    fn single_letter_corpus() {
        let corpus = vec!["aaaa".to_string(); 100];
        let m = train_unigram(&corpus, 3, 5).unwrap();
        assert!(m.contains("a"));
        assert!(m.len() <= 3);
        assert!(m.viterbi("aaaa").unwrap().pieces.len() <= 4);
    }

    #[test]
    fn vocab_smaller_than_alphabet() {
        let corpus = vec!["abc".to_string()];
        assert!(matches!(train_unigram(&corpus, 2, 3), Err(Error::Config(_))));
    }

    #[test]
    fn forced_character_vocabulary() {
        let corpus: Vec<String> = ["ab", "ba", "abab", "bba"].iter().map(|s| s.to_string()).collect();
        let m = train_unigram(&corpus, 2, 4).unwrap();
        let mut pieces: Vec<&str> = m.pieces().into_iter().map(|(p, _)| p).collect();
        pieces.sort();
        assert_eq!(pieces, vec!["a", "b"]);
    }

    #[test]
    fn repeated_word_becomes_one_piece() {
        let corpus = vec!["hello".to_string(); 200];
        let m = train_unigram(&corpus, 40, 5).unwrap();
        assert_eq!(m.viterbi("hello").unwrap().pieces, vec!["hello"]);
    }
}
