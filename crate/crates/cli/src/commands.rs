use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use refless_core::data::{
    load_dataset_dir, load_human_scores, load_segment_table, load_text_segments, load_token_scores, write_score_rows,
    write_segment_table, write_token_scores, HumanJudgments, LanguagePair, ScoreRow, SegmentIds, SegmentTable,
    SystemTable,
};
use refless_core::ibm1::{score_tokens, tokenize, train_model1_traced, LexicalTable};
use refless_core::meta::{
    compare_metrics, derive_seed, mad_outliers, metric_report, pairwise_decisions, subsample_correlations, tally,
    MetricReport, OutlierSplit, PairDecision, PairwiseTally, ReportGroup, WilliamsComparison,
};
use refless_core::ngram::{bleu, chrf, cross_bleu, cross_bleu_matrix, BleuConfig, ChrfConfig, Tokenizer};
use refless_core::scoring::{
    align_samples, default_grid, regularize_tokens, score_segments, system_score, tune_thresholds, AggregationMethod,
    DevSet, DEFAULT_THRESHOLDS,
};
use refless_core::stats::Tails;
use refless_core::subword::{sample_segmentation, train_unigram_traced, TrainConfig, UnigramSubwordModel};
use refless_core::synthetic::{
    correlation_benchmark, noise_benchmark, CorrelationBenchmarkConfig, NoiseBenchmarkConfig,
};
use serde::Serialize;

use crate::args::*;
use crate::error::{CliError, CliResult, Context};
use crate::inputs::{load_metric_scores, load_token_score_dir, parse_named, parse_single, read_lines, SampleFiles};
use crate::output::{fmt3, fmt3_opt, write_file, write_json, Format, Table};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Score(a) => score(a),
        Command::MetaEval(a) => meta_eval(a),
        Command::Pairwise(a) => pairwise(a),
        Command::Outliers(a) => outliers(a),
        Command::Bleu(a) => corpus_bleu(a),
        Command::Chrf(a) => corpus_chrf(a),
        Command::CrossBleu(a) => cross(a),
        Command::Subsample(a) => subsample(a),
        Command::TuneThresholds(a) => tune(a),
        Command::Subword(c) => subword(c),
        Command::ToyScorer(c) => toy(c),
        Command::Synth(c) => synth(c),
    }
}

fn resolve_method(method: AggregationMethod, low: Option<f64>, high: Option<f64>) -> CliResult<AggregationMethod> {
    match method {
        AggregationMethod::ConfidenceThreshold { .. } => Ok(AggregationMethod::threshold(
            low.unwrap_or(DEFAULT_THRESHOLDS.0),
            high.unwrap_or(DEFAULT_THRESHOLDS.1),
        )?),
        m if low.is_some() || high.is_some() => Err(CliError::Usage(format!(
            "--low/--high only apply to the threshold method, not {m}"
        ))),
        m => Ok(m),
    }
}

fn score_table(rows: &[ScoreRow]) -> Table {
    let mut t = Table::new(["system", "lang_pair", "score", "n_segments"]);
    for r in rows {
        t.row([r.system.clone(), r.lang_pair.to_string(), fmt3(r.score), r.n_segments.to_string()]);
    }
    t
}

fn score(a: ScoreArgs) -> CliResult<()> {
    let method = resolve_method(a.method, a.low, a.high)?;
    let systems: BTreeMap<(LanguagePair, String), SampleFiles> = match &a.token_scores {
        Some(dir) => load_token_score_dir(dir)?,
        None => {
            if a.systems.is_empty() {
                return Err(CliError::Usage("no systems given".into()));
            }
            let lp = a.lang_pair.clone().expect("required without --token-scores");
            let mut out = BTreeMap::new();
            for spec in &a.systems {
                let nf = parse_named(spec)?;
                let samples = nf.paths.iter().map(load_token_scores).collect::<Result<Vec<_>, _>>()?;
                if out.insert((lp.clone(), nf.name.clone()), samples).is_some() {
                    return Err(CliError::Usage(format!("system {} given twice", nf.name)));
                }
            }
            out
        }
    };
    let mut rows = Vec::new();
    let mut segments = SegmentTable::new();
    for ((lp, name), files) in &systems {
        let segs = score_segments(files, a.mode, method).context(|| format!("{lp}/{name}"))?;
        let value = system_score(&segs).context(|| format!("{lp}/{name}"))?;
        for s in &segs {
            segments.insert((lp.clone(), name.clone(), s.seg_id), s.value);
        }
        rows.push(ScoreRow {
            system: name.clone(),
            lang_pair: lp.clone(),
            score: value,
            n_segments: segs.len(),
        });
    }
    if let Some(p) = &a.segments {
        write_file(p, |w| write_segment_table(w, &segments))?;
    }
    a.out.emit(&score_table(&rows), &rows, |w| write_score_rows(w, &rows))
}

#[derive(Serialize)]
struct NamedReport<'a> {
    metric: &'a str,
    report: &'a MetricReport,
    /// Language pairs where no other metric correlates significantly better.
    top: Vec<&'a LanguagePair>,
}

#[derive(Serialize)]
struct MetricComparison<'a> {
    metric_a: &'a str,
    metric_b: &'a str,
    results: Vec<WilliamsComparison>,
}

#[derive(Serialize)]
struct MetaEvalOutput<'a> {
    tails: u8,
    alpha: f64,
    metrics: Vec<NamedReport<'a>>,
    comparisons: Vec<MetricComparison<'a>>,
}

fn meta_eval(a: MetaEvalArgs) -> CliResult<()> {
    let human = load_human_scores(&a.human.human, None)?;
    let mut metrics: Vec<(String, SystemTable)> = Vec::new();
    for spec in &a.scores {
        let (name, path) = parse_single(spec)?;
        if metrics.iter().any(|(n, _)| *n == name) {
            return Err(CliError::Usage(format!("metric {name} given twice")));
        }
        let table = load_metric_scores(&path)?;
        metrics.push((name, table));
    }
    let tails = if a.tails == 1 { Tails::One } else { Tails::Two };
    let reports = metrics
        .iter()
        .map(|(name, t)| metric_report(&human, t).context(|| format!("metric {name}")))
        .collect::<CliResult<Vec<_>>>()?;

    let mut beaten: Vec<BTreeSet<LanguagePair>> = vec![BTreeSet::new(); metrics.len()];
    let mut comparisons = Vec::new();
    for i in 0..metrics.len() {
        for j in i + 1..metrics.len() {
            let results = compare_metrics(&human, &metrics[i].1, &metrics[j].1, tails, a.alpha)
                .context(|| format!("{} vs {}", metrics[i].0, metrics[j].0))?;
            for c in &results {
                if c.a_better {
                    beaten[j].insert(c.lang_pair.clone());
                }
                if c.b_better {
                    beaten[i].insert(c.lang_pair.clone());
                }
            }
            comparisons.push(MetricComparison {
                metric_a: &metrics[i].0,
                metric_b: &metrics[j].0,
                results,
            });
        }
    }

    let lps: Vec<&LanguagePair> = reports[0].per_pair.iter().map(|c| &c.lang_pair).collect();
    let mut header: Vec<String> = vec!["metric".into()];
    header.extend(ReportGroup::ORDER.iter().map(|g| g.label().to_string()));
    header.extend(lps.iter().map(|lp| lp.to_string()));
    let mut table = Table::new(header);
    let mark = metrics.len() > 1;
    for (k, ((name, _), report)) in metrics.iter().zip(&reports).enumerate() {
        let mut row = vec![name.clone()];
        row.extend(ReportGroup::ORDER.iter().map(|g| fmt3_opt(report.group(*g))));
        for c in &report.per_pair {
            let star = if mark && !beaten[k].contains(&c.lang_pair) { "*" } else { "" };
            let flag = if c.reliable { "" } else { "!" };
            row.push(format!("{}{star}{flag}", fmt3(c.r)));
        }
        table.row(row);
    }
    let mut systems = Table::new(["lang_pair", "n_systems", "outliers"]);
    for c in &reports[0].per_pair {
        systems.row([c.lang_pair.to_string(), c.n_systems.to_string(), join_or_dash(&c.outliers)]);
    }
    let mut rendered = table.render();
    if mark {
        rendered.push_str("* no other metric significantly better\n");
    }
    if reports[0].per_pair.iter().any(|c| !c.reliable) {
        rendered.push_str("! fewer than 4 systems, excluded from averages\n");
    }
    rendered.push('\n');
    rendered.push_str(&systems.render());

    let json = MetaEvalOutput {
        tails: a.tails,
        alpha: a.alpha,
        metrics: metrics
            .iter()
            .zip(&reports)
            .enumerate()
            .map(|(k, ((name, _), report))| NamedReport {
                metric: name,
                report,
                top: report
                    .per_pair
                    .iter()
                    .map(|c| &c.lang_pair)
                    .filter(|lp| !beaten[k].contains(*lp))
                    .collect(),
            })
            .collect(),
        comparisons,
    };
    print!("{rendered}");
    let tsv = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "metric\tscope\tkey\tr\tn\treliable\ttop\toutliers")?;
        for (k, ((name, _), report)) in metrics.iter().zip(&reports).enumerate() {
            for g in &report.groups {
                let r = g.average.map(|v| format!("{v:?}")).unwrap_or_else(|| "NA".into());
                writeln!(w, "{name}\tgroup\t{}\t{r}\t{}\t{}\tNA\tNA", g.group.label(), g.n_pairs, g.average.is_some())?;
            }
            for c in &report.per_pair {
                writeln!(
                    w,
                    "{name}\tpair\t{}\t{:?}\t{}\t{}\t{}\t{}",
                    c.lang_pair,
                    c.r,
                    c.n_systems,
                    c.reliable,
                    !beaten[k].contains(&c.lang_pair),
                    c.outliers.join(",")
                )?;
            }
        }
        Ok(())
    };
    write_machine(&a.out, &json, tsv)
}

/// Machine output only; for commands that render their own stdout.
fn write_machine<T, F>(out: &crate::output::OutputArgs, json: &T, tsv: F) -> CliResult<()>
where
    T: Serialize + ?Sized,
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match (&out.output, out.format) {
        (Some(p), Format::Tsv) => write_file(p, tsv),
        (Some(p), Format::Json) => write_json(p, json),
        (None, _) => Ok(()),
    }
}

fn join_or_dash<S: AsRef<str>>(items: &[S]) -> String {
    if items.is_empty() {
        "-".into()
    } else {
        items.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(",")
    }
}

fn outliers(a: OutliersArgs) -> CliResult<()> {
    let human = load_human_scores(&a.human.human, None)?;
    let mut splits: BTreeMap<String, OutlierSplit> = BTreeMap::new();
    let mut table = Table::new(["lang_pair", "n_systems", "n_outliers", "outliers"]);
    for lp in human.lang_pairs() {
        let split = mad_outliers(&human.systems(&lp)).context(|| lp.to_string())?;
        let out: Vec<&String> = split.outliers.iter().collect();
        table.row([
            lp.to_string(),
            (split.kept.len() + split.outliers.len()).to_string(),
            split.outliers.len().to_string(),
            join_or_dash(&out),
        ]);
        splits.insert(lp.to_string(), split);
    }
    a.out.emit(&table, &splits, |w| {
        writeln!(w, "lang_pair\tsystem\tscore\toutlier")?;
        for lp in human.lang_pairs() {
            let split = &splits[&lp.to_string()];
            for (name, score) in human.systems(&lp) {
                writeln!(w, "{lp}\t{name}\t{score:?}\t{}", split.outliers.contains(&name))?;
            }
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct TallyRow {
    key: String,
    tally: PairwiseTally,
}

fn pairwise(a: PairwiseArgs) -> CliResult<()> {
    let human = load_human_scores(&a.human.human, Some(&a.human_seg))?;
    let metric = load_segment_table(&a.metric_seg)?;
    let metric_lps: BTreeSet<&LanguagePair> = metric.keys().map(|k| &k.0).collect();
    let mut rows = Vec::new();
    let mut decisions: Vec<(LanguagePair, PairDecision)> = Vec::new();
    let mut per_lp = Vec::new();
    for lp in human.lang_pairs() {
        if !metric_lps.contains(&lp) {
            log::warn!("{}: no metric segment scores for {lp}, skipping", a.metric_seg.display());
            continue;
        }
        let d = pairwise_decisions(&lp, &human, &metric, a.alpha).context(|| lp.to_string())?;
        let t = tally(&d);
        decisions.extend(d.into_iter().map(|x| (lp.clone(), x)));
        per_lp.push((lp.clone(), t));
        rows.push(TallyRow {
            key: lp.to_string(),
            tally: t,
        });
    }
    if per_lp.is_empty() {
        return Err(CliError::Usage("no language pair has both human and metric segment scores".into()));
    }
    for g in ReportGroup::ORDER {
        let members: Vec<&PairwiseTally> = per_lp.iter().filter(|(lp, _)| g.contains(lp)).map(|(_, t)| t).collect();
        if members.is_empty() {
            continue;
        }
        let mut total = PairwiseTally::default();
        for t in members {
            total.merge(t);
        }
        rows.push(TallyRow {
            key: g.label().to_string(),
            tally: total,
        });
    }
    let mut table = Table::new(["", "sig:C", "sig:IC", "sig:NS", "nonsig:C", "nonsig:IC", "nonsig:NS", "pairs"]);
    for r in &rows {
        let (s, n) = (r.tally.human_significant, r.tally.human_not_significant);
        table.row([
            r.key.clone(),
            s.correct.to_string(),
            s.incorrect.to_string(),
            s.not_significant.to_string(),
            n.correct.to_string(),
            n.incorrect.to_string(),
            n.not_significant.to_string(),
            r.tally.total().to_string(),
        ]);
    }
    if let Some(p) = &a.decisions {
        match a.out.format {
            Format::Json => {
                #[derive(Serialize)]
                struct Row<'a> {
                    lang_pair: &'a LanguagePair,
                    #[serde(flatten)]
                    decision: &'a PairDecision,
                }
                let list: Vec<Row> = decisions.iter().map(|(lang_pair, decision)| Row { lang_pair, decision }).collect();
                write_json(p, &list)?;
            }
            Format::Tsv => write_file(p, |w| {
                writeln!(w, "lang_pair\tsystem_a\tsystem_b\thuman_significant\thuman_p\tmetric_p\tdecision")?;
                for (lp, d) in &decisions {
                    writeln!(
                        w,
                        "{lp}\t{}\t{}\t{}\t{:?}\t{:?}\t{:?}",
                        d.system_a, d.system_b, d.human_significant, d.human_p, d.metric_p, d.decision
                    )?;
                }
                Ok(())
            })?,
        }
    }
    a.out.emit(&table, &rows, |w| {
        writeln!(
            w,
            "key\tsig_correct\tsig_incorrect\tsig_not_significant\tnonsig_correct\tnonsig_incorrect\tnonsig_not_significant"
        )?;
        for r in &rows {
            let (s, n) = (r.tally.human_significant, r.tally.human_not_significant);
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.key, s.correct, s.incorrect, s.not_significant, n.correct, n.incorrect, n.not_significant
            )?;
        }
        Ok(())
    })
}

/// Reference and system lines of one language pair, aligned by seg_id.
struct Corpus {
    lang_pair: LanguagePair,
    seg_ids: Vec<usize>,
    references: Vec<String>,
    systems: Vec<(String, Vec<String>)>,
}

fn load_corpora(c: &CorpusArgs) -> CliResult<Vec<Corpus>> {
    if let Some(dir) = &c.dataset {
        return load_dataset_dir(dir)?
            .into_iter()
            .map(|ds| {
                let refs = ds
                    .references
                    .ok_or_else(|| CliError::Usage(format!("{}: no references", ds.lang_pair)))?;
                let systems = ds
                    .systems
                    .iter()
                    .map(|s| {
                        let lines = s.segments().iter().map(|p| p.target_text.clone()).collect();
                        (s.system_name().to_string(), lines)
                    })
                    .collect();
                Ok(Corpus {
                    lang_pair: ds.lang_pair,
                    seg_ids: refs.keys().copied().collect(),
                    references: refs.into_values().collect(),
                    systems,
                })
            })
            .collect();
    }
    let ref_path = c.reference.as_ref().expect("required without --dataset");
    let lang_pair = c.lang_pair.clone().expect("required with --ref");
    if c.hypotheses.is_empty() {
        return Err(CliError::Usage("no hypothesis files given".into()));
    }
    let refs = load_text_segments(ref_path, &SegmentIds::LineNumbers)?;
    let mut systems: Vec<(String, Vec<String>)> = Vec::new();
    for spec in &c.hypotheses {
        let (name, path) = parse_single(spec)?;
        let hyp = load_text_segments(&path, &SegmentIds::LineNumbers)?;
        if hyp.len() != refs.len() {
            return Err(CliError::Usage(format!(
                "{}: {} lines but the reference has {}",
                path.display(),
                hyp.len(),
                refs.len()
            )));
        }
        if systems.iter().any(|(n, _)| *n == name) {
            return Err(CliError::Usage(format!("system {name} given twice")));
        }
        systems.push((name, hyp.into_values().collect()));
    }
    Ok(vec![Corpus {
        lang_pair,
        seg_ids: refs.keys().copied().collect(),
        references: refs.into_values().collect(),
        systems,
    }])
}

/// Scores every system with a corpus metric; `metric(lang_pair, hyps, refs)`.
fn corpus_metric<F>(c: &CorpusArgs, out: &crate::output::OutputArgs, metric: F) -> CliResult<()>
where
    F: Fn(&LanguagePair, &[String], &[String]) -> refless_core::Result<f64>,
{
    let corpora = load_corpora(c)?;
    let mut rows = Vec::new();
    let mut segments = SegmentTable::new();
    for corpus in &corpora {
        for (name, hyps) in &corpus.systems {
            let what = || format!("{}/{name}", corpus.lang_pair);
            let score = metric(&corpus.lang_pair, hyps, &corpus.references).context(what)?;
            rows.push(ScoreRow {
                system: name.clone(),
                lang_pair: corpus.lang_pair.clone(),
                score,
                n_segments: hyps.len(),
            });
            if c.segments.is_some() {
                for ((id, h), r) in corpus.seg_ids.iter().zip(hyps).zip(&corpus.references) {
                    let s = metric(&corpus.lang_pair, std::slice::from_ref(h), std::slice::from_ref(r)).context(what)?;
                    segments.insert((corpus.lang_pair.clone(), name.clone(), *id), s);
                }
            }
        }
    }
    if let Some(p) = &c.segments {
        write_file(p, |w| write_segment_table(w, &segments))?;
    }
    out.emit(&score_table(&rows), &rows, |w| write_score_rows(w, &rows))
}

fn bleu_config(o: &BleuOptions, target: Option<&str>) -> BleuConfig {
    let auto = if target == Some("zh") { Tokenizer::Zh } else { Tokenizer::Intl };
    BleuConfig {
        max_order: o.max_order,
        smoothing: o.smooth,
        tokenizer: o.tokenize.unwrap_or(auto),
    }
}

fn corpus_bleu(a: BleuArgs) -> CliResult<()> {
    corpus_metric(&a.corpus, &a.out, |lp, h, r| bleu(h, r, &bleu_config(&a.bleu, Some(lp.target()))))
}

fn corpus_chrf(a: ChrfArgs) -> CliResult<()> {
    let cfg = ChrfConfig {
        char_order: a.char_order,
        beta: a.beta,
    };
    corpus_metric(&a.corpus, &a.out, |_, h, r| chrf(h, r, &cfg))
}

fn cross(a: CrossBleuArgs) -> CliResult<()> {
    let cfg = bleu_config(&a.bleu, None);
    let mut outputs: Vec<(String, Vec<String>)> = Vec::new();
    for spec in &a.systems {
        let (name, path) = parse_single(spec)?;
        if outputs.iter().any(|(n, _)| *n == name) {
            return Err(CliError::Usage(format!("system {name} given twice")));
        }
        outputs.push((name, read_lines(Some(&path))?));
    }
    if a.matrix {
        let m = cross_bleu_matrix(&outputs, &cfg)?;
        let mut header = vec!["system".to_string()];
        header.extend(m.systems.iter().cloned());
        header.push("average".into());
        let mut table = Table::new(header);
        for (i, name) in m.systems.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(m.scores[i].iter().map(|v| fmt3(*v)));
            row.push(fmt3(m.averages[i]));
            table.row(row);
        }
        return a.out.emit(&table, &m, |w| {
            writeln!(w, "system\t{}\taverage", m.systems.join("\t"))?;
            for (i, name) in m.systems.iter().enumerate() {
                let cells: Vec<String> = m.scores[i].iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{name}\t{}\t{:?}", cells.join("\t"), m.averages[i])?;
            }
            Ok(())
        });
    }
    if outputs.len() != 2 {
        return Err(CliError::Usage(format!(
            "cross-bleu takes exactly two systems without --matrix, got {}",
            outputs.len()
        )));
    }
    #[derive(Serialize)]
    struct Directed<'a> {
        hypothesis: &'a str,
        reference: &'a str,
        bleu: f64,
    }
    let (x, y) = (&outputs[0], &outputs[1]);
    let results = [
        Directed {
            hypothesis: &x.0,
            reference: &y.0,
            bleu: cross_bleu(&x.1, &y.1, &cfg)?,
        },
        Directed {
            hypothesis: &y.0,
            reference: &x.0,
            bleu: cross_bleu(&y.1, &x.1, &cfg)?,
        },
    ];
    let mut table = Table::new(["hypothesis", "reference", "bleu"]);
    for r in &results {
        table.row([r.hypothesis.to_string(), r.reference.to_string(), fmt3(r.bleu)]);
    }
    a.out.emit(&table, &results[..], |w| {
        writeln!(w, "hypothesis\treference\tbleu")?;
        for r in &results {
            writeln!(w, "{}\t{}\t{:?}", r.hypothesis, r.reference, r.bleu)?;
        }
        Ok(())
    })
}

/// Metric segment scores of one language pair, keyed by system.
fn segments_by_system(table: &SegmentTable, lp: &LanguagePair) -> BTreeMap<String, BTreeMap<usize, f64>> {
    let mut out: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    for ((l, sys, seg), v) in table {
        if l == lp {
            out.entry(sys.clone()).or_default().insert(*seg, *v);
        }
    }
    out
}

fn subsample(a: SubsampleArgs) -> CliResult<()> {
    let human = load_human_scores(&a.human.human, None)?;
    let metric = load_segment_table(&a.metric_seg)?;
    let mut results: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    for lp in human.lang_pairs() {
        let segs = segments_by_system(&metric, &lp);
        if segs.is_empty() {
            log::warn!("{}: no metric segment scores for {lp}, skipping", a.metric_seg.display());
            continue;
        }
        let r = subsample_correlations(&lp, &human.systems(&lp), &segs, &a.sizes, a.draws, a.seed)
            .context(|| lp.to_string())?;
        results.insert(lp.to_string(), r);
    }
    if results.is_empty() {
        return Err(CliError::Usage("no language pair has metric segment scores".into()));
    }
    let mut header = vec!["lang_pair".to_string()];
    header.extend(a.sizes.iter().map(usize::to_string));
    let mut table = Table::new(header);
    for (lp, r) in &results {
        let mut row = vec![lp.clone()];
        row.extend(a.sizes.iter().map(|s| fmt3(r[s])));
        table.row(row);
    }
    if let Some(p) = &a.plot {
        write_file(p, |w| {
            writeln!(w, "lang_pair,size,correlation")?;
            for (lp, r) in &results {
                for (size, v) in r {
                    writeln!(w, "{lp},{size},{v:?}")?;
                }
            }
            Ok(())
        })?;
    }
    a.out.emit(&table, &results, |w| {
        writeln!(w, "lang_pair\tsize\tcorrelation")?;
        for (lp, r) in &results {
            for (size, v) in r {
                writeln!(w, "{lp}\t{size}\t{v:?}")?;
            }
        }
        Ok(())
    })
}

fn tune(a: TuneArgs) -> CliResult<()> {
    let human = load_human_scores(&a.human.human, None)?;
    let scores = load_token_score_dir(&a.token_scores)?;
    let mut dev: BTreeMap<LanguagePair, DevSet> = BTreeMap::new();
    for ((lp, name), files) in scores {
        let Some(h) = human.system_score(&lp, &name) else {
            log::warn!("no human score for {lp}/{name}, skipping");
            continue;
        };
        let segments = align_samples(&files)
            .and_then(|groups| groups.iter().map(|g| regularize_tokens(g)).collect::<Result<Vec<_>, _>>())
            .context(|| format!("{lp}/{name}"))?;
        let set = dev.entry(lp.clone()).or_insert_with(|| DevSet {
            lang_pair: lp.clone(),
            human: BTreeMap::new(),
            systems: BTreeMap::new(),
        });
        set.human.insert(name.clone(), h);
        set.systems.insert(name, segments);
    }
    let dev: Vec<DevSet> = dev.into_values().collect();
    let grid = a.grid.clone().unwrap_or_else(default_grid);
    let best = tune_thresholds(&dev, &grid)?;
    let mut table = Table::new(["low", "high", "correlation"]);
    table.row([fmt3(best.low), fmt3(best.high), fmt3(best.correlation)]);
    a.out.emit(&table, &best, |w| {
        writeln!(w, "low\thigh\tcorrelation")?;
        writeln!(w, "{:?}\t{:?}\t{:?}", best.low, best.high, best.correlation)
    })
}

fn subword(c: SubwordCommand) -> CliResult<()> {
    match c {
        SubwordCommand::Train {
            corpus,
            vocab_size,
            rounds,
            model,
        } => {
            let lines: Vec<String> = read_lines(Some(&corpus))?.into_iter().filter(|l| !l.is_empty()).collect();
            let (m, trace) = train_unigram_traced(&lines, &TrainConfig::new(vocab_size, rounds))
                .context(|| corpus.display().to_string())?;
            write_file(&model, |w| m.save(w))?;
            let mut table = Table::new(["round", "log_likelihood", "vocab_size", "after_prune"]);
            for s in &trace {
                table.row([s.round.to_string(), fmt3(s.log_likelihood), s.vocab_size.to_string(), s.after_prune.to_string()]);
            }
            print!("{}", table.render());
            Ok(())
        }
        SubwordCommand::Nbest { model, input, n, out } => {
            let m = UnigramSubwordModel::load(&model)?;
            #[derive(Serialize)]
            struct Entry {
                line: usize,
                rank: usize,
                score: f64,
                pieces: Vec<String>,
            }
            let mut entries = Vec::new();
            for (i, text) in read_lines(input.as_deref())?.iter().enumerate() {
                if text.is_empty() {
                    continue;
                }
                let list = m.nbest(text, n).context(|| format!("line {}", i + 1))?;
                entries.extend(list.into_iter().enumerate().map(|(rank, s)| Entry {
                    line: i + 1,
                    rank: rank + 1,
                    score: s.score,
                    pieces: s.pieces,
                }));
            }
            let mut table = Table::new(["line", "rank", "score", "pieces"]);
            for e in &entries {
                table.row([e.line.to_string(), e.rank.to_string(), fmt3(e.score), show_pieces(&e.pieces)]);
            }
            out.emit(&table, &entries, |w| {
                writeln!(w, "line\trank\tscore\tpieces")?;
                for e in &entries {
                    writeln!(w, "{}\t{}\t{:?}\t{}", e.line, e.rank, e.score, show_pieces(&e.pieces))?;
                }
                Ok(())
            })
        }
        SubwordCommand::Sample {
            model,
            input,
            k,
            n,
            alpha,
            seed,
            out_prefix,
        } => {
            if k == 0 {
                return Err(CliError::Usage("-k must be at least 1".into()));
            }
            let m = UnigramSubwordModel::load(&model)?;
            let lines = read_lines(input.as_deref())?;
            // samples[k][line]
            let mut samples = vec![Vec::with_capacity(lines.len()); k];
            for (i, text) in lines.iter().enumerate() {
                for (j, out) in samples.iter_mut().enumerate() {
                    if text.is_empty() {
                        out.push(String::new());
                        continue;
                    }
                    let s = sample_segmentation(&m, text, n, alpha, derive_seed(seed, i, j))
                        .context(|| format!("line {}", i + 1))?;
                    out.push(show_pieces(&s.pieces));
                }
            }
            match out_prefix {
                Some(prefix) => {
                    for (j, lines) in samples.iter().enumerate() {
                        let path = std::path::PathBuf::from(format!("{}.{j}.txt", prefix.display()));
                        write_file(&path, |w| lines.iter().try_for_each(|l| writeln!(w, "{l}")))?;
                    }
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut w = stdout.lock();
                    for i in 0..lines.len() {
                        for (j, s) in samples.iter().enumerate() {
                            writeln!(w, "{}\t{j}\t{}", i + 1, s[i]).map_err(|e| CliError::io("<stdout>", e))?;
                        }
                    }
                }
            }
            Ok(())
        }
    }
}

/// Space-separated pieces, with spaces inside a piece shown as U+2581.
fn show_pieces(pieces: &[String]) -> String {
    pieces.iter().map(|p| p.replace(' ', "\u{2581}")).collect::<Vec<_>>().join(" ")
}

fn parallel_lines(source: &Path, target: &Path) -> CliResult<(Vec<String>, Vec<String>)> {
    let (src, tgt) = (read_lines(Some(source))?, read_lines(Some(target))?);
    if src.len() != tgt.len() {
        return Err(CliError::Usage(format!(
            "{} has {} lines but {} has {}",
            source.display(),
            src.len(),
            target.display(),
            tgt.len()
        )));
    }
    Ok((src, tgt))
}

fn toy(c: ToyCommand) -> CliResult<()> {
    match c {
        ToyCommand::Train {
            source,
            target,
            iterations,
            table,
        } => {
            let (src, tgt) = parallel_lines(&source, &target)?;
            let pairs: Vec<(Vec<String>, Vec<String>)> =
                src.iter().zip(&tgt).map(|(s, t)| (tokenize(s), tokenize(t))).collect();
            let (lex, trace) = train_model1_traced(&pairs, iterations)?;
            if trace.skipped > 0 {
                log::warn!("skipped {} pairs with an empty side", trace.skipped);
            }
            write_file(&table, |w| lex.save(w))?;
            let mut t = Table::new(["iteration", "log_likelihood"]);
            for (i, ll) in trace.log_likelihoods.iter().enumerate() {
                t.row([(i + 1).to_string(), fmt3(*ll)]);
            }
            print!("{}", t.render());
            Ok(())
        }
        ToyCommand::Score {
            table,
            source,
            target,
            output,
            dataset,
            out_dir,
        } => {
            let lex = LexicalTable::load(&table)?;
            if let (Some(source), Some(target), Some(output)) = (&source, &target, &output) {
                let (src, tgt) = parallel_lines(source, target)?;
                let scored = src
                    .iter()
                    .zip(&tgt)
                    .enumerate()
                    .map(|(i, (s, t))| {
                        score_tokens(&lex, i, &tokenize(s), &tokenize(t))
                            .context(|| format!("{}:{}", target.display(), i + 1))
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                return write_file(output, |w| write_token_scores(w, &scored));
            }
            let (dataset, out_dir) = (dataset.expect("clap requires it"), out_dir.expect("clap requires it"));
            for ds in load_dataset_dir(&dataset)? {
                for sys in &ds.systems {
                    let scored = sys
                        .segments()
                        .iter()
                        .map(|p| {
                            if p.source_text.is_empty() {
                                return Err(CliError::Usage(format!(
                                    "{}/{}: segment {} has no source text (missing src.txt?)",
                                    ds.lang_pair,
                                    sys.system_name(),
                                    p.seg_id
                                )));
                            }
                            score_tokens(&lex, p.seg_id, &tokenize(&p.source_text), &tokenize(&p.target_text))
                                .context(|| format!("{}/{}", ds.lang_pair, sys.system_name()))
                        })
                        .collect::<CliResult<Vec<_>>>()?;
                    let path = out_dir
                        .join(ds.lang_pair.to_string())
                        .join(format!("{}.jsonl", sys.system_name()));
                    write_file(&path, |w| write_token_scores(w, &scored))?;
                }
            }
            Ok(())
        }
    }
}

fn write_human(dir: &Path, human: &HumanJudgments) -> CliResult<()> {
    write_file(&dir.join("human.tsv"), |w| {
        writeln!(w, "lang_pair\tsystem\tscore")?;
        for ((lp, s), v) in human.system_scores() {
            writeln!(w, "{lp}\t{s}\t{v:?}")?;
        }
        Ok(())
    })?;
    if let Some(seg) = human.segment_scores() {
        write_file(&dir.join("human-seg.tsv"), |w| write_segment_table(w, seg))?;
    }
    Ok(())
}

fn synth(c: SynthCommand) -> CliResult<()> {
    match c {
        SynthCommand::Noise {
            seed,
            out,
            segments,
            train_pairs,
        } => {
            let mut cfg = NoiseBenchmarkConfig::new(seed);
            if let Some(n) = segments {
                cfg.test_segments = n;
            }
            if let Some(n) = train_pairs {
                cfg.train_pairs = n;
            }
            let bench = noise_benchmark(&cfg)?;
            bench.write_dir(&out)?;
            let mut table = Table::new(["system", "noise_rate", "human"]);
            for s in &bench.systems {
                let h = bench.human.system_score(&bench.lang_pair, &s.name).expect("generated");
                table.row([s.name.clone(), fmt3(s.noise_rate), fmt3(h)]);
            }
            print!("{}", table.render());
            Ok(())
        }
        SynthCommand::Correlation {
            seed,
            out,
            segments,
            systems,
        } => {
            let mut cfg = CorrelationBenchmarkConfig::new(seed);
            if let Some(n) = segments {
                cfg.n_segments = n;
            }
            if let Some(n) = systems {
                cfg.n_systems = n;
            }
            let bench = correlation_benchmark(&cfg)?;
            write_human(&out, &bench.human)?;
            let metric: SegmentTable = bench
                .metric
                .iter()
                .flat_map(|(name, segs)| {
                    segs.iter()
                        .map(|(i, v)| ((bench.lang_pair.clone(), name.clone(), *i), *v))
                })
                .collect();
            write_file(&out.join("metric-seg.tsv"), |w| write_segment_table(w, &metric))?;
            let mut table = Table::new(["system", "quality"]);
            for (name, q) in &bench.quality {
                table.row([name.clone(), fmt3(*q)]);
            }
            print!("{}", table.render());
            Ok(())
        }
    }
}
