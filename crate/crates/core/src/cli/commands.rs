use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use log::warn;
use serde_json::{json, Value};

use super::config::{OutputFormat, RankingMode, RunConfig};
use super::pipeline::{build_backend, generate_all, predictions, thread_pool, Ranker};
use super::{CliError, SweepAxis};
use crate::eval::{self, report, GoldInstance, MetricsReport, Prediction, TsarDataset};
use crate::generator::{generate_candidates, GeneratorConfig, SimplificationTask, MAX_LOOKAHEAD_WORDS};
use crate::ranker::{RankingWeights, Ranked};

pub fn simplify(
    cfg: &RunConfig,
    sentence: &str,
    word: Option<&str>,
    span: Option<(usize, usize)>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let task = match (span, word) {
        (Some((start, end)), _) => SimplificationTask::new(sentence, start..end, &cfg.lang)?,
        (None, Some(word)) => SimplificationTask::locate(sentence, word, &cfg.lang)?,
        (None, None) => return Err(CliError::Input("give a word or --span".into())),
    };
    let backend = build_backend(cfg)?;
    let ranker = Ranker::from_config(cfg)?;
    let candidates = generate_candidates(&task, backend.as_ref(), &cfg.generator)
        .map_err(|e| with_word(e.into(), task.complex_word()))?;
    let ranked = ranker.rank(&candidates, task.complex_word(), cfg.top_n);

    let config = cfg.echo();
    let rendered = match cfg.format {
        OutputFormat::Text => simplify_text(&task, &ranked, &config),
        OutputFormat::Json => {
            let span = task.complex_span();
            let doc = json!({
                "config": config,
                "sentence": task.text(),
                "complex_word": task.complex_word(),
                "span": [span.start, span.end],
                "substitutes": ranked
                    .iter()
                    .enumerate()
                    .map(|(i, r)| ranked_json(i + 1, r))
                    .collect::<Vec<_>>(),
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json value"))
        }
        OutputFormat::Tsv => {
            let mut s = String::from(
                "rank\tsurface\tscore\tfirst_token_logprob\town_continuation_logprob\tlookahead_logprob\ttotal_score\n",
            );
            for (i, r) in ranked.iter().enumerate() {
                let c = &r.candidate;
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    i + 1,
                    c.surface,
                    r.score,
                    c.first_token_logprob,
                    c.own_continuation_logprob,
                    c.lookahead_logprob,
                    c.total_score
                );
            }
            s
        }
    };
    out.write_all(rendered.as_bytes())?;
    Ok(())
}

fn with_word(e: CliError, word: &str) -> CliError {
    match e {
        CliError::Input(m) => CliError::Input(format!("`{word}`: {m}")),
        other => other,
    }
}

fn ranked_json(rank: usize, r: &Ranked) -> Value {
    let c = &r.candidate;
    json!({
        "rank": rank,
        "surface": c.surface,
        "score": r.score,
        "first_token_logprob": c.first_token_logprob,
        "own_continuation_logprob": c.own_continuation_logprob,
        "lookahead_logprob": c.lookahead_logprob,
        "total_score": c.total_score,
        "features": r.features,
    })
}

fn simplify_text(task: &SimplificationTask, ranked: &[Ranked], config: &Value) -> String {
    let mut s = String::new();
    let span = task.complex_span();
    let _ = writeln!(s, "# config: {config}");
    let _ = writeln!(
        s,
        "# complex word: {} (chars {}..{})",
        task.complex_word(),
        span.start,
        span.end
    );
    let width = ranked
        .iter()
        .map(|r| r.candidate.surface.chars().count())
        .max()
        .unwrap_or(0)
        .max("substitute".len());
    let _ = writeln!(
        s,
        "{:>4}  {:<width$}  {:>10}  {:>10}  {:>10}  {:>10}",
        "rank", "substitute", "score", "first", "cont", "lookahead"
    );
    for (i, r) in ranked.iter().enumerate() {
        let c = &r.candidate;
        let _ = writeln!(
            s,
            "{:>4}  {:<width$}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}",
            i + 1,
            c.surface,
            r.score,
            c.first_token_logprob,
            c.own_continuation_logprob,
            c.lookahead_logprob
        );
    }
    s
}

fn load_dataset(path: &Path) -> Result<TsarDataset, CliError> {
    let ds = eval::load_tsar(path)?;
    for m in &ds.malformed {
        warn!("{}: {m}", path.display());
    }
    if ds.instances.is_empty() {
        return Err(CliError::Input(format!("{}: no usable instances", path.display())));
    }
    Ok(ds)
}

/// Config echo plus the dataset and any lines that were skipped in it.
fn report_header(mut config: Value, dataset: &Path, ds: &TsarDataset) -> Value {
    if let Value::Object(obj) = &mut config {
        obj.insert("dataset".into(), json!(dataset.display().to_string()));
        obj.insert(
            "malformed_lines".into(),
            json!(ds.malformed.iter().map(|m| m.to_string()).collect::<Vec<_>>()),
        );
    }
    config
}

fn render_report(report: &MetricsReport, header: &Value, format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => report::to_text(report, Some(header)),
        OutputFormat::Json => format!(
            "{}\n",
            serde_json::to_string_pretty(&report::to_json(report, Some(header))).expect("json value")
        ),
        OutputFormat::Tsv => format!("# config: {header}\n{}", report::to_tsv(report)),
    }
}

/// Generates and ranks predictions for every instance.
fn predict(
    cfg: &RunConfig,
    golds: &[GoldInstance],
) -> Result<Vec<Prediction>, CliError> {
    let backend = build_backend(cfg)?;
    let ranker = Ranker::from_config(cfg)?;
    let pool = thread_pool(cfg.workers)?;
    let results = generate_all(&pool, backend.as_ref(), golds, &cfg.lang, &cfg.generator);
    predictions(golds, &results, &ranker, cfg.top_n)
}

pub fn evaluate(
    cfg: &RunConfig,
    dataset: &Path,
    pred_out: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let ds = load_dataset(dataset)?;
    let preds = predict(cfg, &ds.instances)?;
    if let Some(path) = pred_out {
        let mut buf = Vec::new();
        eval::write_predictions(&mut buf, &ds.instances, &preds)?;
        std::fs::write(path, buf)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    let report = eval::evaluate(&preds, &ds.instances)?;
    let header = report_header(cfg.echo(), dataset, &ds);
    out.write_all(render_report(&report, &header, cfg.format).as_bytes())?;
    Ok(())
}

pub fn score(
    cfg: &RunConfig,
    dataset: &Path,
    predictions_path: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let ds = load_dataset(dataset)?;
    let rows = eval::load_predictions(predictions_path)?;
    let preds = eval::align_predictions(&ds.instances, rows)?;
    let report = eval::evaluate(&preds, &ds.instances)?;
    let header = report_header(
        json!({"predictions": predictions_path.display().to_string()}),
        dataset,
        &ds,
    );
    out.write_all(render_report(&report, &header, cfg.format).as_bytes())?;
    Ok(())
}

/// Labels for the ranking-feature ablation, with the weights each keeps.
fn feature_ablation(w: RankingWeights) -> [(&'static str, Option<RankingWeights>); 4] {
    [
        ("prediction-only", None),
        ("+freq", Some(RankingWeights::new(w.prediction, w.frequency, 0.0))),
        ("+embed", Some(RankingWeights::new(w.prediction, 0.0, w.similarity))),
        ("+both", Some(w)),
    ]
}

pub fn sweep(
    cfg: &RunConfig,
    dataset: &Path,
    axis: SweepAxis,
    values: Option<Vec<usize>>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let ds = load_dataset(dataset)?;
    let golds = &ds.instances;
    let backend = build_backend(cfg)?;
    let ranker = Ranker::from_config(cfg)?;
    let pool = thread_pool(cfg.workers)?;
    let run_with = |generator: &GeneratorConfig, ranker: &Ranker| {
        let results = generate_all(&pool, backend.as_ref(), golds, &cfg.lang, generator);
        let preds = predictions(golds, &results, ranker, cfg.top_n)?;
        Ok::<_, CliError>(eval::evaluate(&preds, golds)?)
    };

    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    match axis {
        SweepAxis::SuffixLength => {
            let values = values.unwrap_or_else(|| (0..=MAX_LOOKAHEAD_WORDS).collect());
            for l in values {
                let generator = GeneratorConfig {
                    lookahead_words: l,
                    ..cfg.generator
                };
                generator.validate()?;
                rows.push((l.to_string(), run_with(&generator, &ranker)?));
            }
        }
        SweepAxis::KCandidates => {
            let values = values.unwrap_or_else(|| vec![5, 10, 20, 50, 100]);
            for k in values {
                let generator = GeneratorConfig {
                    k,
                    first_token_pool: cfg.generator.first_token_pool.max(k),
                    ..cfg.generator
                };
                generator.validate()?;
                rows.push((k.to_string(), run_with(&generator, &ranker)?));
            }
        }
        SweepAxis::RankingFeatures => {
            let RankingMode::Weighted(weights) = cfg.ranking else {
                return Err(CliError::Input(
                    "the ranking-features sweep needs --embeddings and --freq".into(),
                ));
            };
            if values.is_some() {
                warn!("--values is ignored for the ranking-features sweep");
            }
            let results = generate_all(&pool, backend.as_ref(), golds, &cfg.lang, &cfg.generator);
            for (label, w) in feature_ablation(weights) {
                // Prediction score alone orders exactly like the generator.
                let r = match w {
                    Some(w) => ranker.with_weights(w),
                    None => Ranker::Passthrough,
                };
                let preds = predictions(golds, &results, &r, cfg.top_n)?;
                rows.push((label.to_string(), eval::evaluate(&preds, golds)?));
            }
        }
    }

    let mut config = report_header(cfg.echo(), dataset, &ds);
    if let Value::Object(obj) = &mut config {
        let axis_name = match axis {
            SweepAxis::SuffixLength => "suffix_length",
            SweepAxis::RankingFeatures => "ranking_features",
            SweepAxis::KCandidates => "k_candidates",
        };
        obj.insert("axis".into(), json!(axis_name));
    }
    let mut s = format!("# config: {config}\naxis_value\tmetric\tvalue\n");
    for (value, report) in &rows {
        for (name, v) in report.metric_rows() {
            let _ = writeln!(s, "{value}\t{name}\t{v}");
        }
        let _ = writeln!(s, "{value}\tskipped_count\t{}", report.skipped_count);
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}
