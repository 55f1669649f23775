//! TSV readers and writers for gold data and prediction runs.
//!
//! Both formats are `context<TAB>complex_word<TAB>substitute...`, one
//! instance per line.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::Path;

use super::{EvalError, GoldInstance, MalformedLine, Prediction};

/// A loaded gold file with any lines that could not be parsed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TsarDataset {
    pub instances: Vec<GoldInstance>,
    pub malformed: Vec<MalformedLine>,
}

fn read(path: &Path) -> Result<String, EvalError> {
    if !path.exists() {
        return Err(EvalError::FileNotFound(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
}

/// Non-empty lines with their 1-based numbers, split on tabs.
fn rows(data: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    data.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| (n, l.split('\t').collect()))
}

pub fn parse_tsar(data: &str) -> TsarDataset {
    let mut out = TsarDataset::default();
    for (line_no, fields) in rows(data) {
        let malformed = |reason: &str| MalformedLine {
            line_no,
            reason: reason.to_string(),
        };
        if fields.len() < 3 {
            out.malformed.push(malformed("expected context, complex word and substitutes"));
            continue;
        }
        if fields[0].trim().is_empty() || fields[1].trim().is_empty() {
            out.malformed.push(malformed("empty context or complex word"));
            continue;
        }
        match GoldInstance::new(fields[0], fields[1], &fields[2..]) {
            Some(g) => out.instances.push(g),
            None => out.malformed.push(malformed("no substitutes")),
        }
    }
    out
}

/// Loads a gold file. Malformed lines are collected, not fatal.
pub fn load_tsar(path: &Path) -> Result<TsarDataset, EvalError> {
    Ok(parse_tsar(&read(path)?))
}

/// One line of a prediction run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRow {
    pub context: String,
    pub complex_word: String,
    pub prediction: Prediction,
}

/// Loads a prediction run. Duplicate substitutes within a line are dropped.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRow>, EvalError> {
    let data = read(path)?;
    let mut out = Vec::new();
    let mut malformed = Vec::new();
    for (line_no, fields) in rows(&data) {
        if fields.len() < 2 {
            malformed.push(MalformedLine {
                line_no,
                reason: "expected context and complex word".into(),
            });
            continue;
        }
        out.push(PredictionRow {
            context: fields[0].trim().to_string(),
            complex_word: fields[1].trim().to_string(),
            prediction: Prediction::dedup(fields[2..].iter().copied()),
        });
    }
    if malformed.is_empty() {
        Ok(out)
    } else {
        Err(EvalError::Malformed(malformed))
    }
}

/// Matches prediction rows to gold instances by (context, complex word).
/// Gold instances without a row get an empty prediction; rows matching no
/// gold instance are an error.
pub fn align_predictions(
    golds: &[GoldInstance],
    rows: Vec<PredictionRow>,
) -> Result<Vec<Prediction>, EvalError> {
    let mut by_key: HashMap<(String, String), VecDeque<Prediction>> = HashMap::new();
    let mut order = Vec::new();
    for row in rows {
        let key = (row.context, row.complex_word);
        order.push(key.clone());
        by_key.entry(key).or_default().push_back(row.prediction);
    }
    let aligned: Vec<Prediction> = golds
        .iter()
        .map(|g| {
            by_key
                .get_mut(&g.key())
                .and_then(VecDeque::pop_front)
                .unwrap_or_default()
        })
        .collect();
    let mut leftover: Vec<String> = Vec::new();
    for key in order {
        if by_key.get(&key).is_some_and(|q| !q.is_empty()) {
            let label = format!("{} / {}", key.0, key.1);
            if !leftover.contains(&label) {
                leftover.push(label);
            }
        }
    }
    if leftover.is_empty() {
        Ok(aligned)
    } else {
        Err(EvalError::Alignment(leftover))
    }
}

pub fn write_predictions<W: Write>(
    out: &mut W,
    golds: &[GoldInstance],
    predictions: &[Prediction],
) -> std::io::Result<()> {
    for (g, p) in golds.iter().zip(predictions) {
        write!(out, "{}\t{}", g.context, g.complex_word)?;
        for item in p.items() {
            write!(out, "\t{item}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
