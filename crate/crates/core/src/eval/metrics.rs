use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, GoldInstance, Prediction};

pub const MAP_KS: [usize; 3] = [3, 5, 10];
pub const POTENTIAL_KS: [usize; 3] = [3, 5, 10];
pub const TOP1_NS: [usize; 3] = [1, 2, 3];

/// 1 if any of the first `k` predictions is a gold substitute.
pub fn potential_at_k(pred: &Prediction, gold: &GoldInstance, k: usize) -> f64 {
    let hit = pred.items().iter().take(k).any(|p| gold.contains(p));
    f64::from(u8::from(hit))
}

/// 1 if any of the first `n` predictions is a most-voted gold substitute.
/// Ties in the vote count accept every tied substitute.
pub fn acc_at_n_top1(pred: &Prediction, gold: &GoldInstance, n: usize) -> f64 {
    let top = gold.top_voted();
    let hit = pred
        .items()
        .iter()
        .take(n)
        .any(|p| top.contains(&crate::text::fold(p).as_str()));
    f64::from(u8::from(hit))
}

/// Average precision at `k` with binary relevance, normalized by
/// `min(k, number of distinct gold substitutes)`.
pub fn map_at_k(pred: &Prediction, gold: &GoldInstance, k: usize) -> f64 {
    let denom = k.min(gold.key_count());
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (i, p) in pred.items().iter().take(k).enumerate() {
        if gold.contains(p) {
            hits += 1;
            precision_sum += hits as f64 / (i + 1) as f64;
        }
    }
    precision_sum / denom as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc_at_1: f64,
    pub map_at_k: BTreeMap<usize, f64>,
    pub potential_at_k: BTreeMap<usize, f64>,
    pub acc_at_n_top1: BTreeMap<usize, f64>,
    pub instance_count: usize,
    /// Instances with no prediction at all.
    pub skipped_count: usize,
}

impl MetricsReport {
    /// Metric names and values in the column order of the shared-task tables.
    pub fn metric_rows(&self) -> Vec<(String, f64)> {
        let mut rows = vec![("ACC@1".to_string(), self.acc_at_1)];
        rows.extend(self.acc_at_n_top1.iter().map(|(n, v)| (format!("Acc@{n}@Top1"), *v)));
        rows.extend(self.map_at_k.iter().map(|(k, v)| (format!("MAP@{k}"), *v)));
        rows.extend(self.potential_at_k.iter().map(|(k, v)| (format!("Potential@{k}"), *v)));
        rows
    }
}

/// Dataset means of every per-instance metric. Inputs are aligned by index.
pub fn evaluate(predictions: &[Prediction], golds: &[GoldInstance]) -> Result<MetricsReport, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let n = golds.len();
    let mean = |f: &dyn Fn(&Prediction, &GoldInstance) -> f64| -> f64 {
        if n == 0 {
            return 0.0;
        }
        predictions.iter().zip(golds).map(|(p, g)| f(p, g)).sum::<f64>() / n as f64
    };
    for p in predictions {
        p.assert_distinct();
    }
    Ok(MetricsReport {
        acc_at_1: mean(&|p, g| potential_at_k(p, g, 1)),
        map_at_k: MAP_KS.iter().map(|&k| (k, mean(&|p, g| map_at_k(p, g, k)))).collect(),
        potential_at_k: POTENTIAL_KS
            .iter()
            .map(|&k| (k, mean(&|p, g| potential_at_k(p, g, k))))
            .collect(),
        acc_at_n_top1: TOP1_NS
            .iter()
            .map(|&k| (k, mean(&|p, g| acc_at_n_top1(p, g, k))))
            .collect(),
        instance_count: n,
        skipped_count: predictions.iter().filter(|p| p.is_empty()).count(),
    })
}
