//! Image classification providers and classifier evaluation metrics.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("image is empty")]
    EmptyImage,
    #[error("no exemplar images registered")]
    NoExemplars,
    #[error("label `{0}` is not among the matrix labels")]
    UnknownLabel(String),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("classifier provider failed: {0}")]
    Provider(String),
}

pub trait ClassifierProvider: Send + Sync {
    fn name(&self) -> &str;
    fn labels(&self) -> Vec<String>;
    /// One `(label, probability)` per label, in any order.
    fn classify(&self, bytes: &[u8]) -> Result<Vec<(String, f64)>, ClassifyError>;
}

/// Probability descending, label ascending.
pub fn classify_image(provider: &dyn ClassifierProvider, bytes: &[u8]) -> Result<Vec<(String, f64)>, ClassifyError> {
    if bytes.is_empty() {
        return Err(ClassifyError::EmptyImage);
    }
    let mut ranked = provider.classify(bytes)?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

pub const HISTOGRAM_BINS: usize = 8;

/// Normalized 8-bin grayscale histogram. Decodable images (PNG/JPEG) are
/// converted to 8-bit luma; any other byte string is read as raw intensities.
pub fn grayscale_histogram(bytes: &[u8]) -> [f64; HISTOGRAM_BINS] {
    let decoded = image::load_from_memory(bytes).ok().map(|img| img.to_luma8().into_raw());
    let pixels: &[u8] = decoded.as_deref().unwrap_or(bytes);
    let mut hist = [0.0; HISTOGRAM_BINS];
    for p in pixels {
        hist[usize::from(*p) * HISTOGRAM_BINS / 256] += 1.0;
    }
    let total = pixels.len().max(1) as f64;
    for h in &mut hist {
        *h /= total;
    }
    hist
}

fn euclidean(a: &[f64; HISTOGRAM_BINS], b: &[f64; HISTOGRAM_BINS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Softmax of `-distance` with temperature 1.
pub fn softmax_neg(distances: &[f64]) -> Vec<f64> {
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = distances.iter().map(|d| (-(d - min)).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Nearest-centroid classifier over grayscale histograms of exemplar images.
#[derive(Debug, Clone, Default)]
pub struct HistogramCentroidClassifier {
    exemplars: BTreeMap<String, Vec<[f64; HISTOGRAM_BINS]>>,
}

impl HistogramCentroidClassifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, label: &str, bytes: &[u8]) -> Result<(), ClassifyError> {
        if bytes.is_empty() {
            return Err(ClassifyError::EmptyImage);
        }
        self.exemplars
            .entry(label.to_string())
            .or_default()
            .push(grayscale_histogram(bytes));
        Ok(())
    }

    pub fn exemplar_count(&self) -> usize {
        self.exemplars.values().map(Vec::len).sum()
    }

    pub fn centroid(&self, label: &str) -> Option<[f64; HISTOGRAM_BINS]> {
        let hists = self.exemplars.get(label)?;
        let mut c = [0.0; HISTOGRAM_BINS];
        for h in hists {
            for (acc, v) in c.iter_mut().zip(h) {
                *acc += v;
            }
        }
        for v in &mut c {
            *v /= hists.len() as f64;
        }
        Some(c)
    }
}

impl ClassifierProvider for HistogramCentroidClassifier {
    fn name(&self) -> &str {
        "histogram-centroid"
    }

    fn labels(&self) -> Vec<String> {
        self.exemplars.keys().cloned().collect()
    }

    fn classify(&self, bytes: &[u8]) -> Result<Vec<(String, f64)>, ClassifyError> {
        if bytes.is_empty() {
            return Err(ClassifyError::EmptyImage);
        }
        if self.exemplars.is_empty() {
            return Err(ClassifyError::NoExemplars);
        }
        let hist = grayscale_histogram(bytes);
        let labels = self.labels();
        let distances: Vec<f64> = labels
            .iter()
            .map(|l| euclidean(&hist, &self.centroid(l).expect("label has exemplars")))
            .collect();
        Ok(labels.into_iter().zip(softmax_neg(&distances)).collect())
    }
}

/// Rows are truth, columns are prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn class_metrics(&self, i: usize) -> ClassMetrics {
        let tp = self.counts[i][i] as f64;
        let ratio = |den: u64| if den == 0 { 0.0 } else { tp / den as f64 };
        let precision = ratio(self.col_sum(i));
        let recall = ratio(self.row_sum(i));
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support: self.row_sum(i),
        }
    }
}

pub fn confusion_matrix(pairs: &[(String, String)], labels: &[String]) -> Result<ConfusionMatrix, ClassifyError> {
    let mut position = HashMap::with_capacity(labels.len());
    for (i, l) in labels.iter().enumerate() {
        if position.insert(l.as_str(), i).is_some() {
            return Err(ClassifyError::DuplicateLabel(l.clone()));
        }
    }
    let lookup = |l: &str| position.get(l).copied().ok_or_else(|| ClassifyError::UnknownLabel(l.to_string()));
    let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
    for (truth, predicted) in pairs {
        counts[lookup(truth)?][lookup(predicted)?] += 1;
    }
    Ok(ConfusionMatrix {
        labels: labels.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Support-weighted mean of per-class F1.
pub fn weighted_f1(m: &ConfusionMatrix) -> Result<f64, ClassifyError> {
    let total = m.total();
    if total == 0 {
        return Err(ClassifyError::EmptyMatrix);
    }
    let weighted: f64 = (0..m.labels.len())
        .map(|i| {
            let c = m.class_metrics(i);
            c.f1 * c.support as f64
        })
        .sum();
    Ok(weighted / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<u64>>,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub weighted_f1: f64,
}

pub fn evaluation_report(m: &ConfusionMatrix) -> Result<EvaluationReport, ClassifyError> {
    Ok(EvaluationReport {
        labels: m.labels.clone(),
        matrix: m.counts.clone(),
        per_class: m
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), m.class_metrics(i)))
            .collect(),
        weighted_f1: weighted_f1(m)?,
    })
}
