use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{FitError, ModelFormula, Predictor};
use crate::sampling::PrimeSample;

/// Dense fixed-effects design with response and grouping indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    /// Column names; `(Intercept)` first, then terms in formula order.
    pub names: Vec<String>,
    /// Table labels matching `names`.
    pub labels: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Per row, index into `conv_labels` (sorted).
    pub conv: Vec<usize>,
    pub conv_labels: Vec<String>,
    /// Per row, index into `speaker_labels` (sorted `conv_id:speaker_id`).
    pub speaker: Vec<usize>,
    pub speaker_labels: Vec<String>,
    /// Raw predictor columns, used for random slopes.
    pub predictors: BTreeMap<Predictor, Vec<f64>>,
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }
}

fn predictor_value(s: &PrimeSample, p: Predictor) -> f64 {
    match p {
        Predictor::LnFreq => s.ln_freq,
        Predictor::SameConv => s.same_conv as f64,
        Predictor::LnSize => s.ln_size,
    }
}

fn index_labels(labels: impl Iterator<Item = String> + Clone) -> (Vec<usize>, Vec<String>) {
    let sorted: Vec<String> = labels.clone().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let lookup: BTreeMap<&str, usize> = sorted.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let idx = labels.map(|l| lookup[l.as_str()]).collect();
    (idx, sorted)
}

/// Builds the design. Interaction columns are elementwise products of their
/// (already centered) parents.
pub fn build_design(samples: &[PrimeSample], formula: &ModelFormula) -> Result<DesignMatrix, FitError> {
    formula.validate()?;
    if samples.is_empty() {
        return Err(FitError::NoRows);
    }
    let n = samples.len();
    let p = formula.fixed.len() + 1;
    let mut names = vec!["(Intercept)".to_string()];
    let mut labels = vec!["Intercept".to_string()];
    names.extend(formula.fixed.iter().map(|t| t.name()));
    labels.extend(formula.fixed.iter().map(|t| t.label()));

    let mut predictors: BTreeMap<Predictor, Vec<f64>> = BTreeMap::new();
    for pr in Predictor::ALL {
        let col: Vec<f64> = samples.iter().map(|s| predictor_value(s, pr)).collect();
        if let Some(row) = col.iter().position(|v| !v.is_finite()) {
            return Err(FitError::NonFinite { row, column: pr.column().to_string() });
        }
        predictors.insert(pr, col);
    }

    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
    }
    for (j, term) in formula.fixed.iter().enumerate() {
        for i in 0..n {
            x[(i, j + 1)] = term.0.iter().map(|f| predictors[f][i]).product();
        }
        if let Some(row) = (0..n).find(|&i| !x[(i, j + 1)].is_finite()) {
            return Err(FitError::NonFinite { row, column: term.name() });
        }
    }
    let mut y = DVector::zeros(n);
    for (i, s) in samples.iter().enumerate() {
        if s.prime > 1 {
            return Err(FitError::NotBinary { row: i });
        }
        y[i] = s.prime as f64;
    }
    let (conv, conv_labels) = index_labels(samples.iter().map(|s| s.conv_id.clone()));
    let (speaker, speaker_labels) =
        index_labels(samples.iter().map(|s| format!("{}:{}", s.conv_id, s.speaker_id)));
    Ok(DesignMatrix { names, labels, x, y, conv, conv_labels, speaker, speaker_labels, predictors })
}
