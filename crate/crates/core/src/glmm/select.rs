use serde::{Deserialize, Serialize};

use super::laplace::{fit_glmm_with, GlmmOptions};
use super::report::FitResult;
use super::{build_design, FitError, ModelFormula};
use crate::sampling::PrimeSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub removed: String,
    pub p: f64,
    /// Formula of the model the term was removed from.
    pub formula: String,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub fit: FitResult,
    pub formula: ModelFormula,
    pub trace: Vec<SelectionStep>,
}

/// Backward elimination over interaction terms. Each round drops the
/// interaction with the largest p-value among those with p ≥ `alpha` and
/// refits. Main effects are never candidates. `alpha ≥ 1` keeps the full model.
pub fn backward_select(
    samples: &[PrimeSample],
    full: &ModelFormula,
    alpha: f64,
    opts: &GlmmOptions,
) -> Result<Selection, FitError> {
    let mut formula = full.clone();
    let mut trace = Vec::new();
    loop {
        let design = build_design(samples, &formula)?;
        let mut fit = fit_glmm_with(&design, &formula, opts)?.result;
        let candidate = if alpha >= 1.0 {
            None
        } else {
            formula
                .fixed
                .iter()
                .filter(|t| t.is_interaction())
                .filter_map(|t| fit.term(&t.name()).map(|e| (t.name(), e.p)))
                .filter(|(_, p)| p.is_nan() || *p >= alpha)
                .max_by(|a, b| a.1.total_cmp(&b.1))
        };
        match candidate {
            Some((name, p)) => {
                trace.push(SelectionStep { removed: name.clone(), p, formula: formula.to_string() });
                formula = formula.without_term(&name);
            }
            None => {
                fit.selection_trace = Some(trace.clone());
                return Ok(Selection { fit, formula, trace });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glmm::logistic::sigmoid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simulate(seed: u64) -> Vec<PrimeSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for c in 0..40 {
            for s in ["A", "B"] {
                for _ in 0..60 {
                    let same: u8 = rng.random_range(0..2);
                    let f: f64 = rng.random_range(-2.0..2.0);
                    let z: f64 = rng.random_range(-1.0..1.0);
                    let x = same as f64 - 0.5;
                    let eta = -0.3 + 0.6 * x - 0.5 * f + 0.8 * z + 0.9 * f * x + 0.7 * f * z;
                    out.push(PrimeSample {
                        prime: (rng.random::<f64>() < sigmoid(eta)) as u8,
                        same_conv: same,
                        ln_freq: f,
                        ln_size: z,
                        conv_id: format!("c{c:02}"),
                        speaker_id: s.into(),
                        rule: "R→x".into(),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn drops_only_the_null_interaction() {
        let samples = simulate(11);
        let sel = backward_select(&samples, &ModelFormula::full(), 0.05, &GlmmOptions::default()).unwrap();
        let names: Vec<_> = sel.formula.fixed.iter().map(|t| t.name()).collect();
        assert_eq!(names, ["ln_freq", "same_conv", "ln_size", "ln_freq:same_conv", "ln_freq:ln_size"]);
        assert_eq!(sel.trace.len(), 1);
        assert_eq!(sel.trace[0].removed, "same_conv:ln_size");
        assert!(sel.trace[0].p >= 0.05);
        assert_eq!(sel.fit.selection_trace.as_ref().unwrap(), &sel.trace);
    }

    #[test]
    fn alpha_one_keeps_everything() {
        let samples = simulate(12);
        let sel = backward_select(&samples, &ModelFormula::full(), 1.0, &GlmmOptions::default()).unwrap();
        assert_eq!(sel.formula, ModelFormula::full());
        assert!(sel.trace.is_empty());
    }
}
