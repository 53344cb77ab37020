use nalgebra::{DMatrix, DVector};

use super::report::{FitResult, TermEstimate};
use super::{DesignMatrix, FitError};

/// Fitted probabilities beyond this linear predictor are numerically 0 or 1.
pub(crate) const SEPARATION_ETA: f64 = 36.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub max_iter: usize,
    pub score_tol: f64,
    pub rel_loglik_tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { max_iter: 100, score_tol: 1e-8, rel_loglik_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub result: FitResult,
    pub beta: DVector<f64>,
    /// Inverse Fisher information at the estimate.
    pub vcov: DMatrix<f64>,
    /// Log-likelihood after each accepted step, starting from β = 0.
    pub loglik_trace: Vec<f64>,
}

/// Cholesky factorization that also rejects numerically rank-deficient matrices.
pub(crate) fn cholesky(m: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>, FitError> {
    let scale = m.diagonal().amax();
    let chol = m.cholesky().ok_or(FitError::Singular)?;
    let diag = chol.l_dirty().diagonal();
    if !(scale > 0.0) || diag.iter().any(|&d| !(d * d > 1e-12 * scale)) {
        return Err(FitError::Singular);
    }
    Ok(chol)
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^η) without overflow.
pub(crate) fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

pub(crate) fn bernoulli_loglik(y: f64, eta: f64) -> f64 {
    y * eta - softplus(eta)
}

pub fn log_likelihood(design: &DesignMatrix, beta: &DVector<f64>) -> f64 {
    let eta = &design.x * beta;
    eta.iter().zip(design.y.iter()).map(|(&e, &y)| bernoulli_loglik(y, e)).sum()
}

pub fn fit_logistic(design: &DesignMatrix) -> Result<FitResult, FitError> {
    fit_logistic_with(design, &LogisticOptions::default()).map(|f| f.result)
}

/// Maximum likelihood by iteratively reweighted least squares, with step
/// halving so that the log-likelihood never decreases.
pub fn fit_logistic_with(design: &DesignMatrix, opts: &LogisticOptions) -> Result<LogisticFit, FitError> {
    let (n, p) = design.x.shape();
    if n == 0 {
        return Err(FitError::NoRows);
    }
    if let Some(row) = design.y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(FitError::NotBinary { row });
    }
    let x = &design.x;
    let y = &design.y;
    let mut beta = DVector::zeros(p);
    let mut ll = log_likelihood(design, &beta);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let eta = x * &beta;
        let mut score = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let w = mu * (1.0 - mu);
            let row = x.row(i);
            for a in 0..p {
                score[a] += row[a] * (y[i] - mu);
                for b in 0..=a {
                    info[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        if score.amax() < opts.score_tol {
            converged = true;
            break;
        }
        info.fill_upper_triangle_with_lower_triangle();
        let step = cholesky(info)?.solve(&score);
        iterations += 1;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let cand_ll = log_likelihood(design, &cand);
            if cand_ll >= ll {
                accepted = Some((cand, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((new_beta, new_ll)) = accepted else {
            // no ascent left at floating-point resolution
            converged = true;
            break;
        };
        let rel = (new_ll - ll).abs() / ll.abs().max(1e-300);
        beta = new_beta;
        ll = new_ll;
        trace.push(ll);
        if (x * &beta).amax() > SEPARATION_ETA {
            return Err(FitError::Separation);
        }
        if rel < opts.rel_loglik_tol {
            converged = true;
            break;
        }
    }

    let eta = x * &beta;
    let mut info = DMatrix::zeros(p, p);
    for i in 0..n {
        let mu = sigmoid(eta[i]);
        let w = mu * (1.0 - mu);
        let row = x.row(i);
        info += row.transpose() * row * w;
    }
    let vcov = cholesky(info)?.inverse();
    let terms = design
        .names
        .iter()
        .zip(&design.labels)
        .enumerate()
        .map(|(j, (name, label))| TermEstimate::new(name, label, beta[j], vcov[(j, j)].max(0.0).sqrt()))
        .collect();
    let result = FitResult {
        terms,
        variance_components: Vec::new(),
        loglik: ll,
        converged,
        iterations,
        gradient_max_norm: None,
        boundary: false,
        method: "irls".into(),
        selection_trace: None,
    };
    Ok(LogisticFit { result, beta, vcov, loglik_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glmm::{build_design, ModelFormula};
    use crate::sampling::PrimeSample;

    fn rows(data: &[(u8, u8, f64)]) -> Vec<PrimeSample> {
        data.iter()
            .enumerate()
            .map(|(i, &(prime, same, f))| PrimeSample {
                prime,
                same_conv: same,
                ln_freq: f,
                ln_size: 0.0,
                conv_id: format!("c{}", i % 3),
                speaker_id: "A".into(),
                rule: "R→x".into(),
            })
            .collect()
    }

    #[test]
    fn zero_coefficients_give_half() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_intercept_only_is_zero() {
        let s = rows(&[(1, 0, 0.0), (0, 0, 0.0), (1, 0, 0.0), (0, 0, 0.0)]);
        let d = build_design(&s, &"prime ~ 1".parse::<ModelFormula>().unwrap()).unwrap();
        let fit = fit_logistic(&d).unwrap();
        assert!(fit.terms[0].beta.abs() < 1e-12);
        assert_eq!(fit.terms[0].p, 1.0);
    }

    #[test]
    fn detects_separation() {
        let s = rows(&[(0, 0, -2.0), (0, 0, -1.0), (1, 0, 1.0), (1, 0, 2.0)]);
        let d = build_design(&s, &"prime ~ ln_freq".parse::<ModelFormula>().unwrap()).unwrap();
        assert_eq!(fit_logistic(&d).unwrap_err(), FitError::Separation);
    }

    #[test]
    fn detects_singular_information() {
        // same_conv is constant, so it duplicates the intercept column
        let s = rows(&[(0, 1, -1.0), (1, 1, 0.5), (1, 1, 1.0), (0, 1, 0.3)]);
        let d = build_design(&s, &"prime ~ same_conv".parse::<ModelFormula>().unwrap()).unwrap();
        assert_eq!(fit_logistic(&d).unwrap_err(), FitError::Singular);
    }
}
