use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::logistic::{bernoulli_loglik, cholesky, fit_logistic_with, sigmoid, LogisticOptions};
use super::report::{FitResult, TermEstimate, VarianceComponent};
use super::{build_design, DesignMatrix, FitError, Grouping, ModelFormula, RandomComponent};
use crate::sampling::PrimeSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceMode {
    #[default]
    Estimate,
    /// All random-effect standard deviations fixed at zero.
    PinnedZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmmOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub variance: VarianceMode,
    pub init_sd: f64,
    /// Standard deviations below this are reported as boundary estimates.
    pub boundary_sd: f64,
    pub inner_tol: f64,
}

impl Default for GlmmOptions {
    fn default() -> Self {
        Self { max_iter: 200, grad_tol: 1e-6, variance: VarianceMode::Estimate, init_sd: 0.5, boundary_sd: 1e-3, inner_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct GlmmFit {
    pub result: FitResult,
    pub beta: DVector<f64>,
    pub sd: DVector<f64>,
    pub vcov: DMatrix<f64>,
}

/// Laplace objective value and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceEval {
    pub value: f64,
    pub grad_beta: DVector<f64>,
    pub grad_sd: DVector<f64>,
}

/// Rows of one conversation and their random-effect layout.
#[derive(Debug, Clone)]
struct Block {
    x: DMatrix<f64>,
    y: DVector<f64>,
    dim: usize,
    /// `effect[k][i]`: local effect index of component k for row i.
    effect: Vec<Vec<usize>>,
    /// `z[k][i]`: covariate of component k for row i.
    z: Vec<Vec<f64>>,
}

struct BlockEval {
    value: f64,
    grad_beta: DVector<f64>,
    grad_sd: DVector<f64>,
    info: Option<DMatrix<f64>>,
}

/// Laplace-approximated marginal log-likelihood of a logistic model with
/// random effects nested in conversations, in the spherical form b = Λu.
#[derive(Debug, Clone)]
pub struct LaplaceModel {
    components: Vec<RandomComponent>,
    blocks: Vec<Block>,
    p: usize,
    inner_tol: f64,
}

impl LaplaceModel {
    pub fn new(design: &DesignMatrix, components: &[RandomComponent]) -> Self {
        let p = design.cols();
        let n_conv = design.conv_labels.len();
        let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); n_conv];
        for (i, &c) in design.conv.iter().enumerate() {
            rows_of[c].push(i);
        }
        let blocks = rows_of
            .into_iter()
            .filter(|rows| !rows.is_empty())
            .map(|rows| {
                let m = rows.len();
                let x = DMatrix::from_fn(m, p, |r, j| design.x[(rows[r], j)]);
                let y = DVector::from_fn(m, |r, _| design.y[rows[r]]);
                let mut speakers: Vec<usize> = rows.iter().map(|&i| design.speaker[i]).collect();
                speakers.sort_unstable();
                speakers.dedup();
                let mut dim = 0;
                let mut effect = Vec::with_capacity(components.len());
                let mut z = Vec::with_capacity(components.len());
                for comp in components {
                    let e: Vec<usize> = match comp.grouping {
                        Grouping::Conversation => vec![dim; m],
                        Grouping::ConversationSpeaker => rows
                            .iter()
                            .map(|&i| dim + speakers.binary_search(&design.speaker[i]).unwrap())
                            .collect(),
                    };
                    dim += match comp.grouping {
                        Grouping::Conversation => 1,
                        Grouping::ConversationSpeaker => speakers.len(),
                    };
                    effect.push(e);
                    z.push(match comp.covariate {
                        None => vec![1.0; m],
                        Some(pr) => rows.iter().map(|&i| design.predictors[&pr][i]).collect(),
                    });
                }
                Block { x, y, dim, effect, z }
            })
            .collect();
        LaplaceModel { components: components.to_vec(), blocks, p, inner_tol: 1e-10 }
    }

    pub fn components(&self) -> &[RandomComponent] {
        &self.components
    }

    pub fn eval(&self, beta: &DVector<f64>, sd: &DVector<f64>) -> LaplaceEval {
        let (value, grad_beta, grad_sd, _) = self.evaluate(beta, sd, false);
        LaplaceEval { value, grad_beta, grad_sd }
    }

    /// Fixed-effect information from the Laplace curvature, with the random
    /// effects profiled out.
    pub fn fixed_information(&self, beta: &DVector<f64>, sd: &DVector<f64>) -> DMatrix<f64> {
        self.evaluate(beta, sd, true).3.expect("information requested")
    }

    fn evaluate(
        &self,
        beta: &DVector<f64>,
        sd: &DVector<f64>,
        want_info: bool,
    ) -> (f64, DVector<f64>, DVector<f64>, Option<DMatrix<f64>>) {
        let k = self.components.len();
        let parts: Vec<BlockEval> =
            self.blocks.par_iter().map(|b| self.eval_block(b, beta, sd, want_info)).collect();
        let mut value = 0.0;
        let mut gb = DVector::zeros(self.p);
        let mut gs = DVector::zeros(k);
        let mut info = want_info.then(|| DMatrix::zeros(self.p, self.p));
        for part in parts {
            value += part.value;
            gb += part.grad_beta;
            gs += part.grad_sd;
            if let (Some(acc), Some(i)) = (info.as_mut(), part.info) {
                *acc += i;
            }
        }
        (value, gb, gs, info)
    }

    fn eval_block(&self, b: &Block, beta: &DVector<f64>, sd: &DVector<f64>, want_info: bool) -> BlockEval {
        let m = b.y.len();
        let d = b.dim;
        let k = self.components.len();
        let xb = &b.x * beta;
        let mut a = DMatrix::zeros(m, d);
        for c in 0..k {
            for i in 0..m {
                a[(i, b.effect[c][i])] += b.z[c][i] * sd[c];
            }
        }

        let objective = |u: &DVector<f64>| -> f64 {
            let eta = &xb + &a * u;
            eta.iter().zip(b.y.iter()).map(|(&e, &y)| bernoulli_loglik(y, e)).sum::<f64>() - 0.5 * u.norm_squared()
        };
        let weights = |u: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
            let eta = &xb + &a * u;
            let mu = eta.map(sigmoid);
            let r = &b.y - &mu;
            (mu, r)
        };
        let hessian = |mu: &DVector<f64>| -> DMatrix<f64> {
            let mut wa = a.clone();
            for i in 0..m {
                let w = mu[i] * (1.0 - mu[i]);
                wa.row_mut(i).scale_mut(w);
            }
            let mut h = a.transpose() * wa;
            for j in 0..d {
                h[(j, j)] += 1.0;
            }
            h
        };

        let mut u = DVector::zeros(d);
        let mut g_u = objective(&u);
        for _ in 0..200 {
            let (mu, r) = weights(&u);
            let grad = a.transpose() * &r - &u;
            if d == 0 || grad.amax() < self.inner_tol {
                break;
            }
            let h = hessian(&mu);
            let step = match h.cholesky() {
                Some(ch) => ch.solve(&grad),
                None => break,
            };
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let cand = &u + &step * t;
                let v = objective(&cand);
                if v >= g_u - 1e-14 * g_u.abs() {
                    u = cand;
                    g_u = v;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }

        let (mu, r) = weights(&u);
        let w = mu.map(|m| m * (1.0 - m));
        let wd = mu.map(|m| m * (1.0 - m) * (1.0 - 2.0 * m));
        let h = hessian(&mu);
        let chol = h.cholesky().expect("I + A'WA is positive definite");
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let value = g_u - 0.5 * logdet;

        // hinv_a row i = H⁻¹ a_i
        let hinv_at = chol.solve(&a.transpose());
        let mut v = DVector::zeros(m);
        for i in 0..m {
            let q = a.row(i).dot(&hinv_at.column(i).transpose());
            v[i] = wd[i] * q;
        }
        let mut wx = b.x.clone();
        for i in 0..m {
            wx.row_mut(i).scale_mut(w[i]);
        }
        let awx = a.transpose() * &wx;
        let av = a.transpose() * &v;
        let hinv_av = chol.solve(&av);
        let grad_beta = b.x.transpose() * &r - 0.5 * (b.x.transpose() * &v - awx.transpose() * hinv_av);

        let mut grad_sd = DVector::zeros(k);
        for c in 0..k {
            let e = DVector::from_fn(m, |i, _| b.z[c][i] * u[b.effect[c][i]]);
            let mut dg = DVector::zeros(d);
            for i in 0..m {
                dg[b.effect[c][i]] += b.z[c][i] * r[i];
            }
            let we = e.component_mul(&w);
            dg -= a.transpose() * we;
            let du = chol.solve(&dg);
            let deta = &e + &a * du;
            let mut direct = 0.0;
            for i in 0..m {
                direct += w[i] * b.z[c][i] * hinv_at[(b.effect[c][i], i)];
            }
            grad_sd[c] = r.dot(&e) - 0.5 * (2.0 * direct + v.dot(&deta));
        }

        let info = want_info.then(|| {
            let xwx = b.x.transpose() * &wx;
            xwx - awx.transpose() * chol.solve(&awx)
        });
        BlockEval { value, grad_beta, grad_sd, info }
    }
}

pub fn fit_glmm(samples: &[PrimeSample], formula: &ModelFormula) -> Result<FitResult, FitError> {
    let design = build_design(samples, formula)?;
    fit_glmm_with(&design, formula, &GlmmOptions::default()).map(|f| f.result)
}

/// Negated objective over the unconstrained parameters (β, log sd).
struct Objective<'a> {
    model: &'a LaplaceModel,
    p: usize,
    k: usize,
    pinned: bool,
    evals: std::cell::Cell<usize>,
}

impl Objective<'_> {
    fn sd(&self, phi: &DVector<f64>) -> DVector<f64> {
        if self.pinned {
            DVector::zeros(self.k)
        } else {
            DVector::from_fn(self.k, |c, _| phi[self.p + c].exp())
        }
    }

    fn eval(&self, phi: &DVector<f64>) -> (f64, DVector<f64>) {
        self.evals.set(self.evals.get() + 1);
        let beta = phi.rows(0, self.p).into_owned();
        let sd = self.sd(phi);
        let e = self.model.eval(&beta, &sd);
        let mut g = DVector::zeros(phi.len());
        g.rows_mut(0, self.p).copy_from(&(-&e.grad_beta));
        if !self.pinned {
            for c in 0..self.k {
                g[self.p + c] = -sd[c] * e.grad_sd[c];
            }
        }
        (-e.value, g)
    }
}

struct Optimum {
    phi: DVector<f64>,
    f: f64,
    g: DVector<f64>,
    iterations: usize,
}

fn line_search(
    obj: &Objective<'_>,
    phi: &DVector<f64>,
    f: f64,
    g: &DVector<f64>,
    dir: &DVector<f64>,
) -> Option<(DVector<f64>, f64, DVector<f64>)> {
    let slope = g.dot(dir);
    let gmax = g.amax();
    let mut t = 1.0;
    for _ in 0..50 {
        let cand = phi + dir * t;
        let (fc, gc) = obj.eval(&cand);
        if fc.is_finite() {
            let armijo = fc <= f + 1e-4 * t * slope;
            let roundoff = (fc - f).abs() <= 1e-12 * f.abs().max(1.0) && gc.amax() < gmax;
            if armijo || roundoff {
                return Some((cand, fc, gc));
            }
        }
        t *= 0.5;
    }
    None
}

fn bfgs(obj: &Objective<'_>, phi0: DVector<f64>, h0: DMatrix<f64>, opts: &GlmmOptions) -> Optimum {
    let n = phi0.len();
    let (mut f, mut g) = obj.eval(&phi0);
    let mut phi = phi0;
    let mut hinv = h0.clone();
    let mut iterations = 0;
    let mut fresh = true;
    while iterations < opts.max_iter && g.amax() >= opts.grad_tol {
        let mut dir = -(&hinv * &g);
        if g.dot(&dir) >= 0.0 {
            hinv = h0.clone();
            fresh = true;
            dir = -(&hinv * &g);
        }
        let big = dir.amax();
        if big > 5.0 {
            dir *= 5.0 / big;
        }
        iterations += 1;
        let Some((new_phi, new_f, new_g)) = line_search(obj, &phi, f, &g, &dir) else {
            if fresh {
                break;
            }
            hinv = h0.clone();
            fresh = true;
            continue;
        };
        let s = &new_phi - &phi;
        let y = &new_g - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - (&s * y.transpose()) * rho;
            let right = &eye - (&y * s.transpose()) * rho;
            hinv = &left * &hinv * &right + (&s * s.transpose()) * rho;
            fresh = false;
        }
        phi = new_phi;
        f = new_f;
        g = new_g;
    }
    Optimum { phi, f, g, iterations }
}

/// Newton steps on a finite-difference Hessian of the analytic gradient.
fn polish(obj: &Objective<'_>, mut opt: Optimum, opts: &GlmmOptions) -> Optimum {
    let n = opt.phi.len();
    for _ in 0..20 {
        if opt.g.amax() < opts.grad_tol {
            break;
        }
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let step = 1e-5 * opt.phi[j].abs().max(1.0);
            let mut up = opt.phi.clone();
            up[j] += step;
            let mut down = opt.phi.clone();
            down[j] -= step;
            let col = (obj.eval(&up).1 - obj.eval(&down).1) / (2.0 * step);
            h.set_column(j, &col);
        }
        let h = (&h + h.transpose()) * 0.5;
        let scale = h.diagonal().amax().max(1.0);
        let mut ridge = 0.0;
        let dir = loop {
            let mut hr = h.clone();
            for j in 0..n {
                hr[(j, j)] += ridge;
            }
            if let Some(ch) = hr.cholesky() {
                break Some(-ch.solve(&opt.g));
            }
            ridge = if ridge == 0.0 { 1e-8 * scale } else { ridge * 10.0 };
            if ridge > 1e8 * scale {
                break None;
            }
        };
        let Some(dir) = dir else { break };
        let Some((phi, f, g)) = line_search(obj, &opt.phi, opt.f, &opt.g, &dir) else { break };
        opt = Optimum { phi, f, g, iterations: opt.iterations + 1 };
    }
    opt
}

/// Laplace maximum likelihood. Starts from the fixed-effects logistic fit
/// with every standard deviation at `init_sd`.
pub fn fit_glmm_with(design: &DesignMatrix, formula: &ModelFormula, opts: &GlmmOptions) -> Result<GlmmFit, FitError> {
    formula.validate()?;
    if design.cols() != formula.fixed.len() + 1 {
        return Err(FitError::Formula(format!(
            "design has {} columns but the formula needs {}",
            design.cols(),
            formula.fixed.len() + 1
        )));
    }
    let pinned = opts.variance == VarianceMode::PinnedZero;
    if !pinned {
        for comp in &formula.random {
            let found = match comp.grouping {
                Grouping::Conversation => design.conv_labels.len(),
                Grouping::ConversationSpeaker => design.speaker_labels.len(),
            };
            if found < 2 {
                return Err(FitError::TooFewGroups { grouping: comp.grouping.name().to_string(), found });
            }
        }
    }
    let start = fit_logistic_with(design, &LogisticOptions::default())?;
    let p = design.cols();
    let k = formula.random.len();
    let model = LaplaceModel { inner_tol: opts.inner_tol, ..LaplaceModel::new(design, &formula.random) };
    let obj = Objective { model: &model, p, k, pinned, evals: std::cell::Cell::new(0) };

    let n = if pinned { p } else { p + k };
    let mut phi0 = DVector::zeros(n);
    phi0.rows_mut(0, p).copy_from(&start.beta);
    let mut h0 = DMatrix::zeros(n, n);
    h0.view_mut((0, 0), (p, p)).copy_from(&start.vcov);
    if !pinned {
        for c in 0..k {
            phi0[p + c] = opts.init_sd.ln();
            h0[(p + c, p + c)] = 0.5;
        }
    }
    let mut opt = bfgs(&obj, phi0, h0, opts);
    if opt.g.amax() >= opts.grad_tol {
        opt = polish(&obj, opt, opts);
    }

    let beta = opt.phi.rows(0, p).into_owned();
    let sd = obj.sd(&opt.phi);
    let info = model.fixed_information(&beta, &sd);
    let vcov = cholesky(info)?.inverse();
    let terms = design
        .names
        .iter()
        .zip(&design.labels)
        .enumerate()
        .map(|(j, (name, label))| TermEstimate::new(name, label, beta[j], vcov[(j, j)].max(0.0).sqrt()))
        .collect();
    let variance_components: Vec<VarianceComponent> = formula
        .random
        .iter()
        .enumerate()
        .map(|(c, comp)| VarianceComponent {
            group: comp.grouping.name().to_string(),
            kind: comp.kind().to_string(),
            sd: sd[c],
            boundary: !pinned && sd[c] < opts.boundary_sd,
        })
        .collect();
    let gmax = opt.g.amax();
    let result = FitResult {
        boundary: variance_components.iter().any(|v| v.boundary),
        terms,
        variance_components,
        loglik: -opt.f,
        converged: gmax < opts.grad_tol,
        iterations: opt.iterations,
        gradient_max_norm: Some(gmax),
        method: "laplace".into(),
        selection_trace: None,
    };
    Ok(GlmmFit { result, beta, sd, vcov })
}
