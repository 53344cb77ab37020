use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::SelectionStep;

/// Two-sided standard normal tail probability P(|Z| > |z|).
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub name: String,
    pub label: String,
    pub beta: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
}

impl TermEstimate {
    pub fn new(name: &str, label: &str, beta: f64, se: f64) -> Self {
        let z = if se > 0.0 { beta / se } else { f64::NAN };
        Self { name: name.to_string(), label: label.to_string(), beta, se, z, p: normal_two_sided_p(z) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponent {
    pub group: String,
    pub kind: String,
    pub sd: f64,
    /// Estimate collapsed towards zero.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub terms: Vec<TermEstimate>,
    pub variance_components: Vec<VarianceComponent>,
    /// Marginal log-likelihood (Laplace-approximated for mixed models).
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gradient_max_norm: Option<f64>,
    pub boundary: bool,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selection_trace: Option<Vec<SelectionStep>>,
}

impl FitResult {
    pub fn term(&self, name: &str) -> Option<&TermEstimate> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// JSON fit report with the field layout consumed by downstream tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub terms: Vec<ReportTerm>,
    pub variance_components: Vec<ReportComponent>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selection_trace: Option<Vec<SelectionStep>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTerm {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportComponent {
    pub group: String,
    pub kind: String,
    pub sd: f64,
}

impl From<&FitResult> for FitReport {
    fn from(fit: &FitResult) -> Self {
        FitReport {
            terms: fit
                .terms
                .iter()
                .map(|t| ReportTerm { name: t.name.clone(), beta: t.beta, se: t.se, z: t.z, p: t.p })
                .collect(),
            variance_components: fit
                .variance_components
                .iter()
                .map(|v| ReportComponent { group: v.group.clone(), kind: v.kind.clone(), sd: v.sd })
                .collect(),
            loglik: fit.loglik,
            converged: fit.converged,
            iterations: fit.iterations,
            selection_trace: fit.selection_trace.clone(),
        }
    }
}

/// Renders the fit as (JSON report, aligned text table). Rows follow design
/// order; columns are β, SE, z, p>|z|.
pub fn wald_report(fit: &FitResult) -> (FitReport, String) {
    let report = FitReport::from(fit);
    let width = fit.terms.iter().map(|t| t.label.chars().count()).max().unwrap_or(0).max(9);
    let mut text = format!("{:<width$} {:>9} {:>8} {:>9} {:>7}\n", "", "β", "SE", "z", "p>|z|");
    for t in &fit.terms {
        text.push_str(&format!("{:<width$} {:>9.3} {:>8.3} {:>9.1} {:>7.3}\n", t.label, t.beta, t.se, t.z, t.p));
    }
    if !fit.variance_components.is_empty() {
        text.push_str("\nRandom effects (sd)\n");
        for v in &fit.variance_components {
            let flag = if v.boundary { "  (boundary)" } else { "" };
            text.push_str(&format!("{:<24} {:<10} {:>9.4}{flag}\n", v.group, v.kind, v.sd));
        }
    }
    text.push_str(&format!(
        "\nlog-likelihood {:.4}  converged {}  iterations {}\n",
        fit.loglik, fit.converged, fit.iterations
    ));
    (report, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// P(|Z| > z) by composite Simpson integration of the normal density on
    /// [0, z]; independent of any erf implementation.
    fn simpson_tail(z: f64) -> f64 {
        let n = 20_000;
        let h = z / n as f64;
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = phi(0.0) + phi(z);
        for i in 1..n {
            s += phi(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        1.0 - 2.0 * s * h / 3.0
    }

    #[test]
    fn wald_z_and_p() {
        let t = TermEstimate::new("x", "x", 1.0, 0.5);
        assert_eq!(t.z, 2.0);
        assert!((t.p - simpson_tail(2.0)).abs() < 1e-10);
        assert!((t.p - 0.0455).abs() < 5e-5);
        let zero = TermEstimate::new("x", "x", 0.0, 0.3);
        assert_eq!((zero.z, zero.p), (0.0, 1.0));
        for z in [0.3, 1.0, 1.96, 3.5] {
            assert!((normal_two_sided_p(z) - simpson_tail(z)).abs() < 1e-10);
        }
    }

    #[test]
    fn text_table_layout() {
        let fit = FitResult {
            terms: vec![TermEstimate::new("(Intercept)", "Intercept", -2.927, 0.018), TermEstimate::new("same_conv", "SameConv", 0.228, 0.023)],
            variance_components: vec![],
            loglik: -1.0,
            converged: true,
            iterations: 3,
            gradient_max_norm: None,
            boundary: false,
            method: "irls".into(),
            selection_trace: None,
        };
        let (json, text) = wald_report(&fit);
        let header = text.lines().next().unwrap();
        let cols: Vec<_> = header.split_whitespace().collect();
        assert_eq!(cols, ["β", "SE", "z", "p>|z|"]);
        assert!(text.lines().nth(1).unwrap().starts_with("Intercept"));
        assert!(text.lines().nth(2).unwrap().contains("0.228"));
        let v = serde_json::to_value(&json).unwrap();
        assert_eq!(v["terms"][1]["name"], "same_conv");
        assert!(v.get("selection_trace").is_none());
    }
}
