//! Logistic regression with and without random effects.
//!
//! * [`fit_logistic`]: fixed-effects maximum likelihood by IRLS.
//! * [`fit_glmm`]: Laplace-approximated marginal likelihood with nested random
//!   intercepts (conversation, conversation × speaker) and an uncorrelated
//!   random slope per conversation, maximized by BFGS over fixed effects and
//!   log standard deviations.
//! * [`backward_select`]: drops non-significant interactions one at a time.
//!
//! Inference is Wald-based with a standard normal reference.

mod design;
mod laplace;
mod logistic;
mod report;
mod select;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use design::{build_design, DesignMatrix};
pub use laplace::{fit_glmm, fit_glmm_with, GlmmFit, GlmmOptions, LaplaceEval, LaplaceModel, VarianceMode};
pub use logistic::{fit_logistic, fit_logistic_with, log_likelihood, LogisticFit, LogisticOptions};
pub use report::{normal_two_sided_p, wald_report, FitReport, FitResult, ReportComponent, ReportTerm, TermEstimate, VarianceComponent};
pub use select::{backward_select, Selection, SelectionStep};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("design has no rows")]
    NoRows,
    #[error("unknown column {0:?}")]
    MissingColumn(String),
    #[error("formula: {0}")]
    Formula(String),
    #[error("non-finite value in column {column:?} at row {row}")]
    NonFinite { row: usize, column: String },
    #[error("response at row {row} is not 0/1")]
    NotBinary { row: usize },
    #[error("complete separation: fitted probabilities are numerically 0 or 1")]
    Separation,
    #[error("information matrix is singular")]
    Singular,
    #[error("grouping {grouping:?} needs at least 2 groups, found {found}")]
    TooFewGroups { grouping: String, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Predictor {
    LnFreq,
    SameConv,
    LnSize,
}

impl Predictor {
    pub const ALL: [Predictor; 3] = [Predictor::LnFreq, Predictor::SameConv, Predictor::LnSize];

    pub fn column(self) -> &'static str {
        match self {
            Predictor::LnFreq => "ln_freq",
            Predictor::SameConv => "same_conv",
            Predictor::LnSize => "ln_size",
        }
    }

    /// Label used in regression tables.
    pub fn label(self) -> &'static str {
        match self {
            Predictor::LnFreq => "ln(Freq)",
            Predictor::SameConv => "SameConv",
            Predictor::LnSize => "ln(Size)",
        }
    }
}

impl FromStr for Predictor {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ln_freq" | "ln_freq_c" => Ok(Predictor::LnFreq),
            "same_conv" => Ok(Predictor::SameConv),
            "ln_size" | "ln_size_c" => Ok(Predictor::LnSize),
            other => Err(FitError::MissingColumn(other.to_string())),
        }
    }
}

/// A main effect (one factor) or a pairwise interaction (two factors).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedTerm(pub Vec<Predictor>);

impl FixedTerm {
    pub fn main(p: Predictor) -> Self {
        FixedTerm(vec![p])
    }

    pub fn interaction(a: Predictor, b: Predictor) -> Self {
        FixedTerm(vec![a, b])
    }

    pub fn is_interaction(&self) -> bool {
        self.0.len() > 1
    }

    pub fn name(&self) -> String {
        self.0.iter().map(|p| p.column()).collect::<Vec<_>>().join(":")
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|p| p.label()).collect::<Vec<_>>().join(":")
    }

    fn same_factors(&self, other: &FixedTerm) -> bool {
        let mut a = self.0.clone();
        let mut b = other.0.clone();
        a.sort();
        b.sort();
        a == b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Grouping {
    Conversation,
    ConversationSpeaker,
}

impl Grouping {
    pub fn name(self) -> &'static str {
        match self {
            Grouping::Conversation => "conv_id",
            Grouping::ConversationSpeaker => "conv_id:speaker_id",
        }
    }
}

impl FromStr for Grouping {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<_> = s.split(':').map(str::trim).collect();
        match parts.as_slice() {
            ["conv_id"] => Ok(Grouping::Conversation),
            ["conv_id", "speaker_id"] => Ok(Grouping::ConversationSpeaker),
            _ => Err(FitError::Formula(format!(
                "unsupported grouping {s:?}: use conv_id or conv_id:speaker_id"
            ))),
        }
    }
}

/// One variance component: a random intercept (`covariate = None`) or an
/// uncorrelated random slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomComponent {
    pub grouping: Grouping,
    pub covariate: Option<Predictor>,
}

impl RandomComponent {
    pub fn kind(&self) -> &'static str {
        self.covariate.map_or("intercept", Predictor::column)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFormula {
    pub response: String,
    pub fixed: Vec<FixedTerm>,
    pub random: Vec<RandomComponent>,
}

impl ModelFormula {
    /// All main effects, all pairwise interactions, random intercepts for
    /// conversations and speakers within conversations, and an uncorrelated
    /// ln_freq slope per conversation.
    pub fn full() -> Self {
        use Predictor::*;
        ModelFormula {
            response: "prime".into(),
            fixed: vec![
                FixedTerm::main(LnFreq),
                FixedTerm::main(SameConv),
                FixedTerm::main(LnSize),
                FixedTerm::interaction(LnFreq, SameConv),
                FixedTerm::interaction(LnFreq, LnSize),
                FixedTerm::interaction(SameConv, LnSize),
            ],
            random: vec![
                RandomComponent { grouping: Grouping::Conversation, covariate: None },
                RandomComponent { grouping: Grouping::Conversation, covariate: Some(LnFreq) },
                RandomComponent { grouping: Grouping::ConversationSpeaker, covariate: None },
            ],
        }
    }

    pub fn fixed_only(&self) -> Self {
        ModelFormula { random: Vec::new(), ..self.clone() }
    }

    pub fn without_term(&self, name: &str) -> Self {
        let mut f = self.clone();
        f.fixed.retain(|t| t.name() != name);
        f
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.response != "prime" {
            return Err(FitError::MissingColumn(self.response.clone()));
        }
        for (i, t) in self.fixed.iter().enumerate() {
            if t.0.is_empty() || t.0.len() > 2 {
                return Err(FitError::Formula(format!("term {:?} must have one or two factors", t.name())));
            }
            if t.is_interaction() {
                if t.0[0] == t.0[1] {
                    return Err(FitError::Formula(format!("term {:?} repeats a factor", t.name())));
                }
                for p in &t.0 {
                    if !self.fixed.contains(&FixedTerm::main(*p)) {
                        return Err(FitError::Formula(format!(
                            "interaction {:?} needs main effect {:?}",
                            t.name(),
                            p.column()
                        )));
                    }
                }
            }
            if self.fixed[..i].iter().any(|o| o.same_factors(t)) {
                return Err(FitError::Formula(format!("duplicate term {:?}", t.name())));
            }
        }
        for (i, c) in self.random.iter().enumerate() {
            if self.random[..i].contains(c) {
                return Err(FitError::Formula(format!("duplicate random component {}|{}", c.kind(), c.grouping.name())));
            }
        }
        Ok(())
    }
}

impl Default for ModelFormula {
    fn default() -> Self {
        Self::full()
    }
}

impl fmt::Display for ModelFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.fixed.iter().map(FixedTerm::name).collect();
        if parts.is_empty() {
            parts.push("1".into());
        }
        for g in [Grouping::Conversation, Grouping::ConversationSpeaker] {
            let comps: Vec<_> = self.random.iter().filter(|c| c.grouping == g).collect();
            if comps.is_empty() {
                continue;
            }
            let has_intercept = comps.iter().any(|c| c.covariate.is_none());
            let mut lhs: Vec<&str> = vec![if has_intercept { "1" } else { "0" }];
            lhs.extend(comps.iter().filter_map(|c| c.covariate.map(Predictor::column)));
            let bar = if lhs.len() > 2 || (has_intercept && lhs.len() > 1) { "||" } else { "|" };
            parts.push(format!("({} {} {})", lhs.join(" + "), bar, g.name()));
        }
        write!(f, "{} ~ {}", self.response, parts.join(" + "))
    }
}

fn split_top_level(s: &str) -> Result<Vec<String>, FitError> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '+' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(FitError::Formula("unbalanced parentheses".into()));
        }
        cur.push(c);
    }
    if depth != 0 {
        return Err(FitError::Formula("unbalanced parentheses".into()));
    }
    out.push(cur);
    Ok(out.into_iter().map(|t| t.trim().to_string()).collect())
}

/// Parses lme4-style formulas such as
/// `prime ~ ln_freq + same_conv + ln_freq:same_conv + (1 + ln_freq || conv_id) + (1 | conv_id:speaker_id)`.
/// Correlated random effects are not supported, so a random term with more
/// than one component must use `||`.
impl FromStr for ModelFormula {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lhs, rhs) = s.split_once('~').ok_or_else(|| FitError::Formula("missing '~'".into()))?;
        let mut formula = ModelFormula { response: lhs.trim().to_string(), fixed: Vec::new(), random: Vec::new() };
        for term in split_top_level(rhs)? {
            if term.is_empty() {
                return Err(FitError::Formula("empty term".into()));
            }
            if let Some(inner) = term.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
                let (effects, uncorrelated, grouping) = if let Some((e, g)) = inner.split_once("||") {
                    (e, true, g)
                } else if let Some((e, g)) = inner.split_once('|') {
                    (e, false, g)
                } else {
                    return Err(FitError::Formula(format!("random term {term:?} lacks '|'")));
                };
                let grouping: Grouping = grouping.parse()?;
                let mut comps = Vec::new();
                for e in effects.split('+').map(str::trim) {
                    match e {
                        "1" => comps.push(RandomComponent { grouping, covariate: None }),
                        "0" => {}
                        other => comps.push(RandomComponent { grouping, covariate: Some(other.parse()?) }),
                    }
                }
                if comps.len() > 1 && !uncorrelated {
                    return Err(FitError::Formula(format!(
                        "correlated random effects are not supported; write {term:?} with '||'"
                    )));
                }
                formula.random.extend(comps);
            } else if term == "1" {
                continue;
            } else {
                let factors =
                    term.split(':').map(|p| p.parse::<Predictor>()).collect::<Result<Vec<_>, _>>()?;
                formula.fixed.push(FixedTerm(factors));
            }
        }
        formula.validate()?;
        Ok(formula)
    }
}
