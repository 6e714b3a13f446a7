//! Scenario documents: parsing, generator expansion and domain validation.

use std::f64::consts::PI;

use aobkit_core::carleson::CarlesonMeasure;
use aobkit_core::schur::Grid;
use aobkit_core::SchurFunction;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub symbol: Option<SchurFunction>,
    pub frequencies: FrequencySpec,
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencySpec {
    Explicit(Vec<[f64; 2]>),
    Clark(ClarkSpec),
    Geometric(GeometricSpec),
    Arithmetic(ArithmeticSpec),
}

/// t_n = (α + 2πn)/a for n = 0..count.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ClarkSpec {
    pub a: f64,
    #[serde(default)]
    pub alpha: f64,
    pub count: usize,
}

/// λ_n = rⁿ + i·imag(n) for n = 1..=count.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricSpec {
    pub r: f64,
    pub count: usize,
    #[serde(default)]
    pub imag_rule: ImagRule,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ImagRule {
    /// c/n
    Reciprocal(f64),
    Constant(f64),
    /// c·rⁿ, the same growth as the real part
    Proportional(f64),
}

impl Default for ImagRule {
    fn default() -> Self {
        ImagRule::Reciprocal(1.0)
    }
}

/// λ_n = start + n·step for n = 0..count.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ArithmeticSpec {
    pub start: [f64; 2],
    pub step: [f64; 2],
    pub count: usize,
}

impl FrequencySpec {
    pub fn expand(&self) -> Vec<Complex64> {
        match self {
            FrequencySpec::Explicit(v) => v.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            FrequencySpec::Clark(c) => {
                (0..c.count).map(|n| Complex64::new((c.alpha + 2.0 * PI * n as f64) / c.a, 0.0)).collect()
            }
            FrequencySpec::Geometric(g) => (1..=g.count)
                .map(|n| {
                    let re = g.r.powi(n as i32);
                    let im = match g.imag_rule {
                        ImagRule::Reciprocal(c) => c / n as f64,
                        ImagRule::Constant(c) => c,
                        ImagRule::Proportional(c) => c * re,
                    };
                    Complex64::new(re, im)
                })
                .collect(),
            FrequencySpec::Arithmetic(a) => (0..a.count)
                .map(|n| Complex64::new(a.start[0] + n as f64 * a.step[0], a.start[1] + n as f64 * a.step[1]))
                .collect(),
        }
    }

    /// The symbol implied by the generator when the scenario names none.
    pub fn default_symbol(&self) -> Option<SchurFunction> {
        match self {
            FrequencySpec::Clark(c) => SchurFunction::exp_inner(c.a).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum Analysis {
    #[serde(rename = "gram+tails")]
    GramTails {
        #[serde(default)]
        n_max: Option<usize>,
    },
    #[serde(rename = "prop41")]
    Prop41 { a: f64 },
    #[serde(rename = "stability")]
    Stability(StabilitySpec),
    #[serde(rename = "carleson")]
    Carleson {
        #[serde(default)]
        measure: Option<CarlesonMeasure>,
    },
    #[serde(rename = "projection")]
    Projection(ProjectionSpec),
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::GramTails { .. } => "gram+tails",
            Analysis::Prop41 { .. } => "prop41",
            Analysis::Stability(_) => "stability",
            Analysis::Carleson { .. } => "carleson",
            Analysis::Projection(_) => "projection",
        }
    }

    /// File stem used for this analysis' reports.
    pub fn stem(&self) -> &'static str {
        match self {
            Analysis::GramTails { .. } => "tails",
            other => other.name(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    pub eps: EpsSchedule,
    pub mu: PerturbationSpec,
    #[serde(default)]
    pub cls: Option<ClsSpec>,
}

fn default_p() -> f64 {
    1.5
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsSchedule {
    List(Vec<f64>),
    Constant(f64),
    /// scale/n^exponent
    Power { scale: f64, exponent: f64 },
}

impl EpsSchedule {
    pub fn expand(&self, len: usize) -> Vec<f64> {
        match self {
            EpsSchedule::List(v) => v.clone(),
            EpsSchedule::Constant(c) => vec![*c; len],
            EpsSchedule::Power { scale, exponent } => (1..=len).map(|n| scale / (n as f64).powf(*exponent)).collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationSpec {
    List(Vec<[f64; 2]>),
    /// μ_n = λ_n + offset/n^exponent
    Shift { offset: [f64; 2], exponent: f64 },
}

impl PerturbationSpec {
    pub fn expand(&self, lambdas: &[Complex64]) -> Vec<Complex64> {
        match self {
            PerturbationSpec::List(v) => v.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            PerturbationSpec::Shift { offset, exponent } => lambdas
                .iter()
                .enumerate()
                .map(|(i, l)| l + Complex64::new(offset[0], offset[1]) / ((i + 1) as f64).powf(*exponent))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ClsSpec {
    pub delta: f64,
    pub grid: Grid,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSpec {
    pub b2: SchurFunction,
    pub b: SchurFunction,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    aobkit_core::projection::DEFAULT_TAU
}

/// Parses a JSON document, reporting failures with the path of the offending field.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        let message = e.inner().to_string();
        if let Some(field) = message.strip_prefix("missing field `").and_then(|s| s.split('`').next()) {
            path = if path == "." || path.is_empty() { field.to_string() } else { format!("{path}.{field}") };
        }
        let path = if origin.is_empty() { path } else if path == "." { origin.to_string() } else { format!("{origin}:{path}") };
        CliError::Config { path, message }
    })
}

fn config(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), message: message.into() }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario = parse_json(text, "")?;
        s.validate()?;
        Ok(s)
    }

    pub fn symbol(&self) -> Option<SchurFunction> {
        self.symbol.clone().or_else(|| self.frequencies.default_symbol())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match &self.frequencies {
            FrequencySpec::Clark(c) if !(c.a > 0.0 && c.a.is_finite()) => {
                return Err(config("frequencies.clark.a", format!("a = {} must be positive", c.a)))
            }
            FrequencySpec::Geometric(g) if !(g.r > 0.0) => {
                return Err(config("frequencies.geometric.r", format!("r = {} must be positive", g.r)))
            }
            _ => {}
        }
        let freqs = self.frequencies.expand();
        if freqs.is_empty() {
            return Err(config("frequencies", "the frequency list is empty"));
        }
        if let Some(z) = freqs.iter().find(|z| !(z.re.is_finite() && z.im.is_finite()) || z.im < 0.0) {
            return Err(config("frequencies", format!("frequency {}{:+}i is outside the closed upper half-plane", z.re, z.im)));
        }
        if self.analyses.is_empty() {
            return Err(config("analyses", "no analyses requested"));
        }
        for (i, a) in self.analyses.iter().enumerate() {
            let at = |field: &str| format!("analyses[{i}].{field}");
            match a {
                Analysis::GramTails { n_max } => {
                    self.require_symbol(i)?;
                    if let Some(n) = n_max {
                        if *n == 0 || *n > freqs.len() {
                            return Err(config(at("n_max"), format!("n_max = {n} must lie in 1..={}", freqs.len())));
                        }
                    }
                }
                Analysis::Prop41 { a } => {
                    if !(*a > 0.0 && a.is_finite()) {
                        return Err(config(at("a"), format!("a = {a} must be positive")));
                    }
                }
                Analysis::Stability(s) => {
                    self.require_symbol(i)?;
                    if !(s.p > 1.0 && s.p < 2.0) {
                        return Err(config(at("p"), format!("p = {} must lie in (1, 2)", s.p)));
                    }
                    if let Some(g) = s.gamma {
                        if !(g > 1.0 / 3.0) {
                            return Err(config(at("gamma"), format!("gamma = {g} must exceed 1/3")));
                        }
                    }
                    if let Some(cls) = &s.cls {
                        if !(cls.delta > 0.0 && cls.delta < 1.0) {
                            return Err(config(at("cls.delta"), format!("delta = {} must lie in (0, 1)", cls.delta)));
                        }
                    }
                    let eps = s.eps.expand(freqs.len());
                    if eps.len() != freqs.len() {
                        return Err(config(at("eps"), format!("{} tolerances for {} frequencies", eps.len(), freqs.len())));
                    }
                    if eps.iter().any(|e| !(*e >= 0.0)) {
                        return Err(config(at("eps"), "tolerances must be nonnegative"));
                    }
                    if s.mu.expand(&freqs).len() != freqs.len() {
                        return Err(config(at("mu"), "perturbed list length differs from the frequency list"));
                    }
                }
                Analysis::Carleson { .. } => {}
                Analysis::Projection(p) => {
                    if !(p.tau > 0.0 && p.tau < 1.0) {
                        return Err(config(at("tau"), format!("tau = {} must lie in (0, 1)", p.tau)));
                    }
                    if freqs.iter().any(|z| z.im <= 0.0) {
                        return Err(config("frequencies", "projection needs interior frequencies"));
                    }
                }
            }
        }
        Ok(())
    }

    fn require_symbol(&self, i: usize) -> Result<(), CliError> {
        if self.symbol().is_none() {
            return Err(config("symbol", format!("analysis {i} needs a symbol and the frequency generator implies none")));
        }
        Ok(())
    }
}
