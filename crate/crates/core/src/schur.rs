//! Schur-class functions on the upper half-plane in factored form.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, pairwise_sum, QuadOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative tolerance used when a boundary value must be unimodular.
pub const UNIMODULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Blaschke {
    zeros: Vec<Complex64>,
    phases: Vec<f64>,
    accumulation: Vec<f64>,
}

impl Blaschke {
    pub fn new(zeros: Vec<Complex64>, phases: Vec<f64>, accumulation: Vec<f64>) -> Result<Self> {
        for z in &zeros {
            if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::InvalidSymbol(format!(
                    "Blaschke zero {}{:+}i must lie in the open upper half-plane",
                    z.re, z.im
                )));
            }
        }
        let phases = if phases.is_empty() { vec![0.0; zeros.len()] } else { phases };
        if phases.len() != zeros.len() {
            return Err(Error::InvalidSymbol(format!(
                "{} phases given for {} zeros",
                phases.len(),
                zeros.len()
            )));
        }
        if phases.iter().chain(&accumulation).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSymbol("phases and accumulation points must be finite".into()));
        }
        Ok(Self { zeros, phases, accumulation })
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn accumulation(&self) -> &[f64] {
        &self.accumulation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Singular {
    a: f64,
    atoms: Vec<(f64, f64)>,
}

impl Singular {
    pub fn new(a: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidSymbol(format!("mass at infinity a = {a} must be finite and >= 0")));
        }
        for &(x, m) in &atoms {
            if !x.is_finite() || !(m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidSymbol(format!("atom ({x}, {m}) needs finite location and positive mass")));
            }
        }
        Ok(Self { a, atoms })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
}

/// Piecewise-linear log-modulus profile, zero outside `[knots[0], knots[K]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outer {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl Outer {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::InvalidSymbol(
                "outer profile needs at least two knots and one value per knot".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidSymbol("outer knots must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v <= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidSymbol("outer profile values must be finite and <= 0".into()));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .collect()
    }

    /// log|b(t)| on the real line.
    pub fn profile(&self, t: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        if t < k[0] || t > k[last] {
            return 0.0;
        }
        let j = match k.partition_point(|&x| x <= t) {
            0 => 0,
            p => (p - 1).min(last - 1),
        };
        let s = (t - k[j]) / (k[j + 1] - k[j]);
        self.values[j] + s * (self.values[j + 1] - self.values[j])
    }

    fn is_trivial(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Logarithm of the outer function, exact for piecewise-linear profiles.
    fn log_eval(&self, z: Complex64) -> Result<Complex64> {
        let k = &self.knots;
        let v = &self.values;
        let last = k.len() - 1;
        let beta = self.slopes();
        let on_line = z.im == 0.0;
        let z = if on_line { Complex64::new(z.re, 0.0) } else { z };
        if on_line {
            if (z.re == k[0] && v[0] != 0.0) || (z.re == k[last] && v[last] != 0.0) {
                return Err(Error::BoundaryEvaluationAtSingularity(z.re));
            }
        }
        let mut terms: Vec<Complex64> = Vec::with_capacity(2 * k.len());
        for (idx, &tk) in k.iter().enumerate() {
            let w = z - tk;
            let coeff = if idx == 0 {
                v[0] + beta[0] * w
            } else if idx == last {
                -(v[last] + beta[last - 1] * w)
            } else {
                (beta[idx] - beta[idx - 1]) * w
            };
            if coeff == Complex64::new(0.0, 0.0) || w == Complex64::new(0.0, 0.0) {
                continue;
            }
            terms.push(coeff * w.ln());
        }
        for j in 0..last {
            let alpha = v[j] - beta[j] * k[j];
            let r = 0.5 * alpha * ((k[j + 1] * k[j + 1] + 1.0) / (k[j] * k[j] + 1.0)).ln()
                - beta[j] * (k[j + 1].atan() - k[j].atan());
            terms.push(Complex64::new(r, 0.0));
        }
        let re: Vec<f64> = terms.iter().map(|c| c.re).collect();
        let im: Vec<f64> = terms.iter().map(|c| c.im).collect();
        let integral = Complex64::new(pairwise_sum(&re), pairwise_sum(&im));
        Ok(I / PI * integral)
    }
}

/// A function in the closed unit ball of H^∞ on the upper half-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchurSpec", into = "SchurSpec")]
pub enum SchurFunction {
    Blaschke(Blaschke),
    Singular(Singular),
    Outer(Outer),
    Constant(Complex64),
    Product(Vec<SchurFunction>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

/// Wire form of [`SchurFunction`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SchurSpec {
    Blaschke {
        zeros: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        phases: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        accumulation: Vec<f64>,
    },
    Singular {
        a: f64,
        #[serde(default)]
        atoms: Vec<[f64; 2]>,
    },
    Outer {
        profile: ProfileSpec,
    },
    Constant {
        c: [f64; 2],
    },
    Product {
        factors: Vec<SchurSpec>,
    },
}

impl TryFrom<SchurSpec> for SchurFunction {
    type Error = Error;

    fn try_from(spec: SchurSpec) -> Result<Self> {
        Ok(match spec {
            SchurSpec::Blaschke { zeros, phases, accumulation } => SchurFunction::Blaschke(Blaschke::new(
                zeros.iter().map(|z| Complex64::new(z[0], z[1])).collect(),
                phases,
                accumulation,
            )?),
            SchurSpec::Singular { a, atoms } => {
                SchurFunction::Singular(Singular::new(a, atoms.iter().map(|p| (p[0], p[1])).collect())?)
            }
            SchurSpec::Outer { profile } => SchurFunction::Outer(Outer::new(profile.knots, profile.values)?),
            SchurSpec::Constant { c } => SchurFunction::constant(Complex64::new(c[0], c[1]))?,
            SchurSpec::Product { factors } => SchurFunction::Product(
                factors.into_iter().map(SchurFunction::try_from).collect::<Result<Vec<_>>>()?,
            ),
        })
    }
}

impl From<SchurFunction> for SchurSpec {
    fn from(b: SchurFunction) -> Self {
        match b {
            SchurFunction::Blaschke(bl) => SchurSpec::Blaschke {
                zeros: bl.zeros.iter().map(|z| [z.re, z.im]).collect(),
                phases: if bl.phases.iter().all(|&p| p == 0.0) { Vec::new() } else { bl.phases },
                accumulation: bl.accumulation,
            },
            SchurFunction::Singular(s) => SchurSpec::Singular {
                a: s.a,
                atoms: s.atoms.iter().map(|&(x, m)| [x, m]).collect(),
            },
            SchurFunction::Outer(o) => SchurSpec::Outer { profile: ProfileSpec { knots: o.knots, values: o.values } },
            SchurFunction::Constant(c) => SchurSpec::Constant { c: [c.re, c.im] },
            SchurFunction::Product(f) => SchurSpec::Product { factors: f.into_iter().map(SchurSpec::from).collect() },
        }
    }
}

/// Real trace of the spectrum of an inner function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerSpectrum {
    pub zero_closure: Vec<f64>,
    pub singular_support: Vec<f64>,
    pub includes_infinity: bool,
}

impl InnerSpectrum {
    pub fn real_points(&self) -> impl Iterator<Item = f64> + '_ {
        self.zero_closure.iter().chain(&self.singular_support).copied()
    }

    /// Distance from `x` to the real trace; `+∞` when the trace is empty.
    pub fn distance(&self, x: f64) -> f64 {
        self.real_points().map(|p| (x - p).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// S_ℓ(x0) values at one boundary point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryAdmissibility {
    pub x0: f64,
    pub s_values: Vec<(u32, f64)>,
    pub in_e2: bool,
    pub in_e4: bool,
}

/// Rectangular sampling grid in the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublevelVerdict {
    pub connected: bool,
    pub components: usize,
    pub cells_below: usize,
    pub step: f64,
}

impl SchurFunction {
    /// `e^{iaz}`.
    pub fn exp_inner(a: f64) -> Result<Self> {
        Ok(SchurFunction::Singular(Singular::new(a, Vec::new())?))
    }

    pub fn blaschke(zeros: Vec<Complex64>) -> Result<Self> {
        Ok(SchurFunction::Blaschke(Blaschke::new(zeros, Vec::new(), Vec::new())?))
    }

    pub fn singular(a: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        Ok(SchurFunction::Singular(Singular::new(a, atoms)?))
    }

    pub fn outer(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(SchurFunction::Outer(Outer::new(knots, values)?))
    }

    pub fn constant(c: Complex64) -> Result<Self> {
        if !(c.norm() <= 1.0 + 1e-15) {
            return Err(Error::InvalidSymbol(format!("constant {c} has modulus above 1")));
        }
        Ok(SchurFunction::Constant(c))
    }

    pub fn product(factors: Vec<SchurFunction>) -> Self {
        SchurFunction::Product(factors)
    }

    /// Leaf factors with nested products flattened, in order.
    pub fn leaves(&self) -> Vec<&SchurFunction> {
        let mut out = Vec::new();
        fn walk<'a>(b: &'a SchurFunction, out: &mut Vec<&'a SchurFunction>) {
            match b {
                SchurFunction::Product(f) => f.iter().for_each(|g| walk(g, out)),
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Evaluates `b(z)` for `Im z >= 0`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::OutsideDomain { re: z.re, im: z.im });
        }
        self.eval_unchecked(z)
    }

    fn eval_unchecked(&self, z: Complex64) -> Result<Complex64> {
        match self {
            SchurFunction::Blaschke(b) => {
                if z.im == 0.0 && b.accumulation.iter().any(|&p| p == z.re) {
                    return Err(Error::BoundaryEvaluationAtSingularity(z.re));
                }
                let mut acc = Complex64::new(1.0, 0.0);
                for (zn, &alpha) in b.zeros.iter().zip(&b.phases) {
                    acc *= Complex64::from_polar(1.0, alpha) * (z - zn) / (z - zn.conj());
                }
                Ok(acc)
            }
            SchurFunction::Singular(s) => {
                if z.im == 0.0 && s.atoms.iter().any(|&(x, _)| x == z.re) {
                    return Err(Error::BoundaryEvaluationAtSingularity(z.re));
                }
                let mut re = Vec::with_capacity(s.atoms.len());
                let mut im = Vec::with_capacity(s.atoms.len());
                for &(x, m) in &s.atoms {
                    let t = m * (1.0 / (z - x) + x / (1.0 + x * x));
                    re.push(t.re);
                    im.push(t.im);
                }
                let atoms = Complex64::new(pairwise_sum(&re), pairwise_sum(&im));
                Ok((I * s.a * z - I * atoms).exp())
            }
            SchurFunction::Outer(o) => Ok(o.log_eval(z)?.exp()),
            SchurFunction::Constant(c) => Ok(*c),
            SchurFunction::Product(f) => {
                let mut acc = Complex64::new(1.0, 0.0);
                for g in f {
                    acc *= g.eval_unchecked(z)?;
                }
                Ok(acc)
            }
        }
    }

    /// True when no outer factor is present and every constant is unimodular.
    pub fn is_inner(&self) -> bool {
        self.leaves().iter().all(|f| match f {
            SchurFunction::Outer(o) => o.is_trivial(),
            SchurFunction::Constant(c) => (c.norm() - 1.0).abs() <= 1e-14,
            _ => true,
        })
    }

    /// Inner, with no singular atoms and no accumulating zeros.
    pub fn is_meromorphic_inner(&self) -> bool {
        self.is_inner()
            && self.leaves().iter().all(|f| match f {
                SchurFunction::Singular(s) => s.atoms.is_empty(),
                SchurFunction::Blaschke(b) => b.accumulation.is_empty(),
                _ => true,
            })
    }

    fn require_inner(&self) -> Result<()> {
        if self.is_inner() {
            Ok(())
        } else {
            Err(Error::NotInner)
        }
    }

    /// Total mass at infinity `a` over all singular factors.
    pub fn mass_at_infinity(&self) -> f64 {
        self.leaves()
            .iter()
            .map(|f| match f {
                SchurFunction::Singular(s) => s.a,
                _ => 0.0,
            })
            .sum()
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for f in self.leaves() {
            if let SchurFunction::Blaschke(b) = f {
                out.extend_from_slice(&b.zeros);
            }
        }
        out
    }

    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for f in self.leaves() {
            if let SchurFunction::Singular(s) = f {
                out.extend_from_slice(&s.atoms);
            }
        }
        out
    }

    fn accumulation_points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for f in self.leaves() {
            if let SchurFunction::Blaschke(b) = f {
                out.extend_from_slice(&b.accumulation);
            }
        }
        out
    }

    fn outers(&self) -> Vec<&Outer> {
        self.leaves()
            .into_iter()
            .filter_map(|f| match f {
                SchurFunction::Outer(o) => Some(o),
                _ => None,
            })
            .collect()
    }

    /// Real points where boundary evaluation is undefined or non-smooth.
    pub fn boundary_breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.atoms().iter().map(|a| a.0).collect();
        pts.extend(self.accumulation_points());
        pts.extend(self.zeros().iter().map(|z| z.re));
        for o in self.outers() {
            pts.extend_from_slice(&o.knots);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// log|b(t)| on the real line (sum over outer factors and constants).
    pub fn boundary_log_modulus(&self) -> impl Fn(f64) -> f64 + '_ {
        let outers = self.outers();
        let consts: f64 = self
            .leaves()
            .iter()
            .map(|f| match f {
                SchurFunction::Constant(c) => c.norm().ln(),
                _ => 0.0,
            })
            .sum();
        move |t| consts + outers.iter().map(|o| o.profile(t)).sum::<f64>()
    }

    pub fn spectrum(&self) -> Result<InnerSpectrum> {
        self.require_inner()?;
        let mut zero_closure = self.accumulation_points();
        zero_closure.sort_by(f64::total_cmp);
        zero_closure.dedup();
        let mut singular_support: Vec<f64> = self.atoms().iter().map(|a| a.0).collect();
        singular_support.sort_by(f64::total_cmp);
        singular_support.dedup();
        Ok(InnerSpectrum { zero_closure, singular_support, includes_infinity: self.mass_at_infinity() > 0.0 })
    }

    /// d₀(x) = dist(x, σ(Θ)), with `dist(x, {∞}) = +∞`.
    pub fn spectrum_distance(&self, x: f64) -> Result<f64> {
        Ok(self.spectrum()?.distance(x))
    }

    /// |b'(x)| for a boundary point where |b(x)| = 1, including the outer contribution
    /// `(1/π)∫|log|b(t)||/(x−t)² dt`. `+∞` at atoms and accumulation points.
    pub fn boundary_derivative_modulus(&self, x: f64) -> Result<f64> {
        let mut terms = vec![self.mass_at_infinity()];
        for z in self.zeros() {
            terms.push(2.0 * z.im / (x - z).norm_sqr());
        }
        for (xa, m) in self.atoms() {
            if xa == x {
                return Ok(f64::INFINITY);
            }
            terms.push(m / ((x - xa) * (x - xa)));
        }
        if self.accumulation_points().contains(&x) {
            return Ok(f64::INFINITY);
        }
        for o in self.outers() {
            if o.is_trivial() {
                continue;
            }
            terms.push(self.outer_moment(o, x, 2.0)? / PI);
        }
        Ok(pairwise_sum(&terms))
    }

    /// |Θ'(x)| for inner Θ.
    pub fn angular_derivative(&self, x: f64) -> Result<f64> {
        self.require_inner()?;
        self.boundary_derivative_modulus(x)
    }

    /// ∫ |v(t)| / |x0 − t|^ℓ dt for one outer profile `v`.
    fn outer_moment(&self, o: &Outer, x0: f64, ell: f64) -> Result<f64> {
        let k = &o.knots;
        let last = k.len() - 1;
        if x0 >= k[0] && x0 <= k[last] {
            let beta = o.slopes();
            let v0 = o.profile(x0);
            let at_left_end = x0 == k[0] && o.values[0] != 0.0;
            let at_right_end = x0 == k[last] && o.values[last] != 0.0;
            if v0 != 0.0 || at_left_end || at_right_end {
                return Ok(f64::INFINITY);
            }
            let p = k.partition_point(|&t| t < x0);
            let left_slope = if p == 0 { 0.0 } else { beta[p - 1] };
            let right_slope = if k.get(p) == Some(&x0) {
                beta.get(p).copied().unwrap_or(0.0)
            } else {
                beta.get(p.saturating_sub(1)).copied().unwrap_or(0.0)
            };
            if ell >= 2.0 && (left_slope != 0.0 || right_slope != 0.0) {
                return Ok(f64::INFINITY);
            }
        }
        let mut breaks = k.clone();
        breaks.push(x0);
        quad::integrate(
            |t: f64| {
                let d = (x0 - t).abs();
                if d == 0.0 {
                    0.0
                } else {
                    o.profile(t).abs() / d.powf(ell)
                }
            },
            k[0],
            k[last],
            &breaks,
            QuadOptions { rel_tol: 1e-12, abs_tol: 1e-300, max_nodes: 1 << 20 },
        )
    }

    /// ∫ |log|b(t)|| / |x0 − t|^ℓ dt for real `ℓ`; `+∞` when divergent.
    pub fn log_modulus_moment(&self, x0: f64, ell: f64) -> f64 {
        if self
            .leaves()
            .iter()
            .any(|f| matches!(f, SchurFunction::Constant(c) if c.norm() < 1.0))
        {
            return f64::INFINITY;
        }
        let mut total = 0.0;
        for o in self.outers() {
            match self.outer_moment(o, x0, ell) {
                Ok(v) => total += v,
                Err(_) => return f64::INFINITY,
            }
        }
        total
    }

    /// S_ℓ(x0) = Σ Im z_n/|x0−z_n|^ℓ + Σ m_k/|x0−x_k|^ℓ + ∫|log|b(t)||/|x0−t|^ℓ dt.
    pub fn s_ell(&self, x0: f64, ell: u32) -> f64 {
        let l = ell as f64;
        let mut terms = Vec::new();
        for z in self.zeros() {
            terms.push(z.im / (x0 - z).norm().powf(l));
        }
        let zero_part = pairwise_sum(&terms);
        terms.clear();
        for (xa, m) in self.atoms() {
            if xa == x0 {
                return f64::INFINITY;
            }
            terms.push(m / (x0 - xa).abs().powf(l));
        }
        let atom_part = pairwise_sum(&terms);
        let mut outer_part = 0.0;
        for o in self.outers() {
            match self.outer_moment(o, x0, l) {
                Ok(v) => outer_part += v,
                Err(_) => return f64::INFINITY,
            }
        }
        let c_part = self
            .leaves()
            .iter()
            .map(|f| match f {
                SchurFunction::Constant(c) if c.norm() < 1.0 => f64::INFINITY,
                _ => 0.0,
            })
            .sum::<f64>();
        zero_part + atom_part + outer_part + c_part
    }

    pub fn admissibility(&self, x0: f64) -> BoundaryAdmissibility {
        let s_values: Vec<(u32, f64)> = (1..=4).map(|l| (l, self.s_ell(x0, l))).collect();
        BoundaryAdmissibility {
            x0,
            in_e2: s_values[1].1.is_finite(),
            in_e4: s_values[3].1.is_finite(),
            s_values,
        }
    }

    /// φ(x) − φ(x_ref) = ∫ |Θ'(t)| dt over [x_ref, x].
    pub fn argument_phi(&self, x_ref: f64, x: f64) -> Result<f64> {
        if !self.is_meromorphic_inner() {
            return Err(if self.is_inner() { Error::NotMeromorphicInner } else { Error::NotInner });
        }
        let a = self.mass_at_infinity();
        let zeros = self.zeros();
        let mut breaks: Vec<f64> = Vec::new();
        for z in &zeros {
            breaks.extend([z.re - z.im, z.re, z.re + z.im]);
        }
        let zero_part = quad::integrate(
            |t: f64| {
                let terms: Vec<f64> = zeros.iter().map(|z| 2.0 * z.im / (t - z).norm_sqr()).collect();
                pairwise_sum(&terms)
            },
            x_ref,
            x,
            &breaks,
            QuadOptions { rel_tol: 1e-13, abs_tol: 1e-300, max_nodes: 1 << 20 },
        )?;
        Ok(a * (x - x_ref) + zero_part)
    }

    /// Flood-fill connectivity of `{|Θ| < δ}` sampled on `grid`.
    pub fn sublevel_connected(&self, delta: f64, grid: Grid) -> Result<SublevelVerdict> {
        self.require_inner()?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} must lie in (0, 1)")));
        }
        if !(grid.step > 0.0) || !(grid.y_min > 0.0) || grid.x_max < grid.x_min || grid.y_max < grid.y_min {
            return Err(Error::InvalidParameter("grid needs step > 0, y_min > 0 and ordered bounds".into()));
        }
        let nx = ((grid.x_max - grid.x_min) / grid.step + 1e-9).floor() as usize + 1;
        let ny = ((grid.y_max - grid.y_min) / grid.step + 1e-9).floor() as usize + 1;
        let mut below = vec![false; nx * ny];
        for j in 0..ny {
            let y = grid.y_min + j as f64 * grid.step;
            for i in 0..nx {
                let x = grid.x_min + i as f64 * grid.step;
                below[j * nx + i] = self.eval(Complex64::new(x, y))?.norm() < delta;
            }
        }
        let cells_below = below.iter().filter(|&&b| b).count();
        let mut label = vec![false; nx * ny];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..nx * ny {
            if !below[start] || label[start] {
                continue;
            }
            components += 1;
            label[start] = true;
            stack.push(start);
            while let Some(c) = stack.pop() {
                let (i, j) = (c % nx, c / nx);
                let mut nb = Vec::with_capacity(4);
                if i > 0 {
                    nb.push(c - 1);
                }
                if i + 1 < nx {
                    nb.push(c + 1);
                }
                if j > 0 {
                    nb.push(c - nx);
                }
                if j + 1 < ny {
                    nb.push(c + nx);
                }
                for n in nb {
                    if below[n] && !label[n] {
                        label[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        Ok(SublevelVerdict { connected: components <= 1, components, cells_below, step: grid.step })
    }
}
