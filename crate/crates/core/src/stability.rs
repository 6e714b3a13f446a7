//! Bernstein weights, segment defects and the perturbation predicates built on them.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{kernel_norm_sq, FrequencyPoint, Location};
use crate::quad::{self, QuadOptions};
use crate::schur::{Grid, SchurFunction};

const SEGMENT_REL_TOL: f64 = 1e-6;
const SEGMENT_MAX_NODES: usize = 1 << 16;
const PREDICATE_SLACK: f64 = 1e-12;
/// Accepted relative error when the adaptive rule hits its node cap (oscillation near atoms).
const WEIGHT_FALLBACK_REL: f64 = 1e-4;

fn integrate_line_tolerant(f: impl Fn(f64) -> f64, center: f64, scale: f64, breaks: &[f64], opts: QuadOptions) -> Result<f64> {
    match quad::integrate_line(f, center, scale, breaks, opts) {
        Err(Error::QuadratureNotConverged { estimate, error, .. })
            if estimate.is_finite() && error <= WEIGHT_FALLBACK_REL * estimate.abs() =>
        {
            Ok(estimate)
        }
        r => r,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeightParams {
    pub p: f64,
    pub q: f64,
    /// p/(q(p+1)), the exponent on `1 − |b(z)|`.
    pub exponent: f64,
    /// p/(p+1), the exponent on the L^q norms.
    pub power: f64,
    #[serde(skip)]
    pub quad: QuadOptions,
}

impl WeightParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0 && p < 2.0) {
            return Err(Error::ExponentOutOfRange(p));
        }
        let q = p / (p - 1.0);
        Ok(Self { p, q, exponent: p / (q * (p + 1.0)), power: p / (p + 1.0), quad: QuadOptions { max_nodes: 1 << 17, ..QuadOptions::with_rel_tol(1e-11) } })
    }

    pub fn with_quad(mut self, quad: QuadOptions) -> Self {
        self.quad = quad;
        self
    }
}

/// The two L^q norms entering w_p. `frostman` is `None` when ρ ≡ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightTerms {
    pub kernel_sq: f64,
    pub frostman: Option<f64>,
}

impl WeightTerms {
    pub fn weight(&self, params: &WeightParams) -> f64 {
        let term = |norm: f64| if norm == 0.0 { f64::INFINITY } else { norm.powf(-params.power) };
        let a = term(self.kernel_sq);
        match self.frostman {
            Some(n) => a.min(term(n)),
            None => a,
        }
    }
}

/// Boundary data of `b`: ρ(t) = 1 − |b(t)|² and the kernel 𝔎_{z0}(t).
pub struct BoundaryData<'a> {
    b: &'a SchurFunction,
    log_modulus: Box<dyn Fn(f64) -> f64 + 'a>,
}

impl<'a> BoundaryData<'a> {
    pub fn new(b: &'a SchurFunction) -> Self {
        Self { b, log_modulus: Box::new(b.boundary_log_modulus()) }
    }

    pub fn rho(&self, t: f64) -> f64 {
        if self.b.is_inner() {
            return 0.0;
        }
        (-(2.0 * (self.log_modulus)(t)).exp_m1()).clamp(0.0, 1.0)
    }

    /// 𝔎_{z0}(t) = conj(b(z0))(2 − conj(b(z0)) b(t)) / (t − conj z0)².
    pub fn frostman_kernel(&self, z0: Complex64, bz0: Complex64, t: f64) -> Result<Complex64> {
        let bt = self.b.eval(Complex64::new(t, 0.0))?;
        let d = Complex64::new(t, 0.0) - z0.conj();
        Ok(bz0.conj() * (2.0 - bz0.conj() * bt) / (d * d))
    }
}

fn boundary_scale(b: &SchurFunction, x: f64) -> f64 {
    let d = b.boundary_derivative_modulus(x).unwrap_or(1.0);
    if d.is_finite() && d > 0.0 {
        (1.0 / d).clamp(1e-6, 1e6)
    } else {
        1.0
    }
}

/// The norms ‖(k_z^b)²‖_q and ‖ρ^{1/q}𝔎_z^b‖_q; `None` when a boundary integral diverges.
pub fn weight_terms(b: &SchurFunction, z: Complex64, params: &WeightParams) -> Result<Option<WeightTerms>> {
    if z.im < 0.0 {
        return Err(Error::OutsideDomain { re: z.re, im: z.im });
    }
    let q = params.q;
    let boundary = z.im == 0.0;
    let data = BoundaryData::new(b);
    let bz = b.eval(z)?;
    let mut breaks = b.boundary_breakpoints();
    let (scale, diag) = if boundary {
        FrequencyPoint::boundary(b, z.re)?;
        if !b.s_ell(z.re, 4).is_finite() {
            return Ok(None);
        }
        if !b.is_inner() && !b.log_modulus_moment(z.re, 2.0 * q).is_finite() {
            return Ok(None);
        }
        breaks.push(z.re);
        let s = boundary_scale(b, z.re);
        (s, b.boundary_derivative_modulus(z.re)? / (2.0 * PI))
    } else {
        (z.im, 0.0)
    };
    let near = 1e-7 * scale;

    let kernel_abs = |t: f64| -> f64 {
        if boundary && (t - z.re).abs() < near {
            return diag;
        }
        match b.eval(Complex64::new(t, 0.0)) {
            Ok(bt) => ((1.0 - bz.conj() * bt) / (Complex64::new(t, 0.0) - z.conj())).norm() / (2.0 * PI),
            Err(_) => f64::NAN,
        }
    };
    let k_int = integrate_line_tolerant(|t| kernel_abs(t).powf(2.0 * q), z.re, scale, &breaks, params.quad)?;
    let kernel_sq = k_int.powf(1.0 / q);

    let frostman = if b.is_inner() {
        None
    } else if bz.norm() == 0.0 {
        Some(0.0)
    } else {
        let f = |t: f64| -> f64 {
            let r = data.rho(t);
            if r == 0.0 {
                return 0.0;
            }
            match data.frostman_kernel(z, bz, t) {
                Ok(k) => r * k.norm().powf(q),
                Err(_) => f64::NAN,
            }
        };
        let v = integrate_line_tolerant(f, z.re, scale, &breaks, params.quad)?;
        Some(v.powf(1.0 / q))
    };
    Ok(Some(WeightTerms { kernel_sq, frostman }))
}

/// w_p(z); `0` at boundary points where the defining integrals diverge.
pub fn weight_w_p(b: &SchurFunction, z: Complex64, params: &WeightParams) -> Result<f64> {
    Ok(match weight_terms(b, z, params)? {
        Some(t) => t.weight(params),
        None => 0.0,
    })
}

/// w_p(z)·(1 − |b(z)|)^{p/(q(p+1))} / Im z.
pub fn lower_bound_ratio(b: &SchurFunction, z: Complex64, params: &WeightParams) -> Result<f64> {
    if !(z.im > 0.0) {
        return Err(Error::OutsideDomain { re: z.re, im: z.im });
    }
    let w = weight_w_p(b, z, params)?;
    let bz = b.eval(z)?;
    Ok(w * (1.0 - bz.norm()).powf(params.exponent) / z.im)
}

/// v₀(x) = min(d₀(x), |Θ'(x)|⁻¹) with d₀ measured to the real trace of σ(Θ).
pub fn v0(theta: &SchurFunction, x: f64) -> Result<f64> {
    let d0 = theta.spectrum_distance(x)?;
    let d = theta.angular_derivative(x)?;
    Ok(d0.min(1.0 / d))
}

/// v₀ with d₀ measured to σ(Θ) in the closed half-plane, zeros included.
pub fn v0_closed(theta: &SchurFunction, x: f64) -> Result<f64> {
    let p = Complex64::new(x, 0.0);
    let to_zeros = theta.zeros().iter().map(|z| (p - z).norm()).fold(f64::INFINITY, f64::min);
    Ok(v0(theta, x)?.min(to_zeros))
}

fn segment_point(b: &SchurFunction, z: Complex64) -> Result<FrequencyPoint> {
    FrequencyPoint::at(b, z)
}

/// (1/‖k_λ‖²) ∫_{[λ,μ]} w_p(z)^{−2} |dz|.
pub fn epsilon_segment(
    b: &SchurFunction,
    lambda: &FrequencyPoint,
    mu: &FrequencyPoint,
    params: &WeightParams,
) -> Result<f64> {
    let (l, m) = (lambda.value, mu.value);
    let len = (m - l).norm();
    if len == 0.0 {
        return Ok(0.0);
    }
    let norm_sq = kernel_norm_sq(b, lambda)?;
    segment_point(b, m)?;
    for z in [l, m] {
        if weight_w_p(b, z, params)? == 0.0 {
            return Err(Error::WeightVanishesOnSegment { re: z.re, im: z.im });
        }
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |s: f64| -> f64 {
        let mut z = l + (m - l) * s;
        if z.im < 0.0 {
            z.im = 0.0;
        }
        match weight_w_p(b, z, params) {
            Ok(w) if w > 0.0 => w.powi(-2),
            Ok(_) => {
                failure.borrow_mut().get_or_insert(Error::WeightVanishesOnSegment { re: z.re, im: z.im });
                f64::NAN
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let r = quad::composite_doubling(integrand, SEGMENT_REL_TOL, SEGMENT_MAX_NODES);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r? * len / norm_sq)
}

/// |(λ − μ)/(λ − conj μ)|.
pub fn pseudo_hyperbolic(lambda: Complex64, mu: Complex64) -> f64 {
    if lambda == mu {
        return 0.0;
    }
    ((lambda - mu) / (lambda - mu.conj())).norm()
}

/// |(w₁ − w₂)/(1 − conj(w₁) w₂)| on the unit disk.
pub fn disk_pseudo_hyperbolic(w1: Complex64, w2: Complex64) -> f64 {
    if w1 == w2 {
        return 0.0;
    }
    ((w1 - w2) / (1.0 - w1.conj() * w2)).norm()
}

/// ((1−ε)/(1+ε), (1+ε)/(1−ε)).
pub fn ratio_bounds(eps: f64) -> (f64, f64) {
    ((1.0 - eps) / (1.0 + eps), (1.0 + eps) / (1.0 - eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cor36Verdict {
    pub pseudo_hyperbolic: f64,
    pub bound: f64,
    pub holds: bool,
    pub distance: f64,
    pub chain_bound: f64,
    pub chain_holds: bool,
}

/// Pseudo-hyperbolic closeness test |(λ−μ)/(λ−conj μ)| ≤ ε(1−|b(λ)|)^γ, γ > 1/3.
pub fn cor36_predicate(b: &SchurFunction, lambda: Complex64, mu: Complex64, gamma: f64, eps: f64) -> Result<Cor36Verdict> {
    if !(gamma > 1.0 / 3.0) || !gamma.is_finite() {
        return Err(Error::GammaOutOfRange(gamma));
    }
    for z in [lambda, mu] {
        if !(z.im > 0.0) {
            return Err(Error::OutsideDomain { re: z.re, im: z.im });
        }
    }
    let bl = b.eval(lambda)?;
    let bound = eps * (1.0 - bl.norm()).max(0.0).powf(gamma);
    let ph = pseudo_hyperbolic(lambda, mu);
    let distance = (lambda - mu).norm();
    let chain_bound = bound * lambda.im;
    Ok(Cor36Verdict {
        pseudo_hyperbolic: ph,
        bound,
        holds: ph <= bound * (1.0 + PREDICATE_SLACK),
        distance,
        chain_bound,
        chain_holds: distance <= chain_bound * (1.0 + PREDICATE_SLACK),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thm310Verdict {
    pub eq1_value: f64,
    pub eq1_holds: bool,
    pub eq2_lhs: f64,
    pub eq2_rhs: f64,
    pub eq2_holds: bool,
}

/// Real-frequency criteria: ∫_{[t,s]}(|Θ'| + |Θ'|⁻¹d₀⁻²) ≤ ε and |s−t| ≤ ε|Θ'(t)|min(d₀², |Θ'|⁻²).
pub fn thm310_predicates(theta: &SchurFunction, t: f64, s: f64, eps: f64) -> Result<Thm310Verdict> {
    let spec = theta.spectrum()?;
    let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
    if spec.real_points().any(|p| p >= lo && p <= hi) {
        return Err(Error::SpectrumOnSegment(lo, hi));
    }
    let integrand = |x: f64| -> f64 {
        let d = match theta.angular_derivative(x) {
            Ok(d) => d,
            Err(_) => return f64::NAN,
        };
        let d0 = spec.distance(x);
        d + 1.0 / (d * d0 * d0)
    };
    let breaks: Vec<f64> = theta.boundary_breakpoints().into_iter().filter(|&x| x > lo && x < hi).collect();
    let eq1_value = quad::integrate(integrand, lo, hi, &breaks, QuadOptions::with_rel_tol(1e-12))?;
    let dt = theta.angular_derivative(t)?;
    let d0 = spec.distance(t);
    let eq2_lhs = hi - lo;
    let eq2_rhs = eps * dt * (d0 * d0).min(1.0 / (dt * dt));
    Ok(Thm310Verdict {
        eq1_value,
        eq1_holds: eq1_value <= eps * (1.0 + PREDICATE_SLACK),
        eq2_lhs,
        eq2_rhs,
        eq2_holds: eq2_lhs <= eq2_rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cor312Verdict {
    pub gap: f64,
    pub holds: bool,
    /// Connectedness of a sublevel set of Θ, when a check was requested.
    pub cls_connected: Option<bool>,
}

/// Argument-gap test |φ(s) − φ(t)| ≤ ε for meromorphic inner Θ.
pub fn cor312_predicate(
    theta: &SchurFunction,
    t: f64,
    s: f64,
    eps: f64,
    cls_check: Option<(f64, Grid)>,
) -> Result<Cor312Verdict> {
    if !theta.is_meromorphic_inner() {
        return Err(Error::NotMeromorphicInner);
    }
    let gap = if t == s { 0.0 } else { theta.argument_phi(t, s)?.abs() };
    let cls_connected = match cls_check {
        Some((delta, grid)) => Some(theta.sublevel_connected(delta, grid)?.connected),
        None => None,
    };
    Ok(Cor312Verdict { gap, holds: gap <= eps * (1.0 + PREDICATE_SLACK), cls_connected })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GnKind {
    Interior,
    Real,
}

/// Membership of `candidate` in G_n. `context` is Im λ_n (interior) or v₀(t_n) (real).
pub fn gn_membership(kind: GnKind, center: Complex64, candidate: Complex64, eps: f64, context: f64) -> bool {
    let d = (candidate - center).norm();
    match kind {
        GnKind::Interior => candidate == center || d < eps * context,
        GnKind::Real => candidate.im == 0.0 && d <= eps * context,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub n: usize,
    pub pseudo_hyp: Option<f64>,
    pub norm_ratio: f64,
    pub eps_segment: f64,
    pub cor36: Option<bool>,
    pub thm310_eq1: Option<f64>,
    pub thm310_eq2: Option<bool>,
    pub cor312: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// `eps_tail[N-1]` = sup_{n ≥ N} eps_segment.
    pub eps_tail: Vec<f64>,
}

/// Inputs shared by all rows of a report.
#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions {
    pub params: WeightParams,
    pub gamma: Option<f64>,
    pub parallel: bool,
}

impl StabilityReport {
    /// One row per pair (λ_n, μ_n) with tolerance ε_n.
    pub fn compute(
        b: &SchurFunction,
        pairs: &[(FrequencyPoint, FrequencyPoint)],
        eps: &[f64],
        opts: StabilityOptions,
    ) -> Result<Self> {
        if pairs.len() != eps.len() {
            return Err(Error::DimensionMismatch(format!("{} pairs but {} tolerances", pairs.len(), eps.len())));
        }
        let row = |i: usize| stability_row(b, i + 1, &pairs[i].0, &pairs[i].1, eps[i], &opts);
        let rows: Vec<StabilityRow> = if opts.parallel && pairs.len() > 1 {
            let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(pairs.len());
            let mut slots: Vec<Option<Result<StabilityRow>>> = (0..pairs.len()).map(|_| None).collect();
            std::thread::scope(|scope| {
                for (w, chunk) in slots.chunks_mut(pairs.len().div_ceil(workers)).enumerate() {
                    let start = w * pairs.len().div_ceil(workers);
                    let row = &row;
                    scope.spawn(move || {
                        for (k, slot) in chunk.iter_mut().enumerate() {
                            *slot = Some(row(start + k));
                        }
                    });
                }
            });
            slots.into_iter().map(|s| s.expect("every slot is filled")).collect::<Result<_>>()?
        } else {
            (0..pairs.len()).map(row).collect::<Result<_>>()?
        };
        let mut eps_tail = vec![0.0; rows.len()];
        let mut running = 0.0f64;
        for i in (0..rows.len()).rev() {
            running = running.max(rows[i].eps_segment);
            eps_tail[i] = running;
        }
        Ok(Self { rows, eps_tail })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(["n", "pseudo_hyp", "norm_ratio", "eps_segment", "cor36", "thm310_eq1", "thm310_eq2", "cor312"])
            .map_err(io)?;
        let num = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        let flag = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            wr.write_record([
                r.n.to_string(),
                num(r.pseudo_hyp),
                num(Some(r.norm_ratio)),
                num(Some(r.eps_segment)),
                flag(r.cor36),
                num(r.thm310_eq1),
                flag(r.thm310_eq2),
                flag(r.cor312),
            ])
            .map_err(io)?;
        }
        for (i, e) in self.eps_tail.iter().enumerate() {
            let label = format!("N={}", i + 1);
            wr.write_record([label.as_str(), "", "", &num(Some(*e)), "", "", "", ""]).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

fn stability_row(
    b: &SchurFunction,
    n: usize,
    lambda: &FrequencyPoint,
    mu: &FrequencyPoint,
    eps: f64,
    opts: &StabilityOptions,
) -> Result<StabilityRow> {
    let norm_ratio = (kernel_norm_sq(b, mu)? / kernel_norm_sq(b, lambda)?).sqrt();
    let eps_segment = epsilon_segment(b, lambda, mu, &opts.params)?;
    let mut row = StabilityRow {
        n,
        pseudo_hyp: None,
        norm_ratio,
        eps_segment,
        cor36: None,
        thm310_eq1: None,
        thm310_eq2: None,
        cor312: None,
    };
    match (lambda.location, mu.location) {
        (Location::Interior, Location::Interior) => {
            row.pseudo_hyp = Some(pseudo_hyperbolic(lambda.value, mu.value));
            if let Some(g) = opts.gamma {
                row.cor36 = Some(cor36_predicate(b, lambda.value, mu.value, g, eps)?.holds);
            }
        }
        (Location::Boundary, Location::Boundary) if b.is_inner() => {
            let v = thm310_predicates(b, lambda.value.re, mu.value.re, eps)?;
            row.thm310_eq1 = Some(v.eq1_value);
            row.thm310_eq2 = Some(v.eq2_holds);
            if b.is_meromorphic_inner() {
                row.cor312 = Some(cor312_predicate(b, lambda.value.re, mu.value.re, eps, None)?.holds);
            }
        }
        _ => {}
    }
    Ok(row)
}
