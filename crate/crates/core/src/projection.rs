//! Kernel decomposition for a divisor pair b1 = b2·b and the diagnostics built on it.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::aos::TailBoundsReport;
use crate::error::{Error, Result};
use crate::kernels::{kernel_eval, FrequencyPoint, KernelFamily};
use crate::linalg::CMatrix;
use crate::schur::SchurFunction;

pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct DivisorPair {
    b2: SchurFunction,
    b: SchurFunction,
    b1: SchurFunction,
}

impl DivisorPair {
    pub fn new(b2: SchurFunction, b: SchurFunction) -> Self {
        let b1 = SchurFunction::product(vec![b2.clone(), b.clone()]);
        Self { b2, b, b1 }
    }

    pub fn b1(&self) -> &SchurFunction {
        &self.b1
    }

    pub fn b2(&self) -> &SchurFunction {
        &self.b2
    }

    pub fn b(&self) -> &SchurFunction {
        &self.b
    }
}

fn interior_points(lambdas: &[Complex64]) -> Result<Vec<FrequencyPoint>> {
    lambdas.iter().map(|&z| FrequencyPoint::interior(z)).collect()
}

/// Unnormalized Gram `K[n][m] = k_{λ_n}(λ_m)` for one symbol.
fn raw_kernel_matrix(symbol: &SchurFunction, pts: &[FrequencyPoint]) -> Result<CMatrix> {
    let n = pts.len();
    let mut k = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = kernel_eval(symbol, &pts[i], pts[j].value)?;
        }
    }
    Ok(k)
}

/// Σ_{n,m} a_n conj(a_m) K[n][m] = ‖Σ a_n k_{λ_n}‖².
fn quadratic_form(k: &CMatrix, a: &[Complex64]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, ai) in a.iter().enumerate() {
        for (j, aj) in a.iter().enumerate() {
            acc += ai * aj.conj() * k[(i, j)];
        }
    }
    acc.re
}

/// |‖Σa k^{b1}‖² − ‖Σa k^{b2}‖² − ‖Σa conj(b2(λ)) k^b‖²|.
pub fn decomposition_residual(pair: &DivisorPair, lambdas: &[Complex64], coeffs: &[Complex64]) -> Result<f64> {
    if lambdas.len() != coeffs.len() {
        return Err(Error::DimensionMismatch(format!("{} frequencies but {} coefficients", lambdas.len(), coeffs.len())));
    }
    let pts = interior_points(lambdas)?;
    let lhs = quadratic_form(&raw_kernel_matrix(&pair.b1, &pts)?, coeffs);
    let first = quadratic_form(&raw_kernel_matrix(&pair.b2, &pts)?, coeffs);
    let twisted: Vec<Complex64> =
        lambdas.iter().zip(coeffs).map(|(&l, &a)| Ok(a * pair.b2.eval(l)?.conj())).collect::<Result<_>>()?;
    let second = quadratic_form(&raw_kernel_matrix(&pair.b, &pts)?, &twisted);
    Ok((lhs - first - second).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    /// R_{b1,b2}(n) = (1−|b1(λ_n)|²)/(1−|b2(λ_n)|²).
    pub values: Vec<f64>,
    pub abs_defects: Vec<f64>,
    /// Σ|R − 1| over the window.
    pub l1_defect: f64,
    pub partial_sums: Vec<f64>,
    /// Increments of the partial sums over consecutive quarter windows.
    pub window_increments: Vec<f64>,
    pub decreasing_increments: bool,
}

pub fn ratio_r(pair: &DivisorPair, lambdas: &[Complex64]) -> Result<RatioReport> {
    let mut values = Vec::with_capacity(lambdas.len());
    for (i, &l) in lambdas.iter().enumerate() {
        let m2 = pair.b2.eval(l)?.norm_sqr();
        if m2 >= 1.0 {
            return Err(Error::DivisorModulusOne(i + 1));
        }
        values.push((1.0 - pair.b1.eval(l)?.norm_sqr()) / (1.0 - m2));
    }
    let abs_defects: Vec<f64> = values.iter().map(|r| (r - 1.0).abs()).collect();
    let partial_sums = cumulative(&abs_defects);
    let l1_defect = partial_sums.last().copied().unwrap_or(0.0);
    let window_increments = quarter_increments(&partial_sums);
    let decreasing_increments = window_increments.windows(2).all(|w| w[1] <= w[0]);
    Ok(RatioReport { values, abs_defects, l1_defect, partial_sums, window_increments, decreasing_increments })
}

fn cumulative(xs: &[f64]) -> Vec<f64> {
    let mut s = 0.0;
    xs.iter()
        .map(|x| {
            s += x;
            s
        })
        .collect()
}

fn quarter_increments(partial: &[f64]) -> Vec<f64> {
    if partial.is_empty() {
        return Vec::new();
    }
    let w = (partial.len() / 4).max(1);
    let mut out = Vec::new();
    let mut prev = 0.0;
    let mut i = w;
    while i <= partial.len() {
        out.push(partial[i - 1] - prev);
        prev = partial[i - 1];
        i += w;
    }
    out
}

/// Tail bounds of the normalized b1- and b2-families and the smallest N where the b2 tail
/// bounds enter [1−τ, 1+τ].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivisionReport {
    pub tau: f64,
    pub b1_tails: TailBoundsReport,
    pub b2_tails: TailBoundsReport,
    pub l1_defect: f64,
    /// Heuristic estimate of the integer p; `None` when no N in the window qualifies.
    pub p_estimate: Option<usize>,
}

pub fn division_report(pair: &DivisorPair, lambdas: &[Complex64], tau: f64) -> Result<DivisionReport> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must lie in (0, 1)")));
    }
    let pts = interior_points(lambdas)?;
    let n = pts.len();
    let g1 = KernelFamily::new(pair.b1.clone(), pts.clone())?.gram_normalized()?.entries;
    let g2 = KernelFamily::new(pair.b2.clone(), pts)?.gram_normalized()?.entries;
    let b1_tails = TailBoundsReport::compute(&g1, 1..=n)?;
    let b2_tails = TailBoundsReport::compute(&g2, 1..=n)?;
    let p_estimate =
        b2_tails.rows.iter().find(|r| r.c_n >= 1.0 - tau && r.cap_c_n <= 1.0 + tau).map(|r| r.n);
    Ok(DivisionReport { tau, b1_tails, b2_tails, l1_defect: ratio_r(pair, lambdas)?.l1_defect, p_estimate })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cor54Report {
    /// |Θ2(λ_n)|².
    pub theta2_sq: Vec<f64>,
    /// |Θ2(λ_n)|²·(1−|b(λ_n)|²)/(1−|b1(λ_n)|²).
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// max ‖k^b_{λ_n}‖ on the second half stays within 1.5× the first half.
    pub kernel_norms_bounded: bool,
    /// Θ2 has mass at infinity or unbounded spectral data; the summability statement assumes it does not.
    pub infinity_flag: bool,
}

pub fn cor54_sum(theta2: &SchurFunction, b: &SchurFunction, lambdas: &[Complex64]) -> Result<Cor54Report> {
    if !theta2.is_inner() {
        return Err(Error::NotInner);
    }
    let b1 = SchurFunction::product(vec![theta2.clone(), b.clone()]);
    let mut theta2_sq = Vec::with_capacity(lambdas.len());
    let mut terms = Vec::with_capacity(lambdas.len());
    let mut norms = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let pt = FrequencyPoint::interior(l)?;
        let t2 = theta2.eval(l)?.norm_sqr();
        let rho_b = 1.0 - b.eval(l)?.norm_sqr();
        let rho_b1 = 1.0 - b1.eval(l)?.norm_sqr();
        theta2_sq.push(t2);
        let term = if t2 == 0.0 || rho_b == 0.0 {
            0.0
        } else if rho_b1 > 0.0 {
            t2 * rho_b / rho_b1
        } else {
            return Err(Error::NotAdmissible { re: l.re, im: l.im, reason: "|b1(lambda)| = 1".into() });
        };
        terms.push(term);
        norms.push((rho_b / (4.0 * std::f64::consts::PI * pt.value.im)).sqrt());
    }
    let half = norms.len() / 2;
    let max = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
    let kernel_norms_bounded = norms.len() < 2 || max(&norms[half..]) <= 1.5 * max(&norms[..half]);
    let infinity_flag = theta2.mass_at_infinity() > 0.0;
    Ok(Cor54Report { theta2_sq, partial_sums: cumulative(&terms), terms, kernel_norms_bounded, infinity_flag })
}

/// Per-index projection diagnostics; the Θ2 columns are filled only when b2 is inner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub ratio: RatioReport,
    pub cor54: Option<Cor54Report>,
}

impl ProjectionReport {
    pub fn compute(pair: &DivisorPair, lambdas: &[Complex64]) -> Result<Self> {
        let ratio = ratio_r(pair, lambdas)?;
        let cor54 = if pair.b2.is_inner() { Some(cor54_sum(&pair.b2, &pair.b, lambdas)?) } else { None };
        Ok(Self { ratio, cor54 })
    }

    /// CSV columns `n, R, absR1, theta2_sq, term54, partial_sum` (partial sums of term54).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "R", "absR1", "theta2_sq", "term54", "partial_sum"])?;
        let num = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for i in 0..self.ratio.values.len() {
            let c = self.cor54.as_ref();
            wr.write_record([
                (i + 1).to_string(),
                num(Some(self.ratio.values[i])),
                num(Some(self.ratio.abs_defects[i])),
                num(c.map(|c| c.theta2_sq[i])),
                num(c.map(|c| c.terms[i])),
                num(c.map(|c| c.partial_sums[i])),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}
