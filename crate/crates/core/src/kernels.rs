//! Reproducing kernels of H(b), their norms and normalized Gram matrices.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::quad::{self, QuadOptions};
use crate::schur::{BoundaryAdmissibility, SchurFunction, UNIMODULAR_TOL};

/// Tag recorded in every report: kernels are `(i/2π)(1 − conj(b(λ)) b(z)) / (z − conj λ)`.
pub const KERNEL_CONVENTION: &str = "i-over-2pi";

const I_OVER_2PI: Complex64 = Complex64::new(0.0, 1.0 / (2.0 * PI));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyPoint {
    pub value: Complex64,
    pub location: Location,
    pub admissibility: Option<BoundaryAdmissibility>,
}

impl FrequencyPoint {
    pub fn interior(z: Complex64) -> Result<Self> {
        if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::OutsideDomain { re: z.re, im: z.im });
        }
        Ok(Self { value: z, location: Location::Interior, admissibility: None })
    }

    /// Boundary point `x`; requires `|b(x)| = 1` and `S₂(x) < ∞`.
    pub fn boundary(b: &SchurFunction, x: f64) -> Result<Self> {
        let not_admissible = |reason: String| Error::NotAdmissible { re: x, im: 0.0, reason };
        let bx = b.eval(Complex64::new(x, 0.0))?;
        if (bx.norm() - 1.0).abs() > UNIMODULAR_TOL {
            return Err(not_admissible(format!("|b(x)| = {} is not 1", bx.norm())));
        }
        let adm = b.admissibility(x);
        if !adm.in_e2 {
            return Err(not_admissible("S_2(x) is infinite".into()));
        }
        Ok(Self { value: Complex64::new(x, 0.0), location: Location::Boundary, admissibility: Some(adm) })
    }

    /// Interior when `Im z > 0`, boundary when `Im z == 0`.
    pub fn at(b: &SchurFunction, z: Complex64) -> Result<Self> {
        if z.im == 0.0 {
            Self::boundary(b, z.re)
        } else {
            Self::interior(z)
        }
    }
}

/// ‖k_λ^b‖²: `(1−|b(λ)|²)/(4π Im λ)` inside, `|b'(x)|/(2π)` on the boundary.
pub fn kernel_norm_sq(b: &SchurFunction, lambda: &FrequencyPoint) -> Result<f64> {
    let z = lambda.value;
    let not_admissible = |reason: String| Error::NotAdmissible { re: z.re, im: z.im, reason };
    match lambda.location {
        Location::Interior => {
            let bl = b.eval(z)?;
            let v = (1.0 - bl.norm_sqr()) / (4.0 * PI * z.im);
            if !(v > 0.0) {
                return Err(not_admissible("|b(lambda)| = 1".into()));
            }
            Ok(v)
        }
        Location::Boundary => {
            let d = b.boundary_derivative_modulus(z.re)?;
            if !(d.is_finite() && d > 0.0) {
                return Err(not_admissible(format!("|b'(x)| = {d}")));
            }
            Ok(d / (2.0 * PI))
        }
    }
}

/// k_λ^b(z).
pub fn kernel_eval(b: &SchurFunction, lambda: &FrequencyPoint, z: Complex64) -> Result<Complex64> {
    let l = lambda.value;
    let bl = b.eval(l)?;
    let bz = b.eval(z)?;
    let num = Complex64::new(1.0, 0.0) - bl.conj() * bz;
    let den = z - l.conj();
    if den == Complex64::new(0.0, 0.0) {
        if num.norm() <= 1e-12 && lambda.location == Location::Boundary {
            return Ok(Complex64::new(kernel_norm_sq(b, lambda)?, 0.0));
        }
        return Err(Error::PoleCollision(z.re));
    }
    if z == l {
        // diagonal value is real by construction
        return Ok(Complex64::new((I_OVER_2PI * num / den).re, 0.0));
    }
    Ok(I_OVER_2PI * num / den)
}

/// A symbol together with an ordered list of distinct admissible frequencies.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    symbol: SchurFunction,
    frequencies: Vec<FrequencyPoint>,
    norms: Vec<f64>,
    values: Vec<Complex64>,
}

impl KernelFamily {
    pub fn new(symbol: SchurFunction, frequencies: Vec<FrequencyPoint>) -> Result<Self> {
        for (i, f) in frequencies.iter().enumerate() {
            if frequencies[..i].iter().any(|g| g.value == f.value) {
                return Err(Error::DuplicateFrequency { re: f.value.re, im: f.value.im });
            }
        }
        let norms = frequencies
            .iter()
            .map(|f| kernel_norm_sq(&symbol, f).map(f64::sqrt))
            .collect::<Result<Vec<_>>>()?;
        let values = frequencies.iter().map(|f| symbol.eval(f.value)).collect::<Result<Vec<_>>>()?;
        Ok(Self { symbol, frequencies, norms, values })
    }

    /// Builds points with [`FrequencyPoint::at`].
    pub fn from_values(symbol: SchurFunction, values: &[Complex64]) -> Result<Self> {
        let pts = values.iter().map(|&z| FrequencyPoint::at(&symbol, z)).collect::<Result<Vec<_>>>()?;
        Self::new(symbol, pts)
    }

    pub fn symbol(&self) -> &SchurFunction {
        &self.symbol
    }

    pub fn frequencies(&self) -> &[FrequencyPoint] {
        &self.frequencies
    }

    /// ‖k_{λ_n}^b‖ per point.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// k_{λ_n}(λ_p) with the cached values `b(λ_n)`.
    fn raw_entry(&self, n: usize, p: usize) -> Result<Complex64> {
        if n == p {
            return Ok(Complex64::new(self.norms[n] * self.norms[n], 0.0));
        }
        let ln = self.frequencies[n].value;
        let lp = self.frequencies[p].value;
        let num = Complex64::new(1.0, 0.0) - self.values[n].conj() * self.values[p];
        let den = lp - ln.conj();
        if den == Complex64::new(0.0, 0.0) {
            return Err(Error::PoleCollision(lp.re));
        }
        Ok(I_OVER_2PI * num / den)
    }

    /// Unnormalized Gram with entries `k_{λ_n}(λ_p)`.
    pub fn raw_gram(&self) -> Result<CMatrix> {
        self.assemble(|n, p| self.raw_entry(n, p))
    }

    /// Γ_{n,p} = k_{λ_n}(λ_p) / (‖k_{λ_n}‖ ‖k_{λ_p}‖).
    pub fn gram_normalized(&self) -> Result<GramMatrix> {
        let entries = self.assemble(|n, p| {
            if n == p {
                Ok(Complex64::new(1.0, 0.0))
            } else {
                Ok(self.raw_entry(n, p)? / (self.norms[n] * self.norms[p]))
            }
        })?;
        Ok(GramMatrix {
            entries,
            frequencies: self.frequencies.iter().map(|f| f.value).collect(),
            symbol_hash: symbol_hash(&self.symbol),
        })
    }

    fn assemble(&self, entry: impl Fn(usize, usize) -> Result<Complex64>) -> Result<CMatrix> {
        let n = self.len();
        let mut g = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = entry(i, j)?;
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        Ok(g)
    }
}

pub fn symbol_hash(b: &SchurFunction) -> String {
    let text = serde_json::to_string(b).expect("symbol serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Normalized kernel Gram matrix with export metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: CMatrix,
    pub frequencies: Vec<Complex64>,
    pub symbol_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMetadata {
    pub symbol_hash: String,
    pub frequencies: Vec<[f64; 2]>,
    pub convention: String,
    pub size: usize,
}

impl GramMatrix {
    /// Wraps an arbitrary Hermitian matrix without symbol metadata.
    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        linalg::ensure_hermitian(&entries)?;
        Ok(Self { frequencies: Vec::new(), symbol_hash: String::new(), entries })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_asymmetry(&self) -> f64 {
        linalg::max_asymmetry(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigenvalues(&self.entries).first().copied().unwrap_or(0.0)
    }

    pub fn max_offdiag(&self) -> f64 {
        let n = self.size();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.entries[(i, j)].norm());
                }
            }
        }
        m
    }

    pub fn metadata(&self) -> GramMetadata {
        GramMetadata {
            symbol_hash: self.symbol_hash.clone(),
            frequencies: self.frequencies.iter().map(|z| [z.re, z.im]).collect(),
            convention: KERNEL_CONVENTION.to_string(),
            size: self.size(),
        }
    }

    /// CSV rows `(n, p, re, im)` with 1-based indices.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "p", "re", "im"])?;
        let n = self.size();
        for i in 0..n {
            for j in 0..n {
                let v = self.entries[(i, j)];
                wr.write_record([
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    format!("{:.17e}", v.re),
                    format!("{:.17e}", v.im),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// ⟨k_μ, k_λ⟩ computed as `∫_ℝ k_μ(t) conj(k_λ(t)) dt`, valid for inner Θ and for b ≡ 0.
///
/// Should equal `k_μ(λ)`.
pub fn boundary_inner_product_oracle(
    theta: &SchurFunction,
    lambda: &FrequencyPoint,
    mu: &FrequencyPoint,
) -> Result<Complex64> {
    let zero_symbol = theta
        .leaves()
        .iter()
        .any(|f| matches!(f, SchurFunction::Constant(c) if c.norm() == 0.0));
    if !theta.is_inner() && !zero_symbol {
        return Err(Error::NotInner);
    }
    let a = if zero_symbol { 0.0 } else { theta.mass_at_infinity() };
    let l = lambda.value;
    let m = mu.value;
    let tl = theta.eval(l)?;
    let tm = theta.eval(m)?;
    let nl = kernel_norm_sq(theta, lambda)?;
    let nm = kernel_norm_sq(theta, mu)?;
    let eval_t = |t: f64| theta.eval(Complex64::new(t, 0.0)).unwrap_or(Complex64::new(1.0, 0.0));
    let kernel = |p: Complex64, bp: Complex64, np: f64, t: f64| -> Complex64 {
        let den = Complex64::new(t, 0.0) - p.conj();
        if p.im == 0.0 && den.norm() < 1e-9 {
            return Complex64::new(np, 0.0);
        }
        I_OVER_2PI * (Complex64::new(1.0, 0.0) - bp.conj() * eval_t(t)) / den
    };
    let integrand = |t: f64| kernel(m, tm, nm, t) * kernel(l, tl, nl, t).conj();

    let mut extent = 1e3f64;
    if a > 0.0 {
        extent = extent.max(50.0 / a);
    }
    let mut breaks = theta.boundary_breakpoints();
    breaks.extend([l.re, m.re]);
    for &p in &breaks {
        extent = extent.max(10.0 * p.abs());
    }
    let spacing = if a > 0.0 { (PI / a).min(1.0) } else { 1.0 };
    let mut t = -extent;
    while t < extent {
        breaks.push(t);
        t += spacing.max(extent / 4096.0);
    }
    let opts = QuadOptions { rel_tol: 1e-12, abs_tol: 1e-14, max_nodes: 1 << 23 };
    let core = quad::integrate(integrand, -extent, extent, &breaks, opts)?;

    let tails = if a == 0.0 {
        let right = quad::integrate_half_line(integrand, extent, extent, &[], opts)?;
        let left = quad::integrate_half_line(|s: f64| integrand(-s), extent, extent, &[], opts)?;
        right + left
    } else {
        let scale = Complex64::new(1.0 / (4.0 * PI * PI), 0.0);
        let den = |t: f64| (Complex64::new(t, 0.0) - m.conj()) * (Complex64::new(t, 0.0) - l);
        let f0 = |t: f64| (Complex64::new(1.0, 0.0) + tm.conj() * tl) / den(t);
        let rational = quad::integrate_half_line(f0, extent, extent, &[], opts)?
            + quad::integrate_half_line(|s: f64| f0(-s), extent, extent, &[], opts)?;
        let phase = |t: f64| Complex64::from_polar(1.0, a * t);
        let g_plus = |t: f64| eval_t(t) / phase(t) / den(t);
        let g_minus = |t: f64| eval_t(t).conj() * phase(t) / den(t);
        let plus = oscillatory_tails(g_plus, a, extent);
        let minus = oscillatory_tails(g_minus, -a, extent);
        (rational - tm.conj() * plus - tl * minus) * scale
    };
    Ok(core + tails)
}

/// `∫_{|t|>L} g(t) e^{iωt} dt` by two steps of integration by parts.
fn oscillatory_tails(g: impl Fn(f64) -> Complex64, omega: f64, extent: f64) -> Complex64 {
    let h = 0.5;
    let iw = Complex64::new(0.0, omega);
    let dg = |t: f64| (g(t + h) - g(t - h)) / (2.0 * h);
    let right = Complex64::from_polar(1.0, omega * extent) * (-g(extent) / iw + dg(extent) / (iw * iw));
    let left = Complex64::from_polar(1.0, -omega * extent) * (g(-extent) / iw - dg(-extent) / (iw * iw));
    right + left
}
