//! Normalized exponential systems χ_λ(t) = N_λ e^{iλt} in L²(0, a).

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::aos;
use crate::error::{Error, Result};
use crate::kernels::{symbol_hash, GramMatrix};
use crate::linalg::CMatrix;
use crate::schur::SchurFunction;

const SERIES_THRESHOLD: f64 = 1e-8;
const LOG_UNDERFLOW: f64 = -700.0;
/// Hypothesis (i) is rejected when |Im λ| on the second half exceeds this multiple of the first half.
const IM_GROWTH_FACTOR: f64 = 1.5;
/// Hypothesis (ii) needs the tail ratio |λ_{n+1}/λ_n| to stay at or above this.
const RATIO_THRESHOLD: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub struct ExponentialFamily {
    a: f64,
    frequencies: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct FamilySpec {
    a: f64,
    frequencies: Vec<[f64; 2]>,
}

impl TryFrom<FamilySpec> for ExponentialFamily {
    type Error = Error;
    fn try_from(s: FamilySpec) -> Result<Self> {
        Self::new(s.a, s.frequencies.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}

impl From<ExponentialFamily> for FamilySpec {
    fn from(f: ExponentialFamily) -> Self {
        FamilySpec { a: f.a, frequencies: f.frequencies.iter().map(|z| [z.re, z.im]).collect() }
    }
}

impl ExponentialFamily {
    pub fn new(a: f64, frequencies: Vec<Complex64>) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("interval length a = {a} must be positive")));
        }
        for (i, z) in frequencies.iter().enumerate() {
            if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::OutsideDomain { re: z.re, im: z.im });
            }
            if frequencies[..i].contains(z) {
                return Err(Error::DuplicateFrequency { re: z.re, im: z.im });
            }
        }
        Ok(Self { a, frequencies })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn frequencies(&self) -> &[Complex64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// χ_λ(t) for the `n`-th frequency (0-based).
    pub fn eval(&self, n: usize, t: f64) -> Complex64 {
        let l = self.frequencies[n];
        normalization_sq(l.im, self.a).sqrt() * (Complex64::i() * l * t).exp()
    }
}

/// 2y / (1 − e^{−2ay}), the squared normalization; `1/a` in the real limit.
pub fn normalization_sq(y: f64, a: f64) -> f64 {
    let u = 2.0 * a * y;
    if u < SERIES_THRESHOLD {
        let ay = a * y;
        (1.0 + ay + ay * ay / 3.0) / a
    } else {
        2.0 * y / -(-u).exp_m1()
    }
}

/// e^u − 1 without cancellation for small |u|.
fn cexp_m1(u: Complex64) -> Complex64 {
    let (s, c) = u.im.sin_cos();
    let half = (0.5 * u.im).sin();
    Complex64::new(u.re.exp_m1() * c - 2.0 * half * half, u.re.exp() * s)
}

/// ∫₀^a e^{iwt} dt = (e^{iwa} − 1)/(iw).
fn exp_integral(w: Complex64, a: f64) -> Complex64 {
    let u = Complex64::i() * w * a;
    if w.norm() < SERIES_THRESHOLD {
        return a * (1.0 + u / 2.0 + u * u / 6.0);
    }
    cexp_m1(u) / (Complex64::i() * w)
}

/// Γ_{n,m} = ⟨χ_{λ_n}, χ_{λ_m}⟩_{L²(0,a)}.
pub fn chi_gram(family: &ExponentialFamily) -> Result<GramMatrix> {
    let n = family.len();
    let a = family.a;
    let f = &family.frequencies;
    let norms: Vec<f64> = f.iter().map(|z| normalization_sq(z.im, a)).collect();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = Complex64::new(1.0, 0.0);
        for j in i + 1..n {
            let v = (norms[i] * norms[j]).sqrt() * exp_integral(f[i] - f[j].conj(), a);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    Ok(GramMatrix { entries: g, frequencies: f.clone(), symbol_hash: symbol_hash(&SchurFunction::exp_inner(a)?) })
}

/// Π_{k≠n} |(λ_k − λ_n)/(λ_k − conj λ_n)| for the 1-based index `n`.
pub fn thin_product(frequencies: &[Complex64], n: usize) -> Result<f64> {
    if n == 0 || n > frequencies.len() {
        return Err(Error::IndexOutOfRange { index: n, len: frequencies.len() });
    }
    if let Some(z) = frequencies.iter().find(|z| !(z.im > 0.0)) {
        return Err(Error::BoundaryFrequency { re: z.re, im: z.im });
    }
    let ln = frequencies[n - 1];
    let mut log_sum = 0.0;
    for (k, &lk) in frequencies.iter().enumerate() {
        if k == n - 1 {
            continue;
        }
        if lk == ln {
            return Err(Error::DuplicateFrequency { re: lk.re, im: lk.im });
        }
        log_sum += ((lk - ln) / (lk - ln.conj())).norm().ln();
        if log_sum < LOG_UNDERFLOW {
            return Ok(0.0);
        }
    }
    Ok(log_sum.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub n: usize,
    pub eps_row: f64,
    pub c_n: f64,
    pub cap_c_n: f64,
    /// C/|λ_N| with the fitted constant.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop41Report {
    pub a: f64,
    pub sup_im: f64,
    /// inf_n |λ_{n+1}/λ_n| over the whole list.
    pub min_ratio: f64,
    /// inf of the same ratio over the second half of the list.
    pub tail_ratio: f64,
    pub bounded_imaginary_parts: bool,
    pub lacunary: bool,
    /// Fitted C in ε_N^row ≈ C/|λ_N| (geometric mean of ε_N^row·|λ_N|).
    pub fit_constant: f64,
    /// max |log(ε_N^row·|λ_N|/C)| over the fitted rows.
    pub fit_residual: f64,
    pub rows: Vec<DecayRow>,
}

impl Prop41Report {
    pub fn hypotheses_hold(&self) -> bool {
        self.bounded_imaginary_parts && self.lacunary
    }

    /// CSV columns `N, eps_row, c_N, C_N, bound_C_over_lambdaN`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["N", "eps_row", "c_N", "C_N", "bound_C_over_lambdaN"])?;
        for r in &self.rows {
            wr.write_record([
                r.n.to_string(),
                format!("{:.17e}", r.eps_row),
                format!("{:.17e}", r.c_n),
                format!("{:.17e}", r.cap_c_n),
                format!("{:.17e}", r.bound),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Checks sup|Im λ_n| < ∞ and |λ_{n+1}/λ_n| ≥ q > 1 heuristically on a finite list, and
/// reports the row-defect decay against C/|λ_N|.
pub fn prop41_check(frequencies: &[Complex64], a: f64) -> Result<Prop41Report> {
    if let Some(i) = frequencies.iter().position(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::ZeroFrequency(i + 1));
    }
    let family = ExponentialFamily::new(a, frequencies.to_vec())?;
    let len = frequencies.len();
    let sup_im = frequencies.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let half = len / 2;
    let max_im = |s: &[Complex64]| s.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let bounded_imaginary_parts =
        len < 2 || max_im(&frequencies[half..]) <= IM_GROWTH_FACTOR * max_im(&frequencies[..half]).max(f64::MIN_POSITIVE);
    let ratios: Vec<f64> = frequencies.windows(2).map(|w| w[1].norm() / w[0].norm()).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_ratio = ratios[ratios.len().saturating_sub(ratios.len().div_ceil(2))..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let lacunary = tail_ratio >= RATIO_THRESHOLD;

    let g = chi_gram(&family)?.entries;
    let mut rows = Vec::with_capacity(len);
    for n in 1..=len {
        let (c, cc) = aos::tail_bounds(&g, n)?;
        let (eps, _) = aos::row_defects(&g, n)?;
        rows.push(DecayRow { n, eps_row: eps, c_n: c, cap_c_n: cc, bound: 0.0 });
    }
    let logs: Vec<f64> = rows
        .iter()
        .filter(|r| r.eps_row > 0.0)
        .map(|r| (r.eps_row * frequencies[r.n - 1].norm()).ln())
        .collect();
    let (fit_constant, fit_residual) = if logs.is_empty() {
        (0.0, 0.0)
    } else {
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        (mean.exp(), logs.iter().map(|l| (l - mean).abs()).fold(0.0, f64::max))
    };
    for r in &mut rows {
        r.bound = fit_constant / frequencies[r.n - 1].norm();
    }
    Ok(Prop41Report {
        a,
        sup_im,
        min_ratio,
        tail_ratio,
        bounded_imaginary_parts,
        lacunary,
        fit_constant,
        fit_residual,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{self, QuadOptions};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn quad_entry(f: &ExponentialFamily, n: usize, m: usize) -> Complex64 {
        let a = f.a();
        let breaks: Vec<f64> = (1..64).map(|k| a * k as f64 / 64.0).collect();
        quad::integrate(|t| f.eval(n, t) * f.eval(m, t).conj(), 0.0, a, &breaks, QuadOptions { abs_tol: 1e-12, ..QuadOptions::with_rel_tol(1e-13) }).unwrap()
    }

    #[test]
    fn gram_examples() {
        let a = 1.0;
        let f = ExponentialFamily::new(a, vec![c(0.0, 0.0), c(2.0 * PI, 0.0), c(0.0, 1.0), c(0.0, 2.0)]).unwrap();
        let g = chi_gram(&f).unwrap().entries;
        assert!(g[(0, 1)].norm() < 1e-15);
        for i in 0..4 {
            assert_eq!(g[(i, i)], c(1.0, 0.0));
        }
        let want = quad_entry(&f, 2, 3);
        assert!((g[(2, 3)] - want).norm() < 1e-8);
        assert!((g[(2, 3)].re - 0.97236).abs() < 1e-4);
        assert!(matches!(ExponentialFamily::new(1.0, vec![c(1.0, 1.0), c(1.0, 1.0)]), Err(Error::DuplicateFrequency { .. })));
    }

    #[test]
    fn gram_matches_quadrature_on_random_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for trial in 0..10 {
            let a = if trial % 2 == 0 { 1.0 } else { PI };
            let n = rng.gen_range(2..=8);
            let mut fr = Vec::new();
            for k in 0..n {
                let im = if k % 3 == 0 { 0.0 } else if k % 3 == 1 { 1e-9 } else { rng.gen_range(0.0..3.0) };
                fr.push(c(rng.gen_range(-10.0..10.0), im));
            }
            let f = ExponentialFamily::new(a, fr).unwrap();
            let g = chi_gram(&f).unwrap().entries;
            for i in 0..n {
                for j in 0..n {
                    assert!((g[(i, j)] - quad_entry(&f, i, j)).norm() < 1e-8, "trial {trial} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        let a: f64 = 1.7;
        for y in [1e-10f64, 4.9e-9, 5.1e-9, 1e-7] {
            let exact = 2.0 * y / -(-2.0 * a * y).exp_m1();
            assert!((normalization_sq(y, a) - exact).abs() / exact < 1e-14);
        }
        for w in [c(3e-9, 1e-9), c(0.0, 2e-8), c(1e-7, 0.0)] {
            let e = exp_integral(w, a);
            let direct = ((Complex64::i() * w * a).exp() - 1.0) / (Complex64::i() * w);
            assert!((e - direct).norm() < 1e-7);
        }
    }

    #[test]
    fn thin_product_examples() {
        assert!((thin_product(&[c(0.0, 1.0), c(0.0, 2.0)], 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(thin_product(&[c(3.0, 1.0)], 1).unwrap(), 1.0);
        assert!(matches!(thin_product(&[c(0.0, 1.0), c(1.0, 0.0)], 1), Err(Error::BoundaryFrequency { .. })));

        let fr: Vec<Complex64> = (1..=12).map(|k| c(0.0, 2f64.powi(k))).collect();
        let got = thin_product(&fr, 6).unwrap();
        let two = BigInt::from(2);
        let p6 = num_traits::pow(two.clone(), 6);
        let mut exact = BigRational::from_integer(BigInt::from(1));
        for k in 1..=12usize {
            if k == 6 {
                continue;
            }
            let pk = num_traits::pow(two.clone(), k);
            let num = (&pk - &p6).magnitude().clone();
            exact *= BigRational::new(BigInt::from(num), &pk + &p6);
        }
        let want = exact.to_f64().unwrap();
        assert!((got - want).abs() / want < 1e-13, "{got} vs {want}");
    }

    #[test]
    fn lacunary_example_holds() {
        let fr: Vec<Complex64> = (1..=20).map(|n| c(2f64.powi(n), 1.0 / n as f64)).collect();
        let r = prop41_check(&fr, 1.0).unwrap();
        assert!(r.hypotheses_hold());
        assert!((r.tail_ratio - 2.0).abs() < 1e-3);
        assert!(r.rows[..15].windows(2).all(|w| w[1].eps_row < w[0].eps_row));
        for row in &r.rows {
            if row.eps_row < 1.0 {
                assert!(1.0 - row.c_n <= row.eps_row + 1e-12);
                assert!(row.cap_c_n - 1.0 <= row.eps_row + 1e-12);
            }
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("N,eps_row,c_N,C_N,bound_C_over_lambdaN"));
    }

    #[test]
    fn failing_hypotheses() {
        let fr: Vec<Complex64> = (1..=20).map(|n| c(0.0, n as f64)).collect();
        let r = prop41_check(&fr, 1.0).unwrap();
        assert!(!r.lacunary);
        let fr: Vec<Complex64> = (1..=12).map(|n| c(1.0, 1.0) * 3f64.powi(n)).collect();
        let r = prop41_check(&fr, 1.0).unwrap();
        assert!(!r.bounded_imaginary_parts);
        assert!(matches!(prop41_check(&[c(1.0, 0.0), c(0.0, 0.0)], 1.0), Err(Error::ZeroFrequency(2))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn translation_keeps_moduli(
            pts in prop::collection::vec((-5.0f64..5.0, 0.0f64..2.0), 2..6), shift in -20.0f64..20.0, a in 0.5f64..4.0,
        ) {
            let fr: Vec<Complex64> = pts.iter().map(|&(x, y)| c(x, y)).collect();
            prop_assume!(ExponentialFamily::new(a, fr.clone()).is_ok());
            let g0 = chi_gram(&ExponentialFamily::new(a, fr.clone()).unwrap()).unwrap().entries;
            let g1 = chi_gram(&ExponentialFamily::new(a, fr.iter().map(|z| z + shift).collect()).unwrap()).unwrap().entries;
            for (x, y) in g0.iter().zip(g1.iter()) {
                prop_assert!((x.norm() - y.norm()).abs() < 1e-10);
            }
        }

        #[test]
        fn thin_product_in_unit_interval(pts in prop::collection::vec((-5.0f64..5.0, 0.01f64..3.0), 2..8), k in 0usize..8) {
            let fr: Vec<Complex64> = pts.iter().map(|&(x, y)| c(x, y)).collect();
            let n = k % fr.len() + 1;
            prop_assume!(fr.iter().enumerate().all(|(i, z)| !fr[..i].contains(z)));
            let v = thin_product(&fr, n).unwrap();
            prop_assert!(v >= 0.0 && v < 1.0);
        }
    }
}
