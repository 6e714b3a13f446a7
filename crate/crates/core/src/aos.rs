//! Finite-dimensional diagnostics for vector families: tail Riesz bounds,
//! row defects, frame constants, biorthogonals and perturbation checks.
//!
//! Indices `N` are 1-based. Gram matrices use `G[n][p] = ⟨x_p, x_n⟩ = x_n^* x_p`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::quad::pairwise_sum;

/// Minimum head Gram eigenvalue before the head is declared dependent.
pub const HEAD_RANK_TOL: f64 = 1e-10;
/// Gram matrices with smaller minimum eigenvalue are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum VectorFamily {
    /// Columns are the vectors in an m-dimensional coordinate space.
    Coordinates(CMatrix),
    /// Hermitian PSD Gram matrix only.
    GramOnly(CMatrix),
}

impl VectorFamily {
    pub fn len(&self) -> usize {
        match self {
            VectorFamily::Coordinates(v) => v.ncols(),
            VectorFamily::GramOnly(g) => g.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gram(&self) -> CMatrix {
        match self {
            VectorFamily::Coordinates(v) => v.adjoint() * v,
            VectorFamily::GramOnly(g) => g.clone(),
        }
    }

    /// Coordinates, recovering them from the Gram matrix by the PSD square root if needed.
    pub fn coordinates(&self) -> Result<CMatrix> {
        match self {
            VectorFamily::Coordinates(v) => Ok(v.clone()),
            VectorFamily::GramOnly(g) => linalg::psd_factor(g),
        }
    }

    /// True when every diagonal Gram entry is 1 within 1e-12.
    pub fn is_normalized(&self) -> bool {
        let g = self.gram();
        (0..g.nrows()).all(|i| (g[(i, i)] - Complex64::new(1.0, 0.0)).norm() <= 1e-12)
    }
}

fn check_index(g: &CMatrix, n_index: usize) -> Result<usize> {
    let len = g.nrows();
    if n_index == 0 || n_index > len {
        return Err(Error::IndexOutOfRange { index: n_index, len });
    }
    Ok(n_index - 1)
}

/// (c_N, C_N): extremal eigenvalues of the trailing principal submatrix `G[N.., N..]`.
pub fn tail_bounds(g: &CMatrix, n_index: usize) -> Result<(f64, f64)> {
    linalg::ensure_square(g)?;
    let start = check_index(g, n_index)?;
    linalg::psd_extremes(&linalg::trailing(g, start))
}

/// (ε_N^row, rowL2): `sup_{n≥N} Σ_{p≥N, p≠n} |Γ_{n,p}|` and, for each n ≥ N,
/// `Σ_{p≠n} |Γ_{n,p}|²` over the whole truncation.
pub fn row_defects(g: &CMatrix, n_index: usize) -> Result<(f64, Vec<f64>)> {
    linalg::ensure_square(g)?;
    let start = check_index(g, n_index)?;
    let len = g.nrows();
    let mut eps = 0.0f64;
    let mut l2 = Vec::with_capacity(len - start);
    let mut buf = Vec::with_capacity(len);
    for n in start..len {
        buf.clear();
        buf.extend((start..len).filter(|&p| p != n).map(|p| g[(n, p)].norm()));
        eps = eps.max(pairwise_sum(&buf));
        buf.clear();
        buf.extend((0..len).filter(|&p| p != n).map(|p| g[(n, p)].norm_sqr()));
        l2.push(pairwise_sum(&buf));
    }
    Ok((eps, l2))
}

/// ‖G[N..,N..] − I‖, the tail distance from orthonormality.
pub fn tail_identity_defect(g: &CMatrix, n_index: usize) -> Result<f64> {
    let start = check_index(g, n_index)?;
    let t = linalg::trailing(g, start);
    let k = t.nrows();
    Ok(linalg::spectral_norm(&(t - CMatrix::identity(k, k))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub n: usize,
    pub c_n: f64,
    pub cap_c_n: f64,
    pub eps_row: f64,
    pub max_row_l2: f64,
}

/// Tail bounds and row defects for a range of N, with the truncation size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundsReport {
    pub truncation: usize,
    pub rows: Vec<TailRow>,
}

impl TailBoundsReport {
    pub fn compute(g: &CMatrix, range: std::ops::RangeInclusive<usize>) -> Result<Self> {
        linalg::ensure_hermitian(g)?;
        let mut rows = Vec::new();
        for n in range {
            let (c, cc) = tail_bounds(g, n)?;
            let (eps, l2) = row_defects(g, n)?;
            let max_l2 = l2.iter().copied().fold(0.0, f64::max);
            rows.push(TailRow { n, c_n: c, cap_c_n: cc, eps_row: eps, max_row_l2: max_l2 });
        }
        Ok(Self { truncation: g.nrows(), rows })
    }

    /// Count of adjacent-N pairs where c_N decreases or C_N increases beyond 1e-12.
    pub fn interlacing_violations(&self) -> usize {
        self.rows
            .windows(2)
            .filter(|w| w[1].c_n < w[0].c_n - 1e-12 || w[1].cap_c_n > w[0].cap_c_n + 1e-12)
            .count()
    }

    /// CSV columns `N, c_N, C_N, eps_row, max_rowL2`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["N", "c_N", "C_N", "eps_row", "max_rowL2"])?;
        for r in &self.rows {
            wr.write_record([
                r.n.to_string(),
                format!("{:.17e}", r.c_n),
                format!("{:.17e}", r.cap_c_n),
                format!("{:.17e}", r.eps_row),
                format!("{:.17e}", r.max_row_l2),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Extremes of `Σ_{n≥N} |⟨f, x_n⟩|²` over unit `f` in `span(X) ⊖ span(x_1..x_{N−1})`.
pub fn frame_constants(family: &VectorFamily, n_index: usize) -> Result<(f64, f64)> {
    let v = family.coordinates()?;
    let len = v.ncols();
    if n_index == 0 || n_index > len {
        return Err(Error::IndexOutOfRange { index: n_index, len });
    }
    let start = n_index - 1;
    let tail = v.columns(start, len - start).into_owned();
    let projected = if start == 0 {
        tail.clone()
    } else {
        let head = v.columns(0, start).into_owned();
        let hg = head.adjoint() * &head;
        let lo = linalg::hermitian_eigenvalues(&hg)[0];
        if lo < HEAD_RANK_TOL {
            return Err(Error::DegenerateHead(lo));
        }
        let hinv = linalg::hermitian_pd_inverse(&hg, 0.0)?;
        &tail - &head * (hinv * (head.adjoint() * &tail))
    };
    let (vals, u) = linalg::hermitian_eigen(&(projected.adjoint() * &projected));
    let top = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 1e-10 * top.max(1e-300)).collect();
    if keep.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut q = CMatrix::zeros(v.nrows(), keep.len());
    for (j, &k) in keep.iter().enumerate() {
        let col = &projected * u.column(k) / Complex64::new(vals[k].sqrt(), 0.0);
        q.set_column(j, &col);
    }
    let c = tail.adjoint() * q;
    let s = c.adjoint() * c;
    let ev = linalg::hermitian_eigenvalues(&s);
    Ok((ev[0], ev[ev.len() - 1]))
}

/// Coefficients `C` with `x_n* = Σ_k C[k][n] x_k`, so that `⟨x_ℓ, x_n*⟩ = δ_{nℓ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthogonalSystem {
    pub coefficients: CMatrix,
    pub duality_residual: f64,
}

pub fn biorthogonal(family: &VectorFamily) -> Result<BiorthogonalSystem> {
    let g = family.gram();
    let c = linalg::hermitian_pd_inverse(&g, SINGULAR_TOL)?;
    let d = c.adjoint() * &g;
    let n = g.nrows();
    let residual = (d - CMatrix::identity(n, n)).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    Ok(BiorthogonalSystem { coefficients: c, duality_residual: residual })
}

fn common_coordinates(x: &VectorFamily, y: &VectorFamily) -> Result<(CMatrix, CMatrix)> {
    match (x, y) {
        (VectorFamily::Coordinates(a), VectorFamily::Coordinates(b)) => {
            if a.shape() != b.shape() {
                return Err(Error::DimensionMismatch(format!(
                    "families have shapes {:?} and {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
            Ok((a.clone(), b.clone()))
        }
        _ => Err(Error::DimensionMismatch(
            "perturbation checks need both families in common coordinates".into(),
        )),
    }
}

/// ε_N: top eigenvalue of `D_N D_N^*`, `D_N` the synthesis of `(x_n − x'_n)_{n≥N}`.
pub fn perturbation_defect(x: &VectorFamily, y: &VectorFamily, n_index: usize) -> Result<f64> {
    let (a, b) = common_coordinates(x, y)?;
    let len = a.ncols();
    if n_index == 0 || n_index > len {
        return Err(Error::IndexOutOfRange { index: n_index, len });
    }
    let d = (a - b).columns(n_index - 1, len - n_index + 1).into_owned();
    let s = linalg::spectral_norm(&d);
    Ok(s * s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormBudget {
    pub sum: f64,
    pub threshold: f64,
    pub margin: f64,
    pub verdict: bool,
}

/// Tests `Σ‖x_n − x'_n‖² < λ_min(G_X)^{1/2}`.
pub fn norm_budget_check(x: &VectorFamily, y: &VectorFamily) -> Result<NormBudget> {
    let (a, b) = common_coordinates(x, y)?;
    let g = a.adjoint() * &a;
    let lo = linalg::hermitian_eigenvalues(&g).first().copied().unwrap_or(0.0);
    if lo <= SINGULAR_TOL {
        return Err(Error::SingularGram(lo));
    }
    let d = a - b;
    let per: Vec<f64> = (0..d.ncols()).map(|j| d.column(j).norm_squared()).collect();
    let sum = pairwise_sum(&per);
    let threshold = lo.sqrt();
    Ok(NormBudget { sum, threshold, margin: threshold - sum, verdict: sum < threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vectors(m: usize, n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(m, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn normalize_columns(v: &mut CMatrix) {
        for j in 0..v.ncols() {
            let nrm = v.column(j).norm();
            v.column_mut(j).unscale_mut(nrm);
        }
    }

    fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> nalgebra::DVector<Complex64> {
        let v = nalgebra::DVector::from_fn(dim, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = v.norm();
        v / c(n, 0.0)
    }

    #[test]
    fn identity_bounds() {
        let g = CMatrix::identity(8, 8);
        for n in 1..=8 {
            assert_eq!(tail_bounds(&g, n).unwrap(), (1.0, 1.0));
        }
        let (eps, l2) = row_defects(&g, 1).unwrap();
        assert_eq!(eps, 0.0);
        assert!(l2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_by_two_closed_form() {
        let rho = c(0.3, -0.4);
        let g = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), rho, rho.conj(), c(1.0, 0.0)]);
        let (lo, hi) = tail_bounds(&g, 1).unwrap();
        assert!((lo - 0.5).abs() < 1e-14 && (hi - 1.5).abs() < 1e-14);
        assert!(matches!(tail_bounds(&g, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn constant_offdiag_row_defect() {
        let rho = 0.2;
        let g = CMatrix::from_fn(3, 3, |i, j| if i == j { c(1.0, 0.0) } else { c(rho, 0.0) });
        let (eps, l2) = row_defects(&g, 1).unwrap();
        assert!((eps - 2.0 * rho).abs() < 1e-15);
        assert!(l2.iter().all(|&v| (v - 2.0 * rho * rho).abs() < 1e-15));
    }

    #[test]
    fn rayleigh_sampling_stays_inside_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut v = random_vectors(12, 12, &mut rng);
        normalize_columns(&mut v);
        let g = v.adjoint() * &v;
        let (lo, hi) = tail_bounds(&g, 1).unwrap();
        let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
        for _ in 0..100_000 {
            let u = random_unit(12, &mut rng);
            let r = (u.adjoint() * &g * &u)[(0, 0)].re;
            smin = smin.min(r);
            smax = smax.max(r);
        }
        assert!(smin >= lo - 1e-6 && smax <= hi + 1e-6);
    }

    #[test]
    fn frame_constants_orthonormal_and_head_free() {
        let fam = VectorFamily::Coordinates(CMatrix::identity(6, 6));
        assert_eq!(frame_constants(&fam, 3).unwrap(), (1.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut v = random_vectors(7, 7, &mut rng);
        normalize_columns(&mut v);
        let fam = VectorFamily::Coordinates(v.clone());
        let (a, b) = frame_constants(&fam, 1).unwrap();
        let (c1, cc1) = tail_bounds(&(v.adjoint() * &v), 1).unwrap();
        assert!((a - c1).abs() < 1e-10 && (b - cc1).abs() < 1e-10);
    }

    #[test]
    fn frame_constants_reject_dependent_head() {
        let mut v = CMatrix::identity(4, 4);
        let col = v.column(0).into_owned();
        v.set_column(1, &col);
        assert!(matches!(frame_constants(&VectorFamily::Coordinates(v), 3), Err(Error::DegenerateHead(_))));
    }

    /// Brute-force frame constants: random directions in the complement plus
    /// projected power steps, using only inner products with the vectors.
    fn frame_oracle(v: &CMatrix, n_index: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let m = v.nrows();
        let start = n_index - 1;
        // Gram–Schmidt basis of the head span
        let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::new();
        for j in 0..start {
            let mut w = v.column(j).into_owned();
            for q in &basis {
                let proj = q.dotc(&w);
                w -= q * proj;
            }
            let n = w.norm();
            basis.push(w / c(n, 0.0));
        }
        let project = |mut f: nalgebra::DVector<Complex64>| {
            for q in &basis {
                let proj = q.dotc(&f);
                f -= q * proj;
            }
            let n = f.norm();
            f / c(n, 0.0)
        };
        let form = |f: &nalgebra::DVector<Complex64>| -> f64 {
            (start..v.ncols()).map(|k| v.column(k).dotc(f).norm_sqr()).sum()
        };
        let grad = |f: &nalgebra::DVector<Complex64>| {
            let mut g = nalgebra::DVector::zeros(m);
            for k in start..v.ncols() {
                let col = v.column(k);
                g += col * col.dotc(f);
            }
            g
        };
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let (mut best_lo, mut best_hi) = (project(random_unit(m, rng)), project(random_unit(m, rng)));
        for _ in 0..100_000 {
            let f = project(random_unit(m, rng));
            let r = form(&f);
            if r < lo {
                lo = r;
                best_lo = f.clone();
            }
            if r > hi {
                hi = r;
                best_hi = f;
            }
        }
        let shift = 1.0 + hi;
        for _ in 0..2000 {
            best_hi = project(grad(&best_hi));
            let g = grad(&best_lo);
            best_lo = project(&best_lo * c(shift, 0.0) - g);
        }
        (lo.min(form(&best_lo)), hi.max(form(&best_hi)))
    }

    #[test]
    fn frame_constants_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut v = random_vectors(10, 10, &mut rng);
        normalize_columns(&mut v);
        let fam = VectorFamily::Coordinates(v.clone());
        let (a, b) = frame_constants(&fam, 4).unwrap();
        let (oa, ob) = frame_oracle(&v, 4, &mut rng);
        assert!((a - oa).abs() < 1e-4, "{a} vs {oa}");
        assert!((b - ob).abs() < 1e-4, "{b} vs {ob}");
    }

    #[test]
    fn gram_only_matches_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v = random_vectors(6, 6, &mut rng);
        normalize_columns(&mut v);
        let a = frame_constants(&VectorFamily::Coordinates(v.clone()), 3).unwrap();
        let b = frame_constants(&VectorFamily::GramOnly(v.adjoint() * &v), 3).unwrap();
        assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10);
    }

    #[test]
    fn biorthogonal_examples() {
        let id = biorthogonal(&VectorFamily::Coordinates(CMatrix::identity(5, 5))).unwrap();
        assert_eq!(id.coefficients, CMatrix::identity(5, 5));
        let rho = 0.6;
        let g = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(rho, 0.0), c(rho, 0.0), c(1.0, 0.0)]);
        let b = biorthogonal(&VectorFamily::GramOnly(g)).unwrap();
        let s = 1.0 / (1.0 - rho * rho);
        assert!((b.coefficients[(0, 0)] - c(s, 0.0)).norm() < 1e-14);
        assert!((b.coefficients[(0, 1)] - c(-rho * s, 0.0)).norm() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = random_vectors(9, 9, &mut rng);
        let fam = VectorFamily::Coordinates(v.clone());
        let bo = biorthogonal(&fam).unwrap();
        assert!(bo.duality_residual <= 1e-8);
        // independent check in coordinates
        let duals = &v * &bo.coefficients;
        let pairing = duals.adjoint() * &v;
        assert!((pairing - CMatrix::identity(9, 9)).iter().all(|z| z.norm() < 1e-8));
        let sing = CMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(matches!(biorthogonal(&VectorFamily::GramOnly(sing)), Err(Error::SingularGram(_))));
    }

    #[test]
    fn perturbation_examples() {
        let x = VectorFamily::Coordinates(CMatrix::identity(4, 4));
        assert_eq!(perturbation_defect(&x, &x, 1).unwrap(), 0.0);
        let mut moved = CMatrix::identity(4, 4);
        moved[(1, 0)] = c(0.0, 0.7);
        let y = VectorFamily::Coordinates(moved);
        assert!((perturbation_defect(&x, &y, 1).unwrap() - 0.49).abs() < 1e-14);
        assert_eq!(perturbation_defect(&x, &y, 2).unwrap(), 0.0);
        let z = VectorFamily::Coordinates(CMatrix::identity(3, 3));
        assert!(matches!(perturbation_defect(&x, &z, 1), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn norm_budget_examples() {
        let x = VectorFamily::Coordinates(CMatrix::identity(3, 3));
        let nb = norm_budget_check(&x, &x).unwrap();
        assert!(nb.verdict && nb.sum == 0.0 && (nb.threshold - 1.0).abs() < 1e-14);
        let mut moved = CMatrix::identity(3, 3);
        moved[(0, 0)] = c(-0.1, 0.0);
        let nb = norm_budget_check(&x, &VectorFamily::Coordinates(moved)).unwrap();
        assert!((nb.sum - 1.21).abs() < 1e-14 && !nb.verdict);
    }

    #[test]
    fn norm_budget_with_prescribed_spectrum() {
        // G = Q diag(0.25, 1, 1.5, 2) Q*, coordinates V = diag(sqrt λ) Q*
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_vectors(4, 4, &mut rng);
        let q = a.qr().q();
        let lam: [f64; 4] = [0.25, 1.0, 1.5, 2.0];
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, lam.iter().map(|l| c(l.sqrt(), 0.0))));
        let v = d * q.adjoint();
        let mut w = v.clone();
        let drift = random_unit(4, &mut rng) * c(0.4f64.sqrt(), 0.0);
        let col = w.column(2) + drift;
        w.set_column(2, &col);
        let nb = norm_budget_check(&VectorFamily::Coordinates(v), &VectorFamily::Coordinates(w)).unwrap();
        assert!((nb.threshold - 0.5).abs() < 1e-12);
        assert!((nb.sum - 0.4).abs() < 1e-12 && nb.verdict);
    }

    fn arb_family() -> impl Strategy<Value = CMatrix> {
        (2usize..10, any::<u64>()).prop_map(|(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = random_vectors(n + 1, n, &mut rng);
            normalize_columns(&mut v);
            v
        })
    }

    proptest! {
        #[test]
        fn interlacing_holds(v in arb_family()) {
            let g = v.adjoint() * &v;
            let rep = TailBoundsReport::compute(&g, 1..=g.nrows()).unwrap();
            prop_assert_eq!(rep.interlacing_violations(), 0);
        }

        #[test]
        fn row_defect_sandwich(v in arb_family()) {
            let g = v.adjoint() * &v;
            for n in 1..=g.nrows() {
                let (c, cc) = tail_bounds(&g, n).unwrap();
                let (eps, _) = row_defects(&g, n).unwrap();
                if eps < 1.0 {
                    prop_assert!(1.0 - eps <= c + 1e-12 && cc <= 1.0 + eps + 1e-12);
                }
            }
        }

        #[test]
        fn frame_constants_at_one_equal_tail_bounds(v in arb_family()) {
            let g = v.adjoint() * &v;
            let (a, b) = frame_constants(&VectorFamily::Coordinates(v), 1).unwrap();
            let (c, cc) = tail_bounds(&g, 1).unwrap();
            prop_assert!((a - c).abs() <= 1e-10 && (b - cc).abs() <= 1e-10);
        }

        #[test]
        fn perturbation_symmetric(v in arb_family(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = &v + random_vectors(v.nrows(), v.ncols(), &mut rng) * c(0.05, 0.0);
            let x = VectorFamily::Coordinates(v.clone());
            let y = VectorFamily::Coordinates(w);
            let a = perturbation_defect(&x, &y, 1).unwrap();
            let b = perturbation_defect(&y, &x, 1).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            prop_assert!(a > 0.0);
            prop_assert_eq!(perturbation_defect(&x, &x, 1).unwrap(), 0.0);
        }
    }
}
