//! Gauss–Legendre rules and the adaptive integrators built on them.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Order of the panel rule used by the adaptive integrators.
pub const PANEL_ORDER: usize = 16;

/// Values that can be integrated: real or complex scalars.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
///
/// Roots are found by Newton iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[m - 1] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

fn fixed_rule<T: QuadValue>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> T {
    let (x, w) = panel_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = T::zero();
    for (xi, wi) in x.iter().zip(w) {
        acc = acc + f(mid + half * xi) * (wi * half);
    }
    acc
}

/// Tolerances for the adaptive integrators.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_nodes: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-300, max_nodes: 1 << 20 }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn make_panel<T: QuadValue>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> Panel<T> {
    let whole = fixed_rule(f, a, b);
    let m = 0.5 * (a + b);
    let halves = fixed_rule(f, a, m) + fixed_rule(f, m, b);
    Panel { a, b, value: halves, error: (whole - halves).magnitude() }
}

/// Integrates `f` over `[a, b]`, splitting first at the interior `breaks`.
///
/// Panels are bisected in order of decreasing local error estimate until the
/// summed estimate falls below `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate<T: QuadValue>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&c| c > lo && c < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);

    let per_panel = 3 * PANEL_ORDER;
    let mut nodes = 0usize;
    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        if w[1] > w[0] {
            heap.push(make_panel(&f, w[0], w[1]));
            nodes += per_panel;
        }
    }
    let mut total = heap.iter().fold(T::zero(), |v, p| v + p.value);
    let mut err: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        if total.magnitude().is_nan() {
            return Err(Error::QuadratureNotConverged { nodes, estimate: f64::NAN, error: err });
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.magnitude()) {
            // running sums drift; confirm with an exact pass
            total = heap.iter().fold(T::zero(), |v, p| v + p.value);
            err = heap.iter().map(|p| p.error).sum();
            if err <= opts.abs_tol.max(opts.rel_tol * total.magnitude()) {
                return Ok(total * sign);
            }
        }
        if nodes >= opts.max_nodes {
            return Err(Error::QuadratureNotConverged {
                nodes,
                estimate: total.magnitude(),
                error: err,
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return Err(Error::QuadratureNotConverged {
                nodes,
                estimate: total.magnitude(),
                error: err,
            });
        }
        let left = make_panel(&f, worst.a, m);
        let right = make_panel(&f, m, worst.b);
        total = total - worst.value + left.value + right.value;
        err = (err - worst.error + left.error + right.error).max(0.0);
        heap.push(left);
        heap.push(right);
        nodes += 2 * per_panel;
    }
}

/// Integrates `f` over the whole real line through `t = center + scale * tan(theta)`.
///
/// `breaks` are points on the real line where `f` is not smooth.
pub fn integrate_line<T: QuadValue>(
    f: impl Fn(f64) -> T,
    center: f64,
    scale: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<T> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mapped: Vec<f64> = breaks.iter().map(|&t| ((t - center) / scale).atan()).collect();
    integrate(
        |theta: f64| {
            let c = theta.cos();
            let t = center + scale * theta.tan();
            f(t) * (scale / (c * c))
        },
        -half_pi,
        half_pi,
        &mapped,
        opts,
    )
}

/// Integrates `f` over `[t0, +inf)` via `t = t0 + scale * tan(theta)`.
pub fn integrate_half_line<T: QuadValue>(
    f: impl Fn(f64) -> T,
    t0: f64,
    scale: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<T> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mapped: Vec<f64> = breaks
        .iter()
        .filter(|&&t| t > t0)
        .map(|&t| ((t - t0) / scale).atan())
        .collect();
    integrate(
        |theta: f64| {
            let c = theta.cos();
            f(t0 + scale * theta.tan()) * (scale / (c * c))
        },
        0.0,
        half_pi,
        &mapped,
        opts,
    )
}

/// Composite Gauss–Legendre on `[0, 1]` with uniform panels, doubling the
/// panel count until the relative change drops below `rel_tol`.
pub fn composite_doubling<T: QuadValue>(
    f: impl Fn(f64) -> T,
    rel_tol: f64,
    max_nodes: usize,
) -> Result<T> {
    let mut panels = 1usize;
    let mut prev = fixed_rule(&f, 0.0, 1.0);
    loop {
        panels *= 2;
        let h = 1.0 / panels as f64;
        let mut acc = T::zero();
        for k in 0..panels {
            acc = acc + fixed_rule(&f, k as f64 * h, (k + 1) as f64 * h);
        }
        let change = (acc - prev).magnitude();
        if change <= rel_tol * acc.magnitude() || change == 0.0 {
            return Ok(acc);
        }
        if panels * PANEL_ORDER >= max_nodes {
            return Err(Error::QuadratureNotConverged {
                nodes: panels * PANEL_ORDER,
                estimate: acc.magnitude(),
                error: change,
            });
        }
        prev = acc;
    }
}

/// Pairwise (cascade) summation; fixes the summation order for series.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (l, r) = values.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is the highest exactly integrated
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let (x5, _) = gauss_legendre(5);
        assert_eq!(x5[2], 0.0);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let eps = 1e-4;
        let v = integrate(|t: f64| eps / (t * t + eps * eps), -1.0, 1.0, &[], QuadOptions::with_rel_tol(1e-12))
            .unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((v - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let v = integrate(|t: f64| t * t, 1.0, 0.0, &[], QuadOptions::default()).unwrap();
        assert!((v + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn line_integral_of_lorentzian() {
        let v = integrate_line(|t: f64| 1.0 / (1.0 + t * t), 0.0, 1.0, &[], QuadOptions::default()).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-12);
        let h = integrate_half_line(|t: f64| 1.0 / (1.0 + t * t), 0.0, 1.0, &[], QuadOptions::default()).unwrap();
        assert!((h - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn complex_values_integrate() {
        let v: Complex64 = integrate(
            |t: f64| Complex64::new(0.0, t).exp(),
            0.0,
            std::f64::consts::PI,
            &[],
            QuadOptions::default(),
        )
        .unwrap();
        assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn doubling_converges() {
        let v = composite_doubling(|s: f64| (3.0 * s).sin(), 1e-12, 1 << 16).unwrap();
        let exact = (1.0 - 3f64.cos()) / 3.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn node_cap_is_reported() {
        let err = integrate(
            |t: f64| (1.0 / t).sin(),
            1e-9,
            1.0,
            &[],
            QuadOptions { rel_tol: 1e-14, abs_tol: 0.0, max_nodes: 1000 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::QuadratureNotConverged { .. }));
    }

    #[test]
    fn pairwise_sum_is_exact_on_small_integers() {
        let v: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
    }
}
