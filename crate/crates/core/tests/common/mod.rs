//! Samplers and independent oracles shared by the integration tests.
#![allow(dead_code)]

use aobkit_core::carleson::CarlesonMeasure;
use aobkit_core::linalg::CMatrix;
use aobkit_core::SchurFunction;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_zeros(rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex64> {
    (0..k).map(|_| c(rng.gen_range(-3.0..3.0), rng.gen_range(0.2..2.0))).collect()
}

/// Finite Blaschke product (1..=3 zeros) times e^{iaz}, a ∈ [0, 2).
pub fn random_meromorphic_inner(rng: &mut ChaCha8Rng) -> SchurFunction {
    let k = rng.gen_range(1..=3);
    let a = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.1..2.0) };
    SchurFunction::product(vec![
        SchurFunction::blaschke(random_zeros(rng, k)).unwrap(),
        SchurFunction::exp_inner(a).unwrap(),
    ])
}

/// Inner factor times an optional outer factor and an optional contractive constant.
pub fn random_schur(rng: &mut ChaCha8Rng) -> SchurFunction {
    let mut factors = vec![random_meromorphic_inner(rng)];
    if rng.gen_bool(0.5) {
        let x0 = rng.gen_range(-3.0..2.0);
        let w = rng.gen_range(0.5..3.0);
        let depth = -rng.gen_range(0.1..2.0);
        factors.push(SchurFunction::outer(vec![x0, x0 + w / 2.0, x0 + w], vec![0.0, depth, 0.0]).unwrap());
    }
    if rng.gen_bool(0.3) {
        factors.push(SchurFunction::constant(Complex64::from_polar(rng.gen_range(0.3..1.0), rng.gen_range(0.0..6.0))).unwrap());
    }
    SchurFunction::product(factors)
}

pub fn random_interior(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.gen_range(-4.0..4.0), rng.gen_range(0.2..3.0))
}

/// `n` random unit vectors in ℂ^m as columns.
pub fn random_unit_columns(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMatrix {
    let mut v = CMatrix::from_fn(m, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        col /= Complex64::new(norm, 0.0);
    }
    v
}

/// Perturbs every column by a random vector of norm ≤ `size`.
pub fn perturb_columns(rng: &mut ChaCha8Rng, v: &CMatrix, size: f64) -> CMatrix {
    let mut out = v.clone();
    for mut col in out.column_iter_mut() {
        for e in col.iter_mut() {
            *e += c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (size / (v.nrows() as f64).sqrt() / 2f64.sqrt());
        }
    }
    out
}

pub fn random_measure(rng: &mut ChaCha8Rng) -> CarlesonMeasure {
    let na = rng.gen_range(1..=12);
    let ns = rng.gen_range(0..=4);
    let atoms = (0..na).map(|_| (c(rng.gen_range(-5.0..5.0), rng.gen_range(0.01..3.0)), rng.gen_range(0.05..2.0))).collect();
    let segments = (0..ns)
        .map(|_| {
            let p = c(rng.gen_range(-5.0..5.0), rng.gen_range(0.0..3.0));
            let q = c(rng.gen_range(-5.0..5.0), rng.gen_range(0.0..3.0));
            (p, q)
        })
        .collect();
    CarlesonMeasure::new(atoms, segments).unwrap()
}

/// Length of the part of segment pq inside [x0, x1] × [0, top], by parametric slab clipping.
fn slab_clip(p: Complex64, q: Complex64, x0: f64, x1: f64, top: f64) -> f64 {
    let d = q - p;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (delta, lo, hi, start) in [(d.re, x0, x1, p.re), (d.im, 0.0, top, p.im)] {
        if delta == 0.0 {
            if start < lo || start > hi {
                return 0.0;
            }
        } else {
            let (mut a, mut b) = ((lo - start) / delta, (hi - start) / delta);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
    }
    if t1 <= t0 {
        0.0
    } else {
        (t1 - t0) * d.norm()
    }
}

fn square_ratio(m: &CarlesonMeasure, x: f64, h: f64) -> f64 {
    let mut mass = 0.0;
    for &(p, w) in m.atoms() {
        if p.re >= x && p.re <= x + h && p.im <= h {
            mass += w;
        }
    }
    for &(p, q) in m.segments() {
        mass += slab_clip(p, q, x, x + h, h);
    }
    mass / h
}

/// Brute-force sup of ν(S)/h: 100×100 lattice over (x, h), then zoomed local refinement.
pub fn carleson_lattice(m: &CarlesonMeasure) -> f64 {
    let mut xs = Vec::new();
    let mut hs = Vec::new();
    for &(p, _) in m.atoms() {
        xs.push(p.re);
        hs.push(p.im);
    }
    for &(p, q) in m.segments() {
        xs.extend([p.re, q.re]);
        hs.extend([p.im, q.im]);
    }
    let xmin = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hmax = hs.iter().copied().fold(0.0, f64::max).max(xmax - xmin).max(1e-3);
    let (x_lo, x_hi) = (xmin - 2.0 * hmax, xmax);
    let k = 100;
    let mut cands = Vec::with_capacity(k * k);
    for i in 0..=k {
        for j in 1..=k {
            let x = x_lo + (x_hi - x_lo) * i as f64 / k as f64;
            let h = 2.0 * hmax * (j as f64 / k as f64).powi(2);
            cands.push((square_ratio(m, x, h), x, h));
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    // also seed from every atom placed on the left edge and on the top edge
    for &(p, _) in m.atoms() {
        cands.push((square_ratio(m, p.re, p.im), p.re, p.im));
    }
    let mut best = 0.0f64;
    let seeds: Vec<_> = cands.iter().take(10).chain(cands.iter().skip(cands.len() - m.atoms().len())).copied().collect();
    for (r0, x0, h0) in seeds {
        let (mut bx, mut bh, mut br) = (x0, h0, r0);
        let mut wx = (x_hi - x_lo) / k as f64;
        let mut wh = h0.max(1e-6);
        for _ in 0..30 {
            let (cx, ch) = (bx, bh);
            for i in -10..=10 {
                for j in -10..=10 {
                    let x = cx + wx * i as f64 / 10.0;
                    let h = ch + wh * j as f64 / 10.0;
                    if h <= 0.0 {
                        continue;
                    }
                    let r = square_ratio(m, x, h);
                    if r > br {
                        (br, bx, bh) = (r, x, h);
                    }
                }
            }
            wx *= 0.5;
            wh *= 0.5;
        }
        best = best.max(br);
    }
    best
}

/// Composite Simpson rule on [a, b] with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, panels: usize) -> Complex64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + k as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// w_p(x + iy) for b ≡ 0 by the trapezoid rule after t = x + y·tan θ (spectrally accurate here).
pub fn zero_symbol_weight_trapezoid(y: f64, p: f64, nodes: usize) -> f64 {
    let q = p / (p - 1.0);
    let h = std::f64::consts::PI / nodes as f64;
    let mut acc = 0.0;
    for k in 1..nodes {
        let th = -std::f64::consts::FRAC_PI_2 + k as f64 * h;
        let t = y * th.tan();
        let k_abs = 1.0 / (2.0 * std::f64::consts::PI * (t * t + y * y).sqrt());
        acc += k_abs.powf(2.0 * q) * y / th.cos().powi(2);
    }
    (acc * h).powf(1.0 / q).powf(-p / (p + 1.0))
}
