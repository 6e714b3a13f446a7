//! Carleson constants of finite measures made of atoms and line segments.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point masses plus segments carrying arclength measure, all in the closed upper half-plane.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "MeasureSpec", into = "MeasureSpec")]
pub struct CarlesonMeasure {
    atoms: Vec<(Complex64, f64)>,
    segments: Vec<(Complex64, Complex64)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<[f64; 3]>,
    #[serde(default)]
    pub segments: Vec<[f64; 4]>,
}

impl TryFrom<MeasureSpec> for CarlesonMeasure {
    type Error = Error;

    fn try_from(s: MeasureSpec) -> Result<Self> {
        CarlesonMeasure::new(
            s.atoms.iter().map(|a| (Complex64::new(a[0], a[1]), a[2])).collect(),
            s.segments
                .iter()
                .map(|g| (Complex64::new(g[0], g[1]), Complex64::new(g[2], g[3])))
                .collect(),
        )
    }
}

impl From<CarlesonMeasure> for MeasureSpec {
    fn from(m: CarlesonMeasure) -> Self {
        MeasureSpec {
            atoms: m.atoms.iter().map(|(p, w)| [p.re, p.im, *w]).collect(),
            segments: m.segments.iter().map(|(p, q)| [p.re, p.im, q.re, q.im]).collect(),
        }
    }
}

impl CarlesonMeasure {
    pub fn new(atoms: Vec<(Complex64, f64)>, segments: Vec<(Complex64, Complex64)>) -> Result<Self> {
        let bad = |z: &Complex64| !(z.im >= 0.0) || !z.re.is_finite() || !z.im.is_finite();
        for (p, m) in &atoms {
            if bad(p) || !(*m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "atom at {}{:+}i with mass {m} is not admissible",
                    p.re, p.im
                )));
            }
        }
        for (p, q) in &segments {
            if bad(p) || bad(q) {
                return Err(Error::InvalidParameter("segment endpoints must lie in the closed upper half-plane".into()));
            }
        }
        Ok(Self { atoms, segments })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[(Complex64, f64)] {
        &self.atoms
    }

    pub fn segments(&self) -> &[(Complex64, Complex64)] {
        &self.segments
    }

    pub fn push_atom(&mut self, p: Complex64, mass: f64) -> Result<()> {
        let mut atoms = std::mem::take(&mut self.atoms);
        atoms.push((p, mass));
        *self = Self::new(atoms, std::mem::take(&mut self.segments))?;
        Ok(())
    }

    pub fn push_segment(&mut self, p: Complex64, q: Complex64) -> Result<()> {
        let mut segs = std::mem::take(&mut self.segments);
        segs.push((p, q));
        *self = Self::new(std::mem::take(&mut self.atoms), segs)?;
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.segments.iter().all(|(p, q)| p == q)
    }

    fn scale(&self) -> f64 {
        let mut s = 0.0f64;
        for (p, _) in &self.atoms {
            s = s.max(p.norm());
        }
        for (p, q) in &self.segments {
            s = s.max(p.norm()).max(q.norm());
        }
        s.max(1.0)
    }

    /// ν(S(x, h)) for the closed square `[x, x+h] × [0, h]`; atoms within `tol` of an edge count as inside.
    pub fn square_mass(&self, x: f64, h: f64, tol: f64) -> f64 {
        let mut total = 0.0;
        for (p, m) in &self.atoms {
            if p.re >= x - tol && p.re <= x + h + tol && p.im <= h + tol {
                total += m;
            }
        }
        for &(p, q) in &self.segments {
            total += clipped_length(p, q, x, x + h, h, tol);
        }
        total
    }

    /// C_ν = sup over squares of ν(S)/h; `+∞` when an atom sits on the real line.
    pub fn carleson_constant(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        if self.atoms.iter().any(|(p, _)| p.im == 0.0) {
            return f64::INFINITY;
        }
        let scale = self.scale();
        let tol = 1e-12 * scale;
        let lines = self.arrangement();
        let mut best = 0.0f64;
        let mut eval = |x: f64, h: f64| {
            if h > 0.0 && x.is_finite() && h.is_finite() {
                best = best.max(self.square_mass(x, h, tol) / h);
            }
        };
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                if let Some((x, h)) = lines[i].intersect(&lines[j]) {
                    eval(x, h);
                }
            }
        }
        // cells touching h = 0
        let eta = 1e-9 * scale;
        let floor = Line { a: 0.0, b: 1.0, c: eta };
        let mut xs: Vec<f64> = lines.iter().filter_map(|l| l.intersect(&floor)).map(|(x, _)| x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for w in xs.windows(2) {
            eval(0.5 * (w[0] + w[1]), eta);
        }
        for &x in &xs {
            eval(x, eta);
        }
        best
    }

    /// Lines in the (x, h) plane across which the square's contents change.
    fn arrangement(&self) -> Vec<Line> {
        let mut lines = Vec::new();
        let mut edges = |re: f64, im: f64| {
            lines.push(Line { a: 1.0, b: 0.0, c: re });
            lines.push(Line { a: 1.0, b: 1.0, c: re });
            lines.push(Line { a: 0.0, b: 1.0, c: im });
        };
        for (p, _) in &self.atoms {
            edges(p.re, p.im);
        }
        for &(p, q) in &self.segments {
            edges(p.re, p.im);
            edges(q.re, q.im);
        }
        for &(p, q) in &self.segments {
            let d = q - p;
            if d.re != 0.0 && d.im != 0.0 {
                // square corner (x, h) or (x + h, h) lying on the segment's line
                lines.push(Line { a: d.im, b: -d.re, c: p.re * d.im - p.im * d.re });
                lines.push(Line { a: d.im, b: d.im - d.re, c: p.re * d.im - p.im * d.re });
            }
        }
        lines
    }
}

/// `a·x + b·h = c`.
#[derive(Debug, Clone, Copy)]
struct Line {
    a: f64,
    b: f64,
    c: f64,
}

impl Line {
    fn intersect(&self, o: &Line) -> Option<(f64, f64)> {
        let det = self.a * o.b - self.b * o.a;
        let norm = (self.a.abs() + self.b.abs()) * (o.a.abs() + o.b.abs());
        if det.abs() <= 1e-14 * norm {
            return None;
        }
        let x = (self.c * o.b - self.b * o.c) / det;
        let h = (self.a * o.c - self.c * o.a) / det;
        Some((x, h))
    }
}

/// Length of the part of segment `[p, q]` inside `[x0, x1] × [0, top]`.
///
/// `tol` widens the box only for axis-parallel segments, whose inclusion is all-or-nothing.
pub fn clipped_length(p: Complex64, q: Complex64, x0: f64, x1: f64, top: f64, tol: f64) -> f64 {
    let d = q - p;
    let len = d.norm();
    if len == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if d.re == 0.0 {
        if p.re < x0 - tol || p.re > x1 + tol {
            return 0.0;
        }
    } else {
        let s0 = (x0 - p.re) / d.re;
        let s1 = (x1 - p.re) / d.re;
        lo = lo.max(s0.min(s1));
        hi = hi.min(s0.max(s1));
    }
    if d.im == 0.0 {
        if p.im > top + tol {
            return 0.0;
        }
    } else {
        let s = (top - p.im) / d.im;
        if d.im > 0.0 {
            hi = hi.min(s);
        } else {
            lo = lo.max(s);
        }
    }
    (hi - lo).max(0.0) * len
}
