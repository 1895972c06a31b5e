//! Interpolation on tabulated data.
//!
//! [`MonotoneCubic`] is the Fritsch–Carlson shape-preserving Hermite cubic,
//! used to seed inversions of increasing maps. [`PanelFn`] is a piecewise
//! Chebyshev interpolant accurate to near machine precision, used where a
//! tabulated function is later differentiated numerically.

use std::sync::Arc;

use thiserror::Error;

use crate::Func;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("abscissae must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("lengths differ: {0} abscissae, {1} ordinates")]
    LengthMismatch(usize, usize),
}

/// Monotone piecewise cubic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, InterpError> {
        let n = x.len();
        if n != y.len() {
            return Err(InterpError::LengthMismatch(n, y.len()));
        }
        if n < 2 {
            return Err(InterpError::TooFewPoints(n));
        }
        if let Some(i) = x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(InterpError::NotIncreasing(i + 1));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    // weighted harmonic mean
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Index `i` with `x[i] <= t < x[i+1]`, clamped to the table.
    pub fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h * h10 * self.d[i] + h01 * self.y[i + 1] + h * h11 * self.d[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Solve `forward(r) = target` for `r` in `[lo, hi]`, where `forward` is
/// strictly increasing with derivative `slope`. Newton steps are accepted only
/// while they stay inside the shrinking bracket; otherwise the bracket is
/// bisected. Stops when the bracket is below `tol·(1 + |r|)`.
pub fn invert_increasing<F, D>(forward: F, slope: D, target: f64, mut lo: f64, mut hi: f64, seed: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut r = if seed > lo && seed < hi { seed } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let value = forward(r) - target;
        if value == 0.0 {
            return r;
        }
        if value > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        if hi - lo <= tol * (1.0 + r.abs()) {
            break;
        }
        let step = value / slope(r);
        let newton = r - step;
        r = if newton > lo && newton < hi && step.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if step.abs() <= 0.25 * tol * (1.0 + r.abs()) {
            break;
        }
    }
    r
}

// ---------------------------------------------------------------------------

const CHEB_DEGREE: usize = 24;
const MAX_SPLITS: usize = 6;

/// Chebyshev interpolant on one panel, stored as values at first-kind nodes
/// and evaluated by the barycentric formula. Endpoints are never sampled.
#[derive(Debug, Clone)]
struct ChebPanel {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebPanel {
    fn fit(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Self {
        let n = CHEB_DEGREE + 1;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for j in 0..n {
            let theta = (2 * j + 1) as f64 * std::f64::consts::PI / (2 * n) as f64;
            nodes.push(0.5 * (a + b) + 0.5 * (b - a) * theta.cos());
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            weights.push(sign * theta.sin());
        }
        let values = nodes.iter().map(|&t| f(t)).collect();
        Self {
            a,
            b,
            nodes,
            values,
            weights,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&x, &v), &w) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let diff = t - x;
            if diff == 0.0 {
                return v;
            }
            let c = w / diff;
            num += c * v;
            den += c;
        }
        num / den
    }

    fn scale(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone)]
enum Piece {
    Cheb(ChebPanel),
    /// Panel where no polynomial met the tolerance; evaluated directly.
    Direct { a: f64, b: f64 },
}

impl Piece {
    fn bounds(&self) -> (f64, f64) {
        match self {
            Piece::Cheb(p) => (p.a, p.b),
            Piece::Direct { a, b } => (*a, *b),
        }
    }
}

/// Piecewise Chebyshev tabulation of an expensive smooth function.
///
/// Each panel is validated against direct evaluation at off-node points and
/// bisected until the deviation is below `tol·(1 + panel scale)`. Outside the
/// tabulated range, and on panels that never validate, the original function
/// is called.
#[derive(Clone)]
pub struct PanelFn {
    pieces: Vec<Piece>,
    direct: Func,
    lo: f64,
    hi: f64,
    max_deviation: f64,
}

impl std::fmt::Debug for PanelFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PanelFn")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("panels", &self.pieces.len())
            .field("direct_panels", &self.direct_panels())
            .field("max_deviation", &self.max_deviation)
            .finish()
    }
}

impl PanelFn {
    /// Tabulate `f` on the panels delimited by `breaks` (strictly increasing).
    pub fn build(f: Func, breaks: &[f64], tol: f64) -> Self {
        let mut pieces = Vec::new();
        let mut max_deviation = 0.0f64;
        for w in breaks.windows(2) {
            Self::fit_recursive(&f, w[0], w[1], tol, 0, &mut pieces, &mut max_deviation);
        }
        Self {
            pieces,
            lo: breaks[0],
            hi: breaks[breaks.len() - 1],
            direct: f,
            max_deviation,
        }
    }

    fn fit_recursive(
        f: &Func,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
        out: &mut Vec<Piece>,
        max_dev: &mut f64,
    ) {
        let panel = ChebPanel::fit(f.as_ref(), a, b);
        let scale = panel.scale();
        let mut deviation = 0.0f64;
        for frac in [0.013, 0.31, 0.5, 0.77, 0.991] {
            let t = a + frac * (b - a);
            let d = (panel.eval(t) - f(t)).abs();
            deviation = deviation.max(if d.is_nan() { f64::INFINITY } else { d });
        }
        if deviation <= tol * (1.0 + scale) {
            *max_dev = max_dev.max(deviation / (1.0 + scale));
            out.push(Piece::Cheb(panel));
        } else if depth >= MAX_SPLITS {
            out.push(Piece::Direct { a, b });
        } else {
            let mid = 0.5 * (a + b);
            Self::fit_recursive(f, a, mid, tol, depth + 1, out, max_dev);
            Self::fit_recursive(f, mid, b, tol, depth + 1, out, max_dev);
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < self.lo || t > self.hi {
            return (self.direct)(t);
        }
        let idx = self.pieces.partition_point(|p| p.bounds().1 < t);
        match self.pieces.get(idx) {
            Some(Piece::Cheb(p)) => p.eval(t),
            _ => (self.direct)(t),
        }
    }

    /// Largest validation deviation seen on an accepted panel, relative to
    /// `1 + panel scale`.
    pub fn max_deviation(&self) -> f64 {
        self.max_deviation
    }

    pub fn direct_panels(&self) -> usize {
        self.pieces
            .iter()
            .filter(|p| matches!(p, Piece::Direct { .. }))
            .count()
    }

    pub fn into_func(self) -> Func {
        Arc::new(move |t| self.eval(t))
    }
}

/// Log-spaced breakpoints on `[lo, 1]` followed by unit panels up to `hi`.
pub fn standard_breaks(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let mut out = Vec::new();
    if lo < 1.0 {
        let decades = (1.0 / lo).log10();
        let n = (decades * per_decade as f64).ceil().max(1.0) as usize;
        for i in 0..n {
            out.push(lo * 10f64.powf(decades * i as f64 / n as f64));
        }
    }
    let mut r = lo.max(1.0);
    while r < hi {
        out.push(r);
        r += 1.0;
    }
    out.push(hi);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_cubic_preserves_monotonicity_and_nodes() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|t| t.powi(3) / (1.0 + t)).collect();
        let m = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((m.eval(*xi) - yi).abs() < 1e-12);
        }
        let mut prev = m.eval(0.0);
        for i in 1..1000 {
            let v = m.eval(i as f64 * 0.0095);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn monotone_cubic_rejects_bad_input() {
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn inversion_hits_target() {
        let f = |r: f64| r + r.sin() * 0.5;
        let d = |r: f64| 1.0 + 0.5 * r.cos();
        let r = invert_increasing(f, d, 3.0, 0.0, 10.0, 2.0, 1e-14);
        assert!((f(r) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn panels_reproduce_smooth_function() {
        let f: Func = Arc::new(|t: f64| (t * 1.3).sin() * (-0.1 * t).exp() + t.sqrt());
        let p = PanelFn::build(f.clone(), &standard_breaks(1e-4, 20.0, 4), 1e-13);
        for i in 1..2000 {
            let t = i as f64 * 0.01;
            assert!((p.eval(t) - f(t)).abs() < 1e-12, "t = {t}");
        }
        assert_eq!(p.direct_panels(), 0);
        // outside the table
        assert_eq!(p.eval(25.0), f(25.0));
    }
}
