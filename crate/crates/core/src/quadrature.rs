//! Adaptive Gauss–Kronrod integration on finite and semi-infinite intervals,
//! and the integrability diagnostics used to classify potentials.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default mixed absolute/relative tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_INTERVALS: usize = 4000;
const MAX_TAIL_PIECES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integration did not converge: estimate {value:e} ± {abs_error:e}, worst subinterval [{worst_a}, {worst_b}]")]
    NoConvergence {
        value: f64,
        abs_error: f64,
        worst_a: f64,
        worst_b: f64,
    },
    #[error("integrand is not finite at t = {at}")]
    NonFinite { at: f64 },
    #[error("tail integral from r = {from} does not decay as declared ({detail})")]
    DecayViolation { from: f64, detail: String },
}

/// Integral value with its error estimate and cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    /// Error level below which the rule is limited by rounding.
    floor: f64,
}

/// One 21-point Kronrod panel with the embedded 10-point Gauss estimate.
fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { at: center });
    }
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = (fc * WGK[10]).abs();
    let mut samples = [0.0; 21];
    samples[10] = fc;
    for j in 0..10 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite { at: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite { at: x2 });
        }
        samples[j] = f1;
        samples[20 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((samples[j] - mean).abs() + (samples[20 - j] - mean).abs());
    }
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    Ok(Segment {
        a,
        b,
        value: kronrod * half,
        error: error.max(floor),
        floor,
    })
}

/// Integrate `f` over `[a, b]` to a mixed tolerance `tol·(1 + |I|)`.
///
/// Reversed bounds return the negated integral. Integrable singularities at
/// the endpoints are allowed since the rule never samples them.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadError> {
    integrate_estimate(&f, a, b, tol).map(|e| e.value)
}

pub fn integrate_estimate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Estimate, QuadError> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    if a > b {
        return integrate_estimate(f, b, a, tol).map(|e| Estimate {
            value: -e.value,
            ..e
        });
    }
    let mut segments = vec![kronrod21(f, a, b)?];
    let mut evaluations = 21;
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let floor: f64 = segments.iter().map(|s| s.floor).sum();
        if error <= tol * (1.0 + value.abs()) || error <= 2.0 * floor {
            return Ok(Estimate {
                value,
                abs_error: error,
                evaluations,
            });
        }
        let (worst_idx, worst) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| (x.1.error - x.1.floor).total_cmp(&(y.1.error - y.1.floor)))
            .map(|(i, s)| (i, *s))
            .expect("at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        let resolvable = mid > worst.a && mid < worst.b;
        if segments.len() >= MAX_INTERVALS || !resolvable {
            return Err(QuadError::NoConvergence {
                value,
                abs_error: error,
                worst_a: worst.a,
                worst_b: worst.b,
            });
        }
        let left = kronrod21(f, worst.a, mid)?;
        let right = kronrod21(f, mid, worst.b)?;
        evaluations += 42;
        segments[worst_idx] = left;
        segments.push(right);
    }
}

/// Declared decay of an integrand at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    Exponential,
    /// |f(t)| = O(t^{-p}) with p > 1.
    Power(f64),
}

/// ∫_r^∞ f(t) dt.
///
/// Power decay maps the tail onto `[0, 1)` with `t = r + u/(1-u)`.
/// Exponential decay sums unit-length panels and stops once the geometric
/// remainder bound implied by consecutive panels falls below `tol/10`.
pub fn tail_integral<F: Fn(f64) -> f64>(f: F, r: f64, decay: Decay, tol: f64) -> Result<f64, QuadError> {
    match decay {
        Decay::Power(p) => {
            if p <= 1.0 {
                return Err(QuadError::DecayViolation {
                    from: r,
                    detail: format!("power decay exponent {p} is not integrable"),
                });
            }
            let g = |u: f64| {
                let s = 1.0 - u;
                if s <= f64::EPSILON {
                    // t beyond 1e16·r: the integrand is negligible for p > 2 and
                    // an integrable endpoint singularity otherwise
                    return 0.0;
                }
                f(r + u / s) / (s * s)
            };
            integrate(g, 0.0, 1.0, tol).map_err(|e| QuadError::DecayViolation {
                from: r,
                detail: e.to_string(),
            })
        }
        Decay::Exponential => {
            let mut sum = 0.0;
            let mut previous = f64::NAN;
            for k in 0..MAX_TAIL_PIECES {
                let a = r + k as f64;
                let piece = integrate(&f, a, a + 1.0, 0.1 * tol)?;
                sum += piece;
                let size = piece.abs();
                if size == 0.0 && previous == 0.0 {
                    return Ok(sum);
                }
                if previous.is_finite() && previous > 0.0 {
                    let ratio = size / previous;
                    if ratio < 1.0 {
                        let remainder = size * ratio / (1.0 - ratio);
                        if remainder < 0.1 * tol * (1.0 + sum.abs()) {
                            return Ok(sum + remainder.copysign(piece));
                        }
                    }
                }
                previous = size;
            }
            Err(QuadError::DecayViolation {
                from: r,
                detail: format!("no geometric decay after {MAX_TAIL_PIECES} unit panels"),
            })
        }
    }
}

/// Which integrability conditions a potential satisfies, with the integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    /// ∫_0^1 r|V| dr (infinite when divergent).
    pub int_r_abs_v_near0: f64,
    /// ∫_1^∞ r²|V| dr.
    pub int_r2_abs_v_tail: f64,
    /// ∫_0^∞ x|V| dx.
    pub int_x_abs_v_full: f64,
    pub near0_finite: bool,
    pub tail_finite: bool,
    pub full_finite: bool,
}

impl IntegrabilityReport {
    /// Both halves of the regularity condition at the origin and at infinity.
    pub fn condition_b(&self) -> bool {
        self.near0_finite && self.tail_finite
    }

    /// rV ∈ L¹(0, ∞).
    pub fn first_moment_finite(&self) -> bool {
        self.full_finite
    }
}

/// Sum of decade panels with divergence detection. `pieces` yields the
/// integral over successive panels moving towards the singular end.
fn decade_sum<I: Iterator<Item = Result<f64, QuadError>>>(pieces: I) -> Result<(f64, bool), QuadError> {
    let mut sizes = Vec::new();
    let mut sum = 0.0;
    for p in pieces {
        let p = p?;
        sum += p;
        sizes.push(p.abs());
    }
    let n = sizes.len();
    let last = sizes[n - 1];
    if last <= 1e-12 * (1.0 + sum.abs()) {
        return Ok((sum, true));
    }
    let q1 = sizes[n - 1] / sizes[n - 2];
    let q2 = sizes[n - 2] / sizes[n - 3];
    if q1 < 0.9 && q2 < 0.9 {
        Ok((sum + last * q1 / (1.0 - q1), true))
    } else {
        Ok((f64::INFINITY, false))
    }
}

const DECADES: i32 = 10;

fn near_origin_moment<F: Fn(f64) -> f64>(f: &F) -> Result<(f64, bool), QuadError> {
    decade_sum((0..DECADES).map(|k| {
        let hi = 10f64.powi(-k);
        integrate(|r| f(r).abs(), 0.1 * hi, hi, 1e-12)
    }))
}

fn tail_moment<F: Fn(f64) -> f64>(f: &F) -> Result<(f64, bool), QuadError> {
    decade_sum((0..DECADES).map(|k| {
        let lo = 10f64.powi(k);
        integrate(|r| f(r).abs(), lo, 10.0 * lo, 1e-12)
    }))
}

/// Classify `V` by the three moment integrals used throughout: ∫_0^1 r|V|,
/// ∫_1^∞ r²|V| and ∫_0^∞ x|V|. Divergence is detected from the growth of the
/// integral over successive decades towards 0 or ∞.
pub fn integrability_report<F: Fn(f64) -> f64>(v: F) -> Result<IntegrabilityReport, QuadError> {
    let (near, near_ok) = near_origin_moment(&|r: f64| r * v(r))?;
    let (tail, tail_ok) = tail_moment(&|r: f64| r * r * v(r))?;
    let (outer, outer_ok) = tail_moment(&|r: f64| r * v(r))?;
    let full_ok = near_ok && outer_ok;
    Ok(IntegrabilityReport {
        int_r_abs_v_near0: near,
        int_r2_abs_v_tail: tail,
        int_x_abs_v_full: if full_ok { near + outer } else { f64::INFINITY },
        near0_finite: near_ok,
        tail_finite: tail_ok,
        full_finite: full_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_integrand() {
        assert_eq!(integrate(|_| 0.0, 0.0, 1.0, DEFAULT_TOL).unwrap(), 0.0);
        assert_eq!(tail_integral(|_| 0.0, 3.0, Decay::Exponential, DEFAULT_TOL).unwrap(), 0.0);
        assert_eq!(tail_integral(|_| 0.0, 3.0, Decay::Power(2.0), DEFAULT_TOL).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_integrals() {
        // antiderivative −(r+1)e^{−r}
        let v = integrate(|r: f64| r * (-r).exp(), 0.0, 40.0, DEFAULT_TOL).unwrap();
        let exact = 1.0 - 41.0 * (-40f64).exp();
        assert!((v - exact).abs() < 1e-10);
        // antiderivative 2√r, singular at the left endpoint
        let v = integrate(|r: f64| 1.0 / r.sqrt(), 0.0, 1.0, DEFAULT_TOL).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let f = |t: f64| t.cos();
        let fwd = integrate(f, 0.0, 2.0, 1e-13).unwrap();
        let back = integrate(f, 2.0, 0.0, 1e-13).unwrap();
        assert_eq!(fwd, -back);
    }

    #[test]
    fn tails() {
        let v = tail_integral(|t: f64| (-t).exp(), 0.0, Decay::Exponential, DEFAULT_TOL).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let v = tail_integral(|t: f64| t.powi(-4), 1.0, Decay::Power(4.0), DEFAULT_TOL).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn misdeclared_decay_is_reported() {
        let err = tail_integral(|_| 1.0, 0.0, Decay::Exponential, DEFAULT_TOL);
        assert!(matches!(err, Err(QuadError::DecayViolation { .. })), "{err:?}");
        let err = tail_integral(|t: f64| 1.0 / t, 1.0, Decay::Power(1.0), DEFAULT_TOL);
        assert!(matches!(err, Err(QuadError::DecayViolation { .. })));
    }

    #[test]
    fn non_finite_integrand() {
        let err = integrate(|t: f64| if t > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, 1e-10);
        assert!(matches!(err, Err(QuadError::NonFinite { .. })));
    }

    #[test]
    fn integrability_classes() {
        let rep = integrability_report(|r: f64| (-r).exp()).unwrap();
        assert!(rep.condition_b() && rep.full_finite);
        // ∫_0^∞ x e^{-x} = Γ(2)
        assert!((rep.int_x_abs_v_full - 1.0).abs() < 1e-9);

        let rep = integrability_report(|r: f64| r.powi(-4)).unwrap();
        assert!(!rep.near0_finite);
        assert!(rep.tail_finite);
        assert!((rep.int_r2_abs_v_tail - 1.0).abs() < 1e-9);

        let rep = integrability_report(|r: f64| 1.0 / r).unwrap();
        assert!(rep.near0_finite && !rep.tail_finite && !rep.full_finite);
    }
}
