//! Seed potentials with closed-form zero-energy solutions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{InfinityClass, OriginClass, RadialPotential};
use crate::quadrature::integrate;
use crate::special::{bessel_eval, BesselFamily, SpecialFnError};
use crate::{DiffFunc, Func};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogName {
    Zero,
    RationalQuartic,
    InverseSquareShape,
    Exponential,
    SingularQuartic,
    Coulomb,
}

impl CatalogName {
    pub const ALL: [CatalogName; 6] = [
        CatalogName::Zero,
        CatalogName::RationalQuartic,
        CatalogName::InverseSquareShape,
        CatalogName::Exponential,
        CatalogName::SingularQuartic,
        CatalogName::Coulomb,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CatalogName::Zero => "zero",
            CatalogName::RationalQuartic => "rational_quartic",
            CatalogName::InverseSquareShape => "inverse_square_shape",
            CatalogName::Exponential => "exponential",
            CatalogName::SingularQuartic => "singular_quartic",
            CatalogName::Coulomb => "coulomb",
        }
    }

    pub fn formula(&self) -> &'static str {
        match self {
            CatalogName::Zero => "V(r) = 0",
            CatalogName::RationalQuartic => "V(r) = λa²/(1+ar)⁴",
            CatalogName::InverseSquareShape => "V(r) = λb²/(b²+r²)²",
            CatalogName::Exponential => "V(r) = λe^{-μr}",
            CatalogName::SingularQuartic => "V(r) = g/rⁿ",
            CatalogName::Coulomb => "V(r) = α/r",
        }
    }

    pub fn validity(&self) -> &'static str {
        match self {
            CatalogName::Zero => "none",
            CatalogName::RationalQuartic => "a > 0",
            CatalogName::InverseSquareShape => "b > 0",
            CatalogName::Exponential => "mu > 0",
            CatalogName::SingularQuartic => "g > 0, n = 4",
            CatalogName::Coulomb => "alpha finite",
        }
    }

    pub fn tags(&self) -> &'static [&'static str] {
        match self {
            CatalogName::Zero => &["trivial", "regular"],
            CatalogName::RationalQuartic => &["regular", "short_range", "sign_aware"],
            CatalogName::InverseSquareShape => &["regular", "short_range", "sign_aware"],
            CatalogName::Exponential => &["regular", "exponential", "bessel", "sign_aware"],
            CatalogName::SingularQuartic => &["singular", "short_range"],
            CatalogName::Coulomb => &["regular", "long_range", "bessel", "sign_aware"],
        }
    }

    /// Parameter keys with their default values.
    pub fn defaults(&self) -> &'static [(&'static str, f64)] {
        match self {
            CatalogName::Zero => &[],
            CatalogName::RationalQuartic => &[("lambda", 1.0), ("a", 1.0)],
            CatalogName::InverseSquareShape => &[("lambda", 2.0), ("b", 1.0)],
            CatalogName::Exponential => &[("lambda", 1.0), ("mu", 1.0)],
            CatalogName::SingularQuartic => &[("g", 1.0), ("n", 4.0)],
            CatalogName::Coulomb => &[("alpha", 1.0)],
        }
    }
}

impl fmt::Display for CatalogName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CatalogName {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CatalogName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| CatalogError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown catalog entry `{0}`")]
    UnknownName(String),
    #[error("unknown parameter `{key}` for `{name}`")]
    UnknownParameter { name: CatalogName, key: String },
    #[error("invalid parameters for `{name}`: {constraint} (got {key} = {value})")]
    Invalid {
        name: CatalogName,
        constraint: &'static str,
        key: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Special(#[from] SpecialFnError),
}

/// A catalog potential with its closed-form regular solution.
#[derive(Clone)]
pub struct CatalogEntry {
    pub name: CatalogName,
    pub params: BTreeMap<String, f64>,
    pub potential: RadialPotential,
    /// r ↦ (φ(r), φ'(r)).
    pub phi: DiffFunc,
    /// r ↦ (χ(r), χ'(r)) where a closed form exists.
    pub chi: Option<DiffFunc>,
    /// Interval on which residual checks are run.
    pub residual_domain: (f64, f64),
}

impl fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("potential", &self.potential)
            .field("has_chi", &self.chi.is_some())
            .finish()
    }
}

impl CatalogEntry {
    pub fn phi_value(&self, r: f64) -> f64 {
        (self.phi)(r).0
    }

    /// φ as a plain function.
    pub fn phi_func(&self) -> Func {
        let phi = self.phi.clone();
        Arc::new(move |r| phi(r).0)
    }

    /// Bound-state count predicted from the closed form, where the zero
    /// condition is explicit.
    pub fn predicted_nodes(&self) -> Option<usize> {
        let p = |k: &str| self.params[k];
        match self.name {
            CatalogName::Zero | CatalogName::SingularQuartic => Some(0),
            CatalogName::InverseSquareShape => {
                // zeros where √(1−λ)·θ = kπ with θ < π/2
                let lambda = p("lambda");
                if lambda >= 1.0 {
                    return Some(0);
                }
                let kappa = (1.0 - lambda).sqrt();
                Some(count_below(kappa * 0.5))
            }
            CatalogName::RationalQuartic => {
                // zeros where √(−λ)·s = kπ with s = ar/(1+ar) < 1
                let lambda = p("lambda");
                if lambda >= 0.0 {
                    return Some(0);
                }
                Some(count_below((-lambda).sqrt() / std::f64::consts::PI))
            }
            _ => None,
        }
    }
}

/// Number of integers k ≥ 1 with k < t.
fn count_below(t: f64) -> usize {
    let c = t.ceil() as usize;
    c.saturating_sub(1)
}

/// sinh(√k2·s)/√k2, continued to sin for k2 < 0 and to s at k2 = 0.
pub fn sinhc(k2: f64, s: f64) -> f64 {
    if k2 > 0.0 {
        let k = k2.sqrt();
        (k * s).sinh() / k
    } else if k2 < 0.0 {
        let k = (-k2).sqrt();
        (k * s).sin() / k
    } else {
        s
    }
}

/// cosh(√k2·s), continued to cos for k2 < 0.
pub fn coshc(k2: f64, s: f64) -> f64 {
    if k2 > 0.0 {
        (k2.sqrt() * s).cosh()
    } else if k2 < 0.0 {
        ((-k2).sqrt() * s).cos()
    } else {
        1.0
    }
}

fn resolve(name: CatalogName, given: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>, CatalogError> {
    let defaults = name.defaults();
    for key in given.keys() {
        if !defaults.iter().any(|(k, _)| k == key) {
            return Err(CatalogError::UnknownParameter {
                name,
                key: key.clone(),
            });
        }
    }
    Ok(defaults
        .iter()
        .map(|&(k, d)| (k.to_string(), given.get(k).copied().unwrap_or(d)))
        .collect())
}

fn require(name: CatalogName, ok: bool, key: &'static str, value: f64) -> Result<(), CatalogError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(CatalogError::Invalid {
            name,
            constraint: name.validity(),
            key,
            value,
        })
    }
}

/// Build a catalog entry. Missing parameters take their defaults.
pub fn make_entry(name: CatalogName, params: &BTreeMap<String, f64>) -> Result<CatalogEntry, CatalogError> {
    let params = resolve(name, params)?;
    let p = |k: &str| params[k];
    let mut entry = match name {
        CatalogName::Zero => CatalogEntry {
            name,
            params: params.clone(),
            potential: RadialPotential::zero(),
            phi: Arc::new(|r| (r, 1.0)),
            chi: Some(Arc::new(|_| (1.0, 0.0))),
            residual_domain: (0.01, 20.0),
        },
        CatalogName::RationalQuartic => rational_quartic(p("lambda"), p("a"))?,
        CatalogName::InverseSquareShape => inverse_square_shape(p("lambda"), p("b"))?,
        CatalogName::Exponential => exponential(p("lambda"), p("mu"))?,
        CatalogName::SingularQuartic => singular_quartic(p("g"), p("n"))?,
        CatalogName::Coulomb => coulomb(p("alpha"))?,
    };
    let mut potential = entry.potential.clone().with_label(name.as_str());
    for (k, v) in &params {
        potential = potential.with_param(k, *v);
    }
    entry.potential = potential;
    entry.params = params;
    Ok(entry)
}

/// [`make_entry`] from `(key, value)` pairs.
pub fn entry(name: CatalogName, params: &[(&str, f64)]) -> Result<CatalogEntry, CatalogError> {
    let map = params.iter().map(|&(k, v)| (k.to_string(), v)).collect();
    make_entry(name, &map)
}

fn rational_quartic(lambda: f64, a: f64) -> Result<CatalogEntry, CatalogError> {
    let name = CatalogName::RationalQuartic;
    require(name, a > 0.0, "a", a)?;
    require(name, true, "lambda", lambda)?;
    let v: Func = Arc::new(move |r| lambda * a * a / (1.0 + a * r).powi(4));
    let phi: DiffFunc = Arc::new(move |r| {
        let q = 1.0 + a * r;
        let s = a * r / q;
        (q / a * sinhc(lambda, s), sinhc(lambda, s) + coshc(lambda, s) / q)
    });
    Ok(CatalogEntry {
        name,
        params: BTreeMap::new(),
        potential: RadialPotential::new(name.as_str(), v, OriginClass::Regular, InfinityClass::ShortRange { power: 4.0 })
            .expect("regular"),
        phi,
        chi: None,
        residual_domain: (0.01, 20.0),
    })
}

fn inverse_square_shape(lambda: f64, b: f64) -> Result<CatalogEntry, CatalogError> {
    let name = CatalogName::InverseSquareShape;
    require(name, b > 0.0, "b", b)?;
    require(name, true, "lambda", lambda)?;
    let k2 = lambda - 1.0;
    let v: Func = Arc::new(move |r| {
        let d = b * b + r * r;
        lambda * b * b / (d * d)
    });
    let phi: DiffFunc = Arc::new(move |r| {
        let rho = (b * b + r * r).sqrt();
        let theta = (r / b).atan();
        let s = sinhc(k2, theta);
        (rho * s, (r * s + b * coshc(k2, theta)) / rho)
    });
    Ok(CatalogEntry {
        name,
        params: BTreeMap::new(),
        potential: RadialPotential::new(name.as_str(), v, OriginClass::Regular, InfinityClass::ShortRange { power: 4.0 })
            .expect("regular"),
        phi,
        chi: None,
        residual_domain: (0.01, 20.0),
    })
}

const SERIES_TERMS: usize = 40;
const SERIES_CUTOFF: f64 = 0.25;

/// Taylor coefficients of the regular solution (φ(0) = 0, φ'(0) = 1) from
/// those of V: (k+2)(k+1)c_{k+2} = Σ_j v_j c_{k-j}.
fn regular_series(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut c = vec![0.0; n];
    c[1] = 1.0;
    for k in 0..n - 2 {
        let sum: f64 = (0..=k).map(|j| v[j] * c[k - j]).sum();
        c[k + 2] = sum / ((k + 2) * (k + 1)) as f64;
    }
    c
}

fn eval_series(c: &[f64], r: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut deriv = 0.0;
    for k in (1..c.len()).rev() {
        value = value * r + c[k];
        deriv = deriv * r + k as f64 * c[k];
    }
    (value * r, deriv)
}

fn exponential(lambda: f64, mu: f64) -> Result<CatalogEntry, CatalogError> {
    let name = CatalogName::Exponential;
    require(name, mu > 0.0, "mu", mu)?;
    require(name, true, "lambda", lambda)?;
    let v: Func = Arc::new(move |r| lambda * (-mu * r).exp());
    let phi: DiffFunc = if lambda == 0.0 {
        Arc::new(|r| (r, 1.0))
    } else {
        let (f0, f1, g0, g1, sign) = if lambda > 0.0 {
            (BesselFamily::I0, BesselFamily::I1, BesselFamily::K0, BesselFamily::K1, -1.0)
        } else {
            (BesselFamily::J0, BesselFamily::J1, BesselFamily::Y0, BesselFamily::Y1, 1.0)
        };
        // φ = αF₀(z) + βG₀(z) with z = z₀e^{-μr/2}. For λ > 0,
        // φ' = −(μz/2)(αI₁ − βK₁); for λ < 0, φ' = (μz/2)(αJ₁ + βY₁).
        let z0 = 2.0 * lambda.abs().sqrt() / mu;
        let g1_sign = if lambda > 0.0 { -1.0 } else { 1.0 };
        let slope = move |z: f64, a1: f64, b1: f64| sign * 0.5 * mu * z * (a1 + g1_sign * b1);
        let (a0, b0) = (bessel_eval(f0, z0)?, bessel_eval(g0, z0)?);
        let (a1, b1) = (bessel_eval(f1, z0)?, bessel_eval(g1, z0)?);
        // [a0, b0; s·a1, s·g·b1] [α; β] = [0; 1]
        let m11 = a0;
        let m12 = b0;
        let m21 = slope(z0, a1, 0.0);
        let m22 = slope(z0, 0.0, b1);
        let det = m11 * m22 - m12 * m21;
        let alpha = -m12 / det;
        let beta = m11 / det;
        // the Bessel combination cancels to ~1e-11 relative near the origin
        let scale = mu.max(lambda.abs().sqrt());
        let mut v_taylor = vec![lambda; SERIES_TERMS];
        for j in 1..SERIES_TERMS {
            v_taylor[j] = v_taylor[j - 1] * (-mu) / j as f64;
        }
        let series = regular_series(&v_taylor);
        Arc::new(move |r| {
            if r * scale < SERIES_CUTOFF {
                return eval_series(&series, r);
            }
            let z = z0 * (-0.5 * mu * r).exp();
            let ev = |f: BesselFamily| bessel_eval(f, z).unwrap_or(f64::NAN);
            let value = alpha * ev(f0) + beta * ev(g0);
            let deriv = slope(z, alpha * ev(f1), beta * ev(g1));
            (value, deriv)
        })
    };
    Ok(CatalogEntry {
        name,
        params: BTreeMap::new(),
        potential: RadialPotential::new(name.as_str(), v, OriginClass::Regular, InfinityClass::Exponential).expect("regular"),
        phi,
        chi: None,
        residual_domain: (0.01, 20.0),
    })
}

fn singular_quartic(g: f64, n: f64) -> Result<CatalogEntry, CatalogError> {
    let name = CatalogName::SingularQuartic;
    require(name, g > 0.0, "g", g)?;
    require(name, n == 4.0, "n", n)?;
    let sg = g.sqrt();
    let v: Func = Arc::new(move |r| g / r.powi(4));
    let phi: DiffFunc = Arc::new(move |r| {
        let u = sg / r;
        let e = (-u).exp();
        (r * e, e * (1.0 + u))
    });
    let chi: DiffFunc = Arc::new(move |r| {
        let u = sg / r;
        (r / sg * u.sinh(), u.sinh() / sg - u.cosh() / r)
    });
    Ok(CatalogEntry {
        name,
        params: BTreeMap::new(),
        potential: RadialPotential::new(
            name.as_str(),
            v,
            OriginClass::SingularRepulsive { n, g },
            InfinityClass::ShortRange { power: 4.0 },
        )
        .expect("validated"),
        phi,
        chi: Some(chi),
        residual_domain: (0.05, 20.0),
    })
}

fn coulomb(alpha: f64) -> Result<CatalogEntry, CatalogError> {
    let name = CatalogName::Coulomb;
    require(name, true, "alpha", alpha)?;
    let v: Func = Arc::new(move |r| alpha / r);
    let phi: DiffFunc = if alpha == 0.0 {
        Arc::new(|r| (r, 1.0))
    } else {
        let (f0, f1) = if alpha > 0.0 {
            (BesselFamily::I0, BesselFamily::I1)
        } else {
            (BesselFamily::J0, BesselFamily::J1)
        };
        let a = alpha.abs();
        // ψ = s·F₁(s)/(2|α|) with s = 2√(|α|x), ψ' = F₀(s)
        Arc::new(move |r| {
            let s = 2.0 * (a * r).sqrt();
            let ev = |f: BesselFamily| bessel_eval(f, s).unwrap_or(f64::NAN);
            (s * ev(f1) / (2.0 * a), ev(f0))
        })
    };
    Ok(CatalogEntry {
        name,
        params: BTreeMap::new(),
        potential: RadialPotential::new(
            name.as_str(),
            v,
            OriginClass::Regular,
            InfinityClass::LongRangeCoulomb { alpha },
        )
        .expect("regular"),
        phi,
        chi: None,
        residual_domain: (0.01, 20.0),
    })
}

/// Closed-form pieces of the singular quartic example under the
/// exponential-kernel construction: χ₀ = e^{g/(6r²)} and φ₀ = χ₀∫₀^r χ₀^{-2}.
#[derive(Debug, Clone, Copy)]
pub struct GrosseSingularPair {
    pub g: f64,
}

impl GrosseSingularPair {
    pub fn chi(&self, r: f64) -> f64 {
        (self.g / (6.0 * r * r)).exp()
    }

    /// φ₀ by quadrature. The integrand e^{-g/(3t²)} is flat near 0.
    pub fn phi(&self, r: f64) -> f64 {
        let g = self.g;
        let integral = integrate(|t: f64| (-g / (3.0 * t * t)).exp(), 0.0, r, 1e-14).unwrap_or(f64::NAN);
        self.chi(r) * integral
    }

    /// Leading behaviour of φ₀ as r → 0: (3/(2g))·r³·e^{-g/(6r²)}.
    pub fn phi_near_origin(&self, r: f64) -> f64 {
        1.5 / self.g * r.powi(3) * (-self.g / (6.0 * r * r)).exp()
    }

    /// Leading behaviour of φ₀ as r → ∞: r − √(πg/3).
    pub fn phi_near_infinity(&self, r: f64) -> f64 {
        r - (std::f64::consts::PI * self.g / 3.0).sqrt()
    }
}

pub fn grosse_singular_pair(g: f64) -> Result<GrosseSingularPair, CatalogError> {
    require(CatalogName::SingularQuartic, g > 0.0, "g", g)?;
    Ok(GrosseSingularPair { g })
}

/// One row of the catalog listing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CatalogListing {
    pub name: CatalogName,
    pub formula: String,
    pub parameters: BTreeMap<String, f64>,
    pub validity: String,
    pub tags: Vec<String>,
}

/// All entries in stable order, optionally restricted to those carrying `tag`.
pub fn catalog_list(tag: Option<&str>) -> Vec<CatalogListing> {
    CatalogName::ALL
        .into_iter()
        .filter(|n| tag.map_or(true, |t| n.tags().contains(&t)))
        .map(|n| CatalogListing {
            name: n,
            formula: n.formula().to_string(),
            parameters: n.defaults().iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            validity: n.validity().to_string(),
            tags: n.tags().iter().map(|t| t.to_string()).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinhc_branches_join_at_zero() {
        for s in [0.1, 0.7, 1.3] {
            let plus = sinhc(1e-6, s);
            let minus = sinhc(-1e-6, s);
            assert!((plus - minus).abs() < 1e-6 * s.powi(3));
            assert!((plus - s).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_entry() {
        let e = entry(CatalogName::Zero, &[]).unwrap();
        assert_eq!((e.phi)(3.0), (3.0, 1.0));
        assert_eq!(e.potential.eval(1.0), 0.0);
    }

    #[test]
    fn invalid_parameters_name_the_constraint() {
        let err = entry(CatalogName::RationalQuartic, &[("a", -1.0)]).unwrap_err();
        assert!(err.to_string().contains("a > 0"), "{err}");
        let err = entry(CatalogName::SingularQuartic, &[("n", 3.0)]).unwrap_err();
        assert!(err.to_string().contains("n = 4"));
        assert!(entry(CatalogName::Exponential, &[("nu", 1.0)]).is_err());
        assert!("nonsense".parse::<CatalogName>().is_err());
    }

    #[test]
    fn listing_is_stable() {
        let all = catalog_list(None);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0].name, CatalogName::Zero);
        let singular = catalog_list(Some("singular"));
        assert_eq!(singular.len(), 1);
        assert_eq!(singular[0].name, CatalogName::SingularQuartic);
    }

    #[test]
    fn predicted_nodes() {
        let p = entry(CatalogName::InverseSquareShape, &[("lambda", -35.0)]).unwrap();
        assert_eq!(p.predicted_nodes(), Some(2));
        let p = entry(CatalogName::InverseSquareShape, &[("lambda", -3.0)]).unwrap();
        assert_eq!(p.predicted_nodes(), Some(0));
    }
}
