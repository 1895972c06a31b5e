use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::Decay;
use crate::Func;

/// Behaviour of a potential as r → 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum OriginClass {
    /// r|V| integrable near 0.
    Regular,
    /// Contains the barrier ℓ(ℓ+1)/r².
    Centrifugal { ell: u32 },
    /// g/rⁿ with n > 2 and g > 0.
    SingularRepulsive { n: f64, g: f64 },
}

/// Behaviour of a potential as r → ∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum InfinityClass {
    /// |V| = O(r^{-power}) with power > 3, so r²|V| is integrable.
    ShortRange { power: f64 },
    /// α/r at large r.
    LongRangeCoulomb { alpha: f64 },
    /// Exponentially decaying.
    Exponential,
}

impl InfinityClass {
    /// Decay class handed to tail integrals of `V` itself.
    pub fn decay(&self) -> Decay {
        match *self {
            InfinityClass::ShortRange { power } => Decay::Power(power),
            InfinityClass::LongRangeCoulomb { .. } => Decay::Power(1.0),
            InfinityClass::Exponential => Decay::Exponential,
        }
    }

    pub fn is_short_range(&self) -> bool {
        !matches!(self, InfinityClass::LongRangeCoulomb { .. })
    }

    /// The slower of two decay classes.
    pub fn slowest(self, other: InfinityClass) -> InfinityClass {
        use InfinityClass::*;
        match (self, other) {
            (LongRangeCoulomb { alpha }, _) | (_, LongRangeCoulomb { alpha }) => LongRangeCoulomb { alpha },
            (ShortRange { power: p }, ShortRange { power: q }) => ShortRange { power: p.min(q) },
            (ShortRange { power }, Exponential) | (Exponential, ShortRange { power }) => ShortRange { power },
            (Exponential, Exponential) => Exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("singular repulsive potentials need g > 0 (got g = {0})")]
    NonRepulsiveSingularity(f64),
    #[error("singular potentials need n > 2 (got n = {0})")]
    WeakSingularity(f64),
}

/// A potential V(r) on (0, ∞) with its classification and parameters.
#[derive(Clone)]
pub struct RadialPotential {
    eval: Func,
    origin: OriginClass,
    infinity: InfinityClass,
    params: BTreeMap<String, f64>,
    label: String,
}

impl fmt::Debug for RadialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialPotential")
            .field("label", &self.label)
            .field("origin", &self.origin)
            .field("infinity", &self.infinity)
            .field("params", &self.params)
            .finish()
    }
}

impl RadialPotential {
    pub fn new(
        label: impl Into<String>,
        eval: Func,
        origin: OriginClass,
        infinity: InfinityClass,
    ) -> Result<Self, PotentialError> {
        if let OriginClass::SingularRepulsive { n, g } = origin {
            if g <= 0.0 {
                return Err(PotentialError::NonRepulsiveSingularity(g));
            }
            if n <= 2.0 {
                return Err(PotentialError::WeakSingularity(n));
            }
        }
        Ok(Self {
            eval,
            origin,
            infinity,
            params: BTreeMap::new(),
            label: label.into(),
        })
    }

    /// The identically vanishing potential.
    pub fn zero() -> Self {
        Self::new(
            "zero",
            Arc::new(|_| 0.0),
            OriginClass::Regular,
            InfinityClass::Exponential,
        )
        .expect("valid")
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    pub fn func(&self) -> Func {
        self.eval.clone()
    }

    pub fn origin(&self) -> OriginClass {
        self.origin
    }

    pub fn infinity(&self) -> InfinityClass {
        self.infinity
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// λ·V, keeping the classification.
    pub fn scaled(&self, lambda: f64) -> Self {
        let inner = self.eval.clone();
        let mut out = self.clone();
        out.eval = Arc::new(move |r| lambda * inner(r));
        out.label = format!("{}*{}", lambda, self.label);
        out
    }

    /// V + δ with δ an exponentially decaying perturbation, used by the
    /// negative controls.
    pub fn perturbed(&self, delta: Func) -> Self {
        let inner = self.eval.clone();
        let mut out = self.clone();
        out.eval = Arc::new(move |r| inner(r) + delta(r));
        out.label = format!("{}+perturbation", self.label);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_class_requires_repulsion() {
        let f: Func = Arc::new(|r: f64| -1.0 / r.powi(4));
        let err = RadialPotential::new(
            "bad",
            f.clone(),
            OriginClass::SingularRepulsive { n: 4.0, g: -1.0 },
            InfinityClass::ShortRange { power: 4.0 },
        );
        assert_eq!(err.unwrap_err(), PotentialError::NonRepulsiveSingularity(-1.0));
        assert!(RadialPotential::new(
            "bad",
            f,
            OriginClass::SingularRepulsive { n: 2.0, g: 1.0 },
            InfinityClass::ShortRange { power: 4.0 },
        )
        .is_err());
    }

    #[test]
    fn slowest_decay_wins() {
        let a = InfinityClass::ShortRange { power: 4.0 };
        let b = InfinityClass::Exponential;
        assert_eq!(a.slowest(b), a);
        assert_eq!(b.slowest(b), b);
        let c = InfinityClass::LongRangeCoulomb { alpha: 1.0 };
        assert_eq!(a.slowest(c), c);
    }
}
