use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CommsError;

/// Time-varying delay shape `τ(t) = amplitude · shape(t)`. Random shapes
/// take a fresh `Ω ~ U(-1, 1)` each time they are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayShape {
    Constant { amplitude: f64 },
    /// `|a sin t|`
    AbsSin { amplitude: f64 },
    /// `|a cos t|`
    AbsCos { amplitude: f64 },
    /// `|a Ω|`
    AbsRandom { amplitude: f64 },
    /// `a / t`
    Inverse { amplitude: f64 },
    /// `a / t²`
    InverseSquare { amplitude: f64 },
    /// `a e^{-t}`
    ExpDecay { amplitude: f64 },
    /// `a t e^{-t}`
    TimeExpDecay { amplitude: f64 },
    /// `a ln t`
    Log { amplitude: f64 },
    /// `a / ln t`
    InverseLog { amplitude: f64 },
}

impl DelayShape {
    pub fn amplitude(&self) -> f64 {
        match *self {
            DelayShape::Constant { amplitude }
            | DelayShape::AbsSin { amplitude }
            | DelayShape::AbsCos { amplitude }
            | DelayShape::AbsRandom { amplitude }
            | DelayShape::Inverse { amplitude }
            | DelayShape::InverseSquare { amplitude }
            | DelayShape::ExpDecay { amplitude }
            | DelayShape::TimeExpDecay { amplitude }
            | DelayShape::Log { amplitude }
            | DelayShape::InverseLog { amplitude } => amplitude,
        }
    }

    pub fn scaled(&self, factor: f64) -> DelayShape {
        let mut out = *self;
        match &mut out {
            DelayShape::Constant { amplitude }
            | DelayShape::AbsSin { amplitude }
            | DelayShape::AbsCos { amplitude }
            | DelayShape::AbsRandom { amplitude }
            | DelayShape::Inverse { amplitude }
            | DelayShape::InverseSquare { amplitude }
            | DelayShape::ExpDecay { amplitude }
            | DelayShape::TimeExpDecay { amplitude }
            | DelayShape::Log { amplitude }
            | DelayShape::InverseLog { amplitude } => *amplitude *= factor,
        }
        out
    }

    pub fn is_random(&self) -> bool {
        matches!(self, DelayShape::AbsRandom { .. })
    }

    /// Unclamped value at `t` given the random draw `omega` (ignored by the
    /// deterministic shapes). May be negative or non-finite near `t = 0`.
    pub fn raw(&self, t: f64, omega: f64) -> f64 {
        match *self {
            DelayShape::Constant { amplitude } => amplitude,
            DelayShape::AbsSin { amplitude } => (amplitude * t.sin()).abs(),
            DelayShape::AbsCos { amplitude } => (amplitude * t.cos()).abs(),
            DelayShape::AbsRandom { amplitude } => (amplitude * omega).abs(),
            DelayShape::Inverse { amplitude } => amplitude / t,
            DelayShape::InverseSquare { amplitude } => amplitude / (t * t),
            DelayShape::ExpDecay { amplitude } => amplitude * (-t).exp(),
            DelayShape::TimeExpDecay { amplitude } => amplitude * t * (-t).exp(),
            DelayShape::Log { amplitude } => amplitude * t.ln(),
            DelayShape::InverseLog { amplitude } => amplitude / t.ln(),
        }
    }

    /// Value clamped into `[0, bound]`; undefined values (poles at the start
    /// of a run) saturate at the bound.
    pub fn evaluate(&self, t: f64, omega: f64, bound: f64) -> f64 {
        let v = self.raw(t, omega);
        if v.is_nan() || v == f64::INFINITY {
            bound
        } else {
            v.clamp(0.0, bound)
        }
    }
}

/// One directed edge's delay as written in scenario files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDelay {
    pub receiver: usize,
    pub sender: usize,
    #[serde(flatten)]
    pub shape: DelayShape,
}

/// Per-edge delay profiles with a global bound `τ`. Edges without a profile
/// have zero delay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySchedule {
    pub bound: f64,
    #[serde(default)]
    pub edges: Vec<EdgeDelay>,
}

impl DelaySchedule {
    pub fn zero() -> Self {
        Self { bound: 0.0, edges: Vec::new() }
    }

    pub fn validate(&self, n: usize) -> Result<(), CommsError> {
        if !(self.bound.is_finite() && self.bound >= 0.0) {
            return Err(CommsError::InvalidDelay(format!("bound {} must be finite and >= 0", self.bound)));
        }
        let mut seen = BTreeMap::new();
        for e in &self.edges {
            if e.receiver >= n || e.sender >= n || e.receiver == e.sender {
                return Err(CommsError::InvalidDelay(format!(
                    "edge {} <- {} is not a valid pair for {n} robots",
                    e.receiver, e.sender
                )));
            }
            if seen.insert((e.receiver, e.sender), ()).is_some() {
                return Err(CommsError::InvalidDelay(format!(
                    "edge {} <- {} listed twice",
                    e.receiver, e.sender
                )));
            }
            if !e.shape.amplitude().is_finite() {
                return Err(CommsError::InvalidDelay("non-finite amplitude".into()));
            }
        }
        Ok(())
    }

    /// Same shapes rescaled so the bound becomes `bound`. A zero target
    /// bound gives zero delay everywhere.
    pub fn with_bound(&self, bound: f64) -> DelaySchedule {
        let factor = if self.bound > 0.0 { bound / self.bound } else { 0.0 };
        DelaySchedule {
            bound,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDelay { shape: e.shape.scaled(factor), ..*e })
                .collect(),
        }
    }

    /// Samples every listed edge at time `t`. Random shapes draw from `rng`
    /// in list order, one draw per random edge.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, t: f64, rng: &mut R) -> DelaySnapshot {
        let mut delays = DMatrix::zeros(n, n);
        for e in &self.edges {
            let omega = if e.shape.is_random() { rng.gen_range(-1.0..1.0) } else { 0.0 };
            if e.receiver < n && e.sender < n {
                delays[(e.receiver, e.sender)] = e.shape.evaluate(t, omega, self.bound);
            }
        }
        DelaySnapshot { t, bound: self.bound, delays }
    }
}

/// Delays `τ_ij(t)` in effect at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct DelaySnapshot {
    pub t: f64,
    pub bound: f64,
    pub delays: DMatrix<f64>,
}

impl DelaySnapshot {
    pub fn zero(n: usize, t: f64) -> Self {
        Self { t, bound: 0.0, delays: DMatrix::zeros(n, n) }
    }

    pub fn uniform(n: usize, t: f64, delay: f64) -> Self {
        Self { t, bound: delay, delays: DMatrix::from_element(n, n, delay) }
    }

    pub fn get(&self, receiver: usize, sender: usize) -> f64 {
        self.delays[(receiver, sender)]
    }
}
