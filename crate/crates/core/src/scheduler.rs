//! Difficulty-driven augmentation degree, the binary loss gate, and the
//! capability diagnostic.

use crate::error::{ensure_finite, Error, Result};
use crate::lossbank::DifficultyDegree;

pub const DEFAULT_T_EASY: f64 = 0.05;
pub const DEFAULT_T_HARD: f64 = 0.95;

/// Open acceptance interval `(t_easy, t_hard)` for the loss gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateThresholds {
    t_easy: f64,
    t_hard: f64,
}

impl Default for GateThresholds {
    fn default() -> Self {
        GateThresholds { t_easy: DEFAULT_T_EASY, t_hard: DEFAULT_T_HARD }
    }
}

impl GateThresholds {
    pub fn new(t_easy: f64, t_hard: f64) -> Result<Self> {
        if !(0.0 <= t_easy && t_easy < t_hard && t_hard <= 1.0) {
            return Err(Error::invalid(format!(
                "thresholds must satisfy 0 <= t_easy < t_hard <= 1, got ({t_easy}, {t_hard})"
            )));
        }
        Ok(GateThresholds { t_easy, t_hard })
    }

    pub fn t_easy(&self) -> f64 {
        self.t_easy
    }

    pub fn t_hard(&self) -> f64 {
        self.t_hard
    }
}

/// Binary sample weight, `0.0` or `1.0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GateWeight(bool);

impl GateWeight {
    pub const OPEN: GateWeight = GateWeight(true);
    pub const CLOSED: GateWeight = GateWeight(false);

    pub fn value(self) -> f64 {
        if self.0 {
            1.0
        } else {
            0.0
        }
    }

    pub fn is_open(self) -> bool {
        self.0
    }
}

/// Augmentation probability `1 − d`.
pub fn da_degree(d: DifficultyDegree) -> f64 {
    1.0 - d.value()
}

/// `w = 1` iff `t_easy < d < t_hard`; endpoints are rejected.
pub fn no_gate(d: DifficultyDegree, th: GateThresholds) -> GateWeight {
    let d = d.value();
    GateWeight(th.t_easy < d && d < th.t_hard)
}

/// Running loss extrema over training.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CapabilityTracker {
    extrema: Option<(f64, f64)>,
}

impl CapabilityTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn from_extrema(extrema: Option<(f64, f64)>) -> Self {
        CapabilityTracker { extrema }
    }

    pub fn loss_min(&self) -> Option<f64> {
        self.extrema.map(|e| e.0)
    }

    pub fn loss_max(&self) -> Option<f64> {
        self.extrema.map(|e| e.1)
    }

    pub fn extrema(&self) -> Option<(f64, f64)> {
        self.extrema
    }

    pub fn observe_extrema(&mut self, loss: f64) -> Result<()> {
        ensure_finite("loss", loss)?;
        self.extrema = Some(match self.extrema {
            None => (loss, loss),
            Some((lo, hi)) => (lo.min(loss), hi.max(loss)),
        });
        Ok(())
    }

    /// Record `current_loss`, then return `1 − (L − L_min)/(L_max − L_min)`;
    /// `0.5` while all observations are equal.
    pub fn capability(&mut self, current_loss: f64) -> Result<f64> {
        self.observe_extrema(current_loss)?;
        let (lo, hi) = self.extrema.expect("just observed");
        if hi == lo {
            return Ok(0.5);
        }
        Ok((1.0 - (current_loss - lo) / (hi - lo)).clamp(0.0, 1.0))
    }
}
