//! Probabilities, Bernoulli tosses and the fall-detector models.
//!
//! A device agent misses a true fall with probability `p_false_negative` and
//! fires on a quiet tick with probability `p_false_positive`. Draws are
//! independent across devices and ticks. With two devices per elderly agent
//! (accelerometer `A` and gyroscope `G`) a fall is missed only when both miss
//! and a phantom alarm is raised when either fires.

use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::case::GroundTruth;

/// A probability checked to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityOutOfRange(pub f64);

impl fmt::Display for ProbabilityOutOfRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "probability {} is outside [0, 1]", self.0)
    }
}

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(p: f64) -> Result<Self, ProbabilityOutOfRange> {
        // NaN fails both comparisons
        if (0.0..=1.0).contains(&p) {
            Ok(Probability(p))
        } else {
            Err(ProbabilityOutOfRange(p))
        }
    }

    /// `1 / n`, for the `1/600`-style rates used throughout.
    pub fn one_in(n: u32) -> Self {
        assert!(n > 0, "one_in(0)");
        Probability(1.0 / n as f64)
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = ProbabilityOutOfRange;

    fn try_from(p: f64) -> Result<Self, Self::Error> {
        Probability::new(p)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Returns `true` with probability `p`. `p = 0` never fires and `p = 1`
/// always fires.
#[inline]
pub fn toss<R: Rng + ?Sized>(p: Probability, rng: &mut R) -> bool {
    rng.random_bool(p.0)
}

/// Error model of one device agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub p_false_negative: Probability,
    pub p_false_positive: Probability,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel { p_false_negative: Probability::one_in(5), p_false_positive: Probability::one_in(500) }
    }
}

/// Which device raised an alarm: index into the elderly agent's device list.
pub type DeviceSlot = u8;

/// Outcome of one elderly-agent tick, before any alarm handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reading {
    /// No fall and no device fired.
    TrueNegative,
    /// A fall that every device missed.
    FalseNegative,
    /// An alarm raised by the first device in `slot` order that fired.
    Alarm { truth: GroundTruth, slot: DeviceSlot },
}

/// Device arrangement guarding each elderly agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detectors {
    /// One device.
    Single,
    /// Two independent devices, fused with AND on misses and OR on phantoms.
    Dual,
}

impl Detectors {
    pub fn count(self) -> usize {
        match self {
            Detectors::Single => 1,
            Detectors::Dual => 2,
        }
    }

    /// Given whether the elderly agent truly fell this tick, draws every
    /// device's outcome and fuses them.
    pub fn observe<R: Rng + ?Sized>(self, fell: bool, sensor: &SensorModel, rng: &mut R) -> Reading {
        match self {
            Detectors::Single => {
                if fell {
                    if toss(sensor.p_false_negative, rng) {
                        Reading::FalseNegative
                    } else {
                        Reading::Alarm { truth: GroundTruth::TrueFall, slot: 0 }
                    }
                } else if toss(sensor.p_false_positive, rng) {
                    Reading::Alarm { truth: GroundTruth::Phantom, slot: 0 }
                } else {
                    Reading::TrueNegative
                }
            }
            Detectors::Dual => {
                if fell {
                    let missed_a = toss(sensor.p_false_negative, rng);
                    let missed_g = toss(sensor.p_false_negative, rng);
                    match (missed_a, missed_g) {
                        (true, true) => Reading::FalseNegative,
                        // G only raises the alarm when A did not already.
                        (false, _) => Reading::Alarm { truth: GroundTruth::TrueFall, slot: 0 },
                        (true, false) => Reading::Alarm { truth: GroundTruth::TrueFall, slot: 1 },
                    }
                } else {
                    let fired_a = toss(sensor.p_false_positive, rng);
                    let fired_g = toss(sensor.p_false_positive, rng);
                    match (fired_a, fired_g) {
                        (true, _) => Reading::Alarm { truth: GroundTruth::Phantom, slot: 0 },
                        (false, true) => Reading::Alarm { truth: GroundTruth::Phantom, slot: 1 },
                        (false, false) => Reading::TrueNegative,
                    }
                }
            }
        }
    }

    /// Closed-form probability that a true fall raises an alarm.
    pub fn alarm_probability(self, sensor: &SensorModel) -> f64 {
        let miss = sensor.p_false_negative.get();
        match self {
            Detectors::Single => 1.0 - miss,
            Detectors::Dual => 1.0 - miss * miss,
        }
    }

    /// Closed-form probability that a quiet tick raises a phantom alarm.
    pub fn phantom_probability(self, sensor: &SensorModel) -> f64 {
        let quiet = 1.0 - sensor.p_false_positive.get();
        match self {
            Detectors::Single => 1.0 - quiet,
            Detectors::Dual => 1.0 - quiet * quiet,
        }
    }
}
