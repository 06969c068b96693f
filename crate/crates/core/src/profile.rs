//! Closed-form scalar time functions used for trajectories, disturbances and
//! actuator health. Each family also provides its time derivative.

use serde::{Deserialize, Serialize};

use crate::so3::Vec3;

/// A named scalar function of time.
///
/// `frequency` is in rad/s and `phase` in rad for every periodic family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    /// `value`
    Constant { value: f64 },
    /// `offset + amplitude · sin(frequency·t + phase)`
    Sine {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `offset + amplitude · cos(frequency·t + phase)`
    Cosine {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `offset + amplitude · |sin(frequency·t + phase)|`
    AbsSine {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl TimeProfile {
    pub const ZERO: TimeProfile = TimeProfile::Constant { value: 0.0 };

    pub fn constant(value: f64) -> Self {
        TimeProfile::Constant { value }
    }

    pub fn sine(offset: f64, amplitude: f64, frequency: f64) -> Self {
        TimeProfile::Sine {
            offset,
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn cosine(offset: f64, amplitude: f64, frequency: f64) -> Self {
        TimeProfile::Cosine {
            offset,
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn abs_sine(offset: f64, amplitude: f64, frequency: f64) -> Self {
        TimeProfile::AbsSine {
            offset,
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant { value } => value,
            TimeProfile::Sine {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (frequency * t + phase).sin(),
            TimeProfile::Cosine {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (frequency * t + phase).cos(),
            TimeProfile::AbsSine {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (frequency * t + phase).sin().abs(),
        }
    }

    /// Time derivative. For `AbsSine` the one-sided derivative from the right
    /// is returned at the kinks.
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant { .. } => 0.0,
            TimeProfile::Sine {
                amplitude,
                frequency,
                phase,
                ..
            } => amplitude * frequency * (frequency * t + phase).cos(),
            TimeProfile::Cosine {
                amplitude,
                frequency,
                phase,
                ..
            } => -amplitude * frequency * (frequency * t + phase).sin(),
            TimeProfile::AbsSine {
                amplitude,
                frequency,
                phase,
                ..
            } => {
                let arg = frequency * t + phase;
                let sign = if arg.sin() >= 0.0 { 1.0 } else { -1.0 };
                sign * amplitude * frequency * arg.cos()
            }
        }
    }

    /// Upper bound on `|f(t)|` over all t.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            TimeProfile::Constant { value } => value.abs(),
            TimeProfile::Sine {
                offset, amplitude, ..
            }
            | TimeProfile::Cosine {
                offset, amplitude, ..
            } => offset.abs() + amplitude.abs(),
            TimeProfile::AbsSine {
                offset, amplitude, ..
            } => offset.abs().max((offset + amplitude).abs()),
        }
    }
}

/// Three scalar profiles forming a vector-valued function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VecProfile(pub [TimeProfile; 3]);

impl VecProfile {
    pub const ZERO: VecProfile = VecProfile([TimeProfile::ZERO; 3]);

    pub fn constant(v: Vec3) -> Self {
        VecProfile([
            TimeProfile::constant(v.x),
            TimeProfile::constant(v.y),
            TimeProfile::constant(v.z),
        ])
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        Vec3::new(self.0[0].eval(t), self.0[1].eval(t), self.0[2].eval(t))
    }

    pub fn derivative(&self, t: f64) -> Vec3 {
        Vec3::new(
            self.0[0].derivative(t),
            self.0[1].derivative(t),
            self.0[2].derivative(t),
        )
    }

    /// Largest `‖f(t)‖` over a uniform grid on `[0, horizon]`.
    pub fn max_norm_on_grid(&self, horizon: f64, step: f64) -> f64 {
        grid(horizon, step)
            .map(|t| self.eval(t).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_derivative_norm_on_grid(&self, horizon: f64, step: f64) -> f64 {
        grid(horizon, step)
            .map(|t| self.derivative(t).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn grid(horizon: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = (horizon / step).floor() as usize;
    (0..=n).map(move |i| i as f64 * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn derivatives_match_central_differences() {
        let profiles = [
            TimeProfile::constant(0.3),
            TimeProfile::sine(0.1, 2.0, 0.7),
            TimeProfile::cosine(0.7, -0.1, 1.0),
            TimeProfile::abs_sine(1.0, -0.1, 1.0),
        ];
        let h = 1e-6;
        for p in profiles {
            for t in [0.3, 1.9, 4.0, 11.5] {
                let fd = (p.eval(t + h) - p.eval(t - h)) / (2.0 * h);
                assert_abs_diff_eq!(p.derivative(t), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn config_form_parses() {
        let p: TimeProfile =
            toml::from_str("kind = \"abs-sine\"\noffset = 1.0\namplitude = -0.1\nfrequency = 1.0")
                .unwrap();
        assert_eq!(p, TimeProfile::abs_sine(1.0, -0.1, 1.0));
        assert_abs_diff_eq!(p.eval(std::f64::consts::FRAC_PI_2), 0.9, epsilon = 1e-15);
    }
}
