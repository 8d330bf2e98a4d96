//! Time-dependent families `c(t) = sum_k p_k(t) v_k` with scalar profiles.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize};

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant {
        #[serde(with = "crate::cplx", default = "one")]
        value: Complex64,
    },
    /// `sin(frequency t + phase)`.
    Sine {
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `exp(i frequency t)`.
    Phase { frequency: f64 },
    /// Linear interpolation through `(knots, values)`, constant outside.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
}

impl TimeProfile {
    pub fn constant() -> Self {
        TimeProfile::Constant { value: one() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TimeProfile::PiecewiseLinear { knots, values } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::InvalidProblem(
                        "piecewise-linear profile needs matching non-empty knots and values".into(),
                    ));
                }
                if knots.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidProblem(
                        "profile knots must increase strictly".into(),
                    ));
                }
                Ok(())
            }
            TimeProfile::Sine { frequency, phase }
                if !(frequency.is_finite() && phase.is_finite()) =>
            {
                Err(Error::InvalidProblem("non-finite sine profile".into()))
            }
            TimeProfile::Phase { frequency } if !frequency.is_finite() => {
                Err(Error::InvalidProblem("non-finite phase profile".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::Sine { frequency, phase } => {
                Complex64::new((frequency * t + phase).sin(), 0.0)
            }
            TimeProfile::Phase { frequency } => Complex64::new(0.0, frequency * t).exp(),
            TimeProfile::PiecewiseLinear { knots, values } => {
                let n = knots.len();
                let v = if t <= knots[0] {
                    values[0]
                } else if t >= knots[n - 1] {
                    values[n - 1]
                } else {
                    let k = knots.partition_point(|s| *s <= t) - 1;
                    let a = (t - knots[k]) / (knots[k + 1] - knots[k]);
                    values[k] * (1.0 - a) + values[k + 1] * a
                };
                Complex64::new(v, 0.0)
            }
        }
    }

    /// `d/dt` of the profile (one-sided slope at piecewise-linear knots).
    pub fn eval_derivative(&self, t: f64) -> Complex64 {
        match self {
            TimeProfile::Constant { .. } => Complex64::new(0.0, 0.0),
            TimeProfile::Sine { frequency, phase } => {
                Complex64::new(frequency * (frequency * t + phase).cos(), 0.0)
            }
            TimeProfile::Phase { frequency } => {
                Complex64::new(0.0, *frequency) * Complex64::new(0.0, frequency * t).exp()
            }
            TimeProfile::PiecewiseLinear { knots, values } => {
                let n = knots.len();
                if n < 2 || t < knots[0] || t >= knots[n - 1] {
                    return Complex64::new(0.0, 0.0);
                }
                let k = knots.partition_point(|s| *s <= t) - 1;
                Complex64::new((values[k + 1] - values[k]) / (knots[k + 1] - knots[k]), 0.0)
            }
        }
    }

    /// `sup_t |p(t)|`.
    pub fn sup_abs(&self) -> f64 {
        match self {
            TimeProfile::Constant { value } => value.norm(),
            TimeProfile::Sine { .. } | TimeProfile::Phase { .. } => 1.0,
            TimeProfile::PiecewiseLinear { values, .. } => {
                values.iter().fold(0.0, |a, v| a.max(v.abs()))
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            TimeProfile::Constant { .. } => true,
            TimeProfile::PiecewiseLinear { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveTerm<T> {
    pub profile: TimeProfile,
    pub value: T,
}

/// A continuous curve in `t`, linear in its spatial parts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeCurve<T> {
    pub terms: Vec<CurveTerm<T>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CurveRepr<T> {
    Terms { terms: Vec<CurveTerm<T>> },
    Keyframes { keyframes: Vec<(f64, T)> },
    Single(T),
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for TimeCurve<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match CurveRepr::deserialize(d)? {
            CurveRepr::Terms { terms } => TimeCurve { terms },
            CurveRepr::Keyframes { keyframes } => {
                TimeCurve::keyframes(keyframes).map_err(serde::de::Error::custom)?
            }
            CurveRepr::Single(v) => TimeCurve::constant(v),
        })
    }
}

impl<T> Default for TimeCurve<T> {
    fn default() -> Self {
        TimeCurve { terms: Vec::new() }
    }
}

impl<T> TimeCurve<T> {
    pub fn zero() -> Self {
        TimeCurve { terms: Vec::new() }
    }

    pub fn constant(value: T) -> Self {
        TimeCurve {
            terms: vec![CurveTerm {
                profile: TimeProfile::constant(),
                value,
            }],
        }
    }

    pub fn with_profile(profile: TimeProfile, value: T) -> Self {
        TimeCurve {
            terms: vec![CurveTerm { profile, value }],
        }
    }

    pub fn push(&mut self, profile: TimeProfile, value: T) {
        self.terms.push(CurveTerm { profile, value });
    }

    /// Key-frame curve: the value at `t` interpolates linearly between the
    /// neighbouring frames and is constant outside the frame range.
    pub fn keyframes(frames: Vec<(f64, T)>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidProblem(
                "keyframe curve needs at least one frame".into(),
            ));
        }
        let knots: Vec<f64> = frames.iter().map(|f| f.0).collect();
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidProblem(
                "keyframe times must increase strictly".into(),
            ));
        }
        let n = frames.len();
        let terms = frames
            .into_iter()
            .enumerate()
            .map(|(k, (_, value))| {
                let mut values = vec![0.0; n];
                values[k] = 1.0;
                CurveTerm {
                    profile: TimeProfile::PiecewiseLinear {
                        knots: knots.clone(),
                        values,
                    },
                    value,
                }
            })
            .collect();
        Ok(TimeCurve { terms })
    }

    pub fn validate(&self) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.profile.validate())
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|t| t.profile.is_constant())
    }

    /// Scalar weights of every term at time `t`.
    pub fn weights(&self, t: f64) -> Vec<Complex64> {
        self.terms.iter().map(|term| term.profile.eval(t)).collect()
    }

    pub fn map<U, F: FnMut(&T) -> Result<U>>(&self, mut f: F) -> Result<TimeCurve<U>> {
        Ok(TimeCurve {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    Ok(CurveTerm {
                        profile: t.profile.clone(),
                        value: f(&t.value)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyframes_interpolate_values() {
        let c = TimeCurve::keyframes(vec![(0.0, 1.0), (1.0, 3.0), (2.0, -1.0)]).unwrap();
        let at = |t: f64| -> f64 {
            c.weights(t)
                .iter()
                .zip(&c.terms)
                .map(|(w, term)| w.re * term.value)
                .sum()
        };
        assert!((at(0.5) - 2.0).abs() < 1e-15);
        assert!((at(1.5) - 1.0).abs() < 1e-15);
        assert_eq!(at(-1.0), 1.0);
        assert_eq!(at(5.0), -1.0);
        for t in [0.1, 0.9, 1.7] {
            let s: f64 = c.weights(t).iter().map(|w| w.re).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sine_profile_vanishes_at_zero() {
        let p = TimeProfile::Sine {
            frequency: 1.0,
            phase: 0.0,
        };
        assert_eq!(p.eval(0.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn deserializes_bare_value_and_keyframes() {
        let c: TimeCurve<f64> = serde_json::from_str("2.5").unwrap();
        assert!(c.is_time_independent());
        let k: TimeCurve<f64> =
            serde_json::from_str(r#"{"keyframes":[[0.0,1.0],[1.0,2.0]]}"#).unwrap();
        assert_eq!(k.terms.len(), 2);
        let t: TimeCurve<f64> = serde_json::from_str(
            r#"{"terms":[{"profile":{"kind":"sine","frequency":2.0},"value":1.0}]}"#,
        )
        .unwrap();
        assert!(!t.is_time_independent());
    }

    #[test]
    fn rejects_unsorted_keyframes() {
        assert!(TimeCurve::keyframes(vec![(1.0, 0.0), (0.5, 1.0)]).is_err());
    }
}
