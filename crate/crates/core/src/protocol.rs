//! Injected-current protocols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputProtocol {
    Constant {
        amplitude: f64,
    },
    /// `base` plus rectangular pulses of height `amplitude` starting at
    /// `onset`, repeating every `period`. `count = None` repeats forever.
    PulseTrain {
        base: f64,
        amplitude: f64,
        onset: f64,
        width: f64,
        period: f64,
        count: Option<usize>,
    },
    /// `base + slope * t`.
    Ramp {
        base: f64,
        slope: f64,
    },
    /// Linear interpolation through `(time, current)` points, held constant
    /// outside the covered interval.
    PiecewiseLinear {
        points: Vec<(f64, f64)>,
    },
}

impl InputProtocol {
    pub fn constant(amplitude: f64) -> Self {
        InputProtocol::Constant { amplitude }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputProtocol::Constant { amplitude } => finite("amplitude", *amplitude),
            InputProtocol::PulseTrain {
                base,
                amplitude,
                onset,
                width,
                period,
                ..
            } => {
                finite("base", *base)?;
                finite("amplitude", *amplitude)?;
                finite("onset", *onset)?;
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::param("width", "must be positive"));
                }
                if !(*period > 0.0 && period.is_finite()) {
                    return Err(Error::param("period", "must be positive"));
                }
                if width > period {
                    return Err(Error::param("width", "must not exceed the period"));
                }
                Ok(())
            }
            InputProtocol::Ramp { base, slope } => {
                finite("base", *base)?;
                finite("slope", *slope)
            }
            InputProtocol::PiecewiseLinear { points } => {
                if points.is_empty() {
                    return Err(Error::param("points", "need at least one breakpoint"));
                }
                for &(t, i) in points {
                    finite("points", t)?;
                    finite("points", i)?;
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::param("points", "breakpoint times must be strictly increasing"));
                }
                Ok(())
            }
        }
    }

    /// Drop zero-duration segments (repeated identical breakpoints).
    pub fn normalized(&self) -> Self {
        match self {
            InputProtocol::PiecewiseLinear { points } => {
                let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
                for &p in points {
                    if out.last() != Some(&p) {
                        out.push(p);
                    }
                }
                InputProtocol::PiecewiseLinear { points: out }
            }
            other => other.clone(),
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        match self {
            InputProtocol::Constant { amplitude } => *amplitude,
            InputProtocol::PulseTrain {
                base,
                amplitude,
                onset,
                width,
                period,
                count,
            } => {
                if t < *onset {
                    return *base;
                }
                let k = ((t - onset) / period).floor();
                if let Some(n) = count {
                    if k >= *n as f64 {
                        return *base;
                    }
                }
                let phase = t - onset - k * period;
                if phase < *width {
                    base + amplitude
                } else {
                    *base
                }
            }
            InputProtocol::Ramp { base, slope } => base + slope * t,
            InputProtocol::PiecewiseLinear { points } => {
                let first = points[0];
                if t <= first.0 {
                    return first.1;
                }
                let k = points.partition_point(|p| p.0 <= t);
                if k >= points.len() {
                    return points[points.len() - 1].1;
                }
                let (t0, i0) = points[k - 1];
                let (t1, i1) = points[k];
                i0 + (i1 - i0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Times in `(t0, t1)` where the protocol or its slope jumps.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            InputProtocol::Constant { .. } | InputProtocol::Ramp { .. } => {}
            InputProtocol::PulseTrain {
                onset,
                width,
                period,
                count,
                ..
            } => {
                let first = ((t0 - onset) / period).floor().max(0.0) as usize;
                let mut k = first;
                loop {
                    if let Some(n) = count {
                        if k >= *n {
                            break;
                        }
                    }
                    let start = onset + k as f64 * period;
                    if start >= t1 {
                        break;
                    }
                    for edge in [start, start + width] {
                        if edge > t0 && edge < t1 {
                            out.push(edge);
                        }
                    }
                    k += 1;
                }
            }
            InputProtocol::PiecewiseLinear { points } => {
                out.extend(points.iter().map(|p| p.0).filter(|&t| t > t0 && t < t1));
            }
        }
        out.dedup();
        out
    }
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, "must be finite"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_everywhere() {
        let p = InputProtocol::constant(70e-6);
        for t in [0.0, 1.0, 1e9] {
            assert_eq!(p.evaluate(t), 70e-6);
        }
    }

    #[test]
    fn ramp_starts_at_base() {
        let p = InputProtocol::Ramp { base: 0.0, slope: 3.0 };
        assert_eq!(p.evaluate(0.0), 0.0);
        assert_eq!(p.evaluate(2.0), 6.0);
    }

    #[test]
    fn pulse_inside_kth_pulse() {
        let p = InputProtocol::PulseTrain {
            base: 0.0,
            amplitude: 5.0,
            onset: 10.0,
            width: 2.0,
            period: 20.0,
            count: Some(3),
        };
        assert_eq!(p.evaluate(5.0), 0.0);
        assert_eq!(p.evaluate(11.0), 5.0);
        assert_eq!(p.evaluate(13.0), 0.0);
        assert_eq!(p.evaluate(51.5), 5.0);
        assert_eq!(p.evaluate(71.0), 0.0);
        assert_eq!(p.breakpoints(0.0, 100.0), vec![10.0, 12.0, 30.0, 32.0, 50.0, 52.0]);
    }

    #[test]
    fn piecewise_linear_interpolates() {
        let p = InputProtocol::PiecewiseLinear {
            points: vec![(0.0, 0.0), (10.0, 10.0), (20.0, 0.0)],
        };
        assert_eq!(p.evaluate(-1.0), 0.0);
        assert_eq!(p.evaluate(5.0), 5.0);
        assert_eq!(p.evaluate(15.0), 5.0);
        assert_eq!(p.evaluate(30.0), 0.0);
    }

    #[test]
    fn rejects_bad_protocols() {
        let p = InputProtocol::PiecewiseLinear {
            points: vec![(0.0, 0.0), (0.0, 1.0)],
        };
        assert!(p.validate().is_err());
        let p = InputProtocol::PulseTrain {
            base: 0.0,
            amplitude: 1.0,
            onset: 0.0,
            width: 0.0,
            period: 1.0,
            count: None,
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn normalization_drops_repeated_points() {
        let p = InputProtocol::PiecewiseLinear {
            points: vec![(0.0, 0.0), (5.0, 1.0), (5.0, 1.0), (9.0, 2.0)],
        };
        let n = p.normalized();
        assert!(n.validate().is_ok());
        for t in [0.0, 2.5, 5.0, 7.0, 12.0] {
            assert_eq!(n.evaluate(t), p.evaluate(t));
        }
    }
}
