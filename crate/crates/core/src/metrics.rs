//! Spike counting and waveform summary statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::Trajectory;

pub const MIN_SAMPLES: usize = 100;
pub const MAX_TRANSIENT_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsConfig {
    /// State component analysed (the membrane voltage by default).
    pub component: usize,
    /// Spike prominence threshold as a fraction of the peak-to-peak swing.
    pub prominence_fraction: f64,
    /// Absolute lower bound on the prominence threshold.
    pub amplitude_floor: f64,
    /// Resting value used for the after-hyperpolarization depth; the first
    /// sample of the trajectory when `None`.
    pub resting: Option<f64>,
}

impl MetricsConfig {
    pub fn new(amplitude_floor: f64) -> Self {
        MetricsConfig {
            component: 0,
            prominence_fraction: 0.2,
            amplitude_floor,
            resting: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveformMetrics {
    pub spike_count: usize,
    pub peak_to_peak: f64,
    pub resting: f64,
    /// Resting value minus the lowest post-spike value (zero without spikes).
    pub ahp_depth: f64,
    /// Mean inter-spike interval, when at least two spikes occur.
    pub period: Option<f64>,
}

/// Summarize the part of `traj` after the first `transient_fraction` of
/// its samples.
pub fn waveform_metrics(traj: &Trajectory, transient_fraction: f64, config: &MetricsConfig) -> Result<WaveformMetrics> {
    if traj.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: traj.len(),
        });
    }
    if !(0.0..=MAX_TRANSIENT_FRACTION).contains(&transient_fraction) {
        return Err(Error::Precondition(format!(
            "transient fraction {transient_fraction} outside [0, {MAX_TRANSIENT_FRACTION}]"
        )));
    }
    if config.component >= traj.states[0].len() {
        return Err(Error::param("component", "index exceeds state dimension"));
    }
    let v = traj.component(config.component);
    let start = (transient_fraction * v.len() as f64).floor() as usize;
    let window = &v[start..];
    let times = &traj.times[start..];

    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let peak_to_peak = hi - lo;
    let resting = config.resting.unwrap_or(v[0]);

    let threshold = (config.prominence_fraction * peak_to_peak).max(config.amplitude_floor);
    let peaks = if peak_to_peak < config.amplitude_floor {
        Vec::new()
    } else {
        prominent_peaks(window, threshold)
    };

    let ahp_depth = match peaks.first() {
        Some(&p) => resting - window[p..].iter().cloned().fold(f64::INFINITY, f64::min),
        None => 0.0,
    };
    let period = if peaks.len() >= 2 {
        Some((times[*peaks.last().unwrap()] - times[peaks[0]]) / (peaks.len() - 1) as f64)
    } else {
        None
    };
    Ok(WaveformMetrics {
        spike_count: peaks.len(),
        peak_to_peak,
        resting,
        ahp_depth,
        period,
    })
}

/// Indices of local maxima whose topographic prominence reaches
/// `threshold`. Plateaus count once, at their first sample.
pub fn prominent_peaks(x: &[f64], threshold: f64) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] && prominence(x, i, j) >= threshold {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn prominence(x: &[f64], first: usize, last: usize) -> f64 {
    let peak = x[first];
    let mut left_min = peak;
    for k in (0..first).rev() {
        if x[k] > peak {
            break;
        }
        left_min = left_min.min(x[k]);
    }
    let mut right_min = peak;
    for &xk in &x[last + 1..] {
        if xk > peak {
            break;
        }
        right_min = right_min.min(xk);
    }
    peak - left_min.max(right_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{SystemKind, UnitSystem};

    fn traj(v: Vec<f64>, dt: f64) -> Trajectory {
        Trajectory {
            kind: SystemKind::Inapik,
            state_names: vec!["v".into(), "n".into()],
            units: UnitSystem::MILLI,
            times: (0..v.len()).map(|k| k as f64 * dt).collect(),
            states: v.iter().map(|&x| vec![x, 0.0]).collect(),
            currents: vec![0.0; v.len()],
        }
    }

    #[test]
    fn counts_sine_cycles() {
        let v: Vec<f64> = (0..2000).map(|k| (k as f64 * 0.01 * std::f64::consts::TAU).sin()).collect();
        let m = waveform_metrics(&traj(v, 0.01), 0.0, &MetricsConfig::new(1e-3)).unwrap();
        assert_eq!(m.spike_count, 20);
        assert!((m.period.unwrap() - 1.0).abs() < 1e-9);
        assert!((m.peak_to_peak - 2.0).abs() < 1e-3);
    }

    #[test]
    fn small_ripples_ignored() {
        let v: Vec<f64> = (0..1000)
            .map(|k| {
                let t = k as f64 * 0.01;
                (t * std::f64::consts::TAU).sin() + 0.05 * (t * 40.0).sin()
            })
            .collect();
        let m = waveform_metrics(&traj(v, 0.01), 0.0, &MetricsConfig::new(1e-3)).unwrap();
        assert_eq!(m.spike_count, 10);
    }

    #[test]
    fn flat_trace_has_no_spikes() {
        let v = vec![-60.0; 500];
        let m = waveform_metrics(&traj(v, 0.1), 0.5, &MetricsConfig::new(1.0)).unwrap();
        assert_eq!(m.spike_count, 0);
        assert_eq!(m.ahp_depth, 0.0);
        assert_eq!(m.period, None);
    }

    #[test]
    fn preconditions() {
        let short = traj(vec![0.0; 99], 1.0);
        assert!(matches!(
            waveform_metrics(&short, 0.0, &MetricsConfig::new(1.0)),
            Err(Error::TooFewSamples { .. })
        ));
        let ok = traj(vec![0.0; 100], 1.0);
        assert!(waveform_metrics(&ok, 0.95, &MetricsConfig::new(1.0)).is_err());
        assert!(waveform_metrics(&ok, 0.9, &MetricsConfig::new(1.0)).is_ok());
    }

    #[test]
    fn ahp_relative_to_resting() {
        let mut v = vec![0.0; 300];
        v[100] = 10.0;
        for x in &mut v[101..150] {
            *x = -2.0;
        }
        let mut cfg = MetricsConfig::new(0.5);
        cfg.resting = Some(0.0);
        let m = waveform_metrics(&traj(v, 1.0), 0.0, &cfg).unwrap();
        assert_eq!(m.spike_count, 1);
        assert_eq!(m.ahp_depth, 2.0);
    }
}
