//! Current-voltage characteristics of the NNDR elements.

use rayon::prelude::*;
use serde::Serialize;

use crate::device::{memristor_current, memristor_rate_unchecked, nndr_pair_current, NndrPairSpec, UnipolarMemristorParams};
use crate::error::{Error, Result};
use crate::integrate::{solve, IntegrateOptions, Rhs};

/// Slopes must be below `-NDR_SLOPE_THRESHOLD` (S) to count as negative.
pub const NDR_SLOPE_THRESHOLD: f64 = 1e-12;
pub const MIN_STATIC_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchTag {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IvSample {
    pub v: f64,
    /// `None` where the operating point could not be solved.
    pub i: Option<f64>,
    /// Device resistance, for stateful elements.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvBranch {
    pub tag: BranchTag,
    pub samples: Vec<IvSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvCurve {
    pub branches: Vec<IvBranch>,
}

impl IvCurve {
    pub fn concat(mut self, other: IvCurve) -> IvCurve {
        self.branches.extend(other.branches);
        self
    }

    pub fn samples(&self) -> impl Iterator<Item = (BranchTag, &IvSample)> {
        self.branches.iter().flat_map(|b| b.samples.iter().map(move |s| (b.tag, s)))
    }
}

/// Terminal current of the pair on a uniform voltage grid; unsolvable
/// points become gaps.
pub fn static_iv_sweep(spec: &NndrPairSpec, v_min: f64, v_max: f64, n_points: usize) -> Result<IvCurve> {
    if n_points < MIN_STATIC_POINTS {
        return Err(Error::Precondition(format!("need at least {MIN_STATIC_POINTS} points")));
    }
    if !(v_min < v_max && v_min.is_finite() && v_max.is_finite()) {
        return Err(Error::Precondition("require finite v_min < v_max".into()));
    }
    spec.validate()?;
    let step = (v_max - v_min) / (n_points - 1) as f64;
    let samples = (0..n_points)
        .into_par_iter()
        .map(|k| {
            let v = if k == n_points - 1 { v_max } else { v_min + step * k as f64 };
            IvSample {
                v,
                i: nndr_pair_current(spec, v).ok(),
                r: None,
            }
        })
        .collect();
    Ok(IvCurve {
        branches: vec![IvBranch {
            tag: BranchTag::Forward,
            samples,
        }],
    })
}

/// Sweep rate (V/s) at which a full SET transition at the SET threshold
/// takes 10% of the rising half of the drive.
pub fn default_sweep_rate(p: &UnipolarMemristorParams, v_peak: f64) -> f64 {
    0.1 * v_peak * p.beta_rate * p.v_set / (p.r_off - p.r_on)
}

struct TriangleDrive<'a> {
    p: &'a UnipolarMemristorParams,
    v_peak: f64,
    rate: f64,
}

impl TriangleDrive<'_> {
    fn half_period(&self) -> f64 {
        self.v_peak / self.rate
    }

    fn voltage(&self, t: f64) -> f64 {
        let th = self.half_period();
        if t <= th {
            self.rate * t
        } else {
            (self.v_peak - self.rate * (t - th)).max(0.0)
        }
    }
}

impl Rhs for TriangleDrive<'_> {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = memristor_rate_unchecked(self.p, self.p.clamp(y[0]), self.voltage(t));
        Ok(())
    }
    fn project(&self, y: &mut [f64]) {
        y[0] = self.p.clamp(y[0]);
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let th = self.half_period();
        let mut out = Vec::new();
        for level in [self.p.v_set, self.p.v_rst] {
            if level < self.v_peak {
                out.push(level / self.rate);
                out.push(th + (self.v_peak - level) / self.rate);
            }
        }
        out.push(th);
        out.retain(|&t| t > t0 && t < t1);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// Drive the memristor with a triangular `0 → v_peak → 0` voltage at
/// `sweep_rate` (V/s), integrating its resistance, and record
/// `n_per_branch` samples on each of the rising and falling branches.
pub fn quasistatic_memristor_iv(
    p: &UnipolarMemristorParams,
    v_peak: f64,
    sweep_rate: f64,
    r_initial: f64,
    n_per_branch: usize,
) -> Result<IvCurve> {
    p.validate()?;
    if !(v_peak > 0.0 && v_peak.is_finite()) {
        return Err(Error::Precondition("v_peak must be positive".into()));
    }
    if !(sweep_rate > 0.0 && sweep_rate.is_finite()) {
        return Err(Error::Precondition("sweep rate must be positive".into()));
    }
    if !(r_initial >= p.r_on && r_initial <= p.r_off) {
        return Err(Error::ResistanceOutOfRange {
            r: r_initial,
            r_on: p.r_on,
            r_off: p.r_off,
        });
    }
    if n_per_branch < 2 {
        return Err(Error::Precondition("need at least two samples per branch".into()));
    }
    let drive = TriangleDrive {
        p,
        v_peak,
        rate: sweep_rate,
    };
    let th = drive.half_period();
    let dt = th / (n_per_branch - 1) as f64;
    let opts = IntegrateOptions {
        rtol: 1e-9,
        atol: 1e-9 * p.r_on,
        sample_interval: dt,
        // Never step across a whole switching window.
        max_step: Some(dt),
        ..Default::default()
    };
    let mut rows: Vec<(f64, f64)> = Vec::with_capacity(2 * n_per_branch);
    solve(&drive, &[r_initial], 2.0 * th, &opts, |t, y| rows.push((t, y[0])))?;

    let mut forward = Vec::with_capacity(n_per_branch);
    let mut reverse = Vec::with_capacity(n_per_branch);
    for (t, r) in rows {
        let v = drive.voltage(t);
        let sample = IvSample {
            v,
            i: Some(memristor_current(p, r, v)?),
            r: Some(r),
        };
        if t <= th * (1.0 + 1e-12) {
            forward.push(sample);
        }
        if t >= th * (1.0 - 1e-12) {
            reverse.push(sample);
        }
    }
    Ok(IvCurve {
        branches: vec![
            IvBranch {
                tag: BranchTag::Forward,
                samples: forward,
            },
            IvBranch {
                tag: BranchTag::Reverse,
                samples: reverse,
            },
        ],
    })
}

/// Voltage intervals `(low, high)` where the current falls with rising
/// voltage. Runs are broken by gaps and by branch boundaries.
pub fn ndr_intervals(curve: &IvCurve) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for branch in &curve.branches {
        let s = &branch.samples;
        if s.len() < 3 {
            continue;
        }
        let mut run: Option<(f64, f64)> = None;
        for w in s.windows(2) {
            let negative = match (w[0].i, w[1].i) {
                (Some(i0), Some(i1)) if w[1].v != w[0].v => (i1 - i0) / (w[1].v - w[0].v) < -NDR_SLOPE_THRESHOLD,
                _ => false,
            };
            if negative {
                let (lo, hi) = (w[0].v.min(w[1].v), w[0].v.max(w[1].v));
                run = Some(match run {
                    Some((a, b)) => (a.min(lo), b.max(hi)),
                    None => (lo, hi),
                });
            } else if let Some(r) = run.take() {
                out.push(r);
            }
        }
        if let Some(r) = run {
            out.push(r);
        }
    }
    out
}
