//! Adaptive Dormand–Prince 5(4) integration with dense output.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::InputProtocol;
use crate::systems::{NeuronSystem, SystemKind, UnitSystem};

/// Absolute tolerance floor applied to every component.
pub const ABS_TOL_FLOOR: f64 = 1e-9;
/// Steps shorter than this abort the run.
pub const MIN_STEP: f64 = 1e-15;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Right-hand side of a first-order system `y' = f(t, y)`.
pub trait Rhs {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
    /// Called on every accepted state; may clamp it onto an admissible set.
    fn project(&self, _y: &mut [f64]) {}
    /// Times where the right-hand side is discontinuous.
    fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrateOptions {
    pub t_start: f64,
    /// Relative tolerance, strictly inside `(1e-12, 1e-2)`.
    pub rtol: f64,
    pub atol: f64,
    pub sample_interval: f64,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            t_start: 0.0,
            rtol: 1e-8,
            atol: ABS_TOL_FLOOR,
            sample_interval: 0.01,
            max_step: None,
            max_steps: 50_000_000,
        }
    }
}

impl IntegrateOptions {
    pub fn with_sampling(rtol: f64, sample_interval: f64) -> Self {
        IntegrateOptions {
            rtol,
            sample_interval,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 1e-12 && self.rtol < 1e-2) {
            return Err(Error::param("tolerance", "must lie strictly between 1e-12 and 1e-2"));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(Error::param("atol", "must be positive"));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::param("sample_interval", "must be positive"));
        }
        if !self.t_start.is_finite() {
            return Err(Error::param("t_start", "must be finite"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::param("max_step", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Uniformly sampled solution of a driven neuron model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub kind: SystemKind,
    pub state_names: Vec<String>,
    pub units: UnitSystem,
    pub times: Vec<f64>,
    /// One row per sample.
    pub states: Vec<Vec<f64>>,
    /// Injected current at each sample.
    pub currents: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[k]).collect()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(|s| s.as_slice()).unwrap_or(&[])
    }
}

struct Driven<'a> {
    system: &'a dyn NeuronSystem,
    protocol: &'a InputProtocol,
}

impl Rhs for Driven<'_> {
    fn dim(&self) -> usize {
        self.system.dim()
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.system.derivatives(y, self.protocol.evaluate(t), dy)
    }
    fn project(&self, y: &mut [f64]) {
        self.system.project(y)
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.protocol.breakpoints(t0, t1)
    }
}

/// Integrate `system` from `initial` under `protocol` up to `t_end`,
/// sampling every `opts.sample_interval` (the end point is always
/// included).
pub fn integrate(
    system: &dyn NeuronSystem,
    initial: &[f64],
    protocol: &InputProtocol,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let protocol = &protocol.normalized();
    protocol.validate()?;
    if initial.len() != system.dim() {
        return Err(Error::param(
            "initial",
            format!("expected {} components, got {}", system.dim(), initial.len()),
        ));
    }
    let rhs = Driven { system, protocol };
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut currents = Vec::new();
    solve(&rhs, initial, t_end, opts, |t, y| {
        times.push(t);
        states.push(y.to_vec());
        currents.push(protocol.evaluate(t));
    })?;
    Ok(Trajectory {
        kind: system.kind(),
        state_names: system.state_names().iter().map(|s| s.to_string()).collect(),
        units: system.units(),
        times,
        states,
        currents,
    })
}

/// Generic driver. `on_sample` receives `(t, y)` at `t_start + k * dt` and
/// at `t_end`.
pub fn solve<R, S>(rhs: &R, y0: &[f64], t_end: f64, opts: &IntegrateOptions, mut on_sample: S) -> Result<()>
where
    R: Rhs + ?Sized,
    S: FnMut(f64, &[f64]),
{
    opts.validate()?;
    let t0 = opts.t_start;
    if !(t_end > t0) || !t_end.is_finite() {
        return Err(Error::param("t_end", "must be finite and after t_start"));
    }
    if y0.len() != rhs.dim() || y0.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("initial", "wrong dimension or non-finite entry"));
    }
    let n = y0.len();
    let dt = opts.sample_interval;
    let grid = sample_grid(t0, t_end, dt);

    let mut y = y0.to_vec();
    rhs.project(&mut y);
    on_sample(t0, &y);
    let mut next_sample = 1usize;

    let mut stops = rhs.breakpoints(t0, t_end);
    stops.push(t_end);

    let mut k = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut cont = vec![vec![0.0; n]; 5];
    let mut t = t0;
    let mut steps = 0usize;
    let max_step = opts.max_step.unwrap_or(f64::INFINITY);
    let mut h = f64::NAN;

    for &stop in &stops {
        if stop <= t {
            continue;
        }
        rhs.eval(t, &y, &mut k[0])?;
        if !h.is_finite() {
            h = initial_step(rhs, t, &y, &k[0], opts, stop - t, &mut ytmp)?;
        }
        let mut facmax = 10.0;
        let mut rejected_last = false;
        while t < stop {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::StepLimit {
                    t,
                    max_steps: opts.max_steps,
                });
            }
            h = h.min(max_step);
            let mut last = false;
            if t + h >= stop || t + 1.01 * h >= stop {
                h = stop - t;
                last = true;
            }
            if h < MIN_STEP {
                return Err(Error::StepUnderflow { t, step: h });
            }

            stages(rhs, t, h, &y, &mut k, &mut ytmp, &mut y1)?;

            let mut err = 0.0;
            for i in 0..n {
                let sk = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
                let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                err += (e / sk) * (e / sk);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                h *= 0.2;
                rejected_last = true;
                continue;
            }

            let fac = if err == 0.0 { facmax } else { (0.9 * err.powf(-0.2)).clamp(0.2, facmax) };
            if err <= 1.0 {
                for i in 0..n {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k[0][i] - ydiff;
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - h * k[6][i] - bspl;
                    cont[4][i] = h
                        * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
                }
                let t_new = if last { stop } else { t + h };
                while next_sample < grid.len() {
                    let ts = grid[next_sample];
                    if ts > t_new {
                        break;
                    }
                    let theta = ((ts - t) / h).clamp(0.0, 1.0);
                    let th1 = 1.0 - theta;
                    for i in 0..n {
                        ytmp[i] = cont[0][i]
                            + theta * (cont[1][i] + th1 * (cont[2][i] + theta * (cont[3][i] + th1 * cont[4][i])));
                    }
                    if ts == t_new {
                        ytmp.copy_from_slice(&y1);
                    }
                    rhs.project(&mut ytmp);
                    on_sample(ts, &ytmp);
                    next_sample += 1;
                }
                t = t_new;
                let before = y1.clone();
                rhs.project(&mut y1);
                std::mem::swap(&mut y, &mut y1);
                if before != y {
                    rhs.eval(t, &y, &mut k[0])?;
                } else {
                    let (first, rest) = k.split_at_mut(1);
                    first[0].copy_from_slice(&rest[5]);
                }
                let grow = if rejected_last { fac.min(1.0) } else { fac };
                h *= grow;
                facmax = 5.0;
                rejected_last = false;
            } else {
                h *= fac.min(1.0);
                rejected_last = true;
            }
        }
    }
    Ok(())
}

/// Classical fixed-step fourth-order Runge-Kutta, used as a reference for
/// the adaptive integrator. Each sampling interval is split into equal
/// steps no longer than `step`; the state is projected after every step.
pub fn integrate_rk4(
    system: &dyn NeuronSystem,
    initial: &[f64],
    protocol: &InputProtocol,
    t_end: f64,
    step: f64,
    sample_interval: f64,
) -> Result<Trajectory> {
    let protocol = &protocol.normalized();
    protocol.validate()?;
    if !(step > 0.0 && sample_interval > 0.0) {
        return Err(Error::param("step", "step and sample interval must be positive"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::param("t_end", "must be positive and finite"));
    }
    let n = system.dim();
    if initial.len() != n {
        return Err(Error::param("initial", format!("expected {n} components, got {}", initial.len())));
    }
    let rhs = Driven { system, protocol };
    let grid = sample_grid(0.0, t_end, sample_interval);
    let mut y = initial.to_vec();
    system.project(&mut y);
    let mut k = vec![vec![0.0; n]; 4];
    let mut tmp = vec![0.0; n];
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    let mut currents = vec![protocol.evaluate(0.0)];
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut cuts = vec![a];
        cuts.extend(protocol.breakpoints(a, b));
        cuts.push(b);
        for seg in cuts.windows(2) {
            let m = ((seg[1] - seg[0]) / step).ceil().max(1.0) as usize;
            let h = (seg[1] - seg[0]) / m as f64;
            for j in 0..m {
                let t = seg[0] + j as f64 * h;
                rhs.eval(t, &y, &mut k[0])?;
                for i in 0..n {
                    tmp[i] = y[i] + 0.5 * h * k[0][i];
                }
                rhs.eval(t + 0.5 * h, &tmp, &mut k[1])?;
                for i in 0..n {
                    tmp[i] = y[i] + 0.5 * h * k[1][i];
                }
                rhs.eval(t + 0.5 * h, &tmp, &mut k[2])?;
                for i in 0..n {
                    tmp[i] = y[i] + h * k[2][i];
                }
                rhs.eval(t + h, &tmp, &mut k[3])?;
                for i in 0..n {
                    y[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                }
                system.project(&mut y);
            }
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::StepUnderflow { t: b, step });
        }
        times.push(b);
        states.push(y.clone());
        currents.push(protocol.evaluate(b));
    }
    Ok(Trajectory {
        kind: system.kind(),
        state_names: system.state_names().iter().map(|s| s.to_string()).collect(),
        units: system.units(),
        times,
        states,
        currents,
    })
}

/// `t0 + k * dt` up to `t_end`, with `t_end` appended unless the grid
/// already lands on it.
pub fn sample_grid(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let n = ((t_end - t0) / dt).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * dt).filter(|&t| t <= t_end).collect();
    match grid.last() {
        Some(&last) if t_end - last <= 1e-9 * dt => {
            *grid.last_mut().unwrap() = t_end;
        }
        _ => grid.push(t_end),
    }
    grid
}

fn stages<R: Rhs + ?Sized>(
    rhs: &R,
    t: f64,
    h: f64,
    y: &[f64],
    k: &mut [Vec<f64>],
    ytmp: &mut [f64],
    y1: &mut [f64],
) -> Result<()> {
    let n = y.len();
    for i in 0..n {
        ytmp[i] = y[i] + h * A21 * k[0][i];
    }
    rhs.eval(t + C2 * h, ytmp, &mut k[1])?;
    for i in 0..n {
        ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
    }
    rhs.eval(t + C3 * h, ytmp, &mut k[2])?;
    for i in 0..n {
        ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
    }
    rhs.eval(t + C4 * h, ytmp, &mut k[3])?;
    for i in 0..n {
        ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
    }
    rhs.eval(t + C5 * h, ytmp, &mut k[4])?;
    for i in 0..n {
        ytmp[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
    }
    rhs.eval(t + h, ytmp, &mut k[5])?;
    for i in 0..n {
        y1[i] = y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
    }
    rhs.eval(t + h, y1, &mut k[6])?;
    Ok(())
}

fn initial_step<R: Rhs + ?Sized>(
    rhs: &R,
    t: f64,
    y: &[f64],
    f0: &[f64],
    opts: &IntegrateOptions,
    span: f64,
    ytmp: &mut [f64],
) -> Result<f64> {
    let n = y.len();
    let sk: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sk).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n as f64).sqrt();
    let d0 = norm(y);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    for i in 0..n {
        ytmp[i] = y[i] + h0 * f0[i];
    }
    let mut f1 = vec![0.0; n];
    rhs.eval(t + h0, ytmp, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span).min(opts.max_step.unwrap_or(f64::INFINITY)))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl Rhs for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = -y[0];
            Ok(())
        }
    }

    struct Rotation;
    impl Rhs for Rotation {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = -y[1];
            dy[1] = y[0];
            Ok(())
        }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = IntegrateOptions::with_sampling(1e-10, 0.1);
        let mut worst: f64 = 0.0;
        let mut count = 0;
        solve(&Decay, &[1.0], 5.0, &opts, |t, y| {
            worst = worst.max((y[0] - (-t).exp()).abs());
            count += 1;
        })
        .unwrap();
        assert_eq!(count, 51);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn dense_output_on_rotation() {
        let opts = IntegrateOptions::with_sampling(1e-9, 0.037);
        let mut worst: f64 = 0.0;
        let mut last_t = 0.0;
        solve(&Rotation, &[1.0, 0.0], 20.0, &opts, |t, y| {
            worst = worst.max((y[0] - t.cos()).abs()).max((y[1] - t.sin()).abs());
            last_t = t;
        })
        .unwrap();
        assert_eq!(last_t, 20.0);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn rejects_tolerance_outside_window() {
        for rtol in [1e-12, 1e-2, 0.5, 1e-13] {
            let opts = IntegrateOptions::with_sampling(rtol, 0.1);
            assert!(solve(&Decay, &[1.0], 1.0, &opts, |_, _| {}).is_err());
        }
    }
}
