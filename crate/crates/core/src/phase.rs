//! Nullclines, equilibria, linear stability, Hopf points and
//! current sweeps.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegrateOptions};
use crate::metrics::{waveform_metrics, MetricsConfig};
use crate::protocol::InputProtocol;
use crate::roots::{bisect, scan_brackets};
use crate::systems::{NeuronSystem, RailBranch, Slice};

/// Relative width of the band around `Re λ = 0` reported as marginal.
pub const MARGIN_BAND: f64 = 1e-6;
pub const MIN_SCAN_RESOLUTION: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn norm(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    CenterMarginal,
}

impl StabilityClass {
    pub fn is_stable(self) -> bool {
        matches!(self, StabilityClass::StableNode | StabilityClass::StableFocus)
    }

    pub fn name(self) -> &'static str {
        match self {
            StabilityClass::StableNode => "stable node",
            StabilityClass::StableFocus => "stable focus",
            StabilityClass::UnstableNode => "unstable node",
            StabilityClass::UnstableFocus => "unstable focus",
            StabilityClass::Saddle => "saddle",
            StabilityClass::CenterMarginal => "center-marginal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub state: Vec<f64>,
    /// Row-major Jacobian; rows of frozen components are zero.
    pub jacobian: Vec<Vec<f64>>,
    /// One eigenvalue per state component.
    pub eigenvalues: Vec<Eigenvalue>,
    pub class: StabilityClass,
    pub slice: Slice,
    /// Switching-law branch that keeps a frozen-resistance equilibrium
    /// stationary.
    pub branch: Option<RailBranch>,
    /// Euclidean norm of the derivative vector at `state`.
    pub residual: f64,
}

impl EquilibriumReport {
    /// Eigenvalues of the unfrozen block (the ones classification uses).
    pub fn active_eigenvalues(&self, frozen: &[usize]) -> Vec<Eigenvalue> {
        eigenvalues_of_block(&self.jacobian, frozen)
    }

    /// Largest real part among complex-conjugate eigenvalues, if any.
    pub fn complex_pair_real_part(&self) -> Option<f64> {
        complex_pair_real_part(&self.eigenvalues)
    }
}

fn complex_pair_real_part(eigs: &[Eigenvalue]) -> Option<f64> {
    let scale = eigs.iter().map(Eigenvalue::norm).fold(0.0, f64::max);
    eigs.iter()
        .filter(|e| e.im.abs() > 1e-9 * scale)
        .map(|e| e.re)
        .fold(None, |acc: Option<f64>, re| Some(acc.map_or(re, |a| a.max(re))))
}

/// Nullclines sampled on a voltage grid; `None` marks a gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullclineCurves {
    pub v: Vec<f64>,
    /// Second coordinate on the membrane-voltage nullcline.
    pub fast: Vec<Option<f64>>,
    /// Second coordinate on the slow-variable nullcline.
    pub slow: Vec<Option<f64>>,
}

pub fn nullcline_curves(system: &dyn NeuronSystem, v_grid: &[f64], current: f64) -> Result<NullclineCurves> {
    if v_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (lo, hi) = system.voltage_range();
    if v_grid.iter().any(|&v| !(v >= lo && v <= hi)) {
        return Err(Error::Precondition(format!("voltage grid must lie within [{lo}, {hi}]")));
    }
    if v_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("voltage grid must be strictly increasing".into()));
    }
    let fast = v_grid
        .iter()
        .map(|&v| system.fast_nullcline(v, current))
        .collect::<Result<Vec<_>>>()?;
    let slow = v_grid.iter().map(|&v| Some(system.slow_nullcline(v))).collect();
    Ok(NullclineCurves {
        v: v_grid.to_vec(),
        fast,
        slow,
    })
}

/// Central-difference Jacobian with step `max(1e-6 |x_i|, 1e-9)`.
pub fn jacobian(system: &dyn NeuronSystem, state: &[f64], current: f64) -> Result<Vec<Vec<f64>>> {
    let n = system.dim();
    if state.len() != n {
        return Err(Error::param("state", format!("expected {n} components")));
    }
    let mut jac = vec![vec![0.0; n]; n];
    let mut x = state.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = (1e-6 * state[j].abs()).max(1e-9);
        let (xp, xm) = (state[j] + h, state[j] - h);
        x[j] = xp;
        system.derivatives(&x, current, &mut fp)?;
        x[j] = xm;
        system.derivatives(&x, current, &mut fm)?;
        x[j] = state[j];
        let span = xp - xm;
        for i in 0..n {
            jac[i][j] = (fp[i] - fm[i]) / span;
        }
    }
    Ok(jac)
}

fn eigenvalues_of_block(jac: &[Vec<f64>], frozen: &[usize]) -> Vec<Eigenvalue> {
    let keep: Vec<usize> = (0..jac.len()).filter(|k| !frozen.contains(k)).collect();
    let m = keep.len();
    if m == 0 {
        return Vec::new();
    }
    let mat = DMatrix::from_fn(m, m, |i, j| jac[keep[i]][keep[j]]);
    mat.complex_eigenvalues()
        .iter()
        .map(|c| Eigenvalue { re: c.re, im: c.im })
        .collect()
}

/// Classify from eigenvalues; real parts within `MARGIN_BAND` of the
/// largest modulus count as zero.
pub fn classify(eigs: &[Eigenvalue]) -> StabilityClass {
    let scale = eigs.iter().map(Eigenvalue::norm).fold(0.0, f64::max);
    if scale == 0.0 || eigs.iter().any(|e| e.re.abs() < MARGIN_BAND * scale) {
        return StabilityClass::CenterMarginal;
    }
    let pos = eigs.iter().filter(|e| e.re > 0.0).count();
    let complex = eigs.iter().any(|e| e.im.abs() > 1e-9 * scale);
    match (pos, complex) {
        (0, true) => StabilityClass::StableFocus,
        (0, false) => StabilityClass::StableNode,
        (p, true) if p == eigs.len() => StabilityClass::UnstableFocus,
        (p, false) if p == eigs.len() => StabilityClass::UnstableNode,
        _ => StabilityClass::Saddle,
    }
}

/// Build the report for a known stationary state.
pub fn analyze_state(system: &dyn NeuronSystem, state: &[f64], current: f64, slice: Slice) -> Result<EquilibriumReport> {
    let frozen = system.frozen_components(slice);
    let mut jac = jacobian(system, state, current)?;
    for &k in &frozen {
        jac[k].iter_mut().for_each(|x| *x = 0.0);
    }
    let active = eigenvalues_of_block(&jac, &frozen);
    let class = classify(&active);
    let mut eigenvalues = active;
    eigenvalues.extend(frozen.iter().map(|_| Eigenvalue { re: 0.0, im: 0.0 }));
    let mut d = vec![0.0; state.len()];
    system.derivatives(state, current, &mut d)?;
    let residual = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(EquilibriumReport {
        state: state.to_vec(),
        jacobian: jac,
        eigenvalues,
        class,
        slice,
        branch: system.slice_branch(state, slice),
        residual,
    })
}

/// Equilibria at constant injected current, ordered by slice then voltage.
pub fn find_equilibria(
    system: &dyn NeuronSystem,
    current: f64,
    v_interval: (f64, f64),
    resolution: usize,
) -> Result<Vec<EquilibriumReport>> {
    let (lo, hi) = v_interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Precondition("voltage interval must be finite and non-empty".into()));
    }
    if resolution < MIN_SCAN_RESOLUTION {
        return Err(Error::Precondition(format!(
            "scan resolution must be at least {MIN_SCAN_RESOLUTION}"
        )));
    }
    let n = system.dim();
    let mut out: Vec<EquilibriumReport> = Vec::new();
    for slice in system.equilibrium_slices() {
        let failure = std::cell::RefCell::new(None);
        let residual = |v: f64| {
            let s = system.state_on_slice(v, slice);
            let mut d = vec![0.0; n];
            match system.derivatives(&s, current, &mut d) {
                Ok(()) => d[0],
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let brackets = scan_brackets(residual, lo, hi, resolution);
        let tol = 1e-9 * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let mut found: Vec<f64> = Vec::new();
        for (a, b) in brackets {
            let v = if a == b { a } else { bisect(residual, a, b, tol, "equilibrium")? };
            if !found.iter().any(|&u| (u - v).abs() <= tol) {
                found.push(v);
            }
        }
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        for v in found {
            let state = system.state_on_slice(v, slice);
            let report = analyze_state(system, &state, current, slice)?;
            let frozen_slice = !system.frozen_components(slice).is_empty();
            if frozen_slice && report.branch.is_none() {
                continue;
            }
            out.push(report);
        }
    }
    Ok(out)
}

/// Default voltage window and resolution for equilibrium scans.
pub fn default_scan(system: &dyn NeuronSystem) -> ((f64, f64), usize) {
    (system.voltage_range(), 2000)
}

/// The equilibrium followed across a sweep: the lowest-voltage one that is
/// not a saddle, falling back to the first.
pub fn tracked_equilibrium(reports: &[EquilibriumReport]) -> Option<&EquilibriumReport> {
    reports
        .iter()
        .find(|r| r.class != StabilityClass::Saddle)
        .or_else(|| reports.first())
}

/// Voltage of the tracked equilibrium at `current`: the resting value the
/// membrane oscillates around, used as the after-hyperpolarization
/// reference.
pub fn resting_reference(system: &dyn NeuronSystem, current: f64) -> Result<Option<f64>> {
    let (window, res) = default_scan(system);
    let eqs = find_equilibria(system, current, window, res)?;
    Ok(tracked_equilibrium(&eqs).map(|e| e.state[0]))
}

fn nearest(reports: &[EquilibriumReport], v: f64) -> Option<&EquilibriumReport> {
    reports
        .iter()
        .min_by(|a, b| (a.state[0] - v).abs().total_cmp(&(b.state[0] - v).abs()))
}

/// Largest real part among all eigenvalues.
pub fn dominant_real_part(eigs: &[Eigenvalue]) -> f64 {
    eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Locate the current where the tracked equilibrium loses or regains
/// stability through a complex-conjugate pair, by bisection on the dominant
/// real part over `[i_low, i_high]`.
///
/// The ends must have dominant real parts of opposite sign and at least one
/// end must already carry a complex pair; the crossing found must be
/// oscillatory, otherwise a precondition error is returned.
pub fn hopf_locate(system: &dyn NeuronSystem, i_low: f64, i_high: f64, tolerance: f64) -> Result<f64> {
    if !(tolerance > 0.0) {
        return Err(Error::param("tolerance", "must be positive"));
    }
    if !(i_low < i_high) {
        return Err(Error::Precondition("require i_low < i_high".into()));
    }
    let (window, res) = default_scan(system);
    let eq_low = find_equilibria(system, i_low, window, res)?;
    let start = tracked_equilibrium(&eq_low)
        .ok_or_else(|| Error::Precondition(format!("no equilibrium at I = {i_low}")))?;
    let mut v_ref = start.state[0];
    let re_low = dominant_real_part(&start.eigenvalues);
    let complex_low = start.complex_pair_real_part().is_some();

    let probe = |i: f64, v_ref: f64| -> Result<(f64, f64, bool)> {
        let eqs = find_equilibria(system, i, window, res)?;
        let e = nearest(&eqs, v_ref).ok_or_else(|| Error::Precondition(format!("no equilibrium at I = {i}")))?;
        Ok((e.state[0], dominant_real_part(&e.eigenvalues), e.complex_pair_real_part().is_some()))
    };
    let (_, re_high, complex_high) = probe(i_high, v_ref)?;
    if re_low.signum() == re_high.signum() || re_low == 0.0 || re_high == 0.0 {
        return Err(Error::Precondition(format!(
            "dominant real parts at the bracket ends have matching signs ({re_low:e}, {re_high:e})"
        )));
    }
    if !(complex_low || complex_high) {
        return Err(Error::Precondition("no complex eigenvalue pair at either bracket end".into()));
    }
    let (mut a, mut b) = (i_low, i_high);
    let sign_a = re_low.signum();
    let mut complex_near = (complex_low, complex_high);
    while b - a > tolerance {
        let m = 0.5 * (a + b);
        let (v_m, re_m, complex_m) = probe(m, v_ref)?;
        v_ref = v_m;
        if re_m == 0.0 {
            complex_near = (complex_m, complex_m);
            a = m;
            b = m;
            break;
        }
        if re_m.signum() == sign_a {
            a = m;
            complex_near.0 = complex_m;
        } else {
            b = m;
            complex_near.1 = complex_m;
        }
    }
    if !(complex_near.0 && complex_near.1) {
        return Err(Error::Precondition(format!(
            "stability change near I = {} is not through a complex pair",
            0.5 * (a + b)
        )));
    }
    Ok(0.5 * (a + b))
}

/// Simulation settings shared by sweeps and amplitude curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub rtol: f64,
    pub sample_interval: f64,
    pub transient_fraction: f64,
    pub scan_resolution: usize,
    pub v_interval: Option<(f64, f64)>,
    /// Offset added to every component of the starting equilibrium.
    pub perturbation: f64,
    /// Simulate every point, not only those with an unstable equilibrium.
    pub always_simulate: bool,
    /// Absolute tolerance for Hopf refinement; `None` uses 1e-6 of the
    /// bracketing sweep interval.
    pub hopf_tolerance: Option<f64>,
}

impl SimConfig {
    /// Defaults scaled by the system's slow time constant.
    pub fn for_system(system: &dyn NeuronSystem) -> Self {
        let tau = system.time_constant();
        SimConfig {
            t_end: 400.0 * tau,
            rtol: 1e-8,
            sample_interval: tau / 100.0,
            transient_fraction: 0.5,
            scan_resolution: 2000,
            v_interval: None,
            perturbation: 1e-3,
            always_simulate: false,
            hopf_tolerance: None,
        }
    }

    fn window(&self, system: &dyn NeuronSystem) -> (f64, f64) {
        self.v_interval.unwrap_or_else(|| system.voltage_range())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub current: f64,
    pub equilibria: Vec<EquilibriumReport>,
    /// Post-transient `(min, max)` of the membrane voltage when a cycle is
    /// present.
    pub envelope: Option<(f64, f64)>,
    /// Integrator or analysis failure at this point.
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn tracked(&self) -> Option<&EquilibriumReport> {
        tracked_equilibrium(&self.equilibria)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopfPoint {
    pub current: f64,
    /// Sweep values on either side of the stability change.
    pub bracket: (f64, f64),
    /// Whether `current` was refined by `hopf_locate`.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationDiagram {
    pub points: Vec<SweepPoint>,
    pub hopf: Vec<HopfPoint>,
}

fn check_sweep(i_values: &[f64]) -> Result<()> {
    if i_values.len() < 2 {
        return Err(Error::Precondition("a sweep needs at least two current values".into()));
    }
    if i_values.windows(2).any(|w| w[1] <= w[0]) || i_values.iter().any(|i| !i.is_finite()) {
        return Err(Error::Precondition("sweep values must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Starting state for a run at `current`: the tracked equilibrium nudged by
/// `perturbation`, or the middle of the voltage window on the first slice.
fn start_state(system: &dyn NeuronSystem, eqs: &[EquilibriumReport], window: (f64, f64), perturbation: f64) -> Vec<f64> {
    let mut s = match tracked_equilibrium(eqs) {
        Some(e) => e.state.clone(),
        None => system.state_on_slice(0.5 * (window.0 + window.1), system.equilibrium_slices()[0]),
    };
    let frozen = eqs.first().map(|e| system.frozen_components(e.slice)).unwrap_or_default();
    for (k, x) in s.iter_mut().enumerate() {
        if !frozen.contains(&k) {
            *x += perturbation;
        }
    }
    system.project(&mut s);
    s
}

fn simulate_window(system: &dyn NeuronSystem, start: &[f64], current: f64, cfg: &SimConfig) -> Result<Vec<f64>> {
    let opts = IntegrateOptions::with_sampling(cfg.rtol, cfg.sample_interval);
    let traj = integrate(system, start, &InputProtocol::constant(current), cfg.t_end, &opts)?;
    let v = traj.component(0);
    let skip = (cfg.transient_fraction * v.len() as f64).floor() as usize;
    Ok(v[skip..].to_vec())
}

fn sweep_point(system: &dyn NeuronSystem, current: f64, cfg: &SimConfig) -> SweepPoint {
    let window = cfg.window(system);
    let equilibria = match find_equilibria(system, current, window, cfg.scan_resolution) {
        Ok(e) => e,
        Err(e) => {
            return SweepPoint {
                current,
                equilibria: Vec::new(),
                envelope: None,
                error: Some(e.to_string()),
            }
        }
    };
    let needs_run = cfg.always_simulate || tracked_equilibrium(&equilibria).is_none_or(|e| !e.class.is_stable());
    let mut point = SweepPoint {
        current,
        equilibria,
        envelope: None,
        error: None,
    };
    if needs_run {
        let start = start_state(system, &point.equilibria, window, cfg.perturbation);
        match simulate_window(system, &start, current, cfg) {
            Ok(v) => {
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi - lo >= system.amplitude_floor() {
                    point.envelope = Some((lo, hi));
                }
            }
            Err(e) => point.error = Some(e.to_string()),
        }
    }
    point
}

/// Equilibria, stability and limit-cycle envelopes across `i_values`.
/// Points run in parallel; output order follows the sweep.
pub fn bifurcation_sweep(system: &dyn NeuronSystem, i_values: &[f64], cfg: &SimConfig) -> Result<BifurcationDiagram> {
    check_sweep(i_values)?;
    let points: Vec<SweepPoint> = i_values.par_iter().map(|&i| sweep_point(system, i, cfg)).collect();

    let mut hopf = Vec::new();
    for w in points.windows(2) {
        let (Some(a), Some(b)) = (w[0].tracked(), w[1].tracked()) else {
            continue;
        };
        if a.complex_pair_real_part().is_none() && b.complex_pair_real_part().is_none() {
            continue;
        }
        if dominant_real_part(&a.eigenvalues).signum() == dominant_real_part(&b.eigenvalues).signum() {
            continue;
        }
        let bracket = (w[0].current, w[1].current);
        let tol = cfg.hopf_tolerance.unwrap_or(1e-6 * (bracket.1 - bracket.0));
        let (current, refined) = match hopf_locate(system, bracket.0, bracket.1, tol) {
            Ok(i) => (i, true),
            Err(_) => (0.5 * (bracket.0 + bracket.1), false),
        };
        hopf.push(HopfPoint {
            current,
            bracket,
            refined,
        });
    }
    Ok(BifurcationDiagram { points, hopf })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudePoint {
    pub current: f64,
    pub peak_to_peak: Option<f64>,
    pub spike_count: Option<usize>,
    pub error: Option<String>,
}

/// Post-transient peak-to-peak membrane voltage per current value.
pub fn amplitude_curve(system: &dyn NeuronSystem, i_values: &[f64], cfg: &SimConfig) -> Result<Vec<AmplitudePoint>> {
    check_sweep(i_values)?;
    let window = cfg.window(system);
    Ok(i_values
        .par_iter()
        .map(|&current| {
            let run = || -> Result<(f64, usize)> {
                let eqs = find_equilibria(system, current, window, cfg.scan_resolution)?;
                let start = start_state(system, &eqs, window, cfg.perturbation);
                let opts = IntegrateOptions::with_sampling(cfg.rtol, cfg.sample_interval);
                let traj = integrate(system, &start, &InputProtocol::constant(current), cfg.t_end, &opts)?;
                let m = waveform_metrics(&traj, cfg.transient_fraction, &MetricsConfig::new(system.amplitude_floor()))?;
                Ok((m.peak_to_peak, m.spike_count))
            };
            match run() {
                Ok((p2p, n)) => AmplitudePoint {
                    current,
                    peak_to_peak: Some(p2p),
                    spike_count: Some(n),
                    error: None,
                },
                Err(e) => AmplitudePoint {
                    current,
                    peak_to_peak: None,
                    spike_count: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
