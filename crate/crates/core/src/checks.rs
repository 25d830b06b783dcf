//! Self-check suite: numerical invariants evaluated on the presets.

use serde::Serialize;

use crate::config::{Experiment, SystemSpec};
use crate::error::Result;
use crate::integrate::{integrate, integrate_rk4, IntegrateOptions, Trajectory};
use crate::metrics::{waveform_metrics, MetricsConfig};
use crate::params::inapik_fig2;
use crate::phase::{find_equilibria, hopf_locate, jacobian, tracked_equilibrium};
use crate::presets::all_presets;
use crate::protocol::InputProtocol;
use crate::run::default_initial;
use crate::systems::{Inapik, NeuronSystem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((ok, d)) => Check::new(name, ok, d),
            Err(e) => Check::new(name, false, format!("error: {e}")),
        }
    }
}

/// Largest pointwise voltage difference between two trajectories on the
/// same grid, relative to the voltage range of the first.
pub fn relative_voltage_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    let va = a.component(0);
    let vb = b.component(0);
    let lo = va.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = va.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dev = va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if hi > lo {
        dev / (hi - lo)
    } else {
        dev
    }
}

/// Peak-to-peak ratio at `hopf + 4 delta` over `hopf + delta`; close to 2
/// for a supercritical Hopf bifurcation.
pub fn sqrt_delta_ratio(system: &dyn NeuronSystem, hopf: f64, delta: f64, t_end: f64, dt: f64) -> Result<f64> {
    let mut amp = [0.0; 2];
    for (k, d) in [delta, 4.0 * delta].into_iter().enumerate() {
        let i = hopf + d;
        let eqs = find_equilibria(system, i, system.voltage_range(), 2000)?;
        let mut start = tracked_equilibrium(&eqs)
            .map(|e| e.state.clone())
            .ok_or_else(|| crate::Error::Precondition("no equilibrium near the bifurcation".into()))?;
        start[0] += 1e-3 * system.units().volts;
        let traj = integrate(
            system,
            &start,
            &InputProtocol::constant(i),
            t_end,
            &IntegrateOptions::with_sampling(1e-9, dt),
        )?;
        amp[k] = waveform_metrics(&traj, 0.8, &MetricsConfig::new(system.amplitude_floor()))?.peak_to_peak;
    }
    Ok(amp[1] / amp[0])
}

fn jacobian_check() -> Check {
    let sys = Inapik::new(inapik_fig2()).expect("caption parameters are valid");
    let mut worst: f64 = 0.0;
    for &(v, n) in &[(-70.0, 0.1), (-57.0, 0.3), (-40.0, 0.6), (-20.0, 0.9), (10.0, 0.99)] {
        let fd = match jacobian(&sys, &[v, n], 0.0) {
            Ok(j) => j,
            Err(e) => return Check::new("jacobian", false, e.to_string()),
        };
        let an = sys.analytic_jacobian(v, n);
        for r in 0..2 {
            for c in 0..2 {
                let scale = an[r][c].abs().max(1e-12);
                worst = worst.max((fd[r][c] - an[r][c]).abs() / scale);
            }
        }
    }
    Check::new("jacobian", worst <= 1e-4, format!("max relative difference {worst:.3e}"))
}

fn rails_ok(spec: &SystemSpec, traj: &Trajectory) -> (bool, String) {
    match spec {
        SystemSpec::Inapik(_) => {
            let n = traj.component(1);
            let ok = n.iter().all(|x| (0.0..=1.0).contains(x));
            (ok, "n in [0, 1]".into())
        }
        SystemSpec::MemristorResonator(p) => {
            let r = traj.component(2);
            let ok = r.iter().all(|x| *x >= p.memristor.r_on && *x <= p.memristor.r_off);
            (ok, "r within rails".into())
        }
        _ => (true, "no bounded states".into()),
    }
}

/// Run every invariant check. `tolerance` is the adaptive integrator's
/// relative tolerance.
pub fn invariant_suite(tolerance: f64) -> Vec<Check> {
    let mut out = vec![jacobian_check()];
    for p in all_presets() {
        let s = &p.scenario;
        if !matches!(s.experiment, Experiment::Simulate | Experiment::Ramp) {
            continue;
        }
        let Ok(Some(system)) = s.system.build() else {
            out.push(Check::new(format!("{}: build", p.name), false, "invalid parameters"));
            continue;
        };
        let system = system.as_ref();
        let n = &s.numerics;
        let run = || -> Result<(Trajectory, Trajectory)> {
            let init = default_initial(system)?;
            let opts = IntegrateOptions::with_sampling(tolerance, n.sample_interval);
            let a = integrate(system, &init, &s.protocol, n.t_end, &opts)?;
            let b = integrate_rk4(system, &init, &s.protocol, n.t_end, 1e-4 * system.time_constant(), n.sample_interval)?;
            Ok((a, b))
        };
        match run() {
            Ok((a, b)) => {
                let dev = relative_voltage_deviation(&a, &b);
                out.push(Check::new(
                    format!("{}: rk4 oracle", p.name),
                    dev <= 1e-3,
                    format!("max deviation {:.3e} of peak-to-peak", dev),
                ));
                let (ok, what) = rails_ok(&s.system, &a);
                out.push(Check::new(format!("{}: rails", p.name), ok, what));
            }
            Err(e) => out.push(Check::new(format!("{}: rk4 oracle", p.name), false, format!("error: {e}"))),
        }
        let current = s.protocol.evaluate(n.t_end);
        let res = find_equilibria(system, current, system.voltage_range(), n.resolution).map(|eqs| {
            let worst = eqs.iter().map(|e| e.residual).fold(0.0, f64::max);
            (worst < 1e-9, format!("{} equilibria, max residual {worst:.3e}", eqs.len()))
        });
        out.push(Check::from_result(&format!("{}: equilibrium residual", p.name), res));
    }
    let sys = Inapik::new(inapik_fig2()).expect("caption parameters are valid");
    let ratio = hopf_locate(&sys, 10.0, 30.0, 1e-9).and_then(|h| sqrt_delta_ratio(&sys, h, 0.5, 3000.0, 0.01));
    out.push(Check::from_result(
        "hopf sqrt scaling",
        ratio.map(|r| ((1.6..=2.4).contains(&r), format!("amplitude ratio {r:.4}"))),
    ));
    out
}
