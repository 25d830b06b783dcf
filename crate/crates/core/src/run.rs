//! Scenario execution: dispatch to the analysis modules and write results.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, Numerics, Scenario, SystemSpec};
use crate::error::{Error, Result};
use crate::export::{self, Plot, Series};
use crate::integrate::{integrate, IntegrateOptions, Trajectory};
use crate::ivlab::{default_sweep_rate, ndr_intervals, quasistatic_memristor_iv, static_iv_sweep, IvCurve};
use crate::metrics::{waveform_metrics, MetricsConfig, WaveformMetrics};
use crate::phase::{
    amplitude_curve, bifurcation_sweep, dominant_real_part, find_equilibria, hopf_locate, nullcline_curves,
    tracked_equilibrium, SimConfig,
};
use crate::protocol::InputProtocol;
use crate::systems::NeuronSystem;

/// Files written and the summary object printed for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

struct Out<'a> {
    dir: &'a Path,
    svg: bool,
    files: Vec<PathBuf>,
}

impl Out<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    fn plot(&mut self, name: &str, plot: &Plot) -> Result<()> {
        if self.svg {
            self.write(name, &export::render_svg(plot))?;
        }
        Ok(())
    }
}

/// Window for equilibrium scans: the configured bounds or the system's
/// default.
fn scan_window(system: &dyn NeuronSystem, n: &Numerics) -> (f64, f64) {
    let (lo, hi) = system.voltage_range();
    (n.v_min.unwrap_or(lo), n.v_max.unwrap_or(hi))
}

/// Starting state when none is configured: the zero-input resting state.
pub fn default_initial(system: &dyn NeuronSystem) -> Result<Vec<f64>> {
    let window = system.voltage_range();
    let eqs = find_equilibria(system, 0.0, window, 2000)?;
    Ok(match tracked_equilibrium(&eqs) {
        Some(e) => e.state.clone(),
        None => system.state_on_slice(0.5 * (window.0 + window.1), system.equilibrium_slices()[0]),
    })
}

/// Voltage of the tracked equilibrium at `current`, if one exists.
pub fn equilibrium_voltage(system: &dyn NeuronSystem, current: f64, window: (f64, f64), resolution: usize) -> Option<f64> {
    let eqs = find_equilibria(system, current, window, resolution).ok()?;
    tracked_equilibrium(&eqs).map(|e| e.state[0])
}

/// Integrate a scenario's protocol and summarize the membrane voltage.
/// The after-hyperpolarization reference is the equilibrium at
/// `rest_current`, or at the protocol's final current.
pub fn simulate(system: &dyn NeuronSystem, protocol: &InputProtocol, n: &Numerics) -> Result<(Trajectory, WaveformMetrics)> {
    let initial = match &n.initial {
        Some(v) => v.clone(),
        None => default_initial(system)?,
    };
    let opts = IntegrateOptions::with_sampling(n.tolerance, n.sample_interval);
    let traj = integrate(system, &initial, protocol, n.t_end, &opts)?;
    let rest_current = n.rest_current.unwrap_or_else(|| protocol.evaluate(n.t_end));
    let mut cfg = MetricsConfig::new(system.amplitude_floor());
    cfg.resting = equilibrium_voltage(system, rest_current, scan_window(system, n), n.resolution);
    let m = waveform_metrics(&traj, n.transient_fraction, &cfg)?;
    Ok((traj, m))
}

/// Post-onset amplitude profile of a ramp response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RampAnalysis {
    /// Lower Hopf current crossed by the ramp.
    pub hopf_current: f64,
    /// Time the ramp reaches `hopf_current`.
    pub onset_time: f64,
    /// Peak-to-peak deviation from the quasi-static equilibrium in each
    /// quarter of the post-onset window.
    pub quarter_amplitudes: [f64; 4],
    /// First-quarter over last-quarter amplitude.
    pub ratio: f64,
}

const RAMP_SCAN_POINTS: usize = 81;

/// Locate the first loss of stability along the ramp's current range and
/// measure how the oscillation grows after the ramp passes it.
pub fn analyze_ramp(system: &dyn NeuronSystem, traj: &Trajectory, window: (f64, f64), resolution: usize) -> Result<RampAnalysis> {
    let i_lo = traj.currents.iter().cloned().fold(f64::INFINITY, f64::min);
    let i_hi = traj.currents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(i_hi > i_lo) {
        return Err(Error::Precondition("ramp analysis needs a varying current".into()));
    }
    let grid: Vec<f64> = (0..RAMP_SCAN_POINTS)
        .map(|k| i_lo + (i_hi - i_lo) * k as f64 / (RAMP_SCAN_POINTS - 1) as f64)
        .collect();
    let mut eq_v = Vec::with_capacity(grid.len());
    let mut dom = Vec::with_capacity(grid.len());
    for &i in &grid {
        let eqs = find_equilibria(system, i, window, resolution)?;
        let e = tracked_equilibrium(&eqs)
            .ok_or_else(|| Error::Precondition(format!("no equilibrium at current {i}")))?;
        eq_v.push(e.state[0]);
        dom.push((dominant_real_part(&e.eigenvalues), e.complex_pair_real_part().is_some()));
    }
    let k = (0..grid.len() - 1)
        .find(|&k| dom[k].0 < 0.0 && dom[k + 1].0 > 0.0 && (dom[k].1 || dom[k + 1].1))
        .ok_or_else(|| Error::Precondition("the ramp does not cross a loss of stability".into()))?;
    let hopf_current = hopf_locate(system, grid[k], grid[k + 1], 1e-9 * (i_hi - i_lo))?;

    let onset_idx = traj
        .currents
        .iter()
        .position(|&i| i >= hopf_current)
        .ok_or_else(|| Error::Precondition("ramp never reaches the bifurcation".into()))?;
    let onset_time = traj.times[onset_idx];
    let t_end = *traj.times.last().unwrap();
    let span = t_end - onset_time;
    let interp = |i: f64| {
        let x = ((i - i_lo) / (i_hi - i_lo) * (grid.len() - 1) as f64).clamp(0.0, (grid.len() - 1) as f64);
        let j = (x.floor() as usize).min(grid.len() - 2);
        let f = x - j as f64;
        eq_v[j] * (1.0 - f) + eq_v[j + 1] * f
    };
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for idx in onset_idx..traj.len() {
        let q = (((traj.times[idx] - onset_time) / span * 4.0) as usize).min(3);
        let d = traj.states[idx][0] - interp(traj.currents[idx]);
        lo[q] = lo[q].min(d);
        hi[q] = hi[q].max(d);
    }
    let mut quarter_amplitudes = [0.0; 4];
    for q in 0..4 {
        quarter_amplitudes[q] = if hi[q] >= lo[q] { hi[q] - lo[q] } else { 0.0 };
    }
    Ok(RampAnalysis {
        hopf_current,
        onset_time,
        quarter_amplitudes,
        ratio: quarter_amplitudes[0] / quarter_amplitudes[3],
    })
}

/// Sweep settings from a scenario's numerics.
pub fn sim_config(system: &dyn NeuronSystem, n: &Numerics) -> SimConfig {
    let mut cfg = SimConfig::for_system(system);
    cfg.t_end = n.t_end;
    cfg.rtol = n.tolerance;
    cfg.sample_interval = n.sample_interval;
    cfg.transient_fraction = n.transient_fraction;
    cfg.scan_resolution = n.resolution;
    cfg.v_interval = Some(scan_window(system, n));
    cfg
}

fn voltage_grid(window: (f64, f64), n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            if k == n - 1 {
                window.1
            } else {
                window.0 + (window.1 - window.0) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn trajectory_plot(title: &str, traj: &Trajectory) -> Plot {
    let pts = traj.times.iter().zip(&traj.states).map(|(t, s)| Some((*t, s[0]))).collect();
    Plot {
        title: title.to_owned(),
        x_label: format!("t ({})", traj.units.time),
        y_label: format!("{} ({})", traj.state_names[0], traj.units.voltage),
        series: vec![Series::line(traj.state_names[0].clone(), "#1f77b4", pts)],
    }
}

fn title(s: &Scenario) -> String {
    match &s.name {
        Some(n) => format!("{n}: {} {}", s.system.name(), s.experiment.name()),
        None => format!("{} {}", s.system.name(), s.experiment.name()),
    }
}

fn metrics_json(m: &WaveformMetrics) -> Value {
    json!({
        "spike_count": m.spike_count,
        "peak_to_peak": m.peak_to_peak,
        "resting": m.resting,
        "ahp_depth": m.ahp_depth,
        "period": m.period,
    })
}

/// Run a validated scenario, writing CSV (and SVG when requested) into
/// `out_dir`.
pub fn run_scenario(s: &Scenario, out_dir: &Path, svg: bool) -> Result<RunReport> {
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let mut out = Out {
        dir: out_dir,
        svg: svg || s.output.svg,
        files: Vec::new(),
    };
    let n = &s.numerics;
    let mut summary = json!({
        "experiment": s.experiment.name(),
        "system": s.system.name(),
    });
    if let Some(name) = &s.name {
        summary["name"] = json!(name);
    }
    let title = title(s);

    if let Experiment::Iv = s.experiment {
        let curve: IvCurve = match &s.system {
            SystemSpec::NndrPair(spec) => {
                let (lo, hi) = (n.v_min.unwrap_or(0.0), n.v_max.unwrap_or(1.0));
                static_iv_sweep(spec, lo, hi, n.n_points)?
            }
            SystemSpec::Memristor(p) => {
                let v_peak = n.v_peak.ok_or_else(|| Error::param("v_peak", "required"))?;
                let rate = n.sweep_rate.unwrap_or_else(|| default_sweep_rate(p, v_peak));
                let curve = quasistatic_memristor_iv(p, v_peak, rate, n.r_initial.unwrap_or(p.r_off), n.n_points)?;
                summary["sweep_rate"] = json!(rate);
                curve
            }
            _ => return Err(Error::Precondition("iv requires a device system".into())),
        };
        out.write("iv.csv", &export::iv_csv(&curve))?;
        let ndr = ndr_intervals(&curve);
        summary["ndr_intervals"] = json!(ndr);
        summary["points"] = json!(curve.samples().count());
        let colors = ["#1f77b4", "#d62728"];
        let series = curve
            .branches
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let pts = b.samples.iter().map(|p| p.i.map(|i| (p.v, i))).collect();
                Series::line(format!("{:?}", b.tag).to_lowercase(), colors[k % 2], pts)
            })
            .collect();
        out.plot(
            "iv.svg",
            &Plot {
                title,
                x_label: "V (V)".into(),
                y_label: "I (A)".into(),
                series,
            },
        )?;
        return Ok(RunReport {
            summary,
            files: out.files,
        });
    }

    let system = s
        .system
        .build()?
        .ok_or_else(|| Error::Precondition(format!("{} requires a neuron system", s.experiment.name())))?;
    let system = system.as_ref();
    let units = system.units();
    let window = scan_window(system, n);

    match s.experiment {
        Experiment::Simulate => {
            let (traj, m) = simulate(system, &s.protocol, n)?;
            out.write("trajectory.csv", &export::trajectory_csv(&traj))?;
            out.plot("trajectory.svg", &trajectory_plot(&title, &traj))?;
            summary["metrics"] = metrics_json(&m);
            summary["samples"] = json!(traj.len());
            summary["final_state"] = json!(traj.final_state());
        }
        Experiment::Ramp => {
            let (traj, m) = simulate(system, &s.protocol, n)?;
            out.write("trajectory.csv", &export::trajectory_csv(&traj))?;
            out.plot("trajectory.svg", &trajectory_plot(&title, &traj))?;
            let r = analyze_ramp(system, &traj, window, n.resolution)?;
            let mut csv = String::from("quarter,amplitude\n");
            for (q, a) in r.quarter_amplitudes.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", q + 1, export::fmt_f64(*a)));
            }
            out.write("ramp_quarters.csv", &csv)?;
            summary["metrics"] = metrics_json(&m);
            summary["ramp"] = serde_json::to_value(&r).unwrap_or(Value::Null);
        }
        Experiment::Nullclines => {
            let grid = voltage_grid(window, n.n_points);
            let curves = nullcline_curves(system, &grid, n.current)?;
            let names = system.state_names();
            let poly = |ys: &[Option<f64>]| {
                let mut csv = format!("{},{}\n", names[0], names[1]);
                for (v, y) in curves.v.iter().zip(ys) {
                    csv.push_str(&format!(
                        "{},{}\n",
                        export::fmt_f64(*v),
                        y.map(export::fmt_f64).unwrap_or_default()
                    ));
                }
                csv
            };
            out.write("nullcline_fast.csv", &poly(&curves.fast))?;
            out.write("nullcline_slow.csv", &poly(&curves.slow))?;
            let eqs = find_equilibria(system, n.current, window, n.resolution)?;
            out.write("equilibria.csv", &export::equilibria_csv(names, n.current, &eqs))?;
            summary["current"] = json!(n.current);
            summary["intersections"] = json!(eqs.len());
            summary["equilibria"] = eqs
                .iter()
                .map(|e| json!({"state": e.state, "class": e.class.name()}))
                .collect();
            let fast = curves.v.iter().zip(&curves.fast).map(|(v, y)| y.map(|y| (*v, y))).collect();
            let slow = curves.v.iter().zip(&curves.slow).map(|(v, y)| y.map(|y| (*v, y))).collect();
            let mut series = vec![
                Series::line(format!("{} nullcline", names[0]), "#d62728", fast),
                Series::line(format!("{} nullcline", names[1]), "#1f77b4", slow),
            ];
            for stable in [true, false] {
                let pts: Vec<(f64, f64)> = eqs
                    .iter()
                    .filter(|e| e.class.is_stable() == stable)
                    .map(|e| (e.state[0], e.state[1]))
                    .collect();
                if !pts.is_empty() {
                    let label = if stable { "stable" } else { "unstable" };
                    series.push(Series::markers(label, "#000000", stable, pts));
                }
            }
            out.plot(
                "nullclines.svg",
                &Plot {
                    title,
                    x_label: format!("{} ({})", names[0], units.voltage),
                    y_label: names[1].to_owned(),
                    series,
                },
            )?;
        }
        Experiment::Equilibria => {
            let eqs = find_equilibria(system, n.current, window, n.resolution)?;
            out.write("equilibria.csv", &export::equilibria_csv(system.state_names(), n.current, &eqs))?;
            summary["current"] = json!(n.current);
            summary["count"] = json!(eqs.len());
            summary["max_residual"] = json!(eqs.iter().map(|e| e.residual).fold(0.0, f64::max));
            summary["equilibria"] = eqs
                .iter()
                .map(|e| json!({"state": e.state, "class": e.class.name()}))
                .collect();
        }
        Experiment::Bifurcation => {
            let sweep = n.sweep.ok_or_else(|| Error::param("sweep", "required"))?;
            let diagram = bifurcation_sweep(system, &sweep.values(), &sim_config(system, n))?;
            out.write("bifurcation.csv", &export::bifurcation_csv(&diagram))?;
            out.write("hopf.csv", &export::hopf_csv(&diagram))?;
            summary["hopf"] = diagram.hopf.iter().map(|h| json!(h.current)).collect();
            summary["points"] = json!(diagram.points.len());
            summary["failed_points"] = json!(diagram.points.iter().filter(|p| p.error.is_some()).count());
            let mut stable = Vec::new();
            let mut unstable = Vec::new();
            for p in &diagram.points {
                for e in &p.equilibria {
                    let pt = (p.current, e.state[0]);
                    if e.class.is_stable() {
                        stable.push(pt)
                    } else {
                        unstable.push(pt)
                    }
                }
            }
            let lo = diagram.points.iter().map(|p| p.envelope.map(|e| (p.current, e.0))).collect();
            let hi = diagram.points.iter().map(|p| p.envelope.map(|e| (p.current, e.1))).collect();
            out.plot(
                "bifurcation.svg",
                &Plot {
                    title,
                    x_label: format!("I ({})", units.current),
                    y_label: format!("{} ({})", system.state_names()[0], units.voltage),
                    series: vec![
                        Series::markers("stable equilibrium", "#000000", true, stable),
                        Series::markers("unstable equilibrium", "#000000", false, unstable),
                        Series::line("cycle min", "#2ca02c", lo),
                        Series::line("cycle max", "#2ca02c", hi),
                    ],
                },
            )?;
        }
        Experiment::Amplitude => {
            let sweep = n.sweep.ok_or_else(|| Error::param("sweep", "required"))?;
            let points = amplitude_curve(system, &sweep.values(), &sim_config(system, n))?;
            out.write("amplitude.csv", &export::amplitude_csv(&points))?;
            let best = points
                .iter()
                .filter_map(|p| p.peak_to_peak.map(|a| (p.current, a)))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            summary["points"] = json!(points.len());
            summary["max_amplitude"] = json!(best.map(|b| b.1));
            summary["max_amplitude_current"] = json!(best.map(|b| b.0));
            summary["failed_points"] = json!(points.iter().filter(|p| p.error.is_some()).count());
            let pts = points.iter().map(|p| p.peak_to_peak.map(|a| (p.current, a))).collect();
            out.plot(
                "amplitude.svg",
                &Plot {
                    title,
                    x_label: format!("I ({})", units.current),
                    y_label: format!("peak-to-peak ({})", units.voltage),
                    series: vec![Series::line("amplitude", "#1f77b4", pts)],
                },
            )?;
        }
        Experiment::Iv => unreachable!("handled above"),
    }
    Ok(RunReport {
        summary,
        files: out.files,
    })
}
