//! One pass/fail line per acceptance criterion at its pinned tolerance.
//!
//! Criteria listed in `EXPECTED_FAIL` are not reachable with the published
//! parameters; they are evaluated at full strictness and reported as FAIL.
//! The test fails when any other criterion fails, or when an expected
//! failure starts passing (so the list cannot go stale).

use std::io::Write;
use resonator::checks::invariant_suite;
use resonator::config::Scenario;
use resonator::device::nndr_pair_current;
use resonator::ivlab::{default_sweep_rate, quasistatic_memristor_iv, BranchTag};
use resonator::params::*;
use resonator::phase::*;
use resonator::presets::find_preset;
use resonator::protocol::InputProtocol;
use resonator::run::{analyze_ramp, equilibrium_voltage, sim_config, simulate};
use resonator::systems::{FetResonator, Inapik, MemristorResonator, NeuronSystem};

const EXPECTED_FAIL: &[usize] = &[2, 9];

struct Line {
    id: usize,
    passed: bool,
    detail: String,
}

fn scenario(name: &str) -> Scenario {
    find_preset(name).expect("preset exists").scenario
}

fn build(s: &Scenario) -> Box<dyn NeuronSystem> {
    s.system.build().expect("valid parameters").expect("a dynamical system")
}

fn tracked_class(sys: &dyn NeuronSystem, current: f64) -> Option<StabilityClass> {
    let eqs = find_equilibria(sys, current, sys.voltage_range(), 2000).ok()?;
    tracked_equilibrium(&eqs).map(|e| e.class)
}

fn p2p(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

fn window(v: &[f64], from: f64, to: f64) -> &[f64] {
    let n = v.len() as f64;
    &v[(from * n) as usize..(to * n) as usize]
}

fn criterion_1() -> Line {
    let mut ok = true;
    let mut d = Vec::new();

    let s = scenario("fig2b");
    let sys = build(&s);
    let (_, m) = simulate(sys.as_ref(), &s.protocol, &s.numerics).unwrap();
    let class = tracked_class(sys.as_ref(), 12.0);
    let pass = class == Some(StabilityClass::StableFocus) && m.peak_to_peak < 1.0;
    ok &= pass;
    d.push(format!("12 mA: {:?}, p2p {:.3e} mV", class, m.peak_to_peak));

    // Sustained spiking from two different starts settles on the same cycle.
    let s = scenario("fig2d");
    let (_, m) = simulate(sys.as_ref(), &s.protocol, &s.numerics).unwrap();
    let eqs = find_equilibria(sys.as_ref(), 40.0, sys.voltage_range(), 2000).unwrap();
    let eq = tracked_equilibrium(&eqs).unwrap();
    let mut n2 = s.numerics.clone();
    n2.initial = Some(vec![eq.state[0] + 1e-3, eq.state[1]]);
    let (_, m2) = simulate(sys.as_ref(), &s.protocol, &n2).unwrap();
    let same_cycle = (m.peak_to_peak - m2.peak_to_peak).abs() < 1e-2 * m.peak_to_peak;
    let pass = m.spike_count >= 5 && !eq.class.is_stable() && same_cycle;
    ok &= pass;
    d.push(format!(
        "40 mA: {} spikes, eq {:?}, cycle p2p {:.2}/{:.2} mV",
        m.spike_count, eq.class, m.peak_to_peak, m2.peak_to_peak
    ));

    let s = scenario("fig2f");
    let (_, m) = simulate(sys.as_ref(), &s.protocol, &s.numerics).unwrap();
    let class = tracked_class(sys.as_ref(), 354.0);
    let pass = class.is_some_and(StabilityClass::is_stable) && m.spike_count == 0;
    ok &= pass;
    d.push(format!("354 mA: {:?}, {} spikes", class, m.spike_count));
    Line { id: 1, passed: ok, detail: d.join("; ") }
}

fn hopf_from_sweep(preset: &str) -> Vec<f64> {
    let s = scenario(preset);
    let sys = build(&s);
    let sw = s.numerics.sweep.unwrap();
    let diagram = bifurcation_sweep(sys.as_ref(), &sw.values(), &sim_config(sys.as_ref(), &s.numerics)).unwrap();
    diagram.hopf.iter().map(|h| h.current).collect()
}

fn loci_line(id: usize, found: &[f64], targets: [(f64, f64); 2], unit: f64, label: &str) -> Line {
    let ok = found.len() == 2
        && found
            .iter()
            .zip(targets)
            .all(|(h, (c, tol))| (h - c).abs() <= tol);
    let shown: Vec<String> = found.iter().map(|h| format!("{:.4}", h / unit)).collect();
    Line {
        id,
        passed: ok,
        detail: format!(
            "located [{}] {label}; targets {:.0}±{:.0} and {:.0}±{:.0}",
            shown.join(", "),
            targets[0].0 / unit,
            targets[0].1 / unit,
            targets[1].0 / unit,
            targets[1].1 / unit
        ),
    }
}

fn criterion_2() -> Line {
    loci_line(2, &hopf_from_sweep("fig3a"), [(20.0, 4.0), (354.0, 15.0)], 1.0, "mA")
}

fn criterion_3() -> Line {
    let p = fet_resonator_fig6();
    let sys = FetResonator::new(p).unwrap();
    let eqs = find_equilibria(&sys, 0.0, sys.voltage_range(), 4000).unwrap();
    if eqs.len() != 1 {
        return Line { id: 3, passed: false, detail: format!("{} equilibria at I = 0", eqs.len()) };
    }
    let v_out = eqs[0].state[0];
    let v_pair = p.v_dc - v_out;
    let h = 1e-4;
    let slope = (nndr_pair_current(&p.pair, v_pair + h).unwrap() - nndr_pair_current(&p.pair, v_pair - h).unwrap()) / (2.0 * h);
    let ok = (v_out - 0.234).abs() <= 5e-3 && (v_pair - 3.266).abs() <= 5e-3 && slope < 0.0;
    Line {
        id: 3,
        passed: ok,
        detail: format!("v_out {:.2} mV, pair voltage {:.4} V, pair slope {:.3e} S", v_out * 1e3, v_pair, slope),
    }
}

/// Peak-to-peak voltage in each quarter of the run after the first 5%.
fn quarter_envelopes(v: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (q, o) in out.iter_mut().enumerate() {
        let a = 0.05 + 0.95 * q as f64 / 4.0;
        *o = p2p(window(v, a, a + 0.95 / 4.0));
    }
    out
}

/// Stable focus with an oscillation envelope that shrinks quarter by
/// quarter. The prominence-based spike counter also counts the damped
/// ringing, so it is not used to tell rest from spiking here.
fn damped(sys: &dyn NeuronSystem, preset: &str, current: f64, want: StabilityClass) -> (bool, String) {
    let s = scenario(preset);
    let (traj, _) = simulate(sys, &s.protocol, &s.numerics).unwrap();
    let env = quarter_envelopes(&traj.component(0));
    let class = tracked_class(sys, current);
    let decays = env.windows(2).all(|w| w[1] < w[0]) && env[3] < 0.5 * env[0];
    (
        class == Some(want) && decays,
        format!("{:?}, envelope {:.3e} -> {:.3e} V", class, env[0], env[3]),
    )
}

fn criterion_4() -> Line {
    let sys = build(&scenario("fig6b"));
    let mut d = Vec::new();
    let (low, detail) = damped(sys.as_ref(), "fig6b", 2e-6, StabilityClass::StableFocus);
    d.push(format!("2 uA: {detail}"));

    let s = scenario("fig6d");
    let (_, m) = simulate(sys.as_ref(), &s.protocol, &s.numerics).unwrap();
    let mid = m.spike_count >= 5 && m.ahp_depth > 0.0;
    d.push(format!("70 uA: {} spikes, AHP {:.3} V", m.spike_count, m.ahp_depth));

    let class = tracked_class(sys.as_ref(), 150e-6).unwrap_or(StabilityClass::Saddle);
    let (high, detail) = damped(sys.as_ref(), "fig6f", 150e-6, class);
    let high = high && class.is_stable();
    d.push(format!("150 uA: {detail}"));
    Line { id: 4, passed: low && mid && high, detail: d.join("; ") }
}

fn criterion_5() -> Line {
    loci_line(5, &hopf_from_sweep("fig7a"), [(5e-6, 2e-6), (140e-6, 25e-6)], 1e-6, "uA")
}

fn criterion_6() -> Line {
    let mut ok = true;
    let mut d = Vec::new();
    for name in ["fig3b", "fig7b"] {
        let s = scenario(name);
        let sys = build(&s);
        let (traj, _) = simulate(sys.as_ref(), &s.protocol, &s.numerics).unwrap();
        match analyze_ramp(sys.as_ref(), &traj, sys.voltage_range(), 2000) {
            Ok(r) => {
                ok &= r.ratio < 0.25;
                d.push(format!("{name}: first/last quarter {:.4}", r.ratio));
            }
            Err(e) => {
                ok = false;
                d.push(format!("{name}: {e}"));
            }
        }
    }
    Line { id: 6, passed: ok, detail: d.join("; ") }
}

/// Single maximum after 3-point smoothing; values under 1% of the peak
/// count as zero, and both ends of the sweep must be zero.
fn unimodal(amps: &[f64]) -> (bool, usize) {
    let n = amps.len();
    let smooth: Vec<f64> = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(n - 1);
            amps[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let peak = smooth.iter().cloned().fold(0.0, f64::max);
    let floor = 0.01 * peak;
    let z: Vec<f64> = smooth.iter().map(|&a| if a < floor { 0.0 } else { a }).collect();
    let mut maxima = 0;
    let mut rising = true;
    for w in z.windows(2) {
        if w[1] < w[0] && rising {
            maxima += 1;
            rising = false;
        } else if w[1] > w[0] {
            rising = true;
        }
    }
    let ends_zero = amps[0] < floor && amps[n - 1] < floor;
    (peak > 0.0 && maxima == 1 && ends_zero, maxima)
}

fn criterion_7() -> Line {
    let mut ok = true;
    let mut d = Vec::new();
    for name in ["fig3c", "fig7c"] {
        let s = scenario(name);
        let sys = build(&s);
        let sw = s.numerics.sweep.unwrap();
        let pts = amplitude_curve(sys.as_ref(), &sw.values(), &sim_config(sys.as_ref(), &s.numerics)).unwrap();
        let amps: Vec<f64> = pts.iter().map(|p| p.peak_to_peak.unwrap_or(f64::NAN)).collect();
        if amps.iter().any(|a| !a.is_finite()) {
            ok = false;
            d.push(format!("{name}: failed points"));
            continue;
        }
        let (pass, maxima) = unimodal(&amps);
        ok &= pass;
        d.push(format!("{name}: {maxima} maximum, ends {:.2e}/{:.2e}", amps[0], amps[amps.len() - 1]));
    }
    Line { id: 7, passed: ok, detail: d.join("; ") }
}

fn criterion_8() -> Line {
    let p = memristor_fig4e();
    let v_peak = 2.5;
    let curve = quasistatic_memristor_iv(&p, v_peak, default_sweep_rate(&p, v_peak), p.r_off, 1001).unwrap();
    let fwd = &curve.branches.iter().find(|b| b.tag == BranchTag::Forward).unwrap().samples;
    let at_on = |r: f64| r <= p.r_on * (1.0 + 1e-9);
    let at_off = |r: f64| r >= p.r_off * (1.0 - 1e-9);
    let set = fwd.iter().position(|s| at_on(s.r.unwrap()));
    let reset = set.and_then(|k| fwd[k..].iter().position(|s| at_off(s.r.unwrap())).map(|j| j + k));
    // A sample can sit one rounding error past the SET crossing.
    let below_set = |v: f64| v < p.v_set * (1.0 - 1e-9);
    let stays_off = set.is_some_and(|k| fwd[..k].iter().filter(|s| below_set(s.v)).all(|s| at_off(s.r.unwrap())));
    let worst = curve
        .samples()
        .map(|(_, s)| {
            let expect = s.v / s.r.unwrap();
            (s.i.unwrap() - expect).abs() / expect.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    let (v_set, v_rst) = (set.map(|k| fwd[k].v), reset.map(|k| fwd[k].v));
    let ok = stays_off
        && v_set.is_some_and(|v| v > p.v_set && v < p.v_rst)
        && v_rst.is_some_and(|v| v > p.v_rst)
        && worst <= 1e-12;
    Line {
        id: 8,
        passed: ok,
        detail: format!("r_on reached at {:?} V, r_off again at {:?} V, ohmic residual {:.1e}", v_set, v_rst, worst),
    }
}

/// Spiking window with afterhyperpolarization located by a coarse sweep,
/// and a stable focus (subthreshold oscillation) found by a fine
/// classification scan below it.
fn variant(sys: &dyn NeuronSystem) -> (bool, String) {
    let currents: Vec<f64> = (0..=84).map(|k| -10e-6 + k as f64 * 2.5e-6).collect();
    let mut cfg = SimConfig::for_system(sys);
    cfg.always_simulate = true;
    cfg.t_end = 50.0 * sys.time_constant();
    let pts = amplitude_curve(sys, &currents, &cfg).unwrap();
    let spiking: Vec<f64> = pts
        .iter()
        .filter(|p| p.spike_count.unwrap_or(0) >= 5)
        .map(|p| p.current)
        .collect();
    let (Some(&first), Some(&last)) = (spiking.first(), spiking.last()) else {
        return (false, format!("no spiking current in [{:.1}, {:.1}] uA", currents[0] * 1e6, currents[84] * 1e6));
    };
    let probe = 0.5 * (first + last);
    let mut n = resonator::config::Numerics::defaults_for(&sys.units());
    n.t_end = cfg.t_end;
    let eqs = find_equilibria(sys, probe, sys.voltage_range(), 2000).unwrap();
    if let Some(e) = tracked_equilibrium(&eqs) {
        let mut start = e.state.clone();
        start[0] += 1e-3 * sys.units().volts;
        n.initial = Some(start);
    }
    let (_, m) = simulate(sys, &InputProtocol::constant(probe), &n).unwrap();
    let step = 0.1e-6;
    let focus = (1..)
        .map(|k| first - k as f64 * step)
        .take_while(|&i| i >= currents[0])
        .find(|&i| tracked_class(sys, i) == Some(StabilityClass::StableFocus));
    let rest = equilibrium_voltage(sys, probe, sys.voltage_range(), 2000);
    (
        m.spike_count >= 5 && m.ahp_depth > 0.0 && rest.is_some() && focus.is_some(),
        format!(
            "spiking {:.1} to {:.1} uA ({} spikes, AHP {:.3} V at {:.1} uA), stable focus below at {}",
            first * 1e6,
            last * 1e6,
            m.spike_count,
            m.ahp_depth,
            probe * 1e6,
            focus.map_or("none".into(), |i| format!("{:.1} uA", i * 1e6))
        ),
    )
}

fn criterion_9() -> Line {
    let (j_ok, j) = variant(&FetResonator::new(jfet_resonator_fig8a()).unwrap());
    let (m_ok, m) = variant(&MemristorResonator::new(memristor_resonator_fig8c()).unwrap());
    Line {
        id: 9,
        passed: j_ok && m_ok,
        detail: format!("JFET {}: {j}; memristor {}: {m}", pass_word(j_ok), pass_word(m_ok)),
    }
}

fn criterion_10() -> Line {
    let checks = invariant_suite(1e-8);
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.name, c.detail)).collect();
    Line {
        id: 10,
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} invariant checks pass", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    }
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

#[test]
fn acceptance() {
    let criteria: [fn() -> Line; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let mut unexpected = Vec::new();
    for run in criteria {
        let line = run();
        let expected_fail = EXPECTED_FAIL.contains(&line.id);
        let tag = match (line.passed, expected_fail) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        // Written to the raw handle so the report survives libtest's output capture.
        let _ = writeln!(std::io::stderr(), "criterion {:>2}: {tag}: {}", line.id, line.detail);
        if line.passed == expected_fail {
            unexpected.push(line.id);
        }
    }
    assert!(unexpected.is_empty(), "criteria with unexpected outcome: {unexpected:?}");
}

#[test]
fn model_and_circuit_presets_are_resonators() {
    // Both systems lose stability through a complex pair, never a real one.
    let model = Inapik::new(inapik_fig2()).unwrap();
    let circuit = FetResonator::new(fet_resonator_fig6()).unwrap();
    for (sys, i) in [(&model as &dyn NeuronSystem, 14.0), (&circuit, 4.5e-6)] {
        let eqs = find_equilibria(sys, i, sys.voltage_range(), 2000).unwrap();
        let e = tracked_equilibrium(&eqs).unwrap();
        assert_eq!(e.class, StabilityClass::StableFocus);
    }
}
