//! Figure-named scenarios with caption parameters.

use serde::Serialize;

use crate::config::{Experiment, Numerics, OutputSpec, Scenario, Sweep, SystemSpec};
use crate::params::*;
use crate::protocol::InputProtocol;

pub const ASSUMED_CURRENT: &str = "assumed injected current";
pub const ASSUMED_LAMBDA: &str = "assumed lambda for Q1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub figure: &'static str,
    pub description: &'static str,
    /// Values not printed in the caption.
    pub assumptions: Vec<&'static str>,
    pub scenario: Scenario,
}

fn scenario(name: &str, system: SystemSpec, experiment: Experiment, protocol: InputProtocol) -> Scenario {
    Scenario {
        name: Some(name.to_owned()),
        system,
        experiment,
        protocol,
        numerics: Numerics::defaults_for(&system.units()),
        output: OutputSpec::default(),
    }
}

fn model(name: &str, experiment: Experiment, protocol: InputProtocol) -> Scenario {
    scenario(name, SystemSpec::Inapik(inapik_fig2()), experiment, protocol)
}

fn circuit(name: &str, experiment: Experiment, protocol: InputProtocol) -> Scenario {
    scenario(name, SystemSpec::FetResonator(fet_resonator_fig6()), experiment, protocol)
}

fn nullclines(mut s: Scenario, current: f64) -> Scenario {
    s.numerics.current = current;
    s
}

fn sweep(mut s: Scenario, start: f64, stop: f64, count: usize, t_end: f64, dt: f64) -> Scenario {
    s.numerics.sweep = Some(Sweep { start, stop, count });
    s.numerics.t_end = t_end;
    s.numerics.sample_interval = dt;
    s
}

fn ramp(mut s: Scenario, t_end: f64) -> Scenario {
    s.numerics.t_end = t_end;
    s
}

fn preset(
    name: &'static str,
    figure: &'static str,
    description: &'static str,
    assumptions: Vec<&'static str>,
    build: impl FnOnce(&str) -> Scenario,
) -> Preset {
    Preset {
        name,
        figure,
        description,
        assumptions,
        scenario: build(name),
    }
}

/// All presets in figure order.
pub fn all_presets() -> Vec<Preset> {
    use Experiment::*;
    let c = InputProtocol::constant;
    vec![
        preset("fig2a", "Fig. 2(a)", "model nullclines, I = 12 mA", vec![], |n| {
            nullclines(model(n, Nullclines, c(12.0)), 12.0)
        }),
        preset("fig2b", "Fig. 2(b)", "model, I = 12 mA: damped subthreshold oscillation", vec![], |n| {
            model(n, Simulate, c(12.0))
        }),
        preset("fig2c", "Fig. 2(c)", "model nullclines, I = 40 mA", vec![], |n| {
            nullclines(model(n, Nullclines, c(40.0)), 40.0)
        }),
        preset("fig2d", "Fig. 2(d)", "model, I = 40 mA: sustained spiking", vec![], |n| {
            model(n, Simulate, c(40.0))
        }),
        preset("fig2e", "Fig. 2(e)", "model nullclines, I = 354 mA", vec![], |n| {
            nullclines(model(n, Nullclines, c(354.0)), 354.0)
        }),
        preset("fig2f", "Fig. 2(f)", "model, I = 354 mA: rest", vec![], |n| {
            model(n, Simulate, c(354.0))
        }),
        preset("fig3a", "Fig. 3(a)", "model bifurcation diagram over 0-400 mA", vec![], |n| {
            sweep(model(n, Bifurcation, c(0.0)), 0.0, 400.0, 81, 400.0, 0.01)
        }),
        preset("fig3b", "Fig. 3(b)", "model, ramp 0-90 mA over 60 ms", vec![], |n| {
            ramp(model(n, Ramp, InputProtocol::Ramp { base: 0.0, slope: 1.5 }), 60.0)
        }),
        preset("fig3c", "Fig. 3(c)", "model peak-to-peak amplitude over 0-400 mA", vec![], |n| {
            sweep(model(n, Amplitude, c(0.0)), 0.0, 400.0, 81, 400.0, 0.01)
        }),
        preset("fig4b", "Fig. 4(b)", "complementary MOSFET pair I-V", vec![], |n| {
            let mut s = scenario(n, SystemSpec::NndrPair(mosfet_pair_fig4a()), Iv, c(0.0));
            s.numerics.v_min = Some(0.0);
            s.numerics.v_max = Some(12.0);
            s.numerics.n_points = 1201;
            s
        }),
        preset("fig4d", "Fig. 4(d)", "complementary JFET pair I-V", vec![], |n| {
            let mut s = scenario(n, SystemSpec::NndrPair(jfet_pair_fig4c()), Iv, c(0.0));
            s.numerics.v_min = Some(0.0);
            s.numerics.v_max = Some(6.0);
            s.numerics.n_points = 601;
            s
        }),
        preset("fig4e", "Fig. 4(e)", "unipolar memristor quasi-static I-V from HRS", vec![], |n| {
            let mut s = scenario(n, SystemSpec::Memristor(memristor_fig4e()), Iv, c(0.0));
            s.numerics.v_peak = Some(2.5);
            s.numerics.n_points = 1001;
            s
        }),
        preset("fig6a", "Fig. 6(a)", "circuit nullclines, I = 2 uA", vec![], |n| {
            nullclines(circuit(n, Nullclines, c(2e-6)), 2e-6)
        }),
        preset("fig6b", "Fig. 6(b)", "circuit, I = 2 uA: damped subthreshold oscillation", vec![], |n| {
            circuit(n, Simulate, c(2e-6))
        }),
        preset("fig6c", "Fig. 6(c)", "circuit nullclines, I = 70 uA", vec![], |n| {
            nullclines(circuit(n, Nullclines, c(70e-6)), 70e-6)
        }),
        preset("fig6d", "Fig. 6(d)", "circuit, I = 70 uA: sustained spiking", vec![], |n| {
            circuit(n, Simulate, c(70e-6))
        }),
        preset("fig6e", "Fig. 6(e)", "circuit nullclines, I = 150 uA", vec![], |n| {
            nullclines(circuit(n, Nullclines, c(150e-6)), 150e-6)
        }),
        preset("fig6f", "Fig. 6(f)", "circuit, I = 150 uA: rest", vec![], |n| {
            circuit(n, Simulate, c(150e-6))
        }),
        preset("fig7a", "Fig. 7(a)", "circuit bifurcation diagram over 0-160 uA", vec![], |n| {
            sweep(circuit(n, Bifurcation, c(0.0)), 0.0, 160e-6, 81, 0.1, 5e-6)
        }),
        preset("fig7b", "Fig. 7(b)", "circuit, slow ramp 0-30 uA over 60 ms", vec![], |n| {
            ramp(circuit(n, Ramp, InputProtocol::Ramp { base: 0.0, slope: 5e-4 }), 0.06)
        }),
        preset("fig7c", "Fig. 7(c)", "circuit peak-to-peak amplitude over 0-160 uA", vec![], |n| {
            sweep(circuit(n, Amplitude, c(0.0)), 0.0, 160e-6, 81, 0.1, 5e-6)
        }),
        preset("fig8b", "Fig. 8(b)", "JFET-pair resonator spiking", vec![ASSUMED_CURRENT], |n| {
            scenario(n, SystemSpec::JfetResonator(jfet_resonator_fig8a()), Simulate, c(10e-6))
        }),
        preset(
            "fig8d",
            "Fig. 8(d)",
            "memristor resonator",
            vec![ASSUMED_CURRENT, ASSUMED_LAMBDA],
            |n| scenario(n, SystemSpec::MemristorResonator(memristor_resonator_fig8c()), Simulate, c(110e-6)),
        ),
    ]
}

/// Presets whose system matches `system` (by config name), or all of them.
pub fn list_presets(system: Option<&str>) -> Vec<Preset> {
    all_presets()
        .into_iter()
        .filter(|p| system.is_none_or(|s| p.scenario.system.name() == s))
        .collect()
}

pub fn find_preset(name: &str) -> Option<Preset> {
    all_presets().into_iter().find(|p| p.name == name)
}
