//! Neuron models as planar (or, for the memristor circuit, three
//! dimensional) dynamical systems driven by an injected current.

use serde::{Deserialize, Serialize};

use crate::device::{
    memristor_current, memristor_rate, memristor_rate_unchecked, mosfet_ids, nndr_pair_current,
    DeviceFamily, MosfetParams, NndrPairSpec, Polarity, UnipolarMemristorParams,
};
use crate::error::{Error, Result};
use crate::roots::{bisect, scan_brackets};

const MAX_EXPONENT: f64 = 700.0;

/// Steady-state activation `1 / (1 + exp((v_half - v) / k_slope))`.
pub fn boltzmann(v: f64, v_half: f64, k_slope: f64) -> Result<f64> {
    if k_slope == 0.0 || !k_slope.is_finite() {
        return Err(Error::param("k_slope", "must be non-zero and finite"));
    }
    Ok(boltzmann_raw(v, v_half, k_slope))
}

#[inline]
fn boltzmann_raw(v: f64, v_half: f64, k_slope: f64) -> f64 {
    let x = ((v_half - v) / k_slope).clamp(-MAX_EXPONENT, MAX_EXPONENT);
    1.0 / (1.0 + x.exp())
}

/// Units in which a system's state, time and current are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitSystem {
    pub voltage: &'static str,
    pub time: &'static str,
    pub current: &'static str,
    /// Size of one volt in the voltage unit.
    pub volts: f64,
}

impl UnitSystem {
    pub const MILLI: UnitSystem = UnitSystem {
        voltage: "mV",
        time: "ms",
        current: "mA",
        volts: 1e3,
    };
    pub const SI: UnitSystem = UnitSystem {
        voltage: "V",
        time: "s",
        current: "A",
        volts: 1.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Inapik,
    FetResonator,
    JfetResonator,
    MemristorResonator,
}

impl SystemKind {
    pub const ALL: [SystemKind; 4] = [
        SystemKind::Inapik,
        SystemKind::FetResonator,
        SystemKind::JfetResonator,
        SystemKind::MemristorResonator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Inapik => "inapik",
            SystemKind::FetResonator => "fet_resonator",
            SystemKind::JfetResonator => "jfet_resonator",
            SystemKind::MemristorResonator => "memristor_resonator",
        }
    }
}

/// Restriction of the state space used when reducing the equilibrium
/// problem to one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Slice {
    Planar,
    /// Memristance held fixed at a rail.
    FrozenResistance { r: f64 },
}

/// Which branch of the switching law keeps a frozen-resistance equilibrium
/// consistent with `dr/dt = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RailBranch {
    /// High resistance rail held by the RESET Heaviside factor.
    HrsReset,
    /// Low resistance rail held by the SET Heaviside factor.
    LrsSet,
    /// Device voltage below the SET threshold.
    BelowSet,
}

/// A neuron model driven by an injected current.
pub trait NeuronSystem: Send + Sync {
    fn kind(&self) -> SystemKind;

    fn state_names(&self) -> &'static [&'static str];

    fn dim(&self) -> usize {
        self.state_names().len()
    }

    fn units(&self) -> UnitSystem;

    fn derivatives(&self, state: &[f64], current: f64, out: &mut [f64]) -> Result<()>;

    /// Map a state back onto the admissible set after an accepted step.
    fn project(&self, _state: &mut [f64]) {}

    /// Slow time constant, in the system's time unit.
    fn time_constant(&self) -> f64;

    /// Membrane voltage window that contains all physically relevant
    /// behaviour.
    fn voltage_range(&self) -> (f64, f64);

    /// Second coordinate on the nullcline of the slow variable.
    fn slow_nullcline(&self, v: f64) -> f64;

    /// Second coordinate on the fast (membrane) nullcline, `None` where it
    /// is undefined.
    fn fast_nullcline(&self, v: f64, current: f64) -> Result<Option<f64>>;

    fn equilibrium_slices(&self) -> Vec<Slice> {
        vec![Slice::Planar]
    }

    /// State with membrane voltage `v` lying on the slow nullcline of the
    /// given slice.
    fn state_on_slice(&self, v: f64, slice: Slice) -> Vec<f64>;

    /// Components held constant on the slice.
    fn frozen_components(&self, _slice: Slice) -> Vec<usize> {
        Vec::new()
    }

    /// Validate an equilibrium found on a slice.
    fn slice_branch(&self, _state: &[f64], _slice: Slice) -> Option<RailBranch> {
        None
    }

    /// Smallest voltage change treated as a real oscillation.
    fn amplitude_floor(&self) -> f64 {
        1e-3 * self.units().volts
    }
}

// ---------------------------------------------------------------------------
// Persistent sodium plus potassium model

/// Parameters of the persistent-sodium plus potassium model in the
/// (mV, ms, mA, mF, S) unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InapikParams {
    pub c_mem: f64,
    pub g_l: f64,
    pub g_na: f64,
    pub g_k: f64,
    pub e_l: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub v_half_na: f64,
    pub v_half_k: f64,
    pub k_na: f64,
    pub k_k: f64,
    pub tau: f64,
}

impl InapikParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("c_mem", self.c_mem),
            ("g_l", self.g_l),
            ("g_na", self.g_na),
            ("g_k", self.g_k),
            ("e_l", self.e_l),
            ("e_na", self.e_na),
            ("e_k", self.e_k),
            ("v_half_na", self.v_half_na),
            ("v_half_k", self.v_half_k),
            ("k_na", self.k_na),
            ("k_k", self.k_k),
            ("tau", self.tau),
        ];
        for (name, x) in all {
            if !x.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if !(self.c_mem > 0.0) {
            return Err(Error::param("c_mem", "must be positive"));
        }
        for (name, g) in [("g_l", self.g_l), ("g_na", self.g_na), ("g_k", self.g_k)] {
            if g < 0.0 {
                return Err(Error::param(name, "must be non-negative"));
            }
        }
        if !(self.tau > 0.0) {
            return Err(Error::param("tau", "must be positive"));
        }
        if self.k_na == 0.0 {
            return Err(Error::param("k_na", "must be non-zero"));
        }
        if self.k_k == 0.0 {
            return Err(Error::param("k_k", "must be non-zero"));
        }
        if !(self.e_k < self.e_l && self.e_l < self.e_na) {
            return Err(Error::param("e_l", "require e_k < e_l < e_na"));
        }
        Ok(())
    }

    pub fn m_inf(&self, v: f64) -> f64 {
        boltzmann_raw(v, self.v_half_na, self.k_na)
    }

    pub fn n_inf(&self, v: f64) -> f64 {
        boltzmann_raw(v, self.v_half_k, self.k_k)
    }

    /// Membrane current excluding the potassium term.
    fn leak_and_sodium(&self, v: f64) -> f64 {
        self.g_l * (v - self.e_l) + self.g_na * self.m_inf(v) * (v - self.e_na)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InapikState {
    pub v: f64,
    pub n: f64,
}

/// `(dv/dt, dn/dt)` of the persistent-sodium plus potassium model.
pub fn inapik_derivatives(s: &InapikState, p: &InapikParams, i_inj: f64) -> (f64, f64) {
    let dv = (i_inj - p.leak_and_sodium(s.v) - p.g_k * s.n * (s.v - p.e_k)) / p.c_mem;
    let dn = (p.n_inf(s.v) - s.n) / p.tau;
    (dv, dn)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inapik {
    pub params: InapikParams,
}

impl Inapik {
    pub fn new(params: InapikParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Fast nullcline in closed form; undefined at `v = e_k`.
    pub fn v_nullcline(&self, v: f64, current: f64) -> Option<f64> {
        let p = &self.params;
        let denom = p.g_k * (v - p.e_k);
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        let n = (current - p.leak_and_sodium(v)) / denom;
        n.is_finite().then_some(n)
    }

    /// Closed-form Jacobian `[[dv'/dv, dv'/dn], [dn'/dv, dn'/dn]]`; it does
    /// not depend on the injected current.
    pub fn analytic_jacobian(&self, v: f64, n: f64) -> [[f64; 2]; 2] {
        let p = &self.params;
        let m = p.m_inf(v);
        let dm = m * (1.0 - m) / p.k_na;
        let ni = p.n_inf(v);
        let dni = ni * (1.0 - ni) / p.k_k;
        let dvdv = -(p.g_l + p.g_na * (dm * (v - p.e_na) + m) + p.g_k * n) / p.c_mem;
        let dvdn = -p.g_k * (v - p.e_k) / p.c_mem;
        [[dvdv, dvdn], [dni / p.tau, -1.0 / p.tau]]
    }
}

impl NeuronSystem for Inapik {
    fn kind(&self) -> SystemKind {
        SystemKind::Inapik
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["v", "n"]
    }

    fn units(&self) -> UnitSystem {
        UnitSystem::MILLI
    }

    fn derivatives(&self, state: &[f64], current: f64, out: &mut [f64]) -> Result<()> {
        let (dv, dn) = inapik_derivatives(
            &InapikState {
                v: state[0],
                n: state[1],
            },
            &self.params,
            current,
        );
        out[0] = dv;
        out[1] = dn;
        Ok(())
    }

    fn time_constant(&self) -> f64 {
        self.params.tau
    }

    fn voltage_range(&self) -> (f64, f64) {
        let p = &self.params;
        (p.e_k - 10.0, p.e_na)
    }

    fn slow_nullcline(&self, v: f64) -> f64 {
        self.params.n_inf(v)
    }

    fn fast_nullcline(&self, v: f64, current: f64) -> Result<Option<f64>> {
        Ok(self.v_nullcline(v, current))
    }

    fn state_on_slice(&self, v: f64, _slice: Slice) -> Vec<f64> {
        vec![v, self.params.n_inf(v)]
    }
}

// ---------------------------------------------------------------------------
// Transistor resonators

/// The three-transistor resonator: membrane capacitor `c1`, an `r1`-`c2`
/// delay driving the gate of the potassium transistor `q1`, and an NNDR pair
/// from the supply to the membrane node acting as the sodium channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FetResonatorParams {
    pub c1: f64,
    pub c2: f64,
    pub r1: f64,
    pub v_dc: f64,
    pub q1: MosfetParams,
    pub pair: NndrPairSpec,
}

impl FetResonatorParams {
    pub fn validate(&self) -> Result<()> {
        check_rc(self.c1, self.c2, self.r1, self.v_dc)?;
        self.q1.validate()?;
        if self.q1.polarity != Polarity::N {
            return Err(Error::param("q1.polarity", "q1 must be N-channel"));
        }
        self.pair.validate()
    }
}

fn check_rc(c1: f64, c2: f64, r1: f64, v_dc: f64) -> Result<()> {
    for (name, x) in [("c1", c1), ("c2", c2), ("r1", r1)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::param(name, "must be positive"));
        }
    }
    if !v_dc.is_finite() {
        return Err(Error::param("v_dc", "must be finite"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FetResonatorState {
    pub v_out: f64,
    pub v_gs: f64,
}

#[inline]
fn gate_rate(v_out: f64, v_gs: f64, c2: f64, r1: f64) -> f64 {
    (v_out - v_gs) / (c2 * r1)
}

/// `(dv_out/dt, dv_gs/dt)` for a transistor resonator with either pair
/// family.
fn transistor_resonator(s: &FetResonatorState, p: &FetResonatorParams, i_inj: f64) -> Result<(f64, f64)> {
    let i_q1 = mosfet_ids(&p.q1, s.v_gs, s.v_out);
    let i_na = nndr_pair_current(&p.pair, p.v_dc - s.v_out)?;
    let dv_out = (i_inj - (s.v_out - s.v_gs) / p.r1 - i_q1 + i_na) / p.c1;
    Ok((dv_out, gate_rate(s.v_out, s.v_gs, p.c2, p.r1)))
}

/// Derivatives of the resonator with a complementary MOSFET pair.
pub fn fet_resonator_derivatives(
    s: &FetResonatorState,
    p: &FetResonatorParams,
    i_inj: f64,
) -> Result<(f64, f64)> {
    if p.pair.family() != DeviceFamily::Mosfet {
        return Err(Error::param("pair", "expected a MOSFET pair"));
    }
    transistor_resonator(s, p, i_inj)
}

/// Derivatives of the resonator with a complementary JFET pair.
pub fn jfet_resonator_derivatives(
    s: &FetResonatorState,
    p: &FetResonatorParams,
    i_inj: f64,
) -> Result<(f64, f64)> {
    if p.pair.family() != DeviceFamily::Jfet {
        return Err(Error::param("pair", "expected a JFET pair"));
    }
    transistor_resonator(s, p, i_inj)
}

/// Resonator with a transistor NNDR pair (MOSFET or JFET family).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FetResonator {
    pub params: FetResonatorParams,
}

impl FetResonator {
    pub fn new(params: FetResonatorParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    fn membrane_rate(&self, v_out: f64, v_gs: f64, current: f64) -> Result<f64> {
        Ok(transistor_resonator(&FetResonatorState { v_out, v_gs }, &self.params, current)?.0)
    }
}

impl NeuronSystem for FetResonator {
    fn kind(&self) -> SystemKind {
        match self.params.pair.family() {
            DeviceFamily::Mosfet => SystemKind::FetResonator,
            DeviceFamily::Jfet => SystemKind::JfetResonator,
        }
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["v_out", "v_gs"]
    }

    fn units(&self) -> UnitSystem {
        UnitSystem::SI
    }

    fn derivatives(&self, state: &[f64], current: f64, out: &mut [f64]) -> Result<()> {
        let (a, b) = transistor_resonator(
            &FetResonatorState {
                v_out: state[0],
                v_gs: state[1],
            },
            &self.params,
            current,
        )?;
        out[0] = a;
        out[1] = b;
        Ok(())
    }

    fn time_constant(&self) -> f64 {
        self.params.r1 * self.params.c2
    }

    fn voltage_range(&self) -> (f64, f64) {
        // Below about -0.5 V the pair is cut off at zero bias and every
        // point on the diagonal is stationary; keep the scan window clear.
        (-0.25, self.params.v_dc)
    }

    fn slow_nullcline(&self, v: f64) -> f64 {
        v
    }

    fn fast_nullcline(&self, v: f64, current: f64) -> Result<Option<f64>> {
        let (lo, hi) = self.voltage_range();
        circuit_fast_nullcline(|g| self.membrane_rate(v, g, current), lo, hi)
    }

    fn state_on_slice(&self, v: f64, _slice: Slice) -> Vec<f64> {
        vec![v, v]
    }
}

/// Solve `dv_out/dt = 0` for the gate voltage at fixed membrane voltage,
/// returning the highest root in `[lo, hi]`.
fn circuit_fast_nullcline<F>(rate: F, lo: f64, hi: f64) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure = std::cell::RefCell::new(None);
    let eval = |g: f64| match rate(g) {
        Ok(x) => x,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let brackets = scan_brackets(eval, lo, hi, 400);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let Some(&(a, b)) = brackets.last() else {
        return Ok(None);
    };
    let root = bisect(eval, a, b, 1e-6, "fast nullcline")?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(Some(root))
}

// ---------------------------------------------------------------------------
// Memristor resonator

/// Resonator whose sodium element is a unipolar memristor between the
/// supply and the membrane node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorResonatorParams {
    pub c1: f64,
    pub c2: f64,
    pub r1: f64,
    pub v_dc: f64,
    pub q1: MosfetParams,
    pub memristor: UnipolarMemristorParams,
}

impl MemristorResonatorParams {
    pub fn validate(&self) -> Result<()> {
        check_rc(self.c1, self.c2, self.r1, self.v_dc)?;
        self.q1.validate()?;
        if self.q1.polarity != Polarity::N {
            return Err(Error::param("q1.polarity", "q1 must be N-channel"));
        }
        self.memristor.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorResonatorState {
    pub v_out: f64,
    pub v_gs: f64,
    pub r: f64,
}

/// `(dv_out/dt, dv_gs/dt, dr/dt)`; `r` must lie within the rails.
pub fn memristor_resonator_derivatives(
    s: &MemristorResonatorState,
    p: &MemristorResonatorParams,
    i_inj: f64,
) -> Result<(f64, f64, f64)> {
    let v_m = p.v_dc - s.v_out;
    let i_na = memristor_current(&p.memristor, s.r, v_m)?;
    let dr = memristor_rate(&p.memristor, s.r, v_m)?;
    let i_q1 = mosfet_ids(&p.q1, s.v_gs, s.v_out);
    let dv_out = (i_inj - (s.v_out - s.v_gs) / p.r1 - i_q1 + i_na) / p.c1;
    Ok((dv_out, gate_rate(s.v_out, s.v_gs, p.c2, p.r1), dr))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemristorResonator {
    pub params: MemristorResonatorParams,
}

impl MemristorResonator {
    pub fn new(params: MemristorResonatorParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl NeuronSystem for MemristorResonator {
    fn kind(&self) -> SystemKind {
        SystemKind::MemristorResonator
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["v_out", "v_gs", "r"]
    }

    fn units(&self) -> UnitSystem {
        UnitSystem::SI
    }

    fn derivatives(&self, state: &[f64], current: f64, out: &mut [f64]) -> Result<()> {
        // Runge-Kutta stages may probe slightly past a rail.
        let p = &self.params;
        let r = p.memristor.clamp(state[2]);
        let v_m = p.v_dc - state[0];
        let i_q1 = mosfet_ids(&p.q1, state[1], state[0]);
        out[0] = (current - (state[0] - state[1]) / p.r1 - i_q1 + v_m / r) / p.c1;
        out[1] = gate_rate(state[0], state[1], p.c2, p.r1);
        out[2] = memristor_rate_unchecked(&p.memristor, r, v_m);
        Ok(())
    }

    fn project(&self, state: &mut [f64]) {
        state[2] = self.params.memristor.clamp(state[2]);
    }

    fn time_constant(&self) -> f64 {
        self.params.r1 * self.params.c2
    }

    fn voltage_range(&self) -> (f64, f64) {
        (-0.5, self.params.v_dc)
    }

    fn slow_nullcline(&self, v: f64) -> f64 {
        v
    }

    /// Fast nullcline on the high-resistance slice.
    fn fast_nullcline(&self, v: f64, current: f64) -> Result<Option<f64>> {
        let (lo, hi) = self.voltage_range();
        let r = self.params.memristor.r_off;
        circuit_fast_nullcline(
            |g| {
                let mut out = [0.0; 3];
                self.derivatives(&[v, g, r], current, &mut out)?;
                Ok(out[0])
            },
            lo,
            hi,
        )
    }

    fn equilibrium_slices(&self) -> Vec<Slice> {
        let m = &self.params.memristor;
        vec![
            Slice::FrozenResistance { r: m.r_off },
            Slice::FrozenResistance { r: m.r_on },
        ]
    }

    fn state_on_slice(&self, v: f64, slice: Slice) -> Vec<f64> {
        let r = match slice {
            Slice::FrozenResistance { r } => r,
            Slice::Planar => self.params.memristor.r_off,
        };
        vec![v, v, r]
    }

    fn frozen_components(&self, slice: Slice) -> Vec<usize> {
        match slice {
            Slice::FrozenResistance { .. } => vec![2],
            Slice::Planar => Vec::new(),
        }
    }

    fn slice_branch(&self, state: &[f64], slice: Slice) -> Option<RailBranch> {
        let m = &self.params.memristor;
        let Slice::FrozenResistance { r } = slice else {
            return None;
        };
        let v_m = (self.params.v_dc - state[0]).abs();
        if v_m < m.v_set {
            Some(RailBranch::BelowSet)
        } else if r == m.r_off && v_m > m.v_rst {
            Some(RailBranch::HrsReset)
        } else if r == m.r_on && v_m < m.v_rst {
            Some(RailBranch::LrsSet)
        } else {
            None
        }
    }
}
