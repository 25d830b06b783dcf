//! Terminal-current models for the three device families: level-1
//! (Shichman-Hodges) MOSFETs, square-law JFETs and the threshold-switching
//! unipolar memristor, plus the complementary two-transistor NNDR pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::bisect;

/// Absolute tolerance on the internal node voltage of an NNDR pair.
pub const PAIR_NODE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    N,
    P,
}

impl Polarity {
    pub fn opposite(self) -> Self {
        match self {
            Polarity::N => Polarity::P,
            Polarity::P => Polarity::N,
        }
    }
}

/// Level-1 MOSFET parameters. Thresholds are given in the device's own
/// terminal convention: a depletion P device has `v_t0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosfetParams {
    /// Transconductance parameter (A/V²).
    pub k_trans: f64,
    /// Threshold voltage (V).
    pub v_t0: f64,
    /// Channel-length modulation (1/V).
    pub lambda: f64,
    pub polarity: Polarity,
}

/// Square-law JFET parameters. `v_t0` is the pinch-off voltage in the SPICE
/// convention, negative for both N and P channel devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JfetParams {
    /// Transconductance parameter (A/V²).
    pub beta: f64,
    /// Pinch-off voltage (V).
    pub v_t0: f64,
    /// Channel-length modulation (1/V).
    pub lambda: f64,
    pub polarity: Polarity,
}

impl MosfetParams {
    pub fn new(polarity: Polarity, k_trans: f64, v_t0: f64, lambda: f64) -> Self {
        Self {
            k_trans,
            v_t0,
            lambda,
            polarity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_square_law("k_trans", self.k_trans, self.v_t0, self.lambda)
    }

    /// The N-channel device whose current is the negated, terminal-mirrored
    /// current of this one.
    pub fn mirrored(&self) -> Self {
        Self {
            v_t0: -self.v_t0,
            polarity: self.polarity.opposite(),
            ..*self
        }
    }
}

impl JfetParams {
    pub fn new(polarity: Polarity, beta: f64, v_t0: f64, lambda: f64) -> Self {
        Self {
            beta,
            v_t0,
            lambda,
            polarity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_square_law("beta", self.beta, self.v_t0, self.lambda)
    }

    pub fn mirrored(&self) -> Self {
        Self {
            polarity: self.polarity.opposite(),
            ..*self
        }
    }
}

fn check_square_law(gain_name: &str, gain: f64, v_t0: f64, lambda: f64) -> Result<()> {
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::param(gain_name, "must be positive and finite"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", "must be non-negative and finite"));
    }
    if !v_t0.is_finite() {
        return Err(Error::param("v_t0", "must be finite"));
    }
    Ok(())
}

/// Drain current of an N-channel square-law device. Negative `v_ds`
/// interchanges source and drain.
fn square_law_n(gain: f64, v_t0: f64, lambda: f64, v_gs: f64, v_ds: f64) -> f64 {
    if v_ds == 0.0 {
        return 0.0;
    }
    if v_ds < 0.0 {
        return -square_law_n(gain, v_t0, lambda, v_gs - v_ds, -v_ds);
    }
    let overdrive = v_gs - v_t0;
    if overdrive <= 0.0 {
        return 0.0;
    }
    let clm = 1.0 + lambda * v_ds;
    if v_ds < overdrive {
        gain * (overdrive * v_ds - 0.5 * v_ds * v_ds) * clm
    } else {
        0.5 * gain * overdrive * overdrive * clm
    }
}

/// Level-1 drain-to-source current (A).
pub fn mosfet_ids(p: &MosfetParams, v_gs: f64, v_ds: f64) -> f64 {
    if v_ds == 0.0 {
        return 0.0;
    }
    match p.polarity {
        Polarity::N => square_law_n(p.k_trans, p.v_t0, p.lambda, v_gs, v_ds),
        Polarity::P => -square_law_n(p.k_trans, -p.v_t0, p.lambda, -v_gs, -v_ds),
    }
}

/// Square-law JFET drain-to-source current (A). Gate junction conduction is
/// not modelled.
pub fn jfet_ids(p: &JfetParams, v_gs: f64, v_ds: f64) -> f64 {
    if v_ds == 0.0 {
        return 0.0;
    }
    match p.polarity {
        Polarity::N => square_law_n(p.beta, p.v_t0, p.lambda, v_gs, v_ds),
        Polarity::P => -square_law_n(p.beta, p.v_t0, p.lambda, -v_gs, -v_ds),
    }
}

/// Threshold-switching unipolar memristor with `v_rst > v_set`, which gives
/// the element a type-N negative differential resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnipolarMemristorParams {
    /// Low resistance state (Ω).
    pub r_on: f64,
    /// High resistance state (Ω).
    pub r_off: f64,
    /// RESET rate constant (Ω/(V·s)).
    pub alpha: f64,
    /// SET rate constant (Ω/(V·s)).
    pub beta_rate: f64,
    /// RESET threshold (V).
    pub v_rst: f64,
    /// SET threshold (V).
    pub v_set: f64,
}

impl UnipolarMemristorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_on > 0.0 && self.r_on < self.r_off && self.r_off.is_finite()) {
            return Err(Error::param("r_on", "require 0 < r_on < r_off"));
        }
        if !(self.v_set > 0.0 && self.v_rst > self.v_set && self.v_rst.is_finite()) {
            return Err(Error::param("v_rst", "require v_rst > v_set > 0"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be positive"));
        }
        if !(self.beta_rate > 0.0 && self.beta_rate.is_finite()) {
            return Err(Error::param("beta_rate", "must be positive"));
        }
        Ok(())
    }

    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.r_on, self.r_off)
    }

    fn check_rails(&self, r: f64) -> Result<()> {
        if r >= self.r_on && r <= self.r_off {
            Ok(())
        } else {
            Err(Error::ResistanceOutOfRange {
                r,
                r_on: self.r_on,
                r_off: self.r_off,
            })
        }
    }
}

/// Device current `v_m / r` (A).
pub fn memristor_current(p: &UnipolarMemristorParams, r: f64, v_m: f64) -> Result<f64> {
    p.check_rails(r)?;
    Ok(v_m / r)
}

fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Rate of change of memristance (Ω/s) without rail checking. RESET drives
/// `r` up toward `r_off`, SET drives it down toward `r_on`.
pub(crate) fn memristor_rate_unchecked(p: &UnipolarMemristorParams, r: f64, v_m: f64) -> f64 {
    let mag = v_m.abs();
    if mag > p.v_rst {
        p.alpha * mag * heaviside(p.r_off - r)
    } else if mag >= p.v_set {
        -p.beta_rate * mag * heaviside(r - p.r_on)
    } else {
        0.0
    }
}

/// Rate of change of memristance (Ω/s).
pub fn memristor_rate(p: &UnipolarMemristorParams, r: f64, v_m: f64) -> Result<f64> {
    p.check_rails(r)?;
    Ok(memristor_rate_unchecked(p, r, v_m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceFamily {
    Mosfet,
    Jfet,
}

/// A complementary transistor pair wired as a lambda diode.
///
/// `upper` is the N device: drain at the positive terminal, source at the
/// internal node, gate at the negative terminal. `lower` is the P device
/// between the internal node and the negative terminal with its gate tied
/// to the positive terminal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NndrPairSpec {
    Mosfet {
        upper: MosfetParams,
        lower: MosfetParams,
    },
    Jfet {
        upper: JfetParams,
        lower: JfetParams,
    },
}

impl NndrPairSpec {
    pub fn family(&self) -> DeviceFamily {
        match self {
            NndrPairSpec::Mosfet { .. } => DeviceFamily::Mosfet,
            NndrPairSpec::Jfet { .. } => DeviceFamily::Jfet,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (up, lo) = match self {
            NndrPairSpec::Mosfet { upper, lower } => {
                upper.validate()?;
                lower.validate()?;
                (upper.polarity, lower.polarity)
            }
            NndrPairSpec::Jfet { upper, lower } => {
                upper.validate()?;
                lower.validate()?;
                (upper.polarity, lower.polarity)
            }
        };
        if up != Polarity::N || lo != Polarity::P {
            return Err(Error::param(
                "pair",
                "upper device must be N-channel and lower device P-channel",
            ));
        }
        Ok(())
    }

    /// Current through the N device for internal node voltage `v_m`.
    fn upper_current(&self, v_applied: f64, v_m: f64) -> f64 {
        match self {
            NndrPairSpec::Mosfet { upper, .. } => mosfet_ids(upper, -v_m, v_applied - v_m),
            NndrPairSpec::Jfet { upper, .. } => jfet_ids(upper, -v_m, v_applied - v_m),
        }
    }

    /// Current leaving the internal node through the P device.
    fn lower_current(&self, v_applied: f64, v_m: f64) -> f64 {
        match self {
            NndrPairSpec::Mosfet { lower, .. } => -mosfet_ids(lower, v_applied - v_m, -v_m),
            NndrPairSpec::Jfet { lower, .. } => -jfet_ids(lower, v_applied - v_m, -v_m),
        }
    }

    /// Kirchhoff residual at the internal node; its root is the operating
    /// point for the applied voltage.
    pub fn node_residual(&self, v_applied: f64, v_m: f64) -> f64 {
        self.upper_current(v_applied, v_m) - self.lower_current(v_applied, v_m)
    }

    pub fn current_at_node(&self, v_applied: f64, v_m: f64) -> f64 {
        self.upper_current(v_applied, v_m)
    }
}

/// Terminal current of the two-terminal NNDR pair at `v_applied` (A).
///
/// The internal node voltage is bracketed on `[0, v_applied]` and refined
/// by bisection to [`PAIR_NODE_TOLERANCE`].
pub fn nndr_pair_current(spec: &NndrPairSpec, v_applied: f64) -> Result<f64> {
    if !v_applied.is_finite() {
        return Err(Error::param("v_applied", "must be finite"));
    }
    if v_applied == 0.0 {
        return Ok(0.0);
    }
    let v_m = bisect(
        |v_m| spec.node_residual(v_applied, v_m),
        0.0,
        v_applied,
        PAIR_NODE_TOLERANCE,
        "nndr pair internal node",
    )?;
    Ok(spec.current_at_node(v_applied, v_m))
}
