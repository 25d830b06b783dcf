//! Parameter sets taken from the figure captions.

use crate::device::{JfetParams, MosfetParams, NndrPairSpec, Polarity, UnipolarMemristorParams};
use crate::systems::{FetResonatorParams, InapikParams, MemristorResonatorParams};

const UA: f64 = 1e-6;

/// Persistent-sodium plus potassium model with a low-threshold potassium
/// current (Fig 2).
pub fn inapik_fig2() -> InapikParams {
    InapikParams {
        c_mem: 1.0,
        g_l: 8.0,
        g_na: 20.0,
        g_k: 10.0,
        e_l: -78.0,
        e_na: 60.0,
        e_k: -90.0,
        v_half_na: -20.0,
        v_half_k: -45.0,
        k_na: 15.0,
        k_k: 5.0,
        tau: 1.0,
    }
}

/// Complementary MOSFET lambda diode (Fig 4a).
pub fn mosfet_pair_fig4a() -> NndrPairSpec {
    NndrPairSpec::Mosfet {
        upper: MosfetParams::new(Polarity::N, 100.0 * UA, -6.0, 0.01),
        lower: MosfetParams::new(Polarity::P, 100.0 * UA, 6.0, 0.01),
    }
}

/// Complementary JFET lambda diode (Fig 4c).
pub fn jfet_pair_fig4c() -> NndrPairSpec {
    NndrPairSpec::Jfet {
        upper: JfetParams::new(Polarity::N, 100.0 * UA, -2.0, 0.0),
        lower: JfetParams::new(Polarity::P, 100.0 * UA, -2.0, 0.0),
    }
}

/// Unipolar memristor of Fig 4e.
pub fn memristor_fig4e() -> UnipolarMemristorParams {
    UnipolarMemristorParams {
        r_on: 5e3,
        r_off: 70e3,
        alpha: 5e10,
        beta_rate: 1e10,
        v_rst: 1.8,
        v_set: 0.8,
    }
}

/// Three-MOSFET resonator (Fig 6). Q3 is the N device of the pair, Q2 the
/// P device.
pub fn fet_resonator_fig6() -> FetResonatorParams {
    FetResonatorParams {
        c1: 5e-9,
        c2: 0.6e-9,
        r1: 1e6,
        v_dc: 3.5,
        q1: MosfetParams::new(Polarity::N, 100.0 * UA, 0.0, 0.01),
        pair: NndrPairSpec::Mosfet {
            upper: MosfetParams::new(Polarity::N, 40.0 * UA, -2.0, 0.01),
            lower: MosfetParams::new(Polarity::P, 40.0 * UA, 2.0, 0.01),
        },
    }
}

/// Resonator with a JFET lambda diode (Fig 8a).
pub fn jfet_resonator_fig8a() -> FetResonatorParams {
    FetResonatorParams {
        c1: 5e-9,
        c2: 1e-9,
        r1: 1e6,
        v_dc: 3.5,
        q1: MosfetParams::new(Polarity::N, 40.0 * UA, -0.5, 0.01),
        pair: NndrPairSpec::Jfet {
            upper: JfetParams::new(Polarity::N, 130.0 * UA, -2.0, 0.0),
            lower: JfetParams::new(Polarity::P, 130.0 * UA, -2.0, 0.0),
        },
    }
}

/// Resonator with a unipolar memristor as the sodium element (Fig 8c).
pub fn memristor_resonator_fig8c() -> MemristorResonatorParams {
    MemristorResonatorParams {
        c1: 5e-9,
        c2: 1e-9,
        r1: 1e6,
        v_dc: 4.0,
        q1: MosfetParams::new(Polarity::N, 120.0 * UA, -0.5, 0.01),
        memristor: UnipolarMemristorParams {
            r_on: 100e3,
            r_off: 1e6,
            alpha: 5e10,
            beta_rate: 1e10,
            v_rst: 3.0,
            v_set: 1.0,
        },
    }
}
