//! Reference implementations written independently of the library.
#![allow(dead_code)]

use resonator::device::{MosfetParams, NndrPairSpec, Polarity};
use resonator::systems::{FetResonatorParams, InapikParams};

fn sigmoid(v: f64, half: f64, slope: f64) -> f64 {
    1.0 / (1.0 + ((half - v) / slope).exp())
}

/// `[dv/dt, dn/dt]` of the sodium-potassium model.
pub fn inapik_rhs(p: &InapikParams, current: f64, y: &[f64]) -> Vec<f64> {
    let (v, n) = (y[0], y[1]);
    let i_l = p.g_l * (v - p.e_l);
    let i_na = p.g_na * sigmoid(v, p.v_half_na, p.k_na) * (v - p.e_na);
    let i_k = p.g_k * n * (v - p.e_k);
    vec![
        (current - i_l - i_na - i_k) / p.c_mem,
        (sigmoid(v, p.v_half_k, p.k_k) - n) / p.tau,
    ]
}

/// Closed-form Jacobian of [`inapik_rhs`], derived by hand.
pub fn inapik_jacobian(p: &InapikParams, v: f64, n: f64) -> [[f64; 2]; 2] {
    let m = sigmoid(v, p.v_half_na, p.k_na);
    let dm = m * (1.0 - m) / p.k_na;
    let ninf = sigmoid(v, p.v_half_k, p.k_k);
    let dninf = ninf * (1.0 - ninf) / p.k_k;
    [
        [
            -(p.g_l + p.g_na * m + p.g_na * dm * (v - p.e_na) + p.g_k * n) / p.c_mem,
            -p.g_k * (v - p.e_k) / p.c_mem,
        ],
        [dninf / p.tau, -1.0 / p.tau],
    ]
}

/// Level-1 drain current of an N device with the half factor in
/// saturation, `v_ds >= 0` only.
fn n_channel(k: f64, vt: f64, lambda: f64, vgs: f64, vds: f64) -> f64 {
    let ov = vgs - vt;
    if ov <= 0.0 || vds <= 0.0 {
        0.0
    } else if vds >= ov {
        k / 2.0 * ov * ov * (1.0 + lambda * vds)
    } else {
        k * (ov * vds - vds * vds / 2.0) * (1.0 + lambda * vds)
    }
}

/// Drain current for either polarity and either sign of `v_ds`.
pub fn mosfet(p: &MosfetParams, vgs: f64, vds: f64) -> f64 {
    let (sign, vgs, vds, vt) = match p.polarity {
        Polarity::N => (1.0, vgs, vds, p.v_t0),
        Polarity::P => (-1.0, -vgs, -vds, -p.v_t0),
    };
    // Reverse operation swaps source and drain.
    let i = if vds >= 0.0 {
        n_channel(p.k_trans, vt, p.lambda, vgs, vds)
    } else {
        -n_channel(p.k_trans, vt, p.lambda, vgs - vds, -vds)
    };
    sign * i
}

/// Terminal current of a MOSFET lambda-diode pair at applied voltage `v`,
/// found by bisecting the internal-node current balance.
pub fn mosfet_pair(upper: &MosfetParams, lower: &MosfetParams, v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let balance = |x: f64| mosfet(upper, -x, v - x) + mosfet(lower, v - x, -x);
    let (mut a, mut b) = (v.min(0.0), v.max(0.0));
    let fa = balance(a);
    if fa == 0.0 {
        return mosfet(upper, -a, v - a);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (balance(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    let x = 0.5 * (a + b);
    mosfet(upper, -x, v - x)
}

/// `[dv_out/dt, dv_gs/dt]` of the three-transistor resonator.
pub fn fet_rhs(p: &FetResonatorParams, current: f64, y: &[f64]) -> Vec<f64> {
    let (v_out, v_gs) = (y[0], y[1]);
    let NndrPairSpec::Mosfet { upper, lower } = p.pair else {
        panic!("MOSFET pair expected");
    };
    let i_na = mosfet_pair(&upper, &lower, p.v_dc - v_out);
    let i_r = (v_out - v_gs) / p.r1;
    let i_k = mosfet(&p.q1, v_gs, v_out);
    vec![(current + i_na - i_r - i_k) / p.c1, i_r / p.c2]
}

/// Classical fixed-step fourth-order Runge-Kutta, sampled every
/// `substeps` steps (the initial state is the first sample).
pub fn rk4(f: impl Fn(f64, &[f64]) -> Vec<f64>, y0: &[f64], h: f64, steps: usize, substeps: usize) -> Vec<Vec<f64>> {
    let axpy = |y: &[f64], k: &[f64], a: f64| y.iter().zip(k).map(|(y, k)| y + a * k).collect::<Vec<_>>();
    let mut y = y0.to_vec();
    let mut out = vec![y.clone()];
    for s in 0..steps {
        let t = s as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + h / 2.0, &axpy(&y, &k1, h / 2.0));
        let k3 = f(t + h / 2.0, &axpy(&y, &k2, h / 2.0));
        let k4 = f(t + h, &axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if (s + 1) % substeps == 0 {
            out.push(y.clone());
        }
    }
    out
}
