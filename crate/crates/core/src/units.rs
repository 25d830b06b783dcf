//! Unit suffixes for configuration values.
//!
//! Quantities are tracked as exponents over volt, ampere and second plus a
//! power-of-ten scale, so conversions between prefixed units are exact
//! decimal shifts.

use crate::systems::UnitSystem;

/// Exponents of (V, A, s).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dim(pub i32, pub i32, pub i32);

impl Dim {
    pub const NONE: Dim = Dim(0, 0, 0);
    pub const VOLTAGE: Dim = Dim(1, 0, 0);
    pub const CURRENT: Dim = Dim(0, 1, 0);
    pub const TIME: Dim = Dim(0, 0, 1);
    pub const CAPACITANCE: Dim = Dim(-1, 1, 1);
    pub const CONDUCTANCE: Dim = Dim(-1, 1, 0);
    pub const RESISTANCE: Dim = Dim(1, -1, 0);
    pub const TRANSCONDUCTANCE: Dim = Dim(-2, 1, 0);
    pub const INVERSE_VOLTAGE: Dim = Dim(-1, 0, 0);
    pub const RESISTANCE_RATE: Dim = Dim(0, -1, -1);
    pub const CURRENT_RATE: Dim = Dim(0, 1, -1);
    pub const VOLTAGE_RATE: Dim = Dim(1, 0, -1);

    fn add(self, o: Dim, sign: i32) -> Dim {
        Dim(self.0 + sign * o.0, self.1 + sign * o.1, self.2 + sign * o.2)
    }

    fn scale(self, k: i32) -> Dim {
        Dim(self.0 * k, self.1 * k, self.2 * k)
    }
}

/// Powers of ten of the registry's volt, ampere and second.
fn registry_exponents(units: &UnitSystem) -> (i32, i32, i32) {
    if units.volts == 1e3 {
        (-3, -3, -3)
    } else {
        (0, 0, 0)
    }
}

fn registry_scale(dim: Dim, units: &UnitSystem) -> i32 {
    let (v, a, s) = registry_exponents(units);
    dim.0 * v + dim.1 * a + dim.2 * s
}

/// Parsed unit: dimension and power-of-ten factor relative to SI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unit {
    pub dim: Dim,
    pub exp10: i32,
}

fn prefix(c: char) -> Option<i32> {
    Some(match c {
        'f' => -15,
        'p' => -12,
        'n' => -9,
        'u' | 'µ' | 'μ' => -6,
        'm' => -3,
        'k' | 'K' => 3,
        'M' => 6,
        'G' => 9,
        _ => return None,
    })
}

fn symbol(s: &str) -> Option<Dim> {
    Some(match s {
        "V" => Dim::VOLTAGE,
        "A" => Dim::CURRENT,
        "s" => Dim::TIME,
        "F" => Dim::CAPACITANCE,
        "S" => Dim::CONDUCTANCE,
        "ohm" | "Ohm" | "Ω" => Dim::RESISTANCE,
        "1" => Dim::NONE,
        _ => return None,
    })
}

fn factor(tok: &str) -> Option<Unit> {
    let (base, power) = match tok.split_once('^') {
        Some((b, p)) => (b, p.parse::<i32>().ok()?),
        None => (tok, 1),
    };
    let (dim, exp10) = if let Some(d) = symbol(base) {
        (d, 0)
    } else {
        let mut chars = base.chars();
        let p = prefix(chars.next()?)?;
        (symbol(chars.as_str()).filter(|d| *d != Dim::NONE)?, p)
    };
    Some(Unit {
        dim: dim.scale(power),
        exp10: exp10 * power,
    })
}

/// Parse expressions like `nF`, `uA/V^2`, `1/V`, `mA/ms`, `ohm/V/s`,
/// `KΩ`.
pub fn parse_unit(text: &str) -> Option<Unit> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let mut parts = text.split('/');
    let mut unit = Unit {
        dim: Dim::NONE,
        exp10: 0,
    };
    for (k, part) in parts.by_ref().enumerate() {
        let sign = if k == 0 { 1 } else { -1 };
        let part = part.trim().trim_start_matches('(').trim_end_matches(')');
        for tok in part.split(['*', '·']) {
            let f = factor(tok.trim())?;
            unit.dim = unit.dim.add(f.dim, sign);
            unit.exp10 += sign * f.exp10;
        }
    }
    Some(unit)
}

fn pow10(k: i32) -> f64 {
    10f64.powi(k.abs())
}

/// Convert `x` expressed in `unit` into the registry's units for `dim`.
pub fn to_registry(x: f64, unit: Unit, dim: Dim, units: &UnitSystem) -> Result<f64, String> {
    if unit.dim != dim {
        return Err(format!("unit has the wrong dimension (expected {})", symbol_for(dim, units)));
    }
    let k = unit.exp10 - registry_scale(dim, units);
    Ok(match k.cmp(&0) {
        std::cmp::Ordering::Equal => x,
        std::cmp::Ordering::Greater => x * pow10(k),
        std::cmp::Ordering::Less => x / pow10(k),
    })
}

/// Unit string used when writing values of dimension `dim`.
pub fn symbol_for(dim: Dim, units: &UnitSystem) -> String {
    let milli = registry_exponents(units).0 == -3;
    let s = match dim {
        Dim::NONE => "",
        Dim::VOLTAGE => "V",
        Dim::CURRENT => "A",
        Dim::TIME => "s",
        Dim::CAPACITANCE => "F",
        Dim::CONDUCTANCE => "S",
        Dim::RESISTANCE => "ohm",
        Dim::TRANSCONDUCTANCE => "A/V^2",
        Dim::INVERSE_VOLTAGE => "1/V",
        Dim::RESISTANCE_RATE => "ohm/V/s",
        Dim::CURRENT_RATE => "A/s",
        Dim::VOLTAGE_RATE => "V/s",
        _ => "?",
    };
    if !milli {
        return s.to_owned();
    }
    match dim {
        Dim::VOLTAGE => "mV".into(),
        Dim::CURRENT => "mA".into(),
        Dim::TIME => "ms".into(),
        Dim::CAPACITANCE => "mF".into(),
        Dim::CURRENT_RATE => "mA/ms".into(),
        Dim::VOLTAGE_RATE => "mV/ms".into(),
        _ => s.to_owned(),
    }
}

/// Split `"5 nF"`, `"5nF"` or `"5"` into the number and optional unit.
pub fn split_quantity(text: &str) -> Option<(f64, Option<&str>)> {
    let text = text.trim();
    if let Ok(x) = text.parse::<f64>() {
        return x.is_finite().then_some((x, None));
    }
    if let Some((num, unit)) = text.split_once(char::is_whitespace) {
        if let Ok(x) = num.parse::<f64>() {
            return x.is_finite().then_some((x, Some(unit.trim())));
        }
    }
    for (idx, c) in text.char_indices().rev() {
        if idx == 0 || !(c.is_alphabetic() || c == 'µ' || c == 'Ω') {
            continue;
        }
        if let Ok(x) = text[..idx].parse::<f64>() {
            return x.is_finite().then_some((x, Some(&text[idx..])));
        }
    }
    None
}
