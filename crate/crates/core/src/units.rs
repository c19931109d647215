//! Conversions between model currency (`f64`) and ledger minor units (`i64`).

/// Integer minor currency units (e.g. cents). All ledger money uses this.
pub type MinorUnits = i64;

/// Floor to minor units, snapping values that sit within float noise of an
/// integer. Products of decimal-specified rates (3% of 1_000_000, a 0.97 fx
/// rate) land a hair off the intended integer; a bare floor would lose a
/// whole unit there.
pub fn snap_floor(x: f64) -> MinorUnits {
    assert!(x.is_finite(), "snap_floor on non-finite value {x}");
    let nearest = x.round();
    let tolerance = (x.abs() * 1e-13).max(1e-9);
    let floored = if (x - nearest).abs() <= tolerance {
        nearest
    } else {
        x.floor()
    };
    floored as MinorUnits
}

/// Round to minor units, ties to even.
pub fn round_half_even(x: f64) -> MinorUnits {
    assert!(x.is_finite(), "round_half_even on non-finite value {x}");
    x.round_ties_even() as MinorUnits
}

/// Model currency to minor units at `scale` minor units per model unit.
pub fn to_minor(amount: f64, scale: f64) -> MinorUnits {
    round_half_even(amount * scale)
}

/// Minor units to model currency at `scale` minor units per model unit.
pub fn to_model(amount: MinorUnits, scale: f64) -> f64 {
    amount as f64 / scale
}
