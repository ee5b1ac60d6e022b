//! Constant-curvature comparison coefficients.
//!
//! Along a unit-speed geodesic in a space of constant curvature `κ`, the
//! perpendicular Jacobi field with `J(0) = u, J'(0) = 0` has norm `C_κ(s)|u|`
//! and the one with `J(0) = 0, J'(0) = u` has norm `S_κ(s)|u|`.

use crate::geometry::Variation;

/// Below this magnitude a curvature is treated as exactly flat.
pub const FLAT_EPS: f64 = 1e-12;

pub fn c_coeff(kappa: f64, s: f64) -> f64 {
    if kappa.abs() < FLAT_EPS {
        1.0
    } else if kappa > 0.0 {
        (kappa.sqrt() * s).cos()
    } else {
        ((-kappa).sqrt() * s).cosh()
    }
}

pub fn s_coeff(kappa: f64, s: f64) -> f64 {
    if kappa.abs() < FLAT_EPS {
        s
    } else if kappa > 0.0 {
        let r = kappa.sqrt();
        (r * s).sin() / r
    } else {
        let r = (-kappa).sqrt();
        (r * s).sinh() / r
    }
}

/// `S_κ(s) / s`, continuous at `s = 0` where it equals 1.
pub fn s_ratio(kappa: f64, s: f64) -> f64 {
    let x2 = kappa * s * s;
    if x2.abs() < 1e-8 {
        // series of sin(x)/x or sinh(x)/x in x² = κ s²
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        s_coeff(kappa, s) / s
    }
}

/// Scaling applied to the perpendicular component of a Jacobi adjoint for a
/// geodesic of length `s` in a direction of sectional curvature `kappa`.
pub fn jacobi_factor(kappa: f64, s: f64, variation: Variation) -> f64 {
    match variation {
        Variation::Footpoint => c_coeff(kappa, s),
        Variation::Shooting => s_ratio(kappa, s),
    }
}
