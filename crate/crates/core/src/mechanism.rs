//! Sensitivity bounds and the K-norm gradient (KNG) mechanism.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, Point, Tangent};
use crate::manifolds::curvature::FLAT_EPS;
use crate::regression::{grad_p, grad_v, Dataset, GeodesicModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySpec {
    pub n: usize,
    pub tau: f64,
    #[serde(default)]
    pub tau_m: f64,
    pub kappa_l: f64,
}

impl SensitivitySpec {
    pub fn new(n: usize, tau: f64, tau_m: f64, kappa_l: f64) -> Result<Self> {
        let spec = Self { n, tau, tau_m, kappa_l };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("sensitivity needs n >= 1".into()));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) || !(self.tau_m >= 0.0 && self.tau_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau = {} and tau_m = {} must be finite and nonnegative",
                self.tau, self.tau_m
            )));
        }
        if !self.kappa_l.is_finite() {
            return Err(Error::InvalidParameter("kappa_l must be finite".into()));
        }
        Ok(())
    }

    /// `a = √(−κ_l)(τ_m + τ)`, half the bound on `ρ` in the hyperbolic factors.
    fn hyperbolic_arg(&self) -> Option<f64> {
        (self.kappa_l < -FLAT_EPS).then(|| (-self.kappa_l).sqrt() * (self.tau_m + self.tau))
    }
}

/// Footpoint sensitivity: `2τ/n`, times `cosh(2√(−κ_l)(τ_m+τ))` when `κ_l < 0`.
pub fn sensitivity_p(spec: &SensitivitySpec) -> f64 {
    let base = 2.0 * spec.tau / spec.n as f64;
    match spec.hyperbolic_arg() {
        Some(a) => base * (2.0 * a).cosh(),
        None => base,
    }
}

/// Shooting-vector sensitivity: `2τ/n`, or `(τ/n)·sinh(2a)/a` with
/// `a = √(−κ_l)(τ_m+τ)` when `κ_l < 0`.
pub fn sensitivity_v(spec: &SensitivitySpec) -> f64 {
    let base = 2.0 * spec.tau / spec.n as f64;
    match spec.hyperbolic_arg() {
        Some(a) => base * crate::linalg::sinhc(2.0 * a),
        None => base,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub eps_p: f64,
    pub eps_v: f64,
    pub total: f64,
}

pub fn compose_budget(eps_p: f64, eps_v: f64) -> Result<PrivacyBudget> {
    if !(eps_p > 0.0 && eps_v > 0.0 && eps_p.is_finite() && eps_v.is_finite()) {
        return Err(Error::NonpositiveBudget { eps_p, eps_v });
    }
    Ok(PrivacyBudget { eps_p, eps_v, total: eps_p + eps_v })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseScales {
    pub sigma_p: f64,
    pub sigma_v: f64,
    pub conservative_factor: u8,
}

/// `σ = factor·Δ/ε` for each parameter; `factor` is 1 or 2.
pub fn noise_scales(spec: &SensitivitySpec, budget: &PrivacyBudget, factor: u8) -> Result<NoiseScales> {
    if factor != 1 && factor != 2 {
        return Err(Error::InvalidParameter(format!("conservative factor must be 1 or 2, got {factor}")));
    }
    spec.validate()?;
    if !(spec.tau > 0.0) {
        return Err(Error::DegenerateInput("tau = 0 gives zero sensitivity and no noise scale".into()));
    }
    let f = f64::from(factor);
    Ok(NoiseScales {
        sigma_p: f * sensitivity_p(spec) / budget.eps_p,
        sigma_v: f * sensitivity_v(spec) / budget.eps_v,
        conservative_factor: factor,
    })
}

/// Unnormalized KNG log-density of a candidate footpoint: `−‖∇_p E(p, Γ v_ref)‖/σ_p`.
pub fn kng_logdensity_p(p: &Point, v_ref: &Tangent, data: &Dataset, sigma_p: f64) -> Result<f64> {
    let space = data.space();
    let v = space.parallel_transport(v_ref, p)?;
    let g = grad_p(&GeodesicModel { p: p.clone(), v }, data)?;
    Ok(-space.norm(&g) / sigma_p)
}

/// Unnormalized KNG log-density of a shooting vector at a fixed footpoint.
pub fn kng_logdensity_v(v: &Tangent, p_fixed: &Point, data: &Dataset, sigma_v: f64) -> Result<f64> {
    let space = data.space();
    space.check_base(v, p_fixed)?;
    let g = grad_v(&GeodesicModel { p: p_fixed.clone(), v: v.clone() }, data)?;
    Ok(-space.norm(&g) / sigma_v)
}

/// Source of the error bound `τ` used in the sensitivities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum TauPolicy {
    /// A data-independent public bound.
    Public { tau: f64, tau_m: f64 },
    /// `τ` and `τ_m` read off the fitted data. Not private.
    Empirical,
}

pub const EMPIRICAL_TAU_WARNING: &str =
    "warning: tau is estimated from the private data; the release does not satisfy differential privacy";

impl TauPolicy {
    /// Resolves `(τ, τ_m)` given the empirical values; the flag is true when a
    /// privacy warning must be shown.
    pub fn resolve(&self, tau_empirical: f64, tau_m_empirical: f64) -> (f64, f64, bool) {
        match *self {
            TauPolicy::Public { tau, tau_m } => (tau, tau_m, false),
            TauPolicy::Empirical => (tau_empirical, tau_m_empirical, true),
        }
    }

    pub fn is_public(&self) -> bool {
        matches!(self, TauPolicy::Public { .. })
    }
}
