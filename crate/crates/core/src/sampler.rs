//! Random-walk Metropolis–Hastings on a manifold and on a tangent space.
//!
//! The footpoint chain proposes `Exp(p, ν)` with `ν` uniform in the
//! `η`-ball of `T_p M`; the shooting-vector chain adds uniform-ball increments in
//! the fixed tangent space at the released footpoint. Proposals whose density
//! cannot be evaluated (cut locus, domain errors) are rejected.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, Point, Tangent};
use crate::mechanism::{
    kng_logdensity_p, kng_logdensity_v, NoiseScales, PrivacyBudget, SensitivitySpec,
};
use crate::regression::{Dataset, FitReport};

/// Footpoint proposals never exceed this fraction of the injectivity guard.
pub const ETA_GUARD_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub chain_length: usize,
    pub burn_in: usize,
    /// Fixed proposal radius; when absent `η = eta_factor·σ`.
    pub proposal_radius: Option<f64>,
    pub eta_factor: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { chain_length: 5000, burn_in: 1000, proposal_radius: None, eta_factor: 1.0, seed: 0 }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.chain_length {
            return Err(Error::InvalidParameter(format!(
                "burn_in {} must be below chain_length {}",
                self.burn_in, self.chain_length
            )));
        }
        let eta_ok = self.proposal_radius.is_none_or(|r| r > 0.0 && r.is_finite());
        if !eta_ok || !(self.eta_factor > 0.0 && self.eta_factor.is_finite()) {
            return Err(Error::InvalidParameter("proposal radius must be positive".into()));
        }
        Ok(())
    }

    /// Proposal radius for a chain targeting a density of scale `sigma`.
    pub fn eta(&self, sigma: f64) -> f64 {
        self.proposal_radius.unwrap_or(self.eta_factor * sigma)
    }

    pub fn with_seed(&self, seed: u64) -> ChainConfig {
        ChainConfig { seed, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub steps: usize,
    pub final_logdensity: f64,
    pub samples_kept: usize,
    pub eta: f64,
    /// No proposal was ever accepted.
    pub stuck: bool,
}

/// Mixes a master seed with a path of stream indices (splitmix64 finalizer).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &k| mix(acc ^ mix(k)))
}

pub fn chain_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generic random-walk Metropolis–Hastings with a symmetric proposal.
///
/// Runs `cfg.chain_length` steps from `init` and returns the final state.
/// `on_kept` sees every state after burn-in, in order.
pub fn random_walk<S, L, P, K>(
    init: S,
    mut logdensity: L,
    mut propose: P,
    cfg: &ChainConfig,
    rng: &mut dyn RngCore,
    mut on_kept: K,
) -> Result<(S, ChainDiagnostics)>
where
    S: Clone,
    L: FnMut(&S) -> Result<f64>,
    P: FnMut(&S, &mut dyn RngCore) -> Result<S>,
    K: FnMut(&S),
{
    cfg.validate()?;
    let mut current = init;
    let mut current_ld = logdensity(&current)?;
    let mut accepted = 0;
    for step in 0..cfg.chain_length {
        let proposal = propose(&current, &mut *rng);
        let u: f64 = rng.random();
        if let Ok(candidate) = proposal {
            if let Ok(ld) = logdensity(&candidate) {
                if ld.is_finite() && u.ln() < ld - current_ld {
                    current = candidate;
                    current_ld = ld;
                    accepted += 1;
                }
            }
        }
        if step >= cfg.burn_in {
            on_kept(&current);
        }
    }
    let diag = ChainDiagnostics {
        acceptance_rate: accepted as f64 / cfg.chain_length as f64,
        accepted,
        steps: cfg.chain_length,
        final_logdensity: current_ld,
        samples_kept: cfg.chain_length - cfg.burn_in,
        eta: f64::NAN,
        stuck: accepted == 0,
    };
    Ok((current, diag))
}

/// `Exp(current, ν)` with `ν` uniform in the `eta`-ball of the tangent space.
pub fn propose<M: Manifold + ?Sized>(
    space: &M,
    current: &Point,
    eta: f64,
    rng: &mut dyn RngCore,
) -> Result<Point> {
    let nu = space.sample_ball(current, eta, rng);
    space.exp_map(current, &nu)
}

fn footpoint_eta<M: Manifold + ?Sized>(space: &M, cfg: &ChainConfig, sigma: f64) -> f64 {
    cfg.eta(sigma).min(ETA_GUARD_FRACTION * space.injectivity_guard())
}

/// Draws the private footpoint from `exp(−‖∇_p E(p, Γ v̂)‖/σ_p)`, starting at `p̂`.
pub fn sample_footpoint(
    data: &Dataset,
    fit: &FitReport,
    scales: &NoiseScales,
    cfg: &ChainConfig,
) -> Result<(Point, ChainDiagnostics)> {
    let space = data.space();
    let v_hat = &fit.model.v;
    let sigma = scales.sigma_p;
    let eta = footpoint_eta(&space, cfg, sigma);
    let mut rng = chain_rng(cfg.seed);
    let (p, mut diag) = random_walk(
        fit.model.p.clone(),
        |p: &Point| kng_logdensity_p(p, v_hat, data, sigma),
        |p: &Point, rng: &mut dyn RngCore| propose(&space, p, eta, rng),
        cfg,
        &mut rng,
        |_| {},
    )?;
    diag.eta = eta;
    Ok((p, diag))
}

/// Draws the private shooting vector in `T_{p̃} M`, starting at the transported `v̂`.
pub fn sample_shooting(
    p_tilde: &Point,
    data: &Dataset,
    fit: &FitReport,
    scales: &NoiseScales,
    cfg: &ChainConfig,
) -> Result<(Tangent, ChainDiagnostics)> {
    let space = data.space();
    space.check_point(p_tilde)?;
    let sigma = scales.sigma_v;
    let eta = cfg.eta(sigma);
    let init = space.parallel_transport(&fit.model.v, p_tilde)?;
    let mut rng = chain_rng(cfg.seed);
    let (v, mut diag) = random_walk(
        init,
        |v: &Tangent| kng_logdensity_v(v, p_tilde, data, sigma),
        |v: &Tangent, rng: &mut dyn RngCore| {
            let step = space.sample_ball(p_tilde, eta, rng);
            v.add_scaled(&step, 1.0)
        },
        cfg,
        &mut rng,
        |_| {},
    )?;
    diag.eta = eta;
    Ok((v, diag))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivateRelease {
    pub p_tilde: Point,
    pub v_tilde: Tangent,
    pub budget: PrivacyBudget,
    pub spec: SensitivitySpec,
    pub scales: NoiseScales,
    pub seed: u64,
    pub footpoint_seed: u64,
    pub shooting_seed: u64,
    pub footpoint_chain: ChainDiagnostics,
    pub shooting_chain: ChainDiagnostics,
}

/// Sequential release: the footpoint chain, then the shooting chain at `p̃`,
/// on independent substreams of `cfg.seed`.
pub fn release_pair(
    data: &Dataset,
    fit: &FitReport,
    spec: &SensitivitySpec,
    budget: &PrivacyBudget,
    scales: &NoiseScales,
    cfg: &ChainConfig,
) -> Result<PrivateRelease> {
    let footpoint_seed = derive_seed(cfg.seed, &[0]);
    let shooting_seed = derive_seed(cfg.seed, &[1]);
    let (p_tilde, footpoint_chain) = sample_footpoint(data, fit, scales, &cfg.with_seed(footpoint_seed))?;
    let (v_tilde, shooting_chain) =
        sample_shooting(&p_tilde, data, fit, scales, &cfg.with_seed(shooting_seed))?;
    Ok(PrivateRelease {
        p_tilde,
        v_tilde,
        budget: *budget,
        spec: *spec,
        scales: *scales,
        seed: cfg.seed,
        footpoint_seed,
        shooting_seed,
        footpoint_chain,
        shooting_chain,
    })
}
