//! Synthetic generators and the experiment protocols: budget-sweep MSE grids
//! and empirical validation of the sensitivity bounds on adjacent datasets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldId, Point, Space, Tangent};
use crate::manifolds::{Spd, Sym2};
use crate::mechanism::{
    compose_budget, noise_scales, sensitivity_p, sensitivity_v, NoiseScales, SensitivitySpec,
    TauPolicy,
};
use crate::regression::{fit, gradients, mse, scale_covariates, Dataset, FitConfig, FitReport, GeodesicModel};
use crate::sampler::{chain_rng, derive_seed, sample_footpoint, sample_shooting, ChainConfig, ChainDiagnostics};

/// Length of the random generating geodesic on the sphere.
pub const SPHERE_GEODESIC_LENGTH: f64 = 1.0;
/// Length of the random horizontal generating geodesic in preshape space.
pub const KENDALL_GEODESIC_LENGTH: f64 = 0.5;
/// Standard deviation of the symmetric log-matrix entries of random SPD endpoints.
pub const SPD_LOG_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "manifold", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// Ambient Gaussian noise with covariance `delta·I₃`, then renormalized.
    Sphere { delta: f64 },
    /// Isotropic Gaussian tangent noise of standard deviation `sigma`.
    Spd { sigma: f64 },
    /// Horizontal Gaussian tangent noise of standard deviation `delta`.
    Kendall { landmarks: usize, delta: f64 },
}

/// Generated data with covariates scaled onto `[0, 1]` and the generating
/// geodesic expressed in the same parametrization.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub data: Dataset,
    pub generator: GeodesicModel,
}

/// Unscaled draw: covariates `t`, responses, and the geodesic `Exp(q0, t·zeta)`.
#[derive(Clone, Debug)]
pub struct RawSample {
    pub t: Vec<f64>,
    pub y: Vec<Point>,
    pub q0: Point,
    pub zeta: Tangent,
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

impl Generator {
    pub fn manifold(&self) -> ManifoldId {
        match *self {
            Generator::Sphere { .. } => ManifoldId::Sphere,
            Generator::Spd { .. } => ManifoldId::Spd,
            Generator::Kendall { landmarks, .. } => ManifoldId::Kendall { landmarks },
        }
    }

    /// Noise level: `delta` for sphere and Kendall, `sigma` for SPD.
    pub fn noise(&self) -> f64 {
        match *self {
            Generator::Sphere { delta } | Generator::Kendall { delta, .. } => delta,
            Generator::Spd { sigma } => sigma,
        }
    }

    pub fn with_noise(&self, noise: f64) -> Generator {
        match *self {
            Generator::Sphere { .. } => Generator::Sphere { delta: noise },
            Generator::Spd { .. } => Generator::Spd { sigma: noise },
            Generator::Kendall { landmarks, .. } => Generator::Kendall { landmarks, delta: noise },
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("generators need n >= 2, got {n}")));
        }
        if !(self.noise() >= 0.0 && self.noise().is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level {} must be nonnegative", self.noise())));
        }
        if let Generator::Kendall { landmarks, .. } = *self {
            if landmarks < 4 {
                return Err(Error::InvalidParameter(format!("Kendall generator needs k >= 4, got {landmarks}")));
            }
        }
        Ok(())
    }

    pub fn raw(&self, n: usize, seed: u64) -> Result<RawSample> {
        self.validate(n)?;
        let mut rng = chain_rng(seed);
        let space = self.manifold().space();
        let (q0, zeta) = self.random_geodesic(&space, &mut rng)?;
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut y = Vec::with_capacity(n);
        for &ti in &t {
            let clean = space.exp_map(&q0, &zeta.scaled(ti))?;
            y.push(self.perturb(&space, &clean, &mut rng)?);
        }
        Ok(RawSample { t, y, q0, zeta })
    }

    fn random_geodesic(&self, space: &Space, rng: &mut ChaCha8Rng) -> Result<(Point, Tangent)> {
        match *self {
            Generator::Sphere { .. } | Generator::Kendall { .. } => {
                let length = match self {
                    Generator::Sphere { .. } => SPHERE_GEODESIC_LENGTH,
                    _ => KENDALL_GEODESIC_LENGTH,
                };
                let q0 = space.project_to_manifold(&gaussian(rng, space.coord_len()))?;
                let raw = space.project_to_tangent(&q0, &gaussian(rng, space.coord_len()))?;
                let zeta = raw.scaled(length / space.norm(&raw));
                Ok((q0, zeta))
            }
            Generator::Spd { .. } => {
                let mut random_spd = || {
                    let g = gaussian(rng, 3);
                    let s = Sym2::new(g[0], g[1], g[2]).scale(SPD_LOG_SCALE);
                    Spd.point(s.map(f64::exp))
                };
                let p = random_spd()?;
                let q = random_spd()?;
                let v = space.log_map(&p, &q)?;
                Ok((p, v))
            }
        }
    }

    fn perturb(&self, space: &Space, clean: &Point, rng: &mut ChaCha8Rng) -> Result<Point> {
        match *self {
            Generator::Sphere { delta } => {
                let normal = Normal::new(0.0, delta.sqrt())
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let raw: Vec<f64> = clean.coords().iter().map(|c| c + normal.sample(rng)).collect();
                if delta == 0.0 {
                    return Ok(clean.clone());
                }
                space.project_to_manifold(&raw)
            }
            Generator::Spd { sigma: noise } | Generator::Kendall { delta: noise, .. } => {
                let basis = space.tangent_basis(clean);
                let mut xi = Tangent::zero(clean.clone());
                for e in &basis {
                    let c: f64 = StandardNormal.sample(rng);
                    xi = xi.add_scaled(e, noise * c)?;
                }
                if noise == 0.0 {
                    return Ok(clean.clone());
                }
                space.exp_map(clean, &xi)
            }
        }
    }

    /// Draws `n` responses and rescales the covariates onto `[0, 1]`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Synthetic> {
        let raw = self.raw(n, seed)?;
        let space = self.manifold().space();
        let x = scale_covariates(&raw.t)?;
        let generator = rescaled_geodesic(&space, &raw)?;
        let data = Dataset::new(self.manifold(), x, raw.y)?;
        Ok(Synthetic { data, generator })
    }
}

/// The generating geodesic reparametrized so that `x = 0` and `x = 1` map to the
/// smallest and largest drawn `t`.
fn rescaled_geodesic(space: &Space, raw: &RawSample) -> Result<GeodesicModel> {
    let lo = raw.t.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p = space.exp_map(&raw.q0, &raw.zeta.scaled(lo))?;
    let v = space.parallel_transport(&raw.zeta, &p)?.scaled(hi - lo);
    GeodesicModel::new(p, v)
}

pub fn gen_sphere(n: usize, delta: f64, seed: u64) -> Result<Synthetic> {
    Generator::Sphere { delta }.generate(n, seed)
}

pub fn gen_spd(n: usize, sigma: f64, seed: u64) -> Result<Synthetic> {
    Generator::Spd { sigma }.generate(n, seed)
}

pub fn gen_kendall(n: usize, landmarks: usize, delta: f64, seed: u64) -> Result<Synthetic> {
    Generator::Kendall { landmarks, delta }.generate(n, seed)
}

/// Lower curvature bound used in the sensitivities.
pub fn kappa_l(manifold: ManifoldId) -> f64 {
    match manifold {
        ManifoldId::Sphere | ManifoldId::Kendall { .. } => 1.0,
        ManifoldId::Spd => -0.5,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    Equal,
    Unequal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub mode: GridMode,
    pub budgets: Vec<(f64, f64)>,
    /// Footpoints per cell, and shooting vectors per footpoint.
    pub m: usize,
}

pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect(),
    }
}

impl GridSpec {
    /// Total budgets `ε` evenly spaced on `[lo, hi]`, split `ε_p = ε_v = ε/2`.
    pub fn equal(lo: f64, hi: f64, steps: usize, m: usize) -> Self {
        let budgets = linspace(lo, hi, steps).into_iter().map(|e| (e / 2.0, e / 2.0)).collect();
        Self { mode: GridMode::Equal, budgets, m }
    }

    /// `ε_p` evenly spaced on `[lo, hi]` with `ε_v = lo + hi − ε_p`, so the total is constant.
    pub fn unequal(lo: f64, hi: f64, steps: usize, m: usize) -> Self {
        let budgets = linspace(lo, hi, steps).into_iter().map(|e| (e, lo + hi - e)).collect();
        Self { mode: GridMode::Unequal, budgets, m }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.budgets.is_empty() {
            return Err(Error::InvalidParameter("grid needs m >= 1 and at least one budget".into()));
        }
        for &(p, v) in &self.budgets {
            compose_budget(p, v)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub eps_p: f64,
    pub eps_v: f64,
    /// `ln Ē`, the log of the mean over footpoints of per-footpoint mean MSEs.
    pub ln_mse: f64,
    pub mean_mse: f64,
    /// `ln(2E(p̂, v̂))`.
    pub baseline: f64,
    pub sigma_p: f64,
    pub sigma_v: f64,
    pub pairs_used: usize,
    /// Pairs dropped because a chain never moved or the MSE was undefined.
    pub excluded: usize,
    pub footpoint_acceptance: f64,
    pub shooting_acceptance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub manifold: ManifoldId,
    pub mode: GridMode,
    pub n: usize,
    pub seed: u64,
    pub tau: f64,
    pub tau_m: f64,
    pub tau_policy: TauPolicy,
    pub baseline: f64,
    pub cells: Vec<GridCell>,
}

impl GridResult {
    pub fn mean_ln_mse(&self) -> f64 {
        self.cells.iter().map(|c| c.ln_mse).sum::<f64>() / self.cells.len() as f64
    }
}

/// Per-footpoint outcome: MSEs of the pairs kept, pairs excluded, acceptance rates.
struct FootpointOutcome {
    mses: Vec<f64>,
    excluded: usize,
    footpoint_acceptance: f64,
    shooting_acceptance: Vec<f64>,
}

fn footpoint_task(
    data: &Dataset,
    report: &FitReport,
    scales: &NoiseScales,
    chain: &ChainConfig,
    m: usize,
    seeds: (u64, u64),
) -> Result<FootpointOutcome> {
    let (p_seed, v_seed) = seeds;
    let (p_tilde, p_diag) = sample_footpoint(data, report, scales, &chain.with_seed(p_seed))?;
    let mut out = FootpointOutcome {
        mses: Vec::with_capacity(m),
        excluded: 0,
        footpoint_acceptance: p_diag.acceptance_rate,
        shooting_acceptance: Vec::with_capacity(m),
    };
    if p_diag.stuck {
        out.excluded = m;
        return Ok(out);
    }
    for j in 0..m {
        let cfg = chain.with_seed(derive_seed(v_seed, &[j as u64]));
        let (v_tilde, v_diag): (Tangent, ChainDiagnostics) =
            sample_shooting(&p_tilde, data, report, scales, &cfg)?;
        out.shooting_acceptance.push(v_diag.acceptance_rate);
        let model = GeodesicModel { p: p_tilde.clone(), v: v_tilde };
        match mse(&model, data) {
            Ok(e) if !v_diag.stuck && e.is_finite() => out.mses.push(e),
            _ => out.excluded += 1,
        }
    }
    Ok(out)
}

/// Budget sweep: for every `(ε_p, ε_v)` draw `m` private footpoints and `m`
/// shooting vectors per footpoint, and record `ln Ē` with the non-private baseline.
pub fn run_grid(
    data: &Dataset,
    report: &FitReport,
    grid: &GridSpec,
    chain: &ChainConfig,
    tau_policy: TauPolicy,
    factor: u8,
) -> Result<GridResult> {
    grid.validate()?;
    chain.validate()?;
    let (tau, tau_m, _) = tau_policy.resolve(report.tau_empirical, report.tau_m_empirical);
    let spec = SensitivitySpec::new(data.len(), tau, tau_m, kappa_l(data.manifold()))?;
    let baseline = mse(&report.model, data)?.ln();

    let mut tasks = Vec::new();
    for (c, &(eps_p, eps_v)) in grid.budgets.iter().enumerate() {
        let scales = noise_scales(&spec, &compose_budget(eps_p, eps_v)?, factor)?;
        for i in 0..grid.m {
            let key = [c as u64, i as u64];
            let seeds = (
                derive_seed(chain.seed, &[key[0], key[1], 0]),
                derive_seed(chain.seed, &[key[0], key[1], 1]),
            );
            tasks.push((c, scales, seeds));
        }
    }
    let run = |&(_, scales, seeds): &(usize, NoiseScales, (u64, u64))| {
        footpoint_task(data, report, &scales, chain, grid.m, seeds)
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<FootpointOutcome>> = tasks.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<FootpointOutcome>> = tasks.iter().map(run).collect();

    let mut cells = Vec::with_capacity(grid.budgets.len());
    let mut outcomes = outcomes.into_iter();
    for &(eps_p, eps_v) in &grid.budgets {
        let scales = noise_scales(&spec, &compose_budget(eps_p, eps_v)?, factor)?;
        let mut per_footpoint = Vec::new();
        let (mut excluded, mut used) = (0, 0);
        let (mut acc_p, mut acc_v, mut count_v) = (0.0, 0.0, 0usize);
        for _ in 0..grid.m {
            let o = outcomes.next().expect("one outcome per task")?;
            excluded += o.excluded;
            used += o.mses.len();
            acc_p += o.footpoint_acceptance;
            acc_v += o.shooting_acceptance.iter().sum::<f64>();
            count_v += o.shooting_acceptance.len();
            if !o.mses.is_empty() {
                per_footpoint.push(o.mses.iter().sum::<f64>() / o.mses.len() as f64);
            }
        }
        let mean_mse = if per_footpoint.is_empty() {
            f64::NAN
        } else {
            per_footpoint.iter().sum::<f64>() / per_footpoint.len() as f64
        };
        cells.push(GridCell {
            eps_p,
            eps_v,
            ln_mse: mean_mse.ln(),
            mean_mse,
            baseline,
            sigma_p: scales.sigma_p,
            sigma_v: scales.sigma_v,
            pairs_used: used,
            excluded,
            footpoint_acceptance: acc_p / grid.m as f64,
            shooting_acceptance: if count_v > 0 { acc_v / count_v as f64 } else { 0.0 },
        });
    }
    Ok(GridResult {
        manifold: data.manifold(),
        mode: grid.mode,
        n: data.len(),
        seed: chain.seed,
        tau,
        tau_m,
        tau_policy,
        baseline,
        cells,
    })
}

/// Two datasets of size `n` that differ only in their last record, plus the
/// `n + 1`-record union they were cut from. Covariates are scaled on the union
/// so the shared records are identical in both.
#[derive(Clone, Debug)]
pub struct AdjacentPair {
    pub d: Dataset,
    pub d_prime: Dataset,
    pub union: Dataset,
}

pub fn make_adjacent_pairs(n: usize, generator: &Generator, trials: usize, seed: u64) -> Result<Vec<AdjacentPair>> {
    if trials == 0 || n < 2 {
        return Err(Error::InvalidParameter("adjacent pairs need trials >= 1 and n >= 2".into()));
    }
    (0..trials)
        .map(|trial| {
            let raw = generator.raw(n + 1, derive_seed(seed, &[n as u64, trial as u64]))?;
            let x = scale_covariates(&raw.t)?;
            let id = generator.manifold();
            // D drops the first record, D' the last; both list the shared ones first
            let mut order_d: Vec<usize> = (1..n).collect();
            order_d.push(n);
            let mut order_dp: Vec<usize> = (1..n).collect();
            order_dp.push(0);
            let pick = |order: &[usize]| {
                Dataset::new(id, order.iter().map(|&i| x[i]).collect(), order.iter().map(|&i| raw.y[i].clone()).collect())
            };
            Ok(AdjacentPair {
                d: pick(&order_d)?,
                d_prime: pick(&order_dp)?,
                union: Dataset::new(id, x.clone(), raw.y.clone())?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub manifold: ManifoldId,
    pub n: usize,
    pub trial: usize,
    pub tau: f64,
    pub tau_m: f64,
    pub delta_thy_p: f64,
    pub delta_exp_p: f64,
    pub delta_thy_v: f64,
    pub delta_exp_v: f64,
    /// `Δ^thy/Δ^exp`; `+∞` when the experimental difference vanishes.
    pub r_p: f64,
    pub r_v: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

fn ratio(thy: f64, exp: f64) -> f64 {
    if exp > 0.0 {
        thy / exp
    } else {
        f64::INFINITY
    }
}

/// Experimental versus theoretical sensitivities. Gradients of both datasets
/// are evaluated at the non-private fit of the union; `τ` is the largest
/// union residual and `τ_m` the largest distance to the union's Fréchet mean.
pub fn validate_sensitivity(pairs: &[AdjacentPair], cfg: &FitConfig) -> Result<Vec<RatioRow>> {
    pairs
        .iter()
        .enumerate()
        .map(|(trial, pair)| {
            let space = pair.union.space();
            let report = fit(&pair.union, cfg)?;
            let (gp, gv) = gradients(&report.model, &pair.d)?;
            let (gp2, gv2) = gradients(&report.model, &pair.d_prime)?;
            let delta_exp_p = space.norm(&gp.add_scaled(&gp2, -1.0)?);
            let delta_exp_v = space.norm(&gv.add_scaled(&gv2, -1.0)?);
            let n = pair.d.len();
            let spec = SensitivitySpec::new(n, report.tau_empirical, report.tau_m_empirical, kappa_l(pair.d.manifold()))?;
            let (delta_thy_p, delta_thy_v) = (sensitivity_p(&spec), sensitivity_v(&spec));
            Ok(RatioRow {
                manifold: pair.d.manifold(),
                n,
                trial,
                tau: spec.tau,
                tau_m: spec.tau_m,
                delta_thy_p,
                delta_exp_p,
                delta_thy_v,
                delta_exp_v,
                r_p: ratio(delta_thy_p, delta_exp_p),
                r_v: ratio(delta_thy_v, delta_exp_v),
            })
        })
        .collect()
}

pub fn summarize(values: impl IntoIterator<Item = f64>) -> Option<RatioSummary> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    let median = if v.len().is_multiple_of(2) { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] };
    Some(RatioSummary { min: v[0], median, max: v[v.len() - 1] })
}
