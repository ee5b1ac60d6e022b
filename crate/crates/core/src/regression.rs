//! Least-squares geodesic regression.
//!
//! The model is a geodesic `γ(x) = Exp(p, x·v)` with footpoint `p` and shooting
//! vector `v ∈ T_p M`. It is fitted by minimizing
//! `E(p, v) = (1/2n) Σ d(Exp(p, x_i v), y_i)²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldId, Point, Space, Tangent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    manifold: ManifoldId,
    x: Vec<f64>,
    y: Vec<Point>,
}

impl Dataset {
    pub fn new(manifold: ManifoldId, x: Vec<f64>, y: Vec<Point>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidParameter(format!(
                "{} covariates but {} responses",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::InvalidParameter("dataset is empty".into()));
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite covariate {bad}")));
        }
        let space = manifold.space();
        for p in &y {
            space.check_point(p)?;
            if let Some(reason) = space.membership_error(p.coords()) {
                return Err(Error::NotOnManifold(reason));
            }
        }
        Ok(Self { manifold, x, y })
    }

    /// Builds a dataset after affinely rescaling `x_raw` onto `[0, 1]`.
    pub fn scaled(manifold: ManifoldId, x_raw: &[f64], y: Vec<Point>) -> Result<Self> {
        Self::new(manifold, scale_covariates(x_raw)?, y)
    }

    pub fn manifold(&self) -> ManifoldId {
        self.manifold
    }

    pub fn space(&self) -> Space {
        self.manifold.space()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[Point] {
        &self.y
    }

    pub fn records(&self) -> impl Iterator<Item = (f64, &Point)> {
        self.x.iter().copied().zip(self.y.iter())
    }

    /// Reverses the covariate direction, `x ↦ 1 - x`.
    pub fn reversed(&self) -> Dataset {
        Dataset {
            manifold: self.manifold,
            x: self.x.iter().map(|x| 1.0 - x).collect(),
            y: self.y.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicModel {
    pub p: Point,
    pub v: Tangent,
}

impl GeodesicModel {
    pub fn new(p: Point, v: Tangent) -> Result<Self> {
        let space = p.manifold().space();
        space.check_base(&v, &p)?;
        Ok(Self { p, v })
    }

    /// `γ(x) = Exp(p, x·v)`.
    pub fn predict(&self, x: f64) -> Result<Point> {
        self.p.manifold().space().exp_map(&self.p, &self.v.scaled(x))
    }
}

pub fn scale_covariates(x_raw: &[f64]) -> Result<Vec<f64>> {
    let lo = x_raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x_raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || !(hi - lo).is_finite() {
        return Err(Error::DegenerateCovariates);
    }
    let span = hi - lo;
    Ok(x_raw.iter().map(|x| (x - lo) / span).collect())
}

fn check_model(model: &GeodesicModel, data: &Dataset) -> Result<()> {
    if model.p.manifold() != data.manifold {
        return Err(Error::ManifoldMismatch {
            expected: data.manifold,
            got: model.p.manifold(),
        });
    }
    Ok(())
}

/// Tangent errors `ε_i = Log(Exp(p, x_i v), y_i)`, each based at its prediction.
pub fn residuals(model: &GeodesicModel, data: &Dataset) -> Result<Vec<Tangent>> {
    check_model(model, data)?;
    let space = data.space();
    data.records()
        .map(|(x, y)| {
            let eta = space.exp_map(&model.p, &model.v.scaled(x))?;
            space.log_map(&eta, y)
        })
        .collect()
}

pub fn energy(model: &GeodesicModel, data: &Dataset) -> Result<f64> {
    check_model(model, data)?;
    let space = data.space();
    let mut total = 0.0;
    for (x, y) in data.records() {
        let eta = space.exp_map(&model.p, &model.v.scaled(x))?;
        let d = space.dist(&eta, y)?;
        total += d * d;
    }
    Ok(total / (2.0 * data.len() as f64))
}

/// Mean squared error `(1/n) Σ d(Exp(p, x_i v), y_i)²`, i.e. twice the energy.
pub fn mse(model: &GeodesicModel, data: &Dataset) -> Result<f64> {
    Ok(2.0 * energy(model, data)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Closed-form Jacobi-field adjoints.
    #[default]
    Jacobi,
    /// Central differences over an orthonormal tangent frame.
    FiniteDifference,
}

/// `(∇_p E, ∇_v E)` via the Jacobi-field adjoints of the exponential map.
pub fn gradients(model: &GeodesicModel, data: &Dataset) -> Result<(Tangent, Tangent)> {
    let (gp, gv) = gradient_parts(model, data, true, true)?;
    Ok((gp.expect("requested"), gv.expect("requested")))
}

pub fn grad_p(model: &GeodesicModel, data: &Dataset) -> Result<Tangent> {
    Ok(gradient_parts(model, data, true, false)?.0.expect("requested"))
}

pub fn grad_v(model: &GeodesicModel, data: &Dataset) -> Result<Tangent> {
    Ok(gradient_parts(model, data, false, true)?.1.expect("requested"))
}

fn gradient_parts(
    model: &GeodesicModel,
    data: &Dataset,
    want_p: bool,
    want_v: bool,
) -> Result<(Option<Tangent>, Option<Tangent>)> {
    check_model(model, data)?;
    let space = data.space();
    let p = &model.p;
    let mut gp = Tangent::zero(p.clone());
    let mut gv = Tangent::zero(p.clone());
    let n = data.len() as f64;
    for (x, y) in data.records() {
        if !want_p && x == 0.0 {
            continue;
        }
        let (foot, shoot) = space.residual_adjoints(p, &model.v, x, y)?;
        if want_p {
            gp.accumulate_components(&foot, -1.0 / n);
        }
        if want_v && x != 0.0 {
            gv.accumulate_components(&shoot, -x / n);
        }
    }
    Ok((want_p.then_some(gp), want_v.then_some(gv)))
}

/// Central finite-difference gradients of the energy over `tangent_basis(p)`.
/// A footpoint perturbation carries `v` along by parallel transport.
pub fn finite_difference_gradients(
    model: &GeodesicModel,
    data: &Dataset,
    step: f64,
) -> Result<(Tangent, Tangent)> {
    check_model(model, data)?;
    let space = data.space();
    let p = &model.p;
    let basis = space.tangent_basis(p);
    let mut gp = Tangent::zero(p.clone());
    let mut gv = Tangent::zero(p.clone());
    for e in &basis {
        let shifted = |h: f64| -> Result<f64> {
            let q = space.exp_map(p, &e.scaled(h))?;
            let v = space.parallel_transport(&model.v, &q)?;
            energy(&GeodesicModel { p: q, v }, data)
        };
        let dp = (shifted(step)? - shifted(-step)?) / (2.0 * step);
        gp.accumulate(e, dp);

        let stretched = |h: f64| -> Result<f64> {
            let v = model.v.add_scaled(e, h)?;
            energy(&GeodesicModel { p: p.clone(), v }, data)
        };
        let dv = (stretched(step)? - stretched(-step)?) / (2.0 * step);
        gv.accumulate(e, dv);
    }
    Ok((gp, gv))
}

fn gradients_with(
    method: GradientMethod,
    fd_step: f64,
    model: &GeodesicModel,
    data: &Dataset,
) -> Result<(Tangent, Tangent)> {
    match method {
        GradientMethod::Jacobi => gradients(model, data),
        GradientMethod::FiniteDifference => finite_difference_gradients(model, data, fd_step),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub shrink: f64,
    pub initial_step: f64,
    pub gradient: GradientMethod,
    pub fd_step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
            armijo_c: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            gradient: GradientMethod::Jacobi,
            fd_step: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: GeodesicModel,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max_i ‖ε_i‖` at the fitted model.
    pub tau_empirical: f64,
    /// `max_i d(y_i, m)` for the Fréchet mean `m`.
    pub tau_m_empirical: f64,
    pub frechet_mean: Point,
    pub gradient_norms: (f64, f64),
    pub warnings: Vec<String>,
}

/// Backtracking search along `candidate(t)`; returns the accepted iterate and energy.
fn armijo<F>(
    cfg: &FitConfig,
    data: &Dataset,
    current: f64,
    slope: f64,
    mut candidate: F,
) -> Option<(GeodesicModel, f64)>
where
    F: FnMut(f64) -> Result<GeodesicModel>,
{
    let mut t = cfg.initial_step;
    while t > 1e-14 {
        if let Ok(model) = candidate(t) {
            if let Ok(e) = energy(&model, data) {
                if e <= current - cfg.armijo_c * t * slope {
                    return Some((model, e));
                }
            }
        }
        t *= cfg.shrink;
    }
    None
}

/// Alternating Riemannian gradient descent on `p` and `v` with Armijo backtracking.
pub fn fit(data: &Dataset, cfg: &FitConfig) -> Result<FitReport> {
    if data.len() < 2 {
        return Err(Error::InvalidParameter("fit needs at least two records".into()));
    }
    let space = data.space();
    let model = initial_model(data)?;
    let (model, iterations, converged) = descend(data, cfg, &space, model)?;
    finish_report(data, cfg, model, iterations, converged)
}

fn descend(
    data: &Dataset,
    cfg: &FitConfig,
    space: &Space,
    mut model: GeodesicModel,
) -> Result<(GeodesicModel, usize, bool)> {
    let mut e = energy(&model, data)?;
    for it in 0..cfg.max_iter {
        let (gp, gv) = gradients_with(cfg.gradient, cfg.fd_step, &model, data)?;
        let (np, nv) = (space.norm(&gp), space.norm(&gv));
        if np <= cfg.tol && nv <= cfg.tol {
            return Ok((model, it, true));
        }
        let mut moved = false;

        if np > 0.0 {
            let step = armijo(cfg, data, e, np * np, |t| {
                let p = space.exp_map(&model.p, &gp.scaled(-t))?;
                let v = space.parallel_transport(&model.v, &p)?;
                Ok(GeodesicModel { p, v })
            });
            if let Some((m, en)) = step {
                moved |= en < e;
                model = m;
                e = en;
            }
        }

        let gv = match cfg.gradient {
            GradientMethod::Jacobi => grad_v(&model, data)?,
            GradientMethod::FiniteDifference => {
                finite_difference_gradients(&model, data, cfg.fd_step)?.1
            }
        };
        let nv = space.norm(&gv);
        if nv > 0.0 {
            let step = armijo(cfg, data, e, nv * nv, |t| {
                let v = model.v.add_scaled(&gv, -t)?;
                Ok(GeodesicModel { p: model.p.clone(), v })
            });
            if let Some((m, en)) = step {
                moved |= en < e;
                model = m;
                e = en;
            }
        }

        if !moved {
            // no further decrease is representable; report the gradient as is
            let (gp, gv) = gradients_with(cfg.gradient, cfg.fd_step, &model, data)?;
            let ok = space.norm(&gp) <= cfg.tol && space.norm(&gv) <= cfg.tol;
            return Ok((model, it + 1, ok));
        }
    }
    let (gp, gv) = gradients_with(cfg.gradient, cfg.fd_step, &model, data)?;
    let ok = space.norm(&gp) <= cfg.tol && space.norm(&gv) <= cfg.tol;
    Ok((model, cfg.max_iter, ok))
}

/// Footpoint at the response with the smallest covariate, shooting toward the
/// response with the largest one.
pub fn initial_model(data: &Dataset) -> Result<GeodesicModel> {
    let space = data.space();
    let lo = argmin_by(data.x(), |x| x);
    let hi = argmin_by(data.x(), |x| -x);
    let p = data.y()[lo].clone();
    let v = space.log_map(&p, &data.y()[hi])?;
    let span = data.x()[hi] - data.x()[lo];
    let v = if span > 0.0 { v.scaled(1.0 / span) } else { Tangent::zero(p.clone()) };
    Ok(GeodesicModel { p, v })
}

fn argmin_by(xs: &[f64], key: impl Fn(f64) -> f64) -> usize {
    xs.iter()
        .enumerate()
        .min_by(|a, b| key(*a.1).total_cmp(&key(*b.1)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn finish_report(
    data: &Dataset,
    cfg: &FitConfig,
    model: GeodesicModel,
    iterations: usize,
    converged: bool,
) -> Result<FitReport> {
    let space = data.space();
    let eps = residuals(&model, data)?;
    let n = data.len() as f64;
    let energy = eps.iter().map(|e| space.norm(e).powi(2)).sum::<f64>() / (2.0 * n);
    let tau = eps.iter().map(|e| space.norm(e)).fold(0.0, f64::max);
    let mean = frechet_mean(&space, data.y())?;
    let mut tau_m = 0.0f64;
    for y in data.y() {
        tau_m = tau_m.max(space.dist(&mean, y)?);
    }
    let (gp, gv) = gradients_with(cfg.gradient, cfg.fd_step, &model, data)?;

    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "fit stopped after {iterations} iterations without reaching tolerance {}",
            cfg.tol
        ));
    }
    let (_, kappa_h) = space.curvature_bounds();
    if kappa_h > 0.0 {
        let radius = std::f64::consts::PI / (8.0 * kappa_h.sqrt());
        if tau_m > radius {
            warnings.push(format!(
                "data radius {tau_m:.4} exceeds the convexity radius pi/(8 sqrt(kappa_h)) = {radius:.4}"
            ));
        }
    }

    Ok(FitReport {
        gradient_norms: (space.norm(&gp), space.norm(&gv)),
        model,
        energy,
        iterations,
        converged,
        tau_empirical: tau,
        tau_m_empirical: tau_m,
        frechet_mean: mean,
        warnings,
    })
}

/// Fréchet mean by fixed-step Riemannian gradient descent on `(1/2n) Σ d(m, y_i)²`.
pub fn frechet_mean<M: Manifold + ?Sized>(space: &M, points: &[Point]) -> Result<Point> {
    let mut m = points
        .first()
        .cloned()
        .ok_or_else(|| Error::InvalidParameter("mean of an empty set".into()))?;
    let n = points.len() as f64;
    for _ in 0..500 {
        let mut step = Tangent::zero(m.clone());
        for y in points {
            step.accumulate(&space.log_map(&m, y)?, 1.0 / n);
        }
        if space.norm(&step) < 1e-14 {
            break;
        }
        m = space.exp_map(&m, &step)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn sphere(c: [f64; 3]) -> Point {
        Point::new(ManifoldId::Sphere, &c).unwrap()
    }

    #[test]
    fn covariate_scaling() {
        assert_eq!(scale_covariates(&[50.0, 70.0, 90.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(scale_covariates(&[0.0, 0.3, 1.0]).unwrap(), vec![0.0, 0.3, 1.0]);
        let ages = scale_covariates(&[50.0, 60.0, 80.0, 90.0]).unwrap();
        assert_eq!(ages[1], 0.25);
        assert_eq!(ages[2], 0.75);
        assert!(matches!(scale_covariates(&[2.0, 2.0]), Err(Error::DegenerateCovariates)));
    }

    #[test]
    fn toy_energy_and_mse() {
        let p = sphere([1.0, 0.0, 0.0]);
        let model = GeodesicModel { p: p.clone(), v: Tangent::zero(p.clone()) };
        let data = Dataset::new(
            ManifoldId::Sphere,
            vec![0.0, 1.0],
            vec![p.clone(), sphere([0.0, 1.0, 0.0])],
        )
        .unwrap();
        let expected = 0.25 * FRAC_PI_2 * FRAC_PI_2;
        assert!((energy(&model, &data).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.61685).abs() < 1e-5);
        assert!((mse(&model, &data).unwrap() - 1.2337).abs() < 1e-4);
    }

    #[test]
    fn single_record_energy() {
        let p = sphere([1.0, 0.0, 0.0]);
        let y = sphere([0.0, 0.6, 0.8]);
        let model = GeodesicModel { p: p.clone(), v: Tangent::zero(p.clone()) };
        let data = Dataset::new(ManifoldId::Sphere, vec![0.0], vec![y.clone()]).unwrap();
        let d = crate::manifolds::Sphere.dist(&p, &y).unwrap();
        assert!((energy(&model, &data).unwrap() - d * d / 2.0).abs() < 1e-15);
        let eps = residuals(&model, &data).unwrap();
        let direct = crate::manifolds::Sphere.log_map(&p, &y).unwrap();
        assert_eq!(eps[0], direct);
    }

    #[test]
    fn all_zero_covariates_give_zero_shooting_gradient() {
        let p = sphere([1.0, 0.0, 0.0]);
        let v = Tangent::new(p.clone(), &[0.0, 0.3, 0.1]).unwrap();
        let data = Dataset::new(
            ManifoldId::Sphere,
            vec![0.0, 0.0],
            vec![sphere([0.0, 1.0, 0.0]), sphere([0.0, 0.0, 1.0])],
        )
        .unwrap();
        let g = grad_v(&GeodesicModel { p, v }, &data).unwrap();
        assert!(g.components().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn two_points_interpolate() {
        let a = sphere([1.0, 0.0, 0.0]);
        let b = sphere([0.0, 0.6, 0.8]);
        let data = Dataset::new(ManifoldId::Sphere, vec![0.0, 1.0], vec![a.clone(), b.clone()]).unwrap();
        let report = fit(&data, &FitConfig::default()).unwrap();
        assert!(report.converged);
        assert!(report.energy < 1e-25);
        assert_eq!(report.model.p, a);
        let v = crate::manifolds::Sphere.log_map(&a, &b).unwrap();
        assert!(crate::linalg::max_abs_diff(report.model.v.components(), v.components()) < 1e-12);
    }

    #[test]
    fn dataset_rejects_foreign_points() {
        let spd = Point::new(ManifoldId::Spd, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let err = Dataset::new(ManifoldId::Sphere, vec![0.0], vec![spd]).unwrap_err();
        assert!(matches!(err, Error::ManifoldMismatch { .. }));
        assert!(Dataset::new(ManifoldId::Sphere, vec![0.0, 1.0], vec![sphere([1.0, 0.0, 0.0])]).is_err());
    }
}
