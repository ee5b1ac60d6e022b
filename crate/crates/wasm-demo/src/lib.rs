//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string. The plain Rust functions behind them
//! are public so they can be exercised natively.

use geodp::experiments::{kappa_l, Generator};
use geodp::manifolds::ellipse_outline;
use geodp::mechanism::{compose_budget, noise_scales, sensitivity_p, sensitivity_v, SensitivitySpec, TauPolicy};
use geodp::regression::{fit, Dataset, FitConfig, FitReport, GeodesicModel};
use geodp::sampler::{derive_seed, release_pair, ChainConfig, PrivateRelease};
use geodp::{Point, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Shorter chains than the library default keep the page responsive.
const DEMO_CHAIN: ChainConfig =
    ChainConfig { chain_length: 2000, burn_in: 500, proposal_radius: None, eta_factor: 1.0, seed: 0 };

const CURVE_POINTS: usize = 41;

#[derive(Serialize)]
struct Release {
    footpoint: Vec<f64>,
    curve: Vec<Vec<f64>>,
    mse: f64,
    acceptance: (f64, f64),
}

#[derive(Serialize)]
struct SphereView {
    x: Vec<f64>,
    y: Vec<Vec<f64>>,
    fit: Vec<Vec<f64>>,
    baseline_mse: f64,
    tau: f64,
    tau_m: f64,
    sigma_p: f64,
    sigma_v: f64,
    releases: Vec<Release>,
    warnings: Vec<String>,
}

fn curve(model: &GeodesicModel, points: usize) -> Result<Vec<Point>> {
    (0..points).map(|i| model.predict(i as f64 / (points - 1) as f64)).collect()
}

fn coords(points: &[Point]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.coords().to_vec()).collect()
}

struct Releases {
    report: FitReport,
    spec: SensitivitySpec,
    releases: Vec<PrivateRelease>,
    warnings: Vec<String>,
}

fn private_releases(data: &Dataset, eps_p: f64, eps_v: f64, count: usize, seed: u64) -> Result<Releases> {
    let report = fit(data, &FitConfig::default())?;
    let (tau, tau_m, warn) = TauPolicy::Empirical.resolve(report.tau_empirical, report.tau_m_empirical);
    let spec = SensitivitySpec::new(data.len(), tau, tau_m, kappa_l(data.manifold()))?;
    let budget = compose_budget(eps_p, eps_v)?;
    let scales = noise_scales(&spec, &budget, 1)?;
    let releases = (0..count)
        .map(|k| release_pair(data, &report, &spec, &budget, &scales, &DEMO_CHAIN.with_seed(derive_seed(seed, &[k as u64]))))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = report.warnings.clone();
    if warn {
        warnings.push(geodp::mechanism::EMPIRICAL_TAU_WARNING.to_string());
    }
    Ok(Releases { report, spec, releases, warnings })
}

/// Noisy sphere data, its least-squares geodesic and `count` private geodesics.
pub fn sphere_view(n: usize, delta: f64, eps_p: f64, eps_v: f64, count: usize, seed: u64) -> Result<String> {
    let data = Generator::Sphere { delta }.generate(n, seed)?.data;
    let out = private_releases(&data, eps_p, eps_v, count, seed)?;
    let scales = out.releases.first().map(|r| r.scales);
    let releases = out
        .releases
        .iter()
        .map(|r| {
            let model = GeodesicModel::new(r.p_tilde.clone(), r.v_tilde.clone())?;
            Ok(Release {
                footpoint: r.p_tilde.coords().to_vec(),
                curve: coords(&curve(&model, CURVE_POINTS)?),
                mse: geodp::regression::mse(&model, &data)?,
                acceptance: (r.footpoint_chain.acceptance_rate, r.shooting_chain.acceptance_rate),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let view = SphereView {
        x: data.x().to_vec(),
        y: coords(data.y()),
        fit: coords(&curve(&out.report.model, CURVE_POINTS)?),
        baseline_mse: 2.0 * out.report.energy,
        tau: out.spec.tau,
        tau_m: out.spec.tau_m,
        sigma_p: scales.map_or(0.0, |s| s.sigma_p),
        sigma_v: scales.map_or(0.0, |s| s.sigma_v),
        releases,
        warnings: out.warnings,
    };
    Ok(serde_json::to_string(&view)?)
}

#[derive(Serialize)]
struct SensitivityCurve {
    label: String,
    kappa_l: f64,
    delta_p: Vec<f64>,
    delta_v: Vec<f64>,
}

#[derive(Serialize)]
struct SensitivityView {
    tau: Vec<f64>,
    curves: Vec<SensitivityCurve>,
}

/// Footpoint and shooting-vector sensitivities as functions of `τ` for the
/// curvature bounds of the three manifolds.
pub fn sensitivity_view(n: usize, tau_m: f64, tau_max: f64, steps: usize) -> Result<String> {
    let steps = steps.max(2);
    let tau: Vec<f64> = (0..steps).map(|i| tau_max * i as f64 / (steps - 1) as f64).collect();
    let curves = [("sphere, Kendall (κ = 1)", 1.0), ("flat (κ = 0)", 0.0), ("SPD(2) (κ = −1/2)", -0.5)]
        .into_iter()
        .map(|(label, k)| {
            let specs = tau.iter().map(|&t| SensitivitySpec::new(n, t, tau_m, k)).collect::<Result<Vec<_>>>()?;
            Ok(SensitivityCurve {
                label: label.to_string(),
                kappa_l: k,
                delta_p: specs.iter().map(sensitivity_p).collect(),
                delta_v: specs.iter().map(sensitivity_v).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(serde_json::to_string(&SensitivityView { tau, curves })?)
}

#[derive(Serialize)]
struct Ellipse {
    x: f64,
    outline: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct SpdView {
    data: Vec<Ellipse>,
    fit: Vec<Ellipse>,
    private: Vec<Ellipse>,
    baseline_mse: f64,
    private_mse: f64,
    warnings: Vec<String>,
}

const ELLIPSE_SEGMENTS: usize = 48;
const MODEL_SAMPLES: usize = 6;

fn model_ellipses(model: &GeodesicModel) -> Result<Vec<Ellipse>> {
    (0..MODEL_SAMPLES)
        .map(|i| {
            let x = i as f64 / (MODEL_SAMPLES - 1) as f64;
            Ok(Ellipse { x, outline: ellipse_outline(&model.predict(x)?, ELLIPSE_SEGMENTS) })
        })
        .collect()
}

/// SPD(2) data as covariance ellipses with the fitted and one private geodesic.
pub fn spd_view(n: usize, sigma: f64, eps: f64, seed: u64) -> Result<String> {
    let data = Generator::Spd { sigma }.generate(n, seed)?.data;
    let out = private_releases(&data, eps / 2.0, eps / 2.0, 1, seed)?;
    let release = &out.releases[0];
    let private = GeodesicModel::new(release.p_tilde.clone(), release.v_tilde.clone())?;
    let view = SpdView {
        data: data.records().map(|(x, y)| Ellipse { x, outline: ellipse_outline(y, ELLIPSE_SEGMENTS) }).collect(),
        fit: model_ellipses(&out.report.model)?,
        private: model_ellipses(&private)?,
        baseline_mse: 2.0 * out.report.energy,
        private_mse: geodp::regression::mse(&private, &data)?,
        warnings: out.warnings,
    };
    Ok(serde_json::to_string(&view)?)
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = sphereView)]
pub fn sphere_view_js(n: usize, delta: f64, eps_p: f64, eps_v: f64, count: usize, seed: u32) -> std::result::Result<String, JsError> {
    js(sphere_view(n, delta, eps_p, eps_v, count, u64::from(seed)))
}

#[wasm_bindgen(js_name = sensitivityView)]
pub fn sensitivity_view_js(n: usize, tau_m: f64, tau_max: f64, steps: usize) -> std::result::Result<String, JsError> {
    js(sensitivity_view(n, tau_m, tau_max, steps))
}

#[wasm_bindgen(js_name = spdView)]
pub fn spd_view_js(n: usize, sigma: f64, eps: f64, seed: u32) -> std::result::Result<String, JsError> {
    js(spd_view(n, sigma, eps, u64::from(seed)))
}
