mod common;

use common::*;
use geodp::experiments::gen_sphere;
use geodp::manifolds::Sphere;
use geodp::mechanism::{compose_budget, noise_scales, NoiseScales, SensitivitySpec};
use geodp::regression::{fit, Dataset, FitConfig, FitReport};
use geodp::sampler::{chain_rng, propose, release_pair, sample_footpoint, sample_shooting, ChainConfig};
use geodp::{Manifold, ManifoldId, Point, Space, Tangent};

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) }
}

fn fitted(n: usize, seed: u64) -> (Dataset, FitReport) {
    let data = gen_sphere(n, 0.01, seed).unwrap().data;
    let report = fit(&data, &FitConfig::default()).unwrap();
    (data, report)
}

fn short_chain(seed: u64) -> ChainConfig {
    ChainConfig { chain_length: 1500, burn_in: 500, seed, ..ChainConfig::default() }
}

#[test]
fn uniform_ball_mean_radius() {
    let north = Point::new(ManifoldId::Sphere, &[0.0, 0.0, 1.0]).unwrap();
    let mut r = chain_rng(5);
    let eta = 0.1;
    let total: f64 = (0..100_000)
        .map(|_| Sphere.dist(&north, &propose(&Sphere, &north, eta, &mut r).unwrap()).unwrap())
        .sum();
    let mean = total / 100_000.0;
    let expected = eta * 2.0 / 3.0;
    assert!((mean / expected - 1.0).abs() < 0.01, "{mean} vs {expected}");
}

fn det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => unreachable!(),
    }
}

/// Volume factor of `Exp(x, ·)` at `v`, measured in orthonormal frames at both ends.
fn exp_jacobian(space: &Space, x: &Point, v: &Tangent) -> f64 {
    let y = space.exp_map(x, v).unwrap();
    let (bx, by) = (space.tangent_basis(x), space.tangent_basis(&y));
    let h = 1e-6;
    let cols: Vec<Vec<f64>> = bx
        .iter()
        .map(|e| {
            let plus = space.exp_map(x, &v.add_scaled(e, h).unwrap()).unwrap();
            let minus = space.exp_map(x, &v.add_scaled(e, -h).unwrap()).unwrap();
            let d = space.log_map(&y, &plus).unwrap().add_scaled(&space.log_map(&y, &minus).unwrap(), -1.0).unwrap();
            space.frame_coefficients(&d.scaled(0.5 / h), &by).unwrap()
        })
        .collect();
    det(&cols).abs()
}

#[test]
fn proposals_are_symmetric_within_the_cap() {
    let mut r = rng(12);
    for id in [ManifoldId::Sphere, ManifoldId::Spd] {
        let space = id.space();
        let eta = (0.1 * space.injectivity_guard()).min(0.5);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let x = random_point(id, &mut r);
            let v = random_tangent(&space, &x, eta, &mut r);
            let y = space.exp_map(&x, &v).unwrap();
            let back = space.log_map(&y, &x).unwrap();
            let (jx, jy) = (exp_jacobian(&space, &x, &v), exp_jacobian(&space, &y, &back));
            worst = worst.max((jx / jy - 1.0).abs());
        }
        assert!(worst <= 1e-2, "{id}: {worst}");
    }
}

#[test]
fn small_noise_concentrates_at_the_fit() {
    let (data, report) = fitted(30, 1);
    let space = data.space();
    let scales = NoiseScales { sigma_p: 1e-4, sigma_v: 1e-4, conservative_factor: 1 };
    let mut dp = Vec::new();
    let mut dv = Vec::new();
    for seed in 0..20 {
        let cfg = short_chain(seed);
        let (p, diag) = sample_footpoint(&data, &report, &scales, &cfg).unwrap();
        dp.push(space.dist(&p, &report.model.p).unwrap());
        assert_eq!(diag.eta, 1e-4);
        let (v, _) = sample_shooting(&report.model.p, &data, &report, &scales, &cfg).unwrap();
        dv.push(space.norm(&v.add_scaled(&report.model.v, -1.0).unwrap()));
    }
    assert!(median(dp) <= 3e-4);
    // the shooting density is exp(-|H δ|/σ) near the optimum with H ≈ mean(x²),
    // so its spread is measured in units of η/H
    let h = data.x().iter().map(|x| x * x).sum::<f64>() / data.len() as f64;
    assert!(median(dv) <= 3e-4 / h);
}

#[test]
fn footpoint_spread_grows_with_sigma() {
    let (data, report) = fitted(30, 2);
    let space = data.space();
    let mut previous = 0.0;
    for sigma in [1e-4, 1e-3, 1e-2] {
        let scales = NoiseScales { sigma_p: sigma, sigma_v: sigma, conservative_factor: 1 };
        let spread = median(
            (0..20)
                .map(|seed| {
                    let (p, _) = sample_footpoint(&data, &report, &scales, &short_chain(seed)).unwrap();
                    space.dist(&p, &report.model.p).unwrap()
                })
                .collect(),
        );
        assert!(spread > previous, "{sigma}: {spread} <= {previous}");
        previous = spread;
    }
}

#[test]
fn shooting_spread_shrinks_with_budget() {
    let (data, report) = fitted(20, 3);
    let space = data.space();
    let spec = SensitivitySpec::new(20, report.tau_empirical, report.tau_m_empirical, 1.0).unwrap();
    let mut previous = f64::INFINITY;
    for k in 1..=10 {
        let eps_v = 0.2 * k as f64;
        let scales = noise_scales(&spec, &compose_budget(1.0, eps_v).unwrap(), 1).unwrap();
        let spread = median(
            (0..50)
                .map(|seed| {
                    let cfg = ChainConfig { chain_length: 1000, burn_in: 250, seed, ..ChainConfig::default() };
                    let (v, _) = sample_shooting(&report.model.p, &data, &report, &scales, &cfg).unwrap();
                    space.norm(&v.add_scaled(&report.model.v, -1.0).unwrap())
                })
                .collect(),
        );
        assert!(spread <= previous, "eps_v {eps_v}: {spread} > {previous}");
        previous = spread;
    }
}

#[test]
fn releases_are_reproducible_and_tangent() {
    let (data, report) = fitted(50, 4);
    let spec = SensitivitySpec::new(50, report.tau_empirical, report.tau_m_empirical, 1.0).unwrap();
    let budget = compose_budget(0.3, 0.3).unwrap();
    let scales = noise_scales(&spec, &budget, 1).unwrap();
    let cfg = short_chain(99);
    let a = release_pair(&data, &report, &spec, &budget, &scales, &cfg).unwrap();
    let b = release_pair(&data, &report, &spec, &budget, &scales, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!((a.budget.total - 0.6).abs() < 1e-15);
    assert_eq!(a.v_tilde.base(), &a.p_tilde);
    let p = a.p_tilde.coords();
    let v = a.v_tilde.components();
    assert!((p[0] * v[0] + p[1] * v[1] + p[2] * v[2]).abs() < 1e-10);
    assert_ne!(a.footpoint_seed, a.shooting_seed);

    let c = release_pair(&data, &report, &spec, &budget, &scales, &cfg.with_seed(100)).unwrap();
    assert_ne!(a.p_tilde, c.p_tilde);

    for diag in [a.footpoint_chain, a.shooting_chain] {
        assert_eq!(diag.acceptance_rate, diag.accepted as f64 / diag.steps as f64);
        assert!(!diag.stuck);
    }
}

#[test]
fn single_kept_state_still_releases() {
    let (data, report) = fitted(20, 5);
    let spec = SensitivitySpec::new(20, report.tau_empirical, 0.0, 1.0).unwrap();
    let budget = compose_budget(1.0, 1.0).unwrap();
    let scales = noise_scales(&spec, &budget, 1).unwrap();
    let cfg = ChainConfig { chain_length: 11, burn_in: 10, seed: 1, ..ChainConfig::default() };
    let release = release_pair(&data, &report, &spec, &budget, &scales, &cfg).unwrap();
    assert_eq!(release.footpoint_chain.samples_kept, 1);
}

#[test]
fn acceptance_rates_on_every_manifold() {
    // flagged rather than failed outside (0.1, 0.9)
    let mut r = rng(77);
    for id in ALL {
        let (_, data) = random_instance(id, 40, 0.1, &mut r);
        let report = fit(&data, &FitConfig::default()).unwrap();
        let spec = SensitivitySpec::new(40, report.tau_empirical, report.tau_m_empirical, geodp::experiments::kappa_l(id))
            .unwrap();
        let budget = compose_budget(1.0, 1.0).unwrap();
        let scales = noise_scales(&spec, &budget, 1).unwrap();
        let release = release_pair(&data, &report, &spec, &budget, &scales, &short_chain(3)).unwrap();
        for (name, diag) in [("footpoint", release.footpoint_chain), ("shooting", release.shooting_chain)] {
            let flag = if (0.1..0.9).contains(&diag.acceptance_rate) { "" } else { "  [outside (0.1, 0.9)]" };
            println!("{id} {name}: acceptance {:.3}{flag}", diag.acceptance_rate);
            assert!(diag.accepted > 0);
        }
        assert!(space_contains(&data.space(), &release.p_tilde));
    }
}

fn space_contains(space: &Space, p: &Point) -> bool {
    space.check_point(p).is_ok()
}
