use geodp::experiments::{
    gen_kendall, gen_spd, gen_sphere, make_adjacent_pairs, run_grid, summarize, validate_sensitivity, Generator,
    GridSpec,
};
use geodp::manifolds::Sym2;
use geodp::mechanism::TauPolicy;
use geodp::regression::{energy, fit, FitConfig};
use geodp::sampler::ChainConfig;
use geodp::ManifoldId;

#[test]
fn generators_are_deterministic_and_valid() {
    let a = gen_sphere(30, 0.01, 7).unwrap();
    let b = gen_sphere(30, 0.01, 7).unwrap();
    assert_eq!(a.data.y(), b.data.y());
    assert_ne!(gen_sphere(30, 0.01, 8).unwrap().data.y(), a.data.y());

    for y in gen_spd(40, 0.01, 1).unwrap().data.y() {
        let c = y.coords();
        assert!((c[1] - c[2]).abs() <= 1e-12);
        assert!(Sym2::from_coords(c).min_eigenvalue() > 0.0);
    }
    let k = gen_kendall(20, 50, 0.01, 2).unwrap();
    assert_eq!(k.data.manifold(), ManifoldId::Kendall { landmarks: 50 });
    for y in k.data.y() {
        let c = y.coords();
        let (sx, sy) = c.chunks(2).fold((0.0, 0.0), |(a, b), z| (a + z[0], b + z[1]));
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(sx.abs() < 1e-12 && sy.abs() < 1e-12 && (norm - 1.0).abs() < 1e-12);
    }
    assert!(gen_kendall(10, 3, 0.01, 1).is_err());
}

#[test]
fn noiseless_generators_lie_on_their_geodesic() {
    for gen in [Generator::Sphere { delta: 0.0 }, Generator::Spd { sigma: 0.0 }, Generator::Kendall { landmarks: 5, delta: 0.0 }] {
        let syn = gen.generate(25, 3).unwrap();
        assert!(energy(&syn.generator, &syn.data).unwrap() < 1e-24, "{}", gen.manifold());
        let raw = gen.raw(25, 3).unwrap();
        assert_eq!(raw.y.len(), 25);
    }
}

#[test]
fn adjacent_pairs_share_all_but_one_record() {
    let pairs = make_adjacent_pairs(10, &Generator::Sphere { delta: 0.001 }, 4, 1).unwrap();
    assert_eq!(pairs.len(), 4);
    for pair in &pairs {
        assert_eq!((pair.d.len(), pair.d_prime.len(), pair.union.len()), (10, 10, 11));
        assert_eq!(&pair.d.x()[..9], &pair.d_prime.x()[..9]);
        assert_eq!(&pair.d.y()[..9], &pair.d_prime.y()[..9]);
        assert_ne!(pair.d.y()[9], pair.d_prime.y()[9]);
        assert_eq!(pair.d_prime.y()[9], pair.union.y()[0]);
        assert_eq!(pair.d.y()[9], pair.union.y()[10]);
    }
    assert_ne!(pairs[0].union.y(), pairs[1].union.y());
    assert!(make_adjacent_pairs(10, &Generator::Sphere { delta: 0.001 }, 0, 1).is_err());
}

#[test]
fn theoretical_sensitivities_dominate() {
    for gen in [Generator::Sphere { delta: 0.001 }, Generator::Spd { sigma: 0.01 }, Generator::Kendall { landmarks: 6, delta: 0.01 }] {
        let pairs = make_adjacent_pairs(20, &gen, 5, 11).unwrap();
        let rows = validate_sensitivity(&pairs, &FitConfig::default()).unwrap();
        for row in &rows {
            assert!(row.r_p >= 1.0 && row.r_v >= 1.0, "{row:?}");
        }
        let s = summarize(rows.iter().map(|r| r.r_p)).unwrap();
        assert!(s.min <= s.median && s.median <= s.max);
    }
}

#[test]
fn identical_datasets_give_infinite_ratio() {
    let mut pair = make_adjacent_pairs(10, &Generator::Sphere { delta: 0.01 }, 1, 2).unwrap().remove(0);
    pair.d_prime = pair.d.clone();
    let row = &validate_sensitivity(&[pair], &FitConfig::default()).unwrap()[0];
    assert_eq!((row.delta_exp_p, row.delta_exp_v), (0.0, 0.0));
    assert!(row.r_p.is_infinite() && row.r_v.is_infinite());
}

#[test]
fn summary_quantiles() {
    let s = summarize([3.0, 1.0, 2.0, 10.0]).unwrap();
    assert_eq!((s.min, s.median, s.max), (1.0, 2.5, 10.0));
    assert!(summarize(std::iter::empty()).is_none());
}

#[test]
fn small_grid() {
    let data = gen_sphere(20, 0.001, 4).unwrap().data;
    let report = fit(&data, &FitConfig::default()).unwrap();
    let grid = GridSpec::equal(0.2, 2.0, 3, 3);
    let chain = ChainConfig { chain_length: 400, burn_in: 100, seed: 5, ..ChainConfig::default() };
    let result = run_grid(&data, &report, &grid, &chain, TauPolicy::Empirical, 1).unwrap();
    assert_eq!(result.cells.len(), 3);
    assert_eq!(result.baseline, (2.0 * report.energy).ln());
    for (cell, total) in result.cells.iter().zip([0.2, 1.1, 2.0]) {
        assert_eq!(cell.pairs_used + cell.excluded, 9);
        assert_eq!(cell.ln_mse, cell.mean_mse.ln());
        assert!(cell.ln_mse >= result.baseline);
        assert!((cell.eps_p + cell.eps_v - total).abs() < 1e-12);
    }
    let again = run_grid(&data, &report, &grid, &chain, TauPolicy::Empirical, 1).unwrap();
    assert_eq!(result, again);
    let public = run_grid(&data, &report, &grid, &chain, TauPolicy::Public { tau: 0.05, tau_m: 0.0 }, 1).unwrap();
    assert_eq!(public.tau, 0.05);
    assert!((public.cells[0].sigma_p - 2.0 * 0.05 / 20.0 / 0.1).abs() < 1e-12);
    assert!(run_grid(&data, &report, &GridSpec::equal(0.2, 2.0, 3, 0), &chain, TauPolicy::Empirical, 1).is_err());
}
