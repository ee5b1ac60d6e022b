#![allow(dead_code)]

use geodp::regression::{Dataset, GeodesicModel};
use geodp::{Manifold, ManifoldId, Point, Space, Tangent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const KENDALL: ManifoldId = ManifoldId::Kendall { landmarks: 6 };
pub const ALL: [ManifoldId; 3] = [ManifoldId::Sphere, ManifoldId::Spd, KENDALL];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn random_point(id: ManifoldId, rng: &mut ChaCha8Rng) -> Point {
    let space = id.space();
    match id {
        ManifoldId::Spd => {
            let s = gaussian(rng, 3);
            let sym = geodp::manifolds::Sym2::new(s[0], s[1] / 2.0, s[2]);
            geodp::manifolds::Spd.point(sym.map(f64::exp)).unwrap()
        }
        _ => space.project_to_manifold(&gaussian(rng, space.coord_len())).unwrap(),
    }
}

/// Tangent vector at `p` with a Gaussian direction and the given length.
pub fn random_tangent(space: &Space, p: &Point, length: f64, rng: &mut ChaCha8Rng) -> Tangent {
    let basis = space.tangent_basis(p);
    let coeffs = gaussian(rng, basis.len());
    let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut v = Tangent::zero(p.clone());
    for (c, e) in coeffs.iter().zip(&basis) {
        v = v.add_scaled(e, c * length / norm).unwrap();
    }
    v
}

/// A random geodesic model and `n` noisy responses around it.
pub fn random_instance(id: ManifoldId, n: usize, noise: f64, rng: &mut ChaCha8Rng) -> (GeodesicModel, Dataset) {
    let space = id.space();
    let p = random_point(id, rng);
    let len = rng.random_range(0.2..1.0);
    let v = random_tangent(&space, &p, len, rng);
    let model = GeodesicModel::new(p, v).unwrap();
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    x[0] = 0.0;
    x[n - 1] = 1.0;
    let y = x
        .iter()
        .map(|&t| {
            let c = model.predict(t).unwrap();
            let scale = noise * rng.random::<f64>();
            let e = random_tangent(&space, &c, scale, rng);
            space.exp_map(&c, &e).unwrap()
        })
        .collect();
    (model, Dataset::new(id, x, y).unwrap())
}

pub fn rel_err(a: &Tangent, b: &Tangent) -> f64 {
    let diff: f64 = a
        .components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = b.components().iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(1e-8)
}

/// Largest tangent length exercised by the geometry suite.
pub fn max_radius(space: &Space) -> f64 {
    (0.8 * space.injectivity_guard()).min(3.0)
}

/// Worst observed errors of the geometry suite on one manifold.
#[derive(Debug, Default)]
pub struct GeometryStats {
    pub roundtrip: f64,
    pub speed: f64,
    pub isometry: f64,
    pub membership: f64,
    pub tangency: f64,
}

impl GeometryStats {
    pub fn worst(&self) -> f64 {
        self.roundtrip.max(self.speed).max(self.isometry).max(self.membership).max(self.tangency)
    }
}

fn membership_defect(space: &Space, p: &Point) -> f64 {
    let c = p.coords();
    match space.id() {
        ManifoldId::Spd => (c[1] - c[2]).abs().max(if c[0] * c[3] - c[1] * c[2] > 0.0 && c[0] > 0.0 { 0.0 } else { 1.0 }),
        ManifoldId::Sphere => (c.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs(),
        ManifoldId::Kendall { .. } => {
            let (sx, sy) = c.chunks(2).fold((0.0, 0.0), |(a, b), z| (a + z[0], b + z[1]));
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            sx.abs().max(sy.abs()).max((n - 1.0).abs())
        }
    }
}

fn tangency_defect(space: &Space, v: &Tangent) -> f64 {
    match space.tangency_error(v.base().coords(), v.components()) {
        Some(_) => 1.0,
        None => 0.0,
    }
}

/// Roundtrip, geodesic speed, transport isometry and membership on `cases`
/// random instances.
pub fn geometry_suite(id: ManifoldId, cases: usize, seed: u64) -> GeometryStats {
    let space = id.space();
    let mut r = rng(seed);
    let mut s = GeometryStats::default();
    for _ in 0..cases {
        let p = random_point(id, &mut r);
        let len = max_radius(&space) * r.random::<f64>();
        let v = random_tangent(&space, &p, len, &mut r);
        let q = space.exp_map(&p, &v).unwrap();
        s.membership = s.membership.max(membership_defect(&space, &q));

        let back = space.log_map(&p, &q).unwrap();
        let err = back.add_scaled(&v, -1.0).unwrap();
        s.roundtrip = s.roundtrip.max(space.norm(&err) / len.max(1.0));
        s.tangency = s.tangency.max(tangency_defect(&space, &back));

        for k in 1..=10 {
            let t = k as f64 / 10.0;
            let pt = space.exp_map(&p, &v.scaled(t)).unwrap();
            let d = space.dist(&p, &pt).unwrap();
            s.speed = s.speed.max((d - t * len).abs());
        }

        let u = random_tangent(&space, &p, r.random_range(0.1..2.0), &mut r);
        let w = random_tangent(&space, &p, r.random_range(0.1..2.0), &mut r);
        let (tu, tw) = (space.parallel_transport(&u, &q).unwrap(), space.parallel_transport(&w, &q).unwrap());
        let before = space.inner(&u, &w).unwrap();
        let after = space.inner(&tu, &tw).unwrap();
        s.isometry = s.isometry.max((before - after).abs()).max((space.norm(&tu) - space.norm(&u)).abs());
        s.tangency = s.tangency.max(tangency_defect(&space, &tu));
    }
    s
}

/// Worst relative error of the Jacobi gradients against central finite
/// differences over `instances` random models with `n` records each.
pub fn gradient_oracle(id: ManifoldId, instances: usize, n: usize, seed: u64) -> (f64, f64) {
    use geodp::regression::{finite_difference_gradients, gradients};
    let mut r = rng(seed);
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let (model, data) = random_instance(id, n, 0.3, &mut r);
        // evaluate away from the generating parameters so residuals are not tiny
        let space = data.space();
        let shift = random_tangent(&space, &model.p, 0.1, &mut r);
        let p = space.exp_map(&model.p, &shift).unwrap();
        let v = space.parallel_transport(&model.v, &p).unwrap();
        let model = GeodesicModel::new(p, v).unwrap();
        let (gp, gv) = gradients(&model, &data).unwrap();
        let (fp, fv) = finite_difference_gradients(&model, &data, 1e-5).unwrap();
        worst = (worst.0.max(rel_err(&gp, &fp)), worst.1.max(rel_err(&gv, &fv)));
    }
    worst
}
