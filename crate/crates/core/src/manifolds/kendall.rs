//! Kendall shape space of planar landmark configurations, worked in preshape
//! coordinates.
//!
//! A configuration of `k` landmarks is a complex vector `z ∈ C^k`, stored as
//! interleaved `(re, im)` pairs. Preshapes are centered with unit norm.
//! Rotation acts by a unit complex phase, and every operation here is
//! invariant under it: log maps first phase-align their target, tangent
//! vectors are horizontal (orthogonal to `i·z`), and transport uses the
//! horizontal lift of the quotient's Levi-Civita connection.
//!
//! Shape space is locally symmetric. Along a unit horizontal direction `u` the
//! Jacobi operator has eigenvalue 4 on `i·u` and 1 on the remaining horizontal
//! directions, which gives closed-form exponential-map differentials.

use std::f64::consts::FRAC_PI_2;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::curvature::jacobi_factor;
use super::sphere;
use crate::error::{Error, Result};
use crate::geometry::{Coords, Manifold, ManifoldId, Point, Tangent, Variation, MEMBERSHIP_TOL};
use crate::linalg::{self, axpy, dot, norm};

pub const CUT_LOCUS_GUARD: f64 = FRAC_PI_2 - 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kendall {
    landmarks: usize,
}

impl Kendall {
    pub fn new(landmarks: usize) -> Self {
        assert!(landmarks >= 3, "Kendall shape space needs at least 3 landmarks");
        Self { landmarks }
    }

    pub fn landmarks(&self) -> usize {
        self.landmarks
    }

    /// Removes translation and scale from a raw configuration.
    pub fn preshape(&self, raw: &[f64]) -> Result<Coords> {
        if raw.len() != 2 * self.landmarks {
            return Err(Error::ShapeMismatch { expected: 2 * self.landmarks, got: raw.len() });
        }
        let mut z: Coords = raw.iter().copied().collect();
        center(&mut z);
        let n = norm(&z);
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::DegenerateInput("all landmarks coincide".into()));
        }
        z.iter_mut().for_each(|x| *x /= n);
        Ok(z)
    }

    /// Orthonormal directions that tangent vectors at `z` must avoid:
    /// the two translations, `z` itself and the vertical direction `i·z`.
    fn constraints(&self, z: &[f64]) -> [Coords; 4] {
        let k = self.landmarks as f64;
        let s = 1.0 / k.sqrt();
        let re: Coords = (0..2 * self.landmarks).map(|j| if j % 2 == 0 { s } else { 0.0 }).collect();
        let im: Coords = (0..2 * self.landmarks).map(|j| if j % 2 == 1 { s } else { 0.0 }).collect();
        [re, im, z.iter().copied().collect(), times_i(z)]
    }

    fn horizontal_projection(&self, z: &[f64], raw: &[f64]) -> Coords {
        let mut out: Coords = raw.iter().copied().collect();
        center(&mut out);
        let a = dot(z, &out);
        axpy(-a, z, &mut out);
        let iz = times_i(z);
        let b = dot(&iz, &out);
        axpy(-b, &iz, &mut out);
        out
    }

    /// `w` rotated so that `<z, w>` is real and nonnegative, plus the unit phase used.
    fn align(&self, z: &[f64], w: &[f64]) -> (Coords, (f64, f64)) {
        let (re, im) = herm(z, w);
        let r = re.hypot(im);
        let phase = if r > 0.0 { (re / r, -im / r) } else { (1.0, 0.0) };
        (rotate(w, phase), phase)
    }

    fn check_len(&self, raw: &[f64]) -> Result<()> {
        if raw.len() != 2 * self.landmarks {
            return Err(Error::ShapeMismatch { expected: 2 * self.landmarks, got: raw.len() });
        }
        Ok(())
    }
}

fn center(z: &mut [f64]) {
    let k = (z.len() / 2) as f64;
    let (mut mr, mut mi) = (0.0, 0.0);
    for pair in z.chunks_exact(2) {
        mr += pair[0];
        mi += pair[1];
    }
    let (mr, mi) = (mr / k, mi / k);
    for pair in z.chunks_exact_mut(2) {
        pair[0] -= mr;
        pair[1] -= mi;
    }
}

pub(crate) fn times_i(z: &[f64]) -> Coords {
    let mut out: Coords = smallvec::smallvec![0.0; z.len()];
    for (o, pair) in out.chunks_exact_mut(2).zip(z.chunks_exact(2)) {
        o[0] = -pair[1];
        o[1] = pair[0];
    }
    out
}

/// Hermitian product `Σ conj(z_j) w_j` as `(re, im)`.
pub(crate) fn herm(z: &[f64], w: &[f64]) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in z.chunks_exact(2).zip(w.chunks_exact(2)) {
        re += a[0] * b[0] + a[1] * b[1];
        im += a[0] * b[1] - a[1] * b[0];
    }
    (re, im)
}

/// Multiplies every landmark by the unit complex number `phase = (cos, sin)`.
pub(crate) fn rotate(w: &[f64], phase: (f64, f64)) -> Coords {
    let (c, s) = phase;
    let mut out: Coords = smallvec::smallvec![0.0; w.len()];
    for (o, pair) in out.chunks_exact_mut(2).zip(w.chunks_exact(2)) {
        o[0] = c * pair[0] - s * pair[1];
        o[1] = s * pair[0] + c * pair[1];
    }
    out
}

impl Manifold for Kendall {
    fn id(&self) -> ManifoldId {
        ManifoldId::Kendall { landmarks: self.landmarks }
    }

    fn dim(&self) -> usize {
        2 * self.landmarks - 4
    }

    fn coord_len(&self) -> usize {
        2 * self.landmarks
    }

    fn curvature_bounds(&self) -> (f64, f64) {
        (1.0, 4.0)
    }

    fn injectivity_guard(&self) -> f64 {
        CUT_LOCUS_GUARD
    }

    fn membership_error(&self, coords: &[f64]) -> Option<String> {
        let n = norm(coords);
        if (n - 1.0).abs() > MEMBERSHIP_TOL || !n.is_finite() {
            return Some(format!("preshape has norm {n}"));
        }
        let (mut mr, mut mi) = (0.0, 0.0);
        for pair in coords.chunks_exact(2) {
            mr += pair[0];
            mi += pair[1];
        }
        (mr.hypot(mi) > MEMBERSHIP_TOL * self.landmarks as f64)
            .then(|| format!("preshape centroid is ({mr}, {mi})"))
    }

    fn tangency_error(&self, base: &[f64], components: &[f64]) -> Option<String> {
        let scale = norm(components).max(1.0) * MEMBERSHIP_TOL;
        let (re, im) = herm(base, components);
        if re.abs() > scale {
            return Some(format!("<z, v> = {re}"));
        }
        if im.abs() > scale {
            return Some(format!("vertical component <iz, v> = {im}"));
        }
        let (mut mr, mut mi) = (0.0, 0.0);
        for pair in components.chunks_exact(2) {
            mr += pair[0];
            mi += pair[1];
        }
        (mr.hypot(mi) > scale * self.landmarks as f64)
            .then(|| format!("tangent vector is not centered ({mr}, {mi})"))
    }

    fn exp_map(&self, p: &Point, v: &Tangent) -> Result<Point> {
        self.check_base(v, p)?;
        let n = norm(v.components());
        if n >= CUT_LOCUS_GUARD {
            return Err(Error::Domain { norm: n, guard: CUT_LOCUS_GUARD });
        }
        Ok(Point::from_coords(self.id(), sphere::exp_coords(p.coords(), v.components())))
    }

    fn log_map(&self, p: &Point, q: &Point) -> Result<Tangent> {
        self.check_point(p)?;
        self.check_point(q)?;
        let (aligned, _) = self.align(p.coords(), q.coords());
        let (w, theta) = sphere::log_coords(p.coords(), &aligned);
        if theta >= CUT_LOCUS_GUARD {
            return Err(Error::CutLocus(format!("shapes at distance {theta}")));
        }
        Ok(Tangent::from_parts(p.clone(), self.horizontal_projection(p.coords(), &w)))
    }

    fn dist(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        let (aligned, _) = self.align(p.coords(), q.coords());
        Ok(sphere::dist_coords(p.coords(), &aligned))
    }

    fn parallel_transport(&self, v: &Tangent, q: &Point) -> Result<Tangent> {
        let p = v.base();
        self.check_point(q)?;
        let (aligned, phase) = self.align(p.coords(), q.coords());
        let (u, theta) = sphere::log_coords(p.coords(), &aligned);
        if theta >= CUT_LOCUS_GUARD {
            return Err(Error::CutLocus(format!("shapes at distance {theta}")));
        }
        let w = v.components();
        let moved: Coords = if theta == 0.0 {
            w.iter().copied().collect()
        } else {
            let dir: Coords = u.iter().map(|x| x / theta).collect();
            let idir = times_i(&dir);
            let a = dot(&dir, w);
            let b = dot(&idir, w);
            let mut out: Coords = w.iter().copied().collect();
            axpy(-a, &dir, &mut out);
            axpy(-b, &idir, &mut out);
            // velocity direction at the endpoint and its complex rotation
            let (c, s) = (theta.cos(), theta.sin());
            let mut end_dir: Coords = dir.iter().map(|x| c * x).collect();
            axpy(-s, p.coords(), &mut end_dir);
            let i_end_dir = times_i(&end_dir);
            axpy(a, &end_dir, &mut out);
            axpy(b, &i_end_dir, &mut out);
            out
        };
        // moved is horizontal at the aligned representative; undo the phase
        let back = rotate(&moved, (phase.0, -phase.1));
        Ok(Tangent::from_parts(
            q.clone(),
            self.horizontal_projection(q.coords(), &back),
        ))
    }

    fn inner(&self, u: &Tangent, w: &Tangent) -> Result<f64> {
        if !u.base().same_as(w.base()) {
            return Err(Error::BaseMismatch);
        }
        Ok(dot(u.components(), w.components()))
    }

    fn norm(&self, u: &Tangent) -> f64 {
        norm(u.components())
    }

    fn project_to_manifold(&self, raw: &[f64]) -> Result<Point> {
        Ok(Point::from_coords(self.id(), self.preshape(raw)?))
    }

    fn project_to_tangent(&self, p: &Point, raw: &[f64]) -> Result<Tangent> {
        self.check_point(p)?;
        self.check_len(raw)?;
        Ok(Tangent::from_parts(
            p.clone(),
            self.horizontal_projection(p.coords(), raw),
        ))
    }

    fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        let constraints = self.constraints(p.coords());
        linalg::complete_basis(&constraints, self.coord_len(), self.dim())
            .into_iter()
            .map(|e| Tangent::from_parts(p.clone(), e))
            .collect()
    }

    fn jacobi_adjoint(
        &self,
        velocity: &Tangent,
        w: &Tangent,
        variation: Variation,
    ) -> Result<Tangent> {
        if !velocity.base().same_as(w.base()) {
            return Err(Error::BaseMismatch);
        }
        let rho = norm(velocity.components());
        if rho == 0.0 {
            return Ok(w.clone());
        }
        let dir: Coords = velocity.components().iter().map(|x| x / rho).collect();
        let idir = times_i(&dir);
        let a = dot(&dir, w.components());
        let b = dot(&idir, w.components());
        let generic = jacobi_factor(1.0, rho, variation);
        let holomorphic = jacobi_factor(4.0, rho, variation);

        let mut out: Coords = w.components().iter().map(|x| generic * x).collect();
        axpy((1.0 - generic) * a, &dir, &mut out);
        axpy((holomorphic - generic) * b, &idir, &mut out);
        Ok(Tangent::from_parts(w.base().clone(), out))
    }

    fn sample_ball(&self, p: &Point, radius: f64, rng: &mut dyn RngCore) -> Tangent {
        // the metric is the ambient one, so a projected Gaussian is isotropic
        let raw: Coords = (0..self.coord_len())
            .map(|_| StandardNormal.sample(&mut *rng))
            .collect();
        let dir = self.horizontal_projection(p.coords(), &raw);
        let n = norm(&dir);
        let u: f64 = rand::Rng::random(&mut *rng);
        let r = radius * u.powf(1.0 / self.dim() as f64);
        let scale = if n > 0.0 { r / n } else { 0.0 };
        Tangent::from_parts(p.clone(), dir.iter().map(|x| x * scale).collect())
    }
}
