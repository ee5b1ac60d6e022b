//! The unit sphere S² ⊂ R³ with the round metric.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::curvature::jacobi_factor;
use crate::error::{Error, Result};
use crate::geometry::{Coords, Manifold, ManifoldId, Point, Tangent, Variation, MEMBERSHIP_TOL};
use crate::linalg::{self, axpy, dot, norm, sinc};

/// Distance at which a point counts as antipodal.
pub const CUT_LOCUS_GUARD: f64 = PI - 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sphere;

impl Sphere {
    pub const AMBIENT: usize = 3;
}

// Great-circle formulas on a unit sphere of any ambient dimension. The Kendall
// preshape sphere reuses them.

/// `cos|v| p + sin|v| v/|v|`, renormalized.
pub(crate) fn exp_coords(p: &[f64], v: &[f64]) -> Coords {
    let theta = norm(v);
    let (c, s) = (theta.cos(), sinc(theta));
    let mut out: Coords = p.iter().map(|x| c * x).collect();
    axpy(s, v, &mut out);
    let n = norm(&out);
    out.iter_mut().for_each(|x| *x /= n);
    out
}

/// Returns the log vector and the geodesic distance.
pub(crate) fn log_coords(p: &[f64], q: &[f64]) -> (Coords, f64) {
    let c = dot(p, q);
    let mut w: Coords = q.iter().copied().collect();
    axpy(-c, p, &mut w);
    // keep w tangent at p to machine precision
    let drift = dot(p, &w);
    axpy(-drift, p, &mut w);
    let s = norm(&w);
    let theta = s.atan2(c);
    let factor = if s < 1e-300 { 1.0 } else { theta / s };
    w.iter_mut().for_each(|x| *x *= factor);
    (w, theta)
}

pub(crate) fn dist_coords(p: &[f64], q: &[f64]) -> f64 {
    let c = dot(p, q);
    let mut w: Coords = q.iter().copied().collect();
    axpy(-c, p, &mut w);
    norm(&w).atan2(c)
}

/// Transport of `w ∈ T_p` along the geodesic with initial velocity `u` (unit
/// direction `dir`, length `theta`).
pub(crate) fn transport_coords(p: &[f64], dir: &[f64], theta: f64, w: &[f64]) -> Coords {
    let a = dot(dir, w);
    let mut out: Coords = w.iter().copied().collect();
    axpy(-a * theta.sin(), p, &mut out);
    axpy(-a * (1.0 - theta.cos()), dir, &mut out);
    out
}

pub(crate) fn project_tangent_coords(p: &[f64], raw: &[f64]) -> Coords {
    let mut out: Coords = raw.iter().copied().collect();
    let d = dot(p, raw);
    axpy(-d, p, &mut out);
    out
}

impl Manifold for Sphere {
    fn id(&self) -> ManifoldId {
        ManifoldId::Sphere
    }

    fn dim(&self) -> usize {
        Self::AMBIENT - 1
    }

    fn coord_len(&self) -> usize {
        Self::AMBIENT
    }

    fn curvature_bounds(&self) -> (f64, f64) {
        (1.0, 1.0)
    }

    fn injectivity_guard(&self) -> f64 {
        CUT_LOCUS_GUARD
    }

    fn membership_error(&self, coords: &[f64]) -> Option<String> {
        let n = norm(coords);
        ((n - 1.0).abs() > MEMBERSHIP_TOL || !n.is_finite())
            .then(|| format!("sphere point has norm {n}"))
    }

    fn tangency_error(&self, base: &[f64], components: &[f64]) -> Option<String> {
        let d = dot(base, components);
        (d.abs() > MEMBERSHIP_TOL * norm(components).max(1.0))
            .then(|| format!("<base, v> = {d}"))
    }

    fn exp_map(&self, p: &Point, v: &Tangent) -> Result<Point> {
        self.check_base(v, p)?;
        let n = norm(v.components());
        if n >= CUT_LOCUS_GUARD {
            return Err(Error::Domain { norm: n, guard: CUT_LOCUS_GUARD });
        }
        Ok(Point::from_coords(self.id(), exp_coords(p.coords(), v.components())))
    }

    fn log_map(&self, p: &Point, q: &Point) -> Result<Tangent> {
        self.check_point(p)?;
        self.check_point(q)?;
        let (w, theta) = log_coords(p.coords(), q.coords());
        if theta >= CUT_LOCUS_GUARD {
            return Err(Error::CutLocus(format!("sphere points at distance {theta}")));
        }
        Ok(Tangent::from_parts(p.clone(), w))
    }

    fn dist(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(dist_coords(p.coords(), q.coords()))
    }

    fn parallel_transport(&self, v: &Tangent, q: &Point) -> Result<Tangent> {
        let p = v.base();
        let u = self.log_map(p, q)?;
        let theta = norm(u.components());
        if theta == 0.0 {
            return Ok(v.clone().with_base(q.clone()));
        }
        let dir: Coords = u.components().iter().map(|x| x / theta).collect();
        let moved = transport_coords(p.coords(), &dir, theta, v.components());
        Ok(Tangent::from_parts(
            q.clone(),
            project_tangent_coords(q.coords(), &moved),
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
        if raw.len() != Self::AMBIENT {
            return Err(Error::ShapeMismatch { expected: Self::AMBIENT, got: raw.len() });
        }
        let n = norm(raw);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateInput("cannot normalize a zero vector".into()));
        }
        Ok(Point::from_coords(self.id(), raw.iter().map(|x| x / n).collect()))
    }

    fn project_to_tangent(&self, p: &Point, raw: &[f64]) -> Result<Tangent> {
        self.check_point(p)?;
        if raw.len() != Self::AMBIENT {
            return Err(Error::ShapeMismatch { expected: Self::AMBIENT, got: raw.len() });
        }
        Ok(Tangent::from_parts(
            p.clone(),
            project_tangent_coords(p.coords(), raw),
        ))
    }

    fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        let constraint: Coords = p.coords().iter().copied().collect();
        linalg::complete_basis(&[constraint], Self::AMBIENT, self.dim())
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
        perpendicular_scaled(velocity, w, |rho| jacobi_factor(1.0, rho, variation))
    }

    fn residual_adjoints(&self, p: &Point, v: &Tangent, x: f64, y: &Point) -> Result<(Coords, Coords)> {
        self.check_base(v, p)?;
        self.check_point(y)?;
        let (pc, vc, yc) = (arr3(p.coords()), arr3(v.components()), arr3(y.coords()));
        let speed = dot(&vc, &vc).sqrt();
        let theta = x.abs() * speed;
        if theta >= CUT_LOCUS_GUARD {
            return Err(Error::Domain { norm: theta, guard: CUT_LOCUS_GUARD });
        }
        // unit tangent of the geodesic at p and at the prediction eta
        let u = if speed > 0.0 { vc.map(|c| c * x.signum() / speed) } else { [0.0; 3] };
        let (sin, cos) = theta.sin_cos();
        let mut eta = [0.0; 3];
        let mut u_eta = [0.0; 3];
        for i in 0..3 {
            eta[i] = cos * pc[i] + sin * u[i];
            u_eta[i] = cos * u[i] - sin * pc[i];
        }
        let c = dot(&eta, &yc);
        let mut eps = [0.0; 3];
        for i in 0..3 {
            eps[i] = yc[i] - c * eta[i];
        }
        let drift = dot(&eta, &eps);
        for i in 0..3 {
            eps[i] -= drift * eta[i];
        }
        let s = dot(&eps, &eps).sqrt();
        let phi = s.atan2(c);
        if phi >= CUT_LOCUS_GUARD {
            return Err(Error::CutLocus(format!("sphere points at distance {phi}")));
        }
        let scale = if s < 1e-300 { 1.0 } else { phi / s };
        eps.iter_mut().for_each(|e| *e *= scale);
        // the unit tangent transports back to u; normals to the geodesic plane are fixed
        let along = dot(&eps, &u_eta);
        let shoot_factor = if theta < 1e-4 { 1.0 - theta * theta / 6.0 } else { sin / theta };
        let mut foot = Coords::from_elem(0.0, 3);
        let mut shoot = Coords::from_elem(0.0, 3);
        for i in 0..3 {
            let perp = eps[i] - along * u_eta[i];
            foot[i] = along * u[i] + cos * perp;
            shoot[i] = along * u[i] + shoot_factor * perp;
        }
        Ok((foot, shoot))
    }
}

fn arr3(c: &[f64]) -> [f64; 3] {
    [c[0], c[1], c[2]]
}

/// Splits `w` into parts parallel and perpendicular to `velocity` and scales the
/// perpendicular part by `factor(|velocity|)`.
pub(crate) fn perpendicular_scaled(
    velocity: &Tangent,
    w: &Tangent,
    factor: impl Fn(f64) -> f64,
) -> Result<Tangent> {
    if !velocity.base().same_as(w.base()) {
        return Err(Error::BaseMismatch);
    }
    let rho = norm(velocity.components());
    let f = factor(rho);
    let mut out: Coords = w.components().iter().map(|x| f * x).collect();
    if rho > 0.0 {
        let along = dot(w.components(), velocity.components()) / (rho * rho);
        axpy((1.0 - f) * along, velocity.components(), &mut out);
    }
    Ok(Tangent::from_parts(w.base().clone(), out))
}
