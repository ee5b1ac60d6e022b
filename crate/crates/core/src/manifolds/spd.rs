//! 2×2 symmetric positive definite matrices with the affine-invariant metric
//! `g_P(U, V) = tr(P⁻¹ U P⁻¹ V)`.
//!
//! Matrix functions go through the closed-form symmetric 2×2
//! eigendecomposition. Points and tangent vectors are stored as full
//! row-major matrices `[a, b, b, c]`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::curvature::jacobi_factor;
use crate::error::{Error, Result};
use crate::geometry::{
    uniform_ball_coeffs, Coords, Manifold, ManifoldId, Point, Tangent, Variation, MEMBERSHIP_TOL,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spd;

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Eigendecomposition `R diag(l1, l2) Rᵀ` with `R` the rotation by `angle`.
#[derive(Clone, Copy, Debug)]
pub struct Eigen2 {
    pub l1: f64,
    pub l2: f64,
    pub cos: f64,
    pub sin: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { a: 1.0, b: 0.0, c: 1.0 };

    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn from_coords(m: &[f64]) -> Self {
        Self { a: m[0], b: 0.5 * (m[1] + m[2]), c: m[3] }
    }

    pub fn coords(self) -> Coords {
        smallvec::smallvec![self.a, self.b, self.b, self.c]
    }

    pub fn diag(l1: f64, l2: f64) -> Self {
        Self { a: l1, b: 0.0, c: l2 }
    }

    pub fn eigen(self) -> Eigen2 {
        let m = 0.5 * (self.a + self.c);
        let d = 0.5 * (self.a - self.c);
        let r = d.hypot(self.b);
        let angle = 0.5 * self.b.atan2(d);
        Eigen2 { l1: m + r, l2: m - r, cos: angle.cos(), sin: angle.sin() }
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Sym2 {
        self.eigen().compose(f)
    }

    pub fn frobenius_dot(self, other: Sym2) -> f64 {
        self.a * other.a + 2.0 * self.b * other.b + self.c * other.c
    }

    pub fn frobenius_norm(self) -> f64 {
        self.frobenius_dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Sym2 {
        Sym2 { a: s * self.a, b: s * self.b, c: s * self.c }
    }

    /// `A S Aᵀ` for a general 2×2 matrix `A` (row-major).
    pub fn congruence(self, m: [f64; 4]) -> Sym2 {
        // T = A S
        let t00 = m[0] * self.a + m[1] * self.b;
        let t01 = m[0] * self.b + m[1] * self.c;
        let t10 = m[2] * self.a + m[3] * self.b;
        let t11 = m[2] * self.b + m[3] * self.c;
        Sym2 {
            a: t00 * m[0] + t01 * m[1],
            b: 0.5 * ((t00 * m[2] + t01 * m[3]) + (t10 * m[0] + t11 * m[1])),
            c: t10 * m[2] + t11 * m[3],
        }
    }

    /// `S X S` for symmetric `S = self`.
    pub fn sandwich(self, x: Sym2) -> Sym2 {
        x.congruence(self.as_matrix())
    }

    pub fn as_matrix(self) -> [f64; 4] {
        [self.a, self.b, self.b, self.c]
    }

    pub fn min_eigenvalue(self) -> f64 {
        self.eigen().l2
    }
}

fn matmul(x: [f64; 4], y: [f64; 4]) -> [f64; 4] {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

impl Eigen2 {
    pub fn compose(self, f: impl Fn(f64) -> f64) -> Sym2 {
        let (f1, f2) = (f(self.l1), f(self.l2));
        let (c, s) = (self.cos, self.sin);
        Sym2 {
            a: f1 * c * c + f2 * s * s,
            b: (f1 - f2) * c * s,
            c: f1 * s * s + f2 * c * c,
        }
    }

    /// Expresses `x` in the eigenbasis: `Rᵀ x R`.
    fn to_eigenbasis(self, x: Sym2) -> Sym2 {
        x.congruence([self.cos, self.sin, -self.sin, self.cos])
    }

    fn out_of_eigenbasis(self, x: Sym2) -> Sym2 {
        x.congruence([self.cos, -self.sin, self.sin, self.cos])
    }
}

/// `P^{1/2}` and `P^{-1/2}`.
fn roots(p: Sym2) -> (Sym2, Sym2) {
    let e = p.eigen();
    (e.compose(f64::sqrt), e.compose(|l| 1.0 / l.sqrt()))
}

fn sym(p: &Point) -> Sym2 {
    Sym2::from_coords(p.coords())
}

fn tsym(v: &Tangent) -> Sym2 {
    Sym2::from_coords(v.components())
}

impl Spd {
    pub fn point(&self, m: Sym2) -> Result<Point> {
        Point::new(ManifoldId::Spd, &m.coords())
    }

    fn finite_point(&self, m: Sym2) -> Result<Point> {
        if !(m.a.is_finite() && m.b.is_finite() && m.c.is_finite()) || m.min_eigenvalue() <= 0.0 {
            return Err(Error::Domain { norm: f64::INFINITY, guard: f64::INFINITY });
        }
        Ok(Point::from_coords(ManifoldId::Spd, m.coords()))
    }

    /// Whitened `P^{-1/2} Q P^{-1/2}`.
    fn relative(&self, p: &Point, q: &Point) -> Sym2 {
        let (_, isqrt) = roots(sym(p));
        isqrt.sandwich(sym(q))
    }
}

/// Outline of the ellipse `{ x : xᵀ P⁻¹ x = 1 }`, whose semi-axes are the square
/// roots of the eigenvalues of `P` along its eigenvectors.
pub fn ellipse_outline(p: &Point, segments: usize) -> Vec<(f64, f64)> {
    let e = sym(p).eigen();
    let (r1, r2) = (e.l1.max(0.0).sqrt(), e.l2.max(0.0).sqrt());
    (0..=segments)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / segments as f64;
            let (x, y) = (r1 * t.cos(), r2 * t.sin());
            (e.cos * x - e.sin * y, e.sin * x + e.cos * y)
        })
        .collect()
}

impl Manifold for Spd {
    fn id(&self) -> ManifoldId {
        ManifoldId::Spd
    }

    fn dim(&self) -> usize {
        3
    }

    fn coord_len(&self) -> usize {
        4
    }

    fn curvature_bounds(&self) -> (f64, f64) {
        (-0.5, 0.0)
    }

    fn injectivity_guard(&self) -> f64 {
        f64::INFINITY
    }

    fn membership_error(&self, coords: &[f64]) -> Option<String> {
        if coords.iter().any(|x| !x.is_finite()) {
            return Some("non-finite entry".into());
        }
        let scale = coords.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if (coords[1] - coords[2]).abs() > MEMBERSHIP_TOL * scale {
            return Some("matrix is not symmetric".into());
        }
        let l = Sym2::from_coords(coords).min_eigenvalue();
        (l <= 0.0).then(|| format!("smallest eigenvalue {l} is not positive"))
    }

    fn tangency_error(&self, _base: &[f64], components: &[f64]) -> Option<String> {
        let scale = components.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        ((components[1] - components[2]).abs() > MEMBERSHIP_TOL * scale)
            .then(|| "tangent matrix is not symmetric".into())
    }

    fn exp_map(&self, p: &Point, v: &Tangent) -> Result<Point> {
        self.check_base(v, p)?;
        let (sqrt, isqrt) = roots(sym(p));
        let w = isqrt.sandwich(tsym(v));
        self.finite_point(sqrt.sandwich(w.map(f64::exp)))
    }

    fn log_map(&self, p: &Point, q: &Point) -> Result<Tangent> {
        self.check_point(p)?;
        self.check_point(q)?;
        let (sqrt, isqrt) = roots(sym(p));
        let l = isqrt.sandwich(sym(q)).map(f64::ln);
        Ok(Tangent::from_parts(p.clone(), sqrt.sandwich(l).coords()))
    }

    fn dist(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        let e = self.relative(p, q).eigen();
        Ok(e.l1.ln().hypot(e.l2.ln()))
    }

    fn parallel_transport(&self, v: &Tangent, q: &Point) -> Result<Tangent> {
        let p = v.base();
        self.check_point(q)?;
        // Γ(V) = E V Eᵀ with E = P^{1/2} (P^{-1/2} Q P^{-1/2})^{1/2} P^{-1/2}
        let (sqrt, isqrt) = roots(sym(p));
        let mid = isqrt.sandwich(sym(q)).map(f64::sqrt);
        let e = matmul(matmul(sqrt.as_matrix(), mid.as_matrix()), isqrt.as_matrix());
        Ok(Tangent::from_parts(q.clone(), tsym(v).congruence(e).coords()))
    }

    fn inner(&self, u: &Tangent, w: &Tangent) -> Result<f64> {
        if !u.base().same_as(w.base()) {
            return Err(Error::BaseMismatch);
        }
        let (_, isqrt) = roots(sym(u.base()));
        Ok(isqrt.sandwich(tsym(u)).frobenius_dot(isqrt.sandwich(tsym(w))))
    }

    fn norm(&self, u: &Tangent) -> f64 {
        let (_, isqrt) = roots(sym(u.base()));
        isqrt.sandwich(tsym(u)).frobenius_norm()
    }

    fn project_to_manifold(&self, raw: &[f64]) -> Result<Point> {
        let m = match raw.len() {
            3 => Sym2::new(raw[0], raw[1], raw[2]),
            4 => Sym2::from_coords(raw),
            got => return Err(Error::ShapeMismatch { expected: 4, got }),
        };
        if !(m.a.is_finite() && m.b.is_finite() && m.c.is_finite()) {
            return Err(Error::DegenerateInput("non-finite matrix entry".into()));
        }
        let e = m.eigen();
        if e.l1 <= 0.0 {
            return Err(Error::DegenerateInput(
                "symmetric part has no positive eigenvalue".into(),
            ));
        }
        let floor = e.l1 * 1e-10;
        Ok(Point::from_coords(self.id(), e.compose(|l| l.max(floor)).coords()))
    }

    fn project_to_tangent(&self, p: &Point, raw: &[f64]) -> Result<Tangent> {
        self.check_point(p)?;
        let m = match raw.len() {
            3 => Sym2::new(raw[0], raw[1], raw[2]),
            4 => Sym2::from_coords(raw),
            got => return Err(Error::ShapeMismatch { expected: 4, got }),
        };
        Ok(Tangent::from_parts(p.clone(), m.coords()))
    }

    fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        let (sqrt, _) = roots(sym(p));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [Sym2::diag(1.0, 0.0), Sym2::diag(0.0, 1.0), Sym2::new(0.0, s, 0.0)]
            .into_iter()
            .map(|e| Tangent::from_parts(p.clone(), sqrt.sandwich(e).coords()))
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
        // Whitened at the identity, R(X, U)U = -¼[[X, U], U]. In the eigenbasis of
        // U the diagonal directions are flat and the off-diagonal direction has
        // curvature -((l1 - l2) / 2)², i.e. a unit-curvature hyperbolic factor at
        // arc length |l1 - l2| / 2.
        let (sqrt, isqrt) = roots(sym(w.base()));
        let u = isqrt.sandwich(tsym(velocity)).eigen();
        let x = u.to_eigenbasis(isqrt.sandwich(tsym(w)));
        let mu = 0.5 * (u.l1 - u.l2).abs();
        let f = jacobi_factor(-1.0, mu, variation);
        let scaled = u.out_of_eigenbasis(Sym2 { a: x.a, b: f * x.b, c: x.c });
        Ok(Tangent::from_parts(w.base().clone(), sqrt.sandwich(scaled).coords()))
    }

    fn sample_ball(&self, p: &Point, radius: f64, rng: &mut dyn RngCore) -> Tangent {
        let basis = self.tangent_basis(p);
        let coeffs = uniform_ball_coeffs(3, radius, rng);
        let mut out = Tangent::zero(p.clone());
        for (c, e) in coeffs.iter().zip(basis.iter()) {
            out.accumulate(e, *c);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn spd(a: f64, b: f64, c: f64) -> Point {
        Spd.point(Sym2::new(a, b, c)).unwrap()
    }

    #[test]
    fn eigen_roundtrip() {
        let m = Sym2::new(2.0, 0.7, 0.5);
        let back = m.map(|l| l);
        assert!((back.a - m.a).abs() < 1e-14);
        assert!((back.b - m.b).abs() < 1e-14);
        assert!((back.c - m.c).abs() < 1e-14);
        let e = m.eigen();
        assert!((e.l1 + e.l2 - 2.5).abs() < 1e-14);
        assert!((e.l1 * e.l2 - (1.0 - 0.49)).abs() < 1e-14);
    }

    #[test]
    fn log_of_diagonal() {
        let i = spd(1.0, 0.0, 1.0);
        let q = spd(4.0, 0.0, 1.0);
        let v = Spd.log_map(&i, &q).unwrap();
        assert!(max_abs_diff(v.components(), &[4f64.ln(), 0.0, 0.0, 0.0]) < 1e-15);
    }

    #[test]
    fn distance_to_scaled_identity() {
        let i = spd(1.0, 0.0, 1.0);
        for c in [0.1, 0.5, 2.0, 7.0] {
            let q = spd(c, 0.0, c);
            let d = Spd.dist(&i, &q).unwrap();
            assert!((d - 2f64.sqrt() * f64::ln(c).abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn metric_at_identity_is_frobenius() {
        let i = spd(1.0, 0.0, 1.0);
        let u = Tangent::new(i.clone(), &[0.3, -0.2, -0.2, 1.1]).unwrap();
        let w = Tangent::new(i.clone(), &[-0.5, 0.4, 0.4, 0.25]).unwrap();
        let frob: f64 = u.components().iter().zip(w.components()).map(|(a, b)| a * b).sum();
        assert!((Spd.inner(&u, &w).unwrap() - frob).abs() < 1e-15);
    }

    #[test]
    fn projection_floors_eigenvalues() {
        let p = Spd.project_to_manifold(&[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(Spd.membership_error(p.coords()).is_none());
        assert!(Spd.project_to_manifold(&[-1.0, 0.0, -2.0]).is_err());
    }

    #[test]
    fn ellipse_axes() {
        let p = spd(4.0, 0.0, 1.0);
        let pts = ellipse_outline(&p, 4);
        assert!((pts[0].0 - 2.0).abs() < 1e-15);
        assert!((pts[1].1 - 1.0).abs() < 1e-15);
    }
}
