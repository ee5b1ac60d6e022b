//! Points, tangent vectors and the Riemannian-manifold contract.
//!
//! Every manifold uses ambient coordinates: the sphere lives in R³, SPD(2)
//! matrices are stored as full row-major 2×2 arrays and Kendall preshapes as
//! `k` complex landmarks interleaved as `(re, im)` pairs.

use std::fmt;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifolds::{Kendall, Spd, Sphere};

/// Tolerance for membership and tangency predicates.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

pub type Coords = SmallVec<[f64; 4]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldId {
    /// Unit sphere S² in R³.
    Sphere,
    /// 2×2 symmetric positive definite matrices, affine-invariant metric.
    Spd,
    /// Kendall preshape sphere of planar configurations with `landmarks` points.
    Kendall { landmarks: usize },
}

impl ManifoldId {
    pub fn space(self) -> Space {
        Space::new(self)
    }

    /// Rejects identifiers that do not describe a usable space.
    pub fn validate(self) -> Result<Self> {
        match self {
            ManifoldId::Kendall { landmarks } if landmarks < 3 => Err(Error::InvalidParameter(
                format!("Kendall shape space needs at least 3 landmarks, got {landmarks}"),
            )),
            other => Ok(other),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldId::Sphere => "sphere",
            ManifoldId::Spd => "spd",
            ManifoldId::Kendall { .. } => "kendall",
        }
    }
}

impl fmt::Display for ManifoldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldId::Kendall { landmarks } => write!(f, "kendall(k={landmarks})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    manifold: ManifoldId,
    coords: Coords,
}

impl Point {
    /// Validated constructor; fails when `coords` is not on the manifold.
    pub fn new(manifold: ManifoldId, coords: &[f64]) -> Result<Self> {
        let space = manifold.space();
        if coords.len() != space.coord_len() {
            return Err(Error::ShapeMismatch {
                expected: space.coord_len(),
                got: coords.len(),
            });
        }
        if let Some(reason) = space.membership_error(coords) {
            return Err(Error::NotOnManifold(reason));
        }
        Ok(Self::from_coords(manifold, coords.iter().copied().collect()))
    }

    pub(crate) fn from_coords(manifold: ManifoldId, coords: Coords) -> Self {
        Self { manifold, coords }
    }

    pub fn manifold(&self) -> ManifoldId {
        self.manifold
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn same_as(&self, other: &Point) -> bool {
        self.manifold == other.manifold
            && linalg::max_abs_diff(&self.coords, &other.coords) <= MEMBERSHIP_TOL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    base: Point,
    components: Coords,
}

impl Tangent {
    /// Validated constructor; fails when `components` is not tangent at `base`.
    pub fn new(base: Point, components: &[f64]) -> Result<Self> {
        let space = base.manifold().space();
        if components.len() != space.coord_len() {
            return Err(Error::ShapeMismatch {
                expected: space.coord_len(),
                got: components.len(),
            });
        }
        if let Some(reason) = space.tangency_error(base.coords(), components) {
            return Err(Error::InvalidTangent(reason));
        }
        Ok(Self::from_parts(base, components.iter().copied().collect()))
    }

    pub(crate) fn from_parts(base: Point, components: Coords) -> Self {
        Self { base, components }
    }

    pub fn zero(base: Point) -> Self {
        let len = base.coords().len();
        Self::from_parts(base, SmallVec::from_elem(0.0, len))
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn scaled(&self, factor: f64) -> Tangent {
        Self::from_parts(
            self.base.clone(),
            self.components.iter().map(|c| c * factor).collect(),
        )
    }

    /// `self + factor * other`; both vectors must share a base point.
    pub fn add_scaled(&self, other: &Tangent, factor: f64) -> Result<Tangent> {
        if !self.base.same_as(&other.base) {
            return Err(Error::BaseMismatch);
        }
        let components = self
            .components
            .iter()
            .zip(other.components.iter())
            .map(|(a, b)| a + factor * b)
            .collect();
        Ok(Self::from_parts(self.base.clone(), components))
    }

    pub(crate) fn accumulate(&mut self, other: &Tangent, factor: f64) {
        linalg::axpy(factor, &other.components, &mut self.components);
    }

    pub(crate) fn accumulate_components(&mut self, other: &[f64], factor: f64) {
        linalg::axpy(factor, other, &mut self.components);
    }

    pub(crate) fn with_base(self, base: Point) -> Tangent {
        Self::from_parts(base, self.components)
    }
}

/// Which exponential-map differential an adjoint is taken of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variation {
    /// `d_p Exp(p, u)`: Jacobi field with `J(0) = w`, `J'(0) = 0`.
    Footpoint,
    /// `d_u Exp(p, u)`: Jacobi field with `J(0) = 0`, `J'(0) = w`.
    Shooting,
}

pub trait Manifold: Send + Sync {
    fn id(&self) -> ManifoldId;

    /// Intrinsic dimension.
    fn dim(&self) -> usize;

    /// Length of the ambient coordinate representation.
    fn coord_len(&self) -> usize;

    /// Lower and upper sectional-curvature bounds `(κ_l, κ_h)`.
    fn curvature_bounds(&self) -> (f64, f64);

    /// Largest tangent norm accepted by `exp_map`; infinite when unrestricted.
    fn injectivity_guard(&self) -> f64;

    fn membership_error(&self, coords: &[f64]) -> Option<String>;

    fn tangency_error(&self, base: &[f64], components: &[f64]) -> Option<String>;

    fn exp_map(&self, p: &Point, v: &Tangent) -> Result<Point>;

    fn log_map(&self, p: &Point, q: &Point) -> Result<Tangent>;

    fn dist(&self, p: &Point, q: &Point) -> Result<f64>;

    /// Parallel transport of `v` along the minimizing geodesic to `q`.
    fn parallel_transport(&self, v: &Tangent, q: &Point) -> Result<Tangent>;

    fn inner(&self, u: &Tangent, w: &Tangent) -> Result<f64>;

    fn norm(&self, u: &Tangent) -> f64;

    fn project_to_manifold(&self, raw: &[f64]) -> Result<Point>;

    fn project_to_tangent(&self, p: &Point, raw: &[f64]) -> Result<Tangent>;

    /// Orthonormal frame of `T_p M` with `dim()` vectors.
    fn tangent_basis(&self, p: &Point) -> Vec<Tangent>;

    /// Adjoint of the exponential-map differential along `γ(t) = Exp(p, t·velocity)`,
    /// applied to `w ∈ T_p M` that has already been parallel transported back
    /// from `γ(1)`. Both operators are self-adjoint in a parallel frame on the
    /// manifolds implemented here, so this is the Jacobi map itself.
    fn jacobi_adjoint(&self, velocity: &Tangent, w: &Tangent, variation: Variation)
        -> Result<Tangent>;

    /// Pulls back the residual of one record: with `η = Exp(p, x·v)` and
    /// `ε = Log(η, y)`, returns the components of `(d_pExp† ε, d_vExp† ε)` in
    /// `T_p M`.
    fn residual_adjoints(&self, p: &Point, v: &Tangent, x: f64, y: &Point) -> Result<(Coords, Coords)> {
        let velocity = v.scaled(x);
        let eta = self.exp_map(p, &velocity)?;
        let eps = self.log_map(&eta, y)?;
        let back = self.parallel_transport(&eps, p)?;
        let foot = self.jacobi_adjoint(&velocity, &back, Variation::Footpoint)?;
        let shoot = self.jacobi_adjoint(&velocity, &back, Variation::Shooting)?;
        Ok((foot.components, shoot.components))
    }

    /// Tangent vector drawn uniformly from the ball of `radius` in `T_p M`.
    fn sample_ball(&self, p: &Point, radius: f64, rng: &mut dyn RngCore) -> Tangent {
        let basis = self.tangent_basis(p);
        let coeffs = uniform_ball_coeffs(basis.len(), radius, rng);
        let mut out = Tangent::zero(p.clone());
        for (c, e) in coeffs.iter().zip(basis.iter()) {
            out.accumulate(e, *c);
        }
        out
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.manifold() != self.id() {
            return Err(Error::ManifoldMismatch {
                expected: self.id(),
                got: p.manifold(),
            });
        }
        Ok(())
    }

    fn check_base(&self, v: &Tangent, p: &Point) -> Result<()> {
        self.check_point(p)?;
        if !v.base().same_as(p) {
            return Err(Error::InvalidTangent(
                "tangent vector is not based at the given point".into(),
            ));
        }
        Ok(())
    }

    /// Coefficients of `v` in `basis` (assumed orthonormal at `v`'s base).
    fn frame_coefficients(&self, v: &Tangent, basis: &[Tangent]) -> Result<Vec<f64>> {
        basis.iter().map(|e| self.inner(v, e)).collect()
    }
}

/// Uniform draw from the `dim`-ball of `radius`: Gaussian direction, `U^{1/d}` radius.
pub(crate) fn uniform_ball_coeffs(dim: usize, radius: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    let mut dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let n = linalg::norm(&dir);
    let u: f64 = rand::Rng::random(&mut *rng);
    let r = radius * u.powf(1.0 / dim as f64);
    if n > 0.0 {
        dir.iter_mut().for_each(|d| *d *= r / n);
    }
    dir
}

/// Runtime dispatch over the three supported manifolds.
#[derive(Clone, Copy, Debug)]
pub enum Space {
    Sphere(Sphere),
    Spd(Spd),
    Kendall(Kendall),
}

impl Space {
    pub fn new(id: ManifoldId) -> Self {
        match id {
            ManifoldId::Sphere => Space::Sphere(Sphere),
            ManifoldId::Spd => Space::Spd(Spd),
            ManifoldId::Kendall { landmarks } => Space::Kendall(Kendall::new(landmarks)),
        }
    }
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Space::Sphere($m) => $e,
            Space::Spd($m) => $e,
            Space::Kendall($m) => $e,
        }
    };
}

impl Manifold for Space {
    fn id(&self) -> ManifoldId {
        dispatch!(self, m => m.id())
    }
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }
    fn coord_len(&self) -> usize {
        dispatch!(self, m => m.coord_len())
    }
    fn curvature_bounds(&self) -> (f64, f64) {
        dispatch!(self, m => m.curvature_bounds())
    }
    fn injectivity_guard(&self) -> f64 {
        dispatch!(self, m => m.injectivity_guard())
    }
    fn membership_error(&self, coords: &[f64]) -> Option<String> {
        dispatch!(self, m => m.membership_error(coords))
    }
    fn tangency_error(&self, base: &[f64], components: &[f64]) -> Option<String> {
        dispatch!(self, m => m.tangency_error(base, components))
    }
    fn exp_map(&self, p: &Point, v: &Tangent) -> Result<Point> {
        dispatch!(self, m => m.exp_map(p, v))
    }
    fn log_map(&self, p: &Point, q: &Point) -> Result<Tangent> {
        dispatch!(self, m => m.log_map(p, q))
    }
    fn dist(&self, p: &Point, q: &Point) -> Result<f64> {
        dispatch!(self, m => m.dist(p, q))
    }
    fn parallel_transport(&self, v: &Tangent, q: &Point) -> Result<Tangent> {
        dispatch!(self, m => m.parallel_transport(v, q))
    }
    fn inner(&self, u: &Tangent, w: &Tangent) -> Result<f64> {
        dispatch!(self, m => m.inner(u, w))
    }
    fn norm(&self, u: &Tangent) -> f64 {
        dispatch!(self, m => m.norm(u))
    }
    fn project_to_manifold(&self, raw: &[f64]) -> Result<Point> {
        dispatch!(self, m => m.project_to_manifold(raw))
    }
    fn project_to_tangent(&self, p: &Point, raw: &[f64]) -> Result<Tangent> {
        dispatch!(self, m => m.project_to_tangent(p, raw))
    }
    fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        dispatch!(self, m => m.tangent_basis(p))
    }
    fn jacobi_adjoint(
        &self,
        velocity: &Tangent,
        w: &Tangent,
        variation: Variation,
    ) -> Result<Tangent> {
        dispatch!(self, m => m.jacobi_adjoint(velocity, w, variation))
    }
    fn residual_adjoints(&self, p: &Point, v: &Tangent, x: f64, y: &Point) -> Result<(Coords, Coords)> {
        dispatch!(self, m => m.residual_adjoints(p, v, x, y))
    }
    fn sample_ball(&self, p: &Point, radius: f64, rng: &mut dyn RngCore) -> Tangent {
        dispatch!(self, m => m.sample_ball(p, radius, rng))
    }
}
