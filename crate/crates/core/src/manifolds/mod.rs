pub mod curvature;
pub mod kendall;
pub mod spd;
pub mod sphere;

pub use curvature::{c_coeff, s_coeff};
pub use kendall::Kendall;
pub use spd::{ellipse_outline, Spd, Sym2};
pub use sphere::Sphere;
