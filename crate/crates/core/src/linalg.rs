//! Small dense-vector helpers shared by the manifold implementations.

use crate::geometry::Coords;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `sin(x) / x` with the removable singularity filled in.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `sinh(x)/x`, continuous at 0.
pub(crate) fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// Extends the orthonormal `constraints` to an orthonormal family spanning their
/// complement in `R^len`, stopping after `want` vectors. Candidates are the
/// standard basis vectors, least-constrained first.
pub(crate) fn complete_basis(constraints: &[Coords], len: usize, want: usize) -> Vec<Coords> {
    let mut order: Vec<(f64, usize)> = (0..len)
        .map(|j| (constraints.iter().map(|c| c[j] * c[j]).sum::<f64>(), j))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut out: Vec<Coords> = Vec::with_capacity(want);
    for (_, j) in order {
        if out.len() == want {
            break;
        }
        let mut e: Coords = smallvec::smallvec![0.0; len];
        e[j] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for c in constraints.iter().chain(out.iter()) {
                let d = dot(&e, c);
                axpy(-d, c, &mut e);
            }
        }
        let n = norm(&e);
        if n > 1e-3 {
            e.iter_mut().for_each(|x| *x /= n);
            out.push(e);
        }
    }
    out
}
