//! Scalar truncation, nodal truncation of P1 functions, and executable
//! forms of the inequalities they satisfy on nonobtuse meshes: the
//! discrete comparison principle, the lumped bound on the truncation
//! primitive, and the sub-simplex lower bound for interpolated
//! truncations.

use thiserror::Error;

use crate::fespace::{lumped_map_integral, lumped_weights, FeFunction};
use crate::levelset::abs_superlevel_measure;
use crate::mesh::{check_quality, Mesh};
use crate::scalar::{cast, Scalar};

#[derive(Debug, Error)]
pub enum TruncationError {
    #[error("truncation level must be positive and finite, got {0}")]
    InvalidLevel(f64),
}

/// Validated positive truncation level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationLevel<T>(T);

impl<T: Scalar> TruncationLevel<T> {
    pub fn new(k: T) -> Result<Self, TruncationError> {
        if k > T::zero() && k.is_finite() {
            Ok(Self(k))
        } else {
            Err(TruncationError::InvalidLevel(k.to_f64().unwrap_or(f64::NAN)))
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Clamp `s` to `[-k, k]`. Odd and nondecreasing in `s`.
#[inline]
pub fn trunc<T: Scalar>(k: T, s: T) -> T {
    assert!(k > T::zero(), "truncation level must be positive");
    s.max(-k).min(k)
}

/// Primitive of the clamp: `s²/2` for `|s| ≤ k`, `k|s| − k²/2` beyond.
/// Convex, even, and zero at zero.
#[inline]
pub fn theta<T: Scalar>(k: T, s: T) -> T {
    assert!(k > T::zero(), "truncation level must be positive");
    let a = s.abs();
    let half = cast::<T>(0.5);
    if a <= k {
        half * s * s
    } else {
        k * a - half * k * k
    }
}

/// Interpolated truncation: clamp every nodal value. Preserves membership
/// in the zero-trace space.
pub fn nodal_truncate<T: Scalar>(u: &FeFunction<T>, k: T) -> FeFunction<T> {
    assert!(k > T::zero(), "truncation level must be positive");
    let values = u.values().iter().map(|&v| trunc(k, v)).collect();
    FeFunction::new(u.mesh(), values, u.is_homogeneous())
}

/// Elementwise residuals of the discrete comparison principle for one
/// `(u, k)` pair. On a nonobtuse mesh both minima are nonnegative up to
/// roundoff:
///
/// - energy: `∇u · ∇(L_h T_k u) − |∇(L_h T_k u)|²  ≥ 0`
/// - gradient: `|∇u| − |∇(L_h T_k u)| ≥ 0`
///
/// Residuals are normalized by `max(1, |∇u|²)` resp. `max(1, |∇u|)` on the
/// element, so a pass threshold like `−1e−12` is scale free.
#[derive(Clone, Copy, Debug)]
pub struct DmpReport<T> {
    pub min_energy_residual: T,
    pub min_gradient_residual: T,
    pub worst_element: usize,
    /// Whether the mesh passed the nonobtuseness check; the inequalities
    /// are only guaranteed in that case.
    pub mesh_nonobtuse: bool,
}

pub fn check_dmp<T: Scalar>(mesh: &Mesh<T>, u: &FeFunction<T>, k: T) -> DmpReport<T> {
    assert!(k > T::zero(), "truncation level must be positive");
    let truncated = nodal_truncate(u, k);
    let mut min_energy = T::infinity();
    let mut min_gradient = T::infinity();
    let mut worst = 0usize;
    for e in 0..mesh.n_elements() {
        let gu = u.element_gradient(e);
        let gt = truncated.element_gradient(e);
        let gu2 = gu[0] * gu[0] + gu[1] * gu[1];
        let gt2 = gt[0] * gt[0] + gt[1] * gt[1];
        let dot = gu[0] * gt[0] + gu[1] * gt[1];
        let energy = (dot - gt2) / T::one().max(gu2);
        let gradient = (gu2.sqrt() - gt2.sqrt()) / T::one().max(gu2.sqrt());
        if energy < min_energy {
            min_energy = energy;
            worst = e;
        }
        min_gradient = min_gradient.min(gradient);
    }
    if !min_energy.is_finite() {
        min_energy = T::zero();
        min_gradient = T::zero();
    }
    DmpReport {
        min_energy_residual: min_energy,
        min_gradient_residual: min_gradient,
        worst_element: worst,
        mesh_nonobtuse: check_quality(mesh).is_nonobtuse,
    }
}

/// Both sides of the lumped bound on the truncation primitive:
/// `Σ_z Θ_k(u(z)) ω_z ≤ c1 · k · ‖u‖_{L¹}`.
#[derive(Clone, Copy, Debug)]
pub struct LumpedThetaBound<T> {
    pub lhs: T,
    pub rhs: T,
}

pub fn check_nonlinear_lumped_bound<T: Scalar>(
    u: &FeFunction<T>,
    k: T,
    c1: T,
) -> LumpedThetaBound<T> {
    assert!(k > T::zero(), "truncation level must be positive");
    let weights = lumped_weights(u.mesh());
    let lhs = lumped_map_integral(u, &weights, |v| theta(k, v));
    let rhs = c1 * k * u.l1_norm();
    LumpedThetaBound { lhs, rhs }
}

/// For every element that contains a point with `|u| ≥ k`, measure the
/// fraction of the element where `|L_h T_k u| ≥ k/2`; returns the minimum
/// over flagged elements, or 1 when no element is flagged.
pub fn subsimplex_fraction<T: Scalar>(mesh: &Mesh<T>, u: &FeFunction<T>, k: T) -> T {
    assert!(k > T::zero(), "truncation level must be positive");
    let half_k = k * cast::<T>(0.5);
    let mut min_fraction = T::one();
    let mut vals = [T::zero(); 3];
    let mut tvals = [T::zero(); 3];
    for e in 0..mesh.n_elements() {
        let conn = mesh.element(e);
        let mut flagged = false;
        for (idx, &v) in conn.iter().enumerate() {
            vals[idx] = u.values()[v];
            tvals[idx] = trunc(k, u.values()[v]);
            // u is affine on the element, so its range is spanned by the
            // vertex values
            if vals[idx].abs() >= k {
                flagged = true;
            }
        }
        if !flagged {
            continue;
        }
        let m = mesh.measure(e);
        let above = abs_superlevel_measure(mesh.dim(), &tvals[..conn.len()], m, half_k);
        min_fraction = min_fraction.min(above / m);
    }
    min_fraction
}
