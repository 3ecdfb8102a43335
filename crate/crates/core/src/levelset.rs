//! Exact level-set geometry for linear functions on simplices.
//!
//! A P1 function restricted to an element is affine, so the measure of
//! `{ℓ ≥ c}`, the integral of `|ℓ|`, and the distribution function of `|ℓ|`
//! all have closed forms. Sup-type (weak-Lᵖ) norms and L¹ norms are
//! computed from these instead of quadrature, so they carry no quadrature
//! error.

use crate::scalar::{cast, Scalar};

/// Measure of `{x ∈ K : ℓ(x) ≥ c}` for the affine `ℓ` with the given
/// vertex `values` on a simplex `K` of dimension `dim` and measure
/// `measure`.
pub fn superlevel_measure<T: Scalar>(dim: usize, values: &[T], measure: T, c: T) -> T {
    debug_assert_eq!(values.len(), dim + 1);
    let mut v = [T::zero(); 3];
    v[..values.len()].copy_from_slice(values);
    let vals = &mut v[..values.len()];
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let lo = vals[0];
    let hi = vals[dim];
    if c <= lo {
        return measure;
    }
    if c > hi {
        return T::zero();
    }
    // lo < c <= hi from here on, which forces lo < hi
    match dim {
        1 => measure * (hi - c) / (hi - lo),
        2 => {
            let mid = vals[1];
            if c > mid {
                // region is the similar triangle near the top vertex
                measure * (hi - c) * (hi - c) / ((hi - mid) * (hi - lo))
            } else {
                // complement is the similar triangle near the bottom vertex
                let denom = (mid - lo) * (hi - lo);
                if denom == T::zero() {
                    measure
                } else {
                    measure * (T::one() - (c - lo) * (c - lo) / denom)
                }
            }
        }
        _ => unreachable!("only dimensions 1 and 2 are supported"),
    }
}

/// Measure of `{x ∈ K : |ℓ(x)| ≥ c}` for `c ≥ 0`.
pub fn abs_superlevel_measure<T: Scalar>(dim: usize, values: &[T], measure: T, c: T) -> T {
    if c <= T::zero() {
        return measure;
    }
    let neg: Vec<T> = values.iter().map(|&v| -v).collect();
    superlevel_measure(dim, values, measure, c) + superlevel_measure(dim, &neg, measure, c)
}

/// Integral of the positive part `max(ℓ, 0)` over the simplex.
pub fn positive_part_integral<T: Scalar>(dim: usize, values: &[T], measure: T) -> T {
    debug_assert_eq!(values.len(), dim + 1);
    let mut v = [T::zero(); 3];
    v[..values.len()].copy_from_slice(values);
    let vals = &mut v[..values.len()];
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let lo = vals[0];
    let hi = vals[dim];
    if lo >= T::zero() {
        // mean value times measure
        let mean = vals.iter().copied().sum::<T>() / cast::<T>((dim + 1) as f64);
        return measure * mean;
    }
    if hi <= T::zero() {
        return T::zero();
    }
    match dim {
        1 => {
            // crossing: positive triangle near the high end
            measure * hi * hi / (cast::<T>(2.0) * (hi - lo))
        }
        2 => {
            let mid = vals[1];
            if mid >= T::zero() {
                // negative corner triangle near lo; integrate ℓ then add back (−ℓ)⁺
                let mean = (lo + mid + hi) / cast::<T>(3.0);
                let denom = (mid - lo) * (hi - lo);
                let neg_part = -measure * lo * lo * lo / (cast::<T>(3.0) * denom);
                measure * mean + neg_part
            } else {
                // positive corner triangle near hi
                let denom = (hi - lo) * (hi - mid);
                measure * hi * hi * hi / (cast::<T>(3.0) * denom)
            }
        }
        _ => unreachable!("only dimensions 1 and 2 are supported"),
    }
}

/// Exact integral of `|ℓ|` over the simplex.
pub fn abs_integral<T: Scalar>(dim: usize, values: &[T], measure: T) -> T {
    let neg: Vec<T> = values.iter().map(|&v| -v).collect();
    positive_part_integral(dim, values, measure) + positive_part_integral(dim, &neg, measure)
}

/// One polynomial piece of a distribution function: for `λ ∈ [lo, hi)` the
/// measure of a superlevel set equals `c[0] + c[1]·λ + c[2]·λ²`.
#[derive(Clone, Copy, Debug)]
pub struct DistributionPiece<T> {
    pub lo: T,
    pub hi: T,
    pub coeff: [T; 3],
}

fn push_piece<T: Scalar>(out: &mut Vec<DistributionPiece<T>>, lo: T, hi: T, coeff: [T; 3]) {
    let lo = lo.max(T::zero());
    if hi > lo {
        out.push(DistributionPiece { lo, hi, coeff });
    }
}

/// Exact quadratic piece unless it is ill conditioned.
///
/// The similarity formulas divide by the gap between vertex values; when
/// that gap is vanishing the expanded coefficients exceed the cell measure
/// by many orders and their (exactly canceling) contributions poison any
/// accumulated sum downstream. Ill conditioning implies the piece's
/// λ-window is vanishingly narrow relative to λ itself, so the stable
/// entry value, kept constant, misstates the distribution only inside
/// that window.
fn push_quadratic<T: Scalar>(
    out: &mut Vec<DistributionPiece<T>>,
    lo: T,
    hi: T,
    coeff: [T; 3],
    measure: T,
    stable_entry: T,
) {
    let magnitude = coeff[0].abs() + coeff[1].abs() * hi + coeff[2].abs() * hi * hi;
    if magnitude.is_finite() && magnitude <= cast::<T>(1e6) * measure {
        push_piece(out, lo, hi, coeff);
    } else {
        push_piece(out, lo, hi, [stable_entry, T::zero(), T::zero()]);
    }
}

/// Pieces of `λ ↦ |{ℓ > λ}|` restricted to `λ ≥ 0`.
fn superlevel_pieces<T: Scalar>(
    dim: usize,
    values: &[T],
    measure: T,
    out: &mut Vec<DistributionPiece<T>>,
) {
    let mut v = [T::zero(); 3];
    v[..values.len()].copy_from_slice(values);
    let vals = &mut v[..values.len()];
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let lo = vals[0];
    let hi = vals[dim];
    if hi <= T::zero() {
        return;
    }
    if hi == lo {
        // constant positive element
        push_piece(out, T::zero(), hi, [measure, T::zero(), T::zero()]);
        return;
    }
    match dim {
        1 => {
            push_piece(out, T::zero(), lo, [measure, T::zero(), T::zero()]);
            let d = hi - lo;
            push_quadratic(
                out,
                lo,
                hi,
                [measure * hi / d, -(measure / d), T::zero()],
                measure,
                measure,
            );
        }
        2 => {
            let mid = vals[1];
            push_piece(out, T::zero(), lo, [measure, T::zero(), T::zero()]);
            if mid > lo {
                let d = (mid - lo) * (hi - lo);
                // measure·(1 − (λ−lo)²/d)
                push_quadratic(
                    out,
                    lo,
                    mid,
                    [
                        measure * (T::one() - lo * lo / d),
                        measure * cast::<T>(2.0) * lo / d,
                        -(measure / d),
                    ],
                    measure,
                    measure,
                );
            }
            if hi > mid {
                let d = (hi - mid) * (hi - lo);
                // entry value A·(hi−mid)/(hi−lo) is a stable ratio
                let entry = measure * (hi - mid) / (hi - lo);
                // measure·(hi−λ)²/d
                push_quadratic(
                    out,
                    mid,
                    hi,
                    [
                        measure * hi * hi / d,
                        -(measure * cast::<T>(2.0) * hi / d),
                        measure / d,
                    ],
                    measure,
                    entry,
                );
            }
        }
        _ => unreachable!("only dimensions 1 and 2 are supported"),
    }
}

/// Pieces of `λ ↦ |{|ℓ| > λ}|` on `λ ≥ 0` for the affine function with the
/// given vertex values. At most six pieces are produced.
pub fn abs_distribution_pieces<T: Scalar>(
    dim: usize,
    values: &[T],
    measure: T,
    out: &mut Vec<DistributionPiece<T>>,
) {
    superlevel_pieces(dim, values, measure, out);
    let neg: Vec<T> = values.iter().map(|&v| -v).collect();
    superlevel_pieces(dim, &neg, measure, out);
}
