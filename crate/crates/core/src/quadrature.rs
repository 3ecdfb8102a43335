//! Gauss quadrature on intervals and triangles, with globally adaptive
//! subdivision for integrands that are singular but integrable.
//!
//! Adaptivity keeps a worklist of cells ordered by local error estimate
//! (coarse rule versus the sum over the cell's children) and refines the
//! worst cell until the global estimate drops below the tolerance, the
//! per-cell depth cap is hit, or the cell budget runs out. The returned
//! error estimate is the sum of the unconverged local estimates.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::scalar::{cast, Scalar};

/// Global cell budget per adaptive integral.
const MAX_CELLS: usize = 200_000;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("quadrature did not reach tolerance {tol}: estimated error {estimate} after depth {depth}")]
    NotConverged { tol: f64, estimate: f64, depth: usize },
    #[error("invalid quadrature parameter: {0}")]
    InvalidParameter(String),
}

/// Quadrature parameters.
///
/// `order` is the polynomial exactness degree of the base rule. Adaptive
/// integration subdivides until the global correction falls below `tol`
/// (absolute, per top-level element) or cells reach `max_depth`; whatever
/// correction remains is reported as the error estimate.
#[derive(Clone, Debug)]
pub struct QuadratureSpec<T> {
    pub order: usize,
    pub tol: T,
    pub max_depth: usize,
}

impl<T: Scalar> Default for QuadratureSpec<T> {
    fn default() -> Self {
        Self {
            order: 4,
            tol: cast(1e-9),
            max_depth: 20,
        }
    }
}

impl<T: Scalar> QuadratureSpec<T> {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }
}

/// Gauss-Legendre nodes and weights on [0, 1]; weights sum to one.
pub fn gauss_legendre<T: Scalar>(points: usize) -> (Vec<T>, Vec<T>) {
    assert!(points >= 1, "need at least one quadrature point");
    let n = points;
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    for i in 0..n {
        // initial guess on [-1, 1], then Newton on P_n
        let mut x = cast::<T>(
            (std::f64::consts::PI * (4.0 * i as f64 + 3.0) / (4.0 * n as f64 + 2.0)).cos(),
        );
        let mut dp = T::zero();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= T::epsilon() * cast::<T>(4.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        nodes[i] = (x + T::one()) / cast::<T>(2.0);
        // standard weight 2/((1-x²)P'ₙ(x)²), halved by the [0,1] map
        weights[i] = T::one() / ((T::one() - x * x) * dp * dp);
    }
    // sort ascending for reproducibility
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nodes[a].partial_cmp(&nodes[b]).unwrap());
    let nodes_sorted: Vec<T> = idx.iter().map(|&i| nodes[i]).collect();
    let weights_sorted: Vec<T> = idx.iter().map(|&i| weights[i]).collect();
    (nodes_sorted, weights_sorted)
}

fn legendre_with_derivative<T: Scalar>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    if n == 0 {
        return (p0, T::zero());
    }
    for k in 2..=n {
        let kf = cast::<T>(k as f64);
        let p2 = ((cast::<T>(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = cast::<T>(n as f64) * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Quadrature rule on the reference simplex, stored in barycentric
/// coordinates with weights normalized to sum to one. The physical
/// integral is `measure(K) · Σ w_g f(x_g)`.
#[derive(Clone, Debug)]
pub struct ElementRule<T> {
    pub dim: usize,
    pub bary: Vec<[T; 3]>,
    pub weights: Vec<T>,
}

impl<T: Scalar> ElementRule<T> {
    /// Rule exact for polynomials of total degree `order`.
    pub fn new(dim: usize, order: usize) -> Self {
        match dim {
            1 => {
                let m = order / 2 + 1;
                let (x, w) = gauss_legendre::<T>(m);
                let bary = x.iter().map(|&t| [T::one() - t, t, T::zero()]).collect();
                Self {
                    dim,
                    bary,
                    weights: w,
                }
            }
            2 => {
                // Duffy transform of a tensor Gauss rule: x = u(1-v), y = uv
                // with Jacobian u. A monomial of total degree p pulls back to
                // u-degree p + 1, so m per axis handles total degree 2m - 2.
                let m = (order + 3) / 2;
                let (x, w) = gauss_legendre::<T>(m);
                let mut bary = Vec::with_capacity(m * m);
                let mut weights = Vec::with_capacity(m * m);
                for (i, &u) in x.iter().enumerate() {
                    for (j, &v) in x.iter().enumerate() {
                        let xx = u * (T::one() - v);
                        let yy = u * v;
                        bary.push([T::one() - xx - yy, xx, yy]);
                        // reference-triangle weight u·wᵢwⱼ integrates to 1/2;
                        // normalize so the weights sum to one
                        weights.push(cast::<T>(2.0) * u * w[i] * w[j]);
                    }
                }
                Self { dim, bary, weights }
            }
            _ => panic!("only dimensions 1 and 2 are supported"),
        }
    }
}

/// Physical quadrature point for barycentric coordinates on a simplex.
#[inline]
pub fn bary_to_point<T: Scalar>(pts: &[[T; 2]], bary: &[T; 3]) -> [T; 2] {
    let mut out = [T::zero(); 2];
    for (p, &l) in pts.iter().zip(bary.iter()) {
        out[0] += l * p[0];
        out[1] += l * p[1];
    }
    out
}

type Cell<T> = ([[T; 2]; 3], T); // corner points (third unused in 1D), measure

fn split_cell<T: Scalar>(pts: &[[T; 2]; 3], measure: T, dim: usize) -> Vec<Cell<T>> {
    let half = cast::<T>(0.5);
    let mid = |a: [T; 2], b: [T; 2]| [(a[0] + b[0]) * half, (a[1] + b[1]) * half];
    match dim {
        1 => {
            let m = mid(pts[0], pts[1]);
            let hm = measure * half;
            vec![
                ([pts[0], m, pts[2]], hm),
                ([m, pts[1], pts[2]], hm),
            ]
        }
        2 => {
            let m01 = mid(pts[0], pts[1]);
            let m12 = mid(pts[1], pts[2]);
            let m02 = mid(pts[0], pts[2]);
            let qm = measure * cast::<T>(0.25);
            vec![
                ([pts[0], m01, m02], qm),
                ([m01, pts[1], m12], qm),
                ([m02, m12, pts[2]], qm),
                ([m01, m12, m02], qm),
            ]
        }
        _ => unreachable!(),
    }
}

/// Worklist item: a cell together with its refined value (sum over its
/// children) and local error estimate.
struct WorkItem<T> {
    err: T,
    seq: usize,
    depth: usize,
    refined: Vec<T>,
    children: Vec<(Cell<T>, Vec<T>)>,
}

impl<T: Scalar> PartialEq for WorkItem<T> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl<T: Scalar> Eq for WorkItem<T> {}
impl<T: Scalar> PartialOrd for WorkItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for WorkItem<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .partial_cmp(&other.err)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

/// Globally adaptive integration of a vector-valued integrand over one
/// simplex; scalar integrands use `nvals = 1` through the wrappers below.
fn adaptive_core<T: Scalar, F: Fn([T; 2], &mut [T])>(
    pts: &[[T; 2]; 3],
    dim: usize,
    measure: T,
    nvals: usize,
    f: &F,
    rule: &ElementRule<T>,
    tol: T,
    max_depth: usize,
) -> (Vec<T>, T) {
    let rule_sum = |cell: &Cell<T>, out: &mut [T]| {
        out.iter_mut().for_each(|v| *v = T::zero());
        let mut tmp = vec![T::zero(); nvals];
        for (b, &w) in rule.bary.iter().zip(rule.weights.iter()) {
            tmp.iter_mut().for_each(|v| *v = T::zero());
            f(bary_to_point(&cell.0[..dim + 1], b), &mut tmp);
            for (o, &t) in out.iter_mut().zip(tmp.iter()) {
                *o += w * t;
            }
        }
        out.iter_mut().for_each(|v| *v *= cell.1);
    };

    let mut seq = 0usize;
    let mut make_item = |cell: Cell<T>, depth: usize, coarse: Option<Vec<T>>| -> WorkItem<T> {
        let parent = match coarse {
            Some(c) => c,
            None => {
                let mut p = vec![T::zero(); nvals];
                rule_sum(&cell, &mut p);
                p
            }
        };
        let children_cells = split_cell(&cell.0, cell.1, dim);
        let mut refined = vec![T::zero(); nvals];
        let mut children = Vec::with_capacity(children_cells.len());
        let mut buf = vec![T::zero(); nvals];
        for c in children_cells {
            rule_sum(&c, &mut buf);
            for (r, &b) in refined.iter_mut().zip(buf.iter()) {
                *r += b;
            }
            children.push((c, buf.clone()));
        }
        let err = max_abs_diff(&refined, &parent);
        seq += 1;
        WorkItem {
            err,
            seq,
            depth,
            refined,
            children,
        }
    };

    let root = make_item((*pts, measure), 0, None);
    let mut total = root.refined.clone();
    let mut total_err = root.err;
    let mut frozen_err = T::zero();
    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut cells = 1usize;

    while total_err + frozen_err > tol && cells < MAX_CELLS {
        let Some(item) = heap.pop() else { break };
        total_err -= item.err;
        if item.depth >= max_depth || item.err <= T::zero() {
            frozen_err += item.err;
            continue;
        }
        // replace the item's refined contribution by its children's
        for (v, &r) in total.iter_mut().zip(item.refined.iter()) {
            *v -= r;
        }
        for (cell, coarse) in item.children {
            let child = make_item(cell, item.depth + 1, Some(coarse));
            for (v, &r) in total.iter_mut().zip(child.refined.iter()) {
                *v += r;
            }
            total_err += child.err;
            heap.push(child);
            cells += 1;
        }
    }
    (total, total_err + frozen_err)
}

/// Adaptive integral of `f` over one simplex (`pts` has `dim + 1` used
/// entries). Returns the value and the remaining error estimate.
pub fn adaptive_simplex_integral<T: Scalar, F: Fn([T; 2]) -> T>(
    pts: &[[T; 2]],
    dim: usize,
    measure: T,
    f: &F,
    rule: &ElementRule<T>,
    tol: T,
    max_depth: usize,
) -> (T, T) {
    let mut corners = [[T::zero(); 2]; 3];
    corners[..pts.len()].copy_from_slice(pts);
    let wrap = |p: [T; 2], out: &mut [T]| out[0] = f(p);
    let (v, e) = adaptive_core(&corners, dim, measure, 1, &wrap, rule, tol, max_depth);
    (v[0], e)
}

/// Adaptive integral of a small vector-valued integrand over one simplex
/// (used for per-element load contributions). The convergence criterion
/// uses the max-norm of the correction.
pub fn adaptive_simplex_integral_vec<T: Scalar, F: Fn([T; 2], &mut [T])>(
    pts: &[[T; 2]],
    dim: usize,
    measure: T,
    nvals: usize,
    f: &F,
    rule: &ElementRule<T>,
    tol: T,
    max_depth: usize,
) -> (Vec<T>, T) {
    let mut corners = [[T::zero(); 2]; 3];
    corners[..pts.len()].copy_from_slice(pts);
    adaptive_core(&corners, dim, measure, nvals, f, rule, tol, max_depth)
}

/// Adaptive integral of a vector-valued function of one (time) variable
/// over `[a, b]`.
pub fn adaptive_interval_integral_vec<T: Scalar, F: Fn(T, &mut [T])>(
    a: T,
    b: T,
    nvals: usize,
    f: &F,
    order: usize,
    tol: T,
    max_depth: usize,
) -> (Vec<T>, T) {
    let rule = ElementRule::new(1, order);
    let corners = [[a, T::zero()], [b, T::zero()], [T::zero(); 2]];
    let wrap = |p: [T; 2], out: &mut [T]| f(p[0], out);
    adaptive_core(&corners, 1, b - a, nvals, &wrap, &rule, tol, max_depth)
}
