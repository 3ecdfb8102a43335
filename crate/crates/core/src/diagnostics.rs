//! Executable forms of the solver's a priori estimates: the truncation
//! energy monitor, space-time weak-Lᵖ norms, the renormalized weak-form
//! residual, the inf-sup constant of the space-time form, and refinement
//! studies (manufactured rates, Cauchy sequences, data sensitivity).

use std::sync::Arc;

use num_rational::Ratio;
use thiserror::Error;

use crate::fespace::{interpolate_to, lagrange_interpolate, lumped_weights, FeError, FeFunction};
use crate::levelset::{abs_distribution_pieces, DistributionPiece};
use crate::linalg::{min_generalized_singular_value, LinalgError};
use crate::mesh::{generate_interval_mesh, generate_unit_square_mesh, Mesh, MeshError, Point};
use crate::quadrature::{
    adaptive_interval_integral_vec, adaptive_simplex_integral, ElementRule, QuadratureSpec,
};
use crate::scalar::{cast, Scalar};
use crate::scheme::{
    assemble_spacetime_forms, solve, JumpInnerProduct, ProblemData, SchemeConfig, SchemeError,
    SpaceTimeFeFunction, TimePartition,
};
use crate::truncation::{nodal_truncate, theta};

pub type Rational = Ratio<i64>;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("empty field")]
    EmptyField,
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("problem data carries no analytic solution")]
    MissingAnalytic,
    #[error("trajectories are not comparable: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Dimension-dependent integrability exponents, kept as exact rationals.
///
/// - `s`: Sobolev embedding exponent H¹₀ ↪ Lˢ (2d/(d−2) for d ≥ 3,
///   configurable and defaulting to 10 for d ≤ 2),
/// - `q_bar = (d+2)/(d+1)`: supremum of the gradient convergence range,
/// - `r = 2(d+1)/d`: interpolation exponent with 2 − 2/r = q_bar,
/// - `fn_weak = (d+2)/d = r − 1`: weak-norm exponent for the function.
#[derive(Clone, Copy, Debug)]
pub struct ExponentPack {
    pub d: usize,
    pub s: Rational,
    pub q_bar: Rational,
    pub r: Rational,
    pub fn_weak: Rational,
}

impl ExponentPack {
    pub fn new(d: usize) -> Self {
        let s = if d >= 3 {
            Rational::new(2 * d as i64, d as i64 - 2)
        } else {
            Rational::from_integer(10)
        };
        Self::with_s(d, s).expect("default exponents are valid")
    }

    /// Override `s` (only meaningful for d ≤ 2, where any large value
    /// works); must exceed `r`.
    pub fn with_s(d: usize, s: Rational) -> Result<Self, DiagnosticsError> {
        if d == 0 {
            return Err(DiagnosticsError::InvalidExponent(
                "dimension must be at least 1".into(),
            ));
        }
        if d >= 3 && s != Rational::new(2 * d as i64, d as i64 - 2) {
            return Err(DiagnosticsError::InvalidExponent(format!(
                "s is fixed to 2d/(d-2) for d = {d}"
            )));
        }
        let q_bar = Rational::new(d as i64 + 2, d as i64 + 1);
        let r = Rational::new(2 * (d as i64 + 1), d as i64);
        let fn_weak = Rational::new(d as i64 + 2, d as i64);
        if s <= r {
            return Err(DiagnosticsError::InvalidExponent(format!(
                "s = {s} must exceed r = {r}"
            )));
        }
        // exact identities
        let two = Rational::from_integer(2);
        debug_assert_eq!(two - two / r, q_bar);
        debug_assert_eq!(r - Rational::from_integer(1), fn_weak);
        debug_assert!(q_bar < two);
        Ok(Self {
            d,
            s,
            q_bar,
            r,
            fn_weak,
        })
    }

    pub fn q_bar_f<T: Scalar>(&self) -> T {
        ratio_to_float(self.q_bar)
    }

    pub fn fn_weak_f<T: Scalar>(&self) -> T {
        ratio_to_float(self.fn_weak)
    }
}

fn ratio_to_float<T: Scalar>(r: Rational) -> T {
    cast::<T>(*r.numer() as f64) / cast::<T>(*r.denom() as f64)
}

/// The two data terms of the a priori bound: `f_total = ‖f‖_{L¹(Q_T)}` and
/// `u0_term = C₁ C_P ‖u₀‖_{L¹}`.
#[derive(Clone, Copy, Debug)]
pub struct MassBudget<T> {
    pub f_total: T,
    pub u0_term: T,
}

impl<T: Scalar> MassBudget<T> {
    pub fn total(&self) -> T {
        self.f_total + self.u0_term
    }
}

/// Evaluate the budget for given measured constants. The L¹ norms come
/// from metadata when present and adaptive quadrature otherwise.
pub fn mass_budget<T: Scalar>(
    data: &ProblemData<T>,
    mesh: &Mesh<T>,
    t_final: T,
    c1: T,
    cp: T,
    spec: &QuadratureSpec<T>,
) -> MassBudget<T> {
    let u0_l1 = match data.u0_l1 {
        Some(v) => v,
        None => {
            let u0 = Arc::clone(&data.u0);
            integrate_abs_over_mesh(mesh, &move |p| u0(p), spec)
        }
    };
    let f_total = if data.time_independent_rhs {
        let rhs = Arc::clone(&data.rhs);
        t_final * integrate_abs_over_mesh(mesh, &move |p| rhs(T::zero(), p), spec)
    } else {
        let rhs = Arc::clone(&data.rhs);
        let mesh_ref = mesh;
        let eval = |t: T, out: &mut [T]| {
            let r = Arc::clone(&rhs);
            out[0] = integrate_abs_over_mesh(mesh_ref, &move |p| r(t, p), spec);
        };
        let (v, _) = adaptive_interval_integral_vec(
            T::zero(),
            t_final,
            1,
            &eval,
            spec.order.max(2),
            spec.tol,
            spec.max_depth.min(12),
        );
        v[0]
    };
    MassBudget {
        f_total,
        u0_term: c1 * cp * u0_l1,
    }
}

fn integrate_abs_over_mesh<T: Scalar>(
    mesh: &Mesh<T>,
    f: &(impl Fn(Point<T>) -> T + ?Sized),
    spec: &QuadratureSpec<T>,
) -> T {
    let rule = ElementRule::new(mesh.dim(), spec.order.max(4));
    let mut acc = T::zero();
    for e in 0..mesh.n_elements() {
        let pts = mesh.element_points(e);
        let (v, _) = adaptive_simplex_integral(
            &pts,
            mesh.dim(),
            mesh.measure(e),
            &|p| f(p).abs(),
            &rule,
            spec.tol,
            spec.max_depth,
        );
        acc += v;
    }
    acc
}

/// One row of the truncation energy monitor.
#[derive(Clone, Copy, Debug)]
pub struct MonitorRow<T> {
    pub k: T,
    /// max over time nodes of Σ_z Θ_k(uⁿ(z)) ω_z
    pub theta_term: T,
    /// Σ_n τ_n ∫ |∇ L_h T_k uⁿ|²
    pub grad_term: T,
    pub lhs: T,
    /// k (F + U)
    pub bound: T,
    /// lhs / k
    pub ratio: T,
    pub pass: bool,
}

/// Monitor `‖L_hΘ_k(u)‖_{L∞(L¹)} + ∫∫|∇ L_h T_k u|² ≤ k (F + U)` over a
/// grid of truncation levels.
pub fn truncation_bound_monitor<T: Scalar>(
    u: &SpaceTimeFeFunction<T>,
    k_grid: &[T],
    budget: &MassBudget<T>,
) -> Vec<MonitorRow<T>> {
    let weights = lumped_weights(u.mesh().as_ref());
    let mut rows = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        assert!(k > T::zero(), "truncation levels must be positive");
        let mut theta_term = T::zero();
        for n in 0..=u.n_steps() {
            let state = u.state(n);
            let v: T = state
                .values()
                .iter()
                .zip(weights.weights())
                .map(|(&s, &w)| theta(k, s) * w)
                .sum();
            theta_term = theta_term.max(v);
        }
        let mut grad_term = T::zero();
        for n in 1..=u.n_steps() {
            let truncated = nodal_truncate(u.state(n), k);
            grad_term += u.partition().step(n) * truncated.h1_seminorm_sq();
        }
        let lhs = theta_term + grad_term;
        let bound = k * budget.total();
        let slack = cast::<T>(1e-12) * T::one().max(bound);
        rows.push(MonitorRow {
            k,
            theta_term,
            grad_term,
            lhs,
            bound,
            ratio: lhs / k,
            pass: lhs <= bound + slack,
        });
    }
    rows
}

/// max over time nodes of the exact L¹ norm.
pub fn linfty_l1<T: Scalar>(u: &SpaceTimeFeFunction<T>) -> T {
    (0..=u.n_steps())
        .map(|n| u.state(n).l1_norm())
        .fold(T::zero(), |m, v| m.max(v))
}

/// Bundled estimate diagnostics of one trajectory.
#[derive(Clone, Debug)]
pub struct DiagnosticsReport<T> {
    pub monitor: Vec<MonitorRow<T>>,
    pub budget: MassBudget<T>,
    pub linfty_l1: T,
    /// F + U + |Ω|/2
    pub linfty_l1_bound: T,
    pub weak_grad: T,
    pub weak_fn: T,
    pub residual: T,
    pub residual_window: T,
    /// every monitor row holds
    pub monitor_pass: bool,
    /// the max-over-time L¹ norm respects its bound (1e−8 slack)
    pub l1_bound_pass: bool,
}

/// Evaluate the full monitor suite for one solved trajectory.
pub fn diagnose<T: Scalar>(
    u: &SpaceTimeFeFunction<T>,
    data: &ProblemData<T>,
    k_grid: &[T],
    budget: MassBudget<T>,
    window: TruncationWindow<T>,
    spec: &QuadratureSpec<T>,
) -> Result<DiagnosticsReport<T>, DiagnosticsError> {
    let pack = ExponentPack::new(u.mesh().dim());
    let monitor = truncation_bound_monitor(u, k_grid, &budget);
    let l1 = linfty_l1(u);
    let l1_bound = budget.total() + cast::<T>(0.5) * u.mesh().domain_measure();
    let test = TestField::builtin(u.mesh(), u.partition().t_final())?;
    let residual = renormalized_residual(u, data, window, &test, spec)?;
    Ok(DiagnosticsReport {
        monitor_pass: monitor.iter().all(|r| r.pass),
        l1_bound_pass: l1 <= l1_bound + cast::<T>(1e-8),
        monitor,
        budget,
        linfty_l1: l1,
        linfty_l1_bound: l1_bound,
        weak_grad: gradient_weak_norm(u, pack.q_bar_f()),
        weak_fn: function_weak_norm(u, pack.fn_weak_f()),
        residual,
        residual_window: window.k,
    })
}

/// Weak-Lᵖ norm of a nonnegative piecewise-constant field given as
/// (value, measure) pairs:
///
///   sup over λ>0 of λ · (total measure where value > λ)^{1/p},
///
/// attained approaching a data value from below, hence computed exactly at
/// the sorted distinct values.
pub fn weak_norm<T: Scalar>(field: &[(T, T)], p: T) -> Result<T, DiagnosticsError> {
    if field.is_empty() {
        return Err(DiagnosticsError::EmptyField);
    }
    assert!(p >= T::one(), "weak norm exponent must be at least 1");
    let mut sorted: Vec<(T, T)> = field
        .iter()
        .copied()
        .inspect(|&(v, m)| {
            assert!(v >= T::zero() && m >= T::zero(), "field entries must be nonnegative")
        })
        .collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let inv_p = T::one() / p;
    let mut best = T::zero();
    let mut acc = T::zero();
    let mut i = 0usize;
    while i < sorted.len() {
        let v = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == v {
            acc += sorted[i].1;
            i += 1;
        }
        if v > T::zero() {
            best = best.max(v * acc.powf(inv_p));
        }
    }
    Ok(best)
}

/// Weak-Lᵖ norm of |∇u| over the space-time cylinder. The gradient is
/// constant per element and per step, so the field is exactly piecewise
/// constant.
pub fn gradient_weak_norm<T: Scalar>(u: &SpaceTimeFeFunction<T>, p: T) -> T {
    let mesh = u.mesh();
    let mut field = Vec::with_capacity(u.n_steps() * mesh.n_elements());
    for n in 1..=u.n_steps() {
        let tau = u.partition().step(n);
        let state = u.state(n);
        for e in 0..mesh.n_elements() {
            let g = state.element_gradient(e);
            let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
            field.push((mag, tau * mesh.measure(e)));
        }
    }
    weak_norm(&field, p).unwrap_or_else(|_| T::zero())
}

/// Weak-Lᵖ norm of |u| over the space-time cylinder, exact for the
/// piecewise linear in space / piecewise constant in time trajectory
/// above a relative level floor.
///
/// The distribution function λ ↦ |{|u| > λ}| is piecewise quadratic with
/// breakpoints at the nodal magnitudes; the sup of λ·μ(λ)^{1/p} is taken
/// over interval endpoints and interior stationary points of λᵖ·μ(λ).
/// Levels below `1e−6 · max|u|` are ignored: curvature coefficients of the
/// distribution at λ-scales that far apart cannot share accumulators in
/// floating point, and the ignored region contributes at most
/// `floor · |Q_T|^{1/p}` to the sup.
pub fn function_weak_norm<T: Scalar>(u: &SpaceTimeFeFunction<T>, p: T) -> T {
    assert!(p >= T::one(), "weak norm exponent must be at least 1");
    let mesh = u.mesh();
    let dim = mesh.dim();

    let gmax = (1..=u.n_steps())
        .map(|n| u.state(n).max_abs_nodal())
        .fold(T::zero(), |m, v| m.max(v));
    if gmax == T::zero() {
        return T::zero();
    }
    let floor = gmax * cast::<T>(1e-6);

    // breakpoints: the floor plus all nodal magnitudes above it
    let mut breakpoints: Vec<T> = Vec::with_capacity(u.n_steps() * mesh.n_vertices() + 1);
    breakpoints.push(floor);
    for n in 1..=u.n_steps() {
        for &v in u.state(n).values() {
            if v.abs() > floor {
                breakpoints.push(v.abs());
            }
        }
    }
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breakpoints.dedup();
    if breakpoints.len() < 2 {
        return T::zero();
    }
    let m = breakpoints.len();
    // difference arrays for the three quadratic coefficients
    let mut diff = vec![[T::zero(); 3]; m];
    let mut pieces: Vec<DistributionPiece<T>> = Vec::new();
    let mut vals = [T::zero(); 3];
    for n in 1..=u.n_steps() {
        let tau = u.partition().step(n);
        let state = u.state(n);
        for e in 0..mesh.n_elements() {
            let conn = mesh.element(e);
            for (k, &z) in conn.iter().enumerate() {
                vals[k] = state.values()[z];
            }
            pieces.clear();
            abs_distribution_pieces(
                dim,
                &vals[..conn.len()],
                tau * mesh.measure(e),
                &mut pieces,
            );
            for piece in &pieces {
                if piece.hi <= floor {
                    continue;
                }
                let lo = index_of(&breakpoints, piece.lo.max(floor));
                let hi = index_of(&breakpoints, piece.hi);
                for c in 0..3 {
                    diff[lo][c] += piece.coeff[c];
                    diff[hi][c] -= piece.coeff[c];
                }
            }
        }
    }

    let inv_p = T::one() / p;
    let eval = |coeff: [T; 3], lambda: T| -> T {
        let mu = (coeff[0] + coeff[1] * lambda + coeff[2] * lambda * lambda).max(T::zero());
        lambda * mu.powf(inv_p)
    };
    let mut best = T::zero();
    let mut coeff = [T::zero(); 3];
    for i in 0..m - 1 {
        for c in 0..3 {
            coeff[c] += diff[i][c];
        }
        let (lo, hi) = (breakpoints[i], breakpoints[i + 1]);
        if lo > T::zero() {
            best = best.max(eval(coeff, lo));
        }
        best = best.max(eval(coeff, hi));
        // stationary points of λᵖ μ(λ): p c0 + (p+1) c1 λ + (p+2) c2 λ² = 0
        let a = (p + cast::<T>(2.0)) * coeff[2];
        let b = (p + T::one()) * coeff[1];
        let c0 = p * coeff[0];
        if a.abs() > T::zero() {
            let disc = b * b - cast::<T>(4.0) * a * c0;
            if disc >= T::zero() {
                let sq = disc.sqrt();
                for root in [(-b + sq) / (cast::<T>(2.0) * a), (-b - sq) / (cast::<T>(2.0) * a)] {
                    if root > lo && root < hi {
                        best = best.max(eval(coeff, root));
                    }
                }
            }
        } else if b.abs() > T::zero() {
            let root = -c0 / b;
            if root > lo && root < hi {
                best = best.max(eval(coeff, root));
            }
        }
    }
    best
}

fn index_of<T: Scalar>(sorted: &[T], value: T) -> usize {
    sorted
        .binary_search_by(|probe| probe.partial_cmp(&value).unwrap())
        .expect("piece boundaries are collected as breakpoints")
}

/// Space-time L^q norm of the gradient,
/// (Σ_n τ_n Σ_K |K| |∇uⁿ|_K^q)^{1/q}.
pub fn grad_lq_norm<T: Scalar>(u: &SpaceTimeFeFunction<T>, q: T) -> T {
    let mesh = u.mesh();
    let mut acc = T::zero();
    for n in 1..=u.n_steps() {
        let tau = u.partition().step(n);
        let state = u.state(n);
        for e in 0..mesh.n_elements() {
            let g = state.element_gradient(e);
            let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
            acc += tau * mesh.measure(e) * mag.powf(q);
        }
    }
    acc.powf(T::one() / q)
}

/// Lipschitz window: 1 on [−k, k], linear down to 0 at |s| = k + 1.
#[derive(Clone, Copy, Debug)]
pub struct TruncationWindow<T> {
    pub k: T,
}

impl<T: Scalar> TruncationWindow<T> {
    pub fn new(k: T) -> Self {
        assert!(k > T::zero(), "window level must be positive");
        Self { k }
    }

    pub fn eta(&self, s: T) -> T {
        let a = s.abs();
        if a <= self.k {
            T::one()
        } else if a >= self.k + T::one() {
            T::zero()
        } else {
            self.k + T::one() - a
        }
    }

    pub fn eta_prime(&self, s: T) -> T {
        let a = s.abs();
        if a <= self.k || a >= self.k + T::one() {
            T::zero()
        } else if s > T::zero() {
            -T::one()
        } else {
            T::one()
        }
    }

    /// Antiderivative N with N(0) = 0 and N′ = η.
    pub fn primitive(&self, s: T) -> T {
        let a = s.abs();
        let half = cast::<T>(0.5);
        let v = if a <= self.k {
            a
        } else if a >= self.k + T::one() {
            self.k + half
        } else {
            let e = a - self.k;
            self.k + e - half * e * e
        };
        v * s.signum()
    }
}

/// Separable space-time test function v(t, x) = ψ(t)·φ_h(x) with
/// ψ(0) = ψ(T) = 0 and φ_h a fixed smooth profile interpolated into the
/// zero-trace P1 space.
pub struct TestField<T> {
    pub phi: FeFunction<T>,
    t_final: T,
}

impl<T: Scalar> TestField<T> {
    /// Built-in profile: product sine in space,
    /// ψ(t) = 16 t²(T−t)²/T⁴ in time.
    pub fn builtin(mesh: &Arc<Mesh<T>>, t_final: T) -> Result<Self, DiagnosticsError> {
        let pi = cast::<T>(std::f64::consts::PI);
        let dim = mesh.dim();
        let phi = lagrange_interpolate(
            mesh,
            move |p: Point<T>| {
                if dim == 1 {
                    (pi * p[0]).sin()
                } else {
                    (pi * p[0]).sin() * (pi * p[1]).sin()
                }
            },
            true,
        )?;
        Ok(Self { phi, t_final })
    }

    pub fn psi(&self, t: T) -> T {
        let tt = self.t_final;
        cast::<T>(16.0) * t * t * (tt - t) * (tt - t) / tt.powi(4)
    }

    /// Antiderivative of ψ vanishing at 0.
    pub fn psi_antiderivative(&self, t: T) -> T {
        let tt = self.t_final;
        let three = cast::<T>(3.0);
        let two = cast::<T>(2.0);
        let five = cast::<T>(5.0);
        cast::<T>(16.0) / tt.powi(4)
            * (tt * tt * t.powi(3) / three - tt * t.powi(4) / two + t.powi(5) / five)
    }
}

/// Weak-form residual of the trajectory tested with η(u)·v:
///
/// ```text
/// −∫∫ N(u) ∂_t v + ∫∫ ∇u · (η(u)∇v + η′(u) v ∇u) − ∫∫ f η(u) v
/// ```
///
/// with N′ = η. For a window far above max |u| this reduces to the plain
/// weak-form residual.
pub fn renormalized_residual<T: Scalar>(
    u: &SpaceTimeFeFunction<T>,
    data: &ProblemData<T>,
    window: TruncationWindow<T>,
    test: &TestField<T>,
    spec: &QuadratureSpec<T>,
) -> Result<T, DiagnosticsError> {
    let mesh = u.mesh();
    let dim = mesh.dim();
    let rule = ElementRule::new(dim, spec.order.max(4));
    let phi = &test.phi;

    let mut residual = T::zero();
    for n in 1..=u.n_steps() {
        let t_prev = u.partition().node(n - 1);
        let t_cur = u.partition().node(n);
        let state = u.state(n);

        // ∫_{I_n} ψ′ dt and ∫_{I_n} ψ dt are exact
        let dpsi = test.psi(t_cur) - test.psi(t_prev);
        let ipsi = test.psi_antiderivative(t_cur) - test.psi_antiderivative(t_prev);

        let mut n_term = T::zero(); // ∫ N(uⁿ) φ_h
        let mut grad_term = T::zero(); // ∫ η(uⁿ)∇uⁿ·∇φ_h + η′(uⁿ) φ_h |∇uⁿ|²
        for e in 0..mesh.n_elements() {
            let conn = mesh.element(e);
            let gu = state.element_gradient(e);
            let gphi = phi.element_gradient(e);
            let gdot = gu[0] * gphi[0] + gu[1] * gphi[1];
            let gsq = gu[0] * gu[0] + gu[1] * gu[1];
            let mut acc_n = T::zero();
            let mut acc_g = T::zero();
            for (b, &w) in rule.bary.iter().zip(rule.weights.iter()) {
                let mut uv = T::zero();
                let mut pv = T::zero();
                for (k, &z) in conn.iter().enumerate() {
                    uv += b[k] * state.values()[z];
                    pv += b[k] * phi.values()[z];
                }
                acc_n += w * window.primitive(uv) * pv;
                acc_g += w * (window.eta(uv) * gdot + window.eta_prime(uv) * pv * gsq);
            }
            n_term += mesh.measure(e) * acc_n;
            grad_term += mesh.measure(e) * acc_g;
        }
        residual += -dpsi * n_term + ipsi * grad_term;

        // − ∫_{I_n} ψ ∫ f η(uⁿ) φ_h
        let rhs = Arc::clone(&data.rhs);
        let spatial = |t: T| -> T {
            let mut acc = T::zero();
            for e in 0..mesh.n_elements() {
                let conn = mesh.element(e);
                let pts = mesh.element_points(e);
                let sv: Vec<T> = conn.iter().map(|&z| state.values()[z]).collect();
                let pv: Vec<T> = conn.iter().map(|&z| phi.values()[z]).collect();
                let f = |p: Point<T>| {
                    let bary = bary_of(&pts, dim, p);
                    let mut uu = T::zero();
                    let mut pp = T::zero();
                    for k in 0..conn.len() {
                        uu += bary[k] * sv[k];
                        pp += bary[k] * pv[k];
                    }
                    rhs(t, p) * window.eta(uu) * pp
                };
                let (v, _) = adaptive_simplex_integral(
                    &pts,
                    dim,
                    mesh.measure(e),
                    &f,
                    &rule,
                    spec.tol,
                    spec.max_depth,
                );
                acc += v;
            }
            acc
        };
        if data.time_independent_rhs {
            residual -= ipsi * spatial(T::zero());
        } else {
            let eval = |t: T, out: &mut [T]| out[0] = test.psi(t) * spatial(t);
            let (v, _) = adaptive_interval_integral_vec(
                t_prev,
                t_cur,
                1,
                &eval,
                spec.order.max(4),
                spec.tol,
                spec.max_depth.min(8),
            );
            residual -= v[0];
        }
    }
    Ok(residual)
}

fn bary_of<T: Scalar>(pts: &[Point<T>], dim: usize, p: Point<T>) -> [T; 3] {
    match dim {
        1 => {
            let t = (p[0] - pts[0][0]) / (pts[1][0] - pts[0][0]);
            [T::one() - t, t, T::zero()]
        }
        _ => {
            let a = pts[0];
            let b = pts[1];
            let c = pts[2];
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
            [T::one() - l1 - l2, l1, l2]
        }
    }
}

/// Inf-sup constant of the space-time form with respect to the trial and
/// test norms, as the smallest generalized singular value.
pub fn infsup_constant<T: Scalar>(
    mesh: &Mesh<T>,
    partition: &TimePartition<T>,
    variant: JumpInnerProduct,
    dof_cap: usize,
) -> Result<T, DiagnosticsError> {
    let forms = assemble_spacetime_forms(mesh, partition, variant, dof_cap)?;
    Ok(min_generalized_singular_value(
        &forms.b, &forms.nx, &forms.ny,
    )?)
}

/// Generate the built-in mesh of the given dimension.
pub fn generate_mesh<T: Scalar>(dim: usize, n: usize) -> Result<Arc<Mesh<T>>, MeshError> {
    match dim {
        1 => Ok(Arc::new(generate_interval_mesh(n)?)),
        2 => Ok(Arc::new(generate_unit_square_mesh(n)?)),
        other => Err(MeshError::InvalidArgument(format!(
            "dimension must be 1 or 2, got {other}"
        ))),
    }
}

/// One refinement level of a manufactured-solution study.
#[derive(Clone, Copy, Debug)]
pub struct RateRow<T> {
    pub n: usize,
    pub nt: usize,
    pub h: T,
    pub tau_max: T,
    pub err_linf_l2: T,
    pub err_l2_h1: T,
}

/// Errors against the analytic solution over a refinement ladder plus
/// least-squares orders in h.
#[derive(Clone, Debug)]
pub struct RateTable<T> {
    pub rows: Vec<RateRow<T>>,
    pub order_linf_l2: T,
    pub order_l2_h1: T,
}

/// Solve on every (n, nt) ladder level and measure errors against the
/// analytic solution: max-over-nodes L² error and the space-time L²
/// gradient error.
pub fn convergence_study<T: Scalar>(
    data: &ProblemData<T>,
    dim: usize,
    ladder: &[(usize, usize)],
    t_final: T,
    config: &SchemeConfig<T>,
) -> Result<RateTable<T>, DiagnosticsError> {
    let analytic = data.analytic.clone().ok_or(DiagnosticsError::MissingAnalytic)?;
    if ladder.is_empty() {
        return Err(DiagnosticsError::InvalidExponent("empty ladder".into()));
    }
    let mut rows = Vec::with_capacity(ladder.len());
    for &(n, nt) in ladder {
        let mesh = generate_mesh::<T>(dim, n)?;
        let partition = Arc::new(crate::scheme::build_partition(
            t_final,
            nt,
            crate::scheme::Grading::Uniform,
        )?);
        let u = solve(data, &mesh, &partition, config)?;

        let rule = ElementRule::new(dim, 6);
        let (gauss_t, gauss_w) = crate::quadrature::gauss_legendre::<T>(2);

        let mut linf_l2 = T::zero();
        for m in 0..=u.n_steps() {
            let t = partition.node(m);
            let state = u.state(m);
            let ua = Arc::clone(&analytic.u);
            let mut err2 = T::zero();
            for e in 0..mesh.n_elements() {
                let pts = mesh.element_points(e);
                let conn = mesh.element(e);
                let mut acc = T::zero();
                for (b, &w) in rule.bary.iter().zip(rule.weights.iter()) {
                    let p = crate::quadrature::bary_to_point(&pts, b);
                    let mut uh = T::zero();
                    for (k, &z) in conn.iter().enumerate() {
                        uh += b[k] * state.values()[z];
                    }
                    let d = uh - ua(t, p);
                    acc += w * d * d;
                }
                err2 += mesh.measure(e) * acc;
            }
            linf_l2 = linf_l2.max(err2.sqrt());
        }

        let mut l2h1 = T::zero();
        for m in 1..=u.n_steps() {
            let t0 = partition.node(m - 1);
            let tau = partition.step(m);
            let state = u.state(m);
            let ga = Arc::clone(&analytic.grad);
            for (&tg, &tw) in gauss_t.iter().zip(gauss_w.iter()) {
                let t = t0 + tau * tg;
                for e in 0..mesh.n_elements() {
                    let pts = mesh.element_points(e);
                    let gh = state.element_gradient(e);
                    let mut acc = T::zero();
                    for (b, &w) in rule.bary.iter().zip(rule.weights.iter()) {
                        let p = crate::quadrature::bary_to_point(&pts, b);
                        let ge = ga(t, p);
                        let dx = gh[0] - ge[0];
                        let dy = gh[1] - ge[1];
                        acc += w * (dx * dx + dy * dy);
                    }
                    l2h1 += tau * tw * mesh.measure(e) * acc;
                }
            }
        }

        rows.push(RateRow {
            n,
            nt,
            h: mesh.mesh_size(),
            tau_max: (1..=partition.n_steps())
                .map(|k| partition.step(k))
                .fold(T::zero(), |m, v| m.max(v)),
            err_linf_l2: linf_l2,
            err_l2_h1: l2h1.sqrt(),
        });
    }

    let order_linf_l2 = ls_order(&rows, |r| r.err_linf_l2);
    let order_l2_h1 = ls_order(&rows, |r| r.err_l2_h1);
    Ok(RateTable {
        rows,
        order_linf_l2,
        order_l2_h1,
    })
}

fn ls_order<T: Scalar>(rows: &[RateRow<T>], err: impl Fn(&RateRow<T>) -> T) -> T {
    // least-squares slope of log err against log h
    let pts: Vec<(T, T)> = rows
        .iter()
        .filter(|r| err(r) > T::zero())
        .map(|r| (r.h.ln(), err(r).ln()))
        .collect();
    if pts.len() < 2 {
        return T::zero();
    }
    let nf = cast::<T>(pts.len() as f64);
    let sx: T = pts.iter().map(|p| p.0).sum();
    let sy: T = pts.iter().map(|p| p.1).sum();
    let sxx: T = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: T = pts.iter().map(|p| p.0 * p.1).sum();
    (nf * sxy - sx * sy) / (nf * sxx - sx * sx)
}

/// One consecutive-level comparison of a Cauchy study.
#[derive(Clone, Copy, Debug)]
pub struct CauchyRow<T> {
    pub n_coarse: usize,
    pub n_fine: usize,
    /// max over fine time nodes of ‖u_f − Π u_c‖_{L¹}
    pub diff_linf_l1: T,
    /// ‖∇(u_f − Π u_c)‖ in the space-time L^q norm
    pub diff_lq_w1q: T,
}

/// Differences between consecutive refinement levels for fixed data; the
/// coarse solution is carried to the fine mesh by nodal interpolation and
/// compared at the fine time nodes under the piecewise-constant-in-time
/// semantics.
pub fn cauchy_study<T: Scalar>(
    data: &ProblemData<T>,
    dim: usize,
    ladder: &[(usize, usize)],
    t_final: T,
    q: T,
    config: &SchemeConfig<T>,
) -> Result<Vec<CauchyRow<T>>, DiagnosticsError> {
    let pack = ExponentPack::new(dim);
    let q_bar: T = pack.q_bar_f();
    if !(q >= T::one() && q < q_bar) {
        return Err(DiagnosticsError::InvalidExponent(format!(
            "q = {q} must lie in [1, q_bar) with q_bar = (d+2)/(d+1) = {}",
            q_bar
        )));
    }
    if ladder.len() < 2 {
        return Err(DiagnosticsError::InvalidExponent(
            "a Cauchy study needs at least two levels".into(),
        ));
    }
    let mut solutions = Vec::with_capacity(ladder.len());
    for &(n, nt) in ladder {
        let mesh = generate_mesh::<T>(dim, n)?;
        let partition = Arc::new(crate::scheme::build_partition(
            t_final,
            nt,
            crate::scheme::Grading::Uniform,
        )?);
        solutions.push(solve(data, &mesh, &partition, config)?);
    }

    let mut rows = Vec::with_capacity(ladder.len() - 1);
    for w in solutions.windows(2) {
        let coarse = &w[0];
        let fine = &w[1];
        let fine_mesh = fine.mesh();
        let mut linf_l1 = T::zero();
        let mut lq = T::zero();
        for m in 0..=fine.n_steps() {
            let t = fine.partition().node(m);
            let coarse_state = coarse.at_time(t)?;
            let carried = interpolate_to(coarse_state, fine_mesh)?;
            let diff = fine.state(m).combine(T::one(), &carried, -T::one())?;
            linf_l1 = linf_l1.max(diff.l1_norm());
            if m >= 1 {
                let tau = fine.partition().step(m);
                for e in 0..fine_mesh.n_elements() {
                    let g = diff.element_gradient(e);
                    let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
                    lq += tau * fine_mesh.measure(e) * mag.powf(q);
                }
            }
        }
        rows.push(CauchyRow {
            n_coarse: coarse_mesh_n(coarse),
            n_fine: coarse_mesh_n(fine),
            diff_linf_l1: linf_l1,
            diff_lq_w1q: lq.powf(T::one() / q),
        });
    }
    Ok(rows)
}

fn coarse_mesh_n<T: Scalar>(u: &SpaceTimeFeFunction<T>) -> usize {
    match u.mesh().kind() {
        crate::mesh::MeshKind::Interval { n } => n,
        crate::mesh::MeshKind::UnitSquare { n } => n,
        crate::mesh::MeshKind::General => 0,
    }
}

/// L∞(L¹) and gradient-L^q distances between two trajectories on the same
/// mesh and partition (used by data-sensitivity studies).
pub fn trajectory_difference_norms<T: Scalar>(
    a: &SpaceTimeFeFunction<T>,
    b: &SpaceTimeFeFunction<T>,
    q: T,
) -> Result<(T, T), DiagnosticsError> {
    if a.n_steps() != b.n_steps() || a.mesh().n_vertices() != b.mesh().n_vertices() {
        return Err(DiagnosticsError::Incompatible(
            "trajectories differ in mesh or partition".into(),
        ));
    }
    let diff = a.combine(T::one(), b, -T::one())?;
    Ok((linfty_l1(&diff), grad_lq_norm(&diff, q)))
}
