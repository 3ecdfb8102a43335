//! Time discretization: the mass-lumped implicit Euler scheme, the
//! piecewise-constant-in-time trajectory type with its reconstruction and
//! jumps, the trial/test space-time norms, the step-size condition for
//! inf-sup stability, and dense assembly of the space-time bilinear form
//! for inf-sup diagnostics.
//!
//! One time step solves, on the interior vertices,
//!
//! ```text
//! (D/τ + A) uⁿ = (D/τ) uⁿ⁻¹ + bⁿ,   bⁿ_z = ∫ fⁿ φ_z,
//! ```
//!
//! with `D` the lumped mass diagonal, `A` the stiffness matrix and
//! `fⁿ` the time average of the right hand side over the step.

use std::sync::Arc;

use thiserror::Error;

use crate::fespace::{
    assemble_mass, assemble_stiffness, estimate_lumping_constants, l2_project, load_vector,
    lumped_weights, FeError, FeFunction, LumpedWeights,
};
use crate::linalg::{cg_solve, CsrMatrix, DenseMatrix, LinalgError};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{adaptive_interval_integral_vec, QuadratureSpec};
use crate::rng::DEFAULT_SEED;
use crate::scalar::{cast, Scalar};

/// Dense space-time assembly is a desk-scale diagnostic; refuse beyond this.
pub const SPACETIME_DOF_CAP: usize = 2000;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inverse CFL condition violated: h² = {h_squared} > {bound} = min τ / (4 C_Q²) with C_Q = {cq}")]
    CflViolated { h_squared: f64, bound: f64, cq: f64 },
    #[error("time step {step} failed: {source}")]
    StepFailed { step: usize, source: LinalgError },
    #[error("time {t} outside [0, {t_final}]")]
    TimeOutOfRange { t: f64, t_final: f64 },
    #[error("jump index {n} outside 1..={n_steps}")]
    JumpIndex { n: usize, n_steps: usize },
    #[error("space-time problem has {dof} unknowns, cap is {cap}")]
    SizeCap { dof: usize, cap: usize },
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Partition 0 = t₀ < t₁ < … < t_N = T.
#[derive(Clone, Debug)]
pub struct TimePartition<T> {
    nodes: Vec<T>,
}

impl<T: Scalar> TimePartition<T> {
    pub fn new(nodes: Vec<T>) -> Result<Self, SchemeError> {
        if nodes.len() < 2 {
            return Err(SchemeError::InvalidArgument(
                "a time partition needs at least two nodes".into(),
            ));
        }
        if nodes[0] != T::zero() {
            return Err(SchemeError::InvalidArgument(
                "a time partition starts at zero".into(),
            ));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(SchemeError::InvalidArgument(
                    "time nodes must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { nodes })
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, i: usize) -> T {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Step length τ_n = t_n − t_{n−1}, `n` in `1..=n_steps`.
    pub fn step(&self, n: usize) -> T {
        self.nodes[n] - self.nodes[n - 1]
    }

    pub fn t_final(&self) -> T {
        *self.nodes.last().unwrap()
    }

    pub fn min_step(&self) -> T {
        (1..=self.n_steps())
            .map(|n| self.step(n))
            .fold(T::infinity(), |m, v| m.min(v))
    }

    /// Index n such that t ∈ (t_{n−1}, t_n]; zero for t = 0.
    pub fn interval_of(&self, t: T) -> Result<usize, SchemeError> {
        if t < T::zero() || t > self.t_final() {
            return Err(SchemeError::TimeOutOfRange {
                t: t.to_f64().unwrap_or(f64::NAN),
                t_final: self.t_final().to_f64().unwrap_or(f64::NAN),
            });
        }
        if t == T::zero() {
            return Ok(0);
        }
        let mut lo = 1usize;
        let mut hi = self.n_steps();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.nodes[mid] < t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Grading<T> {
    Uniform,
    /// Consecutive steps grow by the given ratio.
    Geometric(T),
}

/// Build a partition of [0, T] with `n` steps.
pub fn build_partition<T: Scalar>(
    t_final: T,
    n: usize,
    grading: Grading<T>,
) -> Result<TimePartition<T>, SchemeError> {
    if !(t_final > T::zero()) {
        return Err(SchemeError::InvalidArgument(
            "final time must be positive".into(),
        ));
    }
    if n == 0 {
        return Err(SchemeError::InvalidArgument(
            "need at least one time step".into(),
        ));
    }
    let nodes = match grading {
        Grading::Uniform => {
            let nf = cast::<T>(n as f64);
            let mut nodes: Vec<T> = (0..=n)
                .map(|i| t_final * cast::<T>(i as f64) / nf)
                .collect();
            nodes[n] = t_final;
            nodes
        }
        Grading::Geometric(ratio) => {
            if !(ratio > T::zero()) || !ratio.is_finite() {
                return Err(SchemeError::InvalidArgument(format!(
                    "geometric grading ratio must be positive and finite, got {ratio}"
                )));
            }
            if ratio == T::one() {
                return build_partition(t_final, n, Grading::Uniform);
            }
            // τ_k = τ_1 r^{k-1} with Σ τ_k = T
            let rn = ratio.powi(n as i32);
            let tau1 = t_final * (ratio - T::one()) / (rn - T::one());
            let mut nodes = Vec::with_capacity(n + 1);
            let mut t = T::zero();
            let mut tau = tau1;
            nodes.push(T::zero());
            for _ in 0..n {
                t += tau;
                nodes.push(t);
                tau *= ratio;
            }
            nodes[n] = t_final;
            nodes
        }
    };
    TimePartition::new(nodes)
}

/// Discrete trajectory: one P1 function per time node, piecewise constant
/// in time (`w(t) = wⁿ` on `(t_{n−1}, t_n]`, `w(0) = w⁰`).
#[derive(Clone, Debug)]
pub struct SpaceTimeFeFunction<T> {
    mesh: Arc<Mesh<T>>,
    partition: Arc<TimePartition<T>>,
    states: Vec<FeFunction<T>>,
}

impl<T: Scalar> SpaceTimeFeFunction<T> {
    pub fn new(
        mesh: &Arc<Mesh<T>>,
        partition: &Arc<TimePartition<T>>,
        states: Vec<FeFunction<T>>,
    ) -> Self {
        assert_eq!(
            states.len(),
            partition.n_steps() + 1,
            "one state per time node"
        );
        Self {
            mesh: Arc::clone(mesh),
            partition: Arc::clone(partition),
            states,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn partition(&self) -> &Arc<TimePartition<T>> {
        &self.partition
    }

    pub fn n_steps(&self) -> usize {
        self.partition.n_steps()
    }

    pub fn state(&self, n: usize) -> &FeFunction<T> {
        &self.states[n]
    }

    pub fn states(&self) -> &[FeFunction<T>] {
        &self.states
    }

    /// Value under the piecewise-constant-in-time semantics.
    pub fn at_time(&self, t: T) -> Result<&FeFunction<T>, SchemeError> {
        Ok(&self.states[self.partition.interval_of(t)?])
    }

    /// Piecewise-linear-in-time reconstruction; matches the states at the
    /// time nodes.
    pub fn reconstruction(&self, t: T) -> Result<FeFunction<T>, SchemeError> {
        let n = self.partition.interval_of(t)?;
        if n == 0 {
            return Ok(self.states[0].clone());
        }
        let t_prev = self.partition.node(n - 1);
        let tau = self.partition.step(n);
        let alpha = (t - t_prev) / tau;
        Ok(self.states[n - 1]
            .combine(T::one() - alpha, &self.states[n], alpha)
            .expect("states share the mesh"))
    }

    /// Jump ⟦u⟧_{n−1} = uⁿ − uⁿ⁻¹, `n` in `1..=n_steps`.
    pub fn jump(&self, n: usize) -> Result<FeFunction<T>, SchemeError> {
        if n == 0 || n > self.n_steps() {
            return Err(SchemeError::JumpIndex {
                n,
                n_steps: self.n_steps(),
            });
        }
        Ok(self.states[n]
            .combine(T::one(), &self.states[n - 1], -T::one())
            .expect("states share the mesh"))
    }

    /// α·self + β·other, stepwise.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Result<Self, SchemeError> {
        if self.n_steps() != other.n_steps() {
            return Err(SchemeError::InvalidArgument(
                "trajectories have different step counts".into(),
            ));
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.combine(alpha, b, beta))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            mesh: Arc::clone(&self.mesh),
            partition: Arc::clone(&self.partition),
            states,
        })
    }
}

/// Closed-form solution attached to manufactured problems.
#[derive(Clone)]
pub struct AnalyticSolution<T> {
    pub u: Arc<dyn Fn(T, Point<T>) -> T + Send + Sync>,
    pub grad: Arc<dyn Fn(T, Point<T>) -> [T; 2] + Send + Sync>,
    pub du_dt: Arc<dyn Fn(T, Point<T>) -> T + Send + Sync>,
    pub laplacian: Arc<dyn Fn(T, Point<T>) -> T + Send + Sync>,
}

/// Initial datum and right hand side of one initial boundary value
/// problem. Both only need to be integrable; `u0_l1` carries the exact
/// L¹ norm when the registry knows it.
#[derive(Clone)]
pub struct ProblemData<T> {
    pub u0: Arc<dyn Fn(Point<T>) -> T + Send + Sync>,
    pub rhs: Arc<dyn Fn(T, Point<T>) -> T + Send + Sync>,
    pub time_independent_rhs: bool,
    pub u0_l1: Option<T>,
    pub analytic: Option<AnalyticSolution<T>>,
}

impl<T: Scalar> ProblemData<T> {
    pub fn zero() -> Self {
        Self {
            u0: Arc::new(|_| T::zero()),
            rhs: Arc::new(|_, _| T::zero()),
            time_independent_rhs: true,
            u0_l1: Some(T::zero()),
            analytic: Some(AnalyticSolution {
                u: Arc::new(|_, _| T::zero()),
                grad: Arc::new(|_, _| [T::zero(); 2]),
                du_dt: Arc::new(|_, _| T::zero()),
                laplacian: Arc::new(|_, _| T::zero()),
            }),
        }
    }

    /// α·d₁ + β·d₂ (data and, when both carry one, analytic solutions).
    pub fn linear_combination(alpha: T, d1: &Self, beta: T, d2: &Self) -> Self {
        let (u01, u02) = (Arc::clone(&d1.u0), Arc::clone(&d2.u0));
        let (f1, f2) = (Arc::clone(&d1.rhs), Arc::clone(&d2.rhs));
        let analytic = match (&d1.analytic, &d2.analytic) {
            (Some(a1), Some(a2)) => {
                let (u1, u2) = (Arc::clone(&a1.u), Arc::clone(&a2.u));
                let (g1, g2) = (Arc::clone(&a1.grad), Arc::clone(&a2.grad));
                let (t1, t2) = (Arc::clone(&a1.du_dt), Arc::clone(&a2.du_dt));
                let (l1, l2) = (Arc::clone(&a1.laplacian), Arc::clone(&a2.laplacian));
                Some(AnalyticSolution {
                    u: Arc::new(move |t, p| alpha * u1(t, p) + beta * u2(t, p)),
                    grad: Arc::new(move |t, p| {
                        let a = g1(t, p);
                        let b = g2(t, p);
                        [alpha * a[0] + beta * b[0], alpha * a[1] + beta * b[1]]
                    }),
                    du_dt: Arc::new(move |t, p| alpha * t1(t, p) + beta * t2(t, p)),
                    laplacian: Arc::new(move |t, p| alpha * l1(t, p) + beta * l2(t, p)),
                })
            }
            _ => None,
        };
        Self {
            u0: Arc::new(move |p| alpha * u01(p) + beta * u02(p)),
            rhs: Arc::new(move |t, p| alpha * f1(t, p) + beta * f2(t, p)),
            time_independent_rhs: d1.time_independent_rhs && d2.time_independent_rhs,
            u0_l1: None,
            analytic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CflPolicy {
    /// Abort when the inverse CFL condition fails (study runs).
    Enforce,
    /// Proceed anyway (ad-hoc solves).
    Warn,
}

#[derive(Clone, Copy, Debug)]
pub enum CqSource<T> {
    /// Measure on the mesh with the default seed.
    Measured,
    Fixed(T),
}

/// Solver configuration.
#[derive(Clone, Debug)]
pub struct SchemeConfig<T> {
    pub cg_rel_tol: T,
    /// CG iteration cap as a multiple of the unknown count.
    pub cg_max_iter_factor: usize,
    pub quad: QuadratureSpec<T>,
    pub cfl: CflPolicy,
    pub cq: CqSource<T>,
}

impl<T: Scalar> Default for SchemeConfig<T> {
    fn default() -> Self {
        Self {
            cg_rel_tol: cast(1e-10),
            cg_max_iter_factor: 10,
            quad: QuadratureSpec::default(),
            cfl: CflPolicy::Warn,
            cq: CqSource::Measured,
        }
    }
}

/// Result of the inverse CFL test `h² ≤ min τ / (4 C_Q²)`.
#[derive(Clone, Copy, Debug)]
pub struct CflCheck<T> {
    pub ok: bool,
    pub h_squared: T,
    pub bound: T,
    pub cq: T,
}

pub fn check_reverse_cfl<T: Scalar>(h: T, partition: &TimePartition<T>, cq: T) -> CflCheck<T> {
    assert!(cq > T::zero(), "C_Q must be positive");
    let h2 = h * h;
    let bound = partition.min_step() / (cast::<T>(4.0) * cq * cq);
    CflCheck {
        ok: h2 <= bound,
        h_squared: h2,
        bound,
        cq,
    }
}

/// Assembled spatial operators shared by the stepper and the norm
/// evaluations (interior dofs).
pub struct SpatialOperators<T> {
    pub stiffness: CsrMatrix<T>,
    pub mass: CsrMatrix<T>,
    pub lumped: LumpedWeights<T>,
    pub lumped_interior: Vec<T>,
}

impl<T: Scalar> SpatialOperators<T> {
    pub fn new(mesh: &Mesh<T>) -> Self {
        let lumped = lumped_weights(mesh);
        let lumped_interior = lumped.interior(mesh);
        Self {
            stiffness: assemble_stiffness(mesh),
            mass: assemble_mass(mesh),
            lumped,
            lumped_interior,
        }
    }
}

/// Per-step consistent load vectors bⁿ_z = ∫ fⁿ φ_z on interior vertices.
pub struct RhsLoads<T> {
    pub loads: Vec<Vec<T>>,
    /// Accumulated quadrature error estimate (absolute).
    pub quadrature_error: T,
    /// Σ_n τ_n Σ_z |bⁿ_z| — bounded by ‖f‖_{L¹(Q_T)} up to quadrature error.
    pub abs_load_time_sum: T,
}

/// Average the right hand side over each step and assemble the loads.
pub fn average_rhs<T: Scalar>(
    data: &ProblemData<T>,
    partition: &TimePartition<T>,
    mesh: &Mesh<T>,
    spec: &QuadratureSpec<T>,
) -> RhsLoads<T> {
    let interior = mesh.interior_vertices();
    let mut quad_err = T::zero();
    let loads: Vec<Vec<T>> = if data.time_independent_rhs {
        let rhs = Arc::clone(&data.rhs);
        let f0 = move |p: Point<T>| rhs(T::zero(), p);
        let (full, err) = load_vector(mesh, &f0, spec);
        quad_err = err;
        let one: Vec<T> = interior.iter().map(|&v| full[v]).collect();
        (0..partition.n_steps()).map(|_| one.clone()).collect()
    } else {
        let mut out = Vec::with_capacity(partition.n_steps());
        for n in 1..=partition.n_steps() {
            let a = partition.node(n - 1);
            let b = partition.node(n);
            let tau = partition.step(n);
            let rhs = Arc::clone(&data.rhs);
            let eval = |t: T, out_vec: &mut [T]| {
                let rhs_t = |p: Point<T>| rhs(t, p);
                let (full, _) = load_vector(mesh, &rhs_t, spec);
                for (k, &v) in interior.iter().enumerate() {
                    out_vec[k] = full[v];
                }
            };
            let (integral, err) = adaptive_interval_integral_vec(
                a,
                b,
                interior.len(),
                &eval,
                spec.order.max(2),
                spec.tol,
                spec.max_depth.min(12),
            );
            quad_err += err;
            out.push(integral.iter().map(|&v| v / tau).collect());
        }
        out
    };
    let mut abs_sum = T::zero();
    for (n, load) in loads.iter().enumerate() {
        let tau = partition.step(n + 1);
        abs_sum += tau * load.iter().map(|v| v.abs()).sum::<T>();
    }
    RhsLoads {
        loads,
        quadrature_error: quad_err,
        abs_load_time_sum: abs_sum,
    }
}

/// Initial state u⁰ = P_h u₀ (L² projection onto the zero-trace space).
pub fn initial_state<T: Scalar>(
    u0: &(dyn Fn(Point<T>) -> T + Send + Sync),
    mesh: &Arc<Mesh<T>>,
    spec: &QuadratureSpec<T>,
) -> Result<FeFunction<T>, SchemeError> {
    Ok(l2_project(mesh, u0, spec, true)?)
}

/// One implicit Euler step with lumped mass.
pub fn step<T: Scalar>(
    u_prev: &FeFunction<T>,
    tau: T,
    load: &[T],
    ops: &SpatialOperators<T>,
    config: &SchemeConfig<T>,
) -> Result<FeFunction<T>, SchemeError> {
    assert!(tau > T::zero(), "time step must be positive");
    let mesh = u_prev.mesh();
    let n = mesh.n_interior();
    assert_eq!(load.len(), n, "load vector size mismatch");
    if n == 0 {
        return Ok(FeFunction::zeros(mesh, true));
    }
    let d_over_tau: Vec<T> = ops.lumped_interior.iter().map(|&w| w / tau).collect();
    let system = plus_diagonal(&ops.stiffness, &d_over_tau);
    let prev = u_prev.interior_values();
    let rhs: Vec<T> = (0..n).map(|i| d_over_tau[i] * prev[i] + load[i]).collect();
    let max_iter = (config.cg_max_iter_factor * n).max(50);
    let x = cg_solve(&system, &rhs, config.cg_rel_tol, max_iter)?;
    Ok(FeFunction::from_interior(mesh, &x))
}

fn plus_diagonal<T: Scalar>(a: &CsrMatrix<T>, diag: &[T]) -> CsrMatrix<T> {
    let mut triplets: Vec<(usize, usize, T)> = Vec::with_capacity(a.nnz() + diag.len());
    for i in 0..a.rows() {
        for (j, v) in a.row(i) {
            triplets.push((i, j, v));
        }
    }
    for (i, &d) in diag.iter().enumerate() {
        triplets.push((i, i, d));
    }
    CsrMatrix::from_triplets(a.rows(), a.cols(), &triplets)
}

/// Run the scheme over the whole partition.
pub fn solve<T: Scalar>(
    data: &ProblemData<T>,
    mesh: &Arc<Mesh<T>>,
    partition: &Arc<TimePartition<T>>,
    config: &SchemeConfig<T>,
) -> Result<SpaceTimeFeFunction<T>, SchemeError> {
    let cq = match config.cq {
        CqSource::Fixed(v) => v,
        CqSource::Measured => estimate_lumping_constants(mesh, 200, DEFAULT_SEED).cq,
    };
    if cq > T::zero() {
        let cfl = check_reverse_cfl(mesh.mesh_size(), partition, cq);
        if !cfl.ok && config.cfl == CflPolicy::Enforce {
            return Err(SchemeError::CflViolated {
                h_squared: cfl.h_squared.to_f64().unwrap_or(f64::NAN),
                bound: cfl.bound.to_f64().unwrap_or(f64::NAN),
                cq: cfl.cq.to_f64().unwrap_or(f64::NAN),
            });
        }
    }

    let ops = SpatialOperators::new(mesh.as_ref());
    let rhs = average_rhs(data, partition, mesh.as_ref(), &config.quad);
    let u0 = initial_state(data.u0.as_ref(), mesh, &config.quad)?;

    let mut states = Vec::with_capacity(partition.n_steps() + 1);
    states.push(u0);
    for n in 1..=partition.n_steps() {
        let tau = partition.step(n);
        let next = step(&states[n - 1], tau, &rhs.loads[n - 1], &ops, config)
            .map_err(|e| match e {
                SchemeError::Linalg(source) => SchemeError::StepFailed { step: n, source },
                other => other,
            })?;
        states.push(next);
    }
    Ok(SpaceTimeFeFunction::new(mesh, partition, states))
}

/// Discrete dual (H⁻¹-type) norm squared of a zero-trace P1 function:
/// ℓᵀ A⁻¹ ℓ with ℓ = M g the consistent load vector of `g`.
pub fn dual_norm_sq<T: Scalar>(
    g: &FeFunction<T>,
    ops: &SpatialOperators<T>,
    cg_rel_tol: T,
) -> Result<T, SchemeError> {
    let gi = g.interior_values();
    if gi.is_empty() {
        return Ok(T::zero());
    }
    let ell = ops.mass.spmv(&gi);
    let x = cg_solve(&ops.stiffness, &ell, cg_rel_tol, (20 * ell.len()).max(100))?;
    Ok(ell.iter().zip(&x).map(|(&a, &b)| a * b).sum())
}

/// Trial-space norm of a trajectory:
///
/// ```text
/// ‖u‖² = Σ_n τ_n |uⁿ|²_{H¹} + Σ_n ‖⟦u⟧_{n−1}‖²_{−1,h}/τ_n
///        + ‖u^N‖²_{L²} + Σ_n ‖⟦u⟧_{n−1}‖²_{L²}
/// ```
///
/// where the middle term realizes ‖∂_t (reconstruction)‖²_{L²(H⁻¹)}.
pub fn trial_norm<T: Scalar>(
    u: &SpaceTimeFeFunction<T>,
    ops: &SpatialOperators<T>,
    cg_rel_tol: T,
) -> Result<T, SchemeError> {
    let mut acc = T::zero();
    for n in 1..=u.n_steps() {
        let tau = u.partition().step(n);
        acc += tau * u.state(n).h1_seminorm_sq();
        let j = u.jump(n)?;
        acc += dual_norm_sq(&j, ops, cg_rel_tol)? / tau;
        acc += j.l2_norm_sq();
    }
    acc += u.state(u.n_steps()).l2_norm_sq();
    Ok(acc.sqrt())
}

/// Test-space norm: ‖u(0)‖²_{L²} + Σ_n τ_n |uⁿ|²_{H¹}, square rooted.
pub fn test_norm<T: Scalar>(u: &SpaceTimeFeFunction<T>) -> T {
    let mut acc = u.state(0).l2_norm_sq();
    for n in 1..=u.n_steps() {
        acc += u.partition().step(n) * u.state(n).h1_seminorm_sq();
    }
    acc.sqrt()
}

/// Which inner product couples the jump terms of the space-time form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpInnerProduct {
    /// The mass-lumped scheme.
    Lumped,
    /// The textbook dG(0) form.
    Consistent,
}

/// Dense space-time form and norm matrices over stacked interior
/// coefficients (time level major):
///
/// - `b`: B(v, w) = (v⁰, w⁰)_{L²} + Σ_n τ_n (∇vⁿ, ∇wⁿ) + Σ_n (⟦v⟧, wⁿ)
/// - `nx`: Gram matrix of the trial norm
/// - `ny`: Gram matrix of the test norm
pub struct SpaceTimeForms<T> {
    pub b: DenseMatrix<T>,
    pub nx: DenseMatrix<T>,
    pub ny: DenseMatrix<T>,
    pub dof: usize,
}

pub fn assemble_spacetime_forms<T: Scalar>(
    mesh: &Mesh<T>,
    partition: &TimePartition<T>,
    variant: JumpInnerProduct,
    dof_cap: usize,
) -> Result<SpaceTimeForms<T>, SchemeError> {
    let nint = mesh.n_interior();
    let nt = partition.n_steps();
    let dof = (nt + 1) * nint;
    if nint == 0 {
        return Err(SchemeError::InvalidArgument(
            "mesh has no interior vertices".into(),
        ));
    }
    if dof > dof_cap {
        return Err(SchemeError::SizeCap { dof, cap: dof_cap });
    }

    let a = assemble_stiffness(mesh).to_dense();
    let m = assemble_mass(mesh).to_dense();
    let weights = lumped_weights(mesh);
    let wi = weights.interior(mesh);

    // H = M A⁻¹ M realizes the squared dual norm of the jumps
    let la = a.cholesky()?;
    let mut ainv_m = DenseMatrix::zeros(nint, nint);
    for j in 0..nint {
        let col: Vec<T> = (0..nint).map(|i| m.get(i, j)).collect();
        let y = crate::linalg::forward_substitute(&la, &col);
        let x = crate::linalg::back_substitute_transposed(&la, &y);
        for i in 0..nint {
            ainv_m.set(i, j, x[i]);
        }
    }
    let mut h = m.matmul(&ainv_m);
    // symmetrize against roundoff
    for i in 0..nint {
        for j in i + 1..nint {
            let s = (h.get(i, j) + h.get(j, i)) * cast::<T>(0.5);
            h.set(i, j, s);
            h.set(j, i, s);
        }
    }

    let jump_inner = |i: usize, j: usize| -> T {
        match variant {
            JumpInnerProduct::Lumped => {
                if i == j {
                    wi[i]
                } else {
                    T::zero()
                }
            }
            JumpInnerProduct::Consistent => m.get(i, j),
        }
    };

    let mut b = DenseMatrix::zeros(dof, dof);
    let mut nx = DenseMatrix::zeros(dof, dof);
    let mut ny = DenseMatrix::zeros(dof, dof);
    let at = |level: usize, i: usize| level * nint + i;

    // B and NY share the diagonal stiffness blocks
    for i in 0..nint {
        for j in 0..nint {
            b.add_to(at(0, i), at(0, j), m.get(i, j));
            ny.add_to(at(0, i), at(0, j), m.get(i, j));
        }
    }
    for n in 1..=nt {
        let tau = partition.step(n);
        for i in 0..nint {
            for j in 0..nint {
                let ta = tau * a.get(i, j);
                b.add_to(at(n, i), at(n, j), ta);
                nx.add_to(at(n, i), at(n, j), ta);
                ny.add_to(at(n, i), at(n, j), ta);
                let jm = jump_inner(i, j);
                // rows test against wⁿ, columns differentiate vⁿ − vⁿ⁻¹
                b.add_to(at(n, i), at(n, j), jm);
                b.add_to(at(n, i), at(n - 1, j), -jm);
            }
        }
    }
    // trial norm: jump L² and dual-norm terms, plus the final value
    for n in 1..=nt {
        let tau = partition.step(n);
        for i in 0..nint {
            for j in 0..nint {
                let p = h.get(i, j) / tau + m.get(i, j);
                nx.add_to(at(n, i), at(n, j), p);
                nx.add_to(at(n - 1, i), at(n - 1, j), p);
                nx.add_to(at(n, i), at(n - 1, j), -p);
                nx.add_to(at(n - 1, i), at(n, j), -p);
            }
        }
    }
    for i in 0..nint {
        for j in 0..nint {
            nx.add_to(at(nt, i), at(nt, j), m.get(i, j));
        }
    }

    Ok(SpaceTimeForms { b, nx, ny, dof })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::lagrange_interpolate;
    use crate::mesh::{generate_interval_mesh, generate_unit_square_mesh};
    use std::f64::consts::PI;

    fn interval(n: usize) -> Arc<Mesh<f64>> {
        Arc::new(generate_interval_mesh(n).unwrap())
    }

    #[test]
    fn partition_construction() {
        let p = build_partition(1.0, 4, Grading::<f64>::Uniform).unwrap();
        for n in 1..=4 {
            assert!((p.step(n) - 0.25).abs() < 1e-15);
        }
        assert_eq!(p.t_final(), 1.0);

        let g = build_partition(1.0f64, 2, Grading::Geometric(2.0)).unwrap();
        assert!((g.step(1) - 1.0 / 3.0).abs() < 1e-14);
        assert!((g.step(2) - 2.0 / 3.0).abs() < 1e-14);

        let single = build_partition(0.7, 1, Grading::<f64>::Uniform).unwrap();
        assert_eq!(single.n_steps(), 1);
        assert!((single.step(1) - 0.7).abs() < 1e-15);

        assert!(build_partition(1.0, 0, Grading::<f64>::Uniform).is_err());
        assert!(build_partition(1.0, 2, Grading::Geometric(-1.0)).is_err());
        assert!(build_partition(-1.0, 2, Grading::<f64>::Uniform).is_err());
    }

    #[test]
    fn interval_lookup() {
        let p = build_partition(1.0, 4, Grading::<f64>::Uniform).unwrap();
        assert_eq!(p.interval_of(0.0).unwrap(), 0);
        assert_eq!(p.interval_of(0.1).unwrap(), 1);
        assert_eq!(p.interval_of(0.25).unwrap(), 1);
        assert_eq!(p.interval_of(0.2500001).unwrap(), 2);
        assert_eq!(p.interval_of(1.0).unwrap(), 4);
        assert!(p.interval_of(1.5).is_err());
        assert!(p.interval_of(-0.1).is_err());
    }

    #[test]
    fn cfl_check_arithmetic() {
        let p = Arc::new(TimePartition::new(vec![0.0, 0.05, 0.1]).unwrap());
        let c = check_reverse_cfl(0.1f64, &p, 1.0);
        assert!(c.ok, "{c:?}");
        assert!((c.bound - 0.0125).abs() < 1e-15);

        let p2 = Arc::new(TimePartition::new(vec![0.0, 0.01]).unwrap());
        let c2 = check_reverse_cfl(0.1f64, &p2, 1.0);
        assert!(!c2.ok);

        // doubling C_Q shrinks the admissible h by exactly 2
        let c3 = check_reverse_cfl(0.05, &p2, 2.0);
        assert!((c3.bound * 4.0 - c2.bound).abs() < 1e-15);
    }

    #[test]
    fn average_rhs_constant_one() {
        let mesh = interval(4);
        let p = build_partition(1.0, 3, Grading::<f64>::Uniform).unwrap();
        let data = ProblemData::<f64> {
            u0: Arc::new(|_| 0.0),
            rhs: Arc::new(|_, _| 1.0),
            time_independent_rhs: true,
            u0_l1: Some(0.0),
            analytic: None,
        };
        let loads = average_rhs(&data, &p, mesh.as_ref(), &QuadratureSpec::default());
        // ∫ φ_z = h = 0.25 for interior hats
        for step_loads in &loads.loads {
            for &b in step_loads {
                assert!((b - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn average_rhs_time_independent_detection_matches_explicit_integration() {
        let mesh = interval(4);
        let p = build_partition(0.5, 2, Grading::<f64>::Uniform).unwrap();
        let g = |x: f64| (2.0 * x).cos();
        let d1 = ProblemData::<f64> {
            u0: Arc::new(|_| 0.0),
            rhs: Arc::new(move |_, p| g(p[0])),
            time_independent_rhs: true,
            u0_l1: Some(0.0),
            analytic: None,
        };
        let d2 = ProblemData::<f64> {
            time_independent_rhs: false,
            ..d1.clone()
        };
        let l1 = average_rhs(&d1, &p, mesh.as_ref(), &QuadratureSpec::default());
        let l2 = average_rhs(&d2, &p, mesh.as_ref(), &QuadratureSpec::default());
        for (a, b) in l1.loads.iter().flatten().zip(l2.loads.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
        // loads identical across steps for time-independent f
        assert_eq!(l1.loads[0], l1.loads[1]);
    }

    #[test]
    fn step_zero_stays_zero() {
        let mesh = interval(4);
        let ops = SpatialOperators::new(mesh.as_ref());
        let config = SchemeConfig::default();
        let zero = FeFunction::zeros(&mesh, true);
        let next = step(&zero, 0.01, &vec![0.0; 3], &ops, &config).unwrap();
        assert!(next.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_decays_sine() {
        let mesh = interval(4);
        let ops = SpatialOperators::new(mesh.as_ref());
        let config = SchemeConfig::default();
        let u = lagrange_interpolate(&mesh, |p| (PI * p[0]).sin(), true).unwrap();
        let next = step(&u, 0.01, &vec![0.0; 3], &ops, &config).unwrap();
        for (&a, &b) in next.values().iter().zip(u.values()) {
            assert!(a.abs() <= b.abs() + 1e-14);
        }
        assert!(next.max_abs_nodal() < u.max_abs_nodal());
    }

    #[test]
    fn large_step_approaches_poisson_solve() {
        let mesh = interval(8);
        let ops = SpatialOperators::new(mesh.as_ref());
        let config = SchemeConfig::default();
        // load for f = 1
        let data = ProblemData::<f64> {
            u0: Arc::new(|_| 0.0),
            rhs: Arc::new(|_, _| 1.0),
            time_independent_rhs: true,
            u0_l1: Some(0.0),
            analytic: None,
        };
        let p = build_partition(1.0, 1, Grading::<f64>::Uniform).unwrap();
        let loads = average_rhs(&data, &p, mesh.as_ref(), &config.quad);
        let zero = FeFunction::zeros(&mesh, true);
        let u = step(&zero, 1e12, &loads.loads[0], &ops, &config).unwrap();
        let direct = cg_solve(&ops.stiffness, &loads.loads[0], 1e-12, 1000).unwrap();
        for (a, b) in u.interior_values().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn solve_zero_problem() {
        let mesh = interval(4);
        let p = Arc::new(build_partition(1.0, 4, Grading::<f64>::Uniform).unwrap());
        let u = solve(&ProblemData::zero(), &mesh, &p, &SchemeConfig::default()).unwrap();
        for n in 0..=4 {
            assert!(u.state(n).values().iter().all(|&v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn solve_decay_rate_matches_exact_solution() {
        // u0 = sin(pi x), f = 0: u(t) = e^{-pi^2 t} sin(pi x)
        let mesh = interval(16);
        let t_final = 0.02;
        let p = Arc::new(build_partition(t_final, 64, Grading::<f64>::Uniform).unwrap());
        let u = solve(
            &ProblemData {
                u0: Arc::new(|p: [f64; 2]| (PI * p[0]).sin()),
                rhs: Arc::new(|_, _| 0.0),
                time_independent_rhs: true,
                u0_l1: Some(2.0 / PI),
                analytic: None,
            },
            &mesh,
            &p,
            &SchemeConfig::default(),
        )
        .unwrap();
        let mid = u.state(64).eval([0.5, 0.0]).unwrap();
        let exact = (-PI * PI * t_final).exp();
        assert!(
            (mid - exact).abs() < 5e-3,
            "numerical {mid} vs exact {exact}"
        );
    }

    #[test]
    fn solve_enforce_rejects_cfl_violation() {
        let mesh = interval(64);
        // tiny steps violate the inverse CFL condition
        let p = Arc::new(build_partition(1e-6, 64, Grading::<f64>::Uniform).unwrap());
        let config = SchemeConfig {
            cfl: CflPolicy::Enforce,
            ..SchemeConfig::default()
        };
        let err = solve(&ProblemData::zero(), &mesh, &p, &config).unwrap_err();
        assert!(matches!(err, SchemeError::CflViolated { .. }), "{err}");
        // Warn proceeds
        let config = SchemeConfig {
            cfl: CflPolicy::Warn,
            ..SchemeConfig::default()
        };
        assert!(solve(&ProblemData::zero(), &mesh, &p, &config).is_ok());
    }

    #[test]
    fn reconstruction_and_jumps() {
        let mesh = interval(2);
        let p = Arc::new(build_partition(1.0, 1, Grading::<f64>::Uniform).unwrap());
        let v = FeFunction::from_interior(&mesh, &[2.0]);
        let zero = FeFunction::zeros(&mesh, true);
        let u = SpaceTimeFeFunction::new(&mesh, &p, vec![zero, v.clone()]);

        // reconstruction at T/2 is v/2
        let r = u.reconstruction(0.5).unwrap();
        assert!((r.values()[1] - 1.0).abs() < 1e-15);
        // reconstruction hits the nodes exactly
        let r1 = u.reconstruction(1.0).unwrap();
        assert_eq!(r1.values(), v.values());
        // jump over the single step is v
        let j = u.jump(1).unwrap();
        assert_eq!(j.values(), v.values());
        assert!(u.jump(0).is_err());
        assert!(u.jump(2).is_err());
        assert!(u.reconstruction(1.5).is_err());

        // time derivative of the reconstruction equals jump / tau
        let r_a = u.reconstruction(0.25).unwrap();
        let r_b = u.reconstruction(0.75).unwrap();
        let slope = r_b.combine(2.0, &r_a, -2.0).unwrap();
        for (s, jv) in slope.values().iter().zip(j.values()) {
            assert!((s - jv).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_trajectory_norms() {
        let mesh = interval(8);
        let p = Arc::new(build_partition(2.0, 5, Grading::<f64>::Uniform).unwrap());
        let w = lagrange_interpolate(&mesh, |q| (PI * q[0]).sin(), true).unwrap();
        let states = vec![w.clone(); 6];
        let u = SpaceTimeFeFunction::new(&mesh, &p, states);
        let ops = SpatialOperators::new(mesh.as_ref());

        let x = trial_norm(&u, &ops, 1e-12).unwrap();
        let expected = (2.0 * w.h1_seminorm_sq() + w.l2_norm_sq()).sqrt();
        assert!((x - expected).abs() < 1e-10, "{x} vs {expected}");

        let y = test_norm(&u);
        let expected_y = (w.l2_norm_sq() + 2.0 * w.h1_seminorm_sq()).sqrt();
        assert!((y - expected_y).abs() < 1e-12);

        // zero trajectory
        let z = SpaceTimeFeFunction::new(&mesh, &p, vec![FeFunction::zeros(&mesh, true); 6]);
        assert_eq!(test_norm(&z), 0.0);
        assert_eq!(trial_norm(&z, &ops, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn single_jump_contributes_l2_norm() {
        let mesh = interval(8);
        let p = Arc::new(build_partition(1.0, 1, Grading::<f64>::Uniform).unwrap());
        let v = lagrange_interpolate(&mesh, |q| q[0] * (1.0 - q[0]), true).unwrap();
        let u = SpaceTimeFeFunction::new(&mesh, &p, vec![FeFunction::zeros(&mesh, true), v.clone()]);
        let ops = SpatialOperators::new(mesh.as_ref());
        let x2 = trial_norm(&u, &ops, 1e-12).unwrap().powi(2);
        // terms: tau |v|_H1^2 + dual(v)^2/tau + ||v||^2 (jump) + ||v||^2 (final)
        let dual = dual_norm_sq(&v, &ops, 1e-12).unwrap();
        let expected = v.h1_seminorm_sq() + dual + 2.0 * v.l2_norm_sq();
        assert!((x2 - expected).abs() < 1e-10);
    }

    #[test]
    fn norm_homogeneity() {
        let mesh = interval(6);
        let p = Arc::new(build_partition(1.0, 3, Grading::<f64>::Uniform).unwrap());
        let mut states = Vec::new();
        for n in 0..=3 {
            let shift = n as f64 * 0.2;
            states.push(
                lagrange_interpolate(&mesh, |q| (PI * (q[0] + shift)).sin().powi(2), true)
                    .unwrap(),
            );
        }
        let u = SpaceTimeFeFunction::new(&mesh, &p, states);
        let ops = SpatialOperators::new(mesh.as_ref());
        let c = -3.7;
        let scaled = u.combine(c, &u, 0.0).unwrap();
        let x1 = trial_norm(&u, &ops, 1e-13).unwrap();
        let x2 = trial_norm(&scaled, &ops, 1e-13).unwrap();
        assert!((x2 - c.abs() * x1).abs() <= 1e-9 * x1.max(1.0));
        let y1 = test_norm(&u);
        let y2 = test_norm(&scaled);
        assert!((y2 - c.abs() * y1).abs() <= 1e-12 * y1.max(1.0));
    }

    #[test]
    fn forms_match_hand_assembly_single_step() {
        // 1D n=2 (one interior node), N=1: everything is scalar
        let mesh = interval(2);
        let p = build_partition(1.0, 1, Grading::<f64>::Uniform).unwrap();
        let forms =
            assemble_spacetime_forms(mesh.as_ref(), &p, JumpInnerProduct::Consistent, 2000)
                .unwrap();
        // A = 4, M = 1/3 (h = 1/2), tau = 1
        let (a, m) = (4.0, 1.0 / 3.0);
        assert_eq!(forms.dof, 2);
        assert!((forms.b.get(0, 0) - m).abs() < 1e-14);
        assert!((forms.b.get(1, 0) + m).abs() < 1e-14);
        assert!((forms.b.get(1, 1) - (a + m)).abs() < 1e-14);
        // NX: jump terms with H = M A^{-1} M = m^2 / a
        let hh = m * m / a;
        assert!((forms.nx.get(0, 0) - (hh + m)).abs() < 1e-14);
        assert!((forms.nx.get(0, 1) + (hh + m)).abs() < 1e-14);
        assert!((forms.nx.get(1, 1) - (a + hh + 2.0 * m)).abs() < 1e-14);
        assert!((forms.ny.get(0, 0) - m).abs() < 1e-14);
        assert!((forms.ny.get(1, 1) - a).abs() < 1e-14);
    }

    #[test]
    fn forms_quadratic_form_matches_norms() {
        use crate::rng::SplitMix64;
        let mesh = interval(4);
        let p = Arc::new(build_partition(0.5, 3, Grading::<f64>::Uniform).unwrap());
        let forms =
            assemble_spacetime_forms(mesh.as_ref(), &p, JumpInnerProduct::Lumped, 2000).unwrap();
        let ops = SpatialOperators::new(mesh.as_ref());
        let nint = mesh.n_interior();
        let mut rng = SplitMix64::new(99);
        for _ in 0..50 {
            let coeffs = rng.uniform_vec(forms.dof, -1.0, 1.0);
            let states: Vec<FeFunction<f64>> = (0..=3)
                .map(|n| {
                    FeFunction::from_interior(&mesh, &coeffs[n * nint..(n + 1) * nint])
                })
                .collect();
            let u = SpaceTimeFeFunction::new(&mesh, &p, states);
            let xq: f64 = quadratic_form(&forms.nx, &coeffs);
            let xn = trial_norm(&u, &ops, 1e-13).unwrap();
            assert!(
                (xq - xn * xn).abs() <= 1e-10 * xq.abs().max(1.0),
                "{xq} vs {}",
                xn * xn
            );
            let yq: f64 = quadratic_form(&forms.ny, &coeffs);
            let yn = test_norm(&u);
            assert!((yq - yn * yn).abs() <= 1e-12 * yq.abs().max(1.0));
        }
    }

    fn quadratic_form(mat: &DenseMatrix<f64>, v: &[f64]) -> f64 {
        mat.matvec(v).iter().zip(v).map(|(&a, &b)| a * b).sum()
    }

    #[test]
    fn forms_size_cap() {
        let mesh = interval(64);
        let p = build_partition(1.0, 64, Grading::<f64>::Uniform).unwrap();
        assert!(matches!(
            assemble_spacetime_forms(mesh.as_ref(), &p, JumpInnerProduct::Lumped, 2000),
            Err(SchemeError::SizeCap { .. })
        ));
    }

    #[test]
    fn scheme_is_linear_in_the_data() {
        let mesh = interval(8);
        let p = Arc::new(build_partition(0.1, 8, Grading::<f64>::Uniform).unwrap());
        let config = SchemeConfig {
            cg_rel_tol: 1e-13,
            ..SchemeConfig::default()
        };
        let d1 = ProblemData::<f64> {
            u0: Arc::new(|q: [f64; 2]| (PI * q[0]).sin()),
            rhs: Arc::new(|_, q: [f64; 2]| q[0]),
            time_independent_rhs: true,
            u0_l1: None,
            analytic: None,
        };
        let d2 = ProblemData::<f64> {
            u0: Arc::new(|q: [f64; 2]| q[0] * (1.0 - q[0])),
            rhs: Arc::new(|t: f64, _| t),
            time_independent_rhs: false,
            u0_l1: None,
            analytic: None,
        };
        let (alpha, beta) = (1.7, -0.6);
        let combo = ProblemData::linear_combination(alpha, &d1, beta, &d2);
        let u1 = solve(&d1, &mesh, &p, &config).unwrap();
        let u2 = solve(&d2, &mesh, &p, &config).unwrap();
        let uc = solve(&combo, &mesh, &p, &config).unwrap();
        let expect = u1.combine(alpha, &u2, beta).unwrap();
        for n in 0..=8 {
            for (a, b) in uc.state(n).values().iter().zip(expect.state(n).values()) {
                assert!((a - b).abs() < 1e-8, "step {n}: {a} vs {b}");
            }
        }
    }
}

#[cfg(test)]
mod more_tests {
    use super::*;
    use crate::fespace::normalized_bump;
    use crate::mesh::generate_unit_square_mesh;
    use std::sync::Arc;

    #[test]
    fn nonnegative_data_stays_nonnegative() {
        // lumped mass plus stiffness is an M-matrix on nonobtuse meshes
        let mesh = Arc::new(generate_unit_square_mesh::<f64>(6).unwrap());
        let p = Arc::new(build_partition(0.1, 10, Grading::<f64>::Uniform).unwrap());
        let bump = normalized_bump(2, [0.5, 0.5], 0.3);
        let data = ProblemData::<f64> {
            u0: Arc::new(bump),
            rhs: Arc::new(|_, _| 0.0),
            time_independent_rhs: true,
            u0_l1: Some(1.0),
            analytic: None,
        };
        let u = solve(&data, &mesh, &p, &SchemeConfig::default()).unwrap();
        // the projection of nonnegative data may undershoot slightly; the
        // time stepping must not amplify the negative part
        let undershoot = u.state(0).values().iter().fold(0.0f64, |m, &v| m.min(v));
        for n in 1..=u.n_steps() {
            for &v in u.state(n).values() {
                assert!(v >= undershoot - 1e-12, "step {n}: value {v} vs {undershoot}");
            }
        }
    }

    #[test]
    fn initial_state_second_order_in_h() {
        use std::f64::consts::PI;
        let spec = QuadratureSpec::default();
        let mut errors = Vec::new();
        for n in [8usize, 16, 32] {
            let mesh = Arc::new(crate::mesh::generate_interval_mesh::<f64>(n).unwrap());
            let u0 = initial_state(&|p: [f64; 2]| (PI * p[0]).sin(), &mesh, &spec).unwrap();
            // L2 error by fine sampling
            let m = 2000usize;
            let mut err2 = 0.0;
            for i in 0..m {
                let x = (i as f64 + 0.5) / m as f64;
                let d = u0.eval([x, 0.0]).unwrap() - (PI * x).sin();
                err2 += d * d / m as f64;
            }
            errors.push(err2.sqrt());
        }
        let r1 = errors[0] / errors[1];
        let r2 = errors[1] / errors[2];
        assert!(r1 > 3.3 && r1 < 4.7, "refinement ratio {r1}");
        assert!(r2 > 3.3 && r2 < 4.7, "refinement ratio {r2}");
    }
}

#[cfg(test)]
mod bookkeeping_tests {
    use super::*;
    use crate::quadrature::{adaptive_simplex_integral, ElementRule};

    /// Σ_n τ_n Σ_z |bⁿ_z| stays below ‖f‖_{L¹(Q_T)}: the interior hat
    /// functions are a sub-partition of unity.
    #[test]
    fn load_time_sum_bounded_by_rhs_mass() {
        let mesh = Arc::new(crate::mesh::generate_unit_square_mesh::<f64>(8).unwrap());
        let p = build_partition(0.25, 4, Grading::<f64>::Uniform).unwrap();
        let data = crate::registry::lookup::<f64>("spike-rhs(1.5)", 2, 0.25).unwrap();
        let spec = QuadratureSpec::default();
        let loads = average_rhs(&data, &p, mesh.as_ref(), &spec);

        // ‖f‖_{L¹(Q_T)} = T · ∫ |f| for the time-independent spike
        let rule = ElementRule::new(2, 4);
        let mut f_l1 = 0.0;
        for e in 0..mesh.n_elements() {
            let pts = mesh.element_points(e);
            let (v, _) = adaptive_simplex_integral(
                &pts,
                2,
                mesh.measure(e),
                &|q| (data.rhs)(0.0, q),
                &rule,
                1e-10,
                40,
            );
            f_l1 += v;
        }
        f_l1 *= 0.25;
        assert!(
            loads.abs_load_time_sum <= f_l1 * (1.0 + 1e-6),
            "{} vs {}",
            loads.abs_load_time_sum,
            f_l1
        );
        assert!(loads.abs_load_time_sum > 0.5 * f_l1, "loads lost too much mass");
    }

    /// The projected unit-mass bump respects the measured projection
    /// stability constant.
    #[test]
    fn projected_bump_within_measured_stability_constant() {
        let mesh = Arc::new(crate::mesh::generate_interval_mesh::<f64>(16).unwrap());
        let spec = QuadratureSpec::default();
        let cp = crate::fespace::estimate_projection_constant(&mesh, &spec).unwrap();
        let bump = crate::fespace::normalized_bump(1, [0.5, 0.0], 0.0625);
        let u0 = initial_state(&bump, &mesh, &spec).unwrap();
        assert!(
            u0.l1_norm() <= cp + 1e-9,
            "projected bump L1 {} vs measured constant {}",
            u0.l1_norm(),
            cp
        );
    }
}
