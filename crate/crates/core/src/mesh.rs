//! Conforming simplicial meshes of intervals and of the unit square, plus
//! quality diagnostics and a line-oriented text format.
//!
//! Text format (whitespace separated):
//! ```text
//! d <dimension> <num_vertices> <num_elements>
//! v <x> [<y>]           one line per vertex, 0-based implicit indexing
//! e <i0> <i1> [<i2>]    one line per element, vertex indices
//! b <i>                 boundary vertex (optional; inferred when absent)
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scalar::{cast, Scalar};

/// Angle slack when classifying a mesh as nonobtuse.
pub const TOL_ANGLE: f64 = 1e-10;
/// Slack on assembled off-diagonal stiffness entries.
pub const TOL_ASM: f64 = 1e-12;

pub type Point<T> = [T; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: vertex index {index} out of range (mesh has {len} vertices)")]
    IndexOutOfRange { line: usize, index: usize, len: usize },
    #[error("element {element} is degenerate (measure {measure})")]
    DegenerateElement { element: usize, measure: f64 },
    #[error("mesh is not conforming: {0}")]
    Nonconforming(String),
    #[error("boundary flags disagree with face incidence: {0}")]
    BoundaryMismatch(String),
}

/// How the mesh was produced; structured kinds enable O(1) point location.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshKind {
    /// Uniform mesh of (0,1) with n cells.
    Interval { n: usize },
    /// Structured triangulation of (0,1)² with n cells per side.
    UnitSquare { n: usize },
    General,
}

/// Conforming simplicial mesh of a 1D interval or 2D polygon.
///
/// Immutable after construction; elements are positively oriented and
/// vertices carry an interior/boundary classification.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    dim: usize,
    vertices: Vec<Point<T>>,
    elements: Vec<usize>, // flattened, stride dim + 1
    boundary: Vec<bool>,
    measures: Vec<T>,
    diameters: Vec<T>,
    h: T,
    kind: MeshKind,
    interior: Vec<usize>,
    interior_index: Vec<Option<usize>>,
}

impl<T: Scalar> Mesh<T> {
    /// Validate vertex/element data and build a mesh. Elements are
    /// re-oriented positively; if `boundary` is `None` the boundary is
    /// inferred from faces incident to exactly one element.
    pub fn from_data(
        dim: usize,
        vertices: Vec<Point<T>>,
        mut elements: Vec<usize>,
        boundary: Option<Vec<bool>>,
        kind: MeshKind,
    ) -> Result<Self, MeshError> {
        if dim != 1 && dim != 2 {
            return Err(MeshError::InvalidArgument(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        let stride = dim + 1;
        if elements.is_empty() || elements.len() % stride != 0 {
            return Err(MeshError::InvalidArgument(format!(
                "element list length {} is not a positive multiple of {}",
                elements.len(),
                stride
            )));
        }
        let n_elements = elements.len() / stride;
        for (pos, &v) in elements.iter().enumerate() {
            if v >= vertices.len() {
                return Err(MeshError::IndexOutOfRange {
                    line: 0,
                    index: v,
                    len: vertices.len(),
                });
            }
            let _ = pos;
        }

        // orient and measure
        let mut measures = Vec::with_capacity(n_elements);
        let mut diameters = Vec::with_capacity(n_elements);
        for e in 0..n_elements {
            let conn = &mut elements[e * stride..(e + 1) * stride];
            let signed = signed_measure(dim, &vertices, conn);
            if signed < T::zero() {
                conn.swap(stride - 2, stride - 1);
            }
            let m = signed.abs();
            let diam = simplex_diameter(dim, &vertices, conn);
            if !(m > T::zero()) || m <= cast::<T>(1e-14) * diam.powi(dim as i32) {
                return Err(MeshError::DegenerateElement {
                    element: e,
                    measure: m.to_f64().unwrap_or(f64::NAN),
                });
            }
            measures.push(m);
            diameters.push(diam);
        }
        let h = diameters
            .iter()
            .fold(T::zero(), |acc, &d| acc.max(d));

        let inferred = check_conformity(dim, &vertices, &elements, kind)?;
        let boundary = match boundary {
            None => inferred,
            Some(given) => {
                if given.len() != vertices.len() {
                    return Err(MeshError::InvalidArgument(
                        "boundary flag list length differs from vertex count".into(),
                    ));
                }
                for v in 0..vertices.len() {
                    if given[v] != inferred[v] {
                        return Err(MeshError::BoundaryMismatch(format!(
                            "vertex {v} is {} by face incidence but {} in the input",
                            flag_name(inferred[v]),
                            flag_name(given[v]),
                        )));
                    }
                }
                given
            }
        };

        let mut interior = Vec::new();
        let mut interior_index = vec![None; vertices.len()];
        for v in 0..vertices.len() {
            if !boundary[v] {
                interior_index[v] = Some(interior.len());
                interior.push(v);
            }
        }

        Ok(Self {
            dim,
            vertices,
            elements,
            boundary,
            measures,
            diameters,
            h,
            kind,
            interior,
            interior_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.measures.len()
    }

    pub fn vertex(&self, v: usize) -> Point<T> {
        self.vertices[v]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.elements[e * s..(e + 1) * s]
    }

    pub fn measure(&self, e: usize) -> T {
        self.measures[e]
    }

    pub fn diameter(&self, e: usize) -> T {
        self.diameters[e]
    }

    /// Mesh size h: the largest element diameter.
    pub fn mesh_size(&self) -> T {
        self.h
    }

    /// Total measure of the meshed domain.
    pub fn domain_measure(&self) -> T {
        self.measures.iter().copied().sum()
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Interior vertex ids, in ascending order; these index the degrees of
    /// freedom of the zero-trace P1 space.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// Interior dof index of a vertex, `None` on the boundary.
    pub fn interior_index(&self, v: usize) -> Option<usize> {
        self.interior_index[v]
    }

    /// Physical coordinates of the element's vertices.
    pub fn element_points(&self, e: usize) -> Vec<Point<T>> {
        self.element(e).iter().map(|&v| self.vertices[v]).collect()
    }

    /// Gradients of the P1 basis functions on element `e`, one per vertex
    /// of the element (constant on the element).
    pub fn basis_gradients(&self, e: usize) -> Vec<[T; 2]> {
        let conn = self.element(e);
        match self.dim {
            1 => {
                let x0 = self.vertices[conn[0]][0];
                let x1 = self.vertices[conn[1]][0];
                let inv = T::one() / (x1 - x0);
                vec![[-inv, T::zero()], [inv, T::zero()]]
            }
            2 => {
                let p: Vec<Point<T>> = conn.iter().map(|&v| self.vertices[v]).collect();
                let two_area = cast::<T>(2.0) * self.measures[e];
                // ∇φ_i = perp(edge opposite to i) / (2|T|), with perp chosen
                // to point toward vertex i
                let mut out = Vec::with_capacity(3);
                for i in 0..3 {
                    let a = p[(i + 1) % 3];
                    let b = p[(i + 2) % 3];
                    let ex = b[0] - a[0];
                    let ey = b[1] - a[1];
                    out.push([-ey / two_area, ex / two_area]);
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// Locate the element containing `p` and its barycentric coordinates.
    /// Points on shared faces resolve to one of the incident elements.
    pub fn locate(&self, p: Point<T>) -> Option<(usize, [T; 3])> {
        let eps = cast::<T>(1e-12);
        match self.kind {
            MeshKind::Interval { n } => {
                let x = p[0];
                if x < -eps || x > T::one() + eps {
                    return None;
                }
                let nf = cast::<T>(n as f64);
                let mut i = (x * nf).floor().to_f64().unwrap_or(0.0) as usize;
                i = i.min(n - 1);
                self.barycentric(i, p).map(|b| (i, b))
            }
            MeshKind::UnitSquare { n } => {
                let (x, y) = (p[0], p[1]);
                if x < -eps || x > T::one() + eps || y < -eps || y > T::one() + eps {
                    return None;
                }
                let nf = cast::<T>(n as f64);
                let ci = (x * nf).floor().to_f64().unwrap_or(0.0) as usize;
                let cj = (y * nf).floor().to_f64().unwrap_or(0.0) as usize;
                let ci = ci.min(n - 1);
                let cj = cj.min(n - 1);
                let base = 2 * (cj * n + ci);
                for e in [base, base + 1] {
                    if let Some(b) = self.barycentric(e, p) {
                        return Some((e, b));
                    }
                }
                None
            }
            MeshKind::General => {
                for e in 0..self.n_elements() {
                    if let Some(b) = self.barycentric(e, p) {
                        return Some((e, b));
                    }
                }
                None
            }
        }
    }

    /// Barycentric coordinates of `p` within element `e`, or `None` if the
    /// point lies outside (with a small tolerance).
    pub fn barycentric(&self, e: usize, p: Point<T>) -> Option<[T; 3]> {
        let eps = cast::<T>(1e-12);
        let conn = self.element(e);
        match self.dim {
            1 => {
                let x0 = self.vertices[conn[0]][0];
                let x1 = self.vertices[conn[1]][0];
                let t = (p[0] - x0) / (x1 - x0);
                if t < -eps || t > T::one() + eps {
                    return None;
                }
                Some([T::one() - t, t, T::zero()])
            }
            2 => {
                let a = self.vertices[conn[0]];
                let b = self.vertices[conn[1]];
                let c = self.vertices[conn[2]];
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
                let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
                let l0 = T::one() - l1 - l2;
                if l0 < -eps || l1 < -eps || l2 < -eps {
                    return None;
                }
                Some([l0, l1, l2])
            }
            _ => unreachable!(),
        }
    }
}

fn flag_name(b: bool) -> &'static str {
    if b {
        "boundary"
    } else {
        "interior"
    }
}

fn signed_measure<T: Scalar>(dim: usize, vertices: &[Point<T>], conn: &[usize]) -> T {
    match dim {
        1 => vertices[conn[1]][0] - vertices[conn[0]][0],
        2 => {
            let a = vertices[conn[0]];
            let b = vertices[conn[1]];
            let c = vertices[conn[2]];
            ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) * cast::<T>(0.5)
        }
        _ => unreachable!(),
    }
}

fn simplex_diameter<T: Scalar>(dim: usize, vertices: &[Point<T>], conn: &[usize]) -> T {
    let mut d = T::zero();
    for i in 0..conn.len() {
        for j in i + 1..conn.len() {
            let a = vertices[conn[i]];
            let b = vertices[conn[j]];
            let dx = a[0] - b[0];
            let dy = a[1] - b[1];
            d = d.max((dx * dx + dy * dy).sqrt());
        }
    }
    let _ = dim;
    d
}

/// Conformity check; returns the inferred boundary flags.
fn check_conformity<T: Scalar>(
    dim: usize,
    vertices: &[Point<T>],
    elements: &[usize],
    kind: MeshKind,
) -> Result<Vec<bool>, MeshError> {
    let stride = dim + 1;
    let n_elements = elements.len() / stride;
    let mut boundary = vec![false; vertices.len()];

    if dim == 1 {
        let mut incidence = vec![0usize; vertices.len()];
        for e in 0..n_elements {
            for &v in &elements[e * stride..(e + 1) * stride] {
                incidence[v] += 1;
            }
        }
        for (v, &c) in incidence.iter().enumerate() {
            match c {
                0 => {
                    return Err(MeshError::Nonconforming(format!(
                        "vertex {v} belongs to no element"
                    )))
                }
                1 => boundary[v] = true,
                2 => {}
                c => {
                    return Err(MeshError::Nonconforming(format!(
                        "vertex {v} belongs to {c} interval elements"
                    )))
                }
            }
        }
        // intervals must tile without overlap: sort by left endpoint and
        // require each right vertex to be the next left vertex
        let mut order: Vec<usize> = (0..n_elements).collect();
        order.sort_by(|&a, &b| {
            vertices[elements[a * stride]][0]
                .partial_cmp(&vertices[elements[b * stride]][0])
                .unwrap()
        });
        for w in order.windows(2) {
            let right = elements[w[0] * stride + 1];
            let left = elements[w[1] * stride];
            if right != left {
                return Err(MeshError::Nonconforming(format!(
                    "elements {} and {} do not share an endpoint",
                    w[0], w[1]
                )));
            }
        }
        return Ok(boundary);
    }

    // 2D: each edge in at most two elements, consistently oriented
    let mut edges: BTreeMap<(usize, usize), Vec<bool>> = BTreeMap::new();
    for e in 0..n_elements {
        let conn = &elements[e * stride..(e + 1) * stride];
        for k in 0..3 {
            let a = conn[k];
            let b = conn[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            edges.entry(key).or_default().push(a < b);
        }
    }
    for (&(a, b), incident) in &edges {
        match incident.len() {
            1 => {
                boundary[a] = true;
                boundary[b] = true;
            }
            2 => {
                if incident[0] == incident[1] {
                    return Err(MeshError::Nonconforming(format!(
                        "edge ({a}, {b}) has the same orientation in two elements"
                    )));
                }
            }
            c => {
                return Err(MeshError::Nonconforming(format!(
                    "edge ({a}, {b}) is shared by {c} elements"
                )));
            }
        }
    }
    let mut used = vec![false; vertices.len()];
    for &v in elements {
        used[v] = true;
    }
    if let Some(v) = used.iter().position(|&u| !u) {
        return Err(MeshError::Nonconforming(format!(
            "vertex {v} belongs to no element"
        )));
    }

    // hanging vertex scan for meshes from files; structured generators are
    // conforming by construction
    if kind == MeshKind::General {
        let tol = cast::<T>(1e-12);
        for (&(a, b), _) in &edges {
            let pa = vertices[a];
            let pb = vertices[b];
            let ex = pb[0] - pa[0];
            let ey = pb[1] - pa[1];
            let len2 = ex * ex + ey * ey;
            for (v, pv) in vertices.iter().enumerate() {
                if v == a || v == b {
                    continue;
                }
                let dx = pv[0] - pa[0];
                let dy = pv[1] - pa[1];
                let cross = (ex * dy - ey * dx).abs();
                let t = (dx * ex + dy * ey) / len2;
                if cross * cross <= tol * tol * len2 && t > tol && t < T::one() - tol {
                    return Err(MeshError::Nonconforming(format!(
                        "vertex {v} lies inside edge ({a}, {b})"
                    )));
                }
            }
        }
    }
    Ok(boundary)
}

/// Uniform mesh of the interval (0,1) with `n` elements.
pub fn generate_interval_mesh<T: Scalar>(n: usize) -> Result<Mesh<T>, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidArgument(
            "interval mesh needs at least one element".into(),
        ));
    }
    let nf = cast::<T>(n as f64);
    let vertices: Vec<Point<T>> = (0..=n)
        .map(|i| [cast::<T>(i as f64) / nf, T::zero()])
        .collect();
    let mut elements = Vec::with_capacity(2 * n);
    for i in 0..n {
        elements.push(i);
        elements.push(i + 1);
    }
    Mesh::from_data(1, vertices, elements, None, MeshKind::Interval { n })
}

/// Structured triangulation of the unit square with `n` cells per side,
/// each split into two right isoceles triangles. The split diagonal
/// alternates with the cell parity; every dihedral angle is at most π/2.
pub fn generate_unit_square_mesh<T: Scalar>(n: usize) -> Result<Mesh<T>, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidArgument(
            "unit square mesh needs at least one cell per side".into(),
        ));
    }
    let nf = cast::<T>(n as f64);
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([cast::<T>(i as f64) / nf, cast::<T>(j as f64) / nf]);
        }
    }
    let mut elements = Vec::with_capacity(6 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = idx(i, j);
            let v10 = idx(i + 1, j);
            let v01 = idx(i, j + 1);
            let v11 = idx(i + 1, j + 1);
            if (i + j) % 2 == 0 {
                // diagonal v00 - v11
                elements.extend_from_slice(&[v00, v10, v11]);
                elements.extend_from_slice(&[v00, v11, v01]);
            } else {
                // diagonal v10 - v01
                elements.extend_from_slice(&[v00, v10, v01]);
                elements.extend_from_slice(&[v10, v11, v01]);
            }
        }
    }
    Mesh::from_data(2, vertices, elements, None, MeshKind::UnitSquare { n })
}

/// Mesh quality diagnostics.
#[derive(Clone, Debug)]
pub struct MeshQualityReport<T> {
    /// Largest angle over all elements (radians); zero for interval meshes.
    pub max_dihedral_angle: T,
    /// True when every angle is at most π/2 (within [`TOL_ANGLE`]) and no
    /// element is degenerate.
    pub is_nonobtuse: bool,
    /// Largest over smallest element diameter.
    pub quasiuniformity_ratio: T,
    /// Largest off-diagonal stiffness entry between distinct interior
    /// vertices; at most [`TOL_ASM`] on nonobtuse meshes.
    pub offdiag_stiffness_max: T,
    /// Index of a (near-)degenerate element, if one was found.
    pub degenerate_element: Option<usize>,
}

/// Compute angles, quasiuniformity, and the sign of the assembled
/// off-diagonal stiffness entries.
pub fn check_quality<T: Scalar>(mesh: &Mesh<T>) -> MeshQualityReport<T> {
    let mut max_angle = T::zero();
    let mut degenerate = None;
    if mesh.dim() == 2 {
        for e in 0..mesh.n_elements() {
            let p = mesh.element_points(e);
            if mesh.measure(e) <= cast::<T>(1e-14) * mesh.diameter(e) * mesh.diameter(e) {
                degenerate = Some(e);
                continue;
            }
            for i in 0..3 {
                let a = p[(i + 1) % 3];
                let b = p[(i + 2) % 3];
                let o = p[i];
                let u = [a[0] - o[0], a[1] - o[1]];
                let v = [b[0] - o[0], b[1] - o[1]];
                let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
                let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                let mut c = (u[0] * v[0] + u[1] * v[1]) / (nu * nv);
                c = c.min(T::one()).max(-T::one());
                max_angle = max_angle.max(c.acos());
            }
        }
    }

    let mut dmin = T::infinity();
    let mut dmax = T::zero();
    for e in 0..mesh.n_elements() {
        dmin = dmin.min(mesh.diameter(e));
        dmax = dmax.max(mesh.diameter(e));
    }

    // off-diagonal stiffness entries between interior vertices
    let mut offdiag: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for e in 0..mesh.n_elements() {
        let conn = mesh.element(e);
        let grads = mesh.basis_gradients(e);
        let m = mesh.measure(e);
        for i in 0..conn.len() {
            for j in 0..conn.len() {
                if i == j {
                    continue;
                }
                let (zi, zj) = (conn[i], conn[j]);
                if mesh.is_boundary(zi) || mesh.is_boundary(zj) {
                    continue;
                }
                let key = (zi.min(zj), zi.max(zj));
                let val = m * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                *offdiag.entry(key).or_insert_with(T::zero) += val;
            }
        }
    }
    // each pair was accumulated twice (i,j) and (j,i); halve
    let offdiag_max = offdiag
        .values()
        .map(|&v| v * cast::<T>(0.5))
        .fold(T::neg_infinity(), |m, v| m.max(v));
    let offdiag_max = if offdiag.is_empty() {
        T::zero()
    } else {
        offdiag_max
    };

    let half_pi = cast::<T>(std::f64::consts::FRAC_PI_2 + TOL_ANGLE);
    let is_nonobtuse = degenerate.is_none() && max_angle <= half_pi;
    MeshQualityReport {
        max_dihedral_angle: max_angle,
        is_nonobtuse,
        quasiuniformity_ratio: if dmin > T::zero() { dmax / dmin } else { T::infinity() },
        offdiag_stiffness_max: offdiag_max,
        degenerate_element: degenerate,
    }
}

/// Serialize to the text format; `load_mesh(save_mesh(m))` reproduces the
/// mesh exactly (floats print in shortest round-trip form).
pub fn save_mesh<T: Scalar>(mesh: &Mesh<T>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "d {} {} {}\n",
        mesh.dim(),
        mesh.n_vertices(),
        mesh.n_elements()
    ));
    for v in 0..mesh.n_vertices() {
        let p = mesh.vertex(v);
        if mesh.dim() == 1 {
            out.push_str(&format!("v {}\n", p[0]));
        } else {
            out.push_str(&format!("v {} {}\n", p[0], p[1]));
        }
    }
    for e in 0..mesh.n_elements() {
        let conn = mesh.element(e);
        let ids: Vec<String> = conn.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("e {}\n", ids.join(" ")));
    }
    for v in 0..mesh.n_vertices() {
        if mesh.is_boundary(v) {
            out.push_str(&format!("b {}\n", v));
        }
    }
    out
}

/// Parse the text format. Boundary lines are optional; when present they
/// must agree with the face-incidence classification.
pub fn load_mesh<T: Scalar>(text: &str) -> Result<Mesh<T>, MeshError> {
    let mut dim = 0usize;
    let mut n_vertices = 0usize;
    let mut n_elements = 0usize;
    let mut vertices: Vec<Point<T>> = Vec::new();
    let mut elements: Vec<usize> = Vec::new();
    let mut boundary_ids: Vec<(usize, usize)> = Vec::new(); // (line, vertex)
    let mut seen_header = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let tag = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        match tag {
            "d" => {
                if seen_header {
                    return Err(MeshError::Parse {
                        line,
                        message: "duplicate header line".into(),
                    });
                }
                if rest.len() != 3 {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("header needs 3 fields, got {}", rest.len()),
                    });
                }
                dim = parse_usize(rest[0], line)?;
                n_vertices = parse_usize(rest[1], line)?;
                n_elements = parse_usize(rest[2], line)?;
                if dim != 1 && dim != 2 {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("dimension must be 1 or 2, got {dim}"),
                    });
                }
                seen_header = true;
            }
            "v" => {
                if !seen_header {
                    return Err(MeshError::Parse {
                        line,
                        message: "vertex line before header".into(),
                    });
                }
                if rest.len() != dim {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("vertex needs {dim} coordinates, got {}", rest.len()),
                    });
                }
                let x = parse_float::<T>(rest[0], line)?;
                let y = if dim == 2 {
                    parse_float::<T>(rest[1], line)?
                } else {
                    T::zero()
                };
                vertices.push([x, y]);
            }
            "e" => {
                if !seen_header {
                    return Err(MeshError::Parse {
                        line,
                        message: "element line before header".into(),
                    });
                }
                if rest.len() != dim + 1 {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("element needs {} indices, got {}", dim + 1, rest.len()),
                    });
                }
                for tok in &rest {
                    let idx = parse_usize(tok, line)?;
                    if idx >= n_vertices {
                        return Err(MeshError::IndexOutOfRange {
                            line,
                            index: idx,
                            len: n_vertices,
                        });
                    }
                    elements.push(idx);
                }
            }
            "b" => {
                if rest.len() != 1 {
                    return Err(MeshError::Parse {
                        line,
                        message: "boundary line needs exactly one index".into(),
                    });
                }
                let idx = parse_usize(rest[0], line)?;
                boundary_ids.push((line, idx));
            }
            other => {
                return Err(MeshError::Parse {
                    line,
                    message: format!("unknown line tag '{other}'"),
                });
            }
        }
    }
    if !seen_header {
        return Err(MeshError::Parse {
            line: 0,
            message: "missing header line".into(),
        });
    }
    if vertices.len() != n_vertices {
        return Err(MeshError::Parse {
            line: 0,
            message: format!(
                "header declares {n_vertices} vertices but {} were given",
                vertices.len()
            ),
        });
    }
    if elements.len() != n_elements * (dim + 1) {
        return Err(MeshError::Parse {
            line: 0,
            message: format!(
                "header declares {n_elements} elements but {} were given",
                elements.len() / (dim + 1)
            ),
        });
    }
    let boundary = if boundary_ids.is_empty() {
        None
    } else {
        let mut flags = vec![false; n_vertices];
        for (line, idx) in boundary_ids {
            if idx >= n_vertices {
                return Err(MeshError::IndexOutOfRange {
                    line,
                    index: idx,
                    len: n_vertices,
                });
            }
            flags[idx] = true;
        }
        Some(flags)
    };
    Mesh::from_data(dim, vertices, elements, boundary, MeshKind::General)
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, MeshError> {
    tok.parse::<usize>().map_err(|e| MeshError::Parse {
        line,
        message: format!("'{tok}': {e}"),
    })
}

fn parse_float<T: Scalar>(tok: &str, line: usize) -> Result<T, MeshError> {
    let v: f64 = tok.parse().map_err(|e| MeshError::Parse {
        line,
        message: format!("'{tok}': {e}"),
    })?;
    if !v.is_finite() {
        return Err(MeshError::Parse {
            line,
            message: format!("'{tok}' is not finite"),
        });
    }
    Ok(cast(v))
}

/// Two-triangle mesh with an obtuse angle, for negative tests.
pub fn obtuse_two_triangle_mesh<T: Scalar>() -> Mesh<T> {
    let vertices = vec![
        [cast::<T>(0.0), cast::<T>(0.0)],
        [cast::<T>(1.0), cast::<T>(0.0)],
        [cast::<T>(-0.5), cast::<T>(0.2)],
        [cast::<T>(1.5), cast::<T>(0.2)],
    ];
    let elements = vec![0, 1, 2, 1, 3, 2];
    Mesh::from_data(2, vertices, elements, None, MeshKind::General)
        .expect("hard-coded mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_mesh_basics() {
        let m = generate_interval_mesh::<f64>(4).unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.n_vertices(), 5);
        assert_eq!(m.n_elements(), 4);
        assert!((m.mesh_size() - 0.25).abs() < 1e-15);
        let interior: Vec<f64> = m.interior_vertices().iter().map(|&v| m.vertex(v)[0]).collect();
        assert_eq!(interior, vec![0.25, 0.5, 0.75]);
        let q = check_quality(&m);
        assert!(q.is_nonobtuse);
        assert!((q.quasiuniformity_ratio - 1.0).abs() < 1e-14);
    }

    #[test]
    fn interval_mesh_degenerate_cases() {
        assert!(generate_interval_mesh::<f64>(0).is_err());
        let m = generate_interval_mesh::<f64>(1).unwrap();
        assert_eq!(m.n_interior(), 0);
        let m8 = generate_interval_mesh::<f64>(8).unwrap();
        assert!(m8.measures.iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn unit_square_mesh_counts() {
        assert!(generate_unit_square_mesh::<f64>(0).is_err());
        let m1 = generate_unit_square_mesh::<f64>(1).unwrap();
        assert_eq!(m1.n_elements(), 2);
        assert_eq!(m1.n_interior(), 0);

        let m2 = generate_unit_square_mesh::<f64>(2).unwrap();
        assert_eq!(m2.n_elements(), 8);
        assert_eq!(m2.n_interior(), 1);
        let q = check_quality(&m2);
        assert!(q.is_nonobtuse);
        assert!((q.max_dihedral_angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

        let m4 = generate_unit_square_mesh::<f64>(4).unwrap();
        assert_eq!(m4.n_elements(), 32);
        assert_eq!(m4.n_interior(), 9);
        assert!(check_quality(&m4).is_nonobtuse);
    }

    #[test]
    fn measures_sum_to_domain_measure() {
        for n in [1usize, 3, 7] {
            let m = generate_interval_mesh::<f64>(n).unwrap();
            assert!((m.domain_measure() - 1.0).abs() < 1e-12);
        }
        for n in [1usize, 2, 5] {
            let m = generate_unit_square_mesh::<f64>(n).unwrap();
            assert!((m.domain_measure() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_halves_mesh_size() {
        for n in [2usize, 4, 8] {
            let a = generate_interval_mesh::<f64>(n).unwrap();
            let b = generate_interval_mesh::<f64>(2 * n).unwrap();
            assert!((a.mesh_size() / b.mesh_size() - 2.0).abs() < 1e-13);

            let a = generate_unit_square_mesh::<f64>(n).unwrap();
            let b = generate_unit_square_mesh::<f64>(2 * n).unwrap();
            assert!((a.mesh_size() / b.mesh_size() - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn nonobtuse_meshes_have_nonpositive_offdiagonals() {
        for n in [3usize, 5] {
            let m = generate_unit_square_mesh::<f64>(n).unwrap();
            let q = check_quality(&m);
            assert!(q.is_nonobtuse);
            assert!(q.offdiag_stiffness_max <= TOL_ASM);
        }
        let m = generate_interval_mesh::<f64>(6).unwrap();
        assert!(check_quality(&m).offdiag_stiffness_max <= TOL_ASM);
    }

    #[test]
    fn obtuse_mesh_detected() {
        let m = obtuse_two_triangle_mesh::<f64>();
        let q = check_quality(&m);
        assert!(!q.is_nonobtuse);
        assert!(q.max_dihedral_angle > std::f64::consts::FRAC_PI_2 + 0.1);
    }

    #[test]
    fn save_load_round_trip() {
        let m = generate_unit_square_mesh::<f64>(2).unwrap();
        let text = save_mesh(&m);
        let loaded = load_mesh::<f64>(&text).unwrap();
        assert_eq!(loaded.n_vertices(), m.n_vertices());
        assert_eq!(loaded.n_elements(), m.n_elements());
        for e in 0..m.n_elements() {
            assert!((loaded.measure(e) - m.measure(e)).abs() < 1e-15);
        }
        for v in 0..m.n_vertices() {
            assert_eq!(loaded.is_boundary(v), m.is_boundary(v));
        }

        let m1 = generate_interval_mesh::<f64>(2).unwrap();
        let text = save_mesh(&m1);
        let v_lines = text.lines().filter(|l| l.starts_with("v ")).count();
        let e_lines = text.lines().filter(|l| l.starts_with("e ")).count();
        assert_eq!((v_lines, e_lines), (3, 2));
        assert!(load_mesh::<f64>(&text).is_ok());
    }

    #[test]
    fn load_rejects_bad_input() {
        // vertex index out of range
        let text = "d 1 3 2\nv 0\nv 0.5\nv 1\ne 0 1\ne 1 99\n";
        assert!(matches!(
            load_mesh::<f64>(text),
            Err(MeshError::IndexOutOfRange { index: 99, .. })
        ));
        // malformed coordinate
        let text = "d 1 2 1\nv 0\nv abc\ne 0 1\n";
        assert!(matches!(load_mesh::<f64>(text), Err(MeshError::Parse { .. })));
        // overlapping intervals are nonconforming
        let text = "d 1 4 2\nv 0\nv 0.6\nv 0.4\nv 1\ne 0 1\ne 2 3\n";
        assert!(matches!(
            load_mesh::<f64>(text),
            Err(MeshError::Nonconforming(_))
        ));
        // boundary flags contradicting face incidence
        let text = "d 1 3 2\nv 0\nv 0.5\nv 1\ne 0 1\ne 1 2\nb 0\nb 1\n";
        assert!(matches!(
            load_mesh::<f64>(text),
            Err(MeshError::BoundaryMismatch(_))
        ));
    }

    #[test]
    fn locate_finds_points() {
        let m = generate_unit_square_mesh::<f64>(3).unwrap();
        for &p in &[[0.1, 0.2], [0.99, 0.01], [0.5, 0.5], [1.0, 1.0]] {
            let (e, b) = m.locate(p).expect("point inside the square");
            let pts = m.element_points(e);
            let x = b[0] * pts[0][0] + b[1] * pts[1][0] + b[2] * pts[2][0];
            let y = b[0] * pts[0][1] + b[1] * pts[1][1] + b[2] * pts[2][1];
            assert!((x - p[0]).abs() < 1e-12 && (y - p[1]).abs() < 1e-12);
        }
        assert!(m.locate([1.5, 0.5]).is_none());

        let m1 = generate_interval_mesh::<f64>(5).unwrap();
        let (e, b) = m1.locate([0.31, 0.0]).unwrap();
        assert_eq!(e, 1);
        assert!((b[0] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn basis_gradients_sum_to_zero() {
        let m = generate_unit_square_mesh::<f64>(2).unwrap();
        for e in 0..m.n_elements() {
            let g = m.basis_gradients(e);
            let sx: f64 = g.iter().map(|v| v[0]).sum();
            let sy: f64 = g.iter().map(|v| v[1]).sum();
            assert!(sx.abs() < 1e-13 && sy.abs() < 1e-13);
        }
    }
}
