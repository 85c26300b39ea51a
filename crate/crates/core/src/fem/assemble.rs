//! Global assembly of the forms used by the benchmark problems.

use std::collections::HashMap;

use super::element::{p1_element, p2_grads, p2_values};
use super::quadrature::{map_point, SEGMENT_GAUSS3, TRIANGLE_DEG4};
use super::space::{FunctionSpace, SpaceKind};
use super::sparse::{FactorKind, SparseMatrix};
use super::LinearSystem;
use crate::mesh::{Point, TriMesh};
use crate::{Error, Result};

fn prepare(mesh: &TriMesh, space: &FunctionSpace, kind: SpaceKind) -> Result<()> {
    space.require(kind)?;
    space.check_mesh(mesh)
}

/// Stiffness matrix of `∫ κ ∇u·∇v` with one coefficient per triangle.
pub fn assemble_poisson(mesh: &TriMesh, space: &FunctionSpace, kappa: &[f64]) -> Result<SparseMatrix> {
    prepare(mesh, space, SpaceKind::P1)?;
    if kappa.len() != mesh.n_triangles() {
        return Err(Error::InvalidInput("one coefficient per triangle required".into()));
    }
    if let Some(k) = kappa.iter().find(|k| !(**k > 0.0) || !k.is_finite()) {
        return Err(Error::InvalidInput(format!("diffusion coefficient must be positive, got {k}")));
    }
    let mut a = SparseMatrix::zeros(space.pattern());
    for t in 0..mesh.n_triangles() {
        let e = p1_element(&mesh.triangle_coords(t));
        let dofs = space.cell_dofs(t);
        for i in 0..3 {
            for j in 0..3 {
                let v = kappa[t] * e.area * (e.grads[i][0] * e.grads[j][0] + e.grads[i][1] * e.grads[j][1]);
                a.add(dofs[i], dofs[j], v);
            }
        }
    }
    Ok(a)
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &TriMesh, space: &FunctionSpace) -> Result<SparseMatrix> {
    prepare(mesh, space, SpaceKind::P1)?;
    let mut m = SparseMatrix::zeros(space.pattern());
    for t in 0..mesh.n_triangles() {
        let area = mesh.signed_area(t);
        let dofs = space.cell_dofs(t);
        for i in 0..3 {
            for j in 0..3 {
                m.add(dofs[i], dofs[j], area * if i == j { 1.0 / 6.0 } else { 1.0 / 12.0 });
            }
        }
    }
    Ok(m)
}

/// Load vector `∫ f φ_i` for an analytic density, integrated with the
/// degree-4 rule.
pub fn assemble_load(mesh: &TriMesh, space: &FunctionSpace, f: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    prepare(mesh, space, SpaceKind::P1)?;
    let mut b = vec![0.0; space.n_dofs()];
    for t in 0..mesh.n_triangles() {
        let p = mesh.triangle_coords(t);
        let area = mesh.signed_area(t);
        let dofs = space.cell_dofs(t);
        for q in &TRIANGLE_DEG4 {
            let fx = f(map_point(&p, q.bary)) * q.weight * area;
            for i in 0..3 {
                b[dofs[i]] += fx * q.bary[i];
            }
        }
    }
    Ok(b)
}

/// Load vector for a density given by nodal P1 values.
pub fn assemble_nodal_load(mesh: &TriMesh, space: &FunctionSpace, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != mesh.n_nodes() {
        return Err(Error::InvalidInput("one density value per node required".into()));
    }
    Ok(assemble_mass(mesh, space)?.matvec(values))
}

/// Boundary load `∫_Γ f φ_i ds` over the facets carrying `tags`.
pub fn assemble_boundary_load<S: AsRef<str>>(
    mesh: &TriMesh,
    space: &FunctionSpace,
    tags: &[S],
    f: impl Fn(Point) -> f64,
) -> Result<Vec<f64>> {
    prepare(mesh, space, SpaceKind::P1)?;
    mesh.require_tags(tags)?;
    let mut b = vec![0.0; space.n_dofs()];
    for tag in tags {
        for [i, j] in mesh.facets_with_tag(tag.as_ref()) {
            let (a, c) = (mesh.coords()[i], mesh.coords()[j]);
            let len = (c[0] - a[0]).hypot(c[1] - a[1]);
            for (s, w) in SEGMENT_GAUSS3 {
                let fx = f([a[0] + s * (c[0] - a[0]), a[1] + s * (c[1] - a[1])]) * w * len;
                b[i] += fx * (1.0 - s);
                b[j] += fx * s;
            }
        }
    }
    Ok(b)
}

/// Boundary mass matrix `∫_Γ φ_i φ_j ds` over the facets carrying `tags`.
pub fn assemble_boundary_mass<S: AsRef<str>>(
    mesh: &TriMesh,
    space: &FunctionSpace,
    tags: &[S],
) -> Result<SparseMatrix> {
    prepare(mesh, space, SpaceKind::P1)?;
    mesh.require_tags(tags)?;
    let mut m = SparseMatrix::zeros(space.pattern());
    for tag in tags {
        for [i, j] in mesh.facets_with_tag(tag.as_ref()) {
            let (a, c) = (mesh.coords()[i], mesh.coords()[j]);
            let len = (c[0] - a[0]).hypot(c[1] - a[1]);
            m.add(i, i, len / 3.0);
            m.add(j, j, len / 3.0);
            m.add(i, j, len / 6.0);
            m.add(j, i, len / 6.0);
        }
    }
    Ok(m)
}

/// Second Lamé parameter of the elasticity form.
#[derive(Debug, Clone, PartialEq)]
pub enum LameMu {
    Constant(f64),
    /// P1 nodal values; each element uses the mean of its vertex values.
    Nodal(Vec<f64>),
}

impl LameMu {
    pub fn element_value(&self, tri: &[usize; 3]) -> f64 {
        match self {
            LameMu::Constant(m) => *m,
            LameMu::Nodal(v) => (v[tri[0]] + v[tri[1]] + v[tri[2]]) / 3.0,
        }
    }

    fn min(&self) -> f64 {
        match self {
            LameMu::Constant(m) => *m,
            LameMu::Nodal(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Element matrix of `∫ 2μ ε(V):ε(W) + λ div V div W + δ V·W` in the local
/// ordering `2 a + c` (vertex `a`, component `c`).
pub fn elasticity_element(p: &[Point; 3], lambda: f64, mu: f64, delta: f64) -> [[f64; 6]; 6] {
    let e = p1_element(p);
    let g = e.grads;
    let mut k = [[0.0; 6]; 6];
    for a in 0..3 {
        for b in 0..3 {
            let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1];
            let mass = e.area * if a == b { 1.0 / 6.0 } else { 1.0 / 12.0 };
            for c in 0..2 {
                for d in 0..2 {
                    let kron = if c == d { 1.0 } else { 0.0 };
                    let v = e.area * (mu * (kron * gg + g[a][d] * g[b][c]) + lambda * g[a][c] * g[b][d])
                        + delta * mass * kron;
                    k[2 * a + c][2 * b + d] = v;
                }
            }
        }
    }
    k
}

/// Elasticity matrix on the P1 vector space with the dofs of nodes on
/// `fixed_tags` eliminated symmetrically. Returns the matrix and the mask of
/// eliminated dofs.
pub fn assemble_elasticity<S: AsRef<str>>(
    mesh: &TriMesh,
    space: &FunctionSpace,
    lambda: f64,
    mu: &LameMu,
    delta: f64,
    fixed_tags: &[S],
) -> Result<(SparseMatrix, Vec<bool>)> {
    prepare(mesh, space, SpaceKind::P1Vec)?;
    if let LameMu::Nodal(v) = mu {
        if v.len() != mesh.n_nodes() {
            return Err(Error::InvalidInput("one μ value per node required".into()));
        }
    }
    let mu_min = mu.min();
    if !(mu_min > 0.0) {
        return Err(Error::NotCoercive(format!("μ must be positive, minimum is {mu_min}")));
    }
    if !(mu_min + lambda > 0.0) {
        return Err(Error::NotCoercive(format!("2μ + 2λ must be positive (λ = {lambda})")));
    }
    if !(delta >= 0.0) {
        return Err(Error::NotCoercive(format!("δ must be non-negative, got {delta}")));
    }
    if delta == 0.0 && fixed_tags.is_empty() {
        return Err(Error::NotCoercive("δ = 0 requires a fixed boundary".into()));
    }
    mesh.require_tags(fixed_tags)?;

    let mut a = SparseMatrix::zeros(space.pattern());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let k = elasticity_element(&mesh.triangle_coords(t), lambda, mu.element_value(tri), delta);
        let dofs = space.cell_dofs(t);
        for i in 0..6 {
            for j in 0..6 {
                a.add(dofs[i], dofs[j], k[i][j]);
            }
        }
    }
    let nodes = mesh.nodes_on_tags(fixed_tags);
    let fixed: Vec<bool> = (0..space.n_dofs()).map(|d| nodes[d / 2]).collect();
    a.eliminate(&fixed);
    Ok((a, fixed))
}

/// Vector-valued boundary datum.
pub type VectorFn<'a> = Box<dyn Fn(Point) -> [f64; 2] + Send + Sync + 'a>;

/// Boundary conditions of a Stokes problem: prescribed velocity per tag and
/// an optional traction on one tag. Untouched boundaries are do-nothing.
#[derive(Default)]
pub struct StokesBoundary<'a> {
    pub dirichlet: Vec<(String, VectorFn<'a>)>,
    pub traction: Option<(String, VectorFn<'a>)>,
}

/// Taylor-Hood element matrices: velocity Laplacian `K[(a,c),(b,d)]` (12x12)
/// and divergence `B[i][(a,c)] = -∫ φ_i ∂_c ψ_a` (3x12).
pub fn stokes_element(p: &[Point; 3], viscosity: f64) -> ([[f64; 12]; 12], [[f64; 12]; 3]) {
    let e = p1_element(p);
    let mut k = [[0.0; 12]; 12];
    let mut b = [[0.0; 12]; 3];
    for q in &TRIANGLE_DEG4 {
        let w = q.weight * e.area;
        let gr = p2_grads(q.bary, &e.grads);
        for a in 0..6 {
            for bb in 0..6 {
                let v = viscosity * w * (gr[a][0] * gr[bb][0] + gr[a][1] * gr[bb][1]);
                k[2 * a][2 * bb] += v;
                k[2 * a + 1][2 * bb + 1] += v;
            }
            for i in 0..3 {
                for c in 0..2 {
                    b[i][2 * a + c] -= w * q.bary[i] * gr[a][c];
                }
            }
        }
    }
    (k, b)
}

/// Assembles the Taylor-Hood saddle-point system
/// `[K Bᵀ; B 0] (u, p) = (f, 0)` with Dirichlet velocities eliminated.
pub fn assemble_stokes(
    mesh: &TriMesh,
    space: &FunctionSpace,
    viscosity: f64,
    bc: &StokesBoundary<'_>,
) -> Result<LinearSystem> {
    prepare(mesh, space, SpaceKind::TaylorHood)?;
    if !(viscosity > 0.0) {
        return Err(Error::InvalidInput("viscosity must be positive".into()));
    }
    let tags: Vec<&str> = bc.dirichlet.iter().map(|(t, _)| t.as_str()).collect();
    mesh.require_tags(&tags)?;
    if mesh.tag_names().iter().all(|t| tags.contains(&t.as_str())) {
        return Err(Error::Singular("no natural (outflow) boundary: the pressure is undetermined".into()));
    }

    let mut a = SparseMatrix::zeros(space.pattern());
    let off = space.pressure_offset();
    for t in 0..mesh.n_triangles() {
        let (k, b) = stokes_element(&mesh.triangle_coords(t), viscosity);
        let dofs = space.cell_dofs(t);
        for i in 0..12 {
            for j in 0..12 {
                if k[i][j] != 0.0 {
                    a.add(dofs[i], dofs[j], k[i][j]);
                }
            }
        }
        for i in 0..3 {
            let pi = dofs[12 + i];
            debug_assert!(pi >= off);
            for j in 0..12 {
                a.add(pi, dofs[j], b[i][j]);
                a.add(dofs[j], pi, b[i][j]);
            }
        }
    }

    let mut rhs = vec![0.0; space.n_dofs()];
    if let Some((tag, h)) = &bc.traction {
        mesh.require_tags(&[tag])?;
        let n = mesh.n_nodes();
        let edges: HashMap<[usize; 2], usize> =
            mesh.topology().edges().iter().enumerate().map(|(e, k)| (*k, e)).collect();
        for [i, j] in mesh.facets_with_tag(tag) {
            let e = edges[&[i.min(j), i.max(j)]];
            let (pa, pb) = (mesh.coords()[i], mesh.coords()[j]);
            let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
            for (s, w) in SEGMENT_GAUSS3 {
                let hx = h([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]);
                let basis = [(i, (1.0 - s) * (1.0 - 2.0 * s)), (j, s * (2.0 * s - 1.0)), (n + e, 4.0 * s * (1.0 - s))];
                for (node, phi) in basis {
                    for c in 0..2 {
                        rhs[2 * node + c] += w * len * hx[c] * phi;
                    }
                }
            }
        }
    }

    let pts = space.p2_node_coords(mesh);
    let mut constraints = Vec::new();
    let mut value = vec![None; space.pressure_offset()];
    for (tag, g) in &bc.dirichlet {
        for node in space.p2_nodes_on_tags(mesh, &[tag]) {
            let v = g(pts[node]);
            value[2 * node] = Some(v[0]);
            value[2 * node + 1] = Some(v[1]);
        }
    }
    for (d, v) in value.iter().enumerate() {
        if let Some(v) = v {
            constraints.push((d, *v));
        }
    }
    let mut system = LinearSystem::new(a, rhs, FactorKind::Ldlt);
    system.apply_dirichlet(&constraints)?;
    Ok(system)
}

/// `‖u_h - u‖_{L²}` for a P1 scalar field.
pub fn l2_error_p1(mesh: &TriMesh, values: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let mut err = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_coords(t);
        let area = mesh.signed_area(t);
        for q in &TRIANGLE_DEG4 {
            let uh: f64 = (0..3).map(|i| q.bary[i] * values[tri[i]]).sum();
            let d = uh - exact(map_point(&p, q.bary));
            err += q.weight * area * d * d;
        }
    }
    err.sqrt()
}

/// `‖u_h - u‖_{L²}` for the P2 velocity of a P2Vec or Taylor-Hood field.
pub fn l2_error_p2_velocity(
    mesh: &TriMesh,
    space: &FunctionSpace,
    values: &[f64],
    exact: impl Fn(Point) -> [f64; 2],
) -> f64 {
    let mut err = 0.0;
    for t in 0..mesh.n_triangles() {
        let p = mesh.triangle_coords(t);
        let area = mesh.signed_area(t);
        let dofs = space.cell_dofs(t);
        for q in &TRIANGLE_DEG4 {
            let phi = p2_values(q.bary);
            let mut uh = [0.0; 2];
            for a in 0..6 {
                uh[0] += phi[a] * values[dofs[2 * a]];
                uh[1] += phi[a] * values[dofs[2 * a + 1]];
            }
            let u = exact(map_point(&p, q.bary));
            err += q.weight * area * ((uh[0] - u[0]).powi(2) + (uh[1] - u[1]).powi(2));
        }
    }
    err.sqrt()
}
