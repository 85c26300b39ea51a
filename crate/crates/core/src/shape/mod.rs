//! Shape derivatives, the elasticity inner product `a_Ω` that realizes the
//! Steklov-Poincaré metric, gradient deformations and the finite-difference
//! oracle.

mod fd;

use std::sync::Arc;

pub use fd::{fd_check, random_smooth_field, FdReport, FdRow};

use crate::fem::{
    assemble_elasticity, assemble_poisson, solve, FactorKind, Factorization, FunctionSpace, LameMu, LinearSystem,
    SpaceKind, SparseMatrix,
};
use crate::mesh::{NodalField, TriMesh};
use crate::{Error, Result};

/// `a_Ω(G, G)` at or below this value is treated as an exactly zero gradient.
pub const ZERO_GRADIENT_SQ: f64 = 1e-30;

/// The dual vector `dJ(Ω)[φ_i]` over the vector P1 basis, node-major.
///
/// Entries on fixed-boundary dofs are stored but ignored by every pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDerivative {
    values: Vec<f64>,
    fixed: Arc<Vec<bool>>,
    mesh_id: u64,
}

impl ShapeDerivative {
    /// Wraps assembled values; `fixed_tags` marks the non-deformable boundary.
    pub fn new<S: AsRef<str>>(mesh: &TriMesh, values: Vec<f64>, fixed_tags: &[S]) -> Result<Self> {
        if values.len() != 2 * mesh.n_nodes() {
            return Err(Error::InvalidInput("shape derivative needs two entries per node".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("shape derivative has non-finite entries".into()));
        }
        mesh.require_tags(fixed_tags)?;
        let nodes = mesh.nodes_on_tags(fixed_tags);
        let fixed = (0..values.len()).map(|d| nodes[d / 2]).collect();
        Ok(Self { values, fixed: Arc::new(fixed), mesh_id: mesh.id() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            fixed: Arc::clone(&self.fixed),
            mesh_id: self.mesh_id,
        }
    }

    /// Right-hand side of the Riesz problem: the values with fixed dofs zeroed.
    fn free_values(&self) -> Vec<f64> {
        self.values.iter().zip(self.fixed.iter()).map(|(v, f)| if *f { 0.0 } else { *v }).collect()
    }
}

/// The dual pairing `Σ_i dJ_i D_i` over unconstrained dofs; equals
/// `a_Ω(G, D)` for the gradient deformation `G`.
pub fn descent_value(dj: &ShapeDerivative, d: &NodalField) -> Result<f64> {
    if d.mesh_id() != dj.mesh_id {
        return Err(Error::MeshMismatch { expected: dj.mesh_id, found: d.mesh_id() });
    }
    if d.values().len() != dj.values.len() {
        return Err(Error::InvalidInput("direction must be a vector field".into()));
    }
    Ok(dj.values.iter().zip(d.values()).zip(dj.fixed.iter()).filter(|(_, f)| !**f).map(|((g, v), _)| g * v).sum())
}

/// How the second Lamé parameter is obtained on each mesh.
#[derive(Debug, Clone, PartialEq)]
pub enum MuSpec {
    Constant(f64),
    /// Harmonic extension of `max` on `max_tags` and `min` on `min_tags`,
    /// recomputed on every mesh.
    Laplace {
        max: f64,
        min: f64,
        max_tags: Vec<String>,
        min_tags: Vec<String>,
    },
}

/// Parameters of `a_Ω(V,W) = ∫ 2μ ε(V):ε(W) + λ div V div W + δ V·W` and the
/// boundary on which deformations vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricParams {
    pub lambda: f64,
    pub mu: MuSpec,
    pub delta: f64,
    pub fixed_tags: Vec<String>,
}

/// Harmonic μ field with Dirichlet values `mu_max` on `max_tags` and `mu_min`
/// on `min_tags` (the maximum wins where both meet).
pub fn solve_mu_field<S: AsRef<str>>(
    mesh: &TriMesh,
    mu_max: f64,
    mu_min: f64,
    max_tags: &[S],
    min_tags: &[S],
) -> Result<Vec<f64>> {
    mesh.require_tags(max_tags)?;
    mesh.require_tags(min_tags)?;
    if max_tags.is_empty() && min_tags.is_empty() {
        return Err(Error::InvalidInput("the μ problem needs at least one Dirichlet tag".into()));
    }
    let space = FunctionSpace::new(mesh, SpaceKind::P1);
    let k = assemble_poisson(mesh, &space, &vec![1.0; mesh.n_triangles()])?;
    let lo = mesh.nodes_on_tags(min_tags);
    let hi = mesh.nodes_on_tags(max_tags);
    let constraints: Vec<(usize, f64)> = (0..mesh.n_nodes())
        .filter_map(|i| {
            if hi[i] {
                Some((i, mu_max))
            } else if lo[i] {
                Some((i, mu_min))
            } else {
                None
            }
        })
        .collect();
    let mut sys = LinearSystem::new(k, vec![0.0; mesh.n_nodes()], FactorKind::Cholesky);
    sys.apply_dirichlet(&constraints)?;
    solve(&sys)
}

/// The assembled `a_Ω` on one mesh, with fixed dofs eliminated, and its
/// Cholesky factorization for Riesz solves.
pub struct InnerProductOperator {
    matrix: SparseMatrix,
    fixed: Vec<bool>,
    mesh_id: u64,
    params: MetricParams,
    factor: Factorization,
}

impl InnerProductOperator {
    /// Assembles `a_Ω` on `mesh`; `space` must be the vector P1 space of the
    /// mesh topology.
    pub fn assemble(mesh: &TriMesh, space: &FunctionSpace, params: &MetricParams) -> Result<Self> {
        let mu = match &params.mu {
            MuSpec::Constant(m) => LameMu::Constant(*m),
            MuSpec::Laplace { max, min, max_tags, min_tags } => {
                LameMu::Nodal(solve_mu_field(mesh, *max, *min, max_tags, min_tags)?)
            }
        };
        let (matrix, fixed) = assemble_elasticity(mesh, space, params.lambda, &mu, params.delta, &params.fixed_tags)?;
        let factor = Factorization::new(&matrix, FactorKind::Cholesky)?;
        Ok(Self { matrix, fixed, mesh_id: mesh.id(), params: params.clone(), factor })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn params(&self) -> &MetricParams {
        &self.params
    }

    fn check(&self, v: &NodalField) -> Result<()> {
        if v.mesh_id() != self.mesh_id {
            return Err(Error::MeshMismatch { expected: self.mesh_id, found: v.mesh_id() });
        }
        if v.values().len() != self.fixed.len() {
            return Err(Error::InvalidInput("expected a vector field".into()));
        }
        Ok(())
    }

    /// `a_Ω(V, W)` on the constrained subspace (fixed dofs are ignored).
    pub fn inner_values(&self, v: &[f64], w: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            if self.fixed[i] || vi == 0.0 {
                continue;
            }
            s += vi * self.matrix.row(i).filter(|(j, _)| !self.fixed[*j]).map(|(j, a)| a * w[j]).sum::<f64>();
        }
        s
    }
}

/// `a_Ω(V, W)`.
pub fn a_inner(ip: &InnerProductOperator, v: &NodalField, w: &NodalField) -> Result<f64> {
    ip.check(v)?;
    ip.check(w)?;
    Ok(ip.inner_values(v.values(), w.values()))
}

/// The Riesz representative `G` of `dJ` with respect to `a_Ω`.
#[derive(Debug, Clone)]
pub struct GradientDeformation {
    pub field: NodalField,
    /// `a_Ω(G, G) = dJ[G]`.
    pub a_norm_sq: f64,
}

/// Solves `a_Ω(G, V) = dJ[V]` for all admissible `V`.
pub fn compute_gradient_deformation(
    mesh: &TriMesh,
    dj: &ShapeDerivative,
    ip: &InnerProductOperator,
) -> Result<GradientDeformation> {
    if dj.mesh_id != ip.mesh_id || mesh.id() != ip.mesh_id {
        return Err(Error::MeshMismatch { expected: ip.mesh_id, found: dj.mesh_id });
    }
    let rhs = dj.free_values();
    let g = if rhs.iter().all(|v| *v == 0.0) { vec![0.0; rhs.len()] } else { ip.factor.solve(&rhs)? };
    let field = NodalField::from_values(mesh, 2, g)?;
    let a_norm_sq = descent_value(dj, &field)?.max(0.0);
    Ok(GradientDeformation { field, a_norm_sq })
}

/// The vector P1 space used for deformations of `mesh`.
pub fn deformation_space(mesh: &TriMesh) -> FunctionSpace {
    FunctionSpace::new(mesh, SpaceKind::P1Vec)
}
