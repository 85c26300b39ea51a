//! Finite elements on triangle meshes: P1, vector P1, vector P2 and
//! Taylor-Hood spaces, sparse assembly, Dirichlet elimination, boundary-mean
//! constraints and direct solves.

mod assemble;
pub mod element;
pub mod quadrature;
mod space;
mod sparse;

pub use assemble::{
    assemble_boundary_load, assemble_boundary_mass, assemble_elasticity, assemble_load, assemble_mass,
    assemble_nodal_load, assemble_poisson, assemble_stokes, elasticity_element, l2_error_p1, l2_error_p2_velocity,
    stokes_element, LameMu, StokesBoundary, VectorFn,
};
pub use space::{FunctionSpace, SpaceKind};
pub use sparse::{FactorKind, Factorization, SparseMatrix, SparsityPattern};

use crate::mesh::TriMesh;
use crate::{Error, Result};

/// A square system `A x = b` together with its constraint bookkeeping.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub kind: FactorKind,
    /// Dofs fixed by Dirichlet elimination.
    pub constrained: Vec<usize>,
    /// Whether a trailing Lagrange-multiplier unknown was appended.
    pub multiplier: bool,
}

impl LinearSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>, kind: FactorKind) -> Self {
        Self { matrix, rhs, kind, constrained: Vec::new(), multiplier: false }
    }

    /// Symmetric Dirichlet elimination: the rhs is lifted by the known
    /// values, the rows and columns are zeroed and the diagonal set to one.
    pub fn apply_dirichlet(&mut self, constraints: &[(usize, f64)]) -> Result<()> {
        let n = self.matrix.n();
        let mut mask = vec![false; n];
        let mut g = vec![0.0; n];
        for &(d, v) in constraints {
            if d >= n {
                return Err(Error::InvalidInput(format!("constrained dof {d} out of range")));
            }
            mask[d] = true;
            g[d] = v;
        }
        if g.iter().any(|v| *v != 0.0) {
            let lift = self.matrix.matvec(&g);
            for i in 0..n {
                if !mask[i] {
                    self.rhs[i] -= lift[i];
                }
            }
        }
        self.matrix.eliminate(&mask);
        for &(d, v) in constraints {
            self.rhs[d] = v;
        }
        self.constrained.extend(constraints.iter().map(|c| c.0));
        self.constrained.sort_unstable();
        self.constrained.dedup();
        Ok(())
    }

    /// Appends the constraint `Σ c_i x_i = 0` with a Lagrange multiplier.
    pub fn with_constraint_row(self, c: &[f64]) -> Result<Self> {
        if c.len() != self.matrix.n() || self.multiplier {
            return Err(Error::InvalidInput("constraint row does not match the system".into()));
        }
        let matrix = self.matrix.bordered(c);
        let mut rhs = self.rhs;
        rhs.push(0.0);
        Ok(Self { matrix, rhs, kind: FactorKind::Lu, constrained: self.constrained, multiplier: true })
    }

    pub fn factorize(&self) -> Result<Factorization> {
        Factorization::new(&self.matrix, self.kind)
    }
}

/// Enforces `∫_{Γ_tag} u ds = 0` on a pure-Neumann P1 system through one
/// Lagrange-multiplier row and column.
pub fn apply_mean_zero_constraint<S: AsRef<str>>(
    system: LinearSystem,
    mesh: &TriMesh,
    space: &FunctionSpace,
    tags: &[S],
) -> Result<LinearSystem> {
    let c = assemble_boundary_load(mesh, space, tags, |_| 1.0)?;
    system.with_constraint_row(&c)
}

/// Solves a linear system; the multiplier, if any, is the last entry.
pub fn solve(system: &LinearSystem) -> Result<Vec<f64>> {
    system.factorize()?.solve(&system.rhs)
}
