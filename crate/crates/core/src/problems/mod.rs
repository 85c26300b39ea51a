//! The benchmark shape functionals: Poisson, EIT and Stokes obstacle.
//!
//! Each problem discretizes its state and adjoint with Lagrange elements and
//! assembles the volume form of the shape derivative against the vector P1
//! basis `φ_a e_c`. For such a field `div V = ∂_c φ_a` and `DV = e_c ⊗ ∇φ_a`
//! are constant per triangle, and because P1 and P2 basis functions are
//! transported exactly by a piecewise affine deformation, the assembled
//! vector is the exact derivative of the discrete reduced functional.

mod eit;
mod poisson;
mod stokes;

use std::sync::{Arc, Mutex};

pub use eit::{EitMeasurements, EitProblem, EitState, EIT_TAGS};
pub use poisson::{benchmark_source, PoissonProblem, PoissonState};
pub use stokes::{ObstacleGeometry, StokesObstacleProblem, StokesState};

use crate::fem::{FunctionSpace, SpaceKind};
use crate::mesh::{NodalField, Point, TriMesh};
use crate::shape::{MetricParams, ShapeDerivative};
use crate::Result;

/// A reduced shape functional `J(Ω) = 𝒥(Ω, u(Ω))`.
pub trait ShapeFunctional {
    type State;
    type Adjoint;

    fn name(&self) -> &str;

    /// Parameters of the inner product `a_Ω`, including the fixed boundary.
    fn metric(&self) -> &MetricParams;

    fn fixed_tags(&self) -> &[String] {
        &self.metric().fixed_tags
    }

    fn solve_state(&self, mesh: &TriMesh) -> Result<Self::State>;

    fn cost(&self, mesh: &TriMesh, state: &Self::State) -> Result<f64>;

    fn solve_adjoint(&self, mesh: &TriMesh, state: &Self::State) -> Result<Self::Adjoint>;

    fn shape_derivative(&self, mesh: &TriMesh, state: &Self::State, adjoint: &Self::Adjoint)
        -> Result<ShapeDerivative>;

    /// `J(Ω)`: a state solve followed by the cost.
    fn evaluate(&self, mesh: &TriMesh) -> Result<f64> {
        let state = self.solve_state(mesh)?;
        self.cost(mesh, &state)
    }

    /// Cutoff applied to random test fields so they vanish near the fixed
    /// boundary.
    fn test_field_weight(&self, _x: Point) -> f64 {
        1.0
    }

    /// Nodal fields worth writing next to the mesh.
    fn state_fields(&self, _mesh: &TriMesh, _state: &Self::State) -> Vec<(String, NodalField)> {
        Vec::new()
    }
}

/// `((div V) I - DV - DVᵀ) a · b` for `V = φ e_c` with `∇φ = g`.
#[inline]
pub(crate) fn transport_term(g: [f64; 2], c: usize, a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = a[0] * b[0] + a[1] * b[1];
    let ga = g[0] * a[0] + g[1] * a[1];
    let gb = g[0] * b[0] + g[1] * b[1];
    g[c] * ab - b[c] * ga - a[c] * gb
}

/// Function spaces keyed by mesh topology, so that sparsity patterns and
/// symbolic factorizations are shared by every iterate of a run.
pub(crate) struct SpaceCache {
    kind: SpaceKind,
    entries: Mutex<Vec<Arc<FunctionSpace>>>,
}

impl SpaceCache {
    pub(crate) fn new(kind: SpaceKind) -> Self {
        Self { kind, entries: Mutex::new(Vec::new()) }
    }

    pub(crate) fn get(&self, mesh: &TriMesh) -> Arc<FunctionSpace> {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(s) = entries.iter().find(|s| s.check_mesh(mesh).is_ok()) {
            return Arc::clone(s);
        }
        let s = Arc::new(FunctionSpace::new(mesh, self.kind));
        if entries.len() >= 4 {
            entries.remove(0);
        }
        entries.push(Arc::clone(&s));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transport_term_matches_matrix_form() {
        let g = [0.3, -1.2];
        let (a, b) = ([1.5, 0.2], [-0.7, 2.0]);
        for c in 0..2 {
            let mut dv = [[0.0; 2]; 2];
            dv[c] = g;
            let div = g[c];
            let mut m = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] = if i == j { div } else { 0.0 } - dv[i][j] - dv[j][i];
                }
            }
            let expected: f64 = (0..2).map(|i| (m[i][0] * a[0] + m[i][1] * a[1]) * b[i]).sum();
            assert!((transport_term(g, c, a, b) - expected).abs() < 1e-14);
        }
    }
}
