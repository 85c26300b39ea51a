use std::collections::HashSet;
use std::sync::Arc;

use super::{transport_term, ShapeFunctional, SpaceCache};
use crate::fem::element::p1_element;
use crate::fem::quadrature::{map_point, TRIANGLE_DEG4};
use crate::fem::{assemble_load, assemble_poisson, FactorKind, Factorization, FunctionSpace, LinearSystem, SpaceKind};
use crate::mesh::{NodalField, Point, TriMesh};
use crate::shape::{MetricParams, MuSpec, ShapeDerivative};
use crate::{Error, Result};

type ScalarFn = Box<dyn Fn(Point) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// `f(x) = 2.5 (x₁ + 0.4 - x₂²)² + x₁² + x₂² - 1` and its gradient.
pub fn benchmark_source() -> (impl Fn(Point) -> f64, impl Fn(Point) -> [f64; 2]) {
    let f = |x: Point| {
        let s = x[0] + 0.4 - x[1] * x[1];
        2.5 * s * s + x[0] * x[0] + x[1] * x[1] - 1.0
    };
    let grad = |x: Point| {
        let s = x[0] + 0.4 - x[1] * x[1];
        [5.0 * s + 2.0 * x[0], -10.0 * s * x[1] + 2.0 * x[1]]
    };
    (f, grad)
}

/// `min ∫_Ω u dx` subject to `-Δu = f` in Ω, `u = 0` on ∂Ω.
pub struct PoissonProblem {
    f: ScalarFn,
    grad_f: GradFn,
    metric: MetricParams,
    spaces: SpaceCache,
}

/// P1 state with the Dirichlet-eliminated factorization, which the adjoint
/// reuses.
pub struct PoissonState {
    pub u: Vec<f64>,
    /// `m_i = ∫ φ_i dx`.
    pub m: Vec<f64>,
    factor: Factorization,
    space: Arc<FunctionSpace>,
}

impl PoissonProblem {
    /// The benchmark source with `λ = 1.429`, `μ = 0.357`, `δ = 0.2`.
    pub fn new() -> Self {
        let (f, g) = benchmark_source();
        Self::with_source(f, g)
    }

    pub fn with_source(
        f: impl Fn(Point) -> f64 + Send + Sync + 'static,
        grad_f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Box::new(f),
            grad_f: Box::new(grad_f),
            metric: MetricParams { lambda: 1.429, mu: MuSpec::Constant(0.357), delta: 0.2, fixed_tags: vec![] },
            spaces: SpaceCache::new(SpaceKind::P1),
        }
    }

    pub fn with_metric(mut self, metric: MetricParams) -> Self {
        self.metric = metric;
        self
    }

    fn solve_dirichlet(
        &self,
        mesh: &TriMesh,
        space: &FunctionSpace,
        rhs: Vec<f64>,
    ) -> Result<(Vec<f64>, Factorization)> {
        let k = assemble_poisson(mesh, space, &vec![1.0; mesh.n_triangles()])?;
        let bc: Vec<(usize, f64)> =
            mesh.boundary_nodes().iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| (i, 0.0)).collect();
        let mut sys = LinearSystem::new(k, rhs, FactorKind::Cholesky);
        sys.apply_dirichlet(&bc)?;
        let factor = sys.factorize()?;
        let u = factor.solve(&sys.rhs)?;
        Ok((u, factor))
    }

    /// The boundary representation `∫_Γ -∂ₙu ∂ₙp V·n ds`, with the normal
    /// fluxes recovered from the residuals of the unconstrained equations
    /// (`∫_Γ ∂ₙu φ_i ds = ∫ ∇u·∇φ_i - ∫ f φ_i`). Agrees with the volume form
    /// only up to discretization error.
    pub fn boundary_shape_derivative(
        &self,
        mesh: &TriMesh,
        state: &PoissonState,
        adjoint: &[f64],
        v: &NodalField,
    ) -> Result<f64> {
        v.check_mesh(mesh)?;
        let space = &state.space;
        space.check_mesh(mesh)?;
        let k = assemble_poisson(mesh, space, &vec![1.0; mesh.n_triangles()])?;
        let b = assemble_load(mesh, space, &self.f)?;
        let ku = k.matvec(&state.u);
        let kp = k.matvec(adjoint);

        let boundary: HashSet<[usize; 2]> = mesh.facets().iter().map(|&[a, b]| [a.min(b), a.max(b)]).collect();
        // ∫_Γ φ_i ds and ∫_Γ φ_i n ds
        let mut len = vec![0.0; mesh.n_nodes()];
        let mut normal = vec![[0.0; 2]; mesh.n_nodes()];
        for tri in mesh.triangles() {
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                if !boundary.contains(&[i.min(j), i.max(j)]) {
                    continue;
                }
                // counter-clockwise triangle: the domain lies left of i -> j
                let (pi, pj) = (mesh.coords()[i], mesh.coords()[j]);
                let d = [pj[0] - pi[0], pj[1] - pi[1]];
                let half = 0.5 * d[0].hypot(d[1]);
                for n in [i, j] {
                    len[n] += half;
                    normal[n][0] += 0.5 * d[1];
                    normal[n][1] -= 0.5 * d[0];
                }
            }
        }
        let mut total = 0.0;
        for i in (0..mesh.n_nodes()).filter(|&i| len[i] > 0.0) {
            let dn_u = (ku[i] - b[i]) / len[i];
            let dn_p = (kp[i] + state.m[i]) / len[i];
            let vi = v.vector_at(i);
            total -= dn_u * dn_p * (vi[0] * normal[i][0] + vi[1] * normal[i][1]);
        }
        Ok(total)
    }
}

impl Default for PoissonProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl ShapeFunctional for PoissonProblem {
    type State = PoissonState;
    type Adjoint = Vec<f64>;

    fn name(&self) -> &str {
        "poisson"
    }

    fn metric(&self) -> &MetricParams {
        &self.metric
    }

    fn solve_state(&self, mesh: &TriMesh) -> Result<PoissonState> {
        let space = self.spaces.get(mesh);
        let b = assemble_load(mesh, &space, &self.f)?;
        let m = assemble_load(mesh, &space, |_| 1.0)?;
        let (u, factor) = self.solve_dirichlet(mesh, &space, b)?;
        Ok(PoissonState { u, m, factor, space })
    }

    fn cost(&self, _mesh: &TriMesh, state: &PoissonState) -> Result<f64> {
        Ok(state.m.iter().zip(&state.u).map(|(m, u)| m * u).sum())
    }

    /// `∫ ∇p·∇φ = -∫ φ` with `p = 0` on ∂Ω.
    fn solve_adjoint(&self, mesh: &TriMesh, state: &PoissonState) -> Result<Vec<f64>> {
        state.space.check_mesh(mesh)?;
        let boundary = mesh.boundary_nodes();
        let rhs: Vec<f64> = state.m.iter().zip(boundary).map(|(m, b)| if *b { 0.0 } else { -m }).collect();
        state.factor.solve(&rhs)
    }

    fn shape_derivative(&self, mesh: &TriMesh, state: &PoissonState, p: &Vec<f64>) -> Result<ShapeDerivative> {
        if state.u.len() != mesh.n_nodes() || p.len() != mesh.n_nodes() {
            return Err(Error::InvalidInput("state and adjoint must be nodal fields".into()));
        }
        let mut dj = vec![0.0; 2 * mesh.n_nodes()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let pts = mesh.triangle_coords(t);
            let e = p1_element(&pts);
            let mut gu = [0.0; 2];
            let mut gp = [0.0; 2];
            for a in 0..3 {
                for c in 0..2 {
                    gu[c] += state.u[tri[a]] * e.grads[a][c];
                    gp[c] += p[tri[a]] * e.grads[a][c];
                }
            }
            let u_mean = (state.u[tri[0]] + state.u[tri[1]] + state.u[tri[2]]) / 3.0;
            // source term -div(f V) p, with the quadrature of the load vector
            let mut fp = 0.0;
            let mut gfp = [[0.0; 2]; 3];
            for q in &TRIANGLE_DEG4 {
                let x = map_point(&pts, q.bary);
                let ph: f64 = (0..3).map(|a| q.bary[a] * p[tri[a]]).sum();
                let w = q.weight * e.area * ph;
                fp += w * (self.f)(x);
                let gf = (self.grad_f)(x);
                for a in 0..3 {
                    gfp[a][0] += w * gf[0] * q.bary[a];
                    gfp[a][1] += w * gf[1] * q.bary[a];
                }
            }
            for a in 0..3 {
                let g = e.grads[a];
                for c in 0..2 {
                    let val = e.area * u_mean * g[c] + e.area * transport_term(g, c, gu, gp) - g[c] * fp - gfp[a][c];
                    dj[2 * tri[a] + c] += val;
                }
            }
        }
        ShapeDerivative::new(mesh, dj, &self.metric.fixed_tags)
    }

    fn state_fields(&self, mesh: &TriMesh, state: &PoissonState) -> Vec<(String, NodalField)> {
        NodalField::from_values(mesh, 1, state.u.clone()).map(|u| vec![("u".to_string(), u)]).unwrap_or_default()
    }
}
