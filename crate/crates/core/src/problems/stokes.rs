use std::collections::HashSet;
use std::sync::Arc;

use super::{ShapeFunctional, SpaceCache};
use crate::fem::element::{p1_element, p2_grads};
use crate::fem::quadrature::TRIANGLE_DEG4;
use crate::fem::{assemble_stokes, Factorization, FunctionSpace, SpaceKind, StokesBoundary, VectorFn};
use crate::mesh::{NodalField, Point, Topology, TriMesh};
use crate::shape::{MetricParams, MuSpec, ShapeDerivative};
use crate::{Error, Result};

pub const INLET: &str = "inlet";
pub const WALL: &str = "wall";
pub const OUTLET: &str = "outlet";
pub const OBSTACLE: &str = "obstacle";

/// Volume and barycenter of the (unmeshed) obstacle, with their derivatives
/// with respect to the nodal coordinates (node-major, like a shape
/// derivative).
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleGeometry {
    pub volume: f64,
    pub barycenter: [f64; 2],
    pub d_volume: Vec<f64>,
    pub d_barycenter: [Vec<f64>; 2],
}

/// Obstacle facets oriented counter-clockwise around the obstacle, i.e. with
/// the flow domain on their right.
fn obstacle_loop(mesh: &TriMesh) -> Result<Vec<[usize; 2]>> {
    mesh.require_tags(&[OBSTACLE])?;
    let facets: HashSet<[usize; 2]> = mesh.facets_with_tag(OBSTACLE).map(|[a, b]| [a.min(b), a.max(b)]).collect();
    let mut edges = Vec::with_capacity(facets.len());
    for tri in mesh.triangles() {
        for k in 0..3 {
            let (i, j) = (tri[k], tri[(k + 1) % 3]);
            if facets.contains(&[i.min(j), i.max(j)]) {
                edges.push([j, i]);
            }
        }
    }
    let mut starts: Vec<usize> = edges.iter().map(|e| e[0]).collect();
    let mut ends: Vec<usize> = edges.iter().map(|e| e[1]).collect();
    starts.sort_unstable();
    ends.sort_unstable();
    if edges.len() != facets.len() || starts != ends || starts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidMesh("obstacle boundary is not a closed loop".into()));
    }
    Ok(edges)
}

/// Divergence-theorem boundary integrals over the obstacle polygon:
/// `vol = ½∮ x·n ds`, `∫ x_k dx = ½∮ x_k² n_k ds`, differentiated
/// exactly in the vertex positions.
fn obstacle_geometry(mesh: &TriMesh, edges: &[[usize; 2]]) -> Result<ObstacleGeometry> {
    let n = mesh.n_nodes();
    let x = mesh.coords();
    let mut vol = 0.0;
    let mut first = [0.0; 2];
    let mut d_vol = vec![0.0; 2 * n];
    let mut d_first = [vec![0.0; 2 * n], vec![0.0; 2 * n]];
    for &[a, b] in edges {
        let (pa, pb) = (x[a], x[b]);
        let cross = pa[0] * pb[1] - pb[0] * pa[1];
        // ∂cross / ∂(x_a, y_a, x_b, y_b)
        let dc = [pb[1], -pb[0], -pa[1], pa[0]];
        let dofs = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1];
        vol += 0.5 * cross;
        for k in 0..4 {
            d_vol[dofs[k]] += 0.5 * dc[k];
        }
        for c in 0..2 {
            let s = pa[c] + pb[c];
            first[c] += s * cross / 6.0;
            // ∂s / ∂(x_a, y_a, x_b, y_b)
            let ds = [(c == 0) as u8 as f64, (c == 1) as u8 as f64, (c == 0) as u8 as f64, (c == 1) as u8 as f64];
            for k in 0..4 {
                d_first[c][dofs[k]] += (ds[k] * cross + s * dc[k]) / 6.0;
            }
        }
    }
    if !(vol > 0.0) {
        return Err(Error::InvalidMesh("obstacle has non-positive volume".into()));
    }
    let barycenter = [first[0] / vol, first[1] / vol];
    let d_barycenter =
        std::array::from_fn(|c| (0..2 * n).map(|i| (d_first[c][i] - barycenter[c] * d_vol[i]) / vol).collect());
    Ok(ObstacleGeometry { volume: vol, barycenter, d_volume: d_vol, d_barycenter })
}

/// Dissipation-minimizing obstacle in a Stokes channel, with the obstacle's
/// volume and barycenter held near their initial values by quadratic
/// penalties.
pub struct StokesObstacleProblem {
    nu_vol: f64,
    nu_bc: f64,
    vol0: f64,
    bc0: [f64; 2],
    inflow: Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>,
    topology: Arc<Topology>,
    obstacle: Vec<[usize; 2]>,
    metric: MetricParams,
    spaces: SpaceCache,
}

pub struct StokesState {
    /// Taylor-Hood coefficients: P2 velocity, then P1 pressure.
    pub x: Vec<f64>,
    pub dissipation: f64,
    pub geometry: ObstacleGeometry,
    /// `∂/∂u ∫ ∇u:∇u` at the free velocity dofs.
    dissipation_grad: Vec<f64>,
    factor: Factorization,
    space: Arc<FunctionSpace>,
}

impl StokesObstacleProblem {
    /// Parabolic inflow `¼(2 - y)(2 + y)`, `ν₁ = 1e4`, `ν₂ = 1e2`, and a μ
    /// field harmonic between 500 on the obstacle and 1 on the outer
    /// boundary.
    pub fn new(initial: &TriMesh) -> Result<Self> {
        Self::with_inflow(initial, |x| [0.25 * (2.0 - x[1]) * (2.0 + x[1]), 0.0])
    }

    pub fn with_inflow(initial: &TriMesh, inflow: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Result<Self> {
        initial.require_tags(&[INLET, WALL, OUTLET, OBSTACLE])?;
        let obstacle = obstacle_loop(initial)?;
        let g = obstacle_geometry(initial, &obstacle)?;
        let outer: Vec<String> = [INLET, WALL, OUTLET].iter().map(|s| s.to_string()).collect();
        Ok(Self {
            nu_vol: 1e4,
            nu_bc: 1e2,
            vol0: g.volume,
            bc0: g.barycenter,
            inflow: Arc::new(inflow),
            topology: Arc::clone(initial.topology()),
            obstacle,
            metric: MetricParams {
                lambda: 0.0,
                mu: MuSpec::Laplace { max: 500.0, min: 1.0, max_tags: vec![OBSTACLE.into()], min_tags: outer.clone() },
                delta: 0.0,
                fixed_tags: outer,
            },
            spaces: SpaceCache::new(SpaceKind::TaylorHood),
        })
    }

    pub fn with_metric(mut self, metric: MetricParams) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_penalties(mut self, nu_vol: f64, nu_bc: f64) -> Self {
        self.nu_vol = nu_vol;
        self.nu_bc = nu_bc;
        self
    }

    pub fn reference_volume(&self) -> f64 {
        self.vol0
    }

    pub fn reference_barycenter(&self) -> [f64; 2] {
        self.bc0
    }

    pub fn geometry(&self, mesh: &TriMesh) -> Result<ObstacleGeometry> {
        if !(Arc::ptr_eq(&self.topology, mesh.topology()) || *self.topology == **mesh.topology()) {
            return Err(Error::ConnectivityMismatch);
        }
        obstacle_geometry(mesh, &self.obstacle)
    }

    fn penalty(&self, g: &ObstacleGeometry) -> f64 {
        let dv = g.volume - self.vol0;
        let db = [g.barycenter[0] - self.bc0[0], g.barycenter[1] - self.bc0[1]];
        0.5 * self.nu_vol * dv * dv + 0.5 * self.nu_bc * (db[0] * db[0] + db[1] * db[1])
    }
}

/// Velocity Jacobian `G[i][j] = ∂_j u_i` at a quadrature point.
fn jacobian(x: &[f64], dofs: &[usize], gr: &[[f64; 2]; 6]) -> [[f64; 2]; 2] {
    let mut g = [[0.0; 2]; 2];
    for a in 0..6 {
        for i in 0..2 {
            let v = x[dofs[2 * a + i]];
            g[i][0] += v * gr[a][0];
            g[i][1] += v * gr[a][1];
        }
    }
    g
}

impl ShapeFunctional for StokesObstacleProblem {
    type State = StokesState;
    type Adjoint = Vec<f64>;

    fn name(&self) -> &str {
        "stokes"
    }

    fn metric(&self) -> &MetricParams {
        &self.metric
    }

    fn solve_state(&self, mesh: &TriMesh) -> Result<StokesState> {
        let geometry = self.geometry(mesh)?;
        let space = self.spaces.get(mesh);
        let inflow = Arc::clone(&self.inflow);
        let zero = || -> VectorFn<'static> { Box::new(|_| [0.0, 0.0]) };
        let bc = StokesBoundary {
            dirichlet: vec![
                (WALL.into(), zero()),
                (OBSTACLE.into(), zero()),
                (INLET.into(), Box::new(move |p| inflow(p))),
            ],
            traction: None,
        };
        let sys = assemble_stokes(mesh, &space, 1.0, &bc)?;
        let factor = sys.factorize()?;
        let x = factor.solve(&sys.rhs)?;

        let mut dissipation = 0.0;
        let mut grad = vec![0.0; space.n_dofs()];
        for t in 0..mesh.n_triangles() {
            let e = p1_element(&mesh.triangle_coords(t));
            let dofs = space.cell_dofs(t);
            for q in &TRIANGLE_DEG4 {
                let w = q.weight * e.area;
                let gr = p2_grads(q.bary, &e.grads);
                let g = jacobian(&x, dofs, &gr);
                dissipation += w * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
                for a in 0..6 {
                    for i in 0..2 {
                        grad[dofs[2 * a + i]] += 2.0 * w * (g[i][0] * gr[a][0] + g[i][1] * gr[a][1]);
                    }
                }
            }
        }
        for &d in &sys.constrained {
            grad[d] = 0.0;
        }
        Ok(StokesState { x, dissipation, geometry, dissipation_grad: grad, factor, space })
    }

    fn cost(&self, _mesh: &TriMesh, state: &StokesState) -> Result<f64> {
        Ok(state.dissipation + self.penalty(&state.geometry))
    }

    /// The state's saddle-point operator with forcing `-2 ∫ ∇u:∇φ` and
    /// homogeneous Dirichlet data on inlet, wall and obstacle.
    fn solve_adjoint(&self, mesh: &TriMesh, state: &StokesState) -> Result<Vec<f64>> {
        state.space.check_mesh(mesh)?;
        let rhs: Vec<f64> = state.dissipation_grad.iter().map(|r| -r).collect();
        state.factor.solve(&rhs)
    }

    fn shape_derivative(&self, mesh: &TriMesh, state: &StokesState, adjoint: &Vec<f64>) -> Result<ShapeDerivative> {
        let space = &state.space;
        space.check_mesh(mesh)?;
        if adjoint.len() != space.n_dofs() || state.x.len() != space.n_dofs() {
            return Err(Error::InvalidInput("state and adjoint must be Taylor-Hood vectors".into()));
        }
        let (u, y) = (&state.x, adjoint);
        let mut dj = vec![0.0; 2 * mesh.n_nodes()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let e = p1_element(&mesh.triangle_coords(t));
            let dofs = space.cell_dofs(t);
            for q in &TRIANGLE_DEG4 {
                let wq = q.weight * e.area;
                let gr = p2_grads(q.bary, &e.grads);
                let gu = jacobian(u, dofs, &gr);
                let gw = jacobian(y, dofs, &gr);
                let gs = [[gu[0][0] + gw[0][0], gu[0][1] + gw[0][1]], [gu[1][0] + gw[1][0], gu[1][1] + gw[1][1]]];
                let pres: f64 = (0..3).map(|i| q.bary[i] * u[dofs[12 + i]]).sum();
                let qres: f64 = (0..3).map(|i| q.bary[i] * y[dofs[12 + i]]).sum();
                let div_u = gu[0][0] + gu[1][1];
                let div_w = gw[0][0] + gw[1][1];
                let s_dot_u = gs[0][0] * gu[0][0] + gs[0][1] * gu[0][1] + gs[1][0] * gu[1][0] + gs[1][1] * gu[1][1];
                for a in 0..3 {
                    let g = e.grads[a];
                    for c in 0..2 {
                        let div_v = g[c];
                        // (∇S DV):∇u and ∇S:(∇u DV) for V = φ_a e_c
                        let mut sdv_u = 0.0;
                        let mut s_udv = 0.0;
                        for i in 0..2 {
                            sdv_u += gs[i][c] * (g[0] * gu[i][0] + g[1] * gu[i][1]);
                            s_udv += gu[i][c] * (g[0] * gs[i][0] + g[1] * gs[i][1]);
                        }
                        let dk = div_v * s_dot_u - sdv_u - s_udv;
                        let tr_w = gw[0][c] * g[0] + gw[1][c] * g[1];
                        let tr_u = gu[0][c] * g[0] + gu[1][c] * g[1];
                        let db = -pres * (div_v * div_w - tr_w) - qres * (div_v * div_u - tr_u);
                        dj[2 * tri[a] + c] += wq * (dk + db);
                    }
                }
            }
        }
        let g = &state.geometry;
        let dv = self.nu_vol * (g.volume - self.vol0);
        let db = [self.nu_bc * (g.barycenter[0] - self.bc0[0]), self.nu_bc * (g.barycenter[1] - self.bc0[1])];
        for (i, d) in dj.iter_mut().enumerate() {
            *d += dv * g.d_volume[i] + db[0] * g.d_barycenter[0][i] + db[1] * g.d_barycenter[1][i];
        }
        ShapeDerivative::new(mesh, dj, &self.metric.fixed_tags)
    }

    fn test_field_weight(&self, x: Point) -> f64 {
        let r2 = ((x[0] - self.bc0[0]).powi(2) + (x[1] - self.bc0[1]).powi(2)) / 2.25;
        (1.0 - r2).max(0.0).powi(3)
    }

    fn state_fields(&self, mesh: &TriMesh, state: &StokesState) -> Vec<(String, NodalField)> {
        let n = mesh.n_nodes();
        let off = state.space.pressure_offset();
        let vel = NodalField::from_values(mesh, 2, state.x[..2 * n].to_vec());
        let p = NodalField::from_values(mesh, 1, state.x[off..off + n].to_vec());
        match (vel, p) {
            (Ok(v), Ok(p)) => vec![("velocity".into(), v), ("pressure".into(), p)],
            _ => Vec::new(),
        }
    }
}
