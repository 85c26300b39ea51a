use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::{transport_term, ShapeFunctional, SpaceCache};
use crate::fem::element::p1_element;
use crate::fem::{
    apply_mean_zero_constraint, assemble_boundary_load, assemble_boundary_mass, assemble_poisson, FactorKind,
    Factorization, FunctionSpace, LinearSystem, SpaceKind, SparseMatrix,
};
use crate::mesh::{generate_square_with_interface, write_atomic, InnerShape, NodalField, Point, TriMesh};
use crate::shape::{MetricParams, MuSpec, ShapeDerivative};
use crate::{Error, Result};

/// Sides of the unit square, in arc-length order.
pub const EIT_TAGS: [&str; 4] = ["bottom", "right", "top", "left"];

/// Current patterns as `(tags with +1, tags with -1)`.
const CURRENTS: [([&str; 2], [&str; 2]); 3] = [
    (["left", "right"], ["top", "bottom"]),
    (["left", "top"], ["right", "bottom"]),
    (["left", "bottom"], ["right", "top"]),
];

const N_EXP: usize = 3;

/// Arc length along the boundary of the unit square, counter-clockwise from
/// the origin, in `[0, 4)`.
fn arc_length(p: Point) -> f64 {
    let d = [p[1], 1.0 - p[0], 1.0 - p[1], p[0]];
    let side = (0..4).min_by(|a, b| d[*a].total_cmp(&d[*b])).unwrap_or(0);
    let s = match side {
        0 => p[0],
        1 => 1.0 + p[1],
        2 => 3.0 - p[0],
        _ => 4.0 - p[1],
    };
    s.rem_euclid(4.0)
}

/// Boundary potentials of the three experiments, tabulated by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct EitMeasurements {
    pub s: Vec<f64>,
    pub values: Vec<[f64; N_EXP]>,
}

impl EitMeasurements {
    /// Solves the forward problem with a circular inclusion of radius 0.2 at
    /// (0.5, 0.5) and records the boundary traces.
    pub fn synthesize(target_elems: usize, kappa_in: f64, kappa_out: f64) -> Result<Self> {
        let mesh =
            generate_square_with_interface(&InnerShape::Circle { center: [0.5, 0.5], radius: 0.2 }, target_elems)?;
        let space = FunctionSpace::new(&mesh, SpaceKind::P1);
        let (_, u) = forward(&mesh, &space, kappa_in, kappa_out)?;
        let mask = mesh.nodes_on_tags(&EIT_TAGS);
        let mut rows: Vec<(f64, [f64; N_EXP])> = (0..mesh.n_nodes())
            .filter(|&i| mask[i])
            .map(|i| (arc_length(mesh.coords()[i]), [u[0][i], u[1][i], u[2][i]]))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { s: rows.iter().map(|r| r.0).collect(), values: rows.iter().map(|r| r.1).collect() })
    }

    /// Periodic piecewise-linear interpolation in arc length.
    pub fn sample(&self, s: f64) -> [f64; N_EXP] {
        let n = self.s.len();
        let s = s.rem_euclid(4.0);
        let k = self.s.partition_point(|x| *x <= s);
        let (i0, i1) = if k == 0 || k == n { (n - 1, 0) } else { (k - 1, k) };
        let (s0, mut s1) = (self.s[i0], self.s[i1]);
        let mut s = s;
        if s1 <= s0 {
            s1 += 4.0;
            if s < s0 {
                s += 4.0;
            }
        }
        let w = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        let mut out = [0.0; N_EXP];
        for (e, o) in out.iter_mut().enumerate() {
            *o = (1.0 - w) * self.values[i0][e] + w * self.values[i1][e];
        }
        out
    }

    /// Measurement vectors at the boundary nodes of `mesh` (zero elsewhere).
    pub fn on_mesh(&self, mesh: &TriMesh) -> [Vec<f64>; N_EXP] {
        let mask = mesh.nodes_on_tags(&EIT_TAGS);
        let mut out: [Vec<f64>; N_EXP] = std::array::from_fn(|_| vec![0.0; mesh.n_nodes()]);
        for i in (0..mesh.n_nodes()).filter(|&i| mask[i]) {
            let v = self.sample(arc_length(mesh.coords()[i]));
            for e in 0..N_EXP {
                out[e][i] = v[e];
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::from("# arc_length m1 m2 m3\n");
        for (s, v) in self.s.iter().zip(&self.values) {
            let _ = writeln!(text, "{s:?} {:?} {:?} {:?}", v[0], v[1], v[2]);
        }
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut s = Vec::new();
        let mut values = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Parse { path: path.to_path_buf(), line: n + 1, msg: msg.to_string() };
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err("expected a number")))
                .collect::<Result<_>>()?;
            if nums.len() != 1 + N_EXP {
                return Err(err("expected arc length and three values"));
            }
            if s.last().is_some_and(|l| *l > nums[0]) {
                return Err(err("arc lengths must be sorted"));
            }
            s.push(nums[0]);
            values.push([nums[1], nums[2], nums[3]]);
        }
        if s.len() < 2 {
            return Err(Error::InvalidInput(format!("{}: too few measurements", path.display())));
        }
        Ok(Self { s, values })
    }
}

fn conductivities(mesh: &TriMesh, kappa_in: f64, kappa_out: f64) -> Vec<f64> {
    (0..mesh.n_triangles()).map(|t| if mesh.region_name(t) == "in" { kappa_in } else { kappa_out }).collect()
}

/// Factorized mean-zero Neumann system and the three potentials.
fn forward(
    mesh: &TriMesh,
    space: &FunctionSpace,
    kappa_in: f64,
    kappa_out: f64,
) -> Result<(Factorization, [Vec<f64>; N_EXP])> {
    mesh.require_tags(&EIT_TAGS)?;
    let a = assemble_poisson(mesh, space, &conductivities(mesh, kappa_in, kappa_out))?;
    let sys = apply_mean_zero_constraint(
        LinearSystem::new(a, vec![0.0; mesh.n_nodes()], FactorKind::Cholesky),
        mesh,
        space,
        &EIT_TAGS,
    )?;
    let factor = sys.factorize()?;
    let mut u: [Vec<f64>; N_EXP] = Default::default();
    for (e, (plus, minus)) in CURRENTS.iter().enumerate() {
        let bp = assemble_boundary_load(mesh, space, plus, |_| 1.0)?;
        let bm = assemble_boundary_load(mesh, space, minus, |_| 1.0)?;
        let mut rhs: Vec<f64> = bp.iter().zip(&bm).map(|(p, m)| p - m).collect();
        rhs.push(0.0);
        let mut x = factor.solve(&rhs)?;
        x.pop();
        u[e] = x;
    }
    Ok((factor, u))
}

/// Interface identification from boundary potentials of three current
/// patterns, with conductivities `κ_in` inside and `κ_out` outside.
pub struct EitProblem {
    kappa_in: f64,
    kappa_out: f64,
    measurements: EitMeasurements,
    weights: [f64; N_EXP],
    metric: MetricParams,
    spaces: SpaceCache,
}

pub struct EitState {
    pub u: [Vec<f64>; N_EXP],
    /// `ν_i/2 ∫_{∂D} (u_i - m_i)² ds`.
    pub summands: [f64; N_EXP],
    /// `M_b (u_i - m_i)`.
    misfit: [Vec<f64>; N_EXP],
    factor: Factorization,
    space: Arc<FunctionSpace>,
}

impl EitProblem {
    /// Weights are chosen so that every summand equals one on `initial`.
    pub fn new(initial: &TriMesh, measurements: EitMeasurements) -> Result<Self> {
        let mut p = Self::with_weights(measurements, [1.0; N_EXP]);
        let s = p.solve_state(initial)?;
        for e in 0..N_EXP {
            if !(s.summands[e] > 0.0) {
                return Err(Error::InvalidInput("initial geometry already matches the measurements".into()));
            }
            p.weights[e] = 1.0 / s.summands[e];
        }
        Ok(p)
    }

    pub fn with_weights(measurements: EitMeasurements, weights: [f64; N_EXP]) -> Self {
        Self {
            kappa_in: 10.0,
            kappa_out: 1.0,
            measurements,
            weights,
            metric: MetricParams {
                lambda: 0.0,
                mu: MuSpec::Constant(1.0),
                delta: 0.0,
                fixed_tags: EIT_TAGS.iter().map(|t| t.to_string()).collect(),
            },
            spaces: SpaceCache::new(SpaceKind::P1),
        }
    }

    pub fn with_metric(mut self, metric: MetricParams) -> Self {
        self.metric = metric;
        self
    }

    pub fn weights(&self) -> [f64; N_EXP] {
        self.weights
    }

    pub fn measurements(&self) -> &EitMeasurements {
        &self.measurements
    }

    fn boundary_mass(&self, mesh: &TriMesh, space: &FunctionSpace) -> Result<SparseMatrix> {
        assemble_boundary_mass(mesh, space, &EIT_TAGS)
    }
}

impl ShapeFunctional for EitProblem {
    type State = EitState;
    type Adjoint = [Vec<f64>; N_EXP];

    fn name(&self) -> &str {
        "eit"
    }

    fn metric(&self) -> &MetricParams {
        &self.metric
    }

    fn solve_state(&self, mesh: &TriMesh) -> Result<EitState> {
        let space = self.spaces.get(mesh);
        let (factor, u) = forward(mesh, &space, self.kappa_in, self.kappa_out)?;
        let m = self.measurements.on_mesh(mesh);
        let mb = self.boundary_mass(mesh, &space)?;
        let mut misfit: [Vec<f64>; N_EXP] = Default::default();
        let mut summands = [0.0; N_EXP];
        for e in 0..N_EXP {
            let d: Vec<f64> = u[e].iter().zip(&m[e]).map(|(a, b)| a - b).collect();
            misfit[e] = mb.matvec(&d);
            summands[e] = 0.5 * self.weights[e] * d.iter().zip(&misfit[e]).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(EitState { u, summands, misfit, factor, space })
    }

    fn cost(&self, _mesh: &TriMesh, state: &EitState) -> Result<f64> {
        Ok(state.summands.iter().sum())
    }

    /// Same mean-zero Neumann operator with the boundary flux
    /// `-ν_i (u_i - m_i)`.
    fn solve_adjoint(&self, mesh: &TriMesh, state: &EitState) -> Result<[Vec<f64>; N_EXP]> {
        state.space.check_mesh(mesh)?;
        let mut p: [Vec<f64>; N_EXP] = Default::default();
        for e in 0..N_EXP {
            let mut rhs: Vec<f64> = state.misfit[e].iter().map(|r| -self.weights[e] * r).collect();
            rhs.push(0.0);
            let mut x = state.factor.solve(&rhs)?;
            x.pop();
            p[e] = x;
        }
        Ok(p)
    }

    /// `Σ_i ∫ κ ((div V) I - DV - DVᵀ) ∇u_i · ∇p_i dx`.
    fn shape_derivative(&self, mesh: &TriMesh, state: &EitState, p: &[Vec<f64>; N_EXP]) -> Result<ShapeDerivative> {
        let kappa = conductivities(mesh, self.kappa_in, self.kappa_out);
        let mut dj = vec![0.0; 2 * mesh.n_nodes()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let e = p1_element(&mesh.triangle_coords(t));
            for x in 0..N_EXP {
                let mut gu = [0.0; 2];
                let mut gp = [0.0; 2];
                for a in 0..3 {
                    for c in 0..2 {
                        gu[c] += state.u[x][tri[a]] * e.grads[a][c];
                        gp[c] += p[x][tri[a]] * e.grads[a][c];
                    }
                }
                let w = kappa[t] * e.area;
                for a in 0..3 {
                    for c in 0..2 {
                        dj[2 * tri[a] + c] += w * transport_term(e.grads[a], c, gu, gp);
                    }
                }
            }
        }
        ShapeDerivative::new(mesh, dj, &self.metric.fixed_tags)
    }

    fn test_field_weight(&self, x: Point) -> f64 {
        16.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
    }

    fn state_fields(&self, mesh: &TriMesh, state: &EitState) -> Vec<(String, NodalField)> {
        (0..N_EXP)
            .filter_map(|e| {
                NodalField::from_values(mesh, 1, state.u[e].clone()).ok().map(|f| (format!("u{}", e + 1), f))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{fd_check, random_smooth_field};

    fn setup(target: usize) -> (TriMesh, EitProblem) {
        let meas = EitMeasurements::synthesize(target, 10.0, 1.0).unwrap();
        let mesh =
            generate_square_with_interface(&InnerShape::Square { center: [0.5, 0.5], edge: 0.4 }, target).unwrap();
        let prob = EitProblem::new(&mesh, meas).unwrap();
        (mesh, prob)
    }

    #[test]
    fn arc_length_is_continuous_around_the_square() {
        assert_eq!(arc_length([0.0, 0.0]), 0.0);
        assert_eq!(arc_length([0.5, 0.0]), 0.5);
        assert_eq!(arc_length([1.0, 0.25]), 1.25);
        assert_eq!(arc_length([0.25, 1.0]), 2.75);
        assert_eq!(arc_length([0.0, 0.75]), 3.25);
    }

    #[test]
    fn initial_summands_are_normalized() {
        let (mesh, prob) = setup(1500);
        let s = prob.solve_state(&mesh).unwrap();
        for v in s.summands {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((prob.cost(&mesh, &s).unwrap() - 3.0).abs() < 1e-12);
        // zero boundary mean and flux compatibility
        let space = FunctionSpace::new(&mesh, SpaceKind::P1);
        let c = assemble_boundary_load(&mesh, &space, &EIT_TAGS, |_| 1.0).unwrap();
        for u in &s.u {
            let mean: f64 = c.iter().zip(u).map(|(a, b)| a * b).sum();
            assert!(mean.abs() < 1e-10);
        }
        for (plus, minus) in CURRENTS {
            let total = assemble_boundary_load(&mesh, &space, &plus, |_| 1.0).unwrap().iter().sum::<f64>()
                - assemble_boundary_load(&mesh, &space, &minus, |_| 1.0).unwrap().iter().sum::<f64>();
            assert!(total.abs() < 1e-14);
        }
    }

    #[test]
    fn matched_measurements_give_zero_adjoint() {
        let mesh =
            generate_square_with_interface(&InnerShape::Circle { center: [0.5, 0.5], radius: 0.2 }, 1200).unwrap();
        let meas = EitMeasurements::synthesize(1200, 10.0, 1.0).unwrap();
        let prob = EitProblem::with_weights(meas, [1.0; 3]);
        let s = prob.solve_state(&mesh).unwrap();
        assert!(prob.cost(&mesh, &s).unwrap() < 1e-24);
        let p = prob.solve_adjoint(&mesh, &s).unwrap();
        assert!(p.iter().flatten().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn measurements_round_trip_through_file() {
        let meas = EitMeasurements::synthesize(600, 10.0, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eit_measurements.txt");
        meas.write(&path).unwrap();
        assert_eq!(EitMeasurements::read(&path).unwrap(), meas);
        // nodal samples are reproduced exactly
        for (s, v) in meas.s.iter().zip(&meas.values) {
            let w = meas.sample(*s);
            for e in 0..3 {
                assert!((w[e] - v[e]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let (mesh, prob) = setup(2000);
        for seed in 0..2 {
            let v = random_smooth_field(&mesh, seed, prob.fixed_tags(), |x| prob.test_field_weight(x)).unwrap();
            let r = fd_check(&prob, &mesh, &v, &[1e-3, 1e-4, 1e-5]).unwrap();
            assert!(r.rel_error_at(1e-5).unwrap() <= 1e-4, "{r}");
            assert!(r.observed_order().unwrap() >= 1.8, "{r}");
        }
    }
}
