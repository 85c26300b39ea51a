//! The descent driver: gradient deformations under `a_Ω`, a search direction
//! (GD, L-BFGS or nonlinear CG), backtracking with geometry rejection, and
//! the additive mesh update.

mod direction;
mod history;

use std::fmt;
use std::str::FromStr;

pub use direction::{
    direction_gd, direction_lbfgs, direction_ncg, ncg_beta, BetaOutcome, DenseInner, InnerProduct, LbfgsMemory,
    LbfgsPair, NcgDirection, NcgPrevious, DEGENERATE_DENOMINATOR,
};
pub use history::{IterationRecord, OptHistory, Status, CSV_HEADER, THRESHOLDS};

use crate::mesh::{admissibility, deform, NodalField, TriMesh, DEFAULT_AREA_FLOOR};
use crate::problems::ShapeFunctional;
use crate::shape::{
    compute_gradient_deformation, deformation_space, descent_value, InnerProductOperator, ShapeDerivative,
    ZERO_GRADIENT_SQ,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NcgVariant {
    FR,
    PR,
    HS,
    DY,
    HZ,
}

impl NcgVariant {
    pub const ALL: [NcgVariant; 5] = [Self::FR, Self::PR, Self::HS, Self::DY, Self::HZ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FR => "fr",
            Self::PR => "pr",
            Self::HS => "hs",
            Self::DY => "dy",
            Self::HZ => "hz",
        }
    }
}

/// Search direction rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    GD,
    Lbfgs(usize),
    Ncg(NcgVariant),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::GD => f.write_str("gd"),
            Method::Lbfgs(m) => write!(f, "lbfgs{m}"),
            Method::Ncg(v) => write!(f, "ncg-{}", v.as_str()),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `gd`, `lbfgs<m>` (optionally `lbfgs-<m>`) and
    /// `ncg-<variant>` / `cg-<variant>`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown method `{s}`"));
        let lower = s.trim().to_ascii_lowercase();
        if lower == "gd" {
            return Ok(Method::GD);
        }
        if let Some(rest) = lower.strip_prefix("lbfgs") {
            let rest = rest.trim_start_matches(['-', '_']);
            let m: usize = rest.parse().map_err(|_| bad())?;
            if m == 0 {
                return Err(Error::InvalidInput("L-BFGS memory must be at least 1".into()));
            }
            return Ok(Method::Lbfgs(m));
        }
        let rest = lower.strip_prefix("ncg").or_else(|| lower.strip_prefix("cg")).ok_or_else(bad)?;
        let variant = match rest.trim_start_matches(['-', '_']) {
            "fr" => NcgVariant::FR,
            "pr" => NcgVariant::PR,
            "hs" => NcgVariant::HS,
            "dy" => NcgVariant::DY,
            "hz" => NcgVariant::HZ,
            _ => return Err(bad()),
        };
        Ok(Method::Ncg(variant))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub t0: f64,
    pub sigma: f64,
    pub omega: f64,
    /// Backtracking stops with a failure once the trial step drops below this.
    pub t_min: f64,
}

impl LineSearchParams {
    /// `t_min = 1e-12 t0`.
    pub fn new(t0: f64, sigma: f64, omega: f64) -> Self {
        Self { t0, sigma, omega, t_min: 1e-12 * t0 }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.sigma) || !open_unit(self.omega) {
            return Err(Error::InvalidInput("sigma and omega must lie in (0, 1)".into()));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t0) || !self.t0.is_finite() {
            return Err(Error::InvalidInput("need 0 < t_min < t0".into()));
        }
        Ok(())
    }
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self::new(1.0, 1e-4, 0.5)
    }
}

/// NCG restarts: every `k_cg` iterations, and whenever consecutive gradients
/// are far from orthogonal, `a(G_k, G_{k-1}) / ‖G_k‖² ≥ ε_cg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartPolicy {
    pub k_cg: Option<usize>,
    pub eps_cg: f64,
}

impl RestartPolicy {
    pub fn never() -> Self {
        Self { k_cg: None, eps_cg: f64::INFINITY }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_cg == Some(0) {
            return Err(Error::InvalidInput("k_cg must be at least 1".into()));
        }
        if !(self.eps_cg > 0.0) {
            return Err(Error::InvalidInput("eps_cg must be positive".into()));
        }
        Ok(())
    }
}

impl Default for RestartPolicy {
    fn default() -> Self {
        Self::never()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub method: Method,
    pub line_search: LineSearchParams,
    pub restart: RestartPolicy,
    /// Stop once `‖G_k‖_a ≤ tol ‖G_0‖_a`.
    pub tol: f64,
    pub k_max: usize,
    /// Minimum area ratio of a trial element against the current iterate.
    pub area_floor: f64,
    /// Keep the node coordinates of every iterate in the history.
    pub record_coords: bool,
}

impl RunOptions {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            line_search: LineSearchParams::default(),
            restart: RestartPolicy::never(),
            tol: 5e-4,
            k_max: 50,
            area_floor: DEFAULT_AREA_FLOOR,
            record_coords: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.line_search.validate()?;
        self.restart.validate()?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidInput(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if !(self.area_floor > 0.0 && self.area_floor < 1.0) {
            return Err(Error::InvalidInput("area floor must lie in (0, 1)".into()));
        }
        if let Method::Lbfgs(0) = self.method {
            return Err(Error::InvalidInput("L-BFGS memory must be at least 1".into()));
        }
        Ok(())
    }
}

/// First trial step of an iteration: 1 for L-BFGS with a non-empty memory
/// (the direction carries its own scaling), otherwise the previous accepted
/// step enlarged by `1/ω`, or `t0` on the first iteration.
pub fn initial_trial_step(method: Method, memory_nonempty: bool, previous: Option<f64>, ls: &LineSearchParams) -> f64 {
    if matches!(method, Method::Lbfgs(_)) && memory_nonempty {
        return 1.0;
    }
    previous.map_or(ls.t0, |t| t / ls.omega)
}

#[derive(Debug)]
pub struct ArmijoAccepted<S> {
    pub t: f64,
    pub mesh: TriMesh,
    pub state: S,
    pub cost: f64,
}

#[derive(Debug)]
pub struct ArmijoOutcome<S> {
    /// `None` when the step fell below `t_min`.
    pub accepted: Option<ArmijoAccepted<S>>,
    pub trials: usize,
    pub rejected_meshes: usize,
    pub state_solves: usize,
}

/// Backtracking from `t` along `d`: a trial is accepted when the deformed
/// mesh is admissible and `J(Ω + tD) ≤ J(Ω) + σ t slope` with
/// `J(Ω + tD) < J(Ω)`. Inadmissible meshes are rejected without a state
/// solve; a failed state solve counts as a rejected trial.
#[allow(clippy::too_many_arguments)]
pub fn armijo<P: ShapeFunctional + ?Sized>(
    problem: &P,
    mesh: &TriMesh,
    cost: f64,
    d: &NodalField,
    slope: f64,
    mut t: f64,
    ls: &LineSearchParams,
    area_floor: f64,
) -> Result<ArmijoOutcome<P::State>> {
    if !(slope < 0.0) {
        return Err(Error::InvalidInput(format!("not a descent direction: slope {slope}")));
    }
    let mut out = ArmijoOutcome { accepted: None, trials: 0, rejected_meshes: 0, state_solves: 0 };
    while t >= ls.t_min {
        out.trials += 1;
        let trial = deform(mesh, &d.scaled(t))?;
        if !admissibility(mesh, &trial, area_floor)?.admissible {
            out.rejected_meshes += 1;
            t *= ls.omega;
            continue;
        }
        out.state_solves += 1;
        let evaluated = problem.solve_state(&trial).and_then(|s| problem.cost(&trial, &s).map(|j| (s, j)));
        match evaluated {
            Ok((state, j)) if j <= cost + ls.sigma * t * slope && j < cost => {
                out.accepted = Some(ArmijoAccepted { t, mesh: trial, state, cost: j });
                return Ok(out);
            }
            Ok(_) => {}
            Err(e) => log::warn!("state solve failed at trial step {t:e}: {e}"),
        }
        t *= ls.omega;
    }
    Ok(out)
}

/// Replaces `d` by `-G` unless `dJ[d] < 0`. Returns the executed direction,
/// the proposed slope, the executed slope and whether a reset happened.
pub(crate) fn enforce_descent(
    mesh: &TriMesh,
    dj: &ShapeDerivative,
    g: &[f64],
    d: Vec<f64>,
) -> Result<(NodalField, f64, f64, bool)> {
    let proposed = NodalField::from_values(mesh, 2, d)?;
    let raw = descent_value(dj, &proposed)?;
    if raw < 0.0 {
        return Ok((proposed, raw, raw, false));
    }
    let gd = NodalField::from_values(mesh, 2, direction_gd(g))?;
    let slope = descent_value(dj, &gd)?;
    Ok((gd, raw, slope, true))
}

struct Previous {
    g: Vec<f64>,
    d: Vec<f64>,
    t: f64,
}

/// Runs the descent loop from `mesh0` and returns the last iterate with its
/// history.
///
/// Each iteration solves the adjoint, assembles `dJ`, solves for `G_k` and
/// tests `‖G_k‖_a ≤ tol ‖G_0‖_a`; the direction is then checked for descent,
/// backtracked and applied. The state accepted by the line search is reused
/// on the next iterate, so an iteration costs one adjoint solve plus one
/// state solve per admissible trial. Errors on the initial mesh are returned;
/// later solver failures end the run with [`Status::SolverFailure`].
pub fn run<P: ShapeFunctional + ?Sized>(
    problem: &P,
    mesh0: &TriMesh,
    opts: &RunOptions,
) -> Result<(TriMesh, OptHistory)> {
    opts.validate()?;
    mesh0.require_tags(problem.fixed_tags())?;
    let space = deformation_space(mesh0);
    let ls = &opts.line_search;
    let mut mesh = mesh0.clone();
    let mut state = problem.solve_state(&mesh)?;
    let mut cost = problem.cost(&mesh, &state)?;
    let mut states = 1usize;
    let mut adjoints = 0usize;
    let mut g0 = f64::NAN;
    let mut prev: Option<Previous> = None;
    let mut memory = LbfgsMemory::new(match opts.method {
        Method::Lbfgs(m) => m,
        _ => 1,
    });
    let mut records = Vec::new();
    let method_name = opts.method.to_string();

    let status = loop {
        let k = records.len();
        let gradient = (|| -> Result<_> {
            let adjoint = problem.solve_adjoint(&mesh, &state)?;
            adjoints += 1;
            let dj = problem.shape_derivative(&mesh, &state, &adjoint)?;
            let ip = InnerProductOperator::assemble(&mesh, &space, problem.metric())?;
            let g = compute_gradient_deformation(&mesh, &dj, &ip)?;
            Ok((dj, ip, g))
        })();
        let (dj, ip, grad) = match gradient {
            Ok(v) => v,
            Err(e) if k == 0 => return Err(e),
            Err(e) => {
                log::warn!("{method_name}: gradient evaluation failed at iteration {k}: {e}");
                let mut r = IterationRecord::new(k, cost, f64::NAN, f64::NAN, states, adjoints);
                r.coords = opts.record_coords.then(|| mesh.coords().to_vec());
                records.push(r);
                break Status::SolverFailure(e.to_string());
            }
        };
        let gsq = grad.a_norm_sq;
        if k == 0 {
            g0 = gsq;
        }
        let rel = if g0 > ZERO_GRADIENT_SQ { (gsq / g0).sqrt() } else { 0.0 };
        let mut record = IterationRecord::new(k, cost, gsq, rel, states, adjoints);
        record.coords = opts.record_coords.then(|| mesh.coords().to_vec());
        log::debug!("{method_name} k={k} J={cost:.10e} rel={rel:.3e} states={states} adjoints={adjoints}");
        if g0 <= ZERO_GRADIENT_SQ || rel <= opts.tol {
            records.push(record);
            break Status::Converged;
        }
        if k >= opts.k_max {
            records.push(record);
            break Status::MaxIterations;
        }

        let g = grad.field.into_values();
        let proposed = match opts.method {
            Method::GD => direction_gd(&g),
            Method::Lbfgs(_) => {
                if let Some(p) = &prev {
                    let s: Vec<f64> = p.d.iter().map(|v| p.t * v).collect();
                    let y: Vec<f64> = g.iter().zip(&p.g).map(|(a, b)| a - b).collect();
                    record.pair_curvature = Some(memory.update(s, y, &ip));
                }
                record.memory_len = memory.len();
                direction_lbfgs(&g, &memory, &ip)
            }
            Method::Ncg(variant) => {
                let previous = prev.as_ref().map(|p| NcgPrevious { g: &p.g, d: &p.d });
                let nd = direction_ncg(&g, previous, variant, &ip, &opts.restart, k);
                record.beta = Some(nd.beta);
                record.ncg_restart = nd.restarted;
                record.beta_guarded = nd.guarded;
                nd.d
            }
        };
        let (d, raw, slope, reset) = enforce_descent(&mesh, &dj, &g, proposed)?;
        if reset {
            log::debug!("{method_name} k={k}: direction is not a descent direction, using -G");
            memory.clear();
        }
        record.raw_descent_value = Some(raw);
        record.descent_value = Some(slope);
        record.descent_reset = reset;
        if !(slope < 0.0) {
            // -G fails to descend only when dJ vanishes numerically
            records.push(record);
            break Status::Converged;
        }

        let t_init = initial_trial_step(opts.method, !memory.is_empty(), prev.as_ref().map(|p| p.t), ls);
        let outcome = armijo(problem, &mesh, cost, &d, slope, t_init, ls, opts.area_floor)?;
        states += outcome.state_solves;
        record.trials = outcome.trials;
        record.rejected_meshes = outcome.rejected_meshes;
        let Some(accepted) = outcome.accepted else {
            record.state_solves = states;
            records.push(record);
            break Status::LineSearchFailed;
        };
        record.step = Some(accepted.t);
        records.push(record);
        prev = Some(Previous { g, d: d.into_values(), t: accepted.t });
        mesh = accepted.mesh;
        state = accepted.state;
        cost = accepted.cost;
    };

    log::info!(
        "{method_name}: {status} after {} iterations, J={cost:.10e}, {states} state / {adjoints} adjoint solves",
        records.len().saturating_sub(1)
    );
    Ok((mesh, OptHistory { method: method_name, records, status }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rectangle;
    use crate::shape::{MetricParams, MuSpec};

    /// `J(Ω) = (mean node x - target)²`.
    struct MeanX {
        target: f64,
        metric: MetricParams,
    }

    impl MeanX {
        fn new(target: f64) -> Self {
            let metric = MetricParams { lambda: 0.0, mu: MuSpec::Constant(1.0), delta: 1.0, fixed_tags: vec![] };
            Self { target, metric }
        }
    }

    impl ShapeFunctional for MeanX {
        type State = f64;
        type Adjoint = ();

        fn name(&self) -> &str {
            "mean-x"
        }

        fn metric(&self) -> &MetricParams {
            &self.metric
        }

        fn solve_state(&self, mesh: &TriMesh) -> Result<f64> {
            Ok(mesh.coords().iter().map(|p| p[0]).sum::<f64>() / mesh.n_nodes() as f64)
        }

        fn cost(&self, _mesh: &TriMesh, m: &f64) -> Result<f64> {
            Ok((m - self.target).powi(2))
        }

        fn solve_adjoint(&self, _mesh: &TriMesh, _m: &f64) -> Result<()> {
            Ok(())
        }

        fn shape_derivative(&self, mesh: &TriMesh, m: &f64, _: &()) -> Result<ShapeDerivative> {
            let n = mesh.n_nodes();
            let c = 2.0 * (m - self.target) / n as f64;
            let values = (0..2 * n).map(|i| if i % 2 == 0 { c } else { 0.0 }).collect();
            ShapeDerivative::new(mesh, values, &self.metric.fixed_tags)
        }
    }

    fn square(x0: f64) -> TriMesh {
        generate_rectangle(x0 - 0.5, x0 + 0.5, 0.0, 1.0, 6, 6).unwrap()
    }

    #[test]
    fn method_parsing() {
        assert_eq!("gd".parse::<Method>().unwrap(), Method::GD);
        assert_eq!("LBFGS3".parse::<Method>().unwrap(), Method::Lbfgs(3));
        assert_eq!("lbfgs-5".parse::<Method>().unwrap(), Method::Lbfgs(5));
        assert_eq!("ncg-dy".parse::<Method>().unwrap(), Method::Ncg(NcgVariant::DY));
        assert_eq!("cg_hz".parse::<Method>().unwrap(), Method::Ncg(NcgVariant::HZ));
        for bad in ["", "lbfgs", "lbfgs0", "ncg-xx", "newton"] {
            assert!(bad.parse::<Method>().is_err(), "{bad}");
        }
        for m in [Method::GD, Method::Lbfgs(2), Method::Ncg(NcgVariant::PR)] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn initial_step_rules() {
        let ls = LineSearchParams::new(2.0, 1e-4, 0.5);
        assert_eq!(initial_trial_step(Method::Lbfgs(3), true, Some(0.01), &ls), 1.0);
        assert_eq!(initial_trial_step(Method::Lbfgs(3), false, Some(0.25), &ls), 0.5);
        assert_eq!(initial_trial_step(Method::GD, false, Some(0.25), &ls), 0.5);
        assert_eq!(initial_trial_step(Method::Ncg(NcgVariant::DY), false, None, &ls), 2.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(LineSearchParams::new(1.0, 0.0, 0.5).validate().is_err());
        assert!(LineSearchParams::new(1.0, 0.5, 1.0).validate().is_err());
        assert!(RestartPolicy { k_cg: Some(0), eps_cg: 1.0 }.validate().is_err());
        let mut o = RunOptions::new(Method::GD);
        o.tol = 1.0;
        assert!(o.validate().is_err());
    }

    #[test]
    fn armijo_accepts_unit_step_on_parabola() {
        // J(t) = (t - 1)² along a unit translation
        let mesh = square(0.0);
        let p = MeanX::new(1.0);
        let d = NodalField::from_vector_fn(&mesh, |_| [1.0, 0.0]);
        let out = armijo(&p, &mesh, 1.0, &d, -2.0, 1.0, &LineSearchParams::default(), 0.1).unwrap();
        let acc = out.accepted.unwrap();
        assert_eq!(acc.t, 1.0);
        assert!(acc.cost < 1e-24);
        assert_eq!((out.trials, out.state_solves, out.rejected_meshes), (1, 1, 0));
    }

    #[test]
    fn armijo_rejects_inverted_meshes_without_solves() {
        let mesh = generate_rectangle(1.0, 2.0, 0.0, 1.0, 4, 4).unwrap();
        let p = MeanX::new(1.0);
        let j0 = p.evaluate(&mesh).unwrap();
        let d = NodalField::from_vector_fn(&mesh, |x| [-1e9 * x[0], 0.0]);
        let dj = {
            let m = p.solve_state(&mesh).unwrap();
            p.shape_derivative(&mesh, &m, &()).unwrap()
        };
        let slope = descent_value(&dj, &d).unwrap();
        let out = armijo(&p, &mesh, j0, &d, slope, 1.0, &LineSearchParams::default(), 0.1).unwrap();
        let acc = out.accepted.unwrap();
        // 1 - 1e9 t must stay above the 0.1 area floor: first admissible step is 2^-31
        assert_eq!(acc.t, 0.5f64.powi(31));
        assert_eq!(out.rejected_meshes, 31);
        assert_eq!(out.state_solves, 1);
        assert!(admissibility(&mesh, &acc.mesh, 0.1).unwrap().admissible);
    }

    #[test]
    fn armijo_larger_sigma_accepts_smaller_step() {
        // J(t) = (3t - 1)²
        let mesh = square(0.0);
        let p = MeanX::new(1.0);
        let d = NodalField::from_vector_fn(&mesh, |_| [3.0, 0.0]);
        let step = |sigma| {
            let ls = LineSearchParams::new(1.0, sigma, 0.5);
            armijo(&p, &mesh, 1.0, &d, -6.0, 1.0, &ls, 0.1).unwrap().accepted.unwrap().t
        };
        assert_eq!(step(1e-4), 0.5);
        assert_eq!(step(0.99), 0.5f64.powi(8));
    }

    #[test]
    fn armijo_reports_failure_below_t_min() {
        let mesh = square(0.0);
        let p = MeanX::new(1.0);
        // ascent direction disguised with a negative slope never satisfies the test
        let d = NodalField::from_vector_fn(&mesh, |_| [-1.0, 0.0]);
        let ls = LineSearchParams::default();
        let out = armijo(&p, &mesh, 1.0, &d, -2.0, 1.0, &ls, 0.1).unwrap();
        assert!(out.accepted.is_none());
        assert_eq!(out.trials, out.state_solves);
        assert!(0.5f64.powi(out.trials as i32 - 1) >= ls.t_min);
        assert!(0.5f64.powi(out.trials as i32) < ls.t_min);
        assert!(armijo(&p, &mesh, 1.0, &d, 0.0, 1.0, &ls, 0.1).is_err());
    }

    #[test]
    fn ascent_proposals_are_reset() {
        let mesh = square(0.0);
        let p = MeanX::new(1.0);
        let dj = p.shape_derivative(&mesh, &0.0, &()).unwrap();
        let g: Vec<f64> = dj.values().to_vec();
        let (d, raw, slope, reset) = enforce_descent(&mesh, &dj, &g, g.clone()).unwrap();
        assert!(reset && raw > 0.0 && slope < 0.0);
        assert_eq!(d.values(), direction_gd(&g).as_slice());
        let (_, raw, slope, reset) = enforce_descent(&mesh, &dj, &g, direction_gd(&g)).unwrap();
        assert!(!reset && raw == slope);
    }

    #[test]
    fn stationary_start_converges_immediately() {
        let mesh = square(1.0);
        let (out, h) = run(&MeanX::new(1.0), &mesh, &RunOptions::new(Method::GD)).unwrap();
        assert_eq!(h.status, Status::Converged);
        assert_eq!(h.records.len(), 1);
        assert_eq!(out.coords(), mesh.coords());
    }

    #[test]
    fn zero_iteration_budget() {
        let mut o = RunOptions::new(Method::Ncg(NcgVariant::DY));
        o.k_max = 0;
        let (_, h) = run(&MeanX::new(1.0), &square(0.0), &o).unwrap();
        assert_eq!(h.status, Status::MaxIterations);
        assert_eq!(h.records.len(), 1);
        assert_eq!((h.state_solves(), h.adjoint_solves()), (1, 1));
        assert_eq!(h.records[0].rel_grad_norm, 1.0);
    }

    #[test]
    fn every_method_converges_on_translation_problem() {
        let methods = [Method::GD, Method::Lbfgs(3)].into_iter().chain(NcgVariant::ALL.map(Method::Ncg));
        for method in methods {
            let mut o = RunOptions::new(method);
            o.tol = 1e-6;
            o.record_coords = true;
            let p = MeanX::new(1.0);
            let (mesh, h) = run(&p, &square(0.0), &o).unwrap();
            assert_eq!(h.status, Status::Converged, "{method}");
            assert!((p.solve_state(&mesh).unwrap() - 1.0).abs() < 1e-5, "{method}");
            for w in h.records.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                assert!(b.cost < a.cost, "{method}");
                let bound = a.cost + o.line_search.sigma * a.step.unwrap() * a.descent_value.unwrap();
                assert!(b.cost <= bound, "{method}");
                let m = mesh.with_coords(b.coords.clone().unwrap()).unwrap();
                assert_eq!(p.evaluate(&m).unwrap(), b.cost);
            }
            assert_eq!(h.state_solves(), 1 + h.records.iter().map(|r| r.trials - r.rejected_meshes).sum::<usize>());
            assert_eq!(h.adjoint_solves(), h.records.len());
        }
    }
}
