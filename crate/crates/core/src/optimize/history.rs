use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::mesh::Point;
use crate::{Error, Result};

/// Relative gradient-norm thresholds of the comparison tables.
pub const THRESHOLDS: [f64; 6] = [1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4];

pub const CSV_HEADER: &str = "iter,cost,rel_grad_norm,step,state_solves,adjoint_solves";

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
    /// A state or adjoint solve failed after the initial iterate.
    SolverFailure(String),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Converged => f.write_str("Converged"),
            Status::MaxIterations => f.write_str("MaxIterations"),
            Status::LineSearchFailed => f.write_str("LineSearchFailed"),
            Status::SolverFailure(_) => f.write_str("SolverFailure"),
        }
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Converged" => Ok(Status::Converged),
            "MaxIterations" => Ok(Status::MaxIterations),
            "LineSearchFailed" => Ok(Status::LineSearchFailed),
            "SolverFailure" => Ok(Status::SolverFailure(String::new())),
            _ => Err(Error::InvalidInput(format!("unknown status `{s}`"))),
        }
    }
}

/// One iteration of the descent loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub cost: f64,
    /// `‖G_k‖_a / ‖G_0‖_a`.
    pub rel_grad_norm: f64,
    /// `‖G_k‖²_a`.
    pub grad_norm_sq: f64,
    /// Accepted step size; `None` on the final iteration.
    pub step: Option<f64>,
    /// Cumulative solve counts after the gradient of this iteration.
    pub state_solves: usize,
    pub adjoint_solves: usize,
    /// `a(G_k, D_k)` of the executed direction.
    pub descent_value: Option<f64>,
    /// `a(G_k, D_k)` of the proposed direction, before the descent check.
    pub raw_descent_value: Option<f64>,
    /// The proposed direction was replaced by `-G_k`.
    pub descent_reset: bool,
    pub beta: Option<f64>,
    pub ncg_restart: bool,
    pub beta_guarded: bool,
    /// `a(s, y)` of the L-BFGS pair formed at this iteration.
    pub pair_curvature: Option<f64>,
    /// Pairs in memory when the direction was computed.
    pub memory_len: usize,
    /// Armijo trials (including rejected meshes) and rejected meshes.
    pub trials: usize,
    pub rejected_meshes: usize,
    /// Node coordinates of `Ω_k`, when recording is enabled.
    pub coords: Option<Vec<Point>>,
}

impl IterationRecord {
    pub(crate) fn new(k: usize, cost: f64, grad_norm_sq: f64, rel: f64, states: usize, adjoints: usize) -> Self {
        Self {
            k,
            cost,
            rel_grad_norm: rel,
            grad_norm_sq,
            step: None,
            state_solves: states,
            adjoint_solves: adjoints,
            descent_value: None,
            raw_descent_value: None,
            descent_reset: false,
            beta: None,
            ncg_restart: false,
            beta_guarded: false,
            pair_curvature: None,
            memory_len: 0,
            trials: 0,
            rejected_meshes: 0,
            coords: None,
        }
    }
}

/// Per-iteration records and the termination status of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptHistory {
    pub method: String,
    pub records: Vec<IterationRecord>,
    pub status: Status,
}

impl OptHistory {
    /// Index of the last iterate.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.cost)
    }

    pub fn state_solves(&self) -> usize {
        self.records.last().map_or(0, |r| r.state_solves)
    }

    pub fn adjoint_solves(&self) -> usize {
        self.records.last().map_or(0, |r| r.adjoint_solves)
    }

    /// First iteration whose relative gradient norm is at most `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.rel_grad_norm <= threshold).map(|r| r.k)
    }

    /// Iterations to reach each of [`THRESHOLDS`].
    pub fn threshold_iterations(&self) -> [Option<usize>; 6] {
        THRESHOLDS.map(|t| self.first_below(t))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 2));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let step = r.step.map_or(String::new(), |t| format!("{t:e}"));
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{},{},{}",
                r.k, r.cost, r.rel_grad_norm, step, r.state_solves, r.adjoint_solves
            );
        }
        let _ = writeln!(s, "# status={}", self.status);
        s
    }

    /// Parses the CSV layout written by [`OptHistory::to_csv`]; only the
    /// tabulated columns are restored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::InvalidInput(format!("history line {line}: {msg}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => return Err(bad(1, "missing header")),
        }
        let mut records = Vec::new();
        let mut status = None;
        for (n, line) in lines {
            if let Some(s) = line.strip_prefix("# status=") {
                status = Some(s.trim().parse()?);
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(n + 1, "expected six fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n + 1, "bad number"));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(n + 1, "bad integer"));
            let mut r = IterationRecord::new(int(f[0])?, num(f[1])?, f64::NAN, num(f[2])?, int(f[4])?, int(f[5])?);
            r.step = if f[3].is_empty() { None } else { Some(num(f[3])?) };
            records.push(r);
        }
        let status = status.ok_or_else(|| bad(0, "missing status line"))?;
        Ok(Self { method: String::new(), records, status })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> OptHistory {
        let mut a = IterationRecord::new(0, 1.0, 4.0, 1.0, 1, 1);
        a.step = Some(0.5);
        let b = IterationRecord::new(1, 0.5, 0.01, 0.05, 2, 2);
        OptHistory { method: "gd".into(), records: vec![a, b], status: Status::Converged }
    }

    #[test]
    fn csv_round_trip() {
        let h = sample();
        let csv = h.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.trim_end().ends_with("# status=Converged"));
        let back = OptHistory::from_csv(&csv).unwrap();
        assert_eq!(back.records.len(), 2);
        assert_eq!(back.records[0].step, Some(0.5));
        assert_eq!(back.records[1].step, None);
        assert_eq!(back.records[1].rel_grad_norm, 0.05);
        assert_eq!(back.status, Status::Converged);
    }

    #[test]
    fn thresholds() {
        let h = sample();
        assert_eq!(h.threshold_iterations(), [Some(1), Some(1), None, None, None, None]);
        assert_eq!(h.iterations(), 1);
    }
}
