use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use shapeopt::optimize::{LineSearchParams, RestartPolicy, RunOptions};
use shapeopt::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Poisson,
    Eit,
    Stokes,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [Self::Poisson, Self::Eit, Self::Stokes];

    pub fn default_k_max(self) -> usize {
        match self {
            Self::Poisson | Self::Eit => 50,
            Self::Stokes => 250,
        }
    }

    /// Element counts of the benchmark meshes.
    pub fn default_mesh_elems(self) -> usize {
        match self {
            Self::Poisson => 15000,
            Self::Eit => 11870,
            Self::Stokes => 12326,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Poisson => "poisson",
            Self::Eit => "eit",
            Self::Stokes => "stokes",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" => Ok(Self::Poisson),
            "eit" => Ok(Self::Eit),
            "stokes" => Ok(Self::Stokes),
            _ => bail!("unknown problem `{s}` (expected poisson, eit or stokes)"),
        }
    }
}

/// Second Lamé parameter of the deformation metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuConfig {
    Constant(f64),
    /// Harmonic interpolation between `max` on the deformable boundary and
    /// `min` on the fixed one.
    Laplace {
        max: f64,
        min: f64,
    },
}

impl FromStr for MuConfig {
    type Err = anyhow::Error;

    /// `0.357` or `laplace(500, 1)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(args) = s.strip_prefix("laplace(").and_then(|r| r.strip_suffix(')')) {
            let v: Vec<f64> = args
                .split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("bad mu spec `{s}`"))?;
            let [max, min] = v[..] else { bail!("laplace(max, min) takes two values") };
            if !(max > 0.0 && min > 0.0) {
                bail!("laplace mu bounds must be positive");
            }
            return Ok(Self::Laplace { max, min });
        }
        let v: f64 = s.parse().with_context(|| format!("bad mu spec `{s}`"))?;
        if !(v > 0.0) {
            bail!("mu must be positive");
        }
        Ok(Self::Constant(v))
    }
}

impl fmt::Display for MuConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "{v}"),
            Self::Laplace { max, min } => write!(f, "laplace({max}, {min})"),
        }
    }
}

/// Everything a run needs. Unset optional fields fall back to the defaults of
/// the selected problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub method: Method,
    pub tol: f64,
    pub k_max: Option<usize>,
    pub t0: f64,
    pub sigma: f64,
    pub omega: f64,
    pub lambda: Option<f64>,
    pub mu: Option<MuConfig>,
    pub delta: Option<f64>,
    pub k_cg: Option<usize>,
    pub eps_cg: f64,
    pub mesh_elems: Option<usize>,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Poisson,
            method: Method::GD,
            tol: 5e-4,
            k_max: None,
            t0: 1.0,
            sigma: 1e-4,
            omega: 0.5,
            lambda: None,
            mu: None,
            delta: None,
            k_cg: None,
            eps_cg: f64::INFINITY,
            mesh_elems: None,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn parse_inf_f64(v: &str) -> Result<f64> {
    match v.trim() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        s => s.parse().with_context(|| format!("bad number `{s}`")),
    }
}

fn parse_inf_usize(v: &str) -> Result<Option<usize>> {
    match v.trim() {
        "inf" | "infinity" | "∞" => Ok(None),
        s => Ok(Some(s.parse().with_context(|| format!("bad integer `{s}`"))?)),
    }
}

impl RunConfig {
    pub fn for_problem(problem: ProblemKind) -> Self {
        Self { problem, ..Self::default() }
    }

    pub fn k_max(&self) -> usize {
        self.k_max.unwrap_or_else(|| self.problem.default_k_max())
    }

    pub fn mesh_elems(&self) -> usize {
        self.mesh_elems.unwrap_or_else(|| self.problem.default_mesh_elems())
    }

    /// Sets one key. Keys use underscores; dashes are accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let num = |v: &str| -> Result<f64> { v.parse().with_context(|| format!("bad number `{v}` for `{key}`")) };
        match key.trim().replace('-', "_").as_str() {
            "problem" => self.problem = value.parse()?,
            "method" => self.method = value.parse().map_err(|e| anyhow!("{e}"))?,
            "tol" => self.tol = num(value)?,
            "k_max" | "kmax" => self.k_max = Some(value.parse().with_context(|| format!("bad k_max `{value}`"))?),
            "t0" => self.t0 = num(value)?,
            "sigma" => self.sigma = num(value)?,
            "omega" => self.omega = num(value)?,
            "lambda" => self.lambda = Some(num(value)?),
            "mu" => self.mu = Some(value.parse()?),
            "delta" => self.delta = Some(num(value)?),
            "k_cg" | "kcg" => self.k_cg = parse_inf_usize(value)?,
            "eps_cg" | "epscg" => self.eps_cg = parse_inf_f64(value)?,
            "mesh_elems" => self.mesh_elems = Some(value.parse().with_context(|| format!("bad mesh_elems `{value}`"))?),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = value.parse().with_context(|| format!("bad seed `{value}`"))?,
            other => bail!("unknown configuration key `{other}`"),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            self.set(k, v).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_kv(&text).with_context(|| format!("in {}", path.display()))?;
        Ok(cfg)
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        let mut opts = RunOptions::new(self.method);
        opts.line_search = LineSearchParams::new(self.t0, self.sigma, self.omega);
        opts.restart = RestartPolicy { k_cg: self.k_cg, eps_cg: self.eps_cg };
        opts.tol = self.tol;
        opts.k_max = self.k_max();
        opts.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(opts)
    }

    pub fn validate(&self) -> Result<()> {
        self.run_options()?;
        if self.mesh_elems() < 16 {
            bail!("mesh_elems must be at least 16");
        }
        if self.lambda.is_some_and(|l| !(l >= 0.0)) || self.delta.is_some_and(|d| !(d >= 0.0)) {
            bail!("lambda and delta must be non-negative");
        }
        Ok(())
    }

    /// The configuration as `key = value` lines.
    pub fn to_kv(&self) -> String {
        let opt = |key: &str, v: Option<String>| match v {
            Some(v) => format!("{key} = {v}\n"),
            None => format!("# {key} = problem default\n"),
        };
        let mut s = format!(
            "problem = {}\nmethod = {}\ntol = {:e}\nk_max = {}\nt0 = {}\nsigma = {}\nomega = {}\n",
            self.problem,
            self.method,
            self.tol,
            self.k_max(),
            self.t0,
            self.sigma,
            self.omega
        );
        s += &opt("lambda", self.lambda.map(|v| v.to_string()));
        s += &opt("mu", self.mu.map(|v| v.to_string()));
        s += &opt("delta", self.delta.map(|v| v.to_string()));
        s += &format!("k_cg = {}\n", self.k_cg.map_or("inf".into(), |v| v.to_string()));
        s += &format!("eps_cg = {}\n", if self.eps_cg.is_finite() { self.eps_cg.to_string() } else { "inf".into() });
        s += &format!("mesh_elems = {}\nout = {}\nseed = {}\n", self.mesh_elems(), self.out.display(), self.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use shapeopt::NcgVariant;

    #[test]
    fn key_value_parsing() {
        let mut c = RunConfig::default();
        c.apply_kv("problem = stokes # channel\nmethod=ncg-hz\n\nk_cg = 10\neps-cg = inf\nmu = laplace(500, 1)\n")
            .unwrap();
        assert_eq!(c.problem, ProblemKind::Stokes);
        assert_eq!(c.method, Method::Ncg(NcgVariant::HZ));
        assert_eq!(c.k_cg, Some(10));
        assert!(c.eps_cg.is_infinite());
        assert_eq!(c.mu, Some(MuConfig::Laplace { max: 500.0, min: 1.0 }));
        assert_eq!(c.k_max(), 250);
        assert!(c.apply_kv("nonsense = 1").is_err());
        assert!(c.apply_kv("method = newton").is_err());
        assert!(c.apply_kv("tol").is_err());
    }

    #[test]
    fn kv_round_trip() {
        let mut c = RunConfig::for_problem(ProblemKind::Eit);
        c.method = Method::Lbfgs(5);
        c.seed = 7;
        c.mu = Some(MuConfig::Constant(2.0));
        let mut d = RunConfig::default();
        d.apply_kv(&c.to_kv()).unwrap();
        assert_eq!(d.k_max, Some(50));
        d.k_max = None;
        d.mesh_elems = None;
        assert_eq!(d, c);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.tol = 0.0;
        assert!(c.validate().is_err());
        c.tol = 1e-3;
        c.omega = 1.5;
        assert!(c.validate().is_err());
    }
}
