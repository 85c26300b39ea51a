//! Construction of the three benchmark problems from a [`RunConfig`].

use std::path::Path;

use anyhow::{bail, Context, Result};
use shapeopt::mesh::{
    generate_channel_with_obstacle, generate_disk, generate_square_with_interface, ChannelSpec, InnerShape,
};
use shapeopt::problems::{EitMeasurements, EitProblem, PoissonProblem, StokesObstacleProblem};
use shapeopt::shape::{MetricParams, MuSpec};
use shapeopt::{ShapeFunctional, TriMesh};

use crate::config::{MuConfig, ProblemKind, RunConfig};

pub const EIT_MEASUREMENTS_FILE: &str = "eit_measurements.txt";

/// The obstacle channel used by the Stokes benchmark.
pub fn stokes_channel() -> ChannelSpec {
    ChannelSpec { refinement: 6.0, ..ChannelSpec::default() }
}

/// The initial geometry of a benchmark at the configured resolution.
pub fn initial_mesh(cfg: &RunConfig) -> Result<TriMesh> {
    let n = cfg.mesh_elems();
    let mesh = match cfg.problem {
        ProblemKind::Poisson => generate_disk([0.0, 0.0], 1.0, n),
        ProblemKind::Eit => generate_square_with_interface(&InnerShape::Square { center: [0.5, 0.5], edge: 0.4 }, n),
        ProblemKind::Stokes => generate_channel_with_obstacle(&stokes_channel(), n),
    };
    mesh.with_context(|| format!("generating the {} mesh", cfg.problem))
}

pub enum Benchmark {
    Poisson(PoissonProblem),
    Eit(EitProblem),
    Stokes(StokesObstacleProblem),
}

/// Runs `$body` with `$p` bound to the concrete problem.
#[macro_export]
macro_rules! with_problem {
    ($bench:expr, $p:ident => $body:expr) => {
        match $bench {
            $crate::bench::Benchmark::Poisson($p) => $body,
            $crate::bench::Benchmark::Eit($p) => $body,
            $crate::bench::Benchmark::Stokes($p) => $body,
        }
    };
}

fn metric_with_overrides(cfg: &RunConfig, base: &MetricParams, mesh: &TriMesh) -> Result<MetricParams> {
    let mut m = base.clone();
    if let Some(l) = cfg.lambda {
        m.lambda = l;
    }
    if let Some(d) = cfg.delta {
        m.delta = d;
    }
    match (cfg.mu, &base.mu) {
        (None, _) => {}
        (Some(MuConfig::Constant(v)), _) => m.mu = MuSpec::Constant(v),
        (Some(MuConfig::Laplace { max, min }), MuSpec::Laplace { max_tags, min_tags, .. }) => {
            m.mu = MuSpec::Laplace { max, min, max_tags: max_tags.clone(), min_tags: min_tags.clone() }
        }
        (Some(MuConfig::Laplace { max, min }), MuSpec::Constant(_)) => {
            let max_tags: Vec<String> =
                mesh.tag_names().iter().filter(|t| !m.fixed_tags.contains(t)).cloned().collect();
            if m.fixed_tags.is_empty() || max_tags.is_empty() {
                bail!("a Laplace mu needs both fixed and deformable boundary parts");
            }
            m.mu = MuSpec::Laplace { max, min, max_tags, min_tags: m.fixed_tags.clone() };
        }
    }
    Ok(m)
}

/// EIT measurements, read from `cache_dir` when present and synthesized
/// (and cached) otherwise.
pub fn eit_measurements(cfg: &RunConfig, cache_dir: Option<&Path>) -> Result<EitMeasurements> {
    let path = cache_dir.map(|d| d.join(EIT_MEASUREMENTS_FILE));
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        return EitMeasurements::read(p).with_context(|| format!("reading {}", p.display()));
    }
    let meas = EitMeasurements::synthesize(cfg.mesh_elems(), 10.0, 1.0).context("synthesizing EIT measurements")?;
    if let Some(p) = path {
        meas.write(&p).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(meas)
}

/// The problem of `cfg` on its initial mesh. EIT weights are normalized on
/// `mesh`.
pub fn build(cfg: &RunConfig, mesh: &TriMesh, cache_dir: Option<&Path>) -> Result<Benchmark> {
    Ok(match cfg.problem {
        ProblemKind::Poisson => {
            let p = PoissonProblem::new();
            let m = metric_with_overrides(cfg, p.metric(), mesh)?;
            Benchmark::Poisson(p.with_metric(m))
        }
        ProblemKind::Eit => {
            let p = EitProblem::new(mesh, eit_measurements(cfg, cache_dir)?)?;
            let m = metric_with_overrides(cfg, p.metric(), mesh)?;
            Benchmark::Eit(p.with_metric(m))
        }
        ProblemKind::Stokes => {
            let p = StokesObstacleProblem::new(mesh)?;
            let m = metric_with_overrides(cfg, p.metric(), mesh)?;
            Benchmark::Stokes(p.with_metric(m))
        }
    })
}
