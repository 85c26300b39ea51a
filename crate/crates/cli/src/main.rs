use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use shapeopt::{Method, NcgVariant};
use shapeopt_cli::commands::FD_STEPS;
use shapeopt_cli::{cmd_check_derivative, cmd_compare, cmd_mesh_info, cmd_run, RunConfig};

#[derive(Parser)]
#[command(name = "shapeopt", version, about = "Shape optimization benchmarks on moving triangle meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration file and per-key overrides.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// key = value configuration file
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// poisson, eit or stokes
    #[arg(long)]
    problem: Option<String>,
    /// gd, lbfgs<m> or ncg-{fr,pr,hs,dy,hz}
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long = "k-max")]
    k_max: Option<String>,
    #[arg(long)]
    t0: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    /// NCG restart period, or `inf`
    #[arg(long)]
    kcg: Option<String>,
    /// NCG orthogonality restart threshold, or `inf`
    #[arg(long)]
    epscg: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// constant or `laplace(max, min)`
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long = "mesh-elems")]
    mesh_elems: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let overrides = [
            ("problem", &self.problem),
            ("method", &self.method),
            ("tol", &self.tol),
            ("k_max", &self.k_max),
            ("t0", &self.t0),
            ("sigma", &self.sigma),
            ("omega", &self.omega),
            ("k_cg", &self.kcg),
            ("eps_cg", &self.epscg),
            ("lambda", &self.lambda),
            ("mu", &self.mu),
            ("delta", &self.delta),
            ("mesh_elems", &self.mesh_elems),
            ("out", &self.out),
            ("seed", &self.seed),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one problem with one method
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run several methods from the same initial mesh and tabulate them
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated methods; defaults to GD, L-BFGS 1/3/5 and all NCG variants
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        /// Rows run concurrently
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Finite-difference check of the assembled shape derivative
    CheckDerivative {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 5)]
        fields: usize,
        /// Comma-separated step sizes
        #[arg(long, value_delimiter = ',')]
        steps: Vec<f64>,
    },
    /// Print size, quality and tags of a mesh
    MeshInfo {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Mesh file (native or Gmsh 2); defaults to the generated initial mesh
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
}

fn default_methods() -> Vec<Method> {
    let mut m = vec![Method::GD, Method::Lbfgs(1), Method::Lbfgs(3), Method::Lbfgs(5)];
    m.extend(NcgVariant::ALL.map(Method::Ncg));
    m
}

fn usage_error(e: anyhow::Error) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::from(2)
}

fn failure(e: anyhow::Error) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { cfg } => {
            let cfg = match cfg.resolve() {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            match cmd_run(&cfg) {
                Ok(out) => {
                    println!("{}", out.summary);
                    ExitCode::SUCCESS
                }
                Err(e) => failure(e),
            }
        }
        Command::Compare { cfg, methods, jobs } => {
            let cfg = match cfg.resolve() {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            let methods = if methods.is_empty() {
                default_methods()
            } else {
                match methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>() {
                    Ok(m) => m,
                    Err(e) => return usage_error(e.into()),
                }
            };
            match cmd_compare(&cfg, &methods, jobs) {
                Ok(table) => {
                    print!("{}", table.to_text());
                    ExitCode::SUCCESS
                }
                Err(e) => failure(e),
            }
        }
        Command::CheckDerivative { cfg, fields, steps } => {
            let cfg = match cfg.resolve() {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            let steps = if steps.is_empty() { FD_STEPS.to_vec() } else { steps };
            match cmd_check_derivative(&cfg, fields, &steps) {
                Ok(check) => {
                    print!("{}", check.to_text());
                    if check.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => failure(e),
            }
        }
        Command::MeshInfo { cfg, mesh } => {
            let cfg = match cfg.resolve() {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            match cmd_mesh_info(&cfg, mesh.as_deref()) {
                Ok(s) => {
                    print!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => failure(e),
            }
        }
    }
}
