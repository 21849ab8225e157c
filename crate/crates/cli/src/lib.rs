//! Command-line driver: loads surface specs, runs one experiment per
//! subcommand and writes JSON, CSV and SVG artifacts.
//!
//! Exit codes: 0 all checks passed, 1 violations found, 2 precondition or
//! gate failure, 3 input error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use config::{Overrides, RunConfig};
use output::Status;
use revlab::spec_file::SurfaceSpec;
use revlab::warp::SurfaceModel;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{field}: {message}")]
    Input { field: String, message: String },
    #[error("{file}: {source}")]
    Surface {
        file: String,
        #[source]
        source: revlab::Error,
    },
    #[error(transparent)]
    Core(#[from] revlab::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn is_input_error(e: &revlab::Error) -> bool {
    use revlab::Error::*;
    matches!(
        e,
        SpecFile { .. } | BadParameter { .. } | InvalidArgument(_) | WarpVanishes { .. } | NonFiniteCurvature { .. } | ZeroVector
    )
}

impl CliError {
    pub fn input(field: &str, message: impl Into<String>) -> Self {
        Self::Input {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input { .. } | Self::Io { .. } => 3,
            Self::Surface { source, .. } | Self::Core(source) if is_input_error(source) => 3,
            _ => 2,
        }
    }

    /// Machine-readable description naming the failing file and field.
    pub fn to_json(&self) -> serde_json::Value {
        let (kind, file, field) = match self {
            Self::Input { field, .. } => ("Input".to_string(), None, Some(field.clone())),
            Self::Io { path, .. } => ("Io".to_string(), Some(path.clone()), None),
            Self::Surface { file, source } => (variant(source), Some(file.clone()), None),
            Self::Core(revlab::Error::SpecFile { path, field, .. }) => {
                ("SpecFile".to_string(), Some(path.clone()), Some(field.clone()))
            }
            Self::Core(source) => (variant(source), None, None),
        };
        serde_json::json!({
            "exit_code": self.exit_code(),
            "error": kind,
            "message": self.to_string(),
            "file": file,
            "field": field,
        })
    }
}

fn variant(e: &revlab::Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string()
}

/// A point `t,θ` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarPoint(pub f64, pub f64);

impl std::str::FromStr for PolarPoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected t,theta, got `{s}`"))?;
        let t: f64 = a.trim().parse().map_err(|_| format!("bad t in `{s}`"))?;
        let th: f64 = b.trim().parse().map_err(|_| format!("bad theta in `{s}`"))?;
        if !(t >= 0.0 && t.is_finite() && th.is_finite()) {
            return Err(format!("need t >= 0 and finite theta, got `{s}`"));
        }
        Ok(Self(t, th))
    }
}

#[derive(Debug, Parser)]
#[command(name = "revlab", version, about = "Geodesics, cut loci and Busemann functions on model surfaces of revolution")]
pub struct Cli {
    /// Surface spec file; repeat for commands taking two surfaces.
    #[arg(long, global = true)]
    pub surface: Vec<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Tolerance override `name=value`.
    #[arg(long, global = true)]
    pub tol: Vec<String>,
    /// Sample-plan override `name=count`.
    #[arg(long, global = true)]
    pub samples: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Warp function, total curvature and identity residuals.
    Surface,
    /// Shoot one geodesic.
    Geodesic {
        #[arg(long)]
        t0: f64,
        #[arg(long, default_value_t = 0.0)]
        theta0: f64,
        /// Angle to the outward meridian; at the pole, the meridian's θ.
        #[arg(long, allow_hyphen_values = true)]
        phi0: f64,
        #[arg(long)]
        length: f64,
    },
    /// Distance and minimal geodesics between two points.
    Distance {
        #[arg(long, allow_hyphen_values = true)]
        x: PolarPoint,
        #[arg(long, allow_hyphen_values = true)]
        y: PolarPoint,
    },
    /// Cut locus of the point `(t0, 0)`.
    Cutlocus {
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
    },
    /// Constants Λ0, r1, r2, r3.
    Lemmas,
    /// Busemann function of a meridian ray at the given points.
    Busemann {
        #[arg(long, required = true, allow_hyphen_values = true)]
        x: Vec<PolarPoint>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        ray_theta: f64,
    },
    /// Randomized triangle comparison between the first surface and the
    /// second (the model).
    VerifyTct {
        #[arg(long, default_value_t = std::f64::consts::PI)]
        delta0: f64,
    },
    /// Lemma constants, growth inequalities and the exhaustion series.
    VerifyExhaustion {
        #[arg(long, default_value_t = std::f64::consts::PI)]
        delta0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        ray_theta: f64,
    },
    /// Every applicable report for every surface.
    ReportAll {
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        delta0: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Surface => "surface",
            Self::Geodesic { .. } => "geodesic",
            Self::Distance { .. } => "distance",
            Self::Cutlocus { .. } => "cutlocus",
            Self::Lemmas => "lemmas",
            Self::Busemann { .. } => "busemann",
            Self::VerifyTct { .. } => "verify-tct",
            Self::VerifyExhaustion { .. } => "verify-exhaustion",
            Self::ReportAll { .. } => "report-all",
        }
    }
}

/// Loaded surfaces and the resolved configuration.
pub struct Context {
    pub config: RunConfig,
    pub overrides: Overrides,
    pub surfaces: Vec<SurfaceModel>,
    pub seed: u64,
}

impl Context {
    pub fn new(cli: &Cli) -> Result<Self, CliError> {
        let overrides = Overrides::resolve(&cli.tol, &cli.samples)?;
        if cli.surface.is_empty() {
            return Err(CliError::input("--surface", "at least one surface spec is required"));
        }
        let specs = cli
            .surface
            .iter()
            .map(|p| SurfaceSpec::load(p).map_err(CliError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let surfaces = specs
            .iter()
            .map(|s| {
                s.build().map_err(|e| match e {
                    e @ revlab::Error::SpecFile { .. } => CliError::Core(e),
                    source => CliError::Surface {
                        file: s.path.clone(),
                        source,
                    },
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let config = RunConfig {
            command: cli.command.name().to_string(),
            args: serde_json::to_value(&cli.command).expect("command serializes"),
            surfaces: specs,
            seed: cli.seed,
            distance_plan: overrides.distance_plan(),
            sector_plan: overrides.sector_plan(),
            lemma_plan: overrides.lemma_plan(),
            overrides: overrides.clone(),
        };
        Ok(Self {
            config,
            overrides,
            surfaces,
            seed: cli.seed,
        })
    }

    pub fn surface(&self, i: usize) -> &SurfaceModel {
        &self.surfaces[i]
    }
}

/// Runs the command and writes its artifacts below `cli.out`.
pub fn run(cli: &Cli) -> Result<Status, CliError> {
    let ctx = Context::new(cli)?;
    let arts = match &cli.command {
        Command::Surface => commands::surface(&ctx, 0)?,
        Command::Geodesic { t0, theta0, phi0, length } => commands::geodesic(&ctx, *t0, *theta0, *phi0, *length)?,
        Command::Distance { x, y } => commands::distance(&ctx, *x, *y)?,
        Command::Cutlocus { t0 } => commands::cutlocus(&ctx, 0, *t0)?,
        Command::Lemmas => commands::lemmas(&ctx, 0)?.0,
        Command::Busemann { x, ray_theta } => commands::busemann(&ctx, x, *ray_theta)?,
        Command::VerifyTct { delta0 } => commands::verify_tct(&ctx, *delta0)?,
        Command::VerifyExhaustion { delta0, ray_theta } => commands::verify_exhaustion(&ctx, 0, *delta0, *ray_theta, None)?,
        Command::ReportAll { t0, delta0 } => commands::report_all(&ctx, *t0, *delta0)?,
    };
    arts.write(&cli.out)?;
    Ok(arts.status)
}

/// Writes `error.json` next to the artifacts; failures here are ignored
/// since the error is also printed.
pub fn write_error(out: &Path, err: &CliError) {
    if std::fs::create_dir_all(out).is_ok() {
        let mut bytes = serde_json::to_vec_pretty(&err.to_json()).unwrap_or_default();
        bytes.push(b'\n');
        let _ = std::fs::write(out.join("error.json"), bytes);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_points_parse() {
        assert_eq!("1.5,-2".parse::<PolarPoint>().unwrap(), PolarPoint(1.5, -2.0));
        assert!("1.5".parse::<PolarPoint>().is_err());
        assert!("-1,0".parse::<PolarPoint>().is_err());
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::input("--tol", "x").exit_code(), 3);
        assert_eq!(CliError::Core(revlab::Error::WarpVanishes { t: 2.5 }).exit_code(), 3);
        assert_eq!(CliError::Core(revlab::Error::Gate("x".into())).exit_code(), 2);
        let e = CliError::Core(revlab::Error::TotalCurvatureNotAbovePi { c: 0.0, bound: 0.0 });
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.to_json()["error"], "TotalCurvatureNotAbovePi");
    }
}
