//! Resolved run configuration: tolerance and sample-plan overrides over the
//! built-in defaults.

use std::collections::BTreeMap;

use revlab::busemann::LemmaPlan;
use revlab::cutlocus::SectorPlan;
use revlab::distance::DistancePlan;
use revlab::spec_file::SurfaceSpec;
use serde::Serialize;

use crate::CliError;

const TOLS: &[(&str, f64)] = &[
    ("tct", 1e-4),
    ("growth", 1e-3),
    ("exhaustion", 1e-3),
    ("polish", 1e-12),
    ("scan", 1e-8),
];

const SAMPLES: &[(&str, usize)] = &[
    ("n_scan", 720),
    ("fan", 1024),
    ("fan_paths", 32),
    ("triangles", 200),
    ("growth", 100),
    ("n_theta", 16),
    ("radii", 6),
    ("sector_radii", 8),
    ("sector_angles", 16),
    ("sector_fan", 256),
    ("r2_fan", 128),
    ("r3_angles", 8),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Overrides {
    pub tol: BTreeMap<String, f64>,
    pub samples: BTreeMap<String, usize>,
}

fn split<'a>(flag: &str, arg: &'a str) -> Result<(&'a str, &'a str), CliError> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::input(flag, format!("expected name=value, got `{arg}`")))
}

impl Overrides {
    /// Defaults with `--tol` and `--samples` arguments applied.
    pub fn resolve(tols: &[String], samples: &[String]) -> Result<Self, CliError> {
        let mut o = Self {
            tol: TOLS.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            samples: SAMPLES.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        };
        for arg in tols {
            let (k, v) = split("--tol", arg)?;
            let slot = o
                .tol
                .get_mut(k)
                .ok_or_else(|| CliError::input("--tol", format!("unknown tolerance `{k}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| CliError::input("--tol", format!("`{k}`: not a number: `{v}`")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::input("--tol", format!("`{k}` must be positive")));
            }
            *slot = v;
        }
        for arg in samples {
            let (k, v) = split("--samples", arg)?;
            let slot = o
                .samples
                .get_mut(k)
                .ok_or_else(|| CliError::input("--samples", format!("unknown sample plan `{k}`")))?;
            let v: usize = v
                .parse()
                .map_err(|_| CliError::input("--samples", format!("`{k}`: not a count: `{v}`")))?;
            if v == 0 {
                return Err(CliError::input("--samples", format!("`{k}` must be positive")));
            }
            *slot = v;
        }
        Ok(o)
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tol[name]
    }

    pub fn n(&self, name: &str) -> usize {
        self.samples[name]
    }

    pub fn distance_plan(&self) -> DistancePlan {
        DistancePlan {
            n_scan: self.n("n_scan"),
            scan_tol: self.tol("scan"),
            polish_tol: self.tol("polish"),
        }
    }

    pub fn sector_plan(&self) -> SectorPlan {
        SectorPlan {
            n_radii: self.n("sector_radii"),
            n_angles: self.n("sector_angles"),
            fan: self.n("sector_fan"),
            ..SectorPlan::default()
        }
    }

    pub fn lemma_plan(&self) -> LemmaPlan {
        LemmaPlan {
            r2_fan: self.n("r2_fan"),
            r3_angles: self.n("r3_angles"),
            ..LemmaPlan::default()
        }
    }
}

/// Everything a report needs to be reproduced. The output directory is left
/// out so reports written to different places stay byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub args: serde_json::Value,
    pub surfaces: Vec<SurfaceSpec>,
    pub seed: u64,
    pub overrides: Overrides,
    pub distance_plan: DistancePlan,
    pub sector_plan: SectorPlan,
    pub lemma_plan: LemmaPlan,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_and_unknown_names_fail() {
        let o = Overrides::resolve(&["tct=1e-3".into()], &["fan=64".into()]).unwrap();
        assert_eq!(o.tol("tct"), 1e-3);
        assert_eq!(o.n("fan"), 64);
        assert_eq!(o.n("triangles"), 200);
        assert!(Overrides::resolve(&["nope=1".into()], &[]).is_err());
        assert!(Overrides::resolve(&[], &["fan=x".into()]).is_err());
        assert!(Overrides::resolve(&["tct".into()], &[]).is_err());
    }
}
