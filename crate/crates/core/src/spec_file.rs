//! Surface spec files: a `[surface]` TOML table naming a catalog family or a
//! tabulated curvature CSV.
//!
//! ```toml
//! [surface]
//! kind = "smoothed_cone"
//! a = 0.25
//! t_max = 1e6
//! tol = 1e-12
//! ```
//!
//! Tabulated curvature uses `kind = "tabulated"` and `csv = "path"`, the path
//! resolved against the spec file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::warp::{Pchip, RadialCurvature, SurfaceModel, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceSpec {
    pub path: String,
    pub kind: String,
    pub params: BTreeMap<String, f64>,
    pub t_max: Option<f64>,
    pub tol: Option<f64>,
    pub csv: Option<PathBuf>,
}

fn spec_err(path: &Path, field: &str, message: impl Into<String>) -> Error {
    Error::SpecFile {
        path: path.display().to_string(),
        field: field.to_string(),
        message: message.into(),
    }
}

fn number(path: &Path, field: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(spec_err(path, field, format!("expected a number, got {}", other.type_str()))),
    }
}

impl SurfaceSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| spec_err(path, "file", e.to_string()))?;
        Self::parse(&text, path)
    }

    /// Parses spec text; `path` names the file in errors and anchors the CSV.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| spec_err(path, "syntax", e.to_string().trim_end()))?;
        let table = match doc.get("surface") {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(spec_err(path, "surface", "must be a table")),
            None => return Err(spec_err(path, "surface", "missing section")),
        };
        let kind = match table.get("kind") {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(spec_err(path, "kind", "must be a string")),
            None => return Err(spec_err(path, "kind", "missing")),
        };
        let mut spec = Self {
            path: path.display().to_string(),
            kind,
            params: BTreeMap::new(),
            t_max: None,
            tol: None,
            csv: None,
        };
        for (key, v) in table {
            match key.as_str() {
                "kind" => {}
                "t_max" => spec.t_max = Some(number(path, key, v)?),
                "tol" => spec.tol = Some(number(path, key, v)?),
                "csv" => {
                    let rel = v.as_str().ok_or_else(|| spec_err(path, key, "must be a string"))?;
                    let base = path.parent().unwrap_or(Path::new(""));
                    spec.csv = Some(base.join(rel));
                }
                _ => {
                    spec.params.insert(key.clone(), number(path, key, v)?);
                }
            }
        }
        if spec.kind == "tabulated" && spec.csv.is_none() {
            return Err(spec_err(path, "csv", "required for kind `tabulated`"));
        }
        if spec.kind != "tabulated" && spec.csv.is_some() {
            return Err(spec_err(path, "csv", "only valid for kind `tabulated`"));
        }
        Ok(spec)
    }

    pub fn curvature(&self) -> Result<RadialCurvature> {
        let path = Path::new(&self.path);
        if let Some(csv) = &self.csv {
            if let Some(k) = self.params.keys().next() {
                return Err(spec_err(path, k, "not a parameter of `tabulated`"));
            }
            let (t, g) = read_table(csv)?;
            return Pchip::new(t, g).map(RadialCurvature::Tabulated).map_err(|e| spec_err(path, "csv", e.to_string()));
        }
        RadialCurvature::from_params(&self.kind, &self.params).map_err(|e| match e {
            Error::BadParameter { name, reason } => spec_err(path, &name, reason),
            other => other,
        })
    }

    /// Builds the surface. Warp-solver failures keep their own variants.
    pub fn build(&self) -> Result<SurfaceModel> {
        let path = Path::new(&self.path);
        let g = self.curvature()?;
        let t_max = self.t_max.unwrap_or_else(|| g.default_t_max());
        let tol = self.tol.unwrap_or(DEFAULT_TOL);
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(spec_err(path, "t_max", format!("must be positive and finite, got {t_max}")));
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(spec_err(path, "tol", format!("must lie in (0, 1), got {tol}")));
        }
        SurfaceModel::new(g, t_max, tol)
    }
}

/// Reads `(t, G)` rows; a non-numeric first row is taken as a header.
pub fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let err = |m: String| spec_err(path, "csv", m);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let (mut t, mut g) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 2 {
            return Err(err(format!("row {}: expected 2 columns, got {}", i + 1, rec.len())));
        }
        let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
        match parsed {
            (Ok(a), Ok(b)) => {
                t.push(a);
                g.push(b);
            }
            _ if i == 0 => {}
            _ => return Err(err(format!("row {}: not numeric", i + 1))),
        }
    }
    Ok((t, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn parse(s: &str) -> Result<SurfaceSpec> {
        SurfaceSpec::parse(s, Path::new("s.toml"))
    }

    #[test]
    fn catalog_spec() {
        let s = parse("[surface]\nkind = \"smoothed_cone\"\na = 0.25\nt_max = 100\n").unwrap();
        assert_eq!(s.params["a"], 0.25);
        assert_eq!(s.t_max, Some(100.0));
        let m = s.build().unwrap();
        assert_eq!(m.name(), "smoothed_cone");
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse("[surface]\nkind = \"bump\"\nheight = 1\n").unwrap().build().unwrap_err();
        assert!(matches!(e, Error::SpecFile { ref field, .. } if field == "height"), "{e:?}");
        let e = parse("[surface]\nkind = \"plane\"\nt_max = \"x\"\n").unwrap_err();
        assert!(matches!(e, Error::SpecFile { ref field, .. } if field == "t_max"));
        let e = parse("[other]\n").unwrap_err();
        assert!(matches!(e, Error::SpecFile { ref field, .. } if field == "surface"));
        let e = parse("[surface]\nkind = \"tabulated\"\n").unwrap_err();
        assert!(matches!(e, Error::SpecFile { ref field, .. } if field == "csv"));
    }

    #[test]
    fn positive_curvature_vanishes() {
        let e = parse("[surface]\nkind = \"constant\"\nk = 1\nt_max = 4\n").unwrap().build().unwrap_err();
        match e {
            Error::WarpVanishes { t } => assert!((t - std::f64::consts::PI).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tabulated_csv_relative_to_spec() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = std::fs::File::create(dir.path().join("g.csv")).unwrap();
        writeln!(f, "t,G").unwrap();
        for i in 0..=20 {
            writeln!(f, "{},{}", i as f64 * 0.5, -1.0).unwrap();
        }
        let spec = dir.path().join("s.toml");
        std::fs::write(&spec, "[surface]\nkind = \"tabulated\"\ncsv = \"g.csv\"\n").unwrap();
        let m = SurfaceSpec::load(&spec).unwrap().build().unwrap();
        assert_eq!(m.t_max(), 10.0);
        let f = m.f(3.0).0;
        assert!((f / 3f64.sinh() - 1.0).abs() < 1e-8);
    }
}
