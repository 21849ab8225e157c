//! Artifact collection and writing.

use std::path::Path;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum Status {
    Pass,
    Violations(usize),
    Gate(String),
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Pass => 0,
            Self::Violations(_) => 1,
            Self::Gate(_) => 2,
        }
    }

    /// The more severe of the two; violation counts add up.
    pub fn combine(self, other: Status) -> Status {
        match (self, other) {
            (Self::Gate(a), _) | (_, Self::Gate(a)) => Self::Gate(a),
            (Self::Violations(a), Self::Violations(b)) => Self::Violations(a + b),
            (Self::Violations(a), Self::Pass) | (Self::Pass, Self::Violations(a)) => Self::Violations(a),
            (Self::Pass, Self::Pass) => Self::Pass,
        }
    }

    pub fn from_count(n: usize) -> Self {
        if n == 0 {
            Self::Pass
        } else {
            Self::Violations(n)
        }
    }
}

/// Files produced by one command, keyed by relative path.
#[derive(Debug)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub status: Status,
}

impl Artifacts {
    pub fn new(status: Status) -> Self {
        Self {
            files: Vec::new(),
            status,
        }
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(header).expect("in-memory csv");
        for r in rows {
            w.serialize(r).expect("in-memory csv");
        }
        self.files.push((name.to_string(), w.into_inner().expect("in-memory csv")));
    }

    pub fn svg(&mut self, name: &str, doc: String) {
        self.files.push((name.to_string(), doc.into_bytes()));
    }

    /// Moves `other`'s files under `dir/` and folds its status in.
    pub fn nest(&mut self, dir: &str, other: Artifacts) {
        self.files
            .extend(other.files.into_iter().map(|(n, b)| (format!("{dir}/{n}"), b)));
        let s = std::mem::replace(&mut self.status, Status::Pass);
        self.status = s.combine(other.status);
    }

    pub fn write(&self, out: &Path) -> Result<(), CliError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| CliError::Io { path, source }
        };
        for (name, bytes) in &self.files {
            let path = out.join(name);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(io(dir))?;
            }
            std::fs::write(&path, bytes).map_err(io(&path))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_combination() {
        assert_eq!(Status::Pass.combine(Status::Violations(2)), Status::Violations(2));
        assert_eq!(Status::Violations(1).combine(Status::Violations(2)), Status::Violations(3));
        assert_eq!(Status::Violations(1).combine(Status::Gate("g".into())).exit_code(), 2);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut a = Artifacts::new(Status::Pass);
        a.csv("x.csv", &["a", "b"], [(1.0, Some(2.5)), (3.0, None)]);
        assert_eq!(String::from_utf8(a.files[0].1.clone()).unwrap(), "a,b\n1.0,2.5\n3.0,\n");
    }
}
