use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParameters {
    pub d: usize,
    pub m_grid: Vec<usize>,
    pub schemes: Vec<String>,
    pub map: Option<String>,
    pub sigma: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeStatistic {
    pub scheme: String,
    pub m: usize,
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub trials: usize,
}

/// JSON summary of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub version: String,
    pub parameters: ReportParameters,
    pub statistics: Vec<SchemeStatistic>,
    pub files: Vec<String>,
    pub notes: Vec<String>,
    /// The full run configuration, when the run came from the command line.
    pub config: Option<serde_json::Value>,
}

impl ExperimentReport {
    pub fn new(kind: &str, parameters: ReportParameters, statistics: Vec<SchemeStatistic>) -> Self {
        Self {
            kind: kind.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            parameters,
            statistics,
            files: Vec::new(),
            notes: Vec::new(),
            config: None,
        }
    }

    pub fn find(&self, scheme: &str, m: usize) -> Option<&SchemeStatistic> {
        self.statistics.iter().find(|s| s.scheme == scheme && s.m == m)
    }
}

/// Write a CSV table whose first line is `# comment`.
pub fn write_csv(path: &Path, comment: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# {}", comment.replace('\n', " "))?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_starts_with_comment() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, "{\"a\":1}", &["x", "y"], &[vec!["1".into(), "2".into()]]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "# {\"a\":1}\nx,y\n1,2\n");
    }
}
