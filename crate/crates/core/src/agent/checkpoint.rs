//! Plain-text parameter files with a version header, plus JSON metadata.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::QNetwork;
use crate::error::{Error, Result};

pub const CHECKPOINT_HEADER: &str = "valuestack-qnet v1";

/// Header line, a `sizes` line, then one parameter per line in shortest
/// round-trip decimal form.
pub fn write_checkpoint(net: &QNetwork, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{CHECKPOINT_HEADER}")?;
    let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
    writeln!(w, "sizes {}", sizes.join(" "))?;
    for p in net.params() {
        writeln!(w, "{p}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<QNetwork> {
    let path = path.as_ref();
    let bad = |msg: String| Error::Checkpoint(format!("{}: {msg}", path.display()));
    let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CHECKPOINT_HEADER {
        return Err(bad(format!("expected header `{CHECKPOINT_HEADER}`, found `{header}`")));
    }
    let sizes_line = lines.next().transpose()?.unwrap_or_default();
    let sizes = sizes_line
        .strip_prefix("sizes ")
        .ok_or_else(|| bad("missing `sizes` line".into()))?
        .split_whitespace()
        .map(|s| s.parse::<usize>().map_err(|_| bad(format!("bad layer size `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    let mut params = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| bad(format!("line {}: `{line}` is not a number", i + 3)))?;
        if !v.is_finite() {
            return Err(bad(format!("line {}: non-finite parameter", i + 3)));
        }
        params.push(v);
    }
    QNetwork::from_params(&sizes, params).map_err(|e| bad(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub layer_sizes: Vec<usize>,
    pub n_params: usize,
    pub features: Vec<String>,
    pub actions: Vec<String>,
    pub seed: u64,
    pub episodes: usize,
    pub total_steps: usize,
    pub best_episode: Option<usize>,
    pub best_validation_profit: Option<f64>,
    pub validation_days: usize,
}

impl CheckpointMeta {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let net = QNetwork::new(&[5, 7, 3], 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.txt");
        write_checkpoint(&net, &p).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), net);
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.txt");
        std::fs::write(&p, "something else\n").unwrap();
        assert!(matches!(read_checkpoint(&p), Err(Error::Checkpoint(_))));
        std::fs::write(&p, format!("{CHECKPOINT_HEADER}\nsizes 2 1\n0.5\n")).unwrap();
        assert!(matches!(read_checkpoint(&p), Err(Error::Checkpoint(_))));
        std::fs::write(&p, format!("{CHECKPOINT_HEADER}\nsizes 2 1\n0.5\nx\n0\n")).unwrap();
        assert!(matches!(read_checkpoint(&p), Err(Error::Checkpoint(_))));
        std::fs::write(&p, format!("{CHECKPOINT_HEADER}\nsizes 2 1\n0.5\n1\n-2\n")).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap().params(), &[0.5, 1.0, -2.0]);
    }
}
