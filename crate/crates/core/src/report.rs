//! Cross-run comparison table and the bid heat map.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::config::ReportConfig;
use crate::error::{Error, Result};
use crate::pipeline::{RunSummary, BLOCKS_FILE, SUMMARY_FILE};

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub run: String,
    pub summary: RunSummary,
}

/// One cell of the heat map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCell {
    pub fcr_lo: f64,
    pub fcr_hi: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub blocks: usize,
    pub bid_sum: f64,
}

impl HeatCell {
    pub fn mean_bid(&self) -> Option<f64> {
        (self.blocks > 0).then(|| self.bid_sum / self.blocks as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct BlockFeature {
    pub fcr_price: f64,
    pub imbalance_std: f64,
    pub bid_mw: u32,
}

/// Bin index for `v`: `edges[i] <= v < edges[i + 1]`, with the last bin
/// closed on the right.
pub fn bin_of(v: f64, edges: &[f64]) -> Option<usize> {
    let n = edges.len().checked_sub(1)?;
    if !(v >= edges[0] && v <= edges[n]) {
        return None;
    }
    Some(edges.windows(2).position(|w| v < w[1]).unwrap_or(n - 1))
}

pub fn heatmap(blocks: &[BlockFeature], cfg: &ReportConfig) -> Vec<HeatCell> {
    let (fe, se) = (&cfg.fcr_price_edges, &cfg.sigma_edges);
    let mut cells: Vec<HeatCell> = fe
        .windows(2)
        .flat_map(|f| {
            se.windows(2).map(move |s| HeatCell {
                fcr_lo: f[0],
                fcr_hi: f[1],
                sigma_lo: s[0],
                sigma_hi: s[1],
                blocks: 0,
                bid_sum: 0.0,
            })
        })
        .collect();
    let n_sigma = se.len() - 1;
    for b in blocks {
        if let (Some(i), Some(j)) = (bin_of(b.fcr_price, fe), bin_of(b.imbalance_std, se)) {
            let c = &mut cells[i * n_sigma + j];
            c.blocks += 1;
            c.bid_sum += b.bid_mw as f64;
        }
    }
    cells
}

pub fn read_block_features(path: impl AsRef<Path>) -> Result<Vec<BlockFeature>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn run_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub rows: Vec<ComparisonRow>,
    pub cells: Vec<HeatCell>,
    pub comparison_path: PathBuf,
    pub heatmap_path: PathBuf,
}

/// Reads each run's summary (and, for non-uniform runs, its block features)
/// and writes the comparison table and heat map into `out_dir`.
pub fn cmd_report(runs: &[PathBuf], out_dir: &Path, cfg: &ReportConfig) -> Result<ReportOutput> {
    cfg.validate()?;
    if runs.is_empty() {
        return Err(Error::InvalidParameter("report needs at least one run directory".into()));
    }
    let mut rows = Vec::with_capacity(runs.len());
    let mut features = Vec::new();
    for dir in runs {
        let path = dir.join(SUMMARY_FILE);
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path,
                hint: "run `evaluate` for this run first".into(),
            });
        }
        let summary = RunSummary::read(&path)?;
        if summary.strategy == "non-uniform" {
            let blocks = dir.join(BLOCKS_FILE);
            if !blocks.exists() {
                return Err(Error::MissingArtifact {
                    path: blocks,
                    hint: "non-uniform runs need the block features from `optimize-bids`".into(),
                });
            }
            features.extend(read_block_features(blocks)?);
        }
        rows.push(ComparisonRow {
            run: run_name(dir),
            summary,
        });
    }
    let cells = heatmap(&features, cfg);

    std::fs::create_dir_all(out_dir)?;
    let comparison_path = out_dir.join(COMPARISON_FILE);
    let mut w = std::io::BufWriter::new(std::fs::File::create(&comparison_path)?);
    writeln!(
        w,
        "run,strategy,split,days,fcr_revenue,imbalance_profit,total_profit,cycles,overrides,violation_seconds"
    )?;
    for r in &rows {
        let s = &r.summary;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.run,
            s.strategy,
            s.split,
            s.days,
            s.fcr_revenue,
            s.imbalance_profit,
            s.fcr_revenue + s.imbalance_profit,
            s.cycles,
            s.overrides,
            s.violation_seconds
        )?;
    }
    w.flush()?;

    let heatmap_path = out_dir.join(HEATMAP_FILE);
    let mut w = std::io::BufWriter::new(std::fs::File::create(&heatmap_path)?);
    writeln!(w, "fcr_price_lo,fcr_price_hi,sigma_lo,sigma_hi,blocks,mean_bid_mw")?;
    for c in &cells {
        let mean = c.mean_bid().map(|m| m.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            c.fcr_lo, c.fcr_hi, c.sigma_lo, c.sigma_hi, c.blocks, mean
        )?;
    }
    w.flush()?;

    Ok(ReportOutput {
        rows,
        cells,
        comparison_path,
        heatmap_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{std_dev, Split};

    #[test]
    fn binning_edges() {
        let e = [0.0, 10.0, 20.0];
        assert_eq!(bin_of(0.0, &e), Some(0));
        assert_eq!(bin_of(9.99, &e), Some(0));
        assert_eq!(bin_of(10.0, &e), Some(1));
        assert_eq!(bin_of(20.0, &e), Some(1));
        assert_eq!(bin_of(20.1, &e), None);
        assert_eq!(bin_of(-1.0, &e), None);
        assert_eq!(bin_of(f64::NAN, &e), None);
    }

    #[test]
    fn alternating_schedule_puts_high_bids_in_high_price_bins() {
        let cfg = ReportConfig {
            fcr_price_edges: vec![0.0, 50.0, 1000.0],
            sigma_edges: vec![0.0, 1.0],
        };
        let blocks: Vec<BlockFeature> = (0..12)
            .map(|k| BlockFeature {
                fcr_price: if k % 2 == 0 { 100.0 } else { 5.0 },
                imbalance_std: 0.0,
                bid_mw: if k % 2 == 0 { 9 } else { 0 },
            })
            .collect();
        let cells = heatmap(&blocks, &cfg);
        assert_eq!(cells.len(), 2);
        assert_eq!((cells[0].blocks, cells[0].mean_bid()), (6, Some(0.0)));
        assert_eq!((cells[1].blocks, cells[1].mean_bid()), (6, Some(9.0)));
    }

    #[test]
    fn flat_prices_have_zero_sigma() {
        assert_eq!(std_dev(&[42.0; 16]), 0.0);
    }

    #[test]
    fn single_uniform_run_gives_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let run = dir.path().join("uniform-5");
        std::fs::create_dir_all(&run).unwrap();
        RunSummary {
            strategy: "uniform-5".into(),
            split: Split::Test,
            days: 1,
            fcr_revenue: 600.0,
            imbalance_profit: -12.5,
            total_profit: 587.5,
            cycles: 0.3,
            overrides: 0,
            violation_seconds: 0,
            boundary_violations: 0,
        }
        .write(run.join(SUMMARY_FILE))
        .unwrap();
        let out = cmd_report(&[run], dir.path(), &ReportConfig::default()).unwrap();
        assert_eq!(out.rows.len(), 1);
        let text = std::fs::read_to_string(out.comparison_path).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "uniform-5,uniform-5,test,1,600,-12.5,587.5,0.3,0,0");
        assert!(out.cells.iter().all(|c| c.blocks == 0));
    }

    #[test]
    fn missing_artifacts_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_report(&[dir.path().join("nope")], dir.path(), &ReportConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact { .. }));
    }
}
