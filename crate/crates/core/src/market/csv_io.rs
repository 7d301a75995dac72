use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDateTime, SecondsFormat, Timelike, Utc};

use super::{
    is_block_boundary, FcrPriceSeries, FrequencyTrace, ImbalancePriceSeries, MINUTES_PER_QUARTER,
};
use crate::error::{Error, Result};

/// Longest run of missing seconds filled by holding the previous value.
pub const FREQUENCY_GAP_LIMIT_S: i64 = 60;

const NOMINAL_HZ: f64 = 50.0;

pub fn parse_timestamp(text: &str) -> Option<DateTime<Utc>> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
        .map(|n| n.and_utc())
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

struct Row {
    line: u64,
    at: DateTime<Utc>,
    value: f64,
}

/// Reads `(timestamp, value)` rows, picking the value column from `accepted`.
fn read_rows(path: &Path, accepted: &[&str]) -> Result<(Vec<Row>, usize)> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let ts_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("timestamp"))
        .ok_or_else(|| parse_err(1, "missing `timestamp` column".into()))?;
    let (value_col, which) = accepted
        .iter()
        .enumerate()
        .find_map(|(k, name)| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .map(|c| (c, k))
        })
        .ok_or_else(|| parse_err(1, format!("missing value column, expected one of {accepted:?}")))?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let ts = record.get(ts_col).unwrap_or_default();
        let at = parse_timestamp(ts)
            .ok_or_else(|| parse_err(line, format!("unparseable timestamp `{ts}`")))?;
        if at.nanosecond() != 0 {
            return Err(parse_err(line, format!("sub-second timestamp `{ts}`")));
        }
        let raw = record.get(value_col).unwrap_or_default();
        let value: f64 = raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(line, format!("unparseable value `{raw}`")))?;
        if let Some(prev) = rows.last().map(|r: &Row| r.at) {
            if at <= prev {
                return Err(Error::NonMonotoneTimestamp {
                    path: path.to_path_buf(),
                    line,
                    timestamp: at,
                });
            }
        }
        rows.push(Row { line, at, value });
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Ok((rows, which))
}

/// Requires one row every `step` exactly.
fn contiguous(path: &Path, rows: &[Row], step: Duration) -> Result<Vec<f64>> {
    let mut expected = rows[0].at;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.at != expected {
            return Err(Error::MissingInterval {
                path: path.to_path_buf(),
                expected,
                found: row.at,
            });
        }
        out.push(row.value);
        expected += step;
    }
    Ok(out)
}

/// Loads a 1 s frequency file with a `timestamp` column and either `hz`
/// (absolute) or `mhz_dev` (deviation from 50 Hz).
pub fn load_frequency_csv(path: impl AsRef<Path>) -> Result<FrequencyTrace> {
    let path = path.as_ref();
    let (rows, which) = read_rows(path, &["hz", "mhz_dev"])?;
    let absolute_hz = which == 0;
    let to_mhz = |v: f64| {
        if absolute_hz {
            (v - NOMINAL_HZ) * 1000.0
        } else {
            v
        }
    };
    let start = rows[0].at;
    let mut deviations_mhz = Vec::with_capacity(rows.len());
    let mut prev: Option<&Row> = None;
    for row in &rows {
        if let Some(p) = prev {
            let missing = (row.at - p.at).num_seconds() - 1;
            if missing > FREQUENCY_GAP_LIMIT_S {
                return Err(Error::OversizedGap {
                    path: path.to_path_buf(),
                    after: p.at,
                    missing_seconds: missing,
                    limit_seconds: FREQUENCY_GAP_LIMIT_S,
                });
            }
            let held = to_mhz(p.value);
            deviations_mhz.extend(std::iter::repeat_n(held, missing as usize));
        }
        deviations_mhz.push(to_mhz(row.value));
        prev = Some(row);
    }
    Ok(FrequencyTrace {
        start,
        deviations_mhz,
    })
}

/// Loads the 15-minute settlement file (`timestamp,price_eur_mwh`) and,
/// optionally, the 1-minute indicator file with the same columns. Without an
/// indicator file the settlement price doubles as a perfect indicator.
pub fn load_imbalance_csv(
    settlement_path: impl AsRef<Path>,
    indicator_path: Option<&Path>,
) -> Result<ImbalancePriceSeries> {
    let settlement_path = settlement_path.as_ref();
    let (rows, _) = read_rows(settlement_path, &["price_eur_mwh", "price"])?;
    let start = rows[0].at;
    if start.minute() % 15 != 0 || start.second() != 0 {
        return Err(Error::Parse {
            path: settlement_path.to_path_buf(),
            line: rows[0].line,
            message: format!("settlement series starts off a quarter-hour: {start}"),
        });
    }
    let settlement = contiguous(settlement_path, &rows, Duration::minutes(15))?;
    let Some(indicator_path) = indicator_path else {
        return Ok(ImbalancePriceSeries::with_perfect_indicator(start, settlement));
    };
    let (rows, _) = read_rows(indicator_path, &["price_eur_mwh", "price"])?;
    if rows[0].at != start {
        return Err(Error::Misaligned(format!(
            "indicator starts at {}, settlement at {start}",
            rows[0].at
        )));
    }
    let mut indicator = contiguous(indicator_path, &rows, Duration::minutes(1))?;
    let needed = settlement.len() * MINUTES_PER_QUARTER;
    if indicator.len() < needed {
        return Err(Error::Misaligned(format!(
            "{}: {} indicator minutes do not cover {} settlement quarters",
            indicator_path.display(),
            indicator.len(),
            settlement.len()
        )));
    }
    indicator.truncate(needed);
    ImbalancePriceSeries::new(start, indicator, settlement)
}

/// Loads 4-hour FCR clearing prices (`timestamp,price_eur_mw`).
pub fn load_fcr_csv(path: impl AsRef<Path>) -> Result<FcrPriceSeries> {
    let path = path.as_ref();
    let (rows, _) = read_rows(path, &["price_eur_mw", "price"])?;
    if let Some(row) = rows.iter().find(|r| !is_block_boundary(r.at)) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: row.line,
            message: format!("{} is not a 4-hour block start", row.at),
        });
    }
    if let Some(row) = rows.iter().find(|r| r.value < 0.0) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: row.line,
            message: format!("negative FCR clearing price {}", row.value),
        });
    }
    let prices = contiguous(path, &rows, Duration::hours(4))?;
    FcrPriceSeries::new(rows[0].at, prices)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn write_series(
    path: &Path,
    header: &str,
    start: DateTime<Utc>,
    step: Duration,
    values: &[f64],
    decimals: usize,
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "timestamp,{header}")?;
    let mut t = start;
    for v in values {
        writeln!(w, "{},{:.*}", format_timestamp(t), decimals, v)?;
        t += step;
    }
    w.flush()?;
    Ok(())
}

pub fn write_frequency_csv(path: impl AsRef<Path>, trace: &FrequencyTrace) -> Result<()> {
    write_series(
        path.as_ref(),
        "mhz_dev",
        trace.start,
        Duration::seconds(1),
        &trace.deviations_mhz,
        3,
    )
}

/// Writes the settlement and indicator files; returns their paths.
pub fn write_imbalance_csv(
    settlement_path: impl AsRef<Path>,
    indicator_path: impl AsRef<Path>,
    series: &ImbalancePriceSeries,
) -> Result<(PathBuf, PathBuf)> {
    let (s, i) = (settlement_path.as_ref(), indicator_path.as_ref());
    write_series(
        s,
        "price_eur_mwh",
        series.start,
        Duration::minutes(15),
        &series.settlement,
        4,
    )?;
    write_series(
        i,
        "price_eur_mwh",
        series.start,
        Duration::minutes(1),
        &series.minute_indicator,
        4,
    )?;
    Ok((s.to_path_buf(), i.to_path_buf()))
}

pub fn write_fcr_csv(path: impl AsRef<Path>, series: &FcrPriceSeries) -> Result<()> {
    write_series(
        path.as_ref(),
        "price_eur_mw",
        series.start,
        Duration::hours(4),
        &series.prices,
        4,
    )
}
