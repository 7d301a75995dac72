//! Financial bookkeeping: FCR capacity revenue, single-price quarter-hour
//! imbalance settlement, and the terminal-value adjusted block profit.

use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::market::{format_timestamp, MINUTES_PER_BLOCK, MINUTES_PER_QUARTER};

/// Cash for a quarter-hour net position. Injection at a positive price earns,
/// and so does withdrawal at a negative price.
#[inline]
pub fn settle_quarter_hour(net_injected_mwh: f64, price_eur_mwh: f64) -> f64 {
    net_injected_mwh * price_eur_mwh
}

/// Pay-as-cleared capacity remuneration for a full block.
#[inline]
pub fn fcr_capacity_revenue(bid_mw: u32, clearing_price_eur_mw: f64) -> f64 {
    bid_mw as f64 * clearing_price_eur_mw
}

/// Block profit with the end-of-block energy change valued at the next
/// block's median settlement price.
#[inline]
pub fn adjusted_block_profit(r_fcr: f64, pi_imb: f64, delta_e: f64, pi_bar_next: f64) -> f64 {
    r_fcr + pi_imb + pi_bar_next * delta_e
}

/// Financial outcome of one rollout of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEvaluation {
    pub r_fcr: f64,
    pub pi_imb: f64,
    /// End minus start stored energy, MWh.
    pub delta_e: f64,
    pub pi_bar_next: f64,
    pub j_adj: f64,
}

impl BlockEvaluation {
    pub fn new(r_fcr: f64, pi_imb: f64, delta_e: f64, pi_bar_next: f64) -> Self {
        Self {
            r_fcr,
            pi_imb,
            delta_e,
            pi_bar_next,
            j_adj: adjusted_block_profit(r_fcr, pi_imb, delta_e, pi_bar_next),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarterEntry {
    /// Quarter index relative to the ledger start.
    pub quarter: usize,
    pub energy_mwh: f64,
    pub price: f64,
    pub cash: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEntry {
    pub block: usize,
    pub bid_mw: u32,
    pub price: f64,
    pub revenue: f64,
}

/// Cash record of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    start: DateTime<Utc>,
    quarters: Vec<QuarterEntry>,
    blocks: Vec<BlockEntry>,
}

impl Ledger {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self {
            start,
            quarters: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn record_quarter(&mut self, quarter: usize, energy_mwh: f64, price: f64) -> f64 {
        let cash = settle_quarter_hour(energy_mwh, price);
        self.quarters.push(QuarterEntry {
            quarter,
            energy_mwh,
            price,
            cash,
        });
        cash
    }

    pub fn record_block(&mut self, block: usize, bid_mw: u32, price: f64) -> f64 {
        let revenue = fcr_capacity_revenue(bid_mw, price);
        self.blocks.push(BlockEntry {
            block,
            bid_mw,
            price,
            revenue,
        });
        revenue
    }

    pub fn quarters(&self) -> &[QuarterEntry] {
        &self.quarters
    }

    pub fn blocks(&self) -> &[BlockEntry] {
        &self.blocks
    }

    pub fn imbalance_cash(&self) -> f64 {
        self.quarters.iter().map(|q| q.cash).sum()
    }

    pub fn fcr_revenue(&self) -> f64 {
        self.blocks.iter().map(|b| b.revenue).sum()
    }

    pub fn total_profit(&self) -> f64 {
        self.imbalance_cash() + self.fcr_revenue()
    }

    /// `timestamp,category,energy_mwh,price,cash_eur`; FCR rows leave the
    /// energy column empty and carry the clearing price per MW.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "timestamp,category,energy_mwh,price,cash_eur")?;
        let mut rows: Vec<(i64, String)> = Vec::new();
        for b in &self.blocks {
            let t = self.start + Duration::minutes((b.block * MINUTES_PER_BLOCK) as i64);
            rows.push((
                t.timestamp(),
                format!("{},fcr,,{},{}", format_timestamp(t), b.price, b.revenue),
            ));
        }
        for q in &self.quarters {
            let t = self.start + Duration::minutes((q.quarter * MINUTES_PER_QUARTER) as i64);
            rows.push((
                t.timestamp(),
                format!(
                    "{},imbalance,{},{},{}",
                    format_timestamp(t),
                    q.energy_mwh,
                    q.price,
                    q.cash
                ),
            ));
        }
        rows.sort_by_key(|(t, _)| *t);
        for (_, line) in rows {
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }
}
