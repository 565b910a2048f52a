//! Flat CSV tables for plotting.
//!
//! | file              | columns                                           |
//! |-------------------|---------------------------------------------------|
//! | `score_vs_n_o.csv`| method, variant, t, n_o, score, normalized_score  |
//! | `score_vs_t.csv`  | method, variant, n_o, t, score, normalized_score  |
//! | `p0_vs_t.csv`     | method, variant, n_o, t, schmidt_p0               |
//!
//! A sweep is the set of rows sharing every column but the swept one (`n_o`
//! or `t`). Scores are divided by the sweep maximum, so each sweep peaks at
//! exactly 1; sweeps with a non-positive maximum are left unnormalized.
//! `t` is empty for time-independent cases and failed cells are omitted.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use qmetro::methods::Variant;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::MethodKind;
use crate::runner::RunResult;

pub const SCORE_VS_N_O: &str = "score_vs_n_o.csv";
pub const SCORE_VS_T: &str = "score_vs_t.csv";
pub const P0_VS_T: &str = "p0_vs_t.csv";

pub const SCORE_VS_N_O_COLUMNS: [&str; 6] = ["method", "variant", "t", "n_o", "score", "normalized_score"];
pub const SCORE_VS_T_COLUMNS: [&str; 6] = ["method", "variant", "n_o", "t", "score", "normalized_score"];
pub const P0_COLUMNS: [&str; 5] = ["method", "variant", "n_o", "t", "schmidt_p0"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoRow {
    pub method: MethodKind,
    pub variant: Variant,
    pub t: Option<f64>,
    pub n_o: usize,
    pub score: f64,
    pub normalized_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRow {
    pub method: MethodKind,
    pub variant: Variant,
    pub n_o: usize,
    pub t: Option<f64>,
    pub score: f64,
    pub normalized_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P0Row {
    pub method: MethodKind,
    pub variant: Variant,
    pub n_o: usize,
    pub t: Option<f64>,
    pub schmidt_p0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotTables {
    pub score_vs_n_o: Vec<NoRow>,
    pub score_vs_t: Vec<TimeRow>,
    pub p0_vs_t: Vec<P0Row>,
}

/// Total order on `Option<f64>` for sorting rows.
fn time_key(t: Option<f64>) -> i64 {
    t.map_or(i64::MIN, |t| (t * 1e12).round() as i64)
}

fn normalizer(scores: impl Iterator<Item = f64>) -> f64 {
    let max = scores.fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        max
    } else {
        1.0
    }
}

pub fn emit_plot_data(result: &RunResult) -> PlotTables {
    let ok: Vec<_> = result.cells.iter().filter_map(|c| c.score.map(|s| (c, s))).collect();

    let mut by_t: BTreeMap<_, Vec<_>> = BTreeMap::new();
    let mut by_n: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for &(c, s) in &ok {
        by_t.entry((c.method, variant_key(c.variant), time_key(c.t))).or_default().push((c, s));
        by_n.entry((c.method, variant_key(c.variant), c.n_o)).or_default().push((c, s));
    }

    let mut score_vs_n_o = Vec::new();
    for sweep in by_t.values_mut() {
        sweep.sort_by_key(|(c, _)| c.n_o);
        let norm = normalizer(sweep.iter().map(|&(_, s)| s));
        score_vs_n_o.extend(sweep.iter().map(|&(c, s)| NoRow {
            method: c.method,
            variant: c.variant,
            t: c.t,
            n_o: c.n_o,
            score: s,
            normalized_score: s / norm,
        }));
    }

    let mut score_vs_t = Vec::new();
    let mut p0_vs_t = Vec::new();
    for sweep in by_n.values_mut() {
        sweep.sort_by_key(|(c, _)| time_key(c.t));
        let norm = normalizer(sweep.iter().map(|&(_, s)| s));
        for &(c, s) in sweep.iter() {
            score_vs_t.push(TimeRow {
                method: c.method,
                variant: c.variant,
                n_o: c.n_o,
                t: c.t,
                score: s,
                normalized_score: s / norm,
            });
            p0_vs_t.push(P0Row {
                method: c.method,
                variant: c.variant,
                n_o: c.n_o,
                t: c.t,
                schmidt_p0: c.protocol.as_ref().and_then(|p| p.schmidt_p0),
            });
        }
    }
    PlotTables { score_vs_n_o, score_vs_t, p0_vs_t }
}

fn variant_key(v: Variant) -> u8 {
    match v {
        Variant::General => 0,
        Variant::Ppt => 1,
        Variant::Product => 2,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], columns: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    // written explicitly so that empty tables still carry the header
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().map(|row| row.with_context(|| format!("parsing {}", path.display()))).collect()
}

impl PlotTables {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_csv(&dir.join(SCORE_VS_N_O), &self.score_vs_n_o, &SCORE_VS_N_O_COLUMNS)?;
        write_csv(&dir.join(SCORE_VS_T), &self.score_vs_t, &SCORE_VS_T_COLUMNS)?;
        write_csv(&dir.join(P0_VS_T), &self.p0_vs_t, &P0_COLUMNS)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(Self {
            score_vs_n_o: read_csv(&dir.join(SCORE_VS_N_O))?,
            score_vs_t: read_csv(&dir.join(SCORE_VS_T))?,
            p0_vs_t: read_csv(&dir.join(P0_VS_T))?,
        })
    }
}
