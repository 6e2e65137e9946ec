//! Long-format `(x, series, value)` exports for plotting.

use std::collections::HashMap;

use anyhow::{bail, Context, Result};
use megopolis::Algorithm;
use serde::{Deserialize, Serialize};

use crate::output::{parse_rows, Table};
use crate::pf::PfRow;
use crate::quality::QualityRow;
use crate::traffic::TrafficRow;

/// Figure identifiers, the table each reads, and what it plots.
pub const FIGURES: &[(&str, Table, &str)] = &[
    ("mse-vs-N", Table::Quality, "normalised MSE against particle count, one facet per weight parameter"),
    ("mse-vs-param", Table::Quality, "normalised MSE against weight parameter, one facet per particle count"),
    ("bias-contribution", Table::Quality, "squared bias over MSE against weight parameter"),
    ("traffic-vs-N", Table::Traffic, "mean transactions per warp read against particle count"),
    ("traffic-ratio", Table::Traffic, "transactions relative to megopolis at the same point (speed-up proxy)"),
    ("pf-rmse", Table::Pf, "filter RMSE against iteration budget"),
    ("pf-resample-ratio", Table::Pf, "share of filter time spent resampling against iteration budget"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub figure: String,
    pub x: f64,
    pub series: String,
    pub facet: String,
    pub measure: String,
    pub value: f64,
}

fn row(figure: &str, x: f64, series: Algorithm, facet: String, measure: &str, value: f64) -> PlotRow {
    PlotRow { figure: figure.into(), x, series: series.to_string(), facet, measure: measure.into(), value }
}

pub fn plot_rows(table: Table, body: &str, figure: &str) -> Result<Vec<PlotRow>> {
    let &(_, wanted, _) = FIGURES
        .iter()
        .find(|(id, _, _)| *id == figure)
        .with_context(|| format!("unknown figure id {figure:?}"))?;
    if wanted != table {
        bail!("figure {figure:?} needs a {} results file, got {}", wanted.name(), table.name());
    }
    let mut out = Vec::new();
    match figure {
        "mse-vs-N" | "mse-vs-param" | "bias-contribution" => {
            for r in parse_rows::<QualityRow>(body)? {
                let (x, facet) = if figure == "mse-vs-N" {
                    (r.n as f64, format!("{}={}", r.family, r.param))
                } else {
                    (r.param, format!("n={}", r.n))
                };
                let (measure, value) = if figure == "bias-contribution" {
                    ("bias_contribution", r.bias_contribution)
                } else {
                    ("mse_per_particle", r.mse_per_particle)
                };
                out.push(row(figure, x, r.algorithm, facet, measure, value));
            }
        }
        "traffic-vs-N" | "traffic-ratio" => {
            let rows = parse_rows::<TrafficRow>(body)?;
            let reference: HashMap<(usize, u64), f64> = rows
                .iter()
                .filter(|r| r.algorithm == Algorithm::Megopolis)
                .map(|r| ((r.n, r.param.to_bits()), r.mean_transactions))
                .collect();
            for r in rows {
                let facet = format!("{}={}", r.family, r.param);
                if figure == "traffic-vs-N" {
                    out.push(row(figure, r.n as f64, r.algorithm, facet, "mean_transactions", r.mean_transactions));
                } else {
                    let base = reference
                        .get(&(r.n, r.param.to_bits()))
                        .with_context(|| format!("no megopolis row at n={} {facet}", r.n))?;
                    let measure = "transaction_ratio_to_megopolis (speed-up proxy)";
                    out.push(row(figure, r.n as f64, r.algorithm, facet, measure, r.mean_transactions / base));
                }
            }
        }
        _ => {
            for r in parse_rows::<PfRow>(body)? {
                let x = r.iterations.map_or(r.mean_iterations, |b| b as f64);
                let facet = format!("n={}", r.particles);
                if figure == "pf-rmse" {
                    out.push(row(figure, x, r.algorithm, facet, "rmse", r.rmse));
                } else {
                    let ratio = r.resample_ratio.context("results were written without --timings")?;
                    out.push(row(figure, x, r.algorithm, facet, "resample_ratio", ratio));
                }
            }
        }
    }
    Ok(out)
}
