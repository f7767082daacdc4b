//! CSV and JSON report emitters.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::CampaignResult;
use crate::solver::EnergyReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Anything that can be written as a numeric table.
pub trait CsvTable {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<f64>>;
}

impl CsvTable for EnergyReport {
    fn header(&self) -> Vec<String> {
        ["t", "E0", "diss", "wall", "Er", "balance_residual"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| vec![r.t, r.e0, r.diss, r.wall, r.er, r.balance_residual]).collect()
    }
}

/// Raw campaign table: `nu, t, err_H<k>..., err_next_sq, grad_inf`.
pub struct RawTable<'a>(pub &'a CampaignResult);

impl CsvTable for RawTable<'_> {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["nu".to_string(), "t".to_string()];
        h.extend(self.0.error_orders.iter().map(|k| format!("err_H{k}")));
        h.push(format!("err_H{}_sq", self.0.r + 1));
        h.push("grad_inf".into());
        h
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0
            .raw
            .iter()
            .map(|r| {
                let mut row = vec![r.nu, r.t];
                row.extend(&r.err);
                row.push(r.err_next_sq);
                row.push(r.grad_inf);
                row
            })
            .collect()
    }
}

/// 17 significant digits, so every value reparses to the same double.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(table: &dyn CsvTable) -> String {
    let mut out = table.header().join(",");
    out.push('\n');
    for row in table.rows() {
        let cells: Vec<String> = row.iter().map(|v| format_real(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write a report that is both tabular and serializable.
pub fn emit_report<T: CsvTable + Serialize>(report: &T, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(report),
        Format::Json => to_json(report)?,
    };
    write_text(path, &text)
}

#[derive(Serialize)]
struct FitEntry<'a> {
    order: usize,
    #[serde(flatten)]
    fit: &'a crate::experiments::RateFit,
}

#[derive(Serialize)]
struct RateSummary<'a> {
    r: usize,
    fits: Vec<FitEntry<'a>>,
    strictly_decreasing: bool,
    monotone_with_slack: bool,
    t0_max_error: f64,
    nu_star: Option<f64>,
    gradient_uniform: bool,
    gradient_max_per_nu: &'a [(f64, f64)],
    sqrt_regime: Option<bool>,
    summaries: &'a [crate::experiments::LadderSummary],
    failures: &'a [(f64, String)],
}

/// `raw.csv`, `ratefit.json` and gnuplot-ready `rates.dat` in `dir`.
pub fn write_campaign_outputs(result: &CampaignResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("raw.csv"), &to_csv(&RawTable(result)))?;
    let summary = RateSummary {
        r: result.r,
        fits: result.fits.iter().map(|(order, fit)| FitEntry { order: *order, fit }).collect(),
        strictly_decreasing: result.strictly_decreasing,
        monotone_with_slack: result.monotone_with_slack,
        t0_max_error: result.t0_max_error,
        nu_star: result.nu_star,
        gradient_uniform: result.gradient.uniform,
        gradient_max_per_nu: &result.gradient.max_per_nu,
        sqrt_regime: result.sqrt_regime,
        summaries: &result.summaries,
        failures: &result.failures,
    };
    write_text(&dir.join("ratefit.json"), &to_json(&summary)?)?;
    let mut dat = String::from("# nu");
    for k in &result.error_orders {
        let _ = write!(dat, " sup_err_H{k}");
    }
    let _ = writeln!(dat, " int_err_H{}_sq grad_inf_max", result.r + 1);
    for s in &result.summaries {
        let _ = write!(dat, "{}", format_real(s.nu));
        for e in &s.sup_err {
            let _ = write!(dat, " {}", format_real(*e));
        }
        let _ = writeln!(dat, " {} {}", format_real(s.integrated_next_sq), format_real(s.grad_inf_max));
    }
    write_text(&dir.join("rates.dat"), &dat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::fit_rate;
    use crate::solver::EnergyRow;

    #[test]
    fn energy_csv_header_and_precision() {
        let mut r = EnergyReport::empty(2);
        assert_eq!(to_csv(&r), "t,E0,diss,wall,Er,balance_residual\n");
        r.rows.push(EnergyRow { t: 0.1, e0: 1.0 / 3.0, diss: 0.0, wall: 0.0, er: 2.0, balance_residual: -1e-17 });
        let csv = to_csv(&r);
        let cells: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[1].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(cells[0], 0.1);
    }

    #[test]
    fn rate_fit_json_has_slope() {
        let f = fit_rate(&[(1e-2, 0.1), (1e-3, 0.05), (1e-4, 0.02)]).unwrap();
        let j = to_json(&f).unwrap();
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert!(v.get("slope").is_some());
    }

    #[test]
    fn emit_writes_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let r = EnergyReport::empty(2);
        emit_report(&r, Format::Csv, &dir.path().join("e.csv")).unwrap();
        emit_report(&r, Format::Json, &dir.path().join("e.json")).unwrap();
        let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.json")).unwrap()).unwrap();
        assert_eq!(j["r"], 2);
    }
}
