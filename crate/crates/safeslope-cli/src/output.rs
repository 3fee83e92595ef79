//! CSV emission. All floating-point values are written with 17 significant
//! digits so files round-trip bit-exactly and identical runs produce
//! byte-identical output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use crate::experiment::ExperimentResult;

/// 17 significant digits, enough to reconstruct any f64 exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn coordinate_header(dims: usize) -> String {
    (1..=dims).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",")
}

/// `surface.csv`: one row per grid point with both objective surfaces.
pub fn surface_csv(
    grid: &safeslope::GridDomain,
    f: &[f64],
    f_low: &[f64],
    f_star: f64,
    argmin_index: usize,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# f_star = {}", fmt_float(f_star));
    let _ = writeln!(out, "# argmin_index = {argmin_index}");
    let _ = writeln!(out, "point,{},f,f_low", coordinate_header(grid.dims()));
    for i in 0..grid.len() {
        let coords: Vec<String> = grid.coords(i).iter().map(|c| fmt_float(*c)).collect();
        let _ = writeln!(out, "{i},{},{},{}", coords.join(","), fmt_float(f[i]), fmt_float(f_low[i]));
    }
    out
}

/// `trial_<k>.csv`: one row per sampled iteration.
pub fn trial_csv(record: &safeslope::TrialRecord, dims: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# seed = {}", record.seed);
    let s0: Vec<String> = record.initial_safe_set.iter().map(|i| i.to_string()).collect();
    let _ = writeln!(out, "# initial_safe_set = {}", s0.join(";"));
    let _ = writeln!(out, "# stop_reason = {}", record.stop.label());
    let _ = writeln!(
        out,
        "t,point,{},f_true,observed,safe,safe_set_size,incumbent,incumbent_f",
        coordinate_header(dims)
    );
    for row in &record.rows {
        let coords: Vec<String> = row.coords.iter().map(|c| fmt_float(*c)).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.t,
            row.point,
            coords.join(","),
            fmt_float(row.f_true),
            fmt_float(row.observed),
            if row.safe { 1 } else { 0 },
            row.safe_set_size,
            row.incumbent,
            fmt_float(row.incumbent_f),
        );
    }
    out
}

/// `aggregate.csv`: cumulative-regret and unsafe-count statistics across
/// trials, one row per iteration.
pub fn aggregate_csv(result: &ExperimentResult) -> String {
    let agg = &result.aggregate;
    let mut out = String::new();
    let _ = writeln!(out, "# cell = {}", result.config.cell_label());
    let _ = writeln!(out, "# seed = {}", result.config.seed);
    let _ = writeln!(out, "# trials = {}", result.config.trials);
    let _ = writeln!(out, "# f_star = {}", fmt_float(result.truth.f_star));
    let _ = writeln!(out, "t,regret_mean,regret_std,unsafe_mean,unsafe_std");
    for t in 0..agg.iterations as usize {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t + 1,
            fmt_float(agg.regret_mean[t]),
            fmt_float(agg.regret_std[t]),
            fmt_float(agg.unsafe_mean[t]),
            fmt_float(agg.unsafe_std[t]),
        );
    }
    out
}

/// `analysis.csv`: flat `quantity,value` rows.
pub fn analysis_csv(rows: &[(String, String)]) -> String {
    let mut out = String::from("quantity,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// Writes every output file for one experiment cell into `dir`.
pub fn write_experiment(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let dims = result.truth.grid.dims();
    for (k, record) in result.records.iter().enumerate() {
        let path = dir.join(format!("trial_{k}.csv"));
        fs::write(&path, trial_csv(record, dims))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let path = dir.join("aggregate.csv");
    fs::write(&path, aggregate_csv(result))
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_exactly() {
        for v in [0.1, -3.5e-7, 2.0 / 3.0, 1e300, -0.0, 123456.789] {
            let s = fmt_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "value {v} via {s}");
        }
    }
}
