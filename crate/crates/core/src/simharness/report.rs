//! `report.csv` and `summary.json` writers.

use super::CoverageReport;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Aggregates of one experiment; `summary.json` holds a list of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub replicates: usize,
    pub seed: u64,
    pub projection_theta: Vec<f64>,
    pub projection_value: f64,
    pub nu: f64,
    pub approx_set_size: usize,
    pub coverage: f64,
    pub coverage_se: f64,
    pub approx_coverage: f64,
    pub approx_coverage_se: f64,
    pub median_hausdorff_projection: Option<f64>,
    pub median_hausdorff_approx: Option<f64>,
    pub median_width: Option<f64>,
    pub median_size: Option<f64>,
    pub empty_sets: usize,
}

impl From<&CoverageReport> for Summary {
    fn from(r: &CoverageReport) -> Self {
        Summary {
            name: r.name.clone(),
            replicates: r.replicates,
            seed: r.seed,
            projection_theta: r.projection_theta.clone(),
            projection_value: r.projection_value,
            nu: r.nu,
            approx_set_size: r.approx_set.len(),
            coverage: r.coverage,
            coverage_se: r.coverage_se,
            approx_coverage: r.approx_coverage,
            approx_coverage_se: r.approx_coverage_se,
            median_hausdorff_projection: r.median_hausdorff_projection,
            median_hausdorff_approx: r.median_hausdorff_approx,
            median_width: r.median_width,
            median_size: r.median_size,
            empty_sets: r.empty_sets,
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    replicate: usize,
    seed: u64,
    covered: bool,
    approx_covered: bool,
    pilot_theta: String,
    statistic: f64,
    threshold: f64,
    set_size: Option<usize>,
    empty: Option<bool>,
    hausdorff_projection: Option<f64>,
    hausdorff_approx: Option<f64>,
    sup_divergence: Option<f64>,
    l2_width: Option<f64>,
}

fn join(theta: &[f64]) -> String {
    theta.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
}

/// One CSV row per replicate of every report, in report order.
pub fn write_report_csv<W: Write>(reports: &[CoverageReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        for row in &r.rows {
            let m = row.metrics;
            w.serialize(CsvRow {
                experiment: &r.name,
                replicate: row.replicate,
                seed: row.seed,
                covered: row.covered,
                approx_covered: row.approx_covered,
                pilot_theta: join(&row.pilot_theta),
                statistic: row.statistic,
                threshold: row.threshold,
                set_size: m.map(|m| m.size),
                empty: m.map(|m| m.empty),
                hausdorff_projection: m.map(|m| m.hausdorff_projection),
                hausdorff_approx: m.map(|m| m.hausdorff_approx),
                sup_divergence: m.map(|m| m.sup_divergence),
                l2_width: m.map(|m| m.l2_width),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json<W: Write>(reports: &[CoverageReport], out: W) -> serde_json::Result<()> {
    let summaries: Vec<Summary> = reports.iter().map(Summary::from).collect();
    serde_json::to_writer_pretty(out, &summaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simharness::presets;

    #[test]
    fn csv_is_byte_identical_across_runs() {
        let cfgs = presets::example2_configs(100, 0.05, 0.1, 25, 9).unwrap();
        let render = || {
            let reports: Vec<CoverageReport> = cfgs.iter().map(|c| crate::simharness::run_experiment(c).unwrap()).collect();
            let mut buf = Vec::new();
            write_report_csv(&reports, &mut buf).unwrap();
            let mut js = Vec::new();
            write_summary_json(&reports, &mut js).unwrap();
            (buf, js)
        };
        let (a, ja) = render();
        let (b, jb) = render();
        assert_eq!(a, b);
        assert_eq!(ja, jb);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("experiment,replicate,seed,covered"));
        assert_eq!(text.lines().count(), 1 + 50);
    }
}
