use crate::config::Config;
use divset::confset::{split, ConfidenceSet, Crossfit, GridRow, RaySearch, RelativeFit};
use divset::distributions::ParameterSpace;
use divset::divergences::{approx_projection_set, project};
use divset::simharness::presets::{self, Pipeline, KAPPA_SWEEP};
use divset::simharness::{run_experiment, write_report_csv, write_summary_json, CoverageReport, ExperimentConfig, Summary};
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn config_err(e: impl ToString) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl ToString) -> CliError {
    CliError::Runtime(e.to_string())
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(runtime_err)?;
    writeln!(out).map_err(runtime_err)
}

pub fn project_cmd(cfg: &Config) -> Result<()> {
    let family = cfg.family().map_err(config_err)?;
    let truth = cfg.truth().map_err(config_err)?;
    let spec = cfg.statistic().map_err(config_err)?;
    let nu = cfg.project.nu.unwrap_or(spec.divergence.default_nu());
    if !(nu >= 1.0) {
        return Err(config_err(format!("project.nu must be at least 1, got {nu}")));
    }
    let grid = cfg.grid();
    let proj = project(&spec.divergence, &truth, &family, &grid).map_err(runtime_err)?;
    let approx = approx_projection_set(&spec.divergence, &truth, &family, nu, &grid).map_err(runtime_err)?;
    print_json(&json!({
        "divergence": spec.divergence.name(),
        "theta": proj.theta,
        "value": proj.value,
        "nu": nu,
        "approx_set": approx.points,
        "approx_values": approx.values,
    }))
}

/// Reads one observation per line; blank lines and `#` comments are skipped.
pub fn read_data(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let x: f64 = line
            .parse()
            .map_err(|_| CliError::Data(format!("{}:{}: not a number: {line:?}", path.display(), i + 1)))?;
        if !x.is_finite() {
            return Err(CliError::Data(format!("{}:{}: non-finite observation", path.display(), i + 1)));
        }
        data.push(x);
    }
    if data.is_empty() {
        return Err(CliError::Data(format!("{}: no observations", path.display())));
    }
    Ok(data)
}

fn check_support(cfg: &Config, data: &[f64]) -> Result<()> {
    let family = cfg.family().map_err(config_err)?;
    let probe = match &family.space {
        ParameterSpace::Box { lower, upper } => vec![lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect::<Vec<_>>()],
        ParameterSpace::Finite { points } => points.clone(),
    };
    let laws: Vec<_> = probe.iter().filter_map(|t| family.distribution(t).ok()).collect();
    for &x in data {
        if laws.iter().all(|d| d.log_density(x) == f64::NEG_INFINITY) {
            return Err(CliError::Data(format!("observation {x} is outside the model's support")));
        }
    }
    Ok(())
}

fn write_grid(path: &Path, rows: &[GridRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(runtime_err)?;
    let dim = rows.first().map_or(0, |r| r.theta.len());
    let mut header: Vec<String> = (0..dim).map(|d| format!("theta_{d}")).collect();
    header.extend(["statistic", "threshold", "accept"].map(String::from));
    w.write_record(&header).map_err(runtime_err)?;
    for r in rows {
        let mut rec: Vec<String> = r.theta.iter().map(|t| t.to_string()).collect();
        rec.extend([r.statistic.to_string(), r.threshold.to_string(), r.accept.to_string()]);
        w.write_record(&rec).map_err(runtime_err)?;
    }
    w.flush().map_err(runtime_err)
}

pub fn confset_cmd(cfg: &Config, data_path: Option<&Path>, emit_grid: Option<&Path>) -> Result<()> {
    let family = cfg.family().map_err(config_err)?;
    let stat = cfg.statistic().map_err(config_err)?;
    let rule = cfg.rule().map_err(config_err)?;
    let pilot = cfg.pilot().map_err(config_err)?;
    let method = cfg.confset.method.as_str();
    if !matches!(method, "grid" | "rays" | "crossfit") {
        return Err(config_err(format!("unknown confset.method {method:?}")));
    }
    let path: PathBuf = data_path
        .map(Path::to_path_buf)
        .or(cfg.confset.data.clone())
        .ok_or_else(|| config_err("no data file given (positional argument or confset.data)"))?;
    let data = read_data(&path)?;
    check_support(cfg, &data)?;
    if data.len() < 4 {
        return Err(CliError::Data(format!("need at least 4 observations, got {}", data.len())));
    }
    let sp = split(data.len(), cfg.confset.split_ratio, cfg.seed).map_err(config_err)?;
    let grid = family.grid(&cfg.grid()).map_err(config_err)?;

    let (set, rows): (ConfidenceSet, Vec<GridRow>) = if method == "crossfit" {
        let cf = Crossfit::new(&family, &data, &sp, &pilot, &stat, cfg.alpha).map_err(runtime_err)?;
        let set = cf.invert(&grid).map_err(runtime_err)?;
        let rows = set.rows.clone();
        (set, rows)
    } else {
        let fit = RelativeFit::new(&family, &data, &sp, &pilot, &stat, &rule).map_err(runtime_err)?;
        if method == "rays" {
            let search = RaySearch { n_rays: cfg.confset.n_rays, r_max: cfg.confset.r_max };
            let set = search.run(&fit).map_err(runtime_err)?;
            let rows = if emit_grid.is_some() { fit.invert(&grid).map_err(runtime_err)?.rows } else { Vec::new() };
            (set, rows)
        } else {
            let set = fit.invert(&grid).map_err(runtime_err)?;
            let rows = set.rows.clone();
            (set, rows)
        }
    };
    if let Some(p) = emit_grid {
        write_grid(p, &rows)?;
    }
    let size = if method == "rays" { None } else { Some(set.size()) };
    print_json(&json!({
        "method": method,
        "n": data.len(),
        "size": size,
        "set": set,
    }))
}

fn preset_configs(cfg: &Config, preset: &str) -> Result<Vec<ExperimentConfig>> {
    let s = &cfg.simulate;
    let (n, reps, seed) = (s.n, s.replicates, cfg.seed);
    let mut out = match preset {
        "example1" => presets::example1_configs(n, cfg.alpha, s.eps_scale, reps, seed),
        "example2" => presets::example2_configs(n, cfg.alpha, s.c, reps, seed),
        "overdispersion" => {
            let kappas = s.kappa.clone().unwrap_or(KAPPA_SWEEP.to_vec());
            let mut v = Vec::new();
            for kappa in kappas {
                for p in [Pipeline::Slrt, Pipeline::KlRedi, Pipeline::HellingerRedi, Pipeline::TvRedi] {
                    match presets::overdispersion_config(kappa, n, reps, seed, p) {
                        Ok(c) => v.push(c),
                        Err(e) => return Err(config_err(e)),
                    }
                }
            }
            Ok(v)
        }
        "contamination" => presets::contamination_suite(s.case, n, reps, seed),
        other => return Err(config_err(format!("unknown preset {other:?}"))),
    }
    .map_err(config_err)?;
    for c in &mut out {
        c.rule = c.rule.with_alpha(cfg.alpha);
        c.method = s.method;
        c.metrics = s.metrics;
        if c.rule.kind == divset::RuleKind::Slrt {
            c.method = divset::simharness::SetMethod::Split;
        }
    }
    Ok(out)
}

fn custom_config(cfg: &Config) -> Result<ExperimentConfig> {
    let s = &cfg.simulate;
    let c = ExperimentConfig {
        name: s.name.clone().unwrap_or_else(|| "experiment".into()),
        truth: cfg.truth().map_err(config_err)?,
        family: cfg.family().map_err(config_err)?,
        statistic: cfg.statistic().map_err(config_err)?,
        rule: cfg.rule().map_err(config_err)?,
        pilot: cfg.pilot().map_err(config_err)?,
        n: s.n,
        replicates: s.replicates,
        seed: cfg.seed,
        grid: cfg.grid(),
        split_ratio: s.split_ratio,
        nu: s.nu,
        method: s.method,
        metrics: s.metrics,
    };
    c.validate().map_err(config_err)?;
    Ok(c)
}

fn run_and_write(cfg: &Config, experiments: &[ExperimentConfig]) -> Result<()> {
    for e in experiments {
        e.validate().map_err(config_err)?;
    }
    let reports: Vec<CoverageReport> = experiments
        .iter()
        .map(|e| run_experiment(e).map_err(|err| runtime_err(format!("{}: {err}", e.name))))
        .collect::<Result<_>>()?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| runtime_err(format!("{}: {e}", dir.display())))?;
    let csv = fs::File::create(dir.join("report.csv")).map_err(runtime_err)?;
    write_report_csv(&reports, csv).map_err(runtime_err)?;
    let summary = fs::File::create(dir.join("summary.json")).map_err(runtime_err)?;
    write_summary_json(&reports, summary).map_err(runtime_err)?;
    let summaries: Vec<Summary> = reports.iter().map(Summary::from).collect();
    print_json(&serde_json::to_value(&summaries).map_err(runtime_err)?)
}

pub fn simulate_cmd(cfg: &Config) -> Result<()> {
    let experiments = match cfg.simulate.preset.as_deref() {
        Some(p) => preset_configs(cfg, p)?,
        None => vec![custom_config(cfg)?],
    };
    run_and_write(cfg, &experiments)
}

pub fn regress_cmd(cfg: &Config) -> Result<()> {
    let mut experiments = preset_configs(cfg, "example1")?;
    experiments.extend(preset_configs(cfg, "example2")?);
    run_and_write(cfg, &experiments)
}
