use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use idgp_core::evaluation::{accuracy, split};
use idgp_core::{fit, EpochRecord, SeedReport, SplitSpec};

use super::{load, load_config};
use crate::error::CliError;
use crate::manifest::{sibling_manifest, RunManifest};
use crate::{CurveMetric, ReportKind};

pub fn report(kind: ReportKind) -> Result<(), CliError> {
    match kind {
        ReportKind::Curves { history, metric, out } => curves(&history, metric, &out),
        ReportKind::Sweep { data, config, val, seed, a, gamma, out } => {
            sweep(&data, config.as_deref(), val.as_deref(), seed, &a, &gamma, &out)
        }
        ReportKind::Merge { metrics, out } => merge(&metrics, &out),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_history(path: &Path) -> Result<Vec<EpochRecord>, CliError> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| serde_json::from_str(l).map_err(|e| CliError::Io(format!("{} line {}: {e}", path.display(), k + 1))))
        .collect()
}

fn metric_value(r: &EpochRecord, metric: CurveMetric) -> Option<f64> {
    match metric {
        CurveMetric::Loss => Some(r.train_loss),
        CurveMetric::ValAcc => r.val_acc,
        CurveMetric::BoundGap => Some(r.bound_gap),
    }
}

fn curves(histories: &[PathBuf], metric: CurveMetric, out: &Path) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("report-curves", None).with_setting("metric", format!("{metric:?}"));
    let single = histories.len() == 1;
    let mut text = String::from(if single { "x,y\n" } else { "x,y,series\n" });
    for path in histories {
        manifest.input(path)?;
        let series = path.display().to_string().replace(',', "_");
        for r in read_history(path)? {
            let Some(y) = metric_value(&r, metric) else { continue };
            if single {
                let _ = writeln!(text, "{},{y}", r.epoch);
            } else {
                let _ = writeln!(text, "{},{y},{series}", r.epoch);
            }
        }
    }
    write(out, &text)?;
    manifest.finish(&[out.to_path_buf()], &sibling_manifest(out))
}

fn sweep(
    data: &Path,
    config: Option<&Path>,
    val: Option<&Path>,
    seed: u64,
    a_grid: &[f64],
    gamma_grid: &[f64],
    out: &Path,
) -> Result<(), CliError> {
    let mut base = load_config(config)?;
    base.seed = seed;
    let mut manifest = RunManifest::start("report-sweep", Some(seed));
    manifest.input(data)?;
    let ds = load(data)?;
    let (train, val) = match val {
        Some(p) => {
            manifest.input(p)?;
            (ds, load(p)?)
        }
        None => {
            let (tr, va, _) = split(&ds, &SplitSpec { train: 0.9, val: 0.1, test: 0.0 }, seed)?;
            (tr, va)
        }
    };
    manifest.config = super::config_map(&base);
    let fmt_list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    manifest = manifest.with_setting("sweep.a", fmt_list(a_grid)).with_setting("sweep.gamma", fmt_list(gamma_grid));

    let mut text = String::from("x,y,series\n");
    for &a in a_grid {
        for &gamma in gamma_grid {
            let mut cfg = base.clone();
            cfg.transform.a = a;
            cfg.transform.gamma = gamma;
            cfg.validate()?;
            let fitted = fit(&cfg, &train, None)?;
            let acc = accuracy(&fitted.model, &val)?;
            let _ = writeln!(text, "{a},{acc},{gamma}");
        }
    }
    write(out, &text)?;
    manifest.finish(&[out.to_path_buf()], &sibling_manifest(out))
}

/// Rows of an `eval` metrics CSV, grouped by `(method, dataset)` in first-seen order.
fn parse_metrics(path: &Path, groups: &mut Vec<((String, String), Vec<f64>)>) -> Result<(), CliError> {
    for (k, line) in read(path)?.lines().enumerate() {
        if line.trim().is_empty() || line.trim() == SeedReport::CSV_HEADER {
            continue;
        }
        let bad = |m: &str| CliError::Io(format!("{} line {}: {m}", path.display(), k + 1));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        if cols[2].trim() != "1" {
            return Err(bad("only single-run rows (seed_count 1) can be merged"));
        }
        let acc: f64 = cols[3].trim().parse().map_err(|_| bad("unparseable accuracy"))?;
        let key = (cols[0].to_string(), cols[1].to_string());
        match groups.iter_mut().find(|(g, _)| *g == key) {
            Some((_, v)) => v.push(acc),
            None => groups.push((key, vec![acc])),
        }
    }
    Ok(())
}

fn merge(metrics: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("report-merge", None);
    let mut groups = Vec::new();
    for path in metrics {
        manifest.input(path)?;
        parse_metrics(path, &mut groups)?;
    }
    let mut text = format!("{}\n", SeedReport::CSV_HEADER);
    let mut counts = BTreeMap::new();
    for ((method, dataset), accuracies) in groups {
        counts.insert(format!("rows.{method}.{dataset}"), accuracies.len());
        let report = SeedReport { method, dataset, seeds: Vec::new(), accuracies };
        text.push_str(&report.csv_row());
        text.push('\n');
    }
    for (k, v) in counts {
        manifest = manifest.with_setting(&k, v);
    }
    write(out, &text)?;
    manifest.finish(&[out.to_path_buf()], &sibling_manifest(out))
}
