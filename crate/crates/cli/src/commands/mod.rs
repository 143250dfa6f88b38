mod corrupt;
mod eval;
mod gradcheck;
mod report;
mod synth;
mod train;

use std::path::Path;

use idgp_core::data::{load_dataset, write_dataset};
use idgp_core::{DataFormat, PllDataset, TrainConfig};

use crate::error::CliError;

pub use corrupt::corrupt;
pub use eval::eval;
pub use gradcheck::gradcheck;
pub use report::report;
pub use synth::synth;
pub use train::train;

pub(crate) const THREADS_ENV: &str = "IDGP_THREADS";

pub(crate) fn load(path: &Path) -> Result<PllDataset, CliError> {
    load_dataset(path, DataFormat::from_path(path)).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub(crate) fn save(ds: &PllDataset, path: &Path) -> Result<(), CliError> {
    write_dataset(ds, path, DataFormat::from_path(path)).map_err(|e| CliError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Defaults, then the config file, then `IDGP_THREADS`.
pub(crate) fn load_config(path: Option<&Path>) -> Result<TrainConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            TrainConfig::from_kv_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        cfg.threads = v
            .trim()
            .parse()
            .ok()
            .filter(|&t: &usize| t > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    }
    Ok(cfg)
}

/// `none` or a comma-separated list of widths.
pub(crate) fn parse_hidden(s: &str) -> Result<Vec<usize>, CliError> {
    if s.trim() == "none" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|w| w.trim().parse::<usize>().ok().filter(|&w| w > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Usage(format!("invalid hidden widths '{s}'")))
}

pub(crate) fn config_map(cfg: &TrainConfig) -> std::collections::BTreeMap<String, String> {
    cfg.to_kv_string()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
