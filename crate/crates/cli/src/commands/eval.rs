use std::io::Write;

use idgp_core::evaluation::accuracy;
use idgp_core::trainer::TrainedModel;
use idgp_core::SeedReport;

use super::load;
use crate::error::CliError;
use crate::manifest::{sibling_manifest, RunManifest};
use crate::EvalArgs;

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let dataset = match a.dataset {
        Some(d) => d,
        None => a.data.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned()),
    };
    if a.method.contains(',') || dataset.contains(',') {
        return Err(CliError::Usage("method and dataset names may not contain commas".into()));
    }
    let mut manifest = RunManifest::start("eval", None).with_setting("method", &a.method).with_setting("dataset", &dataset);
    manifest.input(&a.model)?;
    manifest.input(&a.data)?;
    let model = TrainedModel::load(&a.model)?;
    let ds = load(&a.data)?;
    if ds.c() != model.main.output_dim() {
        return Err(CliError::Data(format!("model predicts {} classes, dataset has {}", model.main.output_dim(), ds.c())));
    }
    let acc = accuracy(&model, &ds)?;

    let row = SeedReport { method: a.method, dataset, seeds: Vec::new(), accuracies: vec![acc] }.csv_row();
    let fresh = std::fs::metadata(&a.out).map_or(true, |m| m.len() == 0);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&a.out)
        .map_err(|e| CliError::io(&a.out, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(SeedReport::CSV_HEADER);
        text.push('\n');
    }
    text.push_str(&row);
    text.push('\n');
    file.write_all(text.as_bytes()).map_err(|e| CliError::io(&a.out, e))?;
    drop(file);

    manifest.finish(std::slice::from_ref(&a.out), &sibling_manifest(&a.out))?;
    println!("accuracy {acc:.6}");
    Ok(())
}
