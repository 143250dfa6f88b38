use std::path::PathBuf;

use idgp_core::evaluation::split;
use idgp_core::trainer::history_to_json_lines;
use idgp_core::{fit, DataFormat, SplitSpec, TrainError};

use super::{config_map, create_dir, load, load_config, save};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::TrainArgs;

const HOLDOUT: SplitSpec = SplitSpec { train: 0.9, val: 0.1, test: 0.0 };

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.ml_only |= a.ml_only;
    cfg.validate()?;

    let mut manifest = RunManifest::start("train", Some(cfg.seed));
    manifest.input(&a.data)?;
    if let Some(p) = &a.config {
        manifest.input(p)?;
    }
    let data = load(&a.data)?;
    create_dir(&a.out_dir)?;
    let mut outputs: Vec<PathBuf> = Vec::new();

    let (train_set, val_set) = match &a.val {
        Some(p) => {
            manifest.input(p)?;
            (data, Some(load(p)?))
        }
        None if data.true_labels().is_some() => {
            let (tr, va, _) = split(&data, &HOLDOUT, cfg.seed)?;
            let ext = if DataFormat::from_path(&a.data) == DataFormat::JsonLines { "jsonl" } else { "txt" };
            let val_path = a.out_dir.join(format!("val.{ext}"));
            save(&va, &val_path)?;
            outputs.push(val_path);
            (tr, Some(va))
        }
        None => (data, None),
    };

    let out = fit(&cfg, &train_set, val_set.as_ref()).map_err(|e| {
        if let TrainError::NonFiniteLoss { epoch, batch, instance } = e {
            eprintln!("diagnostics: epoch={epoch} batch={batch} instance={instance} lr={} aux_lr={}", cfg.lr, cfg.aux_lr);
        }
        CliError::from(e)
    })?;

    let model_path = a.out_dir.join("model.idgp");
    out.model.save(&model_path).map_err(|e| CliError::io(&model_path, e))?;
    let history_path = a.out_dir.join("history.jsonl");
    std::fs::write(&history_path, history_to_json_lines(&out.history)).map_err(|e| CliError::io(&history_path, e))?;
    let config_path = a.out_dir.join("config.txt");
    std::fs::write(&config_path, cfg.to_kv_string()).map_err(|e| CliError::io(&config_path, e))?;
    outputs.extend([model_path, history_path, config_path]);

    manifest.config = config_map(&cfg);
    manifest.ml_only = Some(cfg.ml_only);
    manifest.finish(&outputs, &a.out_dir.join("manifest.json"))?;

    match out.history.last() {
        Some(r) => match r.val_acc {
            Some(acc) => println!("epoch {} loss {:.6} val_acc {:.4}", r.epoch, r.train_loss, acc),
            None => println!("epoch {} loss {:.6}", r.epoch, r.train_loss),
        },
        None => println!("no epochs run"),
    }
    Ok(())
}
