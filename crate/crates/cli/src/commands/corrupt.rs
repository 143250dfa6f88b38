use idgp_core::data::{sidecar_path, write_sidecar};
use idgp_core::generation::{corrupt_instance_dependent, corrupt_uniform, train_clean_scorer, CleanScorerConfig};

use super::{load, parse_hidden, save};
use crate::error::CliError;
use crate::manifest::{sibling_manifest, RunManifest};
use crate::{CorruptArgs, Mode};

pub fn corrupt(a: CorruptArgs) -> Result<(), CliError> {
    match (a.mode, a.p) {
        (Mode::Uniform, None) => return Err(CliError::Usage("--p is required with --mode uniform".into())),
        (Mode::Instance, Some(_)) => return Err(CliError::Usage("--p only applies to --mode uniform".into())),
        _ => {}
    }
    let mut manifest = RunManifest::start("corrupt", Some(a.seed));
    manifest.input(&a.input)?;
    let clean = load(&a.input)?;

    let (ds, report) = match a.mode {
        Mode::Uniform => {
            let p = a.p.expect("checked above");
            manifest = manifest.with_setting("mode", "uniform").with_setting("p", p);
            corrupt_uniform(&clean, p, a.seed)?
        }
        Mode::Instance => {
            let scorer = CleanScorerConfig {
                hidden: parse_hidden(&a.scorer_hidden)?,
                epochs: a.scorer_epochs,
                lr: a.scorer_lr,
                seed: a.seed,
                ..CleanScorerConfig::default()
            };
            manifest = manifest
                .with_setting("mode", "instance")
                .with_setting("scorer_epochs", scorer.epochs)
                .with_setting("scorer_lr", scorer.lr)
                .with_setting("scorer_hidden", &a.scorer_hidden);
            let (_, scores) = train_clean_scorer(&clean, &scorer)?;
            corrupt_instance_dependent(&clean, &scores, a.seed)?
        }
    };

    save(&ds, &a.out)?;
    write_sidecar(&a.out, &report.sidecar_entries()).map_err(|e| CliError::io(&sidecar_path(&a.out), e))?;
    manifest.finish(&[a.out.clone(), sidecar_path(&a.out)], &sibling_manifest(&a.out))?;
    println!("mean candidate set size {:.4} over {} instances", report.avg_set_size, ds.n());
    Ok(())
}
