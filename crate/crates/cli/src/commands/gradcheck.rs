use idgp_core::gradcheck::{self, Component, GradcheckOptions};

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::GradcheckArgs;

pub fn gradcheck(a: GradcheckArgs) -> Result<(), CliError> {
    let sign_flip = match a.inject_fault.as_deref() {
        Some(name) => Some(Component::from_name(name).ok_or_else(|| {
            let known: Vec<&str> = Component::ALL.iter().map(|c| c.name()).collect();
            CliError::Usage(format!("unknown component '{name}', expected one of {}", known.join(", ")))
        })?),
        None => None,
    };
    let manifest = RunManifest::start("gradcheck", Some(a.seed)).with_setting("trials", a.trials);
    let report = gradcheck::run(&GradcheckOptions { seed: a.seed, trials: a.trials as usize, sign_flip });
    print!("{report}");
    if let Some(path) = &a.manifest {
        let manifest = report
            .results
            .iter()
            .fold(manifest, |m, r| m.with_setting(&format!("max_rel_error.{}", r.component.name()), r.max_rel_error));
        manifest.finish(&[], path)?;
    }
    let failed: Vec<&str> = report.results.iter().filter(|r| !r.passed()).map(|r| r.component.name()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Gradcheck(format!("gradient check failed for {}", failed.join(", "))))
    }
}
