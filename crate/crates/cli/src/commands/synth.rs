use idgp_core::generation::{circle_centers, gaussian_blobs};

use super::save;
use crate::error::CliError;
use crate::manifest::{sibling_manifest, RunManifest};
use crate::SynthArgs;

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    if a.classes < 2 || a.n == 0 || !(a.radius.is_finite() && a.std > 0.0 && a.std.is_finite()) {
        return Err(CliError::Usage("synth needs n ≥ 1, classes ≥ 2, finite radius and std > 0".into()));
    }
    let manifest = RunManifest::start("synth", Some(a.seed))
        .with_setting("n", a.n)
        .with_setting("classes", a.classes)
        .with_setting("radius", a.radius)
        .with_setting("std", a.std);
    let ds = gaussian_blobs(a.n, &circle_centers(a.classes, a.radius), a.std, a.seed)?;
    save(&ds, &a.out)?;
    manifest.finish(std::slice::from_ref(&a.out), &sibling_manifest(&a.out))?;
    println!("wrote {} instances, {} classes to {}", ds.n(), ds.c(), a.out.display());
    Ok(())
}
