//! Fixtures shared by the benchmarks.

use idgp_core::generation::{circle_centers, corrupt_uniform, gaussian_blobs};
use idgp_core::network::{lambda_transform, lambda_transform_pair};
use idgp_core::{rng, Activation, DenseNet, PllDataset, PosteriorParams, TransformConfig};

/// Uniformly corrupted 2-D blobs with `c` classes.
pub fn blobs(n: usize, c: usize, seed: u64) -> PllDataset {
    let clean = gaussian_blobs(n, &circle_centers(c, 4.0), 1.0, seed).expect("valid blob parameters");
    corrupt_uniform(&clean, 0.3, seed).expect("valid probability").0
}

pub fn net(q: usize, hidden: &[usize], out: usize, seed: u64) -> DenseNet {
    DenseNet::new(&DenseNet::layout(q, hidden, out), Activation::Relu, 20.0, &mut rng::stream(seed, rng::INIT, 0))
}

/// Posterior parameters of instance `i` of `ds` under freshly initialised networks.
pub fn posterior(ds: &PllDataset, i: usize, hidden: &[usize], cfg: &TransformConfig) -> PosteriorParams {
    let main = net(ds.q(), hidden, ds.c(), 1);
    let aux = net(ds.q(), hidden, 2 * ds.c(), 2);
    let lambda = lambda_transform(&main.scores(ds.row(i)).unwrap(), cfg);
    let ab = lambda_transform_pair(&aux.scores(ds.row(i)).unwrap(), cfg);
    PosteriorParams::from_live(lambda.as_slice(), ab.alpha(), ab.beta(), ds.candidates(i))
}
