//! Splits, accuracy, and aggregation across seeds.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{DataError, PllDataset};
use crate::rng;
use crate::trainer::{predict, TrainError, TrainedModel};

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-12 {
            return Err(DataError::DimensionMismatch(format!(
                "split fractions must be in [0, 1] and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Rounded train and validation sizes; the test split takes the rest.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = ((n as f64) * self.train).round() as usize;
        let val = (((n as f64) * self.val).round() as usize).min(n - train.min(n));
        let train = train.min(n);
        (train, val, n - train - val)
    }
}

/// Shuffle with the `split` stream of `seed` and cut into three parts.
pub fn split(ds: &PllDataset, spec: &SplitSpec, seed: u64) -> Result<(PllDataset, PllDataset, PllDataset), DataError> {
    spec.validate()?;
    let mut idx: Vec<usize> = (0..ds.n()).collect();
    idx.shuffle(&mut rng::stream(seed, rng::SPLIT, 0));
    let (a, b, t) = spec.sizes(ds.n());
    for (frac, size) in [(spec.train, a), (spec.val, b), (spec.test, t)] {
        if frac > 0.0 && size == 0 {
            return Err(DataError::DimensionMismatch(format!("{} instances leave an empty split part", ds.n())));
        }
    }
    Ok((ds.subset(&idx[..a]), ds.subset(&idx[a..a + b]), ds.subset(&idx[a + b..])))
}

/// Fraction of instances whose predicted label equals the true label.
pub fn accuracy(model: &TrainedModel, ds: &PllDataset) -> Result<f64, TrainError> {
    let truth = ds.require_true_labels()?;
    if ds.n() == 0 {
        return Err(TrainError::Config("accuracy of an empty dataset".into()));
    }
    if ds.q() != model.main.input_dim() {
        return Err(TrainError::Dimension { expected: model.main.input_dim(), found: ds.q() });
    }
    let mut hits = 0usize;
    for (i, &y) in truth.iter().enumerate() {
        if predict(&model.main, ds.row(i), &model.transform)?.0 == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.n() as f64)
}

/// Mean and sample standard deviation (`n − 1` denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Test accuracies of one method on one dataset across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub method: String,
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
}

impl SeedReport {
    pub const CSV_HEADER: &'static str = "method,dataset,seed_count,mean_acc,std_acc";

    pub fn mean_std(&self) -> (f64, f64) {
        mean_std(&self.accuracies)
    }

    pub fn csv_row(&self) -> String {
        let (m, s) = self.mean_std();
        format!("{},{},{},{m:.6},{s:.6}", self.method, self.dataset, self.accuracies.len())
    }
}

/// Run `eval` once per seed and collect the accuracies. Needs two or more
/// seeds so that a standard deviation exists.
pub fn multi_seed_report<F>(method: &str, dataset: &str, seeds: &[u64], mut eval: F) -> Result<SeedReport, TrainError>
where
    F: FnMut(u64) -> Result<f64, TrainError>,
{
    if seeds.len() < 2 {
        return Err(TrainError::Config(format!("need at least 2 seeds, got {}", seeds.len())));
    }
    let accuracies = seeds.iter().map(|&s| eval(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(SeedReport { method: method.into(), dataset: dataset.into(), seeds: seeds.to_vec(), accuracies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{circle_centers, gaussian_blobs};

    #[test]
    fn split_sizes_for_ten() {
        assert_eq!(SplitSpec::default().sizes(10), (8, 1, 1));
        assert_eq!(SplitSpec::default().sizes(0), (0, 0, 0));
        assert_eq!(SplitSpec { train: 0.5, val: 0.5, test: 0.0 }.sizes(3), (2, 1, 0));
    }

    #[test]
    fn split_is_a_partition() {
        let ds = gaussian_blobs(37, &circle_centers(3, 2.0), 0.3, 1).unwrap();
        let (a, b, c) = split(&ds, &SplitSpec::default(), 9).unwrap();
        assert_eq!(a.n() + b.n() + c.n(), 37);
        let mut rows: Vec<Vec<u64>> = [&a, &b, &c]
            .iter()
            .flat_map(|d| (0..d.n()).map(|i| d.row(i).iter().map(|v| v.to_bits()).collect()).collect::<Vec<_>>())
            .collect();
        rows.sort();
        let mut orig: Vec<Vec<u64>> = (0..37).map(|i| ds.row(i).iter().map(|v| v.to_bits()).collect()).collect();
        orig.sort();
        assert_eq!(rows, orig);
        assert!(split(&ds, &SplitSpec { train: 0.9, val: 0.2, test: 0.0 }, 0).is_err());
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (m, s) = mean_std(&[0.90, 0.92, 0.94]);
        assert!((m - 0.92).abs() < 1e-12);
        assert!((s - 0.02).abs() < 1e-12);
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }

    #[test]
    fn multi_seed_needs_two_seeds() {
        assert!(multi_seed_report("m", "d", &[1], |_| Ok(0.5)).is_err());
        let r = multi_seed_report("m", "d", &[1, 2], |s| Ok(if s == 1 { 0.8 } else { 0.9 })).unwrap();
        let (m, s) = r.mean_std();
        assert!((m - 0.85).abs() < 1e-12);
        assert!((s - 0.05f64.hypot(0.05)).abs() < 1e-12);
        let same = multi_seed_report("m", "d", &[3, 4, 5], |_| Ok(0.7)).unwrap();
        assert_eq!(same.mean_std().1, 0.0);
    }

    #[test]
    fn empty_part_is_an_error() {
        let ds = gaussian_blobs(5, &circle_centers(2, 2.0), 0.3, 1).unwrap();
        assert!(split(&ds, &SplitSpec::default(), 0).is_err());
    }

    #[test]
    fn csv_row_format() {
        let r = SeedReport {
            method: "idgp".into(),
            dataset: "blobs".into(),
            seeds: vec![1, 2, 3],
            accuracies: vec![0.90, 0.92, 0.94],
        };
        assert_eq!(r.csv_row(), "idgp,blobs,3,0.920000,0.020000");
    }
}
