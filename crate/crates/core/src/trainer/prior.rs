//! Per-instance prior constants `λ̂, α̂, β̂` and their epoch snapshots.

use crate::distributions::floor_param;

/// Refined priors for every training instance.
///
/// Off the candidate set `λ̂ = 1 + ε` at all times. On the set, and for
/// `α̂, β̂` everywhere, the live value is used until the snapshot epoch has
/// completed; afterwards the live value is mixed with the snapshot.
#[derive(Debug, Clone)]
pub struct PriorCache {
    n: usize,
    c: usize,
    in_set: Vec<bool>,
    pub lambda_hat: Vec<f64>,
    pub alpha_hat: Vec<f64>,
    pub beta_hat: Vec<f64>,
    lambda_snapshot: Option<Vec<f64>>,
    alpha_snapshot: Option<Vec<f64>>,
    beta_snapshot: Option<Vec<f64>>,
    last_lambda: Vec<f64>,
    last_alpha: Vec<f64>,
    last_beta: Vec<f64>,
    pub epsilon: f64,
    pub m: f64,
    pub d: f64,
    pub r: usize,
    pub q: usize,
}

impl PriorCache {
    pub fn new(candidates: &[Vec<usize>], c: usize, epsilon: f64, m: f64, d: f64, r: usize, q: usize) -> Self {
        let n = candidates.len();
        let mut in_set = vec![false; n * c];
        for (i, set) in candidates.iter().enumerate() {
            for &j in set {
                in_set[i * c + j] = true;
            }
        }
        Self {
            n,
            c,
            in_set,
            lambda_hat: vec![1.0 + epsilon; n * c],
            alpha_hat: vec![1.0; n * c],
            beta_hat: vec![1.0; n * c],
            lambda_snapshot: None,
            alpha_snapshot: None,
            beta_snapshot: None,
            last_lambda: vec![1.0; n * c],
            last_alpha: vec![1.0; n * c],
            last_beta: vec![1.0; n * c],
            epsilon,
            m,
            d,
            r,
            q,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn span(&self, i: usize) -> std::ops::Range<usize> {
        i * self.c..(i + 1) * self.c
    }

    pub fn lambda_snapshot(&self) -> Option<&[f64]> {
        self.lambda_snapshot.as_deref()
    }

    pub fn alpha_snapshot(&self) -> Option<&[f64]> {
        self.alpha_snapshot.as_deref()
    }

    pub fn beta_snapshot(&self) -> Option<&[f64]> {
        self.beta_snapshot.as_deref()
    }

    /// Update and return `λ̂_i` from the live `λ_i` at epoch `t` (1-based).
    pub fn refine_lambda_hat(&mut self, i: usize, live: &[f64], t: usize) -> &[f64] {
        let span = self.span(i);
        self.last_lambda[span.clone()].copy_from_slice(live);
        let mix = if t >= self.r { self.lambda_snapshot.as_ref() } else { None };
        for (j, k) in span.clone().enumerate() {
            self.lambda_hat[k] = if !self.in_set[k] {
                1.0 + self.epsilon
            } else if let Some(snap) = mix {
                floor_param(self.m * snap[k] + (1.0 - self.m) * live[j])
            } else {
                live[j]
            };
        }
        &self.lambda_hat[span]
    }

    /// Update and return `(α̂_i, β̂_i)` from the live values at epoch `t`.
    pub fn refine_alpha_beta_hat(&mut self, i: usize, alpha: &[f64], beta: &[f64], t: usize) -> (&[f64], &[f64]) {
        let span = self.span(i);
        self.last_alpha[span.clone()].copy_from_slice(alpha);
        self.last_beta[span.clone()].copy_from_slice(beta);
        let mix = if t >= self.q { self.alpha_snapshot.as_ref().zip(self.beta_snapshot.as_ref()) } else { None };
        for (j, k) in span.clone().enumerate() {
            match mix {
                Some((sa, sb)) => {
                    self.alpha_hat[k] = floor_param(self.d * sa[k] + (1.0 - self.d) * alpha[j]);
                    self.beta_hat[k] = floor_param(self.d * sb[k] + (1.0 - self.d) * beta[j]);
                }
                None => {
                    self.alpha_hat[k] = alpha[j];
                    self.beta_hat[k] = beta[j];
                }
            }
        }
        (&self.alpha_hat[span.clone()], &self.beta_hat[span])
    }

    pub fn lambda_hat_of(&self, i: usize) -> &[f64] {
        &self.lambda_hat[self.span(i)]
    }

    pub fn alpha_hat_of(&self, i: usize) -> &[f64] {
        &self.alpha_hat[self.span(i)]
    }

    pub fn beta_hat_of(&self, i: usize) -> &[f64] {
        &self.beta_hat[self.span(i)]
    }

    /// Take the snapshots whose epoch just finished. Each is taken once.
    pub fn end_epoch(&mut self, t: usize) {
        if t == self.r && self.lambda_snapshot.is_none() {
            self.lambda_snapshot = Some(self.last_lambda.clone());
        }
        if t == self.q && self.alpha_snapshot.is_none() {
            self.alpha_snapshot = Some(self.last_alpha.clone());
            self.beta_snapshot = Some(self.last_beta.clone());
        }
    }

    /// Check `λ̂_i` against its defining formula, bit for bit.
    pub fn lambda_contract_holds(&self, i: usize, live: &[f64], t: usize) -> bool {
        let snap = if t >= self.r { self.lambda_snapshot.as_ref() } else { None };
        self.span(i).enumerate().all(|(j, k)| {
            let expected = if !self.in_set[k] {
                1.0 + self.epsilon
            } else if let Some(s) = snap {
                floor_param(self.m * s[k] + (1.0 - self.m) * live[j])
            } else {
                live[j]
            };
            self.lambda_hat[k].to_bits() == expected.to_bits()
        })
    }

    /// Check `α̂_i, β̂_i` against their defining formula, bit for bit.
    pub fn alpha_beta_contract_holds(&self, i: usize, alpha: &[f64], beta: &[f64], t: usize) -> bool {
        let snap = if t >= self.q { self.alpha_snapshot.as_ref().zip(self.beta_snapshot.as_ref()) } else { None };
        self.span(i).enumerate().all(|(j, k)| {
            let (ea, eb) = match snap {
                Some((sa, sb)) => (
                    floor_param(self.d * sa[k] + (1.0 - self.d) * alpha[j]),
                    floor_param(self.d * sb[k] + (1.0 - self.d) * beta[j]),
                ),
                None => (alpha[j], beta[j]),
            };
            self.alpha_hat[k].to_bits() == ea.to_bits() && self.beta_hat[k].to_bits() == eb.to_bits()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cache() -> PriorCache {
        PriorCache::new(&[vec![0, 1], vec![2]], 3, 0.001, 0.5, 0.9, 2, 2)
    }

    #[test]
    fn lambda_mixing_example() {
        let mut c = cache();
        c.refine_lambda_hat(0, &[2.0, 7.0, 9.0], 2);
        c.end_epoch(2);
        let hat = c.refine_lambda_hat(0, &[4.0, 7.0, 9.0], 3).to_vec();
        assert_eq!(hat[0], 3.0);
        assert_eq!(hat[1], 7.0);
        assert_eq!(hat[2], 1.001);
    }

    #[test]
    fn before_r_uses_live_values() {
        let mut c = cache();
        let hat = c.refine_lambda_hat(1, &[5.0, 6.0, 0.3], 1).to_vec();
        assert_eq!(hat, vec![1.001, 1.001, 0.3]);
        assert!(c.lambda_contract_holds(1, &[5.0, 6.0, 0.3], 1));
    }

    #[test]
    fn alpha_beta_mixing_example() {
        let mut c = cache();
        c.refine_alpha_beta_hat(0, &[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0], 2);
        let (a, b) = c.refine_alpha_beta_hat(0, &[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0], 1);
        assert_eq!((a[0], b[0]), (1.0, 2.0));
        c.end_epoch(2);
        let (a, b) = c.refine_alpha_beta_hat(0, &[11.0, 11.0, 11.0], &[2.0, 2.0, 2.0], 3);
        assert!((a[0] - 2.0).abs() < 1e-12);
        assert!((b[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn snapshots_are_taken_once() {
        let mut c = cache();
        c.refine_lambda_hat(0, &[2.0, 2.0, 2.0], 2);
        c.end_epoch(2);
        let snap = c.lambda_snapshot().unwrap().to_vec();
        c.refine_lambda_hat(0, &[8.0, 8.0, 8.0], 3);
        c.end_epoch(3);
        c.end_epoch(2);
        assert_eq!(c.lambda_snapshot().unwrap(), &snap[..]);
    }
}
