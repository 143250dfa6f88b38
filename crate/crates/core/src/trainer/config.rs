//! Training hyperparameters and their flat `key=value` file format.

use std::fmt::Write as _;

use crate::network::{Activation, TransformConfig};
use crate::objective::BoundConfig;

use super::TrainError;

/// Every knob of the alternating trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Main (Dirichlet) network.
    pub lr: f64,
    pub momentum: f64,
    /// Auxiliary (Beta) network.
    pub aux_lr: f64,
    pub aux_momentum: f64,
    /// L2 penalty added to both networks' gradients.
    pub weight_decay: f64,
    /// Hidden widths shared by both networks; empty means a linear model.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub transform: TransformConfig,
    /// Output clamp bound `A`.
    pub clamp: f64,
    /// Mixing weight of the epoch-`r` snapshot of `λ`.
    pub m: f64,
    /// Mixing weight of the epoch-`q` snapshot of `α, β`.
    pub d: f64,
    pub r: usize,
    pub q: usize,
    pub epsilon: f64,
    pub bound: BoundConfig,
    pub seed: u64,
    /// Drop the prior term of the objective (likelihood-only ablation).
    pub ml_only: bool,
    /// Worker threads for per-instance evaluation within a batch.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 256,
            lr: 1e-2,
            momentum: 0.9,
            aux_lr: 1e-2,
            aux_momentum: 0.9,
            weight_decay: 0.0,
            hidden: vec![64],
            activation: Activation::Relu,
            transform: TransformConfig::default(),
            clamp: 20.0,
            m: 0.5,
            d: 0.5,
            r: 5,
            q: 5,
            epsilon: 1e-3,
            bound: BoundConfig::default(),
            seed: 0,
            ml_only: false,
            threads: 1,
        }
    }
}

const KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "lr",
    "momentum",
    "aux_lr",
    "aux_momentum",
    "weight_decay",
    "hidden",
    "activation",
    "a",
    "b",
    "gamma",
    "clamp",
    "m",
    "d",
    "r",
    "q",
    "epsilon",
    "rho",
    "seed",
    "ml_only",
    "threads",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs > 0 && !(1..=self.epochs).contains(&self.r) {
            return bad(format!("r must lie in 1..={}, got {}", self.epochs, self.r));
        }
        if self.epochs > 0 && !(1..=self.epochs).contains(&self.q) {
            return bad(format!("q must lie in 1..={}, got {}", self.epochs, self.q));
        }
        if !(self.m > 0.0 && self.m < 1.0) {
            return bad(format!("m must lie in (0, 1), got {}", self.m));
        }
        if !(self.d > 0.0 && self.d < 1.0) {
            return bad(format!("d must lie in (0, 1), got {}", self.d));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.bound.rho > 0.0 && self.bound.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.bound.rho));
        }
        if !(self.clamp > 0.0 && self.clamp.is_finite()) {
            return bad(format!("clamp must be positive, got {}", self.clamp));
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        for (name, lr, mom) in [("lr", self.lr, self.momentum), ("aux_lr", self.aux_lr, self.aux_momentum)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be non-negative, got {lr}"));
            }
            if !(0.0..1.0).contains(&mom) {
                return bad(format!("momentum for {name} must lie in [0, 1), got {mom}"));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        self.transform.validate(self.clamp).map_err(|e| TrainError::Config(e.to_string()))
    }

    /// Parse `key=value` lines on top of the defaults. `#` starts a comment;
    /// unknown or repeated keys are errors.
    pub fn from_kv_str(text: &str) -> Result<Self, TrainError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| TrainError::Config(format!("line {}: {msg}", k + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key '{key}'")));
            }
            if seen.contains(&key) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            seen.push(key);
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("invalid value '{v}' for {key}: {e}"))
        }
        match key {
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "aux_lr" => self.aux_lr = num(key, value)?,
            "aux_momentum" => self.aux_momentum = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "hidden" => {
                self.hidden = if value.is_empty() || value == "none" {
                    Vec::new()
                } else {
                    value.split(',').map(|w| num(key, w.trim())).collect::<Result<_, _>>()?
                }
            }
            "activation" => self.activation = value.parse()?,
            "a" => self.transform.a = num(key, value)?,
            "b" => self.transform.b = num(key, value)?,
            "gamma" => self.transform.gamma = num(key, value)?,
            "clamp" => self.clamp = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "r" => self.r = num(key, value)?,
            "q" => self.q = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "rho" => self.bound.rho = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "ml_only" => self.ml_only = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Every key, in a stable order; parses back to the same config.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        let hidden = if hidden.is_empty() { "none".to_string() } else { hidden.join(",") };
        let _ = writeln!(out, "epochs={}", self.epochs);
        let _ = writeln!(out, "batch_size={}", self.batch_size);
        let _ = writeln!(out, "lr={:?}", self.lr);
        let _ = writeln!(out, "momentum={:?}", self.momentum);
        let _ = writeln!(out, "aux_lr={:?}", self.aux_lr);
        let _ = writeln!(out, "aux_momentum={:?}", self.aux_momentum);
        let _ = writeln!(out, "weight_decay={:?}", self.weight_decay);
        let _ = writeln!(out, "hidden={hidden}");
        let _ = writeln!(out, "activation={}", self.activation);
        let _ = writeln!(out, "a={:?}", self.transform.a);
        let _ = writeln!(out, "b={:?}", self.transform.b);
        let _ = writeln!(out, "gamma={:?}", self.transform.gamma);
        let _ = writeln!(out, "clamp={:?}", self.clamp);
        let _ = writeln!(out, "m={:?}", self.m);
        let _ = writeln!(out, "d={:?}", self.d);
        let _ = writeln!(out, "r={}", self.r);
        let _ = writeln!(out, "q={}", self.q);
        let _ = writeln!(out, "epsilon={:?}", self.epsilon);
        let _ = writeln!(out, "rho={:?}", self.bound.rho);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "ml_only={}", self.ml_only);
        let _ = writeln!(out, "threads={}", self.threads);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_roundtrip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(TrainConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
        let linear = TrainConfig { hidden: vec![], ml_only: true, ..cfg };
        assert_eq!(TrainConfig::from_kv_str(&linear.to_kv_string()).unwrap(), linear);
    }

    #[test]
    fn partial_file_overrides_defaults() {
        let cfg = TrainConfig::from_kv_str("# comment\nepochs=10\nr=2 \n q = 3\nhidden=8,4\n").unwrap();
        assert_eq!((cfg.epochs, cfg.r, cfg.q), (10, 2, 3));
        assert_eq!(cfg.hidden, vec![8, 4]);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let e = TrainConfig::from_kv_str("epoch=3\n").unwrap_err();
        assert!(e.to_string().contains("unknown key 'epoch'"), "{e}");
        assert!(TrainConfig::from_kv_str("lr=0.1\nlr=0.2\n").is_err());
        assert!(TrainConfig::from_kv_str("lr=fast\n").is_err());
        assert!(TrainConfig::from_kv_str("lr 0.1\n").is_err());
    }

    #[test]
    fn domain_checks() {
        for text in [
            "d=1",
            "m=0",
            "r=0",
            "epochs=4\nq=5",
            "batch_size=0",
            "epsilon=0",
            "momentum=1",
            "a=0",
            "gamma=0.01",
            "threads=0",
            "rho=-1",
        ] {
            assert!(TrainConfig::from_kv_str(text).is_err(), "{text}");
        }
        // small a is allowed for sensitivity sweeps
        assert!(TrainConfig::from_kv_str("a=0.001").is_ok());
    }
}
