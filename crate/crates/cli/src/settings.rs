//! Run settings: built-in defaults, then `FLUENTCRIT_SEED`, then the config
//! file, then command-line flags.

use std::path::Path;

use fluentcrit::criteria::LossWeights;
use fluentcrit::harness::{DEFAULT_LR, DEFAULT_N_CEPS, DEFAULT_STEPS};

pub const SEED_ENV: &str = "FLUENTCRIT_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub steps: usize,
    pub lr: f64,
    pub n_ceps: usize,
    pub trials: usize,
    pub h: f64,
    pub frames_per_word: Option<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            lambda: 0.8,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            tau: 0.1,
            steps: DEFAULT_STEPS,
            lr: DEFAULT_LR,
            n_ceps: DEFAULT_N_CEPS,
            trials: 100,
            h: 1e-4,
            frames_per_word: None,
        }
    }
}

impl Settings {
    pub fn weights(&self) -> LossWeights {
        LossWeights { alpha: self.alpha, beta: self.beta, gamma: self.gamma }
    }

    /// Defaults with the seed taken from the environment when set.
    pub fn from_env(env_seed: Option<&str>) -> Result<Self, String> {
        let mut s = Self::default();
        if let Some(v) = env_seed {
            s.seed = v.trim().parse().map_err(|_| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?;
        }
        Ok(s)
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.apply_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<(), String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
        for (key, value) in &table {
            let float = || match value {
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Integer(i) => Ok(*i as f64),
                _ => Err(format!("{key} must be a number")),
            };
            let uint = || match value {
                toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                _ => Err(format!("{key} must be a non-negative integer")),
            };
            match key.as_str() {
                "seed" => self.seed = uint()?,
                "lambda" => self.lambda = float()?,
                "alpha" => self.alpha = float()?,
                "beta" => self.beta = float()?,
                "gamma" => self.gamma = float()?,
                "tau" => self.tau = float()?,
                "steps" => self.steps = uint()? as usize,
                "lr" => self.lr = float()?,
                "n_ceps" => self.n_ceps = uint()? as usize,
                "trials" => self.trials = uint()? as usize,
                "h" => self.h = float()?,
                "frames_per_word" => self.frames_per_word = Some(float()?),
                other => return Err(format!("unknown key {other:?}")),
            }
        }
        Ok(())
    }
}
