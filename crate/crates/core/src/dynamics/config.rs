use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::forcing::ForcingSpec;
use crate::error::{Error, Result};
use crate::forms::BilinearSpec;
use crate::initial::InitialSpec;

/// What to do when a step would exceed the advective limit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CflMode {
    /// Split the step into `2^k` equal substeps.
    #[default]
    Shrink,
    Fail,
}

fn default_stride() -> usize {
    1
}

fn default_safety() -> f64 {
    0.5
}

/// Parameters of one run. Field names are the JSON keys of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub q: usize,
    #[serde(rename = "N")]
    pub size: usize,
    pub mu: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub nonlinearity: BilinearSpec,
    #[serde(default)]
    pub forcing: ForcingSpec,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub cfl_mode: CflMode,
    #[serde(default)]
    pub seed: u64,
    /// Spatial exponent of the running `L^𝔰(L^𝔯)` monitor; `2n+1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lps_r: Option<f64>,
    /// Initial datum used by the command-line driver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
}

impl SimConfig {
    /// A Stokes run with default output and CFL settings.
    pub fn stokes(n: usize, q: usize, size: usize, mu: f64, horizon: f64, dt: f64) -> Self {
        Self {
            n,
            q,
            size,
            mu,
            horizon,
            dt,
            nonlinearity: BilinearSpec::Stokes,
            forcing: ForcingSpec::Zero,
            output_stride: 1,
            cfl_safety: default_safety(),
            cfl_mode: CflMode::Shrink,
            seed: 0,
            lps_r: None,
            initial: None,
        }
    }

    pub fn with_nonlinearity(mut self, spec: BilinearSpec) -> Self {
        self.nonlinearity = spec;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.q < 1 || self.q >= self.n {
            return bad(format!("q must lie in [1, n-1], got {}", self.q));
        }
        if self.size < 4 || !self.size.is_power_of_two() {
            return bad(format!("N must be a power of two >= 4, got {}", self.size));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("T must be positive, got {}", self.horizon));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        let ratio = self.horizon / self.dt;
        if !(0.999_999..=1e7).contains(&ratio) {
            return bad(format!("T/dt must lie in [1, 1e7], got {ratio}"));
        }
        if self.output_stride == 0 {
            return bad("output_stride must be positive".into());
        }
        if !self.num_steps().is_multiple_of(self.output_stride) {
            return bad(format!(
                "output_stride {} does not divide the step count {}",
                self.output_stride,
                self.num_steps()
            ));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if let Some(r) = self.lps_r {
            if r.is_nan() || r <= (2 * self.n) as f64 {
                return bad(format!("lps_r must exceed 2n = {}, got {r}", 2 * self.n));
            }
        }
        self.nonlinearity
            .validate(self.n, self.q)
            .map_err(|e| Error::Config(e.to_string()))?;
        self.forcing.validate(self.n, self.q, self.size)?;
        Ok(())
    }

    /// Number of steps: `T/dt` rounded up, so the last step lands on `T`.
    pub fn num_steps(&self) -> usize {
        let ratio = self.horizon / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest.max(1.0) as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// The step size actually used, `T / num_steps`.
    pub fn step_size(&self) -> f64 {
        self.horizon / self.num_steps() as f64
    }

    pub fn lps_exponent_r(&self) -> f64 {
        self.lps_r.unwrap_or((2 * self.n + 1) as f64)
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
