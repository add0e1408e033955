//! Experiment configuration.
//!
//! A config is one JSON document:
//!
//! ```json
//! {
//!   "alpha": 0.5,
//!   "N": null,
//!   "gamma": 2.0,
//!   "charges": [{ "re": 0.3, "im": 0.0, "beta": 0.5 }],
//!   "degree": 50,
//!   "quad": "24,0,1e-12",
//!   "seed": 1,
//!   "dbar_k": 3,
//!   "fekete_n": 200,
//!   "fekete_seeds": 5,
//!   "trajectory_step": 0.001,
//!   "trajectory_tol": 0.0001,
//!   "compare_degree": 30
//! }
//! ```
//!
//! Every field is optional. `N` and `gamma` are exclusive: with `N` fixed the
//! ratio is `gamma = N / degree`, otherwise `N = gamma * degree` with `gamma`
//! defaulting to 2.

use std::path::Path;

use anyhow::{bail, Context};
use num_complex::Complex64;
use planeq::planarquad::QuadSpec;
use planeq::{PerturbedPotential, PointCharge, PointChargeMeasure};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeSpec {
    pub re: f64,
    pub im: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    #[serde(rename = "N")]
    pub scale: Option<f64>,
    pub gamma: Option<f64>,
    pub charges: Vec<ChargeSpec>,
    pub degree: usize,
    pub quad: Option<String>,
    pub seed: u64,
    pub dbar_k: usize,
    pub fekete_n: usize,
    pub fekete_seeds: usize,
    pub trajectory_step: f64,
    pub trajectory_tol: f64,
    pub compare_degree: usize,
}

impl Default for ExperimentConfig {
    /// Single-charge cavity case used for the zero and trajectory figures.
    fn default() -> Self {
        Self {
            alpha: 0.5,
            scale: None,
            gamma: None,
            charges: vec![ChargeSpec {
                re: 0.3,
                im: 0.0,
                beta: 0.5,
            }],
            degree: 50,
            quad: None,
            seed: 1,
            dbar_k: 3,
            fekete_n: 200,
            fekete_seeds: 5,
            trajectory_step: 1e-3,
            trajectory_tol: 1e-4,
            compare_degree: 30,
        }
    }
}

/// Command-line values that override config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub quad: Option<String>,
    pub degree: Option<usize>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(q) = &o.quad {
            self.quad = Some(q.clone());
        }
        if let Some(d) = o.degree {
            self.degree = d;
        }
        if let Some(g) = o.gamma {
            // a ratio on the command line replaces a fixed N from the file
            self.gamma = Some(g);
            self.scale = None;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(anyhow::Error::new(InvalidConfig(format!("{name} = {x} must be positive"))))
            }
        };
        positive("alpha", self.alpha)?;
        if let Some(n) = self.scale {
            positive("N", n)?;
        }
        if let Some(g) = self.gamma {
            positive("gamma", g)?;
        }
        if self.scale.is_some() && self.gamma.is_some() {
            bail!(InvalidConfig("give either N or gamma, not both".into()));
        }
        for c in &self.charges {
            positive("beta", c.beta)?;
            if !(c.re.is_finite() && c.im.is_finite()) {
                bail!(InvalidConfig(format!("charge location {} + {}i", c.re, c.im)));
            }
        }
        positive("trajectory_step", self.trajectory_step)?;
        positive("trajectory_tol", self.trajectory_tol)?;
        if self.fekete_seeds == 0 {
            bail!(InvalidConfig("fekete_seeds must be at least 1".into()));
        }
        self.quad_spec()?;
        Ok(())
    }

    pub fn quad_spec(&self) -> anyhow::Result<QuadSpec> {
        match &self.quad {
            None => Ok(QuadSpec::default()),
            Some(s) => {
                let q: QuadSpec = s.parse().map_err(|e| InvalidConfig(format!("--quad {s}: {e}")))?;
                q.validate().map_err(|e| InvalidConfig(e.to_string()))?;
                Ok(q)
            }
        }
    }

    pub fn measure(&self) -> anyhow::Result<PointChargeMeasure> {
        let charges = self
            .charges
            .iter()
            .map(|c| PointCharge {
                location: Complex64::new(c.re, c.im),
                beta: c.beta,
            })
            .collect();
        PointChargeMeasure::new(charges).map_err(|e| InvalidConfig(e.to_string()).into())
    }

    /// `(N, gamma)` for polynomials of degree `n`.
    pub fn scale_for(&self, n: usize) -> (f64, f64) {
        match self.scale {
            Some(big_n) => (big_n, big_n / n.max(1) as f64),
            None => {
                let g = self.gamma.unwrap_or(2.0);
                (g * n.max(1) as f64, g)
            }
        }
    }

    pub fn potential_for(&self, n: usize) -> anyhow::Result<PerturbedPotential> {
        let (big_n, gamma) = self.scale_for(n);
        PerturbedPotential::new(self.alpha, self.measure()?, big_n, gamma).map_err(|e| InvalidConfig(e.to_string()).into())
    }
}

/// Rejected configuration; mapped to the "unsupported configuration" exit code.
#[derive(Debug, Clone)]
pub struct InvalidConfig(pub String);

impl std::fmt::Display for InvalidConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for InvalidConfig {}
