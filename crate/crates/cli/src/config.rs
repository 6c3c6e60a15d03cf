//! Experiment configuration: a flat JSON file whose fields are all
//! mirrored by command-line flags; flags override file values.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use wavedens::estimator::ThresholdScope;
use wavedens::gmrf::{default_copula_correlation, Correlation5, PAPER_ETAS};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletChoice {
    Haar,
    D4,
    Both,
}

impl WaveletChoice {
    pub fn names(&self) -> Vec<&'static str> {
        match self {
            WaveletChoice::Haar => vec!["haar"],
            WaveletChoice::D4 => vec!["d4"],
            WaveletChoice::Both => vec!["haar", "d4"],
        }
    }
}

impl std::str::FromStr for WaveletChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "haar" => Ok(WaveletChoice::Haar),
            "d4" => Ok(WaveletChoice::D4),
            "both" => Ok(WaveletChoice::Both),
            other => Err(format!("unknown wavelet choice '{other}'")),
        }
    }
}

/// Which density the rate study samples from and estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatesTarget {
    Uniform,
    Tent,
    Mixture,
}

impl std::str::FromStr for RatesTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(RatesTarget::Uniform),
            "tent" => Ok(RatesTarget::Tent),
            "mixture" => Ok(RatesTarget::Mixture),
            other => Err(format!("unknown rates target '{other}'")),
        }
    }
}

/// Full experiment configuration with the paper's defaults.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// lattice edge lengths n (the lattice is n x n)
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub wavelet: WaveletChoice,
    /// table levels run from 0 to j_max inclusive
    pub j_max: i32,
    /// relative threshold multiples for the hard estimator
    pub multiples: Vec<f64>,
    pub etas: [f64; 5],
    pub copula: Correlation5,
    /// Gibbs sweeps before the field is read off
    pub iterations: usize,
    pub seed: u64,
    /// independent reference sampling instead of the Gibbs chain
    pub iid: bool,
    pub train_fraction: f64,
    pub threshold_scope: ThresholdScope,
    /// compute the verification criterion on normalized estimates instead
    /// of raw ones
    pub normalized_ver: bool,
    pub out_dir: PathBuf,
    /// rates study: sampling target and Besov parameters
    pub rates_target: RatesTarget,
    pub rates_s: f64,
    /// Besov integrability index; infinity is written as "inf" in JSON
    #[serde(with = "maybe_infinite")]
    pub rates_p: f64,
    pub rates_p_prime: f64,
    /// multiplier on the theoretical threshold constant K0
    pub k0_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sizes: vec![20, 35, 50, 65],
            replications: 100,
            wavelet: WaveletChoice::Both,
            j_max: 4,
            multiples: vec![0.1, 0.2, 0.3],
            etas: PAPER_ETAS,
            copula: default_copula_correlation(),
            iterations: 1000,
            seed: 7,
            iid: false,
            train_fraction: 0.9,
            threshold_scope: ThresholdScope::PerLevel,
            normalized_ver: false,
            out_dir: PathBuf::from("out"),
            rates_target: RatesTarget::Tent,
            rates_s: 0.5,
            rates_p: f64::INFINITY,
            rates_p_prime: 2.0,
            k0_scale: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n == 0) {
            return Err(CliError::Config("sizes must be positive".into()));
        }
        if self.replications == 0 {
            return Err(CliError::Config("replications must be at least one".into()));
        }
        if self.multiples.iter().any(|&m| m < 0.0) {
            return Err(CliError::Config("threshold multiples must be nonnegative".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Config("train fraction must lie in (0, 1)".into()));
        }
        if self.j_max < 0 {
            return Err(CliError::Config("j_max must be nonnegative".into()));
        }
        Ok(())
    }
}

/// JSON has no infinity literal; an infinite index round-trips as "inf".
mod maybe_infinite {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    struct NumOrInf;

    impl Visitor<'_> for NumOrInf {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or the string \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                other => other.parse().map_err(de::Error::custom),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(NumOrInf)
    }
}
