//! Experiment configuration: profile defaults, JSON config files and
//! command-line overrides, merged in that order.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use megopolis::resample::PartitionConfig;
use megopolis::rng::derive_seed;
use megopolis::weights::{gen_gamma_weights, gen_gaussian_weights, GammaWeightParams, GaussianWeightParams};
use megopolis::{Algorithm, Precision, WarpConfig, WeightVector};
use serde::{Deserialize, Serialize};

/// Serde adapter for types that round-trip through `Display` / `FromStr`.
pub(crate) mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }

    pub mod list {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|s| s.parse().map_err(de::Error::custom))
                .collect()
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<T: Display, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.collect_str(v),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Option::<String>::deserialize(d)?
                .map(|s| s.parse().map_err(de::Error::custom))
                .transpose()
        }
    }

    pub mod option_list {
        use super::*;

        pub fn serialize<T: Display, S: Serializer>(v: &Option<Vec<T>>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => list::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Option<Vec<T>>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Option::<Vec<String>>::deserialize(d)?
                .map(|v| v.iter().map(|s| s.parse().map_err(de::Error::custom)).collect())
                .transpose()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Sized to finish in minutes on a laptop.
    #[default]
    Desk,
    /// The full published grid.
    Paper,
}

impl FromStr for Profile {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => bail!("unknown profile {s:?} (expected desk or paper)"),
        }
    }
}

/// Synthetic weight family used by the quality and traffic grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFamily {
    /// Gaussian likelihood weights; the parameter is the offset `y`.
    #[default]
    Gaussian,
    /// Gamma-distributed weights; the parameter is the shape `alpha`.
    Gamma,
}

impl WeightFamily {
    pub fn default_params(self) -> Vec<f64> {
        match self {
            WeightFamily::Gaussian => vec![0.0, 1.0, 2.0, 3.0, 4.0],
            WeightFamily::Gamma => vec![0.5, 2.0, 3.0, 10.0, 50.0],
        }
    }

    fn code(self) -> u64 {
        match self {
            WeightFamily::Gaussian => 1,
            WeightFamily::Gamma => 2,
        }
    }
}

impl fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightFamily::Gaussian => "gaussian",
            WeightFamily::Gamma => "gamma",
        })
    }
}

impl FromStr for WeightFamily {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(WeightFamily::Gaussian),
            "gamma" => Ok(WeightFamily::Gamma),
            _ => bail!("unknown weight family {s:?} (expected gaussian or gamma)"),
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(with = "text::list")]
    pub algorithms: Vec<Algorithm>,
    pub n_grid: Vec<usize>,
    pub family: WeightFamily,
    pub params: Vec<f64>,
    /// Gamma rate; unused by the Gaussian family.
    pub beta: f64,
    /// Resamples per weight sequence (K).
    pub runs: usize,
    pub sequences: usize,
    pub epsilon: f64,
    /// Fixed iteration budget; when absent it is computed per sequence from `epsilon`.
    pub iterations: Option<usize>,
    pub seed: u64,
    #[serde(with = "text")]
    pub precision: Precision,
    /// Warps replayed per traffic point; all warps when absent.
    pub warp_sample: Option<usize>,
    pub particles: usize,
    pub steps: usize,
    pub trajectories: usize,
    pub filter_runs: usize,
    /// Fixed filter budgets; an empty grid selects the runtime policy.
    pub b_grid: Vec<usize>,
    pub timings: bool,
}

/// Partial [`ExperimentSpec`]: the JSON config schema and the set of
/// command-line overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    #[serde(with = "text::option_list", skip_serializing_if = "Option::is_none")]
    pub algorithms: Option<Vec<Algorithm>>,
    pub n_grid: Option<Vec<usize>>,
    pub family: Option<WeightFamily>,
    pub params: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub runs: Option<usize>,
    pub sequences: Option<usize>,
    pub epsilon: Option<f64>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    #[serde(with = "text::option", skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    pub warp_sample: Option<usize>,
    pub particles: Option<usize>,
    pub steps: Option<usize>,
    pub trajectories: Option<usize>,
    pub filter_runs: Option<usize>,
    pub b_grid: Option<Vec<usize>>,
    pub timings: Option<bool>,
    pub profile: Option<Profile>,
}

impl Overrides {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            algorithms, n_grid, family, params, beta, runs, sequences, epsilon, iterations, seed, precision,
            warp_sample, particles, steps, trajectories, filter_runs, b_grid, timings, profile
        )
    }
}

pub fn default_algorithms() -> Vec<Algorithm> {
    vec![
        Algorithm::Metropolis,
        Algorithm::MetropolisC1(PartitionConfig::new(128)),
        Algorithm::MetropolisC1(PartitionConfig::new(2048)),
        Algorithm::MetropolisC2(PartitionConfig::new(128)),
        Algorithm::MetropolisC2(PartitionConfig::new(2048)),
        Algorithm::Megopolis,
        Algorithm::Multinomial,
        Algorithm::Systematic,
    ]
}

impl ExperimentSpec {
    pub fn profile(profile: Profile) -> Self {
        let pow2 = |lo: u32, hi: u32, step: usize| (lo..=hi).step_by(step).map(|e| 1usize << e).collect();
        let base = ExperimentSpec {
            algorithms: default_algorithms(),
            n_grid: pow2(10, 16, 2),
            family: WeightFamily::Gaussian,
            params: WeightFamily::Gaussian.default_params(),
            beta: 1.0,
            runs: 32,
            sequences: 4,
            epsilon: 0.01,
            iterations: None,
            seed: 0,
            precision: Precision::Single,
            warp_sample: Some(256),
            particles: 1 << 14,
            steps: 100,
            trajectories: 4,
            filter_runs: 4,
            b_grid: vec![16, 32, 64],
            timings: false,
        };
        match profile {
            Profile::Desk => base,
            Profile::Paper => ExperimentSpec {
                n_grid: pow2(6, 22, 1),
                runs: 256,
                sequences: 16,
                warp_sample: None,
                particles: 1 << 16,
                filter_runs: 10,
                ..base
            },
        }
    }

    /// Profile defaults with `o` applied on top.
    pub fn resolve(o: Overrides) -> Result<Self> {
        let mut s = Self::profile(o.profile.unwrap_or_default());
        if let Some(family) = o.family {
            s.family = family;
            s.params = family.default_params();
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = o.$f { s.$f = v; })* };
        }
        set!(
            algorithms, n_grid, params, beta, runs, sequences, epsilon, seed, precision, particles, steps,
            trajectories, filter_runs, b_grid, timings
        );
        if o.iterations.is_some() {
            s.iterations = o.iterations;
        }
        if o.warp_sample.is_some() {
            s.warp_sample = o.warp_sample;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.n_grid.is_empty() || self.params.is_empty() {
            bail!("algorithm, N and parameter grids must be non-empty");
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n == 0) {
            bail!("particle counts must be positive, got {n}");
        }
        if self.runs < 2 {
            bail!("at least 2 runs per sequence are needed, got {}", self.runs);
        }
        if self.sequences == 0 {
            bail!("at least one weight sequence is needed");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            bail!("epsilon must lie in (0, 1), got {}", self.epsilon);
        }
        if self.iterations == Some(0) {
            bail!("a fixed iteration budget must be >= 1");
        }
        if self.steps == 0 || self.trajectories == 0 || self.filter_runs == 0 || self.particles == 0 {
            bail!("filter steps, trajectories, runs and particles must be positive");
        }
        Ok(())
    }

    /// Warp model matching the stored word width.
    pub fn warp(&self) -> WarpConfig {
        WarpConfig::new(32, self.precision.word_bytes(), 32).expect("default warp geometry is valid")
    }
}

/// Seed of one weight sequence; depends only on the point's coordinates.
pub fn sequence_seed(seed: u64, family: WeightFamily, n: usize, param: f64, sequence: usize) -> u64 {
    [family.code(), n as u64, param.to_bits(), sequence as u64]
        .into_iter()
        .fold(derive_seed(seed, 0x5345_5155_454e), derive_seed)
}

pub fn generate(family: WeightFamily, param: f64, beta: f64, n: usize, precision: Precision, seed: u64) -> Result<WeightVector> {
    Ok(match family {
        WeightFamily::Gaussian => gen_gaussian_weights(GaussianWeightParams { y: param, n }, precision, seed)?,
        WeightFamily::Gamma => gen_gamma_weights(GammaWeightParams { alpha: param, beta, n }, precision, seed)?,
    })
}
