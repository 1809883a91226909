//! TOML configuration files.
//!
//! Field names follow `ScenarioConfig`. Quantities given in decibels carry a
//! `_db` or `_dbm` suffix and are converted on load: `p_max_db` is in dBW,
//! `sigma2_dbm` and the circuit powers are in dBm. Every field is optional;
//! missing ones take the defaults of the chosen `preset` (desk when absent).

use std::path::{Path, PathBuf};

use cfee_core::altopt::AlgorithmOptions;
use cfee_core::config::{db_to_linear, LinkParams, UserArea};
use cfee_core::{ConfigError, GaConfig, PhaseBackend, ScenarioConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] ConfigError),
    #[error("unknown backend {0:?}, expected bcd or sdr")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Desk,
    Full,
}

/// Floats that may be infinite (Rician factors). Finite values are written as
/// numbers, infinities as the strings `"inf"` and `"-inf"`, since JSON has no
/// literal for them.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => other.parse().map_err(serde::de::Error::custom),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFile {
    pub pathloss_exp: f64,
    #[serde(with = "extended_f64")]
    pub rician_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserAreaFile {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ee_tol: Option<f64>,
    /// `bcd` or `sdr`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub randomization_candidates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tournament: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossover_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam_mutation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_mutation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elitism: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_aps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_irs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elements_per_irs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_positions: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irs_positions: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_area: Option<UserAreaFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pathloss_ref_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_irs: Option<LinkFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irs_user: Option<LinkFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_user: Option<LinkFile>,
    /// dBW.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_ap_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_user_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_irs_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty_includes_bandwidth: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ga: Option<GaFile>,
}

fn watts_to_db(w: f64) -> f64 {
    10.0 * w.log10()
}

fn link_to_file(p: &LinkParams) -> LinkFile {
    LinkFile {
        pathloss_exp: p.pathloss_exp,
        rician_db: p.rician_db,
    }
}

fn link_from_file(f: &LinkFile) -> LinkParams {
    LinkParams {
        pathloss_exp: f.pathloss_exp,
        rician_db: f.rician_db,
    }
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigFileError> {
        toml::from_str(text).map_err(|source| ConfigFileError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Complete echo of a scenario, every field present.
    pub fn from_scenario(c: &ScenarioConfig) -> Self {
        Self {
            preset: None,
            num_aps: Some(c.num_aps),
            num_users: Some(c.num_users),
            num_irs: Some(c.num_irs),
            elements_per_irs: Some(c.elements_per_irs),
            ap_positions: Some(c.ap_positions.clone()),
            irs_positions: Some(c.irs_positions.clone()),
            user_area: Some(UserAreaFile {
                start: c.user_area.start,
                end: c.user_area.end,
                radius: c.user_area.radius,
                height: c.user_area.height,
            }),
            pathloss_ref_db: Some(c.pathloss_ref_db),
            ap_irs: Some(link_to_file(&c.ap_irs)),
            irs_user: Some(link_to_file(&c.irs_user)),
            ap_user: Some(link_to_file(&c.ap_user)),
            p_max_db: Some(watts_to_db(c.p_max)),
            r_min: Some(c.r_min),
            sigma2_dbm: Some(watts_to_db(c.sigma2) + 30.0),
            upsilon: Some(c.upsilon),
            p_ap_dbm: Some(watts_to_db(c.p_ap) + 30.0),
            p_user_dbm: Some(watts_to_db(c.p_user) + 30.0),
            p_irs_dbm: Some(watts_to_db(c.p_irs) + 30.0),
            bandwidth: Some(c.bandwidth),
            beta1: Some(c.beta1),
            beta2: Some(c.beta2),
            penalty_includes_bandwidth: Some(c.penalty_includes_bandwidth),
            algorithm: None,
            ga: None,
        }
    }

    /// Builds and validates the scenario.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigFileError> {
        let base = match self.preset.unwrap_or_default() {
            Preset::Desk => ScenarioConfig::desk(),
            Preset::Full => ScenarioConfig::full_scale(),
        };
        let mut c = ScenarioConfig::with_dims(
            self.num_aps.unwrap_or(base.num_aps),
            self.num_users.unwrap_or(base.num_users),
            self.num_irs.unwrap_or(base.num_irs),
            self.elements_per_irs.unwrap_or(base.elements_per_irs),
        );
        if let Some(p) = &self.ap_positions {
            c.ap_positions = p.clone();
        }
        if let Some(p) = &self.irs_positions {
            c.irs_positions = p.clone();
        }
        if let Some(a) = &self.user_area {
            c.user_area = UserArea {
                start: a.start,
                end: a.end,
                radius: a.radius,
                height: a.height,
            };
        }
        if let Some(x) = self.pathloss_ref_db {
            c.pathloss_ref_db = x;
        }
        if let Some(l) = &self.ap_irs {
            c.ap_irs = link_from_file(l);
        }
        if let Some(l) = &self.irs_user {
            c.irs_user = link_from_file(l);
        }
        if let Some(l) = &self.ap_user {
            c.ap_user = link_from_file(l);
        }
        if let Some(x) = self.p_max_db {
            c.p_max = db_to_linear(x);
        }
        if let Some(x) = self.r_min {
            c.r_min = x;
        }
        if let Some(x) = self.sigma2_dbm {
            c.sigma2 = db_to_linear(x - 30.0);
        }
        if let Some(x) = self.upsilon {
            c.upsilon = x;
        }
        if let Some(x) = self.p_ap_dbm {
            c.p_ap = db_to_linear(x - 30.0);
        }
        if let Some(x) = self.p_user_dbm {
            c.p_user = db_to_linear(x - 30.0);
        }
        if let Some(x) = self.p_irs_dbm {
            c.p_irs = db_to_linear(x - 30.0);
        }
        if let Some(x) = self.bandwidth {
            c.bandwidth = x;
        }
        if let Some(x) = self.beta1 {
            c.beta1 = x;
        }
        if let Some(x) = self.beta2 {
            c.beta2 = x;
        }
        if let Some(x) = self.penalty_includes_bandwidth {
            c.penalty_includes_bandwidth = x;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn algorithm_options(&self) -> Result<AlgorithmOptions, ConfigFileError> {
        let mut o = AlgorithmOptions::default();
        let Some(a) = &self.algorithm else {
            return Ok(o);
        };
        if let Some(x) = a.t_max {
            o.t_max = x;
        }
        if let Some(x) = a.ee_tol {
            o.ee_tol = x;
        }
        if let Some(b) = &a.backend {
            o.backend = parse_backend(b)?;
        }
        if let Some(x) = a.randomization_candidates {
            o.phase.randomization_candidates = x;
        }
        if let Some(x) = a.rate_margin {
            o.beam.rate_margin = x;
        }
        Ok(o)
    }

    pub fn ga_config(&self) -> GaConfig {
        let mut g = GaConfig::default();
        if let Some(f) = &self.ga {
            g.population = f.population.unwrap_or(g.population);
            g.generations = f.generations.unwrap_or(g.generations);
            g.tournament = f.tournament.unwrap_or(g.tournament);
            g.crossover_prob = f.crossover_prob.unwrap_or(g.crossover_prob);
            g.beam_mutation = f.beam_mutation.unwrap_or(g.beam_mutation);
            g.phase_mutation = f.phase_mutation.unwrap_or(g.phase_mutation);
            g.elitism = f.elitism.unwrap_or(g.elitism);
        }
        g
    }
}

pub fn parse_backend(s: &str) -> Result<PhaseBackend, ConfigFileError> {
    match s {
        "bcd" => Ok(PhaseBackend::Bcd),
        "sdr" => Ok(PhaseBackend::Sdr),
        other => Err(ConfigFileError::Backend(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ConfigFile {
        ConfigFile::parse(text, Path::new("test.toml")).unwrap()
    }

    #[test]
    fn empty_file_is_desk() {
        assert_eq!(parse("").scenario().unwrap(), ScenarioConfig::desk());
    }

    #[test]
    fn decibel_fields_are_converted() {
        let c = parse("p_max_db = 10.0\nsigma2_dbm = -90.0\np_irs_dbm = 30.0").scenario().unwrap();
        assert!((c.p_max - 10.0).abs() < 1e-12);
        assert!((c.sigma2 - 1e-12).abs() < 1e-24);
        assert!((c.p_irs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimensions_move_default_positions() {
        let c = parse("preset = \"full\"\nnum_aps = 3").scenario().unwrap();
        assert_eq!(c.num_aps, 3);
        assert_eq!(c.ap_positions.len(), 3);
        assert_eq!(c.elements_per_irs, 50);
    }

    #[test]
    fn rayleigh_links_survive_toml_and_json() {
        let cfg = ScenarioConfig::desk();
        let echo = ConfigFile::from_scenario(&cfg);
        let json = serde_json::to_string(&echo).unwrap();
        let back: ConfigFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.ap_user.as_ref().unwrap().rician_db, f64::NEG_INFINITY);
        let toml_text = toml::to_string(&echo).unwrap();
        let back = parse(&toml_text).scenario().unwrap();
        assert_eq!(back.ap_user.rician_db, f64::NEG_INFINITY);
        assert_eq!(back.num_irs, cfg.num_irs);
        assert!((back.sigma2 - cfg.sigma2).abs() <= 1e-12 * cfg.sigma2);
        assert!((back.p_ap - cfg.p_ap).abs() <= 1e-12 * cfg.p_ap);
        let native = parse("[ap_user]\npathloss_exp = 3.5\nrician_db = -inf").scenario().unwrap();
        assert_eq!(native.ap_user.rician_db, f64::NEG_INFINITY);
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(ConfigFile::parse("p_max = 1.0", Path::new("x")).is_err());
        assert!(matches!(parse("upsilon = 2.0").scenario(), Err(ConfigFileError::Invalid(_))));
        let bad = parse("[algorithm]\nbackend = \"cvx\"");
        assert!(matches!(bad.algorithm_options(), Err(ConfigFileError::Backend(_))));
    }

    #[test]
    fn solver_sections() {
        let f = parse("[algorithm]\nt_max = 7\nbackend = \"sdr\"\n[ga]\npopulation = 10\ngenerations = 3");
        let a = f.algorithm_options().unwrap();
        assert_eq!(a.t_max, 7);
        assert_eq!(a.backend, PhaseBackend::Sdr);
        let g = f.ga_config();
        assert_eq!((g.population, g.generations, g.tournament), (10, 3, 2));
    }
}
