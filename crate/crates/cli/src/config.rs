//! Experiment configuration, read from TOML and validated before anything
//! is computed.

use std::collections::BTreeSet;
use std::path::PathBuf;

use amalgam_core::models::{block_plan, AtomicAlgebra, ModelSpec};
use amalgam_core::ncpoly::{parse_polynomial, GenId, NcPolynomial, Word};
use amalgam_core::oracle::{MomentOracle, DEFAULT_DEGREE_CAP};
use amalgam_core::verify::{ConcentrationSettings, SuiteSettings, Tolerances};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A config problem, located by the dotted path of the offending field.
#[derive(Debug, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl ToString) -> Self {
        ConfigError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// In the monomial grammar, e.g. `2 f1.g0^2 f2.g0 - 1`.
    pub polynomials: Vec<String>,
    pub model: ModelSpec,
    #[serde(default)]
    pub oracle: OracleSection,
    pub schedule: Schedule,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub degree_cap: usize,
    /// Longest word in the exported moment table.
    pub table_max_len: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            degree_cap: DEFAULT_DEGREE_CAP,
            table_max_len: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub k_list: Vec<usize>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSection {
    pub k_list: Vec<usize>,
    pub samples: usize,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default = "default_slope_min")]
    pub slope_min: f64,
    #[serde(default = "default_slope_max")]
    pub slope_max: f64,
    /// Defaults to `polynomials`.
    #[serde(default)]
    pub observables: Vec<String>,
}

fn default_slope_min() -> f64 {
    -2.6
}

fn default_slope_max() -> f64 {
    -1.4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSection {
    pub k_list: Vec<usize>,
    /// Draws of the model per scale, forming the point cloud.
    pub points: usize,
    /// Generator sets `F`, each a list like `["f1.g0", "f2.g0"]`.
    pub families: Vec<Vec<String>>,
    pub eps: Vec<f64>,
    /// Observables for the empirical concentration function; none skips it.
    #[serde(default)]
    pub observables: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub k: usize,
    pub count: usize,
}

/// A config that passed validation, with everything parsed.
#[derive(Clone, Debug)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub polys: Vec<NcPolynomial>,
    pub oracle: MomentOracle,
    pub concentration: Option<(ConcentrationSettings, Vec<NcPolynomial>)>,
    pub cover: Option<CoverPlan>,
}

#[derive(Clone, Debug)]
pub struct CoverPlan {
    pub k_list: Vec<usize>,
    pub points: usize,
    pub families: Vec<BTreeSet<GenId>>,
    pub eps: Vec<f64>,
    pub observables: Vec<NcPolynomial>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| ConfigError::new("<document>", e.message()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "<document>".to_string() } else { path };
            ConfigError::new(path, e.into_inner().message())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(self) -> Result<Validated, ConfigError> {
        if self.name.trim().is_empty() {
            return Err(ConfigError::new("name", "must not be empty"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(ConfigError::new("output_dir", "must not be empty"));
        }
        self.model.validate().map_err(|e| ConfigError::new("model", e))?;
        let oracle = self
            .model
            .oracle()
            .map_err(|e| ConfigError::new("model", e))?
            .with_degree_cap(self.oracle.degree_cap);
        if self.oracle.table_max_len > 8 {
            return Err(ConfigError::new("oracle.table_max_len", "at most 8"));
        }
        let known: BTreeSet<GenId> = self.model.generators().into_iter().collect();
        let cap = self.oracle.degree_cap;

        if self.polynomials.is_empty() {
            return Err(ConfigError::new("polynomials", "at least one polynomial is needed"));
        }
        let polys = parse_list(&self.polynomials, "polynomials", &known, cap)?;

        let d = self.model.amalgam.clone().unwrap_or_else(AtomicAlgebra::scalar);
        check_scales(&self.schedule.k_list, "schedule.k_list", &d)?;
        if self.schedule.samples < 2 {
            return Err(ConfigError::new("schedule.samples", "at least 2 samples are needed"));
        }

        let t = &self.tolerances;
        for (name, v) in [
            ("moment_abs", t.moment_abs),
            ("eap", t.eap),
            ("collapse_abs", t.collapse_abs),
            ("collapse_zero", t.collapse_zero),
            ("op_norm_rel", t.op_norm_rel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(format!("tolerances.{name}"), "must be positive"));
            }
        }

        let concentration = match &self.concentration {
            None => None,
            Some(c) => {
                check_scales(&c.k_list, "concentration.k_list", &d)?;
                if c.k_list.len() < 3 {
                    return Err(ConfigError::new("concentration.k_list", "at least 3 scales"));
                }
                if c.samples < 50 {
                    return Err(ConfigError::new("concentration.samples", "at least 50 samples"));
                }
                check_positive(&c.eps, "concentration.eps")?;
                if !(c.slope_min < c.slope_max) {
                    return Err(ConfigError::new(
                        "concentration.slope_min",
                        "must be below slope_max",
                    ));
                }
                let obs = parse_list(&c.observables, "concentration.observables", &known, cap)?;
                let settings = ConcentrationSettings {
                    k_list: c.k_list.clone(),
                    samples: c.samples,
                    eps: c.eps.clone(),
                    slope_min: c.slope_min,
                    slope_max: c.slope_max,
                };
                Some((settings, obs))
            }
        };

        let cover = match &self.cover {
            None => None,
            Some(c) => {
                check_scales(&c.k_list, "cover.k_list", &d)?;
                if c.points == 0 {
                    return Err(ConfigError::new("cover.points", "at least one point"));
                }
                if c.families.is_empty() {
                    return Err(ConfigError::new("cover.families", "at least one family"));
                }
                let mut families = Vec::new();
                for (i, fam) in c.families.iter().enumerate() {
                    let path = format!("cover.families[{i}]");
                    if fam.is_empty() {
                        return Err(ConfigError::new(path, "must not be empty"));
                    }
                    let mut set = BTreeSet::new();
                    for (j, g) in fam.iter().enumerate() {
                        let w: Word = g
                            .parse()
                            .map_err(|e| ConfigError::new(format!("{path}[{j}]"), e))?;
                        let &[id] = w.letters() else {
                            return Err(ConfigError::new(
                                format!("{path}[{j}]"),
                                format!("expected a single generator, got {g:?}"),
                            ));
                        };
                        if !known.contains(&id) {
                            return Err(ConfigError::new(
                                format!("{path}[{j}]"),
                                format!("the model has no generator {id}"),
                            ));
                        }
                        set.insert(id);
                    }
                    families.push(set);
                }
                if c.eps.is_empty() {
                    return Err(ConfigError::new("cover.eps", "at least one radius"));
                }
                check_positive(&c.eps, "cover.eps")?;
                let observables = parse_list(&c.observables, "cover.observables", &known, cap)?;
                Some(CoverPlan {
                    k_list: c.k_list.clone(),
                    points: c.points,
                    families,
                    eps: c.eps.clone(),
                    observables,
                })
            }
        };

        if let Some(s) = &self.sample {
            block_plan(&d, s.k).map_err(|e| ConfigError::new("sample.k", e))?;
            if s.count == 0 {
                return Err(ConfigError::new("sample.count", "at least one draw"));
            }
        }

        Ok(Validated {
            config: self,
            polys,
            oracle,
            concentration,
            cover,
        })
    }
}

impl Validated {
    pub fn suite(&self) -> SuiteSettings {
        let (concentration, observables) = match &self.concentration {
            Some((s, obs)) => (Some(s.clone()), obs.clone()),
            None => (None, Vec::new()),
        };
        SuiteSettings {
            polys: self.polys.clone(),
            k_list: self.config.schedule.k_list.clone(),
            samples: self.config.schedule.samples,
            observables,
            concentration,
            tolerances: self.config.tolerances,
        }
    }
}

fn parse_list(
    items: &[String],
    path: &str,
    known: &BTreeSet<GenId>,
    cap: usize,
) -> Result<Vec<NcPolynomial>, ConfigError> {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let at = format!("{path}[{i}]");
            let p = parse_polynomial(s).map_err(|e| ConfigError::new(&at, e))?;
            if let Some(g) = p.generators().into_iter().find(|g| !known.contains(g)) {
                return Err(ConfigError::new(at, format!("the model has no generator {g}")));
            }
            // p^* p is evaluated by some checks
            if 2 * p.degree() > cap {
                return Err(ConfigError::new(
                    at,
                    format!("degree {} exceeds half the degree cap {cap}", p.degree()),
                ));
            }
            Ok(p)
        })
        .collect()
}

fn check_scales(k_list: &[usize], path: &str, d: &AtomicAlgebra) -> Result<(), ConfigError> {
    if k_list.is_empty() {
        return Err(ConfigError::new(path, "at least one scale"));
    }
    for (i, &k) in k_list.iter().enumerate() {
        block_plan(d, k).map_err(|e| ConfigError::new(format!("{path}[{i}]"), e))?;
    }
    Ok(())
}

fn check_positive(values: &[f64], path: &str) -> Result<(), ConfigError> {
    for (i, v) in values.iter().enumerate() {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(ConfigError::new(format!("{path}[{i}]"), "must be positive"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
name = "basic"
seed = 7
polynomials = ["f1.g0 f2.g0", "f1.g0^4"]

[model.factor1]
bound = 2.5
recipe = { kind = "seeded_gue", count = 1, seed = 1 }

[model.factor2]
bound = 1.0
recipe = { kind = "quantile_diagonal", law = [[-1.0, 0.5], [1.0, 0.5]] }

[schedule]
k_list = [16]
samples = 8
"#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::parse(BASIC).unwrap();
        assert_eq!(c.output_dir, PathBuf::from("out"));
        assert_eq!(c.tolerances, Tolerances::default());
        let v = c.validate().unwrap();
        assert_eq!(v.polys.len(), 2);
    }

    #[test]
    fn round_trip_is_idempotent() {
        let c = ExperimentConfig::parse(BASIC).unwrap();
        let again = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_toml(), c.to_toml());
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let text = BASIC.replace("samples = 8", "samples = 8\nsample_count = 3");
        let e = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(e.path, "schedule.sample_count");
        assert!(e.message.contains("sample_count"), "{e}");
    }

    #[test]
    fn bad_weights_name_the_recipe() {
        let text = BASIC.replace("[1.0, 0.5]]", "[1.0, 0.4]]");
        let e = ExperimentConfig::parse(&text).unwrap_err();
        assert!(e.path.starts_with("model.factor2.recipe"), "{e}");
        assert!(e.message.contains("0.9"), "{e}");
    }

    #[test]
    fn semantic_errors_carry_paths() {
        let text = BASIC.replace("\"f1.g0^4\"", "\"f3.g0\"");
        let e = ExperimentConfig::parse(&text).unwrap().validate().unwrap_err();
        assert_eq!(e.path, "polynomials[1]");

        let text = BASIC.replace("samples = 8", "samples = 1");
        let e = ExperimentConfig::parse(&text).unwrap().validate().unwrap_err();
        assert_eq!(e.path, "schedule.samples");

        let text = BASIC.replace("k_list = [16]", "k_list = [16, 0]");
        let e = ExperimentConfig::parse(&text).unwrap().validate().unwrap_err();
        assert_eq!(e.path, "schedule.k_list[1]");

        let text = BASIC.replace("bound = 1.0", "bound = -1.0");
        let e = ExperimentConfig::parse(&text).unwrap().validate().unwrap_err();
        assert_eq!(e.path, "model");
    }
}
