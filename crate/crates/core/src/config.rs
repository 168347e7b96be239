use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ConfigError, FieldError};
use crate::filter::FilterKind;
use crate::rng::CountMode;
use crate::topics::MessageId;

/// Every parameter of one simulation run. Defaults reproduce the reference
/// setup: 10,000 agents, 100 topics over 10,000 terms, 100 iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_agents: usize,
    pub nucleus_size: usize,
    /// Edges each new node attaches with (minimum friends per agent).
    pub min_friends: usize,
    pub num_topics: usize,
    pub vocabulary_size: usize,
    /// Symmetric Dirichlet prior of the agents' topic distributions.
    pub alpha: f64,
    /// Symmetric Dirichlet prior of the topics' term distributions.
    pub beta: f64,
    pub message_length: usize,
    /// Population mean of the per-agent message rate.
    pub expected_messages: f64,
    pub core_coverage: f64,
    pub odds_threshold: f64,
    pub cutoff_b: usize,
    pub window_h: usize,
    pub iterations: usize,
    pub p_core: f64,
    pub p_peripheral: f64,
    pub filter: FilterKind,
    pub count_mode: CountMode,
    pub smoothing_terms: f64,
    pub smoothing_authors: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_agents: 10_000,
            nucleus_size: 10,
            min_friends: 5,
            num_topics: 100,
            vocabulary_size: 10_000,
            alpha: 0.01,
            beta: 0.001,
            message_length: 10,
            expected_messages: 2.42,
            core_coverage: 0.8,
            odds_threshold: 2.0,
            cutoff_b: 20,
            window_h: 10,
            iterations: 100,
            p_core: 0.5,
            p_peripheral: 0.5,
            filter: FilterKind::Content,
            count_mode: CountMode::Poisson,
            smoothing_terms: 1.0,
            smoothing_authors: 1.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Parses a JSON config. Blank input yields the defaults; unknown keys are
    /// rejected.
    pub fn from_json_str(text: &str) -> Result<SimConfig, ConfigError> {
        if text.trim().is_empty() {
            return Ok(SimConfig::default());
        }
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = unknown_field_name(&msg).unwrap_or_else(|| "config".to_string());
            ConfigError::single(field, msg)
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Stable digest of the resolved configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, field: &str, message: String| {
            if !ok {
                errors.push(FieldError {
                    field: field.to_string(),
                    message,
                });
            }
        };

        check(
            self.num_agents >= 2 && self.num_agents as u64 <= MessageId::MAX_AUTHOR + 1,
            "num_agents",
            format!("must be in [2, 2^28], got {}", self.num_agents),
        );
        check(
            self.nucleus_size >= 2,
            "nucleus_size",
            format!("must be at least 2, got {}", self.nucleus_size),
        );
        check(
            self.nucleus_size <= self.num_agents,
            "nucleus_size",
            format!(
                "must not exceed num_agents ({}), got {}",
                self.num_agents, self.nucleus_size
            ),
        );
        check(
            self.min_friends >= 1,
            "min_friends",
            format!("must be at least 1, got {}", self.min_friends),
        );
        check(
            self.min_friends <= self.nucleus_size,
            "min_friends",
            format!(
                "must not exceed nucleus_size ({}), got {}",
                self.nucleus_size, self.min_friends
            ),
        );
        check(
            self.num_topics >= 2,
            "num_topics",
            format!("must be at least 2, got {}", self.num_topics),
        );
        check(
            self.vocabulary_size >= self.num_topics && self.vocabulary_size <= u32::MAX as usize,
            "vocabulary_size",
            format!(
                "must be at least num_topics ({}), got {}",
                self.num_topics, self.vocabulary_size
            ),
        );
        check(
            positive(self.alpha),
            "alpha",
            format!("must be positive, got {}", self.alpha),
        );
        check(
            positive(self.beta),
            "beta",
            format!("must be positive, got {}", self.beta),
        );
        check(
            self.message_length >= 1,
            "message_length",
            format!("must be at least 1, got {}", self.message_length),
        );
        check(
            positive(self.expected_messages),
            "expected_messages",
            format!("must be positive, got {}", self.expected_messages),
        );
        check(
            self.core_coverage > 0.0 && self.core_coverage <= 1.0,
            "core_coverage",
            format!("must be in (0, 1], got {}", self.core_coverage),
        );
        check(
            positive(self.odds_threshold),
            "odds_threshold",
            format!("must be positive, got {}", self.odds_threshold),
        );
        check(
            self.cutoff_b >= 1,
            "cutoff_b",
            format!("must be at least 1, got {}", self.cutoff_b),
        );
        check(
            self.window_h >= 1,
            "window_h",
            format!("must be at least 1, got {}", self.window_h),
        );
        check(
            self.iterations >= 1 && self.iterations as u64 <= MessageId::MAX_ITERATION,
            "iterations",
            format!("must be in [1, 2^20 - 1], got {}", self.iterations),
        );
        check(
            probability(self.p_core),
            "p_core",
            format!("must be in [0, 1], got {}", self.p_core),
        );
        check(
            probability(self.p_peripheral),
            "p_peripheral",
            format!("must be in [0, 1], got {}", self.p_peripheral),
        );
        check(
            positive(self.smoothing_terms),
            "smoothing_terms",
            format!("must be positive, got {}", self.smoothing_terms),
        );
        check(
            positive(self.smoothing_authors),
            "smoothing_authors",
            format!("must be positive, got {}", self.smoothing_authors),
        );

        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { fields: errors })
        }
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn probability(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn unknown_field_name(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_config_is_reference_setup() {
        let c = SimConfig::from_json_str("  \n").unwrap();
        assert_eq!(c, SimConfig::default());
        assert_eq!(c.num_agents, 10_000);
        assert_eq!(c.min_friends, 5);
        assert_eq!(c.num_topics, 100);
        assert_eq!(c.vocabulary_size, 10_000);
        assert_eq!(c.message_length, 10);
        assert_eq!(c.expected_messages, 2.42);
        assert_eq!(c.core_coverage, 0.8);
        assert_eq!(c.odds_threshold, 2.0);
        assert_eq!(c.cutoff_b, 20);
        assert_eq!(c.alpha, 0.01);
        assert_eq!(c.beta, 0.001);
        assert_eq!(c.iterations, 100);
        assert_eq!(c.window_h, 10);
        c.validate().unwrap();
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c = SimConfig::from_json_str(r#"{"num_agents": 500, "filter": "author"}"#).unwrap();
        assert_eq!(c.num_agents, 500);
        assert_eq!(c.filter, FilterKind::Author);
        assert_eq!(c.cutoff_b, 20);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = SimConfig::from_json_str(r#"{"num_agent": 5}"#).unwrap_err();
        assert!(err.mentions("num_agent"), "{err}");
    }

    #[test]
    fn invalid_values_are_named() {
        let c = SimConfig {
            p_core: 1.3,
            odds_threshold: -1.0,
            ..SimConfig::default()
        };
        let err = c.validate().unwrap_err();
        assert!(err.mentions("p_core"));
        assert!(err.mentions("odds_threshold"));
        assert_eq!(err.fields.len(), 2);
    }

    #[test]
    fn zero_iterations_rejected() {
        let c = SimConfig {
            iterations: 0,
            ..SimConfig::default()
        };
        assert!(c.validate().unwrap_err().mentions("iterations"));
    }

    #[test]
    fn enum_values_parse_from_strings() {
        let c = SimConfig::from_json_str(r#"{"count_mode": "discretized-laplace", "filter": "passthrough"}"#).unwrap();
        assert_eq!(c.count_mode, CountMode::DiscretizedLaplace);
        assert_eq!(c.filter, FilterKind::Passthrough);
        assert!(SimConfig::from_json_str(r#"{"filter": "bm25"}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = SimConfig::default();
        let b = SimConfig {
            seed: 1,
            ..SimConfig::default()
        };
        assert_eq!(a.config_hash(), SimConfig::default().config_hash());
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }
}
