//! TOML configuration files.
//!
//! The schema mirrors [`SystemConfig`]: one table per section (`network`,
//! `geometry`, `arrays`, `channel`, `power`, `sensing`, `amplifier`,
//! `optimizer`, `gnn`), every key required, unknown keys rejected.
//! `configs/default.toml` holds the desk-scale defaults.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use maisac_core::config::SystemConfig;

use crate::{HarnessError, Result};

/// Parse and validate a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

/// Parse and validate configuration text; `origin` names it in diagnostics.
pub fn parse_config(text: &str, origin: &str) -> Result<SystemConfig> {
    let cfg: SystemConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .unwrap_or((0, 0));
        HarnessError::Parse {
            origin: origin.to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn dump_config(cfg: &SystemConfig) -> String {
    toml::to_string(cfg).expect("configuration serialises to TOML")
}

/// Short SHA-256 fingerprint of the canonical TOML form.
pub fn config_hash(cfg: &SystemConfig) -> String {
    Sha256::digest(dump_config(cfg).as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;
    use maisac_core::Error;

    const DEFAULT: &str = include_str!("../../../configs/default.toml");

    #[test]
    fn default_file_matches_builtin_defaults_and_round_trips() {
        let cfg = parse_config(DEFAULT, "default.toml").unwrap();
        assert_eq!(cfg, SystemConfig::default());
        let again = parse_config(&dump_config(&cfg), "dump").unwrap();
        assert_eq!(again, cfg);
        assert_eq!(dump_config(&again), dump_config(&cfg));
    }

    #[test]
    fn crowded_array_is_rejected_as_infeasible_layout() {
        let text = DEFAULT.replace("tx_antennas = 4", "tx_antennas = 16");
        match parse_config(&text, "crowded") {
            Err(HarnessError::Core(Error::InfeasibleLayout { count, needed, range, .. })) => {
                assert_eq!(count, 16);
                assert_eq!(needed, 7.5);
                assert_eq!(range, 4.0);
            }
            other => panic!("expected an infeasible layout, got {other:?}"),
        }
    }

    #[test]
    fn missing_crlb_budget_names_the_field() {
        let text = DEFAULT.replace("crlb_threshold = 0.05\n", "");
        let err = parse_config(&text, "partial").unwrap_err();
        assert!(err.to_string().contains("crlb_threshold"), "{err}");
        assert!(matches!(err, HarnessError::Parse { line, .. } if line > 0));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_reported() {
        let typo = DEFAULT.replace("noise_dbm", "noise_db");
        assert!(parse_config(&typo, "typo").unwrap_err().to_string().contains("noise_db"));
        let negative = DEFAULT.replace("max_power_w = 1.0", "max_power_w = -1.0");
        let err = parse_config(&negative, "negative").unwrap_err();
        assert!(err.to_string().contains("power.max_power_w"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = SystemConfig::default();
        let mut b = a.clone();
        b.amplifier.epsilon = 0.2;
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 16);
    }
}
