//! Library surface of the `warp` command-line tool, split out so the
//! commands can be driven directly from integration tests.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use warp_core::error::{Result, WarpError};

use config::ExperimentConfig;

/// Resolve a config from `--config` or `--preset`, applying overrides.
pub fn resolve_config(
    config_path: Option<&PathBuf>,
    preset_name: Option<&str>,
    seed: Option<u64>,
    out: Option<&PathBuf>,
) -> Result<ExperimentConfig> {
    let text = match (config_path, preset_name) {
        (Some(path), None) => std::fs::read_to_string(path)?,
        (None, Some(name)) => config::preset(name).ok_or_else(|| {
            WarpError::contract(format!(
                "unknown preset {name:?}; available: {}",
                config::preset_names().join(", ")
            ))
        })?,
        _ => {
            return Err(WarpError::contract(
                "exactly one of --config or --preset is required",
            ))
        }
    };
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = seed {
        cfg.dataset.seed = s;
        cfg.train.seed = s;
    }
    if let Some(dir) = out {
        cfg.out_dir = dir.clone();
    }
    Ok(cfg)
}

/// Process exit code for an error: 1 I/O, 2 validation, 3 divergence.
pub fn exit_code(err: &WarpError) -> i32 {
    match err {
        WarpError::Io(_) | WarpError::Format(_) => 1,
        WarpError::Divergence { .. }
        | WarpError::RootOverflow { .. }
        | WarpError::Integration { .. } => 3,
        _ => 2,
    }
}
