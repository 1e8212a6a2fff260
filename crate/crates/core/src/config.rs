//! Run configuration and manifests.
//!
//! Configuration files are flat TOML with units in the key names, e.g.
//!
//! ```toml
//! arena = 2
//! usv_speed_mps = 1.5
//! roi_frac_x = 0.25
//! ```
//!
//! Keys left out take the calibrated baseline value. A resolved
//! [`RunConfig`] has every key set and, together with the seed list, fully
//! determines a batch; [`RunManifest`] records both.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arena::{arena_source, build_arena, ArenaError, PursuitParams};
use crate::controller::{ControllerConfig, ControllerError};
use crate::geometry::{EllipseRoi, FrameSpec, GeometryError, ROI_FRACTION_DEFAULT};
use crate::protocol::DEFAULT_KEEPALIVE_S;
use crate::sim::{
    CameraModel, SimError, UavPose, DEFAULT_ALTITUDE_M, DEFAULT_DT_S, DEFAULT_HFOV_DEG,
};
use crate::trial::{
    nominal_duration, seed_list, TrialConfig, TrialError, BASELINE_JITTER_M, BASELINE_USV_SPEED_MPS,
};

pub const DEFAULT_ARENA: u32 = 1;
pub const DEFAULT_TRIALS: usize = 20;
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid TOML in {path}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("usv_speed_mps must be positive to derive a duration; set duration_s")]
    NoDuration,
    #[error("unsupported manifest version {0}")]
    ManifestVersion(u32),
    #[error("manifest lists {seeds} seeds for {trials} trials")]
    ManifestSeeds { trials: usize, seeds: usize },
    #[error(
        "arena {arena} fixture changed: manifest has sha256 {recorded}, this build has {current}"
    )]
    ArenaChanged {
        arena: u32,
        recorded: String,
        current: String,
    },
}

impl ConfigError {
    /// The error comes from the user's input rather than from the file system.
    pub fn is_usage(&self) -> bool {
        !matches!(self, ConfigError::Io { .. })
    }
}

/// Partial configuration: a config file, or command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub arena: Option<u32>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub dt_s: Option<f64>,
    pub usv_speed_mps: Option<f64>,
    pub jitter_m: Option<f64>,
    pub roi_frac_x: Option<f64>,
    pub roi_frac_y: Option<f64>,
    pub rate_rad_s: Option<f64>,
    pub fov_deg: Option<f64>,
    pub altitude_m: Option<f64>,
    pub frame_width_px: Option<u32>,
    pub frame_height_px: Option<u32>,
    pub lookahead_m: Option<f64>,
    pub max_rudder_rad_s: Option<f64>,
    pub keepalive_s: Option<f64>,
}

impl ConfigOverrides {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(self, top: ConfigOverrides) -> ConfigOverrides {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigOverrides { $($f: top.$f.or(self.$f)),* } };
        }
        pick!(
            arena,
            trials,
            seed,
            duration_s,
            dt_s,
            usv_speed_mps,
            jitter_m,
            roi_frac_x,
            roi_frac_y,
            rate_rad_s,
            fov_deg,
            altitude_m,
            frame_width_px,
            frame_height_px,
            lookahead_m,
            max_rudder_rad_s,
            keepalive_s
        )
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub arena: u32,
    pub trials: usize,
    pub seed: u64,
    pub duration_s: f64,
    pub dt_s: f64,
    pub usv_speed_mps: f64,
    pub jitter_m: f64,
    pub roi_frac_x: f64,
    pub roi_frac_y: f64,
    pub rate_rad_s: f64,
    pub fov_deg: f64,
    pub altitude_m: f64,
    pub frame_width_px: u32,
    pub frame_height_px: u32,
    pub lookahead_m: f64,
    pub max_rudder_rad_s: f64,
    pub keepalive_s: f64,
}

impl RunConfig {
    /// Fills unset keys with baseline values and validates the result.
    pub fn resolve(o: ConfigOverrides) -> Result<Self, ConfigError> {
        let arena = o.arena.unwrap_or(DEFAULT_ARENA);
        let usv_speed_mps = o.usv_speed_mps.unwrap_or(BASELINE_USV_SPEED_MPS);
        let duration_s = match o.duration_s {
            Some(d) => d,
            None if usv_speed_mps > 0.0 => {
                nominal_duration(build_arena::<f64>(arena)?.length(), usv_speed_mps)
            }
            None => return Err(ConfigError::NoDuration),
        };
        let pursuit = PursuitParams::<f64>::default();
        let frame = FrameSpec::default();
        let cfg = RunConfig {
            arena,
            trials: o.trials.unwrap_or(DEFAULT_TRIALS),
            seed: o.seed.unwrap_or(0),
            duration_s,
            dt_s: o.dt_s.unwrap_or(DEFAULT_DT_S),
            usv_speed_mps,
            jitter_m: o.jitter_m.unwrap_or(BASELINE_JITTER_M),
            roi_frac_x: o.roi_frac_x.unwrap_or(ROI_FRACTION_DEFAULT),
            roi_frac_y: o.roi_frac_y.unwrap_or(ROI_FRACTION_DEFAULT),
            rate_rad_s: o.rate_rad_s.unwrap_or(crate::controller::HARDWARE_RATE_CAP),
            fov_deg: o.fov_deg.unwrap_or(DEFAULT_HFOV_DEG),
            altitude_m: o.altitude_m.unwrap_or(DEFAULT_ALTITUDE_M),
            frame_width_px: o.frame_width_px.unwrap_or(frame.width),
            frame_height_px: o.frame_height_px.unwrap_or(frame.height),
            lookahead_m: o.lookahead_m.unwrap_or(pursuit.lookahead),
            max_rudder_rad_s: o.max_rudder_rad_s.unwrap_or(pursuit.max_rudder_rate),
            keepalive_s: o.keepalive_s.unwrap_or(DEFAULT_KEEPALIVE_S),
        };
        if cfg.trials == 0 {
            return Err(ConfigError::NoTrials);
        }
        cfg.trial_config()?.validate()?;
        Ok(cfg)
    }

    pub fn frame(&self) -> Result<FrameSpec, ConfigError> {
        Ok(FrameSpec::new(self.frame_width_px, self.frame_height_px)?)
    }

    pub fn controller(&self) -> Result<ControllerConfig<f64>, ConfigError> {
        let roi = EllipseRoi::from_fractions(self.frame()?, self.roi_frac_x, self.roi_frac_y)?;
        Ok(ControllerConfig::new(self.rate_rad_s, roi)?)
    }

    /// Trial configuration for the base seed.
    pub fn trial_config(&self) -> Result<TrialConfig<f64>, ConfigError> {
        let mut tc = TrialConfig::baseline(self.arena)?;
        tc.usv_speed = self.usv_speed_mps;
        tc.duration = self.duration_s;
        tc.seed = self.seed;
        tc.jitter_amplitude = self.jitter_m;
        tc.controller = self.controller()?;
        tc.camera = CameraModel::new(self.frame()?, self.fov_deg.to_radians())?;
        tc.uav = UavPose::new(0.0, 0.0, self.altitude_m)?;
        tc.dt = self.dt_s;
        tc.pursuit = PursuitParams {
            lookahead: self.lookahead_m,
            max_rudder_rate: self.max_rudder_rad_s,
        };
        Ok(tc)
    }

    pub fn seeds(&self) -> Vec<u64> {
        seed_list(self.seed, self.trials)
    }
}

/// Hex sha256 of a built-in arena definition.
pub fn arena_digest(arena_id: u32) -> Result<String, ArenaError> {
    Ok(hex::encode(Sha256::digest(
        arena_source(arena_id)?.as_bytes(),
    )))
}

/// Everything needed to rerun a batch and get identical artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub arena_sha256: String,
    pub seeds: Vec<u64>,
    /// Artifact file names, relative to the manifest's directory.
    pub artifacts: Vec<String>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(config: RunConfig, artifacts: Vec<String>) -> Result<Self, ConfigError> {
        Ok(Self {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            arena_sha256: arena_digest(config.arena)?,
            seeds: config.seeds(),
            artifacts,
            config,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let m: RunManifest = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        m.check()?;
        Ok(m)
    }

    /// The manifest matches this build: same format, same arena fixture, and
    /// a seed list consistent with the configuration.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.manifest_version != MANIFEST_VERSION {
            return Err(ConfigError::ManifestVersion(self.manifest_version));
        }
        let current = arena_digest(self.config.arena)?;
        if current != self.arena_sha256 {
            return Err(ConfigError::ArenaChanged {
                arena: self.config.arena,
                recorded: self.arena_sha256.clone(),
                current,
            });
        }
        if self.seeds != self.config.seeds() {
            return Err(ConfigError::ManifestSeeds {
                trials: self.config.trials,
                seeds: self.seeds.len(),
            });
        }
        Ok(())
    }
}
