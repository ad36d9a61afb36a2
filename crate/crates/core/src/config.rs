//! Run configuration: physical defaults, randomization ranges, noise and
//! training settings, loadable from a TOML file with every field
//! optional.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dataset::NoiseConfig;
use crate::defects::RandomizationRanges;
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::physics::{PlateSpec, SpatialGrid};

/// Default plate: b = 5 mm, c_T = 3200 m/s, fundamental mode.
pub fn default_plate() -> PlateSpec {
    PlateSpec { half_thickness: 0.005, shear_speed: 3200.0, mode_index: 0 }
}

/// Default detection range: 100 mm sampled on 100 points.
pub fn default_grid() -> SpatialGrid {
    SpatialGrid { origin: 0.0, spacing: 0.1 / 99.0, point_count: 100 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub plate: PlateSpec,
    pub grid: SpatialGrid,
    pub ranges: RandomizationRanges,
    pub noise: NoiseConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            plate: default_plate(),
            grid: default_grid(),
            ranges: RandomizationRanges::default(),
            noise: NoiseConfig::default(),
            train: TrainConfig::default(),
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        PlateSpec::new(self.plate.half_thickness, self.plate.shear_speed, self.plate.mode_index)?;
        SpatialGrid::new(self.grid.origin, self.grid.spacing, self.grid.point_count)?;
        self.ranges.validate()?;
        self.train.validate()?;
        if !self.noise.snr_db.is_finite() {
            return Err(Error::InvalidParameter("noise snr_db must be finite".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
