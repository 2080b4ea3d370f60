//! Declarative run configuration (TOML). Unknown keys are rejected so typos
//! fail loudly; every knob has the module default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::partition::{DEFAULT_EXPANSION, DEFAULT_VISIBILITY_THRESHOLD};
use crate::projection::DEFAULT_DILATION;
use crate::rasterizer::RenderOptions;
use crate::{sc, Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Spatial resolution, world units per pixel. Required by rendering when
    /// not given on the command line.
    pub sx: Option<f64>,
    pub sy: Option<f64>,
    /// Explicit raster dimensions override the field-derived ones.
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub background: [f64; 3],
    pub sh_degree: usize,
    pub tile_size: usize,
    pub cutoff_sigma: f64,
    pub alpha_cap: f64,
    pub skip_alpha: f64,
    pub stop_transmittance: f64,
    pub dilation: f64,
    pub partition_m: usize,
    pub partition_n: usize,
    pub expansion: f64,
    pub visibility_threshold: f64,
    /// Render worker threads; 0 means all cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sx: None,
            sy: None,
            width: None,
            height: None,
            background: [0.0, 0.0, 0.0],
            sh_degree: 3,
            tile_size: 16,
            cutoff_sigma: 3.0,
            alpha_cap: 0.99,
            skip_alpha: 1.0 / 255.0,
            stop_transmittance: 1e-4,
            dilation: DEFAULT_DILATION,
            partition_m: 2,
            partition_n: 2,
            expansion: DEFAULT_EXPANSION,
            visibility_threshold: DEFAULT_VISIBILITY_THRESHOLD,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("`{name}` must be positive, got {v}")))
            }
        };
        if let Some(sx) = self.sx {
            positive("sx", sx)?;
        }
        if let Some(sy) = self.sy {
            positive("sy", sy)?;
        }
        positive("cutoff_sigma", self.cutoff_sigma)?;
        positive("alpha_cap", self.alpha_cap)?;
        positive("stop_transmittance", self.stop_transmittance)?;
        if self.alpha_cap > 1.0 {
            return Err(Error::Config("`alpha_cap` must not exceed 1".into()));
        }
        if self.skip_alpha < 0.0 {
            return Err(Error::Config("`skip_alpha` must be non-negative".into()));
        }
        if self.dilation < 0.0 {
            return Err(Error::Config("`dilation` must be non-negative".into()));
        }
        if self.expansion < 0.0 {
            return Err(Error::Config("`expansion` must be non-negative".into()));
        }
        if self.tile_size == 0 {
            return Err(Error::Config("`tile_size` must be positive".into()));
        }
        if self.sh_degree > crate::harmonics::MAX_DEGREE {
            return Err(Error::Config(format!(
                "`sh_degree` must be at most {}",
                crate::harmonics::MAX_DEGREE
            )));
        }
        if self.partition_m == 0 || self.partition_n == 0 {
            return Err(Error::Config("partition grid must be at least 1x1".into()));
        }
        for (i, v) in self.background.iter().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::Config(format!(
                    "`background[{i}]` must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn render_options<T: Scalar>(&self) -> RenderOptions<T> {
        RenderOptions {
            tile_size: self.tile_size,
            cutoff_sigma: sc(self.cutoff_sigma),
            alpha_cap: sc(self.alpha_cap),
            skip_alpha: sc(self.skip_alpha),
            stop_transmittance: sc(self.stop_transmittance),
            dilation: sc(self.dilation),
            sh_degree: self.sh_degree,
        }
    }

    pub fn background<T: Scalar>(&self) -> [T; 3] {
        [
            sc(self.background[0]),
            sc(self.background[1]),
            sc(self.background[2]),
        ]
    }
}

/// Parse and validate a configuration document.
pub fn read_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config(&text)
}

pub(crate) fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        let config = parse_config("").unwrap();
        assert_eq!(config, RunConfig::default());
    }

    #[test]
    fn overrides_propagate() {
        let config = parse_config("sx = 0.25\ntile_size = 32\n").unwrap();
        assert_eq!(config.sx, Some(0.25));
        assert_eq!(config.tile_size, 32);
        let opts = config.render_options::<f64>();
        assert_eq!(opts.tile_size, 32);
    }

    #[test]
    fn negative_resolution_is_rejected() {
        let err = parse_config("sx = -0.1\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("resolution = 0.1\n").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("resolution"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let err = parse_config("tile_size = \"big\"\n").unwrap_err();
        match err {
            Error::Config(msg) => assert!(
                msg.contains("tile_size") || msg.contains("integer"),
                "{msg}"
            ),
            other => panic!("unexpected {other:?}"),
        }
    }
}
