use std::collections::BTreeMap;
use std::path::Path;

use crate::config::KeyValues;
use crate::cyto_roi::CytoParams;
use crate::dataset::{SplitName, DEFAULT_SCALE_UM_PER_PX};
use crate::error::{Error, Result};
use crate::watershed::{default_params, finetuned_params, WatershedParams};

/// Keys understood in a run config file besides the detection and cell
/// parameters.
pub const RUN_KEYS: [&str; 4] = ["params", "split", "seed", "scale_um_per_px"];

/// Flag values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub params: Option<String>,
    pub split: Option<String>,
    pub seed: Option<u64>,
    pub scale: Option<f64>,
    pub radius: Option<f64>,
    pub scale_factor: Option<f64>,
    pub nms: Option<f64>,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `default`, `finetuned` or `file:<path>`.
    pub params_source: String,
    pub watershed: WatershedParams,
    pub cyto: CytoParams,
    /// `None` keeps every patch.
    pub split: Option<SplitName>,
    pub seed: u64,
    /// µm per pixel of the input images.
    pub scale: f64,
}

fn base_params(source: &str) -> Result<WatershedParams> {
    match source {
        "default" => Ok(default_params()),
        "finetuned" => Ok(finetuned_params()),
        other => match other.strip_prefix("file:") {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidParam(format!("cannot read parameter file {path}: {e}"))
                })?;
                WatershedParams::from_config_text(&text)
            }
            None => Err(Error::InvalidParam(format!(
                "--params expects default, finetuned or file:<path>, got {other:?}"
            ))),
        },
    }
}

impl RunConfig {
    /// Precedence: flags, then the config file, then the chosen preset.
    pub fn resolve(config_file: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let kv = match config_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidParam(format!("cannot read config {}: {e}", path.display()))
                })?;
                KeyValues::parse(&text)?
            }
            None => KeyValues::default(),
        };
        let mut allowed: Vec<&str> = RUN_KEYS.to_vec();
        allowed.extend(WatershedParams::config_keys());
        allowed.extend(CytoParams::config_keys());
        kv.check_keys(&allowed)?;

        let params_source = flags
            .params
            .clone()
            .or_else(|| kv.get_str("params").map(str::to_string))
            .unwrap_or_else(|| "default".to_string());
        let mut watershed = WatershedParams::from_config(&kv, base_params(&params_source)?)?;
        if let Some(r) = flags.radius {
            watershed.expansion_radius = r;
        }
        watershed.validate()?;

        let mut cyto = CytoParams::from_config(&kv, CytoParams::default())?;
        if let Some(f) = flags.scale_factor {
            cyto.scale_factor = f;
        }
        if let Some(t) = flags.nms {
            cyto.nms_iou_threshold = t;
        }
        cyto.validate()?;

        let split_text = flags
            .split
            .clone()
            .or_else(|| kv.get_str("split").map(str::to_string))
            .unwrap_or_else(|| "all".to_string());
        let split = match split_text.as_str() {
            "all" => None,
            s => Some(s.parse::<SplitName>()?),
        };
        let seed = match flags.seed {
            Some(s) => s,
            None => kv.get("seed")?.unwrap_or(0),
        };
        let scale = match flags.scale {
            Some(s) => s,
            None => kv.get("scale_um_per_px")?.unwrap_or(DEFAULT_SCALE_UM_PER_PX),
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParam(format!("scale must be positive, got {scale}")));
        }
        Ok(Self {
            params_source,
            watershed,
            cyto,
            split,
            seed,
            scale,
        })
    }

    /// Flat snapshot for manifests; every value that affects outputs.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let w = &self.watershed;
        let c = &self.cyto;
        let pairs = [
            ("params", self.params_source.clone()),
            (
                "split",
                self.split.map_or("all".to_string(), |s| s.to_string()),
            ),
            ("seed", self.seed.to_string()),
            ("scale_um_per_px", self.scale.to_string()),
            ("background_radius_um", w.background_radius.to_string()),
            ("sigma_um", w.sigma.to_string()),
            ("min_area_um2", w.min_area.to_string()),
            ("max_area_um2", w.max_area.to_string()),
            ("intensity_threshold", w.intensity_threshold.to_string()),
            ("expansion_radius_um", w.expansion_radius.to_string()),
            ("scale_factor", c.scale_factor.to_string()),
            ("nms_iou_threshold", c.nms_iou_threshold.to_string()),
            ("tissue_threshold", c.tissue_threshold.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
