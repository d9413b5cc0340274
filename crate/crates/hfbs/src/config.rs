//! Plant configuration files (TOML).
//!
//! Either three explicit transfer functions sharing `ts`:
//!
//! ```toml
//! ts = 0.001
//! [gxx]
//! b = [0.5, 0.0]
//! a = [1.0, -0.5]
//! # [gyy], [gxtheta] likewise
//! ```
//!
//! or a `[synthetic]` table with the fallback resonance parameters.

use std::path::Path;

use hfbs_core::sysmodel::{CouplingMode, DiscreteTransferFunction, HFramePlant};
use hfbs_core::trajgen::{synthetic_plant, SyntheticPlantParams};
use serde::Deserialize;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TfSpec {
    b: Vec<f64>,
    a: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SyntheticSpec {
    resonance_x: f64,
    resonance_y: f64,
    resonance_rack: f64,
    damping: f64,
    rack_gain: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ModeSpec {
    Nonlinear,
    Lpv,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantFile {
    ts: f64,
    coupling_mode: Option<ModeSpec>,
    gxx: Option<TfSpec>,
    gyy: Option<TfSpec>,
    gxtheta: Option<TfSpec>,
    synthetic: Option<SyntheticSpec>,
}

/// A validated plant plus its pole-magnitude report.
#[derive(Debug, Clone)]
pub struct LoadedPlant {
    pub plant: HFramePlant,
    /// `(name, max pole magnitude)` for gxx, gyy, gxtheta.
    pub poles: [(&'static str, f64); 3],
    pub synthetic: bool,
}

impl LoadedPlant {
    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|(_, r)| *r < 1.0)
    }

    /// One line per transfer function, e.g. `gxx max|pole| = 0.9876 (stable)`.
    pub fn pole_report(&self) -> String {
        self.poles
            .iter()
            .map(|(name, r)| format!("{name} max|pole| = {r:.6} ({})", if *r < 1.0 { "stable" } else { "UNSTABLE" }))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Refuse unstable plants unless explicitly allowed; warn when allowed.
    pub fn require_stable(&self, allow_unstable: bool) -> AppResult<()> {
        if self.is_stable() {
            return Ok(());
        }
        let report = self.pole_report();
        if allow_unstable {
            eprintln!("warning: plant is unstable; continuing because --allow-unstable was given\n{report}");
            Ok(())
        } else {
            Err(AppError::Unstable(format!(
                "plant is unstable (pass --allow-unstable to run anyway)\n{report}"
            )))
        }
    }
}

fn build_tf(spec: &TfSpec, ts: f64) -> hfbs_core::Result<DiscreteTransferFunction> {
    DiscreteTransferFunction::new(spec.b.clone(), spec.a.clone(), ts)
}

/// Parse a plant config; `origin` names the source in error messages.
pub fn parse_plant(text: &str, origin: &Path) -> AppResult<LoadedPlant> {
    let file: PlantFile = toml::from_str(text).map_err(|e| AppError::data(origin, e.message()))?;
    let mode = match file.coupling_mode {
        Some(ModeSpec::Lpv) => CouplingMode::Lpv,
        _ => CouplingMode::Nonlinear,
    };
    let tfs = (&file.gxx, &file.gyy, &file.gxtheta);
    let (plant, synthetic) = match (&file.synthetic, tfs) {
        (Some(s), (None, None, None)) => {
            let params = SyntheticPlantParams {
                resonance_x: s.resonance_x,
                resonance_y: s.resonance_y,
                resonance_rack: s.resonance_rack,
                damping: s.damping,
                rack_gain: s.rack_gain,
                ts: file.ts,
            };
            (synthetic_plant(&params)?, true)
        }
        (None, (Some(x), Some(y), Some(t))) => {
            let wrap = |name: &str, e: hfbs_core::Error| AppError::data(origin, format!("[{name}]: {e}"));
            let gxx = build_tf(x, file.ts).map_err(|e| wrap("gxx", e))?;
            let gyy = build_tf(y, file.ts).map_err(|e| wrap("gyy", e))?;
            let gxt = build_tf(t, file.ts).map_err(|e| wrap("gxtheta", e))?;
            (HFramePlant::new(gxx, gyy, gxt, CouplingMode::Nonlinear)?, false)
        }
        _ => {
            return Err(AppError::data(
                origin,
                "expected either a [synthetic] table or all of [gxx], [gyy], [gxtheta]",
            ))
        }
    };
    let plant = plant.with_mode(mode);
    Ok(LoadedPlant {
        poles: plant.pole_report(),
        plant,
        synthetic,
    })
}

pub fn load_plant(path: &Path) -> AppResult<LoadedPlant> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::data(path, e))?;
    parse_plant(&text, path)
}
