//! Experiment configuration: TOML file, flag overrides, validation.

use std::path::Path;

use qcloak::synthesis::{
    layered_cloak, CorePotential, CorePreset, GaugeMode, Grading, HomogenizationSpec, LayeredMedium, CLOAK_RADIUS,
    CORE_RADIUS,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    Acoustic,
    Schrodinger,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeKind {
    Interface,
    Mollified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GradingKind {
    Uniform,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    Unit,
    Doubled,
}

impl From<PresetKind> for CorePreset {
    fn from(p: PresetKind) -> Self {
        match p {
            PresetKind::Unit => CorePreset::Unit,
            PresetKind::Doubled => CorePreset::Doubled,
        }
    }
}

/// How layer counts follow the truncation radius in a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Refinement {
    /// `n(R) = n_layers (R_0 - 1) / (R - 1)`, rounded to even.
    Proportional,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub truncation_radius: f64,
    pub n_layers: usize,
    pub core_layers: usize,
    pub grading: GradingKind,
    pub grading_ratio: f64,
    pub core_preset: PresetKind,
    pub energy: f64,
    pub c_inn: f64,
    pub step_radius: f64,
    pub l_max: Option<usize>,
    pub mode: SolverMode,
    pub gauge: GaugeKind,
    pub mollifier_width: Option<f64>,
    pub scan_window: [f64; 2],
    pub scan_samples: usize,
    pub amplification_threshold: f64,
    pub radii: Vec<f64>,
    pub refinement: Refinement,
    pub segment_points: usize,
    pub slice_points: usize,
    pub eigen_tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            truncation_radius: 1.005,
            n_layers: 50,
            core_layers: 0,
            grading: GradingKind::Uniform,
            grading_ratio: 1.1,
            core_preset: PresetKind::Unit,
            energy: 0.5,
            c_inn: 0.0,
            step_radius: 0.9,
            l_max: None,
            mode: SolverMode::Both,
            gauge: GaugeKind::Interface,
            mollifier_width: None,
            scan_window: [0.4, 0.6],
            scan_samples: 401,
            amplification_threshold: 1e3,
            radii: vec![1.1, 1.05, 1.01, 1.005],
            refinement: Refinement::Proportional,
            segment_points: 600,
            slice_points: 200,
            eigen_tolerance: 1e-3,
        }
    }
}

/// Command-line overrides; every field left `None` keeps the file value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Truncation radius R.
    #[arg(long = "radius", global = true)]
    pub truncation_radius: Option<f64>,
    #[arg(long = "layers", global = true)]
    pub n_layers: Option<usize>,
    #[arg(long, global = true)]
    pub core_layers: Option<usize>,
    #[arg(long, value_enum, global = true)]
    pub grading: Option<GradingKind>,
    #[arg(long, global = true)]
    pub grading_ratio: Option<f64>,
    #[arg(long = "preset", value_enum, global = true)]
    pub core_preset: Option<PresetKind>,
    #[arg(long, global = true)]
    pub energy: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub c_inn: Option<f64>,
    #[arg(long, global = true)]
    pub step_radius: Option<f64>,
    #[arg(long, global = true)]
    pub l_max: Option<usize>,
    #[arg(long, value_enum, global = true)]
    pub mode: Option<SolverMode>,
    #[arg(long, value_enum, global = true)]
    pub gauge: Option<GaugeKind>,
    #[arg(long, global = true)]
    pub mollifier_width: Option<f64>,
    /// Energy window as `LO,HI`.
    #[arg(long, value_delimiter = ',', global = true)]
    pub scan_window: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub scan_samples: Option<usize>,
    #[arg(long, global = true)]
    pub amplification_threshold: Option<f64>,
    /// Truncation radii of a convergence study, comma separated.
    #[arg(long, value_delimiter = ',', global = true)]
    pub radii: Option<Vec<f64>>,
    #[arg(long, value_enum, global = true)]
    pub refinement: Option<Refinement>,
    #[arg(long, global = true)]
    pub segment_points: Option<usize>,
    #[arg(long, global = true)]
    pub slice_points: Option<usize>,
    #[arg(long, global = true)]
    pub eigen_tolerance: Option<f64>,
}

macro_rules! apply {
    ($cfg:ident, $ov:ident, $($field:ident),*) => {
        $(if let Some(v) = $ov.$field.clone() { $cfg.$field = v; })*
    };
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        apply!(
            self, o, truncation_radius, n_layers, core_layers, grading, grading_ratio, core_preset, energy, c_inn,
            step_radius, mode, gauge, scan_samples, amplification_threshold, radii, refinement, segment_points,
            slice_points, eigen_tolerance
        );
        if o.l_max.is_some() {
            self.l_max = o.l_max;
        }
        if o.mollifier_width.is_some() {
            self.mollifier_width = o.mollifier_width;
        }
        if let Some(w) = &o.scan_window {
            match w.as_slice() {
                &[lo, hi] => self.scan_window = [lo, hi],
                _ => {
                    return Err(ConfigError::Invalid {
                        field: "scan_window",
                        message: format!("expected LO,HI, got {} values", w.len()),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field, message: String| Err(ConfigError::Invalid { field, message });
        if !(self.step_radius > 0.0 && self.step_radius <= CORE_RADIUS) {
            return bad("step_radius", format!("{} must lie in (0, {CORE_RADIUS}]", self.step_radius));
        }
        check_radius("truncation_radius", self.truncation_radius)?;
        for &r in &self.radii {
            check_radius("radii", r)?;
        }
        if !(self.energy > 0.0 && self.energy.is_finite()) {
            return bad("energy", format!("{} must be positive", self.energy));
        }
        if !self.c_inn.is_finite() {
            return bad("c_inn", "must be finite".into());
        }
        if self.n_layers < 2 || self.n_layers % 2 != 0 {
            return bad("n_layers", format!("{} must be even and at least 2", self.n_layers));
        }
        let shell = self.n_layers.saturating_sub(self.core_layers);
        if shell < 2 || shell % 2 != 0 {
            return bad("core_layers", format!("{} leaves {shell} shell layers; need an even count >= 2", self.core_layers));
        }
        if self.grading == GradingKind::Geometric && !(self.grading_ratio > 0.0 && self.grading_ratio.is_finite()) {
            return bad("grading_ratio", format!("{} must be positive", self.grading_ratio));
        }
        let [lo, hi] = self.scan_window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("scan_window", format!("[{lo}, {hi}] is not an interval"));
        }
        if self.scan_samples < 2 {
            return bad("scan_samples", "need at least two samples".into());
        }
        if self.segment_points < 2 || self.slice_points < 2 {
            return bad("segment_points", "grids need at least two points per axis".into());
        }
        if !(self.eigen_tolerance >= 0.0) {
            return bad("eigen_tolerance", format!("{} must be non-negative", self.eigen_tolerance));
        }
        if let Some(eta) = self.mollifier_width {
            if !(eta > 0.0) {
                return bad("mollifier_width", format!("{eta} must be positive"));
            }
        }
        Ok(())
    }

    pub fn homogenization(&self, n_layers: usize) -> HomogenizationSpec {
        let grading = match self.grading {
            GradingKind::Uniform => Grading::Uniform,
            GradingKind::Geometric => Grading::Geometric { ratio: self.grading_ratio },
        };
        HomogenizationSpec { n_layers, grading, core_layers: self.core_layers }
    }

    pub fn core_potential(&self) -> CorePotential {
        if self.c_inn == 0.0 {
            CorePotential::zero()
        } else {
            CorePotential::step(self.c_inn, self.step_radius).expect("validated core step")
        }
    }

    /// Layer count used at truncation radius `r`.
    pub fn layers_at(&self, r: f64) -> usize {
        match self.refinement {
            Refinement::Fixed => self.n_layers,
            Refinement::Proportional => {
                let base = self.radii.first().copied().unwrap_or(self.truncation_radius);
                let shell = (self.n_layers - self.core_layers) as f64 * (base - 1.0) / (r - 1.0);
                let shell = shell.round() as usize;
                shell + shell % 2 + self.core_layers
            }
        }
    }

    pub fn medium_at(&self, r: f64, n_layers: usize) -> qcloak::Result<LayeredMedium> {
        layered_cloak(r, self.core_preset.into(), &self.homogenization(n_layers), self.core_potential())
    }

    pub fn medium(&self) -> qcloak::Result<LayeredMedium> {
        self.medium_at(self.truncation_radius, self.n_layers)
    }

    pub fn gauge_mode(&self) -> GaugeMode {
        match self.gauge {
            GaugeKind::Interface => GaugeMode::InterfaceMatched,
            GaugeKind::Mollified => GaugeMode::Mollified { eta: self.mollifier_width, grid_step: None },
        }
    }
}

fn check_radius(field: &'static str, r: f64) -> Result<(), ConfigError> {
    if r > CORE_RADIUS && r <= CLOAK_RADIUS {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field,
            message: format!("{r} must lie in ({CORE_RADIUS}, {CLOAK_RADIUS}]"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn proportional_layers() {
        let cfg = ExperimentConfig::default();
        let n: Vec<usize> = cfg.radii.iter().map(|&r| cfg.layers_at(r)).collect();
        assert_eq!(n, [50, 100, 500, 1000]);
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = ExperimentConfig { truncation_radius: 1.0, ..Default::default() };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("truncation_radius"), "{err}");
        let cfg = ExperimentConfig { n_layers: 7, ..Default::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("n_layers"));
        assert!(ExperimentConfig::from_toml("nonsense = 1").is_err());
    }
}
