//! Pipeline configuration file (TOML).
//!
//! Every key is optional; [`DEFAULT_CONFIG`] lists the defaults and is
//! printed by `stemfit --help`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stemfit::fitting::RansacConfig;
use stemfit::synth::{CylinderSpec, PosePerturbation, ScanConfig, Scene};
use stemfit::Aabb;

use crate::error::HarnessError;

/// The default configuration, as a loadable file.
pub const DEFAULT_CONFIG: &str = r#"seed = 0

[scene]
diameter = 0.4              # m
height = 3.0                # m
base_center = [0.0, 0.0, 0.0]
axis = [0.0, 0.0, 1.0]
ground_plane_z = 0.0        # omit for no ground

[source]
regime = "surface"          # "surface" | "multi_scan" | "external"
n_points = 50000
radial_noise_sigma = 0.002  # m
arc_start_deg = 0.0
arc_span_deg = 360.0

# [source]
# regime = "multi_scan"
# n_poses = 8
# trajectory_radius = 3.0   # m, ring centred on the pipe axis
# sensor_height = 0.8       # m
# translation_sigma = 0.01  # m
# rotation_sigma = 0.5      # deg
# [source.scan]
# n_elevation = 128
# n_azimuth = 2048
# vertical_fov = 90.0       # deg
# max_range = 50.0          # m
# range_noise_sigma = 0.003 # m

# [source]
# regime = "external"
# path = "cloud.ply"

[crop]
min = [-1.5, -1.5, 0.05]
max = [1.5, 1.5, 3.5]

[fit]
iterations = 1000
inlier_threshold = 0.01     # m
# min_inliers = 100         # default max(10, 5% of slice points)
n_slices = 10
# diameter_band = [1.2, 1.4] # m along the axis; slices whose centre lies inside

[metrics]
# ground_truth_diameter = 0.4 # defaults to scene.diameter
# reference_image = "ref.png"
# test_image = "render.png"

[output]
dir = "stemfit-out"
write_cloud = true
write_svg = true
"#;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub scene: SceneSettings,
    pub source: Source,
    pub crop: CropSettings,
    pub fit: FitSettings,
    pub metrics: MetricsSettings,
    pub output: OutputSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSettings {
    pub diameter: f64,
    pub height: f64,
    pub base_center: [f64; 3],
    pub axis: [f64; 3],
    pub ground_plane_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    Surface {
        #[serde(default = "defaults::n_points")]
        n_points: usize,
        #[serde(default = "defaults::radial_noise_sigma")]
        radial_noise_sigma: f64,
        #[serde(default)]
        arc_start_deg: f64,
        #[serde(default = "defaults::arc_span_deg")]
        arc_span_deg: f64,
    },
    MultiScan {
        #[serde(default = "defaults::n_poses")]
        n_poses: usize,
        #[serde(default = "defaults::trajectory_radius")]
        trajectory_radius: f64,
        #[serde(default = "defaults::sensor_height")]
        sensor_height: f64,
        #[serde(default = "defaults::translation_sigma")]
        translation_sigma: f64,
        #[serde(default = "defaults::rotation_sigma")]
        rotation_sigma: f64,
        #[serde(default)]
        scan: ScanSettings,
    },
    External {
        path: PathBuf,
    },
}

/// [`ScanConfig`] without the seed, which comes from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    pub n_elevation: usize,
    pub n_azimuth: usize,
    pub vertical_fov: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropSettings {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub iterations: usize,
    pub inlier_threshold: f64,
    pub min_inliers: Option<usize>,
    pub n_slices: usize,
    pub diameter_band: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSettings {
    pub ground_truth_diameter: Option<f64>,
    pub reference_image: Option<PathBuf>,
    pub test_image: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub write_cloud: bool,
    pub write_svg: bool,
}

mod defaults {
    pub fn n_points() -> usize {
        50_000
    }
    pub fn radial_noise_sigma() -> f64 {
        0.002
    }
    pub fn arc_span_deg() -> f64 {
        360.0
    }
    pub fn n_poses() -> usize {
        8
    }
    pub fn trajectory_radius() -> f64 {
        3.0
    }
    pub fn sensor_height() -> f64 {
        0.8
    }
    pub fn translation_sigma() -> f64 {
        0.01
    }
    pub fn rotation_sigma() -> f64 {
        0.5
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scene: SceneSettings::default(),
            source: Source::default(),
            crop: CropSettings::default(),
            fit: FitSettings::default(),
            metrics: MetricsSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

impl Default for SceneSettings {
    fn default() -> Self {
        Self {
            diameter: 0.4,
            height: 3.0,
            base_center: [0.0; 3],
            axis: [0.0, 0.0, 1.0],
            ground_plane_z: Some(0.0),
        }
    }
}

impl Default for Source {
    fn default() -> Self {
        Source::Surface {
            n_points: defaults::n_points(),
            radial_noise_sigma: defaults::radial_noise_sigma(),
            arc_start_deg: 0.0,
            arc_span_deg: defaults::arc_span_deg(),
        }
    }
}

impl Default for ScanSettings {
    fn default() -> Self {
        let d = ScanConfig::default();
        Self {
            n_elevation: d.n_elevation,
            n_azimuth: d.n_azimuth,
            vertical_fov: d.vertical_fov,
            max_range: d.max_range,
            range_noise_sigma: d.range_noise_sigma,
        }
    }
}

impl Default for CropSettings {
    fn default() -> Self {
        Self {
            min: [-1.5, -1.5, 0.05],
            max: [1.5, 1.5, 3.5],
        }
    }
}

impl Default for FitSettings {
    fn default() -> Self {
        let d = RansacConfig::default();
        Self {
            iterations: d.iterations,
            inlier_threshold: d.inlier_threshold,
            min_inliers: d.min_inliers,
            n_slices: 10,
            diameter_band: None,
        }
    }
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("stemfit-out"),
            write_cloud: true,
            write_svg: true,
        }
    }
}

impl Source {
    pub fn regime(&self) -> &'static str {
        match self {
            Source::Surface { .. } => "surface",
            Source::MultiScan { .. } => "multi_scan",
            Source::External { .. } => "external",
        }
    }
}

impl ScanSettings {
    pub fn with_seed(&self, seed: u64) -> ScanConfig {
        ScanConfig {
            n_elevation: self.n_elevation,
            n_azimuth: self.n_azimuth,
            vertical_fov: self.vertical_fov,
            max_range: self.max_range,
            range_noise_sigma: self.range_noise_sigma,
            seed,
        }
    }
}

impl FitSettings {
    pub fn ransac(&self, seed: u64) -> RansacConfig {
        RansacConfig {
            iterations: self.iterations,
            inlier_threshold: self.inlier_threshold,
            min_inliers: self.min_inliers,
            seed,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn cylinder(&self) -> CylinderSpec {
        CylinderSpec {
            diameter: self.scene.diameter,
            height: self.scene.height,
            base_center: self.scene.base_center,
            axis: self.scene.axis,
        }
    }

    pub fn scene(&self) -> Result<Scene, HarnessError> {
        Ok(Scene::new(self.cylinder(), self.scene.ground_plane_z)?)
    }

    pub fn crop_box(&self) -> Result<Aabb, HarnessError> {
        Aabb::new(self.crop.min, self.crop.max).map_err(|e| HarnessError::Config(format!("crop: {e}")))
    }

    pub fn ground_truth_diameter(&self) -> f64 {
        self.metrics.ground_truth_diameter.unwrap_or(self.scene.diameter)
    }

    /// Checks everything that can be checked without touching the filesystem.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scene()?;
        self.crop_box()?;
        self.fit.ransac(0).validate().map_err(|e| HarnessError::Config(format!("fit: {e}")))?;
        if self.fit.n_slices == 0 {
            return Err(HarnessError::Config("fit: n_slices must be at least 1".into()));
        }
        if let Some([lo, hi]) = self.fit.diameter_band {
            if !(lo < hi) {
                return Err(HarnessError::Config("fit: diameter_band must satisfy min < max".into()));
            }
        }
        if !(self.ground_truth_diameter() > 0.0) {
            return Err(HarnessError::Config("metrics: ground_truth_diameter must be positive".into()));
        }
        if self.metrics.reference_image.is_some() != self.metrics.test_image.is_some() {
            return Err(HarnessError::Config(
                "metrics: reference_image and test_image must be given together".into(),
            ));
        }
        match &self.source {
            Source::Surface { arc_span_deg, .. } => {
                if !(*arc_span_deg > 0.0 && *arc_span_deg <= 360.0) {
                    return Err(HarnessError::Config("source: arc_span_deg must lie in (0, 360]".into()));
                }
            }
            Source::MultiScan { n_poses, translation_sigma, rotation_sigma, scan, .. } => {
                if *n_poses == 0 {
                    return Err(HarnessError::Config("source: n_poses must be at least 1".into()));
                }
                PosePerturbation { translation_sigma: *translation_sigma, rotation_sigma: *rotation_sigma }
                    .validate()?;
                scan.with_seed(0).validate()?;
            }
            Source::External { .. } => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_text_matches_default_value() {
        assert_eq!(PipelineConfig::from_toml(DEFAULT_CONFIG).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn multi_scan_regime() {
        let cfg = PipelineConfig::from_toml(
            "[source]\nregime = \"multi_scan\"\nrotation_sigma = 0.0\n[source.scan]\nn_azimuth = 512\n",
        )
        .unwrap();
        match cfg.source {
            Source::MultiScan { n_poses, rotation_sigma, scan, .. } => {
                assert_eq!(n_poses, 8);
                assert_eq!(rotation_sigma, 0.0);
                assert_eq!(scan.n_azimuth, 512);
                assert_eq!(scan.n_elevation, 128);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_foreign_keys_rejected() {
        assert!(PipelineConfig::from_toml("sed = 1").is_err());
        assert!(PipelineConfig::from_toml("[fit]\nthreshold = 0.1").is_err());
        // A surface key under the external regime.
        assert!(PipelineConfig::from_toml("[source]\nregime = \"external\"\npath = \"a.ply\"\nn_points = 4").is_err());
        assert!(PipelineConfig::from_toml("[source]\nregime = \"lidar\"").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(PipelineConfig::from_toml("[scene]\ndiameter = -1.0").is_err());
        assert!(PipelineConfig::from_toml("[crop]\nmin = [1.0, 0.0, 0.0]\nmax = [0.0, 1.0, 1.0]").is_err());
        assert!(PipelineConfig::from_toml("[fit]\nn_slices = 0").is_err());
        assert!(PipelineConfig::from_toml("[fit]\ndiameter_band = [2.0, 1.0]").is_err());
        assert!(PipelineConfig::from_toml("[metrics]\nreference_image = \"a.png\"").is_err());
        assert!(PipelineConfig::from_toml("[source]\nregime = \"surface\"\narc_span_deg = 400.0").is_err());
    }

    #[test]
    fn serializes_back_to_equal_config() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }
}
