//! JSON experiment configuration and the built-in presets.
//!
//! The schema is strict: unknown fields are rejected so a config file is a
//! complete, reproducible description of a sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{GaussianLoadingScale, NoiseLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    Figure1,
    Figure2,
    Figure4,
    NullRisk,
    Custom,
}

impl Design {
    pub fn tag(&self) -> &'static str {
        match self {
            Design::Figure1 => "figure1",
            Design::Figure2 => "figure2",
            Design::Figure4 => "figure4",
            Design::NullRisk => "nullrisk",
            Design::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub k: usize,
    pub n: usize,
    pub p: usize,
}

/// K ranges linearly over the points, n = floor(K^1.5), and p follows a
/// log-spaced gamma = p/n sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRule {
    pub k_min: usize,
    pub k_max: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    Points(Vec<GridPoint>),
    Rule(GridRule),
}

impl GridSpec {
    pub fn resolve(&self) -> Result<Vec<GridPoint>> {
        match self {
            GridSpec::Points(points) => {
                if points.is_empty() {
                    return Err(Error::Config("grid must be nonempty".into()));
                }
                Ok(points.clone())
            }
            GridSpec::Rule(rule) => {
                if rule.points == 0 {
                    return Err(Error::Config("grid rule needs at least one point".into()));
                }
                if rule.k_min == 0 || rule.k_max < rule.k_min {
                    return Err(Error::Config("grid rule needs 1 <= k_min <= k_max".into()));
                }
                if !(rule.gamma_min > 0.0 && rule.gamma_max >= rule.gamma_min) {
                    return Err(Error::Config(
                        "grid rule needs 0 < gamma_min <= gamma_max".into(),
                    ));
                }
                let points = rule.points;
                let mut out = Vec::with_capacity(points);
                for i in 0..points {
                    let t = if points == 1 {
                        0.0
                    } else {
                        i as f64 / (points - 1) as f64
                    };
                    let k = (rule.k_min as f64 + t * (rule.k_max - rule.k_min) as f64).round()
                        as usize;
                    let n = (k as f64).powf(1.5).floor() as usize;
                    let gamma = (rule.gamma_min.ln()
                        + t * (rule.gamma_max.ln() - rule.gamma_min.ln()))
                    .exp();
                    let p = (gamma * n as f64).round().max(1.0) as usize;
                    out.push(GridPoint { k, n, p });
                }
                Ok(out)
            }
        }
    }

    /// Warnings for points that leave the factor-regression regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if let Ok(points) = self.resolve() {
            for gp in &points {
                if gp.k > gp.n.min(gp.p) {
                    w.push(format!(
                        "grid point (K={}, n={}, p={}) has K > min(n, p)",
                        gp.k, gp.n, gp.p
                    ));
                }
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LoadingKind {
    ScaledOrthogonal,
    Gaussian { scale: GaussianLoadingScale },
    CanonicalSparse,
    ClusterAssignment { sizes: Vec<usize> },
    /// A = 0: the pure-noise null-risk regime.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FactorCovKind {
    Identity,
    ScaledIdentity { variance: f64 },
    Diagonal { variances: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseCovKind {
    Zero,
    Isotropic { variance: f64 },
    Diagonal { variances: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BetaKind {
    AllOnes,
    Zeros,
    Custom { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum EvalMode {
    #[default]
    ExactPopulationRisk,
    HoldoutMonteCarlo {
        m: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_min_factor")]
    pub min_factor: f64,
    #[serde(default = "default_max_factor")]
    pub max_factor: f64,
}

fn default_folds() -> usize {
    5
}
fn default_grid_points() -> usize {
    30
}
fn default_min_factor() -> f64 {
    1e-4
}
fn default_max_factor() -> f64 {
    1e2
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: default_folds(),
            grid_points: default_grid_points(),
            min_factor: default_min_factor(),
            max_factor: default_max_factor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EstimatorSpec {
    MinNorm,
    Null,
    OracleZ,
    /// Component count defaults to the grid point's K.
    PcrEmpirical { k: Option<usize> },
    PcrStylized { k: Option<usize> },
    Ridge { lambda: f64 },
    RidgeCv { cv: CvConfig },
    Lasso { lambda: f64 },
    LassoCv { cv: CvConfig },
}

impl EstimatorSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            EstimatorSpec::MinNorm => "min_norm",
            EstimatorSpec::Null => "null",
            EstimatorSpec::OracleZ => "oracle_z",
            EstimatorSpec::PcrEmpirical { .. } => "pcr_empirical",
            EstimatorSpec::PcrStylized { .. } => "pcr_stylized",
            EstimatorSpec::Ridge { .. } => "ridge",
            EstimatorSpec::RidgeCv { .. } => "ridge",
            EstimatorSpec::Lasso { .. } => "lasso",
            EstimatorSpec::LassoCv { .. } => "lasso",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: Design,
    pub grid: GridSpec,
    pub loading_kind: LoadingKind,
    pub noise_law: NoiseLaw,
    pub sigma_z_kind: FactorCovKind,
    pub sigma_e_kind: NoiseCovKind,
    pub beta_kind: BetaKind,
    #[serde(default = "default_sigma_eps")]
    pub sigma_eps: f64,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_redraw")]
    pub redraw_loading_per_replicate: bool,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub eval_mode: EvalMode,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_sigma_eps() -> f64 {
    1.0
}
fn default_replicates() -> usize {
    20
}
fn default_redraw() -> bool {
    true
}
fn default_output_dir() -> String {
    "out".into()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!(
                "{e} (line {}, column {})",
                e.line(),
                e.column()
            ))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.resolve()?;
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::Config("sigma_eps must be finite and >= 0".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("estimators list must be nonempty".into()));
        }
        if let EvalMode::HoldoutMonteCarlo { m } = self.eval_mode {
            if m == 0 {
                return Err(Error::Config("holdout sample count must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// The built-in designs at full scale.
    pub fn preset(design: Design) -> Result<Self> {
        Self::preset_scaled(design, 1.0)
    }

    /// Presets with the top of the gamma range multiplied by `scale`.
    pub fn preset_scaled(design: Design, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::Config("preset scale must lie in (0, 1]".into()));
        }
        let config = match design {
            Design::Figure1 => Self {
                design,
                grid: GridSpec::Rule(GridRule {
                    k_min: 16,
                    k_max: 64,
                    gamma_min: 33.0 / 64.0,
                    gamma_max: scale * 4066.0 / 512.0,
                    points: 24,
                }),
                loading_kind: LoadingKind::ScaledOrthogonal,
                noise_law: NoiseLaw::Gaussian,
                sigma_z_kind: FactorCovKind::Identity,
                sigma_e_kind: NoiseCovKind::Isotropic { variance: 1.0 },
                beta_kind: BetaKind::AllOnes,
                sigma_eps: 1.0,
                estimators: vec![EstimatorSpec::MinNorm],
                replicates: 20,
                redraw_loading_per_replicate: true,
                master_seed: 1,
                eval_mode: EvalMode::ExactPopulationRisk,
                output_dir: "out/figure1".into(),
            },
            Design::Figure2 => Self {
                design,
                grid: GridSpec::Rule(GridRule {
                    k_min: 12,
                    k_max: 69,
                    gamma_min: 16.0 / 41.0,
                    gamma_max: scale * 7215.0 / 573.0,
                    points: 24,
                }),
                loading_kind: LoadingKind::Gaussian {
                    scale: GaussianLoadingScale::Variance,
                },
                noise_law: NoiseLaw::Gaussian,
                sigma_z_kind: FactorCovKind::Identity,
                sigma_e_kind: NoiseCovKind::Isotropic { variance: 1.0 },
                beta_kind: BetaKind::AllOnes,
                sigma_eps: 1.0,
                estimators: vec![
                    EstimatorSpec::MinNorm,
                    EstimatorSpec::PcrStylized { k: None },
                    EstimatorSpec::LassoCv {
                        cv: CvConfig::default(),
                    },
                    EstimatorSpec::RidgeCv {
                        cv: CvConfig::default(),
                    },
                    EstimatorSpec::Null,
                ],
                replicates: 20,
                redraw_loading_per_replicate: true,
                master_seed: 2,
                eval_mode: EvalMode::ExactPopulationRisk,
                output_dir: "out/figure2".into(),
            },
            Design::Figure4 => {
                let mut c = Self::preset_scaled(Design::Figure2, scale)?;
                c.design = Design::Figure4;
                c.loading_kind = LoadingKind::CanonicalSparse;
                c.master_seed = 4;
                c.output_dir = "out/figure4".into();
                c
            }
            Design::NullRisk => Self {
                design,
                grid: GridSpec::Points(vec![
                    GridPoint { k: 1, n: 50, p: 500 },
                    GridPoint {
                        k: 1,
                        n: 50,
                        p: 2500,
                    },
                    GridPoint {
                        k: 1,
                        n: 50,
                        p: 5000,
                    },
                ]),
                loading_kind: LoadingKind::Zero,
                noise_law: NoiseLaw::Gaussian,
                sigma_z_kind: FactorCovKind::Identity,
                sigma_e_kind: NoiseCovKind::Isotropic { variance: 1.0 },
                beta_kind: BetaKind::Zeros,
                sigma_eps: 1.0,
                estimators: vec![EstimatorSpec::MinNorm, EstimatorSpec::Null],
                replicates: 20,
                redraw_loading_per_replicate: true,
                master_seed: 6,
                eval_mode: EvalMode::ExactPopulationRisk,
                output_dir: "out/nullrisk".into(),
            },
            Design::Custom => {
                return Err(Error::Config(
                    "custom designs come from config files, not presets".into(),
                ))
            }
        };
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure1_grid_endpoints_match_captions() {
        let c = ExperimentConfig::preset(Design::Figure1).unwrap();
        let grid = c.grid.resolve().unwrap();
        assert_eq!(grid.len(), 24);
        assert_eq!(grid[0], GridPoint { k: 16, n: 64, p: 33 });
        assert_eq!(
            grid[23],
            GridPoint {
                k: 64,
                n: 512,
                p: 4066
            }
        );
    }

    #[test]
    fn figure2_and_figure4_grid_endpoints() {
        for design in [Design::Figure2, Design::Figure4] {
            let c = ExperimentConfig::preset(design).unwrap();
            let grid = c.grid.resolve().unwrap();
            assert_eq!(grid[0], GridPoint { k: 12, n: 41, p: 16 });
            assert_eq!(
                grid[23],
                GridPoint {
                    k: 69,
                    n: 573,
                    p: 7215
                }
            );
        }
    }

    #[test]
    fn half_scale_caps_p() {
        let c = ExperimentConfig::preset_scaled(Design::Figure1, 0.5).unwrap();
        let grid = c.grid.resolve().unwrap();
        assert_eq!(grid[23].p, 2033);
    }

    #[test]
    fn json_round_trip_and_unknown_field_rejection() {
        let c = ExperimentConfig::preset(Design::NullRisk).unwrap();
        let text = c.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c, back);

        let bad = text.replacen("\"sigma_eps\"", "\"sigma_epsilon\"", 1);
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("sigma_epsilon"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn grid_warnings_flag_small_p() {
        let spec = GridSpec::Points(vec![GridPoint { k: 5, n: 10, p: 3 }]);
        let w = spec.warnings();
        assert_eq!(w.len(), 1);
    }
}
