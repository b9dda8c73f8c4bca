//! Run configuration: the JSON document consumed by the CLI.
//!
//! Versioned schema; frames accept either a unit quaternion `(w, x, y, z)`
//! (unit norm enforced at parse with tolerance 1e-9, then renormalized) or
//! a tangent + cross-section axis pair completed to a right-handed triple.
//! Rod stiffness is either an explicit 3x3 matrix or a section description
//! resolved through the cross-section pipeline. All inputs are assumed
//! dimensionally consistent (SI); no unit conversion is performed.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::model::{frame_from_matrix, LoadProfile, Network, RodSpec};
use crate::solver::{InitialState, OptimizerKind, Segments, SolverOptions};
use crate::xsection::{analyze_section, Material, SectionAnalysis, SectionGeometry, StiffnessForm};
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    pub rods: Vec<RodConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub junction_force: Option<[f64; 3]>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RodConfig {
    pub length: f64,
    pub frame: FrameConfig,
    pub stiffness: StiffnessConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameConfig {
    /// Unit quaternion, scalar first: `{"quaternion": [w, x, y, z]}`.
    Quaternion { quaternion: [f64; 4] },
    /// Tangent plus one cross-section axis; the third axis is completed
    /// right-handed.
    Axes {
        tangent: [f64; 3],
        normal: [f64; 3],
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StiffnessConfig {
    Matrix { matrix: [[f64; 3]; 3] },
    Section {
        section: SectionGeometry,
        material: Material,
        mesh_size: f64,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributed: Option<DistributedConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_force: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributedConfig {
    Constant { constant: [f64; 3] },
    Polynomial { polynomial: Vec<[f64; 3]> },
    /// rows `[x, fx, fy, fz]`
    Samples { samples: Vec<[f64; 4]> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_rod_segments: Option<Vec<usize>>,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_armijo_c1")]
    pub armijo_c1: f64,
    #[serde(default = "default_backtrack")]
    pub backtrack: f64,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub allow_unbalanced: bool,
    #[serde(default = "default_balance_tol")]
    pub balance_tol: f64,
}

fn default_segments() -> usize {
    64
}
fn default_grad_tol() -> f64 {
    1e-8
}
fn default_max_iterations() -> usize {
    50_000
}
fn default_optimizer() -> String {
    "lbfgs".into()
}
fn default_armijo_c1() -> f64 {
    1e-4
}
fn default_backtrack() -> f64 {
    0.5
}
fn default_balance_tol() -> f64 {
    1e-9
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            segments: default_segments(),
            per_rod_segments: None,
            grad_tol: default_grad_tol(),
            max_iterations: default_max_iterations(),
            optimizer: default_optimizer(),
            armijo_c1: default_armijo_c1(),
            backtrack: default_backtrack(),
            init: InitConfig::default(),
            allow_unbalanced: false,
            balance_tol: default_balance_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitConfig {
    /// `"straight"`
    Keyword(String),
    Perturbed { perturbed: PerturbedInit },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerturbedInit {
    pub seed: u64,
    pub amplitude: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Keyword("straight".into())
    }
}

/// Residual thresholds gating the CLI exit code. The junction couple
/// threshold is `factor * load_scale * max_length` unless an absolute
/// value is given.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdsConfig {
    #[serde(default = "default_junction_couple_factor")]
    pub junction_couple_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub junction_couple_abs: Option<f64>,
}

fn default_junction_couple_factor() -> f64 {
    1e-5
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig {
            junction_couple_factor: default_junction_couple_factor(),
            junction_couple_abs: None,
        }
    }
}

impl ThresholdsConfig {
    pub fn junction_couple_threshold(&self, network: &Network) -> f64 {
        self.junction_couple_abs.unwrap_or_else(|| {
            self.junction_couple_factor * (network.load_scale() + f64::EPSILON) * network.max_length()
        })
    }
}

/// A built network plus everything the reports need.
#[derive(Debug)]
pub struct BuiltNetwork {
    pub network: Network,
    pub warnings: Vec<String>,
    /// section analysis per rod, where the stiffness came from a section
    pub sections: Vec<Option<SectionAnalysis>>,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        RunConfig::from_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.rods.is_empty() {
            return Err(Error::Config("rods: at least one rod required".into()));
        }
        Ok(())
    }

    /// Resolves sections, frames, and loads into a [`Network`].
    pub fn build(&self) -> Result<BuiltNetwork> {
        self.validate()?;
        let mut rods = Vec::with_capacity(self.rods.len());
        let mut sections = Vec::with_capacity(self.rods.len());
        for (i, rc) in self.rods.iter().enumerate() {
            let frame = rc.frame.resolve(i)?;
            let (stiffness, analysis) = match &rc.stiffness {
                StiffnessConfig::Matrix { matrix } => {
                    let m = Matrix3::from_fn(|r, c| matrix[r][c]);
                    let s = StiffnessForm::new(m).map_err(|e| Error::InvalidRod {
                        rod: i,
                        reason: e.to_string(),
                    })?;
                    (s, None)
                }
                StiffnessConfig::Section {
                    section,
                    material,
                    mesh_size,
                } => {
                    let analysis =
                        analyze_section(section, material, *mesh_size).map_err(|e| {
                            Error::InvalidRod {
                                rod: i,
                                reason: format!("section analysis failed: {e}"),
                            }
                        })?;
                    (analysis.stiffness, Some(analysis))
                }
            };
            let (distributed, end_force) = match &rc.load {
                None => (LoadProfile::zero(), Vector3::zeros()),
                Some(lc) => {
                    let distributed = match &lc.distributed {
                        None => LoadProfile::zero(),
                        Some(DistributedConfig::Constant { constant }) => {
                            LoadProfile::Constant(Vector3::from_row_slice(constant))
                        }
                        Some(DistributedConfig::Polynomial { polynomial }) => {
                            LoadProfile::Polynomial(
                                polynomial
                                    .iter()
                                    .map(|c| Vector3::from_row_slice(c))
                                    .collect(),
                            )
                        }
                        Some(DistributedConfig::Samples { samples }) => LoadProfile::Samples(
                            samples
                                .iter()
                                .map(|row| (row[0], Vector3::new(row[1], row[2], row[3])))
                                .collect(),
                        ),
                    };
                    let end_force = lc
                        .end_force
                        .map(|f| Vector3::from_row_slice(&f))
                        .unwrap_or_else(Vector3::zeros);
                    (distributed, end_force)
                }
            };
            rods.push(RodSpec {
                length: rc.length,
                frame,
                stiffness,
                distributed,
                end_force,
            });
            sections.push(analysis);
        }
        let junction_force = self
            .junction_force
            .map(|f| Vector3::from_row_slice(&f))
            .unwrap_or_else(Vector3::zeros);
        let network = Network::with_junction_force(rods, junction_force)?;
        let warnings = network.coincident_frame_warnings();
        Ok(BuiltNetwork {
            network,
            warnings,
            sections,
        })
    }

    /// Solver options from the config (before CLI overrides).
    pub fn solver_options(&self) -> Result<SolverOptions> {
        let sc = &self.solver;
        let optimizer = match sc.optimizer.as_str() {
            "lbfgs" | "quasi-newton" => OptimizerKind::Lbfgs,
            "gradient-descent" | "gd" => OptimizerKind::GradientDescent,
            other => {
                return Err(Error::Config(format!(
                    "solver.optimizer: unknown optimizer '{other}' (expected 'lbfgs' or 'gradient-descent')"
                )))
            }
        };
        let init = match &sc.init {
            InitConfig::Keyword(k) if k == "straight" => InitialState::Straight,
            InitConfig::Keyword(k) => {
                return Err(Error::Config(format!(
                    "solver.init: unknown keyword '{k}' (expected 'straight' or a perturbed block)"
                )))
            }
            InitConfig::Perturbed { perturbed } => InitialState::Perturbed {
                seed: perturbed.seed,
                amplitude: perturbed.amplitude,
            },
        };
        let segments = match &sc.per_rod_segments {
            Some(v) => Segments::PerRod(v.clone()),
            None => Segments::Uniform(sc.segments),
        };
        let options = SolverOptions {
            segments,
            g_tol: sc.grad_tol,
            max_iterations: sc.max_iterations,
            armijo_c1: sc.armijo_c1,
            backtrack: sc.backtrack,
            optimizer,
            init,
            allow_unbalanced: sc.allow_unbalanced,
            balance_tol: sc.balance_tol,
        };
        options.validate()?;
        Ok(options)
    }

    /// Canonical form: frames as normalized quaternions, defaults filled.
    /// Idempotent: normalizing a normalized config is the identity, so
    /// re-running on an emitted config reproduces outputs byte for byte.
    pub fn normalized(&self) -> Result<RunConfig> {
        let mut out = self.clone();
        for (i, rc) in out.rods.iter_mut().enumerate() {
            let q = rc.frame.resolve(i)?;
            // at most one division ever happens on a given frame: once the
            // norm is within rounding of 1 it is kept bitwise, which makes
            // normalization idempotent
            let n = q.as_ref().norm();
            let q = if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
                *q.as_ref()
            } else {
                q.as_ref() / n
            };
            rc.frame = FrameConfig::Quaternion {
                quaternion: [q.w, q.i, q.j, q.k],
            };
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl FrameConfig {
    pub fn resolve(&self, rod: usize) -> Result<UnitQuaternion<f64>> {
        match self {
            FrameConfig::Quaternion { quaternion } => {
                let [w, x, y, z] = *quaternion;
                let q = Quaternion::new(w, x, y, z);
                let norm = q.norm();
                if !((norm - 1.0).abs() <= 1e-9) {
                    return Err(Error::InvalidRod {
                        rod,
                        reason: format!("frame quaternion norm {norm} deviates from 1 by more than 1e-9"),
                    });
                }
                // renormalize, but keep exactly-unit quaternions bitwise
                // stable so normalization is idempotent
                if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
                    Ok(UnitQuaternion::new_unchecked(q))
                } else {
                    Ok(UnitQuaternion::new_unchecked(q / norm))
                }
            }
            FrameConfig::Axes { tangent, normal } => {
                let t = Vector3::from_row_slice(tangent);
                let n = Vector3::from_row_slice(normal);
                if t.norm() < 1e-12 || n.norm() < 1e-12 {
                    return Err(Error::InvalidRod {
                        rod,
                        reason: "frame axes must be nonzero".into(),
                    });
                }
                let t = t / t.norm();
                let mut n = n - t * t.dot(&n);
                if n.norm() < 1e-9 {
                    return Err(Error::InvalidRod {
                        rod,
                        reason: "frame normal is parallel to the tangent".into(),
                    });
                }
                n /= n.norm();
                let b = t.cross(&n);
                let m = Matrix3::from_columns(&[t, n, b]);
                frame_from_matrix(&m, rod)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn minimal_config() -> &'static str {
        r#"{
            "version": 1,
            "rods": [
                {
                    "length": 1.0,
                    "frame": {"quaternion": [1, 0, 0, 0]},
                    "stiffness": {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}
                }
            ]
        }"#
    }

    #[test]
    fn minimal_config_builds_single_rod_network() {
        let config = RunConfig::from_str(minimal_config()).unwrap();
        let built = config.build().unwrap();
        assert_eq!(built.network.num_rods(), 1);
        assert_eq!(built.network.rods[0].length, 1.0);
        assert!(built.sections[0].is_none());
        assert!(built.warnings.is_empty());
    }

    #[test]
    fn section_stiffness_resolves_to_classical_values() {
        let text = r#"{
            "version": 1,
            "rods": [
                {
                    "length": 1.0,
                    "frame": {"quaternion": [1, 0, 0, 0]},
                    "stiffness": {
                        "section": {"kind": "circle", "radius": 1.0},
                        "material": {"lambda": 0.0, "mu": 1.0},
                        "mesh_size": 0.1
                    }
                }
            ]
        }"#;
        let built = RunConfig::from_str(text).unwrap().build().unwrap();
        let h = built.network.rods[0].stiffness;
        let exact = std::f64::consts::PI / 2.0;
        for j in 0..3 {
            assert_relative_eq!(h.matrix()[(j, j)], exact, max_relative = 0.01);
        }
        assert!(built.sections[0].is_some());
    }

    #[test]
    fn reflection_frame_rejected_naming_rod() {
        let text = r#"{
            "version": 1,
            "rods": [
                {
                    "length": 1.0,
                    "frame": {"tangent": [1, 0, 0], "normal": [0, 1, 0]},
                    "stiffness": {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}
                },
                {
                    "length": 1.0,
                    "frame": {"quaternion": [0.5, 0.5, 0.5, 0.5001]},
                    "stiffness": {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}
                }
            ]
        }"#;
        let err = RunConfig::from_str(text).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("rod 1"), "{err}");
    }

    #[test]
    fn unknown_version_rejected() {
        let text = minimal_config().replace("\"version\": 1", "\"version\": 2");
        assert!(RunConfig::from_str(&text).is_err());
    }

    #[test]
    fn axes_frame_completes_right_handed() {
        let text = r#"{
            "version": 1,
            "rods": [
                {
                    "length": 1.0,
                    "frame": {"tangent": [0, 1, 0], "normal": [0, 0, 2]},
                    "stiffness": {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}
                }
            ]
        }"#;
        let built = RunConfig::from_str(text).unwrap().build().unwrap();
        let r = built.network.rods[0].frame.to_rotation_matrix();
        assert_relative_eq!(r.matrix().determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            built.network.rods[0].tangent(),
            Vector3::new(0.0, 1.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn normalization_is_idempotent() {
        let text = r#"{
            "version": 1,
            "rods": [
                {
                    "length": 1.0,
                    "frame": {"tangent": [1, 0, 1], "normal": [0, 1, 0]},
                    "stiffness": {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
                    "load": {"end_force": [0.5, 0, 0]}
                }
            ],
            "solver": {"segments": 32}
        }"#;
        let once = RunConfig::from_str(text).unwrap().normalized().unwrap();
        let json1 = once.to_json().unwrap();
        let twice = RunConfig::from_str(&json1).unwrap().normalized().unwrap();
        let json2 = twice.to_json().unwrap();
        assert_eq!(json1, json2);
    }

    #[test]
    fn drifted_quaternion_renormalized_within_tolerance() {
        let text = r#"{
            "version": 1,
            "rods": [
                {
                    "length": 1.0,
                    "frame": {"quaternion": [1.0000000002, 0, 0, 0]},
                    "stiffness": {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}
                }
            ]
        }"#;
        let config = RunConfig::from_str(text).unwrap();
        let built = config.build().unwrap();
        assert!((built.network.rods[0].frame.as_ref().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_load_parses() {
        let text = r#"{
            "version": 1,
            "rods": [
                {
                    "length": 2.0,
                    "frame": {"quaternion": [1, 0, 0, 0]},
                    "stiffness": {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
                    "load": {
                        "distributed": {"samples": [[0.0, 0, 0, 0], [2.0, 0, 0, 2]]},
                        "end_force": [1, 0, 0]
                    }
                }
            ]
        }"#;
        let built = RunConfig::from_str(text).unwrap().build().unwrap();
        let p = built.network.rods[0].cumulative_load(0.0).unwrap();
        assert_relative_eq!(p, Vector3::new(1.0, 0.0, 2.0), epsilon = 1e-14);
    }

    #[test]
    fn solver_options_parse_with_defaults() {
        let config = RunConfig::from_str(minimal_config()).unwrap();
        let opts = config.solver_options().unwrap();
        assert_eq!(opts.g_tol, 1e-8);
        assert!(matches!(opts.optimizer, OptimizerKind::Lbfgs));
    }
}
