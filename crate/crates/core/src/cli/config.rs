//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [grid]
//! x_extent = [1.0, 1.0]
//! x_points = [32, 32]
//! k_shells = [1.0]
//! k_angles = 32
//!
//! [medium]            # default: constant, v0 = 1
//! model = "constant"
//! v0 = 1.0
//!
//! [kernel]            # default: none
//! type = "rotation"
//! sigma0 = 0.5
//! gain = 1.0
//!
//! [initial]
//! profile = "gaussian"
//! background = 1.0
//! amplitude = 0.5
//! width = 0.15
//!
//! [integrator]
//! scheme = "midpoint"
//! cfl_safety = 0.25  # or dt; neither means cfl_safety = 0.5
//! n_steps = 100
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every section is checked only by the subcommands that use it.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coherence::{CoherenceField, Hermitian2, HermitianField};
use crate::dynamics::{Integrator, Scheme};
use crate::frames::Vec3;
use crate::medium::{Medium, VelocityModel};
use crate::phase_grid::{GridConfig, PhaseSpaceGrid};
use crate::scattering::{KernelSpec, SigmaProfile};
use crate::verify::SuiteInputs;

/// A configuration problem, located by key path (`grid.k_shells[0]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub msg: String,
}

impl ConfigError {
    pub fn at(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "config: {}", self.msg)
        } else {
            write!(f, "config key `{}`: {}", self.path, self.msg)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSection {
    None,
    Isotropic {
        sigma0: f64,
    },
    AngleDependent {
        sigma0: f64,
        #[serde(default)]
        anisotropy: f64,
    },
    Rotation {
        sigma0: f64,
        #[serde(default)]
        anisotropy: f64,
        gain: f64,
    },
    /// `T = diag(cos Δ, 1)`; violates the total-rate identity and is always
    /// rejected when built.
    DiagonalCosine {
        sigma0: f64,
    },
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection::None
    }
}

impl KernelSection {
    pub fn spec(&self) -> KernelSpec {
        match *self {
            KernelSection::None => KernelSpec::None,
            KernelSection::Isotropic { sigma0 } => KernelSpec::Isotropic { sigma0 },
            KernelSection::AngleDependent { sigma0, anisotropy } => KernelSpec::AngleDependent {
                profile: SigmaProfile::Cosine { sigma0, anisotropy },
            },
            KernelSection::Rotation { sigma0, anisotropy, gain } => KernelSpec::Rotation {
                profile: SigmaProfile::Cosine { sigma0, anisotropy },
                gain,
            },
            KernelSection::DiagonalCosine { sigma0 } => KernelSpec::Custom(Arc::new(move |_r, th, thp| {
                (sigma0, nalgebra::Matrix2::new((th - thp).cos(), 0.0, 0.0, 1.0))
            })),
        }
    }
}

fn zero3() -> [f64; 3] {
    [0.0; 3]
}

/// Named initial Stokes profiles. `polarization = [q, u, v]` are fractions
/// of `I`; `noise` multiplies `I` by `1 + noise·ξ`, `ξ ∈ [−1, 1)` drawn
/// from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    Uniform {
        intensity: f64,
        #[serde(default = "zero3")]
        polarization: [f64; 3],
        #[serde(default)]
        noise: f64,
    },
    /// `background + amplitude · exp(−|x − c|²/2w²) · (1 + anisotropy cos(θ − direction))`,
    /// with periodic distance; `center` defaults to the domain middle.
    Gaussian {
        background: f64,
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        anisotropy: f64,
        #[serde(default)]
        direction: f64,
        #[serde(default = "zero3")]
        polarization: [f64; 3],
        #[serde(default)]
        noise: f64,
    },
    /// `background + amplitude · Π cos(2π mᵢ xᵢ / Lᵢ) · cos(n θ)`.
    Mode {
        background: f64,
        amplitude: f64,
        x_modes: Vec<u32>,
        #[serde(default)]
        angle_mode: u32,
        #[serde(default = "zero3")]
        polarization: [f64; 3],
        #[serde(default)]
        noise: f64,
    },
}

impl InitialSection {
    pub fn polarization(&self) -> [f64; 3] {
        match self {
            InitialSection::Uniform { polarization, .. }
            | InitialSection::Gaussian { polarization, .. }
            | InitialSection::Mode { polarization, .. } => *polarization,
        }
    }

    fn noise(&self) -> f64 {
        match self {
            InitialSection::Uniform { noise, .. } | InitialSection::Gaussian { noise, .. } | InitialSection::Mode { noise, .. } => {
                *noise
            }
        }
    }

    pub fn is_polarized(&self) -> bool {
        self.polarization().iter().any(|&p| p != 0.0)
    }

    fn validate(&self, dims: usize) -> Result<(), ConfigError> {
        let p = self.polarization();
        if p.iter().map(|v| v * v).sum::<f64>() > 1.0 || p.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::at("initial.polarization", "need q² + u² + v² ≤ 1"));
        }
        let noise = self.noise();
        if !(0.0..1.0).contains(&noise) {
            return Err(ConfigError::at("initial.noise", format!("must lie in [0, 1), got {noise}")));
        }
        let floor = match self {
            InitialSection::Uniform { intensity, .. } => *intensity,
            InitialSection::Gaussian { background, amplitude, width, center, anisotropy, .. } => {
                if !(*width > 0.0) {
                    return Err(ConfigError::at("initial.width", format!("must be > 0, got {width}")));
                }
                if anisotropy.abs() > 1.0 {
                    return Err(ConfigError::at("initial.anisotropy", "need |anisotropy| ≤ 1"));
                }
                if let Some(c) = center {
                    if c.len() != dims {
                        return Err(ConfigError::at("initial.center", format!("expected {dims} entries, got {}", c.len())));
                    }
                }
                background + amplitude.min(0.0) * (1.0 + anisotropy.abs())
            }
            InitialSection::Mode { background, amplitude, x_modes, .. } => {
                if x_modes.len() != dims {
                    return Err(ConfigError::at("initial.x_modes", format!("expected {dims} entries, got {}", x_modes.len())));
                }
                background - amplitude.abs()
            }
        };
        if !(floor >= 0.0) {
            return Err(ConfigError::at("initial", "intensity would be negative somewhere"));
        }
        Ok(())
    }

    fn intensity(&self, grid: &PhaseSpaceGrid, p: &crate::phase_grid::PhasePoint) -> f64 {
        let ext = grid.x_extent();
        let d = grid.x_dims();
        match self {
            InitialSection::Uniform { intensity, .. } => *intensity,
            InitialSection::Gaussian { background, amplitude, width, center, anisotropy, direction, .. } => {
                let r2: f64 = (0..d)
                    .map(|i| {
                        let c = center.as_ref().map_or(0.5 * ext[i], |c| c[i]);
                        let mut dx = (p.x[i] - c).rem_euclid(ext[i]);
                        if dx > 0.5 * ext[i] {
                            dx -= ext[i];
                        }
                        dx * dx
                    })
                    .sum();
                background + amplitude * (-r2 / (2.0 * width * width)).exp() * (1.0 + anisotropy * (p.theta - direction).cos())
            }
            InitialSection::Mode { background, amplitude, x_modes, angle_mode, .. } => {
                let px: f64 = (0..d).map(|i| (TAU * x_modes[i] as f64 * p.x[i] / ext[i]).cos()).product();
                background + amplitude * px * (*angle_mode as f64 * p.theta).cos()
            }
        }
    }

    /// Sample on `grid`; deterministic in `seed`.
    pub fn sample(&self, grid: &PhaseSpaceGrid, seed: u64) -> HermitianField {
        let pol = self.polarization();
        let noise = self.noise();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                let mut int = self.intensity(grid, &p);
                if noise > 0.0 {
                    int *= 1.0 + noise * rng.random_range(-1.0..1.0);
                }
                Hermitian2::new(int, pol[0] * int, pol[1] * int, pol[2] * int)
            })
            .collect();
        HermitianField::new(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Rk4,
    Midpoint,
}

fn default_scheme() -> SchemeName {
    SchemeName::Midpoint
}
fn one() -> usize {
    1
}
fn default_picard_tol() -> f64 {
    1e-13
}
fn default_picard_iters() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_safety: Option<f64>,
    pub n_steps: usize,
    #[serde(default = "one")]
    pub record_interval: usize,
    /// `0` disables snapshots.
    #[serde(default)]
    pub snapshot_interval: usize,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_iters")]
    pub max_picard_iters: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("polrad-out")
}
fn default_diagnostics() -> String {
    "diagnostics.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_diagnostics")]
    pub diagnostics: String,
    /// Write `w_<step>.snap` files when `integrator.snapshot_interval > 0`.
    #[serde(default = "yes")]
    pub snapshots: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            diagnostics: default_diagnostics(),
            snapshots: true,
        }
    }
}

/// Thresholds for the `verify` thermodynamic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermoSection {
    pub energy_band: f64,
    pub entropy_tol: f64,
}

impl Default for ThermoSection {
    fn default() -> Self {
        Self {
            energy_band: 1e-10,
            entropy_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum RayModel {
    Constant { v0: f64 },
    LinearGradient { v0: f64, gradient: [f64; 3] },
    FishEye { n0: f64, radius: f64 },
    GrinFiber { v0: f64, g: f64 },
}

impl RayModel {
    pub fn model(&self) -> VelocityModel {
        match *self {
            RayModel::Constant { v0 } => VelocityModel::Constant { v0 },
            RayModel::LinearGradient { v0, gradient } => VelocityModel::LinearGradient { v0, gradient },
            RayModel::FishEye { n0, radius } => VelocityModel::FishEye { n0, radius },
            RayModel::GrinFiber { v0, g } => VelocityModel::GrinFiber { v0, g },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Launch {
    Explicit { x0: [f64; 3], k0: [f64; 3] },
    /// The exact helix of a `grin_fiber` medium at radius `rho0`.
    GrinHelix { rho0: f64, k_norm: f64 },
}

fn default_ray_tol() -> f64 {
    1e-12
}
fn default_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}
fn default_ray_file() -> String {
    "rays.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaysSection {
    pub medium: RayModel,
    pub launch: Launch,
    pub length: f64,
    pub ds: f64,
    #[serde(default = "default_ray_tol")]
    pub tol: f64,
    #[serde(default)]
    pub alpha0: f64,
    /// Reference axis of the fixed comparison basis.
    #[serde(default = "default_axis")]
    pub fixed_axis: [f64; 3],
    #[serde(default = "default_ray_file")]
    pub file: String,
}

impl RaysSection {
    pub fn launch_state(&self) -> Result<(Vec3, Vec3), ConfigError> {
        match self.launch {
            Launch::Explicit { x0, k0 } => Ok((Vec3::from(x0), Vec3::from(k0))),
            Launch::GrinHelix { rho0, k_norm } => match self.medium {
                RayModel::GrinFiber { v0, g } => crate::frames::grin_helix(v0, g, rho0, k_norm)
                    .map(|(x, k, _, _)| (x, k))
                    .map_err(|e| ConfigError::at("rays.launch", e.to_string())),
                _ => Err(ConfigError::at("rays.launch.type", "grin_helix needs rays.medium.model = \"grin_fiber\"")),
            },
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (key, v) in [("rays.length", self.length), ("rays.ds", self.ds), ("rays.tol", self.tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::at(key, format!("must be positive, got {v}")));
            }
        }
        if Vec3::from(self.fixed_axis).norm() == 0.0 {
            return Err(ConfigError::at("rays.fixed_axis", "must be nonzero"));
        }
        self.launch_state().map(|_| ())
    }
}

fn default_medium() -> Medium {
    Medium::Constant { v0: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every random choice (initial noise, verification draws
    /// unless `verify.seed` is set).
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_medium")]
    pub medium: Medium,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: SuiteInputs,
    #[serde(default)]
    pub thermo: ThermoSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<RaysSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

/// Parse TOML text; type errors carry the key path.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let value: toml::Table = toml::from_str(text).map_err(|e| ConfigError::at("", e.message().trim().to_string() + &location(text, e.span())))?;
    let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(value)).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::at(if path == "." { String::new() } else { path }, e.inner().to_string())
    })?;
    let mut cfg = cfg;
    if let Some(it) = cfg.integrator.as_mut() {
        if it.dt.is_none() && it.cfl_safety.is_none() {
            it.cfl_safety = Some(DEFAULT_CFL_SAFETY);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Used when neither `integrator.dt` nor `integrator.cfl_safety` is set.
pub const DEFAULT_CFL_SAFETY: f64 = 0.5;

fn location(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    span.map_or(String::new(), |s| {
        let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
        format!(" (line {line})")
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at("", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

fn check_positive(path: String, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::at(path, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// Constraint checks on whatever sections are present.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(g) = &self.grid {
            let d = g.x_points.len();
            if !(1..=2).contains(&d) {
                return Err(ConfigError::at("grid.x_points", format!("need 1 or 2 spatial dimensions, got {d}")));
            }
            if g.x_extent.len() != d {
                return Err(ConfigError::at("grid.x_extent", format!("expected {d} entries to match grid.x_points")));
            }
            for (i, &l) in g.x_extent.iter().enumerate() {
                check_positive(format!("grid.x_extent[{i}]"), l)?;
            }
            for (i, &r) in g.k_shells.iter().enumerate() {
                check_positive(format!("grid.k_shells[{i}]"), r)?;
                if i > 0 && r <= g.k_shells[i - 1] {
                    return Err(ConfigError::at(format!("grid.k_shells[{i}]"), "shell radii must increase strictly"));
                }
            }
            if g.k_shells.is_empty() {
                return Err(ConfigError::at("grid.k_shells", "need at least one shell"));
            }
            PhaseSpaceGrid::new(g).map_err(|e| ConfigError::at("grid", e.to_string()))?;
            if let Some(init) = &self.initial {
                init.validate(d)?;
            }
            if let Medium::SeparableTrig { modes, .. } = &self.medium {
                if modes.len() != d {
                    return Err(ConfigError::at("medium.modes", format!("expected {d} entries, got {}", modes.len())));
                }
            }
        }
        match &self.medium {
            Medium::Constant { v0 } => check_positive("medium.v0".into(), *v0)?,
            Medium::SeparableTrig { v0, amplitude, .. } => {
                check_positive("medium.v0".into(), *v0)?;
                if !(amplitude.abs() < 1.0) {
                    return Err(ConfigError::at("medium.amplitude", "need |amplitude| < 1 to keep v > 0"));
                }
            }
        }
        if let Some(it) = &self.integrator {
            match (it.dt, it.cfl_safety) {
                (Some(_), Some(_)) => return Err(ConfigError::at("integrator", "set exactly one of `dt` and `cfl_safety`, not both")),
                (None, None) => return Err(ConfigError::at("integrator", "set one of `dt` or `cfl_safety`")),
                (Some(dt), None) => check_positive("integrator.dt".into(), dt)?,
                (None, Some(c)) => check_positive("integrator.cfl_safety".into(), c)?,
            }
            if it.record_interval == 0 {
                return Err(ConfigError::at("integrator.record_interval", "must be ≥ 1"));
            }
            check_positive("integrator.picard_tol".into(), it.picard_tol)?;
            if it.max_picard_iters == 0 {
                return Err(ConfigError::at("integrator.max_picard_iters", "must be ≥ 1"));
            }
        }
        if let Some(r) = &self.rays {
            r.validate()?;
        }
        if self.verify.refinements.len() < 3 {
            return Err(ConfigError::at("verify.refinements", "need at least three refinement levels"));
        }
        Ok(())
    }

    pub fn require_grid(&self) -> Result<&GridConfig, ConfigError> {
        self.grid.as_ref().ok_or_else(|| ConfigError::at("grid", "missing section"))
    }

    pub fn require_initial(&self) -> Result<&InitialSection, ConfigError> {
        self.initial.as_ref().ok_or_else(|| ConfigError::at("initial", "missing section"))
    }

    pub fn require_integrator(&self) -> Result<&IntegratorSection, ConfigError> {
        self.integrator.as_ref().ok_or_else(|| ConfigError::at("integrator", "missing section"))
    }

    pub fn require_rays(&self) -> Result<&RaysSection, ConfigError> {
        self.rays.as_ref().ok_or_else(|| ConfigError::at("rays", "missing section"))
    }

    pub fn build_grid(&self) -> Result<Arc<PhaseSpaceGrid>, ConfigError> {
        let g = self.require_grid()?;
        PhaseSpaceGrid::new(g).map(Arc::new).map_err(|e| ConfigError::at("grid", e.to_string()))
    }

    pub fn initial_field(&self, grid: &Arc<PhaseSpaceGrid>) -> Result<CoherenceField, ConfigError> {
        let data = self.require_initial()?.sample(grid, self.seed);
        CoherenceField::new(grid.clone(), data, 0.0).map_err(|e| ConfigError::at("initial", e.to_string()))
    }

    /// Integrator with `dt` resolved from the CFL rule when requested.
    pub fn integrator(&self, grid: &PhaseSpaceGrid) -> Result<Integrator, ConfigError> {
        let it = self.require_integrator()?;
        let dt = match (it.dt, it.cfl_safety) {
            (Some(dt), _) => dt,
            (None, Some(c)) => crate::dynamics::cfl_dt(grid, &self.medium, c).map_err(|e| ConfigError::at("medium", e.to_string()))?,
            (None, None) => unreachable!("validated"),
        };
        Ok(Integrator {
            scheme: match it.scheme {
                SchemeName::Rk4 => Scheme::Rk4,
                SchemeName::Midpoint => Scheme::Midpoint {
                    picard_tol: it.picard_tol,
                    max_iters: it.max_picard_iters,
                },
            },
            dt,
            n_steps: it.n_steps,
            record_interval: it.record_interval,
            snapshot_interval: if self.output.snapshots { it.snapshot_interval } else { 0 },
        })
    }

    /// The configuration with all defaults filled, as TOML.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
x_extent = [1.0]
x_points = [8]
k_shells = [1.0]
k_angles = 8

[initial]
profile = "uniform"
intensity = 1.0

[integrator]
dt = 0.01
n_steps = 3
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.medium, Medium::Constant { v0: 1.0 });
        assert_eq!(c.kernel, KernelSection::None);
        let it = c.integrator.as_ref().unwrap();
        assert_eq!(it.scheme, SchemeName::Midpoint);
        assert_eq!(it.record_interval, 1);
        assert_eq!(it.snapshot_interval, 0);
        assert_eq!(c.output.dir, PathBuf::from("polrad-out"));
        assert_eq!(c.verify, SuiteInputs::default());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = parse_config_str(MINIMAL).unwrap();
        let text = c.resolved_toml();
        assert!(text.contains("record_interval = 1"));
        assert_eq!(parse_config_str(&text).unwrap(), c);
    }

    #[test]
    fn negative_shell_names_key() {
        let bad = MINIMAL.replace("k_shells = [1.0]", "k_shells = [-1.0]");
        let e = parse_config_str(&bad).unwrap_err();
        assert_eq!(e.path, "grid.k_shells[0]");
        assert!(e.to_string().contains("grid.k_shells[0]"));
    }

    #[test]
    fn dt_and_cfl_conflict() {
        let bad = MINIMAL.replace("dt = 0.01", "dt = 0.01\ncfl_safety = 0.5");
        let e = parse_config_str(&bad).unwrap_err();
        assert_eq!(e.path, "integrator");
        assert!(e.msg.contains("not both"));
    }

    #[test]
    fn cfl_safety_defaults_when_dt_absent() {
        let c = parse_config_str(&MINIMAL.replace("dt = 0.01", "")).unwrap();
        assert_eq!(c.integrator.as_ref().unwrap().cfl_safety, Some(DEFAULT_CFL_SAFETY));
        assert!(c.resolved_toml().contains("cfl_safety = 0.5"));
    }

    #[test]
    fn type_mismatch_names_key() {
        let bad = MINIMAL.replace("k_angles = 8", "k_angles = \"many\"");
        assert_eq!(parse_config_str(&bad).unwrap_err().path, "grid.k_angles");
    }

    #[test]
    fn missing_key_and_unknown_profile() {
        let bad = MINIMAL.replace("n_steps = 3", "");
        let e = parse_config_str(&bad).unwrap_err();
        assert_eq!(e.path, "integrator");
        assert!(e.msg.contains("n_steps"), "{e}");
        let bad = MINIMAL.replace("\"uniform\"", "\"plaid\"");
        let e = parse_config_str(&bad).unwrap_err();
        assert_eq!(e.path, "initial.profile");
        assert!(e.msg.contains("plaid"), "{e}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let e = parse_config_str("[grid]\nx_points = [8\n").unwrap_err();
        assert!(e.msg.contains("line"), "{e}");
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let text = MINIMAL.replace("intensity = 1.0", "intensity = 1.0\nnoise = 0.1");
        let c = parse_config_str(&text).unwrap();
        let g = c.build_grid().unwrap();
        let a = c.initial_field(&g).unwrap();
        let b = c.initial_field(&g).unwrap();
        assert_eq!(a.data, b.data);
        assert!(a.data.data().iter().any(|h| h.i() != 1.0));
    }

    #[test]
    fn polarization_fraction_bounded() {
        let text = MINIMAL.replace("intensity = 1.0", "intensity = 1.0\npolarization = [0.8, 0.8, 0.0]");
        assert_eq!(parse_config_str(&text).unwrap_err().path, "initial.polarization");
    }
}
