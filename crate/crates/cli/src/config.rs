use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tumor_spectra_core::eps_spectrum::ThresholdPolicy;
use tumor_spectra_core::simulate::Stepper;
use tumor_spectra_core::{RateSpec, StationaryOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub threshold: ThresholdConfig,
    #[serde(default)]
    pub eps_spectrum: EpsSpectrumConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub f: RateSpec,
    pub g: RateSpec,
    pub epsilon: f64,
    /// Surface tension in unit-ball units.
    pub gamma: f64,
    #[serde(default)]
    pub sigma_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n_radial: usize,
    /// Spherical-harmonic truncation degree.
    #[serde(rename = "L")]
    pub harmonic_degree: usize,
    pub l_max: usize,
    pub newton_tol: f64,
    pub root_tol: f64,
    pub max_newton: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub n_scan: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            n_radial: 64,
            harmonic_degree: 16,
            l_max: 64,
            newton_tol: 1e-8,
            root_tol: 1e-10,
            max_newton: 50,
            r_min: 1e-3,
            r_max: 50.0,
            n_scan: 200,
        }
    }
}

impl Numerics {
    pub fn stationary_options(&self) -> StationaryOptions {
        StationaryOptions {
            n: self.n_radial,
            r_min: self.r_min,
            r_max: self.r_max,
            n_scan: self.n_scan,
            newton_tol: self.newton_tol,
            max_newton: self.max_newton,
            root_tol: self.root_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    /// Highest degree scanned for eps_0.
    pub l_max: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
    pub extend_to: f64,
    pub bisection_steps: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        let p = ThresholdPolicy::default();
        ThresholdConfig {
            l_max: 16,
            eps_min: p.eps_min,
            eps_max: p.eps_max,
            points: p.points,
            extend_to: p.extend_to,
            bisection_steps: p.bisection_steps,
        }
    }
}

impl ThresholdConfig {
    pub fn policy(&self) -> ThresholdPolicy {
        ThresholdPolicy {
            eps_min: self.eps_min,
            eps_max: self.eps_max,
            points: self.points,
            extend_to: self.extend_to,
            bisection_steps: self.bisection_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsSpectrumConfig {
    pub degrees: Vec<usize>,
    pub epsilons: Vec<f64>,
}

impl Default for EpsSpectrumConfig {
    fn default() -> Self {
        EpsSpectrumConfig {
            degrees: vec![0, 1, 2, 3],
            epsilons: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Relative radius perturbation: R0 = (1 + a) R_s.
    pub perturbation: f64,
    pub modal_l: usize,
    pub modal_horizon: f64,
    pub modal_dt: f64,
    pub stepper: Stepper,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            horizon: 5.0,
            dt: 0.01,
            perturbation: 0.01,
            modal_l: 2,
            modal_horizon: 6.0,
            modal_dt: 0.01,
            stepper: Stepper::TrBdf2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Surface tensions as multiples of gamma_*.
    pub gamma_factors: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub l_max: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            gamma_factors: vec![0.8, 1.2],
            epsilons: vec![1e-3, 1e-2, 1e-1],
            l_max: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigError {
    pub errors: Vec<FieldError>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.errors.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            errors: vec![FieldError {
                path: path.into(),
                message: message.into(),
            }],
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::single("<file>", format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::single(
            if path == "." { "<root>".into() } else { path },
            e.into_inner().to_string(),
        )
    })?;
    let errors = validate(&cfg);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { errors })
    }
}

fn validate(cfg: &RunConfig) -> Vec<FieldError> {
    let mut errs = Vec::new();
    let mut check = |ok: bool, path: &str, message: String| {
        if !ok {
            errs.push(FieldError {
                path: path.into(),
                message,
            });
        }
    };
    let m = &cfg.model;
    check(
        m.epsilon >= 0.0 && m.epsilon.is_finite(),
        "model.epsilon",
        format!("must be >= 0, got {}", m.epsilon),
    );
    check(
        m.gamma > 0.0 && m.gamma.is_finite(),
        "model.gamma",
        format!("must be > 0, got {}", m.gamma),
    );
    if let Some(s) = m.sigma_max {
        check(s >= 2.0, "model.sigma_max", format!("must be >= 2, got {s}"));
    }
    let n = &cfg.numerics;
    check(
        n.n_radial >= 16,
        "numerics.n_radial",
        format!("must be >= 16, got {}", n.n_radial),
    );
    check(n.l_max >= 2, "numerics.l_max", format!("must be >= 2, got {}", n.l_max));
    check(
        n.harmonic_degree >= 1,
        "numerics.L",
        format!("must be >= 1, got {}", n.harmonic_degree),
    );
    for (name, v) in [("newton_tol", n.newton_tol), ("root_tol", n.root_tol)] {
        check(v > 0.0, &format!("numerics.{name}"), format!("must be > 0, got {v}"));
    }
    check(n.max_newton >= 1, "numerics.max_newton", "must be >= 1".into());
    check(
        n.r_min > 0.0 && n.r_max > n.r_min,
        "numerics.r_max",
        format!("need 0 < r_min < r_max, got [{}, {}]", n.r_min, n.r_max),
    );
    check(
        n.n_scan >= 2,
        "numerics.n_scan",
        format!("must be >= 2, got {}", n.n_scan),
    );

    let t = &cfg.threshold;
    check(
        t.l_max >= 2,
        "threshold.l_max",
        format!("must be >= 2, got {}", t.l_max),
    );
    check(
        t.eps_min > 0.0 && t.eps_max > t.eps_min,
        "threshold.eps_max",
        format!("need 0 < eps_min < eps_max, got [{}, {}]", t.eps_min, t.eps_max),
    );
    check(
        t.points >= 2,
        "threshold.points",
        format!("must be >= 2, got {}", t.points),
    );
    check(
        t.extend_to >= t.eps_max,
        "threshold.extend_to",
        "must be >= eps_max".into(),
    );

    let e = &cfg.eps_spectrum;
    check(!e.degrees.is_empty(), "eps_spectrum.degrees", "must be nonempty".into());
    check(
        !e.epsilons.is_empty(),
        "eps_spectrum.epsilons",
        "must be nonempty".into(),
    );
    for (i, v) in e.epsilons.iter().enumerate() {
        check(
            *v > 0.0,
            &format!("eps_spectrum.epsilons[{i}]"),
            format!("must be > 0, got {v}"),
        );
    }

    let s = &cfg.simulate;
    check(s.dt > 0.0, "simulate.dt", format!("must be > 0, got {}", s.dt));
    check(s.horizon > s.dt, "simulate.horizon", "must exceed dt".into());
    check(s.perturbation > -1.0, "simulate.perturbation", "must be > -1".into());
    check(
        s.modal_dt > 0.0,
        "simulate.modal_dt",
        format!("must be > 0, got {}", s.modal_dt),
    );
    check(
        s.modal_horizon > s.modal_dt,
        "simulate.modal_horizon",
        "must exceed modal_dt".into(),
    );

    let w = &cfg.sweep;
    check(
        !w.gamma_factors.is_empty(),
        "sweep.gamma_factors",
        "must be nonempty".into(),
    );
    check(!w.epsilons.is_empty(), "sweep.epsilons", "must be nonempty".into());
    for (i, v) in w.gamma_factors.iter().enumerate() {
        check(
            *v > 0.0,
            &format!("sweep.gamma_factors[{i}]"),
            format!("must be > 0, got {v}"),
        );
    }
    for (i, v) in w.epsilons.iter().enumerate() {
        check(
            *v > 0.0,
            &format!("sweep.epsilons[{i}]"),
            format!("must be > 0, got {v}"),
        );
    }
    check(w.l_max >= 2, "sweep.l_max", format!("must be >= 2, got {}", w.l_max));
    errs
}
