use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use tumor_spectra_core::eps_spectrum::{
    epsilon_threshold, modal_eigenvalues, spectral_abscissa, EpsilonThreshold, ModalWorkspace,
};
use tumor_spectra_core::geometry::Cutoff;
use tumor_spectra_core::simulate::{
    evolve_linear_mode, simulate_radial_nonlinear, slow_manifold_profile, RadialOptions,
};
use tumor_spectra_core::spectrum::alpha_slope;
use tumor_spectra_core::stokes::bgamma_via_stokes;
use tumor_spectra_core::{
    find_stationary_radius, rescale_to_unit, spectral_summary, validate_assumptions, Error, RateFunction,
    StationaryState, UnitBallState,
};

use crate::config::{ConfigError, RunConfig};
use crate::output::{sha256_hex, write_atomic, Cell, OutputDir};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Stationary,
    Spectrum,
    Threshold,
    EpsSpectrum,
    Simulate,
    Sweep,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Stationary => "stationary",
            Command::Spectrum => "spectrum",
            Command::Threshold => "threshold",
            Command::EpsSpectrum => "eps-spectrum",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

/// Failure reported on stderr as a JSON block.
#[derive(Debug, Clone, Serialize)]
pub struct RunError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl RunError {
    pub fn to_json(&self) -> String {
        json!({ "error": self }).to_string()
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let validation = e.is_validation();
        let details = match &e {
            Error::Eigen { dump: Some(p), .. } => Some(json!({ "matrix_dump": p })),
            Error::BlowUp { time, radius, .. } => Some(json!({ "time": time, "radius": radius })),
            _ => None,
        };
        RunError {
            kind: if validation { "validation" } else { "solver" },
            message: e.to_string(),
            exit_code: if validation { 2 } else { 3 },
            details,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError {
            kind: "config",
            message: e.to_string(),
            exit_code: 2,
            details: Some(json!(e.errors)),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError {
            kind: "io",
            message: e.to_string(),
            exit_code: 3,
            details: None,
        }
    }
}

type Res<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub gamma_star: f64,
    pub l_star: usize,
    pub alpha0: f64,
    pub alpha_star: f64,
    pub epsilon0: Option<f64>,
    pub tail_bound_met: bool,
    pub status: &'static str,
    pub gamma: f64,
    pub l_max: usize,
}

struct Run {
    cfg: RunConfig,
    out: OutputDir,
    cache_dir: PathBuf,
    cache_files: Vec<String>,
    residuals: BTreeMap<String, f64>,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

/// Run one command and write its outputs plus manifest.json into `out`.
pub fn run_command(cmd: Command, cfg: RunConfig, out: &Path) -> Res<Vec<String>> {
    let started = chrono::Utc::now().to_rfc3339();
    let hash = config_hash(&cfg);
    let mut run = Run {
        cache_dir: out.join("cache"),
        out: OutputDir::create(out)?,
        cfg,
        cache_files: Vec::new(),
        residuals: BTreeMap::new(),
    };
    let result = match cmd {
        Command::Stationary => run.stationary_cmd(),
        Command::Spectrum => run.spectrum_cmd(),
        Command::Threshold => run.threshold_cmd(),
        Command::EpsSpectrum => run.eps_spectrum_cmd(),
        Command::Simulate => run.simulate_cmd(),
        Command::Sweep => run.sweep_cmd(),
    };
    let mut files: Vec<String> = run.out.files().to_vec();
    files.push("manifest.json".into());
    let manifest = json!({
        "artifact": "tumor-spectra",
        "version": VERSION,
        "command": cmd.to_string(),
        "config_hash": hash,
        "seed": run.cfg.seed,
        "started_at": started,
        "finished_at": chrono::Utc::now().to_rfc3339(),
        "status": if result.is_ok() { "ok" } else { "failed" },
        "error": result.as_ref().err(),
        "residuals": run.residuals,
        "cutoff_profile": format!(
            "linear ramp with quadratic shoulders, delta = {}, max slope {}",
            tumor_spectra_core::geometry::DEFAULT_DELTA,
            Cutoff { delta: tumor_spectra_core::geometry::DEFAULT_DELTA }.max_slope()
        ),
        "files": files,
        "cache": run.cache_files,
    });
    run.out.write_json("manifest.json", &manifest)?;
    result.map(|_| files)
}

fn rate_functions(cfg: &RunConfig) -> Res<(RateFunction, RateFunction)> {
    let make = |spec| match cfg.model.sigma_max {
        Some(m) => RateFunction::with_sigma_max(spec, m),
        None => RateFunction::new(spec),
    };
    Ok((make(cfg.model.f.clone())?, make(cfg.model.g.clone())?))
}

impl Run {
    fn stationary_state(&mut self) -> Res<StationaryState> {
        let (f, g) = rate_functions(&self.cfg)?;
        let report = validate_assumptions(&f, &g);
        if !report.passed() {
            return Err(RunError {
                kind: "validation",
                message: format!("assumptions violated: {}", report.summary()),
                exit_code: 2,
                details: Some(json!(report)),
            });
        }
        let opts = self.cfg.numerics.stationary_options();
        let key = json!({
            "version": VERSION,
            "f": f,
            "g": g,
            "options": opts,
            "gamma": self.cfg.model.gamma,
        });
        let name = format!("stationary-{}.json", &sha256_hex(key.to_string().as_bytes())[..16]);
        let path = self.cache_dir.join(&name);
        self.cache_files.push(format!("cache/{name}"));
        let cached = std::fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str::<StationaryState>(&t).ok());
        let state = match cached {
            Some(s) => s,
            None => {
                let s = find_stationary_radius(&f, &g, self.cfg.model.gamma, &opts)?;
                let text = serde_json::to_string(&s).map_err(std::io::Error::other)?;
                write_atomic(&path, text.as_bytes())?;
                s
            }
        };
        let r = &state.residuals;
        self.residuals.insert("stationary.nutrient".into(), r.nutrient);
        self.residuals.insert("stationary.divergence".into(), r.divergence);
        self.residuals.insert("stationary.momentum".into(), r.momentum);
        self.residuals
            .insert("stationary.growth_integral".into(), r.growth_integral);
        Ok(state)
    }

    fn unit_state(&mut self) -> Res<UnitBallState> {
        Ok(rescale_to_unit(&self.stationary_state()?))
    }

    fn stationary_cmd(&mut self) -> Res<()> {
        let s = self.stationary_state()?;
        let rows: Vec<Vec<Cell>> = s
            .radii()
            .into_iter()
            .enumerate()
            .map(|(i, r)| vec![r.into(), s.sigma[i].into(), s.v[i].into(), s.p[i].into()])
            .collect();
        self.out.write_csv("stationary.csv", &["r", "sigma", "v", "p"], &rows)?;
        let u = rescale_to_unit(&s);
        let sidecar = json!({
            "R_s": s.radius,
            "sigma_prime_1": s.sigma_prime_1,
            "sigma_center": s.sigma_center(),
            "gamma": s.gamma,
            "residuals": s.residuals,
            "unit_ball": {
                "sigma_prime_1": u.sigma_prime_1,
                "residuals": u.residuals,
            },
        });
        self.out.write_json("stationary.json", &sidecar)?;
        Ok(())
    }

    fn summary(&mut self, u: &UnitBallState) -> Res<(Summary, tumor_spectra_core::SpectralSummary)> {
        let gamma = self.cfg.model.gamma;
        let sp = spectral_summary(u, gamma, self.cfg.numerics.l_max)?;
        let summary = Summary {
            gamma_star: sp.gamma_star,
            l_star: sp.l_star,
            alpha0: sp.alpha0,
            alpha_star: sp.alpha_star,
            epsilon0: None,
            tail_bound_met: sp.tail_bound_met,
            status: if sp.tail_bound_met { "ok" } else { "warning" },
            gamma,
            l_max: sp.l_max,
        };
        Ok((summary, sp))
    }

    fn spectrum_cmd(&mut self) -> Res<()> {
        let u = self.unit_state()?;
        let gamma = self.cfg.model.gamma;
        let (summary, sp) = self.summary(&u)?;
        let mut rows = vec![
            vec![0usize.into(), Cell::Empty, sp.alpha0.into(), sp.alpha0.into()],
            vec![1usize.into(), Cell::Empty, 0.0.into(), 0.0.into()],
        ];
        for d in &sp.degrees {
            rows.push(vec![d.l.into(), d.gamma_l.into(), d.alpha_l.into(), d.alpha_l.into()]);
        }
        self.out
            .write_csv("spectrum.csv", &["l", "gamma_l", "alpha_l", "multiplier"], &rows)?;

        let top = self.cfg.numerics.l_max.min(12);
        let oracle: Vec<(usize, f64, f64)> = (0..=top)
            .into_par_iter()
            .map(|l| {
                let formula = sp.multiplier(l).unwrap_or(f64::NAN);
                Ok((l, formula, bgamma_via_stokes(l, gamma, &u)?))
            })
            .collect::<tumor_spectra_core::Result<_>>()?;
        let mut worst: f64 = 0.0;
        let rows: Vec<Vec<Cell>> = oracle
            .iter()
            .map(|&(l, formula, stokes)| {
                let scale = match l {
                    0 => formula.abs(),
                    1 => 1.0,
                    _ => formula.abs().max(alpha_slope(l).abs() * gamma),
                };
                let rel = (stokes - formula).abs() / scale;
                worst = worst.max(rel);
                vec![l.into(), gamma.into(), formula.into(), stokes.into(), rel.into()]
            })
            .collect();
        self.residuals.insert("spectrum.oracle_max_rel_err".into(), worst);
        self.out.write_csv(
            "oracle.csv",
            &["l", "gamma", "multiplier_formula", "multiplier_stokes", "rel_err"],
            &rows,
        )?;
        self.out.write_json("summary.json", &summary)?;
        Ok(())
    }

    fn threshold_cmd(&mut self) -> Res<()> {
        let u = self.unit_state()?;
        let gamma = self.cfg.model.gamma;
        let (mut summary, _) = self.summary(&u)?;
        let ws = ModalWorkspace::new(u);
        let detail: Option<EpsilonThreshold> = if gamma > summary.gamma_star {
            match epsilon_threshold(&ws, gamma, self.cfg.threshold.l_max, &self.cfg.threshold.policy()) {
                Ok(t) => Some(t),
                Err(Error::BelowThreshold { .. }) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        summary.epsilon0 = detail.as_ref().and_then(|t| t.epsilon0);
        let detail_json = match &detail {
            Some(t) => json!(t),
            None => json!({ "gamma": gamma, "reason": "gamma does not exceed gamma_star" }),
        };
        self.out.write_json("threshold.json", &detail_json)?;
        self.out.write_json("summary.json", &summary)?;
        Ok(())
    }

    fn eps_spectrum_cmd(&mut self) -> Res<()> {
        let u = self.unit_state()?;
        let gamma = self.cfg.model.gamma;
        let ws = ModalWorkspace::new(u);
        let cells: Vec<(usize, f64)> = self
            .cfg
            .eps_spectrum
            .degrees
            .iter()
            .flat_map(|&l| self.cfg.eps_spectrum.epsilons.iter().map(move |&e| (l, e)))
            .collect();
        let reports = cells
            .par_iter()
            .map(|&(l, eps)| modal_eigenvalues(&ws.assemble(l, eps, gamma)?))
            .collect::<tumor_spectra_core::Result<Vec<_>>>()?;
        let mut assembly: f64 = 0.0;
        let rows: Vec<Vec<Cell>> = reports
            .iter()
            .map(|r| {
                vec![
                    r.l.into(),
                    r.epsilon.into(),
                    r.gamma.into(),
                    r.slow_branch.re.into(),
                    r.slow_branch.im.into(),
                    r.fast_branch_max.into(),
                    r.slow_eigvec_ratio.into(),
                ]
            })
            .collect();
        for &(l, eps) in &cells {
            assembly = assembly.max(ws.assemble(l, eps, gamma)?.assembly_residual);
        }
        self.residuals.insert("eps_spectrum.assembly".into(), assembly);
        self.out.write_csv(
            "eps_spectrum.csv",
            &[
                "l",
                "epsilon",
                "gamma",
                "slow_re",
                "slow_im",
                "fast_max_re",
                "eigvec_ratio",
            ],
            &rows,
        )?;
        Ok(())
    }

    fn simulate_cmd(&mut self) -> Res<()> {
        let u = self.unit_state()?;
        let eps = self.cfg.model.epsilon;
        let gamma = self.cfg.model.gamma;
        let sc = self.cfg.simulate.clone();
        let r0 = 1.0 + sc.perturbation;
        let opts = self.cfg.numerics.stationary_options();
        let sigma0 = slow_manifold_profile(&u.f, &u.g, eps, r0, &u.grid, &opts)?;
        let sim = simulate_radial_nonlinear(
            &u.f,
            &u.g,
            eps,
            r0,
            &sigma0,
            &u.grid,
            sc.horizon,
            sc.dt,
            &RadialOptions::default(),
        )?;
        let times = sim.times();
        let dev: Vec<f64> = sim.radii().iter().map(|r| (r - 1.0).abs()).collect();
        let centers = sim.sigma_center(&u.grid);
        let running = running_rate(&times, &dev);
        let rows: Vec<Vec<Cell>> = sim
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                vec![
                    s.t.into(),
                    s.radius.into(),
                    centers[i].into(),
                    running[i].map_or(Cell::Empty, Cell::F),
                ]
            })
            .collect();
        self.out
            .write_csv("trajectory.csv", &["t", "R", "sigma_center", "rate_running"], &rows)?;
        self.residuals
            .insert("simulate.volume_balance".into(), sim.max_volume_residual());
        let fit = if sc.perturbation != 0.0 {
            sim.fitted_rate(1.0).ok()
        } else {
            None
        };

        let ws = ModalWorkspace::new(u);
        let l0_slow = if eps > 0.0 {
            modal_eigenvalues(&ws.assemble(0, eps, gamma)?)?.slow_branch.re
        } else {
            ws.multiplier(0, gamma)?
        };
        let modal = if eps > 0.0 {
            let op = ws.assemble(sc.modal_l, eps, gamma)?;
            let rep = modal_eigenvalues(&op)?;
            let tr = evolve_linear_mode(
                &op,
                &vec![0.0; op.interior_len()],
                1.0,
                sc.modal_horizon,
                sc.modal_dt,
                sc.stepper,
            )?;
            let rows: Vec<Vec<Cell>> = tr
                .times
                .iter()
                .zip(&tr.c_values)
                .zip(&tr.phi_norms)
                .map(|((t, c), p)| vec![(*t).into(), (*c).into(), (*p).into()])
                .collect();
            self.out
                .write_csv("modal_trajectory.csv", &["t", "c", "phi_norm"], &rows)?;
            json!({
                "l": sc.modal_l,
                "fitted_rate": tr.fitted_rate,
                "fit_r2": tr.fit_r2,
                "slow_eigenvalue": rep.slow_branch.re,
            })
        } else {
            json!({ "l": sc.modal_l, "skipped": "epsilon = 0 has no modal time evolution" })
        };
        let report = json!({
            "units": "unit ball (R_s = 1)",
            "epsilon": eps,
            "gamma": gamma,
            "R0": r0,
            "nonlinear": {
                "fitted_rate": fit.map(|f| f.0),
                "fit_r2": fit.map(|f| f.1),
                "l0_slow_eigenvalue": l0_slow,
                "max_volume_residual": sim.max_volume_residual(),
                "final_radius": sim.states.last().map(|s| s.radius),
            },
            "modal": modal,
        });
        self.out.write_json("simulate.json", &report)?;
        Ok(())
    }

    fn sweep_cmd(&mut self) -> Res<()> {
        let u = self.unit_state()?;
        let sw = self.cfg.sweep.clone();
        let ws = ModalWorkspace::new(u);
        let gammas: Vec<f64> = (2..=sw.l_max)
            .into_par_iter()
            .map(|l| ws.mode(l).map(|m| m.formula_value))
            .collect::<tumor_spectra_core::Result<_>>()?;
        let gamma_star = gammas.into_iter().fold(f64::NEG_INFINITY, f64::max);
        let cells: Vec<(f64, f64)> = sw
            .gamma_factors
            .iter()
            .flat_map(|&k| sw.epsilons.iter().map(move |&e| (k * gamma_star, e)))
            .collect();
        let results: Vec<Option<f64>> = cells
            .par_iter()
            .map(|&(g, e)| spectral_abscissa(&ws, g, e, sw.l_max, f64::INFINITY).ok())
            .collect();
        let failed = results.iter().filter(|r| r.is_none()).count();
        let rows: Vec<Vec<Cell>> = cells
            .iter()
            .zip(&results)
            .map(|(&(g, e), r)| match r {
                Some(x) => vec![g.into(), e.into(), (*x).into(), (*x < 0.0).into()],
                None => vec![g.into(), e.into(), "failed".into(), "failed".into()],
            })
            .collect();
        self.residuals.insert("sweep.failed_cells".into(), failed as f64);
        self.out.write_csv(
            "stability_map.csv",
            &["gamma", "epsilon", "max_nonzero_re", "stable"],
            &rows,
        )?;
        self.out.write_json(
            "sweep.json",
            &json!({ "gamma_star": gamma_star, "l_max": sw.l_max, "cells": cells.len(), "failed": failed }),
        )?;
        Ok(())
    }
}

// d/dt log y by differences; None where y vanishes.
fn running_rate(t: &[f64], y: &[f64]) -> Vec<Option<f64>> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let (a, b) = if n < 2 {
                return None;
            } else if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            if y[a] > 0.0 && y[b] > 0.0 {
                Some((y[b].ln() - y[a].ln()) / (t[b] - t[a]))
            } else {
                None
            }
        })
        .collect()
}
