//! Per-degree eigenvalue formulas of the linearized boundary operator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stationary::UnitBallState;

/// Number of trailing degrees inspected by the truncation check.
pub const TAIL_LEN: usize = 8;

/// 4(2l+3)(l+1) / (l(l+2)(2l+1)).
pub fn gamma_prefactor(l: usize) -> f64 {
    let l = l as f64;
    4.0 * (2.0 * l + 3.0) * (l + 1.0) / (l * (l + 2.0) * (2.0 * l + 1.0))
}

/// d alpha_l / d gamma = -l(l+2)(2l+1) / (4(2l^2+4l+3)).
pub fn alpha_slope(l: usize) -> f64 {
    let l = l as f64;
    -l * (l + 2.0) * (2.0 * l + 1.0) / (4.0 * (2.0 * l * l + 4.0 * l + 3.0))
}

/// Solution of [Delta_l - f'(sigma_s)] u = 0 with u(1) = 1, regular at the origin.
pub fn unit_kernel(l: usize, state: &UnitBallState) -> Result<Vec<f64>> {
    let n = state.grid.len();
    state.grid.solve_radial(l, &state.f_prime_values(), &vec![0.0; n], 1.0)
}

/// F_l with F_l(1) = -sigma_s'(1).
pub fn solve_fl(l: usize, state: &UnitBallState) -> Result<Vec<f64>> {
    let k = -state.sigma_prime_1;
    Ok(unit_kernel(l, state)?.into_iter().map(|x| k * x).collect())
}

/// Integral of g'(sigma_s) F r^(l+2) over [0, 1].
fn weighted_integral(state: &UnitBallState, fl: &[f64], power: i32) -> f64 {
    let vals: Vec<f64> = state
        .grid
        .nodes()
        .iter()
        .zip(&state.sigma)
        .zip(fl)
        .map(|((r, &u), &x)| state.g.derivative(u) * x * r.powi(power))
        .collect();
    state.grid.integrate(&vals)
}

pub fn alpha0(state: &UnitBallState, f0: &[f64]) -> f64 {
    state.g_at_boundary() + weighted_integral(state, f0, 2)
}

pub fn gamma_l(l: usize, state: &UnitBallState, fl: &[f64]) -> Result<f64> {
    if l < 2 {
        return Err(Error::Domain {
            what: "l",
            value: l as f64,
            lo: 2.0,
            hi: f64::INFINITY,
        });
    }
    Ok(gamma_prefactor(l) * (state.g_at_boundary() + weighted_integral(state, fl, l as i32 + 2)))
}

pub fn alpha_l_of_gamma(l: usize, gamma: f64, gamma_l: f64) -> f64 {
    alpha_slope(l) * (gamma - gamma_l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeEntry {
    pub l: usize,
    pub gamma_l: f64,
    pub alpha_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub alpha0: f64,
    pub gamma: f64,
    /// Entries for l = 2..=l_max, ascending.
    pub degrees: Vec<DegreeEntry>,
    pub gamma_star: f64,
    pub l_star: usize,
    pub alpha_star: f64,
    pub l_max: usize,
    pub tail_bound_met: bool,
}

impl SpectralSummary {
    /// Boundary multiplier at degree l: alpha0, 0, then alpha_l(gamma).
    pub fn multiplier(&self, l: usize) -> Option<f64> {
        match l {
            0 => Some(self.alpha0),
            1 => Some(0.0),
            _ => self.degrees.get(l - 2).map(|d| d.alpha_l),
        }
    }

    pub fn gamma_l(&self, l: usize) -> Option<f64> {
        if l < 2 {
            None
        } else {
            self.degrees.get(l - 2).map(|d| d.gamma_l)
        }
    }

    /// Same thresholds at a different surface tension.
    pub fn at_gamma(&self, gamma: f64) -> Self {
        let degrees: Vec<DegreeEntry> = self
            .degrees
            .iter()
            .map(|d| DegreeEntry {
                alpha_l: alpha_l_of_gamma(d.l, gamma, d.gamma_l),
                ..*d
            })
            .collect();
        let alpha_star = degrees.iter().map(|d| d.alpha_l).fold(self.alpha0, f64::max);
        SpectralSummary {
            gamma,
            degrees,
            alpha_star,
            ..self.clone()
        }
    }
}

pub fn tail_bound_met(gammas: &[f64], gamma_star: f64) -> bool {
    if gammas.len() < TAIL_LEN {
        return false;
    }
    let tail = &gammas[gammas.len() - TAIL_LEN..];
    tail.iter().all(|&x| x < gamma_star / 10.0) && tail.windows(2).all(|w| w[1] < w[0])
}

pub fn spectral_summary(state: &UnitBallState, gamma: f64, l_max: usize) -> Result<SpectralSummary> {
    if l_max < 2 {
        return Err(Error::Config(format!("l_max must be >= 2, got {l_max}")));
    }
    let f0 = solve_fl(0, state)?;
    let a0 = alpha0(state, &f0);
    let gammas: Vec<f64> = (2..=l_max)
        .into_par_iter()
        .map(|l| solve_fl(l, state).and_then(|fl| gamma_l(l, state, &fl)))
        .collect::<Result<_>>()?;
    let (mut l_star, mut gamma_star) = (2, f64::NEG_INFINITY);
    for (i, &g) in gammas.iter().enumerate() {
        if g > gamma_star {
            gamma_star = g;
            l_star = i + 2;
        }
    }
    let degrees: Vec<DegreeEntry> = gammas
        .iter()
        .enumerate()
        .map(|(i, &g)| DegreeEntry {
            l: i + 2,
            gamma_l: g,
            alpha_l: alpha_l_of_gamma(i + 2, gamma, g),
        })
        .collect();
    let alpha_star = degrees.iter().map(|d| d.alpha_l).fold(a0, f64::max);
    Ok(SpectralSummary {
        alpha0: a0,
        gamma,
        degrees,
        gamma_star,
        l_star,
        alpha_star,
        l_max,
        tail_bound_met: tail_bound_met(&gammas, gamma_star),
    })
}
