//! Radially symmetric stationary solution and its rescaling to the unit ball.
//!
//! Profiles are stored on the unit grid s = r/R. All rates in a state are the
//! ones that hold on its own radius, so a rescaled state carries R^2 f, R^2 g.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::collocation::{Parity, RadialGrid};
use crate::error::{Error, Result};
use crate::model::{validate_assumptions, RateFunction};
use crate::roots::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryOptions {
    pub n: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub n_scan: usize,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub root_tol: f64,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            n: 128,
            r_min: 1e-3,
            r_max: 50.0,
            n_scan: 200,
            newton_tol: 1e-8,
            max_newton: 50,
            root_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub nutrient: f64,
    pub divergence: f64,
    pub momentum: f64,
    pub growth_integral: f64,
    pub boundary_velocity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryState {
    pub radius: f64,
    pub grid: RadialGrid,
    pub sigma: Vec<f64>,
    pub sigma_prime_1: f64,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    /// Surface tension in unit-ball units.
    pub gamma: f64,
    pub f: RateFunction,
    pub g: RateFunction,
    pub residuals: Residuals,
}

impl StationaryState {
    /// Physical radii of the grid nodes.
    pub fn radii(&self) -> Vec<f64> {
        self.grid.nodes().iter().map(|s| s * self.radius).collect()
    }

    /// sigma at the center, by interpolation.
    pub fn sigma_center(&self) -> f64 {
        self.grid.interpolate(&self.sigma, Parity::Even, 0.0)
    }

    pub fn g_values(&self) -> Vec<f64> {
        self.sigma.iter().map(|&u| self.g.value(u)).collect()
    }

    pub fn g_prime_values(&self) -> Vec<f64> {
        self.sigma.iter().map(|&u| self.g.derivative(u)).collect()
    }

    pub fn f_prime_values(&self) -> Vec<f64> {
        self.sigma.iter().map(|&u| self.f.derivative(u)).collect()
    }

    /// Recompute the profile on another grid at the same radius.
    pub fn on_grid(&self, grid: RadialGrid, opts: &StationaryOptions) -> Result<Self> {
        let init: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&s| self.grid.interpolate(&self.sigma, Parity::Even, s))
            .collect();
        let sigma = solve_nutrient_profile_from(&self.f, self.radius, &grid, &init, opts)?;
        build_state(self.radius, grid, sigma, self.gamma, self.f.clone(), self.g.clone())
    }
}

/// A stationary state with R_s = 1; everything downstream takes this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitBallState(StationaryState);

impl Deref for UnitBallState {
    type Target = StationaryState;
    fn deref(&self) -> &StationaryState {
        &self.0
    }
}

impl UnitBallState {
    pub fn into_inner(self) -> StationaryState {
        self.0
    }

    pub fn g_at_boundary(&self) -> f64 {
        self.g.value(1.0)
    }

    pub fn on_grid(&self, grid: RadialGrid, opts: &StationaryOptions) -> Result<Self> {
        Ok(UnitBallState(self.0.on_grid(grid, opts)?))
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut s = self.0.clone();
        s.gamma = gamma;
        s.p = pressure_profile(&s.g, &s.sigma, gamma);
        UnitBallState(s)
    }
}

fn laplacian(grid: &RadialGrid) -> Result<DMatrix<f64>> {
    grid.radial_operator(0, &vec![0.0; grid.len()])
}

/// Solve u'' + (2/s)u' = R^2 f(u) on the unit grid with u(1) = 1; sigma(r) = u(r/R).
pub fn solve_nutrient_profile(
    f: &RateFunction,
    radius: f64,
    grid: &RadialGrid,
    opts: &StationaryOptions,
) -> Result<Vec<f64>> {
    solve_nutrient_profile_from(f, radius, grid, &vec![1.0; grid.len()], opts)
}

pub fn solve_nutrient_profile_from(
    f: &RateFunction,
    radius: f64,
    grid: &RadialGrid,
    init: &[f64],
    opts: &StationaryOptions,
) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::Domain {
            what: "R",
            value: radius,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let lap = laplacian(grid)?;
    let n = grid.len();
    let r2 = radius * radius;
    let mut u = DVector::from_column_slice(init);
    u[n - 1] = 1.0;
    let residual = |u: &DVector<f64>| -> DVector<f64> {
        let mut res = &lap * u;
        for i in 0..n - 1 {
            res[i] = res[i] / r2 - f.value(u[i]);
        }
        res[n - 1] = u[n - 1] - 1.0;
        res
    };
    let mut res = residual(&u);
    let mut history = vec![res.amax()];
    let mut last_step = f64::INFINITY;
    for _ in 0..opts.max_newton {
        let mut jac = lap.clone() / r2;
        for i in 0..n - 1 {
            jac[(i, i)] -= f.derivative(u[i]);
        }
        for k in 0..n {
            jac[(n - 1, k)] = 0.0;
        }
        jac[(n - 1, n - 1)] = 1.0;
        let du = jac
            .lu()
            .solve(&(-&res))
            .ok_or(Error::Singular("nutrient Newton step"))?;
        let norm0 = res.amax();
        let mut step = 1.0;
        let mut trial;
        let mut trial_res;
        loop {
            trial = &u + &du * step;
            trial_res = residual(&trial);
            if trial_res.amax() < norm0 || step < 1e-3 || du.amax() < 1e-12 {
                break;
            }
            step *= 0.5;
        }
        u = trial;
        res = trial_res;
        history.push(res.amax());
        let size = du.amax() * step;
        let stalled = size > 0.5 * last_step && size < 1e-9;
        last_step = size;
        if size <= 1e-13 * (1.0 + u.amax()) || stalled {
            let floor = 100.0 * row_scale(&lap, r2) * (1.0 + u.amax());
            if res.amax() <= opts.newton_tol.max(floor) {
                return Ok(u.as_slice().to_vec());
            }
            break;
        }
    }
    Err(Error::NewtonDivergence {
        iterations: history.len() - 1,
        history,
    })
}

// Roundoff floor of the collocation residual: eps times the largest row sum.
fn row_scale(a: &DMatrix<f64>, r2: f64) -> f64 {
    let m = (0..a.nrows())
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    f64::EPSILON * m / r2
}

/// R^3 times the unit-grid integral of g(u) s^2, i.e. the integral of g(sigma) r^2 over [0, R].
pub fn growth_integral(g: &RateFunction, sigma: &[f64], radius: f64, grid: &RadialGrid) -> f64 {
    let vals: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(sigma)
        .map(|(s, &u)| g.value(u) * s * s)
        .collect();
    radius.powi(3) * grid.integrate(&vals)
}

/// v(r) = r^-2 times the integral of g(sigma) rho^2 over [0, r]; returned at the nodes r = R s.
pub fn velocity_profile(g: &RateFunction, sigma: &[f64], radius: f64, grid: &RadialGrid) -> Result<Vec<f64>> {
    let n = grid.len();
    let mut a = grid.d1(Parity::Odd)?.clone();
    for (i, s) in grid.nodes().iter().enumerate() {
        a[(i, i)] += 2.0 / s;
    }
    let rhs = DVector::from_iterator(n, sigma.iter().map(|&u| g.value(u)));
    let w = a.lu().solve(&rhs).ok_or(Error::Singular("velocity quadrature"))?;
    Ok(w.iter().map(|x| x * radius).collect())
}

/// p = (4/3) g(sigma) + gamma on the unit ball.
pub fn pressure_profile(g: &RateFunction, sigma: &[f64], gamma: f64) -> Vec<f64> {
    sigma.iter().map(|&u| 4.0 / 3.0 * g.value(u) + gamma).collect()
}

fn build_state(
    radius: f64,
    grid: RadialGrid,
    sigma: Vec<f64>,
    gamma: f64,
    f: RateFunction,
    g: RateFunction,
) -> Result<StationaryState> {
    let n = grid.len();
    let du = grid.derivative(&sigma, Parity::Even)?;
    let sigma_prime_1 = du[n - 1] / radius;
    let v = velocity_profile(&g, &sigma, radius, &grid)?;
    // gamma * kappa with kappa = 1/R, in unit-ball units: gamma / R^2
    let p: Vec<f64> = sigma
        .iter()
        .map(|&u| 4.0 / 3.0 * g.value(u) + gamma / (radius * radius))
        .collect();
    let residuals = compute_residuals(&grid, radius, &f, &g, &sigma, &v, &p)?;
    Ok(StationaryState {
        radius,
        grid,
        sigma,
        sigma_prime_1,
        v,
        p,
        gamma,
        f,
        g,
        residuals,
    })
}

fn compute_residuals(
    grid: &RadialGrid,
    radius: f64,
    f: &RateFunction,
    g: &RateFunction,
    sigma: &[f64],
    v: &[f64],
    p: &[f64],
) -> Result<Residuals> {
    let n = grid.len();
    let s = grid.nodes();
    let lap = laplacian(grid)?;
    let r2 = radius * radius;
    let lu = &lap * DVector::from_column_slice(sigma);
    let nutrient = (0..n - 1)
        .map(|i| (lu[i] / r2 - f.value(sigma[i])).abs())
        .fold((sigma[n - 1] - 1.0).abs(), f64::max);

    let gv: Vec<f64> = sigma.iter().map(|&u| g.value(u)).collect();
    let dv = grid.derivative(v, Parity::Odd)?;
    let d2v = grid.d2(Parity::Odd)? * DVector::from_column_slice(v);
    let dp = grid.derivative(p, Parity::Even)?;
    let dg = grid.derivative(&gv, Parity::Even)?;
    let mut divergence: f64 = 0.0;
    let mut momentum: f64 = 0.0;
    for i in 0..n {
        let r = s[i] * radius;
        let v1 = dv[i] / radius;
        let v2 = d2v[i] / r2;
        divergence = divergence.max((v1 + 2.0 * v[i] / r - gv[i]).abs());
        let lap_v = v2 + 2.0 * v1 / r - 2.0 * v[i] / (r * r);
        momentum = momentum.max((-lap_v + dp[i] / radius - dg[i] / (3.0 * radius)).abs());
    }
    Ok(Residuals {
        nutrient,
        divergence,
        momentum,
        growth_integral: growth_integral(g, sigma, radius, grid),
        boundary_velocity: v[n - 1].abs(),
    })
}

/// Locate R_s by a geometric scan for a sign change of the growth integral, then Brent.
pub fn find_stationary_radius(
    f: &RateFunction,
    g: &RateFunction,
    gamma: f64,
    opts: &StationaryOptions,
) -> Result<StationaryState> {
    let report = validate_assumptions(f, g);
    if !report.passed() {
        return Err(Error::Assumptions(report.summary()));
    }
    let grid = RadialGrid::chebyshev(opts.n)?;
    let ratio = (opts.r_max / opts.r_min).powf(1.0 / (opts.n_scan - 1) as f64);
    let mut warm = vec![1.0; grid.len()];
    let mut prev: Option<(f64, f64, Vec<f64>)> = None;
    let mut bracket = None;
    for k in 0..opts.n_scan {
        let radius = opts.r_min * ratio.powi(k as i32);
        let u = solve_nutrient_profile_from(f, radius, &grid, &warm, opts)?;
        let gi = growth_integral(g, &u, radius, &grid);
        if let Some((r0, g0, u0)) = &prev {
            if g0.signum() != gi.signum() || gi == 0.0 {
                bracket = Some((*r0, radius, u0.clone()));
                break;
            }
        }
        warm.clone_from(&u);
        prev = Some((radius, gi, u));
    }
    let (lo, hi, u_lo) = bracket.ok_or(Error::NoStationaryRadius {
        lo: opts.r_min,
        hi: opts.r_max,
    })?;
    let mut warm = u_lo;
    let radius = brent(
        |r| {
            let u = solve_nutrient_profile_from(f, r, &grid, &warm, opts)?;
            let gi = growth_integral(g, &u, r, &grid);
            warm = u;
            Ok(gi)
        },
        lo,
        hi,
        1e-15,
        0.01 * opts.root_tol,
    )?;
    let sigma = solve_nutrient_profile_from(f, radius, &grid, &warm, opts)?;
    build_state(radius, grid, sigma, gamma, f.clone(), g.clone())
}

/// Map to the unit ball: s = r/R_s, f -> R_s^2 f, g -> R_s^2 g.
pub fn rescale_to_unit(state: &StationaryState) -> UnitBallState {
    let r = state.radius;
    let r2 = r * r;
    let f = state.f.scaled(r2);
    let g = state.g.scaled(r2);
    let v: Vec<f64> = state.v.iter().map(|x| x * r).collect();
    let p = pressure_profile(&g, &state.sigma, state.gamma);
    let residuals = compute_residuals(&state.grid, 1.0, &f, &g, &state.sigma, &v, &p).unwrap_or(state.residuals);
    UnitBallState(StationaryState {
        radius: 1.0,
        grid: state.grid.clone(),
        sigma: state.sigma.clone(),
        sigma_prime_1: state.sigma_prime_1 * r,
        v,
        p,
        gamma: state.gamma,
        f,
        g,
        residuals,
    })
}

/// Solve the unscaled problem and rescale it in one go.
pub fn unit_ball_state(
    f: &RateFunction,
    g: &RateFunction,
    gamma: f64,
    opts: &StationaryOptions,
) -> Result<UnitBallState> {
    Ok(rescale_to_unit(&find_stationary_radius(f, g, gamma, opts)?))
}
