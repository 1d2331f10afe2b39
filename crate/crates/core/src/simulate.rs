//! Time-domain checks: linear modal evolution and the radial free-boundary problem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::collocation::{Parity, RadialGrid};
use crate::eps_spectrum::ModalBlockOperator;
use crate::error::{Error, Result};
use crate::model::RateFunction;
use crate::stationary::{solve_nutrient_profile_from, StationaryOptions};

/// TR-BDF2 stage fraction.
const TR_GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    /// Trapezoid then BDF2; L-stable, second order.
    TrBdf2,
    /// Classical explicit Runge-Kutta; linear problems only.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    /// Leading fraction of samples dropped before fitting.
    pub skip_fraction: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { skip_fraction: 0.2 }
    }
}

/// Least-squares slope of log y against t over the window, with its R^2.
pub fn fit_exponential_rate(t: &[f64], y: &[f64], window: FitWindow) -> Result<(f64, f64)> {
    if t.len() != y.len() {
        return Err(Error::Fit("time and value series differ in length".into()));
    }
    let start = ((t.len() as f64) * window.skip_fraction).floor() as usize;
    let (t, y) = (&t[start..], &y[start..]);
    if t.len() < 2 {
        return Err(Error::Fit("fewer than two samples in the fit window".into()));
    }
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Fit(format!("nonpositive value {bad} in fit window")));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = ly.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - tm) * (x - tm)).sum();
    let sxy: f64 = t.iter().zip(&ly).map(|(x, v)| (x - tm) * (v - ym)).sum();
    let syy: f64 = ly.iter().map(|v| (v - ym) * (v - ym)).sum();
    let slope = sxy / sxx;
    let r2 = if syy <= 1e-300 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, r2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModalTrajectory {
    pub times: Vec<f64>,
    pub c_values: Vec<f64>,
    pub phi_norms: Vec<f64>,
    pub fitted_rate: f64,
    pub fit_r2: f64,
}

/// Integrate dU/dt = M U for one degree from (phi0, c0) over [0, horizon].
pub fn evolve_linear_mode(
    op: &ModalBlockOperator,
    phi0: &[f64],
    c0: f64,
    horizon: f64,
    dt: f64,
    stepper: Stepper,
) -> Result<LinearModalTrajectory> {
    let m = op.interior_len();
    if phi0.len() != m {
        return Err(Error::Config(format!(
            "initial phi has {} entries, operator expects {m}",
            phi0.len()
        )));
    }
    if !(dt > 0.0) || !(horizon > dt) {
        return Err(Error::Config(format!(
            "need 0 < dt < horizon, got dt = {dt}, T = {horizon}"
        )));
    }
    let a = &op.matrix;
    let steps = (horizon / dt).round() as usize;
    let mut y = DVector::from_column_slice(phi0).resize_vertically(m + 1, c0);
    let eye = DMatrix::<f64>::identity(m + 1, m + 1);

    enum Scheme {
        Implicit {
            stage1: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
            rhs1: DMatrix<f64>,
            stage2: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        },
        Explicit,
    }
    let scheme = match stepper {
        Stepper::TrBdf2 => {
            let h1 = 0.5 * TR_GAMMA * dt;
            let d = (1.0 - TR_GAMMA) / (2.0 - TR_GAMMA) * dt;
            Scheme::Implicit {
                stage1: (&eye - a * h1).lu(),
                rhs1: &eye + a * h1,
                stage2: (&eye - a * d).lu(),
            }
        }
        Stepper::Rk4 => {
            let rho = crate::eps_spectrum::raw_eigenvalues(op)?
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if dt * rho > 2.5 {
                return Err(Error::Config(format!(
                    "explicit step dt = {dt:e} exceeds stability limit {:e}",
                    2.5 / rho
                )));
            }
            Scheme::Explicit
        }
    };
    let w1 = 1.0 / (TR_GAMMA * (2.0 - TR_GAMMA));
    let w0 = (1.0 - TR_GAMMA).powi(2) / (TR_GAMMA * (2.0 - TR_GAMMA));

    let record = |y: &DVector<f64>| (y[m], y.rows(0, m).amax());
    let mut times = Vec::with_capacity(steps + 1);
    let mut c_values = Vec::with_capacity(steps + 1);
    let mut phi_norms = Vec::with_capacity(steps + 1);
    let (c, p) = record(&y);
    times.push(0.0);
    c_values.push(c);
    phi_norms.push(p);
    for k in 1..=steps {
        y = match &scheme {
            Scheme::Implicit { stage1, rhs1, stage2 } => {
                let ystar = stage1.solve(&(rhs1 * &y)).ok_or(Error::Singular("TR-BDF2 stage one"))?;
                let rhs = &ystar * w1 - &y * w0;
                stage2.solve(&rhs).ok_or(Error::Singular("TR-BDF2 stage two"))?
            }
            Scheme::Explicit => {
                let k1 = a * &y;
                let k2 = a * (&y + &k1 * (0.5 * dt));
                let k3 = a * (&y + &k2 * (0.5 * dt));
                let k4 = a * (&y + &k3 * dt);
                &y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
            }
        };
        let (c, p) = record(&y);
        times.push(k as f64 * dt);
        c_values.push(c);
        phi_norms.push(p);
    }
    let abs_c: Vec<f64> = c_values.iter().map(|x| x.abs()).collect();
    let (fitted_rate, fit_r2) = fit_exponential_rate(&times, &abs_c, FitWindow::default())?;
    Ok(LinearModalTrajectory {
        times,
        c_values,
        phi_norms,
        fitted_rate,
        fit_r2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFrontState {
    pub t: f64,
    pub radius: f64,
    /// sigma on the mapped grid s = r / R.
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialOptions {
    pub r_window: (f64, f64),
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            r_window: (1e-3, 50.0),
            newton_tol: 1e-12,
            max_newton: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSimulation {
    pub states: Vec<RadialFrontState>,
    /// Per step: (R1^3 - R0^3)/(3 dt) minus the trapezoid average of the growth integral.
    pub volume_residuals: Vec<f64>,
}

impl RadialSimulation {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.radius).collect()
    }

    pub fn max_volume_residual(&self) -> f64 {
        self.volume_residuals.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// Fitted decay rate of |R(t) - reference|.
    pub fn fitted_rate(&self, reference: f64) -> Result<(f64, f64)> {
        let y: Vec<f64> = self.states.iter().map(|s| (s.radius - reference).abs()).collect();
        fit_exponential_rate(&self.times(), &y, FitWindow::default())
    }

    /// Central sigma per stored state.
    pub fn sigma_center(&self, grid: &RadialGrid) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| grid.interpolate(&s.sigma, Parity::Even, 0.0))
            .collect()
    }
}

// Integral of g(u) s^2 over [0, 1]; dR/dt = R times this.
fn growth_rate(g: &RateFunction, u: &[f64], grid: &RadialGrid) -> f64 {
    let vals: Vec<f64> = grid.nodes().iter().zip(u).map(|(s, &x)| g.value(x) * s * s).collect();
    grid.integrate(&vals)
}

struct RadialSystem<'a> {
    f: &'a RateFunction,
    g: &'a RateFunction,
    epsilon: f64,
    grid: &'a RadialGrid,
    lap: DMatrix<f64>,
    d1: DMatrix<f64>,
}

impl RadialSystem<'_> {
    fn full(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.grid.len();
        let mut u = y.rows(0, n - 1).into_owned().resize_vertically(n, 1.0);
        u[n - 1] = 1.0;
        u
    }

    // y = (u at interior nodes, R)
    fn rhs(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.grid.len();
        let r = y[n - 1];
        let u = self.full(y);
        let lu = &self.lap * &u;
        let du = &self.d1 * &u;
        let rate = growth_rate(self.g, u.as_slice(), self.grid);
        let s = self.grid.nodes();
        let mut out = DVector::zeros(n);
        for i in 0..n - 1 {
            out[i] = (lu[i] / (r * r) - self.f.value(u[i])) / self.epsilon + s[i] * rate * du[i];
        }
        out[n - 1] = r * rate;
        out
    }

    fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.grid.len();
        let r = y[n - 1];
        let u = self.full(y);
        let lu = &self.lap * &u;
        let du = &self.d1 * &u;
        let rate = growth_rate(self.g, u.as_slice(), self.grid);
        let s = self.grid.nodes();
        let w = self.grid.weights();
        let drate: Vec<f64> = (0..n - 1)
            .map(|j| w[j] * self.g.derivative(u[j]) * s[j] * s[j])
            .collect();
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                jac[(i, j)] =
                    self.lap[(i, j)] / (r * r * self.epsilon) + s[i] * rate * self.d1[(i, j)] + s[i] * du[i] * drate[j];
            }
            jac[(i, i)] -= self.f.derivative(u[i]) / self.epsilon;
            jac[(i, n - 1)] = -2.0 * lu[i] / (r * r * r * self.epsilon);
        }
        for j in 0..n - 1 {
            jac[(n - 1, j)] = r * drate[j];
        }
        jac[(n - 1, n - 1)] = rate;
        jac
    }

    /// Solve y - a F(y) = b by Newton, starting from `guess`.
    fn implicit_solve(
        &self,
        a: f64,
        b: &DVector<f64>,
        guess: DVector<f64>,
        opts: &RadialOptions,
    ) -> Result<DVector<f64>> {
        let n = guess.len();
        let mut y = guess;
        let eye = DMatrix::<f64>::identity(n, n);
        let lu = (&eye - self.jacobian(&y) * a).lu();
        let mut history = Vec::new();
        for _ in 0..opts.max_newton {
            let res = &y - self.rhs(&y) * a - b;
            history.push(res.amax());
            let dy = lu.solve(&(-res)).ok_or(Error::Singular("radial Newton step"))?;
            y += &dy;
            if dy.amax() <= opts.newton_tol * (1.0 + y.amax()) {
                return Ok(y);
            }
        }
        Err(Error::NewtonDivergence {
            iterations: history.len(),
            history,
        })
    }
}

/// Nutrient profile at radius R on the slow manifold to first order in eps:
/// u0 + eps u1 with (Delta/R^2 - f'(u0)) u1 = R' (du0/dR - s u0_s / R), u1(1) = 0.
/// Starting from it avoids an O(eps) initial layer.
pub fn slow_manifold_profile(
    f: &RateFunction,
    g: &RateFunction,
    epsilon: f64,
    radius: f64,
    grid: &RadialGrid,
    opts: &StationaryOptions,
) -> Result<Vec<f64>> {
    let n = grid.len();
    let u0 = solve_nutrient_profile_from(f, radius, grid, &vec![1.0; n], opts)?;
    if epsilon == 0.0 {
        return Ok(u0);
    }
    let h = 1e-5 * radius;
    let up = solve_nutrient_profile_from(f, radius + h, grid, &u0, opts)?;
    let um = solve_nutrient_profile_from(f, radius - h, grid, &u0, opts)?;
    let du = grid.derivative(&u0, Parity::Even)?;
    let rdot = radius * growth_rate(g, &u0, grid);
    let s = grid.nodes();
    let rhs: Vec<f64> = (0..n)
        .map(|i| rdot * ((up[i] - um[i]) / (2.0 * h) - s[i] * du[i] / radius) * radius * radius)
        .collect();
    let coeff: Vec<f64> = u0.iter().map(|&x| radius * radius * f.derivative(x)).collect();
    let u1 = grid.solve_radial(0, &coeff, &rhs, 0.0)?;
    Ok(u0.iter().zip(&u1).map(|(a, b)| a + epsilon * b).collect())
}

/// Radial free-boundary evolution on the mapped interval s = r / R(t).
///
/// For epsilon > 0 the unknowns (sigma at interior nodes, R) advance with TR-BDF2.
/// For epsilon = 0 sigma is the elliptic solution at the current R and R advances with RK4.
#[allow(clippy::too_many_arguments)]
pub fn simulate_radial_nonlinear(
    f: &RateFunction,
    g: &RateFunction,
    epsilon: f64,
    r0: f64,
    sigma0: &[f64],
    grid: &RadialGrid,
    horizon: f64,
    dt: f64,
    opts: &RadialOptions,
) -> Result<RadialSimulation> {
    if !(r0 > 0.0) {
        return Err(Error::Config(format!("R0 must be positive, got {r0}")));
    }
    let n = grid.len();
    if sigma0.len() != n || (sigma0[n - 1] - 1.0).abs() > 1e-12 {
        return Err(Error::Config(
            "sigma0 must live on the grid and equal 1 at s = 1".into(),
        ));
    }
    if !(dt > 0.0) || !(horizon >= dt) {
        return Err(Error::Config(format!(
            "need 0 < dt <= horizon, got dt = {dt}, T = {horizon}"
        )));
    }
    let steps = (horizon / dt).round() as usize;
    let (lo, hi) = opts.r_window;
    let check = |t: f64, radius: f64| -> Result<()> {
        if radius > lo && radius < hi && radius.is_finite() {
            Ok(())
        } else {
            Err(Error::BlowUp {
                time: t,
                radius,
                lo,
                hi,
            })
        }
    };
    let mut states = Vec::with_capacity(steps + 1);
    let mut volume_residuals = Vec::with_capacity(steps);
    let vol_flux = |radius: f64, u: &[f64]| radius.powi(3) * growth_rate(g, u, grid);

    if epsilon == 0.0 {
        let sopts = StationaryOptions {
            newton_tol: 1e-10,
            ..StationaryOptions::default()
        };
        let mut warm = sigma0.to_vec();
        let profile = |radius: f64, warm: &mut Vec<f64>| -> Result<Vec<f64>> {
            let u = solve_nutrient_profile_from(f, radius, grid, warm, &sopts)?;
            warm.clone_from(&u);
            Ok(u)
        };
        let mut radius = r0;
        let mut u = profile(radius, &mut warm)?;
        states.push(RadialFrontState {
            t: 0.0,
            radius,
            sigma: u.clone(),
        });
        for k in 1..=steps {
            let velocity =
                |x: f64, warm: &mut Vec<f64>| -> Result<f64> { Ok(x * growth_rate(g, &profile(x, warm)?, grid)) };
            let k1 = radius * growth_rate(g, &u, grid);
            let k2 = velocity(radius + 0.5 * dt * k1, &mut warm)?;
            let k3 = velocity(radius + 0.5 * dt * k2, &mut warm)?;
            let k4 = velocity(radius + dt * k3, &mut warm)?;
            let next = radius + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let t = k as f64 * dt;
            check(t, next)?;
            let u_next = profile(next, &mut warm)?;
            volume_residuals.push(
                (next.powi(3) - radius.powi(3)) / (3.0 * dt) - 0.5 * (vol_flux(radius, &u) + vol_flux(next, &u_next)),
            );
            radius = next;
            u = u_next;
            states.push(RadialFrontState {
                t,
                radius,
                sigma: u.clone(),
            });
        }
        return Ok(RadialSimulation {
            states,
            volume_residuals,
        });
    }

    let sys = RadialSystem {
        f,
        g,
        epsilon,
        grid,
        lap: grid.radial_operator(0, &vec![0.0; n])?,
        d1: grid.d1(Parity::Even)?.clone(),
    };
    let mut y = DVector::from_column_slice(&sigma0[..n - 1]).resize_vertically(n, r0);
    states.push(RadialFrontState {
        t: 0.0,
        radius: r0,
        sigma: sigma0.to_vec(),
    });
    let h1 = 0.5 * TR_GAMMA * dt;
    let d = (1.0 - TR_GAMMA) / (2.0 - TR_GAMMA) * dt;
    let w1 = 1.0 / (TR_GAMMA * (2.0 - TR_GAMMA));
    let w0 = (1.0 - TR_GAMMA).powi(2) / (TR_GAMMA * (2.0 - TR_GAMMA));
    for k in 1..=steps {
        let f0 = sys.rhs(&y);
        let b1 = &y + &f0 * h1;
        let ystar = sys.implicit_solve(h1, &b1, &y + &f0 * (TR_GAMMA * dt), opts)?;
        let b2 = &ystar * w1 - &y * w0;
        let guess = ystar.clone();
        let next = sys.implicit_solve(d, &b2, guess, opts)?;
        let t = k as f64 * dt;
        check(t, next[n - 1])?;
        let (u0, u1) = (sys.full(&y), sys.full(&next));
        volume_residuals.push(
            (next[n - 1].powi(3) - y[n - 1].powi(3)) / (3.0 * dt)
                - 0.5 * (vol_flux(y[n - 1], u0.as_slice()) + vol_flux(next[n - 1], u1.as_slice())),
        );
        y = next;
        states.push(RadialFrontState {
            t,
            radius: y[n - 1],
            sigma: u1.as_slice().to_vec(),
        });
    }
    Ok(RadialSimulation {
        states,
        volume_residuals,
    })
}
