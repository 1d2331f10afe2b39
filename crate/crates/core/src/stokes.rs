//! Single-degree compressible Stokes problems on the unit ball.
//!
//! Velocity is written as u_r(r) Y e_r + u_t(r) grad_w Y and pressure as p(r) Y.
//! The flow is split into a potential part grad(psi Y) carrying the divergence
//! data and two regular homogeneous solutions fixed by the boundary tractions:
//! grad(r^l Y) with zero pressure, and the Lamb solution with pressure r^l Y.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::collocation::{Parity, RadialGrid};
use crate::error::{Error, Result};
use crate::stationary::UnitBallState;

/// Body-force coefficient that reproduces the (1/3) grad(div v) term.
pub const GRAD_DIV_COEFF: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalStokesProblem {
    pub l: usize,
    /// Divergence data at the grid nodes.
    pub source: Vec<f64>,
    /// Interior force is this coefficient times grad(source Y).
    pub body_force_grad_coeff: f64,
    /// Normal traction coefficient of Y n.
    pub traction_normal: f64,
    /// Tangential traction coefficient of grad_w Y.
    pub traction_tangent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalStokesSolution {
    pub u_r: Vec<f64>,
    pub u_t: Vec<f64>,
    pub p: Vec<f64>,
    pub boundary_normal_velocity: f64,
}

/// Reusable factorization for one degree on one grid.
pub struct ModalStokesSolver<'g> {
    l: usize,
    grid: &'g RadialGrid,
    lu: LU<f64, Dyn, Dyn>,
}

// Boundary tractions of the two homogeneous solutions.
fn homogeneous_tractions(l: f64) -> ([f64; 2], [f64; 2]) {
    let n1 = 2.0 * l * (l - 1.0);
    let s1 = 2.0 * (l - 1.0);
    let n2 = (l * l - l - 3.0) / (2.0 * l + 3.0);
    let s2 = l * (l + 2.0) / ((l + 1.0) * (2.0 * l + 3.0));
    ([n1, n2], [s1, s2])
}

impl<'g> ModalStokesSolver<'g> {
    pub fn new(l: usize, grid: &'g RadialGrid) -> Result<Self> {
        let mut a = grid.radial_operator(l, &vec![0.0; grid.len()])?;
        let n = grid.len();
        for k in 0..n {
            a[(n - 1, k)] = 0.0;
        }
        a[(n - 1, n - 1)] = 1.0;
        Ok(ModalStokesSolver { l, grid, lu: a.lu() })
    }

    pub fn solve(&self, prob: &ModalStokesProblem) -> Result<ModalStokesSolution> {
        if prob.l != self.l {
            return Err(Error::Config(format!(
                "solver built for l = {}, problem has l = {}",
                self.l, prob.l
            )));
        }
        let grid = self.grid;
        let n = grid.len();
        let r = grid.nodes();
        let lf = self.l as f64;
        let c = prob.body_force_grad_coeff;
        let phi1 = prob.source[n - 1];

        let mut rhs = DVector::from_column_slice(&prob.source);
        rhs[n - 1] = 0.0;
        let psi = self.lu.solve(&rhs).ok_or(Error::Singular("modal Stokes potential"))?;
        let par = Parity::of_degree(self.l);
        let a_p = grid.d1(par)? * &psi;
        let b_p = DVector::from_iterator(n, (0..n).map(|i| psi[i] / r[i]));
        let p_p: Vec<f64> = prob.source.iter().map(|x| (1.0 + c) * x).collect();
        // psi(1) = 0, so the potential equation at r = 1 gives psi'' = phi - 2 psi'
        // and (psi/r)' = psi'. Tractions: normal 2 u_r' - p - (2/3) div, shear u_t' - u_t + u_r.
        let a1 = a_p[n - 1];
        let normal_p = 2.0 * (phi1 - 2.0 * a1) - p_p[n - 1] - 2.0 / 3.0 * phi1;
        let shear_p = 2.0 * a1;
        let dn = prob.traction_normal - normal_p;
        let ds = prob.traction_tangent - shear_p;

        let mut u_r: Vec<f64> = a_p.iter().copied().collect();
        let mut u_t: Vec<f64> = b_p.iter().copied().collect();
        let mut p = p_p;
        let (nn, ss) = homogeneous_tractions(lf);
        let lamb_a = |x: f64| lf * x.powi(self.l as i32 + 1) / (2.0 * (2.0 * lf + 3.0));
        let lamb_b = |x: f64| (lf + 3.0) * x.powi(self.l as i32 + 1) / (2.0 * (lf + 1.0) * (2.0 * lf + 3.0));
        match self.l {
            0 => {
                // constant pressure absorbs the normal traction; no tangential part
                for x in p.iter_mut() {
                    *x -= dn;
                }
                u_t.iter_mut().for_each(|x| *x = 0.0);
            }
            1 => {
                let mismatch = dn + 2.0 * ds;
                let scale =
                    1.0 + prob.traction_normal.abs() + prob.traction_tangent.abs() + normal_p.abs() + shear_p.abs();
                if mismatch.abs() > 1e-9 * scale {
                    return Err(Error::IncompatibleRigidMotion { residual: mismatch });
                }
                let a2 = ds / ss[1];
                for i in 0..n {
                    u_r[i] += a2 * lamb_a(r[i]);
                    u_t[i] += a2 * lamb_b(r[i]);
                    p[i] += a2 * r[i];
                }
                // translation fixed by zero mean velocity
                let mean: Vec<f64> = (0..n).map(|i| (u_r[i] + 2.0 * u_t[i]) * r[i] * r[i]).collect();
                let a1 = -grid.integrate(&mean);
                for i in 0..n {
                    u_r[i] += a1;
                    u_t[i] += a1;
                }
            }
            _ => {
                let det = nn[0] * ss[1] - nn[1] * ss[0];
                let a1 = (dn * ss[1] - nn[1] * ds) / det;
                let a2 = (nn[0] * ds - ss[0] * dn) / det;
                let k = self.l as i32;
                for i in 0..n {
                    u_r[i] += a1 * lf * r[i].powi(k - 1) + a2 * lamb_a(r[i]);
                    u_t[i] += a1 * r[i].powi(k - 1) + a2 * lamb_b(r[i]);
                    p[i] += a2 * r[i].powi(k);
                }
            }
        }
        Ok(ModalStokesSolution {
            boundary_normal_velocity: u_r[n - 1],
            u_r,
            u_t,
            p,
        })
    }
}

pub fn solve_modal_stokes(prob: &ModalStokesProblem, grid: &RadialGrid) -> Result<ModalStokesSolution> {
    ModalStokesSolver::new(prob.l, grid)?.solve(prob)
}

/// Max of |u_r' + 2u_r/r - l(l+1)u_t/r - source| over the grid.
pub fn divergence_residual(l: usize, sol: &ModalStokesSolution, source: &[f64], grid: &RadialGrid) -> Result<f64> {
    let par = Parity::of_degree(l).flip();
    let du = grid.derivative(&sol.u_r, par)?;
    let ll = (l * (l + 1)) as f64;
    Ok(grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, r)| (du[i] + 2.0 * sol.u_r[i] / r - ll * sol.u_t[i] / r - source[i]).abs())
        .fold(0.0, f64::max))
}

fn growth_source(state: &UnitBallState, v: &[f64]) -> Vec<f64> {
    state
        .sigma
        .iter()
        .zip(v)
        .map(|(&u, &x)| state.g.derivative(u) * x)
        .collect()
}

/// Boundary normal velocity driven by the growth source g'(sigma_s) v.
pub fn modal_j(l: usize, v: &[f64], state: &UnitBallState) -> Result<f64> {
    let prob = ModalStokesProblem {
        l,
        source: growth_source(state, v),
        body_force_grad_coeff: GRAD_DIV_COEFF,
        traction_normal: 0.0,
        traction_tangent: 0.0,
    };
    Ok(solve_modal_stokes(&prob, &state.grid)?.boundary_normal_velocity)
}

/// The functional v -> modal_j(l, v) as a row over the interior nodes (v(1) = 0).
pub fn modal_j_row(l: usize, state: &UnitBallState) -> Result<Vec<f64>> {
    let solver = ModalStokesSolver::new(l, &state.grid)?;
    let n = state.grid.len();
    let gp = state.g_prime_values();
    (0..n - 1)
        .map(|k| {
            let mut source = vec![0.0; n];
            source[k] = gp[k];
            let prob = ModalStokesProblem {
                l,
                source,
                body_force_grad_coeff: GRAD_DIV_COEFF,
                traction_normal: 0.0,
                traction_tangent: 0.0,
            };
            Ok(solver.solve(&prob)?.boundary_normal_velocity)
        })
        .collect()
}

/// Boundary multiplier at degree l from the full Stokes boundary-value problem.
pub fn bgamma_via_stokes(l: usize, gamma: f64, state: &UnitBallState) -> Result<f64> {
    let grid = &state.grid;
    let n = grid.len();
    let phi = grid.solve_radial(l, &state.f_prime_values(), &vec![0.0; n], -state.sigma_prime_1)?;
    let g1 = state.g_at_boundary();
    let ll = (l * (l + 1)) as f64;
    let prob = ModalStokesProblem {
        l,
        source: growth_source(state, &phi),
        body_force_grad_coeff: GRAD_DIV_COEFF,
        traction_normal: gamma * (1.0 - ll / 2.0) + 4.0 * g1,
        traction_tangent: -2.0 * g1,
    };
    Ok(solve_modal_stokes(&prob, grid)?.boundary_normal_velocity + g1)
}

/// Dense matrix of the potential operator, exposed for diagnostics.
pub fn potential_operator(l: usize, grid: &RadialGrid) -> Result<DMatrix<f64>> {
    grid.radial_operator(l, &vec![0.0; grid.len()])
}
