//! Spectrum of the coupled nutrient/boundary operator at a single degree.
//!
//! Unknowns are phi at the interior nodes (phi(1) = 0) followed by the boundary
//! amplitude c. The operator is
//!
//!   lambda phi = L phi / eps + s1 K (j.phi + b c)
//!   lambda c   = j.phi + b c
//!
//! with L the radial Dirichlet operator, K the unit boundary kernel, s1 the
//! boundary slope of the stationary nutrient and b the boundary multiplier.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collocation::RadialGrid;
use crate::error::{Error, Result};
use crate::spectrum::{alpha0, alpha_l_of_gamma, gamma_l, solve_fl, unit_kernel};
use crate::stationary::UnitBallState;
use crate::stokes::{modal_j, modal_j_row};

/// Imaginary parts at or below this are reported as zero.
pub const IMAG_TOL: f64 = 1e-9;

pub fn pi0_modal_kernel(l: usize, state: &UnitBallState) -> Result<Vec<f64>> {
    unit_kernel(l, state)
}

/// Degree data independent of eps and gamma.
#[derive(Debug, Clone)]
pub struct ModeData {
    pub l: usize,
    pub kernel: Vec<f64>,
    pub j_row: Vec<f64>,
    pub l_block: DMatrix<f64>,
    /// alpha0 for l = 0, gamma_l for l >= 2, unused for l = 1.
    pub formula_value: f64,
}

/// Stationary state plus per-degree caches.
pub struct ModalWorkspace {
    state: UnitBallState,
    cache: RwLock<HashMap<usize, Arc<ModeData>>>,
}

impl ModalWorkspace {
    pub fn new(state: UnitBallState) -> Self {
        ModalWorkspace {
            state,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn state(&self) -> &UnitBallState {
        &self.state
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.state.grid
    }

    pub fn mode(&self, l: usize) -> Result<Arc<ModeData>> {
        if let Some(m) = self.cache.read().expect("cache lock").get(&l) {
            return Ok(m.clone());
        }
        let st = &self.state;
        let n = st.grid.len();
        let kernel = unit_kernel(l, st)?;
        let j_row = modal_j_row(l, st)?;
        let full = st.grid.radial_operator(l, &st.f_prime_values())?;
        let l_block = full.view((0, 0), (n - 1, n - 1)).into_owned();
        let formula_value = match l {
            0 => alpha0(st, &solve_fl(0, st)?),
            1 => 0.0,
            _ => gamma_l(l, st, &solve_fl(l, st)?)?,
        };
        let data = Arc::new(ModeData {
            l,
            kernel,
            j_row,
            l_block,
            formula_value,
        });
        self.cache.write().expect("cache lock").entry(l).or_insert(data.clone());
        Ok(data)
    }

    /// Boundary multiplier: alpha0, 0, alpha_l(gamma).
    pub fn multiplier(&self, l: usize, gamma: f64) -> Result<f64> {
        let m = self.mode(l)?;
        Ok(match l {
            0 => m.formula_value,
            1 => 0.0,
            _ => alpha_l_of_gamma(l, gamma, m.formula_value),
        })
    }

    /// max{alpha0, alpha_l(gamma) : 2 <= l <= l_max}.
    pub fn alpha_star(&self, gamma: f64, l_max: usize) -> Result<f64> {
        let mut a = self.multiplier(0, gamma)?;
        for l in 2..=l_max {
            a = a.max(self.multiplier(l, gamma)?);
        }
        Ok(a)
    }

    pub fn assemble(&self, l: usize, epsilon: f64, gamma: f64) -> Result<ModalBlockOperator> {
        assemble_modal_operator(self, l, epsilon, gamma)
    }
}

#[derive(Debug, Clone)]
pub struct ModalBlockOperator {
    pub l: usize,
    pub epsilon: f64,
    pub gamma: f64,
    /// Rows/columns: interior nodes ascending, then c.
    pub matrix: DMatrix<f64>,
    pub b_l: f64,
    pub sigma_prime_1: f64,
    pub assembly_residual: f64,
    pub mode: Arc<ModeData>,
}

impl ModalBlockOperator {
    pub fn interior_len(&self) -> usize {
        self.matrix.nrows() - 1
    }

    /// (lambda - b - eps s1 lambda j.(eps lambda - L)^-1 K, phi at c = 1).
    fn secular(&self, lambda: f64) -> Result<(f64, Vec<f64>)> {
        let m = self.interior_len();
        let mut a = -self.mode.l_block.clone();
        for i in 0..m {
            a[(i, i)] += self.epsilon * lambda;
        }
        let k = DVector::from_column_slice(&self.mode.kernel[..m]);
        let y = a.lu().solve(&k).ok_or(Error::Singular("secular resolvent"))?;
        let scale = self.epsilon * self.sigma_prime_1 * lambda;
        let jy: f64 = self.mode.j_row.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let h = lambda - self.b_l - scale * jy;
        Ok((h, y.iter().map(|x| scale * x).collect()))
    }
}

pub fn assemble_modal_operator(ws: &ModalWorkspace, l: usize, epsilon: f64, gamma: f64) -> Result<ModalBlockOperator> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let mode = ws.mode(l)?;
    let b = ws.multiplier(l, gamma)?;
    let s1 = ws.state().sigma_prime_1;
    let m = mode.j_row.len();
    let mut a = DMatrix::zeros(m + 1, m + 1);
    for i in 0..m {
        let ki = s1 * mode.kernel[i];
        for k in 0..m {
            a[(i, k)] = mode.l_block[(i, k)] / epsilon + ki * mode.j_row[k];
        }
        a[(i, m)] = ki * b;
    }
    for k in 0..m {
        a[(m, k)] = mode.j_row[k];
    }
    a[(m, m)] = b;
    let mut op = ModalBlockOperator {
        l,
        epsilon,
        gamma,
        matrix: a,
        b_l: b,
        sigma_prime_1: s1,
        assembly_residual: f64::NAN,
        mode,
    };
    op.assembly_residual = assembly_residual(&op, ws.state())?;
    Ok(op)
}

// Compare the matrix action on phi = r^l (1 - r^2), c = 1 with the operator
// definition evaluated analytically (Laplacian) and through a direct Stokes solve.
fn assembly_residual(op: &ModalBlockOperator, state: &UnitBallState) -> Result<f64> {
    let l = op.l;
    let r = state.grid.nodes();
    let n = r.len();
    let m = n - 1;
    let phi: Vec<f64> = r.iter().map(|x| x.powi(l as i32) * (1.0 - x * x)).collect();
    let mut x = DVector::from_column_slice(&phi[..m]).resize_vertically(m + 1, 0.0);
    x[m] = 1.0;
    let got = &op.matrix * x;
    let fp = state.f_prime_values();
    let jphi = modal_j(l, &phi, state)?;
    let coupling = jphi + op.b_l;
    let mut worst: f64 = 0.0;
    let mut size: f64 = 1.0;
    for i in 0..m {
        let lap = -(4.0 * l as f64 + 6.0) * r[i].powi(l as i32);
        let want = (lap - fp[i] * phi[i]) / op.epsilon + op.sigma_prime_1 * op.mode.kernel[i] * coupling;
        worst = worst.max((got[i] - want).abs());
        size = size.max(want.abs());
    }
    worst = worst.max((got[m] - coupling).abs());
    Ok(worst / size)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    fn from_complex(z: Complex<f64>) -> Self {
        Eigenvalue {
            re: z.re,
            im: if z.im.abs() <= IMAG_TOL { 0.0 } else { z.im },
        }
    }

    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSpectrumReport {
    pub l: usize,
    pub epsilon: f64,
    pub gamma: f64,
    /// Sorted by real part, descending.
    pub eigenvalues: Vec<Eigenvalue>,
    pub slow_branch: Eigenvalue,
    /// max |phi| / |c| of the slow eigenvector.
    pub slow_eigvec_ratio: f64,
    pub fast_branch_max: f64,
    /// phi at the interior nodes for the slow eigenvector normalized to c = 1.
    pub slow_phi: Vec<f64>,
}

impl EpsilonSpectrumReport {
    /// Largest real part excluding the translation zero at l = 1.
    pub fn max_nonzero_re(&self) -> f64 {
        if self.l == 1 {
            self.fast_branch_max
        } else {
            self.slow_branch.re.max(self.fast_branch_max)
        }
    }
}

/// Diagonal similarity scaling (powers of two) to even out row and column norms.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

fn dump_matrix(op: &ModalBlockOperator) -> Option<PathBuf> {
    let path = std::env::temp_dir().join(format!("modal-operator-l{}-eps{:e}.txt", op.l, op.epsilon));
    let mut file = std::fs::File::create(&path).ok()?;
    for row in op.matrix.row_iter() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
        writeln!(file, "{}", line.join(" ")).ok()?;
    }
    Some(path)
}

pub fn raw_eigenvalues(op: &ModalBlockOperator) -> Result<Vec<Complex<f64>>> {
    let mut a = op.matrix.clone();
    balance(&mut a);
    let schur = nalgebra::Schur::try_new(a, 1e-15, 10_000).ok_or_else(|| Error::Eigen {
        l: op.l,
        epsilon: op.epsilon,
        dump: dump_matrix(op),
    })?;
    let ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen {
            l: op.l,
            epsilon: op.epsilon,
            dump: dump_matrix(op),
        });
    }
    Ok(ev)
}

// |c| / max|phi| of the eigenvector near `lambda`, by shifted inverse iteration.
fn c_dominance(op: &ModalBlockOperator, lambda: Complex<f64>) -> Option<f64> {
    let n = op.matrix.nrows();
    let shift = lambda + Complex::new(1e-10 * (1.0 + lambda.norm()), 0.0);
    let mut a: DMatrix<Complex<f64>> = op.matrix.map(|x| Complex::new(x, 0.0));
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let lu = a.lu();
    let mut x = DVector::from_element(n, Complex::new(1.0, 0.0));
    for _ in 0..3 {
        x = lu.solve(&x)?;
        let s = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(s > 0.0) || !s.is_finite() {
            return None;
        }
        x /= Complex::new(s, 0.0);
    }
    let phi = x.rows(0, n - 1).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Some(x[n - 1].norm() / phi.max(f64::MIN_POSITIVE))
}

pub fn modal_eigenvalues(op: &ModalBlockOperator) -> Result<EpsilonSpectrumReport> {
    let ev = raw_eigenvalues(op)?;
    let b = op.b_l;
    let mut order: Vec<usize> = (0..ev.len()).collect();
    order.sort_by(|&i, &k| {
        let di = (ev[i] - b).norm();
        let dk = (ev[k] - b).norm();
        di.total_cmp(&dk)
    });
    let mut best = order[0];
    let mut best_ratio = -1.0;
    for &i in order.iter().take(4) {
        let ratio = c_dominance(op, ev[i]).unwrap_or(0.0);
        if ratio > 1.01 * best_ratio {
            best = i;
            best_ratio = ratio;
        }
    }

    let mut slow = ev[best];
    let mut slow_phi = Vec::new();
    if slow.im.abs() <= IMAG_TOL {
        let (lam, phi) = polish(op, slow.re)?;
        slow = Complex::new(lam, 0.0);
        slow_phi = phi;
    }
    let ratio = if slow_phi.is_empty() {
        1.0 / best_ratio.max(f64::MIN_POSITIVE)
    } else {
        slow_phi.iter().map(|x| x.abs()).fold(0.0, f64::max)
    };
    let fast_branch_max = ev
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, z)| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut eigenvalues: Vec<Eigenvalue> = ev
        .iter()
        .enumerate()
        .map(|(i, &z)| Eigenvalue::from_complex(if i == best { slow } else { z }))
        .collect();
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(EpsilonSpectrumReport {
        l: op.l,
        epsilon: op.epsilon,
        gamma: op.gamma,
        eigenvalues,
        slow_branch: Eigenvalue::from_complex(slow),
        slow_eigvec_ratio: ratio,
        fast_branch_max,
        slow_phi,
    })
}

// Secant iteration on the scalar secular equation, started from the dense estimate.
fn polish(op: &ModalBlockOperator, lambda0: f64) -> Result<(f64, Vec<f64>)> {
    let mut x0 = lambda0;
    let (mut h0, phi0) = op.secular(x0)?;
    if h0 == 0.0 {
        return Ok((x0, phi0));
    }
    let mut x1 = lambda0 + 1e-7 * (1.0 + lambda0.abs());
    let (mut h1, mut phi1) = op.secular(x1)?;
    for _ in 0..30 {
        if h1 == h0 {
            break;
        }
        let x2 = x1 - h1 * (x1 - x0) / (h1 - h0);
        x0 = x1;
        h0 = h1;
        x1 = x2;
        let next = op.secular(x1)?;
        h1 = next.0;
        phi1 = next.1;
        if (x1 - x0).abs() <= 1e-15 * (1.0 + x1.abs()) || h1 == 0.0 {
            break;
        }
    }
    if (x1 - lambda0).abs() > 1e-3 * (1.0 + lambda0.abs()) || !x1.is_finite() {
        // secant wandered off; keep the dense value
        let (_, p) = op.secular(lambda0)?;
        return Ok((lambda0, p));
    }
    Ok((x1, phi1))
}

/// Eigenvector for the slow branch as (phi at interior nodes, c = 1).
pub fn slow_eigenvector(report: &EpsilonSpectrumReport) -> (Vec<f64>, f64) {
    (report.slow_phi.clone(), 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
    /// Keep stepping geometrically past eps_max up to this value if the bound still holds.
    pub extend_to: f64,
    pub bisection_steps: usize,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy {
            eps_min: 1e-6,
            eps_max: 1.0,
            points: 40,
            extend_to: 1e6,
            bisection_steps: 12,
        }
    }
}

impl ThresholdPolicy {
    pub fn grid(&self) -> Vec<f64> {
        let ratio = self.ratio();
        (0..self.points).map(|k| self.eps_min * ratio.powi(k as i32)).collect()
    }

    fn ratio(&self) -> f64 {
        (self.eps_max / self.eps_min).powf(1.0 / (self.points.max(2) - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonThreshold {
    pub gamma: f64,
    pub l_max: usize,
    pub alpha_star: f64,
    /// Half of alpha_star.
    pub bound: f64,
    pub epsilon0: Option<f64>,
    /// Smallest tested eps above epsilon0 where the bound fails.
    pub first_failure: Option<f64>,
    /// Every eps tested on the scan, ascending.
    pub tested: Vec<f64>,
    /// True if the bound never failed up to the extension limit.
    pub holds_throughout: bool,
}

/// Largest max_l of nonzero real parts at one eps; stops early once above `limit`.
pub fn spectral_abscissa(ws: &ModalWorkspace, gamma: f64, epsilon: f64, l_max: usize, limit: f64) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for l in 0..=l_max {
        let rep = modal_eigenvalues(&ws.assemble(l, epsilon, gamma)?)?;
        worst = worst.max(rep.max_nonzero_re());
        if worst > limit {
            break;
        }
    }
    Ok(worst)
}

pub fn epsilon_threshold(
    ws: &ModalWorkspace,
    gamma: f64,
    l_max: usize,
    policy: &ThresholdPolicy,
) -> Result<EpsilonThreshold> {
    let gamma_star = (2..=l_max)
        .map(|l| ws.mode(l).map(|m| m.formula_value))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(gamma > gamma_star) {
        return Err(Error::BelowThreshold { gamma, gamma_star });
    }
    (0..=l_max).into_par_iter().try_for_each(|l| ws.mode(l).map(|_| ()))?;
    let alpha_star = ws.alpha_star(gamma, l_max)?;
    let bound = 0.5 * alpha_star;
    let holds = |eps: f64| -> Result<bool> { Ok(spectral_abscissa(ws, gamma, eps, l_max, bound)? <= bound) };

    let mut tested = Vec::new();
    let mut last_pass: Option<f64> = None;
    let mut failure: Option<f64> = None;
    let ratio = policy.ratio();
    let mut eps = policy.eps_min;
    let mut k = 0;
    while eps <= policy.extend_to * (1.0 + 1e-12) {
        tested.push(eps);
        if holds(eps)? {
            last_pass = Some(eps);
        } else {
            failure = Some(eps);
            break;
        }
        k += 1;
        eps = policy.eps_min * ratio.powi(k);
    }
    let (epsilon0, first_failure) = match (last_pass, failure) {
        (Some(lo), Some(hi)) => {
            let (mut lo, mut hi) = (lo, hi);
            for _ in 0..policy.bisection_steps {
                let mid = (lo * hi).sqrt();
                tested.push(mid);
                if holds(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (Some(lo), Some(hi))
        }
        (Some(lo), None) => (Some(lo), None),
        (None, hi) => (None, hi),
    };
    Ok(EpsilonThreshold {
        gamma,
        l_max,
        alpha_star,
        bound,
        epsilon0,
        first_failure,
        holds_throughout: failure.is_none() && last_pass.is_some(),
        tested,
    })
}
