//! Real spherical harmonics, sphere quadrature and perturbed-sphere geometry.
//!
//! Harmonics are orthonormal on S^2 without the Condon-Shortley phase:
//! Y_l0 = q_l^0, Y_lm = sqrt(2) q_l^m cos(m phi), Y_l,-m = sqrt(2) q_l^m sin(m phi).

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DEGREE: usize = 16;
pub const DEFAULT_DELTA: f64 = 0.1;

/// Eigenvalue of the Laplace-Beltrami operator on degree-l harmonics.
pub fn laplace_beltrami_multiplier(l: usize) -> f64 {
    -((l * (l + 1)) as f64)
}

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Normalized associated Legendre values q_l^m(cos theta) and their theta-derivatives.
/// Both tables are indexed by l(l+1)/2 + m, 0 <= m <= l <= lmax.
pub fn normalized_legendre(lmax: usize, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, s) = (theta.cos(), theta.sin());
    let size = tri(lmax, lmax) + 1;
    let mut q = vec![0.0; size];
    let mut dq = vec![0.0; size];
    q[0] = (0.25 / PI).sqrt();
    for m in 1..=lmax {
        let mf = m as f64;
        q[tri(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * q[tri(m - 1, m - 1)];
    }
    for m in 0..lmax {
        q[tri(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * x * q[tri(m, m)];
    }
    for m in 0..=lmax {
        let mf = m as f64;
        for l in m + 2..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            q[tri(l, m)] = a * (x * q[tri(l - 1, m)] - b * q[tri(l - 2, m)]);
        }
    }
    for l in 0..=lmax {
        let lf = l as f64;
        for m in 0..=l {
            let mf = m as f64;
            let prev = if l > m {
                ((2.0 * lf + 1.0) / (2.0 * lf - 1.0)).sqrt() * ((lf * lf - mf * mf).sqrt()) * q[tri(l - 1, m)]
            } else {
                0.0
            };
            dq[tri(l, m)] = (lf * x * q[tri(l, m)] - prev) / s;
        }
    }
    (q, dq)
}

/// Value and first and second angular derivatives at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub t: f64,
    pub p: f64,
    pub tt: f64,
    pub tp: f64,
    pub pp: f64,
}

impl Jet {
    fn add_scaled(&mut self, k: f64, o: &Jet) {
        self.v += k * o.v;
        self.t += k * o.t;
        self.p += k * o.p;
        self.tt += k * o.tt;
        self.tp += k * o.tp;
        self.pp += k * o.pp;
    }

    /// Surface gradient components (e_theta, e_phi).
    pub fn gradient(&self, theta: f64) -> (f64, f64) {
        (self.t, self.p / theta.sin())
    }

    pub fn laplace_beltrami(&self, theta: f64) -> f64 {
        let s = theta.sin();
        self.tt + theta.cos() / s * self.t + self.pp / (s * s)
    }
}

/// Index of (l, m) in a coefficient vector.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Jets of every real harmonic up to lmax at one point, indexed by lm_index.
pub fn harmonic_jets(lmax: usize, theta: f64, phi: f64) -> Vec<Jet> {
    let (q, dq) = normalized_legendre(lmax, theta);
    let (s, c) = (theta.sin(), theta.cos());
    let mut out = vec![Jet::default(); (lmax + 1) * (lmax + 1)];
    for l in 0..=lmax {
        let ll = (l * (l + 1)) as f64;
        for m in 0..=l {
            let mf = m as f64;
            let (a, da) = (q[tri(l, m)], dq[tri(l, m)]);
            // Legendre equation in theta
            let dda = -c / s * da - (ll - mf * mf / (s * s)) * a;
            if m == 0 {
                out[lm_index(l, 0)] = Jet {
                    v: a,
                    t: da,
                    tt: dda,
                    ..Jet::default()
                };
                continue;
            }
            let k = std::f64::consts::SQRT_2;
            let (cm, sm) = ((mf * phi).cos(), (mf * phi).sin());
            out[lm_index(l, m as i64)] = Jet {
                v: k * a * cm,
                t: k * da * cm,
                p: -k * mf * a * sm,
                tt: k * dda * cm,
                tp: -k * mf * da * sm,
                pp: -k * mf * mf * a * cm,
            };
            out[lm_index(l, -(m as i64))] = Jet {
                v: k * a * sm,
                t: k * da * sm,
                p: k * mf * a * cm,
                tt: k * dda * sm,
                tp: k * mf * da * cm,
                pp: -k * mf * mf * a * sm,
            };
        }
    }
    out
}

pub fn real_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> f64 {
    harmonic_jets(l, theta, phi)[lm_index(l, m)].v
}

/// Real spherical-harmonic expansion truncated at degree `degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereFunction {
    pub degree: usize,
    /// c_lm at index l^2 + l + m.
    pub coeffs: Vec<f64>,
}

impl SphereFunction {
    pub fn zeros(degree: usize) -> Self {
        SphereFunction {
            degree,
            coeffs: vec![0.0; (degree + 1) * (degree + 1)],
        }
    }

    pub fn from_coeffs(degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != (degree + 1) * (degree + 1) {
            return Err(Error::Config(format!(
                "degree {degree} needs {} coefficients, got {}",
                (degree + 1) * (degree + 1),
                coeffs.len()
            )));
        }
        Ok(SphereFunction { degree, coeffs })
    }

    /// c Y_lm.
    pub fn single(degree: usize, l: usize, m: i64, c: f64) -> Result<Self> {
        let mut out = Self::zeros(degree);
        out.set(l, m, c)?;
        Ok(out)
    }

    /// The constant function c.
    pub fn constant(degree: usize, c: f64) -> Self {
        let mut out = Self::zeros(degree);
        out.coeffs[0] = c * (4.0 * PI).sqrt();
        out
    }

    pub fn coeff(&self, l: usize, m: i64) -> f64 {
        if l > self.degree || m.unsigned_abs() as usize > l {
            0.0
        } else {
            self.coeffs[lm_index(l, m)]
        }
    }

    pub fn set(&mut self, l: usize, m: i64, c: f64) -> Result<()> {
        if l > self.degree || m.unsigned_abs() as usize > l {
            return Err(Error::Config(format!(
                "(l, m) = ({l}, {m}) outside degree {}",
                self.degree
            )));
        }
        self.coeffs[lm_index(l, m)] = c;
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        SphereFunction {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| k * c).collect(),
        }
    }

    /// Multiply each degree-l block by mult(l).
    pub fn map_degrees(&self, mult: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        for l in 0..=self.degree {
            let k = mult(l);
            for m in -(l as i64)..=l as i64 {
                out.coeffs[lm_index(l, m)] *= k;
            }
        }
        out
    }

    pub fn laplace_beltrami(&self) -> Self {
        self.map_degrees(laplace_beltrami_multiplier)
    }

    pub fn jet(&self, theta: f64, phi: f64) -> Jet {
        let jets = harmonic_jets(self.degree, theta, phi);
        let mut out = Jet::default();
        for (c, j) in self.coeffs.iter().zip(&jets) {
            if *c != 0.0 {
                out.add_scaled(*c, j);
            }
        }
        out
    }

    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        self.jet(theta, phi).v
    }

    /// Value of the harmonic extension sum c_lm r^l Y_lm and its r-derivative.
    pub fn harmonic_extension(&self, r: f64, theta: f64, phi: f64) -> (f64, f64) {
        let jets = harmonic_jets(self.degree, theta, phi);
        let (mut v, mut dv) = (0.0, 0.0);
        for l in 0..=self.degree {
            let (rl, drl) = (
                r.powi(l as i32),
                if l == 0 { 0.0 } else { l as f64 * r.powi(l as i32 - 1) },
            );
            for m in -(l as i64)..=l as i64 {
                let k = lm_index(l, m);
                v += self.coeffs[k] * rl * jets[k].v;
                dv += self.coeffs[k] * drl * jets[k].v;
            }
        }
        (v, dv)
    }
}

/// Gauss-Legendre in cos(theta) times a uniform longitude rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    /// Highest degree integrated exactly in products of two harmonics.
    pub degree: usize,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub theta_weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

impl SphereQuadrature {
    pub fn new(degree: usize) -> Self {
        Self::with_sizes(degree, degree + 1, 2 * degree + 2)
    }

    /// Oversampled rule for nonlinear surface quantities.
    pub fn with_sizes(degree: usize, n_theta: usize, n_phi: usize) -> Self {
        let (x, w) = gauss_legendre(n_theta);
        // theta ascending from the north pole
        let thetas: Vec<f64> = x.iter().rev().map(|c| c.acos()).collect();
        let theta_weights: Vec<f64> = w.into_iter().rev().collect();
        let phis = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
        SphereQuadrature {
            degree,
            thetas,
            phis,
            theta_weights,
        }
    }

    pub fn len(&self) -> usize {
        self.thetas.len() * self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in row-major (theta, phi) order.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        self.thetas
            .iter()
            .flat_map(|&t| self.phis.iter().map(move |&p| (t, p)))
            .collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        let dphi = 2.0 * PI / self.phis.len() as f64;
        self.theta_weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w * dphi, self.phis.len()))
            .collect()
    }

    pub fn integrate(&self, samples: &[f64]) -> f64 {
        self.weights().iter().zip(samples).map(|(w, v)| w * v).sum()
    }

    pub fn synthesis(&self, f: &SphereFunction) -> Vec<f64> {
        self.nodes().iter().map(|&(t, p)| f.eval(t, p)).collect()
    }

    pub fn jets(&self, f: &SphereFunction) -> Vec<Jet> {
        self.nodes().iter().map(|&(t, p)| f.jet(t, p)).collect()
    }

    /// Projection of samples onto harmonics up to `degree`.
    pub fn analysis(&self, samples: &[f64], degree: usize) -> Result<SphereFunction> {
        if samples.len() != self.len() {
            return Err(Error::Config(format!(
                "expected {} samples, got {}",
                self.len(),
                samples.len()
            )));
        }
        let np = self.phis.len();
        let dphi = 2.0 * PI / np as f64;
        let mut out = SphereFunction::zeros(degree);
        for (i, (&t, &wt)) in self.thetas.iter().zip(&self.theta_weights).enumerate() {
            let ring = &samples[i * np..(i + 1) * np];
            let (q, _) = normalized_legendre(degree, t);
            for m in 0..=degree {
                let mf = m as f64;
                let (mut a, mut b) = (0.0, 0.0);
                for (j, &p) in self.phis.iter().enumerate() {
                    a += ring[j] * (mf * p).cos();
                    b += ring[j] * (mf * p).sin();
                }
                let (a, b) = (a * wt * dphi, b * wt * dphi);
                for l in m..=degree {
                    let base = q[tri(l, m)];
                    if m == 0 {
                        out.coeffs[lm_index(l, 0)] += base * a;
                    } else {
                        let k = std::f64::consts::SQRT_2 * base;
                        out.coeffs[lm_index(l, m as i64)] += k * a;
                        out.coeffs[lm_index(l, -(m as i64))] += k * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest |f| over the nodes.
    pub fn sup_norm(&self, f: &SphereFunction) -> f64 {
        self.synthesis(f).iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Samples of a scalar surface quantity on a quadrature grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceField {
    pub nodes: Vec<(f64, f64)>,
    pub values: Vec<f64>,
}

impl SurfaceField {
    pub fn max_abs_diff(&self, other: &SurfaceField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    /// CSV with columns theta, phi, value.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,phi,value\n");
        for ((t, p), v) in self.nodes.iter().zip(&self.values) {
            let _ = writeln!(s, "{t:?},{p:?},{v:?}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub nodes: Vec<(f64, f64)>,
    pub values: Vec<[f64; 3]>,
}

impl VectorField {
    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
            .fold(0.0, f64::max)
    }
}

/// Cutoff profile: 1 on |tau| <= delta, 0 on |tau| >= 3 delta, in between a
/// linear ramp with quadratic shoulders of width delta/4. C^1 with
/// max |chi'| = 4 / (7 delta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub delta: f64,
}

impl Cutoff {
    fn shape(&self) -> (f64, f64, f64) {
        let w = 2.0 * self.delta;
        let a = 0.25 * self.delta;
        (w, a, 1.0 / (w - a))
    }

    pub fn max_slope(&self) -> f64 {
        self.shape().2
    }

    // a few ulps of slack so that tau = 3 delta computed in floating point lands outside
    fn outside(&self, tau: f64) -> bool {
        tau.abs() >= 3.0 * self.delta * (1.0 - 4.0 * f64::EPSILON)
    }

    pub fn value(&self, tau: f64) -> f64 {
        let (w, a, s) = self.shape();
        let x = tau.abs() - self.delta;
        if tau.abs() <= self.delta {
            1.0
        } else if self.outside(tau) {
            0.0
        } else if x < a {
            1.0 - s * x * x / (2.0 * a)
        } else if x <= w - a {
            1.0 - s * (0.5 * a + x - a)
        } else {
            s * (w - x).max(0.0).powi(2) / (2.0 * a)
        }
    }

    pub fn derivative(&self, tau: f64) -> f64 {
        let (w, a, s) = self.shape();
        let x = tau.abs() - self.delta;
        let d = if tau.abs() <= self.delta || self.outside(tau) {
            0.0
        } else if x < a {
            -s * x / a
        } else if x <= w - a {
            -s
        } else {
            -s * (w - x) / a
        };
        d * tau.signum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HanzawaMapSpec {
    pub rho: SphereFunction,
    pub delta: f64,
    pub chi: Cutoff,
}

impl HanzawaMapSpec {
    pub fn new(rho: SphereFunction, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0 / 6.0) {
            return Err(Error::InvalidHanzawa(format!("delta = {delta} outside (0, 1/6)")));
        }
        let quad = SphereQuadrature::new(rho.degree.max(DEFAULT_DEGREE) * 2);
        let sup = quad.sup_norm(&rho);
        if sup >= delta {
            return Err(Error::InvalidHanzawa(format!(
                "sup |rho| = {sup} is not below delta = {delta}"
            )));
        }
        Ok(HanzawaMapSpec {
            rho,
            delta,
            chi: Cutoff { delta },
        })
    }

    pub fn with_default_delta(rho: SphereFunction) -> Result<Self> {
        Self::new(rho, DEFAULT_DELTA)
    }

    /// Radial displacement chi(r - 1) Pi_1(rho)(x) and its r-derivative.
    fn displacement(&self, r: f64, theta: f64, phi: f64) -> (f64, f64) {
        let tau = r - 1.0;
        let c = self.chi.value(tau);
        let dc = self.chi.derivative(tau);
        if c == 0.0 && dc == 0.0 {
            return (0.0, 0.0);
        }
        let (p, dp) = self.rho.harmonic_extension(r, theta, phi);
        (c * p, dc * p + c * dp)
    }

    pub fn map(&self, x: [f64; 3]) -> [f64; 3] {
        let v = Vector3::from(x);
        let r = v.norm();
        if r == 0.0 {
            return x;
        }
        let (theta, phi) = angles(&v);
        let (h, _) = self.displacement(r, theta, phi);
        (v * ((r + h) / r)).into()
    }

    /// Determinant of the Jacobian of the map at x.
    pub fn jacobian_determinant(&self, x: [f64; 3]) -> f64 {
        let v = Vector3::from(x);
        let r = v.norm();
        if r == 0.0 {
            return 1.0;
        }
        let (theta, phi) = angles(&v);
        let (h, dh) = self.displacement(r, theta, phi);
        // angular derivatives of h only shear along the radial direction
        (1.0 + dh) * ((r + h) / r).powi(2)
    }

    /// Smallest Jacobian determinant over quadrature directions and radii in the cutoff band.
    pub fn min_jacobian_determinant(&self, quad: &SphereQuadrature, n_radii: usize) -> f64 {
        let lo = 1.0 - 3.0 * self.delta;
        let hi = 1.0 + 3.0 * self.delta;
        let mut best = f64::INFINITY;
        for k in 0..n_radii.max(2) {
            let r = lo + (hi - lo) * k as f64 / (n_radii.max(2) - 1) as f64;
            for &(t, p) in &quad.nodes() {
                best = best.min(self.jacobian_determinant(spherical_point(r, t, p)));
            }
        }
        best
    }
}

pub fn hanzawa_map(spec: &HanzawaMapSpec, x: [f64; 3]) -> [f64; 3] {
    spec.map(x)
}

fn angles(v: &Vector3<f64>) -> (f64, f64) {
    let r = v.norm();
    ((v.z / r).clamp(-1.0, 1.0).acos(), v.y.atan2(v.x))
}

pub fn spherical_point(r: f64, theta: f64, phi: f64) -> [f64; 3] {
    [
        r * theta.sin() * phi.cos(),
        r * theta.sin() * phi.sin(),
        r * theta.cos(),
    ]
}

struct Frame {
    w: Vector3<f64>,
    et: Vector3<f64>,
    ep: Vector3<f64>,
}

fn frame(theta: f64, phi: f64) -> Frame {
    let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
    Frame {
        w: Vector3::new(st * cp, st * sp, ct),
        et: Vector3::new(ct * cp, ct * sp, -st),
        ep: Vector3::new(-sp, cp, 0.0),
    }
}

fn exact_normal(j: &Jet, theta: f64, phi: f64) -> Vector3<f64> {
    let fr = frame(theta, phi);
    let r = 1.0 + j.v;
    let (gt, gp) = j.gradient(theta);
    (fr.w * r - fr.et * gt - fr.ep * gp).normalize()
}

// Mean curvature of r = 1 + rho from the fundamental forms; 1 on the unit sphere.
fn exact_curvature(j: &Jet, theta: f64, phi: f64) -> f64 {
    let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
    let w = Vector3::new(st * cp, st * sp, ct);
    let wt = Vector3::new(ct * cp, ct * sp, -st);
    let wp = Vector3::new(-st * sp, st * cp, 0.0);
    let wtp = Vector3::new(-ct * sp, ct * cp, 0.0);
    let wpp = Vector3::new(-st * cp, -st * sp, 0.0);
    let r = 1.0 + j.v;
    let xt = w * j.t + wt * r;
    let xp = w * j.p + wp * r;
    let xtt = w * j.tt + wt * (2.0 * j.t) - w * r;
    let xtp = w * j.tp + wp * j.t + wt * j.p + wtp * r;
    let xpp = w * j.pp + wp * (2.0 * j.p) + wpp * r;
    let n = xt.cross(&xp).normalize();
    let (e, f, g) = (xt.dot(&xt), xt.dot(&xp), xp.dot(&xp));
    let (l2, m2, n2) = (xtt.dot(&n), xtp.dot(&n), xpp.dot(&n));
    -(l2 * g - 2.0 * m2 * f + n2 * e) / (2.0 * (e * g - f * f))
}

/// Mean curvature of the surface r = 1 + rho at the quadrature nodes.
/// Exact mode uses the fundamental forms; linearized mode returns 1 - (rho + Delta rho / 2).
pub fn mean_curvature_perturbed(rho: &SphereFunction, exact: bool, quad: &SphereQuadrature) -> SurfaceField {
    let nodes = quad.nodes();
    let values = if exact {
        nodes
            .iter()
            .map(|&(t, p)| exact_curvature(&rho.jet(t, p), t, p))
            .collect()
    } else {
        let pert = rho.map_degrees(|l| 1.0 + 0.5 * laplace_beltrami_multiplier(l));
        quad.synthesis(&pert).into_iter().map(|v| 1.0 - v).collect()
    };
    SurfaceField { nodes, values }
}

/// Outward unit normal of r = 1 + rho, or its linearization omega - grad rho.
pub fn normal_perturbed(rho: &SphereFunction, exact: bool, quad: &SphereQuadrature) -> VectorField {
    let nodes = quad.nodes();
    let values = nodes
        .iter()
        .map(|&(t, p)| {
            let j = rho.jet(t, p);
            let n = if exact {
                exact_normal(&j, t, p)
            } else {
                let fr = frame(t, p);
                let (gt, gp) = j.gradient(t);
                fr.w - fr.et * gt - fr.ep * gp
            };
            [n.x, n.y, n.z]
        })
        .collect();
    VectorField { nodes, values }
}

/// Laplace-Beltrami of rho evaluated pointwise from its angular derivatives.
pub fn laplace_beltrami_sampled(rho: &SphereFunction, quad: &SphereQuadrature) -> SurfaceField {
    let nodes = quad.nodes();
    let values = nodes.iter().map(|&(t, p)| rho.jet(t, p).laplace_beltrami(t)).collect();
    SurfaceField { nodes, values }
}
