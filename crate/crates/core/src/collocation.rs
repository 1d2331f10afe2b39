//! Radial grids on the unit interval.
//!
//! The Chebyshev grid is the positive half of a Lobatto grid on [-1, 1] with an
//! odd polynomial degree, so r = 0 is never a node. Functions with definite
//! parity in r are represented by their values on the positive half only and
//! differentiated with folded matrices.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    ChebyshevLobatto,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Parity of r^l.
    pub fn of_degree(l: usize) -> Self {
        if l.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    fn index(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridSpec {
    kind: GridKind,
    n: usize,
    #[serde(default)]
    r0: f64,
}

#[derive(Debug, Clone)]
struct ChebOps {
    full: Vec<f64>,
    d1: [DMatrix<f64>; 2],
    d2: [DMatrix<f64>; 2],
}

/// Radial nodes on (0, 1], ascending, last node exactly 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct RadialGrid {
    kind: GridKind,
    r0: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    ops: Option<Box<ChebOps>>,
}

impl TryFrom<GridSpec> for RadialGrid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        match s.kind {
            GridKind::ChebyshevLobatto => RadialGrid::chebyshev(s.n),
            GridKind::Uniform => RadialGrid::uniform(s.n, s.r0),
        }
    }
}

impl From<RadialGrid> for GridSpec {
    fn from(g: RadialGrid) -> Self {
        GridSpec {
            kind: g.kind,
            n: g.nodes.len(),
            r0: g.r0,
        }
    }
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.nodes == other.nodes
    }
}

pub const MIN_NODES: usize = 16;

impl RadialGrid {
    pub fn chebyshev(n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::Config(format!(
                "radial grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        let big = 2 * n - 1;
        let full: Vec<f64> = (0..=big)
            .map(|j| (PI * (big as f64 - 2.0 * j as f64) / (2.0 * big as f64)).sin())
            .collect();
        let d = cheb_matrix(big);
        let dd = &d * &d;
        let fold = |a: &DMatrix<f64>, p: Parity| {
            let s = p.sign();
            DMatrix::from_fn(n, n, |i, k| {
                let (ji, jk) = (n - 1 - i, n - 1 - k);
                a[(ji, jk)] + s * a[(ji, big - jk)]
            })
        };
        let d1 = [fold(&d, Parity::Even), fold(&d, Parity::Odd)];
        let d2 = [fold(&dd, Parity::Even), fold(&dd, Parity::Odd)];
        let cc = clenshaw_curtis(big);
        let nodes: Vec<f64> = (0..n).map(|i| full[n - 1 - i]).collect();
        let weights: Vec<f64> = (0..n).map(|i| cc[n - 1 - i]).collect();
        Ok(RadialGrid {
            kind: GridKind::ChebyshevLobatto,
            r0: 0.0,
            nodes,
            weights,
            ops: Some(Box::new(ChebOps { full, d1, d2 })),
        })
    }

    /// Uniform nodes on [r0, 1] with trapezoid weights; no differentiation.
    pub fn uniform(n: usize, r0: f64) -> Result<Self> {
        if n < 2 || !(0.0..1.0).contains(&r0) {
            return Err(Error::Config(format!(
                "uniform grid needs n >= 2 and r0 in [0, 1), got n = {n}, r0 = {r0}"
            )));
        }
        let h = (1.0 - r0) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| r0 + h * i as f64).collect();
        nodes[n - 1] = 1.0;
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(RadialGrid {
            kind: GridKind::Uniform,
            r0,
            nodes,
            weights,
            ops: None,
        })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the boundary node r = 1.
    pub fn boundary(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn ops(&self) -> Result<&ChebOps> {
        self.ops
            .as_deref()
            .ok_or_else(|| Error::Config("differentiation needs a Chebyshev grid".into()))
    }

    /// First-derivative matrix for functions of the given parity.
    pub fn d1(&self, p: Parity) -> Result<&DMatrix<f64>> {
        Ok(&self.ops()?.d1[p.index()])
    }

    pub fn d2(&self, p: Parity) -> Result<&DMatrix<f64>> {
        Ok(&self.ops()?.d2[p.index()])
    }

    pub fn derivative(&self, values: &[f64], p: Parity) -> Result<Vec<f64>> {
        let d = self.d1(p)?;
        Ok((d * DVector::from_column_slice(values)).as_slice().to_vec())
    }

    /// Integral over [0, 1]. On the Chebyshev grid the integrand must be even in r.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Evaluate the interpolant of `values` (with parity `p`) at `r` in [0, 1].
    pub fn interpolate(&self, values: &[f64], p: Parity, r: f64) -> f64 {
        match &self.ops {
            Some(ops) => {
                let n = self.nodes.len();
                let big = ops.full.len() - 1;
                let mut num = 0.0;
                let mut den = 0.0;
                for (j, &xj) in ops.full.iter().enumerate() {
                    let fj = if j < n {
                        values[n - 1 - j]
                    } else {
                        p.sign() * values[n - 1 - (big - j)]
                    };
                    let dx = r - xj;
                    if dx == 0.0 {
                        return fj;
                    }
                    let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
                    if j == 0 || j == big {
                        w *= 0.5;
                    }
                    num += w * fj / dx;
                    den += w / dx;
                }
                num / den
            }
            None => {
                let k = self.nodes.partition_point(|&x| x <= r).clamp(1, self.nodes.len() - 1);
                let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
                let t = (r - x0) / (x1 - x0);
                values[k - 1] * (1.0 - t) + values[k] * t
            }
        }
    }

    /// Matrix of u'' + (2/r)u' - l(l+1)u/r^2 - c(r)u acting on parity (-1)^l.
    pub fn radial_operator(&self, l: usize, coeff: &[f64]) -> Result<DMatrix<f64>> {
        let p = Parity::of_degree(l);
        let mut a = self.d2(p)?.clone();
        let d1 = self.d1(p)?;
        let ll = (l * (l + 1)) as f64;
        for (i, &r) in self.nodes.iter().enumerate() {
            for k in 0..self.len() {
                a[(i, k)] += 2.0 / r * d1[(i, k)];
            }
            a[(i, i)] -= ll / (r * r) + coeff[i];
        }
        Ok(a)
    }

    /// Solve `op u = rhs` in the interior with u(1) = `boundary`.
    pub fn solve_dirichlet(&self, op: &DMatrix<f64>, rhs: &[f64], boundary: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let mut a = op.clone();
        let mut b = DVector::from_column_slice(rhs);
        for k in 0..n {
            a[(n - 1, k)] = 0.0;
        }
        a[(n - 1, n - 1)] = 1.0;
        b[n - 1] = boundary;
        let x = a.lu().solve(&b).ok_or(Error::Singular("radial Dirichlet solve"))?;
        Ok(x.as_slice().to_vec())
    }

    /// Solve u'' + (2/r)u' - l(l+1)u/r^2 - c u = rhs, u(1) = boundary.
    pub fn solve_radial(&self, l: usize, coeff: &[f64], rhs: &[f64], boundary: f64) -> Result<Vec<f64>> {
        let op = self.radial_operator(l, coeff)?;
        self.solve_dirichlet(&op, rhs, boundary)
    }
}

/// Chebyshev differentiation matrix on x_j = cos(j pi / n), j = 0..=n.
fn cheb_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                // x_i - x_j in product form to avoid cancellation
                let dx =
                    2.0 * (PI * (i + j) as f64 / (2.0 * nf)).sin() * (PI * (j as f64 - i as f64) / (2.0 * nf)).sin();
                d[(i, j)] = c(i) / c(j) * sign / dx;
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    d
}

/// Clenshaw-Curtis weights on [-1, 1] for the nodes cos(j pi / n).
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
    } else {
        w[0] = 1.0 / (nf * nf);
    }
    w[n] = w[0];
    for (j, wj) in w.iter_mut().enumerate().take(n).skip(1) {
        let theta = PI * j as f64 / nf;
        let mut v = 1.0;
        if n.is_multiple_of(2) {
            v -= (nf * theta).cos() / (nf * nf - 1.0);
            for k in 1..n / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        } else {
            for k in 1..=(n - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        *wj = 2.0 * v / nf;
    }
    w
}
