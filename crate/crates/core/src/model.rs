//! Rate laws f, g and the standing assumptions on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::bisect;

pub const SIGMA_BAR: f64 = 1.0;
pub const NU: f64 = 1.0;
pub const DEFAULT_SIGMA_MAX: f64 = 2.0 * SIGMA_BAR;
const SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `[a]` means a*s, `[a, s0]` means a*(s - s0).
    Linear,
    /// Coefficients in increasing degree.
    Polynomial,
    /// Natural cubic spline through `(knots[i], coeffs[i])`.
    TabulatedSpline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    pub family: Family,
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
}

impl RateSpec {
    pub fn linear(coeffs: &[f64]) -> Self {
        RateSpec {
            family: Family::Linear,
            coeffs: coeffs.to_vec(),
            knots: None,
        }
    }

    pub fn polynomial(coeffs: &[f64]) -> Self {
        RateSpec {
            family: Family::Polynomial,
            coeffs: coeffs.to_vec(),
            knots: None,
        }
    }

    pub fn spline(knots: &[f64], values: &[f64]) -> Self {
        RateSpec {
            family: Family::TabulatedSpline,
            coeffs: values.to_vec(),
            knots: Some(knots.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn natural(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Spline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn segment(&self, s: f64) -> usize {
        self.x.partition_point(|&k| k <= s).clamp(1, self.x.len() - 1) - 1
    }

    fn eval(&self, s: f64) -> (f64, f64) {
        let i = self.segment(s);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - s) / h;
        let b = (s - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (self.y[i + 1] - self.y[i]) / h + h / 6.0 * (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1);
        (v, d)
    }
}

/// A scalar rate law with derivative, optionally scaled by a constant factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunction {
    spec: RateSpec,
    scale: f64,
    sigma_max: f64,
    spline: Option<Spline>,
}

impl RateFunction {
    pub fn new(spec: RateSpec) -> Result<Self> {
        Self::with_sigma_max(spec, DEFAULT_SIGMA_MAX)
    }

    pub fn with_sigma_max(spec: RateSpec, sigma_max: f64) -> Result<Self> {
        if !(sigma_max >= 2.0 * SIGMA_BAR) || !sigma_max.is_finite() {
            return Err(Error::Config(format!("sigma_max must be >= 2, got {sigma_max}")));
        }
        if spec.coeffs.is_empty() {
            return Err(Error::Config("rate function needs at least one coefficient".into()));
        }
        if spec.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("rate coefficients must be finite".into()));
        }
        let spline = match spec.family {
            Family::Linear => {
                if spec.coeffs.len() > 2 {
                    return Err(Error::Config("linear rate takes [slope] or [slope, root]".into()));
                }
                None
            }
            Family::Polynomial => None,
            Family::TabulatedSpline => {
                let knots = spec
                    .knots
                    .as_ref()
                    .ok_or_else(|| Error::Config("tabulated-spline needs knots".into()))?;
                if knots.len() != spec.coeffs.len() || knots.len() < 3 {
                    return Err(Error::Config("spline needs >= 3 knots, one value per knot".into()));
                }
                if knots.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("spline knots must be strictly increasing".into()));
                }
                Some(Spline::natural(knots, &spec.coeffs))
            }
        };
        if spec.family != Family::TabulatedSpline && spec.knots.is_some() {
            return Err(Error::Config("knots only apply to tabulated-spline".into()));
        }
        Ok(RateFunction {
            spec,
            scale: 1.0,
            sigma_max,
            spline,
        })
    }

    pub fn spec(&self) -> &RateSpec {
        &self.spec
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// The same law multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        RateFunction {
            scale: self.scale * k,
            ..self.clone()
        }
    }

    /// Value and derivative, no domain check.
    pub fn value_and_derivative(&self, s: f64) -> (f64, f64) {
        let c = &self.spec.coeffs;
        let (v, d) = match self.spec.family {
            Family::Linear => {
                let root = c.get(1).copied().unwrap_or(0.0);
                (c[0] * (s - root), c[0])
            }
            Family::Polynomial => {
                let mut v = 0.0;
                let mut d = 0.0;
                for &a in c.iter().rev() {
                    d = d * s + v;
                    v = v * s + a;
                }
                (v, d)
            }
            Family::TabulatedSpline => self.spline.as_ref().expect("spline built").eval(s),
        };
        (self.scale * v, self.scale * d)
    }

    pub fn value(&self, s: f64) -> f64 {
        self.value_and_derivative(s).0
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.value_and_derivative(s).1
    }

    fn check(&self, s: f64) -> Result<()> {
        if (0.0..=self.sigma_max).contains(&s) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "sigma",
                value: s,
                lo: 0.0,
                hi: self.sigma_max,
            })
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(self.value(s))
    }

    pub fn eval_derivative(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(self.derivative(s))
    }

    fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        (0..SAMPLES).map(move |i| self.sigma_max * i as f64 / (SAMPLES - 1) as f64)
    }
}

pub fn make_rate_function(spec: RateSpec) -> Result<RateFunction> {
    RateFunction::new(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub sigma_bar: f64,
    pub nu: f64,
    pub sigma_tilde: Option<f64>,
}

impl ModelParams {
    pub fn new(epsilon: f64, gamma: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(ModelParams {
            epsilon,
            gamma,
            sigma_bar: SIGMA_BAR,
            nu: NU,
            sigma_tilde: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl AssumptionCheck {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        AssumptionCheck {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1: AssumptionCheck,
    pub a2: AssumptionCheck,
    pub a3: AssumptionCheck,
    pub sigma_tilde: Option<f64>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.a1.passed && self.a2.passed && self.a3.passed
    }

    pub fn failures(&self) -> Vec<&AssumptionCheck> {
        [&self.a1, &self.a2, &self.a3]
            .into_iter()
            .filter(|c| !c.passed)
            .collect()
    }

    pub fn summary(&self) -> String {
        [&self.a1, &self.a2, &self.a3]
            .iter()
            .map(|c| format!("{}: {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// A1: f(0) = 0, f' > 0. A2: g' > 0 with a positive root. A3: that root lies below 1.
pub fn validate_assumptions(f: &RateFunction, g: &RateFunction) -> AssumptionReport {
    let f0 = f.value(0.0);
    let f_bad = f.samples().find(|&s| !(f.derivative(s) > 0.0));
    let a1 = match (f0 == 0.0 || f0.abs() <= 1e-14, f_bad) {
        (true, None) => AssumptionCheck::new("A1", true, "f(0) = 0 and f' > 0 on samples".into()),
        (false, _) => AssumptionCheck::new("A1", false, format!("f(0) = {f0:e} != 0")),
        (_, Some(s)) => AssumptionCheck::new("A1", false, format!("f'({s}) = {:e} is not positive", f.derivative(s))),
    };

    let g_bad = g.samples().find(|&s| !(g.derivative(s) > 0.0));
    let (g0, gmax) = (g.value(0.0), g.value(g.sigma_max()));
    let sigma_tilde = if g0 < 0.0 && gmax > 0.0 {
        bisect(|s| g.value(s), 0.0, g.sigma_max(), 0.0, 1e-12).ok()
    } else {
        None
    };
    let a2 = match (g_bad, sigma_tilde) {
        (None, Some(st)) => AssumptionCheck::new("A2", true, format!("g' > 0 on samples, g({st}) = {:e}", g.value(st))),
        (Some(s), _) => AssumptionCheck::new("A2", false, format!("g'({s}) = {:e} is not positive", g.derivative(s))),
        (None, None) => AssumptionCheck::new("A2", false, format!("g has no positive root in (0, {}]", g.sigma_max())),
    };
    let a3 = match sigma_tilde {
        Some(st) if st < SIGMA_BAR => AssumptionCheck::new("A3", true, format!("sigma_tilde = {st} < 1")),
        Some(st) => AssumptionCheck::new("A3", false, format!("sigma_tilde = {st} >= 1")),
        None => AssumptionCheck::new("A3", false, "sigma_tilde undefined".into()),
    };
    AssumptionReport {
        a1,
        a2,
        a3,
        sigma_tilde,
    }
}
