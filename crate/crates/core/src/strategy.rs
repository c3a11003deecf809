//! Carbon-penalized optimal weights.

use crate::error::{Error, Result};
use crate::linalg;
use crate::market::MarketModel;

/// Carbon penalty schedule α_i(t), piecewise constant and left-continuous.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    Constant(f64),
    /// `values[k]` applies on (breaks[k-1], breaks[k]]; `values.len() == breaks.len() + 1`.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl Penalty {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Penalty::Constant(a) => *a,
            Penalty::Piecewise { breaks, values } => values[breaks.iter().take_while(|b| **b < t).count()],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Penalty::Constant(a) => *a >= 0.0 && a.is_finite(),
            Penalty::Piecewise { breaks, values } => {
                values.len() == breaks.len() + 1
                    && values.iter().all(|v| *v >= 0.0 && v.is_finite())
                    && breaks.windows(2).all(|w| w[0] < w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad penalty schedule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub delta: f64,
    pub alpha: Vec<Penalty>,
    /// Admissibility bound Ξ; derived from the market when absent.
    pub xi_bound: Option<f64>,
}

impl StrategySpec {
    pub fn constant(delta: f64, alpha: f64, d: usize) -> Self {
        Self { delta, alpha: vec![Penalty::Constant(alpha); d], xi_bound: None }
    }

    pub fn validate(&self, m: &MarketModel) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("risk aversion must be positive, got {}", self.delta)));
        }
        if self.alpha.len() != m.d {
            return Err(Error::DimensionMismatch(format!(
                "{} penalty schedules for {} assets",
                self.alpha.len(),
                m.d
            )));
        }
        self.alpha.iter().try_for_each(Penalty::validate)?;
        if let Some(x) = self.xi_bound {
            if !(x > 0.0) {
                return Err(Error::InvalidParameter(format!("admissibility bound must be positive, got {x}")));
            }
        }
        Ok(())
    }

    /// Ξ as configured, or 1% above ‖μ − r1‖ / λ_min(δΣΣᵀ).
    pub fn xi(&self, m: &MarketModel) -> f64 {
        self.xi_bound.unwrap_or_else(|| 1.01 * weight_bound(m, self.delta))
    }
}

/// ‖μ − r1‖₂ / λ_min(δΣΣᵀ), an upper bound on ‖π⋆‖₂ for any penalty.
pub fn weight_bound(m: &MarketModel, delta: f64) -> f64 {
    let d = m.d;
    let cov = nalgebra::DMatrix::from_row_slice(d, d, &m.cov);
    let lmin = cov.symmetric_eigenvalues().min() * delta;
    let norm = m.excess().iter().map(|x| x * x).sum::<f64>().sqrt();
    norm / lmin
}

/// ε_i = α_i(t)·c_i·1{c_i > 0}.
pub fn carbon_aversion(t: f64, c: &[f64], spec: &StrategySpec) -> Vec<f64> {
    c.iter().zip(&spec.alpha).map(|(&ci, a)| if ci > 0.0 { a.at(t) * ci } else { 0.0 }).collect()
}

/// π⋆ solving (δΣΣᵀ + diag(ε_i σ_i²)) π = μ − r1.
pub fn optimal_weights(t: f64, c: &[f64], m: &MarketModel, spec: &StrategySpec) -> Result<Vec<f64>> {
    let ws = WeightSolver::new(m, spec)?;
    let mut pi = vec![0.0; m.d];
    let mut scratch = ws.scratch();
    ws.solve(t, c, &mut pi, &mut scratch)?;
    Ok(pi)
}

/// Precomputed pieces of the weight system, reused across grid nodes and paths.
#[derive(Debug, Clone)]
pub struct WeightSolver {
    pub d: usize,
    pub delta: f64,
    dcov: Vec<f64>,
    pub cov: Vec<f64>,
    pub excess: Vec<f64>,
    sig2: Vec<f64>,
    alpha: Vec<Penalty>,
    constant_alpha: Option<Vec<f64>>,
}

impl WeightSolver {
    pub fn new(m: &MarketModel, spec: &StrategySpec) -> Result<Self> {
        spec.validate(m)?;
        let constant_alpha = spec
            .alpha
            .iter()
            .map(|a| match a {
                Penalty::Constant(v) => Some(*v),
                _ => None,
            })
            .collect();
        Ok(Self {
            d: m.d,
            delta: spec.delta,
            dcov: m.cov.iter().map(|x| x * spec.delta).collect(),
            cov: m.cov.clone(),
            excess: m.excess(),
            sig2: m.sigma.iter().map(|s| s * s).collect(),
            alpha: spec.alpha.clone(),
            constant_alpha,
        })
    }

    pub fn scratch(&self) -> Vec<f64> {
        vec![0.0; self.d * self.d]
    }

    #[inline]
    fn eps(&self, i: usize, t: f64, c: f64) -> f64 {
        if c > 0.0 {
            let a = match &self.constant_alpha {
                Some(v) => v[i],
                None => self.alpha[i].at(t),
            };
            a * c
        } else {
            0.0
        }
    }

    /// Writes π⋆ into `out`. `scratch` must hold d² entries.
    pub fn solve(&self, t: f64, c: &[f64], out: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        self.solve_with(&self.dcov, t, c, out, scratch)
    }

    /// Same system with δ replaced by 1, used by the log-utility running cost.
    pub fn solve_unit(&self, t: f64, c: &[f64], out: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        self.solve_with(&self.cov, t, c, out, scratch)
    }

    fn solve_with(&self, base: &[f64], t: f64, c: &[f64], out: &mut [f64], a: &mut [f64]) -> Result<()> {
        match self.d {
            1 => return self.solve_small::<1>(base, t, c, out),
            2 => return self.solve_small::<2>(base, t, c, out),
            3 => return self.solve_small::<3>(base, t, c, out),
            4 => return self.solve_small::<4>(base, t, c, out),
            5 => return self.solve_small::<5>(base, t, c, out),
            6 => return self.solve_small::<6>(base, t, c, out),
            _ => {}
        }
        let d = self.d;
        a.copy_from_slice(base);
        for i in 0..d {
            a[i * d + i] += self.eps(i, t, c[i]) * self.sig2[i];
        }
        linalg::cholesky_in_place(a, d, 0.0).map_err(|_| Error::SingularSystem)?;
        out.copy_from_slice(&self.excess);
        linalg::cholesky_solve(a, d, out);
        Ok(())
    }

    /// Stack-allocated Cholesky solve for small d; same arithmetic order as the general path.
    fn solve_small<const D: usize>(&self, base: &[f64], t: f64, c: &[f64], out: &mut [f64]) -> Result<()> {
        let mut a = [[0.0; D]; D];
        for i in 0..D {
            for j in 0..=i {
                a[i][j] = base[i * D + j];
            }
            a[i][i] += self.eps(i, t, c[i]) * self.sig2[i];
        }
        for i in 0..D {
            for j in 0..i {
                let mut s = a[i][j];
                for k in 0..j {
                    s -= a[i][k] * a[j][k];
                }
                a[i][j] = s / a[j][j];
            }
            let mut d = a[i][i];
            for k in 0..i {
                d -= a[i][k] * a[i][k];
            }
            if !(d >= 0.0) {
                return Err(Error::SingularSystem);
            }
            a[i][i] = d.sqrt();
        }
        let mut b = [0.0; D];
        for i in 0..D {
            let mut s = self.excess[i];
            for k in 0..i {
                s -= a[i][k] * b[k];
            }
            b[i] = s / a[i][i];
        }
        for i in (0..D).rev() {
            let mut s = b[i];
            for k in i + 1..D {
                s -= a[k][i] * b[k];
            }
            b[i] = s / a[i][i];
        }
        out[..D].copy_from_slice(&b);
        Ok(())
    }

    /// πᵀΣΣᵀπ.
    pub fn quad(&self, pi: &[f64]) -> f64 {
        linalg::quad_form(&self.cov, self.d, pi, pi)
    }

    /// πᵀ(μ − r1).
    pub fn excess_dot(&self, pi: &[f64]) -> f64 {
        pi.iter().zip(&self.excess).map(|(a, b)| a * b).sum()
    }
}

/// Inputs of the two-asset example in which asset 2 emits nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStock {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub r: f64,
    pub delta: f64,
    pub alpha1: f64,
}

/// Explicit two-asset weights.
pub fn two_stock_closed_form(c1: f64, p: &TwoStock) -> (f64, f64) {
    let ac = if c1 > 0.0 { p.alpha1 * c1 } else { 0.0 };
    let den = p.delta * (1.0 - p.rho * p.rho) + ac;
    let (e1, e2) = (p.mu1 - p.r, p.mu2 - p.r);
    let s12 = p.sigma1 * p.sigma2;
    let pi1 = e1 / (p.sigma1 * p.sigma1 * den) - p.rho * e2 / (s12 * den);
    let pi2 = -p.rho * e1 / (s12 * den) + (p.delta + ac) * e2 / (p.delta * p.sigma2 * p.sigma2 * den);
    (pi1, pi2)
}

pub fn cash_weight(pi: &[f64]) -> f64 {
    1.0 - pi.iter().sum::<f64>()
}

/// Σ |π_i| c_i.
pub fn portfolio_carbon_index(pi: &[f64], c: &[f64]) -> f64 {
    pi.iter().zip(c).map(|(p, c)| p.abs() * c).sum()
}
