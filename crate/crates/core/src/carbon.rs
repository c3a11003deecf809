//! Carbon-intensity dynamics: OU, CIR, exp-OU per asset, or a finite-state
//! Markov chain on the whole vector.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Uniform simulation grid on [0, T].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    pub t_end: f64,
    pub n: usize,
}

impl SimGrid {
    pub fn new(t_end: f64, n: usize) -> Result<Self> {
        if n == 0 || !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid needs T > 0 and N >= 1, got T={t_end}, N={n}")));
        }
        Ok(Self { t_end, n })
    }

    /// Default grid with N = 5T steps.
    pub fn default_for(t_end: f64) -> Result<Self> {
        Self::new(t_end, ((5.0 * t_end).round() as usize).max(1))
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.n as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.n {
            self.t_end
        } else {
            j as f64 * self.h()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssetDynamics {
    Ou { kappa: f64, mean: f64, lambda: f64 },
    Cir { kappa: f64, mean: f64, lambda: f64 },
    /// ln C follows an OU process with level `mean`.
    ExpOu { kappa: f64, mean: f64, lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CarbonModel {
    Diffusion { assets: Vec<AssetDynamics>, c0: Vec<f64> },
    Ctmc(Ctmc),
}

/// Finite-state chain. `q` is K×K row-major, `states[k]` is the carbon vector in regime k.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctmc {
    pub states: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub pi0: Vec<f64>,
}

impl Ctmc {
    pub fn k(&self) -> usize {
        self.states.len()
    }

    pub fn rate(&self, k: usize, l: usize) -> f64 {
        self.q[k * self.k() + l]
    }

    /// Stationary law: solves πQ = 0, Σπ = 1 by replacing one equation.
    pub fn stationary(&self) -> Vec<f64> {
        let k = self.k();
        let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                a[(i, j)] = self.rate(j, i);
            }
        }
        for j in 0..k {
            a[(k - 1, j)] = 1.0;
        }
        let mut b = nalgebra::DVector::<f64>::zeros(k);
        b[k - 1] = 1.0;
        a.lu().solve(&b).map(|v| v.iter().copied().collect()).unwrap_or_else(|| vec![f64::NAN; k])
    }
}

impl CarbonModel {
    pub fn dim(&self) -> usize {
        match self {
            CarbonModel::Diffusion { assets, .. } => assets.len(),
            CarbonModel::Ctmc(c) => c.states.first().map_or(0, |s| s.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CarbonModel::Diffusion { assets, c0 } => {
                if assets.len() != c0.len() || assets.is_empty() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} carbon processes but {} initial values",
                        assets.len(),
                        c0.len()
                    )));
                }
                for (i, (a, &c)) in assets.iter().zip(c0).enumerate() {
                    if !c.is_finite() {
                        return Err(Error::InvalidParameter(format!("initial carbon of asset {i} not finite")));
                    }
                    match *a {
                        AssetDynamics::Ou { kappa, mean, lambda } => {
                            check_common(i, kappa, mean, lambda, true)?;
                        }
                        AssetDynamics::ExpOu { kappa, mean, lambda } => {
                            check_common(i, kappa, mean, lambda, true)?;
                            if c <= 0.0 {
                                return Err(Error::InvalidParameter(format!(
                                    "exp-OU initial carbon of asset {i} must be positive"
                                )));
                            }
                        }
                        AssetDynamics::Cir { kappa, mean, lambda } => {
                            check_common(i, kappa, mean, lambda, false)?;
                            if mean < 0.0 || c < 0.0 {
                                return Err(Error::InvalidParameter(format!(
                                    "CIR level and start of asset {i} must be non-negative"
                                )));
                            }
                            check_nv(i, kappa, mean, lambda)?;
                        }
                    }
                }
                Ok(())
            }
            CarbonModel::Ctmc(c) => {
                let k = c.k();
                if k == 0 || c.q.len() != k * k || c.pi0.len() != k {
                    return Err(Error::DimensionMismatch(format!(
                        "chain with {k} states needs a {k}x{k} generator and {k} initial weights"
                    )));
                }
                let d = c.states[0].len();
                if d == 0 || c.states.iter().any(|s| s.len() != d) {
                    return Err(Error::DimensionMismatch("chain states must share one dimension".into()));
                }
                for i in 0..k {
                    let mut row = 0.0;
                    for j in 0..k {
                        let q = c.rate(i, j);
                        if !q.is_finite() || (i != j && q < 0.0) {
                            return Err(Error::InvalidParameter(format!("generator entry ({i},{j}) = {q}")));
                        }
                        row += q;
                    }
                    if row.abs() > 1e-12 {
                        return Err(Error::InvalidParameter(format!("generator row {i} sums to {row:e}")));
                    }
                }
                let s: f64 = c.pi0.iter().sum();
                if (s - 1.0).abs() > 1e-12 || c.pi0.iter().any(|p| *p < 0.0) {
                    return Err(Error::InvalidParameter(format!("initial distribution sums to {s}")));
                }
                Ok(())
            }
        }
    }
}

fn check_common(i: usize, kappa: f64, mean: f64, lambda: f64, kappa_pos: bool) -> Result<()> {
    let ok_k = if kappa_pos { kappa > 0.0 } else { kappa >= 0.0 };
    if !(ok_k && kappa.is_finite() && mean.is_finite() && lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "asset {i}: kappa={kappa}, mean={mean}, lambda={lambda}"
        )));
    }
    Ok(())
}

fn check_nv(i: usize, kappa: f64, mean: f64, lambda: f64) -> Result<()> {
    let bound = 4.0 * kappa * mean;
    if lambda * lambda > bound {
        return Err(Error::SchemeInvalid { asset: i, lambda_sq: lambda * lambda, bound });
    }
    Ok(())
}

/// ψ_κ(t) = (1 − e^{−κt})/κ, with ψ_0(t) = t.
pub fn psi(kappa: f64, t: f64) -> f64 {
    if kappa == 0.0 {
        t
    } else {
        -(-kappa * t).exp_m1() / kappa
    }
}

/// One Ninomiya–Victoir step of the CIR process. `g` is a standard normal draw.
pub fn nv_cir_step(c: f64, h: f64, g: f64, kappa: f64, mean: f64, lambda: f64) -> f64 {
    let drift = (kappa * mean - 0.25 * lambda * lambda) * psi(kappa, 0.5 * h);
    let e = (-0.5 * kappa * h).exp();
    let inner = (drift + e * c).max(0.0).sqrt() + 0.5 * lambda * h.sqrt() * g;
    drift + e * inner * inner
}

/// Conditional mean and variance of a CIR process started at `c0`.
pub fn cir_moments(kappa: f64, mean: f64, lambda: f64, t: f64, c0: f64) -> (f64, f64) {
    let e = (-kappa * t).exp();
    let m = mean + (c0 - mean) * e;
    let l2 = lambda * lambda;
    let v = c0 * l2 / kappa * (e - e * e) + mean * l2 / (2.0 * kappa) * (1.0 - e).powi(2);
    (m, v)
}

/// Conditional mean and variance of an OU process started at `c0`.
pub fn ou_moments(kappa: f64, mean: f64, lambda: f64, t: f64, c0: f64) -> (f64, f64) {
    let e = (-kappa * t).exp();
    (mean + (c0 - mean) * e, lambda * lambda * (1.0 - e * e) / (2.0 * kappa))
}

#[derive(Debug, Clone, Copy)]
enum StepCoef {
    Ou { mean: f64, decay: f64, sd: f64 },
    ExpOu { mean: f64, decay: f64, sd: f64 },
    Cir { drift: f64, e: f64, shock: f64 },
}

/// Precomputed one-step transition for a fixed step size. Allocation free.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    model: &'a CarbonModel,
    coef: Vec<StepCoef>,
    h: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a CarbonModel, h: f64) -> Self {
        let coef = match model {
            CarbonModel::Diffusion { assets, .. } => assets
                .iter()
                .map(|a| match *a {
                    AssetDynamics::Ou { kappa, mean, lambda } => StepCoef::Ou {
                        mean,
                        decay: (-kappa * h).exp(),
                        sd: lambda * (-(-2.0 * kappa * h).exp_m1() / (2.0 * kappa)).sqrt(),
                    },
                    AssetDynamics::ExpOu { kappa, mean, lambda } => StepCoef::ExpOu {
                        mean,
                        decay: (-kappa * h).exp(),
                        sd: lambda * (-(-2.0 * kappa * h).exp_m1() / (2.0 * kappa)).sqrt(),
                    },
                    AssetDynamics::Cir { kappa, mean, lambda } => StepCoef::Cir {
                        drift: (kappa * mean - 0.25 * lambda * lambda) * psi(kappa, 0.5 * h),
                        e: (-0.5 * kappa * h).exp(),
                        shock: 0.5 * lambda * h.sqrt(),
                    },
                })
                .collect(),
            CarbonModel::Ctmc(_) => Vec::new(),
        };
        Self { model, coef, h }
    }

    /// Initial state: configured start for diffusions, a draw from Π for chains.
    pub fn initial<R: Rng + ?Sized>(&self, c: &mut [f64], rng: &mut R) -> usize {
        match self.model {
            CarbonModel::Diffusion { c0, .. } => {
                c.copy_from_slice(c0);
                0
            }
            CarbonModel::Ctmc(ch) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = ch.k() - 1;
                for (i, p) in ch.pi0.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                c.copy_from_slice(&ch.states[k]);
                k
            }
        }
    }

    /// Advances `c` (and the regime for chains) by one step.
    pub fn step<R: Rng + ?Sized>(&self, c: &mut [f64], regime: &mut usize, rng: &mut R) {
        match self.model {
            CarbonModel::Diffusion { .. } => {
                for (ci, co) in c.iter_mut().zip(&self.coef) {
                    let g: f64 = StandardNormal.sample(rng);
                    *ci = match *co {
                        StepCoef::Ou { mean, decay, sd } => mean + (*ci - mean) * decay + sd * g,
                        StepCoef::ExpOu { mean, decay, sd } => (mean + (ci.ln() - mean) * decay + sd * g).exp(),
                        StepCoef::Cir { drift, e, shock } => {
                            let inner = (drift + e * *ci).max(0.0).sqrt() + shock * g;
                            drift + e * inner * inner
                        }
                    };
                }
            }
            CarbonModel::Ctmc(ch) => {
                let mut left = self.h;
                let mut k = *regime;
                loop {
                    let out = -ch.rate(k, k);
                    if out <= 0.0 {
                        break;
                    }
                    let wait = Exp::new(out).expect("positive rate").sample(rng);
                    if wait >= left {
                        break;
                    }
                    left -= wait;
                    let u: f64 = rng.random::<f64>() * out;
                    let mut acc = 0.0;
                    let mut next = k;
                    for l in 0..ch.k() {
                        if l == k {
                            continue;
                        }
                        acc += ch.rate(k, l);
                        next = l;
                        if u < acc {
                            break;
                        }
                    }
                    k = next;
                }
                *regime = k;
                c.copy_from_slice(&ch.states[k]);
            }
        }
    }
}

/// A simulated carbon path: `values[j*d + i]` is asset i at node j.
#[derive(Debug, Clone, PartialEq)]
pub struct CarbonPath {
    pub d: usize,
    pub values: Vec<f64>,
    /// Chain regime per node (all zero for diffusion models).
    pub regimes: Vec<usize>,
}

impl CarbonPath {
    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn nodes(&self) -> usize {
        self.regimes.len()
    }
}

pub fn simulate_carbon_path<R: Rng + ?Sized>(model: &CarbonModel, grid: &SimGrid, rng: &mut R) -> CarbonPath {
    let d = model.dim();
    let st = Stepper::new(model, grid.h());
    let mut values = vec![0.0; d * (grid.n + 1)];
    let mut regimes = vec![0; grid.n + 1];
    let mut k = st.initial(&mut values[..d], rng);
    regimes[0] = k;
    for j in 0..grid.n {
        let (done, rest) = values.split_at_mut((j + 1) * d);
        rest[..d].copy_from_slice(&done[j * d..]);
        st.step(&mut rest[..d], &mut k, rng);
        regimes[j + 1] = k;
    }
    CarbonPath { d, values, regimes }
}

/// Validating wrapper: rejects invalid models before simulating.
pub fn simulate_carbon_paths<R: Rng + ?Sized>(
    model: &CarbonModel,
    grid: &SimGrid,
    count: usize,
    rng: &mut R,
) -> Result<Vec<CarbonPath>> {
    model.validate()?;
    Ok((0..count).map(|_| simulate_carbon_path(model, grid, rng)).collect())
}

/// Carbon parameters of the four-stock reference experiment (CIR, level = half the start).
pub fn reference_carbon() -> CarbonModel {
    let starts = [5000.0, 4000.0, 3000.0, 1000.0];
    let levels = [2500.0, 2000.0, 1500.0, 500.0];
    CarbonModel::Diffusion {
        assets: levels.iter().map(|&m| AssetDynamics::Cir { kappa: 0.05, mean: m, lambda: 3.0 }).collect(),
        c0: starts.to_vec(),
    }
}
