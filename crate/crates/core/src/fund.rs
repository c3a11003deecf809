//! Weight discretization along carbon paths and the conditional-lognormal fund scheme.

use crate::carbon::{CarbonModel, CarbonPath, SimGrid, Stepper};
use crate::error::{Error, Result};
use crate::strategy::WeightSolver;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    #[default]
    Pricing,
    Physical,
}

/// Weights π̂ on the grid plus the integrated-variance ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPath {
    pub grid: SimGrid,
    pub d: usize,
    /// `pi[j*d + i]`
    pub pi: Vec<f64>,
    /// s_j = π̂_jᵀ ΣΣᵀ π̂_j
    pub quad: Vec<f64>,
    /// π̂_jᵀ (μ − r1)
    pub excess: Vec<f64>,
    /// v^j, trapezoidal integral of s up to node j.
    pub v: Vec<f64>,
}

impl WeightPath {
    pub fn zeros(grid: SimGrid, d: usize) -> Self {
        let n = grid.n + 1;
        Self { grid, d, pi: vec![0.0; n * d], quad: vec![0.0; n], excess: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn weights(&self, j: usize) -> &[f64] {
        &self.pi[j * self.d..(j + 1) * self.d]
    }

    pub fn v_total(&self) -> f64 {
        self.v[self.grid.n]
    }

    fn fill_ladder(&mut self) {
        let h = self.grid.h();
        self.v[0] = 0.0;
        for j in 0..self.grid.n {
            self.v[j + 1] = self.v[j] + 0.5 * h * (self.quad[j] + self.quad[j + 1]);
        }
    }
}

/// π̂_j = π⋆(jh, Ĉ_j) at every node of an existing carbon path.
pub fn discretize_weights(path: &CarbonPath, ws: &WeightSolver, grid: &SimGrid) -> Result<WeightPath> {
    if path.nodes() != grid.n + 1 || path.d != ws.d {
        return Err(Error::DimensionMismatch(format!(
            "carbon path has {} nodes of dimension {}, grid needs {} of dimension {}",
            path.nodes(),
            path.d,
            grid.n + 1,
            ws.d
        )));
    }
    let mut w = WeightPath::zeros(*grid, ws.d);
    let mut scratch = ws.scratch();
    for j in 0..=grid.n {
        let d = ws.d;
        ws.solve(grid.time(j), path.at(j), &mut w.pi[j * d..(j + 1) * d], &mut scratch)?;
        w.quad[j] = ws.quad(w.weights(j));
        w.excess[j] = ws.excess_dot(w.weights(j));
    }
    w.fill_ladder();
    Ok(w)
}

/// Simulates carbon and weights together into preallocated buffers.
#[derive(Debug, Clone)]
pub struct PathSampler<'a> {
    pub stepper: Stepper<'a>,
    pub ws: &'a WeightSolver,
    pub grid: SimGrid,
}

impl<'a> PathSampler<'a> {
    pub fn new(model: &'a CarbonModel, ws: &'a WeightSolver, grid: SimGrid) -> Self {
        Self { stepper: Stepper::new(model, grid.h()), ws, grid }
    }

    /// One joint draw. `carbon` receives the carbon path.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, w: &mut WeightPath, carbon: &mut CarbonPath, scratch: &mut [f64]) -> Result<()> {
        let d = self.ws.d;
        let n = self.grid.n;
        let mut k = self.stepper.initial(&mut carbon.values[..d], rng);
        carbon.regimes[0] = k;
        for j in 0..=n {
            if j > 0 {
                let (done, rest) = carbon.values.split_at_mut(j * d);
                rest[..d].copy_from_slice(&done[(j - 1) * d..]);
                self.stepper.step(&mut rest[..d], &mut k, rng);
                carbon.regimes[j] = k;
            }
            self.ws.solve(self.grid.time(j), &carbon.values[j * d..(j + 1) * d], &mut w.pi[j * d..(j + 1) * d], scratch)?;
            w.quad[j] = self.ws.quad(w.weights(j));
            w.excess[j] = self.ws.excess_dot(w.weights(j));
        }
        w.fill_ladder();
        Ok(())
    }

    pub fn buffers(&self) -> (WeightPath, CarbonPath, Vec<f64>) {
        let d = self.ws.d;
        let n = self.grid.n + 1;
        (
            WeightPath::zeros(self.grid, d),
            CarbonPath { d, values: vec![0.0; n * d], regimes: vec![0; n] },
            self.ws.scratch(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundPath {
    pub x0: f64,
    pub values: Vec<f64>,
    pub measure: Measure,
}

/// Fills `out` (length N+1) with the N-step scheme using the given Gaussians F_1..F_N.
pub fn fund_path_from_normals(w: &WeightPath, x0: f64, r: f64, measure: Measure, normals: &[f64], out: &mut [f64]) {
    let h = w.grid.h();
    out[0] = x0;
    for j in 0..w.grid.n {
        let s = w.quad[j] + w.quad[j + 1];
        let mut drift = r * h - 0.25 * h * s;
        if measure == Measure::Physical {
            drift += 0.5 * h * (w.excess[j] + w.excess[j + 1]);
        }
        out[j + 1] = out[j] * (drift + (0.5 * h * s).sqrt() * normals[j]).exp();
    }
}

pub fn simulate_fund_path<R: Rng + ?Sized>(w: &WeightPath, x0: f64, r: f64, measure: Measure, rng: &mut R) -> Result<FundPath> {
    if !(x0 > 0.0) {
        return Err(Error::NonPositiveWealth(x0));
    }
    let normals: Vec<f64> = (0..w.grid.n).map(|_| StandardNormal.sample(rng)).collect();
    let mut values = vec![0.0; w.grid.n + 1];
    fund_path_from_normals(w, x0, r, measure, &normals, &mut values);
    Ok(FundPath { x0, values, measure })
}

/// One-step terminal draw X̂_T = x0 exp(rT − v^N/2 + √(v^N) F).
pub fn fund_terminal_from_normal(w: &WeightPath, x0: f64, r: f64, f: f64) -> f64 {
    let v = w.v_total();
    x0 * (r * w.grid.t_end - 0.5 * v + v.sqrt() * f).exp()
}

pub fn simulate_fund_terminal<R: Rng + ?Sized>(w: &WeightPath, x0: f64, r: f64, rng: &mut R) -> Result<f64> {
    if !(x0 > 0.0) {
        return Err(Error::NonPositiveWealth(x0));
    }
    Ok(fund_terminal_from_normal(w, x0, r, StandardNormal.sample(rng)))
}

/// Mean and variance of log X̂_T given the weights (pricing measure).
pub fn terminal_log_moments(w: &WeightPath, x0: f64, r: f64) -> (f64, f64) {
    let v = w.v_total();
    (x0.ln() + r * w.grid.t_end - 0.5 * v, v)
}

/// E[e^{−rT} X̂_T | π̂] from the lognormal moments.
pub fn conditional_discounted_mean(w: &WeightPath, x0: f64, r: f64) -> f64 {
    let (m, v) = terminal_log_moments(w, x0, r);
    (m + 0.5 * v - r * w.grid.t_end).exp()
}
