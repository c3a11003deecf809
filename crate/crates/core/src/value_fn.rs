//! The reduced value-function factor φ(t, c): ODE system for chains,
//! Feynman–Kac Monte Carlo for diffusions.

use crate::carbon::{CarbonModel, Ctmc, Stepper};
use crate::error::{Error, Result};
use crate::rng::{substream, Tag};
use crate::stats::{par_chunks, Welford};
use crate::strategy::WeightSolver;

/// Coefficients (H, f) of the linear equation for φ at (t, c).
pub fn h_and_f(t: f64, c: &[f64], ws: &WeightSolver, r: f64, scratch: &mut [f64], pi: &mut [f64]) -> Result<(f64, f64)> {
    if ws.delta == 1.0 {
        ws.solve_unit(t, c, pi, scratch)?;
        Ok((0.0, -(r + 0.5 * ws.excess_dot(pi))))
    } else {
        ws.solve(t, c, pi, scratch)?;
        Ok(((1.0 - ws.delta) * (r + 0.5 * ws.excess_dot(pi)), 0.0))
    }
}

/// Allocating convenience wrapper around [`h_and_f`].
pub fn h_and_f_at(t: f64, c: &[f64], ws: &WeightSolver, r: f64) -> Result<(f64, f64)> {
    let mut s = ws.scratch();
    let mut pi = vec![0.0; ws.d];
    h_and_f(t, c, ws, r, &mut s, &mut pi)
}

/// φ(T): 1 for power utility, 0 for log utility.
pub fn terminal_phi(delta: f64) -> f64 {
    if delta == 1.0 {
        0.0
    } else {
        1.0
    }
}

/// Which coupling term the chain equation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// Σ_l q_kl φ_l over all l, diagonal included (the chain's generator).
    #[default]
    Full,
    /// Σ_{l≠k} q_kl φ_l, kept for auditing only.
    OffDiagonal,
}

/// φ_k on a grid, `phi[j][k]` at time `times[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPhi {
    pub times: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

struct ChainRhs<'a> {
    ch: &'a Ctmc,
    ws: &'a WeightSolver,
    r: f64,
    coupling: Coupling,
}

impl ChainRhs<'_> {
    fn hf(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut h = Vec::with_capacity(self.ch.k());
        let mut f = Vec::with_capacity(self.ch.k());
        for s in &self.ch.states {
            let (a, b) = h_and_f_at(t, s, self.ws, self.r)?;
            h.push(a);
            f.push(b);
        }
        Ok((h, f))
    }

    /// dφ/ds with s = T − t running forward.
    fn eval(&self, t: f64, phi: &[f64], out: &mut [f64]) -> Result<()> {
        let (h, f) = self.hf(t)?;
        let k = self.ch.k();
        for a in 0..k {
            let mut s = 0.0;
            for l in 0..k {
                if l == a && self.coupling == Coupling::OffDiagonal {
                    continue;
                }
                s += self.ch.rate(a, l) * phi[l];
            }
            out[a] = s + h[a] * phi[a] - f[a];
        }
        Ok(())
    }
}

/// Classical RK4 from T back to `t0` with `steps` equal steps. Returns φ at every step.
pub fn rk4_chain(
    ch: &Ctmc,
    ws: &WeightSolver,
    r: f64,
    t0: f64,
    t_end: f64,
    steps: usize,
    coupling: Coupling,
) -> Result<ChainPhi> {
    let rhs = ChainRhs { ch, ws, r, coupling };
    let k = ch.k();
    let dt = (t_end - t0) / steps as f64;
    let mut phi = vec![terminal_phi(ws.delta); k];
    let mut times = vec![t_end];
    let mut out = vec![phi.clone()];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for n in 0..steps {
        let t = t_end - n as f64 * dt;
        rhs.eval(t, &phi, &mut k1)?;
        for a in 0..k {
            tmp[a] = phi[a] + 0.5 * dt * k1[a];
        }
        rhs.eval(t - 0.5 * dt, &tmp, &mut k2)?;
        for a in 0..k {
            tmp[a] = phi[a] + 0.5 * dt * k2[a];
        }
        rhs.eval(t - 0.5 * dt, &tmp, &mut k3)?;
        for a in 0..k {
            tmp[a] = phi[a] + dt * k3[a];
        }
        rhs.eval(t - dt, &tmp, &mut k4)?;
        for a in 0..k {
            phi[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        times.push(if n + 1 == steps { t0 } else { t - dt });
        out.push(phi.clone());
    }
    times.reverse();
    out.reverse();
    Ok(ChainPhi { times, phi: out })
}

/// Relative tolerance of the step-halving check.
pub const HALVING_TOL: f64 = 1e-8;

/// Solves the chain system on `[0, t_end]` with `n` reporting intervals.
/// The internal step is min(h, 0.01); the result is compared with a run at half
/// that step and rejected if they disagree.
pub fn solve_ctmc_odes(ch: &Ctmc, ws: &WeightSolver, r: f64, t_end: f64, n: usize, coupling: Coupling) -> Result<ChainPhi> {
    let h = t_end / n as f64;
    let sub = (h / 0.01).ceil().max(1.0) as usize;
    let coarse = rk4_chain(ch, ws, r, 0.0, t_end, n * sub, coupling)?;
    let fine = rk4_chain(ch, ws, r, 0.0, t_end, 2 * n * sub, coupling)?;
    let mut worst: f64 = 0.0;
    let mut times = Vec::with_capacity(n + 1);
    let mut phi = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let a = &coarse.phi[j * sub];
        let b = &fine.phi[2 * j * sub];
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs() / (1.0 + y.abs()));
        }
        times.push(if j == n { t_end } else { j as f64 * h });
        phi.push(b.clone());
    }
    if !(worst <= HALVING_TOL) {
        return Err(Error::StepTooCoarse { discrepancy: worst, tolerance: HALVING_TOL });
    }
    Ok(ChainPhi { times, phi })
}

/// Exact solution for time-constant coefficients: φ(t) from the matrix exponential of
/// the augmented affine system d/ds [φ; 1] = [[A, −f], [0, 0]] [φ; 1], A = Q + diag(H).
pub fn chain_phi_expm(ch: &Ctmc, ws: &WeightSolver, r: f64, tau: f64) -> Result<Vec<f64>> {
    let k = ch.k();
    let mut m = nalgebra::DMatrix::<f64>::zeros(k + 1, k + 1);
    for a in 0..k {
        let (h, f) = h_and_f_at(0.0, &ch.states[a], ws, r)?;
        for l in 0..k {
            m[(a, l)] = ch.rate(a, l);
        }
        m[(a, a)] += h;
        m[(a, k)] = -f;
    }
    let e = (m * tau).exp();
    let mut y0 = nalgebra::DVector::<f64>::from_element(k + 1, terminal_phi(ws.delta));
    y0[k] = 1.0;
    let y = e * y0;
    Ok((0..k).map(|a| y[a]).collect())
}

/// Monte Carlo estimate of φ(t0, c0) from the probabilistic representation
/// E[e^{∫H} φ(T) − ∫ e^{∫_t^s H} f ds], trapezoid in time on `n` steps.
#[allow(clippy::too_many_arguments)]
pub fn feynman_kac_phi(
    model: &CarbonModel,
    t0: f64,
    c0: &[f64],
    regime0: usize,
    ws: &WeightSolver,
    r: f64,
    t_end: f64,
    n: usize,
    paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let h = (t_end - t0) / n as f64;
    let st = Stepper::new(model, h);
    let d = model.dim();
    let term = terminal_phi(ws.delta);
    let parts = par_chunks(paths, |range| -> Result<Welford> {
        let mut w = Welford::new();
        let mut c = vec![0.0; d];
        let mut scratch = ws.scratch();
        let mut pi = vec![0.0; d];
        for p in range {
            let mut rng = substream(seed, Tag::FeynmanKac, p as u64, 0);
            c.copy_from_slice(c0);
            let mut k = regime0;
            let (mut h_prev, mut f_prev) = h_and_f(t0, &c, ws, r, &mut scratch, &mut pi)?;
            let mut int_h = 0.0;
            let mut running = 0.0;
            let mut disc_prev = 1.0;
            for j in 0..n {
                st.step(&mut c, &mut k, &mut rng);
                let t = if j + 1 == n { t_end } else { t0 + (j + 1) as f64 * h };
                let (h_next, f_next) = h_and_f(t, &c, ws, r, &mut scratch, &mut pi)?;
                int_h += 0.5 * h * (h_prev + h_next);
                let disc = int_h.exp();
                running += 0.5 * h * (disc_prev * f_prev + disc * f_next);
                disc_prev = disc;
                h_prev = h_next;
                f_prev = f_next;
            }
            w.push(int_h.exp() * term - running);
        }
        Ok(w)
    });
    let mut w = Welford::new();
    for p in parts {
        w.merge(&p?);
    }
    Ok((w.mean, w.se()))
}

/// v(t, x, c) given φ(t, c).
pub fn value_function_eval(x: f64, phi: f64, delta: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::NonPositiveWealth(x));
    }
    if delta == 1.0 {
        Ok(x.ln() + phi)
    } else {
        Ok(x.powf(1.0 - delta) / (1.0 - delta) * phi)
    }
}
