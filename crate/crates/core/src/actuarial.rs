//! Gompertz–Makeham mortality.

use crate::error::{Error, Result};

/// How the modal age enters the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MSign {
    /// exp((ι + t − m)/b), the usual Makeham form.
    #[default]
    Minus,
    /// exp((ι + t + m)/b), the sign-flipped variant.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MortalityModel {
    pub xi: f64,
    pub b: f64,
    pub m: f64,
    pub sign: MSign,
}

impl Default for MortalityModel {
    fn default() -> Self {
        Self { xi: 0.0041959, b: 11.5818911, m: 79.6921211, sign: MSign::Minus }
    }
}

impl MortalityModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.xi >= 0.0 && self.xi.is_finite() && self.m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mortality needs b > 0 and xi >= 0, got b={}, xi={}",
                self.b, self.xi
            )));
        }
        Ok(())
    }

    fn shift(&self, age: f64) -> f64 {
        match self.sign {
            MSign::Minus => age - self.m,
            MSign::PaperLiteral => age + self.m,
        }
    }

    /// A = e^{(ι ∓ m)/b}, the Gompertz scale at age ι.
    fn scale(&self, age: f64) -> f64 {
        (self.shift(age) / self.b).exp()
    }

    /// γ(t) for a life aged `age` at time 0.
    pub fn intensity(&self, age: f64, t: f64) -> f64 {
        self.xi + ((self.shift(age) + t) / self.b).exp() / self.b
    }

    /// ∫₀ᵗ γ.
    pub fn cum_hazard(&self, age: f64, t: f64) -> f64 {
        self.xi * t + self.scale(age) * (t / self.b).exp_m1()
    }

    pub fn survival(&self, age: f64, t: f64) -> f64 {
        (-self.cum_hazard(age, t)).exp()
    }

    /// e^{−rt} S(t) γ(t), the discounted death density.
    pub fn death_weight(&self, age: f64, t: f64, r: f64) -> f64 {
        (-r * t - self.cum_hazard(age, t)).exp() * self.intensity(age, t)
    }

    /// Death time solving S(τ) = u, for u in (0, 1].
    pub fn lifetime_from_uniform(&self, age: f64, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        if u <= 0.0 {
            return f64::INFINITY;
        }
        let y = -u.ln();
        let a = self.scale(age);
        let (xi, b) = (self.xi, self.b);
        if a == 0.0 {
            return y / xi;
        }
        // g(τ) = ξτ + A(e^{τ/b} − 1) − y is convex and increasing, and both
        // candidates below sit at or right of the root, so Newton descends monotonically.
        let mut tau = (b * (y / a).ln_1p()).min(if xi > 0.0 { y / xi } else { f64::INFINITY });
        for _ in 0..100 {
            let e = (tau / b).exp();
            let g = xi * tau + a * (e - 1.0) - y;
            let dg = xi + a * e / b;
            let next = tau - g / dg;
            if !(next < tau) || (tau - next) <= 1e-15 * tau.max(1e-300) {
                return next.max(0.0).min(tau);
            }
            tau = next;
        }
        tau
    }
}

/// Standalone forms matching the operation names.
pub fn gm_intensity(model: &MortalityModel, age: f64, t: f64) -> f64 {
    model.intensity(age, t)
}

pub fn survival(model: &MortalityModel, age: f64, t: f64) -> f64 {
    model.survival(age, t)
}

pub fn death_weight(model: &MortalityModel, age: f64, t: f64, r: f64) -> f64 {
    model.death_weight(age, t, r)
}

pub fn sample_lifetime<R: rand::Rng + ?Sized>(model: &MortalityModel, age: f64, rng: &mut R) -> f64 {
    // 1 − U lies in (0, 1], which keeps the boundary U = 1 ↦ τ = 0 reachable and avoids ln 0
    let u = 1.0 - rng.random::<f64>();
    model.lifetime_from_uniform(age, u)
}
