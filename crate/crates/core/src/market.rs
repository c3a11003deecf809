use crate::error::{Error, Result};
use crate::linalg;

/// Pivot threshold below which a correlation matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Raw market inputs as read from configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Row-major correlation matrix.
    pub rho: Vec<Vec<f64>>,
    pub r: f64,
}

/// Validated market. Σ = L·D where L is the Cholesky factor of ρ and D = diag(σ).
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub d: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub r: f64,
    pub chol: Vec<f64>,
    /// Volatility matrix Σ, lower triangular, row-major.
    pub vol: Vec<f64>,
    /// ΣΣᵀ = diag(σ) ρ diag(σ), row-major.
    pub cov: Vec<f64>,
}

impl MarketParams {
    pub fn validate(&self) -> Result<MarketModel> {
        validate_market(self)
    }
}

pub fn validate_market(raw: &MarketParams) -> Result<MarketModel> {
    let d = raw.mu.len();
    if d == 0 {
        return Err(Error::DimensionMismatch("market needs at least one asset".into()));
    }
    if raw.sigma.len() != d || raw.rho.len() != d || raw.rho.iter().any(|row| row.len() != d) {
        return Err(Error::DimensionMismatch(format!(
            "mu has {d} entries, sigma {}, rho {}x{}",
            raw.sigma.len(),
            raw.rho.len(),
            raw.rho.first().map_or(0, |r| r.len())
        )));
    }
    if !(raw.r.is_finite() && raw.r >= 0.0) {
        return Err(Error::InvalidParameter(format!("risk-free rate must be finite and >= 0, got {}", raw.r)));
    }
    if let Some(m) = raw.mu.iter().find(|m| !m.is_finite()) {
        return Err(Error::InvalidParameter(format!("drift must be finite, got {m}")));
    }
    for (i, &s) in raw.sigma.iter().enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveVol { asset: i, value: s });
        }
    }
    let mut rho = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let v = raw.rho[i][j];
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("rho[{i}][{j}] is not finite")));
            }
            if (v - raw.rho[j][i]).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("rho is not symmetric at ({i},{j})")));
            }
            if i == j && (v - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("rho[{i}][{i}] = {v}, expected 1")));
            }
            if v.abs() > 1.0 {
                return Err(Error::NotPositiveDefinite(format!("|rho[{i}][{j}]| = {} exceeds 1", v.abs())));
            }
            rho[i * d + j] = v;
        }
    }
    let mut chol = rho.clone();
    linalg::cholesky_in_place(&mut chol, d, PIVOT_TOL).map_err(|(k, p)| {
        Error::NotPositiveDefinite(format!("pivot {k} equals {p:e}"))
    })?;
    for i in 0..d {
        for j in i + 1..d {
            chol[i * d + j] = 0.0;
        }
    }
    let mut vol = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            vol[i * d + j] = chol[i * d + j] * raw.sigma[j];
        }
    }
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] = raw.sigma[i] * rho[i * d + j] * raw.sigma[j];
        }
    }
    Ok(MarketModel {
        d,
        mu: raw.mu.clone(),
        sigma: raw.sigma.clone(),
        rho,
        r: raw.r,
        chol,
        vol,
        cov,
    })
}

impl MarketModel {
    /// Raw parameters this model was built from.
    pub fn params(&self) -> MarketParams {
        let d = self.d;
        MarketParams {
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            rho: (0..d).map(|i| self.rho[i * d..(i + 1) * d].to_vec()).collect(),
            r: self.r,
        }
    }

    /// μ − r·1.
    pub fn excess(&self) -> Vec<f64> {
        self.mu.iter().map(|m| m - self.r).collect()
    }

    /// ΣΣᵀ recomputed from the stored factor (used to check the factorization).
    pub fn vol_vol_t(&self) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| self.vol[i * d + k] * self.vol[j * d + k]).sum();
            }
        }
        out
    }

    pub fn market_price_of_risk(&self) -> Result<Vec<f64>> {
        market_price_of_risk(self)
    }
}

/// θ = Σ⁻¹(μ − r·1), by forward substitution on the triangular Σ.
pub fn market_price_of_risk(m: &MarketModel) -> Result<Vec<f64>> {
    let d = m.d;
    if (0..d).any(|i| m.vol[i * d + i].abs() < PIVOT_TOL) {
        return Err(Error::SingularSigma);
    }
    let mut theta = m.excess();
    linalg::forward_sub(&m.vol, d, &mut theta);
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::SingularSigma);
    }
    Ok(theta)
}

/// The four-stock market used in the variance-reduction and hedging experiments.
pub fn reference_market() -> MarketParams {
    MarketParams {
        mu: vec![0.25, 0.15, 0.10, 0.08],
        sigma: vec![0.30, 0.25, 0.20, 0.16],
        rho: vec![
            vec![1.00, 0.44, 0.39, 0.32],
            vec![0.44, 1.00, 0.30, 0.33],
            vec![0.39, 0.30, 1.00, 0.31],
            vec![0.32, 0.33, 0.31, 1.00],
        ],
        r: 0.05,
    }
}
