//! Standard and conditional (variance-reduced) Monte Carlo estimators for
//! pure endowment, term insurance and endowment insurance.

use crate::actuarial::MortalityModel;
use crate::carbon::{reference_carbon, CarbonModel, SimGrid};
use crate::error::{Error, Result};
use crate::fund::{fund_path_from_normals, fund_terminal_from_normal, Measure, PathSampler, WeightPath};
use crate::market::{reference_market, validate_market, MarketModel};
use crate::rng::{substream, Tag};
use crate::stats::{merge_all, norm_cdf, par_chunks, Welford};
use crate::strategy::{StrategySpec, WeightSolver};
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractKind {
    PureEndowment,
    TermInsurance,
    EndowmentInsurance,
}

impl ContractKind {
    pub fn label(&self) -> &'static str {
        match self {
            ContractKind::PureEndowment => "PE",
            ContractKind::TermInsurance => "TI",
            ContractKind::EndowmentInsurance => "EI",
        }
    }

    pub fn all() -> [ContractKind; 3] {
        [ContractKind::PureEndowment, ContractKind::TermInsurance, ContractKind::EndowmentInsurance]
    }
}

/// Guarantee k(t) = base·e^{floor_rate·t} and cap K(t) = base·e^{cap_rate·t}.
/// `base` is a fixed notional, independent of the fund's starting value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Caps {
    pub base: f64,
    pub floor_rate: f64,
    pub cap_rate: f64,
}

impl Caps {
    pub fn standard(base: f64, r: f64) -> Self {
        Self { base, floor_rate: r, cap_rate: 10.0 * r }
    }

    pub fn floor(&self, t: f64) -> f64 {
        self.base * (self.floor_rate * t).exp()
    }

    pub fn cap(&self, t: f64) -> f64 {
        self.base * (self.cap_rate * t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contract {
    pub kind: ContractKind,
    pub caps: Caps,
    pub maturity: f64,
    /// Weight ϱ of the death benefit in the endowment insurance.
    pub mix: f64,
}

impl Contract {
    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::InvalidParameter(format!("maturity must be positive, got {}", self.maturity)));
        }
        if !(self.caps.base >= 0.0) || !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::InvalidParameter("cap notional must be >= 0 and mix in [0, 1]".into()));
        }
        // both ends suffice: the caps are exponentials in t
        for t in [0.0, self.maturity] {
            let (k, kk) = (self.caps.floor(t), self.caps.cap(t));
            if k > kk {
                return Err(Error::CapOrderViolation { floor: k, cap: kk });
            }
        }
        Ok(())
    }
}

/// min(K, max(k, x)).
pub fn payoff_capped(x: f64, k: f64, cap: f64) -> Result<f64> {
    if k > cap {
        return Err(Error::CapOrderViolation { floor: k, cap });
    }
    Ok(x.max(k).min(cap))
}

/// a = (log(y/x0) − r t + v/2)/√v and b = a − √v.
pub fn ab_terms(v: f64, y: f64, x0: f64, r: f64, t: f64) -> Result<(f64, f64)> {
    if !(v > 0.0) {
        return Err(Error::DegenerateVariance(v));
    }
    let sv = v.sqrt();
    let a = ((y / x0).ln() - r * t + 0.5 * v) / sv;
    Ok((a, a - sv))
}

/// E[min(K, max(k, X))] and its x0-derivative, where
/// X = x0 exp(r t − v/2 + √v F). Falls back to the deterministic payoff when v = 0.
#[inline]
pub fn capped_conditional(x0: f64, r: f64, t: f64, v: f64, k: f64, cap: f64) -> (f64, f64) {
    let growth = (r * t).exp();
    if v <= 0.0 {
        let x = x0 * growth;
        let d = if k < x && x < cap { growth } else { 0.0 };
        return (x.max(k).min(cap), d);
    }
    let sv = v.sqrt();
    let shift = (x0.ln() + r * t - 0.5 * v) / sv;
    let (mut val, mut pb_k, mut pb_cap) = (0.0, 0.0, 1.0);
    if k > 0.0 {
        let a = k.ln() / sv - shift;
        val += k * norm_cdf(a);
        pb_k = norm_cdf(a - sv);
    }
    if cap.is_finite() {
        let a = cap.ln() / sv - shift;
        val += cap * norm_cdf(-a);
        pb_cap = norm_cdf(a - sv);
    }
    val += x0 * growth * (pb_cap - pb_k);
    (val, growth * (pb_cap - pb_k))
}

/// E[min(K, max(k, X))²] under the same law, used by the variance-gap diagnostic.
pub fn capped_second_moment(x0: f64, r: f64, t: f64, v: f64, k: f64, cap: f64) -> f64 {
    if v <= 0.0 {
        let x = (x0 * (r * t).exp()).max(k).min(cap);
        return x * x;
    }
    let sv = v.sqrt();
    let (ak, acap) = (ab_terms(v, k, x0, r, t).unwrap().0, ab_terms(v, cap, x0, r, t).unwrap().0);
    k * k * norm_cdf(ak)
        + cap * cap * norm_cdf(-acap)
        + x0 * x0 * (2.0 * r * t + v).exp() * (norm_cdf(acap - 2.0 * sv) - norm_cdf(ak - 2.0 * sv))
}

/// Everything that depends only on the grid and contract, evaluated once.
#[derive(Debug, Clone)]
pub struct ContractTables {
    pub grid: SimGrid,
    pub r: f64,
    pub times: Vec<f64>,
    /// P_j = e^{−r t_j} S(t_j) γ(t_j)
    pub death: Vec<f64>,
    pub floor: Vec<f64>,
    pub cap: Vec<f64>,
    pub surv_t: f64,
    pub disc_t: f64,
    pub mix: f64,
}

impl ContractTables {
    pub fn new(contract: &Contract, mortality: &MortalityModel, age: f64, r: f64, grid: SimGrid) -> Self {
        let times: Vec<f64> = (0..=grid.n).map(|j| grid.time(j)).collect();
        Self {
            grid,
            r,
            death: times.iter().map(|&t| mortality.death_weight(age, t, r)).collect(),
            floor: times.iter().map(|&t| contract.caps.floor(t)).collect(),
            cap: times.iter().map(|&t| contract.caps.cap(t)).collect(),
            surv_t: mortality.survival(age, grid.t_end),
            disc_t: (-r * grid.t_end).exp(),
            mix: contract.mix,
            times,
        }
    }
}

/// One replicate of a pricing estimator: standard draw, conditional value, conditional delta.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub st: f64,
    pub vr: f64,
    pub delta: f64,
}

/// Pure endowment given the weight path and the fund's terminal value.
pub fn pe_estimators(w: &WeightPath, tab: &ContractTables, x0: f64, x_t: f64) -> Sample {
    let n = tab.grid.n;
    let (k, cap) = (tab.floor[n], tab.cap[n]);
    let (e, de) = capped_conditional(x0, tab.r, tab.grid.t_end, w.v_total(), k, cap);
    let scale = tab.disc_t * tab.surv_t;
    Sample { st: scale * x_t.max(k).min(cap), vr: scale * e, delta: scale * de }
}

/// Var(Υ^st | π̂) for the pure endowment, whose average is Var(Υ^st) − Var(Υ^vr).
pub fn variance_gap_diagnostic(w: &WeightPath, tab: &ContractTables, x0: f64) -> f64 {
    let n = tab.grid.n;
    let (k, cap) = (tab.floor[n], tab.cap[n]);
    let t = tab.grid.t_end;
    let (e, _) = capped_conditional(x0, tab.r, t, w.v_total(), k, cap);
    let e2 = capped_second_moment(x0, tab.r, t, w.v_total(), k, cap);
    let scale = tab.disc_t * tab.surv_t;
    scale * scale * (e2 - e * e).max(0.0)
}

/// Term insurance given the weight path and the N-step fund path.
pub fn ti_estimators(w: &WeightPath, fund: &[f64], tab: &ContractTables, x0: f64) -> Sample {
    let h = tab.grid.h();
    let mut s = Sample::default();
    for j in 0..=tab.grid.n {
        let wt = if j == 0 || j == tab.grid.n { 0.5 * h } else { h } * tab.death[j];
        if wt == 0.0 {
            continue;
        }
        let (e, de) = capped_conditional(x0, tab.r, tab.times[j], w.v[j], tab.floor[j], tab.cap[j]);
        s.st += wt * fund[j].max(tab.floor[j]).min(tab.cap[j]);
        s.vr += wt * e;
        s.delta += wt * de;
    }
    s
}

/// ϱ·TI + PE.
pub fn ei_combine(pe: Sample, ti: Sample, mix: f64) -> Sample {
    Sample { st: mix * ti.st + pe.st, vr: mix * ti.vr + pe.vr, delta: mix * ti.delta + pe.delta }
}

/// How the standard term-insurance estimator draws fund values at the grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StandardFund {
    /// One coherent N-step path.
    #[default]
    Path,
    /// Independent one-step draws X̂_j = x0 exp(r t_j − v^j/2 + √(v^j) F_j) per node.
    Marginal,
}

/// A complete pricing configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub market: MarketModel,
    pub carbon: CarbonModel,
    pub strategy: StrategySpec,
    pub mortality: MortalityModel,
    pub age: f64,
    pub contract: Contract,
    pub n_steps: usize,
    pub x0: f64,
    pub standard_fund: StandardFund,
}

impl Experiment {
    /// Four-stock CIR setup with δ = 1, α = 0.0025, r = 0.05, x0 = 1, age 60, N = 5T.
    pub fn reference(kind: ContractKind, maturity: f64) -> Self {
        let market = validate_market(&reference_market()).expect("reference market is valid");
        Self {
            strategy: StrategySpec::constant(1.0, 0.0025, market.d),
            carbon: reference_carbon(),
            mortality: MortalityModel::default(),
            age: 60.0,
            contract: Contract { kind, caps: Caps::standard(1.0, market.r), maturity, mix: 1.0 },
            n_steps: ((5.0 * maturity).round() as usize).max(1),
            x0: 1.0,
            standard_fund: StandardFund::Path,
            market,
        }
    }

    pub fn grid(&self) -> Result<SimGrid> {
        SimGrid::new(self.contract.maturity, self.n_steps)
    }

    pub fn validate(&self) -> Result<WeightSolver> {
        self.carbon.validate()?;
        self.mortality.validate()?;
        self.contract.validate()?;
        if self.carbon.dim() != self.market.d {
            return Err(Error::DimensionMismatch(format!(
                "market has {} assets, carbon model {}",
                self.market.d,
                self.carbon.dim()
            )));
        }
        if !(self.x0 > 0.0) {
            return Err(Error::NonPositiveWealth(self.x0));
        }
        if !(self.age >= 0.0) {
            return Err(Error::InvalidParameter(format!("age must be >= 0, got {}", self.age)));
        }
        WeightSolver::new(&self.market, &self.strategy)
    }

    pub fn tables(&self) -> Result<ContractTables> {
        Ok(ContractTables::new(&self.contract, &self.mortality, self.age, self.market.r, self.grid()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceReport {
    pub m: usize,
    pub price_vr: f64,
    pub se_vr: f64,
    pub price_st: f64,
    pub se_st: f64,
    pub var_st: f64,
    pub var_vr: f64,
    /// 1 − var_vr/var_st, as a fraction.
    pub reduction: f64,
    pub delta: f64,
    pub se_delta: f64,
    /// Mean and standard error of the analytic variance gap (pure endowment only, NaN otherwise).
    pub gap: f64,
    pub se_gap: f64,
}

/// Draws one replicate. Carbon from `(seed, Carbon, p)`, fund Gaussians from `(seed, Fund, p)`.
#[allow(clippy::too_many_arguments)]
pub fn replicate(
    exp: &Experiment,
    sampler: &PathSampler,
    tab: &ContractTables,
    seed: u64,
    p: u64,
    bufs: &mut (WeightPath, crate::carbon::CarbonPath, Vec<f64>),
    fund: &mut Vec<f64>,
    normals: &mut Vec<f64>,
) -> Result<(Sample, f64)> {
    let (w, cp, scratch) = bufs;
    sampler.sample(&mut substream(seed, Tag::Carbon, p, 0), w, cp, scratch)?;
    let mut frng = substream(seed, Tag::Fund, p, 0);
    let r = exp.market.r;
    let kind = exp.contract.kind;
    Ok(match kind {
        ContractKind::PureEndowment => {
            let f: f64 = StandardNormal.sample(&mut frng);
            let xt = fund_terminal_from_normal(w, exp.x0, r, f);
            (pe_estimators(w, tab, exp.x0, xt), variance_gap_diagnostic(w, tab, exp.x0))
        }
        ContractKind::TermInsurance | ContractKind::EndowmentInsurance => {
            normals.clear();
            normals.extend((0..tab.grid.n).map(|_| -> f64 { StandardNormal.sample(&mut frng) }));
            fund.resize(tab.grid.n + 1, 0.0);
            match exp.standard_fund {
                StandardFund::Path => fund_path_from_normals(w, exp.x0, r, Measure::Pricing, normals, fund),
                StandardFund::Marginal => {
                    fund[0] = exp.x0;
                    for j in 1..=tab.grid.n {
                        fund[j] = exp.x0 * (r * tab.times[j] - 0.5 * w.v[j] + w.v[j].sqrt() * normals[j - 1]).exp();
                    }
                }
            }
            let ti = ti_estimators(w, fund, tab, exp.x0);
            if kind == ContractKind::TermInsurance {
                (ti, f64::NAN)
            } else {
                let pe = pe_estimators(w, tab, exp.x0, fund[tab.grid.n]);
                (ei_combine(pe, ti, tab.mix), f64::NAN)
            }
        }
    })
}

/// Batch driver over `m` independent replicates.
pub fn mc_price(exp: &Experiment, m: usize, seed: u64) -> Result<PriceReport> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 replicates, got {m}")));
    }
    let ws = exp.validate()?;
    let tab = exp.tables()?;
    let sampler = PathSampler::new(&exp.carbon, &ws, tab.grid);
    let parts = par_chunks(m, |range| -> Result<[Welford; 4]> {
        let mut acc = [Welford::new(); 4];
        let mut bufs = sampler.buffers();
        let (mut fund, mut normals) = (Vec::new(), Vec::new());
        for p in range {
            let (s, gap) = replicate(exp, &sampler, &tab, seed, p as u64, &mut bufs, &mut fund, &mut normals)?;
            acc[0].push(s.st);
            acc[1].push(s.vr);
            acc[2].push(s.delta);
            if gap.is_finite() {
                acc[3].push(gap);
            }
        }
        Ok(acc)
    });
    let parts: Vec<[Welford; 4]> = parts.into_iter().collect::<Result<_>>()?;
    let [st, vr, de, gap] = merge_all(&parts);
    let (g, sg) = if gap.n > 0 { (gap.mean, gap.se()) } else { (f64::NAN, f64::NAN) };
    Ok(PriceReport {
        m,
        price_vr: vr.mean,
        se_vr: vr.se(),
        price_st: st.mean,
        se_st: st.se(),
        var_st: st.var(),
        var_vr: vr.var(),
        reduction: if st.var() > 0.0 { 1.0 - vr.var() / st.var() } else { f64::NAN },
        delta: de.mean,
        se_delta: de.se(),
        gap: g,
        se_gap: sg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carbon::AssetDynamics;

    #[test]
    fn payoff_examples() {
        assert_eq!(payoff_capped(1.5, 1.0, 2.7).unwrap(), 1.5);
        assert_eq!(payoff_capped(0.1, 1.0, 2.7).unwrap(), 1.0);
        assert_eq!(payoff_capped(10.0, 1.0, 2.7).unwrap(), 2.7);
        assert!(matches!(payoff_capped(1.0, 3.0, 2.0), Err(Error::CapOrderViolation { .. })));
    }

    #[test]
    fn ab_examples() {
        let (a, b) = ab_terms(1.0, (0.05f64 * 4.0).exp(), 1.0, 0.05, 4.0).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b + 0.5).abs() < 1e-15);
        let v: f64 = 0.3;
        let y = 2.0 * (0.05 * 3.0 - v / 2.0).exp();
        assert!(ab_terms(v, y, 2.0, 0.05, 3.0).unwrap().0.abs() < 1e-15);
        assert!(matches!(ab_terms(0.0, 1.0, 1.0, 0.0, 1.0), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn conditional_matches_quadrature() {
        let (x0, r, t, v, k, cap) = (1.0, 0.05, 10.0, 0.4, 1.3, 3.0);
        let (e, de) = capped_conditional(x0, r, t, v, k, cap);
        let dens = |f: f64| (-0.5 * f * f).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let pay = |x0: f64, f: f64| (x0 * (r * t - v / 2.0 + v.sqrt() * f).exp()).max(k).min(cap);
        // split at the two kinks of the payoff
        let fk = ab_terms(v, k, x0, r, t).unwrap().0;
        let fc = ab_terms(v, cap, x0, r, t).unwrap().0;
        let piecewise = |g: &dyn Fn(f64) -> f64| -> f64 {
            [(-12.0, fk), (fk, fc), (fc, 12.0)].iter().map(|&(a, b)| quadrature::integrate(g, a, b, 1e-13).integral).sum()
        };
        let q = piecewise(&|f| pay(x0, f) * dens(f));
        assert!((e - q).abs() < 1e-10, "{e} {q}");
        let bump = 1e-5;
        let up = capped_conditional(x0 + bump, r, t, v, k, cap).0;
        let dn = capped_conditional(x0 - bump, r, t, v, k, cap).0;
        assert!((de - (up - dn) / (2.0 * bump)).abs() < 1e-7);
        let e2 = capped_second_moment(x0, r, t, v, k, cap);
        let q2 = piecewise(&|f| pay(x0, f).powi(2) * dens(f));
        assert!((e2 - q2).abs() < 1e-10);
    }

    #[test]
    fn collapsed_caps() {
        let (e, de) = capped_conditional(1.0, 0.05, 10.0, 0.4, 2.0, 2.0);
        assert!((e - 2.0).abs() < 1e-15 && de.abs() < 1e-15);
        let (e, _) = capped_conditional(1.0, 0.05, 10.0, 0.0, 1.0, 5.0);
        assert_eq!(e, 0.5f64.exp());
    }

    fn deterministic(kind: ContractKind, t: f64) -> Experiment {
        let mut e = Experiment::reference(kind, t);
        e.strategy = StrategySpec::constant(1.0, 0.0, 4);
        e.carbon = CarbonModel::Diffusion {
            assets: vec![AssetDynamics::Cir { kappa: 0.05, mean: 2500.0, lambda: 0.0 }; 4],
            c0: vec![2500.0; 4],
        };
        e
    }

    #[test]
    fn deterministic_weights_give_constant_vr() {
        let r = mc_price(&deterministic(ContractKind::PureEndowment, 10.0), 200, 5).unwrap();
        assert!(r.var_vr < 1e-28);
        assert!(r.var_st > 0.0);
    }

    #[test]
    fn no_deaths_no_benefit() {
        let mut e = Experiment::reference(ContractKind::TermInsurance, 5.0);
        e.mortality = MortalityModel { xi: 0.0, b: 1.0, m: 1e6, sign: crate::actuarial::MSign::Minus };
        let r = mc_price(&e, 64, 1).unwrap();
        assert_eq!(r.price_vr, 0.0);
        assert_eq!(r.price_st, 0.0);
        e.contract.kind = ContractKind::EndowmentInsurance;
        let ei = mc_price(&e, 64, 1).unwrap();
        e.contract.kind = ContractKind::PureEndowment;
        let pe_vr = {
            let ws = e.validate().unwrap();
            let tab = e.tables().unwrap();
            let sampler = PathSampler::new(&e.carbon, &ws, tab.grid);
            let mut bufs = sampler.buffers();
            let mut acc = Welford::new();
            for p in 0..64 {
                sampler.sample(&mut substream(1, Tag::Carbon, p, 0), &mut bufs.0, &mut bufs.1, &mut bufs.2).unwrap();
                acc.push(pe_estimators(&bufs.0, &tab, 1.0, 1.0).vr);
            }
            acc.mean
        };
        assert!((ei.price_vr - pe_vr).abs() < 1e-15);
    }

    #[test]
    fn zero_mix_is_pure_endowment() {
        let pe = Sample { st: 1.0, vr: 2.0, delta: 3.0 };
        let ti = Sample { st: 5.0, vr: 6.0, delta: 7.0 };
        assert_eq!(ei_combine(pe, ti, 0.0), pe);
    }

    #[test]
    fn single_step_term_insurance_by_hand() {
        let mut e = deterministic(ContractKind::TermInsurance, 1.0);
        e.n_steps = 1;
        e.strategy = StrategySpec::constant(1.0, 1e15, 4);
        let r = mc_price(&e, 4, 2).unwrap();
        let mm = e.mortality;
        let want = 0.5 * (mm.death_weight(60.0, 0.0, 0.05) * 1.0 + mm.death_weight(60.0, 1.0, 0.05) * 0.05f64.exp());
        assert!((r.price_vr - want).abs() < 1e-12);
        assert!((r.price_st - want).abs() < 1e-12);
    }

    #[test]
    fn constant_hazard_closed_form() {
        let mut e = deterministic(ContractKind::TermInsurance, 10.0);
        e.mortality = MortalityModel { xi: 0.03, b: 1.0, m: 1e6, sign: crate::actuarial::MSign::Minus };
        e.contract.caps = Caps { base: 1.7, floor_rate: 0.0, cap_rate: 0.0 };
        e.n_steps = 400;
        let rep = mc_price(&e, 16, 3).unwrap();
        let (g, r) = (0.03, 0.05);
        let want = 1.7 * g / (g + r) * (1.0 - (-(g + r) * 10.0f64).exp());
        assert!((rep.price_vr - want).abs() < 1e-5 * want);
    }

    #[test]
    fn pe_vr_within_bounds() {
        let e = Experiment::reference(ContractKind::PureEndowment, 10.0);
        let ws = e.validate().unwrap();
        let tab = e.tables().unwrap();
        let sampler = PathSampler::new(&e.carbon, &ws, tab.grid);
        let mut bufs = sampler.buffers();
        let lo = tab.disc_t * tab.floor[tab.grid.n] * tab.surv_t;
        let hi = tab.disc_t * tab.cap[tab.grid.n] * tab.surv_t;
        for p in 0..200 {
            sampler.sample(&mut substream(8, Tag::Carbon, p, 0), &mut bufs.0, &mut bufs.1, &mut bufs.2).unwrap();
            let s = pe_estimators(&bufs.0, &tab, 1.0, 1.0);
            assert!(s.vr >= lo - 1e-15 && s.vr <= hi + 1e-15);
        }
    }
}
