//! Risk-minimizing hedge ratios and backtests of continuous, static and no hedging
//! on policy portfolios.
//!
//! The hedge instrument is the discounted fund Y = e^{−rt} X. Holding β̃ units of Y
//! is the same trade as holding the stocks in the fund's proportions, so stock paths
//! are never simulated.

use crate::actuarial::MortalityModel;
use crate::carbon::{CarbonPath, Stepper};
use crate::error::{Error, Result};
use crate::fund::{fund_path_from_normals, Measure, PathSampler, WeightPath};
use crate::pricing::{capped_conditional, ContractKind, ContractTables, Experiment};
use crate::rng::{substream, Tag};
use crate::stats::{norm_cdf, par_chunks, quantile_sorted, Welford};
use crate::strategy::WeightSolver;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HedgeStrategy {
    Continuous,
    Static,
    None,
}

impl HedgeStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            HedgeStrategy::Continuous => "continuous",
            HedgeStrategy::Static => "static",
            HedgeStrategy::None => "none",
        }
    }

    pub fn all() -> [HedgeStrategy; 3] {
        [HedgeStrategy::None, HedgeStrategy::Static, HedgeStrategy::Continuous]
    }
}

/// Ages of the policyholders in a portfolio.
#[derive(Debug, Clone, PartialEq)]
pub enum AgeSpec {
    Single(f64),
    /// Uniform over the integers lo..=hi.
    Range { lo: i64, hi: i64 },
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pub ages: Vec<f64>,
}

impl Portfolio {
    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    /// Distinct ages and the policy indices holding each.
    fn groups(&self) -> Vec<(f64, Vec<usize>)> {
        let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
        for (i, &a) in self.ages.iter().enumerate() {
            match out.iter_mut().find(|(g, _)| *g == a) {
                Some((_, v)) => v.push(i),
                None => out.push((a, vec![i])),
            }
        }
        out
    }
}

/// Builds `n` policies. Random ages are drawn from `(seed, Ages, 0, 0)`.
pub fn build_policy_portfolio(n: usize, ages: &AgeSpec, seed: u64) -> Result<Portfolio> {
    if n == 0 {
        return Err(Error::InvalidParameter("portfolio needs at least one policy".into()));
    }
    let ages = match ages {
        AgeSpec::Single(a) => vec![*a; n],
        AgeSpec::Range { lo, hi } => {
            if lo > hi {
                return Err(Error::InvalidParameter(format!("age range {lo}..={hi} is empty")));
            }
            let mut rng = substream(seed, Tag::Ages, 0, 0);
            (0..n).map(|_| rng.random_range(*lo..=*hi) as f64).collect()
        }
        AgeSpec::List(v) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!("{} ages listed for {n} policies", v.len())));
            }
            v.clone()
        }
    };
    if ages.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::InvalidParameter("ages must be non-negative".into()));
    }
    Ok(Portfolio { ages })
}

/// Settings of a backtest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeConfig {
    /// Measure generating the fund scenarios.
    pub measure: Measure,
    /// Carbon sub-paths per rebalance date.
    pub m_inner: usize,
    /// Replicates for the premium.
    pub premium_replicates: usize,
    /// Rebalance every this many grid steps.
    pub rebalance_every: usize,
    /// Report costs per policy.
    pub per_policy: bool,
    /// Report costs in time-T money instead of time-0 money.
    pub value_at_maturity: bool,
}

impl Default for HedgeConfig {
    fn default() -> Self {
        Self {
            measure: Measure::Physical,
            m_inner: 256,
            premium_replicates: 1_000_000,
            rebalance_every: 1,
            per_policy: true,
            value_at_maturity: false,
        }
    }
}

/// Mean over carbon paths of the undiscounted conditional payoff E_j at every node.
/// Any pricing functional of the contract is linear in these.
pub fn conditional_payoff_means(exp: &Experiment, m: usize, seed: u64) -> Result<Vec<f64>> {
    let ws = exp.validate()?;
    let tab = exp.tables()?;
    let sampler = PathSampler::new(&exp.carbon, &ws, tab.grid);
    let n = tab.grid.n;
    let parts = par_chunks(m, |range| -> Result<Vec<Welford>> {
        let mut acc = vec![Welford::new(); n + 1];
        let mut bufs = sampler.buffers();
        for p in range {
            sampler.sample(&mut substream(seed, Tag::Carbon, p as u64, 0), &mut bufs.0, &mut bufs.1, &mut bufs.2)?;
            for (j, a) in acc.iter_mut().enumerate() {
                a.push(capped_conditional(exp.x0, tab.r, tab.times[j], bufs.0.v[j], tab.floor[j], tab.cap[j]).0);
            }
        }
        Ok(acc)
    });
    let mut out = vec![Welford::new(); n + 1];
    for p in parts {
        for (o, w) in out.iter_mut().zip(p?.iter()) {
            o.merge(w);
        }
    }
    Ok(out.iter().map(|w| w.mean).collect())
}

fn trapezoid_weight(l: usize, j: usize, n: usize, h: f64) -> f64 {
    if l == j || l == n {
        0.5 * h
    } else {
        h
    }
}

/// Per-policy price at time 0 for a life aged `age`, from node means of E_j.
pub fn policy_price(kind: ContractKind, means: &[f64], mortality: &MortalityModel, age: f64, tab: &ContractTables) -> f64 {
    let n = tab.grid.n;
    let h = tab.grid.h();
    let pe = tab.disc_t * mortality.survival(age, tab.grid.t_end) * means[n];
    let ti: f64 = (0..=n)
        .map(|j| trapezoid_weight(j, 0, n, h) * mortality.death_weight(age, tab.times[j], tab.r) * means[j])
        .sum();
    match kind {
        ContractKind::PureEndowment => pe,
        ContractKind::TermInsurance => ti,
        ContractKind::EndowmentInsurance => tab.mix * ti + pe,
    }
}

/// Survival and intensity of one age on the grid.
#[derive(Debug, Clone)]
struct AgeTable {
    surv: Vec<f64>,
    gamma: Vec<f64>,
}

impl AgeTable {
    fn new(m: &MortalityModel, age: f64, times: &[f64]) -> Self {
        Self {
            surv: times.iter().map(|&t| m.survival(age, t)).collect(),
            gamma: times.iter().map(|&t| m.intensity(age, t)).collect(),
        }
    }
}

/// Inner simulation for the hedge ratio at node `j`: fills `diff[l]` for l = j..=N with
/// E[Φ(b_l(K(t_l))) − Φ(b_l(k(t_l)))] over carbon sub-paths started from the outer state,
/// where b_l uses the current fund value and the sub-path variance from t_j to t_l.
#[allow(clippy::too_many_arguments)]
pub fn inner_phi_diffs<R: Rng + ?Sized>(
    stepper: &Stepper,
    ws: &WeightSolver,
    tab: &ContractTables,
    j: usize,
    x_t: f64,
    c_t: &[f64],
    regime: usize,
    quad_t: f64,
    m_inner: usize,
    rng: &mut R,
    diff: &mut [f64],
) -> Result<()> {
    let n = tab.grid.n;
    let h = tab.grid.h();
    let d = ws.d;
    let lx = x_t.ln();
    diff[j] = if tab.floor[j] < x_t && x_t < tab.cap[j] { 1.0 } else { 0.0 };
    for v in diff[j + 1..=n].iter_mut() {
        *v = 0.0;
    }
    if j == n {
        return Ok(());
    }
    // log caps shifted by the risk-free growth from t_j, precomputed per node
    let mut lk = vec![0.0; n + 1];
    let mut lcap = vec![0.0; n + 1];
    for l in j + 1..=n {
        let g = tab.r * (tab.times[l] - tab.times[j]);
        lk[l] = if tab.floor[l] > 0.0 { tab.floor[l].ln() - lx - g } else { f64::NEG_INFINITY };
        lcap[l] = tab.cap[l].ln() - lx - g;
    }
    let mut c = vec![0.0; d];
    let mut pi = vec![0.0; d];
    let mut scratch = ws.scratch();
    for _ in 0..m_inner {
        c.copy_from_slice(c_t);
        let mut k = regime;
        let mut s_prev = quad_t;
        let mut v = 0.0;
        for l in j + 1..=n {
            stepper.step(&mut c, &mut k, rng);
            ws.solve(tab.times[l], &c, &mut pi, &mut scratch)?;
            let s = ws.quad(&pi);
            v += 0.5 * h * (s_prev + s);
            s_prev = s;
            if v > 0.0 {
                let sv = v.sqrt();
                let half = 0.5 * v;
                let up = if lcap[l].is_finite() { norm_cdf((lcap[l] - half) / sv) } else { 1.0 };
                let lo = if lk[l].is_finite() { norm_cdf((lk[l] - half) / sv) } else { 0.0 };
                diff[l] += up - lo;
            } else {
                diff[l] += if lk[l] < 0.0 && 0.0 < lcap[l] { 1.0 } else { 0.0 };
            }
        }
    }
    let inv = 1.0 / m_inner as f64;
    for v in diff[j + 1..=n].iter_mut() {
        *v *= inv;
    }
    Ok(())
}

/// Hedge ratio, in units of the discounted fund, for one policy aged `age` that is alive
/// at node `j`, given Φ-differences from [`inner_phi_diffs`].
pub fn ratio_from_diffs(kind: ContractKind, age_tab_surv: &[f64], age_tab_gamma: &[f64], tab: &ContractTables, j: usize, diff: &[f64]) -> f64 {
    let n = tab.grid.n;
    let h = tab.grid.h();
    let st = age_tab_surv[j];
    let pe = age_tab_surv[n] / st * diff[n];
    let ti = || -> f64 {
        (j..=n)
            .map(|l| trapezoid_weight(l, j, n, h) * age_tab_surv[l] / st * age_tab_gamma[l] * diff[l])
            .sum()
    };
    match kind {
        ContractKind::PureEndowment => pe,
        ContractKind::TermInsurance => ti(),
        ContractKind::EndowmentInsurance => tab.mix * ti() + pe,
    }
}

/// Risk-minimizing hedge ratio of a single policy of the experiment's contract and age,
/// at node `j` with fund value `x_t` and carbon state `(c_t, regime)`.
#[allow(clippy::too_many_arguments)]
pub fn rm_delta<R: Rng + ?Sized>(
    exp: &Experiment,
    j: usize,
    x_t: f64,
    c_t: &[f64],
    regime: usize,
    alive: bool,
    m_inner: usize,
    rng: &mut R,
) -> Result<f64> {
    if !alive {
        return Ok(0.0);
    }
    let ws = exp.validate()?;
    let tab = exp.tables()?;
    if j > tab.grid.n {
        return Err(Error::ConfigMismatch(format!("rebalance node {j} is past the grid end {}", tab.grid.n)));
    }
    let stepper = Stepper::new(&exp.carbon, tab.grid.h());
    let mut pi = vec![0.0; ws.d];
    let mut scratch = ws.scratch();
    ws.solve(tab.times[j], c_t, &mut pi, &mut scratch)?;
    let quad = ws.quad(&pi);
    let mut diff = vec![0.0; tab.grid.n + 1];
    inner_phi_diffs(&stepper, &ws, &tab, j, x_t, c_t, regime, quad, m_inner.max(1), rng, &mut diff)?;
    let at = AgeTable::new(&exp.mortality, exp.age, &tab.times);
    Ok(ratio_from_diffs(exp.contract.kind, &at.surv, &at.gamma, &tab, j, &diff))
}

/// Raw accounting of one scenario for one (portfolio, contract) pair, in time-0 money.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScenarioLedger {
    pub benefits: f64,
    pub gains_continuous: f64,
    pub gains_static: f64,
    /// Fraction of policies receiving the maturity benefit.
    pub survivors: f64,
}

/// Output of a backtest: `ledgers[p][k][s]` for portfolio p, contract k, scenario s.
#[derive(Debug, Clone)]
pub struct HedgeRun {
    pub kinds: Vec<ContractKind>,
    pub policies: Vec<usize>,
    /// Total premium per portfolio and contract.
    pub premiums: Vec<Vec<f64>>,
    pub ledgers: Vec<Vec<Vec<ScenarioLedger>>>,
    pub r: f64,
    pub maturity: f64,
}

impl HedgeRun {
    /// Cost = benefits − premium − gains, with the run's reporting conventions applied.
    pub fn costs(&self, p: usize, k: usize, strategy: HedgeStrategy, per_policy: bool, value_at_maturity: bool) -> Vec<f64> {
        let mut scale = if per_policy { 1.0 / self.policies[p] as f64 } else { 1.0 };
        if value_at_maturity {
            scale *= (self.r * self.maturity).exp();
        }
        let prem = self.premiums[p][k];
        self.ledgers[p][k]
            .iter()
            .map(|l| {
                let g = match strategy {
                    HedgeStrategy::Continuous => l.gains_continuous,
                    HedgeStrategy::Static => l.gains_static,
                    HedgeStrategy::None => 0.0,
                };
                scale * (l.benefits - prem - g)
            })
            .collect()
    }
}

struct PolicyDeaths {
    /// Death times strictly before maturity, with policy index, sorted.
    deaths: Vec<(f64, usize)>,
    survivors: usize,
}

/// Runs the backtest for several portfolios and contracts on shared scenarios.
///
/// Per scenario: one carbon/weight path, one fund path under `cfg.measure`, independent
/// lifetimes per portfolio, and one inner simulation per rebalance date shared by all
/// portfolios and contracts.
pub fn hedge_engine(
    exp: &Experiment,
    portfolios: &[Portfolio],
    kinds: &[ContractKind],
    cfg: &HedgeConfig,
    m_outer: usize,
    seed: u64,
) -> Result<HedgeRun> {
    let ws = exp.validate()?;
    let tab = exp.tables()?;
    if cfg.rebalance_every == 0 || cfg.m_inner == 0 {
        return Err(Error::InvalidParameter("rebalance_every and m_inner must be >= 1".into()));
    }
    if portfolios.iter().any(|p| p.is_empty()) || kinds.is_empty() {
        return Err(Error::InvalidParameter("need non-empty portfolios and at least one contract".into()));
    }
    let n = tab.grid.n;
    let h = tab.grid.h();
    let r = tab.r;
    let t_end = tab.grid.t_end;

    let pseed = substream(seed, Tag::Premium, 0, 0).random::<u64>();
    let means = conditional_payoff_means(exp, cfg.premium_replicates.max(2), pseed)?;

    let groups: Vec<Vec<(f64, Vec<usize>)>> = portfolios.iter().map(|p| p.groups()).collect();
    let age_tabs: Vec<Vec<AgeTable>> = groups
        .iter()
        .map(|g| g.iter().map(|(a, _)| AgeTable::new(&exp.mortality, *a, &tab.times)).collect())
        .collect();
    let premiums: Vec<Vec<f64>> = portfolios
        .iter()
        .map(|p| kinds.iter().map(|&k| p.ages.iter().map(|&a| policy_price(k, &means, &exp.mortality, a, &tab)).sum()).collect())
        .collect();

    let sampler = PathSampler::new(&exp.carbon, &ws, tab.grid);
    let stepper = Stepper::new(&exp.carbon, h);
    let rebalance: Vec<usize> = (0..n).step_by(cfg.rebalance_every).collect();

    let parts = par_chunks(m_outer, |range| -> Result<Vec<Vec<Vec<ScenarioLedger>>>> {
        let mut out = vec![vec![Vec::with_capacity(range.len()); kinds.len()]; portfolios.len()];
        let (mut w, mut cp, mut scratch): (WeightPath, CarbonPath, Vec<f64>) = sampler.buffers();
        let mut fund = vec![0.0; n + 1];
        let mut normals = vec![0.0; n];
        let mut diff = vec![0.0; n + 1];
        for s in range {
            let s = s as u64;
            sampler.sample(&mut substream(seed, Tag::Carbon, s, 0), &mut w, &mut cp, &mut scratch)?;
            let mut frng = substream(seed, Tag::Fund, s, 0);
            normals.iter_mut().for_each(|z| *z = StandardNormal.sample(&mut frng));
            fund_path_from_normals(&w, exp.x0, r, cfg.measure, &normals, &mut fund);
            let y: Vec<f64> = (0..=n).map(|j| (-r * tab.times[j]).exp() * fund[j]).collect();

            let deaths: Vec<PolicyDeaths> = portfolios
                .iter()
                .enumerate()
                .map(|(pi_, p)| {
                    let mut lrng = substream(seed, Tag::Lifetime, s, pi_ as u64);
                    let mut deaths = Vec::new();
                    let mut survivors = 0;
                    for (i, &a) in p.ages.iter().enumerate() {
                        let tau = crate::actuarial::sample_lifetime(&exp.mortality, a, &mut lrng);
                        if tau < t_end {
                            deaths.push((tau, i));
                        } else {
                            survivors += 1;
                        }
                    }
                    deaths.sort_by(|a, b| a.0.total_cmp(&b.0));
                    PolicyDeaths { deaths, survivors }
                })
                .collect();

            // death benefits: fund value at each death time from a log-space Brownian
            // bridge between grid nodes, sampled in time order within each interval
            let mut ti_benefit = vec![0.0; portfolios.len()];
            let needs_ti = kinds.iter().any(|k| *k != ContractKind::PureEndowment);
            if needs_ti {
                for (pi_, pd) in deaths.iter().enumerate() {
                    let mut brng = substream(seed, Tag::Bridge, s, pi_ as u64);
                    let mut idx = 0;
                    while idx < pd.deaths.len() {
                        let j = ((pd.deaths[idx].0 / h) as usize).min(n - 1);
                        let t1 = tab.times[j + 1];
                        let rate = 0.5 * (w.quad[j] + w.quad[j + 1]);
                        let (mut ta, mut la) = (tab.times[j], fund[j].ln());
                        let l1 = fund[j + 1].ln();
                        while idx < pd.deaths.len() && (pd.deaths[idx].0 < t1 || j == n - 1) {
                            let tau = pd.deaths[idx].0.max(ta);
                            let span = t1 - ta;
                            let (mean, var) = if span > 0.0 {
                                let f = (tau - ta) / span;
                                (la + f * (l1 - la), rate * (tau - ta) * (t1 - tau) / span)
                            } else {
                                (l1, 0.0)
                            };
                            let z: f64 = StandardNormal.sample(&mut brng);
                            let lx = mean + var.max(0.0).sqrt() * z;
                            let k = exp.contract.caps.floor(tau);
                            let cap = exp.contract.caps.cap(tau);
                            ti_benefit[pi_] += (-r * tau).exp() * lx.exp().max(k).min(cap);
                            ta = tau;
                            la = lx;
                            idx += 1;
                        }
                    }
                }
            }
            let pe_unit = tab.disc_t * fund[n].max(tab.floor[n]).min(tab.cap[n]);

            // alive counts per age group at each rebalance node
            let alive_at = |pi_: usize, gi: usize, t: f64| -> f64 {
                let members = &groups[pi_][gi].1;
                let dead = deaths[pi_].deaths.iter().filter(|(tau, i)| *tau <= t && members.binary_search(i).is_ok()).count();
                (members.len() - dead) as f64
            };

            let mut ratio_cont = vec![vec![vec![0.0; n]; kinds.len()]; portfolios.len()];
            let mut ratio_static = vec![vec![0.0; kinds.len()]; portfolios.len()];
            for &j in &rebalance {
                let alive: Vec<Vec<f64>> = (0..portfolios.len())
                    .map(|pi_| (0..groups[pi_].len()).map(|gi| alive_at(pi_, gi, tab.times[j])).collect())
                    .collect();
                if alive.iter().flatten().all(|a| *a == 0.0) {
                    continue;
                }
                let mut irng = substream(seed, Tag::Inner, s, j as u64);
                inner_phi_diffs(
                    &stepper,
                    &ws,
                    &tab,
                    j,
                    fund[j],
                    cp.at(j),
                    cp.regimes[j],
                    w.quad[j],
                    cfg.m_inner,
                    &mut irng,
                    &mut diff,
                )?;
                for pi_ in 0..portfolios.len() {
                    for (ki, &kind) in kinds.iter().enumerate() {
                        let mut beta = 0.0;
                        for (gi, at) in age_tabs[pi_].iter().enumerate() {
                            if alive[pi_][gi] > 0.0 {
                                beta += alive[pi_][gi] * ratio_from_diffs(kind, &at.surv, &at.gamma, &tab, j, &diff);
                            }
                        }
                        let end = (j + cfg.rebalance_every).min(n);
                        for b in ratio_cont[pi_][ki][j..end].iter_mut() {
                            *b = beta;
                        }
                        if j == 0 {
                            ratio_static[pi_][ki] = beta;
                        }
                    }
                }
            }

            for pi_ in 0..portfolios.len() {
                let pd = &deaths[pi_];
                for (ki, &kind) in kinds.iter().enumerate() {
                    let pe = pd.survivors as f64 * pe_unit;
                    let benefits = match kind {
                        ContractKind::PureEndowment => pe,
                        ContractKind::TermInsurance => ti_benefit[pi_],
                        ContractKind::EndowmentInsurance => tab.mix * ti_benefit[pi_] + pe,
                    };
                    let gains_continuous: f64 = (0..n).map(|j| ratio_cont[pi_][ki][j] * (y[j + 1] - y[j])).sum();
                    let gains_static = ratio_static[pi_][ki] * (y[n] - y[0]);
                    out[pi_][ki].push(ScenarioLedger {
                        benefits,
                        gains_continuous,
                        gains_static,
                        survivors: pd.survivors as f64 / portfolios[pi_].len() as f64,
                    });
                }
            }
        }
        Ok(out)
    });

    let mut ledgers = vec![vec![Vec::with_capacity(m_outer); kinds.len()]; portfolios.len()];
    for part in parts {
        let part = part?;
        for (pi_, per_kind) in part.into_iter().enumerate() {
            for (ki, v) in per_kind.into_iter().enumerate() {
                ledgers[pi_][ki].extend(v);
            }
        }
    }
    Ok(HedgeRun {
        kinds: kinds.to_vec(),
        policies: portfolios.iter().map(|p| p.len()).collect(),
        premiums,
        ledgers,
        r,
        maturity: t_end,
    })
}

/// One hedging cost per outer scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSample {
    pub scenario: usize,
    pub strategy: HedgeStrategy,
    pub cost: f64,
}

/// Backtest of one strategy for the experiment's contract on one portfolio.
pub fn simulate_hedge(
    exp: &Experiment,
    portfolio: &Portfolio,
    strategy: HedgeStrategy,
    cfg: &HedgeConfig,
    m_outer: usize,
    seed: u64,
) -> Result<Vec<CostSample>> {
    if cfg.rebalance_every > exp.n_steps {
        return Err(Error::ConfigMismatch(format!(
            "rebalance interval of {} steps exceeds the {}-step grid",
            cfg.rebalance_every, exp.n_steps
        )));
    }
    let mut c = *cfg;
    if strategy == HedgeStrategy::Static {
        c.rebalance_every = exp.n_steps;
    }
    if strategy == HedgeStrategy::None {
        // no ratios are needed; a single inner path keeps the engine cheap
        c.m_inner = 1;
        c.rebalance_every = exp.n_steps;
    }
    let run = hedge_engine(exp, std::slice::from_ref(portfolio), &[exp.contract.kind], &c, m_outer, seed)?;
    Ok(run
        .costs(0, 0, strategy, cfg.per_policy, cfg.value_at_maturity)
        .into_iter()
        .enumerate()
        .map(|(scenario, cost)| CostSample { scenario, strategy, cost })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostStats {
    pub mean: f64,
    pub std: f64,
    /// (level, value) pairs.
    pub quantiles: Vec<(f64, f64)>,
}

impl CostStats {
    pub fn q(&self, level: f64) -> f64 {
        self.quantiles.iter().find(|(l, _)| (*l - level).abs() < 1e-12).map_or(f64::NAN, |x| x.1)
    }
}

pub const QUANTILE_LEVELS: [f64; 9] = [0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99];

pub fn cost_stats(samples: &[f64]) -> Result<CostStats> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {}", samples.len())));
    }
    let mut w = Welford::new();
    samples.iter().for_each(|&x| w.push(x));
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(CostStats {
        mean: w.mean,
        std: w.std(),
        quantiles: QUANTILE_LEVELS.iter().map(|&q| (q, quantile_sorted(&sorted, q))).collect(),
    })
}
