//! TOML run configuration and its conversion into library types.

use greenlink::actuarial::{MSign, MortalityModel};
use greenlink::carbon::{AssetDynamics, CarbonModel, Ctmc};
use greenlink::fund::Measure;
use greenlink::hedging::{AgeSpec, HedgeConfig, HedgeStrategy};
use greenlink::market::{validate_market, MarketModel, MarketParams};
use greenlink::pricing::{Caps, Contract, ContractKind, Experiment, StandardFund};
use greenlink::strategy::{Penalty, StrategySpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: Option<MarketSection>,
    pub carbon: Option<CarbonSection>,
    pub strategy: Option<StrategySection>,
    pub mortality: Option<MortalitySection>,
    pub contract: Option<ContractSection>,
    pub simulation: Option<SimulationSection>,
    pub hedging: Option<HedgingSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CarbonKind {
    Cir,
    Ou,
    ExpOu,
    Ctmc,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarbonSection {
    pub kind: CarbonKind,
    pub c0: Option<Vec<f64>>,
    pub kappa: Option<Vec<f64>>,
    pub mean: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub states: Option<Vec<Vec<f64>>>,
    pub q: Option<Vec<Vec<f64>>>,
    pub pi0: Option<Vec<f64>>,
}

/// A penalty given either as one number for every asset or as one number per asset.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerAsset {
    One(f64),
    Each(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub delta: f64,
    pub alpha: PerAsset,
    /// Optional change points shared by all assets; `alpha_after[k]` holds the per-asset
    /// penalties that apply after `alpha_breaks[k]`.
    pub alpha_breaks: Option<Vec<f64>>,
    pub alpha_after: Option<Vec<PerAsset>>,
    pub xi_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SignName {
    #[default]
    Minus,
    PaperLiteral,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MortalitySection {
    pub xi: f64,
    pub b: f64,
    pub m: f64,
    #[serde(default)]
    pub sign: SignName,
    pub age: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
pub enum KindName {
    PE,
    TI,
    EI,
}

impl From<KindName> for ContractKind {
    fn from(k: KindName) -> Self {
        match k {
            KindName::PE => ContractKind::PureEndowment,
            KindName::TI => ContractKind::TermInsurance,
            KindName::EI => ContractKind::EndowmentInsurance,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub kind: KindName,
    pub maturity: f64,
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default = "one")]
    pub cap_base: f64,
    pub floor_rate: Option<f64>,
    pub cap_rate: Option<f64>,
    #[serde(default = "one")]
    pub mix: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FundMode {
    #[default]
    Path,
    Marginal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub seed: u64,
    pub paths: usize,
    /// Steps per year; the grid has round(steps_per_year·T) steps.
    #[serde(default = "five")]
    pub steps_per_year: f64,
    #[serde(default)]
    pub standard_fund: FundMode,
    pub maturities: Option<Vec<f64>>,
    pub contracts: Option<Vec<KindName>>,
    /// Reporting intervals for value-function grids.
    pub report_points: Option<usize>,
}

fn five() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureName {
    Pricing,
    Physical,
}

impl From<MeasureName> for Measure {
    fn from(m: MeasureName) -> Self {
        match m {
            MeasureName::Pricing => Measure::Pricing,
            MeasureName::Physical => Measure::Physical,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Continuous,
    Static,
    None,
}

impl From<StrategyName> for HedgeStrategy {
    fn from(s: StrategyName) -> Self {
        match s {
            StrategyName::Continuous => HedgeStrategy::Continuous,
            StrategyName::Static => HedgeStrategy::Static,
            StrategyName::None => HedgeStrategy::None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgingSection {
    pub strategies: Vec<StrategyName>,
    pub n_policies: usize,
    /// Either one age or an inclusive `[lo, hi]` integer range.
    pub ages: AgesField,
    pub scenarios: usize,
    #[serde(default = "m_inner")]
    pub m_inner: usize,
    #[serde(default = "premium_replicates")]
    pub premium_replicates: usize,
    #[serde(default = "one_usize")]
    pub rebalance_every: usize,
    pub measure: Option<MeasureName>,
    #[serde(default = "yes")]
    pub per_policy: bool,
    #[serde(default)]
    pub value_at_maturity: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AgesField {
    Single(f64),
    Range([i64; 2]),
}

fn m_inner() -> usize {
    256
}
fn premium_replicates() -> usize {
    1_000_000
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub measure: Option<MeasureName>,
    pub m_sign: Option<SignName>,
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("cannot parse configuration: {e}")))
}

fn need<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section.as_ref().ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

fn lib_err(section: &str, e: greenlink::Error) -> CliError {
    CliError::from_lib(e, section)
}

impl RunConfig {
    pub fn market(&self) -> Result<MarketModel, CliError> {
        let m = need(&self.market, "market")?;
        validate_market(&MarketParams { mu: m.mu.clone(), sigma: m.sigma.clone(), rho: m.rho.clone(), r: m.r })
            .map_err(|e| lib_err("market", e))
    }

    pub fn carbon(&self) -> Result<CarbonModel, CliError> {
        let c = need(&self.carbon, "carbon")?;
        let field = |v: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>, CliError> {
            v.clone().ok_or_else(|| CliError::Config(format!("[carbon] needs `{name}` for kind {:?}", c.kind)))
        };
        let model = match c.kind {
            CarbonKind::Ctmc => {
                let states = c.states.clone().ok_or_else(|| CliError::Config("[carbon] ctmc needs `states`".into()))?;
                let q = c.q.clone().ok_or_else(|| CliError::Config("[carbon] ctmc needs `q`".into()))?;
                let k = states.len();
                let pi0 = c.pi0.clone().unwrap_or_else(|| {
                    let mut p = vec![0.0; k];
                    if k > 0 {
                        p[0] = 1.0;
                    }
                    p
                });
                if q.iter().any(|row| row.len() != k) || q.len() != k {
                    return Err(CliError::Config(format!("[carbon] q must be {k}x{k}")));
                }
                CarbonModel::Ctmc(Ctmc { states, q: q.concat(), pi0 })
            }
            kind => {
                let (kappa, mean, lambda, c0) =
                    (field(&c.kappa, "kappa")?, field(&c.mean, "mean")?, field(&c.lambda, "lambda")?, field(&c.c0, "c0")?);
                let d = c0.len();
                if kappa.len() != d || mean.len() != d || lambda.len() != d {
                    return Err(CliError::Config("[carbon] kappa, mean, lambda and c0 must have equal lengths".into()));
                }
                let assets = (0..d)
                    .map(|i| {
                        let (kappa, mean, lambda) = (kappa[i], mean[i], lambda[i]);
                        match kind {
                            CarbonKind::Cir => AssetDynamics::Cir { kappa, mean, lambda },
                            CarbonKind::Ou => AssetDynamics::Ou { kappa, mean, lambda },
                            _ => AssetDynamics::ExpOu { kappa, mean, lambda },
                        }
                    })
                    .collect();
                CarbonModel::Diffusion { assets, c0 }
            }
        };
        model.validate().map_err(|e| lib_err("carbon", e))?;
        Ok(model)
    }

    pub fn strategy(&self, d: usize) -> Result<StrategySpec, CliError> {
        let s = need(&self.strategy, "strategy")?;
        let expand = |p: &PerAsset| -> Result<Vec<f64>, CliError> {
            match p {
                PerAsset::One(v) => Ok(vec![*v; d]),
                PerAsset::Each(v) if v.len() == d => Ok(v.clone()),
                PerAsset::Each(v) => Err(CliError::Config(format!("[strategy] alpha has {} entries for {d} assets", v.len()))),
            }
        };
        let first = expand(&s.alpha)?;
        let alpha = match (&s.alpha_breaks, &s.alpha_after) {
            (None, None) => first.into_iter().map(Penalty::Constant).collect(),
            (Some(breaks), Some(after)) if breaks.len() == after.len() => {
                let later: Vec<Vec<f64>> = after.iter().map(expand).collect::<Result<_, _>>()?;
                (0..d)
                    .map(|i| Penalty::Piecewise {
                        breaks: breaks.clone(),
                        values: std::iter::once(first[i]).chain(later.iter().map(|v| v[i])).collect(),
                    })
                    .collect()
            }
            _ => return Err(CliError::Config("[strategy] alpha_breaks and alpha_after must be given together with equal lengths".into())),
        };
        Ok(StrategySpec { delta: s.delta, alpha, xi_bound: s.xi_bound })
    }

    pub fn mortality(&self, ov: &Overrides) -> Result<(MortalityModel, f64), CliError> {
        let m = need(&self.mortality, "mortality")?;
        let sign = match ov.m_sign.unwrap_or(m.sign) {
            SignName::Minus => MSign::Minus,
            SignName::PaperLiteral => MSign::PaperLiteral,
        };
        let model = MortalityModel { xi: m.xi, b: m.b, m: m.m, sign };
        model.validate().map_err(|e| lib_err("mortality", e))?;
        Ok((model, m.age))
    }

    pub fn simulation(&self) -> Result<&SimulationSection, CliError> {
        need(&self.simulation, "simulation")
    }

    pub fn seed(&self, ov: &Overrides) -> Result<u64, CliError> {
        Ok(ov.seed.unwrap_or(self.simulation()?.seed))
    }

    /// Full pricing experiment for one contract kind and maturity.
    pub fn experiment(&self, kind: ContractKind, maturity: f64, ov: &Overrides) -> Result<Experiment, CliError> {
        let market = self.market()?;
        let carbon = self.carbon()?;
        let strategy = self.strategy(market.d)?;
        let (mortality, age) = self.mortality(ov)?;
        let c = need(&self.contract, "contract")?;
        let sim = self.simulation()?;
        let caps = Caps {
            base: c.cap_base,
            floor_rate: c.floor_rate.unwrap_or(market.r),
            cap_rate: c.cap_rate.unwrap_or(10.0 * market.r),
        };
        let n_steps = ((sim.steps_per_year * maturity).round() as usize).max(1);
        let exp = Experiment {
            carbon,
            strategy,
            mortality,
            age,
            contract: Contract { kind, caps, maturity, mix: c.mix },
            n_steps,
            x0: c.x0,
            standard_fund: match sim.standard_fund {
                FundMode::Path => StandardFund::Path,
                FundMode::Marginal => StandardFund::Marginal,
            },
            market,
        };
        exp.validate().map_err(|e| lib_err("contract", e))?;
        Ok(exp)
    }

    pub fn contract_kind(&self) -> Result<(ContractKind, f64), CliError> {
        let c = need(&self.contract, "contract")?;
        Ok((c.kind.into(), c.maturity))
    }

    pub fn hedging(&self, ov: &Overrides) -> Result<(&HedgingSection, HedgeConfig, AgeSpec), CliError> {
        let h = need(&self.hedging, "hedging")?;
        if h.strategies.is_empty() || h.n_policies == 0 || h.scenarios < 2 {
            return Err(CliError::Config("[hedging] needs strategies, n_policies >= 1 and scenarios >= 2".into()));
        }
        let measure = ov.measure.or(h.measure).unwrap_or(MeasureName::Physical);
        let cfg = HedgeConfig {
            measure: measure.into(),
            m_inner: h.m_inner,
            premium_replicates: h.premium_replicates,
            rebalance_every: h.rebalance_every,
            per_policy: h.per_policy,
            value_at_maturity: h.value_at_maturity,
        };
        let ages = match h.ages {
            AgesField::Single(a) => AgeSpec::Single(a),
            AgesField::Range([lo, hi]) => AgeSpec::Range { lo, hi },
        };
        Ok((h, cfg, ages))
    }
}
