#![allow(clippy::needless_range_loop)]

mod config;

use clap::{Parser, Subcommand, ValueEnum};
use config::{MeasureName, Overrides, RunConfig, SignName};
use greenlink::carbon::{CarbonModel, SimGrid};
use greenlink::fund::{fund_path_from_normals, Measure, PathSampler};
use greenlink::hedging::{build_policy_portfolio, cost_stats, hedge_engine, HedgeStrategy};
use greenlink::pricing::{mc_price, ContractKind, PriceReport};
use greenlink::rng::{substream, Tag};
use greenlink::strategy::{cash_weight, WeightSolver};
use greenlink::value_fn::{feynman_kac_phi, solve_ctmc_odes, Coupling};
use draws::normals;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    /// Library errors from bad inputs are configuration errors; the rest are numerical.
    pub fn from_lib(e: greenlink::Error, section: &str) -> Self {
        use greenlink::Error::*;
        match e {
            SingularSigma | SingularSystem | StepTooCoarse { .. } | DegenerateVariance(_) => {
                CliError::Numerical(format!("[{section}] {e}"))
            }
            _ => CliError::Config(format!("[{section}] {e}")),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeasureArg {
    Pricing,
    Physical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SignArg {
    Minus,
    PaperLiteral,
}

#[derive(Debug, Parser)]
#[command(name = "greenlink", version, about = "Carbon-penalized fund pricing and hedging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides [simulation].seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Measure generating fund scenarios (hedge, simulate).
    #[arg(long, global = true, value_enum)]
    measure: Option<MeasureArg>,
    /// Sign of the modal age in the mortality exponent.
    #[arg(long = "m-sign", global = true, value_enum)]
    m_sign: Option<SignArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price the configured contract.
    Price,
    /// Standard vs conditional estimator variances over contracts and maturities.
    VarReport,
    /// Backtest hedging strategies on a policy portfolio.
    Hedge,
    /// Value-function coefficient on a time grid.
    ValueFunction,
    /// Dump carbon, weight and fund paths.
    Simulate,
}

struct Provenance {
    hash: String,
    seed: u64,
}

mod draws {
    use greenlink::rng::{substream, Tag};
    use rand_distr::{Distribution, StandardNormal};

    pub fn normals(seed: u64, p: u64, n: usize) -> Vec<f64> {
        let mut rng = substream(seed, Tag::Fund, p, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

fn write_csv(dir: &Path, name: &str, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
    let io = |e: std::io::Error| CliError::Config(format!("cannot write {}: {e}", dir.join(name).display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let path = dir.join(name);
    let mut buf = format!(
        "# greenlink {} config_sha256={} seed={}\n",
        env!("CARGO_PKG_VERSION"),
        prov.hash,
        prov.seed
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
    }
    std::fs::write(&path, buf).map_err(io)?;
    Ok(path)
}

fn num(x: f64) -> String {
    format!("{x}")
}

const PRICE_HEADER: [&str; 13] = [
    "contract", "maturity", "steps", "paths", "price_vr", "se_vr", "price_st", "se_st", "var_st", "var_vr", "reduction_pct", "delta",
    "se_delta",
];

fn price_row(kind: ContractKind, t: f64, steps: usize, r: &PriceReport) -> Vec<String> {
    vec![
        kind.label().to_string(),
        num(t),
        steps.to_string(),
        r.m.to_string(),
        num(r.price_vr),
        num(r.se_vr),
        num(r.price_st),
        num(r.se_st),
        num(r.var_st),
        num(r.var_vr),
        num(100.0 * r.reduction),
        num(r.delta),
        num(r.se_delta),
    ]
}

fn lib(section: &'static str) -> impl Fn(greenlink::Error) -> CliError {
    move |e| CliError::from_lib(e, section)
}

fn cmd_price(cfg: &RunConfig, ov: &Overrides, prov: &Provenance, out: &Path) -> Result<(), CliError> {
    let (kind, t) = cfg.contract_kind()?;
    let exp = cfg.experiment(kind, t, ov)?;
    let m = cfg.simulation()?.paths;
    let r = mc_price(&exp, m, prov.seed).map_err(lib("simulation"))?;
    let path = write_csv(out, "price.csv", prov, &PRICE_HEADER, &[price_row(kind, t, exp.n_steps, &r)])?;
    println!(
        "{} T={t}: price {:.6} (se {:.2e}), delta {:.6}, variance reduction {:.4}% -> {}",
        kind.label(),
        r.price_vr,
        r.se_vr,
        r.delta,
        100.0 * r.reduction,
        path.display()
    );
    Ok(())
}

fn cmd_var_report(cfg: &RunConfig, ov: &Overrides, prov: &Provenance, out: &Path) -> Result<(), CliError> {
    let sim = cfg.simulation()?;
    let kinds: Vec<ContractKind> = match &sim.contracts {
        Some(v) => v.iter().map(|&k| k.into()).collect(),
        None => ContractKind::all().to_vec(),
    };
    let maturities = sim.maturities.clone().unwrap_or_else(|| vec![5.0, 10.0, 20.0, 30.0]);
    let mut rows = Vec::new();
    for &kind in &kinds {
        for &t in &maturities {
            let exp = cfg.experiment(kind, t, ov)?;
            let r = mc_price(&exp, sim.paths, prov.seed).map_err(lib("simulation"))?;
            println!("{} T={t}: var_st {:.6e} var_vr {:.6e} reduction {:.4}%", kind.label(), r.var_st, r.var_vr, 100.0 * r.reduction);
            rows.push(price_row(kind, t, exp.n_steps, &r));
        }
    }
    let path = write_csv(out, "var_report.csv", prov, &PRICE_HEADER, &rows)?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn cmd_hedge(cfg: &RunConfig, ov: &Overrides, prov: &Provenance, out: &Path) -> Result<(), CliError> {
    let (kind, t) = cfg.contract_kind()?;
    let exp = cfg.experiment(kind, t, ov)?;
    let (h, hc, ages) = cfg.hedging(ov)?;
    let portfolio = build_policy_portfolio(h.n_policies, &ages, prov.seed).map_err(lib("hedging"))?;
    let run = hedge_engine(&exp, &[portfolio], &[kind], &hc, h.scenarios, prov.seed).map_err(lib("hedging"))?;
    let mut summary = Vec::new();
    let mut samples = Vec::new();
    for &s in &h.strategies {
        let s: HedgeStrategy = s.into();
        let costs = run.costs(0, 0, s, hc.per_policy, hc.value_at_maturity);
        let st = cost_stats(&costs).map_err(lib("hedging"))?;
        println!("{} {:<10} mean {:>10.4} std {:>9.4} q90 {:>9.4}", kind.label(), s.label(), st.mean, st.std, st.q(0.9));
        summary.push(vec![
            kind.label().to_string(),
            s.label().to_string(),
            h.n_policies.to_string(),
            h.scenarios.to_string(),
            num(st.mean),
            num(st.std),
            num(st.q(0.05)),
            num(st.q(0.5)),
            num(st.q(0.9)),
            num(st.q(0.95)),
        ]);
        samples.extend(costs.iter().enumerate().map(|(i, c)| vec![i.to_string(), s.label().to_string(), num(*c)]));
    }
    let header = ["contract", "strategy", "n_policies", "scenarios", "mean", "std", "q05", "q50", "q90", "q95"];
    let p1 = write_csv(out, "hedge_summary.csv", prov, &header, &summary)?;
    let p2 = write_csv(out, "hedge_costs.csv", prov, &["scenario_id", "strategy", "cost"], &samples)?;
    println!("-> {} and {}", p1.display(), p2.display());
    Ok(())
}

fn horizon(cfg: &RunConfig) -> Result<f64, CliError> {
    cfg.contract_kind()
        .map(|(_, t)| t)
        .map_err(|_| CliError::Config("missing [contract] section (its maturity sets the horizon)".into()))
}

fn cmd_value_function(cfg: &RunConfig, prov: &Provenance, out: &Path) -> Result<(), CliError> {
    let market = cfg.market()?;
    let carbon = cfg.carbon()?;
    let spec = cfg.strategy(market.d)?;
    let ws = WeightSolver::new(&market, &spec).map_err(lib("strategy"))?;
    let t_end = horizon(cfg)?;
    let sim = cfg.simulation()?;
    let points = sim.report_points.unwrap_or(10).max(1);
    let (header, rows): (Vec<String>, Vec<Vec<String>>) = match &carbon {
        CarbonModel::Ctmc(ch) => {
            let sol = solve_ctmc_odes(ch, &ws, market.r, t_end, points, Coupling::Full).map_err(lib("carbon"))?;
            let header = std::iter::once("t".to_string()).chain((0..ch.k()).map(|k| format!("phi_{k}"))).collect();
            let rows = sol
                .times
                .iter()
                .zip(&sol.phi)
                .map(|(t, p)| std::iter::once(num(*t)).chain(p.iter().map(|x| num(*x))).collect())
                .collect();
            (header, rows)
        }
        CarbonModel::Diffusion { c0, .. } => {
            let steps = ((sim.steps_per_year * t_end).round() as usize).max(points);
            let mut rows = Vec::new();
            for j in 0..=points {
                let t0 = t_end * j as f64 / points as f64;
                let (est, se) = if j == points {
                    (greenlink::value_fn::terminal_phi(ws.delta), 0.0)
                } else {
                    let n = ((steps * (points - j)) / points).max(1);
                    feynman_kac_phi(&carbon, t0, c0, 0, &ws, market.r, t_end, n, sim.paths, prov.seed).map_err(lib("carbon"))?
                };
                rows.push(vec![num(t0), num(est), num(se)]);
            }
            (vec!["t".into(), "phi".into(), "se".into()], rows)
        }
    };
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let path = write_csv(out, "value_function.csv", prov, &header, &rows)?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, ov: &Overrides, prov: &Provenance, out: &Path) -> Result<(), CliError> {
    let market = cfg.market()?;
    let carbon = cfg.carbon()?;
    let spec = cfg.strategy(market.d)?;
    let ws = WeightSolver::new(&market, &spec).map_err(lib("strategy"))?;
    let t_end = horizon(cfg)?;
    let x0 = cfg.contract.as_ref().map_or(1.0, |c| c.x0);
    let sim = cfg.simulation()?;
    let grid = SimGrid::new(t_end, ((sim.steps_per_year * t_end).round() as usize).max(1)).map_err(lib("simulation"))?;
    let measure: Measure = ov.measure.unwrap_or(MeasureName::Pricing).into();
    let d = market.d;
    let sampler = PathSampler::new(&carbon, &ws, grid);
    let (mut w, mut cp, mut scratch) = sampler.buffers();
    let mut fund = vec![0.0; grid.n + 1];
    let mut header = vec!["path".to_string(), "step".into(), "t".into(), "regime".into()];
    header.extend((1..=d).map(|i| format!("c_{i}")));
    header.extend((1..=d).map(|i| format!("pi_{i}")));
    header.extend(["cash".into(), "fund".into()]);
    let mut rows = Vec::new();
    let mut top = vec![0usize; d];
    for p in 0..sim.paths {
        sampler
            .sample(&mut substream(prov.seed, Tag::Carbon, p as u64, 0), &mut w, &mut cp, &mut scratch)
            .map_err(lib("simulation"))?;
        fund_path_from_normals(&w, x0, market.r, measure, &normals(prov.seed, p as u64, grid.n), &mut fund);
        for j in 0..=grid.n {
            let pi = w.weights(j);
            let best = (0..d).max_by(|&a, &b| pi[a].total_cmp(&pi[b])).unwrap_or(0);
            top[best] += 1;
            let mut row = vec![p.to_string(), j.to_string(), num(grid.time(j)), cp.regimes[j].to_string()];
            row.extend(cp.at(j).iter().map(|x| num(*x)));
            row.extend(pi.iter().map(|x| num(*x)));
            row.push(num(cash_weight(pi)));
            row.push(num(fund[j]));
            rows.push(row);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let path = write_csv(out, "paths.csv", prov, &header, &rows)?;
    let total: usize = top.iter().sum();
    let shares: Vec<String> = top.iter().enumerate().map(|(i, c)| format!("asset {}: {:.3}", i + 1, *c as f64 / total as f64)).collect();
    println!("share of dates with the largest weight: {}", shares.join(", "));
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set thread count: {e}")))?;
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = config::parse(&text)?;
    let ov = Overrides {
        seed: cli.seed,
        measure: cli.measure.map(|m| match m {
            MeasureArg::Pricing => MeasureName::Pricing,
            MeasureArg::Physical => MeasureName::Physical,
        }),
        m_sign: cli.m_sign.map(|s| match s {
            SignArg::Minus => SignName::Minus,
            SignArg::PaperLiteral => SignName::PaperLiteral,
        }),
    };
    let prov = Provenance { hash: format!("{:x}", Sha256::digest(text.as_bytes())), seed: cfg.seed(&ov)? };
    match cli.command {
        Command::Price => cmd_price(&cfg, &ov, &prov, &cli.out),
        Command::VarReport => cmd_var_report(&cfg, &ov, &prov, &cli.out),
        Command::Hedge => cmd_hedge(&cfg, &ov, &prov, &cli.out),
        Command::ValueFunction => cmd_value_function(&cfg, &prov, &cli.out),
        Command::Simulate => cmd_simulate(&cfg, &ov, &prov, &cli.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("greenlink: {e}");
            ExitCode::from(e.code())
        }
    }
}
