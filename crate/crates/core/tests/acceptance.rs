//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 even when a criterion fails so the workspace test run reflects build health;
//! set ACCEPTANCE_STRICT=1 to turn any FAIL into a non-zero exit.

use greenlink::actuarial::{sample_lifetime, MortalityModel};
use greenlink::carbon::{simulate_carbon_path, AssetDynamics, CarbonModel, Ctmc, SimGrid};
use greenlink::fund::{conditional_discounted_mean, discretize_weights, simulate_fund_terminal, Measure, PathSampler};
use greenlink::hedging::{build_policy_portfolio, cost_stats, hedge_engine, AgeSpec, HedgeConfig, HedgeStrategy};
use greenlink::market::{reference_market, validate_market, MarketModel, MarketParams};
use greenlink::pricing::{mc_price, replicate, ContractKind, Experiment, PriceReport, StandardFund};
use greenlink::rng::{substream, Tag};
use greenlink::stats::{par_chunks, Welford};
use greenlink::strategy::{optimal_weights, two_stock_closed_form, StrategySpec, TwoStock, WeightSolver};
use greenlink::value_fn::{chain_phi_expm, feynman_kac_phi, rk4_chain, solve_ctmc_odes, Coupling};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::time::Instant;

const MATURITIES: [f64; 4] = [5.0, 10.0, 20.0, 30.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_market<R: Rng>(rng: &mut R, d: usize) -> (MarketParams, MarketModel) {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let s = &a * a.transpose() + DMatrix::identity(d, d) * 0.3;
    let rho: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt()).collect()).collect();
    let p = MarketParams {
        mu: (0..d).map(|_| rng.random_range(0.0..0.2)).collect(),
        sigma: (0..d).map(|_| rng.random_range(0.1..0.5)).collect(),
        rho,
        r: rng.random_range(0.0..0.06),
    };
    let m = validate_market(&p).expect("random market is valid");
    (p, m)
}

fn merton_reduction() -> Outcome {
    let mut rng = substream(101, Tag::Misc, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=6);
        let (raw, m) = random_market(&mut rng, d);
        let delta = rng.random_range(0.5..5.0);
        let c: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..5000.0)).collect();
        let pi = optimal_weights(0.0, &c, &m, &StrategySpec::constant(delta, 0.0, d)).unwrap();
        let cov = DMatrix::from_fn(d, d, |i, j| raw.sigma[i] * raw.rho[i][j] * raw.sigma[j]);
        let ex = DVector::from_vec(raw.mu.iter().map(|x| x - raw.r).collect());
        let merton = cov.lu().solve(&ex).unwrap() / delta;
        for i in 0..d {
            worst = worst.max((pi[i] - merton[i]).abs() / merton[i].abs().max(1.0));
        }
    }
    outcome(worst <= 1e-10, format!("max scaled error {worst:.2e} over 1000 markets"))
}

fn two_stock_oracle() -> Outcome {
    let mut rng = substream(102, Tag::Misc, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p = TwoStock {
            mu1: rng.random_range(0.0..0.2),
            mu2: rng.random_range(0.0..0.2),
            sigma1: rng.random_range(0.1..0.5),
            sigma2: rng.random_range(0.1..0.5),
            rho: rng.random_range(-0.9..0.9),
            r: rng.random_range(0.0..0.05),
            delta: rng.random_range(0.5..5.0),
            alpha1: rng.random_range(0.0..0.01),
        };
        let c1 = rng.random_range(0.0..5000.0);
        let m = validate_market(&MarketParams {
            mu: vec![p.mu1, p.mu2],
            sigma: vec![p.sigma1, p.sigma2],
            rho: vec![vec![1.0, p.rho], vec![p.rho, 1.0]],
            r: p.r,
        })
        .unwrap();
        let spec = StrategySpec {
            delta: p.delta,
            alpha: vec![greenlink::strategy::Penalty::Constant(p.alpha1), greenlink::strategy::Penalty::Constant(0.0)],
            xi_bound: None,
        };
        let pi = optimal_weights(0.0, &[c1, 0.0], &m, &spec).unwrap();
        let (a, b) = two_stock_closed_form(c1, &p);
        worst = worst.max((pi[0] - a).abs().max((pi[1] - b).abs()) / a.abs().max(b.abs()).max(1.0));
    }
    // with ρ = 0 the emitting stock is sold down monotonically and the clean one is untouched
    let base = TwoStock { mu1: 0.1, mu2: 0.08, sigma1: 0.3, sigma2: 0.2, rho: 0.0, r: 0.02, delta: 2.0, alpha1: 0.001 };
    let mut monotone = true;
    let (mut prev1, p2) = two_stock_closed_form(0.0, &base);
    for i in 1..=200 {
        let (a, b) = two_stock_closed_form(i as f64 * 25.0, &base);
        monotone &= a < prev1 && (b - p2).abs() < 1e-15;
        prev1 = a;
    }
    outcome(worst <= 1e-12 && monotone, format!("max scaled error {worst:.2e} over 1e4 points, rho=0 divestment monotone: {monotone}"))
}

fn cir_moments_check() -> Outcome {
    let (kappa, level, lambda, c0, t) = (0.05f64, 2500.0f64, 3.0f64, 5000.0f64, 20.0f64);
    let model = CarbonModel::Diffusion { assets: vec![AssetDynamics::Cir { kappa, mean: level, lambda }], c0: vec![c0] };
    let grid = SimGrid::new(t, 100).unwrap();
    let m = 100_000;
    let parts = par_chunks(m, |range| {
        let mut v = Vec::with_capacity(range.len());
        for p in range {
            let path = simulate_carbon_path(&model, &grid, &mut substream(103, Tag::Carbon, p as u64, 0));
            v.push(path.at(grid.n)[0]);
        }
        v
    });
    let xs: Vec<f64> = parts.into_iter().flatten().collect();
    let mut w = Welford::new();
    xs.iter().for_each(|&x| w.push(x));
    let mut sq = Welford::new();
    xs.iter().for_each(|&x| sq.push((x - w.mean).powi(2)));
    let e = (-kappa * t).exp();
    let mean = c0 * e + level * (1.0 - e);
    let var = c0 * lambda * lambda / kappa * (e - e * e) + level * lambda * lambda / (2.0 * kappa) * (1.0 - e).powi(2);
    let zm = (w.mean - mean) / w.se();
    let zv = (w.var() - var) / sq.se();
    outcome(
        zm.abs() < 3.0 && zv.abs() < 3.0,
        format!("mean {:.3} vs {mean:.3} (z {zm:+.2}), var {:.1} vs {var:.1} (z {zv:+.2})", w.mean, w.var()),
    )
}

fn martingale_check() -> Outcome {
    let exp = Experiment::reference(ContractKind::PureEndowment, 20.0);
    let ws = exp.validate().unwrap();
    let grid = exp.grid().unwrap();
    let r = exp.market.r;
    let mut worst: f64 = 0.0;
    for p in 0..1000 {
        let cp = simulate_carbon_path(&exp.carbon, &grid, &mut substream(104, Tag::Carbon, p, 0));
        let w = discretize_weights(&cp, &ws, &grid).unwrap();
        worst = worst.max((conditional_discounted_mean(&w, 1.0, r) - 1.0).abs());
    }
    let m = 100_000;
    let sampler = PathSampler::new(&exp.carbon, &ws, grid);
    let parts = par_chunks(m, |range| {
        let mut acc = Welford::new();
        let mut b = sampler.buffers();
        for p in range {
            sampler.sample(&mut substream(105, Tag::Carbon, p as u64, 0), &mut b.0, &mut b.1, &mut b.2).unwrap();
            let x = simulate_fund_terminal(&b.0, 1.0, r, &mut substream(105, Tag::Fund, p as u64, 0)).unwrap();
            acc.push((-r * grid.t_end).exp() * x);
        }
        acc
    });
    let mut w = Welford::new();
    parts.iter().for_each(|p| w.merge(p));
    let z = (w.mean - 1.0) / w.se();
    outcome(worst <= 1e-13 && z.abs() < 3.0, format!("max per-path error {worst:.1e}, MC mean {:.5} (z {z:+.2})", w.mean))
}

fn price_grid(mode: StandardFund, kinds: &[ContractKind], m: usize) -> Vec<(ContractKind, f64, PriceReport)> {
    let mut out = Vec::new();
    for &kind in kinds {
        for &t in &MATURITIES {
            let mut exp = Experiment::reference(kind, t);
            exp.standard_fund = mode;
            out.push((kind, t, mc_price(&exp, m, 42).unwrap()));
        }
    }
    out
}

fn mean_equality(cells: &[(ContractKind, f64, PriceReport)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut names = Vec::new();
    for (k, t, r) in cells {
        let z = (r.price_vr - r.price_st) / (r.se_st.powi(2) + r.se_vr.powi(2)).sqrt();
        worst = worst.max(z.abs());
        names.push(format!("{}{}:{z:+.2}", k.label(), *t as u32));
    }
    outcome(worst < 3.0, format!("max |z| {worst:.2} [{}]", names.join(" ")))
}

fn reduction_check(pe: &[(ContractKind, f64, PriceReport)], marginal: &[(ContractKind, f64, PriceReport)], path: &[(ContractKind, f64, PriceReport)]) -> Outcome {
    let find = |cells: &[(ContractKind, f64, PriceReport)], k: ContractKind, t: f64| {
        cells.iter().find(|c| c.0 == k && c.1 == t).map(|c| 100.0 * c.2.reduction).unwrap()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for &t in &MATURITIES {
        let v = find(pe, ContractKind::PureEndowment, t);
        ok &= v >= 99.90;
        parts.push(format!("PE{}={v:.4}%", t as u32));
    }
    for &t in &MATURITIES {
        let v = find(marginal, ContractKind::TermInsurance, t);
        parts.push(format!("TI{}={v:.4}%", t as u32));
    }
    for &t in &MATURITIES {
        let v = find(marginal, ContractKind::EndowmentInsurance, t);
        parts.push(format!("EI{}={v:.4}%", t as u32));
    }
    ok &= find(marginal, ContractKind::TermInsurance, 30.0) >= 94.0;
    ok &= find(marginal, ContractKind::TermInsurance, 20.0) >= 96.0;
    ok &= find(marginal, ContractKind::EndowmentInsurance, 30.0) >= 98.0;
    let path_info: Vec<String> = path
        .iter()
        .filter(|c| c.0 != ContractKind::PureEndowment)
        .map(|c| format!("{}{}={:.2}%", c.0.label(), c.1 as u32, 100.0 * c.2.reduction))
        .collect();
    outcome(ok, format!("{} | path-mode standard estimator: {}", parts.join(" "), path_info.join(" ")))
}

/// Central differences with common random numbers against the pathwise delta,
/// compared through the combined standard error of the two means.
fn delta_check() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [ContractKind::PureEndowment, ContractKind::TermInsurance] {
        let base = Experiment::reference(kind, 20.0);
        let bump = 1e-3 * base.x0;
        let mut up = base.clone();
        up.x0 += bump;
        let mut dn = base.clone();
        dn.x0 -= bump;
        let ws = base.validate().unwrap();
        let tab = base.tables().unwrap();
        let sampler = PathSampler::new(&base.carbon, &ws, tab.grid);
        let m = 100_000;
        let acc = par_chunks(m, |range| {
            let mut a = [Welford::new(); 2];
            let mut bufs = sampler.buffers();
            let (mut f, mut n) = (Vec::new(), Vec::new());
            for p in range {
                let p = p as u64;
                let s0 = replicate(&base, &sampler, &tab, 107, p, &mut bufs, &mut f, &mut n).unwrap().0;
                let su = replicate(&up, &sampler, &tab, 107, p, &mut bufs, &mut f, &mut n).unwrap().0;
                let sd = replicate(&dn, &sampler, &tab, 107, p, &mut bufs, &mut f, &mut n).unwrap().0;
                a[0].push(s0.delta);
                a[1].push((su.vr - sd.vr) / (2.0 * bump));
            }
            a
        });
        let [de, fd] = greenlink::stats::merge_all(&acc);
        let se = (de.se().powi(2) + fd.se().powi(2)).sqrt();
        let z = (fd.mean - de.mean) / se;
        ok &= z.abs() < 3.0;
        parts.push(format!("{}: delta {:.6} fd {:.6} (z {z:+.3})", kind.label(), de.mean, fd.mean));
    }
    outcome(ok, parts.join(", "))
}

fn hedging_checks() -> (Outcome, Outcome) {
    let exp = Experiment::reference(ContractKind::PureEndowment, 20.0);
    let many = build_policy_portfolio(1000, &AgeSpec::Single(60.0), 1).unwrap();
    let one = build_policy_portfolio(1, &AgeSpec::Single(60.0), 1).unwrap();
    let cfg = HedgeConfig { measure: Measure::Physical, value_at_maturity: true, ..HedgeConfig::default() };
    let start = Instant::now();
    let run = hedge_engine(&exp, &[many, one], &ContractKind::all(), &cfg, 2000, 108).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let stats = |p: usize, k: usize, s: HedgeStrategy| cost_stats(&run.costs(p, k, s, true, true)).unwrap();
    let mut lines = Vec::new();
    let mut ordering = true;
    for (k, kind) in run.kinds.iter().enumerate() {
        let [n, s, c] = [HedgeStrategy::None, HedgeStrategy::Static, HedgeStrategy::Continuous].map(|st| stats(0, k, st));
        ordering &= c.std < s.std && s.std < n.std;
        lines.push(format!(
            "{} none {:.3}/{:.3} static {:.3}/{:.3} continuous {:.4}/{:.4}",
            kind.label(),
            n.mean,
            n.std,
            s.mean,
            s.std,
            c.mean,
            c.std
        ));
    }
    let pe = |s| stats(0, 0, s);
    let (n, s, c) = (pe(HedgeStrategy::None), pe(HedgeStrategy::Static), pe(HedgeStrategy::Continuous));
    let checks = [
        ("none mean", (5.3..=6.4).contains(&n.mean)),
        ("none std", (2.4..=3.3).contains(&n.std)),
        ("static mean", (1.7..=2.7).contains(&s.mean)),
        ("continuous mean", c.mean.abs() < 0.05),
        ("continuous std", c.std < 0.25),
        ("std ordering", ordering),
        ("runtime", secs < 1200.0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let h8 = outcome(
        failed.is_empty(),
        format!(
            "{} | PE none q90 {:.3} | {:.0} s{}",
            lines.join("; "),
            n.q(0.9),
            secs,
            if failed.is_empty() { String::new() } else { format!(" | out of range: {}", failed.join(", ")) }
        ),
    );
    let single = stats(1, 0, HedgeStrategy::Continuous);
    let ratio = single.std / c.std;
    let h9 = outcome(ratio > 10.0, format!("single-policy std {:.4} vs 1000-policy {:.4}, ratio {ratio:.1}", single.std, c.std));
    (h8, h9)
}

fn random_chain<R: Rng>(rng: &mut R) -> Ctmc {
    let k = rng.random_range(2..=4);
    let states: Vec<Vec<f64>> = (0..k).map(|_| (0..4).map(|_| rng.random_range(0.0..5000.0)).collect()).collect();
    let mut q = vec![0.0; k * k];
    for a in 0..k {
        let mut out = 0.0;
        for l in 0..k {
            if l != a {
                q[a * k + l] = rng.random_range(0.1..1.5);
                out += q[a * k + l];
            }
        }
        q[a * k + a] = -out;
    }
    let mut pi0 = vec![0.0; k];
    pi0[0] = 1.0;
    Ctmc { states, q, pi0 }
}

fn value_function_check() -> Outcome {
    let m = validate_market(&reference_market()).unwrap();
    let mut rng = substream(110, Tag::Misc, 0, 0);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let ch = random_chain(&mut rng);
        let delta = [0.5, 1.0, 2.0, 3.0][i % 4];
        let ws = WeightSolver::new(&m, &StrategySpec::constant(delta, 0.0025, 4)).unwrap();
        let t_end = 2.0;
        let ode = solve_ctmc_odes(&ch, &ws, m.r, t_end, 4, Coupling::Full).unwrap();
        let model = CarbonModel::Ctmc(ch.clone());
        let (est, se) = feynman_kac_phi(&model, 0.0, &ch.states[0], 0, &ws, m.r, t_end, 200, 20_000, 111 + i as u64).unwrap();
        worst = worst.max((est - ode.phi[0][0]).abs() / se);
    }
    let ch = Ctmc {
        states: vec![vec![3000.0, 1000.0, 500.0, 200.0], vec![500.0, 2500.0, 3000.0, 100.0]],
        q: vec![-0.4, 0.4, 0.9, -0.9],
        pi0: vec![1.0, 0.0],
    };
    let ws = WeightSolver::new(&m, &StrategySpec::constant(3.0, 0.0025, 4)).unwrap();
    let exact = chain_phi_expm(&ch, &ws, m.r, 10.0).unwrap();
    let err = |n| (rk4_chain(&ch, &ws, m.r, 0.0, 10.0, n, Coupling::Full).unwrap().phi[0][0] - exact[0]).abs();
    let ratio = err(20) / err(40);
    outcome(
        worst < 3.0 && (8.0..=32.0).contains(&ratio),
        format!("max |ODE - MC|/SE {worst:.2} over 10 chains, halving ratio {ratio:.2}"),
    )
}

fn actuarial_check() -> Outcome {
    let mort = MortalityModel::default();
    let mut quad_err: f64 = 0.0;
    for age in [40.0, 60.0, 80.0] {
        for t in [1.0, 5.0, 10.0, 20.0, 30.0] {
            let hz = quadrature::integrate(|s| mort.intensity(age, s), 0.0, t, 1e-14).integral;
            quad_err = quad_err.max((mort.survival(age, t) - (-hz).exp()).abs());
        }
    }
    let m = 1_000_000;
    let lifetimes: Vec<f64> = par_chunks(m, |range| {
        let mut rng = substream(112, Tag::Lifetime, range.start as u64, 0);
        range.map(|_| sample_lifetime(&mort, 60.0, &mut rng)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let mut worst_z: f64 = 0.0;
    for t in [1.0, 5.0, 10.0, 20.0, 30.0, 40.0] {
        let s = mort.survival(60.0, t);
        let phat = lifetimes.iter().filter(|&&x| x > t).count() as f64 / m as f64;
        worst_z = worst_z.max((phat - s).abs() / (s * (1.0 - s) / m as f64).sqrt());
    }
    let g = mort.intensity(60.0, 0.0);
    outcome(
        quad_err <= 1e-10 && worst_z < 3.0 && (g - 0.0200).abs() <= 0.0005,
        format!("quadrature error {quad_err:.1e}, lifetime max |z| {worst_z:.2}, gamma(60,0) {g:.6}"),
    )
}

fn main() {
    // libtest passes flags like --nocapture through; nothing to parse here
    let total = Instant::now();
    let mut passed = 0;
    let mut count = 0;
    let mut report = |id: usize, name: &str, start: Instant, limit: Option<f64>, mut o: Outcome| {
        count += 1;
        let secs = start.elapsed().as_secs_f64();
        if let Some(l) = limit.filter(|l| secs > *l) {
            o.pass = false;
            o.detail.push_str(&format!(" | over the {l:.0} s budget"));
        }
        if o.pass {
            passed += 1;
        }
        println!(
            "{} {id:>2} {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            secs
        );
    };

    let s = Instant::now();
    report(1, "merton-reduction", s, Some(1.0), merton_reduction());
    let s = Instant::now();
    report(2, "two-stock-closed-form", s, None, two_stock_oracle());
    let s = Instant::now();
    report(3, "cir-moments", s, Some(30.0), cir_moments_check());
    let s = Instant::now();
    report(4, "fund-martingale", s, None, martingale_check());

    let s = Instant::now();
    let path_cells = price_grid(StandardFund::Path, &ContractKind::all(), 100_000);
    report(5, "estimator-mean-equality", s, Some(300.0), mean_equality(&path_cells));
    let s = Instant::now();
    let marginal = price_grid(StandardFund::Marginal, &[ContractKind::TermInsurance, ContractKind::EndowmentInsurance], 100_000);
    report(6, "variance-reduction", s, Some(600.0), reduction_check(&path_cells, &marginal, &path_cells));

    let s = Instant::now();
    report(7, "delta-finite-difference", s, None, delta_check());

    let s = Instant::now();
    let (h8, h9) = hedging_checks();
    report(8, "hedging-cost-distribution", s, None, h8);
    let s = Instant::now();
    report(9, "diversification", s, None, h9);

    let s = Instant::now();
    report(10, "value-function-cross-check", s, None, value_function_check());
    let s = Instant::now();
    report(11, "actuarial", s, None, actuarial_check());

    println!("acceptance: {passed}/{count} criteria passed in {:.0} s", total.elapsed().as_secs_f64());
    if passed < count && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
