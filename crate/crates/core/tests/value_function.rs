#![allow(clippy::needless_range_loop)]

use greenlink::carbon::{CarbonModel, Ctmc};
use greenlink::market::{reference_market, validate_market};
use greenlink::strategy::{StrategySpec, WeightSolver};
use greenlink::value_fn::*;

fn two_state() -> Ctmc {
    Ctmc {
        states: vec![vec![3000.0, 1000.0, 500.0, 200.0], vec![500.0, 2500.0, 3000.0, 100.0]],
        q: vec![-0.4, 0.4, 0.9, -0.9],
        pi0: vec![1.0, 0.0],
    }
}

fn solver(delta: f64) -> (WeightSolver, f64) {
    let m = validate_market(&reference_market()).unwrap();
    (WeightSolver::new(&m, &StrategySpec::constant(delta, 0.0025, 4)).unwrap(), m.r)
}

#[test]
fn ode_matches_matrix_exponential() {
    for delta in [1.0, 2.0, 0.5] {
        let (ws, r) = solver(delta);
        let ch = two_state();
        let sol = solve_ctmc_odes(&ch, &ws, r, 5.0, 10, Coupling::Full).unwrap();
        let exact = chain_phi_expm(&ch, &ws, r, 5.0).unwrap();
        for k in 0..2 {
            let rel = (sol.phi[0][k] - exact[k]).abs() / (1.0 + exact[k].abs());
            assert!(rel < 1e-10, "delta {delta} state {k}: {} vs {}", sol.phi[0][k], exact[k]);
        }
    }
}

#[test]
fn feynman_kac_agrees_with_ode() {
    let (ws, r) = solver(2.0);
    let ch = two_state();
    let sol = solve_ctmc_odes(&ch, &ws, r, 3.0, 6, Coupling::Full).unwrap();
    let model = CarbonModel::Ctmc(ch.clone());
    for k in 0..2 {
        let (est, se) = feynman_kac_phi(&model, 0.0, &ch.states[k], k, &ws, r, 3.0, 300, 20_000, 17).unwrap();
        assert!((est - sol.phi[0][k]).abs() < 3.0 * se + 1e-6, "state {k}: {est} ± {se} vs {}", sol.phi[0][k]);
    }
}

#[test]
fn rk4_error_shrinks_at_fourth_order() {
    let (ws, r) = solver(3.0);
    let ch = two_state();
    let exact = chain_phi_expm(&ch, &ws, r, 10.0).unwrap();
    let err = |steps| {
        let s = rk4_chain(&ch, &ws, r, 0.0, 10.0, steps, Coupling::Full).unwrap();
        (s.phi[0][0] - exact[0]).abs()
    };
    let ratio = err(20) / err(40);
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn off_diagonal_coupling_differs() {
    let (ws, r) = solver(2.0);
    let ch = two_state();
    let full = solve_ctmc_odes(&ch, &ws, r, 5.0, 5, Coupling::Full).unwrap();
    let off = solve_ctmc_odes(&ch, &ws, r, 5.0, 5, Coupling::OffDiagonal).unwrap();
    assert!((full.phi[0][0] - off.phi[0][0]).abs() > 1e-3);
}

#[test]
fn log_utility_value_is_additive() {
    let v = value_function_eval(2.0, 0.3, 1.0).unwrap();
    assert!((v - (2f64.ln() + 0.3)).abs() < 1e-15);
    let p = value_function_eval(4.0, 0.7, 0.5).unwrap();
    assert!((p - 2.0 * 2.0 * 0.7).abs() < 1e-14);
    assert!(value_function_eval(0.0, 1.0, 2.0).is_err());
}
