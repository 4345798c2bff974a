//! Randomized parity between the optimized selection solvers and the
//! exhaustive reference solver, plus consistency with the 0-1 encoding the
//! solvers are sworn to implement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spade_core::{
    brute_force_oracle, solve_baseline, solve_cov, solve_no_examples, solve_sub, IlpEncoding,
    Label, Provenance, ResultMatrix, RunToCompletion, SelectionMode, SelectionResult,
    SelectionStatus, SubsumptionMatrix,
};

const ALPHAS: [f64; 5] = [0.0, 0.4, 0.6, 0.8, 1.0];
const TAUS: [f64; 5] = [0.0, 0.1, 0.25, 0.5, 1.0];

fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> (ResultMatrix, Vec<Label>) {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let density = rng.gen_range(0.2..0.95);
    let example_ids = (0..n).map(|i| format!("e{i:02}")).collect();
    let assertion_ids = (0..m).map(|j| format!("f{j:02}")).collect();
    let cells = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| if rng.gen_bool(density) { 1u8 } else { 0 })
                .collect()
        })
        .collect();
    let labels = (0..n)
        .map(|_| if rng.gen_bool(0.5) { Label::Bad } else { Label::Good })
        .collect();
    (
        ResultMatrix::new(example_ids, assertion_ids, cells).unwrap(),
        labels,
    )
}

fn random_subsumption(rng: &mut ChaCha8Rng, ids: &[String]) -> SubsumptionMatrix {
    let m = ids.len();
    let mut k = SubsumptionMatrix::identity(ids.to_vec()).unwrap();
    let edges = rng.gen_range(0..=m * 2);
    for _ in 0..edges {
        let i = rng.gen_range(0..m);
        let j = rng.gen_range(0..m);
        if i != j {
            k.set(i, j, Provenance::Llm);
        }
    }
    k.transitive_closure();
    k
}

fn check_against_encoding(
    matrix: &ResultMatrix,
    labels: &[Label],
    k: Option<&SubsumptionMatrix>,
    alpha: f64,
    tau: f64,
    result: &SelectionResult,
    sub_objective: bool,
) {
    if result.status != SelectionStatus::Optimal {
        return;
    }
    let encoding = IlpEncoding::new(matrix, labels, k, alpha, tau).unwrap();
    let x: Vec<bool> = matrix
        .assertion_ids()
        .iter()
        .map(|id| result.selected.contains(id))
        .collect();
    let point = encoding.evaluate(&x);
    assert!(point.feasible, "solver returned an infeasible selection");
    let objective = if sub_objective {
        point.objective_sub
    } else {
        point.objective_cov
    };
    assert_eq!(objective, result.objective, "objective drifted from encoding");
    let n_bad = labels.iter().filter(|l| l.is_bad()).count();
    let n_good = labels.len() - n_bad;
    let coverage = if n_bad == 0 {
        1.0
    } else {
        point.coverage_count as f64 / n_bad as f64
    };
    let ffr = if n_good == 0 {
        0.0
    } else {
        point.false_failure_count as f64 / n_good as f64
    };
    assert_eq!(coverage, result.coverage);
    assert_eq!(ffr, result.ffr);
    if sub_objective {
        let exposed = point.s.iter().filter(|&&v| v == 1).count();
        assert_eq!(exposed, result.excluded_not_subsumed.len());
    }
}

#[test]
fn cov_solver_matches_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for case in 0..300 {
        let (matrix, labels) = random_instance(&mut rng, 14, 10);
        let alpha = ALPHAS[rng.gen_range(0..ALPHAS.len())];
        let tau = TAUS[rng.gen_range(0..TAUS.len())];
        let oracle =
            brute_force_oracle(&matrix, &labels, None, alpha, tau, SelectionMode::Cov).unwrap();
        let solver = solve_cov(&matrix, &labels, alpha, tau, &RunToCompletion).unwrap();
        assert_eq!(oracle, solver, "case {case} alpha={alpha} tau={tau}");
        check_against_encoding(&matrix, &labels, None, alpha, tau, &solver, false);
    }
}

#[test]
fn sub_solver_matches_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5AB5AB);
    for case in 0..300 {
        let (matrix, labels) = random_instance(&mut rng, 14, 9);
        let k = random_subsumption(&mut rng, matrix.assertion_ids());
        let alpha = ALPHAS[rng.gen_range(0..ALPHAS.len())];
        let tau = TAUS[rng.gen_range(0..TAUS.len())];
        let oracle =
            brute_force_oracle(&matrix, &labels, Some(&k), alpha, tau, SelectionMode::Sub)
                .unwrap();
        let solver = solve_sub(&matrix, &labels, &k, alpha, tau, &RunToCompletion).unwrap();
        assert_eq!(oracle, solver, "case {case} alpha={alpha} tau={tau}");
        check_against_encoding(&matrix, &labels, Some(&k), alpha, tau, &solver, true);
    }
}

#[test]
fn baseline_matches_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBA5E);
    for case in 0..200 {
        let (matrix, labels) = random_instance(&mut rng, 14, 10);
        let tau = TAUS[rng.gen_range(0..TAUS.len())];
        let oracle =
            brute_force_oracle(&matrix, &labels, None, 0.0, tau, SelectionMode::Baseline).unwrap();
        let solver = solve_baseline(&matrix, &labels, tau).unwrap();
        assert_eq!(oracle, solver, "case {case} tau={tau}");
    }
}

#[test]
fn no_examples_construction_matches_independent_reachability() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0E7A);
    for case in 0..200 {
        let m = rng.gen_range(1..=10);
        let ids: Vec<String> = (0..m).map(|j| format!("f{j:02}")).collect();
        let k = random_subsumption(&mut rng, &ids);
        let matrix = ResultMatrix::new(vec![], ids, vec![]).unwrap();
        let oracle = brute_force_oracle(&matrix, &[], Some(&k), 0.0, 1.0, SelectionMode::NoExamples)
            .unwrap();
        let solver = solve_no_examples(&k);
        assert_eq!(oracle, solver, "case {case}");
    }
}
