//! Randomized checks of the metric algebra the selection search relies on:
//! coverage and false-failure rate are monotone under adding assertions, and
//! the false-failure rate of a union is bounded by its parts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spade_core::{set_coverage, set_ffr, single_ffr, Label, ResultMatrix};

fn random_instance(rng: &mut ChaCha8Rng) -> (ResultMatrix, Vec<Label>) {
    let n = rng.gen_range(1..=12);
    let m = rng.gen_range(1..=8);
    let example_ids = (0..n).map(|i| format!("e{i}")).collect();
    let assertion_ids = (0..m).map(|j| format!("f{j}")).collect();
    let cells = (0..n)
        .map(|_| (0..m).map(|_| rng.gen_range(0..=1u8)).collect())
        .collect();
    let labels = (0..n)
        .map(|_| if rng.gen_bool(0.5) { Label::Bad } else { Label::Good })
        .collect();
    (
        ResultMatrix::new(example_ids, assertion_ids, cells).unwrap(),
        labels,
    )
}

fn random_subset(rng: &mut ChaCha8Rng, m: usize) -> Vec<usize> {
    (0..m).filter(|_| rng.gen_bool(0.4)).collect()
}

#[test]
fn coverage_and_ffr_are_monotone_and_union_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3E7B1C);
    let mut union_lower_tight = 0usize;
    let mut union_upper_tight = 0usize;
    for case in 0..1000 {
        let (matrix, labels) = random_instance(&mut rng);
        let m = matrix.n_assertions();

        // Monotonicity: adding assertions can only flag more examples.
        let small = random_subset(&mut rng, m);
        let mut large = small.clone();
        for j in 0..m {
            if !large.contains(&j) && rng.gen_bool(0.5) {
                large.push(j);
            }
        }
        let cov_small = set_coverage(&matrix, &labels, &small);
        let cov_large = set_coverage(&matrix, &labels, &large);
        let ffr_small = set_ffr(&matrix, &labels, &small);
        let ffr_large = set_ffr(&matrix, &labels, &large);
        if labels.iter().any(|l| l.is_bad()) {
            assert!(cov_small <= cov_large + 1e-12, "case {case}");
        }
        assert!(ffr_small <= ffr_large + 1e-12, "case {case}");

        // Union bound: for any set S and single assertion f,
        //   max(ffr(S), ffr(f)) <= ffr(S + f) <= ffr(S) + ffr(f).
        let s = random_subset(&mut rng, m);
        let f = rng.gen_range(0..m);
        let mut s_with_f = s.clone();
        if !s_with_f.contains(&f) {
            s_with_f.push(f);
        }
        let ffr_s = set_ffr(&matrix, &labels, &s);
        let ffr_f = single_ffr(&matrix, &labels, f);
        let ffr_union = set_ffr(&matrix, &labels, &s_with_f);
        let lower = ffr_s.max(ffr_f);
        assert!(lower <= ffr_union + 1e-12, "case {case}");
        assert!(ffr_union <= ffr_s + ffr_f + 1e-12, "case {case}");
        if (ffr_union - lower).abs() < 1e-12 {
            union_lower_tight += 1;
        }
        if (ffr_union - (ffr_s + ffr_f)).abs() < 1e-12 {
            union_upper_tight += 1;
        }
    }
    // Both bounds should actually bind somewhere, or the test is vacuous.
    assert!(union_lower_tight > 0);
    assert!(union_upper_tight > 0);
}

#[test]
fn vacuous_metrics_follow_the_documented_defaults() {
    let matrix = ResultMatrix::new(
        vec!["e0".into()],
        vec!["f0".into()],
        vec![vec![0]],
    )
    .unwrap();
    // No bad examples: coverage of anything is 1.0.
    assert_eq!(set_coverage(&matrix, &[Label::Good], &[0]), 1.0);
    // No good examples: false-failure rate of anything is 0.0.
    assert_eq!(set_ffr(&matrix, &[Label::Bad], &[0]), 0.0);
}
