//! Property tests for the combinatorial layer, the permanent kernels, and
//! the sampler's statistical guarantees.

use alosim::fock::{count_phi, enumerate_phi};
use alosim::interferometer::{random_adaptive, random_unitary};
use alosim::permanent::{permanent_naive, permanent_ryser};
use alosim::sampler::{estimate_prob_by_frequency, hoeffding_halfwidth, sample};
use alosim::strong_sim::final_distribution;
use alosim::{ComplexMatrix, FockState};
use num_complex::Complex64;
use proptest::prelude::*;

fn matrix_strategy(max_side: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max_side)
        .prop_flat_map(|n| {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
                .prop_map(move |parts| {
                    let data = parts.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
                    ComplexMatrix::new(n, n, data).unwrap()
                })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_is_complete_sorted_and_counted(m in 1usize..=7, n in 0usize..=5) {
        let states = enumerate_phi(m, n).unwrap();
        prop_assert_eq!(states.len() as u128, count_phi(m, n).unwrap());
        for s in &states {
            prop_assert_eq!(s.modes(), m);
            prop_assert_eq!(s.total_photons(), n);
        }
        for pair in states.windows(2) {
            prop_assert!(pair[0].as_slice() > pair[1].as_slice(), "not reverse-lexicographic");
        }
    }

    #[test]
    fn concat_and_split_are_inverse(
        left in proptest::collection::vec(0usize..4, 0..5),
        right in proptest::collection::vec(0usize..4, 1..5),
    ) {
        let s = FockState::new(left.clone());
        let t = FockState::new(right.clone());
        let joined = s.concat(&t);
        let (back_s, back_t) = joined.split_at(left.len());
        prop_assert_eq!(back_s, s);
        prop_assert_eq!(back_t, t);
    }

    #[test]
    fn fock_states_round_trip_through_json(occ in proptest::collection::vec(0usize..6, 1..6)) {
        let s = FockState::new(occ);
        let json = serde_json::to_string(&s).unwrap();
        prop_assert_eq!(serde_json::from_str::<FockState>(&json).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ryser_agrees_with_the_naive_expansion(a in matrix_strategy(6)) {
        let fast = permanent_ryser(&a).unwrap();
        let slow = permanent_naive(&a).unwrap();
        let scale = slow.norm().max(1.0);
        prop_assert!((fast - slow).norm() <= 1e-9 * scale);
    }

    #[test]
    fn permanents_are_linear_in_a_row(a in matrix_strategy(5), scale in -3.0f64..3.0) {
        let base = permanent_ryser(&a).unwrap();
        let mut scaled = a.clone();
        for j in 0..scaled.cols() {
            let v = scaled.get(0, j);
            scaled.set(0, j, v * scale);
        }
        let expected = base * scale;
        let rescaled = permanent_ryser(&scaled).unwrap();
        prop_assert!((rescaled - expected).norm() <= 1e-9 * expected.norm().max(1.0));
    }

    #[test]
    fn a_zero_row_kills_the_permanent(a in matrix_strategy(5)) {
        let mut zeroed = a.clone();
        for j in 0..zeroed.cols() {
            zeroed.set(0, j, Complex64::new(0.0, 0.0));
        }
        prop_assert_eq!(permanent_ryser(&zeroed).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn matrices_round_trip_through_json(a in matrix_strategy(4)) {
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<ComplexMatrix>(&json).unwrap(), a);
    }

    #[test]
    fn sampled_unitaries_are_unitary(m in 1usize..=8, seed in any::<u64>()) {
        let u = random_unitary(m, seed).unwrap();
        let gram = u.dagger().matrix().mul(u.matrix()).unwrap();
        prop_assert!(gram.deviation_from_identity() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shots_conserve_photons_and_follow_the_seed(
        m in 2usize..=4,
        k in 0usize..=1,
        n in 1usize..=2,
        seed in any::<u64>(),
    ) {
        prop_assume!(n <= m && k < m);
        let a = random_adaptive(m, k, n, seed).unwrap();
        let first = sample(&a, 64, seed ^ 0x5EED).unwrap();
        let second = sample(&a, 64, seed ^ 0x5EED).unwrap();
        prop_assert_eq!(&first, &second);
        for record in &first {
            prop_assert_eq!(
                record.adaptive_outcome.total_photons() + record.final_outcome.total_photons(),
                n
            );
            prop_assert_eq!(record.adaptive_outcome.modes(), k);
            prop_assert_eq!(record.final_outcome.modes(), m - k);
        }
    }
}

/// Frequency estimates cover the exact probability at the advertised
/// Hoeffding rate (with a small slack for finite repetitions).
#[test]
fn hoeffding_intervals_cover_the_exact_probability() {
    let a = random_adaptive(4, 1, 2, 42).unwrap();
    let table = final_distribution(&a).unwrap();
    let target = table
        .entries
        .iter()
        .max_by(|x, y| x.prob.total_cmp(&y.prob))
        .expect("nonempty table");
    let delta = 0.2;
    let shots = 400;
    let halfwidth = hoeffding_halfwidth(shots, delta);
    let mut covered = 0;
    let reps = 200;
    for rep in 0..reps {
        let report =
            estimate_prob_by_frequency(&a, &target.state, shots, 10_000 + rep, delta).unwrap();
        assert_eq!(report.hoeffding_halfwidth, halfwidth);
        if (report.value - target.prob).abs() <= halfwidth {
            covered += 1;
        }
    }
    let rate = covered as f64 / reps as f64;
    assert!(rate >= 1.0 - delta - 0.03, "coverage {rate} below the Hoeffding floor");
}
