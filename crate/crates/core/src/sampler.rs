//! Weak simulation: shot sampling and shot-based estimation subroutines.
//!
//! Sampling draws i.i.d. outcomes from the exact joint distribution, which
//! is computed once via [`crate::strong_sim`] and then inverse-CDF sampled.
//! On top of that sit two estimation routines: plain frequency estimation
//! of a final-outcome probability, and a post-selected overlap estimator
//! that emulates running the circuit until a designated adaptive outcome
//! arrives and then projecting the post-selected state onto the other
//! branch's state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockState};
use crate::interferometer::AdaptiveInterferometer;
use crate::strong_sim;

/// Default cap on total circuit runs while waiting for designated adaptive
/// outcomes.
pub const DEFAULT_ATTEMPT_BUDGET: u64 = 1_000_000;

/// Largest outcome-table size the sampler will materialize.
const SAMPLER_STATE_CAP: u128 = 1_000_000;

/// One sampled run: the adaptive outcome on the first `k` modes and the
/// final outcome on the rest. Serializes as `{"p": [...], "s": [...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    #[serde(rename = "p")]
    pub adaptive_outcome: FockState,
    #[serde(rename = "s")]
    pub final_outcome: FockState,
}

/// A frequency estimate with its Hoeffding confidence halfwidth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: f64,
    pub shots: u64,
    pub hoeffding_halfwidth: f64,
}

/// `sqrt(ln(2/delta) / (2 shots))`: the two-sided confidence halfwidth for
/// a mean of `[0, 1]`-bounded samples.
pub fn hoeffding_halfwidth(shots: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * shots as f64)).sqrt()
}

/// Inverse-CDF sampler over a fixed weight table.
pub(crate) struct TableSampler {
    cumulative: Vec<f64>,
}

impl TableSampler {
    pub(crate) fn new(weights: impl Iterator<Item = f64>) -> Self {
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for w in weights {
            acc += w.max(0.0);
            cumulative.push(acc);
        }
        TableSampler { cumulative }
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("nonempty table");
        let u = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1)
    }
}

fn check_capacity(a: &AdaptiveInterferometer) -> Result<()> {
    let size = fock::count_phi(a.modes(), a.photons())?;
    if size > SAMPLER_STATE_CAP {
        return Err(Error::Capacity(format!(
            "outcome space has {size} states, above the sampling cap of {SAMPLER_STATE_CAP}"
        )));
    }
    Ok(())
}

/// Draws `shots` i.i.d. outcomes from the exact joint distribution.
/// Deterministic for a fixed seed.
pub fn sample(a: &AdaptiveInterferometer, shots: u64, seed: u64) -> Result<Vec<ShotRecord>> {
    if shots == 0 {
        return Err(Error::invalid("shots must be positive"));
    }
    check_capacity(a)?;
    let table = strong_sim::joint_distribution(a)?;
    let sampler = TableSampler::new(table.iter().map(|(_, prob)| *prob));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(shots as usize);
    for _ in 0..shots {
        let ((p, s), _) = &table[sampler.draw(&mut rng)];
        out.push(ShotRecord { adaptive_outcome: p.clone(), final_outcome: s.clone() });
    }
    Ok(out)
}

/// Estimates the final-outcome probability `Pr[target]` (marginalized over
/// adaptive outcomes) as a plain frequency over `shots` runs.
pub fn estimate_prob_by_frequency(
    a: &AdaptiveInterferometer,
    target: &FockState,
    shots: u64,
    seed: u64,
    delta: f64,
) -> Result<EstimateReport> {
    if target.modes() != a.modes() - a.adaptive_modes() {
        return Err(Error::invalid(format!(
            "target outcome {target} has {} modes, expected m - k = {}",
            target.modes(),
            a.modes() - a.adaptive_modes()
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must be in (0, 1), got {delta}")));
    }
    let records = sample(a, shots, seed)?;
    let hits = records.iter().filter(|rec| &rec.final_outcome == target).count();
    Ok(EstimateReport {
        value: hits as f64 / shots as f64,
        shots,
        hoeffding_halfwidth: hoeffding_halfwidth(shots, delta),
    })
}

/// Marginal distribution over adaptive outcomes, in canonical order.
fn adaptive_marginal(a: &AdaptiveInterferometer) -> Result<(Vec<FockState>, Vec<f64>)> {
    let table = strong_sim::joint_distribution(a)?;
    let mut outcomes: Vec<FockState> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for ((p, _), prob) in table {
        if outcomes.last() == Some(&p) {
            *weights.last_mut().expect("nonempty") += prob;
        } else {
            outcomes.push(p);
            weights.push(prob);
        }
    }
    Ok((outcomes, weights))
}

/// Shot-based estimate of the squared overlap between the normalized
/// post-selected states for adaptive outcomes `p` and `q` of circuit `a`.
///
/// Emulates the estimation protocol faithfully: the circuit is run until an
/// adaptive outcome matching `p` or `q` arrives (counting each arrival),
/// and on each arrival the projection of the post-selected state onto the
/// other branch's state is sampled as a Bernoulli trial whose success
/// probability is computed exactly. The returned value `c_over / T`
/// estimates the normalized squared overlap; outcomes from different
/// photon sectors return exactly zero without consuming shots.
///
/// Uses [`DEFAULT_ATTEMPT_BUDGET`] total circuit runs before reporting
/// starvation; see [`estimate_overlap_sampled_pair`] for a configurable
/// budget and for the two-circuit form.
pub fn estimate_overlap_sampled(
    a: &AdaptiveInterferometer,
    p: &FockState,
    q: &FockState,
    t_shots: u64,
    seed: u64,
    delta: f64,
) -> Result<EstimateReport> {
    estimate_overlap_sampled_pair(a, p, a, q, t_shots, seed, delta, DEFAULT_ATTEMPT_BUDGET)
}

/// Two-circuit form of [`estimate_overlap_sampled`]: the states live on
/// different circuits `ua`, `va` over the same `(m, k, n)`.
///
/// When the circuits are equal, each run can hit either branch; otherwise
/// the runs alternate between the two circuits and an arrival only counts
/// on its own branch. The Bernoulli success probability of the projection
/// step is the same in both directions, so the estimate converges to the
/// arrival-weighted (hence plain) normalized squared overlap.
#[allow(clippy::too_many_arguments)]
pub fn estimate_overlap_sampled_pair(
    ua: &AdaptiveInterferometer,
    p: &FockState,
    va: &AdaptiveInterferometer,
    q: &FockState,
    t_shots: u64,
    seed: u64,
    delta: f64,
    attempt_budget: u64,
) -> Result<EstimateReport> {
    if t_shots == 0 {
        return Err(Error::invalid("shot target must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must be in (0, 1), got {delta}")));
    }
    ua.validate_outcome(p)?;
    va.validate_outcome(q)?;
    if p.total_photons() != q.total_photons() {
        // Different photon sectors are exactly orthogonal; report the exact
        // value with no shots spent and no sampling uncertainty.
        return Ok(EstimateReport { value: 0.0, shots: 0, hoeffding_halfwidth: 0.0 });
    }
    check_capacity(ua)?;
    check_capacity(va)?;
    // Exact projection success probability, shared by both branch
    // directions. Errors out when either outcome is unreachable.
    let rho = strong_sim::overlap_normalized(ua, p, va, q)?;

    let same_circuit = ua == va;
    let (u_outcomes, u_weights) = adaptive_marginal(ua)?;
    let u_sampler = TableSampler::new(u_weights.iter().copied());
    let (v_outcomes, v_sampler) = if same_circuit {
        (Vec::new(), None)
    } else {
        let (o, w) = adaptive_marginal(va)?;
        let s = TableSampler::new(w.iter().copied());
        (o, Some(s))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arrivals = 0u64;
    let mut successes = 0u64;
    let mut runs = 0u64;
    let mut run_u = true;
    while arrivals < t_shots {
        if runs >= attempt_budget {
            return Err(Error::Starvation { attempts: runs });
        }
        runs += 1;
        let hit = if same_circuit {
            let outcome = &u_outcomes[u_sampler.draw(&mut rng)];
            outcome == p || outcome == q
        } else if run_u {
            let outcome = &u_outcomes[u_sampler.draw(&mut rng)];
            outcome == p
        } else {
            let sampler = v_sampler.as_ref().expect("pair sampler present");
            let outcome = &v_outcomes[sampler.draw(&mut rng)];
            outcome == q
        };
        run_u = !run_u;
        if hit {
            arrivals += 1;
            if rng.gen::<f64>() < rho {
                successes += 1;
            }
        }
    }
    Ok(EstimateReport {
        value: successes as f64 / t_shots as f64,
        shots: t_shots,
        hoeffding_halfwidth: hoeffding_halfwidth(t_shots, delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{random_adaptive, AdaptiveInterferometer, Interferometer};
    use crate::permanent::ComplexMatrix;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn hom() -> AdaptiveInterferometer {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bs = ComplexMatrix::from_rows(vec![
            vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            vec![Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
        ])
        .unwrap();
        AdaptiveInterferometer::non_adaptive(2, Interferometer::new(bs).unwrap()).unwrap()
    }

    #[test]
    fn identity_circuit_reproduces_the_input_split() {
        let a = AdaptiveInterferometer::new(4, 2, 2, ComplexMatrix::identity(4), Vec::new())
            .unwrap();
        for rec in sample(&a, 200, 1).unwrap() {
            assert_eq!(rec.adaptive_outcome, FockState::new(vec![1, 1]));
            assert_eq!(rec.final_outcome, FockState::new(vec![0, 0]));
        }
    }

    #[test]
    fn shots_conserve_photon_number() {
        let a = random_adaptive(4, 2, 2, 17).unwrap();
        for rec in sample(&a, 500, 2).unwrap() {
            assert_eq!(
                rec.adaptive_outcome.total_photons() + rec.final_outcome.total_photons(),
                2
            );
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let a = random_adaptive(3, 1, 2, 19).unwrap();
        assert_eq!(sample(&a, 100, 5).unwrap(), sample(&a, 100, 5).unwrap());
        assert_ne!(sample(&a, 100, 5).unwrap(), sample(&a, 100, 6).unwrap());
    }

    #[test]
    fn hom_frequencies_match_the_exact_distribution() {
        let a = hom();
        let shots = 10_000;
        let records = sample(&a, shots, 99).unwrap();
        let freq = |occ: Vec<usize>| {
            let target = FockState::new(occ);
            records.iter().filter(|rec| rec.final_outcome == target).count() as f64
                / shots as f64
        };
        assert!(freq(vec![1, 1]) <= 0.01);
        assert_abs_diff_eq!(freq(vec![2, 0]), 0.5, epsilon = 0.02);
        assert_abs_diff_eq!(freq(vec![0, 2]), 0.5, epsilon = 0.02);
    }

    #[test]
    fn empirical_distribution_is_close_in_total_variation() {
        let a = random_adaptive(4, 0, 2, 23).unwrap();
        let table = strong_sim::joint_distribution(&a).unwrap();
        let shots = 10_000u64;
        let records = sample(&a, shots, 31).unwrap();
        let mut tv = 0.0;
        for ((p, s), prob) in &table {
            let emp = records
                .iter()
                .filter(|rec| &rec.adaptive_outcome == p && &rec.final_outcome == s)
                .count() as f64
                / shots as f64;
            tv += 0.5 * (emp - prob).abs();
        }
        assert!(tv <= 0.05, "total variation {tv} too large");
    }

    #[test]
    fn frequency_estimate_reports_the_hoeffding_halfwidth() {
        let a = hom();
        let report =
            estimate_prob_by_frequency(&a, &vec![2, 0].into(), 400, 3, 0.05).unwrap();
        assert_eq!(report.shots, 400);
        assert_abs_diff_eq!(
            report.hoeffding_halfwidth,
            ((2.0f64 / 0.05).ln() / 800.0).sqrt(),
            epsilon = 1e-15
        );
        assert!(report.value >= 0.0 && report.value <= 1.0);
        // One shot gives a 0/1 frequency.
        let single = estimate_prob_by_frequency(&a, &vec![2, 0].into(), 1, 4, 0.1).unwrap();
        assert!(single.value == 0.0 || single.value == 1.0);
    }

    #[test]
    fn identical_outcomes_estimate_overlap_one() {
        let a = random_adaptive(4, 1, 2, 41).unwrap();
        let p: FockState = vec![1].into();
        let report = estimate_overlap_sampled(&a, &p, &p, 500, 7, 0.05).unwrap();
        assert_eq!(report.value, 1.0);
        assert_eq!(report.shots, 500);
    }

    #[test]
    fn different_sectors_report_exact_zero_without_shots() {
        let a = random_adaptive(4, 1, 2, 43).unwrap();
        let report =
            estimate_overlap_sampled(&a, &vec![1].into(), &vec![2].into(), 100, 3, 0.05).unwrap();
        assert_eq!(report.value, 0.0);
        assert_eq!(report.shots, 0);
        assert_eq!(report.hoeffding_halfwidth, 0.0);
    }

    #[test]
    fn large_shot_counts_converge_to_the_exact_overlap() {
        // Same circuit, distinct same-sector outcomes: the estimate
        // converges to the arrival-weighted projection success rate, which
        // both branches share.
        let a = random_adaptive(4, 2, 2, 47).unwrap();
        let p: FockState = vec![1, 0].into();
        let q: FockState = vec![0, 1].into();
        let exact = strong_sim::overlap_normalized(&a, &p, &a, &q).unwrap();
        let report = estimate_overlap_sampled(&a, &p, &q, 100_000, 13, 0.05).unwrap();
        assert_abs_diff_eq!(report.value, exact, epsilon = 0.02);
    }

    #[test]
    fn cross_circuit_estimates_match_the_exact_overlap() {
        let ua = random_adaptive(3, 1, 2, 53).unwrap();
        let va = random_adaptive(3, 1, 2, 54).unwrap();
        let p: FockState = vec![1].into();
        let exact = strong_sim::overlap_normalized(&ua, &p, &va, &p).unwrap();
        let report = estimate_overlap_sampled_pair(
            &ua,
            &p,
            &va,
            &p,
            50_000,
            17,
            0.05,
            DEFAULT_ATTEMPT_BUDGET,
        )
        .unwrap();
        assert_abs_diff_eq!(report.value, exact, epsilon = 0.02);
    }

    #[test]
    fn exhausted_budgets_report_starvation() {
        let a = random_adaptive(4, 1, 2, 59).unwrap();
        let p: FockState = vec![1].into();
        let err = estimate_overlap_sampled_pair(&a, &p, &a, &p, 1_000, 3, 0.05, 10);
        assert!(matches!(err, Err(Error::Starvation { attempts: 10 })));
    }

    #[test]
    fn unreachable_outcomes_error_before_sampling() {
        let a = AdaptiveInterferometer::new(4, 1, 2, ComplexMatrix::identity(4), Vec::new())
            .unwrap();
        let err = estimate_overlap_sampled(&a, &vec![2].into(), &vec![2].into(), 100, 1, 0.05);
        assert!(matches!(err, Err(Error::UnreachableOutcome(_))));
    }

    #[test]
    fn shot_records_serialize_as_compact_json_lines() {
        let rec = ShotRecord {
            adaptive_outcome: FockState::new(vec![1]),
            final_outcome: FockState::new(vec![0, 1]),
        };
        assert_eq!(serde_json::to_string(&rec).unwrap(), r#"{"p":[1],"s":[0,1]}"#);
    }

    #[test]
    fn oversized_instances_hit_the_capacity_guard() {
        // Phi(40, 20) is far beyond the cap.
        let a = random_adaptive(40, 1, 20, 61);
        // Building the instance itself is fine; sampling must refuse.
        let a = a.unwrap();
        assert!(matches!(sample(&a, 10, 1), Err(Error::Capacity(_))));
    }
}
