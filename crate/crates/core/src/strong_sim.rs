//! Strong (probability-level) simulation of adaptive interferometers.
//!
//! Throughout, the input is the fixed state `t = (1^n, 0^{m-n})`. An
//! adaptive run produces an outcome `p` on the `k` measured modes and a
//! final outcome `s` on the remaining `m - k` modes; photon conservation
//! ties the sectors together via `|p| = r` and `|s| = n - r`.
//!
//! The joint probability of `(p, s)` is `|Per(U^p_{(p,s),t})|^2 / (p! s!)`
//! where `U^p` is the composed unitary for outcome `p`. Final-outcome
//! probabilities marginalize over `p`. Post-selected (unnormalized) output
//! states collect the amplitudes for a fixed `p`; their inner products can
//! be computed either by brute force over the final outcome space or by a
//! permanent identity that contracts the unmeasured modes into a product
//! matrix, reducing the work to `3 C(n, r)^2` permanents of size at most
//! `max(r, n - r)`, independent of `k` and `m`.

use itertools::Itertools;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockState};
use crate::interferometer::{compose_adaptive, AdaptiveInterferometer};
use crate::permanent::{
    estimate_permanent_sq_repeated, permanent_repeated, permanent_ryser, PermanentEstimate,
};

/// Which outcome space a distribution table is over.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionContext {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// Adaptive photon sector, or `None` for a table marginalized over all
    /// adaptive outcomes.
    pub r: Option<usize>,
}

/// One row of a probability table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionEntry {
    pub state: FockState,
    pub prob: f64,
}

/// A probability table over final outcomes, in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDistribution {
    pub context: DistributionContext,
    pub entries: Vec<DistributionEntry>,
}

/// The unnormalized post-selected state on the `m - k` unmeasured modes
/// after observing adaptive outcome `p`; its squared norm is the adaptive
/// outcome probability.
#[derive(Clone, Debug)]
pub struct UnnormalizedState {
    adaptive_outcome: FockState,
    modes: usize,
    photons: usize,
    amplitudes: Vec<(FockState, Complex64)>,
}

impl UnnormalizedState {
    pub fn adaptive_outcome(&self) -> &FockState {
        &self.adaptive_outcome
    }

    /// Number of unmeasured modes the state lives on.
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Photon number of the sector, `n - |p|`.
    pub fn photons(&self) -> usize {
        self.photons
    }

    /// Amplitudes over `Phi(modes, photons)` in canonical order.
    pub fn amplitudes(&self) -> &[(FockState, Complex64)] {
        &self.amplitudes
    }

    /// `<psi|psi>`; equals the probability of the adaptive outcome.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|(_, a)| a.norm_sqr()).sum()
    }
}

/// An inner product together with the number of permanent evaluations spent
/// computing it.
#[derive(Clone, Debug)]
pub struct InnerProduct {
    pub value: Complex64,
    pub permanent_evals: u64,
}

/// An exact probability together with the number of permanent evaluations
/// spent computing it.
#[derive(Clone, Debug)]
pub struct CountedProb {
    pub value: f64,
    pub permanent_evals: u64,
}

fn validate_final_outcome(a: &AdaptiveInterferometer, s: &FockState) -> Result<()> {
    let want = a.modes() - a.adaptive_modes();
    if s.modes() != want {
        return Err(Error::invalid(format!(
            "final outcome {s} has {} modes, expected m - k = {want}",
            s.modes()
        )));
    }
    Ok(())
}

/// Joint probability of adaptive outcome `p` and final outcome `s`,
/// unclamped. Zero when photon numbers cannot match.
fn prob_total_raw(a: &AdaptiveInterferometer, p: &FockState, s: &FockState) -> Result<f64> {
    a.validate_outcome(p)?;
    validate_final_outcome(a, s)?;
    if p.total_photons() + s.total_photons() != a.photons() {
        return Ok(0.0);
    }
    let u = compose_adaptive(a, p)?;
    let full = p.concat(s);
    let t = a.input_state();
    let per = permanent_repeated(u.matrix(), &full, &t)?;
    Ok(per.norm_sqr() / (fock::multi_factorial_f64(&full) * fock::multi_factorial_f64(&t)))
}

/// Joint probability `Pr[p, s]` of seeing adaptive outcome `p` and final
/// outcome `s`. Clamped to `[0, 1]` for reporting.
pub fn prob_total(a: &AdaptiveInterferometer, p: &FockState, s: &FockState) -> Result<f64> {
    let raw = prob_total_raw(a, p, s)?;
    debug_assert!((-1e-12..=1.0 + 1e-9).contains(&raw), "probability {raw} far outside [0,1]");
    Ok(raw.clamp(0.0, 1.0))
}

/// Final-outcome probability `Pr[s]`, marginalized over the adaptive
/// outcomes of the matching photon sector. Exact; one permanent per
/// adaptive outcome.
pub fn prob_final_exact(a: &AdaptiveInterferometer, s: &FockState) -> Result<f64> {
    Ok(prob_final_exact_counted(a, s)?.value)
}

/// [`prob_final_exact`] plus the permanent-evaluation count, which equals
/// `|Phi(k, r)|` for the matching sector.
pub fn prob_final_exact_counted(a: &AdaptiveInterferometer, s: &FockState) -> Result<CountedProb> {
    validate_final_outcome(a, s)?;
    let n = a.photons();
    if s.total_photons() > n {
        return Ok(CountedProb { value: 0.0, permanent_evals: 0 });
    }
    let r = n - s.total_photons();
    let mut total = 0.0;
    let mut evals = 0u64;
    for p in fock::enumerate_phi_or_empty(a.adaptive_modes(), r)? {
        total += prob_total_raw(a, &p, s)?;
        evals += 1;
    }
    debug_assert!((-1e-12..=1.0 + 1e-9).contains(&total));
    Ok(CountedProb { value: total.clamp(0.0, 1.0), permanent_evals: evals })
}

/// Estimates `Pr[s]` by estimating each adaptive term's squared permanent
/// with the repeated-row estimator.
///
/// With probability at least `1 - delta` the additive error is at most
/// `epsilon * |Phi(k, r)|` (the reported bound is the tighter per-term sum).
/// Deterministic for a fixed seed.
pub fn prob_final_estimate(
    a: &AdaptiveInterferometer,
    s: &FockState,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<PermanentEstimate> {
    validate_final_outcome(a, s)?;
    let n = a.photons();
    if s.total_photons() > n {
        return Ok(PermanentEstimate {
            value: Complex64::new(0.0, 0.0),
            abs_error_bound: 0.0,
            samples_used: 0,
        });
    }
    let r = n - s.total_photons();
    let terms = fock::enumerate_phi_or_empty(a.adaptive_modes(), r)?;
    let count = terms.len() as f64;
    // Split the failure probability across terms and absorb the factor 3 of
    // the estimate-then-square bound, so the total error stays below
    // epsilon * |Phi(k, r)| with probability at least 1 - delta.
    let eps_inner = epsilon / 3.0;
    let delta_inner = delta / count;
    let t = a.input_state();
    let mut value = 0.0;
    let mut bound = 0.0;
    let mut samples = 0u64;
    for (idx, p) in terms.iter().enumerate() {
        let u = compose_adaptive(a, p)?;
        // Columns of U^p selected by the input state: an m x n contraction.
        let b = u.matrix().repeat_select(&vec![1; a.modes()], t.as_slice())?;
        let full = p.concat(s);
        let est = estimate_permanent_sq_repeated(
            &b,
            &full,
            eps_inner,
            delta_inner,
            crate::util::derive_seed(seed, &[0x70, idx as u64]),
        )?;
        let denom = fock::multi_factorial_f64(&full);
        value += est.value.re / denom;
        bound += est.abs_error_bound / denom;
        samples += est.samples_used;
    }
    Ok(PermanentEstimate {
        value: Complex64::new(value, 0.0),
        abs_error_bound: bound,
        samples_used: samples,
    })
}

/// The unnormalized post-selected state for adaptive outcome `p`:
/// amplitudes `Per(U^p_{(p,s),t}) / sqrt(p! s!)` over the final outcome
/// space of the matching photon sector.
pub fn output_state(a: &AdaptiveInterferometer, p: &FockState) -> Result<UnnormalizedState> {
    a.validate_outcome(p)?;
    let r = p.total_photons();
    let modes = a.modes() - a.adaptive_modes();
    let photons = a.photons() - r;
    let u = compose_adaptive(a, p)?;
    let t = a.input_state();
    let p_fact = fock::multi_factorial_f64(p);
    let mut amplitudes = Vec::new();
    for s in fock::enumerate_phi_or_empty(modes, photons)? {
        let per = permanent_repeated(u.matrix(), &p.concat(&s), &t)?;
        let amp = per / (p_fact * fock::multi_factorial_f64(&s)).sqrt();
        amplitudes.push((s, amp));
    }
    Ok(UnnormalizedState { adaptive_outcome: p.clone(), modes, photons, amplitudes })
}

/// Probability of adaptive outcome `p` (the squared norm of the
/// post-selected state), computed via the structured inner product.
pub fn prob_adaptive(a: &AdaptiveInterferometer, p: &FockState) -> Result<f64> {
    let ip = inner_product_structured(a, p, a, p)?;
    debug_assert!(ip.value.im.abs() < 1e-9, "norm must be real");
    Ok(ip.value.re.clamp(0.0, 1.0))
}

/// `<u|v>` by direct summation over the final outcome space.
///
/// The states must live on the same modes; states from different photon
/// sectors are orthogonal and give exactly zero.
pub fn inner_product_bruteforce(u: &UnnormalizedState, v: &UnnormalizedState) -> Result<Complex64> {
    if u.modes() != v.modes() {
        return Err(Error::invalid(format!(
            "states live on {} and {} modes",
            u.modes(),
            v.modes()
        )));
    }
    if u.photons() != v.photons() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for ((su, au), (sv, av)) in u.amplitudes().iter().zip(v.amplitudes().iter()) {
        debug_assert_eq!(su, sv, "canonical enumeration order must agree");
        acc += au.conj() * av;
    }
    Ok(acc)
}

/// `<psi_p | psi_q>` between post-selected states of two adaptive circuits
/// over the same `(m, k, n)`, via the three-factor permanent identity.
///
/// The sum runs over pairs of binary masks `i, j` on the first `n` rows and
/// columns with `|i| = |j| = r`; each pair costs exactly three permanent
/// evaluations (an `r x r` pair and one `(n-r) x (n-r)` product-matrix
/// permanent), for `3 C(n, r)^2` evaluations in total, independent of `k`.
/// Outcomes from different photon sectors return zero at zero cost.
pub fn inner_product_structured(
    ua: &AdaptiveInterferometer,
    p: &FockState,
    va: &AdaptiveInterferometer,
    q: &FockState,
) -> Result<InnerProduct> {
    if ua.modes() != va.modes()
        || ua.adaptive_modes() != va.adaptive_modes()
        || ua.photons() != va.photons()
    {
        return Err(Error::invalid(
            "inner products require circuits with matching (m, k, n)".to_string(),
        ));
    }
    ua.validate_outcome(p)?;
    va.validate_outcome(q)?;
    if p.total_photons() != q.total_photons() {
        return Ok(InnerProduct { value: Complex64::new(0.0, 0.0), permanent_evals: 0 });
    }
    let m = ua.modes();
    let k = ua.adaptive_modes();
    let n = ua.photons();
    let r = p.total_photons();

    let ud = compose_adaptive(ua, p)?.matrix().dagger();
    let v = compose_adaptive(va, q)?.matrix().clone();

    // Row/column repetition vectors shared by all mask pairs.
    let mut p_cols = vec![0usize; m];
    p_cols[..k].copy_from_slice(p.as_slice());
    let mut q_rows = vec![0usize; m];
    q_rows[..k].copy_from_slice(q.as_slice());
    let mut tail = vec![0usize; m];
    for slot in tail.iter_mut().skip(k) {
        *slot = 1;
    }

    let masks: Vec<Vec<usize>> = (0..n).combinations(r).collect();

    // The rectangular factors depend on one mask each; cache the matrices
    // (not their permanents) per mask.
    let mut u_tilde = Vec::with_capacity(masks.len());
    let mut v_tilde = Vec::with_capacity(masks.len());
    for mask in &masks {
        let mut rows = vec![0usize; m];
        let mut complement = vec![0usize; m];
        for l in 0..n {
            complement[l] = 1;
        }
        for &l in mask {
            rows[l] = 1;
            complement[l] = 0;
        }
        u_tilde.push((rows.clone(), ud.repeat_select(&complement, &tail)?));
        v_tilde.push(v.repeat_select(&tail, &complement)?);
    }

    let mut acc = Complex64::new(0.0, 0.0);
    let mut evals = 0u64;
    for (ii, _) in masks.iter().enumerate() {
        let (ref i_rows, ref u_rect) = u_tilde[ii];
        let a_mat = ud.repeat_select(i_rows, &p_cols)?;
        for (jj, j_mask) in masks.iter().enumerate() {
            let mut j_cols = vec![0usize; m];
            for &l in j_mask {
                j_cols[l] = 1;
            }
            let b_mat = v.repeat_select(&q_rows, &j_cols)?;
            let c_mat = u_rect.mul(&v_tilde[jj])?;
            let per_a = permanent_ryser(&a_mat)?;
            let per_b = permanent_ryser(&b_mat)?;
            let per_c = permanent_ryser(&c_mat)?;
            evals += 3;
            acc += per_a * per_b * per_c;
        }
    }
    let norm = (fock::multi_factorial_f64(p) * fock::multi_factorial_f64(q)).sqrt();
    Ok(InnerProduct { value: acc / norm, permanent_evals: evals })
}

/// Squared overlap of the *normalized* post-selected states,
/// `|<psi_p|psi_q>|^2 / (<psi_p|psi_p> <psi_q|psi_q>)`, in `[0, 1]`.
///
/// Returns an error when either outcome has zero probability.
pub fn overlap_normalized(
    ua: &AdaptiveInterferometer,
    p: &FockState,
    va: &AdaptiveInterferometer,
    q: &FockState,
) -> Result<f64> {
    if p.total_photons() != q.total_photons() {
        ua.validate_outcome(p)?;
        va.validate_outcome(q)?;
        return Ok(0.0);
    }
    let ip = inner_product_structured(ua, p, va, q)?;
    let np = inner_product_structured(ua, p, ua, p)?.value.re;
    let nq = inner_product_structured(va, q, va, q)?.value.re;
    const REACHABLE_TOL: f64 = 1e-12;
    if np <= REACHABLE_TOL {
        return Err(Error::UnreachableOutcome(format!(
            "adaptive outcome {p} has probability {np:.3e}"
        )));
    }
    if nq <= REACHABLE_TOL {
        return Err(Error::UnreachableOutcome(format!(
            "adaptive outcome {q} has probability {nq:.3e}"
        )));
    }
    let raw = ip.value.norm_sqr() / (np * nq);
    debug_assert!((-1e-9..=1.0 + 1e-6).contains(&raw), "normalized overlap {raw} outside [0,1]");
    Ok(raw.clamp(0.0, 1.0))
}

/// Joint table over all outcomes `(p, s)` with nonvanishing photon
/// bookkeeping, in canonical order: sectors `r = 0..=n`, then `p` and `s`
/// reverse-lexicographically. The probabilities sum to 1.
pub fn joint_distribution(
    a: &AdaptiveInterferometer,
) -> Result<Vec<((FockState, FockState), f64)>> {
    let n = a.photons();
    let k = a.adaptive_modes();
    let modes_out = a.modes() - k;
    let t = a.input_state();
    let mut table = Vec::new();
    for r in 0..=n {
        for p in fock::enumerate_phi_or_empty(k, r)? {
            let u = compose_adaptive(a, &p)?;
            let p_fact = fock::multi_factorial_f64(&p);
            for s in fock::enumerate_phi_or_empty(modes_out, n - r)? {
                let per = permanent_repeated(u.matrix(), &p.concat(&s), &t)?;
                let prob = per.norm_sqr() / (p_fact * fock::multi_factorial_f64(&s));
                table.push(((p.clone(), s), prob));
            }
        }
    }
    Ok(table)
}

/// Distribution over final outcomes, marginalized over adaptive outcomes:
/// sectors in increasing `r` (photon-rich final outcomes first), reverse-lex
/// within each sector.
pub fn final_distribution(a: &AdaptiveInterferometer) -> Result<OutputDistribution> {
    let n = a.photons();
    let modes_out = a.modes() - a.adaptive_modes();
    let mut entries = Vec::new();
    for r in 0..=n {
        for s in fock::enumerate_phi_or_empty(modes_out, n - r)? {
            let prob = prob_final_exact(a, &s)?;
            entries.push(DistributionEntry { state: s, prob });
        }
    }
    Ok(OutputDistribution {
        context: DistributionContext {
            m: a.modes(),
            n,
            k: a.adaptive_modes(),
            r: None,
        },
        entries,
    })
}
