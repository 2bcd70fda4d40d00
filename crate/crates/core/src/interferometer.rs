//! Validated unitaries, Haar-random drawing, variational meshes and
//! adaptive interferometers.
//!
//! An [`AdaptiveInterferometer`] models a circuit over `m` modes in which the
//! first `k` modes are measured one at a time: after mode `j` is read out,
//! a unitary on the remaining `m - j` modes is chosen as a function of the
//! outcomes observed so far. Stage unitaries are stored as a table keyed by
//! the outcome prefix `(p_1, ..., p_j)`; prefixes absent from the table fall
//! back to the identity, so a plain non-adaptive interferometer is just a
//! base unitary with an empty table.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockState};
use crate::permanent::{permanent_repeated, ComplexMatrix};

/// Entrywise tolerance for the unitarity check `U^dagger U == I`.
pub const UNITARITY_TOL: f64 = 1e-10;

/// A validated `m x m` unitary acting on `m` optical modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct Interferometer {
    matrix: ComplexMatrix,
}

impl TryFrom<ComplexMatrix> for Interferometer {
    type Error = String;

    fn try_from(m: ComplexMatrix) -> std::result::Result<Self, String> {
        Interferometer::new(m).map_err(|e| e.to_string())
    }
}

impl From<Interferometer> for ComplexMatrix {
    fn from(u: Interferometer) -> ComplexMatrix {
        u.matrix
    }
}

impl Interferometer {
    /// Wraps a matrix after checking squareness and unitarity to
    /// [`UNITARITY_TOL`].
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid(format!(
                "interferometer matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let deviation = matrix.dagger().mul(&matrix)?.deviation_from_identity();
        if deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary { deviation, tolerance: UNITARITY_TOL });
        }
        Ok(Interferometer { matrix })
    }

    /// The identity interferometer on `m` modes.
    pub fn identity(m: usize) -> Self {
        Interferometer { matrix: ComplexMatrix::identity(m) }
    }

    pub fn modes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// The inverse (conjugate-transpose) interferometer.
    pub fn dagger(&self) -> Interferometer {
        Interferometer { matrix: self.matrix.dagger() }
    }
}

/// Transition amplitude `<s| U |t>` between occupation states.
///
/// Zero whenever the photon numbers differ; otherwise
/// `Per(U_{s,t}) / sqrt(s! t!)` where `U_{s,t}` repeats row `i` `s_i` times
/// and column `j` `t_j` times.
pub fn amplitude(u: &Interferometer, s: &FockState, t: &FockState) -> Result<Complex64> {
    let m = u.modes();
    if s.modes() != m || t.modes() != m {
        return Err(Error::invalid(format!(
            "states over {} and {} modes do not match a {m}-mode interferometer",
            s.modes(),
            t.modes()
        )));
    }
    if s.total_photons() != t.total_photons() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let per = permanent_repeated(u.matrix(), s, t)?;
    let norm = (fock::multi_factorial_f64(s) * fock::multi_factorial_f64(t)).sqrt();
    Ok(per / norm)
}

/// Haar-random `m x m` unitary: QR of a complex Gaussian matrix with the
/// phase convention `R_ii / |R_ii|` folded into `Q`. Deterministic for a
/// fixed seed.
pub fn random_unitary(m: usize, seed: u64) -> Result<Interferometer> {
    if m == 0 {
        return Err(Error::invalid("a unitary needs at least one mode"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = nalgebra::DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    // Fix the phase ambiguity of QR so the distribution is exactly Haar.
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    Interferometer::new(ComplexMatrix::from_nalgebra(&q))
}

/// A triangular mesh of two-mode blocks plus output phases, parameterized by
/// `m(m-1)/2` pairs `(theta, phi)` followed by `m` output phases.
///
/// The block on modes `(i, i+1)` is
/// `[[e^{i phi} cos theta, -sin theta], [e^{i phi} sin theta, cos theta]]`;
/// the all-zero parameter vector yields the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalInterferometer {
    pub modes: usize,
    pub theta: Vec<f64>,
}

/// Number of parameters of the mesh on `m` modes: `m(m-1) + m`.
pub fn mesh_param_count(m: usize) -> usize {
    m * (m - 1) + m
}

impl VariationalInterferometer {
    /// Validates the parameter count for `m` modes.
    pub fn new(modes: usize, theta: Vec<f64>) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("mesh needs at least one mode"));
        }
        if theta.len() != mesh_param_count(modes) {
            return Err(Error::invalid(format!(
                "mesh on {modes} modes takes {} parameters, got {}",
                mesh_param_count(modes),
                theta.len()
            )));
        }
        Ok(VariationalInterferometer { modes, theta })
    }

    /// Builds the unitary by applying the blocks in the fixed triangular
    /// order and then the output phases.
    pub fn build(&self) -> Result<Interferometer> {
        build_variational(self.modes, &self.theta)
    }
}

/// Builds the triangular-mesh unitary for the given parameter vector; see
/// [`VariationalInterferometer`].
pub fn build_variational(m: usize, theta: &[f64]) -> Result<Interferometer> {
    let vi = VariationalInterferometer::new(m, theta.to_vec())?;
    let mut u = ComplexMatrix::identity(m);
    let mut p = 0;
    for j in 1..m {
        for i in (0..j).rev() {
            let th = vi.theta[p];
            let ph = vi.theta[p + 1];
            p += 2;
            apply_block_left(&mut u, i, th, ph);
        }
    }
    for (i, &ph) in vi.theta[p..].iter().enumerate() {
        let phase = Complex64::from_polar(1.0, ph);
        for j in 0..m {
            u.set(i, j, u.get(i, j) * phase);
        }
    }
    Interferometer::new(u)
}

/// Left-multiplies `u` by the two-mode block acting on rows `(i, i+1)`.
fn apply_block_left(u: &mut ComplexMatrix, i: usize, theta: f64, phi: f64) {
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    for j in 0..u.cols() {
        let a = u.get(i, j);
        let b = u.get(i + 1, j);
        u.set(i, j, e * c * a - s * b);
        u.set(i + 1, j, e * s * a + c * b);
    }
}

/// One entry of an adaptive stage table: the unitary applied after the
/// measurement-outcome prefix `prefix` has been observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub prefix: Vec<usize>,
    pub matrix: ComplexMatrix,
}

/// An adaptive interferometer: base unitary `U_0` on `m` modes, `k` measured
/// modes, `n` input photons, and a table of stage unitaries keyed by outcome
/// prefix. Stage `j` (after measuring mode `j`) acts on `m - j` modes;
/// prefixes absent from the table mean "apply the identity".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AdaptiveRepr", into = "AdaptiveRepr")]
pub struct AdaptiveInterferometer {
    modes: usize,
    adaptive_modes: usize,
    photons: usize,
    base: ComplexMatrix,
    stages: Vec<StageEntry>,
}

#[derive(Serialize, Deserialize)]
struct AdaptiveRepr {
    m: usize,
    k: usize,
    n: usize,
    u0: ComplexMatrix,
    stages: Vec<StageEntry>,
}

impl TryFrom<AdaptiveRepr> for AdaptiveInterferometer {
    type Error = String;

    fn try_from(r: AdaptiveRepr) -> std::result::Result<Self, String> {
        AdaptiveInterferometer::new(r.m, r.k, r.n, r.u0, r.stages).map_err(|e| e.to_string())
    }
}

impl From<AdaptiveInterferometer> for AdaptiveRepr {
    fn from(a: AdaptiveInterferometer) -> AdaptiveRepr {
        AdaptiveRepr { m: a.modes, k: a.adaptive_modes, n: a.photons, u0: a.base, stages: a.stages }
    }
}

impl AdaptiveInterferometer {
    /// Validates dimensions, unitarity of the base and of every stage entry,
    /// and canonicalizes the stage table order (by prefix length, then
    /// lexicographically).
    pub fn new(
        m: usize,
        k: usize,
        n: usize,
        u0: ComplexMatrix,
        mut stages: Vec<StageEntry>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("adaptive interferometer needs at least one mode"));
        }
        if k >= m {
            return Err(Error::invalid(format!(
                "number of measured modes k = {k} must be smaller than m = {m}"
            )));
        }
        if n > m {
            return Err(Error::invalid(format!(
                "photon number n = {n} exceeds the mode count m = {m} for single-photon inputs"
            )));
        }
        if u0.rows() != m || u0.cols() != m {
            return Err(Error::invalid(format!(
                "base unitary is {}x{}, expected {m}x{m}",
                u0.rows(),
                u0.cols()
            )));
        }
        // Validate the base the same way Interferometer::new does.
        Interferometer::new(u0.clone())?;
        for e in &stages {
            let j = e.prefix.len();
            if j == 0 || j > k {
                return Err(Error::invalid(format!(
                    "stage prefix length {j} is outside 1..={k}"
                )));
            }
            if e.prefix.iter().sum::<usize>() > n {
                return Err(Error::invalid(format!(
                    "stage prefix {:?} records more than n = {n} photons",
                    e.prefix
                )));
            }
            let want = m - j;
            if e.matrix.rows() != want || e.matrix.cols() != want {
                return Err(Error::invalid(format!(
                    "stage for prefix {:?} is {}x{}, expected {want}x{want}",
                    e.prefix,
                    e.matrix.rows(),
                    e.matrix.cols()
                )));
            }
            Interferometer::new(e.matrix.clone())?;
        }
        stages.sort_by(|a, b| (a.prefix.len(), &a.prefix).cmp(&(b.prefix.len(), &b.prefix)));
        for w in stages.windows(2) {
            if w[0].prefix == w[1].prefix {
                return Err(Error::invalid(format!(
                    "duplicate stage entry for prefix {:?}",
                    w[0].prefix
                )));
            }
        }
        Ok(AdaptiveInterferometer { modes: m, adaptive_modes: k, photons: n, base: u0, stages })
    }

    /// A non-adaptive circuit: `k = 0` and no stage table.
    pub fn non_adaptive(n: usize, u0: Interferometer) -> Result<Self> {
        let m = u0.modes();
        AdaptiveInterferometer::new(m, 0, n, u0.matrix().clone(), Vec::new())
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of measured (adaptive) modes, `k`.
    pub fn adaptive_modes(&self) -> usize {
        self.adaptive_modes
    }

    /// Input photon number, `n`.
    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn base(&self) -> &ComplexMatrix {
        &self.base
    }

    pub fn stage_entries(&self) -> &[StageEntry] {
        &self.stages
    }

    /// The input state `t = (1^n, 0^{m-n})`: one photon in each of the first
    /// `n` modes.
    pub fn input_state(&self) -> FockState {
        let mut occ = vec![0usize; self.modes];
        for slot in occ.iter_mut().take(self.photons) {
            *slot = 1;
        }
        FockState::new(occ)
    }

    /// Stage unitary for measurement prefix `prefix` (length `j`), falling
    /// back to the identity on `m - j` modes when the table has no entry.
    pub fn stage(&self, prefix: &[usize]) -> ComplexMatrix {
        for e in &self.stages {
            if e.prefix == prefix {
                return e.matrix.clone();
            }
        }
        ComplexMatrix::identity(self.modes - prefix.len())
    }

    /// Checks that `p` is a valid adaptive outcome: `k` modes and at most
    /// `n` photons.
    pub fn validate_outcome(&self, p: &FockState) -> Result<()> {
        if p.modes() != self.adaptive_modes {
            return Err(Error::invalid(format!(
                "adaptive outcome {p} has {} modes, expected k = {}",
                p.modes(),
                self.adaptive_modes
            )));
        }
        if p.total_photons() > self.photons {
            return Err(Error::invalid(format!(
                "adaptive outcome {p} records more than n = {} photons",
                self.photons
            )));
        }
        Ok(())
    }

    /// Returns a copy whose final stage is left-composed with `mesh`, a
    /// unitary on the `m - k` unmeasured modes.
    ///
    /// For `k = 0` this multiplies the base; otherwise the composed circuit
    /// applies `1_k (+) mesh` after the last adaptive stage, which requires a
    /// concrete stage entry for every reachable outcome prefix of length `k`
    /// (identity fallbacks are materialized as `mesh` itself).
    pub fn with_final_mesh(&self, mesh: &Interferometer) -> Result<AdaptiveInterferometer> {
        let k = self.adaptive_modes;
        if mesh.modes() != self.modes - k {
            return Err(Error::invalid(format!(
                "final mesh has {} modes, expected m - k = {}",
                mesh.modes(),
                self.modes - k
            )));
        }
        if k == 0 {
            let base = mesh.matrix().mul(&self.base)?;
            return AdaptiveInterferometer::new(self.modes, 0, self.photons, base, Vec::new());
        }
        let mut stages: Vec<StageEntry> =
            self.stages.iter().filter(|e| e.prefix.len() < k).cloned().collect();
        for r in 0..=self.photons {
            for p in fock::enumerate_phi(k, r)? {
                let composed = mesh.matrix().mul(&self.stage(p.as_slice()))?;
                stages.push(StageEntry { prefix: p.as_slice().to_vec(), matrix: composed });
            }
        }
        AdaptiveInterferometer::new(self.modes, k, self.photons, self.base.clone(), stages)
    }
}

/// The effective `m x m` unitary for a full adaptive outcome `p`:
/// `U^p = [1_k (+) U_k(p)] ... [1_1 (+) U_1(p_1)] U_0`.
pub fn compose_adaptive(a: &AdaptiveInterferometer, p: &FockState) -> Result<Interferometer> {
    a.validate_outcome(p)?;
    let m = a.modes();
    let mut u = a.base().clone();
    for j in 1..=a.adaptive_modes() {
        let stage = a.stage(&p.as_slice()[..j]);
        // Left-multiply by 1_j (+) stage without materializing the direct sum.
        let mut next = ComplexMatrix::zeros(m, m);
        for row in 0..j {
            for col in 0..m {
                next.set(row, col, u.get(row, col));
            }
        }
        for row in j..m {
            for col in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in j..m {
                    acc += stage.get(row - j, l - j) * u.get(l, col);
                }
                next.set(row, col, acc);
            }
        }
        u = next;
    }
    Interferometer::new(u)
}

/// Random adaptive interferometer with Haar-random base and stage unitaries
/// for every reachable outcome prefix. Deterministic for a fixed seed.
pub fn random_adaptive(m: usize, k: usize, n: usize, seed: u64) -> Result<AdaptiveInterferometer> {
    let base = random_unitary(m, crate::util::derive_seed(seed, &[0, 0]))?;
    let mut stages = Vec::new();
    let mut counter = 1u64;
    for j in 1..=k {
        for r in 0..=n {
            for p in fock::enumerate_phi(j, r)? {
                let u = random_unitary(m - j, crate::util::derive_seed(seed, &[j as u64, counter]))?;
                counter += 1;
                stages.push(StageEntry { prefix: p.as_slice().to_vec(), matrix: u.matrix().clone() });
            }
        }
    }
    AdaptiveInterferometer::new(m, k, n, base.matrix().clone(), stages)
}
