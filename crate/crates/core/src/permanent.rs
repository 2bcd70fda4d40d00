//! Complex matrices, exact matrix permanents and unbiased permanent
//! estimators.
//!
//! Two exact algorithms are provided: [`permanent_naive`] evaluates the
//! defining sum over permutations and exists as a slow, independently
//! checkable reference; [`permanent_ryser`] is the Gray-code Ryser formula,
//! `O(n 2^n)`, used everywhere else. [`permanent_repeated`] evaluates the
//! permanent of a matrix built by repeating rows and columns of a base
//! matrix, the shape that appears in photonic transition amplitudes.
//!
//! The estimators trade accuracy for polynomial cost: [`estimate_permanent_gurvits`]
//! is the Glynn/Gurvits +-1 estimator for a plain square matrix, and
//! [`estimate_permanent_sq_repeated`] estimates the *squared modulus* of a
//! repeated-row permanent with random phases scaled per repetition, keeping
//! the additive error bound proportional to `prod_i q_i!^2 / q_i^{q_i}` for
//! a base matrix of spectral norm at most 1.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::util::factorial_f64;

/// Largest matrix accepted by the defining-sum permanent.
const NAIVE_SIZE_CAP: usize = 10;
/// Largest matrix accepted by the Ryser permanent (practical `O(n 2^n)` limit).
const RYSER_SIZE_CAP: usize = 30;

/// Dense row-major complex matrix.
///
/// Serializes as `{"rows": r, "cols": c, "re": [...], "im": [...]}` with the
/// entries flattened row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<MatrixRepr> for ComplexMatrix {
    type Error = String;

    fn try_from(r: MatrixRepr) -> std::result::Result<Self, String> {
        let len = r.rows.checked_mul(r.cols).ok_or("matrix dimensions overflow")?;
        if r.re.len() != len || r.im.len() != len {
            return Err(format!(
                "matrix payload length mismatch: rows*cols = {len}, re has {}, im has {}",
                r.re.len(),
                r.im.len()
            ));
        }
        if r.re.iter().chain(r.im.iter()).any(|v| !v.is_finite()) {
            return Err("matrix entries must be finite".to_string());
        }
        let data = r
            .re
            .iter()
            .zip(r.im.iter())
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        Ok(ComplexMatrix { rows: r.rows, cols: r.cols, data })
    }
}

impl From<ComplexMatrix> for MatrixRepr {
    fn from(m: ComplexMatrix) -> Self {
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            re: m.data.iter().map(|z| z.re).collect(),
            im: m.data.iter().map(|z| z.im).collect(),
        }
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data; the length must be `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("rows have unequal lengths"));
        }
        Ok(ComplexMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    /// The `n x n` zero-based identity.
    pub fn identity(n: usize) -> Self {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// An all-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(l, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// Builds the matrix whose row list repeats row `i` of `self`
    /// `row_reps[i]` times (dropping it when the count is zero) and likewise
    /// for columns. This is the submatrix-with-repetitions construction used
    /// by transition amplitudes.
    pub fn repeat_select(&self, row_reps: &[usize], col_reps: &[usize]) -> Result<ComplexMatrix> {
        if row_reps.len() != self.rows || col_reps.len() != self.cols {
            return Err(Error::invalid(format!(
                "repetition vectors ({}, {}) do not match matrix shape {}x{}",
                row_reps.len(),
                col_reps.len(),
                self.rows,
                self.cols
            )));
        }
        let out_rows: usize = row_reps.iter().sum();
        let out_cols: usize = col_reps.iter().sum();
        let mut out = ComplexMatrix::zeros(out_rows, out_cols);
        let mut oi = 0;
        for (i, &ri) in row_reps.iter().enumerate() {
            for _ in 0..ri {
                let mut oj = 0;
                for (j, &cj) in col_reps.iter().enumerate() {
                    for _ in 0..cj {
                        out.set(oi, oj, self.get(i, j));
                        oj += 1;
                    }
                }
                oi += 1;
            }
        }
        Ok(out)
    }

    /// Largest absolute entry of `self - identity`; the unitarity check is
    /// `(U^dagger U).deviation_from_identity()`.
    pub fn deviation_from_identity(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                dev = dev.max((self.get(i, j) - target).norm());
            }
        }
        dev
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<Complex64>) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }
}

/// Result of a randomized permanent (or squared-permanent) estimation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PermanentEstimate {
    /// The estimate. For squared-modulus estimators the imaginary part is 0.
    #[serde(with = "crate::util::complex_serde")]
    pub value: Complex64,
    /// Additive error bound that holds with probability at least `1 - delta`.
    pub abs_error_bound: f64,
    /// Number of random samples drawn.
    pub samples_used: u64,
}

/// Permanent by the defining sum over permutations, `O(n! n)`.
///
/// Kept as an independent reference implementation; refuses matrices larger
/// than 10 x 10.
pub fn permanent_naive(a: &ComplexMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::invalid("permanent requires a square matrix"));
    }
    let n = a.rows();
    if n > NAIVE_SIZE_CAP {
        return Err(Error::Capacity(format!(
            "permanent_naive accepts at most {NAIVE_SIZE_CAP}x{NAIVE_SIZE_CAP}, got {n}x{n}"
        )));
    }
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    use itertools::Itertools;
    let mut total = Complex64::new(0.0, 0.0);
    for perm in (0..n).permutations(n) {
        let mut prod = Complex64::new(1.0, 0.0);
        for (i, &j) in perm.iter().enumerate() {
            prod *= a.get(i, j);
        }
        total += prod;
    }
    Ok(total)
}

/// Permanent by Ryser's formula with Gray-code subset updates, `O(n 2^n)`.
pub fn permanent_ryser(a: &ComplexMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::invalid("permanent requires a square matrix"));
    }
    let n = a.rows();
    if n > RYSER_SIZE_CAP {
        return Err(Error::Capacity(format!(
            "permanent_ryser accepts at most {RYSER_SIZE_CAP}x{RYSER_SIZE_CAP}, got {n}x{n}"
        )));
    }
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    // Per(A) = (-1)^n sum_{S nonempty} (-1)^{|S|} prod_i sum_{j in S} a_ij.
    // The Gray code visits subsets so that consecutive ones differ in one
    // column, allowing O(n) row-sum updates per subset.
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut prev_gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let gray = k ^ (k >> 1);
        let changed = gray ^ prev_gray;
        let j = changed.trailing_zeros() as usize;
        if gray & changed != 0 {
            for i in 0..n {
                row_sums[i] += a.get(i, j);
            }
        } else {
            for i in 0..n {
                row_sums[i] -= a.get(i, j);
            }
        }
        prev_gray = gray;
        let prod: Complex64 = row_sums.iter().product();
        if gray.count_ones() % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total)
}

/// Permanent of the matrix obtained from `b` by repeating row `i`
/// `row_reps[i]` times and column `j` `col_reps[j]` times.
///
/// The repetition totals must agree (the expanded matrix must be square).
pub fn permanent_repeated(b: &ComplexMatrix, row_reps: &FockState, col_reps: &FockState) -> Result<Complex64> {
    let total_rows: usize = row_reps.total_photons();
    let total_cols: usize = col_reps.total_photons();
    if total_rows != total_cols {
        return Err(Error::invalid(format!(
            "repetition totals differ ({total_rows} rows vs {total_cols} cols); the expanded matrix must be square"
        )));
    }
    let expanded = b.repeat_select(row_reps.as_slice(), col_reps.as_slice())?;
    permanent_ryser(&expanded)
}

/// Number of samples for additive accuracy `epsilon` with confidence
/// `1 - delta`: `ceil(9 ln(2/delta) / epsilon^2)`.
pub fn estimator_sample_count(epsilon: f64, delta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!("epsilon must be in (0, 1], got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must be in (0, 1), got {delta}")));
    }
    Ok((9.0 * (2.0 / delta).ln() / (epsilon * epsilon)).ceil() as u64)
}

/// Glynn/Gurvits +-1 estimator for `Per(a)` of a square matrix.
///
/// Draws `ceil(9 ln(2/delta) / epsilon^2)` samples; with probability at
/// least `1 - delta` the estimate is within `epsilon * ||a||^n` of the true
/// permanent, and every individual sample is bounded by `||a||^n` in
/// modulus. Deterministic for a fixed seed.
pub fn estimate_permanent_gurvits(
    a: &ComplexMatrix,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<PermanentEstimate> {
    if !a.is_square() {
        return Err(Error::invalid("permanent estimation requires a square matrix"));
    }
    let n = a.rows();
    let samples = estimator_sample_count(epsilon, delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut x = vec![1.0f64; n];
    for _ in 0..samples {
        let mut parity = 1.0f64;
        for xi in x.iter_mut() {
            *xi = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            parity *= *xi;
        }
        let mut prod = Complex64::new(parity, 0.0);
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for (j, &xj) in x.iter().enumerate() {
                row += a.get(i, j) * xj;
            }
            prod *= row;
        }
        sum += prod;
    }
    let value = sum / samples as f64;
    let norm = spectral_norm(a);
    Ok(PermanentEstimate { value, abs_error_bound: epsilon * norm.powi(n as i32), samples_used: samples })
}

/// Estimator for `|Per(B_q)|^2` where `B_q` repeats row `i` of `b`
/// `row_reps[i]` times and uses every column once.
///
/// Requires `||b|| <= 1` (checked). Each sample scales row `i`'s random
/// phase by `sqrt(q_i)`, which keeps the single-sample modulus at most
/// `prod_i q_i! / q_i^{q_i/2}`; estimating the permanent first and squaring
/// afterwards gives, with probability at least `1 - delta`, an additive
/// error of at most `3 epsilon prod_i (q_i!^2 / q_i^{q_i})`.
pub fn estimate_permanent_sq_repeated(
    b: &ComplexMatrix,
    row_reps: &FockState,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<PermanentEstimate> {
    if row_reps.modes() != b.rows() {
        return Err(Error::invalid(format!(
            "row repetition vector has {} entries but the matrix has {} rows",
            row_reps.modes(),
            b.rows()
        )));
    }
    let n = b.cols();
    if row_reps.total_photons() != n {
        return Err(Error::invalid(format!(
            "row repetitions sum to {} but the matrix has {} columns; the expanded matrix must be square",
            row_reps.total_photons(),
            n
        )));
    }
    let norm = spectral_norm(b);
    if norm > 1.0 + 1e-9 {
        return Err(Error::invalid(format!(
            "spectral norm {norm:.6} exceeds 1; the error bound requires a contraction"
        )));
    }
    let samples = estimator_sample_count(epsilon, delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let q = row_reps.as_slice();
    // Per-row coefficient q_i! / q_i^{q_i} and overall bound factor
    // prod_i q_i!^2 / q_i^{q_i}.
    let mut coeff = Vec::with_capacity(q.len());
    let mut bound_factor = 1.0f64;
    for &qi in q {
        if qi > 0 {
            let c = factorial_f64(qi) / (qi as f64).powi(qi as i32);
            coeff.push(c);
            bound_factor *= factorial_f64(qi) * c;
        } else {
            coeff.push(0.0);
        }
    }

    let mut sum = Complex64::new(0.0, 0.0);
    let mut x = vec![Complex64::new(0.0, 0.0); q.len()];
    for _ in 0..samples {
        let mut pref = Complex64::new(1.0, 0.0);
        for (i, &qi) in q.iter().enumerate() {
            if qi == 0 {
                x[i] = Complex64::new(0.0, 0.0);
                continue;
            }
            let theta = rng.gen::<f64>() * std::f64::consts::TAU;
            x[i] = Complex64::from_polar((qi as f64).sqrt(), theta);
            pref *= coeff[i] * x[i].conj().powu(qi as u32);
        }
        let mut prod = pref;
        for j in 0..n {
            let mut col = Complex64::new(0.0, 0.0);
            for (i, &qi) in q.iter().enumerate() {
                if qi > 0 {
                    col += x[i] * b.get(i, j);
                }
            }
            prod *= col;
        }
        sum += prod;
    }
    let z = sum / samples as f64;
    Ok(PermanentEstimate {
        value: Complex64::new(z.norm_sqr(), 0.0),
        abs_error_bound: 3.0 * epsilon * bound_factor,
        samples_used: samples,
    })
}

/// Spectral norm (largest singular value) by power iteration on `a^dagger a`
/// with a fixed seed, iterated to a relative tolerance of 1e-12.
pub fn spectral_norm(a: &ComplexMatrix) -> f64 {
    let n = a.cols();
    if n == 0 || a.rows() == 0 {
        return 0.0;
    }
    let m = a.dagger().mul(a).expect("a^dagger a is always well-formed");
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let mut v: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    normalize(&mut v);
    let mut lambda = 0.0f64;
    for _ in 0..10_000 {
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                w[i] += m.get(i, j) * v[j];
            }
        }
        let new_lambda = v.iter().zip(w.iter()).map(|(vi, wi)| (vi.conj() * wi).re).sum::<f64>();
        let wnorm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if wnorm < 1e-300 {
            return 0.0;
        }
        for (wi, vi) in w.iter().zip(v.iter_mut()) {
            *vi = wi / wnorm;
        }
        if (new_lambda - lambda).abs() <= 1e-12 * new_lambda.abs().max(1.0) {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda.max(0.0).sqrt()
}

fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mat2(a: Complex64, b: Complex64, d: Complex64, e: Complex64) -> ComplexMatrix {
        ComplexMatrix::from_rows(vec![vec![a, b], vec![d, e]]).unwrap()
    }

    #[test]
    fn two_by_two_permanent_is_ad_plus_bc() {
        let m = mat2(c(1.0, 2.0), c(0.5, -1.0), c(2.0, 0.0), c(-1.5, 0.25));
        let expected = c(1.0, 2.0) * c(-1.5, 0.25) + c(0.5, -1.0) * c(2.0, 0.0);
        assert_abs_diff_eq!(permanent_naive(&m).unwrap().re, expected.re, epsilon = 1e-12);
        assert_abs_diff_eq!(permanent_ryser(&m).unwrap().im, expected.im, epsilon = 1e-12);
    }

    #[test]
    fn identity_and_all_ones_permanents() {
        let id = ComplexMatrix::identity(4);
        assert_abs_diff_eq!(permanent_ryser(&id).unwrap().re, 1.0, epsilon = 1e-12);
        let ones = ComplexMatrix::new(3, 3, vec![c(1.0, 0.0); 9]).unwrap();
        // Per(all-ones n x n) = n!.
        assert_abs_diff_eq!(permanent_ryser(&ones).unwrap().re, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(permanent_naive(&ones).unwrap().re, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_matrix_permanent_is_one() {
        let empty = ComplexMatrix::zeros(0, 0);
        assert_eq!(permanent_naive(&empty).unwrap(), c(1.0, 0.0));
        assert_eq!(permanent_ryser(&empty).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn ryser_matches_naive_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in 1..=6 {
            for _ in 0..20 {
                let data: Vec<Complex64> =
                    (0..n * n).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
                let m = ComplexMatrix::new(n, n, data).unwrap();
                let pn = permanent_naive(&m).unwrap();
                let pr = permanent_ryser(&m).unwrap();
                assert_abs_diff_eq!(pn.re, pr.re, epsilon = 1e-10);
                assert_abs_diff_eq!(pn.im, pr.im, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn size_caps_are_enforced() {
        let big = ComplexMatrix::zeros(11, 11);
        assert!(matches!(permanent_naive(&big), Err(Error::Capacity(_))));
        let huge = ComplexMatrix::zeros(31, 31);
        assert!(matches!(permanent_ryser(&huge), Err(Error::Capacity(_))));
    }

    #[test]
    fn repeated_permanent_expands_rows_and_columns() {
        // Repeating row 0 twice of [[a, b], [c, d]] with both columns once
        // gives [[a, b], [a, b]], whose permanent is 2ab.
        let m = mat2(c(1.0, 1.0), c(2.0, -1.0), c(0.0, 3.0), c(1.0, 0.0));
        let p = permanent_repeated(&m, &vec![2, 0].into(), &vec![1, 1].into()).unwrap();
        let expected = 2.0 * c(1.0, 1.0) * c(2.0, -1.0);
        assert_abs_diff_eq!(p.re, expected.re, epsilon = 1e-12);
        assert_abs_diff_eq!(p.im, expected.im, epsilon = 1e-12);
        // Mismatched totals are rejected.
        assert!(permanent_repeated(&m, &vec![2, 0].into(), &vec![1, 0].into()).is_err());
    }

    #[test]
    fn hom_beam_splitter_has_vanishing_coincidence_permanent() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bs = mat2(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0));
        let p = permanent_ryser(&bs).unwrap();
        assert_abs_diff_eq!(p.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn spectral_norm_of_diagonal_and_unitary() {
        let d = mat2(c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert_abs_diff_eq!(spectral_norm(&d), 3.0, epsilon = 1e-9);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bs = mat2(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0));
        assert_abs_diff_eq!(spectral_norm(&bs), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn sample_count_follows_the_hoeffding_formula() {
        let t = estimator_sample_count(0.1, 0.05).unwrap();
        assert_eq!(t, (9.0f64 * (2.0f64 / 0.05).ln() / 0.01).ceil() as u64);
        // Halving epsilon at fixed delta quadruples the count (up to ceil).
        let t2 = estimator_sample_count(0.05, 0.05).unwrap();
        let ratio = t2 as f64 / t as f64;
        assert!((2.0..=8.0).contains(&ratio), "1/eps^2 scaling violated: {ratio}");
        assert!(estimator_sample_count(0.0, 0.5).is_err());
        assert!(estimator_sample_count(0.5, 1.0).is_err());
    }

    #[test]
    fn gurvits_estimator_hits_its_bound_on_a_seeded_run() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bs = mat2(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0));
        let exact = permanent_ryser(&bs).unwrap();
        let est = estimate_permanent_gurvits(&bs, 0.1, 0.05, 7).unwrap();
        assert!(
            (est.value - exact).norm() <= est.abs_error_bound,
            "estimate {} off from {} beyond bound {}",
            est.value,
            exact,
            est.abs_error_bound
        );
        assert_eq!(est.samples_used, estimator_sample_count(0.1, 0.05).unwrap());
    }

    #[test]
    fn squared_repeated_estimator_tracks_the_exact_value() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bs = mat2(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0));
        let reps: FockState = vec![2, 0].into();
        let exact = permanent_repeated(&bs, &reps, &vec![1, 1].into()).unwrap().norm_sqr();
        let est = estimate_permanent_sq_repeated(&bs, &reps, 0.05, 0.05, 11).unwrap();
        assert!(
            (est.value.re - exact).abs() <= est.abs_error_bound,
            "estimate {} off from {exact} beyond bound {}",
            est.value.re,
            est.abs_error_bound
        );
        assert_eq!(est.value.im, 0.0);
    }

    #[test]
    fn squared_repeated_estimator_rejects_expanding_matrices() {
        let m = mat2(c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0));
        let err = estimate_permanent_sq_repeated(&m, &vec![1, 1].into(), 0.1, 0.1, 3);
        assert!(err.is_err());
    }

    #[test]
    fn matrix_json_schema_round_trips() {
        let m = mat2(c(1.0, 2.0), c(0.0, -1.0), c(0.5, 0.0), c(0.0, 0.0));
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(
            json,
            r#"{"rows":2,"cols":2,"re":[1.0,0.0,0.5,0.0],"im":[2.0,-1.0,0.0,0.0]}"#
        );
        let back: ComplexMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        // Length mismatches are rejected at parse time.
        let bad = r#"{"rows":2,"cols":2,"re":[1.0],"im":[0.0]}"#;
        assert!(serde_json::from_str::<ComplexMatrix>(bad).is_err());
    }
}
