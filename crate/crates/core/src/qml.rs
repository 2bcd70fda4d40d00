//! Kernel-method and variational classification on top of the simulator.
//!
//! Classical data vectors are encoded as interferometer settings together
//! with a designated adaptive outcome; the squared overlap of the
//! normalized post-selected states acts as a kernel. The implicit pipeline
//! builds a Gram matrix (exactly or from shots) and trains a soft-margin
//! SVM on it with an SMO solver. The explicit pipeline appends a trainable
//! mesh to the encoding circuit, bins final outcomes into labels, and fits
//! the mesh parameters against a smoothed cross-entropy surrogate.

use std::io;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::interferometer::{build_variational, mesh_param_count, AdaptiveInterferometer};
use crate::sampler::{self, TableSampler, DEFAULT_ATTEMPT_BUDGET};
use crate::strong_sim;
use crate::util::derive_seed;

/// Maximum KKT violation allowed in a converged SVM dual solution.
pub const SVM_KKT_TOL: f64 = 1e-4;

/// Default cap on SMO pair updates before reporting non-convergence.
pub const SVM_MAX_PAIR_UPDATES: u64 = 100_000;

/// Probability floor inside the cross-entropy surrogate.
const SURROGATE_FLOOR: f64 = 1e-3;

/// Labeled classical dataset with features of a fixed dimension and
/// labels in {-1, +1}.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    points: Vec<Vec<f64>>,
    labels: Vec<i8>,
}

fn validate_label(raw: f64) -> Result<i8> {
    if raw == 1.0 {
        Ok(1)
    } else if raw == -1.0 {
        Ok(-1)
    } else {
        Err(Error::invalid(format!("labels must be +1 or -1, got {raw}")))
    }
}

impl Dataset {
    pub fn new(name: impl Into<String>, points: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        if points.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::invalid("points must have at least one feature"));
        }
        for (idx, x) in points.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::invalid(format!(
                    "point {idx} has {} features, expected {dim}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("point {idx} has a non-finite feature")));
            }
        }
        for &y in &labels {
            validate_label(y as f64)?;
        }
        Ok(Dataset { name: name.into(), points, labels })
    }

    /// Parses CSV rows of the form `x_1,...,x_d,label`. A leading header
    /// row is detected (its fields do not all parse as numbers) and
    /// skipped.
    pub fn from_csv_reader(name: impl Into<String>, reader: impl io::Read) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (idx, record) in csv_reader.records().enumerate() {
            let record =
                record.map_err(|e| Error::invalid(format!("csv parse failure: {e}")))?;
            match parse_csv_row(&record) {
                Ok((x, y)) => {
                    points.push(x);
                    labels.push(y);
                }
                Err(err) => {
                    if idx == 0 {
                        continue;
                    }
                    return Err(Error::invalid(format!("csv row {}: {err}", idx + 1)));
                }
            }
        }
        Dataset::new(name, points, labels)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string());
        let file =
            std::fs::File::open(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        Dataset::from_csv_reader(name, file)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }
}

fn parse_csv_row(record: &csv::StringRecord) -> Result<(Vec<f64>, i8)> {
    if record.len() < 2 {
        return Err(Error::invalid("rows need at least one feature and a label"));
    }
    let mut x = Vec::with_capacity(record.len() - 1);
    for field in record.iter().take(record.len() - 1) {
        let v: f64 = field
            .parse()
            .map_err(|_| Error::invalid(format!("feature field {field:?} is not a number")))?;
        if !v.is_finite() {
            return Err(Error::invalid(format!("feature field {field:?} is not finite")));
        }
        x.push(v);
    }
    let label_field = record.get(record.len() - 1).expect("checked length");
    let raw: f64 = label_field
        .parse()
        .map_err(|_| Error::invalid(format!("label field {label_field:?} is not a number")))?;
    Ok((x, validate_label(raw)?))
}

/// Data encoding rule: a data vector fills the leading parameters of a
/// triangular mesh (taken modulo 2 pi) on `modes` modes; the circuit runs
/// on the standard single-photon input and post-selects the fixed
/// `designated_outcome` on the `adaptive_modes` measured modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureMapRepr", into = "FeatureMapRepr")]
pub struct FeatureMapSpec {
    modes: usize,
    photons: usize,
    adaptive_modes: usize,
    designated_outcome: FockState,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct FeatureMapRepr {
    modes: usize,
    photons: usize,
    adaptive_modes: usize,
    designated_outcome: FockState,
    dim: usize,
}

impl From<FeatureMapSpec> for FeatureMapRepr {
    fn from(fm: FeatureMapSpec) -> Self {
        FeatureMapRepr {
            modes: fm.modes,
            photons: fm.photons,
            adaptive_modes: fm.adaptive_modes,
            designated_outcome: fm.designated_outcome,
            dim: fm.dim,
        }
    }
}

impl TryFrom<FeatureMapRepr> for FeatureMapSpec {
    type Error = Error;

    fn try_from(repr: FeatureMapRepr) -> Result<Self> {
        FeatureMapSpec::new(
            repr.modes,
            repr.photons,
            repr.adaptive_modes,
            repr.designated_outcome,
            repr.dim,
        )
    }
}

/// A data point after encoding: the circuit to run and the adaptive
/// outcome to post-select on.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedPoint {
    pub circuit: AdaptiveInterferometer,
    pub outcome: FockState,
}

impl FeatureMapSpec {
    pub fn new(
        modes: usize,
        photons: usize,
        adaptive_modes: usize,
        designated_outcome: FockState,
        dim: usize,
    ) -> Result<Self> {
        if photons == 0 || photons > modes {
            return Err(Error::invalid(format!(
                "need 1 <= photons <= modes, got {photons} photons on {modes} modes"
            )));
        }
        if adaptive_modes >= modes {
            return Err(Error::invalid(format!(
                "adaptive modes {adaptive_modes} must be below mode count {modes}"
            )));
        }
        if designated_outcome.modes() != adaptive_modes {
            return Err(Error::invalid(format!(
                "designated outcome covers {} modes, expected {adaptive_modes}",
                designated_outcome.modes()
            )));
        }
        if designated_outcome.total_photons() > photons {
            return Err(Error::invalid(format!(
                "designated outcome holds {} photons, above the input total {photons}",
                designated_outcome.total_photons()
            )));
        }
        let capacity = mesh_param_count(modes);
        if dim == 0 || dim > capacity {
            return Err(Error::invalid(format!(
                "data dimension {dim} must be in 1..={capacity} for a {modes}-mode mesh"
            )));
        }
        Ok(FeatureMapSpec { modes, photons, adaptive_modes, designated_outcome, dim })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn adaptive_modes(&self) -> usize {
        self.adaptive_modes
    }

    pub fn designated_outcome(&self) -> &FockState {
        &self.designated_outcome
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Encodes a data vector. Pure: equal inputs produce equal circuits.
    pub fn encode(&self, x: &[f64]) -> Result<EncodedPoint> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "data point has {} features, feature map expects {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("data point has a non-finite feature"));
        }
        let mut params = vec![0.0; mesh_param_count(self.modes)];
        for (slot, &v) in params.iter_mut().zip(x.iter()) {
            *slot = v.rem_euclid(2.0 * std::f64::consts::PI);
        }
        let mesh = build_variational(self.modes, &params)?;
        let circuit = AdaptiveInterferometer::new(
            self.modes,
            self.adaptive_modes,
            self.photons,
            mesh.matrix().clone(),
            Vec::new(),
        )?;
        Ok(EncodedPoint { circuit, outcome: self.designated_outcome.clone() })
    }
}

/// Feature map with the default post-selection pattern: the first
/// `adaptive_modes` entries of the single-photon input state.
pub fn default_feature_map(
    dim: usize,
    modes: usize,
    photons: usize,
    adaptive_modes: usize,
) -> Result<FeatureMapSpec> {
    if photons > modes {
        return Err(Error::invalid(format!(
            "need photons <= modes, got {photons} photons on {modes} modes"
        )));
    }
    let outcome = FockState::new(
        (0..adaptive_modes).map(|j| usize::from(j < photons)).collect::<Vec<_>>(),
    );
    FeatureMapSpec::new(modes, photons, adaptive_modes, outcome, dim)
}

/// Exact kernel value between two data points: the squared overlap of the
/// normalized post-selected states of their encodings. Identical
/// encodings give exactly 1.
pub fn kernel_entry_exact(fm: &FeatureMapSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    let e1 = fm.encode(x1)?;
    let e2 = fm.encode(x2)?;
    if e1 == e2 {
        return Ok(1.0);
    }
    strong_sim::overlap_normalized(&e1.circuit, &e1.outcome, &e2.circuit, &e2.outcome)
}

/// How a Gram matrix was obtained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    ShotEstimated { shots: u64 },
}

/// Symmetric kernel matrix over a dataset, unit diagonal within tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GramRepr", into = "GramRepr")]
pub struct GramMatrix {
    n: usize,
    entries: Vec<Vec<f64>>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct GramRepr {
    n: usize,
    entries: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl From<GramMatrix> for GramRepr {
    fn from(g: GramMatrix) -> Self {
        GramRepr { n: g.n, entries: g.entries, provenance: g.provenance }
    }
}

impl TryFrom<GramRepr> for GramMatrix {
    type Error = Error;

    fn try_from(repr: GramRepr) -> Result<Self> {
        if repr.n != repr.entries.len() {
            return Err(Error::invalid(format!(
                "gram header says {} rows but {} are present",
                repr.n,
                repr.entries.len()
            )));
        }
        GramMatrix::new(repr.entries, repr.provenance)
    }
}

impl GramMatrix {
    pub fn new(entries: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::invalid("gram matrix must be nonempty"));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "gram row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("gram row {i} has a non-finite entry")));
            }
        }
        for i in 0..n {
            if (entries[i][i] - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "gram diagonal entry {i} is {}, expected 1 within 1e-6",
                    entries[i][i]
                )));
            }
            for j in (i + 1)..n {
                if (entries[i][j] - entries[j][i]).abs() > 1e-8 {
                    return Err(Error::invalid(format!(
                        "gram entries ({i},{j}) and ({j},{i}) differ by more than 1e-8"
                    )));
                }
            }
        }
        Ok(GramMatrix { n, entries, provenance })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn symmetrized(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| 0.5 * (self.entries[i][j] + self.entries[j][i]))
    }

    /// Smallest eigenvalue of the symmetrized matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        self.symmetrized()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Entries after projecting onto the positive-semidefinite cone:
    /// negative eigenvalues (shot noise) are clipped to zero so the SVM
    /// dual stays concave. Returns the original entries when already PSD.
    pub fn clipped_entries(&self) -> Vec<Vec<f64>> {
        let sym = self.symmetrized();
        let eigen = sym.clone().symmetric_eigen();
        if eigen.eigenvalues.iter().all(|&v| v >= 0.0) {
            return self.entries.clone();
        }
        let clipped = DMatrix::from_diagonal(&eigen.eigenvalues.map(|v| v.max(0.0)));
        let rebuilt = &eigen.eigenvectors * clipped * eigen.eigenvectors.transpose();
        (0..self.n).map(|i| (0..self.n).map(|j| rebuilt[(i, j)]).collect()).collect()
    }
}

/// Exact Gram matrix over a dataset. Upper-triangle entries are computed
/// in parallel; the diagonal is 1 by definition of the kernel.
pub fn gram_exact(fm: &FeatureMapSpec, dataset: &Dataset) -> Result<GramMatrix> {
    check_feature_dim(fm, dataset)?;
    let n = dataset.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|l| ((l + 1)..n).map(move |lp| (l, lp))).collect();
    let computed: Vec<(usize, usize, f64)> = pairs
        .par_iter()
        .map(|&(l, lp)| {
            kernel_entry_exact(fm, &dataset.points()[l], &dataset.points()[lp])
                .map(|v| (l, lp, v))
        })
        .collect::<Result<_>>()?;
    let mut entries = vec![vec![0.0; n]; n];
    for (l, row) in entries.iter_mut().enumerate() {
        row[l] = 1.0;
    }
    for (l, lp, v) in computed {
        entries[l][lp] = v;
        entries[lp][l] = v;
    }
    GramMatrix::new(entries, Provenance::Exact)
}

/// Shot-estimated Gram matrix: every pair (including the diagonal) is
/// estimated with `shots` counted arrivals via the post-selected overlap
/// protocol. Entry seeds derive from `seed` and the pair indices, so the
/// result is deterministic and independent of scheduling. Failures carry
/// the offending pair.
pub fn gram_estimated(
    fm: &FeatureMapSpec,
    dataset: &Dataset,
    shots: u64,
    seed: u64,
) -> Result<GramMatrix> {
    check_feature_dim(fm, dataset)?;
    let n = dataset.len();
    let encodings: Vec<EncodedPoint> =
        dataset.points().iter().map(|x| fm.encode(x)).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|l| (l..n).map(move |lp| (l, lp))).collect();
    let computed: Vec<(usize, usize, f64)> = pairs
        .par_iter()
        .map(|&(l, lp)| {
            let report = sampler::estimate_overlap_sampled_pair(
                &encodings[l].circuit,
                &encodings[l].outcome,
                &encodings[lp].circuit,
                &encodings[lp].outcome,
                shots,
                derive_seed(seed, &[l as u64, lp as u64]),
                0.05,
                DEFAULT_ATTEMPT_BUDGET,
            )
            .map_err(|e| Error::GramEntry { row: l, col: lp, source: Box::new(e) })?;
            Ok((l, lp, report.value))
        })
        .collect::<Result<_>>()?;
    let mut entries = vec![vec![0.0; n]; n];
    for (l, lp, v) in computed {
        entries[l][lp] = v;
        entries[lp][l] = v;
    }
    GramMatrix::new(entries, Provenance::ShotEstimated { shots })
}

fn check_feature_dim(fm: &FeatureMapSpec, dataset: &Dataset) -> Result<()> {
    if fm.dim() != dataset.dim() {
        return Err(Error::invalid(format!(
            "feature map expects dimension {}, dataset has {}",
            fm.dim(),
            dataset.dim()
        )));
    }
    Ok(())
}

/// Trained soft-margin SVM in dual form. Stores the training labels
/// because the decision function weighs kernel values by `alpha_l * y_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub labels: Vec<i8>,
}

/// Dual objective (to be minimized):
/// `1/2 sum_ij a_i a_j y_i y_j K_ij - sum_i a_i`.
pub fn svm_dual_objective(kernel: &[Vec<f64>], labels: &[i8], alphas: &[f64]) -> f64 {
    let n = labels.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * (labels[i] * labels[j]) as f64 * kernel[i][j];
        }
    }
    0.5 * quad - alphas.iter().sum::<f64>()
}

/// Maximum KKT violation of a dual iterate: the gap between the largest
/// ascent score over coordinates free to increase and the smallest over
/// coordinates free to decrease. Nonpositive means optimal.
pub fn svm_kkt_residual(kernel: &[Vec<f64>], labels: &[i8], alphas: &[f64], box_c: f64) -> f64 {
    let n = labels.len();
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..n {
        let y = labels[t] as f64;
        let f: f64 = (0..n).map(|j| alphas[j] * labels[j] as f64 * kernel[t][j]).sum();
        let score = -y * (y * f - 1.0);
        if (y > 0.0 && alphas[t] < box_c) || (y < 0.0 && alphas[t] > 0.0) {
            up = up.max(score);
        }
        if (y < 0.0 && alphas[t] < box_c) || (y > 0.0 && alphas[t] > 0.0) {
            low = low.min(score);
        }
    }
    if up.is_finite() && low.is_finite() {
        up - low
    } else {
        0.0
    }
}

/// Trains the dual soft-margin SVM by sequential minimal optimization
/// with maximal-violating-pair selection. The box constraint is
/// `0 <= alpha_l <= 1 / (2 |T| lambda)`; negative Gram eigenvalues are
/// clipped to zero first. All labels equal is a documented degenerate
/// case: the equality constraint forces `alpha = 0` and the classifier
/// returns the common label everywhere.
pub fn svm_train(gram: &GramMatrix, labels: &[i8], lambda: f64) -> Result<SvmModel> {
    svm_train_with_limit(gram, labels, lambda, SVM_MAX_PAIR_UPDATES)
}

/// [`svm_train`] with an explicit cap on SMO pair updates.
pub fn svm_train_with_limit(
    gram: &GramMatrix,
    labels: &[i8],
    lambda: f64,
    max_pair_updates: u64,
) -> Result<SvmModel> {
    let n = gram.n();
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for a {n}x{n} gram matrix",
            labels.len()
        )));
    }
    for &y in labels {
        validate_label(y as f64)?;
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Ok(SvmModel {
            alphas: vec![0.0; n],
            bias: labels[0] as f64,
            lambda,
            labels: labels.to_vec(),
        });
    }

    let box_c = 1.0 / (2.0 * n as f64 * lambda);
    let kernel = gram.clipped_entries();
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let mut alpha = vec![0.0; n];
    // grad[t] is the partial derivative of the dual objective at alpha.
    let mut grad = vec![-1.0; n];
    let mut updates = 0u64;
    let bias;
    loop {
        let mut up_val = f64::NEG_INFINITY;
        let mut up_idx = None;
        let mut low_val = f64::INFINITY;
        let mut low_idx = None;
        for t in 0..n {
            let score = -y[t] * grad[t];
            if (y[t] > 0.0 && alpha[t] < box_c) || (y[t] < 0.0 && alpha[t] > 0.0) {
                if score > up_val {
                    up_val = score;
                    up_idx = Some(t);
                }
            }
            if ((y[t] < 0.0 && alpha[t] < box_c) || (y[t] > 0.0 && alpha[t] > 0.0))
                && score < low_val
            {
                low_val = score;
                low_idx = Some(t);
            }
        }
        let (Some(i), Some(j)) = (up_idx, low_idx) else {
            bias = fallback_bias(&grad, &y, &alpha, box_c);
            break;
        };
        if up_val - low_val <= SVM_KKT_TOL {
            bias = -0.5 * (up_val + low_val);
            break;
        }
        if updates >= max_pair_updates {
            return Err(Error::NonConvergence {
                residual: up_val - low_val,
                iterations: updates,
            });
        }
        updates += 1;
        // Feasible direction: alpha_i moves by +y_i t, alpha_j by -y_j t,
        // preserving the equality constraint exactly.
        let room_i = if y[i] > 0.0 { box_c - alpha[i] } else { alpha[i] };
        let room_j = if y[j] > 0.0 { alpha[j] } else { box_c - alpha[j] };
        let t_max = room_i.min(room_j);
        let curvature = kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j];
        let step = if curvature > 1e-12 {
            ((up_val - low_val) / curvature).min(t_max)
        } else {
            // Flat direction of a PSD form: descend to the nearest bound.
            t_max
        };
        alpha[i] += y[i] * step;
        alpha[j] -= y[j] * step;
        for t in 0..n {
            grad[t] += y[t] * step * (kernel[i][t] - kernel[j][t]);
        }
    }
    Ok(SvmModel { alphas: alpha, bias, lambda, labels: labels.to_vec() })
}

fn fallback_bias(grad: &[f64], y: &[f64], alpha: &[f64], box_c: f64) -> f64 {
    let free: Vec<f64> = alpha
        .iter()
        .zip(grad.iter().zip(y.iter()))
        .filter(|(&a, _)| a > 0.0 && a < box_c)
        .map(|(_, (&g, &yy))| -yy * g)
        .collect();
    if free.is_empty() {
        let all: Vec<f64> = grad.iter().zip(y.iter()).map(|(&g, &yy)| -yy * g).collect();
        all.iter().sum::<f64>() / all.len() as f64
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    }
}

/// Predicted label for a point given its kernel values against the
/// training set: `sign(sum_l alpha_l y_l k_l + b)` with `sign(0) := +1`.
pub fn svm_predict(model: &SvmModel, gram_row: &[f64]) -> Result<i8> {
    if gram_row.len() != model.alphas.len() {
        return Err(Error::invalid(format!(
            "kernel row has {} entries, model was trained on {}",
            gram_row.len(),
            model.alphas.len()
        )));
    }
    let f: f64 = model
        .alphas
        .iter()
        .zip(model.labels.iter().zip(gram_row.iter()))
        .map(|(&a, (&y, &k))| a * y as f64 * k)
        .sum::<f64>()
        + model.bias;
    Ok(if f >= 0.0 { 1 } else { -1 })
}

/// Rule assigning a label to each final outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// +1 when the photon count in the first unmeasured mode is even.
    FirstModeParity,
    /// The same label for every outcome.
    Constant(i8),
}

impl Binning {
    fn validate(&self) -> Result<()> {
        match self {
            Binning::FirstModeParity => Ok(()),
            Binning::Constant(v) => validate_label(*v as f64).map(|_| ()),
        }
    }

    pub fn bin(&self, final_outcome: &FockState) -> i8 {
        match self {
            Binning::FirstModeParity => {
                if final_outcome.occ(0) % 2 == 0 {
                    1
                } else {
                    -1
                }
            }
            Binning::Constant(v) => *v,
        }
    }
}

/// Explicit classifier: feature-map encoding followed by a trainable mesh
/// on the unmeasured modes, with final outcomes binned into labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VariationalRepr", into = "VariationalRepr")]
pub struct VariationalModel {
    feature_map: FeatureMapSpec,
    theta: Vec<f64>,
    binning: Binning,
}

#[derive(Serialize, Deserialize)]
struct VariationalRepr {
    feature_map: FeatureMapSpec,
    theta: Vec<f64>,
    binning: Binning,
}

impl From<VariationalModel> for VariationalRepr {
    fn from(vm: VariationalModel) -> Self {
        VariationalRepr { feature_map: vm.feature_map, theta: vm.theta, binning: vm.binning }
    }
}

impl TryFrom<VariationalRepr> for VariationalModel {
    type Error = Error;

    fn try_from(repr: VariationalRepr) -> Result<Self> {
        VariationalModel::new(repr.feature_map, repr.theta, repr.binning)
    }
}

impl VariationalModel {
    pub fn new(feature_map: FeatureMapSpec, theta: Vec<f64>, binning: Binning) -> Result<Self> {
        let trainable_modes = feature_map.modes() - feature_map.adaptive_modes();
        let expected = mesh_param_count(trainable_modes);
        if theta.len() != expected {
            return Err(Error::invalid(format!(
                "mesh over {trainable_modes} modes takes {expected} parameters, got {}",
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mesh parameters must be finite"));
        }
        binning.validate()?;
        Ok(VariationalModel { feature_map, theta, binning })
    }

    pub fn feature_map(&self) -> &FeatureMapSpec {
        &self.feature_map
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        VariationalModel::new(self.feature_map.clone(), theta, self.binning.clone())
    }

    /// Full circuit for a data point: encoding followed by the trainable
    /// mesh on the unmeasured modes, plus the outcome to post-select.
    pub fn compose(&self, x: &[f64]) -> Result<(AdaptiveInterferometer, FockState)> {
        let encoded = self.feature_map.encode(x)?;
        let trainable_modes = self.feature_map.modes() - self.feature_map.adaptive_modes();
        let mesh = build_variational(trainable_modes, &self.theta)?;
        Ok((encoded.circuit.with_final_mesh(&mesh)?, encoded.outcome))
    }
}

/// Exact conditional label distribution `(Pr[+1 | p_x], Pr[-1 | p_x])`
/// for a data point under the composed circuit.
pub fn explicit_predict_prob_exact(vm: &VariationalModel, x: &[f64]) -> Result<(f64, f64)> {
    let (circuit, outcome) = vm.compose(x)?;
    let joint = strong_sim::joint_distribution(&circuit)?;
    let mut arrival = 0.0;
    let mut plus = 0.0;
    for ((p, s), prob) in &joint {
        if p == &outcome {
            arrival += prob;
            if vm.binning().bin(s) > 0 {
                plus += prob;
            }
        }
    }
    if arrival <= 1e-12 {
        return Err(Error::UnreachableOutcome(format!(
            "designated outcome {outcome} has probability {arrival}"
        )));
    }
    let v = (plus / arrival).clamp(0.0, 1.0);
    Ok((v, 1.0 - v))
}

/// Shot-based conditional label distribution: runs the composed circuit,
/// post-selects arrivals at the designated outcome, and returns the
/// binned label frequencies over `t_shots` arrivals. The two returned
/// probabilities sum to 1 exactly.
pub fn explicit_predict_prob(
    vm: &VariationalModel,
    x: &[f64],
    t_shots: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    explicit_predict_prob_with_budget(vm, x, t_shots, seed, DEFAULT_ATTEMPT_BUDGET)
}

/// [`explicit_predict_prob`] with an explicit attempt budget: post-selection
/// rates differ per data point, so callers may bound the total number of
/// circuit runs spent waiting for arrivals.
pub fn explicit_predict_prob_with_budget(
    vm: &VariationalModel,
    x: &[f64],
    t_shots: u64,
    seed: u64,
    attempt_budget: u64,
) -> Result<(f64, f64)> {
    if t_shots == 0 {
        return Err(Error::invalid("shot target must be positive"));
    }
    let (circuit, outcome) = vm.compose(x)?;
    let joint = strong_sim::joint_distribution(&circuit)?;
    let arrival_prob: f64 =
        joint.iter().filter(|((p, _), _)| p == &outcome).map(|(_, prob)| prob).sum();
    if arrival_prob <= 1e-12 {
        return Err(Error::UnreachableOutcome(format!(
            "designated outcome {outcome} has probability {arrival_prob}"
        )));
    }
    let table = TableSampler::new(joint.iter().map(|(_, prob)| *prob));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arrivals = 0u64;
    let mut plus = 0u64;
    let mut runs = 0u64;
    while arrivals < t_shots {
        if runs >= attempt_budget {
            return Err(Error::Starvation { attempts: runs });
        }
        runs += 1;
        let ((p, s), _) = &joint[table.draw(&mut rng)];
        if p == &outcome {
            arrivals += 1;
            if vm.binning().bin(s) > 0 {
                plus += 1;
            }
        }
    }
    let v = plus as f64 / t_shots as f64;
    Ok((v, 1.0 - v))
}

/// How the training loop evaluates label probabilities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostEvaluation {
    Exact,
    Shots { per_point: u64 },
}

/// Settings for [`explicit_train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub evaluation: CostEvaluation,
    pub max_iterations: u64,
    /// Surrogate-change threshold for convergence.
    pub convergence_tolerance: f64,
    /// Number of consecutive small-change iterations that ends training.
    pub convergence_window: u64,
    pub spsa_step: f64,
    pub spsa_perturbation: f64,
    pub spsa_stability: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            evaluation: CostEvaluation::Exact,
            max_iterations: 200,
            convergence_tolerance: 1e-4,
            convergence_window: 10,
            spsa_step: 0.4,
            spsa_perturbation: 0.25,
            spsa_stability: 8.0,
        }
    }
}

/// Result of variational training: the best parameters seen plus the
/// per-iteration cost traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: VariationalModel,
    /// Misclassification rate per iteration.
    pub risk_trace: Vec<f64>,
    /// Smoothed cross-entropy per iteration (the optimized quantity).
    pub surrogate_trace: Vec<f64>,
    pub converged: bool,
    pub hit_iteration_cap: bool,
}

struct CostProbe<'a> {
    template: &'a VariationalModel,
    dataset: &'a Dataset,
    evaluation: &'a CostEvaluation,
    seed: u64,
}

impl CostProbe<'_> {
    /// Mean misclassification rate and smoothed cross-entropy at `theta`.
    /// `tags` namespaces the shot-mode seeds so repeated evaluations stay
    /// independent.
    fn evaluate(&self, theta: &[f64], tags: &[u64]) -> Result<(f64, f64)> {
        let candidate = self.template.with_theta(theta.to_vec())?;
        let count = self.dataset.len() as f64;
        let mut risk = 0.0;
        let mut surrogate = 0.0;
        for (l, (x, &y)) in
            self.dataset.points().iter().zip(self.dataset.labels().iter()).enumerate()
        {
            let (p_plus, p_minus) = match self.evaluation {
                CostEvaluation::Exact => explicit_predict_prob_exact(&candidate, x)?,
                CostEvaluation::Shots { per_point } => {
                    let mut labels = vec![0x45u64];
                    labels.extend_from_slice(tags);
                    labels.push(l as u64);
                    explicit_predict_prob(&candidate, x, *per_point, derive_seed(self.seed, &labels))?
                }
            };
            let predicted = if p_plus >= p_minus { 1 } else { -1 };
            if predicted != y {
                risk += 1.0 / count;
            }
            let p_correct = if y > 0 { p_plus } else { p_minus };
            surrogate -= p_correct.max(SURROGATE_FLOOR).ln() / count;
        }
        Ok((risk, surrogate))
    }
}

/// Trains the explicit classifier's mesh parameters against the smoothed
/// cross-entropy surrogate, reporting the misclassification rate
/// alongside. Exact evaluation uses coordinate line search over a fixed
/// step ladder (the surrogate trace is then non-increasing); shot-based
/// evaluation uses simultaneous-perturbation gradient steps. Training
/// stops when the surrogate change stays below the tolerance for a full
/// window, when the risk hits zero, or at the iteration cap (flagged,
/// returning the best parameters seen).
pub fn explicit_train(
    vm: &VariationalModel,
    dataset: &Dataset,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    check_feature_dim(vm.feature_map(), dataset)?;
    if config.max_iterations == 0 {
        return Err(Error::invalid("iteration cap must be positive"));
    }
    let probe = CostProbe { template: vm, dataset, evaluation: &config.evaluation, seed };
    let mut theta = vm.theta().to_vec();
    let mut risk_trace = Vec::new();
    let mut surrogate_trace = Vec::new();

    let (risk0, surr0) = probe.evaluate(&theta, &[0, 0])?;
    risk_trace.push(risk0);
    surrogate_trace.push(surr0);
    let mut best = (surr0, theta.clone());
    let mut converged = risk0 == 0.0;
    let mut hit_iteration_cap = false;
    let mut stall = 0u64;
    let mut previous = surr0;

    if !converged {
        let mut spsa_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5B5A]));
        for iter in 1..=config.max_iterations {
            match &config.evaluation {
                CostEvaluation::Exact => {
                    let steps = [
                        std::f64::consts::FRAC_PI_2,
                        std::f64::consts::FRAC_PI_4,
                        std::f64::consts::FRAC_PI_8,
                        std::f64::consts::PI / 16.0,
                        std::f64::consts::PI / 32.0,
                    ];
                    let mut current = probe.evaluate(&theta, &[iter, 0])?.1;
                    for coord in 0..theta.len() {
                        let base = theta[coord];
                        let mut chosen = base;
                        for step in steps {
                            for direction in [step, -step] {
                                let mut candidate = theta.clone();
                                candidate[coord] = base + direction;
                                let (_, j) = probe.evaluate(&candidate, &[iter, 0])?;
                                if j < current {
                                    current = j;
                                    chosen = base + direction;
                                }
                            }
                        }
                        theta[coord] = chosen;
                    }
                }
                CostEvaluation::Shots { .. } => {
                    let gain_c =
                        config.spsa_perturbation / (iter as f64).powf(0.101);
                    let gain_a = config.spsa_step
                        / (iter as f64 + config.spsa_stability).powf(0.602);
                    let direction: Vec<f64> = (0..theta.len())
                        .map(|_| if spsa_rng.gen::<bool>() { 1.0 } else { -1.0 })
                        .collect();
                    let shifted = |sign: f64| -> Vec<f64> {
                        theta
                            .iter()
                            .zip(direction.iter())
                            .map(|(&t, &d)| t + sign * gain_c * d)
                            .collect()
                    };
                    let (_, j_plus) = probe.evaluate(&shifted(1.0), &[iter, 1])?;
                    let (_, j_minus) = probe.evaluate(&shifted(-1.0), &[iter, 2])?;
                    let scale = (j_plus - j_minus) / (2.0 * gain_c);
                    for (t, d) in theta.iter_mut().zip(direction.iter()) {
                        *t -= gain_a * scale / d;
                    }
                }
            }
            let (risk, surrogate) = probe.evaluate(&theta, &[iter, 3])?;
            risk_trace.push(risk);
            surrogate_trace.push(surrogate);
            if surrogate < best.0 {
                best = (surrogate, theta.clone());
            }
            if risk == 0.0 {
                best = (surrogate, theta.clone());
                converged = true;
                break;
            }
            if (surrogate - previous).abs() < config.convergence_tolerance {
                stall += 1;
            } else {
                stall = 0;
            }
            previous = surrogate;
            if stall >= config.convergence_window {
                converged = true;
                break;
            }
            if iter == config.max_iterations {
                hit_iteration_cap = true;
            }
        }
    }

    Ok(TrainOutcome {
        model: vm.with_theta(best.1)?,
        risk_trace,
        surrogate_trace,
        converged,
        hit_iteration_cap,
    })
}
