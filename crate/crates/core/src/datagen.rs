//! Synthetic sparse-signal data: isotropic Gaussian features, a sparse unit
//! ground truth, Gaussian additive noise for regression and three label-noise
//! laws for classification.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::{stream, Purpose};

/// Unit-norm ground truth direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    w_star: DVector<f64>,
}

impl GroundTruth {
    /// `e_1` in `R^d`.
    pub fn e1(d: usize) -> Self {
        Self::sparse(d, 1).expect("s = 1 is always valid")
    }

    /// First `s` coordinates equal to `1/sqrt(s)`.
    pub fn sparse(d: usize, s: usize) -> Result<Self> {
        if s == 0 || s > d {
            return config(format!("sparsity {s} must lie in 1..={d}"));
        }
        let v = 1.0 / (s as f64).sqrt();
        let w_star = DVector::from_fn(d, |i, _| if i < s { v } else { 0.0 });
        Ok(Self { w_star })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_direction(w: DVector<f64>) -> Result<Self> {
        let norm = w.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return config("ground truth must be a finite nonzero vector");
        }
        Ok(Self { w_star: w / norm })
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.w_star
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }
}

/// Conditional law of the noise given the projection `z = <x, w*>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// `y = <x, w*> + N(0, sigma^2)`.
    GaussianAdditive { sigma: f64 },
    /// The clean sign is flipped with probability `sigma`.
    RandomFlips { sigma: f64 },
    /// `P(xi = +1 | z) = h(z sigma)` with `h(t) = e^|t| / (1 + e^|t|)`.
    Logistic { sigma: f64 },
    /// `y = sgn(z + N(0, sigma^2))`.
    PreQuantization { sigma: f64 },
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::GaussianAdditive { sigma }.validated()
    }

    pub fn random_flips(sigma: f64) -> Result<Self> {
        Self::RandomFlips { sigma }.validated()
    }

    pub fn logistic(sigma: f64) -> Result<Self> {
        Self::Logistic { sigma }.validated()
    }

    pub fn pre_quantization(sigma: f64) -> Result<Self> {
        Self::PreQuantization { sigma }.validated()
    }

    /// Builds a model from its config name (`gaussian`, `flips`, `logistic`, `prequant`).
    pub fn from_name(kind: &str, sigma: f64) -> Result<Self> {
        match kind {
            "gaussian" | "gaussian_additive" => Self::gaussian(sigma),
            "flips" | "random_flips" => Self::random_flips(sigma),
            "logistic" => Self::logistic(sigma),
            "prequant" | "pre_quantization" => Self::pre_quantization(sigma),
            other => config(format!("unknown noise model '{other}'")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianAdditive { .. } => "gaussian",
            Self::RandomFlips { .. } => "flips",
            Self::Logistic { .. } => "logistic",
            Self::PreQuantization { .. } => "prequant",
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            Self::GaussianAdditive { sigma }
            | Self::RandomFlips { sigma }
            | Self::Logistic { sigma }
            | Self::PreQuantization { sigma } => sigma,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, Self::GaussianAdditive { .. })
    }

    pub fn validated(self) -> Result<Self> {
        let s = self.sigma();
        let ok = match self {
            Self::GaussianAdditive { .. } => s >= 0.0,
            Self::RandomFlips { .. } => (0.0..0.5).contains(&s),
            Self::Logistic { .. } | Self::PreQuantization { .. } => s > 0.0,
        };
        if ok && s.is_finite() {
            Ok(self)
        } else {
            config(format!(
                "sigma = {s} outside the admissible range of the {} model",
                self.name()
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Self::Regression),
            "classification" => Ok(Self::Classification),
            other => config(format!("unknown task '{other}'")),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Regression => "regression",
            Self::Classification => "classification",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub noise: NoiseModel,
    pub task: Task,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn regression(n: usize, d: usize, p: f64, sigma: f64, seed: u64) -> Result<Self> {
        Self {
            n,
            d,
            p,
            noise: NoiseModel::gaussian(sigma)?,
            task: Task::Regression,
            seed,
        }
        .validated()
    }

    pub fn classification(
        n: usize,
        d: usize,
        p: f64,
        noise: NoiseModel,
        seed: u64,
    ) -> Result<Self> {
        Self {
            n,
            d,
            p,
            noise,
            task: Task::Classification,
            seed,
        }
        .validated()
    }

    /// Conjugate exponent `p / (p - 1)`; infinite for `p = 1`.
    pub fn q(&self) -> f64 {
        conjugate(self.p)
    }

    /// Exact interpolation needs `d >= n`. Generation alone does not, so this
    /// is checked by the fitting paths rather than by [`Self::validated`].
    pub fn check_interpolating(&self) -> Result<()> {
        if self.d < self.n {
            return config(format!(
                "interpolation needs d >= n (got n={}, d={})",
                self.n, self.d
            ));
        }
        Ok(())
    }

    pub fn validated(self) -> Result<Self> {
        if self.n == 0 || self.d == 0 {
            return config("n and d must be positive");
        }
        if !(1.0..=2.0).contains(&self.p) {
            return config(format!("p = {} must lie in [1, 2]", self.p));
        }
        self.noise.validated()?;
        match (self.task, self.noise.is_classification()) {
            (Task::Regression, false) | (Task::Classification, true) => Ok(self),
            (Task::Regression, true) => config("regression requires Gaussian additive noise"),
            (Task::Classification, false) => config("classification requires a label-noise model"),
        }
    }
}

/// Conjugate exponent of `p`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Per-feature affine map applied by CSV ingestion.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    /// Indices (in the source file) of the retained feature columns.
    pub kept_columns: Vec<usize>,
    pub dropped_columns: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Original label strings mapped to -1 and +1.
    pub label_map: Option<(String, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    Synthetic {
        spec: ProblemSpec,
        truth: GroundTruth,
    },
    /// Loaded from a file; the ground truth is unknown.
    Imported {
        standardization: Option<Standardization>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub origin: Origin,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn truth(&self) -> Option<&GroundTruth> {
        match &self.origin {
            Origin::Synthetic { truth, .. } => Some(truth),
            Origin::Imported { .. } => None,
        }
    }

    pub fn spec(&self) -> Option<&ProblemSpec> {
        match &self.origin {
            Origin::Synthetic { spec, .. } => Some(spec),
            Origin::Imported { .. } => None,
        }
    }

    /// Whether every label is exactly -1 or +1.
    pub fn has_sign_labels(&self) -> bool {
        self.y.iter().all(|&v| v == 1.0 || v == -1.0)
    }
}

fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Fills an `n x d` standard normal matrix row by row.
pub fn gaussian_design<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    x
}

fn projections(x: &DMatrix<f64>, truth: &GroundTruth) -> DVector<f64> {
    let w = truth.vector();
    DVector::from_fn(x.nrows(), |i, _| {
        let mut acc = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                acc += x[(i, j)] * wj;
            }
        }
        acc
    })
}

/// `y = X w* + xi` with `xi ~ N(0, sigma^2)` and `w* = e_1`.
pub fn gen_regression(spec: &ProblemSpec) -> Result<Dataset> {
    gen_regression_with_truth(spec, GroundTruth::e1(spec.d))
}

pub fn gen_regression_with_truth(spec: &ProblemSpec, truth: GroundTruth) -> Result<Dataset> {
    let spec = spec.validated()?;
    let NoiseModel::GaussianAdditive { sigma } = spec.noise else {
        return config("regression requires Gaussian additive noise");
    };
    if spec.task != Task::Regression {
        return config("gen_regression called with a classification spec");
    }
    check_truth_dim(&truth, spec.d)?;
    let x = gaussian_design(spec.n, spec.d, &mut stream(spec.seed, Purpose::Design));
    let mut y = projections(&x, &truth);
    if sigma > 0.0 {
        let mut rng = stream(spec.seed, Purpose::Noise);
        for v in y.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += sigma * e;
        }
    }
    Ok(Dataset {
        x,
        y,
        origin: Origin::Synthetic { spec, truth },
    })
}

/// Draws the multiplicative label noise `xi` given `z = <x, w*>`.
pub fn sample_label_sign<R: Rng + ?Sized>(model: &NoiseModel, z: f64, rng: &mut R) -> Result<f64> {
    match *model {
        NoiseModel::GaussianAdditive { .. } => {
            config("Gaussian additive noise does not define a label-sign law")
        }
        NoiseModel::RandomFlips { sigma } => {
            let u: f64 = rng.random();
            Ok(if u < sigma { -1.0 } else { 1.0 })
        }
        NoiseModel::Logistic { sigma } => {
            let u: f64 = rng.random();
            let keep = 1.0 / (1.0 + (-(z * sigma).abs()).exp());
            Ok(if u < keep { 1.0 } else { -1.0 })
        }
        NoiseModel::PreQuantization { sigma } => {
            let e: f64 = rng.sample(StandardNormal);
            if z == 0.0 {
                return Ok(1.0);
            }
            Ok(sgn(z + sigma * e) * sgn(z))
        }
    }
}

/// `y_i = sgn(<x_i, w*>) xi_i` with `w* = e_1`.
pub fn gen_classification(spec: &ProblemSpec) -> Result<Dataset> {
    gen_classification_with_truth(spec, GroundTruth::e1(spec.d))
}

pub fn gen_classification_with_truth(spec: &ProblemSpec, truth: GroundTruth) -> Result<Dataset> {
    let spec = spec.validated()?;
    if spec.task != Task::Classification {
        return config("gen_classification called with a regression spec");
    }
    check_truth_dim(&truth, spec.d)?;
    let x = gaussian_design(spec.n, spec.d, &mut stream(spec.seed, Purpose::Design));
    let z = projections(&x, &truth);
    let y = noisy_signs(&z, &spec.noise, &mut stream(spec.seed, Purpose::Labels))?;
    Ok(Dataset {
        x,
        y,
        origin: Origin::Synthetic { spec, truth },
    })
}

/// Labels `sgn(z_i) xi_i` for given projections `z_i = <x_i, w*>`.
pub fn noisy_signs<R: Rng + ?Sized>(
    z: &DVector<f64>,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let mut y = DVector::zeros(z.len());
    for (yi, &zi) in y.iter_mut().zip(z.iter()) {
        *yi = sgn(zi) * sample_label_sign(noise, zi, rng)?;
    }
    Ok(y)
}

/// Dispatches on `spec.task`.
pub fn generate(spec: &ProblemSpec) -> Result<Dataset> {
    match spec.task {
        Task::Regression => gen_regression(spec),
        Task::Classification => gen_classification(spec),
    }
}

fn check_truth_dim(truth: &GroundTruth, d: usize) -> Result<()> {
    if truth.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: truth.dim(),
        });
    }
    Ok(())
}

/// Writes `x_0,...,x_{d-1},y` followed by one row per sample.
pub fn write_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..ds.d()).map(|j| format!("x_{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(ds.d() + 1);
    for i in 0..ds.n() {
        row.clear();
        row.extend((0..ds.d()).map(|j| ds.x[(i, j)].to_string()));
        row.push(ds.y[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format produced by [`write_csv`]. The ground truth is not stored,
/// so the result is marked as imported.
pub fn read_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let d = header
        .len()
        .checked_sub(1)
        .filter(|&d| d > 0)
        .ok_or_else(|| {
            Error::Schema("dataset CSV needs at least one feature column and y".into())
        })?;
    for (j, name) in header.iter().take(d).enumerate() {
        if name != format!("x_{j}") {
            return Err(Error::Schema(format!(
                "column {j} is '{name}', expected 'x_{j}'"
            )));
        }
    }
    if &header[d] != "y" {
        return Err(Error::Schema("last column must be 'y'".into()));
    }
    let mut vals = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(Error::Schema(format!(
                "row {} has {} fields",
                line + 1,
                rec.len()
            )));
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {}, column {j}: '{cell}'", line + 1)))?;
            if j < d {
                vals.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let n = ys.len();
    Ok(Dataset {
        x: DMatrix::from_row_slice(n, d, &vals),
        y: DVector::from_vec(ys),
        origin: Origin::Imported {
            standardization: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn noiseless_regression_returns_first_column() {
        let spec = ProblemSpec::regression(3, 4, 1.5, 0.0, 7).unwrap();
        let ds = gen_regression(&spec).unwrap();
        for i in 0..3 {
            assert_eq!(ds.y[i], ds.x[(i, 0)]);
        }
    }

    #[test]
    fn regression_moments_match_unit_signal_plus_noise() {
        let spec = ProblemSpec::regression(100_000, 2, 2.0, 1.0, 11).unwrap();
        let ds = gen_regression(&spec).unwrap();
        let n = ds.n() as f64;
        let mean = ds.y.sum() / n;
        let var = ds.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Var(y) = |w*|^2 + sigma^2 = 2
        assert!(mean.abs() <= 3.0 * (2.0 / n).sqrt(), "mean {mean}");
        assert!((var - 2.0).abs() <= 0.1, "variance {var}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ProblemSpec::regression(5, 9, 1.5, 0.5, 3).unwrap();
        assert_eq!(
            gen_regression(&spec).unwrap(),
            gen_regression(&spec).unwrap()
        );
        let spec =
            ProblemSpec::classification(5, 9, 1.5, NoiseModel::random_flips(0.2).unwrap(), 3)
                .unwrap();
        assert_eq!(
            gen_classification(&spec).unwrap(),
            gen_classification(&spec).unwrap()
        );
    }

    #[test]
    fn wrong_noise_variant_is_rejected() {
        let bad = ProblemSpec {
            n: 2,
            d: 3,
            p: 1.5,
            noise: NoiseModel::RandomFlips { sigma: 0.1 },
            task: Task::Regression,
            seed: 0,
        };
        assert!(matches!(gen_regression(&bad), Err(Error::Config(_))));
        let mut rng = stream(0, Purpose::Labels);
        assert!(
            sample_label_sign(&NoiseModel::GaussianAdditive { sigma: 1.0 }, 0.3, &mut rng).is_err()
        );
    }

    #[test]
    fn flip_probability_bounds() {
        assert!(NoiseModel::random_flips(0.5).is_err());
        assert!(NoiseModel::random_flips(-0.1).is_err());
        assert!(NoiseModel::random_flips(0.0).is_ok());
        assert!(NoiseModel::logistic(0.0).is_err());
        assert!(NoiseModel::gaussian(0.0).is_ok());
    }

    #[test]
    fn zero_flip_rate_always_keeps_sign() {
        let m = NoiseModel::random_flips(0.0).unwrap();
        let mut rng = stream(1, Purpose::Labels);
        assert!((0..1000).all(|_| sample_label_sign(&m, 0.7, &mut rng).unwrap() == 1.0));
    }

    #[test]
    fn logistic_is_fair_coin_at_zero() {
        let m = NoiseModel::logistic(2.0).unwrap();
        let mut rng = stream(5, Purpose::Labels);
        let draws = 100_000;
        let plus = (0..draws)
            .filter(|_| sample_label_sign(&m, 0.0, &mut rng).unwrap() > 0.0)
            .count() as f64
            / draws as f64;
        // 4 binomial standard deviations at p = 1/2
        assert!(
            (plus - 0.5).abs() <= 4.0 * (0.25 / draws as f64).sqrt(),
            "{plus}"
        );
    }

    #[test]
    fn flip_rate_matches_sigma() {
        let m = NoiseModel::random_flips(0.3).unwrap();
        let mut rng = stream(9, Purpose::Labels);
        let flips = (0..100_000)
            .filter(|_| sample_label_sign(&m, 1.0, &mut rng).unwrap() < 0.0)
            .count() as f64
            / 1e5;
        // binomial sd = sqrt(0.21/1e5) = 0.00145, so 0.01 is ~7 sd
        assert!((flips - 0.3).abs() <= 0.01, "{flips}");
    }

    #[test]
    fn prequantization_tie_breaks_to_plus() {
        let m = NoiseModel::pre_quantization(1.0).unwrap();
        let mut rng = stream(2, Purpose::Labels);
        assert_eq!(sample_label_sign(&m, 0.0, &mut rng).unwrap(), 1.0);
    }

    #[test]
    fn noiseless_classification_labels_are_signs() {
        let spec =
            ProblemSpec::classification(50, 60, 1.5, NoiseModel::random_flips(0.0).unwrap(), 4)
                .unwrap();
        let ds = gen_classification(&spec).unwrap();
        assert!(ds.has_sign_labels());
        for i in 0..50 {
            assert_eq!(ds.y[i], sgn(ds.x[(i, 0)]));
        }
    }

    #[test]
    fn vanishing_prequantization_noise_keeps_labels() {
        let spec = ProblemSpec::classification(
            100,
            120,
            1.5,
            NoiseModel::pre_quantization(1e-9).unwrap(),
            8,
        )
        .unwrap();
        let ds = gen_classification(&spec).unwrap();
        let mismatches = (0..100).filter(|&i| ds.y[i] != sgn(ds.x[(i, 0)])).count();
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn flipped_fraction_in_labels() {
        let noise = NoiseModel::random_flips(0.15).unwrap();
        let z = DVector::from_iterator(10_000, (0..10_000).map(|i| (i as f64 - 4999.5) / 1000.0));
        let y = noisy_signs(&z, &noise, &mut stream(21, Purpose::Labels)).unwrap();
        let frac = (0..z.len()).filter(|&i| y[i] != sgn(z[i])).count() as f64 / 1e4;
        assert!((frac - 0.15).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn design_is_nearly_uncorrelated() {
        let x = gaussian_design(10_000, 10, &mut stream(77, Purpose::Design));
        let cov = x.transpose() * &x / 10_000.0;
        for a in 0..10 {
            for b in 0..10 {
                if a != b {
                    assert!(cov[(a, b)].abs() <= 0.05, "cov[{a},{b}] = {}", cov[(a, b)]);
                }
            }
        }
    }

    #[test]
    fn sparse_truth_is_unit_norm() {
        for s in [1, 3, 7] {
            let t = GroundTruth::sparse(10, s).unwrap();
            assert!((t.vector().norm() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(GroundTruth::e1(4).vector()[0], 1.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let spec = ProblemSpec::regression(4, 6, 1.5, 1.0, 13).unwrap();
        let ds = gen_regression(&spec).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_0,x_1,x_2,x_3,x_4,x_5,y\n"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.y, ds.y);
    }
}
