//! Monte Carlo sampling of the product ensemble.
//!
//! Each trial draws two independent `N x N` complex Ginibre matrices with
//! entry density `exp(-Tr X*X)` (so `E|X_ij|^2 = 1`, real and imaginary
//! parts each variance 1/2 — the convention that makes `lambda_i / N^2` the
//! correctly scaled squared singular values with no free parameter), forms
//! `P = X2 X1`, and records the squared singular values of `P` divided by
//! `N^2`, sorted ascending.
//!
//! Reproducibility: trial `t` of a batch uses a ChaCha12 stream seeded by a
//! splitmix64 chain keyed on `(master_seed, t, attempt)`; normal variates
//! come from an explicit Box–Muller transform of 53-bit uniforms. The result
//! is a pure function of `(N, trials, master_seed, code_version)`, bit for
//! bit, independent of worker count and completion order.

use nalgebra::{Complex, DMatrix};
use rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("SVD failed to converge for trial seed {trial_seed} (after one retry)")]
    Decomposition { trial_seed: u64 },
    #[error("trial {trial} failed: {source}")]
    Trial { trial: usize, source: Box<EnsembleError> },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("manifest schema_version {found} unsupported (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("corrupt batch file: {0}")]
    Corrupt(String),
}

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_MATRIX_SIZE: usize = 2048;

/// A seeded batch of scaled squared singular values with full provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    /// `trials x n`; each row sorted ascending, all entries positive.
    pub values: Vec<Vec<f64>>,
    pub created_at: String,
    pub code_version: String,
}

/// Sidecar manifest written next to the CSV payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchManifest {
    pub schema_version: u32,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub code_version: String,
    pub created_at: String,
    /// Resolved CLI configuration, when the batch was produced by the CLI.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub run_config: Option<serde_json::Value>,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed 64-bit mix deriving the per-trial substream seed.
pub fn substream_seed(master_seed: u64, trial: u64) -> u64 {
    let mut s = master_seed ^ (trial.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix64(&mut s)
}

fn chacha_from_u64(seed: u64) -> ChaCha12Rng {
    let mut state = seed;
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(bytes)
}

/// 53-bit uniform in `(0, 1]`.
fn uniform_open(r: u64) -> f64 {
    ((r >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// 53-bit uniform in `[0, 1)`.
fn uniform_half_open(r: u64) -> f64 {
    (r >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// One standard complex Gaussian entry with `E|z|^2 = 1`: Box–Muller pair
/// scaled by `1/sqrt 2` into real and imaginary parts.
fn complex_gaussian(rng: &mut ChaCha12Rng) -> Complex<f64> {
    let u1 = uniform_open(rng.next_u64());
    let u2 = uniform_half_open(rng.next_u64());
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = TAU * u2;
    Complex::new(
        r * theta.cos() * std::f64::consts::FRAC_1_SQRT_2,
        r * theta.sin() * std::f64::consts::FRAC_1_SQRT_2,
    )
}

fn ginibre(n: usize, rng: &mut ChaCha12Rng) -> DMatrix<Complex<f64>> {
    // row-major fill order is part of the reproducibility contract
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = complex_gaussian(rng);
        }
    }
    m
}

fn svals_once(n: usize, seed: u64) -> Option<Vec<f64>> {
    let mut rng = chacha_from_u64(seed);
    let x1 = ginibre(n, &mut rng);
    let x2 = ginibre(n, &mut rng);
    let p = x2 * x1;
    let svd = p.try_svd(false, false, f64::EPSILON, 10_000)?;
    let n2 = (n * n) as f64;
    let mut vals: Vec<f64> = svd.singular_values.iter().map(|s| s * s / n2).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(vals)
}

/// Scaled squared singular values of one product draw, sorted ascending.
///
/// A decomposition failure retries once on a perturbed substream before
/// reporting an error.
pub fn sample_product_svals(n: usize, trial_seed: u64) -> Result<Vec<f64>, EnsembleError> {
    if n == 0 || n > MAX_MATRIX_SIZE {
        return Err(EnsembleError::Domain(format!(
            "matrix size must be in 1..={MAX_MATRIX_SIZE}, got {n}"
        )));
    }
    if let Some(v) = svals_once(n, trial_seed) {
        return Ok(v);
    }
    let retry = trial_seed ^ 0xD134_2543_DE82_EF95;
    svals_once(n, retry).ok_or(EnsembleError::Decomposition { trial_seed })
}

/// Runs `trials` independent draws in parallel; trial `t` is seeded by
/// [`substream_seed`]`(master_seed, t)` so the result does not depend on the
/// worker count or completion order.
pub fn run_batch(n: usize, trials: usize, master_seed: u64) -> Result<SampleBatch, EnsembleError> {
    if trials == 0 {
        return Err(EnsembleError::Domain("trials must be >= 1".into()));
    }
    let rows: Vec<Result<Vec<f64>, EnsembleError>> = (0..trials)
        .into_par_iter()
        .map(|t| sample_product_svals(n, substream_seed(master_seed, t as u64)))
        .collect();
    let mut values = Vec::with_capacity(trials);
    for (t, row) in rows.into_iter().enumerate() {
        match row {
            Ok(v) => values.push(v),
            Err(e) => return Err(EnsembleError::Trial { trial: t, source: Box::new(e) }),
        }
    }
    Ok(SampleBatch {
        n,
        trials,
        master_seed,
        values,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        code_version: crate::CODE_VERSION.to_string(),
    })
}

impl SampleBatch {
    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    pub fn pooled_mean(&self) -> f64 {
        let count = (self.trials * self.n) as f64;
        self.iter_values().sum::<f64>() / count
    }

    /// Pooled `m`-th moment together with its standard error, estimated from
    /// the spread of per-trial moments (rows are independent; values within
    /// a row are not).
    pub fn moment_with_se(&self, m: u32) -> (f64, f64) {
        let per_trial: Vec<f64> = self
            .values
            .iter()
            .map(|row| row.iter().map(|v| v.powi(m as i32)).sum::<f64>() / row.len() as f64)
            .collect();
        let t = per_trial.len() as f64;
        let mean = per_trial.iter().sum::<f64>() / t;
        if per_trial.len() < 2 {
            return (mean, f64::INFINITY);
        }
        let var = per_trial.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
        (mean, (var / t).sqrt())
    }
}

/// Pooled right-continuous step CDF over all trials.
#[derive(Clone, Debug)]
pub struct EmpiricalCDF {
    atoms: Vec<f64>,
}

impl EmpiricalCDF {
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.atoms.partition_point(|&a| a <= x) as f64 / self.atoms.len() as f64
    }
}

pub fn empirical_cdf(batch: &SampleBatch) -> EmpiricalCDF {
    let mut atoms: Vec<f64> = batch.iter_values().collect();
    atoms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    EmpiricalCDF { atoms }
}

/// Kolmogorov–Smirnov distance between a pooled empirical CDF and a target
/// CDF, evaluating both one-sided gaps at every atom.
pub fn ks_distance<F: Fn(f64) -> f64>(e: &EmpiricalCDF, target_cdf: F) -> f64 {
    let n = e.atoms.len() as f64;
    let mut worst = 0.0f64;
    for (i, &a) in e.atoms.iter().enumerate() {
        worst = worst.max((target_cdf(a.next_down()) - i as f64 / n).abs());
        worst = worst.max((target_cdf(a) - (i + 1) as f64 / n).abs());
    }
    worst
}

fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.json")
}

/// Writes the batch as CSV (`trial,index,scaled_squared_singular_value`)
/// plus a JSON sidecar manifest; floats round-trip exactly.
pub fn persist(batch: &SampleBatch, csv_path: &Path) -> Result<(), EnsembleError> {
    persist_with_config(batch, csv_path, None)
}

/// [`persist`] with the resolved CLI run configuration embedded in the
/// manifest.
pub fn persist_with_config(
    batch: &SampleBatch,
    csv_path: &Path,
    run_config: Option<serde_json::Value>,
) -> Result<(), EnsembleError> {
    let file = std::fs::File::create(csv_path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "trial,index,scaled_squared_singular_value")?;
    for (t, row) in batch.values.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            writeln!(w, "{t},{i},{v}")?;
        }
    }
    w.flush()?;

    let manifest = BatchManifest {
        schema_version: SCHEMA_VERSION,
        n: batch.n,
        trials: batch.trials,
        master_seed: batch.master_seed,
        code_version: batch.code_version.clone(),
        created_at: batch.created_at.clone(),
        run_config,
    };
    let mf = std::fs::File::create(manifest_path(csv_path))?;
    serde_json::to_writer_pretty(BufWriter::new(mf), &manifest)?;
    Ok(())
}

/// Loads a persisted batch, validating the manifest schema and the payload
/// shape; refuses partial reads.
pub fn load(csv_path: &Path) -> Result<SampleBatch, EnsembleError> {
    let manifest: BatchManifest =
        serde_json::from_reader(std::fs::File::open(manifest_path(csv_path))?)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(EnsembleError::SchemaMismatch {
            found: manifest.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(csv_path)?;
    {
        let headers = rdr.headers()?;
        let expect = ["trial", "index", "scaled_squared_singular_value"];
        if headers.len() != 3 || headers.iter().zip(expect).any(|(a, b)| a != b) {
            return Err(EnsembleError::Corrupt(format!("unexpected CSV header: {headers:?}")));
        }
    }
    let mut values = vec![Vec::with_capacity(manifest.n); manifest.trials];
    for record in rdr.records() {
        let record = record?;
        let parse = |i: usize| -> Result<f64, EnsembleError> {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| EnsembleError::Corrupt(format!("bad record {record:?}")))
        };
        let t = parse(0)? as usize;
        let i = parse(1)? as usize;
        let v = parse(2)?;
        if t >= manifest.trials || i >= manifest.n {
            return Err(EnsembleError::Corrupt(format!("indices out of range in {record:?}")));
        }
        if values[t].len() != i {
            return Err(EnsembleError::Corrupt(format!("rows out of order near {record:?}")));
        }
        if !(v > 0.0) {
            return Err(EnsembleError::Corrupt(format!("non-positive value in {record:?}")));
        }
        values[t].push(v);
    }
    for (t, row) in values.iter().enumerate() {
        if row.len() != manifest.n {
            return Err(EnsembleError::Corrupt(format!(
                "trial {t} has {} values, expected {}",
                row.len(),
                manifest.n
            )));
        }
        if row.windows(2).any(|w| w[0] > w[1]) {
            return Err(EnsembleError::Corrupt(format!("trial {t} not sorted")));
        }
    }
    Ok(SampleBatch {
        n: manifest.n,
        trials: manifest.trials,
        master_seed: manifest.master_seed,
        values,
        created_at: manifest.created_at,
        code_version: manifest.code_version,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::rho;

    #[test]
    fn output_contract_shape() {
        let v = sample_product_svals(5, 123).unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.iter().all(|&x| x > 0.0));
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn batches_are_bit_reproducible() {
        let a = run_batch(2, 3, 7).unwrap();
        let b = run_batch(2, 3, 7).unwrap();
        assert_eq!(a.values, b.values);
        let c = run_batch(2, 3, 8).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let quad = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| run_batch(3, 8, 42)).unwrap();
        let b = quad.install(|| run_batch(3, 8, 42)).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn n1_mean_matches_product_of_exponentials() {
        // lambda = |x2|^2 |x1|^2 with independent Exp(1) factors: mean 1
        let batch = run_batch(1, 200_000, 1).unwrap();
        let mean = batch.pooled_mean();
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn n1_distribution_is_rho0() {
        // CDF of the N=1 scaled value: F(x) = 1 - rho_1(x)
        let batch = run_batch(1, 100_000, 2).unwrap();
        let e = empirical_cdf(&batch);
        let target = |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                1.0 - rho(1, x).unwrap().value(1).unwrap()
            }
        };
        let d = ks_distance(&e, target);
        assert!(d <= 0.01, "KS = {d}");
    }

    #[test]
    fn empirical_cdf_step_examples() {
        let batch = SampleBatch {
            n: 1,
            trials: 2,
            master_seed: 0,
            values: vec![vec![1.0], vec![3.0]],
            created_at: String::new(),
            code_version: String::new(),
        };
        let e = empirical_cdf(&batch);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(1.0), 0.5);
        assert_eq!(e.eval(2.9), 0.5);
        assert_eq!(e.eval(3.0), 1.0);
    }

    #[test]
    fn ks_against_point_mass() {
        let batch = SampleBatch {
            n: 1,
            trials: 1,
            master_seed: 0,
            values: vec![vec![1.0]],
            created_at: String::new(),
            code_version: String::new(),
        };
        let e = empirical_cdf(&batch);
        let d = ks_distance(&e, |x| if x >= 1.0 { 1.0 } else { 0.0 });
        assert_eq!(d, 0.0);
    }

    #[test]
    fn persist_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.csv");
        let batch = run_batch(2, 3, 7).unwrap();
        persist(&batch, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(batch, loaded);

        let manifest: BatchManifest =
            serde_json::from_reader(std::fs::File::open(dir.path().join("batch.manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest.master_seed, 7);
        assert_eq!(manifest.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn unknown_schema_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.csv");
        let batch = run_batch(2, 2, 9).unwrap();
        persist(&batch, &path).unwrap();
        // corrupt the manifest version
        let mpath = dir.path().join("batch.manifest.json");
        let text = std::fs::read_to_string(&mpath).unwrap();
        std::fs::write(&mpath, text.replace("\"schema_version\": 1", "\"schema_version\": 99")).unwrap();
        match load(&path) {
            Err(EnsembleError::SchemaMismatch { found: 99, expected: 1 }) => {}
            other => panic!("expected schema mismatch, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_same_csv_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        persist(&run_batch(4, 2, 42).unwrap(), &p1).unwrap();
        persist(&run_batch(4, 2, 42).unwrap(), &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(run_batch(3, 0, 1), Err(EnsembleError::Domain(_))));
        assert!(matches!(sample_product_svals(0, 1), Err(EnsembleError::Domain(_))));
        assert!(matches!(
            sample_product_svals(MAX_MATRIX_SIZE + 1, 1),
            Err(EnsembleError::Domain(_))
        ));
    }
}
