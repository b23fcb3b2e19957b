//! Seeded sampling of the pair `(X, Y)` and the spectra built from it.
//!
//! Entries are drawn from a ChaCha20 keystream used as a counter-based
//! generator: the stream id is derived from `(trial_index, matrix tag)` and
//! entry `i` (row-major) always reads words `4 i .. 4 i + 4`. A value
//! therefore depends only on `(master_seed, trial_index, matrix, i)`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use rand_core::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::ModelParams;

/// Eigenpairs must satisfy `||A v - mu v|| <= EIGEN_RESIDUAL_TOL * ||A||`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-9;

/// `YY*` (or `XX* + YY*`) with a larger condition estimate is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Entry laws, each standardized to mean 0 and `E|Z|^2 = 1`. Only
/// `ComplexGaussian` is complex-valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryDistribution {
    ComplexGaussian,
    RealGaussian,
    Rademacher,
    Uniform,
    Laplace,
}

impl EntryDistribution {
    pub const ALL: [EntryDistribution; 5] = [
        EntryDistribution::ComplexGaussian,
        EntryDistribution::RealGaussian,
        EntryDistribution::Rademacher,
        EntryDistribution::Uniform,
        EntryDistribution::Laplace,
    ];

    pub fn field(self) -> Field {
        match self {
            EntryDistribution::ComplexGaussian => Field::Complex,
            _ => Field::Real,
        }
    }

    /// Map two independent 64-bit words to one standardized entry.
    fn draw(self, w1: u64, w2: u64) -> Complex64 {
        // u in (0, 1]: never zero, so ln(u) is finite.
        let u1 = ((w1 >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (w2 >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        match self {
            EntryDistribution::ComplexGaussian => {
                let r = (-u1.ln()).sqrt();
                let theta = std::f64::consts::TAU * u2;
                Complex64::new(r * theta.cos(), r * theta.sin())
            }
            EntryDistribution::RealGaussian => {
                let r = (-2.0 * u1.ln()).sqrt();
                Complex64::new(r * (std::f64::consts::TAU * u2).cos(), 0.0)
            }
            EntryDistribution::Rademacher => {
                Complex64::new(if w1 >> 63 == 0 { 1.0 } else { -1.0 }, 0.0)
            }
            EntryDistribution::Uniform => {
                Complex64::new(3f64.sqrt() * (2.0 * u1 - 1.0), 0.0)
            }
            EntryDistribution::Laplace => {
                // Scale 1/sqrt(2) gives unit variance.
                let v = u1 - 0.5;
                let magnitude = -(1.0 - 2.0 * v.abs()).max(f64::MIN_POSITIVE).ln();
                Complex64::new(v.signum() * magnitude / 2f64.sqrt(), 0.0)
            }
        }
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntryDistribution::ComplexGaussian => "complex-gaussian",
            EntryDistribution::RealGaussian => "real-gaussian",
            EntryDistribution::Rademacher => "rademacher",
            EntryDistribution::Uniform => "uniform",
            EntryDistribution::Laplace => "laplace",
        })
    }
}

impl FromStr for EntryDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.to_string() == s)
            .or(match s {
                "gaussian" => Some(EntryDistribution::ComplexGaussian),
                _ => None,
            })
            .ok_or_else(|| Error::Validation(format!("unknown entry distribution '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    fn tag(self) -> u16 {
        match self {
            Field::Real => 0,
            Field::Complex => 1,
        }
    }
}

/// Everything needed to regenerate one sampled pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub params: ModelParams,
    pub dist: EntryDistribution,
    pub master_seed: u64,
    pub trial_index: u64,
}

fn integer_part(ratio: f64, n: usize) -> usize {
    // Slack absorbs products like 2.3 * 10 = 22.999999999999996.
    (ratio * n as f64 + 1e-9).floor() as usize
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Validation(format!("n must be >= 2, got {}", self.n)));
        }
        Ok(())
    }

    /// Columns of `X`, `[b n]`.
    pub fn cols_x(&self) -> usize {
        integer_part(self.params.b(), self.n)
    }

    /// Columns of `Y`, `[a n]`.
    pub fn cols_y(&self) -> usize {
        integer_part(self.params.a(), self.n)
    }

    pub fn with_trial(mut self, trial_index: u64) -> Self {
        self.trial_index = trial_index;
        self
    }
}

/// `X` is `n x [b n]`, `Y` is `n x [a n]`; real fields keep zero imaginary parts.
#[derive(Debug, Clone)]
pub struct MatrixPair {
    pub x: Mat<Complex64>,
    pub y: Mat<Complex64>,
    pub field: Field,
    pub master_seed: u64,
    pub trial_index: u64,
}

impl MatrixPair {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}

const TAG_X: u64 = 0;
const TAG_Y: u64 = 1;

fn sample_matrix(spec: &EnsembleSpec, tag: u64, rows: usize, cols: usize) -> Mat<Complex64> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(spec.trial_index.wrapping_mul(2).wrapping_add(tag));
    rng.set_word_pos(0);
    let flat: Vec<Complex64> = (0..rows * cols)
        .map(|_| {
            let w1 = rng.next_u64();
            let w2 = rng.next_u64();
            spec.dist.draw(w1, w2)
        })
        .collect();
    Mat::from_fn(rows, cols, |i, j| flat[i * cols + j])
}

/// Entry `(row, col)` of matrix `tag` without generating the rest.
pub fn sample_entry(spec: &EnsembleSpec, tag_is_y: bool, row: usize, col: usize) -> Complex64 {
    let cols = if tag_is_y { spec.cols_y() } else { spec.cols_x() };
    let mut rng = ChaCha20Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(
        spec.trial_index
            .wrapping_mul(2)
            .wrapping_add(if tag_is_y { TAG_Y } else { TAG_X }),
    );
    rng.set_word_pos(4 * (row * cols + col) as u128);
    let w1 = rng.next_u64();
    let w2 = rng.next_u64();
    spec.dist.draw(w1, w2)
}

pub fn sample_pair(spec: &EnsembleSpec) -> Result<MatrixPair> {
    spec.validate()?;
    Ok(MatrixPair {
        x: sample_matrix(spec, TAG_X, spec.n, spec.cols_x()),
        y: sample_matrix(spec, TAG_Y, spec.n, spec.cols_y()),
        field: spec.dist.field(),
        master_seed: spec.master_seed,
        trial_index: spec.trial_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Manova,
    Product,
}

/// Ascending eigenvalues of one sampled matrix, optionally with eigenvectors
/// stored as columns in the same order.
#[derive(Debug, Clone)]
pub struct EmpiricalSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Mat<Complex64>>,
    pub kind: SpectrumKind,
}

impl EmpiricalSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// MANOVA spectrum obtained from a product spectrum through
    /// `lambda = 1 / (1 + mu)`; eigenvectors are shared by the two matrices.
    pub fn to_manova(&self) -> Result<EmpiricalSpectrum> {
        if self.kind != SpectrumKind::Product {
            return Err(Error::Validation("to_manova expects a product spectrum".into()));
        }
        let eigenvalues = self.eigenvalues.iter().rev().map(|mu| 1.0 / (1.0 + mu)).collect();
        let eigenvectors = self.eigenvectors.as_ref().map(|v| {
            let n = v.ncols();
            Mat::from_fn(v.nrows(), n, |i, j| v[(i, n - 1 - j)])
        });
        Ok(EmpiricalSpectrum {
            eigenvalues,
            eigenvectors,
            kind: SpectrumKind::Manova,
        })
    }
}

pub(crate) fn gram(m: MatRef<'_, Complex64>) -> Mat<Complex64> {
    m * m.adjoint()
}

/// Hermitian eigendecomposition with the residual check applied to every pair.
pub(crate) fn hermitian_eigen(a: MatRef<'_, Complex64>) -> Result<(Vec<f64>, Mat<Complex64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values: Vec<f64> = evd.S().column_vector().iter().map(|s| s.re).collect();
    let vectors = evd.U().to_owned();
    check_eigenpairs(a, vectors.as_ref(), &values)?;
    Ok((values, vectors))
}

fn hermitian_eigenvalues(a: MatRef<'_, Complex64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

fn check_eigenpairs(a: MatRef<'_, Complex64>, u: MatRef<'_, Complex64>, s: &[f64]) -> Result<()> {
    let scale = s.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let au = a * u;
    for (j, &mu) in s.iter().enumerate() {
        let r: f64 = (0..a.nrows())
            .map(|i| (au[(i, j)] - u[(i, j)] * mu).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if r > EIGEN_RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Eigensolver(format!(
                "eigenpair {j} residual {r:e} exceeds {EIGEN_RESIDUAL_TOL:e} * {scale:e}"
            )));
        }
    }
    Ok(())
}

fn condition(values: &[f64]) -> f64 {
    let lo = values.first().copied().unwrap_or(0.0);
    let hi = values.last().copied().unwrap_or(0.0);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `U diag(f(s)) U*`.
fn spectral_function(values: &[f64], vectors: MatRef<'_, Complex64>, f: impl Fn(f64) -> f64) -> Mat<Complex64> {
    let scaled = Mat::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] * f(values[j]));
    &scaled * vectors.adjoint()
}

fn positive_definite_eigen(a: MatRef<'_, Complex64>) -> Result<(Vec<f64>, Mat<Complex64>)> {
    let (values, vectors) = hermitian_eigen(a)?;
    let cond = condition(&values);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular { condition: cond });
    }
    Ok((values, vectors))
}

/// Ascending eigenvalues of `YY*`, after the singularity check.
pub fn y_gram_eigenvalues(pair: &MatrixPair) -> Result<Vec<f64>> {
    let w = gram(pair.y.as_ref());
    let values = hermitian_eigenvalues(w.as_ref())?;
    let cond = condition(&values);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular { condition: cond });
    }
    Ok(values)
}

/// Spectrum of `(YY*)^{-1/2} XX* (YY*)^{-1/2}` using the Hermitian square root.
pub fn product_spectrum(pair: &MatrixPair, want_vectors: bool) -> Result<EmpiricalSpectrum> {
    let w = gram(pair.y.as_ref());
    let (w_values, w_vectors) = positive_definite_eigen(w.as_ref())?;
    let inv_sqrt = spectral_function(&w_values, w_vectors.as_ref(), |s| s.sqrt().recip());
    let s = gram(pair.x.as_ref());
    let product = &inv_sqrt * &s * &inv_sqrt;
    let (eigenvalues, eigenvectors) = if want_vectors {
        let (values, vectors) = hermitian_eigen(product.as_ref())?;
        (values, Some(vectors))
    } else {
        (hermitian_eigenvalues(product.as_ref())?, None)
    };
    Ok(EmpiricalSpectrum {
        eigenvalues,
        eigenvectors,
        kind: SpectrumKind::Product,
    })
}

/// Spectrum of `(YY*)^{1/2} (XX* + YY*)^{-1} (YY*)^{1/2}`, computed directly.
pub fn manova_spectrum(pair: &MatrixPair) -> Result<EmpiricalSpectrum> {
    let w = gram(pair.y.as_ref());
    let (w_values, w_vectors) = positive_definite_eigen(w.as_ref())?;
    let sqrt_w = spectral_function(&w_values, w_vectors.as_ref(), f64::sqrt);
    let total = gram(pair.x.as_ref()) + &w;
    let (t_values, t_vectors) = positive_definite_eigen(total.as_ref())?;
    let total_inv = spectral_function(&t_values, t_vectors.as_ref(), f64::recip);
    let manova = &sqrt_w * &total_inv * &sqrt_w;
    Ok(EmpiricalSpectrum {
        eigenvalues: hermitian_eigenvalues(manova.as_ref())?,
        eigenvectors: None,
        kind: SpectrumKind::Manova,
    })
}

const DUMP_MAGIC: &[u8; 4] = b"MNVA";
pub const DUMP_VERSION: u16 = 1;
pub const DUMP_HEADER_LEN: usize = 32;

fn io_err(e: std::io::Error) -> Error {
    Error::Validation(format!("dump i/o: {e}"))
}

/// Binary dump of a pair: 32-byte little-endian header
/// (`"MNVA"`, version u16, field tag u16, n u32, cols_x u32, cols_y u32,
/// trial u32, seed u64) followed by `X` then `Y` row-major as f64, with
/// `(re, im)` per entry for complex pairs and `re` only for real ones.
pub fn write_dump(pair: &MatrixPair, mut out: impl Write) -> Result<()> {
    let mut header = Vec::with_capacity(DUMP_HEADER_LEN);
    header.extend_from_slice(DUMP_MAGIC);
    header.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    header.extend_from_slice(&pair.field.tag().to_le_bytes());
    for v in [pair.n(), pair.x.ncols(), pair.y.ncols()] {
        header.extend_from_slice(&(v as u32).to_le_bytes());
    }
    header.extend_from_slice(&(pair.trial_index as u32).to_le_bytes());
    header.extend_from_slice(&pair.master_seed.to_le_bytes());
    debug_assert_eq!(header.len(), DUMP_HEADER_LEN);
    out.write_all(&header).map_err(io_err)?;
    for m in [&pair.x, &pair.y] {
        let mut buf = Vec::with_capacity(m.nrows() * m.ncols() * 16);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                buf.extend_from_slice(&v.re.to_le_bytes());
                if pair.field == Field::Complex {
                    buf.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        out.write_all(&buf).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_dump(mut input: impl Read) -> Result<MatrixPair> {
    let mut header = [0u8; DUMP_HEADER_LEN];
    input.read_exact(&mut header).map_err(io_err)?;
    if &header[0..4] != DUMP_MAGIC {
        return Err(Error::Validation("not a MNVA dump".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([header[o], header[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    let version = u16_at(4);
    if version != DUMP_VERSION {
        return Err(Error::Validation(format!("unsupported dump version {version}")));
    }
    let field = match u16_at(6) {
        0 => Field::Real,
        1 => Field::Complex,
        t => return Err(Error::Validation(format!("unknown field tag {t}"))),
    };
    let (n, cols_x, cols_y) = (u32_at(8), u32_at(12), u32_at(16));
    let trial_index = u32_at(20) as u64;
    let master_seed = u64::from_le_bytes(header[24..32].try_into().unwrap());
    let mut read_matrix = |cols: usize| -> Result<Mat<Complex64>> {
        let per = if field == Field::Complex { 16 } else { 8 };
        let mut buf = vec![0u8; n * cols * per];
        input.read_exact(&mut buf).map_err(io_err)?;
        let at = |k: usize| f64::from_le_bytes(buf[8 * k..8 * k + 8].try_into().unwrap());
        Ok(Mat::from_fn(n, cols, |i, j| {
            let k = i * cols + j;
            match field {
                Field::Complex => Complex64::new(at(2 * k), at(2 * k + 1)),
                Field::Real => Complex64::new(at(k), 0.0),
            }
        }))
    };
    let x = read_matrix(cols_x)?;
    let y = read_matrix(cols_y)?;
    Ok(MatrixPair {
        x,
        y,
        field,
        master_seed,
        trial_index,
    })
}
