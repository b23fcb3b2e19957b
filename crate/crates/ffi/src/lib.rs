//! C ABI for the MANOVA spectral-law library.
//!
//! Every function returns a [`ManovaStatus`]. On failure the message is kept
//! per thread and can be read with [`manova_last_error`]. Solvers and sampled
//! spectra are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use manova::ensembles::{product_spectrum, sample_pair, EnsembleSpec, EntryDistribution};
use manova::laws::{self, Law, ModelParams};
use manova::selfconsistent::{ProductSolver, SolverConfig};
use manova::{Complex64, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManovaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    Domain = 3,
    NonConvergence = 4,
    LeftUpperHalfPlane = 5,
    Singular = 6,
    Eigensolver = 7,
    Singularity = 8,
    EmptyWindow = 9,
    Validation = 10,
    ExperimentThreshold = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&Error> for ManovaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParams(_) => ManovaStatus::InvalidParams,
            Error::Domain(_) => ManovaStatus::Domain,
            Error::NonConvergence { .. } => ManovaStatus::NonConvergence,
            Error::LeftUpperHalfPlane { .. } => ManovaStatus::LeftUpperHalfPlane,
            Error::Singular { .. } => ManovaStatus::Singular,
            Error::Eigensolver(_) => ManovaStatus::Eigensolver,
            Error::Singularity(_) => ManovaStatus::Singularity,
            Error::EmptyWindow { .. } => ManovaStatus::EmptyWindow,
            Error::Validation(_) => ManovaStatus::Validation,
            Error::ExperimentThreshold { .. } => ManovaStatus::ExperimentThreshold,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManovaLaw {
    Manova = 0,
    Product = 1,
    MarchenkoPastur = 2,
    InverseWishart = 3,
}

impl From<ManovaLaw> for Law {
    fn from(l: ManovaLaw) -> Self {
        match l {
            ManovaLaw::Manova => Law::Manova,
            ManovaLaw::Product => Law::Product,
            ManovaLaw::MarchenkoPastur => Law::MarchenkoPastur,
            ManovaLaw::InverseWishart => Law::InverseWishart,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManovaDistribution {
    ComplexGaussian = 0,
    RealGaussian = 1,
    Rademacher = 2,
    Uniform = 3,
    Laplace = 4,
}

impl From<ManovaDistribution> for EntryDistribution {
    fn from(d: ManovaDistribution) -> Self {
        match d {
            ManovaDistribution::ComplexGaussian => EntryDistribution::ComplexGaussian,
            ManovaDistribution::RealGaussian => EntryDistribution::RealGaussian,
            ManovaDistribution::Rademacher => EntryDistribution::Rademacher,
            ManovaDistribution::Uniform => EntryDistribution::Uniform,
            ManovaDistribution::Laplace => EntryDistribution::Laplace,
        }
    }
}

/// Which coordinates a spectrum's eigenvalues are reported in.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManovaCoordinates {
    Manova = 0,
    Product = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ManovaComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ManovaComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ManovaEdges {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub a_minus: f64,
    pub a_plus: f64,
}

/// Opaque fixed-point solver for the product-matrix Stieltjes transform.
pub struct ManovaSolver {
    inner: ProductSolver,
}

/// Opaque sampled spectrum, held in both coordinate systems.
pub struct ManovaSpectrum {
    manova: Vec<f64>,
    product: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: ManovaStatus, msg: impl Into<String>) -> ManovaStatus {
    set_last_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), ManovaStatus>) -> ManovaStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ManovaStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(ManovaStatus::Panic, "internal panic"),
    }
}

fn check<T>(r: manova::Result<T>) -> Result<T, ManovaStatus> {
    r.map_err(|e| fail(ManovaStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), ManovaStatus> {
    if p.is_null() {
        Err(fail(ManovaStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn manova_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Support edges of the MANOVA, product and inverse-Wishart laws.
///
/// # Safety
/// `out` must point to writable memory for one `ManovaEdges`.
#[no_mangle]
pub unsafe extern "C" fn manova_support_edges(a: f64, b: f64, out: *mut ManovaEdges) -> ManovaStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = check(ModelParams::new(a, b))?;
        let e = laws::support_edges(&p);
        *out = ManovaEdges {
            lambda_minus: e.lambda_minus,
            lambda_plus: e.lambda_plus,
            mu_minus: e.mu_minus,
            mu_plus: e.mu_plus,
            a_minus: e.a_minus,
            a_plus: e.a_plus,
        };
        Ok(())
    })
}

/// Limiting density of `law` at `x`.
///
/// # Safety
/// `out` must point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn manova_density(law: ManovaLaw, a: f64, b: f64, x: f64, out: *mut f64) -> ManovaStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = check(ModelParams::new(a, b))?;
        *out = Law::from(law).density(&p, x);
        Ok(())
    })
}

/// Closed-form MANOVA Stieltjes transform at `re + i im`, `im != 0`.
///
/// # Safety
/// `out` must point to writable memory for one `ManovaComplex`.
#[no_mangle]
pub unsafe extern "C" fn manova_stieltjes(a: f64, b: f64, re: f64, im: f64, out: *mut ManovaComplex) -> ManovaStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = check(ModelParams::new(a, b))?;
        *out = check(laws::manova_stieltjes(&p, Complex64::new(re, im)))?.into();
        Ok(())
    })
}

/// Create a solver. `tol <= 0` selects the default tolerance.
///
/// # Safety
/// `out` must point to writable memory for one pointer. On success it receives
/// a handle to be released with [`manova_solver_free`].
#[no_mangle]
pub unsafe extern "C" fn manova_solver_new(a: f64, b: f64, tol: f64, out: *mut *mut ManovaSolver) -> ManovaStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let p = check(ModelParams::new(a, b))?;
        let mut cfg = SolverConfig::default();
        if tol > 0.0 {
            cfg.tol = tol;
        }
        let inner = check(ProductSolver::new(p, cfg))?;
        *out = Box::into_raw(Box::new(ManovaSolver { inner }));
        Ok(())
    })
}

/// Product-matrix Stieltjes transform at `re + i im`, `im != 0`.
///
/// # Safety
/// `solver` must be a live handle from [`manova_solver_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn manova_solver_solve(
    solver: *const ManovaSolver,
    re: f64,
    im: f64,
    out: *mut ManovaComplex,
) -> ManovaStatus {
    guard(|| {
        non_null(solver, "solver")?;
        non_null(out, "out")?;
        *out = check((*solver).inner.solve_any(Complex64::new(re, im)))?.into();
        Ok(())
    })
}

/// Stability margin `1 - |K_hat|` at `re + i im`, `im > 0`.
///
/// # Safety
/// `solver` must be a live handle from [`manova_solver_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn manova_solver_stability_margin(
    solver: *const ManovaSolver,
    re: f64,
    im: f64,
    out: *mut f64,
) -> ManovaStatus {
    guard(|| {
        non_null(solver, "solver")?;
        non_null(out, "out")?;
        let s = &(*solver).inner;
        let z = Complex64::new(re, im);
        let m = check(s.solve(z))?.m;
        *out = check(s.stability(z, m))?.margin;
        Ok(())
    })
}

/// # Safety
/// `solver` must be null or a handle from [`manova_solver_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn manova_solver_free(solver: *mut ManovaSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Sample one `(X, Y)` pair and compute its spectrum.
///
/// # Safety
/// `out` must point to writable memory for one pointer. On success it receives
/// a handle to be released with [`manova_spectrum_free`].
#[no_mangle]
pub unsafe extern "C" fn manova_spectrum_sample(
    n: usize,
    a: f64,
    b: f64,
    dist: ManovaDistribution,
    master_seed: u64,
    trial_index: u64,
    out: *mut *mut ManovaSpectrum,
) -> ManovaStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let spec = EnsembleSpec {
            n,
            params: check(ModelParams::new(a, b))?,
            dist: dist.into(),
            master_seed,
            trial_index,
        };
        let pair = check(sample_pair(&spec))?;
        let mu = check(product_spectrum(&pair, false))?;
        let lambda = check(mu.to_manova())?;
        *out = Box::into_raw(Box::new(ManovaSpectrum {
            manova: lambda.eigenvalues,
            product: mu.eigenvalues,
        }));
        Ok(())
    })
}

/// Number of eigenvalues, or 0 for a null handle.
///
/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn manova_spectrum_len(spectrum: *const ManovaSpectrum) -> usize {
    if spectrum.is_null() {
        0
    } else {
        (*spectrum).manova.len()
    }
}

/// Copy the ascending eigenvalues into `buf`, which holds `len` doubles.
///
/// # Safety
/// `spectrum` must be a live handle; `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn manova_spectrum_eigenvalues(
    spectrum: *const ManovaSpectrum,
    coords: ManovaCoordinates,
    buf: *mut f64,
    len: usize,
) -> ManovaStatus {
    guard(|| {
        non_null(spectrum, "spectrum")?;
        non_null(buf, "buf")?;
        let s = &*spectrum;
        let values = match coords {
            ManovaCoordinates::Manova => &s.manova,
            ManovaCoordinates::Product => &s.product,
        };
        if len < values.len() {
            return Err(fail(
                ManovaStatus::BufferTooSmall,
                format!("buffer holds {len} values, need {}", values.len()),
            ));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        Ok(())
    })
}

/// Empirical Stieltjes transform of the spectrum at `re + i im`.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn manova_spectrum_stieltjes(
    spectrum: *const ManovaSpectrum,
    coords: ManovaCoordinates,
    re: f64,
    im: f64,
    out: *mut ManovaComplex,
) -> ManovaStatus {
    guard(|| {
        non_null(spectrum, "spectrum")?;
        non_null(out, "out")?;
        let s = &*spectrum;
        let values = match coords {
            ManovaCoordinates::Manova => &s.manova,
            ManovaCoordinates::Product => &s.product,
        };
        *out = check(manova::empirics::stieltjes_of(values, Complex64::new(re, im)))?.into();
        Ok(())
    })
}

/// # Safety
/// `spectrum` must be null or a handle from [`manova_spectrum_sample`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn manova_spectrum_free(spectrum: *mut ManovaSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}
