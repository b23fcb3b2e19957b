//! Self-consistent equation for the Stieltjes transform of the product matrix
//! `(YY*)^{-1/2} XX* (YY*)^{-1/2}`.
//!
//! Writing the product matrix as `(1/N) (bT)^{1/2} X X* (bT)^{1/2}` with
//! `N = b n` and `T = (YY*/n)^{-1}`, its limiting transform is the unique
//! solution in the upper half-plane of
//!
//! ```text
//! m = int f_Inv(l) / (l (b - 1 - z m) - z) dl
//! ```
//!
//! which is the Silverstein-Bai equation with population `t = b l` and
//! dimension ratio `1/b`. The integral runs over the cosine-spaced rule of
//! [`crate::quadrature`].

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::laws::{inv_wishart_density_simplified, inv_wishart_edges, ModelParams};
use crate::quadrature::{DiscreteMeasure, EdgeRule, DEFAULT_PANELS};

/// How many times damping is halved at one point before giving up.
pub const MAX_DAMPING_REDUCTIONS: u32 = 6;

/// Number of quadrature refinements kept ready (256 * 2^6 panels at most).
const REFINEMENT_LEVELS: usize = 7;

/// `|1 + t m_|` below this at a node is reported as a singularity.
pub const SINGULARITY_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Bound on the equation residual `|m - F(m)|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step `d` in `m <- (1 - d) m + d F(m)`.
    pub damping: f64,
    /// Geometric steps in `eta` from 1 down to the target.
    pub continuation_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 0.5,
            continuation_steps: 32,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Validation(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Validation(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Validation("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Companion transform `-(1/z)(1 - 1/ratio) + m / ratio`, relating the
/// spectra of `A A*` and `A* A` when `A` has `ratio` times as many columns as rows.
pub fn underbar_transform(ratio: f64, z: Complex64, m: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Domain("underbar transform is undefined at z = 0".into()));
    }
    Ok(-(1.0 - 1.0 / ratio) / z + m / ratio)
}

/// Converged solve at one spectral point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solution {
    pub m: Complex64,
    pub residual: f64,
    pub iterations: usize,
    /// Quadrature panels of the rule the residual was checked on.
    pub panels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityDiagnostics {
    /// `(1/b) int A(l)^2 f_Inv(l) dl`.
    pub k_hat: Complex64,
    /// `(1/b) int |A(l)|^2 f_Inv(l) dl`; at most 1 at a true solution.
    pub b: f64,
    /// `|1 - k_hat|`.
    pub margin: f64,
}

/// Solver for one parameter pair. Quadrature tables are built once and shared
/// read-only, so a solver can be used from many threads.
#[derive(Debug, Clone)]
pub struct ProductSolver {
    params: ModelParams,
    cfg: SolverConfig,
    levels: Vec<DiscreteMeasure>,
}

impl ProductSolver {
    pub fn new(params: ModelParams, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let a = params.a();
        let (lo, hi) = inv_wishart_edges(a);
        let mut rule = EdgeRule::new(lo, hi, DEFAULT_PANELS);
        let mut levels = Vec::with_capacity(REFINEMENT_LEVELS);
        for _ in 0..REFINEMENT_LEVELS {
            levels.push(rule.discretize(|x| inv_wishart_density_simplified(a, x)));
            rule = rule.refined();
        }
        Ok(Self { params, cfg, levels })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn rhs(&self, level: usize, z: Complex64, m: Complex64) -> Complex64 {
        let shift = self.params.b() - 1.0 - z * m;
        self.levels[level]
            .iter()
            .map(|(l, w)| w / (l * shift - z))
            .sum()
    }

    /// Right-hand side of the equation on the base rule.
    pub fn map(&self, z: Complex64, m: Complex64) -> Complex64 {
        self.rhs(0, z, m)
    }

    /// `|m - F(m)|` on the finest rule.
    pub fn residual(&self, z: Complex64, m: Complex64) -> f64 {
        (m - self.rhs(REFINEMENT_LEVELS - 1, z, m)).norm()
    }

    /// Damped fixed-point iteration at `z` starting from `guess`.
    pub fn solve_from(&self, z: Complex64, guess: Complex64) -> Result<Solution> {
        if !(z.im > 0.0) || !z.is_finite() {
            return Err(Error::Domain(format!("solver needs Im z > 0, got {z}")));
        }
        let mut m = if guess.im > 0.0 && guess.is_finite() {
            guess
        } else {
            -1.0 / z
        };
        let mut damping = self.cfg.damping;
        let mut reductions = 0u32;
        let mut iterations = 0usize;
        let mut level = 0usize;
        loop {
            let mut image = self.rhs(level, z, m);
            let mut residual = (m - image).norm();
            while residual > self.cfg.tol {
                if iterations >= self.cfg.max_iter {
                    return Err(Error::NonConvergence {
                        iterations,
                        residual,
                    });
                }
                iterations += 1;
                let next = m * (1.0 - damping) + image * damping;
                if !(next.im > 0.0) || !next.is_finite() {
                    reductions += 1;
                    if reductions > MAX_DAMPING_REDUCTIONS {
                        return Err(Error::LeftUpperHalfPlane {
                            re: z.re,
                            im: z.im,
                            retries: reductions - 1,
                        });
                    }
                    damping *= 0.5;
                    continue;
                }
                m = next;
                image = self.rhs(level, z, m);
                residual = (m - image).norm();
            }
            if level + 1 == REFINEMENT_LEVELS {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: (m - self.rhs(level, z, m)).norm(),
                });
            }
            // Accept once the next rule agrees with this one at the fixed point.
            let finer = self.rhs(level + 1, z, m);
            let finer_residual = (m - finer).norm();
            if finer_residual <= self.cfg.tol {
                return Ok(Solution {
                    m,
                    residual: finer_residual,
                    iterations,
                    panels: self.levels[level + 1].points.len() + 1,
                });
            }
            level += 1;
        }
    }

    /// Solve at `z`, approaching small `Im z` by geometric continuation from
    /// `eta = 1` and reusing each solution as the next initial guess.
    pub fn solve(&self, z: Complex64) -> Result<Solution> {
        if !(z.im > 0.0) || !z.is_finite() {
            return Err(Error::Domain(format!("solver needs Im z > 0, got {z}")));
        }
        if z.im >= 1.0 || self.cfg.continuation_steps == 0 {
            return self.solve_from(z, -1.0 / z);
        }
        let start = Complex64::new(z.re, 1.0);
        let mut sol = self.solve_from(start, -1.0 / start)?;
        let steps = self.cfg.continuation_steps;
        let ratio = z.im.powf(1.0 / steps as f64);
        let mut eta = 1.0;
        for step in 1..=steps {
            eta = if step == steps { z.im } else { eta * ratio };
            sol = self.solve_from(Complex64::new(z.re, eta), sol.m)?;
        }
        Ok(sol)
    }

    /// Solve anywhere off the real axis using `m(conj z) = conj m(z)`.
    pub fn solve_any(&self, z: Complex64) -> Result<Complex64> {
        if z.im > 0.0 {
            Ok(self.solve(z)?.m)
        } else if z.im < 0.0 {
            Ok(self.solve(z.conj())?.m.conj())
        } else {
            Err(Error::Domain(format!("solver needs Im z != 0, got {z}")))
        }
    }

    /// `K_hat`, `B` and `|1 - K_hat|` at `(z, m_p)`.
    pub fn stability(&self, z: Complex64, m_p: Complex64) -> Result<StabilityDiagnostics> {
        let b = self.params.b();
        let under = underbar_transform(b, z, m_p)?;
        let mut k_hat = Complex64::new(0.0, 0.0);
        let mut b_sum = 0.0;
        for (l, w) in self.levels[REFINEMENT_LEVELS - 1].iter() {
            let t = b * l;
            let denom = 1.0 + t * under;
            if denom.norm() < SINGULARITY_FLOOR {
                return Err(Error::Singularity(denom.norm()));
            }
            let a_val = t * under / denom;
            k_hat += a_val * a_val * w;
            b_sum += a_val.norm_sqr() * w;
        }
        let k_hat = k_hat / b;
        Ok(StabilityDiagnostics {
            k_hat,
            b: b_sum / b,
            margin: (1.0 - k_hat).norm(),
        })
    }
}

/// One-shot solve with continuation; builds the quadrature tables each call.
pub fn solve_product_stieltjes(
    params: &ModelParams,
    z: Complex64,
    cfg: &SolverConfig,
) -> Result<Complex64> {
    Ok(ProductSolver::new(*params, *cfg)?.solve(z)?.m)
}

pub fn stability_margin(
    params: &ModelParams,
    z: Complex64,
    m_p: Complex64,
) -> Result<StabilityDiagnostics> {
    ProductSolver::new(*params, SolverConfig::default())?.stability(z, m_p)
}

fn reflect(
    w: Complex64,
    evaluator: &impl Fn(Complex64) -> Result<Complex64>,
) -> Result<Complex64> {
    if w.im < 0.0 {
        Ok(evaluator(w.conj())?.conj())
    } else {
        evaluator(w)
    }
}

/// MANOVA transform from a product-side evaluator:
/// `m_M(z) = -(m_p(z') + z) / z^2` with `z' = 1/z - 1`. The evaluator is only
/// queried in the upper half-plane.
pub fn map_to_manova(
    z: Complex64,
    product_transform_at: impl Fn(Complex64) -> Result<Complex64>,
) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Domain("map_to_manova is undefined at z = 0".into()));
    }
    let zp = 1.0 / z - 1.0;
    let mp = reflect(zp, &product_transform_at)?;
    Ok(-(mp + z) / (z * z))
}

/// Inverse of [`map_to_manova`]: `m_p(z') = -z - z^2 m_M(z)` with `z = 1/(1 + z')`.
pub fn map_to_product(
    z_prime: Complex64,
    manova_transform_at: impl Fn(Complex64) -> Result<Complex64>,
) -> Result<Complex64> {
    let shifted = z_prime + 1.0;
    if shifted == Complex64::new(0.0, 0.0) {
        return Err(Error::Domain("map_to_product is undefined at z' = -1".into()));
    }
    let z = 1.0 / shifted;
    let mm = reflect(z, &manova_transform_at)?;
    Ok(-z - z * z * mm)
}
