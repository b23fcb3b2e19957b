//! Quadrature for densities with square-root behaviour at both ends of a
//! compact support.
//!
//! The substitution `x = mid - half * cos(theta)` turns `sqrt((x - lo)(hi - x))`
//! into `half * sin(theta)`. For the densities in this crate the transformed
//! integrand is a smooth even function of `theta`, so the trapezoidal rule in
//! `theta` converges geometrically.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Node count used before any doubling.
pub const DEFAULT_PANELS: usize = 256;

/// Doubling stops here; anything finer is treated as non-convergence.
pub const MAX_PANELS: usize = 1 << 20;

/// Cosine-spaced rule on `[lo, hi]` with the Jacobian folded into the weights,
/// so `sum(w_j * f(x_j))` approximates the integral of `f` over `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl EdgeRule {
    /// Trapezoidal rule in `theta` with `panels` subintervals. The two end
    /// nodes have zero weight and are dropped.
    pub fn new(lo: f64, hi: f64, panels: usize) -> Self {
        assert!(hi > lo, "EdgeRule requires lo < hi");
        assert!(panels >= 2, "EdgeRule requires at least two panels");
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let step = std::f64::consts::PI / panels as f64;
        let (nodes, weights) = (1..panels)
            .map(|j| {
                let theta = j as f64 * step;
                (mid - half * theta.cos(), step * half * theta.sin())
            })
            .unzip();
        Self {
            lo,
            hi,
            nodes,
            weights,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The rule with twice as many panels. Every current node is kept.
    pub fn refined(&self) -> Self {
        Self::new(self.lo, self.hi, 2 * (self.nodes.len() + 1))
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn integrate_complex(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .sum()
    }

    /// Discretize a density: returns `(x_j, w_j * density(x_j))`.
    pub fn discretize(&self, density: impl Fn(f64) -> f64) -> DiscreteMeasure {
        let (points, masses) = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (x, w * density(x)))
            .unzip();
        DiscreteMeasure { points, masses }
    }
}

/// Integrate `f` over `[lo, hi]` starting from [`DEFAULT_PANELS`] and doubling
/// until two successive estimates differ by less than `tol`.
pub fn integrate_edges(lo: f64, hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut rule = EdgeRule::new(lo, hi, DEFAULT_PANELS);
    let mut previous = rule.integrate(&f);
    loop {
        rule = rule.refined();
        let current = rule.integrate(&f);
        if (current - previous).abs() < tol {
            return Ok(current);
        }
        if rule.len() + 1 >= MAX_PANELS {
            return Err(Error::NonConvergence {
                iterations: rule.len() + 1,
                residual: (current - previous).abs(),
            });
        }
        previous = current;
    }
}

/// Point masses approximating a density, as produced by [`EdgeRule::discretize`].
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.masses.iter().copied())
    }
}

const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

fn gauss_legendre(from: f64, to: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let c = 0.5 * (from + to);
    let h = 0.5 * (to - from);
    GAUSS_LEGENDRE_8
        .iter()
        .map(|&(x, w)| w * f(c + h * x))
        .sum::<f64>()
        * h
}

/// Cumulative distribution table for a density supported on `[lo, hi]`,
/// tabulated in the angle variable and inverted by bisection.
///
/// The table is immutable once built and can be shared across threads.
#[derive(Debug, Clone)]
pub struct CdfTable<F> {
    lo: f64,
    hi: f64,
    density: F,
    step: f64,
    cumulative: Vec<f64>,
}

/// Bisection stops once the CDF is within this of the target...
pub const QUANTILE_MASS_TOL: f64 = 1e-10;
/// ...or the bracket is narrower than this (in `x`).
pub const QUANTILE_WIDTH_TOL: f64 = 1e-12;

impl<F: Fn(f64) -> f64> CdfTable<F> {
    pub fn new(lo: f64, hi: f64, segments: usize, density: F) -> Self {
        assert!(hi > lo && segments >= 1);
        let step = std::f64::consts::PI / segments as f64;
        let mut table = Self {
            lo,
            hi,
            density,
            step,
            cumulative: Vec::with_capacity(segments + 1),
        };
        let mut acc = 0.0;
        table.cumulative.push(0.0);
        for s in 0..segments {
            let from = s as f64 * step;
            acc += gauss_legendre(from, from + step, &|t| table.angular(t));
            table.cumulative.push(acc);
        }
        table
    }

    fn angular(&self, theta: f64) -> f64 {
        let mid = 0.5 * (self.lo + self.hi);
        let half = 0.5 * (self.hi - self.lo);
        (self.density)(mid - half * theta.cos()) * half * theta.sin()
    }

    fn x_of(&self, theta: f64) -> f64 {
        0.5 * (self.lo + self.hi) - 0.5 * (self.hi - self.lo) * theta.cos()
    }

    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().expect("table is never empty")
    }

    fn cdf_at_angle(&self, theta: f64) -> f64 {
        let segments = self.cumulative.len() - 1;
        let seg = ((theta / self.step) as usize).min(segments - 1);
        let from = seg as f64 * self.step;
        self.cumulative[seg] + gauss_legendre(from, theta, &|t| self.angular(t))
    }

    /// Mass of the density on `[lo, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return self.total_mass();
        }
        let half = 0.5 * (self.hi - self.lo);
        let mid = 0.5 * (self.lo + self.hi);
        let theta = ((mid - x) / half).clamp(-1.0, 1.0).acos();
        self.cdf_at_angle(theta)
    }

    /// Smallest `x` with `cdf(x) = p`, found by bisection to
    /// [`QUANTILE_MASS_TOL`] in mass or [`QUANTILE_WIDTH_TOL`] in `x`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.lo;
        }
        if p >= self.total_mass() {
            return self.hi;
        }
        // Bracket from the table, then bisect inside one segment.
        let seg = self.cumulative.partition_point(|&c| c < p).saturating_sub(1);
        let mut left = seg as f64 * self.step;
        let mut right = (left + self.step).min(std::f64::consts::PI);
        loop {
            let mid = 0.5 * (left + right);
            let value = self.cdf_at_angle(mid);
            if (value - p).abs() <= QUANTILE_MASS_TOL
                || (self.x_of(right) - self.x_of(left)) <= QUANTILE_WIDTH_TOL
            {
                return self.x_of(mid);
            }
            if value < p {
                left = mid;
            } else {
                right = mid;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn semicircle(x: f64) -> f64 {
        2.0 / std::f64::consts::PI * (1.0 - x * x).max(0.0).sqrt()
    }

    #[test]
    fn semicircle_mass_is_one() {
        let mass = integrate_edges(-1.0, 1.0, 1e-12, semicircle).unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_keeps_nodes() {
        let rule = EdgeRule::new(0.0, 2.0, 8);
        let finer = rule.refined();
        assert_eq!(finer.len(), 15);
        for x in rule.nodes() {
            assert!(finer.nodes().iter().any(|y| (x - y).abs() < 1e-15));
        }
    }

    #[test]
    fn square_root_weight_is_exact_for_polynomials() {
        let rule = EdgeRule::new(-1.0, 1.0, 64);
        let moment = rule.integrate(|x| x * x * (1.0 - x * x).sqrt());
        assert!((moment - std::f64::consts::PI / 8.0).abs() < 1e-13);
    }

    #[test]
    fn semicircle_quantiles() {
        let table = CdfTable::new(-1.0, 1.0, 128, semicircle);
        assert!((table.total_mass() - 1.0).abs() < 1e-13);
        assert!(table.quantile(0.5).abs() < 1e-10);
        // F(x) = 1/2 + (x sqrt(1-x^2) + asin x)/pi
        let x: f64 = 0.3;
        let exact = 0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / std::f64::consts::PI;
        assert!((table.cdf(x) - exact).abs() < 1e-13);
        assert!((table.quantile(exact) - x).abs() < 1e-9);
        assert_eq!(table.quantile(1.0), 1.0);
        assert_eq!(table.quantile(0.0), -1.0);
    }
}
