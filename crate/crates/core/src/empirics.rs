//! Statistics of a single sampled spectrum.

use num_complex::Complex64;
use serde::Serialize;

use crate::ensembles::{gram, y_gram_eigenvalues, EmpiricalSpectrum, MatrixPair};
use crate::error::{Error, Result};
use crate::laws::{classical_locations, inv_wishart_edges};

/// `(1/n) sum_k 1 / (lambda_k - z)`.
pub fn empirical_stieltjes(spectrum: &EmpiricalSpectrum, z: Complex64) -> Result<Complex64> {
    stieltjes_of(&spectrum.eigenvalues, z)
}

/// Same as [`empirical_stieltjes`] on a bare slice of eigenvalues.
pub fn stieltjes_of(eigenvalues: &[f64], z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::Domain(format!(
            "empirical Stieltjes transform needs Im z != 0, got {z}"
        )));
    }
    if eigenvalues.is_empty() {
        return Err(Error::Validation("empty spectrum".into()));
    }
    let sum: Complex64 = eigenvalues.iter().map(|&l| 1.0 / (l - z)).sum();
    Ok(sum / eigenvalues.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountingResult {
    pub e: f64,
    pub eta: f64,
    pub count: usize,
    /// `count / (n eta)`.
    pub normalized: f64,
}

/// Eigenvalues in the closed interval `[E - eta/2, E + eta/2]`.
pub fn counting(spectrum: &EmpiricalSpectrum, e: f64, eta: f64) -> Result<CountingResult> {
    if !(eta > 0.0) {
        return Err(Error::Validation(format!("eta must be > 0, got {eta}")));
    }
    let (lo, hi) = (e - 0.5 * eta, e + 0.5 * eta);
    let values = &spectrum.eigenvalues;
    // Spectra are stored ascending.
    let count = values.partition_point(|&l| l <= hi) - values.partition_point(|&l| l < lo);
    Ok(CountingResult {
        e,
        eta,
        count,
        normalized: count as f64 / (values.len() as f64 * eta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelocResult {
    /// `sqrt(n) * max |v_i|` over eigenvectors with eigenvalue strictly inside the window.
    pub statistic: f64,
    /// Eigenvectors that entered the maximum.
    pub vectors_used: usize,
    /// True when no eigenvalue fell inside the window; the statistic is then 0.
    pub empty_window: bool,
}

pub fn deloc_statistic(spectrum: &EmpiricalSpectrum, window: (f64, f64)) -> Result<DelocResult> {
    let vectors = spectrum
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::Validation("delocalization needs eigenvectors".into()))?;
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(Error::Validation(format!("empty window [{lo}, {hi}]")));
    }
    let n = vectors.nrows();
    let mut worst = 0.0f64;
    let mut used = 0;
    for (j, &mu) in spectrum.eigenvalues.iter().enumerate() {
        if mu > lo && mu < hi {
            used += 1;
            for i in 0..n {
                worst = worst.max(vectors[(i, j)].norm());
            }
        }
    }
    Ok(DelocResult {
        statistic: (n as f64).sqrt() * worst,
        vectors_used: used,
        empty_window: used == 0,
    })
}

/// `(1/n) sum_k |t_k - tau_k|` for two ascending sequences of equal length.
pub fn rigidity_against(t: &[f64], tau: &[f64]) -> Result<f64> {
    if t.len() != tau.len() || t.is_empty() {
        return Err(Error::Validation(format!(
            "rigidity needs equal non-empty lengths, got {} and {}",
            t.len(),
            tau.len()
        )));
    }
    if !tau.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Validation(
            "classical locations must be strictly increasing".into(),
        ));
    }
    Ok(t.iter().zip(tau).map(|(a, b)| (a - b).abs()).sum::<f64>() / t.len() as f64)
}

/// Ascending eigenvalues of `T = (YY*/n)^{-1}`.
pub fn population_eigenvalues(pair: &MatrixPair) -> Result<Vec<f64>> {
    let n = pair.n() as f64;
    Ok(y_gram_eigenvalues(pair)?.iter().rev().map(|w| n / w).collect())
}

/// Mean distance of the eigenvalues of `T` to the classical locations of the
/// inverse-Wishart law with ratio `a`.
pub fn rigidity_deviation(pair: &MatrixPair, a: f64) -> Result<f64> {
    let t = population_eigenvalues(pair)?;
    let tau = classical_locations(a, t.len())?;
    rigidity_against(&t, &tau)
}

/// Fixed constant in the `T` bounds `(1-c) a_- <= T <= (1+c) a_+`.
pub const DEFAULT_T_SLACK: f64 = 0.5;

/// Measured quantities behind the typical-event checks, with one flag per event.
///
/// The operator-norm bound is checked on the full `(1/n) XX*` rather than on
/// every leave-one-column-out matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventReport {
    pub column_norm_ok: bool,
    pub op_norm_ok: bool,
    pub t_bounds_ok: bool,
    /// Extremes of `||x_j||^2 / n` over the columns of `X`.
    pub column_norm_min: f64,
    pub column_norm_max: f64,
    /// `||(1/n) XX*||` and its bounds `(1 - b^{-1/2})^2` and `4 b`.
    pub op_norm: f64,
    pub op_norm_lower: f64,
    pub op_norm_upper: f64,
    /// Extreme eigenvalues of `T` and the allowed range.
    pub t_min: f64,
    pub t_max: f64,
    pub t_lower: f64,
    pub t_upper: f64,
}

/// Ratios are read off the pair as `cols / n`.
pub fn sanity_events(pair: &MatrixPair) -> EventReport {
    sanity_events_with(pair, DEFAULT_T_SLACK)
}

pub fn sanity_events_with(pair: &MatrixPair, slack: f64) -> EventReport {
    let n = pair.n() as f64;
    let a = pair.y.ncols() as f64 / n;
    let b = pair.x.ncols() as f64 / n;
    let (mut col_min, mut col_max) = (f64::INFINITY, 0.0f64);
    for j in 0..pair.x.ncols() {
        let norm: f64 = (0..pair.x.nrows()).map(|i| pair.x[(i, j)].norm_sqr()).sum::<f64>() / n;
        col_min = col_min.min(norm);
        col_max = col_max.max(norm);
    }
    let s = gram(pair.x.as_ref());
    let op_norm = s
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .ok()
        .and_then(|v| v.last().copied())
        .map_or(f64::NAN, |v| v / n);
    let op_norm_lower = (1.0 - b.sqrt().recip()).powi(2);
    let op_norm_upper = 4.0 * b;

    let (a_minus, a_plus) = inv_wishart_edges(a);
    let t_lower = (1.0 - slack) * a_minus;
    let t_upper = (1.0 + slack) * a_plus;
    let (t_min, t_max) = match population_eigenvalues(pair) {
        Ok(t) => (t[0], t[t.len() - 1]),
        Err(_) => (f64::NAN, f64::NAN),
    };
    EventReport {
        column_norm_ok: col_min >= 0.5 && col_max <= 2.0,
        op_norm_ok: op_norm >= op_norm_lower && op_norm < op_norm_upper,
        t_bounds_ok: t_min >= t_lower && t_max <= t_upper,
        column_norm_min: col_min,
        column_norm_max: col_max,
        op_norm,
        op_norm_lower,
        op_norm_upper,
        t_min,
        t_max,
        t_lower,
        t_upper,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{product_spectrum, sample_pair, EnsembleSpec, EntryDistribution, SpectrumKind};
    use crate::laws::ModelParams;
    use faer::Mat;

    fn spectrum(values: &[f64]) -> EmpiricalSpectrum {
        EmpiricalSpectrum {
            eigenvalues: values.to_vec(),
            eigenvectors: None,
            kind: SpectrumKind::Manova,
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn stieltjes_single_point() {
        let m = empirical_stieltjes(&spectrum(&[0.5]), c(0.0, 1.0)).unwrap();
        assert!((m - c(0.4, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn stieltjes_two_points() {
        let m = empirical_stieltjes(&spectrum(&[0.25, 0.75]), c(0.5, 1.0)).unwrap();
        assert!((m - c(0.0, 16.0 / 17.0)).norm() < 1e-15);
    }

    #[test]
    fn stieltjes_reflection_and_domain() {
        let s = spectrum(&[0.1, 0.3, 0.9]);
        let z = c(0.4, 0.05);
        let up = empirical_stieltjes(&s, z).unwrap();
        let down = empirical_stieltjes(&s, z.conj()).unwrap();
        assert_eq!(up.conj(), down);
        assert!(empirical_stieltjes(&s, c(0.4, 0.0)).is_err());
    }

    #[test]
    fn counting_examples() {
        let s = spectrum(&[0.2, 0.5, 0.8]);
        assert_eq!(counting(&s, 0.5, 0.2).unwrap().count, 1);
        assert_eq!(counting(&s, 0.05, 0.05).unwrap().count, 0);
        let all = counting(&s, 0.5, 1.0).unwrap();
        assert_eq!(all.count, 3);
        assert!((all.normalized - 1.0).abs() < 1e-15);
        // Closed on both ends.
        assert_eq!(counting(&s, 0.35, 0.3).unwrap().count, 2);
        assert!(counting(&s, 0.5, 0.0).is_err());
    }

    #[test]
    fn deloc_examples() {
        let one = EmpiricalSpectrum {
            eigenvalues: vec![1.0],
            eigenvectors: Some(Mat::from_fn(1, 1, |_, _| c(1.0, 0.0))),
            kind: SpectrumKind::Product,
        };
        assert!((deloc_statistic(&one, (0.5, 1.5)).unwrap().statistic - 1.0).abs() < 1e-15);

        let basis = EmpiricalSpectrum {
            eigenvalues: vec![1.0, 2.0, 3.0, 4.0],
            eigenvectors: Some(Mat::from_fn(4, 4, |i, j| c(if i == j { 1.0 } else { 0.0 }, 0.0))),
            kind: SpectrumKind::Product,
        };
        let d = deloc_statistic(&basis, (1.5, 3.5)).unwrap();
        assert!((d.statistic - 2.0).abs() < 1e-15);
        assert_eq!(d.vectors_used, 2);

        let empty = deloc_statistic(&basis, (10.0, 11.0)).unwrap();
        assert!(empty.empty_window && empty.statistic == 0.0);
        assert!(deloc_statistic(&spectrum(&[1.0]), (0.0, 2.0)).is_err());
    }

    #[test]
    fn deloc_is_phase_invariant() {
        let spec = EnsembleSpec {
            n: 30,
            params: ModelParams::new(2.0, 2.0).unwrap(),
            dist: EntryDistribution::ComplexGaussian,
            master_seed: 9,
            trial_index: 0,
        };
        let s = product_spectrum(&sample_pair(&spec).unwrap(), true).unwrap();
        let v = s.eigenvectors.as_ref().unwrap();
        let rotated = EmpiricalSpectrum {
            eigenvalues: s.eigenvalues.clone(),
            eigenvectors: Some(Mat::from_fn(30, 30, |i, j| v[(i, j)] * Complex64::from_polar(1.0, 0.7 * j as f64))),
            kind: SpectrumKind::Product,
        };
        let w = (0.0, 100.0);
        let d1 = deloc_statistic(&s, w).unwrap().statistic;
        let d2 = deloc_statistic(&rotated, w).unwrap().statistic;
        assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn rigidity_guards() {
        assert!(rigidity_against(&[1.0, 2.0], &[2.0, 1.0]).is_err());
        assert!(rigidity_against(&[1.0], &[1.0, 2.0]).is_err());
        assert!((rigidity_against(&[1.0, 2.5], &[1.5, 2.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rigidity_nonnegative() {
        let spec = EnsembleSpec {
            n: 50,
            params: ModelParams::new(2.0, 2.0).unwrap(),
            dist: EntryDistribution::ComplexGaussian,
            master_seed: 1,
            trial_index: 0,
        };
        let r = rigidity_deviation(&sample_pair(&spec).unwrap(), 2.0).unwrap();
        assert!(r >= 0.0 && r.is_finite());
    }

    #[test]
    fn events_flag_zero_column() {
        let spec = EnsembleSpec {
            n: 40,
            params: ModelParams::new(2.0, 2.0).unwrap(),
            dist: EntryDistribution::ComplexGaussian,
            master_seed: 5,
            trial_index: 0,
        };
        let mut pair = sample_pair(&spec).unwrap();
        let first = sanity_events(&pair);
        assert_eq!(first, sanity_events(&pair));
        for i in 0..40 {
            pair.x[(i, 7)] = c(0.0, 0.0);
        }
        let report = sanity_events(&pair);
        assert!(!report.column_norm_ok);
        assert_eq!(report.column_norm_min, 0.0);
    }
}
