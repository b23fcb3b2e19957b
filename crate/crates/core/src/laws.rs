//! Limiting spectral laws of the MANOVA ensemble and its relatives.
//!
//! `Y` is `n x [a n]` and `X` is `n x [b n]`. The MANOVA matrix
//! `(XX* + YY*)^{-1/2} YY* (XX* + YY*)^{-1/2}` has limiting density
//! [`manova_density`]; the product matrix `(YY*)^{-1/2} XX* (YY*)^{-1/2}` has
//! [`product_density`], linked through `lambda = 1 / (1 + mu)`. The population
//! `T = (YY*/n)^{-1}` follows [`inv_wishart_density`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::CdfTable;

/// Aspect ratios of the ensemble: `Y` has `[a n]` columns and `X` has `[b n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    a: f64,
    b: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 1.0) {
            return Err(Error::InvalidParams(format!("a must be > 1, got {a}")));
        }
        if !(b.is_finite() && b > 1.0) {
            return Err(Error::InvalidParams(format!("b must be > 1, got {b}")));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

/// Support edges of every law attached to one parameter pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportEdges {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    /// Inverse-Wishart support `[a_minus, a_plus]`.
    pub a_minus: f64,
    pub a_plus: f64,
}

pub fn support_edges(params: &ModelParams) -> SupportEdges {
    let (a, b) = (params.a, params.b);
    let s = a + b;
    let left = (a / s * (1.0 - 1.0 / s)).sqrt();
    let right = (1.0 / s * (1.0 - a / s)).sqrt();
    let lambda_minus = (left - right).powi(2);
    let lambda_plus = (left + right).powi(2);
    let (a_minus, a_plus) = inv_wishart_edges(a);
    SupportEdges {
        lambda_minus,
        lambda_plus,
        mu_minus: 1.0 / lambda_plus - 1.0,
        mu_plus: 1.0 / lambda_minus - 1.0,
        a_minus,
        a_plus,
    }
}

/// Support of the Marchenko-Pastur law of `YY* / (a n)`.
pub fn mp_edges(a: f64) -> (f64, f64) {
    let r = a.sqrt().recip();
    ((1.0 - r).powi(2), (1.0 + r).powi(2))
}

/// Support of the law of `(YY* / n)^{-1}`.
pub fn inv_wishart_edges(a: f64) -> (f64, f64) {
    let r = a.sqrt().recip();
    (
        1.0 / (a * (1.0 + r).powi(2)),
        1.0 / (a * (1.0 - r).powi(2)),
    )
}

fn radicand(x: f64, lo: f64, hi: f64) -> f64 {
    ((x - lo) * (hi - x)).max(0.0)
}

pub fn manova_density(params: &ModelParams, x: f64) -> f64 {
    let e = support_edges(params);
    if !(e.lambda_minus..=e.lambda_plus).contains(&x) {
        return 0.0;
    }
    (params.a + params.b) * radicand(x, e.lambda_minus, e.lambda_plus).sqrt()
        / (2.0 * PI * x * (1.0 - x))
}

/// Density of the product matrix. The normalization is `a + b`, the value
/// forced by the change of variables from [`manova_density`].
pub fn product_density(params: &ModelParams, x: f64) -> f64 {
    let e = support_edges(params);
    if !(e.mu_minus..=e.mu_plus).contains(&x) {
        return 0.0;
    }
    let lambda = 1.0 / (1.0 + x);
    (params.a + params.b) / (2.0 * PI * x)
        * radicand(lambda, e.lambda_minus, e.lambda_plus).sqrt()
}

/// Marchenko-Pastur density for ratio `1/a`. Returns NaN when `a <= 1`.
pub fn mp_density(a: f64, x: f64) -> f64 {
    if !(a > 1.0) {
        return f64::NAN;
    }
    let (lo, hi) = mp_edges(a);
    if !(lo..=hi).contains(&x) {
        return 0.0;
    }
    a / (2.0 * PI * x) * radicand(x, lo, hi).sqrt()
}

/// Limiting density of `(YY*/n)^{-1}`, evaluated as `f_MP(1/(a x)) / (a x^2)`.
/// Returns NaN when `a <= 1`.
pub fn inv_wishart_density(a: f64, lam: f64) -> f64 {
    if !(a > 1.0) {
        return f64::NAN;
    }
    let (lo, hi) = inv_wishart_edges(a);
    if !(lo..=hi).contains(&lam) {
        return 0.0;
    }
    mp_density(a, 1.0 / (a * lam)) / (a * lam * lam)
}

/// Same density in edge form: `(a - 1) sqrt((x - a_-)(a_+ - x)) / (2 pi x^2)`.
pub fn inv_wishart_density_simplified(a: f64, lam: f64) -> f64 {
    if !(a > 1.0) {
        return f64::NAN;
    }
    let (lo, hi) = inv_wishart_edges(a);
    if !(lo..=hi).contains(&lam) {
        return 0.0;
    }
    (a - 1.0) * radicand(lam, lo, hi).sqrt() / (2.0 * PI * lam * lam)
}

/// Stieltjes transform of the measure built from the MANOVA bulk plus atoms
/// at 0 and 1; the atoms cancel in [`manova_stieltjes`].
fn wachter_transform(params: &ModelParams, edges: &SupportEdges, z: Complex64) -> Complex64 {
    let s = params.a + params.b;
    // Principal roots of each factor: analytic off [lambda_-, lambda_+] and ~z at infinity.
    let root = (z - edges.lambda_minus).sqrt() * (z - edges.lambda_plus).sqrt();
    (z - (params.a + 1.0) / s + root) / (2.0 * z * (1.0 - z))
}

/// Closed-form Stieltjes transform `int f_M(x) / (x - z) dx`, valid off the real axis.
pub fn manova_stieltjes(params: &ModelParams, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 || !z.is_finite() {
        return Err(Error::Domain(format!(
            "Stieltjes transform needs Im z != 0, got {z}"
        )));
    }
    let edges = support_edges(params);
    let (a, b) = (params.a, params.b);
    let s = a + b;
    let assemble = |mf: Complex64| s * (mf + a / s / z - (b - 1.0) / s / (1.0 - z));
    let m = assemble(wachter_transform(params, &edges, z));
    if m.im * z.im > 0.0 {
        return Ok(m);
    }
    // Other sheet: flip the root.
    let root = (z - edges.lambda_minus).sqrt() * (z - edges.lambda_plus).sqrt();
    let flipped = (z - (a + 1.0) / s - root) / (2.0 * z * (1.0 - z));
    Ok(assemble(flipped))
}

/// Which limiting density to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    Manova,
    Product,
    MarchenkoPastur,
    InverseWishart,
}

impl Law {
    pub fn density(self, params: &ModelParams, x: f64) -> f64 {
        match self {
            Law::Manova => manova_density(params, x),
            Law::Product => product_density(params, x),
            Law::MarchenkoPastur => mp_density(params.a, x),
            Law::InverseWishart => inv_wishart_density(params.a, x),
        }
    }

    pub fn support(self, params: &ModelParams) -> (f64, f64) {
        let e = support_edges(params);
        match self {
            Law::Manova => (e.lambda_minus, e.lambda_plus),
            Law::Product => (e.mu_minus, e.mu_plus),
            Law::MarchenkoPastur => mp_edges(params.a),
            Law::InverseWishart => (e.a_minus, e.a_plus),
        }
    }
}

impl std::str::FromStr for Law {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manova" => Ok(Law::Manova),
            "product" => Ok(Law::Product),
            "mp" | "marchenko-pastur" => Ok(Law::MarchenkoPastur),
            "inv" | "inverse-wishart" => Ok(Law::InverseWishart),
            other => Err(Error::Validation(format!("unknown law '{other}'"))),
        }
    }
}

/// A density sampled on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Evaluate `law` at `points` equispaced abscissas in `[from, to]`.
pub fn density_curve(
    law: Law,
    params: &ModelParams,
    from: f64,
    to: f64,
    points: usize,
) -> Result<DensityCurve> {
    if points == 0 || !(from <= to) {
        return Err(Error::Validation(format!(
            "need points >= 1 and from <= to, got {points} points on [{from}, {to}]"
        )));
    }
    let grid: Vec<f64> = if points == 1 {
        vec![from]
    } else {
        let step = (to - from) / (points - 1) as f64;
        (0..points).map(|i| from + step * i as f64).collect()
    };
    let values = grid.iter().map(|&x| law.density(params, x)).collect();
    Ok(DensityCurve { grid, values })
}

const CDF_SEGMENTS: usize = 512;

/// Quantiles of the inverse-Wishart law, backed by a cumulative table.
pub struct InvWishartQuantiles {
    table: CdfTable<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl InvWishartQuantiles {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 1.0) {
            return Err(Error::InvalidParams(format!("a must be > 1, got {a}")));
        }
        let (lo, hi) = inv_wishart_edges(a);
        let density: Box<dyn Fn(f64) -> f64 + Send + Sync> =
            Box::new(move |x| inv_wishart_density_simplified(a, x));
        Ok(Self {
            table: CdfTable::new(lo, hi, CDF_SEGMENTS, density),
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.table.cdf(x)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.table.quantile(p)
    }
}

/// Classical locations `tau_k` with `F_Inv(tau_k) = k / n`, `k = 1..=n`.
pub fn classical_locations(a: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Validation("classical locations need n >= 1".into()));
    }
    let q = InvWishartQuantiles::new(a)?;
    let (_, a_plus) = inv_wishart_edges(a);
    let mut taus: Vec<f64> = (1..n).map(|k| q.quantile(k as f64 / n as f64)).collect();
    taus.push(a_plus);
    Ok(taus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_edges;

    fn p(a: f64, b: f64) -> ModelParams {
        ModelParams::new(a, b).unwrap()
    }

    #[test]
    fn rejects_ratios_at_or_below_one() {
        assert!(ModelParams::new(1.0, 2.0).is_err());
        assert!(ModelParams::new(2.0, 0.5).is_err());
        assert!(ModelParams::new(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn edges_for_a2_b2() {
        let e = support_edges(&p(2.0, 2.0));
        let r3 = 3f64.sqrt();
        assert!((e.lambda_minus - (2.0 - r3) / 4.0).abs() < 1e-15);
        assert!((e.lambda_plus - (2.0 + r3) / 4.0).abs() < 1e-15);
        assert!((e.mu_minus - (7.0 - 4.0 * r3)).abs() < 1e-13);
        assert!((e.mu_plus - (7.0 + 4.0 * r3)).abs() < 1e-12);
    }

    #[test]
    fn inverse_wishart_edges_a4() {
        let (lo, hi) = inv_wishart_edges(4.0);
        assert!((lo - 1.0 / 9.0).abs() < 1e-15);
        assert!((hi - 1.0).abs() < 1e-15);
        assert_eq!(mp_edges(4.0), (0.25, 2.25));
    }

    #[test]
    fn edge_products() {
        for a in [1.1, 1.5, 2.0, 3.0, 7.5] {
            for b in [1.1, 1.5, 2.0, 4.0, 9.0] {
                let e = support_edges(&p(a, b));
                let expect = ((a - 1.0) / (a + b)).powi(2);
                assert!((e.lambda_plus * e.lambda_minus - expect).abs() < 1e-12);
                assert!(0.0 < e.lambda_minus && e.lambda_minus < e.lambda_plus);
                assert!(e.lambda_plus < 1.0);
                assert!(e.a_minus < e.a_plus);
            }
            let e = support_edges(&p(a, a));
            assert!((e.lambda_minus + e.lambda_plus - 1.0).abs() < 1e-12);
            assert!((e.mu_minus * e.mu_plus - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn manova_density_midpoint() {
        let v = manova_density(&p(2.0, 2.0), 0.5);
        // 4 * sqrt(3)/4 / (2 pi / 4)
        let expect = 4.0 * (3f64.sqrt() / 4.0) / (2.0 * PI * 0.25);
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 1.102658).abs() < 1e-6);
    }

    #[test]
    fn zero_outside_support() {
        let params = p(2.0, 3.0);
        let e = support_edges(&params);
        assert_eq!(manova_density(&params, e.lambda_plus + 0.01), 0.0);
        assert_eq!(manova_density(&params, e.lambda_minus - 1e-9), 0.0);
        assert_eq!(product_density(&params, e.mu_plus + 1.0), 0.0);
        assert_eq!(mp_density(2.0, 0.0), 0.0);
        assert_eq!(inv_wishart_density(2.0, e.a_minus / 2.0), 0.0);
        assert_eq!(manova_density(&params, e.lambda_plus), 0.0);
    }

    #[test]
    fn product_density_is_change_of_variables() {
        let params = p(2.0, 3.0);
        let e = support_edges(&params);
        for i in 1..=100 {
            let x = e.mu_minus + (e.mu_plus - e.mu_minus) * i as f64 / 101.0;
            let l = 1.0 / (1.0 + x);
            let via = manova_density(&params, l) * l * l;
            assert!((product_density(&params, x) - via).abs() <= 1e-12);
        }
    }

    #[test]
    fn inverse_wishart_forms_agree() {
        for a in [1.5, 2.0, 4.0] {
            let (lo, hi) = inv_wishart_edges(a);
            for i in 1..100 {
                let x = lo + (hi - lo) * i as f64 / 100.0;
                let f1 = inv_wishart_density(a, x);
                let f2 = inv_wishart_density_simplified(a, x);
                assert!((f1 - f2).abs() <= 1e-12 * f2, "a={a} x={x}: {f1} vs {f2}");
            }
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        let params = p(2.0, 3.0);
        let e = support_edges(&params);
        let (ml, mh) = mp_edges(2.0);
        let masses = [
            integrate_edges(e.lambda_minus, e.lambda_plus, 1e-12, |x| {
                manova_density(&params, x)
            }),
            integrate_edges(e.mu_minus, e.mu_plus, 1e-12, |x| product_density(&params, x)),
            integrate_edges(ml, mh, 1e-12, |x| mp_density(2.0, x)),
            integrate_edges(e.a_minus, e.a_plus, 1e-12, |x| inv_wishart_density(2.0, x)),
        ];
        for m in masses {
            assert!((m.unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn stieltjes_far_field_and_reflection() {
        let params = p(2.0, 2.0);
        let z = Complex64::new(0.0, 10.0);
        let m = manova_stieltjes(&params, z).unwrap();
        assert!((m + 1.0 / z).norm() <= 0.02);

        let z = Complex64::new(0.5, 0.1);
        let up = manova_stieltjes(&params, z).unwrap();
        let down = manova_stieltjes(&params, z.conj()).unwrap();
        assert!((up.conj() - down).norm() <= 1e-15);
        assert!(up.im > 0.0);
    }

    #[test]
    fn stieltjes_rejects_real_axis() {
        let err = manova_stieltjes(&p(2.0, 2.0), Complex64::new(0.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn stieltjes_inversion_at_bulk_point() {
        let params = p(2.0, 2.0);
        let m = manova_stieltjes(&params, Complex64::new(0.5, 1e-3)).unwrap();
        assert!((m.im / PI - 1.1027).abs() <= 5e-3);
    }

    #[test]
    fn stieltjes_matches_quadrature() {
        // Independent route: integrate f_M / (x - z) directly.
        for (a, b) in [(1.5, 3.0), (4.0, 1.5), (2.0, 2.0)] {
            let params = p(a, b);
            let e = support_edges(&params);
            for z in [Complex64::new(0.3, 0.2), Complex64::new(1.7, 0.5), Complex64::new(-0.4, 1.0)] {
                let re = integrate_edges(e.lambda_minus, e.lambda_plus, 1e-13, |x| {
                    (manova_density(&params, x) / (x - z)).re
                })
                .unwrap();
                let im = integrate_edges(e.lambda_minus, e.lambda_plus, 1e-13, |x| {
                    (manova_density(&params, x) / (x - z)).im
                })
                .unwrap();
                let closed = manova_stieltjes(&params, z).unwrap();
                assert!((closed - Complex64::new(re, im)).norm() < 1e-10, "{a} {b} {z}");
            }
        }
    }

    #[test]
    fn classical_locations_end_at_upper_edge() {
        for a in [1.5, 2.0, 4.0] {
            let t = classical_locations(a, 37).unwrap();
            assert_eq!(t.len(), 37);
            assert_eq!(*t.last().unwrap(), inv_wishart_edges(a).1);
        }
        assert!(classical_locations(2.0, 0).is_err());
        assert_eq!(classical_locations(2.0, 1).unwrap(), vec![inv_wishart_edges(2.0).1]);
    }

    #[test]
    fn classical_locations_strictly_increase() {
        let t = classical_locations(2.0, 100).unwrap();
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn law_parsing() {
        assert_eq!("manova".parse::<Law>().unwrap(), Law::Manova);
        assert_eq!("inv".parse::<Law>().unwrap(), Law::InverseWishart);
        assert!("nope".parse::<Law>().is_err());
    }

    #[test]
    fn density_curve_three_points() {
        let c = density_curve(Law::Manova, &p(2.0, 2.0), 0.4, 0.6, 3).unwrap();
        assert_eq!(c.grid.len(), 3);
        assert!((c.values[1] - 1.102658).abs() < 1e-6);
    }
}
