//! Rate estimates, weighted polynomial fits, concatenation and threshold
//! tracing.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::css::CodeName;
use crate::error::{Error, Result};
use crate::sim::Tally;

/// Estimated crash rates at one input point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    /// (ε, γ) for the cluster layer, (p, q) for the deterministic layer.
    pub inputs: (f64, f64),
    pub e: f64,
    pub gamma: f64,
    pub sigma_e: f64,
    pub sigma_gamma: f64,
    pub trials: u64,
}

pub fn estimate_rates(tally: &Tally, inputs: (f64, f64)) -> Result<RatePoint> {
    let e = tally.unlocated_rate().ok_or(Error::EmptyTally)?;
    let gamma = tally.located_rate().ok_or(Error::EmptyTally)?;
    Ok(RatePoint {
        inputs,
        e,
        gamma,
        sigma_e: tally.unlocated_sigma().unwrap_or(0.0),
        sigma_gamma: tally.located_sigma().unwrap_or(0.0),
        trials: tally.trials,
    })
}

/// Monomial x^i y^j.
pub type Monomial = (u32, u32);

/// All monomials with total degree in `lo..=hi`.
pub fn degree_basis(lo: u32, hi: u32) -> Vec<Monomial> {
    (lo..=hi).flat_map(|d| (0..=d).rev().map(move |i| (i, d - i))).collect()
}

/// Which rate a model predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateKind {
    Unlocated,
    Located,
}

/// Default fit basis: located rates use degrees 1..3; unlocated rates start
/// at the first order the code cannot correct.
pub fn default_basis(code: CodeName, kind: RateKind) -> Vec<Monomial> {
    match (kind, code) {
        (RateKind::Located, _) => degree_basis(1, 3),
        (RateKind::Unlocated, CodeName::Steane7) => degree_basis(2, 4),
        (RateKind::Unlocated, CodeName::Golay23) => degree_basis(3, 5),
    }
}

fn monomial_name(m: Monomial) -> String {
    format!("x^{}y^{}", m.0, m.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyModel {
    pub basis: Vec<Monomial>,
    pub coefficients: Vec<f64>,
    /// Weighted residual sum of squares of the fit.
    pub residual: f64,
}

impl PolyModel {
    pub fn zero() -> Self {
        PolyModel { basis: Vec::new(), coefficients: Vec::new(), residual: 0.0 }
    }

    pub fn new(terms: &[(Monomial, f64)]) -> Self {
        PolyModel {
            basis: terms.iter().map(|t| t.0).collect(),
            coefficients: terms.iter().map(|t| t.1).collect(),
            residual: 0.0,
        }
    }

    /// Unclamped polynomial value.
    pub fn raw(&self, x: f64, y: f64) -> f64 {
        self.basis
            .iter()
            .zip(&self.coefficients)
            .map(|(&(i, j), c)| c * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }

    /// Prediction clamped to [0, 1].
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.raw(x, y).clamp(0.0, 1.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("monomial_i,monomial_j,coefficient\n");
        for (&(i, j), c) in self.basis.iter().zip(&self.coefficients) {
            let _ = writeln!(s, "{i},{j},{c:e}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "monomial_i,monomial_j,coefficient" => {}
            _ => return Err(Error::Parse("missing model header".into())),
        }
        let mut terms = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Parse(format!("bad model line {line:?}"));
            if f.len() != 3 {
                return Err(bad());
            }
            let i = f[0].parse().map_err(|_| bad())?;
            let j = f[1].parse().map_err(|_| bad())?;
            let c = f[2].parse().map_err(|_| bad())?;
            terms.push(((i, j), c));
        }
        Ok(PolyModel::new(&terms))
    }
}

/// Minimizes Σ w_i (y_i − Σ_j c_j m_j(x_i))² with w_i = 1/σ_i².
pub fn wls_fit(xs: &[(f64, f64)], ys: &[f64], sigmas: &[f64], basis: &[Monomial]) -> Result<PolyModel> {
    if xs.len() != ys.len() || xs.len() != sigmas.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len().min(sigmas.len()) });
    }
    if xs.len() < basis.len() || basis.is_empty() {
        return Err(Error::TooFewPoints { points: xs.len(), terms: basis.len() });
    }
    if let Some(s) = sigmas.iter().find(|s| s.is_nan() || **s <= 0.0) {
        return Err(Error::Usage(format!("fit weights need positive sigma, got {s}")));
    }
    let a = DMatrix::from_fn(xs.len(), basis.len(), |r, c| {
        let (x, y) = xs[r];
        let (i, j) = basis[c];
        x.powi(i as i32) * y.powi(j as i32) / sigmas[r]
    });
    let b = DVector::from_fn(xs.len(), |r, _| ys[r] / sigmas[r]);

    // columns are scaled to unit norm so the rank test is scale free
    let norms: Vec<f64> = (0..basis.len()).map(|c| a.column(c).norm()).collect();
    let mut scaled = a.clone();
    for (c, &n) in norms.iter().enumerate() {
        if n == 0.0 {
            return Err(Error::SingularFit { dependent: monomial_name(basis[c]), with: vec![] });
        }
        scaled.column_mut(c).scale_mut(1.0 / n);
    }
    for c in 1..basis.len() {
        let prev = scaled.columns(0, c).into_owned();
        let target = scaled.column(c).into_owned();
        let svd = prev.clone().svd(true, true);
        let coef = svd.solve(&target, 1e-12).map_err(|e| Error::Usage(e.to_string()))?;
        if (&prev * &coef - &target).norm() < 1e-9 {
            let with = (0..c).filter(|&k| coef[k].abs() > 1e-9).map(|k| monomial_name(basis[k])).collect();
            return Err(Error::SingularFit { dependent: monomial_name(basis[c]), with });
        }
    }
    let svd = scaled.svd(true, true);
    let sol = svd.solve(&b, 1e-300).map_err(|e| Error::Usage(e.to_string()))?;
    let coefficients: Vec<f64> = sol.iter().zip(&norms).map(|(s, n)| s / n).collect();
    let fitted = &a * DVector::from_vec(coefficients.clone());
    let residual = (fitted - b).norm_squared();
    Ok(PolyModel { basis: basis.to_vec(), coefficients, residual })
}

/// Located and unlocated rate models of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMap {
    pub e: PolyModel,
    pub gamma: PolyModel,
    /// Largest sampled inputs; the map is not evaluated beyond them.
    pub domain: (f64, f64),
}

impl RateMap {
    pub fn unbounded(e: PolyModel, gamma: PolyModel) -> Self {
        RateMap { e, gamma, domain: (f64::INFINITY, f64::INFINITY) }
    }

    pub fn covers(&self, x: f64, y: f64) -> bool {
        x <= self.domain.0 && y <= self.domain.1
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.e.eval(x, y), self.gamma.eval(x, y))
    }
}

/// Fits both rates, skipping points whose standard error is zero.
pub fn fit_rate_map(points: &[RatePoint], basis_e: &[Monomial], basis_gamma: &[Monomial]) -> Result<RateMap> {
    let fit = |pick: &dyn Fn(&RatePoint) -> (f64, f64), basis: &[Monomial]| {
        let used: Vec<&RatePoint> = points.iter().filter(|p| pick(p).1 > 0.0).collect();
        let xs: Vec<(f64, f64)> = used.iter().map(|p| p.inputs).collect();
        let ys: Vec<f64> = used.iter().map(|p| pick(p).0).collect();
        let sig: Vec<f64> = used.iter().map(|p| pick(p).1).collect();
        wls_fit(&xs, &ys, &sig, basis)
    };
    let max = |pick: fn(&RatePoint) -> f64| points.iter().map(pick).fold(0.0, f64::max);
    Ok(RateMap {
        e: fit(&|p| (p.e, p.sigma_e), basis_e)?,
        gamma: fit(&|p| (p.gamma, p.sigma_gamma), basis_gamma)?,
        domain: (max(|p| p.inputs.0), max(|p| p.inputs.1)),
    })
}

/// (E_k, Γ_k): `f` once, then `g` k−1 times with (p, q) = (Γ, E).
pub fn concatenated_rates(f: &RateMap, g: &RateMap, eps: f64, gamma: f64, k: u32) -> (f64, f64) {
    assert!(k >= 1, "level starts at 1");
    let (mut e, mut l) = f.apply(eps, gamma);
    for _ in 1..k {
        (e, l) = g.apply(l, e);
    }
    (e, l)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdConfig {
    pub rays: usize,
    pub tol: f64,
    pub k_max: u32,
    pub s_eps: f64,
    pub s_gamma: f64,
    pub bisection_steps: u32,
    /// Largest radius examined, in units of the axis scales.
    pub r_max: f64,
    /// Coarse steps taken outward along a ray before bisecting.
    pub scan_steps: u32,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            rays: 32,
            tol: 1e-12,
            k_max: 30,
            s_eps: 1e-4,
            s_gamma: 1e-2,
            bisection_steps: 60,
            r_max: 100.0,
            scan_steps: 200,
        }
    }
}

impl ThresholdConfig {
    /// Largest radius examined; never beyond where a rate would exceed 1.
    pub fn radius_cap(&self) -> f64 {
        self.r_max.min(1.0 / self.s_eps).min(1.0 / self.s_gamma)
    }

    pub fn point(&self, theta: f64, r: f64) -> (f64, f64) {
        (r * theta.cos() * self.s_eps, r * theta.sin() * self.s_gamma)
    }
}

/// True when the iterated rates reach `tol` within `k_max` levels. Rates
/// that leave the domain of `g` count as diverging.
pub fn is_inside(f: &RateMap, g: &RateMap, eps: f64, gamma: f64, tol: f64, k_max: u32) -> bool {
    let (mut e, mut l) = f.apply(eps, gamma);
    for _ in 1..=k_max {
        if e < tol && l < tol {
            return true;
        }
        if !g.covers(l, e) {
            return false;
        }
        (e, l) = g.apply(l, e);
    }
    e < tol && l < tol
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdCurve {
    pub code: String,
    pub config: ThresholdConfig,
    pub thetas: Vec<f64>,
    pub radius: Vec<f64>,
    /// Rays whose classification is not monotone in the radius.
    pub non_monotone: Vec<usize>,
    /// Rays still inside where they leave the sampled domain of `f`.
    pub domain_edge: Vec<usize>,
}

impl ThresholdCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,eps,gamma,inside_radius\n");
        for (&t, &r) in self.thetas.iter().zip(&self.radius) {
            let (e, g) = self.config.point(t, r);
            let _ = writeln!(s, "{t},{e:e},{g:e},{r}");
        }
        s
    }

    /// Boundary (ε, γ) on each ray.
    pub fn boundary(&self) -> Vec<(f64, f64)> {
        self.thetas.iter().zip(&self.radius).map(|(&t, &r)| self.config.point(t, r)).collect()
    }
}

pub fn trace_threshold(code: &str, f: &RateMap, g: &RateMap, cfg: &ThresholdConfig) -> ThresholdCurve {
    assert!(cfg.rays >= 2, "at least two rays");
    let cap = cfg.radius_cap();
    let inside = |theta: f64, r: f64| {
        let (e, l) = cfg.point(theta, r);
        is_inside(f, g, e, l, cfg.tol, cfg.k_max)
    };
    let thetas: Vec<f64> =
        (0..cfg.rays).map(|i| std::f64::consts::FRAC_PI_2 * i as f64 / (cfg.rays - 1) as f64).collect();
    let mut radius = Vec::with_capacity(cfg.rays);
    let mut non_monotone = Vec::new();
    let mut domain_edge = Vec::new();
    for (ray, &theta) in thetas.iter().enumerate() {
        let (ce, cg) = cfg.point(theta, 1.0);
        let ray_cap = [(f.domain.0, ce), (f.domain.1, cg)]
            .into_iter()
            .filter(|&(_, c)| c > 1e-12 * cap)
            .map(|(d, c)| d / c)
            .fold(cap, f64::min);
        let step = ray_cap / cfg.scan_steps as f64;
        let first_out = (1..=cfg.scan_steps).map(|i| i as f64 * step).find(|&r| !inside(theta, r));
        let r = match first_out {
            None => {
                domain_edge.push(ray);
                ray_cap
            }
            Some(out) => {
                let (mut lo, mut hi) = (out - step, out);
                for _ in 0..cfg.bisection_steps {
                    let mid = 0.5 * (lo + hi);
                    if inside(theta, mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
        };
        let reenters = first_out.is_some_and(|out| {
            (1..=cfg.scan_steps).map(|i| i as f64 * step).filter(|&x| x > out).any(|x| inside(theta, x))
        });
        if reenters || (1..16).any(|k| !inside(theta, r * k as f64 / 16.0)) {
            non_monotone.push(ray);
        }
        radius.push(r);
    }
    ThresholdCurve { code: code.into(), config: *cfg, thetas, radius, non_monotone, domain_edge }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tally(n_u: u64, n_l: u64, n_n: u64) -> Tally {
        Tally { trials: n_u + n_l + n_n, n_u, n_l, n_n, discarded: 0, stalls: 0 }
    }

    #[test]
    fn rate_estimates() {
        let r = estimate_rates(&tally(0, 0, 1000), (0.0, 0.0)).unwrap();
        assert_eq!((r.e, r.gamma), (0.0, 0.0));
        let r = estimate_rates(&tally(10, 0, 990), (0.0, 0.0)).unwrap();
        assert_eq!((r.e, r.gamma), (0.01, 0.0));
        let r = estimate_rates(&tally(10, 10, 980), (0.0, 0.0)).unwrap();
        assert!((r.e - 10.0 / 990.0).abs() < 1e-15);
        assert_eq!(r.gamma, 0.01);
        assert!((r.sigma_gamma - (0.01f64 * 0.99 / 1000.0).sqrt()).abs() < 1e-15);
        assert_eq!(estimate_rates(&tally(0, 5, 0), (0.0, 0.0)), Err(Error::EmptyTally));
    }

    #[test]
    fn exact_synthetic_fit() {
        let xs: Vec<(f64, f64)> = (0..12).map(|i| (0.1 * i as f64, 0.05 * (i * i % 7) as f64)).collect();
        let ys: Vec<f64> = xs.iter().map(|&(x, y)| 2.0 * x + 3.0 * y * y).collect();
        let m = wls_fit(&xs, &ys, &[1e-6; 12], &[(1, 0), (0, 2)]).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((m.coefficients[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn single_constant_point() {
        let m = wls_fit(&[(0.3, 0.4)], &[0.7], &[0.1], &[(0, 0)]).unwrap();
        assert!((m.coefficients[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn collinear_basis_is_rejected() {
        let xs: Vec<(f64, f64)> = (1..8).map(|i| (i as f64, 2.0 * i as f64)).collect();
        let ys = vec![1.0; 7];
        let err = wls_fit(&xs, &ys, &[1.0; 7], &[(1, 0), (0, 1)]).unwrap_err();
        assert_eq!(err, Error::SingularFit { dependent: "x^0y^1".into(), with: vec!["x^1y^0".into()] });
        let err = wls_fit(&xs, &ys, &[1.0; 7], &[(1, 0), (1, 0)]).unwrap_err();
        assert!(matches!(err, Error::SingularFit { .. }));
    }

    /// Normal-equations oracle: (AᵀWA) c = AᵀWy solved by Gaussian elimination.
    fn normal_equations(xs: &[(f64, f64)], ys: &[f64], sig: &[f64], basis: &[Monomial]) -> Vec<f64> {
        let k = basis.len();
        let mut m = vec![vec![0.0; k + 1]; k];
        for ((&(x, y), &v), &s) in xs.iter().zip(ys).zip(sig) {
            let row: Vec<f64> = basis.iter().map(|&(i, j)| x.powi(i as i32) * y.powi(j as i32)).collect();
            let w = 1.0 / (s * s);
            for a in 0..k {
                for b in 0..k {
                    m[a][b] += w * row[a] * row[b];
                }
                m[a][k] += w * row[a] * v;
            }
        }
        for c in 0..k {
            let p = (c..k).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
            m.swap(c, p);
            for r in 0..k {
                if r != c {
                    let f = m[r][c] / m[c][c];
                    let pivot = m[c].clone();
                    for (x, v) in m[r][c..].iter_mut().zip(&pivot[c..]) {
                        *x -= f * v;
                    }
                }
            }
        }
        (0..k).map(|r| m[r][k] / m[r][r]).collect()
    }

    proptest! {
        #[test]
        fn fit_matches_normal_equations(seed in 0u64..1000) {
            let xs: Vec<(f64, f64)> = (0..15).map(|i| {
                let a = ((seed + i) * 7919 % 101) as f64 / 101.0;
                let b = ((seed * 3 + i * 13) % 97) as f64 / 97.0;
                (a, b)
            }).collect();
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, &(x, y))| x * y + 0.3 * x * x + 0.01 * (i % 3) as f64).collect();
            let sig: Vec<f64> = (0..15).map(|i| 0.5 + (i % 4) as f64).collect();
            let basis = degree_basis(1, 2);
            let m = wls_fit(&xs, &ys, &sig, &basis).unwrap();
            let oracle = normal_equations(&xs, &ys, &sig, &basis);
            for (a, b) in m.coefficients.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }

        #[test]
        fn equal_sigmas_reduce_to_least_squares(s in 0.01f64..10.0) {
            let xs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 / 10.0, ((i * 7) % 10) as f64 / 10.0)).collect();
            let ys: Vec<f64> = xs.iter().map(|&(x, y)| (x + y).sin()).collect();
            let basis = degree_basis(1, 2);
            let a = wls_fit(&xs, &ys, &[s; 10], &basis).unwrap();
            let b = wls_fit(&xs, &ys, &[1.0; 10], &basis).unwrap();
            for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
                prop_assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn bases_have_no_low_orders() {
        assert_eq!(degree_basis(1, 1), vec![(1, 0), (0, 1)]);
        assert_eq!(default_basis(CodeName::Golay23, RateKind::Unlocated).len(), 3 + 4 + 5 + 6 - 3);
        assert!(default_basis(CodeName::Steane7, RateKind::Unlocated).iter().all(|&(i, j)| i + j >= 2));
    }

    #[test]
    fn model_csv_round_trip() {
        let m = PolyModel::new(&[((1, 0), 2.5), ((0, 3), -1e-7)]);
        assert_eq!(PolyModel::from_csv(&m.to_csv()).unwrap(), m);
        assert!(PolyModel::from_csv("a,b\n").is_err());
    }

    #[test]
    fn predictions_are_clamped() {
        let m = PolyModel::new(&[((1, 0), 10.0), ((0, 1), -10.0)]);
        assert_eq!(m.eval(1.0, 0.0), 1.0);
        assert_eq!(m.eval(0.0, 1.0), 0.0);
    }

    fn zero_map() -> RateMap {
        RateMap::unbounded(PolyModel::zero(), PolyModel::zero())
    }

    /// f passes γ through as the unlocated rate; g squares it with gain 100.
    fn toy_maps() -> (RateMap, RateMap) {
        let f = RateMap::unbounded(PolyModel::new(&[((0, 1), 1.0)]), PolyModel::zero());
        let g = RateMap::unbounded(PolyModel::new(&[((0, 2), 100.0)]), PolyModel::zero());
        (f, g)
    }

    #[test]
    fn concatenation_levels() {
        let (f, g) = toy_maps();
        assert_eq!(concatenated_rates(&f, &g, 0.0, 0.005, 1), f.apply(0.0, 0.005));
        let (e2, _) = concatenated_rates(&f, &g, 0.0, 0.005, 2);
        assert!((e2 - 100.0 * 0.005 * 0.005).abs() < 1e-15);
        for k in 1..6 {
            assert_eq!(concatenated_rates(&f, &g, 0.0, 0.0, k), (0.0, 0.0));
        }
    }

    #[test]
    fn zero_maps_are_inside_everywhere() {
        let cfg = ThresholdConfig { rays: 5, ..Default::default() };
        let curve = trace_threshold("zero", &zero_map(), &zero_map(), &cfg);
        assert!(curve.radius.iter().all(|&r| r == cfg.radius_cap()));
    }

    #[test]
    fn toy_map_threshold_on_the_gamma_axis() {
        let (f, g) = toy_maps();
        let cfg = ThresholdConfig { rays: 3, ..Default::default() };
        let curve = trace_threshold("toy", &f, &g, &cfg);
        let (_, gamma) = curve.boundary()[2];
        assert!((gamma - 0.01).abs() < 1e-4, "{gamma}");
        assert!(curve.non_monotone.is_empty());
        assert!(curve.to_csv().starts_with("theta,eps,gamma,inside_radius\n"));
    }
}
