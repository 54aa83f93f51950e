//! Covariance of a point configuration and the Grassmann-averaged weight
//! `I_{d,k}(ξ) = ∫_{G_{d,d−k}} tr(P_Π Var_ξ)^{(d(d−k)−2)/2} dμ_G`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::{gamma_product, grassmann_mass, DimPair};
use crate::error::{AuditError, Result};
use crate::manifold::{sample_frame, sample_values, stiefel_integral, Estimate, SeededStream};

/// `d + 1` points `ξ_1, …, ξ_{d+1}` in `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<DVector<f64>>,
}

impl Configuration {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        let d = points.len().saturating_sub(1);
        if d < 1 {
            return Err(AuditError::Domain("a configuration needs at least two points".into()));
        }
        for p in &points {
            if p.len() != d {
                return Err(AuditError::DimensionMismatch { expected: d, got: p.len() });
            }
        }
        Ok(Self { points })
    }

    /// From the flattened layout `(x_1, …, x_{d+1}) ∈ ℝ^{d(d+1)}`.
    pub fn from_flat(d: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != d * (d + 1) {
            return Err(AuditError::DimensionMismatch { expected: d * (d + 1), got: flat.len() });
        }
        Self::new(flat.chunks(d).map(DVector::from_column_slice).collect())
    }

    /// Points with independent standard normal coordinates.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let points = (0..=d)
            .map(|_| DVector::from_fn(d, |_, _| rng.sample(StandardNormal)))
            .collect();
        Self { points }
    }

    pub fn d(&self) -> usize {
        self.points.len() - 1
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { points: self.points.iter().map(|p| p * lambda).collect() }
    }

    pub fn translated(&self, shift: &DVector<f64>) -> Self {
        Self { points: self.points.iter().map(|p| p + shift).collect() }
    }

    /// Applies the same linear map to every point.
    pub fn transformed(&self, q: &DMatrix<f64>) -> Self {
        Self { points: self.points.iter().map(|p| q * p).collect() }
    }
}

/// Symmetric positive-semidefinite `d × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    m: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(AuditError::Domain("covariance must be square".into()));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(AuditError::Domain("covariance must be symmetric".into()));
        }
        let min_eig = m.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-12 * m.trace().abs().max(f64::MIN_POSITIVE) {
            return Err(AuditError::Domain(format!("covariance has eigenvalue {min_eig:e}")));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// Eigen-decomposition `Var = Q Λ Qᵀ`, eigenvalues clamped at zero.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let e = SymmetricEigen::new(self.m.clone());
        (e.eigenvalues.map(|l| l.max(0.0)), e.eigenvectors)
    }

    /// `Var^{1/2}`.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let (l, q) = self.eigen();
        &q * DMatrix::from_diagonal(&l.map(f64::sqrt)) * q.transpose()
    }

    /// `(tr Var)² + 2 tr(Var²)`.
    pub fn quadratic_form(&self) -> f64 {
        let t = self.m.trace();
        t * t + 2.0 * self.m.component_mul(&self.m).sum()
    }
}

/// `Var_ξ = (1/(2(d+1)²)) Σ_{i,j} (ξ_i − ξ_j)(ξ_i − ξ_j)ᵀ`.
pub fn covariance(xi: &Configuration) -> CovarianceMatrix {
    let d = xi.d();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for (i, a) in xi.points.iter().enumerate() {
        for b in &xi.points[..i] {
            let diff = a - b;
            m.ger(1.0, &diff, &diff, 1.0);
        }
    }
    // ordered pairs count each unordered pair twice
    m /= ((d + 1) * (d + 1)) as f64;
    CovarianceMatrix { m }
}

/// `E(XXᵀ) − E(X)E(X)ᵀ` for the uniform distribution on the points.
pub fn covariance_by_moments(xi: &Configuration) -> DMatrix<f64> {
    let n = xi.points.len() as f64;
    let d = xi.d();
    let mut second = DMatrix::<f64>::zeros(d, d);
    let mut mean = DVector::<f64>::zeros(d);
    for p in &xi.points {
        second.ger(1.0 / n, p, p, 1.0);
        mean.axpy(1.0 / n, p, 1.0);
    }
    second - &mean * mean.transpose()
}

/// `tr Var_ξ`, checked against `(1/(2(d+1)²)) Σ_{i,j} |ξ_i − ξ_j|²`.
pub fn trace_variance(xi: &Configuration) -> Result<f64> {
    let d = xi.d();
    let by_trace = covariance(xi).trace();
    let mut pairs = 0.0;
    for (i, a) in xi.points.iter().enumerate() {
        for b in &xi.points[..i] {
            pairs += (a - b).norm_squared();
        }
    }
    let by_pairs = pairs / ((d + 1) * (d + 1)) as f64;
    let scale = by_trace.abs().max(by_pairs.abs());
    if (by_trace - by_pairs).abs() > 1e-12 * scale {
        return Err(AuditError::Defect(format!(
            "trace formulas disagree: {by_trace:e} vs {by_pairs:e}"
        )));
    }
    Ok(by_trace)
}

fn check_pair(xi: &Configuration, k: usize) -> Result<DimPair> {
    DimPair::new(xi.d(), k)
}

/// `I_{d,k}(ξ)` by Monte Carlo over `G_{d,d−k}`.
pub fn i_weight_mc(xi: &Configuration, k: usize, n: usize, stream: &SeededStream) -> Result<Estimate> {
    let pair = check_pair(xi, k)?;
    let var = covariance(xi);
    let half = pair.weight_degree() as f64 / 2.0;
    let comp = pair.complement();
    if n < 2 {
        return Err(AuditError::Domain("Monte Carlo needs at least 2 samples".into()));
    }
    let values = sample_values(n, stream, |rng| {
        let v = sample_frame(comp.d(), comp.k(), rng);
        let t = (v.matrix().transpose() * var.matrix() * v.matrix()).trace();
        Ok(t.max(0.0).powf(half))
    })?;
    Ok(Estimate::from_values(&values, grassmann_mass(comp)))
}

/// `I_{d,k}(ξ)` through the eigenvalues `λ_j` of `Var_ξ^{1/2}`:
/// `(1/γ_{d−k}(d−k))^{-1} ∫_{V_{d,d−k}} (Σ_{i,j} λ_j² v_{ij}²)^{(d(d−k)−2)/2} dμ_V`.
pub fn i_weight_eigen_mc(xi: &Configuration, k: usize, n: usize, stream: &SeededStream) -> Result<Estimate> {
    let pair = check_pair(xi, k)?;
    let (eig, _) = covariance(xi).eigen();
    let lambda_sq: Vec<f64> = eig.iter().map(|&e| e.sqrt().powi(2)).collect();
    let half = pair.weight_degree() as f64 / 2.0;
    let (d, m) = (pair.d(), pair.d() - pair.k());
    let est = stiefel_integral(d, m, n, stream, |v| {
        let mut s = 0.0;
        for i in 0..m {
            for (j, l2) in lambda_sq.iter().enumerate() {
                s += l2 * v.matrix()[(j, i)].powi(2);
            }
        }
        Ok(s.powf(half))
    })?;
    Ok(est.scaled(gamma_product(m, m as f64)?))
}

/// One calibrated proportionality constant `κ_{d,k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub kappa: f64,
    pub stderr: f64,
    pub samples: usize,
    pub configs: usize,
    pub seed: u64,
    pub max_rel_residual: f64,
}

pub const CALIBRATION_FORMAT_VERSION: u32 = 1;

/// Shipped calibration file, relative to the crate root.
pub const DEFAULT_CALIBRATION_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/calibration.txt");

/// Versioned table of `κ_{d,k}` values.
///
/// Text format: `#` comments, a `format-version 1` line, then one line per pair:
/// `pair <d> <k> kappa <f> stderr <f> samples <n> configs <n> seed <n> max_rel_residual <f>`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Calibration {
    entries: BTreeMap<(usize, usize), CalibrationEntry>,
}

impl Calibration {
    pub fn insert(&mut self, pair: DimPair, entry: CalibrationEntry) {
        self.entries.insert((pair.d(), pair.k()), entry);
    }

    pub fn get(&self, pair: DimPair) -> Option<&CalibrationEntry> {
        self.entries.get(&(pair.d(), pair.k()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| AuditError::Calibration(format!("line {line}: {msg}"));
        let mut version = None;
        let mut out = Calibration::default();
        for (no, raw) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "format-version" => {
                    let v: u32 = tokens.get(1).and_then(|t| t.parse().ok()).ok_or_else(|| bad(no, "bad version"))?;
                    if v != CALIBRATION_FORMAT_VERSION {
                        return Err(bad(no, &format!("unsupported format version {v}")));
                    }
                    version = Some(v);
                }
                "pair" => {
                    if version.is_none() {
                        return Err(bad(no, "format-version must precede entries"));
                    }
                    if tokens.len() != 15 {
                        return Err(bad(no, "expected 15 fields"));
                    }
                    let d: usize = tokens[1].parse().map_err(|_| bad(no, "bad d"))?;
                    let k: usize = tokens[2].parse().map_err(|_| bad(no, "bad k"))?;
                    let pair = DimPair::new(d, k).map_err(|e| bad(no, &e.to_string()))?;
                    let mut kv = BTreeMap::new();
                    for chunk in tokens[3..].chunks(2) {
                        kv.insert(chunk[0], chunk[1]);
                    }
                    let num = |key: &str| -> Result<f64> {
                        kv.get(key)
                            .and_then(|v| v.parse::<f64>().ok())
                            .ok_or_else(|| bad(no, &format!("missing or bad {key}")))
                    };
                    let int = |key: &str| -> Result<u64> {
                        kv.get(key)
                            .and_then(|v| v.parse::<u64>().ok())
                            .ok_or_else(|| bad(no, &format!("missing or bad {key}")))
                    };
                    out.insert(
                        pair,
                        CalibrationEntry {
                            kappa: num("kappa")?,
                            stderr: num("stderr")?,
                            samples: int("samples")? as usize,
                            configs: int("configs")? as usize,
                            seed: int("seed")?,
                            max_rel_residual: num("max_rel_residual")?,
                        },
                    );
                }
                other => return Err(bad(no, &format!("unknown key {other}"))),
            }
        }
        if version.is_none() {
            return Err(AuditError::Calibration("missing format-version line".into()));
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AuditError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# kplane-audit proportionality constants for the quadratic weight\n");
        writeln!(s, "format-version {CALIBRATION_FORMAT_VERSION}").unwrap();
        for ((d, k), e) in &self.entries {
            writeln!(
                s,
                "pair {d} {k} kappa {:.17e} stderr {:.17e} samples {} configs {} seed {} max_rel_residual {:.17e}",
                e.kappa, e.stderr, e.samples, e.configs, e.seed, e.max_rel_residual
            )
            .unwrap();
        }
        s
    }
}

fn quadratic_pair(xi: &Configuration, k: usize) -> Result<DimPair> {
    let pair = check_pair(xi, k)?;
    if pair.d() * (pair.d() - pair.k()) != 6 {
        return Err(AuditError::Domain(format!(
            "quadratic weight needs d(d-k) = 6, got {pair}"
        )));
    }
    Ok(pair)
}

/// `κ_{d,k}[(tr Var)² + 2 tr Var²]` for `(d,k) ∈ {(3,1), (6,5)}`.
pub fn i_weight_quadratic(xi: &Configuration, k: usize, calibration: &Calibration) -> Result<f64> {
    let pair = quadratic_pair(xi, k)?;
    let entry = calibration
        .get(pair)
        .ok_or_else(|| AuditError::Calibration(format!("no calibrated constant for {pair}")))?;
    Ok(entry.kappa * covariance(xi).quadratic_form())
}

/// Fitted constant with per-configuration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    pub entry: CalibrationEntry,
    pub estimates: Vec<Estimate>,
    pub forms: Vec<f64>,
}

/// Least-squares fit of `I ≈ κ q` with `q = (tr Var)² + 2 tr Var²` over
/// `configs` unit-trace configurations, `samples` Grassmann draws each.
pub fn calibrate(pair: DimPair, configs: usize, samples: usize, seed: u64) -> Result<CalibrationFit> {
    if pair.d() * (pair.d() - pair.k()) != 6 {
        return Err(AuditError::Domain(format!("quadratic weight needs d(d-k) = 6, got {pair}")));
    }
    let root = SeededStream::new(seed).named("calibration").child(pair.d() as u64).child(pair.k() as u64);
    let mut estimates = Vec::with_capacity(configs);
    let mut forms = Vec::with_capacity(configs);
    for c in 0..configs {
        let xi = unit_configuration(pair.d(), &root.child(0).child(c as u64))?;
        estimates.push(i_weight_mc(&xi, pair.k(), samples, &root.child(1).child(c as u64))?);
        forms.push(covariance(&xi).quadratic_form());
    }
    let sqq: f64 = forms.iter().map(|q| q * q).sum();
    let kappa = estimates.iter().zip(&forms).map(|(e, q)| e.value * q).sum::<f64>() / sqq;
    let stderr = estimates
        .iter()
        .zip(&forms)
        .map(|(e, q)| (q * e.stderr).powi(2))
        .sum::<f64>()
        .sqrt()
        / sqq;
    let max_rel_residual = estimates
        .iter()
        .zip(&forms)
        .map(|(e, q)| ((e.value - kappa * q) / e.value).abs())
        .fold(0.0, f64::max);
    Ok(CalibrationFit {
        entry: CalibrationEntry { kappa, stderr, samples, configs, seed, max_rel_residual },
        estimates,
        forms,
    })
}

/// Random configuration rescaled to `tr Var = 1`.
pub fn unit_configuration(d: usize, stream: &SeededStream) -> Result<Configuration> {
    let xi = Configuration::random(d, &mut stream.rng());
    let t = trace_variance(&xi)?;
    Ok(xi.scaled(1.0 / t.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityScan {
    pub c_min: f64,
    pub c_max: f64,
    pub configs: usize,
    pub samples: usize,
}

/// Extremes of `I_{d,k}(ξ)/(tr Var_ξ)^{(d(d−k)−2)/2}` over `m` unit-normalized
/// configurations. One fixed set of `n` Grassmann draws serves every
/// configuration, so the extremes move only through the configurations.
pub fn comparability_scan(pair: DimPair, m: usize, n: usize, stream: &SeededStream) -> Result<ComparabilityScan> {
    if m < 1 || n < 2 {
        return Err(AuditError::Domain("comparability scan needs m >= 1 and n >= 2".into()));
    }
    let comp = pair.complement();
    let half = pair.weight_degree() as f64 / 2.0;
    let mass = grassmann_mass(comp);
    let mut rng = stream.named("frames").rng();
    let frames: Vec<DMatrix<f64>> = (0..n)
        .map(|_| sample_frame(comp.d(), comp.k(), &mut rng).matrix().clone())
        .collect();
    let config_stream = stream.named("configurations");
    let ratios = sample_values(m, &config_stream, |rng| {
        let xi = Configuration::random(pair.d(), rng);
        let t = trace_variance(&xi)?;
        let var = covariance(&xi.scaled(1.0 / t.sqrt()));
        let vals: Vec<f64> = frames
            .iter()
            .map(|v| (v.transpose() * var.matrix() * v).trace().max(0.0).powf(half))
            .collect();
        Ok(mass * crate::manifold::pairwise_sum(&vals) / n as f64)
    })?;
    let c_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparabilityScan { c_min, c_max, configs: m, samples: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::grassmann_mass_raw;
    use crate::quadrature::integrate;
    use crate::special::ln_gamma;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn example() -> Configuration {
        Configuration::from_flat(2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn covariance_examples() {
        let v = covariance(&example());
        let expect = DMatrix::from_row_slice(2, 2, &[2.0 / 9.0, -1.0 / 9.0, -1.0 / 9.0, 2.0 / 9.0]);
        assert!((v.matrix() - &expect).amax() < 1e-15);
        assert!((covariance_by_moments(&example()) - expect).amax() < 1e-15);
        assert_relative_eq!(trace_variance(&example()).unwrap(), 4.0 / 9.0, max_relative = 1e-15);
        let same = Configuration::from_flat(2, &[0.3, 0.3, 0.3, 0.3, 0.3, 0.3]).unwrap();
        assert_eq!(covariance(&same).matrix().amax(), 0.0);
        assert_eq!(trace_variance(&same).unwrap(), 0.0);
    }

    #[test]
    fn configuration_validation() {
        assert!(Configuration::from_flat(2, &[1.0; 5]).is_err());
        assert!(Configuration::new(vec![DVector::zeros(2), DVector::zeros(3), DVector::zeros(2)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn covariance_is_translation_invariant_and_quadratic(
            flat in prop::collection::vec(-5.0f64..5.0, 12),
            shift in prop::collection::vec(-10.0f64..10.0, 3),
            lambda in 0.1f64..10.0,
        ) {
            let xi = Configuration::from_flat(3, &flat).unwrap();
            let v = covariance(&xi);
            let moved = covariance(&xi.translated(&DVector::from_vec(shift)));
            let scale = v.matrix().amax().max(1e-300);
            prop_assert!((v.matrix() - moved.matrix()).amax() <= 1e-12 * scale.max(1.0));
            let t = trace_variance(&xi).unwrap();
            let ts = trace_variance(&xi.scaled(lambda)).unwrap();
            prop_assert!((ts - lambda * lambda * t).abs() <= 1e-12 * ts.max(1e-300));
            prop_assert!((covariance_by_moments(&xi) - v.matrix()).amax() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn planar_weight_is_the_grassmann_mass() {
        let s = SeededStream::new(3);
        for c in 0..5 {
            let xi = Configuration::random(2, &mut s.child(c).rng());
            let a = i_weight_mc(&xi, 1, 1000, &s.child(100 + c)).unwrap();
            let b = i_weight_eigen_mc(&xi, 1, 1000, &s.child(200 + c)).unwrap();
            assert_eq!(a.value, PI);
            assert_eq!(a.stderr, 0.0);
            assert_relative_eq!(b.value, PI, max_relative = 1e-15);
            assert_eq!(b.stderr, 0.0);
        }
    }

    #[test]
    fn degenerate_configuration_has_zero_weight() {
        let xi = Configuration::from_flat(3, &[1.0, 2.0, 3.0].repeat(4)).unwrap();
        let e = i_weight_mc(&xi, 1, 100, &SeededStream::new(0)).unwrap();
        assert_eq!(e.value, 0.0);
    }

    /// `∫_{G_{3,2}}(tr V − uᵀVu)² = 2π · 2(3(tr V)² + tr V²)/15` with `u` the unit normal.
    fn exact_31(xi: &Configuration) -> f64 {
        let v = covariance(xi);
        let t = v.trace();
        let t2 = v.matrix().component_mul(v.matrix()).sum();
        2.0 * PI * 2.0 * (3.0 * t * t + t2) / 15.0
    }

    /// `∫_{G_{6,1}} (uᵀVu)² = (π³/2)((tr V)² + 2 tr V²)/48`.
    fn exact_65(xi: &Configuration) -> f64 {
        PI.powi(3) / 2.0 * covariance(xi).quadratic_form() / 48.0
    }

    #[test]
    fn quadratic_cases_match_sphere_moments() {
        let s = SeededStream::new(17);
        for c in 0..4 {
            let xi = Configuration::random(3, &mut s.child(c).rng());
            let e = i_weight_mc(&xi, 1, 40_000, &s.child(10 + c)).unwrap();
            assert!((e.value - exact_31(&xi)).abs() < 4.0 * e.stderr, "{} vs {}", e.value, exact_31(&xi));
            let xi = Configuration::random(6, &mut s.child(20 + c).rng());
            let e = i_weight_mc(&xi, 5, 40_000, &s.child(30 + c)).unwrap();
            assert!((e.value - exact_65(&xi)).abs() < 4.0 * e.stderr);
        }
    }

    #[test]
    fn rank_one_covariance_reduces_to_a_beta_moment() {
        // Var = diag(λ², 0, …): tr(P Var) = λ² x, x = |P e_1|² ~ Beta((d−k)/2, k/2)
        for (d, k) in [(3usize, 1usize), (4, 1), (4, 3)] {
            let pair = DimPair::new(d, k).unwrap();
            let mut flat = vec![0.0; d * (d + 1)];
            flat[0] = 1.0;
            flat[d] = -1.0;
            let xi = Configuration::from_flat(d, &flat).unwrap();
            let lambda_sq = covariance(&xi).trace();
            let (a, b) = ((d - k) as f64 / 2.0, k as f64 / 2.0);
            let m = pair.weight_degree() as f64 / 2.0;
            let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
            // x = sin²φ removes the endpoint singularities of the Beta density
            let moment = integrate(
                |phi: f64| {
                    let (sn, cs) = phi.sin_cos();
                    2.0 * sn.powf(2.0 * (a + m) - 1.0) * cs.powf(2.0 * b - 1.0) * (-ln_beta).exp()
                },
                0.0,
                PI / 2.0,
                1e-10,
                0.0,
            )
            .unwrap()
            .value;
            let expect = grassmann_mass_raw(d, d - k).unwrap() * lambda_sq.powf(m) * moment;
            let s = SeededStream::new(d as u64 * 10 + k as u64);
            let e1 = i_weight_mc(&xi, k, 50_000, &s).unwrap();
            let e2 = i_weight_eigen_mc(&xi, k, 50_000, &s.child(1)).unwrap();
            assert!((e1.value - expect).abs() < 4.0 * e1.stderr, "({d},{k}) {} vs {expect}", e1.value);
            assert!((e2.value - expect).abs() < 4.0 * e2.stderr);
        }
    }

    #[test]
    fn homogeneity_and_rotation_invariance() {
        let s = SeededStream::new(5);
        let xi = Configuration::random(3, &mut s.rng());
        let base = i_weight_mc(&xi, 2, 20_000, &s.child(1)).unwrap();
        for (j, lambda) in [0.5, 2.0, 10.0].into_iter().enumerate() {
            let e = i_weight_mc(&xi.scaled(lambda), 2, 20_000, &s.child(2 + j as u64)).unwrap();
            let expect = base.scaled(lambda.powi(1));
            assert!(e.z_score(&expect) < 4.0);
        }
        let q = crate::manifold::sample_frame(3, 3, &mut s.child(9).rng()).matrix().clone();
        let rotated = i_weight_mc(&xi.transformed(&q), 2, 20_000, &s.child(10)).unwrap();
        assert!(rotated.z_score(&base) < 4.0);
        // same stream: translation leaves every draw unchanged
        let shifted = i_weight_mc(&xi.translated(&DVector::from_element(3, 4.0)), 2, 20_000, &s.child(1)).unwrap();
        assert_relative_eq!(shifted.value, base.value, max_relative = 1e-12);
    }

    #[test]
    fn calibration_round_trip_and_refusal() {
        let xi = Configuration::random(3, &mut SeededStream::new(1).rng());
        let empty = Calibration::parse("format-version 1\n").unwrap();
        assert!(matches!(i_weight_quadratic(&xi, 1, &empty), Err(AuditError::Calibration(_))));
        assert!(matches!(i_weight_quadratic(&xi, 2, &empty), Err(AuditError::Domain(_))));
        assert!(Calibration::parse("pair 3 1 kappa 1").is_err());
        assert!(Calibration::parse("format-version 2\n").is_err());
        assert!(Calibration::load(Path::new("/nonexistent/calibration.txt")).is_err());

        let fit = calibrate(DimPair::new(6, 5).unwrap(), 5, 20_000, 4).unwrap();
        let mut cal = Calibration::default();
        cal.insert(DimPair::new(6, 5).unwrap(), fit.entry);
        let parsed = Calibration::parse(&cal.render()).unwrap();
        assert_eq!(parsed, cal);
        // exact constant for (6,5) is π³/96
        assert!((fit.entry.kappa - PI.powi(3) / 96.0).abs() < 4.0 * fit.entry.stderr);
        // regular tetrahedron vertices: Var = I, so the form is 9 + 6
        let tetra = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, 1.0];
        let iso = Configuration::from_flat(3, &tetra).unwrap();
        assert!((covariance(&iso).matrix() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        let c31 = Calibration::parse(
            "format-version 1\npair 3 1 kappa 2 stderr 0 samples 1 configs 1 seed 0 max_rel_residual 0\n",
        )
        .unwrap();
        assert_relative_eq!(i_weight_quadratic(&iso, 1, &c31).unwrap(), 30.0, max_relative = 1e-15);
    }

    #[test]
    fn comparability_extremes() {
        let s = SeededStream::new(8);
        let planar = comparability_scan(DimPair::new(2, 1).unwrap(), 50, 64, &s).unwrap();
        assert_eq!(planar.c_min, PI);
        assert_eq!(planar.c_max, PI);
        let scan = comparability_scan(DimPair::new(3, 1).unwrap(), 500, 512, &s).unwrap();
        assert!(scan.c_min > 0.0 && scan.c_min <= scan.c_max && scan.c_max.is_finite());
        // exact (3,1) extremes: 2π·2(3 + s)/15 for s = tr V²/(tr V)² ∈ [1/3, 1]
        assert!(scan.c_min > 0.95 * 2.0 * PI * 2.0 * (10.0 / 3.0) / 15.0);
        assert!(scan.c_max < 1.05 * 2.0 * PI * 8.0 / 15.0);
    }
}
