//! Haar sampling on Stiefel and Grassmann manifolds, with seeded,
//! thread-count independent Monte Carlo estimates.
//!
//! Estimates are integrals against the *masses* `μ_V` (total `1/γ_k(d)`) and
//! `μ_G` (total `γ_k(k)/γ_k(d)`), not against probability measures.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{grassmann_mass, stiefel_mass_raw, DimPair};
use crate::error::{AuditError, Result};
use crate::quadrature::integrate;

/// Samples are generated in blocks of this size, one substream per block.
pub const BLOCK: usize = 1024;

/// A counter-based random substream identified by `(seed, path)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededStream {
    pub seed: u64,
    pub path: Vec<u64>,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: Vec::new() }
    }

    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self { seed: self.seed, path }
    }

    /// Child stream keyed by a label; the label is hashed into the path.
    pub fn named(&self, label: &str) -> Self {
        let h = Sha256::digest(label.as_bytes());
        let mut b = [0u8; 8];
        b.copy_from_slice(&h[..8]);
        self.child(u64::from_le_bytes(b))
    }

    pub fn rng(&self) -> ChaCha20Rng {
        // length-prefixed encoding keeps (seed, path) → key injective
        let mut hasher = Sha256::new();
        hasher.update(b"kplane-audit/stream/v1");
        hasher.update(self.seed.to_le_bytes());
        hasher.update((self.path.len() as u64).to_le_bytes());
        for p in &self.path {
            hasher.update(p.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest[..32]);
        ChaCha20Rng::from_seed(key)
    }
}

/// A `d × k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame {
    v: DMatrix<f64>,
}

impl OrthonormalFrame {
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        let gram = v.transpose() * &v;
        let k = v.ncols();
        let defect = (gram - DMatrix::<f64>::identity(k, k)).amax();
        if k > v.nrows() || defect > 1e-12 {
            return Err(AuditError::Domain(format!(
                "frame is not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self { v })
    }

    pub fn d(&self) -> usize {
        self.v.nrows()
    }

    pub fn k(&self) -> usize {
        self.v.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Orthonormal basis of the orthogonal complement, as a `d × (d − k)` frame.
    pub fn complement(&self) -> OrthonormalFrame {
        let (d, k) = (self.d(), self.k());
        let mut cols: Vec<DVector<f64>> = self.v.column_iter().map(|c| c.into_owned()).collect();
        for e in 0..d {
            if cols.len() == d {
                break;
            }
            let mut w = DVector::<f64>::zeros(d);
            w[e] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let dot = c.dot(&w);
                    w.axpy(-dot, c, 1.0);
                }
            }
            let norm = w.norm();
            if norm > 1e-6 {
                cols.push(w / norm);
            }
        }
        OrthonormalFrame {
            v: DMatrix::from_columns(&cols[k..]),
        }
    }
}

/// An affine `k`-plane `{offset + V y}` with `offset ⟂ span V`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineKPlane {
    frame: OrthonormalFrame,
    offset: DVector<f64>,
}

impl AffineKPlane {
    pub fn new(frame: OrthonormalFrame, offset: DVector<f64>) -> Result<Self> {
        if offset.len() != frame.d() {
            return Err(AuditError::DimensionMismatch { expected: frame.d(), got: offset.len() });
        }
        let along = frame.matrix().transpose() * &offset;
        if along.norm() > 1e-12 * offset.norm().max(1.0) {
            return Err(AuditError::Domain("plane offset must be perpendicular to the plane".into()));
        }
        Ok(Self { frame, offset })
    }

    pub fn frame(&self) -> &OrthonormalFrame {
        &self.frame
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }
}

/// Orthonormalizes the columns of `m` in place (two passes of modified
/// Gram–Schmidt). The implied triangular factor has a positive diagonal.
fn orthonormalize(m: &mut DMatrix<f64>) {
    let k = m.ncols();
    for j in 0..k {
        for _ in 0..2 {
            for p in 0..j {
                let dot = m.column(p).dot(&m.column(j));
                let prev = m.column(p).into_owned();
                m.column_mut(j).axpy(-dot, &prev, 1.0);
            }
        }
        let norm = m.column(j).norm();
        m.column_mut(j).unscale_mut(norm);
    }
}

/// Draws a frame from the Haar probability measure on `V_{d,k}`.
pub fn sample_frame<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> OrthonormalFrame {
    let mut m = DMatrix::<f64>::from_fn(d, k, |_, _| rng.sample(StandardNormal));
    orthonormalize(&mut m);
    OrthonormalFrame { v: m }
}

/// Draws a frame distributed by normalized Haar measure on `V_{d,k}`.
pub fn sample_stiefel(pair: DimPair, stream: &SeededStream) -> OrthonormalFrame {
    sample_frame(pair.d(), pair.k(), &mut stream.rng())
}

/// Orthogonal projection `V Vᵀ` onto the span of the frame.
pub fn projection(frame: &OrthonormalFrame) -> DMatrix<f64> {
    frame.matrix() * frame.matrix().transpose()
}

/// Sum with a fixed pairwise reduction tree, so the result depends only on
/// the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Monte Carlo estimate of an integral, with the standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, samples: 0 }
    }

    /// `mass × mean(values)` with `mass × sd/√N` as the standard error.
    pub fn from_values(values: &[f64], mass: f64) -> Self {
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Self {
            value: mass * mean,
            stderr: mass * (var / n as f64).sqrt(),
            samples: n,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            stderr: self.stderr * factor.abs(),
            samples: self.samples,
        }
    }

    pub fn relative_stderr(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.stderr / self.value.abs()
        }
    }

    /// `|a − b| / sqrt(se_a² + se_b²)`; zero when both are exact and equal.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let diff = (self.value - other.value).abs();
        let se = self.stderr.hypot(other.stderr);
        if diff == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            diff / se
        }
    }
}

/// Evaluates `f` on `n` draws; draw `i` lives in block `i / BLOCK`, whose
/// generator is `stream.child(block)`. Output order is the draw order for
/// any thread count.
pub fn sample_values<F>(n: usize, stream: &SeededStream, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha20Rng) -> Result<f64> + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let chunks: Vec<Result<Vec<f64>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.child(b as u64).rng();
            let len = BLOCK.min(n - b * BLOCK);
            let mut out = Vec::with_capacity(len);
            for j in 0..len {
                let v = f(&mut rng)?;
                if !v.is_finite() {
                    return Err(AuditError::NonFinite { index: b * BLOCK + j });
                }
                out.push(v);
            }
            Ok(out)
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    for c in chunks {
        values.extend(c?);
    }
    Ok(values)
}

/// `∫_{V_{d,k}} f dμ_V` by Monte Carlo (`k = d` allowed).
pub fn stiefel_integral<F>(d: usize, k: usize, n: usize, stream: &SeededStream, f: F) -> Result<Estimate>
where
    F: Fn(&OrthonormalFrame) -> Result<f64> + Sync,
{
    if n < 2 {
        return Err(AuditError::Domain("Monte Carlo needs at least 2 samples".into()));
    }
    let mass = stiefel_mass_raw(d, k)?;
    let values = sample_values(n, stream, |rng| f(&sample_frame(d, k, rng)))?;
    Ok(Estimate::from_values(&values, mass))
}

/// `∫_{G_{d,k}} φ(P_Π) dμ_G(Π)` by Monte Carlo.
pub fn grassmann_expectation<F>(phi: F, pair: DimPair, n: usize, stream: &SeededStream) -> Result<Estimate>
where
    F: Fn(&DMatrix<f64>) -> f64 + Sync,
{
    if n < 2 {
        return Err(AuditError::Domain("Monte Carlo needs at least 2 samples".into()));
    }
    let values = sample_values(n, stream, |rng| {
        Ok(phi(&projection(&sample_frame(pair.d(), pair.k(), rng))))
    })?;
    Ok(Estimate::from_values(&values, grassmann_mass(pair)))
}

/// `∫_0^π φ(P(θ)) dθ` over lines in the plane, `P(θ)` projecting onto
/// `(cos θ, sin θ)`.
pub fn exact_grassmann_quadrature_2d<F>(phi: F) -> Result<f64>
where
    F: Fn(&DMatrix<f64>) -> f64,
{
    let r = integrate(
        |theta: f64| {
            let (s, c) = theta.sin_cos();
            let p = DMatrix::from_row_slice(2, 2, &[c * c, c * s, c * s, s * s]);
            phi(&p)
        },
        0.0,
        PI,
        1e-12,
        1e-300,
    )?;
    Ok(r.value)
}
