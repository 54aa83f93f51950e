//! The determinant `ρ`, the map `L`, singular pairings `⟨A_k, F⟩` through
//! Rubin's Stiefel representation, and checks built on them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constants::{d_constant, gamma_product, grassmann_mass, stiefel_mass, DimPair};
use crate::error::{AuditError, Result};
use crate::gaussian::GaussianPacket;
use crate::manifold::{stiefel_integral, Estimate, OrthonormalFrame, SeededStream};
use crate::quadrature::{integrate_real_line, try_integrate};
use crate::weight::{covariance, Configuration};

/// Point tuple `x = (x_1, …, x_{d+1}) ∈ (ℝ^d)^{d+1}`.
pub type BigConfiguration = Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingMethod {
    /// Frame-independent inner integral, evaluated once.
    RubinExact,
    /// Monte Carlo over the Stiefel manifold.
    RubinMc,
    /// Adaptive quadrature over the circle `V_{2,1}`.
    RubinQuadrature,
    /// Direct evaluation of `∫ F δ(ρ)` in polar variables.
    PolarOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub value: f64,
    pub stderr: f64,
    pub method: PairingMethod,
}

impl PairingResult {
    pub fn estimate(&self) -> Estimate {
        Estimate { value: self.value, stderr: self.stderr, samples: 0 }
    }
}

/// `ρ(x) = det [[1, …, 1], [x_1, …, x_{d+1}]]`.
pub fn rho(x: &BigConfiguration) -> f64 {
    let d = x.d();
    let m = DMatrix::from_fn(d + 1, d + 1, |r, c| if r == 0 { 1.0 } else { x.points()[c][r - 1] });
    m.determinant()
}

/// `L(x) = (x_1 − x_{d+1}, …, x_d − x_{d+1}, x_{d+1})`, flattened.
pub fn apply_l(x: &BigConfiguration) -> Vec<f64> {
    let d = x.d();
    let last = &x.points()[d];
    let mut out = Vec::with_capacity(d * (d + 1));
    for p in &x.points()[..d] {
        out.extend((p - last).iter());
    }
    out.extend(last.iter());
    out
}

/// `L⁻¹(z) = (z_1 + z_{d+1}, …, z_d + z_{d+1}, z_{d+1})`.
pub fn apply_l_inverse(z: &[f64], d: usize) -> Result<BigConfiguration> {
    if z.len() != d * (d + 1) {
        return Err(AuditError::DimensionMismatch { expected: d * (d + 1), got: z.len() });
    }
    let last = &z[d * d..];
    let flat: Vec<f64> = (0..d * (d + 1))
        .map(|i| if i < d * d { z[i] + last[i % d] } else { z[i] })
        .collect();
    Configuration::from_flat(d, &flat)
}

/// Linear map `(y_1, …, y_d, x_{d+1}) ↦ L⁻¹(V y_1, …, V y_d, x_{d+1})` from
/// `ℝ^{kd + d}` to `ℝ^{d(d+1)}`.
pub fn rubin_map(frame: &OrthonormalFrame) -> DMatrix<f64> {
    let (d, k) = (frame.d(), frame.k());
    let v = frame.matrix();
    let mut b = DMatrix::<f64>::zeros(d * (d + 1), k * d + d);
    for i in 0..=d {
        if i < d {
            b.view_mut((i * d, i * k), (d, k)).copy_from(v);
        }
        b.view_mut((i * d, k * d), (d, d)).fill_with_identity();
    }
    b
}

/// `∫_{Mat(k,d)} ∫_{ℝ^d} F(L⁻¹(VY, x_{d+1})) dx_{d+1} dY`.
pub fn rubin_inner(f: &GaussianPacket, frame: &OrthonormalFrame) -> Result<f64> {
    let z = f.ln_integral_along(&rubin_map(frame), &DVector::zeros(f.dim()))?;
    Ok(z.exp().re)
}

fn check_real(f: &GaussianPacket, expected_dim: usize) -> Result<()> {
    if f.dim() != expected_dim {
        return Err(AuditError::DimensionMismatch { expected: expected_dim, got: f.dim() });
    }
    if f.imaginary_defect() > 1e-12 {
        return Err(AuditError::InvalidPacket("pairings need a real-valued packet".into()));
    }
    Ok(())
}

fn circle_frame(theta: f64) -> OrthonormalFrame {
    let (s, c) = theta.sin_cos();
    OrthonormalFrame::new(DMatrix::from_column_slice(2, 1, &[c, s])).expect("unit vector")
}

fn canonical_frame(d: usize, k: usize) -> OrthonormalFrame {
    OrthonormalFrame::new(DMatrix::identity(d, k)).expect("coordinate frame")
}

/// `⟨A_k, F⟩ = (1/γ_{d−k}(d−k)) ∫_{V_{d,k}} ∫ F(L⁻¹(VY, x_{d+1})) dx_{d+1} dY dμ_V`.
///
/// Radial packets use one frame; `d = 2` integrates the circle of frames by
/// quadrature; otherwise `n` Stiefel samples are drawn from `stream`.
pub fn pair_ak_gaussian(f: &GaussianPacket, pair: DimPair, n: usize, stream: &SeededStream) -> Result<PairingResult> {
    let (d, k) = (pair.d(), pair.k());
    check_real(f, d * (d + 1))?;
    let prefactor = 1.0 / gamma_product(d - k, (d - k) as f64)?;
    if f.radial_width().is_some() {
        let inner = rubin_inner(f, &canonical_frame(d, k))?;
        return Ok(PairingResult {
            value: prefactor * stiefel_mass(pair) * inner,
            stderr: 0.0,
            method: PairingMethod::RubinExact,
        });
    }
    if d == 2 {
        // μ_V on V_{2,1} is arc length on the unit circle
        let r = try_integrate(|theta| rubin_inner(f, &circle_frame(theta)), 0.0, 2.0 * PI, 1e-12, 0.0);
        return Ok(PairingResult {
            value: prefactor * r?.value,
            stderr: 0.0,
            method: PairingMethod::RubinQuadrature,
        });
    }
    let est = stiefel_integral(d, k, n, stream, |v| rubin_inner(f, v))?.scaled(prefactor);
    Ok(PairingResult { value: est.value, stderr: est.stderr, method: PairingMethod::RubinMc })
}

/// `∫_{(ℝ²)³} F δ(ρ)` for a real packet on `ℝ⁶`.
///
/// With `x_2 − x_1 = r_2 e(a)`, `x_3 − x_1 = r_3 e(a) + q e(a)^⊥`, the delta
/// removes `q` and the Jacobian, leaving
/// `∫_0^π da ∫ dr_2 ∫ dr_3 ∫ dx_1 F(x_1, x_1 + r_2 e, x_1 + r_3 e)`.
/// The `(x_1, r_3)` integral is Gaussian and done in closed form here with
/// real arithmetic; `(a, r_2)` are integrated numerically.
pub fn delta_rho_pair_2d(f: &GaussianPacket) -> Result<PairingResult> {
    check_real(f, 6)?;
    let a_mat = f.a().map(|z| z.re);
    let b_vec = f.b().map(|z| z.re);
    let c0 = f.c().re;

    let slice = |angle: f64| -> Result<Box<dyn Fn(f64) -> f64>> {
        let e = [angle.cos(), angle.sin()];
        // columns: x_1 (2), r_3 (1)
        let mut bm = DMatrix::<f64>::zeros(6, 3);
        for blk in 0..3 {
            bm[(2 * blk, 0)] = 1.0;
            bm[(2 * blk + 1, 1)] = 1.0;
        }
        bm[(4, 2)] = e[0];
        bm[(5, 2)] = e[1];
        let mut o1 = DVector::<f64>::zeros(6);
        o1[2] = e[0];
        o1[3] = e[1];
        let s = bm.transpose() * &a_mat * &bm;
        let chol = s
            .clone()
            .cholesky()
            .ok_or_else(|| AuditError::Defect("restricted quadratic form is not positive definite".into()))?;
        let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let s_inv = chol.inverse();
        let p0 = bm.transpose() * &b_vec;
        let p1 = -2.0 * (bm.transpose() * &a_mat * &o1);
        let (q00, q01, q11) = (
            p0.dot(&(&s_inv * &p0)),
            p0.dot(&(&s_inv * &p1)),
            p1.dot(&(&s_inv * &p1)),
        );
        let (l1, l2) = (b_vec.dot(&o1), o1.dot(&(&a_mat * &o1)));
        let base = 1.5 * PI.ln() - 0.5 * ln_det + c0;
        Ok(Box::new(move |r2: f64| {
            // Bᵀ(b − 2A o) = p0 + r2 p1, c' = c + r2 b·o1 − r2² o1ᵀAo1
            let quad = (q00 + 2.0 * r2 * q01 + r2 * r2 * q11) / 4.0;
            (base + r2 * l1 - r2 * r2 * l2 + quad).exp()
        }))
    };

    let outer = try_integrate(
        |angle| Ok(integrate_real_line(slice(angle)?, 1e-13, 0.0)?.value),
        0.0,
        PI,
        1e-12,
        0.0,
    );
    Ok(PairingResult { value: outer?.value, stderr: 0.0, method: PairingMethod::PolarOracle })
}

/// Both sides of `⟨A_k, f_1 ⊗ ⋯ ⊗ f_{d+1}⟩ = 𝐃_{d,k} ∫_ℳ ∏ T_{d,k} f_i dμ_ℳ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DruryComparison {
    pub lhs: PairingResult,
    pub rhs: PairingResult,
}

impl DruryComparison {
    pub fn ratio(&self) -> f64 {
        self.lhs.value / self.rhs.value
    }

    pub fn z_score(&self) -> f64 {
        self.lhs.estimate().z_score(&self.rhs.estimate())
    }

    /// Standard error of the ratio, from the two relative errors.
    pub fn ratio_stderr(&self) -> f64 {
        self.ratio() * (self.lhs.estimate().relative_stderr()).hypot(self.rhs.estimate().relative_stderr())
    }
}

/// `∫_{Π^⊥} ∏_i ∫_{ℝ^k} f_i(V y_i + U z) dy_i dz` for the plane spanned by `V`.
pub fn plane_product_integral(factors: &[GaussianPacket], frame: &OrthonormalFrame) -> Result<f64> {
    let (d, k) = (frame.d(), frame.k());
    let u = frame.complement();
    let refs: Vec<&GaussianPacket> = factors.iter().collect();
    let tensor = GaussianPacket::tensor(&refs);
    let m = factors.len();
    let cols = k * m + (d - k);
    let mut b = DMatrix::<f64>::zeros(d * m, cols);
    for i in 0..m {
        b.view_mut((i * d, i * k), (d, k)).copy_from(frame.matrix());
        b.view_mut((i * d, k * m), (d, d - k)).copy_from(u.matrix());
    }
    Ok(tensor.ln_integral_along(&b, &DVector::zeros(d * m))?.exp().re)
}

/// Evaluates both sides of Drury's identity. The left side goes through
/// [`pair_ak_gaussian`] on the tensor product; the right side integrates the
/// product of plane transforms over orientations, with an independent
/// substream.
pub fn drury_audit(factors: &[GaussianPacket], pair: DimPair, n: usize, stream: &SeededStream) -> Result<DruryComparison> {
    let (d, k) = (pair.d(), pair.k());
    if factors.len() != d + 1 {
        return Err(AuditError::DimensionMismatch { expected: d + 1, got: factors.len() });
    }
    for f in factors {
        check_real(f, d)?;
    }
    let refs: Vec<&GaussianPacket> = factors.iter().collect();
    let lhs = pair_ak_gaussian(&GaussianPacket::tensor(&refs), pair, n, &stream.named("drury-lhs"))?;

    let dk = d_constant(pair);
    let rhs = if factors.iter().all(|f| f.radial_width().is_some()) {
        let j = plane_product_integral(factors, &canonical_frame(d, k))?;
        PairingResult { value: dk * grassmann_mass(pair) * j, stderr: 0.0, method: PairingMethod::RubinExact }
    } else if d == 2 {
        let r = try_integrate(|theta| plane_product_integral(factors, &circle_frame(theta)), 0.0, PI, 1e-12, 0.0);
        PairingResult { value: dk * r?.value, stderr: 0.0, method: PairingMethod::RubinQuadrature }
    } else {
        // μ_G-average through frames: ∫_G φ dμ_G = γ_k(k) ∫_V φ dμ_V
        let est = stiefel_integral(d, k, n, &stream.named("drury-rhs"), |v| plane_product_integral(factors, v))?
            .scaled(dk * gamma_product(k, k as f64)?);
        PairingResult { value: est.value, stderr: est.stderr, method: PairingMethod::RubinMc }
    };
    Ok(DruryComparison { lhs, rhs })
}

/// `M = I + (√(d+1) − 1) 𝟏𝟏ᵀ` with `𝟏` the unit vector along `(1, …, 1)`.
pub fn lemma_matrix(d: usize) -> DMatrix<f64> {
    let c = ((d + 1) as f64).sqrt() - 1.0;
    DMatrix::identity(d, d) + DMatrix::from_element(d, d, c / d as f64)
}

/// `M⁻¹ = I + (1/√(d+1) − 1) 𝟏𝟏ᵀ`.
pub fn lemma_matrix_inverse(d: usize) -> DMatrix<f64> {
    let c = 1.0 / ((d + 1) as f64).sqrt() - 1.0;
    DMatrix::identity(d, d) + DMatrix::from_element(d, d, c / d as f64)
}

/// `‖Ω_M Ω_Mᵀ − (d+1) Var_ω‖_max` with `Ω_M = Ω′M⁻¹` and `Ω′` holding the
/// columns `ω_i − ω_{d+1}`.
pub fn covariance_lemma_check(omega: &BigConfiguration) -> f64 {
    let d = omega.d();
    let last = &omega.points()[d];
    let cols: Vec<DVector<f64>> = omega.points()[..d].iter().map(|p| p - last).collect();
    let omega_prime = DMatrix::from_columns(&cols);
    let om = omega_prime * lemma_matrix_inverse(d);
    let lhs = &om * om.transpose();
    (lhs - covariance(omega).matrix() * (d + 1) as f64).amax()
}

/// Whether `(ξ, η)` lies in the support of `dΣ_ξ(η) dξ`: equal norms, equal
/// sums, and co-`k`-planar differences `ξ_i − η_i`.
///
/// Norm and sum conditions use `tol` absolutely; the rank condition compares
/// singular values beyond the `k`-th with `tol` times the largest.
pub fn support_predicate(xi: &BigConfiguration, eta: &BigConfiguration, k: usize, tol: f64) -> Result<bool> {
    let d = xi.d();
    if eta.d() != d {
        return Err(AuditError::DimensionMismatch { expected: d, got: eta.d() });
    }
    if !(tol > 0.0) {
        return Err(AuditError::Domain("tolerance must be positive".into()));
    }
    let norm = |c: &Configuration| c.points().iter().map(|p| p.norm_squared()).sum::<f64>();
    if (norm(xi) - norm(eta)).abs() > tol {
        return Ok(false);
    }
    let sum = |c: &Configuration| c.points().iter().fold(DVector::zeros(d), |acc, p| acc + p);
    if (sum(xi) - sum(eta)).norm() > tol {
        return Ok(false);
    }
    let diffs: Vec<DVector<f64>> = xi.points().iter().zip(eta.points()).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().fold(DVector::zeros(d), |acc, p| acc + p) / (d + 1) as f64;
    let centered = DMatrix::from_columns(&diffs.iter().map(|p| p - &mean).collect::<Vec<_>>());
    let mut sv: Vec<f64> = centered.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let largest = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().skip(k).all(|&s| s <= tol * largest))
}
