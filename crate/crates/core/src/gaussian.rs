//! Closed-form calculus of Gaussian packets `x ↦ exp(−xᵀAx + b·x + c)` with
//! complex symmetric `A` whose real part is positive definite.
//!
//! Square roots and logarithms of `det A` are taken on the branch continued
//! from real positive-definite matrices. For such `A` every pivot of the
//! unpivoted `LDLᵀ` factorization has positive real part (the class is closed
//! under Schur complements), so `Σ Log(pivot)` is continuous on the whole
//! class and agrees with the real logarithm on the real slice. No path
//! tracking is needed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{AuditError, Result};
use crate::manifold::AffineKPlane;

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// Unpivoted `A = L D Lᵀ` of a complex symmetric matrix.
#[derive(Debug, Clone)]
pub(crate) struct SymFactor {
    l: DMatrix<C64>,
    pivots: Vec<C64>,
}

impl SymFactor {
    pub(crate) fn new(a: &DMatrix<C64>) -> Result<Self> {
        let n = a.nrows();
        let mut l = DMatrix::<C64>::identity(n, n);
        let mut pivots = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let mut dj = a[(j, j)];
            for p in 0..j {
                dj -= l[(j, p)] * l[(j, p)] * pivots[p];
            }
            if !(dj.re > 0.0) {
                return Err(AuditError::InvalidPacket(format!(
                    "pivot {j} = {dj} has non-positive real part"
                )));
            }
            pivots[j] = dj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)] * pivots[p];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(Self { l, pivots })
    }

    pub(crate) fn log_det(&self) -> C64 {
        self.pivots.iter().map(|d| d.ln()).sum()
    }

    pub(crate) fn solve(&self, rhs: &DVector<C64>) -> DVector<C64> {
        let n = rhs.len();
        let mut y = rhs.clone();
        for i in 0..n {
            for p in 0..i {
                let t = self.l[(i, p)] * y[p];
                y[i] -= t;
            }
        }
        for i in 0..n {
            y[i] /= self.pivots[i];
        }
        for i in (0..n).rev() {
            for p in (i + 1)..n {
                let t = self.l[(p, i)] * y[p];
                y[i] -= t;
            }
        }
        y
    }

    pub(crate) fn inverse(&self) -> DMatrix<C64> {
        let n = self.pivots.len();
        let mut inv = DMatrix::<C64>::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::<C64>::zeros(n);
            e[j] = C64::new(1.0, 0.0);
            inv.set_column(j, &self.solve(&e));
        }
        inv
    }
}

/// `ln ∫_{ℝⁿ} exp(−xᵀAx + b·x + c) dx` for valid coefficients.
pub(crate) fn ln_gaussian_integral(a: &DMatrix<C64>, b: &DVector<C64>, c: C64) -> Result<C64> {
    let n = a.nrows();
    let f = SymFactor::new(a)?;
    let kb = f.solve(b);
    let quad = b.iter().zip(kb.iter()).map(|(x, y)| x * y).sum::<C64>();
    Ok(c + quad / 4.0 + 0.5 * n as f64 * PI.ln() - 0.5 * f.log_det())
}

fn bilinear(x: &DVector<C64>, y: &DVector<C64>) -> C64 {
    x.iter().zip(y.iter()).map(|(p, q)| p * q).sum()
}

/// Immutable Gaussian packet `exp(−xᵀAx + b·x + c)` on `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPacket {
    a: DMatrix<C64>,
    b: DVector<C64>,
    c: C64,
}

impl GaussianPacket {
    /// Builds a packet, symmetrizing `A` from its upper triangle and checking
    /// that `Re A` is positive definite.
    pub fn new(a: DMatrix<C64>, b: DVector<C64>, c: C64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(AuditError::InvalidPacket("A must be square".into()));
        }
        if b.len() != n {
            return Err(AuditError::DimensionMismatch { expected: n, got: b.len() });
        }
        let mut a = a;
        for i in 0..n {
            for j in 0..i {
                a[(i, j)] = a[(j, i)];
            }
        }
        let re = a.map(|z| z.re);
        let scale = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min_eig = if n == 0 {
            f64::INFINITY
        } else {
            SymmetricEigen::new(re).eigenvalues.min()
        };
        if !(min_eig > 1e-12 * scale) || !scale.is_finite() {
            return Err(AuditError::InvalidPacket(format!(
                "Re A is not positive definite (smallest eigenvalue {min_eig:e})"
            )));
        }
        if b.iter().any(|z| !z.is_finite()) || !c.is_finite() {
            return Err(AuditError::InvalidPacket("non-finite coefficients".into()));
        }
        Ok(Self { a, b, c })
    }

    /// `exp(−α|x|²)` on `ℝⁿ`.
    pub fn isotropic(n: usize, alpha: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal_element(n, n, C64::new(alpha, 0.0)),
            DVector::zeros(n),
            C64::new(0.0, 0.0),
        )
    }

    /// Packet with real coefficients.
    pub fn real(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        Self::new(a.map(C64::from), b.map(C64::from), C64::from(c))
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<C64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<C64> {
        &self.b
    }

    pub fn c(&self) -> C64 {
        self.c
    }

    fn exponent(&self, x: &[f64]) -> C64 {
        let n = self.dim();
        let mut q = C64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                row += self.a[(i, j)] * x[j];
            }
            q += row * x[i];
        }
        let lin: C64 = self.b.iter().zip(x).map(|(bi, xi)| bi * xi).sum();
        -q + lin + self.c
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<C64> {
        if x.len() != self.dim() {
            return Err(AuditError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.exponent(x).exp())
    }

    /// `f̂(ξ) = ∫ f(x) e^{−ix·ξ} dx`.
    pub fn fourier_transform(&self) -> Self {
        let n = self.dim();
        let f = SymFactor::new(&self.a).expect("packet invariant");
        let k = f.inverse();
        let kb = &k * &self.b;
        let c = self.c + bilinear(&self.b, &kb) / 4.0 + 0.5 * n as f64 * PI.ln() - 0.5 * f.log_det();
        Self {
            a: k.map(|z| z / 4.0),
            b: kb.map(|z| -I * z / 2.0),
            c,
        }
    }

    /// `f(x) = (2π)^{-n} ∫ f̂(ξ) e^{ix·ξ} dξ`.
    pub fn inverse_fourier_transform(&self) -> Self {
        let n = self.dim();
        let mut g = self.fourier_transform();
        g.b.neg_mut();
        g.c -= n as f64 * (2.0 * PI).ln();
        g
    }

    /// Solution at time `t` of `i∂_t u + Δu = 0` with `u(0) = self`.
    pub fn schrodinger_evolve(&self, t: f64) -> Self {
        if t == 0.0 {
            return self.clone();
        }
        let mut g = self.fourier_transform();
        for i in 0..self.dim() {
            g.a[(i, i)] += I * t;
        }
        g.inverse_fourier_transform()
    }

    /// `|p|² = p·p̄` as a packet with real coefficients.
    pub fn modulus_squared(&self) -> Self {
        Self {
            a: self.a.map(|z| C64::new(2.0 * z.re, 0.0)),
            b: self.b.map(|z| C64::new(2.0 * z.re, 0.0)),
            c: C64::new(2.0 * self.c.re, 0.0),
        }
    }

    /// `p(x − shift)`.
    pub fn translate(&self, shift: &[f64]) -> Self {
        let s = DVector::from_iterator(self.dim(), shift.iter().map(|&v| C64::from(v)));
        let as_ = &self.a * &s;
        Self {
            a: self.a.clone(),
            b: &self.b + as_.map(|z| 2.0 * z),
            c: self.c - bilinear(&s, &as_) - bilinear(&self.b, &s),
        }
    }

    /// `e^{i v·x} p(x)`.
    pub fn modulate(&self, v: &[f64]) -> Self {
        let mut out = self.clone();
        for (bi, vi) in out.b.iter_mut().zip(v) {
            *bi += I * *vi;
        }
        out
    }

    /// `p(λx)`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            a: self.a.map(|z| z * lambda * lambda),
            b: self.b.map(|z| z * lambda),
            c: self.c,
        }
    }

    /// `λ·p`.
    pub fn scale(&self, lambda: C64) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c + lambda.ln(),
        }
    }

    /// `w ↦ p(Bw + o)` for an injective `B`.
    pub fn pullback(&self, map: &DMatrix<f64>, offset: &DVector<f64>) -> Result<Self> {
        let (a, b, c) = self.pullback_coefficients(map, offset)?;
        Self::new(a, b, c)
    }

    fn pullback_coefficients(
        &self,
        map: &DMatrix<f64>,
        offset: &DVector<f64>,
    ) -> Result<(DMatrix<C64>, DVector<C64>, C64)> {
        let n = self.dim();
        if map.nrows() != n {
            return Err(AuditError::DimensionMismatch { expected: n, got: map.nrows() });
        }
        if offset.len() != n {
            return Err(AuditError::DimensionMismatch { expected: n, got: offset.len() });
        }
        let bm = map.map(C64::from);
        let o = offset.map(C64::from);
        let ab = &self.a * &bm;
        let a = bm.transpose() * &ab;
        let ao = &self.a * &o;
        let shifted_b = &self.b - ao.map(|z| 2.0 * z);
        let b = bm.transpose() * shifted_b;
        let c = self.c + bilinear(&self.b, &o) - bilinear(&o, &ao);
        Ok((a, b, c))
    }

    /// `ln ∫ p(Bw + o) dw` without materializing the pulled-back packet.
    pub fn ln_integral_along(&self, map: &DMatrix<f64>, offset: &DVector<f64>) -> Result<C64> {
        let (a, b, c) = self.pullback_coefficients(map, offset)?;
        ln_gaussian_integral(&a, &b, c)
    }

    /// `ln ∫_{ℝⁿ} p`.
    pub fn ln_total_integral(&self) -> C64 {
        ln_gaussian_integral(&self.a, &self.b, self.c).expect("packet invariant")
    }

    /// `∫_{ℝⁿ} p = π^{n/2} det(A)^{−1/2} exp(c + bᵀA⁻¹b/4)`.
    pub fn total_integral(&self) -> C64 {
        self.ln_total_integral().exp()
    }

    /// Integral of the packet over an affine `k`-plane with its Lebesgue measure.
    pub fn integrate_over_affine_plane(&self, plane: &AffineKPlane) -> Result<C64> {
        let frame = plane.frame().matrix();
        if frame.nrows() != self.dim() {
            return Err(AuditError::DimensionMismatch { expected: self.dim(), got: frame.nrows() });
        }
        Ok(self.ln_integral_along(frame, plane.offset())?.exp())
    }

    /// Integrates out the trailing `m` coordinates, returning a packet on the
    /// leading `n − m` coordinates.
    pub fn integrate_trailing(&self, m: usize) -> Result<Self> {
        let n = self.dim();
        if m > n {
            return Err(AuditError::DimensionMismatch { expected: n, got: m });
        }
        let keep = n - m;
        let auu = self.a.view((0, 0), (keep, keep)).into_owned();
        let auw = self.a.view((0, keep), (keep, m)).into_owned();
        let aww = self.a.view((keep, keep), (m, m)).into_owned();
        let bu = self.b.rows(0, keep).into_owned();
        let bw = self.b.rows(keep, m).into_owned();
        let f = SymFactor::new(&aww)?;
        let k = f.inverse();
        let kbw = &k * &bw;
        let a = &auu - &auw * &k * auw.transpose();
        let b = &bu - &auw * &kbw;
        let c = self.c + bilinear(&bw, &kbw) / 4.0 + 0.5 * m as f64 * PI.ln() - 0.5 * f.log_det();
        Self::new(a, b, c)
    }

    /// Largest imaginary part among the coefficients, relative to their size.
    pub fn imaginary_defect(&self) -> f64 {
        let mut scale = self.c.re.abs().max(1.0);
        let mut im = self.c.im.abs();
        for z in self.a.iter().chain(self.b.iter()) {
            scale = scale.max(z.re.abs());
            im = im.max(z.im.abs());
        }
        im / scale
    }

    /// `(∫|p|^q)^{1/q}` for a packet with real coefficients.
    pub fn lp_norm(&self, q: f64) -> Result<f64> {
        if q < 1.0 {
            return Err(AuditError::Domain(format!("lp_norm needs q >= 1, got {q}")));
        }
        if self.imaginary_defect() > 1e-12 {
            return Err(AuditError::Domain(
                "lp_norm needs real coefficients; apply modulus_squared first".into(),
            ));
        }
        let powered = Self {
            a: self.a.map(|z| C64::new(q * z.re, 0.0)),
            b: self.b.map(|z| C64::new(q * z.re, 0.0)),
            c: C64::new(q * self.c.re, 0.0),
        };
        Ok((powered.ln_total_integral().re / q).exp())
    }

    /// Tensor product on the product space: block-diagonal `A`, concatenated
    /// `b`, summed `c`.
    pub fn tensor(factors: &[&GaussianPacket]) -> Self {
        let n: usize = factors.iter().map(|p| p.dim()).sum();
        let mut a = DMatrix::<C64>::zeros(n, n);
        let mut b = DVector::<C64>::zeros(n);
        let mut c = C64::new(0.0, 0.0);
        let mut at = 0;
        for p in factors {
            let m = p.dim();
            a.view_mut((at, at), (m, m)).copy_from(&p.a);
            b.rows_mut(at, m).copy_from(&p.b);
            c += p.c;
            at += m;
        }
        Self { a, b, c }
    }

    /// Maximum absolute difference between coefficients of two packets.
    pub fn coefficient_distance(&self, other: &Self) -> f64 {
        let da = (&self.a - &other.a).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let db = (&self.b - &other.b).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        da.max(db).max((self.c - other.c).norm())
    }

    /// Returns `Some(α)` when `A = αI` with real `α` and `b = 0`.
    pub fn radial_width(&self) -> Option<f64> {
        let n = self.dim();
        let alpha = self.a[(0, 0)];
        let tol = 1e-14 * alpha.norm();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { alpha } else { C64::new(0.0, 0.0) };
                if (self.a[(i, j)] - expect).norm() > tol {
                    return None;
                }
            }
        }
        if alpha.im.abs() > tol || self.b.iter().any(|z| z.norm() > 0.0) {
            return None;
        }
        Some(alpha.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{AffineKPlane, OrthonormalFrame};
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Random packet with complex symmetric A = R + iS, R ≥ 0.5·I.
    fn packet_from_seed(n: usize, vals: &[f64]) -> GaussianPacket {
        let mut it = vals.iter().cycle().copied();
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| it.next().unwrap());
        let r = &g * g.transpose() * 0.3 + DMatrix::identity(n, n) * 0.5;
        let h = DMatrix::<f64>::from_fn(n, n, |_, _| it.next().unwrap());
        let s = (&h + h.transpose()) * 0.4;
        let a = DMatrix::from_fn(n, n, |i, j| c(r[(i, j)], s[(i, j)]));
        let b = DVector::from_fn(n, |_, _| c(it.next().unwrap(), it.next().unwrap()));
        GaussianPacket::new(a, b, c(it.next().unwrap(), it.next().unwrap())).unwrap()
    }

    #[test]
    fn rejects_non_definite_real_part() {
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(GaussianPacket::new(a, DVector::zeros(2), c(0.0, 0.0)).is_err());
        let a = DMatrix::from_diagonal_element(2, 2, c(0.0, 1.0));
        assert!(GaussianPacket::new(a, DVector::zeros(2), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let p = GaussianPacket::isotropic(3, 1.0).unwrap();
        assert_eq!(p.evaluate(&[0.0, 0.0, 0.0]).unwrap(), c(1.0, 0.0));
        let p1 = GaussianPacket::isotropic(1, 1.0).unwrap();
        assert_relative_eq!(p1.evaluate(&[1.0]).unwrap().re, (-1f64).exp(), max_relative = 1e-15);
        let p2 = GaussianPacket::real(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap();
        // −2 + 1 = −1
        assert_relative_eq!(p2.evaluate(&[1.0, 1.0]).unwrap().re, (-1f64).exp(), max_relative = 1e-15);
        assert!(matches!(p2.evaluate(&[1.0]), Err(AuditError::DimensionMismatch { .. })));
    }

    #[test]
    fn fourier_of_standard_gaussian() {
        let p = GaussianPacket::isotropic(1, 1.0).unwrap();
        let ph = p.fourier_transform();
        for &xi in &[0.0, 0.7, -2.3] {
            let expect = PI.sqrt() * (-xi * xi / 4.0f64).exp();
            assert_relative_eq!(ph.evaluate(&[xi]).unwrap().re, expect, max_relative = 1e-14);
        }
        // quadrature oracle at a complex-coefficient packet
        let q = packet_from_seed(1, &[0.3, -0.8, 0.5, 0.2, -0.4, 0.1, 0.6]);
        let qh = q.fourier_transform();
        let xi = 0.9;
        let re = integrate(|x| (q.evaluate(&[x]).unwrap() * (c(0.0, -x * xi)).exp()).re, -40.0, 40.0, 1e-13, 1e-15).unwrap();
        let im = integrate(|x| (q.evaluate(&[x]).unwrap() * (c(0.0, -x * xi)).exp()).im, -40.0, 40.0, 1e-13, 1e-15).unwrap();
        let got = qh.evaluate(&[xi]).unwrap();
        assert_relative_eq!(got.re, re.value, epsilon = 1e-11);
        assert_relative_eq!(got.im, im.value, epsilon = 1e-11);
    }

    #[test]
    fn isotropic_evolution_closed_form() {
        let alpha = 0.7;
        let n = 3;
        let t = 1.9;
        let u = GaussianPacket::isotropic(n, alpha).unwrap().schrodinger_evolve(t);
        let denom = c(1.0, 4.0 * alpha * t);
        let a_t = c(alpha, 0.0) / denom;
        let c_t = -(n as f64) / 2.0 * denom.ln();
        assert!((u.a[(0, 0)] - a_t).norm() < 1e-14);
        assert!(u.a[(0, 1)].norm() < 1e-14);
        assert!((u.c - c_t).norm() < 1e-13);
        assert!(u.b.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn evolution_of_one_dimensional_packet_solves_the_equation() {
        // finite differences: i u_t + u_xx = 0
        let p = packet_from_seed(1, &[0.2, 0.9, -0.3, 0.4, 0.1, -0.6, 0.3]);
        let (t, x, h) = (0.8, 0.35, 1e-3);
        let u = |t: f64, x: f64| p.schrodinger_evolve(t).evaluate(&[x]).unwrap();
        let ut = (u(t + h, x) - u(t - h, x)) / (2.0 * h);
        let uxx = (u(t, x + h) - 2.0 * u(t, x) + u(t, x - h)) / (h * h);
        let residual = (I * ut + uxx).norm() / u(t, x).norm();
        assert!(residual < 1e-5, "residual {residual}");
    }

    #[test]
    fn modulus_squared_examples() {
        let p = GaussianPacket::isotropic(2, 0.5).unwrap();
        let m = p.modulus_squared();
        assert_eq!(m.a[(0, 0)], c(1.0, 0.0));
        let u = p.schrodinger_evolve(0.6).modulus_squared();
        let expect = 1.0 / (1.0 + 4.0 * 0.36);
        assert_relative_eq!(u.evaluate(&[0.0, 0.0]).unwrap().re, expect, max_relative = 1e-14);
        let chirp = GaussianPacket::new(
            DMatrix::from_diagonal_element(2, 2, c(1.0, -1.0)),
            DVector::zeros(2),
            c(0.0, 0.0),
        )
        .unwrap()
        .modulus_squared();
        assert_eq!(chirp.a[(1, 1)], c(2.0, 0.0));
        assert_eq!(chirp.imaginary_defect(), 0.0);
    }

    #[test]
    fn total_integral_examples() {
        let p = GaussianPacket::isotropic(1, PI).unwrap();
        assert_relative_eq!(p.total_integral().re, 1.0, max_relative = 1e-15);
        let p = GaussianPacket::isotropic(4, 2.5).unwrap();
        assert_relative_eq!(p.total_integral().re, (PI / 2.5).powi(2), max_relative = 1e-14);
        let q = packet_from_seed(3, &[0.3, -0.1, 0.7, 0.2, -0.5, 0.9, 0.4, -0.2, 0.6, 0.8]);
        let moved = q.translate(&[1.5, -0.4, 2.0]);
        assert!((moved.total_integral() - q.total_integral()).norm() < 1e-12 * q.total_integral().norm());
    }

    #[test]
    fn total_integral_matches_quadrature_in_two_dimensions() {
        let q = packet_from_seed(2, &[0.45, -0.2, 0.3, 0.7, 0.1, -0.35, 0.25, 0.5]);
        let inner = |x: f64, part: fn(C64) -> f64| {
            integrate(|y| part(q.evaluate(&[x, y]).unwrap()), -30.0, 30.0, 1e-12, 1e-16).unwrap().value
        };
        let re = integrate(|x| inner(x, |z| z.re), -30.0, 30.0, 1e-11, 1e-15).unwrap().value;
        let im = integrate(|x| inner(x, |z| z.im), -30.0, 30.0, 1e-11, 1e-15).unwrap().value;
        let got = q.total_integral();
        assert!((got - c(re, im)).norm() < 1e-9 * got.norm(), "{got} vs {re}+{im}i");
    }

    #[test]
    fn plane_integral_of_isotropic_packet() {
        let beta = 1.3;
        let p = GaussianPacket::isotropic(3, beta).unwrap();
        // plane spanned by e1, e2 at distance 0.8 along e3
        let frame = OrthonormalFrame::new(DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        let plane = AffineKPlane::new(frame, DVector::from_vec(vec![0.0, 0.0, 0.8])).unwrap();
        let got = p.integrate_over_affine_plane(&plane).unwrap();
        let expect = (PI / beta) * (-beta * 0.64f64).exp();
        assert_relative_eq!(got.re, expect, max_relative = 1e-14);
        // full space
        let full = AffineKPlane::new(
            OrthonormalFrame::new(DMatrix::identity(3, 3)).unwrap(),
            DVector::zeros(3),
        )
        .unwrap();
        let q = packet_from_seed(3, &[0.3, -0.1, 0.7, 0.2, -0.5, 0.9, 0.4, -0.2, 0.6, 0.8]);
        let a = q.integrate_over_affine_plane(&full).unwrap();
        assert!((a - q.total_integral()).norm() < 1e-13 * a.norm());
    }

    #[test]
    fn plane_integral_matches_quadrature() {
        let q = packet_from_seed(2, &[0.45, -0.2, 0.3, 0.7, 0.1, -0.35, 0.25, 0.5]);
        let th: f64 = 0.6;
        let frame = OrthonormalFrame::new(DMatrix::from_column_slice(2, 1, &[th.cos(), th.sin()])).unwrap();
        let off = DVector::from_vec(vec![-th.sin() * 0.4, th.cos() * 0.4]);
        let plane = AffineKPlane::new(frame, off.clone()).unwrap();
        let got = q.integrate_over_affine_plane(&plane).unwrap();
        let point = |s: f64| [off[0] + s * th.cos(), off[1] + s * th.sin()];
        let re = integrate(|s| q.evaluate(&point(s)).unwrap().re, -40.0, 40.0, 1e-12, 1e-16).unwrap().value;
        let im = integrate(|s| q.evaluate(&point(s)).unwrap().im, -40.0, 40.0, 1e-12, 1e-16).unwrap().value;
        assert!((got - c(re, im)).norm() < 1e-9 * got.norm().max(1e-3));
    }

    #[test]
    fn lp_norm_examples() {
        let p = GaussianPacket::isotropic(2, 0.5).unwrap();
        assert_relative_eq!(p.lp_norm(2.0).unwrap().powi(2), PI, max_relative = 1e-14);
        let alpha = 0.8;
        let q = 3.0;
        let p = GaussianPacket::isotropic(3, alpha).unwrap();
        let expect = (PI / (q * alpha)).powf(3.0 / (2.0 * q));
        assert_relative_eq!(p.lp_norm(q).unwrap(), expect, max_relative = 1e-14);
        assert_relative_eq!(p.lp_norm(1.0).unwrap(), p.total_integral().re, max_relative = 1e-14);
        let complex = p.modulate(&[1.0, 0.0, 0.0]);
        assert!(matches!(complex.lp_norm(2.0), Err(AuditError::Domain(_))));
        assert!(p.lp_norm(0.5).is_err());
    }

    #[test]
    fn tensor_examples() {
        let f = GaussianPacket::isotropic(2, 0.5).unwrap();
        let t = GaussianPacket::tensor(&[&f, &f, &f]);
        assert_eq!(t, GaussianPacket::isotropic(6, 0.5).unwrap());
        let g = packet_from_seed(2, &[0.45, -0.2, 0.3, 0.7, 0.1, -0.35, 0.25, 0.5]);
        let h = packet_from_seed(1, &[0.2, 0.9, -0.3, 0.4, 0.1, -0.6, 0.3]);
        let gh = GaussianPacket::tensor(&[&g, &h]);
        let x = [0.3, -0.7, 1.1];
        let prod = g.evaluate(&x[..2]).unwrap() * h.evaluate(&x[2..]).unwrap();
        assert!((gh.evaluate(&x).unwrap() - prod).norm() < 1e-14 * prod.norm());
        let ti = g.total_integral() * h.total_integral();
        assert!((gh.total_integral() - ti).norm() < 1e-13 * ti.norm());
    }

    #[test]
    fn integrate_trailing_agrees_with_plane_integrals() {
        let q = packet_from_seed(2, &[0.45, -0.2, 0.3, 0.7, 0.1, -0.35, 0.25, 0.5]);
        let marginal = q.integrate_trailing(1).unwrap();
        let x0 = 0.37;
        let frame = OrthonormalFrame::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let plane = AffineKPlane::new(frame, DVector::from_vec(vec![x0, 0.0])).unwrap();
        let direct = q.integrate_over_affine_plane(&plane).unwrap();
        let got = marginal.evaluate(&[x0]).unwrap();
        assert!((got - direct).norm() < 1e-13 * direct.norm());
    }

    fn random_packet(n: usize) -> impl Strategy<Value = GaussianPacket> {
        proptest::collection::vec(-1.0f64..1.0, 2 * n * n + 2 * n + 2)
            .prop_map(move |v| packet_from_seed(n, &v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn evolution_is_unitary(p in random_packet(2), t in -5.0f64..5.0) {
            let m0 = p.modulus_squared().lp_norm(1.0).unwrap();
            let mt = p.schrodinger_evolve(t).modulus_squared().lp_norm(1.0).unwrap();
            prop_assert!((mt - m0).abs() <= 1e-12 * m0);
        }

        #[test]
        fn evolution_is_a_semigroup(p in random_packet(3), s in -3.0f64..3.0, t in -3.0f64..3.0) {
            let two_step = p.schrodinger_evolve(s).schrodinger_evolve(t);
            let one_step = p.schrodinger_evolve(s + t);
            prop_assert!(two_step.coefficient_distance(&one_step) < 1e-12 * (1.0 + s.abs() + t.abs()).powi(2));
        }

        #[test]
        fn fourier_twice_is_scaled_reflection(p in random_packet(3)) {
            let twice = p.fourier_transform().fourier_transform();
            let mut expect = p.clone();
            expect.b.neg_mut();
            expect.c += 3.0 * (2.0 * PI).ln();
            prop_assert!(twice.coefficient_distance(&expect) < 1e-12);
        }

        #[test]
        fn plancherel(p in random_packet(2)) {
            let lhs = p.fourier_transform().modulus_squared().lp_norm(1.0).unwrap();
            let rhs = (2.0 * PI).powi(2) * p.modulus_squared().lp_norm(1.0).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }
}
