//! Normalization constants for spheres, Stiefel and Grassmann manifolds, and
//! the sharp-constant factors `C_{d,k}` and `D_{d,k}`.
//!
//! Everything is assembled in log space and exponentiated once, so the large
//! powers of `2π` appearing for `d` up to 8 never overflow in intermediate
//! products.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::special::ln_gamma;

/// Spatial dimension `d` together with a plane dimension `k`, `1 ≤ k ≤ d − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DimPair {
    d: usize,
    k: usize,
}

impl DimPair {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d < 2 || k < 1 || k >= d {
            return Err(AuditError::Domain(format!(
                "need d >= 2 and 1 <= k <= d-1, got (d, k) = ({d}, {k})"
            )));
        }
        Ok(Self { d, k })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The complementary pair `(d, d − k)`.
    pub fn complement(&self) -> Self {
        Self { d: self.d, k: self.d - self.k }
    }

    /// `d(d − k) − 2`, the homogeneity degree of the covariance weight.
    pub fn weight_degree(&self) -> i64 {
        (self.d * (self.d - self.k)) as i64 - 2
    }

    /// Dimension `d(d + 1)` of the configuration space.
    pub fn config_dim(&self) -> usize {
        self.d * (self.d + 1)
    }
}

impl fmt::Display for DimPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.d, self.k)
    }
}

fn ln_sphere_area(n: usize) -> f64 {
    let h = (n as f64 + 1.0) / 2.0;
    2f64.ln() + h * PI.ln() - ln_gamma(h)
}

/// Surface area `|S^n| = 2π^{(n+1)/2} / Γ((n+1)/2)` of the unit `n`-sphere.
pub fn sphere_area(n: i64) -> Result<f64> {
    if n < 0 {
        return Err(AuditError::Domain(format!("sphere dimension must be >= 0, got {n}")));
    }
    Ok(ln_sphere_area(n as usize).exp())
}

/// `ln γ_n(z)`, with `γ_n(z) = ∏_{j<n} Γ((z−j)/2) / (2π^{(z−j)/2})`.
pub fn ln_gamma_product(n: usize, z: f64) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    if z <= (n - 1) as f64 {
        return Err(AuditError::Domain(format!(
            "gamma_product({n}, {z}) has a gamma argument at or below zero"
        )));
    }
    Ok((0..n)
        .map(|j| {
            let half = (z - j as f64) / 2.0;
            ln_gamma(half) - 2f64.ln() - half * PI.ln()
        })
        .sum())
}

/// The normalised product of gamma functions `γ_n(z)`.
pub fn gamma_product(n: usize, z: f64) -> Result<f64> {
    if n == 0 {
        return Err(AuditError::Domain("gamma_product needs n >= 1".into()));
    }
    ln_gamma_product(n, z).map(f64::exp)
}

/// Largest `z` for which `γ_n(z)` is assembled as an exact `r·π^{h/2}`.
const EXACT_LIMIT: usize = 100;

/// A number `coef · π^{half_pow/2}` with rational `coef`.
///
/// For integer `z`, every factor `Γ((z−j)/2)/(2π^{(z−j)/2})` has this form,
/// so masses such as `π` or `2π` come out correctly rounded.
#[derive(Debug, Clone, Copy)]
struct PiMonomial {
    coef: f64,
    half_pow: i64,
}

impl PiMonomial {
    /// `Γ(m/2)` for a positive integer `m`.
    fn gamma_half(m: usize) -> Self {
        if m % 2 == 0 {
            let coef = (1..m / 2).map(|j| j as f64).product();
            Self { coef, half_pow: 0 }
        } else {
            // Γ(m/2) = √π · ∏_{j<(m−1)/2} (j + 1/2)
            let coef = (0..(m - 1) / 2).map(|j| j as f64 + 0.5).product();
            Self { coef, half_pow: 1 }
        }
    }

    fn gamma_product(n: usize, z: usize) -> Self {
        (0..n).fold(Self { coef: 1.0, half_pow: 0 }, |acc, j| {
            let g = Self::gamma_half(z - j);
            Self {
                coef: acc.coef * g.coef / 2.0,
                half_pow: acc.half_pow + g.half_pow - (z - j) as i64,
            }
        })
    }

    fn mul(self, o: Self) -> Self {
        Self { coef: self.coef * o.coef, half_pow: self.half_pow + o.half_pow }
    }

    fn div(self, o: Self) -> Self {
        Self { coef: self.coef / o.coef, half_pow: self.half_pow - o.half_pow }
    }

    fn recip(self) -> Self {
        Self { coef: 1.0 / self.coef, half_pow: -self.half_pow }
    }

    fn value(self) -> f64 {
        let whole = PI.powi((self.half_pow.div_euclid(2)) as i32);
        let v = self.coef * whole;
        if self.half_pow.rem_euclid(2) == 1 {
            v * PI.sqrt()
        } else {
            v
        }
    }
}

/// Total mass `1/γ_k(d)` of the Stiefel manifold of `k`-frames in `ℝ^d`.
///
/// Accepts `k = d` (the orthogonal group) as well as `k = 0`.
pub fn stiefel_mass_raw(d: usize, k: usize) -> Result<f64> {
    if k > d {
        return Err(AuditError::Domain(format!("Stiefel manifold needs k <= d, got ({d}, {k})")));
    }
    if d <= EXACT_LIMIT {
        return Ok(PiMonomial::gamma_product(k, d).recip().value());
    }
    Ok((-ln_gamma_product(k, d as f64)?).exp())
}

pub fn stiefel_mass(pair: DimPair) -> f64 {
    stiefel_mass_raw(pair.d, pair.k).expect("valid pair")
}

/// Total Grassmann mass `γ_k(k)/γ_k(d)`.
pub fn grassmann_mass_raw(d: usize, k: usize) -> Result<f64> {
    if k > d {
        return Err(AuditError::Domain(format!("Grassmannian needs k <= d, got ({d}, {k})")));
    }
    if d <= EXACT_LIMIT {
        return Ok(PiMonomial::gamma_product(k, k).div(PiMonomial::gamma_product(k, d)).value());
    }
    Ok((ln_gamma_product(k, k as f64)? - ln_gamma_product(k, d as f64)?).exp())
}

pub fn grassmann_mass(pair: DimPair) -> f64 {
    grassmann_mass_raw(pair.d, pair.k).expect("valid pair")
}

/// Grassmann mass from the homogeneous-space display
/// `|S^{d−1}|⋯|S^{d−k}| / (|S^{k−1}|⋯|S^0|)`.
pub fn grassmann_mass_sphere_ratio(pair: DimPair) -> f64 {
    let (d, k) = (pair.d, pair.k);
    let num: f64 = (d - k..d).map(ln_sphere_area).sum();
    let den: f64 = (0..k).map(ln_sphere_area).sum();
    (num - den).exp()
}

/// `𝐂_{d,k} = (2π)^{d(k+1)} (d+1)^{(d(d−k)+k−3)/2} |S^{d(d−k)−1}|`.
pub fn c_constant(pair: DimPair) -> f64 {
    (ln_c_constant(pair)).exp()
}

pub fn ln_c_constant(pair: DimPair) -> f64 {
    let (d, k) = (pair.d as f64, pair.k as f64);
    let m = pair.d * (pair.d - pair.k);
    d * (k + 1.0) * (2.0 * PI).ln()
        + (d * (d - k) + k - 3.0) / 2.0 * (d + 1.0).ln()
        + ln_sphere_area(m - 1)
}

/// `𝐃_{d,k} = 1/(γ_k(k) γ_{d−k}(d−k))`.
pub fn d_constant(pair: DimPair) -> f64 {
    let (d, k) = (pair.d, pair.k);
    if d <= EXACT_LIMIT {
        let g = PiMonomial::gamma_product(k, k).mul(PiMonomial::gamma_product(d - k, d - k));
        return g.recip().value();
    }
    let ln = ln_gamma_product(k, k as f64).expect("k >= 1")
        + ln_gamma_product(d - k, (d - k) as f64).expect("d-k >= 1");
    (-ln).exp()
}
