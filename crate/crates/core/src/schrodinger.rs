//! Grid path: spectral free propagator, discrete X-ray transform in the
//! plane, and the mixed-norm functionals audited against closed forms.
//!
//! Lines are `ℓ(θ, s) = {s ω(θ) + r ω(θ)^⊥}` with `ω(θ) = (cos θ, sin θ)`,
//! `θ ∈ [0, π)`, measure `dθ ds`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::constants::{c_constant, d_constant, grassmann_mass, sphere_area, DimPair};
use crate::error::{AuditError, Result};
use crate::gaussian::{GaussianPacket, C64};
use crate::manifold::{pairwise_sum, sample_frame, sample_values, Estimate, OrthonormalFrame, SeededStream};
use crate::pairing::{pair_ak_gaussian, rubin_map, PairingMethod};
use crate::quadrature::{gauss_legendre, integrate, integrate_half_line, integrate_real_line, try_integrate};
use crate::special::bessel_j;
use crate::weight::{covariance, Configuration};

/// Samples of a field on `[−L, L)^d` at `x_j = −L + j·2L/n`; for `d = 2`
/// the first coordinate runs fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    d: usize,
    n: usize,
    l: f64,
    values: Vec<C64>,
}

impl GridField {
    pub fn new(d: usize, n: usize, l: f64, values: Vec<C64>) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(AuditError::Domain(format!("grid dimension must be 1 or 2, got {d}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(AuditError::Domain(format!("points per axis must be a power of two, got {n}")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(AuditError::Domain(format!("half-extent must be positive, got {l}")));
        }
        let len = n.pow(d as u32);
        if values.len() != len {
            return Err(AuditError::DimensionMismatch { expected: len, got: values.len() });
        }
        if let Some(index) = values.iter().position(|z| !z.is_finite()) {
            return Err(AuditError::NonFinite { index });
        }
        Ok(Self { d, n, l, values })
    }

    /// Samples `f` at the grid points.
    pub fn sample<F: Fn(&[f64]) -> C64>(d: usize, n: usize, l: f64, f: F) -> Result<Self> {
        let h = 2.0 * l / n as f64;
        let len = n.pow(d as u32);
        let values = (0..len)
            .map(|idx| {
                let x: Vec<f64> = (0..d).map(|a| -l + h * ((idx / n.pow(a as u32)) % n) as f64).collect();
                f(&x)
            })
            .collect();
        Self::new(d, n, l, values)
    }

    pub fn from_packet(p: &GaussianPacket, n: usize, l: f64) -> Result<Self> {
        let d = p.dim();
        Self::sample(d, n, l, |x| p.evaluate(x).expect("dimension checked"))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_extent(&self) -> f64 {
        self.l
    }

    pub fn step(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -self.l + self.step() * j as f64
    }

    /// `Σ|u|² h^d`.
    pub fn mass(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|z| z.norm_sqr()).collect();
        pairwise_sum(&sq) * self.step().powi(self.d as i32)
    }

    /// Largest modulus on the outermost grid layer relative to the largest
    /// modulus overall.
    pub fn boundary_ratio(&self) -> f64 {
        let n = self.n;
        let peak = self.values.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if peak == 0.0 {
            return 0.0;
        }
        let edge = |j: usize| j == 0 || j == n - 1;
        let mut bmax = 0.0f64;
        for (idx, z) in self.values.iter().enumerate() {
            let on_edge = if self.d == 1 { edge(idx) } else { edge(idx % n) || edge(idx / n) };
            if on_edge {
                bmax = bmax.max(z.norm());
            }
        }
        bmax / peak
    }

    pub fn max_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

fn transpose(data: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            out[c * n + r] = data[r * n + c];
        }
    }
    out
}

/// Unnormalised DFT along every axis.
fn fft_nd(values: &mut Vec<C64>, d: usize, n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    fft.process(values);
    if d == 2 {
        let mut t = transpose(values, n);
        fft.process(&mut t);
        *values = transpose(&t, n);
    }
}

fn signed_index(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Applies `e^{−it|ξ|²}` on the periodic frequency lattice `ξ ∈ (π/L)ℤ^d`.
pub fn evolve_grid(f: &GridField, t: f64) -> GridField {
    if t == 0.0 {
        return f.clone();
    }
    let (d, n) = (f.d, f.n);
    let dxi = PI / f.l;
    let mut v = f.values.clone();
    fft_nd(&mut v, d, n, false);
    let norm = 1.0 / n.pow(d as u32) as f64;
    for (idx, z) in v.iter_mut().enumerate() {
        let mut xi2 = 0.0;
        for a in 0..d {
            let k = (idx / n.pow(a as u32)) % n;
            xi2 += (dxi * signed_index(k, n)).powi(2);
        }
        *z *= C64::from_polar(norm, -t * xi2);
    }
    fft_nd(&mut v, d, n, true);
    GridField { values: v, ..f.clone() }
}

/// `|ĝ|²` of a planar field on the frequency grid `[−nπ/2L, nπ/2L)²`, where
/// `ĝ(ξ) = ∫ g(x) e^{−ix·ξ} dx` is approximated by the grid sum.
fn spectrum_modulus_squared(g: &GridField) -> (Vec<f64>, f64, f64) {
    let n = g.n;
    let mut v = g.values.clone();
    fft_nd(&mut v, 2, n, false);
    let h2 = g.step().powi(2);
    let mut out = vec![0.0; n * n];
    let peak = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut edge = 0.0f64;
    for k2 in 0..n {
        for k1 in 0..n {
            let z = v[k2 * n + k1];
            // fftshift: signed index −n/2 goes to position 0
            let (p1, p2) = ((k1 + n / 2) % n, (k2 + n / 2) % n);
            out[p2 * n + p1] = z.norm_sqr() * h2 * h2;
            if p1 == 0 || p1 == n - 1 || p2 == 0 || p2 == n - 1 {
                edge = edge.max(z.norm());
            }
        }
    }
    let ratio = if peak == 0.0 { 0.0 } else { edge / peak };
    (out, n as f64 * PI / (2.0 * g.l), ratio)
}

/// Line integrals of a real planar field by one Fourier shear per angle.
///
/// For `θ ∈ [π/4, 3π/4]` the line through `(0, c)` with slope `−cot θ`
/// is parametrised by `x_1`; each column is zero-padded to `[−2L, 2L)`,
/// shifted by `−x_1 cot θ` in Fourier space and summed over `x_1`. Other
/// angles use rows and `x_2` symmetrically.
struct Projector {
    n: usize,
    l: f64,
    columns: Vec<C64>,
    rows: Vec<C64>,
    inverse: Arc<dyn Fft<f64>>,
}

/// `Q(c)` on the padded grid for one angle: `Xh(θ, c·jac) = Q(c)/|jac|`.
struct Profile {
    spectrum: Vec<C64>,
    jac: f64,
}

impl Projector {
    fn new(h: &[f64], n: usize, l: f64) -> Self {
        let m = 2 * n;
        let fft = plan(m, false);
        let mut columns = vec![C64::new(0.0, 0.0); n * m];
        let mut rows = vec![C64::new(0.0, 0.0); n * m];
        for i in 0..n {
            for j in 0..n {
                columns[i * m + j + n / 2] = C64::from(h[j * n + i]);
                rows[j * m + i + n / 2] = C64::from(h[j * n + i]);
            }
        }
        fft.process(&mut columns);
        fft.process(&mut rows);
        Self { n, l, columns, rows, inverse: plan(m, true) }
    }

    fn step(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    fn profile(&self, theta: f64) -> Profile {
        let (n, m) = (self.n, 2 * self.n);
        let (s, c) = theta.sin_cos();
        let (spectra, slope, jac) = if s.abs() >= c.abs() {
            (&self.columns, -c / s, s)
        } else {
            (&self.rows, -s / c, c)
        };
        let h = self.step();
        let dxi = PI / (2.0 * self.l);
        let mut acc = vec![C64::new(0.0, 0.0); m];
        let mut powers = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let x = -self.l + h * i as f64;
            let arg = dxi * slope * x;
            let w = C64::cis(arg);
            powers[0] = C64::new(1.0, 0.0);
            for k in 1..n {
                powers[k] = if k % 32 == 0 { C64::cis(arg * k as f64) } else { powers[k - 1] * w };
            }
            let spec = &spectra[i * m..(i + 1) * m];
            acc[0] += spec[0];
            for k in 1..n {
                acc[k] += spec[k] * powers[k];
                acc[m - k] += spec[m - k] * powers[k].conj();
            }
        }
        // Nyquist bin carries no shift-consistent phase
        acc[n] = C64::new(0.0, 0.0);
        for z in acc.iter_mut() {
            *z *= h;
        }
        Profile { spectrum: acc, jac }
    }

    /// `Q` at the padded nodes `y_j = −2L + j h`.
    fn samples(&self, p: &Profile) -> Vec<f64> {
        let m = 2 * self.n;
        let mut buf = p.spectrum.clone();
        self.inverse.process(&mut buf);
        buf.iter().map(|z| z.re / m as f64).collect()
    }

    /// `∫ Xh(θ, s)³ ds`.
    fn cubic_integral(&self, theta: f64) -> f64 {
        let p = self.profile(theta);
        let q = self.samples(&p);
        let cubes: Vec<f64> = q.iter().map(|v| v * v * v).collect();
        pairwise_sum(&cubes) * self.step() / (p.jac * p.jac)
    }

    /// `Xh(θ, s)` by trigonometric interpolation of `Q`.
    fn line_integral(&self, p: &Profile, s: f64) -> f64 {
        let (n, m) = (self.n, 2 * self.n);
        let c = s / p.jac;
        if !(c >= -2.0 * self.l && c < 2.0 * self.l) {
            return 0.0;
        }
        let arg = PI * (c + 2.0 * self.l) / (2.0 * self.l);
        let w = C64::cis(arg);
        let mut z = C64::new(1.0, 0.0);
        let mut sum = p.spectrum[0].re;
        for k in 1..n {
            z = if k % 32 == 0 { C64::cis(arg * k as f64) } else { z * w };
            sum += (p.spectrum[k] * z + p.spectrum[m - k] * z.conj()).re;
        }
        sum / m as f64 / p.jac.abs()
    }

    /// `∫_0^π ∫ Xh³ ds dθ` by the trapezoid rule on `m` angles.
    fn cubic_norm(&self, angles: usize) -> f64 {
        let per: Vec<f64> = (0..angles).map(|j| self.cubic_integral(PI * j as f64 / angles as f64)).collect();
        pairwise_sum(&per) * PI / angles as f64
    }
}

/// Samples of the X-ray transform on `θ_i = iπ/m` and `s_j = (j − J)h`,
/// `J = ⌈n/√2⌉`, so that `s` covers `[−L√2, L√2)` with the field's step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinogramGrid {
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
    /// Angle-major: `values[i * offsets.len() + j]`.
    pub values: Vec<f64>,
}

impl SinogramGrid {
    pub fn get(&self, angle: usize, offset: usize) -> f64 {
        self.values[angle * self.offsets.len() + offset]
    }
}

fn require_planar(f: &GridField) -> Result<()> {
    if f.d != 2 {
        return Err(AuditError::Domain(format!("planar grid required, got d = {}", f.d)));
    }
    Ok(())
}

fn real_part(f: &GridField) -> Result<Vec<f64>> {
    let scale = f.values.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if f.values.iter().any(|z| z.im.abs() > 1e-12 * scale) {
        return Err(AuditError::Domain("the X-ray transform here needs a real field".into()));
    }
    Ok(f.values.iter().map(|z| z.re).collect())
}

pub fn xray_grid(f: &GridField, m: usize) -> Result<SinogramGrid> {
    require_planar(f)?;
    if m == 0 {
        return Err(AuditError::Domain("need at least one angle".into()));
    }
    let proj = Projector::new(&real_part(f)?, f.n, f.l);
    let h = f.step();
    let half = (f.n as f64 / 2f64.sqrt()).ceil() as usize;
    let offsets: Vec<f64> = (0..2 * half).map(|j| (j as f64 - half as f64) * h).collect();
    let angles: Vec<f64> = (0..m).map(|i| PI * i as f64 / m as f64).collect();
    let rows: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&theta| {
            let p = proj.profile(theta);
            offsets.iter().map(|&s| proj.line_integral(&p, s)).collect()
        })
        .collect();
    Ok(SinogramGrid { angles, offsets, values: rows.concat() })
}

/// Discretisation of the sharp X-ray/Strichartz functional on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFunctionalParams {
    /// Angles on `[0, π)`.
    pub angles: usize,
    /// Near/far split time `T`; `None` picks `1/(4⟨|ξ − ξ̄|²⟩)`.
    pub split: Option<f64>,
    pub initial_nodes: usize,
    pub max_nodes: usize,
    /// Stop once successive node doublings change the value by less.
    pub rel_tol: f64,
    /// Largest allowed boundary-to-peak modulus.
    pub boundary_tol: f64,
}

impl Default for GridFunctionalParams {
    fn default() -> Self {
        Self { angles: 32, split: None, initial_nodes: 16, max_nodes: 128, rel_tol: 1e-6, boundary_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub value: f64,
    /// Last change under node doubling, relative.
    pub rel_change: f64,
    pub nodes: usize,
    pub split: f64,
}

fn frequency_spread(f: &GridField) -> f64 {
    let n = f.n;
    let mut v = f.values.clone();
    fft_nd(&mut v, 2, n, false);
    let dxi = PI / f.l;
    let (mut w, mut m1, mut m2, mut s2) = (0.0, 0.0, 0.0, 0.0);
    for (idx, z) in v.iter().enumerate() {
        let p = z.norm_sqr();
        let (k1, k2) = (signed_index(idx % n, n) * dxi, signed_index(idx / n, n) * dxi);
        w += p;
        m1 += p * k1;
        m2 += p * k2;
        s2 += p * (k1 * k1 + k2 * k2);
    }
    s2 / w - (m1 / w).powi(2) - (m2 / w).powi(2)
}

/// `∫dt ∫_0^π dθ ∫ds [X(|u(·,t)|²)]³ / ‖f‖₂⁶` for `u = e^{itΔ}f`.
///
/// `|t| ≤ T` evolves on the grid. For `|t| > T` the lens identity
/// `|u(t,x)|² = (4π|t|)^{−2} |ĝ_τ(x/2t)|²`, `g_τ = e^{iτ|y|²/4} f`,
/// `τ = 1/t`, turns the tail into `(256π⁶)^{−1} ∫_{|τ|<1/T} ‖X|ĝ_τ|²‖³ dτ`,
/// a smooth integral that includes `τ = 0`. Both pieces use Gauss–Legendre
/// rules doubled until the value settles.
pub fn theorem11_functional_numeric(f: &GridField, params: &GridFunctionalParams) -> Result<FunctionalValue> {
    require_planar(f)?;
    let split = match params.split {
        Some(t) => t,
        None => 0.25 / frequency_spread(f),
    };
    if !(split > 0.0) || !split.is_finite() {
        return Err(AuditError::Domain(format!("split time must be positive, got {split}")));
    }
    let norm6 = f.mass().powi(3);
    let tol = params.boundary_tol;

    let near = |t: f64| -> Result<f64> {
        let u = evolve_grid(f, t);
        let ratio = u.boundary_ratio();
        if ratio > tol {
            return Err(AuditError::Resolution(format!(
                "|u(t = {t:.4})| at the boundary is {ratio:.2e} of its peak"
            )));
        }
        let h: Vec<f64> = u.values.iter().map(|z| z.norm_sqr()).collect();
        Ok(Projector::new(&h, f.n, f.l).cubic_norm(params.angles))
    };
    let far = |tau: f64| -> Result<f64> {
        let g = if tau == 0.0 {
            f.clone()
        } else {
            let h = f.step();
            let n = f.n;
            let mut g = f.clone();
            for (idx, z) in g.values.iter_mut().enumerate() {
                let (x1, x2) = (-f.l + h * (idx % n) as f64, -f.l + h * (idx / n) as f64);
                *z *= C64::cis(tau * (x1 * x1 + x2 * x2) / 4.0);
            }
            g
        };
        let (spec, l_freq, ratio) = spectrum_modulus_squared(&g);
        if ratio > tol {
            return Err(AuditError::Resolution(format!(
                "spectrum at τ = {tau:.4} reaches {ratio:.2e} of its peak at the frequency boundary"
            )));
        }
        Ok(Projector::new(&spec, f.n, l_freq).cubic_norm(params.angles) / (256.0 * PI.powi(6)))
    };

    let eval = |nodes: usize| -> Result<f64> {
        let (x, w) = gauss_legendre(nodes);
        let jobs: Vec<(bool, usize)> = (0..nodes).flat_map(|i| [(true, i), (false, i)]).collect();
        let vals: Vec<Result<f64>> = jobs
            .par_iter()
            .map(|&(is_near, i)| {
                if is_near {
                    Ok(w[i] * split * near(split * x[i])?)
                } else {
                    Ok(w[i] / split * far(x[i] / split)?)
                }
            })
            .collect();
        let vals: Result<Vec<f64>> = vals.into_iter().collect();
        Ok(pairwise_sum(&vals?))
    };

    let mut nodes = params.initial_nodes.max(2);
    let mut prev = eval(nodes)?;
    loop {
        nodes *= 2;
        let cur = eval(nodes)?;
        let change = ((cur - prev) / cur).abs();
        if change < params.rel_tol {
            return Ok(FunctionalValue { value: cur / norm6, rel_change: change, nodes, split });
        }
        if nodes * 2 > params.max_nodes {
            return Err(AuditError::Quadrature { achieved: change, requested: params.rel_tol });
        }
        prev = cur;
    }
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `∫_0^π ∫ [X(|u(t)|²)(θ, s)]³ ds dθ` from packet closed forms.
fn packet_time_slice(f: &GaussianPacket, t: f64) -> Result<f64> {
    let rho = f.schrodinger_evolve(t).modulus_squared();
    let per_angle = |theta: f64| -> Result<f64> {
        // (s, r) ↦ s ω + r ω^⊥, then integrate r out
        let line = rho.pullback(&rotation(theta), &DVector::zeros(2))?.integrate_trailing(1)?;
        Ok(line.lp_norm(3.0)?.powi(3))
    };
    Ok(try_integrate(per_angle, 0.0, PI, 1e-12, 0.0)?.value)
}

/// The ratio `‖X(|u|²)‖³_{L³} / ‖f‖₂⁶` for a planar packet, with
/// the time integral by adaptive quadrature to `1e−10`.
pub fn theorem11_functional_packet(f: &GaussianPacket) -> Result<f64> {
    if f.dim() != 2 {
        return Err(AuditError::DimensionMismatch { expected: 2, got: f.dim() });
    }
    let norm2 = f.modulus_squared().total_integral().re;
    let slice = |t: f64| packet_time_slice(f, t).unwrap_or(f64::NAN);
    let r = integrate_real_line(slice, 1e-10, 0.0)?;
    Ok(r.value / norm2.powi(3))
}

/// [`theorem11_functional_packet`] for `f = e^{−α|x|²}`.
pub fn theorem11_functional_gaussian(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(AuditError::Domain(format!("alpha must be positive, got {alpha}")));
    }
    theorem11_functional_packet(&GaussianPacket::isotropic(2, alpha)?)
}

/// Both sides of the radial equality audit for the singular pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialAudit {
    pub lhs: Estimate,
    pub rhs: Estimate,
}

impl RadialAudit {
    pub fn ratio(&self) -> f64 {
        self.lhs.value / self.rhs.value
    }

    pub fn ratio_stderr(&self) -> f64 {
        self.ratio().abs() * self.lhs.relative_stderr().hypot(self.rhs.relative_stderr())
    }
}

/// `∫dt ⟨A_k, |U(t)|²⟩` against `(π𝐂𝐃/(2π)^{2n}) ∫|F̂|² I_{d,k}` for
/// `F = e^{−β|x|²}` on `ℝ^n`, `n = d(d+1)`.
///
/// The spherical average of `I_{d,k}` is one joint Monte Carlo over the unit
/// sphere and `G_{d,d−k}` with `samples` draws.
pub fn theorem22_radial_audit(beta: f64, pair: DimPair, samples: usize, stream: &SeededStream) -> Result<RadialAudit> {
    if !(beta > 0.0) {
        return Err(AuditError::Domain(format!("beta must be positive, got {beta}")));
    }
    let d = pair.d();
    let n = pair.config_dim();
    let f = GaussianPacket::isotropic(n, beta)?;

    let slice = |t: f64| -> Result<f64> {
        let rho = f.schrodinger_evolve(t).modulus_squared();
        let r = pair_ak_gaussian(&rho, pair, 2, stream)?;
        if r.method != PairingMethod::RubinExact {
            return Err(AuditError::Defect("|U(t)|² lost radial symmetry".into()));
        }
        Ok(r.value)
    };
    if let Err(e) = slice(0.0) {
        return Err(e);
    }
    let lhs = integrate_real_line(|t| slice(t).unwrap_or(f64::NAN), 1e-10, 0.0)?;
    let lhs = Estimate::exact(lhs.value);

    let m = pair.weight_degree();
    // |F̂(ξ)|² = (π/β)^n e^{−|ξ|²/(2β)}, and I_{d,k} is homogeneous of degree m
    let ln_pref = n as f64 * (PI / beta).ln();
    let radial = integrate_half_line(
        |r| {
            if r == 0.0 {
                return 0.0;
            }
            (ln_pref + (n as i64 - 1 + m) as f64 * r.ln() - r * r / (2.0 * beta)).exp()
        },
        0.0,
        1e-12,
        0.0,
    )?
    .value;
    let comp = pair.complement();
    let sphere_mean = if m == 0 {
        Estimate::exact(1.0)
    } else {
        if samples < 2 {
            return Err(AuditError::Domain("Monte Carlo needs at least 2 samples".into()));
        }
        let values = sample_values(samples, &stream.named("theorem22-sphere"), |rng| {
            let omega = Configuration::random(d, rng);
            let norm = omega.flat().iter().map(|v| v * v).sum::<f64>().sqrt();
            let omega = omega.scaled(1.0 / norm);
            let var = covariance(&omega);
            let v = sample_frame(comp.d(), comp.k(), rng);
            let tr = (v.matrix().transpose() * var.matrix() * v.matrix()).trace();
            Ok(tr.max(0.0).powf(m as f64 / 2.0))
        })?;
        Estimate::from_values(&values, 1.0)
    };
    let factor = PI * c_constant(pair) * d_constant(pair) / (2.0 * PI).powi(2 * n as i32)
        * radial
        * sphere_area(n as i64 - 1)?
        * grassmann_mass(comp);
    Ok(RadialAudit { lhs, rhs: sphere_mean.scaled(factor) })
}

/// Extension audit for the sphere `S⁵ ⊂ ℝ⁶` with `g ≡ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionAudit {
    /// `⟨A_1, |d̂σ|²⟩` through the Rubin reduction.
    pub pairing: f64,
    /// `∫ |d̂σ|² δ(ρ)`, i.e. the pairing divided by `𝐃_{2,1}`.
    pub delta_form: f64,
    /// `(1/2)(2π)⁶|S⁵|`.
    pub rhs: f64,
    /// `𝐂_{2,1}𝐃_{2,1} ∫_{S⁵} I_{2,1} dσ`.
    pub weighted_rhs: f64,
    /// Absolute error estimate of `∫_0^∞ J_2(r)²/r dr`.
    pub error_estimate: f64,
    /// `det` of the Gram matrix of the Rubin map.
    pub gram_det: f64,
}

impl ExtensionAudit {
    pub fn ratio(&self) -> f64 {
        self.delta_form / self.rhs
    }
}

/// `d̂σ(x) = (2π)³ J_2(|x|)/|x|²` for the unit sphere in `ℝ⁶`.
pub fn sphere_extension_s5(r: f64) -> f64 {
    if r < 1e-4 {
        // J_2(r)/r² = 1/8 − r²/96 + …
        return (2.0 * PI).powi(3) * (0.125 - r * r / 96.0);
    }
    (2.0 * PI).powi(3) * bessel_j(2, r) / (r * r)
}

/// For radial `G(|x|)` the Rubin inner integral over `(y_1, y_2, x_3) ∈ ℝ⁴`
/// is a quadratic form `wᵀSw`, so it equals `det(S)^{−1/2} |S³| ∫ r³ G dr`.
/// With `G = |d̂σ|²` the radial integral is `(2π)⁶ ∫ J_2²/r`, evaluated on
/// `[0, R]` by panels of length `π` and beyond `R` from the asymptotic
/// `J_2(r)² ≈ (1 + sin 2r)/(πr)`.
pub fn extension_audit_2d(cutoff: f64, rel_tol: f64) -> Result<ExtensionAudit> {
    let pair = DimPair::new(2, 1)?;
    let b = rubin_map(&OrthonormalFrame::new(DMatrix::identity(2, 1))?);
    let gram_det = (b.transpose() * &b).determinant();
    let panels = (cutoff / PI).ceil() as usize;
    let mut body = 0.0;
    let mut err = 0.0;
    for p in 0..panels {
        let (a, c) = (p as f64 * PI, (p + 1) as f64 * PI);
        let r = integrate(
            |r| {
                if r == 0.0 {
                    0.0
                } else {
                    bessel_j(2, r).powi(2) / r
                }
            },
            a,
            c,
            rel_tol,
            1e-16,
        )?;
        body += r.value;
        err += r.error;
    }
    let big_r = panels as f64 * PI;
    // ∫_R^∞ (1 + sin 2r)/(πr²) dr = 1/(πR) + cos(2R)/(2πR²) + O(R⁻³)
    let tail = 1.0 / (PI * big_r) + (2.0 * big_r).cos() / (2.0 * PI * big_r * big_r);
    err += 4.0 / (PI * big_r.powi(3));
    let integral = body + tail;
    let s5 = sphere_area(5)?;
    let s3 = sphere_area(3)?;
    let v_mass = 2.0 * PI;
    let prefactor = 1.0 / crate::constants::gamma_product(1, 1.0)?;
    let pairing = prefactor * v_mass * s3 / gram_det.sqrt() * (2.0 * PI).powi(6) * integral;
    let dk = d_constant(pair);
    Ok(ExtensionAudit {
        pairing,
        delta_form: pairing / dk,
        rhs: 0.5 * (2.0 * PI).powi(6) * s5,
        weighted_rhs: c_constant(pair) * dk * PI * s5,
        error_estimate: err,
        gram_det,
    })
}

/// Named non-Gaussian data for the extremality suite, all on the base
/// `e^{−|x|²/2}`.
pub fn perturbation_suite() -> Vec<(&'static str, Box<dyn Fn(&[f64]) -> C64 + Sync + Send>)> {
    fn base(x: &[f64]) -> f64 {
        (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp()
    }
    fn bump(x: &[f64]) -> f64 {
        (-(x[0] * x[0] + x[1] * x[1])).exp()
    }
    let poly = |eps: f64, p: fn(f64, f64) -> f64| {
        Box::new(move |x: &[f64]| C64::from((1.0 + eps * p(x[0], x[1]) * bump(x)) * base(x)))
            as Box<dyn Fn(&[f64]) -> C64 + Sync + Send>
    };
    let mut out: Vec<(&'static str, Box<dyn Fn(&[f64]) -> C64 + Sync + Send>)> = vec![
        ("odd-x1-0.3", poly(0.3, |a, _| a)),
        ("odd-x2-0.5", poly(0.5, |_, b| b)),
        ("saddle-0.5", poly(0.5, |a, b| a * b)),
        ("quadrupole-0.5", poly(0.5, |a, b| a * a - b * b)),
        ("radial-0.5", poly(0.5, |a, b| a * a + b * b)),
        ("radial-neg-0.3", poly(-0.3, |a, b| a * a + b * b)),
        ("cubic-0.3", poly(0.3, |a, _| a * a * a)),
        ("mixed-0.4", poly(0.4, |a, b| a + a * b - b * b)),
    ];
    for (name, a) in [("aniso-1.5", 1.5), ("aniso-2", 2.0), ("aniso-2.5", 2.5)] {
        out.push((
            name,
            Box::new(move |x: &[f64]| C64::from((-(a * x[0] * x[0] + x[1] * x[1] / a) / 2.0).exp())),
        ));
    }
    for (name, c) in [("astig-chirp-0.2", 0.2), ("astig-chirp-0.5", 0.5)] {
        out.push((
            name,
            Box::new(move |x: &[f64]| C64::from_polar(base(x), c * (x[0] * x[0] - x[1] * x[1]))),
        ));
    }
    for (name, a1, a2) in [("two-bump-1", 1.0, 0.0), ("two-bump-1.5", 1.5, 0.5)] {
        out.push((
            name,
            Box::new(move |x: &[f64]| {
                let g = |s: f64| (-((x[0] - s * a1).powi(2) + (x[1] - s * a2).powi(2)) / 2.0).exp();
                C64::from(g(1.0) + g(-1.0))
            }),
        ));
    }
    out.push(("cosine-0.5", Box::new(|x: &[f64]| C64::from(base(x) * (1.0 + 0.5 * x[0].cos())))));
    out.push(("super-gaussian", Box::new(|x: &[f64]| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        C64::from((-r2 * r2 / 8.0).exp())
    })));
    out.push(("rational", Box::new(|x: &[f64]| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        C64::from((-r2 / 4.0).exp() / (1.0 + r2))
    })));
    out.push(("ring", Box::new(|x: &[f64]| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        C64::from(r2 * (-r2 / 2.0).exp())
    })));
    out.push(("vortex", Box::new(|x: &[f64]| C64::new(x[0], x[1]) * base(x))));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::SQRT_2;

    fn gaussian_field(alpha: f64, n: usize, l: f64) -> GridField {
        GridField::from_packet(&GaussianPacket::isotropic(2, alpha).unwrap(), n, l).unwrap()
    }

    #[test]
    fn evolution_identity_and_mass() {
        let f = GridField::sample(2, 64, 8.0, |x| C64::new((-x[0] * x[0]).exp(), x[1] * (-x[1] * x[1]).exp())).unwrap();
        assert_eq!(evolve_grid(&f, 0.0), f);
        let m0 = f.mass();
        for t in [0.1, 1.3, -2.0] {
            assert_relative_eq!(evolve_grid(&f, t).mass(), m0, max_relative = 1e-12);
        }
        let u = evolve_grid(&evolve_grid(&f, 0.4), 0.9);
        let v = evolve_grid(&f, 1.3);
        assert!(u.max_distance(&v) < 1e-10);
    }

    #[test]
    fn evolution_matches_closed_form() {
        let p = GaussianPacket::isotropic(2, 0.5).unwrap();
        let f = GridField::from_packet(&p, 512, 12.0).unwrap();
        let u = evolve_grid(&f, 0.7);
        let exact = GridField::from_packet(&p.schrodinger_evolve(0.7), 512, 12.0).unwrap();
        assert!(u.max_distance(&exact) <= 1e-8, "{}", u.max_distance(&exact));

        // one dimension, moving packet
        let q = GaussianPacket::isotropic(1, 1.0).unwrap().modulate(&[1.5]);
        let g = GridField::from_packet(&q, 256, 16.0).unwrap();
        let exact = GridField::from_packet(&q.schrodinger_evolve(0.4), 256, 16.0).unwrap();
        let e1 = evolve_grid(&g, 0.4).max_distance(&exact);
        assert!(e1 <= 1e-8, "{e1} {}", g.boundary_ratio());
    }

    #[test]
    fn radial_gaussian_sinogram() {
        let f = gaussian_field(1.0, 512, 10.0);
        let sino = xray_grid(&f, 12).unwrap();
        let mut err = 0.0f64;
        for i in 0..sino.angles.len() {
            for (j, &s) in sino.offsets.iter().enumerate() {
                err = err.max((sino.get(i, j) - PI.sqrt() * (-s * s).exp()).abs());
            }
        }
        assert!(err <= 1e-6, "{err}");
        assert!(sino.offsets[0] <= -10.0 * SQRT_2 + f.step());
    }

    #[test]
    fn sinogram_mass_and_rotation() {
        let aniso = |x: &[f64], th: f64| {
            let (s, c) = th.sin_cos();
            let (y1, y2) = (c * x[0] + s * x[1], -s * x[0] + c * x[1]);
            C64::from((-(2.0 * (y1 - 0.5) * (y1 - 0.5) + 0.5 * y2 * y2)).exp())
        };
        let m = 16;
        let f = GridField::sample(2, 256, 10.0, |x| aniso(x, 0.0)).unwrap();
        let total: f64 = f.values().iter().map(|z| z.re).sum::<f64>() * f.step().powi(2);
        let sino = xray_grid(&f, m).unwrap();
        let h = f.step();
        for i in 0..m {
            let row: f64 = (0..sino.offsets.len()).map(|j| sino.get(i, j)).sum::<f64>() * h;
            assert_relative_eq!(row, total, max_relative = 1e-8);
        }
        // rotating the datum by r angle steps shifts the sinogram by r rows
        let r = 3;
        let g = GridField::sample(2, 256, 10.0, |x| aniso(x, PI * r as f64 / m as f64)).unwrap();
        let rot = xray_grid(&g, m).unwrap();
        let ns = sino.offsets.len();
        let mut defect = 0.0f64;
        for i in 0..m {
            for j in 1..ns {
                let expect = if i >= r { sino.get(i - r, j) } else { sino.get(i + m - r, ns - j) };
                defect = defect.max((rot.get(i, j) - expect).abs());
            }
        }
        assert!(defect <= 1e-5, "{defect}");
    }

    #[test]
    fn gaussian_functional_closed_form() {
        // |u|² = a/(2α)·e^{−a|x|²} with a = 2α/(1+16α²t²); its line integrals
        // cubed give aπ²/(8√3α³) per angle, and ∫a dt = π/2
        let expect = PI / (2.0 * 3f64.sqrt());
        for alpha in [0.25, 0.5, 1.0, 4.0] {
            assert_relative_eq!(theorem11_functional_gaussian(alpha).unwrap(), expect, max_relative = 1e-8);
        }
        let moved = GaussianPacket::isotropic(2, 0.7).unwrap().translate(&[0.4, -1.2]).modulate(&[0.8, 0.3]);
        assert_relative_eq!(theorem11_functional_packet(&moved).unwrap(), expect, max_relative = 1e-6);
    }

    #[test]
    fn grid_functional_reproduces_gaussian() {
        let f = gaussian_field(0.5, 256, 12.0);
        let v = theorem11_functional_numeric(&f, &GridFunctionalParams::default()).unwrap();
        let exact = theorem11_functional_gaussian(0.5).unwrap();
        assert_relative_eq!(v.value, exact, max_relative = 1e-3);
    }

    #[test]
    fn grid_functional_detects_aliasing() {
        let f = gaussian_field(0.05, 64, 6.0);
        assert!(matches!(
            theorem11_functional_numeric(&f, &GridFunctionalParams::default()),
            Err(AuditError::Resolution(_))
        ));
    }

    #[test]
    fn radial_audit_planar_closed_forms() {
        // both sides are explicit for (2,1): π⁴/(4√3β³) and π⁴/(4β³)
        let pair = DimPair::new(2, 1).unwrap();
        let stream = SeededStream::new(5);
        for beta in [0.25, 0.5, 1.0] {
            let a = theorem22_radial_audit(beta, pair, 100, &stream).unwrap();
            assert_relative_eq!(a.lhs.value, PI.powi(4) / (4.0 * 3f64.sqrt() * beta.powi(3)), max_relative = 1e-8);
            assert_relative_eq!(a.rhs.value, PI.powi(4) / (4.0 * beta.powi(3)), max_relative = 1e-10);
            assert_eq!(a.rhs.stderr, 0.0);
        }
    }

    #[test]
    fn extension_pieces() {
        assert_relative_eq!(sphere_extension_s5(0.0), PI.powi(3), max_relative = 1e-15);
        assert_relative_eq!(sphere_extension_s5(1e-4), sphere_extension_s5(1.0001e-4), max_relative = 1e-8);
        let a = extension_audit_2d(300.0, 1e-10).unwrap();
        assert_relative_eq!(a.gram_det, 3.0, max_relative = 1e-14);
        // ∫_0^∞ J_ν(r)²/r dr = 1/(2ν)
        let integral = a.pairing / (4.0 * PI * 2.0 * PI * PI / 3f64.sqrt() * (2.0 * PI).powi(6));
        assert!((integral - 0.25).abs() < 1e-7 && a.error_estimate < 1e-6, "{integral} {}", a.error_estimate);
        assert_relative_eq!(a.rhs, 0.5 * (2.0 * PI).powi(6) * PI.powi(3), max_relative = 1e-14);
    }

    #[test]
    fn suite_has_twenty_members() {
        let suite = perturbation_suite();
        assert_eq!(suite.len(), 20);
        let names: std::collections::BTreeSet<_> = suite.iter().map(|(n, _)| *n).collect();
        assert_eq!(names.len(), 20);
    }
}
