//! Truncated quasi-periodic Dirichlet-to-Neumann operator on Γ_H.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::basis::{psi, I};
use crate::error::{Error, Result};
use crate::geometry::{FaceGeom, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtnSpec {
    /// Truncation order M; modes n = −M..=M are kept.
    pub m: usize,
    pub alpha0: f64,
    pub eps_plus: Complex64,
    pub k: f64,
    pub half_height: f64,
}

impl DtnSpec {
    pub fn new(m: usize, alpha0: f64, eps_plus: Complex64, k: f64, half_height: f64) -> Result<Self> {
        if !(k > 0.0 && half_height > 0.0) {
            return Err(Error::InvalidArgument("k and H must be positive".into()));
        }
        let spec = Self { m, alpha0, eps_plus, k, half_height };
        for n in spec.modes() {
            mode_beta(n, &spec)?;
        }
        Ok(spec)
    }

    /// Spec for an incident plane wave with angle θ in a medium of permittivity ε⁺:
    /// α₀ = Re(k√ε⁺)·cos θ.
    pub fn from_incidence(m: usize, k: f64, theta: f64, eps_plus: Complex64, half_height: f64) -> Result<Self> {
        let kp = crate::basis::kappa_from_eps(k, eps_plus);
        Self::new(m, kp.re * theta.cos(), eps_plus, k, half_height)
    }

    pub fn alpha(&self, n: i64) -> f64 {
        self.alpha0 + n as f64
    }

    pub fn modes(&self) -> std::ops::RangeInclusive<i64> {
        -(self.m as i64)..=(self.m as i64)
    }

    /// True when every propagating mode lies inside the truncation window,
    /// i.e. α_n² > Re(k²ε⁺) for n = ±M.
    pub fn resolves_propagating_modes(&self) -> bool {
        let kk = self.k * self.k * self.eps_plus.re;
        let m = self.m as i64;
        self.alpha(m).powi(2) > kk && self.alpha(-m).powi(2) > kk
    }
}

/// β_n = √(k²ε⁺ − α_n²) with Im β_n ≥ 0.
pub fn mode_beta(n: i64, spec: &DtnSpec) -> Result<Complex64> {
    let a = spec.alpha(n);
    let z = spec.eps_plus * spec.k * spec.k - a * a;
    if z.norm() < 1e-12 * spec.k * spec.k {
        return Err(Error::WoodAnomaly { n });
    }
    let z = Complex64::new(z.re, if z.im == 0.0 { 0.0 } else { z.im });
    let b = z.sqrt();
    Ok(if b.im < 0.0 { -b } else { b })
}

/// Fourier coefficients φ_n, n = −M..=M, of a function on Γ_H in the basis e^{iα_n x₁}.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    pub m: usize,
    pub coefficients: Vec<Complex64>,
}

impl BoundaryTrace {
    pub fn zeros(m: usize) -> Self {
        Self { m, coefficients: vec![Complex64::new(0.0, 0.0); 2 * m + 1] }
    }

    pub fn get(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.m {
            Complex64::new(0.0, 0.0)
        } else {
            self.coefficients[(n + self.m as i64) as usize]
        }
    }

    pub fn set(&mut self, n: i64, v: Complex64) {
        let i = (n + self.m as i64) as usize;
        self.coefficients[i] = v;
    }

    /// Pointwise value Σ φ_n e^{iα_n x₁}.
    pub fn eval(&self, x1: f64, alpha0: f64) -> Complex64 {
        (-(self.m as i64)..=self.m as i64)
            .map(|n| self.get(n) * (I * (alpha0 + n as f64) * x1).exp())
            .sum()
    }
}

/// (T_M φ)_n = iβ_n φ_n for |n| ≤ M; other modes are annihilated.
pub fn apply_dtn(trace: &BoundaryTrace, spec: &DtnSpec) -> Result<BoundaryTrace> {
    let mut out = BoundaryTrace::zeros(trace.m);
    let keep = trace.m.min(spec.m) as i64;
    for n in -keep..=keep {
        out.set(n, I * mode_beta(n, spec)? * trace.get(n));
    }
    Ok(out)
}

fn check_top(face: &FaceGeom, spec: &DtnSpec) -> Result<(f64, f64)> {
    let h = spec.half_height;
    let tol = 1e-12 * h.max(1.0);
    if (face.a.y - h).abs() > tol || (face.b.y - h).abs() > tol {
        return Err(Error::FaceNotOnTop(face.id));
    }
    Ok((face.a.x.min(face.b.x), face.a.x.max(face.b.x)))
}

/// (1/2π) ∫_{p₁}^{p₂} e^{z x} dx.
fn scaled_line_integral(z: Complex64, p1: f64, p2: f64) -> Complex64 {
    (z * p1).exp() * psi(z * (p2 - p1)) * ((p2 - p1) / (2.0 * PI))
}

/// φ^n = (1/2π) e^{iκd₂H} ∫_{p₁}^{p₂} e^{(iκd₁ − iα_n)x₁} dx₁ for a plane wave on a top face.
pub fn trace_fourier_coefficient(face: &FaceGeom, kappa: Complex64, d: Vec2, n: i64, spec: &DtnSpec) -> Result<Complex64> {
    let (p1, p2) = check_top(face, spec)?;
    let z = I * kappa * d.x - I * spec.alpha(n);
    Ok((I * kappa * d.y * spec.half_height).exp() * scaled_line_integral(z, p1, p2))
}

/// c^n = (1/2π) ∫ e^{iα_n x₁} e^{−iκ x·d} dx₁, the coefficient paired with a test function.
/// It equals conj(φ^n) when κ is real.
pub fn test_fourier_coefficient(face: &FaceGeom, kappa: Complex64, d: Vec2, n: i64, spec: &DtnSpec) -> Result<Complex64> {
    let (p1, p2) = check_top(face, spec)?;
    let z = I * spec.alpha(n) - I * kappa * d.x;
    Ok((-I * kappa * d.y * spec.half_height).exp() * scaled_line_integral(z, p1, p2))
}

/// Mode weights 2π·iβ_n, 2π·|β_n|² and 2π·(−i conj β_n) for n = −M..=M.
#[derive(Clone, Debug)]
pub struct ModeWeights {
    pub t_phi_psi: Vec<Complex64>,
    pub tphi_tpsi: Vec<Complex64>,
    pub phi_tpsi: Vec<Complex64>,
}

impl ModeWeights {
    pub fn new(spec: &DtnSpec) -> Result<Self> {
        let mut w = ModeWeights { t_phi_psi: Vec::new(), tphi_tpsi: Vec::new(), phi_tpsi: Vec::new() };
        for n in spec.modes() {
            let b = mode_beta(n, spec)?;
            w.t_phi_psi.push(2.0 * PI * I * b);
            w.tphi_tpsi.push(Complex64::new(2.0 * PI * b.norm_sqr(), 0.0));
            w.phi_tpsi.push(-2.0 * PI * I * b.conj());
        }
        Ok(w)
    }

    /// The three coupling integrals from trial coefficients `phi` and test coefficients `c`.
    pub fn couple(&self, phi: &[Complex64], c: &[Complex64]) -> (Complex64, Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (mut a, mut b, mut d) = (zero, zero, zero);
        for i in 0..phi.len() {
            let pc = phi[i] * c[i];
            a += pc * self.t_phi_psi[i];
            b += pc * self.tphi_tpsi[i];
            d += pc * self.phi_tpsi[i];
        }
        (a, b, d)
    }
}

/// Trial and test Fourier coefficients of a plane wave on a top face, n = −M..=M.
pub fn face_coefficients(
    face: &FaceGeom,
    kappa: Complex64,
    d: Vec2,
    spec: &DtnSpec,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let phi = spec.modes().map(|n| trace_fourier_coefficient(face, kappa, d, n, spec)).collect::<Result<Vec<_>>>()?;
    let c = spec.modes().map(|n| test_fourier_coefficient(face, kappa, d, n, spec)).collect::<Result<Vec<_>>>()?;
    Ok((phi, c))
}

/// (∫ T_Mφ_l ψ̄_j, ∫ T_Mφ_l conj(T_Mψ_j), ∫ φ_l conj(T_Mψ_j)) over Γ_H.
pub fn dtn_coupling_block(
    face_l: &FaceGeom,
    kappa_l: Complex64,
    d_l: Vec2,
    face_j: &FaceGeom,
    kappa_j: Complex64,
    d_j: Vec2,
    spec: &DtnSpec,
) -> Result<(Complex64, Complex64, Complex64)> {
    let w = ModeWeights::new(spec)?;
    let (phi, _) = face_coefficients(face_l, kappa_l, d_l, spec)?;
    let (_, c) = face_coefficients(face_j, kappa_j, d_j, spec)?;
    Ok(w.couple(&phi, &c))
}
