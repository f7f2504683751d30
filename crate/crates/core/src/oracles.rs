//! Analytic solutions used as references: plane waves, the two-layer grating
//! solution, and circular Bessel waves.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::basis::{cdot, CVec2, I};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// A reference field with value and gradient.
pub trait ExactSolution: Sync {
    fn eval(&self, x: Vec2) -> Result<(Complex64, CVec2)>;

    /// Expansion u = Σ a·e^{c·x} valid on the element containing `x`, when one exists.
    fn plane_wave_terms(&self, _x: Vec2) -> Option<Vec<(Complex64, CVec2)>> {
        None
    }
}

fn eval_terms(terms: &[(Complex64, CVec2)], x: Vec2) -> (Complex64, CVec2) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut g = [Complex64::new(0.0, 0.0); 2];
    for &(a, c) in terms {
        let e = a * cdot(c, x).exp();
        v += e;
        g[0] += c[0] * e;
        g[1] += c[1] * e;
    }
    (v, g)
}

/// The plane wave A·e^{iκ d·x}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWave {
    pub kappa: Complex64,
    pub direction: Vec2,
    pub amplitude: Complex64,
}

impl PlaneWave {
    fn terms(&self) -> Vec<(Complex64, CVec2)> {
        let c = I * self.kappa;
        vec![(self.amplitude, [c * self.direction.x, c * self.direction.y])]
    }
}

impl ExactSolution for PlaneWave {
    fn eval(&self, x: Vec2) -> Result<(Complex64, CVec2)> {
        Ok(eval_terms(&self.terms(), x))
    }

    fn plane_wave_terms(&self, _x: Vec2) -> Option<Vec<(Complex64, CVec2)>> {
        Some(self.terms())
    }
}

/// Reflection and transmission coefficients of the flat two-layer grating with
/// vacuum above x₂ = 0, permittivity ε₂ below and a Dirichlet wall at x₂ = −H.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLayerCoeffs {
    pub r: Complex64,
    pub t1: Complex64,
    pub t2: Complex64,
    pub k: f64,
    pub theta: f64,
    pub eps2: Complex64,
    pub half_height: f64,
    /// √(ε₂ − cos²θ) on the branch with non-negative imaginary part.
    pub q: Complex64,
}

impl TwoLayerCoeffs {
    /// Residuals of the three defining equations.
    pub fn residuals(&self) -> [f64; 3] {
        let s = self.theta.sin();
        let e = (I * self.k * self.half_height * self.q).exp();
        let em = (-I * self.k * self.half_height * self.q).exp();
        let one = Complex64::new(1.0, 0.0);
        [
            (one + self.r - self.t1 - self.t2).norm(),
            ((one - self.r) * s - (self.t2 - self.t1) * self.q).norm(),
            (self.t1 * e + self.t2 * em).norm() / (self.t1 * e).norm().max(1.0),
        ]
    }

    pub fn alpha0(&self) -> f64 {
        self.k * self.theta.cos()
    }
}

/// Solves the 3×3 interface system for R, T1, T2.
pub fn two_layer_coefficients(k: f64, theta: f64, eps2: Complex64, half_height: f64) -> Result<TwoLayerCoeffs> {
    if !(theta > -PI && theta < 0.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (-pi, 0), got {theta}")));
    }
    if !(k > 0.0 && half_height > 0.0) {
        return Err(Error::InvalidArgument("k and H must be positive".into()));
    }
    let c = theta.cos();
    let s = theta.sin();
    let arg = eps2 - c * c;
    if arg.norm() < 1e-14 * eps2.norm().max(1.0) {
        return Err(Error::DegenerateBranch);
    }
    let mut q = Complex64::new(arg.re, if arg.im == 0.0 { 0.0 } else { arg.im }).sqrt();
    if q.im < 0.0 {
        q = -q;
    }
    // The bottom condition gives T2 = −ρ T1 with ρ = e^{2ikHq}, |ρ| ≤ 1.
    let rho = (2.0 * I * k * half_height * q).exp();
    let t1 = 2.0 * s / ((1.0 - rho) * s - q * (1.0 + rho));
    let t2 = -rho * t1;
    let r = t1 + t2 - 1.0;
    Ok(TwoLayerCoeffs { r, t1, t2, k, theta, eps2, half_height, q })
}

impl TwoLayerCoeffs {
    fn terms(&self, upper: bool) -> Vec<(Complex64, CVec2)> {
        let ik = I * self.k;
        let c = self.theta.cos();
        let s = self.theta.sin();
        if upper {
            vec![
                (Complex64::new(1.0, 0.0), [ik * c, ik * s]),
                (self.r, [ik * c, -ik * s]),
            ]
        } else {
            vec![(self.t1, [ik * c, -ik * self.q]), (self.t2, [ik * c, ik * self.q])]
        }
    }
}

/// Value and gradient of the two-layer solution; the upper expression is used for x₂ ≥ 0.
pub fn two_layer_field(x: Vec2, coeffs: &TwoLayerCoeffs) -> (Complex64, CVec2) {
    eval_terms(&coeffs.terms(x.y >= 0.0), x)
}

impl ExactSolution for TwoLayerCoeffs {
    fn eval(&self, x: Vec2) -> Result<(Complex64, CVec2)> {
        Ok(two_layer_field(x, self))
    }

    fn plane_wave_terms(&self, x: Vec2) -> Option<Vec<(Complex64, CVec2)>> {
        Some(self.terms(x.y >= 0.0))
    }
}

const SERIES_LIMIT: f64 = 12.0;

/// J_ν(x) and J'_ν(x) for ν ∈ [0,5], x ∈ [0,100].
pub fn bessel_j(nu: f64, x: f64) -> Result<(f64, f64)> {
    if !(0.0..=5.0).contains(&nu) || !(0.0..=100.0).contains(&x) {
        return Err(Error::OutOfEnvelope(format!("bessel_j(nu = {nu}, x = {x})")));
    }
    if x <= SERIES_LIMIT {
        Ok(bessel_series(nu, x))
    } else {
        Ok(bessel_schlaefli(nu, x))
    }
}

/// Ascending series with compensated summation.
fn bessel_series(nu: f64, x: f64) -> (f64, f64) {
    if x == 0.0 {
        let j = if nu == 0.0 { 1.0 } else { 0.0 };
        let dj = if nu == 1.0 {
            0.5
        } else if nu > 0.0 && nu < 1.0 {
            f64::INFINITY
        } else {
            0.0
        };
        return (j, dj);
    }
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let (mut s, mut cs) = (0.0f64, 0.0f64);
    let (mut d, mut cd) = (0.0f64, 0.0f64);
    let add = |sum: &mut f64, comp: &mut f64, v: f64| {
        let t = *sum + v;
        if sum.abs() >= v.abs() {
            *comp += (*sum - t) + v;
        } else {
            *comp += (v - t) + *sum;
        }
        *sum = t;
    };
    for k in 0..400 {
        let kf = k as f64;
        add(&mut s, &mut cs, term);
        add(&mut d, &mut cd, term * (2.0 * kf + nu) / x);
        term *= q / ((kf + 1.0) * (kf + 1.0 + nu));
        if term.abs() < 1e-18 * (s + cs).abs().max(1e-300) && kf > half {
            break;
        }
    }
    (s + cs, d + cd)
}

/// Composite Gauss–Legendre evaluation of Schläfli's integral representation.
fn bessel_schlaefli(nu: f64, x: f64) -> (f64, f64) {
    let rule = gl16();
    let panels = 64;
    let width = PI / panels as f64;
    let (mut j, mut dj) = (0.0, 0.0);
    for p in 0..panels {
        let a = p as f64 * width;
        for &(t, w) in rule.iter() {
            let s = a + width * t;
            let ph = nu * s - x * s.sin();
            j += w * width * ph.cos();
            dj += w * width * s.sin() * ph.sin();
        }
    }
    j /= PI;
    dj /= PI;
    let sn = (nu * PI).sin();
    if sn.abs() > 1e-15 {
        let tail = (60.0 / x).asinh();
        let panels = 48;
        let width = tail / panels as f64;
        let (mut a1, mut a2) = (0.0, 0.0);
        for p in 0..panels {
            let a = p as f64 * width;
            for &(t, w) in rule.iter() {
                let s = a + width * t;
                let e = (-x * s.sinh() - nu * s).exp();
                a1 += w * width * e;
                a2 += w * width * s.sinh() * e;
            }
        }
        j -= sn / PI * a1;
        dj += sn / PI * a2;
    }
    (j, dj)
}

fn gl16() -> &'static [(f64, f64)] {
    use std::sync::OnceLock;
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| crate::basis::edge_quadrature(16).expect("valid order"))
}

/// The circular wave J_ξ(kr)·cos(ξθ̂) and its gradient.
pub fn circular_wave(x: Vec2, xi: f64, k: f64) -> Result<(Complex64, CVec2)> {
    let r = x.norm();
    let zero = Complex64::new(0.0, 0.0);
    if r == 0.0 {
        if xi > 0.0 && xi < 1.0 {
            return Err(Error::SingularOrigin);
        }
        let v = if xi == 0.0 { 1.0 } else { 0.0 };
        let g = if xi == 1.0 { 0.5 * k } else { 0.0 };
        return Ok((Complex64::new(v, 0.0), [Complex64::new(g, 0.0), zero]));
    }
    let th = x.y.atan2(x.x);
    let (j, dj) = bessel_j(xi, k * r)?;
    let (s, c) = (xi * th).sin_cos();
    let ur = k * dj * c;
    let ut = -xi * j * s / r;
    let (st, ct) = th.sin_cos();
    let gx = ur * ct - ut * st;
    let gy = ur * st + ut * ct;
    Ok((Complex64::new(j * c, 0.0), [Complex64::new(gx, 0.0), Complex64::new(gy, 0.0)]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircularWave {
    pub xi: f64,
    pub k: f64,
}

impl ExactSolution for CircularWave {
    fn eval(&self, x: Vec2) -> Result<(Complex64, CVec2)> {
        circular_wave(x, self.xi, self.k)
    }
}

/// g_R = ∇u·n − iκu for the exact field on a face with outward normal `normal`.
pub fn impedance_data_from_exact<'a>(
    exact: &'a dyn ExactSolution,
    kappa: Complex64,
    normal: Vec2,
) -> impl Fn(Vec2) -> Result<Complex64> + 'a {
    move |x| {
        let (u, g) = exact.eval(x)?;
        Ok(g[0] * normal.x + g[1] * normal.y - I * kappa * u)
    }
}
