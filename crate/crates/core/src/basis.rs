//! Plane-wave local spaces, the ψ kernel and closed-form edge integrals.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Vec2};

/// A complex 2-vector, used for gradients and exponent coefficients.
pub type CVec2 = [Complex64; 2];

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn cdot(c: CVec2, x: Vec2) -> Complex64 {
    c[0] * x.x + c[1] * x.y
}

/// Uniformly spaced unit directions d_j = (cos 2πj/p, sin 2πj/p), j = 1..p.
pub fn direction_set(p: usize) -> Result<Vec<Vec2>> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    Ok((1..=p)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / p as f64;
            Vec2::new(t.cos(), t.sin())
        })
        .collect())
}

/// ψ(z) = (e^z − 1)/z = ∫₀¹ e^{zt} dt, with ψ(0) = 1.
pub fn psi(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 2..=6 {
            term = term * z / n as f64;
            sum += term;
        }
        sum
    } else {
        z.exp_m1() / z
    }
}

trait ExpM1 {
    fn exp_m1(self) -> Self;
}

impl ExpM1 for Complex64 {
    /// e^z − 1 without cancellation for small |z|.
    fn exp_m1(self) -> Complex64 {
        let (s, c) = self.im.sin_cos();
        let em1 = self.re.exp_m1();
        // e^{a}(cos b + i sin b) − 1 = (e^a − 1) cos b − 2 sin²(b/2) + i e^a sin b
        let half = (0.5 * self.im).sin();
        Complex64::new(em1 * c - 2.0 * half * half, (em1 + 1.0) * s)
    }
}

/// ∫_F e^{x·c} dS over the segment F = [a, b].
pub fn edge_pw_integral(a: Vec2, b: Vec2, c: CVec2) -> Complex64 {
    let t = b - a;
    cdot(c, a).exp() * psi(cdot(c, t)) * t.norm()
}

/// Numerical-flux parameters α, β, δ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl FluxParams {
    pub fn new(alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && delta > 0.0 && delta <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "flux parameters need alpha > 0, beta > 0, 0 < delta <= 1/2; got ({alpha}, {beta}, {delta})"
            )));
        }
        Ok(Self { alpha, beta, delta })
    }

    /// The ultra-weak variational formulation: α = β = δ = 1/2.
    pub fn uwvf() -> Self {
        Self { alpha: 0.5, beta: 0.5, delta: 0.5 }
    }
}

impl Default for FluxParams {
    fn default() -> Self {
        Self::uwvf()
    }
}

/// Local wavenumber κ = k√ε on the principal branch.
pub fn kappa_from_eps(k: f64, eps: Complex64) -> Complex64 {
    // Force a +0 imaginary part so that the branch cut is approached from above.
    let e = Complex64::new(eps.re, if eps.im == 0.0 { 0.0 } else { eps.im });
    e.sqrt() * k
}

/// Plane-wave space with the same `p` directions on every element.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneWaveSpace {
    pub p: usize,
    pub directions: Vec<Vec2>,
    pub kappa: Vec<Complex64>,
    pub k: f64,
}

impl PlaneWaveSpace {
    /// Builds the space on `mesh` with region permittivities `eps`.
    pub fn new(mesh: &Mesh, k: f64, p: usize, eps: &BTreeMap<usize, Complex64>) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("k must be positive, got {k}")));
        }
        let directions = direction_set(p)?;
        let kappa = mesh
            .elements
            .iter()
            .map(|el| {
                eps.get(&el.region)
                    .map(|&e| kappa_from_eps(k, e))
                    .ok_or(Error::MissingPermittivity(el.region))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { p, directions, kappa, k })
    }

    /// Space with ε = 1 everywhere.
    pub fn homogeneous(mesh: &Mesh, k: f64, p: usize) -> Result<Self> {
        let eps: BTreeMap<usize, Complex64> =
            mesh.regions().into_iter().map(|r| (r, Complex64::new(1.0, 0.0))).collect();
        Self::new(mesh, k, p, &eps)
    }

    pub fn ndofs(&self) -> usize {
        self.p * self.kappa.len()
    }

    /// Value and gradient of φ_j on `element` at `x`.
    pub fn eval_basis(&self, element: usize, j: usize, x: Vec2) -> (Complex64, CVec2) {
        eval_plane_wave(self.kappa[element], self.directions[j], x)
    }
}

/// Value e^{iκ d·x} and gradient iκ d e^{iκ d·x}.
pub fn eval_plane_wave(kappa: Complex64, d: Vec2, x: Vec2) -> (Complex64, CVec2) {
    let v = (I * kappa * d.dot(x)).exp();
    let g = I * kappa * v;
    (v, [g * d.x, g * d.y])
}

/// n-point Gauss–Legendre rule on [0,1] as (node, weight) pairs in increasing node order.
pub fn edge_quadrature(n: usize) -> Result<Vec<(f64, f64)>> {
    if !(1..=64).contains(&n) {
        return Err(Error::InvalidArgument(format!("edge quadrature order {n} outside 1..=64")));
    }
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let d = legendre(n, x).1;
        let w = 2.0 / ((1.0 - x * x) * d * d);
        rule.push((0.5 * (1.0 - x), 0.5 * w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rule)
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over the segment [a, b] with the n-point Gauss–Legendre rule.
pub fn integrate_edge<F: FnMut(Vec2) -> Complex64>(a: Vec2, b: Vec2, rule: &[(f64, f64)], mut f: F) -> Complex64 {
    let len = (b - a).norm();
    rule.iter().map(|&(t, w)| f(a + (b - a) * t) * w).sum::<Complex64>() * len
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixed_eight_triangle_mesh;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quarter_directions() {
        let d = direction_set(4).unwrap();
        let expect = [(0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0)];
        for (di, &(x, y)) in d.iter().zip(&expect) {
            assert!((di.x - x).abs() < 1e-15 && (di.y - y).abs() < 1e-15);
        }
        assert!(direction_set(0).is_err());
    }

    #[test]
    fn eight_directions_contain_diagonal() {
        let s = 0.5f64.sqrt();
        let d = direction_set(8).unwrap();
        assert!(d.iter().any(|v| (v.x - s).abs() < 1e-15 && (v.y - s).abs() < 1e-15));
        for p in 1..40 {
            for v in direction_set(p).unwrap() {
                assert!((v.norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn psi_values() {
        assert_eq!(psi(c(0.0, 0.0)), c(1.0, 0.0));
        let v = psi(c(0.0, PI));
        assert!((v - c(0.0, 2.0 / PI)).norm() < 1e-15);
        let z = c(1e-9, 0.0);
        let series = 1.0 + z / 2.0 + z * z / 6.0;
        assert!((psi(z) - series).norm() < 1e-15);
    }

    #[test]
    fn psi_is_continuous_across_switch() {
        for &r in &[0.99e-4, 1.01e-4] {
            for k in 0..8 {
                let z = Complex64::from_polar(r, k as f64 * 0.7);
                let direct = (z.exp() - 1.0) / z;
                assert!((psi(z) - direct).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn edge_integral_special_cases() {
        let a = Vec2::new(0.3, -0.2);
        let b = Vec2::new(1.1, 0.4);
        let len = (b - a).norm();
        assert!((edge_pw_integral(a, b, [c(0.0, 0.0); 2]) - len).norm() < 1e-15);
        let t = b - a;
        let cc = [c(0.0, -t.y * 3.0), c(0.0, t.x * 3.0)];
        let expect = cdot(cc, a).exp() * len;
        assert!((edge_pw_integral(a, b, cc) - expect).norm() < 1e-14);
    }

    #[test]
    fn edge_integral_matches_quadrature() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let rule = edge_quadrature(10).unwrap();
        for _ in 0..200 {
            let a = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b = a + Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let cc = [c(rng.gen_range(-1.0..1.0), rng.gen_range(-4.0..4.0)), c(rng.gen_range(-1.0..1.0), rng.gen_range(-4.0..4.0))];
            let exact = edge_pw_integral(a, b, cc);
            let quad = integrate_edge(a, b, &rule, |x| cdot(cc, x).exp());
            assert!((exact - quad).norm() <= 1e-12 * exact.norm().max(1e-300));
        }
    }

    #[test]
    fn edge_integral_conjugate_symmetry_and_additivity() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(1.0, 2.0);
        let cc = [c(0.2, 3.0), c(-0.1, -1.5)];
        let cb = [cc[0].conj(), cc[1].conj()];
        assert!((edge_pw_integral(a, b, cb) - edge_pw_integral(a, b, cc).conj()).norm() < 1e-14);
        let m = a + (b - a) * 0.37;
        let split = edge_pw_integral(a, m, cc) + edge_pw_integral(m, b, cc);
        assert!((split - edge_pw_integral(a, b, cc)).norm() < 1e-14);
    }

    #[test]
    fn gauss_legendre_rules() {
        let r1 = edge_quadrature(1).unwrap();
        assert_eq!(r1.len(), 1);
        assert!((r1[0].0 - 0.5).abs() < 1e-16 && (r1[0].1 - 1.0).abs() < 1e-15);
        let r10 = edge_quadrature(10).unwrap();
        let t9: f64 = r10.iter().map(|&(t, w)| w * t.powi(9)).sum();
        assert!((t9 - 0.1).abs() < 1e-15);
        let osc: Complex64 = r10.iter().map(|&(t, w)| (I * 20.0 * t).exp() * w).sum();
        let exact = ((I * 20.0).exp() - 1.0) / (I * 20.0);
        assert!((osc - exact).norm() < 2e-5);
        let r16 = edge_quadrature(16).unwrap();
        let osc16: Complex64 = r16.iter().map(|&(t, w)| (I * 20.0 * t).exp() * w).sum();
        assert!((osc16 - exact).norm() < 1e-10);
        for n in 1..=64 {
            let r = edge_quadrature(n).unwrap();
            let s: f64 = r.iter().map(|q| q.1).sum();
            assert!((s - 1.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let m: f64 = r.iter().map(|&(t, w)| w * t.powi(deg as i32)).sum();
            assert!((m - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
        assert!(edge_quadrature(0).is_err());
        assert!(edge_quadrature(65).is_err());
    }

    #[test]
    fn basis_values_and_gradients() {
        let m = fixed_eight_triangle_mesh();
        let mut eps = BTreeMap::new();
        eps.insert(0, c(1.69, 0.2));
        let s = PlaneWaveSpace::new(&m, 10.0, 5, &eps).unwrap();
        let kap = s.kappa[0];
        assert!(kap.im > 0.0);
        let (v0, g0) = s.eval_basis(0, 2, Vec2::new(0.0, 0.0));
        assert_eq!(v0, c(1.0, 0.0));
        let d = s.directions[2];
        assert!((g0[0] - I * kap * d.x).norm() < 1e-14 && (g0[1] - I * kap * d.y).norm() < 1e-14);

        let x = Vec2::new(0.31, 0.12);
        let hstep = 1e-6;
        for j in 0..5 {
            let (v, g) = s.eval_basis(0, j, x);
            let d = s.directions[j];
            assert!((v.norm() - (-kap.im * d.dot(x)).exp()).abs() < 1e-14);
            let fx = (s.eval_basis(0, j, x + Vec2::new(hstep, 0.0)).0 - s.eval_basis(0, j, x - Vec2::new(hstep, 0.0)).0) / (2.0 * hstep);
            let fy = (s.eval_basis(0, j, x + Vec2::new(0.0, hstep)).0 - s.eval_basis(0, j, x - Vec2::new(0.0, hstep)).0) / (2.0 * hstep);
            let scale = g[0].norm().max(g[1].norm());
            assert!((fx - g[0]).norm() < 1e-6 * scale && (fy - g[1]).norm() < 1e-6 * scale);
            let hl = 3e-4;
            let lap = (s.eval_basis(0, j, x + Vec2::new(hl, 0.0)).0
                + s.eval_basis(0, j, x - Vec2::new(hl, 0.0)).0
                + s.eval_basis(0, j, x + Vec2::new(0.0, hl)).0
                + s.eval_basis(0, j, x - Vec2::new(0.0, hl)).0
                - v * 4.0)
                / (hl * hl);
            assert!((lap + kap * kap * v).norm() < 1e-5 * (kap * kap).norm() * v.norm().max(1.0));
        }
    }

    #[test]
    fn principal_branch_for_lossy_negative_eps() {
        let kap = kappa_from_eps(2.0, c(-3.0, 0.5));
        assert!(kap.im >= 0.0);
        let kap = kappa_from_eps(2.0, c(2.25, 0.0));
        assert!((kap - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn flux_validation() {
        assert!(FluxParams::new(0.5, 0.5, 0.5).is_ok());
        assert!(FluxParams::new(0.5, 0.5, 0.6).is_err());
        assert!(FluxParams::new(0.0, 0.5, 0.5).is_err());
    }
}
