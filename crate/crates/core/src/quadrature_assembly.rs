//! Reference assembly by pointwise quadrature of the flux formulation.
//!
//! Every face integral is evaluated with a composite Gauss–Legendre rule, and the
//! DtN operator is applied through Fourier coefficients that are themselves computed
//! by quadrature. Much slower than [`crate::assembly`], and intended for small meshes.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::assembly::{BoundaryData, DofLayout, Incident, LinearSystem};
use crate::basis::{edge_quadrature, kappa_from_eps, FluxParams, PlaneWaveSpace, I};
use crate::dtn::{mode_beta, DtnSpec};
use crate::error::{Error, Result};
use crate::geometry::{FaceTag, Mesh, Vec2, PERIOD};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Gauss–Legendre points per panel.
    pub points: usize,
    /// Maximum panel length.
    pub panel: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { points: 20, panel: 0.25 }
    }
}

/// Nodes and weights of the composite rule on the segment [a, b].
fn segment_rule(a: Vec2, b: Vec2, opts: &QuadratureOptions) -> Result<Vec<(Vec2, f64)>> {
    let g = edge_quadrature(opts.points)?;
    let len = (b - a).norm();
    let panels = ((len / opts.panel).ceil() as usize).max(1);
    let mut out = Vec::with_capacity(panels * g.len());
    for k in 0..panels {
        for &(t, w) in &g {
            let s = (k as f64 + t) / panels as f64;
            out.push((a + (b - a) * s, w * len / panels as f64));
        }
    }
    Ok(out)
}

/// A basis function seen from a face: the element, its outward normal there, and the
/// shift and phase mapping the element onto the face coordinates.
#[derive(Clone, Copy)]
struct View {
    elem: usize,
    normal: Vec2,
    shift: Vec2,
    phase: Complex64,
}

impl View {
    fn plain(elem: usize, normal: Vec2) -> View {
        View { elem, normal, shift: Vec2::default(), phase: Complex64::new(1.0, 0.0) }
    }

    /// (u, ∇u·n) of trial function l.
    fn trial(&self, space: &PlaneWaveSpace, l: usize, x: Vec2) -> (Complex64, Complex64) {
        let kappa = space.kappa[self.elem];
        let d = space.directions[l];
        let u = self.phase * (I * kappa * d.dot(x - self.shift)).exp();
        (u, I * kappa * d.dot(self.normal) * u)
    }

    /// (v̄, ∂_n v̄) of test function j, with v̄ = e^{−iκx·d_j}.
    fn test(&self, space: &PlaneWaveSpace, j: usize, x: Vec2) -> (Complex64, Complex64) {
        let kappa = space.kappa[self.elem];
        let d = space.directions[j];
        let v = self.phase.conj() * (-I * kappa * d.dot(x - self.shift)).exp();
        (v, -I * kappa * d.dot(self.normal) * v)
    }
}

struct Builder<'a> {
    space: &'a PlaneWaveSpace,
    layout: DofLayout,
    triplets: Vec<(usize, usize, Complex64)>,
    rhs: Vec<Complex64>,
}

impl Builder<'_> {
    fn add(&mut self, trial: &View, l: usize, test: &View, j: usize, v: Complex64) {
        self.triplets.push((self.layout.index(test.elem, j), self.layout.index(trial.elem, l), v));
    }

    fn interior(&mut self, rule: &[(Vec2, f64)], s1: View, s2: View, flux: &FluxParams) {
        let space = self.space;
        let xi = 0.5 * (space.kappa[s1.elem].re + space.kappa[s2.elem].re);
        let p = space.p;
        for s in [s1, s2] {
            for t in [s1, s2] {
                for j in 0..p {
                    for l in 0..p {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for &(x, w) in rule {
                            let (u, dnu) = s.trial(space, l, x);
                            let (v, dnv) = t.test(space, j, x);
                            let grad_u = {
                                let d = space.directions[l];
                                let k = space.kappa[s.elem];
                                [I * k * d.x * u, I * k * d.y * u]
                            };
                            // {{u}}[[∇v̄]]_N − {{∇u}}·[[v̄]]_N − iβξ⁻¹[[∇u]]_N[[∇v̄]]_N − iαξ[[u]]_N·[[v̄]]_N
                            let avg_u = 0.5 * u;
                            let avg_grad_dot_jump = 0.5 * (grad_u[0] * t.normal.x + grad_u[1] * t.normal.y) * v;
                            let val = avg_u * dnv - avg_grad_dot_jump - I * flux.beta / xi * dnu * dnv
                                - I * flux.alpha * xi * s.normal.dot(t.normal) * u * v;
                            acc += w * val;
                        }
                        self.add(&s, l, &t, j, acc);
                    }
                }
            }
        }
    }
}

fn check_space(space: &PlaneWaveSpace) -> Result<()> {
    if space.p == 0 {
        return Err(Error::InvalidArgument("empty plane-wave space".into()));
    }
    Ok(())
}

/// Impedance PWDG system assembled by quadrature.
pub fn assemble_impedance_quadrature(
    mesh: &Mesh,
    space: &PlaneWaveSpace,
    flux: &FluxParams,
    data: &BoundaryData,
    opts: &QuadratureOptions,
) -> Result<LinearSystem> {
    check_space(space)?;
    let layout = DofLayout { p: space.p, elements: mesh.elements.len() };
    let mut b = Builder { space, layout, triplets: Vec::new(), rhs: vec![Complex64::new(0.0, 0.0); layout.n()] };
    let p = space.p;
    for (f, face) in mesh.faces.iter().enumerate() {
        let (a, bb) = mesh.face_points(f);
        let rule = segment_rule(a, bb, opts)?;
        let n = mesh.owner_normal(f);
        let e = face.owner;
        let view = View::plain(e, n);
        let kappa = space.kappa[e];
        match face.tag {
            FaceTag::Interior => {
                let nb = face.neighbor.expect("interior face has a neighbor");
                b.interior(&rule, view, View::plain(nb, -n), flux);
            }
            FaceTag::Robin | FaceTag::DirichletBottom => {
                let robin = face.tag == FaceTag::Robin;
                let dl = flux.delta;
                for j in 0..p {
                    for l in 0..p {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for &(x, w) in &rule {
                            let (u, dnu) = view.trial(space, l, x);
                            let (v, dnv) = view.test(space, j, x);
                            acc += w * if robin {
                                -I * kappa * (1.0 - dl) * u * v + (1.0 - dl) * u * dnv - I * dl / kappa * dnu * dnv - dl * dnu * v
                            } else {
                                -I * kappa * flux.alpha * u * v - dnu * v
                            };
                        }
                        b.add(&view, l, &view, j, acc);
                    }
                }
                if let BoundaryData::Exact(exact) = data {
                    for j in 0..p {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for &(x, w) in &rule {
                            let (u, g) = exact.eval(x)?;
                            let (v, dnv) = view.test(space, j, x);
                            acc += w * if robin {
                                let gr = g[0] * n.x + g[1] * n.y - I * kappa * u;
                                (1.0 - dl) * gr * v + dl / (I * kappa) * gr * dnv
                            } else {
                                -I * kappa * flux.alpha * u * v - u * dnv
                            };
                        }
                        b.rhs[layout.index(e, j)] += acc;
                    }
                }
            }
            other => {
                return Err(Error::InvalidArgument(format!("impedance assembly does not accept {} faces", other.as_str())))
            }
        }
    }
    Ok(LinearSystem::from_triplets(layout, b.triplets, b.rhs))
}

/// Fourier coefficients (1/2π)∫_F f(x) e^{−iα_n x₁} dx₁ of a function on one top face.
fn face_fourier<F: Fn(Vec2) -> Complex64>(rule: &[(Vec2, f64)], spec: &DtnSpec, f: F) -> Vec<Complex64> {
    spec.modes()
        .map(|n| {
            let an = spec.alpha(n);
            rule.iter().map(|&(x, w)| w * f(x) * (-I * an * x.x).exp()).sum::<Complex64>() / (2.0 * PI)
        })
        .collect()
}

/// DtN-PWDG system assembled by quadrature.
pub fn assemble_dtn_quadrature(
    mesh: &Mesh,
    space: &PlaneWaveSpace,
    flux: &FluxParams,
    incident: &Incident,
    spec: &DtnSpec,
    opts: &QuadratureOptions,
) -> Result<LinearSystem> {
    check_space(space)?;
    let layout = DofLayout { p: space.p, elements: mesh.elements.len() };
    let mut b = Builder { space, layout, triplets: Vec::new(), rhs: vec![Complex64::new(0.0, 0.0); layout.n()] };
    let p = space.p;
    let dl = flux.delta;
    let betas: Vec<Complex64> = spec.modes().map(|n| mode_beta(n, spec)).collect::<Result<_>>()?;
    let kplus = kappa_from_eps(incident.k, spec.eps_plus);
    let di = incident.direction();
    let beta_inc = kplus * di.y;
    let g_factor = I * (beta_inc - mode_beta(0, spec)?);
    let incident_wave = |x: Vec2| (I * kplus * di.dot(x)).exp();

    // Per top face: view, rule, and for each direction the Fourier coefficients of the
    // trial trace and of the conjugated test trace.
    let mut top = Vec::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        let (a, bb) = mesh.face_points(f);
        let rule = segment_rule(a, bb, opts)?;
        let n = mesh.owner_normal(f);
        let e = face.owner;
        let view = View::plain(e, n);
        match face.tag {
            FaceTag::Interior => {
                let nb = face.neighbor.expect("interior face has a neighbor");
                b.interior(&rule, view, View::plain(nb, -n), flux);
            }
            FaceTag::PeriodicPair => {
                if let Some(&(left, _)) = mesh.periodic_pairs.iter().find(|&&(_, r)| r == f) {
                    let lv = View {
                        elem: mesh.faces[left].owner,
                        normal: -n,
                        shift: Vec2::new(PERIOD, 0.0),
                        phase: (I * spec.alpha0 * PERIOD).exp(),
                    };
                    b.interior(&rule, view, lv, flux);
                }
            }
            FaceTag::DirichletBottom => {
                let kappa = space.kappa[e];
                for j in 0..p {
                    for l in 0..p {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for &(x, w) in &rule {
                            let (u, dnu) = view.trial(space, l, x);
                            let (v, _) = view.test(space, j, x);
                            acc += w * (-I * kappa * flux.alpha * u * v - dnu * v);
                        }
                        b.add(&view, l, &view, j, acc);
                    }
                }
            }
            FaceTag::TopDtn => {
                let trial_n: Vec<Vec<Complex64>> =
                    (0..p).map(|l| face_fourier(&rule, spec, |x| view.trial(space, l, x).0)).collect();
                // Coefficients of conj(v) taken against e^{+iα_n x₁}.
                let test_n: Vec<Vec<Complex64>> = (0..p)
                    .map(|j| {
                        spec.modes()
                            .map(|n| {
                                let an = spec.alpha(n);
                                rule.iter().map(|&(x, w)| w * view.test(space, j, x).0 * (I * an * x.x).exp()).sum::<Complex64>()
                                    / (2.0 * PI)
                            })
                            .collect()
                    })
                    .collect();
                top.push((view, rule, trial_n, test_n));
            }
            FaceTag::Robin => return Err(Error::InvalidArgument("DtN assembly does not accept Robin faces".into())),
        }
    }

    let modes: Vec<i64> = spec.modes().collect();
    let t_of = |coeffs: &[Complex64], x: Vec2| -> Complex64 {
        modes.iter().zip(coeffs).zip(&betas).map(|((&n, c), beta)| I * beta * c * (I * spec.alpha(n) * x.x).exp()).sum()
    };
    let t_conj_of = |coeffs: &[Complex64], x: Vec2| -> Complex64 {
        modes
            .iter()
            .zip(coeffs)
            .zip(&betas)
            .map(|((&n, c), beta)| -I * beta.conj() * c * (-I * spec.alpha(n) * x.x).exp())
            .sum()
    };

    let zero = Complex64::new(0.0, 0.0);
    for (ti, (tv, trule, _, test_n)) in top.iter().enumerate() {
        let kappa = space.kappa[tv.elem];
        for j in 0..p {
            // Local part u∂_nv̄ − iδκ⁻¹∂_nu∂_nv̄ on the test face itself.
            for l in 0..p {
                let mut acc = zero;
                for &(x, w) in trule {
                    let (u, dnu) = tv.trial(space, l, x);
                    let (_, dnv) = tv.test(space, j, x);
                    acc += w * (u * dnv - I * dl / kappa * dnu * dnv);
                }
                b.add(tv, l, tv, j, acc);
            }
            // Global part −Tu v̄ + iδκ⁻¹(Tu ∂_nv̄ + ∂_nu conj(Tv) − Tu conj(Tv)) over Γ_H.
            for (si, (sv, _, trial_n, _)) in top.iter().enumerate() {
                for l in 0..p {
                    let mut acc = zero;
                    for (qi, (_, qrule, _, _)) in top.iter().enumerate() {
                        for &(x, w) in qrule {
                            let tu = t_of(&trial_n[l], x);
                            let tv_conj = t_conj_of(&test_n[j], x);
                            let (v, dnv) = if qi == ti { tv.test(space, j, x) } else { (zero, zero) };
                            let dnu = if qi == si { sv.trial(space, l, x).1 } else { zero };
                            acc += w * (-tu * v + I * dl / kappa * (tu * dnv + dnu * tv_conj - tu * tv_conj));
                        }
                    }
                    b.add(sv, l, tv, j, acc);
                }
            }
            // Load g_H(v̄ − iδκ⁻¹(∂_nv̄ − conj(Tv))) with g_H = (∂_n − T)u^i.
            let mut acc = zero;
            for (qi, (_, qrule, _, _)) in top.iter().enumerate() {
                for &(x, w) in qrule {
                    let gh = g_factor * incident_wave(x);
                    let (v, dnv) = if qi == ti { tv.test(space, j, x) } else { (zero, zero) };
                    acc += w * gh * (v - I * dl / kappa * (dnv - t_conj_of(&test_n[j], x)));
                }
            }
            b.rhs[layout.index(tv.elem, j)] += acc;
        }
    }
    Ok(LinearSystem::from_triplets(layout, b.triplets, b.rhs))
}

/// Largest entrywise difference of matrices and of load vectors, each relative to the
/// largest entry of `reference`.
pub fn relative_discrepancy(system: &LinearSystem, reference: &LinearSystem) -> (f64, f64) {
    let scale = reference.values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut dm = 0.0f64;
    for r in 0..reference.n.max(system.n) {
        for c in 0..reference.n.max(system.n) {
            dm = dm.max((system.get(r, c) - reference.get(r, c)).norm());
        }
    }
    let rscale = reference.rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let dr = system.rhs.iter().zip(&reference.rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    (dm / scale, if rscale > 0.0 { dr / rscale } else { dr })
}
