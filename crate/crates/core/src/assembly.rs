//! Closed-form assembly of the impedance PWDG and DtN-PWDG linear systems.
//!
//! Entry (j, l) of the matrix is A_h(φ_l, φ_j): rows index test functions and
//! columns index trial functions. Test functions enter through
//! conj(φ_j) = e^{−iκ x·d_j} and conj(∇φ_j) = −iκ d_j e^{−iκ x·d_j}.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::basis::{cdot, edge_pw_integral, CVec2, FluxParams, PlaneWaveSpace, I};
use crate::dtn::{face_coefficients, DtnSpec, ModeWeights};
use crate::error::{Error, Result};
use crate::geometry::{FaceGeom, FaceTag, Mesh, Vec2, PERIOD};
use crate::oracles::{impedance_data_from_exact, ExactSolution};

/// Global numbering (element, direction) ↔ element·p + direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub p: usize,
    pub elements: usize,
}

impl DofLayout {
    pub fn n(&self) -> usize {
        self.p * self.elements
    }

    pub fn index(&self, element: usize, j: usize) -> usize {
        element * self.p + j
    }

    pub fn split(&self, dof: usize) -> (usize, usize) {
        (dof / self.p, dof % self.p)
    }
}

/// Complex system in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
    pub layout: DofLayout,
    pub condition_hint: Option<f64>,
}

impl LinearSystem {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        match cols.binary_search(&col) {
            Ok(i) => self.values[self.row_ptr[row] + i],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// The sesquilinear form A_h(w, w) = wᴴ A w.
    pub fn form(&self, w: &[Complex64]) -> Complex64 {
        self.matvec(w).iter().zip(w).map(|(aw, wi)| aw * wi.conj()).sum()
    }

    /// Iterates over stored entries as (row, col, value).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    /// Writes the header "N nnz" followed by "row col re im" lines.
    pub fn write_matrix<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.nnz())?;
        for (r, c, v) in self.entries() {
            writeln!(w, "{} {} {:.16e} {:.16e}", r, c, v.re, v.im)?;
        }
        Ok(())
    }

    /// Rebuilds a matrix from coordinate triplets, summing duplicates in input order.
    pub fn from_triplets(layout: DofLayout, triplets: Vec<(usize, usize, Complex64)>, rhs: Vec<Complex64>) -> Self {
        let n = layout.n();
        let mut t = triplets;
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        LinearSystem { n, row_ptr, col_idx, values, rhs, layout, condition_hint: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Robin,
    Dirichlet,
}

/// One side of a face: the element's wavenumber, its outward normal, and the
/// translation and quasi-periodic phase mapping it onto the face coordinates.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Side {
    pub elem: usize,
    pub kappa: Complex64,
    pub normal: Vec2,
    pub shift: Vec2,
    pub phase: Complex64,
}

impl Side {
    pub(crate) fn plain(elem: usize, kappa: Complex64, normal: Vec2) -> Side {
        Side { elem, kappa, normal, shift: Vec2::default(), phase: Complex64::new(1.0, 0.0) }
    }
}

/// ∫_F φ_l^{(s)} conj(φ_j^{(t)}) dS with the sides' shifts and phases.
fn side_integral(a: Vec2, b: Vec2, s: &Side, d_l: Vec2, t: &Side, d_j: Vec2) -> Complex64 {
    let cs = I * s.kappa;
    let ct = I * t.kappa;
    let c: CVec2 = [cs * d_l.x - ct * d_j.x, cs * d_l.y - ct * d_j.y];
    let offset = (-cs * d_l.dot(s.shift) + ct * d_j.dot(t.shift)).exp();
    s.phase * t.phase.conj() * offset * edge_pw_integral(a, b, c)
}

/// Interior-flux coefficient for trial side `s` and test side `t`.
fn interior_coefficient(s: &Side, d_l: Vec2, t: &Side, d_j: Vec2, flux: &FluxParams, xi: f64) -> Complex64 {
    let djnt = d_j.dot(t.normal);
    let dlnt = d_l.dot(t.normal);
    let dlns = d_l.dot(s.normal);
    -0.5 * I * t.kappa * djnt - 0.5 * I * s.kappa * dlnt
        - I * (flux.beta / xi) * s.kappa * t.kappa * dlns * djnt
        - I * flux.alpha * xi * s.normal.dot(t.normal)
}

pub(crate) fn interior_entry(a: Vec2, b: Vec2, s: &Side, d_l: Vec2, t: &Side, d_j: Vec2, flux: &FluxParams, xi: f64) -> Complex64 {
    interior_coefficient(s, d_l, t, d_j, flux, xi) * side_integral(a, b, s, d_l, t, d_j)
}

/// Same-element face block: trial and test functions both live on the element whose
/// outward normal is `face.normal`.
pub fn face_block_same_element(
    face: &FaceGeom,
    kappa: Complex64,
    d_l: Vec2,
    d_j: Vec2,
    flux: &FluxParams,
    xi: f64,
    kind: FaceKind,
) -> Complex64 {
    let n = face.normal;
    let side = Side::plain(0, kappa, n);
    let integral = side_integral(face.a, face.b, &side, d_l, &side, d_j);
    let (dln, djn) = (d_l.dot(n), d_j.dot(n));
    match kind {
        FaceKind::Interior => interior_coefficient(&side, d_l, &side, d_j, flux, xi) * integral,
        FaceKind::Robin => {
            let dl = flux.delta;
            I * kappa * ((1.0 - dl) * (-1.0 - djn) + dl * dln * (-djn - 1.0)) * integral
        }
        FaceKind::Dirichlet => I * kappa * (-flux.alpha - dln) * integral,
    }
}

/// Adjacent block: trial function on the element with outward normal `face.normal`
/// (wavenumber `kappa_l`), test function on the element across the face (`kappa_j`).
pub fn face_block_adjacent(
    face: &FaceGeom,
    kappa_l: Complex64,
    d_l: Vec2,
    kappa_j: Complex64,
    d_j: Vec2,
    flux: &FluxParams,
) -> Complex64 {
    let xi = 0.5 * (kappa_l.re + kappa_j.re);
    let s = Side::plain(0, kappa_l, face.normal);
    let t = Side::plain(1, kappa_j, -face.normal);
    interior_entry(face.a, face.b, &s, d_l, &t, d_j, flux, xi)
}

/// Adjacent block across a periodic pair. `face` is the right boundary face with the
/// normal of its owner; the trial function lives on the left element, translated by 2π
/// and multiplied by e^{iα₀2π}; the test function lives on the right element.
pub fn face_block_periodic(
    face: &FaceGeom,
    kappa_l: Complex64,
    d_l: Vec2,
    kappa_j: Complex64,
    d_j: Vec2,
    flux: &FluxParams,
    alpha0: f64,
) -> Complex64 {
    let xi = 0.5 * (kappa_l.re + kappa_j.re);
    let s = Side {
        elem: 0,
        kappa: kappa_l,
        normal: -face.normal,
        shift: Vec2::new(PERIOD, 0.0),
        phase: (I * alpha0 * PERIOD).exp(),
    };
    let t = Side::plain(1, kappa_j, face.normal);
    interior_entry(face.a, face.b, &s, d_l, &t, d_j, flux, xi)
}

/// Local Γ_H term −iκ(d_j·n)(1 + δ d_l·n)∫_F e^{iκx·(d_l−d_j)} dS.
pub fn dtn_local_block(face: &FaceGeom, kappa: Complex64, d_l: Vec2, d_j: Vec2, delta: f64) -> Complex64 {
    let n = face.normal;
    let side = Side::plain(0, kappa, n);
    -I * kappa * d_j.dot(n) * (1.0 + delta * d_l.dot(n)) * side_integral(face.a, face.b, &side, d_l, &side, d_j)
}

fn global_combination(
    (i1, i2, i3): (Complex64, Complex64, Complex64),
    n: Vec2,
    kappa_j: Complex64,
    d_l: Vec2,
    d_j: Vec2,
    delta: f64,
) -> Complex64 {
    -(1.0 - delta * d_j.dot(n)) * i1 - delta * I / kappa_j * i2 - delta * d_l.dot(n) * i3
}

/// Global Γ_H term −(1 − δ d_j·n)·I₁ − iδκ_j⁻¹·I₂ − δ(d_l·n)·I₃.
#[allow(clippy::too_many_arguments)]
pub fn dtn_global_block(
    face_l: &FaceGeom,
    kappa_l: Complex64,
    d_l: Vec2,
    face_j: &FaceGeom,
    kappa_j: Complex64,
    d_j: Vec2,
    delta: f64,
    spec: &DtnSpec,
) -> Result<Complex64> {
    let parts = crate::dtn::dtn_coupling_block(face_l, kappa_l, d_l, face_j, kappa_j, d_j, spec)?;
    Ok(global_combination(parts, face_j.normal, kappa_j, d_l, d_j, delta))
}

/// Incident plane wave e^{iκ⁺x·(cos θ, sin θ)}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Incident {
    pub k: f64,
    pub theta: f64,
}

impl Incident {
    pub fn direction(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }
}

/// Load entry L(φ_j) for a test function on a Γ_H face.
pub fn rhs_dtn(face: &FaceGeom, kappa: Complex64, d_j: Vec2, delta: f64, incident: &Incident, spec: &DtnSpec) -> Result<Complex64> {
    let kplus = crate::basis::kappa_from_eps(incident.k, spec.eps_plus);
    let di = incident.direction();
    let beta_inc = kplus * di.y;
    let beta0 = crate::dtn::mode_beta(0, spec)?;
    // ∂_n u^i − T u^i = g·u^i on Γ_H with g = i(β_inc − β₀).
    let g = I * (beta_inc - beta0);
    let n = face.normal;
    let c: CVec2 = [I * kplus * di.x - I * kappa * d_j.x, I * kplus * di.y - I * kappa * d_j.y];
    let first = g * (1.0 - delta * d_j.dot(n)) * edge_pw_integral(face.a, face.b, c);
    let c0 = crate::dtn::test_fourier_coefficient(face, kappa, d_j, 0, spec)?;
    let second = 2.0 * PI * delta / kappa * g * beta0.conj() * c0 * (I * beta_inc * spec.half_height).exp();
    Ok(first + second)
}

/// Boundary data restricted to one face.
pub enum FaceData<'a> {
    Zero,
    /// g(x) = Σ a·e^{c·x}.
    PlaneWaves(Vec<(Complex64, CVec2)>),
    /// Sampled data integrated with n-point Gauss–Legendre panels, graded toward the
    /// face ends when `graded` is set and a single panel otherwise.
    Sampled { f: &'a dyn Fn(Vec2) -> Result<Complex64>, points: usize, graded: bool },
}

/// Dyadic refinement levels toward each end of a face for sampled boundary data.
pub const GRADING_LEVELS: usize = 12;

/// Composite Gauss–Legendre rule on [0, 1] with panels halving toward both endpoints,
/// so data with integrable endpoint singularities (corner waves) is integrated accurately.
pub fn graded_edge_rule(points: usize) -> Result<Vec<(f64, f64)>> {
    let base = crate::basis::edge_quadrature(points)?;
    let mut breaks = vec![0.0];
    for l in (1..=GRADING_LEVELS).rev() {
        breaks.push(0.5f64.powi(l as i32));
    }
    for l in 1..=GRADING_LEVELS {
        breaks.push(1.0 - 0.5f64.powi(l as i32));
    }
    breaks.push(1.0);
    let mut rule = Vec::with_capacity(base.len() * (breaks.len() - 1));
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        rule.extend(base.iter().map(|&(t, wt)| (lo + (hi - lo) * t, (hi - lo) * wt)));
    }
    Ok(rule)
}

/// Load entry of an impedance or Dirichlet face.
pub fn rhs_impedance(
    face: &FaceGeom,
    kappa: Complex64,
    d_j: Vec2,
    flux: &FluxParams,
    kind: FaceKind,
    data: &FaceData,
) -> Result<Complex64> {
    let test: CVec2 = [-I * kappa * d_j.x, -I * kappa * d_j.y];
    let integral = match data {
        FaceData::Zero => return Ok(Complex64::new(0.0, 0.0)),
        FaceData::PlaneWaves(terms) => terms
            .iter()
            .map(|&(a, c)| a * edge_pw_integral(face.a, face.b, [c[0] + test[0], c[1] + test[1]]))
            .sum(),
        FaceData::Sampled { f, points, graded } => {
            let len = face.length();
            let rule = if *graded { graded_edge_rule(*points)? } else { crate::basis::edge_quadrature(*points)? };
            let mut s = Complex64::new(0.0, 0.0);
            for (t, w) in rule {
                let x = face.a + (face.b - face.a) * t;
                s += f(x)? * cdot(test, x).exp() * w;
            }
            s * len
        }
    };
    let djn = d_j.dot(face.normal);
    Ok(match kind {
        FaceKind::Robin => (flux.delta * (-djn - 1.0) + 1.0) * integral,
        FaceKind::Dirichlet => I * kappa * (-flux.alpha + djn) * integral,
        FaceKind::Interior => Complex64::new(0.0, 0.0),
    })
}

/// Impedance and Dirichlet data for the impedance method.
#[derive(Clone, Copy)]
pub enum BoundaryData<'a> {
    Zero,
    /// g_R = ∇u·n − iκu and g_D = u taken from an exact solution.
    Exact(&'a dyn ExactSolution),
}

/// How impedance and Dirichlet data integrals are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataQuadrature {
    /// Closed form for plane-wave data, graded Gauss–Legendre panels otherwise.
    Auto,
    /// A single Gauss–Legendre rule per face for all data.
    Edge,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    /// Gauss–Legendre points per panel for sampled boundary data.
    pub gl_points: usize,
    pub data_quadrature: DataQuadrature,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { gl_points: 10, data_quadrature: DataQuadrature::Auto }
    }
}

struct Accumulator {
    layout: DofLayout,
    triplets: Vec<(usize, usize, Complex64)>,
    rhs: Vec<Complex64>,
}

impl Accumulator {
    fn new(layout: DofLayout) -> Self {
        Self { layout, triplets: Vec::new(), rhs: vec![Complex64::new(0.0, 0.0); layout.n()] }
    }

    fn block<F: FnMut(usize, usize) -> Complex64>(&mut self, trial: usize, test: usize, mut f: F) {
        for j in 0..self.layout.p {
            for l in 0..self.layout.p {
                let v = f(l, j);
                self.triplets.push((self.layout.index(test, j), self.layout.index(trial, l), v));
            }
        }
    }

    fn finish(self) -> LinearSystem {
        LinearSystem::from_triplets(self.layout, self.triplets, self.rhs)
    }
}

fn interior_face(acc: &mut Accumulator, mesh: &Mesh, space: &PlaneWaveSpace, flux: &FluxParams, f: usize) {
    let face = &mesh.faces[f];
    let (a, b) = mesh.face_points(f);
    let e1 = face.owner;
    let e2 = face.neighbor.expect("interior face has a neighbor");
    let n = mesh.owner_normal(f);
    let s1 = Side::plain(e1, space.kappa[e1], n);
    let s2 = Side::plain(e2, space.kappa[e2], -n);
    let xi = 0.5 * (s1.kappa.re + s2.kappa.re);
    add_pair_blocks(acc, space, flux, a, b, &s1, &s2, xi);
}

#[allow(clippy::too_many_arguments)]
fn add_pair_blocks(acc: &mut Accumulator, space: &PlaneWaveSpace, flux: &FluxParams, a: Vec2, b: Vec2, s1: &Side, s2: &Side, xi: f64) {
    let dirs = &space.directions;
    for (s, t) in [(s1, s1), (s2, s2), (s1, s2), (s2, s1)] {
        acc.block(s.elem, t.elem, |l, j| interior_entry(a, b, s, dirs[l], t, dirs[j], flux, xi));
    }
}

fn periodic_pair(acc: &mut Accumulator, mesh: &Mesh, space: &PlaneWaveSpace, flux: &FluxParams, left: usize, right: usize, alpha0: f64) {
    let (a, b) = mesh.face_points(right);
    let er = mesh.faces[right].owner;
    let el = mesh.faces[left].owner;
    let n = mesh.owner_normal(right);
    let sr = Side::plain(er, space.kappa[er], n);
    let sl = Side {
        elem: el,
        kappa: space.kappa[el],
        normal: -n,
        shift: Vec2::new(PERIOD, 0.0),
        phase: (I * alpha0 * PERIOD).exp(),
    };
    let xi = 0.5 * (sr.kappa.re + sl.kappa.re);
    add_pair_blocks(acc, space, flux, a, b, &sr, &sl, xi);
}

fn boundary_block(acc: &mut Accumulator, mesh: &Mesh, space: &PlaneWaveSpace, flux: &FluxParams, f: usize, kind: FaceKind) {
    let e = mesh.faces[f].owner;
    let geom = mesh.face_geom(f, e);
    let kappa = space.kappa[e];
    let dirs = &space.directions;
    acc.block(e, e, |l, j| face_block_same_element(&geom, kappa, dirs[l], dirs[j], flux, kappa.re, kind));
}

fn face_data<'a>(
    exact: &'a dyn ExactSolution,
    mesh: &Mesh,
    f: usize,
    kappa: Complex64,
    kind: FaceKind,
    sampled: &'a dyn Fn(Vec2) -> Result<Complex64>,
    opts: &AssemblyOptions,
) -> FaceData<'a> {
    let e = mesh.faces[f].owner;
    let n = mesh.owner_normal(f);
    if opts.data_quadrature == DataQuadrature::Edge {
        return FaceData::Sampled { f: sampled, points: opts.gl_points, graded: false };
    }
    match exact.plane_wave_terms(mesh.barycenter(e)) {
        Some(terms) => FaceData::PlaneWaves(match kind {
            FaceKind::Robin => terms
                .into_iter()
                .map(|(a, c)| (a * (c[0] * n.x + c[1] * n.y - I * kappa), c))
                .collect(),
            _ => terms,
        }),
        None => FaceData::Sampled { f: sampled, points: opts.gl_points, graded: true },
    }
}

/// Assembles the impedance PWDG system. Boundary faces must be Robin or DirichletBottom.
pub fn assemble_impedance(
    mesh: &Mesh,
    space: &PlaneWaveSpace,
    flux: &FluxParams,
    data: &BoundaryData,
    opts: &AssemblyOptions,
) -> Result<LinearSystem> {
    let layout = DofLayout { p: space.p, elements: mesh.elements.len() };
    let mut acc = Accumulator::new(layout);
    for f in 0..mesh.faces.len() {
        let kind = match mesh.faces[f].tag {
            FaceTag::Interior => {
                interior_face(&mut acc, mesh, space, flux, f);
                continue;
            }
            FaceTag::Robin => FaceKind::Robin,
            FaceTag::DirichletBottom => FaceKind::Dirichlet,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "impedance assembly does not accept {} faces (face {f})",
                    other.as_str()
                )))
            }
        };
        boundary_block(&mut acc, mesh, space, flux, f, kind);
        if let BoundaryData::Exact(exact) = data {
            let e = mesh.faces[f].owner;
            let kappa = space.kappa[e];
            let geom = mesh.face_geom(f, e);
            let robin = impedance_data_from_exact(*exact, kappa, geom.normal);
            let dirichlet = |x: Vec2| exact.eval(x).map(|(u, _)| u);
            let sampled: &dyn Fn(Vec2) -> Result<Complex64> = match kind {
                FaceKind::Robin => &robin,
                _ => &dirichlet,
            };
            let fd = face_data(*exact, mesh, f, kappa, kind, sampled, opts);
            for j in 0..space.p {
                acc.rhs[layout.index(e, j)] += rhs_impedance(&geom, kappa, space.directions[j], flux, kind, &fd)?;
            }
        }
    }
    Ok(acc.finish())
}

/// Assembles the quasi-periodic DtN-PWDG system with a Dirichlet bottom and an
/// incident plane wave from above.
pub fn assemble_dtn(
    mesh: &Mesh,
    space: &PlaneWaveSpace,
    flux: &FluxParams,
    incident: &Incident,
    spec: &DtnSpec,
) -> Result<LinearSystem> {
    let layout = DofLayout { p: space.p, elements: mesh.elements.len() };
    let mut acc = Accumulator::new(layout);
    let right_to_left: HashMap<usize, usize> = mesh.periodic_pairs.iter().map(|&(l, r)| (r, l)).collect();
    let left_faces: HashMap<usize, usize> = mesh.periodic_pairs.iter().copied().collect();
    let dirs = &space.directions;

    for f in 0..mesh.faces.len() {
        match mesh.faces[f].tag {
            FaceTag::Interior => interior_face(&mut acc, mesh, space, flux, f),
            FaceTag::PeriodicPair => {
                if let Some(&left) = right_to_left.get(&f) {
                    periodic_pair(&mut acc, mesh, space, flux, left, f, spec.alpha0);
                } else if !left_faces.contains_key(&f) {
                    return Err(Error::PeriodicMismatch(format!("face {f} is tagged periodic but unpaired")));
                }
            }
            FaceTag::DirichletBottom => boundary_block(&mut acc, mesh, space, flux, f, FaceKind::Dirichlet),
            FaceTag::TopDtn => {
                let e = mesh.faces[f].owner;
                let geom = mesh.face_geom(f, e);
                let kappa = space.kappa[e];
                acc.block(e, e, |l, j| dtn_local_block(&geom, kappa, dirs[l], dirs[j], flux.delta));
                for j in 0..space.p {
                    acc.rhs[layout.index(e, j)] += rhs_dtn(&geom, kappa, dirs[j], flux.delta, incident, spec)?;
                }
            }
            FaceTag::Robin => {
                return Err(Error::InvalidArgument(format!("DtN assembly does not accept Robin faces (face {f})")))
            }
        }
    }

    let weights = ModeWeights::new(spec)?;
    let top = mesh.top_faces();
    let mut tables = Vec::with_capacity(top.len());
    for &f in &top {
        let e = mesh.faces[f].owner;
        let geom = mesh.face_geom(f, e);
        let coeffs = dirs
            .iter()
            .map(|&d| face_coefficients(&geom, space.kappa[e], d, spec))
            .collect::<Result<Vec<_>>>()?;
        tables.push((e, geom, coeffs));
    }
    for (ej, gj, cj) in &tables {
        let kappa_j = space.kappa[*ej];
        for (el, _, cl) in &tables {
            acc.block(*el, *ej, |l, j| {
                let parts = weights.couple(&cl[l].0, &cj[j].1);
                global_combination(parts, gj.normal, kappa_j, dirs[l], dirs[j], flux.delta)
            });
        }
    }
    Ok(acc.finish())
}
