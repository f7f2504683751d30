//! Direct solution of assembled systems and post-processing of discrete fields.

use std::io::Write;
use std::ops::RangeInclusive;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use crate::assembly::LinearSystem;
use crate::basis::{edge_pw_integral, edge_quadrature, CVec2, FluxParams, PlaneWaveSpace, I};
use crate::dtn::{mode_beta, trace_fourier_coefficient, DtnSpec};
use crate::error::{Error, Result};
use crate::geometry::{FaceTag, Mesh, Vec2, PERIOD};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Largest N factorized densely; larger systems use sparse LU.
    pub dense_limit: usize,
    pub residual_tol: f64,
    pub condition_limit: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { dense_limit: 2000, residual_tol: 1e-8, condition_limit: 1e12 }
    }
}

/// Attached when the residual or the condition estimate signals an unreliable solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditioningWarning {
    pub residual: f64,
    pub condition: f64,
}

impl std::fmt::Display for ConditioningWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ill-conditioned system: residual {:.3e}, condition estimate {:.3e}", self.residual, self.condition)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub coefficients: Vec<Complex64>,
    /// ‖Au − b‖₂ / ‖b‖₂ (absolute when b = 0).
    pub residual: f64,
    /// 1-norm condition estimate.
    pub condition: f64,
    pub warning: Option<ConditioningWarning>,
}

fn to_mat(v: &[Complex64]) -> Mat<c64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn from_mat(m: &Mat<c64>) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn one_norm(sys: &LinearSystem) -> f64 {
    let mut cols = vec![0.0; sys.n];
    for (_, c, v) in sys.entries() {
        cols[c] += v.norm();
    }
    cols.into_iter().fold(0.0, f64::max)
}

/// Hager–Higham estimate of ‖A⁻¹‖₁ from solves with A and Aᴴ.
fn inverse_one_norm<S, T>(n: usize, solve: S, solve_adjoint: T) -> f64
where
    S: Fn(&[Complex64]) -> Vec<Complex64>,
    T: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
    let mut estimate = 0.0;
    let mut last_index = usize::MAX;
    for _ in 0..5 {
        let y = solve(&x);
        estimate = y.iter().map(|z| z.norm()).sum::<f64>();
        let xi: Vec<Complex64> =
            y.iter().map(|z| if z.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { z / z.norm() }).collect();
        let z = solve_adjoint(&xi);
        let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
        let zx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
        if zmax <= zx || jmax == last_index {
            break;
        }
        last_index = jmax;
        x = vec![Complex64::new(0.0, 0.0); n];
        x[jmax] = Complex64::new(1.0, 0.0);
    }
    estimate
}

fn relative_residual(sys: &LinearSystem, x: &[Complex64]) -> f64 {
    let diff: Vec<Complex64> = sys.matvec(x).iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
    let bnorm = norm2(&sys.rhs);
    if bnorm > 0.0 {
        norm2(&diff) / bnorm
    } else {
        norm2(&diff)
    }
}

/// LU solve followed by up to three steps of iterative refinement, keeping the
/// iterate with the smallest residual.
fn refine<S: Fn(&[Complex64]) -> Vec<Complex64>>(sys: &LinearSystem, apply: S) -> Vec<Complex64> {
    let mut best = apply(&sys.rhs);
    let mut best_res = relative_residual(sys, &best);
    for _ in 0..3 {
        if !(best_res > 1e-15) {
            break;
        }
        let r: Vec<Complex64> = sys.rhs.iter().zip(sys.matvec(&best)).map(|(b, ax)| b - ax).collect();
        let x: Vec<Complex64> = best.iter().zip(apply(&r)).map(|(a, d)| a + d).collect();
        let res = relative_residual(sys, &x);
        if !(res < best_res) {
            break;
        }
        best = x;
        best_res = res;
    }
    best
}

/// Solves the system by LU factorization and reports residual and conditioning.
pub fn solve(sys: &LinearSystem, opts: &SolveOptions) -> Result<SolveOutcome> {
    let n = sys.n;
    if sys.rhs.len() != n {
        return Err(Error::InvalidArgument(format!("right-hand side has length {} for N = {n}", sys.rhs.len())));
    }
    if n == 0 {
        return Ok(SolveOutcome { coefficients: vec![], residual: 0.0, condition: 0.0, warning: None });
    }
    let (x, inv_norm) = if n <= opts.dense_limit {
        let mut a = Mat::<c64>::zeros(n, n);
        for (r, c, v) in sys.entries() {
            a[(r, c)] = v;
        }
        let lu = a.partial_piv_lu();
        let apply = |v: &[Complex64]| from_mat(&lu.solve(to_mat(v)));
        let est = inverse_one_norm(n, apply, |v| from_mat(&lu.solve_adjoint(to_mat(v))));
        (refine(sys, apply), est)
    } else {
        let triplets: Vec<Triplet<usize, usize, c64>> = sys.entries().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let a = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::InvalidArgument(format!("sparse matrix construction failed: {e:?}")))?;
        let lu = a.sp_lu().map_err(|_| Error::SingularMatrix(n))?;
        let apply = |v: &[Complex64]| from_mat(&lu.solve(to_mat(v)));
        let est = inverse_one_norm(n, apply, |v| from_mat(&lu.solve_adjoint(to_mat(v))));
        (refine(sys, apply), est)
    };
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || !inv_norm.is_finite() {
        return Err(Error::SingularMatrix(n));
    }
    let residual = relative_residual(sys, &x);
    let condition = one_norm(sys) * inv_norm;
    let warning = (residual > opts.residual_tol || condition > opts.condition_limit)
        .then_some(ConditioningWarning { residual, condition });
    Ok(SolveOutcome { coefficients: x, residual, condition, warning })
}

/// Coefficient vector with the mesh and basis it lives on.
#[derive(Clone, Copy, Debug)]
pub struct DiscreteSolution<'a> {
    pub mesh: &'a Mesh,
    pub space: &'a PlaneWaveSpace,
    pub coefficients: &'a [Complex64],
}

const LOCATE_TOL: f64 = 1e-12;

impl<'a> DiscreteSolution<'a> {
    pub fn new(mesh: &'a Mesh, space: &'a PlaneWaveSpace, coefficients: &'a [Complex64]) -> Result<Self> {
        if coefficients.len() != space.ndofs() || space.kappa.len() != mesh.elements.len() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector of length {} does not match N = {}",
                coefficients.len(),
                space.ndofs()
            )));
        }
        Ok(Self { mesh, space, coefficients })
    }

    /// Lowest-index element containing x.
    pub fn locate(&self, x: Vec2) -> Result<usize> {
        (0..self.mesh.elements.len())
            .find(|&e| self.mesh.contains(e, x, LOCATE_TOL))
            .ok_or(Error::PointOutsideDomain { x1: x.x, x2: x.y })
    }

    /// Value and gradient of the restriction to element e, evaluated at x.
    pub fn eval_in(&self, e: usize, x: Vec2) -> (Complex64, CVec2) {
        let p = self.space.p;
        let mut u = Complex64::new(0.0, 0.0);
        let mut g = [Complex64::new(0.0, 0.0); 2];
        for j in 0..p {
            let w = self.coefficients[e * p + j];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (v, dv) = self.space.eval_basis(e, j, x);
            u += w * v;
            g[0] += w * dv[0];
            g[1] += w * dv[1];
        }
        (u, g)
    }

    pub fn evaluate(&self, x: Vec2) -> Result<(Complex64, CVec2)> {
        let e = self.locate(x)?;
        Ok(self.eval_in(e, x))
    }
}

/// Duffy-mapped n×n Gauss rule on the reference triangle (0,0), (1,0), (0,1),
/// returned as (barycentric node, weight).
pub fn triangle_quadrature(order: usize) -> Result<Vec<([f64; 3], f64)>> {
    if !(1..=32).contains(&order) {
        return Err(Error::InvalidArgument(format!("triangle quadrature order {order} outside 1..=32")));
    }
    let g = edge_quadrature(order)?;
    let mut rule = Vec::with_capacity(order * order);
    for &(s, ws) in &g {
        for &(t, wt) in &g {
            let (x, y) = (s, t * (1.0 - s));
            rule.push(([1.0 - x - y, x, y], ws * wt * (1.0 - s)));
        }
    }
    Ok(rule)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub l2_abs: f64,
    pub l2_rel: f64,
    pub h1_semi_abs: f64,
    pub h1_semi_rel: f64,
    /// Full H¹ error relative to the full H¹ norm of the exact solution.
    pub h1_rel: f64,
    pub order: usize,
}

/// L² and H¹ errors against an exact solution by elementwise Duffy quadrature.
pub fn error_norms<F>(sol: &DiscreteSolution, exact: F, order: usize) -> Result<ErrorReport>
where
    F: Fn(Vec2) -> Result<(Complex64, CVec2)>,
{
    let rule = triangle_quadrature(order)?;
    let (mut e0, mut e1, mut n0, mut n1) = (0.0, 0.0, 0.0, 0.0);
    for e in 0..sol.mesh.elements.len() {
        let [a, b, c] = sol.mesh.element_points(e);
        let jac = 2.0 * sol.mesh.area(e);
        let (mut le0, mut le1, mut ln0, mut ln1) = (0.0, 0.0, 0.0, 0.0);
        for &(lam, w) in &rule {
            let x = a * lam[0] + b * lam[1] + c * lam[2];
            let (uh, gh) = sol.eval_in(e, x);
            let (u, g) = exact(x)?;
            le0 += w * (uh - u).norm_sqr();
            le1 += w * ((gh[0] - g[0]).norm_sqr() + (gh[1] - g[1]).norm_sqr());
            ln0 += w * u.norm_sqr();
            ln1 += w * (g[0].norm_sqr() + g[1].norm_sqr());
        }
        e0 += jac * le0;
        e1 += jac * le1;
        n0 += jac * ln0;
        n1 += jac * ln1;
    }
    let rel = |num: f64, den: f64| if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(ErrorReport {
        l2_abs: e0.sqrt(),
        l2_rel: rel(e0, n0),
        h1_semi_abs: e1.sqrt(),
        h1_semi_rel: rel(e1, n1),
        h1_rel: rel(e0 + e1, n0 + n1),
        order,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormVariant {
    /// Impedance seminorm: interior jumps plus Robin and Dirichlet traces.
    Tdg,
    /// DtN seminorm: interior and periodic jumps, Dirichlet trace and the Γ_H residual ∇w·n − T_M w.
    TdgT,
}

/// Sum of a_m e^{c_m·x} restricted to one side of a face.
struct Terms(Vec<(Complex64, CVec2)>);

impl Terms {
    fn squared_integral(&self, a: Vec2, b: Vec2) -> f64 {
        let mut s = Complex64::new(0.0, 0.0);
        for &(al, cl) in &self.0 {
            for &(am, cm) in &self.0 {
                s += al * am.conj() * edge_pw_integral(a, b, [cl[0] + cm[0].conj(), cl[1] + cm[1].conj()]);
            }
        }
        s.re.max(0.0)
    }
}

struct SideView {
    elem: usize,
    normal: Vec2,
    shift: Vec2,
    phase: Complex64,
}

fn side_terms(sol: &DiscreteSolution, s: &SideView, sign: f64, normal_derivative: bool) -> Vec<(Complex64, CVec2)> {
    let p = sol.space.p;
    let kappa = sol.space.kappa[s.elem];
    (0..p)
        .map(|l| {
            let d = sol.space.directions[l];
            let c = [I * kappa * d.x, I * kappa * d.y];
            let mut amp = sign * sol.coefficients[s.elem * p + l] * s.phase * (-I * kappa * d.dot(s.shift)).exp();
            if normal_derivative {
                amp *= I * kappa * d.dot(s.normal);
            }
            (amp, c)
        })
        .collect()
}

fn pair_terms(sol: &DiscreteSolution, a: Vec2, b: Vec2, s1: &SideView, s2: &SideView, flux: &FluxParams) -> f64 {
    let xi = 0.5 * (sol.space.kappa[s1.elem].re + sol.space.kappa[s2.elem].re);
    let mut jump = side_terms(sol, s1, 1.0, false);
    jump.extend(side_terms(sol, s2, -1.0, false));
    let mut njump = side_terms(sol, s1, 1.0, true);
    njump.extend(side_terms(sol, s2, 1.0, true));
    flux.beta / xi * Terms(njump).squared_integral(a, b) + flux.alpha * xi * Terms(jump).squared_integral(a, b)
}

/// Mesh-dependent seminorm |||w||| of a discrete field; the Γ_H term of `TdgT` needs `spec`.
pub fn tdg_norm(sol: &DiscreteSolution, variant: NormVariant, flux: &FluxParams, spec: Option<&DtnSpec>) -> Result<f64> {
    let mesh = sol.mesh;
    if variant == NormVariant::TdgT && spec.is_none() {
        return Err(Error::InvalidArgument("the TDG_T norm requires a DtN specification".into()));
    }
    let alpha0 = spec.map(|s| s.alpha0).unwrap_or(0.0);
    let plain = |e: usize, n: Vec2| SideView { elem: e, normal: n, shift: Vec2::default(), phase: Complex64::new(1.0, 0.0) };
    let mut total = 0.0;
    for (f, face) in mesh.faces.iter().enumerate() {
        let (a, b) = mesh.face_points(f);
        let n = mesh.owner_normal(f);
        let e = face.owner;
        let kr = sol.space.kappa[e].re;
        total += match face.tag {
            FaceTag::Interior => {
                let nb = face.neighbor.expect("interior face has a neighbor");
                pair_terms(sol, a, b, &plain(e, n), &plain(nb, -n), flux)
            }
            FaceTag::PeriodicPair => match mesh.periodic_pairs.iter().find(|&&(_, r)| r == f) {
                Some(&(left, _)) => {
                    let left_side = SideView {
                        elem: mesh.faces[left].owner,
                        normal: -n,
                        shift: Vec2::new(PERIOD, 0.0),
                        phase: (I * alpha0 * PERIOD).exp(),
                    };
                    pair_terms(sol, a, b, &plain(e, n), &left_side, flux)
                }
                None => 0.0,
            },
            FaceTag::Robin => {
                if variant == NormVariant::TdgT {
                    return Err(Error::InvalidArgument(format!("Robin face {f} in a TDG_T norm")));
                }
                let s = plain(e, n);
                flux.delta / kr * Terms(side_terms(sol, &s, 1.0, true)).squared_integral(a, b)
                    + kr * (1.0 - flux.delta) * Terms(side_terms(sol, &s, 1.0, false)).squared_integral(a, b)
            }
            FaceTag::DirichletBottom => kr * flux.alpha * Terms(side_terms(sol, &plain(e, n), 1.0, false)).squared_integral(a, b),
            FaceTag::TopDtn => {
                if variant == NormVariant::Tdg {
                    return Err(Error::InvalidArgument(format!("Γ_H face {f} in a TDG norm")));
                }
                0.0
            }
        };
    }
    if variant == NormVariant::TdgT {
        total += top_residual(sol, flux, spec.expect("checked above"))?;
    }
    Ok(total.max(0.0).sqrt())
}

/// δ/κ ∫_{Γ_H} |∂_n w − T_M w|² through the Fourier coefficients of the traces.
fn top_residual(sol: &DiscreteSolution, flux: &FluxParams, spec: &DtnSpec) -> Result<f64> {
    let mesh = sol.mesh;
    let top = mesh.top_faces();
    if top.is_empty() {
        return Ok(0.0);
    }
    let p = sol.space.p;
    let kr = sol.space.kappa[mesh.faces[top[0]].owner].re;
    let modes: Vec<i64> = spec.modes().collect();
    let mut wn = vec![Complex64::new(0.0, 0.0); modes.len()];
    let mut fnn = vec![Complex64::new(0.0, 0.0); modes.len()];
    let mut dn_sq = 0.0;
    for &f in &top {
        let e = mesh.faces[f].owner;
        let geom = mesh.face_geom(f, e);
        let s = SideView { elem: e, normal: geom.normal, shift: Vec2::default(), phase: Complex64::new(1.0, 0.0) };
        dn_sq += Terms(side_terms(sol, &s, 1.0, true)).squared_integral(geom.a, geom.b);
        let kappa = sol.space.kappa[e];
        for l in 0..p {
            let w = sol.coefficients[e * p + l];
            let d = sol.space.directions[l];
            let dn = I * kappa * d.dot(geom.normal);
            for (i, &n) in modes.iter().enumerate() {
                let phi = trace_fourier_coefficient(&geom, kappa, d, n, spec)?;
                wn[i] += w * phi;
                fnn[i] += w * dn * phi;
            }
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut cross = Complex64::new(0.0, 0.0);
    let mut tw_sq = 0.0;
    for (i, &n) in modes.iter().enumerate() {
        let beta = mode_beta(n, spec)?;
        cross += two_pi * (-I * beta.conj()) * wn[i].conj() * fnn[i];
        tw_sq += two_pi * beta.norm_sqr() * wn[i].norm_sqr();
    }
    Ok(flux.delta / kr * (dn_sq - 2.0 * cross.re + tw_sq).max(0.0))
}

/// Samples a discrete solution on copies of the periodicity cell via
/// u(x₁ + 2πm, x₂) = e^{iα₀2πm} u(x₁, x₂).
#[derive(Clone, Debug)]
pub struct QuasiPeriodicSampler<'a> {
    pub sol: DiscreteSolution<'a>,
    pub alpha0: f64,
    pub copies: RangeInclusive<i64>,
}

pub fn extend_quasiperiodic<'a>(sol: DiscreteSolution<'a>, alpha0: f64, copies: RangeInclusive<i64>) -> QuasiPeriodicSampler<'a> {
    QuasiPeriodicSampler { sol, alpha0, copies }
}

impl QuasiPeriodicSampler<'_> {
    pub fn eval(&self, x: Vec2) -> Result<Complex64> {
        let outside = Error::PointOutsideDomain { x1: x.x, x2: x.y };
        let mut m = (x.x / PERIOD).floor() as i64;
        // The right edge of the last copy belongs to that copy.
        if !self.copies.contains(&m) && m - 1 == *self.copies.end() && (x.x - PERIOD * m as f64).abs() < 1e-12 {
            m -= 1;
        }
        if !self.copies.contains(&m) {
            return Err(outside);
        }
        let x0 = Vec2::new(x.x - PERIOD * m as f64, x.y);
        let (u, _) = self.sol.evaluate(x0)?;
        Ok((I * self.alpha0 * PERIOD * m as f64).exp() * u)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldComponent {
    /// Columns "x1 x2 re im".
    Complex,
    Re,
    Im,
    Abs,
}

impl FieldComponent {
    pub fn suffix(self) -> &'static str {
        match self {
            FieldComponent::Complex => "complex",
            FieldComponent::Re => "re",
            FieldComponent::Im => "im",
            FieldComponent::Abs => "abs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub x: Vec2,
    pub value: Complex64,
}

/// Samples `f` on an nx × ny grid spanning the closed rectangle, row by row in x₂.
pub fn sample_grid<F>(f: F, x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<Vec<FieldSample>>
where
    F: Fn(Vec2) -> Result<Complex64>,
{
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument(format!("grid {nx}×{ny} needs at least two points per direction")));
    }
    let coord = |lo: f64, hi: f64, n: usize, i: usize| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
    let mut out = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = coord(y_range.0, y_range.1, ny, iy);
        for ix in 0..nx {
            let x = Vec2::new(coord(x_range.0, x_range.1, nx, ix), y);
            out.push(FieldSample { x, value: f(x)? });
        }
    }
    Ok(out)
}

pub fn write_field<W: Write>(mut w: W, samples: &[FieldSample], component: FieldComponent) -> Result<()> {
    match component {
        FieldComponent::Complex => writeln!(w, "x1 x2 re im")?,
        _ => writeln!(w, "x1 x2 value")?,
    }
    for s in samples {
        match component {
            FieldComponent::Complex => {
                writeln!(w, "{:.10e} {:.10e} {:.16e} {:.16e}", s.x.x, s.x.y, s.value.re, s.value.im)?
            }
            FieldComponent::Re => writeln!(w, "{:.10e} {:.10e} {:.16e}", s.x.x, s.x.y, s.value.re)?,
            FieldComponent::Im => writeln!(w, "{:.10e} {:.10e} {:.16e}", s.x.x, s.x.y, s.value.im)?,
            FieldComponent::Abs => writeln!(w, "{:.10e} {:.10e} {:.16e}", s.x.x, s.x.y, s.value.norm())?,
        }
    }
    Ok(())
}
