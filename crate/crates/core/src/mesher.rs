//! Periodic-compatible constrained Delaunay meshing of the strip [0,2π]×[−H,H].

use std::collections::HashMap;

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{
    admissible_eps, orient, BoundaryKind, InterfaceSpec, Mesh, Vec2, PERIOD,
};

/// Node spacing used by the mesher for a strip of half-height `half_height`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spacing {
    pub cols: usize,
    pub rows: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Spacing {
    /// Rows follow `h_target` directly; columns are as wide as possible while the
    /// diagonal of a dx×dy cell stays within 1.2·h_target.
    pub fn new(half_height: f64, h_target: f64) -> Spacing {
        let rows = ((2.0 * half_height / h_target - 1e-9).ceil() as usize).max(1);
        let dy = 2.0 * half_height / rows as f64;
        let reach = (1.2 * h_target).powi(2) - dy * dy;
        let dx_target = reach.max((0.5 * h_target).powi(2)).sqrt();
        let cols = ((PERIOD / dx_target - 1e-9).ceil() as usize).max(1);
        Spacing { cols, rows, dx: PERIOD / cols as f64, dy }
    }

    fn interface_step(&self) -> f64 {
        if self.rows == 1 && self.cols == 1 {
            self.dx
        } else {
            self.dx.min(self.dy)
        }
    }
}

fn subdivide(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = (((hi - lo) / step - 1e-9).ceil() as usize).max(1);
    (0..=n)
        .map(|i| if i == n { hi } else { lo + (hi - lo) * (i as f64 / n as f64) })
        .collect()
}

fn segments_touch(p: Vec2, q: Vec2, a: Vec2, b: Vec2) -> Option<Vec2> {
    let d1 = orient(a, b, p);
    let d2 = orient(a, b, q);
    let d3 = orient(p, q, a);
    let d4 = orient(p, q, b);
    let scale = (q - p).norm() * (b - a).norm();
    let eps = 1e-12 * scale;
    let straddle = |u: f64, v: f64| (u <= eps && v >= -eps) || (u >= -eps && v <= eps);
    if !(straddle(d1, d2) && straddle(d3, d4)) {
        return None;
    }
    let collinear = d1.abs() <= eps && d2.abs() <= eps;
    if collinear {
        let t = q - p;
        let tt = t.dot(t);
        let sa = (a - p).dot(t) / tt;
        let sb = (b - p).dot(t) / tt;
        let (lo, hi) = (sa.min(sb), sa.max(sb));
        if hi < -1e-12 || lo > 1.0 + 1e-12 {
            return None;
        }
        return Some(p + t * lo.clamp(0.0, 1.0));
    }
    let t = d1 / (d1 - d2);
    Some(p + (q - p) * t)
}

fn point_in_polygon(x: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + n - 1) % n];
        if (a.y > x.y) != (b.y > x.y) {
            let xc = a.x + (x.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if x.x < xc {
                inside = !inside;
            }
        }
    }
    inside
}

/// Height of an x₁-monotone polyline at abscissa `x`, using a non-vertical segment.
fn polyline_height(line: &[Vec2], x: f64) -> f64 {
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.x > a.x && x >= a.x && x <= b.x {
            return a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);
        }
    }
    line[line.len() - 1].y
}

fn checked_spec(spec: &InterfaceSpec, half_height: f64) -> Result<InterfaceSpec> {
    let mut out = spec.clone();
    for (li, line) in out.polylines.iter_mut().enumerate() {
        if line.len() < 2 {
            return Err(Error::InvalidArgument(format!("polyline {li} needs at least two points")));
        }
        let n = line.len();
        if line[0].x.abs() > 1e-12 || (line[n - 1].x - PERIOD).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("polyline {li} must span x1 in [0, 2pi]")));
        }
        line[0].x = 0.0;
        line[n - 1].x = PERIOD;
        if line[0].y != line[n - 1].y {
            return Err(Error::InvalidArgument(format!(
                "polyline {li} has unequal end heights {} and {}",
                line[0].y,
                line[n - 1].y
            )));
        }
        for w in line.windows(2) {
            if w[1].x < w[0].x || (w[1] - w[0]).norm() == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "polyline {li} must have non-decreasing x1 and distinct points"
                )));
            }
        }
        if line.iter().any(|p| p.y <= -half_height || p.y >= half_height) {
            return Err(Error::InvalidArgument(format!("polyline {li} leaves the open strip")));
        }
    }
    for (pi, poly) in out.polygons.iter().enumerate() {
        if poly.len() < 3 {
            return Err(Error::InvalidArgument(format!("polygon {pi} needs at least three points")));
        }
        if poly
            .iter()
            .any(|p| p.x <= 0.0 || p.x >= PERIOD || p.y <= -half_height || p.y >= half_height)
        {
            return Err(Error::InvalidArgument(format!("polygon {pi} is not strictly inside the strip")));
        }
    }

    let curves = out.interfaces();
    let segs: Vec<Vec<(Vec2, Vec2)>> = curves.iter().map(|c| c.segments()).collect();
    for (ci, si) in segs.iter().enumerate() {
        for (cj, sj) in segs.iter().enumerate().skip(ci) {
            for (a, &(p, q)) in si.iter().enumerate() {
                for (b, &(r, s)) in sj.iter().enumerate() {
                    if ci == cj {
                        let m = si.len();
                        let adjacent = b <= a + 1
                            || (curves[ci].closed && a == 0 && b == m - 1);
                        if adjacent {
                            continue;
                        }
                    }
                    if let Some(x) = segments_touch(p, q, r, s) {
                        return Err(Error::InterfaceCrossing { x1: x.x, x2: x.y });
                    }
                }
            }
        }
    }

    for region in 0..out.region_count() {
        match out.region_eps.get(&region) {
            None => return Err(Error::MissingPermittivity(region)),
            Some(&e) if !admissible_eps(e) => {
                return Err(Error::InadmissiblePermittivity { region, re: e.re, im: e.im })
            }
            Some(_) => {}
        }
    }
    Ok(out)
}

struct PointSet {
    points: Vec<Vec2>,
    index: HashMap<(u64, u64), usize>,
}

impl PointSet {
    fn add(&mut self, p: Vec2) -> usize {
        let key = (p.x.to_bits(), p.y.to_bits());
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.points.push(p);
        self.index.insert(key, self.points.len() - 1);
        self.points.len() - 1
    }
}

fn distance_to_segment(x: Vec2, a: Vec2, b: Vec2) -> f64 {
    let t = b - a;
    let s = ((x - a).dot(t) / t.dot(t)).clamp(0.0, 1.0);
    (x - (a + t * s)).norm()
}

/// Triangulates the strip so that elements respect the interfaces of `spec` and the
/// left and right boundary nodes share their x₂ coordinates exactly.
pub fn generate_periodic_mesh(spec: &InterfaceSpec, half_height: f64, h_target: f64) -> Result<Mesh> {
    if !(half_height > 0.0 && half_height.is_finite()) {
        return Err(Error::InvalidArgument(format!("half height must be positive, got {half_height}")));
    }
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(Error::InvalidArgument(format!("h_target must be positive, got {h_target}")));
    }
    let spec = checked_spec(spec, half_height)?;
    let sp = Spacing::new(half_height, h_target);
    let step = sp.interface_step();
    let hh = half_height;

    let mut set = PointSet { points: Vec::new(), index: HashMap::new() };

    for x in subdivide(0.0, PERIOD, sp.dx) {
        set.add(Vec2::new(x, -hh));
        set.add(Vec2::new(x, hh));
    }
    let mut breaks: Vec<f64> = vec![-hh, hh];
    breaks.extend(spec.polylines.iter().map(|l| l[0].y));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    for w in breaks.windows(2) {
        for y in subdivide(w[0], w[1], sp.dy) {
            set.add(Vec2::new(0.0, y));
            set.add(Vec2::new(PERIOD, y));
        }
    }

    let mut constraints: Vec<(usize, usize)> = Vec::new();
    let mut constraint_segments: Vec<(Vec2, Vec2)> = Vec::new();
    for curve in spec.interfaces() {
        for (p, q) in curve.segments() {
            let n = ((((q - p).norm()) / step - 1e-9).ceil() as usize).max(1);
            let mut prev = set.add(p);
            for i in 1..=n {
                let x = if i == n { q } else { p + (q - p) * (i as f64 / n as f64) };
                let cur = set.add(x);
                constraints.push((prev, cur));
                constraint_segments.push((set.points[prev], x));
                prev = cur;
            }
        }
    }

    let keep_out = 0.3 * step;
    for i in 1..sp.cols {
        for j in 1..sp.rows {
            let x = Vec2::new(sp.dx * i as f64, -hh + sp.dy * j as f64);
            let blocked = constraint_segments.iter().any(|&(a, b)| {
                let mid = (a + b) * 0.5;
                distance_to_segment(x, a, b) < keep_out || (x - mid).norm() < 0.5 * (b - a).norm()
            });
            if !blocked {
                set.add(x);
            }
        }
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handle_to_point = HashMap::new();
    let mut handles = Vec::with_capacity(set.points.len());
    for (i, p) in set.points.iter().enumerate() {
        let h = cdt
            .insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::InvalidArgument(format!("triangulation insert failed: {e:?}")))?;
        handle_to_point.insert(h.index(), i);
        handles.push(h);
    }
    for &(a, b) in &constraints {
        if !cdt.can_add_constraint(handles[a], handles[b]) {
            let p = set.points[a];
            return Err(Error::InterfaceCrossing { x1: p.x, x2: p.y });
        }
        cdt.add_constraint(handles[a], handles[b]);
    }

    let n_lines = spec.polylines.len();
    let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
    for face in cdt.inner_faces() {
        let vs = face.vertices().map(|v| handle_to_point[&v.fix().index()]);
        let g = (set.points[vs[0]] + set.points[vs[1]] + set.points[vs[2]]) * (1.0 / 3.0);
        let polygon = spec.polygons.iter().rposition(|poly| point_in_polygon(g, poly));
        let region = match polygon {
            Some(pi) => n_lines + 1 + pi,
            None => spec.polylines.iter().filter(|l| polyline_height(l, g.x) < g.y).count(),
        };
        triangles.push((vs, region));
    }

    let mut mesh = Mesh::from_triangles(set.points, triangles, BoundaryKind::Strip { half_height })?;
    mesh.interfaces = spec.interfaces();
    Ok(mesh)
}
