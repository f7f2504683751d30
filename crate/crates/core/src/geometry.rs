//! Strip geometry, triangulations with face classification and periodic pairing,
//! and mesh validation.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Period of the grating in x₁.
pub const PERIOD: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Clockwise rotation by a right angle.
    pub fn rot_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Twice the signed area of the triangle (a, b, c); positive when counter-clockwise.
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaceTag {
    Interior,
    PeriodicPair,
    DirichletBottom,
    TopDtn,
    Robin,
}

impl FaceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FaceTag::Interior => "Interior",
            FaceTag::PeriodicPair => "PeriodicPair",
            FaceTag::DirichletBottom => "DirichletBottom",
            FaceTag::TopDtn => "TopDtN",
            FaceTag::Robin => "Robin",
        }
    }

    pub fn parse(s: &str) -> Option<FaceTag> {
        Some(match s {
            "Interior" => FaceTag::Interior,
            "PeriodicPair" => FaceTag::PeriodicPair,
            "DirichletBottom" => FaceTag::DirichletBottom,
            "TopDtN" => FaceTag::TopDtn,
            "Robin" => FaceTag::Robin,
            _ => return None,
        })
    }
}

/// A mesh edge. The vertex order follows the owner's counter-clockwise orientation,
/// so the owner's outward normal is the clockwise rotation of `v1 - v0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub tag: FaceTag,
    pub owner: usize,
    /// Second element for interior faces; the partner face's owner for periodic pairs.
    pub neighbor: Option<usize>,
}

/// Endpoints of a face together with the outward normal of the element it is seen from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceGeom {
    pub id: usize,
    pub a: Vec2,
    pub b: Vec2,
    pub normal: Vec2,
}

impl FaceGeom {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn midpoint(&self) -> Vec2 {
        (self.a + self.b) * 0.5
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    /// Counter-clockwise vertex indices.
    pub vertices: [usize; 3],
    pub region: usize,
}

/// An interface curve stored with the mesh for validation.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<Vec2>,
    pub closed: bool,
}

impl Polyline {
    pub fn segments(&self) -> Vec<(Vec2, Vec2)> {
        let n = self.points.len();
        let mut out: Vec<(Vec2, Vec2)> = self.points.windows(2).map(|w| (w[0], w[1])).collect();
        if self.closed && n > 2 {
            out.push((self.points[n - 1], self.points[0]));
        }
        out
    }
}

/// Interface description used by the mesher.
///
/// Open polylines run from x₁ = 0 to x₁ = 2π and split the strip into bands;
/// band `i` lies above exactly `i` polylines. Closed polygons get region ids
/// `polylines.len() + 1 + index`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InterfaceSpec {
    pub polylines: Vec<Vec<Vec2>>,
    pub polygons: Vec<Vec<Vec2>>,
    pub region_eps: BTreeMap<usize, Complex64>,
}

impl InterfaceSpec {
    pub fn region_count(&self) -> usize {
        self.polylines.len() + 1 + self.polygons.len()
    }

    /// Single horizontal interface at height `x2`, with `eps_upper` above and `eps_lower` below.
    pub fn flat(x2: f64, eps_upper: Complex64, eps_lower: Complex64) -> Self {
        let mut region_eps = BTreeMap::new();
        region_eps.insert(0, eps_lower);
        region_eps.insert(1, eps_upper);
        Self {
            polylines: vec![vec![Vec2::new(0.0, x2), Vec2::new(PERIOD, x2)]],
            polygons: Vec::new(),
            region_eps,
        }
    }

    pub fn interfaces(&self) -> Vec<Polyline> {
        let open = self.polylines.iter().map(|p| Polyline { points: p.clone(), closed: false });
        let closed = self.polygons.iter().map(|p| Polyline { points: p.clone(), closed: true });
        open.chain(closed).collect()
    }
}

/// True when ε is an admissible relative permittivity.
pub fn admissible_eps(eps: Complex64) -> bool {
    (eps.re > 0.0 && eps.im >= 0.0) || (eps.re <= 0.0 && eps.im > 0.0)
}

/// How boundary faces are classified when building a mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryKind {
    /// The strip [0,2π]×[−H,H]: bottom Dirichlet, top DtN, sides periodic.
    Strip { half_height: f64 },
    /// Every boundary face is an impedance face.
    AllRobin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
    /// (left face, right face) index pairs.
    pub periodic_pairs: Vec<(usize, usize)>,
    pub element_faces: Vec<[usize; 3]>,
    /// Maximum circumscribed-circle diameter.
    pub h: f64,
    /// Strip half-height H, when the mesh covers a strip.
    pub half_height: Option<f64>,
    pub interfaces: Vec<Polyline>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

impl Mesh {
    /// Builds faces, tags and periodic pairs from a list of triangles with region ids.
    /// Triangles are reoriented counter-clockwise.
    pub fn from_triangles(
        vertices: Vec<Vec2>,
        triangles: Vec<([usize; 3], usize)>,
        boundary: BoundaryKind,
    ) -> Result<Mesh> {
        let mut elements = Vec::with_capacity(triangles.len());
        for (tri, region) in triangles {
            for &v in &tri {
                if v >= vertices.len() {
                    return Err(Error::InvalidArgument(format!("vertex index {v} out of range")));
                }
            }
            let [a, b, c] = tri;
            let o = orient(vertices[a], vertices[b], vertices[c]);
            let vs = if o < 0.0 { [a, c, b] } else { [a, b, c] };
            elements.push(Element { vertices: vs, region });
        }

        let mut edges: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (e, el) in elements.iter().enumerate() {
            for i in 0..3 {
                let a = el.vertices[i];
                let b = el.vertices[(i + 1) % 3];
                edges.entry(edge_key(a, b)).or_default().push((e, i));
            }
        }

        let mut faces = Vec::with_capacity(edges.len());
        let mut element_faces = vec![[usize::MAX; 3]; elements.len()];
        // Faces are numbered by owner element, then local edge, for a stable layout.
        let mut order: Vec<(&(usize, usize), &Vec<(usize, usize)>)> = edges.iter().collect();
        order.sort_by_key(|(_, inc)| inc[0]);
        for (key, inc) in order {
            if inc.len() > 2 {
                return Err(Error::InvalidArgument(format!(
                    "edge ({}, {}) shared by {} elements",
                    key.0,
                    key.1,
                    inc.len()
                )));
            }
            let (owner, local) = inc[0];
            let a = elements[owner].vertices[local];
            let b = elements[owner].vertices[(local + 1) % 3];
            let fi = faces.len();
            element_faces[owner][local] = fi;
            let (tag, neighbor) = if inc.len() == 2 {
                let (nb, nl) = inc[1];
                element_faces[nb][nl] = fi;
                (FaceTag::Interior, Some(nb))
            } else {
                (FaceTag::Robin, None)
            };
            faces.push(Face { vertices: [a, b], tag, owner, neighbor });
        }

        let mut periodic_pairs = Vec::new();
        let mut half_height = None;
        if let BoundaryKind::Strip { half_height: hh } = boundary {
            half_height = Some(hh);
            let mut left: HashMap<(u64, u64), usize> = HashMap::new();
            let mut right: Vec<((u64, u64), usize)> = Vec::new();
            for (fi, f) in faces.iter_mut().enumerate() {
                if f.neighbor.is_some() {
                    continue;
                }
                let p = vertices[f.vertices[0]];
                let q = vertices[f.vertices[1]];
                let ylo = p.y.min(q.y);
                let yhi = p.y.max(q.y);
                if close(p.y, -hh, hh) && close(q.y, -hh, hh) {
                    f.tag = FaceTag::DirichletBottom;
                } else if close(p.y, hh, hh) && close(q.y, hh, hh) {
                    f.tag = FaceTag::TopDtn;
                } else if close(p.x, 0.0, PERIOD) && close(q.x, 0.0, PERIOD) {
                    left.insert((ylo.to_bits(), yhi.to_bits()), fi);
                } else if close(p.x, PERIOD, PERIOD) && close(q.x, PERIOD, PERIOD) {
                    right.push(((ylo.to_bits(), yhi.to_bits()), fi));
                } else {
                    return Err(Error::InvalidArgument(format!(
                        "boundary face {fi} is not on the strip boundary"
                    )));
                }
            }
            if left.len() != right.len() {
                return Err(Error::PeriodicMismatch(format!(
                    "{} left faces versus {} right faces",
                    left.len(),
                    right.len()
                )));
            }
            right.sort_by(|a, b| {
                f64::from_bits(a.0 .0).total_cmp(&f64::from_bits(b.0 .0))
            });
            for (key, fr) in right {
                let fl = left.remove(&key).ok_or_else(|| {
                    Error::PeriodicMismatch(format!(
                        "right face {fr} at x2 in [{}, {}] has no left partner",
                        f64::from_bits(key.0),
                        f64::from_bits(key.1)
                    ))
                })?;
                let ol = faces[fl].owner;
                let or = faces[fr].owner;
                faces[fl].tag = FaceTag::PeriodicPair;
                faces[fl].neighbor = Some(or);
                faces[fr].tag = FaceTag::PeriodicPair;
                faces[fr].neighbor = Some(ol);
                periodic_pairs.push((fl, fr));
            }
        }

        let mut mesh = Mesh {
            vertices,
            elements,
            faces,
            periodic_pairs,
            element_faces,
            h: 0.0,
            half_height,
            interfaces: Vec::new(),
        };
        mesh.h = (0..mesh.elements.len()).map(|e| mesh.circumdiameter(e)).fold(0.0, f64::max);
        Ok(mesh)
    }

    pub fn element_points(&self, e: usize) -> [Vec2; 3] {
        let v = self.elements[e].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn face_points(&self, f: usize) -> (Vec2, Vec2) {
        let v = self.faces[f].vertices;
        (self.vertices[v[0]], self.vertices[v[1]])
    }

    /// Outward unit normal of the face's owner element.
    pub fn owner_normal(&self, f: usize) -> Vec2 {
        let (a, b) = self.face_points(f);
        let t = b - a;
        t.rot_cw() * (1.0 / t.norm())
    }

    /// Outward unit normal of face `f` seen from element `e`.
    pub fn normal_from(&self, f: usize, e: usize) -> Vec2 {
        let n = self.owner_normal(f);
        if self.faces[f].owner == e {
            n
        } else {
            -n
        }
    }

    /// Geometry of face `f` as seen from element `e`.
    pub fn face_geom(&self, f: usize, e: usize) -> FaceGeom {
        let (a, b) = self.face_points(f);
        FaceGeom { id: f, a, b, normal: self.normal_from(f, e) }
    }

    pub fn area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_points(e);
        0.5 * orient(a, b, c)
    }

    pub fn barycenter(&self, e: usize) -> Vec2 {
        let [a, b, c] = self.element_points(e);
        (a + b + c) * (1.0 / 3.0)
    }

    pub fn circumdiameter(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_points(e);
        let la = (b - c).norm();
        let lb = (c - a).norm();
        let lc = (a - b).norm();
        let twice_area = orient(a, b, c).abs();
        if twice_area == 0.0 {
            return f64::INFINITY;
        }
        la * lb * lc / twice_area
    }

    /// Barycentric coordinates of `x` with respect to element `e`.
    pub fn barycentric(&self, e: usize, x: Vec2) -> [f64; 3] {
        let [a, b, c] = self.element_points(e);
        let d = orient(a, b, c);
        let l1 = orient(x, b, c) / d;
        let l2 = orient(a, x, c) / d;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// Element `e` contains `x` up to a relative tolerance in barycentric coordinates.
    pub fn contains(&self, e: usize, x: Vec2, tol: f64) -> bool {
        self.barycentric(e, x).iter().all(|&l| l >= -tol)
    }

    /// Converts every boundary face to an impedance face and drops the periodic pairing.
    pub fn with_all_robin(mut self) -> Mesh {
        for f in &mut self.faces {
            if f.tag != FaceTag::Interior {
                f.tag = FaceTag::Robin;
                f.neighbor = None;
            }
        }
        self.periodic_pairs.clear();
        self
    }

    pub fn regions(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.elements.iter().map(|e| e.region).collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    /// Indices of faces on Γ_H, ordered by their left x₁ endpoint.
    pub fn top_faces(&self) -> Vec<usize> {
        let mut t: Vec<usize> = (0..self.faces.len())
            .filter(|&f| self.faces[f].tag == FaceTag::TopDtn)
            .collect();
        t.sort_by(|&a, &b| {
            let (pa, qa) = self.face_points(a);
            let (pb, qb) = self.face_points(b);
            pa.x.min(qa.x).total_cmp(&pb.x.min(qb.x))
        });
        t
    }
}

/// The eight-triangle mesh of [0,1]×[−0.5,0.5]: a 3×3 vertex grid with each
/// sub-square cut along its rising diagonal. All boundary faces are impedance faces.
pub fn fixed_eight_triangle_mesh() -> Mesh {
    let mut vertices = Vec::with_capacity(9);
    for j in 0..3 {
        for i in 0..3 {
            vertices.push(Vec2::new(0.5 * i as f64, -0.5 + 0.5 * j as f64));
        }
    }
    let mut triangles = Vec::with_capacity(8);
    for j in 0..2 {
        for i in 0..2 {
            let v00 = 3 * j + i;
            let v10 = v00 + 1;
            let v01 = v00 + 3;
            let v11 = v01 + 1;
            triangles.push(([v00, v10, v11], 0));
            triangles.push(([v00, v11, v01], 0));
        }
    }
    Mesh::from_triangles(vertices, triangles, BoundaryKind::AllRobin)
        .expect("fixed mesh is well formed")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositiveArea { element: usize },
    AdjacencyCount { face: usize },
    StraddlesInterface { element: usize },
    PeriodicMismatch { left: usize, right: usize },
    BoundaryTag { face: usize },
    MissingPermittivity { region: usize },
    AreaSum { expected: f64, actual: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn segments_cross_properly(p: Vec2, q: Vec2, a: Vec2, b: Vec2) -> bool {
    let d1 = orient(a, b, p);
    let d2 = orient(a, b, q);
    let d3 = orient(p, q, a);
    let d4 = orient(p, q, b);
    let scale = ((q - p).norm() * (b - a).norm()).max(f64::MIN_POSITIVE);
    let eps = 1e-12 * scale;
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
        && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

fn strictly_inside(mesh: &Mesh, e: usize, x: Vec2) -> bool {
    mesh.barycentric(e, x).iter().all(|&l| l > 1e-10)
}

/// Lists every invariant violation of `mesh`; an empty report means the mesh is valid.
pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let mut violations = Vec::new();

    for e in 0..mesh.elements.len() {
        if mesh.area(e) <= 0.0 {
            violations.push(Violation::NonPositiveArea { element: e });
        }
    }

    let mut incidence: HashMap<(usize, usize), usize> = HashMap::new();
    for el in &mesh.elements {
        for i in 0..3 {
            *incidence.entry(edge_key(el.vertices[i], el.vertices[(i + 1) % 3])).or_default() += 1;
        }
    }
    for (fi, f) in mesh.faces.iter().enumerate() {
        let count = incidence.get(&edge_key(f.vertices[0], f.vertices[1])).copied().unwrap_or(0);
        let ok = match f.tag {
            FaceTag::Interior => count == 2 && f.neighbor.is_some(),
            FaceTag::PeriodicPair => count == 1 && f.neighbor.is_some(),
            _ => count == 1 && f.neighbor.is_none(),
        };
        if !ok {
            violations.push(Violation::AdjacencyCount { face: fi });
        }
    }

    let segments: Vec<(Vec2, Vec2)> = mesh.interfaces.iter().flat_map(|p| p.segments()).collect();
    if !segments.is_empty() {
        for e in 0..mesh.elements.len() {
            let pts = mesh.element_points(e);
            let straddles = segments.iter().any(|&(p, q)| {
                let mid = (p + q) * 0.5;
                strictly_inside(mesh, e, p)
                    || strictly_inside(mesh, e, q)
                    || strictly_inside(mesh, e, mid)
                    || (0..3).any(|i| segments_cross_properly(p, q, pts[i], pts[(i + 1) % 3]))
            });
            if straddles {
                violations.push(Violation::StraddlesInterface { element: e });
            }
        }
    }

    for &(fl, fr) in &mesh.periodic_pairs {
        let (a, b) = mesh.face_points(fl);
        let (c, d) = mesh.face_points(fr);
        let yl = (a.y.min(b.y), a.y.max(b.y));
        let yr = (c.y.min(d.y), c.y.max(d.y));
        let xs_ok = a.x == 0.0 && b.x == 0.0 && close(c.x, PERIOD, PERIOD) && close(d.x, PERIOD, PERIOD);
        if yl != yr || !xs_ok {
            violations.push(Violation::PeriodicMismatch { left: fl, right: fr });
        }
    }

    if let Some(hh) = mesh.half_height {
        for (fi, f) in mesh.faces.iter().enumerate() {
            let (a, b) = mesh.face_points(fi);
            let on_bottom = close(a.y, -hh, hh) && close(b.y, -hh, hh);
            let on_top = close(a.y, hh, hh) && close(b.y, hh, hh);
            let bad = match f.tag {
                FaceTag::DirichletBottom => !on_bottom,
                FaceTag::TopDtn => !on_top,
                FaceTag::Interior => false,
                FaceTag::PeriodicPair => on_bottom || on_top,
                FaceTag::Robin => f.neighbor.is_some(),
            };
            if bad {
                violations.push(Violation::BoundaryTag { face: fi });
            }
        }
        let actual: f64 = (0..mesh.elements.len()).map(|e| mesh.area(e)).sum();
        let expected = 2.0 * PERIOD * hh;
        if ((actual - expected) / expected).abs() > 1e-12 {
            violations.push(Violation::AreaSum { expected, actual });
        }
    }

    ValidationReport { violations }
}

/// Reports regions of `mesh` with no entry in `eps`, or with an inadmissible one.
pub fn validate_materials(mesh: &Mesh, eps: &BTreeMap<usize, Complex64>) -> ValidationReport {
    let violations = mesh
        .regions()
        .into_iter()
        .filter(|r| eps.get(r).map_or(true, |&e| !admissible_eps(e)))
        .map(|region| Violation::MissingPermittivity { region })
        .collect();
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_triangle_mesh_counts() {
        let m = fixed_eight_triangle_mesh();
        assert_eq!(m.elements.len(), 8);
        assert_eq!(m.faces.len(), 16);
        assert!((m.h - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let area: f64 = (0..8).map(|e| m.area(e)).sum();
        assert!((area - 1.0).abs() < 1e-15);
        let interior = m.faces.iter().filter(|f| f.tag == FaceTag::Interior).count();
        assert_eq!(interior, 8);
        for f in &m.faces {
            assert!(f.owner < 8);
            assert_eq!(f.neighbor.is_some(), f.tag == FaceTag::Interior);
        }
        assert!(validate_mesh(&m).is_valid());
    }

    #[test]
    fn owner_normals_point_outward() {
        let m = fixed_eight_triangle_mesh();
        for f in 0..m.faces.len() {
            let (a, b) = m.face_points(f);
            let mid = (a + b) * 0.5;
            let n = m.owner_normal(f);
            let g = m.barycenter(m.faces[f].owner);
            assert!((mid - g).dot(n) > 0.0);
        }
    }

    #[test]
    fn element_faces_cover_every_edge() {
        let m = fixed_eight_triangle_mesh();
        for (e, fs) in m.element_faces.iter().enumerate() {
            for &f in fs {
                let face = &m.faces[f];
                assert!(face.owner == e || face.neighbor == Some(e));
            }
        }
    }

    #[test]
    fn straddling_polygon_is_reported() {
        let mut m = fixed_eight_triangle_mesh();
        let g = m.barycenter(3);
        let d = 0.01;
        m.interfaces.push(Polyline {
            points: vec![g + Vec2::new(-d, -d), g + Vec2::new(d, -d), g + Vec2::new(0.0, d)],
            closed: true,
        });
        let report = validate_mesh(&m);
        assert_eq!(report.violations, vec![Violation::StraddlesInterface { element: 3 }]);
    }

    #[test]
    fn missing_permittivity_is_reported() {
        let m = fixed_eight_triangle_mesh();
        let report = validate_materials(&m, &BTreeMap::new());
        assert_eq!(report.violations, vec![Violation::MissingPermittivity { region: 0 }]);
    }

    #[test]
    fn admissibility() {
        assert!(admissible_eps(Complex64::new(2.0, 0.0)));
        assert!(admissible_eps(Complex64::new(-1.0, 0.5)));
        assert!(!admissible_eps(Complex64::new(-1.0, 0.0)));
        assert!(!admissible_eps(Complex64::new(1.0, -0.1)));
    }
}
