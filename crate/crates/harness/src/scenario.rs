//! Geometry, materials and reference solutions for each scenario.

use std::collections::BTreeMap;
use std::io::BufReader;

use num_complex::Complex64;
use pwdg_core::basis::kappa_from_eps;
use pwdg_core::geometry::{fixed_eight_triangle_mesh, validate_materials, validate_mesh, InterfaceSpec, Mesh, Vec2, PERIOD};
use pwdg_core::mesh_io::read_mesh;
use pwdg_core::mesher::generate_periodic_mesh;
use pwdg_core::oracles::{two_layer_coefficients, CircularWave, ExactSolution, PlaneWave};

use crate::config::{Geometry, Method, RunConfig, Scenario};
use crate::error::{HarnessError, Result};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn default_half_height(geometry: Geometry) -> f64 {
    match geometry {
        Geometry::Step => 2.0,
        Geometry::Bao => 3.0,
    }
}

/// Region permittivities of the built-in geometries, numbered bottom to top.
pub fn default_eps(geometry: Geometry) -> BTreeMap<usize, Complex64> {
    let values: Vec<Complex64> = match geometry {
        Geometry::Step => vec![c(1.27, 0.25).powi(2), c(1.0, 0.0)],
        Geometry::Bao => vec![
            c(1.453 * 1.453, 0.0),
            c(2.02 * 2.02, 0.0),
            c(2.13 * 2.13, 0.0),
            c(1.49 * 1.49, 0.0),
            c(1.0, 0.0),
        ],
    };
    values.into_iter().enumerate().collect()
}

/// Rectangular tooth of height `top − base` over the middle half of the period.
fn tooth(base: f64, top: f64) -> Vec<Vec2> {
    let (a, b) = (0.25 * PERIOD, 0.75 * PERIOD);
    vec![
        Vec2::new(0.0, base),
        Vec2::new(a, base),
        Vec2::new(a, top),
        Vec2::new(b, top),
        Vec2::new(b, base),
        Vec2::new(PERIOD, base),
    ]
}

fn flat(y: f64) -> Vec<Vec2> {
    vec![Vec2::new(0.0, y), Vec2::new(PERIOD, y)]
}

/// Interfaces of the built-in geometries.
///
/// `step`: one tooth-shaped interface between an absorbing substrate and vacuum.
/// `bao`: substrate, two guiding layers, a corrugated layer and vacuum.
pub fn builtin_interfaces(geometry: Geometry) -> Vec<Vec<Vec2>> {
    match geometry {
        Geometry::Step => vec![tooth(-0.5, 0.5)],
        Geometry::Bao => vec![flat(-1.5), flat(-0.75), flat(0.0), tooth(0.5, 1.0)],
    }
}

/// A meshed problem with its materials and, when available, its exact solution.
pub struct Problem {
    pub mesh: Mesh,
    pub eps: BTreeMap<usize, Complex64>,
    pub oracle: Option<Box<dyn ExactSolution>>,
}

impl Problem {
    /// Permittivity of the elements touching the top boundary.
    pub fn eps_plus(&self) -> Result<Complex64> {
        let mut values = self.mesh.top_faces().into_iter().map(|f| {
            let region = self.mesh.elements[self.mesh.faces[f].owner].region;
            self.eps.get(&region).copied().ok_or(pwdg_core::Error::MissingPermittivity(region))
        });
        let first = values
            .next()
            .ok_or_else(|| HarnessError::Config("mesh has no top boundary faces".into()))??;
        for v in values {
            if v? != first {
                return Err(HarnessError::Config("the top boundary touches more than one material".into()));
            }
        }
        Ok(first)
    }

    pub fn half_height(&self) -> Result<f64> {
        self.mesh
            .half_height
            .ok_or_else(|| HarnessError::Config("mesh does not cover a periodic strip".into()))
    }

    /// Bounding box of the mesh vertices.
    pub fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut b = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for v in &self.mesh.vertices {
            b.0 .0 = b.0 .0.min(v.x);
            b.0 .1 = b.0 .1.max(v.x);
            b.1 .0 = b.1 .0.min(v.y);
            b.1 .1 = b.1 .1.max(v.y);
        }
        b
    }
}

/// Builds the mesh and reference solution of `cfg` at mesh size `h`.
pub fn build_problem(cfg: &RunConfig, h: f64) -> Result<Problem> {
    let problem = match &cfg.scenario {
        Scenario::Circular { xi } => Problem {
            mesh: fixed_eight_triangle_mesh(),
            eps: BTreeMap::from([(0, c(1.0, 0.0))]),
            oracle: Some(Box::new(CircularWave { xi: *xi, k: cfg.k })),
        },
        Scenario::PlaneWave { angle } => Problem {
            mesh: fixed_eight_triangle_mesh(),
            eps: BTreeMap::from([(0, c(1.0, 0.0))]),
            oracle: Some(Box::new(PlaneWave {
                kappa: c(cfg.k, 0.0),
                direction: Vec2::new(angle.cos(), angle.sin()),
                amplitude: c(1.0, 0.0),
            })),
        },
        Scenario::TwoLayer { eps2 } => {
            let spec = InterfaceSpec::flat(0.0, c(1.0, 0.0), *eps2);
            let mesh = generate_periodic_mesh(&spec, cfg.half_height, h)?;
            let mesh = if cfg.method == Method::Impedance { mesh.with_all_robin() } else { mesh };
            let coeffs = two_layer_coefficients(cfg.k, cfg.theta, *eps2, cfg.half_height)?;
            Problem { mesh, eps: spec.region_eps, oracle: Some(Box::new(coeffs)) }
        }
        Scenario::Custom { mesh: Some(path), eps, .. } => {
            let file = std::fs::File::open(path)
                .map_err(|e| HarnessError::Config(format!("cannot open mesh {}: {e}", path.display())))?;
            let mesh = read_mesh(BufReader::new(file)).map_err(|e| HarnessError::Config(e.to_string()))?;
            Problem { mesh, eps: eps.clone(), oracle: None }
        }
        Scenario::Custom { mesh: None, geometry, eps } => {
            let spec = InterfaceSpec { polylines: builtin_interfaces(*geometry), polygons: Vec::new(), region_eps: eps.clone() };
            let mesh = generate_periodic_mesh(&spec, cfg.half_height, h)?;
            Problem { mesh, eps: eps.clone(), oracle: None }
        }
    };
    let report = validate_mesh(&problem.mesh);
    if !report.is_valid() {
        return Err(HarnessError::Config(format!("invalid mesh: {:?}", report.violations)));
    }
    let report = validate_materials(&problem.mesh, &problem.eps);
    if !report.is_valid() {
        return Err(HarnessError::Config(format!("invalid materials: {:?}", report.violations)));
    }
    Ok(problem)
}

/// Quasi-momentum α₀ of the incident wave in the top medium.
pub fn alpha0(cfg: &RunConfig, eps_plus: Complex64) -> f64 {
    kappa_from_eps(cfg.k, eps_plus).re * cfg.theta.cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn builtin_geometries_mesh_cleanly() {
        for (g, regions) in [("step", 2), ("bao", 5)] {
            let cfg = RunConfig::from_pairs(&[("scenario", "custom"), ("geometry", g)]).unwrap();
            let pb = build_problem(&cfg, 0.5).unwrap();
            assert_eq!(pb.mesh.regions().len(), regions, "{g}");
            assert_eq!(pb.eps_plus().unwrap(), c(1.0, 0.0));
        }
    }

    #[test]
    fn impedance_two_layer_has_no_periodic_faces() {
        let cfg = RunConfig::from_pairs(&[("method", "impedance")]).unwrap();
        let pb = build_problem(&cfg, 1.5).unwrap();
        assert!(pb.mesh.periodic_pairs.is_empty());
        assert_eq!(pb.mesh.elements.len(), 56);
    }
}
