use std::f64::consts::PI;

use num_complex::Complex64;
use pwdg_core::assembly::{assemble_dtn, assemble_impedance, AssemblyOptions, BoundaryData, Incident};
use pwdg_core::basis::{FluxParams, PlaneWaveSpace};
use pwdg_core::dtn::DtnSpec;
use pwdg_core::geometry::{fixed_eight_triangle_mesh, InterfaceSpec};
use pwdg_core::mesher::generate_periodic_mesh;
use pwdg_core::solve::{solve, tdg_norm, DiscreteSolution, NormVariant, SolveOptions};
use rand::{Rng, SeedableRng};

fn random_vector(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

#[test]
fn impedance_energy_identity() {
    let m = fixed_eight_triangle_mesh();
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    for p in [3, 7] {
        let s = PlaneWaveSpace::homogeneous(&m, 10.0, p).unwrap();
        for flux in [FluxParams::uwvf(), FluxParams::new(2.0, 0.1, 0.4).unwrap()] {
            let a = assemble_impedance(&m, &s, &flux, &BoundaryData::Zero, &AssemblyOptions::default()).unwrap();
            for _ in 0..20 {
                let w = random_vector(&mut rng, s.ndofs());
                let sol = DiscreteSolution::new(&m, &s, &w).unwrap();
                let t2 = tdg_norm(&sol, NormVariant::Tdg, &flux, None).unwrap().powi(2);
                assert!((a.form(&w).im + t2).abs() <= 1e-10 * t2);
            }
        }
    }
}

#[test]
fn dtn_coercivity_for_real_permittivity() {
    let spec = InterfaceSpec::flat(0.0, Complex64::new(1.0, 0.0), Complex64::new(1.5, 0.0));
    let m = generate_periodic_mesh(&spec, 3.0, 1.5).unwrap();
    let dtn = DtnSpec::from_incidence(100, 5.0, -PI / 4.0, Complex64::new(1.0, 0.0), 3.0).unwrap();
    let flux = FluxParams::uwvf();
    let s = PlaneWaveSpace::new(&m, 5.0, 5, &spec.region_eps).unwrap();
    let a = assemble_dtn(&m, &s, &flux, &Incident { k: 5.0, theta: -PI / 4.0 }, &dtn).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(99);
    for _ in 0..20 {
        let w = random_vector(&mut rng, s.ndofs());
        let sol = DiscreteSolution::new(&m, &s, &w).unwrap();
        let t2 = tdg_norm(&sol, NormVariant::TdgT, &flux, Some(&dtn)).unwrap().powi(2);
        assert!(-a.form(&w).im - t2 >= -1e-10 * t2);
    }
}

#[test]
fn zero_load_gives_zero_solution() {
    let m = fixed_eight_triangle_mesh();
    let s = PlaneWaveSpace::homogeneous(&m, 10.0, 5).unwrap();
    let flux = FluxParams::uwvf();
    let a = assemble_impedance(&m, &s, &flux, &BoundaryData::Zero, &AssemblyOptions::default()).unwrap();
    let out = solve(&a, &SolveOptions::default()).unwrap();
    assert!(out.coefficients.iter().all(|z| z.norm() == 0.0));
    let sol = DiscreteSolution::new(&m, &s, &out.coefficients).unwrap();
    assert_eq!(tdg_norm(&sol, NormVariant::Tdg, &flux, None).unwrap(), 0.0);
}

#[test]
fn tdg_t_requires_spec() {
    let m = fixed_eight_triangle_mesh();
    let s = PlaneWaveSpace::homogeneous(&m, 10.0, 3).unwrap();
    let w = vec![Complex64::new(1.0, 0.0); s.ndofs()];
    let sol = DiscreteSolution::new(&m, &s, &w).unwrap();
    assert!(tdg_norm(&sol, NormVariant::TdgT, &FluxParams::uwvf(), None).is_err());
}
