//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are reported as FAIL without failing the run;
//! README.md explains each of them. Any other FAIL makes the process exit non-zero.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use pwdg_core::assembly::{assemble_dtn, assemble_impedance, AssemblyOptions, BoundaryData, Incident};
use pwdg_core::basis::{FluxParams, PlaneWaveSpace};
use pwdg_core::dtn::{mode_beta, DtnSpec};
use pwdg_core::geometry::{fixed_eight_triangle_mesh, FaceTag, InterfaceSpec, Mesh, Vec2};
use pwdg_core::mesher::generate_periodic_mesh;
use pwdg_core::oracles::{bessel_j, circular_wave, two_layer_coefficients, two_layer_field, ExactSolution, PlaneWave};
use pwdg_core::quadrature_assembly::{
    assemble_dtn_quadrature, assemble_impedance_quadrature, relative_discrepancy, QuadratureOptions,
};
use pwdg_core::solve::{tdg_norm, DiscreteSolution, NormVariant};
use pwdg_harness::run::{run_compare, run_sweep, SweepKind, SweepRecord};
use pwdg_harness::RunConfig;
use rand::{Rng, SeedableRng};

const KNOWN_RED: &[&str] = &["two-layer-p-convergence", "h-convergence-order", "method-comparison"];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_vector(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn cfg(pairs: &[(&str, &str)]) -> RunConfig {
    RunConfig::from_pairs(pairs).expect("acceptance configuration")
}

fn errors(records: &[SweepRecord]) -> Vec<f64> {
    records.iter().map(|r| r.l2_rel).collect()
}

/// Least-squares slope of y against x.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn mixed_boundary(mesh: &Mesh) -> Mesh {
    let mut m = mesh.clone();
    for f in &mut m.faces {
        if matches!(f.tag, FaceTag::PeriodicPair | FaceTag::TopDtn) {
            f.tag = FaceTag::Robin;
            f.neighbor = None;
        }
    }
    m.periodic_pairs.clear();
    m
}

fn oracle_equivalence() -> Outcome {
    let quad = QuadratureOptions { points: 20, ..QuadratureOptions::default() };
    let mut worst: f64 = 0.0;
    let eight = fixed_eight_triangle_mesh();
    let pw = PlaneWave { kappa: c(10.0, 0.0), direction: Vec2::new(0.6, 0.8), amplitude: c(1.0, 0.5) };
    for (p, flux) in [(3, FluxParams::uwvf()), (7, FluxParams::new(0.7, 0.3, 0.2).unwrap())] {
        let s = PlaneWaveSpace::homogeneous(&eight, 10.0, p).unwrap();
        let a = assemble_impedance(&eight, &s, &flux, &BoundaryData::Exact(&pw), &AssemblyOptions::default()).unwrap();
        let r = assemble_impedance_quadrature(&eight, &s, &flux, &BoundaryData::Exact(&pw), &quad).unwrap();
        let (dm, dr) = relative_discrepancy(&a, &r);
        worst = worst.max(dm).max(dr);
    }
    let eps2 = c(1.27, 0.05).powi(2);
    let spec = InterfaceSpec::flat(0.0, c(1.0, 0.0), eps2);
    let strip = generate_periodic_mesh(&spec, 3.0, 3.0).unwrap();
    let mixed = mixed_boundary(&strip);
    let coeffs = two_layer_coefficients(5.0, -PI / 3.0, eps2, 3.0).unwrap();
    let s = PlaneWaveSpace::new(&mixed, 5.0, 4, &spec.region_eps).unwrap();
    let flux = FluxParams::uwvf();
    let a = assemble_impedance(&mixed, &s, &flux, &BoundaryData::Exact(&coeffs), &AssemblyOptions::default()).unwrap();
    let r = assemble_impedance_quadrature(&mixed, &s, &flux, &BoundaryData::Exact(&coeffs), &quad).unwrap();
    let (dm, dr) = relative_discrepancy(&a, &r);
    worst = worst.max(dm).max(dr);
    for (theta, p) in [(-PI / 3.0, 3), (-PI / 4.0, 5)] {
        let dtn = DtnSpec::from_incidence(20, 5.0, theta, c(1.0, 0.0), 3.0).unwrap();
        let s = PlaneWaveSpace::new(&strip, 5.0, p, &spec.region_eps).unwrap();
        let inc = Incident { k: 5.0, theta };
        let a = assemble_dtn(&strip, &s, &flux, &inc, &dtn).unwrap();
        let r = assemble_dtn_quadrature(&strip, &s, &flux, &inc, &dtn, &quad).unwrap();
        let (dm, dr) = relative_discrepancy(&a, &r);
        worst = worst.max(dm).max(dr);
    }
    outcome(worst <= 1e-9, format!("max relative discrepancy {worst:.2e} (8 and 16 elements)"))
}

fn energy_identity() -> Outcome {
    let m = fixed_eight_triangle_mesh();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let flux = FluxParams::uwvf();
    let mut worst: f64 = 0.0;
    for p in [3, 7] {
        let s = PlaneWaveSpace::homogeneous(&m, 10.0, p).unwrap();
        let a = assemble_impedance(&m, &s, &flux, &BoundaryData::Zero, &AssemblyOptions::default()).unwrap();
        for _ in 0..20 {
            let w = random_vector(&mut rng, s.ndofs());
            let sol = DiscreteSolution::new(&m, &s, &w).unwrap();
            let t2 = tdg_norm(&sol, NormVariant::Tdg, &flux, None).unwrap().powi(2);
            worst = worst.max((a.form(&w).im + t2).abs() / t2);
        }
    }
    outcome(worst <= 1e-10, format!("max |Im A(w,w) + |||w|||²| / |||w|||² = {worst:.2e}"))
}

fn dtn_coercivity() -> Outcome {
    let spec = InterfaceSpec::flat(0.0, c(1.0, 0.0), c(1.5, 0.0));
    let m = generate_periodic_mesh(&spec, 3.0, 1.5).unwrap();
    let dtn = DtnSpec::from_incidence(100, 5.0, -PI / 3.0, c(1.0, 0.0), 3.0).unwrap();
    let flux = FluxParams::uwvf();
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let mut worst = f64::INFINITY;
    for p in [3, 7] {
        let s = PlaneWaveSpace::new(&m, 5.0, p, &spec.region_eps).unwrap();
        let a = assemble_dtn(&m, &s, &flux, &Incident { k: 5.0, theta: -PI / 3.0 }, &dtn).unwrap();
        for _ in 0..10 {
            let w = random_vector(&mut rng, s.ndofs());
            let sol = DiscreteSolution::new(&m, &s, &w).unwrap();
            let t2 = tdg_norm(&sol, NormVariant::TdgT, &flux, Some(&dtn)).unwrap().powi(2);
            worst = worst.min((-a.form(&w).im - t2) / t2);
        }
    }
    outcome(worst >= -1e-10, format!("min relative slack {worst:.3e} (ε₂ = 1.5, h = 1.5, M = 100)"))
}

fn dtn_sign_lemma() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let k = rng.gen_range(0.5..8.0);
        let theta = rng.gen_range(-3.0..-0.1);
        let eps_plus = c(rng.gen_range(1.0..3.0), 0.0);
        let Ok(spec) = DtnSpec::from_incidence(30, k, theta, eps_plus, 3.0) else { continue };
        let mut sum = 0.0;
        let mut scale = 0.0;
        for n in spec.modes() {
            let w = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b = mode_beta(n, &spec).unwrap();
            sum += 2.0 * PI * w.norm_sqr() * b.im;
            scale += 2.0 * PI * w.norm_sqr() * b.norm();
        }
        worst = worst.min(sum / scale);
    }
    outcome(worst >= -1e-14, format!("min Im Σ 2π|w_n|²β_n (relative) = {worst:.3e}"))
}

fn plane_wave_exactness() -> Outcome {
    let records = run_sweep(&cfg(&[("scenario", "planewave"), ("k", "10"), ("p_range", "7..16")]), SweepKind::P).unwrap();
    let e = |p: usize| records[p - 7].l2_rel;
    let pass = e(8) < 1e-8 && e(16) < 1e-8 && e(7) > 1e-4 && e(9) > 1e-4;
    outcome(pass, format!("p=7 {:.2e}, p=8 {:.2e}, p=9 {:.2e}, p=16 {:.2e}", e(7), e(8), e(9), e(16)))
}

fn circular_convergence() -> Outcome {
    let run = |xi: &str, range: &str| errors(&run_sweep(&cfg(&[("scenario", "circular"), ("xi", xi), ("p_range", range)]), SweepKind::P).unwrap());
    let e1 = run("1", "3..19");
    let stalls = e1.windows(2).filter(|w| w[1] >= w[0]).count();
    let orders1 = (e1[0] / e1[e1.len() - 1]).log10();
    let mut pass = stalls <= 1 && orders1 >= 4.0;
    let mut detail = format!("ξ=1: {orders1:.2} orders over p=3..19, {stalls} stalls");
    for xi in ["2/3", "3/2"] {
        let e = run(xi, "3..27");
        let orders = (e[0] / e[e.len() - 1]).log10();
        pass &= orders >= 2.0;
        detail.push_str(&format!("; ξ={xi}: {orders:.2} orders over p=3..27"));
    }
    outcome(pass, detail)
}

fn two_layer_p_convergence() -> Outcome {
    let records = run_sweep(&cfg(&[("scenario", "two_layer"), ("p_range", "3..27")]), SweepKind::P).unwrap();
    let ps: Vec<f64> = records.iter().map(|r| r.sweep).collect();
    let logs: Vec<f64> = records.iter().map(|r| r.l2_rel.ln()).collect();
    let s = slope(&ps, &logs);
    let e15 = records[12].l2_rel;
    outcome(
        s < 0.0 && e15 < 1e-3,
        format!("slope of ln(error) vs p = {s:.3}, error at p=15 = {e15:.3e}, at p=27 = {:.3e}", records[24].l2_rel),
    )
}

fn h_convergence() -> Outcome {
    let records = run_sweep(&cfg(&[("scenario", "two_layer"), ("p", "3"), ("h_list", "1.5,0.75,0.375")]), SweepKind::H).unwrap();
    let hs: Vec<f64> = records.iter().map(|r| r.sweep.ln()).collect();
    let es: Vec<f64> = records.iter().map(|r| r.l2_rel.ln()).collect();
    let order = slope(&hs, &es);
    let list: Vec<String> = records.iter().map(|r| format!("{:.3e}", r.l2_rel)).collect();
    outcome(order >= 1.7, format!("order {order:.2}, errors [{}]", list.join(", ")))
}

fn m_flattening() -> Outcome {
    let records = run_sweep(&cfg(&[("scenario", "two_layer"), ("p", "15"), ("m_list", "5,10,25,50,100")]), SweepKind::M).unwrap();
    let (e50, e100) = (records[3].l2_rel, records[4].l2_rel);
    let rel = (e100 - e50).abs() / e50;
    outcome(rel <= 0.05, format!("|e(100) − e(50)| / e(50) = {rel:.2e} (e(50) = {e50:.3e})"))
}

fn method_comparison() -> Outcome {
    let base = [("scenario", "two_layer"), ("eps2", "(1.8+0.15i)^2"), ("theta", "-pi/4"), ("p_range", "3..21")];
    let dtn = cfg(&[&base[..], &[("method", "dtn")]].concat());
    let imp = cfg(&[&base[..], &[("method", "impedance")]].concat());
    let rows = run_compare(&dtn, &imp).unwrap();
    let wins = rows.iter().filter(|r| r.first.l2_rel <= r.second.l2_rel).count();
    let ratios: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.first.l2_rel / r.second.l2_rel)).collect();
    outcome(
        wins == rows.len(),
        format!("DtN ≤ impedance at {wins}/{} values of p; error ratios DtN/impedance [{}]", rows.len(), ratios.join(", ")),
    )
}

fn fd_gradient_error(f: &dyn Fn(Vec2) -> (Complex64, [Complex64; 2]), x: Vec2) -> f64 {
    let h = 1e-6;
    let (_, g) = f(x);
    let dx = (f(Vec2::new(x.x + h, x.y)).0 - f(Vec2::new(x.x - h, x.y)).0) / (2.0 * h);
    let dy = (f(Vec2::new(x.x, x.y + h)).0 - f(Vec2::new(x.x, x.y - h)).0) / (2.0 * h);
    let scale = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt().max(1.0);
    ((dx - g[0]).norm_sqr() + (dy - g[1]).norm_sqr()).sqrt() / scale
}

fn oracle_self_consistency() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let mut residual: f64 = 0.0;
    let mut grad: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.gen_range(0.5..10.0);
        let theta = rng.gen_range(-3.0..-0.1);
        let eps2 = c(rng.gen_range(1.0..4.0), rng.gen_range(0.0..0.5));
        let coeffs = two_layer_coefficients(k, theta, eps2, 3.0).unwrap();
        residual = residual.max(coeffs.residuals().into_iter().fold(0.0, f64::max));
        let x = Vec2::new(rng.gen_range(0.0..6.28), rng.gen_range(-2.9..2.9));
        if x.y.abs() > 1e-3 {
            grad = grad.max(fd_gradient_error(&|y| two_layer_field(y, &coeffs), x));
        }
    }
    let mut bessel: f64 = 0.0;
    for x in [0.5, 1.0, 2.0, 5.0, 12.5, 40.0] {
        let (j, _) = bessel_j(0.5, x).unwrap();
        bessel = bessel.max((j - (2.0 / (PI * x)).sqrt() * x.sin()).abs());
        let (j, _) = bessel_j(1.5, x).unwrap();
        bessel = bessel.max((j - (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos())).abs());
    }
    for xi in [2.0 / 3.0, 1.0, 1.5] {
        for _ in 0..20 {
            let x = Vec2::new(rng.gen_range(0.1..1.0), rng.gen_range(-0.5..0.5));
            grad = grad.max(fd_gradient_error(&|y| circular_wave(y, xi, 10.0).unwrap(), x));
        }
    }
    let pw = PlaneWave { kappa: c(3.0, 0.2), direction: Vec2::new(0.6, -0.8), amplitude: c(1.0, 0.0) };
    grad = grad.max(fd_gradient_error(&|y| pw.eval(y).unwrap(), Vec2::new(0.3, 0.7)));
    let pass = residual < 1e-12 && bessel < 1e-10 && grad < 1e-6;
    outcome(pass, format!("system residual {residual:.1e}, Bessel {bessel:.1e}, gradient vs FD {grad:.1e}"))
}

type Criterion = (&'static str, f64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("oracle-equivalence", 10.0, oracle_equivalence),
        ("energy-identity", 5.0, energy_identity),
        ("dtn-coercivity", 10.0, dtn_coercivity),
        ("dtn-sign-lemma", 1.0, dtn_sign_lemma),
        ("plane-wave-exactness", 10.0, plane_wave_exactness),
        ("circular-p-convergence", 60.0, circular_convergence),
        ("two-layer-p-convergence", 120.0, two_layer_p_convergence),
        ("h-convergence-order", 120.0, h_convergence),
        ("m-flattening", 120.0, m_flattening),
        ("method-comparison", 180.0, method_comparison),
        ("oracle-self-consistency", 5.0, oracle_self_consistency),
    ];
    let mut unexpected = Vec::new();
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs < budget;
        let known = KNOWN_RED.contains(&name);
        let tag = match (pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} {name}: {} [{secs:.1} s, budget {budget} s]", out.detail);
        if !pass && !known {
            unexpected.push(name);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
