//! Sweeps, comparisons and field dumps.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pwdg_core::assembly::{
    assemble_dtn, assemble_impedance, AssemblyOptions, BoundaryData, DataQuadrature, Incident, LinearSystem,
};
use pwdg_core::basis::PlaneWaveSpace;
use pwdg_core::dtn::DtnSpec;
use pwdg_core::geometry::{Vec2, PERIOD};
use pwdg_core::solve::{
    error_norms, extend_quasiperiodic, sample_grid, solve, write_field, DiscreteSolution, FieldComponent, FieldSample,
    SolveOptions, SolveOutcome,
};

use crate::config::{Method, RunConfig};
use crate::error::{HarnessError, Result};
use crate::scenario::{alpha0, build_problem, Problem};

pub const SWEEP_HEADER: [&str; 7] = ["sweep", "N", "l2_rel", "h1_rel", "residual", "cond", "seconds"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    P,
    H,
    M,
}

/// One row of a sweep CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub sweep: f64,
    pub n: usize,
    pub l2_rel: f64,
    pub h1_rel: f64,
    /// Relative H¹ seminorm error; not written to the CSV.
    pub h1_semi_rel: f64,
    pub residual: f64,
    pub cond: f64,
    pub seconds: f64,
    /// Error message for a failed point.
    pub note: Option<String>,
}

impl SweepRecord {
    fn failed(sweep: f64, n: usize, note: String) -> Self {
        let nan = f64::NAN;
        SweepRecord { sweep, n, l2_rel: nan, h1_rel: nan, h1_semi_rel: nan, residual: nan, cond: nan, seconds: 0.0, note: Some(note) }
    }

    fn fields(&self) -> [String; 7] {
        [
            self.sweep.to_string(),
            self.n.to_string(),
            fmt(self.l2_rel),
            fmt(self.h1_rel),
            fmt(self.residual),
            fmt(self.cond),
            fmt(self.seconds),
        ]
    }
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Everything produced by a single solve.
pub struct PointSolution {
    pub space: PlaneWaveSpace,
    pub system: LinearSystem,
    pub outcome: SolveOutcome,
    /// α₀ for DtN runs.
    pub alpha0: Option<f64>,
}

/// Assembles and solves `problem` with `p` directions and truncation `m`.
pub fn solve_point(cfg: &RunConfig, problem: &Problem, p: usize, m: usize) -> Result<PointSolution> {
    let space = PlaneWaveSpace::new(&problem.mesh, cfg.k, p, &problem.eps)?;
    let (system, alpha0) = match cfg.method {
        Method::Impedance => {
            let oracle = problem
                .oracle
                .as_deref()
                .ok_or_else(|| HarnessError::Config("impedance runs need a scenario with an exact solution".into()))?;
            let opts = AssemblyOptions {
                gl_points: cfg.gl_points,
                data_quadrature: if cfg.edge_data_rule { DataQuadrature::Edge } else { DataQuadrature::Auto },
            };
            (assemble_impedance(&problem.mesh, &space, &cfg.flux, &BoundaryData::Exact(oracle), &opts)?, None)
        }
        Method::Dtn => {
            let eps_plus = problem.eps_plus()?;
            let spec = DtnSpec::from_incidence(m, cfg.k, cfg.theta, eps_plus, problem.half_height()?)?;
            if !spec.resolves_propagating_modes() {
                eprintln!("warning: M={m} does not contain every propagating mode");
            }
            let incident = Incident { k: cfg.k, theta: cfg.theta };
            let sys = assemble_dtn(&problem.mesh, &space, &cfg.flux, &incident, &spec)?;
            (sys, Some(alpha0(cfg, eps_plus)))
        }
    };
    let outcome = solve(&system, &SolveOptions::default())?;
    if let Some(w) = &outcome.warning {
        eprintln!("warning: p={p}: {w}");
    }
    Ok(PointSolution { space, system, outcome, alpha0 })
}

fn measure(cfg: &RunConfig, problem: &Problem, p: usize, m: usize, sweep: f64) -> Result<SweepRecord> {
    let start = Instant::now();
    let pt = solve_point(cfg, problem, p, m)?;
    let (l2_rel, h1_rel, h1_semi_rel) = match problem.oracle.as_deref() {
        Some(oracle) => {
            let sol = DiscreteSolution::new(&problem.mesh, &pt.space, &pt.outcome.coefficients)?;
            let r = error_norms(&sol, |x| oracle.eval(x), cfg.duffy_order)?;
            (r.l2_rel, r.h1_rel, r.h1_semi_rel)
        }
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    let seconds = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    Ok(SweepRecord {
        sweep,
        n: pt.system.n,
        l2_rel,
        h1_rel,
        h1_semi_rel,
        residual: pt.outcome.residual,
        cond: pt.outcome.condition,
        seconds,
        note: None,
    })
}

fn record_or_note(sweep: f64, n: usize, r: Result<SweepRecord>) -> SweepRecord {
    r.unwrap_or_else(|e| {
        eprintln!("sweep point {sweep} failed: {e}");
        SweepRecord::failed(sweep, n, e.to_string())
    })
}

/// Runs a p-, h- or M-sweep. Failed points become rows of NaN with the error in `note`.
///
/// Configuration and meshing errors shared by every point are returned as `Err`.
pub fn run_sweep(cfg: &RunConfig, kind: SweepKind) -> Result<Vec<SweepRecord>> {
    match kind {
        SweepKind::P => {
            let problem = build_problem(cfg, cfg.h)?;
            let t = problem.mesh.elements.len();
            Ok(cfg.p_range.iter().map(|&p| record_or_note(p as f64, p * t, measure(cfg, &problem, p, cfg.m, p as f64))).collect())
        }
        SweepKind::M => {
            let problem = build_problem(cfg, cfg.h)?;
            let n = cfg.p * problem.mesh.elements.len();
            Ok(cfg.m_list.iter().map(|&m| record_or_note(m as f64, n, measure(cfg, &problem, cfg.p, m, m as f64))).collect())
        }
        SweepKind::H => Ok(cfg
            .h_list
            .iter()
            .map(|&h| {
                let r = build_problem(cfg, h).and_then(|pb| measure(cfg, &pb, cfg.p, cfg.m, h));
                record_or_note(h, 0, r)
            })
            .collect()),
    }
}

pub fn write_sweep_csv<W: Write>(w: W, records: &[SweepRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in records {
        out.write_record(r.fields())?;
    }
    out.flush()?;
    Ok(())
}

/// One row of a comparison CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRecord {
    pub p: usize,
    pub n: usize,
    pub first: SweepRecord,
    pub second: SweepRecord,
}

/// Runs the p-range of `first` with both configurations on a shared geometry.
pub fn run_compare(first: &RunConfig, second: &RunConfig) -> Result<Vec<CompareRecord>> {
    let same = first.scenario == second.scenario
        && first.k == second.k
        && first.theta == second.theta
        && first.half_height == second.half_height
        && first.h == second.h
        && first.p_range == second.p_range;
    if !same {
        return Err(HarnessError::Config("compared runs must share scenario, k, theta, H, h and p_range".into()));
    }
    if !first.scenario.has_oracle() {
        return Err(HarnessError::Config("comparisons need a scenario with an exact solution".into()));
    }
    let pa = build_problem(first, first.h)?;
    let pb = build_problem(second, second.h)?;
    if pa.mesh.vertices != pb.mesh.vertices || pa.mesh.elements != pb.mesh.elements {
        return Err(HarnessError::Config("compared runs produce different meshes".into()));
    }
    let t = pa.mesh.elements.len();
    Ok(first
        .p_range
        .iter()
        .map(|&p| CompareRecord {
            p,
            n: p * t,
            first: record_or_note(p as f64, p * t, measure(first, &pa, p, first.m, p as f64)),
            second: record_or_note(p as f64, p * t, measure(second, &pb, p, second.m, p as f64)),
        })
        .collect())
}

pub fn write_compare_csv<W: Write>(w: W, first: Method, second: Method, records: &[CompareRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let (a, b) = (first.as_str(), second.as_str());
    out.write_record(["p".to_owned(), "N".to_owned(), format!("{a}_l2_rel"), format!("{a}_h1_rel"), format!("{b}_l2_rel"), format!("{b}_h1_rel")])?;
    for r in records {
        out.write_record([
            r.p.to_string(),
            r.n.to_string(),
            fmt(r.first.l2_rel),
            fmt(r.first.h1_rel),
            fmt(r.second.l2_rel),
            fmt(r.second.h1_rel),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Samples the solution at `p` on an nx × ny grid. `extend` adds that many
/// quasi-periodic copies of the period on each side (DtN runs only).
pub fn sample_solution(cfg: &RunConfig, problem: &Problem, p: usize, grid: (usize, usize), extend: usize) -> Result<Vec<FieldSample>> {
    let pt = solve_point(cfg, problem, p, cfg.m)?;
    let sol = DiscreteSolution::new(&problem.mesh, &pt.space, &pt.outcome.coefficients)?;
    let (xr, yr) = problem.bounds();
    match pt.alpha0 {
        Some(a0) => {
            let k = extend as i64;
            let sampler = extend_quasiperiodic(sol, a0, -k..=k);
            let xr = (-(extend as f64) * PERIOD, (extend as f64 + 1.0) * PERIOD);
            Ok(sample_grid(|x| sampler.eval(x), xr, yr, grid.0, grid.1)?)
        }
        None if extend > 0 => Err(HarnessError::Config("--extend needs a periodic (dtn) run".into())),
        None => Ok(sample_grid(|x: Vec2| sol.evaluate(x).map(|v| v.0), xr, yr, grid.0, grid.1)?),
    }
}

fn write_components(prefix: &Path, samples: &[FieldSample]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for comp in [FieldComponent::Complex, FieldComponent::Re, FieldComponent::Im, FieldComponent::Abs] {
        let mut name = prefix.as_os_str().to_owned();
        name.push(format!("_{}.txt", comp.suffix()));
        let path = PathBuf::from(name);
        let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        write_field(file, samples, comp)?;
        written.push(path);
    }
    Ok(written)
}

fn suffixed(prefix: &Path, tag: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(tag);
    PathBuf::from(name)
}

/// Writes `<prefix>_{complex,re,im,abs}.txt` for p = `cfg.p`. With `diff_p` set it also
/// writes the field at that p under `<prefix>_p<q>_…` and the difference under `<prefix>_diff_…`.
pub fn run_field_dump(cfg: &RunConfig, grid: (usize, usize), extend: usize, prefix: &Path) -> Result<Vec<PathBuf>> {
    let problem = build_problem(cfg, cfg.h)?;
    let base = sample_solution(cfg, &problem, cfg.p, grid, extend)?;
    let mut written = write_components(prefix, &base)?;
    if let Some(q) = cfg.diff_p {
        let other = sample_solution(cfg, &problem, q, grid, extend)?;
        written.extend(write_components(&suffixed(prefix, &format!("_p{q}")), &other)?);
        let diff: Vec<FieldSample> = base
            .iter()
            .zip(&other)
            .map(|(a, b)| FieldSample { x: a.x, value: a.value - b.value })
            .collect();
        written.extend(write_components(&suffixed(prefix, "_diff"), &diff)?);
    }
    Ok(written)
}

/// Largest |value| of a sample set.
pub fn max_abs(samples: &[FieldSample]) -> f64 {
    samples.iter().map(|s| s.value.norm()).fold(0.0, f64::max)
}
