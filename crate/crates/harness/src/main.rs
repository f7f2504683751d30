use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pwdg_core::mesh_io::write_mesh;
use pwdg_harness::config::{Method, RawConfig, RunConfig};
use pwdg_harness::run::{
    run_compare, run_field_dump, run_sweep, solve_point, write_compare_csv, write_sweep_csv, SweepKind, SweepRecord,
};
use pwdg_harness::scenario::build_problem;
use pwdg_harness::{HarnessError, Result};

/// Plane-wave DG solver for periodic gratings.
#[derive(Parser)]
#[command(name = "pwdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set p=9`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output CSV file, or field file prefix. Defaults to stdout for CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Single solve at the configured p, h and M.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the mesh to this file.
        #[arg(long)]
        mesh_dump: Option<PathBuf>,
        /// Write the system matrix as "row col re im" triplets to this file.
        #[arg(long)]
        matrix_dump: Option<PathBuf>,
    },
    /// Sweep over p_range.
    SweepP(Common),
    /// Sweep over h_list.
    SweepH(Common),
    /// Sweep over m_list.
    SweepM(Common),
    /// DtN and impedance errors side by side over p_range.
    Compare(Common),
    /// Field dump on a grid.
    Field {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 2, value_names = ["NX", "NY"], default_values_t = [200, 100])]
        grid: Vec<usize>,
        /// Quasi-periodic copies of the period on each side.
        #[arg(long, default_value_t = 0)]
        extend: usize,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut raw = match &common.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    for line in &common.overrides {
        raw.set_line(line)?;
    }
    raw.build()
}

fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

fn any_failed(records: &[SweepRecord]) -> Option<String> {
    records.iter().find_map(|r| r.note.clone())
}

fn sweep(common: &Common, kind: SweepKind) -> Result<Option<String>> {
    let cfg = load(common)?;
    let records = run_sweep(&cfg, kind)?;
    with_output(common.out.as_deref(), |w| write_sweep_csv(w, &records))?;
    Ok(any_failed(&records))
}

fn execute(cmd: Command) -> Result<Option<String>> {
    match cmd {
        Command::Solve { common, mesh_dump, matrix_dump } => {
            let cfg = load(&common)?;
            let problem = build_problem(&cfg, cfg.h)?;
            if let Some(path) = mesh_dump {
                write_mesh(&problem.mesh, BufWriter::new(File::create(path)?))?;
            }
            let mut cfg_one = cfg.clone();
            cfg_one.p_range = vec![cfg.p];
            let records = run_sweep(&cfg_one, SweepKind::P)?;
            if let Some(path) = matrix_dump {
                let pt = solve_point(&cfg, &problem, cfg.p, cfg.m)?;
                pt.system.write_matrix(BufWriter::new(File::create(path)?))?;
            }
            with_output(common.out.as_deref(), |w| write_sweep_csv(w, &records))?;
            Ok(any_failed(&records))
        }
        Command::SweepP(common) => sweep(&common, SweepKind::P),
        Command::SweepH(common) => sweep(&common, SweepKind::H),
        Command::SweepM(common) => sweep(&common, SweepKind::M),
        Command::Compare(common) => {
            let cfg = load(&common)?;
            let dtn = RunConfig { method: Method::Dtn, ..cfg.clone() };
            let imp = RunConfig { method: Method::Impedance, ..cfg };
            dtn.validate()?;
            imp.validate()?;
            let records = run_compare(&dtn, &imp)?;
            with_output(common.out.as_deref(), |w| write_compare_csv(w, Method::Dtn, Method::Impedance, &records))?;
            let failed = records.iter().find_map(|r| r.first.note.clone().or_else(|| r.second.note.clone()));
            Ok(failed)
        }
        Command::Field { common, grid, extend } => {
            let cfg = load(&common)?;
            let prefix = common
                .out
                .clone()
                .ok_or_else(|| HarnessError::Config("field needs --out PREFIX".into()))?;
            for path in run_field_dump(&cfg, (grid[0], grid[1]), extend, &prefix)? {
                println!("{}", path.display());
            }
            Ok(None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(note)) => {
            eprintln!("error: at least one point failed: {note}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
