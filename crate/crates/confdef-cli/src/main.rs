use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use confdef::pipeline::{run, verify_dir, Command, RunConfig};

/// Conformal deformations of hypersurfaces with a principal curvature of
/// multiplicity n−2, checked by residuals on grid charts.
#[derive(Parser)]
#[command(name = "confdef", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Example surface, its Christoffel convergence table and candidate verdicts.
    Gallery(RunArgs),
    /// Membership verdicts for the configured candidates.
    CsCheck(RunArgs),
    /// Triples of all members, their conditions and pairwise distances.
    Triple(RunArgs),
    /// Member candidate through to the conformal deformation.
    Deform(RunArgs),
    /// Gallery, triples and deformation in one summary.
    Pipeline(RunArgs),
    /// Recompute residuals from the CSV grids of an output directory.
    Verify {
        /// Directory written by an earlier run with --emit-csv.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Halvings of h in the convergence table.
    #[arg(long)]
    refine: Option<usize>,
    /// Write the raw grids as CSV.
    #[arg(long)]
    emit_csv: bool,
    /// Multiply the upper residual bounds.
    #[arg(long)]
    tol_scale: Option<f64>,
}

impl RunArgs {
    fn config(&self) -> confdef::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(k) = self.refine {
            c.gallery.refine = k;
        }
        if self.emit_csv {
            c.emit_csv = true;
        }
        if let Some(x) = self.tol_scale {
            c.tolerances = c.tolerances.scaled(x);
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let t0 = Instant::now();
    let result = match cli.cmd {
        Cmd::Verify { dir } => verify_dir(&dir).map(|r| {
            print!("{}", r.table());
            r.passed
        }),
        Cmd::Gallery(a) => go(Command::Gallery, &a),
        Cmd::CsCheck(a) => go(Command::CsCheck, &a),
        Cmd::Triple(a) => go(Command::Triple, &a),
        Cmd::Deform(a) => go(Command::Deform, &a),
        Cmd::Pipeline(a) => go(Command::Pipeline, &a),
    };
    match result {
        Ok(true) => {
            eprintln!("all verdicts pass ({:.1} s)", t0.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Ok(false) => {
            eprintln!("verdict failure ({:.1} s)", t0.elapsed().as_secs_f64());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn go(cmd: Command, a: &RunArgs) -> confdef::Result<bool> {
    let cfg = a.config()?;
    let out = run(cmd, &cfg)?;
    print!("{}", out.table);
    println!("summary: {}", out.summary.display());
    Ok(out.passed)
}
