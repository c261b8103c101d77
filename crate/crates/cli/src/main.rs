//! Batch front end for the relaxation toolkit.
//!
//! Every command reads files, runs solves, prints a report, and exits;
//! exit codes are a stable contract: 0 means success (member, loop found,
//! tables match), 1 means a negative verdict (rejected, no loop, mismatch),
//! 2 means the run itself failed (bad input, solver breakdown).

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod inputs;
mod output;

use output::Format;

#[derive(Parser)]
#[command(
    name = "qmoment",
    version,
    about = "Moment-relaxation tests for quantum correlations",
    long_about = "Decides whether behaviors admit quantum models via a \
                  hierarchy of semidefinite relaxations, bounds Bell \
                  functionals, extracts explicit models from solved \
                  relaxations, and exports solver files.\n\nThe backend is \
                  chosen by the QMOMENT_SDP_BACKEND environment variable \
                  (default: the built-in interior-point solver)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output style: aligned table, one key=value record per line, or a
    /// JSON document
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Upper bound on concurrent solves in sweeps
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether a behavior admits a certificate, escalating level by
    /// level up to the requested one
    Membership {
        /// Behavior file (JSON: scenario plus joint probability table)
        behavior: std::path::PathBuf,
        /// Deepest relaxation level to test, e.g. "1", "1+AB", "2"
        #[arg(long, default_value = "1")]
        level: String,
        /// Solver feasibility and gap tolerance override
        #[arg(long)]
        tol_feas: Option<f64>,
        /// Slack below zero still counted as member
        #[arg(long)]
        margin: Option<f64>,
        /// Where to write the rejection certificate (default: stdout)
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Maximize a Bell functional over the relaxation at each level
    Bell {
        /// Catalog name (chsh, cglmp, is, i3322) or an inequality file
        inequality: String,
        /// Outcome count for the cglmp family
        #[arg(long)]
        d: Option<usize>,
        /// Comma-separated level labels
        #[arg(long, value_delimiter = ',', default_value = "1")]
        levels: Vec<String>,
        /// Solver feasibility and gap tolerance override
        #[arg(long)]
        tol_feas: Option<f64>,
        /// Relative singular-value cutoff for the rank columns
        #[arg(long)]
        tol_rank: Option<f64>,
    },
    /// Rebuild an explicit quantum model from a solved certificate
    Extract {
        /// Behavior file (JSON: scenario plus joint probability table)
        behavior: std::path::PathBuf,
        /// Relaxation level to solve at
        #[arg(long, default_value = "2")]
        level: String,
        /// Go straight to the trace-minimizing solve instead of trying
        /// the membership witness first
        #[arg(long)]
        trace_objective: bool,
        /// Solver feasibility and gap tolerance override
        #[arg(long)]
        tol_feas: Option<f64>,
        /// Relative singular-value cutoff for rank decisions
        #[arg(long)]
        tol_rank: Option<f64>,
        /// Where to write the model document (default: stdout)
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Write a relaxation as a solver file in sparse .dat-s form
    Export {
        /// Behavior file: exports its membership program
        #[arg(long, conflicts_with = "bell")]
        behavior: Option<std::path::PathBuf>,
        /// Inequality (catalog name or file): exports its extremal program
        #[arg(long)]
        bell: Option<String>,
        /// Outcome count for the cglmp family
        #[arg(long)]
        d: Option<usize>,
        /// Relaxation level
        #[arg(long, default_value = "1")]
        level: String,
        /// Output path
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Closed-form first-level membership test for two-input binary
    /// correlator data (no solver involved)
    Analytic {
        /// Correlator file {"singles": [...], "joints": [...]} or a
        /// behavior file in a two-input binary scenario
        data: std::path::PathBuf,
        /// Slack accepted beyond the exact bound
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Recompute the reference result tables and diff against their
    /// checked-in expected values
    ReproduceTables {
        /// Which tables to run
        #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3])]
        tables: Vec<u8>,
        /// Largest outcome count for the cglmp table
        #[arg(long, default_value_t = 8)]
        max_d: usize,
        /// Solver feasibility and gap tolerance override
        #[arg(long)]
        tol_feas: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Membership {
            behavior,
            level,
            tol_feas,
            margin,
            out,
        } => commands::membership::run(
            &behavior, &level, tol_feas, margin, out.as_deref(), cli.format,
        ),
        Command::Bell {
            inequality,
            d,
            levels,
            tol_feas,
            tol_rank,
        } => commands::bell::run(&inequality, d, &levels, tol_feas, tol_rank, cli.format, cli.jobs),
        Command::Extract {
            behavior,
            level,
            trace_objective,
            tol_feas,
            tol_rank,
            out,
        } => commands::extract::run(
            &behavior,
            &level,
            trace_objective,
            tol_feas,
            tol_rank,
            out.as_deref(),
            cli.format,
        ),
        Command::Export {
            behavior,
            bell,
            d,
            level,
            out,
        } => commands::export::run(behavior.as_deref(), bell.as_deref(), d, &level, &out, cli.format),
        Command::Analytic { data, tolerance } => {
            commands::analytic::run(&data, tolerance, cli.format)
        }
        Command::ReproduceTables {
            tables,
            max_d,
            tol_feas,
        } => commands::tables::run(&tables, max_d, tol_feas, cli.format, cli.jobs),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
