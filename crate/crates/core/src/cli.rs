//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success |
//! | 1    | file could not be read or written, or code file is malformed |
//! | 2    | scenario does not parse or fails validation |
//! | 3    | code file fails verification (`codec-check`) |
//! | 64   | bad command-line usage |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::codec::{self, CodecError};
use crate::sim::{self, Scenario, SimError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID_SCENARIO: i32 = 2;
pub const EXIT_CODE_REJECTED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "trackwatch",
    version,
    about = "Rail-track safety link simulator and code tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write metrics and event-log CSVs.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "metrics.csv")]
        out_metrics: PathBuf,
        #[arg(long, default_value = "events.csv")]
        out_log: PathBuf,
        /// Overrides the scenario's master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify a code file: minimum distance and syndrome coverage.
    CodecCheck {
        #[arg(long)]
        code_file: PathBuf,
    },
    /// Construct a code and write it in the text code format.
    CodecGen {
        #[arg(long)]
        code_file: PathBuf,
        #[arg(long, default_value_t = codec::DEFAULT_N)]
        n: usize,
        #[arg(long, default_value_t = codec::PAYLOAD_BITS)]
        k: usize,
        #[arg(long, default_value_t = codec::DEFAULT_T)]
        t: usize,
        #[arg(long, default_value_t = codec::DEFAULT_CODE_SEED)]
        seed: u64,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            out_metrics,
            out_log,
            seed,
        } => cmd_run(&scenario, &out_metrics, &out_log, seed, out, err),
        Command::CodecCheck { code_file } => cmd_codec_check(&code_file, out, err),
        Command::CodecGen {
            code_file,
            n,
            k,
            t,
            seed,
        } => cmd_codec_gen(&code_file, n, k, t, seed, out, err),
    }
}

pub fn cmd_run(
    scenario_path: &Path,
    out_metrics: &Path,
    out_log: &Path,
    seed: Option<u64>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let text = match fs::read_to_string(scenario_path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", scenario_path.display());
            return EXIT_IO;
        }
    };
    let mut scenario = match Scenario::from_json(&text) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "invalid scenario: {e}");
            return EXIT_INVALID_SCENARIO;
        }
    };
    if let Some(seed) = seed {
        scenario.master_seed = seed;
    }
    let output = match sim::run(&scenario) {
        Ok(o) => o,
        Err(SimError::InvalidScenario(violations)) => {
            for v in violations {
                let _ = writeln!(err, "invalid scenario: {v}");
            }
            return EXIT_INVALID_SCENARIO;
        }
        Err(SimError::Code(e)) => {
            let _ = writeln!(err, "invalid scenario: code parameters: {e}");
            return EXIT_INVALID_SCENARIO;
        }
    };
    for (path, body) in [
        (out_metrics, output.metrics.to_csv()),
        (out_log, output.log.to_csv()),
    ] {
        if let Err(e) = fs::write(path, body) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    let m = &output.metrics;
    let stop = m
        .stop_pos_m
        .map(|p| format!("{p:.3}"))
        .unwrap_or_else(|| "none".into());
    let _ = writeln!(
        out,
        "alarms={} warns={} stop_pos_m={stop} final_pos_m={:.3}",
        m.alarms, m.warns, m.final_pos_m
    );
    EXIT_OK
}

pub fn cmd_codec_check(code_file: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match fs::read_to_string(code_file) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", code_file.display());
            return EXIT_IO;
        }
    };
    let (generator, t) = match codec::parse_code_text(&text) {
        Ok(parsed) => parsed,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_IO;
        }
    };
    let report = match codec::inspect(&generator, t) {
        Ok(r) => r,
        Err(e @ CodecError::NotSystematic { .. }) => {
            let _ = writeln!(err, "rejected: {e}");
            return EXIT_CODE_REJECTED;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_IO;
        }
    };
    let _ = writeln!(out, "{report}");
    if report.corrects_t() {
        EXIT_OK
    } else {
        let _ = writeln!(
            err,
            "rejected: d_min={} cannot correct t={} errors (need {})",
            report.d_min,
            report.t,
            2 * report.t + 1
        );
        EXIT_CODE_REJECTED
    }
}

pub fn cmd_codec_gen(
    code_file: &Path,
    n: usize,
    k: usize,
    t: usize,
    seed: u64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let code = match codec::build_code(k, n, t, seed) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CODE_REJECTED;
        }
    };
    if let Err(e) = fs::write(code_file, code.to_text()) {
        let _ = writeln!(err, "error: cannot write {}: {e}", code_file.display());
        return EXIT_IO;
    }
    let _ = writeln!(out, "{}", code.report());
    EXIT_OK
}
