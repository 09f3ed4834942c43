//! Files, configuration and the `sample` command for `ssm-core`.
//!
//! * [`series_io`] - time series as CSV with empty cells for masked values.
//! * [`config`] - `--key value` options and `@file` splicing.
//! * [`output`] - the sample output format, readable as an init file.
//! * [`run`] - prior, joint, posterior and prediction runs.

pub mod config;
pub mod error;
pub mod exec;
pub mod output;
pub mod run;
pub mod series_io;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
pub use run::{run_sample, Summary};

/// Entry point shared by the binary and the tests: `args` excludes the
/// program name. Returns the process exit code.
pub fn cli_main(args: &[String]) -> i32 {
    match args.first().map(String::as_str) {
        Some("sample") => {}
        Some("--help" | "-h" | "help") => {
            println!("{}", config::USAGE);
            return 0;
        }
        Some(other) => {
            eprintln!("error: unknown command `{other}`\n\n{}", config::USAGE);
            return 1;
        }
        None => {
            eprintln!("{}", config::USAGE);
            return 1;
        }
    }
    let cfg = match parse_config(&args[1..]) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    match run_sample(&cfg) {
        Ok(s) => {
            let mut msg = format!("wrote {} samples to {}", s.records, cfg.output_file.display());
            if let Some(a) = s.accepted {
                msg += &format!(", {a} accepted moves");
            }
            if let Some(z) = s.log_evidence {
                msg += &format!(", log evidence {z:.4}");
            }
            eprintln!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
