//! Command-line options and `@file` configuration files.
//!
//! Options are folded left to right, so a later `--key value` overrides an
//! earlier one whether it came from the command line or a spliced file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use ssm_core::inference::Resampler;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Joint,
    Prior,
    Posterior,
    Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum FilterChoice {
    Kalman,
    #[default]
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SamplerChoice {
    #[default]
    Mh,
    Smc2,
}

fn parse_resampler(s: &str) -> Result<Resampler, String> {
    Resampler::from_str(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(no_binary_name = true, args_override_self = true, disable_help_flag = true, disable_version_flag = true)]
struct Args {
    #[arg(long)]
    model_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    target: Option<Target>,
    #[arg(long, value_enum, default_value_t)]
    filter: FilterChoice,
    #[arg(long, value_enum, default_value_t)]
    sampler: SamplerChoice,
    #[arg(long, default_value_t = 1)]
    nsamples: usize,
    #[arg(long, default_value_t = 256)]
    nparticles: usize,
    #[arg(long, default_value_t = 0)]
    noutputs: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    start_time: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    end_time: f64,
    #[arg(long)]
    input_file: Option<PathBuf>,
    #[arg(long)]
    obs_file: Option<PathBuf>,
    #[arg(long)]
    init_file: Option<PathBuf>,
    #[arg(long)]
    output_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    nthreads: usize,
    #[arg(long, value_parser = parse_resampler, default_value = "stratified")]
    resampler: Resampler,
    #[arg(long)]
    ess_rel: Option<f64>,
    #[arg(long)]
    disable_assert: bool,
    // accepted so that configurations written for other builds still load
    #[arg(long)]
    enable_cuda: bool,
    #[arg(long)]
    enable_mpi: bool,
    #[arg(long)]
    enable_sse: bool,
    #[arg(long)]
    mpi_np: Option<usize>,
    #[arg(long)]
    help: bool,
}

/// A fully resolved `sample` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model_file: PathBuf,
    pub target: Target,
    pub filter: FilterChoice,
    pub sampler: SamplerChoice,
    pub nsamples: usize,
    pub nparticles: usize,
    pub noutputs: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub input_file: Option<PathBuf>,
    pub obs_file: Option<PathBuf>,
    pub init_file: Option<PathBuf>,
    pub output_file: PathBuf,
    pub seed: u64,
    pub nthreads: usize,
    pub resampler: Resampler,
    pub ess_rel: Option<f64>,
    pub disable_assert: bool,
    /// Options that were accepted but have no effect in this build.
    pub warnings: Vec<String>,
}

pub const USAGE: &str = "usage: ssm sample [--key value | --flag | @file]...

  --model-file PATH     model (.bi) file (required)
  --target T            joint | prior | posterior | prediction (required)
  --filter F            bootstrap (default) | kalman
  --sampler S           mh (default) | smc2
  --nsamples N          samples / θ-particles (default 1)
  --nparticles N        state particles (default 256)
  --noutputs N          output intervals over [start, end] (default 0)
  --start-time T        (default 0)
  --end-time T          (default 0)
  --input-file PATH     input variables (CSV)
  --obs-file PATH       observations (CSV), required for posterior
  --init-file PATH      earlier output; required for prediction
  --output-file PATH    (default output.csv)
  --seed N              (default 0)
  --nthreads N          worker threads (default 1)
  --resampler R         multinomial | stratified (default) | systematic
  --ess-rel X           resample only when ESS < X·P
  --disable-assert      skip finiteness checks of states

@file splices the whitespace-separated tokens of a file in place.
Later options override earlier ones.";

/// Replaces every `@path` token by the tokens of that file, recursively.
/// Nested paths are taken relative to the working directory.
pub fn expand_tokens(tokens: &[String]) -> CliResult<Vec<String>> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    expand_into(tokens, &mut stack, &mut out)?;
    Ok(out)
}

fn expand_into(tokens: &[String], stack: &mut Vec<PathBuf>, out: &mut Vec<String>) -> CliResult<()> {
    for tok in tokens {
        let Some(path) = tok.strip_prefix('@') else {
            out.push(tok.clone());
            continue;
        };
        let path = Path::new(path);
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        let key = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
        if stack.contains(&key) {
            return Err(CliError::Usage(format!("config file {} includes itself", path.display())));
        }
        stack.push(key);
        let inner: Vec<String> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .map(String::from)
            .collect();
        expand_into(&inner, stack, out)?;
        stack.pop();
    }
    Ok(())
}

/// Parses the options of `sample` (without the command word itself).
pub fn parse_config(argv: &[String]) -> CliResult<RunConfig> {
    let tokens = expand_tokens(argv)?;
    let args = Args::try_parse_from(&tokens).map_err(|e| CliError::Usage(e.render().to_string().trim_end().to_string()))?;
    if args.help {
        return Err(CliError::Usage(USAGE.into()));
    }
    let model_file = args.model_file.ok_or_else(|| CliError::Usage("model file required (--model-file)".into()))?;
    let target = args
        .target
        .ok_or_else(|| CliError::Usage("--target is required (joint, prior, posterior or prediction)".into()))?;
    let mut warnings = Vec::new();
    for (on, name) in [(args.enable_cuda, "--enable-cuda"), (args.enable_mpi, "--enable-mpi"), (args.enable_sse, "--enable-sse")] {
        if on {
            warnings.push(format!("{name} is unsupported in this build and has no effect"));
        }
    }
    if args.mpi_np.is_some() {
        warnings.push("--mpi-np is unsupported in this build and has no effect".into());
    }
    let cfg = RunConfig {
        model_file,
        target,
        filter: args.filter,
        sampler: args.sampler,
        nsamples: args.nsamples,
        nparticles: args.nparticles,
        noutputs: args.noutputs,
        start_time: args.start_time,
        end_time: args.end_time,
        input_file: args.input_file,
        obs_file: args.obs_file,
        init_file: args.init_file,
        output_file: args.output_file.unwrap_or_else(|| "output.csv".into()),
        seed: args.seed,
        nthreads: args.nthreads,
        resampler: args.resampler,
        ess_rel: args.ess_rel,
        disable_assert: args.disable_assert,
        warnings,
    };
    cfg.check()?;
    Ok(cfg)
}

impl RunConfig {
    fn check(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(self.start_time.is_finite() && self.end_time.is_finite()) || self.end_time < self.start_time {
            return bad(format!("invalid time window [{}, {}]", self.start_time, self.end_time));
        }
        if self.nthreads == 0 {
            return bad("--nthreads must be at least 1".into());
        }
        match self.target {
            Target::Posterior if self.obs_file.is_none() => return bad("--target posterior requires --obs-file".into()),
            Target::Prediction if self.init_file.is_none() => return bad("--target prediction requires --init-file".into()),
            _ => {}
        }
        if self.target == Target::Posterior && self.filter == FilterChoice::Bootstrap && self.nparticles < 2 {
            return bad(format!("the particle filter needs --nparticles ≥ 2, got {}", self.nparticles));
        }
        if self.target == Target::Posterior && self.sampler == SamplerChoice::Smc2 && self.nsamples < 2 {
            return bad(format!("SMC² needs --nsamples ≥ 2, got {}", self.nsamples));
        }
        if let Some(r) = self.ess_rel {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("--ess-rel must lie in [0, 1], got {r}"));
            }
        }
        Ok(())
    }

    /// `key = value` lines describing the run, in a fixed order. The thread
    /// count is left out so that outputs do not depend on it.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut v = vec![
            ("model-file", self.model_file.display().to_string()),
            ("target", name(self.target)),
            ("filter", name(self.filter)),
            ("sampler", name(self.sampler)),
            ("nsamples", self.nsamples.to_string()),
            ("nparticles", self.nparticles.to_string()),
            ("noutputs", self.noutputs.to_string()),
            ("start-time", format!("{:?}", self.start_time)),
            ("end-time", format!("{:?}", self.end_time)),
            ("input-file", path(&self.input_file)),
            ("obs-file", path(&self.obs_file)),
            ("init-file", path(&self.init_file)),
            ("seed", self.seed.to_string()),
            ("resampler", self.resampler.to_string()),
        ];
        if let Some(r) = self.ess_rel {
            v.push(("ess-rel", format!("{r:?}")));
        }
        if self.disable_assert {
            v.push(("disable-assert", "true".into()));
        }
        v
    }
}

fn name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&name(*self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn defaults_and_required_options() {
        let e = parse_config(&[]).unwrap_err();
        assert!(e.to_string().contains("model file required"), "{e}");
        assert_eq!(e.exit_code(), 1);
        let c = parse_config(&toks("--model-file m.bi --target prior")).unwrap();
        assert_eq!(c.filter, FilterChoice::Bootstrap);
        assert_eq!(c.sampler, SamplerChoice::Mh);
        assert_eq!(c.resampler, Resampler::Stratified);
        assert_eq!(c.start_time, 0.0);
        assert!(parse_config(&toks("--model-file m.bi --target posterior")).is_err());
        assert!(parse_config(&toks("--model-file m.bi --target prediction")).is_err());
        assert!(parse_config(&toks("--model-file m.bi --target prior --bogus 1")).is_err());
        assert!(parse_config(&toks("--model-file m.bi --target prior --filter magic")).is_err());
    }

    #[test]
    fn unsupported_switches_warn() {
        let c = parse_config(&toks("--model-file m.bi --target prior --enable-cuda --enable-sse --mpi-np 3")).unwrap();
        assert_eq!(c.warnings.len(), 3);
        assert!(c.warnings[0].contains("unsupported in this build"));
    }

    #[test]
    fn files_splice_and_later_options_win() {
        let dir = tempfile::tempdir().unwrap();
        let inner = dir.path().join("inner.conf");
        let outer = dir.path().join("outer.conf");
        std::fs::write(&inner, "--nsamples 100 # a comment\n--filter kalman\n").unwrap();
        std::fs::write(&outer, format!("--model-file m.bi\n--target posterior --obs-file o.csv\n@{}\n", inner.display())).unwrap();
        let c = parse_config(&[format!("@{}", outer.display()), "--nsamples".into(), "500".into()]).unwrap();
        assert_eq!(c.nsamples, 500);
        assert_eq!(c.filter, FilterChoice::Kalman);
        let c = parse_config(&["--nsamples".into(), "7".into(), format!("@{}", outer.display())]).unwrap();
        assert_eq!(c.nsamples, 100);
    }

    #[test]
    fn cyclic_inclusion_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.conf");
        let b = dir.path().join("b.conf");
        std::fs::write(&a, format!("--seed 1 @{}", b.display())).unwrap();
        std::fs::write(&b, format!("@{}", a.display())).unwrap();
        let e = parse_config(&[format!("@{}", a.display())]).unwrap_err();
        assert!(e.to_string().contains("includes itself"), "{e}");
        // the same file twice in sequence is fine
        std::fs::write(&b, "--seed 2").unwrap();
        let c = expand_tokens(&[format!("@{}", b.display()), format!("@{}", b.display())]).unwrap();
        assert_eq!(c, toks("--seed 2 --seed 2"));
    }

    proptest! {
        /// Any interleaving of duplicate options resolves to the last value
        /// given for each key.
        #[test]
        fn precedence_is_a_left_to_right_fold(ops in proptest::collection::vec((0usize..4, 0u64..1000), 0..20)) {
            let keys = ["--seed", "--nsamples", "--nparticles", "--noutputs"];
            let mut argv = toks("--model-file m.bi --target prior");
            let mut last = [0u64, 1, 256, 0];
            for (k, v) in &ops {
                argv.push(keys[*k].into());
                argv.push(v.to_string());
                last[*k] = *v;
            }
            let c = parse_config(&argv).unwrap();
            prop_assert_eq!([c.seed, c.nsamples as u64, c.nparticles as u64, c.noutputs as u64], last);
        }
    }
}
