//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::engine::{run_evolution, ProblemId, Quartic, RunConfig, RunOutput};
use crate::metrics::emit_csv;
use crate::naive::run_evolution_naive;

pub const DEFAULT_THREADS: usize = 8;

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUN_FAILED: u8 = 1;
pub const EXIT_CSV_FAILED: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineKind {
    /// Bounded buffer pool, parallel breeding.
    Pooled,
    /// Separate old and new populations, single-threaded.
    Naive,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Parser, Clone, PartialEq)]
#[command(name = "memgp", version, about = "Memory-bounded generational GP")]
pub struct CliArgs {
    /// Population size M.
    #[arg(long, default_value_t = 500, value_parser = positive)]
    pub popsize: usize,
    /// Worker threads (0 breeds inline in the master thread). Default 8.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Generations to run, counting the random initial one.
    #[arg(long, default_value_t = 50, value_parser = positive)]
    pub generations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Fixed length of every genome buffer.
    #[arg(long, default_value_t = 1024, value_parser = positive)]
    pub buffer_bytes: usize,
    #[arg(long, default_value_t = 7, value_parser = positive)]
    pub tournament_size: usize,
    /// Depth limit of the random initial trees.
    #[arg(long, default_value_t = 6, value_parser = positive)]
    pub max_depth: usize,
    #[arg(long, value_enum, default_value_t = EngineKind::Pooled)]
    pub engine: EngineKind,
    #[arg(long, default_value_t = ProblemId::Quartic)]
    pub problem: ProblemId,
    /// Write per-generation statistics here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Suppress per-generation progress on stderr.
    #[arg(long)]
    pub quiet: bool,
    /// Zero all wall-clock fields in the output.
    #[arg(long)]
    pub zero_time: bool,
}

impl CliArgs {
    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(DEFAULT_THREADS)
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            popsize: self.popsize,
            nthreads: self.threads(),
            generations: self.generations,
            buffer_bytes: self.buffer_bytes,
            tournament_size: self.tournament_size,
            seed: self.seed,
            problem: self.problem,
            max_initial_depth: self.max_depth,
        }
    }
}

pub fn parse_args<I, T>(argv: I) -> Result<CliArgs, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    CliArgs::try_parse_from(argv)
}

/// One `key=value` line describing a finished run.
pub fn summary_line(args: &CliArgs, out: &RunOutput) -> String {
    let engine = match args.engine {
        EngineKind::Pooled => "pooled",
        EngineKind::Naive => "naive",
    };
    let threads = match args.engine {
        EngineKind::Pooled => args.threads(),
        EngineKind::Naive => 1,
    };
    let breeding = if out.stats.len() > 1 {
        &out.stats[1..]
    } else {
        &out.stats[..]
    };
    let cores =
        breeding.iter().map(|s| s.effective_cores()).sum::<f64>() / breeding.len().max(1) as f64;
    format!(
        "engine={engine} problem={} popsize={} threads={threads} generations={} seed={} \
         peak_buffers={} bound={} best_fitness={} effective_cores={:.2}",
        args.problem,
        args.popsize,
        out.stats.len(),
        args.seed,
        out.peak_buffers(),
        out.capacity,
        out.best_fitness(),
        cores,
    )
}

/// Runs the selected engine and returns the process exit code.
pub fn run(args: &CliArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8 {
    let config = args.run_config();
    let result = match (args.engine, args.problem) {
        (EngineKind::Pooled, ProblemId::Quartic) => run_evolution(&config, &Quartic::new()),
        (EngineKind::Naive, ProblemId::Quartic) => {
            if args.threads.is_some() {
                let _ = writeln!(
                    stderr,
                    "warning: --threads ignored, the naive engine is single-threaded"
                );
            }
            run_evolution_naive(&config, &Quartic::new())
        }
    };
    let mut out = match result {
        Ok(out) => out,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_RUN_FAILED;
        }
    };
    if args.zero_time {
        out.stats.iter_mut().for_each(|s| s.zero_times());
    }
    if !args.quiet {
        for s in &out.stats {
            let _ = writeln!(
                stderr,
                "gen {:>5} best {:.6} mean_size {:.1} peak {}",
                s.generation, s.best_fitness, s.mean_tree_size, s.pool_used_peak
            );
        }
    }
    let mut code = EXIT_OK;
    if let Some(path) = &args.csv {
        if let Err(e) = emit_csv(&out.stats, path) {
            let _ = writeln!(stderr, "error: {e}");
            code = EXIT_CSV_FAILED;
        }
    }
    let _ = writeln!(stdout, "{}", summary_line(args, &out));
    code
}
