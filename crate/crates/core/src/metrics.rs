//! Per-generation statistics and their CSV form.

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Duration;

use thiserror::Error;

use crate::expr_pool::UsageStats;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no generations to write")]
    EmptySeries,
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean_tree_size: f64,
    pub max_tree_size: usize,
    /// Most buffers live at once during this generation.
    pub pool_used_peak: usize,
    /// Most buffers live at once since the run started.
    pub pool_max_used: usize,
    pub allocated_slots: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub total_opcodes_evaluated: u64,
    /// Seconds.
    pub generation_wall_time: f64,
    /// Seconds each worker spent in its loop.
    pub worker_busy_time: Vec<f64>,
    pub idle_fraction: f64,
}

pub const CSV_HEADER: &str = "generation,mean_tree_size,max_tree_size,pool_used_peak,\
pool_max_used,allocated_slots,best_fitness,mean_fitness,total_opcodes_evaluated,\
generation_wall_time,worker_busy_time,idle_fraction";

/// What the engine knows about a generation once it is complete.
#[derive(Clone, Debug)]
pub struct Snapshot<'a> {
    pub generation: usize,
    pub tree_sizes: &'a [usize],
    pub fitness: &'a [f64],
    pub pool_used_peak: usize,
    pub usage: UsageStats,
    pub opcodes: u64,
    pub wall_time: Duration,
    pub worker_busy: &'a [Duration],
}

/// `1 - sum(busy) / (workers * longest)`, or 0 when nothing ran.
pub fn idle_fraction(busy: &[f64]) -> f64 {
    let longest = busy.iter().copied().fold(0.0f64, f64::max);
    if busy.is_empty() || longest <= 0.0 {
        return 0.0;
    }
    let total: f64 = busy.iter().sum();
    (1.0 - total / (busy.len() as f64 * longest)).clamp(0.0, 1.0)
}

pub fn record_generation(snap: &Snapshot<'_>) -> GenerationStats {
    let n = snap.tree_sizes.len().max(1) as f64;
    let busy: Vec<f64> = snap.worker_busy.iter().map(Duration::as_secs_f64).collect();
    GenerationStats {
        generation: snap.generation,
        mean_tree_size: snap.tree_sizes.iter().sum::<usize>() as f64 / n,
        max_tree_size: snap.tree_sizes.iter().copied().max().unwrap_or(0),
        pool_used_peak: snap.pool_used_peak,
        pool_max_used: snap.usage.max_used,
        allocated_slots: snap.usage.allocated_slots,
        best_fitness: snap.fitness.iter().copied().fold(f64::INFINITY, f64::min),
        mean_fitness: snap.fitness.iter().sum::<f64>() / snap.fitness.len().max(1) as f64,
        total_opcodes_evaluated: snap.opcodes,
        generation_wall_time: snap.wall_time.as_secs_f64(),
        idle_fraction: idle_fraction(&busy),
        worker_busy_time: busy,
    }
}

impl GenerationStats {
    /// Cores kept busy on average, `workers * (1 - idle_fraction)`.
    pub fn effective_cores(&self) -> f64 {
        self.worker_busy_time.len() as f64 * (1.0 - self.idle_fraction)
    }

    /// Clears every wall-clock derived field.
    pub fn zero_times(&mut self) {
        self.generation_wall_time = 0.0;
        self.worker_busy_time.iter_mut().for_each(|t| *t = 0.0);
        self.idle_fraction = 0.0;
    }

    fn csv_row(&self) -> String {
        let busy: Vec<String> = self.worker_busy_time.iter().map(f64::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.generation,
            self.mean_tree_size,
            self.max_tree_size,
            self.pool_used_peak,
            self.pool_max_used,
            self.allocated_slots,
            self.best_fitness,
            self.mean_fitness,
            self.total_opcodes_evaluated,
            self.generation_wall_time,
            busy.join(";"),
            self.idle_fraction,
        )
    }
}

pub fn to_csv(series: &[GenerationStats]) -> String {
    let mut out = String::with_capacity(64 * (series.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in series {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

/// Writes the series as CSV. An empty series is refused before the file
/// is touched.
pub fn emit_csv(series: &[GenerationStats], path: &Path) -> Result<(), MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let io_err = |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(to_csv(series).as_bytes()).map_err(io_err)?;
    file.flush().map_err(io_err)
}

pub fn parse_csv(text: &str) -> Result<Vec<GenerationStats>, MetricsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(MetricsError::Parse {
                line: 1,
                message: "missing or wrong header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let err = |message: String| MetricsError::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(err(format!("expected 12 fields, got {}", fields.len())));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad {name}: '{s}'"))
        }
        let parse = || -> Result<GenerationStats, String> {
            let busy = if fields[10].is_empty() {
                Vec::new()
            } else {
                fields[10]
                    .split(';')
                    .map(|s| num(s, "worker_busy_time"))
                    .collect::<Result<_, _>>()?
            };
            Ok(GenerationStats {
                generation: num(fields[0], "generation")?,
                mean_tree_size: num(fields[1], "mean_tree_size")?,
                max_tree_size: num(fields[2], "max_tree_size")?,
                pool_used_peak: num(fields[3], "pool_used_peak")?,
                pool_max_used: num(fields[4], "pool_max_used")?,
                allocated_slots: num(fields[5], "allocated_slots")?,
                best_fitness: num(fields[6], "best_fitness")?,
                mean_fitness: num(fields[7], "mean_fitness")?,
                total_opcodes_evaluated: num(fields[8], "total_opcodes_evaluated")?,
                generation_wall_time: num(fields[9], "generation_wall_time")?,
                worker_busy_time: busy,
                idle_fraction: num(fields[11], "idle_fraction")?,
            })
        };
        out.push(parse().map_err(err)?);
    }
    Ok(out)
}
