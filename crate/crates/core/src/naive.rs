//! Two-population reference engine.
//!
//! Keeps the whole old population alive while the new one is built, child by
//! child in index order, on one thread. It draws from the same random streams
//! and uses the same tree operators as the pooled engine, so for a given seed
//! both must produce identical populations.

use std::time::Instant;

use crate::engine::{
    child_rng, initial_depth, master_rng, select, tree, EngineError, Problem, RunConfig, RunOutput,
};
use crate::expr_pool::UsageStats;
use crate::metrics::{record_generation, GenerationStats, Snapshot};

struct Member {
    buffer: Vec<u8>,
    tree_len: usize,
    fitness: f64,
}

impl Member {
    fn tree(&self) -> &[u8] {
        &self.buffer[..self.tree_len]
    }
}

fn stats(
    generation: usize,
    pop: &[Member],
    live_peak: usize,
    max_live: usize,
    opcodes: u64,
    started: Instant,
) -> GenerationStats {
    let sizes: Vec<usize> = pop.iter().map(|m| m.tree_len).collect();
    let fitness: Vec<f64> = pop.iter().map(|m| m.fitness).collect();
    let wall = started.elapsed();
    record_generation(&Snapshot {
        generation,
        tree_sizes: &sizes,
        fitness: &fitness,
        pool_used_peak: live_peak,
        usage: UsageStats {
            used: pop.len(),
            max_used: max_live,
            allocated_slots: max_live,
        },
        opcodes,
        wall_time: wall,
        worker_busy: &[wall],
    })
}

/// Runs the reference engine. `config.nthreads` is ignored.
pub fn run_evolution_naive<P: Problem + ?Sized>(
    config: &RunConfig,
    problem: &P,
) -> Result<RunOutput, EngineError> {
    config.validate(problem)?;
    let m = config.popsize;
    let mut master = master_rng(config.seed);

    let started = Instant::now();
    let mut opcodes = 0;
    let mut population: Vec<Member> = (0..m)
        .map(|i| {
            let mut buffer = vec![0u8; config.buffer_bytes];
            let depth = initial_depth(i, config.max_initial_depth);
            let tree_len = tree::random_tree(problem, &mut master, depth, &mut buffer);
            let eval = problem.evaluate(&buffer[..tree_len]);
            opcodes += eval.opcodes;
            Member {
                buffer,
                tree_len,
                fitness: eval.fitness,
            }
        })
        .collect();
    let mut max_live = m;
    let mut series = vec![stats(0, &population, m, max_live, opcodes, started)];
    let mut history = vec![population.iter().map(|p| p.fitness).collect::<Vec<_>>()];

    for generation in 1..config.generations {
        let started = Instant::now();
        let fitness: Vec<f64> = population.iter().map(|p| p.fitness).collect();
        let outcome = select::select_parents(&mut master, &fitness, config.tournament_size)?;
        let mut next = Vec::with_capacity(m);
        let mut opcodes = 0;
        for (s, pair) in outcome.pairs().iter().enumerate() {
            let mut buffer = vec![0u8; config.buffer_bytes];
            let mut rng = child_rng(config.seed, generation as u32, s as u32);
            let tree_len = tree::subtree_crossover(
                problem,
                population[pair.mum].tree(),
                population[pair.dad].tree(),
                &mut buffer,
                &mut rng,
            );
            let eval = problem.evaluate(&buffer[..tree_len]);
            opcodes += eval.opcodes;
            next.push(Member {
                buffer,
                tree_len,
                fitness: eval.fitness,
            });
        }
        let live_peak = population.len() + next.len();
        max_live = max_live.max(live_peak);
        population = next;
        series.push(stats(
            generation,
            &population,
            live_peak,
            max_live,
            opcodes,
            started,
        ));
        history.push(population.iter().map(|p| p.fitness).collect());
    }

    Ok(RunOutput {
        genomes: population.iter().map(|p| p.tree().to_vec()).collect(),
        fitness: population.iter().map(|p| p.fitness).collect(),
        fitness_history: history,
        stats: series,
        capacity: 2 * m,
    })
}
