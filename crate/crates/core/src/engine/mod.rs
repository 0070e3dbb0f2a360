//! Generational GP engine whose breeding phase keeps at most
//! `M + 2 * max(1, nthreads)` genome buffers alive.

pub mod problem;
pub mod rng;
pub mod select;
pub mod tree;
pub mod worker;

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::breeding_plan::{BreedingPlan, IntegrityViolation, ParentPair, PlanError};
use crate::expr_pool::{BufferPool, Lease, PoolError, SlotId};
use crate::metrics::{record_generation, GenerationStats, Snapshot};

pub use self::problem::{Evaluation, Problem, ProblemId, Quartic};
pub use self::rng::{child_rng, master_rng};
pub use self::worker::{BreedContext, BreedState, Crossed, Job, WorkerReport};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("breeding plan corrupted: {0}")]
    Integrity(#[from] IntegrityViolation),
    #[error("parent {parent} released while a crossover still reads it")]
    ReleasedWhileShared { parent: usize },
    #[error("child {child} claimed after its parent {parent} was released")]
    ParentGone { parent: usize, child: usize },
    #[error("generation {generation} ended inconsistently: {detail}")]
    Incomplete { generation: usize, detail: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub popsize: usize,
    /// Worker threads; 0 runs the worker loop inline in the master.
    pub nthreads: usize,
    /// Generations including the random initial one.
    pub generations: usize,
    pub buffer_bytes: usize,
    pub tournament_size: usize,
    pub seed: u64,
    pub problem: ProblemId,
    pub max_initial_depth: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            popsize: 500,
            nthreads: 8,
            generations: 50,
            buffer_bytes: 1024,
            tournament_size: 7,
            seed: 1,
            problem: ProblemId::Quartic,
            max_initial_depth: 6,
        }
    }
}

impl RunConfig {
    pub fn validate<P: Problem + ?Sized>(&self, problem: &P) -> Result<(), EngineError> {
        let fail = |m: String| Err(EngineError::Config(m));
        if self.popsize == 0 {
            return fail("popsize must be at least 1".into());
        }
        if self.generations == 0 {
            return fail("generations must be at least 1".into());
        }
        if self.tournament_size == 0 {
            return fail("tournament size must be at least 1".into());
        }
        if self.max_initial_depth == 0 {
            return fail("max initial depth must be at least 1".into());
        }
        let needed = tree::max_tree_len(self.max_initial_depth, problem.max_arity());
        if self.buffer_bytes < needed {
            return fail(format!(
                "buffer of {} bytes cannot hold a depth-{} tree ({needed} nodes)",
                self.buffer_bytes, self.max_initial_depth
            ));
        }
        if u32::try_from(self.popsize).is_err() || u32::try_from(self.generations).is_err() {
            return fail("popsize and generations must fit in 32 bits".into());
        }
        Ok(())
    }
}

/// Depth limit for member `i` of the random population, ramped over
/// `2..=max_depth`.
pub fn initial_depth(i: usize, max_depth: usize) -> usize {
    if max_depth <= 1 {
        1
    } else {
        2 + i % (max_depth - 1)
    }
}

/// Per-member record: genome handle plus bookkeeping.
#[derive(Debug)]
pub struct Individual {
    genome: Option<Arc<Lease>>,
    tree_len: usize,
    fitness: f64,
    parents: Option<ParentPair>,
    num_children: usize,
}

impl Individual {
    pub fn new(lease: Lease, tree_len: usize, fitness: f64, parents: Option<ParentPair>) -> Self {
        Individual {
            genome: Some(Arc::new(lease)),
            tree_len,
            fitness,
            parents,
            num_children: 0,
        }
    }

    /// Pool slot holding the genome, or `SlotId::NONE` once released.
    pub fn slot_id(&self) -> SlotId {
        self.genome.as_ref().map_or(SlotId::NONE, |g| g.slot())
    }

    pub fn tree(&self) -> Option<&[u8]> {
        self.genome.as_ref().map(|g| &g.cells()[..self.tree_len])
    }

    pub fn tree_len(&self) -> usize {
        self.tree_len
    }

    pub fn fitness(&self) -> f64 {
        self.fitness
    }

    /// `None` for the random initial population.
    pub fn parents(&self) -> Option<ParentPair> {
        self.parents
    }

    pub fn num_children(&self) -> usize {
        self.num_children
    }

    pub fn set_num_children(&mut self, n: usize) {
        self.num_children = n;
    }
}

/// Result of a complete run, shared by both engines.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub genomes: Vec<Vec<u8>>,
    pub fitness: Vec<f64>,
    /// Fitness of every member, one row per generation.
    pub fitness_history: Vec<Vec<f64>>,
    pub stats: Vec<GenerationStats>,
    /// Buffers the engine provisioned.
    pub capacity: usize,
}

impl RunOutput {
    pub fn peak_buffers(&self) -> usize {
        self.stats
            .iter()
            .map(|s| s.pool_max_used)
            .max()
            .unwrap_or(0)
    }

    pub fn best_fitness(&self) -> f64 {
        self.fitness.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Pooled engine state between generations.
pub struct Engine<'a, P: Problem + ?Sized> {
    config: RunConfig,
    problem: &'a P,
    pool: BufferPool,
    population: Vec<Individual>,
    master: ChaCha8Rng,
    generation: usize,
}

impl<'a, P: Problem + ?Sized> Engine<'a, P> {
    /// Validates the configuration and creates, evaluates and records the
    /// random initial generation.
    pub fn new(config: RunConfig, problem: &'a P) -> Result<(Self, GenerationStats), EngineError> {
        config.validate(problem)?;
        let mut pool = BufferPool::new(config.popsize, config.nthreads, config.buffer_bytes)?;
        let mut master = master_rng(config.seed);
        let start = Instant::now();
        let mut population = Vec::with_capacity(config.popsize);
        let mut opcodes = 0;
        for i in 0..config.popsize {
            let mut lease = pool.acquire()?;
            let depth = initial_depth(i, config.max_initial_depth);
            let len = tree::random_tree(problem, &mut master, depth, lease.cells_mut());
            let eval = problem.evaluate(&lease.cells()[..len]);
            opcodes += eval.opcodes;
            population.push(Individual::new(lease, len, eval.fitness, None));
        }
        let wall = start.elapsed();
        let engine = Engine {
            config,
            problem,
            pool,
            population,
            master,
            generation: 0,
        };
        let stats = engine.snapshot(opcodes, wall, &[wall]);
        Ok((engine, stats))
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn pool(&self) -> &BufferPool {
        &self.pool
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    fn snapshot(&self, opcodes: u64, wall: Duration, busy: &[Duration]) -> GenerationStats {
        let sizes: Vec<usize> = self.population.iter().map(|i| i.tree_len).collect();
        let fitness: Vec<f64> = self.population.iter().map(|i| i.fitness).collect();
        record_generation(&Snapshot {
            generation: self.generation,
            tree_sizes: &sizes,
            fitness: &fitness,
            pool_used_peak: self.pool.period_peak(),
            usage: self.pool.usage_stats(),
            opcodes,
            wall_time: wall,
            worker_busy: busy,
        })
    }

    /// Breeds and evaluates the next generation, replacing the current one.
    pub fn run_generation(&mut self) -> Result<GenerationStats, EngineError> {
        let start = Instant::now();
        let generation = self.generation + 1;
        self.pool.mark_period();

        let fitness: Vec<f64> = self.population.iter().map(|i| i.fitness).collect();
        let outcome =
            select::select_parents(&mut self.master, &fitness, self.config.tournament_size)?;
        let num_children = outcome.num_children();
        for (ind, &n) in self.population.iter_mut().zip(&num_children) {
            ind.num_children = n;
        }
        let plan = BreedingPlan::build(&outcome, &num_children)?;
        let parents = std::mem::take(&mut self.population);
        let mut state = BreedState::new(&mut self.pool, plan, parents);
        state.release_infertile()?;

        let ctx = BreedContext {
            problem: self.problem,
            outcome: &outcome,
            seed: self.config.seed,
            generation: generation as u32,
        };
        let shared = Mutex::new(state);
        let reports: Vec<Result<WorkerReport, EngineError>> = if self.config.nthreads == 0 {
            vec![worker::worker_loop(&shared, &ctx)]
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = (0..self.config.nthreads)
                    .map(|_| scope.spawn(|| worker::worker_loop(&shared, &ctx)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker panicked"))
                    .collect()
            })
        };
        let state = shared.into_inner().expect("breeding lock poisoned");

        let mut made: Vec<Option<Individual>> = (0..self.config.popsize).map(|_| None).collect();
        let mut busy = Vec::with_capacity(reports.len());
        let mut opcodes = 0;
        for report in reports {
            let report = report?;
            busy.push(report.busy);
            opcodes += report.opcodes;
            for (child, ind) in report.made {
                made[child] = Some(ind);
            }
        }

        let incomplete = |detail: String| EngineError::Incomplete { generation, detail };
        if !state.plan().is_drained() {
            return Err(incomplete("breeding plan not drained".into()));
        }
        state.plan().check_integrity()?;
        let parents = state.into_parents();
        if let Some(p) = parents.iter().position(|p| p.genome.is_some()) {
            return Err(incomplete(format!("parent {p} still holds a buffer")));
        }
        drop(parents);
        let population: Vec<Individual> = made
            .into_iter()
            .enumerate()
            .map(|(s, ind)| ind.ok_or_else(|| incomplete(format!("child {s} never created"))))
            .collect::<Result<_, _>>()?;
        self.pool.check_conservation()?;
        if self.pool.usage_stats().used != self.config.popsize {
            return Err(incomplete(format!(
                "{} buffers in use after breeding {} children",
                self.pool.usage_stats().used,
                self.config.popsize
            )));
        }

        self.population = population;
        self.generation = generation;
        Ok(self.snapshot(opcodes, start.elapsed(), &busy))
    }

    pub fn into_output(self, stats: Vec<GenerationStats>, history: Vec<Vec<f64>>) -> RunOutput {
        RunOutput {
            genomes: self
                .population
                .iter()
                .map(|i| i.tree().expect("live member").to_vec())
                .collect(),
            fitness: self.population.iter().map(|i| i.fitness).collect(),
            fitness_history: history,
            stats,
            capacity: self.pool.capacity(),
        }
    }
}

/// Runs the pooled engine for `config.generations` generations, the first
/// being the random population.
pub fn run_evolution<P: Problem + ?Sized>(
    config: &RunConfig,
    problem: &P,
) -> Result<RunOutput, EngineError> {
    let (mut engine, first) = Engine::new(config.clone(), problem)?;
    let mut stats = vec![first];
    let fitness_row = |e: &Engine<'_, P>| e.population().iter().map(|i| i.fitness()).collect();
    let mut history: Vec<Vec<f64>> = vec![fitness_row(&engine)];
    for _ in 1..config.generations {
        stats.push(engine.run_generation()?);
        history.push(fitness_row(&engine));
    }
    Ok(engine.into_output(stats, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(popsize: usize, nthreads: usize, generations: usize) -> RunConfig {
        RunConfig {
            popsize,
            nthreads,
            generations,
            buffer_bytes: 64,
            tournament_size: 3,
            seed: 42,
            problem: ProblemId::Quartic,
            max_initial_depth: 4,
        }
    }

    #[test]
    fn config_validation() {
        let q = Quartic::new();
        assert!(small(4, 1, 1).validate(&q).is_ok());
        for bad in [
            RunConfig {
                popsize: 0,
                ..small(4, 1, 1)
            },
            RunConfig {
                generations: 0,
                ..small(4, 1, 1)
            },
            RunConfig {
                tournament_size: 0,
                ..small(4, 1, 1)
            },
            RunConfig {
                max_initial_depth: 0,
                ..small(4, 1, 1)
            },
            RunConfig {
                buffer_bytes: 14,
                ..small(4, 1, 1)
            },
        ] {
            assert!(
                matches!(bad.validate(&q), Err(EngineError::Config(_))),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn initial_depth_ramp() {
        let depths: Vec<usize> = (0..7).map(|i| initial_depth(i, 4)).collect();
        assert_eq!(depths, vec![2, 3, 4, 2, 3, 4, 2]);
        assert_eq!(initial_depth(5, 1), 1);
    }

    #[test]
    fn one_generation_is_the_random_population() {
        let q = Quartic::new();
        let out = run_evolution(&small(6, 2, 1), &q).unwrap();
        assert_eq!(out.stats.len(), 1);
        assert_eq!(out.stats[0].pool_max_used, 6);
        assert_eq!(out.genomes.len(), 6);
        for (g, f) in out.genomes.iter().zip(&out.fitness) {
            assert!(tree::is_complete(&q, g));
            assert_eq!(q.evaluate(g).fitness, *f);
        }
    }

    #[test]
    fn depth_one_population_is_all_terminals() {
        let q = Quartic::new();
        let cfg = RunConfig {
            max_initial_depth: 1,
            ..small(5, 1, 1)
        };
        let out = run_evolution(&cfg, &q).unwrap();
        assert_eq!(out.stats[0].mean_tree_size, 1.0);
        assert_eq!(out.stats[0].max_tree_size, 1);
    }

    #[test]
    fn generation_keeps_population_and_bound() {
        let q = Quartic::new();
        for nthreads in [0, 1, 3] {
            let cfg = small(12, nthreads, 6);
            let (mut engine, _) = Engine::new(cfg.clone(), &q).unwrap();
            let bound = 12 + 2 * nthreads.max(1);
            for _ in 1..cfg.generations {
                let s = engine.run_generation().unwrap();
                assert_eq!(engine.population().len(), 12);
                assert!(s.pool_used_peak >= 13 && s.pool_used_peak <= bound, "{s:?}");
                assert!(s.pool_max_used <= bound);
                assert_eq!(engine.pool().usage_stats().used, 12);
                for ind in engine.population() {
                    assert!(!ind.slot_id().is_none());
                    assert!(ind.parents().is_some());
                    assert_eq!(q.evaluate(ind.tree().unwrap()).fitness, ind.fitness());
                }
            }
            assert_eq!(engine.generation(), 5);
        }
    }

    #[test]
    fn opcode_count_sums_evaluations() {
        let q = Quartic::new();
        let out = run_evolution(&small(8, 2, 3), &q).unwrap();
        let last = out.stats.last().unwrap();
        let expect: u64 = out.genomes.iter().map(|g| (g.len() * 20) as u64).sum();
        assert_eq!(last.total_opcodes_evaluated, expect);
        assert_eq!(last.worker_busy_time.len(), 2);
    }

    #[test]
    fn pair_of_singletons_peaks_at_m_plus_one() {
        // Two parents, each the sole parent of one child: with one worker the
        // child's buffer is taken before its parent's is given back.
        let q = Quartic::new();
        let cfg = RunConfig {
            tournament_size: 1,
            ..small(2, 1, 2)
        };
        let mut seen_singletons = false;
        for seed in 0..64 {
            let cfg = RunConfig {
                seed,
                ..cfg.clone()
            };
            let (mut engine, _) = Engine::new(cfg, &q).unwrap();
            let s = engine.run_generation().unwrap();
            let parents: Vec<ParentPair> = engine
                .population()
                .iter()
                .map(|i| i.parents().unwrap())
                .collect();
            let selfed = parents.iter().all(|p| p.mum == p.dad) && parents[0].mum != parents[1].mum;
            if selfed {
                seen_singletons = true;
            }
            assert!(s.pool_used_peak >= 3 && s.pool_used_peak <= 4);
            if selfed {
                assert_eq!(s.pool_used_peak, 3, "seed {seed}");
            }
        }
        assert!(seen_singletons);
    }
}
