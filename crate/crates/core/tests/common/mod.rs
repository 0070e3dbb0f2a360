//! Step-by-step driver for the breeding phase, used to explore worker
//! interleavings without threads.
#![allow(dead_code)]

use memgp::breeding_plan::{BreedingPlan, Class, ParentPair, SelectionOutcome};
use memgp::engine::problem::VAR_X;
use memgp::engine::{BreedContext, BreedState, Individual, Job, Quartic};
use memgp::expr_pool::{pool_capacity, BufferPool, Lease, SlotId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn outcome(pairs: &[(usize, usize)]) -> SelectionOutcome {
    SelectionOutcome::new(pairs.iter().map(|&(m, d)| ParentPair::new(m, d)).collect()).unwrap()
}

pub fn random_outcome(rng: &mut ChaCha8Rng, m: usize) -> SelectionOutcome {
    outcome(
        &(0..m)
            .map(|_| (rng.gen_range(0..m), rng.gen_range(0..m)))
            .collect::<Vec<_>>(),
    )
}

/// Outcome with a skewed parent distribution, closer to what tournament
/// selection produces than uniform draws.
pub fn skewed_outcome(rng: &mut ChaCha8Rng, m: usize) -> SelectionOutcome {
    let fertile = rng.gen_range(1..=m);
    let pick = |rng: &mut ChaCha8Rng| {
        let a = rng.gen_range(0..fertile);
        let b = rng.gen_range(0..fertile);
        a.min(b)
    };
    outcome(&(0..m).map(|_| (pick(rng), pick(rng))).collect::<Vec<_>>())
}

/// Every outcome for population `m`, in lexicographic order.
pub fn all_outcomes(m: usize) -> Vec<SelectionOutcome> {
    let total = m.pow(2 * m as u32);
    (0..total)
        .map(|mut code| {
            let mut pairs = Vec::with_capacity(m);
            for _ in 0..m {
                let mum = code % m;
                code /= m;
                let dad = code % m;
                code /= m;
                pairs.push((mum, dad));
            }
            outcome(&pairs)
        })
        .collect()
}

/// Outcomes for population `m` with parents relabelled in order of first
/// appearance. Each class of outcomes equal up to renaming parents appears
/// once.
pub fn canonical_outcomes(m: usize) -> Vec<SelectionOutcome> {
    fn rec(
        m: usize,
        pos: usize,
        next_label: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<SelectionOutcome>,
    ) {
        if pos == 2 * m {
            let pairs: Vec<(usize, usize)> = cur.chunks(2).map(|c| (c[0], c[1])).collect();
            out.push(outcome(&pairs));
            return;
        }
        for label in 0..=next_label.min(m - 1) {
            cur.push(label);
            rec(m, pos + 1, next_label.max(label + 1), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, 0, 0, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug)]
enum Worker {
    Idle,
    Claimed(Job),
    Exited,
}

#[derive(Debug, Clone, Copy)]
pub struct Claim {
    pub worker: usize,
    pub child: usize,
    /// Some unclaimed child was class 1 just before this claim.
    pub class_one_pending: bool,
    /// Status of the claimed child just before the claim.
    pub class_before: Class,
}

#[derive(Debug, Default, Clone)]
pub struct Trace {
    pub claims: Vec<Claim>,
    pub rem_child_calls: usize,
    pub max_used: usize,
}

/// Fresh parents: one single-node tree each, all holding a pool buffer.
pub fn seed_parents(pool: &mut BufferPool, outcome: &SelectionOutcome) -> Vec<Individual> {
    outcome
        .num_children()
        .into_iter()
        .map(|n| {
            let mut lease = pool.acquire().unwrap();
            lease.cells_mut()[0] = VAR_X;
            let mut ind = Individual::new(lease, 1, 0.0, None);
            ind.set_num_children(n);
            ind
        })
        .collect()
}

/// One breeding generation driven one step at a time.
pub struct Sim<'p> {
    pub state: BreedState<'p>,
    workers: Vec<Worker>,
    made: Vec<Lease>,
    pub trace: Trace,
    outcome: SelectionOutcome,
    problem: Quartic,
    bound: usize,
}

impl<'p> Sim<'p> {
    pub fn new(pool: &'p mut BufferPool, outcome: SelectionOutcome, nworkers: usize) -> Self {
        let nthreads = nworkers;
        let bound = pool_capacity(outcome.popsize(), nthreads);
        let parents = seed_parents(pool, &outcome);
        let plan = BreedingPlan::build(&outcome, &outcome.num_children()).unwrap();
        let mut state = BreedState::new(pool, plan, parents);
        state.release_infertile().unwrap();
        Sim {
            state,
            workers: (0..nworkers.max(1)).map(|_| Worker::Idle).collect(),
            made: Vec::new(),
            trace: Trace::default(),
            outcome,
            problem: Quartic::new(),
            bound,
        }
    }

    pub fn enabled(&self) -> Vec<usize> {
        (0..self.workers.len())
            .filter(|&w| !matches!(self.workers[w], Worker::Exited))
            .collect()
    }

    pub fn done(&self) -> bool {
        self.enabled().is_empty()
    }

    /// Advances worker `w` to its next lock acquisition: either claiming a
    /// child, or running crossover and then retiring the child under the
    /// lock. Invariants are checked afterwards; the in-flight parent check
    /// in [`Sim::check`] covers every moment a crossover could read.
    pub fn step(&mut self, w: usize) -> Result<(), String> {
        let current = std::mem::replace(&mut self.workers[w], Worker::Exited);
        self.workers[w] = match current {
            Worker::Idle => {
                let plan = self.state.plan();
                let before: Vec<Class> = (0..plan.popsize()).map(|s| plan.status(s)).collect();
                let class_one_pending = before.contains(&Class::One);
                match self.state.claim(&self.outcome).map_err(|e| e.to_string())? {
                    Some(job) => {
                        let child = job.child();
                        if before[child] == Class::Claimed {
                            return Err(format!("child {child} claimed twice"));
                        }
                        self.trace.claims.push(Claim {
                            worker: w,
                            child,
                            class_one_pending,
                            class_before: before[child],
                        });
                        Worker::Claimed(job)
                    }
                    None if before.iter().any(|&c| c != Class::Claimed) => {
                        return Err("claim returned nothing with children unclaimed".into());
                    }
                    None => Worker::Exited,
                }
            }
            Worker::Claimed(job) => {
                let ctx = BreedContext {
                    problem: &self.problem,
                    outcome: &self.outcome,
                    seed: 1,
                    generation: 1,
                };
                let c = job.crossover(&ctx);
                self.state
                    .finish(c.child, c.pair)
                    .map_err(|e| e.to_string())?;
                self.trace.rem_child_calls += 2;
                self.made.push(c.lease);
                Worker::Idle
            }
            Worker::Exited => return Err(format!("worker {w} stepped after exit")),
        };
        self.check()
    }

    pub fn check(&mut self) -> Result<(), String> {
        self.state
            .plan()
            .check_integrity()
            .map_err(|e| e.to_string())?;
        self.state
            .pool()
            .check_conservation()
            .map_err(|e| e.to_string())?;
        let used = self.state.pool().usage_stats().used;
        self.trace.max_used = self.trace.max_used.max(used);
        if used > self.bound {
            return Err(format!("{used} buffers live, bound {}", self.bound));
        }
        for w in &self.workers {
            if let Worker::Claimed(job) = w {
                let pair = job.pair();
                for p in [pair.mum, pair.dad] {
                    if self.state.parent_slot(p) == SlotId::NONE {
                        return Err(format!(
                            "pending child {} reads parent {p} after its buffer was released",
                            job.child()
                        ));
                    }
                }
            }
        }
        // a released parent must have nothing left to create
        for p in 0..self.outcome.popsize() {
            if self.state.parent_slot(p) == SlotId::NONE
                && self.state.plan().children_of(p).iter().any(Option::is_some)
            {
                return Err(format!("parent {p} released with children outstanding"));
            }
        }
        Ok(())
    }

    /// Checks the end-of-generation state.
    pub fn finish_checks(&self) -> Result<(), String> {
        let m = self.outcome.popsize();
        if !self.state.plan().is_drained() {
            return Err("plan not drained".into());
        }
        let mut claimed: Vec<usize> = self.trace.claims.iter().map(|c| c.child).collect();
        claimed.sort_unstable();
        if claimed != (0..m).collect::<Vec<_>>() {
            return Err(format!("children claimed {claimed:?}"));
        }
        if self.trace.rem_child_calls != 2 * m {
            return Err(format!("{} rem_child calls", self.trace.rem_child_calls));
        }
        if let Some(p) = (0..m).find(|&p| self.state.parent_slot(p) != SlotId::NONE) {
            return Err(format!("parent {p} never released"));
        }
        if self.state.pool().usage_stats().used != m {
            return Err(format!(
                "{} buffers live at end",
                self.state.pool().usage_stats().used
            ));
        }
        if self.trace.max_used < m + 1 {
            return Err(format!("peak {} below M + 1", self.trace.max_used));
        }
        Ok(())
    }
}

/// Replays `schedule` on a fresh world; returns the workers enabled next.
pub fn replay(
    outcome: &SelectionOutcome,
    nthreads: usize,
    schedule: &[usize],
) -> Result<(Vec<usize>, Trace), String> {
    let mut pool = BufferPool::new(outcome.popsize(), nthreads, 1).unwrap();
    let mut sim = Sim::new(&mut pool, outcome.clone(), nthreads);
    sim.check()?;
    for &w in schedule {
        sim.step(w)?;
    }
    if sim.done() {
        sim.finish_checks()?;
    }
    Ok((sim.enabled(), sim.trace.clone()))
}

#[derive(Debug, Default)]
pub struct Exploration {
    pub schedules: usize,
    pub states: usize,
}

/// Depth-first walk over every interleaving of worker steps.
pub fn explore_all(outcome: &SelectionOutcome, nthreads: usize) -> Result<Exploration, String> {
    fn rec(
        outcome: &SelectionOutcome,
        nthreads: usize,
        prefix: &mut Vec<usize>,
        stats: &mut Exploration,
    ) -> Result<(), String> {
        let (enabled, _) =
            replay(outcome, nthreads, prefix).map_err(|e| format!("schedule {prefix:?}: {e}"))?;
        stats.states += 1;
        if enabled.is_empty() {
            stats.schedules += 1;
            return Ok(());
        }
        for w in enabled {
            prefix.push(w);
            rec(outcome, nthreads, prefix, stats)?;
            prefix.pop();
        }
        Ok(())
    }
    let mut stats = Exploration::default();
    rec(outcome, nthreads, &mut Vec::new(), &mut stats)?;
    Ok(stats)
}

/// Runs one generation under a random interleaving of `nworkers` workers.
pub fn run_random_schedule(
    outcome: &SelectionOutcome,
    nworkers: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Trace, String> {
    let mut pool = BufferPool::new(outcome.popsize(), nworkers, 1).unwrap();
    let mut sim = Sim::new(&mut pool, outcome.clone(), nworkers);
    sim.check()?;
    while !sim.done() {
        let enabled = sim.enabled();
        let w = enabled[rng.gen_range(0..enabled.len())];
        sim.step(w)?;
    }
    sim.finish_checks()?;
    Ok(sim.trace)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
