//! Breeding phase: shared state under the engine lock and the worker loop.
//!
//! A worker repeats four steps until the plan runs dry:
//!
//! 1. under the lock, claim the next child and acquire a buffer for it;
//! 2. without the lock, build the child by crossover from its parents;
//! 3. under the lock, drop the child from both parents' outstanding lists,
//!    promote any parent's last child to class 1 and release the buffer of
//!    any parent left with no outstanding children;
//! 4. without the lock, evaluate the child.
//!
//! Steps 1 and 3 are [`BreedState::claim`] and [`BreedState::finish`]; step
//! 2 is [`Job::crossover`]. They are public so the schedule can also be
//! driven step by step, in any interleaving, without threads.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::problem::Problem;
use super::tree::subtree_crossover;
use super::{child_rng, EngineError, Individual};
use crate::breeding_plan::{BreedingPlan, ParentPair, SelectionOutcome};
use crate::expr_pool::{BufferPool, Lease, SlotId};

/// Read-only inputs shared by every worker during one generation.
pub struct BreedContext<'a, P: ?Sized> {
    pub problem: &'a P,
    pub outcome: &'a SelectionOutcome,
    pub seed: u64,
    pub generation: u32,
}

/// Everything the engine lock protects during breeding.
pub struct BreedState<'p> {
    pool: &'p mut BufferPool,
    plan: BreedingPlan,
    parents: Vec<Individual>,
}

/// A claimed child: its fresh buffer and shared handles on both parents.
#[derive(Debug)]
pub struct Job {
    child: usize,
    pair: ParentPair,
    mum: Arc<Lease>,
    mum_len: usize,
    dad: Arc<Lease>,
    dad_len: usize,
    lease: Lease,
}

/// A child written by crossover. Its parents are no longer referenced.
#[derive(Debug)]
pub struct Crossed {
    pub child: usize,
    pub pair: ParentPair,
    pub lease: Lease,
    pub tree_len: usize,
}

impl<'p> BreedState<'p> {
    /// `parents[p].num_children` must already hold each parent's child count.
    pub fn new(pool: &'p mut BufferPool, plan: BreedingPlan, parents: Vec<Individual>) -> Self {
        BreedState {
            pool,
            plan,
            parents,
        }
    }

    pub fn plan(&self) -> &BreedingPlan {
        &self.plan
    }

    pub fn pool(&self) -> &BufferPool {
        self.pool
    }

    pub fn parent(&self, p: usize) -> &Individual {
        &self.parents[p]
    }

    pub fn parent_slot(&self, p: usize) -> SlotId {
        self.parents[p].slot_id()
    }

    pub fn into_parents(self) -> Vec<Individual> {
        self.parents
    }

    /// Frees every parent without children. Run by the master before any
    /// worker starts.
    pub fn release_infertile(&mut self) -> Result<(), EngineError> {
        for p in 0..self.parents.len() {
            if self.parents[p].num_children == 0 {
                self.release_parent(p)?;
            }
        }
        Ok(())
    }

    fn release_parent(&mut self, p: usize) -> Result<(), EngineError> {
        let parent = &mut self.parents[p];
        parent.num_children = 0;
        let Some(shared) = parent.genome.take() else {
            return Ok(());
        };
        match Arc::try_unwrap(shared) {
            Ok(lease) => {
                self.pool.release(&mut Some(lease));
                Ok(())
            }
            Err(still_shared) => {
                parent.genome = Some(still_shared);
                Err(EngineError::ReleasedWhileShared { parent: p })
            }
        }
    }

    /// Claims the next child in priority order and gives it a buffer.
    /// `None` means there is nothing left to claim.
    pub fn claim(&mut self, outcome: &SelectionOutcome) -> Result<Option<Job>, EngineError> {
        let Some(child) = self.plan.claim_next() else {
            return Ok(None);
        };
        let pair = outcome.parents_of(child);
        let lease = self.pool.acquire()?;
        let handle = |p: usize| {
            let ind = &self.parents[p];
            ind.genome
                .clone()
                .map(|g| (g, ind.tree_len))
                .ok_or(EngineError::ParentGone { parent: p, child })
        };
        let (mum, mum_len) = handle(pair.mum)?;
        let (dad, dad_len) = handle(pair.dad)?;
        Ok(Some(Job {
            child,
            pair,
            mum,
            mum_len,
            dad,
            dad_len,
            lease,
        }))
    }

    /// Retires `child` from both parents once it has been created.
    pub fn finish(&mut self, child: usize, pair: ParentPair) -> Result<(), EngineError> {
        let mum = self.plan.rem_child(pair.mum, child)?;
        let dad = self.plan.rem_child(pair.dad, child)?;
        if let (1, Some(last)) = (mum.remaining, mum.last) {
            self.plan.move21(child, last);
        }
        if let (1, Some(last)) = (dad.remaining, dad.last) {
            self.plan.move21(child, last);
        }
        if mum.remaining == 0 {
            self.release_parent(pair.mum)?;
        }
        if dad.remaining == 0 {
            self.release_parent(pair.dad)?;
        }
        Ok(())
    }
}

impl Job {
    pub fn child(&self) -> usize {
        self.child
    }

    pub fn pair(&self) -> ParentPair {
        self.pair
    }

    pub fn slot(&self) -> SlotId {
        self.lease.slot()
    }

    /// Writes the child from its parents using the child's own rng stream.
    pub fn crossover<P: Problem + ?Sized>(self, ctx: &BreedContext<'_, P>) -> Crossed {
        let Job {
            child,
            pair,
            mum,
            mum_len,
            dad,
            dad_len,
            mut lease,
        } = self;
        let mut rng = child_rng(ctx.seed, ctx.generation, child as u32);
        let tree_len = subtree_crossover(
            ctx.problem,
            &mum.cells()[..mum_len],
            &dad.cells()[..dad_len],
            lease.cells_mut(),
            &mut rng,
        );
        Crossed {
            child,
            pair,
            lease,
            tree_len,
        }
    }
}

#[derive(Debug, Default)]
pub struct WorkerReport {
    pub made: Vec<(usize, Individual)>,
    pub opcodes: u64,
    pub busy: Duration,
}

/// Runs one worker until no child is left to claim.
pub fn worker_loop<P: Problem + ?Sized>(
    shared: &Mutex<BreedState<'_>>,
    ctx: &BreedContext<'_, P>,
) -> Result<WorkerReport, EngineError> {
    let start = Instant::now();
    let mut report = WorkerReport::default();
    loop {
        let job = {
            let mut state = shared.lock().expect("breeding lock poisoned");
            match state.claim(ctx.outcome)? {
                Some(job) => job,
                None => break,
            }
        };
        let crossed = job.crossover(ctx);
        shared
            .lock()
            .expect("breeding lock poisoned")
            .finish(crossed.child, crossed.pair)?;
        let eval = ctx
            .problem
            .evaluate(&crossed.lease.cells()[..crossed.tree_len]);
        report.opcodes += eval.opcodes;
        report.made.push((
            crossed.child,
            Individual::new(
                crossed.lease,
                crossed.tree_len,
                eval.fitness,
                Some(crossed.pair),
            ),
        ));
    }
    report.busy = start.elapsed();
    Ok(report)
}
