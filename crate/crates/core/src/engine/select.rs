//! Tournament selection of parent pairs.

use std::cmp::Ordering;

use rand::Rng;

use crate::breeding_plan::{ParentPair, PlanError, SelectionOutcome};

/// Winner among the drawn indices: lowest fitness, ties to the lowest index.
pub fn tournament_from_draws<I>(fitness: &[f64], draws: I) -> usize
where
    I: IntoIterator<Item = usize>,
{
    let mut draws = draws.into_iter();
    let mut best = draws.next().expect("tournament needs at least one draw");
    for c in draws {
        let better = match fitness[c].total_cmp(&fitness[best]) {
            Ordering::Less => true,
            Ordering::Equal => c < best,
            Ordering::Greater => false,
        };
        if better {
            best = c;
        }
    }
    best
}

/// Draws `k` indices uniformly with replacement and returns the winner.
pub fn tournament_select<R: Rng + ?Sized>(rng: &mut R, fitness: &[f64], k: usize) -> usize {
    assert!(!fitness.is_empty() && k >= 1);
    let n = fitness.len();
    let draws: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
    tournament_from_draws(fitness, draws)
}

/// One mum and one dad per child, drawn in child order from `rng`.
pub fn select_parents<R: Rng + ?Sized>(
    rng: &mut R,
    fitness: &[f64],
    k: usize,
) -> Result<SelectionOutcome, PlanError> {
    let pairs = (0..fitness.len())
        .map(|_| {
            let mum = tournament_select(rng, fitness, k);
            let dad = tournament_select(rng, fitness, k);
            ParentPair::new(mum, dad)
        })
        .collect();
    SelectionOutcome::new(pairs)
}
