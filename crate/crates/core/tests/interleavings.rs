mod common;

use common::*;
use memgp::breeding_plan::Class;

#[test]
fn every_outcome_every_schedule_up_to_three() {
    for m in 1..=3 {
        let outcomes = if m <= 2 {
            all_outcomes(m)
        } else {
            canonical_outcomes(m)
        };
        for nthreads in 1..=2 {
            let mut schedules = 0;
            for o in &outcomes {
                schedules += explore_all(o, nthreads)
                    .unwrap_or_else(|e| panic!("M={m} threads={nthreads} {o:?}: {e}"))
                    .schedules;
            }
            assert!(schedules >= outcomes.len());
        }
    }
}

#[test]
fn canonical_counts() {
    // set partitions of 2M labelled slots into at most M blocks
    assert_eq!(canonical_outcomes(1).len(), 1);
    assert_eq!(canonical_outcomes(2).len(), 8);
    assert_eq!(canonical_outcomes(3).len(), 122);
}

#[test]
fn one_worker_follows_fixed_order() {
    // A: 0,1,1  B: 0,2  C: 2 -> class 1 child 2 first, then 0, 1
    let o = outcome(&[(0, 1), (0, 0), (1, 2)]);
    let trace = run_random_schedule(&o, 1, &mut rng(0)).unwrap();
    let order: Vec<usize> = trace.claims.iter().map(|c| c.child).collect();
    assert_eq!(order, [2, 0, 1]);
    assert_eq!(trace.claims[0].class_before, Class::One);
}

#[test]
fn class_one_before_class_two_under_random_schedules() {
    let mut r = rng(77);
    for trial in 0..300 {
        let m = 1 + trial % 40;
        let o = if trial % 2 == 0 {
            random_outcome(&mut r, m)
        } else {
            skewed_outcome(&mut r, m)
        };
        let workers = 1 + trial % 5;
        let trace = run_random_schedule(&o, workers, &mut r).unwrap();
        for c in &trace.claims {
            assert!(
                !c.class_one_pending || c.class_before == Class::One,
                "{o:?} {c:?}"
            );
        }
    }
}
