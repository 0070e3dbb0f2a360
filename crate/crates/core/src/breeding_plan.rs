//! Per-generation breeding schedule.
//!
//! Every child of the next generation is put in one of two work chains.
//! Class 1 holds children with at least one parent that has no other child
//! left to create, so creating them lets that parent's buffer go. Class 2+
//! holds the rest. Workers always drain class 1 first. When a class 2+
//! parent is down to its last outstanding child, that child is promoted
//! to the head of class 1 ([`BreedingPlan::move21`]).
//!
//! Class 2+ is doubly linked so a child can be unlinked from anywhere in
//! it. Class 1 is only ever pushed at the head or popped, so its back
//! links are not kept.
//!
//! Parent and child indices share the range `0..popsize`. `None` plays the
//! role of the empty marker in chains and child arrays.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("child {child} names parent {parent}, outside population of {popsize}")]
    ParentOutOfRange {
        child: usize,
        parent: usize,
        popsize: usize,
    },
    #[error("parent {parent}: num_children says {declared}, selection gives {actual}")]
    ChildCountMismatch {
        parent: usize,
        declared: usize,
        actual: usize,
    },
    #[error("expected {expected} child counts, got {got}")]
    ChildCountLength { expected: usize, got: usize },
    #[error("child {child} is not outstanding for parent {parent}")]
    ChildNotFound { parent: usize, child: usize },
}

/// Mum and dad of one child, as indices into the current population.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParentPair {
    pub mum: usize,
    pub dad: usize,
}

impl ParentPair {
    pub fn new(mum: usize, dad: usize) -> Self {
        ParentPair { mum, dad }
    }
}

/// Parents chosen for every child of the next generation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionOutcome {
    pairs: Vec<ParentPair>,
}

impl SelectionOutcome {
    /// Population size is `pairs.len()`; every parent index must fall in it.
    pub fn new(pairs: Vec<ParentPair>) -> Result<Self, PlanError> {
        let popsize = pairs.len();
        if popsize == 0 {
            return Err(PlanError::EmptyPopulation);
        }
        for (child, p) in pairs.iter().enumerate() {
            for parent in [p.mum, p.dad] {
                if parent >= popsize {
                    return Err(PlanError::ParentOutOfRange {
                        child,
                        parent,
                        popsize,
                    });
                }
            }
        }
        Ok(SelectionOutcome { pairs })
    }

    pub fn popsize(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[ParentPair] {
        &self.pairs
    }

    pub fn parents_of(&self, child: usize) -> ParentPair {
        self.pairs[child]
    }

    /// Number of parent edges leaving each individual. A self-crossover
    /// child counts twice for its single parent.
    pub fn num_children(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.pairs.len()];
        for p in &self.pairs {
            counts[p.mum] += 1;
            counts[p.dad] += 1;
        }
        counts
    }
}

/// Scheduling class of a child. `Claimed` means a worker has taken it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Class {
    Claimed = 0,
    One = 1,
    TwoPlus = 2,
}

/// Result of removing one child from a parent's outstanding list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Removal {
    pub remaining: usize,
    /// The one child still outstanding, set only when `remaining == 1`.
    pub last: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegrityViolation {
    pub message: String,
}

impl fmt::Display for IntegrityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for IntegrityViolation {}

fn violation(message: String) -> Result<(), IntegrityViolation> {
    Err(IntegrityViolation { message })
}

#[derive(Clone, Debug)]
pub struct BreedingPlan {
    forw: Vec<Option<usize>>,
    back: Vec<Option<usize>>,
    children: Vec<Vec<Option<usize>>>,
    status: Vec<Class>,
    chainhd1: Option<usize>,
    chainhd2: Option<usize>,
}

fn append(
    s: usize,
    last: &mut Option<usize>,
    head: &mut Option<usize>,
    forw: &mut [Option<usize>],
    back: &mut [Option<usize>],
) {
    if let Some(l) = *last {
        debug_assert!(forw[l].is_none());
        forw[l] = Some(s);
    }
    forw[s] = None;
    back[s] = *last;
    *last = Some(s);
    if head.is_none() {
        *head = Some(s);
    }
}

impl BreedingPlan {
    /// Classifies every child and fills the per-parent child arrays.
    ///
    /// `num_children` must agree with the edges in `outcome`; the arrays are
    /// sized from it up front so nothing is allocated once workers start.
    pub fn build(outcome: &SelectionOutcome, num_children: &[usize]) -> Result<Self, PlanError> {
        let popsize = outcome.popsize();
        if num_children.len() != popsize {
            return Err(PlanError::ChildCountLength {
                expected: popsize,
                got: num_children.len(),
            });
        }
        let actual = outcome.num_children();
        if let Some(parent) = (0..popsize).find(|&p| actual[p] != num_children[p]) {
            return Err(PlanError::ChildCountMismatch {
                parent,
                declared: num_children[parent],
                actual: actual[parent],
            });
        }

        let mut plan = BreedingPlan {
            forw: vec![None; popsize],
            back: vec![None; popsize],
            children: num_children.iter().map(|&n| vec![None; n]).collect(),
            status: vec![Class::Claimed; popsize],
            chainhd1: None,
            chainhd2: None,
        };
        let mut last1 = None;
        let mut last2 = None;
        for (s, pair) in outcome.pairs().iter().enumerate() {
            if num_children[pair.mum] == 1 || num_children[pair.dad] == 1 {
                append(
                    s,
                    &mut last1,
                    &mut plan.chainhd1,
                    &mut plan.forw,
                    &mut plan.back,
                );
                plan.status[s] = Class::One;
            } else {
                append(
                    s,
                    &mut last2,
                    &mut plan.chainhd2,
                    &mut plan.forw,
                    &mut plan.back,
                );
                plan.status[s] = Class::TwoPlus;
            }
            plan.add_child(pair.mum, s);
            plan.add_child(pair.dad, s);
        }
        Ok(plan)
    }

    fn add_child(&mut self, parent: usize, s: usize) {
        let slot = self.children[parent]
            .iter_mut()
            .find(|c| c.is_none())
            .expect("child array sized from num_children");
        *slot = Some(s);
    }

    pub fn popsize(&self) -> usize {
        self.status.len()
    }

    pub fn status(&self, s: usize) -> Class {
        self.status[s]
    }

    pub fn forw(&self, s: usize) -> Option<usize> {
        self.forw[s]
    }

    pub fn back(&self, s: usize) -> Option<usize> {
        self.back[s]
    }

    pub fn chain1_head(&self) -> Option<usize> {
        self.chainhd1
    }

    pub fn chain2_head(&self) -> Option<usize> {
        self.chainhd2
    }

    /// Outstanding children of `parent`; `None` entries are already created.
    pub fn children_of(&self, parent: usize) -> &[Option<usize>] {
        &self.children[parent]
    }

    fn walk(&self, head: Option<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        let mut at = head;
        while let Some(x) = at {
            if out.len() > self.popsize() {
                break;
            }
            out.push(x);
            at = self.forw[x];
        }
        out
    }

    pub fn chain1(&self) -> Vec<usize> {
        self.walk(self.chainhd1)
    }

    pub fn chain2(&self) -> Vec<usize> {
        self.walk(self.chainhd2)
    }

    /// Takes the next child to create: class 1 first, then class 2+.
    pub fn claim_next(&mut self) -> Option<usize> {
        let i = if let Some(i) = self.chainhd1 {
            self.chainhd1 = self.forw[i];
            i
        } else {
            let i = self.chainhd2?;
            self.chainhd2 = self.forw[i];
            i
        };
        debug_assert!(matches!(self.status[i], Class::One | Class::TwoPlus));
        self.status[i] = Class::Claimed;
        Some(i)
    }

    /// Clears one occurrence of `s` from `parent`'s child array.
    ///
    /// A self-crossover child sits in its parent's array twice, so each call
    /// must remove exactly one entry.
    pub fn rem_child(&mut self, parent: usize, s: usize) -> Result<Removal, PlanError> {
        let mut target = Some(s);
        let mut found = false;
        let mut remaining = 0;
        let mut last = None;
        for entry in self.children[parent].iter_mut() {
            if target.is_some() && *entry == target {
                *entry = None;
                found = true;
                target = None;
            }
            if entry.is_some() {
                last = *entry;
                remaining += 1;
            }
        }
        if !found {
            return Err(PlanError::ChildNotFound { parent, child: s });
        }
        if remaining != 1 {
            last = None;
        }
        Ok(Removal { remaining, last })
    }

    /// Promotes `s` from class 2+ to the head of class 1.
    ///
    /// Does nothing when `s` is the child being created by the caller or has
    /// already left class 2+ (claimed by another worker or promoted before).
    pub fn move21(&mut self, active: usize, s: usize) {
        if active == s || self.status[s] != Class::TwoPlus {
            return;
        }
        self.status[s] = Class::One;
        let b = self.back[s];
        let f = self.forw[s];
        if self.chainhd2 == Some(s) {
            self.chainhd2 = f;
        }
        self.back[s] = None;
        if let Some(b) = b {
            self.forw[b] = f;
        }
        if let Some(f) = f {
            self.back[f] = b;
        }
        self.forw[s] = self.chainhd1;
        self.chainhd1 = Some(s);
    }

    /// True once every child has been claimed and removed from both parents.
    pub fn is_drained(&self) -> bool {
        self.chainhd1.is_none()
            && self.chainhd2.is_none()
            && self.children.iter().flatten().all(Option::is_none)
    }

    /// Walks both chains checking disjointness, status agreement, class 2+
    /// link symmetry and absence of cycles.
    pub fn check_integrity(&self) -> Result<(), IntegrityViolation> {
        let n = self.popsize();
        let mut on_chain = vec![0u8; n];

        let mut len1 = 0;
        let mut at = self.chainhd1;
        while let Some(x) = at {
            if x >= n {
                return violation(format!("class 1 chain reaches out-of-range index {x}"));
            }
            if on_chain[x] != 0 {
                return violation(format!("child {x} reached twice walking class 1 chain"));
            }
            if self.status[x] != Class::One {
                return violation(format!(
                    "child {x} on class 1 chain has status {:?}",
                    self.status[x]
                ));
            }
            on_chain[x] = 1;
            len1 += 1;
            at = self.forw[x];
        }

        let mut len2 = 0;
        let mut prev: Option<usize> = None;
        let mut at = self.chainhd2;
        while let Some(x) = at {
            if x >= n {
                return violation(format!("class 2+ chain reaches out-of-range index {x}"));
            }
            if on_chain[x] == 1 {
                return violation(format!("child {x} is on both chains"));
            }
            if on_chain[x] == 2 {
                return violation(format!("child {x} reached twice walking class 2+ chain"));
            }
            if self.status[x] != Class::TwoPlus {
                return violation(format!(
                    "child {x} on class 2+ chain has status {:?}",
                    self.status[x]
                ));
            }
            // the head's back link may be stale after a claim
            if let Some(b) = prev {
                if self.back[x] != Some(b) {
                    return violation(format!(
                        "class 2+ link broken: forw[{b}] = {x} but back[{x}] = {:?}",
                        self.back[x]
                    ));
                }
            }
            on_chain[x] = 2;
            len2 += 1;
            prev = Some(x);
            at = self.forw[x];
        }

        let count1 = self.status.iter().filter(|&&c| c == Class::One).count();
        let count2 = self.status.iter().filter(|&&c| c == Class::TwoPlus).count();
        if count1 != len1 {
            return violation(format!(
                "{count1} children in class 1 but chain holds {len1}"
            ));
        }
        if count2 != len2 {
            return violation(format!(
                "{count2} children in class 2+ but chain holds {len2}"
            ));
        }
        Ok(())
    }
}
