//! Prefix-encoded trees: random generation, subtree bounds and crossover.

use rand::Rng;

use super::problem::Problem;

/// Attempts at finding crossover points whose child fits the buffer before
/// falling back to a copy of mum.
pub const CROSSOVER_ATTEMPTS: usize = 10;

/// Largest tree of the given depth for a problem of the given max arity.
pub fn max_tree_len(depth: usize, max_arity: usize) -> usize {
    if max_arity <= 1 {
        return depth;
    }
    // 1 + a + a^2 + ... + a^(depth-1)
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(max_arity);
    }
    total
}

/// Index one past the end of the subtree rooted at `start`.
pub fn subtree_end<P: Problem + ?Sized>(problem: &P, tree: &[u8], start: usize) -> usize {
    let mut need = 1usize;
    let mut at = start;
    while need > 0 {
        need = need - 1 + problem.arity(tree[at]);
        at += 1;
    }
    at
}

/// True when `tree` is exactly one complete prefix expression.
pub fn is_complete<P: Problem + ?Sized>(problem: &P, tree: &[u8]) -> bool {
    let ops = problem.num_functions() + problem.num_terminals();
    let mut need = 1usize;
    for (i, &op) in tree.iter().enumerate() {
        if op >= ops || need == 0 {
            return false;
        }
        need = need - 1 + problem.arity(op);
        if need == 0 {
            return i + 1 == tree.len();
        }
    }
    false
}

/// Grows a random tree into `buf` and returns its length.
///
/// Nodes at the depth limit are terminals; above it every opcode is equally
/// likely. `buf` must hold [`max_tree_len`] cells for `depth_limit`.
pub fn random_tree<P: Problem + ?Sized, R: Rng + ?Sized>(
    problem: &P,
    rng: &mut R,
    depth_limit: usize,
    buf: &mut [u8],
) -> usize {
    assert!(depth_limit >= 1, "depth limit must be at least 1");
    fn grow<P: Problem + ?Sized, R: Rng + ?Sized>(
        problem: &P,
        rng: &mut R,
        depth_left: usize,
        buf: &mut [u8],
        at: usize,
    ) -> usize {
        let nf = problem.num_functions();
        let nt = problem.num_terminals();
        let op = if depth_left <= 1 {
            nf + rng.gen_range(0..nt)
        } else {
            rng.gen_range(0..nf + nt)
        };
        buf[at] = op;
        let mut next = at + 1;
        for _ in 0..problem.arity(op) {
            next = grow(problem, rng, depth_left - 1, buf, next);
        }
        next
    }
    grow(problem, rng, depth_limit, buf, 0)
}

/// Writes one child into `child`: mum with one random subtree replaced by a
/// random subtree of dad. Returns the child's length.
///
/// Parents are only read. When no attempt yields a child that fits `child`,
/// mum is copied unchanged.
pub fn subtree_crossover<P: Problem + ?Sized, R: Rng + ?Sized>(
    problem: &P,
    mum: &[u8],
    dad: &[u8],
    child: &mut [u8],
    rng: &mut R,
) -> usize {
    for _ in 0..CROSSOVER_ATTEMPTS {
        let mum_at = rng.gen_range(0..mum.len());
        let mum_end = subtree_end(problem, mum, mum_at);
        let dad_at = rng.gen_range(0..dad.len());
        let dad_end = subtree_end(problem, dad, dad_at);
        let graft = dad_end - dad_at;
        let len = mum_at + graft + (mum.len() - mum_end);
        if len <= child.len() {
            child[..mum_at].copy_from_slice(&mum[..mum_at]);
            child[mum_at..mum_at + graft].copy_from_slice(&dad[dad_at..dad_end]);
            child[mum_at + graft..len].copy_from_slice(&mum[mum_end..]);
            return len;
        }
    }
    child[..mum.len()].copy_from_slice(mum);
    mum.len()
}
