//! Fixed set of genome buffers recycled through an index free chain.
//!
//! A pool for a population of `M` individuals bred by `nthreads` workers
//! holds `M + 2 * max(1, nthreads)` slots. Slot indices start at 1; index 0
//! is reserved as the "no slot" sentinel and doubles as the end-of-chain
//! marker. Storage behind a slot is allocated the first time the slot is
//! handed out and is then recycled for the rest of the run.
//!
//! The pool itself is not synchronized. The engine keeps it behind the same
//! mutex that guards the breeding plan.

use std::fmt;
use std::ops::{Deref, DerefMut};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PoolError {
    #[error("invalid pool configuration: {0}")]
    Config(&'static str),
    #[error("ran out of genome buffers: capacity {capacity}, used {used}")]
    Exhausted { capacity: usize, used: usize },
    #[error("free chain corrupted: {0}")]
    Corrupt(String),
}

/// Index of a pool slot. `SlotId::NONE` (0) means "holds no buffer".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotId(u32);

impl SlotId {
    pub const NONE: SlotId = SlotId(0);

    pub fn new(index: usize) -> Self {
        SlotId(u32::try_from(index).expect("slot index fits in u32"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_none(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fixed-length opcode storage for one prefix-encoded tree, one byte per cell.
#[derive(Clone, PartialEq, Eq)]
pub struct GenomeBuffer {
    cells: Box<[u8]>,
}

impl GenomeBuffer {
    fn zeroed(len: usize) -> Self {
        GenomeBuffer {
            cells: vec![0u8; len].into_boxed_slice(),
        }
    }

    fn addr(&self) -> *const u8 {
        self.cells.as_ptr()
    }
}

impl fmt::Debug for GenomeBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GenomeBuffer({} cells)", self.cells.len())
    }
}

impl Deref for GenomeBuffer {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.cells
    }
}

impl DerefMut for GenomeBuffer {
    fn deref_mut(&mut self) -> &mut [u8] {
        &mut self.cells
    }
}

/// A checked-out slot: the slot index together with its storage.
///
/// Dropping a lease instead of handing it back to [`BufferPool::release`]
/// leaks the slot for the rest of the run.
#[derive(Debug)]
pub struct Lease {
    slot: SlotId,
    buffer: GenomeBuffer,
}

impl Lease {
    pub fn slot(&self) -> SlotId {
        self.slot
    }

    pub fn cells(&self) -> &[u8] {
        &self.buffer
    }

    pub fn cells_mut(&mut self) -> &mut [u8] {
        &mut self.buffer
    }
}

#[derive(Debug)]
enum Storage {
    Unallocated,
    Free(GenomeBuffer),
    Leased,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UsageStats {
    pub used: usize,
    pub max_used: usize,
    pub allocated_slots: usize,
}

#[derive(Debug)]
pub struct BufferPool {
    capacity: usize,
    buffer_bytes: usize,
    // index 0 unused in both
    storage: Vec<Storage>,
    chain: Vec<SlotId>,
    chainhead: SlotId,
    used: usize,
    max_used: usize,
    period_peak: usize,
    allocated_slots: usize,
}

/// Slots needed for `popsize` individuals bred by `nthreads` workers.
/// Serial mode (`nthreads == 0`) is sized like a single worker.
pub fn pool_capacity(popsize: usize, nthreads: usize) -> usize {
    popsize + 2 * nthreads.max(1)
}

impl BufferPool {
    pub fn new(popsize: usize, nthreads: usize, buffer_bytes: usize) -> Result<Self, PoolError> {
        if popsize == 0 {
            return Err(PoolError::Config("popsize must be at least 1"));
        }
        if buffer_bytes == 0 {
            return Err(PoolError::Config("buffer_bytes must be at least 1"));
        }
        let capacity = pool_capacity(popsize, nthreads);
        if u32::try_from(capacity).is_err() {
            return Err(PoolError::Config("pool capacity exceeds u32 slot indices"));
        }
        let mut chain = Vec::with_capacity(capacity + 1);
        chain.push(SlotId::NONE);
        chain.extend((2..=capacity).map(SlotId::new));
        chain.push(SlotId::NONE);
        let storage = (0..=capacity).map(|_| Storage::Unallocated).collect();
        Ok(BufferPool {
            capacity,
            buffer_bytes,
            storage,
            chain,
            chainhead: SlotId::new(1),
            used: 0,
            max_used: 0,
            period_peak: 0,
            allocated_slots: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn buffer_bytes(&self) -> usize {
        self.buffer_bytes
    }

    pub fn chainhead(&self) -> SlotId {
        self.chainhead
    }

    /// Successor of `slot` on the free chain. Only meaningful for free slots.
    pub fn next_free(&self, slot: SlotId) -> SlotId {
        self.chain[slot.index()]
    }

    /// Hands out the slot at the head of the free chain.
    ///
    /// Exhaustion means the breeding schedule broke its bound; the engine
    /// treats it as fatal.
    pub fn acquire(&mut self) -> Result<Lease, PoolError> {
        let slot = self.chainhead;
        if slot.is_none() {
            return Err(PoolError::Exhausted {
                capacity: self.capacity,
                used: self.used,
            });
        }
        let buffer = match std::mem::replace(&mut self.storage[slot.index()], Storage::Leased) {
            Storage::Unallocated => {
                self.allocated_slots += 1;
                GenomeBuffer::zeroed(self.buffer_bytes)
            }
            Storage::Free(buffer) => buffer,
            Storage::Leased => {
                return Err(PoolError::Corrupt(format!(
                    "slot {slot} is on the free chain but already leased"
                )))
            }
        };
        self.chainhead = self.chain[slot.index()];
        debug_assert!(self.chainhead.index() <= self.capacity);
        self.used += 1;
        self.max_used = self.max_used.max(self.used);
        self.period_peak = self.period_peak.max(self.used);
        Ok(Lease { slot, buffer })
    }

    /// Pushes the holder's slot back onto the head of the free chain and
    /// leaves the holder empty. Releasing an empty holder does nothing.
    pub fn release(&mut self, holder: &mut Option<Lease>) {
        let Some(Lease { slot, buffer }) = holder.take() else {
            return;
        };
        let id = slot.index();
        assert!(id >= 1 && id <= self.capacity, "slot {slot} out of range");
        assert!(
            matches!(self.storage[id], Storage::Leased),
            "slot {slot} released while not leased"
        );
        assert_eq!(
            buffer.len(),
            self.buffer_bytes,
            "foreign buffer returned to slot {slot}"
        );
        self.storage[id] = Storage::Free(buffer);
        self.chain[id] = self.chainhead;
        self.chainhead = slot;
        self.used -= 1;
    }

    pub fn usage_stats(&self) -> UsageStats {
        UsageStats {
            used: self.used,
            max_used: self.max_used,
            allocated_slots: self.allocated_slots,
        }
    }

    /// Starts a new measurement period for [`BufferPool::period_peak`].
    pub fn mark_period(&mut self) {
        self.period_peak = self.used;
    }

    /// Highest `used` value since the last [`BufferPool::mark_period`].
    pub fn period_peak(&self) -> usize {
        self.period_peak
    }

    /// Free slots in chain order, starting at the chain head.
    pub fn free_chain(&self) -> Vec<SlotId> {
        let mut out = Vec::new();
        let mut at = self.chainhead;
        while !at.is_none() && out.len() <= self.capacity {
            out.push(at);
            at = self.chain[at.index()];
        }
        out
    }

    /// Verifies that the free chain and the leased slots partition
    /// `1..=capacity` and agree with the usage counters.
    pub fn check_conservation(&self) -> Result<(), PoolError> {
        let mut seen = vec![false; self.capacity + 1];
        let mut free = 0usize;
        let mut at = self.chainhead;
        while !at.is_none() {
            let id = at.index();
            if id > self.capacity {
                return Err(PoolError::Corrupt(format!(
                    "chain reaches out-of-range slot {id}"
                )));
            }
            if seen[id] {
                return Err(PoolError::Corrupt(format!(
                    "slot {id} appears twice on the chain"
                )));
            }
            if matches!(self.storage[id], Storage::Leased) {
                return Err(PoolError::Corrupt(format!(
                    "leased slot {id} is on the free chain"
                )));
            }
            seen[id] = true;
            free += 1;
            at = self.chain[id];
        }
        let leased = self.storage[1..]
            .iter()
            .filter(|s| matches!(s, Storage::Leased))
            .count();
        if leased != self.used {
            return Err(PoolError::Corrupt(format!(
                "{leased} slots leased but used counter is {}",
                self.used
            )));
        }
        if free + self.used != self.capacity {
            return Err(PoolError::Corrupt(format!(
                "free {free} + used {} != capacity {}",
                self.used, self.capacity
            )));
        }
        if self.max_used > self.capacity || self.allocated_slots > self.max_used {
            return Err(PoolError::Corrupt(format!(
                "counters out of order: allocated {} max_used {} capacity {}",
                self.allocated_slots, self.max_used, self.capacity
            )));
        }
        Ok(())
    }

    /// Address of the storage behind a free slot, for reuse checks in tests.
    #[doc(hidden)]
    pub fn storage_addr(&self, slot: SlotId) -> Option<*const u8> {
        match &self.storage[slot.index()] {
            Storage::Free(b) => Some(b.addr()),
            _ => None,
        }
    }
}

impl Lease {
    #[doc(hidden)]
    pub fn storage_addr(&self) -> *const u8 {
        self.buffer.addr()
    }
}
