//! Processor pool with serialized all-or-nothing acquisition.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::Millis;
use crate::sampling::RngStream;

/// An outstanding acquisition request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request<K> {
    pub key: K,
    pub count: u32,
    pub request_time: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grant<K> {
    pub key: K,
    pub procs: Vec<u32>,
    pub request_time: Millis,
    pub grant_time: Millis,
}

/// `phi` identical processors numbered `1..=phi`.
///
/// Requests are served strictly in order of `(request_time, requester)`: while
/// the head of the queue cannot be satisfied, nobody behind it is served. This
/// is the behaviour of a single turn token that a client holds until it has
/// collected all of its processors.
#[derive(Debug, Clone)]
pub struct ProcessorPool<K> {
    phi: u32,
    free: BTreeSet<u32>,
    queue: BTreeMap<(Millis, u64), Request<K>>,
}

impl<K: Copy> ProcessorPool<K> {
    pub fn new(phi: u32) -> Self {
        ProcessorPool {
            phi,
            free: (1..=phi).collect(),
            queue: BTreeMap::new(),
        }
    }

    pub fn phi(&self) -> u32 {
        self.phi
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Queue a request. `requester` breaks ties between equal request times;
    /// it must be unique among pending requests with that time.
    pub fn request(&mut self, requester: u64, key: K, count: u32, request_time: Millis) {
        assert!(
            count >= 1 && count <= self.phi,
            "request for {count} of {} processors",
            self.phi
        );
        let prev = self.queue.insert(
            (request_time, requester),
            Request {
                key,
                count,
                request_time,
            },
        );
        assert!(prev.is_none(), "duplicate requester {requester} at {request_time}");
    }

    /// Serve queued requests at time `now`, choosing processors uniformly at
    /// random among the free ones.
    pub fn grant(&mut self, now: Millis, rng: &mut RngStream) -> Vec<Grant<K>> {
        let mut out = Vec::new();
        while let Some(entry) = self.queue.first_entry() {
            let req = *entry.get();
            if req.request_time > now || req.count as usize > self.free.len() {
                break;
            }
            entry.remove();
            let mut free: Vec<u32> = self.free.iter().copied().collect();
            let mut procs = Vec::with_capacity(req.count as usize);
            for _ in 0..req.count {
                let i = rng.index(free.len());
                procs.push(free.swap_remove(i));
            }
            for p in &procs {
                self.free.remove(p);
            }
            out.push(Grant {
                key: req.key,
                procs,
                request_time: req.request_time,
                grant_time: now,
            });
        }
        out
    }

    pub fn release(&mut self, procs: &[u32]) {
        for &p in procs {
            assert!(p >= 1 && p <= self.phi, "processor {p} out of range");
            let fresh = self.free.insert(p);
            assert!(fresh, "processor {p} released twice");
        }
    }

    /// Mark processors busy without a request (for setting up a state).
    pub fn occupy(&mut self, procs: &[u32]) {
        for p in procs {
            assert!(self.free.remove(p), "processor {p} is not free");
        }
    }
}
