//! Scenario execution.
//!
//! A mutation runs steps 1, 2 and 3 back to back. Step `i` with duration `t`
//! acquires `dop_i` processors all at once, holds them for `ceil(t / dop_i)`
//! milliseconds, then releases them and writes one [`LogRecord`] per
//! processor.
//!
//! Generation-based runs start `eta` mutations together and start the next
//! batch only when the whole batch has finished. Steady-state runs keep `eta`
//! mutations in flight: whenever one finishes, the same individual is
//! selected and mutated again until `N` mutations have been started.
//! Simultaneous steady-state completions are handled in random order.
//!
//! The `k`-th mutation to start (counting from zero) takes its durations
//! from cell `k` of the [`SampleMatrix`], so both algorithms see the same
//! work when given the same matrix.

mod pool;
pub mod realtime;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Algorithm, LogRecord, Millis, Mode, SampleMatrix, Scenario, Violation};
use crate::sampling::{sample_matrix, RngStream};

pub use pool::{Grant, ProcessorPool, Request};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid scenario: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("sample matrix is {batches}x{eta} but the scenario needs eta={want_eta} and {want} mutations")]
    MatrixShape {
        eta: usize,
        batches: usize,
        want_eta: usize,
        want: usize,
    },
    #[error("deadlock at t={time}: {unfinished} mutations unfinished and no pending events")]
    Deadlock { time: Millis, unfinished: usize },
    #[error("real-time execution failed: {0}")]
    RealTime(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Occupancy of one processor for a step of duration `t` split over `dop`.
pub fn occupancy(t: Millis, dop: u32) -> Millis {
    t.div_ceil(dop as Millis)
}

/// `max(stop_t) - min(start_t)`, or 0 for an empty log.
pub fn makespan(records: &[LogRecord]) -> Millis {
    let lo = records.iter().map(|r| r.start_t).min();
    let hi = records.iter().map(|r| r.stop_t).max();
    match (lo, hi) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => 0,
    }
}

/// Sample durations for `scenario` and execute it.
pub fn run(scenario: &Scenario, rng: &mut RngStream) -> Result<Vec<LogRecord>, EngineError> {
    scenario.validate().map_err(EngineError::Invalid)?;
    let matrix = sample_matrix(
        scenario.eta as usize,
        scenario.batches(),
        &scenario.steps,
        rng,
    );
    match scenario.mode {
        Mode::VirtualTime => run_with_matrix(scenario, &matrix, rng),
        Mode::ScaledRealTime => realtime::run_scaled(
            scenario,
            &matrix,
            rng.next_u64_value(),
            realtime::DEFAULT_TIME_SCALE,
        ),
    }
}

fn check_matrix(scenario: &Scenario, matrix: &SampleMatrix) -> Result<(), EngineError> {
    scenario.validate().map_err(EngineError::Invalid)?;
    if matrix.eta() != scenario.eta as usize || matrix.len() < scenario.n_new as usize {
        return Err(EngineError::MatrixShape {
            eta: matrix.eta(),
            batches: matrix.batches(),
            want_eta: scenario.eta as usize,
            want: scenario.n_new as usize,
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Flight {
    data_id: u32,
    mutation: u32,
    durations: [Millis; 3],
    /// Index of the step currently requested or running.
    step: usize,
    procs: Vec<u32>,
    start: Millis,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    matrix: &'a SampleMatrix,
    pool: ProcessorPool<usize>,
    flights: Vec<Flight>,
    events: BinaryHeap<Reverse<(Millis, u64, usize)>>,
    seq: u64,
    records: Vec<LogRecord>,
    started: usize,
    finished: usize,
    in_batch: usize,
}

impl Sim<'_> {
    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn request_step(&mut self, flight: usize, now: Millis) {
        let dop = self.scenario.steps[self.flights[flight].step].dop;
        let seq = self.next_seq();
        self.pool.request(seq, flight, dop, now);
    }

    fn start_mutation(&mut self, data_id: u32, mutation: u32, now: Millis) {
        let durations = self.matrix.cell(self.started);
        self.started += 1;
        self.flights.push(Flight {
            data_id,
            mutation,
            durations,
            step: 0,
            procs: Vec::new(),
            start: now,
        });
        self.request_step(self.flights.len() - 1, now);
    }

    fn start_batch(&mut self, now: Millis) {
        let batch = (self.started / self.scenario.eta as usize) as u32;
        for j in 1..=self.scenario.eta {
            self.start_mutation(j, batch + 1, now);
        }
        self.in_batch = self.scenario.eta as usize;
    }

    fn grant(&mut self, now: Millis, rng: &mut RngStream) {
        for g in self.pool.grant(now, rng) {
            let f = &mut self.flights[g.key];
            let dop = self.scenario.steps[f.step].dop;
            f.procs = g.procs;
            f.start = now;
            let stop = now + occupancy(f.durations[f.step], dop);
            self.seq += 1;
            self.events.push(Reverse((stop, self.seq, g.key)));
        }
    }

    /// Finish the running step of `flight`. Returns true if the mutation is complete.
    fn complete_step(&mut self, flight: usize, now: Millis) -> bool {
        let f = &mut self.flights[flight];
        let procs = std::mem::take(&mut f.procs);
        for &p in &procs {
            self.records.push(LogRecord {
                proc_id: p,
                start_t: f.start,
                stop_t: now,
                data_id: f.data_id,
                mutation: f.mutation,
                step: f.step as u8 + 1,
            });
        }
        self.pool.release(&procs);
        f.step += 1;
        if f.step < 3 {
            self.request_step(flight, now);
            false
        } else {
            true
        }
    }
}

/// Execute `scenario` in virtual time on pre-sampled durations. `rng` drives
/// processor choice and the order of simultaneous steady-state selections.
///
/// Records are sorted by processor, then time.
pub fn run_with_matrix(
    scenario: &Scenario,
    matrix: &SampleMatrix,
    rng: &mut RngStream,
) -> Result<Vec<LogRecord>, EngineError> {
    check_matrix(scenario, matrix)?;
    let n = scenario.n_new as usize;
    let mut sim = Sim {
        scenario,
        matrix,
        pool: ProcessorPool::new(scenario.phi),
        flights: Vec::with_capacity(n),
        events: BinaryHeap::new(),
        seq: 0,
        records: Vec::with_capacity(n * scenario.dops().iter().sum::<u32>() as usize),
        started: 0,
        finished: 0,
        in_batch: 0,
    };
    match scenario.algorithm {
        Algorithm::GenerationBased => sim.start_batch(0),
        Algorithm::SteadyState => {
            for j in 1..=scenario.eta.min(scenario.n_new) {
                sim.start_mutation(j, 1, 0);
            }
        }
    }
    let mut now = 0;
    sim.grant(now, rng);
    let mut done = Vec::new();
    while let Some(&Reverse((t, _, _))) = sim.events.peek() {
        now = t;
        done.clear();
        while let Some(&Reverse((t, _, flight))) = sim.events.peek() {
            if t != now {
                break;
            }
            sim.events.pop();
            if sim.complete_step(flight, now) {
                done.push(flight);
            }
        }
        sim.finished += done.len();
        match scenario.algorithm {
            Algorithm::GenerationBased => {
                sim.in_batch -= done.len();
                if sim.in_batch == 0 && sim.started < n {
                    sim.start_batch(now);
                }
            }
            Algorithm::SteadyState => {
                if done.len() > 1 {
                    done.shuffle(rng);
                }
                for &flight in &done {
                    if sim.started < n {
                        let f = &sim.flights[flight];
                        let (data_id, mutation) = (f.data_id, f.mutation + 1);
                        sim.start_mutation(data_id, mutation, now);
                    }
                }
            }
        }
        sim.grant(now, rng);
    }
    if sim.finished != n {
        return Err(EngineError::Deadlock {
            time: now,
            unfinished: n - sim.finished,
        });
    }
    let mut records = sim.records;
    records.sort_unstable();
    Ok(records)
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub makespan: Millis,
    pub records: Vec<LogRecord>,
}

/// Run `replications` independent replications; replication `r` is seeded with
/// `base_seed + r`. Replications run in parallel; results are in index order.
pub fn run_replications(
    scenario: &Scenario,
    replications: usize,
    base_seed: u64,
) -> Result<Vec<Replication>, EngineError> {
    scenario.validate().map_err(EngineError::Invalid)?;
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let seed = base_seed.wrapping_add(r as u64);
            let records = run(scenario, &mut RngStream::new(seed))?;
            Ok(Replication {
                index: r,
                seed,
                makespan: makespan(&records),
                records,
            })
        })
        .collect()
}
