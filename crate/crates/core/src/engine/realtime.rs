//! Wall-clock execution over a shared [`TupleSpace`].
//!
//! One agent thread per in-flight mutation. For every step the agent takes
//! its data entry, takes the turn entry, takes `dop` processor entries
//! (chosen at random among those present), puts the turn back, sleeps for
//! the scaled occupancy, stamps the processors and writes everything back.
//! Timestamps are measured on the wall clock and converted back to
//! simulated milliseconds. Results are not deterministic.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use super::{check_matrix, occupancy, EngineError};
use crate::model::{
    Algorithm, DataEntry, Interval, LogRecord, Millis, ProcessorEntry, SampleMatrix, Scenario,
    TurnEntry,
};
use crate::sampling::RngStream;
use crate::tuplespace::{Entry, Template, TupleSpace};

/// Real milliseconds slept per simulated millisecond.
pub const DEFAULT_TIME_SCALE: f64 = 1e-3;

const FOREVER: Duration = Duration::from_secs(24 * 3600);

struct Shared<'a> {
    space: TupleSpace,
    scenario: &'a Scenario,
    matrix: &'a SampleMatrix,
    epoch: Instant,
    time_scale: f64,
}

impl Shared<'_> {
    fn now(&self) -> Millis {
        (self.epoch.elapsed().as_secs_f64() * 1e3 / self.time_scale).round() as Millis
    }

    fn take(&self, template: &Template, rng: Option<&mut RngStream>) -> Result<Entry, EngineError> {
        let got = match rng {
            Some(r) => self.space.take_random(template, FOREVER, r),
            None => self.space.take(template, FOREVER),
        };
        got.map_err(|e| EngineError::RealTime(e.to_string()))?
            .ok_or_else(|| EngineError::RealTime(format!("timed out waiting for {template:?}")))
    }

    fn put(&self, entry: impl Into<Entry>) -> Result<(), EngineError> {
        self.space
            .write(entry)
            .map_err(|e| EngineError::RealTime(e.to_string()))
    }

    /// Run all three steps of the mutation using matrix cell `cell` on `data_id`.
    fn mutate(&self, data_id: u32, cell: usize, rng: &mut RngStream) -> Result<(), EngineError> {
        let durations = self.matrix.cell(cell);
        for (i, spec) in self.scenario.steps.iter().enumerate() {
            let Entry::Data(mut data) = self.take(&Template::data(data_id), None)? else {
                unreachable!("template matches data entries only")
            };
            let turn = self.take(&Template::Turn, None)?;
            let mut procs = Vec::with_capacity(spec.dop as usize);
            for _ in 0..spec.dop {
                match self.take(&Template::ANY_PROCESSOR, Some(rng))? {
                    Entry::Processor(p) => procs.push(p),
                    _ => unreachable!("template matches processor entries only"),
                }
            }
            self.put(turn)?;
            let start_t = self.now();
            let hold = occupancy(durations[i], spec.dop) as f64 * self.time_scale;
            thread::sleep(Duration::from_secs_f64(hold / 1e3));
            let stop_t = self.now().max(start_t);
            let iv = Interval {
                start_t,
                stop_t,
                data_id,
                mutation: data.mutation + 1,
                step: spec.step_index,
            };
            for mut p in procs {
                p.intervals.push(iv);
                self.put(p)?;
            }
            if i == 2 {
                data.mutation += 1;
            }
            self.put(data)?;
        }
        Ok(())
    }
}

/// Execute `scenario` on pre-sampled durations, sleeping `time_scale` real
/// milliseconds per simulated millisecond. Records are sorted by processor,
/// then time, with times in simulated milliseconds since the run started.
pub fn run_scaled(
    scenario: &Scenario,
    matrix: &SampleMatrix,
    seed: u64,
    time_scale: f64,
) -> Result<Vec<LogRecord>, EngineError> {
    check_matrix(scenario, matrix)?;
    if !(time_scale > 0.0 && time_scale.is_finite()) {
        return Err(EngineError::RealTime(format!("bad time scale {time_scale}")));
    }
    let shared = Shared {
        space: TupleSpace::new(),
        scenario,
        matrix,
        epoch: Instant::now(),
        time_scale,
    };
    for j in 1..=scenario.eta {
        shared.put(DataEntry {
            data_id: j,
            mutation: 0,
        })?;
    }
    for p in 1..=scenario.phi {
        shared.put(ProcessorEntry::new(p))?;
    }
    shared.put(TurnEntry)?;

    let n = scenario.n_new as usize;
    let eta = scenario.eta as usize;
    let agent_rng = |j: usize, round: usize| {
        RngStream::new(seed ^ ((round as u64) << 32 | j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    };
    match scenario.algorithm {
        Algorithm::GenerationBased => {
            for b in 0..n / eta {
                thread::scope(|s| {
                    let handles: Vec<_> = (0..eta)
                        .map(|j| {
                            let shared = &shared;
                            s.spawn(move || {
                                shared.mutate(j as u32 + 1, b * eta + j, &mut agent_rng(j, b))
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .try_for_each(|h| h.join().expect("agent panicked"))
                })?;
            }
        }
        Algorithm::SteadyState => {
            let next = AtomicUsize::new(0);
            thread::scope(|s| {
                let handles: Vec<_> = (0..eta.min(n))
                    .map(|j| {
                        let (shared, next) = (&shared, &next);
                        s.spawn(move || {
                            let mut rng = agent_rng(j, 0);
                            loop {
                                let k = next.fetch_add(1, Ordering::SeqCst);
                                if k >= n {
                                    return Ok(());
                                }
                                shared.mutate(j as u32 + 1, k, &mut rng)?;
                            }
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .try_for_each(|h| h.join().expect("agent panicked"))
            })?;
        }
    }

    let mut records: Vec<LogRecord> = shared
        .space
        .take_all(&Template::ANY_PROCESSOR)
        .iter()
        .flat_map(|e| match e {
            Entry::Processor(p) => p.records().collect::<Vec<_>>(),
            _ => Vec::new(),
        })
        .collect();
    records.sort_unstable();
    Ok(records)
}
