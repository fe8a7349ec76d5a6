//! Shared domain types and scenario validation.

use std::fmt;

/// Simulated milliseconds.
pub type Millis = u64;

/// Standard deviation at or below which a step is sampled as its mean.
pub const DEGENERATE_SIGMA: f64 = 1e-9;

/// Timing distribution and degree of parallelism for one mutation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSpec {
    /// 1, 2 or 3.
    pub step_index: u8,
    pub mu: f64,
    pub sigma: f64,
    /// Informational only; samples are not truncated to the range.
    pub range_lo: Millis,
    pub range_hi: Millis,
    /// Processors held simultaneously while the step runs.
    pub dop: u32,
}

impl StepSpec {
    /// Measured timing for `step` (1..=3) with the given degree of parallelism.
    ///
    /// # Panics
    /// If `step` is not 1, 2 or 3.
    pub fn canonical(step: u8, dop: u32) -> Self {
        let (mu, sigma, lo, hi) = match step {
            1 => (12_600.0, 3_600.0, 10_800, 14_400),
            2 => (302_400.0, 86_400.0, 259_200, 345_600),
            3 => (32_400.0, 7_200.0, 28_800, 36_000),
            _ => panic!("step index must be 1, 2 or 3, got {step}"),
        };
        StepSpec {
            step_index: step,
            mu,
            sigma,
            range_lo: lo,
            range_hi: hi,
            dop,
        }
    }

    /// The three canonical steps with degrees of parallelism `dops`.
    pub fn canonical_set(dops: [u32; 3]) -> [StepSpec; 3] {
        [
            StepSpec::canonical(1, dops[0]),
            StepSpec::canonical(2, dops[1]),
            StepSpec::canonical(3, dops[2]),
        ]
    }

    /// Same step with the spread collapsed, so every sample equals the mean.
    pub fn degenerate(mut self) -> Self {
        self.sigma = DEGENERATE_SIGMA;
        self
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma <= DEGENERATE_SIGMA
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    GenerationBased,
    SteadyState,
}

impl Algorithm {
    /// Short label used in file names and CSV group columns.
    pub fn short(self) -> &'static str {
        match self {
            Algorithm::GenerationBased => "GB",
            Algorithm::SteadyState => "ST",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::GenerationBased => "generation-based",
            Algorithm::SteadyState => "steady-state",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gb" | "generation-based" | "generation" | "generationbased" => {
                Ok(Algorithm::GenerationBased)
            }
            "st" | "steady-state" | "steady" | "steadystate" => Ok(Algorithm::SteadyState),
            other => Err(format!("unknown algorithm `{other}` (expected gb or st)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Pure discrete-event simulation on a virtual clock.
    #[default]
    VirtualTime,
    /// Agents sleep through each held interval over a shared tuple space.
    ScaledRealTime,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "virtual" | "virtual-time" | "virtualtime" => Ok(Mode::VirtualTime),
            "scaled" | "scaled-real-time" | "scaledrealtime" => Ok(Mode::ScaledRealTime),
            other => Err(format!("unknown mode `{other}` (expected virtual or scaled)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::VirtualTime => "virtual",
            Mode::ScaledRealTime => "scaled",
        })
    }
}

/// Full parameter set for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Given individuals mutated concurrently.
    pub eta: u32,
    /// New individuals to produce.
    pub n_new: u32,
    /// Processors in the cluster.
    pub phi: u32,
    pub steps: [StepSpec; 3],
    pub algorithm: Algorithm,
    pub seed: u64,
    pub mode: Mode,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        eta: u32,
        n_new: u32,
        phi: u32,
        dops: [u32; 3],
        algorithm: Algorithm,
    ) -> Self {
        Scenario {
            name: name.into(),
            eta,
            n_new,
            phi,
            steps: StepSpec::canonical_set(dops),
            algorithm,
            seed: 0,
            mode: Mode::VirtualTime,
        }
    }

    /// Built-in scenarios: `e00`, `e02`, `e12`, `e14` and the single-processor-per-step
    /// comparison setup `table01`.
    pub fn preset(name: &str) -> Option<Scenario> {
        let (eta, n_new, phi, dops) = match name {
            "e00" => (8, 80, 76, [10, 2, 2]),
            "e02" => (8, 80, 76, [10, 10, 2]),
            "e12" => (8, 80, 128, [10, 2, 2]),
            "e14" => (8, 80, 128, [10, 10, 2]),
            "table01" => (10, 100, 10, [1, 1, 1]),
            _ => return None,
        };
        Some(Scenario::new(name, eta, n_new, phi, dops, Algorithm::GenerationBased))
    }

    pub const PRESETS: [&'static str; 5] = ["e00", "e02", "e12", "e14", "table01"];

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Collapse every step to its mean duration.
    pub fn degenerate(mut self) -> Self {
        for s in &mut self.steps {
            *s = s.degenerate();
        }
        self
    }

    pub fn dops(&self) -> [u32; 3] {
        [self.steps[0].dop, self.steps[1].dop, self.steps[2].dop]
    }

    /// Number of sample-matrix batches needed to cover `n_new` mutations.
    pub fn batches(&self) -> usize {
        (self.n_new as usize).div_ceil(self.eta.max(1) as usize)
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        validate(self)
    }
}

/// A broken scenario invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EtaZero,
    NewIndividualsZero,
    ProcessorsZero,
    EtaExceedsProcessors { eta: u32, phi: u32 },
    NotDivisible { n_new: u32, eta: u32 },
    StepIndexMismatch { position: usize, step_index: u8 },
    DopZero { step: u8 },
    DopExceedsProcessors { step: u8, dop: u32, phi: u32 },
    NonPositiveSigma { step: u8, sigma: f64 },
    MeanOutsideRange { step: u8, mu: f64, lo: Millis, hi: Millis },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EtaZero => write!(f, "eta must be at least 1"),
            Violation::NewIndividualsZero => write!(f, "N must be at least 1"),
            Violation::ProcessorsZero => write!(f, "phi must be at least 1"),
            Violation::EtaExceedsProcessors { eta, phi } => {
                write!(f, "eta exceeds processors (eta={eta}, phi={phi})")
            }
            Violation::NotDivisible { n_new, eta } => {
                write!(f, "N not divisible by eta (N={n_new}, eta={eta})")
            }
            Violation::StepIndexMismatch { position, step_index } => write!(
                f,
                "step at position {} carries index {step_index}",
                position + 1
            ),
            Violation::DopZero { step } => write!(f, "dop of step {step} must be at least 1"),
            Violation::DopExceedsProcessors { step, dop, phi } => {
                write!(f, "dop exceeds processors (step {step}: dop={dop}, phi={phi})")
            }
            Violation::NonPositiveSigma { step, sigma } => {
                write!(f, "sigma of step {step} must be positive, got {sigma}")
            }
            Violation::MeanOutsideRange { step, mu, lo, hi } => {
                write!(f, "mean of step {step} ({mu}) lies outside [{lo}, {hi}]")
            }
        }
    }
}

/// Check every scenario invariant and report all violations.
pub fn validate(scenario: &Scenario) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if scenario.eta == 0 {
        out.push(Violation::EtaZero);
    }
    if scenario.n_new == 0 {
        out.push(Violation::NewIndividualsZero);
    }
    if scenario.phi == 0 {
        out.push(Violation::ProcessorsZero);
    }
    if scenario.eta > scenario.phi {
        out.push(Violation::EtaExceedsProcessors {
            eta: scenario.eta,
            phi: scenario.phi,
        });
    }
    if scenario.algorithm == Algorithm::GenerationBased
        && scenario.eta > 0
        && !scenario.n_new.is_multiple_of(scenario.eta)
    {
        out.push(Violation::NotDivisible {
            n_new: scenario.n_new,
            eta: scenario.eta,
        });
    }
    for (position, s) in scenario.steps.iter().enumerate() {
        if s.step_index as usize != position + 1 {
            out.push(Violation::StepIndexMismatch {
                position,
                step_index: s.step_index,
            });
        }
        if s.dop == 0 {
            out.push(Violation::DopZero { step: s.step_index });
        } else if s.dop > scenario.phi {
            out.push(Violation::DopExceedsProcessors {
                step: s.step_index,
                dop: s.dop,
                phi: scenario.phi,
            });
        }
        if !(s.sigma > 0.0) {
            out.push(Violation::NonPositiveSigma {
                step: s.step_index,
                sigma: s.sigma,
            });
        }
        if !(s.range_lo as f64 <= s.mu && s.mu <= s.range_hi as f64) {
            out.push(Violation::MeanOutsideRange {
                step: s.step_index,
                mu: s.mu,
                lo: s.range_lo,
                hi: s.range_hi,
            });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// One processor busy interval as written to the raw log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogRecord {
    pub proc_id: u32,
    pub start_t: Millis,
    pub stop_t: Millis,
    pub data_id: u32,
    pub mutation: u32,
    pub step: u8,
}

impl LogRecord {
    pub fn used(&self) -> Millis {
        self.stop_t - self.start_t
    }
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ProcID: {}; start_t: {}; stop_t: {}; data_id: {}; mutation: {}; step: {}",
            self.proc_id, self.start_t, self.stop_t, self.data_id, self.mutation, self.step
        )
    }
}

/// Step durations for `batches × eta` mutations, row-major by batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMatrix {
    eta: usize,
    cells: Vec<[Millis; 3]>,
}

impl SampleMatrix {
    /// Returns `None` if `eta` is zero, `cells` is empty, or the length is not a
    /// multiple of `eta`.
    pub fn new(eta: usize, cells: Vec<[Millis; 3]>) -> Option<Self> {
        if eta == 0 || cells.is_empty() || !cells.len().is_multiple_of(eta) {
            return None;
        }
        Some(SampleMatrix { eta, cells })
    }

    /// Matrix whose every cell is `[t1, t2, t3]`.
    pub fn constant(batches: usize, eta: usize, cell: [Millis; 3]) -> Self {
        assert!(batches >= 1 && eta >= 1);
        SampleMatrix {
            eta,
            cells: vec![cell; batches * eta],
        }
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn batches(&self) -> usize {
        self.cells.len() / self.eta
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn batch(&self, b: usize) -> &[[Millis; 3]] {
        &self.cells[b * self.eta..(b + 1) * self.eta]
    }

    pub fn iter_batches(&self) -> impl Iterator<Item = &[[Millis; 3]]> {
        self.cells.chunks_exact(self.eta)
    }

    /// Durations of the `k`-th mutation in start order.
    pub fn cell(&self, k: usize) -> [Millis; 3] {
        self.cells[k]
    }

    pub fn cells(&self) -> &[[Millis; 3]] {
        &self.cells
    }

    /// Multiply every duration by `k`.
    pub fn scaled(&self, k: Millis) -> Self {
        SampleMatrix {
            eta: self.eta,
            cells: self
                .cells
                .iter()
                .map(|c| [c[0] * k, c[1] * k, c[2] * k])
                .collect(),
        }
    }
}

/// An individual in the object space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DataEntry {
    pub data_id: u32,
    /// Completed mutations so far.
    pub mutation: u32,
}

/// A busy interval stored on a processor entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    pub start_t: Millis,
    pub stop_t: Millis,
    pub data_id: u32,
    pub mutation: u32,
    pub step: u8,
}

/// A processor in the object space together with its busy history.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProcessorEntry {
    pub proc_id: u32,
    pub intervals: Vec<Interval>,
}

impl ProcessorEntry {
    pub fn new(proc_id: u32) -> Self {
        ProcessorEntry {
            proc_id,
            intervals: Vec::new(),
        }
    }

    pub fn records(&self) -> impl Iterator<Item = LogRecord> + '_ {
        self.intervals.iter().map(move |iv| LogRecord {
            proc_id: self.proc_id,
            start_t: iv.start_t,
            stop_t: iv.stop_t,
            data_id: iv.data_id,
            mutation: iv.mutation,
            step: iv.step,
        })
    }
}

/// Singleton marker serializing multi-processor acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TurnEntry;
