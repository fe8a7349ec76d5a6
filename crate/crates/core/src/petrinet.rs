//! Timed Petri nets with token timestamps.
//!
//! Every token carries the time at which it becomes available. A transition
//! is enabled once each input place holds a token; its enabling time is the
//! latest of the earliest available token in each input place. Firing
//! consumes the earliest token from every input place and puts one token
//! stamped `enabling_time + delay` on every output place.
//!
//! The timestamp type is generic; any ordered additive type works
//! (`u64`, `u32`, exact rationals, ...).

use std::fmt::{self, Debug, Display};
use std::io;
use std::ops::Add;

use num_traits::Zero;
use thiserror::Error;

/// Scalar usable as a token timestamp.
pub trait Timestamp: Copy + Ord + Zero + Add<Output = Self> + Debug + Display {}
impl<T: Copy + Ord + Zero + Add<Output = T> + Debug + Display> Timestamp for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaceId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionId(pub usize);

impl Display for TransitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PetriError {
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("transition `{0}` lists place `{1}` twice on one side")]
    DuplicateArc(String, String),
    #[error("transition `{0}` has no input places")]
    NoInputs(String),
    #[error("unknown transition {0}")]
    UnknownTransition(TransitionId),
    #[error("transition {0} is not enabled")]
    Disabled(TransitionId),
    #[error("firing cap of {0} exceeded; the net does not terminate")]
    FiringCapExceeded(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimedToken<T> {
    pub timestamp: T,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Place<T> {
    name: String,
    /// Ascending by timestamp.
    tokens: Vec<T>,
}

impl<T: Timestamp> Place<T> {
    fn push(&mut self, t: T) {
        let at = self.tokens.partition_point(|&x| x <= t);
        self.tokens.insert(at, t);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition<T> {
    pub name: String,
    pub inputs: Vec<PlaceId>,
    pub outputs: Vec<PlaceId>,
    pub delay: T,
}

/// How to choose among transitions sharing the minimal enabling time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    LowestId,
    HighestId,
}

/// One entry of a firing trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Firing<T> {
    pub transition: TransitionId,
    pub fire_time: T,
    /// One timestamp per output place, in arc order.
    pub produced: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedNet<T> {
    places: Vec<Place<T>>,
    transitions: Vec<Transition<T>>,
}

impl<T: Timestamp> TimedNet<T> {
    pub fn builder() -> NetBuilder<T> {
        NetBuilder::default()
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.places.iter().position(|p| p.name == name).map(PlaceId)
    }

    pub fn transition_id(&self, name: &str) -> Option<TransitionId> {
        self.transitions
            .iter()
            .position(|t| t.name == name)
            .map(TransitionId)
    }

    pub fn transition(&self, id: TransitionId) -> Result<&Transition<T>, PetriError> {
        self.transitions
            .get(id.0)
            .ok_or(PetriError::UnknownTransition(id))
    }

    pub fn transitions(&self) -> &[Transition<T>] {
        &self.transitions
    }

    /// Timestamps of the tokens in `place`, ascending.
    pub fn tokens(&self, place: PlaceId) -> &[T] {
        &self.places[place.0].tokens
    }

    pub fn tokens_named(&self, name: &str) -> Option<&[T]> {
        self.place_id(name).map(|p| self.tokens(p))
    }

    pub fn total_tokens(&self) -> usize {
        self.places.iter().map(|p| p.tokens.len()).sum()
    }

    pub fn add_token(&mut self, place: PlaceId, token: TimedToken<T>) {
        self.places[place.0].push(token.timestamp);
    }

    /// Earliest instant at which every input place offers a token, or `None`
    /// if some input place is empty.
    pub fn enabling_time(&self, id: TransitionId) -> Result<Option<T>, PetriError> {
        let tr = self.transition(id)?;
        let mut at = T::zero();
        for p in &tr.inputs {
            match self.places[p.0].tokens.first() {
                Some(&t) => at = at.max(t),
                None => return Ok(None),
            }
        }
        Ok(Some(at))
    }

    pub fn fire(&mut self, id: TransitionId) -> Result<Firing<T>, PetriError> {
        let fire_time = self.enabling_time(id)?.ok_or(PetriError::Disabled(id))?;
        let tr = &self.transitions[id.0];
        let stamp = fire_time + tr.delay;
        for p in &tr.inputs {
            self.places[p.0].tokens.remove(0);
        }
        let outputs = tr.outputs.clone();
        for p in &outputs {
            self.places[p.0].push(stamp);
        }
        Ok(Firing {
            transition: id,
            fire_time,
            produced: vec![stamp; outputs.len()],
        })
    }

    /// Repeatedly fire the transition with the smallest enabling time until
    /// nothing is enabled. Fails once more than `max_firings` firings happen.
    pub fn run_to_quiescence(
        &mut self,
        tiebreak: TieBreak,
        max_firings: usize,
    ) -> Result<Vec<Firing<T>>, PetriError> {
        let mut trace = Vec::new();
        loop {
            let mut best: Option<(T, TransitionId)> = None;
            for i in 0..self.transitions.len() {
                let id = TransitionId(i);
                let Some(at) = self.enabling_time(id)? else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((b, _)) => match tiebreak {
                        TieBreak::LowestId => at < b,
                        TieBreak::HighestId => at <= b,
                    },
                };
                if better {
                    best = Some((at, id));
                }
            }
            let Some((_, id)) = best else {
                return Ok(trace);
            };
            if trace.len() == max_firings {
                return Err(PetriError::FiringCapExceeded(max_firings));
            }
            trace.push(self.fire(id)?);
        }
    }

    /// Write a trace as CSV: `transition,fire_time,out_timestamps`, with output
    /// timestamps joined by `;`.
    pub fn write_trace_csv<W: io::Write>(
        &self,
        trace: &[Firing<T>],
        out: W,
    ) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["transition", "fire_time", "out_timestamps"])?;
        for f in trace {
            let outs = f
                .produced
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                self.transitions[f.transition.0].name.clone(),
                f.fire_time.to_string(),
                outs,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds a [`TimedNet`] by name.
#[derive(Debug, Clone)]
pub struct NetBuilder<T> {
    places: Vec<(String, Vec<T>)>,
    transitions: Vec<(String, Vec<String>, Vec<String>, T)>,
}

impl<T> Default for NetBuilder<T> {
    fn default() -> Self {
        NetBuilder {
            places: Vec::new(),
            transitions: Vec::new(),
        }
    }
}

impl<T: Timestamp> NetBuilder<T> {
    pub fn place(mut self, name: &str, tokens: impl IntoIterator<Item = T>) -> Self {
        self.places.push((name.to_owned(), tokens.into_iter().collect()));
        self
    }

    /// Transitions are numbered in the order they are added.
    pub fn transition(mut self, name: &str, inputs: &[&str], outputs: &[&str], delay: T) -> Self {
        self.transitions.push((
            name.to_owned(),
            inputs.iter().map(|s| s.to_string()).collect(),
            outputs.iter().map(|s| s.to_string()).collect(),
            delay,
        ));
        self
    }

    pub fn build(self) -> Result<TimedNet<T>, PetriError> {
        let mut places: Vec<Place<T>> = Vec::with_capacity(self.places.len());
        for (name, mut tokens) in self.places {
            if places.iter().any(|p| p.name == name) {
                return Err(PetriError::DuplicateName(name));
            }
            tokens.sort();
            places.push(Place { name, tokens });
        }
        let lookup = |places: &[Place<T>], tr: &str, names: &[String]| {
            let mut ids: Vec<PlaceId> = Vec::with_capacity(names.len());
            for n in names {
                let id = places
                    .iter()
                    .position(|p| &p.name == n)
                    .map(PlaceId)
                    .ok_or_else(|| PetriError::UnknownPlace(n.clone()))?;
                if ids.contains(&id) {
                    return Err(PetriError::DuplicateArc(tr.to_owned(), n.clone()));
                }
                ids.push(id);
            }
            Ok(ids)
        };
        let mut transitions: Vec<Transition<T>> = Vec::with_capacity(self.transitions.len());
        for (name, ins, outs, delay) in self.transitions {
            if transitions.iter().any(|t| t.name == name) {
                return Err(PetriError::DuplicateName(name));
            }
            if ins.is_empty() {
                return Err(PetriError::NoInputs(name));
            }
            let inputs = lookup(&places, &name, &ins)?;
            let outputs = lookup(&places, &name, &outs)?;
            transitions.push(Transition {
                name,
                inputs,
                outputs,
                delay,
            });
        }
        Ok(TimedNet {
            places,
            transitions,
        })
    }
}

/// Tasks arriving at `arrivals` served by `resources` identical resources
/// with processing time `delay`. Transitions are `start01, start02, ...`
/// followed by `finish01, finish02, ...`; completed tasks land in `output`.
pub fn resource_net<T: Timestamp>(
    arrivals: &[T],
    resources: usize,
    delay: T,
) -> Result<TimedNet<T>, PetriError> {
    let mut b = TimedNet::builder()
        .place("input", arrivals.iter().copied())
        .place("output", []);
    for r in 1..=resources {
        b = b
            .place(&format!("idle{r:02}"), [T::zero()])
            .place(&format!("busy{r:02}"), []);
    }
    for r in 1..=resources {
        let (idle, busy) = (format!("idle{r:02}"), format!("busy{r:02}"));
        b = b.transition(&format!("start{r:02}"), &["input", &idle], &[&busy], delay);
    }
    for r in 1..=resources {
        let (idle, busy) = (format!("idle{r:02}"), format!("busy{r:02}"));
        b = b.transition(&format!("finish{r:02}"), &[&busy], &[&idle, "output"], T::zero());
    }
    b.build()
}

/// Busy intervals `[start, finish]` per resource, recovered from the `startNN`
/// firings of a trace over [`resource_net`].
pub fn busy_intervals<T: Timestamp>(net: &TimedNet<T>, trace: &[Firing<T>]) -> Vec<Vec<(T, T)>> {
    let mut out: Vec<Vec<(T, T)>> = Vec::new();
    for f in trace {
        let tr = &net.transitions[f.transition.0];
        if let Some(n) = tr.name.strip_prefix("start") {
            let r: usize = n.parse().expect("start transitions are numbered");
            if out.len() < r {
                out.resize(r, Vec::new());
            }
            out[r - 1].push((f.fire_time, f.fire_time + tr.delay));
        }
    }
    out
}
