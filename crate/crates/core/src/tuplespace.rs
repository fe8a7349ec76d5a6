//! In-memory object space with template-matched `write`, `read` and `take`.
//!
//! Templates match exactly on the fields they specify and ignore the rest.
//! Blocking requests wait on a condition variable. A written entry is handed
//! to waiting takers in the order their requests arrived; waiting readers
//! matching the entry receive a copy first.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::model::{DataEntry, ProcessorEntry, TurnEntry};
use crate::sampling::RngStream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entry {
    Data(DataEntry),
    Processor(ProcessorEntry),
    Turn(TurnEntry),
}

impl Entry {
    pub fn kind(&self) -> EntryKind {
        match self {
            Entry::Data(_) => EntryKind::Data,
            Entry::Processor(_) => EntryKind::Processor,
            Entry::Turn(_) => EntryKind::Turn,
        }
    }
}

impl From<DataEntry> for Entry {
    fn from(e: DataEntry) -> Self {
        Entry::Data(e)
    }
}

impl From<ProcessorEntry> for Entry {
    fn from(e: ProcessorEntry) -> Self {
        Entry::Processor(e)
    }
}

impl From<TurnEntry> for Entry {
    fn from(e: TurnEntry) -> Self {
        Entry::Turn(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntryKind {
    Data,
    Processor,
    Turn,
}

/// Entry kind plus optional exact-match field constraints. Ids are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Data {
        data_id: Option<u32>,
        mutation: Option<u32>,
    },
    Processor {
        proc_id: Option<u32>,
    },
    Turn,
}

impl Template {
    pub const ANY_DATA: Template = Template::Data {
        data_id: None,
        mutation: None,
    };
    pub const ANY_PROCESSOR: Template = Template::Processor { proc_id: None };

    pub fn data(data_id: u32) -> Self {
        Template::Data {
            data_id: Some(data_id),
            mutation: None,
        }
    }

    pub fn processor(proc_id: u32) -> Self {
        Template::Processor {
            proc_id: Some(proc_id),
        }
    }

    pub fn kind(&self) -> EntryKind {
        match self {
            Template::Data { .. } => EntryKind::Data,
            Template::Processor { .. } => EntryKind::Processor,
            Template::Turn => EntryKind::Turn,
        }
    }

    fn check(&self) -> Result<(), SpaceError> {
        match *self {
            Template::Data {
                data_id: Some(0), ..
            } => Err(SpaceError::MalformedTemplate("data_id is 1-based")),
            Template::Processor { proc_id: Some(0) } => {
                Err(SpaceError::MalformedTemplate("proc_id is 1-based"))
            }
            _ => Ok(()),
        }
    }

    pub fn matches(&self, entry: &Entry) -> bool {
        match (self, entry) {
            (Template::Data { data_id, mutation }, Entry::Data(d)) => {
                data_id.is_none_or(|v| v == d.data_id) && mutation.is_none_or(|v| v == d.mutation)
            }
            (Template::Processor { proc_id }, Entry::Processor(p)) => {
                proc_id.is_none_or(|v| v == p.proc_id)
            }
            (Template::Turn, Entry::Turn(_)) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpaceError {
    #[error("malformed template: {0}")]
    MalformedTemplate(&'static str),
    #[error("a turn entry is already present")]
    DuplicateTurn,
}

#[derive(Debug)]
struct Waiter {
    ticket: u64,
    template: Template,
    take: bool,
    slot: Option<Entry>,
}

#[derive(Debug, Default)]
struct State {
    entries: Vec<Entry>,
    waiters: VecDeque<Waiter>,
    next_ticket: u64,
    /// Turn entries currently withdrawn by a client.
    turns_out: usize,
}

impl State {
    fn turn_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e, Entry::Turn(_)))
            .count()
            + self.turns_out
    }

    fn note_removed(&mut self, e: &Entry) {
        if let Entry::Turn(_) = e {
            self.turns_out += 1;
        }
    }
}

/// Thread-safe associative store of [`Entry`] values.
#[derive(Debug, Default)]
pub struct TupleSpace {
    state: Mutex<State>,
    cond: Condvar,
}

impl TupleSpace {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Insert an entry. A second turn entry is rejected, counting one that a
    /// client has withdrawn and not yet written back.
    pub fn write(&self, entry: impl Into<Entry>) -> Result<(), SpaceError> {
        let entry = entry.into();
        let mut st = self.lock();
        if let Entry::Turn(_) = entry {
            // Writing back a withdrawn turn is allowed; a fresh one is not.
            if st.turns_out > 0 {
                st.turns_out -= 1;
            } else if st.turn_count() > 0 {
                return Err(SpaceError::DuplicateTurn);
            }
        }
        let mut handed = false;
        let mut copied = false;
        for w in st.waiters.iter_mut() {
            if w.slot.is_some() || !w.template.matches(&entry) {
                continue;
            }
            if w.take {
                w.slot = Some(entry.clone());
                handed = true;
                break;
            }
            w.slot = Some(entry.clone());
            copied = true;
        }
        if handed {
            if let Entry::Turn(_) = entry {
                st.turns_out += 1;
            }
        } else {
            st.entries.push(entry);
        }
        drop(st);
        if handed || copied {
            self.cond.notify_all();
        }
        Ok(())
    }

    /// Withdraw the oldest matching entry, waiting up to `timeout`.
    pub fn take(&self, template: &Template, timeout: Duration) -> Result<Option<Entry>, SpaceError> {
        self.request(template, timeout, true, None)
    }

    /// Like [`take`](Self::take), but choose uniformly at random among the
    /// matching entries present when the call is served immediately.
    pub fn take_random(
        &self,
        template: &Template,
        timeout: Duration,
        rng: &mut RngStream,
    ) -> Result<Option<Entry>, SpaceError> {
        self.request(template, timeout, true, Some(rng))
    }

    /// Copy the oldest matching entry without removing it.
    pub fn read(&self, template: &Template, timeout: Duration) -> Result<Option<Entry>, SpaceError> {
        self.request(template, timeout, false, None)
    }

    pub fn try_take(&self, template: &Template) -> Result<Option<Entry>, SpaceError> {
        self.take(template, Duration::ZERO)
    }

    pub fn count(&self, template: &Template) -> usize {
        self.lock()
            .entries
            .iter()
            .filter(|e| template.matches(e))
            .count()
    }

    pub fn len(&self) -> usize {
        self.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Remove and return every entry matching `template`.
    pub fn take_all(&self, template: &Template) -> Vec<Entry> {
        let mut st = self.lock();
        let (taken, kept): (Vec<_>, Vec<_>) =
            st.entries.drain(..).partition(|e| template.matches(e));
        st.entries = kept;
        for e in &taken {
            st.note_removed(e);
        }
        taken
    }

    fn request(
        &self,
        template: &Template,
        timeout: Duration,
        take: bool,
        rng: Option<&mut RngStream>,
    ) -> Result<Option<Entry>, SpaceError> {
        template.check()?;
        let mut st = self.lock();
        let matching: Vec<usize> = st
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| template.matches(e))
            .map(|(i, _)| i)
            .collect();
        if !matching.is_empty() {
            let i = match rng {
                Some(r) => matching[r.index(matching.len())],
                None => matching[0],
            };
            if !take {
                return Ok(Some(st.entries[i].clone()));
            }
            let e = st.entries.remove(i);
            st.note_removed(&e);
            return Ok(Some(e));
        }
        if timeout.is_zero() {
            return Ok(None);
        }
        let ticket = st.next_ticket;
        st.next_ticket += 1;
        st.waiters.push_back(Waiter {
            ticket,
            template: *template,
            take,
            slot: None,
        });
        let deadline = Instant::now().checked_add(timeout);
        loop {
            let pos = st
                .waiters
                .iter()
                .position(|w| w.ticket == ticket)
                .expect("waiter is registered");
            if st.waiters[pos].slot.is_some() {
                let w = st.waiters.remove(pos).unwrap();
                return Ok(w.slot);
            }
            let now = Instant::now();
            let remaining = match deadline {
                Some(d) if d <= now => {
                    st.waiters.remove(pos);
                    return Ok(None);
                }
                Some(d) => d - now,
                None => Duration::from_secs(3600),
            };
            st = self
                .cond
                .wait_timeout(st, remaining)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::{Arc, Barrier};
    use std::thread;

    const MS10: Duration = Duration::from_millis(10);

    #[test]
    fn write_then_count() {
        let s = TupleSpace::new();
        s.write(DataEntry {
            data_id: 2,
            mutation: 0,
        })
        .unwrap();
        assert_eq!(s.count(&Template::ANY_DATA), 1);
    }

    #[test]
    fn many_processors() {
        let s = TupleSpace::new();
        for p in 1..=76 {
            s.write(ProcessorEntry::new(p)).unwrap();
        }
        assert_eq!(s.count(&Template::ANY_PROCESSOR), 76);
        let e = s.read(&Template::processor(5), Duration::ZERO).unwrap();
        assert!(matches!(e, Some(Entry::Processor(p)) if p.proc_id == 5));
    }

    #[test]
    fn turn_is_a_singleton() {
        let s = TupleSpace::new();
        s.write(TurnEntry).unwrap();
        assert_eq!(s.write(TurnEntry), Err(SpaceError::DuplicateTurn));
        // Withdrawn and written back is fine; a fresh one while withdrawn is not.
        assert!(s.try_take(&Template::Turn).unwrap().is_some());
        assert_eq!(s.count(&Template::Turn), 0);
        s.write(TurnEntry).unwrap();
        assert_eq!(s.count(&Template::Turn), 1);
    }

    #[test]
    fn take_removes_matching_entry() {
        let s = TupleSpace::new();
        s.write(DataEntry {
            data_id: 2,
            mutation: 0,
        })
        .unwrap();
        let got = s.take(&Template::data(2), MS10).unwrap();
        assert_eq!(
            got,
            Some(Entry::Data(DataEntry {
                data_id: 2,
                mutation: 0
            }))
        );
        assert_eq!(s.count(&Template::ANY_DATA), 0);
    }

    #[test]
    fn template_fields_must_all_match() {
        let s = TupleSpace::new();
        s.write(DataEntry {
            data_id: 2,
            mutation: 4,
        })
        .unwrap();
        let t = Template::Data {
            data_id: Some(2),
            mutation: Some(3),
        };
        assert_eq!(s.try_take(&t).unwrap(), None);
        assert_eq!(s.try_take(&Template::processor(2)).unwrap(), None);
    }

    #[test]
    fn malformed_template_is_an_error() {
        let s = TupleSpace::new();
        assert!(matches!(
            s.take(&Template::processor(0), MS10),
            Err(SpaceError::MalformedTemplate(_))
        ));
    }

    #[test]
    fn take_times_out() {
        let s = TupleSpace::new();
        let t0 = Instant::now();
        assert_eq!(s.take(&Template::ANY_DATA, MS10).unwrap(), None);
        assert!(t0.elapsed() >= MS10);
    }

    #[test]
    fn read_is_non_destructive() {
        let s = TupleSpace::new();
        assert_eq!(s.read(&Template::Turn, Duration::ZERO).unwrap(), None);
        s.write(TurnEntry).unwrap();
        let a = s.read(&Template::Turn, Duration::ZERO).unwrap();
        let b = s.read(&Template::Turn, Duration::ZERO).unwrap();
        assert_eq!(a, b);
        assert!(a.is_some());
    }

    #[test]
    fn blocked_taker_receives_later_write() {
        let s = Arc::new(TupleSpace::new());
        let s2 = Arc::clone(&s);
        let h = thread::spawn(move || s2.take(&Template::processor(3), Duration::from_secs(5)));
        thread::sleep(MS10);
        s.write(ProcessorEntry::new(3)).unwrap();
        assert!(h.join().unwrap().unwrap().is_some());
        assert!(s.is_empty());
    }

    #[test]
    fn one_entry_two_takers() {
        let s = Arc::new(TupleSpace::new());
        let barrier = Arc::new(Barrier::new(2));
        let got = Arc::new(AtomicUsize::new(0));
        let hs: Vec<_> = (0..2)
            .map(|_| {
                let (s, b, g) = (Arc::clone(&s), Arc::clone(&barrier), Arc::clone(&got));
                thread::spawn(move || {
                    b.wait();
                    if s.take(&Template::Turn, Duration::from_millis(50)).unwrap().is_some() {
                        g.fetch_add(1, Ordering::SeqCst);
                    }
                })
            })
            .collect();
        thread::sleep(Duration::from_millis(5));
        s.write(TurnEntry).unwrap();
        for h in hs {
            h.join().unwrap();
        }
        assert_eq!(got.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn waiting_takers_are_served_fifo() {
        let s = Arc::new(TupleSpace::new());
        let order = Arc::new(Mutex::new(Vec::new()));
        let mut hs = Vec::new();
        for i in 0..4 {
            let (sc, o) = (Arc::clone(&s), Arc::clone(&order));
            hs.push(thread::spawn(move || {
                let e = sc.take(&Template::ANY_PROCESSOR, Duration::from_secs(5)).unwrap();
                o.lock().unwrap().push((i, e.is_some()));
            }));
            // Ensure registration order.
            while s.lock().waiters.len() < i + 1 {
                thread::yield_now();
            }
        }
        for p in 1..=4 {
            s.write(ProcessorEntry::new(p)).unwrap();
            while order.lock().unwrap().len() < p as usize {
                thread::yield_now();
            }
        }
        for h in hs {
            h.join().unwrap();
        }
        let got: Vec<_> = order.lock().unwrap().iter().map(|x| x.0).collect();
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn waiting_reader_gets_copy_and_taker_gets_entry() {
        let s = Arc::new(TupleSpace::new());
        let (sr, st) = (Arc::clone(&s), Arc::clone(&s));
        let r = thread::spawn(move || sr.read(&Template::Turn, Duration::from_secs(5)));
        while s.lock().waiters.is_empty() {
            thread::yield_now();
        }
        let t = thread::spawn(move || st.take(&Template::Turn, Duration::from_secs(5)));
        while s.lock().waiters.len() < 2 {
            thread::yield_now();
        }
        s.write(TurnEntry).unwrap();
        assert!(r.join().unwrap().unwrap().is_some());
        assert!(t.join().unwrap().unwrap().is_some());
        assert_eq!(s.count(&Template::Turn), 0);
    }
}
