//! Log parsing, normalization and resource-usage accounting.
//!
//! Raw logs hold one processor interval per line:
//!
//! ```text
//! ProcID: 1; start_t: 1190380329418; stop_t: 1190380330568; data_id: 2; mutation: 1; step: 1
//! ```
//!
//! Normalization shifts every timestamp so the earliest start is zero. The
//! normalized listing adds a `used: <n>ms` column and right-aligns times.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::model::{LogRecord, Millis};
use crate::stats::{self, Histogram, SummaryStats};

/// Simulated milliseconds per day: one simulated millisecond stands for one
/// real second.
pub const SIM_MS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no records")]
    Empty,
    #[error("overhead {overhead} exceeds the observed span {span}")]
    OverheadExceedsSpan { overhead: Millis, span: Millis },
    #[error("processor {proc_id} outside 1..={phi}")]
    UnknownProcessor { proc_id: u32, phi: u32 },
    #[error("processor {proc_id}: interval [{b_start}, {b_stop}] overlaps [{a_start}, {a_stop}]")]
    Overlap {
        proc_id: u32,
        a_start: Millis,
        a_stop: Millis,
        b_start: Millis,
        b_stop: Millis,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FromStr for LogRecord {
    type Err = String;

    /// Accepts raw lines and normalized lines (with a `used: <n>ms` field,
    /// which must equal `stop_t - start_t`).
    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut fields = line
            .trim()
            .split(';')
            .map(str::trim)
            .map(|f| match f.split_once(':') {
                Some((k, v)) => Ok((k.trim(), v.trim())),
                None => Err(format!("field `{f}` has no `:`")),
            })
            .peekable();
        fn take<'a>(
            fields: &mut impl Iterator<Item = Result<(&'a str, &'a str), String>>,
            key: &str,
        ) -> Result<&'a str, String> {
            match fields.next() {
                Some(Ok((k, v))) if k == key => Ok(v),
                Some(Ok((k, _))) => Err(format!("expected `{key}`, found `{k}`")),
                Some(Err(e)) => Err(e),
                None => Err(format!("missing field `{key}`")),
            }
        }
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad value `{v}` for `{key}`"))
        }
        let proc_id = num("ProcID", take(&mut fields, "ProcID")?)?;
        let start_t: Millis = num("start_t", take(&mut fields, "start_t")?)?;
        let stop_t: Millis = num("stop_t", take(&mut fields, "stop_t")?)?;
        if stop_t < start_t {
            return Err(format!("stop_t {stop_t} precedes start_t {start_t}"));
        }
        if let Some(Ok(("used", _))) = fields.peek() {
            let v = take(&mut fields, "used")?;
            let used: Millis = num("used", v.strip_suffix("ms").unwrap_or(v))?;
            if used != stop_t - start_t {
                return Err(format!("used {used}ms disagrees with stop_t - start_t"));
            }
        }
        let v = take(&mut fields, "data_id");
        let data_id = num("data_id", v?)?;
        let mutation = num("mutation", take(&mut fields, "mutation")?)?;
        let step: u8 = num("step", take(&mut fields, "step")?)?;
        if fields.next().is_some() {
            return Err("trailing fields".into());
        }
        if !(1..=3).contains(&step) {
            return Err(format!("step {step} is not 1, 2 or 3"));
        }
        Ok(LogRecord {
            proc_id,
            start_t,
            stop_t,
            data_id,
            mutation,
            step,
        })
    }
}

/// Parse a log, one record per non-blank line, keeping order.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, AnalysisError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.parse().map_err(|message| AnalysisError::Parse {
                line: i + 1,
                message,
            })
        })
        .collect()
}

/// Raw log text, newline-terminated.
pub fn format_log(records: &[LogRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 96);
    for r in records {
        writeln!(out, "{r}").unwrap();
    }
    out
}

/// Shift all timestamps so that the earliest start is zero.
pub fn normalize(records: &[LogRecord]) -> Result<Vec<LogRecord>, AnalysisError> {
    let lo = records
        .iter()
        .map(|r| r.start_t)
        .min()
        .ok_or(AnalysisError::Empty)?;
    Ok(records
        .iter()
        .map(|r| LogRecord {
            start_t: r.start_t - lo,
            stop_t: r.stop_t - lo,
            ..*r
        })
        .collect())
}

/// Normalized listing with a `used` column; times are right-aligned to the
/// widest value in the listing.
pub fn format_normalized(records: &[LogRecord]) -> String {
    let width = records
        .iter()
        .flat_map(|r| [r.start_t, r.stop_t])
        .max()
        .map_or(1, |m| m.to_string().len());
    let mut out = String::new();
    for r in records {
        writeln!(
            out,
            "ProcID: {}; start_t: {:>w$}; stop_t: {:>w$}; used: {}ms; data_id: {}; mutation: {}; step: {}",
            r.proc_id,
            r.start_t,
            r.stop_t,
            r.used(),
            r.data_id,
            r.mutation,
            r.step,
            w = width
        )
        .unwrap();
    }
    out
}

/// Overall computation time of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverallTime {
    /// Highest stop timestamp.
    pub theta_h: Millis,
    /// Lowest start timestamp.
    pub theta_l: Millis,
    pub overhead: Millis,
    /// `(theta_h - theta_l) - overhead`.
    pub tau: Millis,
}

pub fn overall_time(records: &[LogRecord], overhead: Millis) -> Result<OverallTime, AnalysisError> {
    let theta_l = records
        .iter()
        .map(|r| r.start_t)
        .min()
        .ok_or(AnalysisError::Empty)?;
    let theta_h = records.iter().map(|r| r.stop_t).max().unwrap();
    let span = theta_h - theta_l;
    let tau = span
        .checked_sub(overhead)
        .ok_or(AnalysisError::OverheadExceedsSpan { overhead, span })?;
    Ok(OverallTime {
        theta_h,
        theta_l,
        overhead,
        tau,
    })
}

/// Simulated milliseconds to days.
pub fn to_days(ms: f64) -> f64 {
    ms / SIM_MS_PER_DAY
}

/// Per-processor active and idle time over one run.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageReport {
    pub tau: Millis,
    /// Index `p - 1` holds processor `p`.
    pub active: Vec<Millis>,
    pub idle: Vec<Millis>,
    /// `mean(idle) / mean(active)`; `None` when nothing was active.
    pub ratio: Option<f64>,
}

impl UsageReport {
    pub fn mean_active(&self) -> f64 {
        mean(&self.active)
    }

    pub fn mean_idle(&self) -> f64 {
        mean(&self.idle)
    }

    pub fn total_active(&self) -> Millis {
        self.active.iter().sum()
    }
}

fn mean(xs: &[Millis]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64
    }
}

/// Active and idle time per processor `1..=phi`. Idle is measured against the
/// whole-run window `tau`, so `active[p] + idle[p] == tau`.
pub fn usage(records: &[LogRecord], phi: u32) -> Result<UsageReport, AnalysisError> {
    let tau = if records.is_empty() {
        0
    } else {
        overall_time(records, 0)?.tau
    };
    let mut per_proc: Vec<Vec<(Millis, Millis)>> = vec![Vec::new(); phi as usize];
    for r in records {
        if r.proc_id == 0 || r.proc_id > phi {
            return Err(AnalysisError::UnknownProcessor {
                proc_id: r.proc_id,
                phi,
            });
        }
        per_proc[r.proc_id as usize - 1].push((r.start_t, r.stop_t));
    }
    let mut active = Vec::with_capacity(phi as usize);
    for (i, ivs) in per_proc.iter_mut().enumerate() {
        ivs.sort_unstable();
        for w in ivs.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(AnalysisError::Overlap {
                    proc_id: i as u32 + 1,
                    a_start: w[0].0,
                    a_stop: w[0].1,
                    b_start: w[1].0,
                    b_stop: w[1].1,
                });
            }
        }
        active.push(ivs.iter().map(|(a, b)| b - a).sum::<Millis>());
    }
    let idle: Vec<Millis> = active.iter().map(|a| tau - a).collect();
    let ratio = {
        let a = mean(&active);
        (a > 0.0).then(|| mean(&idle) / a)
    };
    Ok(UsageReport {
        tau,
        active,
        idle,
        ratio,
    })
}

/// Ratio of mean overall times, generation-based over steady-state.
pub fn replication_speedup(taus_gb: &[Millis], taus_st: &[Millis]) -> Result<f64, AnalysisError> {
    if taus_gb.is_empty() || taus_st.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok(mean(taus_gb) / mean(taus_st))
}

/// Same ratio for means given directly (e.g. in days).
pub fn speedup_of_means(mean_gb: f64, mean_st: f64) -> f64 {
    mean_gb / mean_st
}

/// One labelled set of replications.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupReport {
    pub name: String,
    pub taus: Vec<Millis>,
    pub usage: Vec<UsageReport>,
}

/// Everything written by [`emit`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportSet {
    /// Records drawn in the Gantt chart, usually from one representative run.
    pub gantt: Vec<LogRecord>,
    pub groups: Vec<GroupReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmitOptions {
    /// Express `box.csv` and `usage.csv` times in days with two decimals.
    pub days: bool,
    /// Histogram bin width in ms; Freedman–Diaconis when `None`.
    pub bin_width: Option<Millis>,
}

/// Paths of the files written by [`emit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFiles {
    pub gantt: PathBuf,
    pub hist: PathBuf,
    pub boxplot: PathBuf,
    pub usage: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Histogram bin width for `taus`: explicit, else Freedman–Diaconis rounded up
/// to whole milliseconds, else 1.
pub fn bin_width(taus: &[Millis], explicit: Option<Millis>) -> Millis {
    if let Some(w) = explicit.filter(|&w| w > 0) {
        return w;
    }
    let xs: Vec<f64> = taus.iter().map(|&x| x as f64).collect();
    stats::freedman_diaconis_width(&xs).map_or(1, |w| (w.ceil() as Millis).max(1))
}

/// Write `gantt.csv`, `hist.csv`, `box.csv` and `usage.csv` into `dir`.
///
/// * `gantt.csv`: `proc_id,start,stop,data_id,step` (ms)
/// * `hist.csv`: `group,bin_lo,bin_hi,count` (ms, bins `[lo, hi)`)
/// * `box.csv`: `group,min,q1,median,mean,q3,max`
/// * `usage.csv`: `group,tau,mean_active,mean_idle,idle_active_ratio`
pub fn emit(set: &ReportSet, dir: &Path, opts: EmitOptions) -> Result<EmittedFiles, AnalysisError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = EmittedFiles {
        gantt: dir.join("gantt.csv"),
        hist: dir.join("hist.csv"),
        boxplot: dir.join("box.csv"),
        usage: dir.join("usage.csv"),
    };
    let time = |ms: f64| {
        if opts.days {
            format!("{:.2}", to_days(ms))
        } else {
            format!("{ms:.1}")
        }
    };

    let mut w = csv::Writer::from_path(&files.gantt)?;
    w.write_record(["proc_id", "start", "stop", "data_id", "step"])?;
    for r in &set.gantt {
        w.write_record([
            r.proc_id.to_string(),
            r.start_t.to_string(),
            r.stop_t.to_string(),
            r.data_id.to_string(),
            r.step.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&files.gantt))?;

    let mut w = csv::Writer::from_path(&files.hist)?;
    w.write_record(["group", "bin_lo", "bin_hi", "count"])?;
    for g in &set.groups {
        let width = bin_width(&g.taus, opts.bin_width);
        let xs: Vec<f64> = g.taus.iter().map(|&x| x as f64).collect();
        let h = Histogram::new(&xs, width as f64).expect("width is positive");
        for b in &h.bins {
            w.write_record([
                g.name.clone(),
                (b.lo as Millis).to_string(),
                (b.hi as Millis).to_string(),
                b.count.to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(&files.hist))?;

    let mut w = csv::Writer::from_path(&files.boxplot)?;
    w.write_record(["group", "min", "q1", "median", "mean", "q3", "max"])?;
    for g in &set.groups {
        let xs: Vec<f64> = g.taus.iter().map(|&x| x as f64).collect();
        let Ok(s) = stats::summary(&xs) else { continue };
        let mut row = vec![g.name.clone()];
        row.extend(s.as_array().iter().map(|&v| time(v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&files.boxplot))?;

    let mut w = csv::Writer::from_path(&files.usage)?;
    w.write_record(["group", "tau", "mean_active", "mean_idle", "idle_active_ratio"])?;
    for g in &set.groups {
        if g.usage.is_empty() {
            continue;
        }
        let n = g.usage.len() as f64;
        let tau = g.usage.iter().map(|u| u.tau as f64).sum::<f64>() / n;
        let act = g.usage.iter().map(UsageReport::mean_active).sum::<f64>() / n;
        let idle = g.usage.iter().map(UsageReport::mean_idle).sum::<f64>() / n;
        let ratio = if act > 0.0 {
            format!("{:.2}", idle / act)
        } else {
            String::new()
        };
        w.write_record([g.name.clone(), time(tau), time(act), time(idle), ratio])?;
    }
    w.flush().map_err(io_err(&files.usage))?;
    Ok(files)
}

/// Six-number summary of overall times, optionally in days.
pub fn tau_summary(taus: &[Millis], days: bool) -> Option<SummaryStats<f64>> {
    let xs: Vec<f64> = taus
        .iter()
        .map(|&x| if days { to_days(x as f64) } else { x as f64 })
        .collect();
    stats::summary(&xs).ok()
}
