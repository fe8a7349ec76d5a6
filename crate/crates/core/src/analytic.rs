//! Closed-form batch-time model for the two algorithms.
//!
//! With one processor per step and `eta <= phi`, the `N` mutations form
//! `n = N / eta` batches. Generation-based time is the sum over batches of the
//! slowest member; steady-state time is approximated by the sum over batches
//! of the mean member time.

use std::io;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Millis, SampleMatrix, StepSpec};
use crate::sampling::{sample_matrix, RngStream};
use crate::stats::{self, SummaryStats};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticError {
    #[error("batch count is undefined for eta > phi (eta={eta}, phi={phi})")]
    UndefinedRegime { eta: u32, phi: u32 },
    #[error("N={n_new} is not a multiple of eta={eta}")]
    NotDivisible { n_new: u32, eta: u32 },
    #[error("eta must be at least 1")]
    EtaZero,
    #[error("at least one repetition is required")]
    NoRepetitions,
}

/// Number of batches `N / eta`.
pub fn num_batches(eta: u32, n_new: u32, phi: u32) -> Result<usize, AnalyticError> {
    if eta == 0 {
        return Err(AnalyticError::EtaZero);
    }
    if eta > phi {
        return Err(AnalyticError::UndefinedRegime { eta, phi });
    }
    if !n_new.is_multiple_of(eta) {
        return Err(AnalyticError::NotDivisible { n_new, eta });
    }
    Ok((n_new / eta) as usize)
}

fn total(cell: &[Millis; 3]) -> Millis {
    cell[0] + cell[1] + cell[2]
}

/// Sum over batches of the largest per-individual total.
pub fn t_gb(matrix: &SampleMatrix) -> Millis {
    matrix
        .iter_batches()
        .map(|b| b.iter().map(total).max().unwrap_or(0))
        .sum()
}

/// Sum over batches of the mean per-individual total, computed exactly and
/// rounded half-up to whole milliseconds.
pub fn t_st(matrix: &SampleMatrix) -> Millis {
    let eta = matrix.eta() as u128;
    let sum: u128 = matrix.cells().iter().map(|c| total(c) as u128).sum();
    ((2 * sum + eta) / (2 * eta)) as Millis
}

/// Paired Monte-Carlo samples of both batch times.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub t_gb_samples: Vec<Millis>,
    pub t_st_samples: Vec<Millis>,
    /// Ratio of means, generation-based over steady-state.
    pub speedup: f64,
}

impl ComparisonResult {
    pub fn reps(&self) -> usize {
        self.t_gb_samples.len()
    }

    pub fn mean_gb(&self) -> f64 {
        mean_ms(&self.t_gb_samples)
    }

    pub fn mean_st(&self) -> f64 {
        mean_ms(&self.t_st_samples)
    }

    pub fn summary_gb(&self) -> SummaryStats<f64> {
        summary(&self.t_gb_samples).expect("at least one repetition")
    }

    pub fn summary_st(&self) -> SummaryStats<f64> {
        summary(&self.t_st_samples).expect("at least one repetition")
    }

    /// One row per repetition (`rep,t_gb,t_st`), then a blank line and a
    /// `statistic,t_gb,t_st` block with the six summary values and the speedup.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rep", "t_gb", "t_st"])?;
        for (i, (g, s)) in self.t_gb_samples.iter().zip(&self.t_st_samples).enumerate() {
            w.write_record([i.to_string(), g.to_string(), s.to_string()])?;
        }
        let mut out = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        out.write_all(b"\n")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["statistic", "t_gb", "t_st"])?;
        let (g, s) = (self.summary_gb().as_array(), self.summary_st().as_array());
        for (i, name) in ["min", "q1", "median", "mean", "q3", "max"].iter().enumerate() {
            w.write_record([name.to_string(), format!("{:.1}", g[i]), format!("{:.1}", s[i])])?;
        }
        w.write_record(["speedup".to_string(), format!("{:.4}", self.speedup), String::new()])?;
        w.flush()?;
        Ok(())
    }
}

fn mean_ms(xs: &[Millis]) -> f64 {
    xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64
}

/// Six-number summary of integer durations.
pub fn summary(samples: &[Millis]) -> Result<SummaryStats<f64>, stats::StatsError> {
    let xs: Vec<f64> = samples.iter().map(|&x| x as f64).collect();
    stats::summary(&xs)
}

/// Draw `reps` sample matrices (repetition `r` seeded with `base_seed + r`) and
/// evaluate both batch times on each.
pub fn monte_carlo_compare(
    eta: u32,
    n_new: u32,
    phi: u32,
    specs: &[StepSpec; 3],
    reps: usize,
    base_seed: u64,
) -> Result<ComparisonResult, AnalyticError> {
    let n = num_batches(eta, n_new, phi)?;
    if reps == 0 {
        return Err(AnalyticError::NoRepetitions);
    }
    let pairs: Vec<(Millis, Millis)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(base_seed.wrapping_add(r as u64));
            let m = sample_matrix(eta as usize, n, specs, &mut rng);
            (t_gb(&m), t_st(&m))
        })
        .collect();
    let (t_gb_samples, t_st_samples): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let speedup = mean_ms(&t_gb_samples) / mean_ms(&t_st_samples);
    Ok(ComparisonResult {
        t_gb_samples,
        t_st_samples,
        speedup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(eta: usize, totals: &[Millis]) -> SampleMatrix {
        SampleMatrix::new(eta, totals.iter().map(|&t| [t, 0, 0]).collect()).unwrap()
    }

    #[test]
    fn batch_counts() {
        assert_eq!(num_batches(10, 100, 10), Ok(10));
        assert_eq!(num_batches(8, 80, 76), Ok(10));
        assert_eq!(
            num_batches(10, 100, 5),
            Err(AnalyticError::UndefinedRegime { eta: 10, phi: 5 })
        );
        assert_eq!(
            num_batches(9, 80, 76),
            Err(AnalyticError::NotDivisible { n_new: 80, eta: 9 })
        );
    }

    #[test]
    fn one_batch_two_individuals() {
        let m = matrix(2, &[300, 400]);
        assert_eq!(t_gb(&m), 400);
        assert_eq!(t_st(&m), 350);
    }

    #[test]
    fn constant_cells_make_both_equal() {
        let m = SampleMatrix::constant(7, 4, [5, 11, 2]);
        assert_eq!(t_gb(&m), 7 * 18);
        assert_eq!(t_st(&m), 7 * 18);
    }

    #[test]
    fn steady_state_rounds_half_up() {
        assert_eq!(t_st(&matrix(2, &[1, 2])), 2);
        assert_eq!(t_st(&matrix(3, &[1, 1, 2])), 1);
        assert_eq!(t_st(&matrix(4, &[1, 1, 1, 2, 1, 1, 1, 2])), 3);
    }

    #[test]
    fn single_rep_speedup_is_ratio_of_one_matrix() {
        let specs = StepSpec::canonical_set([1, 1, 1]);
        let r = monte_carlo_compare(10, 100, 10, &specs, 1, 5).unwrap();
        let m = sample_matrix(10, 10, &specs, &mut RngStream::new(5));
        assert_eq!(r.speedup, t_gb(&m) as f64 / t_st(&m) as f64);
    }

    #[test]
    fn zero_reps_rejected() {
        let specs = StepSpec::canonical_set([1, 1, 1]);
        assert_eq!(
            monte_carlo_compare(10, 100, 10, &specs, 0, 0),
            Err(AnalyticError::NoRepetitions)
        );
    }

    #[test]
    fn pathwise_dominance_and_speedup_above_one() {
        let specs = StepSpec::canonical_set([1, 1, 1]);
        let r = monte_carlo_compare(4, 20, 4, &specs, 500, 1).unwrap();
        assert!(r
            .t_gb_samples
            .iter()
            .zip(&r.t_st_samples)
            .all(|(g, s)| g >= s));
        assert!(r.speedup > 1.0);
        let s = r.summary_st();
        assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
    }

    #[test]
    fn csv_layout() {
        let r = ComparisonResult {
            t_gb_samples: vec![400, 500],
            t_st_samples: vec![350, 450],
            speedup: 1.125,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(&lines[..3], &["rep,t_gb,t_st", "0,400,350", "1,500,450"]);
        assert_eq!(lines[4], "statistic,t_gb,t_st");
        assert_eq!(lines[8], "mean,450.0,400.0");
        assert_eq!(lines[11], "speedup,1.1250,");
    }

    // Naive evaluators written as explicit index loops.
    fn brute_gb(m: &SampleMatrix) -> Millis {
        let mut total = 0;
        for b in 0..m.batches() {
            let mut best = 0;
            for j in 0..m.eta() {
                let c = m.cell(b * m.eta() + j);
                let s = c[0] + c[1] + c[2];
                if s > best {
                    best = s;
                }
            }
            total += best;
        }
        total
    }

    fn brute_st(m: &SampleMatrix) -> Millis {
        let mut num = 0u128;
        for k in 0..m.len() {
            let c = m.cell(k);
            num += (c[0] + c[1] + c[2]) as u128;
        }
        let exact = num as f64 / m.eta() as f64;
        (exact + 0.5).floor() as Millis
    }

    fn arb_matrix() -> impl Strategy<Value = SampleMatrix> {
        (1usize..=4, 1usize..=4).prop_flat_map(|(eta, n)| {
            prop::collection::vec(prop::array::uniform3(0u64..10_000), eta * n)
                .prop_map(move |cells| SampleMatrix::new(eta, cells).unwrap())
        })
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(m in arb_matrix()) {
            prop_assert_eq!(t_gb(&m), brute_gb(&m));
            prop_assert_eq!(t_st(&m), brute_st(&m));
        }

        #[test]
        fn dominance_with_equality_iff_rows_constant(m in arb_matrix()) {
            let gb = t_gb(&m);
            let st = t_st(&m);
            prop_assert!(gb >= st);
            let constant_rows = m.iter_batches().all(|b| b.iter().all(|c| total(c) == total(&b[0])));
            // Exact comparison before rounding: eta * gb vs the exact sum.
            let exact_sum: u128 = m.cells().iter().map(|c| total(c) as u128).sum();
            let exact_equal = gb as u128 * m.eta() as u128 == exact_sum;
            prop_assert_eq!(constant_rows, exact_equal);
        }

        #[test]
        fn scale_equivariance(m in arb_matrix(), k in 1u64..50) {
            let scaled = m.scaled(k);
            prop_assert_eq!(t_gb(&scaled), k * t_gb(&m));
            let exact = |m: &SampleMatrix| m.cells().iter().map(|c| total(c) as u128).sum::<u128>();
            prop_assert_eq!(exact(&scaled), k as u128 * exact(&m));
        }
    }
}
