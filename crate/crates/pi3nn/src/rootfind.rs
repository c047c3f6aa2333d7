//! Solvers for the discrete step-function root problems behind interval
//! calibration: the median shift applied to the mean network, and the
//! per-confidence-level scale coefficients.
//!
//! The count of samples exceeding a candidate bound is a nonincreasing step
//! function of the bound, so the root set for a target count is an interval
//! between adjacent order statistics. The primary solver computes it exactly
//! by sorting; bisection is kept as an independent cross-check.

use crate::error::{Error, Result};

/// Relative step used to land strictly above the largest ratio when the
/// target count is zero.
const ABOVE_MAX_STEP: f64 = 1.0 / (1u64 << 30) as f64;

/// Find the largest-count root problem over positive ratios: seek `v >= 0`
/// with exactly `target_count` ratios strictly above `v`.
#[derive(Debug, Clone)]
pub struct ExceedanceProblem {
    ratios: Vec<f64>,
    target_count: usize,
}

impl ExceedanceProblem {
    pub fn new(ratios: Vec<f64>, target_count: usize) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::InvalidArgument("ratios must be nonempty".into()));
        }
        if let Some(bad) = ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "ratios must be finite and positive, got {bad}"
            )));
        }
        if target_count > ratios.len() {
            return Err(Error::InvalidArgument(format!(
                "target count {} exceeds {} ratios",
                target_count,
                ratios.len()
            )));
        }
        Ok(Self {
            ratios,
            target_count,
        })
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    /// Number of ratios strictly above `v`.
    pub fn count_above(&self, v: f64) -> usize {
        self.ratios.iter().filter(|r| **r > v).count()
    }
}

/// A solved root: the chosen value, the exceedance count it achieves, and the
/// enclosing interval of values achieving the same count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolution {
    pub value: f64,
    pub achieved_count: usize,
    pub bracket: (f64, f64),
}

/// Shift `nu` such that exactly `floor(N/2)` residuals lie strictly above it.
/// Returns a value between the two middle order statistics (their midpoint),
/// or the maximum residual for a single sample.
pub fn solve_median_shift(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::InvalidArgument("residuals must be nonempty".into()));
    }
    if let Some(bad) = residuals.iter().find(|r| !r.is_finite()) {
        return Err(Error::Data(format!("non-finite residual {bad}")));
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite residuals"));
    let k = residuals.len() / 2;
    if k == 0 {
        return Ok(sorted[0]);
    }
    let hi = sorted[k - 1];
    let lo = sorted[k];
    if hi <= lo {
        return Err(Error::TiedRatios {
            value: hi,
            target_count: k,
        });
    }
    let mid = 0.5 * (lo + hi);
    // Adjacent floats can round the midpoint onto `hi`; `lo` always achieves
    // the exact count.
    if residuals.iter().filter(|r| **r > mid).count() == k {
        Ok(mid)
    } else {
        Ok(lo)
    }
}

/// Exact sort-based solver: the root set for count `k` is the interval
/// between the (k+1)-th and k-th largest ratios; the midpoint is returned.
/// With `k = 0` the value lands just above the maximum ratio; with
/// `k = |ratios|` it is the midpoint of `[0, min)`.
pub fn solve_exceedance(p: &ExceedanceProblem) -> Result<RootSolution> {
    let n = p.ratios.len();
    let k = p.target_count;
    let mut sorted = p.ratios.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite ratios"));

    let (value, bracket) = if k == 0 {
        let max = sorted[0];
        (max * (1.0 + ABOVE_MAX_STEP), (max, f64::INFINITY))
    } else if k == n {
        let min = sorted[n - 1];
        (0.5 * min, (0.0, min))
    } else {
        let hi = sorted[k - 1];
        let lo = sorted[k];
        if hi <= lo {
            return Err(Error::TiedRatios {
                value: hi,
                target_count: k,
            });
        }
        (0.5 * (lo + hi), (lo, hi))
    };

    let achieved = p.count_above(value);
    if achieved == k {
        Ok(RootSolution {
            value,
            achieved_count: achieved,
            bracket,
        })
    } else {
        // Midpoint rounded onto the upper order statistic; the lower bracket
        // endpoint achieves the count exactly.
        let value = bracket.0;
        let achieved = p.count_above(value);
        debug_assert_eq!(achieved, k);
        Ok(RootSolution {
            value,
            achieved_count: achieved,
            bracket,
        })
    }
}

/// Bisection cross-check. The objective is integer-valued, so iteration stops
/// as soon as the count matches; failure to match within `max_iter` means the
/// ratios carry ties that make the count unreachable.
pub fn bisect_exceedance(
    p: &ExceedanceProblem,
    max_iter: usize,
    bracket: (f64, f64),
) -> Result<RootSolution> {
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "invalid bracket [{lo}, {hi}]"
        )));
    }
    let k = p.target_count;
    if p.count_above(lo) < k || p.count_above(hi) > k {
        return Err(Error::InvalidArgument(format!(
            "bracket [{lo}, {hi}] does not enclose the count {k}"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let count = p.count_above(mid);
        if count == k {
            return Ok(RootSolution {
                value: mid,
                achieved_count: count,
                bracket: (lo, hi),
            });
        }
        if count > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::TiedRatios {
        value: lo,
        target_count: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent counting used to check the solvers.
    fn brute_count_above(values: &[f64], v: f64) -> usize {
        let mut c = 0;
        for r in values {
            if *r > v {
                c += 1;
            }
        }
        c
    }

    #[test]
    fn median_shift_symmetric_set() {
        let residuals = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let nu = solve_median_shift(&residuals).unwrap();
        assert_eq!(nu, 0.5);
        assert_eq!(brute_count_above(&residuals, nu), 2);
    }

    #[test]
    fn median_shift_single_sample() {
        let nu = solve_median_shift(&[5.0]).unwrap();
        assert!(nu >= 5.0);
        assert_eq!(brute_count_above(&[5.0], nu), 0);
    }

    #[test]
    fn median_shift_empty_is_error() {
        assert!(solve_median_shift(&[]).is_err());
    }

    #[test]
    fn median_shift_random_counts_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.random_range(1..1000);
            let residuals: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
            let nu = solve_median_shift(&residuals).unwrap();
            assert_eq!(brute_count_above(&residuals, nu), n / 2, "n = {n}");
        }
    }

    #[test]
    fn exceedance_interior_case() {
        let p = ExceedanceProblem::new(vec![1.0, 2.0, 3.0, 4.0], 1).unwrap();
        let sol = solve_exceedance(&p).unwrap();
        assert_eq!(sol.value, 3.5);
        assert_eq!(sol.achieved_count, 1);
        assert_eq!(sol.bracket, (3.0, 4.0));
        // brute-force count over a grid of candidate values agrees
        for v in [3.1, 3.5, 3.9] {
            assert_eq!(brute_count_above(p.ratios(), v), 1);
        }
    }

    #[test]
    fn exceedance_all_covered() {
        let p = ExceedanceProblem::new(vec![1.0, 2.0, 3.0, 4.0], 0).unwrap();
        let sol = solve_exceedance(&p).unwrap();
        assert!(sol.value > 4.0);
        assert_eq!(sol.value, 4.0 * (1.0 + ABOVE_MAX_STEP));
        assert_eq!(sol.achieved_count, 0);
    }

    #[test]
    fn exceedance_none_covered() {
        let p = ExceedanceProblem::new(vec![1.0, 2.0, 3.0, 4.0], 4).unwrap();
        let sol = solve_exceedance(&p).unwrap();
        assert_eq!(sol.value, 0.5);
        assert_eq!(sol.achieved_count, 4);
    }

    #[test]
    fn exceedance_tie_is_reported() {
        let p = ExceedanceProblem::new(vec![1.0, 2.0, 2.0, 3.0], 2).unwrap();
        match solve_exceedance(&p) {
            Err(Error::TiedRatios {
                value,
                target_count,
            }) => {
                assert_eq!(value, 2.0);
                assert_eq!(target_count, 2);
            }
            other => panic!("expected tie error, got {other:?}"),
        }
    }

    #[test]
    fn exceedance_rejects_nonpositive_ratios() {
        assert!(ExceedanceProblem::new(vec![1.0, 0.0], 1).is_err());
        assert!(ExceedanceProblem::new(vec![1.0, -2.0], 1).is_err());
        assert!(ExceedanceProblem::new(vec![1.0, f64::INFINITY], 1).is_err());
    }

    #[test]
    fn bisection_matches_exact_solver_on_examples() {
        for k in [0, 1, 2, 3, 4] {
            let p = ExceedanceProblem::new(vec![1.0, 2.0, 3.0, 4.0], k).unwrap();
            let exact = solve_exceedance(&p).unwrap();
            let bis = bisect_exceedance(&p, 200, (0.0, 8.0)).unwrap();
            assert_eq!(exact.achieved_count, bis.achieved_count);
            assert_eq!(p.count_above(exact.value), p.count_above(bis.value));
        }
    }

    #[test]
    fn bisection_full_count_returns_near_zero() {
        let p = ExceedanceProblem::new(vec![0.5, 1.5, 2.5], 3).unwrap();
        let sol = bisect_exceedance(&p, 200, (0.0, 5.0)).unwrap();
        assert!(sol.value < 0.5);
        assert_eq!(sol.achieved_count, 3);
    }

    #[test]
    fn bisection_exhaustion_under_ties_is_tie_error() {
        let p = ExceedanceProblem::new(vec![2.0, 2.0], 1).unwrap();
        assert!(matches!(
            bisect_exceedance(&p, 200, (0.0, 4.0)),
            Err(Error::TiedRatios { .. })
        ));
    }

    fn distinct_positive_ratios() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(1u32..1_000_000, 1..200).prop_map(|ints| {
            let mut sorted: Vec<u32> = ints;
            sorted.sort_unstable();
            sorted.dedup();
            sorted.iter().map(|i| *i as f64 / 1000.0).collect()
        })
    }

    proptest! {
        #[test]
        fn solver_is_exact_on_tie_free_input(ratios in distinct_positive_ratios(), k_frac in 0.0f64..=1.0) {
            let k = ((ratios.len() as f64) * k_frac).floor() as usize;
            let p = ExceedanceProblem::new(ratios, k).unwrap();
            let sol = solve_exceedance(&p).unwrap();
            prop_assert_eq!(sol.achieved_count, k);
            prop_assert_eq!(p.count_above(sol.value), k);
        }

        #[test]
        fn solvers_agree_within_order_statistic_bracket(ratios in distinct_positive_ratios(), k_frac in 0.0f64..=1.0) {
            let k = ((ratios.len() as f64) * k_frac).floor() as usize;
            let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
            let p = ExceedanceProblem::new(ratios, k).unwrap();
            let exact = solve_exceedance(&p).unwrap();
            let bis = bisect_exceedance(&p, 500, (0.0, 2.0 * max)).unwrap();
            prop_assert_eq!(exact.achieved_count, bis.achieved_count);
            prop_assert_eq!(p.count_above(exact.value), p.count_above(bis.value));
        }

        #[test]
        fn solution_value_decreases_in_target_count(ratios in distinct_positive_ratios()) {
            prop_assume!(ratios.len() >= 2);
            let mut prev = f64::INFINITY;
            for k in 0..=ratios.len() {
                let p = ExceedanceProblem::new(ratios.clone(), k).unwrap();
                let sol = solve_exceedance(&p).unwrap();
                prop_assert!(sol.value < prev, "k = {}: {} !< {}", k, sol.value, prev);
                prev = sol.value;
            }
        }
    }
}
