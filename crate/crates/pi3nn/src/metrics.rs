//! Interval quality metrics: coverage (PICP), mean width (MPIW), width
//! distribution summaries, and the in- vs out-of-distribution separation
//! report.

use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::IntervalBand;

/// Default mean-width ratio above which two width distributions are flagged
/// as separated. A tooling default; the raw ratio is always reported.
pub const DEFAULT_SEPARATION_THRESHOLD: f64 = 1.5;

/// Coverage and width of one band against known targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub gamma: f64,
    pub picp: f64,
    pub mpiw: f64,
    pub n: usize,
}

/// Fraction of targets inside their intervals (bounds inclusive).
pub fn picp(band: &IntervalBand, y: &Array1<f64>) -> Result<f64> {
    if band.len() != y.len() {
        return Err(Error::Shape {
            what: "picp".into(),
            expected: format!("{} targets", band.len()),
            got: format!("{}", y.len()),
        });
    }
    let inside = y
        .iter()
        .enumerate()
        .filter(|(i, v)| band.lower[*i] <= **v && **v <= band.upper[*i])
        .count();
    Ok(inside as f64 / y.len() as f64)
}

/// Mean interval width.
pub fn mpiw(band: &IntervalBand) -> Result<f64> {
    if band.is_empty() {
        return Err(Error::InvalidArgument("mpiw of an empty band".into()));
    }
    Ok(band.width.sum() / band.len() as f64)
}

pub fn coverage_report(band: &IntervalBand, y: &Array1<f64>) -> Result<CoverageReport> {
    Ok(CoverageReport {
        gamma: band.gamma,
        picp: picp(band, y)?,
        mpiw: mpiw(band)?,
        n: band.len(),
    })
}

/// Fixed quantile summary with linear interpolation between order
/// statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges, equally spaced over the data range.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Summary of one sample of interval widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthDistribution {
    /// The widths, sorted ascending.
    pub widths: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub quantiles: Quantiles,
    pub histogram: Histogram,
}

impl WidthDistribution {
    pub fn from_widths(widths: &[f64], bins: usize) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::InvalidArgument(
                "width distribution of an empty sample".into(),
            ));
        }
        if bins == 0 {
            return Err(Error::InvalidArgument(
                "need at least one histogram bin".into(),
            ));
        }
        if widths.iter().any(|w| !w.is_finite()) {
            return Err(Error::Data("non-finite width".into()));
        }
        let mut sorted = widths.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite widths"));

        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let std = (sorted.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
        let quantiles = Quantiles {
            q05: interpolate(&sorted, 0.05),
            q25: interpolate(&sorted, 0.25),
            q50: interpolate(&sorted, 0.50),
            q75: interpolate(&sorted, 0.75),
            q95: interpolate(&sorted, 0.95),
        };

        let (lo, hi) = span(&sorted);
        let bin_width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for w in &sorted {
            let idx = (((w - lo) / bin_width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let edges = (0..=bins).map(|i| lo + bin_width * i as f64).collect();
        Ok(Self {
            widths: sorted,
            mean,
            std,
            quantiles,
            histogram: Histogram { edges, counts },
        })
    }
}

/// Padded data range; degenerate (all-equal) samples get a unit span so bin
/// widths stay positive.
fn span(sorted: &[f64]) -> (f64, f64) {
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Linear interpolation between order statistics at probability `p`.
fn interpolate(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}

/// Summary of one band's width sample.
pub fn width_distribution(band: &IntervalBand, bins: usize) -> Result<WidthDistribution> {
    WidthDistribution::from_widths(band.width.as_slice().unwrap_or(&band.width.to_vec()), bins)
}

/// Contrast between in-distribution and out-of-distribution width samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// Mean OOD width over mean InD width.
    pub mean_width_ratio: f64,
    /// Shared probability mass of the two width histograms on a common grid,
    /// in [0, 1]; 0 means disjoint supports.
    pub overlap_coefficient: f64,
    pub separated: bool,
    pub threshold: f64,
}

pub fn separation_report(
    ind: &WidthDistribution,
    ood: &WidthDistribution,
    threshold: f64,
) -> SeparationReport {
    let mean_width_ratio = if ind.mean > 0.0 {
        ood.mean / ind.mean
    } else if ood.mean > 0.0 {
        f64::MAX
    } else {
        1.0
    };
    let overlap_coefficient = overlap(ind, ood);
    SeparationReport {
        mean_width_ratio,
        overlap_coefficient,
        separated: mean_width_ratio > threshold,
        threshold,
    }
}

/// Overlap of the two samples on a common equal-width grid.
fn overlap(a: &WidthDistribution, b: &WidthDistribution) -> f64 {
    let lo = a.widths[0].min(b.widths[0]);
    let hi = a.widths[a.widths.len() - 1].max(b.widths[b.widths.len() - 1]);
    let bins = (a.histogram.counts.len().max(b.histogram.counts.len())).max(1);
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    };
    let bin_width = (hi - lo) / bins as f64;

    let mass = |widths: &[f64]| -> Vec<f64> {
        let mut m = vec![0.0; bins];
        for w in widths {
            let idx = (((w - lo) / bin_width) as usize).min(bins - 1);
            m[idx] += 1.0 / widths.len() as f64;
        }
        m
    };
    let ma = mass(&a.widths);
    let mb = mass(&b.widths);
    ma.iter().zip(&mb).map(|(x, y)| x.min(*y)).sum()
}

/// Histogram as plot-ready CSV with columns `bin_left,bin_right,count`.
pub fn write_histogram_csv<P: AsRef<Path>>(path: P, dist: &WidthDistribution) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["bin_left", "bin_right", "count"])?;
    let h = &dist.histogram;
    for (i, count) in h.counts.iter().enumerate() {
        writer.write_record(&[
            format!("{}", h.edges[i]),
            format!("{}", h.edges[i + 1]),
            format!("{count}"),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn band(lower: Vec<f64>, upper: Vec<f64>) -> IntervalBand {
        let lower = Array1::from_vec(lower);
        let upper = Array1::from_vec(upper);
        let mid = (&lower + &upper) / 2.0;
        let width = &upper - &lower;
        IntervalBand {
            gamma: 0.9,
            point_mean: mid.clone(),
            point_median: mid,
            lower,
            upper,
            width,
        }
    }

    #[test]
    fn picp_extremes() {
        let b = band(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(picp(&b, &Array1::from_vec(vec![0.5, 0.5])).unwrap(), 1.0);
        assert_eq!(picp(&b, &Array1::from_vec(vec![2.0, 3.0])).unwrap(), 0.0);
        assert_eq!(picp(&b, &Array1::from_vec(vec![0.5, 3.0])).unwrap(), 0.5);
        assert!(picp(&b, &Array1::from_vec(vec![0.5])).is_err());
    }

    #[test]
    fn mpiw_simple_values() {
        assert_eq!(mpiw(&band(vec![0.0], vec![2.0])).unwrap(), 2.0);
        assert_eq!(mpiw(&band(vec![0.0, 0.0], vec![1.0, 3.0])).unwrap(), 2.0);
    }

    #[test]
    fn width_distribution_equal_widths() {
        let d = WidthDistribution::from_widths(&[2.0; 8], 5).unwrap();
        assert_eq!(d.std, 0.0);
        assert_eq!(d.histogram.counts.iter().filter(|c| **c > 0).count(), 1);
        assert_eq!(d.histogram.counts.iter().sum::<usize>(), 8);
    }

    #[test]
    fn width_distribution_hand_quantiles() {
        let widths: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let d = WidthDistribution::from_widths(&widths, 5).unwrap();
        assert_abs_diff_eq!(d.quantiles.q50, 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.quantiles.q05, 0.45, epsilon = 1e-12);
        assert_abs_diff_eq!(d.quantiles.q25, 2.25, epsilon = 1e-12);
        assert_abs_diff_eq!(d.quantiles.q75, 6.75, epsilon = 1e-12);
        assert_abs_diff_eq!(d.quantiles.q95, 8.55, epsilon = 1e-12);
        assert_eq!(d.histogram.counts.iter().sum::<usize>(), 10);
        assert_abs_diff_eq!(d.mean, 4.5, epsilon = 1e-12);
    }

    #[test]
    fn separation_identical_distributions() {
        let widths = vec![1.0, 2.0, 3.0, 4.0];
        let a = WidthDistribution::from_widths(&widths, 4).unwrap();
        let b = WidthDistribution::from_widths(&widths, 4).unwrap();
        let rep = separation_report(&a, &b, DEFAULT_SEPARATION_THRESHOLD);
        assert_eq!(rep.mean_width_ratio, 1.0);
        assert!(!rep.separated);
        assert_abs_diff_eq!(rep.overlap_coefficient, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn separation_disjoint_supports() {
        let a = WidthDistribution::from_widths(&[1.0, 1.1, 1.2], 3).unwrap();
        let b = WidthDistribution::from_widths(&[10.0, 10.5, 11.0], 3).unwrap();
        let rep = separation_report(&a, &b, DEFAULT_SEPARATION_THRESHOLD);
        assert!(rep.mean_width_ratio > 5.0);
        assert!(rep.separated);
        assert_eq!(rep.overlap_coefficient, 0.0);
    }

    proptest! {
        #[test]
        fn picp_invariant_under_joint_affine_rescale(
            ys in proptest::collection::vec(-100.0f64..100.0, 1..64),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let n = ys.len();
            let lower: Vec<f64> = (0..n).map(|i| i as f64 - 10.0).collect();
            let upper: Vec<f64> = (0..n).map(|i| i as f64 + 10.0).collect();
            let b = band(lower.clone(), upper.clone());
            let y = Array1::from_vec(ys.clone());
            let base = picp(&b, &y).unwrap();

            let tr = |v: &f64| scale * v + shift;
            let b2 = band(lower.iter().map(tr).collect(), upper.iter().map(tr).collect());
            let y2 = Array1::from_vec(ys.iter().map(tr).collect());
            prop_assert_eq!(picp(&b2, &y2).unwrap(), base);
        }

        #[test]
        fn mpiw_scales_linearly(
            widths in proptest::collection::vec(0.0f64..100.0, 1..64),
            scale in 0.1f64..10.0,
        ) {
            let lower: Vec<f64> = widths.iter().map(|_| 0.0).collect();
            let b = band(lower.clone(), widths.clone());
            let scaled = band(lower, widths.iter().map(|w| w * scale).collect());
            let a = mpiw(&b).unwrap();
            let s = mpiw(&scaled).unwrap();
            prop_assert!((s - scale * a).abs() <= 1e-9 * s.abs().max(1.0));
        }

        #[test]
        fn histogram_counts_sum_and_quantiles_monotone(
            widths in proptest::collection::vec(0.0f64..1000.0, 1..200),
            bins in 1usize..32,
        ) {
            let d = WidthDistribution::from_widths(&widths, bins).unwrap();
            prop_assert_eq!(d.histogram.counts.iter().sum::<usize>(), widths.len());
            let q = &d.quantiles;
            prop_assert!(q.q05 <= q.q25 && q.q25 <= q.q50 && q.q50 <= q.q75 && q.q75 <= q.q95);
        }
    }
}
