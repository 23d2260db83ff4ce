//! Comparing a synthetic consensus against a real one.
//!
//! The main metric lines up both weight distributions rank by rank and
//! expresses each rank's absolute difference as a percentage of the
//! reference consensus's mean weight. The median over all ranks summarizes
//! how far a typical relay is off.

use crate::error::{Error, Result};
use crate::model::Consensus;

/// `(weight, share of relays with weight ≤ it)` points.
pub type CdfSeries = Vec<(u64, f64)>;

fn sorted_weights(consensus: &Consensus) -> Vec<u64> {
    let mut w: Vec<u64> = consensus.relays.iter().map(|r| r.weight).collect();
    w.sort_unstable();
    w
}

/// Empirical CDF of relay weights, one point per distinct weight.
///
/// With `upper_clip = Some(q)`, points whose cumulative share exceeds `q`
/// are dropped (for plotting without the long tail).
pub fn weight_cdf(consensus: &Consensus, upper_clip: Option<f64>) -> CdfSeries {
    let weights = sorted_weights(consensus);
    let n = weights.len() as f64;
    let mut points = CdfSeries::new();
    for (i, w) in weights.iter().enumerate() {
        if weights.get(i + 1) == Some(w) {
            continue;
        }
        let share = (i + 1) as f64 / n;
        if upper_clip.is_some_and(|q| share > q + 1e-12) {
            break;
        }
        points.push((*w, share));
    }
    points
}

/// Resamples a sorted list to `m` points by linear interpolation between
/// order statistics.
fn resample(sorted: &[u64], m: usize) -> Vec<f64> {
    let n = sorted.len();
    if n == m {
        return sorted.iter().map(|w| *w as f64).collect();
    }
    (0..m)
        .map(|i| {
            let pos = if m == 1 { (n - 1) as f64 / 2.0 } else { i as f64 * (n - 1) as f64 / (m - 1) as f64 };
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    /// Deviation per rank in percent of the reference mean weight, ascending
    /// rank order.
    pub per_rank: Vec<f64>,
    pub median: f64,
    pub n_compared: usize,
    pub scaled_cdf: CdfSeries,
    pub reference_cdf: CdfSeries,
}

impl DeviationReport {
    pub fn max(&self) -> f64 {
        self.per_rank.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-rank weight deviation of `scaled` from `reference`.
///
/// If the relay counts differ, both sorted weight lists are interpolated
/// down to the smaller count. When the reference mean is zero, ranks with a
/// nonzero difference are reported as infinite.
///
/// ```
/// # use torsynth::validation::per_rank_deviation;
/// # use torsynth::model::{Consensus, Relay, Fingerprint, Nickname};
/// # fn c(ws: &[u64]) -> Consensus {
/// #     let relays = ws.iter().enumerate().map(|(i, w)| {
/// #         let mut fp = [0u8; 20]; fp[0] = i as u8;
/// #         Relay::new(Fingerprint::from_bytes(fp), Nickname::new("r").unwrap(),
/// #                    [10, 0, 0, i as u8].into(), *w, Default::default())
/// #     }).collect();
/// #     Consensus::new(Default::default(), relays).unwrap()
/// # }
/// let report = per_rank_deviation(&c(&[10, 20, 30]), &c(&[10, 20, 36]))?;
/// assert_eq!(report.median, 0.0);
/// assert!((report.max() - 600.0 / 22.0).abs() < 1e-12);
/// # Ok::<(), torsynth::Error>(())
/// ```
pub fn per_rank_deviation(scaled: &Consensus, reference: &Consensus) -> Result<DeviationReport> {
    if scaled.is_empty() || reference.is_empty() {
        return Err(Error::EmptyConsensus);
    }
    let a = sorted_weights(scaled);
    let b = sorted_weights(reference);
    let m = a.len().min(b.len());
    let (a, b) = (resample(&a, m), resample(&b, m));
    let mean_ref = reference.total_weight() as f64 / reference.len() as f64;
    let per_rank: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| {
            let diff = (x - y).abs();
            if diff == 0.0 {
                0.0
            } else {
                diff / mean_ref * 100.0
            }
        })
        .collect();
    Ok(DeviationReport {
        median: median(&per_rank),
        per_rank,
        n_compared: m,
        scaled_cdf: weight_cdf(scaled, None),
        reference_cdf: weight_cdf(reference, None),
    })
}
