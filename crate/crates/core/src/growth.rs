//! Historical growth of the network.
//!
//! For a time `t` and span `ΔT`, horizontal growth is the ratio of relay
//! counts at `t + ΔT/2` and `t − ΔT/2`; vertical growth is the same ratio of
//! average weight per relay. A value of 1.0 means no change.

use chrono::{NaiveDateTime, TimeDelta};

use crate::error::{Error, Result};
use crate::model::Consensus;

/// Relay count and mean weight of one consensus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseMetricPoint {
    pub t: NaiveDateTime,
    pub n: u64,
    pub b: f64,
}

pub fn base_metrics(consensus: &Consensus) -> Result<BaseMetricPoint> {
    if consensus.is_empty() {
        return Err(Error::EmptyConsensus);
    }
    let n = consensus.len() as u64;
    Ok(BaseMetricPoint { t: consensus.valid_after, n, b: consensus.total_weight() as f64 / n as f64 })
}

/// Growth rates at one sample time; `None` where an endpoint is missing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthPoint {
    pub t: NaiveDateTime,
    pub horizontal: Option<f64>,
    pub vertical: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthSeries {
    pub delta_t: TimeDelta,
    pub points: Vec<BaseMetricPoint>,
    /// One entry per element of `points`.
    pub rates: Vec<GrowthPoint>,
    /// Times whose window had a zero denominator and were left undefined.
    pub skipped: Vec<NaiveDateTime>,
}

impl GrowthSeries {
    pub fn horizontal(&self) -> Vec<(NaiveDateTime, f64)> {
        self.rates.iter().filter_map(|p| p.horizontal.map(|h| (p.t, h))).collect()
    }

    pub fn vertical(&self) -> Vec<(NaiveDateTime, f64)> {
        self.rates.iter().filter_map(|p| p.vertical.map(|v| (p.t, v))).collect()
    }
}

/// Index of the sample nearest to `target`, if it lies within `tolerance`.
/// Ties go to the earlier sample.
fn nearest(points: &[BaseMetricPoint], target: NaiveDateTime, tolerance: TimeDelta) -> Option<usize> {
    let idx = points.partition_point(|p| p.t < target);
    let candidates = [idx.checked_sub(1), (idx < points.len()).then_some(idx)];
    candidates
        .into_iter()
        .flatten()
        .min_by_key(|&i| (points[i].t - target).abs())
        .filter(|&i| (points[i].t - target).abs() <= tolerance)
}

/// Computes horizontal and vertical growth at every sample time.
///
/// Each window endpoint is taken from the nearest sample within
/// `snap_tolerance`; if either endpoint has none, both rates are undefined.
/// Nothing is interpolated.
pub fn growth_rates(points: &[BaseMetricPoint], delta_t: TimeDelta, snap_tolerance: TimeDelta) -> Result<GrowthSeries> {
    if delta_t <= TimeDelta::zero() {
        return Err(Error::Parameter("growth span must be positive".to_string()));
    }
    if snap_tolerance < TimeDelta::zero() {
        return Err(Error::Parameter("snap tolerance must not be negative".to_string()));
    }
    if points.windows(2).any(|w| w[0].t >= w[1].t) {
        return Err(Error::Parameter("samples must be in strictly increasing time order".to_string()));
    }
    let half = delta_t / 2;
    let mut rates = Vec::with_capacity(points.len());
    let mut skipped = Vec::new();
    for p in points {
        let before = nearest(points, p.t - half, snap_tolerance);
        let after = nearest(points, p.t + half, snap_tolerance);
        let mut rate = GrowthPoint { t: p.t, horizontal: None, vertical: None };
        if let (Some(lo), Some(hi)) = (before, after) {
            let (lo, hi) = (&points[lo], &points[hi]);
            if lo.n == 0 || lo.b == 0.0 {
                skipped.push(p.t);
            } else {
                rate.horizontal = Some(hi.n as f64 / lo.n as f64);
                rate.vertical = Some(hi.b / lo.b);
            }
        }
        rates.push(rate);
    }
    Ok(GrowthSeries { delta_t, points: points.to_vec(), rates, skipped })
}

/// Centered time-window mean: each output value averages the inputs whose
/// time lies in `[t − window/2, t + window/2]`. Input must be sorted by time.
pub fn moving_average(series: &[(NaiveDateTime, f64)], window: TimeDelta) -> Vec<(NaiveDateTime, f64)> {
    let half = window / 2;
    let (mut lo, mut hi) = (0, 0);
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(series.len());
    for &(t, _) in series {
        while hi < series.len() && series[hi].0 <= t + half {
            sum += series[hi].1;
            hi += 1;
        }
        while series[lo].0 < t - half {
            sum -= series[lo].1;
            lo += 1;
        }
        out.push((t, sum / (hi - lo) as f64));
    }
    out
}
