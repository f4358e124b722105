//! Typical-period aggregation of input time series by k-medoids.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::component::Profiles;
use crate::horizon::Horizon;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AggregationError {
    #[error("series length {length} is not a multiple of the period length {period_length}")]
    IndivisibleLength { length: usize, period_length: usize },
    #[error("k = {k} exceeds the {periods} available periods")]
    KTooLarge { k: usize, periods: usize },
    #[error("k and the period length must be at least 1")]
    Empty,
    #[error("profile `{profile}` has {found} values, expected {expected}")]
    LengthMismatch { profile: String, expected: usize, found: usize },
    #[error("profile `{profile}` contains a non-finite value")]
    NonFinite { profile: String },
    #[error("result has {found} steps, expected {expected}")]
    HorizonMismatch { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypicalPeriodSet {
    pub period_length: usize,
    /// Original period index of each typical period, ascending.
    pub medoids: Vec<usize>,
    /// Number of original periods each typical period stands for.
    pub weights: Vec<f64>,
    /// Typical period (index into `medoids`) of every original period.
    pub assignment: Vec<usize>,
}

impl TypicalPeriodSet {
    pub fn k(&self) -> usize {
        self.medoids.len()
    }

    pub fn original_periods(&self) -> usize {
        self.assignment.len()
    }

    /// Weighted horizon over the typical periods.
    pub fn horizon(&self, dt_hours: f64) -> Horizon {
        Horizon::typical_periods(self.period_length, &self.weights, dt_hours)
    }

    /// Maps a series over the typical periods back to the full horizon.
    pub fn expand(&self, series: &[f64]) -> Result<Vec<f64>, AggregationError> {
        let l = self.period_length;
        if series.len() != self.k() * l {
            return Err(AggregationError::HorizonMismatch {
                expected: self.k() * l,
                found: series.len(),
            });
        }
        Ok(self
            .assignment
            .iter()
            .flat_map(|&j| series[j * l..(j + 1) * l].iter().copied())
            .collect())
    }

    /// Weighted sum of a series over the typical periods.
    pub fn weighted_total(&self, series: &[f64]) -> f64 {
        let l = self.period_length;
        self.weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * series[j * l..(j + 1) * l].iter().sum::<f64>())
            .sum()
    }
}

/// Clusters the periods of all profiles jointly and returns the typical
/// period set with the profiles cut down to the medoid periods.
pub fn aggregate_series(
    profiles: &Profiles,
    period_length: usize,
    k: usize,
) -> Result<(TypicalPeriodSet, Profiles), AggregationError> {
    if period_length == 0 || k == 0 {
        return Err(AggregationError::Empty);
    }
    let length = profiles.values().next().map_or(0, Vec::len);
    for (name, s) in profiles {
        if s.len() != length {
            return Err(AggregationError::LengthMismatch {
                profile: name.clone(),
                expected: length,
                found: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(AggregationError::NonFinite { profile: name.clone() });
        }
    }
    if !length.is_multiple_of(period_length) {
        return Err(AggregationError::IndivisibleLength { length, period_length });
    }
    let periods = length / period_length;
    if k > periods {
        return Err(AggregationError::KTooLarge { k, periods });
    }

    let features = period_features(profiles, period_length, periods);
    let dist: Vec<Vec<f64>> = features
        .iter()
        .map(|a| features.iter().map(|b| euclidean(a, b)).collect())
        .collect();
    let medoids = k_medoids(&dist, k);

    let assignment: Vec<usize> = (0..periods)
        .map(|p| match medoids.iter().position(|&m| m == p) {
            Some(j) => j,
            None => nearest(&dist[p], &medoids),
        })
        .collect();
    let mut weights = vec![0.0; k];
    for &j in &assignment {
        weights[j] += 1.0;
    }
    let aggregated = profiles
        .iter()
        .map(|(name, s)| {
            let cut = medoids
                .iter()
                .flat_map(|&m| s[m * period_length..(m + 1) * period_length].iter().copied())
                .collect();
            (name.clone(), cut)
        })
        .collect();
    Ok((
        TypicalPeriodSet {
            period_length,
            medoids,
            weights,
            assignment,
        },
        aggregated,
    ))
}

/// Concatenated min-max normalized values of every profile, per period.
fn period_features(profiles: &Profiles, period_length: usize, periods: usize) -> Vec<Vec<f64>> {
    let mut features = vec![Vec::with_capacity(period_length * profiles.len()); periods];
    for s in profiles.values() {
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for (p, f) in features.iter_mut().enumerate() {
            for &v in &s[p * period_length..(p + 1) * period_length] {
                f.push(if span > 0.0 { (v - lo) / span } else { 0.0 });
            }
        }
    }
    features
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Position in `medoids` of the closest medoid, lowest position on ties.
fn nearest(row: &[f64], medoids: &[usize]) -> usize {
    let mut best = 0;
    for (j, &m) in medoids.iter().enumerate() {
        if row[m] < row[medoids[best]] {
            best = j;
        }
    }
    best
}

fn total_cost(dist: &[Vec<f64>], medoids: &[usize]) -> f64 {
    dist.iter()
        .map(|row| medoids.iter().map(|&m| row[m]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Farthest-point seeding from period 0, then best-improvement swaps until
/// no swap lowers the total distance. Returns sorted medoid indices.
fn k_medoids(dist: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = dist.len();
    let mut medoids = vec![0];
    let mut closest: Vec<f64> = dist[0].clone();
    while medoids.len() < k {
        let mut pick = None;
        for p in (0..n).filter(|p| !medoids.contains(p)) {
            if pick.is_none_or(|q: usize| closest[p] > closest[q]) {
                pick = Some(p);
            }
        }
        let p = pick.expect("k does not exceed the period count");
        medoids.push(p);
        for (c, d) in closest.iter_mut().zip(&dist[p]) {
            *c = c.min(*d);
        }
    }
    medoids.sort_unstable();

    let mut cost = total_cost(dist, &medoids);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..k {
            for o in (0..n).filter(|o| !medoids.contains(o)) {
                let mut trial = medoids.clone();
                trial[i] = o;
                let c = total_cost(dist, &trial);
                let threshold = best.map_or(cost, |b| b.2);
                if c < threshold - 1e-12 {
                    best = Some((i, o, c));
                }
            }
        }
        let Some((i, o, c)) = best else { break };
        medoids[i] = o;
        medoids.sort_unstable();
        cost = c;
    }
    medoids
}

/// Expands every series of a typical-period result to the full horizon.
pub fn expand_results(
    results: &BTreeMap<String, Vec<f64>>,
    set: &TypicalPeriodSet,
) -> Result<BTreeMap<String, Vec<f64>>, AggregationError> {
    results
        .iter()
        .map(|(name, s)| Ok((name.clone(), set.expand(s)?)))
        .collect()
}
