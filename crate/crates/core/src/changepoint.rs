//! Exact penalized change-point detection (PELT) under a Gaussian
//! mean-and-variance cost, plus an exhaustive oracle for short series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Variance floor applied to every segment so constant runs have finite cost.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Longest series the exhaustive search accepts.
pub const BRUTE_FORCE_MAX_LEN: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum ChangepointError {
    #[error("exhaustive search refuses n = {0} (limit {BRUTE_FORCE_MAX_LEN})")]
    TooLong(usize),
    #[error("invalid PELT configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(labels.len(), values.len(), "one label per value");
        Self { labels, values }
    }

    /// Unlabelled series; labels are the 0-based indices.
    pub fn from_values(values: Vec<f64>) -> Self {
        let labels = (0..values.len()).map(|i| i.to_string()).collect();
        Self { labels, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    #[default]
    GaussianMeanVar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeltConfig {
    /// Penalty per breakpoint is `penalty_coeff * ln(n)`.
    pub penalty_coeff: f64,
    /// Minimum segment length in buckets.
    pub min_size: usize,
    /// Breakpoints are restricted to multiples of `jump`.
    pub jump: usize,
    pub cost: CostModel,
}

impl Default for PeltConfig {
    fn default() -> Self {
        Self {
            penalty_coeff: 4.2,
            min_size: 1,
            jump: 2,
            cost: CostModel::GaussianMeanVar,
        }
    }
}

impl PeltConfig {
    pub fn validate(&self) -> Result<(), ChangepointError> {
        if !(self.penalty_coeff > 0.0 && self.penalty_coeff.is_finite()) {
            return Err(ChangepointError::Config("penalty_coeff must be positive".into()));
        }
        if self.min_size == 0 || self.jump == 0 {
            return Err(ChangepointError::Config("min_size and jump must be at least 1".into()));
        }
        Ok(())
    }

    pub fn penalty(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.penalty_coeff * (n as f64).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub start: usize,
    pub end: usize,
    pub mean: f64,
    /// Biased (MLE) variance, before flooring.
    pub variance: f64,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBreaks {
    /// Index of the first bucket of each new segment, ascending.
    pub breakpoints: Vec<usize>,
    /// Sum of segment costs plus the penalty times the breakpoint count.
    pub total_cost: f64,
    pub penalty: f64,
    pub variance_floor: f64,
    pub segments: Vec<SegmentStats>,
    pub warnings: Vec<String>,
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Twice the Gaussian negative log-likelihood of `values[a..b]` at its MLE:
/// `L * (ln(2 pi var) + 1)` with the variance floored at [`VARIANCE_FLOOR`].
pub fn segment_cost(values: &[f64], a: usize, b: usize) -> f64 {
    assert!(b > a && b <= values.len(), "segment [{a}, {b}) out of range");
    let (_, var) = moments(&values[a..b]);
    let len = (b - a) as f64;
    len * ((2.0 * std::f64::consts::PI * var.max(VARIANCE_FLOOR)).ln() + 1.0)
}

fn breaks_from(values: &[f64], breakpoints: Vec<usize>, penalty: f64, warnings: Vec<String>) -> SeriesBreaks {
    let n = values.len();
    let mut bounds = vec![0];
    bounds.extend(&breakpoints);
    bounds.push(n);
    let mut total = penalty * breakpoints.len() as f64;
    let mut segments = Vec::new();
    if n > 0 {
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (mean, variance) = moments(&values[a..b]);
            total += segment_cost(values, a, b);
            segments.push(SegmentStats {
                start: a,
                end: b,
                mean,
                variance,
                length: b - a,
            });
        }
    }
    SeriesBreaks {
        breakpoints,
        total_cost: total,
        penalty,
        variance_floor: VARIANCE_FLOOR,
        segments,
        warnings,
    }
}

fn too_short(series: &TimeSeries, cfg: &PeltConfig, penalty: f64) -> Option<SeriesBreaks> {
    let n = series.len();
    (n < 2 * cfg.min_size).then(|| {
        breaks_from(
            &series.values,
            vec![],
            penalty,
            vec![format!(
                "series of length {n} is shorter than 2 * min_size = {}; no detection attempted",
                2 * cfg.min_size
            )],
        )
    })
}

/// Optimal penalized segmentation by the PELT dynamic program.
///
/// Candidate breakpoints are the multiples of `jump` that leave every segment
/// at least `min_size` long. Among equal-cost predecessors the one with fewer
/// breakpoints (then the smaller index) is kept.
pub fn pelt(series: &TimeSeries, cfg: &PeltConfig) -> Result<SeriesBreaks, ChangepointError> {
    cfg.validate()?;
    let values = &series.values;
    let n = values.len();
    let beta = cfg.penalty(n);
    if let Some(short) = too_short(series, cfg, beta) {
        return Ok(short);
    }

    // Ends evaluated by the DP: admissible breakpoints plus n itself.
    let mut ends: Vec<usize> = (1..n).filter(|t| t % cfg.jump == 0).collect();
    ends.push(n);

    let mut best = vec![f64::INFINITY; n + 1];
    let mut count = vec![usize::MAX; n + 1];
    let mut last = vec![0usize; n + 1];
    best[0] = -beta;
    count[0] = 0;
    // (t, u_from): t stops being a candidate for ends u >= u_from. A prune
    // decided at s only holds once [s, u) is itself a legal segment.
    let mut candidates: Vec<(usize, usize)> = vec![(0, usize::MAX)];

    for &s in &ends {
        candidates.retain(|&(_, u_from)| s < u_from);
        let mut chosen: Option<(f64, usize, usize)> = None;
        let mut partials: Vec<Option<f64>> = Vec::with_capacity(candidates.len());
        for &(t, _) in &candidates {
            if s - t < cfg.min_size || !best[t].is_finite() {
                partials.push(None);
                continue;
            }
            let partial = best[t] + segment_cost(values, t, s);
            partials.push(Some(partial));
            let key = (partial + beta, count[t] + 1, t);
            let better = match chosen {
                None => true,
                Some(cur) => key.0 < cur.0 || (key.0 == cur.0 && (key.1, key.2) < (cur.1, cur.2)),
            };
            if better {
                chosen = Some(key);
            }
        }
        if let Some((total, cnt, t)) = chosen {
            best[s] = total;
            count[s] = cnt;
            last[s] = t;
        }
        if s == n {
            break;
        }
        // Prune t when F(t) + C(t, s) > F(s).
        for ((_, u_from), partial) in candidates.iter_mut().zip(&partials) {
            if partial.is_some_and(|p| p > best[s]) && *u_from == usize::MAX {
                *u_from = s + cfg.min_size;
            }
        }
        if best[s].is_finite() {
            candidates.push((s, usize::MAX));
        }
    }

    let mut breakpoints = Vec::new();
    let mut s = n;
    while s > 0 {
        let t = last[s];
        if t > 0 {
            breakpoints.push(t);
        }
        s = t;
    }
    breakpoints.reverse();
    Ok(breaks_from(values, breakpoints, beta, vec![]))
}

/// Exhaustive minimization over every admissible breakpoint subset, with the
/// same objective and tie-breaking as [`pelt`] (fewer breakpoints, then the
/// lexicographically smallest list).
pub fn brute_force_segmentation(series: &TimeSeries, cfg: &PeltConfig) -> Result<SeriesBreaks, ChangepointError> {
    cfg.validate()?;
    let values = &series.values;
    let n = values.len();
    if n > BRUTE_FORCE_MAX_LEN {
        return Err(ChangepointError::TooLong(n));
    }
    let beta = cfg.penalty(n);
    if let Some(short) = too_short(series, cfg, beta) {
        return Ok(short);
    }
    let admissible: Vec<usize> = (1..n).filter(|t| t % cfg.jump == 0).collect();
    let mut table = vec![vec![0.0; n + 1]; n + 1];
    for (a, row) in table.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate().skip(a + 1) {
            *cell = segment_cost(values, a, b);
        }
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1u32 << admissible.len()) {
        let bps: Vec<usize> = admissible
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &t)| t)
            .collect();
        let mut prev = 0;
        let mut cost = beta * bps.len() as f64;
        let mut ok = true;
        for &b in bps.iter().chain(std::iter::once(&n)) {
            if b - prev < cfg.min_size {
                ok = false;
                break;
            }
            cost += table[prev][b];
            prev = b;
        }
        if !ok {
            continue;
        }
        let better = match &best {
            None => true,
            Some((c, cur)) => cost < *c || (cost == *c && (bps.len(), &bps) < (cur.len(), cur)),
        };
        if better {
            best = Some((cost, bps));
        }
    }
    let (_, bps) = best.expect("the empty segmentation is always admissible");
    Ok(breaks_from(values, bps, beta, vec![]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn step() -> TimeSeries {
        TimeSeries::from_values([0.0; 5].iter().chain(&[5.0; 5]).copied().collect())
    }

    #[test]
    fn cost_of_constant_segment_uses_floor() {
        let v = [3.0; 4];
        let expect = 4.0 * ((2.0 * PI * 1e-8).ln() + 1.0);
        assert!((segment_cost(&v, 0, 4) - expect).abs() < 1e-12);
    }

    #[test]
    fn cost_two_points() {
        let v = [0.0, 2.0];
        assert!((segment_cost(&v, 0, 2) - 5.675_754_132_818_691).abs() < 1e-9);
    }

    #[test]
    fn step_detected_with_unit_jump() {
        let cfg = PeltConfig {
            jump: 1,
            ..Default::default()
        };
        let r = pelt(&step(), &cfg).unwrap();
        assert_eq!(r.breakpoints, vec![5]);
        assert!((r.penalty - 4.2 * 10f64.ln()).abs() < 1e-12);
        let bf = brute_force_segmentation(&step(), &cfg).unwrap();
        assert_eq!(bf.breakpoints, vec![5]);
    }

    #[test]
    fn step_with_even_jump_brackets_the_odd_break() {
        // Index 5 is not a multiple of 2; the best even-index segmentation
        // isolates the mixed pair [4, 6).
        let cfg = PeltConfig::default();
        let r = pelt(&step(), &cfg).unwrap();
        let bf = brute_force_segmentation(&step(), &cfg).unwrap();
        assert_eq!(bf.breakpoints, vec![4, 6]);
        assert_eq!(r.breakpoints, bf.breakpoints);
        assert!((r.total_cost - bf.total_cost).abs() < 1e-9);
    }

    #[test]
    fn constant_series_has_no_breaks() {
        for n in [2, 7, 30, 100] {
            let s = TimeSeries::from_values(vec![1.5; n]);
            let r = pelt(
                &s,
                &PeltConfig {
                    jump: 1,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(r.breakpoints.is_empty(), "n = {n}");
        }
    }

    #[test]
    fn two_point_enumeration() {
        let s = TimeSeries::from_values(vec![0.0, 10.0]);
        let cfg = PeltConfig {
            jump: 1,
            ..Default::default()
        };
        let bf = brute_force_segmentation(&s, &cfg).unwrap();
        let single = segment_cost(&s.values, 0, 2);
        let split = segment_cost(&s.values, 0, 1) + segment_cost(&s.values, 1, 2) + cfg.penalty(2);
        assert!((bf.total_cost - single.min(split)).abs() < 1e-12);
    }

    #[test]
    fn empty_segmentation_cost() {
        let s = TimeSeries::from_values(vec![0.3, -1.0, 2.0, 0.5]);
        let cfg = PeltConfig {
            penalty_coeff: 1e6,
            jump: 1,
            ..Default::default()
        };
        let bf = brute_force_segmentation(&s, &cfg).unwrap();
        assert!(bf.breakpoints.is_empty());
        assert_eq!(bf.total_cost, segment_cost(&s.values, 0, 4));
    }

    #[test]
    fn short_series_warns() {
        let cfg = PeltConfig {
            min_size: 3,
            ..Default::default()
        };
        let r = pelt(&TimeSeries::from_values(vec![1.0, 2.0, 3.0]), &cfg).unwrap();
        assert!(r.breakpoints.is_empty());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn brute_force_guard() {
        let s = TimeSeries::from_values(vec![0.0; 25]);
        assert_eq!(
            brute_force_segmentation(&s, &PeltConfig::default()),
            Err(ChangepointError::TooLong(25))
        );
    }

    #[test]
    fn invalid_config() {
        let s = TimeSeries::from_values(vec![0.0; 4]);
        assert!(pelt(
            &s,
            &PeltConfig {
                jump: 0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(pelt(
            &s,
            &PeltConfig {
                penalty_coeff: 0.0,
                ..Default::default()
            }
        )
        .is_err());
    }

    fn series(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 2..=max)
    }

    proptest! {
        #[test]
        fn pelt_matches_oracle(v in series(14), min_size in 1usize..4, jump in 1usize..4, coeff in 0.5f64..6.0) {
            let cfg = PeltConfig { penalty_coeff: coeff, min_size, jump, ..Default::default() };
            let s = TimeSeries::from_values(v);
            let p = pelt(&s, &cfg).unwrap();
            let b = brute_force_segmentation(&s, &cfg).unwrap();
            prop_assert!((p.total_cost - b.total_cost).abs() < 1e-9, "{} vs {}", p.total_cost, b.total_cost);
        }

        #[test]
        fn segments_respect_min_size(v in series(40), min_size in 1usize..5, jump in 1usize..4) {
            let cfg = PeltConfig { min_size, jump, penalty_coeff: 0.5, ..Default::default() };
            let r = pelt(&TimeSeries::from_values(v.clone()), &cfg).unwrap();
            if v.len() >= 2 * min_size {
                prop_assert!(r.segments.iter().all(|s| s.length >= min_size));
            }
            prop_assert_eq!(r.segments.iter().map(|s| s.length).sum::<usize>(), v.len());
            prop_assert!(r.breakpoints.iter().all(|b| b % jump == 0));
        }

        #[test]
        fn higher_penalty_never_adds_breaks(v in series(30), lo in 0.1f64..3.0, extra in 0.0f64..5.0) {
            let s = TimeSeries::from_values(v);
            let a = pelt(&s, &PeltConfig { penalty_coeff: lo, jump: 1, ..Default::default() }).unwrap();
            let b = pelt(&s, &PeltConfig { penalty_coeff: lo + extra, jump: 1, ..Default::default() }).unwrap();
            prop_assert!(b.breakpoints.len() <= a.breakpoints.len());
        }

        #[test]
        fn shift_invariant(v in series(30), c in -3.0f64..3.0) {
            let cfg = PeltConfig::default();
            let a = pelt(&TimeSeries::from_values(v.clone()), &cfg).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let b = pelt(&TimeSeries::from_values(shifted), &cfg).unwrap();
            prop_assert_eq!(a.breakpoints, b.breakpoints);
        }
    }
}

#[cfg(test)]
mod tie_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pelt_matches_oracle_on_discrete_values(
            v in prop::collection::vec((0i32..3).prop_map(f64::from), 2..=14),
            min_size in 1usize..4,
            jump in 1usize..3,
        ) {
            let cfg = PeltConfig { min_size, jump, ..Default::default() };
            let s = TimeSeries::from_values(v);
            let p = pelt(&s, &cfg).unwrap();
            let b = brute_force_segmentation(&s, &cfg).unwrap();
            prop_assert!((p.total_cost - b.total_cost).abs() < 1e-9, "{} vs {}", p.total_cost, b.total_cost);
        }
    }
}
