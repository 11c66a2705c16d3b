use std::collections::BTreeMap;

use super::{ArchetypeError, NOISE};
use crate::util::euclidean;

fn inlier_groups(labels: &[i32]) -> BTreeMap<i32, Vec<usize>> {
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l != NOISE {
            groups.entry(l).or_default().push(i);
        }
    }
    groups
}

/// Mean silhouette over non-noise points. Singleton clusters score 0.
/// `None` with fewer than two clusters.
pub fn silhouette_inliers(points: &[Vec<f64>], labels: &[i32]) -> Option<f64> {
    let groups = inlier_groups(labels);
    if groups.len() < 2 {
        return None;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (&l, members) in &groups {
        for &i in members {
            count += 1;
            if members.len() == 1 {
                continue;
            }
            let mean_to = |g: &[usize]| {
                g.iter()
                    .filter(|&&j| j != i)
                    .map(|&j| euclidean(&points[i], &points[j]))
                    .sum::<f64>()
                    / (g.len() - usize::from(g.contains(&i))) as f64
            };
            let a = mean_to(members);
            let b = groups
                .iter()
                .filter(|(k, _)| **k != l)
                .map(|(_, g)| mean_to(g))
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                total += (b - a) / m;
            }
        }
    }
    Some(total / count as f64)
}

/// Davies-Bouldin index over non-noise clusters; coincident centroids add 0.
/// `None` with fewer than two clusters.
pub fn davies_bouldin(points: &[Vec<f64>], labels: &[i32]) -> Option<f64> {
    let groups = inlier_groups(labels);
    if groups.len() < 2 {
        return None;
    }
    let centroids: Vec<Vec<f64>> = groups.values().map(|g| centroid(points, g)).collect();
    let scatter: Vec<f64> = groups
        .values()
        .zip(&centroids)
        .map(|(g, c)| g.iter().map(|&i| euclidean(&points[i], c)).sum::<f64>() / g.len() as f64)
        .collect();
    let k = centroids.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = euclidean(&centroids[i], &centroids[j]);
            let r = if d > 0.0 { (scatter[i] + scatter[j]) / d } else { 0.0 };
            worst = worst.max(r);
        }
        total += worst;
    }
    Some(total / k as f64)
}

pub(crate) fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points.first().map_or(0, Vec::len);
    let mut c = vec![0.0; dim];
    for &i in members {
        for (s, v) in c.iter_mut().zip(&points[i]) {
            *s += v;
        }
    }
    c.iter_mut().for_each(|v| *v /= members.len() as f64);
    c
}

fn pairs(x: u64) -> i128 {
    (x as i128) * (x as i128 - 1) / 2
}

/// Adjusted Rand index; noise (−1) is treated as one ordinary class.
/// Returns 1.0 when the expected and maximum indices coincide.
pub fn adjusted_rand_index(a: &[i32], b: &[i32]) -> Result<f64, ArchetypeError> {
    if a.len() != b.len() {
        return Err(ArchetypeError::LengthMismatch(a.len(), b.len()));
    }
    let mut table: BTreeMap<(i32, i32), u64> = BTreeMap::new();
    let mut rows: BTreeMap<i32, u64> = BTreeMap::new();
    let mut cols: BTreeMap<i32, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: i128 = table.values().map(|&v| pairs(v)).sum();
    let sa: i128 = rows.values().map(|&v| pairs(v)).sum();
    let sb: i128 = cols.values().map(|&v| pairs(v)).sum();
    let total = pairs(a.len() as u64);
    // Scaled by 2·C(n,2) so the ratio is a single division of integers.
    let num = 2 * (index * total - sa * sb);
    let den = (sa + sb) * total - 2 * sa * sb;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ari_hand_case() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), -0.5);
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[0, 0, 0]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn silhouette_two_pairs() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 0.1], vec![10.0, 0.0], vec![10.0, 0.1]];
        let s = silhouette_inliers(&pts, &[0, 0, 1, 1]).unwrap();
        assert!(s > 0.98 && s < 1.0, "{s}");
        let same = vec![vec![1.0, 1.0]; 4];
        assert_eq!(silhouette_inliers(&same, &[0, 0, 1, 1]), Some(0.0));
        assert_eq!(silhouette_inliers(&pts, &[0, 0, 0, -1]), None);
    }

    #[test]
    fn silhouette_ignores_noise_and_singletons() {
        let pts = vec![vec![0.0], vec![1.0], vec![50.0], vec![100.0]];
        let with_noise = silhouette_inliers(&pts, &[0, 0, -1, 1]).unwrap();
        // Points 0 and 1: a = 1, b = 100 and 99; point 3 is a singleton.
        let expect = ((99.0 / 100.0) + (98.0 / 99.0) + 0.0) / 3.0;
        assert!((with_noise - expect).abs() < 1e-12);
    }

    #[test]
    fn davies_bouldin_cases() {
        let pts = vec![vec![0.0], vec![2.0], vec![10.0], vec![12.0]];
        // Scatter 1 each, centroid distance 10.
        assert!((davies_bouldin(&pts, &[0, 0, 1, 1]).unwrap() - 0.2).abs() < 1e-12);
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] * 7.0]).collect();
        assert!((davies_bouldin(&scaled, &[0, 0, 1, 1]).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(davies_bouldin(&pts, &[0, 0, 0, 0]), None);
    }
}
