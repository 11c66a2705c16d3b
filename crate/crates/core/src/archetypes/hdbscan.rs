use rayon::prelude::*;

use super::{ArchetypeError, HdbscanConfig, NOISE};
use crate::util::euclidean;

/// Distances below this are treated as this value when converted to λ.
const MIN_DISTANCE: f64 = 1e-12;

pub(crate) struct Flat {
    pub labels: Vec<i32>,
    pub strength: Vec<f64>,
    pub stabilities: Vec<f64>,
}

pub(crate) fn validate_points(points: &[Vec<f64>]) -> Result<usize, ArchetypeError> {
    let dim = points.first().map_or(0, Vec::len);
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(ArchetypeError::Dimension {
                row: i,
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ArchetypeError::NonFinite(i));
        }
    }
    Ok(dim)
}

fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .par_iter()
        .map(|a| points.iter().map(|b| euclidean(a, b)).collect())
        .collect()
}

/// Distance to the `k`-th nearest point, the point itself being the 0-th.
fn core_distances(dist: &[Vec<f64>], k: usize) -> Vec<f64> {
    dist.par_iter()
        .map(|row| {
            let mut r = row.clone();
            let k = k.min(r.len() - 1);
            *r.select_nth_unstable_by(k, f64::total_cmp).1
        })
        .collect()
}

/// Dense Prim over the mutual-reachability graph. Edges are `(a, b, weight)`.
fn mst(dist: &[Vec<f64>], core: &[f64], alpha: f64) -> Vec<(usize, usize, f64)> {
    let n = dist.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = (dist[current][j] / alpha).max(core[current]).max(core[j]);
            if w < best[j] {
                best[j] = w;
                from[j] = current;
            }
            if next == usize::MAX || best[j] < next_w {
                next = j;
                next_w = best[j];
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, next_w));
        current = next;
    }
    edges
}

struct Dendrogram {
    /// Children of merge node `n + i`.
    children: Vec<(usize, usize)>,
    distance: Vec<f64>,
    size: Vec<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn single_linkage(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Dendrogram {
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut node_size = vec![1usize; 2 * n];
    let mut d = Dendrogram {
        children: Vec::with_capacity(n - 1),
        distance: Vec::with_capacity(n - 1),
        size: Vec::with_capacity(n - 1),
    };
    for (i, (a, b, w)) in edges.into_iter().enumerate() {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        let node = n + i;
        parent[ra] = node;
        parent[rb] = node;
        node_size[node] = node_size[ra] + node_size[rb];
        d.children.push((ra, rb));
        d.distance.push(w);
        d.size.push(node_size[node]);
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Child {
    Point(usize),
    Cluster(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CondensedEdge {
    pub parent: usize,
    pub child: Child,
    pub lambda: f64,
    pub size: usize,
}

pub(crate) struct CondensedTree {
    pub edges: Vec<CondensedEdge>,
    /// λ at which each condensed cluster was born; cluster 0 is the root.
    pub birth: Vec<f64>,
    pub parent: Vec<Option<usize>>,
}

fn lambda_of(d: f64) -> f64 {
    1.0 / d.max(MIN_DISTANCE)
}

fn condense(n: usize, dendro: &Dendrogram, min_cluster_size: usize) -> CondensedTree {
    let size_of = |node: usize| if node < n { 1 } else { dendro.size[node - n] };
    let leaves = |node: usize| {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let (a, b) = dendro.children[x - n];
                stack.push(b);
                stack.push(a);
            }
        }
        out
    };
    let mut tree = CondensedTree {
        edges: Vec::new(),
        birth: vec![0.0],
        parent: vec![None],
    };
    let root = 2 * n - 2;
    let mut stack = vec![(root, 0usize)];
    while let Some((node, cluster)) = stack.pop() {
        if node < n {
            tree.edges.push(CondensedEdge {
                parent: cluster,
                child: Child::Point(node),
                lambda: tree.birth[cluster],
                size: 1,
            });
            continue;
        }
        let lambda = lambda_of(dendro.distance[node - n]);
        let (left, right) = dendro.children[node - n];
        let big_l = size_of(left) >= min_cluster_size;
        let big_r = size_of(right) >= min_cluster_size;
        match (big_l, big_r) {
            (true, true) => {
                for child in [left, right] {
                    let id = tree.birth.len();
                    tree.birth.push(lambda);
                    tree.parent.push(Some(cluster));
                    tree.edges.push(CondensedEdge {
                        parent: cluster,
                        child: Child::Cluster(id),
                        lambda,
                        size: size_of(child),
                    });
                    stack.push((child, id));
                }
            }
            (false, false) => {
                for p in leaves(left).into_iter().chain(leaves(right)) {
                    tree.edges.push(CondensedEdge {
                        parent: cluster,
                        child: Child::Point(p),
                        lambda,
                        size: 1,
                    });
                }
            }
            (true, false) | (false, true) => {
                let (keep, drop) = if big_l { (left, right) } else { (right, left) };
                for p in leaves(drop) {
                    tree.edges.push(CondensedEdge {
                        parent: cluster,
                        child: Child::Point(p),
                        lambda,
                        size: 1,
                    });
                }
                stack.push((keep, cluster));
            }
        }
    }
    tree
}

fn stabilities(tree: &CondensedTree) -> Vec<f64> {
    let mut s = vec![0.0; tree.birth.len()];
    for e in &tree.edges {
        s[e.parent] += (e.lambda - tree.birth[e.parent]) * e.size as f64;
    }
    s
}

/// Excess-of-mass selection. The root is never selected.
pub(crate) fn select_eom(tree: &CondensedTree, stability: &[f64]) -> Vec<bool> {
    let m = tree.birth.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (c, p) in tree.parent.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(c);
        }
    }
    let mut selected = vec![false; m];
    let mut subtree = vec![0.0; m];
    // Children always have larger ids than their parent.
    for c in (1..m).rev() {
        let below: f64 = children[c].iter().map(|&k| subtree[k]).sum();
        if children[c].is_empty() || stability[c] > below {
            selected[c] = true;
            subtree[c] = stability[c];
            let mut stack = children[c].clone();
            while let Some(k) = stack.pop() {
                selected[k] = false;
                stack.extend(&children[k]);
            }
        } else {
            subtree[c] = below;
        }
    }
    selected
}

pub(crate) fn run(points: &[Vec<f64>], cfg: &HdbscanConfig) -> Result<Flat, ArchetypeError> {
    cfg.validate()?;
    validate_points(points)?;
    let n = points.len();
    if n < cfg.min_cluster_size {
        return Err(ArchetypeError::TooFewPoints {
            n,
            min_cluster_size: cfg.min_cluster_size,
        });
    }
    let dist = distance_matrix(points);
    let core = core_distances(&dist, cfg.min_samples);
    let dendro = single_linkage(n, mst(&dist, &core, cfg.alpha));
    let tree = condense(n, &dendro, cfg.min_cluster_size);
    let stability = stabilities(&tree);
    let selected = select_eom(&tree, &stability);
    Ok(flatten(n, &tree, &stability, &selected))
}

fn flatten(n: usize, tree: &CondensedTree, stability: &[f64], selected: &[bool]) -> Flat {
    let m = tree.birth.len();
    // Nearest selected ancestor-or-self of each condensed cluster.
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for c in 0..m {
        owner[c] = if selected[c] {
            Some(c)
        } else {
            tree.parent[c].and_then(|p| owner[p])
        };
    }
    let mut raw = vec![None; n];
    let mut lambda_p = vec![0.0; n];
    for e in &tree.edges {
        if let Child::Point(p) = e.child {
            raw[p] = owner[e.parent];
            lambda_p[p] = e.lambda;
        }
    }
    // Relabel by smallest member index.
    let mut rename: Vec<Option<i32>> = vec![None; m];
    let mut order = Vec::new();
    for r in raw.iter().flatten() {
        if rename[*r].is_none() {
            rename[*r] = Some(order.len() as i32);
            order.push(*r);
        }
    }
    let mut lambda_max = vec![0.0f64; order.len()];
    let labels: Vec<i32> = raw.iter().map(|r| r.and_then(|c| rename[c]).unwrap_or(NOISE)).collect();
    for (p, &l) in labels.iter().enumerate() {
        if l != NOISE {
            lambda_max[l as usize] = lambda_max[l as usize].max(lambda_p[p]);
        }
    }
    let strength = labels
        .iter()
        .enumerate()
        .map(|(p, &l)| {
            if l == NOISE {
                return 0.0;
            }
            let max = lambda_max[l as usize];
            if max > 0.0 && max.is_finite() {
                (lambda_p[p] / max).min(1.0)
            } else {
                1.0
            }
        })
        .collect();
    Flat {
        labels,
        strength,
        stabilities: order.iter().map(|&c| stability[c]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut out = Vec::new();
        for c in 0..3 {
            for _ in 0..30 {
                out.push(
                    (0..3)
                        .map(|d| if d == c { 5.0 } else { 0.0 } + noise.sample(&mut rng))
                        .collect(),
                );
            }
        }
        out
    }

    #[test]
    fn core_distance_counts_self_as_zeroth() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 3.0, 6.0].iter().map(|x| vec![*x]).collect();
        let d = distance_matrix(&pts);
        assert_eq!(core_distances(&d, 1), vec![1.0, 1.0, 2.0, 3.0]);
        assert_eq!(core_distances(&d, 2), vec![3.0, 2.0, 3.0, 5.0]);
    }

    #[test]
    fn mst_spans_with_minimal_weight() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 3.0, 6.0].iter().map(|x| vec![*x]).collect();
        let d = distance_matrix(&pts);
        let e = mst(&d, &[0.0; 4], 1.0);
        assert_eq!(e.len(), 3);
        assert_eq!(e.iter().map(|x| x.2).sum::<f64>(), 6.0);
    }

    #[test]
    fn selected_clusters_are_disjoint_and_large() {
        let pts = blobs(4);
        let cfg = HdbscanConfig::default();
        let dist = distance_matrix(&pts);
        let core = core_distances(&dist, cfg.min_samples);
        let dendro = single_linkage(pts.len(), mst(&dist, &core, 1.0));
        let tree = condense(pts.len(), &dendro, cfg.min_cluster_size);
        let sel = select_eom(&tree, &stabilities(&tree));
        assert!(!sel[0]);
        for c in 0..sel.len() {
            if !sel[c] {
                continue;
            }
            let mut p = tree.parent[c];
            while let Some(a) = p {
                assert!(!sel[a], "cluster {c} has selected ancestor {a}");
                p = tree.parent[a];
            }
        }
        let flat = flatten(pts.len(), &tree, &stabilities(&tree), &sel);
        assert_eq!(flat.stabilities.len(), 3);
        for k in 0..3 {
            assert!(flat.labels.iter().filter(|&&l| l == k).count() >= cfg.min_cluster_size);
        }
        assert!(flat.strength.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn every_point_appears_once_in_condensed_tree() {
        let pts = blobs(8);
        let dist = distance_matrix(&pts);
        let core = core_distances(&dist, 5);
        let dendro = single_linkage(pts.len(), mst(&dist, &core, 1.0));
        let tree = condense(pts.len(), &dendro, 15);
        let mut seen = vec![0; pts.len()];
        for e in &tree.edges {
            if let Child::Point(p) = e.child {
                seen[p] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
