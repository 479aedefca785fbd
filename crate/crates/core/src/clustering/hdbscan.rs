//! HDBSCAN over a small dense point set: core distances, the mutual
//! reachability minimum spanning tree, single-linkage hierarchy, condensed
//! tree and excess-of-mass cluster selection.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// One edge of the condensed tree. Cluster nodes are numbered from
/// `n_points` upwards (the root is `n_points`); smaller ids are points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

#[derive(Clone, Debug)]
pub struct HdbscanOutput {
    /// Cluster of each point (`0..n_clusters`), `None` for noise.
    pub labels: Vec<Option<u32>>,
    pub core_distances: Vec<f64>,
    pub condensed: Vec<CondensedEdge>,
    /// Stability of each output cluster, indexed by label.
    pub stabilities: Vec<f64>,
    pub n_clusters: usize,
}

/// Row-major point set view.
#[derive(Clone, Copy)]
pub struct Points<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl Points<'_> {
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.row(i), self.row(j))
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Distance to the `min_samples`-th nearest point, counting the point itself
/// as the first (the convention of the reference Python implementation).
pub fn core_distances(points: Points<'_>, min_samples: usize) -> Vec<f64> {
    let n = points.len();
    let k = min_samples.clamp(1, n.max(1));
    if k <= 1 {
        return vec![0.0; n];
    }
    let mut buf = vec![0.0; n.saturating_sub(1)];
    (0..n)
        .map(|i| {
            let mut at = 0;
            for j in 0..n {
                if j != i {
                    buf[at] = points.distance(i, j);
                    at += 1;
                }
            }
            let (_, kth, _) = buf.select_nth_unstable_by(k - 2, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Prim's algorithm on the implicit complete mutual-reachability graph.
fn mutual_reachability_mst(points: Points<'_>, core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n == 0 {
        return edges;
    }
    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = points.distance(current, j).max(core[current]).max(core[j]);
            if d < best[j] {
                best[j] = d;
                parent[j] = current;
            }
            if best[j] < next_d || next == usize::MAX {
                next_d = best[j];
                next = j;
            }
        }
        edges.push((parent[next], next, best[next]));
        in_tree[next] = true;
        current = next;
    }
    edges
}

/// Merge record: children, merge distance and merged size.
#[derive(Clone, Copy, Debug)]
struct Merge {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn single_linkage(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Vec<Merge> {
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (a, b, d) in edges {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        let node = n + merges.len();
        parent[ra] = node;
        parent[rb] = node;
        size[node] = size[ra] + size[rb];
        merges.push(Merge {
            left: ra,
            right: rb,
            distance: d,
            size: size[node],
        });
    }
    merges
}

fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> Vec<CondensedEdge> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let root = 2 * n - 2;
    let size_of = |node: usize| if node < n { 1 } else { merges[node - n].size };
    let children = |node: usize| {
        let m = merges[node - n];
        (m.left, m.right, m.distance)
    };
    let subtree = |start: usize| {
        let mut acc = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            acc.push(x);
            if x >= n {
                let (l, r, _) = children(x);
                queue.push_back(l);
                queue.push_back(r);
            }
        }
        acc
    };
    let order = subtree(root);
    let mut relabel = vec![0usize; 2 * n - 1];
    let mut ignore = vec![false; 2 * n - 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    for node in order {
        if ignore[node] || node < n {
            continue;
        }
        let (left, right, distance) = children(node);
        let lambda = 1.0 / distance.max(1e-12);
        let (lc, rc) = (size_of(left), size_of(right));
        let parent_label = relabel[node];
        let spill = |child: usize, ignore: &mut Vec<bool>, out: &mut Vec<CondensedEdge>| {
            for sub in subtree(child) {
                if sub < n {
                    out.push(CondensedEdge {
                        parent: parent_label,
                        child: sub,
                        lambda,
                        size: 1,
                    });
                }
                ignore[sub] = true;
            }
        };
        if lc >= min_cluster_size && rc >= min_cluster_size {
            for (child, count) in [(left, lc), (right, rc)] {
                relabel[child] = next_label;
                out.push(CondensedEdge {
                    parent: parent_label,
                    child: next_label,
                    lambda,
                    size: count,
                });
                next_label += 1;
            }
        } else if lc < min_cluster_size && rc < min_cluster_size {
            spill(left, &mut ignore, &mut out);
            spill(right, &mut ignore, &mut out);
        } else if lc < min_cluster_size {
            relabel[right] = parent_label;
            spill(left, &mut ignore, &mut out);
        } else {
            relabel[left] = parent_label;
            spill(right, &mut ignore, &mut out);
        }
    }
    out
}

/// Runs the full HDBSCAN pipeline with excess-of-mass selection. The root is
/// never selected, so a structureless set comes back as all noise.
pub fn hdbscan(points: Points<'_>, min_cluster_size: usize, min_samples: usize) -> HdbscanOutput {
    let n = points.len();
    let core = core_distances(points, min_samples);
    if n < 2 {
        return HdbscanOutput {
            labels: vec![None; n],
            core_distances: core,
            condensed: Vec::new(),
            stabilities: Vec::new(),
            n_clusters: 0,
        };
    }
    let mst = mutual_reachability_mst(points, &core);
    let merges = single_linkage(n, mst);
    let condensed = condense(n, &merges, min_cluster_size.max(2));

    let n_nodes = condensed.iter().map(|e| e.parent.max(e.child) + 1).max().unwrap_or(n + 1).max(n + 1) - n;
    let mut birth = vec![0.0f64; n_nodes];
    let mut cluster_parent = vec![usize::MAX; n_nodes];
    let mut cluster_children: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for e in &condensed {
        if e.child >= n {
            birth[e.child - n] = e.lambda;
            cluster_parent[e.child - n] = e.parent - n;
            cluster_children[e.parent - n].push(e.child - n);
        }
    }
    let mut stability = vec![0.0f64; n_nodes];
    for e in &condensed {
        let p = e.parent - n;
        stability[p] += (e.lambda - birth[p]) * e.size as f64;
    }

    let mut selected = vec![true; n_nodes];
    selected[0] = false;
    for c in (1..n_nodes).rev() {
        let subtree: f64 = cluster_children[c].iter().map(|&ch| stability[ch]).sum();
        if subtree > stability[c] {
            selected[c] = false;
            stability[c] = subtree;
        } else {
            let mut stack = cluster_children[c].clone();
            while let Some(x) = stack.pop() {
                selected[x] = false;
                stack.extend_from_slice(&cluster_children[x]);
            }
        }
    }

    // nearest selected ancestor of every cluster node (parents precede children)
    let mut owner: Vec<Option<usize>> = vec![None; n_nodes];
    for c in 1..n_nodes {
        owner[c] = if selected[c] { Some(c) } else { owner[cluster_parent[c]] };
    }
    let mut raw_labels: Vec<Option<usize>> = vec![None; n];
    for e in &condensed {
        if e.child < n {
            raw_labels[e.child] = owner[e.parent - n];
        }
    }

    // stable output numbering: larger clusters first, then by first member
    let mut members: Vec<(usize, usize, usize)> = Vec::new(); // (node, size, first point)
    for (p, l) in raw_labels.iter().enumerate() {
        if let Some(node) = l {
            match members.iter_mut().find(|m| m.0 == *node) {
                Some(m) => m.1 += 1,
                None => members.push((*node, 1, p)),
            }
        }
    }
    members.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let mut map = vec![u32::MAX; n_nodes];
    for (label, m) in members.iter().enumerate() {
        map[m.0] = label as u32;
    }
    let labels = raw_labels.iter().map(|l| l.map(|node| map[node])).collect();
    let stabilities = members.iter().map(|m| stability_of(&condensed, n, m.0, &birth)).collect();
    HdbscanOutput {
        labels,
        core_distances: core,
        condensed,
        stabilities,
        n_clusters: members.len(),
    }
}

fn stability_of(condensed: &[CondensedEdge], n: usize, node: usize, birth: &[f64]) -> f64 {
    condensed
        .iter()
        .filter(|e| e.parent - n == node)
        .map(|e| (e.lambda - birth[node]) * e.size as f64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_blob(cx: f64, cy: f64, n: usize, spacing: f64) -> Vec<f64> {
        let side = (n as f64).sqrt().ceil() as usize;
        let mut out = Vec::new();
        for i in 0..n {
            out.push(cx + spacing * (i % side) as f64);
            out.push(cy + spacing * (i / side) as f64);
        }
        out
    }

    #[test]
    fn core_distance_counts_self() {
        let data = [0.0, 1.0, 3.0, 6.0];
        let pts = Points { data: &data, dim: 1 };
        // min_samples = 2: nearest other point
        assert_eq!(core_distances(pts, 2), vec![1.0, 1.0, 2.0, 3.0]);
        assert_eq!(core_distances(pts, 1), vec![0.0; 4]);
    }

    #[test]
    fn two_separated_blobs() {
        let mut data = grid_blob(0.0, 0.0, 30, 0.1);
        data.extend(grid_blob(10.0, 10.0, 30, 0.1));
        let out = hdbscan(Points { data: &data, dim: 2 }, 5, 3);
        assert_eq!(out.n_clusters, 2);
        let first = out.labels[0].unwrap();
        assert!(out.labels[..30].iter().all(|l| *l == Some(first)));
        assert!(out.labels[30..].iter().all(|l| *l == Some(1 - first)));
    }

    #[test]
    fn far_outlier_is_noise() {
        let mut data = grid_blob(0.0, 0.0, 25, 0.1);
        data.extend(grid_blob(5.0, 5.0, 25, 0.1));
        data.extend([100.0, -100.0]);
        let out = hdbscan(Points { data: &data, dim: 2 }, 5, 3);
        assert_eq!(out.labels[50], None);
        assert_eq!(out.n_clusters, 2);
    }

    #[test]
    fn condensed_tree_accounts_for_every_point() {
        let mut data = grid_blob(0.0, 0.0, 20, 0.2);
        data.extend(grid_blob(3.0, 0.0, 20, 0.2));
        let out = hdbscan(Points { data: &data, dim: 2 }, 4, 2);
        let mut seen = [0; 40];
        for e in &out.condensed {
            if e.child < 40 {
                seen[e.child] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
