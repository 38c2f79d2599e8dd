//! Smallest set of smallest rings.
//!
//! Candidate cycles are generated Horton-style (for every vertex `v` and
//! edge `(x, y)`, the cycle `P(v,x) + (x,y) + P(y,v)` when the two shortest
//! paths only share `v`), sorted by length, and then selected greedily by
//! Gaussian elimination over GF(2) on edge incidence vectors. That yields a
//! minimum cycle basis.

use std::collections::{HashSet, VecDeque};

#[derive(Clone, PartialEq, Eq, Hash)]
struct EdgeSet(Vec<u64>);

impl EdgeSet {
    fn new(n_edges: usize) -> Self {
        EdgeSet(vec![0; n_edges.div_ceil(64).max(1)])
    }
    fn toggle(&mut self, e: usize) {
        self.0[e / 64] ^= 1 << (e % 64);
    }
    fn get(&self, e: usize) -> bool {
        self.0[e / 64] >> (e % 64) & 1 == 1
    }
    fn xor(&mut self, other: &EdgeSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= *b;
        }
    }
    fn is_zero(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }
    fn lowest(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }
}

/// Returns SSSR rings as cyclically ordered atom lists.
///
/// `adjacency[i]` lists `(neighbor, edge index)` pairs; `n_edges` is the
/// total edge count.
pub fn sssr(adjacency: &[Vec<(usize, usize)>], n_edges: usize) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let components = count_components(adjacency);
    let rank = (n_edges + components).saturating_sub(n);
    if rank == 0 {
        return Vec::new();
    }

    // BFS parents from every root: parent[root][v] = (parent vertex, edge)
    let mut dist = vec![vec![usize::MAX; n]; n];
    let mut parent = vec![vec![(usize::MAX, usize::MAX); n]; n];
    for root in 0..n {
        let mut queue = VecDeque::new();
        dist[root][root] = 0;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            let mut nbrs = adjacency[u].clone();
            nbrs.sort_unstable();
            for (v, e) in nbrs {
                if dist[root][v] == usize::MAX {
                    dist[root][v] = dist[root][u] + 1;
                    parent[root][v] = (u, e);
                    queue.push_back(v);
                }
            }
        }
    }

    let path_edges = |root: usize, mut v: usize| -> (Vec<usize>, Vec<usize>) {
        let mut verts = vec![v];
        let mut edges = Vec::new();
        while v != root {
            let (p, e) = parent[root][v];
            edges.push(e);
            verts.push(p);
            v = p;
        }
        (verts, edges)
    };

    let mut edge_list = vec![(0, 0); n_edges];
    for (u, nbrs) in adjacency.iter().enumerate() {
        for &(v, e) in nbrs {
            if u < v {
                edge_list[e] = (u, v);
            }
        }
    }

    let mut seen = HashSet::new();
    let mut candidates: Vec<(usize, Vec<usize>, EdgeSet)> = Vec::new();
    for root in 0..n {
        for (e, &(x, y)) in edge_list.iter().enumerate() {
            if dist[root][x] == usize::MAX || dist[root][y] == usize::MAX {
                continue;
            }
            if parent[root][x].1 == e || parent[root][y].1 == e {
                continue;
            }
            let (vx, ex) = path_edges(root, x);
            let (vy, ey) = path_edges(root, y);
            let sx: HashSet<usize> = vx.iter().copied().collect();
            let shared = vy.iter().filter(|v| sx.contains(v)).count();
            if shared != 1 {
                continue;
            }
            let mut set = EdgeSet::new(n_edges);
            for &pe in ex.iter().chain(ey.iter()) {
                set.toggle(pe);
            }
            set.toggle(e);
            if !seen.insert(set.clone()) {
                continue;
            }
            let len = ex.len() + ey.len() + 1;
            let mut sorted_edges: Vec<usize> = (0..n_edges).filter(|&i| set.get(i)).collect();
            sorted_edges.sort_unstable();
            candidates.push((len, sorted_edges, set));
        }
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    // Gaussian elimination, basis kept in reduced form keyed by pivot edge.
    let mut basis: Vec<(usize, EdgeSet)> = Vec::new();
    let mut rings = Vec::new();
    for (_, edges, set) in candidates {
        let mut reduced = set.clone();
        for (pivot, row) in &basis {
            if reduced.get(*pivot) {
                reduced.xor(row);
            }
        }
        if reduced.is_zero() {
            continue;
        }
        let pivot = reduced.lowest().expect("non-zero");
        for (_, row) in basis.iter_mut() {
            if row.get(pivot) {
                row.xor(&reduced);
            }
        }
        basis.push((pivot, reduced));
        rings.push(order_cycle(&edges, &edge_list));
        if rings.len() == rank {
            break;
        }
    }
    rings
}

fn order_cycle(edges: &[usize], edge_list: &[(usize, usize)]) -> Vec<usize> {
    let pairs: Vec<(usize, usize)> = edges.iter().map(|&e| edge_list[e]).collect();
    let start = pairs.iter().map(|&(a, b)| a.min(b)).min().unwrap_or(0);
    let mut order = vec![start];
    let mut used = vec![false; pairs.len()];
    let mut current = start;
    loop {
        // Among unused edges at `current`, step to the smaller neighbor first
        // so the orientation is deterministic.
        let next = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .filter_map(|(i, &(a, b))| {
                if a == current {
                    Some((b, i))
                } else if b == current {
                    Some((a, i))
                } else {
                    None
                }
            })
            .min();
        match next {
            Some((v, i)) => {
                used[i] = true;
                if v == start {
                    break;
                }
                order.push(v);
                current = v;
            }
            None => break,
        }
    }
    order
}

fn count_components(adjacency: &[Vec<(usize, usize)>]) -> usize {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}
