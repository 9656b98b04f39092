//! Deterministic graph generators for benchmarking and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Vertex, WeightedGraph};

pub fn grid(w: usize, h: usize) -> WeightedGraph {
    let id = |x: usize, y: usize| y * w + x;
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                edges.push((id(x, y), id(x + 1, y)));
            }
            if y + 1 < h {
                edges.push((id(x, y), id(x, y + 1)));
            }
        }
    }
    WeightedGraph::new(w * h, edges, None).unwrap()
}

pub fn path(n: usize) -> WeightedGraph {
    WeightedGraph::new(n, (1..n).map(|v| (v - 1, v)).collect(), None).unwrap()
}

pub fn cycle(n: usize) -> WeightedGraph {
    assert!(n >= 3);
    let mut edges: Vec<(Vertex, Vertex)> = (1..n).map(|v| (v - 1, v)).collect();
    edges.push((n - 1, 0));
    WeightedGraph::new(n, edges, None).unwrap()
}

pub fn complete(k: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for u in 0..k {
        for v in u + 1..k {
            edges.push((u, v));
        }
    }
    WeightedGraph::new(k, edges, None).unwrap()
}

/// G(n, m): m distinct uniform random edges.
pub fn gnm(n: usize, m: usize, seed: u64) -> WeightedGraph {
    assert!(n >= 2);
    let max_m = n * (n - 1) / 2;
    assert!(m <= max_m, "m = {m} exceeds {max_m}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        }
    }
    edges.sort_unstable();
    WeightedGraph::new(n, edges, None).unwrap()
}

/// Random d-regular-ish bounded-degree graph: d/2 random perfect-matching
/// rounds, dropping collisions, so every degree is at most d.
pub fn bounded_degree_expander(n: usize, d: usize, seed: u64) -> WeightedGraph {
    assert!(n >= 2 && d >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    let mut deg = vec![0usize; n];
    for _ in 0..d.div_ceil(2) {
        let mut perm: Vec<Vertex> = (0..n).collect();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        for pair in perm.chunks(2) {
            if pair.len() < 2 {
                continue;
            }
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if deg[u] < d && deg[v] < d && seen.insert((u, v)) {
                deg[u] += 1;
                deg[v] += 1;
                edges.push((u, v));
            }
        }
        // one random cycle round to mix
        let mut perm2: Vec<Vertex> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm2.swap(i, j);
        }
        for w in 0..n {
            let (a, b) = (perm2[w], perm2[(w + 1) % n]);
            let (u, v) = (a.min(b), a.max(b));
            if u != v && deg[u] < d && deg[v] < d && seen.insert((u, v)) {
                deg[u] += 1;
                deg[v] += 1;
                edges.push((u, v));
            }
        }
    }
    edges.sort_unstable();
    WeightedGraph::new(n, edges, None).unwrap()
}

/// A sparse host graph with a planted K_h whose branch vertices are blown
/// up into paths of length at most `stretch`; the clique edges connect the
/// path tails, so K_h is present as a minor of depth `stretch`.
pub fn clique_planted(host_n: usize, h: usize, stretch: usize, seed: u64) -> WeightedGraph {
    assert!(h >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // host: random tree to stay sparse and connected
    let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
    for v in 1..host_n {
        let p = rng.gen_range(0..v);
        edges.push((p, v));
    }
    let mut n = host_n;
    let mut tails = Vec::with_capacity(h);
    for i in 0..h {
        // each branch set: a path hanging off a random host vertex
        let len = 1 + rng.gen_range(0..stretch.max(1));
        let attach = rng.gen_range(0..host_n.max(1));
        let mut prev = attach;
        let mut tail = attach;
        for _ in 0..len {
            edges.push((prev, n));
            prev = n;
            tail = n;
            n += 1;
        }
        tails.push((i, tail));
        let _ = tail;
    }
    // pairwise clique edges between branch paths (tail-to-tail)
    for a in 0..h {
        for b in a + 1..h {
            let (u, v) = (tails[a].1, tails[b].1);
            let key = (u.min(v), u.max(v));
            if !edges.contains(&key) {
                edges.push(key);
            }
        }
    }
    WeightedGraph::new(n, edges, None).unwrap()
}
