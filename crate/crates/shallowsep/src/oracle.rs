//! Decremental bounded-distance approximate distance oracle.
//!
//! Construction: a sampled vertex hierarchy `A_0 ⊇ A_1 ⊇ … ⊇ A_{k-1}`
//! (each vertex promoted independently with probability n^{-1/k}) plus
//! bounded-depth decremental shortest-path trees maintained under edge
//! deletions. Per-center trees are materialized lazily on first use and
//! repaired in place afterwards; a capacity cap bounds live trees.
//!
//! Guarantees (for any deletion sequence):
//!  * estimates never underestimate the true current distance,
//!  * pairs at true distance `<= d` get an estimate `<= (2k-1)` times it,
//!  * `k = 1` answers exactly within the horizon,
//!  * reported paths are walks in the current graph of exactly the
//!    estimate's length.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Vertex, WeightedGraph};

const UNREACHED: u64 = u64::MAX;
const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("k and d must both be >= 1")]
    BadConfig,
    #[error("edge ({0},{1}) is not present")]
    MissingEdge(Vertex, Vertex),
    #[error("stale witness: a deletion occurred after this estimate")]
    StaleWitness,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Stretch parameter; answers have stretch 2k-1 within the horizon.
    pub k: usize,
    /// Distance horizon.
    pub d: u64,
    pub seed: u64,
    /// Cap on simultaneously materialized per-center trees (0 = default).
    pub max_live_trees: usize,
}

impl OracleConfig {
    pub fn new(k: usize, d: u64, seed: u64) -> Self {
        OracleConfig {
            k,
            d,
            seed,
            max_live_trees: 0,
        }
    }

    pub fn stretch(&self) -> u64 {
        2 * self.k as u64 - 1
    }
}

/// Bounded-depth shortest-path tree under edge deletions. Roots are seeded
/// at distance zero (a multi-root tree acts as a tree from a virtual
/// source). All real edge weights are >= 1.
struct EsTree {
    budget: u64,
    dist: Vec<u64>,
    parent: Vec<u32>,
}

impl EsTree {
    fn build(adj: &[Vec<(u32, u32)>], roots: &[Vertex], budget: u64) -> Self {
        let n = adj.len();
        let mut t = EsTree {
            budget,
            dist: vec![UNREACHED; n],
            parent: vec![NO_PARENT; n],
        };
        let mut heap = std::collections::BinaryHeap::new();
        for &r in roots {
            t.dist[r] = 0;
            heap.push(std::cmp::Reverse((0u64, r as u32)));
        }
        while let Some(std::cmp::Reverse((dv, v))) = heap.pop() {
            let v = v as usize;
            if dv > t.dist[v] {
                continue;
            }
            for &(u, w) in &adj[v] {
                let u = u as usize;
                let nd = dv + w as u64;
                if nd <= budget && nd < t.dist[u] {
                    t.dist[u] = nd;
                    t.parent[u] = v as u32;
                    heap.push(std::cmp::Reverse((nd, u as u32)));
                }
            }
        }
        t
    }

    fn is_root(&self, v: Vertex) -> bool {
        self.dist[v] == 0 && self.parent[v] == NO_PARENT
    }

    /// Repair the tree after `batch` has been removed from `adj`. Two
    /// phases: find the vertices whose shortest-path support vanished,
    /// then re-settle them Dijkstra-style from the unaffected boundary.
    fn repair(&mut self, adj: &[Vec<(u32, u32)>], batch: &[(Vertex, Vertex)]) {
        let mut work: Vec<Vertex> = Vec::new();
        for &(u, v) in batch {
            if self.dist[v] != UNREACHED && self.parent[v] == u as u32 {
                work.push(v);
            }
            if self.dist[u] != UNREACHED && self.parent[u] == v as u32 {
                work.push(u);
            }
        }
        if work.is_empty() {
            return;
        }
        let mut affected: Vec<Vertex> = Vec::new();
        let mut is_affected = std::collections::HashSet::new();
        while let Some(v) = work.pop() {
            if is_affected.contains(&v) || self.is_root(v) {
                continue;
            }
            // try to re-hook at the same distance
            let mut hooked = false;
            for &(u, w) in &adj[v] {
                let u = u as usize;
                if !is_affected.contains(&u)
                    && self.dist[u] != UNREACHED
                    && self.dist[u] + w as u64 == self.dist[v]
                {
                    self.parent[v] = u as u32;
                    hooked = true;
                    break;
                }
            }
            if hooked {
                continue;
            }
            is_affected.insert(v);
            affected.push(v);
            for &(u, _) in &adj[v] {
                let u = u as usize;
                if self.dist[u] != UNREACHED && self.parent[u] == v as u32 {
                    work.push(u);
                }
            }
        }
        // settle affected vertices from the unaffected boundary
        let mut heap = std::collections::BinaryHeap::new();
        for &v in &affected {
            self.dist[v] = UNREACHED;
            self.parent[v] = NO_PARENT;
        }
        for &v in &affected {
            let mut best = UNREACHED;
            let mut best_p = NO_PARENT;
            for &(u, w) in &adj[v] {
                let u = u as usize;
                if !is_affected.contains(&u) && self.dist[u] != UNREACHED {
                    let nd = self.dist[u] + w as u64;
                    if nd < best {
                        best = nd;
                        best_p = u as u32;
                    }
                }
            }
            if best <= self.budget {
                heap.push(std::cmp::Reverse((best, v as u32, best_p)));
            }
        }
        while let Some(std::cmp::Reverse((dv, v, p))) = heap.pop() {
            let v = v as usize;
            if dv >= self.dist[v] {
                continue;
            }
            self.dist[v] = dv;
            self.parent[v] = p;
            for &(u, w) in &adj[v] {
                let u = u as usize;
                if is_affected.contains(&u) {
                    let nd = dv + w as u64;
                    if nd <= self.budget && nd < self.dist[u] {
                        heap.push(std::cmp::Reverse((nd, u as u32, v as u32)));
                    }
                }
            }
        }
    }

    /// Walk from `v` to its root, inclusive.
    fn walk_to_root(&self, mut v: Vertex) -> Vec<Vertex> {
        let mut path = vec![v];
        while self.parent[v] != NO_PARENT {
            v = self.parent[v] as usize;
            path.push(v);
        }
        path
    }
}

/// Distance estimate plus an opaque witness enabling path retrieval until
/// the next deletion.
#[derive(Debug, Clone, Copy)]
pub struct DistEstimate {
    /// `None` means no path within the horizon is claimed (+infinity).
    pub value: Option<u64>,
    witness: Option<Witness>,
    epoch: u64,
}

#[derive(Debug, Clone, Copy)]
struct Witness {
    level: usize,
    center: Vertex,
    /// Endpoint currently playing the x role (its leg ends the walk at the
    /// center); the other endpoint is the y role.
    x: Vertex,
    y: Vertex,
    /// True when x is the queried `u`.
    x_is_u: bool,
}

impl DistEstimate {
    pub fn is_finite(&self) -> bool {
        self.value.is_some()
    }

    /// Finite value or u64::MAX.
    pub fn value_or_inf(&self) -> u64 {
        self.value.unwrap_or(u64::MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEnd {
    U,
    V,
}

pub struct DecOracle {
    cfg: OracleConfig,
    n: usize,
    adj: Vec<Vec<(u32, u32)>>,
    /// levels[i][v]: v is in A_i. levels[0] is all of V.
    levels: Vec<Vec<bool>>,
    /// Virtual-source trees over A_i for i >= 1; index i-1.
    level_trees: Vec<EsTree>,
    center_trees: HashMap<(usize, Vertex), EsTree>,
    recency: HashMap<(usize, Vertex), u64>,
    clock: u64,
    max_live: usize,
    epoch: u64,
    deletions: u64,
}

impl DecOracle {
    /// Oracle over an unweighted graph (unit edge lengths).
    pub fn build(g: &WeightedGraph, cfg: OracleConfig) -> Result<Self, OracleError> {
        let edges: Vec<(Vertex, Vertex, u64)> =
            g.edges().iter().map(|&(u, v)| (u, v, 1)).collect();
        Self::build_weighted(g.n(), &edges, cfg)
    }

    /// Oracle over an explicit weighted edge list (weights >= 1).
    pub fn build_weighted(
        n: usize,
        edges: &[(Vertex, Vertex, u64)],
        cfg: OracleConfig,
    ) -> Result<Self, OracleError> {
        if cfg.k == 0 || cfg.d == 0 {
            return Err(OracleError::BadConfig);
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v, w) in edges {
            assert!(u < n && v < n && u != v && w >= 1);
            adj[u].push((v as u32, w as u32));
            adj[v].push((u as u32, w as u32));
        }
        let k = cfg.k;
        let mut levels = vec![vec![true; n]];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let p = if n > 1 {
            (n as f64).powf(-1.0 / k as f64)
        } else {
            1.0
        };
        for i in 1..k {
            let prev = &levels[i - 1];
            let next: Vec<bool> = (0..n)
                .map(|v| prev[v] && rng.gen::<f64>() < p)
                .collect();
            levels.push(next);
        }
        let mut level_trees = Vec::new();
        for (i, level) in levels.iter().enumerate().skip(1) {
            let roots: Vec<Vertex> = (0..n).filter(|&v| level[v]).collect();
            level_trees.push(EsTree::build(&adj, &roots, i as u64 * cfg.d));
        }
        let max_live = if cfg.max_live_trees == 0 {
            16
        } else {
            cfg.max_live_trees
        };
        Ok(DecOracle {
            cfg,
            n,
            adj,
            levels,
            level_trees,
            center_trees: HashMap::new(),
            recency: HashMap::new(),
            clock: 0,
            max_live,
            epoch: 0,
            deletions: 0,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn deletions(&self) -> u64 {
        self.deletions
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.adj[u].iter().any(|&(x, _)| x as usize == v)
    }

    pub fn delete_edge(&mut self, u: Vertex, v: Vertex) -> Result<(), OracleError> {
        self.delete_edges(&[(u, v)])
    }

    /// Delete a batch of edges, repairing every maintained tree once.
    pub fn delete_edges(&mut self, batch: &[(Vertex, Vertex)]) -> Result<(), OracleError> {
        for &(u, v) in batch {
            if !self.has_edge(u, v) {
                return Err(OracleError::MissingEdge(u, v));
            }
        }
        for &(u, v) in batch {
            self.adj[u].retain(|&(x, _)| x as usize != v);
            self.adj[v].retain(|&(x, _)| x as usize != u);
        }
        for t in &mut self.level_trees {
            t.repair(&self.adj, batch);
        }
        for t in self.center_trees.values_mut() {
            t.repair(&self.adj, batch);
        }
        self.epoch += 1;
        self.deletions += batch.len() as u64;
        Ok(())
    }

    /// Delete one adjacency copy of each listed weight, for graphs that
    /// carry parallel edges between the same endpoints. Every maintained
    /// tree is repaired once for the whole batch.
    pub fn delete_edge_copies(
        &mut self,
        batch: &[(Vertex, Vertex, u64)],
    ) -> Result<(), OracleError> {
        fn remove_one(list: &mut Vec<(u32, u32)>, to: usize, w: u64) -> bool {
            match list
                .iter()
                .position(|&(x, wx)| x as usize == to && wx as u64 == w)
            {
                Some(i) => {
                    list.swap_remove(i);
                    true
                }
                None => false,
            }
        }
        let mut pairs = Vec::with_capacity(batch.len());
        for &(u, v, w) in batch {
            if !remove_one(&mut self.adj[u], v, w) {
                return Err(OracleError::MissingEdge(u, v));
            }
            let back = remove_one(&mut self.adj[v], u, w);
            debug_assert!(back, "asymmetric adjacency for ({u}, {v})");
            pairs.push((u, v));
        }
        for t in &mut self.level_trees {
            t.repair(&self.adj, &pairs);
        }
        for t in self.center_trees.values_mut() {
            t.repair(&self.adj, &pairs);
        }
        self.epoch += 1;
        self.deletions += batch.len() as u64;
        Ok(())
    }

    /// Distance from v to the sampled set A_i (0 for i = 0).
    fn level_dist(&self, i: usize, v: Vertex) -> u64 {
        if i == 0 {
            0
        } else {
            self.level_trees[i - 1].dist[v]
        }
    }

    /// Nearest A_i center to v, if one is reachable within the level
    /// budget.
    fn nearest_center(&self, i: usize, v: Vertex) -> Option<Vertex> {
        if i == 0 {
            return Some(v);
        }
        let t = &self.level_trees[i - 1];
        if t.dist[v] == UNREACHED {
            None
        } else {
            // follow parent pointers: the root is the nearest center, and
            // unlike a cached label it can never go stale across repairs
            let mut x = v;
            while t.parent[x] != NO_PARENT {
                x = t.parent[x] as usize;
            }
            Some(x)
        }
    }

    fn touch_center(&mut self, level: usize, center: Vertex) {
        self.clock += 1;
        let key = (level, center);
        if !self.center_trees.contains_key(&key) {
            if self.center_trees.len() >= self.max_live {
                let victim = *self
                    .recency
                    .iter()
                    .min_by_key(|&(k2, &t)| (t, k2.0, k2.1))
                    .map(|(k2, _)| k2)
                    .expect("cache nonempty");
                self.center_trees.remove(&victim);
                self.recency.remove(&victim);
            }
            let budget = (level as u64 + 1) * self.cfg.d;
            let tree = EsTree::build(&self.adj, &[center], budget);
            self.center_trees.insert(key, tree);
        }
        self.recency.insert(key, self.clock);
    }

    /// Exact distance within the horizon, using only the level-0 tree
    /// rooted at `u`. `Some(x)` is the true current distance (<= d);
    /// `None` means the true distance exceeds d. Batches of queries from
    /// one source share a single materialized tree, which makes this the
    /// right entry point for scanning many targets.
    pub fn query_direct(&mut self, u: Vertex, v: Vertex) -> DistEstimate {
        if u == v {
            return self.query(u, v);
        }
        self.touch_center(0, u);
        let t = &self.center_trees[&(0, u)];
        let value = if t.dist[v] == UNREACHED {
            None
        } else {
            Some(t.dist[v])
        };
        DistEstimate {
            value,
            witness: value.map(|_| Witness {
                level: 0,
                center: u,
                x: u,
                y: v,
                x_is_u: true,
            }),
            epoch: self.epoch,
        }
    }

    /// Bounded approximate distance. Walks the sampled hierarchy, swapping
    /// endpoints each time the cluster condition fails.
    pub fn query(&mut self, u: Vertex, v: Vertex) -> DistEstimate {
        if u == v {
            return DistEstimate {
                value: Some(0),
                witness: Some(Witness {
                    level: 0,
                    center: u,
                    x: u,
                    y: u,
                    x_is_u: true,
                }),
                epoch: self.epoch,
            };
        }
        let k = self.cfg.k;
        let (mut x, mut y) = (u, v);
        for i in 0..k {
            let Some(w) = self.nearest_center(i, x) else {
                break;
            };
            self.touch_center(i, w);
            let t = &self.center_trees[&(i, w)];
            let dx = t.dist[x];
            let dy = t.dist[y];
            debug_assert!(dx != UNREACHED, "nearest center must reach x");
            if dy != UNREACHED && (i + 1 == k || dy < self.level_dist(i + 1, y)) {
                return DistEstimate {
                    value: Some(dx + dy),
                    witness: Some(Witness {
                        level: i,
                        center: w,
                        x,
                        y,
                        x_is_u: x == u,
                    }),
                    epoch: self.epoch,
                };
            }
            std::mem::swap(&mut x, &mut y);
        }
        DistEstimate {
            value: None,
            witness: None,
            epoch: self.epoch,
        }
    }

    /// Walk realizing the estimate, starting from the requested end. The
    /// walk's edge-weight total equals the estimate exactly.
    pub fn retrieve_path(
        &self,
        est: &DistEstimate,
        from_end: PathEnd,
    ) -> Result<Vec<Vertex>, OracleError> {
        if est.epoch != self.epoch {
            return Err(OracleError::StaleWitness);
        }
        let Some(w) = est.witness else {
            return Err(OracleError::MissingEdge(0, 0));
        };
        if w.x == w.y {
            return Ok(vec![w.x]);
        }
        let t = &self.center_trees[&(w.level, w.center)];
        let x_leg = t.walk_to_root(w.x); // x .. center
        let mut y_leg = t.walk_to_root(w.y); // y .. center
        y_leg.pop(); // drop duplicated center
        y_leg.reverse(); // center-exclusive .. y
        let mut path = x_leg;
        path.extend(y_leg);
        // path now runs x -> center -> y
        let starts_at_u = w.x_is_u;
        let want_u_first = from_end == PathEnd::U;
        if starts_at_u != want_u_first {
            path.reverse();
        }
        Ok(path)
    }

    /// Diagnostics: level sizes and live tree count.
    pub fn debug_dump(&self) -> String {
        let level_sizes: Vec<usize> = self
            .levels
            .iter()
            .map(|l| l.iter().filter(|&&b| b).count())
            .collect();
        format!(
            "n={} k={} d={} levels={:?} live_trees={} deletions={}",
            self.n,
            self.cfg.k,
            self.cfg.d,
            level_sizes,
            self.center_trees.len(),
            self.deletions
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::verify::ExactDistanceOracle;

    #[test]
    fn p4_k1_exact() {
        let g = gen::path(4);
        let mut o = DecOracle::build(&g, OracleConfig::new(1, 10, 7)).unwrap();
        assert_eq!(o.query(0, 3).value, Some(3));
        assert_eq!(o.query(2, 2).value, Some(0));
        let est = o.query(0, 3);
        assert_eq!(o.retrieve_path(&est, PathEnd::U).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(o.retrieve_path(&est, PathEnd::V).unwrap(), vec![3, 2, 1, 0]);
    }

    #[test]
    fn k4_k2_stretch_window() {
        let g = gen::complete(4);
        let mut o = DecOracle::build(&g, OracleConfig::new(2, 5, 3)).unwrap();
        for u in 0..4 {
            for v in 0..4 {
                if u == v {
                    continue;
                }
                let est = o.query(u, v).value.unwrap();
                assert!((1..=3).contains(&est), "estimate {est} out of [1,3]");
            }
        }
    }

    #[test]
    fn single_vertex() {
        let g = WeightedGraph::new(1, vec![], None).unwrap();
        let mut o = DecOracle::build(&g, OracleConfig::new(2, 5, 0)).unwrap();
        assert_eq!(o.query(0, 0).value, Some(0));
    }

    #[test]
    fn rejects_zero_params() {
        let g = gen::path(3);
        assert!(DecOracle::build(&g, OracleConfig::new(0, 5, 0)).is_err());
        assert!(DecOracle::build(&g, OracleConfig::new(2, 0, 0)).is_err());
    }

    #[test]
    fn delete_disconnects_p4() {
        let g = gen::path(4);
        let mut o = DecOracle::build(&g, OracleConfig::new(1, 10, 7)).unwrap();
        o.delete_edge(1, 2).unwrap();
        assert_eq!(o.query(0, 3).value, None);
        assert!(o.delete_edge(1, 2).is_err());
    }

    #[test]
    fn delete_on_cycle_exact() {
        let g = gen::cycle(4);
        let mut o = DecOracle::build(&g, OracleConfig::new(1, 10, 7)).unwrap();
        o.delete_edge(0, 1).unwrap();
        assert_eq!(o.query(0, 1).value, Some(3));
    }

    #[test]
    fn stale_witness_rejected() {
        let g = gen::cycle(5);
        let mut o = DecOracle::build(&g, OracleConfig::new(1, 10, 7)).unwrap();
        let est = o.query(0, 2);
        o.delete_edge(3, 4).unwrap();
        assert!(matches!(
            o.retrieve_path(&est, PathEnd::U),
            Err(OracleError::StaleWitness)
        ));
    }

    #[test]
    fn determinism() {
        let g = gen::gnm(40, 80, 5);
        let run = || {
            let mut o = DecOracle::build(&g, OracleConfig::new(2, 8, 9)).unwrap();
            let mut out = Vec::new();
            for &(u, v) in &[(0, 1), (3, 17), (20, 35)] {
                out.push(o.query(u, v).value);
            }
            o.delete_edge(g.edges()[0].0, g.edges()[0].1).unwrap();
            for &(u, v) in &[(0, 1), (3, 17), (20, 35)] {
                out.push(o.query(u, v).value);
            }
            out
        };
        assert_eq!(run(), run());
    }

    /// Differential check against recomputed BFS on a random graph under a
    /// full deletion sequence.
    fn differential(n: usize, m: usize, k: usize, d: u64, seed: u64) {
        let g = gen::gnm(n, m, seed);
        let mut o = DecOracle::build(&g, OracleConfig::new(k, d, seed ^ 0xabcd)).unwrap();
        let mut live: Vec<(Vertex, Vertex)> = g.edges().to_vec();
        let mut deleted: Vec<bool> = vec![false; g.m()];
        loop {
            // check a spread of pairs against a scratch exact oracle
            let removed: Vec<Vertex> = vec![];
            let cur_edges: Vec<(Vertex, Vertex)> = g
                .edges()
                .iter()
                .enumerate()
                .filter(|(i, _)| !deleted[*i])
                .map(|(_, &e)| e)
                .collect();
            let cur = WeightedGraph::new(n, cur_edges, None).unwrap();
            let exact = ExactDistanceOracle::new(&cur, &removed);
            for u in (0..n).step_by(7) {
                let dist = exact.distances_from(u);
                for v in (0..n).step_by(5) {
                    let est = o.query(u, v);
                    match (dist[v], est.value) {
                        (Some(ex), Some(e)) => {
                            assert!(e >= ex as u64, "underestimate {e} < {ex}");
                            if (ex as u64) <= d {
                                assert!(
                                    e <= (2 * k as u64 - 1) * ex as u64,
                                    "stretch violated: {e} vs {ex} (k={k})"
                                );
                                if k == 1 {
                                    assert_eq!(e, ex as u64);
                                }
                                let path = o.retrieve_path(&est, PathEnd::U).unwrap();
                                assert_eq!(path[0], u);
                                assert_eq!(*path.last().unwrap(), v);
                                assert_eq!(path.len() as u64 - 1, e);
                                for w in path.windows(2) {
                                    assert!(cur.has_edge(w[0], w[1]));
                                }
                            }
                        }
                        (None, Some(e)) => {
                            // only acceptable as an overestimate; a real path
                            // cannot exist, so this must not happen
                            panic!("finite estimate {e} for disconnected pair");
                        }
                        (Some(ex), None) => {
                            assert!(ex as u64 > d, "infinite estimate inside horizon ({ex})");
                        }
                        (None, None) => {}
                    }
                }
            }
            if live.is_empty() {
                break;
            }
            // delete a few edges per round
            for _ in 0..3 {
                if let Some((u, v)) = live.pop() {
                    let idx = g
                        .edges()
                        .iter()
                        .position(|&e| e == (u, v))
                        .unwrap();
                    deleted[idx] = true;
                    o.delete_edge(u, v).unwrap();
                }
            }
        }
    }

    #[test]
    fn differential_k1() {
        differential(30, 60, 1, 20, 11);
    }

    #[test]
    fn differential_k2() {
        differential(30, 70, 2, 20, 12);
    }

    #[test]
    fn differential_k3_small_horizon() {
        differential(25, 50, 3, 5, 13);
    }
}
