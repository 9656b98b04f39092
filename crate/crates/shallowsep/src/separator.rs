//! The generic separator state machine and its oracle-driven
//! instantiation.
//!
//! The driver maintains the active set V', the tree slots, and the
//! retired/removed/boundary sets, and repeatedly asks a `TreeFinder` for
//! either a low-radius tree incident to all current trees (adopted into a
//! slot) or a distant vertex pair (cut by two interleaved layered BFS
//! searches). It ends with a balanced separator, or with h pairwise
//! incident vertex-disjoint trees certifying a shallow K_h minor.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{ProblemParams, Vertex, WeightedGraph, BALANCE_C};
use crate::oracle::{DecOracle, OracleConfig, OracleError, PathEnd};
use crate::verify::CertTree;

#[derive(Debug, Error)]
pub enum SeparatorError {
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// A rooted tree held in a slot: parent pointers over graph edges.
#[derive(Debug, Clone)]
pub struct TreeRecord {
    pub root: Vertex,
    /// (child, parent) pairs, root excluded.
    pub parents: Vec<(Vertex, Vertex)>,
    vertices: Vec<Vertex>,
}

impl TreeRecord {
    pub fn new(root: Vertex, parents: Vec<(Vertex, Vertex)>) -> Self {
        let mut vertices: Vec<Vertex> = parents.iter().map(|&(c, _)| c).collect();
        vertices.push(root);
        vertices.sort_unstable();
        debug_assert!(vertices.windows(2).all(|w| w[0] != w[1]));
        TreeRecord {
            root,
            parents,
            vertices,
        }
    }

    /// Sorted vertex set.
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a tree always contains its root
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn to_cert(&self) -> CertTree {
        CertTree {
            root: self.root,
            parents: self.parents.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SeparatorOutcome {
    Separator {
        vertices: Vec<Vertex>,
    },
    MinorCertificate {
        trees: Vec<CertTree>,
        /// One connecting graph edge per tree pair (a, b, u in a, v in b).
        cross_edges: Vec<(usize, usize, Vertex, Vertex)>,
        radius_bound: usize,
    },
    Rejected {
        reason: String,
    },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunStats {
    pub iterations: u64,
    pub adoptions: u64,
    pub prunes: u64,
    pub cuts: u64,
    pub cut_vertices: u64,
    pub boundary_vertices: u64,
    pub max_tree_size: usize,
    pub oracle_deletions: u64,
    pub wall_ms: u64,
    /// Engine-specific counters with stable keys.
    #[serde(skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub extra: std::collections::BTreeMap<&'static str, u64>,
}

/// Mutable run state shared between the driver and a `TreeFinder`.
pub struct AlgoState<'g> {
    pub g: &'g WeightedGraph,
    pub params: ProblemParams,
    pub rho: usize,
    pub total_weight: f64,
    pub in_vprime: Vec<bool>,
    pub vprime_weight: f64,
    pub vprime_len: usize,
    pub in_m: Vec<bool>,
    pub in_a: Vec<bool>,
    pub in_b: Vec<bool>,
    pub in_vr: Vec<bool>,
    pub vr_weight: f64,
    /// h-1 tree slots; indices are stable over a tree's lifetime.
    pub slots: Vec<Option<TreeRecord>>,
    pub stats: RunStats,
}

impl<'g> AlgoState<'g> {
    pub fn new(g: &'g WeightedGraph, params: ProblemParams) -> Self {
        let n = g.n();
        AlgoState {
            g,
            params,
            rho: params.rho(n),
            total_weight: g.total_weight(),
            in_vprime: vec![true; n],
            vprime_weight: g.total_weight(),
            vprime_len: n,
            in_m: vec![false; n],
            in_a: vec![false; n],
            in_b: vec![false; n],
            in_vr: vec![false; n],
            vr_weight: 0.0,
            slots: vec![None; params.h - 1],
            stats: RunStats::default(),
        }
    }

    /// Vertex unavailable for trees (in M or A).
    pub fn forbidden(&self, v: Vertex) -> bool {
        self.in_m[v] || self.in_a[v]
    }

    fn remove_from_vprime(&mut self, v: Vertex) {
        if self.in_vprime[v] {
            self.in_vprime[v] = false;
            self.vprime_weight -= self.g.weight(v);
            self.vprime_len -= 1;
        }
    }

    fn move_to_vr(&mut self, v: Vertex) {
        if !self.in_vr[v] {
            self.in_vr[v] = true;
            self.vr_weight += self.g.weight(v);
        }
    }

    pub fn free_slot(&self) -> Option<usize> {
        self.slots.iter().position(|s| s.is_none())
    }

    pub fn proper_slots(&self) -> Vec<usize> {
        (0..self.slots.len())
            .filter(|&i| self.slots[i].is_some())
            .collect()
    }

    fn tree_incident_to_vprime(&self, t: &TreeRecord) -> bool {
        t.vertices()
            .iter()
            .any(|&v| self.g.neighbors(v).any(|u| self.in_vprime[u]))
    }

    fn adopt(&mut self, slot: usize, t: TreeRecord) {
        debug_assert!(self.slots[slot].is_none());
        debug_assert!(self.in_vprime[t.root]);
        for &v in t.vertices() {
            debug_assert!(!self.forbidden(v));
            self.in_m[v] = true;
            self.remove_from_vprime(v);
        }
        // every other proper tree must share a graph edge with t
        #[cfg(debug_assertions)]
        for s in self.slots.iter().flatten() {
            assert!(
                t.vertices()
                    .iter()
                    .any(|&v| self.g.neighbors(v).any(|u| s.contains(u))),
                "adopted tree not incident to an existing tree"
            );
        }
        self.stats.adoptions += 1;
        self.stats.max_tree_size = self.stats.max_tree_size.max(t.len());
        self.slots[slot] = Some(t);
    }

    fn prune(&mut self, slot: usize) -> TreeRecord {
        let t = self.slots[slot].take().expect("pruning an empty slot");
        for &v in t.vertices() {
            self.in_m[v] = false;
            self.in_a[v] = true;
            self.move_to_vr(v);
        }
        self.stats.prunes += 1;
        t
    }
}

#[derive(Debug)]
pub enum FinderStep {
    /// A tree for line 7: rooted in V', low radius, avoiding M and A,
    /// incident to every proper tree.
    Tree(TreeRecord),
    /// A line-10 pair: u, v in V' with d_{G[V']}(u, v) > rho.
    DistantPair { u: Vertex, v: Vertex },
    /// Give up with a diagnostic (regime or budget violation).
    Abort { reason: String },
}

/// Strategy hooks plugged into `generic_run`.
pub trait TreeFinder {
    fn find(&mut self, st: &AlgoState) -> Result<FinderStep, SeparatorError>;

    /// Called after a tree was installed in `slot` (state already updated).
    fn after_adopt(&mut self, _st: &AlgoState, _slot: usize) -> Result<(), SeparatorError> {
        Ok(())
    }

    /// Called after the tree in `slot` was retired to A.
    fn after_prune(
        &mut self,
        _st: &AlgoState,
        _slot: usize,
        _tree: &TreeRecord,
    ) -> Result<(), SeparatorError> {
        Ok(())
    }

    /// Called after a cut removed `removed` from V'.
    fn after_cut(&mut self, _st: &AlgoState, _removed: &[Vertex]) -> Result<(), SeparatorError> {
        Ok(())
    }

    /// Radius bound the finder's trees satisfy (C * rho).
    fn radius_bound(&self) -> usize;

    fn oracle_deletions(&self) -> u64 {
        0
    }
}

/// One layered BFS search of the parallel cut, advanced an edge at a time.
struct CutSearch {
    visited: Vec<bool>,
    frontier: Vec<Vertex>,
    next: Vec<Vertex>,
    next_weight: f64,
    fi: usize,
    ai: usize,
    explored: Vec<Vertex>,
    weight: f64,
    layers: usize,
    #[cfg(debug_assertions)]
    scanned: HashSet<(Vertex, Vertex)>,
}

/// Which set the triggering search removes.
struct CutTrigger {
    /// True: S' = S (remove the explored ball). False: S' = V'\(S\N).
    take_explored: bool,
}

impl CutSearch {
    fn new(st: &AlgoState, root: Vertex) -> Self {
        let mut s = CutSearch {
            visited: vec![false; st.g.n()],
            frontier: Vec::new(),
            next: vec![root],
            next_weight: st.g.weight(root),
            fi: 0,
            ai: 0,
            explored: vec![root],
            weight: st.g.weight(root),
            layers: 0,
            #[cfg(debug_assertions)]
            scanned: HashSet::new(),
        };
        s.visited[root] = true;
        s
    }

    /// Line 14/15 test on the just-completed layer N = self.next.
    fn layer_trigger(&self, st: &AlgoState) -> Option<CutTrigger> {
        let nn = self.next.len();
        let s_size = self.explored.len();
        let s_w = self.weight;
        let rest_size = st.vprime_len - s_size + nn;
        let rest_w = st.vprime_weight - s_w + self.next_weight;
        if s_w <= rest_w {
            // tie goes to S
            (nn * st.params.ell <= s_size).then_some(CutTrigger {
                take_explored: true,
            })
        } else {
            (nn * st.params.ell <= rest_size).then_some(CutTrigger {
                take_explored: false,
            })
        }
    }

    /// Promote the completed layer and keep scanning.
    fn promote(&mut self) {
        self.frontier = std::mem::take(&mut self.next);
        self.next_weight = 0.0;
        self.fi = 0;
        self.ai = 0;
        self.layers += 1;
    }

    /// Scan a single edge; returns a trigger when a layer completes and
    /// satisfies the cut condition.
    fn advance(&mut self, st: &AlgoState) -> Option<CutTrigger> {
        loop {
            if self.fi == self.frontier.len() {
                if let Some(t) = self.layer_trigger(st) {
                    return Some(t);
                }
                self.promote();
                continue;
            }
            let x = self.frontier[self.fi];
            let inc = st.g.incident(x);
            if self.ai >= inc.len() {
                self.fi += 1;
                self.ai = 0;
                continue;
            }
            let (y, _) = inc[self.ai];
            self.ai += 1;
            #[cfg(debug_assertions)]
            self.scanned.insert((x.min(y), x.max(y)));
            if st.in_vprime[y] && !self.visited[y] {
                self.visited[y] = true;
                self.next.push(y);
                self.next_weight += st.g.weight(y);
                self.explored.push(y);
                self.weight += st.g.weight(y);
            }
            return None;
        }
    }
}

fn apply_cut(
    st: &mut AlgoState,
    side: &CutSearch,
    trigger: CutTrigger,
) -> Vec<Vertex> {
    let layer: &[Vertex] = &side.next;
    for &v in layer {
        debug_assert!(!st.in_b[v]);
        st.in_b[v] = true;
    }
    let mut removed: Vec<Vertex>;
    if trigger.take_explored {
        // S' = S: drop the whole explored ball
        removed = side.explored.clone();
    } else {
        // S' = V'\(S\N): keep only the interior of the ball
        removed = (0..st.g.n())
            .filter(|&v| st.in_vprime[v] && (!side.visited[v] || st.in_b[v]))
            .collect();
    }
    removed.sort_unstable();
    for &v in &removed {
        st.remove_from_vprime(v);
        if !st.in_b[v] {
            st.move_to_vr(v);
        }
    }
    st.stats.cuts += 1;
    st.stats.cut_vertices += removed.len() as u64;
    st.stats.boundary_vertices += layer.len() as u64;
    removed
}

/// Lines 10-17: two layered BFS searches from u and v in G[V'],
/// interleaved one edge at a time; the first completed layer satisfying
/// |N| <= |S'|/ell wins and both searches stop.
pub fn dual_bfs_cut(
    st: &mut AlgoState,
    u: Vertex,
    v: Vertex,
) -> Result<Vec<Vertex>, SeparatorError> {
    debug_assert!(st.in_vprime[u] && st.in_vprime[v] && u != v);
    let w_before = st.vprime_weight;
    let mut su = CutSearch::new(st, u);
    let mut sv = CutSearch::new(st, v);
    let removed = loop {
        if let Some(t) = su.advance(st) {
            debug_assert!(su.scanned.is_disjoint(&sv.scanned));
            break apply_cut(st, &su, t);
        }
        if let Some(t) = sv.advance(st) {
            debug_assert!(su.scanned.is_disjoint(&sv.scanned));
            break apply_cut(st, &sv, t);
        }
        if su.layers > st.rho + 1 || sv.layers > st.rho + 1 {
            return Err(SeparatorError::Internal(format!(
                "cut searches from {u} and {v} exceeded {} layers",
                st.rho + 1
            )));
        }
    };
    // balance ledger: w(V_r) <= (w(V) - W') + W'/2
    let bound = (st.total_weight - w_before) + w_before / 2.0;
    assert!(
        st.vr_weight <= bound + 1e-6 * st.total_weight.max(1.0),
        "balance ledger violated: w(V_r) = {} > {}",
        st.vr_weight,
        bound
    );
    Ok(removed)
}

/// Single-search variant of the cut, kept for targeted tests of the
/// layer condition.
#[doc(hidden)]
pub fn single_bfs_cut(st: &mut AlgoState, w: Vertex) -> Vec<Vertex> {
    let mut s = CutSearch::new(st, w);
    loop {
        if let Some(t) = s.advance(st) {
            return apply_cut(st, &s, t);
        }
    }
}

fn certificate(
    g: &WeightedGraph,
    st: &AlgoState,
    last: TreeRecord,
    radius_bound: usize,
) -> Result<SeparatorOutcome, SeparatorError> {
    let mut trees: Vec<TreeRecord> = st.slots.iter().flatten().cloned().collect();
    trees.push(last);
    let mut cross_edges = Vec::new();
    for a in 0..trees.len() {
        for b in a + 1..trees.len() {
            let mut found = None;
            'outer: for &va in trees[a].vertices() {
                let mut best: Option<Vertex> = None;
                for vb in g.neighbors(va) {
                    if trees[b].contains(vb) && best.map_or(true, |x| vb < x) {
                        best = Some(vb);
                    }
                }
                if let Some(vb) = best {
                    found = Some((va, vb));
                    break 'outer;
                }
            }
            let (va, vb) = found.ok_or_else(|| {
                SeparatorError::Internal(format!("trees {a} and {b} share no edge"))
            })?;
            cross_edges.push((a, b, va, vb));
        }
    }
    Ok(SeparatorOutcome::MinorCertificate {
        trees: trees.iter().map(|t| t.to_cert()).collect(),
        cross_edges,
        radius_bound,
    })
}

/// The generic driver: runs the line 2-17 loop to completion.
pub fn generic_run(
    g: &WeightedGraph,
    params: ProblemParams,
    finder: &mut dyn TreeFinder,
) -> Result<(SeparatorOutcome, RunStats), SeparatorError> {
    let start = std::time::Instant::now();
    let mut st = AlgoState::new(g, params);
    let outcome = loop {
        let comps = g.components(&st.in_vprime);
        let heavy = comps
            .iter()
            .position(|(_, w)| *w > BALANCE_C * st.total_weight);
        let Some(hi) = heavy else {
            // line 19
            let mut sep: Vec<Vertex> = (0..g.n())
                .filter(|&v| st.in_m[v] || st.in_b[v])
                .collect();
            sep.sort_unstable();
            break SeparatorOutcome::Separator { vertices: sep };
        };
        st.stats.iterations += 1;
        // line 3: restrict V' to the heavy component
        for (ci, (verts, _)) in comps.iter().enumerate() {
            if ci != hi {
                for &v in verts {
                    st.remove_from_vprime(v);
                    st.move_to_vr(v);
                }
            }
        }
        // lines 4-5: retire trees no longer incident to V'
        for slot in 0..st.slots.len() {
            let stale = match &st.slots[slot] {
                Some(t) => !st.tree_incident_to_vprime(t),
                None => false,
            };
            if stale {
                let t = st.prune(slot);
                finder.after_prune(&st, slot, &t)?;
            }
        }
        // lines 6-17
        match finder.find(&st)? {
            FinderStep::Tree(t) => {
                if let Some(slot) = st.free_slot() {
                    st.adopt(slot, t);
                    finder.after_adopt(&st, slot)?;
                } else {
                    // line 18: h pairwise incident trees
                    break certificate(g, &st, t, finder.radius_bound())?;
                }
            }
            FinderStep::DistantPair { u, v } => {
                let removed = dual_bfs_cut(&mut st, u, v)?;
                finder.after_cut(&st, &removed)?;
            }
            FinderStep::Abort { reason } => {
                break SeparatorOutcome::Rejected { reason };
            }
        }
        debug_assert!(
            (0..g.n()).all(|v| !st.in_vprime[v] || !(st.in_m[v] || st.in_b[v] || st.in_vr[v])),
            "V' must stay disjoint from M, B, V_r"
        );
    };
    let mut stats = st.stats.clone();
    stats.oracle_deletions = finder.oracle_deletions();
    stats.wall_ms = start.elapsed().as_millis() as u64;
    Ok((outcome, stats))
}

/// Oracle-driven finder: one decremental oracle per tree slot, each
/// modelling the graph G_i' in which the slot's own tree stays reachable
/// while all other retired or adopted vertices are cut off.
pub struct Algo1Finder {
    oracles: Vec<DecOracle>,
    #[allow(dead_code)]
    k: usize,
    d: usize,
    s_max: usize,
}

impl Algo1Finder {
    pub fn new(g: &WeightedGraph, params: &ProblemParams) -> Result<Self, SeparatorError> {
        let k = params.k();
        let rho = params.rho(g.n());
        let d = (4 * k * rho).max(1);
        let mut oracles = Vec::with_capacity(params.h - 1);
        for i in 0..params.h - 1 {
            let mut cfg = OracleConfig::new(
                k,
                d as u64,
                params.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)),
            );
            cfg.max_live_trees = 4;
            oracles.push(DecOracle::build(g, cfg)?);
        }
        Ok(Algo1Finder {
            oracles,
            k,
            d,
            s_max: 4 * params.h * d,
        })
    }

    pub fn horizon(&self) -> usize {
        self.d
    }

    /// Lowest-id vertex of V' with a graph edge to the given tree.
    fn boundary_vertex(&self, st: &AlgoState, t: &TreeRecord) -> Option<Vertex> {
        let mut best: Option<Vertex> = None;
        for &v in t.vertices() {
            for x in st.g.neighbors(v) {
                if st.in_vprime[x] && best.map_or(true, |b| x < b) {
                    best = Some(x);
                }
            }
        }
        best
    }

    /// BFS tree rooted at `u` over the union of the given edges, then
    /// padded with vertices from V\(M u A) up to `d` vertices total while
    /// the radius stays <= d. Padding is skipped when V' is itself small:
    /// there it cannot amortize anything and would only collapse the run.
    fn build_tree(
        &self,
        st: &AlgoState,
        u: Vertex,
        union_edges: &HashSet<(Vertex, Vertex)>,
    ) -> TreeRecord {
        let mut adj: HashMap<Vertex, Vec<Vertex>> = HashMap::new();
        for &(a, b) in union_edges {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        for l in adj.values_mut() {
            l.sort_unstable();
        }
        let mut depth: HashMap<Vertex, usize> = HashMap::new();
        let mut parents: Vec<(Vertex, Vertex)> = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        depth.insert(u, 0);
        queue.push_back(u);
        while let Some(x) = queue.pop_front() {
            let dx = depth[&x];
            if let Some(nbrs) = adj.get(&x) {
                for &y in nbrs {
                    if let std::collections::hash_map::Entry::Vacant(e) = depth.entry(y) {
                        e.insert(dx + 1);
                        parents.push((y, x));
                        queue.push_back(y);
                    }
                }
            }
        }
        debug_assert!(depth.values().all(|&dv| dv <= self.d));
        if st.vprime_len > self.d && depth.len() < self.d {
            // pad by BFS into G[V\(M u A)], seeds in (depth, id) order
            let mut seeds: Vec<(usize, Vertex)> =
                depth.iter().map(|(&v, &dv)| (dv, v)).collect();
            seeds.sort_unstable();
            let mut queue: std::collections::VecDeque<Vertex> =
                seeds.iter().map(|&(_, v)| v).collect();
            'pad: while let Some(x) = queue.pop_front() {
                let dx = depth[&x];
                if dx >= self.d {
                    continue;
                }
                for y in st.g.neighbors(x) {
                    if !st.forbidden(y) && !depth.contains_key(&y) {
                        depth.insert(y, dx + 1);
                        parents.push((y, x));
                        queue.push_back(y);
                        if depth.len() >= self.d || depth.len() >= self.s_max {
                            break 'pad;
                        }
                    }
                }
            }
        }
        TreeRecord::new(u, parents)
    }

    fn find_tree_case1(
        &mut self,
        st: &AlgoState,
        u: Vertex,
        i_min: usize,
        proper: &[usize],
    ) -> Result<FinderStep, SeparatorError> {
        // minimum estimate from u into each higher-indexed proper tree
        let mut legs = Vec::new();
        for &i in proper.iter().filter(|&&i| i != i_min) {
            let tree = st.slots[i].as_ref().expect("proper slot");
            let mut best: Option<(u64, crate::oracle::DistEstimate)> = None;
            for &v in tree.vertices() {
                let est = self.oracles[i].query_direct(u, v);
                if let Some(val) = est.value {
                    if best.as_ref().map_or(true, |(b, _)| val < *b) {
                        best = Some((val, est));
                    }
                }
            }
            match best {
                Some((val, est)) => {
                    debug_assert!(val <= self.d as u64);
                    legs.push((i, est));
                }
                None => {
                    // case 2: this tree is beyond the horizon in G_i'
                    let v = self
                        .boundary_vertex(st, tree)
                        .ok_or_else(|| {
                            SeparatorError::Internal(format!(
                                "slot {i} not incident to V' after pruning"
                            ))
                        })?;
                    return Ok(FinderStep::DistantPair { u, v });
                }
            }
        }
        // case 1: union of path prefixes, each truncated at the first
        // vertex with a graph edge into its target tree
        let mut union_edges: HashSet<(Vertex, Vertex)> = HashSet::new();
        for (i, est) in &legs {
            let tree = st.slots[*i].as_ref().expect("proper slot");
            let path = self.oracles[*i].retrieve_path(est, PathEnd::U)?;
            debug_assert_eq!(path[0], u);
            let stop = path
                .iter()
                .position(|&p| st.g.neighbors(p).any(|y| tree.contains(y)))
                .ok_or_else(|| {
                    SeparatorError::Internal(format!("oracle path never touches slot {i}"))
                })?;
            for w in path[..=stop].windows(2) {
                debug_assert!(!st.forbidden(w[0]) && !st.forbidden(w[1]));
                union_edges.insert((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
        Ok(FinderStep::Tree(self.build_tree(st, u, &union_edges)))
    }
}

impl TreeFinder for Algo1Finder {
    fn find(&mut self, st: &AlgoState) -> Result<FinderStep, SeparatorError> {
        let proper = st.proper_slots();
        let Some(&i_min) = proper.first() else {
            // no proper trees: any low-radius tree rooted in V' works
            let u = (0..st.g.n())
                .find(|&v| st.in_vprime[v])
                .ok_or_else(|| SeparatorError::Internal("find on empty V'".into()))?;
            return Ok(FinderStep::Tree(self.build_tree(st, u, &HashSet::new())));
        };
        let u = self
            .boundary_vertex(st, st.slots[i_min].as_ref().expect("proper slot"))
            .ok_or_else(|| {
                SeparatorError::Internal(format!("slot {i_min} not incident to V' after pruning"))
            })?;
        self.find_tree_case1(st, u, i_min, &proper)
    }

    fn after_adopt(&mut self, st: &AlgoState, slot: usize) -> Result<(), SeparatorError> {
        let tree = st.slots[slot].as_ref().expect("adopted slot");
        let tree_edges: HashSet<(Vertex, Vertex)> = tree
            .parents
            .iter()
            .map(|&(c, p)| (c.min(p), c.max(p)))
            .collect();
        // other oracles lose every edge touching the new tree
        for j in 0..self.oracles.len() {
            if j == slot {
                continue;
            }
            let mut batch = Vec::new();
            let mut seen = HashSet::new();
            for &v in tree.vertices() {
                for x in st.g.neighbors(v) {
                    let e = (v.min(x), v.max(x));
                    if seen.insert(e) && self.oracles[j].has_edge(e.0, e.1) {
                        batch.push(e);
                    }
                }
            }
            self.oracles[j].delete_edges(&batch)?;
        }
        // own oracle loses non-tree edges inside the tree
        let mut batch = Vec::new();
        for &v in tree.vertices() {
            for x in st.g.neighbors(v) {
                if v < x && tree.contains(x) && !tree_edges.contains(&(v, x)) {
                    debug_assert!(self.oracles[slot].has_edge(v, x));
                    batch.push((v, x));
                }
            }
        }
        self.oracles[slot].delete_edges(&batch)?;
        Ok(())
    }

    fn after_prune(
        &mut self,
        st: &AlgoState,
        slot: usize,
        tree: &TreeRecord,
    ) -> Result<(), SeparatorError> {
        let mut batch = Vec::new();
        let mut seen = HashSet::new();
        for &v in tree.vertices() {
            for x in st.g.neighbors(v) {
                let e = (v.min(x), v.max(x));
                if seen.insert(e) && self.oracles[slot].has_edge(e.0, e.1) {
                    batch.push(e);
                }
            }
        }
        self.oracles[slot].delete_edges(&batch)?;
        Ok(())
    }

    fn radius_bound(&self) -> usize {
        self.d
    }

    fn oracle_deletions(&self) -> u64 {
        self.oracles.iter().map(|o| o.deletions()).sum()
    }
}

/// Run the oracle-driven separator algorithm.
pub fn run_algorithm1(
    g: &WeightedGraph,
    params: ProblemParams,
) -> Result<(SeparatorOutcome, RunStats), SeparatorError> {
    let mut finder = Algo1Finder::new(g, &params)?;
    generic_run(g, params, &mut finder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::verify::{self, CertificateCheck, SeparatorCheck};

    fn params(h: usize, ell: usize, eps: f64) -> ProblemParams {
        ProblemParams::new(h, ell, eps, 42).unwrap()
    }

    fn check_outcome(g: &WeightedGraph, p: ProblemParams, radius_bound: usize) -> SeparatorOutcome {
        let (out, _) = run_algorithm1(g, p).unwrap();
        match &out {
            SeparatorOutcome::Separator { vertices } => {
                assert_eq!(
                    verify::verify_separator(g, vertices, BALANCE_C),
                    SeparatorCheck::Ok,
                    "bad separator"
                );
            }
            SeparatorOutcome::MinorCertificate { trees, .. } => {
                assert_eq!(
                    verify::verify_minor_certificate(g, trees, p.h, radius_bound),
                    CertificateCheck::Ok,
                    "bad certificate"
                );
            }
            SeparatorOutcome::Rejected { reason } => panic!("unexpected rejection: {reason}"),
        }
        out
    }

    #[test]
    fn single_vertex_trace() {
        let g = WeightedGraph::new(1, vec![], None).unwrap();
        let (out, stats) = run_algorithm1(&g, params(3, 2, 0.5)).unwrap();
        match out {
            SeparatorOutcome::Separator { vertices } => assert_eq!(vertices, vec![0]),
            other => panic!("expected separator, got {other:?}"),
        }
        assert_eq!(stats.adoptions, 1);
    }

    #[test]
    fn zero_weight_graph_empty_separator() {
        let g = WeightedGraph::new(4, vec![(0, 1), (1, 2), (2, 3)], Some(vec![0.0; 4])).unwrap();
        let (out, _) = run_algorithm1(&g, params(3, 2, 0.5)).unwrap();
        match out {
            SeparatorOutcome::Separator { vertices } => assert!(vertices.is_empty()),
            other => panic!("expected empty separator, got {other:?}"),
        }
    }

    /// K_h with the top vertex carrying nearly all the weight keeps the
    /// loop alive until every slot holds a singleton, forcing the
    /// certificate branch.
    fn skewed_clique(h: usize) -> WeightedGraph {
        let mut w = vec![0.01; h];
        w[h - 1] = 1.0;
        let edges = gen::complete(h).edges().to_vec();
        WeightedGraph::new(h, edges, Some(w)).unwrap()
    }

    #[test]
    fn skewed_kh_certificates() {
        for h in 3..=6 {
            let g = skewed_clique(h);
            let p = params(h, 1, 1.0);
            let rho = p.rho(g.n());
            let out = check_outcome(&g, p, 4 * rho.max(1));
            match out {
                SeparatorOutcome::MinorCertificate { trees, cross_edges, .. } => {
                    assert_eq!(trees.len(), h);
                    assert_eq!(cross_edges.len(), h * (h - 1) / 2);
                    assert!(trees.iter().all(|t| t.parents.is_empty()), "h = {h}");
                }
                other => panic!("expected certificate for K_{h}, got {other:?}"),
            }
        }
    }

    #[test]
    fn grid_yields_balanced_separator() {
        let g = gen::grid(31, 31);
        let p = params(5, 4, 1.0);
        let d = (4 * p.k() * p.rho(g.n())).max(1);
        let out = check_outcome(&g, p, d);
        match out {
            SeparatorOutcome::Separator { vertices } => {
                assert!(!vertices.is_empty());
                assert!(vertices.len() < g.n());
            }
            other => panic!("grids are K_5-minor-free, got {other:?}"),
        }
    }

    #[test]
    fn random_instances_verify() {
        for seed in 0..8 {
            let g = gen::gnm(120, 200 + 10 * seed as usize, seed);
            for &eps in &[1.0, 0.5] {
                let p = ProblemParams::new(4, 2, eps, seed).unwrap();
                let d = (4 * p.k() * p.rho(g.n())).max(1);
                check_outcome(&g, p, d);
            }
        }
    }

    #[test]
    fn expander_instances_verify() {
        for seed in 0..4 {
            let g = gen::bounded_degree_expander(150, 4, seed);
            let p = ProblemParams::new(3, 2, 0.5, seed).unwrap();
            let d = (4 * p.k() * p.rho(g.n())).max(1);
            check_outcome(&g, p, d);
        }
    }

    #[test]
    fn deterministic_outcomes() {
        let g = gen::gnm(100, 180, 9);
        let p = params(4, 2, 0.5);
        let a = format!("{:?}", run_algorithm1(&g, p).unwrap().0);
        let b = format!("{:?}", run_algorithm1(&g, p).unwrap().0);
        assert_eq!(a, b);
    }

    #[test]
    fn single_cut_on_path() {
        // P_40, ell = 2: the cut from an end triggers once a one-vertex
        // layer satisfies 1 <= |S'|/2, i.e. at the second layer.
        let g = gen::path(40);
        let p = params(3, 2, 1.0);
        let mut st = AlgoState::new(&g, p);
        let removed = single_bfs_cut(&mut st, 0);
        assert_eq!(removed, vec![0, 1]);
        assert!(st.in_b[1] && !st.in_b[0]);
        assert!(st.in_vr[0]);
        assert!(!st.in_vprime[0] && !st.in_vprime[1] && st.in_vprime[2]);
    }

    #[test]
    fn dual_cut_separates_distant_pair() {
        let g = gen::path(60);
        let p = params(3, 2, 1.0);
        let mut st = AlgoState::new(&g, p);
        let before = st.vprime_len;
        let removed = dual_bfs_cut(&mut st, 0, 59).unwrap();
        assert!(!removed.is_empty());
        assert_eq!(st.vprime_len, before - removed.len());
        // boundary vertices recorded
        assert!(st.stats.boundary_vertices >= 1);
    }

    #[test]
    fn stats_are_populated() {
        let g = gen::grid(20, 20);
        let (_, stats) = run_algorithm1(&g, params(4, 2, 0.5)).unwrap();
        assert!(stats.iterations > 0);
        assert!(stats.adoptions > 0);
        assert!(stats.max_tree_size > 0);
    }
}
