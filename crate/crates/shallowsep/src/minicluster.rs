//! Mini-cluster separator engine: degree filtering, mini clusters refined
//! from an ell-clustering, per-mini-cluster boundary spanners feeding
//! decremental distance oracles, eviction under an all-or-nothing
//! membership invariant, and tree expansion.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::clustering::{
    build_r_clustering, dense_distance_graph, spanner_with_stretch, Cluster, ClusterBudgets,
    ClusterPaths, Clustering, ClusteringResult, DenseDistanceGraph,
};
use crate::graph::{sparsity_gate, ProblemParams, SparsityGate, Vertex, WeightedGraph};
use crate::oracle::{DecOracle, DistEstimate, OracleConfig, PathEnd};
use crate::separator::{
    generic_run, AlgoState, FinderStep, RunStats, SeparatorError, SeparatorOutcome, TreeFinder,
    TreeRecord,
};

#[derive(Debug, Error)]
pub enum MiniError {
    #[error("mini cluster {0} is already evicted")]
    DoubleEviction(usize),
    #[error(
        "mini-cluster boundary budget exceeded for origin cluster {origin}: {total} > {bound}"
    )]
    OriginBudget {
        origin: usize,
        total: usize,
        bound: usize,
    },
    #[error("total mini-cluster boundary budget exceeded: {total} > {bound}")]
    TotalBudget { total: usize, bound: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiniKind {
    /// Grown from an interior vertex of the origin cluster.
    C1,
    /// A single boundary-boundary edge of the origin cluster.
    C2,
}

#[derive(Debug, Clone)]
pub struct MiniCluster {
    pub id: usize,
    pub origin: usize,
    pub kind: MiniKind,
    /// Sorted global vertex ids.
    pub vertices: Vec<Vertex>,
    /// Boundary w.r.t. the mini clustering: origin boundary vertices
    /// contained in this mini, sorted.
    pub boundary: Vec<Vertex>,
    pub edges: Vec<(Vertex, Vertex)>,
    /// Lowest associated boundary pair, if this mini won any.
    pub pair: Option<(Vertex, Vertex)>,
    pub evicted: bool,
}

impl MiniCluster {
    pub fn contains(&self, v: Vertex) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn is_boundary(&self, v: Vertex) -> bool {
        self.boundary.binary_search(&v).is_ok()
    }

    fn as_cluster(&self) -> Cluster {
        Cluster {
            id: self.id,
            level: 1,
            parent: None,
            children: Vec::new(),
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
            boundary: self.boundary.clone(),
        }
    }
}

/// Explicit constants for the engine.
#[derive(Debug, Clone, Copy)]
pub struct Algo3Config {
    /// Degree threshold; vertices above it go straight to the separator.
    pub delta: usize,
    /// Oracle hierarchy depth: largest k with 2k-1 <= 6/epsilon.
    pub k3: usize,
    /// Oracle horizon.
    pub d3: u64,
    /// Spanner stretch for per-mini-cluster boundary spanners.
    pub spanner_stretch: f64,
    /// Per-origin budget: sum |d(mini)| <= b_m * |dC| * log2(|dC|+2).
    pub b_m: f64,
    /// Total budget slack over (n/sqrt(ell)) * log2^2(n+1).
    pub total_slack: f64,
    /// Expanded-tree cap factor: c_e * ell^2 * delta * log2(n+1).
    pub c_e: usize,
    /// Sparsity gate coefficient.
    pub c_sp: f64,
}

impl Algo3Config {
    pub fn derive(n: usize, params: &ProblemParams) -> Self {
        // floored at 5 so moderate instances are not filtered wholesale;
        // a larger threshold only shrinks V_Delta
        let delta = (((n as f64).sqrt() / params.ell as f64).ceil() as usize).max(5);
        let stretch = 6.0 / params.epsilon;
        let k3 = (((stretch + 1.0) / 2.0).floor() as usize).max(1);
        debug_assert!(2 * k3 - 1 <= stretch as usize + 1);
        let rho = params.rho(n) as u64;
        let ell = params.ell as u64;
        // horizon wide enough that the contrapositive of the far-pair test
        // survives the combined 36/eps^2 stretch plus in-cluster detours
        let d3 = ((36.0 / (params.epsilon * params.epsilon))
            * ((rho + 2 * ell + 1) as f64))
            .ceil() as u64
            + ell
            + 1;
        Algo3Config {
            delta,
            k3,
            d3,
            spanner_stretch: stretch,
            b_m: 8.0,
            total_slack: 32.0,
            c_e: 8,
            c_sp: 8.0,
        }
    }
}

/// Build all mini clusters of an ell-clustering of the degree-filtered
/// graph, with the boundary budget checks of Lemma MiniCluster.
pub fn build_mini_clusters(
    clustering: &Clustering,
    g: &WeightedGraph,
    cfg: &Algo3Config,
    ell: usize,
) -> Result<Vec<MiniCluster>, MiniError> {
    let mut minis: Vec<MiniCluster> = Vec::new();
    for &cid in &clustering.roots {
        let c = &clustering.clusters[cid];
        let index: HashMap<Vertex, usize> =
            c.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let nb = c.vertices.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nb];
        for &(u, v) in &c.edges {
            let (lu, lv) = (index[&u], index[&v]);
            adj[lu].push(lv);
            adj[lv].push(lu);
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
        }
        let is_b: Vec<bool> = c.vertices.iter().map(|&v| c.is_boundary(v)).collect();
        // regions: connected components of the interior, grown to include
        // adjacent boundary vertices
        let mut region_of = vec![usize::MAX; nb];
        let mut regions: Vec<Vec<usize>> = Vec::new(); // interior locals
        for s in 0..nb {
            if is_b[s] || region_of[s] != usize::MAX {
                continue;
            }
            let rid = regions.len();
            let mut comp = Vec::new();
            let mut stack = vec![s];
            region_of[s] = rid;
            while let Some(x) = stack.pop() {
                comp.push(x);
                for &y in &adj[x] {
                    if !is_b[y] && region_of[y] == usize::MAX {
                        region_of[y] = rid;
                        stack.push(y);
                    }
                }
            }
            regions.push(comp);
        }
        let first_mini = minis.len();
        let mut region_mini: Vec<usize> = Vec::with_capacity(regions.len());
        for comp in &regions {
            let mut verts: HashSet<usize> = comp.iter().copied().collect();
            let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
            for &x in comp {
                for &y in &adj[x] {
                    if is_b[y] {
                        verts.insert(y);
                    }
                    // each interior-incident edge charged once
                    if y > x || is_b[y] {
                        let (a, b) = (c.vertices[x], c.vertices[y]);
                        edges.push((a.min(b), a.max(b)));
                    }
                }
            }
            let mut vs: Vec<Vertex> = verts.iter().map(|&l| c.vertices[l]).collect();
            vs.sort_unstable();
            edges.sort_unstable();
            edges.dedup();
            let boundary: Vec<Vertex> = vs
                .iter()
                .copied()
                .filter(|&v| c.is_boundary(v))
                .collect();
            let id = minis.len();
            region_mini.push(id);
            minis.push(MiniCluster {
                id,
                origin: cid,
                kind: MiniKind::C1,
                vertices: vs,
                boundary,
                edges,
                pair: None,
                evicted: false,
            });
        }
        // C2: boundary-boundary edges, one mini each
        for &(u, v) in &c.edges {
            if is_b[index[&u]] && is_b[index[&v]] {
                let id = minis.len();
                minis.push(MiniCluster {
                    id,
                    origin: cid,
                    kind: MiniKind::C2,
                    vertices: vec![u.min(v), u.max(v)],
                    boundary: vec![u.min(v), u.max(v)],
                    edges: vec![(u, v)],
                    pair: None,
                    evicted: false,
                });
            }
        }
        // associated pairs: per boundary pair, the region with the
        // strictly smallest internal distance wins; ties prefer the
        // shortest path with the smaller minimum interior vertex id
        let mut winner: HashMap<(Vertex, Vertex), (u64, Vertex, usize)> = HashMap::new();
        for (rid, _) in regions.iter().enumerate() {
            let mid = region_mini[rid];
            let m = &minis[mid];
            if m.boundary.len() < 2 {
                continue;
            }
            // BFS inside the mini from each of its boundary vertices
            let midx: HashMap<Vertex, usize> =
                m.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            let mut madj: Vec<Vec<usize>> = vec![Vec::new(); m.vertices.len()];
            for &(a, b) in &m.edges {
                let (la, lb) = (midx[&a], midx[&b]);
                madj[la].push(lb);
                madj[lb].push(la);
            }
            for l in madj.iter_mut() {
                l.sort_unstable();
            }
            let bfs = |src: usize| -> Vec<u64> {
                let mut d = vec![u64::MAX; m.vertices.len()];
                let mut q = VecDeque::from([src]);
                d[src] = 0;
                while let Some(x) = q.pop_front() {
                    for &y in &madj[x] {
                        if d[y] == u64::MAX {
                            d[y] = d[x] + 1;
                            q.push_back(y);
                        }
                    }
                }
                d
            };
            let dists: Vec<Vec<u64>> = m
                .boundary
                .iter()
                .map(|&b| bfs(midx[&b]))
                .collect();
            for i in 0..m.boundary.len() {
                for j in i + 1..m.boundary.len() {
                    let (b1, b2) = (m.boundary[i], m.boundary[j]);
                    let d = dists[i][midx[&b2]];
                    if d == u64::MAX {
                        continue;
                    }
                    // tie-break id: smallest interior vertex on a
                    // shortest b1-b2 path
                    let mut tie = Vertex::MAX;
                    for (lv, &v) in m.vertices.iter().enumerate() {
                        if !c.is_boundary(v)
                            && dists[i][lv] != u64::MAX
                            && dists[j][lv] != u64::MAX
                            && dists[i][lv] + dists[j][lv] == d
                        {
                            tie = tie.min(v);
                        }
                    }
                    let cand = (d, tie, mid);
                    let best = winner.entry((b1, b2)).or_insert(cand);
                    if cand < *best {
                        *best = cand;
                    }
                }
            }
        }
        let mut pairs: Vec<(Vertex, Vertex)> = winner.keys().copied().collect();
        pairs.sort_unstable();
        for p in pairs {
            let mid = winner[&p].2;
            if minis[mid].pair.is_none() {
                minis[mid].pair = Some(p);
            }
        }
        // per-origin boundary budget
        let delta_c = c.boundary.len();
        let bound =
            (cfg.b_m * delta_c as f64 * ((delta_c + 2) as f64).log2()).ceil() as usize;
        let total: usize = minis[first_mini..].iter().map(|m| m.boundary.len()).sum();
        if total > bound {
            return Err(MiniError::OriginBudget {
                origin: cid,
                total,
                bound,
            });
        }
    }
    // global budget
    let n = g.n();
    let log_n = ((n + 1) as f64).log2();
    let bound = (cfg.total_slack * (n as f64) / (ell as f64).sqrt() * log_n * log_n).ceil()
        as usize;
    let total: usize = minis.iter().map(|m| m.boundary.len()).sum();
    if total > bound {
        return Err(MiniError::TotalBudget { total, bound });
    }
    Ok(minis)
}

/// Oracle-over-spanners finder.
pub struct Algo3Finder {
    minis: Vec<MiniCluster>,
    ddg: Vec<Option<(DenseDistanceGraph, ClusterPaths)>>,
    /// Per-mini kept spanner edges as (a, b, w) with a < b.
    span_edges: Vec<Vec<(Vertex, Vertex, u64)>>,
    /// Contributors per normalized pair, sorted by (weight, mini id).
    pair_contrib: HashMap<(Vertex, Vertex), Vec<(u64, usize)>>,
    /// mini ids per vertex.
    vert_minis: Vec<Vec<usize>>,
    is_snode: Vec<bool>,
    oracles: Vec<DecOracle>,
    d3: u64,
    s3_max: usize,
    ell: usize,
    evictions: u64,
    span_deletions: u64,
    max_expanded: usize,
}

impl Algo3Finder {
    pub fn new(
        g: &WeightedGraph,
        params: &ProblemParams,
        cfg: &Algo3Config,
        minis: Vec<MiniCluster>,
    ) -> Result<Self, SeparatorError> {
        let n = g.n();
        let mut vert_minis: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut is_snode = vec![false; n];
        for m in &minis {
            for &v in &m.vertices {
                vert_minis[v].push(m.id);
            }
            for &v in &m.boundary {
                is_snode[v] = true;
            }
        }
        let mut ddg: Vec<Option<(DenseDistanceGraph, ClusterPaths)>> = Vec::new();
        let mut span_edges: Vec<Vec<(Vertex, Vertex, u64)>> = Vec::new();
        let mut pair_contrib: HashMap<(Vertex, Vertex), Vec<(u64, usize)>> = HashMap::new();
        for m in &minis {
            let (full, paths) = dense_distance_graph(&m.as_cluster());
            let edges = full.finite_edges();
            let kept = spanner_with_stretch(full.verts.len(), &edges, cfg.spanner_stretch);
            let mut mine = Vec::with_capacity(kept.len());
            for ei in kept {
                let (i, j, w) = edges[ei];
                let (a, b) = (full.verts[i], full.verts[j]);
                mine.push((a, b, w));
                pair_contrib.entry((a, b)).or_default().push((w, m.id));
            }
            span_edges.push(mine);
            ddg.push(Some((full, paths)));
        }
        for list in pair_contrib.values_mut() {
            list.sort_unstable();
        }
        // S is a multigraph: one parallel copy per (pair, contributor),
        // so an eviction only removes the edges the evicted mini vouched for
        let mut s_edges: Vec<(Vertex, Vertex, u64)> = Vec::new();
        for mine in &span_edges {
            s_edges.extend_from_slice(mine);
        }
        s_edges.sort_unstable();
        let mut oracles = Vec::with_capacity(params.h - 1);
        for i in 0..params.h - 1 {
            let seed = params
                .seed
                .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(i as u64 + 1));
            let mut ocfg = OracleConfig::new(cfg.k3, cfg.d3, seed);
            ocfg.max_live_trees = 4;
            oracles.push(
                DecOracle::build_weighted(n, &s_edges, ocfg)
                    .map_err(SeparatorError::Oracle)?,
            );
        }
        let log_n = (usize::BITS - (n + 1).leading_zeros()) as usize;
        let s3_max = cfg.c_e * params.ell * params.ell * cfg.delta * log_n.max(1);
        Ok(Algo3Finder {
            minis,
            ddg,
            span_edges,
            pair_contrib,
            vert_minis,
            is_snode,
            oracles,
            d3: cfg.d3,
            s3_max,
            ell: params.ell,
            evictions: 0,
            span_deletions: 0,
            max_expanded: 0,
        })
    }

    pub fn mini_clusters(&self) -> &[MiniCluster] {
        &self.minis
    }

    pub fn counters(&self) -> (u64, u64, usize) {
        (self.evictions, self.span_deletions, self.max_expanded)
    }

    /// Evict one mini cluster, collecting its own oracle edge copies into
    /// `batch`; copies contributed by other minis stay.
    pub fn evict(
        &mut self,
        mid: usize,
        batch: &mut Vec<(Vertex, Vertex, u64)>,
    ) -> Result<(), SeparatorError> {
        if self.minis[mid].evicted {
            return Err(SeparatorError::Internal(
                MiniError::DoubleEviction(mid).to_string(),
            ));
        }
        self.minis[mid].evicted = true;
        self.evictions += 1;
        batch.extend_from_slice(&self.span_edges[mid]);
        Ok(())
    }

    fn flush_deletions(
        &mut self,
        batch: Vec<(Vertex, Vertex, u64)>,
    ) -> Result<(), SeparatorError> {
        if batch.is_empty() {
            return Ok(());
        }
        self.span_deletions += batch.len() as u64;
        for o in &mut self.oracles {
            o.delete_edge_copies(&batch).map_err(SeparatorError::Oracle)?;
        }
        Ok(())
    }

    /// BFS inside one mini from `src`, over all its vertices.
    fn mini_bfs(&self, mid: usize, src: Vertex) -> (Vec<u64>, Vec<u32>) {
        let m = &self.minis[mid];
        let idx = |v: Vertex| m.vertices.binary_search(&v).expect("vertex in mini");
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m.vertices.len()];
        for &(a, b) in &m.edges {
            let (la, lb) = (idx(a), idx(b));
            adj[la].push(lb);
            adj[lb].push(la);
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
        }
        let mut dist = vec![u64::MAX; m.vertices.len()];
        let mut parent = vec![u32::MAX; m.vertices.len()];
        let s = idx(src);
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            for &y in &adj[x] {
                if dist[y] == u64::MAX {
                    dist[y] = dist[x] + 1;
                    parent[y] = x as u32;
                    q.push_back(y);
                }
            }
        }
        (dist, parent)
    }

    /// Unpack one S edge (a consecutive pair of an oracle walk) into the
    /// graph path it stands for, using the cheapest live contributor.
    fn unpack_edge(&self, a: Vertex, b: Vertex) -> Vec<Vertex> {
        let key = (a.min(b), a.max(b));
        let (_, mid) = self.pair_contrib[&key]
            .iter()
            .copied()
            .find(|&(_, mid)| !self.minis[mid].evicted)
            .expect("S edge with no live contributor");
        let (_, paths) = self.ddg[mid].as_ref().unwrap();
        let ri = paths
            .roots
            .binary_search(&key.0)
            .expect("DDG rooted at pair endpoint");
        let mut p = paths.unpack(ri, key.1); // key.0 .. key.1
        if p[0] != a {
            p.reverse();
        }
        debug_assert_eq!(p[0], a);
        debug_assert_eq!(*p.last().unwrap(), b);
        p
    }

    /// Expand a base tree into every live mini cluster it touches:
    /// interior vertices are attached through interior-only BFS layers,
    /// boundary vertices not already present stay out.
    fn expand_tree(&self, base: TreeRecord) -> Result<TreeRecord, SeparatorError> {
        let root = base.root;
        let mut parents: Vec<(Vertex, Vertex)> = base.parents.clone();
        let mut in_tree: HashSet<Vertex> = base.vertices().iter().copied().collect();
        let mut touched: Vec<usize> = base
            .vertices()
            .iter()
            .flat_map(|&v| self.vert_minis[v].iter().copied())
            .filter(|&mid| !self.minis[mid].evicted)
            .collect();
        touched.sort_unstable();
        touched.dedup();
        for mid in touched {
            let m = &self.minis[mid];
            let idx = |v: Vertex| m.vertices.binary_search(&v).expect("vertex in mini");
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m.vertices.len()];
            for &(a, b) in &m.edges {
                let (la, lb) = (idx(a), idx(b));
                adj[la].push(lb);
                adj[lb].push(la);
            }
            for l in adj.iter_mut() {
                l.sort_unstable();
            }
            let mut q: VecDeque<usize> = m
                .vertices
                .iter()
                .enumerate()
                .filter(|(_, v)| in_tree.contains(v))
                .map(|(l, _)| l)
                .collect();
            let mut seen: Vec<bool> = m
                .vertices
                .iter()
                .map(|v| in_tree.contains(v))
                .collect();
            while let Some(x) = q.pop_front() {
                for &y in &adj[x] {
                    let vy = m.vertices[y];
                    if !seen[y] && !m.is_boundary(vy) {
                        seen[y] = true;
                        in_tree.insert(vy);
                        parents.push((vy, m.vertices[x]));
                        q.push_back(y);
                    }
                }
            }
        }
        if in_tree.len() > self.s3_max {
            return Err(SeparatorError::Internal(format!(
                "expanded tree size {} exceeds cap {}",
                in_tree.len(),
                self.s3_max
            )));
        }
        Ok(TreeRecord::new(root, parents))
    }

    /// Sources for S queries from u: (boundary vertex, exact in-mini
    /// distance), plus parent data for unpacking the in-mini prefix.
    fn seeds(&self, u: Vertex) -> (Vec<(Vertex, u64)>, Option<(usize, Vec<u64>, Vec<u32>)>) {
        if self.is_snode[u] {
            return (vec![(u, 0)], None);
        }
        // interior vertex: exactly one live mini contains it
        let mid = self.vert_minis[u]
            .iter()
            .copied()
            .find(|&mid| !self.minis[mid].evicted);
        let Some(mid) = mid else {
            return (Vec::new(), None);
        };
        let (dist, parent) = self.mini_bfs(mid, u);
        let m = &self.minis[mid];
        let mut srcs = Vec::new();
        for &b in &m.boundary {
            let lb = m.vertices.binary_search(&b).unwrap();
            if dist[lb] != u64::MAX {
                srcs.push((b, dist[lb]));
            }
        }
        (srcs, Some((mid, dist, parent)))
    }

    /// In-mini path u..b from stored seed BFS data.
    fn seed_chain(&self, seed: &(usize, Vec<u64>, Vec<u32>), b: Vertex) -> Vec<Vertex> {
        let m = &self.minis[seed.0];
        let mut l = m.vertices.binary_search(&b).unwrap();
        let mut path = vec![m.vertices[l]];
        while seed.2[l] != u32::MAX {
            l = seed.2[l] as usize;
            path.push(m.vertices[l]);
        }
        path.reverse(); // u .. b
        path
    }
}

struct TreeProbe {
    /// Best (estimate, source, target) and the oracle witness.
    est: u64,
    src: Vertex,
    target: Vertex,
    witness: Option<DistEstimate>,
    /// Per-target estimates for the distant-pair fallback.
    per_target: Vec<(Vertex, u64)>,
}

impl TreeFinder for Algo3Finder {
    fn find(&mut self, st: &AlgoState) -> Result<FinderStep, SeparatorError> {
        let proper = st.proper_slots();
        let Some(&i_min) = proper.first() else {
            let u = (0..st.g.n())
                .find(|&v| st.in_vprime[v])
                .ok_or_else(|| SeparatorError::Internal("find with empty V'".into()))?;
            return Ok(FinderStep::Tree(
                self.expand_tree(TreeRecord::new(u, Vec::new()))?,
            ));
        };
        let t_min = st.slots[i_min].as_ref().unwrap();
        let mut u = None;
        for &tv in t_min.vertices() {
            for nb in st.g.neighbors(tv) {
                if st.in_vprime[nb] && u.map_or(true, |x| nb < x) {
                    u = Some(nb);
                }
            }
        }
        let u = u.ok_or_else(|| {
            SeparatorError::Internal("lowest tree lost incidence to V'".into())
        })?;
        let (srcs, seed) = self.seeds(u);
        let mut probes: Vec<(usize, TreeProbe)> = Vec::new();
        for &i in &proper {
            if i == i_min {
                continue;
            }
            let t = st.slots[i].as_ref().unwrap();
            // live S-node neighbors of the tree
            let mut targets: Vec<Vertex> = Vec::new();
            for &tv in t.vertices() {
                for nb in st.g.neighbors(tv) {
                    if !st.forbidden(nb) && self.is_snode[nb] {
                        targets.push(nb);
                    }
                }
            }
            targets.sort_unstable();
            targets.dedup();
            let mut probe = TreeProbe {
                est: u64::MAX,
                src: 0,
                target: 0,
                witness: None,
                per_target: targets.iter().map(|&t| (t, u64::MAX)).collect(),
            };
            for &(b, db) in &srcs {
                for (ti, &bt) in targets.iter().enumerate() {
                    let est = self.oracles[i].query_direct(b, bt);
                    let Some(val) = est.value else { continue };
                    let total = db + val;
                    if total < probe.per_target[ti].1 {
                        probe.per_target[ti].1 = total;
                    }
                    if total < probe.est {
                        probe.est = total;
                        probe.src = b;
                        probe.target = bt;
                        probe.witness = Some(est);
                    }
                }
            }
            probes.push((i, probe));
        }
        // far case: some tree is out of reach within the horizon
        for (i, probe) in &probes {
            if probe.est > self.d3 {
                // choose a V' witness adjacent to tree i
                let t = st.slots[*i].as_ref().unwrap();
                let mut v = None;
                let mut v_est = u64::MAX;
                for &tv in t.vertices() {
                    for nb in st.g.neighbors(tv) {
                        if !st.in_vprime[nb] {
                            continue;
                        }
                        let e = probe
                            .per_target
                            .iter()
                            .find(|&&(t2, _)| t2 == nb)
                            .map(|&(_, e)| e)
                            .unwrap_or(u64::MAX);
                        if v.is_none() || e < v_est || (e == v_est && nb < v.unwrap()) {
                            v = Some(nb);
                            v_est = e;
                        }
                    }
                }
                let v = v.ok_or_else(|| {
                    SeparatorError::Internal(format!("tree in slot {i} lost incidence to V'"))
                })?;
                #[cfg(debug_assertions)]
                {
                    // the pair must really be far apart in G[V']
                    let mut dist = vec![u64::MAX; st.g.n()];
                    dist[u] = 0;
                    let mut q = VecDeque::from([u]);
                    while let Some(x) = q.pop_front() {
                        for y in st.g.neighbors(x) {
                            if st.in_vprime[y] && dist[y] == u64::MAX {
                                dist[y] = dist[x] + 1;
                                q.push_back(y);
                            }
                        }
                    }
                    debug_assert!(
                        dist[v] > st.rho as u64,
                        "far pair ({u},{v}) at V' distance {} <= rho {}",
                        dist[v],
                        st.rho,
                    );
                }
                return Ok(FinderStep::DistantPair { u, v });
            }
        }
        // near case: union of unpacked paths, then expansion
        let mut adj: HashMap<Vertex, Vec<Vertex>> = HashMap::new();
        adj.entry(u).or_default();
        for (i, probe) in &probes {
            let walk = self.oracles[*i]
                .retrieve_path(probe.witness.as_ref().unwrap(), PathEnd::U)
                .map_err(SeparatorError::Oracle)?;
            // prefix u .. src inside u's mini
            let mut path: Vec<Vertex> = match &seed {
                Some(s) if probe.src != u => self.seed_chain(s, probe.src),
                _ => vec![u],
            };
            debug_assert_eq!(*path.last().unwrap(), probe.src);
            debug_assert_eq!(walk[0], probe.src);
            for pair in walk.windows(2) {
                let seg = self.unpack_edge(pair[0], pair[1]);
                path.extend(seg.into_iter().skip(1));
            }
            debug_assert_eq!(*path.last().unwrap(), probe.target);
            for pair in path.windows(2) {
                adj.entry(pair[0]).or_default().push(pair[1]);
                adj.entry(pair[1]).or_default().push(pair[0]);
            }
        }
        let mut parents: Vec<(Vertex, Vertex)> = Vec::new();
        let mut seen: HashSet<Vertex> = HashSet::from([u]);
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            let mut nbs = adj.get(&x).cloned().unwrap_or_default();
            nbs.sort_unstable();
            for y in nbs {
                if seen.insert(y) {
                    debug_assert!(!st.forbidden(y), "tree path enters M or A");
                    parents.push((y, x));
                    queue.push_back(y);
                }
            }
        }
        let expanded = self.expand_tree(TreeRecord::new(u, parents))?;
        self.max_expanded = self.max_expanded.max(expanded.len());
        Ok(FinderStep::Tree(expanded))
    }

    fn after_adopt(&mut self, st: &AlgoState, slot: usize) -> Result<(), SeparatorError> {
        // every live mini sharing a vertex with the adopted tree leaves
        // V minus (M u A); evict them all, batched
        let vs: Vec<Vertex> = st.slots[slot].as_ref().unwrap().vertices().to_vec();
        let mut doomed: Vec<usize> = vs
            .iter()
            .flat_map(|&v| self.vert_minis[v].iter().copied())
            .filter(|&mid| !self.minis[mid].evicted)
            .collect();
        doomed.sort_unstable();
        doomed.dedup();
        let mut batch = Vec::new();
        for mid in doomed {
            self.evict(mid, &mut batch)?;
        }
        self.flush_deletions(batch)?;
        // all-or-nothing invariant: live minis stay fully inside
        #[cfg(debug_assertions)]
        for m in &self.minis {
            if !m.evicted {
                assert!(
                    m.vertices.iter().all(|&v| !st.forbidden(v)),
                    "live mini cluster {} has a vertex in M or A",
                    m.id
                );
            }
        }
        Ok(())
    }

    fn radius_bound(&self) -> usize {
        self.d3 as usize + 3 * self.ell + 2
    }

    fn oracle_deletions(&self) -> u64 {
        self.oracles.iter().map(|o| o.deletions()).sum()
    }
}

/// The mini-cluster engine: sparsity gate, degree filter, ell-clustering,
/// spanner-fed oracles, and the generic loop; high-degree vertices join
/// the final separator.
pub fn run_algorithm3(
    g: &WeightedGraph,
    params: ProblemParams,
) -> Result<(SeparatorOutcome, RunStats), SeparatorError> {
    let cfg = Algo3Config::derive(g.n(), &params);
    run_algorithm3_with(g, params, &cfg)
}

pub fn run_algorithm3_with(
    g: &WeightedGraph,
    params: ProblemParams,
    cfg: &Algo3Config,
) -> Result<(SeparatorOutcome, RunStats), SeparatorError> {
    let n = g.n();
    let reject = |reason: String| {
        Ok((
            SeparatorOutcome::Rejected { reason },
            RunStats::default(),
        ))
    };
    if sparsity_gate(g, params.h, cfg.c_sp) == SparsityGate::Reject {
        return reject(format!(
            "rejected: dense ({} edges exceed the K_{} minor-free envelope)",
            g.m(),
            params.h
        ));
    }
    if (params.ell as f64) > (n as f64).sqrt().ceil() {
        return reject(format!("regime: ell={} exceeds sqrt(n)={n}", params.ell));
    }
    if (params.ell as f64) <= ((n + 1) as f64).log2() {
        return reject(format!(
            "regime: ell={} not above log2(n+1), clusters would be trivial",
            params.ell
        ));
    }
    let (v_delta, gf) = g.split_high_degree(cfg.delta);
    let clustering =
        match build_r_clustering(&gf, &params, params.ell, &ClusterBudgets::default()) {
            Ok(ClusteringResult::Clustering(c)) => c,
            Ok(ClusteringResult::Minor {
                trees,
                radius_bound,
            }) => {
                let cross_edges = crate::clustering::cross_edges_of(&gf, &trees)?;
                return Ok((
                    SeparatorOutcome::MinorCertificate {
                        trees,
                        cross_edges,
                        radius_bound,
                    },
                    RunStats::default(),
                ));
            }
            Err(e) => return reject(format!("clustering failed: {e}")),
        };
    let minis = match build_mini_clusters(&clustering, &gf, cfg, params.ell) {
        Ok(m) => m,
        Err(e) => return reject(format!("minor reported: {e}")),
    };
    let c1 = minis.iter().filter(|m| m.kind == MiniKind::C1).count() as u64;
    let c2 = minis.len() as u64 - c1;
    let mut finder = Algo3Finder::new(&gf, &params, cfg, minis)?;
    let (outcome, mut stats) = generic_run(&gf, params, &mut finder)?;
    let outcome = match outcome {
        SeparatorOutcome::Separator { vertices } => {
            let mut s: Vec<Vertex> = vertices;
            s.extend(v_delta.iter().copied());
            s.sort_unstable();
            s.dedup();
            SeparatorOutcome::Separator { vertices: s }
        }
        other => other,
    };
    let (evictions, span_deletions, max_expanded) = finder.counters();
    stats.extra.insert("v_delta", v_delta.len() as u64);
    stats.extra.insert("mini_c1", c1);
    stats.extra.insert("mini_c2", c2);
    stats.extra.insert("evictions", evictions);
    stats.extra.insert("spanner_edge_deletions", span_deletions);
    stats.extra.insert("max_expanded_tree", max_expanded as u64);
    Ok((outcome, stats))
}
