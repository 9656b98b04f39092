//! Immutable-snapshot graph representation with vertex weights, plus the
//! small search primitives (components, layered BFS, degree filter,
//! sparsity gate) everything else is built on.

use std::io::BufRead;

use thiserror::Error;

/// Dense vertex id in `0..n`.
pub type Vertex = usize;

/// Edge id indexing into [`WeightedGraph::edges`].
pub type EdgeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: self-loop at vertex {v}")]
    SelfLoop { line: usize, v: Vertex },
    #[error("line {line}: duplicate edge ({u},{v})")]
    DuplicateEdge { line: usize, u: Vertex, v: Vertex },
    #[error("edge endpoint {v} out of range (n = {n})")]
    BadEndpoint { v: Vertex, n: usize },
    #[error("negative weight {w} for vertex {v}")]
    NegativeWeight { v: Vertex, w: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Undirected graph with non-negative vertex weights. Immutable after
/// construction; all scratch state lives in per-run contexts.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    n: usize,
    adj: Vec<Vec<(Vertex, EdgeId)>>,
    edges: Vec<(Vertex, Vertex)>,
    weight: Vec<f64>,
}

impl WeightedGraph {
    /// Build a graph, validating all type invariants. `weights` of `None`
    /// means unit weights.
    pub fn new(
        n: usize,
        edges: Vec<(Vertex, Vertex)>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self, GraphError> {
        let weight = match weights {
            Some(w) => {
                assert_eq!(w.len(), n, "weight vector length mismatch");
                if let Some((v, &bad)) = w.iter().enumerate().find(|(_, &x)| x < 0.0) {
                    return Err(GraphError::NegativeWeight { v, w: bad });
                }
                w
            }
            None => vec![1.0; n],
        };
        let mut adj = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= n {
                return Err(GraphError::BadEndpoint { v: u, n });
            }
            if v >= n {
                return Err(GraphError::BadEndpoint { v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop { line: 0, v: u });
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge { line: 0, u, v });
            }
            adj[u].push((v, i));
            adj[v].push((u, i));
        }
        Ok(WeightedGraph {
            n,
            adj,
            edges,
            weight,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.adj[v].iter().map(|&(u, _)| u)
    }

    /// Neighbors together with the id of the connecting edge.
    pub fn incident(&self, v: Vertex) -> &[(Vertex, EdgeId)] {
        &self.adj[v]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v].len()
    }

    pub fn weight(&self, v: Vertex) -> f64 {
        self.weight[v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// Total vertex weight, summed in ascending id order.
    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// Weight of a vertex subset given as a membership mask, summed in
    /// ascending id order for reproducibility.
    pub fn weight_of_mask(&self, mask: &[bool]) -> f64 {
        (0..self.n).filter(|&v| mask[v]).map(|v| self.weight[v]).sum()
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.adj[a].iter().any(|&(x, _)| x == b)
    }

    /// Connected components of the subgraph induced by `within`, each with
    /// its summed vertex weight. Components are emitted in order of their
    /// lowest vertex id, vertices within a component in discovery order.
    pub fn components(&self, within: &[bool]) -> Vec<(Vec<Vertex>, f64)> {
        assert_eq!(within.len(), self.n);
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for s in 0..self.n {
            if !within[s] || seen[s] {
                continue;
            }
            let mut comp = Vec::new();
            seen[s] = true;
            stack.push(s);
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(u, _) in &self.adj[v] {
                    if within[u] && !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            let mut sorted = comp.clone();
            sorted.sort_unstable();
            let w = sorted.iter().map(|&v| self.weight[v]).sum();
            out.push((comp, w));
        }
        out
    }

    /// Remove every vertex of degree > `delta`. Returns the removed set
    /// (ascending) and the filtered graph over the same id space.
    pub fn split_high_degree(&self, delta: usize) -> (Vec<Vertex>, WeightedGraph) {
        assert!(delta >= 1);
        let high: Vec<Vertex> = (0..self.n).filter(|&v| self.degree(v) > delta).collect();
        let mut is_high = vec![false; self.n];
        for &v in &high {
            is_high[v] = true;
        }
        let edges: Vec<(Vertex, Vertex)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(u, v)| !is_high[u] && !is_high[v])
            .collect();
        let g = WeightedGraph::new(self.n, edges, Some(self.weight.clone()))
            .expect("filtering preserves validity");
        (high, g)
    }
}

/// Reusable per-edge scratch flags cleared lazily via a generation counter.
#[derive(Debug, Clone)]
pub struct EdgeMarks {
    gen: Vec<u32>,
    cur: u32,
}

impl EdgeMarks {
    pub fn new(m: usize) -> Self {
        EdgeMarks {
            gen: vec![0; m],
            cur: 1,
        }
    }

    pub fn mark(&mut self, e: EdgeId) {
        self.gen[e] = self.cur;
    }

    pub fn is_marked(&self, e: EdgeId) -> bool {
        self.gen[e] == self.cur
    }

    /// O(1) reset of all marks.
    pub fn clear(&mut self) {
        self.cur += 1;
        if self.cur == 0 {
            self.gen.fill(0);
            self.cur = 1;
        }
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("h must be >= 2, got {0}")]
    BadH(usize),
    #[error("ell must be >= 1, got {0}")]
    BadEll(usize),
    #[error("epsilon must be in (0, 1], got {0}")]
    BadEpsilon(f64),
}

/// Problem parameters shared by all algorithms. The balance constant is
/// fixed to 2/3.
#[derive(Debug, Clone, Copy)]
pub struct ProblemParams {
    pub h: usize,
    pub ell: usize,
    pub epsilon: f64,
    pub seed: u64,
}

pub const BALANCE_C: f64 = 2.0 / 3.0;

impl ProblemParams {
    pub fn new(h: usize, ell: usize, epsilon: f64, seed: u64) -> Result<Self, ParamError> {
        if h < 2 {
            return Err(ParamError::BadH(h));
        }
        if ell < 1 {
            return Err(ParamError::BadEll(ell));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(ParamError::BadEpsilon(epsilon));
        }
        Ok(ProblemParams {
            h,
            ell,
            epsilon,
            seed,
        })
    }

    /// rho = 2 * ceil(ell * ln n), always computed against the original
    /// vertex count, never cached.
    pub fn rho(&self, n: usize) -> usize {
        2 * (self.ell as f64 * (n.max(1) as f64).ln()).ceil() as usize
    }

    /// Oracle stretch parameter k = ceil(1/epsilon).
    pub fn k(&self) -> usize {
        (1.0 / self.epsilon).ceil() as usize
    }
}

/// Per-step layered BFS over an induced subgraph, exposing one layer at a
/// time. Layer 0 is the source itself.
pub struct LayeredBfs {
    pub source: Vertex,
    frontier: Vec<Vertex>,
    in_explored: Vec<bool>,
    pub explored: Vec<Vertex>,
    pub layer_index: usize,
}

impl LayeredBfs {
    /// `restricted_to` is the induced-subgraph mask; `source` must be in it.
    pub fn new(g: &WeightedGraph, source: Vertex, restricted_to: &[bool]) -> Self {
        assert!(restricted_to[source]);
        let mut in_explored = vec![false; g.n()];
        in_explored[source] = true;
        LayeredBfs {
            source,
            frontier: vec![source],
            in_explored,
            explored: vec![source],
            layer_index: 0,
        }
    }

    pub fn current_layer(&self) -> &[Vertex] {
        &self.frontier
    }

    /// Advance to the next layer; returns `None` when exhausted.
    pub fn next_layer(&mut self, g: &WeightedGraph, restricted_to: &[bool]) -> Option<&[Vertex]> {
        let mut next = Vec::new();
        for &v in &self.frontier {
            for u in g.neighbors(v) {
                if restricted_to[u] && !self.in_explored[u] {
                    self.in_explored[u] = true;
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        self.explored.extend_from_slice(&next);
        self.frontier = next;
        self.layer_index += 1;
        Some(&self.frontier)
    }
}

/// Edge bound used to reject dense inputs when the depth parameter is
/// polynomially large: m <= c_sp * h * sqrt(log2(max(h,2))) * n.
pub fn sparsity_coefficient(h: usize, c_sp: f64) -> f64 {
    c_sp * h as f64 * (h.max(2) as f64).log2().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsityGate {
    Pass,
    /// The graph is too dense to exclude K_h at the requested depth; a
    /// clique minor is present but no certificate is produced.
    Reject,
}

pub fn sparsity_gate(g: &WeightedGraph, h: usize, c_sp: f64) -> SparsityGate {
    if (g.m() as f64) > sparsity_coefficient(h, c_sp) * g.n() as f64 {
        SparsityGate::Reject
    } else {
        SparsityGate::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    /// `p n m` header, `w vid weight` lines, `e u v` lines, 0-based ids.
    EdgeList,
    /// DIMACS-style, identical grammar but 1-based ids.
    Dimacs,
}

/// Parse a graph from `p`/`w`/`e`/`c` lines. Missing weights default to 1.
pub fn load_graph<R: BufRead>(reader: R, format: GraphFormat) -> Result<WeightedGraph, GraphError> {
    let base = match format {
        GraphFormat::EdgeList => 0usize,
        GraphFormat::Dimacs => 1usize,
    };
    let mut n: Option<usize> = None;
    let mut weights: Vec<f64> = Vec::new();
    let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap();
        let parse = |tok: Option<&str>, what: &str| -> Result<usize, GraphError> {
            tok.ok_or_else(|| GraphError::Parse {
                line: lineno,
                msg: format!("missing {what}"),
            })?
            .parse::<usize>()
            .map_err(|_| GraphError::Parse {
                line: lineno,
                msg: format!("bad {what}"),
            })
        };
        match tag {
            "p" => {
                if n.is_some() {
                    return Err(GraphError::Parse {
                        line: lineno,
                        msg: "duplicate p line".into(),
                    });
                }
                let nn = parse(it.next(), "vertex count")?;
                let _m = parse(it.next(), "edge count")?;
                weights = vec![1.0; nn];
                n = Some(nn);
            }
            "w" => {
                let nn = n.ok_or_else(|| GraphError::Parse {
                    line: lineno,
                    msg: "w before p".into(),
                })?;
                let vid = parse(it.next(), "vertex id")?;
                let vid = vid.checked_sub(base).ok_or(GraphError::Parse {
                    line: lineno,
                    msg: "vertex id below base".into(),
                })?;
                if vid >= nn {
                    return Err(GraphError::BadEndpoint { v: vid, n: nn });
                }
                let w: f64 = it
                    .next()
                    .ok_or_else(|| GraphError::Parse {
                        line: lineno,
                        msg: "missing weight".into(),
                    })?
                    .parse()
                    .map_err(|_| GraphError::Parse {
                        line: lineno,
                        msg: "bad weight".into(),
                    })?;
                if w < 0.0 {
                    return Err(GraphError::NegativeWeight { v: vid, w });
                }
                weights[vid] = w;
            }
            "e" => {
                let nn = n.ok_or_else(|| GraphError::Parse {
                    line: lineno,
                    msg: "e before p".into(),
                })?;
                let u = parse(it.next(), "endpoint")?;
                let v = parse(it.next(), "endpoint")?;
                let (u, v) = (
                    u.checked_sub(base).ok_or(GraphError::Parse {
                        line: lineno,
                        msg: "vertex id below base".into(),
                    })?,
                    v.checked_sub(base).ok_or(GraphError::Parse {
                        line: lineno,
                        msg: "vertex id below base".into(),
                    })?,
                );
                if u >= nn {
                    return Err(GraphError::BadEndpoint { v: u, n: nn });
                }
                if v >= nn {
                    return Err(GraphError::BadEndpoint { v, n: nn });
                }
                if u == v {
                    return Err(GraphError::SelfLoop { line: lineno, v: u });
                }
                if !seen.insert((u.min(v), u.max(v))) {
                    return Err(GraphError::DuplicateEdge { line: lineno, u, v });
                }
                edges.push((u, v));
            }
            _ => {
                return Err(GraphError::Parse {
                    line: lineno,
                    msg: format!("unknown line tag '{tag}'"),
                })
            }
        }
    }
    let n = n.ok_or(GraphError::Parse {
        line: 0,
        msg: "missing p line".into(),
    })?;
    WeightedGraph::new(n, edges, Some(weights))
}
