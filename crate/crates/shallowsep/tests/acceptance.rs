//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Constants marked FROZEN were fitted once on this corpus
//! and must not drift.

use std::collections::VecDeque;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shallowsep::clustering::{
    build_nested, build_spanner, component_weights_via_cx, dense_distance_graph, restrict_ddg,
    run_algorithm2, ActiveSet, Cluster, ClusterBudgets, Clustering, ClusteringResult,
};
use shallowsep::gen;
use shallowsep::graph::{ProblemParams, Vertex, WeightedGraph, BALANCE_C};
use shallowsep::minicluster::run_algorithm3;
use shallowsep::oracle::{DecOracle, OracleConfig};
use shallowsep::separator::{run_algorithm1, SeparatorOutcome};
use shallowsep::verify::{
    verify_minor_certificate, verify_separator, CertificateCheck, ExactDistanceOracle,
    SeparatorCheck,
};

fn report<F: FnOnce()>(n: u32, f: F) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(()) => println!("criterion {n}: pass"),
        Err(e) => {
            println!("criterion {n}: fail");
            resume_unwind(e);
        }
    }
}

/// Every outcome must satisfy its own verifier; rejection is failure here.
fn assert_valid(g: &WeightedGraph, h: usize, out: &SeparatorOutcome, what: &str) {
    match out {
        SeparatorOutcome::Separator { vertices } => assert_eq!(
            verify_separator(g, vertices, BALANCE_C),
            SeparatorCheck::Ok,
            "{what}: bad separator"
        ),
        SeparatorOutcome::MinorCertificate {
            trees,
            radius_bound,
            ..
        } => assert_eq!(
            verify_minor_certificate(g, trees, h, *radius_bound),
            CertificateCheck::Ok,
            "{what}: bad certificate"
        ),
        SeparatorOutcome::Rejected { reason } => panic!("{what}: rejected: {reason}"),
    }
}

fn corpus_small() -> Vec<(String, WeightedGraph)> {
    let mut c = Vec::new();
    for s in [2usize, 3, 4, 5, 6, 8, 10, 12, 16, 20, 25, 30, 40, 44] {
        c.push((format!("grid{s}x{s}"), gen::grid(s, s)));
    }
    for i in 0..60usize {
        let n = 2 + i * 33; // up to 1949
        c.push((format!("path{n}"), gen::path(n)));
    }
    for i in 0..60usize {
        let n = 3 + i * 33;
        c.push((format!("cycle{n}"), gen::cycle(n)));
    }
    for k in 2..=20usize {
        c.push((format!("k{k}"), gen::complete(k)));
    }
    for i in 0..190u64 {
        let n = 10 + (i as usize) * 10; // up to 1900
        c.push((format!("gnm{n}-{i}"), gen::gnm(n, 2 * n, i)));
    }
    for i in 0..100u64 {
        let n = 8 + (i as usize) * 10;
        c.push((
            format!("expander{n}-{i}"),
            gen::bounded_degree_expander(n, 4, i),
        ));
    }
    for i in 0..60u64 {
        let host = 50 + (i as usize) * 7;
        let h = 3 + (i as usize) % 4;
        let stretch = 1 + (i as usize) % 3;
        c.push((
            format!("planted{host}-{i}"),
            gen::clique_planted(host, h, stretch, i),
        ));
    }
    c
}

#[test]
fn criterion_01_small_scale_outcome_validity() {
    report(1, || {
        let corpus = corpus_small();
        assert!(corpus.len() >= 500, "corpus too small: {}", corpus.len());
        for (i, (name, g)) in corpus.iter().enumerate() {
            let h = 3 + i % 3;
            let ell = [2usize, 4, 8][i % 3];
            let params = ProblemParams::new(h, ell, 0.5, i as u64).unwrap();
            let (out, _) = run_algorithm1(g, params).unwrap();
            assert_valid(g, h, &out, name);
        }
    });
}

/// All-pairs BFS distances over an explicit adjacency list.
fn apsp(n: usize, adj: &[Vec<usize>]) -> Vec<Vec<u64>> {
    let mut all = Vec::with_capacity(n);
    for s in 0..n {
        let mut d = vec![u64::MAX; n];
        d[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            for &y in &adj[x] {
                if d[y] == u64::MAX {
                    d[y] = d[x] + 1;
                    q.push_back(y);
                }
            }
        }
        all.push(d);
    }
    all
}

#[test]
fn criterion_02_oracle_differential() {
    report(2, || {
        let mut checks = 0u64;
        for &n in &[30usize, 60] {
            let g = gen::gnm(n, 2 * n, n as u64);
            for &k in &[1usize, 2, 3] {
                for &d in &[5u64, 20] {
                    let mut oracle =
                        DecOracle::build(&g, OracleConfig::new(k, d, 7)).unwrap();
                    let mut edges: Vec<(Vertex, Vertex)> = g.edges().to_vec();
                    let mut rng = ChaCha8Rng::seed_from_u64(1000 + n as u64 + k as u64);
                    while !edges.is_empty() {
                        let i = rng.gen_range(0..edges.len());
                        let e = edges.swap_remove(i);
                        oracle.delete_edges(&[e]).unwrap();
                        let mut adj = vec![Vec::new(); n];
                        for &(u, v) in &edges {
                            adj[u].push(v);
                            adj[v].push(u);
                        }
                        let exact = apsp(n, &adj);
                        for u in 0..n {
                            for v in u + 1..n {
                                let est = oracle.query(u, v).value;
                                let ex = exact[u][v];
                                if let Some(x) = est {
                                    assert!(
                                        ex <= x,
                                        "estimate {x} beats exact {ex} for ({u},{v})"
                                    );
                                }
                                if ex <= d {
                                    let x = est.unwrap_or_else(|| {
                                        panic!("no estimate for ({u},{v}) at exact {ex}")
                                    });
                                    assert!(
                                        x <= (2 * k as u64 - 1) * ex,
                                        "stretch violated: {x} > {}*{ex}",
                                        2 * k - 1
                                    );
                                    if k == 1 {
                                        assert_eq!(x, ex, "k=1 must be exact in horizon");
                                    }
                                }
                                checks += 1;
                            }
                        }
                    }
                }
            }
        }
        assert!(checks >= 10_000, "only {checks} checks");
    });
}

/// FROZEN: fitted once over the grid sweep below; the envelope constant
/// must stay at or below this value.
const SEP_ENVELOPE_K: f64 = 8.0;

#[test]
fn criterion_03_separator_size_envelope() {
    report(3, || {
        let mut worst: f64 = 0.0;
        for &side in &[32usize, 64, 128] {
            let g = gen::grid(side, side);
            let n = g.n() as f64;
            for &ell in &[4usize, 8, 16] {
                let params = ProblemParams::new(5, ell, 0.5, 3).unwrap();
                let (out, _) = run_algorithm1(&g, params).unwrap();
                let SeparatorOutcome::Separator { vertices } = &out else {
                    panic!("grid {side}x{side} must yield a separator, got {out:?}");
                };
                assert_eq!(verify_separator(&g, vertices, BALANCE_C), SeparatorCheck::Ok);
                let budget = n / ell as f64 + 25.0 * ell as f64 * n.log2();
                let ratio = vertices.len() as f64 / budget;
                worst = worst.max(ratio);
            }
        }
        assert!(
            worst <= SEP_ENVELOPE_K,
            "envelope constant drifted: {worst:.2} > {SEP_ENVELOPE_K}"
        );
        assert!(SEP_ENVELOPE_K <= 16.0);
    });
}

/// K_h with one heavy vertex; uniform weights admit trivial one-vertex
/// separators, the skew forces the clique to surface.
fn skewed_clique(h: usize) -> WeightedGraph {
    let g = gen::complete(h);
    let mut w = vec![0.01; h];
    w[h - 1] = 1.0;
    WeightedGraph::new(h, g.edges().to_vec(), Some(w)).unwrap()
}

/// K_h blown up: branch vertex i becomes a path of `len` vertices; clique
/// edges join path heads; the heavy vertex hides at the deepest tail.
fn blown_clique(h: usize, len: usize) -> WeightedGraph {
    let n = h * len;
    let mut edges = Vec::new();
    for i in 0..h {
        for j in 1..len {
            edges.push((i * len + j - 1, i * len + j));
        }
        for j in 0..i {
            edges.push((j * len, i * len));
        }
    }
    let mut w = vec![0.01; n];
    w[n - 1] = 1.0;
    WeightedGraph::new(n, edges, Some(w)).unwrap()
}

#[test]
fn criterion_04_minor_detection() {
    report(4, || {
        for h in 3..=6usize {
            let g = skewed_clique(h);
            let params = ProblemParams::new(h, 1, 0.5, 5).unwrap();
            let (out, _) = run_algorithm1(&g, params).unwrap();
            let SeparatorOutcome::MinorCertificate {
                trees,
                radius_bound,
                ..
            } = &out
            else {
                panic!("K_{h}: expected certificate, got {out:?}");
            };
            assert_eq!(
                verify_minor_certificate(&g, trees, h, *radius_bound),
                CertificateCheck::Ok
            );
            for len in [2usize, 3] {
                let g = blown_clique(h, len);
                let params = ProblemParams::new(h, len, 0.5, 5).unwrap();
                let (out, _) = run_algorithm1(&g, params).unwrap();
                let SeparatorOutcome::MinorCertificate {
                    trees,
                    radius_bound,
                    ..
                } = &out
                else {
                    panic!("blown K_{h} (len {len}): expected certificate, got {out:?}");
                };
                assert_eq!(
                    verify_minor_certificate(&g, trees, h, *radius_bound),
                    CertificateCheck::Ok
                );
            }
        }
    });
}

/// A random connected cluster with a random boundary subset.
fn random_cluster(seed: u64) -> Cluster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(5..=200);
    let g = gen::gnm(n, 2 * n, seed);
    // largest component as the cluster
    let mask = vec![true; g.n()];
    let comps = g.components(&mask);
    let (verts, _) = comps
        .iter()
        .max_by(|a, b| a.0.len().cmp(&b.0.len()))
        .unwrap();
    let mut vertices: Vec<Vertex> = verts.clone();
    vertices.sort_unstable();
    let edges: Vec<(Vertex, Vertex)> = g
        .edges()
        .iter()
        .copied()
        .filter(|&(u, v)| {
            vertices.binary_search(&u).is_ok() && vertices.binary_search(&v).is_ok()
        })
        .collect();
    let nb = ((vertices.len() as f64).sqrt() as usize).max(2);
    let mut boundary: Vec<Vertex> = Vec::new();
    for &v in &vertices {
        if rng.gen_ratio(nb as u32, vertices.len() as u32) {
            boundary.push(v);
        }
    }
    if boundary.is_empty() {
        boundary.push(vertices[0]);
    }
    Cluster {
        id: 0,
        level: 1,
        parent: None,
        children: vec![],
        vertices,
        edges,
        boundary,
    }
}

#[test]
fn criterion_05_ddg_exactness() {
    report(5, || {
        for seed in 0..200u64 {
            let c = random_cluster(seed);
            let (full, _) = dense_distance_graph(&c);
            // brute force: BFS in the cluster with the other boundary
            // vertices forbidden as intermediates
            let local_ids: Vec<usize> = (0..c.vertices.len()).collect();
            let lid = |v: Vertex| c.vertices.binary_search(&v).unwrap();
            let local_edges: Vec<(usize, usize)> =
                c.edges.iter().map(|&(u, v)| (lid(u), lid(v))).collect();
            let local = WeightedGraph::new(local_ids.len(), local_edges, None).unwrap();
            for (i, &bu) in full.verts.iter().enumerate() {
                for (j, &bv) in full.verts.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let forbidden: Vec<Vertex> = full
                        .verts
                        .iter()
                        .filter(|&&b| b != bu && b != bv)
                        .map(|&b| lid(b))
                        .collect();
                    let ex = ExactDistanceOracle::new(&local, &forbidden)
                        .query(lid(bu), lid(bv))
                        .map(|d| d as u64);
                    assert_eq!(
                        full.weight(bu, bv),
                        ex,
                        "DDG mismatch for ({bu},{bv}) at seed {seed}"
                    );
                }
            }
            // restriction = induced submatrix = recomputation
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xddee);
            let b: Vec<Vertex> = full
                .verts
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.5))
                .collect();
            let sub = restrict_ddg(&full, &b);
            let (fresh, _) = dense_distance_graph(&c);
            let fresh_sub = restrict_ddg(&fresh, &b);
            for &u in &b {
                for &v in &b {
                    assert_eq!(sub.weight(u, v), fresh_sub.weight(u, v));
                }
            }
        }
    });
}

fn dijkstra(n: usize, adj: &[Vec<(usize, u64)>], s: usize) -> Vec<u64> {
    let mut dist = vec![u64::MAX; n];
    dist[s] = 0;
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(std::cmp::Reverse((0u64, s)));
    while let Some(std::cmp::Reverse((d, x))) = heap.pop() {
        if d > dist[x] {
            continue;
        }
        for &(y, w) in &adj[x] {
            if d + w < dist[y] {
                dist[y] = d + w;
                heap.push(std::cmp::Reverse((d + w, y)));
            }
        }
    }
    dist
}

#[test]
fn criterion_06_spanner_contract() {
    report(6, || {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(20..=300);
            let topo = gen::gnm(n, 2 * n, seed);
            let edges: Vec<(usize, usize, u64)> = topo
                .edges()
                .iter()
                .map(|&(u, v)| (u, v, rng.gen_range(1..=8)))
                .collect();
            for &eps in &[1.0f64, 0.5, 1.0 / 3.0] {
                let sp = build_spanner(n, &edges, eps);
                let t = sp.stretch as u64;
                assert!(sp.stretch <= 1.0 / eps + 1e-9);
                // size budget for a greedy (2k-1)-spanner
                let k = (t as usize + 1) / 2;
                let budget =
                    ((n as f64).powf(1.0 + 1.0 / k as f64)).ceil() as usize + n;
                assert!(
                    sp.edges.len() <= budget.max(edges.len().min(budget)),
                    "spanner too large: {} > {budget}",
                    sp.edges.len()
                );
                let mut full = vec![Vec::new(); n];
                let mut kept = vec![Vec::new(); n];
                for (ei, &(u, v, w)) in edges.iter().enumerate() {
                    full[u].push((v, w));
                    full[v].push((u, w));
                    if sp.edges.binary_search(&ei).is_ok() {
                        kept[u].push((v, w));
                        kept[v].push((u, w));
                    }
                }
                for s in 0..n {
                    let df = dijkstra(n, &full, s);
                    let dk = dijkstra(n, &kept, s);
                    for v in 0..n {
                        match (df[v], dk[v]) {
                            (u64::MAX, u64::MAX) => {}
                            (f, k2) if f != u64::MAX && k2 != u64::MAX => {
                                assert!(
                                    k2 <= t * f,
                                    "stretch broken at ({s},{v}): {k2} > {t}*{f}"
                                );
                            }
                            _ => panic!("reachability changed at ({s},{v})"),
                        }
                    }
                }
            }
        }
    });
}

fn replay_instance(seed: u64) -> Option<(WeightedGraph, Clustering)> {
    let g = match seed % 4 {
        0 => gen::grid(6 + (seed as usize % 39), 6 + (seed as usize % 39)),
        1 => {
            let n = 60 + (seed as usize * 19) % 1900;
            gen::gnm(n, (17 * n) / 10, seed)
        }
        2 => gen::bounded_degree_expander(40 + (seed as usize * 13) % 400, 4, seed),
        _ => gen::path(50 + (seed as usize * 31) % 1900),
    };
    let params = ProblemParams::new(5, 8, 0.5, seed).unwrap();
    match build_nested(&g, &params, 8, &ClusterBudgets::default()).unwrap() {
        ClusteringResult::Clustering(c) => Some((g, c)),
        ClusteringResult::Minor { .. } => None,
    }
}

#[test]
fn criterion_07_dynamic_replay() {
    report(7, || {
        let mut replayed = 0;
        let mut seed = 0u64;
        while replayed < 100 {
            seed += 1;
            let Some((g, c)) = replay_instance(seed) else {
                continue;
            };
            replayed += 1;
            let mut active = ActiveSet::new(g.n());
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xac7e);
            let compare = |active: &ActiveSet| {
                let mask: Vec<bool> = (0..g.n()).map(|v| !active.is_active(v)).collect();
                let mut expect: Vec<(Vertex, f64)> = g
                    .components(&mask)
                    .iter()
                    .map(|(vs, w)| (*vs.iter().min().unwrap(), *w))
                    .collect();
                expect.sort_by(|a, b| a.0.cmp(&b.0));
                let got = component_weights_via_cx(&g, &c, active);
                assert_eq!(expect, got, "component mismatch at seed {seed}");
            };
            compare(&active);
            let mut pool: Vec<Vertex> = (0..g.n()).collect();
            for _ in 0..15.min(g.n() - 1) {
                let i = rng.gen_range(0..pool.len());
                let v = pool.swap_remove(i);
                active.activate(v).unwrap();
                compare(&active);
                if rng.gen_bool(0.3) {
                    active.deactivate(v).unwrap();
                    compare(&active);
                }
            }
        }
    });
}

/// FROZEN: envelope constant for the mini-cluster engine's separators.
const ALGO3_ENVELOPE_K: f64 = 4.0;

#[test]
fn criterion_08_cross_validation() {
    report(8, || {
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for seed in 0..50u64 {
            let (g, ell) = if seed % 2 == 0 {
                let side = 20 + (seed as usize % 16);
                (gen::grid(side, side), 12 + (seed as usize % 5))
            } else {
                let n = 420 + (seed as usize * 17) % 500;
                (gen::gnm(n, (17 * n) / 10, seed), 11 + (seed as usize % 5))
            };
            let params = ProblemParams::new(5, ell, 0.5, seed).unwrap();
            let (o1, _) = run_algorithm1(&g, params).unwrap();
            assert_valid(&g, 5, &o1, "algo1");
            let (o2, _) = run_algorithm2(&g, params).unwrap();
            assert_valid(&g, 5, &o2, "algo2");
            let (o3, _) = run_algorithm3(&g, params).unwrap();
            assert_valid(&g, 5, &o3, "algo3");
            if let SeparatorOutcome::Separator { vertices } = &o3 {
                let n = g.n() as f64;
                let budget = n / ell as f64 + ell as f64 * n.sqrt() * n.log2();
                worst = worst.max(vertices.len() as f64 / budget);
            }
            count += 1;
        }
        assert_eq!(count, 50);
        assert!(
            worst <= ALGO3_ENVELOPE_K,
            "algo3 envelope drifted: {worst:.2} > {ALGO3_ENVELOPE_K}"
        );
    });
}

#[test]
fn criterion_09_debug_invariant_corpus() {
    report(9, || {
        assert!(
            cfg!(debug_assertions),
            "invariant corpus requires debug assertions"
        );
        for seed in 0..12u64 {
            let g = match seed % 3 {
                0 => gen::grid(24, 24),
                1 => gen::gnm(500, 900, seed),
                _ => gen::bounded_degree_expander(400, 4, seed),
            };
            let params = ProblemParams::new(5, 12, 0.5, seed).unwrap();
            for algo in 1..=3u8 {
                let run = |g: &WeightedGraph| match algo {
                    1 => run_algorithm1(g, params).unwrap(),
                    2 => run_algorithm2(g, params).unwrap(),
                    _ => run_algorithm3(g, params).unwrap(),
                };
                let (a, _) = run(&g);
                let (b, _) = run(&g);
                assert_eq!(
                    format!("{a:?}"),
                    format!("{b:?}"),
                    "algo{algo} nondeterministic on seed {seed}"
                );
                if !matches!(a, SeparatorOutcome::Rejected { .. }) {
                    assert_valid(&g, 5, &a, &format!("algo{algo} seed {seed}"));
                }
            }
        }
    });
}

#[test]
fn criterion_10_scale_smoke() {
    report(10, || {
        // ~1.0e6 edges
        let g = gen::grid(708, 708);
        assert!(g.m() >= 1_000_000);
        let params = ProblemParams::new(5, 32, 0.5, 0).unwrap();
        let (out, stats) = run_algorithm1(&g, params).unwrap();
        let SeparatorOutcome::Separator { vertices } = &out else {
            panic!("grid must yield a separator");
        };
        assert_eq!(verify_separator(&g, vertices, BALANCE_C), SeparatorCheck::Ok);
        assert!(stats.wall_ms < 600_000, "took {} ms", stats.wall_ms);
    });
}
