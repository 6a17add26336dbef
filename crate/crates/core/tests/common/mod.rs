//! Independent oracles and random generators shared by the integration
//! tests. Nothing here calls into the code paths it is used to check.
#![allow(dead_code)]

use admg_core::graph::{Admg, VertexSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn g1() -> Admg {
    Admg::from_edges(
        &["1", "2", "3", "4"],
        &[("1", "2"), ("2", "4")],
        &[("2", "3"), ("3", "4")],
    )
    .unwrap()
}

pub fn g2() -> Admg {
    Admg::from_edges(&["1", "2", "3"], &[("1", "2")], &[("1", "3"), ("2", "3")]).unwrap()
}

/// 1 -> 3, 2 -> 4, 2 <-> 3, 1 <-> 4.
pub fn fig2() -> Admg {
    Admg::from_edges(
        &["1", "2", "3", "4"],
        &[("1", "3"), ("2", "4")],
        &[("2", "3"), ("1", "4")],
    )
    .unwrap()
}

fn labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Random ADMG: directed edges follow a random permutation, so the result is
/// acyclic but vertex order is not topological.
pub fn random_admg(rng: &mut TestRng, n: usize, p_dir: f64, p_bi: f64) -> Admg {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut dir = Vec::new();
    let mut bi = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p_dir) {
                dir.push((perm[a], perm[b]));
            }
            if rng.gen_bool(p_bi) {
                bi.push((a, b));
            }
        }
    }
    Admg::new(labels(n), &dir, &bi).unwrap()
}

pub fn random_dag(rng: &mut TestRng, n: usize, p_dir: f64) -> Admg {
    random_admg(rng, n, p_dir, 0.0)
}

/// A strictly positive law that obeys the global Markov property of `g`,
/// built as the margin of a DAG in which every bidirected edge is replaced
/// by a binary latent common parent. CPT entries are drawn from
/// `[lo, 1 - lo]`.
pub fn random_model_law(g: &Admg, rng: &mut TestRng, lo: f64) -> Vec<f64> {
    let n = g.n();
    let bi = g.bidirected_edges();
    let n_lat = bi.len();
    // topological order of observed vertices
    let mut order = Vec::new();
    let mut placed = VertexSet::EMPTY;
    while order.len() < n {
        for v in 0..n {
            if !placed.contains(v) && g.parents_of(v).is_subset(placed) {
                order.push(v);
                placed = placed.with(v);
            }
        }
    }
    let lat_p: Vec<f64> = (0..n_lat).map(|_| rng.gen_range(lo..1.0 - lo)).collect();
    // per vertex, CPT indexed by (observed parents bits, latent parents bits)
    let lat_of: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            bi.iter()
                .enumerate()
                .filter(|(_, &(a, b))| a == v || b == v)
                .map(|(k, _)| k)
                .collect()
        })
        .collect();
    let cpt: Vec<Vec<f64>> = (0..n)
        .map(|v| {
            let size = 1usize << (g.parents_of(v).len() + lat_of[v].len());
            (0..size).map(|_| rng.gen_range(lo..1.0 - lo)).collect()
        })
        .collect();
    let mut p = vec![0.0; 1 << n];
    for u in 0..1usize << n_lat {
        let pu: f64 = (0..n_lat)
            .map(|k| if u >> k & 1 == 1 { lat_p[k] } else { 1.0 - lat_p[k] })
            .product();
        for (x, px) in p.iter_mut().enumerate() {
            let mut prob = pu;
            for &v in &order {
                let mut idx = 0usize;
                let mut bit = 0;
                for pa in g.parents_of(v) {
                    idx |= (x >> pa & 1) << bit;
                    bit += 1;
                }
                for &k in &lat_of[v] {
                    idx |= (u >> k & 1) << bit;
                    bit += 1;
                }
                let p1 = cpt[v][idx];
                prob *= if x >> v & 1 == 1 { p1 } else { 1.0 - p1 };
            }
            *px += prob;
        }
    }
    p
}

/// Multinomial sample of size `n` from `p` by inversion.
pub fn sample_counts(p: &[f64], n: u64, rng: &mut TestRng) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &x in p {
        acc += x;
        cdf.push(acc);
    }
    let mut counts = vec![0u64; p.len()];
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * acc;
        let i = cdf.partition_point(|&c| c <= u).min(p.len() - 1);
        counts[i] += 1;
    }
    counts
}

/// Brute-force m-separation: enumerate every edge sequence without a
/// repeated edge starting at each `x`, pruning as soon as an internal vertex
/// violates the collider/non-collider rule.
pub fn m_separated_brute(g: &Admg, x: VertexSet, y: VertexSet, z: VertexSet) -> bool {
    // edge list: (a, b, arrow at a, arrow at b)
    let mut edges: Vec<(usize, usize, bool, bool)> = Vec::new();
    for a in 0..g.n() {
        for b in 0..g.n() {
            if g.has_directed(a, b) {
                edges.push((a, b, false, true));
            }
            if a < b && g.has_bidirected(a, b) {
                edges.push((a, b, true, true));
            }
        }
    }
    // descendant check written out directly
    let has_desc_in_z = |v: usize| -> bool {
        let mut seen = VertexSet::singleton(v);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if z.contains(u) {
                return true;
            }
            for &(a, b, arrow_a, arrow_b) in &edges {
                if a == u && !arrow_a && arrow_b && !seen.contains(b) {
                    seen = seen.with(b);
                    stack.push(b);
                }
            }
        }
        false
    };

    fn dfs(
        edges: &[(usize, usize, bool, bool)],
        used: &mut Vec<bool>,
        v: usize,
        arrived_arrow: Option<bool>,
        y: VertexSet,
        z: VertexSet,
        collider_ok: &dyn Fn(usize) -> bool,
    ) -> bool {
        for (k, &(a, b, arrow_a, arrow_b)) in edges.iter().enumerate() {
            if used[k] {
                continue;
            }
            let (w, arrow_v, arrow_w) = if a == v {
                (b, arrow_a, arrow_b)
            } else if b == v {
                (a, arrow_b, arrow_a)
            } else {
                continue;
            };
            if let Some(arr) = arrived_arrow {
                let collider = arr && arrow_v;
                let ok = if collider { collider_ok(v) } else { !z.contains(v) };
                if !ok {
                    continue;
                }
            }
            if y.contains(w) {
                return true;
            }
            used[k] = true;
            let found = dfs(edges, used, w, Some(arrow_w), y, z, collider_ok);
            used[k] = false;
            if found {
                return true;
            }
        }
        false
    }

    for s in x.iter() {
        let mut used = vec![false; edges.len()];
        if dfs(&edges, &mut used, s, None, y, z, &has_desc_in_z) {
            return false;
        }
    }
    true
}

/// Classical d-separation on a DAG via the moralized ancestral graph.
pub fn d_separated_moral(g: &Admg, x: VertexSet, y: VertexSet, z: VertexSet) -> bool {
    let n = g.n();
    // ancestral closure by fixed point over parent sets
    let mut anc = x | y | z;
    loop {
        let mut next = anc;
        for v in anc.iter() {
            next = next | g.parents_of(v);
        }
        if next == anc {
            break;
        }
        anc = next;
    }
    let mut adj = vec![VertexSet::EMPTY; n];
    for v in anc.iter() {
        let pa = g.parents_of(v) & anc;
        for p in pa.iter() {
            adj[v] = adj[v].with(p);
            adj[p] = adj[p].with(v);
            for q in pa.iter() {
                if q != p {
                    adj[p] = adj[p].with(q);
                }
            }
        }
    }
    let mut seen = x;
    let mut stack: Vec<usize> = x.iter().collect();
    while let Some(u) = stack.pop() {
        for w in adj[u].iter() {
            if z.contains(w) || seen.contains(w) {
                continue;
            }
            if y.contains(w) {
                return false;
            }
            seen = seen.with(w);
            stack.push(w);
        }
    }
    true
}

/// Φ by exhaustive search: every nonempty `H ⊆ W` with
/// `H = ∩_{x ∈ H} barren(an(dis_W(x)))`.
pub fn phi_brute(g: &Admg, w: VertexSet) -> Vec<VertexSet> {
    let mut out = Vec::new();
    let members: Vec<usize> = w.iter().collect();
    for mask in 1u64..1 << members.len() {
        let h: VertexSet = (0..members.len())
            .filter(|&k| mask >> k & 1 == 1)
            .map(|k| members[k])
            .collect();
        let inter = h.iter().fold(VertexSet::full(g.n()), |acc, x| {
            let d = district_brute(g, x, w);
            let an = ancestors_brute(g, d);
            acc & barren_brute(g, an)
        });
        if inter == h {
            out.push(h);
        }
    }
    out.sort();
    out
}

/// [W] by iterating [`phi_brute`].
pub fn partition_brute(g: &Admg, w: VertexSet) -> Vec<VertexSet> {
    let mut out = Vec::new();
    let mut rest = w;
    while !rest.is_empty() {
        let round = phi_brute(g, rest);
        assert!(!round.is_empty(), "phi must extract something");
        for b in round {
            rest = rest - b;
            out.push(b);
        }
    }
    out.sort();
    out
}

fn district_brute(g: &Admg, x: usize, w: VertexSet) -> VertexSet {
    let mut comp = VertexSet::singleton(x);
    loop {
        let mut next = comp;
        for a in comp.iter() {
            for b in w.iter() {
                if g.has_bidirected(a, b) {
                    next = next.with(b);
                }
            }
        }
        if next == comp {
            return comp;
        }
        comp = next;
    }
}

fn ancestors_brute(g: &Admg, a: VertexSet) -> VertexSet {
    let mut out = a;
    loop {
        let mut next = out;
        for v in 0..g.n() {
            for u in out.iter() {
                if g.has_directed(v, u) {
                    next = next.with(v);
                }
            }
        }
        if next == out {
            return out;
        }
        out = next;
    }
}

fn barren_brute(g: &Admg, a: VertexSet) -> VertexSet {
    a.iter()
        .filter(|&x| {
            // no proper descendant of x in a
            !a.iter()
                .any(|y| y != x && ancestors_brute(g, VertexSet::singleton(y)).contains(x))
        })
        .collect()
}

/// Closed-form DAG MLE log-likelihood: Σ_v Σ n(x_v, x_pa) log(n(x_v, x_pa) / n(x_pa)).
pub fn dag_mle_loglik(g: &Admg, counts: &[u64]) -> f64 {
    let mut total = 0.0;
    for v in 0..g.n() {
        let pa: Vec<usize> = g.parents_of(v).iter().collect();
        let mut joint = vec![0u64; 1 << (pa.len() + 1)];
        for (i, &c) in counts.iter().enumerate() {
            let mut idx = i >> v & 1;
            for (k, &p) in pa.iter().enumerate() {
                idx |= (i >> p & 1) << (k + 1);
            }
            joint[idx] += c;
        }
        for t in 0..1 << pa.len() {
            let n0 = joint[t << 1] as f64;
            let n1 = joint[(t << 1) | 1] as f64;
            let nt = n0 + n1;
            for nk in [n0, n1] {
                if nk > 0.0 {
                    total += nk * (nk / nt).ln();
                }
            }
        }
    }
    total
}

/// Product of empirical margins.
pub fn independence_law(counts: &[u64], n_vertices: usize) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let m1: Vec<f64> = (0..n_vertices)
        .map(|v| {
            counts
                .iter()
                .enumerate()
                .filter(|(i, _)| i >> v & 1 == 1)
                .map(|(_, &c)| c)
                .sum::<u64>() as f64
                / total as f64
        })
        .collect();
    (0..counts.len())
        .map(|i| {
            (0..n_vertices)
                .map(|v| if i >> v & 1 == 1 { m1[v] } else { 1.0 - m1[v] })
                .product()
        })
        .collect()
}

/// All pairwise m-separation statements `x ⊥ y | Z` with `Z ⊆ V \ {x, y}`.
pub fn independence_model(g: &Admg) -> Vec<bool> {
    let n = g.n();
    let mut out = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let rest = g.vertices() - VertexSet::singleton(x) - VertexSet::singleton(y);
            for z in rest.subsets() {
                out.push(
                    g.m_separated(VertexSet::singleton(x), VertexSet::singleton(y), z)
                        .unwrap(),
                );
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
