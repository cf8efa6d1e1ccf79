//! Shortest paths and minimum-weight spanning in-trees on dense digraphs.
//!
//! An in-tree rooted at `r` gives every other node exactly one outgoing
//! edge such that every path of chosen edges leads to `r`; its weight is
//! the sum of chosen edge weights. Two independent routes compute the
//! minimum: exhaustive enumeration with cycle pruning for up to
//! [`BRUTE_FORCE_MAX`] nodes, and Chu-Liu/Edmonds contraction beyond that.
//! Both are kept so each can serve as an oracle for the other.

/// Largest node count the enumeration route accepts.
pub const BRUTE_FORCE_MAX: usize = 8;

/// Nonnegative-cost shortest path distances from `source` on a dense
/// digraph; `cost(u, v)` may return `f64::INFINITY` for missing edges.
/// O(n^2) selection, no heap.
pub fn shortest_path_costs<F: Fn(usize, usize) -> f64>(
    n: usize,
    source: usize,
    cost: F,
) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    for _ in 0..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for v in 0..n {
            if !done[v] && dist[v] < best_d {
                best = v;
                best_d = dist[v];
            }
        }
        if best == usize::MAX {
            break;
        }
        done[best] = true;
        for v in 0..n {
            if !done[v] {
                let c = cost(best, v);
                debug_assert!(c >= 0.0, "negative edge cost");
                let cand = best_d + c;
                if cand < dist[v] {
                    dist[v] = cand;
                }
            }
        }
    }
    dist
}

/// Minimum in-tree weight rooted at `root` by exhaustive enumeration of
/// parent assignments with cycle pruning. `weights[v][u]` is the cost of
/// `v` choosing `u`; `None` if no spanning in-tree exists.
///
/// # Panics
/// If `weights` exceeds [`BRUTE_FORCE_MAX`] nodes.
pub fn min_in_tree_weight_bruteforce(weights: &[Vec<f64>], root: usize) -> Option<f64> {
    let n = weights.len();
    assert!(
        n <= BRUTE_FORCE_MAX,
        "enumeration supports at most {BRUTE_FORCE_MAX} nodes, got {n}"
    );
    let nodes: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut parent = vec![usize::MAX; n];
    let mut best: Option<f64> = None;
    enumerate_parents(weights, root, &nodes, 0, 0.0, &mut parent, &mut best);
    best
}

fn enumerate_parents(
    weights: &[Vec<f64>],
    root: usize,
    nodes: &[usize],
    pos: usize,
    acc: f64,
    parent: &mut Vec<usize>,
    best: &mut Option<f64>,
) {
    if best.is_some_and(|b| acc >= b) {
        return;
    }
    if pos == nodes.len() {
        *best = Some(best.map_or(acc, |b| b.min(acc)));
        return;
    }
    let v = nodes[pos];
    for u in 0..weights.len() {
        if u == v {
            continue;
        }
        let w = weights[v][u];
        if !w.is_finite() {
            continue;
        }
        // Walk the assigned parents from u; revisiting v closes a cycle.
        let mut cur = u;
        let mut cyclic = false;
        while cur != root && parent[cur] != usize::MAX {
            cur = parent[cur];
            if cur == v {
                cyclic = true;
                break;
            }
        }
        if cyclic {
            continue;
        }
        parent[v] = u;
        enumerate_parents(weights, root, nodes, pos + 1, acc + w, parent, best);
        parent[v] = usize::MAX;
    }
}

/// Minimum in-tree weight rooted at `root` via Chu-Liu/Edmonds run on the
/// reversed graph, where the in-tree becomes an out-arborescence.
pub fn min_in_tree_weight_edmonds(weights: &[Vec<f64>], root: usize) -> Option<f64> {
    let n = weights.len();
    let mut edges = Vec::new();
    for v in 0..n {
        for u in 0..n {
            if u != v && weights[v][u].is_finite() {
                // v -> u in the in-tree is u -> v in the arborescence.
                edges.push((u, v, weights[v][u]));
            }
        }
    }
    min_arborescence(n, root, edges)
}

/// Chu-Liu/Edmonds: minimum spanning out-arborescence cost from `root`
/// over `(from, to, cost)` edges, contracting one cycle per round.
fn min_arborescence(mut n: usize, mut root: usize, mut edges: Vec<(usize, usize, f64)>) -> Option<f64> {
    let mut total = 0.0;
    loop {
        let mut in_cost = vec![f64::INFINITY; n];
        let mut in_from = vec![usize::MAX; n];
        for &(u, v, c) in &edges {
            if v != root && u != v && c < in_cost[v] {
                in_cost[v] = c;
                in_from[v] = u;
            }
        }
        for v in 0..n {
            if v != root && !in_cost[v].is_finite() {
                return None;
            }
        }
        // Find one cycle in the chosen-parent graph.
        let mut color = vec![0u8; n]; // 0 unseen, 1 in progress, 2 done
        let mut cycle: Vec<usize> = Vec::new();
        for start in 0..n {
            if color[start] != 0 || start == root {
                continue;
            }
            let mut path = Vec::new();
            let mut v = start;
            while v != root && color[v] == 0 {
                color[v] = 1;
                path.push(v);
                v = in_from[v];
            }
            if v != root && color[v] == 1 {
                let pos = path.iter().position(|&x| x == v).unwrap();
                cycle = path[pos..].to_vec();
            }
            for &x in &path {
                color[x] = 2;
            }
            if !cycle.is_empty() {
                break;
            }
        }
        if cycle.is_empty() {
            for v in 0..n {
                if v != root {
                    total += in_cost[v];
                }
            }
            return Some(total);
        }
        // Contract the cycle; its internal edges are paid for now.
        for &v in &cycle {
            total += in_cost[v];
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let in_cycle = {
            let mut f = vec![false; n];
            for &v in &cycle {
                f[v] = true;
            }
            f
        };
        for v in 0..n {
            if !in_cycle[v] {
                label[v] = next;
                next += 1;
            }
        }
        let super_node = next;
        for &v in &cycle {
            label[v] = super_node;
        }
        let mut new_edges = Vec::with_capacity(edges.len());
        for &(u, v, c) in &edges {
            let (lu, lv) = (label[u], label[v]);
            if lu == lv {
                continue;
            }
            let cost = if in_cycle[v] { c - in_cost[v] } else { c };
            new_edges.push((lu, lv, cost));
        }
        root = label[root];
        n = super_node + 1;
        edges = new_edges;
    }
}
