//! Primal network simplex for the balanced transportation problem.
//!
//! Nodes are the sources, the sinks and an artificial root. The basis is kept
//! strongly feasible so degenerate pivots cannot cycle. After each pivot the
//! tree is re-rooted by a DFS, `O(n + m)`.

use super::CostMatrix;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// Tree arc points from the node to its parent.
    Up,
    /// Tree arc points from the parent to the node.
    Down,
}

struct Network<'a> {
    cost: &'a CostMatrix,
    n: usize,
    m: usize,
    root: usize,
    art_cost: f64,
    /// Artificial arc of node `u` points to the root.
    art_up: Vec<bool>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    dir: Vec<Dir>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    adj: Vec<Vec<usize>>,
    seen: Vec<bool>,
    stack: Vec<usize>,
}

impl Network<'_> {
    fn real_arcs(&self) -> usize {
        self.n * self.m
    }

    fn endpoints(&self, e: usize) -> (usize, usize) {
        let real = self.real_arcs();
        if e < real {
            (e / self.m, self.n + e % self.m)
        } else {
            let u = e - real;
            if self.art_up[u] {
                (u, self.root)
            } else {
                (self.root, u)
            }
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.real_arcs() {
            self.cost.data[e]
        } else {
            self.art_cost
        }
    }

    fn rebuild(&mut self) {
        let root = self.root;
        self.seen.iter_mut().for_each(|s| *s = false);
        self.seen[root] = true;
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        self.parent[root] = usize::MAX;
        self.stack.clear();
        self.stack.push(root);
        while let Some(u) = self.stack.pop() {
            for k in 0..self.adj[u].len() {
                let e = self.adj[u][k];
                let (s, t) = self.endpoints(e);
                let w = if s == u { t } else { s };
                if self.seen[w] {
                    continue;
                }
                self.seen[w] = true;
                self.parent[w] = u;
                self.pred[w] = e;
                self.depth[w] = self.depth[u] + 1;
                let c = self.arc_cost(e);
                if s == w {
                    self.dir[w] = Dir::Up;
                    self.pi[w] = self.pi[u] - c;
                } else {
                    self.dir[w] = Dir::Down;
                    self.pi[w] = self.pi[u] + c;
                }
                self.stack.push(w);
            }
        }
    }

    fn pivot(&mut self, entering: usize) {
        let (first, second) = self.endpoints(entering);
        let (mut a, mut b) = (first, second);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        let join = a;

        // The cycle runs first -> second -> join -> first. Arcs pointing
        // against it lose flow and may leave.
        let mut delta = f64::INFINITY;
        let mut out_node = usize::MAX;
        let mut u = first;
        while u != join {
            if self.dir[u] == Dir::Up {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    out_node = u;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if self.dir[u] == Dir::Down {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    out_node = u;
                }
            }
            u = self.parent[u];
        }
        debug_assert!(out_node != usize::MAX);

        if delta > 0.0 {
            self.flow[entering] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                match self.dir[u] {
                    Dir::Up => self.flow[e] -= delta,
                    Dir::Down => self.flow[e] += delta,
                }
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                match self.dir[u] {
                    Dir::Up => self.flow[e] += delta,
                    Dir::Down => self.flow[e] -= delta,
                }
                u = self.parent[u];
            }
        }

        let leaving = self.pred[out_node];
        self.flow[leaving] = 0.0;
        self.in_tree[leaving] = false;
        self.in_tree[entering] = true;
        let (ls, lt) = self.endpoints(leaving);
        self.adj[ls].retain(|&e| e != leaving);
        self.adj[lt].retain(|&e| e != leaving);
        self.adj[first].push(entering);
        self.adj[second].push(entering);
        self.rebuild();
    }
}

/// Exact optimal transport cost between marginals `a` (rows) and `b`
/// (columns) of equal total mass.
pub fn transport_simplex(cost: &CostMatrix, a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(cost.rows, a.len());
    assert_eq!(cost.cols, b.len());
    let (n, m) = (a.len(), b.len());
    if n == 1 || m == 1 {
        let mut total = 0.0;
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                total += ai * bj * cost.get(i, j);
            }
        }
        let mass = if n == 1 { a[0] } else { b[0] };
        return if mass > 0.0 { total / mass } else { 0.0 };
    }
    let nodes = n + m + 1;
    let real = n * m;
    let max_cost = cost.max();
    let supply: Vec<f64> = a.iter().copied().chain(b.iter().map(|x| -x)).collect();

    let mut net = Network {
        cost,
        n,
        m,
        root: n + m,
        art_cost: (max_cost.abs() + 1.0) * nodes as f64,
        art_up: supply.iter().map(|&s| s > 0.0).collect(),
        flow: vec![0.0; real + n + m],
        in_tree: vec![false; real + n + m],
        parent: vec![usize::MAX; nodes],
        pred: vec![usize::MAX; nodes],
        dir: vec![Dir::Down; nodes],
        depth: vec![0; nodes],
        pi: vec![0.0; nodes],
        adj: vec![Vec::new(); nodes],
        seen: vec![false; nodes],
        stack: Vec::with_capacity(nodes),
    };
    for (u, s) in supply.iter().enumerate() {
        let e = real + u;
        net.flow[e] = s.abs();
        net.in_tree[e] = true;
        net.adj[u].push(e);
        net.adj[n + m].push(e);
    }
    net.rebuild();

    let tol = 1e-12 * (1.0 + max_cost.abs());
    let block = ((real as f64).sqrt().ceil() as usize).max(10);
    let mut next = 0usize;
    loop {
        let mut best = usize::MAX;
        let mut best_rc = -tol;
        let mut in_block = 0usize;
        for _ in 0..real {
            let e = next;
            next += 1;
            if next == real {
                next = 0;
            }
            in_block += 1;
            if !net.in_tree[e] {
                let rc = cost.data[e] + net.pi[e / m] - net.pi[n + e % m];
                if rc < best_rc {
                    best_rc = rc;
                    best = e;
                }
            }
            if in_block >= block {
                if best != usize::MAX {
                    break;
                }
                in_block = 0;
            }
        }
        if best == usize::MAX {
            break;
        }
        net.pivot(best);
    }

    (0..real).map(|e| net.flow[e] * cost.data[e]).sum()
}
