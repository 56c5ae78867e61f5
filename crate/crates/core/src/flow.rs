//! Max-flow (Dinic) on real capacities, and feasible circulations with
//! lower bounds reduced to a single max-flow.

use std::collections::VecDeque;

/// Absolute tolerance for saturation and bound checks.
pub const FLOW_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: f64,
}

#[derive(Debug, Clone)]
pub struct MaxFlow {
    adj: Vec<Vec<usize>>,
    arcs: Vec<Arc>,
}

impl MaxFlow {
    pub fn new(n: usize) -> MaxFlow {
        MaxFlow { adj: vec![Vec::new(); n], arcs: Vec::new() }
    }

    /// Adds `u -> v` with capacity `cap`; returns the arc id.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to: v, cap });
        self.arcs.push(Arc { to: u, cap: 0.0 });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    /// Flow currently carried by arc `id`.
    pub fn flow(&self, id: usize) -> f64 {
        self.arcs[id + 1].cap
    }

    fn levels(&self, s: usize, eps: f64) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let a = &self.arcs[e];
                if a.cap > eps && level[a.to] == usize::MAX {
                    level[a.to] = level[u] + 1;
                    q.push_back(a.to);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, push: f64, level: &[usize], next: &mut [usize], eps: f64) -> f64 {
        if u == t {
            return push;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let (to, cap) = (self.arcs[e].to, self.arcs[e].cap);
            if cap > eps && level[to] == level[u] + 1 {
                let got = self.augment(to, t, push.min(cap), level, next, eps);
                if got > 0.0 {
                    self.arcs[e].cap -= got;
                    self.arcs[e ^ 1].cap += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    /// Maximum `s -> t` flow. Residual capacities at or below `eps` count as saturated.
    pub fn run(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(s, eps);
            if level[t] == usize::MAX {
                return total;
            }
            let mut next = vec![0; self.adj.len()];
            loop {
                let f = self.augment(s, t, f64::INFINITY, &level, &mut next, eps);
                if f <= 0.0 {
                    break;
                }
                total += f;
            }
        }
    }
}

/// Arc of a circulation problem with bounds `lower <= flow <= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedArc {
    pub from: usize,
    pub to: usize,
    pub lower: f64,
    pub upper: f64,
}

/// A circulation satisfying all bounds, or `None`.
pub fn feasible_circulation(num_nodes: usize, arcs: &[BoundedArc]) -> Option<Vec<f64>> {
    if arcs.iter().any(|a| a.lower > a.upper + FLOW_TOL) {
        return None;
    }
    let (src, sink) = (num_nodes, num_nodes + 1);
    let mut mf = MaxFlow::new(num_nodes + 2);
    let mut excess = vec![0.0; num_nodes];
    let ids: Vec<usize> = arcs
        .iter()
        .map(|a| {
            excess[a.to] += a.lower;
            excess[a.from] -= a.lower;
            mf.add_arc(a.from, a.to, (a.upper - a.lower).max(0.0))
        })
        .collect();
    let mut demand = 0.0;
    for (v, &e) in excess.iter().enumerate() {
        if e > 0.0 {
            mf.add_arc(src, v, e);
            demand += e;
        } else if e < 0.0 {
            mf.add_arc(v, sink, -e);
        }
    }
    let got = mf.run(src, sink, FLOW_TOL * 1e-3);
    if got < demand - FLOW_TOL {
        return None;
    }
    Some(arcs.iter().zip(&ids).map(|(a, &id)| a.lower + mf.flow(id)).collect())
}

/// Largest violation of conservation or of a bound.
pub fn circulation_residual(num_nodes: usize, arcs: &[BoundedArc], flow: &[f64]) -> f64 {
    let mut net = vec![0.0; num_nodes];
    let mut worst: f64 = 0.0;
    for (a, &x) in arcs.iter().zip(flow) {
        net[a.to] += x;
        net[a.from] -= x;
        worst = worst.max(a.lower - x).max(x - a.upper);
    }
    net.iter().fold(worst, |w, n| w.max(n.abs()))
}
