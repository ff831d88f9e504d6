//! Transportation simplex on the bipartite row/column graph.
//!
//! Bases are spanning trees with `n1 + n2 - 1` cells. The start is the
//! north-west-corner rule. Degeneracy is removed by the classical perturbation
//! `a_i + ε` for every supply and `b_last + n1·ε` for the last demand; flows are
//! carried as `re + eps·ε` pairs and compared lexicographically, so every basis
//! visited is non-degenerate and the ratio test has a unique winner. Cycling is
//! therefore impossible. After optimality the flows of the final tree are
//! recomputed from the unperturbed marginals by leaf elimination.

use std::cmp::Ordering;
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Two real parts closer than this are compared on their ε coefficients.
const RE_TOL: f64 = 1e-14;

/// Masses below this are treated as zero in the returned plan.
pub(crate) const MASS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lex {
    re: f64,
    eps: i64,
}

impl Lex {
    fn new(re: f64, eps: i64) -> Self {
        Self { re, eps }
    }

    fn cmp(&self, other: &Lex) -> Ordering {
        let d = self.re - other.re;
        if d.abs() > RE_TOL {
            if d < 0.0 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        } else {
            self.eps.cmp(&other.eps)
        }
    }

    fn add(self, o: Lex) -> Lex {
        Lex::new(self.re + o.re, self.eps + o.eps)
    }

    fn sub(self, o: Lex) -> Lex {
        Lex::new(self.re - o.re, self.eps - o.eps)
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    row: usize,
    col: usize,
    flow: Lex,
}

pub(crate) struct SimplexSolution {
    /// `(row, col, mass)` with `mass >= MASS_FLOOR`.
    pub cells: Vec<(usize, usize, f64)>,
    #[allow(dead_code)]
    pub pivots: usize,
}

struct Tree {
    n1: usize,
    cells: Vec<Cell>,
    /// Basic cell indices incident to each node; rows are `0..n1`, columns `n1..`.
    adj: Vec<Vec<usize>>,
    parent_edge: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<usize>,
    pot: Vec<f64>,
}

impl Tree {
    fn col_node(&self, j: usize) -> usize {
        self.n1 + j
    }

    fn other(&self, e: usize, node: usize) -> usize {
        let c = &self.cells[e];
        if node == c.row {
            self.n1 + c.col
        } else {
            c.row
        }
    }

    /// Rebuilds parent pointers, depths and dual potentials from node 0.
    fn refresh<C: Fn(usize, usize) -> f64>(&mut self, cost: &C) {
        let nodes = self.adj.len();
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::with_capacity(nodes);
        seen[0] = true;
        self.pot[0] = 0.0;
        self.depth[0] = 0;
        self.parent[0] = usize::MAX;
        self.parent_edge[0] = usize::MAX;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for k in 0..self.adj[node].len() {
                let e = self.adj[node][k];
                let next = self.other(e, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let c = self.cells[e];
                // u_row + v_col = c(row, col)
                self.pot[next] = cost(c.row, c.col) - self.pot[node];
                self.depth[next] = self.depth[node] + 1;
                self.parent[next] = node;
                self.parent_edge[next] = e;
                queue.push_back(next);
            }
        }
        debug_assert!(seen.iter().all(|s| *s), "basis is not a spanning tree");
    }

    /// Tree path from column node `j` to row node `i`, as basic cell indices.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let mut a = self.col_node(j);
        let mut b = i;
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while self.depth[a] > self.depth[b] {
            from_a.push(self.parent_edge[a]);
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            from_b.push(self.parent_edge[b]);
            b = self.parent[b];
        }
        while a != b {
            from_a.push(self.parent_edge[a]);
            a = self.parent[a];
            from_b.push(self.parent_edge[b]);
            b = self.parent[b];
        }
        from_a.extend(from_b.into_iter().rev());
        from_a
    }

    fn detach(&mut self, e: usize) {
        let (r, c) = (self.cells[e].row, self.n1 + self.cells[e].col);
        for node in [r, c] {
            let list = &mut self.adj[node];
            let pos = list.iter().position(|&x| x == e).expect("edge listed at node");
            list.swap_remove(pos);
        }
    }

    fn attach(&mut self, e: usize) {
        let (r, c) = (self.cells[e].row, self.n1 + self.cells[e].col);
        self.adj[r].push(e);
        self.adj[c].push(e);
    }
}

fn north_west_corner(supply: &[f64], demand: &[f64]) -> Vec<Cell> {
    let (n1, n2) = (supply.len(), demand.len());
    let sup = |i: usize| Lex::new(supply[i], 1);
    let dem = |j: usize| Lex::new(demand[j], if j + 1 == n2 { n1 as i64 } else { 0 });
    let mut cells = Vec::with_capacity(n1 + n2 - 1);
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (sup(0), dem(0));
    loop {
        if i + 1 == n1 && j + 1 == n2 {
            cells.push(Cell {
                row: i,
                col: j,
                flow: ra,
            });
            break;
        }
        let row_first = if j + 1 == n2 {
            true
        } else if i + 1 == n1 {
            false
        } else {
            ra.cmp(&rb) == Ordering::Less
        };
        if row_first {
            cells.push(Cell {
                row: i,
                col: j,
                flow: ra,
            });
            rb = rb.sub(ra);
            i += 1;
            ra = sup(i);
        } else {
            cells.push(Cell {
                row: i,
                col: j,
                flow: rb,
            });
            ra = ra.sub(rb);
            j += 1;
            rb = dem(j);
        }
    }
    cells
}

/// Solves `min Σ c(i,j) x_ij` subject to row sums `supply` and column sums
/// `demand`. Both marginals must be positive and have equal totals.
pub(crate) fn solve<C: Fn(usize, usize) -> f64>(
    supply: &[f64],
    demand: &[f64],
    cost: C,
) -> Result<SimplexSolution> {
    let (n1, n2) = (supply.len(), demand.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::Empty("transport marginals"));
    }
    let gap = supply.iter().sum::<f64>() - demand.iter().sum::<f64>();
    assert!(
        gap.abs() < 1e-9,
        "unbalanced transport problem after normalization (gap {gap})"
    );

    let mut cost_scale: f64 = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            cost_scale = cost_scale.max(cost(i, j).abs());
        }
    }
    let rc_tol = 1e-12 * (1.0 + cost_scale);

    let nodes = n1 + n2;
    let mut tree = Tree {
        n1,
        cells: north_west_corner(supply, demand),
        adj: vec![Vec::new(); nodes],
        parent_edge: vec![usize::MAX; nodes],
        parent: vec![usize::MAX; nodes],
        depth: vec![0; nodes],
        pot: vec![0.0; nodes],
    };
    for e in 0..tree.cells.len() {
        tree.attach(e);
    }

    let total = n1 * n2;
    let block = ((total as f64).sqrt() as usize).max(16).min(total);
    let max_pivots = 100 * total + 10_000;
    let mut next = 0usize;
    let mut pivots = 0usize;

    loop {
        tree.refresh(&cost);

        // Block-search pricing: most negative reduced cost within the first
        // block that contains any improving cell.
        let mut best: Option<(usize, usize)> = None;
        let mut best_rc = -rc_tol;
        let mut scanned = 0;
        while scanned < total {
            let stop = (scanned + block).min(total);
            while scanned < stop {
                let (i, j) = (next / n2, next % n2);
                let rc = cost(i, j) - tree.pot[i] - tree.pot[n1 + j];
                if rc < best_rc {
                    best_rc = rc;
                    best = Some((i, j));
                }
                next += 1;
                if next == total {
                    next = 0;
                }
                scanned += 1;
            }
            if best.is_some() {
                break;
            }
        }
        let Some((ei, ej)) = best else { break };

        let path = tree.path(ei, ej);
        // Signs alternate from the column end, starting with a decrease.
        let mut leave_pos = 0;
        let mut theta: Option<Lex> = None;
        for (k, &e) in path.iter().enumerate().step_by(2) {
            let f = tree.cells[e].flow;
            let better = match theta {
                None => true,
                Some(t) => f.cmp(&t) == Ordering::Less,
            };
            if better {
                theta = Some(f);
                leave_pos = k;
            }
        }
        let theta = theta.expect("cycle has a decreasing cell");
        for (k, &e) in path.iter().enumerate() {
            let c = &mut tree.cells[e];
            c.flow = if k % 2 == 0 {
                c.flow.sub(theta)
            } else {
                c.flow.add(theta)
            };
        }
        let leaving = path[leave_pos];
        tree.detach(leaving);
        tree.cells[leaving] = Cell {
            row: ei,
            col: ej,
            flow: theta,
        };
        tree.attach(leaving);

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::InvalidPlan(format!(
                "transportation simplex exceeded {max_pivots} pivots"
            )));
        }
    }

    Ok(SimplexSolution {
        cells: peel_flows(&tree, supply, demand),
        pivots,
    })
}

/// Recomputes the tree flows from the true marginals by repeatedly fixing the
/// flow on the single edge of a leaf node.
fn peel_flows(tree: &Tree, supply: &[f64], demand: &[f64]) -> Vec<(usize, usize, f64)> {
    let nodes = tree.adj.len();
    let mut remaining: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut degree: Vec<usize> = tree.adj.iter().map(Vec::len).collect();
    let mut done = vec![false; tree.cells.len()];
    let mut flow = vec![0.0; tree.cells.len()];
    let mut leaves: Vec<usize> = (0..nodes).filter(|&v| degree[v] == 1).collect();
    while let Some(v) = leaves.pop() {
        if degree[v] != 1 {
            continue;
        }
        let e = *tree.adj[v]
            .iter()
            .find(|&&e| !done[e])
            .expect("leaf has one live edge");
        let w = tree.other(e, v);
        let m = remaining[v];
        flow[e] = m;
        done[e] = true;
        remaining[v] = 0.0;
        remaining[w] -= m;
        degree[v] -= 1;
        degree[w] -= 1;
        if degree[w] == 1 {
            leaves.push(w);
        }
    }
    let mut out: Vec<(usize, usize, f64)> = tree
        .cells
        .iter()
        .zip(flow)
        .filter(|(_, m)| *m >= MASS_FLOOR)
        .map(|(c, m)| (c.row, c.col, m))
        .collect();
    out.sort_by_key(|c| (c.0, c.1));
    out
}
