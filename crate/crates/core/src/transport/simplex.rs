//! Exact solver for the balanced transportation problem with Euclidean
//! ground cost: primal transportation simplex on the spanning-tree basis
//! (northwest-corner start, u/v potentials from tree traversal, cycle
//! pivoting). Degeneracy is broken by a deterministic supply perturbation
//! far below the 1e-9 marginal tolerance.

use crate::{Error, Result};

pub(crate) struct TransportSolution {
    /// `(source, target, flow)` triples with positive flow.
    pub cells: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Worst (most negative) reduced cost at termination (diagnostic).
    #[allow(dead_code)]
    pub optimality_defect: f64,
    #[allow(dead_code)]
    pub pivots: usize,
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn solve_transportation(
    sources: &[Vec<f64>],
    source_w: &[f64],
    targets: &[Vec<f64>],
    target_w: &[f64],
) -> Result<TransportSolution> {
    let m = sources.len();
    let n = targets.len();
    let arcs = m
        .checked_mul(n)
        .ok_or_else(|| Error::ResourceGuard("arc count overflow".into()))?;
    if arcs > 4_000_000 {
        return Err(Error::ResourceGuard(format!(
            "{arcs} arcs exceed the 4e6 arc budget"
        )));
    }

    let sum_a: f64 = source_w.iter().sum();
    let sum_b: f64 = target_w.iter().sum();
    if (sum_a - sum_b).abs() > 1e-9 {
        return Err(Error::Unbalanced((sum_a - sum_b).abs()));
    }

    // Rescale demands so the float totals match exactly, then perturb the
    // supplies to break degeneracy (uniform weights are maximally
    // degenerate otherwise). The total perturbation stays far below the
    // 1e-9 marginal tolerance.
    let rescale = sum_a / sum_b;
    let min_w = source_w
        .iter()
        .chain(target_w.iter())
        .fold(f64::INFINITY, |acc, &w| acc.min(w));
    let eps0 = 1e-12 * min_w / (m as f64 + 1.0);
    let a: Vec<f64> = source_w
        .iter()
        .enumerate()
        .map(|(i, &w)| w + (i + 1) as f64 * eps0)
        .collect();
    let mut b: Vec<f64> = target_w.iter().map(|&w| w * rescale).collect();
    let total_pert = eps0 * (m * (m + 1) / 2) as f64;
    b[n - 1] += total_pert;

    let mut cost = vec![0.0; arcs];
    for (i, s) in sources.iter().enumerate() {
        for (j, t) in targets.iter().enumerate() {
            cost[i * n + j] = euclid(s, t);
        }
    }
    let cost_scale = cost.iter().fold(1.0_f64, |acc, &c| acc.max(c));

    // Northwest-corner start: exactly m+n−1 basic cells forming a tree.
    let mut cells: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    {
        let (mut i, mut j) = (0usize, 0usize);
        let mut rem_a = a[0];
        let mut rem_b = b[0];
        loop {
            let f = rem_a.min(rem_b);
            cells.push((i, j, f));
            if i == m - 1 && j == n - 1 {
                break;
            }
            if rem_a <= rem_b && i < m - 1 {
                rem_b -= rem_a;
                i += 1;
                rem_a = a[i];
            } else if j < n - 1 {
                rem_a -= rem_b;
                j += 1;
                rem_b = b[j];
            } else {
                rem_b -= rem_a;
                i += 1;
                rem_a = a[i];
            }
        }
    }
    debug_assert_eq!(cells.len(), m + n - 1);

    // Tree adjacency: nodes 0..m are rows, m..m+n are columns.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (arc, &(i, j, _)) in cells.iter().enumerate() {
        adj[i].push(arc);
        adj[m + j].push(arc);
    }

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut known = vec![false; m + n];
    let mut queue: Vec<usize> = Vec::with_capacity(m + n);

    let entering_tol = -1e-11 * cost_scale;
    let pivot_limit = 500 + 60 * (m + n);
    let mut pivots = 0usize;

    loop {
        // Potentials from the tree: u_i + v_j = c_ij on basic cells.
        known.iter_mut().for_each(|k| *k = false);
        queue.clear();
        queue.push(0);
        known[0] = true;
        u[0] = 0.0;
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &arc in &adj[node] {
                let (i, j, _) = cells[arc];
                let (row_node, col_node) = (i, m + j);
                let other = if node == row_node { col_node } else { row_node };
                if !known[other] {
                    known[other] = true;
                    if other == col_node {
                        v[j] = cost[i * n + j] - u[i];
                    } else {
                        u[i] = cost[i * n + j] - v[j];
                    }
                    queue.push(other);
                }
            }
        }
        if queue.len() != m + n {
            return Err(Error::Solver(
                "transportation basis lost tree connectivity".into(),
            ));
        }

        // Dantzig pricing over all cells.
        let mut best = 0.0;
        let mut best_cell = None;
        for i in 0..m {
            let ui = u[i];
            let row = &cost[i * n..(i + 1) * n];
            for (j, &c) in row.iter().enumerate() {
                let r = c - ui - v[j];
                if r < best {
                    best = r;
                    best_cell = Some((i, j));
                }
            }
        }
        let (ei, ej) = match best_cell {
            Some(cell) if best < entering_tol => cell,
            _ => break,
        };

        pivots += 1;
        if pivots > pivot_limit {
            return Err(Error::Solver(format!(
                "transportation simplex exceeded {pivot_limit} pivots"
            )));
        }

        // Unique tree path from row ei to column ej.
        let start = ei;
        let goal = m + ej;
        let mut parent_arc = vec![usize::MAX; m + n];
        let mut parent_node = vec![usize::MAX; m + n];
        let mut seen = vec![false; m + n];
        seen[start] = true;
        queue.clear();
        queue.push(start);
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            if node == goal {
                break;
            }
            for &arc in &adj[node] {
                let (i, j, _) = cells[arc];
                let other = if node == i { m + j } else { i };
                if !seen[other] {
                    seen[other] = true;
                    parent_arc[other] = arc;
                    parent_node[other] = node;
                    queue.push(other);
                }
            }
        }
        if !seen[goal] {
            return Err(Error::Solver("pivot cycle not found".into()));
        }
        let mut path_arcs = Vec::new();
        let mut node = goal;
        while node != start {
            path_arcs.push(parent_arc[node]);
            node = parent_node[node];
        }
        path_arcs.reverse();

        // Arcs at even path positions lose θ, odd positions gain θ.
        let mut theta = f64::INFINITY;
        let mut leaving_pos = usize::MAX;
        for (pos, &arc) in path_arcs.iter().enumerate() {
            if pos % 2 == 0 {
                let flow = cells[arc].2;
                if flow < theta {
                    theta = flow;
                    leaving_pos = pos;
                }
            }
        }
        let leaving_arc = path_arcs[leaving_pos];
        for (pos, &arc) in path_arcs.iter().enumerate() {
            if pos % 2 == 0 {
                cells[arc].2 -= theta;
            } else {
                cells[arc].2 += theta;
            }
        }

        // Swap the leaving arc for the entering cell.
        let (li, lj, _) = cells[leaving_arc];
        adj[li].retain(|&arcid| arcid != leaving_arc);
        adj[m + lj].retain(|&arcid| arcid != leaving_arc);
        cells[leaving_arc] = (ei, ej, theta);
        adj[ei].push(leaving_arc);
        adj[m + ej].push(leaving_arc);
    }

    // Certify: full reduced-cost scan.
    let mut defect = 0.0_f64;
    for i in 0..m {
        for j in 0..n {
            let r = cost[i * n + j] - u[i] - v[j];
            defect = defect.min(r);
        }
    }
    if defect < -1e-9 * cost_scale {
        return Err(Error::Solver(format!(
            "optimality certificate failed: reduced cost {defect:e}"
        )));
    }

    let mut total = 0.0;
    let mut out = Vec::with_capacity(cells.len());
    for &(i, j, f) in &cells {
        let f = if f < 0.0 {
            if f < -1e-12 {
                return Err(Error::Solver(format!("negative basic flow {f:e}")));
            }
            0.0
        } else {
            f
        };
        if f > 0.0 {
            total += f * cost[i * n + j];
            out.push((i, j, f));
        }
    }

    Ok(TransportSolution {
        cells: out,
        cost: total,
        optimality_defect: defect,
        pivots,
    })
}
