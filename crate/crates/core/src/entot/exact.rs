use ndarray::Array2;

use super::{check_same_dim, CostMatrix, EntotError, Histogram, Result, TransportPlan};

/// Unregularized `W(p, q) = min_{X ∈ U(p,q)} ⟨M, X⟩`.
pub fn exact_ot(p: &Histogram, q: &Histogram, m: &CostMatrix) -> Result<f64> {
    Ok(exact_plan(p, q, m)?.cost(m))
}

/// An optimal vertex of `U(p, q)`, found with the transportation simplex
/// method on the positive-mass rows and columns.
pub fn exact_plan(p: &Histogram, q: &Histogram, m: &CostMatrix) -> Result<TransportPlan> {
    check_same_dim(p, m)?;
    check_same_dim(q, m)?;
    let d = m.dim();
    let rows: Vec<usize> = (0..d).filter(|&i| p.mass()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..d).filter(|&j| q.mass()[j] > 0.0).collect();
    let a: Vec<f64> = rows.iter().map(|&i| p.mass()[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| q.mass()[j]).collect();
    let c = Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| m.entries()[[rows[i], cols[j]]]);
    let mut x = Array2::zeros((d, d));
    for (i, j, f) in solve_transport(&a, &b, &c)? {
        x[[rows[i], cols[j]]] += f;
    }
    Ok(TransportPlan::from_entries(x))
}

struct Tree {
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// Cell ids incident to each node; rows are `0..n`, columns `n..n+k`.
    adj: Vec<Vec<usize>>,
    n: usize,
}

impl Tree {
    /// North-west corner start: `n + k − 1` cells forming a staircase tree.
    fn north_west(a: &[f64], b: &[f64]) -> Self {
        let (n, k) = (a.len(), b.len());
        let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
        let mut tree = Self { cells: Vec::with_capacity(n + k - 1), flow: Vec::new(), adj: vec![Vec::new(); n + k], n };
        let (mut i, mut j) = (0, 0);
        loop {
            let t = ra[i].min(rb[j]);
            ra[i] -= t;
            rb[j] -= t;
            tree.push(i, j, t);
            if i == n - 1 && j == k - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == k - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        tree
    }

    fn push(&mut self, i: usize, j: usize, f: f64) {
        let id = self.cells.len();
        self.cells.push((i, j));
        self.flow.push(f);
        self.adj[i].push(id);
        self.adj[self.n + j].push(id);
    }

    fn other_end(&self, node: usize, cell: usize) -> usize {
        let (i, j) = self.cells[cell];
        if node < self.n {
            self.n + j
        } else {
            i
        }
    }

    fn replace(&mut self, id: usize, i: usize, j: usize, f: f64) {
        let (oi, oj) = self.cells[id];
        let n = self.n;
        self.adj[oi].retain(|&c| c != id);
        self.adj[n + oj].retain(|&c| c != id);
        self.cells[id] = (i, j);
        self.flow[id] = f;
        self.adj[i].push(id);
        self.adj[n + j].push(id);
    }
}

/// Potentials `u_i + v_j = c_ij` on tree cells, rooted at row 0, plus the
/// parent structure used to trace cycles.
struct Rooted {
    pot: Vec<f64>,
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
}

fn root_tree(tree: &Tree, c: &Array2<f64>, queue: &mut Vec<usize>) -> Rooted {
    let nodes = tree.adj.len();
    let mut r = Rooted {
        pot: vec![0.0; nodes],
        parent: vec![usize::MAX; nodes],
        parent_cell: vec![usize::MAX; nodes],
        depth: vec![usize::MAX; nodes],
    };
    queue.clear();
    queue.push(0);
    r.depth[0] = 0;
    let mut head = 0;
    while head < queue.len() {
        let node = queue[head];
        head += 1;
        for &cell in &tree.adj[node] {
            let other = tree.other_end(node, cell);
            if r.depth[other] != usize::MAX {
                continue;
            }
            let (i, j) = tree.cells[cell];
            r.pot[other] = c[[i, j]] - r.pot[node];
            r.parent[other] = node;
            r.parent_cell[other] = cell;
            r.depth[other] = r.depth[node] + 1;
            queue.push(other);
        }
    }
    r
}

/// Basic cells `(i, j, flow)` of an optimal plan.
fn solve_transport(a: &[f64], b: &[f64], c: &Array2<f64>) -> Result<Vec<(usize, usize, f64)>> {
    let (n, k) = (a.len(), b.len());
    let mut tree = Tree::north_west(a, b);
    let scale = c.iter().copied().fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let total = n * k;
    let block = ((total as f64).sqrt() as usize).max(16).min(total);
    let max_pivots = 1000 + 50 * (n + k) * (n + k);
    let mut next = 0;
    let mut queue = Vec::with_capacity(n + k);

    for _ in 0..max_pivots {
        let rooted = root_tree(&tree, c, &mut queue);
        // block search pricing
        let mut entering = None;
        let mut best = -tol;
        let mut scanned = 0;
        while scanned < total {
            let end = (scanned + block).min(total);
            for _ in scanned..end {
                let (i, j) = (next / k, next % k);
                let reduced = c[[i, j]] - rooted.pot[i] - rooted.pot[n + j];
                if reduced < best {
                    best = reduced;
                    entering = Some((i, j));
                }
                next = (next + 1) % total;
            }
            scanned = end;
            if entering.is_some() {
                break;
            }
        }
        let Some((ei, ej)) = entering else {
            return Ok(tree.cells.iter().zip(&tree.flow).map(|(&(i, j), &f)| (i, j, f)).collect());
        };

        // tree path between row ei and column ej, split at the apex
        let (mut u, mut v) = (ei, n + ej);
        let (mut from_row, mut from_col) = (Vec::new(), Vec::new());
        while u != v {
            if rooted.depth[u] >= rooted.depth[v] {
                from_row.push(rooted.parent_cell[u]);
                u = rooted.parent[u];
            } else {
                from_col.push(rooted.parent_cell[v]);
                v = rooted.parent[v];
            }
        }
        // cycle order from column ej: from_col upward, then from_row downward;
        // cells alternate −, +, −, ...
        let cycle: Vec<usize> = from_col.iter().copied().chain(from_row.iter().rev().copied()).collect();
        // leaving cell: smallest flow among the − cells, ties broken by the
        // last one met walking from the apex along the entering direction
        let apex_order = from_row.iter().rev().copied().map(|id| (id, true)).chain(
            from_col.iter().copied().map(|id| (id, false)),
        );
        let minus: Vec<bool> = (0..cycle.len()).map(|t| t % 2 == 0).collect();
        let sign_of = |id: usize| minus[cycle.iter().position(|&x| x == id).expect("on cycle")];
        let mut leave = usize::MAX;
        let mut theta = f64::INFINITY;
        for (id, _) in apex_order {
            if sign_of(id) && tree.flow[id] <= theta {
                theta = tree.flow[id];
                leave = id;
            }
        }
        for (t, &id) in cycle.iter().enumerate() {
            if id == leave {
                continue;
            }
            if minus[t] {
                tree.flow[id] -= theta;
            } else {
                tree.flow[id] += theta;
            }
        }
        tree.replace(leave, ei, ej, theta);
    }
    Err(EntotError::ExactOtStalled { pivots: max_pivots })
}
