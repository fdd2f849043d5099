//! Sparse symmetric positive definite solves for the Newton steps of the
//! eigenvalue solver: reverse Cuthill-McKee ordering followed by an
//! envelope (profile) Cholesky factorization. Paths, cycles and trees come
//! out with a tiny envelope, so a factorization costs close to `O(n)`.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub(crate) struct EnvelopeCholesky {
    n: usize,
    /// new index -> original index
    perm: Vec<usize>,
    /// original index -> new index
    inv: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NotPositiveDefinite;

impl EnvelopeCholesky {
    /// Set up the ordering and envelope for the sparsity pattern given by
    /// `pairs` (off-diagonal, original indices).
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in pairs {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (a, list) in adj.iter().enumerate() {
            for &b in list {
                let (r, c) = (inv[a].max(inv[b]), inv[a].min(inv[b]));
                first[r] = first[r].min(c);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            offset.push(total);
            total += i - f + 1;
        }
        offset.push(total);
        Self {
            n,
            perm,
            inv,
            first,
            offset,
            data: vec![0.0; total],
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c >= self.first[r] && c <= r);
        self.offset[r] + (c - self.first[r])
    }

    /// Add `value` to the symmetric entry `(a, b)` (original indices).
    pub fn add(&mut self, a: usize, b: usize, value: f64) {
        let (ia, ib) = (self.inv[a], self.inv[b]);
        let s = self.slot(ia.max(ib), ia.min(ib));
        self.data[s] += value;
    }

    pub fn diagonal(&self, a: usize) -> f64 {
        let i = self.inv[a];
        self.data[self.slot(i, i)]
    }

    /// In-place Cholesky factorization `A = L L^T` within the envelope.
    pub fn factor(&mut self) -> Result<(), NotPositiveDefinite> {
        for i in 0..self.n {
            let fi = self.first[i];
            for j in fi..i {
                let fj = self.first[j];
                let start = fi.max(fj);
                let mut s = self.data[self.slot(i, j)];
                let (oi, oj) = (self.offset[i] - fi, self.offset[j] - fj);
                for k in start..j {
                    s -= self.data[oi + k] * self.data[oj + k];
                }
                let djj = self.data[self.slot(j, j)];
                let sij = self.slot(i, j);
                self.data[sij] = s / djj;
            }
            let oi = self.offset[i] - fi;
            let mut d = self.data[self.slot(i, i)];
            for k in fi..i {
                d -= self.data[oi + k] * self.data[oi + k];
            }
            if !(d > 0.0 && d.is_finite()) {
                return Err(NotPositiveDefinite);
            }
            let sii = self.slot(i, i);
            self.data[sii] = d.sqrt();
        }
        Ok(())
    }

    /// Solve `A x = rhs` with the current factorization; `rhs` in original
    /// indexing is overwritten with the solution.
    pub fn solve(&self, rhs: &mut [f64]) {
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        // forward: L y = b
        for i in 0..self.n {
            let fi = self.first[i];
            let oi = self.offset[i] - fi;
            let mut s = y[i];
            for k in fi..i {
                s -= self.data[oi + k] * y[k];
            }
            y[i] = s / self.data[self.slot(i, i)];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            y[i] /= self.data[self.slot(i, i)];
            let fi = self.first[i];
            let oi = self.offset[i] - fi;
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.data[oi + k] * yi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            rhs[old] = y[new];
        }
    }

    #[cfg(test)]
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }
}

/// Reverse Cuthill-McKee ordering; each component starts from a
/// pseudo-peripheral vertex found by repeated BFS.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    let degree = |v: usize| adj[v].len();
    for seed in 0..n {
        if placed[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, seed);
        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !placed[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let (far, e) = bfs_farthest(adj, current);
        if e <= ecc {
            break;
        }
        ecc = e;
        current = far;
    }
    current
}

fn bfs_farthest(adj: &[Vec<usize>], start: usize) -> (usize, usize) {
    let mut depth = vec![usize::MAX; adj.len()];
    depth[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut best = (start, 0);
    while let Some(v) = queue.pop_front() {
        let d = depth[v];
        if d > best.1 || (d == best.1 && adj[v].len() < adj[best.0].len()) {
            best = (v, d);
        }
        for &w in &adj[v] {
            if depth[w] == usize::MAX {
                depth[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    best
}
