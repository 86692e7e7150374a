//! Brute-force reference implementations used as test oracles.
//!
//! Nothing here shares code with `drawpass-core`. Each routine is the most
//! direct (and slowest) formulation of the quantity it checks: exhaustive
//! path enumeration for DTW, an O(n^2) threshold sweep for EER, per-point
//! linear search for interpolation and a loop-per-scalar LSTM.

/// Result of an exhaustive warping-path search.
#[derive(Debug, Clone, PartialEq)]
pub struct BrutePath {
    /// Zero-based `(n, m)` cells from `(0, 0)` to `(N-1, M-1)`.
    pub pairs: Vec<(usize, usize)>,
    pub accumulated: f64,
    pub weight_sum: f64,
}

impl BrutePath {
    pub fn normalized(&self) -> f64 {
        self.accumulated / self.weight_sum
    }
}

/// Enumerates every monotone, boundary-respecting warping path through the
/// cost matrix (steps (0,+1), (+1,+1), (+1,0)) and returns the one with the
/// smallest accumulated weighted cost.
///
/// `weights` is `[horizontal (0,+1), diagonal (+1,+1), vertical (+1,0)]`;
/// the first cell is weighted with the diagonal weight. Costs are summed
/// forwards from `(0, 0)`. Among paths with equal accumulated cost the
/// winner is the one whose step sequence, read from the end cell backwards,
/// is lexicographically smallest under the preference
/// diagonal < vertical < horizontal.
pub fn brute_force_dtw(cost: &[Vec<f64>], weights: [f64; 3]) -> BrutePath {
    let n = cost.len();
    assert!(n > 0);
    let m = cost[0].len();
    assert!(m > 0);
    let mut search = Search {
        cost,
        weights,
        path: vec![(0, 0)],
        best: None,
    };
    search.walk(cost[0][0] * weights[1], weights[1]);
    let (accumulated, weight_sum, pairs) = search.best.expect("at least one path exists");
    BrutePath {
        pairs,
        accumulated,
        weight_sum,
    }
}

struct Search<'a> {
    cost: &'a [Vec<f64>],
    weights: [f64; 3],
    path: Vec<(usize, usize)>,
    best: Option<(f64, f64, Vec<(usize, usize)>)>,
}

// Preference rank of the step into `path[k]`: diagonal 0, vertical 1,
// horizontal 2.
fn step_rank(path: &[(usize, usize)], k: usize) -> u8 {
    let (a, b) = (path[k - 1], path[k]);
    match (b.0 - a.0, b.1 - a.1) {
        (1, 1) => 0,
        (1, 0) => 1,
        _ => 2,
    }
}

// True when `p` beats `q` on the backward step sequence.
fn preferred(p: &[(usize, usize)], q: &[(usize, usize)]) -> bool {
    let (mut i, mut j) = (p.len() - 1, q.len() - 1);
    while i > 0 && j > 0 {
        let (a, b) = (step_rank(p, i), step_rank(q, j));
        if a != b {
            return a < b;
        }
        i -= 1;
        j -= 1;
    }
    false
}

impl Search<'_> {
    fn walk(&mut self, acc: f64, wsum: f64) {
        let (i, j) = *self.path.last().unwrap();
        let (n, m) = (self.cost.len(), self.cost[0].len());
        if let Some((b, _, _)) = &self.best {
            // Costs are nonnegative and forward partial sums only grow; a
            // partial sum equal to the best may still win the tie-break.
            if acc > *b {
                return;
            }
        }
        if i == n - 1 && j == m - 1 {
            let better = match &self.best {
                None => true,
                Some((b, _, bp)) => acc < *b || (acc == *b && preferred(&self.path, bp)),
            };
            if better {
                self.best = Some((acc, wsum, self.path.clone()));
            }
            return;
        }
        let moves = [
            (i + 1 < n && j + 1 < m, (i + 1, j + 1), self.weights[1]),
            (i + 1 < n, (i + 1, j), self.weights[2]),
            (j + 1 < m, (i, j + 1), self.weights[0]),
        ];
        for (ok, next, w) in moves {
            if ok {
                self.path.push(next);
                self.walk(acc + self.cost[next.0][next.1] * w, wsum + w);
                self.path.pop();
            }
        }
    }
}

/// Every warping path of an `n x m` grid, listed in tie-break preference
/// order (backwards from the end cell, diagonal before vertical before
/// horizontal). Each path is stored forwards as `(row, col, step)` with
/// step 0 = horizontal, 1 = diagonal (also the first cell), 2 = vertical.
///
/// Enumerating once per grid shape lets exhaustive checks over many cost
/// matrices of the same shape reuse the path list.
pub fn enumerate_paths(n: usize, m: usize) -> Vec<Vec<(usize, usize, u8)>> {
    fn rec(
        i: usize,
        j: usize,
        tail: &mut Vec<(usize, usize, u8)>,
        out: &mut Vec<Vec<(usize, usize, u8)>>,
    ) {
        if i == 0 && j == 0 {
            let mut p: Vec<(usize, usize, u8)> = vec![(0, 0, 1)];
            p.extend(tail.iter().rev());
            out.push(p);
            return;
        }
        if i > 0 && j > 0 {
            tail.push((i, j, 1));
            rec(i - 1, j - 1, tail, out);
            tail.pop();
        }
        if i > 0 {
            tail.push((i, j, 2));
            rec(i - 1, j, tail, out);
            tail.pop();
        }
        if j > 0 {
            tail.push((i, j, 0));
            rec(i, j - 1, tail, out);
            tail.pop();
        }
    }
    let mut out = Vec::new();
    rec(n - 1, m - 1, &mut Vec::new(), &mut out);
    out
}

/// Minimum over an explicit path list, summing each path forwards from
/// `(0, 0)`. The first path (in list order) with the smallest accumulated
/// cost wins. Returns `(accumulated, weight_sum)`.
pub fn min_over_paths(
    paths: &[Vec<(usize, usize, u8)>],
    cost: &[Vec<f64>],
    weights: [f64; 3],
) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for p in paths {
        let mut acc = 0.0;
        let mut w = 0.0;
        for &(i, j, s) in p {
            let sw = weights[s as usize];
            acc += cost[i][j] * sw;
            w += sw;
        }
        if acc < best.0 {
            best = (acc, w);
        }
    }
    best
}

/// Squared-difference cost matrix, optionally summed over several channels.
/// `a[c][n]` is channel `c` at sample `n`.
pub fn squared_cost(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a[0].len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for c in 0..a.len() {
                let d = a[c][i] - b[c][j];
                s += d * d;
            }
            *cell = s;
        }
    }
    out
}

/// Windowed cost `sum_j w_j * cost[n+j][m+j]` with indices clamped into range.
pub fn windowed_cost(cost: &[Vec<f64>], weights: &[f64]) -> Vec<Vec<f64>> {
    let n = cost.len() as i64;
    let m = cost[0].len() as i64;
    let half = (weights.len() as i64 - 1) / 2;
    let mut out = vec![vec![0.0; m as usize]; n as usize];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let off = k as i64 - half;
                let ii = (i + off).clamp(0, n - 1) as usize;
                let jj = (j + off).clamp(0, m - 1) as usize;
                s += w * cost[ii][jj];
            }
            out[i as usize][j as usize] = s;
        }
    }
    out
}

/// Exhaustive threshold sweep: every distinct score is tried as a threshold,
/// FAR = share of impostors >= t, FRR = share of genuine < t. Returns
/// `(eer, threshold)` at the threshold minimising |FAR - FRR|, preferring
/// the lowest such threshold.
pub fn brute_force_eer(genuine: &[f64], impostor: &[f64]) -> (f64, f64) {
    let mut candidates: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();
    let mut best: Option<(f64, f64, f64)> = None; // (gap, eer, t)
    for &t in &candidates {
        let (far, frr) = rates_at(genuine, impostor, t);
        let gap = (far - frr).abs();
        let replace = match best {
            None => true,
            Some((g, _, _)) => gap < g,
        };
        if replace {
            best = Some((gap, (far + frr) / 2.0, t));
        }
    }
    let (_, eer, t) = best.unwrap();
    (eer, t)
}

/// `(FAR, FRR)` at threshold `t`, by direct counting.
pub fn rates_at(genuine: &[f64], impostor: &[f64], t: f64) -> (f64, f64) {
    let mut accepted = 0usize;
    for &s in impostor {
        if s >= t {
            accepted += 1;
        }
    }
    let mut rejected = 0usize;
    for &s in genuine {
        if s < t {
            rejected += 1;
        }
    }
    (
        accepted as f64 / impostor.len() as f64,
        rejected as f64 / genuine.len() as f64,
    )
}

/// Linear interpolation of `(t, v)` knots at time `at`, found by scanning for
/// the bracketing segment.
pub fn interpolate(knots: &[(f64, f64)], at: f64) -> f64 {
    for w in knots.windows(2) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        if at >= t0 && at <= t1 {
            if at == t0 {
                return v0;
            }
            if at == t1 {
                return v1;
            }
            return v0 + (v1 - v0) * (at - t0) / (t1 - t0);
        }
    }
    panic!("time {at} outside knot range");
}

/// One LSTM direction written with explicit scalar loops.
/// Gate blocks are stacked as input, forget, candidate, output.
#[derive(Debug, Clone)]
pub struct RefLstm {
    /// `4H x I`
    pub wx: Vec<Vec<f64>>,
    /// `4H x H`
    pub wh: Vec<Vec<f64>>,
    /// `4H`
    pub b: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl RefLstm {
    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hs = self.hidden();
        let mut z = vec![0.0; 4 * hs];
        for r in 0..4 * hs {
            let mut s = self.b[r];
            for k in 0..x.len() {
                s += self.wx[r][k] * x[k];
            }
            for k in 0..hs {
                s += self.wh[r][k] * h[k];
            }
            z[r] = s;
        }
        let mut h_new = vec![0.0; hs];
        let mut c_new = vec![0.0; hs];
        for u in 0..hs {
            let i = sigmoid(z[u]);
            let f = sigmoid(z[hs + u]);
            let g = z[2 * hs + u].tanh();
            let o = sigmoid(z[3 * hs + u]);
            c_new[u] = f * c[u] + i * g;
            h_new[u] = o * c_new[u].tanh();
        }
        (h_new, c_new)
    }

    /// Hidden states for every step, starting from zero state.
    pub fn run(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hs = self.hidden();
        let mut h = vec![0.0; hs];
        let mut c = vec![0.0; hs];
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let (hn, cn) = self.step(x, &h, &c);
            h = hn;
            c = cn;
            out.push(h.clone());
        }
        out
    }
}

/// Bidirectional layer: output row `t` is `[forward_t, backward_t]`.
pub fn ref_blstm(fwd: &RefLstm, bwd: &RefLstm, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let f = fwd.run(xs);
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let mut b = bwd.run(&rev);
    b.reverse();
    f.into_iter()
        .zip(b)
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect()
}

/// Full Siamese forward pass: shared first layer on both inputs, per-step
/// concatenation, two further bidirectional layers, then a sigmoid head on
/// `[last forward state, first backward state]` of the top layer.
#[allow(clippy::too_many_arguments)]
pub fn ref_siamese(
    branch: (&RefLstm, &RefLstm),
    merge: (&RefLstm, &RefLstm),
    top: (&RefLstm, &RefLstm),
    head_w: &[f64],
    head_b: f64,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> f64 {
    let ha = ref_blstm(branch.0, branch.1, a);
    let hb = ref_blstm(branch.0, branch.1, b);
    let joined: Vec<Vec<f64>> = ha
        .into_iter()
        .zip(hb)
        .map(|(mut x, y)| {
            x.extend(y);
            x
        })
        .collect();
    let h2 = ref_blstm(merge.0, merge.1, &joined);
    let h3 = ref_blstm(top.0, top.1, &h2);
    let width = top.0.hidden();
    let last = &h3[h3.len() - 1];
    let first = &h3[0];
    let mut z = head_b;
    for u in 0..width {
        z += head_w[u] * last[u];
        z += head_w[width + u] * first[width + u];
    }
    sigmoid(z)
}
