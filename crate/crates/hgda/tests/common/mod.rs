//! Shared test oracles, independent of the library's implementation paths:
//! dense-formula spectral operators, an LP-based optimal-transport solver,
//! a central-finite-difference gradient checker, and random graph builders.

#![allow(dead_code)]

pub mod gradsuites;

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hgda::graph::Graph;
use hgda::mat::Mat;
use hgda::nn::{leaf, Tape, Tensor};

/// Dense-formula oracle for the normalized adjacency:
/// `(D+I)^{-1/2} (A+I) (D+I)^{-1/2}` computed entrywise on dense matrices.
pub fn dense_normalized_adjacency(g: &Graph) -> Mat {
    let n = g.num_nodes();
    let mut a = Mat::zeros(n, n);
    for v in 0..n {
        a.set(v, v, 1.0);
        for &u in g.neighbors(v) {
            a.set(v, u, 1.0);
        }
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
        .collect();
    let mut out = Mat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out.set(r, c, inv_sqrt[r] * a.get(r, c) * inv_sqrt[c]);
        }
    }
    out
}

/// Dense-formula oracle for the normalized Laplacian `I − Ã`.
pub fn dense_normalized_laplacian(g: &Graph) -> Mat {
    let n = g.num_nodes();
    let a = dense_normalized_adjacency(g);
    let mut out = Mat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let i = if r == c { 1.0 } else { 0.0 };
            out.set(r, c, i - a.get(r, c));
        }
    }
    out
}

/// Random undirected labeled graph with Gaussian features.
pub fn random_graph(n: usize, num_classes: usize, edge_prob: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < edge_prob {
                edges.push((i, j));
            }
        }
    }
    let mut feats = Mat::zeros(n, 3);
    for v in feats.as_mut_slice() {
        *v = rng.random_range(-2.0..2.0);
    }
    let labels = (0..n)
        .map(|_| Some(rng.random_range(0..num_classes)))
        .collect();
    Graph::new("rand", n, num_classes, &edges, feats, Some(labels)).unwrap()
}

// ---------------------------------------------------------------------------
// Two-phase dense simplex for the transportation LP.
// ---------------------------------------------------------------------------

const LP_EPS: f64 = 1e-11;

/// Minimize `c·x` subject to `A x = b`, `x ≥ 0` (`b ≥ 0`), by two-phase
/// tableau simplex with Bland's rule. Returns the optimal objective.
pub fn simplex_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    assert!(a.iter().all(|row| row.len() == n));
    assert_eq!(b.len(), m);
    assert!(b.iter().all(|&v| v >= -LP_EPS));

    // Tableau columns: n structural + m artificial + rhs.
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        for j in 0..n {
            t[i][j] = a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i].max(0.0);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase 1: minimize the sum of artificials.
    let mut phase_cost = vec![0.0; width];
    for j in n..n + m {
        phase_cost[j] = 1.0;
    }
    run_simplex(&mut t, &mut basis, &phase_cost, n + m);
    let phase1 = objective(&t, &basis, &phase_cost);
    if phase1 > 1e-7 {
        return None; // infeasible
    }

    // Phase 2 over structural columns only.
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(c);
    // Pivot lingering artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, i, j);
                basis[i] = j;
            }
        }
    }
    run_simplex(&mut t, &mut basis, &cost, n);
    Some(objective(&t, &basis, &cost))
}

fn objective(t: &[Vec<f64>], basis: &[usize], cost: &[f64]) -> f64 {
    let width = t[0].len();
    basis
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[j] * t[i][width - 1])
        .sum()
}

fn run_simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], num_cols: usize) {
    let m = t.len();
    let width = t[0].len();
    loop {
        // Reduced costs: r_j = c_j − c_B · B⁻¹ A_j (columns already reduced).
        let mut entering = None;
        for j in 0..num_cols {
            if basis.contains(&j) {
                continue;
            }
            let mut r = cost[j];
            for i in 0..m {
                r -= cost[basis[i]] * t[i][j];
            }
            if r < -LP_EPS {
                entering = Some(j); // Bland: first improving column
                break;
            }
        }
        let Some(j) = entering else { return };
        // Ratio test, Bland tie-break on the leaving basis index.
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][j] > LP_EPS {
                let ratio = t[i][width - 1] / t[i][j];
                match leaving {
                    None => leaving = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - LP_EPS
                            || (ratio < lr + LP_EPS && basis[i] < basis[li])
                        {
                            leaving = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((i, _)) = leaving else { return }; // unbounded (not expected here)
        pivot(t, i, j);
        basis[i] = j;
    }
}

fn pivot(t: &mut [Vec<f64>], pr: usize, pc: usize) {
    let width = t[0].len();
    let p = t[pr][pc];
    for v in &mut t[pr] {
        *v /= p;
    }
    for i in 0..t.len() {
        if i != pr && t[i][pc].abs() > 0.0 {
            let f = t[i][pc];
            for j in 0..width {
                t[i][j] -= f * t[pr][j];
            }
        }
    }
}

/// Optimal-transport cost between two histograms whose bin masses sit at
/// the bin centers, solved as a transportation LP.
pub fn transport_lp(p: &[f64], q: &[f64], bin_width: f64) -> f64 {
    let k = p.len();
    assert_eq!(q.len(), k);
    let n = k * k;
    // Row sums = p, column sums = q.
    let mut a = vec![vec![0.0; n]; 2 * k];
    let mut b = vec![0.0; 2 * k];
    for i in 0..k {
        for j in 0..k {
            a[i][i * k + j] = 1.0;
            a[k + j][i * k + j] = 1.0;
        }
        b[i] = p[i];
        b[k + i] = q[i];
    }
    let mut c = vec![0.0; n];
    for i in 0..k {
        for j in 0..k {
            c[i * k + j] = (i as f64 - j as f64).abs() * bin_width;
        }
    }
    simplex_min(&a, &b, &c).expect("balanced transportation problem is feasible")
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.
// ---------------------------------------------------------------------------

pub const FD_H: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// Check analytic gradients of `f` (a scalar function of the inputs, built
/// fresh on every call) against central finite differences.
///
/// `f` receives requires-grad leaves on a fresh tape; it must be a
/// deterministic function of the input values.
pub fn check_gradients<F>(name: &str, inputs: &[Mat], f: F)
where
    F: Fn(&[Tensor], &Rc<Tape>) -> Tensor,
{
    let eval = |mats: &[Mat]| -> f64 {
        let tape = Tape::new();
        let leaves: Vec<Tensor> = mats.iter().map(|m| leaf(&tape, m.clone(), true)).collect();
        f(&leaves, &tape).scalar_value()
    };

    // Analytic pass.
    let tape = Tape::new();
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|m| leaf(&tape, m.clone(), true))
        .collect();
    let loss = f(&leaves, &tape);
    loss.backward().expect("scalar loss");
    let analytic: Vec<Mat> = leaves
        .iter()
        .map(|t| {
            let (r, c) = t.shape();
            t.grad().unwrap_or_else(|| Mat::zeros(r, c))
        })
        .collect();

    // Central differences per input entry.
    let mut work: Vec<Mat> = inputs.to_vec();
    for (which, input) in inputs.iter().enumerate() {
        let (rows, cols) = input.shape();
        for r in 0..rows {
            for c in 0..cols {
                let orig = input.get(r, c);
                work[which].set(r, c, orig + FD_H);
                let plus = eval(&work);
                work[which].set(r, c, orig - FD_H);
                let minus = eval(&work);
                work[which].set(r, c, orig);
                let fd = (plus - minus) / (2.0 * FD_H);
                let an = analytic[which].get(r, c);
                let denom = an.abs().max(fd.abs()).max(1e-3);
                let rel = (an - fd).abs() / denom;
                assert!(
                    rel < FD_TOL,
                    "{name}: input {which} entry ({r},{c}): analytic {an}, fd {fd}, rel {rel}"
                );
            }
        }
    }
}

/// Random matrix with entries in [lo, hi).
pub fn random_mat(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = rng.random_range(lo..hi);
    }
    m
}

/// Random matrix whose entries stay at least `margin` away from zero, for
/// kink-free checks through piecewise-linear ops.
pub fn random_mat_away_from_zero(
    rows: usize,
    cols: usize,
    margin: f64,
    rng: &mut ChaCha8Rng,
) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for v in m.as_mut_slice() {
        let mag = rng.random_range(margin..1.5);
        *v = if rng.random::<bool>() { mag } else { -mag };
    }
    m
}
