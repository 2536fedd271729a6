//! Metric implementations checked against independent oracles: direct
//! neighbor counting, direct KL summation, an LP transport solver, and
//! dense matrix arithmetic.

mod common;

use common::{dense_normalized_adjacency, dense_normalized_laplacian, random_graph, transport_lp};
use hgda::graph::{normalized_adjacency, normalized_laplacian, spmm, Graph};
use hgda::homophily::{
    heterophily_histogram, kl_histogram, node_homophily, wasserstein1_histogram,
    HomophilyHistogram, KL_EPSILON, NUM_BINS,
};
use hgda::mat::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct per-node counting over the adjacency, written independently of
/// the library's CSR walk.
fn counting_oracle(g: &Graph, v: usize) -> Option<f64> {
    let mut same = 0usize;
    let mut total = 0usize;
    for u in 0..g.num_nodes() {
        if u != v && g.neighbors(v).contains(&u) {
            total += 1;
            if g.label(u) == g.label(v) {
                same += 1;
            }
        }
    }
    if total == 0 {
        None
    } else {
        Some(same as f64 / total as f64)
    }
}

#[test]
fn node_homophily_matches_counting_on_all_small_graphs() {
    // Every size 1..=20 at several densities, every node checked.
    for n in 1..=20usize {
        for (di, density) in [0.0, 0.15, 0.4, 0.8, 1.0].iter().enumerate() {
            let g = random_graph(n, 3, *density, (n * 10 + di) as u64);
            for v in 0..n {
                let got = node_homophily(&g, v).unwrap();
                let want = counting_oracle(&g, v);
                match (got, want) {
                    (None, None) => {}
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-15, "n={n} v={v}"),
                    other => panic!("n={n} v={v}: {other:?}"),
                }
            }
        }
    }
}

fn random_histogram(rng: &mut ChaCha8Rng, sparse: bool) -> HomophilyHistogram {
    let mut mass = [0.0; NUM_BINS];
    for m in &mut mass {
        if !sparse || rng.random::<f64>() < 0.5 {
            *m = rng.random::<f64>();
        }
    }
    if mass.iter().all(|&m| m == 0.0) {
        mass[rng.random_range(0..NUM_BINS)] = 1.0;
    }
    HomophilyHistogram::from_mass(&mass)
}

/// Direct-summation KL oracle: replicate the documented ε-smoothing, then
/// the definition Σ p ln(p/q).
fn kl_oracle(p: &HomophilyHistogram, q: &HomophilyHistogram) -> f64 {
    let smooth = |m: &[f64]| -> Vec<f64> {
        let total: f64 = m.iter().map(|x| x + KL_EPSILON).sum();
        m.iter().map(|x| (x + KL_EPSILON) / total).collect()
    };
    let ps = smooth(&p.mass);
    let qs = smooth(&q.mass);
    let mut acc = 0.0;
    for (a, b) in ps.iter().zip(&qs) {
        acc += a * (a / b).ln();
    }
    acc
}

#[test]
fn kl_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..200 {
        let p = random_histogram(&mut rng, trial % 2 == 0);
        let q = random_histogram(&mut rng, trial % 3 == 0);
        let got = kl_histogram(&p, &q).unwrap();
        let want = kl_oracle(&p, &q);
        assert!((got - want).abs() < 1e-9, "trial {trial}: {got} vs {want}");
        assert!(got >= 0.0);
    }
}

#[test]
fn wasserstein_matches_transport_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for trial in 0..200 {
        let p = random_histogram(&mut rng, trial % 2 == 0);
        let q = random_histogram(&mut rng, trial % 3 == 0);
        let got = wasserstein1_histogram(&p, &q).unwrap();
        let want = transport_lp(&p.mass, &q.mass, 1.0 / NUM_BINS as f64);
        assert!(
            (got - want).abs() < 1e-9,
            "trial {trial}: cdf {got} vs lp {want}"
        );
    }
}

#[test]
fn wasserstein_extreme_bins_via_lp() {
    let mut p = [0.0; NUM_BINS];
    let mut q = [0.0; NUM_BINS];
    p[0] = 1.0;
    q[NUM_BINS - 1] = 1.0;
    let hp = HomophilyHistogram::from_mass(&p);
    let hq = HomophilyHistogram::from_mass(&q);
    let got = wasserstein1_histogram(&hp, &hq).unwrap();
    assert!((got - 0.9).abs() < 1e-12);
    assert!((transport_lp(&p, &q, 0.1) - 0.9).abs() < 1e-9);
}

#[test]
fn spmm_matches_dense_oracle_on_small_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for n in 1..=20usize {
        let g = random_graph(n, 2, 0.3, 7000 + n as u64);
        let a = normalized_adjacency(&g);
        let dense_a = dense_normalized_adjacency(&g);
        let w = rng.random_range(1..=6);
        let mut x = Mat::zeros(n, w);
        for v in x.as_mut_slice() {
            *v = rng.random_range(-3.0..3.0);
        }
        let got = spmm(&a, &x).unwrap();
        let want = dense_a.matmul(&x);
        assert!(got.max_abs_diff(&want) < 1e-10, "n={n}");

        let l = normalized_laplacian(&g);
        let got_l = spmm(&l, &x).unwrap();
        let want_l = dense_normalized_laplacian(&g).matmul(&x);
        assert!(got_l.max_abs_diff(&want_l) < 1e-10, "n={n}");
    }
}

#[test]
fn operators_match_dense_formula() {
    for seed in 0..20u64 {
        let n = 3 + (seed as usize * 7) % 15;
        let g = random_graph(n, 2, 0.35, seed);
        let a = normalized_adjacency(&g).to_dense();
        assert!(a.max_abs_diff(&dense_normalized_adjacency(&g)) < 1e-14);
        let l = normalized_laplacian(&g).to_dense();
        assert!(l.max_abs_diff(&dense_normalized_laplacian(&g)) < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Ã + L̃ = I and symmetry, on arbitrary graphs.
    #[test]
    fn adjacency_laplacian_identity(n in 1usize..30, density in 0.0f64..1.0, seed in 0u64..1000) {
        let g = random_graph(n, 2, density, seed);
        let a = normalized_adjacency(&g);
        let l = normalized_laplacian(&g);
        let sum = a.to_dense().add(&l.to_dense());
        prop_assert!(sum.max_abs_diff(&Mat::identity(n)) < 1e-12);
        prop_assert!(a.is_symmetric(1e-12));
        let ad = a.to_dense();
        for r in 0..n {
            for c in 0..n {
                let v = ad.get(r, c);
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    /// Histogram mass is a probability vector; homophily and heterophily
    /// histograms mirror each other.
    #[test]
    fn histogram_mass_sums_to_one(n in 2usize..40, density in 0.05f64..0.9, seed in 0u64..1000) {
        let g = random_graph(n, 2, density, seed);
        if let Ok(h) = heterophily_histogram(&g) {
            let total: f64 = h.mass.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(h.mass.iter().all(|&m| m >= 0.0));
            prop_assert_eq!(h.num_counted + h.num_excluded, n);
        }
    }

    /// KL is non-negative and zero exactly for identical smoothed masses.
    #[test]
    fn kl_nonnegative(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_histogram(&mut rng, false);
        let q = random_histogram(&mut rng, true);
        let v = kl_histogram(&p, &q).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert_eq!(kl_histogram(&p, &p).unwrap(), 0.0);
    }

    /// The save/load round trip reproduces the graph exactly.
    #[test]
    fn dataset_roundtrip(n in 1usize..25, density in 0.0f64..0.8, seed in 0u64..500) {
        let g = random_graph(n, 3, density, seed);
        let dir = tempfile::tempdir().unwrap();
        g.save(dir.path()).unwrap();
        let back = Graph::load(dir.path()).unwrap();
        prop_assert_eq!(back, g);
    }
}
