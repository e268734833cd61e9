use std::path::PathBuf;

use gnnlab::datagen::{barabasi_albert, erdos_renyi, ring};
use gnnlab::exp::{fit_slope, ingest_california, spearman};
use gnnlab::graph::{FilterCoefficients, OperatorKind, PropagationOperator, SparseGraph};
use gnnlab::model::{label_propagation, tikhonov_fit};
use gnnlab::rng::rng_from;
use gnnlab::theory::{mismatch_bound, receptive_sets};
use gnnlab::train::MaskVector;
use ndarray::Array2;
use rand::Rng;

fn sample_csv() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/california_sample.csv")
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Array2<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .unwrap();
        for k in 0..n {
            a.swap([col, k], [piv, k]);
        }
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[[row, col]] / a[[col, col]];
            for k in col..n {
                a[[row, k]] -= f * a[[col, k]];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[[row, k]] * x[k]).sum();
        x[row] = (b[row] - s) / a[[row, row]];
    }
    x
}

fn dense_adjacency(g: &SparseGraph) -> Array2<f64> {
    let mut a = Array2::zeros((g.n(), g.n()));
    for i in 0..g.n() {
        for &j in g.neighbors(i) {
            a[[i, j]] = 1.0;
        }
    }
    a
}

#[test]
fn noisy_power_law_slope() {
    let mut rng = rng_from(11);
    let x = [100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0];
    let y: Vec<f64> = x
        .iter()
        .map(|v: &f64| 3.0 * v.powf(-0.95) * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
        .collect();
    let fit = fit_slope(&x, &y).unwrap();
    assert!((fit.slope + 0.95).abs() < 0.05, "slope {}", fit.slope);
    assert!(fit.r_squared > 0.99);
}

#[test]
fn spearman_matches_reference_values() {
    let x: Vec<f64> = (1..=10).map(f64::from).collect();
    let y = [2.0, 1.0, 4.0, 3.0, 7.0, 8.0, 6.0, 5.0, 10.0, 9.0];
    let s = spearman(&x, &y).unwrap();
    assert!((s.rho - 0.8545454545454544).abs() < 1e-12);
    assert!((s.p_value - 0.0016368033159867143).abs() < 1e-9);

    let x = [1.5, 2.5, 2.5, 4.0, 5.0, 6.0, 7.0, 8.0];
    let y = [3.0, 1.0, 2.0, 2.0, 5.0, 4.0, 8.0, 7.0];
    let s = spearman(&x, &y).unwrap();
    assert!((s.rho - 0.7891566265060239).abs() < 1e-12);
    assert!((s.p_value - 0.019883370319566898).abs() < 1e-9);
}

#[test]
fn california_one_nn_matches_brute_force() {
    let data = ingest_california(&sample_csv(), 1, OperatorKind::SymNorm).unwrap();
    let text = std::fs::read_to_string(sample_csv()).unwrap();
    let pts: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            (f[6], f[7])
        })
        .collect();
    let n = pts.len();
    let nearest: Vec<usize> = (0..n)
        .map(|i| {
            let d = |j: usize| (pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2);
            (0..n)
                .filter(|&j| j != i)
                .min_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)))
                .unwrap()
        })
        .collect();
    let g = data.graph.without_self_loops();
    for i in 0..n {
        let mut want: Vec<usize> = (0..n).filter(|&j| nearest[i] == j || nearest[j] == i).collect();
        want.dedup();
        assert_eq!(g.neighbors(i), &want[..], "node {i}");
    }
}

#[test]
fn tikhonov_matches_dense_solve() {
    let mut rng = rng_from(3);
    for trial in 0..5 {
        let g = erdos_renyi(40, 0.1, trial).unwrap();
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mask = MaskVector::sample(40, 0.5, trial + 100).unwrap();
        let lambda = 0.7;
        let got = tikhonov_fit(&g, &y, &mask, lambda).unwrap();
        let a = dense_adjacency(&g.without_self_loops());
        let mut m = Array2::zeros((40, 40));
        let mut b = vec![0.0; 40];
        for i in 0..40 {
            let deg: f64 = a.row(i).sum();
            for j in 0..40 {
                m[[i, j]] = -lambda * a[[i, j]];
            }
            m[[i, i]] += lambda * deg;
            if mask.is_observed(i) {
                m[[i, i]] += 1.0;
                b[i] = y[i];
            }
        }
        // isolated unobserved nodes have no constraint; pin them to zero
        for i in 0..40 {
            if m[[i, i]] == 0.0 {
                m[[i, i]] = 1.0;
            }
        }
        let want = solve_dense(m, b);
        for (u, v) in got.iter().zip(&want) {
            assert!((u - v).abs() < 1e-6, "{u} vs {v}");
        }
    }
}

#[test]
fn label_propagation_matches_fixed_point() {
    let g = barabasi_albert(30, 2, 5).unwrap();
    let mut rng = rng_from(8);
    let y: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mask = MaskVector::sample(30, 0.4, 9).unwrap();
    let alpha = 0.9;
    let got = label_propagation(&g, &y, &mask, alpha, 20_000).unwrap();
    // unobserved block: (I − α P_UU) f_U = α P_UO y_O
    let a = dense_adjacency(&g.with_self_loops());
    let p = &a / &a.sum_axis(ndarray::Axis(1)).insert_axis(ndarray::Axis(1));
    let unobs: Vec<usize> = (0..30).filter(|&i| !mask.is_observed(i)).collect();
    let k = unobs.len();
    let mut m = Array2::zeros((k, k));
    let mut b = vec![0.0; k];
    for (r, &i) in unobs.iter().enumerate() {
        for (c, &j) in unobs.iter().enumerate() {
            m[[r, c]] = if r == c { 1.0 } else { 0.0 } - alpha * p[[i, j]];
        }
        b[r] = (0..30)
            .filter(|&j| mask.is_observed(j))
            .map(|j| alpha * p[[i, j]] * y[j])
            .sum();
    }
    let want = solve_dense(m, b);
    for (r, &i) in unobs.iter().enumerate() {
        assert!((got[i] - want[r]).abs() < 1e-7, "node {i}");
    }
    for i in 0..30 {
        if mask.is_observed(i) {
            assert_eq!(got[i], y[i]);
        }
    }
}

#[test]
fn receptive_sets_match_boolean_powers() {
    for seed in 0..5 {
        let g = erdos_renyi(35, 0.08, seed).unwrap().with_self_loops();
        let op = PropagationOperator::from_graph(&g, OperatorKind::SymNorm).unwrap();
        let a = dense_adjacency(&g).mapv(|v| v > 0.0);
        for depth in 1..4 {
            let mut power = a.clone();
            let mut reach = a.clone();
            for _ in 1..depth {
                let mut next = Array2::from_elem((35, 35), false);
                for i in 0..35 {
                    for j in 0..35 {
                        next[[i, j]] = (0..35).any(|k| power[[i, k]] && a[[k, j]]);
                    }
                }
                reach.zip_mut_with(&next, |r, n| *r |= *n);
                power = next;
            }
            let sets = receptive_sets(&op, depth);
            for i in 0..35 {
                let want: Vec<usize> = (0..35).filter(|&j| reach[[i, j]]).collect();
                assert_eq!(sets[i], want);
            }
        }
    }
}

#[test]
fn mismatch_bound_matches_direct_formula() {
    let g = ring(8).unwrap().with_self_loops();
    let s = PropagationOperator::from_graph(&g, OperatorKind::SymNorm).unwrap();
    let mut rng = rng_from(21);
    let t_trip: Vec<(usize, usize, f64)> = s
        .triplets()
        .into_iter()
        .map(|(i, j, v)| (i, j, v * (1.0 + 0.3 * rng.random_range(-1.0..1.0))))
        .collect();
    let t = PropagationOperator::from_triplets(8, &t_trip).unwrap();
    let theta = vec![0.5, -0.25, 0.125];
    let c = FilterCoefficients::from_theta(theta.clone()).unwrap();
    let got = mismatch_bound(&t, &s, &c).unwrap();

    let (td, sd) = (t.to_dense(), s.to_dense());
    let tau = (&td - &sd).mapv(|v| v * v).sum().sqrt();
    let nnz = |m: &Array2<f64>| {
        m.rows()
            .into_iter()
            .map(|r| r.iter().filter(|v| **v != 0.0).count())
            .max()
            .unwrap()
    };
    let inf = |m: &Array2<f64>| {
        m.rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let a = inf(&td).max(inf(&sd));
    let series = 0.5 + 2.0 * 0.25 * a + 3.0 * 0.125 * a * a;
    let want = tau * ((nnz(&td) + nnz(&sd)) as f64).sqrt() * series;
    assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
}
