//! Checks with exact or closed-form answers: embedding, mismatch, coloring,
//! gradients and bound monotonicity.

use std::time::{Duration, Instant};

use gnnlab::datagen::{barabasi_albert, erdos_renyi, rgg, ring, sbm2};
use gnnlab::graph::{FeatureMatrix, FilterCoefficients, OperatorKind, PropagationOperator, SparseGraph};
use gnnlab::model::{embed_polynomial_as_gcn, softmax, GcnParams, GnnParams, MlpParams, Model, MultiscaleParams};
use gnnlab::rng::rng_from;
use gnnlab::theory::{dependency_partition, entropy_bound, kappa_n, verify_mismatch};
use gnnlab::train::{loss_and_gradient, masked_mse, LossNorm, MaskVector};
use gnnlab::Result;
use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::Outcome;

fn unit_features<R: Rng>(n: usize, d: usize, rng: &mut R) -> FeatureMatrix {
    FeatureMatrix::new(Array2::from_shape_fn((n, d), |_| rng.random::<f64>())).expect("finite")
}

fn random_kind<R: Rng>(rng: &mut R) -> OperatorKind {
    OperatorKind::ALL[rng.random_range(0..OperatorKind::ALL.len())]
}

/// Random self-looped graph drawn from one of the generators.
fn random_graph<R: Rng>(family: usize, n: usize, rng: &mut R) -> Result<SparseGraph> {
    let seed = rng.random::<u64>();
    let deg = rng.random_range(1.0..6.0);
    let g = match family % 5 {
        0 => ring(n.max(3))?,
        1 => erdos_renyi(n, (deg / n as f64).min(1.0), seed)?,
        2 => barabasi_albert(n, rng.random_range(1..=3usize).min(n - 1), seed)?,
        3 => sbm2(n, (1.5 * deg / n as f64).min(1.0), 0.2 * deg / n as f64, seed)?,
        _ => rgg(n, (deg / (std::f64::consts::PI * n as f64)).sqrt(), seed)?,
    };
    Ok(g.with_self_loops())
}

/// Embedded polynomial filters reproduce direct propagation exactly.
pub fn embedding_containment() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let mut run = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let n = rng.random_range(2..=50);
            let d = rng.random_range(1..=4);
            let k = rng.random_range(1..=3);
            let depth = rng.random_range(3..=5);
            let beta = rng.random_range(0.05..=1.0);
            let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-beta..=beta)).collect();
            let coeffs = FilterCoefficients::new(theta, beta)?;
            let g = random_graph(1 + i % 2, n.max(3), &mut rng)?;
            let op = PropagationOperator::from_graph(&g, OperatorKind::ALL[i % 4])?;
            let x = unit_features(g.n(), d, &mut rng);
            let gcn = embed_polynomial_as_gcn(&coeffs, depth, d)?;
            let got = gcn.forward(&op, &x)?;
            let want = op.polynomial_propagate(&coeffs, &x)?;
            for (a, b) in got.as_array().iter().zip(want.as_array()) {
                let rel = if a == b {
                    0.0
                } else {
                    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
                };
                worst = worst.max(rel);
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => Outcome::new(w < 1e-12, format!("200 instances, max relative error {w:.2e}"), start)
            .within(Duration::from_secs(5)),
        Err(e) => Outcome::error(e, start),
    }
}

/// The mismatch inequality holds on perturbed operators.
pub fn mismatch_inequality() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2);
    let mut run = || -> Result<(usize, f64)> {
        let mut violations = 0;
        let mut max_ratio: f64 = 0.0;
        for i in 0..1000 {
            let n = rng.random_range(4..=40);
            let g = random_graph(i % 3, n, &mut rng)?;
            let s_op = PropagationOperator::from_graph(&g, random_kind(&mut rng))?;
            let tau = rng.random_range(0.0..=1.0);
            let perturbed: Vec<(usize, usize, f64)> = s_op
                .triplets()
                .into_iter()
                .map(|(r, c, v)| (r, c, v * (1.0 + tau * rng.random_range(-1.0..=1.0))))
                .collect();
            let t_op = PropagationOperator::from_triplets(g.n(), &perturbed)?;
            let k = rng.random_range(1..=4);
            let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let coeffs = FilterCoefficients::from_theta(theta)?;
            let x = unit_features(g.n(), rng.random_range(1..=3), &mut rng);
            let check = verify_mismatch(&t_op, &s_op, &coeffs, &x)?;
            if !check.holds {
                violations += 1;
            }
            if check.rhs > 0.0 {
                max_ratio = max_ratio.max(check.lhs / check.rhs);
            }
        }
        Ok((violations, max_ratio))
    };
    match run() {
        Ok((v, ratio)) => Outcome::new(
            v == 0,
            format!("1000 instances, {v} violations, max lhs/rhs {ratio:.3}"),
            start,
        )
        .within(Duration::from_secs(30)),
        Err(e) => Outcome::error(e, start),
    }
}

type Bits = Vec<u64>;

fn bits_with(n: usize, cols: impl Iterator<Item = usize>) -> Bits {
    let mut b = vec![0u64; n.div_ceil(64)];
    for c in cols {
        b[c / 64] |= 1 << (c % 64);
    }
    b
}

fn ones(b: &Bits) -> usize {
    b.iter().map(|w| w.count_ones() as usize).sum()
}

fn contains(b: &Bits, c: usize) -> bool {
    b[c / 64] >> (c % 64) & 1 == 1
}

/// Supports of `|op| + … + |op|^depth`, one bit set per row.
fn boolean_reach(op: &PropagationOperator, depth: usize) -> Vec<Bits> {
    let n = op.n();
    let step: Vec<Bits> = (0..n)
        .map(|i| {
            let (cols, vals) = op.row(i);
            bits_with(n, cols.iter().zip(vals).filter(|(_, v)| **v != 0.0).map(|(c, _)| *c))
        })
        .collect();
    let mut frontier = step.clone();
    let mut reach = step.clone();
    for _ in 1..depth {
        frontier = frontier
            .iter()
            .map(|f| {
                let mut next = vec![0u64; f.len()];
                for k in (0..n).filter(|&k| contains(f, k)) {
                    next.iter_mut().zip(&step[k]).for_each(|(a, b)| *a |= b);
                }
                next
            })
            .collect();
        for (r, f) in reach.iter_mut().zip(&frontier) {
            r.iter_mut().zip(f).for_each(|(a, b)| *a |= b);
        }
    }
    reach
}

/// Greedy coloring yields classes with pairwise disjoint receptive sets and
/// at most `m(m−1)+1` colors.
pub fn coloring_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(3);
    let mut run = || -> Result<(usize, usize)> {
        let mut bad = 0;
        let mut max_r = 0;
        for i in 0..100 {
            let n = rng.random_range(10..=200);
            let g = random_graph(1 + i % 4, n, &mut rng)?;
            let op = PropagationOperator::from_graph(&g, random_kind(&mut rng))?;
            let depth = rng.random_range(1..=3);
            let reach = boolean_reach(&op, depth);
            let row_max = reach.iter().map(ones).max().unwrap_or(0);
            let col_max = (0..n)
                .map(|c| reach.iter().filter(|r| contains(r, c)).count())
                .max()
                .unwrap_or(0);
            let m = row_max.max(col_max).max(1);
            let part = dependency_partition(&op, depth);
            let mut ok = part.m == m && part.colors.len() == n && part.colors.iter().all(|&c| c < part.r);
            ok &= part.r <= m * (m - 1) + 1;
            for class in part.classes() {
                for (a, &u) in class.iter().enumerate() {
                    for &v in &class[a + 1..] {
                        ok &= reach[u].iter().zip(&reach[v]).all(|(x, y)| x & y == 0);
                    }
                }
            }
            bad += usize::from(!ok);
            max_r = max_r.max(part.r);
        }
        Ok((bad, max_r))
    };
    match run() {
        Ok((bad, r)) => Outcome::new(bad == 0, format!("100 operators, {bad} invalid, max r = {r}"), start)
            .within(Duration::from_secs(60)),
        Err(e) => Outcome::error(e, start),
    }
}

/// Activation pattern of the readout on the observed rows: the sign of every
/// hidden pre-activation and whether the output is below, inside or above
/// the truncation band.
fn kink_pattern(model: &Model, op: &PropagationOperator, x: &FeatureMatrix, rows: &[usize]) -> Result<Vec<i8>> {
    let z: Array2<f64> = match model {
        Model::Gnn(p) => p.gcn.forward(op, x)?.into_array(),
        Model::Mlp(_) => x.as_array().clone(),
        Model::Multiscale(p) => {
            let mut power = x.as_array().clone();
            let mut mixed = Array2::zeros(power.raw_dim());
            for w in softmax(&p.alpha) {
                power = op.apply_view(power.view())?;
                mixed.scaled_add(w, &power);
            }
            mixed.dot(&p.weight)
        }
    };
    let head = model.readout();
    let mut pattern = Vec::new();
    for &i in rows {
        let mut act: Array1<f64> = z.row(i).to_owned();
        let last = head.weights.len() - 1;
        for (l, (w, b)) in head.weights.iter().zip(&head.biases).enumerate() {
            let pre = w.dot(&act) + b;
            if l < last {
                pattern.extend(pre.iter().map(|v| i8::from(*v > 0.0)));
                act = pre.mapv(|v| v.max(0.0));
            } else {
                let f = head.f_trunc;
                pattern.push(if pre[0] < -f {
                    -1
                } else if pre[0] > f {
                    1
                } else {
                    0
                });
            }
        }
    }
    Ok(pattern)
}

/// Indices of parameters held fixed during training; their analytic
/// gradient is zero by construction.
fn frozen_coordinates(model: &Model) -> Vec<usize> {
    match model {
        Model::Gnn(p) if !p.gcn.gamma_trainable => {
            let offset = p.gcn.weights.iter().map(|w| w.len()).sum::<usize>();
            (offset..offset + p.gcn.gamma.len()).collect()
        }
        _ => Vec::new(),
    }
}

fn random_model<R: Rng>(variant: usize, d: usize, rng: &mut R) -> Result<Model> {
    let hidden = rng.random_range(1..=2);
    let mut widths = vec![d];
    widths.extend((0..hidden).map(|_| rng.random_range(2..=5)));
    widths.push(1);
    let f = rng.random_range(1.0..3.0);
    let mut head = MlpParams::init(widths, f, rng)?;
    head.biases
        .iter_mut()
        .for_each(|b| b.mapv_inplace(|_| rng.random_range(-0.5..0.5)));
    let depth = rng.random_range(1..=3);
    Ok(match variant % 4 {
        0 => Model::Gnn(GnnParams::new(GcnParams::init_skip(d, depth, rng)?, head)?),
        1 => Model::Gnn(GnnParams::new(GcnParams::init_last_layer(d, depth, rng)?, head)?),
        2 => Model::Mlp(head),
        _ => {
            let mut p = MultiscaleParams::init(depth, d, head, rng)?;
            p.alpha.iter_mut().for_each(|a| *a = rng.random_range(-1.0..1.0));
            Model::Multiscale(p)
        }
    })
}

/// Analytic gradients agree with central differences away from kinks.
pub fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from(4);
    let h = 1e-5;
    let mut run = || -> Result<(usize, usize, f64)> {
        let (mut checked, mut skipped, mut worst) = (0usize, 0usize, 0.0f64);
        for draw in 0..100 {
            let n = rng.random_range(4..=12);
            let d = rng.random_range(1..=3);
            let g = random_graph(1, n, &mut rng)?;
            let op = PropagationOperator::from_graph(&g, random_kind(&mut rng))?;
            let x = FeatureMatrix::new(Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0)))?;
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut omega: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
            omega[0] = true;
            let mask = MaskVector::from_bools(omega, 0.7)?;
            let rows = mask.observed_indices();
            let model = random_model(draw, d, &mut rng)?;
            let objective = |m: &Model| -> Result<f64> {
                let pred = m.predict(&op, &x)?;
                masked_mse(pred.as_slice().expect("contiguous"), &y, &mask, LossNorm::OverN)
            };
            let (_, grad) = loss_and_gradient(&model, &op, &x, &y, &mask, LossNorm::OverN)?;
            let analytic = grad.to_flat();
            let base = model.to_flat();
            let base_pattern = kink_pattern(&model, &op, &x, &rows)?;
            let frozen = frozen_coordinates(&model);
            for k in 0..base.len() {
                if frozen.contains(&k) {
                    continue;
                }
                let shifted = |delta: f64| {
                    let mut v = base.clone();
                    v[k] += delta;
                    let mut m = model.clone();
                    m.set_flat(&v);
                    m
                };
                let (plus, minus) = (shifted(h), shifted(-h));
                if kink_pattern(&plus, &op, &x, &rows)? != base_pattern
                    || kink_pattern(&minus, &op, &x, &rows)? != base_pattern
                {
                    skipped += 1;
                    continue;
                }
                let fd = (objective(&plus)? - objective(&minus)?) / (2.0 * h);
                let a = analytic[k];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
            }
        }
        Ok((checked, skipped, worst))
    };
    match run() {
        Ok((checked, skipped, worst)) => Outcome::new(
            worst < 1e-4 && checked > 0,
            format!("100 draws, {checked} coordinates checked, {skipped} near kinks, max relative error {worst:.2e}"),
            start,
        )
        .within(Duration::from_secs(60)),
        Err(e) => Outcome::error(e, start),
    }
}

#[derive(Debug, Clone)]
struct BoundArgs {
    delta: f64,
    d: usize,
    l1: usize,
    widths: Vec<usize>,
    s: usize,
    t: f64,
    n: f64,
}

impl BoundArgs {
    fn random<R: Rng>(rng: &mut R) -> Self {
        let l2 = rng.random_range(1..=4);
        Self {
            delta: rng.random_range(0.01..=0.5),
            d: rng.random_range(1..=4),
            l1: rng.random_range(1..=4),
            widths: (0..l2 + 2).map(|_| rng.random_range(1..=20)).collect(),
            s: rng.random_range(2..=1000),
            t: rng.random_range(0.1..5.0),
            n: rng.random_range(10.0..1e5),
        }
    }

    fn l2(&self) -> usize {
        self.widths.len() - 2
    }

    fn entropy(&self) -> Result<f64> {
        entropy_bound(self.delta, self.d, self.l1, self.l2(), &self.widths, self.s, self.t)
    }

    fn kappa(&self) -> Result<f64> {
        kappa_n(self.n, self.d, self.l1, self.l2(), self.s, self.t)
    }
}

/// Both bounds grow with sparsity and depth; the entropy shrinks as the
/// covering scale grows.
pub fn monotone_bounds() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(8);
    let mut run = || -> Result<usize> {
        let mut violations = 0;
        for chain in 0..1000 {
            let mut args = BoundArgs::random(&mut rng);
            let (mut e_prev, mut k_prev) = (args.entropy()?, args.kappa()?);
            for _ in 0..6 {
                match chain % 4 {
                    0 => args.s += rng.random_range(1..=500),
                    1 => args.l1 += rng.random_range(1..=2),
                    2 => {
                        let at = args.widths.len() - 1;
                        args.widths.insert(at, rng.random_range(1..=20));
                    }
                    _ => args.delta = (args.delta + rng.random_range(0.0..0.2)).min(1.0),
                }
                let (e, k) = (args.entropy()?, args.kappa()?);
                let ok = if chain % 4 == 3 {
                    e <= e_prev && k == k_prev
                } else {
                    e >= e_prev && k >= k_prev
                };
                violations += usize::from(!ok);
                (e_prev, k_prev) = (e, k);
            }
        }
        Ok(violations)
    };
    match run() {
        Ok(v) => Outcome::new(v == 0, format!("1000 chains, {v} violations"), start).within(Duration::from_secs(5)),
        Err(e) => Outcome::error(e, start),
    }
}
