use std::rc::Rc;

use rand::Rng as _;

use super::*;
use crate::rng::{seeded, Rng};

fn random(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Central finite differences of `f` at `inputs`, one input at a time.
fn numeric_grads(f: &dyn Fn(&[Matrix]) -> f64, inputs: &[Matrix], h: f64) -> Vec<Matrix> {
    inputs
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut g = Matrix::zeros(x.rows(), x.cols());
            for i in 0..x.len() {
                let mut plus = inputs.to_vec();
                plus[k].as_mut_slice()[i] += h;
                let mut minus = inputs.to_vec();
                minus[k].as_mut_slice()[i] -= h;
                g.as_mut_slice()[i] = (f(&plus) - f(&minus)) / (2.0 * h);
            }
            g
        })
        .collect()
}

fn rel_error(a: &[Matrix], b: &[Matrix]) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (x, y) in a.iter().zip(b) {
        diff += x.zip_map(y, |p, q| (p - q) * (p - q)).sum();
        norm += x.frobenius_sq() + y.frobenius_sq();
    }
    diff.sqrt() / norm.sqrt().max(1e-12)
}

/// Builds `sum(op(inputs) * probe)` on a fresh tape; returns value and grads.
fn check(
    inputs: Vec<Matrix>,
    build: impl Fn(&mut Tape, &[Var]) -> Var,
    seed: u64,
) -> f64 {
    let mut rng = seeded(seed);
    let probe_shape = {
        let mut t = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|m| t.param(m.clone())).collect();
        let out = build(&mut t, &vars);
        t.value(out).shape()
    };
    let probe = random(probe_shape.0, probe_shape.1, &mut rng);
    let eval = |xs: &[Matrix], grads: bool| -> (f64, Vec<Matrix>) {
        let mut t = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|m| t.param(m.clone())).collect();
        let out = build(&mut t, &vars);
        let c = t.constant(probe.clone());
        let prod = t.mul(out, c).unwrap();
        let loss = t.sum(prod);
        let value = t.value(loss).item();
        if !grads {
            return (value, Vec::new());
        }
        let mut g = t.backward(loss).unwrap();
        (value, vars.iter().zip(xs).map(|(&v, x)| g.take_or_zeros(v, x)).collect())
    };
    let (_, analytic) = eval(&inputs, true);
    let numeric = numeric_grads(&|xs| eval(xs, false).0, &inputs, 1e-4);
    rel_error(&analytic, &numeric)
}

const TOL: f64 = 1e-4;

#[test]
fn matmul_scalar_case() {
    let mut t = Tape::new();
    let a = t.param(Matrix::scalar(2.0));
    let b = t.param(Matrix::scalar(3.0));
    let c = t.matmul(a, b).unwrap();
    assert_eq!(t.value(c).item(), 6.0);
    let g = t.backward(c).unwrap();
    assert_eq!(g.get(a).unwrap().item(), 3.0);
    assert_eq!(g.get(b).unwrap().item(), 2.0);
}

#[test]
fn identity_matmul_passes_gradient_through() {
    let mut rng = seeded(1);
    let x = random(3, 2, &mut rng);
    let mut t = Tape::new();
    let i = t.constant(Matrix::identity(3));
    let xv = t.param(x.clone());
    let y = t.matmul(i, xv).unwrap();
    assert_eq!(t.value(y), &x);
    let s = t.sum(y);
    let g = t.backward(s).unwrap();
    assert_eq!(g.get(xv).unwrap(), &Matrix::filled(3, 2, 1.0));
    assert!(g.get(i).is_none());
}

#[test]
fn matmul_rejects_mismatched_shapes() {
    let mut t = Tape::new();
    let a = t.param(Matrix::zeros(2, 3));
    let b = t.param(Matrix::zeros(2, 3));
    assert!(t.matmul(a, b).is_err());
    assert!(t.add(a, b).is_ok());
    let c = t.param(Matrix::zeros(3, 2));
    assert!(t.add(a, c).is_err());
}

#[test]
fn matmul_variants_match_finite_differences() {
    for seed in 0..20 {
        let mut rng = seeded(seed);
        let a = random(4, 3, &mut rng);
        let b = random(3, 2, &mut rng);
        assert!(check(vec![a.clone(), b], |t, v| t.matmul(v[0], v[1]).unwrap(), seed) < TOL);
        let bt = random(5, 3, &mut rng);
        assert!(check(vec![a.clone(), bt], |t, v| t.matmul_nt(v[0], v[1]).unwrap(), seed) < TOL);
        assert!(check(vec![a], |t, v| t.gram(v[0]).unwrap(), seed) < TOL);
    }
}

#[test]
fn spmm_examples() {
    let id = Rc::new(CsrMatrix::identity(3));
    let x = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
    let mut t = Tape::new();
    let xv = t.param(x.clone());
    let y = t.spmm(&id, xv).unwrap();
    assert_eq!(t.value(y), &x);

    // A_hat of a single edge has every entry 0.5.
    let half = Rc::new(CsrMatrix::new(2, 2, vec![0, 2, 4], vec![0, 1, 0, 1], vec![0.5; 4]).unwrap());
    let mut t = Tape::new();
    let xv = t.param(Matrix::column(vec![1.0, 3.0]));
    let y = t.spmm(&half, xv).unwrap();
    assert_eq!(t.value(y), &Matrix::column(vec![2.0, 2.0]));
}

#[test]
fn spmm_gradient_equals_dense_matmul_gradient() {
    let mut rng = seeded(3);
    let adj = CsrMatrix::new(
        3,
        4,
        vec![0, 2, 3, 5],
        vec![0, 3, 1, 0, 2],
        vec![0.3, -1.2, 2.0, 0.7, 0.1],
    )
    .unwrap();
    let dense = adj.to_dense();
    let adj = Rc::new(adj);
    let x = random(4, 2, &mut rng);
    let grad_of = |sparse: bool| {
        let mut t = Tape::new();
        let xv = t.param(x.clone());
        let y = if sparse {
            t.spmm(&adj, xv).unwrap()
        } else {
            let a = t.constant(dense.clone());
            t.matmul(a, xv).unwrap()
        };
        let sq = t.mul(y, y).unwrap();
        let s = t.sum(sq);
        let mut g = t.backward(s).unwrap();
        (t.value(y).clone(), g.take_or_zeros(xv, &x))
    };
    assert_eq!(grad_of(true), grad_of(false));
}

#[test]
fn activation_values() {
    let mut t = Tape::new();
    let x = t.param(Matrix::from_vec(1, 2, vec![-1.0, 2.0]).unwrap());
    let y = t.relu(x);
    assert_eq!(t.value(y).as_slice(), &[0.0, 2.0]);
    let s = t.sum(y);
    let g = t.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap().as_slice(), &[0.0, 1.0]);

    let mut t = Tape::new();
    let x = t.param(Matrix::scalar(0.0));
    let y = t.sigmoid(x);
    assert_eq!(t.value(y).item(), 0.5);
    let g = t.backward(y).unwrap();
    assert_eq!(g.get(x).unwrap().item(), 0.25);
}

#[test]
fn elementwise_ops_match_finite_differences() {
    let kinds = [
        Activation::Relu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::LeakyRelu(0.2),
    ];
    for seed in 0..20 {
        let mut rng = seeded(100 + seed);
        let x = random(5, 4, &mut rng);
        for kind in kinds {
            let err = check(vec![x.clone()], |t, v| t.act(kind, v[0]), seed);
            assert!(err < TOL, "{kind:?} seed {seed}: {err}");
        }
    }
}

#[test]
fn structural_ops_match_finite_differences() {
    for seed in 0..20 {
        let mut rng = seeded(200 + seed);
        let a = random(4, 3, &mut rng);
        let b = random(4, 3, &mut rng);
        let bias = random(1, 3, &mut rng);
        assert!(check(vec![a.clone(), b.clone()], |t, v| t.add(v[0], v[1]).unwrap(), seed) < TOL);
        assert!(check(vec![a.clone(), b.clone()], |t, v| t.sub(v[0], v[1]).unwrap(), seed) < TOL);
        assert!(check(vec![a.clone(), b.clone()], |t, v| t.mul(v[0], v[1]).unwrap(), seed) < TOL);
        assert!(check(vec![a.clone(), bias], |t, v| t.add_row(v[0], v[1]).unwrap(), seed) < TOL);
        assert!(check(vec![a.clone()], |t, v| t.scale(v[0], -1.7), seed) < TOL);
        assert!(check(vec![a.clone()], |t, v| t.add_scalar(v[0], 0.3), seed) < TOL);
        assert!(check(vec![a.clone()], |t, v| t.transpose(v[0]), seed) < TOL);
        assert!(check(vec![a.clone()], |t, v| t.mean(v[0]), seed) < TOL);
        assert!(check(vec![a.clone(), b.clone()], |t, v| t.row_sq_dist(v[0], v[1]).unwrap(), seed) < TOL);
    }
}

fn ring_pattern(n: usize) -> Rc<CsrMatrix> {
    let mut offsets = vec![0];
    let mut cols = Vec::new();
    for i in 0..n {
        let mut row = vec![(i + n - 1) % n, i, (i + 1) % n];
        row.sort_unstable();
        row.dedup();
        cols.extend(row);
        offsets.push(cols.len());
    }
    let nnz = cols.len();
    Rc::new(CsrMatrix::new(n, n, offsets, cols, vec![1.0; nnz]).unwrap())
}

#[test]
fn graph_ops_match_finite_differences() {
    let adj = ring_pattern(5);
    let edges = Rc::new(vec![(0, 1), (1, 2), (3, 4), (0, 4), (2, 2)]);
    for seed in 0..20 {
        let mut rng = seeded(300 + seed);
        let h = random(5, 3, &mut rng);
        let w: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let s = random(5, 1, &mut rng);
        let d = random(5, 1, &mut rng);
        assert!(check(vec![h.clone()], |t, v| t.neighbor_diff(v[0], &adj, &w).unwrap(), seed) < TOL);
        assert!(check(vec![h.clone()], |t, v| t.edge_dot(v[0], &edges).unwrap(), seed) < TOL);
        let err = check(
            vec![h.clone(), s, d],
            |t, v| t.attention(v[0], v[1], v[2], &adj, 0.2).unwrap(),
            seed,
        );
        assert!(err < TOL, "attention seed {seed}: {err}");
    }
}

#[test]
fn attention_rows_are_convex_combinations() {
    let adj = ring_pattern(4);
    let mut t = Tape::new();
    let h = t.constant(Matrix::filled(4, 2, 3.0));
    let s = t.constant(Matrix::column(vec![0.1, -2.0, 0.5, 1.0]));
    let d = t.constant(Matrix::column(vec![1.0, 0.0, -1.0, 2.0]));
    let out = t.attention(h, s, d, &adj, 0.2).unwrap();
    for v in t.value(out).as_slice() {
        assert!((v - 3.0).abs() < 1e-12);
    }
}

#[test]
fn loss_examples() {
    let target = Rc::new(Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap());
    let mut t = Tape::new();
    let p = t.param(Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap());
    let l = t.sq_error(p, &target, None).unwrap();
    assert_eq!(t.value(l).item(), 1.0);

    let mut t = Tape::new();
    let p = t.param((*target).clone());
    let l = t.sq_error(p, &target, None).unwrap();
    assert_eq!(t.value(l).item(), 0.0);
    let g = t.backward(l).unwrap();
    assert_eq!(g.get(p).unwrap().max_abs(), 0.0);

    let mut t = Tape::new();
    let p = t.param(Matrix::zeros(2, 2));
    assert!(t.sq_error(p, &target, None).is_err());
}

#[test]
fn bce_clamps_probabilities() {
    let target = Rc::new(Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap());
    let mut t = Tape::new();
    let p = t.param(Matrix::from_vec(1, 2, vec![0.0, 1.0]).unwrap());
    let l = t.bce(p, &target, None).unwrap();
    let v = t.value(l).item();
    assert!(v.is_finite());
    assert!((v - 2.0 * -(PROB_CLAMP.ln())).abs() < 1e-6);
}

#[test]
fn losses_match_finite_differences() {
    for seed in 0..20 {
        let mut rng = seeded(400 + seed);
        let pred = random(3, 4, &mut rng);
        let target = Rc::new(random(3, 4, &mut rng));
        let weight = Rc::new(Matrix::from_fn(3, 4, |_, _| rng.random_range(0.5..3.0)));
        let probs = Matrix::from_fn(3, 4, |_, _| rng.random_range(0.05..0.95));
        let labels = Rc::new(Matrix::from_fn(3, 4, |_, _| f64::from(rng.random::<bool>())));
        assert!(check(vec![pred.clone()], |t, v| t.sq_error(v[0], &target, None).unwrap(), seed) < TOL);
        assert!(check(vec![pred], |t, v| t.sq_error(v[0], &target, Some(&weight)).unwrap(), seed) < TOL);
        assert!(check(vec![probs.clone()], |t, v| t.bce(v[0], &labels, None).unwrap(), seed) < TOL);
        assert!(check(vec![probs], |t, v| t.bce(v[0], &labels, Some(&weight)).unwrap(), seed) < TOL);
    }
}

#[test]
fn dropout_modes() {
    let mut rng = seeded(9);
    let x = random(4, 4, &mut rng);
    let mut t = Tape::new();
    let xv = t.param(x.clone());
    for training in [true, false] {
        let y = t.dropout(xv, 0.0, training, &mut rng).unwrap();
        assert_eq!(t.value(y), &x);
    }
    let y = t.dropout(xv, 0.3, false, &mut rng).unwrap();
    assert_eq!(t.value(y), &x);
    assert!(t.dropout(xv, 1.0, true, &mut rng).is_err());
}

#[test]
fn dropout_survivor_fraction_is_binomial() {
    let (n, p) = (200usize * 200, 0.3);
    let mut rng = seeded(10);
    let mut t = Tape::new();
    let x = t.param(Matrix::filled(200, 200, 1.0));
    let y = t.dropout(x, p, true, &mut rng).unwrap();
    let kept = t.value(y).as_slice().iter().filter(|&&v| v != 0.0).count() as f64;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((kept - n as f64 * (1.0 - p)).abs() < 3.0 * sigma);
    let survivors: Vec<f64> = t.value(y).as_slice().iter().copied().filter(|&v| v != 0.0).collect();
    assert!(survivors.iter().all(|&v| (v - 1.0 / (1.0 - p)).abs() < 1e-12));
}

#[test]
fn gradient_accumulates_over_repeated_use() {
    let mut t = Tape::new();
    let x = t.param(Matrix::scalar(3.0));
    let y = t.mul(x, x).unwrap();
    let z = t.add(y, x).unwrap();
    let g = t.backward(z).unwrap();
    assert_eq!(g.get(x).unwrap().item(), 7.0);
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let run = || {
        let mut rng = seeded(5);
        let mut params = nn::ParamSet::new();
        let lin = nn::Linear::new(&mut params, 3, 2, &mut rng);
        let x = random(6, 3, &mut rng);
        let target = Rc::new(random(6, 2, &mut rng));
        let mut opt = Adam::new(0.05, 0.01);
        for _ in 0..20 {
            let mut t = Tape::new();
            let b = params.bind(&mut t);
            let xv = t.constant(x.clone());
            let h = lin.forward(&mut t, &b, xv).unwrap();
            let h = t.dropout(h, 0.1, true, &mut rng).unwrap();
            let l = t.sq_error(h, &target, None).unwrap();
            params.step(&t, &b, l, &mut opt).unwrap();
        }
        params.values().to_vec()
    };
    assert_eq!(run(), run());
}
