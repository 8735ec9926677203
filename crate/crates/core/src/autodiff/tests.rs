use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::error::Error;
use crate::rng::seeded;

type T = Tensor<f64>;

fn m(rows: &[Vec<f64>]) -> T {
    T::from_rows(rows).unwrap()
}

fn random(rows: usize, cols: usize, seed: u64) -> T {
    let mut rng = seeded(seed);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    T::matrix(rows, cols, data).unwrap()
}

/// Independent central-difference oracle: rebuilds the function from scratch
/// for every perturbation and reads only forward values.
fn fd_gradient(f: &dyn Fn(&mut Tape<f64>, Var) -> crate::Result<Var>, x: &T, eps: f64) -> Vec<f64> {
    let eval = |x: &T| {
        let mut t = Tape::new();
        let v = t.constant(x.clone());
        let out = f(&mut t, v).unwrap();
        t.value(out).item()
    };
    (0..x.len())
        .map(|j| {
            let mut up = x.clone();
            up.data_mut()[j] += eps;
            let mut down = x.clone();
            down.data_mut()[j] -= eps;
            (eval(&up) - eval(&down)) / (2.0 * eps)
        })
        .collect()
}

fn tape_gradient(f: &dyn Fn(&mut Tape<f64>, Var) -> crate::Result<Var>, x: &T) -> Vec<f64> {
    let mut t = Tape::new();
    let v = t.leaf(x.clone(), true);
    let out = f(&mut t, v).unwrap();
    t.backward(out).unwrap();
    t.grad(v).into_data()
}

#[test]
fn matmul_identity_and_dot() {
    let mut t = Tape::new();
    let i = t.constant(m(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
    let b = t.constant(m(&[vec![3.0], vec![4.0]]));
    let out = t.matmul(i, b).unwrap();
    assert_eq!(t.value(out).data(), &[3.0, 4.0]);

    let a = t.constant(m(&[vec![1.0, 2.0]]));
    let out = t.matmul(a, b).unwrap();
    assert_eq!(t.value(out).data(), &[11.0]);
    assert_eq!(t.value(out).shape(), &[1, 1]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut t = Tape::new();
    let a = t.constant(random(2, 3, 1));
    let b = t.constant(random(2, 3, 2));
    let err = t.matmul(a, b).unwrap_err();
    match &err {
        Error::Dimension { lhs, rhs, .. } => {
            assert_eq!(lhs, &vec![2, 3]);
            assert_eq!(rhs, &vec![2, 3]);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().contains("[2, 3]"));
}

#[test]
fn matmul_sum_gradient_matches_fd_and_row_sums() {
    let a = random(4, 3, 3);
    let b = random(3, 2, 4);
    let bb = b.clone();
    let f = move |t: &mut Tape<f64>, x: Var| {
        let bv = t.constant(bb.clone());
        let p = t.matmul(x, bv)?;
        t.sum(p)
    };
    let ad = tape_gradient(&f, &a);
    let fd = fd_gradient(&f, &a, 1e-5);
    for (i, (&g, &n)) in ad.iter().zip(&fd).enumerate() {
        let row_sum: f64 = b.row(i % 3).iter().sum();
        assert!((g - row_sum).abs() < 1e-12);
        assert!(relative_error(g, n) < 1e-8);
    }
}

#[test]
fn elementwise_values() {
    let mut t = Tape::new();
    let z = t.constant(T::scalar(0.0));
    let s = t.sigmoid(z).unwrap();
    assert_eq!(t.value(s).item(), 0.5);
    let one = t.constant(T::scalar(1.0));
    let l = t.log(one).unwrap();
    assert_eq!(t.value(l).item(), 0.0);
    // clamped log of non-positive input
    let neg = t.constant(T::scalar(-3.0));
    let l = t.log(neg).unwrap();
    assert_eq!(t.value(l).item(), (1e-12f64).ln());
}

#[test]
fn tanh_derivative_at_point_three() {
    let x = T::scalar(0.3);
    let f = |t: &mut Tape<f64>, v: Var| t.tanh(v);
    let ad = tape_gradient(&f, &x)[0];
    let fd = fd_gradient(&f, &x, 1e-5)[0];
    assert!((ad - (1.0 - 0.3f64.tanh().powi(2))).abs() < 1e-15);
    assert!((ad - fd).abs() < 1e-6);
}

#[test]
fn reductions() {
    let mut t = Tape::new();
    let x = t.leaf(T::vector(vec![1.0, 2.0, 3.0]), true);
    let s = t.sum(x).unwrap();
    assert_eq!(t.value(s).item(), 6.0);
    let y = t.constant(T::vector(vec![2.0, 4.0]));
    let mm = t.mean(y).unwrap();
    assert_eq!(t.value(mm).item(), 3.0);

    let mut t = Tape::new();
    let x = t.leaf(T::vector(vec![1.0, -2.0, 3.0, 0.5, 9.0]), true);
    let mm = t.mean(x).unwrap();
    t.backward(mm).unwrap();
    assert_eq!(t.grad(x).data(), &[0.2; 5]);

    let mut t = Tape::new();
    let x = t.leaf(m(&[vec![1.0, 2.0], vec![3.0, 5.0]]), true);
    let r = t.sum_rows(x).unwrap();
    assert_eq!(t.value(r).data(), &[3.0, 8.0]);
    let mr = t.mean_rows(x).unwrap();
    assert_eq!(t.value(mr).data(), &[1.5, 4.0]);
}

#[test]
fn backward_simple_examples() {
    let mut t = Tape::new();
    let x = t.leaf(T::vector(vec![0.1, 0.2, 0.3]), true);
    let s = t.sum(x).unwrap();
    t.backward(s).unwrap();
    assert_eq!(t.grad(x).data(), &[1.0, 1.0, 1.0]);
    assert_eq!(t.grad(s).data(), &[1.0]);

    let mut t = Tape::new();
    let x = t.leaf(T::vector(vec![2.0, 3.0]), true);
    let xx = t.mul(x, x).unwrap();
    let s = t.sum(xx).unwrap();
    t.backward(s).unwrap();
    assert_eq!(t.grad(x).data(), &[4.0, 6.0]);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut t = Tape::new();
    let x = t.leaf(T::vector(vec![1.0, 2.0]), true);
    let y = t.square(x).unwrap();
    assert!(matches!(t.backward(y), Err(Error::Contract(_))));
}

#[test]
fn unreachable_nodes_hold_zero_gradient() {
    let mut t = Tape::new();
    let x = t.leaf(T::vector(vec![1.0, 2.0]), true);
    let unused = t.leaf(T::vector(vec![5.0, 6.0, 7.0]), true);
    let s = t.sum(x).unwrap();
    t.backward(s).unwrap();
    assert_eq!(t.grad(unused).data(), &[0.0, 0.0, 0.0]);
}

#[test]
fn fan_out_accumulates_both_contributions() {
    // loss = sum(exp(x) + tanh(x)); x feeds two consumers
    let mut t = Tape::new();
    let x = t.leaf(T::vector(vec![0.4, -0.7]), true);
    let a = t.exp(x).unwrap();
    let b = t.tanh(x).unwrap();
    let c = t.add(a, b).unwrap();
    let s = t.sum(c).unwrap();
    t.backward(s).unwrap();
    let g = t.grad(x);
    for (j, &v) in [0.4f64, -0.7].iter().enumerate() {
        let expect = v.exp() + 1.0 - v.tanh().powi(2);
        assert!((g.data()[j] - expect).abs() < 1e-14);
    }
}

#[test]
fn repeated_backward_accumulates_and_is_deterministic() {
    let x = random(3, 4, 9);
    let w = random(4, 2, 10);
    let mut t = Tape::new();
    let xv = t.leaf(x, true);
    let wv = t.leaf(w, true);
    let p = t.matmul(xv, wv).unwrap();
    let s = t.sigmoid(p).unwrap();
    let l = t.mean(s).unwrap();
    t.backward(l).unwrap();
    let first = t.grad(wv);
    t.backward(l).unwrap();
    let doubled = t.grad(wv);
    for (a, b) in first.data().iter().zip(doubled.data()) {
        assert_eq!(2.0 * a, *b);
    }
    t.zero_grad();
    t.backward(l).unwrap();
    assert_eq!(t.grad(wv), first);
}

#[test]
fn nan_output_faults_with_op_name() {
    let mut t = Tape::new();
    let x = t.constant(T::scalar(1000.0));
    let e = t.exp(x).unwrap();
    let err = t.sub(e, e).unwrap_err();
    assert!(matches!(err, Error::NonFinite { op: "sub" }));
}

#[test]
fn elementwise_shape_mismatch_is_an_error() {
    let mut t = Tape::new();
    let a = t.constant(random(2, 2, 1));
    let b = t.constant(random(1, 2, 2));
    assert!(t.add(a, b).is_err());
    // bias row broadcast is the one allowed form
    let out = t.add_bias(a, b).unwrap();
    assert_eq!(t.value(out).shape(), &[2, 2]);
}

#[test]
fn grad_check_examples() {
    let x = random(3, 3, 5);
    let e = grad_check(|t, v| t.sum(v), &x, 1e-5).unwrap();
    assert!(e < 1e-10, "{e}");

    let e = grad_check(
        |t, v| {
            let s = t.square(v)?;
            t.sum(s)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(e < 1e-6, "{e}");

    // BCE of sigmoid(affine) on an 8x4 input
    let input = random(8, 4, 6);
    let w = random(4, 1, 7);
    let b = random(1, 1, 8);
    let labels = T::matrix(8, 1, (0..8).map(|i| (i % 2) as f64).collect()).unwrap();
    let e = grad_check_many(
        |t, v| {
            let y = t.constant(labels.clone());
            let h = t.matmul(v[0], v[1])?;
            let h = t.add_bias(h, v[2])?;
            let p = t.sigmoid(h)?;
            bce(t, p, y)
        },
        &[input, w, b],
        1e-5,
    )
    .unwrap();
    assert!(e < 1e-4, "{e}");
}

fn bce(t: &mut Tape<f64>, p: Var, y: Var) -> crate::Result<Var> {
    let lp = t.log(p)?;
    let a = t.mul(y, lp)?;
    let one_minus_p = t.rsub_scalar(1.0, p)?;
    let lq = t.log(one_minus_p)?;
    let one_minus_y = t.rsub_scalar(1.0, y)?;
    let b = t.mul(one_minus_y, lq)?;
    let s = t.add(a, b)?;
    let mean = t.mean(s)?;
    t.neg(mean)
}

#[test]
fn gather_concat_and_log_softmax_gradients() {
    let x = random(5, 3, 21);
    let f = |t: &mut Tape<f64>, v: Var| {
        let g = t.gather_rows(v, &[4, 0, 4, 2])?;
        let other = t.constant(random(4, 2, 22));
        let c = t.concat_cols(g, other)?;
        let ls = t.log_softmax(c)?;
        let w = t.constant(random(4, 5, 23));
        let p = t.mul(ls, w)?;
        t.sum(p)
    };
    let ad = tape_gradient(&f, &x);
    let fd = fd_gradient(&f, &x, 1e-5);
    for (a, n) in ad.iter().zip(&fd) {
        assert!(relative_error(*a, *n) < 1e-6, "{a} vs {n}");
    }
    // row 1 and 3 never gathered
    for j in 0..3 {
        assert_eq!(ad[3 + j], 0.0);
        assert_eq!(ad[9 + j], 0.0);
    }
}

#[test]
fn f32_tape_evaluates() {
    let mut t = Tape::<f32>::new();
    let a = t.leaf(Tensor::<f32>::from_rows(&[vec![1.0, 2.0]]).unwrap(), true);
    let b = t.constant(Tensor::<f32>::from_rows(&[vec![3.0], vec![4.0]]).unwrap());
    let p = t.matmul(a, b).unwrap();
    let s = t.sum(p).unwrap();
    t.backward(s).unwrap();
    assert_eq!(t.value(s).item(), 11.0f32);
    assert_eq!(t.grad(a).data(), &[3.0f32, 4.0]);
}

#[derive(Clone, Copy, Debug)]
enum Unary {
    Neg,
    Exp,
    Log,
    Tanh,
    Sigmoid,
    Relu,
    Leaky,
    Square,
    Scale,
    AddScalar,
    MeanRows,
    SumRows,
}

fn apply(t: &mut Tape<f64>, op: Unary, v: Var) -> crate::Result<Var> {
    match op {
        Unary::Neg => t.neg(v),
        Unary::Exp => t.exp(v),
        Unary::Log => {
            // keep the argument positive so the clamp never engages
            let sq = t.square(v)?;
            let shifted = t.add_scalar(sq, 0.5)?;
            t.log(shifted)
        }
        Unary::Tanh => t.tanh(v),
        Unary::Sigmoid => t.sigmoid(v),
        Unary::Relu => t.relu(v),
        Unary::Leaky => t.leaky_relu(v, 0.2),
        Unary::Square => t.square(v),
        Unary::Scale => t.scale(v, -1.7),
        Unary::AddScalar => t.add_scalar(v, 0.3),
        Unary::MeanRows => t.mean_rows(v),
        Unary::SumRows => t.sum_rows(v),
    }
}

fn unary_strategy() -> impl Strategy<Value = Unary> {
    prop_oneof![
        Just(Unary::Neg),
        Just(Unary::Exp),
        Just(Unary::Log),
        Just(Unary::Tanh),
        Just(Unary::Sigmoid),
        Just(Unary::Relu),
        Just(Unary::Leaky),
        Just(Unary::Square),
        Just(Unary::Scale),
        Just(Unary::AddScalar),
        Just(Unary::MeanRows),
        Just(Unary::SumRows),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn unary_ops_match_finite_differences(op in unary_strategy(), seed in 0u64..10_000) {
        let x = random(3, 4, seed);
        // avoid the relu kink
        prop_assume!(x.data().iter().all(|v| v.abs() > 1e-3));
        let w = random(3, 4, seed + 1);
        let f = move |t: &mut Tape<f64>, v: Var| {
            let y = apply(t, op, v)?;
            let y = if t.value(y).cols() == 1 {
                y
            } else {
                let wv = t.constant(w.clone());
                t.mul(y, wv)?
            };
            t.sum(y)
        };
        let ad = tape_gradient(&f, &x);
        let fd = fd_gradient(&f, &x, 1e-5);
        for (a, n) in ad.iter().zip(&fd) {
            prop_assert!(relative_error(*a, *n) < 1e-6, "{:?}: {} vs {}", op, a, n);
        }
    }

    #[test]
    fn binary_ops_match_finite_differences(kind in 0usize..4, seed in 0u64..10_000) {
        let a = random(3, 2, seed);
        let b = random(3, 2, seed + 7);
        let bias = random(1, 2, seed + 8);
        let e = grad_check_many(
            |t, v| {
                let y = match kind {
                    0 => t.add(v[0], v[1])?,
                    1 => t.sub(v[0], v[1])?,
                    2 => t.mul(v[0], v[1])?,
                    _ => t.add_bias(v[0], v[2])?,
                };
                let y = t.tanh(y)?;
                t.sum(y)
            },
            &[a, b, bias],
            1e-5,
        ).unwrap();
        prop_assert!(e < 1e-6, "kind {} err {}", kind, e);
    }
}
