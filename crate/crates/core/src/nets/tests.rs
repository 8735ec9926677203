use proptest::prelude::*;

use super::*;
use crate::autodiff::{grad_check_many, Tape, Tensor};
use crate::rng::seeded;

type T = Tensor<f64>;

#[test]
fn toy_shapes() {
    let mut rng = seeded(1);
    let d = Mlp::<f64>::new(
        &[2, 32, 1],
        &[Activation::LeakyRelu(0.2), Activation::Sigmoid],
        Init::XavierUniform,
        &mut rng,
    )
    .unwrap();
    assert_eq!(d.sizes(), vec![2, 32, 1]);
    assert_eq!(d.layers()[0].weight.value().shape(), &[2, 32]);
    assert_eq!(d.param_count(), 2 * 32 + 32 + 32 + 1);

    let g = Mlp::<f64>::new(
        &[2, 32, 2],
        &[Activation::Relu, Activation::None],
        Init::XavierUniform,
        &mut rng,
    )
    .unwrap();
    assert_eq!((g.input_dim(), g.output_dim()), (2, 2));
    assert!(g
        .layers()
        .iter()
        .all(|l| l.bias.value().data().iter().all(|&b| b == 0.0)));
}

#[test]
fn same_seed_gives_identical_parameters() {
    let make = || {
        Mlp::<f64>::new(
            &[3, 5, 2],
            &[Activation::Tanh, Activation::None],
            Init::Normal { std: 0.1 },
            &mut seeded(42),
        )
        .unwrap()
        .snapshot()
    };
    assert_eq!(make(), make());
}

#[test]
fn config_errors() {
    let mut rng = seeded(0);
    assert!(Mlp::<f64>::new(&[], &[], Init::XavierUniform, &mut rng).is_err());
    assert!(Mlp::<f64>::new(
        &[2, 3],
        &[Activation::Relu, Activation::Relu],
        Init::XavierUniform,
        &mut rng
    )
    .is_err());
}

#[test]
fn zero_network_with_sigmoid_head_outputs_half() {
    let mut rng = seeded(3);
    let mut m = Mlp::<f64>::new(
        &[2, 4, 1],
        &[Activation::Relu, Activation::Sigmoid],
        Init::XavierUniform,
        &mut rng,
    )
    .unwrap();
    for p in m.params_mut() {
        p.value_mut().data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let out = m
        .predict(&T::from_rows(&[vec![1.0, -2.0], vec![0.3, 0.7]]).unwrap())
        .unwrap();
    assert_eq!(out.data(), &[0.5, 0.5]);
}

#[test]
fn single_linear_layer() {
    let rec = MlpRecord {
        layers: vec![LayerRecord {
            inputs: 1,
            outputs: 1,
            activation: Activation::None,
            weight: vec![2.0],
            bias: vec![1.0],
        }],
    };
    let m: Mlp<f64> = rec.to_mlp("lin").unwrap();
    let out = m.predict(&T::from_rows(&[vec![3.0]]).unwrap()).unwrap();
    assert_eq!(out.data(), &[7.0]);
}

#[test]
fn forward_is_pure_and_checks_width() {
    let mut rng = seeded(5);
    let m = Mlp::<f64>::new(
        &[3, 8, 2],
        &[Activation::Tanh, Activation::None],
        Init::XavierUniform,
        &mut rng,
    )
    .unwrap();
    let x = T::from_rows(&[vec![0.1, 0.2, 0.3], vec![-1.0, 0.0, 2.0]]).unwrap();
    assert_eq!(m.predict(&x).unwrap(), m.predict(&x).unwrap());
    let bad = T::from_rows(&[vec![0.1, 0.2]]).unwrap();
    assert!(m.predict(&bad).is_err());
}

#[test]
fn untrainable_forward_leaves_no_parameter_gradient() {
    let mut rng = seeded(5);
    let mut m = Mlp::<f64>::new(
        &[2, 3, 1],
        &[Activation::Tanh, Activation::Sigmoid],
        Init::XavierUniform,
        &mut rng,
    )
    .unwrap();
    let mut tape = Tape::new();
    let x = tape.leaf(T::from_rows(&[vec![0.5, -0.5]]).unwrap(), true);
    let out = m.forward(&mut tape, x, false).unwrap();
    let s = tape.sum(out).unwrap();
    tape.backward(s).unwrap();
    m.collect_grads(&tape);
    assert!(m
        .params()
        .iter()
        .all(|p| p.grad().data().iter().all(|&g| g == 0.0)));
    assert!(tape.grad(x).data().iter().any(|&g| g != 0.0));
}

#[test]
fn two_layer_mlp_bce_gradient_matches_finite_differences() {
    // every weight and bias of a random 2-layer net, BCE on a random batch
    for seed in 0..5u64 {
        let mut rng = seeded(100 + seed);
        let m = Mlp::<f64>::new(
            &[4, 6, 1],
            &[Activation::Tanh, Activation::Sigmoid],
            Init::XavierUniform,
            &mut rng,
        )
        .unwrap();
        let x = T::matrix(
            8,
            4,
            (0..32)
                .map(|i| ((i * 7 + seed as usize) as f64 * 0.37).sin())
                .collect(),
        )
        .unwrap();
        let y = T::matrix(8, 1, (0..8).map(|i| (i % 2) as f64).collect()).unwrap();
        let params: Vec<T> = m.params().iter().map(|p| p.value().clone()).collect();
        let acts = m.activations();
        let err = grad_check_many(
            |t, v| {
                let xv = t.constant(x.clone());
                let yv = t.constant(y.clone());
                let mut h = xv;
                for (l, act) in acts.iter().enumerate() {
                    let z = t.matmul(h, v[2 * l])?;
                    let z = t.add_bias(z, v[2 * l + 1])?;
                    h = act.apply(t, z)?;
                }
                binary_cross_entropy(t, h, yv)
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

fn train_xor(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut m = Mlp::<f64>::new(
        &[2, 8, 1],
        &[Activation::Tanh, Activation::Sigmoid],
        Init::XavierUniform,
        &mut rng,
    )
    .unwrap();
    let x = T::from_rows(&[
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ])
    .unwrap();
    let y = T::matrix(4, 1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let mut adam = Adam::new(AdamConfig::with_lr(1e-2));
    for _ in 0..5000 {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let yv = tape.constant(y.clone());
        let p = m.forward(&mut tape, xv, true).unwrap();
        let loss = binary_cross_entropy(&mut tape, p, yv).unwrap();
        tape.backward(loss).unwrap();
        m.collect_grads(&tape);
        adam.step(&mut m.params_mut()).unwrap();
        m.zero_grad();
    }
    let p = m.predict(&x).unwrap();
    let correct = p
        .data()
        .iter()
        .zip(y.data())
        .filter(|(&p, &t)| (p > 0.5) == (t > 0.5))
        .count();
    correct as f64 / 4.0
}

#[test]
fn xor_reaches_full_accuracy_across_seeds() {
    for seed in [1, 2, 3] {
        assert_eq!(train_xor(seed), 1.0, "seed {seed}");
    }
}

#[test]
fn softmax_cross_entropy_gradient() {
    let logits = T::matrix(3, 4, (0..12).map(|i| (i as f64 * 0.9).cos()).collect()).unwrap();
    let targets = T::from_rows(&[
        vec![0.0, 1.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ])
    .unwrap();
    let err = grad_check_many(
        |t, v| {
            let y = t.constant(targets.clone());
            softmax_cross_entropy(t, v[0], y)
        },
        &[logits],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn record_round_trip_is_lossless(seed in any::<u64>(), hidden in 1usize..9) {
        let m = Mlp::<f64>::new(
            &[3, hidden, 2],
            &[Activation::LeakyRelu(0.1), Activation::Tanh],
            Init::Normal { std: 0.7 },
            &mut seeded(seed),
        ).unwrap();
        let json = serde_json::to_string(&MlpRecord::from_mlp(&m)).unwrap();
        let back: MlpRecord = serde_json::from_str(&json).unwrap();
        let m2: Mlp<f64> = back.to_mlp("mlp").unwrap();
        prop_assert_eq!(m.snapshot(), m2.snapshot());
        prop_assert_eq!(m.activations(), m2.activations());
    }
}
