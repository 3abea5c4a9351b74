mod common;

use common::*;
use mvfusion::svm::*;
use mvfusion::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn blobs(per_class: usize, classes: usize, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let n = per_class * classes;
    let mut x = gaussian(2, n, &mut r) * 0.3;
    let labels: Vec<usize> = (0..n).map(|j| j % classes).collect();
    for (j, &l) in labels.iter().enumerate() {
        let a = l as f64 * std::f64::consts::TAU / classes as f64;
        x[(0, j)] += 2.0 * a.cos();
        x[(1, j)] += 2.0 * a.sin();
    }
    (x, labels)
}

fn cfg(loss: Loss) -> SvmConfig {
    SvmConfig {
        loss,
        c_penalty: 0.5,
        ..SvmConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn input_gradient_matches_finite_differences(d in 1usize..6, seed in 0u64..10_000, l2 in any::<bool>()) {
        let mut r = rng(seed);
        let w = DVector::from_column_slice(gaussian(d, 1, &mut r).as_slice());
        let m = DVector::from_column_slice(gaussian(d, 1, &mut r).as_slice());
        let t = if seed % 2 == 0 { 1.0 } else { -1.0 };
        let c = cfg(if l2 { Loss::HingeL2 } else { Loss::HingeL1 });
        let margin = w.dot(&m) * t;
        prop_assume!((1.0 - margin).abs() > 1e-3);
        let loss = |v: &DVector<f64>| {
            let s = (1.0 - w.dot(v) * t).max(0.0);
            c.c_penalty * if l2 { s * s } else { s }
        };
        let fd = central_diff(loss, &m, 1e-6);
        prop_assert!(rel_err(&grad_wrt_input(&w, &m, t, &c), &fd) < 1e-6);
    }

    #[test]
    fn argmax_ignores_positive_scaling(vals in proptest::collection::vec(-100.0..100.0f64, 1..12), s in 1e-3..1e3f64) {
        prop_assert_eq!(argmax_first(vals.iter().copied()), argmax_first(vals.iter().map(|v| v * s)));
    }
}

#[test]
fn gradient_sides_of_the_margin() {
    let w = DVector::from_vec(vec![1.0, 0.0]);
    let c = cfg(Loss::HingeL1);
    let inside = DVector::from_vec(vec![1.0 - 1e-9, 0.0]);
    let outside = DVector::from_vec(vec![1.0 + 1e-9, 0.0]);
    assert_eq!(grad_wrt_input(&w, &inside, 1.0, &c), &w * -0.5);
    assert_eq!(grad_wrt_input(&w, &outside, 1.0, &c), DVector::zeros(2));
    let c2 = cfg(Loss::HingeL2);
    let g = grad_wrt_input(&w, &DVector::from_vec(vec![0.5, 0.0]), 1.0, &c2);
    assert_eq!(g, &w * (-2.0 * 0.5 * 0.5));
    assert_eq!(grad_wrt_input(&w, &outside, 1.0, &c2), DVector::zeros(2));
}

#[test]
fn weight_gradient_matches_finite_differences() {
    let (x, labels) = blobs(10, 2, 1);
    let x = augment(&x);
    let t: Vec<f64> = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
    let c = SvmConfig {
        weight_decay: 0.0,
        ..cfg(Loss::HingeL2)
    };
    let w = DVector::from_vec(vec![0.3, -0.2, 0.1]);
    let fd = central_diff(|v| objective(v, &x, &t, &c).unwrap(), &w, 1e-6);
    assert!(rel_err(&grad_wrt_weights(&w, &x, &t, &c).unwrap(), &fd) < 1e-7);
}

#[test]
fn full_batch_descent_never_increases_the_objective() {
    let (x, labels) = blobs(20, 2, 2);
    let t: Vec<f64> = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
    let aug = augment(&x);
    let c = SvmConfig {
        batch_size: t.len(),
        momentum: 0.0,
        weight_decay: 0.0,
        max_epochs: 200,
        patience_epochs: 1000,
        ..cfg(Loss::HingeL2)
    };
    // step below 1/L for L = 1 + 2C‖X‖²
    let lipschitz = 1.0 + 2.0 * c.c_penalty * aug.norm_squared();
    let c = SvmConfig {
        lr_initial: 0.9 / lipschitz,
        ..c
    };
    let fit = train_binary(&x, &t, &c).unwrap();
    let objs: Vec<f64> = fit.history.iter().map(|h| h.objective).collect();
    assert!(objs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{objs:?}");
    assert!(objs.last().unwrap() < &(0.5 * objs[0]));
}

#[test]
fn training_is_deterministic_and_seed_sensitive() {
    let (x, labels) = blobs(30, 3, 3);
    let c = SvmConfig {
        batch_size: 8,
        seed: 5,
        ..cfg(Loss::HingeL1)
    };
    let a = train_multiclass(&x, &labels, 3, &c).unwrap();
    let b = train_multiclass(&x, &labels, 3, &c).unwrap();
    assert_eq!(a, b);
    let other = train_multiclass(&x, &labels, 3, &SvmConfig { seed: 6, ..c }).unwrap();
    assert_ne!(a.weights, other.weights);
    assert_eq!(SvmModel::from_bytes(&a.to_bytes()).unwrap().weights, a.weights);
}

#[test]
fn separable_blobs_are_learned() {
    let (x, labels) = blobs(40, 4, 4);
    let (test, test_labels) = blobs(40, 4, 44);
    let model = train_multiclass(&x, &labels, 4, &cfg(Loss::HingeL2)).unwrap();
    let pred = predict(&model, &test).unwrap();
    let correct = pred.labels.iter().zip(&test_labels).filter(|(a, b)| a == b).count();
    assert!(correct as f64 / test_labels.len() as f64 > 0.95);
}

#[test]
fn ties_go_to_the_smallest_class() {
    let model = SvmModel {
        weights: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.5, 0.0]),
        loss: Loss::HingeL2,
        history: Vec::new(),
    };
    let pred = model.predict(&DMatrix::from_row_slice(1, 2, &[1.0, -1.0])).unwrap();
    assert_eq!(pred.labels, vec![0, 2]);
    assert_eq!(argmax_first([2.0, 2.0, 1.0]), 0);
    assert_eq!(argmax_first([f64::NEG_INFINITY, 0.0]), 1);
}

#[test]
fn contract_errors() {
    let (x, labels) = blobs(5, 2, 5);
    assert!(matches!(train_multiclass(&x, &labels, 3, &cfg(Loss::HingeL2)), Err(Error::Degenerate(_))));
    assert!(matches!(train_multiclass(&x, &[0, 1], 2, &cfg(Loss::HingeL2)), Err(Error::Dimension(_))));
    let bad = SvmConfig {
        momentum: 1.0,
        ..SvmConfig::default()
    };
    let err = train_multiclass(&x, &labels, 2, &bad).unwrap_err();
    assert!(matches!(err.root(), Error::Config(_)));
    assert!(err.to_string().contains("class 0 vs rest"), "{err}");
    let model = train_multiclass(&x, &labels, 2, &cfg(Loss::HingeL2)).unwrap();
    assert!(matches!(model.predict(&DMatrix::zeros(3, 1)), Err(Error::Dimension(_))));
    assert!(matches!(train_binary(&x, &[0.5; 10], &cfg(Loss::HingeL1)), Err(Error::Label(_))));
    assert!(matches!(train_binary(&x, &[1.0; 10], &cfg(Loss::HingeL1)), Err(Error::Degenerate(_))));
    assert_eq!("l1".parse::<Loss>().unwrap(), Loss::HingeL1);
}
