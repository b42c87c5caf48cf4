use lprom::nn::{
    backprop, evaluate_loss, train_block_incremental, train_offline, Architecture, InputNormalization, LpModel,
    Sample, TrainConfig, TrainingSet,
};

fn tiny_pair_model(seed: u64) -> LpModel {
    // (1,3,2) nets: coefficient net takes t only, basis net takes (x, t)
    let arch = Architecture {
        basis_hidden: vec![3],
        coeff_hidden: vec![3],
    };
    let m = LpModel::new(&arch, 2, InputNormalization::identity(0), seed).unwrap();
    // nonzero biases so every parameter has a generic gradient
    let mut k = 0.0;
    let mut blocks = m.blocks().to_vec();
    for b in &mut blocks {
        for net in [&mut b.coeff_net, &mut b.basis_net] {
            for l in 0..net.layer_dims().len() - 1 {
                for v in net.layer_mut(l).1.iter_mut() {
                    k += 0.07;
                    *v = 0.1 - k;
                }
            }
        }
    }
    LpModel::from_blocks(blocks, m.normalization().clone()).unwrap()
}

fn batch() -> Vec<Sample> {
    (0..6)
        .map(|i| {
            let s = i as f64 / 5.0;
            Sample {
                x: s,
                t: 0.3 * s + 0.1,
                mu: vec![],
                u: (3.0 * s).sin(),
            }
        })
        .collect()
}

fn with_param(model: &LpModel, which: usize, idx: usize, delta: f64) -> LpModel {
    let mut blocks = model.blocks().to_vec();
    let net = if which == 0 { &mut blocks[0].coeff_net } else { &mut blocks[0].basis_net };
    net.params_mut()[idx] += delta;
    LpModel::from_blocks(blocks, model.normalization().clone()).unwrap()
}

#[test]
fn backprop_matches_central_differences() {
    let model = tiny_pair_model(3);
    let b = batch();
    let g = backprop(&model, &b).unwrap();
    let h = 1e-6;
    let mut checked = 0;
    let mut bad = 0;
    for which in 0..2 {
        let n = if which == 0 {
            model.blocks()[0].coeff_net.num_params()
        } else {
            model.blocks()[0].basis_net.num_params()
        };
        for idx in 0..n {
            let lp = backprop(&with_param(&model, which, idx, h), &b).unwrap().loss;
            let lm = backprop(&with_param(&model, which, idx, -h), &b).unwrap().loss;
            let fd = (lp - lm) / (2.0 * h);
            let an = if which == 0 { g.blocks[0].coeff[idx] } else { g.blocks[0].basis[idx] };
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
            checked += 1;
            if rel > 1e-5 {
                bad += 1;
            }
        }
    }
    assert_eq!(bad, 0, "{bad} of {checked} parameters disagree with finite differences");
}

#[test]
fn gradient_vanishes_at_exact_fit() {
    let model = tiny_pair_model(5);
    let b: Vec<Sample> = batch()
        .into_iter()
        .map(|s| Sample {
            u: model.forward(s.x, s.t, &[]).unwrap(),
            ..s
        })
        .collect();
    let g = backprop(&model, &b).unwrap();
    assert!(g.norm() <= 1e-12, "{}", g.norm());
}

#[test]
fn doubling_residual_quadruples_loss() {
    let model = tiny_pair_model(8);
    let b = batch();
    let base = backprop(&model, &b).unwrap().loss;
    let shifted: Vec<Sample> = b
        .iter()
        .map(|s| {
            let pred = model.forward(s.x, s.t, &[]).unwrap();
            Sample {
                u: pred + 2.0 * (s.u - pred),
                ..s.clone()
            }
        })
        .collect();
    let doubled = backprop(&model, &shifted).unwrap().loss;
    assert!((doubled - 4.0 * base).abs() <= 1e-12 * doubled.max(1.0));
}

fn toy_set(norm: &InputNormalization) -> TrainingSet {
    let mut s = TrainingSet::new(0);
    for i in 0..10 {
        for j in 0..5 {
            let x = i as f64 / 9.0;
            let t = j as f64 / 4.0 * 0.5;
            s.push(norm, x, t, &[], (-(x - 0.3 - t).powi(2) * 8.0).exp());
        }
    }
    s
}

#[test]
fn training_is_deterministic_and_decreases_loss() {
    let norm = InputNormalization::from_ranges((0.0, 1.0), (0.0, 0.5), &[]);
    let data = toy_set(&norm);
    let cfg = TrainConfig {
        epochs: 40,
        lr: 1e-2,
        batch_size: 16,
        seed: 4,
        shuffle: true,
    };
    let mut a = LpModel::new(&Architecture::default(), 3, norm.clone(), 1).unwrap();
    let mut b = a.clone();
    let ra = train_offline(&mut a, &data, &cfg).unwrap();
    let rb = train_offline(&mut b, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(ra.epoch_losses.len(), 40);
    assert!(ra.final_loss < ra.initial_loss);
}

#[test]
fn interpolating_initialization_is_stationary() {
    let norm = InputNormalization::from_ranges((0.0, 1.0), (0.0, 0.5), &[]);
    let mut model = LpModel::new(&Architecture::default(), 2, norm.clone(), 6).unwrap();
    let mut data = TrainingSet::new(0);
    for i in 0..20 {
        let x = i as f64 / 19.0;
        data.push(&norm, x, 0.25, &[], model.forward(x, 0.25, &[]).unwrap());
    }
    let before = model.clone();
    let r = train_offline(&mut model, &data, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    assert!(r.final_loss <= 1e-28);
    for (p, q) in model.blocks()[0].basis_net.params().iter().zip(before.blocks()[0].basis_net.params()) {
        assert!((p - q).abs() <= 1e-12);
    }
}

#[test]
fn single_point_overfit() {
    let norm = InputNormalization::from_ranges((0.0, 1.0), (0.0, 1.0), &[]);
    let mut data = TrainingSet::new(0);
    data.push(&norm, 0.4, 0.6, &[], 0.8);
    let mut model = LpModel::new(&Architecture::default(), 2, norm, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 2000,
        lr: 1e-3,
        batch_size: 0,
        seed: 0,
        shuffle: false,
    };
    train_offline(&mut model, &data, &cfg).unwrap();
    assert!((model.forward(0.4, 0.6, &[]).unwrap() - 0.8).abs() <= 1e-4);
}

#[test]
fn toy_dataset_overfits() {
    let norm = InputNormalization::from_ranges((0.0, 1.0), (0.0, 0.5), &[]);
    let data = toy_set(&norm);
    let mut model = LpModel::new(&Architecture::default(), 5, norm, 12).unwrap();
    let cfg = TrainConfig {
        epochs: 5000,
        lr: 1e-3,
        batch_size: 0,
        seed: 1,
        shuffle: false,
    };
    let r = train_offline(&mut model, &data, &cfg).unwrap();
    assert!(r.final_loss <= 1e-6, "final loss {}", r.final_loss);
}

#[test]
fn block_increment_cannot_worsen_fit() {
    let norm = InputNormalization::from_ranges((0.0, 1.0), (0.0, 0.5), &[]);
    let data = toy_set(&norm);
    let arch = Architecture::default();
    let mut base = LpModel::new(&arch, 2, norm, 3).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        lr: 1e-2,
        batch_size: 10,
        seed: 2,
        shuffle: true,
    };
    train_offline(&mut base, &data, &cfg).unwrap();
    let base_loss = evaluate_loss(&base, &data).unwrap();

    let (same, _) = train_block_incremental(&base, 0, &arch, &data, &cfg).unwrap();
    assert_eq!(same, base);

    let (aug, _) = train_block_incremental(&base, 3, &arch, &data, &cfg).unwrap();
    assert_eq!(aug.reduced_order(), 5);
    assert_eq!(aug.blocks()[0], base.blocks()[0]);
    assert!(evaluate_loss(&aug, &data).unwrap() <= base_loss);
}

#[test]
fn empty_set_is_rejected() {
    let norm = InputNormalization::identity(0);
    let mut model = LpModel::new(&Architecture::default(), 2, norm, 0).unwrap();
    assert!(train_offline(&mut model, &TrainingSet::new(0), &TrainConfig::default()).is_err());
    assert!(backprop(&model, &[]).is_err());
}
