use geodrop::ensemble::flatness_gap;
use geodrop::fim::{exact_fim, fim_norm, kfac_fim, kfac_fim_dropout, mc_fim, train_with_phi, NormKind, PhiRegularizer};
use geodrop::mixtures::WeightVector;
use geodrop::models::{sample_masks, synth_blobs, train_projection, Activation, Architecture, MaskScheme, MlpModel, TrainConfig};
use geodrop::numerics::{DenseMatrix, Rng};
use geodrop::DropoutMask;
use proptest::prelude::*;

fn random_model(arch: Architecture, rng: &mut Rng, scale: f64) -> MlpModel {
    let theta = (0..arch.param_count()).map(|_| scale * rng.normal()).collect();
    MlpModel::from_params(arch, theta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn every_estimate_is_psd(seed in any::<u64>(), width in 1usize..6, relu in any::<bool>()) {
        let mut rng = Rng::new(seed);
        let act = if relu { Activation::Relu } else { Activation::Sigmoid };
        let model = random_model(Architecture::new(vec![3, width, 4], act).unwrap(), &mut rng, 1.0);
        let x = DenseMatrix::from_fn(7, 3, |_, _| rng.normal());
        prop_assert!(exact_fim(&model, &x).unwrap().is_psd(1e-10).unwrap());
        prop_assert!(mc_fim(&model, &x, 3, &mut rng).unwrap().is_psd(1e-10).unwrap());
        prop_assert!(kfac_fim(&model, &x).unwrap().is_psd(1e-10).unwrap());
        prop_assert!(kfac_fim_dropout(&model, &x, 0.3, seed).unwrap().is_psd(1e-10).unwrap());
    }
}

#[test]
fn monte_carlo_converges_to_exact() {
    let mut rng = Rng::new(31);
    let model = random_model(Architecture::new(vec![2, 3, 3], Activation::Sigmoid).unwrap(), &mut rng, 1.0);
    let x = DenseMatrix::from_fn(5, 2, |_, _| rng.normal());
    let exact = exact_fim(&model, &x).unwrap().materialize().unwrap();
    let mc = mc_fim(&model, &x, 10_000, &mut rng).unwrap().materialize().unwrap();
    let rel = mc.sub(&exact).unwrap().frobenius_norm() / exact.frobenius_norm();
    assert!(rel <= 0.05, "relative Frobenius error {rel}");
}

#[test]
fn distill_penalty_is_twice_the_kl_for_small_steps() {
    let mut rng = Rng::new(5);
    let model = random_model(Architecture::new(vec![3, 4, 3], Activation::Sigmoid).unwrap(), &mut rng, 1.0);
    let x = DenseMatrix::from_fn(20, 3, |_, _| rng.normal());
    let est = exact_fim(&model, &x).unwrap();
    let dir: Vec<f64> = (0..model.param_count()).map(|_| rng.normal()).collect();
    for eps in [1e-2, 1e-3] {
        let delta: Vec<f64> = dir.iter().map(|v| eps * v).collect();
        let phi = geodrop::fim::phi_value(&PhiRegularizer::Distill { delta: delta.clone() }, &est, model.params()).unwrap();
        let moved: Vec<f64> = model.params().iter().zip(&delta).map(|(a, b)| a + b).collect();
        let other = MlpModel::from_params(model.arch().clone(), moved).unwrap();
        let mut kl = 0.0;
        for r in 0..x.rows() {
            let p = model.predict(x.row(r)).unwrap();
            let q = other.predict(x.row(r)).unwrap();
            kl += p.probs().iter().zip(q.probs()).map(|(a, b)| a * (a / b).ln()).sum::<f64>() / x.rows() as f64;
        }
        // KL(p_θ ‖ p_{θ+δ}) = ½ δᵀIδ + O(|δ|³).
        let ratio = phi / (2.0 * kl);
        assert!((ratio - 1.0).abs() < 30.0 * eps, "eps {eps}: ratio {ratio}");
    }
}

fn toy() -> (Architecture, geodrop::models::Dataset) {
    (Architecture::new(vec![2, 6, 2], Activation::Sigmoid).unwrap(), synth_blobs(2, 40, 2, 2.0, 17).unwrap())
}

#[test]
fn zero_mu_is_plain_training() {
    let (arch, data) = toy();
    let base = TrainConfig { epochs: 3, batch_size: 16, seed: 4, ..TrainConfig::default() };
    let plain = train_projection(&arch, &data, &DropoutMask::full(arch.param_count()), &base).unwrap();
    let cfg = TrainConfig { phi: Some(PhiRegularizer::FimNorm { mu: 0.0, norm: NormKind::Frobenius }), ..base };
    let reg = train_with_phi(&arch, &data, &cfg).unwrap();
    assert_eq!(plain.model.params(), reg.model.params());
    assert_eq!(plain.epoch_losses, reg.epoch_losses);
}

#[test]
fn larger_mu_gives_smaller_fisher_norm() {
    let (arch, data) = toy();
    let batch = data.head(64);
    let norms: Vec<f64> = [0.0, 0.1, 1.0]
        .iter()
        .map(|&mu| {
            let cfg = TrainConfig {
                epochs: 5,
                batch_size: 16,
                seed: 2,
                phi: Some(PhiRegularizer::FimNorm { mu, norm: NormKind::Frobenius }),
                ..TrainConfig::default()
            };
            let m = train_with_phi(&arch, &data, &cfg).unwrap().model;
            fim_norm(&kfac_fim(&m, batch.features()).unwrap(), NormKind::Frobenius).unwrap()
        })
        .collect();
    assert!(norms[1] <= norms[0] && norms[2] <= norms[1], "{norms:?}");
}

#[test]
fn phi_guard() {
    let arch = Architecture::new(vec![10, 20, 3], Activation::Relu).unwrap();
    let data = synth_blobs(3, 10, 10, 1.0, 0).unwrap();
    let cfg = TrainConfig { phi: Some(PhiRegularizer::FimNorm { mu: 0.1, norm: NormKind::Trace }), ..TrainConfig::default() };
    assert!(matches!(train_with_phi(&arch, &data, &cfg), Err(geodrop::Error::Capacity { .. })));
}

#[test]
fn hidden_layers_break_flatness() {
    let mut rng = Rng::new(12);
    let arch = Architecture::new(vec![3, 6, 3], Activation::Relu).unwrap();
    let data = synth_blobs(3, 30, 3, 2.0, 1).unwrap();
    let masks = sample_masks(&arch, 0.5, 3, &mut rng, MaskScheme::Unit).unwrap();
    let members: Vec<Vec<f64>> = masks
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let cfg = TrainConfig { seed: k as u64, epochs: 3, ..TrainConfig::default() };
            train_projection(&arch, &data, m, &cfg).unwrap().model.into_params()
        })
        .collect();
    let gap = flatness_gap(&arch, &members, &WeightVector::uniform(3), &data, 1.0).unwrap();
    assert!(gap > 1e-3, "gap {gap}");
}

#[test]
fn kfac_is_identical_across_thread_counts() {
    let mut rng = Rng::new(3);
    let model = random_model(Architecture::new(vec![5, 8, 4], Activation::Relu).unwrap(), &mut rng, 0.5);
    let x = DenseMatrix::from_fn(300, 5, |_, _| rng.normal());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let a = fim_norm(&kfac_fim(&model, &x).unwrap(), NormKind::Frobenius).unwrap();
            let b = fim_norm(&kfac_fim_dropout(&model, &x, 0.4, 9).unwrap(), NormKind::Trace).unwrap();
            let c = exact_fim(&model, &x).unwrap().materialize().unwrap();
            (a, b, c)
        })
    };
    let (a1, b1, c1) = run(1);
    let (a3, b3, c3) = run(3);
    assert_eq!(a1.to_bits(), a3.to_bits());
    assert_eq!(b1.to_bits(), b3.to_bits());
    assert_eq!(c1, c3);
}
