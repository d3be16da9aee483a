mod support;

use gridwalk::nn::{load_model, loss_and_gradient, save_model, AutoencoderParams, Loss, MlpParams, OptimState, Sample};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{layers_of, oracle_forward};

fn net(seed: u64, dims: &[usize]) -> MlpParams {
    MlpParams::new(dims, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..8, 2..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_is_pure_and_matches_scalar_oracle(seed in any::<u64>(), dims in dims_strategy()) {
        let p = net(seed, &dims);
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let x: Vec<f32> = (0..dims[0]).map(|_| r.gen_range(-2.0f32..2.0)).collect();
        let a = p.forward(&x).unwrap();
        let b = p.clone().forward(&x).unwrap();
        prop_assert_eq!(&a, &b);
        let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        for (got, want) in a.iter().zip(oracle_forward(&layers_of(&p), &xs)) {
            prop_assert!((*got as f64 - want).abs() <= 1e-5 * want.abs().max(1.0));
        }
    }

    #[test]
    fn masked_outputs_do_not_reach_the_gradient(seed in any::<u64>(), dims in dims_strategy(), ce in any::<bool>()) {
        let loss = if ce { Loss::SoftmaxCrossEntropy } else { Loss::MaskedMse };
        let p: MlpParams<f64> = net(seed, &dims).cast();
        let out = *dims.last().unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let input: Vec<f64> = (0..dims[0]).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut mask: Vec<f64> = (0..out).map(|_| if r.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
        mask[0] = 1.0;
        let target: Vec<f64> = (0..out).map(|_| r.gen_range(0.0..1.0)).collect();
        let base = loss_and_gradient(&p, &[Sample::new(input.clone(), target.clone(), mask.clone())], loss).unwrap();
        // any change to a masked target leaves loss and gradient untouched
        let mut shifted = target.clone();
        for j in (0..out).filter(|&j| mask[j] == 0.0) {
            shifted[j] += 1e3;
        }
        let moved = loss_and_gradient(&p, &[Sample::new(input.clone(), shifted, mask.clone())], loss).unwrap();
        prop_assert_eq!(base.0, moved.0);
        prop_assert_eq!(&base.1, &moved.1);
        // finite differences through a masked output's own bias are zero
        let last = p.layers().len() - 1;
        for j in (0..out).filter(|&j| mask[j] == 0.0) {
            let eval = |d: f64| {
                let mut q = p.clone();
                q.layers_mut()[last].biases[j] += d;
                loss_and_gradient(&q, &[Sample::new(input.clone(), target.clone(), mask.clone())], loss).unwrap().0
            };
            prop_assert_eq!(eval(1e-3), eval(-1e-3));
            prop_assert_eq!(base.1.layers[last].biases[j], 0.0);
        }
    }

    #[test]
    fn serialization_preserves_forward_outputs(seed in any::<u64>(), dims in dims_strategy()) {
        let p = net(seed, &dims);
        let q = load_model(&save_model(&p)).unwrap();
        prop_assert_eq!(&q, &p);
        let x: Vec<f32> = (0..dims[0]).map(|i| i as f32 * 0.37 - 1.0).collect();
        let (a, b) = (p.forward(&x).unwrap(), q.forward(&x).unwrap());
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

const CHILD_ENV: &str = "GRIDWALK_NN_CHILD_MODEL";

fn probe_input() -> Vec<f32> {
    (0..12).map(|i| (i as f32 * 0.731).sin()).collect()
}

#[test]
fn model_file_loads_in_another_process() {
    if let Ok(path) = std::env::var(CHILD_ENV) {
        let p = load_model(&std::fs::read(path).unwrap()).unwrap();
        let bits: Vec<String> = p.forward(&probe_input()).unwrap().iter().map(|v| v.to_bits().to_string()).collect();
        println!("OUTPUT {}", bits.join(","));
        return;
    }
    let p = net(99, &[12, 24, 16, 5]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.gwnn");
    std::fs::write(&path, save_model(&p)).unwrap();
    let out = std::process::Command::new(std::env::current_exe().unwrap())
        .args(["--exact", "model_file_loads_in_another_process", "--nocapture", "--test-threads=1"])
        .env(CHILD_ENV, &path)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.split("OUTPUT ").nth(1).and_then(|s| s.lines().next()).expect("child printed outputs");
    let want: Vec<String> = p.forward(&probe_input()).unwrap().iter().map(|v| v.to_bits().to_string()).collect();
    assert_eq!(line, want.join(","));
}

/// Vectors near one of a few fixed unit directions.
fn clustered(r: &mut ChaCha8Rng, centres: &[Vec<f32>], count: usize) -> Vec<Vec<f32>> {
    (0..count)
        .map(|i| {
            let c = &centres[i % centres.len()];
            let v: Vec<f32> = c.iter().map(|&x| x + r.gen_range(-0.05f32..0.05)).collect();
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            v.iter().map(|x| x / n).collect()
        })
        .collect()
}

#[test]
fn autoencoder_reconstructs_trained_set_better_than_unseen() {
    let dim = 32;
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let centres: Vec<Vec<f32>> = (0..8).map(|_| (0..dim).map(|_| r.gen_range(-1.0f32..1.0)).collect()).collect();
    let (seen, unseen) = centres.split_at(4);
    let a = clustered(&mut r, seen, 40);
    let b = clustered(&mut r, unseen, 40);
    let mut ae = AutoencoderParams::new(dim, 8, &mut r).unwrap();
    let mut opt = OptimState::new(&ae.joined(), 1e-3);
    let trace = ae.fit(&mut opt, &a, 400).unwrap();
    assert!(trace.last().unwrap() < &trace[0]);
    let median = |set: &[Vec<f32>]| {
        let mut e: Vec<f64> = set.iter().map(|x| ae.error(x).unwrap()).collect();
        e.sort_by(f64::total_cmp);
        e[e.len() / 2]
    };
    assert!(median(&a) < median(&b), "seen {} vs unseen {}", median(&a), median(&b));
}
