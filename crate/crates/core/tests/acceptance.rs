//! Acceptance criteria. Each test prints one `criterion N ... PASS|FAIL` line
//! and fails when its criterion is not met.
//!
//! Run with `cargo test -p fedtransfer-core --test acceptance -- --nocapture`
//! to see the lines.

use std::sync::OnceLock;
use std::time::Instant;

use fedtransfer::config::ExperimentConfig;
use fedtransfer::data::{partition_balanced, partition_unbalanced_paired, partition_unbalanced_random, Partition};
use fedtransfer::federation::{agg, agg_m2u, agg_u2m, run_experiment, train_seed, PreparedData, RegimeKind};
use fedtransfer::losses::{ntxent_loss, softmax_cross_entropy, ContrastiveBatch, OneHotBatch};
use fedtransfer::nn::{backward, forward, Activation};
use fedtransfer::report::ExperimentReport;
use fedtransfer::{ParameterMap, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

fn verdict(n: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {n} [{name}]: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} [{name}] failed: {detail}");
}

#[test]
fn criterion_1_gradient_oracle() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut nets = 0;
    for case in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let input = rng.random_range(1..=16);
        let out = rng.random_range(2..=16);
        let layers = random_net(&mut rng, input, out, Activation::Identity);
        let params = random_params(&layers, case, &mut rng);
        let batch = rng.random_range(2..=5);
        let x = random_tensor(&mut rng, batch, input);
        let (logits, tape) = forward(&layers, &params, &x).unwrap();

        let grads = if case % 2 == 0 {
            let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..out)).collect();
            let y = OneHotBatch::from_labels(&labels, out).unwrap();
            let (_, d) = softmax_cross_entropy(&logits, &y).unwrap();
            let analytic = backward(&layers, &params, &tape, &d).unwrap().params;
            let numeric = numeric_grads(&params, |p| {
                softmax_cross_entropy(&forward(&layers, p, &x).unwrap().0, &y).unwrap().0
            });
            (analytic, numeric)
        } else {
            // Contrastive: the network output is the image embedding of a
            // batch paired with fixed audio embeddings.
            let z_aud = random_tensor(&mut rng, batch, out);
            let loss = |z: &Tensor| {
                ntxent_loss(&ContrastiveBatch { z_img: z, z_aud: &z_aud, temperature: 0.5 }).unwrap()
            };
            let d = loss(&logits).grad_img;
            let analytic = backward(&layers, &params, &tape, &d).unwrap().params;
            let numeric = numeric_grads(&params, |p| loss(&forward(&layers, p, &x).unwrap().0).loss);
            (analytic, numeric)
        };
        for (key, a) in grads.0.iter() {
            worst = worst.max(rel_err(a.data(), grads.1.get(key).unwrap().data()));
        }
        nets += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        1,
        "gradient oracle",
        nets >= 20 && worst < 1e-4 && secs < 10.0,
        format!("{nets} nets, both losses, max relative error {worst:.2e} < 1e-4, {secs:.2}s < 10s"),
    );
}

fn random_family(rng: &mut ChaCha8Rng, count: usize) -> Vec<ParameterMap> {
    let keys = ["img.enc.0.weight", "img.proj.1.bias", "aud.enc.2.weight", "fus.out.0.weight"];
    let used = rng.random_range(1..=keys.len());
    let len = rng.random_range(1..=6);
    (0..count)
        .map(|_| {
            keys[..used]
                .iter()
                .map(|k| (k.to_string(), Tensor::vector((0..len).map(|_| rng.random_range(-1.0..1.0)).collect())))
                .collect()
        })
        .collect()
}

#[test]
fn criterion_2_aggregation_algebra() {
    let started = Instant::now();
    let cases = 1000;
    let mut failures = Vec::new();
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let n = rng.random_range(1..=6);
        let family = random_family(&mut rng, n);
        let mean = agg(&family).unwrap();

        if agg(&vec![family[0].clone(); n]).unwrap() != family[0] {
            failures.push(format!("case {case}: idempotence"));
        }
        let mut permuted = family.clone();
        for i in (1..permuted.len()).rev() {
            permuted.swap(i, rng.random_range(0..=i));
        }
        if agg(&permuted).unwrap().max_abs_diff(&mean) > 1e-15 {
            failures.push(format!("case {case}: permutation"));
        }
        for (key, t) in mean.iter() {
            for (j, v) in t.data().iter().enumerate() {
                let oracle = family.iter().map(|w| w.get(key).unwrap().data()[j]).sum::<f64>() / n as f64;
                if (v - oracle).abs() > 1e-15 {
                    failures.push(format!("case {case}: mean oracle {key}[{j}]"));
                }
            }
        }

        // Unimodal maps over a subset of the multimodal keys, plus one private key.
        let w_m = &family[0];
        let mut w_u = ParameterMap::new();
        for (k, t) in w_m.iter() {
            if rng.random_bool(0.5) {
                let values = (0..t.data().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                w_u.insert(k, Tensor::new(t.shape().to_vec(), values).unwrap());
            }
        }
        w_u.insert("img.out.0.weight", Tensor::vector(vec![rng.random_range(-1.0..1.0)]));
        let m2u = agg_m2u(&w_u, w_m).unwrap();
        let unshared_kept = w_u.iter().all(|(k, t)| w_m.get(k).is_some() || m2u.get(k) == Some(t));
        if !unshared_kept || m2u.keys().ne(w_u.keys()) {
            failures.push(format!("case {case}: agg_m2u unshared keys"));
        }
        if agg_m2u(&w_u, &w_u).unwrap() != w_u || agg_u2m(w_m, w_m, w_m).unwrap() != *w_m {
            failures.push(format!("case {case}: fixed point"));
        }
        let empty = ParameterMap::new();
        let u2m = agg_u2m(&w_u, &empty, w_m).unwrap();
        if u2m.keys().ne(w_m.keys()) || w_m.iter().any(|(k, t)| w_u.get(k).is_none() && u2m.get(k) != Some(t)) {
            failures.push(format!("case {case}: agg_u2m unshared keys"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        2,
        "aggregation algebra",
        failures.is_empty() && secs < 5.0,
        format!(
            "{cases} cases, {} violations{}, {secs:.2}s < 5s",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(" (first: {f})"))
        ),
    );
}

#[test]
fn criterion_3_contrastive_loss_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for b in 1..=4 {
        for _ in 0..10 {
            let d = rng.random_range(1..=8);
            let zi = random_tensor(&mut rng, b, d);
            let za = random_tensor(&mut rng, b, d);
            let got = ntxent_loss(&ContrastiveBatch { z_img: &zi, z_aud: &za, temperature: 0.5 }).unwrap().loss;
            worst = worst.max((got - ntxent_reference(&zi, &za, 0.5)).abs());
        }
    }
    let one = Tensor::from_rows(&[vec![0.3, -1.2, 2.0]]).unwrap();
    let single = ntxent_loss(&ContrastiveBatch { z_img: &one, z_aud: &random_tensor(&mut rng, 1, 3), temperature: 0.5 })
        .unwrap()
        .loss;
    let same = Tensor::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
    let pair = ntxent_loss(&ContrastiveBatch { z_img: &same, z_aud: &same, temperature: 0.5 }).unwrap().loss;
    let ln3_err = (pair - 3f64.ln()).abs();
    verdict(
        3,
        "contrastive loss oracle",
        worst < 1e-10 && single == 0.0 && ln3_err < 1e-12,
        format!("max |loss - brute force| {worst:.1e} < 1e-10, B=1 loss {single}, |B=2 - ln 3| {ln3_err:.1e} < 1e-12"),
    );
}

#[test]
fn criterion_4_fedavg_reduction() {
    let (local_epochs, rounds) = (5, 3);
    let mut fl = ExperimentConfig::new(RegimeKind::FlBaseline);
    fl.federation.participants = 1;
    fl.federation.local_epochs = local_epochs;
    fl.training.global_epochs = rounds;
    let mut central = ExperimentConfig::new(RegimeKind::CentralizedBaseline);
    central.training.global_epochs = local_epochs * rounds;
    let data = PreparedData::from_config(&fl).unwrap();
    let (a, _) = train_seed(&fl, &data, 1).unwrap();
    let (b, _) = train_seed(&central, &data, 1).unwrap();
    let worst = a.global.iter().map(|(g, p)| p.max_abs_diff(&b.global[g])).fold(0.0, f64::max);
    verdict(
        4,
        "FedAvg reduction",
        a.global == b.global,
        format!(
            "1 participant x {local_epochs} local epochs x {rounds} rounds vs {} centralized epochs, max |diff| {worst:e}",
            local_epochs * rounds
        ),
    );
}

fn desk_scale(regime: RegimeKind) -> ExperimentReport {
    let mut cfg = ExperimentConfig::new(regime);
    cfg.training.global_epochs = 30;
    cfg.seeds = vec![1, 2, 3];
    assert_eq!((cfg.model.scale, cfg.federation.participants), (0.25, 30));
    run_experiment(&cfg).unwrap()
}

fn baseline() -> &'static ExperimentReport {
    static BASELINE: OnceLock<ExperimentReport> = OnceLock::new();
    BASELINE.get_or_init(|| desk_scale(RegimeKind::FlBaseline))
}

fn points(report: &ExperimentReport, modality: &str) -> f64 {
    100.0 * report.mean_test_accuracy[modality]
}

#[test]
fn criterion_5_transfer_effect() {
    let started = Instant::now();
    let base = baseline();
    let framework = desk_scale(RegimeKind::FrameworkBalanced);
    let audio_gain = points(&framework, "audio") - points(base, "audio");
    let image_loss = points(base, "image") - points(&framework, "image");
    verdict(
        5,
        "transfer effect",
        audio_gain >= 2.0 && image_loss <= 1.0,
        format!(
            "audio {:.2}% vs baseline {:.2}% ({audio_gain:+.2} pts, need >= +2), image {:.2}% vs {:.2}% ({:+.2} pts, limit -1); {:.0}s",
            points(&framework, "audio"),
            points(base, "audio"),
            points(&framework, "image"),
            points(base, "image"),
            -image_loss,
            started.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_non_iid_robustness() {
    let base = baseline();
    let mut pass = true;
    let mut details = Vec::new();
    for regime in [RegimeKind::FrameworkUnbalancedPaired, RegimeKind::FrameworkUnbalancedRandom] {
        let r = desk_scale(regime);
        let audio = points(&r, "audio") - points(base, "audio");
        let image = points(&r, "image") - points(base, "image");
        pass &= audio >= 0.0 && image.abs() <= 1.0;
        details.push(format!("{}: audio {audio:+.2} pts (need >= 0), image {image:+.2} pts (limit +-1)", regime.name()));
    }
    verdict(6, "non-IID robustness", pass, details.join("; "));
}

fn assert_partition(p: &Partition, n: usize) -> bool {
    let mut seen = vec![false; n];
    for &i in p.participants.iter().flatten() {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    p.total() == n
}

#[test]
fn criterion_7_partition_contracts() {
    let (n, k, min_count) = (13800, 30, 50);
    let mut ok = true;
    for seed in 0..10 {
        for g in 0..3 {
            let p = partition_balanced(n, k, g, seed).unwrap();
            ok &= p.counts().iter().all(|&c| c == 460) && assert_partition(&p, n);
        }
        let paired = partition_unbalanced_paired([n; 3], k, min_count, seed).unwrap();
        for p in &paired {
            ok &= assert_partition(p, n) && p.counts() == paired[0].counts();
            ok &= p.counts().iter().all(|&c| c >= min_count);
        }
        for p in &partition_unbalanced_random(n, k, min_count, seed).unwrap() {
            ok &= assert_partition(p, n) && p.counts().iter().all(|&c| c >= min_count);
        }
    }
    verdict(
        7,
        "partition contracts",
        ok,
        "balanced 13800/30 = 460 each; unbalanced sums, min_count 50 and shared paired counts over 10 seeds".into(),
    );
}

fn report_json(cfg: &ExperimentConfig) -> String {
    let mut report = run_experiment(cfg).unwrap();
    report.wall_clock_seconds = 0.0;
    serde_json::to_string_pretty(&report).unwrap()
}

#[test]
fn criterion_8_determinism() {
    let mut cfg = ExperimentConfig::new(RegimeKind::FrameworkUnbalancedRandom);
    cfg.training.global_epochs = 2;
    cfg.seeds = vec![5];
    cfg.federation.parallel = true;
    let first = report_json(&cfg);
    let second = report_json(&cfg);
    cfg.federation.parallel = false;
    let serial = report_json(&cfg).replace("\"parallel\": false", "\"parallel\": true");
    verdict(
        8,
        "determinism",
        first == second && first == serial,
        format!("{} bytes; repeated parallel run identical: {}, serial run identical: {}", first.len(), first == second, first == serial),
    );
}
