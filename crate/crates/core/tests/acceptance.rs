//! Acceptance criteria, one test each; every test prints a PASS/FAIL line.

mod common;

use std::fs;
use std::time::Instant;

use common::*;
use mvfusion::cca::{fit_cca, project, FuseMode};
use mvfusion::config::FusionMethod;
use mvfusion::mcca::{fit_mcca, plan_fusion, schedule_pairs};
use mvfusion::metrics::{ClassMetrics, OverallMetrics};
use mvfusion::netspec::{effective_receptive_field, params_ratio, stack_params, ConvStackSpec};
use mvfusion::noise::{gen_multiview, MultiViewSpec, Split};
use mvfusion::pipeline::{compare_arms, load_data, noise_sweep_on};
use mvfusion::seed::sub_seed;
use mvfusion::svm::{grad_wrt_input, grad_wrt_weights, objective, train_multiclass, Loss, SvmConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn criterion_01_whitened_solver_matches_inverse_product_eigenvalues() {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    let instances = 60;
    for _ in 0..instances {
        let p = r.random_range(1..=6);
        let q = r.random_range(1..=6);
        let n = r.random_range(p + q + 3..=60);
        // shared latent so the correlations are not all near zero
        let z = gaussian(2, n, &mut r);
        let x = gaussian(p, 2, &mut r) * &z + gaussian(p, n, &mut r);
        let y = gaussian(q, 2, &mut r) * &z + gaussian(q, n, &mut r);
        let t = fit_cca(&set("x", x.clone()), &set("y", y.clone()), 0.0).unwrap();
        let oracle = product_oracle_gammas(&x, &y);
        assert_eq!(t.r(), oracle.len(), "rank p={p} q={q} n={n}");
        for (g, o) in t.gamma.iter().zip(&oracle) {
            worst = worst.max((g - o).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst < 1e-7 && secs < 10.0;
    verdict(
        "C1 whitened CCA vs inverse-product eigen oracle",
        ok,
        format!("{instances} instances, max |dgamma| {worst:.2e} (tol 1e-7), {secs:.2}s (< 10s)"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_canonical_variates_are_white_with_diagonal_cross_covariance() {
    let mut r = rng(202);
    let n = 500;
    let z = gaussian(3, n, &mut r);
    let x = gaussian(5, 3, &mut r) * &z + gaussian(5, n, &mut r) * 0.7;
    let y = gaussian(4, 3, &mut r) * &z + gaussian(4, n, &mut r) * 0.7;
    let t = fit_cca(&set("x", x.clone()), &set("y", y.clone()), 0.0).unwrap();
    let v = project(&t, &x, &y).unwrap();
    let eye = DMatrix::<f64>::identity(t.r(), t.r());
    let dx = (loop_cov(&v.xstar, &v.xstar) - &eye).amax();
    let dy = (loop_cov(&v.ystar, &v.ystar) - &eye).amax();
    let dxy = (loop_cov(&v.xstar, &v.ystar) - DMatrix::from_diagonal(&t.gamma)).amax();
    let ok = dx < 1e-8 && dy < 1e-8 && dxy < 1e-8;
    verdict(
        "C2 cov(X*)=I, cov(Y*)=I, cov(X*,Y*)=diag(gamma)",
        ok,
        format!("max deviations {dx:.1e}, {dy:.1e}, {dxy:.1e} (tol 1e-8)"),
    );
    assert!(ok);
}

#[test]
fn criterion_03_recovers_population_correlation() {
    let spec = MultiViewSpec {
        latent_dim: 1,
        view_dims: vec![3, 4],
        noise_sigmas: vec![1.0, 1.0],
        latent_scales: vec![],
        loading_seed: 31,
        sample_seed: 32,
        n: 100_000,
    };
    let views = gen_multiview(&spec).unwrap();
    let population = spec.population_correlations(0, 1)[0];
    let t = fit_cca(&views[0], &views[1], 1e-8).unwrap();
    let got = t.gamma[0];
    let ok = (population - 0.5).abs() < 1e-15 && (got - population).abs() <= 0.02;
    verdict(
        "C3 CCA recovery on generated views",
        ok,
        format!("gamma1 {got:.5} vs population {population} (tol 0.02)"),
    );
    assert!(ok);
}

#[test]
fn criterion_04_gradients_match_central_differences() {
    let mut r = rng(404);
    let h = 1e-6;
    let mut worst = [0.0f64; 2];
    for (li, loss) in [Loss::HingeL1, Loss::HingeL2].into_iter().enumerate() {
        let mut done = 0;
        while done < 100 {
            let d = r.random_range(1..=8);
            let cfg = SvmConfig {
                loss,
                c_penalty: r.random_range(0.01..5.0),
                weight_decay: r.random_range(0.0..1e-2),
                ..SvmConfig::default()
            };
            let w = DVector::from_fn(d, |_, _| r.random_range(-1.5..1.5));
            let m = DVector::from_fn(d, |_, _| r.random_range(-1.5..1.5));
            let t: f64 = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            // stay clear of the hinge kink where the derivative does not exist
            if (1.0 - w.dot(&m) * t).abs() < 1e-3 {
                continue;
            }
            let sample_loss = |mm: &DVector<f64>| {
                let slack = (1.0 - w.dot(mm) * t).max(0.0);
                cfg.c_penalty
                    * match loss {
                        Loss::HingeL1 => slack,
                        Loss::HingeL2 => slack * slack,
                    }
            };
            let gi = grad_wrt_input(&w, &m, t, &cfg);
            worst[li] = worst[li].max(rel_err(&gi, &central_diff(sample_loss, &m, h)));

            let nb = r.random_range(1..=6);
            let batch = DMatrix::from_fn(d, nb, |_, _| r.random_range(-1.5..1.5));
            let tb: Vec<f64> = (0..nb).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let scores = batch.tr_mul(&w);
            if scores.iter().zip(&tb).any(|(s, tn)| (1.0 - s * tn).abs() < 1e-3) {
                continue;
            }
            let full = |ww: &DVector<f64>| {
                objective(ww, &batch, &tb, &cfg).unwrap() + 0.5 * cfg.weight_decay * ww.dot(ww)
            };
            let gw = grad_wrt_weights(&w, &batch, &tb, &cfg).unwrap();
            worst[li] = worst[li].max(rel_err(&gw, &central_diff(full, &w, h)));
            done += 1;
        }
    }
    let ok = worst.iter().all(|&e| e < 1e-5);
    verdict(
        "C4 input and weight gradients vs central differences",
        ok,
        format!(
            "100 configs per loss; max rel err hinge_l1 {:.1e}, hinge_l2 {:.1e} (tol 1e-5)",
            worst[0], worst[1]
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_svm_sanity() {
    let start = Instant::now();
    let cfg = SvmConfig {
        seed: 5,
        ..SvmConfig::default()
    };
    let pair = DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]);
    let model = train_multiclass(&pair, &[0, 1], 2, &cfg).unwrap();
    let pair_acc = (model.predict(&pair).unwrap().labels == [0, 1]) as u8 as f64;

    let mut r = rng(505);
    let blobs = |r: &mut rand_chacha::ChaCha8Rng, per: usize| {
        let mut data = gaussian(2, 2 * per, r);
        let mut labels = Vec::with_capacity(2 * per);
        for j in 0..2 * per {
            let c = j % 2;
            let shift = if c == 0 { 1.0 } else { -1.0 };
            data[(0, j)] += shift;
            data[(1, j)] += shift;
            labels.push(c);
        }
        (data, labels)
    };
    let (train, train_labels) = blobs(&mut r, 2000);
    let (test, test_labels) = blobs(&mut r, 2000);
    let model = train_multiclass(&train, &train_labels, 2, &cfg).unwrap();
    let pred = model.predict(&test).unwrap().labels;
    let acc = pred.iter().zip(&test_labels).filter(|(a, b)| a == b).count() as f64 / test_labels.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    let ok = pair_acc == 1.0 && acc >= 0.90 && secs < 30.0;
    verdict(
        "C5 separable pair and Gaussian blobs",
        ok,
        format!("pair training accuracy {pair_acc}, blobs held-out {acc:.4} (>= 0.90, Bayes 0.921), {secs:.2}s (< 30s)"),
    );
    assert!(ok);
}

/// Per-class columns of the published ten-class mixed-target table:
/// single accuracy, error single, total accuracy, error total, sensitivity,
/// specificity, precision, false positive rate.
const PUBLISHED_PER_CLASS: [[f64; 8]; 10] = [
    [0.99825, 0.0017452, 0.10223, 0.0, 0.99825, 1.0, 1.0, 0.0],
    [1.0, 0.0, 0.10223, 0.00017873, 1.0, 0.9998, 0.99825, 0.00019908],
    [0.98255, 0.017452, 0.10063, 0.00089366, 0.98255, 0.999, 0.9912, 0.00099562],
    [0.99778, 0.0022173, 0.080429, 0.0, 0.99778, 1.0, 1.0, 0.0],
    [1.0, 0.0, 0.10241, 0.0, 1.0, 1.0, 1.0, 0.0],
    [1.0, 0.0, 0.10223, 0.0, 1.0, 1.0, 1.0, 0.0],
    [1.0, 0.0, 0.10223, 0.0, 1.0, 1.0, 1.0, 0.0],
    [1.0, 0.0, 0.10241, 0.0, 1.0, 1.0, 1.0, 0.0],
    [0.99824, 0.0017575, 0.10152, 0.00017873, 0.99824, 0.9998, 0.99824, 0.00019897],
    [0.99295, 0.0070547, 0.10063, 0.0017873, 0.99295, 0.99801, 0.98255, 0.0019889],
];

#[test]
fn criterion_06_published_per_class_columns_reproduce_overall_row() {
    let rows: Vec<ClassMetrics> = PUBLISHED_PER_CLASS
        .iter()
        .map(|c| ClassMetrics {
            single_accuracy: c[0],
            error_single: c[1],
            total_accuracy: c[2],
            error_total: c[3],
            sensitivity: c[4],
            specificity: c[5],
            precision: c[6],
            fpr: c[7],
            degenerate: false,
        })
        .collect();
    let overall = OverallMetrics::from_class_metrics(&rows).unwrap();
    // Independent oracle: plain column means and sum.
    let col_mean = |k: usize| PUBLISHED_PER_CLASS.iter().map(|c| c[k]).sum::<f64>() / 10.0;
    let total_sum: f64 = PUBLISHED_PER_CLASS.iter().map(|c| c[2]).sum();
    assert!((overall.precision - col_mean(6)).abs() < 1e-15);
    assert!((overall.fpr - col_mean(7)).abs() < 1e-15);
    assert!((overall.accuracy - total_sum).abs() < 1e-15);

    let fpr_ok = (overall.fpr - 3.3825e-4).abs() <= 5e-7;
    let total_ok = (overall.accuracy - 0.9970).abs() <= 5e-4;
    // The published precision column averages to 0.997024, which is 2.4e-5
    // from the printed 0.9970; agreement is checked at the printed four
    // decimals (half-unit 5e-5), the tightest the published inputs allow.
    let precision_gap = (overall.precision - 0.9970).abs();
    let precision_ok = precision_gap <= 5e-5;
    let ok = fpr_ok && total_ok && precision_ok;
    verdict(
        "C6 macro averages of published per-class columns",
        ok,
        format!(
            "precision {:.6} (|d| {precision_gap:.1e}; 5e-7 unattainable from the published column, \
             matches at printed precision 5e-5), fpr {:.5e} (|d| {:.1e} <= 5e-7), total-accuracy sum {:.6} (<= 5e-4)",
            overall.precision,
            overall.fpr,
            (overall.fpr - 3.3825e-4).abs(),
            overall.accuracy
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_conv_stack_arithmetic_is_exact() {
    let three = ConvStackSpec::new(3, 3, 64).unwrap();
    let seven = ConvStackSpec::new(7, 1, 64).unwrap();
    let ok = three.symbolic() == "27K²"
        && seven.symbolic() == "49K²"
        && stack_params(&three) == 110_592
        && stack_params(&seven) == 200_704
        && params_ratio(&three, &seven) == 49.0 / 27.0
        && effective_receptive_field(&[(3, 1), (3, 1)]).unwrap() == 5
        && effective_receptive_field(&[(3, 1), (3, 1), (3, 1)]).unwrap() == 7;
    verdict(
        "C7 conv-stack parameters and receptive fields",
        ok,
        format!(
            "{} = {}, {} = {}, ratio {}, fields 5 and 7",
            three.symbolic(),
            stack_params(&three),
            seven.symbolic(),
            stack_params(&seven),
            params_ratio(&three, &seven)
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_accuracy_degrades_with_noise_level() {
    let start = Instant::now();
    let mut ok = true;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let cfg = config_for(fusion_task(sub_seed(seed, "synth")), FusionMethod::Mcca, seed);
        let data = load_data(&cfg).unwrap();
        let rows = noise_sweep_on(&cfg, &data).unwrap();
        let levels: Vec<f64> = rows.iter().map(|r| r.level).collect();
        assert_eq!(levels, vec![0.01, 0.05, 0.10, 0.15]);
        let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
        let seed_ok = acc.windows(2).all(|w| w[1] <= w[0] + 0.01);
        ok &= seed_ok;
        lines.push(format!(
            "seed {seed}: {}",
            acc.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" ")
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 120.0;
    verdict(
        "C8 accuracy non-increasing over 1/5/10/15% noise",
        ok,
        format!("{}; {secs:.1}s (< 120s)", lines.join("; ")),
    );
    assert!(ok);
}

#[test]
fn criterion_09_fusion_ordering_on_correlated_views() {
    let seeds = 10u64;
    // Tuning record: per-view nearest-template accuracy on the features,
    // i.e. what one view allows when the class means are known.
    let probe = fusion_task(sub_seed(0, "synth"));
    let probe_data = mvfusion::noise::gen_classification(&probe).unwrap();
    let view_oracle: Vec<f64> = (0..probe.views.len())
        .map(|v| {
            view_template_accuracy(
                &probe,
                v,
                probe_data.test.views[v].matrix.data(),
                &probe.labels(Split::Test),
            )
        })
        .collect();
    let patch_oracle = mvfusion::noise::nearest_template_accuracy(&probe, &probe_data.test_patches);
    // The construction is only informative when single views are far from
    // saturated while the underlying patches are separable.
    assert!(view_oracle.iter().all(|&a| (0.6..0.95).contains(&a)), "{view_oracle:?}");
    assert!(patch_oracle > 0.99);

    let mut sums = std::collections::BTreeMap::<String, f64>::new();
    let mut best_single_sum = 0.0;
    for seed in 0..seeds {
        let cfg = config_for(fusion_task(sub_seed(seed, "synth")), FusionMethod::Mcca, seed);
        let data = load_data(&cfg).unwrap();
        let arms = compare_arms(&cfg, &data).unwrap();
        let mut best_single: f64 = 0.0;
        for a in &arms {
            *sums.entry(a.arm.clone()).or_default() += a.accuracy;
            if a.arm.starts_with("single") {
                best_single = best_single.max(a.accuracy);
            }
        }
        best_single_sum += best_single;
    }
    let mean = |k: &str| sums[k] / seeds as f64;
    let (mcca, cca) = (mean("mcca"), mean("cca pair"));
    let best_view = sums
        .iter()
        .filter(|(k, _)| k.starts_with("single"))
        .map(|(_, v)| v / seeds as f64)
        .fold(0.0, f64::max);
    let per_seed_best = best_single_sum / seeds as f64;
    let tol = 0.005;
    let ok = mcca >= cca - tol && cca >= best_view - tol;
    verdict(
        "C9 MCCA >= CCA pair >= best single view",
        ok,
        format!(
            "mean over {seeds} seeds: mcca {mcca:.4}, cca pair {cca:.4}, best single view {best_view:.4} \
             (per-seed best {per_seed_best:.4}), without fusion {:.4}; view oracles {:?}, patch oracle {patch_oracle:.3}",
            mean("without fusion"),
            view_oracle.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>()
        ),
    );
    assert!(ok);
}

/// View with exactly `rank` independent directions among `p` features.
fn view_of_rank(p: usize, rank: usize, n: usize, r: &mut rand_chacha::ChaCha8Rng) -> DMatrix<f64> {
    gaussian(p, rank, r) * gaussian(rank, n, r)
}

/// Greedy max-rank schedule computed from scratch: sets are (ranks, smallest
/// input index, id); each stage takes the two largest by (rank desc, index asc).
fn greedy_oracle(ranks: &[usize], mode: FuseMode) -> Vec<(usize, usize)> {
    let lambda = ranks.len();
    let mut alive: Vec<(usize, usize, usize)> = ranks.iter().enumerate().map(|(i, &r)| (r, i, i)).collect();
    let mut out = Vec::new();
    for stage in 0..lambda - 1 {
        let pick = |alive: &mut Vec<(usize, usize, usize)>| {
            let mut best = 0;
            for k in 1..alive.len() {
                let (a, b) = (alive[k], alive[best]);
                if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
                    best = k;
                }
            }
            alive.remove(best)
        };
        let l = pick(&mut alive);
        let rr = pick(&mut alive);
        let rank = match mode {
            FuseMode::Sum => l.0.min(rr.0),
            FuseMode::Concat => l.0 + rr.0,
        };
        alive.push((rank, l.1.min(rr.1), lambda + stage));
        out.push((l.2, rr.2));
    }
    out
}

#[test]
fn criterion_10_five_view_schedule() {
    let mut r = rng(1010);
    let n = 60;
    let ranks = [6, 5, 4, 3, 3];
    let views: Vec<_> = ranks
        .iter()
        .enumerate()
        .map(|(i, &k)| set(&format!("F{}", i + 1), view_of_rank(7, k, n, &mut r)))
        .collect();
    let plan = plan_fusion(&views, FuseMode::Sum).unwrap();
    let pairs: Vec<(usize, usize)> = plan.stages.iter().map(|s| (s.left, s.right)).collect();
    // F1+F2 -> M1; M1+F3 -> M2; M2+F4 (tie with F5 broken by input order) -> M3; M3+F5 -> M4
    let by_hand = vec![(0, 1), (5, 2), (6, 3), (7, 4)];

    let mut operands: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    operands.sort_unstable();
    let consumed_once = operands == (0..8).collect::<Vec<_>>();
    let outputs_fresh = plan.stages.iter().enumerate().all(|(t, s)| s.output == 5 + t);
    let replay = schedule_pairs(&plan.input_ranks, &plan.stages.iter().map(|s| s.output_rank).collect::<Vec<_>>());

    let (fitted, _) = fit_mcca(&views, FuseMode::Sum, 1e-4).unwrap();
    let fitted_pairs: Vec<(usize, usize)> = fitted.stages.iter().map(|s| (s.left, s.right)).collect();

    let ok = plan.input_ranks == ranks
        && plan.stages.len() == 4
        && pairs == by_hand
        && pairs == greedy_oracle(&ranks, FuseMode::Sum)
        && replay == pairs
        && consumed_once
        && outputs_fresh
        && fitted_pairs == pairs;
    verdict(
        "C10 five-view greedy max-rank schedule",
        ok,
        format!("ranks {:?}, stages {pairs:?}, fitted {fitted_pairs:?}", plan.input_ranks),
    );
    assert!(ok);
}

#[test]
fn criterion_11_pipeline_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        "[run]\nseed = 11\n\n[dataset]\nclass_count = 4\nheight = 8\nwidth = 8\ntemplate_scale = 1.0\n\
         within_sigma = 0.5\nn_train = 30\nn_test = 30\nview.0 = block_means_2x2:1.0\n\
         view.1 = block_means_2x2:1.0\nview.2 = row_means:0.5\n\n[fusion]\nmethod = mcca\n",
    )
    .unwrap();
    let run = |out: &std::path::Path| {
        let args = ["mvfusion", "pipeline", "--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap()];
        let code = mvfusion::cli::main_with(args, &mut Vec::new(), &mut Vec::new());
        assert_eq!(code, 0);
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&a);
    let first: Vec<(String, Vec<u8>)> = ["report.csv", "report.txt", "plan.mcca", "model.svmm", "history.csv", "summary.json", "effective.conf"]
        .iter()
        .map(|f| (f.to_string(), fs::read(a.join(f)).unwrap()))
        .collect();
    run(&a);
    run(&b);
    let mut same_dir = true;
    for (name, bytes) in &first {
        same_dir &= &fs::read(a.join(name)).unwrap() == bytes;
    }
    let mut other_dir = true;
    for name in ["report.csv", "report.txt", "plan.mcca", "model.svmm", "history.csv"] {
        other_dir &= fs::read(a.join(name)).unwrap() == fs::read(b.join(name)).unwrap();
    }
    let ok = same_dir && other_dir;
    verdict(
        "C11 repeated pipeline runs are byte-identical",
        ok,
        format!("all artifacts identical on rerun: {same_dir}; report/plan/model identical across output dirs: {other_dir}"),
    );
    assert!(ok);
}
