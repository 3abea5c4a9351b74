mod common;

use mvfusion::cca::fit_cca;
use mvfusion::noise::*;
use mvfusion::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn changed(a: &ImagePatch, b: &ImagePatch) -> Vec<usize> {
    (0..a.pixels.len()).filter(|&i| a.pixels[i] != b.pixels[i]).collect()
}

fn ramp(h: usize, w: usize) -> ImagePatch {
    // distinct values so a replacement never coincides with the original
    ImagePatch::with_range(DMatrix::from_fn(h, w, |i, j| -1.0 - (i * w + j) as f64), -1e3, 1e3).unwrap()
}

proptest! {
    #[test]
    fn exactly_the_floored_count_changes(h in 1usize..12, w in 1usize..12, level in 0.0..=1.0f64, seed in any::<u64>()) {
        let img = ramp(h, w);
        let out = inject_noise(&img, level, seed).unwrap();
        let expect = ((level * (h * w) as f64) + 1e-9).floor() as usize;
        prop_assert_eq!(changed(&img, &out).len(), expect.min(h * w));
        prop_assert!(out.pixels.iter().all(|v| (-1e3..=1e3).contains(v)));
        prop_assert_eq!(out.value_range, img.value_range);
    }

    #[test]
    fn higher_levels_corrupt_a_superset(lo in 0.0..1.0f64, extra in 0.0..1.0f64, seed in any::<u64>()) {
        let hi = (lo + extra).min(1.0);
        let img = ramp(6, 7);
        let a = inject_noise(&img, lo, seed).unwrap();
        let b = inject_noise(&img, hi, seed).unwrap();
        for i in changed(&img, &a) {
            prop_assert_eq!(a.pixels[i], b.pixels[i]);
        }
    }

    #[test]
    fn same_seed_same_output(level in 0.0..=1.0f64, seed in any::<u64>()) {
        let img = ramp(5, 5);
        prop_assert_eq!(inject_noise(&img, level, seed).unwrap(), inject_noise(&img, level, seed).unwrap());
    }
}

#[test]
fn ten_by_ten_at_fifteen_percent() {
    let img = ramp(10, 10);
    for seed in 0..50 {
        assert_eq!(changed(&img, &inject_noise(&img, 0.15, seed).unwrap()).len(), 15);
    }
    assert_eq!(corrupted_count(0.29, 100), 29);
    assert_eq!(inject_noise(&img, 0.0, 9).unwrap(), img);
    assert!(matches!(inject_noise(&img, 1.5, 0), Err(Error::Range(_))));
    assert!(matches!(inject_noise(&img, f64::NAN, 0), Err(Error::Range(_))));
}

#[test]
fn positions_are_uniform() {
    let img = ramp(5, 5);
    let trials = 10_000;
    let mut hits = [0u64; 25];
    for seed in 0..trials {
        for i in changed(&img, &inject_noise(&img, 0.2, seed).unwrap()) {
            hits[i] += 1;
        }
    }
    let expected = trials as f64 * 5.0 / 25.0;
    let chi2: f64 = hits.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-square with 24 degrees of freedom
    assert!(chi2 < 51.18, "chi2 {chi2}, hits {hits:?}");
}

#[test]
fn replacement_values_are_uniform_over_the_range() {
    let img = ImagePatch::with_range(DMatrix::from_element(10, 10, 2.0), 2.0, 6.0).unwrap();
    let draws: Vec<f64> = (0..200).flat_map(|s| inject_noise(&img, 1.0, s).unwrap().pixels.as_slice().to_vec()).collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let se = (16.0 / 12.0 / n).sqrt();
    assert!((mean - 4.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    assert!(draws.iter().all(|v| (2.0..=6.0).contains(v)));
}

fn spec(scales: Vec<f64>, sigmas: Vec<f64>, n: usize) -> MultiViewSpec {
    MultiViewSpec {
        latent_dim: scales.len().max(1),
        view_dims: vec![4, 5],
        noise_sigmas: sigmas,
        latent_scales: scales,
        loading_seed: 1,
        sample_seed: 2,
        n,
    }
}

#[test]
fn noiseless_views_are_perfectly_correlated() {
    let s = spec(vec![], vec![0.0, 0.0], 200);
    let views = gen_multiview(&s).unwrap();
    let t = fit_cca(&views[0], &views[1], 1e-10).unwrap();
    assert!((t.gamma[0] - 1.0).abs() < 1e-6, "{}", t.gamma);
    assert_eq!(s.population_correlations(0, 1), vec![1.0]);
}

#[test]
fn sample_correlations_approach_population_values() {
    let s = spec(vec![2.0, 0.7], vec![1.0, 1.0], 50_000);
    let pop = s.population_correlations(0, 1);
    assert!((pop[0] - 0.8).abs() < 1e-12 && (pop[1] - 0.49 / 1.49).abs() < 1e-12);
    let views = gen_multiview(&s).unwrap();
    let t = fit_cca(&views[0], &views[1], 1e-8).unwrap();
    for (g, p) in t.gamma.iter().zip(&pop) {
        assert!((g - p).abs() < 0.02, "{g} vs {p}");
    }
    // dimensions beyond the latent carry only noise
    assert!(t.gamma[2] < 0.05);
}

#[test]
fn generators_are_deterministic() {
    let s = spec(vec![1.0], vec![0.5, 0.3], 30);
    assert_eq!(gen_multiview(&s).unwrap(), gen_multiview(&s).unwrap());
    let task = common::fusion_task(8);
    let a = gen_classification(&task).unwrap();
    let b = gen_classification(&task).unwrap();
    assert_eq!(a.test_patches, b.test_patches);
    assert_eq!(a.train.views[0].matrix, b.train.views[0].matrix);
    assert_eq!(a.train.labels, task.labels(Split::Train));
    assert_eq!(a.train.n(), 4 * 50);
    assert_eq!(a.test.n(), 4 * 100);
    assert!(gen_multiview(&spec(vec![], vec![0.5], 10)).is_err());
}

#[test]
fn noiseless_task_is_perfectly_separable() {
    let mut task = common::fusion_task(3);
    task.within_sigma = 0.0;
    let data = gen_classification(&task).unwrap();
    assert_eq!(nearest_template_accuracy(&task, &data.test_patches), 1.0);
}

#[test]
fn dataspec_round_trips() {
    let task = common::fusion_task(21);
    assert_eq!(ClassTaskSpec::from_dataspec(&task.to_dataspec()).unwrap(), task);
}
