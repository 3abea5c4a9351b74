//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use mvfusion::cca::FuseMode;
use mvfusion::config::{DatasetSource, FusionMethod, PipelineConfig};
use mvfusion::matrixio::{FeatureMatrix, FeatureSet};
use mvfusion::noise::{ClassTaskSpec, Extractor, ViewSpec};
use mvfusion::svm::SvmConfig;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn set(name: &str, m: DMatrix<f64>) -> FeatureSet {
    FeatureSet::new(name, FeatureMatrix::new(m).unwrap())
}

/// Unbiased covariance by explicit loops.
pub fn loop_cov(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let mx: Vec<f64> = (0..x.nrows()).map(|i| (0..n).map(|j| x[(i, j)]).sum::<f64>() / n as f64).collect();
    let my: Vec<f64> = (0..y.nrows()).map(|i| (0..n).map(|j| y[(i, j)]).sum::<f64>() / n as f64).collect();
    DMatrix::from_fn(x.nrows(), y.nrows(), |a, b| {
        let mut s = 0.0;
        for j in 0..n {
            s += (x[(a, j)] - mx[a]) * (y[(b, j)] - my[b]);
        }
        s / (n - 1) as f64
    })
}

/// Canonical correlations from the literal product `Vxx⁻¹ Vxy Vyy⁻¹ Vyx`:
/// explicit inverses and a general (Schur) eigensolver, sorted descending,
/// first `min(p, q)` kept.
pub fn product_oracle_gammas(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    let vxx = loop_cov(x, x);
    let vyy = loop_cov(y, y);
    let vxy = loop_cov(x, y);
    let vyx = vxy.transpose();
    let m = vxx.try_inverse().expect("Vxx invertible") * &vxy * vyy.try_inverse().expect("Vyy invertible") * vyx;
    let eig = m.complex_eigenvalues();
    let mut lam: Vec<f64> = eig.iter().map(|c| c.re).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    lam.truncate(x.nrows().min(y.nrows()));
    lam.into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_diff(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[i] += h;
        dn[i] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    })
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// The correlated multi-view classification task used for the fusion
/// comparison and the noise sweep: three 2×2 block-mean views of 8×8
/// patches with equal per-view nuisance noise.
pub fn fusion_task(seed: u64) -> ClassTaskSpec {
    ClassTaskSpec {
        class_count: 4,
        height: 8,
        width: 8,
        template_scale: 1.0,
        within_sigma: 0.5,
        views: vec![
            ViewSpec {
                extractor: Extractor::BlockMeans2x2,
                nuisance_sigma: FUSION_NUISANCE,
            };
            3
        ],
        n_train: 50,
        n_test: 100,
        seed,
    }
}

pub const FUSION_NUISANCE: f64 = 1.0;

pub fn config_for(spec: ClassTaskSpec, fusion: FusionMethod, seed: u64) -> PipelineConfig {
    PipelineConfig {
        dataset: DatasetSource::Generator {
            spec,
            pinned_seed: true,
        },
        fusion,
        fuse_mode: FuseMode::Sum,
        ridge_rel: 1e-4,
        views: None,
        svm: SvmConfig {
            seed: mvfusion::seed::sub_seed(seed, "svm"),
            ..SvmConfig::default()
        },
        noise_levels: mvfusion::config::DEFAULT_NOISE_LEVELS.to_vec(),
        output_dir: "unused".into(),
        seed,
    }
}

/// Nearest extracted template in one view's feature space, ignoring the
/// nuisance noise model: the accuracy a view's features allow when the class
/// means are known exactly.
pub fn view_template_accuracy(spec: &ClassTaskSpec, view: usize, features: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let ex = spec.views[view].extractor;
    let protos: Vec<DVector<f64>> = spec.templates().iter().map(|t| ex.extract(t)).collect();
    let correct = (0..features.ncols())
        .filter(|&j| {
            let col = features.column(j);
            let best = (0..protos.len())
                .min_by(|&a, &b| (col - &protos[a]).norm().total_cmp(&(col - &protos[b]).norm()))
                .unwrap();
            best == labels[j]
        })
        .count();
    correct as f64 / features.ncols() as f64
}

/// Pass/fail line for a criterion.
pub fn verdict(id: &str, ok: bool, detail: impl std::fmt::Display) -> bool {
    println!("[{}] {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}
