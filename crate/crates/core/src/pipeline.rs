//! End-to-end orchestration: ingest views, fuse, train the one-vs-rest SVM on
//! the fused training features, replay the fusion on the test views, predict
//! and report.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cca::FuseMode;
use crate::config::{DatasetSource, FusionMethod, PipelineConfig};
use crate::error::{Error, Result};
use crate::matrixio::{load_dataset, FeatureSet, LabeledDataset};
use crate::mcca::{apply_mcca, fit_mcca, MccaPlan};
use crate::metrics::{confusion_matrix, report, MetricsReport};
use crate::noise::{gen_classification, inject_noise, ClassTaskSpec, ImagePatch, Split};
use crate::seed::sub_seed;
use crate::svm::{train_multiclass, SvmModel};

/// Train/test views, plus the generator and clean test patches when the data
/// is synthetic.
#[derive(Debug, Clone)]
pub struct PipelineData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub task: Option<(ClassTaskSpec, Vec<ImagePatch>)>,
}

pub fn load_data(cfg: &PipelineConfig) -> Result<PipelineData> {
    match &cfg.dataset {
        DatasetSource::Generator { spec, .. } => {
            let data = gen_classification(spec).map_err(|e| e.in_stage("noise_sim", "generate"))?;
            Ok(PipelineData {
                train: data.train,
                test: data.test,
                task: Some((spec.clone(), data.test_patches)),
            })
        }
        DatasetSource::Manifests { train, test } => {
            let train = load_dataset(train).map_err(|e| e.in_stage("matrixio", "load train"))?;
            let test = load_dataset(test).map_err(|e| e.in_stage("matrixio", "load test"))?;
            if train.views.len() != test.views.len() || train.class_count != test.class_count {
                return Err(Error::Dimension(format!(
                    "train has {} views / {} classes, test has {} / {}",
                    train.views.len(),
                    train.class_count,
                    test.views.len(),
                    test.class_count
                ))
                .in_stage("matrixio", "load test"));
            }
            Ok(PipelineData { train, test, task: None })
        }
    }
}

/// How the selected views are turned into one SVM input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub method: FusionMethod,
    /// Indices into the dataset's views, in the order they enter fusion.
    pub views: Vec<usize>,
    pub plan: Option<MccaPlan>,
}

fn selected(views: &[FeatureSet], idx: &[usize]) -> Vec<FeatureSet> {
    idx.iter().map(|&i| views[i].clone()).collect()
}

fn stack_rows(views: &[FeatureSet]) -> DMatrix<f64> {
    let p: usize = views.iter().map(FeatureSet::p).sum();
    let n = views[0].n();
    let mut out = DMatrix::zeros(p, n);
    let mut row = 0;
    for v in views {
        let raw = v.raw();
        out.view_mut((row, 0), (v.p(), n)).copy_from(&raw);
        row += v.p();
    }
    out
}

/// Resolves the configured view subset. `cca` takes the first two.
pub fn view_indices(cfg: &PipelineConfig, available: usize) -> Result<Vec<usize>> {
    let mut idx = cfg.views.clone().unwrap_or_else(|| (0..available).collect());
    if let Some(&bad) = idx.iter().find(|&&i| i >= available) {
        return Err(Error::Config(format!(
            "view index {bad} out of range, dataset has {available} views"
        )));
    }
    let mut seen = idx.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != idx.len() {
        return Err(Error::Config("duplicate view index".into()));
    }
    let need = match cfg.fusion {
        FusionMethod::Mcca | FusionMethod::Cca => 2,
        FusionMethod::None => 1,
    };
    if idx.len() < need {
        return Err(Error::Config(format!(
            "fusion {} needs at least {need} views, {} selected",
            cfg.fusion,
            idx.len()
        )));
    }
    if cfg.fusion == FusionMethod::Cca {
        idx.truncate(2);
    }
    Ok(idx)
}

pub fn fit_fusion(
    method: FusionMethod,
    views: &[FeatureSet],
    idx: &[usize],
    mode: FuseMode,
    ridge_rel: f64,
) -> Result<(Fusion, DMatrix<f64>)> {
    let chosen = selected(views, idx);
    match method {
        FusionMethod::None => Ok((
            Fusion {
                method,
                views: idx.to_vec(),
                plan: None,
            },
            stack_rows(&chosen),
        )),
        FusionMethod::Mcca | FusionMethod::Cca => {
            let (plan, fused) = fit_mcca(&chosen, mode, ridge_rel)?;
            Ok((
                Fusion {
                    method,
                    views: idx.to_vec(),
                    plan: Some(plan),
                },
                fused.data,
            ))
        }
    }
}

pub fn apply_fusion(fusion: &Fusion, views: &[FeatureSet]) -> Result<DMatrix<f64>> {
    if let Some(&bad) = fusion.views.iter().find(|&&i| i >= views.len()) {
        return Err(Error::Dimension(format!("view {bad} missing from test data")));
    }
    let chosen = selected(views, &fusion.views);
    match &fusion.plan {
        None => {
            let out = stack_rows(&chosen);
            Ok(out)
        }
        Some(plan) => {
            let raws: Vec<DMatrix<f64>> = chosen.iter().map(FeatureSet::raw).collect();
            Ok(apply_mcca(plan, &raws)?.data)
        }
    }
}

/// Trains on per-feature standardized inputs, then folds the scaling into the
/// weights so the model applies to unscaled features.
pub fn train_standardized(
    data: &DMatrix<f64>,
    labels: &[usize],
    classes: usize,
    cfg: &crate::svm::SvmConfig,
) -> Result<SvmModel> {
    let (d, n) = data.shape();
    let mean = DVector::from_fn(d, |i, _| data.row(i).mean());
    let scale = DVector::from_fn(d, |i, _| {
        let sd = (data.row(i).iter().map(|x| (x - mean[i]).powi(2)).sum::<f64>() / n.max(2).saturating_sub(1) as f64).sqrt();
        if sd > 0.0 && sd.is_finite() {
            sd
        } else {
            1.0
        }
    });
    let z = DMatrix::from_fn(d, n, |i, j| (data[(i, j)] - mean[i]) / scale[i]);
    let mut model = train_multiclass(&z, labels, classes, cfg)?;
    for c in 0..model.classes() {
        let mut bias = model.weights[(c, d)];
        for i in 0..d {
            let w = model.weights[(c, i)] / scale[i];
            bias -= w * mean[i];
            model.weights[(c, i)] = w;
        }
        model.weights[(c, d)] = bias;
    }
    Ok(model)
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub fusion: Fusion,
    pub model: SvmModel,
    pub report: MetricsReport,
    pub predictions: Vec<usize>,
}

impl PipelineOutcome {
    pub fn accuracy(&self) -> f64 {
        self.report.overall.accuracy
    }
}

pub fn class_names(classes: usize) -> Vec<String> {
    (0..classes).map(|c| format!("class{c}")).collect()
}

/// Fits fusion and SVM on `train` and returns them with the fused training
/// matrix dimension checked.
pub fn fit_models(cfg: &PipelineConfig, train: &LabeledDataset) -> Result<(Fusion, SvmModel)> {
    let idx = view_indices(cfg, train.views.len()).map_err(|e| e.in_stage("cli", "select views"))?;
    let stage = match cfg.fusion {
        FusionMethod::None => "stack views",
        _ => "fit",
    };
    let (fusion, fused) = fit_fusion(cfg.fusion, &train.views, &idx, cfg.fuse_mode, cfg.ridge_rel)
        .map_err(|e| e.in_stage("mcca", stage))?;
    let model = train_standardized(&fused, &train.labels, train.class_count, &cfg.svm)
        .map_err(|e| e.in_stage("svm", "train"))?;
    Ok((fusion, model))
}

pub fn evaluate(fusion: &Fusion, model: &SvmModel, test: &LabeledDataset) -> Result<(MetricsReport, Vec<usize>)> {
    let fused = apply_fusion(fusion, &test.views).map_err(|e| e.in_stage("mcca", "apply"))?;
    let pred = model.predict(&fused).map_err(|e| e.in_stage("svm", "predict"))?;
    let cm = confusion_matrix(&test.labels, &pred.labels, test.class_count)
        .map_err(|e| e.in_stage("eval_metrics", "confusion"))?;
    let rep = report(&cm, &class_names(test.class_count)).map_err(|e| e.in_stage("eval_metrics", "report"))?;
    Ok((rep, pred.labels))
}

pub fn run_on(cfg: &PipelineConfig, data: &PipelineData) -> Result<PipelineOutcome> {
    let (fusion, model) = fit_models(cfg, &data.train)?;
    let (report, predictions) = evaluate(&fusion, &model, &data.test)?;
    Ok(PipelineOutcome {
        fusion,
        model,
        report,
        predictions,
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    run_on(cfg, &load_data(cfg)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub level: f64,
    pub accuracy: f64,
}

/// Corrupts every test patch at `level`; patch `j` uses seed
/// `sub_seed(sub_seed(global, "noise"), "patch-j")` at every level, so the
/// corrupted pixel sets are nested as the level grows.
pub fn corrupt_patches(patches: &[ImagePatch], level: f64, global: u64) -> Result<Vec<ImagePatch>> {
    let base = sub_seed(global, "noise");
    patches
        .iter()
        .enumerate()
        .map(|(j, p)| inject_noise(p, level, sub_seed(base, &format!("patch-{j}"))))
        .collect()
}

/// Trains once on clean data and evaluates on test imagery corrupted at each
/// level.
pub fn run_noise_sweep(cfg: &PipelineConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    noise_sweep_on(cfg, &data)
}

pub fn noise_sweep_on(cfg: &PipelineConfig, data: &PipelineData) -> Result<Vec<SweepRow>> {
    let Some((spec, patches)) = &data.task else {
        return Err(Error::Config(
            "noise sweep needs a generator dataset: extractors cannot be re-applied to stored features".into(),
        ));
    };
    if cfg.noise_levels.is_empty() {
        return Err(Error::Config("noise level list is empty".into()));
    }
    let (fusion, model) = fit_models(cfg, &data.train)?;
    cfg.noise_levels
        .iter()
        .map(|&level| {
            let stage = format!("level {level}");
            let noisy = corrupt_patches(patches, level, cfg.seed).map_err(|e| e.in_stage("noise_sim", stage.clone()))?;
            let views = spec
                .extract_views(&noisy, Split::Test)
                .map_err(|e| e.in_stage("noise_sim", stage.clone()))?;
            let test = LabeledDataset::new(views, data.test.labels.clone(), data.test.class_count)?;
            let (rep, _) = evaluate(&fusion, &model, &test)?;
            Ok(SweepRow {
                level,
                accuracy: rep.overall.accuracy,
            })
        })
        .collect()
}

/// One row of the fusion comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmResult {
    pub arm: String,
    pub fusion: FusionMethod,
    pub views: Vec<usize>,
    pub accuracy: f64,
}

/// Single views, unfused stacking, the first-two-view CCA pair and MCCA
/// over all selected views, each trained and evaluated on the same split.
pub fn compare_arms(cfg: &PipelineConfig, data: &PipelineData) -> Result<Vec<ArmResult>> {
    let base = PipelineConfig {
        fusion: FusionMethod::Mcca,
        ..cfg.clone()
    };
    let all = view_indices(&base, data.train.views.len())?;
    let mut arms: Vec<(String, FusionMethod, Vec<usize>)> = all
        .iter()
        .map(|&v| (format!("single view {v}"), FusionMethod::None, vec![v]))
        .collect();
    arms.push(("without fusion".into(), FusionMethod::None, all.clone()));
    arms.push(("cca pair".into(), FusionMethod::Cca, all[..2].to_vec()));
    arms.push(("mcca".into(), FusionMethod::Mcca, all.clone()));
    arms.into_iter()
        .map(|(arm, fusion, views)| {
            let arm_cfg = PipelineConfig {
                fusion,
                views: Some(views.clone()),
                ..cfg.clone()
            };
            let out = run_on(&arm_cfg, data).map_err(|e| e.in_stage("cli", format!("arm {arm}")))?;
            Ok(ArmResult {
                arm,
                fusion,
                views,
                accuracy: out.accuracy(),
            })
        })
        .collect()
}
