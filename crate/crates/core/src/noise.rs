//! Random pixel-replacement noise and seeded synthetic generators.
//!
//! `gen_multiview` builds views sharing a latent Gaussian code, with closed-form
//! population canonical correlations. `gen_classification` builds a
//! patch-classification task whose views are deterministic feature extractors
//! plus per-view nuisance noise; raw test patches are returned so they can be
//! corrupted and re-extracted.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrixio::{FeatureMatrix, FeatureSet, LabeledDataset};
use crate::seed::sub_seed;

/// A single-channel image with its admissible value range.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    pub pixels: DMatrix<f64>,
    pub value_range: (f64, f64),
}

impl ImagePatch {
    /// Uses the patch's own `[min, max]` as its value range.
    pub fn new(pixels: DMatrix<f64>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::Dimension("image patch is empty".into()));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("image patch has non-finite pixels".into()));
        }
        let range = (pixels.min(), pixels.max());
        Ok(ImagePatch {
            pixels,
            value_range: range,
        })
    }

    pub fn with_range(pixels: DMatrix<f64>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::Range(format!("value range [{lo}, {hi}] is empty")));
        }
        if pixels.iter().any(|&v| !(lo..=hi).contains(&v)) {
            return Err(Error::Range(format!("pixel outside [{lo}, {hi}]")));
        }
        Ok(ImagePatch {
            pixels,
            value_range: (lo, hi),
        })
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }
}

/// Number of pixels replaced at `level` for a patch of `len` pixels.
pub fn corrupted_count(level: f64, len: usize) -> usize {
    // the nudge keeps e.g. 0.29·100 from flooring to 28
    (((level * len as f64) + 1e-9).floor() as usize).min(len)
}

/// Replaces exactly `floor(level·H·W)` distinct pixels, chosen uniformly
/// without replacement, by i.i.d. `Uniform(lo, hi)` draws over the patch's
/// value range.
///
/// For a fixed seed the corrupted positions are a prefix of one seeded
/// permutation and the replacement values are drawn in that order, so higher
/// levels corrupt a superset of the pixels of lower levels with the same
/// values.
pub fn inject_noise(img: &ImagePatch, level: f64, seed: u64) -> Result<ImagePatch> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::Range(format!("noise level {level} outside [0, 1]")));
    }
    let len = img.pixels.len();
    let count = corrupted_count(level, len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = (0..len).collect();
    positions.shuffle(&mut rng);
    let (lo, hi) = img.value_range;
    let mut out = img.clone();
    for &pos in &positions[..count] {
        let u: f64 = rng.random();
        out.pixels[pos] = (lo + (hi - lo) * u).clamp(lo, hi);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewSpec {
    pub latent_dim: usize,
    pub view_dims: Vec<usize>,
    pub noise_sigmas: Vec<f64>,
    /// Standard deviation of each latent coordinate; empty means all 1.
    pub latent_scales: Vec<f64>,
    pub loading_seed: u64,
    pub sample_seed: u64,
    pub n: usize,
}

impl MultiViewSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("multiview: {m}")));
        if self.view_dims.is_empty() || self.view_dims.len() != self.noise_sigmas.len() {
            return bad("need one noise sigma per view and at least one view".into());
        }
        if self.latent_dim == 0 || self.view_dims.iter().any(|&p| p < self.latent_dim) {
            return bad(format!("latent_dim {} must be >= 1 and <= every view dim", self.latent_dim));
        }
        if self.noise_sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("noise sigmas must be finite and >= 0".into());
        }
        if !self.latent_scales.is_empty()
            && (self.latent_scales.len() != self.latent_dim
                || self.latent_scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()))
        {
            return bad("latent_scales must hold latent_dim positive values".into());
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        Ok(())
    }

    fn scale(&self, j: usize) -> f64 {
        self.latent_scales.get(j).copied().unwrap_or(1.0)
    }

    /// Population canonical correlations between views `a` and `b`,
    /// `s²/√((s² + σ_a²)(s² + σ_b²))` per latent coordinate, sorted
    /// non-increasing.
    pub fn population_correlations(&self, a: usize, b: usize) -> Vec<f64> {
        let (sa, sb) = (self.noise_sigmas[a], self.noise_sigmas[b]);
        let mut gammas: Vec<f64> = (0..self.latent_dim)
            .map(|j| {
                let s2 = self.scale(j).powi(2);
                s2 / ((s2 + sa * sa) * (s2 + sb * sb)).sqrt()
            })
            .collect();
        gammas.sort_by(|x, y| y.total_cmp(x));
        gammas
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Orthonormal `p × k` loading matrix.
fn orthonormal_loadings(p: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qr = gaussian(p, k, &mut rng).qr();
    qr.q().columns(0, k).into_owned()
}

/// Views `L_i · z + σ_i · ε_i` sharing one latent `z`.
pub fn gen_multiview(spec: &MultiViewSpec) -> Result<Vec<FeatureSet>> {
    spec.validate()?;
    let k = spec.latent_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.sample_seed, "latent"));
    let mut z = gaussian(k, spec.n, &mut rng);
    for j in 0..k {
        let s = spec.scale(j);
        z.row_mut(j).scale_mut(s);
    }
    spec.view_dims
        .iter()
        .zip(&spec.noise_sigmas)
        .enumerate()
        .map(|(i, (&p, &sigma))| {
            let loadings = orthonormal_loadings(p, k, sub_seed(spec.loading_seed, &format!("view-{i}")));
            let mut noise_rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.sample_seed, &format!("noise-{i}")));
            let data = &loadings * &z + gaussian(p, spec.n, &mut noise_rng) * sigma;
            Ok(FeatureSet::new(format!("view{i}"), FeatureMatrix::new(data)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Extractor {
    RawFlatten,
    RowMeans,
    ColumnMeans,
    BlockMeans2x2,
}

impl Extractor {
    pub fn output_dim(self, height: usize, width: usize) -> usize {
        match self {
            Extractor::RawFlatten => height * width,
            Extractor::RowMeans => height,
            Extractor::ColumnMeans => width,
            Extractor::BlockMeans2x2 => (height / 2) * (width / 2),
        }
    }

    pub fn extract(self, patch: &DMatrix<f64>) -> DVector<f64> {
        let (h, w) = patch.shape();
        match self {
            // row-major flatten
            Extractor::RawFlatten => DVector::from_iterator(h * w, patch.transpose().iter().copied()),
            Extractor::RowMeans => DVector::from_iterator(h, patch.row_iter().map(|r| r.mean())),
            Extractor::ColumnMeans => DVector::from_iterator(w, patch.column_iter().map(|c| c.mean())),
            Extractor::BlockMeans2x2 => {
                let (bh, bw) = (h / 2, w / 2);
                DVector::from_fn(bh * bw, |idx, _| {
                    let (bi, bj) = (idx / bw, idx % bw);
                    patch.view((2 * bi, 2 * bj), (2, 2)).mean()
                })
            }
        }
    }
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Extractor::RawFlatten => "raw_flatten",
            Extractor::RowMeans => "row_means",
            Extractor::ColumnMeans => "column_means",
            Extractor::BlockMeans2x2 => "block_means_2x2",
        })
    }
}

impl FromStr for Extractor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "raw_flatten" => Ok(Extractor::RawFlatten),
            "row_means" => Ok(Extractor::RowMeans),
            "column_means" => Ok(Extractor::ColumnMeans),
            "block_means_2x2" => Ok(Extractor::BlockMeans2x2),
            other => Err(Error::Config(format!("unknown extractor {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViewSpec {
    pub extractor: Extractor,
    /// Standard deviation of Gaussian noise added to every extracted feature.
    pub nuisance_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassTaskSpec {
    pub class_count: usize,
    pub height: usize,
    pub width: usize,
    /// Templates are `template_scale · N(0, 1)` per pixel.
    pub template_scale: f64,
    pub within_sigma: f64,
    pub views: Vec<ViewSpec>,
    /// Samples per class.
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl ClassTaskSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("classification task: {m}")));
        if self.class_count < 2 {
            return bad("class_count must be >= 2");
        }
        if self.height == 0 || self.width == 0 {
            return bad("patch shape must be non-empty");
        }
        if self.views.is_empty() {
            return bad("at least one view is required");
        }
        for v in &self.views {
            if v.extractor.output_dim(self.height, self.width) == 0 {
                return bad("block_means_2x2 needs height and width >= 2");
            }
            if v.extractor == Extractor::BlockMeans2x2 && (!self.height.is_multiple_of(2) || !self.width.is_multiple_of(2)) {
                return bad("block_means_2x2 needs even height and width");
            }
            if !(v.nuisance_sigma >= 0.0) || !v.nuisance_sigma.is_finite() {
                return bad("nuisance_sigma must be finite and >= 0");
            }
        }
        if !(self.template_scale > 0.0 && self.template_scale.is_finite()) {
            return bad("template_scale must be positive");
        }
        if !(self.within_sigma >= 0.0 && self.within_sigma.is_finite()) {
            return bad("within_sigma must be finite and >= 0");
        }
        if self.n_train == 0 || self.n_test == 0 {
            return bad("n_train and n_test must be positive");
        }
        Ok(())
    }

    pub fn templates(&self) -> Vec<DMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(self.seed, "templates"));
        (0..self.class_count)
            .map(|_| gaussian(self.height, self.width, &mut rng) * self.template_scale)
            .collect()
    }

    /// Class of sample `j` (classes are interleaved).
    pub fn label_of(&self, j: usize) -> usize {
        j % self.class_count
    }

    fn patches(&self, split: Split, templates: &[DMatrix<f64>]) -> Result<Vec<ImagePatch>> {
        let per_class = match split {
            Split::Train => self.n_train,
            Split::Test => self.n_test,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(self.seed, &format!("patches-{}", split.name())));
        (0..per_class * self.class_count)
            .map(|j| {
                let noise = gaussian(self.height, self.width, &mut rng) * self.within_sigma;
                ImagePatch::new(&templates[self.label_of(j)] + noise)
            })
            .collect()
    }

    /// Applies every view's extractor to `patches` and adds that view's
    /// nuisance noise. Nuisance draws depend only on the seed, split, view and
    /// sample index, so re-extracting corrupted patches reuses them.
    pub fn extract_views(&self, patches: &[ImagePatch], split: Split) -> Result<Vec<FeatureSet>> {
        self.validate()?;
        if let Some(bad) = patches
            .iter()
            .position(|p| p.height() != self.height || p.width() != self.width)
        {
            return Err(Error::Config(format!(
                "patch {bad} is {}x{}, extractors expect {}x{}",
                patches[bad].height(),
                patches[bad].width(),
                self.height,
                self.width
            )));
        }
        self.views
            .iter()
            .enumerate()
            .map(|(v, spec)| {
                let dim = spec.extractor.output_dim(self.height, self.width);
                let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(
                    self.seed,
                    &format!("nuisance-{}-{v}", split.name()),
                ));
                let mut data = DMatrix::zeros(dim, patches.len());
                for (j, patch) in patches.iter().enumerate() {
                    let mut col = spec.extractor.extract(&patch.pixels);
                    for x in col.iter_mut() {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        *x += spec.nuisance_sigma * e;
                    }
                    data.set_column(j, &col);
                }
                Ok(FeatureSet::new(
                    format!("view{v}_{}", spec.extractor),
                    FeatureMatrix::new(data)?,
                ))
            })
            .collect()
    }

    pub fn labels(&self, split: Split) -> Vec<usize> {
        let per_class = match split {
            Split::Train => self.n_train,
            Split::Test => self.n_test,
        };
        (0..per_class * self.class_count).map(|j| self.label_of(j)).collect()
    }

    /// `DATASPEC1` text record holding every parameter and seed.
    pub fn to_dataspec(&self) -> String {
        let mut out = String::from("DATASPEC1\n");
        out.push_str("kind=classification\n");
        for (k, v) in self.properties() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    /// `key=value` pairs in a fixed order.
    pub fn properties(&self) -> Vec<(String, String)> {
        let mut props = vec![
            ("class_count".to_string(), self.class_count.to_string()),
            ("height".into(), self.height.to_string()),
            ("width".into(), self.width.to_string()),
            ("template_scale".into(), format!("{:?}", self.template_scale)),
            ("within_sigma".into(), format!("{:?}", self.within_sigma)),
            ("n_train".into(), self.n_train.to_string()),
            ("n_test".into(), self.n_test.to_string()),
            ("seed".into(), self.seed.to_string()),
        ];
        for (i, v) in self.views.iter().enumerate() {
            props.push((format!("view.{i}"), format!("{}:{:?}", v.extractor, v.nuisance_sigma)));
        }
        props
    }

    pub fn from_dataspec(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("DATASPEC1") {
            return Err(Error::Parse("missing DATASPEC1 header".into()));
        }
        let body: Vec<&str> = lines.collect();
        let ini = ini::Ini::load_from_str(&body.join("\n")).map_err(|e| Error::Parse(e.to_string()))?;
        let props = ini.general_section();
        match props.get("kind") {
            Some("classification") | None => {}
            Some(other) => return Err(Error::Parse(format!("unsupported dataspec kind {other:?}"))),
        }
        Self::from_lookup(|k| props.get(k).map(str::to_owned))
    }

    /// Builds a spec from `key=value` lookups (the `DATASPEC1` keys).
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        fn parse<T: FromStr>(get: &impl Fn(&str) -> Option<String>, key: &str) -> Result<T> {
            let raw = get(key).ok_or_else(|| Error::Config(format!("dataset: missing key {key:?}")))?;
            raw.trim()
                .parse()
                .map_err(|_| Error::Config(format!("dataset: bad value {raw:?} for {key:?}")))
        }
        let mut views = Vec::new();
        while let Some(raw) = get(&format!("view.{}", views.len())) {
            let (ex, sigma) = raw.split_once(':').unwrap_or((raw.as_str(), "0"));
            views.push(ViewSpec {
                extractor: ex.parse()?,
                nuisance_sigma: sigma
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("dataset: bad nuisance sigma in {raw:?}")))?,
            });
        }
        let spec = ClassTaskSpec {
            class_count: parse(&get, "class_count")?,
            height: parse(&get, "height")?,
            width: parse(&get, "width")?,
            template_scale: parse(&get, "template_scale")?,
            within_sigma: parse(&get, "within_sigma")?,
            views,
            n_train: parse(&get, "n_train")?,
            n_test: parse(&get, "n_test")?,
            seed: parse(&get, "seed")?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub test_patches: Vec<ImagePatch>,
}

/// Template-plus-noise patches per class, viewed through each extractor.
pub fn gen_classification(spec: &ClassTaskSpec) -> Result<ClassificationData> {
    spec.validate()?;
    let templates = spec.templates();
    let train_patches = spec.patches(Split::Train, &templates)?;
    let test_patches = spec.patches(Split::Test, &templates)?;
    let train = LabeledDataset::new(
        spec.extract_views(&train_patches, Split::Train)?,
        spec.labels(Split::Train),
        spec.class_count,
    )?;
    let test = LabeledDataset::new(
        spec.extract_views(&test_patches, Split::Test)?,
        spec.labels(Split::Test),
        spec.class_count,
    )?;
    Ok(ClassificationData {
        train,
        test,
        test_patches,
    })
}

/// Accuracy of assigning each test patch to the nearest class template.
pub fn nearest_template_accuracy(spec: &ClassTaskSpec, patches: &[ImagePatch]) -> f64 {
    let templates = spec.templates();
    let correct = patches
        .iter()
        .enumerate()
        .filter(|(j, p)| {
            let best = templates
                .iter()
                .map(|t| (&p.pixels - t).norm_squared())
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)
                .unwrap_or(0);
            best == spec.label_of(*j)
        })
        .count();
    correct as f64 / patches.len().max(1) as f64
}
