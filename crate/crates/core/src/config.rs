//! Pipeline configuration: `[section]` headers with `key = value` lines.
//!
//! ```text
//! [run]
//! seed = 7
//! output_dir = out
//!
//! [dataset]
//! spec_file = task.dataspec        # or train_manifest / test_manifest,
//!                                  # or the DATASPEC1 keys inline
//! [fusion]
//! method = mcca                    # mcca | cca | none
//! mode = sum                       # sum | concat | none
//! ridge_rel = 1e-4
//! views = 0,1,2                    # optional subset
//!
//! [svm]
//! c_penalty = 0.01
//! loss = hinge_l2
//!
//! [noise]
//! levels = 0.01,0.05,0.10,0.15
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use serde::Serialize;

use crate::cca::{FuseMode, DEFAULT_RIDGE_REL};
use crate::error::{Error, Result};
use crate::noise::ClassTaskSpec;
use crate::seed::sub_seed;
use crate::svm::SvmConfig;

pub const DEFAULT_NOISE_LEVELS: [f64; 4] = [0.01, 0.05, 0.10, 0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FusionMethod {
    Mcca,
    Cca,
    None,
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMethod::Mcca => "mcca",
            FusionMethod::Cca => "cca",
            FusionMethod::None => "none",
        })
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mcca" => Ok(FusionMethod::Mcca),
            "cca" => Ok(FusionMethod::Cca),
            "none" => Ok(FusionMethod::None),
            other => Err(Error::Config(format!("unknown fusion method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DatasetSource {
    /// Synthetic task; the generator seed is derived from the run seed unless
    /// the `[dataset]` section pins `seed`.
    Generator { spec: ClassTaskSpec, pinned_seed: bool },
    Manifests { train: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub dataset: DatasetSource,
    pub fusion: FusionMethod,
    pub fuse_mode: FuseMode,
    pub ridge_rel: f64,
    /// Indices of the views to use; `None` means all.
    pub views: Option<Vec<usize>>,
    pub svm: SvmConfig,
    pub noise_levels: Vec<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

fn parse_value<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {raw:?}")))
}

fn parse_list<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(section, key, s))
        .collect()
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p.trim());
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

const DATASET_KEYS: [&str; 8] = [
    "class_count",
    "height",
    "width",
    "template_scale",
    "within_sigma",
    "n_train",
    "n_test",
    "seed",
];

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("config syntax: {e}")))?;
        for (section, props) in ini.iter() {
            let allowed: &[&str] = match section {
                None if props.is_empty() => &[],
                Some("run") => &["seed", "output_dir"],
                Some("fusion") => &["method", "mode", "ridge_rel", "views"],
                Some("svm") => &[
                    "c_penalty", "loss", "batch_size", "momentum", "weight_decay", "lr_initial",
                    "lr_decay_factor", "max_lr_decays", "patience_epochs", "max_epochs",
                    "plateau_rel_tol",
                ],
                Some("noise") => &["levels"],
                Some("dataset") => &[],
                other => {
                    return Err(Error::Config(format!(
                        "unexpected section {:?}",
                        other.unwrap_or("<top level>")
                    )))
                }
            };
            if section == Some("dataset") {
                continue;
            }
            if let Some((k, _)) = props.iter().find(|(k, _)| !allowed.contains(k)) {
                return Err(Error::Config(format!(
                    "unknown key {k:?} in [{}]",
                    section.unwrap_or("")
                )));
            }
        }
        let get = |section: &str, key: &str| ini.section(Some(section)).and_then(|s| s.get(key));

        let seed = match get("run", "seed") {
            Some(raw) => parse_value("run", "seed", raw)?,
            None => 0,
        };
        let output_dir = get("run", "output_dir").map_or_else(|| base.join("out"), |p| resolve(base, p));

        let dataset = Self::parse_dataset(&ini, base, seed)?;

        let mut fusion = match get("fusion", "method") {
            Some(raw) => raw.parse()?,
            None => FusionMethod::Mcca,
        };
        let fuse_mode = match get("fusion", "mode").map(str::trim) {
            Some("none") => {
                fusion = FusionMethod::None;
                FuseMode::Sum
            }
            Some(raw) => raw.parse()?,
            None => FuseMode::Sum,
        };
        let ridge_rel = match get("fusion", "ridge_rel") {
            Some(raw) => parse_value("fusion", "ridge_rel", raw)?,
            None => DEFAULT_RIDGE_REL,
        };
        let views = get("fusion", "views")
            .map(|raw| parse_list("fusion", "views", raw))
            .transpose()?;

        let mut svm = SvmConfig::default();
        if let Some(props) = ini.section(Some("svm")) {
            for (k, v) in props.iter() {
                match k {
                    "c_penalty" => svm.c_penalty = parse_value("svm", k, v)?,
                    "loss" => svm.loss = v.parse()?,
                    "batch_size" => svm.batch_size = parse_value("svm", k, v)?,
                    "momentum" => svm.momentum = parse_value("svm", k, v)?,
                    "weight_decay" => svm.weight_decay = parse_value("svm", k, v)?,
                    "lr_initial" => svm.lr_initial = parse_value("svm", k, v)?,
                    "lr_decay_factor" => svm.lr_decay_factor = parse_value("svm", k, v)?,
                    "max_lr_decays" => svm.max_lr_decays = parse_value("svm", k, v)?,
                    "patience_epochs" => svm.patience_epochs = parse_value("svm", k, v)?,
                    "max_epochs" => svm.max_epochs = parse_value("svm", k, v)?,
                    "plateau_rel_tol" => svm.plateau_rel_tol = parse_value("svm", k, v)?,
                    _ => unreachable!("keys validated above"),
                }
            }
        }
        svm.seed = sub_seed(seed, "svm");

        let noise_levels = match get("noise", "levels") {
            Some(raw) => parse_list("noise", "levels", raw)?,
            None => DEFAULT_NOISE_LEVELS.to_vec(),
        };

        let cfg = PipelineConfig {
            dataset,
            fusion,
            fuse_mode,
            ridge_rel,
            views,
            svm,
            noise_levels,
            output_dir,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn parse_dataset(ini: &Ini, base: &Path, seed: u64) -> Result<DatasetSource> {
        let props = ini
            .section(Some("dataset"))
            .ok_or_else(|| Error::Config("missing [dataset] section".into()))?;
        if let (Some(train), Some(test)) = (props.get("train_manifest"), props.get("test_manifest")) {
            return Ok(DatasetSource::Manifests {
                train: resolve(base, train),
                test: resolve(base, test),
            });
        }
        let (mut spec, pinned) = if let Some(file) = props.get("spec_file") {
            let path = resolve(base, file);
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            (ClassTaskSpec::from_dataspec(&text)?, true)
        } else {
            for (k, _) in props.iter() {
                if !DATASET_KEYS.contains(&k) && !k.starts_with("view.") {
                    return Err(Error::Config(format!("unknown key {k:?} in [dataset]")));
                }
            }
            let pinned = props.contains_key("seed");
            let spec = ClassTaskSpec::from_lookup(|k| match (k, props.get(k)) {
                ("seed", None) => Some("0".to_string()),
                (_, v) => v.map(str::to_owned),
            })?;
            (spec, pinned)
        };
        if !pinned {
            spec.seed = sub_seed(seed, "synth");
        }
        Ok(DatasetSource::Generator {
            spec,
            pinned_seed: pinned,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.svm.validate()?;
        if !(self.ridge_rel >= 0.0 && self.ridge_rel.is_finite()) {
            return Err(Error::Config("ridge_rel must be finite and >= 0".into()));
        }
        if let Some(v) = &self.views {
            if v.is_empty() {
                return Err(Error::Config("views list is empty".into()));
            }
        }
        if self.noise_levels.is_empty() {
            return Err(Error::Config("noise levels list is empty".into()));
        }
        if let Some(l) = self.noise_levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Config(format!("noise level {l} outside [0, 1]")));
        }
        Ok(())
    }

    /// Replaces the run seed, re-deriving every seed that was not pinned.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.svm.seed = sub_seed(seed, "svm");
        if let DatasetSource::Generator { spec, pinned_seed: false } = &mut self.dataset {
            spec.seed = sub_seed(seed, "synth");
        }
        self
    }

    /// Effective configuration, defaults resolved, in the same file format.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "[run]\nseed = {}\noutput_dir = {}\n\n[dataset]\n",
            self.seed,
            self.output_dir.display()
        );
        match &self.dataset {
            DatasetSource::Generator { spec, .. } => {
                for (k, v) in spec.properties() {
                    out.push_str(&format!("{k} = {v}\n"));
                }
            }
            DatasetSource::Manifests { train, test } => {
                out.push_str(&format!(
                    "train_manifest = {}\ntest_manifest = {}\n",
                    train.display(),
                    test.display()
                ));
            }
        }
        out.push_str(&format!(
            "\n[fusion]\nmethod = {}\nmode = {}\nridge_rel = {:?}\n",
            self.fusion, self.fuse_mode, self.ridge_rel
        ));
        if let Some(v) = &self.views {
            let list: Vec<String> = v.iter().map(usize::to_string).collect();
            out.push_str(&format!("views = {}\n", list.join(",")));
        }
        let s = &self.svm;
        out.push_str(&format!(
            "\n[svm]\nc_penalty = {:?}\nloss = {}\nbatch_size = {}\nmomentum = {:?}\nweight_decay = {:?}\n\
             lr_initial = {:?}\nlr_decay_factor = {:?}\nmax_lr_decays = {}\npatience_epochs = {}\n\
             max_epochs = {}\nplateau_rel_tol = {:?}\n",
            s.c_penalty,
            s.loss,
            s.batch_size,
            s.momentum,
            s.weight_decay,
            s.lr_initial,
            s.lr_decay_factor,
            s.max_lr_decays,
            s.patience_epochs,
            s.max_epochs,
            s.plateau_rel_tol
        ));
        let levels: Vec<String> = self.noise_levels.iter().map(|l| format!("{l:?}")).collect();
        out.push_str(&format!("\n[noise]\nlevels = {}\n", levels.join(",")));
        out
    }
}
