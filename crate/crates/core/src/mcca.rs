//! Sequential pairwise fusion of λ ≥ 2 views.
//!
//! At every stage the two alive sets with the highest numerical rank are fused
//! by CCA; the fused output joins the alive pool. Equal ranks are ordered by
//! the smallest original input index a set contains, so the schedule is a
//! total order.

use nalgebra::DMatrix;

use crate::cca::{self, CcaTransform, FuseMode, FusedFeatures};
use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::matrixio::{numerical_rank, row_means, subtract_column, FeatureMatrix, FeatureSet};

const MCCA_MAGIC: &[u8; 6] = b"MCCA1\0";

#[derive(Debug, Clone, PartialEq)]
pub struct MccaStage {
    pub left: usize,
    pub right: usize,
    /// Fresh id: `λ + stage index`.
    pub output: usize,
    /// Planning-time bound before fitting, measured rank after.
    pub output_rank: usize,
    pub fuse_mode: FuseMode,
    pub transform: Option<CcaTransform>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MccaPlan {
    pub stages: Vec<MccaStage>,
    /// Rank of input `i` (ids `0..λ`).
    pub input_ranks: Vec<usize>,
    /// Feature dimension of input `i`.
    pub input_dims: Vec<usize>,
    pub fuse_mode: FuseMode,
}

/// Human-readable label for a set id: `F1..Fλ` for inputs, `M1..` for fused outputs.
pub fn set_label(id: usize, lambda: usize) -> String {
    if id < lambda {
        format!("F{}", id + 1)
    } else {
        format!("M{}", id - lambda + 1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Alive {
    id: usize,
    rank: usize,
    key: usize,
}

/// Greedy max-rank pairing. `fuse(stage, left, right)` performs one stage and
/// returns the rank of its output.
fn run_schedule<F>(input_ranks: &[usize], mut fuse: F) -> Result<Vec<(usize, usize)>>
where
    F: FnMut(usize, usize, usize) -> Result<usize>,
{
    let lambda = input_ranks.len();
    let mut alive: Vec<Alive> = input_ranks
        .iter()
        .enumerate()
        .map(|(i, &rank)| Alive { id: i, rank, key: i })
        .collect();
    let mut pairs = Vec::with_capacity(lambda.saturating_sub(1));
    for stage in 0..lambda.saturating_sub(1) {
        alive.sort_by(|a, b| b.rank.cmp(&a.rank).then(a.key.cmp(&b.key)));
        let left = alive.remove(0);
        let right = alive.remove(0);
        let rank = fuse(stage, left.id, right.id)?;
        pairs.push((left.id, right.id));
        alive.push(Alive {
            id: lambda + stage,
            rank,
            key: left.key.min(right.key),
        });
    }
    Ok(pairs)
}

/// Replays the greedy rule from recorded input and stage-output ranks.
pub fn schedule_pairs(input_ranks: &[usize], output_ranks: &[usize]) -> Vec<(usize, usize)> {
    run_schedule(input_ranks, |stage, _, _| Ok(output_ranks[stage]))
        .expect("replay closure is infallible")
}

fn check_views(views: &[&DMatrix<f64>]) -> Result<usize> {
    if views.len() < 2 {
        return Err(Error::Degenerate(format!(
            "multi-set fusion needs at least 2 views, got {}",
            views.len()
        )));
    }
    let n = views[0].ncols();
    if let Some(i) = views.iter().position(|v| v.ncols() != n) {
        return Err(Error::Dimension(format!(
            "view {i} has {} samples, view 0 has {n}",
            views[i].ncols()
        )));
    }
    Ok(n)
}

/// Rank of a sample matrix after removing per-feature means.
pub fn centered_rank(m: &DMatrix<f64>) -> usize {
    numerical_rank(&subtract_column(m, &row_means(m)), None)
}

/// Builds the stage schedule from input ranks alone; intermediate ranks use
/// `min(r_l, r_r)` for sum and `r_l + r_r` for concat. Transforms are unset.
pub fn plan_fusion(views: &[FeatureSet], fuse_mode: FuseMode) -> Result<MccaPlan> {
    let raws: Vec<DMatrix<f64>> = views.iter().map(FeatureSet::raw).collect();
    check_views(&raws.iter().collect::<Vec<_>>())?;
    let input_ranks: Vec<usize> = raws.iter().map(centered_rank).collect();
    let mut ranks = input_ranks.clone();
    let mut stages = Vec::new();
    run_schedule(&input_ranks, |stage, left, right| {
        let bound = match fuse_mode {
            FuseMode::Sum => ranks[left].min(ranks[right]),
            FuseMode::Concat => ranks[left] + ranks[right],
        };
        ranks.push(bound);
        stages.push(MccaStage {
            left,
            right,
            output: input_ranks.len() + stage,
            output_rank: bound,
            fuse_mode,
            transform: None,
        });
        Ok(bound)
    })?;
    Ok(MccaPlan {
        stages,
        input_dims: views.iter().map(FeatureSet::p).collect(),
        input_ranks,
        fuse_mode,
    })
}

/// Fits every stage on training views and returns the plan with the final
/// fused training features. Intermediate ranks are measured on the fused
/// training matrices.
pub fn fit_mcca(
    views: &[FeatureSet],
    fuse_mode: FuseMode,
    ridge_rel: f64,
) -> Result<(MccaPlan, FusedFeatures)> {
    let raws: Vec<DMatrix<f64>> = views.iter().map(FeatureSet::raw).collect();
    check_views(&raws.iter().collect::<Vec<_>>())?;
    let lambda = views.len();
    let input_ranks: Vec<usize> = raws.iter().map(centered_rank).collect();

    let mut pool: Vec<Option<DMatrix<f64>>> = raws.into_iter().map(Some).collect();
    let mut stages = Vec::with_capacity(lambda - 1);
    let mut last = None;
    run_schedule(&input_ranks, |stage, left, right| {
        let label = format!(
            "stage {} ({} + {})",
            stage + 1,
            set_label(left, lambda),
            set_label(right, lambda)
        );
        let x = pool[left].take().expect("each set is consumed once");
        let y = pool[right].take().expect("each set is consumed once");
        let (fused, transform) = fit_stage(&x, &y, fuse_mode, ridge_rel, left, right, lambda)
            .map_err(|e| e.in_stage("mcca", label))?;
        let rank = centered_rank(&fused.data);
        stages.push(MccaStage {
            left,
            right,
            output: lambda + stage,
            output_rank: rank,
            fuse_mode,
            transform: Some(transform),
        });
        pool.push(Some(fused.data.clone()));
        last = Some(fused);
        Ok(rank)
    })?;

    let plan = MccaPlan {
        stages,
        input_ranks,
        input_dims: views.iter().map(FeatureSet::p).collect(),
        fuse_mode,
    };
    Ok((plan, last.expect("at least one stage")))
}

fn fit_stage(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    mode: FuseMode,
    ridge_rel: f64,
    left: usize,
    right: usize,
    lambda: usize,
) -> Result<(FusedFeatures, CcaTransform)> {
    let xs = FeatureSet::new(set_label(left, lambda), FeatureMatrix::new(x.clone())?);
    let ys = FeatureSet::new(set_label(right, lambda), FeatureMatrix::new(y.clone())?);
    let transform = cca::fit_cca(&xs, &ys, ridge_rel)?;
    let fused = cca::fuse(&cca::project(&transform, x, y)?, mode)?;
    Ok((fused, transform))
}

/// Replays a fitted plan on new views using the stored transforms and
/// training means.
pub fn apply_mcca(plan: &MccaPlan, views: &[DMatrix<f64>]) -> Result<FusedFeatures> {
    let lambda = plan.lambda();
    if views.len() != lambda {
        return Err(Error::Dimension(format!(
            "plan expects {lambda} views, got {}",
            views.len()
        )));
    }
    let refs: Vec<&DMatrix<f64>> = views.iter().collect();
    check_views(&refs)?;
    for (i, (v, &dim)) in refs.iter().zip(&plan.input_dims).enumerate() {
        if v.nrows() != dim {
            return Err(Error::Dimension(format!(
                "view {i} has {} features, plan expects {dim}",
                v.nrows()
            )));
        }
    }
    let mut pool: Vec<Option<DMatrix<f64>>> = refs.into_iter().map(|v| Some(v.clone())).collect();
    let mut last = None;
    for (t, stage) in plan.stages.iter().enumerate() {
        let transform = stage.transform.as_ref().ok_or_else(|| {
            Error::Unfitted(format!("stage {} has no fitted transform", t + 1))
        })?;
        let take = |pool: &mut Vec<Option<DMatrix<f64>>>, id: usize| {
            pool.get_mut(id)
                .and_then(Option::take)
                .ok_or_else(|| Error::Parse(format!("stage {} references unavailable set {id}", t + 1)))
        };
        let x = take(&mut pool, stage.left)?;
        let y = take(&mut pool, stage.right)?;
        let fused = cca::project(transform, &x, &y)
            .and_then(|v| cca::fuse(&v, stage.fuse_mode))
            .map_err(|e| e.in_stage("mcca", format!("apply stage {}", t + 1)))?;
        pool.push(Some(fused.data.clone()));
        last = Some(fused);
    }
    last.ok_or_else(|| Error::Unfitted("plan has no stages".into()))
}

impl MccaPlan {
    pub fn lambda(&self) -> usize {
        self.input_ranks.len()
    }

    pub fn is_fitted(&self) -> bool {
        self.stages.iter().all(|s| s.transform.is_some())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::with_magic(MCCA_MAGIC);
        enc.u64(self.lambda() as u64).u8(self.fuse_mode.tag());
        for (&rank, &dim) in self.input_ranks.iter().zip(&self.input_dims) {
            enc.u64(rank as u64).u64(dim as u64);
        }
        enc.u64(self.stages.len() as u64);
        for s in &self.stages {
            enc.u64(s.left as u64)
                .u64(s.right as u64)
                .u64(s.output as u64)
                .u64(s.output_rank as u64)
                .u8(s.fuse_mode.tag());
            match &s.transform {
                Some(t) => enc.u8(1).field(&t.to_bytes()),
                None => enc.u8(0),
            };
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MCCA_MAGIC, "MCCA1")?;
        let lambda = dec.usize()?;
        let fuse_mode = FuseMode::from_tag(dec.u8()?)?;
        if lambda > bytes.len() {
            return Err(Error::Parse(format!("MCCA1: implausible view count {lambda}")));
        }
        let mut input_ranks = Vec::with_capacity(lambda);
        let mut input_dims = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            input_ranks.push(dec.usize()?);
            input_dims.push(dec.usize()?);
        }
        let count = dec.usize()?;
        if count + 1 != lambda {
            return Err(Error::Parse(format!(
                "MCCA1: {count} stages for {lambda} views"
            )));
        }
        let mut stages = Vec::with_capacity(count);
        for _ in 0..count {
            let left = dec.usize()?;
            let right = dec.usize()?;
            let output = dec.usize()?;
            let output_rank = dec.usize()?;
            let mode = FuseMode::from_tag(dec.u8()?)?;
            let transform = match dec.u8()? {
                0 => None,
                1 => Some(CcaTransform::from_bytes(dec.field()?)?),
                other => return Err(Error::Parse(format!("MCCA1: bad transform flag {other}"))),
            };
            stages.push(MccaStage {
                left,
                right,
                output,
                output_rank,
                fuse_mode: mode,
                transform,
            });
        }
        dec.finish()?;
        Ok(MccaPlan {
            stages,
            input_ranks,
            input_dims,
            fuse_mode,
        })
    }

    /// One line per stage, e.g. `stage 1: F1 + F2 -> M1 (rank 4)`.
    pub fn describe(&self) -> String {
        let lambda = self.lambda();
        let mut out = String::new();
        for (i, (r, d)) in self.input_ranks.iter().zip(&self.input_dims).enumerate() {
            out.push_str(&format!("{}: dim {d}, rank {r}\n", set_label(i, lambda)));
        }
        for (t, s) in self.stages.iter().enumerate() {
            out.push_str(&format!(
                "stage {}: {} + {} -> {} ({}, rank {}{})\n",
                t + 1,
                set_label(s.left, lambda),
                set_label(s.right, lambda),
                set_label(s.output, lambda),
                s.fuse_mode,
                s.output_rank,
                match &s.transform {
                    Some(tr) => format!(", gamma1 {:.6}", tr.gamma[0]),
                    None => ", unfitted".to_string(),
                }
            ));
        }
        out
    }
}
