//! Two-view canonical correlation analysis.
//!
//! The canonical pairs are found by whitening each view with the symmetric
//! inverse square root of its (optionally ridged) covariance block and taking
//! the SVD of the whitened cross-covariance
//!
//! ```text
//! T = Vxx^{-1/2} · Vxy · Vyy^{-1/2} = U · diag(γ) · Wᵀ
//! a = Vxx^{-1/2} · U,   b = Vyy^{-1/2} · W
//! ```
//!
//! which yields the same eigenpairs as `Vxx⁻¹VxyVyy⁻¹Vyx â = Λ² â` without
//! forming the non-symmetric product.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::matrixio::{row_means, subtract_column, FeatureSet};

pub const DEFAULT_RIDGE_REL: f64 = 1e-4;

const CCAT_MAGIC: &[u8; 6] = b"CCAT1\0";

/// Eigenvalues of a covariance block at or below `λ_max · p · SINGULAR_REL`
/// make the block unusable without ridge.
const SINGULAR_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBlocks {
    pub vxx: DMatrix<f64>,
    pub vyy: DMatrix<f64>,
    pub vxy: DMatrix<f64>,
    pub vyx: DMatrix<f64>,
    pub n: usize,
}

/// Unbiased covariance `x·yᵀ/(n−1)` of two already centred matrices.
fn centered_cov(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let denom = (x.ncols() - 1) as f64;
    (x * y.transpose()) / denom
}

/// Unbiased cross-covariance of two sample matrices, centring both.
pub fn sample_covariance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let xc = subtract_column(x, &row_means(x));
    let yc = subtract_column(y, &row_means(y));
    centered_cov(&xc, &yc)
}

fn centered_view(fs: &FeatureSet) -> (DMatrix<f64>, DVector<f64>) {
    if fs.centered {
        (fs.matrix.data().clone(), fs.mean.clone())
    } else {
        let mean = row_means(fs.matrix.data());
        (subtract_column(fs.matrix.data(), &mean), mean)
    }
}

fn check_pair(x: &FeatureSet, y: &FeatureSet, min_n: usize) -> Result<usize> {
    if x.n() != y.n() {
        return Err(Error::Dimension(format!(
            "views {:?} and {:?} have {} and {} samples",
            x.name,
            y.name,
            x.n(),
            y.n()
        )));
    }
    if x.n() < min_n {
        return Err(Error::Degenerate(format!(
            "need at least {min_n} samples, got {}",
            x.n()
        )));
    }
    Ok(x.n())
}

fn blocks_from_centered(xc: &DMatrix<f64>, yc: &DMatrix<f64>) -> CovarianceBlocks {
    let vxy = centered_cov(xc, yc);
    CovarianceBlocks {
        vxx: centered_cov(xc, xc),
        vyy: centered_cov(yc, yc),
        vyx: vxy.transpose(),
        vxy,
        n: xc.ncols(),
    }
}

/// Covariance blocks of the joint `[x; y]` sample matrix. Uncentred inputs
/// are centred internally.
pub fn covariance_blocks(x: &FeatureSet, y: &FeatureSet) -> Result<CovarianceBlocks> {
    check_pair(x, y, 2)?;
    let (xc, _) = centered_view(x);
    let (yc, _) = centered_view(y);
    Ok(blocks_from_centered(&xc, &yc))
}

/// A fitted pair of canonical projections.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaTransform {
    /// `p × r`, columns give unit-variance training variates.
    pub a: DMatrix<f64>,
    /// `q × r`.
    pub b: DMatrix<f64>,
    /// Canonical correlations, non-increasing, clipped to `[0, 1]`.
    pub gamma: DVector<f64>,
    pub x_mean: DVector<f64>,
    pub y_mean: DVector<f64>,
    pub ridge: f64,
}

impl CcaTransform {
    pub fn r(&self) -> usize {
        self.gamma.len()
    }

    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    pub fn q(&self) -> usize {
        self.b.nrows()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::with_magic(CCAT_MAGIC);
        enc.field(&codec::encode_matrix(&self.a))
            .field(&codec::encode_matrix(&self.b))
            .field(&codec::encode_vector(&self.gamma))
            .field(&codec::encode_vector(&self.x_mean))
            .field(&codec::encode_vector(&self.y_mean))
            .field(&self.ridge.to_le_bytes())
            .field(&(self.r() as u64).to_le_bytes());
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, CCAT_MAGIC, "CCAT1")?;
        let a = codec::decode_matrix(dec.field()?)?;
        let b = codec::decode_matrix(dec.field()?)?;
        let gamma = codec::decode_vector(dec.field()?)?;
        let x_mean = codec::decode_vector(dec.field()?)?;
        let y_mean = codec::decode_vector(dec.field()?)?;
        let ridge = f64::from_le_bytes(
            dec.field()?
                .try_into()
                .map_err(|_| Error::Parse("CCAT1: ridge field is not 8 bytes".into()))?,
        );
        let r = u64::from_le_bytes(
            dec.field()?
                .try_into()
                .map_err(|_| Error::Parse("CCAT1: rank field is not 8 bytes".into()))?,
        ) as usize;
        dec.finish()?;
        let t = CcaTransform {
            a,
            b,
            gamma,
            x_mean,
            y_mean,
            ridge,
        };
        if t.a.ncols() != r || t.b.ncols() != r || t.gamma.len() != r {
            return Err(Error::Parse(format!("CCAT1: inconsistent rank {r}")));
        }
        if t.x_mean.len() != t.p() || t.y_mean.len() != t.q() {
            return Err(Error::Parse("CCAT1: mean length does not match projection".into()));
        }
        Ok(t)
    }
}

/// Symmetric inverse square root `V^{-1/2}` of a covariance block.
fn inverse_sqrt(v: &DMatrix<f64>, which: &str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(v.clone());
    let max = eig.eigenvalues.max();
    let floor = max * v.nrows() as f64 * SINGULAR_REL;
    if !(max > 0.0) || eig.eigenvalues.iter().any(|&l| l <= floor) {
        return Err(Error::Singular(format!(
            "covariance block {which} is singular (eigenvalue range [{:.3e}, {max:.3e}]); use a positive ridge",
            eig.eigenvalues.min()
        )));
    }
    let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let w = &eig.eigenvectors * scale * eig.eigenvectors.transpose();
    // exact symmetry
    Ok((&w + w.transpose()) * 0.5)
}

fn ridged(v: &DMatrix<f64>, ridge_rel: f64) -> DMatrix<f64> {
    if ridge_rel == 0.0 {
        return v.clone();
    }
    let bump = ridge_rel * v.diagonal().mean();
    let mut out = v.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += bump;
    }
    out
}

/// Fits CCA between two views with relative ridge `ridge_rel`
/// (`V ← V + ridge_rel · mean(diag V) · I` on each auto-covariance block).
pub fn fit_cca(x: &FeatureSet, y: &FeatureSet, ridge_rel: f64) -> Result<CcaTransform> {
    if !(ridge_rel >= 0.0) || !ridge_rel.is_finite() {
        return Err(Error::Range(format!("ridge_rel must be finite and >= 0, got {ridge_rel}")));
    }
    let n = check_pair(x, y, 3)?;
    let (xc, x_mean) = centered_view(x);
    let (yc, y_mean) = centered_view(y);
    let blocks = blocks_from_centered(&xc, &yc);
    let (p, q) = (xc.nrows(), yc.nrows());

    let wx = inverse_sqrt(&ridged(&blocks.vxx, ridge_rel), "Vxx")?;
    let wy = inverse_sqrt(&ridged(&blocks.vyy, ridge_rel), "Vyy")?;
    let whitened = &wx * &blocks.vxy * &wy;
    let svd = whitened.svd(true, true);
    let u = svd.u.as_ref().expect("left vectors requested");
    let v_t = svd.v_t.as_ref().expect("right vectors requested");
    let sv = &svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let s_max = order.first().map_or(0.0, |&i| sv[i]);
    let tol = p.max(q) as f64 * f64::EPSILON * s_max;
    let r = order
        .iter()
        .take_while(|&&i| sv[i] > tol)
        .count()
        .min(n - 1)
        .min(p)
        .min(q);
    if r == 0 {
        return Err(Error::Degenerate(
            "cross-covariance has no non-zero canonical correlation".into(),
        ));
    }

    let mut a = DMatrix::zeros(p, r);
    let mut b = DMatrix::zeros(q, r);
    let mut gamma = DVector::zeros(r);
    for (k, &idx) in order.iter().take(r).enumerate() {
        let mut ak = &wx * u.column(idx);
        let mut bk = &wy * v_t.row(idx).transpose();

        let var_a = (ak.transpose() * &blocks.vxx * &ak)[(0, 0)];
        if var_a > 0.0 {
            ak /= var_a.sqrt();
        }
        let var_b = (bk.transpose() * &blocks.vyy * &bk)[(0, 0)];
        if var_b > 0.0 {
            bk /= var_b.sqrt();
        }

        let pivot = ak.iamax();
        if ak[pivot] < 0.0 {
            ak.neg_mut();
        }
        if (ak.transpose() * &blocks.vxy * &bk)[(0, 0)] < 0.0 {
            bk.neg_mut();
        }

        a.set_column(k, &ak);
        b.set_column(k, &bk);
        gamma[k] = sv[idx].clamp(0.0, 1.0);
    }

    Ok(CcaTransform {
        a,
        b,
        gamma,
        x_mean,
        y_mean,
        ridge: ridge_rel,
    })
}

/// Paired canonical variates `X* = aᵀ(X − x̄)`, `Y* = bᵀ(Y − ȳ)`, both `r × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalVariates {
    pub xstar: DMatrix<f64>,
    pub ystar: DMatrix<f64>,
}

pub fn project(
    t: &CcaTransform,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<CanonicalVariates> {
    if x.nrows() != t.p() || y.nrows() != t.q() {
        return Err(Error::Dimension(format!(
            "transform expects {}/{} features, got {}/{}",
            t.p(),
            t.q(),
            x.nrows(),
            y.nrows()
        )));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::Dimension(format!(
            "views have {} and {} samples",
            x.ncols(),
            y.ncols()
        )));
    }
    Ok(CanonicalVariates {
        xstar: t.a.transpose() * subtract_column(x, &t.x_mean),
        ystar: t.b.transpose() * subtract_column(y, &t.y_mean),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FuseMode {
    #[default]
    Sum,
    Concat,
}

impl FuseMode {
    pub fn tag(self) -> u8 {
        match self {
            FuseMode::Sum => 0,
            FuseMode::Concat => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(FuseMode::Sum),
            1 => Ok(FuseMode::Concat),
            other => Err(Error::Parse(format!("unknown fuse mode tag {other}"))),
        }
    }
}

impl fmt::Display for FuseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FuseMode::Sum => "sum",
            FuseMode::Concat => "concat",
        })
    }
}

impl Serialize for FuseMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl FromStr for FuseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" => Ok(FuseMode::Sum),
            "concat" => Ok(FuseMode::Concat),
            other => Err(Error::Config(format!("unknown fuse mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeatures {
    pub data: DMatrix<f64>,
    pub mode: FuseMode,
}

/// `M = X* + Y*`.
pub fn fuse_sum(v: &CanonicalVariates) -> Result<FusedFeatures> {
    if v.xstar.shape() != v.ystar.shape() {
        return Err(Error::Dimension(format!(
            "cannot sum variates of shape {:?} and {:?}",
            v.xstar.shape(),
            v.ystar.shape()
        )));
    }
    Ok(FusedFeatures {
        data: &v.xstar + &v.ystar,
        mode: FuseMode::Sum,
    })
}

/// Stacks `X*` over `Y*`.
pub fn fuse_concat(v: &CanonicalVariates) -> Result<FusedFeatures> {
    let (rx, n) = v.xstar.shape();
    let (ry, ny) = v.ystar.shape();
    if n != ny {
        return Err(Error::Dimension(format!(
            "cannot stack variates with {n} and {ny} columns"
        )));
    }
    let mut data = DMatrix::zeros(rx + ry, n);
    data.rows_mut(0, rx).copy_from(&v.xstar);
    data.rows_mut(rx, ry).copy_from(&v.ystar);
    Ok(FusedFeatures {
        data,
        mode: FuseMode::Concat,
    })
}

pub fn fuse(v: &CanonicalVariates, mode: FuseMode) -> Result<FusedFeatures> {
    match mode {
        FuseMode::Sum => fuse_sum(v),
        FuseMode::Concat => fuse_concat(v),
    }
}
