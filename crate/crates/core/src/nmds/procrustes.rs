use nalgebra::DMatrix;

use crate::{Error, Result};

/// `b` mapped onto `a` by the best translation, orthogonal transform and
/// uniform scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesFit {
    pub aligned: Vec<Vec<f64>>,
    pub scale: f64,
    /// Row-vector rotation: aligned = scale · (b − b̄) · rotation + ā.
    pub rotation: Vec<Vec<f64>>,
    /// Σ‖a − aligned‖² / Σ‖a − ā‖².
    pub residual: f64,
}

pub(crate) fn to_matrix(points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    let d = points.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("empty configuration".into()));
    }
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidArgument("configuration rows differ in length".into()));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| points[i][j]))
}

pub(crate) fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn centered(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let means: Vec<f64> = (0..m.ncols()).map(|j| m.column(j).mean()).collect();
    let c = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - means[j]);
    (c, means)
}

pub fn procrustes(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<ProcrustesFit> {
    let (ma, mb) = (to_matrix(a)?, to_matrix(b)?);
    if ma.shape() != mb.shape() {
        return Err(Error::InvalidArgument(format!("configurations of shape {:?} and {:?}", ma.shape(), mb.shape())));
    }
    let (ac, abar) = centered(&ma);
    let (bc, _) = centered(&mb);
    let (na, nb) = (ac.norm_squared(), bc.norm_squared());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("configuration has zero spread".into()));
    }
    let svd = (bc.transpose() * &ac).svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let rotation = u * v_t;
    let scale = svd.singular_values.sum() / nb;
    let mut fitted = (&bc * &rotation) * scale;
    for mut row in fitted.row_iter_mut() {
        for (x, m) in row.iter_mut().zip(&abar) {
            *x += m;
        }
    }
    let residual = (&ma - &fitted).norm_squared() / na;
    Ok(ProcrustesFit { aligned: from_matrix(&fitted), scale, rotation: from_matrix(&rotation), residual })
}
