//! Truncated polynomial transformations
//! `X -> W_0 + W_1 X + W_2 X^[2] + .. + W_k X^[k]`.
//!
//! The weights are stored as one `n x len` matrix whose columns run over the
//! concatenated bases of degrees `0..=k`; [`TaylorMap::block`] exposes the
//! individual `W_d`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BASIS_ORDERING;
use crate::error::{check_dim, Error, Result};
use crate::poly::{join_blocks, split_blocks, PolySpace};

#[derive(Clone)]
pub struct TaylorMap {
    space: Arc<PolySpace>,
    weights: DMatrix<f64>,
}

impl std::fmt::Debug for TaylorMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaylorMap")
            .field("dim", &self.dim())
            .field("order", &self.order())
            .field("weights", &self.blocks())
            .finish()
    }
}

impl PartialEq for TaylorMap {
    fn eq(&self, other: &Self) -> bool {
        self.order() == other.order() && self.weights == other.weights
    }
}

impl TaylorMap {
    /// Builds a map from blocks `W_0..W_k`; `W_d` must be `n x basis_size(n, d)`.
    pub fn from_blocks(blocks: &[DMatrix<f64>]) -> Result<Self> {
        let n = blocks
            .first()
            .map(|b| b.nrows())
            .ok_or_else(|| Error::Shape("a Taylor map needs at least W_0".into()))?;
        if n == 0 {
            return Err(Error::Shape("a Taylor map needs at least one component".into()));
        }
        let weights = join_blocks(n, blocks)?;
        Self::from_weights(n, blocks.len() - 1, weights)
    }

    /// Builds a map from the concatenated `n x len` weight matrix.
    pub fn from_weights(dim: usize, order: usize, weights: DMatrix<f64>) -> Result<Self> {
        let space = PolySpace::shared(dim, order);
        if weights.nrows() != dim || weights.ncols() != space.len() {
            return Err(Error::Shape(format!(
                "weights are {}x{}, expected {}x{}",
                weights.nrows(),
                weights.ncols(),
                dim,
                space.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Shape("weights must be finite".into()));
        }
        Ok(Self { space, weights })
    }

    /// `W_0 = 0`, `W_1 = I`, higher blocks zero.
    pub fn identity(dim: usize, order: usize) -> Self {
        let space = PolySpace::shared(dim, order.max(1));
        let mut weights = DMatrix::zeros(dim, space.len());
        let lin = space.degree_range(1);
        weights
            .columns_mut(lin.start, dim)
            .copy_from(&DMatrix::identity(dim, dim));
        Self { space, weights }
    }

    /// Linear map `X -> A X` of the given order (higher blocks zero).
    pub fn linear(a: &DMatrix<f64>, order: usize) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let mut map = Self::identity(a.nrows(), order);
        let lin = map.space.degree_range(1);
        map.weights.columns_mut(lin.start, a.ncols()).copy_from(a);
        Ok(map)
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn order(&self) -> usize {
        self.space.max_degree()
    }

    pub fn space(&self) -> &Arc<PolySpace> {
        &self.space
    }

    /// Concatenated weights `[W_0 | W_1 | .. | W_k]`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Replaces the concatenated weights; shape must not change.
    pub fn set_weights(&mut self, weights: DMatrix<f64>) -> Result<()> {
        if weights.shape() != self.weights.shape() {
            return Err(Error::Shape(format!(
                "weights are {:?}, expected {:?}",
                weights.shape(),
                self.weights.shape()
            )));
        }
        self.weights = weights;
        Ok(())
    }

    pub(crate) fn weights_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.weights
    }

    pub fn block(&self, d: usize) -> DMatrix<f64> {
        let r = self.space.degree_range(d);
        self.weights.columns(r.start, r.len()).into_owned()
    }

    pub fn blocks(&self) -> Vec<DMatrix<f64>> {
        split_blocks(&self.space, &self.weights)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut mons = vec![0.0; self.space.len()];
        self.space.eval_into(x, &mut mons);
        Ok(self.apply_monomials(&mons))
    }

    pub(crate) fn apply_monomials(&self, mons: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (j, m) in mons.iter().enumerate() {
            if *m == 0.0 {
                continue;
            }
            let col = self.weights.column(j);
            for r in 0..n {
                out[r] += col[r] * m;
            }
        }
        out
    }

    /// `d(output r)/d(x_c)` at `x`.
    pub fn jacobian_state(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        let mons = self.space.eval(x)?;
        Ok(self.jacobian_from_monomials(&mons))
    }

    pub(crate) fn jacobian_from_monomials(&self, mons: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for j in 1..self.space.len() {
            let col = self.weights.column(j);
            for c in 0..n {
                if let Some((coef, low)) = self.space.derivative(j, c) {
                    let dm = coef * mons[low];
                    if dm != 0.0 {
                        for r in 0..n {
                            jac[(r, c)] += col[r] * dm;
                        }
                    }
                }
            }
        }
        jac
    }

    /// Gradient of `<upstream, apply(x)>` with respect to every weight, shaped
    /// like [`TaylorMap::weights`]: the outer product `upstream (X^[0..k])^T`.
    pub fn weight_gradients(&self, x: &[f64], upstream: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), upstream.len())?;
        let mons = self.space.eval(x)?;
        Ok(DVector::from_column_slice(upstream) * DVector::from_vec(mons).transpose())
    }

    /// `outer(inner(X))` with every monomial above degree `k` dropped.
    pub fn compose(outer: &TaylorMap, inner: &TaylorMap, k: usize) -> Result<TaylorMap> {
        check_dim(outer.dim(), inner.dim())?;
        let target = PolySpace::shared(inner.dim(), k);
        let comps = target.rows_as_polys(&inner.weights);
        let table = outer.space.substitute(&target, &comps);
        TaylorMap::from_weights(inner.dim(), k, &outer.weights * table)
    }

    /// Same map re-expressed at another order (zero-padded or truncated).
    pub fn with_order(&self, order: usize) -> TaylorMap {
        let space = PolySpace::shared(self.dim(), order);
        let mut weights = DMatrix::zeros(self.dim(), space.len());
        let m = space.len().min(self.space.len());
        weights
            .columns_mut(0, m)
            .copy_from(&self.weights.columns(0, m));
        TaylorMap { space, weights }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MapFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<MapFile>(s)?.try_into()
    }
}

/// On-disk form of a [`TaylorMap`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapFile {
    pub dim: usize,
    pub order: usize,
    pub basis_ordering: String,
    /// `weights[d]` lists the rows of `W_d`.
    pub weights: Vec<Vec<Vec<f64>>>,
}

pub(crate) fn block_rows(b: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..b.nrows())
        .map(|r| b.row(r).iter().copied().collect())
        .collect()
}

pub(crate) fn block_from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(format!("every row must have {ncols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

pub(crate) fn check_ordering(ordering: &str) -> Result<()> {
    if ordering != BASIS_ORDERING {
        return Err(Error::Parse(format!(
            "unsupported basis ordering {ordering:?}, expected {BASIS_ORDERING:?}"
        )));
    }
    Ok(())
}

impl From<&TaylorMap> for MapFile {
    fn from(m: &TaylorMap) -> Self {
        MapFile {
            dim: m.dim(),
            order: m.order(),
            basis_ordering: BASIS_ORDERING.to_string(),
            weights: m.blocks().iter().map(block_rows).collect(),
        }
    }
}

impl TryFrom<MapFile> for TaylorMap {
    type Error = Error;

    fn try_from(f: MapFile) -> Result<Self> {
        check_ordering(&f.basis_ordering)?;
        if f.weights.len() != f.order + 1 {
            return Err(Error::Shape(format!(
                "order {} needs {} weight blocks, found {}",
                f.order,
                f.order + 1,
                f.weights.len()
            )));
        }
        let blocks = f
            .weights
            .iter()
            .enumerate()
            .map(|(d, rows)| {
                if rows.len() != f.dim {
                    return Err(Error::Shape(format!("W_{d} must have {} rows", f.dim)));
                }
                block_from_rows(rows, crate::basis::basis_size(f.dim, d))
            })
            .collect::<Result<Vec<_>>>()?;
        TaylorMap::from_blocks(&blocks)
    }
}
