//! Truncated polynomial algebra over the graded monomial basis.
//!
//! A polynomial in `n` variables of degree at most `D` is a dense coefficient
//! vector over the concatenated bases `X^[0], X^[1], .., X^[D]`. Because the
//! bases are concatenated in degree order, the index of a monomial does not
//! depend on `D`: truncating a polynomial to a lower degree is a prefix cut.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::basis::{basis_size, enumerate_monomials, MultiIndex};
use crate::error::{check_dim, Error, Result};

const NONE: usize = usize::MAX;

/// Monomials of degrees `0..=max_degree` in `dim` variables, with the lookup
/// tables needed for evaluation, differentiation and truncated products.
#[derive(Debug)]
pub struct PolySpace {
    dim: usize,
    max_degree: usize,
    monomials: Vec<MultiIndex>,
    offsets: Vec<usize>,
    lookup: HashMap<MultiIndex, usize>,
    // (lower-degree monomial, variable) with monomial = lower * x_var
    parent: Vec<(usize, usize)>,
    product: Vec<usize>,
    deriv: Vec<Vec<Option<(f64, usize)>>>,
}

impl PolySpace {
    pub fn new(dim: usize, max_degree: usize) -> Self {
        assert!(dim >= 1, "polynomial space needs at least one variable");
        let mut monomials = Vec::new();
        let mut offsets = Vec::with_capacity(max_degree + 2);
        for d in 0..=max_degree {
            offsets.push(monomials.len());
            monomials.extend(enumerate_monomials(dim, d).indices().iter().cloned());
        }
        offsets.push(monomials.len());
        let lookup: HashMap<MultiIndex, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let total = monomials.len();
        let mut parent = vec![(NONE, NONE); total];
        let mut deriv = vec![vec![None; dim]; total];
        for (i, m) in monomials.iter().enumerate() {
            for var in 0..dim {
                if let Some((c, low)) = m.derivative(var) {
                    let j = lookup[&low];
                    deriv[i][var] = Some((c, j));
                    if parent[i].0 == NONE {
                        parent[i] = (j, var);
                    }
                }
            }
        }

        let mut product = vec![NONE; total * total];
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if a.degree() + b.degree() > max_degree as u32 {
                    continue;
                }
                let e: Vec<u32> = a
                    .exponents()
                    .iter()
                    .zip(b.exponents())
                    .map(|(x, y)| x + y)
                    .collect();
                product[i * total + j] = lookup[&MultiIndex::new(e)];
            }
        }

        Self {
            dim,
            max_degree,
            monomials,
            offsets,
            lookup,
            parent,
            product,
            deriv,
        }
    }

    /// Process-wide cached space; spaces are immutable so sharing is free.
    pub fn shared(dim: usize, max_degree: usize) -> Arc<PolySpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<PolySpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((dim, max_degree))
            .or_insert_with(|| Arc::new(PolySpace::new(dim, max_degree)))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of monomials of degree `0..=max_degree`.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Column range of the degree-`d` block.
    pub fn degree_range(&self, d: usize) -> Range<usize> {
        self.offsets[d]..self.offsets[d + 1]
    }

    pub fn monomial(&self, i: usize) -> &MultiIndex {
        &self.monomials[i]
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn index_of(&self, m: &MultiIndex) -> Option<usize> {
        self.lookup.get(m).copied()
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.monomials[i].degree() as usize
    }

    /// `d(monomial i)/dx_var` as `(coefficient, monomial index)`.
    pub fn derivative(&self, i: usize, var: usize) -> Option<(f64, usize)> {
        self.deriv[i][var]
    }

    /// Index of `monomial i * monomial j`, if its degree fits the space.
    pub fn product_index(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.product[i * self.len() + j];
        (k != NONE).then_some(k)
    }

    /// Every monomial evaluated at `x`, written into `out` (length `self.len()`).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        out[0] = 1.0;
        for i in 1..self.len() {
            let (p, v) = self.parent[i];
            out[i] = out[p] * x[v];
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Jacobian of the monomial vector given its values: `len x dim`.
    pub fn jacobian_from_values(&self, values: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.len(), self.dim);
        for i in 1..self.len() {
            for var in 0..self.dim {
                if let Some((c, j)) = self.deriv[i][var] {
                    jac[(i, var)] = c * values[j];
                }
            }
        }
        jac
    }

    /// Product of two polynomials of this space with terms above `max_degree` dropped.
    pub fn mul(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let row = &self.product[i * n..(i + 1) * n];
            for (j, &bj) in b.iter().enumerate() {
                let k = row[j];
                if bj != 0.0 && k != NONE {
                    out[k] += ai * bj;
                }
            }
        }
        out
    }

    /// Substitution table: row `i` holds the coefficients, over `target`, of
    /// monomial `i` of `self` evaluated at the polynomials `comps`, truncated
    /// at `target.max_degree()`.
    pub fn substitute(&self, target: &PolySpace, comps: &[Vec<f64>]) -> DMatrix<f64> {
        assert_eq!(comps.len(), self.dim);
        assert_eq!(target.dim, self.dim);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(self.len());
        let mut one = vec![0.0; target.len()];
        one[0] = 1.0;
        rows.push(one);
        for i in 1..self.len() {
            let (p, v) = self.parent[i];
            let r = target.mul(&rows[p], &comps[v]);
            rows.push(r);
        }
        DMatrix::from_fn(self.len(), target.len(), |i, j| rows[i][j])
    }

    /// Rows of a coefficient matrix as polynomials of this space, truncating
    /// or zero-padding as needed.
    pub fn rows_as_polys(&self, coeffs: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..coeffs.nrows())
            .map(|r| {
                let mut p = vec![0.0; self.len()];
                let m = p.len().min(coeffs.ncols());
                for (j, v) in p.iter_mut().enumerate().take(m) {
                    *v = coeffs[(r, j)];
                }
                p
            })
            .collect()
    }
}

/// Splits a concatenated coefficient matrix into its per-degree blocks.
pub fn split_blocks(space: &PolySpace, coeffs: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    (0..=space.max_degree())
        .map(|d| {
            let r = space.degree_range(d);
            coeffs.columns(r.start, r.len()).into_owned()
        })
        .collect()
}

/// Joins per-degree blocks `B_0..B_k` (each `rows x basis_size(n, d)`) into one
/// concatenated matrix. `n` is the number of variables.
pub fn join_blocks(n: usize, blocks: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    if blocks.is_empty() {
        return Err(Error::Shape("at least the degree-0 block is required".into()));
    }
    let rows = blocks[0].nrows();
    let mut total = 0;
    for (d, b) in blocks.iter().enumerate() {
        let want = basis_size(n, d);
        if b.nrows() != rows || b.ncols() != want {
            return Err(Error::Shape(format!(
                "block {d} is {}x{}, expected {rows}x{want}",
                b.nrows(),
                b.ncols()
            )));
        }
        total += want;
    }
    let mut out = DMatrix::zeros(rows, total);
    let mut col = 0;
    for b in blocks {
        out.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    Ok(out)
}

/// Expansion of `M(X)^[d]` over input monomials of degree `0..=k`.
///
/// `blocks` are the coefficient blocks `W_0..W_m` of a polynomial map of
/// `n = W_0.nrows()` components. Returns `k + 1` blocks; block `j` has shape
/// `basis_size(n, d) x basis_size(n, j)`. Terms of degree above `k` are dropped.
pub fn compose_power_truncate(
    blocks: &[DMatrix<f64>],
    d: usize,
    k: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let n = blocks
        .first()
        .map(|b| b.nrows())
        .ok_or_else(|| Error::Shape("empty coefficient list".into()))?;
    if n == 0 {
        return Err(Error::Shape("map has no components".into()));
    }
    let coeffs = join_blocks(n, blocks)?;
    let target = PolySpace::shared(n, k);
    let rows = PolySpace::shared(n, d);
    let comps = target.rows_as_polys(&coeffs);
    let table = rows.substitute(&target, &comps);
    let r = rows.degree_range(d);
    let block = table.rows(r.start, r.len()).into_owned();
    Ok(split_blocks(&target, &block))
}

/// The matrix `W^[d]` satisfying `W^[d] X^[d] = (W X)^[d]`.
pub fn lift_linear(w: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    if w.nrows() != w.ncols() {
        return Err(Error::NotSquare {
            rows: w.nrows(),
            cols: w.ncols(),
        });
    }
    let n = w.nrows();
    let blocks = vec![DMatrix::zeros(n, 1), w.clone()];
    let mut out = compose_power_truncate(&blocks, d, d)?;
    Ok(out.pop().expect("k + 1 blocks"))
}
