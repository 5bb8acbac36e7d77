//! The reduced Kronecker power basis.
//!
//! `X^[d]` is the vector of all distinct degree-`d` monomials of the state
//! `X = (x_1, .., x_n)`. Monomials are ordered graded-lexicographically with
//! the exponent of `x_1` decreasing first, so for `n = 2`:
//!
//! ```text
//! X^[2] = (x1^2, x1 x2, x2^2)
//! X^[3] = (x1^3, x1^2 x2, x1 x2^2, x2^3)
//! ```
//!
//! No binomial multiplicities are attached: `x1 x2` appears once and its
//! coefficient lives entirely in the weights.

use nalgebra::DMatrix;

use crate::error::{check_dim, Result};

/// Identifier recorded in serialized maps so readers know how columns are laid out.
pub const BASIS_ORDERING: &str = "graded_lex_x1_desc";

/// Exponents of one monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Value of the monomial at `x`. The caller guarantees `x.len() == self.dim()`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(e, _)| **e > 0)
            .map(|(e, xi)| xi.powi(*e as i32))
            .product()
    }

    /// Partial derivative with respect to `x_var`, as `(coefficient, lowered index)`.
    /// `None` when the variable does not occur.
    pub fn derivative(&self, var: usize) -> Option<(f64, MultiIndex)> {
        let e = self.0[var];
        if e == 0 {
            return None;
        }
        let mut lowered = self.0.clone();
        lowered[var] -= 1;
        Some((e as f64, MultiIndex(lowered)))
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

/// Number of degree-`d` monomials in `n` variables, `C(n + d - 1, d)`.
pub fn basis_size(n: usize, d: usize) -> usize {
    assert!(n >= 1, "basis dimension must be positive");
    // C(n+d-1, d) built incrementally stays integral at every step.
    let mut acc: u128 = 1;
    for i in 1..=d as u128 {
        acc = acc * (n as u128 - 1 + i) / i;
    }
    acc as usize
}

/// Ordered list of all degree-`d` exponent tuples in `n` variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis {
    dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
}

impl MonomialBasis {
    pub fn new(n: usize, d: usize) -> Self {
        enumerate_monomials(n, d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|m| m == index)
    }

    /// `X^[d]` evaluated at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(self.indices.iter().map(|m| m.eval(x)).collect())
    }

    /// Jacobian of `X^[d]`: entry `(j, i)` is `d(monomial j)/dx_i`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim, x.len())?;
        let mut jac = DMatrix::zeros(self.len(), self.dim);
        for (j, m) in self.indices.iter().enumerate() {
            for i in 0..self.dim {
                if let Some((c, low)) = m.derivative(i) {
                    jac[(j, i)] = c * low.eval(x);
                }
            }
        }
        Ok(jac)
    }
}

/// Enumerates the reduced degree-`d` basis in graded-lex order, `x_1` exponent
/// decreasing first.
pub fn enumerate_monomials(n: usize, d: usize) -> MonomialBasis {
    assert!(n >= 1, "basis dimension must be positive");
    fn rec(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == n {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(n, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut indices = Vec::with_capacity(basis_size(n, d));
    rec(n, d as u32, &mut Vec::with_capacity(n), &mut indices);
    MonomialBasis {
        dim: n,
        degree: d,
        indices,
    }
}

/// `X^[d]`: all degree-`d` monomials of `x`.
pub fn kron_power(x: &[f64], d: usize) -> Vec<f64> {
    enumerate_monomials(x.len(), d)
        .evaluate(x)
        .expect("basis built from x")
}

/// Jacobian of [`kron_power`], shape `basis_size(n, d) x n`.
pub fn kron_power_jacobian(x: &[f64], d: usize) -> DMatrix<f64> {
    enumerate_monomials(x.len(), d)
        .jacobian(x)
        .expect("basis built from x")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn brute_force_count(n: usize, d: usize) -> usize {
        // Every exponent tuple in [0, d]^n whose entries sum to d.
        let mut count = 0;
        let mut e = vec![0usize; n];
        loop {
            if e.iter().sum::<usize>() == d {
                count += 1;
            }
            let mut i = 0;
            loop {
                if i == n {
                    return count;
                }
                e[i] += 1;
                if e[i] <= d {
                    break;
                }
                e[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn basis_size_examples() {
        assert_eq!(basis_size(2, 2), 3);
        assert_eq!(basis_size(2, 3), 4);
        assert_eq!(basis_size(5, 0), 1);
        assert_eq!(basis_size(3, 2), brute_force_count(3, 2));
        assert_eq!(basis_size(3, 2), 6);
    }

    #[test]
    fn enumeration_order_matches_two_variable_listing() {
        let b = enumerate_monomials(2, 2);
        let e: Vec<_> = b.indices().iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(e, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let b = enumerate_monomials(2, 3);
        let e: Vec<_> = b.indices().iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(e, vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]);
        let b = enumerate_monomials(1, 5);
        assert_eq!(b.indices(), &[MultiIndex::new(vec![5])]);
    }

    #[test]
    fn kron_power_examples() {
        assert_eq!(kron_power(&[2.0, 3.0], 2), vec![4.0, 6.0, 9.0]);
        assert_eq!(kron_power(&[0.7, -1.1], 1), vec![0.7, -1.1]);
        assert_eq!(kron_power(&[0.7, -1.1, 4.0], 0), vec![1.0]);
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        let b = enumerate_monomials(3, 2);
        assert!(b.evaluate(&[1.0, 2.0]).is_err());
        assert!(b.jacobian(&[1.0]).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let j = kron_power_jacobian(&[0.3, -0.4, 2.0], 1);
        assert_eq!(j, DMatrix::identity(3, 3));
        let j = kron_power_jacobian(&[3.0], 2);
        assert_eq!(j[(0, 0)], 6.0);
    }

    proptest! {
        #[test]
        fn enumeration_is_complete_and_unique(n in 1usize..5, d in 0usize..6) {
            let b = enumerate_monomials(n, d);
            prop_assert_eq!(b.len(), basis_size(n, d));
            let set: HashSet<_> = b.indices().iter().cloned().collect();
            prop_assert_eq!(set.len(), b.len());
            prop_assert!(b.indices().iter().all(|m| m.degree() as usize == d && m.dim() == n));
            // strictly descending lexicographic order
            prop_assert!(b.indices().windows(2).all(|w| w[0] > w[1]));
        }

        #[test]
        fn kron_power_is_homogeneous(
            x in prop::collection::vec(-2.0f64..2.0, 1..4),
            lambda in -2.0f64..2.0,
            d in 0usize..4,
        ) {
            let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
            let lhs = kron_power(&scaled, d);
            let rhs = kron_power(&x, d);
            for (a, b) in lhs.iter().zip(rhs) {
                prop_assert!((a - lambda.powi(d as i32) * b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn jacobian_matches_central_differences(
            x in prop::collection::vec(-2.0f64..2.0, 1..4),
            d in 1usize..4,
        ) {
            let h = 1e-6;
            let jac = kron_power_jacobian(&x, d);
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fp = kron_power(&xp, d);
                let fm = kron_power(&xm, d);
                for j in 0..fp.len() {
                    let fd = (fp[j] - fm[j]) / (2.0 * h);
                    let scale = fd.abs().max(jac[(j, i)].abs()).max(1.0);
                    prop_assert!((fd - jac[(j, i)]).abs() / scale <= 1e-5);
                }
            }
        }
    }
}
