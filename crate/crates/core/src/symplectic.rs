//! Symplectic residual of a Taylor map in coefficient space.
//!
//! For a map `M` with state Jacobian `Jac(X)` the residual
//! `R(X) = Jac(X)^T J Jac(X) - J` is itself a polynomial matrix of degree at
//! most `2(k - 1)`. `M` is symplectic for every `X` exactly when every
//! coefficient of every entry of `R` vanishes, so the penalty is the sum of
//! their squares and never needs a sample of states.
//!
//! `R` is antisymmetric, so only the entries strictly above the diagonal are
//! kept; the penalty therefore counts each independent constraint once.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::map::TaylorMap;
use crate::poly::PolySpace;

/// The antisymmetric form `J` defining symplecticity.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticStructure {
    j: DMatrix<f64>,
}

impl SymplecticStructure {
    /// `J = [[0, I], [-I, 0]]` for states ordered `(q_1..q_m, p_1..p_m)`.
    pub fn canonical(n: usize) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::OddDimension(n));
        }
        let m = n / 2;
        let mut j = DMatrix::zeros(n, n);
        for i in 0..m {
            j[(i, m + i)] = 1.0;
            j[(m + i, i)] = -1.0;
        }
        Ok(Self { j })
    }

    /// Block-diagonal `J` with one `[[0, 1], [-1, 0]]` block per plane, for
    /// states ordered `(q_1, p_1, q_2, p_2, ..)` such as `(x, x', y, y')`.
    pub fn interleaved(n: usize) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::OddDimension(n));
        }
        let mut j = DMatrix::zeros(n, n);
        for i in (0..n).step_by(2) {
            j[(i, i + 1)] = 1.0;
            j[(i + 1, i)] = -1.0;
        }
        Ok(Self { j })
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.j
    }
}

/// One independent residual entry `R[row][col]` (`row < col`) as coefficients
/// over the monomials of degree `0..=max_degree`.
#[derive(Clone, Debug)]
pub struct ResidualEntry {
    pub row: usize,
    pub col: usize,
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SymplecticResidual {
    pub dim: usize,
    pub max_degree: usize,
    pub entries: Vec<ResidualEntry>,
}

impl SymplecticResidual {
    pub fn penalty(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| e.coeffs.iter())
            .map(|c| c * c)
            .sum()
    }

    /// Number of scalar constraints (coefficients) in the residual.
    pub fn constraint_count(&self) -> usize {
        self.entries.iter().map(|e| e.coeffs.len()).sum()
    }

    pub fn entry(&self, row: usize, col: usize) -> Option<&ResidualEntry> {
        self.entries.iter().find(|e| e.row == row && e.col == col)
    }
}

struct Expansion {
    space: std::sync::Arc<PolySpace>,
    // J * Jac
    k: Vec<Vec<f64>>,
    residual: Vec<ResidualEntry>,
}

fn expand(map: &TaylorMap, form: &SymplecticStructure) -> Result<Expansion> {
    let n = map.dim();
    if n % 2 != 0 {
        return Err(Error::OddDimension(n));
    }
    if form.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: form.dim(),
        });
    }
    let order = map.order();
    let space = PolySpace::shared(n, 2 * order.saturating_sub(1));
    let src = map.space();
    let w = map.weights();
    let len = space.len();
    let j = form.matrix();

    // jac[r * n + c] = d M_r / d x_c
    let mut jac = vec![vec![0.0; len]; n * n];
    for m in 1..src.len() {
        for c in 0..n {
            if let Some((coef, low)) = src.derivative(m, c) {
                for r in 0..n {
                    jac[r * n + c][low] += coef * w[(r, m)];
                }
            }
        }
    }
    let mut k = vec![vec![0.0; len]; n * n];
    for r in 0..n {
        for s in 0..n {
            let jrs = j[(r, s)];
            if jrs == 0.0 {
                continue;
            }
            for c in 0..n {
                for (dst, v) in k[r * n + c].iter_mut().zip(&jac[s * n + c]) {
                    *dst += jrs * v;
                }
            }
        }
    }
    let mut residual = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            let mut coeffs = vec![0.0; len];
            for r in 0..n {
                let p = space.mul(&jac[r * n + a], &k[r * n + b]);
                for (dst, v) in coeffs.iter_mut().zip(p) {
                    *dst += v;
                }
            }
            coeffs[0] -= j[(a, b)];
            residual.push(ResidualEntry { row: a, col: b, coeffs });
        }
    }
    Ok(Expansion {
        space,
        k,
        residual,
    })
}

/// Coefficients of the independent entries of `Jac^T J Jac - J`.
pub fn symplectic_residual(
    map: &TaylorMap,
    form: &SymplecticStructure,
) -> Result<SymplecticResidual> {
    let e = expand(map, form)?;
    Ok(SymplecticResidual {
        dim: map.dim(),
        max_degree: e.space.max_degree(),
        entries: e.residual,
    })
}

/// Sum of squared residual coefficients; zero iff the map is symplectic everywhere.
pub fn symplectic_penalty(map: &TaylorMap, form: &SymplecticStructure) -> Result<f64> {
    Ok(symplectic_residual(map, form)?.penalty())
}

/// Penalty together with its gradient with respect to every weight of `map`.
pub fn symplectic_penalty_gradient(
    map: &TaylorMap,
    form: &SymplecticStructure,
) -> Result<(f64, DMatrix<f64>)> {
    let e = expand(map, form)?;
    let n = map.dim();
    let src = map.space();
    let space = &e.space;
    let penalty: f64 = e
        .residual
        .iter()
        .flat_map(|r| r.coeffs.iter())
        .map(|c| c * c)
        .sum();

    // <R, x^low * K> with x^low a single monomial
    let shifted_dot = |res: &[f64], low: usize, poly: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (i, v) in poly.iter().enumerate() {
            if *v != 0.0 {
                if let Some(p) = space.product_index(low, i) {
                    acc += v * res[p];
                }
            }
        }
        acc
    };

    // dR_ab / dJac_rc is K_rb for c = a and -K_ra for c = b.
    let mut grad = DMatrix::zeros(n, src.len());
    for entry in &e.residual {
        if entry.coeffs.iter().all(|c| *c == 0.0) {
            continue;
        }
        let (a, b) = (entry.row, entry.col);
        for m in 1..src.len() {
            let da = src.derivative(m, a);
            let db = src.derivative(m, b);
            if da.is_none() && db.is_none() {
                continue;
            }
            for r in 0..n {
                let mut g = 0.0;
                if let Some((coef, low)) = da {
                    g += coef * shifted_dot(&entry.coeffs, low, &e.k[r * n + b]);
                }
                if let Some((coef, low)) = db {
                    g -= coef * shifted_dot(&entry.coeffs, low, &e.k[r * n + a]);
                }
                grad[(r, m)] += 2.0 * g;
            }
        }
    }
    Ok((penalty, grad))
}

impl TaylorMap {
    /// Penalty against the canonical structure `[[0, I], [-I, 0]]`.
    pub fn symplectic_penalty(&self) -> Result<f64> {
        symplectic_penalty(self, &SymplecticStructure::canonical(self.dim())?)
    }
}
