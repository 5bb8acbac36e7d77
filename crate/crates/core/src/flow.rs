//! From polynomial ODEs to Taylor maps.
//!
//! Substituting `X(t) = M_t(X_0)` into `X' = P_0 + P_1 X + .. + P_k X^[k]`
//! and collecting powers of `X_0` gives an ODE for the weights of `M_t`
//! that does not involve `X_0`. It is integrated once from the identity map.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{basis_size, BASIS_ORDERING};
use crate::error::{check_dim, Error, Result};
use crate::map::{block_from_rows, block_rows, check_ordering, TaylorMap};
use crate::poly::{join_blocks, split_blocks, PolySpace};

/// Autonomous right-hand side `F(X) = sum_d P_d X^[d]`.
#[derive(Clone)]
pub struct PolynomialOde {
    space: Arc<PolySpace>,
    coeffs: DMatrix<f64>,
}

impl std::fmt::Debug for PolynomialOde {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolynomialOde")
            .field("dim", &self.dim())
            .field("order", &self.order())
            .field("coeffs", &self.blocks())
            .finish()
    }
}

impl PartialEq for PolynomialOde {
    fn eq(&self, other: &Self) -> bool {
        self.order() == other.order() && self.coeffs == other.coeffs
    }
}

impl PolynomialOde {
    pub fn from_blocks(blocks: &[DMatrix<f64>]) -> Result<Self> {
        let n = blocks
            .first()
            .map(|b| b.nrows())
            .ok_or_else(|| Error::Shape("an ODE needs at least P_0".into()))?;
        if n == 0 {
            return Err(Error::Shape("an ODE needs at least one component".into()));
        }
        let coeffs = join_blocks(n, blocks)?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Shape("ODE coefficients must be finite".into()));
        }
        Ok(Self {
            space: PolySpace::shared(n, blocks.len() - 1),
            coeffs,
        })
    }

    /// `X' = 0` with blocks up to `order`.
    pub fn zero(dim: usize, order: usize) -> Self {
        let space = PolySpace::shared(dim, order);
        let coeffs = DMatrix::zeros(dim, space.len());
        Self { space, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn order(&self) -> usize {
        self.space.max_degree()
    }

    pub fn block(&self, d: usize) -> DMatrix<f64> {
        let r = self.space.degree_range(d);
        self.coeffs.columns(r.start, r.len()).into_owned()
    }

    pub fn blocks(&self) -> Vec<DMatrix<f64>> {
        split_blocks(&self.space, &self.coeffs)
    }

    /// Concatenated coefficients `[P_0 | P_1 | .. | P_k]`.
    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn space(&self) -> &Arc<PolySpace> {
        &self.space
    }

    /// Sets the coefficient of monomial `exponents` in component `row`.
    pub fn set_term(&mut self, row: usize, exponents: &[u32], value: f64) -> Result<()> {
        let idx = self
            .space
            .index_of(&exponents.to_vec().into())
            .ok_or_else(|| Error::Shape(format!("monomial {exponents:?} outside the ODE basis")))?;
        if row >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: row,
                len: self.dim(),
            });
        }
        self.coeffs[(row, idx)] = value;
        Ok(())
    }

    /// Scales every coefficient of the given rows.
    pub fn scale_rows(&self, rows: &[usize], factor: f64) -> Self {
        let mut out = self.clone();
        for &r in rows {
            out.coeffs.row_mut(r).scale_mut(factor);
        }
        out
    }

    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mons = self.space.eval(x)?;
        Ok((&self.coeffs * nalgebra::DVector::from_vec(mons))
            .iter()
            .copied()
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&OdeFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<OdeFile>(s)?.try_into()
    }
}

/// On-disk form of a [`PolynomialOde`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OdeFile {
    pub dim: usize,
    pub order: usize,
    pub basis_ordering: String,
    /// `coeffs[d]` lists the rows of `P_d`.
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

impl From<&PolynomialOde> for OdeFile {
    fn from(o: &PolynomialOde) -> Self {
        OdeFile {
            dim: o.dim(),
            order: o.order(),
            basis_ordering: BASIS_ORDERING.to_string(),
            coeffs: o.blocks().iter().map(block_rows).collect(),
        }
    }
}

impl TryFrom<OdeFile> for PolynomialOde {
    type Error = Error;

    fn try_from(f: OdeFile) -> Result<Self> {
        check_ordering(&f.basis_ordering)?;
        if f.coeffs.len() != f.order + 1 {
            return Err(Error::Shape(format!(
                "order {} needs {} coefficient blocks, found {}",
                f.order,
                f.order + 1,
                f.coeffs.len()
            )));
        }
        let blocks = f
            .coeffs
            .iter()
            .enumerate()
            .map(|(d, rows)| {
                if rows.len() != f.dim {
                    return Err(Error::Shape(format!("P_{d} must have {} rows", f.dim)));
                }
                block_from_rows(rows, basis_size(f.dim, d))
            })
            .collect::<Result<Vec<_>>>()?;
        PolynomialOde::from_blocks(&blocks)
    }
}

/// Time step and RK4 resolution for [`ode_to_map`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub dt: f64,
    pub substeps: usize,
}

impl FlowConfig {
    pub const DEFAULT_SUBSTEPS: usize = 1000;

    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            substeps: Self::DEFAULT_SUBSTEPS,
        }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// `dW/dt` for the current map: the ODE right-hand side with `X` replaced by
/// the map, expanded over input monomials up to the map order.
pub fn weight_flow_rhs(map: &TaylorMap, ode: &PolynomialOde) -> Result<DMatrix<f64>> {
    check_dim(ode.dim(), map.dim())?;
    let target = map.space();
    let comps = target.rows_as_polys(map.weights());
    let table = ode.space.substitute(target, &comps);
    Ok(&ode.coeffs * table)
}

/// Taylor map of the time-`dt` flow, with the order of the ODE.
pub fn ode_to_map(ode: &PolynomialOde, cfg: &FlowConfig) -> Result<TaylorMap> {
    ode_to_map_with_order(ode, ode.order().max(1), cfg)
}

/// Taylor map of the time-`dt` flow truncated at `order`.
pub fn ode_to_map_with_order(
    ode: &PolynomialOde,
    order: usize,
    cfg: &FlowConfig,
) -> Result<TaylorMap> {
    cfg.validate()?;
    let mut map = TaylorMap::identity(ode.dim(), order.max(1));
    let h = cfg.dt / cfg.substeps as f64;
    let mut w = map.weights().clone();
    let f = |w: &DMatrix<f64>, scratch: &mut TaylorMap| -> Result<DMatrix<f64>> {
        *scratch.weights_mut() = w.clone();
        weight_flow_rhs(scratch, ode)
    };
    for step in 0..cfg.substeps {
        let k1 = f(&w, &mut map)?;
        let k2 = f(&(&w + &k1 * (h / 2.0)), &mut map)?;
        let k3 = f(&(&w + &k2 * (h / 2.0)), &mut map)?;
        let k4 = f(&(&w + &k3 * h), &mut map)?;
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::FlowDivergence {
                time: (step + 1) as f64 * h,
            });
        }
    }
    map.set_weights(w)?;
    Ok(map)
}

/// One classical RK4 step of `x' = f(x)`.
fn rk4_step<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(k).map(|(a, k)| a + s * k).collect()
    };
    let k1 = f(x);
    let k2 = f(&axpy(x, &k1, h / 2.0));
    let k3 = f(&axpy(x, &k2, h / 2.0));
    let k4 = f(&axpy(x, &k3, h));
    x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Minimum number of RK4 substeps per output sample of [`reference_trajectory`].
pub const REFERENCE_SUBSTEPS: usize = 100;

/// Fixed-step RK4 solution of `x' = f(x)` sampled every `dt`, with
/// `substeps` internal steps per sample: `steps + 1` states starting with `x0`.
pub fn integrate_rk4<F: Fn(&[f64]) -> Vec<f64>>(
    f: F,
    x0: &[f64],
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<Vec<Vec<f64>>> {
    FlowConfig { dt, substeps }.validate()?;
    let h = dt / substeps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    out.push(x.clone());
    for step in 0..steps {
        for _ in 0..substeps {
            x = rk4_step(&f, &x, h);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::StateDivergence { step: step + 1 });
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// Dense RK4 solution of the ODE sampled every `dt`: `steps + 1` states
/// starting with `x0`.
pub fn reference_trajectory(
    ode: &PolynomialOde,
    x0: &[f64],
    dt: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    check_dim(ode.dim(), x0.len())?;
    integrate_rk4(
        |x| ode.rhs(x).expect("dimension checked"),
        x0,
        dt,
        steps,
        REFERENCE_SUBSTEPS,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::lift_linear;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn linear_ode_gives_p1_times_blocks() {
        let p1 = DMatrix::from_row_slice(2, 2, &[0.1, 0.4, -0.3, 0.2]);
        let ode = PolynomialOde::from_blocks(&[DMatrix::zeros(2, 1), p1.clone()]).unwrap();
        let m = TaylorMap::from_blocks(&[
            DMatrix::from_row_slice(2, 1, &[0.5, -0.5]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 0.9]),
            DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
        ])
        .unwrap();
        let rhs = weight_flow_rhs(&m, &ode).unwrap();
        let want = &p1 * m.weights();
        assert!((rhs - want).abs().max() < 1e-15);
    }

    #[test]
    fn pendulum_cubic_block_is_p1w3_plus_p3_lifted_w1() {
        let gl = 9.8 / 0.3;
        let p1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -gl, 0.0]);
        let mut p3 = DMatrix::zeros(2, 4);
        p3[(1, 0)] = gl / 6.0;
        let ode = PolynomialOde::from_blocks(&[
            DMatrix::zeros(2, 1),
            p1.clone(),
            DMatrix::zeros(2, 3),
            p3.clone(),
        ])
        .unwrap();
        let w1 = DMatrix::from_row_slice(2, 2, &[0.8, 0.1, -3.0, 0.8]);
        let w3 = DMatrix::from_row_slice(2, 4, &[0.02, 0.002, 0.0001, 0.0, 0.4, 0.06, 0.004, 0.0001]);
        let m = TaylorMap::from_blocks(&[DMatrix::zeros(2, 1), w1.clone(), DMatrix::zeros(2, 3), w3.clone()])
            .unwrap();
        let rhs = TaylorMap::from_weights(2, 3, weight_flow_rhs(&m, &ode).unwrap()).unwrap();
        assert!((rhs.block(1) - &p1 * &w1).abs().max() < 1e-14);
        assert!(rhs.block(2).abs().max() < 1e-14);
        let want3 = &p1 * &w3 + &p3 * lift_linear(&w1, 3).unwrap();
        assert!((rhs.block(3) - want3).abs().max() < 1e-12);
    }

    #[test]
    fn rhs_at_identity_is_ode_coefficients() {
        let ode = PolynomialOde::from_blocks(&[
            DMatrix::from_row_slice(2, 1, &[0.3, -0.1]),
            DMatrix::from_row_slice(2, 2, &[0.1, 0.4, -0.3, 0.2]),
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        ])
        .unwrap();
        let rhs = weight_flow_rhs(&TaylorMap::identity(2, 2), &ode).unwrap();
        assert!((rhs - ode.coeffs()).abs().max() < 1e-15);
    }

    #[test]
    fn scalar_linear_ode_gives_exponential() {
        let a = -0.7;
        let ode = PolynomialOde::from_blocks(&[scalar(0.0), scalar(a)]).unwrap();
        let m = ode_to_map(&ode, &FlowConfig::new(0.3)).unwrap();
        assert!((m.block(1)[(0, 0)] - (a * 0.3f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn zero_rhs_gives_identity_map() {
        let ode = PolynomialOde::zero(3, 2);
        let m = ode_to_map(&ode, &FlowConfig::new(0.5).with_substeps(10)).unwrap();
        assert_eq!(m, TaylorMap::identity(3, 2));
    }

    #[test]
    fn invalid_flow_config_is_rejected() {
        let ode = PolynomialOde::zero(1, 1);
        assert!(ode_to_map(&ode, &FlowConfig::new(0.0)).is_err());
        assert!(ode_to_map(&ode, &FlowConfig::new(0.1).with_substeps(0)).is_err());
    }

    #[test]
    fn blow_up_is_reported_with_time() {
        // x' = x^2 explodes in finite time; the weight flow overflows too
        let ode = PolynomialOde::from_blocks(&[scalar(1e3), scalar(0.0), scalar(1e3)]).unwrap();
        match ode_to_map(&ode, &FlowConfig::new(10.0).with_substeps(100)) {
            Err(Error::FlowDivergence { time }) => assert!(time > 0.0 && time <= 10.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn reference_trajectory_shape_and_equilibrium() {
        let ode = PolynomialOde::from_blocks(&[
            DMatrix::zeros(2, 1),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.0]),
            DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, -1.0, 0.0]),
        ])
        .unwrap();
        let t = reference_trajectory(&ode, &[0.0, 0.0], 0.01, 10).unwrap();
        assert_eq!(t.len(), 11);
        assert!(t.iter().all(|x| x == &vec![0.0, 0.0]));
        assert!(reference_trajectory(&ode, &[0.0], 0.01, 10).is_err());
    }

    #[test]
    fn ode_json_round_trip() {
        let ode = PolynomialOde::from_blocks(&[
            DMatrix::from_row_slice(2, 1, &[0.1, 0.2]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.0]),
        ])
        .unwrap();
        let back = PolynomialOde::from_json(&ode.to_json().unwrap()).unwrap();
        assert_eq!(back, ode);
    }

    #[test]
    fn set_term_addresses_monomials() {
        let mut ode = PolynomialOde::zero(2, 3);
        ode.set_term(1, &[3, 0], 2.5).unwrap();
        assert_eq!(ode.block(3)[(1, 0)], 2.5);
        assert!(ode.set_term(1, &[4, 0], 1.0).is_err());
        assert!(ode.set_term(2, &[1, 0], 1.0).is_err());
    }
}
