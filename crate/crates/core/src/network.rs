//! The TM-PNN: a chain of Taylor-map layers with weight sharing and taps.
//!
//! Layer `j` (1-based) maps boundary state `s_{j-1}` to `s_j` with the map of
//! its weight group. Taps are boundary positions whose states are emitted.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::map::TaylorMap;
use crate::symplectic::{symplectic_penalty, symplectic_penalty_gradient, SymplecticStructure};

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    groups: Vec<TaylorMap>,
    slots: Vec<usize>,
    taps: Vec<usize>,
    structure: Option<SymplecticStructure>,
}

/// The three terms of the training loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub data: f64,
    pub penalty: f64,
}

impl Network {
    /// `slots[j]` is the weight group of layer `j + 1`.
    pub fn new(groups: Vec<TaylorMap>, slots: Vec<usize>, taps: Vec<usize>) -> Result<Self> {
        let first = groups
            .first()
            .ok_or_else(|| Error::InvalidParameter("a network needs at least one map".into()))?;
        let (dim, order) = (first.dim(), first.order());
        for g in &groups {
            check_dim(dim, g.dim())?;
            if g.order() != order {
                return Err(Error::Shape(format!(
                    "all layers must share order {order}, got {}",
                    g.order()
                )));
            }
        }
        if slots.is_empty() {
            return Err(Error::InvalidParameter("a network needs at least one layer".into()));
        }
        if let Some(&bad) = slots.iter().find(|&&s| s >= groups.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: groups.len(),
            });
        }
        let structure = SymplecticStructure::canonical(dim).ok();
        let mut net = Self {
            groups,
            slots,
            taps: Vec::new(),
            structure,
        };
        net.set_taps(taps)?;
        Ok(net)
    }

    /// `length` layers sharing one map, tapped after every layer.
    pub fn shared_chain(map: TaylorMap, length: usize) -> Result<Self> {
        Self::new(vec![map], vec![0; length], (1..=length).collect())
    }

    /// One group per layer, tapped after every layer.
    pub fn untied_chain(maps: Vec<TaylorMap>) -> Result<Self> {
        let len = maps.len();
        Self::new(maps, (0..len).collect(), (1..=len).collect())
    }

    pub fn with_taps(mut self, taps: Vec<usize>) -> Result<Self> {
        self.set_taps(taps)?;
        Ok(self)
    }

    /// Replaces the structure used by the symplectic penalty.
    pub fn with_structure(mut self, structure: SymplecticStructure) -> Result<Self> {
        check_dim(self.dim(), structure.dim())?;
        self.structure = Some(structure);
        Ok(self)
    }

    fn set_taps(&mut self, taps: Vec<usize>) -> Result<()> {
        if taps.is_empty() || taps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "taps must be non-empty and strictly increasing".into(),
            ));
        }
        if taps[0] == 0 || *taps.last().unwrap() > self.len() {
            return Err(Error::InvalidParameter(format!(
                "taps must lie in [1, {}]",
                self.len()
            )));
        }
        self.taps = taps;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.groups[0].dim()
    }

    pub fn order(&self) -> usize {
        self.groups[0].order()
    }

    /// Number of layers.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn groups(&self) -> &[TaylorMap] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &TaylorMap {
        &self.groups[g]
    }

    pub(crate) fn groups_mut(&mut self) -> &mut [TaylorMap] {
        &mut self.groups
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    pub fn structure(&self) -> Option<&SymplecticStructure> {
        self.structure.as_ref()
    }

    /// Every boundary state `s_0 = x0, .., s_L`.
    pub fn states(&self, x0: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.trace(x0)?.0)
    }

    /// Boundary states plus the monomial vector of every layer input.
    fn trace(&self, x0: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        check_dim(self.dim(), x0.len())?;
        let space = self.groups[0].space().clone();
        let mut states = Vec::with_capacity(self.len() + 1);
        let mut mons = Vec::with_capacity(self.len());
        states.push(x0.to_vec());
        for (j, &g) in self.slots.iter().enumerate() {
            let mut m = vec![0.0; space.len()];
            space.eval_into(&states[j], &mut m);
            let next = self.groups[g].apply_monomials(&m);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::StateDivergence { step: j + 1 });
            }
            mons.push(m);
            states.push(next);
        }
        Ok((states, mons))
    }

    /// States at the taps, in tap order.
    pub fn forward(&self, x0: &[f64]) -> Result<Vec<Vec<f64>>> {
        let states = self.states(x0)?;
        Ok(self.taps.iter().map(|&t| states[t].clone()).collect())
    }

    /// Tapped states projected onto `components`.
    pub fn predict_trajectory(&self, x0: &[f64], components: &[usize]) -> Result<Vec<Vec<f64>>> {
        if let Some(&c) = components.iter().find(|&&c| c >= self.dim()) {
            return Err(Error::IndexOutOfRange {
                index: c,
                len: self.dim(),
            });
        }
        Ok(self
            .forward(x0)?
            .into_iter()
            .map(|s| components.iter().map(|&c| s[c]).collect())
            .collect())
    }

    fn check_observations(&self, obs: &ObservationSeries) -> Result<()> {
        check_dim(self.dim(), obs.dim())?;
        for r in obs.records() {
            if self.taps.binary_search(&r.tap).is_err() {
                return Err(Error::InvalidObservation(format!(
                    "tap {} is not an output of the network",
                    r.tap
                )));
            }
        }
        Ok(())
    }

    fn structure_for(&self, lambda: f64) -> Result<Option<&SymplecticStructure>> {
        match (&self.structure, lambda) {
            (Some(s), _) => Ok(Some(s)),
            (None, l) if l == 0.0 => Ok(None),
            (None, _) => Err(Error::OddDimension(self.dim())),
        }
    }

    /// Sum of the symplectic penalties of the weight groups (zero when the
    /// dimension admits no structure).
    pub fn penalty(&self) -> Result<f64> {
        match &self.structure {
            Some(s) => self.groups.iter().map(|g| symplectic_penalty(g, s)).sum(),
            None => Ok(0.0),
        }
    }

    /// Mean squared error over observed entries plus `lambda` times the penalty.
    pub fn loss(&self, x0: &[f64], obs: &ObservationSeries, lambda: f64) -> Result<LossParts> {
        self.check_observations(obs)?;
        self.structure_for(lambda)?;
        let states = self.states(x0)?;
        let data = data_term(&states, obs)?;
        let penalty = self.penalty()?;
        Ok(LossParts {
            total: data + lambda * penalty,
            data,
            penalty,
        })
    }

    /// Loss and its exact gradient for every weight group.
    pub fn backward(
        &self,
        x0: &[f64],
        obs: &ObservationSeries,
        lambda: f64,
    ) -> Result<(LossParts, Vec<DMatrix<f64>>)> {
        self.check_observations(obs)?;
        let structure = self.structure_for(lambda)?;
        let (states, mons) = self.trace(x0)?;
        let data = data_term(&states, obs)?;
        let n = self.dim();
        let scale = 2.0 / obs.observed_count() as f64;

        let mut direct = vec![None; self.len() + 1];
        for r in obs.records() {
            direct[r.tap] = Some(r);
        }
        let mut grads: Vec<DMatrix<f64>> = self
            .groups
            .iter()
            .map(|g| DMatrix::zeros(n, g.weights().ncols()))
            .collect();
        let mut adj = vec![0.0; n];
        for j in (1..=self.len()).rev() {
            if let Some(r) = direct[j] {
                for (c, v) in r.values.iter().enumerate() {
                    if let Some(v) = v {
                        adj[c] += scale * (states[j][c] - v);
                    }
                }
            }
            let g = self.slots[j - 1];
            let m = &mons[j - 1];
            let grad = &mut grads[g];
            for (col, mv) in m.iter().enumerate() {
                if *mv != 0.0 {
                    for r in 0..n {
                        grad[(r, col)] += adj[r] * mv;
                    }
                }
            }
            if j > 1 {
                let jac = self.groups[g].jacobian_from_monomials(m);
                adj = (0..n)
                    .map(|c| (0..n).map(|r| jac[(r, c)] * adj[r]).sum())
                    .collect();
            }
        }

        let mut penalty = 0.0;
        if let Some(s) = structure {
            for (g, map) in self.groups.iter().enumerate() {
                let (p, pg) = symplectic_penalty_gradient(map, s)?;
                penalty += p;
                if lambda != 0.0 {
                    grads[g] += pg * lambda;
                }
            }
        }
        Ok((
            LossParts {
                total: data + lambda * penalty,
                data,
                penalty,
            },
            grads,
        ))
    }
}

/// A chain of `length` layers sharing `map`, tapped after every layer.
pub fn build_shared_chain(map: TaylorMap, length: usize) -> Result<Network> {
    Network::shared_chain(map, length)
}

fn data_term(states: &[Vec<f64>], obs: &ObservationSeries) -> Result<f64> {
    let count = obs.observed_count();
    if count == 0 {
        return Err(Error::EmptyObservations);
    }
    let mut sum = 0.0;
    for r in obs.records() {
        for (c, v) in r.values.iter().enumerate() {
            if let Some(v) = v {
                let d = states[r.tap][c] - v;
                sum += d * d;
            }
        }
    }
    Ok(sum / count as f64)
}

/// Partial observation of the state at one tap; `None` marks a latent component.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub tap: usize,
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSeries {
    names: Vec<String>,
    records: Vec<Observation>,
}

impl ObservationSeries {
    pub fn new(names: Vec<String>, records: Vec<Observation>) -> Result<Self> {
        if records.windows(2).any(|w| w[0].tap >= w[1].tap) {
            return Err(Error::InvalidObservation(
                "taps must be strictly increasing".into(),
            ));
        }
        for r in &records {
            check_dim(names.len(), r.values.len())?;
            if r.values.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidObservation(format!(
                    "non-finite value at tap {}",
                    r.tap
                )));
            }
        }
        Ok(Self { names, records })
    }

    /// Observations of `states[i]` at `taps[i]`, keeping components where `mask` is true.
    pub fn from_states(
        names: Vec<String>,
        taps: &[usize],
        states: &[Vec<f64>],
        mask: &[bool],
    ) -> Result<Self> {
        check_dim(taps.len(), states.len())?;
        check_dim(names.len(), mask.len())?;
        let records = taps
            .iter()
            .zip(states)
            .map(|(&tap, s)| Observation {
                tap,
                values: s
                    .iter()
                    .zip(mask)
                    .map(|(v, keep)| keep.then_some(*v))
                    .collect(),
            })
            .collect();
        Self::new(names, records)
    }

    /// Default component names `x1, .., xn`.
    pub fn default_names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn observed_count(&self) -> usize {
        self.records.iter().map(|r| r.values.iter().flatten().count()).sum()
    }

    /// Observed values of one component as `(tap, value)` pairs.
    pub fn component(&self, c: usize) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.values.get(c).copied().flatten().map(|v| (r.tap, v)))
            .collect()
    }

    /// CSV with header `tap,<names>`; unobserved entries are empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["tap".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header).map_err(csv_error)?;
        for r in &self.records {
            let mut row = vec![r.tap.to_string()];
            row.extend(
                r.values
                    .iter()
                    .map(|v| v.map(|v| v.to_string()).unwrap_or_default()),
            );
            wr.write_record(&row).map_err(csv_error)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers().map_err(csv_error)?.clone();
        if header.get(0).map(str::trim) != Some("tap") {
            return Err(Error::Parse("observation CSV must start with a `tap` column".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut records = Vec::new();
        for row in rd.records() {
            let row = row.map_err(csv_error)?;
            let tap = row[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("tap {:?}: {e}", &row[0])))?;
            let values = row
                .iter()
                .skip(1)
                .map(|f| {
                    let f = f.trim();
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse::<f64>()
                            .map(Some)
                            .map_err(|e| Error::Parse(format!("value {f:?}: {e}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            records.push(Observation { tap, values });
        }
        Self::new(names, records)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
