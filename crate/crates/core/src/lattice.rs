//! A ring of per-element Taylor maps with beam position monitors.
//!
//! The state is `(x, x', y, y')`; monitors read `(x, y)` only. Element maps
//! act over a path length `s`, so ODE elements use `s` as their time.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::flow::{ode_to_map_with_order, FlowConfig, OdeFile, PolynomialOde};
use crate::map::{MapFile, TaylorMap};
use crate::network::{Network, ObservationSeries};
use crate::symplectic::SymplecticStructure;
use crate::train::{train_one_shot, LossReport, TrainConfig};
use crate::tunes::{estimate_tunes, Tunes};

/// Components read by a monitor.
pub const MONITORED: [usize; 2] = [0, 2];

/// Component names of the lattice state.
pub const COMPONENTS: [&str; 4] = ["x", "xp", "y", "yp"];

const DIM: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub enum ElementSource {
    /// Flow of `ode` over `length`; rebuilt when perturbed.
    Ode {
        ode: PolynomialOde,
        length: f64,
        substeps: usize,
    },
    /// Weights given directly.
    Map,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub name: String,
    pub map: TaylorMap,
    pub source: ElementSource,
}

impl Element {
    pub fn from_ode(name: &str, ode: PolynomialOde, length: f64, order: usize) -> Result<Self> {
        let substeps = FlowConfig::DEFAULT_SUBSTEPS;
        let map = ode_to_map_with_order(&ode, order, &FlowConfig::new(length).with_substeps(substeps))?;
        Ok(Self {
            name: name.to_string(),
            map,
            source: ElementSource::Ode {
                ode,
                length,
                substeps,
            },
        })
    }

    pub fn from_map(name: &str, map: TaylorMap) -> Self {
        Self {
            name: name.to_string(),
            map,
            source: ElementSource::Map,
        }
    }
}

/// Hill-type element `x'' = -k x`, `y'' = +k y` (a drift when `k = 0`).
pub fn quadrupole_ode(k: f64) -> PolynomialOde {
    let mut ode = PolynomialOde::zero(DIM, 1);
    ode.set_term(0, &[0, 1, 0, 0], 1.0).unwrap();
    ode.set_term(1, &[1, 0, 0, 0], -k).unwrap();
    ode.set_term(2, &[0, 0, 0, 1], 1.0).unwrap();
    ode.set_term(3, &[0, 0, 1, 0], k).unwrap();
    ode
}

/// Sextupole-like element `x'' = -m (x^2 - y^2) / 2`, `y'' = m x y`.
pub fn sextupole_ode(m: f64) -> PolynomialOde {
    let mut ode = PolynomialOde::zero(DIM, 2);
    ode.set_term(0, &[0, 1, 0, 0], 1.0).unwrap();
    ode.set_term(1, &[2, 0, 0, 0], -0.5 * m).unwrap();
    ode.set_term(1, &[0, 0, 2, 0], 0.5 * m).unwrap();
    ode.set_term(2, &[0, 0, 0, 1], 1.0).unwrap();
    ode.set_term(3, &[1, 0, 1, 0], m).unwrap();
    ode
}

/// Per-turn states at the end of the ring, turns `1..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TurnSeries {
    pub states: Vec<Vec<f64>>,
}

impl TurnSeries {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[c]).collect()
    }

    pub fn tunes(&self) -> Result<Tunes> {
        estimate_tunes(&self.component(MONITORED[0]), &self.component(MONITORED[1]))
    }

    /// CSV `turn,x,xp,y,yp`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["turn"];
        header.extend(COMPONENTS);
        wr.write_record(&header).map_err(csv_error)?;
        for (t, s) in self.states.iter().enumerate() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(s.iter().map(|v| v.to_string()));
            wr.write_record(&row).map_err(csv_error)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads any CSV whose first column is the turn index followed by state columns.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut states = Vec::new();
        for row in rd.records() {
            let row = row.map_err(csv_error)?;
            let s = row
                .iter()
                .skip(1)
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("value {f:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            states.push(s);
        }
        Ok(Self { states })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    elements: Vec<Element>,
    monitors: Vec<usize>,
    ring: bool,
}

impl Lattice {
    /// `monitors` are element boundaries in `[1, elements.len()]`: monitor `m`
    /// reads the state after element `m`.
    pub fn new(elements: Vec<Element>, monitors: Vec<usize>, ring: bool) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidParameter("a lattice needs at least one element".into()))?;
        check_dim(DIM, first.map.dim())?;
        let order = first.map.order();
        for e in &elements {
            check_dim(DIM, e.map.dim())?;
            if e.map.order() != order {
                return Err(Error::Shape(format!(
                    "element {:?} has order {}, expected {order}",
                    e.name,
                    e.map.order()
                )));
            }
        }
        if monitors.is_empty()
            || monitors.windows(2).any(|w| w[0] >= w[1])
            || monitors[0] == 0
            || *monitors.last().unwrap() > elements.len()
        {
            return Err(Error::InvalidParameter(format!(
                "monitors must be strictly increasing boundaries in [1, {}]",
                elements.len()
            )));
        }
        Ok(Self {
            elements,
            monitors,
            ring,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn order(&self) -> usize {
        self.elements[0].map.order()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn monitors(&self) -> &[usize] {
        &self.monitors
    }

    pub fn is_ring(&self) -> bool {
        self.ring
    }

    pub fn maps(&self) -> Vec<TaylorMap> {
        self.elements.iter().map(|e| e.map.clone()).collect()
    }

    /// The lattice as an untied network tapped at the monitors.
    pub fn network(&self) -> Result<Network> {
        Network::untied_chain(self.maps())?
            .with_taps(self.monitors.clone())?
            .with_structure(SymplecticStructure::interleaved(DIM)?)
    }

    /// `(x, y)` at every monitor during one pass from `x0`.
    pub fn one_turn_readings(&self, x0: &[f64]) -> Result<Vec<[f64; 2]>> {
        let states = self.network()?.forward(x0)?;
        Ok(states
            .iter()
            .map(|s| [s[MONITORED[0]], s[MONITORED[1]]])
            .collect())
    }

    /// Monitor readings of one pass as an observation series with `x'`, `y'` masked.
    pub fn observe_turn(&self, x0: &[f64]) -> Result<ObservationSeries> {
        let states = self.network()?.forward(x0)?;
        let mut mask = [false; DIM];
        for c in MONITORED {
            mask[c] = true;
        }
        ObservationSeries::from_states(
            COMPONENTS.iter().map(|s| s.to_string()).collect(),
            &self.monitors,
            &states,
            &mask,
        )
    }

    /// State after one full pass.
    pub fn track_turn(&self, x0: &[f64]) -> Result<Vec<f64>> {
        check_dim(DIM, x0.len())?;
        let mut x = x0.to_vec();
        for e in &self.elements {
            x = e.map.apply(&x)?;
        }
        Ok(x)
    }

    /// End-of-ring states over `turns` consecutive turns.
    pub fn multi_turn(&self, x0: &[f64], turns: usize) -> Result<TurnSeries> {
        if !self.ring {
            return Err(Error::InvalidParameter(
                "multi-turn tracking needs a ring lattice".into(),
            ));
        }
        let mut states = Vec::with_capacity(turns);
        let mut x = x0.to_vec();
        for turn in 0..turns {
            x = self.track_turn(&x)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::StateDivergence { step: turn + 1 });
            }
            states.push(x.clone());
        }
        Ok(TurnSeries { states })
    }

    /// Tunes from `turns` turns of tracking started at `x0`.
    pub fn tunes(&self, x0: &[f64], turns: usize) -> Result<Tunes> {
        self.multi_turn(x0, turns)?.tunes()
    }

    /// The one-turn map composed element by element, truncated at `order`.
    pub fn one_turn_map(&self, order: usize) -> Result<TaylorMap> {
        let mut acc = TaylorMap::identity(DIM, order);
        for e in &self.elements {
            acc = TaylorMap::compose(&e.map, &acc, order)?;
        }
        Ok(acc)
    }

    /// Scales the focusing strength of element `index` by `factor`.
    ///
    /// ODE elements have their force rows (`x''`, `y''`) scaled and are
    /// rebuilt from the flow; map elements have the `W_1` entries coupling
    /// each position into its own slope scaled.
    pub fn perturb_element(&self, index: usize, factor: f64) -> Result<Lattice> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "perturbation factor must be positive, got {factor}"
            )));
        }
        let mut out = self.clone();
        let order = self.order();
        let e = &mut out.elements[index];
        match &e.source {
            ElementSource::Ode {
                ode,
                length,
                substeps,
            } => {
                let ode = ode.scale_rows(&[1, 3], factor);
                let cfg = FlowConfig::new(*length).with_substeps(*substeps);
                e.map = ode_to_map_with_order(&ode, order, &cfg)?;
                e.source = ElementSource::Ode {
                    ode,
                    length: *length,
                    substeps: *substeps,
                };
            }
            ElementSource::Map => {
                let col = e.map.space().degree_range(1).start;
                let w = e.map.weights_mut();
                for plane in 0..DIM / 2 {
                    w[(2 * plane + 1, col + 2 * plane)] *= factor;
                }
            }
        }
        Ok(out)
    }

    /// Copy of the lattice with element maps replaced; every element becomes a map element.
    pub fn with_maps(&self, maps: Vec<TaylorMap>) -> Result<Lattice> {
        check_dim(self.len(), maps.len())?;
        let elements = self
            .elements
            .iter()
            .zip(maps)
            .map(|(e, m)| Element::from_map(&e.name, m))
            .collect();
        Lattice::new(elements, self.monitors.clone(), self.ring)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&LatticeFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<LatticeFile>(s)?.try_into()
    }
}

/// Fine-tunes every element of `assumed` from one pass of monitor readings
/// started at the known state `x0`. Observations must be indexed by monitor
/// boundary and may only contain `(x, y)`.
pub fn fine_tune(
    assumed: &Lattice,
    x0: &[f64],
    obs: &ObservationSeries,
    cfg: &TrainConfig,
) -> Result<(Lattice, LossReport)> {
    check_dim(DIM, obs.dim())?;
    for r in obs.records() {
        for (c, v) in r.values.iter().enumerate() {
            if v.is_some() && !MONITORED.contains(&c) {
                return Err(Error::InvalidObservation(format!(
                    "monitor at {} reports unobservable component {}",
                    r.tap, COMPONENTS[c]
                )));
            }
        }
    }
    let (net, report) = train_one_shot(&assumed.network()?, x0, obs, cfg)?;
    let tuned = assumed.with_maps(net.groups().to_vec())?;
    Ok((tuned, report))
}

/// Parameters of [`desk_ring`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeskRing {
    pub cells: usize,
    /// Focusing strength `k` of the F quadrupoles.
    pub kf: f64,
    /// Focusing strength `k` of the D quadrupoles (applied with opposite sign).
    pub kd: f64,
    pub quad_length: f64,
    pub drift_length: f64,
    pub sextupole: f64,
    pub sextupole_length: f64,
    pub order: usize,
}

impl Default for DeskRing {
    fn default() -> Self {
        Self {
            cells: 4,
            kf: 1.5,
            kd: 1.45,
            quad_length: 0.2,
            drift_length: 1.0,
            sextupole: 2.0,
            sextupole_length: 0.1,
            order: 2,
        }
    }
}

/// FODO cells `QF, O, QD, O` followed by one sextupole, monitored after every element.
pub fn desk_ring(p: &DeskRing) -> Result<Lattice> {
    if p.cells == 0 {
        return Err(Error::InvalidParameter("a desk ring needs at least one cell".into()));
    }
    let mut elements = Vec::new();
    for c in 1..=p.cells {
        elements.push(Element::from_ode(&format!("qf{c}"), quadrupole_ode(p.kf), p.quad_length, p.order)?);
        elements.push(Element::from_ode(&format!("df{c}"), quadrupole_ode(0.0), p.drift_length, p.order)?);
        elements.push(Element::from_ode(&format!("qd{c}"), quadrupole_ode(-p.kd), p.quad_length, p.order)?);
        elements.push(Element::from_ode(&format!("dd{c}"), quadrupole_ode(0.0), p.drift_length, p.order)?);
    }
    elements.push(Element::from_ode("sx", sextupole_ode(p.sextupole), p.sextupole_length, p.order)?);
    let monitors = (1..=elements.len()).collect();
    Lattice::new(elements, monitors, true)
}

/// On-disk form of a [`Lattice`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeFile {
    pub dim: usize,
    pub order: usize,
    pub elements: Vec<ElementFile>,
    pub monitors: Vec<usize>,
    pub ring: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ElementFile {
    Ode {
        name: String,
        ode: OdeFile,
        length: f64,
        #[serde(default = "default_substeps")]
        substeps: usize,
    },
    Map {
        name: String,
        map: MapFile,
    },
}

fn default_substeps() -> usize {
    FlowConfig::DEFAULT_SUBSTEPS
}

impl From<&Lattice> for LatticeFile {
    fn from(l: &Lattice) -> Self {
        let elements = l
            .elements
            .iter()
            .map(|e| match &e.source {
                ElementSource::Ode {
                    ode,
                    length,
                    substeps,
                } => ElementFile::Ode {
                    name: e.name.clone(),
                    ode: ode.into(),
                    length: *length,
                    substeps: *substeps,
                },
                ElementSource::Map => ElementFile::Map {
                    name: e.name.clone(),
                    map: (&e.map).into(),
                },
            })
            .collect();
        LatticeFile {
            dim: DIM,
            order: l.order(),
            elements,
            monitors: l.monitors.clone(),
            ring: l.ring,
        }
    }
}

impl TryFrom<LatticeFile> for Lattice {
    type Error = Error;

    fn try_from(f: LatticeFile) -> Result<Self> {
        check_dim(DIM, f.dim)?;
        let elements = f
            .elements
            .into_iter()
            .map(|e| match e {
                ElementFile::Ode {
                    name,
                    ode,
                    length,
                    substeps,
                } => {
                    let ode = PolynomialOde::try_from(ode)?;
                    let map = ode_to_map_with_order(
                        &ode,
                        f.order,
                        &FlowConfig::new(length).with_substeps(substeps),
                    )?;
                    Ok(Element {
                        name,
                        map,
                        source: ElementSource::Ode {
                            ode,
                            length,
                            substeps,
                        },
                    })
                }
                ElementFile::Map { name, map } => {
                    let map = TaylorMap::try_from(map)?;
                    if map.order() != f.order {
                        return Err(Error::Shape(format!(
                            "element {name:?} has order {}, lattice order is {}",
                            map.order(),
                            f.order
                        )));
                    }
                    Ok(Element::from_map(&name, map))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Lattice::new(elements, f.monitors, f.ring)
    }
}

/// Linear element rotating each plane by its own angle.
pub fn rotation_element(name: &str, angle_x: f64, angle_y: f64, order: usize) -> Result<Element> {
    let mut w = DMatrix::zeros(DIM, DIM);
    for (plane, a) in [angle_x, angle_y].into_iter().enumerate() {
        let (s, c) = a.sin_cos();
        let o = 2 * plane;
        w[(o, o)] = c;
        w[(o, o + 1)] = s;
        w[(o + 1, o)] = -s;
        w[(o + 1, o + 1)] = c;
    }
    Ok(Element::from_map(name, TaylorMap::linear(&w, order)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn identity_ring(n: usize) -> Lattice {
        let elements = (0..n)
            .map(|i| Element::from_map(&format!("e{i}"), TaylorMap::identity(DIM, 2)))
            .collect();
        Lattice::new(elements, (1..=n).collect(), true).unwrap()
    }

    #[test]
    fn identity_ring_reads_x0_everywhere() {
        let lat = identity_ring(5);
        let x0 = [1e-3, 2e-4, -5e-4, 0.0];
        assert!(lat
            .one_turn_readings(&x0)
            .unwrap()
            .iter()
            .all(|r| *r == [1e-3, -5e-4]));
        let series = lat.multi_turn(&x0, 10).unwrap();
        assert!(series.states.iter().all(|s| s == &x0));
    }

    #[test]
    fn rotation_monitor_reads_rotated_coordinates() {
        let lat = Lattice::new(
            vec![rotation_element("r", 0.3, 0.7, 1).unwrap()],
            vec![1],
            true,
        )
        .unwrap();
        let r = lat.one_turn_readings(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((r[0][0] - 0.3f64.cos()).abs() < 1e-15);
        assert!((r[0][1] - 0.7f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn rotation_ring_tunes() {
        let lat = Lattice::new(
            vec![rotation_element("r", 2.0 * PI * 0.28, 2.0 * PI * 0.19, 2).unwrap()],
            vec![1],
            true,
        )
        .unwrap();
        let t = lat.tunes(&[1e-3, 0.0, 1e-3, 0.0], 512).unwrap();
        assert!((t.qx - 0.28).abs() < 1e-3 && (t.qy - 0.19).abs() < 1e-3, "{t:?}");
        // (x, x') traces a circle for a pure rotation
        for s in lat.multi_turn(&[1e-3, 0.0, 0.0, 0.0], 50).unwrap().states {
            assert!((s[0].hypot(s[1]) - 1e-3).abs() < 1e-15);
        }
    }

    #[test]
    fn readings_match_sequential_application() {
        let lat = desk_ring(&DeskRing::default()).unwrap();
        let x0 = [1e-3, 0.0, -1e-3, 2e-4];
        let r = lat.one_turn_readings(&x0).unwrap();
        let mut x = x0.to_vec();
        for (i, e) in lat.elements().iter().enumerate() {
            x = e.map.apply(&x).unwrap();
            assert_eq!(r[i], [x[0], x[2]]);
        }
        assert_eq!(lat.track_turn(&x0).unwrap(), x);
    }

    #[test]
    fn desk_ring_elements_are_symplectic() {
        let lat = desk_ring(&DeskRing::default()).unwrap();
        let j = SymplecticStructure::interleaved(DIM).unwrap();
        for e in lat.elements() {
            let p = crate::symplectic::symplectic_penalty(&e.map, &j).unwrap();
            // the truncated sextupole map keeps degree-2 residual terms
            let bound = if e.name == "sx" { 1e-6 } else { 1e-8 };
            assert!(p <= bound, "{} {p}", e.name);
        }
        let pert = lat.perturb_element(0, 0.8).unwrap();
        let p = crate::symplectic::symplectic_penalty(&pert.elements()[0].map, &j).unwrap();
        assert!(p <= 1e-8);
    }

    #[test]
    fn perturbation_behaviour() {
        let lat = desk_ring(&DeskRing::default()).unwrap();
        assert_eq!(lat.perturb_element(3, 1.0).unwrap(), lat);
        assert!(lat.perturb_element(99, 0.8).is_err());
        assert!(lat.perturb_element(0, 0.0).is_err());
        let pert = lat.perturb_element(0, 0.8).unwrap();
        assert!(pert.elements()[1..] == lat.elements()[1..]);
        let x0 = [1e-3, 0.0, 1e-3, 0.0];
        let (a, b) = (lat.tunes(&x0, 500).unwrap(), pert.tunes(&x0, 500).unwrap());
        assert!((a.qx - b.qx).abs() > 1e-3 && (a.qy - b.qy).abs() > 1e-3);

        // map elements scale the focusing entries of W_1
        let lin = lat.with_maps(lat.maps()).unwrap();
        let p = lin.perturb_element(0, 0.5).unwrap();
        let (w0, w1) = (lin.elements()[0].map.block(1), p.elements()[0].map.block(1));
        assert_eq!(w1[(1, 0)], 0.5 * w0[(1, 0)]);
        assert_eq!(w1[(3, 2)], 0.5 * w0[(3, 2)]);
        assert_eq!(w1[(0, 0)], w0[(0, 0)]);
    }

    #[test]
    fn composed_one_turn_map_tracks_small_amplitudes() {
        let lat = desk_ring(&DeskRing::default()).unwrap();
        let m = lat.one_turn_map(2).unwrap();
        let x0 = [5e-4, -2e-4, 3e-4, 1e-4];
        let a = m.apply(&x0).unwrap();
        let b = lat.track_turn(&x0).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8, "{a:?} {b:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let lat = desk_ring(&DeskRing {
            cells: 1,
            ..Default::default()
        })
        .unwrap();
        let back = Lattice::from_json(&lat.to_json().unwrap()).unwrap();
        assert_eq!(back, lat);
        let tuned = lat.with_maps(lat.maps()).unwrap();
        assert_eq!(Lattice::from_json(&tuned.to_json().unwrap()).unwrap(), tuned);
    }

    #[test]
    fn fine_tune_on_own_readings_is_a_fixed_point() {
        let lat = desk_ring(&DeskRing {
            cells: 2,
            ..Default::default()
        })
        .unwrap();
        let x0 = [1e-3, 0.0, 1e-3, 0.0];
        let obs = lat.observe_turn(&x0).unwrap();
        assert!(obs.records().iter().all(|r| r.values[1].is_none() && r.values[3].is_none()));
        let cfg = TrainConfig {
            epochs: 50,
            lambda: 1e-10,
            frozen_degrees: vec![0],
            ..Default::default()
        };
        let (tuned, report) = fine_tune(&lat, &x0, &obs, &cfg).unwrap();
        assert!(report.initial().unwrap().data < 1e-24);
        for (a, b) in tuned.elements().iter().zip(lat.elements()) {
            let drift = (a.map.weights() - b.map.weights()).amax();
            assert!(drift <= 1e-6, "{} {drift}", a.name);
        }
    }

    #[test]
    fn fine_tune_rejects_latent_observations() {
        let lat = identity_ring(2);
        let obs = ObservationSeries::from_states(
            COMPONENTS.iter().map(|s| s.to_string()).collect(),
            &[1, 2],
            &[vec![0.0; 4], vec![0.0; 4]],
            &[true; 4],
        )
        .unwrap();
        assert!(fine_tune(&lat, &[0.0; 4], &obs, &TrainConfig::default()).is_err());
    }

    #[test]
    fn turn_series_csv_round_trip() {
        let s = TurnSeries {
            states: vec![vec![1e-3, 0.1, -2e-3, 0.3], vec![0.5, 0.25, 0.125, 1.0 / 3.0]],
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("turn,x,xp,y,yp\n"));
        assert_eq!(TurnSeries::read_csv(&buf[..]).unwrap(), s);
    }
}
