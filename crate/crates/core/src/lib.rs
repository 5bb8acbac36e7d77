pub mod basis;
pub mod error;
pub mod flow;
pub mod lattice;
pub mod map;
pub mod network;
pub mod poly;
pub mod symplectic;
pub mod systems;
pub mod train;
pub mod tunes;

pub use basis::{basis_size, enumerate_monomials, kron_power, kron_power_jacobian, MonomialBasis, MultiIndex};
pub use error::{Error, Result};
pub use flow::{integrate_rk4, ode_to_map, ode_to_map_with_order, reference_trajectory, weight_flow_rhs, FlowConfig, PolynomialOde};
pub use map::TaylorMap;
pub use poly::{compose_power_truncate, lift_linear, PolySpace};
pub use symplectic::{symplectic_penalty, symplectic_residual, SymplecticResidual, SymplecticStructure};
pub use network::{build_shared_chain, LossParts, Network, Observation, ObservationSeries};
pub use systems::{NoiseKind, NoiseSpec};
pub use train::{train_one_shot, train_one_shot_with, LossReport, TrainConfig};
pub use lattice::{desk_ring, fine_tune, DeskRing, Element, ElementSource, Lattice, TurnSeries};
pub use tunes::{estimate_frequency, estimate_tunes, FrequencyEstimate, Tunes};
