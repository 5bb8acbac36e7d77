//! The guide's chapters as rustdoc modules, so `cargo test` runs every listing.
//! One module per chapter keeps failures traceable to their source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/taylor-maps.md")]
pub mod taylor_maps {}
#[doc = include_str!("../../../book/src/ode-to-map.md")]
pub mod ode_to_map {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/symplectic.md")]
pub mod symplectic {}
#[doc = include_str!("../../../book/src/lattices.md")]
pub mod lattices {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
