//! Numerical workbench for linear cocycles over SL(2,R)-actions on flat
//! suspension bundles `H_ρ = (SL(2,R) × H)/Γ`.
//!
//! The crate computes Lyapunov spectra and Oseledets flags of the suspension
//! cocycle, probes the rigidity of P-invariant lifts (concentration on the top
//! Lyapunov subspace, the inert flag and its zero-one dichotomy, unique
//! ergodicity of the foliated horocycle flow), and measures Kontsevich–Zorich
//! exponents of square-tiled surfaces.

pub mod error;
pub mod sl2;
pub mod representation;
pub mod cocycle;
pub mod oseledets;
pub mod probes;
pub mod origami;
pub mod runner;

pub use error::{Error, Result};
