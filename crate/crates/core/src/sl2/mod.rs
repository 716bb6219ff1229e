//! SL(2,R) arithmetic, lattice reduction and the geodesic/horocycle flows on
//! `X = G/Γ`.

mod flow;
mod lattice;
mod mat2;
mod word;

pub use flow::{act, flow, flow_geodesic, flow_horocycle, BasePoint, FlowKind, HorocycleSign};
pub use lattice::{
    reduce_to_fundamental_domain, IntMat2, Lattice, LatticeMode, DOMAIN_TOL, REDUCTION_BUDGET,
};
pub use mat2::{bruhat_factor, make_generator, GeneratorKind, Mat2, DET_DRIFT};
pub use word::{GroupWord, Letter};
