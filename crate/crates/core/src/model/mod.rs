//! The geometric Lorenz flow as a hybrid system.

pub mod flow;
pub mod map;
pub mod params;
pub mod regions;

pub use flow::{
    first_return, flow, speed_bound, time_to_section, HybridState, Landing, Region, Trajectory,
    TubePath, LEAF_SNAP_TOL,
};
pub use map::{
    branch_inverse, contraction_rate, iterate_one_d, one_d_map, one_d_preimages, poincare,
    preimage_in_band, Branch, Leaf, Preimage,
};
pub use params::{AxiomCheck, Case, ModelParams};
pub use regions::{
    classify_region, min_separation, region_separations, separation_table, RegionTag, Separation,
};
