//! Domains with C^{1,1} boundaries, exact distance to the boundary, meshes,
//! level-set quadrature and the normal-flow coordinate map.

mod domain;
mod flow;
mod levelset;
mod mesh;

pub use domain::{DistanceInfo, Domain, DomainFamily};
pub use flow::normal_flow;
pub use levelset::{
    chord, clip_above, levelset_integral, region_integral, region_integral_with, Chord,
    ChordSample, ClippedPolygon,
};
pub use mesh::{build_mesh, Mesh};
