//! Emulated hardware ray-tracing pipeline plus front-to-back any-hit
//! traversal kernels and a brute-force oracle to check them against.
//!
//! Layering, bottom up:
//!
//! * [`float_interval`]: adjacent-float stepping (`just_above`/`just_below`).
//! * [`geometry`]: vectors, rays, triangle and box tests, instance transforms.
//! * [`scene`] and [`bvh`]: meshes, instances, procedural test scenes and the
//!   two-level BVH whose traversal feeds the pipeline.
//! * [`pipeline`]: the trace call with any-hit / closest-hit / miss programs.
//! * [`hit_order`]: hit identity and the strict total order over hits.
//! * [`kernels`]: the front-to-back traversal kernels.
//! * [`oracle`]: brute-force ground truth and kernel validation.

pub mod bvh;
pub mod float_interval;
pub mod geometry;
pub mod hit_order;
pub mod kernels;
pub mod oracle;
pub mod pipeline;
pub mod scene;
