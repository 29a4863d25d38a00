//! Test rig around the front-to-back kernels: loads scenes, renders one
//! ray per pixel, diffs kernels against each other and validates them
//! against the brute-force oracle.

pub mod app;
pub mod camera;
pub mod compare;
pub mod manifest;
pub mod render;
pub mod source;
pub mod user_code;
pub mod validate;
