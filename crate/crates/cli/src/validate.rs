use ftb_core::kernels::{FtbKernel, KernelId};
use ftb_core::oracle::{
    check_rebuild_stability, validate_kernel, StabilityReport, ValidationReport,
};
use ftb_core::scene::{SceneDesc, SceneError};
use serde::{Deserialize, Serialize};

use crate::camera::Camera;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelVerdict {
    pub kernel: String,
    pub passed: bool,
    /// Pixel `(x, y)` of the first failing ray.
    pub first_failure_pixel: Option<[u32; 2]>,
    pub validation: ValidationReport,
    pub stability: StabilityReport,
    pub stability_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidateReport {
    pub scene: String,
    pub width: u32,
    pub height: u32,
    pub rays: usize,
    pub seeds: Vec<u64>,
    pub passed: bool,
    pub kernels: Vec<KernelVerdict>,
}

/// Checks each kernel against the oracle on every camera ray, then checks
/// rebuild stability under each seed: exact sequences for stable kernels,
/// distance-group contents for the rest.
pub fn validate(
    scene_name: &str,
    desc: &SceneDesc,
    camera: &Camera,
    kernels: &[&dyn FtbKernel],
    seeds: &[u64],
) -> Result<ValidateReport, SceneError> {
    let scene = desc.build()?;
    let rays = camera.rays();
    let mut verdicts = Vec::new();
    for &kernel in kernels {
        let validation = validate_kernel(kernel, &scene, &rays);
        let stability = check_rebuild_stability(kernel, desc, &rays, seeds)?;
        let stability_passed = stability.passed(kernel.is_stable());
        let first_failure_pixel = validation.first_failure.as_ref().map(|f| {
            [
                (f.ray_index % camera.width() as usize) as u32,
                (f.ray_index / camera.width() as usize) as u32,
            ]
        });
        verdicts.push(KernelVerdict {
            kernel: kernel.name(),
            passed: validation.passed() && stability_passed,
            first_failure_pixel,
            validation,
            stability,
            stability_passed,
        });
    }
    Ok(ValidateReport {
        scene: scene_name.to_string(),
        width: camera.width(),
        height: camera.height(),
        rays: rays.len(),
        seeds: seeds.to_vec(),
        passed: verdicts.iter().all(|v| v.passed),
        kernels: verdicts,
    })
}

pub fn as_dyn(kernels: &[KernelId]) -> Vec<&dyn FtbKernel> {
    kernels.iter().map(|k| k as &dyn FtbKernel).collect()
}
