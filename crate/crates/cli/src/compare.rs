use std::io::Write;

use ftb_core::kernels::{FtbKernel, KernelError, KernelId};
use ftb_core::pipeline::TraceStats;
use ftb_core::scene::Scene;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::render::{render, Frame, Shading};
use crate::user_code::UserCodeSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelDiff {
    pub reference: String,
    pub kernel: String,
    pub differing_pixels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub kernels: Vec<KernelId>,
    pub frames: Vec<Frame>,
    /// Each kernel's image against the first kernel's.
    pub diffs: Vec<PixelDiff>,
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    kernel: &'a str,
    traces: u64,
    #[serde(rename = "ahCalls")]
    ah_calls: u64,
    #[serde(rename = "chCalls")]
    ch_calls: u64,
    #[serde(rename = "userCodeCalls")]
    user_code_calls: u64,
    #[serde(rename = "nodesVisited")]
    nodes_visited: u64,
    #[serde(rename = "triTests")]
    tri_tests: u64,
}

impl Comparison {
    pub fn stats(&self) -> Vec<(String, TraceStats)> {
        self.kernels
            .iter()
            .zip(&self.frames)
            .map(|(k, f)| (k.name(), f.stats()))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (kernel, s) in self.stats() {
            w.serialize(CsvRow {
                kernel: &kernel,
                traces: s.traces,
                ah_calls: s.ah_calls,
                ch_calls: s.ch_calls,
                user_code_calls: s.user_code_calls,
                nodes_visited: s.nodes_visited,
                tri_tests: s.tri_tests,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Renders every kernel over the same rays and counts pixels whose shaded
/// colour differs from the first kernel's.
pub fn compare(
    scene: &Scene,
    camera: &Camera,
    kernels: &[KernelId],
    user: UserCodeSpec,
    shading: Shading,
) -> Result<Comparison, KernelError> {
    let frames = kernels
        .iter()
        .map(|k| render(scene, camera, k, user))
        .collect::<Result<Vec<_>, _>>()?;
    let mut diffs = Vec::new();
    if let Some((reference, rest)) = frames.split_first() {
        let base = reference.colors(shading);
        for (k, frame) in kernels[1..].iter().zip(rest) {
            let differing_pixels = frame
                .colors(shading)
                .iter()
                .zip(&base)
                .filter(|(a, b)| a != b)
                .count();
            diffs.push(PixelDiff {
                reference: kernels[0].name(),
                kernel: k.name(),
                differing_pixels,
            });
        }
    }
    Ok(Comparison {
        kernels: kernels.to_vec(),
        frames,
        diffs,
    })
}
