use std::fmt;
use std::str::FromStr;

use ftb_core::hit_order::HitDesc;
use ftb_core::kernels::{FtbKernel, KernelError};
use ftb_core::pipeline::TraceStats;
use ftb_core::scene::Scene;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::user_code::{PixelUserCode, UserCodeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Shading {
    /// Colour from the number of user-code calls.
    #[default]
    Count,
    /// Colour from the call count and the distance of the last hit.
    LastT,
    /// Colour from the call count and the full last-hit tuple.
    LastHit,
}

impl FromStr for Shading {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "count" => Ok(Shading::Count),
            "last-t" => Ok(Shading::LastT),
            "last-hit" => Ok(Shading::LastHit),
            _ => Err(format!(
                "unknown shading {s:?} (expected count, last-t or last-hit)"
            )),
        }
    }
}

impl fmt::Display for Shading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shading::Count => "count",
            Shading::LastT => "last-t",
            Shading::LastHit => "last-hit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelResult {
    pub count: u32,
    pub last: Option<HitDesc>,
    pub stats: TraceStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    /// Row-major, top row first.
    pub pixels: Vec<PixelResult>,
}

impl Frame {
    pub fn stats(&self) -> TraceStats {
        self.pixels.iter().map(|p| p.stats).sum()
    }

    pub fn colors(&self, shading: Shading) -> Vec<[u8; 3]> {
        self.pixels
            .iter()
            .map(|p| pseudo_color(p, shading))
            .collect()
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self, shading: Shading) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for c in self.colors(shading) {
            out.extend_from_slice(&c);
        }
        out
    }
}

/// Runs the kernel once per pixel. Pixels render in parallel but results
/// are collected by pixel index.
pub fn render(
    scene: &Scene,
    camera: &Camera,
    kernel: &dyn FtbKernel,
    user: UserCodeSpec,
) -> Result<Frame, KernelError> {
    let width = camera.width();
    let pixels = (0..camera.pixel_count())
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % width as usize) as u32, (i / width as usize) as u32);
            let mut code = PixelUserCode::new(user, x, y);
            let report = kernel.run(scene, &camera.ray(x, y), &mut code)?;
            Ok(PixelResult {
                count: code.count,
                last: code.last,
                stats: report.stats,
            })
        })
        .collect::<Result<Vec<_>, KernelError>>()?;
    Ok(Frame {
        width,
        height: camera.height(),
        pixels,
    })
}

/// splitmix64 finalizer.
fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x9e37_79b9_7f4a_7c15, |h, &w| {
        avalanche(h ^ avalanche(w.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    })
}

/// Black for pixels whose user code never ran; otherwise a colour that
/// changes completely with any change in the shaded quantities.
pub fn pseudo_color(p: &PixelResult, shading: Shading) -> [u8; 3] {
    if p.count == 0 {
        return [0, 0, 0];
    }
    let last = p.last.unwrap_or(HitDesc::sentinel(0.0));
    let h = match shading {
        Shading::Count => hash_words(&[p.count as u64]),
        Shading::LastT => hash_words(&[p.count as u64, last.t.to_bits() as u64]),
        Shading::LastHit => hash_words(&[
            p.count as u64,
            last.t.to_bits() as u64,
            last.inst as u32 as u64,
            last.geom as u32 as u64,
            last.prim as u32 as u64,
        ]),
    };
    // Keep every channel away from zero so no hit pixel reads as background.
    [
        (h as u8) | 0x20,
        ((h >> 8) as u8) | 0x20,
        ((h >> 16) as u8) | 0x20,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use ftb_core::geometry::Vec3;
    use ftb_core::kernels::KernelId;
    use ftb_core::scene::{gen_coplanar_stack, SceneDesc};

    use crate::camera::View;
    use crate::source::GeneratorSpec;

    fn pixel(count: u32, t: f32) -> PixelResult {
        PixelResult {
            count,
            last: HitDesc::new(t, 0, 0, 0).ok(),
            stats: TraceStats::default(),
        }
    }

    #[test]
    fn empty_scene_pixel_is_background() {
        let scene = SceneDesc::default().build().unwrap();
        let view = View {
            position: Vec3::ZERO,
            look_at: Vec3::new(0.0, 0.0, 1.0),
            up: Vec3::new(0.0, 1.0, 0.0),
            fov_y: 45.0,
        };
        let frame = render(
            &scene,
            &Camera::new(view, 1, 1).unwrap(),
            &KernelId::WhileWhile,
            UserCodeSpec::CountAll,
        )
        .unwrap();
        assert_eq!(
            frame.to_ppm(Shading::Count),
            b"P6\n1 1\n255\n\0\0\0".to_vec()
        );
        assert_eq!(frame.stats().traces, 1);
    }

    #[test]
    fn stack_interior_counts_every_layer() {
        let g = GeneratorSpec::CoplanarStack { n: 8, same_t: true };
        let scene = gen_coplanar_stack(8, true).unwrap().build().unwrap();
        let camera = Camera::new(g.canonical_view(), 9, 9).unwrap();
        let frame = render(
            &scene,
            &camera,
            &KernelId::WhileWhile,
            UserCodeSpec::CountAll,
        )
        .unwrap();
        // The centre ray lies on each quad's diagonal and hits both triangles.
        assert_eq!(frame.pixels[4 * 9 + 4].count, 16);
        assert_eq!(frame.pixels[4 * 9 + 3].count, 8);
        assert_eq!(frame.pixels[0].count, 0);
        let eight = pseudo_color(&pixel(8, 6.0), Shading::Count);
        assert_eq!(frame.colors(Shading::Count)[4 * 9 + 3], eight);
    }

    #[test]
    fn colours_separate_small_differences() {
        assert_ne!(
            pseudo_color(&pixel(3, 1.0), Shading::Count),
            pseudo_color(&pixel(4, 1.0), Shading::Count)
        );
        let t = 1.0f32;
        let next = f32::from_bits(t.to_bits() + 1);
        assert_eq!(
            pseudo_color(&pixel(1, t), Shading::Count),
            pseudo_color(&pixel(1, next), Shading::Count)
        );
        assert_ne!(
            pseudo_color(&pixel(1, t), Shading::LastT),
            pseudo_color(&pixel(1, next), Shading::LastT)
        );
        assert_ne!(pseudo_color(&pixel(1, t), Shading::Count), [0, 0, 0]);
    }

    #[test]
    fn shading_names_round_trip() {
        for s in [Shading::Count, Shading::LastT, Shading::LastHit] {
            assert_eq!(s.to_string().parse::<Shading>().unwrap(), s);
        }
    }
}
