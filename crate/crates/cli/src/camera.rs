use ftb_core::geometry::{Ray, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("image size must be at least 1x1, got {0}x{1}")]
    EmptyImage(u32, u32),
    #[error("vertical field of view must lie in (0, 180) degrees, got {0}")]
    FieldOfView(f32),
    #[error("camera position and look-at point coincide")]
    NoDirection,
    #[error("up vector is parallel to the view direction")]
    DegenerateUp,
    #[error("camera parameters must be finite")]
    NonFinite,
}

/// Where the camera sits and what it sees; the image size is chosen
/// separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct View {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub fov_y: f32,
}

/// Pinhole camera shooting one ray per pixel through the pixel centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    view: View,
    width: u32,
    height: u32,
    origin: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
}

impl Camera {
    pub fn new(view: View, width: u32, height: u32) -> Result<Self, CameraError> {
        if width == 0 || height == 0 {
            return Err(CameraError::EmptyImage(width, height));
        }
        if !(view.position.is_finite()
            && view.look_at.is_finite()
            && view.up.is_finite()
            && view.fov_y.is_finite())
        {
            return Err(CameraError::NonFinite);
        }
        if !(view.fov_y > 0.0 && view.fov_y < 180.0) {
            return Err(CameraError::FieldOfView(view.fov_y));
        }
        let forward = view.look_at - view.position;
        if forward.length() == 0.0 {
            return Err(CameraError::NoDirection);
        }
        let forward = forward.normalized();
        let right = forward.cross(view.up);
        if right.length() <= 1.0e-6 * view.up.length() {
            return Err(CameraError::DegenerateUp);
        }
        let right = right.normalized();
        let up = right.cross(forward);
        let half_h = (view.fov_y.to_radians() * 0.5).tan();
        let half_w = half_h * width as f32 / height as f32;
        Ok(Camera {
            view,
            width,
            height,
            origin: view.position,
            forward,
            right: right * half_w,
            up: up * half_h,
        })
    }

    pub fn view(&self) -> &View {
        &self.view
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Primary ray through the centre of pixel `(x, y)`, row 0 at the top.
    pub fn ray(&self, x: u32, y: u32) -> Ray {
        let sx = 2.0 * (x as f32 + 0.5) / self.width as f32 - 1.0;
        let sy = 1.0 - 2.0 * (y as f32 + 0.5) / self.height as f32;
        let dir = self.forward + self.right * sx + self.up * sy;
        Ray::new(self.origin, dir, 0.0, f32::INFINITY)
    }

    /// All primary rays in row-major order.
    pub fn rays(&self) -> Vec<Ray> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.ray(x, y))
            .collect()
    }
}
