//! Where a scene comes from: an OBJ file, a JSON manifest, or one of the
//! procedural generators, each with a default view.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ftb_core::geometry::{Aabb, Vec3};
use ftb_core::scene::{
    gen_abutting_boxes, gen_coplanar_stack, gen_instanced_grid, gen_late_flip, gen_order_hazard,
    load_obj, SceneDesc, SceneError, GRID_SPACING,
};
use thiserror::Error;

use crate::camera::View;
use crate::manifest::Manifest;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("bad generator spec {spec:?}: {reason}")]
    Generator { spec: String, reason: String },
    #[error("cannot tell the scene format of {0:?} (expected .obj or .json)")]
    UnknownFormat(PathBuf),
    #[error("cannot read {path:?}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad manifest {path:?}: {source}")]
    Manifest {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorSpec {
    CoplanarStack { n: usize, same_t: bool },
    AbuttingBoxes { k: usize },
    InstancedGrid { m: usize },
    OrderHazard,
    LateFlip,
}

impl GeneratorSpec {
    pub fn scene_desc(&self) -> Result<SceneDesc, SceneError> {
        match *self {
            GeneratorSpec::CoplanarStack { n, same_t } => gen_coplanar_stack(n, same_t),
            GeneratorSpec::AbuttingBoxes { k } => gen_abutting_boxes(k),
            GeneratorSpec::InstancedGrid { m } => gen_instanced_grid(m),
            GeneratorSpec::OrderHazard => Ok(gen_order_hazard()),
            GeneratorSpec::LateFlip => Ok(gen_late_flip()),
        }
    }

    /// The view each generator is meant to be looked at from.
    pub fn canonical_view(&self) -> View {
        let up = Vec3::new(0.0, 1.0, 0.0);
        let plus_z = |x: f32, y: f32, z0: f32, z1: f32, fov_y: f32| View {
            position: Vec3::new(x, y, z0),
            look_at: Vec3::new(x, y, z1),
            up,
            fov_y,
        };
        match *self {
            // Narrow view straight down the stack; the border pixels miss.
            GeneratorSpec::CoplanarStack { .. } => plus_z(0.5, 0.5, -5.0, 5.0, 7.0),
            // Nearly along the row of boxes, so rays cross every shared face.
            GeneratorSpec::AbuttingBoxes { k } => View {
                position: Vec3::new(-4.0, 0.0625, -0.03125),
                look_at: Vec3::new(k as f32, 0.0625, -0.03125),
                up,
                fov_y: 12.0,
            },
            GeneratorSpec::InstancedGrid { m } => {
                let extent = GRID_SPACING * (m.max(1) - 1) as f32 + 1.0;
                let c = extent * 0.5;
                let fov = 2.0 * (0.6 * extent / 10.0f32).atan().to_degrees();
                plus_z(c, c, -5.0, 5.0, fov)
            }
            GeneratorSpec::OrderHazard | GeneratorSpec::LateFlip => {
                plus_z(0.25, 0.25, -1.0, 9.0, 20.0)
            }
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::CoplanarStack { n, same_t } => {
                write!(f, "coplanar-stack:n={n},same-t={same_t}")
            }
            GeneratorSpec::AbuttingBoxes { k } => write!(f, "abutting-boxes:k={k}"),
            GeneratorSpec::InstancedGrid { m } => write!(f, "instanced-grid:m={m}"),
            GeneratorSpec::OrderHazard => f.write_str("order-hazard"),
            GeneratorSpec::LateFlip => f.write_str("late-flip"),
        }
    }
}

/// `name` or `name:key=value,key=value`.
impl FromStr for GeneratorSpec {
    type Err = SourceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: String| SourceError::Generator {
            spec: s.to_string(),
            reason,
        };
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = BTreeMap::new();
        for pair in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| fail(format!("expected key=value, got {pair:?}")))?;
            params.insert(k.trim(), v.trim());
        }
        let mut take = |key: &str| params.remove(key);
        let count = |v: Option<&str>, default: usize| -> Result<usize, SourceError> {
            match v {
                None => Ok(default),
                Some(v) => match v.parse::<usize>() {
                    Ok(n) if n >= 1 => Ok(n),
                    _ => Err(fail(format!("expected a positive integer, got {v:?}"))),
                },
            }
        };
        let spec = match name {
            "coplanar-stack" => GeneratorSpec::CoplanarStack {
                n: count(take("n"), 8)?,
                same_t: match take("same-t") {
                    None | Some("true") => true,
                    Some("false") => false,
                    Some(v) => {
                        return Err(fail(format!("same-t must be true or false, got {v:?}")))
                    }
                },
            },
            "abutting-boxes" => GeneratorSpec::AbuttingBoxes {
                k: count(take("k"), 5)?,
            },
            "instanced-grid" => GeneratorSpec::InstancedGrid {
                m: count(take("m"), 3)?,
            },
            "order-hazard" => GeneratorSpec::OrderHazard,
            "late-flip" => GeneratorSpec::LateFlip,
            other => return Err(fail(format!("unknown generator {other:?}"))),
        };
        if let Some(key) = params.keys().next() {
            return Err(fail(format!("unknown parameter {key:?}")));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneSource {
    Obj(PathBuf),
    Manifest(PathBuf),
    Generator(GeneratorSpec),
}

pub struct LoadedScene {
    pub desc: SceneDesc,
    pub view: View,
}

impl SceneSource {
    /// Picks OBJ or manifest by file extension.
    pub fn from_path(path: &Path) -> Result<Self, SourceError> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("obj") => Ok(SceneSource::Obj(path.to_path_buf())),
            Some("json") => Ok(SceneSource::Manifest(path.to_path_buf())),
            _ => Err(SourceError::UnknownFormat(path.to_path_buf())),
        }
    }

    pub fn load(&self) -> Result<LoadedScene, SourceError> {
        match self {
            SceneSource::Generator(g) => Ok(LoadedScene {
                desc: g.scene_desc()?,
                view: g.canonical_view(),
            }),
            SceneSource::Obj(path) => {
                let desc = SceneDesc::single_mesh(load_obj(path)?);
                let view = framing_view(&desc);
                Ok(LoadedScene { desc, view })
            }
            SceneSource::Manifest(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| SourceError::Io {
                    path: path.clone(),
                    source,
                })?;
                let manifest = Manifest::parse(&text).map_err(|source| SourceError::Manifest {
                    path: path.clone(),
                    source,
                })?;
                let desc = manifest.to_scene_desc(path.parent().unwrap_or(Path::new(".")))?;
                let view = manifest.camera.unwrap_or_else(|| framing_view(&desc));
                Ok(LoadedScene { desc, view })
            }
        }
    }
}

impl fmt::Display for SceneSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneSource::Obj(p) | SceneSource::Manifest(p) => write!(f, "{}", p.display()),
            SceneSource::Generator(g) => write!(f, "{g}"),
        }
    }
}

/// Looks down `+z` at the object-space bounds of all meshes, far enough
/// back that they fill most of a 45 degree view.
fn framing_view(desc: &SceneDesc) -> View {
    let bounds = desc
        .meshes
        .iter()
        .flat_map(|m| m.vertices().iter().copied())
        .fold(Aabb::EMPTY, Aabb::grow);
    let (center, radius) = if bounds.is_empty() {
        (Vec3::ZERO, 1.0)
    } else {
        (
            bounds.center(),
            (bounds.hi - bounds.lo).length().max(1.0e-3) * 0.5,
        )
    };
    let distance = radius / (22.5f32).to_radians().tan() * 1.1;
    View {
        position: center - Vec3::new(0.0, 0.0, distance + radius),
        look_at: center,
        up: Vec3::new(0.0, 1.0, 0.0),
        fov_y: 45.0,
    }
}
