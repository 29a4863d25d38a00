//! JSON scene manifests.
//!
//! ```json
//! {
//!   "meshes": [{ "path": "bunny.obj" },
//!              { "inline": { "vertices": [[0,0,0],[1,0,0],[0,1,0]], "indices": [[0,1,2]] } }],
//!   "geometries": [{ "mesh": 0, "sbtOffset": 0 }, { "mesh": 1, "sbtOffset": 1 }],
//!   "instances": [{ "geometries": [0, 1],
//!                   "transform": [[1,0,0,0],[0,1,0,0],[0,0,1,5]] }],
//!   "camera": { "position": [0,0,-5], "lookAt": [0,0,0], "up": [0,1,0], "fovY": 45 },
//!   "leafSize": 4
//! }
//! ```
//!
//! Mesh paths are relative to the manifest's directory. `transform` is the
//! object-to-world matrix as three rows of four and defaults to identity;
//! `camera` and `leafSize` are optional.

use std::path::{Path, PathBuf};

use ftb_core::bvh::BuildOptions;
use ftb_core::geometry::{Affine3, Vec3};
use ftb_core::scene::{load_obj, GeometryDesc, InstanceDesc, Mesh, SceneDesc, SceneError};
use serde::{Deserialize, Serialize};

use crate::camera::View;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum MeshSource {
    Path(PathBuf),
    Inline {
        vertices: Vec<Vec3>,
        indices: Vec<[u32; 3]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ManifestGeometry {
    pub mesh: usize,
    pub sbt_offset: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ManifestInstance {
    pub geometries: Vec<usize>,
    #[serde(default = "identity_rows")]
    pub transform: [[f32; 4]; 3],
}

fn identity_rows() -> [[f32; 4]; 3] {
    Affine3::IDENTITY.to_rows()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Manifest {
    pub meshes: Vec<MeshSource>,
    pub geometries: Vec<ManifestGeometry>,
    pub instances: Vec<ManifestInstance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<View>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_size: Option<usize>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Resolves mesh files against `base_dir` and assembles the scene.
    pub fn to_scene_desc(&self, base_dir: &Path) -> Result<SceneDesc, SceneError> {
        let meshes = self
            .meshes
            .iter()
            .map(|m| match m {
                MeshSource::Path(p) => load_obj(base_dir.join(p)),
                MeshSource::Inline { vertices, indices } => {
                    Mesh::new(vertices.clone(), indices.clone())
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut build = BuildOptions::default();
        if let Some(leaf_size) = self.leaf_size {
            build.leaf_size = leaf_size;
        }
        Ok(SceneDesc {
            meshes,
            geometries: self
                .geometries
                .iter()
                .map(|g| GeometryDesc {
                    mesh: g.mesh,
                    sbt_offset: g.sbt_offset,
                })
                .collect(),
            instances: self
                .instances
                .iter()
                .map(|i| InstanceDesc {
                    geometries: i.geometries.clone(),
                    transform: Affine3::from_rows(i.transform),
                })
                .collect(),
            build,
        })
    }
}
