//! Meshes, geometries, instances, and the built two-level scene.
//!
//! A [`SceneDesc`] is plain data (what the OBJ loader, the JSON manifest and
//! the procedural generators produce). [`SceneDesc::build`] validates it and
//! builds one BLAS per geometry plus a TLAS over instances.

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use crate::bvh::{BuildOptions, Bvh, BvhError};
use crate::geometry::{Aabb, Affine3, InstanceTransform, Triangle, Vec3};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {tri} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        tri: usize,
        index: u32,
        count: usize,
    },
    #[error("vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("geometry {geometry} references missing mesh {mesh}")]
    MissingMesh { geometry: usize, mesh: usize },
    #[error("instance {instance} references missing geometry {geometry}")]
    MissingGeometry { instance: usize, geometry: usize },
    #[error("instance {instance} lists geometry {geometry} more than once")]
    DuplicateGeometry { instance: usize, geometry: usize },
    #[error("sbt offset {0} used by more than one geometry")]
    DuplicateSbtOffset(u32),
    #[error("instance {instance}: {source}")]
    Transform {
        instance: usize,
        #[source]
        source: crate::geometry::SingularTransform,
    },
    #[error("geometry {geometry}: {source}")]
    Bvh {
        geometry: usize,
        #[source]
        source: BvhError,
    },
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    indices: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, indices: Vec<[u32; 3]>) -> Result<Self, SceneError> {
        if let Some(bad) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(SceneError::NonFiniteVertex(bad));
        }
        for (tri, idx) in indices.iter().enumerate() {
            for &index in idx {
                if index as usize >= vertices.len() {
                    return Err(SceneError::IndexOutOfRange {
                        tri,
                        index,
                        count: vertices.len(),
                    });
                }
            }
        }
        Ok(Mesh { vertices, indices })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn indices(&self) -> &[[u32; 3]] {
        &self.indices
    }

    pub fn triangle_count(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn triangle(&self, i: usize) -> Triangle {
        let [a, b, c] = self.indices[i];
        Triangle::new(
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        )
    }

    pub fn triangles(&self) -> impl Iterator<Item = Triangle> + '_ {
        (0..self.indices.len()).map(|i| self.triangle(i))
    }
}

/// Reads a Wavefront OBJ file. Only `v` and `f` records are used.
pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(&text)
}

/// Parses OBJ text. Polygons are fanned around their first vertex, in face
/// order, so primitive indices are stable across loads. Indices may be
/// 1-based or negative (relative to the vertices read so far); `v/vt/vn`
/// forms keep only the position index.
pub fn parse_obj(text: &str) -> Result<Mesh, SceneError> {
    let mut vertices = Vec::new();
    let mut indices = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut xyz = [0.0f32; 3];
                for c in &mut xyz {
                    let field = fields.next().ok_or_else(|| SceneError::Parse {
                        line: line_no,
                        message: "vertex needs three coordinates".into(),
                    })?;
                    *c = field.parse().map_err(|_| SceneError::Parse {
                        line: line_no,
                        message: format!("bad coordinate {field:?}"),
                    })?;
                }
                vertices.push(Vec3::from(xyz));
            }
            Some("f") => {
                let face = fields
                    .map(|f| resolve_index(f, vertices.len(), line_no))
                    .collect::<Result<Vec<u32>, _>>()?;
                if face.len() < 3 {
                    return Err(SceneError::Parse {
                        line: line_no,
                        message: "face needs at least three vertices".into(),
                    });
                }
                for k in 1..face.len() - 1 {
                    indices.push([face[0], face[k], face[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Mesh::new(vertices, indices)
}

fn resolve_index(field: &str, vertex_count: usize, line: usize) -> Result<u32, SceneError> {
    let pos = field.split('/').next().unwrap_or("");
    let raw: i64 = pos.parse().map_err(|_| SceneError::Parse {
        line,
        message: format!("bad face index {field:?}"),
    })?;
    let resolved = match raw {
        0 => None,
        r if r > 0 => Some(r - 1),
        r => Some(vertex_count as i64 + r),
    };
    match resolved {
        Some(i) if i >= 0 && (i as usize) < vertex_count => Ok(i as u32),
        _ => Err(SceneError::Parse {
            line,
            message: format!("face index {raw} out of range ({vertex_count} vertices so far)"),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryDesc {
    /// Index into [`SceneDesc::meshes`].
    pub mesh: usize,
    /// Shader-table offset; doubles as the geometry id reported with hits.
    pub sbt_offset: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDesc {
    /// Indices into [`SceneDesc::geometries`], traversed in this order.
    pub geometries: Vec<usize>,
    pub transform: Affine3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneDesc {
    pub meshes: Vec<Mesh>,
    pub geometries: Vec<GeometryDesc>,
    pub instances: Vec<InstanceDesc>,
    pub build: BuildOptions,
}

impl SceneDesc {
    /// One mesh, one geometry (sbt offset 0), one identity instance.
    pub fn single_mesh(mesh: Mesh) -> Self {
        SceneDesc {
            meshes: vec![mesh],
            geometries: vec![GeometryDesc {
                mesh: 0,
                sbt_offset: 0,
            }],
            instances: vec![InstanceDesc {
                geometries: vec![0],
                transform: Affine3::IDENTITY,
            }],
            build: BuildOptions::default(),
        }
    }

    pub fn with_build_options(mut self, build: BuildOptions) -> Self {
        self.build = build;
        self
    }

    pub fn build(&self) -> Result<Scene, SceneError> {
        self.build_with(self.build)
    }

    pub fn build_with(&self, opts: BuildOptions) -> Result<Scene, SceneError> {
        let mut offsets = HashSet::new();
        for (g, geom) in self.geometries.iter().enumerate() {
            if geom.mesh >= self.meshes.len() {
                return Err(SceneError::MissingMesh {
                    geometry: g,
                    mesh: geom.mesh,
                });
            }
            if !offsets.insert(geom.sbt_offset) {
                return Err(SceneError::DuplicateSbtOffset(geom.sbt_offset));
            }
        }

        let blas = self
            .geometries
            .iter()
            .enumerate()
            .map(|(g, geom)| {
                Bvh::build_for_mesh(&self.meshes[geom.mesh], opts).map_err(|source| {
                    SceneError::Bvh {
                        geometry: g,
                        source,
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut instances = Vec::with_capacity(self.instances.len());
        for (i, inst) in self.instances.iter().enumerate() {
            let mut seen = HashSet::new();
            for &g in &inst.geometries {
                if g >= self.geometries.len() {
                    return Err(SceneError::MissingGeometry {
                        instance: i,
                        geometry: g,
                    });
                }
                if !seen.insert(g) {
                    return Err(SceneError::DuplicateGeometry {
                        instance: i,
                        geometry: g,
                    });
                }
            }
            let transform =
                InstanceTransform::new(inst.transform).map_err(|source| SceneError::Transform {
                    instance: i,
                    source,
                })?;
            let object_bounds = inst
                .geometries
                .iter()
                .fold(Aabb::EMPTY, |acc, &g| acc.union(blas[g].bounds()));
            instances.push(Instance {
                index: i as u32,
                geometries: inst.geometries.clone(),
                transform,
                world_bounds: transform.transform_bounds(&object_bounds),
            });
        }

        let boxes: Vec<Aabb> = instances.iter().map(|i| i.world_bounds).collect();
        let tlas = Bvh::build(&boxes, opts).map_err(|source| SceneError::Bvh {
            geometry: usize::MAX,
            source,
        });
        // An empty scene has an empty TLAS rather than a build error.
        let tlas = if instances.is_empty() {
            Bvh::empty()
        } else {
            tlas?
        };

        Ok(Scene {
            desc: self.clone(),
            options: opts,
            blas,
            instances,
            tlas,
        })
    }
}

/// A built instance: transform, world bounds and the geometries it places.
#[derive(Debug, Clone)]
pub struct Instance {
    pub index: u32,
    pub geometries: Vec<usize>,
    pub transform: InstanceTransform,
    pub world_bounds: Aabb,
}

/// An immutable, traversable scene.
#[derive(Debug, Clone)]
pub struct Scene {
    desc: SceneDesc,
    options: BuildOptions,
    blas: Vec<Bvh>,
    instances: Vec<Instance>,
    tlas: Bvh,
}

impl Scene {
    pub fn desc(&self) -> &SceneDesc {
        &self.desc
    }

    pub fn build_options(&self) -> BuildOptions {
        self.options
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn tlas(&self) -> &Bvh {
        &self.tlas
    }

    pub fn blas(&self, geometry: usize) -> &Bvh {
        &self.blas[geometry]
    }

    pub fn mesh_of(&self, geometry: usize) -> &Mesh {
        &self.desc.meshes[self.desc.geometries[geometry].mesh]
    }

    pub fn sbt_offset(&self, geometry: usize) -> u32 {
        self.desc.geometries[geometry].sbt_offset
    }

    /// Total number of addressable (instance, geometry, primitive) triples.
    pub fn triangle_count(&self) -> usize {
        self.instances
            .iter()
            .flat_map(|i| &i.geometries)
            .map(|&g| self.mesh_of(g).triangle_count())
            .sum()
    }

    /// Rebuilds the acceleration structures with different options.
    pub fn rebuild(&self, opts: BuildOptions) -> Result<Scene, SceneError> {
        self.desc.build_with(opts)
    }
}

fn positive(name: &str, value: usize, min: usize) -> Result<(), SceneError> {
    if value < min {
        return Err(SceneError::InvalidParameter(format!(
            "{name} must be at least {min}, got {value}"
        )));
    }
    Ok(())
}

/// Pushes an axis-aligned quad `[x0,x1]×[y0,y1]` at height `z`, split along
/// the `(x1,y0)–(x0,y1)` diagonal: the first triangle covers the lower-left
/// half, the second the upper-right half. Both face `+z` viewers looking
/// down `+z` (counter-clockwise as seen from below).
fn push_quad_xy(
    vertices: &mut Vec<Vec3>,
    indices: &mut Vec<[u32; 3]>,
    x0: f32,
    x1: f32,
    y0: f32,
    y1: f32,
    z: f32,
) {
    let base = vertices.len() as u32;
    vertices.extend([
        Vec3::new(x0, y0, z),
        Vec3::new(x1, y0, z),
        Vec3::new(x1, y1, z),
        Vec3::new(x0, y1, z),
    ]);
    indices.push([base, base + 3, base + 1]);
    indices.push([base + 1, base + 3, base + 2]);
}

/// `n` unit quads over `[0,1]²`. With `same_t` they all lie exactly in the
/// plane `z = 5` (identical vertices); otherwise quad `k` sits at `z = 5 + k`.
/// Camera rays travelling along `+z` through a quad interior hit one
/// triangle per quad.
pub fn gen_coplanar_stack(n: usize, same_t: bool) -> Result<SceneDesc, SceneError> {
    positive("n", n, 1)?;
    let mut vertices = Vec::new();
    let mut indices = Vec::new();
    for k in 0..n {
        let z = if same_t { 5.0 } else { 5.0 + k as f32 };
        push_quad_xy(&mut vertices, &mut indices, 0.0, 1.0, 0.0, 1.0, z);
    }
    Ok(SceneDesc::single_mesh(Mesh::new(vertices, indices)?))
}

/// Closed box `[lo, hi]` as 12 outward-facing triangles.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> Mesh {
    let c = Aabb::new(lo, hi).corners();
    // Corner k has bit 0 = x, bit 1 = y, bit 2 = z.
    let faces: [[u32; 4]; 6] = [
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
    ];
    let mut indices = Vec::with_capacity(12);
    for [a, b, cc, d] in faces {
        indices.push([a, b, cc]);
        indices.push([a, cc, d]);
    }
    Mesh::new(c.to_vec(), indices).expect("box indices are in range")
}

/// `k` unit boxes `[i, i+1] × [-0.5, 0.5]²` along `x`, each its own
/// geometry (sbt offset `i`) in a single identity instance. Neighbouring
/// boxes share a face, so a ray down the `x` axis crosses two coincident
/// triangles at every interior boundary.
pub fn gen_abutting_boxes(k: usize) -> Result<SceneDesc, SceneError> {
    positive("k", k, 2)?;
    let meshes: Vec<Mesh> = (0..k)
        .map(|i| {
            let x = i as f32;
            box_mesh(Vec3::new(x, -0.5, -0.5), Vec3::new(x + 1.0, 0.5, 0.5))
        })
        .collect();
    let geometries = (0..k)
        .map(|i| GeometryDesc {
            mesh: i,
            sbt_offset: i as u32,
        })
        .collect();
    Ok(SceneDesc {
        meshes,
        geometries,
        instances: vec![InstanceDesc {
            geometries: (0..k).collect(),
            transform: Affine3::IDENTITY,
        }],
        build: BuildOptions::default(),
    })
}

/// Spacing between neighbouring grid instances; less than the cube size, so
/// neighbours overlap and their `z` faces are coplanar.
pub const GRID_SPACING: f32 = 0.75;

/// `m × m` instances of the cube `[0,1]² × [5,6]`, translated by
/// `(0.75 i, 0.75 j, 0)`. Instance `j * m + i` is at grid cell `(i, j)`;
/// instance 0 has the identity transform. Neighbouring cubes overlap, so
/// rays along `z` through an overlap hit faces of several instances at the
/// same distance.
pub fn gen_instanced_grid(m: usize) -> Result<SceneDesc, SceneError> {
    positive("m", m, 1)?;
    let cube = box_mesh(Vec3::new(0.0, 0.0, 5.0), Vec3::new(1.0, 1.0, 6.0));
    let mut instances = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let transform = if i == 0 && j == 0 {
                Affine3::IDENTITY
            } else {
                Affine3::translation(Vec3::new(
                    GRID_SPACING * i as f32,
                    GRID_SPACING * j as f32,
                    0.0,
                ))
            };
            instances.push(InstanceDesc {
                geometries: vec![0],
                transform,
            });
        }
    }
    Ok(SceneDesc {
        meshes: vec![cube],
        geometries: vec![GeometryDesc {
            mesh: 0,
            sbt_offset: 0,
        }],
        instances,
        build: BuildOptions::default(),
    })
}

/// Two instances whose BVH visit order depends on the ray's `t_min`.
///
/// Probe ray: origin `(0.25, 0.25, 0)`, direction `+z`.
///
/// * Instance 0 holds a triangle at `z = 9` on the probe ray plus an
///   off-ray triangle at `z = 1`, so its box is entered at `t = 1`.
/// * Instance 1 holds triangles at `z = 3` and `z = 9` on the probe ray
///   plus an off-ray triangle at `z = 12`, so its box is entered at `t = 3`
///   and its centroid lies lower on the TLAS split axis.
///
/// With `t_min = 0` instance 0 is visited first (its far hit at 9 arrives
/// before instance 1's hit at 3). With `t_min` just below 9 both entries
/// clamp to `t_min` and the tie falls to instance 1, so the two hits at
/// `t = 9` are visited in the opposite order. Built with leaf size 1 so
/// every triangle sits in its own leaf.
pub fn gen_order_hazard() -> SceneDesc {
    let tri = |x: f32, y: f32, z: f32, s: f32| {
        [
            Vec3::new(x, y, z),
            Vec3::new(x + s, y, z),
            Vec3::new(x, y + s, z),
        ]
    };
    let mesh_from = |tris: &[[Vec3; 3]]| {
        let vertices: Vec<Vec3> = tris.iter().flatten().copied().collect();
        let indices = (0..tris.len() as u32)
            .map(|i| [3 * i, 3 * i + 1, 3 * i + 2])
            .collect();
        Mesh::new(vertices, indices).expect("hazard mesh is valid")
    };
    let first = mesh_from(&[tri(0.0, 0.0, 9.0, 1.0), tri(3.0, 3.0, 1.0, 1.0)]);
    let second = mesh_from(&[
        tri(0.0, 0.0, 3.0, 1.0),
        tri(0.0, 0.0, 9.0, 1.0),
        tri(-3.0, -3.0, 12.0, 1.0),
    ]);
    SceneDesc {
        meshes: vec![first, second],
        geometries: vec![
            GeometryDesc {
                mesh: 0,
                sbt_offset: 0,
            },
            GeometryDesc {
                mesh: 1,
                sbt_offset: 1,
            },
        ],
        instances: vec![
            InstanceDesc {
                geometries: vec![0],
                transform: Affine3::IDENTITY,
            },
            InstanceDesc {
                geometries: vec![1],
                transform: Affine3::IDENTITY,
            },
        ],
        build: BuildOptions {
            leaf_size: 1,
            ..BuildOptions::default()
        },
    }
}

/// Two instances whose hits at `t = 9` swap traversal order between
/// `t_min = 0` and `t_min = just_below(9)`, with nothing hit before them.
///
/// Instance 1's box is entered at `t = 5` (off-ray triangles at `z = 5`
/// and `z = 12`), instance 0's at `t = 1`. From `t_min = 0` instance 0 comes
/// first; once `t_min` passes 5 both entries clamp to `t_min` and the tie
/// falls to instance 1. Probe ray: origin `(0.25, 0.25, 0)`, direction `+z`.
pub fn gen_late_flip() -> SceneDesc {
    let tri = |x: f32, y: f32, z: f32| {
        [
            Vec3::new(x, y, z),
            Vec3::new(x + 1.0, y, z),
            Vec3::new(x, y + 1.0, z),
        ]
    };
    let mesh_from = |tris: &[[Vec3; 3]]| {
        let vertices: Vec<Vec3> = tris.iter().flatten().copied().collect();
        let indices = (0..tris.len() as u32)
            .map(|i| [3 * i, 3 * i + 1, 3 * i + 2])
            .collect();
        Mesh::new(vertices, indices).expect("late-flip mesh is valid")
    };
    let instance = |g: usize| InstanceDesc {
        geometries: vec![g],
        transform: Affine3::IDENTITY,
    };
    SceneDesc {
        meshes: vec![
            mesh_from(&[tri(0.0, 0.0, 9.0), tri(3.0, 3.0, 1.0)]),
            mesh_from(&[
                tri(0.0, 0.0, 9.0),
                tri(-5.0, -5.0, 5.0),
                tri(-5.0, -5.0, 12.0),
            ]),
        ],
        geometries: vec![
            GeometryDesc {
                mesh: 0,
                sbt_offset: 0,
            },
            GeometryDesc {
                mesh: 1,
                sbt_offset: 1,
            },
        ],
        instances: vec![instance(0), instance(1)],
        build: BuildOptions {
            leaf_size: 1,
            ..BuildOptions::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvh::PrimOrder;

    #[test]
    fn single_triangle_obj() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(mesh.triangle_count(), 1);
        assert_eq!(mesh.indices(), &[[0, 1, 2]]);
    }

    #[test]
    fn quad_is_fanned() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(mesh.indices(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn negative_and_slashed_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3/1/1 -2//1 -1\n";
        assert_eq!(parse_obj(text).unwrap().indices(), &[[0, 1, 2]]);
    }

    #[test]
    fn comments_and_unknown_records_skipped() {
        let text = "# header\no thing\nv 0 0 0 # origin\nv 1 0 0\nv 0 1 0\nusemtl x\nf 1 2 3\n";
        assert_eq!(parse_obj(text).unwrap().triangle_count(), 1);
    }

    #[test]
    fn malformed_records_report_line() {
        match parse_obj("v 0 0 0\nv 1 zero 0\n") {
            Err(SceneError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n") {
            Err(SceneError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_obj("v 0 0\n"),
            Err(SceneError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_obj("v 0 0 0\nf 1 1\n"),
            Err(SceneError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_obj("/nonexistent/mesh.obj"),
            Err(SceneError::Io { .. })
        ));
    }

    #[test]
    fn reload_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        std::fs::write(
            &path,
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4 5\n",
        )
        .unwrap();
        let a = load_obj(&path).unwrap();
        let b = load_obj(&path).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.triangle_count(), 3);
    }

    #[test]
    fn mesh_validates_indices() {
        assert!(matches!(
            Mesh::new(vec![Vec3::ZERO], vec![[0, 0, 1]]),
            Err(SceneError::IndexOutOfRange {
                tri: 0,
                index: 1,
                count: 1
            })
        ));
        assert!(Mesh::new(vec![Vec3::splat(f32::NAN)], vec![]).is_err());
    }

    #[test]
    fn generators_reject_bad_counts() {
        assert!(gen_coplanar_stack(0, true).is_err());
        assert!(gen_abutting_boxes(1).is_err());
        assert!(gen_instanced_grid(0).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            gen_coplanar_stack(5, false).unwrap(),
            gen_coplanar_stack(5, false).unwrap()
        );
        assert_eq!(
            gen_abutting_boxes(4).unwrap(),
            gen_abutting_boxes(4).unwrap()
        );
        assert_eq!(
            gen_instanced_grid(3).unwrap(),
            gen_instanced_grid(3).unwrap()
        );
    }

    #[test]
    fn coplanar_stack_shape() {
        let same = gen_coplanar_stack(3, true).unwrap();
        assert_eq!(same.meshes[0].triangle_count(), 6);
        assert!(same.meshes[0].vertices().iter().all(|v| v.z == 5.0));
        let spread = gen_coplanar_stack(3, false).unwrap();
        let zs: HashSet<u32> = spread.meshes[0]
            .vertices()
            .iter()
            .map(|v| v.z.to_bits())
            .collect();
        assert_eq!(zs.len(), 3);
    }

    #[test]
    fn box_mesh_faces_outward() {
        let m = box_mesh(Vec3::splat(0.0), Vec3::splat(1.0));
        let center = Vec3::splat(0.5);
        for t in m.triangles() {
            let n = (t.v1 - t.v0).cross(t.v2 - t.v0);
            assert!(n.dot(t.centroid() - center) > 0.0);
        }
    }

    #[test]
    fn scene_validation_errors() {
        let mut desc = gen_abutting_boxes(2).unwrap();
        desc.geometries[1].sbt_offset = 0;
        assert!(matches!(
            desc.build(),
            Err(SceneError::DuplicateSbtOffset(0))
        ));

        let mut desc = gen_abutting_boxes(2).unwrap();
        desc.instances[0].geometries.push(0);
        assert!(matches!(
            desc.build(),
            Err(SceneError::DuplicateGeometry { .. })
        ));

        let mut desc = gen_abutting_boxes(2).unwrap();
        desc.instances[0].geometries.push(7);
        assert!(matches!(
            desc.build(),
            Err(SceneError::MissingGeometry { .. })
        ));

        let mut desc = gen_instanced_grid(1).unwrap();
        desc.instances[0].transform = Affine3::scale(Vec3::new(1.0, 1.0, 0.0));
        assert!(matches!(desc.build(), Err(SceneError::Transform { .. })));

        let desc = SceneDesc::single_mesh(Mesh::default());
        assert!(matches!(desc.build(), Err(SceneError::Bvh { .. })));
    }

    #[test]
    fn empty_scene_builds() {
        let scene = SceneDesc::default().build().unwrap();
        assert_eq!(scene.triangle_count(), 0);
    }

    #[test]
    fn triangle_addressing_covers_scene() {
        let scene = gen_instanced_grid(3).unwrap().build().unwrap();
        assert_eq!(scene.triangle_count(), 9 * 12);
        let rebuilt = scene
            .rebuild(BuildOptions {
                prim_order: PrimOrder::Permuted(3),
                ..BuildOptions::default()
            })
            .unwrap();
        assert_eq!(rebuilt.triangle_count(), scene.triangle_count());
    }
}
