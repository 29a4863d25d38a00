//! Median-split BVH and the two-level traversal that feeds the pipeline.
//!
//! Builds are fully deterministic for a given input and [`BuildOptions`].
//! `PrimOrder::Permuted` shuffles the insertion order with a seeded RNG
//! before building, which is how a temporally unstable rebuild is emulated:
//! ties between equal centroids resolve by insertion order, so leaf contents
//! (and with them the order in which equal-distance hits are reported) can
//! change between rebuilds of the same mesh.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{intersect_aabb, intersect_triangle, transform_ray, Aabb, Ray, TriangleHit};
use crate::scene::{Instance, Mesh, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrimOrder {
    #[default]
    AsGiven,
    Permuted(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub leaf_size: usize,
    pub prim_order: PrimOrder,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            leaf_size: 4,
            prim_order: PrimOrder::AsGiven,
        }
    }
}

impl BuildOptions {
    pub fn permuted(self, seed: u64) -> Self {
        BuildOptions {
            prim_order: PrimOrder::Permuted(seed),
            ..self
        }
    }

    pub fn as_given(self) -> Self {
        BuildOptions {
            prim_order: PrimOrder::AsGiven,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BvhError {
    #[error("cannot build a BVH over zero primitives")]
    Empty,
    #[error("leaf size must be at least 1")]
    InvalidLeafSize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    /// `left` holds the primitives with lower centroids along `axis`.
    Interior { left: u32, right: u32, axis: u8 },
    /// Range into the BVH's primitive permutation.
    Leaf { first: u32, count: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    prims: Vec<u32>,
}

impl Bvh {
    pub fn empty() -> Self {
        Bvh::default()
    }

    /// Builds over primitive bounding boxes; primitive `i` is `boxes[i]`.
    pub fn build(boxes: &[Aabb], opts: BuildOptions) -> Result<Bvh, BvhError> {
        if opts.leaf_size == 0 {
            return Err(BvhError::InvalidLeafSize);
        }
        if boxes.is_empty() {
            return Err(BvhError::Empty);
        }
        let mut order: Vec<u32> = (0..boxes.len() as u32).collect();
        if let PrimOrder::Permuted(seed) = opts.prim_order {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        let centroids: Vec<_> = boxes.iter().map(Aabb::center).collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * boxes.len() / opts.leaf_size.max(1) + 1),
            prims: Vec::with_capacity(boxes.len()),
        };
        bvh.build_range(boxes, &centroids, &mut order, opts.leaf_size);
        Ok(bvh)
    }

    pub fn build_for_mesh(mesh: &Mesh, opts: BuildOptions) -> Result<Bvh, BvhError> {
        let boxes: Vec<Aabb> = mesh.triangles().map(|t| t.bounds()).collect();
        Bvh::build(&boxes, opts)
    }

    fn build_range(
        &mut self,
        boxes: &[Aabb],
        centroids: &[crate::geometry::Vec3],
        order: &mut [u32],
        leaf_size: usize,
    ) -> u32 {
        let bounds = order
            .iter()
            .fold(Aabb::EMPTY, |acc, &p| acc.union(boxes[p as usize]));
        let index = self.nodes.len() as u32;
        if order.len() <= leaf_size {
            let first = self.prims.len() as u32;
            self.prims.extend_from_slice(order);
            self.nodes.push(BvhNode {
                bounds,
                kind: NodeKind::Leaf {
                    first,
                    count: order.len() as u32,
                },
            });
            return index;
        }
        let centroid_bounds = order
            .iter()
            .fold(Aabb::EMPTY, |acc, &p| acc.grow(centroids[p as usize]));
        let axis = centroid_bounds.longest_axis();
        // Stable: equal centroids keep insertion order.
        order.sort_by(|&a, &b| centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis]));
        let mid = order.len() / 2;
        self.nodes.push(BvhNode {
            bounds,
            kind: NodeKind::Leaf { first: 0, count: 0 },
        });
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.build_range(boxes, centroids, lo, leaf_size);
        let right = self.build_range(boxes, centroids, hi, leaf_size);
        self.nodes[index as usize].kind = NodeKind::Interior {
            left,
            right,
            axis: axis as u8,
        };
        index
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    /// Primitive permutation referenced by leaf ranges.
    pub fn prims(&self) -> &[u32] {
        &self.prims
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes.first().map_or(Aabb::EMPTY, |n| n.bounds)
    }

    /// Depth-first walk in near-child-first order.
    ///
    /// Children are ordered by their entry distance clamped to `t_min`; on a
    /// tie the child on the side the ray points towards (by the sign of the
    /// direction along the split axis) goes first. Because of the clamp, a
    /// different `t_min` can reorder children whose boxes both start before
    /// it. The current `t_max` is re-read from the sink before every node and
    /// leaf, so accepted hits cull the remaining traversal.
    fn walk<S: CandidateSink + ?Sized>(
        &self,
        ray: &Ray,
        sink: &mut S,
        counters: &mut TraversalCounters,
        leaf: &mut dyn FnMut(&mut S, &mut TraversalCounters, u32) -> Control,
    ) -> Control {
        let Some(root) = self.nodes.first() else {
            return Control::Continue;
        };
        let Some((root_entry, _)) =
            intersect_aabb(&ray.with_interval(ray.t_min, sink.t_max()), &root.bounds)
        else {
            return Control::Continue;
        };
        let mut stack: Vec<(u32, f32)> = vec![(0, root_entry)];
        while let Some((index, entry)) = stack.pop() {
            let t_max = sink.t_max();
            if entry > t_max {
                continue;
            }
            counters.nodes_visited += 1;
            match self.nodes[index as usize].kind {
                NodeKind::Leaf { first, count } => {
                    for &prim in &self.prims[first as usize..(first + count) as usize] {
                        if leaf(sink, counters, prim) == Control::Terminate {
                            return Control::Terminate;
                        }
                    }
                }
                NodeKind::Interior { left, right, axis } => {
                    let clipped = ray.with_interval(ray.t_min, t_max);
                    let hit_l = intersect_aabb(&clipped, &self.nodes[left as usize].bounds);
                    let hit_r = intersect_aabb(&clipped, &self.nodes[right as usize].bounds);
                    match (hit_l, hit_r) {
                        (Some((el, _)), Some((er, _))) => {
                            let left_first = if el != er {
                                el < er
                            } else {
                                ray.direction[axis as usize] >= 0.0
                            };
                            // Stack is LIFO: push the far child first.
                            if left_first {
                                stack.push((right, er));
                                stack.push((left, el));
                            } else {
                                stack.push((left, el));
                                stack.push((right, er));
                            }
                        }
                        (Some((el, _)), None) => stack.push((left, el)),
                        (None, Some((er, _))) => stack.push((right, er)),
                        (None, None) => {}
                    }
                }
            }
        }
        Control::Continue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Terminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraversalCounters {
    pub nodes_visited: u64,
    pub tri_tests: u64,
}

/// A triangle intersection inside the current interval, about to be
/// reported to the pipeline.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub hit: TriangleHit,
    pub prim: u32,
    /// Index into the scene's geometry list.
    pub geometry: usize,
    pub sbt_offset: u32,
    pub instance: &'a Instance,
    /// The ray in the instance's object space.
    pub object_ray: Ray,
}

/// Receives candidates from [`traverse`] and owns the interval's upper end.
pub trait CandidateSink {
    /// Current upper end of the valid interval.
    fn t_max(&self) -> f32;
    fn report(&mut self, candidate: &Candidate<'_>) -> Control;
}

/// Walks the scene's TLAS and, per instance, each geometry's BLAS, reporting
/// every triangle hit with `ray.t_min < t < sink.t_max()` exactly once.
pub fn traverse<S: CandidateSink + ?Sized>(
    scene: &Scene,
    ray: &Ray,
    sink: &mut S,
    counters: &mut TraversalCounters,
) -> Control {
    let instances = scene.instances();
    let mut visit_instance =
        |sink: &mut S, counters: &mut TraversalCounters, inst_index: u32| -> Control {
            let instance = &instances[inst_index as usize];
            let object_ray = transform_ray(&instance.transform, ray);
            for &geometry in &instance.geometries {
                let mesh = scene.mesh_of(geometry);
                let sbt_offset = scene.sbt_offset(geometry);
                let mut test_prim =
                    |sink: &mut S, counters: &mut TraversalCounters, prim: u32| -> Control {
                        counters.tri_tests += 1;
                        let current = object_ray.with_interval(object_ray.t_min, sink.t_max());
                        match intersect_triangle(&current, &mesh.triangle(prim as usize)) {
                            Some(hit) => sink.report(&Candidate {
                                hit,
                                prim,
                                geometry,
                                sbt_offset,
                                instance,
                                object_ray,
                            }),
                            None => Control::Continue,
                        }
                    };
                if scene
                    .blas(geometry)
                    .walk(&object_ray, sink, counters, &mut test_prim)
                    == Control::Terminate
                {
                    return Control::Terminate;
                }
            }
            Control::Continue
        };
    scene.tlas().walk(ray, sink, counters, &mut visit_instance)
}
