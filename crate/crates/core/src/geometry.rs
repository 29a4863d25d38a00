//! Vectors, rays, triangles, boxes and affine instance transforms.
//!
//! All arithmetic has a fixed evaluation order and no fused multiply-adds,
//! so identical inputs give bitwise-identical results. Everything is
//! binary32 except the triangle test, which evaluates in binary64 and
//! rounds `t` once.
//! Ray directions are never normalized: `t` is always measured in units of
//! the direction vector the caller supplied.

use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f32; 3]", into = "[f32; 3]")]
pub struct Vec3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Vec3 { x, y, z }
    }

    pub const fn splat(v: f32) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    pub fn dot(self, o: Vec3) -> f32 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn length(self) -> f32 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.length())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f32; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f32; 3]> for Vec3 {
    fn from(a: [f32; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f32; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f32;

    fn index(&self, axis: usize) -> &f32 {
        match axis {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f32> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f32) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A ray with an exclusive valid interval `(t_min, t_max)`.
///
/// Traversal kernels only ever change the interval; origin and direction are
/// treated as immutable once a ray is launched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_min: f32,
    pub t_max: f32,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_min: f32, t_max: f32) -> Self {
        Ray {
            origin,
            direction,
            t_min,
            t_max,
        }
    }

    pub fn with_interval(&self, t_min: f32, t_max: f32) -> Ray {
        Ray {
            t_min,
            t_max,
            ..*self
        }
    }

    pub fn at(&self, t: f32) -> Vec3 {
        self.origin + self.direction * t
    }

    /// True when no value satisfies `t_min < t < t_max`.
    pub fn interval_is_empty(&self) -> bool {
        self.t_min.partial_cmp(&self.t_max) != Some(std::cmp::Ordering::Less)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
}

impl Triangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3) -> Self {
        Triangle { v0, v1, v2 }
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_point(self.v0).grow(self.v1).grow(self.v2)
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v0 + self.v1 + self.v2) * (1.0 / 3.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub t: f32,
    pub u: f32,
    pub v: f32,
    pub front_face: bool,
}

/// Möller–Trumbore ray/triangle test against the ray's exclusive interval.
///
/// Evaluated in `f64` from the `f32` inputs with a fixed operation order;
/// edges are `v1 - v0` and `v2 - v0`, the determinant is `e1 · (d × e2)`,
/// `t = (e2 · q) / det`, and `t` is rounded to `f32` once before the
/// interval test. A determinant of exactly zero (parallel ray or degenerate
/// triangle) is a miss. Front faces are the ones wound counter-clockwise as
/// seen by the ray.
pub fn intersect_triangle(ray: &Ray, tri: &Triangle) -> Option<TriangleHit> {
    let wide = |v: Vec3| [v.x as f64, v.y as f64, v.z as f64];
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let (v0, dir) = (wide(tri.v0), wide(ray.direction));
    let e1 = sub(wide(tri.v1), v0);
    let e2 = sub(wide(tri.v2), v0);
    let p = cross(dir, e2);
    let det = dot(e1, p);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let s = sub(wide(ray.origin), v0);
    let u = dot(s, p) / det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = cross(s, e1);
    let v = dot(dir, q) / det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = (dot(e2, q) / det) as f32;
    if !(ray.t_min < t && t < ray.t_max) {
        return None;
    }
    let (u, v) = (u as f32, v as f32);
    Some(TriangleHit {
        t,
        u,
        v,
        front_face: det > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Aabb {
    /// The empty box; growing it by any point yields that point.
    pub const EMPTY: Aabb = Aabb {
        lo: Vec3::splat(f32::INFINITY),
        hi: Vec3::splat(f32::NEG_INFINITY),
    };

    pub fn new(lo: Vec3, hi: Vec3) -> Self {
        Aabb { lo, hi }
    }

    pub fn from_point(p: Vec3) -> Self {
        Aabb { lo: p, hi: p }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.x > self.hi.x || self.lo.y > self.hi.y || self.lo.z > self.hi.z
    }

    pub fn grow(self, p: Vec3) -> Aabb {
        Aabb {
            lo: self.lo.min(p),
            hi: self.hi.max(p),
        }
    }

    pub fn union(self, o: Aabb) -> Aabb {
        Aabb {
            lo: self.lo.min(o.lo),
            hi: self.hi.max(o.hi),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.lo + self.hi) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.hi - self.lo
    }

    /// Axis of largest extent; ties resolve to the lowest axis index.
    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        self.lo.x <= o.lo.x
            && self.lo.y <= o.lo.y
            && self.lo.z <= o.lo.z
            && self.hi.x >= o.hi.x
            && self.hi.y >= o.hi.y
            && self.hi.z >= o.hi.z
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (l, h) = (self.lo, self.hi);
        [
            Vec3::new(l.x, l.y, l.z),
            Vec3::new(h.x, l.y, l.z),
            Vec3::new(l.x, h.y, l.z),
            Vec3::new(h.x, h.y, l.z),
            Vec3::new(l.x, l.y, h.z),
            Vec3::new(h.x, l.y, h.z),
            Vec3::new(l.x, h.y, h.z),
            Vec3::new(h.x, h.y, h.z),
        ]
    }
}

/// Relative widening applied to slab distances. Triangle `t` values carry a
/// few ULPs of rounding that the slab arithmetic does not share, so the box
/// test pads generously to never cull a box whose triangle would hit.
const SLAB_PAD: f32 = 1.0 / 4096.0;

/// Conservative slab test. Returns the overlap of the box's slab interval
/// with `[t_min, t_max]` (inclusive), or `None` when they are disjoint.
///
/// Zero direction components contribute an unbounded slab when the origin
/// lies within the box on that axis, and reject otherwise.
pub fn intersect_aabb(ray: &Ray, aabb: &Aabb) -> Option<(f32, f32)> {
    if aabb.is_empty() {
        return None;
    }
    let mut enter = f32::NEG_INFINITY;
    let mut exit = f32::INFINITY;
    for axis in 0..3 {
        let o = ray.origin[axis];
        let d = ray.direction[axis];
        let (lo, hi) = (aabb.lo[axis], aabb.hi[axis]);
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let mut t0 = (lo - o) * inv;
        let mut t1 = (hi - o) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        enter = enter.max(t0);
        exit = exit.min(t1);
    }
    let pad = SLAB_PAD * enter.abs().max(exit.abs()).min(f32::MAX) + f32::MIN_POSITIVE;
    let enter = (enter - pad).max(ray.t_min);
    let exit = (exit + pad).min(ray.t_max);
    if enter <= exit {
        Some((enter, exit))
    } else {
        None
    }
}

/// Row-major 3×3 linear part plus translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine3 {
    pub linear: [[f32; 3]; 3],
    pub translation: Vec3,
}

impl Default for Affine3 {
    fn default() -> Self {
        Affine3::IDENTITY
    }
}

impl Affine3 {
    pub const IDENTITY: Affine3 = Affine3 {
        linear: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: Vec3::ZERO,
    };

    pub fn translation(t: Vec3) -> Self {
        Affine3 {
            translation: t,
            ..Affine3::IDENTITY
        }
    }

    pub fn scale(s: Vec3) -> Self {
        Affine3 {
            linear: [[s.x, 0.0, 0.0], [0.0, s.y, 0.0], [0.0, 0.0, s.z]],
            translation: Vec3::ZERO,
        }
    }

    /// Builds from a row-major 3×4 matrix `[linear | translation]`.
    pub fn from_rows(rows: [[f32; 4]; 3]) -> Self {
        let mut linear = [[0.0; 3]; 3];
        for (r, row) in rows.iter().enumerate() {
            linear[r].copy_from_slice(&row[..3]);
        }
        Affine3 {
            linear,
            translation: Vec3::new(rows[0][3], rows[1][3], rows[2][3]),
        }
    }

    pub fn to_rows(&self) -> [[f32; 4]; 3] {
        let t = self.translation.to_array();
        let mut rows = [[0.0; 4]; 3];
        for r in 0..3 {
            rows[r][..3].copy_from_slice(&self.linear[r]);
            rows[r][3] = t[r];
        }
        rows
    }

    pub fn is_identity(&self) -> bool {
        *self == Affine3::IDENTITY
    }

    pub fn transform_vector(&self, v: Vec3) -> Vec3 {
        let m = &self.linear;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.transform_vector(p) + self.translation
    }

    pub fn determinant(&self) -> f32 {
        let m = &self.linear;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate, computed in f64 and rounded once.
    /// `None` for singular or non-finite matrices.
    pub fn inverse(&self) -> Option<Affine3> {
        let m: [[f64; 3]; 3] = self.linear.map(|row| row.map(f64::from));
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv: [[f64; 3]; 3] = adj.map(|row| row.map(|a| a / det));
        let t = [
            f64::from(self.translation.x),
            f64::from(self.translation.y),
            f64::from(self.translation.z),
        ];
        let mut linear = [[0.0f32; 3]; 3];
        let mut translation = [0.0f32; 3];
        for r in 0..3 {
            for c in 0..3 {
                linear[r][c] = inv[r][c] as f32;
            }
            translation[r] = -(inv[r][0] * t[0] + inv[r][1] * t[1] + inv[r][2] * t[2]) as f32;
        }
        let out = Affine3 {
            linear,
            translation: Vec3::from(translation),
        };
        (out.linear.iter().flatten().all(|v| v.is_finite()) && out.translation.is_finite())
            .then_some(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("instance transform is singular (determinant {determinant})")]
pub struct SingularTransform {
    pub determinant: f32,
}

/// An instance transform with its inverse precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceTransform {
    object_to_world: Affine3,
    world_to_object: Affine3,
}

impl Default for InstanceTransform {
    fn default() -> Self {
        InstanceTransform::IDENTITY
    }
}

impl InstanceTransform {
    pub const IDENTITY: InstanceTransform = InstanceTransform {
        object_to_world: Affine3::IDENTITY,
        world_to_object: Affine3::IDENTITY,
    };

    pub fn new(object_to_world: Affine3) -> Result<Self, SingularTransform> {
        let world_to_object = object_to_world.inverse().ok_or(SingularTransform {
            determinant: object_to_world.determinant(),
        })?;
        Ok(InstanceTransform {
            object_to_world,
            world_to_object,
        })
    }

    pub fn object_to_world(&self) -> &Affine3 {
        &self.object_to_world
    }

    pub fn world_to_object(&self) -> &Affine3 {
        &self.world_to_object
    }

    pub fn is_identity(&self) -> bool {
        self.object_to_world.is_identity()
    }

    /// World-space bounds of an object-space box.
    pub fn transform_bounds(&self, b: &Aabb) -> Aabb {
        if self.is_identity() || b.is_empty() {
            return *b;
        }
        b.corners().iter().fold(Aabb::EMPTY, |acc, &c| {
            acc.grow(self.object_to_world.transform_point(c))
        })
    }
}

/// Maps a world-space ray into the instance's object space.
///
/// Origin and direction go through the full inverse, including any scale, so
/// an object-space hit at `t` is the world-space hit at the same `t`. The
/// interval is copied unchanged. Identity transforms return the ray bitwise
/// unchanged.
pub fn transform_ray(xf: &InstanceTransform, ray: &Ray) -> Ray {
    if xf.is_identity() {
        return *ray;
    }
    let inv = xf.world_to_object();
    Ray {
        origin: inv.transform_point(ray.origin),
        direction: inv.transform_vector(ray.direction),
        t_min: ray.t_min,
        t_max: ray.t_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_ray(t_min: f32, t_max: f32) -> Ray {
        Ray::new(
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(0.0, 0.0, 1.0),
            t_min,
            t_max,
        )
    }

    fn tri_at_z5() -> Triangle {
        Triangle::new(
            Vec3::new(-1.0, -1.0, 5.0),
            Vec3::new(2.0, -1.0, 5.0),
            Vec3::new(-1.0, 2.0, 5.0),
        )
    }

    #[test]
    fn axis_ray_hits_at_six() {
        let hit = intersect_triangle(&z_ray(0.0, 10.0), &tri_at_z5()).unwrap();
        assert_eq!(hit.t, 6.0);
        // Counter-clockwise seen from +z, so this ray sees its back.
        assert!(!hit.front_face);
    }

    #[test]
    fn interval_bounds_are_exclusive() {
        assert!(intersect_triangle(&z_ray(6.0, 10.0), &tri_at_z5()).is_none());
        assert!(intersect_triangle(&z_ray(0.0, 6.0), &tri_at_z5()).is_none());
        let below = crate::float_interval::just_below(6.0).unwrap();
        let above = crate::float_interval::just_above(6.0).unwrap();
        assert_eq!(
            intersect_triangle(&z_ray(below, above), &tri_at_z5())
                .unwrap()
                .t,
            6.0
        );
    }

    #[test]
    fn front_face_reported() {
        let t = tri_at_z5();
        let flipped = Triangle::new(t.v0, t.v2, t.v1);
        let hit = intersect_triangle(&z_ray(0.0, 10.0), &flipped).unwrap();
        assert_eq!(hit.t, 6.0);
        assert!(hit.front_face);
    }

    #[test]
    fn degenerate_triangle_never_hits() {
        let p = Vec3::new(0.0, 0.0, 5.0);
        let degenerate = Triangle::new(p, Vec3::new(1.0, 1.0, 5.0), Vec3::new(2.0, 2.0, 5.0));
        assert!(intersect_triangle(&z_ray(0.0, 10.0), &degenerate).is_none());
        assert!(intersect_triangle(&z_ray(0.0, 10.0), &Triangle::new(p, p, p)).is_none());
    }

    #[test]
    fn parallel_ray_misses() {
        let ray = Ray::new(
            Vec3::new(0.0, 0.0, 5.0),
            Vec3::new(1.0, 0.0, 0.0),
            0.0,
            10.0,
        );
        assert!(intersect_triangle(&ray, &tri_at_z5()).is_none());
    }

    #[test]
    fn aabb_through_center() {
        let b = Aabb::new(Vec3::splat(-0.5), Vec3::splat(0.5));
        let ray = Ray::new(
            Vec3::new(0.0, 0.0, -2.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.0,
            100.0,
        );
        let (enter, exit) = intersect_aabb(&ray, &b).unwrap();
        assert!(enter <= 1.5 && 1.5 - enter < 1e-2);
        assert!(exit >= 2.5 && exit - 2.5 < 1e-2);
    }

    #[test]
    fn aabb_parallel_outside_slab() {
        let b = Aabb::new(Vec3::splat(-0.5), Vec3::splat(0.5));
        let ray = Ray::new(
            Vec3::new(0.0, 1.0, -2.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.0,
            100.0,
        );
        assert!(intersect_aabb(&ray, &b).is_none());
    }

    #[test]
    fn aabb_flat_box_admitted() {
        let b = tri_at_z5().bounds();
        let (enter, exit) = intersect_aabb(&z_ray(0.0, 10.0), &b).unwrap();
        assert!(enter <= 6.0 && exit >= 6.0);
    }

    #[test]
    fn aabb_interval_clamps() {
        let b = Aabb::new(Vec3::splat(-0.5), Vec3::splat(0.5));
        let ray = Ray::new(
            Vec3::new(0.0, 0.0, -2.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.0,
            1.0,
        );
        assert!(intersect_aabb(&ray, &b).is_none());
        assert!(intersect_aabb(&ray.with_interval(0.0, 100.0), &Aabb::EMPTY).is_none());
    }

    #[test]
    fn identity_transform_is_bitwise_noop() {
        let ray = Ray::new(
            Vec3::new(-0.0, 1.5, 3.25),
            Vec3::new(0.1, -0.0, 0.7),
            0.25,
            9.0,
        );
        let out = transform_ray(&InstanceTransform::IDENTITY, &ray);
        assert_eq!(out.origin.x.to_bits(), ray.origin.x.to_bits());
        assert_eq!(out.direction.y.to_bits(), ray.direction.y.to_bits());
        assert_eq!(out, ray);
    }

    #[test]
    fn translation_shifts_origin_only() {
        let xf = InstanceTransform::new(Affine3::translation(Vec3::new(1.0, 0.0, 0.0))).unwrap();
        let ray = Ray::new(
            Vec3::new(3.0, 2.0, 1.0),
            Vec3::new(0.25, 0.5, 1.0),
            0.0,
            10.0,
        );
        let out = transform_ray(&xf, &ray);
        assert_eq!(out.origin, Vec3::new(2.0, 2.0, 1.0));
        assert_eq!(out.direction, ray.direction);
        assert_eq!((out.t_min, out.t_max), (0.0, 10.0));
    }

    #[test]
    fn scaled_instance_preserves_t() {
        let tri = Triangle::new(
            Vec3::new(-0.3, -0.2, 2.5),
            Vec3::new(0.7, -0.1, 2.6),
            Vec3::new(-0.2, 0.9, 2.4),
        );
        let xf = InstanceTransform::new(Affine3::scale(Vec3::splat(2.0))).unwrap();
        let scaled = Triangle::new(tri.v0 * 2.0, tri.v1 * 2.0, tri.v2 * 2.0);
        let ray = Ray::new(
            Vec3::new(0.1, 0.05, -1.0),
            Vec3::new(0.01, 0.02, 1.0),
            0.0,
            100.0,
        );
        let world = intersect_triangle(&ray, &scaled).unwrap();
        let object = intersect_triangle(&transform_ray(&xf, &ray), &tri).unwrap();
        assert_eq!(world.t.to_bits(), object.t.to_bits());
    }

    #[test]
    fn singular_transform_rejected() {
        let flat = Affine3::scale(Vec3::new(1.0, 0.0, 1.0));
        assert!(InstanceTransform::new(flat).is_err());
    }

    #[test]
    fn inverse_round_trips_points() {
        let xf = Affine3::from_rows([
            [0.0, -2.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, -3.0],
            [0.0, 0.0, 0.5, 2.0],
        ]);
        let inv = xf.inverse().unwrap();
        let p = Vec3::new(0.25, -1.5, 4.0);
        let back = inv.transform_point(xf.transform_point(p));
        assert!((back - p).length() < 1e-6);
        assert_eq!(Affine3::from_rows(xf.to_rows()), xf);
    }
}
