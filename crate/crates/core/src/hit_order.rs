//! Hit identity and the strict total order used to break distance ties.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Uniquely identifies one intersection: distance plus primitive index,
/// geometry SBT offset and instance index.
///
/// A negative `prim` marks the "no hit" sentinel.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HitDesc {
    pub t: f32,
    pub prim: i32,
    pub geom: i32,
    pub inst: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("hit distance must not be NaN")]
pub struct NanDistance;

impl HitDesc {
    pub fn new(t: f32, prim: i32, geom: i32, inst: i32) -> Result<Self, NanDistance> {
        if t.is_nan() {
            return Err(NanDistance);
        }
        Ok(HitDesc {
            t,
            prim,
            geom,
            inst,
        })
    }

    /// The "nothing found" marker at distance `t`.
    pub const fn sentinel(t: f32) -> Self {
        HitDesc {
            t,
            prim: -1,
            geom: -1,
            inst: -1,
        }
    }

    pub fn is_hit(&self) -> bool {
        self.prim >= 0
    }

    /// The identity of the hit primitive, without its distance.
    pub fn key(&self) -> (i32, i32, i32) {
        (self.inst, self.geom, self.prim)
    }
}

/// Strict "comes before": distance first, then instance, geometry, primitive.
pub fn less(a: &HitDesc, b: &HitDesc) -> bool {
    if a.t != b.t {
        return a.t < b.t;
    }
    if a.inst != b.inst {
        return a.inst < b.inst;
    }
    if a.geom != b.geom {
        return a.geom < b.geom;
    }
    if a.prim != b.prim {
        return a.prim < b.prim;
    }
    false
}

impl PartialEq for HitDesc {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

// NaN distances are rejected by `HitDesc::new`; the order laws assume none
// slipped in through the public fields.
impl Eq for HitDesc {}

impl PartialOrd for HitDesc {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HitDesc {
    fn cmp(&self, other: &Self) -> Ordering {
        if less(self, other) {
            Ordering::Less
        } else if less(other, self) {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    }
}

/// Sorts ascending under [`less`]. Stable, so exact duplicates keep their
/// input order.
pub fn sort_hits(hits: &mut [HitDesc]) {
    hits.sort();
}

/// Owned variant of [`sort_hits`].
pub fn sorted_hits(mut hits: Vec<HitDesc>) -> Vec<HitDesc> {
    sort_hits(&mut hits);
    hits
}
