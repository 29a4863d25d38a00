//! Emulation of the hardware ray-tracing pipeline's observable contract.
//!
//! A trace walks the scene and, for every candidate with
//! `t_min < t < t_max`, runs the any-hit program (if enabled). Accepting a
//! hit commits it and shrinks `t_max` to its distance, which automatically
//! culls every later candidate at that same distance. Ignoring leaves the
//! interval alone. Terminating commits and stops traversal immediately.
//! After traversal the closest-hit program sees the committed hit, or the
//! miss program runs if nothing was committed.
//!
//! There is deliberately no way to accept a hit while keeping `t_max`
//! above it: kernels built on this emulator have to live with the same
//! restriction as on real hardware.

use std::ops::AddAssign;

use bitflags::bitflags;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::{traverse, Candidate, CandidateSink, Control, TraversalCounters};
use crate::geometry::{Affine3, Ray, Vec3};
use crate::hit_order::HitDesc;
use crate::scene::Scene;

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
    pub struct TraceFlags: u32 {
        const DISABLE_ANYHIT = 1;
        const DISABLE_CLOSESTHIT = 1 << 1;
    }
}

/// What the any-hit program tells the pipeline about one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AhVerdict {
    Accept,
    Ignore,
    /// Commit this hit and stop traversal.
    TerminateAccept,
}

/// Pipeline state visible to any-hit and closest-hit programs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitContext {
    pub t: f32,
    pub prim: i32,
    /// The geometry's SBT offset.
    pub geom: i32,
    pub inst: i32,
    pub barycentrics: (f32, f32),
    pub front_face: bool,
    pub object_to_world: Affine3,
    pub world_to_object: Affine3,
    pub world_ray_origin: Vec3,
    pub world_ray_direction: Vec3,
    /// `t_min` of the trace that produced this hit.
    pub ray_t_min: f32,
}

impl HitContext {
    pub fn hit_desc(&self) -> HitDesc {
        HitDesc {
            t: self.t,
            prim: self.prim,
            geom: self.geom,
            inst: self.inst,
        }
    }

    pub fn world_hit_point(&self) -> Vec3 {
        self.world_ray_origin + self.world_ray_direction * self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceStats {
    pub traces: u64,
    pub nodes_visited: u64,
    pub tri_tests: u64,
    pub ah_calls: u64,
    pub ch_calls: u64,
    pub miss_calls: u64,
    pub user_code_calls: u64,
}

impl AddAssign for TraceStats {
    fn add_assign(&mut self, o: TraceStats) {
        self.traces += o.traces;
        self.nodes_visited += o.nodes_visited;
        self.tri_tests += o.tri_tests;
        self.ah_calls += o.ah_calls;
        self.ch_calls += o.ch_calls;
        self.miss_calls += o.miss_calls;
        self.user_code_calls += o.user_code_calls;
    }
}

impl std::iter::Sum for TraceStats {
    fn sum<I: Iterator<Item = TraceStats>>(iter: I) -> Self {
        iter.fold(TraceStats::default(), |mut acc, s| {
            acc += s;
            acc
        })
    }
}

pub type AnyHitFn<'a, P> = dyn FnMut(&HitContext, &mut P) -> AhVerdict + 'a;
pub type ClosestHitFn<'a, P> = dyn FnMut(&HitContext, &mut P) + 'a;
pub type MissFn<'a, P> = dyn FnMut(&mut P) + 'a;

/// The programs and flags bound to one trace call, generic over the
/// per-ray data type `P`.
pub struct TraceConfig<'a, P> {
    pub any_hit: Option<&'a mut AnyHitFn<'a, P>>,
    pub closest_hit: Option<&'a mut ClosestHitFn<'a, P>>,
    pub miss: Option<&'a mut MissFn<'a, P>>,
    pub flags: TraceFlags,
}

impl<'a, P> Default for TraceConfig<'a, P> {
    fn default() -> Self {
        TraceConfig {
            any_hit: None,
            closest_hit: None,
            miss: None,
            flags: TraceFlags::empty(),
        }
    }
}

impl<'a, P> TraceConfig<'a, P> {
    pub fn with_any_hit(mut self, f: &'a mut AnyHitFn<'a, P>) -> Self {
        self.any_hit = Some(f);
        self
    }

    pub fn with_closest_hit(mut self, f: &'a mut ClosestHitFn<'a, P>) -> Self {
        self.closest_hit = Some(f);
        self
    }

    pub fn with_miss(mut self, f: &'a mut MissFn<'a, P>) -> Self {
        self.miss = Some(f);
        self
    }

    pub fn with_flags(mut self, flags: TraceFlags) -> Self {
        self.flags = flags;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("ray interval contains NaN")]
    NanInterval,
}

/// What happened in one trace, for callers and tests that look past the
/// programs' side effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOutcome {
    pub committed: Option<HitContext>,
    /// `t_max` when traversal ended.
    pub final_t_max: f32,
    pub terminated: bool,
}

struct PipelineSink<'c, 'a, P> {
    ray: &'c Ray,
    t_max: f32,
    committed: Option<HitContext>,
    any_hit: Option<&'c mut AnyHitFn<'a, P>>,
    prd: &'c mut P,
    ah_calls: u64,
}

impl<P> CandidateSink for PipelineSink<'_, '_, P> {
    fn t_max(&self) -> f32 {
        self.t_max
    }

    fn report(&mut self, c: &Candidate<'_>) -> Control {
        let t = c.hit.t;
        debug_assert!(
            self.ray.t_min < t && t < self.t_max,
            "traversal leaked {t} outside interval"
        );
        let ctx = HitContext {
            t,
            prim: c.prim as i32,
            geom: c.sbt_offset as i32,
            inst: c.instance.index as i32,
            barycentrics: (c.hit.u, c.hit.v),
            front_face: c.hit.front_face,
            object_to_world: *c.instance.transform.object_to_world(),
            world_to_object: *c.instance.transform.world_to_object(),
            world_ray_origin: self.ray.origin,
            world_ray_direction: self.ray.direction,
            ray_t_min: self.ray.t_min,
        };
        let verdict = match self.any_hit.as_mut() {
            Some(ah) => {
                self.ah_calls += 1;
                ah(&ctx, self.prd)
            }
            None => AhVerdict::Accept,
        };
        match verdict {
            AhVerdict::Ignore => Control::Continue,
            AhVerdict::Accept => {
                self.committed = Some(ctx);
                self.t_max = t;
                Control::Continue
            }
            AhVerdict::TerminateAccept => {
                self.committed = Some(ctx);
                self.t_max = t;
                Control::Terminate
            }
        }
    }
}

/// Launches one ray through the emulated pipeline.
///
/// An empty or inverted interval is a valid launch that simply misses.
pub fn trace<P>(
    scene: &Scene,
    ray: &Ray,
    cfg: &mut TraceConfig<'_, P>,
    prd: &mut P,
    stats: &mut TraceStats,
) -> Result<TraceOutcome, TraceError> {
    if ray.t_min.is_nan() || ray.t_max.is_nan() {
        return Err(TraceError::NanInterval);
    }
    stats.traces += 1;

    let any_hit = if cfg.flags.contains(TraceFlags::DISABLE_ANYHIT) {
        None
    } else {
        cfg.any_hit.as_deref_mut()
    };
    let mut sink = PipelineSink {
        ray,
        t_max: ray.t_max,
        committed: None,
        any_hit,
        prd,
        ah_calls: 0,
    };
    let mut counters = TraversalCounters::default();
    let control = if ray.interval_is_empty() {
        Control::Continue
    } else {
        traverse(scene, ray, &mut sink, &mut counters)
    };
    let PipelineSink {
        t_max,
        committed,
        ah_calls,
        ..
    } = sink;
    stats.nodes_visited += counters.nodes_visited;
    stats.tri_tests += counters.tri_tests;
    stats.ah_calls += ah_calls;

    match &committed {
        Some(hit) => {
            if !cfg.flags.contains(TraceFlags::DISABLE_CLOSESTHIT) {
                if let Some(ch) = cfg.closest_hit.as_deref_mut() {
                    stats.ch_calls += 1;
                    ch(hit, prd);
                }
            }
        }
        None => {
            if let Some(miss) = cfg.miss.as_deref_mut() {
                stats.miss_calls += 1;
                miss(prd);
            }
        }
    }

    Ok(TraceOutcome {
        committed,
        final_t_max: t_max,
        terminated: control == Control::Terminate,
    })
}
