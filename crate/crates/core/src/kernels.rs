//! Front-to-back any-hit traversal kernels.
//!
//! Every kernel enumerates the hits along a ray through the emulated
//! pipeline, only ever changing the ray's `t_min`/`t_max`, and hands each hit
//! to a [`UserCode`] callback. The correct kernels deliver every hit exactly
//! once in non-decreasing distance, including every member of a group of
//! hits at the same distance:
//!
//! | kernel            | iteration              | pipeline state in user code | stable under rebuild |
//! |-------------------|------------------------|-----------------------------|----------------------|
//! | `StableNext`      | explicit (cursor)      | no                          | yes                  |
//! | `RejectRepeats`   | explicit or CH program | yes                         | no                   |
//! | `WhileWhile`      | callback in AH         | yes                         | no                   |
//! | `WhileMerged`     | callback in AH         | yes                         | no                   |
//! | `StableMultiHit`  | explicit (cursor)      | no                          | yes                  |
//! | `AhOnly`          | callback in AH         | yes                         | out of order         |
//! | `ChOnly`          | explicit or CH program | yes                         | skips coplanar hits  |
//!
//! The last two are the obvious but incorrect baselines.
//!
//! A recurring pattern: an any-hit program may have to *ignore* a hit it
//! actually wants (accepting would shrink `t_max` onto that distance and
//! cull its siblings) and *accept* hits it has no use for (to shrink the
//! interval and save traversal work).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float_interval::{just_above, just_below, FloatDomainError};
use crate::geometry::Ray;
use crate::hit_order::{less, HitDesc};
use crate::pipeline::{
    trace, AhVerdict, HitContext, TraceConfig, TraceError, TraceFlags, TraceStats,
};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flow {
    Continue,
    Stop,
}

/// The user's per-hit callback.
///
/// `ctx` is `Some` only for kernels that run user code while the pipeline
/// still holds the hit (see the module table).
pub trait UserCode {
    fn on_hit(&mut self, hit: &HitDesc, ctx: Option<&HitContext>) -> Flow;
}

impl<F> UserCode for F
where
    F: FnMut(&HitDesc, Option<&HitContext>) -> Flow,
{
    fn on_hit(&mut self, hit: &HitDesc, ctx: Option<&HitContext>) -> Flow {
        self(hit, ctx)
    }
}

/// Never stops; useful for running a kernel to exhaustion.
pub fn count_all() -> impl FnMut(&HitDesc, Option<&HitContext>) -> Flow {
    |_: &HitDesc, _: Option<&HitContext>| Flow::Continue
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KernelError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("interval step failed: {0}")]
    Interval(#[from] FloatDomainError),
    #[error("multi-hit capacity must be at least 1")]
    ZeroCapacity,
}

/// What one kernel run delivered.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FtbReport {
    /// Hits in the order user code saw them, including the one it stopped on.
    pub hits: Vec<HitDesc>,
    pub stopped_early: bool,
    pub stats: TraceStats,
}

/// Wraps user code, recording what it was given.
struct Delivery<'u> {
    user: &'u mut dyn UserCode,
    hits: Vec<HitDesc>,
    stopped: bool,
}

impl<'u> Delivery<'u> {
    fn new(user: &'u mut dyn UserCode) -> Self {
        Delivery {
            user,
            hits: Vec::new(),
            stopped: false,
        }
    }

    fn deliver(&mut self, hit: HitDesc, ctx: Option<&HitContext>) -> Flow {
        debug_assert!(!self.stopped, "user code called after it asked to stop");
        self.hits.push(hit);
        let flow = self.user.on_hit(&hit, ctx);
        if flow == Flow::Stop {
            self.stopped = true;
        }
        flow
    }

    fn finish(self, mut stats: TraceStats) -> FtbReport {
        stats.user_code_calls += self.hits.len() as u64;
        FtbReport {
            hits: self.hits,
            stopped_early: self.stopped,
            stats,
        }
    }
}

// ---------------------------------------------------------------------------
// stable-next

struct StableNextPrd {
    /// Every hit reported this round must come strictly after this one.
    hit_min: HitDesc,
    /// Best candidate so far this round.
    hit_max: HitDesc,
}

fn stable_next_any_hit(ctx: &HitContext, prd: &mut StableNextPrd) -> AhVerdict {
    let curr = ctx.hit_desc();
    if less(&prd.hit_min, &curr) && less(&curr, &prd.hit_max) {
        prd.hit_max = curr;
    }
    // Accepting at or before the best candidate's distance would cull the
    // other hits there; only strictly farther hits may shrink the ray.
    if curr.t > prd.hit_max.t {
        AhVerdict::Accept
    } else {
        AhVerdict::Ignore
    }
}

/// Explicit iteration over hits in the strict total order of
/// [`crate::hit_order::less`]. One trace per hit, plus one final trace that
/// finds nothing.
pub struct StableNextCursor<'s> {
    scene: &'s Scene,
    ray: Ray,
    user_t_max: f32,
    hit_min: HitDesc,
    stats: TraceStats,
    done: bool,
}

impl<'s> StableNextCursor<'s> {
    pub fn new(scene: &'s Scene, ray: &Ray) -> Self {
        StableNextCursor {
            scene,
            ray: *ray,
            user_t_max: ray.t_max,
            hit_min: HitDesc::sentinel(ray.t_min),
            stats: TraceStats::default(),
            done: false,
        }
    }

    pub fn next_hit(&mut self) -> Result<Option<HitDesc>, KernelError> {
        if self.done {
            return Ok(None);
        }
        let mut prd = StableNextPrd {
            hit_min: self.hit_min,
            hit_max: HitDesc::sentinel(self.user_t_max),
        };
        let mut ah = stable_next_any_hit;
        let mut cfg = TraceConfig::default()
            .with_any_hit(&mut ah)
            .with_flags(TraceFlags::DISABLE_CLOSESTHIT);
        trace(self.scene, &self.ray, &mut cfg, &mut prd, &mut self.stats)?;
        if !prd.hit_max.is_hit() {
            self.done = true;
            return Ok(None);
        }
        self.hit_min = prd.hit_max;
        self.ray = self
            .ray
            .with_interval(just_below(self.hit_min.t)?, self.user_t_max);
        Ok(Some(prd.hit_max))
    }

    pub fn stats(&self) -> TraceStats {
        self.stats
    }
}

impl Iterator for StableNextCursor<'_> {
    type Item = Result<HitDesc, KernelError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_hit().transpose()
    }
}

pub fn run_stable_next(
    scene: &Scene,
    ray: &Ray,
    user: &mut dyn UserCode,
) -> Result<FtbReport, KernelError> {
    let mut delivery = Delivery::new(user);
    let mut cursor = StableNextCursor::new(scene, ray);
    while let Some(hit) = cursor.next_hit()? {
        if delivery.deliver(hit, None) == Flow::Stop {
            break;
        }
    }
    Ok(delivery.finish(cursor.stats()))
}

// ---------------------------------------------------------------------------
// reject-repeats

struct RejectRepeatsPrd<'d, 'u> {
    /// First hit delivered at the current distance (distance `-inf` before
    /// any hit).
    skip_hit: HitDesc,
    /// Further hits at `skip_hit.t` still to ignore this round.
    skip_count: u32,
    this_hit: HitDesc,
    this_ctx: Option<HitContext>,
    /// When set, user code runs in the closest-hit program.
    delivery: Option<&'d mut Delivery<'u>>,
}

fn reject_repeats_any_hit(ctx: &HitContext, prd: &mut RejectRepeatsPrd<'_, '_>) -> AhVerdict {
    let this = ctx.hit_desc();
    // Hits before the skip distance cannot occur: t_min sits just below it.
    if this.t != prd.skip_hit.t {
        return AhVerdict::Accept;
    }
    // The anchor is always ignored, whatever position the traversal visits
    // it in this time.
    if this.t == prd.skip_hit.t && this.key() == prd.skip_hit.key() {
        return AhVerdict::Ignore;
    }
    if prd.skip_count == 0 {
        return AhVerdict::Accept;
    }
    prd.skip_count -= 1;
    AhVerdict::Ignore
}

fn reject_repeats_closest_hit(ctx: &HitContext, prd: &mut RejectRepeatsPrd<'_, '_>) {
    let this = ctx.hit_desc();
    let keep_going = match prd.delivery.as_deref_mut() {
        Some(delivery) => delivery.deliver(this, Some(ctx)) == Flow::Continue,
        None => true,
    };
    if keep_going {
        prd.this_hit = this;
        prd.this_ctx = Some(*ctx);
    }
}

/// Explicit iteration that disambiguates equal-distance hits by the order
/// the traversal reports them in, re-tracing and skipping the ones already
/// delivered. Yields the pipeline state of each hit.
pub struct RejectRepeatsCursor<'s> {
    scene: &'s Scene,
    ray: Ray,
    user_t_max: f32,
    next_t_min: f32,
    next_skip_count: u32,
    skip_hit: HitDesc,
    stats: TraceStats,
    done: bool,
}

impl<'s> RejectRepeatsCursor<'s> {
    pub fn new(scene: &'s Scene, ray: &Ray) -> Self {
        RejectRepeatsCursor {
            scene,
            ray: *ray,
            user_t_max: ray.t_max,
            next_t_min: ray.t_min,
            next_skip_count: 0,
            skip_hit: HitDesc::sentinel(f32::NEG_INFINITY),
            stats: TraceStats::default(),
            done: false,
        }
    }

    fn step(
        &mut self,
        delivery: Option<&mut Delivery<'_>>,
    ) -> Result<Option<(HitDesc, HitContext)>, KernelError> {
        if self.done {
            return Ok(None);
        }
        let mut prd = RejectRepeatsPrd {
            skip_hit: self.skip_hit,
            skip_count: self.next_skip_count,
            this_hit: HitDesc::sentinel(f32::NAN),
            this_ctx: None,
            delivery,
        };
        let mut ah = reject_repeats_any_hit;
        let mut ch = reject_repeats_closest_hit;
        let mut cfg = TraceConfig::default()
            .with_any_hit(&mut ah)
            .with_closest_hit(&mut ch);
        let ray = self.ray.with_interval(self.next_t_min, self.user_t_max);
        trace(self.scene, &ray, &mut cfg, &mut prd, &mut self.stats)?;
        // No hit, or user code asked to stop.
        let (Some(ctx), true) = (prd.this_ctx, prd.this_hit.is_hit()) else {
            self.done = true;
            return Ok(None);
        };
        let this = prd.this_hit;
        if this.t > self.skip_hit.t {
            // New distance: restart skipping, in addition to the anchor.
            self.next_t_min = just_below(this.t)?;
            self.next_skip_count = 0;
            self.skip_hit = this;
        } else {
            self.next_skip_count += 1;
        }
        Ok(Some((this, ctx)))
    }

    pub fn next_hit(&mut self) -> Result<Option<(HitDesc, HitContext)>, KernelError> {
        self.step(None)
    }

    pub fn stats(&self) -> TraceStats {
        self.stats
    }
}

impl Iterator for RejectRepeatsCursor<'_> {
    type Item = Result<(HitDesc, HitContext), KernelError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_hit().transpose()
    }
}

/// User code runs inside the closest-hit program.
pub fn run_reject_repeats(
    scene: &Scene,
    ray: &Ray,
    user: &mut dyn UserCode,
) -> Result<FtbReport, KernelError> {
    let mut delivery = Delivery::new(user);
    let mut cursor = RejectRepeatsCursor::new(scene, ray);
    while cursor.step(Some(&mut delivery))?.is_some() {}
    Ok(delivery.finish(cursor.stats()))
}

// ---------------------------------------------------------------------------
// while-while

/// Alternates closest-hit-only "feeler" rays, which find the next distinct
/// hit distance, with any-hit-only "executor" rays whose interval
/// `(just_below(t), just_above(t))` admits exactly that one distance.
pub fn run_while_while(
    scene: &Scene,
    ray: &Ray,
    user: &mut dyn UserCode,
) -> Result<FtbReport, KernelError> {
    let mut delivery = Delivery::new(user);
    let mut stats = TraceStats::default();
    let user_t_max = ray.t_max;

    let mut feeler_ch = |ctx: &HitContext, t_next: &mut Option<f32>| *t_next = Some(ctx.t);
    let mut feeler = TraceConfig::default()
        .with_closest_hit(&mut feeler_ch)
        .with_flags(TraceFlags::DISABLE_ANYHIT);

    let mut executor_ah = |ctx: &HitContext, delivery: &mut Delivery<'_>| match delivery
        .deliver(ctx.hit_desc(), Some(ctx))
    {
        Flow::Stop => AhVerdict::TerminateAccept,
        Flow::Continue => AhVerdict::Ignore,
    };
    let mut executor = TraceConfig::default()
        .with_any_hit(&mut executor_ah)
        .with_flags(TraceFlags::DISABLE_CLOSESTHIT);

    let mut t_min = ray.t_min;
    loop {
        let mut t_next = None;
        trace(
            scene,
            &ray.with_interval(t_min, user_t_max),
            &mut feeler,
            &mut t_next,
            &mut stats,
        )?;
        let Some(t_next) = t_next else { break };

        let exec_ray = ray.with_interval(just_below(t_next)?, just_above(t_next)?);
        trace(scene, &exec_ray, &mut executor, &mut delivery, &mut stats)?;
        if delivery.stopped {
            break;
        }
        t_min = t_next;
    }
    Ok(delivery.finish(stats))
}

// ---------------------------------------------------------------------------
// while-merged

#[derive(Debug, Clone, Copy, PartialEq)]
enum Feeler {
    NotFound,
    Found(f32),
    /// User code asked to stop during this trace.
    Stopped,
}

struct WhileMergedPrd<'d, 'u> {
    /// Distance whose hits get user code this round.
    t_exec: Option<f32>,
    feeler: Feeler,
    delivery: &'d mut Delivery<'u>,
}

fn while_merged_any_hit(ctx: &HitContext, prd: &mut WhileMergedPrd<'_, '_>) -> AhVerdict {
    if prd.t_exec != Some(ctx.t) {
        // Hits beyond the execution distance: accept so the closest one
        // becomes next round's distance, without running user code.
        return AhVerdict::Accept;
    }
    match prd.delivery.deliver(ctx.hit_desc(), Some(ctx)) {
        Flow::Stop => {
            prd.feeler = Feeler::Stopped;
            AhVerdict::TerminateAccept
        }
        Flow::Continue => AhVerdict::Ignore,
    }
}

fn while_merged_closest_hit(ctx: &HitContext, prd: &mut WhileMergedPrd<'_, '_>) {
    if prd.feeler != Feeler::Stopped {
        prd.feeler = Feeler::Found(ctx.t);
    }
}

/// Folds the feeler and executor of while-while into a single trace per
/// distinct distance: any-hit runs user code for hits at the previous
/// round's distance and accepts everything farther, closest-hit records
/// the next distance.
pub fn run_while_merged(
    scene: &Scene,
    ray: &Ray,
    user: &mut dyn UserCode,
) -> Result<FtbReport, KernelError> {
    let mut delivery = Delivery::new(user);
    let mut stats = TraceStats::default();
    let user_t_max = ray.t_max;
    let mut ah = while_merged_any_hit;
    let mut ch = while_merged_closest_hit;
    let mut cfg = TraceConfig::default()
        .with_any_hit(&mut ah)
        .with_closest_hit(&mut ch);

    let mut prd = WhileMergedPrd {
        t_exec: None,
        feeler: Feeler::NotFound,
        delivery: &mut delivery,
    };
    let mut t_min = ray.t_min;
    loop {
        trace(
            scene,
            &ray.with_interval(t_min, user_t_max),
            &mut cfg,
            &mut prd,
            &mut stats,
        )?;
        let Feeler::Found(t_next) = prd.feeler else {
            break;
        };
        prd.t_exec = Some(t_next);
        prd.feeler = Feeler::NotFound;
        t_min = just_below(t_next)?;
    }
    Ok(delivery.finish(stats))
}

// ---------------------------------------------------------------------------
// stable multi-hit

struct MultiHitPrd {
    hit_min: HitDesc,
    capacity: usize,
    /// Sorted ascending under `less`, at most `capacity` long.
    buffer: Vec<HitDesc>,
}

fn multi_hit_any_hit(ctx: &HitContext, prd: &mut MultiHitPrd) -> AhVerdict {
    let curr = ctx.hit_desc();
    if less(&prd.hit_min, &curr) {
        let full = prd.buffer.len() == prd.capacity;
        let beats_worst = prd.buffer.last().is_none_or(|w| less(&curr, w));
        if !full || beats_worst {
            if full {
                prd.buffer.pop();
            }
            let at = prd.buffer.partition_point(|h| less(h, &curr));
            prd.buffer.insert(at, curr);
        }
    }
    // Same rule as stable-next, against the worst buffered hit: only once
    // the buffer is full can anything be culled, and only strictly beyond
    // its worst distance so a tie group straddling the batch edge survives.
    match prd.buffer.last() {
        Some(worst) if prd.buffer.len() == prd.capacity && curr.t > worst.t => AhVerdict::Accept,
        _ => AhVerdict::Ignore,
    }
}

/// Explicit iteration in batches of up to `capacity` hits, each batch the
/// next hits in the strict total order after the previous batch.
pub struct StableMultiHitCursor<'s> {
    scene: &'s Scene,
    ray: Ray,
    user_t_max: f32,
    capacity: usize,
    hit_min: HitDesc,
    stats: TraceStats,
    done: bool,
}

impl<'s> StableMultiHitCursor<'s> {
    pub fn new(scene: &'s Scene, ray: &Ray, capacity: usize) -> Result<Self, KernelError> {
        if capacity == 0 {
            return Err(KernelError::ZeroCapacity);
        }
        Ok(StableMultiHitCursor {
            scene,
            ray: *ray,
            user_t_max: ray.t_max,
            capacity,
            hit_min: HitDesc::sentinel(ray.t_min),
            stats: TraceStats::default(),
            done: false,
        })
    }

    /// The next batch, or `None` once a trace finds nothing.
    pub fn next_batch(&mut self) -> Result<Option<Vec<HitDesc>>, KernelError> {
        if self.done {
            return Ok(None);
        }
        let mut prd = MultiHitPrd {
            hit_min: self.hit_min,
            capacity: self.capacity,
            buffer: Vec::with_capacity(self.capacity),
        };
        let mut ah = multi_hit_any_hit;
        let mut cfg = TraceConfig::default()
            .with_any_hit(&mut ah)
            .with_flags(TraceFlags::DISABLE_CLOSESTHIT);
        trace(self.scene, &self.ray, &mut cfg, &mut prd, &mut self.stats)?;
        let Some(&last) = prd.buffer.last() else {
            self.done = true;
            return Ok(None);
        };
        self.resume_after(last)?;
        Ok(Some(prd.buffer))
    }

    /// Continue after `hit` instead of after the end of the last batch, for
    /// callers that consumed only part of it.
    pub fn resume_after(&mut self, hit: HitDesc) -> Result<(), KernelError> {
        self.hit_min = hit;
        self.ray = self.ray.with_interval(just_below(hit.t)?, self.user_t_max);
        Ok(())
    }

    pub fn stats(&self) -> TraceStats {
        self.stats
    }
}

pub fn run_stable_multi_hit(
    scene: &Scene,
    ray: &Ray,
    capacity: usize,
    user: &mut dyn UserCode,
) -> Result<FtbReport, KernelError> {
    let mut cursor = StableMultiHitCursor::new(scene, ray, capacity)?;
    let mut delivery = Delivery::new(user);
    'batches: while let Some(batch) = cursor.next_batch()? {
        for hit in batch {
            if delivery.deliver(hit, None) == Flow::Stop {
                break 'batches;
            }
        }
    }
    Ok(delivery.finish(cursor.stats()))
}

// ---------------------------------------------------------------------------
// baselines

/// One trace; user code runs in any-hit, in whatever order traversal finds
/// the hits.
pub fn run_ah_only(
    scene: &Scene,
    ray: &Ray,
    user: &mut dyn UserCode,
) -> Result<FtbReport, KernelError> {
    let mut delivery = Delivery::new(user);
    let mut stats = TraceStats::default();
    let mut ah = |ctx: &HitContext, delivery: &mut Delivery<'_>| match delivery
        .deliver(ctx.hit_desc(), Some(ctx))
    {
        Flow::Stop => AhVerdict::TerminateAccept,
        Flow::Continue => AhVerdict::Ignore,
    };
    let mut cfg = TraceConfig::default()
        .with_any_hit(&mut ah)
        .with_flags(TraceFlags::DISABLE_CLOSESTHIT);
    trace(scene, ray, &mut cfg, &mut delivery, &mut stats)?;
    Ok(delivery.finish(stats))
}

/// Closest-hit loop restarting exactly at the last distance, so only one
/// hit per distance group is ever seen.
pub fn run_ch_only(
    scene: &Scene,
    ray: &Ray,
    user: &mut dyn UserCode,
) -> Result<FtbReport, KernelError> {
    struct ChPrd<'d, 'u> {
        found: Option<f32>,
        delivery: &'d mut Delivery<'u>,
    }
    let mut delivery = Delivery::new(user);
    let mut stats = TraceStats::default();
    let mut ch = |ctx: &HitContext, prd: &mut ChPrd<'_, '_>| {
        prd.delivery.deliver(ctx.hit_desc(), Some(ctx));
        prd.found = Some(ctx.t);
    };
    let mut cfg = TraceConfig::default()
        .with_closest_hit(&mut ch)
        .with_flags(TraceFlags::DISABLE_ANYHIT);
    let mut prd = ChPrd {
        found: None,
        delivery: &mut delivery,
    };
    let mut t_min = ray.t_min;
    loop {
        prd.found = None;
        trace(
            scene,
            &ray.with_interval(t_min, ray.t_max),
            &mut cfg,
            &mut prd,
            &mut stats,
        )?;
        match prd.found {
            Some(t) if !prd.delivery.stopped => t_min = t,
            _ => break,
        }
    }
    Ok(delivery.finish(stats))
}

// ---------------------------------------------------------------------------
// kernel selection

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelId {
    StableNext,
    RejectRepeats,
    WhileWhile,
    WhileMerged,
    StableMultiHit(usize),
    AhOnly,
    ChOnly,
}

/// Expected counter values for a run to exhaustion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CounterExpectation {
    pub traces: u64,
    pub ah_calls_exact: Option<u64>,
    pub ah_calls_at_least: Option<u64>,
}

/// Anything the validator can run: the built-in kernels, or a test fixture.
pub trait FtbKernel: Send + Sync {
    fn name(&self) -> String;

    fn run(
        &self,
        scene: &Scene,
        ray: &Ray,
        user: &mut dyn UserCode,
    ) -> Result<FtbReport, KernelError>;

    /// Whether the delivered sequence must equal the oracle's sorted hits
    /// exactly (and therefore be invariant under rebuilds).
    fn is_stable(&self) -> bool;

    /// Counter identities at exhaustion, given the oracle's hit count, its
    /// number of distinct distances, and how many hits were delivered.
    fn expected_counters(
        &self,
        hits: usize,
        groups: usize,
        delivered: usize,
    ) -> Option<CounterExpectation>;
}

impl KernelId {
    /// The kernels that are supposed to be correct, with the multi-hit
    /// capacities exercised by default.
    pub const CORRECT: [KernelId; 7] = [
        KernelId::StableNext,
        KernelId::RejectRepeats,
        KernelId::WhileWhile,
        KernelId::WhileMerged,
        KernelId::StableMultiHit(1),
        KernelId::StableMultiHit(4),
        KernelId::StableMultiHit(16),
    ];

    pub fn is_correct(&self) -> bool {
        !matches!(self, KernelId::AhOnly | KernelId::ChOnly)
    }

    /// Whether user code receives a [`HitContext`].
    pub fn has_pipeline_state(&self) -> bool {
        !matches!(self, KernelId::StableNext | KernelId::StableMultiHit(_))
    }
}

impl FtbKernel for KernelId {
    fn name(&self) -> String {
        self.to_string()
    }

    fn run(
        &self,
        scene: &Scene,
        ray: &Ray,
        user: &mut dyn UserCode,
    ) -> Result<FtbReport, KernelError> {
        match *self {
            KernelId::StableNext => run_stable_next(scene, ray, user),
            KernelId::RejectRepeats => run_reject_repeats(scene, ray, user),
            KernelId::WhileWhile => run_while_while(scene, ray, user),
            KernelId::WhileMerged => run_while_merged(scene, ray, user),
            KernelId::StableMultiHit(n) => run_stable_multi_hit(scene, ray, n, user),
            KernelId::AhOnly => run_ah_only(scene, ray, user),
            KernelId::ChOnly => run_ch_only(scene, ray, user),
        }
    }

    fn is_stable(&self) -> bool {
        matches!(self, KernelId::StableNext | KernelId::StableMultiHit(_))
    }

    fn expected_counters(
        &self,
        hits: usize,
        groups: usize,
        delivered: usize,
    ) -> Option<CounterExpectation> {
        let (h, g, d) = (hits as u64, groups as u64, delivered as u64);
        let exact = |traces| CounterExpectation {
            traces,
            ah_calls_exact: None,
            ah_calls_at_least: None,
        };
        Some(match *self {
            KernelId::StableNext | KernelId::RejectRepeats => exact(h + 1),
            KernelId::WhileWhile => CounterExpectation {
                traces: 2 * g + 1,
                ah_calls_exact: Some(h),
                ah_calls_at_least: None,
            },
            KernelId::WhileMerged => CounterExpectation {
                traces: g + 1,
                ah_calls_exact: None,
                ah_calls_at_least: Some(h),
            },
            KernelId::StableMultiHit(n) => exact(h.div_ceil(n.max(1) as u64) + 1),
            KernelId::AhOnly => CounterExpectation {
                traces: 1,
                ah_calls_exact: Some(d),
                ah_calls_at_least: None,
            },
            KernelId::ChOnly => exact(d + 1),
        })
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelId::StableNext => f.write_str("stable-next"),
            KernelId::RejectRepeats => f.write_str("reject-repeats"),
            KernelId::WhileWhile => f.write_str("while-while"),
            KernelId::WhileMerged => f.write_str("while-merged"),
            KernelId::StableMultiHit(n) => write!(f, "multi-hit:{n}"),
            KernelId::AhOnly => f.write_str("ah-only"),
            KernelId::ChOnly => f.write_str("ch-only"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown kernel {0:?} (expected stable-next, reject-repeats, while-while, while-merged, multi-hit:N, ah-only or ch-only)")]
pub struct UnknownKernel(pub String);

impl FromStr for KernelId {
    type Err = UnknownKernel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || UnknownKernel(s.to_string());
        Ok(match s {
            "stable-next" => KernelId::StableNext,
            "reject-repeats" => KernelId::RejectRepeats,
            "while-while" => KernelId::WhileWhile,
            "while-merged" => KernelId::WhileMerged,
            "ah-only" => KernelId::AhOnly,
            "ch-only" => KernelId::ChOnly,
            other => {
                let n = other.strip_prefix("multi-hit:").ok_or_else(unknown)?;
                match n.parse::<usize>() {
                    Ok(n) if n >= 1 => KernelId::StableMultiHit(n),
                    _ => return Err(unknown()),
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::hit_order::sorted_hits;
    use crate::scene::{gen_abutting_boxes, gen_coplanar_stack, gen_order_hazard};

    fn stack_ray() -> Ray {
        Ray::new(
            Vec3::new(1.0 / 3.0, 1.0 / 3.0, -1.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.0,
            100.0,
        )
    }

    fn run_all(kernel: KernelId, scene: &Scene, ray: &Ray) -> FtbReport {
        kernel.run(scene, ray, &mut count_all()).unwrap()
    }

    #[test]
    fn stable_next_delivers_ties_in_total_order() {
        let scene = gen_coplanar_stack(4, true).unwrap().build().unwrap();
        let report = run_all(KernelId::StableNext, &scene, &stack_ray());
        assert_eq!(report.hits.len(), 4);
        assert!(report.hits.iter().all(|h| h.t == 6.0));
        assert_eq!(report.hits, sorted_hits(report.hits.clone()));
        assert_eq!(report.stats.traces, 5);
        assert_eq!(report.stats.ch_calls, 0);
    }

    #[test]
    fn missing_ray_takes_one_trace() {
        let scene = gen_coplanar_stack(4, true).unwrap().build().unwrap();
        let ray = Ray::new(
            Vec3::new(3.0, 3.0, -1.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.0,
            100.0,
        );
        for kernel in KernelId::CORRECT {
            let report = run_all(kernel, &scene, &ray);
            assert!(report.hits.is_empty());
            assert_eq!(report.stats.traces, 1, "{kernel}");
        }
    }

    #[test]
    fn reject_repeats_single_hit_needs_two_traces() {
        let scene = gen_coplanar_stack(1, false).unwrap().build().unwrap();
        let report = run_all(KernelId::RejectRepeats, &scene, &stack_ray());
        assert_eq!(report.hits.len(), 1);
        assert_eq!(report.stats.traces, 2);
    }

    #[test]
    fn reject_repeats_survives_traversal_reordering() {
        let scene = gen_order_hazard().build().unwrap();
        let ray = Ray::new(
            Vec3::new(0.25, 0.25, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.0,
            100.0,
        );
        let report = run_all(KernelId::RejectRepeats, &scene, &ray);
        let keys: Vec<_> = report.hits.iter().map(|h| (h.t, h.inst)).collect();
        assert_eq!(keys.len(), 3);
        assert_eq!(keys[0], (3.0, 1));
        let mut at_nine: Vec<_> = keys[1..].iter().map(|k| k.1).collect();
        at_nine.sort();
        assert_eq!(at_nine, vec![0, 1]);
    }

    fn late_flip_scene() -> Scene {
        crate::scene::gen_late_flip().build().unwrap()
    }

    fn probe() -> Ray {
        Ray::new(
            Vec3::new(0.25, 0.25, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.0,
            100.0,
        )
    }

    #[test]
    fn late_flip_scene_reorders() {
        let scene = late_flip_scene();
        let order = |t_min: f32| {
            run_all(
                KernelId::AhOnly,
                &scene,
                &probe().with_interval(t_min, 100.0),
            )
            .hits
        };
        let insts = |hits: Vec<HitDesc>| hits.iter().map(|h| h.inst).collect::<Vec<_>>();
        assert_eq!(insts(order(0.0)), vec![0, 1]);
        assert_eq!(insts(order(just_below(9.0).unwrap())), vec![1, 0]);
    }

    /// Plain skip counting without the anchor guard: the bug the guard
    /// exists to prevent.
    #[test]
    fn counting_without_anchor_repeats_a_hit() {
        let scene = late_flip_scene();
        let mut found = Vec::new();
        let (mut t_min, mut skip, mut last_t) = (0.0f32, 0u32, f32::NEG_INFINITY);
        let mut stats = TraceStats::default();
        while found.len() < 4 {
            let mut ah = |ctx: &HitContext, left: &mut u32| {
                if ctx.t > last_t || *left == 0 {
                    AhVerdict::Accept
                } else {
                    *left -= 1;
                    AhVerdict::Ignore
                }
            };
            let mut cfg = TraceConfig::default().with_any_hit(&mut ah);
            let mut left = skip;
            let out = trace(
                &scene,
                &probe().with_interval(t_min, 100.0),
                &mut cfg,
                &mut left,
                &mut stats,
            )
            .unwrap();
            let Some(hit) = out.committed else { break };
            if hit.t > last_t {
                t_min = just_below(hit.t).unwrap();
                skip = 1;
                last_t = hit.t;
            } else {
                skip += 1;
            }
            found.push(hit.inst);
        }
        assert_eq!(found, vec![0, 0]);

        let report = run_all(KernelId::RejectRepeats, &scene, &probe());
        assert_eq!(
            report.hits.iter().map(|h| h.inst).collect::<Vec<_>>(),
            vec![0, 1]
        );
        assert_eq!(report.stats.traces, 3);
    }

    #[test]
    fn while_while_counts() {
        let scene = gen_coplanar_stack(4, true).unwrap().build().unwrap();
        let report = run_all(KernelId::WhileWhile, &scene, &stack_ray());
        assert_eq!(report.hits.len(), 4);
        assert_eq!(report.stats.ah_calls, 4);
        assert_eq!(report.stats.user_code_calls, 4);
        assert_eq!(report.stats.traces, 3);
    }

    #[test]
    fn while_while_keeps_abutting_faces() {
        let scene = gen_abutting_boxes(3).unwrap().build().unwrap();
        let ray = Ray::new(
            Vec3::new(-1.0, 0.125, -0.3125),
            Vec3::new(1.0, 0.0, 0.0),
            0.0,
            100.0,
        );
        let report = run_all(KernelId::WhileWhile, &scene, &ray);
        let ts: Vec<f32> = report.hits.iter().map(|h| h.t).collect();
        assert_eq!(ts, vec![1.0, 2.0, 2.0, 3.0, 3.0, 4.0]);
    }

    #[test]
    fn while_merged_counts() {
        let scene = gen_coplanar_stack(8, false).unwrap().build().unwrap();
        let merged = run_all(KernelId::WhileMerged, &scene, &stack_ray());
        let ww = run_all(KernelId::WhileWhile, &scene, &stack_ray());
        assert_eq!(merged.hits, ww.hits);
        assert_eq!(merged.stats.traces, 9);
        assert!(merged.stats.ah_calls > ww.stats.ah_calls);
    }

    #[test]
    fn multi_hit_resumes_inside_tie_group() {
        let scene = gen_coplanar_stack(6, true).unwrap().build().unwrap();
        let mut cursor = StableMultiHitCursor::new(&scene, &stack_ray(), 4).unwrap();
        let first = cursor.next_batch().unwrap().unwrap();
        let second = cursor.next_batch().unwrap().unwrap();
        assert!(cursor.next_batch().unwrap().is_none());
        assert_eq!((first.len(), second.len()), (4, 2));
        let all: Vec<_> = first.iter().chain(&second).copied().collect();
        assert_eq!(all, sorted_hits(all.clone()));
        assert_eq!(cursor.stats().traces, 3);
    }

    #[test]
    fn multi_hit_zero_capacity_rejected() {
        let scene = gen_coplanar_stack(1, true).unwrap().build().unwrap();
        assert_eq!(
            run_stable_multi_hit(&scene, &stack_ray(), 0, &mut count_all()).unwrap_err(),
            KernelError::ZeroCapacity
        );
    }

    #[test]
    fn multi_hit_one_matches_stable_next() {
        let scene = gen_coplanar_stack(5, true).unwrap().build().unwrap();
        let a = run_all(KernelId::StableMultiHit(1), &scene, &stack_ray());
        let b = run_all(KernelId::StableNext, &scene, &stack_ray());
        assert_eq!(a.hits, b.hits);
        assert_eq!(a.stats.traces, b.stats.traces);
    }

    #[test]
    fn ch_only_skips_coplanar() {
        let scene = gen_coplanar_stack(4, true).unwrap().build().unwrap();
        let report = run_all(KernelId::ChOnly, &scene, &stack_ray());
        assert_eq!(report.hits.len(), 1);
        assert_eq!(report.stats.traces, 2);
    }

    #[test]
    fn ah_only_is_out_of_order_on_hazard_scene() {
        let scene = gen_order_hazard().build().unwrap();
        let ray = Ray::new(
            Vec3::new(0.25, 0.25, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.0,
            100.0,
        );
        let report = run_all(KernelId::AhOnly, &scene, &ray);
        let ts: Vec<f32> = report.hits.iter().map(|h| h.t).collect();
        assert_eq!(ts, vec![9.0, 3.0, 9.0]);
        assert_eq!(report.stats.traces, 1);
    }

    #[test]
    fn pipeline_state_only_where_promised() {
        let scene = gen_coplanar_stack(2, true).unwrap().build().unwrap();
        for kernel in KernelId::CORRECT
            .into_iter()
            .chain([KernelId::AhOnly, KernelId::ChOnly])
        {
            let mut with_ctx = Vec::new();
            let mut user = |_: &HitDesc, ctx: Option<&HitContext>| {
                with_ctx.push(ctx.is_some());
                Flow::Continue
            };
            kernel.run(&scene, &stack_ray(), &mut user).unwrap();
            assert!(!with_ctx.is_empty());
            assert!(
                with_ctx.iter().all(|&c| c == kernel.has_pipeline_state()),
                "{kernel}"
            );
        }
    }

    #[test]
    fn stop_after_first_hit() {
        let scene = gen_coplanar_stack(3, true).unwrap().build().unwrap();
        for kernel in KernelId::CORRECT
            .into_iter()
            .chain([KernelId::AhOnly, KernelId::ChOnly])
        {
            let mut calls = 0;
            let mut user = |_: &HitDesc, _: Option<&HitContext>| {
                calls += 1;
                Flow::Stop
            };
            let report = kernel.run(&scene, &stack_ray(), &mut user).unwrap();
            assert_eq!(calls, 1, "{kernel}");
            assert!(report.stopped_early);
            assert_eq!(report.stats.user_code_calls, 1);
        }
    }

    #[test]
    fn cursors_match_callback_runs() {
        let scene = gen_abutting_boxes(3).unwrap().build().unwrap();
        let ray = Ray::new(
            Vec3::new(-1.0, 0.125, -0.3125),
            Vec3::new(1.0, 0.0, 0.0),
            0.0,
            100.0,
        );
        let via_cursor: Vec<_> = StableNextCursor::new(&scene, &ray)
            .map(Result::unwrap)
            .collect();
        assert_eq!(via_cursor, run_all(KernelId::StableNext, &scene, &ray).hits);
        let rr: Vec<_> = RejectRepeatsCursor::new(&scene, &ray)
            .map(|r| r.unwrap().0)
            .collect();
        assert_eq!(rr, run_all(KernelId::RejectRepeats, &scene, &ray).hits);
    }

    #[test]
    fn nan_ray_is_an_error() {
        let scene = gen_coplanar_stack(1, true).unwrap().build().unwrap();
        let ray = stack_ray().with_interval(f32::NAN, 1.0);
        for kernel in KernelId::CORRECT {
            assert!(matches!(
                kernel.run(&scene, &ray, &mut count_all()),
                Err(KernelError::Trace(TraceError::NanInterval))
            ));
        }
    }

    #[test]
    fn kernel_names_round_trip() {
        for kernel in KernelId::CORRECT
            .into_iter()
            .chain([KernelId::AhOnly, KernelId::ChOnly])
        {
            assert_eq!(kernel.to_string().parse::<KernelId>().unwrap(), kernel);
        }
        assert!("multi-hit:0".parse::<KernelId>().is_err());
        assert!("closest".parse::<KernelId>().is_err());
    }
}
