//! Brute-force ground truth and kernel validation.
//!
//! The oracle tests every triangle of every instance directly, without the
//! BVH or the pipeline, using the same triangle test as the pipeline so
//! that distances compare exactly.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{intersect_triangle, transform_ray, Ray};
use crate::hit_order::HitDesc;
use crate::kernels::{count_all, Flow, FtbKernel, FtbReport};
use crate::pipeline::{HitContext, TraceStats};
use crate::scene::{Scene, SceneDesc, SceneError};

/// All hits along a ray, sorted by [`crate::hit_order::less`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub hits: Vec<HitDesc>,
    /// Pipeline state for each entry of `hits`.
    pub contexts: Vec<HitContext>,
    /// Sizes of the runs of equal `t` in `hits`, in order.
    pub group_sizes: Vec<usize>,
}

impl OracleResult {
    pub fn group_count(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn groups(&self) -> impl Iterator<Item = &[HitDesc]> + '_ {
        let mut start = 0;
        self.group_sizes.iter().map(move |&n| {
            let group = &self.hits[start..start + n];
            start += n;
            group
        })
    }
}

pub fn oracle_all_hits(scene: &Scene, ray: &Ray) -> OracleResult {
    let mut found = Vec::new();
    for instance in scene.instances() {
        let object_ray = transform_ray(&instance.transform, ray);
        for &geometry in &instance.geometries {
            let mesh = scene.mesh_of(geometry);
            let geom = scene.sbt_offset(geometry) as i32;
            for (prim, tri) in mesh.triangles().enumerate() {
                let Some(hit) = intersect_triangle(&object_ray, &tri) else {
                    continue;
                };
                let ctx = HitContext {
                    t: hit.t,
                    prim: prim as i32,
                    geom,
                    inst: instance.index as i32,
                    barycentrics: (hit.u, hit.v),
                    front_face: hit.front_face,
                    object_to_world: *instance.transform.object_to_world(),
                    world_to_object: *instance.transform.world_to_object(),
                    world_ray_origin: ray.origin,
                    world_ray_direction: ray.direction,
                    ray_t_min: ray.t_min,
                };
                found.push(ctx);
            }
        }
    }
    found.sort_by_key(|c| c.hit_desc());
    let hits: Vec<HitDesc> = found.iter().map(HitContext::hit_desc).collect();
    OracleResult {
        group_sizes: group_sizes(&hits),
        hits,
        contexts: found,
    }
}

/// Lengths of the maximal runs of bitwise-equal `t`.
pub fn group_sizes(hits: &[HitDesc]) -> Vec<usize> {
    hits.chunk_by(|a, b| a.t.to_bits() == b.t.to_bits())
        .map(<[_]>::len)
        .collect()
}

/// Element-wise equality comparing distances by bit pattern.
pub fn same_sequence(a: &[HitDesc], b: &[HitDesc]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.t.to_bits() == y.t.to_bits() && x.key() == y.key())
}

fn sorted(hits: &[HitDesc]) -> Vec<HitDesc> {
    let mut v = hits.to_vec();
    v.sort();
    v
}

/// Same equal-`t` runs with the same members, in any order within a run.
pub fn same_groups(a: &[HitDesc], b: &[HitDesc]) -> bool {
    let runs = |h: &[HitDesc]| {
        h.chunk_by(|x, y| x.t.to_bits() == y.t.to_bits())
            .map(sorted)
            .collect::<Vec<_>>()
    };
    let (ra, rb) = (runs(a), runs(b));
    ra.len() == rb.len() && ra.iter().zip(&rb).all(|(x, y)| same_sequence(x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// Delivered multiset differs from the oracle's.
    Completeness,
    /// Some hit delivered more than once.
    Duplicate,
    /// Delivered distances decrease somewhere.
    Order,
    /// A stable kernel's sequence differs from the sorted oracle hits.
    StableSequence,
    /// A counter identity does not hold at exhaustion.
    Counters,
    /// Stopping after hit k did not deliver exactly the first k hits.
    EarlyStop,
    /// The kernel returned an error.
    KernelError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub ray_index: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

/// The first ray that failed, in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FailureDetail {
    pub ray_index: usize,
    pub ray: Ray,
    pub expected: Vec<HitDesc>,
    pub actual: Vec<HitDesc>,
    pub stats: TraceStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub kernel: String,
    pub rays: usize,
    pub oracle_hits: u64,
    pub delivered_hits: u64,
    pub stats: TraceStats,
    pub violation_counts: BTreeMap<ViolationKind, usize>,
    pub violations: Vec<Violation>,
    pub first_failure: Option<FailureDetail>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violation_counts.get(&kind).copied().unwrap_or(0)
    }
}

struct RayOutcome {
    violations: Vec<Violation>,
    oracle_hits: usize,
    report: FtbReport,
}

fn check_ray(kernel: &dyn FtbKernel, scene: &Scene, ray: &Ray, ray_index: usize) -> RayOutcome {
    let oracle = oracle_all_hits(scene, ray);
    let mut violations = Vec::new();
    let mut flag = |kind, detail: String| {
        violations.push(Violation {
            ray_index,
            kind,
            detail,
        })
    };

    let report = match kernel.run(scene, ray, &mut count_all()) {
        Ok(report) => report,
        Err(e) => {
            flag(ViolationKind::KernelError, e.to_string());
            return RayOutcome {
                violations,
                oracle_hits: oracle.hits.len(),
                report: FtbReport::default(),
            };
        }
    };
    let delivered = &report.hits;

    let distinct: HashSet<_> = delivered.iter().map(HitDesc::key).collect();
    if distinct.len() != delivered.len() {
        flag(
            ViolationKind::Duplicate,
            format!(
                "{} hits delivered, {} distinct",
                delivered.len(),
                distinct.len()
            ),
        );
    }
    if !same_sequence(&sorted(delivered), &oracle.hits) {
        flag(
            ViolationKind::Completeness,
            format!(
                "delivered {} hits, oracle has {}",
                delivered.len(),
                oracle.hits.len()
            ),
        );
    }
    if let Some(i) = delivered.windows(2).position(|w| w[1].t < w[0].t) {
        flag(
            ViolationKind::Order,
            format!(
                "hit {} at t={} follows t={}",
                i + 1,
                delivered[i + 1].t,
                delivered[i].t
            ),
        );
    }
    if kernel.is_stable() && !same_sequence(delivered, &oracle.hits) {
        flag(
            ViolationKind::StableSequence,
            "sequence differs from sorted oracle hits".into(),
        );
    }
    if let Some(expect) =
        kernel.expected_counters(oracle.hits.len(), oracle.group_count(), delivered.len())
    {
        let s = &report.stats;
        let mut bad = Vec::new();
        if s.traces != expect.traces {
            bad.push(format!("traces {} != {}", s.traces, expect.traces));
        }
        if let Some(n) = expect.ah_calls_exact.filter(|&n| s.ah_calls != n) {
            bad.push(format!("ahCalls {} != {n}", s.ah_calls));
        }
        if let Some(n) = expect.ah_calls_at_least.filter(|&n| s.ah_calls < n) {
            bad.push(format!("ahCalls {} < {n}", s.ah_calls));
        }
        if s.user_code_calls != delivered.len() as u64 {
            bad.push(format!(
                "userCodeCalls {} != {}",
                s.user_code_calls,
                delivered.len()
            ));
        }
        if !bad.is_empty() {
            flag(ViolationKind::Counters, bad.join("; "));
        }
    }
    if delivered.len() >= 2 {
        let k = delivered.len() / 2;
        let mut calls = 0;
        let mut stop_at_k = |_: &HitDesc, _: Option<&HitContext>| {
            calls += 1;
            if calls == k {
                Flow::Stop
            } else {
                Flow::Continue
            }
        };
        match kernel.run(scene, ray, &mut stop_at_k) {
            Ok(partial)
                if partial.stopped_early && same_sequence(&partial.hits, &delivered[..k]) => {}
            Ok(partial) => flag(
                ViolationKind::EarlyStop,
                format!(
                    "stopping after {k} delivered {} hits, not the exhaustion prefix",
                    partial.hits.len()
                ),
            ),
            Err(e) => flag(ViolationKind::KernelError, e.to_string()),
        }
    }

    RayOutcome {
        violations,
        oracle_hits: oracle.hits.len(),
        report,
    }
}

/// Runs `kernel` to exhaustion on every ray and checks it against the
/// oracle. Rays are checked in parallel; the report is ordered by ray index
/// and does not depend on the thread count.
pub fn validate_kernel(kernel: &dyn FtbKernel, scene: &Scene, rays: &[Ray]) -> ValidationReport {
    let outcomes: Vec<RayOutcome> = rays
        .par_iter()
        .enumerate()
        .map(|(i, ray)| check_ray(kernel, scene, ray, i))
        .collect();

    let mut report = ValidationReport {
        kernel: kernel.name(),
        rays: rays.len(),
        oracle_hits: 0,
        delivered_hits: 0,
        stats: TraceStats::default(),
        violation_counts: BTreeMap::new(),
        violations: Vec::new(),
        first_failure: None,
    };
    for (i, outcome) in outcomes.into_iter().enumerate() {
        report.oracle_hits += outcome.oracle_hits as u64;
        report.delivered_hits += outcome.report.hits.len() as u64;
        report.stats += outcome.report.stats;
        if !outcome.violations.is_empty() && report.first_failure.is_none() {
            report.first_failure = Some(FailureDetail {
                ray_index: i,
                ray: rays[i],
                expected: oracle_all_hits(scene, &rays[i]).hits,
                actual: outcome.report.hits,
                stats: outcome.report.stats,
            });
        }
        for v in outcome.violations {
            *report.violation_counts.entry(v.kind).or_default() += 1;
            report.violations.push(v);
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StabilityMismatch {
    pub seed: u64,
    pub ray_index: usize,
    /// `true` if even the distance-group contents differ.
    pub groups_differ: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StabilityReport {
    pub kernel: String,
    pub seeds: Vec<u64>,
    pub rays: usize,
    /// Rays whose delivered sequence changed under a rebuild.
    pub mismatches: Vec<StabilityMismatch>,
}

impl StabilityReport {
    /// Sequence equality for stable kernels, group equality otherwise.
    pub fn passed(&self, require_sequence: bool) -> bool {
        self.mismatches
            .iter()
            .all(|m| !require_sequence && !m.groups_differ)
    }

    pub fn sequence_changes(&self) -> usize {
        self.mismatches.len()
    }
}

/// Rebuilds `desc` once per seed with permuted primitive order and compares
/// each ray's delivered sequence to the as-given build.
pub fn check_rebuild_stability(
    kernel: &dyn FtbKernel,
    desc: &SceneDesc,
    rays: &[Ray],
    seeds: &[u64],
) -> Result<StabilityReport, SceneError> {
    let run = |scene: &Scene| -> Vec<Option<Vec<HitDesc>>> {
        rays.par_iter()
            .map(|ray| {
                kernel
                    .run(scene, ray, &mut count_all())
                    .ok()
                    .map(|r| r.hits)
            })
            .collect()
    };
    let base_scene = desc.build_with(desc.build.as_given())?;
    let base = run(&base_scene);
    let mut mismatches = Vec::new();
    for &seed in seeds {
        let scene = desc.build_with(desc.build.permuted(seed))?;
        for (ray_index, (a, b)) in base.iter().zip(run(&scene)).enumerate() {
            let (seq, groups) = match (a, &b) {
                (Some(a), Some(b)) => (same_sequence(a, b), same_groups(a, b)),
                _ => (false, false),
            };
            if !seq {
                mismatches.push(StabilityMismatch {
                    seed,
                    ray_index,
                    groups_differ: !groups,
                });
            }
        }
    }
    Ok(StabilityReport {
        kernel: kernel.name(),
        seeds: seeds.to_vec(),
        rays: rays.len(),
        mismatches,
    })
}
