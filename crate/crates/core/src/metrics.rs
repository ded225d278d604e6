//! Pareto-front analytics: dominance filtering, merging, exact 2-D
//! hypervolume and the per-run dominance summary.
//!
//! Hypervolume is measured in normalized space: `f1 / f1_ref` and `f2` as is,
//! against the reference point `(1, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::{ParetoFront, Phase};
use crate::moea::ObjectiveVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    /// Baseline nonzero count; `f1` is divided by it.
    pub f1_ref: f64,
}

impl NormalizationSpec {
    pub fn new(f1_ref: f64) -> Self {
        NormalizationSpec { f1_ref }
    }

    pub fn normalize(&self, o: &ObjectiveVector) -> (f64, f64) {
        (o.f1 / self.f1_ref, o.f2)
    }

    pub fn check_same(&self, other: &NormalizationSpec) -> Result<()> {
        if self.f1_ref.to_bits() != other.f1_ref.to_bits() {
            return Err(Error::NormalizationMismatch {
                left: self.f1_ref,
                right: other.f1_ref,
            });
        }
        Ok(())
    }
}

/// Indices of the non-dominated points; among objective duplicates only the
/// first is kept. Output is in input order.
pub fn pareto_filter(points: &[ObjectiveVector]) -> Vec<usize> {
    // Sort by (f1, f2) and sweep: a point survives iff its f2 is strictly
    // below every f2 seen at a smaller-or-equal f1.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .f1
            .total_cmp(&points[b].f1)
            .then(points[a].f2.total_cmp(&points[b].f2))
            .then(a.cmp(&b))
    });
    let mut keep = Vec::new();
    let mut best_f2 = f64::INFINITY;
    for &i in &order {
        if points[i].f2 < best_f2 {
            keep.push(i);
            best_f2 = points[i].f2;
        }
    }
    keep.sort_unstable();
    keep
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypervolume {
    pub value: f64,
    /// Points that fell outside `[0, 1]^2` after normalization and were clipped.
    pub clipped: usize,
}

/// Exact 2-D hypervolume by a sweep over normalized `f1`.
pub fn hypervolume2(points: &[ObjectiveVector], norm: &NormalizationSpec) -> Hypervolume {
    if points.is_empty() {
        log::warn!("hypervolume of an empty front is 0");
        return Hypervolume {
            value: 0.0,
            clipped: 0,
        };
    }
    let mut clipped = 0;
    let normed: Vec<ObjectiveVector> = points
        .iter()
        .map(|o| {
            let (a, b) = norm.normalize(o);
            let (ca, cb) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
            if ca != a || cb != b {
                clipped += 1;
            }
            ObjectiveVector::new(ca, cb)
        })
        .collect();
    if clipped > 0 {
        log::warn!("{clipped} point(s) outside the unit box were clipped for hypervolume");
    }
    let mut front: Vec<ObjectiveVector> = pareto_filter(&normed).into_iter().map(|i| normed[i]).collect();
    front.sort_by(|a, b| a.f1.total_cmp(&b.f1));
    let mut value = 0.0;
    for (k, p) in front.iter().enumerate() {
        let next_f1 = front.get(k + 1).map_or(1.0, |q| q.f1);
        value += (next_f1 - p.f1) * (1.0 - p.f2);
    }
    Hypervolume { value, clipped }
}

/// Non-dominated union of two fronts under one shared normalization. On an
/// objective tie the solution from `a` is kept.
pub fn merge_fronts(a: &ParetoFront, b: &ParetoFront, norm: &NormalizationSpec) -> Result<ParetoFront> {
    a.norm.check_same(norm)?;
    b.norm.check_same(norm)?;
    let all: Vec<_> = a.solutions.iter().chain(&b.solutions).cloned().collect();
    let objs: Vec<ObjectiveVector> = all.iter().map(|s| s.objectives()).collect();
    let mut solutions: Vec<_> = pareto_filter(&objs).into_iter().map(|i| all[i].clone()).collect();
    solutions.sort_by(|x, y| x.f1.total_cmp(&y.f1).then(x.f2_val.total_cmp(&y.f2_val)));
    Ok(ParetoFront {
        seed: a.seed,
        norm: *norm,
        solutions,
    })
}

/// Per-run summary; field names mirror the usual results-table rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    #[serde(rename = "Phase 1 HV")]
    pub phase1_hv: f64,
    #[serde(rename = "# Phase 1 Pareto Solutions")]
    pub phase1_size: usize,
    #[serde(rename = "# Phase 2 Pareto Solutions")]
    pub phase2_size: usize,
    #[serde(rename = "# Dominating Phase 1")]
    pub dominating: usize,
    #[serde(rename = "Final HV")]
    pub final_hv: f64,
    #[serde(rename = "HV Delta")]
    pub hv_delta: f64,
    #[serde(rename = "# Final Pareto Solutions")]
    pub merged_size: usize,
    #[serde(rename = "# Phase 2 in Final Front")]
    pub phase2_in_merged: usize,
    pub light_anchor_f1: f64,
    pub light_anchor_f2: f64,
    pub f1_ref: f64,
}

/// Counts Phase-2 solutions that strictly dominate the light anchor and
/// survive the merge, plus hypervolumes before and after merging.
pub fn dominance_report(
    p1: &ParetoFront,
    p2: &ParetoFront,
    light_anchor: ObjectiveVector,
    norm: &NormalizationSpec,
) -> Result<DominanceReport> {
    let merged = merge_fronts(p1, p2, norm)?;
    let phase1_hv = hypervolume2(&p1.objectives(), norm).value;
    let final_hv = hypervolume2(&merged.objectives(), norm).value;
    let survivors: Vec<_> = merged.solutions.iter().filter(|s| s.phase == Phase::Phase2).collect();
    let dominating = survivors
        .iter()
        .filter(|s| s.objectives().dominates(&light_anchor))
        .count();
    Ok(DominanceReport {
        phase1_hv,
        phase1_size: p1.len(),
        phase2_size: p2.len(),
        dominating,
        final_hv,
        hv_delta: final_hv - phase1_hv,
        merged_size: merged.len(),
        phase2_in_merged: survivors.len(),
        light_anchor_f1: light_anchor.f1,
        light_anchor_f2: light_anchor.f2,
        f1_ref: norm.f1_ref,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::{Decision, Solution};
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn ov(a: f64, b: f64) -> ObjectiveVector {
        ObjectiveVector::new(a, b)
    }

    fn unit() -> NormalizationSpec {
        NormalizationSpec::new(1.0)
    }

    fn oracle_filter(points: &[ObjectiveVector]) -> Vec<usize> {
        let mut keep: Vec<usize> = Vec::new();
        for i in 0..points.len() {
            let dominated = points.iter().any(|q| q.dominates(&points[i]));
            let dup = keep.iter().any(|&k| points[k].same_as(&points[i]));
            if !dominated && !dup {
                keep.push(i);
            }
        }
        keep
    }

    fn monte_carlo(points: &[ObjectiveVector], samples: usize, seed: u64) -> f64 {
        let mut rng = stream(seed, "mc", &[]);
        let hits = (0..samples)
            .filter(|_| {
                let (x, y): (f64, f64) = (rng.random(), rng.random());
                points.iter().any(|p| p.f1 <= x && p.f2 <= y)
            })
            .count();
        hits as f64 / samples as f64
    }

    fn front(phase: Phase, pts: &[(f64, f64)]) -> ParetoFront {
        ParetoFront {
            seed: 0,
            norm: unit(),
            solutions: pts
                .iter()
                .map(|&(f1, f2)| Solution {
                    phase,
                    decision: Decision::Thresholds { th1: 0.0, th2: 0.0 },
                    f1,
                    f2_opt: f2,
                    f2_val: f2,
                    generation: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn filter_examples() {
        assert_eq!(pareto_filter(&[ov(1.0, 1.0), ov(2.0, 2.0)]), vec![0]);
        assert_eq!(pareto_filter(&[ov(1.0, 2.0), ov(2.0, 1.0)]), vec![0, 1]);
        assert_eq!(pareto_filter(&[ov(1.0, 2.0), ov(1.0, 2.0)]), vec![0]);
        assert!(pareto_filter(&[]).is_empty());
    }

    #[test]
    fn filter_matches_oracle_on_300_points() {
        let mut rng = stream(5, "filter", &[]);
        let pts: Vec<_> = (0..300)
            .map(|_| ov(rng.random_range(0..40) as f64, rng.random_range(0..40) as f64))
            .collect();
        assert_eq!(pareto_filter(&pts), oracle_filter(&pts));
    }

    #[test]
    fn hv_examples() {
        assert!((hypervolume2(&[ov(0.5, 0.5)], &unit()).value - 0.25).abs() < 1e-15);
        let two = hypervolume2(&[ov(0.2, 0.4), ov(0.6, 0.1)], &unit()).value;
        assert!((two - 0.60).abs() < 1e-12);
        let mc = monte_carlo(&[ov(0.2, 0.4), ov(0.6, 0.1)], 1_000_000, 1);
        assert!((mc - 0.60).abs() < 0.01);
        assert_eq!(hypervolume2(&[ov(0.0, 0.0), ov(0.3, 0.9)], &unit()).value, 1.0);
        let empty = hypervolume2(&[], &unit());
        assert_eq!(empty.value, 0.0);
    }

    #[test]
    fn hv_normalizes_and_clips() {
        let n = NormalizationSpec::new(200.0);
        let hv = hypervolume2(&[ov(100.0, 0.5)], &n);
        assert!((hv.value - 0.25).abs() < 1e-15);
        let out = hypervolume2(&[ov(300.0, 0.5), ov(100.0, -0.1)], &n);
        assert_eq!(out.clipped, 2);
        assert!((out.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn merge_examples() {
        let a = front(Phase::Phase1, &[(0.2, 0.5), (0.6, 0.1)]);
        let empty = front(Phase::Phase2, &[]);
        assert_eq!(merge_fronts(&a, &empty, &unit()).unwrap().solutions, a.solutions);
        let worse = front(Phase::Phase2, &[(0.3, 0.6), (0.7, 0.2)]);
        assert_eq!(merge_fronts(&a, &worse, &unit()).unwrap().solutions, a.solutions);
        let mixed = front(Phase::Phase2, &[(0.1, 0.9), (0.3, 0.2)]);
        let m = merge_fronts(&a, &mixed, &unit()).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.solutions.iter().filter(|s| s.phase == Phase::Phase2).count(), 2);
    }

    #[test]
    fn merge_rejects_mismatched_normalization() {
        let a = front(Phase::Phase1, &[(0.2, 0.5)]);
        let mut b = front(Phase::Phase2, &[(0.1, 0.5)]);
        b.norm = NormalizationSpec::new(2.0);
        assert!(matches!(
            merge_fronts(&a, &b, &unit()),
            Err(Error::NormalizationMismatch { .. })
        ));
    }

    #[test]
    fn report_examples() {
        let p1 = front(Phase::Phase1, &[(0.2, 0.5), (0.5, 0.2), (0.8, 0.05)]);
        let light = ov(0.2, 0.5);
        let copy = ParetoFront {
            solutions: p1
                .solutions
                .iter()
                .cloned()
                .map(|mut s| {
                    s.phase = Phase::Phase2;
                    s
                })
                .collect(),
            ..p1.clone()
        };
        let r = dominance_report(&p1, &copy, light, &unit()).unwrap();
        assert_eq!(r.dominating, 0);
        assert_eq!(r.hv_delta, 0.0);

        let better = front(Phase::Phase2, &[(0.15, 0.45)]);
        let r = dominance_report(&p1, &better, light, &unit()).unwrap();
        assert_eq!(r.dominating, 1);
        assert!(r.hv_delta > 0.0);
        assert_eq!(r.phase2_size, 1);
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(pts in proptest::collection::vec((0u8..20, 0u8..20), 0..60)) {
            let objs: Vec<_> = pts.iter().map(|&(a, b)| ov(a as f64, b as f64)).collect();
            let once: Vec<_> = pareto_filter(&objs).into_iter().map(|i| objs[i]).collect();
            let twice: Vec<_> = pareto_filter(&once).into_iter().map(|i| once[i]).collect();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn hv_monotone_under_nondominated_insertion(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
            extra in (0.0f64..1.0, 0.0f64..1.0),
        ) {
            let objs: Vec<_> = pts.iter().map(|&(a, b)| ov(a, b)).collect();
            let base = hypervolume2(&objs, &unit()).value;
            let e = ov(extra.0, extra.1);
            prop_assume!(!objs.iter().any(|p| p.dominates(&e)));
            let mut more = objs.clone();
            more.push(e);
            prop_assert!(hypervolume2(&more, &unit()).value >= base - 1e-15);
        }

        #[test]
        fn merged_hv_at_least_each_part(
            a in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..15),
            b in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..15),
        ) {
            let fa = front(Phase::Phase1, &a);
            let fb = front(Phase::Phase2, &b);
            let m = merge_fronts(&fa, &fb, &unit()).unwrap();
            let hv = |f: &ParetoFront| hypervolume2(&f.objectives(), &unit()).value;
            prop_assert!(hv(&m) >= hv(&fa).max(hv(&fb)) - 1e-12);
        }
    }
}
