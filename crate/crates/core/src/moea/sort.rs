//! Non-dominated sorting and crowding distance for two minimized objectives.

use super::{Individual, ObjectiveVector};
use crate::error::{Error, Result};

/// Deb's fast non-dominated sort. Front 0 is the non-dominated set; every
/// index appears in exactly one front.
pub fn nondominated_fronts(objs: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = vec![Vec::new()];
    for p in 0..n {
        for q in p + 1..n {
            if objs[p].dominates(&objs[q]) {
                dominated_by[p].push(q);
                domination_count[q] += 1;
            } else if objs[q].dominates(&objs[p]) {
                dominated_by[q].push(p);
                domination_count[p] += 1;
            }
        }
    }
    for p in 0..n {
        if domination_count[p] == 0 {
            fronts[0].push(p);
        }
    }
    let mut i = 0;
    while !fronts[i].is_empty() {
        let mut next = Vec::new();
        for &p in &fronts[i] {
            for &q in &dominated_by[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        i += 1;
        fronts.push(next);
    }
    fronts.pop();
    fronts
}

/// Sorts an evaluated population. Unevaluated members are a contract
/// violation.
pub fn fast_nondominated_sort(pop: &[Individual]) -> Result<Vec<Vec<usize>>> {
    let objs = pop
        .iter()
        .enumerate()
        .map(|(i, ind)| {
            ind.objectives
                .ok_or_else(|| Error::Contract(format!("individual {i} has not been evaluated")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nondominated_fronts(&objs))
}

/// Crowding distance of each point of one front. Per-objective extremes get
/// +inf; interior points sum neighbour gaps over the objective range;
/// zero-range objectives add nothing.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for m in 0..2 {
        let key = |i: usize| front[i].get(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        let (lo, hi) = (key(order[0]), key(order[n - 1]));
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for k in 1..n - 1 {
            let i = order[k];
            if dist[i].is_finite() {
                dist[i] += (key(order[k + 1]) - key(order[k - 1])) / range;
            }
        }
    }
    dist
}

/// Writes rank and crowding into every member.
pub(crate) fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let objs: Vec<ObjectiveVector> = pop.iter().map(|i| i.objectives.expect("evaluated")).collect();
    for (rank, front) in nondominated_fronts(&objs).iter().enumerate() {
        let f: Vec<ObjectiveVector> = front.iter().map(|&i| objs[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&f)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
}
