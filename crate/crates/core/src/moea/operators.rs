//! Sampling and variation operators for real-coded and binary genomes.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::BitMask;

/// Latin hypercube sample: per dimension, exactly one point per equal-width
/// stratum.
pub fn lhs_sample<R: Rng + ?Sized>(n: usize, bounds: &[(f64, f64)], rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; bounds.len()]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        strata.shuffle(rng);
        for (i, p) in points.iter_mut().enumerate() {
            let u: f64 = rng.random();
            let v = lo + (strata[i] as f64 + u) / n as f64 * (hi - lo);
            p[d] = v.clamp(lo, hi);
        }
    }
    points
}

/// SBX on a single gene pair for a given uniform draw `u`; `u = 0.5` gives
/// spread factor 1 and returns the parents unchanged.
pub fn sbx_pair(p1: f64, p2: f64, u: f64, eta: f64) -> (f64, f64) {
    let beta = if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
    };
    (
        0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2),
        0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2),
    )
}

/// Simulated binary crossover. With probability `prob` the pair recombines;
/// each gene then takes part with chance 1/2. Children are clipped to bounds.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    bounds: &[(f64, f64)],
    eta: f64,
    prob: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(p1.len(), p2.len());
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if rng.random::<f64>() >= prob {
        return (c1, c2);
    }
    for i in 0..p1.len() {
        if rng.random::<f64>() >= 0.5 || (p1[i] - p2[i]).abs() <= 1e-14 {
            continue;
        }
        let u: f64 = rng.random();
        let (a, b) = sbx_pair(p1[i], p2[i], u, eta);
        let (lo, hi) = bounds[i];
        c1[i] = a.clamp(lo, hi);
        c2[i] = b.clamp(lo, hi);
    }
    (c1, c2)
}

/// Bounded polynomial mutation for one gene with a given uniform draw `u`.
pub fn polynomial_gene(y: f64, lo: f64, hi: f64, u: f64, eta: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let d1 = (y - lo) / span;
    let d2 = (hi - y) / span;
    let pow = 1.0 / (eta + 1.0);
    let dq = if u < 0.5 {
        let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
        val.powf(pow) - 1.0
    } else {
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
        1.0 - val.powf(pow)
    };
    (y + dq * span).clamp(lo, hi)
}

/// Polynomial mutation: each gene mutates independently with probability `prob`.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    g: &[f64],
    bounds: &[(f64, f64)],
    eta: f64,
    prob: f64,
    rng: &mut R,
) -> Vec<f64> {
    g.iter()
        .zip(bounds)
        .map(|(&y, &(lo, hi))| {
            if rng.random::<f64>() < prob {
                let u: f64 = rng.random();
                polynomial_gene(y, lo, hi, u, eta)
            } else {
                y
            }
        })
        .collect()
}

/// Uniform crossover: with probability `prob` every position is swapped
/// between the children with chance 1/2; otherwise the children are copies.
pub fn uniform_crossover<R: Rng + ?Sized>(
    p1: &BitMask,
    p2: &BitMask,
    prob: f64,
    rng: &mut R,
) -> Result<(BitMask, BitMask)> {
    if p1.len() != p2.len() {
        return Err(Error::Shape(format!("parent masks differ in length: {} vs {}", p1.len(), p2.len())));
    }
    if rng.random::<f64>() >= prob {
        return Ok((p1.clone(), p2.clone()));
    }
    let (a, b) = (p1.words(), p2.words());
    let mut w1 = Vec::with_capacity(a.len());
    let mut w2 = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        let swap: u64 = rng.random();
        w1.push((x & !swap) | (y & swap));
        w2.push((y & !swap) | (x & swap));
    }
    Ok((BitMask::from_words(w1, p1.len()), BitMask::from_words(w2, p1.len())))
}

/// Flips each bit independently with probability `prob`.
pub fn bitflip_mutation<R: Rng + ?Sized>(g: &BitMask, prob: f64, rng: &mut R) -> BitMask {
    let mut out = g.clone();
    if prob <= 0.0 {
        return out;
    }
    for j in 0..g.len() {
        if rng.random::<f64>() < prob {
            out.flip(j);
        }
    }
    out
}

/// Per-bit flip weights for importance-biased mutation. A set bit `j` flips
/// with probability `prob * drop[j]`, a cleared bit with `prob * restore[j]`
/// (both capped at 1).
#[derive(Debug, Clone, PartialEq)]
pub struct FlipBias {
    pub drop: Vec<f64>,
    pub restore: Vec<f64>,
}

impl FlipBias {
    /// Weights from importance scores in [0, 1]: unimportant set bits are
    /// dropped more often, important cleared bits restored more often. Each
    /// weight vector has mean 1.
    pub fn from_importance(scores: &[f64]) -> FlipBias {
        let normalize = |raw: Vec<f64>| {
            let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
            if mean > 0.0 {
                raw.into_iter().map(|v| v / mean).collect()
            } else {
                vec![1.0; raw.len()]
            }
        };
        FlipBias {
            drop: normalize(scores.iter().map(|s| 1.0 - s).collect()),
            restore: normalize(scores.to_vec()),
        }
    }
}

pub fn biased_bitflip_mutation<R: Rng + ?Sized>(g: &BitMask, prob: f64, bias: &FlipBias, rng: &mut R) -> BitMask {
    let mut out = g.clone();
    for j in 0..g.len() {
        let w = if g.get(j) { bias.drop[j] } else { bias.restore[j] };
        if rng.random::<f64>() < (prob * w).min(1.0) {
            out.flip(j);
        }
    }
    out
}
