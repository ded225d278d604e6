//! MOEA/D with Tchebycheff aggregation.
//!
//! Offspring for all subproblems of a generation are bred from the population
//! as it stood at the start of that generation, evaluated together, and then
//! applied to the ideal point and neighbourhoods in subproblem order.

use rand::Rng;

use super::sort::assign_rank_and_crowding;
use super::{
    evaluate_all, extract_front, fallback_scale, initial_genomes, trace_record, vary, EAConfig, Genome, GenomeKind,
    Individual, ObjectiveVector, Problem, RunResult,
};
use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::rng;

/// `max_i weight_i * |f_i - ideal_i|`.
pub fn tchebycheff(weights: [f64; 2], f: &ObjectiveVector, ideal: &ObjectiveVector) -> f64 {
    (weights[0] * (f.f1 - ideal.f1).abs()).max(weights[1] * (f.f2 - ideal.f2).abs())
}

/// `n` evenly spaced weight vectors `(k/(n-1), 1 - k/(n-1))`.
pub fn weight_vectors(n: usize) -> Vec<[f64; 2]> {
    if n == 1 {
        return vec![[0.5, 0.5]];
    }
    (0..n)
        .map(|k| {
            let a = k as f64 / (n - 1) as f64;
            [a, 1.0 - a]
        })
        .collect()
}

fn neighbourhoods(weights: &[[f64; 2]], t: usize) -> Vec<Vec<usize>> {
    weights
        .iter()
        .map(|w| {
            let mut idx: Vec<usize> = (0..weights.len()).collect();
            let d = |j: usize| (weights[j][0] - w[0]).powi(2) + (weights[j][1] - w[1]).powi(2);
            idx.sort_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)));
            idx.truncate(t);
            idx
        })
        .collect()
}

/// Continuous stand-in for a binary problem: genes in [0, 1], a gene above
/// 0.5 keeps its bit.
struct ThresholdProxy<'a> {
    inner: &'a dyn Problem,
    bounds: Vec<(f64, f64)>,
}

impl ThresholdProxy<'_> {
    fn to_mask(v: &[f64]) -> BitMask {
        let bits: Vec<bool> = v.iter().map(|x| *x > 0.5).collect();
        BitMask::from_bools(&bits)
    }
}

impl Problem for ThresholdProxy<'_> {
    fn kind(&self) -> GenomeKind {
        GenomeKind::Continuous
    }

    fn genome_length(&self) -> usize {
        self.inner.genome_length()
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn evaluate(&self, genome: &Genome) -> Result<ObjectiveVector> {
        let v = genome
            .as_continuous()
            .ok_or_else(|| Error::Contract("proxy genome must be continuous".into()))?;
        self.inner.evaluate(&Genome::Binary(Self::to_mask(v)))
    }

    fn initial_population(&self, n: usize, seed: u64) -> Result<Option<Vec<Genome>>> {
        let Some(masks) = self.inner.initial_population(n, seed)? else {
            return Ok(None);
        };
        let mut out = Vec::with_capacity(masks.len());
        for (i, g) in masks.iter().enumerate() {
            let m = g
                .as_binary()
                .ok_or_else(|| Error::Contract("binary initializer produced a continuous genome".into()))?;
            let mut rng = rng::stream(seed, "proxy-init", &[i as u64]);
            let v = m
                .iter()
                .map(|b| {
                    let u: f64 = rng.random();
                    if b {
                        1.0 - 0.5 * u
                    } else {
                        0.5 * u
                    }
                })
                .collect();
            out.push(Genome::Continuous(v));
        }
        Ok(Some(out))
    }

    fn f1_scale(&self) -> Option<f64> {
        self.inner.f1_scale()
    }
}

fn update_archive(archive: &mut Vec<Individual>, new: &[Individual]) {
    archive.extend_from_slice(new);
    *archive = extract_front(archive);
}

/// Runs MOEA/D and returns the external archive of non-dominated solutions.
///
/// Objectives are scaled by [`Problem::f1_scale`] (f1 only) before
/// aggregation. For binary problems with `cfg.binary_proxy`, evolution runs
/// on real proxies and returned genomes are the thresholded masks.
pub fn moead_run(problem: &dyn Problem, cfg: &EAConfig) -> Result<RunResult> {
    cfg.validate()?;
    if cfg.moead_neighbors > cfg.population || cfg.moead_neighbors < 2 {
        return Err(Error::InvalidSpec(format!(
            "moead_neighbors must be in [2, population = {}], got {}",
            cfg.population, cfg.moead_neighbors
        )));
    }
    if problem.kind() == GenomeKind::Binary && cfg.binary_proxy {
        let proxy = ThresholdProxy {
            inner: problem,
            bounds: vec![(0.0, 1.0); problem.genome_length()],
        };
        let mut res = run(&proxy, cfg)?;
        let to_binary = |ind: &mut Individual| {
            if let Genome::Continuous(v) = &ind.genome {
                ind.genome = Genome::Binary(ThresholdProxy::to_mask(v));
            }
        };
        res.front.iter_mut().for_each(to_binary);
        res.population.iter_mut().for_each(to_binary);
        return Ok(res);
    }
    run(problem, cfg)
}

fn run(problem: &dyn Problem, cfg: &EAConfig) -> Result<RunResult> {
    let n = cfg.population;
    let weights = weight_vectors(n);
    let hoods = neighbourhoods(&weights, cfg.moead_neighbors);

    let genomes = initial_genomes(problem, n, cfg.seed)?;
    let mut pop = evaluate_all(problem, genomes, 0)?;
    let mut evaluations = n;
    let scale = problem.f1_scale().unwrap_or_else(|| fallback_scale(&pop));
    let scaled = |o: &ObjectiveVector| ObjectiveVector::new(o.f1 / scale, o.f2);

    let mut ideal = ObjectiveVector::new(f64::INFINITY, f64::INFINITY);
    for ind in &pop {
        let o = ind.objectives();
        ideal.f1 = ideal.f1.min(o.f1);
        ideal.f2 = ideal.f2.min(o.f2);
    }
    let mut archive = extract_front(&pop);
    let mut trace = vec![trace_record(problem, 0, &archive, scale)];

    for gen in 1..=cfg.generations {
        let mut offspring = Vec::with_capacity(n);
        for (k, hood) in hoods.iter().enumerate() {
            let mut rng = rng::stream(cfg.seed, "moead-mate", &[gen as u64, k as u64]);
            let local = rng.random::<f64>() < cfg.moead_mating_prob;
            let pool_len = if local { hood.len() } else { n };
            let pick = |i: usize| if local { hood[i] } else { i };
            let a = rng.random_range(0..pool_len);
            let mut b = rng.random_range(0..pool_len - 1);
            if b >= a {
                b += 1;
            }
            let (child, _) = vary(problem, cfg, &pop[pick(a)].genome, &pop[pick(b)].genome, &mut rng)?;
            offspring.push(child);
        }
        let children = evaluate_all(problem, offspring, gen)?;
        evaluations += children.len();

        for (k, child) in children.iter().enumerate() {
            let y = child.objectives();
            ideal.f1 = ideal.f1.min(y.f1);
            ideal.f2 = ideal.f2.min(y.f2);
            let z = scaled(&ideal);
            for &j in &hoods[k] {
                let current = tchebycheff(weights[j], &scaled(&pop[j].objectives()), &z);
                if tchebycheff(weights[j], &scaled(&y), &z) < current {
                    pop[j] = child.clone();
                }
            }
        }
        update_archive(&mut archive, &children);
        trace.push(trace_record(problem, gen, &archive, scale));
    }

    assign_rank_and_crowding(&mut pop);
    Ok(RunResult {
        front: archive,
        population: pop,
        trace,
        evaluations,
    })
}
