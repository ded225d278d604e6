//! Elitist NSGA-II with binary crowded-comparison tournaments.

use rand::Rng;

use super::sort::{assign_rank_and_crowding, crowding_distance, nondominated_fronts};
use super::{
    evaluate_all, extract_front, fallback_scale, initial_genomes, trace_record, vary, EAConfig, Individual,
    ObjectiveVector, Problem, RunResult,
};
use crate::error::Result;
use crate::rng::{self, StreamRng};

/// Lower rank wins, then larger crowding; ties keep the first draw.
fn tournament(pop: &[Individual], rng: &mut StreamRng) -> usize {
    let a = rng.random_range(0..pop.len());
    let mut b = rng.random_range(0..pop.len() - 1);
    if b >= a {
        b += 1;
    }
    let (x, y) = (&pop[a], &pop[b]);
    if y.rank < x.rank || (y.rank == x.rank && y.crowding > x.crowding) {
        b
    } else {
        a
    }
}

/// (mu + lambda) survivor selection: whole fronts first, the split front
/// truncated by descending crowding distance.
fn environmental_selection(combined: Vec<Individual>, n: usize) -> Vec<Individual> {
    let objs: Vec<ObjectiveVector> = combined.iter().map(Individual::objectives).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for front in nondominated_fronts(&objs) {
        if chosen.len() + front.len() <= n {
            chosen.extend_from_slice(&front);
            if chosen.len() == n {
                break;
            }
            continue;
        }
        let pts: Vec<ObjectiveVector> = front.iter().map(|&i| objs[i]).collect();
        let dist = crowding_distance(&pts);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        let need = n - chosen.len();
        chosen.extend(order[..need].iter().map(|&k| front[k]));
        break;
    }
    chosen.sort_unstable();
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    let mut next: Vec<Individual> = chosen.iter().map(|&i| slots[i].take().expect("unique")).collect();
    assign_rank_and_crowding(&mut next);
    next
}

/// Runs NSGA-II for `cfg.generations` generations of `cfg.population`
/// offspring each, and returns the final non-dominated set.
pub fn nsga2_run(problem: &dyn Problem, cfg: &EAConfig) -> Result<RunResult> {
    cfg.validate()?;
    let n = cfg.population;
    let genomes = initial_genomes(problem, n, cfg.seed)?;
    let mut pop = evaluate_all(problem, genomes, 0)?;
    let mut evaluations = pop.len();
    assign_rank_and_crowding(&mut pop);
    let scale = fallback_scale(&pop);
    let mut trace = vec![trace_record(problem, 0, &extract_front(&pop), scale)];

    for gen in 1..=cfg.generations {
        let mut offspring = Vec::with_capacity(n);
        for pair in 0..n / 2 {
            let mut rng = rng::stream(cfg.seed, "nsga2-mate", &[gen as u64, pair as u64]);
            let a = tournament(&pop, &mut rng);
            let b = tournament(&pop, &mut rng);
            let (c1, c2) = vary(problem, cfg, &pop[a].genome, &pop[b].genome, &mut rng)?;
            offspring.push(c1);
            offspring.push(c2);
        }
        let children = evaluate_all(problem, offspring, gen)?;
        evaluations += children.len();
        let mut combined = pop;
        combined.extend(children);
        pop = environmental_selection(combined, n);
        trace.push(trace_record(problem, gen, &extract_front(&pop), scale));
    }

    Ok(RunResult {
        front: extract_front(&pop),
        population: pop,
        trace,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::testing::{BitTradeoff, Schaffer};
    use crate::moea::Genome;

    #[test]
    fn schaffer_front_lies_in_pareto_set() {
        let res = nsga2_run(&Schaffer::new(), &EAConfig::default()).unwrap();
        assert!(res.front.len() > 10);
        for ind in &res.front {
            let x = ind.genome.as_continuous().unwrap()[0];
            assert!((-0.05..=2.05).contains(&x), "x = {x}");
        }
        assert_eq!(res.trace.len(), 51);
        assert_eq!(res.evaluations, 50 * 51);
    }

    #[test]
    fn zero_generations_returns_initial_front() {
        let cfg = EAConfig {
            generations: 0,
            ..EAConfig::default()
        };
        let p = Schaffer::new();
        let res = nsga2_run(&p, &cfg).unwrap();
        let init = initial_genomes(&p, 50, cfg.seed).unwrap();
        let pop = evaluate_all(&p, init, 0).unwrap();
        let expect = extract_front(&pop);
        let key = |v: &[Individual]| v.iter().map(|i| (i.genome.clone(), i.objectives)).collect::<Vec<_>>();
        assert_eq!(key(&res.front), key(&expect));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = EAConfig {
            generations: 10,
            seed: 17,
            ..EAConfig::default()
        };
        let a = nsga2_run(&Schaffer::new(), &cfg).unwrap();
        let b = nsga2_run(&Schaffer::new(), &cfg).unwrap();
        assert_eq!(a.front, b.front);
        let c = nsga2_run(&Schaffer::new(), &EAConfig { seed: 18, ..cfg }).unwrap();
        assert_ne!(a.front, c.front);
    }

    #[test]
    fn elitism_keeps_best_front_undominated() {
        let p = Schaffer::new();
        let cfg = EAConfig {
            generations: 1,
            seed: 3,
            ..EAConfig::default()
        };
        let mut prev = extract_front(&nsga2_run(&p, &EAConfig { generations: 0, ..cfg.clone() }).unwrap().population);
        for g in 1..15 {
            let res = nsga2_run(&p, &EAConfig { generations: g, ..cfg.clone() }).unwrap();
            for new in &res.front {
                for old in &prev {
                    assert!(!old.objectives().dominates(&new.objectives()));
                }
            }
            prev = res.front;
        }
    }

    #[test]
    fn binary_problem_runs() {
        let p = BitTradeoff { n: 40 };
        let res = nsga2_run(&p, &EAConfig::binary()).unwrap();
        assert!(res.front.len() >= 10);
        for ind in &res.front {
            assert!(matches!(ind.genome, Genome::Binary(ref m) if m.len() == 40));
        }
    }
}
