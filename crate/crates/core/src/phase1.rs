//! Global threshold pruning: evolve one interval `(th1, th2)` over all
//! prunable weights with NSGA-II.

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::front::{Decision, ParetoFront, Phase, Solution};
use crate::metrics::NormalizationSpec;
use crate::moea::{EAConfig, Engine, Genome, GenomeKind, ObjectiveVector, Problem, RunResult};
use crate::nn::Network;

/// Threshold-pair problem over a fixed base network.
///
/// Genomes are `[a, b]` inside `[w_min, w_max]`; the pair is sorted before
/// use so that any box point is a valid interval.
pub struct ThresholdProblem {
    base: Network,
    eval_set: LabeledSet,
    bounds: Vec<(f64, f64)>,
    baseline_nonzeros: usize,
}

pub fn make_phase1_problem(base: &Network, eval_set: &LabeledSet) -> Result<ThresholdProblem> {
    if eval_set.is_empty() {
        return Err(Error::InvalidSpec("phase-1 evaluation set is empty".into()));
    }
    let baseline_nonzeros = base.nonzero_count();
    let (lo, hi) = base
        .prunable_range()
        .ok_or_else(|| Error::InvalidSpec("network has no prunable layers".into()))?;
    if baseline_nonzeros == 0 || lo >= hi {
        return Err(Error::InvalidSpec(
            "base network has no usable prunable weights (untrained or fully pruned)".into(),
        ));
    }
    Ok(ThresholdProblem {
        base: base.clone(),
        eval_set: eval_set.clone(),
        bounds: vec![(lo, hi); 2],
        baseline_nonzeros,
    })
}

impl ThresholdProblem {
    pub fn base(&self) -> &Network {
        &self.base
    }

    pub fn baseline_nonzeros(&self) -> usize {
        self.baseline_nonzeros
    }

    /// `(w_min, w_max)` of the base network's prunable weights.
    pub fn weight_range(&self) -> (f64, f64) {
        self.bounds[0]
    }

    pub fn repair(genome: &[f64]) -> (f64, f64) {
        let (a, b) = (genome[0], genome[1]);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn evaluate_pair(&self, th1: f64, th2: f64, data: &LabeledSet) -> Result<ObjectiveVector> {
        let pruned = self.base.apply_threshold(th1, th2)?;
        Ok(ObjectiveVector::new(
            pruned.nonzero_count() as f64,
            1.0 - pruned.accuracy(data)?,
        ))
    }
}

impl Problem for ThresholdProblem {
    fn kind(&self) -> GenomeKind {
        GenomeKind::Continuous
    }

    fn genome_length(&self) -> usize {
        2
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn evaluate(&self, genome: &Genome) -> Result<ObjectiveVector> {
        let g = genome
            .as_continuous()
            .filter(|g| g.len() == 2)
            .ok_or_else(|| Error::Contract("threshold genome must be two reals".into()))?;
        let (th1, th2) = Self::repair(g);
        self.evaluate_pair(th1, th2, &self.eval_set)
    }

    fn f1_scale(&self) -> Option<f64> {
        Some(self.baseline_nonzeros as f64)
    }
}

/// Phase-1 output: the re-scored front plus the raw engine result.
#[derive(Debug, Clone)]
pub struct Phase1Outcome {
    pub front: ParetoFront,
    pub run: RunResult,
}

/// Evolves thresholds with `engine` (NSGA-II by default). `search_set`
/// drives evolution; every final solution is re-scored on `report_set` for
/// its `f2_val`.
pub fn run_phase1(
    base: &Network,
    search_set: &LabeledSet,
    report_set: &LabeledSet,
    cfg: &EAConfig,
    engine: Engine,
) -> Result<Phase1Outcome> {
    let problem = make_phase1_problem(base, search_set)?;
    let run = engine.run(&problem, cfg)?;
    let mut solutions = Vec::with_capacity(run.front.len());
    for ind in &run.front {
        let (th1, th2) = ThresholdProblem::repair(ind.genome.as_continuous().expect("continuous genome"));
        let search = ind.objectives();
        let report = problem.evaluate_pair(th1, th2, report_set)?;
        solutions.push(Solution {
            phase: Phase::Phase1,
            decision: Decision::Thresholds { th1, th2 },
            f1: search.f1,
            f2_opt: search.f2,
            f2_val: report.f2,
            generation: ind.born,
        });
    }
    Ok(Phase1Outcome {
        front: ParetoFront {
            seed: cfg.seed,
            norm: NormalizationSpec::new(problem.baseline_nonzeros() as f64),
            solutions,
        },
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_blobs;
    use crate::nn::{init_network, Tensor2};
    use rand_distr::{Distribution, Normal};

    fn setup() -> (Network, LabeledSet) {
        let data = generate_blobs(3, 4, 20, 1.0, 2).unwrap();
        (init_network(&[4, 12, 10, 3], 5).unwrap(), data)
    }

    #[test]
    fn repair_by_sort() {
        let (net, data) = setup();
        let p = make_phase1_problem(&net, &data).unwrap();
        let a = p.evaluate(&Genome::Continuous(vec![0.2, -0.1])).unwrap();
        let b = p.evaluate(&Genome::Continuous(vec![-0.1, 0.2])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_cover_and_empty_interval() {
        let (net, data) = setup();
        let p = make_phase1_problem(&net, &data).unwrap();
        let (lo, hi) = p.weight_range();
        let full = p.evaluate(&Genome::Continuous(vec![lo, hi])).unwrap();
        assert_eq!(full.f1, 0.0);
        let zeroed = net.apply_threshold(lo, hi).unwrap();
        assert_eq!(full.f2, 1.0 - zeroed.accuracy(&data).unwrap());

        let above = hi + 1.0;
        let p2 = ThresholdProblem {
            bounds: vec![(lo, above); 2],
            ..make_phase1_problem(&net, &data).unwrap()
        };
        let none = p2.evaluate(&Genome::Continuous(vec![hi + 0.5, above])).unwrap();
        assert_eq!(none.f1, net.nonzero_count() as f64);
        assert_eq!(none.f2, 1.0 - net.accuracy(&data).unwrap());
    }

    #[test]
    fn rejects_empty_eval_set() {
        let (net, data) = setup();
        assert!(matches!(
            make_phase1_problem(&net, &data.subset(&[])),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn widening_never_increases_f1() {
        let (net, data) = setup();
        let p = make_phase1_problem(&net, &data).unwrap();
        let f = |a: f64, b: f64| p.evaluate(&Genome::Continuous(vec![a, b])).unwrap().f1;
        for (a, b, c, d) in [(-0.1, 0.1, -0.2, 0.1), (0.0, 0.3, -0.5, 0.35), (-0.4, -0.3, -0.4, 0.0)] {
            assert!(f(c, d) <= f(a, b));
        }
    }

    #[test]
    fn centered_interval_prunes_densest_region() {
        // Symmetric unimodal weights: an interval of fixed width removes the
        // most weights when centred on zero.
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut rng = crate::rng::stream(1, "hist", &[]);
        let mut net = init_network(&[2, 40, 40, 2], 1).unwrap();
        let values: Vec<f64> = (0..1600).map(|_| normal.sample(&mut rng)).collect();
        net.layers_mut()[1].weights = Tensor2::new(40, 40, values).unwrap();
        let base = net.nonzero_count();
        let removed = |center: f64| base - net.apply_threshold(center - 0.02, center + 0.02).unwrap().nonzero_count();
        let at_zero = removed(0.0);
        for c in [0.05, -0.05, 0.1, 0.2] {
            assert!(at_zero > removed(c), "center {c}");
        }
    }

    #[test]
    fn front_is_recomputable_and_deduplicated() {
        let (net, data) = setup();
        let cfg = EAConfig {
            population: 20,
            generations: 5,
            seed: 4,
            ..EAConfig::default()
        };
        let out = run_phase1(&net, &data, &data, &cfg, Engine::Nsga2).unwrap();
        let objs: Vec<_> = out.front.solutions.iter().map(Solution::search_objectives).collect();
        for (i, s) in out.front.solutions.iter().enumerate() {
            let Decision::Thresholds { th1, th2 } = s.decision else { panic!() };
            assert!(th1 <= th2);
            assert_eq!(s.f1, net.apply_threshold(th1, th2).unwrap().nonzero_count() as f64);
            for (j, o) in objs.iter().enumerate() {
                if i != j {
                    assert!(!o.dominates(&objs[i]));
                    assert!(!o.same_as(&objs[i]));
                }
            }
        }
        assert_eq!(out.front.norm.f1_ref, net.nonzero_count() as f64);
    }
}
