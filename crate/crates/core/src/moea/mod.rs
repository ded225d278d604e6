//! Generic bi-objective evolutionary engine: NSGA-II and MOEA/D over a
//! [`Problem`], with real-coded and binary variation operators.

mod moead;
mod nsga2;
pub mod operators;
mod sort;

pub use moead::{moead_run, tchebycheff, weight_vectors};
pub use nsga2::nsga2_run;
pub use operators::{
    biased_bitflip_mutation, bitflip_mutation, lhs_sample, polynomial_mutation, sbx_crossover, uniform_crossover,
    FlipBias,
};
pub use sort::{crowding_distance, fast_nondominated_sort, nondominated_fronts};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::metrics::{hypervolume2, NormalizationSpec};
use crate::rng::{self, StreamRng};

/// `(f1, f2)`, both minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveVector {
    pub f1: f64,
    pub f2: f64,
}

impl ObjectiveVector {
    pub fn new(f1: f64, f2: f64) -> Self {
        ObjectiveVector { f1, f2 }
    }

    pub fn get(&self, m: usize) -> f64 {
        match m {
            0 => self.f1,
            1 => self.f2,
            _ => panic!("objective index {m} out of range"),
        }
    }

    /// No worse in both objectives and strictly better in at least one.
    pub fn dominates(&self, other: &ObjectiveVector) -> bool {
        self.f1 <= other.f1 && self.f2 <= other.f2 && (self.f1 < other.f1 || self.f2 < other.f2)
    }

    /// Bitwise equality, used for objective-space duplicate removal.
    pub fn same_as(&self, other: &ObjectiveVector) -> bool {
        self.f1.to_bits() == other.f1.to_bits() && self.f2.to_bits() == other.f2.to_bits()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenomeKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Genome {
    Continuous(Vec<f64>),
    Binary(BitMask),
}

impl Genome {
    pub fn kind(&self) -> GenomeKind {
        match self {
            Genome::Continuous(_) => GenomeKind::Continuous,
            Genome::Binary(_) => GenomeKind::Binary,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Genome::Continuous(v) => v.len(),
            Genome::Binary(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Genome::Continuous(v) => Some(v),
            Genome::Binary(_) => None,
        }
    }

    pub fn as_binary(&self) -> Option<&BitMask> {
        match self {
            Genome::Binary(m) => Some(m),
            Genome::Continuous(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub objectives: Option<ObjectiveVector>,
    pub rank: usize,
    pub crowding: f64,
    /// Generation in which the individual was created (0 = initial population).
    pub born: usize,
}

impl Individual {
    pub fn unevaluated(genome: Genome) -> Self {
        Individual {
            genome,
            objectives: None,
            rank: 0,
            crowding: 0.0,
            born: 0,
        }
    }

    pub fn objectives(&self) -> ObjectiveVector {
        self.objectives.expect("individual evaluated")
    }
}

/// Optimization problem over a fixed genome shape.
///
/// `evaluate` must be deterministic: the engines evaluate in parallel and rely
/// on results being independent of scheduling.
pub trait Problem: Sync {
    fn kind(&self) -> GenomeKind;

    fn genome_length(&self) -> usize;

    /// Per-gene `[lo, hi]`; empty for binary problems.
    fn bounds(&self) -> &[(f64, f64)] {
        &[]
    }

    fn evaluate(&self, genome: &Genome) -> Result<ObjectiveVector>;

    /// Optional population-seeding hook; `None` falls back to LHS (continuous)
    /// or uniform random bits (binary).
    fn initial_population(&self, _n: usize, _seed: u64) -> Result<Option<Vec<Genome>>> {
        Ok(None)
    }

    /// Scale for `f1` used by Tchebycheff aggregation and trace hypervolume.
    fn f1_scale(&self) -> Option<f64> {
        None
    }

    /// Importance-biased flip weights for binary mutation, when enabled.
    fn flip_bias(&self) -> Option<&FlipBias> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EAConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub sbx_eta: f64,
    pub poly_eta: f64,
    pub moead_neighbors: usize,
    pub moead_mating_prob: f64,
    pub seed: u64,
    /// MOEA/D on binary problems: evolve real proxies in [0, 1] and threshold
    /// them at 0.5 instead of varying bits directly.
    pub binary_proxy: bool,
    /// How `mutation_prob` is applied to a child.
    pub mutation_scope: MutationScope,
}

/// Reading of `mutation_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationScope {
    /// Every gene mutates independently with probability `mutation_prob`.
    #[default]
    PerGene,
    /// A child is mutated with probability `mutation_prob`; a mutated child
    /// changes each gene with probability `min(0.5, 1 / length)`.
    PerIndividual,
}

impl MutationScope {
    /// Per-gene rate for one child: `None` leaves the child unchanged.
    pub fn gene_rate<R: Rng + ?Sized>(self, prob: f64, length: usize, rng: &mut R) -> Option<f64> {
        match self {
            MutationScope::PerGene => Some(prob),
            MutationScope::PerIndividual => {
                (rng.random::<f64>() < prob).then(|| (1.0 / length.max(1) as f64).min(0.5))
            }
        }
    }
}

impl Default for EAConfig {
    /// Real-coded defaults: SBX (0.9, 15), polynomial (0.2, 20), 50 / 50.
    fn default() -> Self {
        EAConfig {
            population: 50,
            generations: 50,
            crossover_prob: 0.9,
            mutation_prob: 0.2,
            sbx_eta: 15.0,
            poly_eta: 20.0,
            moead_neighbors: 15,
            moead_mating_prob: 0.9,
            seed: 0,
            binary_proxy: false,
            mutation_scope: MutationScope::PerGene,
        }
    }
}

impl EAConfig {
    /// Binary defaults: uniform crossover 0.9, bit-flip 0.05, 50 / 50.
    pub fn binary() -> Self {
        EAConfig {
            mutation_prob: 0.05,
            ..EAConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!(
                "population must be even and >= 4, got {}",
                self.population
            )));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
            ("moead_mating_prob", self.moead_mating_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidSpec(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !(self.sbx_eta >= 0.0 && self.poly_eta >= 0.0) {
            return Err(Error::InvalidSpec("distribution indices must be >= 0".into()));
        }
        Ok(())
    }
}

/// One row of the per-generation trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub generation: usize,
    pub best_f1: f64,
    pub best_f2: f64,
    pub hypervolume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Nsga2,
    Moead,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Nsga2 => "nsga2",
            Engine::Moead => "moead",
        }
    }

    pub fn run(self, problem: &dyn Problem, cfg: &EAConfig) -> Result<RunResult> {
        match self {
            Engine::Nsga2 => nsga2_run(problem, cfg),
            Engine::Moead => moead_run(problem, cfg),
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Engine> {
        match s {
            "nsga2" => Ok(Engine::Nsga2),
            "moead" => Ok(Engine::Moead),
            other => Err(Error::Config(format!("unknown engine {other:?} (expected nsga2 or moead)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Non-dominated, objective-deduplicated final solutions.
    pub front: Vec<Individual>,
    /// Final population (NSGA-II) or subproblem incumbents (MOEA/D).
    pub population: Vec<Individual>,
    pub trace: Vec<TraceRecord>,
    pub evaluations: usize,
}

pub(crate) fn evaluate_all(problem: &dyn Problem, genomes: Vec<Genome>, born: usize) -> Result<Vec<Individual>> {
    let objs: Vec<ObjectiveVector> = genomes
        .par_iter()
        .map(|g| problem.evaluate(g))
        .collect::<Result<Vec<_>>>()?;
    Ok(genomes
        .into_iter()
        .zip(objs)
        .map(|(genome, o)| Individual {
            genome,
            objectives: Some(o),
            rank: 0,
            crowding: 0.0,
            born,
        })
        .collect())
}

pub(crate) fn initial_genomes(problem: &dyn Problem, n: usize, seed: u64) -> Result<Vec<Genome>> {
    if let Some(pop) = problem.initial_population(n, seed)? {
        if pop.len() != n {
            return Err(Error::Contract(format!(
                "initializer produced {} genomes, expected {n}",
                pop.len()
            )));
        }
        if let Some(g) = pop.iter().find(|g| g.kind() != problem.kind() || g.len() != problem.genome_length()) {
            return Err(Error::Contract(format!("initializer produced a {:?} genome of length {}", g.kind(), g.len())));
        }
        return Ok(pop);
    }
    let mut rng = rng::stream(seed, "init-pop", &[]);
    Ok(match problem.kind() {
        GenomeKind::Continuous => lhs_sample(n, problem.bounds(), &mut rng)
            .into_iter()
            .map(Genome::Continuous)
            .collect(),
        GenomeKind::Binary => (0..n)
            .map(|_| {
                let bits: Vec<bool> = (0..problem.genome_length()).map(|_| rng.random()).collect();
                Genome::Binary(BitMask::from_bools(&bits))
            })
            .collect(),
    })
}

/// Crossover followed by mutation of both children, for either genome kind.
pub(crate) fn vary(
    problem: &dyn Problem,
    cfg: &EAConfig,
    a: &Genome,
    b: &Genome,
    rng: &mut StreamRng,
) -> Result<(Genome, Genome)> {
    match (a, b) {
        (Genome::Continuous(x), Genome::Continuous(y)) => {
            let bounds = problem.bounds();
            let (c1, c2) = sbx_crossover(x, y, bounds, cfg.sbx_eta, cfg.crossover_prob, rng);
            let mut mutate = |c: Vec<f64>| match cfg.mutation_scope.gene_rate(cfg.mutation_prob, c.len(), rng) {
                Some(rate) => polynomial_mutation(&c, bounds, cfg.poly_eta, rate, rng),
                None => c,
            };
            let m1 = mutate(c1);
            let m2 = mutate(c2);
            Ok((Genome::Continuous(m1), Genome::Continuous(m2)))
        }
        (Genome::Binary(x), Genome::Binary(y)) => {
            let (c1, c2) = uniform_crossover(x, y, cfg.crossover_prob, rng)?;
            let mut mutate = |c: BitMask| match cfg.mutation_scope.gene_rate(cfg.mutation_prob, c.len(), rng) {
                Some(rate) => match problem.flip_bias() {
                    Some(bias) => biased_bitflip_mutation(&c, rate, bias, rng),
                    None => bitflip_mutation(&c, rate, rng),
                },
                None => c,
            };
            let m1 = mutate(c1);
            let m2 = mutate(c2);
            Ok((Genome::Binary(m1), Genome::Binary(m2)))
        }
        _ => Err(Error::Contract("parents have different genome kinds".into())),
    }
}

/// Non-dominated members with objective duplicates removed (first kept).
pub(crate) fn extract_front(pop: &[Individual]) -> Vec<Individual> {
    let objs: Vec<ObjectiveVector> = pop.iter().map(Individual::objectives).collect();
    let mut out: Vec<Individual> = Vec::new();
    for &i in nondominated_fronts(&objs).first().map(Vec::as_slice).unwrap_or(&[]) {
        if !out.iter().any(|o| o.objectives().same_as(&objs[i])) {
            out.push(pop[i].clone());
        }
    }
    out.sort_by(|a, b| {
        let (x, y) = (a.objectives(), b.objectives());
        x.f1.total_cmp(&y.f1).then(x.f2.total_cmp(&y.f2))
    });
    out
}

pub(crate) fn trace_record(problem: &dyn Problem, generation: usize, front: &[Individual], scale: f64) -> TraceRecord {
    let objs: Vec<ObjectiveVector> = front.iter().map(Individual::objectives).collect();
    let best_f1 = objs.iter().map(|o| o.f1).fold(f64::INFINITY, f64::min);
    let best_f2 = objs.iter().map(|o| o.f2).fold(f64::INFINITY, f64::min);
    let norm = NormalizationSpec::new(problem.f1_scale().unwrap_or(scale));
    TraceRecord {
        generation,
        best_f1,
        best_f2,
        hypervolume: hypervolume2(&objs, &norm).value,
    }
}

/// Fallback f1 scale for problems without one: the largest initial f1.
pub(crate) fn fallback_scale(pop: &[Individual]) -> f64 {
    let m = pop.iter().map(|i| i.objectives().f1.abs()).fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}
