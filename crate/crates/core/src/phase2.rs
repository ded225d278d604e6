//! Importance-guided binary refinement between two Phase-1 anchors.
//!
//! The heavy anchor's nonzero prunable weights form the mask universe. An
//! initial population is spread over the nonzero-count corridor between the
//! anchors, each mask sampled from per-weight importance and then normalized
//! to its bin's target count, and a binary engine evolves from there.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::front::{Decision, ParetoFront, Phase, Solution};
use crate::mask::BitMask;
use crate::metrics::NormalizationSpec;
use crate::moea::{EAConfig, Engine, FlipBias, Genome, GenomeKind, ObjectiveVector, Problem, RunResult};
use crate::nn::{Layer, Network};
use crate::rng::{self, StreamRng};

/// How the two anchors are picked from a Phase-1 front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum AnchorRule {
    /// Heavy: most weights within `delta_acc` of the best error. Light: fewest
    /// weights within `delta_loss` of the best error.
    Tolerance { delta_acc: f64, delta_loss: f64 },
    /// Explicit front indices.
    Manual { heavy: usize, light: usize },
}

impl Default for AnchorRule {
    fn default() -> Self {
        AnchorRule::Tolerance {
            delta_acc: 0.01,
            delta_loss: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorChoice {
    pub heavy: usize,
    pub light: usize,
    /// Set when the light anchor had to fall back outside `delta_loss`.
    pub note: Option<String>,
}

fn front_listing(p1: &ParetoFront) -> String {
    let mut out = String::from("index  f1  f2_opt  f2_val  decision\n");
    for (i, s) in p1.solutions.iter().enumerate() {
        let d = match &s.decision {
            Decision::Thresholds { th1, th2 } => format!("[{th1}, {th2}]"),
            Decision::Mask(m) => format!("mask({} of {})", m.count_ones(), m.len()),
        };
        let _ = writeln!(out, "{i}  {}  {}  {}  {d}", s.f1, s.f2_opt, s.f2_val);
    }
    out
}

/// Picks `(heavy, light)` from `p1` using validation error. Ties prefer lower
/// error, then the lower index. If no lighter solution lies within
/// `delta_loss`, the nearest lighter solution is used and noted.
pub fn select_anchors(p1: &ParetoFront, rule: &AnchorRule) -> Result<AnchorChoice> {
    let fail = |reason: String| Error::AnchorSelection {
        reason,
        listing: front_listing(p1),
    };
    let sols = &p1.solutions;
    if sols.len() < 2 {
        return Err(fail(format!("need at least 2 solutions, front has {}", sols.len())));
    }
    match *rule {
        AnchorRule::Manual { heavy, light } => {
            if heavy >= sols.len() || light >= sols.len() {
                return Err(fail(format!("indices ({heavy}, {light}) out of range")));
            }
            if sols[heavy].f1 <= sols[light].f1 {
                return Err(fail(format!(
                    "heavy anchor {heavy} (f1 {}) must have more weights than light anchor {light} (f1 {})",
                    sols[heavy].f1, sols[light].f1
                )));
            }
            Ok(AnchorChoice {
                heavy,
                light,
                note: None,
            })
        }
        AnchorRule::Tolerance { delta_acc, delta_loss } => {
            if !(delta_acc >= 0.0 && delta_loss >= 0.0) {
                return Err(Error::Config("anchor tolerances must be >= 0".into()));
            }
            let best = sols.iter().map(|s| s.f2_val).fold(f64::INFINITY, f64::min);
            // Lexicographic preference: `better(a, b)` when `a` wins.
            let pick = |keep: &dyn Fn(&Solution) -> bool, better: &dyn Fn(&Solution, &Solution) -> bool| {
                let mut chosen: Option<usize> = None;
                for (i, s) in sols.iter().enumerate() {
                    if keep(s) && chosen.is_none_or(|c| better(s, &sols[c])) {
                        chosen = Some(i);
                    }
                }
                chosen
            };
            let heavy = pick(&|s| s.f2_val <= best + delta_acc, &|a, b| {
                a.f1 > b.f1 || (a.f1 == b.f1 && a.f2_val < b.f2_val)
            })
            .expect("the best solution qualifies");
            let n_h = sols[heavy].f1;
            let lighter_first = |a: &Solution, b: &Solution| a.f1 < b.f1 || (a.f1 == b.f1 && a.f2_val < b.f2_val);
            if let Some(light) = pick(&|s| s.f2_val <= best + delta_loss && s.f1 < n_h, &lighter_first) {
                return Ok(AnchorChoice {
                    heavy,
                    light,
                    note: None,
                });
            }
            let nearest = pick(&|s| s.f1 < n_h, &|a, b| {
                a.f1 > b.f1 || (a.f1 == b.f1 && a.f2_val < b.f2_val)
            })
            .ok_or_else(|| fail(format!("no solution lighter than the heavy anchor (f1 {n_h})")))?;
            let note = format!(
                "no lighter solution within {delta_loss} of the best error {best}; using nearest lighter solution {nearest}"
            );
            log::warn!("{note}");
            Ok(AnchorChoice {
                heavy,
                light: nearest,
                note: Some(note),
            })
        }
    }
}

/// `|w| / max|w|` over the nonzero weights of one layer, in row-major order.
pub fn layer_importance(layer: &Layer) -> Result<Vec<f64>> {
    let max = layer.weights.values().iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if max == 0.0 {
        return Err(Error::DegenerateLayer(format!("layer {} has no nonzero weights", layer.name)));
    }
    Ok(layer
        .weights
        .values()
        .iter()
        .filter(|w| **w != 0.0)
        .map(|w| w.abs() / max)
        .collect())
}

/// Importance scores for every prunable layer, keyed by layer name in
/// network order.
pub fn importance_scores(net: &Network) -> Result<Vec<(String, Vec<f64>)>> {
    net.prunable_layers()
        .map(|l| Ok((l.name.clone(), layer_importance(l)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceInitConfig {
    /// Layers whose sparsity is below this keep all their bits.
    pub sparsity_threshold: f64,
    /// Layers that keep all their bits; `None` means the first prunable layer.
    pub excluded_layers: Option<Vec<String>>,
    /// Default `[alpha, beta]` for the per-layer pruning scale.
    pub lambda_range: [f64; 2],
    /// Per-layer overrides of `lambda_range`.
    pub layer_lambda_ranges: BTreeMap<String, [f64; 2]>,
    /// Importance-weighted flip probabilities during mutation.
    pub importance_mutation: bool,
    pub seed: u64,
}

impl Default for ImportanceInitConfig {
    fn default() -> Self {
        ImportanceInitConfig {
            sparsity_threshold: 0.2,
            excluded_layers: None,
            lambda_range: [0.2, 0.6],
            layer_lambda_ranges: BTreeMap::new(),
            importance_mutation: false,
            seed: 0,
        }
    }
}

impl ImportanceInitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sparsity_threshold) {
            return Err(Error::Config(format!(
                "sparsity_threshold must be in [0, 1], got {}",
                self.sparsity_threshold
            )));
        }
        let ranges = std::iter::once(("default", &self.lambda_range))
            .chain(self.layer_lambda_ranges.iter().map(|(k, v)| (k.as_str(), v)));
        for (name, [a, b]) in ranges {
            if !(0.0 <= *a && a <= b && *b <= 1.0) {
                return Err(Error::Config(format!(
                    "lambda range for {name} must satisfy 0 <= alpha <= beta <= 1, got [{a}, {b}]"
                )));
            }
        }
        Ok(())
    }

    /// Names of excluded layers, resolving the default against `net`.
    pub fn excluded(&self, net: &Network) -> Vec<String> {
        match &self.excluded_layers {
            Some(v) => v.clone(),
            None => net.prunable_layers().take(1).map(|l| l.name.clone()).collect(),
        }
    }

    /// Copy with `excluded_layers` made explicit for `net`.
    pub fn resolved(&self, net: &Network) -> ImportanceInitConfig {
        ImportanceInitConfig {
            excluded_layers: Some(self.excluded(net)),
            ..self.clone()
        }
    }

    pub fn range_for(&self, layer: &str) -> [f64; 2] {
        self.layer_lambda_ranges.get(layer).copied().unwrap_or(self.lambda_range)
    }

    fn is_forced(&self, layer: &Layer) -> bool {
        let excluded = self.excluded_layers.as_deref().unwrap_or(&[]);
        excluded.contains(&layer.name) || layer.sparsity() < self.sparsity_threshold
    }
}

/// Pruning scale of one layer: 0 when the layer is excluded or its sparsity
/// is below the threshold, else uniform in the layer's `[alpha, beta]`.
/// `cfg.excluded_layers` is taken literally (`None` excludes nothing); use
/// [`ImportanceInitConfig::resolved`] for the default exclusion.
pub fn layer_lambda<R: Rng + ?Sized>(layer: &Layer, cfg: &ImportanceInitConfig, rng: &mut R) -> f64 {
    if cfg.is_forced(layer) {
        return 0.0;
    }
    let [a, b] = cfg.range_for(&layer.name);
    if a == b {
        a
    } else {
        rng.random_range(a..=b)
    }
}

/// One prunable layer's slice of the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSlice {
    pub name: String,
    pub bits: Range<usize>,
    pub sparsity: f64,
    /// Every bit of this layer stays 1 during initialization.
    pub forced: bool,
}

/// Bit layout and importance of a network's nonzero prunable weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskUniverse {
    pub layers: Vec<LayerSlice>,
    pub importance: Vec<f64>,
    /// Prunable layers with no nonzero weights; they contribute no bits.
    pub skipped: Vec<String>,
    /// Bit indices by ascending importance, ties by index.
    order: Vec<usize>,
}

impl MaskUniverse {
    /// Builds the universe for `net`; `cfg` must already be resolved.
    pub fn new(net: &Network, cfg: &ImportanceInitConfig) -> MaskUniverse {
        let mut layers = Vec::new();
        let mut importance = Vec::with_capacity(net.nonzero_count());
        let mut skipped = Vec::new();
        for l in net.prunable_layers() {
            match layer_importance(l) {
                Ok(s) => {
                    let start = importance.len();
                    importance.extend(s);
                    layers.push(LayerSlice {
                        name: l.name.clone(),
                        bits: start..importance.len(),
                        sparsity: l.sparsity(),
                        forced: cfg.is_forced(l),
                    });
                }
                Err(e) => {
                    log::warn!("{e}; skipping it");
                    skipped.push(l.name.clone());
                }
            }
        }
        let mut order: Vec<usize> = (0..importance.len()).collect();
        order.sort_by(|&a, &b| importance[a].total_cmp(&importance[b]).then(a.cmp(&b)));
        MaskUniverse {
            layers,
            importance,
            skipped,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.importance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.importance.is_empty()
    }

    pub fn forced_count(&self) -> usize {
        self.layers.iter().filter(|l| l.forced).map(|l| l.bits.len()).sum()
    }

    fn forced_bits(&self) -> Vec<bool> {
        let mut forced = vec![false; self.len()];
        for l in self.layers.iter().filter(|l| l.forced) {
            forced[l.bits.clone()].fill(true);
        }
        forced
    }

    /// Per-layer scales for one individual, aligned with `self.layers`.
    pub fn sample_lambdas<R: Rng + ?Sized>(&self, cfg: &ImportanceInitConfig, rng: &mut R) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| {
                if l.forced {
                    return 0.0;
                }
                let [a, b] = cfg.range_for(&l.name);
                if a == b {
                    a
                } else {
                    rng.random_range(a..=b)
                }
            })
            .collect()
    }

    /// Mask before normalization: bit `j` of layer `i` is kept with
    /// probability `1 - lambda_i * (1 - s_j)`.
    pub fn sample_mask<R: Rng + ?Sized>(&self, lambdas: &[f64], rng: &mut R) -> BitMask {
        let mut mask = BitMask::ones(self.len());
        for (l, &lambda) in self.layers.iter().zip(lambdas) {
            if lambda == 0.0 {
                continue;
            }
            for j in l.bits.clone() {
                if rng.random::<f64>() < lambda * (1.0 - self.importance[j]) {
                    mask.set(j, false);
                }
            }
        }
        mask
    }

    /// Brings `mask` to exactly `k` set bits: clears the least important
    /// unforced bits or sets the most important cleared ones. Returns a
    /// warning when forced bits alone exceed `k`.
    pub fn normalize(&self, mask: &mut BitMask, k: usize) -> Option<String> {
        let forced = self.forced_bits();
        let mut count = mask.count_ones();
        if count > k {
            for &j in &self.order {
                if count == k {
                    break;
                }
                if mask.get(j) && !forced[j] {
                    mask.set(j, false);
                    count -= 1;
                }
            }
        } else {
            for &j in self.order.iter().rev() {
                if count == k {
                    break;
                }
                if !mask.get(j) {
                    mask.set(j, true);
                    count += 1;
                }
            }
        }
        (count != k).then(|| format!("target of {k} weights is below the {count} forced weights; using {count}"))
    }
}

/// Nonzero-count interval between the anchors, split into equal-width bins.
#[derive(Debug, Clone)]
pub struct Corridor {
    pub heavy: Network,
    pub light_nonzeros: usize,
    pub heavy_nonzeros: usize,
    pub bins: usize,
    pub per_bin: usize,
}

impl Corridor {
    pub fn new(heavy: Network, light_nonzeros: usize, bins: usize, population: usize) -> Result<Corridor> {
        let heavy_nonzeros = heavy.nonzero_count();
        if light_nonzeros >= heavy_nonzeros {
            return Err(Error::Corridor(format!(
                "light anchor has {light_nonzeros} nonzero weights, heavy anchor {heavy_nonzeros}; need light < heavy"
            )));
        }
        if bins == 0 || !population.is_multiple_of(bins) {
            return Err(Error::Corridor(format!(
                "population {population} must be a positive multiple of the bin count {bins}"
            )));
        }
        Ok(Corridor {
            heavy,
            light_nonzeros,
            heavy_nonzeros,
            bins,
            per_bin: population / bins,
        })
    }

    pub fn population(&self) -> usize {
        self.bins * self.per_bin
    }

    /// Inclusive target-count range of bin `b`. Bins tile `[N_l, N_h]`
    /// without overlap when the corridor is at least `bins` wide.
    pub fn bin_range(&self, b: usize) -> (usize, usize) {
        let (lo, w, nb) = (self.light_nonzeros, self.heavy_nonzeros - self.light_nonzeros, self.bins);
        let start = lo + w * b / nb;
        let end = if b + 1 == nb { self.heavy_nonzeros } else { lo + w * (b + 1) / nb };
        let end = if b + 1 == nb { end } else { end.saturating_sub(1) };
        (start, end.max(start))
    }
}

/// Initial masks plus the targets they were normalized to.
#[derive(Debug, Clone)]
pub struct InitPopulation {
    pub masks: Vec<BitMask>,
    pub targets: Vec<usize>,
    pub bins: Vec<usize>,
    pub warnings: Vec<String>,
}

fn init_rng(seed: u64, i: usize) -> StreamRng {
    rng::stream(seed, "smart-init", &[i as u64])
}

/// Importance-guided initialization over the corridor. `cfg` must already be
/// resolved against the heavy network.
pub fn smart_init(corridor: &Corridor, cfg: &ImportanceInitConfig) -> Result<InitPopulation> {
    cfg.validate()?;
    if corridor.light_nonzeros >= corridor.heavy_nonzeros {
        return Err(Error::Corridor("light anchor must have fewer weights than heavy".into()));
    }
    let universe = MaskUniverse::new(&corridor.heavy, cfg);
    let built: Vec<(BitMask, usize, usize, Option<String>)> = (0..corridor.population())
        .into_par_iter()
        .map(|i| {
            let bin = i / corridor.per_bin;
            let (lo, hi) = corridor.bin_range(bin);
            let mut rng = init_rng(cfg.seed, i);
            let k = rng.random_range(lo..=hi);
            let lambdas = universe.sample_lambdas(cfg, &mut rng);
            let mut mask = universe.sample_mask(&lambdas, &mut rng);
            let warning = universe.normalize(&mut mask, k);
            (mask, k, bin, warning)
        })
        .collect();
    let mut out = InitPopulation {
        masks: Vec::with_capacity(built.len()),
        targets: Vec::with_capacity(built.len()),
        bins: Vec::with_capacity(built.len()),
        warnings: Vec::new(),
    };
    for (mask, k, bin, warning) in built {
        if let Some(w) = warning {
            log::warn!("{w}");
            out.warnings.push(w);
        }
        out.masks.push(mask);
        out.targets.push(k);
        out.bins.push(bin);
    }
    Ok(out)
}

/// Binary mask problem over the heavy anchor.
pub struct MaskProblem {
    heavy: Network,
    eval_set: LabeledSet,
    length: usize,
    f1_scale: f64,
    seeds: Option<Vec<Genome>>,
    bias: Option<FlipBias>,
}

pub fn make_phase2_problem(heavy: &Network, eval_set: &LabeledSet) -> Result<MaskProblem> {
    if eval_set.is_empty() {
        return Err(Error::InvalidSpec("phase-2 evaluation set is empty".into()));
    }
    let length = heavy.nonzero_count();
    Ok(MaskProblem {
        heavy: heavy.clone(),
        eval_set: eval_set.clone(),
        length,
        f1_scale: length.max(1) as f64,
        seeds: None,
        bias: None,
    })
}

impl MaskProblem {
    pub fn heavy(&self) -> &Network {
        &self.heavy
    }

    /// Aggregation scale for f1 (defaults to the heavy anchor's count).
    pub fn with_f1_scale(mut self, scale: f64) -> Self {
        self.f1_scale = scale;
        self
    }

    pub fn with_initial_population(mut self, masks: &[BitMask]) -> Self {
        self.seeds = Some(masks.iter().cloned().map(Genome::Binary).collect());
        self
    }

    pub fn with_flip_bias(mut self, bias: FlipBias) -> Self {
        self.bias = Some(bias);
        self
    }

    pub fn evaluate_mask(&self, mask: &BitMask, data: &LabeledSet) -> Result<ObjectiveVector> {
        let pruned = self.heavy.apply_mask(mask)?;
        Ok(ObjectiveVector::new(
            pruned.nonzero_count() as f64,
            1.0 - pruned.accuracy(data)?,
        ))
    }
}

impl Problem for MaskProblem {
    fn kind(&self) -> GenomeKind {
        GenomeKind::Binary
    }

    fn genome_length(&self) -> usize {
        self.length
    }

    fn evaluate(&self, genome: &Genome) -> Result<ObjectiveVector> {
        let mask = genome
            .as_binary()
            .ok_or_else(|| Error::Contract("mask genome must be binary".into()))?;
        self.evaluate_mask(mask, &self.eval_set)
    }

    fn initial_population(&self, _n: usize, _seed: u64) -> Result<Option<Vec<Genome>>> {
        Ok(self.seeds.clone())
    }

    fn f1_scale(&self) -> Option<f64> {
        Some(self.f1_scale)
    }

    fn flip_bias(&self) -> Option<&FlipBias> {
        self.bias.as_ref()
    }
}

#[derive(Debug, Clone)]
pub struct Phase2Outcome {
    pub front: ParetoFront,
    pub run: RunResult,
    pub init: InitPopulation,
    pub engine: Engine,
}

/// Evolves masks over `corridor.heavy` with `engine`. `search_set` drives
/// evolution and every final mask is re-scored on `report_set`. The returned
/// front carries `norm` so it can be merged with Phase 1.
pub fn run_phase2(
    corridor: &Corridor,
    cfg: &EAConfig,
    icfg: &ImportanceInitConfig,
    engine: Engine,
    search_set: &LabeledSet,
    report_set: &LabeledSet,
    norm: NormalizationSpec,
) -> Result<Phase2Outcome> {
    if corridor.population() != cfg.population {
        return Err(Error::Corridor(format!(
            "corridor holds {} individuals, engine population is {}",
            corridor.population(),
            cfg.population
        )));
    }
    let icfg = icfg.resolved(&corridor.heavy);
    let init = smart_init(corridor, &icfg)?;
    let mut problem = make_phase2_problem(&corridor.heavy, search_set)?
        .with_f1_scale(norm.f1_ref)
        .with_initial_population(&init.masks);
    if icfg.importance_mutation {
        let universe = MaskUniverse::new(&corridor.heavy, &icfg);
        problem = problem.with_flip_bias(FlipBias::from_importance(&universe.importance));
    }
    let run = engine.run(&problem, cfg)?;
    let solutions = run
        .front
        .par_iter()
        .map(|ind| {
            let mask = ind.genome.as_binary().expect("binary genome").clone();
            let search = ind.objectives();
            let report = problem.evaluate_mask(&mask, report_set)?;
            Ok(Solution {
                phase: Phase::Phase2,
                decision: Decision::Mask(mask),
                f1: search.f1,
                f2_opt: search.f2,
                f2_val: report.f2,
                generation: ind.born,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Phase2Outcome {
        front: ParetoFront {
            seed: cfg.seed,
            norm,
            solutions,
        },
        run,
        init,
        engine,
    })
}
