//! Five-stage pipeline over an output directory:
//! train, phase1, phase2 (anchors included), report.
//!
//! Each stage reads only files written by earlier stages, so stages can be
//! rerun one at a time. Numeric artifacts depend on the config alone; the
//! manifest additionally records wall-clock times.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{generate_blobs, stratified_split, LabeledSet};
use crate::error::{Error, Result};
use crate::export::{self, read_json, write_json, FORMAT_VERSION};
use crate::front::{Decision, ParetoFront, Solution};
use crate::metrics::{dominance_report, merge_fronts, DominanceReport, NormalizationSpec};
use crate::moea::Engine;
use crate::nn::{init_network, load_checkpoint, save_checkpoint, train, Network};
use crate::phase1::run_phase1;
use crate::phase2::{run_phase2, select_anchors, Corridor};
use crate::plot::FrontPlot;

/// File names inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Layout {
        Layout { root: root.into() }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn data(&self, split: &str) -> PathBuf {
        self.data_dir().join(format!("{split}.csv"))
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint")
    }

    pub fn phase1(&self) -> PathBuf {
        self.root.join("phase1.csv")
    }

    pub fn phase1_trace(&self) -> PathBuf {
        self.root.join("phase1_trace.csv")
    }

    pub fn anchors(&self) -> PathBuf {
        self.root.join("anchors.json")
    }

    pub fn phase2(&self) -> PathBuf {
        self.root.join("phase2.csv")
    }

    pub fn phase2_masks(&self) -> PathBuf {
        self.root.join("phase2.masks")
    }

    pub fn phase2_trace(&self) -> PathBuf {
        self.root.join("phase2_trace.csv")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.json")
    }

    pub fn plot(&self) -> PathBuf {
        self.root.join("front.svg")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// Unix time in seconds when the stage started.
    pub started_at: u64,
    pub wall_clock_s: f64,
}

/// Run record: config snapshot, artifacts relative to the output directory
/// and per-stage timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub config: RunConfig,
    pub artifacts: BTreeMap<String, PathBuf>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    fn new(cfg: &RunConfig) -> RunManifest {
        RunManifest {
            format_version: FORMAT_VERSION,
            config: cfg.clone(),
            artifacts: BTreeMap::new(),
            stages: Vec::new(),
        }
    }

    /// Rejects entries whose file is missing under `root`.
    pub fn check_artifacts(&self, root: &Path) -> Result<()> {
        for (name, rel) in &self.artifacts {
            if !root.join(rel).exists() {
                return Err(Error::Contract(format!(
                    "manifest artifact `{name}` points at missing {}",
                    root.join(rel).display()
                )));
            }
        }
        Ok(())
    }
}

/// Adds `artifacts` and a timing record to the manifest in `layout`. The
/// config snapshot is replaced by the one this stage ran with.
fn record_stage(
    layout: &Layout,
    cfg: &RunConfig,
    stage: &str,
    started: (SystemTime, Instant),
    artifacts: &[(&str, PathBuf)],
) -> Result<()> {
    let path = layout.manifest();
    let mut manifest = match read_json::<RunManifest>(&path) {
        Ok(m) if m.format_version == FORMAT_VERSION => RunManifest {
            config: cfg.clone(),
            ..m
        },
        _ => RunManifest::new(cfg),
    };
    for (name, p) in artifacts {
        let rel = p.strip_prefix(&layout.root).unwrap_or(p).to_path_buf();
        manifest.artifacts.insert((*name).to_string(), rel);
    }
    manifest.stages.retain(|s| s.stage != stage);
    manifest.stages.push(StageRecord {
        stage: stage.to_string(),
        started_at: started.0.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        wall_clock_s: started.1.elapsed().as_secs_f64(),
    });
    manifest.check_artifacts(&layout.root)?;
    write_json(&path, &manifest)
}

fn now() -> (SystemTime, Instant) {
    (SystemTime::now(), Instant::now())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub checkpoint: PathBuf,
    pub val_accuracy: f64,
    pub nonzeros: usize,
}

/// Generates the blobs set, splits it, trains the baseline and saves it.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<TrainReport> {
    stage_train(cfg, &Layout::new(out)).map_err(|e| e.in_stage("train"))
}

fn stage_train(cfg: &RunConfig, layout: &Layout) -> Result<TrainReport> {
    let started = now();
    cfg.validate()?;
    let seeds = cfg.seeds();
    let d = &cfg.data;
    let data = generate_blobs(d.classes, d.dim, cfg.per_class(), d.spread, seeds.data)?;
    let split = stratified_split(&data, &cfg.split_spec())?;
    create_dir(&layout.data_dir())?;
    for (name, set) in [("train", &split.train), ("val", &split.val), ("opt", &split.opt), ("test", &split.test)] {
        set.write_csv(&layout.data(name))?;
    }

    let mut net = init_network(&cfg.network.widths, seeds.init)?;
    if cfg.network.first_layer_prunable {
        let first = net.layers()[0].name.clone();
        net.set_prunable(&first, true)?;
    }
    let net = train(&net, &split.train, &cfg.train_config())?;
    let val_accuracy = net.accuracy(&split.val)?;
    save_checkpoint(&net, &layout.checkpoint(), cfg.seed)?;
    log::info!(
        "baseline val accuracy {val_accuracy:.4}, {} nonzero prunable weights",
        net.nonzero_count()
    );
    record_stage(
        layout,
        cfg,
        "train",
        started,
        &[
            ("checkpoint", layout.checkpoint()),
            ("data", layout.data_dir()),
        ],
    )?;
    Ok(TrainReport {
        checkpoint: layout.checkpoint(),
        val_accuracy,
        nonzeros: net.nonzero_count(),
    })
}

/// Loads the checkpoint and checks it matches the configured widths.
fn load_baseline(cfg: &RunConfig, layout: &Layout) -> Result<Network> {
    let dir = layout.checkpoint();
    let (net, _) = load_checkpoint(&dir)?;
    if net.widths() != cfg.network.widths {
        return Err(Error::format(
            dir,
            format!(
                "checkpoint widths {:?} differ from configured {:?}",
                net.widths(),
                cfg.network.widths
            ),
        ));
    }
    Ok(net)
}

fn load_split(cfg: &RunConfig, layout: &Layout, name: &str) -> Result<LabeledSet> {
    let path = layout.data(name);
    let set = LabeledSet::read_csv(&path, Some(cfg.data.classes))?;
    if set.features().cols() != cfg.data.dim {
        return Err(Error::format(
            path,
            format!("{} feature columns, expected {}", set.features().cols(), cfg.data.dim),
        ));
    }
    Ok(set)
}

/// Phase 1 on the saved baseline; writes the front and its trace.
pub fn cmd_phase1(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    stage_phase1(cfg, &Layout::new(out)).map_err(|e| e.in_stage("phase1"))
}

fn stage_phase1(cfg: &RunConfig, layout: &Layout) -> Result<PathBuf> {
    let started = now();
    cfg.validate()?;
    let net = load_baseline(cfg, layout)?;
    let search = load_split(cfg, layout, cfg.phase1.search_subset.name())?;
    let val = load_split(cfg, layout, "val")?;
    let outcome = run_phase1(&net, &search, &val, &cfg.phase1_ea(), cfg.phase1.engine)?;
    export::write_phase1(&layout.phase1(), &outcome.front)?;
    export::write_trace(&layout.phase1_trace(), &outcome.run.trace)?;
    log::info!("phase 1 front: {} solutions", outcome.front.len());
    record_stage(
        layout,
        cfg,
        "phase1",
        started,
        &[("phase1", layout.phase1()), ("phase1_trace", layout.phase1_trace())],
    )?;
    Ok(layout.phase1())
}

/// One anchor as recorded in `anchors.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    /// Row index in the Phase-1 export.
    pub index: usize,
    pub f1: f64,
    pub f2_val: f64,
    pub th1: f64,
    pub th2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorFile {
    pub heavy: AnchorRecord,
    pub light: AnchorRecord,
    pub note: Option<String>,
    pub init_warnings: Vec<String>,
}

fn anchor_record(front: &ParetoFront, index: usize) -> Result<AnchorRecord> {
    let s: &Solution = &front.solutions[index];
    match s.decision {
        Decision::Thresholds { th1, th2 } => Ok(AnchorRecord {
            index,
            f1: s.f1,
            f2_val: s.f2_val,
            th1,
            th2,
        }),
        Decision::Mask(_) => Err(Error::Contract("anchor must be a Phase-1 solution".into())),
    }
}

fn check_reference(p1: &ParetoFront, net: &Network) -> Result<()> {
    p1.norm.check_same(&NormalizationSpec::new(net.nonzero_count() as f64))
}

/// Picks anchors from the Phase-1 export, builds the corridor and runs the
/// configured engine; writes anchors, front, masks and trace.
pub fn cmd_phase2(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    stage_phase2(cfg, &Layout::new(out)).map_err(|e| e.in_stage("phase2"))
}

fn stage_phase2(cfg: &RunConfig, layout: &Layout) -> Result<PathBuf> {
    let started = now();
    cfg.validate()?;
    let net = load_baseline(cfg, layout)?;
    let p1 = export::read_phase1(&layout.phase1())?;
    check_reference(&p1, &net)?;
    let search = load_split(cfg, layout, cfg.phase2.search_subset.name())?;
    let val = load_split(cfg, layout, "val")?;

    let choice = select_anchors(&p1, &cfg.anchors)?;
    let heavy = anchor_record(&p1, choice.heavy)?;
    let light = anchor_record(&p1, choice.light)?;
    let heavy_net = net.apply_threshold(heavy.th1, heavy.th2)?;
    let ea = cfg.phase2_ea();
    let corridor = Corridor::new(heavy_net, light.f1 as usize, cfg.phase2.bins, ea.population)?;
    let outcome = run_phase2(
        &corridor,
        &ea,
        &cfg.importance_config(),
        cfg.phase2.engine,
        &search,
        &val,
        p1.norm,
    )?;
    for w in &outcome.init.warnings {
        log::warn!("{w}");
    }
    write_json(
        &layout.anchors(),
        &AnchorFile {
            heavy,
            light,
            note: choice.note,
            init_warnings: outcome.init.warnings.clone(),
        },
    )?;
    export::write_phase2(&layout.phase2(), &layout.phase2_masks(), &outcome.front, outcome.engine)?;
    export::write_trace(&layout.phase2_trace(), &outcome.run.trace)?;
    log::info!("phase 2 ({}) front: {} solutions", outcome.engine, outcome.front.len());
    record_stage(
        layout,
        cfg,
        "phase2",
        started,
        &[
            ("anchors", layout.anchors()),
            ("phase2", layout.phase2()),
            ("phase2_masks", layout.phase2_masks()),
            ("phase2_trace", layout.phase2_trace()),
        ],
    )?;
    Ok(layout.phase2())
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub seed: u64,
    pub engine: Engine,
    pub heavy_index: usize,
    pub light_index: usize,
    #[serde(flatten)]
    pub report: DominanceReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub summary: PathBuf,
    pub plot: PathBuf,
}

/// Summary and plot from the exported fronts. Every number is recomputed
/// from the Phase-1 and Phase-2 files; `anchors.json` only supplies indices.
pub fn cmd_report(cfg: &RunConfig, out: &Path) -> Result<(Summary, ReportPaths)> {
    stage_report(cfg, &Layout::new(out)).map_err(|e| e.in_stage("report"))
}

fn stage_report(cfg: &RunConfig, layout: &Layout) -> Result<(Summary, ReportPaths)> {
    let started = now();
    let p1 = export::read_phase1(&layout.phase1())?;
    let (p2, engine) = export::read_phase2(&layout.phase2(), &layout.phase2_masks())?;
    p1.norm.check_same(&p2.norm)?;
    let anchors: AnchorFile = read_json(&layout.anchors())?;
    for a in [&anchors.heavy, &anchors.light] {
        if a.index >= p1.len() {
            return Err(Error::format(
                layout.anchors(),
                format!("anchor index {} outside a front of {}", a.index, p1.len()),
            ));
        }
    }
    let light = p1.solutions[anchors.light.index].objectives();
    let heavy = p1.solutions[anchors.heavy.index].objectives();
    let report = dominance_report(&p1, &p2, light, &p1.norm)?;
    let summary = Summary {
        format_version: FORMAT_VERSION,
        seed: cfg.seed,
        engine,
        heavy_index: anchors.heavy.index,
        light_index: anchors.light.index,
        report,
    };
    write_json(&layout.summary(), &summary)?;

    let merged = merge_fronts(&p1, &p2, &p1.norm)?;
    let plot = FrontPlot {
        title: format!("seed {}: phase 1, phase 2 ({engine}) and merged front", cfg.seed),
        phase1: p1.objectives(),
        phase2: p2.objectives(),
        merged: merged.objectives(),
        heavy: Some(heavy),
        light: Some(light),
    };
    let plot_path = layout.plot();
    fs::write(&plot_path, plot.to_svg()).map_err(|e| Error::io(&plot_path, e))?;
    record_stage(
        layout,
        cfg,
        "report",
        started,
        &[("summary", layout.summary()), ("plot", layout.plot())],
    )?;
    Ok((
        summary,
        ReportPaths {
            summary: layout.summary(),
            plot: plot_path,
        },
    ))
}

/// All stages in order under one master seed. Returns the manifest path.
pub fn cmd_pipeline(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    create_dir(out)?;
    cmd_train(cfg, out)?;
    cmd_phase1(cfg, out)?;
    cmd_phase2(cfg, out)?;
    cmd_report(cfg, out)?;
    Ok(Layout::new(out).manifest())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::EAConfig;

    fn small_config(seed: u64) -> RunConfig {
        let mut cfg = RunConfig {
            seed,
            ..RunConfig::default()
        };
        cfg.data.points = 400;
        cfg.network.widths = vec![8, 16, 16, 4];
        cfg.train.epochs = 15;
        cfg.phase1.ea = EAConfig {
            population: 20,
            generations: 4,
            ..EAConfig::default()
        };
        cfg.phase2.ea = EAConfig {
            population: 20,
            generations: 4,
            ..EAConfig::binary()
        };
        cfg
    }

    #[test]
    fn pipeline_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(3);
        let manifest_path = cmd_pipeline(&cfg, dir.path()).unwrap();
        let manifest: RunManifest = read_json(&manifest_path).unwrap();
        manifest.check_artifacts(dir.path()).unwrap();
        let names: Vec<&str> = manifest.stages.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(names, ["train", "phase1", "phase2", "report"]);
        for key in ["checkpoint", "phase1", "phase2", "phase2_masks", "summary", "plot", "anchors"] {
            assert!(manifest.artifacts.contains_key(key), "{key}");
        }
        assert_eq!(manifest.config, cfg);
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_phase1(&small_config(0), dir.path()).unwrap_err();
        assert!(err.to_string().starts_with("stage `phase1` failed"), "{err}");
        assert_eq!(err.class(), crate::ErrorClass::DataOrFormat);
    }

    #[test]
    fn width_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(1);
        cmd_train(&cfg, dir.path()).unwrap();
        let mut other = cfg.clone();
        other.network.widths = vec![8, 16, 8, 4];
        let err = cmd_phase1(&other, dir.path()).unwrap_err();
        assert_eq!(err.class(), crate::ErrorClass::DataOrFormat);
        assert!(err.to_string().contains("widths"), "{err}");
    }
}
