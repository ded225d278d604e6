//! Delimited-text exports of Pareto fronts, traces and JSON records.
//!
//! Front files start with a tag line such as
//! `# evoprune-phase1 v1 f1_ref=20352 seed=7` followed by a CSV table. Phase-2
//! masks live in a sidecar with one run-length-encoded mask per data row.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::{Decision, ParetoFront, Phase, Solution};
use crate::mask::BitMask;
use crate::metrics::NormalizationSpec;
use crate::moea::{Engine, TraceRecord};

pub const FORMAT_VERSION: u32 = 1;
const P1_TAG: &str = "evoprune-phase1";
const P2_TAG: &str = "evoprune-phase2";
const MASK_TAG: &str = "evoprune-masks";

#[derive(Debug, Serialize, Deserialize)]
struct P1Row {
    th1: f64,
    th2: f64,
    f1_raw: f64,
    f2_opt: f64,
    f2_val: f64,
    seed: u64,
    generation: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct P2Row {
    f1: f64,
    f2_opt: f64,
    f2_val: f64,
    popcount: usize,
    pruned_pct: f64,
    engine: Engine,
    seed: u64,
    generation: usize,
}

fn tag_line(tag: &str, meta: &[(&str, String)]) -> String {
    let mut line = format!("# {tag} v{FORMAT_VERSION}");
    for (k, v) in meta {
        line.push_str(&format!(" {k}={v}"));
    }
    line.push('\n');
    line
}

/// Splits a tagged file into its `key=value` metadata and the remaining body.
fn parse_tagged<'a>(path: &Path, text: &'a str, tag: &str) -> Result<(BTreeMap<String, String>, &'a str)> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let mut parts = first.trim_end().split(' ');
    if parts.next() != Some("#") || parts.next() != Some(tag) {
        return Err(Error::format(path, format!("missing `# {tag}` header line")));
    }
    let version = parts.next().unwrap_or("");
    if version != format!("v{FORMAT_VERSION}") {
        return Err(Error::format(
            path,
            format!("unsupported format version `{version}` (expected v{FORMAT_VERSION})"),
        ));
    }
    let mut meta = BTreeMap::new();
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("malformed header field `{kv}`")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    Ok((meta, body))
}

fn meta_value<T: std::str::FromStr>(path: &Path, meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format(path, format!("header field `{key}` missing or invalid")))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_table<R: Serialize>(path: &Path, head: String, rows: &[R], columns: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(head.into_bytes());
    if rows.is_empty() {
        w.write_record(columns).map_err(|e| Error::format(path, e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_table<R: DeserializeOwned>(path: &Path, body: &str) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.deserialize()
        .enumerate()
        .map(|(i, rec)| rec.map_err(|e| Error::format(path, format!("row {}: {e}", i + 1))))
        .collect()
}

pub fn write_phase1(path: &Path, front: &ParetoFront) -> Result<()> {
    let mut rows = Vec::with_capacity(front.len());
    for s in &front.solutions {
        let Decision::Thresholds { th1, th2 } = s.decision else {
            return Err(Error::Contract("phase-1 export needs threshold decisions".into()));
        };
        rows.push(P1Row {
            th1,
            th2,
            f1_raw: s.f1,
            f2_opt: s.f2_opt,
            f2_val: s.f2_val,
            seed: front.seed,
            generation: s.generation,
        });
    }
    let head = tag_line(
        P1_TAG,
        &[("f1_ref", front.norm.f1_ref.to_string()), ("seed", front.seed.to_string())],
    );
    write_table(
        path,
        head,
        &rows,
        &["th1", "th2", "f1_raw", "f2_opt", "f2_val", "seed", "generation"],
    )
}

pub fn read_phase1(path: &Path) -> Result<ParetoFront> {
    let text = read_text(path)?;
    let (meta, body) = parse_tagged(path, &text, P1_TAG)?;
    let seed: u64 = meta_value(path, &meta, "seed")?;
    let rows: Vec<P1Row> = read_table(path, body)?;
    let mut solutions = Vec::with_capacity(rows.len());
    for (i, r) in rows.into_iter().enumerate() {
        if r.seed != seed {
            return Err(Error::format(path, format!("row {}: seed {} differs from header", i + 1, r.seed)));
        }
        if !(r.th1 <= r.th2) {
            return Err(Error::format(path, format!("row {}: th1 > th2", i + 1)));
        }
        solutions.push(Solution {
            phase: Phase::Phase1,
            decision: Decision::Thresholds { th1: r.th1, th2: r.th2 },
            f1: r.f1_raw,
            f2_opt: r.f2_opt,
            f2_val: r.f2_val,
            generation: r.generation,
        });
    }
    Ok(ParetoFront {
        seed,
        norm: NormalizationSpec::new(meta_value(path, &meta, "f1_ref")?),
        solutions,
    })
}

/// Writes the P2 table and its mask sidecar; row `i` of the table matches
/// line `i` of the sidecar.
pub fn write_phase2(path: &Path, masks_path: &Path, front: &ParetoFront, engine: Engine) -> Result<()> {
    let mut rows = Vec::with_capacity(front.len());
    let mut bits = None;
    let mut sidecar = String::new();
    let mut encoded = Vec::with_capacity(front.len());
    for s in &front.solutions {
        let Decision::Mask(m) = &s.decision else {
            return Err(Error::Contract("phase-2 export needs mask decisions".into()));
        };
        if *bits.get_or_insert(m.len()) != m.len() {
            return Err(Error::Contract("phase-2 masks differ in length".into()));
        }
        rows.push(P2Row {
            f1: s.f1,
            f2_opt: s.f2_opt,
            f2_val: s.f2_val,
            popcount: m.count_ones(),
            pruned_pct: 100.0 * (1.0 - s.f1 / front.norm.f1_ref),
            engine,
            seed: front.seed,
            generation: s.generation,
        });
        encoded.push(m.to_rle());
    }
    let meta = [
        ("f1_ref", front.norm.f1_ref.to_string()),
        ("seed", front.seed.to_string()),
        ("engine", engine.to_string()),
    ];
    write_table(
        path,
        tag_line(P2_TAG, &meta),
        &rows,
        &["f1", "f2_opt", "f2_val", "popcount", "pruned_pct", "engine", "seed", "generation"],
    )?;
    sidecar.push_str(&tag_line(
        MASK_TAG,
        &[("bits", bits.unwrap_or(0).to_string()), ("count", rows.len().to_string())],
    ));
    for line in encoded {
        sidecar.push_str(&line);
        sidecar.push('\n');
    }
    fs::write(masks_path, sidecar).map_err(|e| Error::io(masks_path, e))
}

pub fn read_phase2(path: &Path, masks_path: &Path) -> Result<(ParetoFront, Engine)> {
    let text = read_text(path)?;
    let (meta, body) = parse_tagged(path, &text, P2_TAG)?;
    let seed: u64 = meta_value(path, &meta, "seed")?;
    let engine: Engine = meta_value(path, &meta, "engine")?;
    let rows: Vec<P2Row> = read_table(path, body)?;

    let mask_text = read_text(masks_path)?;
    let (mask_meta, mask_body) = parse_tagged(masks_path, &mask_text, MASK_TAG)?;
    let bits: usize = meta_value(masks_path, &mask_meta, "bits")?;
    let count: usize = meta_value(masks_path, &mask_meta, "count")?;
    let lines: Vec<&str> = mask_body.lines().collect();
    if count != rows.len() || lines.len() != rows.len() {
        return Err(Error::format(
            masks_path,
            format!("{} masks for {} table rows", lines.len(), rows.len()),
        ));
    }
    let mut solutions = Vec::with_capacity(rows.len());
    for (i, (r, line)) in rows.into_iter().zip(lines).enumerate() {
        let m = BitMask::from_rle(line).map_err(|e| Error::format(masks_path, format!("mask {}: {e}", i + 1)))?;
        if m.len() != bits {
            return Err(Error::format(masks_path, format!("mask {} has {} bits, expected {bits}", i + 1, m.len())));
        }
        if m.count_ones() != r.popcount || r.seed != seed || r.engine != engine {
            return Err(Error::format(path, format!("row {} disagrees with its mask or header", i + 1)));
        }
        solutions.push(Solution {
            phase: Phase::Phase2,
            decision: Decision::Mask(m),
            f1: r.f1,
            f2_opt: r.f2_opt,
            f2_val: r.f2_val,
            generation: r.generation,
        });
    }
    let front = ParetoFront {
        seed,
        norm: NormalizationSpec::new(meta_value(path, &meta, "f1_ref")?),
        solutions,
    };
    Ok((front, engine))
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in trace {
        w.serialize(r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p1_front(rows: &[(f64, f64, f64, f64, f64)]) -> ParetoFront {
        ParetoFront {
            seed: 9,
            norm: NormalizationSpec::new(1234.0),
            solutions: rows
                .iter()
                .enumerate()
                .map(|(g, &(th1, th2, f1, f2_opt, f2_val))| Solution {
                    phase: Phase::Phase1,
                    decision: Decision::Thresholds { th1, th2 },
                    f1,
                    f2_opt,
                    f2_val,
                    generation: g,
                })
                .collect(),
        }
    }

    fn p2_front(masks: &[BitMask]) -> ParetoFront {
        ParetoFront {
            seed: 3,
            norm: NormalizationSpec::new(50.0),
            solutions: masks
                .iter()
                .map(|m| Solution {
                    phase: Phase::Phase2,
                    decision: Decision::Mask(m.clone()),
                    f1: m.count_ones() as f64,
                    f2_opt: 0.1 + m.len() as f64 * 1e-3,
                    f2_val: 1.0 / 3.0,
                    generation: 4,
                })
                .collect(),
        }
    }

    #[test]
    fn empty_fronts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p1.csv");
        let f = p1_front(&[]);
        write_phase1(&p, &f).unwrap();
        assert_eq!(read_phase1(&p).unwrap(), f);
        let (t, m) = (dir.path().join("p2.csv"), dir.path().join("p2.masks"));
        let f2 = p2_front(&[]);
        write_phase2(&t, &m, &f2, Engine::Moead).unwrap();
        assert_eq!(read_phase2(&t, &m).unwrap(), (f2, Engine::Moead));
    }

    #[test]
    fn bad_version_and_header_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p1.csv");
        write_phase1(&p, &p1_front(&[(-0.1, 0.2, 10.0, 0.5, 0.25)])).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        fs::write(&p, text.replace(" v1 ", " v9 ")).unwrap();
        let err = read_phase1(&p).unwrap_err();
        assert!(matches!(&err, Error::Format { path, msg } if path == &p && msg.contains("v9")));
        fs::write(&p, "th1,th2\n1,2\n").unwrap();
        assert!(matches!(read_phase1(&p), Err(Error::Format { .. })));
        fs::write(&p, text.replace("-0.1,0.2", "0.3,0.2")).unwrap();
        assert!(matches!(read_phase1(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn mask_sidecar_mismatch_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let (t, m) = (dir.path().join("p2.csv"), dir.path().join("p2.masks"));
        let masks = [BitMask::from_bools(&[true, false, true]), BitMask::ones(3)];
        write_phase2(&t, &m, &p2_front(&masks), Engine::Nsga2).unwrap();
        let text = fs::read_to_string(&m).unwrap();
        fs::write(&m, text.replace("1:3\n", "0:3\n")).unwrap();
        assert!(matches!(read_phase2(&t, &m), Err(Error::Format { .. })));
        fs::write(&m, text.lines().take(2).collect::<Vec<_>>().join("\n")).unwrap();
        assert!(matches!(read_phase2(&t, &m), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn phase1_round_trip_is_exact(rows in proptest::collection::vec(
            (-1e3f64..1e3, 0f64..1e3, 0u32..100_000, 0f64..1.0, 0f64..1.0), 0..20)
        ) {
            let rows: Vec<_> = rows.into_iter().map(|(a, w, f1, e1, e2)| (a, a + w, f1 as f64, e1, e2)).collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("p1.csv");
            let f = p1_front(&rows);
            write_phase1(&p, &f).unwrap();
            prop_assert_eq!(read_phase1(&p).unwrap(), f);
        }

        #[test]
        fn phase2_round_trip_is_exact(bits in proptest::collection::vec(
            proptest::collection::vec(any::<bool>(), 17), 0..8)
        ) {
            let masks: Vec<BitMask> = bits.iter().map(|b| BitMask::from_bools(b)).collect();
            let dir = tempfile::tempdir().unwrap();
            let (t, m) = (dir.path().join("p2.csv"), dir.path().join("p2.masks"));
            let f = p2_front(&masks);
            write_phase2(&t, &m, &f, Engine::Nsga2).unwrap();
            prop_assert_eq!(read_phase2(&t, &m).unwrap(), (f, Engine::Nsga2));
        }
    }
}
