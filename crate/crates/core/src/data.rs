//! Synthetic labeled data and the train / validation / optimization / test
//! subset roles.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor2;
use crate::rng;

/// Minimum distance between any two class means, in units of `spread`.
pub const MIN_SEPARATION: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    features: Tensor2,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledSet {
    pub fn new(features: Tensor2, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(l) = labels.iter().find(|l| **l >= classes) {
            return Err(Error::InvalidSpec(format!("label {l} outside [0, {classes})")));
        }
        Ok(LabeledSet {
            features,
            labels,
            classes,
        })
    }

    pub fn features(&self) -> &Tensor2 {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows `idx`, in order. An empty index list yields an empty set.
    pub fn subset(&self, idx: &[usize]) -> LabeledSet {
        LabeledSet {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Writes `x0,..,x{d-1},label` rows. Floats use the shortest exact
    /// representation, so a read-back is bit-identical.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header: Vec<String> = (0..self.features.cols()).map(|d| format!("x{d}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for r in 0..self.len() {
            let mut rec: Vec<String> = self.features.row(r).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[r].to_string());
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a file written by [`LabeledSet::write_csv`]. `classes` defaults to
    /// the largest label + 1.
    pub fn read_csv(path: &Path, classes: Option<usize>) -> Result<LabeledSet> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
        let dim = header.len().saturating_sub(1);
        if dim == 0 || header.get(dim) != Some("label") {
            return Err(Error::format(path, "header must end with `label`"));
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            for field in rec.iter().take(dim) {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| Error::format(path, format!("row {}: bad number `{field}`", line + 1)))?,
                );
            }
            let label = rec
                .get(dim)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::format(path, format!("row {}: bad label", line + 1)))?;
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(Error::EmptyData);
        }
        let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        let features = Tensor2::new(labels.len(), dim, values).map_err(|e| Error::format(path, e.to_string()))?;
        LabeledSet::new(features, labels, classes).map_err(|e| Error::format(path, e.to_string()))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

/// Gaussian clusters, `per_class` rows per class, standardized per dimension.
///
/// Class means are drawn at random and rescaled so the closest pair sits
/// exactly [`MIN_SEPARATION`] spreads apart (before standardization).
pub fn generate_blobs(classes: usize, dim: usize, per_class: usize, spread: f64, seed: u64) -> Result<LabeledSet> {
    if classes < 2 || dim < 2 || per_class < 2 {
        return Err(Error::InvalidSpec(format!(
            "blobs need classes >= 2, dim >= 2, per_class >= 2; got {classes}, {dim}, {per_class}"
        )));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidSpec(format!("spread must be finite and >= 0, got {spread}")));
    }
    let mut rng = rng::stream(seed, "blobs", &[]);
    let mut centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut min_dist = f64::INFINITY;
    for a in 0..classes {
        for b in a + 1..classes {
            min_dist = min_dist.min(euclid(&centers[a], &centers[b]));
        }
    }
    // Scale unit: spread, or 1 for the noiseless case.
    let unit = if spread > 0.0 { spread } else { 1.0 };
    let factor = MIN_SEPARATION * unit / min_dist;
    centers.iter_mut().flatten().for_each(|v| *v *= factor);

    let n = classes * per_class;
    let mut values = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            for &m in center {
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push(m + spread * z);
            }
            labels.push(c);
        }
    }
    standardize(&mut values, dim);
    LabeledSet::new(Tensor2::new(n, dim, values)?, labels, classes)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn standardize(values: &mut [f64], dim: usize) {
    let n = values.len() / dim;
    for d in 0..dim {
        let mean = (0..n).map(|r| values[r * dim + d]).sum::<f64>() / n as f64;
        let var = (0..n).map(|r| (values[r * dim + d] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for r in 0..n {
            values[r * dim + d] = (values[r * dim + d] - mean) / sd;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub opt_per_class: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            val_fraction: 0.1,
            opt_per_class: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: LabeledSet,
    pub val: LabeledSet,
    pub opt: LabeledSet,
    pub test: LabeledSet,
    /// Source row indices of each subset, same order as the subset rows.
    pub indices: [Vec<usize>; 4],
}

/// Largest-remainder apportionment of `fraction * total` across classes.
fn apportion(counts: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let exact: Vec<f64> = counts.iter().map(|&c| fraction * c as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = target.saturating_sub(out.iter().sum());
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in &order {
        if rest == 0 {
            break;
        }
        out[c] += 1;
        rest -= 1;
    }
    out
}

/// Disjoint stratified subsets. The optimization subset holds exactly
/// `opt_per_class` rows per class; train and validation take their fraction
/// of the full set per class (largest remainder); the rest is test.
pub fn stratified_split(data: &LabeledSet, spec: &SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.val_fraction > 0.0 && spec.train_fraction + spec.val_fraction <= 1.0) {
        return Err(Error::InvalidSpec(format!(
            "fractions must be positive with sum <= 1, got ({}, {})",
            spec.train_fraction, spec.val_fraction
        )));
    }
    if spec.opt_per_class == 0 {
        return Err(Error::InvalidSpec("opt_per_class must be >= 1".into()));
    }
    let counts = data.class_counts();
    let train_q = apportion(&counts, spec.train_fraction);
    let val_q = apportion(&counts, spec.val_fraction);

    let mut rng = rng::stream(spec.seed, "split", &[]);
    let mut parts: [Vec<usize>; 4] = Default::default();
    for c in 0..data.classes() {
        let need = spec.opt_per_class + train_q[c] + val_q[c];
        if need > counts[c] {
            return Err(Error::InvalidSpec(format!(
                "class {c} has {} rows, split needs {need}",
                counts[c]
            )));
        }
        let mut rows: Vec<usize> = (0..data.len()).filter(|&r| data.labels()[r] == c).collect();
        rows.shuffle(&mut rng);
        let (opt, rest) = rows.split_at(spec.opt_per_class);
        let (train, rest) = rest.split_at(train_q[c]);
        let (val, test) = rest.split_at(val_q[c]);
        parts[0].extend_from_slice(train);
        parts[1].extend_from_slice(val);
        parts[2].extend_from_slice(opt);
        parts[3].extend_from_slice(test);
    }
    for p in parts.iter_mut() {
        p.shuffle(&mut rng);
    }
    Ok(Split {
        train: data.subset(&parts[0]),
        val: data.subset(&parts[1]),
        opt: data.subset(&parts[2]),
        test: data.subset(&parts[3]),
        indices: parts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn blob_shapes_and_balance() {
        let d = generate_blobs(4, 8, 250, 1.0, 42).unwrap();
        assert_eq!(d.len(), 1000);
        assert_eq!(d.features().cols(), 8);
        assert_eq!(d.class_counts(), vec![250; 4]);
        assert_eq!(generate_blobs(4, 8, 250, 1.0, 42).unwrap(), d);
        assert!(matches!(generate_blobs(1, 8, 10, 1.0, 1), Err(Error::InvalidSpec(_))));
        assert!(matches!(generate_blobs(3, 1, 10, 1.0, 1), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn blobs_are_standardized() {
        let d = generate_blobs(3, 5, 100, 0.7, 3).unwrap();
        let f = d.features();
        for c in 0..5 {
            let col: Vec<f64> = (0..f.rows()).map(|r| f.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_blobs_are_nearest_centroid_separable() {
        let d = generate_blobs(5, 4, 20, 0.0, 8).unwrap();
        let f = d.features();
        let mut cent = vec![vec![0.0; 4]; 5];
        for r in 0..d.len() {
            for k in 0..4 {
                cent[d.labels()[r]][k] += f.get(r, k) / 20.0;
            }
        }
        for r in 0..d.len() {
            let best = (0..5)
                .min_by(|&a, &b| euclid(f.row(r), &cent[a]).total_cmp(&euclid(f.row(r), &cent[b])))
                .unwrap();
            assert_eq!(best, d.labels()[r]);
        }
    }

    #[test]
    fn split_sizes_partition_and_strata() {
        let d = generate_blobs(4, 8, 250, 1.0, 42).unwrap();
        let spec = SplitSpec {
            seed: 5,
            ..SplitSpec::default()
        };
        let s = stratified_split(&d, &spec).unwrap();
        assert_eq!(s.opt.len(), 40);
        assert_eq!(s.opt.class_counts(), vec![10; 4]);
        assert_eq!(s.train.len(), 700);
        assert_eq!(s.val.len(), 100);
        assert_eq!(s.test.len(), 160);
        let mut seen = HashSet::new();
        for p in &s.indices {
            for &i in p {
                assert!(seen.insert(i), "row {i} in two subsets");
            }
        }
        assert_eq!(seen.len(), 1000);
        // Per-class expectation n_c * fraction = 25 for val, 175 for train.
        for (c, &n) in s.val.class_counts().iter().enumerate() {
            assert!((n as f64 - 25.0).abs() <= 1.0, "class {c}");
        }
        for &n in &s.train.class_counts() {
            assert!((n as f64 - 175.0).abs() <= 1.0);
        }
        let again = stratified_split(&d, &spec).unwrap();
        assert_eq!(again.indices, s.indices);
    }

    #[test]
    fn split_uneven_classes_within_one() {
        let feats = Tensor2::zeros(103, 2);
        let labels: Vec<usize> = (0..103).map(|i| if i < 37 { 0 } else if i < 80 { 1 } else { 2 }).collect();
        let d = LabeledSet::new(feats, labels, 3).unwrap();
        let spec = SplitSpec {
            train_fraction: 0.55,
            val_fraction: 0.15,
            opt_per_class: 3,
            seed: 1,
        };
        let s = stratified_split(&d, &spec).unwrap();
        let src = d.class_counts();
        for (sub, f) in [(&s.train, 0.55), (&s.val, 0.15)] {
            for (c, &n) in sub.class_counts().iter().enumerate() {
                assert!((n as f64 - f * src[c] as f64).abs() <= 1.0);
            }
        }
        assert_eq!(s.val.len(), 15);
    }

    #[test]
    fn split_rejects_insufficient_rows() {
        let d = generate_blobs(2, 2, 10, 1.0, 1).unwrap();
        let spec = SplitSpec {
            opt_per_class: 5,
            ..SplitSpec::default()
        };
        assert!(matches!(stratified_split(&d, &spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = generate_blobs(3, 4, 7, 1.3, 77).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        d.write_csv(&p).unwrap();
        let back = LabeledSet::read_csv(&p, Some(3)).unwrap();
        assert_eq!(back, d);
    }
}
