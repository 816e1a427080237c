//! Training/evaluation splits, CSV loading and synthetic generators.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed::SeedTree;

const VARIANCE_FLOOR: f64 = 1e-12;

/// Player set `D` (training split) and held-out evaluation split `D_e`.
/// Features are stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    n_features: usize,
    n_classes: usize,
    train_features: Vec<f64>,
    train_labels: Vec<usize>,
    eval_features: Vec<f64>,
    eval_labels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n_train: usize,
    pub n_eval: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub train_class_counts: Vec<usize>,
    pub eval_class_counts: Vec<usize>,
    pub hash: String,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        n_features: usize,
        train_features: Vec<f64>,
        train_labels: Vec<usize>,
        eval_features: Vec<f64>,
        eval_labels: Vec<usize>,
    ) -> Result<Self> {
        let n_train = train_labels.len();
        let n_eval = eval_labels.len();
        if n_train < 2 {
            return Err(Error::DegenerateData(format!("need at least 2 training rows, got {n_train}")));
        }
        if n_eval < 1 {
            return Err(Error::DegenerateData("evaluation split is empty".into()));
        }
        if n_features == 0 {
            return Err(Error::DegenerateData("rows have no features".into()));
        }
        if train_features.len() != n_train * n_features || eval_features.len() != n_eval * n_features {
            return Err(Error::DegenerateData("feature matrix shape does not match labels".into()));
        }
        if train_features.iter().chain(&eval_features).any(|x| !x.is_finite()) {
            return Err(Error::DegenerateData("non-finite feature value".into()));
        }
        let n_classes = train_labels.iter().chain(&eval_labels).max().map_or(0, |m| m + 1).max(2);
        Ok(Self {
            name: name.into(),
            n_features,
            n_classes,
            train_features,
            train_labels,
            eval_features,
            eval_labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_train(&self) -> usize {
        self.train_labels.len()
    }

    pub fn n_eval(&self) -> usize {
        self.eval_labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn train_row(&self, i: usize) -> &[f64] {
        &self.train_features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn train_label(&self, i: usize) -> usize {
        self.train_labels[i]
    }

    pub fn train_labels(&self) -> &[usize] {
        &self.train_labels
    }

    pub fn eval_row(&self, i: usize) -> &[f64] {
        &self.eval_features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn eval_label(&self, i: usize) -> usize {
        self.eval_labels[i]
    }

    pub fn eval_labels(&self) -> &[usize] {
        &self.eval_labels
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.train_features
            .chunks_exact(self.n_features)
            .chain(self.eval_features.chunks_exact(self.n_features))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Rescales every column to zero mean and unit variance using training
    /// statistics only. Columns that are constant on the training split
    /// become all zeros.
    pub fn standardized(&self) -> Self {
        let d = self.n_features;
        let n = self.n_train() as f64;
        let mut mean = vec![0.0; d];
        for row in self.train_features.chunks_exact(d) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in self.train_features.chunks_exact(d) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        let scale = |xs: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(xs.len());
            for row in xs.chunks_exact(d) {
                for j in 0..d {
                    if var[j] < VARIANCE_FLOOR {
                        out.push(0.0);
                    } else {
                        out.push((row[j] - mean[j]) / var[j].sqrt());
                    }
                }
            }
            out
        };
        Self {
            train_features: scale(&self.train_features),
            eval_features: scale(&self.eval_features),
            ..self.clone()
        }
    }

    /// SHA-256 over shape, labels and the exact bit patterns of all features.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.n_features, self.n_classes, self.n_train(), self.n_eval()] {
            h.update((v as u64).to_le_bytes());
        }
        for x in self.train_features.iter().chain(&self.eval_features) {
            h.update(x.to_bits().to_le_bytes());
        }
        for &y in self.train_labels.iter().chain(&self.eval_labels) {
            h.update((y as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn summary(&self) -> DatasetSummary {
        let counts = |labels: &[usize]| {
            let mut c = vec![0; self.n_classes];
            labels.iter().for_each(|&y| c[y] += 1);
            c
        };
        DatasetSummary {
            name: self.name.clone(),
            n_train: self.n_train(),
            n_eval: self.n_eval(),
            n_features: self.n_features,
            n_classes: self.n_classes,
            train_class_counts: counts(&self.train_labels),
            eval_class_counts: counts(&self.eval_labels),
            hash: self.content_hash(),
        }
    }

    /// Writes train rows then eval rows as CSV with a `label` column last.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.n_features).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        let rows = self
            .train_features
            .chunks_exact(self.n_features)
            .zip(&self.train_labels)
            .chain(self.eval_features.chunks_exact(self.n_features).zip(&self.eval_labels));
        for (row, y) in rows {
            let mut rec: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads a numeric CSV with a header row, splits it by a seeded shuffle and
/// standardizes with training statistics.
pub fn load_csv(path: &Path, label_column: &str, eval_fraction: f64, seeds: &SeedTree) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let name = path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    Dataset::from_csv_reader(file, &name, label_column, eval_fraction, seeds)
}

impl Dataset {
    pub fn from_csv_reader<R: Read>(
        reader: R,
        name: &str,
        label_column: &str,
        eval_fraction: f64,
        seeds: &SeedTree,
    ) -> Result<Self> {
        if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
            return Err(Error::Config(format!("eval_fraction must lie in (0, 1), got {eval_fraction}")));
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let label_idx = headers
            .iter()
            .position(|h| h.trim() == label_column)
            .ok_or_else(|| Error::Config(format!("label column {label_column:?} not found in header")))?;
        let d = headers.len() - 1;
        if d == 0 {
            return Err(Error::DegenerateData("no feature columns besides the label".into()));
        }

        let mut features = Vec::new();
        let mut raw_labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let row = r + 2;
            if record.len() != headers.len() {
                return Err(Error::Parse {
                    row,
                    column: "*".into(),
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    row,
                    column: headers[j].to_string(),
                    message: format!("non-numeric cell {cell:?}"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: headers[j].to_string(),
                        message: "non-finite value".into(),
                    });
                }
                if j == label_idx {
                    if value < 0.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                        return Err(Error::Parse {
                            row,
                            column: headers[j].to_string(),
                            message: format!("label {value} is not a non-negative integer"),
                        });
                    }
                    raw_labels.push(value as u64);
                } else {
                    features.push(value);
                }
            }
        }

        let total = raw_labels.len();
        if total < 3 {
            return Err(Error::DegenerateData(format!("need at least 3 rows to split, got {total}")));
        }
        let mut universe = raw_labels.clone();
        universe.sort_unstable();
        universe.dedup();
        let labels: Vec<usize> = raw_labels
            .iter()
            .map(|y| universe.binary_search(y).expect("label in universe"))
            .collect();

        let n_eval = ((eval_fraction * total as f64).round() as usize).clamp(1, total - 2);
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(&mut seeds.child("split", 0).rng());
        let (eval_idx, train_idx) = order.split_at(n_eval);
        let mut train_idx = train_idx.to_vec();
        let mut eval_idx = eval_idx.to_vec();
        train_idx.sort_unstable();
        eval_idx.sort_unstable();

        let gather = |idx: &[usize]| -> (Vec<f64>, Vec<usize>) {
            let mut xs = Vec::with_capacity(idx.len() * d);
            let mut ys = Vec::with_capacity(idx.len());
            for &i in idx {
                xs.extend_from_slice(&features[i * d..(i + 1) * d]);
                ys.push(labels[i]);
            }
            (xs, ys)
        };
        let (train_x, train_y) = gather(&train_idx);
        let (eval_x, eval_y) = gather(&eval_idx);
        if train_y.iter().all(|&y| y == train_y[0]) {
            return Err(Error::DegenerateData("training split contains a single class".into()));
        }
        let ds = Dataset::new(name, d, train_x, train_y, eval_x, eval_y)?.standardized();
        if ds.rows().flatten().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateData("feature magnitudes overflow when standardized".into()));
        }
        Ok(ds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    GaussianBlobs,
    TwoClassImages,
}

/// Parameters of a synthetic two-class task. `separation` is the distance
/// between the class means in units of the per-coordinate noise standard
/// deviation, so the Bayes accuracy is `Φ(separation / 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n_train: usize,
    pub n_eval: usize,
    pub dim: usize,
    pub separation: f64,
    /// Fraction of training labels flipped after generation.
    #[serde(default)]
    pub label_noise: f64,
}

impl SynthSpec {
    pub fn blobs(n_train: usize, n_eval: usize, dim: usize, separation: f64) -> Self {
        Self {
            kind: SynthKind::GaussianBlobs,
            n_train,
            n_eval,
            dim,
            separation,
            label_noise: 0.0,
        }
    }

    pub fn images(n_train: usize, n_eval: usize, side: usize, separation: f64) -> Self {
        Self {
            kind: SynthKind::TwoClassImages,
            n_train,
            n_eval,
            dim: side * side,
            separation,
            label_noise: 0.0,
        }
    }
}

/// Generates a balanced two-class dataset, standardized with training statistics.
pub fn synth_dataset(spec: &SynthSpec, seeds: &SeedTree) -> Result<Dataset> {
    if spec.n_train < 2 || spec.n_eval < 1 || spec.dim < 1 {
        return Err(Error::Config(format!(
            "synthetic data needs n_train >= 2, n_eval >= 1, dim >= 1 (got {}, {}, {})",
            spec.n_train, spec.n_eval, spec.dim
        )));
    }
    if !(spec.separation >= 0.0 && spec.separation.is_finite()) {
        return Err(Error::Config(format!("separation must be finite and >= 0, got {}", spec.separation)));
    }
    if !(0.0..0.5).contains(&spec.label_noise) {
        return Err(Error::Config(format!("label_noise must lie in [0, 0.5), got {}", spec.label_noise)));
    }
    let direction = match spec.kind {
        SynthKind::GaussianBlobs => vec![1.0 / (spec.dim as f64).sqrt(); spec.dim],
        SynthKind::TwoClassImages => image_contrast(spec.dim)?,
    };
    let brightness_sd = match spec.kind {
        SynthKind::GaussianBlobs => 0.0,
        SynthKind::TwoClassImages => 0.5,
    };
    let half = spec.separation / 2.0;
    let draw_split = |n: usize, tree: SeedTree| -> (Vec<f64>, Vec<usize>) {
        let mut rng = tree.rng();
        let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        labels.shuffle(&mut rng);
        let mut xs = Vec::with_capacity(n * spec.dim);
        for &y in &labels {
            let sign = if y == 1 { 1.0 } else { -1.0 };
            let offset: f64 = brightness_sd * rng.sample::<f64, _>(StandardNormal);
            for u in &direction {
                let noise: f64 = rng.sample(StandardNormal);
                xs.push(sign * half * u + noise + offset);
            }
        }
        (xs, labels)
    };
    let name = match spec.kind {
        SynthKind::GaussianBlobs => "gaussian-blobs",
        SynthKind::TwoClassImages => "two-class-images",
    };
    let (train_x, mut train_y) = draw_split(spec.n_train, seeds.child("synth-train", 0));
    let (eval_x, eval_y) = draw_split(spec.n_eval, seeds.child("synth-eval", 0));
    if spec.label_noise > 0.0 {
        let flips = (spec.label_noise * spec.n_train as f64).round() as usize;
        let mut idx: Vec<usize> = (0..spec.n_train).collect();
        idx.shuffle(&mut seeds.child("synth-flip", 0).rng());
        for &i in &idx[..flips] {
            train_y[i] = 1 - train_y[i];
        }
    }
    Ok(Dataset::new(name, spec.dim, train_x, train_y, eval_x, eval_y)?.standardized())
}

/// Unit vector separating a horizontal-bar template from a vertical-bar one
/// on a `side × side` image.
fn image_contrast(dim: usize) -> Result<Vec<f64>> {
    let side = (dim as f64).sqrt().round() as usize;
    if side * side != dim || side < 3 {
        return Err(Error::Config(format!("two-class-images needs a square dimension >= 9, got {dim}")));
    }
    let band = side / 3..side - side / 3;
    let mut v = vec![0.0; dim];
    for r in 0..side {
        for c in 0..side {
            let horizontal = band.contains(&r) as i32 as f64;
            let vertical = band.contains(&c) as i32 as f64;
            v[r * side + c] = vertical - horizontal;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(v.into_iter().map(|x| x / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_split(text: &str, fraction: f64, seed: u64) -> Result<Dataset> {
        Dataset::from_csv_reader(text.as_bytes(), "t", "y", fraction, &SeedTree::new(seed))
    }

    #[test]
    fn four_rows_quarter_eval() {
        let ds = csv_split("a,b,y\n1,2,0\n3,4,1\n5,6,0\n7,9,1\n", 0.25, 1).unwrap();
        assert_eq!(ds.n_train(), 3);
        assert_eq!(ds.n_eval(), 1);
        assert_eq!(ds.n_features(), 2);
    }

    #[test]
    fn overflowing_magnitudes_are_rejected() {
        let err = csv_split("a,y\n1e308,0\n1.5e308,1\n1.7e308,0\n1.6e308,1\n", 0.25, 1).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)), "{err}");
    }

    #[test]
    fn constant_column_standardizes_to_zero() {
        let ds = csv_split("a,c,y\n1,0.1,0\n2,0.1,1\n3,0.1,0\n4,0.1,1\n5,0.1,1\n", 0.2, 3).unwrap();
        for i in 0..ds.n_train() {
            assert_eq!(ds.train_row(i)[1], 0.0);
        }
        assert_eq!(ds.eval_row(0)[1], 0.0);
        let col: Vec<f64> = (0..ds.n_train()).map(|i| ds.train_row(i)[0]).collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_is_seeded() {
        let text = "a,y\n1,0\n2,1\n3,0\n4,1\n5,0\n6,1\n7,0\n8,1\n";
        assert_eq!(csv_split(text, 0.25, 9).unwrap(), csv_split(text, 0.25, 9).unwrap());
        let splits: Vec<_> = (0..8).map(|s| csv_split(text, 0.25, s).unwrap().eval_labels().to_vec()).collect();
        let a = csv_split(text, 0.25, 0).unwrap();
        let differs = (1..8).any(|s| csv_split(text, 0.25, s).unwrap() != a);
        assert!(differs, "{splits:?}");
    }

    #[test]
    fn parse_errors_name_row_and_column() {
        match csv_split("a,b,y\n1,2,0\n3,x,1\n5,6,0\n", 0.3, 1) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(csv_split("a,y\n1,0.5\n2,1\n3,0\n", 0.3, 1), Err(Error::Parse { .. })));
        assert!(matches!(csv_split("a,z\n1,0\n2,1\n3,0\n", 0.3, 1), Err(Error::Config(_))));
        assert!(matches!(csv_split("a,y\n1,0\n", 0.5, 1), Err(Error::DegenerateData(_))));
        assert!(matches!(csv_split("a,y\n1,0\n2,1\n3,0\n", 1.5, 1), Err(Error::Config(_))));
    }

    #[test]
    fn single_class_training_split_is_degenerate() {
        assert!(matches!(
            csv_split("a,y\n1,3\n2,3\n3,3\n4,3\n", 0.25, 1),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn labels_are_remapped_to_contiguous_classes() {
        let ds = csv_split("a,y\n1,4\n2,9\n3,4\n4,9\n5,7\n6,4\n", 0.2, 2).unwrap();
        assert_eq!(ds.n_classes(), 3);
        assert!(ds.train_labels().iter().chain(ds.eval_labels()).all(|&y| y < 3));
    }

    #[test]
    fn synthetic_balance_and_shape() {
        let ds = synth_dataset(&SynthSpec::blobs(101, 40, 3, 2.0), &SeedTree::new(4)).unwrap();
        assert_eq!((ds.n_train(), ds.n_eval(), ds.n_features(), ds.n_classes()), (101, 40, 3, 2));
        let ones = ds.train_labels().iter().filter(|&&y| y == 1).count();
        assert!((ones as i64 - 50).abs() <= 1);
        let img = synth_dataset(&SynthSpec::images(20, 10, 6, 2.0), &SeedTree::new(4)).unwrap();
        assert_eq!(img.n_features(), 36);
        assert!(synth_dataset(&SynthSpec::images(20, 10, 6, 2.0), &SeedTree::new(4)).unwrap() == img);
        let mut bad = SynthSpec::images(20, 10, 6, 2.0);
        bad.dim = 35;
        assert!(synth_dataset(&bad, &SeedTree::new(4)).is_err());
        assert!(synth_dataset(&SynthSpec::blobs(1, 10, 2, 1.0), &SeedTree::new(4)).is_err());
    }

    #[test]
    fn label_noise_flips_requested_fraction() {
        let clean = synth_dataset(&SynthSpec::blobs(40, 10, 2, 2.0), &SeedTree::new(8)).unwrap();
        let mut spec = SynthSpec::blobs(40, 10, 2, 2.0);
        spec.label_noise = 0.1;
        let noisy = synth_dataset(&spec, &SeedTree::new(8)).unwrap();
        let flipped = clean
            .train_labels()
            .iter()
            .zip(noisy.train_labels())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(flipped, 4);
        assert_eq!(clean.eval_labels(), noisy.eval_labels());
    }

    #[test]
    fn csv_roundtrip_through_writer() {
        let ds = synth_dataset(&SynthSpec::blobs(6, 3, 2, 1.0), &SeedTree::new(1)).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x0,x1,label\n"));
        assert_eq!(text.lines().count(), 10);
        let back = Dataset::from_csv_reader(text.as_bytes(), "b", "label", 1.0 / 3.0, &SeedTree::new(1)).unwrap();
        assert_eq!(back.n_train() + back.n_eval(), 9);
    }

    #[test]
    fn hash_tracks_content() {
        let a = synth_dataset(&SynthSpec::blobs(10, 4, 2, 1.0), &SeedTree::new(1)).unwrap();
        let b = synth_dataset(&SynthSpec::blobs(10, 4, 2, 1.0), &SeedTree::new(2)).unwrap();
        assert_eq!(a.content_hash(), a.clone().with_name("other").content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.summary().hash.len(), 64);
    }
}
