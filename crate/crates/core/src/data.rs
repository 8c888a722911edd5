//! Tabular datasets with a binary protected-status variable (PSV).

use std::path::Path;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub features: Matrix,
    /// Protected status, 0 or 1 per instance.
    pub psv: Vec<u8>,
    /// 0 = normal, 1 = abnormal.
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    /// Validates and assembles a dataset. Feature columns are named `x0, x1, …`.
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        psv: Vec<u8>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        Self::with_feature_names(name, names, features, psv, labels)
    }

    pub fn with_feature_names(
        name: impl Into<String>,
        feature_names: Vec<String>,
        features: Matrix,
        psv: Vec<u8>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n = features.rows();
        if feature_names.len() != features.cols() {
            return Err(Error::DimensionMismatch {
                expected: features.cols(),
                found: feature_names.len(),
            });
        }
        if psv.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: psv.len(),
            });
        }
        if let Some(row) = psv.iter().position(|&z| z > 1) {
            return Err(Error::NonBinaryPsv {
                row: row + 1,
                value: psv[row].to_string(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.len(),
                });
            }
            if let Some(row) = l.iter().position(|&y| y > 1) {
                return Err(Error::NonBinaryLabel {
                    row: row + 1,
                    value: l[row].to_string(),
                });
            }
        }
        if !features.is_finite() {
            return Err(Error::InvalidArgument(
                "features contain non-finite values".into(),
            ));
        }
        Ok(Dataset {
            name: name.into(),
            feature_names,
            features,
            psv,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_dims(&self) -> usize {
        self.features.cols()
    }

    /// Instance counts for PSV 0 and PSV 1.
    pub fn group_counts(&self) -> [usize; 2] {
        let ones = self.psv.iter().filter(|&&z| z == 1).count();
        [self.psv.len() - ones, ones]
    }

    /// Errors unless both PSV values occur.
    pub fn require_both_groups(&self) -> Result<()> {
        match self.group_counts() {
            [0, 0] => Err(Error::Empty("dataset")),
            [0, _] => Err(Error::SinglePsvGroup(1)),
            [_, 0] => Err(Error::SinglePsvGroup(0)),
            _ => Ok(()),
        }
    }

    /// Rows `idx`, in order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            features: self.features.select_rows(idx),
            psv: idx.iter().map(|&i| self.psv[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Writes `features…, psv[, label]` with a header row. Values use the
    /// shortest decimal form that parses back to the same `f64`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("psv");
        if self.labels.is_some() {
            header.push("label");
        }
        w.write_record(&header)?;
        for (i, row) in self.features.iter_rows().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.psv[i].to_string());
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn parse_binary(value: &str) -> Option<u8> {
    match value.trim().parse::<f64>() {
        Ok(0.0) => Some(0),
        Ok(1.0) => Some(1),
        _ => None,
    }
}

/// Reads a headered, comma-separated file. Every column other than the PSV
/// and label columns is a numeric feature, kept in header order. Row numbers
/// in errors count data rows from 1.
pub fn load_csv(
    path: impl AsRef<Path>,
    psv_column: &str,
    label_column: Option<&str>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let psv_idx = find(psv_column)?;
    let label_idx = label_column.map(find).transpose()?;
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&j| j != psv_idx && Some(j) != label_idx)
        .collect();

    let mut data = Vec::new();
    let mut psv = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let z = &record[psv_idx];
        psv.push(parse_binary(z).ok_or_else(|| Error::NonBinaryPsv {
            row,
            value: z.to_string(),
        })?);
        if let (Some(j), Some(l)) = (label_idx, labels.as_mut()) {
            let y = &record[j];
            l.push(parse_binary(y).ok_or_else(|| Error::NonBinaryLabel {
                row,
                value: y.to_string(),
            })?);
        }
        for &j in &feature_idx {
            let cell = record[j].trim();
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        row,
                        column: header[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
    }
    if psv.is_empty() {
        return Err(Error::Empty("CSV has no data rows"));
    }
    let features = Matrix::from_vec(psv.len(), feature_idx.len(), data)?;
    let name = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Dataset::with_feature_names(
        name,
        feature_idx.iter().map(|&j| header[j].clone()).collect(),
        features,
        psv,
        labels,
    )
}

/// Per-column affine map fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Population standard deviation; 0 marks a constant column.
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(features: &Matrix) -> Self {
        let mean = features.column_means();
        let mut var = vec![0.0; features.cols()];
        for row in features.iter_rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let n = features.rows().max(1) as f64;
        let std = var.iter().map(|v| (v / n).sqrt()).collect();
        Scaler { mean, std }
    }

    /// Constant columns map to 0.
    pub fn transform(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: features.cols(),
            });
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = if self.std[j] > 0.0 {
                    (*v - self.mean[j]) / self.std[j]
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            features: self.transform(&d.features)?,
            ..d.clone()
        })
    }
}

/// Z-scores every column of `train` and applies the same map to `others`.
pub fn standardize(train: &Dataset, others: &[Dataset]) -> Result<(Dataset, Vec<Dataset>, Scaler)> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let scaler = Scaler::fit(&train.features);
    let scaled_train = scaler.apply(train)?;
    let scaled_others = others
        .iter()
        .map(|d| scaler.apply(d))
        .collect::<Result<Vec<_>>>()?;
    Ok((scaled_train, scaled_others, scaler))
}

/// Subsamples the larger PSV group without replacement so both groups have
/// `min(|group0|, |group1|)` instances. Retained rows keep their original order.
pub fn balance_by_psv(d: &Dataset, seed: u64) -> Result<Dataset> {
    d.require_both_groups()?;
    let [n0, n1] = d.group_counts();
    if n0 == n1 {
        return Ok(d.clone());
    }
    let big = u8::from(n1 > n0);
    let target = n0.min(n1);
    let big_rows: Vec<usize> = (0..d.len()).filter(|&i| d.psv[i] == big).collect();
    let mut rng = stream_rng(seed, Stream::Balance, 0);
    let mut keep: Vec<usize> = index::sample(&mut rng, big_rows.len(), target)
        .into_iter()
        .map(|k| big_rows[k])
        .collect();
    keep.extend((0..d.len()).filter(|&i| d.psv[i] != big));
    keep.sort_unstable();
    Ok(d.subset(&keep))
}

/// Parameters of the synthetic biased-data generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    /// Test instances per group; also the training size of PSV group 0.
    pub n_per_group: usize,
    /// Training size of PSV group 1 relative to group 0.
    pub train_minority_ratio: f64,
    pub n_dims: usize,
    /// 0 gives identical groups; 1 makes the PSV almost linearly recoverable.
    pub bias_strength: f64,
    /// Fraction of each test group that is abnormal.
    pub anomaly_fraction: f64,
    pub anomaly_shift: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_per_group: 1000,
            train_minority_ratio: 0.25,
            n_dims: 10,
            bias_strength: 0.8,
            anomaly_fraction: 0.1,
            anomaly_shift: 3.0,
            seed: 0,
        }
    }
}

/// Distance between the two group means along the bias axis at full strength.
pub const SYNTH_MAX_SEPARATION: f64 = 6.0;
/// Extra spread of group 1 on the bias block, bias axis excluded, at full strength.
pub const SYNTH_MAX_SPREAD: f64 = 2.0;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_group == 0 {
            return Err(Error::InvalidArgument("n_per_group must be positive".into()));
        }
        if !(self.train_minority_ratio > 0.0 && self.train_minority_ratio <= 1.0) {
            return Err(Error::InvalidArgument(
                "train_minority_ratio must lie in (0, 1]".into(),
            ));
        }
        if self.n_dims < 2 {
            return Err(Error::InvalidArgument(
                "n_dims must be at least 2 (bias axis plus anomaly axes)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.bias_strength) {
            return Err(Error::InvalidArgument("bias_strength must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.anomaly_fraction) {
            return Err(Error::InvalidArgument("anomaly_fraction must lie in [0, 1)".into()));
        }
        if !(self.anomaly_shift > 0.0 && self.anomaly_shift.is_finite()) {
            return Err(Error::InvalidArgument("anomaly_shift must be positive".into()));
        }
        Ok(())
    }

    /// Training instances of PSV group 1, at least one.
    pub fn train_minority_count(&self) -> usize {
        ((self.train_minority_ratio * self.n_per_group as f64).round() as usize).max(1)
    }

    /// Abnormal instances per group in the test set.
    pub fn anomalies_per_group(&self) -> usize {
        (self.anomaly_fraction * self.n_per_group as f64).round() as usize
    }
}

/// Number of leading features whose distribution depends on the PSV.
pub fn synth_bias_dims(n_dims: usize) -> usize {
    (n_dims / 2).max(1)
}

/// Generates a normal-only training set and a mixed test set.
///
/// The first `synth_bias_dims(d)` features form the bias block. Feature 0 is
/// the bias axis: group `z` is centred at `(z − ½)·SEPARATION·b` with unit
/// variance. The other bias-block features of group `z` are centred at 0
/// with standard deviation `1 + z·SPREAD·b`.
/// The remaining features are standard normal for everyone. Abnormal test
/// instances are normal draws from either group displaced by
/// `anomaly_shift` along the unit diagonal of the remaining features, which
/// is orthogonal to the bias block.
///
/// Training holds `n_per_group` rows of group 0 and
/// `train_minority_count()` rows of group 1. The test set holds
/// `n_per_group` rows of each group.
pub fn synth_biased(spec: &SynthSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let d = spec.n_dims;
    let b = spec.bias_strength;
    let n_bias = synth_bias_dims(d);
    let shift_per_dim = spec.anomaly_shift / ((d - n_bias) as f64).sqrt();

    let mut train_rng = stream_rng(spec.seed, Stream::Synth, 0);
    let mut test_rng = stream_rng(spec.seed, Stream::Synth, 1);

    let draw = |rng: &mut rand_chacha::ChaCha8Rng, z: u8, abnormal: bool, out: &mut Vec<f64>| {
        let zf = f64::from(z);
        let centre = (zf - 0.5) * SYNTH_MAX_SEPARATION * b;
        let spread = 1.0 + zf * SYNTH_MAX_SPREAD * b;
        for j in 0..d {
            let e: f64 = StandardNormal.sample(rng);
            out.push(match j {
                0 => centre + e,
                j if j < n_bias => spread * e,
                _ if abnormal => e + shift_per_dim,
                _ => e,
            });
        }
    };

    // Rows of a smaller group are spread evenly among the larger one.
    let spread_evenly = |i: usize, k: usize, n: usize| (i * k) / n != ((i + 1) * k) / n;

    let n = spec.n_per_group;
    let n_minority = spec.train_minority_count();
    let n_train = n + n_minority;
    let mut train_x = Vec::with_capacity(n_train * d);
    let mut train_z = Vec::with_capacity(n_train);
    for i in 0..n {
        draw(&mut train_rng, 0, false, &mut train_x);
        train_z.push(0);
        if spread_evenly(i, n_minority, n) {
            draw(&mut train_rng, 1, false, &mut train_x);
            train_z.push(1);
        }
    }

    let n_abnormal = spec.anomalies_per_group();
    let mut test_x = Vec::with_capacity(2 * n * d);
    let mut test_z = Vec::with_capacity(2 * n);
    let mut test_y = Vec::with_capacity(2 * n);
    for i in 0..n {
        let abnormal = spread_evenly(i, n_abnormal, n);
        for z in 0..2u8 {
            draw(&mut test_rng, z, abnormal, &mut test_x);
            test_z.push(z);
            test_y.push(u8::from(abnormal));
        }
    }

    let train = Dataset::new(
        "synth_train",
        Matrix::from_vec(n_train, d, train_x)?,
        train_z,
        Some(vec![0; n_train]),
    )?;
    let test = Dataset::new(
        "synth_test",
        Matrix::from_vec(2 * n, d, test_x)?,
        test_z,
        Some(test_y),
    )?;
    Ok((train, test))
}
