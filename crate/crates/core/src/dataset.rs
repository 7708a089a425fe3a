//! Two-class labeled data, the empirical distribution every resampler draws from.

use std::io::Read;

use crate::error::{invalid, Error, Result};

/// Class tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    One,
    Two,
}

impl Class {
    pub fn is_one(self) -> bool {
        self == Class::One
    }

    pub fn other(self) -> Class {
        match self {
            Class::One => Class::Two,
            Class::Two => Class::One,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Class::One => 1,
            Class::Two => 2,
        }
    }
}

/// Feature matrix (row-major, `n × p`) with class labels and per-class index
/// lists.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    p: usize,
    labels: Vec<Class>,
    class1: Vec<usize>,
    class2: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, p: usize, labels: Vec<Class>) -> Result<Self> {
        if p == 0 {
            return Err(invalid("feature dimension must be at least 1"));
        }
        if features.len() != labels.len() * p {
            return Err(invalid(format!(
                "feature matrix has {} values, expected {} rows × {} columns",
                features.len(),
                labels.len(),
                p
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(invalid("features must be finite"));
        }
        let class1 = (0..labels.len())
            .filter(|&i| labels[i] == Class::One)
            .collect();
        let class2 = (0..labels.len())
            .filter(|&i| labels[i] == Class::Two)
            .collect();
        Ok(Self {
            features,
            p,
            labels,
            class1,
            class2,
        })
    }

    /// Builds a dataset from separate class-1 and class-2 row lists; class-1
    /// rows come first.
    pub fn from_classes(rows1: &[Vec<f64>], rows2: &[Vec<f64>]) -> Result<Self> {
        let p = rows1.first().or(rows2.first()).map_or(0, Vec::len);
        let mut features = Vec::with_capacity((rows1.len() + rows2.len()) * p);
        let mut labels = Vec::with_capacity(rows1.len() + rows2.len());
        for (rows, class) in [(rows1, Class::One), (rows2, Class::Two)] {
            for row in rows {
                if row.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: row.len(),
                    });
                }
                features.extend_from_slice(row);
                labels.push(class);
            }
        }
        Self::new(features, p, labels)
    }

    /// Parses the text format `label,x1,...,xp` with a header row; labels
    /// are `1` or `2`. Errors name the offending line.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header_len = rdr
            .headers()
            .map_err(|e| invalid(format!("line 1: {e}")))?
            .len();
        if header_len < 2 {
            return Err(invalid(
                "line 1: header needs a label column and at least one feature column",
            ));
        }
        let p = header_len - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (k, record) in rdr.records().enumerate() {
            let line = k + 2;
            let record = record.map_err(|e| invalid(format!("line {line}: {e}")))?;
            if record.len() != header_len {
                return Err(invalid(format!(
                    "line {line}: expected {header_len} fields, found {}",
                    record.len()
                )));
            }
            let label = match &record[0] {
                "1" => Class::One,
                "2" => Class::Two,
                other => {
                    return Err(invalid(format!(
                        "line {line}: label must be 1 or 2, found {other:?}"
                    )))
                }
            };
            for field in record.iter().skip(1) {
                let v: f64 = field.parse().map_err(|_| {
                    invalid(format!("line {line}: cannot parse {field:?} as a number"))
                })?;
                if !v.is_finite() {
                    return Err(invalid(format!("line {line}: non-finite value {field:?}")));
                }
                features.push(v);
            }
            labels.push(label);
        }
        let data = Self::new(features, p, labels)?;
        for class in [Class::One, Class::Two] {
            if data.class_indices(class).is_empty() {
                return Err(invalid(format!(
                    "class {} is absent from the dataset",
                    class.number()
                )));
            }
        }
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n1(&self) -> usize {
        self.class1.len()
    }

    pub fn n2(&self) -> usize {
        self.class2.len()
    }

    pub fn n_class(&self, class: Class) -> usize {
        self.class_indices(class).len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> Class {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn class_indices(&self, class: Class) -> &[usize] {
        match class {
            Class::One => &self.class1,
            Class::Two => &self.class2,
        }
    }

    /// Position of case `i` inside its class's index list.
    pub fn position_in_class(&self, i: usize) -> usize {
        let list = self.class_indices(self.labels[i]);
        list.binary_search(&i)
            .expect("case belongs to its own class list")
    }

    /// Copy with one feature of one case replaced.
    pub fn with_feature(&self, i: usize, coordinate: usize, value: f64) -> Result<Self> {
        if i >= self.n() || coordinate >= self.p {
            return Err(invalid(format!(
                "case {i} / coordinate {coordinate} out of range"
            )));
        }
        if !value.is_finite() {
            return Err(invalid("feature value must be finite"));
        }
        let mut out = self.clone();
        out.features[i * self.p + coordinate] = value;
        Ok(out)
    }

    /// Copy with the two class labels exchanged (case order unchanged).
    pub fn with_swapped_labels(&self) -> Self {
        let labels = self.labels.iter().map(|c| c.other()).collect();
        Self::new(self.features.clone(), self.p, labels)
            .expect("relabeling keeps the dataset valid")
    }

    /// Sub-dataset made of the given rows (with repetition), in order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(rows.len() * self.p);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Self::new(features, self.p, labels)
    }
}
