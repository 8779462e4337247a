use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{ClassTable, SplitSpec};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::types::{ClassId, Role};

/// First eight bytes of the binary feature layout.
pub const BINARY_MAGIC: &[u8; 8] = b"SEMZSLF1";

/// Backbone features with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<ClassId>,
    classes: ClassTable,
}

impl FeatureSet {
    pub fn new(dim: usize, values: Vec<f64>, labels: Vec<ClassId>, classes: ClassTable) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("feature dimension must be positive"));
        }
        if values.len() != dim * labels.len() {
            return Err(Error::Shape {
                op: "feature_set",
                left: vec![labels.len(), dim],
                right: vec![values.len()],
            });
        }
        if let Some(bad) = labels.iter().find(|l| classes.get(**l).is_none()) {
            return Err(Error::Manifest(format!("label id {bad} is not in the class table")));
        }
        classes.check_disjoint()?;
        Ok(FeatureSet {
            dim,
            values,
            labels,
            classes,
        })
    }

    pub fn from_rows(rows: &[(ClassId, Vec<f64>)], classes: ClassTable) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.1.len())
            .ok_or_else(|| Error::contract("empty feature set"))?;
        let mut values = Vec::with_capacity(rows.len() * dim);
        let mut labels = Vec::with_capacity(rows.len());
        for (l, v) in rows {
            if v.len() != dim {
                return Err(Error::Shape {
                    op: "feature_set",
                    left: vec![dim],
                    right: vec![v.len()],
                });
            }
            values.extend_from_slice(v);
            labels.push(*l);
        }
        Self::new(dim, values, labels, classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> ClassId {
        self.labels[i]
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn classes(&self) -> &ClassTable {
        &self.classes
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, &[f64])> {
        self.labels.iter().copied().zip(self.values.chunks(self.dim))
    }

    /// Rows selected by index, as a matrix.
    pub fn matrix(&self, idx: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor::matrix(idx.len(), self.dim, data)
    }

    /// Rows whose class has the given role.
    pub fn with_role(&self, role: Role) -> FeatureSet {
        self.filter(|c| self.classes.role(c) == role)
    }

    pub fn filter(&self, keep: impl Fn(ClassId) -> bool) -> FeatureSet {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (l, r) in self.iter() {
            if keep(l) {
                values.extend_from_slice(r);
                labels.push(l);
            }
        }
        FeatureSet {
            dim: self.dim,
            values,
            labels,
            classes: self.classes.clone(),
        }
    }

    /// Concatenate two sets over the same class table.
    pub fn concat(&self, other: &FeatureSet) -> Result<FeatureSet> {
        if self.dim != other.dim {
            return Err(Error::Shape {
                op: "concat",
                left: vec![self.dim],
                right: vec![other.dim],
            });
        }
        if self.classes != other.classes {
            return Err(Error::Manifest("feature sets use different class tables".into()));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(FeatureSet {
            dim: self.dim,
            values,
            labels,
            classes: self.classes.clone(),
        })
    }

    /// Distinct labels present, ascending.
    pub fn present_classes(&self) -> Vec<ClassId> {
        let mut v = self.labels.clone();
        v.sort();
        v.dedup();
        v
    }

    /// CSV rows `label,v1,...,vm`, no header.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut line = String::new();
        for (l, r) in self.iter() {
            line.clear();
            line.push_str(self.classes.name(l));
            for v in r {
                line.push(',');
                line.push_str(&v.to_string());
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Binary layout, little-endian:
    /// `magic[8] | n: u64 | m: u64 | n x (len: u32 | label utf-8 [len] | m x f64)`.
    pub fn write_binary(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for (l, r) in self.iter() {
            let name = self.classes.name(l).as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            for v in r {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_file(path, |w| self.write_csv(w))
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        write_file(path, |w| self.write_binary(w))
    }

    pub fn read_csv(r: impl Read, classes: &ClassTable) -> Result<Self> {
        let mut dim = None;
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let ln = i + 1;
            let line = line.map_err(|e| Error::format(Some(ln), e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',');
            let label = fields.next().unwrap_or("").trim();
            if labels.is_empty() && values.is_empty() && label.eq_ignore_ascii_case("label") {
                continue;
            }
            let id = classes
                .id_of(label)
                .ok_or_else(|| Error::Manifest(format!("line {ln}: label {label:?} is not in the split")))?;
            let start = values.len();
            for f in fields {
                let v: f64 = f
                    .trim()
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| Error::format(Some(ln), format!("cannot parse {f:?} as a number")))?;
                values.push(v);
            }
            let width = values.len() - start;
            match dim {
                None if width == 0 => return Err(Error::format(Some(ln), "row has no feature values")),
                None => dim = Some(width),
                Some(d) if d != width => {
                    return Err(Error::format(
                        Some(ln),
                        format!("ragged row: expected {d} values, found {width}"),
                    ))
                }
                Some(_) => {}
            }
            labels.push(id);
        }
        let dim = dim.ok_or_else(|| Error::format(None, "no feature rows"))?;
        FeatureSet::new(dim, values, labels, classes.clone())
    }

    pub fn read_binary(r: impl Read, classes: &ClassTable) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != BINARY_MAGIC {
            return Err(Error::format(None, "bad magic in binary feature file"));
        }
        let n = read_u64(&mut r, "row count")? as usize;
        let m = read_u64(&mut r, "feature dimension")? as usize;
        if m == 0 {
            return Err(Error::format(None, "feature dimension is zero"));
        }
        let mut values = Vec::with_capacity(n.saturating_mul(m).min(1 << 24));
        let mut labels = Vec::with_capacity(n.min(1 << 20));
        let mut buf8 = [0u8; 8];
        for row in 0..n {
            let mut len = [0u8; 4];
            read_exact(&mut r, &mut len, "label length")?;
            let mut name = vec![0u8; u32::from_le_bytes(len) as usize];
            read_exact(&mut r, &mut name, "label")?;
            let name = String::from_utf8(name).map_err(|_| Error::format(Some(row + 1), "label is not UTF-8"))?;
            let id = classes
                .id_of(&name)
                .ok_or_else(|| Error::Manifest(format!("row {}: label {name:?} is not in the split", row + 1)))?;
            for _ in 0..m {
                read_exact(&mut r, &mut buf8, "feature value")?;
                let v = f64::from_le_bytes(buf8);
                if !v.is_finite() {
                    return Err(Error::format(Some(row + 1), "non-finite feature value"));
                }
                values.push(v);
            }
            labels.push(id);
        }
        if n == 0 {
            return Err(Error::format(None, "no feature rows"));
        }
        FeatureSet::new(m, values, labels, classes.clone())
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::format(None, format!("truncated binary feature file while reading {what}")))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Load a feature file in either encoding (detected from the magic bytes),
/// assigning roles from `split`.
pub fn load_features(path: &Path, split: &SplitSpec) -> Result<FeatureSet> {
    let classes = split.class_table()?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let set = if bytes.starts_with(BINARY_MAGIC) {
        FeatureSet::read_binary(bytes.as_slice(), &classes)
    } else {
        FeatureSet::read_csv(bytes.as_slice(), &classes)
    };
    set.map_err(|e| e.at_path(path))
}
