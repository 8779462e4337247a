use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &str = "semzsl-params 1";

/// Named trainable tensors and their gradients.
///
/// Names are kept sorted, so iteration order (and therefore every checkpoint
/// written from a store) is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    grads: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Add a new parameter. Names must be unique and whitespace-free.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::contract(format!("invalid parameter name {name:?}")));
        }
        if !value.is_finite() {
            return Err(Error::contract(format!("parameter {name} has non-finite entries")));
        }
        if self.params.contains_key(&name) {
            return Err(Error::contract(format!("duplicate parameter {name}")));
        }
        self.params.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn set_grad(&mut self, name: &str, grad: Tensor) -> Result<()> {
        let p = self.get(name)?;
        if p.shape() != grad.shape() {
            return Err(Error::Shape {
                op: "set_grad",
                left: p.shape().to_vec(),
                right: grad.shape().to_vec(),
            });
        }
        self.grads.insert(name.to_string(), grad);
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        self.grads.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    /// Total number of scalar entries.
    pub fn num_values(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Move every parameter of `other` in, prefixing names with `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: &ParamStore) -> Result<()> {
        for (name, t) in other.iter() {
            self.insert(format!("{prefix}{name}"), t.clone())?;
        }
        Ok(())
    }

    /// The parameters whose names start with `prefix`, prefix stripped.
    pub fn extract(&self, prefix: &str) -> ParamStore {
        let params = self
            .params
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
            .collect();
        ParamStore {
            params,
            grads: BTreeMap::new(),
        }
    }

    /// Serialize the parameters (gradients are not saved).
    ///
    /// Layout, UTF-8 text:
    /// ```text
    /// semzsl-params 1
    /// <count>
    /// <name> <rank> <dim_1> ... <dim_rank>      repeated <count> times,
    /// <v_1> <v_2> ... <v_n>                     each followed by its values
    /// ```
    /// Values use Rust's shortest round-trip `f64` formatting, so a
    /// save/load cycle is lossless.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut out = String::new();
        writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
        writeln!(out, "{}", self.params.len()).unwrap();
        for (name, t) in &self.params {
            write!(out, "{name} {}", t.rank()).unwrap();
            for d in t.shape() {
                write!(out, " {d}").unwrap();
            }
            out.push('\n');
            let mut first = true;
            for v in t.data() {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        w.write_all(out.as_bytes())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(r).lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(Error::format(Some(i + 1), e.to_string())),
                None => Err(Error::format(
                    None,
                    format!("unexpected end of checkpoint, expected {what}"),
                )),
            }
        };
        let (ln, magic) = next("header")?;
        if magic.trim() != CHECKPOINT_MAGIC {
            return Err(Error::format(Some(ln), "not a parameter checkpoint"));
        }
        let (ln, count) = next("parameter count")?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| Error::format(Some(ln), "bad parameter count"))?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let (ln, head) = next("parameter header")?;
            let mut parts = head.split_whitespace();
            let name = parts
                .next()
                .ok_or_else(|| Error::format(Some(ln), "missing parameter name"))?;
            let rank: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format(Some(ln), "bad rank"))?;
            let shape: Vec<usize> = parts
                .map(|s| s.parse().map_err(|_| Error::format(Some(ln), "bad dimension")))
                .collect::<Result<_>>()?;
            if shape.len() != rank {
                return Err(Error::format(Some(ln), "rank does not match dimension count"));
            }
            let (ln, body) = next("parameter values")?;
            let data: Vec<f64> = body
                .split_whitespace()
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::format(Some(ln), format!("bad value {s:?}")))
                })
                .collect::<Result<_>>()?;
            let t = Tensor::new(shape, data).map_err(|e| Error::format(Some(ln), e.to_string()))?;
            store
                .insert(name, t)
                .map_err(|e| Error::format(Some(ln), e.to_string()))?;
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(f).map_err(|e| e.at_path(path))
    }
}
