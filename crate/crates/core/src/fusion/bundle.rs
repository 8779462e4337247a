use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::autodiff::Tensor;
use crate::datasets::ClassTable;
use crate::error::{Error, Result};
use crate::types::{ClassId, Variation};
use crate::wordvec::WordVectorTable;

/// Semantic side of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticBundle {
    pub class: ClassId,
    pub name: String,
    /// Class-name embedding `e_c`.
    pub class_vec: Vec<f64>,
    /// Description embedding `e_p`.
    pub desc_vec: Vec<f64>,
    /// Fused output `e`, once computed.
    pub fused: Option<Vec<f64>>,
}

/// A bundle read so far: id, name, then `e_c` and `e_p` once seen.
type Partial = (ClassId, String, Option<Vec<f64>>, Option<Vec<f64>>);

/// Bundles for every class of a split, sorted by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSet {
    dim: usize,
    variation: Variation,
    bundles: Vec<SemanticBundle>,
}

impl SemanticSet {
    pub fn new(dim: usize, variation: Variation, mut bundles: Vec<SemanticBundle>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("semantic dimension must be positive"));
        }
        bundles.sort_by_key(|b| b.class);
        let mut ids = BTreeSet::new();
        for b in &bundles {
            if !ids.insert(b.class) {
                return Err(Error::Manifest(format!("duplicate semantics for class {}", b.name)));
            }
            let fused_len = b.fused.as_ref().map_or(dim, Vec::len);
            if b.class_vec.len() != dim || b.desc_vec.len() != dim || fused_len != dim {
                return Err(Error::Shape {
                    op: "semantic_bundle",
                    left: vec![dim],
                    right: vec![b.class_vec.len(), b.desc_vec.len(), fused_len],
                });
            }
        }
        Ok(SemanticSet {
            dim,
            variation,
            bundles,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variation(&self) -> Variation {
        self.variation
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SemanticBundle> {
        self.bundles.iter()
    }

    pub(crate) fn bundles_mut(&mut self) -> impl Iterator<Item = &mut SemanticBundle> {
        self.bundles.iter_mut()
    }

    pub fn get(&self, id: ClassId) -> Option<&SemanticBundle> {
        self.bundles
            .binary_search_by_key(&id, |b| b.class)
            .ok()
            .map(|i| &self.bundles[i])
    }

    pub fn require(&self, id: ClassId) -> Result<&SemanticBundle> {
        self.get(id)
            .ok_or_else(|| Error::Manifest(format!("class {id} has no semantics")))
    }

    /// Re-derive the bundles a given variation trains on. A full set
    /// (both vectors present) maps to:
    /// - `OnlyClassName`: `e_c` kept, `e_p` zeroed;
    /// - `OnlyChatGpt`: the description vector moved into the `e_c` slot, `e_p` zeroed;
    /// - `Ours`: unchanged.
    pub fn for_variation(&self, v: Variation) -> SemanticSet {
        let mut out = self.clone();
        out.variation = v;
        for b in &mut out.bundles {
            b.fused = None;
            match v {
                Variation::OnlyClassName => b.desc_vec = vec![0.0; self.dim],
                Variation::OnlyChatGpt => {
                    b.class_vec = std::mem::replace(&mut b.desc_vec, vec![0.0; self.dim]);
                }
                Variation::Ours => {}
            }
        }
        out
    }

    /// `(e_c, e_p)` rows for the given label sequence.
    pub fn rows_for(&self, labels: &[ClassId]) -> Result<(Tensor, Tensor)> {
        let mut c = Vec::with_capacity(labels.len() * self.dim);
        let mut p = Vec::with_capacity(labels.len() * self.dim);
        for &l in labels {
            let b = self.require(l)?;
            c.extend_from_slice(&b.class_vec);
            p.extend_from_slice(&b.desc_vec);
        }
        Ok((
            Tensor::matrix(labels.len(), self.dim, c)?,
            Tensor::matrix(labels.len(), self.dim, p)?,
        ))
    }

    /// CSV with a `#variation=` line, a header, then `name,c,...` and
    /// `name,p,...` rows per class.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut out = format!("#variation={}\nclass,part", self.variation);
        for i in 0..self.dim {
            out.push_str(&format!(",v{i}"));
        }
        out.push('\n');
        for b in &self.bundles {
            for (part, v) in [("c", &b.class_vec), ("p", &b.desc_vec)] {
                out.push_str(&b.name);
                out.push(',');
                out.push_str(part);
                for x in v.iter() {
                    out.push(',');
                    out.push_str(&x.to_string());
                }
                out.push('\n');
            }
        }
        w.write_all(out.as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(r: impl Read, classes: &ClassTable) -> Result<Self> {
        let mut variation = Variation::Ours;
        let mut dim = None;
        let mut partial: Vec<Partial> = Vec::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let ln = i + 1;
            let line = line.map_err(|e| Error::format(Some(ln), e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(v) = line.strip_prefix("#variation=") {
                variation = v
                    .parse()
                    .map_err(|_| Error::format(Some(ln), format!("bad variation {v:?}")))?;
                continue;
            }
            if line.starts_with('#') || line.starts_with("class,part") {
                continue;
            }
            let mut fields = line.split(',');
            let name = fields.next().unwrap_or("").trim();
            let part = fields.next().unwrap_or("").trim();
            let values: Vec<f64> = fields
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::format(Some(ln), format!("bad value {f:?}")))
                })
                .collect::<Result<_>>()?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::format(
                        Some(ln),
                        format!("expected {d} values, found {}", values.len()),
                    ))
                }
                _ => {}
            }
            let id = classes
                .id_of(name)
                .ok_or_else(|| Error::Manifest(format!("line {ln}: class {name:?} is not in the split")))?;
            let idx = match partial.iter().position(|p| p.0 == id) {
                Some(i) => i,
                None => {
                    partial.push((id, name.to_string(), None, None));
                    partial.len() - 1
                }
            };
            let slot = match part {
                "c" => &mut partial[idx].2,
                "p" => &mut partial[idx].3,
                other => {
                    return Err(Error::format(
                        Some(ln),
                        format!("unknown part {other:?}, expected c or p"),
                    ))
                }
            };
            if slot.replace(values).is_some() {
                return Err(Error::format(Some(ln), format!("duplicate {part} row for {name}")));
            }
        }
        let dim = dim.ok_or_else(|| Error::format(None, "no semantic rows"))?;
        let bundles = partial
            .into_iter()
            .map(|(class, name, c, p)| SemanticBundle {
                class,
                name,
                class_vec: c.unwrap_or_else(|| vec![0.0; dim]),
                desc_vec: p.unwrap_or_else(|| vec![0.0; dim]),
                fused: None,
            })
            .collect();
        SemanticSet::new(dim, variation, bundles)
    }

    pub fn load(path: &Path, classes: &ClassTable) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(f, classes).map_err(|e| e.at_path(path))
    }

    /// `class_id,name,v0..` rows of the fused vectors (for external plotting).
    pub fn write_fused_csv(&self, mut w: impl Write) -> Result<()> {
        let mut out = String::from("class_id,name");
        for i in 0..self.dim {
            out.push_str(&format!(",e{i}"));
        }
        out.push('\n');
        for b in &self.bundles {
            let fused = b
                .fused
                .as_ref()
                .ok_or_else(|| Error::contract(format!("class {} has not been fused", b.name)))?;
            out.push_str(&format!("{},{}", b.class, b.name));
            for x in fused {
                out.push(',');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        w.write_all(out.as_bytes()).map_err(|e| Error::io("<fused csv>", e))
    }
}

/// Word-vector semantics for every class of a split, laid out for `variation`.
///
/// `describe` looks up the stored description of a class. Descriptions are
/// only consulted when the variation uses them; a missing one is a manifest
/// error naming the class.
pub fn build_semantics(
    classes: &ClassTable,
    vectors: &WordVectorTable,
    variation: Variation,
    describe: impl Fn(&str) -> Result<Option<String>>,
) -> Result<SemanticSet> {
    let dim = vectors.dim();
    let mut bundles = Vec::with_capacity(classes.len());
    for c in classes.iter() {
        let desc = || -> Result<Vec<f64>> {
            let text =
                describe(&c.name)?.ok_or_else(|| Error::Manifest(format!("class {:?} has no description", c.name)))?;
            vectors.embed_text(&text)
        };
        let class_vec = vectors.embed_text(&c.name)?;
        let desc_vec = if variation == Variation::OnlyClassName {
            vec![0.0; dim]
        } else {
            desc()?
        };
        bundles.push(SemanticBundle {
            class: c.id,
            name: c.name.clone(),
            class_vec,
            desc_vec,
            fused: None,
        });
    }
    Ok(SemanticSet::new(dim, Variation::Ours, bundles)?.for_variation(variation))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> (SemanticSet, ClassTable) {
        let t = ClassTable::new(&["a", "b"], &["c"]).unwrap();
        let bundles = t
            .iter()
            .map(|c| SemanticBundle {
                class: c.id,
                name: c.name.clone(),
                class_vec: vec![c.id.0 as f64, 1.0],
                desc_vec: vec![0.5, -(c.id.0 as f64)],
                fused: None,
            })
            .collect();
        (SemanticSet::new(2, Variation::Ours, bundles).unwrap(), t)
    }

    #[test]
    fn file_roundtrip() {
        let (s, t) = set();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(SemanticSet::read_from(buf.as_slice(), &t).unwrap(), s);
    }

    #[test]
    fn variations_rearrange_slots() {
        let (s, _) = set();
        let only_name = s.for_variation(Variation::OnlyClassName);
        let b = only_name.get(ClassId(2)).unwrap();
        assert_eq!(b.class_vec, vec![2.0, 1.0]);
        assert_eq!(b.desc_vec, vec![0.0, 0.0]);

        let only_desc = s.for_variation(Variation::OnlyChatGpt);
        let b = only_desc.get(ClassId(2)).unwrap();
        assert_eq!(b.class_vec, vec![0.5, -2.0]);
        assert_eq!(b.desc_vec, vec![0.0, 0.0]);
        assert_eq!(only_desc.variation(), Variation::OnlyChatGpt);
    }

    #[test]
    fn built_from_word_vectors() {
        let t = ClassTable::new(&["night stand", "sofa"], &["bed"]).unwrap();
        let wv =
            WordVectorTable::from_reader("night 1 0\nstand 0 1\nsofa 2 2\nbed 4 0\nsoft 0 4\nflat 2 0\n".as_bytes())
                .unwrap();
        let describe = |n: &str| -> Result<Option<String>> {
            Ok(match n {
                "bed" => Some("Soft and flat.".into()),
                "sofa" => Some("Soft.".into()),
                _ => None,
            })
        };
        let only = build_semantics(&t, &wv, Variation::OnlyClassName, describe).unwrap();
        assert_eq!(only.get(ClassId(0)).unwrap().class_vec, vec![0.5, 0.5]);
        assert_eq!(only.get(ClassId(2)).unwrap().desc_vec, vec![0.0, 0.0]);

        let err = build_semantics(&t, &wv, Variation::Ours, describe).unwrap_err();
        assert!(matches!(err, Error::Manifest(_)));
        assert!(err.to_string().contains("night stand"));

        let t2 = ClassTable::new(&["sofa"], &["bed"]).unwrap();
        let ours = build_semantics(&t2, &wv, Variation::Ours, describe).unwrap();
        let bed = ours.get(ClassId(1)).unwrap();
        assert_eq!(
            (bed.class_vec.clone(), bed.desc_vec.clone()),
            (vec![4.0, 0.0], vec![1.0, 2.0])
        );
        let desc_only = build_semantics(&t2, &wv, Variation::OnlyChatGpt, describe).unwrap();
        assert_eq!(desc_only.get(ClassId(1)).unwrap().class_vec, vec![1.0, 2.0]);
        assert_eq!(desc_only.variation(), Variation::OnlyChatGpt);
    }

    #[test]
    fn unknown_class_in_file() {
        let (_, t) = set();
        let text = "class,part,v0\nzzz,c,1\n";
        assert!(matches!(
            SemanticSet::read_from(text.as_bytes(), &t),
            Err(Error::Manifest(_))
        ));
    }

    #[test]
    fn fused_export_requires_fusion() {
        let (s, _) = set();
        assert!(s.write_fused_csv(Vec::new()).is_err());
        let f = crate::fusion::FusionParams::identity(2, 1.0).unwrap();
        let mut out = Vec::new();
        f.apply(&s).unwrap().write_fused_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0,a,0.5,1");
        assert_eq!(text.lines().count(), 4);
    }
}
