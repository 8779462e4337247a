use std::path::{Path, PathBuf};

use super::ClassTable;
use crate::error::{Error, Result};

/// A seen/unseen split manifest.
///
/// Text format, one `key = value` per line, `#` starts a comment:
///
/// ```text
/// name = modelnet40
/// seen = airplane, bench, bookshelf
/// seen = bottle, bowl            # repeated list keys append
/// unseen = bathtub, bed
/// train_features = features/train.csv
/// test_features = features/test.bin
/// descriptions = ../descriptions
/// ```
///
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitSpec {
    pub name: String,
    pub seen: Vec<String>,
    pub unseen: Vec<String>,
    pub train_features: Option<PathBuf>,
    pub test_features: Option<PathBuf>,
    pub descriptions: Option<PathBuf>,
}

impl SplitSpec {
    pub fn new(name: impl Into<String>, seen: Vec<String>, unseen: Vec<String>) -> Result<Self> {
        let s = SplitSpec {
            name: name.into(),
            seen,
            unseen,
            ..Default::default()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base).map_err(|e| e.at_path(path))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut s = SplitSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(Some(ln), format!("expected key = value, got {line:?}")))?;
            let value = value.trim();
            let list = || {
                value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(String::from)
            };
            match key.trim() {
                "name" => s.name = value.to_string(),
                "seen" => s.seen.extend(list()),
                "unseen" => s.unseen.extend(list()),
                "train_features" => s.train_features = Some(base.join(value)),
                "test_features" => s.test_features = Some(base.join(value)),
                "descriptions" => s.descriptions = Some(base.join(value)),
                other => return Err(Error::format(Some(ln), format!("unknown manifest key {other:?}"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seen.is_empty() || self.unseen.is_empty() {
            return Err(Error::Manifest(format!(
                "split {:?} needs non-empty seen and unseen class lists",
                self.name
            )));
        }
        self.class_table().map(|_| ())
    }

    pub fn class_table(&self) -> Result<ClassTable> {
        ClassTable::new(&self.seen, &self.unseen)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("name = {}\n", self.name);
        out.push_str(&format!("seen = {}\n", self.seen.join(", ")));
        out.push_str(&format!("unseen = {}\n", self.unseen.join(", ")));
        let mut path_line = |k: &str, p: &Option<PathBuf>| {
            if let Some(p) = p {
                out.push_str(&format!("{k} = {}\n", p.display()));
            }
        };
        path_line("train_features", &self.train_features);
        path_line("test_features", &self.test_features);
        path_line("descriptions", &self.descriptions);
        out
    }

    /// All class names, seen first.
    pub fn all_classes(&self) -> impl Iterator<Item = &str> {
        self.seen.iter().chain(&self.unseen).map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_paths() {
        let text = "# demo\nname = toy\nseen = a, b\nseen = c\nunseen = d\ntrain_features = f/train.csv\n";
        let s = SplitSpec::parse(text, Path::new("/data")).unwrap();
        assert_eq!(s.seen, vec!["a", "b", "c"]);
        assert_eq!(s.unseen, vec!["d"]);
        assert_eq!(s.train_features.as_deref(), Some(Path::new("/data/f/train.csv")));
        let t = s.class_table().unwrap();
        assert_eq!(t.id_of("d").unwrap().0, 3);
    }

    #[test]
    fn overlapping_lists_are_rejected() {
        let text = "name = bad\nseen = a, b\nunseen = b\n";
        assert!(matches!(
            SplitSpec::parse(text, Path::new(".")),
            Err(Error::SplitViolation(_))
        ));
    }

    #[test]
    fn empty_unseen_is_rejected() {
        assert!(SplitSpec::parse("name = x\nseen = a\n", Path::new(".")).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let s = SplitSpec::new("toy", vec!["a".into(), "b".into()], vec!["c".into()]).unwrap();
        assert_eq!(SplitSpec::parse(&s.to_text(), Path::new(".")).unwrap(), s);
    }
}
