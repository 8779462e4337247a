//! Pretrained word vectors in the plain-text `token v1 ... vd` format.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

/// Immutable token -> vector lookup. Tokens are stored lowercased.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

/// Lowercase and split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl WordVectorTable {
    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f).map_err(|e| e.at_path(path))
    }

    /// Parse the text format. An optional `N d` header line is skipped;
    /// duplicate tokens keep their first occurrence.
    pub fn from_reader(r: impl Read) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut entries = HashMap::new();
        let mut seen_content = false;
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let ln = i + 1;
            let line = line.map_err(|e| Error::format(Some(ln), e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line");
            let rest: Vec<&str> = fields.collect();

            if !seen_content {
                seen_content = true;
                if let [d] = rest.as_slice() {
                    if let (Ok(_), Ok(d)) = (token.parse::<usize>(), d.parse::<usize>()) {
                        if d == 0 {
                            return Err(Error::format(Some(ln), "header declares dimension 0"));
                        }
                        dim = Some(d);
                        continue;
                    }
                }
            }

            let vector: Vec<f64> = rest
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::format(Some(ln), format!("cannot parse {s:?} as a number")))
                })
                .collect::<Result<_>>()?;
            if vector.is_empty() {
                return Err(Error::format(Some(ln), format!("token {token:?} has no vector")));
            }
            match dim {
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(Error::format(
                        Some(ln),
                        format!("dimension mismatch: expected {d} values, found {}", vector.len()),
                    ))
                }
                Some(_) => {}
            }
            entries.entry(token.to_lowercase()).or_insert(vector);
        }
        match dim {
            Some(dim) if !entries.is_empty() => Ok(WordVectorTable { dim, entries }),
            _ => Err(Error::format(None, "no word vectors found")),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    /// Mean of the vectors of every in-vocabulary token of `text`.
    ///
    /// Tokens are summed in sorted order so the result does not depend on
    /// word order, bit for bit.
    pub fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        let mut hits: Vec<(String, &Vec<f64>)> = tokenize(text)
            .into_iter()
            .filter_map(|t| self.entries.get(&t).map(|v| (t, v)))
            .collect();
        if hits.is_empty() {
            return Err(Error::OutOfVocabulary(text.to_string()));
        }
        hits.sort_by(|a, b| a.0.cmp(&b.0));
        let mut acc = vec![0.0; self.dim];
        for (_, v) in &hits {
            for (a, x) in acc.iter_mut().zip(v.iter()) {
                *a += x;
            }
        }
        let n = hits.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> WordVectorTable {
        WordVectorTable::from_reader("cat 1.0 0.0\ndog 0.0 1.0\n".as_bytes()).unwrap()
    }

    #[test]
    fn parses_two_lines() {
        let t = table();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn header_is_skipped() {
        let t = WordVectorTable::from_reader("2 2\ncat 1.0 0.0\ndog 0.0 1.0\n".as_bytes()).unwrap();
        assert_eq!(t, table());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = WordVectorTable::from_reader("a 1 2\nb 1 2 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(2), .. }), "{err}");
    }

    #[test]
    fn bad_float_reports_line() {
        let err = WordVectorTable::from_reader("a 1 2\n\nb 1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(3), .. }), "{err}");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(WordVectorTable::from_reader("".as_bytes()).is_err());
        assert!(WordVectorTable::from_reader("\n\n".as_bytes()).is_err());
    }

    #[test]
    fn duplicates_keep_first_and_lowercase() {
        let t = WordVectorTable::from_reader("Cat 1 0\ncat 0 1\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("CAT").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn embed_examples() {
        let t = table();
        assert_eq!(t.embed_text("cat cat").unwrap(), vec![1.0, 0.0]);
        assert_eq!(t.embed_text("cat dog").unwrap(), vec![0.5, 0.5]);
        assert!(matches!(
            t.embed_text("xyzzy qwerty"),
            Err(Error::OutOfVocabulary(s)) if s == "xyzzy qwerty"
        ));
    }

    #[test]
    fn multiword_class_names_split_on_punctuation() {
        assert_eq!(tokenize("night_stand"), vec!["night", "stand"]);
        assert_eq!(tokenize("Night  Stand."), vec!["night", "stand"]);
        assert_eq!(tokenize("blue+whale"), vec!["blue", "whale"]);
    }

    fn vocab() -> WordVectorTable {
        let text = "alpha 0.1 -2.5 3.3\nbeta 1e-3 7.25 -0.125\ngamma 4.0 0.3 0.7\ndelta -1.1 2.2 -3.3\n";
        WordVectorTable::from_reader(text.as_bytes()).unwrap()
    }

    proptest! {
        #[test]
        fn order_does_not_matter(idx in proptest::collection::vec(0usize..4, 1..12), seed in any::<u64>()) {
            let words = ["alpha", "beta", "gamma", "delta"];
            let t = vocab();
            let mut toks: Vec<&str> = idx.iter().map(|&i| words[i]).collect();
            let a = t.embed_text(&toks.join(" ")).unwrap();
            // deterministic shuffle from the seed
            let mut s = seed;
            for i in (1..toks.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                toks.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = t.embed_text(&toks.join(" ")).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn oov_tokens_are_ignored(idx in proptest::collection::vec(0usize..4, 1..6)) {
            let words = ["alpha", "beta", "gamma", "delta"];
            let t = vocab();
            let text = idx.iter().map(|&i| words[i]).collect::<Vec<_>>().join(" ");
            let with_oov = format!("{text} zzzunknown");
            prop_assert_eq!(t.embed_text(&text).unwrap(), t.embed_text(&with_oov).unwrap());
        }

        #[test]
        fn single_token_is_the_entry(i in 0usize..4) {
            let words = ["alpha", "beta", "gamma", "delta"];
            let t = vocab();
            prop_assert_eq!(t.embed_text(words[i]).unwrap(), t.get(words[i]).unwrap().to_vec());
        }
    }
}
