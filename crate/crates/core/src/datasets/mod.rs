//! Feature sets, split manifests, and seeded synthetic benchmarks.

mod features;
mod split;
mod synthetic;

pub use features::{load_features, FeatureSet, BINARY_MAGIC};
pub use split::SplitSpec;
pub use synthetic::{synth_dataset, SynthConfig, SyntheticData};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::types::{ClassId, Role};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassInfo {
    pub id: ClassId,
    pub name: String,
    pub role: Role,
}

/// Class names and roles for one split. Seen classes get ids `0..S`,
/// unseen classes `S..S+U`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassTable {
    classes: Vec<ClassInfo>,
    by_name: HashMap<String, ClassId>,
}

impl ClassTable {
    pub fn new<S: AsRef<str>>(seen: &[S], unseen: &[S]) -> Result<Self> {
        let mut t = ClassTable::default();
        let entries = seen
            .iter()
            .map(|s| (s, Role::Seen))
            .chain(unseen.iter().map(|s| (s, Role::Unseen)));
        for (name, role) in entries {
            let name = name.as_ref().trim();
            if name.is_empty() {
                return Err(Error::Manifest("empty class name".into()));
            }
            if let Some(&prev) = t.by_name.get(name) {
                let prev_role = t.classes[prev.0 as usize].role;
                return Err(if prev_role != role {
                    Error::SplitViolation(format!("class {name:?} is listed as both seen and unseen"))
                } else {
                    Error::Manifest(format!("class {name:?} listed twice"))
                });
            }
            let id = ClassId(t.classes.len() as u32);
            t.by_name.insert(name.to_string(), id);
            t.classes.push(ClassInfo {
                id,
                name: name.to_string(),
                role,
            });
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, id: ClassId) -> Option<&ClassInfo> {
        self.classes.get(id.0 as usize)
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.by_name.get(name.trim()).copied()
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.classes[id.0 as usize].name
    }

    pub fn role(&self, id: ClassId) -> Role {
        self.classes[id.0 as usize].role
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClassInfo> {
        self.classes.iter()
    }

    pub fn ids_with(&self, role: Role) -> Vec<ClassId> {
        self.classes.iter().filter(|c| c.role == role).map(|c| c.id).collect()
    }

    pub fn all_ids(&self) -> Vec<ClassId> {
        self.classes.iter().map(|c| c.id).collect()
    }

    /// Re-check that no name carries both roles.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut roles: HashMap<&str, Role> = HashMap::new();
        for c in &self.classes {
            if let Some(r) = roles.insert(c.name.as_str(), c.role) {
                if r != c.role {
                    return Err(Error::SplitViolation(format!(
                        "class {:?} is both seen and unseen",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }
}
