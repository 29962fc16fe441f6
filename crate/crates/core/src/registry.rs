//! Name-keyed registries for runtime-selectable strategies.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Maps strategy names to values (usually factories or boxed trait objects).
#[derive(Clone)]
pub struct Registry<V> {
    kind: &'static str,
    entries: BTreeMap<String, V>,
}

impl<V> Registry<V> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `value` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: impl Into<String>, value: V) -> &mut Self {
        self.entries.insert(name.into().to_ascii_lowercase(), value);
        self
    }

    pub fn get(&self, name: &str) -> Result<&V> {
        self.entries
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(&name.to_ascii_lowercase())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl<V> std::fmt::Debug for Registry<V> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}
