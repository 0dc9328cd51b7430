//! Name-keyed factory tables used to select strategy implementations at
//! runtime.

use std::collections::BTreeMap;

use crate::{Error, Result};

#[derive(Clone)]
pub struct Registry<F> {
    what: &'static str,
    entries: BTreeMap<String, F>,
}

impl<F: Copy> Registry<F> {
    pub fn new(what: &'static str) -> Self {
        Self {
            what,
            entries: BTreeMap::new(),
        }
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: impl Into<String>, factory: F) -> &mut Self {
        self.entries.insert(name.into(), factory);
        self
    }

    pub fn with(mut self, name: impl Into<String>, factory: F) -> Self {
        self.register(name, factory);
        self
    }

    pub fn get(&self, name: &str) -> Result<F> {
        self.entries.get(name).copied().ok_or_else(|| {
            Error::config(format!(
                "unknown {} {name:?}; known: {}",
                self.what,
                self.names().join(", ")
            ))
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl<F> std::fmt::Debug for Registry<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("what", &self.what)
            .field("names", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_unknown_names() {
        let reg = Registry::<fn() -> u8>::new("widget")
            .with("a", || 1)
            .with("b", || 2);
        assert_eq!(reg.get("b").unwrap()(), 2);
        assert_eq!(reg.names(), vec!["a", "b"]);
        let err = reg.get("c").unwrap_err().to_string();
        assert!(err.contains("widget") && err.contains("a, b"), "{err}");
    }
}
