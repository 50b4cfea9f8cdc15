use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Fitness by canonical genome hash. The first recorded value for a key is
/// final; later writes are ignored so training noise cannot rewrite history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FitnessCache {
    entries: BTreeMap<u64, f64>,
}

impl FitnessCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: u64) -> Option<f64> {
        self.entries.get(&key).copied()
    }

    /// Returns `true` if the value was stored, `false` if the key was already present.
    pub fn put(&mut self, key: u64, fitness: f64) -> bool {
        match self.entries.entry(key) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(fitness);
                true
            }
            std::collections::btree_map::Entry::Occupied(_) => false,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_then_get() {
        let mut c = FitnessCache::new();
        assert_eq!(c.get(7), None);
        assert!(c.put(7, 0.9));
        assert_eq!(c.get(7), Some(0.9));
    }

    #[test]
    fn first_write_wins() {
        let mut c = FitnessCache::new();
        c.put(7, 0.9);
        assert!(!c.put(7, 0.5));
        assert_eq!(c.get(7), Some(0.9));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn survives_json() {
        let mut c = FitnessCache::new();
        c.put(u64::MAX, 0.25);
        c.put(1, 0.0);
        let back: FitnessCache = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
