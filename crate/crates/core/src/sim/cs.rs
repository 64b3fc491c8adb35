//! LRU content store.

use std::num::NonZeroUsize;

use lru::LruCache;

use super::name::ContentKey;

#[derive(Debug)]
pub struct ContentStore {
    entries: Option<LruCache<ContentKey, ()>>,
    pub hits: u64,
    pub misses: u64,
}

impl ContentStore {
    /// A zero capacity store caches nothing.
    pub fn new(capacity: usize) -> Self {
        ContentStore {
            entries: NonZeroUsize::new(capacity).map(LruCache::new),
            hits: 0,
            misses: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.entries.as_ref().map_or(0, |c| c.cap().get())
    }

    pub fn len(&self) -> usize {
        self.entries.as_ref().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hit refreshes recency.
    pub fn lookup(&mut self, key: ContentKey) -> bool {
        let hit = self.entries.as_mut().is_some_and(|c| c.get(&key).is_some());
        if hit {
            self.hits += 1;
        } else {
            self.misses += 1;
        }
        hit
    }

    pub fn insert(&mut self, key: ContentKey) {
        if let Some(c) = self.entries.as_mut() {
            c.put(key, ());
        }
    }

    pub fn contains(&self, key: ContentKey) -> bool {
        self.entries.as_ref().is_some_and(|c| c.contains(&key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(i: u64) -> ContentKey {
        ContentKey::new(0, i)
    }

    #[test]
    fn capacity_one_evicts() {
        let mut cs = ContentStore::new(1);
        cs.insert(k(1));
        cs.insert(k(2));
        assert!(!cs.lookup(k(1)));
        assert!(cs.lookup(k(2)));
        assert_eq!((cs.hits, cs.misses), (1, 1));
    }

    #[test]
    fn refreshed_entry_survives() {
        let mut cs = ContentStore::new(2);
        cs.insert(k(1));
        cs.insert(k(2));
        assert!(cs.lookup(k(1)));
        cs.insert(k(3));
        assert!(cs.contains(k(1)));
        assert!(!cs.contains(k(2)));
        assert!(cs.contains(k(3)));
    }

    #[test]
    fn zero_capacity_never_hits() {
        let mut cs = ContentStore::new(0);
        cs.insert(k(1));
        assert!(!cs.lookup(k(1)));
        assert_eq!(cs.len(), 0);
    }

    /// Reference LRU: a vector ordered from least to most recent.
    fn naive(trace: &[(bool, u64)], cap: usize) -> Vec<bool> {
        let mut order: Vec<u64> = Vec::new();
        let mut out = Vec::new();
        for &(is_insert, key) in trace {
            let pos = order.iter().position(|&x| x == key);
            if is_insert {
                if let Some(p) = pos {
                    order.remove(p);
                } else if order.len() == cap {
                    order.remove(0);
                }
                order.push(key);
            } else {
                out.push(pos.is_some());
                if let Some(p) = pos {
                    order.remove(p);
                    order.push(key);
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn matches_reference_lru(trace in prop::collection::vec((any::<bool>(), 0u64..20), 0..400), cap in 1usize..8) {
            let mut cs = ContentStore::new(cap);
            let mut got = Vec::new();
            for &(is_insert, key) in &trace {
                if is_insert {
                    cs.insert(k(key));
                } else {
                    got.push(cs.lookup(k(key)));
                }
                prop_assert!(cs.len() <= cap);
            }
            prop_assert_eq!(got, naive(&trace, cap));
        }
    }
}
