//! Pending interest table with a fixed entry timeout.

use std::collections::{HashMap, VecDeque};

use super::name::ContentKey;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitEntry {
    /// Ingress faces waiting for the data, in arrival order.
    pub faces: Vec<u16>,
    pub created: u64,
    generation: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PitInsert {
    /// New entry; the interest must be forwarded.
    Created,
    /// Appended a new ingress face to a pending entry.
    Aggregated,
    /// The face is already waiting: a retransmission.
    Duplicate,
    /// Table full; the interest is dropped.
    Full,
}

#[derive(Debug)]
pub struct PitTable {
    capacity: usize,
    timeout_ns: u64,
    entries: HashMap<ContentKey, PitEntry>,
    // Expiry order equals creation order because the timeout is fixed.
    expiry: VecDeque<(u64, ContentKey, u64)>,
    next_generation: u64,
    pub expired: u64,
    pub dropped_full: u64,
}

impl PitTable {
    pub fn new(capacity: usize, timeout_ns: u64) -> Self {
        PitTable {
            capacity,
            timeout_ns,
            entries: HashMap::new(),
            expiry: VecDeque::new(),
            next_generation: 0,
            expired: 0,
            dropped_full: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: ContentKey) -> Option<&PitEntry> {
        self.entries.get(&key)
    }

    /// Remove entries whose lifetime ended at or before `now`.
    pub fn purge(&mut self, now: u64) {
        while let Some(&(at, key, generation)) = self.expiry.front() {
            if at > now {
                break;
            }
            self.expiry.pop_front();
            if self.entries.get(&key).is_some_and(|e| e.generation == generation) {
                self.entries.remove(&key);
                self.expired += 1;
            }
        }
    }

    pub fn insert(&mut self, key: ContentKey, face: u16, now: u64) -> PitInsert {
        self.purge(now);
        if let Some(e) = self.entries.get_mut(&key) {
            if e.faces.contains(&face) {
                return PitInsert::Duplicate;
            }
            e.faces.push(face);
            return PitInsert::Aggregated;
        }
        if self.entries.len() >= self.capacity {
            self.dropped_full += 1;
            return PitInsert::Full;
        }
        let generation = self.next_generation;
        self.next_generation += 1;
        self.entries.insert(
            key,
            PitEntry {
                faces: vec![face],
                created: now,
                generation,
            },
        );
        self.expiry.push_back((now + self.timeout_ns, key, generation));
        PitInsert::Created
    }

    /// Consume the entry satisfied by arriving data.
    pub fn satisfy(&mut self, key: ContentKey, now: u64) -> Option<PitEntry> {
        self.purge(now);
        self.entries.remove(&key)
    }

    pub fn available_rate(&self) -> f64 {
        if self.capacity == 0 {
            return 0.0;
        }
        (self.capacity - self.entries.len()) as f64 / self.capacity as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(i: u64) -> ContentKey {
        ContentKey::new(0, i)
    }

    #[test]
    fn aggregation_and_duplicates() {
        let mut pit = PitTable::new(10, 100);
        assert_eq!(pit.insert(k(1), 0, 0), PitInsert::Created);
        assert_eq!(pit.insert(k(1), 1, 1), PitInsert::Aggregated);
        assert_eq!(pit.insert(k(1), 0, 2), PitInsert::Duplicate);
        assert_eq!(pit.len(), 1);
        assert_eq!(pit.satisfy(k(1), 3).unwrap().faces, vec![0, 1]);
        assert!(pit.satisfy(k(1), 4).is_none());
    }

    #[test]
    fn full_table_drops() {
        let mut pit = PitTable::new(2, 100);
        pit.insert(k(1), 0, 0);
        pit.insert(k(2), 0, 0);
        assert_eq!(pit.insert(k(3), 0, 0), PitInsert::Full);
        assert_eq!(pit.available_rate(), 0.0);
        assert_eq!(pit.dropped_full, 1);
        // Aggregation onto an existing entry still works when full.
        assert_eq!(pit.insert(k(2), 1, 0), PitInsert::Aggregated);
    }

    #[test]
    fn entries_expire() {
        let mut pit = PitTable::new(2, 100);
        pit.insert(k(1), 0, 0);
        pit.insert(k(2), 0, 50);
        pit.purge(99);
        assert_eq!(pit.len(), 2);
        pit.purge(100);
        assert_eq!(pit.len(), 1);
        assert_eq!(pit.expired, 1);
        assert_eq!(pit.insert(k(3), 0, 120), PitInsert::Created);
    }

    #[test]
    fn satisfied_then_recreated_entry_keeps_its_own_lifetime() {
        let mut pit = PitTable::new(4, 100);
        pit.insert(k(1), 0, 0);
        pit.satisfy(k(1), 10);
        pit.insert(k(1), 0, 90);
        pit.purge(100);
        assert!(pit.get(k(1)).is_some());
        pit.purge(190);
        assert!(pit.get(k(1)).is_none());
        assert_eq!(pit.expired, 1);
    }
}
