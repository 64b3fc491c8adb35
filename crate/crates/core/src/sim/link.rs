//! Directed point-to-point link with a drop-tail transmit queue.

use std::collections::VecDeque;

use super::NS_PER_S;

#[derive(Debug)]
pub struct Link {
    pub bandwidth_bps: f64,
    pub delay_ns: u64,
    queue_limit: usize,
    // Transmission end times of queued packets, oldest first.
    in_flight: VecDeque<u64>,
    pub sent: u64,
    pub dropped: u64,
}

impl Link {
    pub fn new(bandwidth_bps: f64, delay_ns: u64, queue_limit: usize) -> Self {
        Link {
            bandwidth_bps,
            delay_ns,
            queue_limit,
            in_flight: VecDeque::new(),
            sent: 0,
            dropped: 0,
        }
    }

    pub fn serialization_ns(&self, bytes: u32) -> u64 {
        ((bytes as f64 * 8.0 / self.bandwidth_bps) * NS_PER_S as f64).round() as u64
    }

    /// Enqueue a packet at `now`; returns its arrival time at the far end,
    /// or `None` if the queue is full.
    pub fn transmit(&mut self, now: u64, bytes: u32) -> Option<u64> {
        while self.in_flight.front().is_some_and(|&end| end <= now) {
            self.in_flight.pop_front();
        }
        if self.in_flight.len() >= self.queue_limit {
            self.dropped += 1;
            return None;
        }
        let start = self.in_flight.back().map_or(now, |&end| end.max(now));
        let end = start + self.serialization_ns(bytes);
        self.in_flight.push_back(end);
        self.sent += 1;
        Some(end + self.delay_ns)
    }

    pub fn queued(&self) -> usize {
        self.in_flight.len()
    }
}
