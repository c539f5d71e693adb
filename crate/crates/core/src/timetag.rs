//! Detector click records shared by the simulator and the analysis code.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants::PS_PER_S;

/// One detector click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeTag {
    pub detector_id: u32,
    pub timestamp: i64,
}

impl TimeTag {
    pub fn new(detector_id: u32, timestamp: i64) -> Self {
        Self { detector_id, timestamp }
    }
}

/// Clicks of one or more detectors over an acquisition of known length.
///
/// `metadata` carries free-form `field=value` pairs (seed, rates, experiment
/// name) that travel with the stream through the file formats.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeTagStream {
    pub tags: Vec<TimeTag>,
    pub duration_ps: i64,
    pub metadata: BTreeMap<String, String>,
}

impl TimeTagStream {
    pub fn new(tags: Vec<TimeTag>, duration_ps: i64) -> Self {
        Self { tags, duration_ps, metadata: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.tags.windows(2).all(|w| w[0].timestamp <= w[1].timestamp)
    }

    /// Stable sort by timestamp, ties broken by detector id.
    pub fn sort(&mut self) {
        self.tags.sort_by_key(|t| (t.timestamp, t.detector_id));
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.tags.iter().map(|t| t.timestamp).collect()
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    /// Mean click rate in counts per second.
    pub fn singles_rate(&self) -> f64 {
        if self.duration_ps <= 0 {
            return 0.0;
        }
        self.tags.len() as f64 / self.duration_s()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    /// Merge several sorted tag lists into one sorted stream.
    pub fn merged(parts: impl IntoIterator<Item = Vec<TimeTag>>, duration_ps: i64) -> Self {
        let mut tags: Vec<TimeTag> = parts.into_iter().flatten().collect();
        tags.sort_by_key(|t| (t.timestamp, t.detector_id));
        Self::new(tags, duration_ps)
    }
}
