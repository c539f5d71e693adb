//! Start–multistop correlation of two time-tag streams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timetag::TimeTagStream;

/// Binned `t_b - t_a` coincidences with the metadata needed to normalize
/// and dark-correct them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: i64,
    /// Left edge of bin 0.
    pub origin_ps: i64,
    pub counts: Vec<u64>,
    pub integration_time_s: f64,
    /// Singles rates of the start and stop streams, counts/s.
    pub singles_rates: (f64, f64),
    /// Repetition period of the excitation, ps (0 when not pulsed).
    pub period_ps: i64,
}

impl CoincidenceHistogram {
    pub fn new(bin_width_ps: i64, origin_ps: i64, counts: Vec<u64>) -> Result<Self> {
        if bin_width_ps <= 0 {
            return Err(Error::OutOfRange { name: "bin_width_ps", detail: format!("{bin_width_ps} must be > 0") });
        }
        Ok(Self { bin_width_ps, origin_ps, counts, integration_time_s: 0.0, singles_rates: (0.0, 0.0), period_ps: 0 })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_start(&self, j: usize) -> i64 {
        self.origin_ps + j as i64 * self.bin_width_ps
    }

    pub fn bin_center(&self, j: usize) -> f64 {
        self.bin_start(j) as f64 + 0.5 * self.bin_width_ps as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lowest and highest covered times.
    pub fn span(&self) -> (i64, i64) {
        (self.origin_ps, self.bin_start(self.counts.len()))
    }
}

/// Correlates stream `b` against start stream `a`.
///
/// Bins are centred on multiples of `bin_width_ps` and assigned by
/// rounding `|Δ|` half away from zero, so swapping `a` and `b` mirrors the
/// histogram exactly. Delays up to `window_ps` (rounded up to a whole bin)
/// are kept on both sides.
pub fn correlate(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width_ps: i64,
    window_ps: i64,
) -> Result<CoincidenceHistogram> {
    if bin_width_ps <= 0 || window_ps < 0 {
        return Err(Error::OutOfRange {
            name: "bin_width_ps/window_ps",
            detail: format!("bin width {bin_width_ps}, window {window_ps}"),
        });
    }
    if !a.is_sorted() || !b.is_sorted() {
        return Err(Error::Format("correlate requires time-sorted streams".into()));
    }
    let half_bins = (window_ps + bin_width_ps - 1) / bin_width_ps;
    let n_bins = (2 * half_bins + 1) as usize;
    let reach = half_bins * bin_width_ps + bin_width_ps / 2;
    let ta = a.timestamps();
    let tb = b.timestamps();

    const SHARD: usize = 1 << 14;
    let counts = ta
        .par_chunks(SHARD)
        .map(|chunk| {
            let mut local = vec![0u64; n_bins];
            let first = chunk[0];
            let mut lo = tb.partition_point(|&t| t < first - reach);
            for &t in chunk {
                while lo < tb.len() && tb[lo] < t - reach {
                    lo += 1;
                }
                let mut k = lo;
                while k < tb.len() && tb[k] <= t + reach {
                    if let Some(idx) = bin_index(tb[k] - t, bin_width_ps, half_bins) {
                        local[idx] += 1;
                    }
                    k += 1;
                }
            }
            local
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut x, y| {
                for (p, q) in x.iter_mut().zip(y) {
                    *p += q;
                }
                x
            },
        );

    let duration = a.duration_ps.max(b.duration_ps);
    let mut h = CoincidenceHistogram::new(bin_width_ps, -half_bins * bin_width_ps - bin_width_ps / 2, counts)?;
    h.integration_time_s = duration as f64 * 1e-12;
    h.singles_rates = (a.singles_rate(), b.singles_rate());
    Ok(h)
}

fn bin_index(delta: i64, bw: i64, half_bins: i64) -> Option<usize> {
    let mag = (2 * delta.abs() + bw) / (2 * bw);
    if mag > half_bins {
        return None;
    }
    let k = if delta < 0 { -mag } else { mag };
    Some((k + half_bins) as usize)
}
