//! Inputs shared by the criterion benchmarks in `benches/`.

use qdcascade::detection::{dark_counts, DetectorParams};
use qdcascade::rng::{Domain, Substreams};
use qdcascade::TimeTagStream;

/// Poisson click stream at `rate` counts/s on detector `id`.
pub fn poisson_stream(id: u32, rate: f64, duration_ps: i64) -> TimeTagStream {
    let d = DetectorParams { efficiency: 1.0, dark_rate: rate, jitter_sigma_ps: 0.0, id };
    let mut rng = Substreams::new(11).stream(Domain::Aux(id), 0);
    TimeTagStream::new(dark_counts(&d, 0, duration_ps, &mut rng), duration_ps)
}
