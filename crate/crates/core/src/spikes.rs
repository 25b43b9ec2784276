//! Spike detection and firing statistics.
//!
//! Upward threshold crossings with a refractory window, detected online
//! during integration so the statistics do not depend on the output
//! sampling cadence. Instantaneous frequency is the reciprocal of the
//! inter-spike interval; bursts are maximal groups of spikes whose ISIs
//! stay below the burst gap.

use serde::{Deserialize, Serialize};

/// Default detection threshold [mV].
pub const DEFAULT_THRESHOLD_MV: f64 = -20.0;
/// Default refractory window [ms].
pub const DEFAULT_REFRACTORY_MS: f64 = 2.0;
/// ISIs below this gap [s] belong to the same burst.
pub const DEFAULT_BURST_GAP_S: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    /// spike times [s], strictly increasing
    pub times: Vec<f64>,
    /// instantaneous frequency 1/ISI [Hz], one entry per spike after the first
    pub frequencies: Vec<f64>,
    /// burst windows [(start, end)] in seconds
    pub bursts: Vec<(f64, f64)>,
}

impl SpikeTrain {
    pub fn empty() -> SpikeTrain {
        SpikeTrain {
            times: Vec::new(),
            frequencies: Vec::new(),
            bursts: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest instantaneous frequency, optionally restricted to spikes
    /// after `t_from` seconds.
    pub fn peak_frequency(&self, t_from: f64) -> f64 {
        self.times
            .iter()
            .zip(std::iter::once(&f64::NAN).chain(self.times.iter()))
            .skip(1)
            .filter(|(t, _)| **t >= t_from)
            .map(|(t, prev)| 1.0 / (*t - *prev))
            .fold(0.0, f64::max)
    }

    /// Median intra-burst instantaneous frequency after `t_from`; falls
    /// back to the median over all ISIs when no burst grouping applies.
    pub fn dominant_frequency(&self, t_from: f64) -> f64 {
        let mut intra: Vec<f64> = Vec::new();
        for i in 1..self.times.len() {
            if self.times[i] < t_from {
                continue;
            }
            let isi = self.times[i] - self.times[i - 1];
            if isi < DEFAULT_BURST_GAP_S {
                intra.push(1.0 / isi);
            }
        }
        if intra.is_empty() {
            for i in 1..self.times.len() {
                if self.times[i] >= t_from {
                    intra.push(1.0 / (self.times[i] - self.times[i - 1]));
                }
            }
        }
        if intra.is_empty() {
            return 0.0;
        }
        intra.sort_by(|a, b| a.partial_cmp(b).unwrap());
        intra[intra.len() / 2]
    }

    /// Number of spikes at or after `t_from` seconds.
    pub fn count_after(&self, t_from: f64) -> usize {
        self.times.iter().filter(|t| **t >= t_from).count()
    }
}

/// Online upward-crossing detector.
#[derive(Debug, Clone)]
pub struct SpikeDetector {
    threshold: f64,
    refractory_s: f64,
    burst_gap_s: f64,
    prev: Option<(f64, f64)>,
    last_spike: f64,
    times: Vec<f64>,
}

impl SpikeDetector {
    pub fn new(threshold_mv: f64, refractory_ms: f64) -> SpikeDetector {
        SpikeDetector {
            threshold: threshold_mv,
            refractory_s: refractory_ms * 1e-3,
            burst_gap_s: DEFAULT_BURST_GAP_S,
            prev: None,
            last_spike: f64::NEG_INFINITY,
            times: Vec::new(),
        }
    }

    /// Feed one sample (t in seconds, u in mV).
    pub fn push(&mut self, t: f64, u: f64) {
        if let Some((tp, up)) = self.prev {
            if up < self.threshold && u >= self.threshold && t - self.last_spike > self.refractory_s
            {
                // linear interpolation of the crossing instant
                let frac = (self.threshold - up) / (u - up);
                let tc = tp + frac * (t - tp);
                self.times.push(tc);
                self.last_spike = tc;
            }
        }
        self.prev = Some((t, u));
    }

    pub fn finish(self) -> SpikeTrain {
        let times = self.times;
        let frequencies: Vec<f64> = times.windows(2).map(|w| 1.0 / (w[1] - w[0])).collect();
        let mut bursts = Vec::new();
        let mut start: Option<f64> = None;
        for i in 0..times.len() {
            let joins_prev = i > 0 && times[i] - times[i - 1] < self.burst_gap_s;
            if !joins_prev {
                if let Some(s) = start.take() {
                    bursts.push((s, times[i - 1]));
                }
                start = Some(times[i]);
            }
        }
        if let (Some(s), Some(last)) = (start, times.last()) {
            bursts.push((s, *last));
        }
        // a lone spike is not a burst
        bursts.retain(|(s, e)| e > s);
        SpikeTrain {
            times,
            frequencies,
            bursts,
        }
    }
}

/// Batch detection over a sampled series (timestamps in seconds).
pub fn detect_spikes(times: &[f64], u: &[f64], threshold_mv: f64, refractory_ms: f64) -> SpikeTrain {
    let mut det = SpikeDetector::new(threshold_mv, refractory_ms);
    for (t, v) in times.iter().zip(u) {
        det.push(*t, *v);
    }
    det.finish()
}
