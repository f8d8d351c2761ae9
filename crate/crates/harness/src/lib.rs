//! Experiment drivers for the splinetrack library: the synthetic dictionary,
//! scenario configs, classification and tracking experiments and likelihood
//! timing.

pub mod bench;
pub mod catalog;
pub mod classify;
pub mod config;
pub mod track;

/// Experiment tags mixed into the RNG stream id.
pub mod experiment {
    pub const CLASSIFY: u64 = 1;
    pub const CONVERGE: u64 = 2;
    pub const TRACK: u64 = 3;
    pub const BENCH: u64 = 4;
}

/// Stream id of one scan. `k` uses the low 28 bits, the sensor slot the next
/// 4 and the run index the 28 above; the experiment tag sits on top.
pub fn stream_id(experiment: u64, run: usize, sensor: usize, k: usize) -> u64 {
    debug_assert!(k < 1 << 28 && sensor < 16 && run < 1 << 28);
    (experiment << 60) | ((run as u64) << 32) | ((sensor as u64) << 28) | k as u64
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_ids_do_not_collide() {
        let a = stream_id(experiment::TRACK, 3, 1, 7);
        let b = stream_id(experiment::TRACK, 3, 0, 7);
        let c = stream_id(experiment::CLASSIFY, 3, 1, 7);
        assert!(a != b && a != c && b != c);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), 0);
    }
}
