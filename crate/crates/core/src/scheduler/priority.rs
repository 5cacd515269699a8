use std::cmp::Ordering;

use crate::bus::PriorityLevel;

/// Re-ranks loops by `J'` with a switch threshold `delta`.
///
/// If the spread of `J'` is below `delta` nothing changes. Otherwise loops
/// are sorted by `J'` descending, equal values keeping their previous
/// relative order. Walking that list, a neighbouring pair whose previous
/// order is inverted and whose `J'` gap is below `delta` keeps its previous
/// order and is treated as a block, so the next loop down ends up below
/// both. Levels `N..1` are assigned along the final order.
pub fn modify_priorities(jp: &[f64], prev: &[PriorityLevel], delta: f64) -> Vec<PriorityLevel> {
    assert_eq!(jp.len(), prev.len(), "one J' per loop");
    let n = jp.len();
    if n == 0 {
        return Vec::new();
    }
    let max = jp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = jp.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min < delta {
        return prev.to_vec();
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        jp[b]
            .partial_cmp(&jp[a])
            .unwrap_or(Ordering::Equal)
            .then(prev[b].cmp(&prev[a]))
    });

    let mut i = 0;
    while i + 1 < n {
        let (m, k) = (order[i], order[i + 1]);
        let inverted = jp[m] > jp[k] && prev[k] > prev[m];
        if inverted && jp[m] - jp[k] < delta {
            order.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }

    let mut levels = vec![PriorityLevel(0); n];
    for (rank, &loop_id) in order.iter().enumerate() {
        levels[loop_id] = PriorityLevel((n - rank) as u32);
    }
    levels
}
