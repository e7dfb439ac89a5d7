//! Exact maximization of the piecewise-constant utility of one item's bias.

use super::pairs::CandidatePair;

/// What to do with an item's bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasMove {
    /// Leave the bias where it is.
    Keep,
    /// Add this amount to the reference bias.
    Shift(f64),
    /// Set the bias to the exclusion sentinel.
    Exclude,
}

impl BiasMove {
    fn magnitude(&self) -> f64 {
        match *self {
            BiasMove::Keep => 0.0,
            BiasMove::Shift(a) => a.abs(),
            BiasMove::Exclude => f64::INFINITY,
        }
    }

    fn value(&self) -> f64 {
        match *self {
            BiasMove::Keep => 0.0,
            BiasMove::Shift(a) => a,
            BiasMove::Exclude => f64::NEG_INFINITY,
        }
    }
}

/// Best move for one item and how much it improves the summed utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSearchResult {
    pub adjustment: BiasMove,
    pub utility_gain: f64,
}

/// Utilities closer than this are treated as equal when ranking optima.
const UTILITY_TIE: f64 = 1e-12;

/// Finds the add-on bias maximizing `sum { delta : threshold < bias }`.
///
/// Thresholds closer together than `2 * tie_epsilon` are crossed together;
/// a finite candidate sits `tie_epsilon` above the largest threshold of its
/// group so the crossing is strict. The excluded state has utility 0. A move
/// is only returned when it beats `current_utility` by more than `min_gain`.
/// Among equal optima the smallest `|bias|` wins, then the smaller value.
pub fn sweep_optimal_bias(
    current_utility: f64,
    pairs: &mut [CandidatePair],
    tie_epsilon: f64,
    min_gain: f64,
) -> BiasSearchResult {
    debug_assert!(pairs.iter().any(CandidatePair::is_sentinel));
    pairs.sort_by(|a, b| {
        a.threshold
            .total_cmp(&b.threshold)
            .then(b.delta.total_cmp(&a.delta))
    });

    let mut best = (BiasMove::Exclude, 0.0f64);
    let mut consider = |mv: BiasMove, utility: f64| {
        let better = utility > best.1 + UTILITY_TIE
            || ((utility - best.1).abs() <= UTILITY_TIE
                && (mv.magnitude(), mv.value()) < (best.0.magnitude(), best.0.value()));
        if better {
            best = (mv, utility);
        }
    };

    let mut running = 0.0;
    let mut has_open_pairs = false;
    let mut i = 0;
    let mut first_finite = true;
    while i < pairs.len() {
        let start = pairs[i].threshold;
        if start == f64::NEG_INFINITY {
            if !pairs[i].is_sentinel() {
                has_open_pairs = true;
            }
            running += pairs[i].delta;
            i += 1;
            continue;
        }
        if first_finite {
            first_finite = false;
            if has_open_pairs {
                // finite biases below every threshold still collect the
                // always-crossed pairs
                let below = if start > tie_epsilon { 0.0 } else { start - tie_epsilon };
                consider(BiasMove::Shift(below), running);
            }
        }
        let mut last = start;
        while i < pairs.len() && pairs[i].threshold - last <= 2.0 * tie_epsilon {
            last = pairs[i].threshold;
            running += pairs[i].delta;
            i += 1;
        }
        consider(BiasMove::Shift(last + tie_epsilon), running);
    }
    if first_finite && has_open_pairs {
        consider(BiasMove::Shift(0.0), running);
    }

    let (adjustment, utility) = best;
    if utility - current_utility > min_gain {
        BiasSearchResult {
            adjustment,
            utility_gain: utility - current_utility,
        }
    } else {
        BiasSearchResult {
            adjustment: BiasMove::Keep,
            utility_gain: 0.0,
        }
    }
}
