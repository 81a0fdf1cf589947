//! Conventional recursive purification for comparison.
//!
//! Two copies of `F|Φ+⟩⟨Φ+| + (1−F)|Ψ+⟩⟨Ψ+|` pass a PBS parity check; the
//! pair is kept when both parties see the same parity, which happens with
//! probability `F² + (1−F)²`. Each round consumes two pairs to make one.

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper bound on recursion depth; only reachable for `F0` within rounding
/// of ½.
pub const MAX_ROUNDS: usize = 256;

/// One parity-check round: `(F', p_success)`.
pub fn pan_purify_round(f: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::InvalidArgument(format!("fidelity {f} outside [0, 1]")));
    }
    let p = f * f + (1.0 - f) * (1.0 - f);
    Ok((f * f / p, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    #[serde(rename = "F_before")]
    pub f_before: f64,
    #[serde(rename = "F_after")]
    pub f_after: f64,
    pub p_success: f64,
    pub cumulative_expected_pairs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionTrace {
    pub initial_fidelity: f64,
    pub target_fidelity: f64,
    pub rounds: Vec<RoundRecord>,
    pub final_fidelity: f64,
    pub pairs_consumed_expected: f64,
}

/// The hyperentangled protocol's side of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeterministicSummary {
    pub hyperentangled_pairs: u64,
    pub output_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceComparison {
    pub recursive: RecursionTrace,
    pub deterministic: DeterministicSummary,
}

/// Rounds and expected source pairs to lift `f0` to `target`, against one
/// hyperentangled pair for the deterministic protocol.
pub fn resource_compare(f0: f64, target: f64) -> Result<ResourceComparison> {
    if !(f0 > 0.5) {
        return Err(Error::NonPurifiable(f0));
    }
    if !(f0 < 1.0 && target < 1.0 && target.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "fidelities must be below 1 (initial {f0}, target {target})"
        )));
    }
    let mut rounds = Vec::new();
    let mut f = f0;
    let mut pairs = 1.0;
    while f < target {
        if rounds.len() == MAX_ROUNDS {
            return Err(Error::InvalidArgument(format!(
                "target {target} not reached within {MAX_ROUNDS} rounds"
            )));
        }
        let (next, p) = pan_purify_round(f)?;
        pairs *= 2.0 / p;
        rounds.push(RoundRecord {
            round: rounds.len() + 1,
            f_before: f,
            f_after: next,
            p_success: p,
            cumulative_expected_pairs: pairs,
        });
        f = next;
    }
    Ok(ResourceComparison {
        recursive: RecursionTrace {
            initial_fidelity: f0,
            target_fidelity: target,
            rounds,
            final_fidelity: f,
            pairs_consumed_expected: pairs,
        },
        deterministic: DeterministicSummary {
            hyperentangled_pairs: 1,
            output_fidelity: 1.0,
        },
    })
}

impl RecursionTrace {
    /// `round,F_before,F_after,p_success,cumulative_expected_pairs`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rounds.is_empty() {
            w.write_record(["round", "F_before", "F_after", "p_success", "cumulative_expected_pairs"])?;
        }
        for r in &self.rounds {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(pan_purify_round(0.5).unwrap(), (0.5, 0.5));
        assert_eq!(pan_purify_round(1.0).unwrap(), (1.0, 1.0));
        assert_eq!(pan_purify_round(0.0).unwrap(), (0.0, 1.0));
        assert!(pan_purify_round(1.2).is_err());
    }

    #[test]
    fn reached_target_needs_no_rounds() {
        let r = resource_compare(0.9, 0.8).unwrap();
        assert!(r.recursive.rounds.is_empty());
        assert_eq!(r.recursive.pairs_consumed_expected, 1.0);
        assert!(r.recursive.to_csv().unwrap().starts_with("round,F_before"));
    }

    #[test]
    fn half_is_not_purifiable() {
        assert!(matches!(resource_compare(0.5, 0.9), Err(Error::NonPurifiable(_))));
        assert!(matches!(resource_compare(0.3, 0.9), Err(Error::NonPurifiable(_))));
    }
}
