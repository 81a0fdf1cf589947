//! Nonlocal Bell-state analysis with two QND rounds and local operations.
//!
//! Round 1 is the spatial parity check. Both parties then apply Hadamards
//! (after Bob's σx when the phases differed), and round 2 repeats the check
//! on frequency-routed rails. The pair of equal/unequal results names the
//! input Bell state.

use num_complex::Complex64;
use serde::Serialize;

use crate::basis::{anticorrelated_pair, correlated_pair, product_vector, BellLabel};
use crate::epp::protocol_elements;
use crate::error::{Error, Result};
use crate::optics::{self, Correction, QndOutcome, Stage, Trajectory};
use crate::state::{make_pure, polarization_fidelity};

/// Input below this Bell fidelity gap is treated as exactly that Bell state.
pub const BELL_TOL: f64 = 1e-12;

/// Polarization input: a Bell label or arbitrary amplitudes over {HH, HV, VH, VV}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NbsaInput {
    Bell(BellLabel),
    State([Complex64; 4]),
}

impl From<BellLabel> for NbsaInput {
    fn from(l: BellLabel) -> Self {
        NbsaInput::Bell(l)
    }
}

/// What the two parties saw on one branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NbsaRecord {
    pub round1_equal: bool,
    pub round2_equal: bool,
    pub operations: Vec<Correction>,
}

/// Decision table over the two comparisons.
pub fn classify_outcomes(round1_equal: bool, round2_equal: bool) -> BellLabel {
    match (round1_equal, round2_equal) {
        (true, true) => BellLabel::PhiPlus,
        (true, false) => BellLabel::PhiMinus,
        (false, true) => BellLabel::PsiPlus,
        (false, false) => BellLabel::PsiMinus,
    }
}

/// One measurement branch of the analysis.
#[derive(Debug, Clone, Serialize)]
pub struct NbsaBranch {
    pub round1: QndOutcome,
    pub round1_modes: String,
    pub round2: QndOutcome,
    pub round2_modes: String,
    pub probability: f64,
    pub record: NbsaRecord,
    pub classified: BellLabel,
    /// Polarization fidelity to Φ+ after the analysis and frequency erasure.
    pub post_phi_plus_fidelity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NbsaResult {
    pub label: BellLabel,
    pub branches: Vec<NbsaBranch>,
}

fn input_amplitudes(input: NbsaInput) -> Result<[Complex64; 4]> {
    let amps = match input {
        NbsaInput::Bell(l) => return Ok(l.amplitudes()),
        NbsaInput::State(a) => a,
    };
    let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidState("polarization input has zero norm".into()));
    }
    let amps = amps.map(|c| c / norm);
    let best = BellLabel::ALL
        .iter()
        .map(|l| {
            let inner: Complex64 = l.amplitudes().iter().zip(&amps).map(|(b, a)| b.conj() * a).sum();
            inner.norm_sqr()
        })
        .fold(0.0, f64::max);
    if 1.0 - best > BELL_TOL {
        return Err(Error::ClassificationUndefined(format!(
            "polarization input is not a Bell state (best Bell fidelity {best})"
        )));
    }
    Ok(amps)
}

/// Runs both rounds on every branch and returns the common classification.
pub fn nbsa_classify(input: impl Into<NbsaInput>) -> Result<NbsaResult> {
    let pol = input_amplitudes(input.into())?;
    let v = product_vector(&pol, &anticorrelated_pair(0.0), &correlated_pair(0.0));
    let start = Trajectory::start(make_pure(v.as_slice())?);
    let mut branches = Vec::new();
    for t in optics::run_pipeline(start, &protocol_elements(None))? {
        let (r1, r2) = (t.outcomes[0], t.outcomes[1]);
        let record = NbsaRecord {
            round1_equal: r1.phases_equal(),
            round2_equal: r2.phases_equal(),
            operations: t.corrections.clone(),
        };
        branches.push(NbsaBranch {
            round1: r1,
            round1_modes: r1.modes(Stage::Spatial),
            round2: r2,
            round2_modes: r2.modes(Stage::Frequency),
            probability: t.probability,
            classified: classify_outcomes(record.round1_equal, record.round2_equal),
            record,
            post_phi_plus_fidelity: polarization_fidelity(&t.state, BellLabel::PhiPlus),
        });
    }
    let label = branches[0].classified;
    if let Some(b) = branches.iter().find(|b| b.classified != label) {
        return Err(Error::ClassificationUndefined(format!(
            "branches disagree: {} on {}/{} versus {} on the first",
            b.classified, b.round1_modes, b.round2_modes, label
        )));
    }
    Ok(NbsaResult { label, branches })
}

/// One input of the truth table.
#[derive(Debug, Clone, Serialize)]
pub struct TruthRow {
    pub input: BellLabel,
    pub round1_equal: bool,
    pub round2_equal: bool,
    pub classified: BellLabel,
    pub total_probability: f64,
    pub branches: Vec<NbsaBranch>,
}

/// Every Bell input with all of its measurement branches.
pub fn nbsa_truth_table() -> Result<Vec<TruthRow>> {
    BellLabel::ALL
        .iter()
        .map(|&input| {
            let r = nbsa_classify(input)?;
            let first = &r.branches[0].record;
            Ok(TruthRow {
                input,
                round1_equal: first.round1_equal,
                round2_equal: first.round2_equal,
                classified: r.label,
                total_probability: r.branches.iter().map(|b| b.probability).sum(),
                branches: r.branches,
            })
        })
        .collect()
}

/// Aligned plain-text rendering of the truth table.
pub fn truth_table_text(rows: &[TruthRow]) -> String {
    let word = |eq: bool| if eq { "equal" } else { "unequal" };
    let mut s = format!(
        "{:<6} {:<8} {:<8} {:<10} {:<9} {}\n",
        "input", "round1", "round2", "classified", "branches", "probability"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<6} {:<8} {:<8} {:<10} {:<9} {:.12}\n",
            r.input.as_str(),
            word(r.round1_equal),
            word(r.round2_equal),
            r.classified.as_str(),
            r.branches.len(),
            r.total_probability
        ));
    }
    s
}
