mod common;

use common::*;
use hyperepp::nbsa::{classify_outcomes, nbsa_classify, nbsa_truth_table, truth_table_text, NbsaInput};
use hyperepp::{BellLabel, Error};
use rand::Rng;

#[test]
fn truth_table_matches_decision_rule() {
    let expected = [
        (BellLabel::PhiPlus, true, true),
        (BellLabel::PhiMinus, true, false),
        (BellLabel::PsiPlus, false, true),
        (BellLabel::PsiMinus, false, false),
    ];
    let rows = nbsa_truth_table().unwrap();
    for (row, (label, r1, r2)) in rows.iter().zip(expected) {
        assert_eq!(row.input, label);
        assert_eq!((row.round1_equal, row.round2_equal), (r1, r2));
        assert_eq!(row.classified, label);
        assert_eq!(classify_outcomes(r1, r2), label);
        assert!((row.total_probability - 1.0).abs() < 1e-12);
        for b in &row.branches {
            assert_eq!(b.classified, label);
            assert_eq!((b.record.round1_equal, b.record.round2_equal), (r1, r2));
        }
    }
    let text = truth_table_text(&rows);
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn analysis_leaves_phi_plus() {
    for row in nbsa_truth_table().unwrap() {
        for b in &row.branches {
            assert!((b.post_phi_plus_fidelity - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn random_global_phases_do_not_change_the_label() {
    let mut r = rng(31);
    for _ in 0..40 {
        let label = BellLabel::ALL[r.random_range(0..4)];
        let phase = cis(r.random::<f64>() * 6.3);
        let scale = 0.1 + r.random::<f64>();
        let amps: Vec<C> = bell(label).iter().map(|a| a * phase * scale).collect();
        let input = NbsaInput::State([amps[0], amps[1], amps[2], amps[3]]);
        assert_eq!(nbsa_classify(input).unwrap().label, label);
    }
}

#[test]
fn non_bell_inputs_are_reported() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let superposed = NbsaInput::State([c(s * 0.8), c(0.6), c(0.0), c(s * 0.8)]);
    assert!(matches!(nbsa_classify(superposed), Err(Error::ClassificationUndefined(_))));
    let mixed_labels = NbsaInput::State([c(0.5), c(0.5), c(0.5), c(0.5)]);
    assert!(matches!(nbsa_classify(mixed_labels), Err(Error::ClassificationUndefined(_))));
    assert!(matches!(nbsa_classify(NbsaInput::State([c(0.0); 4])), Err(Error::InvalidState(_))));
}

#[test]
fn labels_serialize_as_short_names() {
    let names: Vec<String> = BellLabel::ALL.iter().map(|l| serde_json::to_string(l).unwrap()).collect();
    assert_eq!(names, ["\"phi+\"", "\"phi-\"", "\"psi+\"", "\"psi-\""]);
}
