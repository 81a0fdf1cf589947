mod common;

use common::*;
use hyperepp::optics::{
    self, frequency_erase, qnd_kraus, qnd_pbs, Element, Parties, Phase, QndOutcome, RoutingMap, Stage, Trajectory,
};
use hyperepp::state::make_pure;
use hyperepp::{BellLabel, DensityMatrix, Dof, Error, Party};
use nalgebra::DVector;

fn pure(v: &DVector<C>) -> DensityMatrix {
    make_pure(v.as_slice()).unwrap()
}

#[test]
fn qnd_kraus_is_complete_set_of_partial_isometries() {
    let k = qnd_kraus();
    assert_eq!(k.len(), 4);
    assert!(k.completeness_error() < 1e-15);
    // each outcome projects on a parity subspace and then routes the rails
    for a in k.operators() {
        let e = a.adjoint() * a;
        assert!(max_diff(&(&e * &e), &e) < 1e-15);
        assert!(max_diff(&(a * a.adjoint() * a), a) < 1e-15);
    }
}

#[test]
fn source_splits_into_two_equal_branches() {
    let v = joint(&bell(BellLabel::PhiPlus), &freq_carrier(0.0), &rail_carrier(0.0));
    let branches = qnd_pbs(&pure(&v));
    assert_eq!(branches.len(), 2);
    let mut modes: Vec<String> = branches.iter().map(|b| b.outcome.modes(Stage::Spatial)).collect();
    modes.sort();
    assert_eq!(modes, ["a1b1", "a2b2"]);
    for b in &branches {
        assert!((b.probability - 0.5).abs() < 1e-15);
        assert!(b.outcome.phases_equal());
        let pol = hyperepp::state::partial_trace(&b.state, &[Dof::Pol]).unwrap();
        assert!((expectation(pol.matrix(), &bell(BellLabel::PhiPlus)) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn bit_flipped_input_never_gives_equal_phases() {
    for label in [BellLabel::PsiPlus, BellLabel::PsiMinus] {
        let v = joint(&bell(label), &freq_carrier(0.2), &rail_carrier(0.9));
        for b in qnd_pbs(&pure(&v)) {
            assert!(!b.outcome.phases_equal());
        }
    }
}

#[test]
fn outcome_index_round_trip() {
    for i in 0..4 {
        let o = QndOutcome::from_index(i);
        assert_eq!(o.index(), i);
        assert_eq!(QndOutcome::from_phases(o.alice_phase, o.bob_phase), o);
    }
    let o = QndOutcome::from_phases(Phase::Theta, Phase::Zero);
    assert_eq!(o.modes(Stage::Spatial), "a2b1");
    assert_eq!(o.modes(Stage::Frequency), "c2d1");
}

#[test]
fn wdm_routes_frequency_into_rail() {
    let v = joint(&basis_pair(0, 0), &basis_pair(1, 0), &basis_pair(0, 0));
    let out = optics::wdm(&pure(&v), &RoutingMap::default());
    let expected = joint(&basis_pair(0, 0), &basis_pair(1, 0), &basis_pair(1, 1));
    assert!((expectation(out.matrix(), &expected) - 1.0).abs() < 1e-15);
    let back = optics::wdm(&out, &RoutingMap::default().inverse());
    assert!((expectation(back.matrix(), &v) - 1.0).abs() < 1e-15);
    assert!(RoutingMap::new([0, 0], [0, 1]).is_err());
    let bad: Result<RoutingMap, _> = serde_json::from_str(r#"{"alice":[1,1],"bob":[0,1]}"#);
    assert!(bad.is_err());
}

#[test]
fn hadamard_maps_phi_minus_to_psi_plus() {
    let v = joint(&bell(BellLabel::PhiMinus), &freq_carrier(0.0), &basis_pair(0, 0));
    let out = optics::hadamard_pol(&pure(&v), Parties::Both);
    let expected = joint(&bell(BellLabel::PsiPlus), &freq_carrier(0.0), &basis_pair(0, 0));
    assert!((expectation(out.matrix(), &expected) - 1.0).abs() < 1e-14);
}

#[test]
fn sigma_x_and_phase() {
    let v = joint(&bell(BellLabel::PsiPlus), &freq_carrier(0.0), &basis_pair(0, 0));
    let out = optics::sigma_x(&pure(&v), Party::Bob);
    let expected = joint(&bell(BellLabel::PhiPlus), &freq_carrier(0.0), &basis_pair(0, 0));
    assert!((expectation(out.matrix(), &expected) - 1.0).abs() < 1e-14);

    let v = joint(&bell(BellLabel::PhiPlus), &freq_carrier(0.0), &rail_carrier(0.0));
    let flag = optics::PhaseFlag::new(hyperepp::Coordinate::RailB, 1);
    let out = optics::local_phase(&pure(&v), flag, 0.8);
    let expected = joint(&bell(BellLabel::PhiPlus), &freq_carrier(0.0), &rail_carrier(0.8));
    assert!((expectation(out.matrix(), &expected) - 1.0).abs() < 1e-14);
}

#[test]
fn erase_merges_frequencies() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // |HH ω1ω2⟩ + |VV ω2ω1⟩ on fixed rails: frequency follows polarization
    let v = joint(&basis_pair(0, 0), &basis_pair(0, 1), &basis_pair(0, 0)) * c(s)
        + joint(&basis_pair(1, 1), &basis_pair(1, 0), &basis_pair(0, 0)) * c(s);
    let out = frequency_erase(&pure(&v)).unwrap();
    let expected = joint(&bell(BellLabel::PhiPlus), &basis_pair(0, 0), &basis_pair(0, 0));
    assert!((expectation(out.matrix(), &expected) - 1.0).abs() < 1e-14);
    assert!(optics::erase_isometry_defect(&pure(&v)) < 1e-14);

    let ambiguous = joint(&basis_pair(0, 0), &freq_carrier(0.0), &basis_pair(0, 0));
    assert!(matches!(frequency_erase(&pure(&ambiguous)), Err(Error::InvalidState(_))));
}

#[test]
fn element_descriptors_round_trip() {
    let elements = vec![
        Element::QndPbs {},
        Element::Wdm(RoutingMap::default()),
        Element::Hadamard { parties: Parties::Both },
        Element::CorrectBitFlip { party: Party::Bob },
        Element::CompensatePhase { phi: 0.5 },
    ];
    let text = serde_json::to_string(&elements).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v[0]["element"], "qnd_pbs");
    assert!(v[1]["params"].is_object());
    let back: Vec<Element> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, elements);
}

#[test]
fn feed_forward_needs_a_measurement() {
    let t = Trajectory::start(DensityMatrix::maximally_mixed());
    assert!(matches!(
        Element::CorrectBitFlip { party: Party::Bob }.apply(t.clone()),
        Err(Error::InvalidArgument(_))
    ));
    assert!(Element::ResetRails {}.apply(t).is_err());
}

#[test]
fn unitaries_agree_with_direct_application() {
    let mut r = rng(11);
    let rho = random_state(&mut r, 2);
    let elements = [
        Element::Wdm(RoutingMap::default()),
        Element::Hadamard { parties: Parties::Alice },
        Element::SigmaX { party: Party::Bob },
        Element::LocalPhase { coordinate: hyperepp::Coordinate::FreqA, value: 1, phi: 0.7 },
    ];
    for e in &elements {
        let u = optics::element_unitary(e).unwrap();
        let direct = hyperepp::state::apply_unitary(&rho, &u).unwrap();
        let via = e.apply(Trajectory::start(rho.clone())).unwrap();
        assert!(max_diff(direct.matrix(), via[0].state.matrix()) < 1e-14);
    }
    assert!(optics::element_unitary(&Element::QndPbs {}).is_none());
}
