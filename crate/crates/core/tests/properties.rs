mod common;

use common::*;
use hyperepp::baseline::pan_purify_round;
use hyperepp::epp::{bitflip_marginal, run_epp, Mode, NoiseModel};
use hyperepp::optics::{self, Parties, RoutingMap};
use hyperepp::practical::bitflip_fidelity_formula;
use hyperepp::state::partial_trace;
use hyperepp::{BellLabel, Dof, Party};
use proptest::prelude::*;

fn simplex() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(0.0f64..1.0).prop_filter_map("nonzero", |e| {
        let s: f64 = e.iter().sum();
        (s > 1e-3).then(|| {
            let mut w = e.map(|x| x / s);
            w[3] = (1.0 - w[0] - w[1] - w[2]).max(0.0);
            w
        })
    })
}

fn noise(w: [f64; 4]) -> NoiseModel {
    NoiseModel::new(w[0], w[1], w[2], w[3]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn purification_is_deterministic(w in simplex()) {
        let r = run_epp(&noise(w), Mode::Exhaustive).unwrap();
        prop_assert!((r.total_probability - 1.0).abs() < 1e-10);
        prop_assert!((r.min_final_fidelity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn step_one_marginal_has_no_bit_flip_part(w in simplex(), ds in -7.0f64..7.0) {
        let m = bitflip_marginal(&noise(w).with_dispersion(ds, 0.0)).unwrap();
        for label in [BellLabel::PsiPlus, BellLabel::PsiMinus] {
            prop_assert!(m.fidelity(&bell(label)).unwrap() < 1e-12);
        }
        let f = m.fidelity(&bell(BellLabel::PhiPlus)).unwrap();
        prop_assert!((f - bitflip_fidelity_formula(w[0], w[1], w[2], w[3], ds).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn compensated_fidelity_is_one(w in simplex(), ds in 0.0f64..6.3, df in 0.0f64..6.3) {
        let n = noise(w).with_dispersion(ds, df);
        let on = hyperepp::practical::dispersive_epp_run(&n, true, Mode::Exhaustive).unwrap();
        prop_assert!((on.min_final_fidelity - 1.0).abs() < 1e-12);
        let off = hyperepp::practical::dispersive_epp_run(&n, false, Mode::Exhaustive).unwrap();
        prop_assert!((off.max_final_fidelity - (1.0 + df.cos()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn local_operations_preserve_invariants(seed in any::<u64>(), phi in -7.0f64..7.0, swap in any::<bool>()) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, 1 + (seed % 4) as usize);
        let map = if swap { RoutingMap::default().inverse() } else { RoutingMap::default() };
        let outs = [
            optics::wdm(&rho, &map),
            optics::hadamard_pol(&rho, Parties::Both),
            optics::sigma_x(&rho, Party::Alice),
            optics::local_phase(&rho, optics::PhaseFlag::new(hyperepp::Coordinate::FreqB, 1), phi),
        ];
        for o in &outs {
            prop_assert!(o.check_invariants().is_ok());
            prop_assert!((o.purity() - rho.purity()).abs() < 1e-10);
        }
        let total: f64 = optics::qnd_pbs(&rho).iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_traces_are_states(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, 2);
        for keep in [vec![Dof::Pol], vec![Dof::Freq], vec![Dof::Rail], vec![Dof::Pol, Dof::Rail]] {
            let m = partial_trace(&rho, &keep).unwrap();
            prop_assert!((m.trace() - 1.0).abs() < 1e-12);
            prop_assert!(max_diff(m.matrix(), &m.matrix().adjoint()) < 1e-14);
            prop_assert!(m.matrix().clone().symmetric_eigen().eigenvalues.min() > -1e-12);
        }
    }

    #[test]
    fn baseline_round_is_monotone_above_half(f in 0.5f64..1.0) {
        let (next, p) = pan_purify_round(f).unwrap();
        prop_assert!(next >= f - 1e-15);
        prop_assert!((0.5..=1.0).contains(&p));
        let (fo, po) = two_pair_oracle(f);
        prop_assert!((fo - next).abs() < 1e-12 && (po - p).abs() < 1e-12);
    }
}
