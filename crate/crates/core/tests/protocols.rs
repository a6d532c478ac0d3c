use nlmeas::protocols::{
    eigenbasis, infer_outcome, measure_4x4_twist, measure_general_product, measure_nonmax_bell_variant,
    measure_nonmax_equal, measure_nonmax_general, measure_twisted_product, nonmax_general_first_stage, run,
    EigenbasisSpec, Inferred, ProtocolRun,
};
use nlmeas::qcore::{spin_rotation, Matrix, Party, PauliAxis, QubitId, C64};
use nlmeas::stator::{builder_label, controller_label, OutcomeRecord, RecordEntry};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_8, PI};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn assert_certain(spec: &EigenbasisSpec) {
    for (k, state) in eigenbasis(spec).unwrap().iter().enumerate() {
        let run = run(spec, state).unwrap();
        let total: f64 = run.branches.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for b in &run.branches {
            match b.inferred {
                Inferred::Index(got) => assert_eq!(got, k + 1, "{spec:?} eigenstate {}", k + 1),
                Inferred::Failure => {}
            }
        }
        assert!(run.success_probability > 0.0);
    }
}

#[test]
fn every_family_identifies_its_eigenstates() {
    let specs = vec![
        EigenbasisSpec::twisted_product(),
        EigenbasisSpec::general_product(0.3, 3),
        EigenbasisSpec::general_product(1.0, 2),
        EigenbasisSpec::general_product(FRAC_PI_8, 3),
        EigenbasisSpec::nonmax_equal(FRAC_PI_3, 3),
        EigenbasisSpec::nonmax_equal(0.0, 2),
        EigenbasisSpec::nonmax_equal(PI, 2),
        EigenbasisSpec::nonmax_bell(FRAC_PI_3, 4),
        EigenbasisSpec::nonmax_bell(FRAC_PI_2, 2),
        EigenbasisSpec::nonmax_general(FRAC_PI_3, PI / 7.0, 0.0, 0.0, 3),
        EigenbasisSpec::nonmax_general(0.9, 2.2, 0.4, -1.1, 3),
        EigenbasisSpec::nonmax_general(0.0, PI, 0.0, 0.3, 2),
        EigenbasisSpec::twist4x4(&Matrix::identity(2), 2).unwrap(),
        EigenbasisSpec::twist4x4(&spin_rotation(PauliAxis::Y, 0.4), 4).unwrap(),
        EigenbasisSpec::twist4x4(&spin_rotation(PauliAxis::X, -0.7), 3).unwrap(),
        EigenbasisSpec::twist4x4(&spin_rotation(PauliAxis::Z, 1.3).scale(c(0.0, 1.0)), 3).unwrap(),
    ];
    for spec in &specs {
        assert_certain(spec);
    }
}

#[test]
fn twisted_product_first_eigenstate_is_certain() {
    let spec = EigenbasisSpec::twisted_product();
    let run = measure_twisted_product(&spec.eigenstate(1).unwrap()).unwrap();
    assert_eq!(run.ebits_consumed, 1);
    assert!((run.success_probability - 1.0).abs() < 1e-12);
    let d = run.outcome_distribution();
    assert!((d[&Inferred::Index(1)] - 1.0).abs() < 1e-12);
}

fn record_value(rec: &OutcomeRecord, label: &str) -> i8 {
    rec.get(label).unwrap()
}

#[test]
fn twisted_product_block_plus_plus_second_state() {
    // block (z_a, x_b) = (+1, +1): Ψ2 ends as |0_A 1_B⟩
    let spec = EigenbasisSpec::twisted_product();
    let run = measure_twisted_product(&spec.eigenstate(2).unwrap()).unwrap();
    let za = controller_label("twist", Party::Alice, 1);
    let xb = builder_label("twist", Party::Bob, 1);
    let mut seen = false;
    for b in &run.branches {
        if record_value(&b.alice_record, &za) == 1 && record_value(&b.bob_record, &xb) == 1 {
            assert_eq!(record_value(&b.alice_record, "project/sigma_z_A"), 1);
            assert_eq!(record_value(&b.bob_record, "final/sigma_z_B"), -1);
            seen = true;
        }
    }
    assert!(seen);
}

#[test]
fn twisted_product_superposition_splits_evenly() {
    let spec = EigenbasisSpec::twisted_product();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // (|Ψ1⟩ + |Ψ3⟩)/√2 = (|00⟩ + |10⟩/√2 + |11⟩/√2)/√2
    let input = spec.input_state(vec![c(h, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0)]).unwrap();
    let p = measure_twisted_product(&input).unwrap().index_probabilities();
    assert!((p[0] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    assert!(p[1].abs() < 1e-12 && p[3].abs() < 1e-12);
}

#[test]
fn general_product_success_rates() {
    let spec = EigenbasisSpec::general_product(1.0, 2);
    let run = measure_general_product(&spec.eigenstate(3).unwrap(), 1.0, 2).unwrap();
    assert!((run.success_probability - 0.75).abs() < 1e-12);
    assert_eq!(run.ebits_consumed, 2);
    let run = measure_general_product(&spec.eigenstate(1).unwrap(), 1.0, 2).unwrap();
    assert!((run.success_probability - 1.0).abs() < 1e-12);
    for alpha in [FRAC_PI_8, 3.0 * FRAC_PI_8] {
        let spec = EigenbasisSpec::general_product(alpha, 3);
        for k in 1..=4 {
            let run = measure_general_product(&spec.eigenstate(k).unwrap(), alpha, 3).unwrap();
            assert!((run.success_probability - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn general_product_quarter_turn_is_twisted_product() {
    let spec = EigenbasisSpec::twisted_product();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let input = spec.input_state(vec![c(0.3, 0.1), c(-0.2, 0.5), c(h, 0.0), c(0.1, -0.4)]).unwrap();
    let a = measure_twisted_product(&input).unwrap();
    let b = measure_general_product(&input, FRAC_PI_2, 1).unwrap();
    assert_eq!(a.branches.len(), b.branches.len());
    for (x, y) in a.branches.iter().zip(&b.branches) {
        assert_eq!(x.alice_record, y.alice_record);
        assert_eq!(x.bob_record, y.bob_record);
        assert_eq!(x.inferred, y.inferred);
        assert!((x.probability - y.probability).abs() < 1e-12);
        assert!(x.post_state.max_amplitude_diff(&y.post_state).unwrap() < 1e-12);
    }
}

#[test]
fn general_product_rejects_boundary_angle() {
    let spec = EigenbasisSpec::twisted_product();
    let input = spec.eigenstate(1).unwrap();
    assert!(matches!(
        measure_general_product(&input, 0.0, 2),
        Err(nlmeas::Error::Validation(_))
    ));
}

#[test]
fn nonmax_equal_first_eigenstate_maps_to_zero_zero() {
    let alpha = 1.1;
    let spec = EigenbasisSpec::nonmax_equal(alpha, 3);
    let run = measure_nonmax_equal(&spec.eigenstate(1).unwrap(), alpha, 3).unwrap();
    assert_eq!(run.ebits_consumed, 3);
    for b in &run.branches {
        assert!(matches!(b.inferred, Inferred::Index(1) | Inferred::Failure));
    }
    // post state is a product state: no entanglement left
    assert!(run.residual_entanglement < 1e-9);
}

#[test]
fn nonmax_equal_zero_zero_input_distribution() {
    let alpha = FRAC_PI_3;
    let spec = EigenbasisSpec::nonmax_equal(alpha, 2);
    let input = spec.input_state(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
    // α = π/3 does not close in one step; compare per-eigenstate success
    let run = measure_nonmax_equal(&input, alpha, 2).unwrap();
    let p = run.index_probabilities();
    let s1 = measure_nonmax_equal(&spec.eigenstate(1).unwrap(), alpha, 2).unwrap().success_probability;
    let s2 = measure_nonmax_equal(&spec.eigenstate(2).unwrap(), alpha, 2).unwrap().success_probability;
    assert!((p[0] - 0.75 * s1).abs() < 1e-10);
    assert!((p[1] - 0.25 * s2).abs() < 1e-10);
    assert!(p[2].abs() < 1e-12 && p[3].abs() < 1e-12);
}

#[test]
fn nonmax_equal_quarter_angle_is_certain_with_two_ebits() {
    let spec = EigenbasisSpec::nonmax_equal(FRAC_PI_2, 2);
    for k in 1..=4 {
        let run = measure_nonmax_equal(&spec.eigenstate(k).unwrap(), FRAC_PI_2, 2).unwrap();
        assert!((run.success_probability - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bell_variant_leaves_bell_states() {
    let alpha = FRAC_PI_3;
    let spec = EigenbasisSpec::nonmax_bell(alpha, 5);
    let run = measure_nonmax_bell_variant(&spec.eigenstate(3).unwrap(), alpha, 5).unwrap();
    for b in &run.branches {
        assert!(matches!(b.inferred, Inferred::Index(3) | Inferred::Failure));
        let rho = b.post_state.partial_trace(&[QubitId(0)]).unwrap();
        assert!(rho.distance_from_maximally_mixed() < 1e-10);
    }
    assert!((run.residual_entanglement - 1.0).abs() < 1e-9);
    assert_eq!(run.ebits_consumed, 5);
}

#[test]
fn general_with_equal_angles_matches_equal_family() {
    let alpha = 0.8;
    let spec = EigenbasisSpec::nonmax_equal(alpha, 3);
    let input = spec.input_state(vec![c(0.2, 0.3), c(-0.5, 0.1), c(0.4, -0.2), c(0.1, 0.6)]).unwrap();
    let eq = measure_nonmax_equal(&input, alpha, 3).unwrap();
    let gen = measure_nonmax_general(&input, alpha, alpha, 0.0, 0.0, 3).unwrap();
    assert_eq!(eq.branches.len(), gen.branches.len());
    for (x, y) in eq.branches.iter().zip(&gen.branches) {
        assert_eq!(x.alice_record, y.alice_record);
        assert_eq!(x.bob_record, y.bob_record);
        assert!((x.probability - y.probability).abs() < 1e-12);
        assert!(x.post_state.max_amplitude_diff(&y.post_state).unwrap() < 1e-12);
    }
}

#[test]
fn general_first_stage_leaves_gamma_rotation() {
    // z_a = -1, x_b = +1: Ψ1 becomes (cos γ |0⟩ + sin γ |1⟩)|1⟩ after Bob's
    // angle-selecting rotation succeeds at its first step
    let (alpha, beta) = (FRAC_PI_3, PI / 7.0);
    let gamma = (alpha - beta) / 2.0;
    let spec = EigenbasisSpec::nonmax_general(alpha, beta, 0.0, 0.0, 2);
    let expected = [
        [gamma.cos(), gamma.sin()],
        [gamma.sin(), -gamma.cos()],
        [gamma.cos(), -gamma.sin()],
        [gamma.sin(), gamma.cos()],
    ];
    let b_value = [1usize, 1, 0, 0];
    let za = controller_label("cnot", Party::Alice, 1);
    let xb = builder_label("cnot", Party::Bob, 1);
    let sa = builder_label("untwist", Party::Alice, 1);
    let zb = controller_label("untwist", Party::Bob, 1);
    for k in 1..=4 {
        let branches = nonmax_general_first_stage(&spec, &spec.eigenstate(k).unwrap()).unwrap();
        let mut checked = 0;
        for br in &branches {
            let alice = br.record(Party::Alice);
            let bob = br.record(Party::Bob);
            if alice.get(&za) == Some(-1) && bob.get(&xb) == Some(1) && alice.get(&sa) == Some(1) && bob.get(&zb) == Some(1) {
                let amps = br.state.amplitudes();
                let mut want = vec![c(0.0, 0.0); 4];
                want[b_value[k - 1]] = c(expected[k - 1][0], 0.0);
                want[2 + b_value[k - 1]] = c(expected[k - 1][1], 0.0);
                let ip: C64 = want.iter().zip(amps).map(|(w, a)| w.conj() * a).sum();
                assert!((ip.norm() - 1.0).abs() < 1e-12, "eigenstate {k}: {amps:?}");
                checked += 1;
            }
        }
        assert_eq!(checked, 1);
    }
}

#[test]
fn twist_identity_u_b_row_state_is_certain() {
    let spec = EigenbasisSpec::twist4x4(&Matrix::identity(2), 2).unwrap();
    // (|2_A 0_B⟩ + |3_A 1_B⟩)/√2 is index 9
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![c(0.0, 0.0); 16];
    amps[4 * 2] = c(h, 0.0);
    amps[4 * 3 + 1] = c(h, 0.0);
    let run = measure_4x4_twist(&spec.input_state(amps).unwrap(), &Matrix::identity(2), 2).unwrap();
    let d = run.outcome_distribution();
    assert!((d[&Inferred::Index(9)] - 1.0).abs() < 1e-12);
}

#[test]
fn twist_zero_zero_splits_top_left_cell() {
    let spec = EigenbasisSpec::twist4x4(&Matrix::identity(2), 2).unwrap();
    let mut amps = vec![c(0.0, 0.0); 16];
    amps[0] = c(1.0, 0.0);
    let p = measure_4x4_twist(&spec.input_state(amps).unwrap(), &Matrix::identity(2), 2)
        .unwrap()
        .index_probabilities();
    assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    assert!(p[2..].iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn twist_rotated_quadrant_is_certain_on_success() {
    let u = spin_rotation(PauliAxis::Y, 0.4);
    let spec = EigenbasisSpec::twist4x4(&u, 4).unwrap();
    for k in 13..=16 {
        let run = measure_4x4_twist(&spec.eigenstate(k).unwrap(), &u, 4).unwrap();
        for b in &run.branches {
            assert!(b.inferred == Inferred::Index(k) || b.inferred == Inferred::Failure);
        }
        assert!((run.success_probability - 0.75).abs() < 1e-12);
    }
}

#[test]
fn unsupported_u_b_is_validation_error() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let had = Matrix::from_rows(&[[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]);
    let mut amps = vec![c(0.0, 0.0); 16];
    amps[0] = c(1.0, 0.0);
    let spec = EigenbasisSpec::twist4x4(&Matrix::identity(2), 2).unwrap();
    let input = spec.input_state(amps).unwrap();
    assert!(matches!(measure_4x4_twist(&input, &had, 3), Err(nlmeas::Error::Validation(_))));
}

fn record(party: Party, entries: &[(&str, i8)]) -> OutcomeRecord {
    OutcomeRecord::from_entries(
        party,
        entries
            .iter()
            .map(|(l, v)| RecordEntry { label: l.to_string(), value: *v })
            .collect(),
    )
    .unwrap()
}

#[test]
fn inference_from_records_only() {
    let spec = EigenbasisSpec::twisted_product();
    let za = controller_label("twist", Party::Alice, 1);
    let xb = builder_label("twist", Party::Bob, 1);
    let alice = record(Party::Alice, &[("project/sigma_z_A", 1), (&za, 1)]);
    let bob = record(Party::Bob, &[(&xb, 1), ("final/sigma_z_B", 1)]);
    assert_eq!(infer_outcome(&alice, &bob, &spec).unwrap(), Inferred::Index(1));
    // block (-1, +1), final |1_A 0_B⟩ → Ψ4
    let alice = record(Party::Alice, &[("project/sigma_z_A", -1), (&za, -1)]);
    let bob = record(Party::Bob, &[(&xb, 1), ("final/sigma_z_B", 1)]);
    assert_eq!(infer_outcome(&alice, &bob, &spec).unwrap(), Inferred::Index(4));
    let truncated = record(Party::Bob, &[(&xb, 1)]);
    assert!(matches!(
        infer_outcome(&alice, &truncated, &spec),
        Err(nlmeas::Error::Structural(_))
    ));
}

#[test]
fn run_json_round_trips() {
    let spec = EigenbasisSpec::nonmax_general(0.7, 0.3, 0.2, 0.1, 2);
    let run = run(&spec, &spec.eigenstate(2).unwrap()).unwrap();
    let text = serde_json::to_string(&run).unwrap();
    let back: ProtocolRun = serde_json::from_str(&text).unwrap();
    assert_eq!(back.branches, run.branches);
    assert_eq!(back.spec, run.spec);
    assert_eq!(back.success_probability, run.success_probability);
}
