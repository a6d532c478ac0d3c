//! Nonmaximally entangled families.
//!
//! Untwisting route: a remote CNOT from A onto B turns every eigenstate into
//! a product state whose A part is rotated about y by `±α/2` (or `±β/2`,
//! depending on Bob's pair value). Bob undoes the rotation remotely through
//! stators built by Alice on A. When the CNOT left B flipped and the two
//! angles differ, a second loop, engaged by Alice only in that case, removes
//! the residual `α - β`. Both parties finish with `σ_z` measurements.
//!
//! Bell route: Bob rotates A by `±(α/2 - π/4)` conditioned on the x value of
//! B, mapping the basis onto the Bell states, which are then read out by the
//! two-ebit nonlocal Bell measurement.

use super::correction::{closing_multiple, closing_parity, loop_key, CorrectionLoop, LoopTrace};
use super::labels::{BELL_STAGE, CNOT_STAGE, FINAL_A, FINAL_B, REALIGN_STAGE, REBALANCE_STAGE, UNTWIST_STAGE};
use super::{EigenbasisSpec, Family, FinalOutcome, Inferred};
use crate::error::Result;
use crate::qcore::{outcome_bit, Gate, Party, PauliAxis, QubitId};
use crate::stator::{
    bell_outcome, build_stator, builder_label, controller_label, remote_bell_measurement, remote_cnot, BellState,
    Branch, ControllerAction, OutcomeRecord, RecordEntry, Tree,
};
use std::f64::consts::{FRAC_PI_4, PI};

const A: QubitId = QubitId(0);
const B: QubitId = QubitId(1);

fn on_axis(x: f64) -> bool {
    x.abs() < 1e-12 || (x - PI).abs() < 1e-12
}

/// Both angles at 0 or π: the basis is the computational one up to labels.
fn degenerate(spec: &EigenbasisSpec) -> bool {
    on_axis(spec.alpha) && on_axis(spec.beta)
}

fn two_angles(spec: &EigenbasisSpec) -> bool {
    spec.family == Family::NonmaxGeneral && (spec.alpha - spec.beta).abs() > 1e-15
}

fn pair_angle(spec: &EigenbasisSpec, pair: u8) -> f64 {
    if pair == 0 {
        spec.alpha
    } else {
        spec.beta
    }
}

fn x_b_label() -> String {
    builder_label(CNOT_STAGE, Party::Bob, 1)
}

fn z_a_label() -> String {
    controller_label(CNOT_STAGE, Party::Alice, 1)
}

fn finish(tree: Tree) -> Result<Vec<Branch>> {
    let tree = tree.expand(|b| b.measure(Party::Alice, A, PauliAxis::Z, FINAL_A, false))?;
    Ok(tree
        .expand(|b| b.measure(Party::Bob, B, PauliAxis::Z, FINAL_B, false))?
        .into_branches())
}

pub(super) fn execute_untwist(spec: &EigenbasisSpec, root: Branch, complete: bool) -> Result<Vec<Branch>> {
    if degenerate(spec) {
        return if complete { finish(Tree::new(root)) } else { Ok(vec![root]) };
    }
    let mut root = root;
    if spec.family == Family::NonmaxGeneral {
        // local phases that map the basis onto its zero-phase form
        let chi = -(spec.phi1 + spec.phi2) / 2.0;
        let psi = (spec.phi2 - spec.phi1) / 2.0;
        if chi != 0.0 {
            root.apply(Party::Alice, &Gate::phase(chi, A)?, "dephase")?;
        }
        if psi != 0.0 {
            root.apply(Party::Bob, &Gate::phase(psi, B)?, "dephase")?;
        }
    }
    let tree = Tree::new(root).expand(|b| {
        let mut out = Vec::with_capacity(4);
        for (b, stator) in build_stator(b, B, PauliAxis::X, CNOT_STAGE, 1)? {
            out.extend(remote_cnot(b, &stator, A, CNOT_STAGE)?.into_iter().map(|(b, _)| b));
        }
        Ok(out)
    })?;

    let steps = spec.n_ebits as usize - 1;
    let untwist = CorrectionLoop {
        stage: UNTWIST_STAGE,
        builder: Party::Alice,
        target: A,
        axis: PauliAxis::Y,
        steps,
    };
    let split = two_angles(spec);
    let tree = untwist.run(
        tree,
        |_| Ok(true),
        |b, multiplier| {
            let sign = f64::from(b.own(Party::Bob, &x_b_label())?);
            let scale = multiplier * sign / 2.0;
            Ok(if split {
                ControllerAction::Select {
                    control: B,
                    angles: [scale * spec.alpha, scale * spec.beta],
                }
            } else {
                ControllerAction::Rotate(scale * spec.alpha)
            })
        },
    )?;
    if !complete {
        return Ok(tree.into_branches());
    }
    let tree = if split {
        let realign = CorrectionLoop {
            stage: REALIGN_STAGE,
            ..untwist
        };
        realign.run(
            tree,
            |b| Ok(b.own(Party::Alice, &z_a_label())? < 0),
            |b, multiplier| {
                let sign = f64::from(b.own(Party::Bob, &x_b_label())?);
                let delta = multiplier * sign * (spec.beta - spec.alpha) / 2.0;
                Ok(ControllerAction::Select {
                    control: B,
                    angles: [delta, -delta],
                })
            },
        )?
    } else {
        tree
    };
    finish(tree)
}

struct UntwistDecoded {
    /// Alice's bit with the loop frame removed, `None` on failure.
    a: Option<u8>,
    /// Bob's raw final bit.
    b_raw: u8,
    /// Bob's pair value before the CNOT correction.
    pair: u8,
    key: Vec<RecordEntry>,
}

fn decode_untwist(spec: &EigenbasisSpec, alice: &OutcomeRecord, bob: &OutcomeRecord) -> Result<UntwistDecoded> {
    let a_raw = outcome_bit(alice.value(FINAL_A)?);
    let b_raw = outcome_bit(bob.value(FINAL_B)?);
    if degenerate(spec) {
        let pair = a_raw ^ b_raw;
        let a = a_raw ^ u8::from(on_axis(pair_angle(spec, pair) - PI));
        return Ok(UntwistDecoded {
            a: Some(a),
            b_raw: pair,
            pair,
            key: Vec::new(),
        });
    }
    let sign = f64::from(bob.value(&x_b_label())?);
    let z_a = alice.value(&z_a_label())?;
    let flipped = z_a < 0;
    let pair = b_raw ^ u8::from(flipped);
    let steps = spec.n_ebits as usize - 1;

    let first = LoopTrace::from_records(alice, bob, UNTWIST_STAGE, Party::Alice, steps, true)?;
    let needed = sign * pair_angle(spec, pair) / 2.0;
    let mut net = first.coefficient() as f64 * sign * pair_angle(spec, b_raw) / 2.0;
    let mut flips = first.flips();
    if two_angles(spec) {
        let second = LoopTrace::from_records(alice, bob, REALIGN_STAGE, Party::Alice, steps, flipped)?;
        let z_sign = if b_raw == 0 { 1.0 } else { -1.0 };
        net += second.coefficient() as f64 * sign * z_sign * (spec.beta - spec.alpha) / 2.0;
        flips += second.flips();
    }
    let a = closing_multiple(net - needed).map(|m| a_raw ^ ((flips + closing_parity(m)) % 2) as u8);
    let key = vec![
        RecordEntry { label: z_a_label(), value: z_a },
        RecordEntry { label: x_b_label(), value: sign as i8 },
    ];
    Ok(UntwistDecoded { a, b_raw, pair, key })
}

pub(super) fn infer_untwist(spec: &EigenbasisSpec, alice: &OutcomeRecord, bob: &OutcomeRecord) -> Result<Inferred> {
    let d = decode_untwist(spec, alice, bob)?;
    Ok(match d.a {
        Some(a) => Inferred::Index(1 + usize::from(a) + 2 * usize::from(d.pair)),
        None => Inferred::Failure,
    })
}

/// Blocks are keyed by the remote CNOT records; the displayed outcome is A
/// with the untwisting frame removed and B as measured.
pub(super) fn block_view_untwist(
    spec: &EigenbasisSpec,
    alice: &OutcomeRecord,
    bob: &OutcomeRecord,
) -> Result<Option<(Vec<RecordEntry>, FinalOutcome)>> {
    let d = decode_untwist(spec, alice, bob)?;
    Ok(d.a.map(|a| (d.key, FinalOutcome::Product { a, b: d.b_raw })))
}

fn rebalance_angle(spec: &EigenbasisSpec) -> f64 {
    spec.alpha / 2.0 - FRAC_PI_4
}

fn rebalance_active(spec: &EigenbasisSpec) -> bool {
    rebalance_angle(spec).abs() > 1e-12
}

pub(super) fn execute_bell(spec: &EigenbasisSpec, root: Branch) -> Result<Vec<Branch>> {
    let theta = rebalance_angle(spec);
    let mut tree = Tree::new(root);
    if rebalance_active(spec) {
        let rebalance = CorrectionLoop {
            stage: REBALANCE_STAGE,
            builder: Party::Alice,
            target: A,
            axis: PauliAxis::Y,
            steps: spec.n_ebits as usize - 2,
        };
        tree = rebalance.run(
            tree,
            |_| Ok(true),
            |_, multiplier| {
                Ok(ControllerAction::XCoupled {
                    control: B,
                    angle: multiplier * theta,
                })
            },
        )?;
    }
    Ok(tree
        .expand(|b| remote_bell_measurement(b, A, B, BELL_STAGE))?
        .into_branches())
}

/// The Bell state A,B would be in without the loop's Pauli factors.
fn decode_bell(spec: &EigenbasisSpec, alice: &OutcomeRecord, bob: &OutcomeRecord) -> Result<Option<BellState>> {
    let raw = bell_outcome(alice, bob, BELL_STAGE)?;
    let (flips, closing, idle) = if rebalance_active(spec) {
        let steps = spec.n_ebits as usize - 2;
        let trace = LoopTrace::from_records(alice, bob, REBALANCE_STAGE, Party::Alice, steps, true)?;
        let error = (trace.coefficient() - 1) as f64 * rebalance_angle(spec);
        match closing_multiple(error) {
            Some(m) => (trace.flips(), closing_parity(m), trace.idle_flips()),
            None => return Ok(None),
        }
    } else {
        (0, 0, 0)
    };
    // a flip is σ_y(A), a closing factor σ_x(B)σ_y(A), an idle flip σ_x(B)
    let (zz, xx) = raw.parities();
    Ok(Some(BellState::from_parities(
        zz ^ ((flips + idle) % 2 == 1),
        xx ^ ((flips + closing) % 2 == 1),
    )))
}

pub(super) fn infer_bell(spec: &EigenbasisSpec, alice: &OutcomeRecord, bob: &OutcomeRecord) -> Result<Inferred> {
    Ok(match decode_bell(spec, alice, bob)? {
        Some(state) => Inferred::Index(state.index() + 1),
        None => Inferred::Failure,
    })
}

pub(super) fn block_view_bell(
    spec: &EigenbasisSpec,
    alice: &OutcomeRecord,
    bob: &OutcomeRecord,
) -> Result<Option<(Vec<RecordEntry>, FinalOutcome)>> {
    let key = if rebalance_active(spec) {
        loop_key(alice, bob, REBALANCE_STAGE, Party::Alice, spec.n_ebits as usize - 2)?
    } else {
        Vec::new()
    };
    Ok(decode_bell(spec, alice, bob)?.map(|state| (key, FinalOutcome::Bell { quadrant: 0, state })))
}
