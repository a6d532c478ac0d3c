//! Product-basis families.
//!
//! Alice measures `σ_z` on A. Bob prepares a `σ_y` stator on B for every
//! correction step and Alice, only if she found `|1_A⟩`, rotates her halves
//! by `α/2, α, 2α, ...`. Bob finally measures `σ_z` on B.

use super::correction::{closing_multiple, closing_parity, loop_key, CorrectionLoop, LoopTrace};
use super::labels::{FINAL_B, PROJECT_A, TWIST_STAGE};
use super::{EigenbasisSpec, FinalOutcome, Inferred};
use crate::error::Result;
use crate::qcore::{outcome_bit, Party, PauliAxis, QubitId};
use crate::stator::{Branch, ControllerAction, OutcomeRecord, RecordEntry, Tree};

const A: QubitId = QubitId(0);
const B: QubitId = QubitId(1);

fn base_angle(spec: &EigenbasisSpec, z_a: i8) -> f64 {
    if z_a < 0 {
        spec.alpha / 2.0
    } else {
        0.0
    }
}

pub(super) fn execute(spec: &EigenbasisSpec, root: Branch) -> Result<Vec<Branch>> {
    let tree = Tree::new(root).expand(|b| b.measure(Party::Alice, A, PauliAxis::Z, PROJECT_A, false))?;
    let correction = CorrectionLoop {
        stage: TWIST_STAGE,
        builder: Party::Bob,
        target: B,
        axis: PauliAxis::Y,
        steps: spec.n_ebits as usize,
    };
    let tree = correction.run(
        tree,
        |_| Ok(true),
        |b, multiplier| {
            let z_a = b.own(Party::Alice, PROJECT_A)?;
            Ok(ControllerAction::Rotate(multiplier * base_angle(spec, z_a)))
        },
    )?;
    let tree = tree.expand(|b| b.measure(Party::Bob, B, PauliAxis::Z, FINAL_B, false))?;
    Ok(tree.into_branches())
}

struct Decoded {
    a: u8,
    b_raw: u8,
    b: Option<u8>,
    key: Vec<RecordEntry>,
}

fn decode(spec: &EigenbasisSpec, alice: &OutcomeRecord, bob: &OutcomeRecord) -> Result<Decoded> {
    let steps = spec.n_ebits as usize;
    let z_a = alice.value(PROJECT_A)?;
    let trace = LoopTrace::from_records(alice, bob, TWIST_STAGE, Party::Bob, steps, true)?;
    let theta = base_angle(spec, z_a);
    let error = (trace.coefficient() - 1) as f64 * theta;
    let b_raw = outcome_bit(bob.value(FINAL_B)?);
    let b = closing_multiple(error)
        .map(|m| b_raw ^ ((trace.flips() + closing_parity(m)) % 2) as u8);
    let key = loop_key(alice, bob, TWIST_STAGE, Party::Bob, steps)?;
    Ok(Decoded {
        a: outcome_bit(z_a),
        b_raw,
        b,
        key,
    })
}

pub(super) fn infer(spec: &EigenbasisSpec, alice: &OutcomeRecord, bob: &OutcomeRecord) -> Result<Inferred> {
    let d = decode(spec, alice, bob)?;
    Ok(match d.b {
        Some(b) => Inferred::Index(1 + 2 * usize::from(d.a) + usize::from(b)),
        None => Inferred::Failure,
    })
}

/// Blocks are keyed by every ebit record; the displayed outcome is the raw
/// pair of system measurements.
pub(super) fn block_view(
    spec: &EigenbasisSpec,
    alice: &OutcomeRecord,
    bob: &OutcomeRecord,
) -> Result<Option<(Vec<RecordEntry>, FinalOutcome)>> {
    let d = decode(spec, alice, bob)?;
    Ok(d.b.map(|_| (d.key, FinalOutcome::Product { a: d.a, b: d.b_raw })))
}
