//! Two-ququart family. Each ququart is a pair of qubits `(hi, lo)`: `hi`
//! selects the two-dimensional subspace, `lo` the state within it.
//!
//! Both parties measure their `hi` qubit. Bob then builds stators on `B_lo`
//! only if he found the upper subspace, and Alice applies the inverse of
//! `U_B` through them only if she did; the twisted quadrant is rotated back
//! to plain Bell states, read out by the nonlocal Bell measurement.

use super::basis::pauli_rotation_of;
use super::correction::{closing_multiple, closing_parity, loop_key, CorrectionLoop, LoopTrace};
use super::labels::{BELL_STAGE, PROJECT_A_HI, PROJECT_B_HI, ROTATE_STAGE};
use super::{EigenbasisSpec, FinalOutcome, Inferred};
use crate::error::Result;
use crate::qcore::{outcome_bit, Party, PauliAxis, QubitId};
use crate::stator::{bell_outcome, remote_bell_measurement, BellState, Branch, ControllerAction, OutcomeRecord, RecordEntry, Tree};

const A_HI: QubitId = QubitId(0);
const A_LO: QubitId = QubitId(1);
const B_HI: QubitId = QubitId(2);
const B_LO: QubitId = QubitId(3);

fn rotation(spec: &EigenbasisSpec) -> Result<Option<(PauliAxis, f64)>> {
    let (axis, theta) = pauli_rotation_of(&spec.u_b_matrix())?;
    Ok((theta.abs() > 1e-12).then_some((axis, theta)))
}

pub(super) fn execute(spec: &EigenbasisSpec, root: Branch) -> Result<Vec<Branch>> {
    let tree = Tree::new(root)
        .expand(|b| b.measure(Party::Alice, A_HI, PauliAxis::Z, PROJECT_A_HI, false))?
        .expand(|b| b.measure(Party::Bob, B_HI, PauliAxis::Z, PROJECT_B_HI, false))?;
    let tree = match rotation(spec)? {
        Some((axis, theta)) => {
            let undo = CorrectionLoop {
                stage: ROTATE_STAGE,
                builder: Party::Bob,
                target: B_LO,
                axis,
                steps: spec.n_ebits as usize - 2,
            };
            undo.run(
                tree,
                |b| Ok(b.own(Party::Bob, PROJECT_B_HI)? < 0),
                |b, multiplier| {
                    let upper = b.own(Party::Alice, PROJECT_A_HI)? < 0;
                    Ok(ControllerAction::Rotate(if upper { -multiplier * theta } else { 0.0 }))
                },
            )?
        }
        None => tree,
    };
    Ok(tree
        .expand(|b| remote_bell_measurement(b, A_LO, B_LO, BELL_STAGE))?
        .into_branches())
}

fn decode(spec: &EigenbasisSpec, alice: &OutcomeRecord, bob: &OutcomeRecord) -> Result<(u8, Option<BellState>)> {
    let hi_a = outcome_bit(alice.value(PROJECT_A_HI)?);
    let hi_b = outcome_bit(bob.value(PROJECT_B_HI)?);
    let quadrant = 2 * hi_a + hi_b;
    let raw = bell_outcome(alice, bob, BELL_STAGE)?;
    let Some((axis, theta)) = rotation(spec)? else {
        return Ok((quadrant, Some(raw)));
    };
    let steps = spec.n_ebits as usize - 2;
    let trace = LoopTrace::from_records(alice, bob, ROTATE_STAGE, Party::Bob, steps, hi_b == 1)?;
    let base = if hi_a == 1 { -theta } else { 0.0 };
    let needed = if hi_a == 1 && hi_b == 1 { -theta } else { 0.0 };
    let error = trace.coefficient() as f64 * base - needed;
    Ok((
        quadrant,
        closing_multiple(error).map(|m| {
            if (trace.flips() + closing_parity(m)) % 2 == 1 {
                raw.after_pauli(axis)
            } else {
                raw
            }
        }),
    ))
}

pub(super) fn infer(spec: &EigenbasisSpec, alice: &OutcomeRecord, bob: &OutcomeRecord) -> Result<Inferred> {
    let (quadrant, state) = decode(spec, alice, bob)?;
    Ok(match state {
        Some(s) => Inferred::Index(4 * usize::from(quadrant) + s.index() + 1),
        None => Inferred::Failure,
    })
}

pub(super) fn block_view(
    spec: &EigenbasisSpec,
    alice: &OutcomeRecord,
    bob: &OutcomeRecord,
) -> Result<Option<(Vec<RecordEntry>, FinalOutcome)>> {
    let key = if rotation(spec)?.is_some() {
        loop_key(alice, bob, ROTATE_STAGE, Party::Bob, spec.n_ebits as usize - 2)?
    } else {
        Vec::new()
    };
    let (quadrant, state) = decode(spec, alice, bob)?;
    Ok(state.map(|state| (key, FinalOutcome::Bell { quadrant, state })))
}
