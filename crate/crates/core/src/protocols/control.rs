//! Deliberately causality-violating variant, kept as a negative control for
//! the audits.

use super::labels::{FINAL_B, PROJECT_A};
use super::{check_input, EigenbasisSpec, Inferred, ProtocolRun};
use crate::error::Result;
use crate::qcore::{outcome_bit, Gate, Party, PauliAxis, QubitId, StateVector};
use crate::stator::{Branch, Tree};

/// Alice measures A; Bob looks at her result and applies a Hadamard to B
/// when she found `|1_A⟩`, then measures B. The cross-party read goes
/// through the logged escape hatch, so the run completes and the audits can
/// flag it.
pub fn measure_cross_conditioned(input: &StateVector) -> Result<ProtocolRun> {
    const A: QubitId = QubitId(0);
    const B: QubitId = QubitId(1);
    let spec = EigenbasisSpec::twisted_product();
    check_input(&spec, input)?;
    let tree = Tree::new(Branch::new(input.clone()))
        .expand(|b| b.measure(Party::Alice, A, PauliAxis::Z, PROJECT_A, false))?
        .update(|b| {
            if b.read_unchecked(Party::Bob, Party::Alice, PROJECT_A)? < 0 {
                b.apply(Party::Bob, &Gate::hadamard(B), "peek:h")?;
            }
            Ok(())
        })?
        .expand(|b| b.measure(Party::Bob, B, PauliAxis::Z, FINAL_B, false))?;
    ProtocolRun::assemble("cross-conditioned", spec, tree.into_branches(), |alice, bob| {
        let a = outcome_bit(alice.value(PROJECT_A)?);
        let b = outcome_bit(bob.value(FINAL_B)?);
        Ok(Inferred::Index(1 + 2 * usize::from(a) + usize::from(b)))
    })
}
