//! Repeat-until-success untwisting over a sequence of stators.
//!
//! Step `k` (1-based) spends one fresh ebit. The builder engages its target
//! only while its own condition holds and every earlier step of the loop gave
//! it `σ_x = -1`; the controller applies the fixed angle `2^{k-1}·θ` on every
//! step whatever happened before. The net rotation is therefore
//! `θ·Σ s_k 2^{k-1}` over the engaged steps, and each engaged step with
//! controller outcome `-1` leaves one Pauli factor on the target.
//! A disengaged builder reads its half in `σ_z`; the controller's result then
//! disagrees with it exactly when the controller's action flipped its half.

use crate::error::Result;
use crate::qcore::{Party, PauliAxis, QubitId};
use crate::stator::{
    builder_label, builder_step, controller_label, controller_step, idle_label, Branch, ControllerAction,
    OutcomeRecord, RecordEntry, Tree,
};

pub(crate) struct CorrectionLoop<'a> {
    pub stage: &'a str,
    pub builder: Party,
    pub target: QubitId,
    pub axis: PauliAxis,
    pub steps: usize,
}

impl CorrectionLoop<'_> {
    /// `condition` is evaluated on the builder's own data; `action` maps the
    /// step multiplier `2^{k-1}` to the controller's operation, reading only
    /// the controller's own data.
    pub fn run<C, A>(&self, mut tree: Tree, condition: C, action: A) -> Result<Tree>
    where
        C: Fn(&mut Branch) -> Result<bool>,
        A: Fn(&mut Branch, f64) -> Result<ControllerAction>,
    {
        let controller = self.builder.other();
        for k in 1..=self.steps {
            let c_label = controller_label(self.stage, controller, k);
            let multiplier = f64::from(1u32 << (k - 1));
            tree = tree.expand(|mut branch| {
                let ebit = branch.prepare_ebit()?;
                let mut engaged = condition(&mut branch)?;
                for j in 1..k {
                    if !engaged {
                        break;
                    }
                    engaged = branch.own(self.builder, &builder_label(self.stage, self.builder, j))? < 0;
                }
                let mut out = Vec::with_capacity(4);
                for mut b in builder_step(branch, ebit, self.target, self.axis, engaged, self.stage, k)? {
                    let act = action(&mut b, multiplier)?;
                    out.extend(controller_step(b, controller, ebit.half(controller), act, &c_label)?);
                }
                Ok(out)
            })?;
        }
        Ok(tree)
    }
}

/// Loop history reconstructed from the two records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopTrace {
    pub engaged: Vec<bool>,
    /// Builder's `σ_x` result on engaged steps, its `σ_z` result otherwise.
    pub signs: Vec<i8>,
    pub corrections: Vec<i8>,
}

impl LoopTrace {
    /// `condition` is the builder's engagement condition, itself a function
    /// of the records.
    pub fn from_records(
        alice: &OutcomeRecord,
        bob: &OutcomeRecord,
        stage: &str,
        builder: Party,
        steps: usize,
        condition: bool,
    ) -> Result<Self> {
        let (b_rec, c_rec) = match builder {
            Party::Alice => (alice, bob),
            Party::Bob => (bob, alice),
        };
        let mut trace = LoopTrace {
            engaged: Vec::with_capacity(steps),
            signs: Vec::with_capacity(steps),
            corrections: Vec::with_capacity(steps),
        };
        let mut live = condition;
        for k in 1..=steps {
            let s = if live {
                b_rec.value(&builder_label(stage, builder, k))?
            } else {
                b_rec.value(&idle_label(stage, builder, k))?
            };
            let z = c_rec.value(&controller_label(stage, builder.other(), k))?;
            trace.engaged.push(live);
            trace.signs.push(s);
            trace.corrections.push(z);
            live = live && s < 0;
        }
        Ok(trace)
    }

    /// `Σ s_k 2^{k-1}` over engaged steps. Equals 1 when some engaged step
    /// gave `+1`, and `1 - 2^L` when all `L` steps were engaged and gave `-1`.
    pub fn coefficient(&self) -> i64 {
        self.engaged
            .iter()
            .zip(&self.signs)
            .enumerate()
            .filter(|(_, (e, _))| **e)
            .map(|(k, (_, s))| i64::from(*s) << k)
            .sum()
    }

    /// Pauli factors left on the target.
    pub fn flips(&self) -> u32 {
        self.engaged
            .iter()
            .zip(&self.corrections)
            .filter(|(e, z)| **e && **z < 0)
            .count() as u32
    }

    /// Disengaged steps on which the controller's half ended up flipped.
    pub fn idle_flips(&self) -> u32 {
        self.engaged
            .iter()
            .zip(self.signs.iter().zip(&self.corrections))
            .filter(|(e, (s, z))| !**e && s != z)
            .count() as u32
    }
}

/// If `error` is an integer multiple `m` of `π/2` (within 1e-9 in units of
/// `π/2`), returns `m`: the residual rotation is then the Pauli `σ^m` up to
/// phase.
pub fn closing_multiple(error: f64) -> Option<i64> {
    let m = error / std::f64::consts::FRAC_PI_2;
    let r = m.round();
    ((m - r).abs() < 1e-9).then_some(r as i64)
}

/// Record entries of a loop, step by step: controller `σ_z` then the
/// builder's entry, whichever basis it was taken in.
pub(crate) fn loop_key(
    alice: &OutcomeRecord,
    bob: &OutcomeRecord,
    stage: &str,
    builder: Party,
    steps: usize,
) -> Result<Vec<RecordEntry>> {
    let record = |p: Party| if p == Party::Alice { alice } else { bob };
    let mut key = Vec::with_capacity(2 * steps);
    for k in 1..=steps {
        let label = controller_label(stage, builder.other(), k);
        key.push(RecordEntry { value: record(builder.other()).value(&label)?, label });
        let engaged = builder_label(stage, builder, k);
        let label = if record(builder).get(&engaged).is_some() { engaged } else { idle_label(stage, builder, k) };
        key.push(RecordEntry { value: record(builder).value(&label)?, label });
    }
    Ok(key)
}

/// Parity contribution of a closing multiple.
pub(crate) fn closing_parity(m: i64) -> u32 {
    m.rem_euclid(2) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn records(signs: &[i8], zs: &[i8]) -> (OutcomeRecord, OutcomeRecord) {
        records_with(signs, zs, usize::MAX)
    }

    /// Builder entries past step `live` are idle ones.
    fn records_with(signs: &[i8], zs: &[i8], live: usize) -> (OutcomeRecord, OutcomeRecord) {
        let bob: Vec<RecordEntry> = signs
            .iter()
            .enumerate()
            .map(|(k, s)| RecordEntry {
                label: if k < live { builder_label("t", Party::Bob, k + 1) } else { idle_label("t", Party::Bob, k + 1) },
                value: *s,
            })
            .collect();
        let alice: Vec<RecordEntry> = zs
            .iter()
            .enumerate()
            .map(|(k, z)| RecordEntry { label: controller_label("t", Party::Alice, k + 1), value: *z })
            .collect();
        (
            OutcomeRecord::from_entries(Party::Alice, alice).unwrap(),
            OutcomeRecord::from_entries(Party::Bob, bob).unwrap(),
        )
    }

    #[test]
    fn coefficient_after_first_success_is_one() {
        for first in 1..=4 {
            let mut signs = vec![-1i8; 5];
            signs[first - 1] = 1;
            let (a, b) = records_with(&signs, &[1; 5], first);
            let t = LoopTrace::from_records(&a, &b, "t", Party::Bob, 5, true).unwrap();
            assert_eq!(t.coefficient(), 1);
            assert_eq!(t.engaged.iter().filter(|e| **e).count(), first);
        }
    }

    #[test]
    fn exhausted_loop_coefficient() {
        let (a, b) = records(&[-1; 3], &[-1, 1, -1]);
        let t = LoopTrace::from_records(&a, &b, "t", Party::Bob, 3, true).unwrap();
        assert_eq!(t.coefficient(), 1 - 8);
        assert_eq!(t.flips(), 2);
    }

    #[test]
    fn disengaged_loop_is_inert() {
        let (a, b) = records_with(&[-1, 1], &[-1, -1], 0);
        let t = LoopTrace::from_records(&a, &b, "t", Party::Bob, 2, false).unwrap();
        assert_eq!(t.coefficient(), 0);
        assert_eq!(t.flips(), 0);
        assert_eq!(t.idle_flips(), 1);
    }

    #[test]
    fn closing_detection() {
        assert_eq!(closing_multiple(0.0), Some(0));
        assert_eq!(closing_multiple(-FRAC_PI_2), Some(-1));
        assert_eq!(closing_multiple(PI), Some(2));
        assert_eq!(closing_multiple(0.3), None);
        assert_eq!(closing_parity(-1), 1);
        assert_eq!(closing_parity(-2), 0);
    }

    #[test]
    fn missing_step_is_structural() {
        let (a, b) = records(&[-1], &[1]);
        assert!(matches!(
            LoopTrace::from_records(&a, &b, "t", Party::Bob, 2, true),
            Err(crate::Error::Structural(_))
        ));
    }
}
