//! Party-disciplined remote operations built on shared ebits.
//!
//! A [`Branch`] is one path through a protocol: its Born weight, the joint
//! state, and a [`LocalityContext`] holding both parties' outcome records and
//! an audit log. Every gate goes through [`Branch::apply`], which refuses
//! targets owned by a different party, and every classical condition goes
//! through [`Branch::read`], which refuses to let a party read the other
//! party's record. Measurements split a branch into its outcomes.
//!
//! The stator primitives here follow one pattern. The *builder* owns the
//! target qubit and one ebit half. It entangles its half with the target
//! through a controlled `σ_axis` and measures `σ_x` on the half, recording the
//! sign `s`. What remains is a stator on the *controller*'s half `h`:
//!
//! ```text
//! S = |0_h⟩ ⊗ I + s |1_h⟩ ⊗ σ_axis(target),     σ_x(h) S = s σ_axis(target) S
//! ```
//!
//! A rotation `exp(iθσ_x)` on `h` followed by a `σ_z` measurement with result
//! `z` then acts on the target as
//!
//! ```text
//! [ (1+z)/2 · I + s (1-z)/2 · σ_axis ] · exp(iθ s σ_axis)
//! ```
//!
//! Neither party learns the other's outcome; the sign and correction are
//! folded in later, when the records are compared.

use crate::error::{bail, Error, Result};
use crate::qcore::{
    c, outcome_bit, spin_rotation, Gate, Matrix, Party, PauliAxis, QubitId, Role, StateVector,
};
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordEntry {
    pub label: String,
    pub value: i8,
}

/// Append-only log of one party's measurement results, each `+1` or `-1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutcomeRecord {
    party: Party,
    entries: Vec<RecordEntry>,
}

impl OutcomeRecord {
    pub fn new(party: Party) -> Self {
        OutcomeRecord {
            party,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(party: Party, entries: Vec<RecordEntry>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| e.value != 1 && e.value != -1) {
            bail!(Structural, "record value for {:?} is {}, not ±1", e.label, e.value);
        }
        Ok(OutcomeRecord { party, entries })
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn entries(&self) -> &[RecordEntry] {
        &self.entries
    }

    pub fn get(&self, label: &str) -> Option<i8> {
        self.entries.iter().find(|e| e.label == label).map(|e| e.value)
    }

    /// Like [`get`](Self::get) but a missing entry is a structural error.
    pub fn value(&self, label: &str) -> Result<i8> {
        match self.get(label) {
            Some(v) => Ok(v),
            None => bail!(Structural, "{} record has no entry {label:?}", self.party),
        }
    }

    fn push(&mut self, label: String, value: i8) -> Result<()> {
        debug_assert!(value == 1 || value == -1);
        if self.get(&label).is_some() {
            bail!(Structural, "{} record already holds {label:?}", self.party);
        }
        self.entries.push(RecordEntry { label, value });
        Ok(())
    }
}

/// A gate application as seen by the audit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateEvent {
    pub party: Party,
    pub label: String,
    pub targets: Vec<QubitId>,
    /// Hash of the exact matrix bits, for schedule comparisons.
    pub fingerprint: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadEvent {
    pub reader: Party,
    pub owner: Party,
    pub label: String,
}

/// Per-branch bookkeeping: records, audit trail and ebit accounting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalityContext {
    alice: OutcomeRecord,
    bob: OutcomeRecord,
    gates: Vec<GateEvent>,
    reads: Vec<ReadEvent>,
    violations: Vec<String>,
    live_halves: Vec<(QubitId, QubitId)>,
    ebits_prepared: u32,
    ebits_consumed: u32,
    ebit_budget: Option<u32>,
}

impl Default for LocalityContext {
    fn default() -> Self {
        LocalityContext {
            alice: OutcomeRecord::new(Party::Alice),
            bob: OutcomeRecord::new(Party::Bob),
            gates: Vec::new(),
            reads: Vec::new(),
            violations: Vec::new(),
            live_halves: Vec::new(),
            ebits_prepared: 0,
            ebits_consumed: 0,
            ebit_budget: None,
        }
    }
}

impl LocalityContext {
    pub fn with_ebit_budget(budget: u32) -> Self {
        LocalityContext {
            ebit_budget: Some(budget),
            ..Self::default()
        }
    }

    pub fn record(&self, party: Party) -> &OutcomeRecord {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }

    fn record_mut(&mut self, party: Party) -> &mut OutcomeRecord {
        match party {
            Party::Alice => &mut self.alice,
            Party::Bob => &mut self.bob,
        }
    }

    pub fn gates(&self) -> &[GateEvent] {
        &self.gates
    }

    /// Gate events of one party, in order.
    pub fn gate_schedule(&self, party: Party) -> Vec<&GateEvent> {
        self.gates.iter().filter(|g| g.party == party).collect()
    }

    pub fn reads(&self) -> &[ReadEvent] {
        &self.reads
    }

    /// Cross-party gates and cross-party reads observed in this branch.
    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn ebits_prepared(&self) -> u32 {
        self.ebits_prepared
    }

    pub fn ebits_consumed(&self) -> u32 {
        self.ebits_consumed
    }

    /// Ebits prepared but not yet fully measured.
    pub fn ebits_outstanding(&self) -> usize {
        self.live_halves.len()
    }

    fn on_discard(&mut self, id: QubitId) {
        for pair in &mut self.live_halves {
            if pair.0 == id {
                pair.0 = QubitId(u32::MAX);
            } else if pair.1 == id {
                pair.1 = QubitId(u32::MAX);
            }
        }
        let before = self.live_halves.len();
        self.live_halves
            .retain(|p| !(p.0 == QubitId(u32::MAX) && p.1 == QubitId(u32::MAX)));
        self.ebits_consumed += (before - self.live_halves.len()) as u32;
    }
}

/// The two halves of one shared ebit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EbitPair {
    pub alice: QubitId,
    pub bob: QubitId,
}

impl EbitPair {
    pub fn half(&self, party: Party) -> QubitId {
        match party {
            Party::Alice => self.alice,
            Party::Bob => self.bob,
        }
    }
}

/// One path through a protocol.
#[derive(Clone, Debug)]
pub struct Branch {
    pub probability: f64,
    pub state: StateVector,
    pub ctx: LocalityContext,
}

impl Branch {
    pub fn new(state: StateVector) -> Self {
        Branch {
            probability: 1.0,
            state,
            ctx: LocalityContext::default(),
        }
    }

    pub fn with_context(state: StateVector, ctx: LocalityContext) -> Self {
        Branch {
            probability: 1.0,
            state,
            ctx,
        }
    }

    pub fn record(&self, party: Party) -> &OutcomeRecord {
        self.ctx.record(party)
    }

    fn log_gate(&mut self, party: Party, gate: &Gate, label: &str, cross: bool) {
        let mut h = DefaultHasher::new();
        label.hash(&mut h);
        for z in gate.matrix().as_slice() {
            z.re.to_bits().hash(&mut h);
            z.im.to_bits().hash(&mut h);
        }
        self.ctx.gates.push(GateEvent {
            party,
            label: label.to_string(),
            targets: gate.targets().to_vec(),
            fingerprint: h.finish(),
        });
        if cross {
            self.ctx.violations.push(format!(
                "{party} applied {label} to qubits it does not own"
            ));
        }
    }

    fn owns_all(&self, party: Party, targets: &[QubitId]) -> Result<bool> {
        for t in targets {
            if self.state.qubit(*t)?.party != party {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Applies `gate` on behalf of `party`. Every target must belong to `party`.
    pub fn apply(&mut self, party: Party, gate: &Gate, label: &str) -> Result<()> {
        if !self.owns_all(party, gate.targets())? {
            bail!(Locality, "{party} cannot apply {label}: a target belongs to {}", party.other());
        }
        self.state = self.state.apply_gate(gate)?;
        self.log_gate(party, gate, label, false);
        Ok(())
    }

    /// Applies `gate` without the ownership check; a cross-party gate is
    /// logged as a violation instead of being refused. Only negative controls
    /// use this.
    pub fn apply_unchecked(&mut self, party: Party, gate: &Gate, label: &str) -> Result<()> {
        let cross = !self.owns_all(party, gate.targets())?;
        self.state = self.state.apply_gate(gate)?;
        self.log_gate(party, gate, label, cross);
        Ok(())
    }

    /// `reader` consults `owner`'s record. Reading the other party's record is
    /// a locality error.
    pub fn read(&mut self, reader: Party, owner: Party, label: &str) -> Result<i8> {
        if reader != owner {
            bail!(Locality, "{reader} attempted to read {owner}'s record entry {label:?}");
        }
        let v = self.ctx.record(owner).value(label)?;
        self.ctx.reads.push(ReadEvent {
            reader,
            owner,
            label: label.to_string(),
        });
        Ok(v)
    }

    /// Shorthand for a party reading its own record.
    pub fn own(&mut self, party: Party, label: &str) -> Result<i8> {
        self.read(party, party, label)
    }

    /// Reads across the party boundary, logging a violation. Only negative
    /// controls use this.
    pub fn read_unchecked(&mut self, reader: Party, owner: Party, label: &str) -> Result<i8> {
        let v = self.ctx.record(owner).value(label)?;
        if reader != owner {
            self.ctx
                .violations
                .push(format!("{reader} read {owner}'s record entry {label:?}"));
        }
        self.ctx.reads.push(ReadEvent {
            reader,
            owner,
            label: label.to_string(),
        });
        Ok(v)
    }

    /// Appends a fresh shared ebit. This is the only operation that creates
    /// correlations across the party boundary.
    pub fn prepare_ebit(&mut self) -> Result<EbitPair> {
        if let Some(budget) = self.ctx.ebit_budget {
            if self.ctx.ebits_prepared >= budget {
                bail!(Resource, "ebit budget of {budget} exhausted");
            }
        }
        let (state, alice, bob) = self.state.append_ebit()?;
        self.state = state;
        self.ctx.ebits_prepared += 1;
        self.ctx.live_halves.push((alice, bob));
        Ok(EbitPair { alice, bob })
    }

    /// `party` measures `σ_axis` on `target` and records the result under
    /// `label`. With `discard` the measured qubit leaves the register.
    pub fn measure(
        self,
        party: Party,
        target: QubitId,
        axis: PauliAxis,
        label: &str,
        discard: bool,
    ) -> Result<Vec<Branch>> {
        let q = self.state.qubit(target)?;
        if q.party != party {
            bail!(Locality, "{party} cannot measure {}, which belongs to {}", q.label(), q.party);
        }
        let outcomes = if discard {
            self.state.measure_and_discard(axis, target)?
        } else {
            self.state.measure_branches(axis, target)?
        };
        let mut out = Vec::with_capacity(outcomes.len());
        for m in outcomes {
            let mut ctx = self.ctx.clone();
            ctx.record_mut(party).push(label.to_string(), m.outcome)?;
            if discard && q.role == Role::EbitHalf {
                ctx.on_discard(target);
            }
            out.push(Branch {
                probability: self.probability * m.probability,
                state: m.post,
                ctx,
            });
        }
        Ok(out)
    }
}

/// A set of branches explored together.
#[derive(Clone, Debug)]
pub struct Tree {
    branches: Vec<Branch>,
}

impl Tree {
    pub fn new(root: Branch) -> Self {
        Tree {
            branches: vec![root],
        }
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn into_branches(self) -> Vec<Branch> {
        self.branches
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    /// Runs `step` on every branch and concatenates the results in order.
    pub fn expand<F>(self, mut step: F) -> Result<Tree>
    where
        F: FnMut(Branch) -> Result<Vec<Branch>>,
    {
        let mut out = Vec::with_capacity(self.branches.len() * 2);
        for b in self.branches {
            out.extend(step(b)?);
        }
        Ok(Tree { branches: out })
    }

    /// Runs a non-splitting `step` on every branch.
    pub fn update<F>(mut self, mut step: F) -> Result<Tree>
    where
        F: FnMut(&mut Branch) -> Result<()>,
    {
        for b in &mut self.branches {
            step(b)?;
        }
        Ok(self)
    }
}

/// Label for a record entry, e.g. `untwist/sigma_x_b#2`.
pub fn record_label(stage: &str, axis: PauliAxis, qubit: &str, step: usize) -> String {
    format!("{stage}/sigma_{}_{qubit}#{step}", axis.name())
}

fn half_letter(party: Party) -> &'static str {
    match party {
        Party::Alice => "a",
        Party::Bob => "b",
    }
}

/// Label under which the builder of stage `stage`, step `step` records its `σ_x` result.
pub fn builder_label(stage: &str, builder: Party, step: usize) -> String {
    record_label(stage, PauliAxis::X, half_letter(builder), step)
}

/// Label under which a disengaged builder records the `σ_z` result of its half.
pub fn idle_label(stage: &str, builder: Party, step: usize) -> String {
    record_label(stage, PauliAxis::Z, half_letter(builder), step)
}

/// Label under which the controller of stage `stage`, step `step` records its `σ_z` result.
pub fn controller_label(stage: &str, controller: Party, step: usize) -> String {
    record_label(stage, PauliAxis::Z, half_letter(controller), step)
}

/// A prepared stator: the builder has measured its half with result
/// `branch_sign`, leaving `control` (the controller's half) correlated with
/// `σ_axis` on `target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stator {
    pub branch_sign: i8,
    pub control: QubitId,
    pub target: QubitId,
    pub target_axis: PauliAxis,
    pub builder: Party,
    pub stage_step: usize,
}

impl Stator {
    pub fn controller(&self) -> Party {
        self.builder.other()
    }

    /// Largest amplitude difference between `σ_x(control)|ψ⟩` and
    /// `s·σ_axis(target)|ψ⟩`. Zero (to rounding) for a valid stator.
    pub fn eigenrelation_defect(&self, state: &StateVector) -> Result<f64> {
        let lhs = state.apply_gate(&Gate::pauli(PauliAxis::X, self.control))?;
        let signed = self
            .target_axis
            .matrix()
            .scale(c(f64::from(self.branch_sign), 0.0));
        let rhs = state.apply_gate(&Gate::single(signed, self.target)?)?;
        lhs.max_amplitude_diff(&rhs)
    }
}

/// Builder side of a stator: entangle the own ebit half with `target`
/// through a controlled `σ_axis`, then measure `σ_x` on the half and discard
/// it. A disengaged builder measures `σ_z` on the half instead (under
/// [`idle_label`]), so that whatever the controller does to its half leaves at
/// most a recorded Pauli factor on the controller's side.
pub fn builder_step(
    branch: Branch,
    ebit: EbitPair,
    target: QubitId,
    axis: PauliAxis,
    engaged: bool,
    stage: &str,
    step: usize,
) -> Result<Vec<Branch>> {
    let mut branch = branch;
    let builder = branch.state.qubit(target)?.party;
    let half = ebit.half(builder);
    if !engaged {
        return branch.measure(builder, half, PauliAxis::Z, &idle_label(stage, builder, step), true);
    }
    let label = builder_label(stage, builder, step);
    let g = Gate::controlled(half, target, &axis.matrix())?;
    branch.apply(builder, &g, &format!("{label}:controlled-sigma_{}", axis.name()))?;
    branch.measure(builder, half, PauliAxis::X, &label, true)
}

/// What the controller does to its ebit half before measuring it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ControllerAction {
    /// Measure the half as is.
    Idle,
    /// `exp(iθσ_x)` on the half.
    Rotate(f64),
    /// `|0⟩⟨0|_c ⊗ exp(iθ₀σ_x) + |1⟩⟨1|_c ⊗ exp(iθ₁σ_x)`, with `c` one of the
    /// controller's own qubits.
    Select { control: QubitId, angles: [f64; 2] },
    /// `exp(iθ σ_x(c) ⊗ σ_x(half))`: rotation conditioned on the x-basis value
    /// of one of the controller's own qubits.
    XCoupled { control: QubitId, angle: f64 },
}

/// Controller side of a stator: act on the own half, measure `σ_z`, discard.
pub fn controller_step(
    branch: Branch,
    controller: Party,
    half: QubitId,
    action: ControllerAction,
    label: &str,
) -> Result<Vec<Branch>> {
    let mut branch = branch;
    match action {
        ControllerAction::Idle => {}
        ControllerAction::Rotate(theta) => {
            let g = Gate::rotation(PauliAxis::X, theta, half)?;
            branch.apply(controller, &g, &format!("{label}:rx({theta:?})"))?;
        }
        ControllerAction::Select { control, angles } => {
            let g = Gate::select(
                control,
                half,
                &spin_rotation(PauliAxis::X, angles[0]),
                &spin_rotation(PauliAxis::X, angles[1]),
            )?;
            branch.apply(
                controller,
                &g,
                &format!("{label}:select-rx({:?},{:?})", angles[0], angles[1]),
            )?;
        }
        ControllerAction::XCoupled { control, angle } => {
            let (s, co) = angle.sin_cos();
            let xx = PauliAxis::X.matrix().kron(&PauliAxis::X.matrix());
            let m = Matrix::identity(4).scale(c(co, 0.0)).add(&xx.scale(c(0.0, s)));
            let g = Gate::new(m, vec![control, half])?;
            branch.apply(controller, &g, &format!("{label}:rxx({angle:?})"))?;
        }
    }
    branch.measure(controller, half, PauliAxis::Z, label, true)
}

/// Prepares a fresh ebit and turns it into a stator acting on `target` with
/// axis `axis`. The builder is the owner of `target`. Both outcomes of the
/// builder's `σ_x` measurement are returned.
pub fn build_stator(
    branch: Branch,
    target: QubitId,
    axis: PauliAxis,
    stage: &str,
    step: usize,
) -> Result<Vec<(Branch, Stator)>> {
    let mut branch = branch;
    let tq = branch.state.qubit(target)?;
    if tq.role != Role::System {
        bail!(Protocol, "stator target {} must be a system qubit", tq.label());
    }
    let builder = tq.party;
    let ebit = branch.prepare_ebit()?;
    let label = builder_label(stage, builder, step);
    let out = builder_step(branch, ebit, target, axis, true, stage, step)?;
    out.into_iter()
        .map(|b| {
            let sign = b.record(builder).value(&label)?;
            Ok((
                b,
                Stator {
                    branch_sign: sign,
                    control: ebit.half(builder.other()),
                    target,
                    target_axis: axis,
                    builder,
                    stage_step: step,
                },
            ))
        })
        .collect()
}

/// Operator a remote operation induced on its target in one branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InducedOperator {
    /// `[(1+z)/2 · I + s(1-z)/2 · σ] · exp(i·angle·s·σ)` on the stator target.
    Rotation {
        axis: PauliAxis,
        angle: f64,
        sign: i8,
        correction: i8,
    },
    /// `[(1+z)/2 · I + s(1-z)/2 · σ_x(B)] · exp(-i(π/4)(1-σ_z(A))(1-s·σ_x(B)))`
    /// on `(control, target)`.
    ControlledNot { sign: i8, correction: i8 },
}

impl InducedOperator {
    /// The Pauli prefactor `(1+z)/2 · I + s(1-z)/2 · σ`.
    fn prefactor(axis: PauliAxis, sign: i8, correction: i8) -> Matrix {
        if correction > 0 {
            Matrix::identity(2)
        } else {
            axis.matrix().scale(c(f64::from(sign), 0.0))
        }
    }

    /// Matrix of the induced operator (2×2, or 4×4 over `(control, target)`).
    pub fn matrix(&self) -> Matrix {
        match *self {
            InducedOperator::Rotation {
                axis,
                angle,
                sign,
                correction,
            } => Self::prefactor(axis, sign, correction)
                .mul(&spin_rotation(axis, angle * f64::from(sign))),
            InducedOperator::ControlledNot { sign, correction } => {
                let s = f64::from(sign);
                // (1-σ_z)(1-sσ_x) = 4 |1⟩⟨1| ⊗ P, with P = (1-sσ_x)/2 a projector,
                // so the exponential is I - 2 |1⟩⟨1| ⊗ P.
                let p1 = Matrix::from_rows(&[[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
                let proj = Matrix::identity(2)
                    .sub(&PauliAxis::X.matrix().scale(c(s, 0.0)))
                    .scale(c(0.5, 0.0));
                let core = Matrix::identity(4).sub(&p1.kron(&proj).scale(c(2.0, 0.0)));
                Matrix::identity(2)
                    .kron(&Self::prefactor(PauliAxis::X, sign, correction))
                    .mul(&core)
            }
        }
    }

    /// True when the induced operator carries a Pauli correction.
    pub fn has_correction(&self) -> bool {
        match *self {
            InducedOperator::Rotation { correction, .. }
            | InducedOperator::ControlledNot { correction, .. } => correction < 0,
        }
    }
}

fn check_live(branch: &Branch, stator: &Stator) -> Result<()> {
    if !branch.state.contains(stator.control) {
        bail!(Protocol, "stator control half {:?} has already been consumed", stator.control);
    }
    Ok(())
}

/// The controller applies `exp(i·angle·σ_x)` on its half, measures `σ_z` and
/// discards the half. Returns each branch with the operator it induced on the
/// stator target.
pub fn remote_rotation(
    branch: Branch,
    stator: &Stator,
    angle: f64,
    stage: &str,
) -> Result<Vec<(Branch, InducedOperator)>> {
    conditional_remote_rotation(branch, stator, |_| Ok(true), angle, stage)
}

/// Read-only view a controller uses to decide whether to rotate.
pub struct PartyView<'a> {
    branch: &'a mut Branch,
    party: Party,
}

impl PartyView<'_> {
    pub fn party(&self) -> Party {
        self.party
    }

    /// Reads an entry of `owner`'s record. Fails unless `owner` is the viewing party.
    pub fn read(&mut self, owner: Party, label: &str) -> Result<i8> {
        self.branch.read(self.party, owner, label)
    }
}

/// As [`remote_rotation`], but the controller rotates only when `predicate`
/// (evaluated on the controller's own data) holds; otherwise it measures its
/// half directly and the target only picks up the Pauli prefactor.
pub fn conditional_remote_rotation<P>(
    branch: Branch,
    stator: &Stator,
    predicate: P,
    angle: f64,
    stage: &str,
) -> Result<Vec<(Branch, InducedOperator)>>
where
    P: FnOnce(&mut PartyView<'_>) -> Result<bool>,
{
    if !angle.is_finite() {
        bail!(Validation, "rotation angle must be finite, got {angle}");
    }
    check_live(&branch, stator)?;
    let mut branch = branch;
    let controller = stator.controller();
    let fire = predicate(&mut PartyView {
        branch: &mut branch,
        party: controller,
    })?;
    let action = if fire {
        ControllerAction::Rotate(angle)
    } else {
        ControllerAction::Idle
    };
    let label = controller_label(stage, controller, stator.stage_step);
    let effective = if fire { angle } else { 0.0 };
    controller_step(branch, controller, stator.control, action, &label)?
        .into_iter()
        .map(|b| {
            let z = b.record(controller).value(&label)?;
            Ok((
                b,
                InducedOperator::Rotation {
                    axis: stator.target_axis,
                    angle: effective,
                    sign: stator.branch_sign,
                    correction: z,
                },
            ))
        })
        .collect()
}

/// Remote CNOT from the controller's qubit `control_qubit` onto the stator
/// target. The controller applies `exp(-i(π/4)(1-σ_z)(1-σ_x))` to
/// `(control_qubit, half)` and measures `σ_z` on the half. For `z = s = +1`
/// the induced operator is exactly CNOT.
pub fn remote_cnot(
    branch: Branch,
    stator: &Stator,
    control_qubit: QubitId,
    stage: &str,
) -> Result<Vec<(Branch, InducedOperator)>> {
    if stator.target_axis != PauliAxis::X {
        bail!(Protocol, "remote CNOT needs a stator built with axis x, got {:?}", stator.target_axis);
    }
    check_live(&branch, stator)?;
    let mut branch = branch;
    let controller = stator.controller();
    let cq = branch.state.qubit(control_qubit)?;
    if cq.party != controller {
        bail!(Locality, "remote CNOT control {} is not held by {controller}", cq.label());
    }
    // exp(-iπ |1⟩⟨1| ⊗ |−⟩⟨−|) = I - 2 |1⟩⟨1| ⊗ |−⟩⟨−|
    let p1 = Matrix::from_rows(&[[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
    let pminus = Matrix::identity(2)
        .sub(&PauliAxis::X.matrix())
        .scale(c(0.5, 0.0));
    let m = Matrix::identity(4).sub(&p1.kron(&pminus).scale(c(2.0, 0.0)));
    let g = Gate::new(m, vec![control_qubit, stator.control])?;
    let label = controller_label(stage, controller, stator.stage_step);
    branch.apply(controller, &g, &format!("{label}:cnot-exponential"))?;
    branch
        .measure(controller, stator.control, PauliAxis::Z, &label, true)?
        .into_iter()
        .map(|b| {
            let z = b.record(controller).value(&label)?;
            Ok((
                b,
                InducedOperator::ControlledNot {
                    sign: stator.branch_sign,
                    correction: z,
                },
            ))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    /// `zz_odd`: the ZZ eigenvalue is -1; `xx_odd`: the XX eigenvalue is -1.
    pub fn from_parities(zz_odd: bool, xx_odd: bool) -> Self {
        match (zz_odd, xx_odd) {
            (false, false) => BellState::PhiPlus,
            (false, true) => BellState::PhiMinus,
            (true, false) => BellState::PsiPlus,
            (true, true) => BellState::PsiMinus,
        }
    }

    pub fn parities(self) -> (bool, bool) {
        match self {
            BellState::PhiPlus => (false, false),
            BellState::PhiMinus => (false, true),
            BellState::PsiPlus => (true, false),
            BellState::PsiMinus => (true, true),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Amplitudes over `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn amplitudes(self) -> [crate::qcore::C64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (o, p, m) = (c(0.0, 0.0), c(h, 0.0), c(-h, 0.0));
        match self {
            BellState::PhiPlus => [p, o, o, p],
            BellState::PhiMinus => [p, o, o, m],
            BellState::PsiPlus => [o, p, p, o],
            BellState::PsiMinus => [o, p, m, o],
        }
    }

    /// Bell state reached after applying `σ_axis` to either qubit.
    pub fn after_pauli(self, axis: PauliAxis) -> Self {
        let (zz, xx) = self.parities();
        match axis {
            PauliAxis::X => Self::from_parities(!zz, xx),
            PauliAxis::Z => Self::from_parities(zz, !xx),
            PauliAxis::Y => Self::from_parities(!zz, !xx),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
        }
    }
}

fn parity_round(
    tree: Tree,
    alice_qubit: QubitId,
    bob_qubit: QubitId,
    basis: PauliAxis,
    stage: &str,
) -> Result<Tree> {
    let tag = format!("{stage}/{}{}", basis.name(), basis.name());
    let mut halves = None;
    let tree = tree.update(|b| {
        let ebit = b.prepare_ebit()?;
        halves = Some(ebit);
        for (party, q) in [(Party::Alice, alice_qubit), (Party::Bob, bob_qubit)] {
            if basis == PauliAxis::X {
                b.apply(party, &Gate::hadamard(q), &format!("{tag}:h"))?;
            }
            b.apply(party, &Gate::cnot(q, ebit.half(party)), &format!("{tag}:cnot"))?;
            if basis == PauliAxis::X {
                b.apply(party, &Gate::hadamard(q), &format!("{tag}:h"))?;
            }
        }
        Ok(())
    })?;
    let ebit = halves.ok_or_else(|| Error::Structural("empty branch tree".into()))?;
    let tree = tree.expand(|b| {
        b.measure(
            Party::Alice,
            ebit.alice,
            PauliAxis::Z,
            &format!("{tag}/sigma_z_a"),
            true,
        )
    })?;
    tree.expand(|b| {
        b.measure(
            Party::Bob,
            ebit.bob,
            PauliAxis::Z,
            &format!("{tag}/sigma_z_b"),
            true,
        )
    })
}

/// Nondemolition Bell measurement of `(alice_qubit, bob_qubit)` with two
/// ebits and no communication. Each ebit reads out one parity: both parties
/// copy their qubit's Z value (for the second ebit, its X value) onto their
/// ebit half and measure the half in Z. The XOR of the two recorded bits is the
/// parity; the pair is left projected onto the corresponding Bell state.
pub fn remote_bell_measurement(
    branch: Branch,
    alice_qubit: QubitId,
    bob_qubit: QubitId,
    stage: &str,
) -> Result<Vec<Branch>> {
    if branch.state.qubit(alice_qubit)?.party != Party::Alice
        || branch.state.qubit(bob_qubit)?.party != Party::Bob
    {
        bail!(Locality, "remote Bell measurement needs one Alice qubit and one Bob qubit");
    }
    if let Some(budget) = branch.ctx.ebit_budget {
        if branch.ctx.ebits_prepared + 2 > budget {
            bail!(Resource, "remote Bell measurement needs two ebits, budget allows {}", budget - branch.ctx.ebits_prepared);
        }
    }
    let tree = Tree::new(branch);
    let tree = parity_round(tree, alice_qubit, bob_qubit, PauliAxis::Z, stage)?;
    let tree = parity_round(tree, alice_qubit, bob_qubit, PauliAxis::X, stage)?;
    Ok(tree.into_branches())
}

/// Combines both parties' records of a remote Bell measurement.
pub fn bell_outcome(alice: &OutcomeRecord, bob: &OutcomeRecord, stage: &str) -> Result<BellState> {
    let parity = |basis: &str| -> Result<bool> {
        let a = alice.value(&format!("{stage}/{basis}/sigma_z_a"))?;
        let b = bob.value(&format!("{stage}/{basis}/sigma_z_b"))?;
        Ok(outcome_bit(a) != outcome_bit(b))
    };
    Ok(BellState::from_parities(parity("zz")?, parity("xx")?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{QubitRef, C64};
    use std::f64::consts::FRAC_PI_4;

    fn ab_state(amps: [C64; 4]) -> StateVector {
        StateVector::normalized(
            vec![QubitRef::system(0, Party::Alice), QubitRef::system(1, Party::Bob)],
            amps.to_vec(),
        )
        .unwrap()
    }

    const A: QubitId = QubitId(0);
    const B: QubitId = QubitId(1);

    fn zero_zero() -> StateVector {
        ab_state([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
    }

    #[test]
    fn ebit_marginal_is_maximally_mixed() {
        let mut b = Branch::new(zero_zero());
        let e = b.prepare_ebit().unwrap();
        let rho = b.state.partial_trace(&[e.alice]).unwrap();
        assert!(rho.distance_from_maximally_mixed() < 1e-15);
        assert!((b.state.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_ebits_add_four_qubits() {
        let mut b = Branch::new(zero_zero());
        b.prepare_ebit().unwrap();
        b.prepare_ebit().unwrap();
        assert_eq!(b.state.num_qubits(), 6);
        assert_eq!(b.ctx.ebits_prepared(), 2);
    }

    #[test]
    fn ebit_budget_is_enforced() {
        let mut b = Branch::with_context(zero_zero(), LocalityContext::with_ebit_budget(1));
        b.prepare_ebit().unwrap();
        assert!(matches!(b.prepare_ebit(), Err(Error::Resource(_))));
    }

    #[test]
    fn cross_party_gate_is_refused() {
        let mut b = Branch::new(zero_zero());
        let err = b.apply(Party::Alice, &Gate::pauli(PauliAxis::X, B), "x").unwrap_err();
        assert!(matches!(err, Error::Locality(_)));
        b.apply_unchecked(Party::Alice, &Gate::pauli(PauliAxis::X, B), "x").unwrap();
        assert_eq!(b.ctx.violations().len(), 1);
    }

    #[test]
    fn stator_branches_have_half_weight_and_match_formula() {
        // Stator on |Ψ⟩ = |00⟩ with axis y: (|0_a⟩ ⊗ I ± |1_a⟩ ⊗ σ_y)|00⟩/√2.
        let out = build_stator(Branch::new(zero_zero()), B, PauliAxis::Y, "s", 1).unwrap();
        assert_eq!(out.len(), 2);
        for (br, st) in &out {
            assert!((br.probability - 0.5).abs() < 1e-15);
            assert!(st.eigenrelation_defect(&br.state).unwrap() < 1e-12);
            // register [A, B, a]; σ_y|0⟩ = i|1⟩
            let s = f64::from(st.branch_sign);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut expect = vec![c(0.0, 0.0); 8];
            expect[0b000] = c(h, 0.0);
            expect[0b011] = c(0.0, s * h);
            let expect = StateVector::from_amplitudes(br.state.register().to_vec(), expect).unwrap();
            assert!(br.state.max_amplitude_diff(&expect).unwrap() < 1e-12);
        }
    }

    #[test]
    fn x_axis_stator_minus_branch() {
        // Oracle: direct 3-qubit computation. Axis x on |00⟩, sign -1:
        // (|0_a⟩|0_B⟩ - |1_a⟩|1_B⟩)/√2 with A = 0.
        let out = build_stator(Branch::new(zero_zero()), B, PauliAxis::X, "s", 1).unwrap();
        let (br, _) = out.iter().find(|(_, s)| s.branch_sign == -1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut expect = vec![c(0.0, 0.0); 8];
        expect[0b000] = c(h, 0.0);
        expect[0b011] = c(-h, 0.0);
        let expect = StateVector::from_amplitudes(br.state.register().to_vec(), expect).unwrap();
        assert!(br.state.max_amplitude_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn builder_must_own_target_half() {
        // Bob's stator: Bob applies the controlled gate. Alice cannot build on B.
        let mut b = Branch::new(zero_zero());
        let e = b.prepare_ebit().unwrap();
        let g = Gate::controlled(e.alice, B, &PauliAxis::Y.matrix()).unwrap();
        assert!(matches!(b.apply(Party::Alice, &g, "bad"), Err(Error::Locality(_))));
    }

    #[test]
    fn zero_angle_plus_branch_is_identity() {
        let out = build_stator(Branch::new(zero_zero()), B, PauliAxis::Y, "s", 1).unwrap();
        for (br, st) in out {
            for (_, induced) in remote_rotation(br, &st, 0.0, "s").unwrap() {
                if !induced.has_correction() {
                    assert!(induced.matrix().max_abs_diff(&Matrix::identity(2)) < 1e-15);
                }
            }
        }
    }

    #[test]
    fn quarter_turn_untwists_plus_minus() {
        // e^{i(π/4)σ_y} maps |+⟩ → |0⟩ and |−⟩ → -|1⟩.
        let induced = InducedOperator::Rotation {
            axis: PauliAxis::Y,
            angle: FRAC_PI_4,
            sign: 1,
            correction: 1,
        };
        let plus = PauliAxis::X.eigenvector(1);
        let minus = PauliAxis::X.eigenvector(-1);
        let m = induced.matrix();
        let p = m.apply(&plus);
        let q = m.apply(&minus);
        assert!((p[0] - c(1.0, 0.0)).norm() < 1e-15 && p[1].norm() < 1e-15);
        assert!(q[0].norm() < 1e-15 && (q[1] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn stale_stator_is_protocol_error() {
        let out = build_stator(Branch::new(zero_zero()), B, PauliAxis::Y, "s", 1).unwrap();
        let (br, st) = out.into_iter().next().unwrap();
        let (br, _) = remote_rotation(br, &st, 0.3, "s").unwrap().into_iter().next().unwrap();
        assert!(matches!(remote_rotation(br, &st, 0.3, "s"), Err(Error::Protocol(_))));
    }

    #[test]
    fn predicate_reading_other_record_is_locality_error() {
        let out = build_stator(Branch::new(zero_zero()), B, PauliAxis::Y, "s", 1).unwrap();
        let (br, st) = out.into_iter().next().unwrap();
        let label = builder_label("s", Party::Bob, 1);
        let err = conditional_remote_rotation(br, &st, |v| Ok(v.read(Party::Bob, &label)? == 1), 0.5, "s")
            .unwrap_err();
        assert!(matches!(err, Error::Locality(_)));
    }

    #[test]
    fn remote_cnot_requires_x_axis() {
        let out = build_stator(Branch::new(zero_zero()), B, PauliAxis::Y, "s", 1).unwrap();
        let (br, st) = out.into_iter().next().unwrap();
        assert!(matches!(remote_cnot(br, &st, A, "s"), Err(Error::Protocol(_))));
    }

    #[test]
    fn remote_cnot_plus_plus_is_cnot() {
        let induced = InducedOperator::ControlledNot { sign: 1, correction: 1 };
        let cnot = Gate::cnot(A, B);
        assert!(induced.matrix().max_abs_diff(cnot.matrix()) < 1e-15);
    }

    #[test]
    fn bell_measurement_identifies_bell_inputs() {
        for bell in BellState::ALL {
            let st = ab_state(bell.amplitudes());
            let branches = remote_bell_measurement(Branch::new(st), A, B, "bell").unwrap();
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for b in &branches {
                let got = bell_outcome(b.record(Party::Alice), b.record(Party::Bob), "bell").unwrap();
                assert_eq!(got, bell);
                assert_eq!(b.state.num_qubits(), 2);
                assert!(b.state.overlap(&ab_state(bell.amplitudes())).unwrap() > 1.0 - 1e-12);
                assert_eq!(b.ctx.ebits_consumed(), 2);
            }
        }
    }

    #[test]
    fn bell_measurement_of_zero_zero_splits_phi() {
        let branches = remote_bell_measurement(Branch::new(zero_zero()), A, B, "bell").unwrap();
        let mut phi_plus = 0.0;
        let mut phi_minus = 0.0;
        for b in &branches {
            match bell_outcome(b.record(Party::Alice), b.record(Party::Bob), "bell").unwrap() {
                BellState::PhiPlus => phi_plus += b.probability,
                BellState::PhiMinus => phi_minus += b.probability,
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!((phi_plus - 0.5).abs() < 1e-12 && (phi_minus - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pauli_frame_on_bell_states() {
        // Oracle: apply the Pauli to qubit B directly and identify the result.
        for bell in BellState::ALL {
            for axis in PauliAxis::ALL {
                let st = ab_state(bell.amplitudes()).apply_gate(&Gate::pauli(axis, B)).unwrap();
                let expect = ab_state(bell.after_pauli(axis).amplitudes());
                assert!(st.overlap(&expect).unwrap() > 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn bell_measurement_needs_two_ebits() {
        let b = Branch::with_context(zero_zero(), LocalityContext::with_ebit_budget(1));
        assert!(matches!(remote_bell_measurement(b, A, B, "bell"), Err(Error::Resource(_))));
    }
}
