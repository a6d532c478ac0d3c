//! End-to-end instantaneous measurement protocols.
//!
//! Each protocol takes an input state of the system qubits and returns a
//! [`ProtocolRun`]: every branch of the exhaustive outcome tree with its
//! weight, both parties' records, the post-measurement state, and the
//! eigenstate index inferred from the two records alone.

mod basis;
mod control;
mod correction;
mod nonmax;
mod product;
mod twist;

pub use basis::{eigenbasis, pauli_rotation_of};
pub use control::measure_cross_conditioned;
pub use correction::{closing_multiple, LoopTrace};

use crate::error::{bail, Result};
use crate::qcore::{Matrix, Party, QubitId, QubitRef, StateVector, C64};
use crate::stator::{Branch, LocalityContext, OutcomeRecord, RecordEntry};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Which eigenbasis is measured, and by which protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `|00⟩, |01⟩, |1⟩|+⟩, |1⟩|−⟩`
    TwistedProduct,
    /// As above with Bob's second pair rotated by a general angle.
    GeneralProduct,
    /// Equally entangled nonmaximal states, untwisted to product states.
    NonmaxEqual,
    /// Same basis, collapsed onto Bell states instead.
    NonmaxBell,
    /// Two independent entanglement angles and phases.
    NonmaxGeneral,
    /// Sixteen Bell-type states on two ququarts, one quadrant twisted by `U_B`.
    Twist4x4,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::TwistedProduct,
        Family::GeneralProduct,
        Family::NonmaxEqual,
        Family::NonmaxBell,
        Family::NonmaxGeneral,
        Family::Twist4x4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::TwistedProduct => "twisted-product",
            Family::GeneralProduct => "general-product",
            Family::NonmaxEqual => "nonmax-equal",
            Family::NonmaxBell => "nonmax-bell",
            Family::NonmaxGeneral => "nonmax-general",
            Family::Twist4x4 => "twist4x4",
        }
    }

    /// Number of eigenstates.
    pub fn dimension(self) -> usize {
        match self {
            Family::Twist4x4 => 16,
            _ => 4,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match Family::ALL.iter().find(|f| f.name() == s) {
            Some(f) => Ok(*f),
            None => bail!(
                Validation,
                "unknown family {s:?}; expected one of {}",
                Family::ALL.map(|f| f.name()).join(", ")
            ),
        }
    }
}

/// Parameters of a measured observable together with the ebit budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenbasisSpec {
    pub family: Family,
    pub alpha: f64,
    pub beta: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// Row-major 2×2 unitary acting on Bob's intra-subspace qubit.
    pub u_b: [C64; 4],
    pub n_ebits: u32,
}

const IDENTITY_2: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(1.0, 0.0),
];

impl EigenbasisSpec {
    fn base(family: Family, alpha: f64, n_ebits: u32) -> Self {
        EigenbasisSpec {
            family,
            alpha,
            beta: alpha,
            phi1: 0.0,
            phi2: 0.0,
            u_b: IDENTITY_2,
            n_ebits,
        }
    }

    pub fn twisted_product() -> Self {
        Self::base(Family::TwistedProduct, std::f64::consts::FRAC_PI_2, 1)
    }

    pub fn general_product(alpha: f64, n_ebits: u32) -> Self {
        Self::base(Family::GeneralProduct, alpha, n_ebits)
    }

    pub fn nonmax_equal(alpha: f64, n_ebits: u32) -> Self {
        Self::base(Family::NonmaxEqual, alpha, n_ebits)
    }

    pub fn nonmax_bell(alpha: f64, n_ebits: u32) -> Self {
        Self::base(Family::NonmaxBell, alpha, n_ebits)
    }

    pub fn nonmax_general(alpha: f64, beta: f64, phi1: f64, phi2: f64, n_ebits: u32) -> Self {
        EigenbasisSpec {
            beta,
            phi1,
            phi2,
            ..Self::base(Family::NonmaxGeneral, alpha, n_ebits)
        }
    }

    pub fn twist4x4(u_b: &Matrix, n_ebits: u32) -> Result<Self> {
        if u_b.dim() != 2 {
            bail!(Structural, "U_B must be 2×2, got {}×{}", u_b.dim(), u_b.dim());
        }
        let mut entries = [C64::new(0.0, 0.0); 4];
        entries.copy_from_slice(u_b.as_slice());
        Ok(EigenbasisSpec {
            u_b: entries,
            ..Self::base(Family::Twist4x4, 0.0, n_ebits)
        })
    }

    /// `(α - β)/2`, the residual angle left on Alice's qubit when Bob's
    /// pair value was flipped by the remote CNOT correction.
    pub fn gamma(&self) -> f64 {
        (self.alpha - self.beta) / 2.0
    }

    pub fn u_b_matrix(&self) -> Matrix {
        Matrix::from_vec(self.u_b.to_vec()).expect("four entries form a 2×2 matrix")
    }

    pub fn dimension(&self) -> usize {
        self.family.dimension()
    }

    /// System register the protocol expects as input: `[A, B]`, or
    /// `[A_hi, A_lo, B_hi, B_lo]` for the ququart family.
    pub fn system_register(&self) -> Vec<QubitRef> {
        match self.family {
            Family::Twist4x4 => vec![
                QubitRef::system(0, Party::Alice),
                QubitRef::system(1, Party::Alice),
                QubitRef::system(2, Party::Bob),
                QubitRef::system(3, Party::Bob),
            ],
            _ => vec![
                QubitRef::system(0, Party::Alice),
                QubitRef::system(1, Party::Bob),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.phi1, self.phi2];
        if finite.iter().any(|v| !v.is_finite()) || self.u_b.iter().any(|z| !z.is_finite()) {
            bail!(Validation, "parameters must be finite");
        }
        let in_closed = |v: f64| (0.0..=std::f64::consts::PI).contains(&v);
        match self.family {
            Family::TwistedProduct => {
                if (self.alpha - std::f64::consts::FRAC_PI_2).abs() > 1e-15 || self.n_ebits != 1 {
                    bail!(Validation, "twisted-product uses alpha = pi/2 and exactly one ebit");
                }
            }
            Family::GeneralProduct => {
                if !(self.alpha > 0.0 && self.alpha < std::f64::consts::PI) {
                    bail!(Validation, "alpha must lie in (0, pi), got {}", self.alpha);
                }
                if self.n_ebits < 1 {
                    bail!(Validation, "general-product needs at least one ebit");
                }
            }
            Family::NonmaxEqual | Family::NonmaxBell => {
                if !in_closed(self.alpha) {
                    bail!(Validation, "alpha must lie in [0, pi], got {}", self.alpha);
                }
                if self.n_ebits < 2 {
                    bail!(Validation, "{} needs at least two ebits", self.family);
                }
            }
            Family::NonmaxGeneral => {
                if !in_closed(self.alpha) || !in_closed(self.beta) {
                    bail!(Validation, "alpha and beta must lie in [0, pi], got {} and {}", self.alpha, self.beta);
                }
                if self.n_ebits < 2 {
                    bail!(Validation, "nonmax-general needs at least two ebits");
                }
            }
            Family::Twist4x4 => {
                let u = self.u_b_matrix();
                if u.unitarity_defect() > 1e-10 {
                    bail!(Validation, "U_B is not unitary (defect {:e})", u.unitarity_defect());
                }
                pauli_rotation_of(&u)?;
                if self.n_ebits < 2 {
                    bail!(Validation, "twist4x4 needs at least two ebits");
                }
            }
        }
        Ok(())
    }

    /// The `k`-th eigenstate, 1-based.
    pub fn eigenstate(&self, k: usize) -> Result<StateVector> {
        let basis = eigenbasis(self)?;
        match basis.get(k.wrapping_sub(1)) {
            Some(s) => Ok(s.clone()),
            None => bail!(Validation, "eigenstate index {k} outside 1..={}", basis.len()),
        }
    }

    /// Input state over [`system_register`](Self::system_register).
    pub fn input_state(&self, amplitudes: Vec<C64>) -> Result<StateVector> {
        StateVector::normalized(self.system_register(), amplitudes)
    }
}

/// What the two records identify.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inferred {
    /// 1-based eigenstate index.
    Index(usize),
    /// The correction budget ran out before the untwisting closed.
    Failure,
}

impl Inferred {
    pub fn index(self) -> Option<usize> {
        match self {
            Inferred::Index(k) => Some(k),
            Inferred::Failure => None,
        }
    }
}

impl fmt::Display for Inferred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inferred::Index(k) => write!(f, "{k}"),
            Inferred::Failure => f.write_str("failure"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunBranch {
    pub probability: f64,
    pub alice_record: OutcomeRecord,
    pub bob_record: OutcomeRecord,
    pub post_state: StateVector,
    pub inferred: Inferred,
}

/// Full outcome tree of one protocol execution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub protocol: String,
    pub spec: EigenbasisSpec,
    pub branches: Vec<RunBranch>,
    pub ebits_consumed: u32,
    pub success_probability: f64,
    /// Branch-averaged entanglement entropy (bits) between Alice's and
    /// Bob's system qubits after the protocol.
    pub residual_entanglement: f64,
    #[serde(skip)]
    contexts: Vec<LocalityContext>,
}

impl ProtocolRun {
    fn assemble<F>(protocol: &str, spec: EigenbasisSpec, branches: Vec<Branch>, mut infer: F) -> Result<Self>
    where
        F: FnMut(&OutcomeRecord, &OutcomeRecord) -> Result<Inferred>,
    {
        let mut out = Vec::with_capacity(branches.len());
        let mut contexts = Vec::with_capacity(branches.len());
        let mut consumed = None;
        let mut success = 0.0;
        let mut entanglement = 0.0;
        for b in branches {
            if b.ctx.ebits_outstanding() != 0 || b.ctx.ebits_consumed() != b.ctx.ebits_prepared() {
                bail!(Protocol, "branch left {} ebits unmeasured", b.ctx.ebits_outstanding());
            }
            match consumed {
                None => consumed = Some(b.ctx.ebits_consumed()),
                Some(c) if c != b.ctx.ebits_consumed() => {
                    bail!(Protocol, "branches consumed different ebit counts ({c} vs {})", b.ctx.ebits_consumed())
                }
                _ => {}
            }
            let alice = b.record(Party::Alice).clone();
            let bob = b.record(Party::Bob).clone();
            let inferred = infer(&alice, &bob)?;
            if inferred != Inferred::Failure {
                success += b.probability;
            }
            let alice_qubits: Vec<QubitId> = b
                .state
                .register()
                .iter()
                .filter(|q| q.party == Party::Alice)
                .map(|q| q.id)
                .collect();
            entanglement += b.probability * b.state.partial_trace(&alice_qubits)?.entropy_bits();
            out.push(RunBranch {
                probability: b.probability,
                alice_record: alice,
                bob_record: bob,
                post_state: b.state,
                inferred,
            });
            contexts.push(b.ctx);
        }
        let total: f64 = out.iter().map(|b| b.probability).sum();
        if (total - 1.0).abs() > 1e-12 {
            bail!(Protocol, "branch probabilities sum to {total}");
        }
        Ok(ProtocolRun {
            protocol: protocol.to_string(),
            spec,
            branches: out,
            ebits_consumed: consumed.unwrap_or(0),
            success_probability: success,
            residual_entanglement: entanglement,
            contexts,
        })
    }

    /// Audit contexts, parallel to [`branches`](Self::branches). Empty for a
    /// run deserialized from JSON.
    pub fn contexts(&self) -> &[LocalityContext] {
        &self.contexts
    }

    /// Total probability per inferred outcome.
    pub fn outcome_distribution(&self) -> BTreeMap<Inferred, f64> {
        let mut out = BTreeMap::new();
        for b in &self.branches {
            *out.entry(b.inferred).or_insert(0.0) += b.probability;
        }
        out
    }

    /// `P(inferred = k)` for `k = 1..=dimension`.
    pub fn index_probabilities(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.spec.dimension()];
        for b in &self.branches {
            if let Inferred::Index(k) = b.inferred {
                p[k - 1] += b.probability;
            }
        }
        p
    }

    /// Picks one branch with its Born weight, given a uniform draw in `[0, 1)`.
    pub fn pick(&self, u: f64) -> &RunBranch {
        let mut acc = 0.0;
        for b in &self.branches {
            acc += b.probability;
            if u < acc {
                return b;
            }
        }
        self.branches.last().expect("a run has at least one branch")
    }
}

fn check_input(spec: &EigenbasisSpec, input: &StateVector) -> Result<()> {
    let want = spec.system_register();
    if input.register() != want.as_slice() {
        let got: Vec<String> = input.register().iter().map(|q| q.label()).collect();
        let exp: Vec<String> = want.iter().map(|q| q.label()).collect();
        bail!(Structural, "{} expects register [{}], got [{}]", spec.family, exp.join(", "), got.join(", "));
    }
    Ok(())
}

/// Runs the protocol for `spec.family` on `input`.
pub fn run(spec: &EigenbasisSpec, input: &StateVector) -> Result<ProtocolRun> {
    spec.validate()?;
    check_input(spec, input)?;
    let root = Branch::new(input.clone());
    let branches = match spec.family {
        Family::TwistedProduct | Family::GeneralProduct => product::execute(spec, root)?,
        Family::NonmaxEqual | Family::NonmaxGeneral => nonmax::execute_untwist(spec, root, true)?,
        Family::NonmaxBell => nonmax::execute_bell(spec, root)?,
        Family::Twist4x4 => twist::execute(spec, root)?,
    };
    ProtocolRun::assemble(spec.family.name(), spec.clone(), branches, |a, b| {
        infer_outcome(a, b, spec)
    })
}

pub fn measure_twisted_product(input: &StateVector) -> Result<ProtocolRun> {
    run(&EigenbasisSpec::twisted_product(), input)
}

pub fn measure_general_product(input: &StateVector, alpha: f64, n_ebits: u32) -> Result<ProtocolRun> {
    run(&EigenbasisSpec::general_product(alpha, n_ebits), input)
}

pub fn measure_nonmax_equal(input: &StateVector, alpha: f64, n_ebits: u32) -> Result<ProtocolRun> {
    run(&EigenbasisSpec::nonmax_equal(alpha, n_ebits), input)
}

pub fn measure_nonmax_bell_variant(input: &StateVector, alpha: f64, n_ebits: u32) -> Result<ProtocolRun> {
    run(&EigenbasisSpec::nonmax_bell(alpha, n_ebits), input)
}

pub fn measure_nonmax_general(
    input: &StateVector,
    alpha: f64,
    beta: f64,
    phi1: f64,
    phi2: f64,
    n_ebits: u32,
) -> Result<ProtocolRun> {
    run(&EigenbasisSpec::nonmax_general(alpha, beta, phi1, phi2, n_ebits), input)
}

pub fn measure_4x4_twist(input: &StateVector, u_b: &Matrix, n_ebits: u32) -> Result<ProtocolRun> {
    run(&EigenbasisSpec::twist4x4(u_b, n_ebits)?, input)
}

/// Branches of the two-angle protocol stopped after Bob's angle-selecting
/// rotation, before the second correction stage. All ebit halves used so
/// far are measured; the system qubits are untouched by any final
/// measurement.
pub fn nonmax_general_first_stage(spec: &EigenbasisSpec, input: &StateVector) -> Result<Vec<Branch>> {
    if spec.family != Family::NonmaxGeneral {
        bail!(Validation, "first-stage run is defined for nonmax-general only");
    }
    spec.validate()?;
    check_input(spec, input)?;
    nonmax::execute_untwist(spec, Branch::new(input.clone()), false)
}

/// Names the eigenstate from the two records. Pure in its arguments.
pub fn infer_outcome(alice: &OutcomeRecord, bob: &OutcomeRecord, spec: &EigenbasisSpec) -> Result<Inferred> {
    if alice.party() != Party::Alice || bob.party() != Party::Bob {
        bail!(Structural, "records passed in the wrong order");
    }
    match spec.family {
        Family::TwistedProduct | Family::GeneralProduct => product::infer(spec, alice, bob),
        Family::NonmaxEqual | Family::NonmaxGeneral => nonmax::infer_untwist(spec, alice, bob),
        Family::NonmaxBell => nonmax::infer_bell(spec, alice, bob),
        Family::Twist4x4 => twist::infer(spec, alice, bob),
    }
}

/// Final outcome as a product basis state `(a, b)`, or a Bell state within a
/// quadrant, after the correction frame has been folded in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalOutcome {
    Product { a: u8, b: u8 },
    Bell { quadrant: u8, state: crate::stator::BellState },
}

impl fmt::Display for FinalOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FinalOutcome::Product { a, b } => write!(f, "|{a}_A {b}_B>"),
            FinalOutcome::Bell { quadrant, state } => write!(f, "q{quadrant}:{}", state.name()),
        }
    }
}

/// Block key and frame-folded outcome of a successful branch, as used for
/// outcome tables. The key holds the records that select a block; the
/// outcome is what the final local measurements show once the corrections
/// recorded outside the key are undone.
pub fn block_view(
    alice: &OutcomeRecord,
    bob: &OutcomeRecord,
    spec: &EigenbasisSpec,
) -> Result<Option<(Vec<RecordEntry>, FinalOutcome)>> {
    match spec.family {
        Family::TwistedProduct | Family::GeneralProduct => product::block_view(spec, alice, bob),
        Family::NonmaxEqual | Family::NonmaxGeneral => nonmax::block_view_untwist(spec, alice, bob),
        Family::NonmaxBell => nonmax::block_view_bell(spec, alice, bob),
        Family::Twist4x4 => twist::block_view(spec, alice, bob),
    }
}

/// Record labels used by the protocols.
pub mod labels {
    pub const PROJECT_A: &str = "project/sigma_z_A";
    pub const PROJECT_A_HI: &str = "project/sigma_z_A_hi";
    pub const PROJECT_B_HI: &str = "project/sigma_z_B_hi";
    pub const FINAL_A: &str = "final/sigma_z_A";
    pub const FINAL_B: &str = "final/sigma_z_B";
    pub const TWIST_STAGE: &str = "twist";
    pub const CNOT_STAGE: &str = "cnot";
    pub const UNTWIST_STAGE: &str = "untwist";
    pub const REALIGN_STAGE: &str = "realign";
    pub const REBALANCE_STAGE: &str = "rebalance";
    pub const ROTATE_STAGE: &str = "rotate";
    pub const BELL_STAGE: &str = "bell";
}
