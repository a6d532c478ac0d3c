//! Independent checks on protocol runs.
//!
//! The Born oracle works from the eigenbasis vectors alone. The audits read
//! finished runs: record marginals, reduced states, gate schedules and the
//! locality trail. Outcome tables are rebuilt by brute force from eigenstate
//! runs and compared against fixed reference tables.

use crate::error::{bail, Result};
use crate::protocols::{
    block_view, eigenbasis, run, EigenbasisSpec, Family, FinalOutcome, Inferred, ProtocolRun,
};
use crate::qcore::{spin_rotation, DensityMatrix, Gate, Matrix, Party, PauliAxis, QubitId, QubitRef, StateVector, C64};
use crate::stator::{build_stator, Branch, RecordEntry};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

/// Linear-algebra identities.
pub const EXACT_TOLERANCE: f64 = 1e-12;
/// Comparisons across a whole protocol run.
pub const PROTOCOL_TOLERANCE: f64 = 1e-10;

/// One checked quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub quantity: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, expected: f64, observed: f64, tolerance: f64) -> Self {
        OracleReport {
            quantity: quantity.into(),
            expected,
            observed,
            tolerance,
            pass: (expected - observed).abs() <= tolerance,
        }
    }
}

pub fn all_pass(reports: &[OracleReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

/// `|⟨Ψᵏ|ψ⟩|²` for every eigenstate, by direct inner products.
pub fn born_oracle(spec: &EigenbasisSpec, input: &StateVector) -> Result<Vec<f64>> {
    eigenbasis(spec)?.iter().map(|e| Ok(e.inner_product(input)?.norm_sqr())).collect()
}

/// Born-rule check for one spec.
///
/// Certainty makes the success branches of different eigenstates disjoint,
/// so for a superposition input `P(infer k) = |⟨Ψᵏ|ψ⟩|² · Sₖ`, where `Sₖ` is
/// the success probability on `|Ψᵏ⟩` alone. `Sₖ` is measured once per
/// eigenstate; the weights come from [`born_oracle`].
pub struct BornCheck {
    spec: EigenbasisSpec,
    success: Vec<f64>,
}

impl BornCheck {
    pub fn new(spec: &EigenbasisSpec) -> Result<Self> {
        let success = eigenbasis(spec)?
            .iter()
            .map(|e| Ok(run(spec, e)?.success_probability))
            .collect::<Result<Vec<_>>>()?;
        Ok(BornCheck { spec: spec.clone(), success })
    }

    pub fn eigenstate_success(&self) -> &[f64] {
        &self.success
    }

    pub fn check(&self, input: &StateVector) -> Result<Vec<OracleReport>> {
        let weights = born_oracle(&self.spec, input)?;
        let observed = run(&self.spec, input)?;
        let p = observed.index_probabilities();
        let mut reports = Vec::with_capacity(p.len() + 1);
        let mut success = 0.0;
        for (k, (w, s)) in weights.iter().zip(&self.success).enumerate() {
            success += w * s;
            reports.push(OracleReport::new(format!("P(infer {})", k + 1), w * s, p[k], PROTOCOL_TOLERANCE));
        }
        reports.push(OracleReport::new(
            "P(failure)",
            1.0 - success,
            observed.outcome_distribution().get(&Inferred::Failure).copied().unwrap_or(0.0),
            PROTOCOL_TOLERANCE,
        ));
        Ok(reports)
    }
}

/// Normalized random state over `register`.
pub fn random_state(register: Vec<QubitRef>, rng: &mut StdRng) -> Result<StateVector> {
    let dim = 1usize << register.len();
    let amps: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    StateVector::normalized(register, amps)
}

/// Random single-qubit unitary `e^{iaσ_z} e^{ibσ_y} e^{icσ_z}`.
pub fn random_unitary(rng: &mut StdRng) -> Matrix {
    let mut angle = || rng.random_range(-PI..PI);
    spin_rotation(PauliAxis::Z, angle())
        .mul(&spin_rotation(PauliAxis::Y, angle()))
        .mul(&spin_rotation(PauliAxis::Z, angle()))
}

/// Distribution of one party's complete record.
pub fn record_marginal(run: &ProtocolRun, party: Party) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for b in &run.branches {
        let rec = match party {
            Party::Alice => &b.alice_record,
            Party::Bob => &b.bob_record,
        };
        let key = rec
            .entries()
            .iter()
            .map(|e| format!("{}={}", e.label, e.value))
            .collect::<Vec<_>>()
            .join(" ");
        *out.entry(key).or_insert(0.0) += b.probability;
    }
    out
}

pub fn total_variation(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>) -> f64 {
    let keys: BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

/// Branch-averaged reduced state of every system qubit left in the run.
pub fn reduced_states(run: &ProtocolRun) -> Result<Vec<(QubitRef, DensityMatrix)>> {
    let Some(first) = run.branches.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for q in first.post_state.register() {
        let parts = run
            .branches
            .iter()
            .map(|b| Ok((b.probability, b.post_state.partial_trace(&[q.id])?)))
            .collect::<Result<Vec<_>>>()?;
        match DensityMatrix::mixture(parts.iter().map(|(p, d)| (*p, d))) {
            Some(rho) => out.push((*q, rho)),
            None => bail!(Structural, "reduced states of {} differ in dimension", q.label()),
        }
    }
    Ok(out)
}

/// `U` applied to every system qubit of `party`.
pub fn local_variant(input: &StateVector, party: Party, u: &Matrix) -> Result<StateVector> {
    let mut out = input.clone();
    let ids: Vec<QubitId> = input.register().iter().filter(|q| q.party == party).map(|q| q.id).collect();
    for id in ids {
        out = out.apply_gate(&Gate::single(u.clone(), id)?)?;
    }
    Ok(out)
}

/// No-signaling audit of one protocol on one input.
///
/// For each `(party, U)` the input is changed by `U` on that party's qubits,
/// which leaves the other party's reduced state alone; the other party's
/// record distribution must not move. Every remaining system qubit must end
/// up maximally mixed, and no branch may carry a locality violation.
pub fn no_signaling_audit<F>(runner: F, input: &StateVector, variants: &[(Party, Matrix)]) -> Result<Vec<OracleReport>>
where
    F: Fn(&StateVector) -> Result<ProtocolRun>,
{
    let base = runner(input)?;
    let mut reports = Vec::new();
    for (i, (party, u)) in variants.iter().enumerate() {
        let other = runner(&local_variant(input, *party, u)?)?;
        let watcher = party.other();
        let tv = total_variation(&record_marginal(&base, watcher), &record_marginal(&other, watcher));
        reports.push(OracleReport::new(
            format!("{watcher} record marginal, variant {} on {party}", i + 1),
            0.0,
            tv,
            PROTOCOL_TOLERANCE,
        ));
    }
    for (q, rho) in reduced_states(&base)? {
        reports.push(OracleReport::new(
            format!("reduced state of {} vs I/2", q.label()),
            0.0,
            rho.distance_from_maximally_mixed(),
            PROTOCOL_TOLERANCE,
        ));
    }
    reports.push(locality_report(&base));
    Ok(reports)
}

/// Count of cross-party gates and reads over all branches.
pub fn locality_report(run: &ProtocolRun) -> OracleReport {
    let n: usize = run.contexts().iter().map(|c| c.violations().len()).sum();
    OracleReport::new(format!("{} locality violations", run.protocol), 0.0, n as f64, 0.0)
}

/// Distinct gate schedules of `party` among branches that agree on the
/// party's own `group_by` entries, minus one, maximized over groups. Zero
/// when the party's gates depend on nothing but those entries.
pub fn schedule_report(run: &ProtocolRun, party: Party, group_by: &[&str]) -> Result<OracleReport> {
    if run.contexts().len() != run.branches.len() {
        bail!(Structural, "run carries no audit trail");
    }
    let mut groups: BTreeMap<Vec<Option<i8>>, BTreeSet<Vec<(String, u64)>>> = BTreeMap::new();
    for ctx in run.contexts() {
        let rec = ctx.record(party);
        let key = group_by.iter().map(|l| rec.get(l)).collect();
        let schedule = ctx
            .gate_schedule(party)
            .into_iter()
            .map(|g| (g.label.clone(), g.fingerprint))
            .collect();
        groups.entry(key).or_default().insert(schedule);
    }
    let spread = groups.values().map(|s| s.len() - 1).max().unwrap_or(0);
    Ok(OracleReport::new(format!("{party} schedule variants per group"), 0.0, spread as f64, 0.0))
}

/// Eigenoperator identity `σ_x(control)·S = s·σ_axis(target)·S` on `count`
/// random stators: random two-qubit input, random target, axis x or y.
pub fn stator_identity_check(count: usize, seed: u64) -> Result<Vec<OracleReport>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let register = vec![QubitRef::system(0, Party::Alice), QubitRef::system(1, Party::Bob)];
    let mut reports = Vec::with_capacity(count);
    for i in 0..count {
        let input = random_state(register.clone(), &mut rng)?;
        let target = QubitId(rng.random_range(0..2u32));
        let axis = if rng.random_bool(0.5) { PauliAxis::X } else { PauliAxis::Y };
        let mut worst: f64 = 0.0;
        for (b, st) in build_stator(Branch::new(input), target, axis, "check", 1)? {
            worst = worst.max(st.eigenrelation_defect(&b.state)?);
        }
        reports.push(OracleReport::new(
            format!("stator {} on q{} axis {}", i + 1, target.0, axis.name()),
            0.0,
            worst,
            EXACT_TOLERANCE,
        ));
    }
    Ok(reports)
}

/// Largest per-branch discrepancy between two runs: probabilities, post
/// states and inferred outcomes, branch by branch. Infinite if the trees
/// differ in shape or records.
pub fn branch_tree_distance(a: &ProtocolRun, b: &ProtocolRun) -> Result<f64> {
    if a.branches.len() != b.branches.len() {
        return Ok(f64::INFINITY);
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.branches.iter().zip(&b.branches) {
        if x.alice_record != y.alice_record || x.bob_record != y.bob_record || x.inferred != y.inferred {
            return Ok(f64::INFINITY);
        }
        worst = worst
            .max((x.probability - y.probability).abs())
            .max(x.post_state.max_amplitude_diff(&y.post_state)?);
    }
    Ok(worst)
}

/// One row of a success sweep of the general product family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub n: u32,
    /// Enumerated success probability on a twisted eigenstate.
    pub enumerated: f64,
    /// `1 - 2^{-n}`: each step succeeds with probability 1/2.
    pub per_step: f64,
    /// `1 - 2^{-(n-1)}`, the closed form quoted for `n` ebits.
    pub quoted: f64,
    /// The untwisting always closes within `n` steps.
    pub certain: bool,
}

/// Success probability of the general product protocol on `|Ψ³⟩`, the
/// eigenstate that needs untwisting, for every `α` in `alphas` and every
/// `n` in `1..=n_max`.
pub fn success_sweep(alphas: &[f64], n_max: u32) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(alphas.len() * n_max as usize);
    for &alpha in alphas {
        for n in 1..=n_max {
            let spec = EigenbasisSpec::general_product(alpha, n);
            let enumerated = run(&spec, &spec.eigenstate(3)?)?.success_probability;
            rows.push(SweepRow {
                alpha,
                n,
                enumerated,
                per_step: 1.0 - 0.5f64.powi(n as i32),
                quoted: 1.0 - 0.5f64.powi(n as i32 - 1),
                certain: (enumerated - 1.0).abs() < EXACT_TOLERANCE,
            });
        }
    }
    Ok(rows)
}

/// Smallest number of correction steps at which `α` is untwisted with
/// certainty, searched up to `n_max`.
pub fn closing_step(alpha: f64, n_max: u32) -> Result<Option<u32>> {
    for n in 1..=n_max {
        let spec = EigenbasisSpec::general_product(alpha, n);
        if (run(&spec, &spec.eigenstate(3)?)?.success_probability - 1.0).abs() < EXACT_TOLERANCE {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// One eigenstate's outcome within a block.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TableRow {
    pub index: usize,
    pub outcome: FinalOutcome,
}

/// Records selecting a map, and where the map sends each eigenstate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub key: Vec<RecordEntry>,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceTable {
    pub spec: EigenbasisSpec,
    pub blocks: Vec<Block>,
}

impl InferenceTable {
    pub fn block(&self, values: &[i8]) -> Option<&Block> {
        self.blocks
            .iter()
            .find(|b| b.key.iter().map(|e| e.value).eq(values.iter().copied()))
    }
}

/// Runs every eigenstate, groups successful branches by block key and
/// checks that each block is a bijection between eigenstates and final
/// outcomes.
pub fn derive_map_table(spec: &EigenbasisSpec) -> Result<InferenceTable> {
    let mut blocks: BTreeMap<Vec<RecordEntry>, BTreeMap<usize, BTreeSet<FinalOutcome>>> = BTreeMap::new();
    for (i, state) in eigenbasis(spec)?.iter().enumerate() {
        for b in run(spec, state)?.branches {
            if let Some((key, outcome)) = block_view(&b.alice_record, &b.bob_record, spec)? {
                blocks.entry(key).or_default().entry(i + 1).or_default().insert(outcome);
            }
        }
    }
    let mut out = Vec::with_capacity(blocks.len());
    for (key, map) in blocks {
        let mut rows = Vec::with_capacity(map.len());
        let mut seen = BTreeSet::new();
        for (index, outcomes) in map {
            if outcomes.len() != 1 {
                bail!(Structural, "eigenstate {index} reaches {} outcomes within one block", outcomes.len());
            }
            let outcome = *outcomes.first().expect("one outcome");
            if !seen.insert(outcome) {
                bail!(Structural, "block maps two eigenstates onto {outcome}");
            }
            rows.push(TableRow { index, outcome });
        }
        out.push(Block { key, rows });
    }
    Ok(InferenceTable { spec: spec.clone(), blocks: out })
}

/// A row of a reference table that the derived table assigns differently.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMismatch {
    pub key: Vec<i8>,
    pub outcome: FinalOutcome,
    pub reference_index: usize,
    pub derived_index: Option<usize>,
}

/// Reference outcome table: `(key values, [(index, outcome)])` per block.
pub type ReferenceTable = Vec<(Vec<i8>, Vec<(usize, FinalOutcome)>)>;

fn product(a: u8, b: u8) -> FinalOutcome {
    FinalOutcome::Product { a, b }
}

/// Twisted product basis, blocks keyed by `(v(σ_z) of Alice's half,
/// v(σ_x) of Bob's half)`, rows as printed. The `z = +1` blocks list index 3
/// on two rows.
pub fn reference_twisted_product() -> ReferenceTable {
    vec![
        (vec![1, 1], vec![(1, product(0, 0)), (2, product(0, 1)), (3, product(1, 0)), (3, product(1, 1))]),
        (vec![1, -1], vec![(1, product(0, 0)), (2, product(0, 1)), (3, product(1, 1)), (3, product(1, 0))]),
        (vec![-1, 1], vec![(1, product(0, 1)), (2, product(0, 0)), (3, product(1, 1)), (4, product(1, 0))]),
        (vec![-1, -1], vec![(1, product(0, 1)), (2, product(0, 0)), (3, product(1, 0)), (4, product(1, 1))]),
    ]
}

/// Equally entangled nonmaximal basis, blocks keyed by the remote CNOT
/// records `(v(σ_z) of Alice's half, v(σ_x) of Bob's half)`.
pub fn reference_nonmax_equal() -> ReferenceTable {
    let upper = vec![(1, product(0, 0)), (2, product(1, 0)), (3, product(0, 1)), (4, product(1, 1))];
    let lower = vec![(1, product(0, 1)), (2, product(1, 1)), (3, product(0, 0)), (4, product(1, 0))];
    vec![
        (vec![1, 1], upper.clone()),
        (vec![1, -1], upper),
        (vec![-1, 1], lower.clone()),
        (vec![-1, -1], lower),
    ]
}

/// Reference rows whose eigenstate index differs from the derived one.
pub fn compare_with_reference(table: &InferenceTable, reference: &ReferenceTable) -> Vec<RowMismatch> {
    let mut out = Vec::new();
    for (key, rows) in reference {
        let block = table.block(key);
        for &(reference_index, outcome) in rows {
            let derived_index = block.and_then(|b| b.rows.iter().find(|r| r.outcome == outcome).map(|r| r.index));
            if derived_index != Some(reference_index) {
                out.push(RowMismatch { key: key.clone(), outcome, reference_index, derived_index });
            }
        }
    }
    out
}

/// Reference rows carrying an index already used earlier in their block.
pub fn duplicated_reference_rows(reference: &ReferenceTable) -> Vec<(Vec<i8>, FinalOutcome)> {
    let mut out = Vec::new();
    for (key, rows) in reference {
        let mut seen = BTreeSet::new();
        for &(index, outcome) in rows {
            if !seen.insert(index) {
                out.push((key.clone(), outcome));
            }
        }
    }
    out
}

/// Reference table for `family`, if there is one.
pub fn reference_table(family: Family) -> Option<ReferenceTable> {
    match family {
        Family::TwistedProduct => Some(reference_twisted_product()),
        Family::NonmaxEqual => Some(reference_nonmax_equal()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    #[test]
    fn report_pass_flag() {
        assert!(OracleReport::new("x", 1.0, 1.0 + 1e-13, 1e-12).pass);
        assert!(!OracleReport::new("x", 1.0, 1.1, 1e-12).pass);
    }

    #[test]
    fn born_oracle_on_zero_zero() {
        let spec = EigenbasisSpec::nonmax_equal(FRAC_PI_3, 2);
        let mut amps = vec![C64::new(0.0, 0.0); 4];
        amps[0] = C64::new(1.0, 0.0);
        let p = born_oracle(&spec, &spec.input_state(amps).unwrap()).unwrap();
        let (s, c) = (FRAC_PI_3 / 2.0).sin_cos();
        assert!((p[0] - c * c).abs() < 1e-12 && (p[1] - s * s).abs() < 1e-12);
        assert!(p[2].abs() < 1e-12 && p[3].abs() < 1e-12);
    }

    #[test]
    fn total_variation_basics() {
        let p: BTreeMap<String, f64> = [("a".into(), 0.5), ("b".into(), 0.5)].into();
        let q: BTreeMap<String, f64> = [("a".into(), 1.0)].into();
        assert!((total_variation(&p, &q) - 0.5).abs() < 1e-15);
        assert_eq!(total_variation(&p, &p), 0.0);
    }

    #[test]
    fn duplicates_in_reference() {
        let d = duplicated_reference_rows(&reference_twisted_product());
        assert_eq!(d, vec![(vec![1, 1], product(1, 1)), (vec![1, -1], product(1, 0))]);
        assert!(duplicated_reference_rows(&reference_nonmax_equal()).is_empty());
    }
}
