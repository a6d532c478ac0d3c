use super::{
    c, DensityMatrix, Gate, Matrix, Party, PauliAxis, QubitId, QubitRef, Role, C64,
    LINALG_TOLERANCE, MAX_QUBITS, PRUNE_THRESHOLD,
};
use crate::error::{bail, Result};
use serde::{Deserialize, Serialize};

/// Pure state of a register of party-tagged qubits.
///
/// Values are immutable: every operation returns a new state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    register: Vec<QubitRef>,
    amplitudes: Vec<C64>,
    next_id: u32,
}

/// One outcome of a projective measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBranch {
    pub outcome: i8,
    pub probability: f64,
    pub post: StateVector,
}

impl StateVector {
    /// Computational basis state `|label⟩` over `register`. Character `i` of
    /// the label is the value of `register[i]`.
    pub fn make_state(register: Vec<QubitRef>, basis_label: &str) -> Result<Self> {
        if basis_label.chars().count() != register.len() {
            bail!(
                Structural,
                "basis label {basis_label:?} has {} bits, register has {} qubits",
                basis_label.chars().count(),
                register.len()
            );
        }
        let mut index = 0usize;
        for ch in basis_label.chars() {
            index = (index << 1)
                | match ch {
                    '0' => 0,
                    '1' => 1,
                    other => bail!(Structural, "basis label contains {other:?}"),
                };
        }
        let mut amplitudes = vec![c(0.0, 0.0); 1 << register.len()];
        amplitudes[index] = c(1.0, 0.0);
        Self::from_amplitudes(register, amplitudes)
    }

    /// Wraps explicit amplitudes. They must already be normalized.
    pub fn from_amplitudes(register: Vec<QubitRef>, amplitudes: Vec<C64>) -> Result<Self> {
        validate_register(&register)?;
        if amplitudes.len() != 1 << register.len() {
            bail!(
                Structural,
                "{} amplitudes for a {}-qubit register",
                amplitudes.len(),
                register.len()
            );
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !((norm - 1.0).abs() <= LINALG_TOLERANCE) {
            bail!(Validation, "state is not normalized (norm² = {norm})");
        }
        let next_id = register.iter().map(|q| q.id.0 + 1).max().unwrap_or(0);
        Ok(StateVector {
            register,
            amplitudes,
            next_id,
        })
    }

    /// Like [`from_amplitudes`](Self::from_amplitudes) but rescales to unit norm first.
    pub fn normalized(register: Vec<QubitRef>, amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            bail!(Validation, "cannot normalize a zero or non-finite vector");
        }
        let scaled = amplitudes.into_iter().map(|a| a / norm).collect();
        Self::from_amplitudes(register, scaled)
    }

    pub fn register(&self) -> &[QubitRef] {
        &self.register
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn num_qubits(&self) -> usize {
        self.register.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn contains(&self, id: QubitId) -> bool {
        self.register.iter().any(|q| q.id == id)
    }

    pub fn position(&self, id: QubitId) -> Result<usize> {
        match self.register.iter().position(|q| q.id == id) {
            Some(p) => Ok(p),
            None => bail!(Structural, "qubit {:?} is not in the register", id),
        }
    }

    pub fn qubit(&self, id: QubitId) -> Result<QubitRef> {
        Ok(self.register[self.position(id)?])
    }

    fn shift_of(&self, id: QubitId) -> Result<usize> {
        Ok(self.num_qubits() - 1 - self.position(id)?)
    }

    /// `(gate ⊗ I_rest)·self`.
    pub fn apply_gate(&self, gate: &Gate) -> Result<StateVector> {
        let shifts = gate
            .targets()
            .iter()
            .map(|t| self.shift_of(*t))
            .collect::<Result<Vec<_>>>()?;
        let t = shifts.len();
        let dim = 1usize << t;
        let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let offsets: Vec<usize> = (0..dim)
            .map(|j| {
                (0..t)
                    .filter(|b| (j >> (t - 1 - b)) & 1 == 1)
                    .map(|b| 1usize << shifts[b])
                    .sum()
            })
            .collect();
        let m = gate.matrix();
        let mut out = self.amplitudes.clone();
        let mut buf = vec![c(0.0, 0.0); dim];
        for base in (0..self.amplitudes.len()).filter(|i| i & mask == 0) {
            for (j, off) in offsets.iter().enumerate() {
                buf[j] = self.amplitudes[base | off];
            }
            for (i, off) in offsets.iter().enumerate() {
                out[base | off] = (0..dim).map(|j| m.get(i, j) * buf[j]).sum();
            }
        }
        Ok(StateVector {
            register: self.register.clone(),
            amplitudes: out,
            next_id: self.next_id,
        })
    }

    /// Appends a fresh ebit `(|00⟩+|11⟩)/√2`; the first new qubit belongs to
    /// Alice, the second to Bob. Returns `(state, alice_half, bob_half)`.
    pub fn append_ebit(&self) -> Result<(StateVector, QubitId, QubitId)> {
        if self.num_qubits() + 2 > MAX_QUBITS {
            bail!(
                Resource,
                "register of {} qubits cannot hold another ebit (cap {MAX_QUBITS})",
                self.num_qubits()
            );
        }
        let (a, b) = (QubitId(self.next_id), QubitId(self.next_id + 1));
        let mut register = self.register.clone();
        register.push(QubitRef {
            id: a,
            party: Party::Alice,
            role: Role::EbitHalf,
            partner: Some(b),
        });
        register.push(QubitRef {
            id: b,
            party: Party::Bob,
            role: Role::EbitHalf,
            partner: Some(a),
        });
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amplitudes = vec![c(0.0, 0.0); self.amplitudes.len() << 2];
        for (i, amp) in self.amplitudes.iter().enumerate() {
            amplitudes[i << 2] = amp * h;
            amplitudes[(i << 2) | 0b11] = amp * h;
        }
        Ok((
            StateVector {
                register,
                amplitudes,
                next_id: self.next_id + 2,
            },
            a,
            b,
        ))
    }

    /// `⟨e|_target ψ` as a vector over the remaining qubits.
    fn contract(&self, shift: usize, e: [C64; 2]) -> Vec<C64> {
        let low_mask = (1usize << shift) - 1;
        (0..self.amplitudes.len() / 2)
            .map(|r| {
                let i0 = ((r >> shift) << (shift + 1)) | (r & low_mask);
                e[0].conj() * self.amplitudes[i0] + e[1].conj() * self.amplitudes[i0 | (1 << shift)]
            })
            .collect()
    }

    fn measure_impl(&self, axis: PauliAxis, target: QubitId, discard: bool) -> Result<Vec<MeasurementBranch>> {
        let shift = self.shift_of(target)?;
        let pos = self.position(target)?;
        let mut branches = Vec::with_capacity(2);
        for outcome in [1i8, -1] {
            let e = axis.eigenvector(outcome);
            let rest = self.contract(shift, e);
            let probability: f64 = rest.iter().map(|a| a.norm_sqr()).sum();
            if probability < PRUNE_THRESHOLD {
                continue;
            }
            let scale = 1.0 / probability.sqrt();
            let post = if discard {
                let mut register = self.register.clone();
                register.remove(pos);
                StateVector {
                    register,
                    amplitudes: rest.into_iter().map(|a| a * scale).collect(),
                    next_id: self.next_id,
                }
            } else {
                let low_mask = (1usize << shift) - 1;
                let mut amplitudes = vec![c(0.0, 0.0); self.amplitudes.len()];
                for (r, a) in rest.iter().enumerate() {
                    let i0 = ((r >> shift) << (shift + 1)) | (r & low_mask);
                    amplitudes[i0] = e[0] * a * scale;
                    amplitudes[i0 | (1 << shift)] = e[1] * a * scale;
                }
                StateVector {
                    register: self.register.clone(),
                    amplitudes,
                    next_id: self.next_id,
                }
            };
            branches.push(MeasurementBranch {
                outcome,
                probability,
                post,
            });
        }
        Ok(branches)
    }

    /// Projective measurement of `σ_axis` on `target`. Both outcomes are
    /// returned (`+1` first) unless one has Born weight below the pruning
    /// threshold. The measured qubit stays in the register.
    pub fn measure_branches(&self, axis: PauliAxis, target: QubitId) -> Result<Vec<MeasurementBranch>> {
        self.measure_impl(axis, target, false)
    }

    /// As [`measure_branches`](Self::measure_branches), but the measured qubit
    /// is removed from each post-state.
    pub fn measure_and_discard(&self, axis: PauliAxis, target: QubitId) -> Result<Vec<MeasurementBranch>> {
        self.measure_impl(axis, target, true)
    }

    /// Reduced density matrix over `keep`, in the order given.
    pub fn partial_trace(&self, keep: &[QubitId]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            bail!(Structural, "partial trace must keep at least one qubit");
        }
        let k = self.num_qubits();
        let mut kept_shifts = Vec::with_capacity(keep.len());
        for (i, id) in keep.iter().enumerate() {
            if keep[..i].contains(id) {
                bail!(Structural, "qubit {:?} listed twice", id);
            }
            kept_shifts.push(self.shift_of(*id)?);
        }
        let rest_shifts: Vec<usize> = (0..k).rev().filter(|s| !kept_shifts.contains(s)).collect();
        let dk = 1usize << keep.len();
        let dr = 1usize << rest_shifts.len();
        let gather = |i: usize, shifts: &[usize]| {
            shifts
                .iter()
                .fold(0usize, |acc, s| (acc << 1) | ((i >> s) & 1))
        };
        let mut block = vec![c(0.0, 0.0); dk * dr];
        for (i, amp) in self.amplitudes.iter().enumerate() {
            block[gather(i, &kept_shifts) * dr + gather(i, &rest_shifts)] = *amp;
        }
        let mut rho = Matrix::zeros(dk);
        for i in 0..dk {
            for j in 0..dk {
                let v: C64 = (0..dr)
                    .map(|r| block[i * dr + r] * block[j * dr + r].conj())
                    .sum();
                rho.set(i, j, v);
            }
        }
        Ok(DensityMatrix::from_matrix(rho))
    }

    /// `⟨self|other⟩`. Both states must share the same register.
    pub fn inner_product(&self, other: &StateVector) -> Result<C64> {
        self.check_same_register(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(x, y)| x.conj() * y)
            .sum())
    }

    /// `|⟨self|other⟩|`, insensitive to global phase.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner_product(other)?.norm())
    }

    /// Largest amplitude-wise difference; phase-sensitive.
    pub fn max_amplitude_diff(&self, other: &StateVector) -> Result<f64> {
        self.check_same_register(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }

    fn check_same_register(&self, other: &StateVector) -> Result<()> {
        let ids = |s: &StateVector| s.register.iter().map(|q| q.id).collect::<Vec<_>>();
        if ids(self) != ids(other) {
            bail!(Structural, "register mismatch");
        }
        Ok(())
    }
}

fn validate_register(register: &[QubitRef]) -> Result<()> {
    if register.len() > MAX_QUBITS {
        bail!(Resource, "{} qubits exceed the cap of {MAX_QUBITS}", register.len());
    }
    for (i, q) in register.iter().enumerate() {
        if register[..i].iter().any(|p| p.id == q.id) {
            bail!(Structural, "qubit id {:?} appears twice", q.id);
        }
        if q.role == Role::EbitHalf {
            let Some(pid) = q.partner else {
                bail!(Structural, "ebit half {} has no partner", q.label());
            };
            // the partner may already have been measured away
            if let Some(p) = register.iter().find(|p| p.id == pid) {
                if p.role != Role::EbitHalf || p.party == q.party || p.partner != Some(q.id) {
                    bail!(Structural, "ebit half {} lacks a partner held by the other party", q.label());
                }
            }
        }
    }
    Ok(())
}
