use super::{EigenbasisSpec, Family};
use crate::error::{bail, Result};
use crate::qcore::{c, Matrix, PauliAxis, StateVector, C64};
use crate::stator::BellState;

/// Orthonormal eigenbasis of the observable described by `spec`, in index
/// order (element `k - 1` is eigenstate `k`).
pub fn eigenbasis(spec: &EigenbasisSpec) -> Result<Vec<StateVector>> {
    spec.validate()?;
    let register = spec.system_register();
    let vectors: Vec<Vec<C64>> = match spec.family {
        Family::TwistedProduct | Family::GeneralProduct => {
            let (s, co) = (spec.alpha / 2.0).sin_cos();
            vec![
                ab(1.0, 0.0, 0.0, 0.0),
                ab(0.0, 1.0, 0.0, 0.0),
                ab(0.0, 0.0, co, s),
                ab(0.0, 0.0, s, -co),
            ]
        }
        Family::NonmaxEqual | Family::NonmaxBell => nonmax(spec.alpha, spec.alpha, 0.0, 0.0),
        Family::NonmaxGeneral => nonmax(spec.alpha, spec.beta, spec.phi1, spec.phi2),
        Family::Twist4x4 => ququart(&spec.u_b_matrix()),
    };
    vectors
        .into_iter()
        .map(|v| StateVector::from_amplitudes(register.clone(), v))
        .collect()
}

fn ab(v00: f64, v01: f64, v10: f64, v11: f64) -> Vec<C64> {
    vec![c(v00, 0.0), c(v01, 0.0), c(v10, 0.0), c(v11, 0.0)]
}

fn nonmax(alpha: f64, beta: f64, phi1: f64, phi2: f64) -> Vec<Vec<C64>> {
    let (sa, ca) = (alpha / 2.0).sin_cos();
    let (sb, cb) = (beta / 2.0).sin_cos();
    let p1 = C64::from_polar(1.0, phi1);
    let p2 = C64::from_polar(1.0, phi2);
    let o = c(0.0, 0.0);
    vec![
        vec![c(ca, 0.0), o, o, p1 * sa],
        vec![c(sa, 0.0), o, o, -p1 * ca],
        vec![o, c(cb, 0.0), p2 * sb, o],
        vec![o, c(sb, 0.0), -p2 * cb, o],
    ]
}

/// Register `[A_hi, A_lo, B_hi, B_lo]`; amplitude index `4j + k` for `|j_A k_B⟩`.
fn ququart(u_b: &Matrix) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(16);
    for (hi_a, hi_b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        for bell in BellState::ALL {
            let pair = bell.amplitudes();
            let pair = if hi_a == 1 && hi_b == 1 {
                // U_B on Bob's intra-subspace qubit
                let mut rotated = [c(0.0, 0.0); 4];
                for lo_a in 0..2 {
                    let v = u_b.apply(&[pair[2 * lo_a], pair[2 * lo_a + 1]]);
                    rotated[2 * lo_a] = v[0];
                    rotated[2 * lo_a + 1] = v[1];
                }
                rotated
            } else {
                pair
            };
            let mut v = vec![c(0.0, 0.0); 16];
            for lo_a in 0..2 {
                for lo_b in 0..2 {
                    let j = 2 * hi_a + lo_a;
                    let k = 2 * hi_b + lo_b;
                    v[4 * j + k] = pair[2 * lo_a + lo_b];
                }
            }
            out.push(v);
        }
    }
    out
}

/// Writes a 2×2 unitary as `e^{iφ}·exp(iθσ_axis)`, returning `(axis, θ)`.
/// A multiple of the identity gives `θ = 0`. Rotations about any axis other
/// than x, y or z are rejected.
pub fn pauli_rotation_of(u: &Matrix) -> Result<(PauliAxis, f64)> {
    if u.dim() != 2 {
        bail!(Structural, "expected a 2×2 matrix");
    }
    let det = u.get(0, 0) * u.get(1, 1) - u.get(0, 1) * u.get(1, 0);
    if (det.norm() - 1.0).abs() > 1e-10 {
        bail!(Validation, "matrix is not unitary (|det| = {})", det.norm());
    }
    let phase = C64::from_polar(1.0, det.arg() / 2.0);
    // V = U/e^{iφ} = cosθ·I + i·sinθ·(n·σ)
    let v = u.scale(phase.conj());
    let cos = (v.get(0, 0) + v.get(1, 1)).re / 2.0;
    let nz = (v.get(0, 0) - v.get(1, 1)).im / 2.0;
    let nx = (v.get(0, 1) + v.get(1, 0)).im / 2.0;
    let ny = (v.get(0, 1) - v.get(1, 0)).re / 2.0;
    let components = [(PauliAxis::X, nx), (PauliAxis::Y, ny), (PauliAxis::Z, nz)];
    let active: Vec<_> = components.iter().filter(|(_, v)| v.abs() > 1e-10).collect();
    match active.as_slice() {
        [] => Ok((PauliAxis::Z, 0.0)),
        [(axis, sin)] => Ok((*axis, sin.atan2(cos))),
        _ => bail!(
            Validation,
            "U_B must be a rotation about x, y or z (up to phase); axis components ({nx:.3}, {ny:.3}, {nz:.3})"
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::spin_rotation;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    fn gram_defect(states: &[StateVector]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let ip = a.inner_product(b).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - c(want, 0.0)).norm());
            }
        }
        worst
    }

    #[test]
    fn twisted_product_states() {
        let basis = eigenbasis(&EigenbasisSpec::twisted_product()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((basis[2].amplitudes()[2] - c(h, 0.0)).norm() < 1e-15);
        assert!((basis[2].amplitudes()[3] - c(h, 0.0)).norm() < 1e-15);
        assert!((basis[3].amplitudes()[3] - c(-h, 0.0)).norm() < 1e-15);
        assert!(gram_defect(&basis) < 1e-12);
    }

    #[test]
    fn quarter_angle_gives_bell_states() {
        let basis = eigenbasis(&EigenbasisSpec::nonmax_equal(FRAC_PI_2, 2)).unwrap();
        // Ψ1 = Φ+, Ψ2 = -Φ-, Ψ3 = Ψ+, Ψ4 = -Ψ-
        for (k, bell) in [BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus]
            .into_iter()
            .enumerate()
        {
            let b = StateVector::from_amplitudes(basis[k].register().to_vec(), bell.amplitudes().to_vec()).unwrap();
            assert!((basis[k].overlap(&b).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn general_gram_is_identity() {
        let spec = EigenbasisSpec::nonmax_general(FRAC_PI_3, PI / 5.0, 0.0, 0.0, 2);
        assert!(gram_defect(&eigenbasis(&spec).unwrap()) < 1e-12);
        let spec = EigenbasisSpec::nonmax_general(0.4, 2.1, 0.7, -1.3, 2);
        assert!(gram_defect(&eigenbasis(&spec).unwrap()) < 1e-12);
    }

    #[test]
    fn ququart_basis_is_orthonormal() {
        let spec = EigenbasisSpec::twist4x4(&spin_rotation(PauliAxis::Y, 0.4), 3).unwrap();
        let basis = eigenbasis(&spec).unwrap();
        assert_eq!(basis.len(), 16);
        assert!(gram_defect(&basis) < 1e-12);
    }

    #[test]
    fn rotation_decomposition() {
        for axis in PauliAxis::ALL {
            for theta in [0.4, -1.1, 2.9] {
                let u = spin_rotation(axis, theta).scale(C64::from_polar(1.0, 0.77));
                let (got_axis, got) = pauli_rotation_of(&u).unwrap();
                let rebuilt = spin_rotation(got_axis, got);
                let ratio = u.get(0, 0).norm().max(u.get(0, 1).norm());
                assert!(ratio > 0.0);
                // equal up to a global phase
                let (i, j) = if u.get(0, 0).norm() > 0.3 { (0, 0) } else { (0, 1) };
                let ph = u.get(i, j) / rebuilt.get(i, j);
                assert!(rebuilt.scale(ph).max_abs_diff(&u) < 1e-12);
            }
        }
        assert_eq!(pauli_rotation_of(&Matrix::identity(2)).unwrap().1, 0.0);
    }
}
