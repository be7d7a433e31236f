//! Two-atom state space and density matrices.
//!
//! Each atom carries the four-level basis {|0⟩, |1⟩, |r⟩, |d⟩}: the two
//! qubit hyperfine states, the Rydberg state, and an absorbing sink |d⟩ for
//! radiative loss out of the computational space. |d⟩ has no couplings.
//! Qubit pulses drive 1↔r by default; see the level-scheme docs for the
//! convention. Two-atom product index is 4·(control level) + (target level).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Single-atom level. The numeric value is the basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Zero = 0,
    One = 1,
    Rydberg = 2,
    Sink = 3,
}

pub const N_LEVELS: usize = 4;
pub const DIM: usize = 16;

/// Product basis index for (control, target) levels.
pub fn product_index(control: Level, target: Level) -> usize {
    N_LEVELS * control as usize + target as usize
}

/// Indices of the computational subspace {|00⟩, |01⟩, |10⟩, |11⟩}.
pub const COMPUTATIONAL: [usize; 4] = [0, 1, 4, 5];

/// Single-atom basis vector.
pub fn level_vector(level: Level) -> DVector<C64> {
    let mut v = DVector::zeros(N_LEVELS);
    v[level as usize] = C64::from(1.0);
    v
}

/// Two-atom product state from single-atom amplitudes.
pub fn product_state(control: &DVector<C64>, target: &DVector<C64>) -> DVector<C64> {
    assert_eq!(control.len(), N_LEVELS);
    assert_eq!(target.len(), N_LEVELS);
    let mut v = DVector::zeros(DIM);
    for i in 0..N_LEVELS {
        for j in 0..N_LEVELS {
            v[N_LEVELS * i + j] = control[i] * target[j];
        }
    }
    v
}

/// Embed a 4-component computational amplitude vector (|00⟩,|01⟩,|10⟩,|11⟩)
/// into the 16-dimensional product space.
pub fn embed_computational(amplitudes: &[C64; 4]) -> DVector<C64> {
    let mut v = DVector::zeros(DIM);
    for (a, &k) in amplitudes.iter().zip(COMPUTATIONAL.iter()) {
        v[k] = *a;
    }
    v
}

/// 16×16 complex Hermitian density matrix over the two-atom product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoAtomDensityMatrix {
    mat: DMatrix<C64>,
}

impl TwoAtomDensityMatrix {
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != DIM || mat.ncols() != DIM {
            return Err(Error::DimensionMismatch {
                expected: DIM,
                actual: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(Self { mat })
    }

    pub fn from_pure(psi: &DVector<C64>) -> Result<Self> {
        if psi.len() != DIM {
            return Err(Error::DimensionMismatch {
                expected: DIM,
                actual: psi.len(),
            });
        }
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::NonPositive {
                name: "state norm",
                value: 0.0,
            });
        }
        let psi = psi / C64::from(norm);
        Ok(Self {
            mat: &psi * psi.adjoint(),
        })
    }

    pub fn basis_state(control: Level, target: Level) -> Self {
        let mut mat = DMatrix::zeros(DIM, DIM);
        let k = product_index(control, target);
        mat[(k, k)] = C64::from(1.0);
        Self { mat }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat)
            .diagonal()
            .iter()
            .map(|z| z.re)
            .sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.mat - self.mat.adjoint()).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // symmetrize first so the self-adjoint eigensolver sees exact input
        let h = (&self.mat + self.mat.adjoint()) * C64::from(0.5);
        h.symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Check the state invariants: Hermitian to 1e-12, trace within 1e-9 of
    /// one, positive semidefinite to −1e-9.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::InvariantViolation {
                key: "density.hermitian".into(),
                reason: format!("asymmetry norm {herm:e}"),
            });
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvariantViolation {
                key: "density.trace".into(),
                reason: format!("trace {tr}"),
            });
        }
        let lam = self.min_eigenvalue();
        if lam < -1e-9 {
            return Err(Error::InvariantViolation {
                key: "density.positive".into(),
                reason: format!("min eigenvalue {lam:e}"),
            });
        }
        Ok(())
    }

    /// Population of one product level.
    pub fn population(&self, control: Level, target: Level) -> f64 {
        let k = product_index(control, target);
        self.mat[(k, k)].re
    }

    /// The 4×4 computational block (not renormalized).
    pub fn computational_block(&self) -> DMatrix<C64> {
        let mut b = DMatrix::zeros(4, 4);
        for (bi, &i) in COMPUTATIONAL.iter().enumerate() {
            for (bj, &j) in COMPUTATIONAL.iter().enumerate() {
                b[(bi, bj)] = self.mat[(i, j)];
            }
        }
        b
    }

    pub fn apply_unitary(&self, u: &DMatrix<C64>) -> Self {
        Self {
            mat: u * &self.mat * u.adjoint(),
        }
    }

    /// Documented text form: `#`-prefixed header, then 16 rows of 16
    /// row-major `re,im` pairs separated by single spaces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# two-atom density matrix\n");
        s.push_str("# basis |c t>, per-atom levels 0,1,r,d; index = 4*c + t\n");
        s.push_str("# 16 rows of 16 row-major re,im pairs\n");
        for i in 0..DIM {
            let row: Vec<String> = (0..DIM)
                .map(|j| format!("{},{}", self.mat[(i, j)].re, self.mat[(i, j)].im))
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

/// State fidelity ⟨ψ|ρ|ψ⟩ of a density matrix against a pure target.
pub fn state_fidelity(rho: &TwoAtomDensityMatrix, psi: &DVector<C64>) -> Result<f64> {
    if psi.len() != DIM {
        return Err(Error::DimensionMismatch {
            expected: DIM,
            actual: psi.len(),
        });
    }
    Ok((psi.adjoint() * rho.matrix() * psi)[(0, 0)].re)
}

/// Textbook Bell states in the 16-dim product space.
pub fn bell_state_b1() -> DVector<C64> {
    let s = C64::from(1.0 / 2f64.sqrt());
    embed_computational(&[s, C64::from(0.0), C64::from(0.0), s])
}

pub fn bell_state_b2() -> DVector<C64> {
    let s = C64::from(1.0 / 2f64.sqrt());
    embed_computational(&[C64::from(0.0), s, s, C64::from(0.0)])
}
