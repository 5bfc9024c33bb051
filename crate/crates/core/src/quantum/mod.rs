//! Exact finite-dimensional quantum mechanics on up to three qubits.
//!
//! Subsystems are indexed from the most significant factor: in a state
//! `|c⟩|b⟩|s⟩` the carrier `c` is subsystem 0, `b` is 1 and `s` is 2.

mod matrix;
mod spectral;
mod symbol;

pub use matrix::{Matrix, C64};
pub use spectral::{hermitian_spectrum, support_projector, trace_norm, Spectrum, SUPPORT_TOL};
pub use symbol::{BasisLabel, Bit, PreparedSymbol};

use matrix::{ONE, ZERO};
use rand::Rng;
use std::f64::consts::FRAC_1_SQRT_2;
use thiserror::Error;

/// Largest register handled anywhere in the crate.
pub const MAX_QUBITS: usize = 3;
/// Tolerance on norms, traces, unitarity and Hermiticity.
pub const STATE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("dimension {0} is not 2^m for 1 <= m <= 3")]
    BadDimension(usize),
    #[error("combined dimension {0} exceeds 2^3")]
    DimensionOverflow(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("not a density matrix: {0}")]
    NotDensity(String),
    #[error("subsystem {index} out of range for a {qubits}-qubit state")]
    InvalidSubsystem { index: usize, qubits: usize },
    #[error("mixture weights must be nonnegative and sum to 1 (sum {0})")]
    WeightSum(f64),
    #[error("{weights} weights supplied for {states} states")]
    LengthMismatch { weights: usize, states: usize },
    #[error("cannot condition on an outcome of probability zero")]
    ImpossibleOutcome,
}

fn qubits_for(dim: usize) -> Result<usize, QuantumError> {
    match dim {
        2 => Ok(1),
        4 => Ok(2),
        8 => Ok(3),
        d if d > 8 && d.is_power_of_two() => Err(QuantumError::DimensionOverflow(d)),
        d => Err(QuantumError::BadDimension(d)),
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Normalized state vector over 1–3 qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(amps: Vec<C64>) -> Result<Self, QuantumError> {
        qubits_for(amps.len())?;
        let n = norm_sqr(&amps);
        if (n - 1.0).abs() > STATE_TOL {
            return Err(QuantumError::NotNormalized(n));
        }
        Ok(Self { amps })
    }

    /// Normalizes before validating the dimension.
    pub fn normalized(amps: Vec<C64>) -> Result<Self, QuantumError> {
        let n = norm_sqr(&amps).sqrt();
        if n == 0.0 {
            return Err(QuantumError::NotNormalized(0.0));
        }
        Self::new(amps.into_iter().map(|z| z / n).collect())
    }

    pub fn from_real(amps: &[f64]) -> Result<Self, QuantumError> {
        Self::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis state `|index⟩` on `qubits` qubits.
    pub fn basis(qubits: usize, index: usize) -> Result<Self, QuantumError> {
        let dim = 1usize << qubits;
        qubits_for(dim)?;
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { amps })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Largest amplitude-wise modulus difference.
    pub fn max_abs_diff(&self, other: &PureState) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn projector(&self) -> Matrix {
        Matrix::outer(&self.amps, &self.amps)
    }
}

/// Kronecker product with the left operand as the most significant subsystem.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self, QuantumError>;
}

impl Tensor for PureState {
    fn tensor(&self, other: &Self) -> Result<Self, QuantumError> {
        let dim = self.dim() * other.dim();
        qubits_for(dim)?;
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(Self { amps })
    }
}

/// Unitary on 1–3 qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOperator {
    matrix: Matrix,
}

impl UnitaryOperator {
    pub fn new(matrix: Matrix) -> Result<Self, QuantumError> {
        qubits_for(matrix.dim())?;
        let dev = unitarity_defect(&matrix);
        if dev > STATE_TOL {
            return Err(QuantumError::NotUnitary(dev));
        }
        Ok(Self { matrix })
    }

    pub fn identity(qubits: usize) -> Result<Self, QuantumError> {
        Self::new(Matrix::identity(1 << qubits))
    }

    pub fn pauli_x() -> Self {
        Self {
            matrix: Matrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// ‖U†U − I‖_max
pub fn unitarity_defect(u: &Matrix) -> f64 {
    (&u.adjoint() * u).max_abs_diff(&Matrix::identity(u.dim()))
}

impl Tensor for UnitaryOperator {
    fn tensor(&self, other: &Self) -> Result<Self, QuantumError> {
        let dim = self.dim() * other.dim();
        qubits_for(dim)?;
        Ok(Self {
            matrix: self.matrix.kron(&other.matrix),
        })
    }
}

/// Matrix–vector product `U|s⟩`.
pub fn apply(u: &UnitaryOperator, s: &PureState) -> Result<PureState, QuantumError> {
    if u.dim() != s.dim() {
        return Err(QuantumError::DimensionMismatch {
            left: u.dim(),
            right: s.dim(),
        });
    }
    // U is unitary to 1e-10, so the image is normalized to the same order.
    PureState::new(u.matrix.mul_vec(&s.amps))
}

pub fn ket(symbol: PreparedSymbol) -> PureState {
    let h = FRAC_1_SQRT_2;
    let amps = match symbol {
        PreparedSymbol::Z0 => [1.0, 0.0],
        PreparedSymbol::Z1 => [0.0, 1.0],
        PreparedSymbol::XPlus => [h, h],
        PreparedSymbol::XMinus => [h, -h],
    };
    PureState::from_real(&amps).expect("basis kets are normalized")
}

fn check_subsystem(s: &PureState, which: usize) -> Result<(), QuantumError> {
    let qubits = s.num_qubits();
    if which >= qubits {
        return Err(QuantumError::InvalidSubsystem {
            index: which,
            qubits,
        });
    }
    Ok(())
}

/// `⟨symbol|_which |s⟩`: the unnormalized state of the remaining qubits.
/// Returns an empty vector when `s` is a single qubit (only the scalar is
/// meaningful there, see [`outcome_probability`]).
fn contract(s: &PureState, which: usize, symbol: PreparedSymbol) -> (f64, Vec<C64>) {
    let bra = ket(symbol);
    let (b0, b1) = (bra.amps[0].conj(), bra.amps[1].conj());
    let qubits = s.num_qubits();
    let shift = qubits - 1 - which;
    let low_mask = (1usize << shift) - 1;
    let rest = s.dim() / 2;
    let mut out = Vec::with_capacity(rest);
    for r in 0..rest {
        let hi = r >> shift;
        let lo = r & low_mask;
        let i0 = (hi << (shift + 1)) | lo;
        let i1 = i0 | (1 << shift);
        out.push(b0 * s.amps[i0] + b1 * s.amps[i1]);
    }
    (norm_sqr(&out), out)
}

/// Born probability of obtaining `symbol` when subsystem `which` is measured
/// in `symbol.basis()`.
pub fn outcome_probability(
    s: &PureState,
    which: usize,
    symbol: PreparedSymbol,
) -> Result<f64, QuantumError> {
    check_subsystem(s, which)?;
    Ok(contract(s, which, symbol).0)
}

/// Conditional state of the other subsystems given that subsystem `which`
/// was found in `symbol`. Returns the outcome probability with the
/// normalized residual (`None` for a single-qubit input).
pub fn condition_on(
    s: &PureState,
    which: usize,
    symbol: PreparedSymbol,
) -> Result<(f64, Option<PureState>), QuantumError> {
    check_subsystem(s, which)?;
    let (p, rest) = contract(s, which, symbol);
    if s.num_qubits() == 1 {
        return Ok((p, None));
    }
    if p <= 0.0 {
        return Err(QuantumError::ImpossibleOutcome);
    }
    let n = p.sqrt();
    let residual = PureState {
        amps: rest.into_iter().map(|z| z / n).collect(),
    };
    Ok((p, Some(residual)))
}

/// Inverse of [`condition_on`]: re-inserts a definite single-qubit state at
/// position `which`.
pub fn insert_subsystem(
    residual: &PureState,
    which: usize,
    symbol: PreparedSymbol,
) -> Result<PureState, QuantumError> {
    let qubits = residual.num_qubits() + 1;
    if which >= qubits {
        return Err(QuantumError::InvalidSubsystem {
            index: which,
            qubits,
        });
    }
    let dim = residual.dim() * 2;
    qubits_for(dim)?;
    let k = ket(symbol);
    let shift = qubits - 1 - which;
    let low_mask = (1usize << shift) - 1;
    let mut amps = vec![ZERO; dim];
    for (r, &a) in residual.amps.iter().enumerate() {
        let hi = r >> shift;
        let lo = r & low_mask;
        let i0 = (hi << (shift + 1)) | lo;
        amps[i0] = a * k.amps[0];
        amps[i0 | (1 << shift)] = a * k.amps[1];
    }
    Ok(PureState { amps })
}

/// Projective measurement of one subsystem in `basis`. The outcome is the
/// bit of the observed symbol; the collapsed state keeps the full register.
pub fn measure_subsystem<R: Rng + ?Sized>(
    s: &PureState,
    which: usize,
    basis: BasisLabel,
    rng: &mut R,
) -> Result<(Bit, PureState), QuantumError> {
    check_subsystem(s, which)?;
    let zero = PreparedSymbol::new(basis, 0);
    let one = PreparedSymbol::new(basis, 1);
    let p0 = contract(s, which, zero).0;
    let p1 = contract(s, which, one).0;
    let outcome: Bit = if rng.random::<f64>() * (p0 + p1) < p0 {
        0
    } else {
        1
    };
    let observed = if outcome == 0 { zero } else { one };
    let collapsed = if s.num_qubits() == 1 {
        ket(observed)
    } else {
        let (_, residual) = condition_on(s, which, observed)?;
        insert_subsystem(&residual.expect("multi-qubit residual"), which, observed)?
    };
    Ok((outcome, collapsed))
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: Matrix,
}

impl DensityMatrix {
    pub fn new(matrix: Matrix) -> Result<Self, QuantumError> {
        qubits_for(matrix.dim())?;
        let herm = matrix.hermiticity_defect();
        if herm > STATE_TOL {
            return Err(QuantumError::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(QuantumError::NotDensity(format!("trace {tr}")));
        }
        let eig = hermitian_spectrum(&matrix)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -1e-9 {
            return Err(QuantumError::NotDensity(format!(
                "negative eigenvalue {min}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn pure(s: &PureState) -> Self {
        Self {
            matrix: s.projector(),
        }
    }

    pub fn maximally_mixed(qubits: usize) -> Result<Self, QuantumError> {
        let dim = 1usize << qubits;
        qubits_for(dim)?;
        Ok(Self {
            matrix: Matrix::identity(dim).scale(1.0 / dim as f64),
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Σ wᵢ |φᵢ⟩⟨φᵢ|
pub fn mixture(weights: &[f64], states: &[PureState]) -> Result<DensityMatrix, QuantumError> {
    if weights.len() != states.len() || states.is_empty() {
        return Err(QuantumError::LengthMismatch {
            weights: weights.len(),
            states: states.len(),
        });
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > STATE_TOL {
        return Err(QuantumError::WeightSum(sum));
    }
    let dim = states[0].dim();
    let mut m = Matrix::zeros(dim);
    for (w, s) in weights.iter().zip(states) {
        if s.dim() != dim {
            return Err(QuantumError::DimensionMismatch {
                left: dim,
                right: s.dim(),
            });
        }
        m = &m + &s.projector().scale(*w);
    }
    DensityMatrix::new(m)
}
