//! Minimum-error discrimination of two prior-weighted mixed states.
//!
//! The optimal two-outcome measurement projects onto the nonnegative and
//! negative eigenspaces of `p1·ρ1 − p2·ρ2`; its error is
//! `½(1 − ‖p1·ρ1 − p2·ρ2‖₁)`.

use crate::quantum::{
    hermitian_spectrum, support_projector, DensityMatrix, Matrix, PureState, QuantumError,
    STATE_TOL,
};
use rand::Rng;

/// Eigenvalues of the weighted difference within this distance of zero are
/// treated as zero and assigned to the first effect.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct WeightedStatePair {
    p1: f64,
    rho1: DensityMatrix,
    p2: f64,
    rho2: DensityMatrix,
}

impl WeightedStatePair {
    pub fn new(
        p1: f64,
        rho1: DensityMatrix,
        p2: f64,
        rho2: DensityMatrix,
    ) -> Result<Self, QuantumError> {
        if p1 < 0.0 || p2 < 0.0 || (p1 + p2 - 1.0).abs() > STATE_TOL {
            return Err(QuantumError::WeightSum(p1 + p2));
        }
        if rho1.dim() != rho2.dim() {
            return Err(QuantumError::DimensionMismatch {
                left: rho1.dim(),
                right: rho2.dim(),
            });
        }
        Ok(Self { p1, rho1, p2, rho2 })
    }

    pub fn priors(&self) -> (f64, f64) {
        (self.p1, self.p2)
    }

    pub fn first(&self) -> &DensityMatrix {
        &self.rho1
    }

    pub fn second(&self) -> &DensityMatrix {
        &self.rho2
    }

    pub fn swapped(&self) -> Self {
        Self {
            p1: self.p2,
            rho1: self.rho2.clone(),
            p2: self.p1,
            rho2: self.rho1.clone(),
        }
    }

    /// p1·ρ1 − p2·ρ2
    pub fn weighted_difference(&self) -> Matrix {
        &self.rho1.matrix().scale(self.p1) - &self.rho2.matrix().scale(self.p2)
    }
}

/// Which hypothesis a measurement outcome points to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    First,
    Second,
}

/// Two-outcome POVM.
#[derive(Clone, Debug)]
pub struct BinaryMeasurement {
    pub effect1: Matrix,
    pub effect2: Matrix,
}

impl BinaryMeasurement {
    /// Probability that a pure input triggers `effect1`.
    pub fn first_probability(&self, state: &PureState) -> f64 {
        self.effect1.expectation(state.amplitudes()).clamp(0.0, 1.0)
    }

    pub fn measure<R: Rng + ?Sized>(&self, state: &PureState, rng: &mut R) -> Hypothesis {
        if rng.random::<f64>() < self.first_probability(state) {
            Hypothesis::First
        } else {
            Hypothesis::Second
        }
    }

    /// p1·tr(E2 ρ1) + p2·tr(E1 ρ2)
    pub fn error_probability(&self, pair: &WeightedStatePair) -> f64 {
        let (p1, p2) = pair.priors();
        let miss1 = (&self.effect2 * pair.first().matrix()).trace().re;
        let miss2 = (&self.effect1 * pair.second().matrix()).trace().re;
        p1 * miss1 + p2 * miss2
    }
}

pub fn helstrom_error(pair: &WeightedStatePair) -> f64 {
    let spectrum = hermitian_spectrum(&pair.weighted_difference())
        .expect("difference of Hermitian matrices is Hermitian");
    let norm: f64 = spectrum.values.iter().map(|l| l.abs()).sum();
    0.5 * (1.0 - norm)
}

pub fn helstrom_measurement(pair: &WeightedStatePair) -> BinaryMeasurement {
    let spectrum = hermitian_spectrum(&pair.weighted_difference())
        .expect("difference of Hermitian matrices is Hermitian");
    BinaryMeasurement {
        effect1: spectrum.projector_where(|l| l >= -TIE_TOL),
        effect2: spectrum.projector_where(|l| l < -TIE_TOL),
    }
}

/// Per direction: can `rho_i` ever be identified with certainty, i.e. is its
/// support not contained in the other state's support.
pub fn unambiguous_feasible(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    tol: f64,
) -> Result<(bool, bool), QuantumError> {
    if rho1.dim() != rho2.dim() {
        return Err(QuantumError::DimensionMismatch {
            left: rho1.dim(),
            right: rho2.dim(),
        });
    }
    let p1 = support_projector(rho1, tol);
    let p2 = support_projector(rho2, tol);
    let id = Matrix::identity(rho1.dim());
    let escapes = |pi: &Matrix, other: &Matrix| (&(&id - other) * pi).max_abs() > tol;
    Ok((escapes(&p1, &p2), escapes(&p2, &p1)))
}
