//! Attacks on the honesty-checked protocol.
//!
//! **Database.** Instead of measuring the carrier `c` in a random basis, the
//! database entangles it with a basis register `b` (prepared in |+⟩) and an
//! outcome register `s` (prepared in |0⟩) via
//!
//! ```text
//! U = |0⟩⟨0|_c ⊗ |0⟩⟨0|_b ⊗ I_s + |1⟩⟨1|_c ⊗ |0⟩⟨0|_b ⊗ X_s
//!   + |+⟩⟨+|_c ⊗ |1⟩⟨1|_b ⊗ I_s + |−⟩⟨−|_c ⊗ |1⟩⟨1|_b ⊗ X_s
//! ```
//!
//! Measuring `b` then `s` in Z reproduces the honest random-basis
//! measurement exactly, and the two measurements commute. The database
//! announces `s` right away, measures `b` only for checked positions, and
//! keeps the `c,b` residual of every other position to guess, by optimal
//! two-state discrimination, whether the user's bit there is conclusive.
//!
//! **User.** Choosing inconclusive positions as checking positions removes
//! them from the key, enriching the surviving conclusive fraction to
//! `¼ / (1 − f)`.

use super::protocol::{alice_infer, check_quota, ProtocolTranscript, YuDatabase};
use super::YuError;
use crate::discrimination::{
    helstrom_error, helstrom_measurement, BinaryMeasurement, Hypothesis, WeightedStatePair,
};
use crate::quantum::{
    condition_on, ket, measure_subsystem, outcome_probability, BasisLabel, Bit, DensityMatrix,
    Matrix, PreparedSymbol, PureState, QuantumError, Tensor, UnitaryOperator,
};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Subsystem positions in the three-qubit register `c ⊗ b ⊗ s`.
pub const CARRIER: usize = 0;
pub const BASIS_REGISTER: usize = 1;
pub const OUTCOME_REGISTER: usize = 2;

pub fn two_step_unitary() -> UnitaryOperator {
    let proj = |s: PreparedSymbol| ket(s).projector();
    let id = Matrix::identity(2);
    let x = UnitaryOperator::pauli_x().matrix().clone();
    let term =
        |c: PreparedSymbol, b: PreparedSymbol, s_op: &Matrix| proj(c).kron(&proj(b)).kron(s_op);
    let u = &(&term(PreparedSymbol::Z0, PreparedSymbol::Z0, &id)
        + &term(PreparedSymbol::Z1, PreparedSymbol::Z0, &x))
        + &(&term(PreparedSymbol::XPlus, PreparedSymbol::Z1, &id)
            + &term(PreparedSymbol::XMinus, PreparedSymbol::Z1, &x));
    UnitaryOperator::new(u).expect("block-diagonal controlled unitaries")
}

/// `U (|carrier⟩ ⊗ |+⟩_b ⊗ |0⟩_s)`
pub fn entangle(carrier: &PureState) -> Result<PureState, QuantumError> {
    let input = carrier
        .tensor(&ket(PreparedSymbol::XPlus))?
        .tensor(&ket(PreparedSymbol::Z0))?;
    crate::quantum::apply(&two_step_unitary(), &input)
}

/// What the database retains for one position after announcing.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoStepRoundState {
    /// `c,b` state after the `s` measurement (b is subsystem 1).
    pub residual_cb: PureState,
    pub s_outcome: Bit,
    /// Present only once the position has been used for checking.
    pub b_outcome: Option<Bit>,
}

/// Entangles the carrier, measures `s` in Z and announces the outcome.
pub fn two_step_announce_carrier<R: Rng + ?Sized>(
    carrier: &PureState,
    rng: &mut R,
) -> Result<(Bit, TwoStepRoundState), YuError> {
    let full = entangle(carrier)?;
    let (s, _) = measure_subsystem(&full, OUTCOME_REGISTER, BasisLabel::Z, rng)?;
    let (_, residual) = condition_on(
        &full,
        OUTCOME_REGISTER,
        PreparedSymbol::new(BasisLabel::Z, s),
    )?;
    Ok((
        s,
        TwoStepRoundState {
            residual_cb: residual.expect("three-qubit register"),
            s_outcome: s,
            b_outcome: None,
        },
    ))
}

pub fn two_step_announce<R: Rng + ?Sized>(
    prepared: PreparedSymbol,
    rng: &mut R,
) -> Result<(Bit, TwoStepRoundState), YuError> {
    two_step_announce_carrier(&ket(prepared), rng)
}

/// Maps the register outcomes to the honest-looking reply:
/// (b,s) = (0,0)→|0⟩, (0,1)→|1⟩, (1,0)→|+⟩, (1,1)→|−⟩.
pub fn reply_symbol(b: Bit, s: Bit) -> PreparedSymbol {
    PreparedSymbol::new(BasisLabel::from_index(b), s)
}

/// Measures `b` in Z for a checked position and replies.
pub fn two_step_check_reply<R: Rng + ?Sized>(
    state: &mut TwoStepRoundState,
    position: usize,
    rng: &mut R,
) -> Result<PreparedSymbol, YuError> {
    if state.b_outcome.is_some() {
        return Err(YuError::ReplyTwice(position));
    }
    let (b, collapsed) = measure_subsystem(&state.residual_cb, 1, BasisLabel::Z, rng)?;
    state.b_outcome = Some(b);
    state.residual_cb = collapsed;
    Ok(reply_symbol(b, state.s_outcome))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConclusivenessGuess {
    Conclusive,
    Inconclusive,
}

/// The database's discrimination problem for one announced outcome:
/// `(prior, ρ)` for positions where the user ends up inconclusive (first)
/// and conclusive (second).
///
/// Built by conditioning each of the four entangled preparations on the
/// observed `s` and classifying it with the user's own deduction rule.
pub fn conclusiveness_pair(s: Bit) -> Result<WeightedStatePair, YuError> {
    let outcome = PreparedSymbol::new(BasisLabel::Z, s);
    let mut weights = [Vec::new(), Vec::new()];
    let mut states = [Vec::new(), Vec::new()];
    for prepared in PreparedSymbol::ALL {
        let full = entangle(&ket(prepared))?;
        let p = outcome_probability(&full, OUTCOME_REGISTER, outcome)?;
        if p <= 0.0 {
            continue;
        }
        let (_, residual) = condition_on(&full, OUTCOME_REGISTER, outcome)?;
        let class = alice_infer(prepared, s).is_conclusive() as usize;
        weights[class].push(0.25 * p);
        states[class].push(residual.expect("three-qubit register"));
    }
    let total: f64 = weights.iter().flatten().sum();
    let mut rhos = Vec::with_capacity(2);
    let mut priors = Vec::with_capacity(2);
    for class in 0..2 {
        let mass: f64 = weights[class].iter().sum();
        let normalized: Vec<f64> = weights[class].iter().map(|w| w / mass).collect();
        rhos.push(crate::quantum::mixture(&normalized, &states[class])?);
        priors.push(mass / total);
    }
    let conclusive = rhos.pop().expect("two classes");
    let inconclusive = rhos.pop().expect("two classes");
    Ok(WeightedStatePair::new(
        priors[0],
        inconclusive,
        priors[1],
        conclusive,
    )?)
}

/// Precomputed optimal measurements for both announced outcomes.
#[derive(Clone, Debug)]
pub struct TwoStepAttacker {
    pairs: [WeightedStatePair; 2],
    measurements: [BinaryMeasurement; 2],
}

impl TwoStepAttacker {
    pub fn new() -> Result<Self, YuError> {
        let pairs = [conclusiveness_pair(0)?, conclusiveness_pair(1)?];
        let measurements = [
            helstrom_measurement(&pairs[0]),
            helstrom_measurement(&pairs[1]),
        ];
        Ok(Self {
            pairs,
            measurements,
        })
    }

    pub fn pair(&self, s: Bit) -> &WeightedStatePair {
        &self.pairs[s as usize]
    }

    /// Minimum error of the conclusiveness guess, averaged over `s`.
    pub fn optimal_error(&self) -> f64 {
        // Both outcomes occur with probability ½ under uniform preparations.
        0.5 * (helstrom_error(&self.pairs[0]) + helstrom_error(&self.pairs[1]))
    }

    /// Applies the projective optimal measurement to the retained `c,b`
    /// state. The first effect (ties included) means "inconclusive". The
    /// residual collapses onto the observed effect.
    pub fn guess<R: Rng + ?Sized>(
        &self,
        state: &mut TwoStepRoundState,
        rng: &mut R,
    ) -> ConclusivenessGuess {
        let m = &self.measurements[state.s_outcome as usize];
        let hit = m.measure(&state.residual_cb, rng);
        let effect = match hit {
            Hypothesis::First => &m.effect1,
            Hypothesis::Second => &m.effect2,
        };
        if let Ok(collapsed) = PureState::normalized(effect.mul_vec(state.residual_cb.amplitudes()))
        {
            state.residual_cb = collapsed;
        }
        match hit {
            Hypothesis::First => ConclusivenessGuess::Inconclusive,
            Hypothesis::Second => ConclusivenessGuess::Conclusive,
        }
    }
}

pub fn two_step_guess_conclusive<R: Rng + ?Sized>(
    attacker: &TwoStepAttacker,
    state: &mut TwoStepRoundState,
    rng: &mut R,
) -> ConclusivenessGuess {
    attacker.guess(state, rng)
}

/// Database running the two-step measurement in place of the honest one.
#[derive(Clone, Debug, Default)]
pub struct TwoStepDatabase {
    rounds: BTreeMap<usize, TwoStepRoundState>,
}

impl TwoStepDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn round(&self, position: usize) -> Option<&TwoStepRoundState> {
        self.rounds.get(&position)
    }

    pub fn round_mut(&mut self, position: usize) -> Option<&mut TwoStepRoundState> {
        self.rounds.get_mut(&position)
    }
}

impl YuDatabase for TwoStepDatabase {
    fn announce<R: Rng + ?Sized>(
        &mut self,
        position: usize,
        carrier: &PureState,
        rng: &mut R,
    ) -> Result<Bit, YuError> {
        let (s, state) = two_step_announce_carrier(carrier, rng)?;
        self.rounds.insert(position, state);
        Ok(s)
    }

    fn reply<R: Rng + ?Sized>(
        &mut self,
        position: usize,
        rng: &mut R,
    ) -> Result<PreparedSymbol, YuError> {
        let state = self
            .rounds
            .get_mut(&position)
            .ok_or(YuError::UnknownPosition(position))?;
        two_step_check_reply(state, position, rng)
    }

    /// The basis register is only read for checked positions.
    fn key_bit(&self, position: usize) -> Option<Bit> {
        self.rounds.get(&position).and_then(|r| r.b_outcome)
    }
}

/// Tallies from one stage-1/stage-2 run against the two-step database.
#[derive(Clone, Debug)]
pub struct TwoStepRun {
    pub transcript: ProtocolTranscript,
    pub detected: bool,
    /// Guesses on a copy of every round's state, taken right after the
    /// announcement (conclusive prior ¼). Instrumentation only: the copies
    /// do not feed back into the protocol.
    pub all_round_guesses: usize,
    pub all_round_errors: usize,
    /// Guesses on the real retained states of unchecked positions.
    pub guesses: usize,
    pub guess_errors: usize,
    /// `(conclusive, total)` per announced outcome, over all positions.
    pub conclusive_by_s: [(usize, usize); 2],
}

/// Honest user with uniform preparations against the two-step database:
/// stage 1, an honest check of `check_fraction`, then a conclusiveness
/// guess on every unchecked position.
pub fn run_two_step_attack<R: Rng + ?Sized>(
    attacker: &TwoStepAttacker,
    raw_length: usize,
    check_fraction: f64,
    rng: &mut R,
) -> Result<TwoStepRun, YuError> {
    let preparations = super::protocol::random_symbols(raw_length, rng);
    let mut db = TwoStepDatabase::new();
    let mut transcript = super::protocol::run_stage1_with(&mut db, &preparations, rng)?;
    let mut all_round_errors = 0;
    for r in &transcript.records {
        let mut copy = db
            .round(r.position)
            .ok_or(YuError::UnknownPosition(r.position))?
            .clone();
        let guess = attacker.guess(&mut copy, rng);
        if (guess == ConclusivenessGuess::Conclusive) != r.alice_knowledge.is_conclusive() {
            all_round_errors += 1;
        }
    }
    let checks = super::protocol::honest_select_checks(&transcript, check_fraction, rng);
    let verdict = super::protocol::run_stage2(&mut transcript, checks, &mut db, rng)?;

    let mut conclusive_by_s = [(0, 0); 2];
    for r in &transcript.records {
        let slot = &mut conclusive_by_s[r.announcement as usize];
        slot.0 += r.alice_knowledge.is_conclusive() as usize;
        slot.1 += 1;
    }
    let mut guesses = 0;
    let mut guess_errors = 0;
    let unchecked: Vec<(usize, bool)> = transcript
        .unchecked()
        .map(|r| (r.position, r.alice_knowledge.is_conclusive()))
        .collect();
    for (position, conclusive) in unchecked {
        let state = db
            .round_mut(position)
            .ok_or(YuError::UnknownPosition(position))?;
        let guess = attacker.guess(state, rng);
        guesses += 1;
        if (guess == ConclusivenessGuess::Conclusive) != conclusive {
            guess_errors += 1;
        }
    }
    Ok(TwoStepRun {
        detected: verdict == super::protocol::Verdict::Fail,
        all_round_guesses: transcript.records.len(),
        all_round_errors,
        transcript,
        guesses,
        guess_errors,
        conclusive_by_s,
    })
}

/// Joint law of (announcement, check reply) for one preparation.
pub type JointDistribution = BTreeMap<(Bit, PreparedSymbol), f64>;

fn add(dist: &mut JointDistribution, key: (Bit, PreparedSymbol), p: f64) {
    if p > 0.0 {
        *dist.entry(key).or_insert(0.0) += p;
    }
}

/// Honest database: uniform basis, Born-rule outcome, reply = outcome.
pub fn honest_joint_distribution(prepared: PreparedSymbol) -> JointDistribution {
    let mut dist = JointDistribution::new();
    for basis in BasisLabel::ALL {
        for bit in [0, 1] {
            let outcome = PreparedSymbol::new(basis, bit);
            let p = outcome_probability(&ket(prepared), 0, outcome).expect("single qubit");
            add(&mut dist, (bit, outcome), 0.5 * p);
        }
    }
    dist
}

/// Two-step database, measuring `s` first and `b` second.
pub fn two_step_joint_distribution(prepared: PreparedSymbol) -> Result<JointDistribution, YuError> {
    let full = entangle(&ket(prepared))?;
    let mut dist = JointDistribution::new();
    for s in [0, 1] {
        let s_sym = PreparedSymbol::new(BasisLabel::Z, s);
        let ps = outcome_probability(&full, OUTCOME_REGISTER, s_sym)?;
        if ps <= 0.0 {
            continue;
        }
        let residual = condition_on(&full, OUTCOME_REGISTER, s_sym)?
            .1
            .expect("residual");
        for b in [0, 1] {
            let pb = outcome_probability(&residual, 1, PreparedSymbol::new(BasisLabel::Z, b))?;
            add(&mut dist, (s, reply_symbol(b, s)), ps * pb);
        }
    }
    Ok(dist)
}

/// Two-step database, measuring `b` first and `s` second.
pub fn two_step_joint_distribution_b_first(
    prepared: PreparedSymbol,
) -> Result<JointDistribution, YuError> {
    let full = entangle(&ket(prepared))?;
    let mut dist = JointDistribution::new();
    for b in [0, 1] {
        let b_sym = PreparedSymbol::new(BasisLabel::Z, b);
        let pb = outcome_probability(&full, BASIS_REGISTER, b_sym)?;
        if pb <= 0.0 {
            continue;
        }
        // Remaining register is c ⊗ s, with s at index 1.
        let residual = condition_on(&full, BASIS_REGISTER, b_sym)?
            .1
            .expect("residual");
        for s in [0, 1] {
            let ps = outcome_probability(&residual, 1, PreparedSymbol::new(BasisLabel::Z, s))?;
            add(&mut dist, (s, reply_symbol(b, s)), pb * ps);
        }
    }
    Ok(dist)
}

/// Largest pointwise difference between two joint laws.
pub fn distribution_distance(a: &JointDistribution, b: &JointDistribution) -> f64 {
    let keys: BTreeSet<_> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
}

/// Outcome of the dishonest user's check selection.
#[derive(Clone, Debug, PartialEq)]
pub struct CheatSelection {
    pub positions: BTreeSet<usize>,
    /// |positions| / raw_length
    pub achieved_fraction: f64,
    /// True when fewer inconclusive positions existed than the quota.
    pub shortfall: bool,
}

/// Picks round(f·raw_length) checking positions among the inconclusive
/// records only (in transcript order); all of them if there are fewer.
pub fn cheating_select_checks(transcript: &ProtocolTranscript, fraction: f64) -> CheatSelection {
    let quota = check_quota(fraction, transcript.raw_length());
    let inconclusive = transcript
        .records
        .iter()
        .filter(|r| !r.alice_knowledge.is_conclusive())
        .map(|r| r.position);
    let positions: BTreeSet<usize> = inconclusive.take(quota).collect();
    let raw = transcript.raw_length().max(1) as f64;
    CheatSelection {
        shortfall: positions.len() < quota,
        achieved_fraction: positions.len() as f64 / raw,
        positions,
    }
}

/// Density matrix of the retained `c,b` state for user-conclusive positions,
/// useful for comparing against closed forms.
pub fn conclusive_state(s: Bit) -> Result<DensityMatrix, YuError> {
    Ok(conclusiveness_pair(s)?.second().clone())
}
