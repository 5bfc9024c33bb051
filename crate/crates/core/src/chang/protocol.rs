//! Honest two-way protocol. The database holder (Bob) sends BB84 states;
//! the user (Alice) measures each in Z with probability η, reorders every
//! group of `n` before returning it, and announces bases and outcomes in the
//! new order. Bob audits the announced Z rate (step 3) and the reordering
//! of his X-prepared qubits (step 4). The Z-prepared positions form the raw
//! key.

use super::attacks::{store_fake_extract, store_fake_step2, store_fake_step4_reply};
use super::ChangError;
use crate::postprocess::{
    encrypt_database, fold_key, recovery_fraction, retrieve, Database, FinalKey, KeyBit, Knowledge,
    ShiftConvention,
};
use crate::quantum::{ket, measure_subsystem, BasisLabel, PreparedSymbol};
use crate::stats::{binomial_p_value, Sidedness};
use crate::yu::protocol::{random_symbols, Retrieval, DEFAULT_MAX_RESTARTS};
use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangParams {
    /// Probability that the user measures in Z.
    pub eta: f64,
    pub group_size: usize,
    pub group_count: usize,
    pub database_size: usize,
    pub substring_count: usize,
    pub significance: f64,
    pub step3_side: Sidedness,
    pub max_restarts: usize,
}

impl ChangParams {
    /// Sizes the batch so that the Z-prepared positions cover `k·N` raw bits
    /// with a 10% margin.
    pub fn new(eta: f64, group_size: usize, database_size: usize, substring_count: usize) -> Self {
        let needed = 2.0 * (substring_count * database_size) as f64 * 1.1;
        let group_count = (needed / group_size.max(1) as f64).ceil() as usize;
        Self {
            eta,
            group_size,
            group_count,
            database_size,
            substring_count,
            significance: DEFAULT_SIGNIFICANCE,
            step3_side: Sidedness::TwoSided,
            max_restarts: DEFAULT_MAX_RESTARTS,
        }
    }

    pub fn validate(&self) -> Result<(), ChangError> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(ChangError::Config(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if self.group_size < 4 {
            return Err(ChangError::Config(format!(
                "group size must be at least 4, got {}",
                self.group_size
            )));
        }
        if self.database_size == 0 || self.substring_count == 0 {
            return Err(ChangError::Config(
                "database size and substring count must be positive".into(),
            ));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(ChangError::Config(format!(
                "significance must lie in (0, 1), got {}",
                self.significance
            )));
        }
        Ok(())
    }

    pub fn qubit_count(&self) -> usize {
        self.group_count * self.group_size
    }
}

/// The user's private record of one honest group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTranscript {
    pub sent: Vec<PreparedSymbol>,
    pub alice_bases: Vec<BasisLabel>,
    /// Post-measurement state of each original, in original order.
    pub alice_outcomes: Vec<PreparedSymbol>,
    /// `permutation[original] = slot`.
    pub permutation: Vec<usize>,
    /// Basis and outcome per slot; `announced[permutation[i]] = alice_outcomes[i]`.
    pub announced: Vec<PreparedSymbol>,
}

impl GroupTranscript {
    /// Slots of the X-prepared originals, in original order.
    pub fn honest_disclosure(&self) -> Vec<usize> {
        x_originals(&self.sent)
            .into_iter()
            .map(|i| self.permutation[i])
            .collect()
    }
}

/// Everything exchanged for one group, whichever strategy the user follows.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupExchange {
    pub sent: Vec<PreparedSymbol>,
    /// Qubits handed back to Bob, slot order.
    pub returned: Vec<PreparedSymbol>,
    /// Announced basis/outcome, slot order.
    pub announced: Vec<PreparedSymbol>,
    /// Slot disclosed for each X-prepared original, original order.
    pub disclosed: Vec<usize>,
    /// What the user knows of each original's bit, original order.
    pub knowledge: Vec<Knowledge>,
    /// Step-4 replies that had to leave the preferred pool.
    pub fallbacks: usize,
    /// Step-4 replies that could not be made consistent.
    pub infeasible: usize,
}

pub fn x_originals(sent: &[PreparedSymbol]) -> Vec<usize> {
    sent.iter()
        .enumerate()
        .filter(|(_, s)| s.basis() == BasisLabel::X)
        .map(|(i, _)| i)
        .collect()
}

pub fn chang_prepare<R: Rng + ?Sized>(params: &ChangParams, rng: &mut R) -> Vec<PreparedSymbol> {
    random_symbols(params.qubit_count(), rng)
}

pub fn alice_measure_group<R: Rng + ?Sized>(
    sent: &[PreparedSymbol],
    eta: f64,
    rng: &mut R,
) -> Result<GroupTranscript, ChangError> {
    let mut alice_bases = Vec::with_capacity(sent.len());
    let mut alice_outcomes = Vec::with_capacity(sent.len());
    for &s in sent {
        let basis = if rng.random::<f64>() < eta {
            BasisLabel::Z
        } else {
            BasisLabel::X
        };
        let (bit, _) = measure_subsystem(&ket(s), 0, basis, rng)?;
        alice_bases.push(basis);
        alice_outcomes.push(PreparedSymbol::new(basis, bit));
    }
    let mut permutation: Vec<usize> = (0..sent.len()).collect();
    permutation.shuffle(rng);
    let mut announced = alice_outcomes.clone();
    for (i, &slot) in permutation.iter().enumerate() {
        announced[slot] = alice_outcomes[i];
    }
    Ok(GroupTranscript {
        sent: sent.to_vec(),
        alice_bases,
        alice_outcomes,
        permutation,
        announced,
    })
}

impl From<GroupTranscript> for GroupExchange {
    fn from(t: GroupTranscript) -> Self {
        let knowledge = t
            .alice_outcomes
            .iter()
            .map(|o| match o.basis() {
                BasisLabel::Z => Knowledge::Conclusive(o.bit()),
                BasisLabel::X => Knowledge::Inconclusive,
            })
            .collect();
        Self {
            disclosed: t.honest_disclosure(),
            // Measured qubits are eigenstates of the announced observables.
            returned: t.announced.clone(),
            announced: t.announced,
            sent: t.sent,
            knowledge,
            fallbacks: 0,
            infeasible: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step3Outcome {
    /// Returned qubits whose re-measurement contradicted the announcement.
    pub mismatches: usize,
    pub z_announced: usize,
    pub total: usize,
    pub p_value: f64,
    pub statistical_pass: bool,
}

impl Step3Outcome {
    pub fn deterministic_pass(&self) -> bool {
        self.mismatches == 0
    }

    pub fn pass(&self) -> bool {
        self.deterministic_pass() && self.statistical_pass
    }
}

/// Re-measures every returned qubit in its announced basis and tests the
/// announced Z count against η.
pub fn bob_step3_check<R: Rng + ?Sized>(
    groups: &[GroupExchange],
    eta: f64,
    significance: f64,
    side: Sidedness,
    rng: &mut R,
) -> Result<Step3Outcome, ChangError> {
    let mut mismatches = 0;
    let mut z_announced = 0;
    let mut total = 0;
    for g in groups {
        if g.returned.len() != g.announced.len() {
            return Err(ChangError::LengthMismatch {
                left: g.returned.len(),
                right: g.announced.len(),
            });
        }
        for (&returned, &announced) in g.returned.iter().zip(&g.announced) {
            let (bit, _) = measure_subsystem(&ket(returned), 0, announced.basis(), rng)?;
            if bit != announced.bit() {
                mismatches += 1;
            }
            if announced.basis() == BasisLabel::Z {
                z_announced += 1;
            }
            total += 1;
        }
    }
    let p_value = binomial_p_value(z_announced as u64, total as u64, eta, side);
    Ok(Step3Outcome {
        mismatches,
        z_announced,
        total,
        p_value,
        statistical_pass: p_value >= significance,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Step4Outcome {
    /// Groups whose disclosure had the wrong size, a repeated or an
    /// out-of-range slot.
    pub malformed_groups: usize,
    /// Disclosed slots announced in X with the wrong outcome.
    pub inconsistent: usize,
    /// Groups failing a deterministic sub-check.
    pub groups_failing: usize,
    pub x_announced: usize,
    pub disclosed: usize,
}

impl Step4Outcome {
    pub fn deterministic_pass(&self) -> bool {
        self.groups_failing == 0
    }

    /// Two-sided p-value of the X-announced count against rate 1−η, pooled
    /// over every group absorbed so far.
    pub fn p_value(&self, eta: f64) -> f64 {
        binomial_p_value(
            self.x_announced as u64,
            self.disclosed as u64,
            1.0 - eta,
            Sidedness::TwoSided,
        )
    }

    fn absorb(&mut self, other: &Step4Outcome) {
        self.malformed_groups += other.malformed_groups;
        self.inconsistent += other.inconsistent;
        self.groups_failing += other.groups_failing;
        self.x_announced += other.x_announced;
        self.disclosed += other.disclosed;
    }
}

/// Deterministic step-4 audit of one group: the disclosure must name one
/// distinct slot per X original, and every disclosed slot announced in X
/// must carry the original state. Also counts X announcements for the
/// pooled rate test.
pub fn bob_step4_check(
    sent: &[PreparedSymbol],
    announced: &[PreparedSymbol],
    disclosed: &[usize],
) -> Step4Outcome {
    let originals = x_originals(sent);
    let mut out = Step4Outcome::default();
    let mut seen = vec![false; announced.len()];
    let mut malformed = disclosed.len() != originals.len();
    for &slot in disclosed {
        if slot >= announced.len() || seen[slot] {
            malformed = true;
        } else {
            seen[slot] = true;
        }
    }
    if malformed {
        out.malformed_groups = 1;
        out.groups_failing = 1;
        return out;
    }
    for (&orig, &slot) in originals.iter().zip(disclosed) {
        let a = announced[slot];
        if a.basis() == BasisLabel::X {
            out.x_announced += 1;
            if a != sent[orig] {
                out.inconsistent += 1;
            }
        }
        out.disclosed += 1;
    }
    if out.inconsistent > 0 {
        out.groups_failing = 1;
    }
    out
}

pub fn step4_all(groups: &[GroupExchange]) -> Step4Outcome {
    let mut total = Step4Outcome::default();
    for g in groups {
        total.absorb(&bob_step4_check(&g.sent, &g.announced, &g.disclosed));
    }
    total
}

/// Z-prepared positions in original order: Bob's bit is the prepared bit,
/// the user's knowledge is whatever her strategy left her with.
pub fn build_raw_key(groups: &[GroupExchange]) -> Vec<KeyBit> {
    groups
        .iter()
        .flat_map(|g| {
            g.sent
                .iter()
                .zip(&g.knowledge)
                .filter(|(s, _)| s.basis() == BasisLabel::Z)
                .map(|(s, &k)| KeyBit {
                    bob_bit: s.bit(),
                    alice: k,
                })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserStrategy {
    Honest,
    /// Keep the received qubits, return a fake sequence, measure later.
    StoreFake,
}

/// Runs one group under the given strategy.
pub fn run_group<R: Rng + ?Sized>(
    sent: &[PreparedSymbol],
    eta: f64,
    strategy: UserStrategy,
    rng: &mut R,
) -> Result<GroupExchange, ChangError> {
    match strategy {
        UserStrategy::Honest => Ok(alice_measure_group(sent, eta, rng)?.into()),
        UserStrategy::StoreFake => {
            let (stored, mut plan, announced) = store_fake_step2(sent, eta, rng);
            let x_positions = x_originals(sent);
            let reply = store_fake_step4_reply(&stored, &mut plan, &x_positions, eta, rng)?;
            let raw = store_fake_extract(&stored, &x_positions, rng)?;
            let mut knowledge = vec![Knowledge::Inconclusive; sent.len()];
            for (i, bit) in raw {
                knowledge[i] = Knowledge::Conclusive(bit);
            }
            Ok(GroupExchange {
                sent: sent.to_vec(),
                returned: plan.symbols.clone(),
                announced,
                disclosed: reply.disclosed,
                knowledge,
                fallbacks: reply.fallbacks,
                infeasible: reply.infeasible,
            })
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChangSessionOutcome {
    pub groups: Vec<GroupExchange>,
    pub step3: Step3Outcome,
    pub step4: Step4Outcome,
    /// Pooled X-announcement rate test over all groups.
    pub step4_p_value: f64,
    pub step4_statistical_pass: bool,
    pub restarts: usize,
    pub raw_key: Vec<KeyBit>,
    pub final_key: Option<FinalKey>,
    pub retrieval: Option<Retrieval>,
    pub recovery_fraction: f64,
}

impl ChangSessionOutcome {
    pub fn checks_passed(&self) -> bool {
        self.step3.pass() && self.step4.deterministic_pass() && self.step4_statistical_pass
    }

    pub fn fallbacks(&self) -> usize {
        self.groups.iter().map(|g| g.fallbacks).sum()
    }

    pub fn infeasible(&self) -> usize {
        self.groups.iter().map(|g| g.infeasible).sum()
    }

    /// Raw positions where the user's value is known and equals Bob's.
    pub fn raw_recovery_fraction(&self) -> f64 {
        if self.raw_key.is_empty() {
            return 0.0;
        }
        let hit = self
            .raw_key
            .iter()
            .filter(|kb| kb.alice.value() == Some(kb.bob_bit))
            .count();
        hit as f64 / self.raw_key.len() as f64
    }
}

/// Runs steps 1–7. A failed check aborts (no key, recovery 0). A raw key
/// shorter than `k·N`, or a final key with no known bit, restarts from step
/// 1, at most `max_restarts` times. The raw key is truncated to `k·N`.
pub fn run_session<R: Rng + ?Sized>(
    params: &ChangParams,
    strategy: UserStrategy,
    database: &Database,
    rng: &mut R,
) -> Result<ChangSessionOutcome, ChangError> {
    params.validate()?;
    if database.len() != params.database_size {
        return Err(ChangError::Config(format!(
            "database has {} items, parameters expect {}",
            database.len(),
            params.database_size
        )));
    }
    let needed = params.substring_count * params.database_size;
    for restarts in 0..=params.max_restarts {
        let sent = chang_prepare(params, rng);
        let groups = sent
            .chunks(params.group_size)
            .map(|g| run_group(g, params.eta, strategy, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let step3 = bob_step3_check(
            &groups,
            params.eta,
            params.significance,
            params.step3_side,
            rng,
        )?;
        let step4 = step4_all(&groups);
        let step4_p_value = step4.p_value(params.eta);
        let raw_key = build_raw_key(&groups);
        let mut outcome = ChangSessionOutcome {
            groups,
            step3,
            step4,
            step4_p_value,
            step4_statistical_pass: step4_p_value >= params.significance,
            restarts,
            raw_key,
            final_key: None,
            retrieval: None,
            recovery_fraction: 0.0,
        };
        if !outcome.checks_passed() {
            return Ok(outcome);
        }
        if outcome.raw_key.len() < needed {
            continue;
        }
        let key = fold_key(&outcome.raw_key[..needed], params.substring_count)?;
        if key.known_count() == 0 {
            continue;
        }

        let n = params.database_size;
        let desired = rng.random_range(0..n);
        let known = *key
            .alice_known
            .keys()
            .choose(rng)
            .expect("at least one known bit");
        let shift = ShiftConvention::Chang.announce(known, desired);
        let ciphertext = encrypt_database(database, &key.bits, shift, ShiftConvention::Chang)?;
        let retrieved = retrieve(&ciphertext, &key.alice_known, known, desired)?;
        outcome.recovery_fraction =
            recovery_fraction(&ciphertext, database, &key, shift, ShiftConvention::Chang);
        outcome.retrieval = Some(Retrieval {
            desired,
            known,
            shift,
            retrieved,
            correct: retrieved == database.bits()[desired],
        });
        outcome.final_key = Some(key);
        return Ok(outcome);
    }
    Err(ChangError::RestartsExhausted(params.max_restarts))
}
