//! Honest parties of the one-way protocol with database honesty checking.
//!
//! The user sends one of the four BB84 states per position; the database
//! measures it in Z (key bit 0) or X (key bit 1) and announces the outcome
//! bit. An announcement that the user's own state could never produce in its
//! own basis reveals the database's basis, i.e. the key bit.

use super::YuError;
use crate::postprocess::{
    encrypt_database, fold_to_length, recovery_fraction, retrieve, Database, FinalKey, KeyBit,
    Knowledge, ShiftConvention,
};
use crate::quantum::{ket, measure_subsystem, BasisLabel, Bit, PreparedSymbol, PureState};
use rand::seq::{index, IteratorRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_MAX_RESTARTS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YuParams {
    /// kN qubits exchanged in stage 1.
    pub raw_length: usize,
    pub substring_count: usize,
    pub database_size: usize,
    /// Checked positions as a fraction of `raw_length`.
    pub check_fraction: f64,
    pub max_restarts: usize,
}

impl YuParams {
    pub fn new(substring_count: usize, database_size: usize, check_fraction: f64) -> Self {
        Self {
            raw_length: substring_count * database_size,
            substring_count,
            database_size,
            check_fraction,
            max_restarts: DEFAULT_MAX_RESTARTS,
        }
    }

    pub fn validate(&self) -> Result<(), YuError> {
        if self.substring_count == 0 || self.database_size == 0 {
            return Err(YuError::Config(
                "substring count and database size must be positive".into(),
            ));
        }
        if self.raw_length != self.substring_count * self.database_size {
            return Err(YuError::Config(format!(
                "raw length {} must equal k*N = {}",
                self.raw_length,
                self.substring_count * self.database_size
            )));
        }
        if !(0.0..1.0).contains(&self.check_fraction) {
            return Err(YuError::Config(format!(
                "check fraction {} outside [0, 1)",
                self.check_fraction
            )));
        }
        Ok(())
    }

    /// round(f · raw_length)
    pub fn check_quota(&self) -> usize {
        check_quota(self.check_fraction, self.raw_length)
    }
}

pub(crate) fn check_quota(fraction: f64, raw_length: usize) -> usize {
    (fraction * raw_length as f64).round() as usize
}

/// One stage-1 position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawKeyRecord {
    pub position: usize,
    /// `None` while the database has not committed to a value (only possible
    /// for a dishonest database that defers its basis measurement).
    pub bob_bit: Option<Bit>,
    pub announcement: Bit,
    pub alice_knowledge: Knowledge,
    pub alice_prepared: PreparedSymbol,
}

impl RawKeyRecord {
    pub fn key_bit(&self) -> Result<KeyBit, YuError> {
        Ok(KeyBit {
            bob_bit: self.bob_bit.ok_or(YuError::Uncommitted(self.position))?,
            alice: self.alice_knowledge,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pending,
    Pass,
    Fail,
    Aborted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolTranscript {
    pub records: Vec<RawKeyRecord>,
    pub checking_positions: BTreeSet<usize>,
    pub check_replies: BTreeMap<usize, PreparedSymbol>,
    pub verdict: Verdict,
}

impl ProtocolTranscript {
    pub fn new(records: Vec<RawKeyRecord>) -> Self {
        Self {
            records,
            checking_positions: BTreeSet::new(),
            check_replies: BTreeMap::new(),
            verdict: Verdict::Pending,
        }
    }

    pub fn raw_length(&self) -> usize {
        self.records.len()
    }

    pub fn conclusive_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.alice_knowledge.is_conclusive())
            .count()
    }

    /// Records that survive the honesty check, in order.
    pub fn unchecked(&self) -> impl Iterator<Item = &RawKeyRecord> {
        self.records
            .iter()
            .filter(|r| !self.checking_positions.contains(&r.position))
    }

    /// Conclusive fraction among the records that survive the check.
    pub fn post_drop_conclusive_fraction(&self) -> f64 {
        let (total, conclusive) = self.unchecked().fold((0usize, 0usize), |(t, c), r| {
            (t + 1, c + r.alice_knowledge.is_conclusive() as usize)
        });
        if total == 0 {
            0.0
        } else {
            conclusive as f64 / total as f64
        }
    }
}

/// The user's deduction from her own state and the announced bit.
///
/// In its own basis her state always announces `prepared.bit()`; any other
/// announcement proves the database measured in the opposite basis.
pub fn alice_infer(prepared: PreparedSymbol, announcement: Bit) -> Knowledge {
    if announcement != prepared.bit() {
        Knowledge::Conclusive(prepared.basis().other().index())
    } else {
        Knowledge::Inconclusive
    }
}

/// The unique outcome state consistent with a conclusive deduction.
pub fn deduced_outcome(prepared: PreparedSymbol, announcement: Bit) -> Option<PreparedSymbol> {
    match alice_infer(prepared, announcement) {
        Knowledge::Conclusive(_) => {
            Some(PreparedSymbol::new(prepared.basis().other(), announcement))
        }
        Knowledge::Inconclusive => None,
    }
}

/// Honest database measurement: basis Z for key bit 0, X for key bit 1.
pub fn honest_measure<R: Rng + ?Sized>(
    bob_bit: Bit,
    carrier: &PureState,
    rng: &mut R,
) -> Result<PreparedSymbol, YuError> {
    let basis = BasisLabel::from_index(bob_bit);
    let (outcome, _) = measure_subsystem(carrier, 0, basis, rng)?;
    Ok(PreparedSymbol::new(basis, outcome))
}

/// One honest oblivious-key round.
pub fn stage1_round<R: Rng + ?Sized>(
    bob_bit: Bit,
    prepared: PreparedSymbol,
    rng: &mut R,
) -> Result<(Bit, Knowledge), YuError> {
    let outcome = honest_measure(bob_bit, &ket(prepared), rng)?;
    let announcement = outcome.bit();
    Ok((announcement, alice_infer(prepared, announcement)))
}

/// Behaviour of the database holder in stages 1 and 2.
pub trait YuDatabase {
    /// Receives the carrier for `position` and returns the announced bit.
    fn announce<R: Rng + ?Sized>(
        &mut self,
        position: usize,
        carrier: &PureState,
        rng: &mut R,
    ) -> Result<Bit, YuError>;

    /// Claimed measurement outcome for a checked position.
    fn reply<R: Rng + ?Sized>(
        &mut self,
        position: usize,
        rng: &mut R,
    ) -> Result<PreparedSymbol, YuError>;

    /// Committed key bit, if any.
    fn key_bit(&self, position: usize) -> Option<Bit>;
}

/// Measures honestly and answers checks with the true outcomes.
#[derive(Clone, Debug)]
pub struct HonestDatabase {
    bob_bits: Vec<Bit>,
    outcomes: Vec<Option<PreparedSymbol>>,
}

impl HonestDatabase {
    pub fn new(bob_bits: Vec<Bit>) -> Self {
        let n = bob_bits.len();
        Self {
            bob_bits,
            outcomes: vec![None; n],
        }
    }
}

impl YuDatabase for HonestDatabase {
    fn announce<R: Rng + ?Sized>(
        &mut self,
        position: usize,
        carrier: &PureState,
        rng: &mut R,
    ) -> Result<Bit, YuError> {
        let bit = *self
            .bob_bits
            .get(position)
            .ok_or(YuError::UnknownPosition(position))?;
        let outcome = honest_measure(bit, carrier, rng)?;
        self.outcomes[position] = Some(outcome);
        Ok(outcome.bit())
    }

    fn reply<R: Rng + ?Sized>(
        &mut self,
        position: usize,
        _rng: &mut R,
    ) -> Result<PreparedSymbol, YuError> {
        self.outcomes
            .get(position)
            .copied()
            .flatten()
            .ok_or(YuError::UnknownPosition(position))
    }

    fn key_bit(&self, position: usize) -> Option<Bit> {
        self.bob_bits.get(position).copied()
    }
}

pub fn random_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Bit> {
    (0..n).map(|_| rng.random_range(0..=1)).collect()
}

pub fn random_symbols<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<PreparedSymbol> {
    (0..n)
        .map(|_| PreparedSymbol::ALL[rng.random_range(0..4)])
        .collect()
}

/// Stage 1 against an arbitrary database with given user preparations.
pub fn run_stage1_with<D: YuDatabase, R: Rng + ?Sized>(
    db: &mut D,
    preparations: &[PreparedSymbol],
    rng: &mut R,
) -> Result<ProtocolTranscript, YuError> {
    let mut records = Vec::with_capacity(preparations.len());
    for (position, &prepared) in preparations.iter().enumerate() {
        let announcement = db.announce(position, &ket(prepared), rng)?;
        records.push(RawKeyRecord {
            position,
            bob_bit: db.key_bit(position),
            announcement,
            alice_knowledge: alice_infer(prepared, announcement),
            alice_prepared: prepared,
        });
    }
    Ok(ProtocolTranscript::new(records))
}

/// Honest stage 1 with uniformly random user preparations.
pub fn run_stage1<R: Rng + ?Sized>(
    params: &YuParams,
    bob_bits: &[Bit],
    rng: &mut R,
) -> Result<ProtocolTranscript, YuError> {
    if bob_bits.len() != params.raw_length {
        return Err(YuError::Config(format!(
            "{} key bits supplied for raw length {}",
            bob_bits.len(),
            params.raw_length
        )));
    }
    let preparations = random_symbols(params.raw_length, rng);
    run_stage1_with(
        &mut HonestDatabase::new(bob_bits.to_vec()),
        &preparations,
        rng,
    )
}

/// Uniform subset of the conclusive positions of size round(f·raw_length),
/// capped at the number available.
pub fn honest_select_checks<R: Rng + ?Sized>(
    transcript: &ProtocolTranscript,
    fraction: f64,
    rng: &mut R,
) -> BTreeSet<usize> {
    let eligible: Vec<usize> = transcript
        .records
        .iter()
        .filter(|r| r.alice_knowledge.is_conclusive())
        .map(|r| r.position)
        .collect();
    let quota = check_quota(fraction, transcript.raw_length()).min(eligible.len());
    index::sample(rng, eligible.len(), quota)
        .into_iter()
        .map(|i| eligible[i])
        .collect()
}

/// Stage-2 verdict: every reply at a conclusive checked position must be the
/// outcome the user deduced; replies at inconclusive positions carry no
/// information she can verify and are accepted.
pub fn verify_check_replies(
    transcript: &ProtocolTranscript,
    replies: &BTreeMap<usize, PreparedSymbol>,
) -> Verdict {
    for &position in &transcript.checking_positions {
        let Some(&reply) = replies.get(&position) else {
            return Verdict::Fail;
        };
        let Some(record) = transcript.records.get(position) else {
            return Verdict::Fail;
        };
        if let Some(expected) = deduced_outcome(record.alice_prepared, record.announcement) {
            if reply != expected {
                return Verdict::Fail;
            }
        }
    }
    Verdict::Pass
}

/// Collects replies for the selected positions and records the verdict.
pub fn run_stage2<D: YuDatabase, R: Rng + ?Sized>(
    transcript: &mut ProtocolTranscript,
    checks: BTreeSet<usize>,
    db: &mut D,
    rng: &mut R,
) -> Result<Verdict, YuError> {
    let mut replies = BTreeMap::new();
    for &position in &checks {
        replies.insert(position, db.reply(position, rng)?);
    }
    transcript.checking_positions = checks;
    let verdict = verify_check_replies(transcript, &replies);
    transcript.check_replies = replies;
    transcript.verdict = verdict;
    Ok(verdict)
}

/// How the user picks checking positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckPolicy {
    Honest,
    /// Sacrifice inconclusive positions to enrich the surviving key.
    CheatInconclusive,
}

#[derive(Clone, Debug)]
pub struct Retrieval {
    pub desired: usize,
    pub known: usize,
    pub shift: i64,
    pub retrieved: Bit,
    pub correct: bool,
}

/// Result of one run of all four stages (after any restarts).
#[derive(Clone, Debug)]
pub struct YuSessionOutcome {
    pub transcript: ProtocolTranscript,
    pub restarts: usize,
    pub achieved_check_fraction: f64,
    pub final_key: Option<FinalKey>,
    pub retrieval: Option<Retrieval>,
    pub recovery_fraction: f64,
}

/// Runs stages 1–4 with an honest database. A failed check aborts; a final
/// key with no known bit restarts from stage 1, at most `max_restarts` times.
///
/// After the check, the surviving `k'N` raw bits are folded with
/// `k' = floor(len / N)` substrings so the final key always matches the
/// database length.
pub fn run_session<R: Rng + ?Sized>(
    params: &YuParams,
    policy: CheckPolicy,
    database: &Database,
    rng: &mut R,
) -> Result<YuSessionOutcome, YuError> {
    params.validate()?;
    if database.len() != params.database_size {
        return Err(YuError::Config(format!(
            "database has {} items, parameters expect {}",
            database.len(),
            params.database_size
        )));
    }
    for restarts in 0..=params.max_restarts {
        let bob_bits = random_bits(params.raw_length, rng);
        let mut db = HonestDatabase::new(bob_bits);
        let preparations = random_symbols(params.raw_length, rng);
        let mut transcript = run_stage1_with(&mut db, &preparations, rng)?;

        let checks = match policy {
            CheckPolicy::Honest => honest_select_checks(&transcript, params.check_fraction, rng),
            CheckPolicy::CheatInconclusive => {
                super::attacks::cheating_select_checks(&transcript, params.check_fraction).positions
            }
        };
        let achieved = checks.len() as f64 / params.raw_length as f64;
        if run_stage2(&mut transcript, checks, &mut db, rng)? == Verdict::Fail {
            return Ok(YuSessionOutcome {
                transcript,
                restarts,
                achieved_check_fraction: achieved,
                final_key: None,
                retrieval: None,
                recovery_fraction: 0.0,
            });
        }

        let remaining = transcript
            .unchecked()
            .map(RawKeyRecord::key_bit)
            .collect::<Result<Vec<_>, _>>()?;
        let key = fold_to_length(&remaining, params.database_size)?;
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
        let shift = ShiftConvention::Yu.announce(known, desired);
        let ciphertext = encrypt_database(database, &key.bits, shift, ShiftConvention::Yu)?;
        let retrieved = retrieve(&ciphertext, &key.alice_known, known, desired)?;
        let recovered = recovery_fraction(&ciphertext, database, &key, shift, ShiftConvention::Yu);
        transcript.verdict = Verdict::Pass;
        return Ok(YuSessionOutcome {
            transcript,
            restarts,
            achieved_check_fraction: achieved,
            final_key: Some(key),
            retrieval: Some(Retrieval {
                desired,
                known,
                shift,
                retrieved,
                correct: retrieved == database.bits()[desired],
            }),
            recovery_fraction: recovered,
        });
    }
    Err(YuError::RestartsExhausted(params.max_restarts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn z0_with_x_measurement_announcing_one_is_conclusive() {
        assert_eq!(alice_infer(PreparedSymbol::Z0, 1), Knowledge::Conclusive(1));
        assert_eq!(alice_infer(PreparedSymbol::Z0, 0), Knowledge::Inconclusive);
        assert_eq!(
            alice_infer(PreparedSymbol::XMinus, 0),
            Knowledge::Conclusive(0)
        );
        assert_eq!(
            deduced_outcome(PreparedSymbol::Z0, 1),
            Some(PreparedSymbol::XMinus)
        );
    }

    #[test]
    fn matched_basis_round_is_deterministic() {
        let mut rng = seeded(1);
        for _ in 0..100 {
            assert_eq!(
                stage1_round(0, PreparedSymbol::Z0, &mut rng).unwrap(),
                (0, Knowledge::Inconclusive)
            );
        }
    }

    #[test]
    fn empty_and_matched_stage1() {
        let mut rng = seeded(2);
        let params = YuParams {
            raw_length: 0,
            substring_count: 1,
            database_size: 0,
            check_fraction: 0.0,
            max_restarts: 0,
        };
        assert!(run_stage1(&params, &[], &mut rng)
            .unwrap()
            .records
            .is_empty());

        let mut db = HonestDatabase::new(vec![0; 8]);
        let t = run_stage1_with(&mut db, &[PreparedSymbol::Z0; 8], &mut rng).unwrap();
        assert!(t
            .records
            .iter()
            .all(|r| r.announcement == 0 && r.alice_knowledge == Knowledge::Inconclusive));
    }

    #[test]
    fn stage1_rejects_wrong_key_length() {
        let mut rng = seeded(3);
        let params = YuParams::new(2, 2, 0.0);
        assert!(matches!(
            run_stage1(&params, &[0, 1], &mut rng),
            Err(YuError::Config(_))
        ));
    }

    fn transcript_with(knowledge: &[Knowledge]) -> ProtocolTranscript {
        ProtocolTranscript::new(
            knowledge
                .iter()
                .enumerate()
                .map(|(position, &k)| RawKeyRecord {
                    position,
                    bob_bit: Some(0),
                    announcement: 0,
                    alice_knowledge: k,
                    alice_prepared: PreparedSymbol::Z0,
                })
                .collect(),
        )
    }

    #[test]
    fn honest_selection_cardinality() {
        let mut rng = seeded(4);
        let t = transcript_with(&[Knowledge::Conclusive(1); 10]);
        assert!(honest_select_checks(&t, 0.0, &mut rng).is_empty());
        assert_eq!(honest_select_checks(&t, 0.3, &mut rng).len(), 3);
        let t = transcript_with(&[Knowledge::Inconclusive; 10]);
        assert!(honest_select_checks(&t, 0.5, &mut rng).is_empty());

        let mut mixed = vec![Knowledge::Inconclusive; 10_000];
        for k in mixed.iter_mut().step_by(4) {
            *k = Knowledge::Conclusive(0);
        }
        let t = transcript_with(&mixed);
        let picked = honest_select_checks(&t, 0.1, &mut rng);
        assert_eq!(picked.len(), 1000);
        assert!(picked.iter().all(|&p| p % 4 == 0));
        // Capped by the 2500 eligible positions.
        assert_eq!(honest_select_checks(&t, 0.5, &mut rng).len(), 2500);
    }

    fn single_check(prepared: PreparedSymbol, announcement: Bit, reply: PreparedSymbol) -> Verdict {
        let mut t = ProtocolTranscript::new(vec![RawKeyRecord {
            position: 0,
            bob_bit: Some(1),
            announcement,
            alice_knowledge: alice_infer(prepared, announcement),
            alice_prepared: prepared,
        }]);
        t.checking_positions.insert(0);
        verify_check_replies(&t, &BTreeMap::from([(0, reply)]))
    }

    #[test]
    fn reply_verification() {
        assert_eq!(
            single_check(PreparedSymbol::Z0, 1, PreparedSymbol::XMinus),
            Verdict::Pass
        );
        assert_eq!(
            single_check(PreparedSymbol::Z0, 1, PreparedSymbol::Z1),
            Verdict::Fail
        );
        assert_eq!(
            single_check(PreparedSymbol::Z0, 1, PreparedSymbol::XPlus),
            Verdict::Fail
        );
        // Inconclusive position: accepted whatever the reply.
        assert_eq!(
            single_check(PreparedSymbol::Z0, 0, PreparedSymbol::XPlus),
            Verdict::Pass
        );
    }

    #[test]
    fn missing_reply_fails() {
        let mut t = transcript_with(&[Knowledge::Conclusive(1); 3]);
        t.checking_positions.insert(1);
        assert_eq!(verify_check_replies(&t, &BTreeMap::new()), Verdict::Fail);
    }

    #[test]
    fn params_validation() {
        assert!(YuParams::new(4, 10, 0.5).validate().is_ok());
        assert!(YuParams::new(4, 10, 1.0).validate().is_err());
        assert!(YuParams::new(0, 10, 0.0).validate().is_err());
        let mut p = YuParams::new(4, 10, 0.0);
        p.raw_length = 39;
        assert!(p.validate().is_err());
        assert_eq!(YuParams::new(4, 1000, 0.1).check_quota(), 400);
    }

    #[test]
    fn restart_cap_is_reported() {
        // One raw bit per item and k = 1: with a tiny database Alice often
        // knows nothing, and zero restarts allowed means some seeds exhaust.
        let mut params = YuParams::new(1, 1, 0.0);
        params.max_restarts = 0;
        let db = Database::new(vec![1]).unwrap();
        let exhausted = (0..64)
            .filter(|&s| {
                matches!(
                    run_session(&params, CheckPolicy::Honest, &db, &mut seeded(s)),
                    Err(YuError::RestartsExhausted(0))
                )
            })
            .count();
        assert!(exhausted > 0 && exhausted < 64);
    }
}
