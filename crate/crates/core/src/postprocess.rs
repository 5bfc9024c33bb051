//! Classical postprocessing shared by both protocols: substring XOR folding
//! of the raw oblivious key, shift-aligned database encryption and the
//! user's single-item retrieval.

use crate::quantum::Bit;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error("substring count must be at least 1")]
    ZeroSubstrings,
    #[error("raw key of length {raw} is shorter than the substring count {k}")]
    RawKeyTooShort { raw: usize, k: usize },
    #[error("length mismatch: database {database} vs key {key}")]
    LengthMismatch { database: usize, key: usize },
    #[error("final-key position {0} is not known to the user")]
    UnknownPosition(usize),
    #[error("position {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("raw position {0} has no committed database bit")]
    Uncommitted(usize),
    #[error("database must hold at least one item")]
    EmptyDatabase,
    #[error("malformed database file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What the user learned about one raw-key position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Knowledge {
    Conclusive(Bit),
    Inconclusive,
}

impl Knowledge {
    pub fn is_conclusive(self) -> bool {
        matches!(self, Knowledge::Conclusive(_))
    }

    pub fn value(self) -> Option<Bit> {
        match self {
            Knowledge::Conclusive(v) => Some(v),
            Knowledge::Inconclusive => None,
        }
    }
}

/// One raw-key position as seen by both parties.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyBit {
    pub bob_bit: Bit,
    pub alice: Knowledge,
}

/// The database holder's final key together with the user's partial view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalKey {
    pub bits: Vec<Bit>,
    pub alice_known: BTreeMap<usize, Bit>,
}

impl FinalKey {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn known_count(&self) -> usize {
        self.alice_known.len()
    }
}

/// Splits the raw key into `k` consecutive substrings of length
/// `N = floor(len / k)` (dropping the tail) and XORs them together.
/// The user knows final bit `j` iff every contributor at offset `j` was
/// conclusive.
pub fn fold_key(raw: &[KeyBit], k: usize) -> Result<FinalKey, PostprocessError> {
    if k == 0 {
        return Err(PostprocessError::ZeroSubstrings);
    }
    if raw.len() < k {
        return Err(PostprocessError::RawKeyTooShort { raw: raw.len(), k });
    }
    let n = raw.len() / k;
    let mut bits = vec![0; n];
    let mut alice_known = BTreeMap::new();
    for (j, bit) in bits.iter_mut().enumerate() {
        let mut known: Option<Bit> = Some(0);
        for m in 0..k {
            let kb = raw[m * n + j];
            *bit ^= kb.bob_bit;
            known = match (known, kb.alice) {
                (Some(acc), Knowledge::Conclusive(v)) => Some(acc ^ v),
                _ => None,
            };
        }
        if let Some(v) = known {
            alice_known.insert(j, v);
        }
    }
    Ok(FinalKey { bits, alice_known })
}

/// Folds into exactly `n` final bits using as many whole substrings as the
/// raw key allows (`k' = floor(len / n)`).
pub fn fold_to_length(raw: &[KeyBit], n: usize) -> Result<FinalKey, PostprocessError> {
    if n == 0 {
        return Err(PostprocessError::EmptyDatabase);
    }
    let k = raw.len() / n;
    if k == 0 {
        return Err(PostprocessError::RawKeyTooShort {
            raw: raw.len(),
            k: 1,
        });
    }
    fold_key(&raw[..k * n], k)
}

/// Sign convention of the announced shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftConvention {
    /// User announces `s = j − i`; item `t` is encrypted with `K[t + s]`.
    Yu,
    /// User announces `s = i − j`; item `t` is encrypted with `K[t − s]`.
    Chang,
}

impl ShiftConvention {
    /// Shift the user announces when she knows key bit `j` and wants item `i`.
    pub fn announce(self, known: usize, desired: usize) -> i64 {
        match self {
            ShiftConvention::Yu => known as i64 - desired as i64,
            ShiftConvention::Chang => desired as i64 - known as i64,
        }
    }

    /// Key index used to encrypt database item `t` under `shift`.
    pub fn key_index(self, t: usize, shift: i64, n: usize) -> usize {
        let offset = match self {
            ShiftConvention::Yu => shift,
            ShiftConvention::Chang => -shift,
        };
        (t as i64 + offset).rem_euclid(n as i64) as usize
    }
}

/// Database `x₁…x_N` of single-bit items.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    bits: Vec<Bit>,
}

impl Database {
    pub fn new(bits: Vec<Bit>) -> Result<Self, PostprocessError> {
        if bits.is_empty() {
            return Err(PostprocessError::EmptyDatabase);
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(PostprocessError::Format(format!("bit value {b}")));
        }
        Ok(Self { bits })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self, PostprocessError> {
        Self::new((0..n).map(|_| rng.random_range(0..=1)).collect())
    }

    pub fn bits(&self) -> &[Bit] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Parses one line of `0`/`1` characters.
    pub fn parse(text: &str) -> Result<Self, PostprocessError> {
        let line = text
            .strip_suffix('\n')
            .ok_or_else(|| PostprocessError::Format("missing trailing newline".into()))?;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let bits = line
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(PostprocessError::Format(format!(
                    "unexpected character {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(bits)
    }

    pub fn to_line(&self) -> String {
        let mut s: String = self
            .bits
            .iter()
            .map(|&b| if b == 1 { '1' } else { '0' })
            .collect();
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, PostprocessError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PostprocessError> {
        fs::write(path, self.to_line())?;
        Ok(())
    }
}

/// `ciphertext[t] = db[t] ⊕ K[key_index(t)]`.
pub fn encrypt_database(
    db: &Database,
    key: &[Bit],
    shift: i64,
    convention: ShiftConvention,
) -> Result<Vec<Bit>, PostprocessError> {
    if db.len() != key.len() {
        return Err(PostprocessError::LengthMismatch {
            database: db.len(),
            key: key.len(),
        });
    }
    let n = key.len();
    Ok(db
        .bits
        .iter()
        .enumerate()
        .map(|(t, &x)| x ^ key[convention.key_index(t, shift, n)])
        .collect())
}

/// Recovers item `desired` from a ciphertext encrypted under the shift the
/// user announced for known key position `known`.
pub fn retrieve(
    ciphertext: &[Bit],
    alice_known: &BTreeMap<usize, Bit>,
    known: usize,
    desired: usize,
) -> Result<Bit, PostprocessError> {
    let value = *alice_known
        .get(&known)
        .ok_or(PostprocessError::UnknownPosition(known))?;
    let c = *ciphertext
        .get(desired)
        .ok_or(PostprocessError::OutOfRange {
            index: desired,
            len: ciphertext.len(),
        })?;
    Ok(c ^ value)
}

/// Fraction of database items the user can decrypt correctly with every key
/// bit she knows, given the ciphertext she received.
pub fn recovery_fraction(
    ciphertext: &[Bit],
    db: &Database,
    key: &FinalKey,
    shift: i64,
    convention: ShiftConvention,
) -> f64 {
    let n = ciphertext.len();
    let correct = (0..n)
        .filter(|&t| {
            key.alice_known
                .get(&convention.key_index(t, shift, n))
                .is_some_and(|v| ciphertext[t] ^ v == db.bits[t])
        })
        .count();
    correct as f64 / n as f64
}
