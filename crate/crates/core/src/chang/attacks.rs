//! Attacks on the two-way protocol.
//!
//! **Database (counting).** Bob knows the multiset he sent and the announced
//! outcomes of each group. Only the order is hidden, so he can compute the
//! exact posterior that each of his originals was measured in X. Assignments
//! are grouped into 4×4 contingency tables (sent type × announced type); a
//! table `M` stands for `Π c_o! Π d_a! / Π M_oa!` bijections sharing the
//! likelihood `Π L(o,a)^M_oa`.
//!
//! **User (store and fake).** Alice keeps every received qubit, returns a
//! fake sequence with η-proportioned composition and announces it verbatim.
//! At step 4 she measures the revealed X originals in X and points each at a
//! fake slot holding the same X state (probability 1−η) or a Z state. After
//! the check she measures everything left in Z and holds the whole raw key.

use super::protocol::x_originals;
use super::ChangError;
use crate::quantum::{ket, measure_subsystem, BasisLabel, Bit, PreparedSymbol};
use crate::stats::Accumulator;
use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;

/// Largest group the exact posterior is computed for.
pub const MAX_COUNTING_GROUP: usize = 8;

/// Posterior values within this distance of 0 or 1 count as certain.
pub const CERTAINTY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionPosterior {
    pub original_position: usize,
    pub p_measured_x: f64,
}

/// P(announced `a` | sent `o`): basis choice times Born-rule outcome.
pub fn announcement_likelihood(o: PreparedSymbol, a: PreparedSymbol, eta: f64) -> f64 {
    let basis = match a.basis() {
        BasisLabel::Z => eta,
        BasisLabel::X => 1.0 - eta,
    };
    let outcome = if o.basis() == a.basis() {
        if o == a {
            1.0
        } else {
            0.0
        }
    } else {
        0.5
    };
    basis * outcome
}

fn type_counts(symbols: &[PreparedSymbol]) -> [usize; 4] {
    let mut c = [0; 4];
    for s in symbols {
        c[s.index()] += 1;
    }
    c
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

struct TableWalk {
    lik: [[f64; 4]; 4],
    rows: [usize; 4],
    total: f64,
    /// Σ weight · (number of type-o originals sent to X slots)
    x_mass: [f64; 4],
}

impl TableWalk {
    fn fill(
        &mut self,
        row: usize,
        col: usize,
        left_in_row: usize,
        cols: &mut [usize; 4],
        m: &mut [[usize; 4]; 4],
    ) {
        if row == 4 {
            let mut w = 1.0;
            for (lik_row, m_row) in self.lik.iter().zip(m.iter()) {
                for (&l, &count) in lik_row.iter().zip(m_row) {
                    if count > 0 {
                        w *= l.powi(count as i32) / factorial(count);
                    }
                }
            }
            if w > 0.0 {
                self.total += w;
                for (mass, m_row) in self.x_mass.iter_mut().zip(m.iter()) {
                    let to_x: usize = PreparedSymbol::ALL
                        .iter()
                        .filter(|a| a.basis() == BasisLabel::X)
                        .map(|a| m_row[a.index()])
                        .sum();
                    *mass += w * to_x as f64;
                }
            }
            return;
        }
        if col == 3 {
            if left_in_row > cols[3] {
                return;
            }
            m[row][3] = left_in_row;
            cols[3] -= left_in_row;
            let next = if row < 3 { self.rows[row + 1] } else { 0 };
            self.fill(row + 1, 0, next, cols, m);
            cols[3] += left_in_row;
            m[row][3] = 0;
            return;
        }
        for take in 0..=left_in_row.min(cols[col]) {
            m[row][col] = take;
            cols[col] -= take;
            self.fill(row, col + 1, left_in_row - take, cols, m);
            cols[col] += take;
        }
        m[row][col] = 0;
    }
}

/// Exact posterior, per original, that the user measured it in X.
pub fn counting_infer(
    sent: &[PreparedSymbol],
    announced: &[PreparedSymbol],
    eta: f64,
) -> Result<Vec<PositionPosterior>, ChangError> {
    if sent.len() != announced.len() {
        return Err(ChangError::LengthMismatch {
            left: sent.len(),
            right: announced.len(),
        });
    }
    if sent.len() > MAX_COUNTING_GROUP {
        return Err(ChangError::GroupTooLarge(sent.len()));
    }
    let rows = type_counts(sent);
    let mut cols = type_counts(announced);
    let mut lik = [[0.0; 4]; 4];
    for o in PreparedSymbol::ALL {
        for a in PreparedSymbol::ALL {
            lik[o.index()][a.index()] = announcement_likelihood(o, a, eta);
        }
    }
    let mut walk = TableWalk {
        lik,
        rows,
        total: 0.0,
        x_mass: [0.0; 4],
    };
    walk.fill(0, 0, rows[0], &mut cols, &mut [[0; 4]; 4]);
    if walk.total <= 0.0 {
        return Err(ChangError::ImpossibleData);
    }
    Ok(sent
        .iter()
        .enumerate()
        .map(|(i, s)| PositionPosterior {
            original_position: i,
            p_measured_x: walk.x_mass[s.index()] / (walk.total * rows[s.index()] as f64),
        })
        .collect())
}

/// Running statistics of the counting attack over honest groups.
#[derive(Clone, Debug, Default)]
pub struct LeakageStats {
    /// Posterior per original (all originals).
    pub posterior: Accumulator,
    /// |posterior − (1−η)| per original.
    pub abs_shift: Accumulator,
    /// Per Z-prepared original: posterior is 0 or 1.
    pub certain_z: Accumulator,
}

impl LeakageStats {
    pub fn merge(&mut self, other: &LeakageStats) {
        self.posterior.merge(&other.posterior);
        self.abs_shift.merge(&other.abs_shift);
        self.certain_z.merge(&other.certain_z);
    }

    pub fn record(&mut self, sent: &[PreparedSymbol], posteriors: &[PositionPosterior], eta: f64) {
        for (s, p) in sent.iter().zip(posteriors) {
            let x = p.p_measured_x;
            self.posterior.push(x);
            self.abs_shift.push((x - (1.0 - eta)).abs());
            if s.basis() == BasisLabel::Z {
                self.certain_z
                    .push_bool(x <= CERTAINTY_TOL || x >= 1.0 - CERTAINTY_TOL);
            }
        }
    }
}

/// Simulates `groups` honest groups of size `n` and runs the inference on each.
pub fn counting_leakage<R: Rng + ?Sized>(
    groups: usize,
    n: usize,
    eta: f64,
    rng: &mut R,
) -> Result<LeakageStats, ChangError> {
    let mut stats = LeakageStats::default();
    for _ in 0..groups {
        let sent = crate::yu::protocol::random_symbols(n, rng);
        let t = super::protocol::alice_measure_group(&sent, eta, rng)?;
        let post = counting_infer(&t.sent, &t.announced, eta)?;
        stats.record(&t.sent, &post, eta);
    }
    Ok(stats)
}

/// Counts of Z0, Z1, X+, X− in a fake group: `round(nη)` Z symbols and the
/// rest X, each split as evenly as possible with the extra one on Z0/X+.
pub fn fake_composition(n: usize, eta: f64) -> [usize; 4] {
    let z = ((n as f64 * eta).round() as usize).min(n);
    let x = n - z;
    [z.div_ceil(2), z / 2, x.div_ceil(2), x / 2]
}

#[derive(Clone, Debug, PartialEq)]
pub struct FakeSequencePlan {
    pub symbols: Vec<PreparedSymbol>,
    pub used: Vec<bool>,
}

impl FakeSequencePlan {
    pub fn new<R: Rng + ?Sized>(n: usize, eta: f64, rng: &mut R) -> Self {
        let counts = fake_composition(n, eta);
        let mut symbols: Vec<PreparedSymbol> = PreparedSymbol::ALL
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, counts[s.index()]))
            .collect();
        symbols.shuffle(rng);
        Self {
            used: vec![false; n],
            symbols,
        }
    }

    /// Claims a uniformly chosen unused slot satisfying `want`.
    fn take<R: Rng + ?Sized>(
        &mut self,
        want: impl Fn(PreparedSymbol) -> bool,
        rng: &mut R,
    ) -> Option<usize> {
        let slot = (0..self.symbols.len())
            .filter(|&i| !self.used[i] && want(self.symbols[i]))
            .choose(rng)?;
        self.used[slot] = true;
        Some(slot)
    }

    fn first_unused(&self, want: impl Fn(PreparedSymbol) -> bool) -> Option<usize> {
        (0..self.symbols.len()).find(|&i| !self.used[i] && want(self.symbols[i]))
    }
}

/// Stores the received group untouched and announces a fresh fake sequence.
pub fn store_fake_step2<R: Rng + ?Sized>(
    group: &[PreparedSymbol],
    eta: f64,
    rng: &mut R,
) -> (Vec<PreparedSymbol>, FakeSequencePlan, Vec<PreparedSymbol>) {
    let plan = FakeSequencePlan::new(group.len(), eta, rng);
    let announced = plan.symbols.clone();
    (group.to_vec(), plan, announced)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Step4Reply {
    /// Slot for each X original, in the order of `x_positions`.
    pub disclosed: Vec<usize>,
    /// Replies served from the non-drawn class because the drawn one ran out.
    pub fallbacks: usize,
    /// Replies made possible by moving an earlier reply to its own X pool.
    pub repairs: usize,
    /// Replies with no consistent slot left; these fail step 4.
    pub infeasible: usize,
}

/// Chooses disclosed slots for the X originals Bob revealed.
///
/// Each reply first follows its own draw (same X state with probability
/// 1−η, otherwise a Z slot). Replies whose drawn pool is empty take the
/// other pool. If both are empty, an earlier reply parked on a Z slot is
/// moved to a free slot of its own X state when possible. Anything still
/// unplaced gets an arbitrary free slot and is counted as infeasible.
pub fn store_fake_step4_reply<R: Rng + ?Sized>(
    stored: &[PreparedSymbol],
    plan: &mut FakeSequencePlan,
    x_positions: &[usize],
    eta: f64,
    rng: &mut R,
) -> Result<Step4Reply, ChangError> {
    let mut measured = Vec::with_capacity(x_positions.len());
    for &i in x_positions {
        let s = *stored.get(i).ok_or(ChangError::LengthMismatch {
            left: i,
            right: stored.len(),
        })?;
        let (bit, _) = measure_subsystem(&ket(s), 0, BasisLabel::X, rng)?;
        measured.push(PreparedSymbol::new(BasisLabel::X, bit));
    }
    let prefer_x: Vec<bool> = measured
        .iter()
        .map(|_| rng.random::<f64>() < 1.0 - eta)
        .collect();
    let is_z = |s: PreparedSymbol| s.basis() == BasisLabel::Z;

    let mut slots: Vec<Option<usize>> = vec![None; measured.len()];
    for (k, &m) in measured.iter().enumerate() {
        slots[k] = if prefer_x[k] {
            plan.take(|s| s == m, rng)
        } else {
            plan.take(is_z, rng)
        };
    }
    let mut reply = Step4Reply::default();
    for (k, &m) in measured.iter().enumerate() {
        if slots[k].is_some() {
            continue;
        }
        slots[k] = if prefer_x[k] {
            plan.take(is_z, rng)
        } else {
            plan.take(|s| s == m, rng)
        };
        if slots[k].is_some() {
            reply.fallbacks += 1;
        }
    }
    for k in 0..measured.len() {
        if slots[k].is_some() {
            continue;
        }
        let movable = (0..measured.len()).find_map(|j| {
            let slot = slots[j]?;
            if !is_z(plan.symbols[slot]) || measured[j] == measured[k] {
                return None;
            }
            let own = measured[j];
            plan.first_unused(|s| s == own).map(|free| (j, slot, free))
        });
        if let Some((j, z_slot, free)) = movable {
            plan.used[free] = true;
            slots[j] = Some(free);
            slots[k] = Some(z_slot);
            reply.repairs += 1;
        } else {
            slots[k] = plan.take(|_| true, rng);
            reply.infeasible += 1;
        }
    }
    reply.disclosed = slots
        .into_iter()
        .map(|s| s.expect("at most n X originals for n slots"))
        .collect();
    Ok(reply)
}

/// Z-measures every stored qubit that was not an X original. Returns
/// `(original position, bit)` pairs in original order.
pub fn store_fake_extract<R: Rng + ?Sized>(
    stored: &[PreparedSymbol],
    x_positions: &[usize],
    rng: &mut R,
) -> Result<Vec<(usize, Bit)>, ChangError> {
    let mut out = Vec::new();
    for (i, &s) in stored.iter().enumerate() {
        if x_positions.contains(&i) {
            continue;
        }
        let (bit, _) = measure_subsystem(&ket(s), 0, BasisLabel::Z, rng)?;
        out.push((i, bit));
    }
    Ok(out)
}

/// Convenience used by tests and the harness: X originals of a stored group.
pub fn revealed_x_positions(sent: &[PreparedSymbol]) -> Vec<usize> {
    x_originals(sent)
}
