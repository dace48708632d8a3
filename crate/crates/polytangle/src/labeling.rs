//! Labelings of boundary planes by bit sequences, the twist-knot catalog used
//! to realize them, and the eventual-agreement test that separates labelings.
//!
//! Sequences are eventually periodic so that comparison is decidable. Terms
//! are indexed from 1.

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelingError {
    #[error("index ({i}, {j}, {n}, {p}) outside the labeling shape")]
    InvalidIndex { i: u32, j: u32, n: u64, p: u8 },
    #[error("twist parameter {0} is not in the catalog")]
    NotInCatalog(u64),
    #[error("labelings have different shapes")]
    ShapeMismatch,
    #[error("sequence has an empty period")]
    EmptyPeriod,
    #[error("sequence term {0} is not a bit")]
    NotABit(u8),
    #[error("a family needs at least two labelings, got {0}")]
    FamilyTooSmall(usize),
}

/// `prefix` followed by `period` repeated forever.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventuallyPeriodic {
    pub prefix: Vec<u8>,
    pub period: Vec<u8>,
}

impl EventuallyPeriodic {
    pub fn new(prefix: Vec<u8>, period: Vec<u8>) -> Result<Self, LabelingError> {
        let s = EventuallyPeriodic { prefix, period };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), LabelingError> {
        if self.period.is_empty() {
            return Err(LabelingError::EmptyPeriod);
        }
        match self.prefix.iter().chain(&self.period).find(|&&b| b > 1) {
            Some(&b) => Err(LabelingError::NotABit(b)),
            None => Ok(()),
        }
    }

    /// Term `n ≥ 1`.
    pub fn term(&self, n: u64) -> u8 {
        let k = (n - 1) as usize;
        match self.prefix.get(k) {
            Some(&b) => b,
            None => self.period[(k - self.prefix.len()) % self.period.len()],
        }
    }
}

/// A sequence for each plane `(i, j)`, stored as `sequences[i-1][j-1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryLabeling {
    pub sequences: Vec<Vec<EventuallyPeriodic>>,
}

impl BinaryLabeling {
    pub fn shape(&self) -> Vec<u32> {
        self.sequences.iter().map(|r| r.len() as u32).collect()
    }

    pub fn validate(&self) -> Result<(), LabelingError> {
        self.sequences.iter().flatten().try_for_each(EventuallyPeriodic::validate)
    }

    pub fn get(&self, i: u32, j: u32) -> Option<&EventuallyPeriodic> {
        self.sequences.get(i.checked_sub(1)? as usize)?.get(j.checked_sub(1)? as usize)
    }
}

/// Twist knots indexed by their number of half-twists; 1 is the trefoil and
/// 2 the figure-eight, so the catalog starts at 3. Tuples `(i, j, n, p)` are
/// enumerated with `n` outermost, then plane, then `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwistKnotCatalog {
    pub planes: Vec<u32>,
}

pub const FIRST_TWIST_PARAMETER: u64 = 3;

impl TwistKnotCatalog {
    fn slots(&self) -> u64 {
        self.planes.iter().map(|&v| v as u64).sum()
    }

    pub fn assign(&self, i: u32, j: u32, n: u64, p: u8) -> Result<u64, LabelingError> {
        let err = LabelingError::InvalidIndex { i, j, n, p };
        if i == 0 || i as usize > self.planes.len() || j == 0 || j > self.planes[i as usize - 1] || n == 0 || p > 1 {
            return Err(err);
        }
        let slot: u64 = self.planes[..i as usize - 1].iter().map(|&v| v as u64).sum::<u64>() + (j - 1) as u64;
        Ok(FIRST_TWIST_PARAMETER + ((n - 1) * self.slots() + slot) * 2 + p as u64)
    }

    pub fn lookup(&self, parameter: u64) -> Result<(u32, u32, u64, u8), LabelingError> {
        let s = self.slots();
        if parameter < FIRST_TWIST_PARAMETER || s == 0 {
            return Err(LabelingError::NotInCatalog(parameter));
        }
        let idx = parameter - FIRST_TWIST_PARAMETER;
        let p = (idx % 2) as u8;
        let (n0, mut slot) = (idx / 2).div_rem(&s);
        for (i, &v) in self.planes.iter().enumerate() {
            if slot < v as u64 {
                return Ok((i as u32 + 1, slot as u32 + 1, n0 + 1, p));
            }
            slot -= v as u64;
        }
        unreachable!("slot below the total plane count")
    }
}

pub fn catalog_assign(planes: &[u32], i: u32, j: u32, n: u64, p: u8) -> Result<u64, LabelingError> {
    TwistKnotCatalog { planes: planes.to_vec() }.assign(i, j, n, p)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Agreement {
    /// Terms agree for every index `≥ agrees_from`, and this is the least such index.
    AgreesFrom(u64),
    /// Terms differ at every index `≥ start` congruent mod `period` to one of `residues`.
    InfiniteDisagreement { period: u64, start: u64, residues: Vec<u64> },
}

pub fn eventual_agreement(a: &EventuallyPeriodic, b: &EventuallyPeriodic) -> Agreement {
    let pre = a.prefix.len().max(b.prefix.len()) as u64;
    let l = (a.period.len() as u64).lcm(&(b.period.len() as u64));
    // Past the longer prefix both sequences repeat with period l.
    let differ: Vec<u64> = (pre + 1..=pre + l).filter(|&n| a.term(n) != b.term(n)).collect();
    if !differ.is_empty() {
        let mut residues: Vec<u64> = differ.iter().map(|n| n % l).collect();
        residues.sort_unstable();
        return Agreement::InfiniteDisagreement { period: l, start: pre + 1, residues };
    }
    let last = (1..=pre).rev().find(|&n| a.term(n) != b.term(n));
    Agreement::AgreesFrom(last.map_or(1, |n| n + 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obstruction {
    /// Planes `(i, j)` whose sequences disagree infinitely often.
    pub slots: Vec<(u32, u32)>,
}

impl Obstruction {
    pub fn obstructed(&self) -> bool {
        !self.slots.is_empty()
    }
}

pub fn homeomorphism_obstruction(a: &BinaryLabeling, b: &BinaryLabeling) -> Result<Obstruction, LabelingError> {
    if a.shape() != b.shape() {
        return Err(LabelingError::ShapeMismatch);
    }
    let mut slots = Vec::new();
    for (i, (ra, rb)) in a.sequences.iter().zip(&b.sequences).enumerate() {
        for (j, (sa, sb)) in ra.iter().zip(rb).enumerate() {
            if matches!(eventual_agreement(sa, sb), Agreement::InfiniteDisagreement { .. }) {
                slots.push((i as u32 + 1, j as u32 + 1));
            }
        }
    }
    Ok(Obstruction { slots })
}

/// `r` labelings with pairwise infinite disagreement at plane `(1, 1)`.
///
/// Labeling `k` repeats the `w`-bit binary word of `k` there, where
/// `w = max(1, ⌈log₂ r⌉)`, after a random prefix of common length. The other
/// planes are random.
pub fn generate_family(r: usize, seed: u64) -> Result<Vec<BinaryLabeling>, LabelingError> {
    if r < 2 {
        return Err(LabelingError::FamilyTooSmall(r));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (usize::BITS - (r - 1).leading_zeros()).max(1) as usize;
    let ends = rng.gen_range(1..=2usize);
    let planes: Vec<usize> = (0..ends).map(|_| rng.gen_range(1..=2)).collect();
    // A common prefix length at (1, 1) keeps the periods aligned; otherwise a
    // shift could turn one word into a rotation of another.
    let lead = rng.gen_range(0..=4);
    let family = (0..r)
        .map(|k| {
            let sequences = planes
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    (0..v)
                        .map(|j| {
                            let (prefix, period) = if i == 0 && j == 0 {
                                (random_bits(&mut rng, lead, lead), (0..w).rev().map(|b| ((k >> b) & 1) as u8).collect())
                            } else {
                                (random_bits(&mut rng, 0, 4), random_bits(&mut rng, 1, 4))
                            };
                            EventuallyPeriodic { prefix, period }
                        })
                        .collect()
                })
                .collect();
            BinaryLabeling { sequences }
        })
        .collect();
    Ok(family)
}

pub fn random_bits<R: Rng>(rng: &mut R, min: usize, max: usize) -> Vec<u8> {
    let len = rng.gen_range(min..=max);
    (0..len).map(|_| rng.gen_range(0..=1)).collect()
}

pub fn random_sequence<R: Rng>(rng: &mut R) -> EventuallyPeriodic {
    EventuallyPeriodic { prefix: random_bits(rng, 0, 6), period: random_bits(rng, 1, 6) }
}
