//! Positive braid words on grouped strands.
//!
//! A group braid on `n` groups of three strands is written with letters
//! `Σ_t` (group `t` crosses over group `t + 1`). Each letter expands into
//! nine ordinary Artin generators on `3n` strands. Indices are 1-based
//! throughout, matching the usual `σ_1 … σ_{k-1}` convention.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building or evaluating braid words.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BraidError {
    /// A generator index outside `1..=strands-1` (or `1..=groups-1`).
    #[error("generator index {index} out of range for {count} strands")]
    IndexOutOfRange { index: u32, count: u32 },
    /// The half twist needs at least two groups.
    #[error("half twist needs at least two groups, got {0}")]
    TooFewGroups(u32),
}

/// Sign of an Artin generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

/// One Artin generator `σ_i^{±1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Letter {
    pub index: u32,
    pub sign: Sign,
}

impl Letter {
    pub fn pos(index: u32) -> Self {
        Letter { index, sign: Sign::Positive }
    }
}

/// A word in the Artin generators on `strand_count` strands, read top to bottom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BraidWord {
    pub strand_count: u32,
    pub letters: Vec<Letter>,
}

/// A positive word in the group generators `Σ_1 … Σ_{n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupBlockWord {
    pub group_count: u32,
    pub letters: Vec<u32>,
}

/// A permutation of `1..=size`, stored as `image[k-1] = π(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrandPermutation {
    pub size: u32,
    pub image: Vec<u32>,
}

impl StrandPermutation {
    pub fn identity(size: u32) -> Self {
        StrandPermutation { size, image: (1..=size).collect() }
    }

    /// `π(k)` for 1-based `k`.
    pub fn apply(&self, k: u32) -> u32 {
        self.image[(k - 1) as usize]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.size as usize];
        for (i, &v) in self.image.iter().enumerate() {
            inv[(v - 1) as usize] = i as u32 + 1;
        }
        StrandPermutation { size: self.size, image: inv }
    }

    /// `self` followed by `other`: `k ↦ other(self(k))`.
    pub fn then(&self, other: &StrandPermutation) -> Self {
        let image = self.image.iter().map(|&v| other.apply(v)).collect();
        StrandPermutation { size: self.size, image }
    }

    pub fn is_reversal(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &v)| v == self.size - i as u32)
    }
}

fn check_index(index: u32, count: u32) -> Result<(), BraidError> {
    if index == 0 || index >= count {
        return Err(BraidError::IndexOutOfRange { index, count });
    }
    Ok(())
}

/// Expand `Σ_t` into nine positive generators on `3n` strands.
///
/// The result is `σ_{3t} σ_{3t-1} σ_{3t+1} σ_{3t-2} σ_{3t} σ_{3t+2} σ_{3t-1} σ_{3t+1} σ_{3t}`,
/// which carries the three strands at positions `3t-2..=3t` across the
/// three at `3t+1..=3t+3` without reordering either triple.
pub fn expand_group_letter(t: u32, n: u32) -> Result<Vec<Letter>, BraidError> {
    check_index(t, n)?;
    let b = 3 * t;
    Ok([b, b - 1, b + 1, b - 2, b, b + 2, b - 1, b + 1, b]
        .into_iter()
        .map(Letter::pos)
        .collect())
}

/// Expand a whole group word into an Artin word on `3n` strands.
pub fn expand_group_word(word: &GroupBlockWord) -> Result<BraidWord, BraidError> {
    let mut letters = Vec::with_capacity(word.letters.len() * 9);
    for &t in &word.letters {
        letters.extend(expand_group_letter(t, word.group_count)?);
    }
    Ok(BraidWord { strand_count: 3 * word.group_count, letters })
}

/// The positive half twist on `n` groups as a word `t_1 … t_m` in group indices.
///
/// Written as `(1 … n-1)(1 … n-2) … (1)`, so `m = (n² - n) / 2`.
pub fn half_twist_sequence(n: u32) -> Result<Vec<u32>, BraidError> {
    if n < 2 {
        return Err(BraidError::TooFewGroups(n));
    }
    Ok((1..n).rev().flat_map(|top| 1..=top).collect())
}

pub fn half_twist_word(n: u32) -> Result<GroupBlockWord, BraidError> {
    Ok(GroupBlockWord { group_count: n, letters: half_twist_sequence(n)? })
}

/// Map each top position of the braid to its bottom position.
pub fn induced_strand_permutation(word: &BraidWord) -> Result<StrandPermutation, BraidError> {
    // pos[s] = current position of the strand that started at s+1.
    let k = word.strand_count;
    let mut at: Vec<u32> = (1..=k).collect(); // at[p-1] = strand currently at position p
    for l in &word.letters {
        check_index(l.index, k)?;
        at.swap((l.index - 1) as usize, l.index as usize);
    }
    let mut image = vec![0; k as usize];
    for (p, &s) in at.iter().enumerate() {
        image[(s - 1) as usize] = p as u32 + 1;
    }
    Ok(StrandPermutation { size: k, image })
}

/// Permutation of group positions induced by a group word.
///
/// Composes the adjacent transpositions top to bottom. The half twist
/// induces the order-reversing permutation.
pub fn induced_group_permutation(word: &GroupBlockWord) -> Result<StrandPermutation, BraidError> {
    let n = word.group_count;
    let mut at: Vec<u32> = (1..=n).collect();
    for &t in &word.letters {
        check_index(t, n)?;
        at.swap((t - 1) as usize, t as usize);
    }
    let mut image = vec![0; n as usize];
    for (p, &g) in at.iter().enumerate() {
        image[(g - 1) as usize] = p as u32 + 1;
    }
    Ok(StrandPermutation { size: n, image })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn indices(ls: &[Letter]) -> Vec<u32> {
        ls.iter().map(|l| l.index).collect()
    }

    #[test]
    fn first_group_letter_on_two_groups() {
        let ls = expand_group_letter(1, 2).unwrap();
        assert_eq!(indices(&ls), vec![3, 2, 4, 1, 3, 5, 2, 4, 3]);
        let w = BraidWord { strand_count: 6, letters: ls };
        assert_eq!(induced_strand_permutation(&w).unwrap().image, vec![4, 5, 6, 1, 2, 3]);
    }

    #[test]
    fn group_letter_bounds() {
        assert!(matches!(expand_group_letter(0, 3), Err(BraidError::IndexOutOfRange { .. })));
        assert!(matches!(expand_group_letter(3, 3), Err(BraidError::IndexOutOfRange { .. })));
    }

    #[test]
    fn half_twist_small() {
        assert_eq!(half_twist_sequence(2).unwrap(), vec![1]);
        assert_eq!(half_twist_sequence(3).unwrap(), vec![1, 2, 1]);
        assert_eq!(half_twist_sequence(4).unwrap(), vec![1, 2, 3, 1, 2, 1]);
        assert_eq!(half_twist_sequence(1), Err(BraidError::TooFewGroups(1)));
    }

    #[test]
    fn single_transposition() {
        let w = GroupBlockWord { group_count: 3, letters: vec![1] };
        assert_eq!(induced_group_permutation(&w).unwrap().image, vec![2, 1, 3]);
    }

    #[test]
    fn strand_index_checked() {
        let w = BraidWord { strand_count: 3, letters: vec![Letter::pos(3)] };
        assert!(induced_strand_permutation(&w).is_err());
    }

    proptest! {
        #[test]
        fn half_twist_reverses_groups(n in 2u32..=12) {
            let w = half_twist_word(n).unwrap();
            prop_assert_eq!(w.letters.len() as u32, n * (n - 1) / 2);
            prop_assert!(induced_group_permutation(&w).unwrap().is_reversal());
            let bw = expand_group_word(&w).unwrap();
            prop_assert_eq!(bw.letters.len() as u32, 9 * n * (n - 1) / 2);
            let p = induced_strand_permutation(&bw).unwrap();
            // Group g lands on group n+1-g with its three strands in order.
            for g in 1..=n {
                for r in 0..3 {
                    prop_assert_eq!(p.apply(3 * g - 2 + r), 3 * (n + 1 - g) - 2 + r);
                }
            }
        }

        #[test]
        fn group_letter_moves_triples(n in 2u32..=12, t0 in 1u32..12) {
            let t = 1 + (t0 - 1) % (n - 1);
            let w = BraidWord { strand_count: 3 * n, letters: expand_group_letter(t, n).unwrap() };
            let p = induced_strand_permutation(&w).unwrap();
            for q in 1..=3 * n {
                let g = (q + 2) / 3;
                let expect = if g == t { q + 3 } else if g == t + 1 { q - 3 } else { q };
                prop_assert_eq!(p.apply(q), expect);
            }
        }

        #[test]
        fn inverse_roundtrip(v in proptest::collection::vec(1u32..8, 0..30)) {
            let w = BraidWord { strand_count: 8, letters: v.into_iter().map(Letter::pos).collect() };
            let p = induced_strand_permutation(&w).unwrap();
            prop_assert_eq!(p.then(&p.inverse()), StrandPermutation::identity(8));
        }
    }
}
