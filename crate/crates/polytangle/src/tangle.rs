//! The block decomposition of the box, level tangles, the stacked tangle θ
//! and its subtangles, plus the grouped-arc wirings used to build
//! excellent arcs in solid tori.
//!
//! Coordinates: `x` runs left to right, `y` back to front, `z` downward.
//! The box is `[0, 9n+1] × [-1, 1] × [0, n² - n + 1]`.

use crate::braid::{self, GroupBlockWord, StrandPermutation};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TangleError {
    #[error("need at least two groups, got n = {0}")]
    TooFewGroups(u32),
    #[error("subset must be non-empty")]
    EmptySubset,
    #[error("component {index} not in 1..={n}")]
    ComponentOutOfRange { index: u32, n: u32 },
    #[error("invalid pair ({j}, {k}) for n = {n}")]
    InvalidPair { j: u32, k: u32, n: u32 },
    #[error("no adjacency level for pair ({j}, {k})")]
    NoAdjacency { j: u32, k: u32 },
    #[error("height {p} outside 0..={max}")]
    HeightOutOfRange { p: u32, max: u32 },
    #[error("block {0:?} does not exist for this n")]
    BadBlock(BlockId),
    #[error("need at least one arc group, got nu = 0")]
    ZeroArcs,
    #[error("expected {expected} knot labels, got {got}")]
    LabelCountMismatch { expected: usize, got: usize },
    #[error("knot spaces can only be inserted into a four-group wiring")]
    NotFourGroup,
    #[error("wiring check failed: {0}")]
    Wiring(String),
}

/// Kinds of rectangular solid in the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockKind {
    BLayer,
    CLayer,
    NOverlap,
    KOverlap,
    BBrick,
    CBrick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId {
    pub kind: BlockKind,
    pub level: u32,
    pub column: u32,
}

/// Axis-aligned extent with integer corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extent {
    pub x: (i64, i64),
    pub y: (i64, i64),
    pub z: (i64, i64),
}

impl BlockId {
    pub fn new(kind: BlockKind, level: u32, column: u32) -> Self {
        BlockId { kind, level, column }
    }

    /// Extent of the block, or an error when `(level, column)` is out of range.
    pub fn extent(&self, n: u32) -> Result<Extent, TangleError> {
        let m = half_twist_len(n);
        let (i, j) = (self.level as i64, self.column as i64);
        let b_rows = (2 * i, 2 * i + 1);
        let c_rows = (2 * i - 1, 2 * i);
        let ok = match self.kind {
            BlockKind::BLayer | BlockKind::BBrick => self.level <= m && (1..=n).contains(&self.column),
            BlockKind::CLayer | BlockKind::CBrick => {
                (1..=m).contains(&self.level) && (1..=n).contains(&self.column)
            }
            BlockKind::NOverlap => self.level <= m && self.column <= n,
            BlockKind::KOverlap => (1..=m).contains(&self.level) && self.column <= n,
        };
        if !ok {
            return Err(TangleError::BadBlock(*self));
        }
        let (x, z) = match self.kind {
            BlockKind::BLayer => ((9 * j - 9, 9 * j + 1), b_rows),
            BlockKind::CLayer => ((9 * j - 9, 9 * j + 1), c_rows),
            BlockKind::NOverlap => ((9 * j, 9 * j + 1), b_rows),
            BlockKind::KOverlap => ((9 * j, 9 * j + 1), c_rows),
            BlockKind::BBrick => ((9 * j - 8, 9 * j), b_rows),
            BlockKind::CBrick => ((9 * j - 8, 9 * j), c_rows),
        };
        Ok(Extent { x, y: (-1, 1), z })
    }
}

/// The whole box for `n` groups.
pub fn box_extent(n: u32) -> Extent {
    let n = n as i64;
    Extent { x: (0, 9 * n + 1), y: (-1, 1), z: (0, n * n - n + 1) }
}

/// `m = (n² - n) / 2`.
pub fn half_twist_len(n: u32) -> u32 {
    n * n.saturating_sub(1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
    C,
}

/// The lattice point `x_{p,q} = (3q - 1, 0, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub p: u32,
    pub q: u32,
}

impl LatticePoint {
    pub fn new(p: u32, role: Role, column: u32) -> Self {
        let off = match role {
            Role::A => 2,
            Role::B => 1,
            Role::C => 0,
        };
        LatticePoint { p, q: 3 * column - off }
    }

    pub fn role(&self) -> Role {
        match self.q % 3 {
            1 => Role::A,
            2 => Role::B,
            _ => Role::C,
        }
    }

    pub fn column(&self) -> u32 {
        (self.q + 2) / 3
    }

    pub fn coords(&self) -> (i64, i64, i64) {
        (3 * self.q as i64 - 1, 0, self.p as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevelKind {
    Top,
    Middle,
    Bottom,
}

/// Name of a level arc within its column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentRole {
    Delta,
    Alpha,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSegment {
    pub role: SegmentRole,
    pub level: u32,
    pub column: u32,
    pub from: LatticePoint,
    pub to: LatticePoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTangle {
    pub level: u32,
    pub kind: LevelKind,
    /// `columns[j-1]` lists the arcs of `Λ_{i,j}` left to right.
    pub columns: Vec<Vec<LevelSegment>>,
}

impl LevelTangle {
    pub fn build(level: u32, m: u32, n: u32) -> Self {
        let kind = if level == 0 {
            LevelKind::Top
        } else if level == m {
            LevelKind::Bottom
        } else {
            LevelKind::Middle
        };
        let (top, bot) = (2 * level, 2 * level + 1);
        let columns = (1..=n)
            .map(|j| {
                let seg = |role, from, to| LevelSegment { role, level, column: j, from, to };
                let pt = |p, r| LatticePoint::new(p, r, j);
                let mut v = Vec::new();
                if kind != LevelKind::Top {
                    v.push(seg(SegmentRole::Delta, pt(top, Role::A), pt(top, Role::B)));
                }
                v.push(match kind {
                    LevelKind::Top => seg(SegmentRole::Alpha, pt(top, Role::A), pt(bot, Role::A)),
                    LevelKind::Middle => seg(SegmentRole::Alpha, pt(top, Role::C), pt(bot, Role::A)),
                    LevelKind::Bottom => seg(SegmentRole::Alpha, pt(top, Role::C), pt(bot, Role::C)),
                });
                if kind != LevelKind::Bottom {
                    v.push(seg(SegmentRole::Gamma, pt(bot, Role::B), pt(bot, Role::C)));
                }
                v
            })
            .collect();
        LevelTangle { level, kind, columns }
    }

    pub fn segment(&self, column: u32, role: SegmentRole) -> Option<&LevelSegment> {
        self.columns.get(column as usize - 1)?.iter().find(|s| s.role == role)
    }
}

/// One piece of a component of θ, oriented along the component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainPiece {
    Level(LevelSegment),
    /// Strand of braid `β_braid` between its top point (height `2·braid-1`)
    /// and bottom point (height `2·braid`); `upward` records traversal direction.
    Braid { braid: u32, role: Role, top: LatticePoint, bottom: LatticePoint, upward: bool },
}

impl ChainPiece {
    pub fn start(&self) -> LatticePoint {
        match *self {
            ChainPiece::Level(s) => s.from,
            ChainPiece::Braid { top, bottom, upward, .. } => if upward { bottom } else { top },
        }
    }

    pub fn end(&self) -> LatticePoint {
        match *self {
            ChainPiece::Level(s) => s.to,
            ChainPiece::Braid { top, bottom, upward, .. } => if upward { top } else { bottom },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub index: u32,
    pub chain: Vec<ChainPiece>,
}

impl Component {
    pub fn start(&self) -> LatticePoint {
        self.chain[0].start()
    }

    pub fn end(&self) -> LatticePoint {
        self.chain[self.chain.len() - 1].end()
    }
}

/// The stacked tangle θ on `n` components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaComplex {
    pub n: u32,
    pub m: u32,
    pub levels: Vec<LevelTangle>,
    pub braids: GroupBlockWord,
    /// `phi[i][j-1] = φ(i, j)`, the column holding component `j` at level `i`.
    pub phi: Vec<Vec<u32>>,
    pub components: Vec<Component>,
}

/// Build θ for `n ≥ 2` groups.
pub fn build_theta(n: u32) -> Result<ThetaComplex, TangleError> {
    if n < 2 {
        return Err(TangleError::TooFewGroups(n));
    }
    let m = half_twist_len(n);
    let braids = braid::half_twist_word(n).map_err(|_| TangleError::TooFewGroups(n))?;
    let levels: Vec<_> = (0..=m).map(|i| LevelTangle::build(i, m, n)).collect();
    let phi = compute_phi(n, &braids.letters);
    let components = (1..=n).map(|j| trace_component(j, m, &levels, &phi)).collect();
    Ok(ThetaComplex { n, m, levels, braids, phi, components })
}

fn compute_phi(n: u32, letters: &[u32]) -> Vec<Vec<u32>> {
    let mut rows = vec![(1..=n).collect::<Vec<u32>>()];
    for &t in letters {
        let next = rows
            .last()
            .unwrap()
            .iter()
            .map(|&c| if c == t { t + 1 } else if c == t + 1 { t } else { c })
            .collect();
        rows.push(next);
    }
    rows
}

fn trace_component(j: u32, m: u32, levels: &[LevelTangle], phi: &[Vec<u32>]) -> Component {
    let col = |i: u32| phi[i as usize][(j - 1) as usize];
    let seg = |i: u32, role| ChainPiece::Level(*levels[i as usize].segment(col(i), role).unwrap());
    let strand = |i: u32, role, upward| ChainPiece::Braid {
        braid: i,
        role,
        top: LatticePoint::new(2 * i - 1, role, col(i - 1)),
        bottom: LatticePoint::new(2 * i, role, col(i)),
        upward,
    };
    let mut chain = vec![seg(0, SegmentRole::Alpha)];
    for i in 1..=m {
        chain.push(strand(i, Role::A, false));
        chain.push(seg(i, SegmentRole::Delta));
        chain.push(strand(i, Role::B, true));
        chain.push(seg(i - 1, SegmentRole::Gamma));
        chain.push(strand(i, Role::C, false));
        chain.push(seg(i, SegmentRole::Alpha));
    }
    Component { index: j, chain }
}

impl ThetaComplex {
    pub fn phi_at(&self, level: u32, j: u32) -> u32 {
        self.phi[level as usize][(j - 1) as usize]
    }

    /// Strand permutation of braid `β_i` on `3n` strands.
    pub fn braid_permutation(&self, i: u32) -> StrandPermutation {
        let t = self.braids.letters[(i - 1) as usize];
        let w = braid::BraidWord {
            strand_count: 3 * self.n,
            letters: braid::expand_group_letter(t, self.n).expect("letter in range"),
        };
        braid::induced_strand_permutation(&w).expect("valid word")
    }
}

pub fn phi_table(theta: &ThetaComplex) -> Vec<Vec<u32>> {
    theta.phi.clone()
}

/// A chosen non-empty set of components of θ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtangle {
    pub parent: ThetaComplex,
    pub j0: BTreeSet<u32>,
}

impl Subtangle {
    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.parent.components.iter().filter(|c| self.j0.contains(&c.index))
    }

    /// Columns met at level `i`: `{φ(i, j) : j ∈ J0}`.
    pub fn columns_at(&self, i: u32) -> BTreeSet<u32> {
        self.j0.iter().map(|&j| self.parent.phi_at(i, j)).collect()
    }
}

pub fn select_subtangle(
    theta: &ThetaComplex,
    j0: impl IntoIterator<Item = u32>,
) -> Result<Subtangle, TangleError> {
    let j0: BTreeSet<u32> = j0.into_iter().collect();
    if j0.is_empty() {
        return Err(TangleError::EmptySubset);
    }
    if let Some(&bad) = j0.iter().find(|&&j| j == 0 || j > theta.n) {
        return Err(TangleError::ComponentOutOfRange { index: bad, n: theta.n });
    }
    Ok(Subtangle { parent: theta.clone(), j0 })
}

/// Least level `i` with `φ(i, k) = φ(i, j) + 1`.
pub fn adjacency_witness(theta: &ThetaComplex, j: u32, k: u32) -> Result<u32, TangleError> {
    if j == 0 || j >= k || k > theta.n {
        return Err(TangleError::InvalidPair { j, k, n: theta.n });
    }
    (0..=theta.m)
        .find(|&i| theta.phi_at(i, k) == theta.phi_at(i, j) + 1)
        .ok_or(TangleError::NoAdjacency { j, k })
}

/// Number of points where component `j` meets the plane `H_p`.
pub fn disk_incidence(theta: &ThetaComplex, j: u32, p: u32) -> Result<u32, TangleError> {
    let max = 2 * theta.m + 1;
    if p > max {
        return Err(TangleError::HeightOutOfRange { p, max });
    }
    if j == 0 || j > theta.n {
        return Err(TangleError::ComponentOutOfRange { index: j, n: theta.n });
    }
    let comp = &theta.components[(j - 1) as usize];
    let pts: BTreeSet<LatticePoint> = comp
        .chain
        .iter()
        .flat_map(|c| [c.start(), c.end()])
        .filter(|pt| pt.p == p)
        .collect();
    Ok(pts.len() as u32)
}

// ---------------------------------------------------------------------------
// Grouped-arc wirings in a solid torus split along a meridian disk.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WiringScheme {
    ThreeGroup,
    FourGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArcGroup {
    Beta,
    Gamma,
    Delta,
    Omega,
}

/// Where an endpoint of a grouped arc sits on the boundary of the split ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Site {
    /// `∂B - (G_1 ∪ G_2)`.
    Outer,
    /// Interior of `G_1` (three-group scheme).
    G1,
    /// Interior of `G_2` (three-group scheme).
    G2,
    /// `int D_{1,j}`.
    D1(u32),
    /// `int D_{2,j}`.
    D2(u32),
    /// `int H_1`, the holed disk in `G_1`.
    H1,
    /// `int H_2`.
    H2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArcEnd {
    pub group: ArcGroup,
    pub index: u32,
    /// 0 for the start of the arc, 1 for its end.
    pub end: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedArc {
    pub group: ArcGroup,
    pub index: u32,
    pub start: Site,
    pub end: Site,
}

/// An arc `ρ_j` of the quotient, as the ordered list of grouped arcs it traverses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientArc {
    pub index: u32,
    pub pieces: Vec<(ArcGroup, u32)>,
    pub meridian_crossings: u32,
}

/// Companion torus `T_j` with its compressing disk `D_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanionSlot {
    pub index: u32,
    pub knot_label: Option<u64>,
    /// Set once a knot space is glued in: `Q_j ∪ N(D_j)` is a ball `B_j`.
    pub ball_recorded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientTangle {
    pub scheme: WiringScheme,
    pub nu: u32,
    pub arcs: Vec<GroupedArc>,
    /// Endpoint pairs glued by the identification `G_1 ↔ G_2`.
    pub identification: Vec<(ArcEnd, ArcEnd)>,
    pub quotient_arcs: Vec<QuotientArc>,
    pub slots: Vec<CompanionSlot>,
    /// `(i, j)` pairs with `D_i ∩ ρ_j ≠ ∅`; only `i = j` may occur.
    pub disk_meets: Vec<(u32, u32)>,
}

impl QuotientTangle {
    /// χ of the splitting surface for a `k`-subset of the quotient arcs.
    ///
    /// Three groups: a disk with `2k` holes. Four groups: `k` disks with two
    /// holes plus a disk with `2k` holes.
    pub fn splitting_chi(&self, k: u32) -> i64 {
        let k = k as i64;
        match self.scheme {
            WiringScheme::ThreeGroup => 1 - 2 * k,
            WiringScheme::FourGroup => k * (1 - 2) + (1 - 2 * k),
        }
    }
}

fn site_side(s: Site) -> Option<u8> {
    match s {
        Site::G1 | Site::D1(_) | Site::H1 => Some(1),
        Site::G2 | Site::D2(_) | Site::H2 => Some(2),
        Site::Outer => None,
    }
}

pub fn wire_solid_torus(scheme: WiringScheme, nu: u32) -> Result<QuotientTangle, TangleError> {
    if nu < 1 {
        return Err(TangleError::ZeroArcs);
    }
    let mut arcs = Vec::new();
    let mut identification = Vec::new();
    let e = |group, index, end| ArcEnd { group, index, end };
    use ArcGroup::*;
    for j in 1..=nu {
        match scheme {
            WiringScheme::ThreeGroup => {
                arcs.push(GroupedArc { group: Beta, index: j, start: Site::Outer, end: Site::G1 });
                arcs.push(GroupedArc { group: Delta, index: j, start: Site::G2, end: Site::G2 });
                arcs.push(GroupedArc { group: Gamma, index: j, start: Site::G1, end: Site::Outer });
                identification.push((e(Beta, j, 1), e(Delta, j, 0)));
                identification.push((e(Gamma, j, 0), e(Delta, j, 1)));
            }
            WiringScheme::FourGroup => {
                arcs.push(GroupedArc { group: Beta, index: j, start: Site::Outer, end: Site::D1(j) });
                arcs.push(GroupedArc { group: Gamma, index: j, start: Site::D2(j), end: Site::D2(j) });
                arcs.push(GroupedArc { group: Delta, index: j, start: Site::D1(j), end: Site::H1 });
                arcs.push(GroupedArc { group: Omega, index: j, start: Site::H2, end: Site::Outer });
                identification.push((e(Beta, j, 1), e(Gamma, j, 0)));
                identification.push((e(Delta, j, 0), e(Gamma, j, 1)));
                identification.push((e(Delta, j, 1), e(Omega, j, 0)));
            }
        }
    }
    let mut qt = QuotientTangle {
        scheme,
        nu,
        arcs,
        identification,
        quotient_arcs: Vec::new(),
        slots: Vec::new(),
        disk_meets: Vec::new(),
    };
    qt.quotient_arcs = trace_quotient(&qt)?;
    if scheme == WiringScheme::FourGroup {
        qt.slots = (1..=nu).map(|j| CompanionSlot { index: j, knot_label: None, ball_recorded: false }).collect();
        qt.disk_meets = disk_meets(&qt);
        if let Some(&(i, j)) = qt.disk_meets.iter().find(|(i, j)| i != j) {
            return Err(TangleError::Wiring(format!("D_{i} meets rho_{j}")));
        }
    }
    Ok(qt)
}

fn arc_site(qt: &QuotientTangle, end: ArcEnd) -> Site {
    let a = qt.arcs.iter().find(|a| a.group == end.group && a.index == end.index).unwrap();
    if end.end == 0 { a.start } else { a.end }
}

/// Follow each quotient arc from its outer start, crossing identified ends.
fn trace_quotient(qt: &QuotientTangle) -> Result<Vec<QuotientArc>, TangleError> {
    // Every identified pair must join opposite sides of the meridian disk.
    for &(x, y) in &qt.identification {
        let (sx, sy) = (site_side(arc_site(qt, x)), site_side(arc_site(qt, y)));
        if sx.is_none() || sy.is_none() || sx == sy {
            return Err(TangleError::Wiring(format!("pair {x:?} ~ {y:?} does not cross the disk")));
        }
    }
    let partner = |end: ArcEnd| {
        qt.identification.iter().find_map(|&(x, y)| {
            if x == end {
                Some(y)
            } else if y == end {
                Some(x)
            } else {
                None
            }
        })
    };
    let mut out = Vec::new();
    let mut used = BTreeSet::new();
    for start in qt.arcs.iter().filter(|a| a.start == Site::Outer) {
        let mut pieces = vec![(start.group, start.index)];
        let mut crossings = 0;
        let mut cur = ArcEnd { group: start.group, index: start.index, end: 1 };
        used.insert((start.group, start.index));
        while let Some(next) = partner(cur) {
            crossings += 1;
            if !used.insert((next.group, next.index)) {
                return Err(TangleError::Wiring("quotient closes into a circle".into()));
            }
            pieces.push((next.group, next.index));
            cur = ArcEnd { end: 1 - next.end, ..next };
        }
        if arc_site(qt, cur) != Site::Outer {
            return Err(TangleError::Wiring(format!("arc ends at {:?}", arc_site(qt, cur))));
        }
        out.push(QuotientArc { index: start.index, pieces, meridian_crossings: crossings });
    }
    if used.len() != qt.arcs.len() {
        return Err(TangleError::Wiring("some grouped arcs are not on any quotient arc".into()));
    }
    Ok(out)
}

fn disk_meets(qt: &QuotientTangle) -> Vec<(u32, u32)> {
    let mut v = BTreeSet::new();
    for qa in &qt.quotient_arcs {
        for &(g, idx) in &qa.pieces {
            let a = qt.arcs.iter().find(|a| a.group == g && a.index == idx).unwrap();
            for s in [a.start, a.end] {
                if let Site::D1(i) | Site::D2(i) = s {
                    v.insert((i, qa.index));
                }
            }
        }
    }
    v.into_iter().collect()
}

/// Glue knot exteriors into the companion tori of a four-group wiring.
pub fn insert_knot_spaces(qt: &QuotientTangle, labels: &[u64]) -> Result<QuotientTangle, TangleError> {
    if qt.scheme != WiringScheme::FourGroup {
        return Err(TangleError::NotFourGroup);
    }
    if labels.len() != qt.slots.len() {
        return Err(TangleError::LabelCountMismatch { expected: qt.slots.len(), got: labels.len() });
    }
    let mut out = qt.clone();
    for (slot, &l) in out.slots.iter_mut().zip(labels) {
        slot.knot_label = Some(l);
        slot.ball_recorded = true;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn n2_first_component() {
        let th = build_theta(2).unwrap();
        assert_eq!(th.m, 1);
        let c = &th.components[0];
        assert_eq!(c.start().coords(), (2, 0, 0));
        assert_eq!(c.end().coords(), (17, 0, 3));
        let roles: Vec<_> = c
            .chain
            .iter()
            .map(|p| match p {
                ChainPiece::Level(s) => format!("{:?}{}{}", s.role, s.level, s.column),
                ChainPiece::Braid { role, upward, .. } => format!("{role:?}{}", if *upward { "^" } else { "v" }),
            })
            .collect();
        assert_eq!(roles, ["Alpha01", "Av", "Delta12", "B^", "Gamma01", "Cv", "Alpha12"]);
    }

    #[test]
    fn phi_rows_n3() {
        let th = build_theta(3).unwrap();
        assert_eq!(th.phi, vec![vec![1, 2, 3], vec![2, 1, 3], vec![3, 1, 2], vec![3, 2, 1]]);
    }

    #[test]
    fn adjacency_examples() {
        let t2 = build_theta(2).unwrap();
        let t3 = build_theta(3).unwrap();
        assert_eq!(adjacency_witness(&t2, 1, 2), Ok(0));
        assert_eq!(adjacency_witness(&t3, 1, 3), Ok(1));
        assert_eq!(adjacency_witness(&t3, 2, 3), Ok(0));
        assert!(adjacency_witness(&t3, 2, 2).is_err());
    }

    #[test]
    fn incidence_n2() {
        let th = build_theta(2).unwrap();
        assert_eq!(disk_incidence(&th, 1, 0), Ok(1));
        assert_eq!(disk_incidence(&th, 1, 1), Ok(3));
        assert_eq!(disk_incidence(&th, 1, 3), Ok(1));
        assert!(disk_incidence(&th, 1, 4).is_err());
    }

    #[test]
    fn subtangle_selection() {
        let th = build_theta(3).unwrap();
        assert_eq!(select_subtangle(&th, []), Err(TangleError::EmptySubset));
        let s = select_subtangle(&th, [2]).unwrap();
        let cols: BTreeSet<u32> = (0..=th.m).flat_map(|i| s.columns_at(i)).collect();
        assert_eq!(cols, BTreeSet::from([1, 2]));
        let t2 = build_theta(2).unwrap();
        let s1 = select_subtangle(&t2, [1]).unwrap();
        assert_eq!(s1.columns_at(0), BTreeSet::from([1]));
        assert_eq!(s1.columns_at(1), BTreeSet::from([2]));
    }

    #[test]
    fn extents() {
        let b = BlockId::new(BlockKind::BLayer, 1, 2).extent(3).unwrap();
        assert_eq!(b.x, (9, 19));
        assert_eq!(b.z, (2, 3));
        let k = BlockId::new(BlockKind::KOverlap, 1, 0).extent(3).unwrap();
        assert_eq!((k.x, k.z), ((0, 1), (1, 2)));
        assert!(BlockId::new(BlockKind::CLayer, 0, 1).extent(3).is_err());
        assert_eq!(box_extent(3).z, (0, 7));
    }

    #[test]
    fn three_group_wiring() {
        let qt = wire_solid_torus(WiringScheme::ThreeGroup, 1).unwrap();
        assert_eq!(qt.quotient_arcs.len(), 1);
        assert_eq!(qt.quotient_arcs[0].meridian_crossings, 2);
        let qt2 = wire_solid_torus(WiringScheme::ThreeGroup, 2).unwrap();
        assert_eq!(qt2.splitting_chi(2), -3);
        assert_eq!(wire_solid_torus(WiringScheme::ThreeGroup, 0), Err(TangleError::ZeroArcs));
    }

    #[test]
    fn four_group_wiring() {
        let qt = wire_solid_torus(WiringScheme::FourGroup, 3).unwrap();
        assert_eq!(qt.arcs.len(), 12);
        assert!(qt.disk_meets.iter().all(|(i, j)| i == j));
        let beta = qt.arcs.iter().find(|a| a.group == ArcGroup::Beta && a.index == 2).unwrap();
        assert_eq!((beta.start, beta.end), (Site::Outer, Site::D1(2)));
        for qa in &qt.quotient_arcs {
            assert_eq!(qa.pieces.len(), 4);
            assert_eq!(qa.meridian_crossings, 3);
        }
        let lab = insert_knot_spaces(&qt, &[5, 7, 9]).unwrap();
        assert_eq!(lab.slots.iter().map(|s| s.knot_label.unwrap()).collect::<Vec<_>>(), [5, 7, 9]);
        assert!(lab.slots.iter().all(|s| s.ball_recorded));
        let back: QuotientTangle = serde_json::from_str(&serde_json::to_string(&lab).unwrap()).unwrap();
        assert_eq!(back, lab);
        assert!(matches!(insert_knot_spaces(&qt, &[1]), Err(TangleError::LabelCountMismatch { .. })));
        let three = wire_solid_torus(WiringScheme::ThreeGroup, 1).unwrap();
        assert_eq!(insert_knot_spaces(&three, &[3]), Err(TangleError::NotFourGroup));
    }

    proptest! {
        #[test]
        fn theta_invariants(n in 2u32..=9) {
            let th = build_theta(n).unwrap();
            prop_assert_eq!(th.components.len() as u32, n);
            for row in &th.phi {
                let s: BTreeSet<u32> = row.iter().copied().collect();
                prop_assert_eq!(s, (1..=n).collect::<BTreeSet<_>>());
            }
            for c in &th.components {
                for w in c.chain.windows(2) {
                    prop_assert_eq!(w[0].end(), w[1].start());
                }
                prop_assert_eq!(c.start(), LatticePoint::new(0, Role::A, c.index));
                prop_assert_eq!(c.end(), LatticePoint::new(2 * th.m + 1, Role::C, n + 1 - c.index));
                prop_assert_ne!(c.start(), c.end());
            }
            // Each braid strand in the chain matches the braid's own permutation.
            for c in &th.components {
                for piece in &c.chain {
                    if let ChainPiece::Braid { braid, top, bottom, .. } = piece {
                        prop_assert_eq!(th.braid_permutation(*braid).apply(top.q), bottom.q);
                    }
                }
            }
        }
    }
}
