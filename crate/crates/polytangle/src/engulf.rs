//! Occupancy traces and engulfing certificates for subtangles of θ.
//!
//! Every block spans the full `y` range, so the box is modelled as a grid of
//! cells in the `(x, z)` plane: layer `ℓ` covers `z ∈ [ℓ, ℓ+1]` (even layers
//! are `B_i`, odd layers `C_i`), and column `x` alternates overlaps (even)
//! and bricks (odd). A region is a set of cells; it is a ball exactly when
//! the cell set is a disk. Interfaces between regions are unions of shared
//! cell edges, and only horizontal brick faces carry punctures.
//!
//! The certificate is a flat arena of nodes so that deep derivations
//! serialize without recursion limits.

use crate::tangle::{
    self, BlockId, BlockKind, ChainPiece, Subtangle, TangleError, ThetaComplex,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

pub type ColumnSet = BTreeSet<u32>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngulfError {
    #[error("step {step}: case bookkeeping mismatch: {detail}")]
    CaseMismatch { step: u32, detail: String },
    #[error("step {step:?}: interface component has {punctures} punctures (need at least 2)")]
    PunctureDeficit { step: Option<u32>, punctures: u32 },
    #[error("step {step:?}: interface is not a disk: {detail}")]
    InterfaceNotDisk { step: Option<u32>, detail: String },
    #[error("step {step:?}: block set cannot be adjoined as a ball: {detail}")]
    NonBallAdjunct { step: Option<u32>, detail: String },
    #[error(transparent)]
    Tangle(#[from] TangleError),
}

// ---------------------------------------------------------------------------
// Occupancy

/// Column occupancy of a subtangle, level by level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyTrace {
    /// `J_0 … J_m`.
    pub j: Vec<ColumnSet>,
    /// `I_1 … I_m`, stored from index 0.
    pub i: Vec<ColumnSet>,
    /// `T_0 … T_m`.
    pub t: Vec<ColumnSet>,
    /// `S_1 … S_m`, stored from index 0.
    pub s: Vec<ColumnSet>,
}

impl OccupancyTrace {
    pub fn m(&self) -> usize {
        self.j.len() - 1
    }
}

/// Occupancy read off the component chains: `J_i` from the level arcs and
/// `I_i` from the columns the braid strands pass through.
pub fn occupancy_trace(sub: &Subtangle) -> OccupancyTrace {
    let th = &sub.parent;
    let m = th.m as usize;
    let mut j = vec![ColumnSet::new(); m + 1];
    let mut i = vec![ColumnSet::new(); m];
    for comp in sub.components() {
        for piece in &comp.chain {
            match piece {
                ChainPiece::Level(s) => {
                    j[s.level as usize].insert(s.column);
                }
                ChainPiece::Braid { braid, top, bottom, .. } => {
                    let (a, b) = (top.column(), bottom.column());
                    for c in a.min(b)..=a.max(b) {
                        i[(*braid - 1) as usize].insert(c);
                    }
                }
            }
        }
    }
    let mut t = Vec::with_capacity(m + 1);
    let mut acc = ColumnSet::new();
    for ji in &j {
        acc.extend(ji);
        t.push(acc.clone());
    }
    let mut s = Vec::with_capacity(m);
    let mut acc = ColumnSet::new();
    for ii in &i {
        acc.extend(ii);
        s.push(acc.clone());
    }
    OccupancyTrace { j, i, t, s }
}

/// Case of the transition `J_i → J_{i+1}` under `Σ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCase {
    pub index: u32,
    pub t: u32,
    pub case: u8,
    pub t_minus_1_in: bool,
    pub t_plus_2_in: bool,
}

pub fn classify_step(j_i: &ColumnSet, t: u32) -> StepCase {
    let (a, b) = (j_i.contains(&t), j_i.contains(&(t + 1)));
    let case = match (a, b) {
        (true, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
        (false, true) => 4,
    };
    StepCase {
        index: 0,
        t,
        case,
        t_minus_1_in: t > 1 && j_i.contains(&(t - 1)),
        t_plus_2_in: j_i.contains(&(t + 2)),
    }
}

/// `(I_{i+1}, J_{i+1})` predicted by the case rules.
pub fn case_rule(j_i: &ColumnSet, t: u32) -> (ColumnSet, ColumnSet) {
    let c = classify_step(j_i, t);
    let mut i_next = j_i.clone();
    let mut j_next = j_i.clone();
    match c.case {
        3 => {
            i_next.insert(t + 1);
            j_next = i_next.clone();
            j_next.remove(&t);
        }
        4 => {
            i_next.insert(t);
            j_next = i_next.clone();
            j_next.remove(&(t + 1));
        }
        _ => {}
    }
    (i_next, j_next)
}

/// Check every transition of `trace` against the case rules and `S_i = T_i`.
pub fn check_trace_rules(trace: &OccupancyTrace, letters: &[u32]) -> Result<(), String> {
    for (k, &t) in letters.iter().enumerate() {
        let (i_next, j_next) = case_rule(&trace.j[k], t);
        if i_next != trace.i[k] || j_next != trace.j[k + 1] {
            return Err(format!(
                "step {}: rule gives I={:?} J={:?}, trace has I={:?} J={:?}",
                k + 1,
                i_next,
                j_next,
                trace.i[k],
                trace.j[k + 1]
            ));
        }
        if trace.s[k] != trace.t[k + 1] {
            return Err(format!("S_{} != T_{}", k + 1, k + 1));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gluing checks

/// One connected component of a gluing interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceComponent {
    pub punctures: u32,
    pub is_disk_portion: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GluingCheck {
    pub components: Vec<InterfaceComponent>,
    pub verdict: bool,
}

/// A gluing passes when the interface is non-empty and every disk portion
/// has at least two punctures (χ = 1 - k < 0).
pub fn check_gluing(interfaces: &[InterfaceComponent]) -> GluingCheck {
    let verdict = !interfaces.is_empty()
        && interfaces.iter().all(|c| !c.is_disk_portion || c.punctures >= 2);
    GluingCheck { components: interfaces.to_vec(), verdict }
}

// ---------------------------------------------------------------------------
// Cell grid

/// A cell of the `(x, z)` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub layer: u32,
    pub x: u32,
}

impl Cell {
    pub fn block(self) -> BlockId {
        let even_layer = self.layer % 2 == 0;
        let level = if even_layer { self.layer / 2 } else { (self.layer + 1) / 2 };
        let (kind, column) = match (even_layer, self.x % 2 == 1) {
            (true, true) => (BlockKind::BBrick, (self.x + 1) / 2),
            (true, false) => (BlockKind::NOverlap, self.x / 2),
            (false, true) => (BlockKind::CBrick, (self.x + 1) / 2),
            (false, false) => (BlockKind::KOverlap, self.x / 2),
        };
        BlockId::new(kind, level, column)
    }

    pub fn from_block(b: BlockId) -> Option<Cell> {
        let (layer, x) = match b.kind {
            BlockKind::BBrick => (2 * b.level, (2 * b.column).checked_sub(1)?),
            BlockKind::NOverlap => (2 * b.level, 2 * b.column),
            BlockKind::CBrick => ((2 * b.level).checked_sub(1)?, (2 * b.column).checked_sub(1)?),
            BlockKind::KOverlap => ((2 * b.level).checked_sub(1)?, 2 * b.column),
            BlockKind::BLayer | BlockKind::CLayer => return None,
        };
        Some(Cell { layer, x })
    }
}

/// Cells of the layer block `B_{i,j}` or `C_{i,j}`.
fn block_cells(b: BlockId) -> Vec<Cell> {
    let layer = match b.kind {
        BlockKind::BLayer => 2 * b.level,
        BlockKind::CLayer => 2 * b.level - 1,
        _ => return Cell::from_block(b).into_iter().collect(),
    };
    (2 * b.column - 2..=2 * b.column).map(|x| Cell { layer, x }).collect()
}

type Edge = ((u32, u32), (u32, u32));

/// Occupancy data for one subtangle, shared by the builder and the validator.
struct Grid<'a> {
    theta: &'a ThetaComplex,
    layers: u32,
    cols: u32,
    /// `j[i]` is `J_i`.
    j: Vec<ColumnSet>,
    /// `active[i-1]` tells whether braid `β_i` carries selected strands.
    active: Vec<bool>,
    /// Punctures of the face between layers `p-1` and `p` at brick column `j`,
    /// keyed by `(p, j)`.
    punctures: BTreeMap<(u32, u32), u32>,
}

impl<'a> Grid<'a> {
    /// Build from the lattice points on the chosen chains.
    fn from_chains(sub: &'a Subtangle) -> Self {
        let theta = &sub.parent;
        let trace = occupancy_trace(sub);
        let mut punctures = BTreeMap::new();
        for comp in sub.components() {
            let pts: BTreeSet<_> = comp.chain.iter().flat_map(|c| [c.start(), c.end()]).collect();
            for pt in pts {
                *punctures.entry((pt.p, pt.column())).or_insert(0) += 1;
            }
        }
        Self::assemble(theta, trace.j, punctures)
    }

    /// Build from `φ` and `disk_incidence` alone.
    fn from_phi(theta: &'a ThetaComplex, subset: &ColumnSet) -> Result<Self, TangleError> {
        let j: Vec<ColumnSet> = (0..=theta.m)
            .map(|i| subset.iter().map(|&c| theta.phi_at(i, c)).collect())
            .collect();
        let mut punctures = BTreeMap::new();
        for p in 0..=2 * theta.m + 1 {
            for &c in subset {
                let k = tangle::disk_incidence(theta, c, p)?;
                *punctures.entry((p, theta.phi_at(p / 2, c))).or_insert(0) += k;
            }
        }
        Ok(Self::assemble(theta, j, punctures))
    }

    fn assemble(theta: &'a ThetaComplex, j: Vec<ColumnSet>, punctures: BTreeMap<(u32, u32), u32>) -> Self {
        let active = (1..=theta.m)
            .map(|i| {
                let t = theta.braids.letters[(i - 1) as usize];
                let prev = &j[(i - 1) as usize];
                prev.contains(&t) || prev.contains(&(t + 1))
            })
            .collect();
        Grid { theta, layers: 2 * theta.m + 1, cols: 2 * theta.n + 1, j, active, punctures }
    }

    fn letter(&self, level: u32) -> u32 {
        self.theta.braids.letters[(level - 1) as usize]
    }

    fn all_cells(&self) -> BTreeSet<Cell> {
        (0..self.layers).flat_map(|layer| (0..self.cols).map(move |x| Cell { layer, x })).collect()
    }

    fn contains(&self, c: Cell) -> bool {
        c.layer < self.layers && c.x < self.cols
    }

    /// Whether θ̂ meets the cell.
    fn touched(&self, c: Cell) -> bool {
        if c.layer % 2 == 0 {
            let j = &self.j[(c.layer / 2) as usize];
            if c.x % 2 == 1 {
                j.contains(&((c.x + 1) / 2))
            } else {
                let k = c.x / 2;
                j.contains(&k) || j.contains(&(k + 1))
            }
        } else {
            let level = (c.layer + 1) / 2;
            let prev = &self.j[(level - 1) as usize];
            let t = self.letter(level);
            let act = self.active[(level - 1) as usize];
            if c.x % 2 == 1 {
                let col = (c.x + 1) / 2;
                prev.contains(&col) || (act && (col == t || col == t + 1))
            } else {
                act && c.x / 2 == t
            }
        }
    }

    /// Whether θ̂ crosses the vertical face between `(layer, x)` and `(layer, x+1)`
    /// other than in a clean transverse way.
    fn tangled_vertical(&self, layer: u32, x: u32) -> bool {
        if layer % 2 == 0 {
            let j = &self.j[(layer / 2) as usize];
            let brick = if x % 2 == 1 { (x + 1) / 2 } else { (x + 2) / 2 };
            j.contains(&brick)
        } else {
            let level = (layer + 1) / 2;
            let t = self.letter(level);
            self.active[(level - 1) as usize] && (x == 2 * t - 1 || x == 2 * t)
        }
    }

    /// Punctures on the horizontal face above cell `(p, x)` (plane `H_p`).
    fn horizontal_punctures(&self, p: u32, x: u32) -> u32 {
        if x % 2 == 0 {
            return 0;
        }
        self.punctures.get(&(p, (x + 1) / 2)).copied().unwrap_or(0)
    }

    /// Columns where strands entering `C_level` at brick `col` land.
    fn landing(&self, level: u32, col: u32) -> Option<u32> {
        let prev = &self.j[(level - 1) as usize];
        if !prev.contains(&col) {
            return None;
        }
        let t = self.letter(level);
        Some(if col == t {
            t + 1
        } else if col == t + 1 {
            t
        } else {
            col
        })
    }

    fn arcs_per_column(&self, level: u32) -> u32 {
        if level == 0 || level == self.theta.m {
            2
        } else {
            3
        }
    }

    /// Cells of the level-`i` layer blocks for columns in `cols`, plus the
    /// C-layer blocks for levels `1..=i`.
    fn region_cells(&self, upto: u32, cols: &ColumnSet) -> BTreeSet<Cell> {
        let mut out = BTreeSet::new();
        for &j in cols {
            for r in 0..=upto {
                out.extend(block_cells(BlockId::new(BlockKind::BLayer, r, j)));
                if r >= 1 {
                    out.extend(block_cells(BlockId::new(BlockKind::CLayer, r, j)));
                }
            }
        }
        out
    }
}

fn neighbors(c: Cell) -> impl Iterator<Item = Cell> {
    let mut v = Vec::with_capacity(4);
    if c.x > 0 {
        v.push(Cell { layer: c.layer, x: c.x - 1 });
    }
    v.push(Cell { layer: c.layer, x: c.x + 1 });
    if c.layer > 0 {
        v.push(Cell { layer: c.layer - 1, x: c.x });
    }
    v.push(Cell { layer: c.layer + 1, x: c.x });
    v.into_iter()
}

/// Cells sharing a face or a corner with `c`.
fn around(c: Cell) -> impl Iterator<Item = Cell> {
    let (l, x) = (c.layer as i64, c.x as i64);
    (-1i64..=1)
        .flat_map(move |dl| (-1i64..=1).map(move |dx| (l + dl, x + dx)))
        .filter(move |&(a, b)| a >= 0 && b >= 0 && (a, b) != (l, x))
        .map(|(a, b)| Cell { layer: a as u32, x: b as u32 })
}

fn corners(c: Cell) -> [(u32, u32); 4] {
    let (x, z) = (c.x, c.layer);
    [(x, z), (x + 1, z), (x, z + 1), (x + 1, z + 1)]
}

/// Shared edge between two face-adjacent cells, in grid-vertex coordinates `(x, z)`.
fn shared_edge(a: Cell, b: Cell) -> Edge {
    if a.layer == b.layer {
        let x = a.x.max(b.x);
        ((x, a.layer), (x, a.layer + 1))
    } else {
        let z = a.layer.max(b.layer);
        ((a.x, z), (a.x + 1, z))
    }
}

/// Face-connected components, ordered by their least cell.
fn components(cells: &BTreeSet<Cell>) -> Vec<BTreeSet<Cell>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &c in cells {
        if seen.contains(&c) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut q = VecDeque::from([c]);
        seen.insert(c);
        while let Some(u) = q.pop_front() {
            comp.insert(u);
            for v in neighbors(u) {
                if cells.contains(&v) && seen.insert(v) {
                    q.push_back(v);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Why a cell set fails to be a disk, if it does.
fn disk_defect(cells: &BTreeSet<Cell>) -> Option<String> {
    if cells.is_empty() {
        return Some("empty".into());
    }
    if components(cells).len() != 1 {
        return Some("not connected".into());
    }
    let mut verts = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for &c in cells {
        let [a, b, cc, d] = corners(c);
        verts.extend([a, b, cc, d]);
        edges.extend([(a, b), (cc, d), (a, cc), (b, d)]);
    }
    for &(x, z) in &verts {
        if x == 0 || z == 0 {
            continue;
        }
        let has = |dx: u32, dz: u32| cells.contains(&Cell { layer: z - dz, x: x - dx });
        let (nw, ne, sw, se) = (has(1, 1), has(0, 1), has(1, 0), has(0, 0));
        if (nw && se && !ne && !sw) || (ne && sw && !nw && !se) {
            return Some(format!("pinched at vertex ({x}, {z})"));
        }
    }
    let chi = verts.len() as i64 - edges.len() as i64 + cells.len() as i64;
    if chi != 1 {
        return Some(format!("has {} hole(s)", 1 - chi));
    }
    None
}

/// Maximal horizontal runs, as `(layer, x_lo, x_hi)`.
fn row_runs(cells: &BTreeSet<Cell>) -> Vec<(u32, u32, u32)> {
    let mut out: Vec<(u32, u32, u32)> = Vec::new();
    for &c in cells {
        match out.last_mut() {
            Some(r) if r.0 == c.layer && r.2 + 1 == c.x => r.2 = c.x,
            _ => out.push((c.layer, c.x, c.x)),
        }
    }
    out
}

/// Check that the row rectangles of `cells` form a tree of disk contacts.
fn row_tree_defect(cells: &BTreeSet<Cell>) -> Option<String> {
    let runs = row_runs(cells);
    let mut edges = 0usize;
    for (a, ra) in runs.iter().enumerate() {
        for rb in runs.iter().skip(a + 1) {
            if rb.0 == ra.0 + 1 && ra.1.max(rb.1) <= ra.2.min(rb.2) {
                edges += 1;
            }
        }
    }
    if components(cells).len() != 1 {
        return Some("row rectangles not connected".into());
    }
    if edges + 1 != runs.len() {
        return Some("row rectangles contain a cycle".into());
    }
    disk_defect(cells)
}

/// The interface between two disjoint cell sets.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Interface {
    components: Vec<InterfaceComponent>,
    defect: Option<String>,
}

fn interface(grid: &Grid, a: &BTreeSet<Cell>, b: &BTreeSet<Cell>) -> Interface {
    let mut edges: Vec<(Edge, u32)> = Vec::new();
    let mut defect = None;
    for &ca in a {
        for cb in neighbors(ca) {
            if !b.contains(&cb) {
                continue;
            }
            let e = shared_edge(ca, cb);
            let punct = if ca.layer == cb.layer {
                if grid.tangled_vertical(ca.layer, ca.x.min(cb.x)) {
                    defect = Some(format!("tangle crosses the vertical face at {:?}", e));
                }
                0
            } else {
                grid.horizontal_punctures(ca.layer.max(cb.layer), ca.x)
            };
            edges.push((e, punct));
        }
    }
    // Union edges through shared vertices.
    let mut parent: Vec<usize> = (0..edges.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    let mut at: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (k, ((p, q), _)) in edges.iter().enumerate() {
        at.entry(*p).or_default().push(k);
        at.entry(*q).or_default().push(k);
    }
    for ks in at.values() {
        for w in ks.windows(2) {
            let (r1, r2) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[r1] = r2;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..edges.len() {
        let r = find(&mut parent, k);
        groups.entry(r).or_default().push(k);
    }
    let mut comps = Vec::new();
    for ks in groups.values() {
        let mut deg: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for &k in ks {
            *deg.entry(edges[k].0 .0).or_default() += 1;
            *deg.entry(edges[k].0 .1).or_default() += 1;
        }
        let is_path = deg.values().all(|&d| d <= 2) && deg.len() == ks.len() + 1;
        if !is_path && defect.is_none() {
            defect = Some("interface component is a loop or branches".into());
        }
        comps.push(InterfaceComponent {
            punctures: ks.iter().map(|&k| edges[k].1).sum(),
            is_disk_portion: is_path,
        });
    }
    // Corner-only contacts pinch the union.
    if defect.is_none() {
        let on_edge: BTreeSet<(u32, u32)> = at.keys().copied().collect();
        let vb: BTreeSet<(u32, u32)> = b.iter().flat_map(|&c| corners(c)).collect();
        if let Some(v) = a.iter().flat_map(|&c| corners(c)).find(|v| vb.contains(v) && !on_edge.contains(v)) {
            defect = Some(format!("regions touch only at vertex {v:?}"));
        }
    }
    Interface { components: comps, defect }
}

// ---------------------------------------------------------------------------
// Certificates

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertNode {
    /// The component of `B̂_level` over columns `lo..=hi`, with an optional
    /// collar of C-layer cells above it carrying braid strands into it.
    Leaf { level: u32, lo: u32, hi: u32, arcs: u32, collar: Vec<BlockId> },
    Glue { children: Vec<usize>, check: GluingCheck, step: Option<u32> },
    BallAdjunction { child: usize, blocks: Vec<BlockId>, interface_count: u32, step: Option<u32> },
}

/// Named block sets from the inductive step, built from their definitions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSets {
    pub p: Vec<BlockId>,
    pub q: Vec<BlockId>,
    pub u: Vec<BlockId>,
    pub u_bricks: Vec<BlockId>,
    pub u_t: Vec<BlockId>,
    pub u_t1: Vec<BlockId>,
    pub l: Vec<BlockId>,
    pub x: Vec<BlockId>,
    pub y: Vec<BlockId>,
    pub y_tilde: Vec<BlockId>,
    pub z: Vec<BlockId>,
    pub v: Vec<BlockId>,
    pub w: Vec<BlockId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub case: StepCase,
    pub sets: StepSets,
    /// Whether `U` is the single column stack above the entering column.
    pub u_is_single_stack: bool,
    /// Number of separate tangle-carrying regions after the step.
    pub groups_after: u32,
    /// Cells of `R_{i+1}` left for later because they touch several regions.
    pub deferred_cells: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcellenceCertificate {
    pub n: u32,
    pub subset: Vec<u32>,
    pub nodes: Vec<CertNode>,
    pub root: usize,
    pub steps: Vec<StepRecord>,
    pub untouched_columns: Vec<u32>,
    pub notes: Vec<String>,
}

impl ExcellenceCertificate {
    pub fn glue_checks(&self) -> impl Iterator<Item = &GluingCheck> {
        self.nodes.iter().filter_map(|n| match n {
            CertNode::Glue { check, .. } => Some(check),
            _ => None,
        })
    }
}

struct Region {
    cells: BTreeSet<Cell>,
    node: usize,
}

struct Builder<'a> {
    grid: Grid<'a>,
    nodes: Vec<CertNode>,
    regions: Vec<Region>,
    components: Vec<u32>,
    /// `groups[s][k]`: representative of component `components[k]` once
    /// level `s` is reached. Components merge when their columns are adjacent.
    groups: Vec<Vec<usize>>,
}

impl<'a> Builder<'a> {
    fn push(&mut self, n: CertNode) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    fn new(sub: &'a Subtangle) -> Self {
        let grid = Grid::from_chains(sub);
        let components: Vec<u32> = sub.j0.iter().copied().collect();
        let mut rep: Vec<usize> = (0..components.len()).collect();
        let mut groups = Vec::new();
        for s in 0..=grid.theta.m {
            for a in 0..components.len() {
                for c in 0..components.len() {
                    let (pa, pc) = (grid.theta.phi_at(s, components[a]), grid.theta.phi_at(s, components[c]));
                    if pa + 1 == pc {
                        let (ra, rc) = (rep[a], rep[c]);
                        for r in rep.iter_mut() {
                            if *r == rc {
                                *r = ra;
                            }
                        }
                    }
                }
            }
            groups.push(rep.clone());
        }
        Builder { grid, nodes: Vec::new(), regions: Vec::new(), components, groups }
    }

    /// Indices of the components meeting a touched cell.
    fn cell_components(&self, c: Cell) -> Vec<usize> {
        let th = self.grid.theta;
        let (level, cols): (u32, Vec<u32>) = if c.layer % 2 == 0 {
            let lv = c.layer / 2;
            let cols = if c.x % 2 == 1 { vec![(c.x + 1) / 2] } else { vec![c.x / 2, c.x / 2 + 1] };
            (lv, cols)
        } else {
            let lv = (c.layer + 1) / 2;
            let t = self.grid.letter(lv);
            let col = (c.x + 1) / 2;
            let cols = if c.x % 2 == 0 || col == t || col == t + 1 { vec![t, t + 1] } else { vec![col] };
            (lv - 1, cols)
        };
        (0..self.components.len())
            .filter(|&k| cols.contains(&th.phi_at(level, self.components[k])))
            .collect()
    }

    /// Level at which a cell's layer is built.
    fn level_of(c: Cell) -> u32 {
        (c.layer + 1) / 2
    }

    /// Whether every touched cell around `chunk` that is not built yet will
    /// belong to the group of `region` when it appears.
    fn future_safe(&self, region: &BTreeSet<Cell>, chunk: &BTreeSet<Cell>, now: u32) -> bool {
        let mine: Vec<usize> = region
            .iter()
            .filter(|&&c| self.grid.touched(c))
            .flat_map(|&c| self.cell_components(c))
            .collect();
        let Some(&me) = mine.first() else { return true };
        chunk.iter().flat_map(|&c| around(c)).all(|y| {
            if !self.grid.contains(y) || !self.grid.touched(y) || Self::level_of(y) <= now {
                return true;
            }
            let g = &self.groups[Self::level_of(y) as usize];
            self.cell_components(y).iter().all(|&k| g[k] == g[me])
        })
    }

    fn covered(&self) -> BTreeSet<Cell> {
        self.regions.iter().flat_map(|r| r.cells.iter().copied()).collect()
    }

    fn leaf(&mut self, level: u32, lo: u32, hi: u32, collar: BTreeSet<Cell>) -> Result<Region, EngulfError> {
        let node = CertNode::Leaf {
            level,
            lo,
            hi,
            arcs: self.grid.arcs_per_column(level) * (hi - lo + 1),
            collar: collar.iter().map(|c| c.block()).collect(),
        };
        let cells = leaf_cells(&self.grid, &node).map_err(|d| EngulfError::CaseMismatch { step: level, detail: d })?;
        let id = self.push(node);
        Ok(Region { cells, node: id })
    }

    /// Glue region `b` onto region `a`.
    fn glue(&mut self, a: Region, b: Region, step: Option<u32>) -> Result<Region, EngulfError> {
        let itf = interface(&self.grid, &a.cells, &b.cells);
        if let Some(d) = itf.defect {
            return Err(EngulfError::InterfaceNotDisk { step, detail: d });
        }
        let check = check_gluing(&itf.components);
        if !check.verdict {
            let punctures = itf.components.iter().map(|c| c.punctures).min().unwrap_or(0);
            return Err(EngulfError::PunctureDeficit { step, punctures });
        }
        let mut cells = a.cells;
        cells.extend(b.cells);
        if let Some(d) = disk_defect(&cells) {
            return Err(EngulfError::InterfaceNotDisk { step, detail: format!("glued region {d}") });
        }
        let node = self.push(CertNode::Glue { children: vec![a.node, b.node], check, step });
        Ok(Region { cells, node })
    }

    /// Try to adjoin a θ̂-free chunk to the single region it touches.
    fn try_adjoin(&mut self, chunk: &BTreeSet<Cell>, step: Option<u32>) -> bool {
        let touching: Vec<usize> = (0..self.regions.len())
            .filter(|&k| chunk.iter().any(|&c| around(c).any(|d| self.regions[k].cells.contains(&d))))
            .collect();
        if touching.len() != 1 {
            return false;
        }
        let k = touching[0];
        if ball_defect(&self.grid, &self.regions[k].cells, chunk).is_some() {
            return false;
        }
        if let Some(now) = step {
            if !self.future_safe(&self.regions[k].cells, chunk, now) {
                return false;
            }
        }
        let node = self.push(CertNode::BallAdjunction {
            child: self.regions[k].node,
            blocks: chunk.iter().map(|c| c.block()).collect(),
            interface_count: 1,
            step,
        });
        let r = &mut self.regions[k];
        r.cells.extend(chunk.iter().copied());
        r.node = node;
        true
    }

    /// Adjoin every uncovered cell of `target` that can be adjoined.
    fn fill(&mut self, target: &BTreeSet<Cell>, step: Option<u32>) -> BTreeSet<Cell> {
        loop {
            let covered = self.covered();
            let free: BTreeSet<Cell> = target.difference(&covered).copied().collect();
            let mut progress = false;
            for chunk in components(&free) {
                if self.try_adjoin(&chunk, step) {
                    progress = true;
                    continue;
                }
                for (layer, lo, hi) in row_runs(&chunk) {
                    let row: BTreeSet<Cell> = (lo..=hi).map(|x| Cell { layer, x }).collect();
                    if self.try_adjoin(&row, step) {
                        progress = true;
                    }
                }
            }
            if !progress {
                let covered = self.covered();
                return target.difference(&covered).copied().collect();
            }
        }
    }
}

/// Why `chunk` cannot be adjoined to `region` as a ball meeting it in one disk.
fn ball_defect(grid: &Grid, region: &BTreeSet<Cell>, chunk: &BTreeSet<Cell>) -> Option<String> {
    if let Some(c) = chunk.iter().find(|&&c| grid.touched(c) || !grid.contains(c)) {
        return Some(format!("cell {:?} meets the tangle or lies outside the box", c.block()));
    }
    if let Some(c) = chunk.iter().find(|c| region.contains(c)) {
        return Some(format!("cell {:?} already in the region", c.block()));
    }
    if let Some(d) = row_tree_defect(chunk) {
        return Some(d);
    }
    let itf = interface(grid, region, chunk);
    if let Some(d) = itf.defect {
        return Some(d);
    }
    if itf.components.len() != 1 {
        return Some(format!("meets the region in {} pieces", itf.components.len()));
    }
    None
}

/// Cells of a leaf node, checking its own validity.
fn leaf_cells(grid: &Grid, node: &CertNode) -> Result<BTreeSet<Cell>, String> {
    let CertNode::Leaf { level, lo, hi, arcs, collar } = node else {
        return Err("not a leaf".into());
    };
    let (level, lo, hi) = (*level, *lo, *hi);
    if level > grid.theta.m || lo == 0 || lo > hi || hi > grid.theta.n {
        return Err(format!("leaf range {lo}..={hi} at level {level} out of bounds"));
    }
    let w = grid.arcs_per_column(level) * (hi - lo + 1);
    if *arcs != w || w < 2 {
        return Err(format!("leaf records {arcs} arcs, expected {w} (need at least 2)"));
    }
    let jl = &grid.j[level as usize];
    if let Some(c) = (lo..=hi).find(|c| !jl.contains(c)) {
        return Err(format!("column {c} unoccupied at level {level}"));
    }
    let layer = 2 * level;
    let mut cells: BTreeSet<Cell> = (2 * lo - 2..=2 * hi).map(|x| Cell { layer, x }).collect();
    let left = (lo >= 2).then(|| 2 * lo - 3);
    let right = (2 * hi + 1 < grid.cols).then_some(2 * hi);
    if let Some(x) = left.into_iter().chain(right).find(|&x| grid.tangled_vertical(layer, x)) {
        return Err(format!("leaf boundary at x={x} cuts the tangle"));
    }
    if collar.is_empty() {
        return Ok(cells);
    }
    if level == 0 {
        return Err("level-0 leaf cannot have a collar".into());
    }
    let col: BTreeSet<Cell> = collar
        .iter()
        .map(|&b| Cell::from_block(b).ok_or_else(|| format!("{b:?} is not an atomic block")))
        .collect::<Result<_, _>>()?;
    let cl = layer - 1;
    if col.iter().any(|c| c.layer != cl || !grid.contains(*c)) {
        return Err("collar cells must lie in the layer above".into());
    }
    let (ca, cb) = (col.first().unwrap().x, col.last().unwrap().x);
    if col.len() as u32 != cb - ca + 1 {
        return Err("collar is not contiguous".into());
    }
    if ca.max(2 * lo - 2) > cb.min(2 * hi) {
        return Err("collar does not sit on the leaf".into());
    }
    if (ca > 0 && grid.tangled_vertical(cl, ca - 1)) || (cb + 1 < grid.cols && grid.tangled_vertical(cl, cb)) {
        return Err("collar boundary cuts the braid".into());
    }
    for c in &col {
        if c.x % 2 == 1 {
            if let Some(land) = grid.landing(level, (c.x + 1) / 2) {
                if land < lo || land > hi {
                    return Err(format!("collar strand from column {} lands outside the leaf", (c.x + 1) / 2));
                }
            }
        }
    }
    cells.extend(col);
    Ok(cells)
}

fn runs(cols: &ColumnSet) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = Vec::new();
    for &c in cols {
        match out.last_mut() {
            Some(r) if r.1 + 1 == c => r.1 = c,
            _ => out.push((c, c)),
        }
    }
    out
}

fn run_containing(cols: &ColumnSet, c: u32) -> Option<(u32, u32)> {
    runs(cols).into_iter().find(|&(a, b)| a <= c && c <= b)
}

fn layer_blocks(kind: BlockKind, level: u32, cols: impl IntoIterator<Item = u32>) -> Vec<BlockId> {
    cols.into_iter().map(|j| BlockId::new(kind, level, j)).collect()
}

/// Named sets for step `i → i+1` under `Σ_t`.
fn step_sets(tr: &OccupancyTrace, i: u32, t: u32, case: u8) -> (StepSets, bool) {
    let iu = i as usize;
    let (ti, tn) = (&tr.t[iu], &tr.t[iu + 1]);
    let (ji, jn, inext) = (&tr.j[iu], &tr.j[iu + 1], &tr.i[iu]);
    let stack = |cols: &ColumnSet| -> Vec<BlockId> {
        let mut v = Vec::new();
        for r in 0..=i {
            v.extend(layer_blocks(BlockKind::BLayer, r, cols.iter().copied()));
            if r >= 1 {
                v.extend(layer_blocks(BlockKind::CLayer, r, cols.iter().copied()));
            }
        }
        v
    };
    let mut s = StepSets::default();
    let r_i = stack(ti);
    s.p = r_i.clone();
    s.p.extend(layer_blocks(BlockKind::CLayer, i + 1, inext.iter().copied()));
    s.p.extend(layer_blocks(BlockKind::BLayer, i + 1, jn.iter().copied()));
    let entering: ColumnSet = tn.difference(ti).copied().collect();
    s.u = stack(&entering);
    s.q = s.p.iter().chain(&s.u).copied().collect();
    let below: ColumnSet = tn.difference(jn).copied().collect();
    s.l = layer_blocks(BlockKind::CLayer, i + 1, below.iter().copied());
    s.l.extend(layer_blocks(BlockKind::BLayer, i + 1, below.iter().copied()));
    let overlap_stack = |k: u32| -> Vec<BlockId> {
        let mut v = Vec::new();
        for r in 0..=i {
            v.push(BlockId::new(BlockKind::NOverlap, r, k));
            if r >= 1 {
                v.push(BlockId::new(BlockKind::KOverlap, r, k));
            }
        }
        v
    };
    for &c in &entering {
        for r in 0..=i {
            s.u_bricks.push(BlockId::new(BlockKind::BBrick, r, c));
            if r >= 1 {
                s.u_bricks.push(BlockId::new(BlockKind::CBrick, r, c));
            }
        }
    }
    let expected_entry = match case {
        3 => Some(t + 1),
        4 => Some(t),
        _ => None,
    };
    let single = match expected_entry {
        Some(e) => entering == ColumnSet::from([e]),
        None => entering.is_empty(),
    };
    if case == 3 || case == 4 {
        // Case 4 mirrors Case 3: the roles of t and t+1 swap, and t+2 becomes t-1.
        let (keep, enter) = if case == 3 { (t, t + 1) } else { (t + 1, t) };
        s.u_t = overlap_stack(t);
        s.u_t1 = overlap_stack(t + 1);
        let comp_rows = |cols: &ColumnSet, c: u32| -> ColumnSet {
            run_containing(cols, c).map(|(a, b)| (a..=b).collect()).unwrap_or_default()
        };
        s.x = stack(&comp_rows(ti, keep));
        // Y: component of Ĉ_{i+1} ∪ B̂_{i+1} containing B_{i+1,enter}.
        let y_cols = comp_rows(inext, enter);
        s.y = layer_blocks(BlockKind::CLayer, i + 1, y_cols.iter().copied());
        s.y.extend(layer_blocks(
            BlockKind::BLayer,
            i + 1,
            y_cols.iter().copied().filter(|c| jn.contains(c)),
        ));
        let far = if case == 3 { t + 2 } else { t.wrapping_sub(1) };
        let w_cols = comp_rows(jn, enter);
        s.w = layer_blocks(BlockKind::BLayer, i + 1, w_cols.iter().copied());
        if ji.contains(&far) {
            s.v = stack(&comp_rows(ti, far));
        }
        let mut z_cols: ColumnSet = w_cols.clone();
        z_cols.insert(keep);
        s.z = layer_blocks(BlockKind::CLayer, i + 1, z_cols.iter().copied());
        s.z.extend(s.w.iter().copied());
        let zset: BTreeSet<BlockId> = s.z.iter().copied().collect();
        s.y_tilde = s.y.iter().copied().filter(|b| !zset.contains(b)).collect();
    }
    (s, single)
}

fn cells_of(blocks: &[BlockId]) -> BTreeSet<Cell> {
    blocks.iter().flat_map(|&b| block_cells(b)).collect()
}

/// Build an excellence certificate for the subtangle.
pub fn engulf_verify(sub: &Subtangle) -> Result<ExcellenceCertificate, EngulfError> {
    let theta = &sub.parent;
    let (n, m) = (theta.n, theta.m);
    let trace = occupancy_trace(sub);
    let mut b = Builder::new(sub);
    let mut steps = Vec::new();
    let mut notes = Vec::new();

    for (lo, hi) in runs(&trace.j[0]) {
        let r = b.leaf(0, lo, hi, BTreeSet::new())?;
        b.regions.push(r);
    }

    for i in 0..m {
        let t = theta.braids.letters[i as usize];
        let step = i + 1;
        let mut case = classify_step(&trace.j[i as usize], t);
        case.index = i;
        let (i_rule, j_rule) = case_rule(&trace.j[i as usize], t);
        if i_rule != trace.i[i as usize] || j_rule != trace.j[step as usize] {
            return Err(EngulfError::CaseMismatch {
                step,
                detail: format!("case {} rule disagrees with traced occupancy", case.case),
            });
        }
        let (sets, single) = step_sets(&trace, i, t, case.case);
        let r_next = b.grid.region_cells(step, &trace.t[step as usize]);
        let ql: BTreeSet<Cell> = cells_of(&sets.q).union(&cells_of(&sets.l)).copied().collect();
        if ql != r_next {
            return Err(EngulfError::CaseMismatch { step, detail: "Q ∪ L differs from R_{i+1}".into() });
        }

        // New pieces: one leaf per run of J_{i+1}, each with the C cells whose
        // strands land in it.
        let jn = &trace.j[step as usize];
        let mut raw: Vec<((u32, u32), BTreeSet<Cell>, BTreeSet<Cell>)> = Vec::new();
        for (ilo, ihi) in runs(&trace.i[i as usize]) {
            let mut owner: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
            for c in ilo..=ihi {
                let land = if case.case != 2 && (c == t || c == t + 1) {
                    let sel: Vec<u32> = [t, t + 1].into_iter().filter(|x| trace.j[i as usize].contains(x)).collect();
                    b.grid.landing(step, sel[0])
                } else {
                    b.grid.landing(step, c)
                };
                let land = land.ok_or_else(|| EngulfError::CaseMismatch {
                    step,
                    detail: format!("brick {c} of I has no strands"),
                })?;
                let run = run_containing(jn, land).ok_or_else(|| EngulfError::CaseMismatch {
                    step,
                    detail: format!("strands land in unoccupied column {land}"),
                })?;
                owner.insert(c, run);
            }
            let mut collars: BTreeMap<(u32, u32), BTreeSet<Cell>> = BTreeMap::new();
            let layer = 2 * step - 1;
            for x in 2 * ilo - 2..=2 * ihi {
                let run = if x % 2 == 1 {
                    owner[&((x + 1) / 2)]
                } else if x / 2 == t && b.grid.active[i as usize] {
                    owner[&t]
                } else if x / 2 >= ilo {
                    owner[&(x / 2)]
                } else {
                    owner[&(x / 2 + 1)]
                };
                collars.entry(run).or_default().insert(Cell { layer, x });
            }
            for ((lo, hi), collar) in collars {
                let mut cells: BTreeSet<Cell> = collar.clone();
                cells.extend((2 * lo - 2..=2 * hi).map(|x| Cell { layer: 2 * step, x }));
                raw.push(((lo, hi), collar, cells));
            }
        }
        // Glue phase: group old regions and new pieces by punctured contact.
        let old = std::mem::take(&mut b.regions);
        let total = old.len() + raw.len();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let punctured = |grid: &Grid, a: &BTreeSet<Cell>, c: &BTreeSet<Cell>| {
            interface(grid, a, c).components.iter().any(|k| k.punctures > 0)
        };
        for (a, ra) in old.iter().enumerate() {
            for (k, pk) in raw.iter().enumerate() {
                if punctured(&b.grid, &ra.cells, &pk.2) {
                    let (x, y) = (find(&mut parent, a), find(&mut parent, old.len() + k));
                    parent[x] = y;
                }
            }
        }
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for k in 0..total {
            let r = find(&mut parent, k);
            members.entry(r).or_default().push(k);
        }
        // An untouched overlap at the end of a collar is dropped when it borders
        // another group, so that separate groups never share a clean face.
        let group_of: Vec<usize> = (0..total).map(|k| find(&mut parent, k)).collect();
        let owner_of = |c: Cell| -> Option<usize> {
            old.iter()
                .position(|r| r.cells.contains(&c))
                .or_else(|| raw.iter().position(|p| p.2.contains(&c)).map(|k| old.len() + k))
        };
        let mut trimmed: Vec<BTreeSet<Cell>> = Vec::with_capacity(raw.len());
        for (k, (_, collar, _)) in raw.iter().enumerate() {
            let mut collar = collar.clone();
            let me = group_of[old.len() + k];
            for end in [collar.first().copied(), collar.last().copied()].into_iter().flatten() {
                let foreign = around(end).any(|d| owner_of(d).is_some_and(|o| group_of[o] != me));
                if !b.grid.touched(end) && foreign && collar.len() > 1 {
                    collar.remove(&end);
                }
            }
            trimmed.push(collar);
        }
        let mut pieces = Vec::with_capacity(raw.len());
        for (((lo, hi), _, _), collar) in raw.into_iter().zip(trimmed) {
            pieces.push(b.leaf(step, lo, hi, collar)?);
        }
        let mut slots: Vec<Option<Region>> = old.into_iter().chain(pieces).map(Some).collect();
        let mut groups: Vec<Vec<usize>> = members.into_values().collect();
        groups.sort();
        for g in groups {
            let mut acc = slots[g[0]].take().unwrap();
            let mut rest: Vec<usize> = g[1..].to_vec();
            while !rest.is_empty() {
                let pos = rest
                    .iter()
                    .position(|&k| punctured(&b.grid, &acc.cells, &slots[k].as_ref().unwrap().cells))
                    .ok_or_else(|| EngulfError::CaseMismatch { step, detail: "group lost contact".into() })?;
                let k = rest.remove(pos);
                let other = slots[k].take().unwrap();
                acc = b.glue(acc, other, Some(step))?;
            }
            b.regions.push(acc);
        }
        let deferred = b.fill(&r_next, Some(step));
        steps.push(StepRecord {
            case,
            sets,
            u_is_single_stack: single,
            groups_after: b.regions.len() as u32,
            deferred_cells: deferred.len() as u32,
        });
        if !single {
            notes.push(format!("step {step}: T_{{i+1}} - T_i is not the single column named by the case"));
        }
    }

    // Final pass: whatever is left, including columns never entered.
    let all = b.grid.all_cells();
    let left = b.fill(&all, None);
    let tm = &trace.t[m as usize];
    let untouched: Vec<u32> = (1..=n).filter(|c| !tm.contains(c)).collect();
    if !untouched.is_empty() {
        notes.push(format!(
            "T_m = {:?} is not all columns; columns {:?} were adjoined in the final pass",
            tm, untouched
        ));
    }
    if b.regions.len() != 1 {
        return Err(EngulfError::CaseMismatch {
            step: m,
            detail: format!("{} separate regions remain at the end", b.regions.len()),
        });
    }
    if !left.is_empty() {
        return Err(EngulfError::NonBallAdjunct {
            step: None,
            detail: format!("{} cells could not be adjoined", left.len()),
        });
    }
    let root = b.regions[0].node;
    Ok(ExcellenceCertificate {
        n,
        subset: sub.j0.iter().copied().collect(),
        nodes: b.nodes,
        root,
        steps,
        untouched_columns: untouched,
        notes,
    })
}

/// A validation failure at a specific node.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("node {node}: {reason}")]
pub struct CertificateError {
    pub node: usize,
    pub reason: String,
}

/// Re-check every node of a certificate from `(n, subset)` alone.
pub fn validate_certificate(cert: &ExcellenceCertificate) -> Result<(), CertificateError> {
    let fail = |node: usize, reason: String| CertificateError { node, reason };
    let theta = tangle::build_theta(cert.n).map_err(|e| fail(0, e.to_string()))?;
    let subset: ColumnSet = cert.subset.iter().copied().collect();
    tangle::select_subtangle(&theta, subset.iter().copied()).map_err(|e| fail(0, e.to_string()))?;
    let grid = Grid::from_phi(&theta, &subset).map_err(|e| fail(0, e.to_string()))?;
    let mut cells: Vec<Option<BTreeSet<Cell>>> = vec![None; cert.nodes.len()];
    let mut used = vec![false; cert.nodes.len()];
    let mut take = |k: usize, at: usize, cells: &mut Vec<Option<BTreeSet<Cell>>>| {
        if k >= at || used[k] {
            return Err(fail(at, format!("child {k} is not an earlier unused node")));
        }
        used[k] = true;
        Ok(cells[k].take().unwrap())
    };
    for (k, node) in cert.nodes.iter().enumerate() {
        let c = match node {
            CertNode::Leaf { .. } => leaf_cells(&grid, node).map_err(|r| fail(k, r))?,
            CertNode::Glue { children, check, .. } => {
                if children.len() != 2 {
                    return Err(fail(k, "glue needs exactly two children".into()));
                }
                let a = take(children[0], k, &mut cells)?;
                let b = take(children[1], k, &mut cells)?;
                if a.intersection(&b).next().is_some() {
                    return Err(fail(k, "glued regions overlap".into()));
                }
                let itf = interface(&grid, &a, &b);
                if let Some(d) = itf.defect {
                    return Err(fail(k, format!("interface not a disk: {d}")));
                }
                let recount = check_gluing(&itf.components);
                if &recount != check {
                    return Err(fail(k, format!("recorded gluing {check:?} differs from recount {recount:?}")));
                }
                if !recount.verdict {
                    return Err(fail(k, "gluing check fails".into()));
                }
                let mut u = a;
                u.extend(b);
                if let Some(d) = disk_defect(&u) {
                    return Err(fail(k, format!("glued region {d}")));
                }
                u
            }
            CertNode::BallAdjunction { child, blocks, interface_count, .. } => {
                if *interface_count != 1 {
                    return Err(fail(k, format!("ball meets the region in {interface_count} interfaces")));
                }
                let a = take(*child, k, &mut cells)?;
                let ball: BTreeSet<Cell> = blocks
                    .iter()
                    .map(|&b| Cell::from_block(b).ok_or_else(|| fail(k, format!("{b:?} is not atomic"))))
                    .collect::<Result<_, _>>()?;
                if ball.len() != blocks.len() {
                    return Err(fail(k, "repeated block".into()));
                }
                if let Some(d) = ball_defect(&grid, &a, &ball) {
                    return Err(fail(k, d));
                }
                let mut u = a;
                u.extend(ball);
                u
            }
        };
        cells[k] = Some(c);
    }
    let root = cert.root;
    if root >= cert.nodes.len() || used[root] {
        return Err(fail(root, "root is not a top-level node".into()));
    }
    if let Some(k) = (0..cert.nodes.len()).find(|&k| k != root && !used[k]) {
        return Err(fail(k, "node is not part of the root derivation".into()));
    }
    let rc = cells[root].take().unwrap();
    if rc != grid.all_cells() {
        return Err(fail(root, "root does not cover the box".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tangle::{build_theta, select_subtangle};
    use proptest::prelude::*;

    fn sub(n: u32, j0: &[u32]) -> Subtangle {
        select_subtangle(&build_theta(n).unwrap(), j0.iter().copied()).unwrap()
    }

    fn set(v: &[u32]) -> ColumnSet {
        v.iter().copied().collect()
    }

    #[test]
    fn traces() {
        let tr = occupancy_trace(&sub(2, &[1, 2]));
        assert!(tr.j.iter().all(|j| *j == set(&[1, 2])));
        assert!(tr.i.iter().all(|j| *j == set(&[1, 2])));
        let tr = occupancy_trace(&sub(2, &[1]));
        assert_eq!(tr.j, vec![set(&[1]), set(&[2])]);
        assert_eq!(tr.i[0], set(&[1, 2]));
        assert_eq!(tr.t[1], set(&[1, 2]));
        let tr = occupancy_trace(&sub(3, &[2]));
        assert_eq!(tr.j, vec![set(&[2]), set(&[1]), set(&[1]), set(&[2])]);
        assert_eq!(tr.t[3], set(&[1, 2]));
    }

    #[test]
    fn classification() {
        assert_eq!(classify_step(&set(&[1, 2]), 1).case, 1);
        assert_eq!(classify_step(&set(&[1]), 1).case, 3);
        assert_eq!(classify_step(&set(&[3]), 1).case, 2);
        assert_eq!(classify_step(&set(&[2]), 1).case, 4);
        let c = classify_step(&set(&[1, 2, 4]), 2);
        assert_eq!((c.case, c.t_minus_1_in, c.t_plus_2_in), (3, true, true));
    }

    #[test]
    fn gluing_checks() {
        let d = |k| InterfaceComponent { punctures: k, is_disk_portion: true };
        assert!(check_gluing(&[d(3)]).verdict);
        assert!(!check_gluing(&[d(1)]).verdict);
        assert!(!check_gluing(&[]).verdict);
    }

    #[test]
    fn full_pair_certificate() {
        let cert = engulf_verify(&sub(2, &[1, 2])).unwrap();
        let leaves = cert.nodes.iter().filter(|n| matches!(n, CertNode::Leaf { .. })).count();
        let glues: Vec<_> = cert.glue_checks().collect();
        assert_eq!(leaves, 2);
        assert_eq!(glues.len(), 1);
        assert_eq!(glues[0].components, vec![InterfaceComponent { punctures: 6, is_disk_portion: true }]);
        assert!(cert.nodes.iter().all(|n| !matches!(n, CertNode::BallAdjunction { .. })));
        validate_certificate(&cert).unwrap();
    }

    #[test]
    fn single_component_n2() {
        let cert = engulf_verify(&sub(2, &[1])).unwrap();
        assert_eq!(cert.steps[0].case.case, 3);
        let glues: Vec<_> = cert.glue_checks().collect();
        assert_eq!(glues.len(), 1);
        assert_eq!(glues[0].components[0].punctures, 3);
        let balls: Vec<Vec<BlockId>> = cert
            .nodes
            .iter()
            .filter_map(|n| match n {
                CertNode::BallAdjunction { blocks, .. } => Some(blocks.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(
            balls,
            vec![
                vec![BlockId::new(BlockKind::BBrick, 0, 2), BlockId::new(BlockKind::NOverlap, 0, 2)],
                vec![BlockId::new(BlockKind::NOverlap, 1, 0), BlockId::new(BlockKind::BBrick, 1, 1)],
            ]
        );
        validate_certificate(&cert).unwrap();
    }

    #[test]
    fn untouched_column_pass() {
        let cert = engulf_verify(&sub(3, &[2])).unwrap();
        assert_eq!(cert.untouched_columns, vec![3]);
        assert!(cert.notes.iter().any(|s| s.contains("final pass")));
        assert!(cert.nodes.iter().any(|n| matches!(n, CertNode::BallAdjunction { step: None, .. })));
        validate_certificate(&cert).unwrap();
    }

    #[test]
    fn forged_certificates_fail() {
        let mut cert = engulf_verify(&sub(2, &[1, 2])).unwrap();
        if let CertNode::Leaf { arcs, .. } = &mut cert.nodes[0] {
            *arcs = 1;
        }
        assert_eq!(validate_certificate(&cert).unwrap_err().node, 0);

        let mut cert = engulf_verify(&sub(2, &[1])).unwrap();
        let k = cert.nodes.iter().position(|n| matches!(n, CertNode::BallAdjunction { .. })).unwrap();
        if let CertNode::BallAdjunction { interface_count, .. } = &mut cert.nodes[k] {
            *interface_count = 2;
        }
        assert_eq!(validate_certificate(&cert).unwrap_err().node, k);

        let mut cert = engulf_verify(&sub(2, &[1])).unwrap();
        cert.subset = vec![1, 2];
        assert!(validate_certificate(&cert).is_err());
    }

    proptest! {
        #[test]
        fn certificates_roundtrip(n in 2u32..=5, mask in 1u32..32) {
            let mask = mask & ((1 << n) - 1);
            prop_assume!(mask != 0);
            let j0: Vec<u32> = (1..=n).filter(|j| mask & (1 << (j - 1)) != 0).collect();
            let cert = engulf_verify(&sub(n, &j0)).unwrap();
            let json = serde_json::to_string(&cert).unwrap();
            let back: ExcellenceCertificate = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&back, &cert);
            prop_assert!(validate_certificate(&back).is_ok());
            prop_assert!(cert.glue_checks().all(|g| g.verdict));
        }
    }

    #[test]
    fn all_subsets_small() {
        for n in 2..=5u32 {
            let th = build_theta(n).unwrap();
            for mask in 1u32..(1 << n) {
                let j0: Vec<u32> = (1..=n).filter(|j| mask & (1 << (j - 1)) != 0).collect();
                let s = select_subtangle(&th, j0.iter().copied()).unwrap();
                let tr = occupancy_trace(&s);
                check_trace_rules(&tr, &th.braids.letters).unwrap();
                let cert = engulf_verify(&s).unwrap_or_else(|e| panic!("n={n} {j0:?}: {e}"));
                validate_certificate(&cert).unwrap_or_else(|e| panic!("n={n} {j0:?}: {e}"));
            }
        }
    }
}
