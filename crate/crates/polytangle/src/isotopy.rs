//! Finite and eventually periodic models of the isotopy arguments: removing
//! trivial intersection curves in staged pushes, monotonizing the trace of a
//! plane, and collapsing falling stars in a patch tree.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsotopyError {
    #[error("infinite nesting on the {0:?} side")]
    InfiniteNesting(Side),
    #[error("node {0} has no region in the ladder")]
    UnassignedRegion(u32),
    #[error("arc {0} has no endpoints in the marked boundary surface")]
    ArcOffBoundary(u32),
    #[error("node {node}: parent {parent} must be an earlier node")]
    BadParent { node: u32, parent: u32 },
    #[error("generator period {0} is odd; even/odd staging needs an even period")]
    OddPeriod(u32),
    #[error("trace not in standard position: {0}")]
    NotStandardPosition(String),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("patch {0} has order 1")]
    OrderOne(u32),
    #[error("root is not at the minimal level")]
    RootFalling,
    #[error("malformed patch tree: {0}")]
    MalformedTree(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    P,
    Q,
}

/// Regions `Y_0, Y_1, …`; `Y_a` and `Y_b` overlap only when `|a - b| ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLadder {
    pub levels: u32,
}

impl RegionLadder {
    pub fn contains(&self, r: u32) -> bool {
        r <= self.levels
    }

    pub fn adjacent(a: u32, b: u32) -> bool {
        a.abs_diff(b) <= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    Circle,
    Arc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestNode {
    pub id: u32,
    pub kind: CurveKind,
    /// Enclosing curve on `P`, if any.
    pub p_parent: Option<u32>,
    /// Enclosing curve on `Q`, if any.
    pub q_parent: Option<u32>,
    pub region: Option<u32>,
    pub target: bool,
    /// Arc endpoints lie in the marked surface.
    pub boundary_region: bool,
}

/// Intersection curves of two surfaces, with nesting on each side.
/// Node `k` has id `k` and parents with smaller ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestingForest {
    pub nodes: Vec<ForestNode>,
}

impl NestingForest {
    pub fn validate(&self) -> Result<(), IsotopyError> {
        for (k, n) in self.nodes.iter().enumerate() {
            for p in [n.p_parent, n.q_parent].into_iter().flatten() {
                if p as usize >= k || n.id as usize != k {
                    return Err(IsotopyError::BadParent { node: n.id, parent: p });
                }
            }
        }
        Ok(())
    }

    fn parent(&self, k: usize, side: Side) -> Option<u32> {
        match side {
            Side::P => self.nodes[k].p_parent,
            Side::Q => self.nodes[k].q_parent,
        }
    }

    /// `k` and everything nested inside it on either side.
    pub fn closure(&self, k: u32) -> BTreeSet<u32> {
        let mut kids: Vec<Vec<u32>> = vec![Vec::new(); self.nodes.len()];
        for n in &self.nodes {
            for p in [n.p_parent, n.q_parent].into_iter().flatten() {
                kids[p as usize].push(n.id);
            }
        }
        let mut out = BTreeSet::from([k]);
        let mut q = VecDeque::from([k]);
        while let Some(u) = q.pop_front() {
            for &c in &kids[u as usize] {
                if out.insert(c) {
                    q.push_back(c);
                }
            }
        }
        out
    }
}

/// Targets with no target ancestor on `side`.
pub fn maximal_nodes(f: &NestingForest, side: Side) -> Vec<u32> {
    (0..f.nodes.len())
        .filter(|&k| f.nodes[k].target)
        .filter(|&k| {
            let mut cur = f.parent(k, side);
            while let Some(p) = cur {
                if f.nodes[p as usize].target {
                    return false;
                }
                cur = f.parent(p as usize, side);
            }
            true
        })
        .map(|k| k as u32)
        .collect()
}

/// A node of one period of an eventually periodic forest. Parent links
/// name a node index and how many periods back it lives (0 or more).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicNode {
    pub kind: CurveKind,
    pub p_parent: Option<(u32, u32)>,
    pub q_parent: Option<(u32, u32)>,
    /// Region offset within the period.
    pub region: u32,
    pub target: bool,
    pub boundary_region: bool,
}

/// One period of nodes repeated every `period` regions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicForest {
    pub period: u32,
    pub base: Vec<PeriodicNode>,
}

impl PeriodicForest {
    /// Unroll `copies` periods into a finite forest.
    pub fn unroll(&self, copies: u32) -> NestingForest {
        let b = self.base.len() as u32;
        let mut nodes = Vec::new();
        for c in 0..copies {
            for (k, n) in self.base.iter().enumerate() {
                let link = |l: Option<(u32, u32)>| l.and_then(|(i, back)| (back <= c).then(|| (c - back) * b + i));
                nodes.push(ForestNode {
                    id: c * b + k as u32,
                    kind: n.kind,
                    p_parent: link(n.p_parent),
                    q_parent: link(n.q_parent),
                    region: Some(c * self.period + n.region),
                    target: n.target,
                    boundary_region: n.boundary_region,
                });
            }
        }
        NestingForest { nodes }
    }
}

/// True iff following parents on either side never terminates, i.e. the
/// parent graph on one period has a cycle.
pub fn detect_infinite_nesting(f: &PeriodicForest) -> Option<Side> {
    for side in [Side::P, Side::Q] {
        let next = |k: usize| match side {
            Side::P => f.base[k].p_parent,
            Side::Q => f.base[k].q_parent,
        };
        // Walk parent pointers; a walk longer than the node count must loop.
        for start in 0..f.base.len() {
            let mut cur = Some(start);
            let mut steps = 0;
            while let Some(k) = cur {
                steps += 1;
                if steps > f.base.len() {
                    return Some(side);
                }
                cur = next(k).map(|(i, _)| i as usize);
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PushKind {
    DiskPush,
    HalfdiskPush,
    BandPush,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Push {
    pub kind: PushKind,
    pub node: u32,
    pub removed: Vec<u32>,
    /// Regions met by the removed curves.
    pub support: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub region: u32,
    pub pushes: Vec<Push>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Even,
    Odd,
    Cleanup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub phase: Phase,
    pub entries: Vec<StageEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PushSchedule {
    pub stages: Vec<Stage>,
}

impl PushSchedule {
    pub fn push_count(&self) -> usize {
        self.stages.iter().flat_map(|s| &s.entries).map(|e| e.pushes.len()).sum()
    }
}

fn supports_apart(a: &[u32], b: &[u32]) -> bool {
    a.iter().all(|&x| b.iter().all(|&y| !RegionLadder::adjacent(x, y)))
}

/// Remove every target together with what it encloses, in stages whose
/// region entries have pairwise non-adjacent supports.
pub fn schedule_removal(f: &NestingForest, ladder: &RegionLadder) -> Result<PushSchedule, IsotopyError> {
    f.validate()?;
    for n in &f.nodes {
        match n.region {
            Some(r) if ladder.contains(r) => {}
            _ => return Err(IsotopyError::UnassignedRegion(n.id)),
        }
        if n.target && n.kind == CurveKind::Arc && !n.boundary_region {
            return Err(IsotopyError::ArcOffBoundary(n.id));
        }
    }
    let region = |k: u32| f.nodes[k as usize].region.unwrap();
    let mut remaining: BTreeSet<u32> = (0..f.nodes.len() as u32).collect();
    let mut schedule = PushSchedule::default();
    let mut deferred: Vec<u32> = Vec::new();

    for phase in [Phase::Even, Phase::Odd, Phase::Cleanup] {
        let mut pending: Vec<u32> = match phase {
            Phase::Even | Phase::Odd => {
                let parity = if phase == Phase::Even { 0 } else { 1 };
                maximal_nodes(f, Side::P).into_iter().filter(|&k| region(k) % 2 == parity).collect()
            }
            Phase::Cleanup => std::mem::take(&mut deferred),
        };
        pending.sort_unstable();
        while !pending.is_empty() {
            let mut stage = Stage { phase, entries: Vec::new() };
            let mut next = Vec::new();
            let at_start = remaining.clone();
            for &k in &pending {
                if !remaining.contains(&k) {
                    continue;
                }
                let closure = f.closure(k);
                let removed: Vec<u32> = closure.intersection(&remaining).copied().collect();
                // Support counts curves live at the start of the stage, so that
                // entries with separated supports never share a curve.
                let support: Vec<u32> = closure
                    .intersection(&at_start)
                    .map(|&r| region(r))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let r = region(k);
                let fits = stage
                    .entries
                    .iter()
                    .filter(|e| e.region != r)
                    .all(|e| e.pushes.iter().all(|p| supports_apart(&p.support, &support)));
                if !fits {
                    next.push(k);
                    continue;
                }
                for x in &removed {
                    remaining.remove(x);
                }
                let kind = match f.nodes[k as usize].kind {
                    CurveKind::Circle => PushKind::DiskPush,
                    CurveKind::Arc => PushKind::HalfdiskPush,
                };
                let push = Push { kind, node: k, removed, support };
                match stage.entries.iter_mut().find(|e| e.region == r) {
                    Some(e) => e.pushes.push(push),
                    None => stage.entries.push(StageEntry { region: r, pushes: vec![push] }),
                }
            }
            if !stage.entries.is_empty() {
                stage.entries.sort_by_key(|e| e.region);
                schedule.stages.push(stage);
            }
            if phase == Phase::Cleanup {
                pending = next;
            } else {
                deferred.extend(next);
                break;
            }
        }
    }
    Ok(schedule)
}

/// Replay a schedule and return the surviving nodes, checking that each push
/// removes exactly the live closure of a live target and that same-stage
/// entries have non-adjacent supports.
pub fn apply_schedule(f: &NestingForest, s: &PushSchedule) -> Result<BTreeSet<u32>, String> {
    let mut remaining: BTreeSet<u32> = (0..f.nodes.len() as u32).collect();
    for (si, stage) in s.stages.iter().enumerate() {
        for (a, ea) in stage.entries.iter().enumerate() {
            for eb in stage.entries.iter().skip(a + 1) {
                for pa in &ea.pushes {
                    for pb in &eb.pushes {
                        if !supports_apart(&pa.support, &pb.support) {
                            return Err(format!("stage {si}: regions {} and {} overlap", ea.region, eb.region));
                        }
                    }
                }
            }
            for p in &ea.pushes {
                let node = f.nodes.get(p.node as usize).ok_or("unknown node")?;
                if !node.target || !remaining.contains(&p.node) {
                    return Err(format!("stage {si}: push of {} removes no live target", p.node));
                }
                let live: Vec<u32> = f.closure(p.node).intersection(&remaining).copied().collect();
                if live != p.removed {
                    return Err(format!("stage {si}: push of {} records the wrong curves", p.node));
                }
                for x in &live {
                    remaining.remove(x);
                }
            }
        }
    }
    Ok(remaining)
}

/// Schedule removal on a periodic forest unrolled over `copies` periods.
pub fn schedule_periodic(f: &PeriodicForest, copies: u32) -> Result<PushSchedule, IsotopyError> {
    if let Some(side) = detect_infinite_nesting(f) {
        return Err(IsotopyError::InfiniteNesting(side));
    }
    if f.period % 2 == 1 {
        return Err(IsotopyError::OddPeriod(f.period));
    }
    let finite = f.unroll(copies);
    schedule_removal(&finite, &RegionLadder { levels: copies * f.period })
}

/// Standard-position normalization: remove the flagged trivial curves and
/// pick the surviving curve of lowest region (then lowest id) as `J_0`.
pub fn normalize(f: &NestingForest, ladder: &RegionLadder) -> Result<(PushSchedule, Option<u32>), IsotopyError> {
    let s = schedule_removal(f, ladder)?;
    let left = apply_schedule(f, &s).map_err(IsotopyError::MalformedTree)?;
    let j0 = left.into_iter().min_by_key(|&k| (f.nodes[k as usize].region, k));
    Ok((s, j0))
}

/// A random finite forest with every node assigned to one of `regions` regions.
pub fn random_forest<R: Rng>(rng: &mut R, max_nodes: usize, regions: u32) -> NestingForest {
    let count = rng.gen_range(1..=max_nodes);
    let mut nodes = Vec::with_capacity(count);
    for k in 0..count as u32 {
        let pick = |rng: &mut R| (k > 0 && rng.gen_bool(0.6)).then(|| rng.gen_range(0..k));
        let kind = if rng.gen_bool(0.3) { CurveKind::Arc } else { CurveKind::Circle };
        nodes.push(ForestNode {
            id: k,
            kind,
            p_parent: pick(rng),
            q_parent: pick(rng),
            region: Some(rng.gen_range(0..regions)),
            target: rng.gen_bool(0.35),
            boundary_region: true,
        });
    }
    NestingForest { nodes }
}

// ---------------------------------------------------------------------------
// Plane traces

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceCircle {
    pub id: u32,
    /// Index of the frontier surface containing the circle.
    pub level: u32,
    pub bounds_disk: bool,
}

/// Circles of a plane's trace listed from the central disk outward. The first
/// circle bounds the central disk and lies at `base`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnulusTrace {
    pub base: u32,
    pub circles: Vec<TraceCircle>,
}

impl AnnulusTrace {
    pub fn monotone(base: u32, top: u32) -> Self {
        let circles = (base..=top).map(|l| TraceCircle { id: l - base, level: l, bounds_disk: false }).collect();
        AnnulusTrace { base, circles }
    }

    /// The piece (region between `F_{p-1}` and `F_p`) just outside each circle.
    pub fn pieces(&self) -> Result<Vec<u32>, IsotopyError> {
        let first = self.circles.first().ok_or_else(|| IsotopyError::MalformedTrace("no circles".into()))?;
        if first.level != self.base {
            return Err(IsotopyError::MalformedTrace("first circle must lie at the base level".into()));
        }
        let mut out = Vec::with_capacity(self.circles.len());
        let mut p = self.base + 1;
        out.push(p);
        for c in &self.circles[1..] {
            p = if c.level == p {
                p + 1
            } else if c.level + 1 == p && c.level >= 1 {
                p - 1
            } else {
                return Err(IsotopyError::MalformedTrace(format!("circle {} skips a frontier", c.id)));
            };
            out.push(p);
        }
        Ok(out)
    }

    pub fn is_monotone(&self) -> bool {
        self.circles.iter().enumerate().all(|(k, c)| c.level == self.base + k as u32)
    }

    pub fn count_at(&self, level: u32) -> usize {
        self.circles.iter().filter(|c| c.level == level).count()
    }
}

/// Removal of the annulus between circles `outer.0` and `outer.1`, taking
/// every circle between them along.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnulusPush {
    pub level: u32,
    pub outer: (u32, u32),
    pub removed: Vec<u32>,
    pub stage: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneMonotonization {
    pub separation: Vec<u32>,
    pub moves: Vec<AnnulusPush>,
    pub result: AnnulusTrace,
}

/// Redundant pairs as index pairs `(a, b)` into the circle list.
fn redundant_pairs(tr: &AnnulusTrace, pieces: &[u32]) -> Result<Vec<(usize, usize)>, IsotopyError> {
    let top = tr.circles.iter().map(|c| c.level).max().unwrap();
    if *pieces.last().unwrap() != top + 1 {
        return Err(IsotopyError::MalformedTrace("trace must end outside its highest frontier".into()));
    }
    // Kept circles: the central one for the base, otherwise the last circle at
    // each level, after which the walk stays above that level.
    let mut kept = vec![0];
    for l in tr.base + 1..=top {
        let k = tr
            .circles
            .iter()
            .rposition(|c| c.level == l)
            .ok_or_else(|| IsotopyError::MalformedTrace(format!("no circle at level {l}")))?;
        kept.push(k);
    }
    let mut pairs = Vec::new();
    for w in kept.windows(2) {
        // Between consecutive kept circles the walk is a closed excursion; match
        // crossings of each frontier in consecutive pairs.
        let mut open: BTreeMap<u32, usize> = BTreeMap::new();
        for k in w[0] + 1..w[1] {
            let l = tr.circles[k].level;
            match open.remove(&l) {
                Some(a) => pairs.push((a, k)),
                None => {
                    open.insert(l, k);
                }
            }
        }
        if !open.is_empty() {
            return Err(IsotopyError::MalformedTrace("unbalanced excursion".into()));
        }
    }
    Ok(pairs)
}

/// Put a plane trace in monotone position by staged redundant-annulus pushes.
pub fn monotonize_plane_trace(tr: &AnnulusTrace) -> Result<PlaneMonotonization, IsotopyError> {
    if let Some(c) = tr.circles.iter().find(|c| c.bounds_disk) {
        return Err(IsotopyError::NotStandardPosition(format!("circle {} bounds a disk", c.id)));
    }
    let pieces = tr.pieces()?;
    let pairs = redundant_pairs(tr, &pieces)?;
    let top = tr.circles.iter().map(|c| c.level).max().unwrap();
    let span = |&(a, b): &(usize, usize)| {
        let ls = tr.circles[a..=b].iter().map(|c| c.level);
        (ls.clone().min().unwrap(), ls.max().unwrap())
    };
    let at = |l: u32| pairs.iter().filter(move |p| tr.circles[p.0].level == l);

    // Separation indices: pairs on F_{n_i} stay strictly between n_{i-1} and
    // n_{i+1}, and pairs on F_{n_{i+1}} stay above n_i.
    let mut sep = vec![tr.base];
    loop {
        let ni = *sep.last().unwrap();
        if ni > top {
            break;
        }
        let need = at(ni).map(|p| span(p).1 + 1).max().unwrap_or(ni + 1).max(ni + 1);
        let next = (need..).find(|&c| at(c).all(|p| span(p).0 > ni)).unwrap();
        sep.push(next);
    }

    let mut removed: BTreeSet<usize> = BTreeSet::new();
    let mut moves = Vec::new();
    let mut stage = 0u32;
    let mut run = |levels: &dyn Fn(u32) -> bool, moves: &mut Vec<AnnulusPush>, stage: u32| {
        // Outermost pairs first so each push takes its nested pairs along.
        let mut chosen: Vec<&(usize, usize)> =
            pairs.iter().filter(|p| levels(tr.circles[p.0].level) && !removed.contains(&p.0)).collect();
        chosen.sort_by_key(|p| (p.0, std::cmp::Reverse(p.1)));
        let mut any = false;
        for &(a, b) in chosen {
            if removed.contains(&a) {
                continue;
            }
            let gone: Vec<usize> = (a..=b).filter(|k| !removed.contains(k)).collect();
            moves.push(AnnulusPush {
                level: tr.circles[a].level,
                outer: (tr.circles[a].id, tr.circles[b].id),
                removed: gone.iter().map(|&k| tr.circles[k].id).collect(),
                stage,
            });
            removed.extend(gone);
            any = true;
        }
        any
    };
    let even: BTreeSet<u32> = sep.iter().step_by(2).copied().collect();
    let odd: BTreeSet<u32> = sep.iter().skip(1).step_by(2).copied().collect();
    let seps: BTreeSet<u32> = sep.iter().copied().collect();
    if run(&|l| even.contains(&l), &mut moves, stage) {
        stage += 1;
    }
    if run(&|l| odd.contains(&l), &mut moves, stage) {
        stage += 1;
    }
    run(&|l| !seps.contains(&l), &mut moves, stage);

    let circles: Vec<TraceCircle> =
        tr.circles.iter().enumerate().filter(|(k, _)| !removed.contains(k)).map(|(_, c)| c.clone()).collect();
    let result = AnnulusTrace { base: tr.base, circles };
    debug_assert!(result.is_monotone());
    Ok(PlaneMonotonization { separation: sep, moves, result })
}

/// A monotone trace from `base` to `base + levels` with `pairs` redundant
/// pairs inserted at random.
pub fn random_trace<R: Rng>(rng: &mut R, base: u32, levels: u32, pairs: u32) -> AnnulusTrace {
    let mut tr = AnnulusTrace::monotone(base, base + levels);
    let mut next_id = tr.circles.len() as u32;
    let mut inserted = 0;
    while inserted < pairs {
        let pieces = tr.pieces().expect("generator keeps traces well formed");
        // Insert after circle k, inside the annulus lying in piece p.
        let k = rng.gen_range(0..tr.circles.len() - 1);
        let p = pieces[k];
        let level = if rng.gen_bool(0.5) { p } else { p - 1 };
        let other = if level == p { p + 1 } else { p - 1 };
        if other < 1 || level > base + levels {
            continue;
        }
        for off in 1..=2 {
            tr.circles.insert(k + off, TraceCircle { id: next_id, level, bounds_disk: false });
            next_id += 1;
        }
        inserted += 1;
    }
    tr
}

// ---------------------------------------------------------------------------
// Patch trees

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub id: u32,
    pub level: u32,
    /// Number of frontier arcs; equals the degree except at the truncation depth.
    pub order: u32,
    /// Collapse this patch by a band unfolding rather than a band push.
    pub unfold: bool,
}

/// The tree of patches of a partial plane, truncated at some depth. Vertex
/// `root` is the central disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchTree {
    pub root: u32,
    pub patches: BTreeMap<u32, Patch>,
    /// Each edge appears in both directions.
    pub edges: BTreeSet<(u32, u32)>,
}

impl PatchTree {
    pub fn neighbors(&self, v: u32) -> Vec<u32> {
        self.edges.range((v, 0)..=(v, u32::MAX)).map(|&(_, b)| b).collect()
    }

    pub fn add_edge(&mut self, a: u32, b: u32) {
        self.edges.insert((a, b));
        self.edges.insert((b, a));
    }

    fn connected(&self, vs: &BTreeSet<u32>) -> bool {
        let Some(&start) = vs.iter().next() else { return true };
        let mut seen = BTreeSet::from([start]);
        let mut q = VecDeque::from([start]);
        while let Some(u) = q.pop_front() {
            for w in self.neighbors(u) {
                if vs.contains(&w) && seen.insert(w) {
                    q.push_back(w);
                }
            }
        }
        seen.len() == vs.len()
    }

    /// `Γ_n`: patches at level at most `n`.
    pub fn slice(&self, n: u32) -> BTreeSet<u32> {
        self.patches.values().filter(|p| p.level <= n).map(|p| p.id).collect()
    }

    pub fn slices_connected(&self, depth: u32) -> bool {
        (0..=depth).all(|n| self.connected(&self.slice(n)))
    }

    pub fn validate(&self, depth: u32) -> Result<(), IsotopyError> {
        let bad = |s: &str| Err(IsotopyError::MalformedTree(s.into()));
        let root = self.patches.get(&self.root).ok_or(IsotopyError::MalformedTree("missing root".into()))?;
        if self.patches.values().any(|p| p.id != self.root && p.level <= root.level) {
            return Err(IsotopyError::RootFalling);
        }
        if self.edges.len() + 2 != 2 * self.patches.len() || !self.connected(&self.patches.keys().copied().collect()) {
            return bad("not a tree");
        }
        for &(a, b) in &self.edges {
            match (self.patches.get(&a), self.patches.get(&b)) {
                (Some(pa), Some(pb)) if pa.level.abs_diff(pb.level) == 1 => {}
                _ => return bad("edges must join adjacent levels"),
            }
        }
        for p in self.patches.values() {
            if p.level > depth {
                return bad("patch beyond the truncation depth");
            }
            let deg = self.neighbors(p.id).len() as u32;
            if p.id != self.root && p.order < 2 {
                return Err(IsotopyError::OrderOne(p.id));
            }
            if p.order < deg || (p.level < depth && p.order != deg) {
                return bad("order disagrees with degree");
            }
        }
        Ok(())
    }

    /// Non-root patches below `depth` whose neighbours all lie one level deeper.
    pub fn falling_vertices(&self, depth: u32) -> Vec<u32> {
        self.patches
            .values()
            .filter(|p| p.id != self.root && p.level < depth)
            .filter(|p| self.neighbors(p.id).iter().all(|w| self.patches[w].level == p.level + 1))
            .map(|p| p.id)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeMoveKind {
    BoundarySlide,
    BandPush,
    BandUnfolding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeMove {
    pub kind: TreeMoveKind,
    pub center: u32,
    pub merged: (u32, u32),
    /// The new patch (`W` for a slide, `Y` otherwise).
    pub created: u32,
    pub created_order: u32,
    pub level: u32,
    pub stage: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeMonotonization {
    pub moves: Vec<TreeMove>,
    pub tree: PatchTree,
}

/// Merge patches `a` and `b` into a new patch at `level`.
fn merge(t: &mut PatchTree, drop: &[u32], level: u32, order: u32, id: u32) {
    let mut nbrs = BTreeSet::new();
    for &d in drop {
        nbrs.extend(t.neighbors(d));
    }
    for d in drop {
        nbrs.remove(d);
        t.patches.remove(d);
    }
    t.edges.retain(|&(a, b)| !drop.contains(&a) && !drop.contains(&b));
    t.patches.insert(id, Patch { id, level, order, unfold: false });
    for w in nbrs {
        t.add_edge(id, w);
    }
}

fn check_orders(t: &PatchTree) -> Result<(), IsotopyError> {
    match t.patches.values().find(|p| p.id != t.root && p.order < 2) {
        Some(p) => Err(IsotopyError::OrderOne(p.id)),
        None => Ok(()),
    }
}

/// Collapse falling stars until every slice `Γ_n`, `n ≤ depth`, is connected.
pub fn monotonize_patch_tree(tree: &PatchTree, depth: u32) -> Result<TreeMonotonization, IsotopyError> {
    tree.validate(depth)?;
    let mut t = tree.clone();
    let mut next_id = t.patches.keys().max().unwrap() + 1;
    let mut moves: Vec<TreeMove> = Vec::new();
    let mut stage = 0u32;
    let mut stage_levels: Vec<u32> = Vec::new();
    loop {
        let falling = t.falling_vertices(depth);
        let Some(&z) = falling.iter().min_by_key(|&&v| (t.patches[&v].level, v)) else { break };
        let zp = t.patches[&z].clone();
        // Supports of moves at levels n and n' are disjoint when |n - n'| ≥ 2
        // or when they share a level.
        if stage_levels.iter().any(|&l| l.abs_diff(zp.level) == 1) {
            stage += 1;
            stage_levels.clear();
        }
        stage_levels.push(zp.level);
        let mut nb = t.neighbors(z);
        nb.sort_unstable();
        let (z1, z2) = (nb[0], nb[1]);
        let (o1, o2) = (t.patches[&z1].order, t.patches[&z2].order);
        let id = next_id;
        next_id += 1;
        let mv = if zp.order >= 3 {
            merge(&mut t, &[z1, z2], zp.level + 1, o1 + o2 - 1, id);
            t.patches.get_mut(&z).unwrap().order -= 1;
            TreeMove {
                kind: TreeMoveKind::BoundarySlide,
                center: z,
                merged: (z1, z2),
                created: id,
                created_order: o1 + o2 - 1,
                level: zp.level,
                stage,
            }
        } else {
            // A band unfolding slides first (leaving the center with order one)
            // and then pushes; only the composite is required to keep orders ≥ 2.
            let kind = if zp.unfold { TreeMoveKind::BandUnfolding } else { TreeMoveKind::BandPush };
            merge(&mut t, &[z, z1, z2], zp.level + 1, o1 + o2 - 2, id);
            TreeMove { kind, center: z, merged: (z1, z2), created: id, created_order: o1 + o2 - 2, level: zp.level, stage }
        };
        check_orders(&t)?;
        moves.push(mv);
    }
    debug_assert!(t.slices_connected(depth));
    Ok(TreeMonotonization { moves, tree: t })
}

/// A random truncated patch tree of depth `depth` with at most `max_vertices`
/// patches.
pub fn random_patch_tree<R: Rng>(rng: &mut R, depth: u32, max_vertices: usize) -> PatchTree {
    loop {
        if let Some(t) = try_random_tree(rng, depth, max_vertices) {
            return t;
        }
    }
}

fn try_random_tree<R: Rng>(rng: &mut R, depth: u32, max_vertices: usize) -> Option<PatchTree> {
    let mut t = PatchTree { root: 0, patches: BTreeMap::new(), edges: BTreeSet::new() };
    t.patches.insert(0, Patch { id: 0, level: 0, order: 0, unfold: false });
    let soft = max_vertices / 3;
    let mut q = VecDeque::from([0u32]);
    let mut next = 1u32;
    while let Some(v) = q.pop_front() {
        let lv = t.patches[&v].level;
        if lv == depth {
            continue;
        }
        let deg = t.neighbors(v).len();
        let need = if v == 0 { 1 } else { 2usize.saturating_sub(deg) };
        let extra = if (next as usize) < soft { rng.gen_range(0..=2) } else { 0 };
        for _ in 0..need + extra {
            let down = v != 0 && lv >= 2 && rng.gen_bool(0.3) && (next as usize) < soft;
            let level = if down { lv - 1 } else { lv + 1 };
            t.patches.insert(next, Patch { id: next, level, order: 0, unfold: rng.gen_bool(0.3) });
            t.add_edge(v, next);
            q.push_back(next);
            next += 1;
        }
        if next as usize > max_vertices {
            return None;
        }
    }
    let ids: Vec<u32> = t.patches.keys().copied().collect();
    for id in ids {
        let deg = t.neighbors(id).len() as u32;
        let p = t.patches.get_mut(&id).unwrap();
        p.order = if p.level == depth { deg.max(2) + rng.gen_range(0..=1) } else { deg };
    }
    Some(t)
}
