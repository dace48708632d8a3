//! Piecewise-linear realization of θ in the box `[0, 9n+1] × [-1, 1] × [0, n²-n+1]`,
//! its projection along `y`, diagram codes, SVG rendering and the JSON file
//! format shared by every module.
//!
//! Coordinates are exact rationals. `x` runs left to right, `y` back to front
//! and `z` downward; in the projection the strand with larger `y` is over.
//!
//! Each level arc carries a knotted trefoil piece (three crossings), and arcs
//! that are neighbours in a level interlock in a clasp (two crossings). Braid
//! strands are monotone in `z`; each generator crossing happens at a midpoint
//! with `y = ±1/2`.

use crate::braid;
use crate::engulf::{ExcellenceCertificate, OccupancyTrace};
use crate::exhaustion::ExhaustionDescriptor;
use crate::isotopy::{AnnulusTrace, NestingForest, PatchTree, PeriodicForest, PushSchedule};
use crate::labeling::BinaryLabeling;
use crate::tangle::{ChainPiece, LatticePoint, SegmentRole, Subtangle, TangleError, ThetaComplex};
use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

pub type Q = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExportError {
    #[error("strands {0:?} and {1:?} meet")]
    SelfIntersection((u32, usize), (u32, usize)),
    #[error("projection not generic after {attempts} attempts: {detail}")]
    NonGeneric { attempts: u32, detail: String },
    #[error("template failure: {0}")]
    Template(String),
    #[error("malformed diagram: {0}")]
    Malformed(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Tangle(#[from] TangleError),
}

/// Serde adapter writing a rational as `"p/q"`.
pub mod ratio_str {
    use num_integer::Integer;
    use num_rational::Ratio;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use std::fmt::Display;
    use std::str::FromStr;

    pub fn serialize<T: Display + Clone + Integer, S: Serializer>(r: &Ratio<T>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Ratio<T>, D::Error>
    where
        T: Clone + Integer + FromStr,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        let (p, q) = s.split_once('/').unwrap_or((&s, "1"));
        let p = T::from_str(p.trim()).map_err(|_| D::Error::custom(format!("bad numerator in {s:?}")))?;
        let q = T::from_str(q.trim()).map_err(|_| D::Error::custom(format!("bad denominator in {s:?}")))?;
        if q.is_zero() {
            return Err(D::Error::custom(format!("zero denominator in {s:?}")));
        }
        Ok(Ratio::new(p, q))
    }
}

/// A big rational that serializes as `"p/q"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub BigRational);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ratio_str::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        ratio_str::deserialize(d).map(Exact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point3 {
    #[serde(with = "ratio_str")]
    pub x: Q,
    #[serde(with = "ratio_str")]
    pub y: Q,
    #[serde(with = "ratio_str")]
    pub z: Q,
}

impl Point3 {
    pub fn new(x: Q, y: Q, z: Q) -> Self {
        Point3 { x, y, z }
    }

    pub fn lattice(p: LatticePoint) -> Self {
        let (x, y, z) = p.coords();
        Point3::new(Q::from(x), Q::from(y), Q::from(z))
    }
}

/// One component of θ as a polygonal arc.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polyline3 {
    pub component: u32,
    pub vertices: Vec<Point3>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    pub n: u32,
    pub polylines: Vec<Polyline3>,
}

// ---------------------------------------------------------------------------
// Level layouts

fn h(v: i64) -> Q {
    Q::new(v, 100)
}

/// Long trefoil from `(0, 0)` to `(0, 1)` in (lateral, along, depth) coordinates.
const TREFOIL: [((i64, i64), (i64, i64), (i64, i64)); 6] = [
    ((3, 5), (7, 20), (1, 2)),
    ((-3, 5), (11, 20), (-1, 2)),
    ((3, 5), (3, 4), (1, 2)),
    ((4, 5), (1, 10), (-1, 1)),
    ((-2, 5), (1, 4), (1, 2)),
    ((2, 5), (3, 5), (0, 1)),
];
const KNOT_WIDTH: (i64, i64) = (1, 10);
const KNOT_DEPTH: (i64, i64) = (1, 2);
const FINGER_DEPTH: i64 = -50;

/// A planar route in one level: `(x, z′, y)` with global `x` and `z′ ∈ [0, 1]`.
struct Route {
    offset: Q,
    pts: Vec<[Q; 3]>,
}

impl Route {
    fn new(column: u32, x: i64, z: i64) -> Self {
        let offset = Q::from(9 * (column as i64 - 1));
        Route { offset, pts: vec![[offset + h(x), h(z), Q::zero()]] }
    }

    fn to(mut self, x: i64, z: i64) -> Self {
        self.pts.push([self.offset + h(x), h(z), Q::zero()]);
        self
    }

    /// Finger tip vertex, pushed back in depth.
    fn tip(mut self, x: i64, z: i64) -> Self {
        self.pts.push([self.offset + h(x), h(z), h(FINGER_DEPTH)]);
        self
    }

    /// Straight run to `(x, z)` with a trefoil tied in it.
    fn knot(mut self, x: i64, z: i64) -> Self {
        let [sx, sz, _] = self.pts[self.pts.len() - 1];
        let (ex, ez) = (self.offset + h(x), h(z));
        let (dx, dz) = (ex - sx, ez - sz);
        let len = if dx.is_zero() { dz.abs() } else { dx.abs() };
        let (ux, uz) = (dx / len, dz / len);
        let width = Q::new(KNOT_WIDTH.0, KNOT_WIDTH.1);
        let depth = Q::new(KNOT_DEPTH.0, KNOT_DEPTH.1);
        for &((lu, ld), (au, ad), (wu, wd)) in &TREFOIL {
            let (lat, along, w) = (Q::new(lu, ld) * width, Q::new(au, ad) * len, Q::new(wu, wd) * depth);
            self.pts.push([sx + along * ux - lat * uz, sz + along * uz + lat * ux, w]);
        }
        self.pts.push([ex, ez, Q::zero()]);
        self
    }
}

type ArcKey = (u32, u32, SegmentRole);

/// Middle level, column `j` of `n`.
fn middle_column(j: u32, n: u32) -> Vec<(SegmentRole, Vec<[Q; 3]>)> {
    let (left, right) = (j > 1, j < n);
    let mut delta = Route::new(j, 200, 0);
    if left {
        // Clasp with the previous column's γ.
        delta = delta.to(200, 10).to(-40, 10).tip(-40, 55).tip(0, 55).to(0, 25);
    } else {
        delta = delta.to(200, 25);
    }
    let delta = delta.to(310, 25).tip(310, 40).tip(350, 40).to(350, 25).to(400, 25).knot(480, 25).to(500, 25).to(500, 0);
    let alpha = Route::new(j, 800, 0)
        .to(800, 50)
        .to(690, 50)
        .tip(690, 65)
        .tip(650, 65)
        .to(650, 50)
        .to(560, 50)
        .knot(440, 50)
        .to(370, 50)
        .tip(370, 35)
        .tip(330, 35)
        .to(330, 50)
        .to(200, 50)
        .to(200, 100);
    let mut gamma = Route::new(j, 500, 100).to(500, 75).to(630, 75).tip(630, 60).tip(670, 60).to(670, 75).to(700, 75).knot(780, 75);
    if right {
        gamma = gamma.to(840, 75).tip(840, 35).tip(880, 35).to(880, 75).to(880, 90).to(800, 90).to(800, 100);
    } else {
        gamma = gamma.to(800, 75).to(800, 100);
    }
    vec![(SegmentRole::Delta, delta.pts), (SegmentRole::Alpha, alpha.pts), (SegmentRole::Gamma, gamma.pts)]
}

/// Top level, column `j` of `n`.
fn top_column(j: u32, n: u32) -> Vec<(SegmentRole, Vec<[Q; 3]>)> {
    let (left, right) = (j > 1, j < n);
    let mut alpha = Route::new(j, 200, 0).to(200, 10).knot(200, 35).to(200, 40).tip(300, 40).tip(300, 50).to(200, 50);
    if left {
        alpha = alpha.to(200, 70).tip(60, 70).tip(60, 80).to(200, 80);
    }
    let alpha = alpha.to(200, 100);
    let mut gamma = Route::new(j, 500, 100).to(500, 55).tip(260, 55).tip(260, 45).to(340, 45).to(560, 45).knot(660, 45).to(800, 45);
    if right {
        gamma = gamma.to(800, 65).tip(1000, 65).tip(1000, 75).to(800, 75);
    }
    let gamma = gamma.to(800, 100);
    vec![(SegmentRole::Alpha, alpha.pts), (SegmentRole::Gamma, gamma.pts)]
}

/// Arcs of every level in global coordinates. The bottom level is the top
/// level turned over: `x ↦ 9n+1-x`, `z′ ↦ 1-z′`, arcs reversed.
fn level_arcs(n: u32, m: u32) -> BTreeMap<ArcKey, Vec<Point3>> {
    let mut out = BTreeMap::new();
    let place = |level: u32, pts: &[[Q; 3]]| -> Vec<Point3> {
        pts.iter().map(|&[x, z, y]| Point3::new(x, y, Q::from(2 * level as i64) + z)).collect()
    };
    let width = Q::from(9 * n as i64 + 1);
    for j in 1..=n {
        for (role, pts) in top_column(j, n) {
            out.insert((0, j, role), place(0, &pts));
            let flipped: Vec<[Q; 3]> = pts.iter().rev().map(|&[x, z, y]| [width - x, Q::one() - z, y]).collect();
            let role = if role == SegmentRole::Gamma { SegmentRole::Delta } else { role };
            out.insert((m, n + 1 - j, role), place(m, &flipped));
        }
        for level in 1..m {
            for (role, pts) in middle_column(j, n) {
                out.insert((level, j, role), place(level, &pts));
            }
        }
    }
    out
}

/// x-coordinate of strand position `q`.
fn strand_x(q: u32) -> Q {
    Q::from(3 * q as i64 - 1)
}

/// Path through a block of Artin generators from position `q` at height `z0`,
/// one generator per slab of height `1/len`.
fn braid_path(letters: &[u32], q: u32, z0: Q) -> (Vec<Point3>, u32) {
    let step = Q::new(1, letters.len() as i64);
    let half = Q::new(1, 2);
    let mut pos = q;
    let mut pts = vec![Point3::new(strand_x(pos), Q::zero(), z0)];
    for (k, &s) in letters.iter().enumerate() {
        let top = z0 + step * Q::from(k as i64);
        let mid_x = (strand_x(s) + strand_x(s + 1)) * half;
        if pos == s {
            // Moves right, in front.
            pts.push(Point3::new(mid_x, half, top + step * half));
            pos = s + 1;
        } else if pos == s + 1 {
            pts.push(Point3::new(mid_x, -half, top + step * half));
            pos = s;
        }
        pts.push(Point3::new(strand_x(pos), Q::zero(), top + step));
    }
    (pts, pos)
}

fn theta_letters(theta: &ThetaComplex, i: u32) -> Vec<u32> {
    let t = theta.braids.letters[(i - 1) as usize];
    braid::expand_group_letter(t, theta.n).expect("letters in range").into_iter().map(|l| l.index).collect()
}

fn append(out: &mut Vec<Point3>, piece: &[Point3]) -> Result<(), ExportError> {
    match out.last() {
        Some(last) if *last != piece[0] => {
            Err(ExportError::Template(format!("pieces do not meet at {:?}", piece[0])))
        }
        Some(_) => {
            out.extend_from_slice(&piece[1..]);
            Ok(())
        }
        None => {
            out.extend_from_slice(piece);
            Ok(())
        }
    }
}

fn realize_components(theta: &ThetaComplex, which: &[u32]) -> Result<Realization, ExportError> {
    let arcs = level_arcs(theta.n, theta.m);
    let mut polylines = Vec::new();
    for &j in which {
        let comp = &theta.components[(j - 1) as usize];
        let mut verts = Vec::new();
        for piece in &comp.chain {
            match *piece {
                ChainPiece::Level(s) => {
                    let pts = &arcs[&(s.level, s.column, s.role)];
                    if pts[0] != Point3::lattice(s.from) || pts[pts.len() - 1] != Point3::lattice(s.to) {
                        return Err(ExportError::Template(format!("level arc {s:?} misses its lattice points")));
                    }
                    append(&mut verts, pts)?;
                }
                ChainPiece::Braid { braid, top, bottom, upward, .. } => {
                    let (mut pts, end) = braid_path(&theta_letters(theta, braid), top.q, Q::from(2 * braid as i64 - 1));
                    if end != bottom.q {
                        return Err(ExportError::Template(format!("braid {braid} strand from {} ends at {end}", top.q)));
                    }
                    if upward {
                        pts.reverse();
                    }
                    append(&mut verts, &pts)?;
                }
            }
        }
        polylines.push(Polyline3 { component: j, vertices: verts });
    }
    let r = Realization { n: theta.n, polylines };
    check_disjoint(&r.polylines)?;
    Ok(r)
}

/// Realize every component of θ.
pub fn realize(theta: &ThetaComplex) -> Result<Realization, ExportError> {
    realize_components(theta, &(1..=theta.n).collect::<Vec<_>>())
}

pub fn realize_subtangle(sub: &Subtangle) -> Result<Realization, ExportError> {
    realize_components(&sub.parent, &sub.j0.iter().copied().collect::<Vec<_>>())
}

/// The `3n` strands of one group letter `Σ_t` on their own, in `z ∈ [0, 1]`.
pub fn realize_group_letter(t: u32, n: u32) -> Result<Realization, ExportError> {
    let letters: Vec<u32> = braid::expand_group_letter(t, n)
        .map_err(|e| ExportError::Template(e.to_string()))?
        .into_iter()
        .map(|l| l.index)
        .collect();
    let polylines = (1..=3 * n)
        .map(|q| Polyline3 { component: q, vertices: braid_path(&letters, q, Q::zero()).0 })
        .collect::<Vec<_>>();
    check_disjoint(&polylines)?;
    Ok(Realization { n, polylines })
}

// ---------------------------------------------------------------------------
// Exact geometry

type B = BigRational;

fn big(q: &Q) -> B {
    B::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()))
}

fn big3(p: &Point3) -> [B; 3] {
    [big(&p.x), big(&p.y), big(&p.z)]
}

fn dot(a: &[B], b: &[B]) -> B {
    a.iter().zip(b).map(|(x, y)| x * y).fold(B::zero(), |s, v| s + v)
}

fn sub(a: &[B], b: &[B]) -> Vec<B> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn clamp01(v: B) -> B {
    if v < B::zero() {
        B::zero()
    } else if v > B::one() {
        B::one()
    } else {
        v
    }
}

/// Exact squared distance between segments `p1q1` and `p2q2`.
pub fn segment_distance_sq(p1: &[B; 3], q1: &[B; 3], p2: &[B; 3], q2: &[B; 3]) -> B {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let c = dot(&d1, &r);
    let b = dot(&d1, &d2);
    let denom = &a * &e - &b * &b;
    let mut s = if denom.is_zero() { B::zero() } else { clamp01((&b * &f - &c * &e) / &denom) };
    let mut t = (&b * &s + &f) / &e;
    if t < B::zero() {
        t = B::zero();
        s = clamp01(-&c / &a);
    } else if t > B::one() {
        t = B::one();
        s = clamp01((&b - &c) / &a);
    }
    let diff: Vec<B> = (0..3).map(|k| (&p1[k] + &d1[k] * &s) - (&p2[k] + &d2[k] * &t)).collect();
    dot(&diff, &diff)
}

/// Index pairs of boxes that overlap (closed) in every coordinate.
fn overlapping_pairs<const D: usize>(boxes: &[([Q; D], [Q; D])]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[a].0[0].cmp(&boxes[b].0[0]).then(a.cmp(&b)));
    let mut active: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for &i in &order {
        let lo = boxes[i].0[0];
        active.retain(|&k| boxes[k].1[0] >= lo);
        for &k in &active {
            if (1..D).all(|d| boxes[k].0[d] <= boxes[i].1[d] && boxes[i].0[d] <= boxes[k].1[d]) {
                out.push((k.min(i), k.max(i)));
            }
        }
        active.push(i);
    }
    out.sort_unstable();
    out
}

struct Seg {
    strand: usize,
    index: usize,
}

fn segments(polys: &[Polyline3]) -> (Vec<Seg>, Vec<([Q; 3], [Q; 3])>) {
    let mut segs = Vec::new();
    let mut boxes = Vec::new();
    for (s, p) in polys.iter().enumerate() {
        for (k, w) in p.vertices.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            segs.push(Seg { strand: s, index: k });
            boxes.push((
                [a.z.min(b.z), a.x.min(b.x), a.y.min(b.y)],
                [a.z.max(b.z), a.x.max(b.x), a.y.max(b.y)],
            ));
        }
    }
    (segs, boxes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separation {
    /// Least squared distance over segment pairs with touching bounding boxes;
    /// `None` when no such pair exists.
    pub min_distance_sq: Option<Exact>,
    pub pairs_checked: usize,
}

/// Check that distinct polylines are disjoint and that no polyline meets
/// itself away from consecutive segments.
pub fn check_disjoint(polys: &[Polyline3]) -> Result<Separation, ExportError> {
    for p in polys {
        if p.vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(ExportError::Template(format!("component {} repeats a vertex", p.component)));
        }
    }
    let (segs, boxes) = segments(polys);
    let mut best: Option<B> = None;
    let mut checked = 0;
    for (a, b) in overlapping_pairs(&boxes) {
        let (sa, sb) = (&segs[a], &segs[b]);
        if sa.strand == sb.strand && sa.index.abs_diff(sb.index) <= 1 {
            continue;
        }
        let va = &polys[sa.strand].vertices;
        let vb = &polys[sb.strand].vertices;
        let d = segment_distance_sq(
            &big3(&va[sa.index]),
            &big3(&va[sa.index + 1]),
            &big3(&vb[sb.index]),
            &big3(&vb[sb.index + 1]),
        );
        checked += 1;
        if d.is_zero() {
            return Err(ExportError::SelfIntersection(
                (polys[sa.strand].component, sa.index),
                (polys[sb.strand].component, sb.index),
            ));
        }
        if best.as_ref().map_or(true, |m| d < *m) {
            best = Some(d);
        }
    }
    Ok(Separation { min_distance_sq: best.map(Exact), pairs_checked: checked })
}

// ---------------------------------------------------------------------------
// Projection

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    /// Index into the projection's strands.
    pub strand: usize,
    pub segment: usize,
    pub param: Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossing {
    pub point: [Exact; 2],
    pub over: Passage,
    pub under: Passage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectedStrand {
    pub component: u32,
    /// Projected `(x, z)` vertices.
    pub points: Vec<[Exact; 2]>,
    /// Depth `y` of each vertex.
    pub depths: Vec<Exact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramProjection {
    /// Shear coefficient: projected `x` is `x + shear·y`.
    #[serde(with = "ratio_str")]
    pub shear: Q,
    pub strands: Vec<ProjectedStrand>,
    pub crossings: Vec<Crossing>,
}

pub const SHEAR_STEP: (i64, i64) = (1, 1024);
pub const SHEAR_RETRIES: u32 = 3;

fn cross2(a: &[B], b: &[B]) -> B {
    &a[0] * &b[1] - &a[1] * &b[0]
}

fn try_project(polys: &[Polyline3], shear: Q) -> Result<DiagramProjection, String> {
    let k = big(&shear);
    let strands: Vec<ProjectedStrand> = polys
        .iter()
        .map(|p| ProjectedStrand {
            component: p.component,
            points: p.vertices.iter().map(|v| [Exact(big(&v.x) + &k * big(&v.y)), Exact(big(&v.z))]).collect(),
            depths: p.vertices.iter().map(|v| Exact(big(&v.y))).collect(),
        })
        .collect();
    let mut segs = Vec::new();
    let mut boxes: Vec<([Q; 2], [Q; 2])> = Vec::new();
    for (s, p) in polys.iter().enumerate() {
        for (i, w) in p.vertices.windows(2).enumerate() {
            // Boxes in (z, x) with the shear folded into a widened x range.
            let pad = shear.abs() * Q::from(2);
            segs.push(Seg { strand: s, index: i });
            boxes.push((
                [w[0].z.min(w[1].z), w[0].x.min(w[1].x) - pad],
                [w[0].z.max(w[1].z), w[0].x.max(w[1].x) + pad],
            ));
        }
    }
    let pt = |s: &Seg, k: usize| -> Vec<B> { strands[s.strand].points[s.index + k].iter().map(|e| e.0.clone()).collect() };
    let depth = |s: &Seg, t: &B| -> B {
        let d = &strands[s.strand].depths;
        &d[s.index].0 + (&d[s.index + 1].0 - &d[s.index].0) * t
    };
    let mut crossings = Vec::new();
    let mut seen_points: BTreeMap<(B, B), usize> = BTreeMap::new();
    for (a, b) in overlapping_pairs(&boxes) {
        let (sa, sb) = (&segs[a], &segs[b]);
        let adjacent = sa.strand == sb.strand && sa.index + 1 == sb.index;
        let (p, p2, q, q2) = (pt(sa, 0), pt(sa, 1), pt(sb, 0), pt(sb, 1));
        let r = sub(&p2, &p);
        let w = sub(&q2, &q);
        if r.iter().all(Zero::is_zero) || w.iter().all(Zero::is_zero) {
            return Err("segment projects to a point".into());
        }
        let qp = sub(&q, &p);
        let den = cross2(&r, &w);
        if den.is_zero() {
            if !cross2(&qp, &r).is_zero() {
                continue;
            }
            let rr = dot(&r, &r);
            let t0 = dot(&qp, &r) / &rr;
            let t1 = dot(&sub(&q2, &p), &r) / &rr;
            let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            let (lo, hi) = (lo.max(B::zero()), hi.min(B::one()));
            if lo < hi || (lo == hi && !adjacent) {
                return Err(format!("collinear overlap at strand {} segment {}", sa.strand, sa.index));
            }
            continue;
        }
        let s = cross2(&qp, &w) / &den;
        let t = cross2(&qp, &r) / &den;
        let unit = |v: &B| *v >= B::zero() && *v <= B::one();
        if !unit(&s) || !unit(&t) {
            continue;
        }
        if adjacent && s.is_one() && t.is_zero() {
            continue;
        }
        let interior = |v: &B| *v > B::zero() && *v < B::one();
        if !interior(&s) || !interior(&t) {
            return Err(format!("vertex on an edge at strand {} segment {}", sa.strand, sa.index));
        }
        let (ya, yb) = (depth(sa, &s), depth(sb, &t));
        if ya == yb {
            return Err(format!("strands meet at strand {} segment {}", sa.strand, sa.index));
        }
        let point = (&p[0] + &r[0] * &s, &p[1] + &r[1] * &s);
        if seen_points.insert(point.clone(), crossings.len()).is_some() {
            return Err("triple point".into());
        }
        let pa = Passage { strand: sa.strand, segment: sa.index, param: Exact(s) };
        let pb = Passage { strand: sb.strand, segment: sb.index, param: Exact(t) };
        let (over, under) = if ya > yb { (pa, pb) } else { (pb, pa) };
        crossings.push(Crossing { point: [Exact(point.0), Exact(point.1)], over, under });
    }
    let key = |c: &Crossing| {
        let first = if (c.over.strand, c.over.segment, &c.over.param) < (c.under.strand, c.under.segment, &c.under.param) {
            &c.over
        } else {
            &c.under
        };
        (first.strand, first.segment, first.param.clone())
    };
    crossings.sort_by_key(key);
    Ok(DiagramProjection { shear, strands, crossings })
}

/// Project along `y`, shearing by multiples of 1/1024 if the plain projection
/// is degenerate.
pub fn project(polys: &[Polyline3]) -> Result<DiagramProjection, ExportError> {
    let mut last = String::new();
    for attempt in 0..=SHEAR_RETRIES {
        let shear = Q::new(SHEAR_STEP.0 * attempt as i64, SHEAR_STEP.1);
        match try_project(polys, shear) {
            Ok(d) => return Ok(d),
            Err(e) if e.starts_with("strands meet") => {
                return Err(ExportError::Malformed(e));
            }
            Err(e) => last = e,
        }
    }
    Err(ExportError::NonGeneric { attempts: SHEAR_RETRIES + 1, detail: last })
}

// ---------------------------------------------------------------------------
// Diagram codes

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PdCrossing {
    /// Edge labels counterclockwise from the incoming under edge.
    pub ends: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenEnd {
    pub component: u32,
    pub edge: usize,
    pub start: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramCode {
    pub edge_count: usize,
    pub crossings: Vec<PdCrossing>,
    pub open_ends: Vec<OpenEnd>,
    /// Per strand: crossing numbers (1-based) in order, negative when passing under.
    pub gauss: Vec<(u32, Vec<i64>)>,
}

impl DiagramCode {
    pub fn arc_ends(&self) -> usize {
        4 * self.crossings.len()
    }

    /// Every edge label is used exactly twice.
    pub fn validate(&self) -> Result<(), ExportError> {
        let mut uses = vec![0u32; self.edge_count];
        let labels = self.crossings.iter().flat_map(|c| c.ends).chain(self.open_ends.iter().map(|o| o.edge));
        for e in labels {
            *uses.get_mut(e).ok_or_else(|| ExportError::Malformed(format!("edge {e} out of range")))? += 1;
        }
        if let Some(e) = uses.iter().position(|&u| u != 2) {
            return Err(ExportError::Malformed(format!("edge {e} used {} times", uses[e])));
        }
        let gauss_len: usize = self.gauss.iter().map(|g| g.1.len()).sum();
        if gauss_len != 2 * self.crossings.len() {
            return Err(ExportError::Malformed("Gauss words do not visit each crossing twice".into()));
        }
        Ok(())
    }
}

pub fn encode_diagram(d: &DiagramProjection) -> Result<DiagramCode, ExportError> {
    // Passages along each strand, ordered.
    let mut along: Vec<Vec<(usize, B, usize, bool)>> = vec![Vec::new(); d.strands.len()];
    for (id, c) in d.crossings.iter().enumerate() {
        for (p, over) in [(&c.over, true), (&c.under, false)] {
            let strand = along.get_mut(p.strand).ok_or_else(|| ExportError::Malformed("unknown strand".into()))?;
            strand.push((p.segment, p.param.0.clone(), id, over));
        }
    }
    let mut edge_in: Vec<[Option<usize>; 2]> = vec![[None; 2]; d.crossings.len()];
    let mut edge_out: Vec<[Option<usize>; 2]> = vec![[None; 2]; d.crossings.len()];
    let mut open_ends = Vec::new();
    let mut gauss = Vec::new();
    let mut next = 0usize;
    for (s, list) in along.iter_mut().enumerate() {
        list.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        let comp = d.strands[s].component;
        open_ends.push(OpenEnd { component: comp, edge: next, start: true });
        let mut word = Vec::new();
        for (_, _, id, over) in list.iter() {
            let slot = usize::from(!*over);
            edge_in[*id][slot] = Some(next);
            next += 1;
            edge_out[*id][slot] = Some(next);
            word.push(if *over { *id as i64 + 1 } else { -(*id as i64 + 1) });
        }
        open_ends.push(OpenEnd { component: comp, edge: next, start: false });
        next += 1;
        gauss.push((comp, word));
    }
    let dir = |p: &Passage| -> Vec<B> {
        let pts = &d.strands[p.strand].points;
        // Math orientation: flip z so that counterclockwise is the usual sense.
        let (a, b) = (&pts[p.segment], &pts[p.segment + 1]);
        vec![&b[0].0 - &a[0].0, &a[1].0 - &b[1].0]
    };
    let crossings = d
        .crossings
        .iter()
        .enumerate()
        .map(|(id, c)| {
            let get = |v: Option<usize>| v.ok_or_else(|| ExportError::Malformed(format!("crossing {id} unlabelled")));
            let (ui, uo) = (get(edge_in[id][1])?, get(edge_out[id][1])?);
            let (oi, oo) = (get(edge_in[id][0])?, get(edge_out[id][0])?);
            // Counterclockwise from the incoming under end (at -u), the next end
            // is the outgoing over end when `o` turns left of `-u`.
            let u: Vec<B> = dir(&c.under).iter().map(|v| -v).collect();
            let o = dir(&c.over);
            let ends = if cross2(&u, &o) > B::zero() { [ui, oo, uo, oi] } else { [ui, oi, uo, oo] };
            Ok(PdCrossing { ends })
        })
        .collect::<Result<Vec<_>, ExportError>>()?;
    let code = DiagramCode { edge_count: next, crossings, open_ends, gauss };
    code.validate()?;
    Ok(code)
}

/// One crossing tuple per line, then the open ends.
pub fn pd_text(code: &DiagramCode) -> String {
    let mut s = String::new();
    for c in &code.crossings {
        let [a, b, cc, d] = c.ends;
        let _ = writeln!(s, "X[{a},{b},{cc},{d}]");
    }
    for o in &code.open_ends {
        let _ = writeln!(s, "O[{},{},{}]", o.edge, o.component, if o.start { "start" } else { "end" });
    }
    s
}

pub fn gauss_text(code: &DiagramCode) -> String {
    let mut s = String::new();
    for (comp, word) in &code.gauss {
        let w: Vec<String> = word.iter().map(i64::to_string).collect();
        let _ = writeln!(s, "{comp}: {}", w.join(" "));
    }
    s
}

// ---------------------------------------------------------------------------
// SVG

const SCALE: f64 = 40.0;
const MARGIN: f64 = 20.0;
const GAP: f64 = 0.08;
const PALETTE: [&str; 6] = ["#1f4e79", "#a83232", "#2e7d32", "#6a1b9a", "#ef6c00", "#00838f"];

fn f(b: &B) -> f64 {
    b.to_f64().unwrap_or(0.0)
}

pub fn render_svg(d: &DiagramProjection) -> String {
    let all = d.strands.iter().flat_map(|s| s.points.iter());
    let (mut w, mut hgt) = (0.0f64, 0.0f64);
    for p in all {
        w = w.max(f(&p[0].0));
        hgt = hgt.max(f(&p[1].0));
    }
    let (w, hgt) = (w * SCALE + 2.0 * MARGIN, hgt * SCALE + 2.0 * MARGIN);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.1}" height="{hgt:.1}" viewBox="0 0 {w:.1} {hgt:.1}">"#
    );
    let mut unders: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d.strands.len()];
    for c in &d.crossings {
        unders[c.under.strand].push((c.under.segment, f(&c.under.param.0)));
    }
    for (s, strand) in d.strands.iter().enumerate() {
        let pts: Vec<(f64, f64)> = strand.points.iter().map(|p| (f(&p[0].0), f(&p[1].0))).collect();
        let mut cuts = unders[s].clone();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let colour = PALETTE[(strand.component as usize + PALETTE.len() - 1) % PALETTE.len()];
        let mut pieces: Vec<Vec<(f64, f64)>> = vec![vec![pts[0]]];
        let mut ci = 0;
        for k in 0..pts.len() - 1 {
            let (a, b) = (pts[k], pts[k + 1]);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt().max(1e-12);
            while ci < cuts.len() && cuts[ci].0 == k {
                let t = cuts[ci].1;
                let g = GAP / len;
                let at = |t: f64| (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
                pieces.last_mut().unwrap().push(at((t - g).max(0.0)));
                pieces.push(vec![at((t + g).min(1.0))]);
                ci += 1;
            }
            pieces.last_mut().unwrap().push(b);
        }
        for piece in pieces {
            let coords: Vec<String> =
                piece.iter().map(|(x, z)| format!("{:.3},{:.3}", x * SCALE + MARGIN, z * SCALE + MARGIN)).collect();
            let _ = writeln!(
                out,
                r#"  <polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5" stroke-linejoin="round"/>"#,
                coords.join(" ")
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

// ---------------------------------------------------------------------------
// Files

pub const FORMAT: &str = "polytangle";
pub const FORMAT_VERSION: u32 = 1;

/// A value that can be stored in a document; `KIND` names it in the envelope.
pub trait Document: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

macro_rules! documents {
    ($($t:ty => $k:literal),* $(,)?) => { $(impl Document for $t { const KIND: &'static str = $k; })* };
}

documents! {
    ThetaComplex => "ThetaComplex",
    Subtangle => "Subtangle",
    OccupancyTrace => "OccupancyTrace",
    ExcellenceCertificate => "ExcellenceCertificate",
    NestingForest => "NestingForest",
    PeriodicForest => "PeriodicForest",
    PushSchedule => "PushSchedule",
    AnnulusTrace => "AnnulusTrace",
    PatchTree => "PatchTree",
    ExhaustionDescriptor => "ExhaustionDescriptor",
    BinaryLabeling => "BinaryLabeling",
    Realization => "Realization",
    DiagramProjection => "DiagramProjection",
    DiagramCode => "DiagramCode",
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    data: T,
}

pub fn to_json<T: Document>(value: &T) -> String {
    let env = Envelope { format: FORMAT.into(), version: FORMAT_VERSION, kind: T::KIND.into(), data: value };
    serde_json::to_string_pretty(&env).expect("documents serialize")
}

pub fn from_json<T: Document>(text: &str) -> Result<T, ExportError> {
    let schema = |path: &str, message: String| ExportError::Schema { path: path.into(), message };
    let env: Envelope<serde_json::Value> = {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| schema(&e.path().to_string(), e.inner().to_string()))?
    };
    if env.format != FORMAT {
        return Err(schema("format", format!("expected {FORMAT:?}, found {:?}", env.format)));
    }
    if env.version != FORMAT_VERSION {
        return Err(schema("version", format!("unsupported version {}", env.version)));
    }
    if env.kind != T::KIND {
        return Err(schema("kind", format!("expected {}, found {}", T::KIND, env.kind)));
    }
    serde_path_to_error::deserialize(env.data).map_err(|e| schema(&format!("data.{}", e.path()), e.inner().to_string()))
}
