//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any fails. Oracles here are written independently of the
//! library routines they check.

use num_traits::Zero;
use polytangle::braid;
use polytangle::engulf::{self, CertNode};
use polytangle::exhaustion::{self, SurfaceDescriptor};
use polytangle::export::{self, Document};
use polytangle::isotopy::{self, NestingForest, PeriodicForest, PeriodicNode, RegionLadder};
use polytangle::labeling::{self, Agreement, EventuallyPeriodic};
use polytangle::tangle::{self, ThetaComplex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt::Debug;
use std::time::{Duration, Instant};

// Pinned limits.
const CERT_MAX_N: u32 = 6;
const CERT_BUDGET: Duration = Duration::from_secs(60);
const MIN_GLUE_PUNCTURES: u32 = 2;
const ADJACENCY_MAX_N: u32 = 12;
const BRAID_MAX_N: u32 = 12;
const LETTERS_PER_GROUP_CROSSING: usize = 9;
const INCIDENCE_MAX_N: u32 = 8;
const INCIDENCE_GEOMETRY_MAX_N: u32 = 4;
const OCCUPANCY_MAX_N: u32 = 8;
const FOREST_CASES: u64 = 200;
const FOREST_MAX_CURVES: usize = 100;
const FOREST_REGIONS: u32 = 10;
const SCHEDULER_BUDGET: Duration = Duration::from_secs(10);
const TREE_CASES: u64 = 200;
const TREE_MAX_DEPTH: u32 = 10;
const TREE_MAX_VERTICES: usize = 200;
const EXHAUSTION_CASES: u64 = 500;
const LABEL_PAIRS: u64 = 500;
const FAMILY_SIZE: usize = 20;
const EXPORT_MAX_N: u32 = 5;
const ROUNDTRIP_CASES: u64 = 12;
const SEED: u64 = 0x7067_6c79;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn subsets(n: u32) -> Vec<Vec<u32>> {
    (1u32..1 << n).map(|mask| (1..=n).filter(|j| mask >> (j - 1) & 1 == 1).collect()).collect()
}

/// Column of each component after each group letter, by direct swapping.
fn phi_oracle(n: u32, letters: &[u32]) -> Vec<Vec<u32>> {
    let mut at: Vec<u32> = (1..=n).collect();
    let mut rows = vec![at.clone()];
    for &t in letters {
        for c in at.iter_mut() {
            if *c == t {
                *c = t + 1;
            } else if *c == t + 1 {
                *c = t;
            }
        }
        rows.push(at.clone());
    }
    rows
}

fn certificates() -> Outcome {
    let start = Instant::now();
    let jobs: Vec<(u32, Vec<u32>)> = (2..=CERT_MAX_N).flat_map(|n| subsets(n).into_iter().map(move |s| (n, s))).collect();
    let thetas: Vec<ThetaComplex> = (0..=CERT_MAX_N).map(|n| tangle::build_theta(n.max(2)).unwrap()).collect();
    let results: Vec<Result<usize, String>> = jobs
        .par_iter()
        .map(|(n, j0)| {
            let sub = tangle::select_subtangle(&thetas[*n as usize], j0.iter().copied()).map_err(|e| e.to_string())?;
            let cert = engulf::engulf_verify(&sub).map_err(|e| format!("n={n} {j0:?}: {e}"))?;
            engulf::validate_certificate(&cert).map_err(|e| format!("n={n} {j0:?}: {e}"))?;
            let mut glues = 0;
            for node in &cert.nodes {
                if let CertNode::Glue { check, .. } = node {
                    glues += 1;
                    for c in check.components.iter().filter(|c| c.is_disk_portion) {
                        // χ of a disk with k punctures is 1 - k.
                        ensure(c.punctures >= MIN_GLUE_PUNCTURES && 1 - (c.punctures as i64) <= -1, || {
                            format!("n={n} {j0:?}: interface with {} punctures", c.punctures)
                        })?;
                    }
                }
            }
            Ok(glues)
        })
        .collect();
    let elapsed = start.elapsed();
    let mut glues = 0;
    for r in results {
        glues += r?;
    }
    ensure(elapsed < CERT_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{} certificates, {glues} gluings, {:.1}s", jobs.len(), elapsed.as_secs_f64()))
}

fn adjacency() -> Outcome {
    let mut pairs = 0;
    for n in 2..=ADJACENCY_MAX_N {
        let theta = tangle::build_theta(n).unwrap();
        let phi = phi_oracle(n, &braid::half_twist_sequence(n).unwrap());
        ensure(phi == theta.phi, || format!("n={n}: φ table differs from direct swapping"))?;
        for j in 1..n {
            for k in j + 1..=n {
                let i = tangle::adjacency_witness(&theta, j, k).map_err(|e| format!("n={n} ({j},{k}): {e}"))?;
                let (a, b) = (phi[i as usize][(j - 1) as usize], phi[i as usize][(k - 1) as usize]);
                ensure(b == a + 1, || format!("n={n} ({j},{k}) at level {i}: φ = {a}, {b}"))?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} pairs"))
}

fn braids() -> Outcome {
    for n in 2..=BRAID_MAX_N {
        let seq = braid::half_twist_sequence(n).unwrap();
        let word = braid::expand_group_word(&braid::half_twist_word(n).unwrap()).unwrap();
        let want = LETTERS_PER_GROUP_CROSSING * (n * (n - 1) / 2) as usize;
        ensure(word.letters.len() == want, || format!("n={n}: {} letters, want {want}", word.letters.len()))?;
        let groups = braid::induced_group_permutation(&braid::half_twist_word(n).unwrap()).unwrap();
        ensure(groups.is_reversal(), || format!("n={n}: group permutation {:?}", groups.image))?;
        // Follow each strand through the letters by hand.
        let k = 3 * n;
        let mut pos: Vec<u32> = (1..=k).collect();
        for l in &word.letters {
            for p in pos.iter_mut() {
                if *p == l.index {
                    *p += 1;
                } else if *p == l.index + 1 {
                    *p -= 1;
                }
            }
        }
        for s in 1..=k {
            let (g, r) = ((s - 1) / 3, (s - 1) % 3);
            let want = 3 * (n - 1 - g) + r + 1;
            ensure(pos[(s - 1) as usize] == want, || format!("n={n}: strand {s} ends at {}", pos[(s - 1) as usize]))?;
        }
        let perm = braid::induced_strand_permutation(&word).unwrap();
        let fwd = (1..=k).all(|s| perm.apply(s) == pos[(s - 1) as usize]);
        let inv = (1..=k).all(|s| perm.inverse().apply(s) == pos[(s - 1) as usize]);
        ensure(fwd || inv, || format!("n={n}: induced strand permutation disagrees"))?;
        ensure(seq.len() == (n * (n - 1) / 2) as usize, || format!("n={n}: sequence length {}", seq.len()))?;
    }
    Ok(format!("n = 2..={BRAID_MAX_N}"))
}

fn incidence() -> Outcome {
    let mut checked = 0;
    for n in 2..=INCIDENCE_MAX_N {
        let theta = tangle::build_theta(n).unwrap();
        let top = 2 * theta.m + 1;
        let realized = (n <= INCIDENCE_GEOMETRY_MAX_N).then(|| export::realize(&theta).unwrap());
        for j in 1..=n {
            for p in 0..=top {
                let want = if p == 0 || p == top { 1 } else { 3 };
                let got = tangle::disk_incidence(&theta, j, p).unwrap();
                ensure(got == want, || format!("n={n} j={j} p={p}: {got}"))?;
                if let Some(r) = &realized {
                    // Second route: vertices of the realized arc on the plane z = p,
                    // with no edge running inside the plane.
                    let z = export::Q::from(p as i64);
                    let v = &r.polylines[(j - 1) as usize].vertices;
                    let on = v.iter().filter(|q| q.z == z).count() as u32;
                    let flat = v.windows(2).any(|w| w[0].z == z && w[1].z == z);
                    ensure(on == want && !flat, || format!("n={n} j={j} p={p}: realized arc meets plane {on} times"))?;
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (component, plane) pairs"))
}

fn occupancy() -> Outcome {
    let mut traces = 0;
    for n in 2..=OCCUPANCY_MAX_N {
        let theta = tangle::build_theta(n).unwrap();
        let letters = &theta.braids.letters;
        let phi = phi_oracle(n, letters);
        let rows: Vec<Result<(), String>> = subsets(n)
            .par_iter()
            .map(|j0| {
                let sub = tangle::select_subtangle(&theta, j0.iter().copied()).unwrap();
                let tr = engulf::occupancy_trace(&sub);
                engulf::check_trace_rules(&tr, letters).map_err(|e| format!("n={n} {j0:?}: {e}"))?;
                let cols = |i: usize| -> BTreeSet<u32> { j0.iter().map(|&j| phi[i][(j - 1) as usize]).collect() };
                for i in 0..letters.len() {
                    let (a, b) = (cols(i), cols(i + 1));
                    ensure(tr.j[i] == a && tr.j[i + 1] == b, || format!("n={n} {j0:?}: J_{i} differs"))?;
                    // Each transition occupies the union of both column sets.
                    let u: BTreeSet<u32> = a.union(&b).copied().collect();
                    ensure(tr.i[i] == u, || format!("n={n} {j0:?}: I_{} = {:?}, want {u:?}", i + 1, tr.i[i]))?;
                    ensure(tr.s[i] == tr.t[i + 1], || format!("n={n} {j0:?}: S_{} != T_{}", i + 1, i + 1))?;
                }
                Ok(())
            })
            .collect();
        for r in rows {
            r?;
            traces += 1;
        }
    }
    let sub = tangle::select_subtangle(&tangle::build_theta(3).unwrap(), [2]).unwrap();
    let tr = engulf::occupancy_trace(&sub);
    let tm = &tr.t[tr.m()];
    ensure(*tm == BTreeSet::from([1, 2]), || format!("n=3 {{2}}: T_m = {tm:?}"))?;
    let cert = engulf::engulf_verify(&sub).map_err(|e| e.to_string())?;
    ensure(cert.untouched_columns == vec![3], || format!("untouched {:?}", cert.untouched_columns))?;
    ensure(engulf::validate_certificate(&cert).is_ok(), || "final pass certificate invalid".into())?;
    Ok(format!("{traces} traces; n=3 {{2}} gives T_m = {{1, 2}}, column 3 adjoined at the end"))
}

/// Remove innermost live targets with everything they enclose until none remain.
fn naive_removal(f: &NestingForest) -> BTreeSet<u32> {
    let mut kids = vec![Vec::new(); f.nodes.len()];
    for n in &f.nodes {
        for p in [n.p_parent, n.q_parent].into_iter().flatten() {
            kids[p as usize].push(n.id);
        }
    }
    let below = |k: u32| {
        let mut seen = BTreeSet::from([k]);
        let mut stack = vec![k];
        while let Some(u) = stack.pop() {
            for &c in &kids[u as usize] {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    };
    let mut live: BTreeSet<u32> = (0..f.nodes.len() as u32).collect();
    while let Some(k) = live
        .iter()
        .copied()
        .find(|&k| f.nodes[k as usize].target && below(k).iter().all(|&d| d == k || !live.contains(&d) || !f.nodes[d as usize].target))
    {
        for d in below(k) {
            live.remove(&d);
        }
    }
    live
}

fn scheduler() -> Outcome {
    let start = Instant::now();
    let mut pushes = 0;
    for case in 0..FOREST_CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ case);
        let f = isotopy::random_forest(&mut rng, FOREST_MAX_CURVES, FOREST_REGIONS);
        let s = isotopy::schedule_removal(&f, &RegionLadder { levels: FOREST_REGIONS - 1 }).map_err(|e| format!("case {case}: {e}"))?;
        let left = isotopy::apply_schedule(&f, &s).map_err(|e| format!("case {case}: {e}"))?;
        ensure(left == naive_removal(&f), || format!("case {case}: final pattern differs"))?;
        for (si, st) in s.stages.iter().enumerate() {
            for (a, ea) in st.entries.iter().enumerate() {
                for eb in &st.entries[a + 1..] {
                    let sa: BTreeSet<u32> = ea.pushes.iter().flat_map(|p| p.support.iter().copied()).collect();
                    let sb: BTreeSet<u32> = eb.pushes.iter().flat_map(|p| p.support.iter().copied()).collect();
                    let touch = sa.iter().any(|&x| sb.iter().any(|&y| x.abs_diff(y) <= 1));
                    ensure(!touch, || format!("case {case} stage {si}: supports {sa:?} and {sb:?} are adjacent"))?;
                }
            }
        }
        pushes += s.push_count();
    }
    let elapsed = start.elapsed();
    ensure(elapsed < SCHEDULER_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{FOREST_CASES} forests, {pushes} pushes, {:.1}s", elapsed.as_secs_f64()))
}

fn patch_trees() -> Outcome {
    let mut moves = 0;
    for case in 0..TREE_CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (case << 8));
        let depth = rng.gen_range(1..=TREE_MAX_DEPTH);
        let t = isotopy::random_patch_tree(&mut rng, depth, TREE_MAX_VERTICES);
        ensure(t.patches.len() <= TREE_MAX_VERTICES, || format!("case {case}: generator overshot"))?;
        let m = isotopy::monotonize_patch_tree(&t, depth).map_err(|e| format!("case {case}: {e}"))?;
        for lvl in 0..=depth {
            // Patches up to level `lvl`, joined only through each other.
            let slice: Vec<u32> = m.tree.patches.values().filter(|p| p.level <= lvl).map(|p| p.id).collect();
            let mut seen = BTreeSet::new();
            if let Some(&s) = slice.first() {
                let mut stack = vec![s];
                seen.insert(s);
                while let Some(u) = stack.pop() {
                    for w in m.tree.neighbors(u) {
                        if m.tree.patches[&w].level <= lvl && seen.insert(w) {
                            stack.push(w);
                        }
                    }
                }
            }
            ensure(slice.iter().all(|v| seen.contains(v)), || format!("case {case}: slice {lvl} disconnected"))?;
        }
        ensure(m.tree.slices_connected(depth), || format!("case {case}: library reports a disconnected slice"))?;
        let low = m.tree.patches.values().find(|p| p.id != m.tree.root && p.order < 2);
        ensure(low.is_none(), || format!("case {case}: patch {:?} has order < 2", low))?;
        ensure(m.moves.iter().all(|mv| mv.created_order >= 2), || format!("case {case}: a move created order < 2"))?;
        ensure(m.moves.len() <= t.patches.len(), || format!("case {case}: {} moves for {} patches", m.moves.len(), t.patches.len()))?;
        moves += m.moves.len();
    }
    Ok(format!("{TREE_CASES} trees, {moves} moves"))
}

fn chi(s: &SurfaceDescriptor) -> i64 {
    let (g, b) = (s.genus_or_crosscaps as i64, s.boundary_circles as i64);
    if s.orientable {
        2 - 2 * g - b
    } else {
        2 - g - b
    }
}

fn exhaustions() -> Outcome {
    let mut carved = 0;
    let mut deleted = 0;
    for case in 0..EXHAUSTION_CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (case << 16));
        let u = exhaustion::random_interior_descriptor(&mut rng);
        let fr = u.frontiers();
        let ok = fr.iter().flat_map(|f| f.iter()).all(|c| chi(&c.surface) < 0 && (!c.surface.orientable || c.surface.genus_or_crosscaps > 0));
        ensure(ok, || format!("case {case}: generator broke the preconditions"))?;
        let (nu, map) = exhaustion::random_piercing(&mut rng, &u);
        let m = exhaustion::carve_rays(&u, &nu, Some(&map)).map_err(|e| format!("case {case}: {e}"))?;
        let total = |d: &exhaustion::ExhaustionDescriptor| -> i64 { d.frontiers().iter().flat_map(|f| f.iter()).map(|c| chi(&c.surface)).sum() };
        let piercings = nu.iter().map(|&v| v as i64).sum::<i64>() * fr.len() as i64;
        ensure(total(&m) == total(&u) - piercings, || format!("case {case}: Δχ = {}, want -{piercings}", total(&m) - total(&u)))?;
        ensure(exhaustion::frontier_chi(&m) == total(&m), || format!("case {case}: χ bookkeeping differs"))?;
        if nu.iter().all(|&v| v == 0) {
            continue;
        }
        let nice = exhaustion::check_nice(&m);
        ensure(nice.passed, || format!("case {case}: not nice: {:?}", nice.failures))?;
        carved += 1;
        if nu.iter().all(|&v| v >= 1) {
            let kept: Vec<u32> = nu.iter().map(|&v| rng.gen_range(1..=v)).collect();
            let (d, recs) = exhaustion::delete_planes(&m, &kept).map_err(|e| format!("case {case}: {e}"))?;
            ensure(exhaustion::check_nice(&d).passed, || format!("case {case}: not nice after deletion"))?;
            for r in recs {
                let k = kept[(r.end - 1) as usize] as i64;
                let closed = 2 - 2 * (k - 1) - 2;
                ensure(r.residual_chi == closed && chi(&r.residual) == closed, || {
                    format!("case {case}: residual χ {} for ν' = {k}, want {closed}", r.residual_chi)
                })?;
                ensure(r.splitting_chi < 0, || format!("case {case}: splitting χ {}", r.splitting_chi))?;
            }
            deleted += 1;
        }
    }
    Ok(format!("{EXHAUSTION_CASES} descriptors, {carved} carved, {deleted} with planes deleted"))
}

/// Term-by-term comparison far enough out to see a full joint period twice.
fn brute_agreement(a: &EventuallyPeriodic, b: &EventuallyPeriodic) -> Option<u64> {
    let term = |s: &EventuallyPeriodic, n: usize| -> u8 {
        if n <= s.prefix.len() {
            s.prefix[n - 1]
        } else {
            s.period[(n - s.prefix.len() - 1) % s.period.len()]
        }
    };
    let pre = a.prefix.len().max(b.prefix.len());
    let l = a.period.len() * b.period.len();
    let horizon = pre + 2 * l;
    let differ: Vec<usize> = (1..=horizon).filter(|&n| term(a, n) != term(b, n)).collect();
    match differ.last() {
        Some(&n) if n > pre => None,
        Some(&n) => Some(n as u64 + 1),
        None => Some(1),
    }
}

fn labelings() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut infinite = 0;
    for case in 0..LABEL_PAIRS {
        let (a, b) = (labeling::random_sequence(&mut rng), labeling::random_sequence(&mut rng));
        let got = match labeling::eventual_agreement(&a, &b) {
            Agreement::AgreesFrom(m) => Some(m),
            Agreement::InfiniteDisagreement { .. } => None,
        };
        let want = brute_agreement(&a, &b);
        ensure(got == want, || format!("pair {case}: {got:?} vs brute force {want:?}"))?;
        infinite += usize::from(got.is_none());
    }
    let family = labeling::generate_family(FAMILY_SIZE, SEED).map_err(|e| e.to_string())?;
    ensure(family.len() == FAMILY_SIZE, || format!("{} labelings", family.len()))?;
    for a in 0..family.len() {
        for b in a + 1..family.len() {
            let ob = labeling::homeomorphism_obstruction(&family[a], &family[b]).map_err(|e| e.to_string())?;
            // Confirm at least one obstructing slot by brute force.
            let witnessed = ob.slots.iter().any(|&(i, j)| {
                let (x, y) = (family[a].get(i, j).unwrap(), family[b].get(i, j).unwrap());
                brute_agreement(x, y).is_none()
            });
            ensure(witnessed, || format!("labelings {a} and {b} are not obstructed"))?;
        }
    }
    Ok(format!("{LABEL_PAIRS} pairs ({infinite} infinite), family of {FAMILY_SIZE} pairwise obstructed"))
}

fn roundtrip<T: Document + PartialEq + Debug>(value: &T) -> Result<(), String> {
    let back: T = export::from_json(&export::to_json(value)).map_err(|e| format!("{}: {e}", T::KIND))?;
    ensure(back == *value, || format!("{} changed in a roundtrip", T::KIND))
}

fn export_checks() -> Outcome {
    let mut summary = Vec::new();
    for n in 2..=EXPORT_MAX_N {
        let theta = tangle::build_theta(n).unwrap();
        let r = export::realize(&theta).map_err(|e| format!("n={n}: {e}"))?;
        let sep = export::check_disjoint(&r.polylines).map_err(|e| format!("n={n}: {e}"))?;
        let d2 = sep.min_distance_sq.ok_or_else(|| format!("n={n}: no nearby segments"))?.0;
        ensure(d2 > Zero::zero(), || format!("n={n}: arcs touch"))?;
        let ext = tangle::box_extent(n);
        let inside = r.polylines.iter().flat_map(|p| &p.vertices).all(|v| {
            v.x >= export::Q::from(ext.x.0) && v.x <= export::Q::from(ext.x.1) && v.z >= export::Q::from(ext.z.0) && v.z <= export::Q::from(ext.z.1)
        });
        ensure(inside, || format!("n={n}: vertex outside the box"))?;
        if n <= 4 {
            let d = export::project(&r.polylines).map_err(|e| format!("n={n}: {e}"))?;
            let code = export::encode_diagram(&d).map_err(|e| format!("n={n}: {e}"))?;
            let c = code.crossings.len();
            ensure(code.arc_ends() + code.open_ends.len() == 2 * code.edge_count, || format!("n={n}: arc ends do not match edges"))?;
            ensure(code.open_ends.len() == 2 * n as usize, || format!("n={n}: {} open ends", code.open_ends.len()))?;
            let mut uses = vec![0u32; code.edge_count];
            for e in code.crossings.iter().flat_map(|x| x.ends).chain(code.open_ends.iter().map(|o| o.edge)) {
                uses[e] += 1;
            }
            ensure(uses.iter().all(|&u| u == 2), || format!("n={n}: an edge label is not used twice"))?;
            let gauss: usize = code.gauss.iter().map(|g| g.1.len()).sum();
            ensure(gauss == 2 * c, || format!("n={n}: Gauss words have {gauss} entries for {c} crossings"))?;
            summary.push(format!("n={n}: {c} crossings"));
        }
    }
    let letter = export::realize_group_letter(1, 2).map_err(|e| e.to_string())?;
    let c = export::project(&letter.polylines).map_err(|e| e.to_string())?.crossings.len();
    ensure(c == LETTERS_PER_GROUP_CROSSING, || format!("one group letter has {c} crossings"))?;

    // Roundtrips of every document type on seeded instances.
    for case in 0..ROUNDTRIP_CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (case << 24));
        let n = rng.gen_range(2..=4);
        let theta = tangle::build_theta(n).unwrap();
        let j0: Vec<u32> = (1..=n).filter(|_| rng.gen_bool(0.5)).collect();
        let j0 = if j0.is_empty() { vec![rng.gen_range(1..=n)] } else { j0 };
        let sub = tangle::select_subtangle(&theta, j0.iter().copied()).unwrap();
        roundtrip(&theta)?;
        roundtrip(&sub)?;
        roundtrip(&engulf::occupancy_trace(&sub))?;
        roundtrip(&engulf::engulf_verify(&sub).map_err(|e| e.to_string())?)?;
        let f = isotopy::random_forest(&mut rng, 40, 6);
        roundtrip(&f)?;
        roundtrip(&isotopy::schedule_removal(&f, &RegionLadder { levels: 5 }).map_err(|e| e.to_string())?)?;
        let base: Vec<PeriodicNode> = (0..rng.gen_range(1..4))
            .map(|_| PeriodicNode {
                kind: isotopy::CurveKind::Circle,
                p_parent: None,
                q_parent: None,
                region: rng.gen_range(0..2),
                target: rng.gen_bool(0.5),
                boundary_region: false,
            })
            .collect();
        roundtrip(&PeriodicForest { period: 2, base })?;
        roundtrip(&isotopy::random_trace(&mut rng, 1, 6, 3))?;
        roundtrip(&isotopy::random_patch_tree(&mut rng, 5, 60))?;
        roundtrip(&exhaustion::random_interior_descriptor(&mut rng))?;
        roundtrip(&labeling::generate_family(2, rng.gen()).map_err(|e| e.to_string())?[0])?;
        let r = export::realize_subtangle(&sub).map_err(|e| e.to_string())?;
        roundtrip(&r)?;
        if n == 2 {
            let d = export::project(&r.polylines).map_err(|e| e.to_string())?;
            roundtrip(&export::encode_diagram(&d).map_err(|e| e.to_string())?)?;
            roundtrip(&d)?;
        }
    }
    summary.push(format!("{ROUNDTRIP_CASES} roundtrip rounds"));
    Ok(summary.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("certificate construction", certificates),
        ("adjacency", adjacency),
        ("braid", braids),
        ("incidence", incidence),
        ("occupancy", occupancy),
        ("scheduler oracle", scheduler),
        ("patch trees", patch_trees),
        ("exhaustion", exhaustions),
        ("labeling", labelings),
        ("export", export_checks),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match run() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}) [{:.1}s]", k + 1, t.elapsed().as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL: {e}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
