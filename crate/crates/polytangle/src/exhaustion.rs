//! Surface and exhaustion descriptors. Topological properties that are not
//! decidable from a descriptor (irreducibility, anannularity, excellence)
//! are carried as declared flags; only the Euler characteristic, genus and
//! count arithmetic is validated here.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExhaustionError {
    #[error("invalid descriptor: {0}")]
    Invalid(String),
    #[error("level {level}, end {end}, component {component}: {reason}")]
    Precondition { level: usize, end: u32, component: usize, reason: String },
    #[error("end {end}: kept {kept} of {planes} planes; need 1 <= kept <= planes")]
    PlaneCountOutOfRange { end: u32, kept: u32, planes: u32 },
    #[error("splitting surface at piece {piece}, end {end} has Euler characteristic {chi}")]
    ChiCheck { piece: usize, end: u32, chi: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceDescriptor {
    pub orientable: bool,
    /// Genus if orientable, number of crosscaps otherwise.
    pub genus_or_crosscaps: u32,
    pub boundary_circles: u32,
}

impl SurfaceDescriptor {
    pub fn orientable(genus: u32, boundary: u32) -> Self {
        SurfaceDescriptor { orientable: true, genus_or_crosscaps: genus, boundary_circles: boundary }
    }

    pub fn nonorientable(crosscaps: u32, boundary: u32) -> Self {
        SurfaceDescriptor { orientable: false, genus_or_crosscaps: crosscaps, boundary_circles: boundary }
    }

    pub fn validate(&self) -> Result<(), ExhaustionError> {
        if !self.orientable && self.genus_or_crosscaps == 0 {
            return Err(ExhaustionError::Invalid("non-orientable surface needs a crosscap".into()));
        }
        Ok(())
    }

    pub fn is_disk(&self) -> bool {
        self.orientable && self.genus_or_crosscaps == 0 && self.boundary_circles == 1
    }

    pub fn is_planar(&self) -> bool {
        self.orientable && self.genus_or_crosscaps == 0
    }
}

pub fn euler_characteristic(s: &SurfaceDescriptor) -> i64 {
    let g = s.genus_or_crosscaps as i64;
    let b = s.boundary_circles as i64;
    if s.orientable {
        2 - 2 * g - b
    } else {
        2 - g - b
    }
}

/// A frontier component together with the end (1-based) it faces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierComponent {
    pub end: u32,
    pub surface: SurfaceDescriptor,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PieceFlags {
    pub p2_irreducible: bool,
    pub boundary_irreducible: bool,
    pub anannular: bool,
    pub is_product: bool,
    pub excellent: bool,
    /// Frontier incompressible in the piece.
    pub incompressible_frontier: bool,
    /// Where the flags come from.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceDescriptor {
    pub frontier_in: Vec<FrontierComponent>,
    pub frontier_out: Vec<FrontierComponent>,
    /// `boundary_annuli_per_plane[i][j]`: annuli in which the piece meets plane `j` of end `i`.
    pub boundary_annuli_per_plane: Vec<Vec<u32>>,
    pub flags: PieceFlags,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustionDescriptor {
    pub ends: u32,
    /// Boundary planes per end.
    pub planes: Vec<u32>,
    pub pieces: Vec<PieceDescriptor>,
    /// Components of the complement of each `C_n`, one entry per frontier level.
    pub complement_counts: Vec<u32>,
    /// For each end, the index (among that end's frontier components) pierced by each ray.
    #[serde(default)]
    pub piercing: Vec<Vec<usize>>,
}

impl ExhaustionDescriptor {
    /// Frontier levels `F_0 … F_N`.
    pub fn frontiers(&self) -> Vec<&[FrontierComponent]> {
        let mut out: Vec<&[FrontierComponent]> = Vec::new();
        if let Some(first) = self.pieces.first() {
            out.push(&first.frontier_in);
        }
        out.extend(self.pieces.iter().map(|p| p.frontier_out.as_slice()));
        out
    }

    pub fn validate(&self) -> Result<(), ExhaustionError> {
        let bad = |s: String| Err(ExhaustionError::Invalid(s));
        if self.planes.len() != self.ends as usize {
            return bad(format!("{} plane counts for {} ends", self.planes.len(), self.ends));
        }
        if self.complement_counts.len() != self.pieces.len() + 1 {
            return bad("one complement count per frontier level".into());
        }
        for (k, w) in self.pieces.windows(2).enumerate() {
            if w[0].frontier_out != w[1].frontier_in {
                return bad(format!("pieces {k} and {} disagree on their shared frontier", k + 1));
            }
        }
        for (k, p) in self.pieces.iter().enumerate() {
            for c in p.frontier_in.iter().chain(&p.frontier_out) {
                c.surface.validate()?;
                if c.end == 0 || c.end > self.ends {
                    return bad(format!("piece {k}: frontier component names end {}", c.end));
                }
            }
            if !p.boundary_annuli_per_plane.is_empty() {
                let shape: Vec<usize> = p.boundary_annuli_per_plane.iter().map(Vec::len).collect();
                let want: Vec<usize> = self.planes.iter().map(|&v| v as usize).collect();
                if shape != want {
                    return bad(format!("piece {k}: annulus table does not match the plane counts"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub passed: bool,
    pub failures: Vec<String>,
}

impl CheckReport {
    fn from(failures: Vec<String>) -> Self {
        CheckReport { passed: failures.is_empty(), failures }
    }
}

pub fn check_good(ex: &ExhaustionDescriptor) -> CheckReport {
    let mut f = Vec::new();
    if let Err(e) = ex.validate() {
        f.push(e.to_string());
    }
    for (level, fr) in ex.frontiers().into_iter().enumerate() {
        for (k, c) in fr.iter().enumerate() {
            let s = &c.surface;
            if s.is_disk() {
                f.push(format!("F_{level} component {k} is a disk"));
            } else if s.boundary_circles == 0 && euler_characteristic(s) == 2 {
                f.push(format!("F_{level} component {k} is a sphere"));
            }
        }
    }
    for (k, p) in ex.pieces.iter().enumerate() {
        let fl = &p.flags;
        if !fl.p2_irreducible {
            f.push(format!("piece {k} not declared P2-irreducible"));
        }
        if fl.is_product {
            f.push(format!("piece {k} is a product"));
        }
        if !(fl.incompressible_frontier || fl.boundary_irreducible) {
            f.push(format!("piece {k}: frontier not declared incompressible"));
        }
    }
    CheckReport::from(f)
}

pub fn check_nice(ex: &ExhaustionDescriptor) -> CheckReport {
    let mut f = Vec::new();
    if let Err(e) = ex.validate() {
        f.push(e.to_string());
    }
    for (level, fr) in ex.frontiers().into_iter().enumerate() {
        for (k, c) in fr.iter().enumerate() {
            let chi = euler_characteristic(&c.surface);
            if chi >= 0 {
                f.push(format!("F_{level} component {k} has Euler characteristic {chi}"));
            }
            if c.surface.orientable && c.surface.genus_or_crosscaps == 0 {
                f.push(format!("F_{level} component {k} is orientable of genus 0"));
            }
        }
    }
    for (level, &c) in ex.complement_counts.iter().enumerate() {
        if c != ex.ends {
            f.push(format!("complement of C_{level} has {c} components, expected {}", ex.ends));
        }
    }
    for (k, p) in ex.pieces.iter().enumerate() {
        for (i, row) in p.boundary_annuli_per_plane.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if a != 1 {
                    f.push(format!("piece {k} meets plane ({}, {}) in {a} annuli", i + 1, j + 1));
                }
            }
        }
        if p.boundary_annuli_per_plane.is_empty() && ex.planes.iter().any(|&v| v > 0) {
            f.push(format!("piece {k} has no annulus table"));
        }
        let fl = &p.flags;
        for (ok, name) in
            [(fl.p2_irreducible, "P2-irreducible"), (fl.boundary_irreducible, "boundary-irreducible"), (fl.anannular, "anannular")]
        {
            if !ok {
                f.push(format!("piece {k} not declared {name}"));
            }
        }
        if fl.anannular && fl.is_product {
            f.push(format!("piece {k} declared both anannular and a product"));
        }
    }
    CheckReport::from(f)
}

/// Rays to carve at each end, and which frontier component each ray pierces.
/// `None` pierces the unique component of each end.
pub fn carve_rays(
    u: &ExhaustionDescriptor,
    nu: &[u32],
    piercing: Option<&[Vec<usize>]>,
) -> Result<ExhaustionDescriptor, ExhaustionError> {
    u.validate()?;
    if nu.len() != u.ends as usize {
        return Err(ExhaustionError::Invalid(format!("{} ray counts for {} ends", nu.len(), u.ends)));
    }
    if nu.iter().all(|&v| v == 0) {
        return Ok(u.clone());
    }
    let frontiers: Vec<Vec<FrontierComponent>> = u.frontiers().into_iter().map(<[_]>::to_vec).collect();
    for (level, fr) in frontiers.iter().enumerate() {
        for (k, c) in fr.iter().enumerate() {
            let reason = if euler_characteristic(&c.surface) >= 0 {
                Some("Euler characteristic must be negative")
            } else if c.surface.orientable && c.surface.genus_or_crosscaps == 0 {
                Some("orientable component must have positive genus")
            } else {
                None
            };
            if let Some(r) = reason {
                return Err(ExhaustionError::Precondition { level, end: c.end, component: k, reason: r.into() });
            }
        }
    }
    for (level, &c) in u.complement_counts.iter().enumerate() {
        if c != u.ends {
            return Err(ExhaustionError::Invalid(format!("complement of C_{level} has {c} components")));
        }
    }
    let map: Vec<Vec<usize>> = match piercing {
        Some(m) => m.to_vec(),
        None => {
            for (level, fr) in frontiers.iter().enumerate() {
                for i in 1..=u.ends {
                    if fr.iter().filter(|c| c.end == i).count() != 1 {
                        return Err(ExhaustionError::Invalid(format!(
                            "end {i} has several components at level {level}; give an explicit piercing map"
                        )));
                    }
                }
            }
            nu.iter().map(|&v| vec![0; v as usize]).collect()
        }
    };
    if map.len() != nu.len() || map.iter().zip(nu).any(|(m, &v)| m.len() != v as usize) {
        return Err(ExhaustionError::Invalid("piercing map does not match the ray counts".into()));
    }
    let pierced: Vec<Vec<FrontierComponent>> = frontiers
        .iter()
        .enumerate()
        .map(|(level, fr)| pierce(fr, &map, level, 1))
        .collect::<Result<_, _>>()?;
    let annuli: Vec<Vec<u32>> = nu.iter().map(|&v| vec![1; v as usize]).collect();
    let pieces = u
        .pieces
        .iter()
        .enumerate()
        .map(|(k, p)| PieceDescriptor {
            frontier_in: pierced[k].clone(),
            frontier_out: pierced[k + 1].clone(),
            boundary_annuli_per_plane: annuli.clone(),
            flags: PieceFlags {
                p2_irreducible: true,
                boundary_irreducible: true,
                anannular: true,
                is_product: false,
                excellent: true,
                incompressible_frontier: true,
                provenance: format!("exterior of an excellent family of arcs; was: {}", p.flags.provenance),
            },
        })
        .collect();
    Ok(ExhaustionDescriptor {
        ends: u.ends,
        planes: nu.to_vec(),
        pieces,
        complement_counts: u.complement_counts.clone(),
        piercing: map,
    })
}

/// Add (`sign = 1`) or remove (`sign = -1`) one boundary circle per ray.
fn pierce(fr: &[FrontierComponent], map: &[Vec<usize>], level: usize, sign: i32) -> Result<Vec<FrontierComponent>, ExhaustionError> {
    let mut out = fr.to_vec();
    for (i, rays) in map.iter().enumerate() {
        let end = i as u32 + 1;
        let idx: Vec<usize> = (0..fr.len()).filter(|&k| fr[k].end == end).collect();
        for &r in rays {
            let &k = idx.get(r).ok_or(ExhaustionError::Precondition {
                level,
                end,
                component: r,
                reason: "piercing map names a missing component".into(),
            })?;
            let b = &mut out[k].surface.boundary_circles;
            *b = b.checked_add_signed(sign).ok_or(ExhaustionError::Invalid("negative boundary count".into()))?;
        }
    }
    Ok(out)
}

/// The surfaces met when planes are deleted from one end of one piece.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub piece: usize,
    pub end: u32,
    /// Torus or Klein bottle minus two open disks.
    pub splitting: SurfaceDescriptor,
    pub splitting_chi: i64,
    /// Genus `ν′ - 1` with two boundary circles.
    pub residual: SurfaceDescriptor,
    pub residual_chi: i64,
}

/// Keep the first `kept[i]` planes of each end.
pub fn delete_planes(
    m: &ExhaustionDescriptor,
    kept: &[u32],
) -> Result<(ExhaustionDescriptor, Vec<SplitRecord>), ExhaustionError> {
    m.validate()?;
    if kept.len() != m.ends as usize {
        return Err(ExhaustionError::Invalid(format!("{} kept counts for {} ends", kept.len(), m.ends)));
    }
    for (i, (&k, &v)) in kept.iter().zip(&m.planes).enumerate() {
        if k == 0 || k > v {
            return Err(ExhaustionError::PlaneCountOutOfRange { end: i as u32 + 1, kept: k, planes: v });
        }
    }
    if kept == m.planes.as_slice() {
        return Ok((m.clone(), Vec::new()));
    }
    if m.piercing.len() != m.planes.len() || m.piercing.iter().zip(&m.planes).any(|(p, &v)| p.len() != v as usize) {
        return Err(ExhaustionError::Invalid("descriptor does not record which components the rays pierce".into()));
    }
    let dropped: Vec<Vec<usize>> = m.piercing.iter().zip(kept).map(|(p, &k)| p[k as usize..].to_vec()).collect();
    let frontiers: Vec<Vec<FrontierComponent>> = m
        .frontiers()
        .into_iter()
        .enumerate()
        .map(|(level, fr)| pierce(fr, &dropped, level, -1))
        .collect::<Result<_, _>>()?;
    let mut records = Vec::new();
    let mut pieces = Vec::with_capacity(m.pieces.len());
    for (k, p) in m.pieces.iter().enumerate() {
        for (i, (&kk, &v)) in kept.iter().zip(&m.planes).enumerate() {
            if kk == v {
                continue;
            }
            let splitting = SurfaceDescriptor::orientable(1, 2);
            let splitting_chi = euler_characteristic(&splitting);
            // Gluing along the splitting surface keeps the piece excellent
            // only when that surface has negative Euler characteristic.
            if splitting_chi >= 0 {
                return Err(ExhaustionError::ChiCheck { piece: k, end: i as u32 + 1, chi: splitting_chi });
            }
            let residual = SurfaceDescriptor::orientable(kk - 1, 2);
            records.push(SplitRecord {
                piece: k,
                end: i as u32 + 1,
                splitting,
                splitting_chi,
                residual,
                residual_chi: euler_characteristic(&residual),
            });
        }
        pieces.push(PieceDescriptor {
            frontier_in: frontiers[k].clone(),
            frontier_out: frontiers[k + 1].clone(),
            boundary_annuli_per_plane: kept.iter().map(|&v| vec![1; v as usize]).collect(),
            flags: PieceFlags {
                provenance: format!("union of an excellent piece and an arc exterior; was: {}", p.flags.provenance),
                ..p.flags.clone()
            },
        });
    }
    let out = ExhaustionDescriptor {
        ends: m.ends,
        planes: kept.to_vec(),
        pieces,
        complement_counts: m.complement_counts.clone(),
        piercing: m.piercing.iter().zip(kept).map(|(p, &k)| p[..k as usize].to_vec()).collect(),
    };
    Ok((out, records))
}

/// Total Euler characteristic over all frontier levels.
pub fn frontier_chi(ex: &ExhaustionDescriptor) -> i64 {
    ex.frontiers().iter().flat_map(|f| f.iter()).map(|c| euler_characteristic(&c.surface)).sum()
}

/// A random descriptor of an exhaustion without boundary planes whose
/// frontiers meet the carving preconditions.
pub fn random_interior_descriptor<R: Rng>(rng: &mut R) -> ExhaustionDescriptor {
    let ends = rng.gen_range(1..=3u32);
    let levels = rng.gen_range(1..=4usize);
    let surface = |rng: &mut R| {
        if rng.gen_bool(0.7) {
            let g = rng.gen_range(1..=3);
            SurfaceDescriptor::orientable(g, rng.gen_range(u32::from(g == 1)..=2))
        } else {
            // Crosscaps c with 2 - c - b < 0.
            let b = rng.gen_range(0..=2);
            SurfaceDescriptor::nonorientable(rng.gen_range(3 - b.min(2)..=4), b)
        }
    };
    let frontiers: Vec<Vec<FrontierComponent>> = (0..=levels)
        .map(|_| {
            (1..=ends)
                .flat_map(|end| {
                    let count = rng.gen_range(1..=2);
                    (0..count).map(|_| FrontierComponent { end, surface: surface(rng) }).collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    let pieces = (0..levels)
        .map(|k| PieceDescriptor {
            frontier_in: frontiers[k].clone(),
            frontier_out: frontiers[k + 1].clone(),
            boundary_annuli_per_plane: Vec::new(),
            flags: PieceFlags {
                p2_irreducible: true,
                boundary_irreducible: true,
                anannular: true,
                incompressible_frontier: true,
                provenance: "declared".into(),
                ..PieceFlags::default()
            },
        })
        .collect();
    ExhaustionDescriptor {
        ends,
        planes: vec![0; ends as usize],
        pieces,
        complement_counts: vec![ends; levels + 1],
        piercing: vec![Vec::new(); ends as usize],
    }
}

/// Random ray counts and piercing map for `u`.
pub fn random_piercing<R: Rng>(rng: &mut R, u: &ExhaustionDescriptor) -> (Vec<u32>, Vec<Vec<usize>>) {
    let fr = u.frontiers();
    let nu: Vec<u32> = (0..u.ends).map(|_| rng.gen_range(0..=3)).collect();
    let map = nu
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let end = i as u32 + 1;
            let avail = fr.iter().map(|f| f.iter().filter(|c| c.end == end).count()).min().unwrap_or(0);
            (0..v).map(|_| rng.gen_range(0..avail)).collect()
        })
        .collect();
    (nu, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_end(surface: SurfaceDescriptor, levels: usize) -> ExhaustionDescriptor {
        let fr = vec![FrontierComponent { end: 1, surface }];
        ExhaustionDescriptor {
            ends: 1,
            planes: vec![0],
            pieces: (0..levels)
                .map(|_| PieceDescriptor {
                    frontier_in: fr.clone(),
                    frontier_out: fr.clone(),
                    boundary_annuli_per_plane: Vec::new(),
                    flags: PieceFlags {
                        p2_irreducible: true,
                        boundary_irreducible: true,
                        anannular: true,
                        incompressible_frontier: true,
                        ..PieceFlags::default()
                    },
                })
                .collect(),
            complement_counts: vec![1; levels + 1],
            piercing: vec![Vec::new()],
        }
    }

    #[test]
    fn euler_examples() {
        assert_eq!(euler_characteristic(&SurfaceDescriptor::orientable(2, 0)), -2);
        assert_eq!(euler_characteristic(&SurfaceDescriptor::orientable(0, 1)), 1);
        assert_eq!(euler_characteristic(&SurfaceDescriptor::nonorientable(2, 2)), -2);
    }

    #[test]
    fn good_and_nice_examples() {
        let ex = single_end(SurfaceDescriptor::orientable(2, 0), 2);
        assert!(check_good(&ex).passed);
        let disk = single_end(SurfaceDescriptor::orientable(0, 1), 2);
        let r = check_good(&disk);
        assert!(!r.passed && r.failures[0].contains("disk"));
        let mut prod = ex.clone();
        prod.pieces[1].flags.is_product = true;
        assert!(!check_good(&prod).passed);

        let genus_one = single_end(SurfaceDescriptor::orientable(1, 1), 2);
        assert!(check_nice(&genus_one).passed);
        let annulus = single_end(SurfaceDescriptor::orientable(0, 2), 2);
        assert!(!check_nice(&annulus).passed);
        let mut two = carve_rays(&genus_one, &[1], None).unwrap();
        two.pieces[0].boundary_annuli_per_plane = vec![vec![2]];
        assert!(!check_nice(&two).passed);
    }

    #[test]
    fn carve_examples() {
        let u = single_end(SurfaceDescriptor::orientable(2, 0), 2);
        let m = carve_rays(&u, &[1], None).unwrap();
        let s = m.pieces[0].frontier_in[0].surface;
        assert_eq!(s, SurfaceDescriptor::orientable(2, 1));
        assert_eq!(euler_characteristic(&s), -3);
        assert!(check_nice(&m).passed);
        assert_eq!(carve_rays(&u, &[0], None).unwrap(), u);
        let disk = single_end(SurfaceDescriptor::orientable(0, 1), 1);
        assert!(matches!(carve_rays(&disk, &[1], None), Err(ExhaustionError::Precondition { .. })));
    }

    #[test]
    fn delete_examples() {
        let u = single_end(SurfaceDescriptor::orientable(2, 0), 2);
        let m = carve_rays(&u, &[3], None).unwrap();
        let (d, recs) = delete_planes(&m, &[2]).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].residual_chi, -2);
        assert_eq!(recs[0].splitting_chi, -2);
        assert_eq!(d.pieces[0].frontier_in[0].surface.boundary_circles, 2);
        assert!(check_nice(&d).passed);
        assert_eq!(delete_planes(&m, &[3]).unwrap().0, m);
        assert!(matches!(delete_planes(&m, &[0]), Err(ExhaustionError::PlaneCountOutOfRange { .. })));
        let (_, one) = delete_planes(&m, &[1]).unwrap();
        assert_eq!(one[0].residual_chi, 0);
    }

    proptest! {
        #[test]
        fn carving_is_nice(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_interior_descriptor(&mut rng);
            let (nu, map) = random_piercing(&mut rng, &u);
            let m = carve_rays(&u, &nu, Some(&map)).unwrap();
            let piercings: i64 = nu.iter().map(|&v| v as i64).sum::<i64>() * u.frontiers().len() as i64;
            prop_assert_eq!(frontier_chi(&m), frontier_chi(&u) - piercings);
            if nu.iter().any(|&v| v > 0) {
                prop_assert!(check_nice(&m).passed, "{:?}", check_nice(&m).failures);
                prop_assert!(check_good(&m).passed);
                let kept: Vec<u32> = nu.iter().map(|&v| rng.gen_range(1..=v.max(1)).min(v)).collect();
                if kept.iter().all(|&k| k >= 1) {
                    let (d, recs) = delete_planes(&m, &kept).unwrap();
                    prop_assert!(check_nice(&d).passed);
                    for r in recs {
                        let k = kept[r.end as usize - 1] as i64;
                        prop_assert_eq!(r.residual_chi, 2 - 2 * (k - 1) - 2);
                    }
                }
            }
        }
    }
}
