//! Command-line front end. Every subcommand reads and writes the JSON document
//! format of [`crate::export`]; reports go to the given writer as plain text.
//!
//! Exit status: 0 on success, 1 when a verification fails, 2 on bad usage or
//! unreadable input.

use crate::engulf::{self, ExcellenceCertificate};
use crate::exhaustion::{self, ExhaustionDescriptor};
use crate::export::{self, Document};
use crate::isotopy::{self, AnnulusTrace, NestingForest, PatchTree, RegionLadder};
use crate::labeling::{self, Agreement, BinaryLabeling};
use crate::tangle::{self, Subtangle};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SEED_VAR: &str = "POLYTANGLE_SEED";

#[derive(Debug, Parser)]
#[command(name = "polytangle", version, about = "Build and check poly-excellent tangles")]
pub struct Cli {
    /// More detail in reports; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build θ for n groups.
    Build {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select the components J0 of θ.
    Subtangle {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        subset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and validate excellence certificates.
    #[command(subcommand)]
    Verify(Verify),
    /// Schedule removal of the targets of a nesting forest.
    Schedule {
        #[command(flatten)]
        source: Source,
        /// Number of regions above Y_0; defaults to the largest region used.
        #[arg(long)]
        levels: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Put an annulus trace or a patch tree in monotone position.
    Monotonize {
        #[arg(value_enum)]
        what: MonotonizeTarget,
        #[command(flatten)]
        source: Source,
        /// Truncation depth for patch trees.
        #[arg(long, default_value_t = 8)]
        depth: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that an exhaustion is good and nice.
    CheckExhaustion {
        #[arg(long)]
        input: PathBuf,
    },
    /// Carve rays out of an exhaustion.
    Carve {
        #[arg(long)]
        input: PathBuf,
        /// Rays per end, comma separated.
        #[arg(long)]
        rays: String,
        /// Frontier component pierced by each ray: ends separated by ';', rays by ','.
        #[arg(long)]
        piercing: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Keep the first planes of each end and delete the rest.
    DeletePlanes {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kept: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Twist-knot labels of boundary planes.
    #[command(subcommand)]
    Label(Label),
    /// Realize θ or a subtangle and write it out.
    Export {
        #[arg(value_enum)]
        format: ExportFormat,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        subset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Verify {
    /// Certificates for one subset J0, or for all of them.
    Appendix {
        #[arg(long)]
        n: u32,
        #[arg(long, conflicts_with = "all_subsets", required_unless_present = "all_subsets")]
        subset: Option<String>,
        #[arg(long)]
        all_subsets: bool,
        /// Certificate output (single subset only).
        #[arg(long, conflicts_with = "all_subsets")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Label {
    /// Twist-knot parameter for plane (end, plane), index n and bit p.
    Assign {
        #[arg(long)]
        planes: String,
        #[arg(long)]
        end: u32,
        #[arg(long)]
        plane: u32,
        #[arg(long)]
        index: u64,
        #[arg(long)]
        bit: u8,
    },
    /// Compare two labelings plane by plane.
    Compare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        other: PathBuf,
    },
    /// Generate r labelings that pairwise disagree infinitely often.
    Family {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Input document, or a seeded random instance.
#[derive(Debug, Args)]
pub struct Source {
    #[arg(long, required_unless_present = "random")]
    pub input: Option<PathBuf>,
    /// Generate a random instance (seed from --seed or POLYTANGLE_SEED).
    #[arg(long, conflicts_with = "input")]
    pub random: bool,
    #[arg(long, requires = "random")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MonotonizeTarget {
    Trace,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Svg,
    Pd,
    Gauss,
    Json,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "error: {s}"),
            CliError::Failed(s) => write!(f, "verification failed: {s}"),
        }
    }
}

type Res = Result<(), CliError>;

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn io(e: std::io::Error) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::Usage(format!("bad list entry {t:?}"))))
        .collect()
}

fn parse_nested(s: &str) -> Result<Vec<Vec<usize>>, CliError> {
    s.split(';').map(parse_list).collect()
}

/// Seed from the flag, else the environment, else 0.
pub fn seed(flag: Option<u64>) -> Result<u64, CliError> {
    match flag {
        Some(s) => Ok(s),
        None => match std::env::var(SEED_VAR) {
            Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_VAR}={v:?} is not an integer"))),
            Err(_) => Ok(0),
        },
    }
}

fn read_doc<T: Document>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    export::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_text(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Res {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

fn emit<T: Document>(out: &mut dyn Write, path: Option<&Path>, value: &T) -> Res {
    let mut text = export::to_json(value);
    text.push('\n');
    write_text(out, path, &text)
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { writeln!($out, $($arg)*).map_err(io)? };
}

fn subtangle(n: u32, subset: &str) -> Result<Subtangle, CliError> {
    let theta = tangle::build_theta(n).map_err(usage)?;
    tangle::select_subtangle(&theta, parse_list::<u32>(subset)?).map_err(usage)
}

/// Run one command, writing reports (and documents without `--out`) to `out`.
pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Res {
    let v = cli.verbose;
    match &cli.command {
        Command::Build { n, out: path } => {
            let theta = tangle::build_theta(*n).map_err(usage)?;
            if path.is_some() {
                say!(out, "theta: n={} m={} components={}", theta.n, theta.m, theta.components.len());
            }
            emit(out, path.as_deref(), &theta)
        }
        Command::Subtangle { n, subset, out: path } => {
            let sub = subtangle(*n, subset)?;
            if path.is_some() {
                say!(out, "subtangle: n={} J0={:?}", n, sub.j0);
            }
            emit(out, path.as_deref(), &sub)
        }
        Command::Verify(Verify::Appendix { n, subset, all_subsets, out: path }) => {
            verify_certificates(*n, subset.as_deref(), *all_subsets, path.as_deref(), v, out)
        }
        Command::Schedule { source, levels, out: path } => {
            let f: NestingForest = match &source.input {
                Some(p) => read_doc(p)?,
                None => isotopy::random_forest(&mut ChaCha8Rng::seed_from_u64(seed(source.seed)?), 100, 10),
            };
            let top = f.nodes.iter().filter_map(|k| k.region).max().unwrap_or(0);
            let ladder = RegionLadder { levels: levels.unwrap_or(top) };
            let s = isotopy::schedule_removal(&f, &ladder).map_err(usage)?;
            let left = isotopy::apply_schedule(&f, &s).map_err(CliError::Failed)?;
            say!(out, "schedule: {} curves, {} stages, {} pushes, {} curves left", f.nodes.len(), s.stages.len(), s.push_count(), left.len());
            if v > 0 {
                for (k, st) in s.stages.iter().enumerate() {
                    let regions: Vec<u32> = st.entries.iter().map(|e| e.region).collect();
                    say!(out, "  stage {k} ({:?}): regions {regions:?}", st.phase);
                }
            }
            match path {
                Some(p) => emit(out, Some(p), &s),
                None => Ok(()),
            }
        }
        Command::Monotonize { what, source, depth, out: path } => {
            let rng = || -> Result<ChaCha8Rng, CliError> { Ok(ChaCha8Rng::seed_from_u64(seed(source.seed)?)) };
            match what {
                MonotonizeTarget::Trace => {
                    let tr: AnnulusTrace = match &source.input {
                        Some(p) => read_doc(p)?,
                        None => isotopy::random_trace(&mut rng()?, 1, 8, 4),
                    };
                    let m = isotopy::monotonize_plane_trace(&tr).map_err(usage)?;
                    if !m.result.is_monotone() {
                        return Err(CliError::Failed("trace is not monotone after the pushes".into()));
                    }
                    say!(out, "trace: {} circles, {} annulus pushes, {} left", tr.circles.len(), m.moves.len(), m.result.circles.len());
                    match path {
                        Some(p) => emit(out, Some(p), &m.result),
                        None => Ok(()),
                    }
                }
                MonotonizeTarget::Tree => {
                    let t: PatchTree = match &source.input {
                        Some(p) => read_doc(p)?,
                        None => isotopy::random_patch_tree(&mut rng()?, *depth, 200),
                    };
                    let m = isotopy::monotonize_patch_tree(&t, *depth).map_err(usage)?;
                    if !m.tree.slices_connected(*depth) {
                        return Err(CliError::Failed("a level slice is still disconnected".into()));
                    }
                    say!(out, "tree: {} patches, {} moves, {} patches left", t.patches.len(), m.moves.len(), m.tree.patches.len());
                    if v > 0 {
                        for mv in &m.moves {
                            say!(out, "  {:?} at {} (level {}, stage {})", mv.kind, mv.center, mv.level, mv.stage);
                        }
                    }
                    match path {
                        Some(p) => emit(out, Some(p), &m.tree),
                        None => Ok(()),
                    }
                }
            }
        }
        Command::CheckExhaustion { input } => {
            let ex: ExhaustionDescriptor = read_doc(input)?;
            ex.validate().map_err(usage)?;
            let good = exhaustion::check_good(&ex);
            let nice = exhaustion::check_nice(&ex);
            say!(out, "good: {}", if good.passed { "pass" } else { "FAIL" });
            say!(out, "nice: {}", if nice.passed { "pass" } else { "FAIL" });
            for f in good.failures.iter().chain(&nice.failures) {
                say!(out, "  {f}");
            }
            if good.passed && nice.passed {
                Ok(())
            } else {
                Err(CliError::Failed(format!("{} problems", good.failures.len() + nice.failures.len())))
            }
        }
        Command::Carve { input, rays, piercing, out: path } => {
            let u: ExhaustionDescriptor = read_doc(input)?;
            let nu: Vec<u32> = parse_list(rays)?;
            let map = piercing.as_deref().map(parse_nested).transpose()?;
            let m = exhaustion::carve_rays(&u, &nu, map.as_deref()).map_err(usage)?;
            let nice = exhaustion::check_nice(&m);
            say!(out, "carved: planes {:?}, frontier χ {} -> {}", m.planes, exhaustion::frontier_chi(&u), exhaustion::frontier_chi(&m));
            if let Some(p) = path {
                emit(out, Some(p), &m)?;
            }
            if nice.passed {
                Ok(())
            } else {
                Err(CliError::Failed(nice.failures.join("; ")))
            }
        }
        Command::DeletePlanes { input, kept, out: path } => {
            let m: ExhaustionDescriptor = read_doc(input)?;
            let (d, recs) = exhaustion::delete_planes(&m, &parse_list::<u32>(kept)?).map_err(usage)?;
            say!(out, "kept planes {:?}, {} splittings", d.planes, recs.len());
            if v > 0 {
                for r in &recs {
                    say!(out, "  piece {} end {}: splitting χ {}, residual χ {}", r.piece, r.end, r.splitting_chi, r.residual_chi);
                }
            }
            if let Some(p) = path {
                emit(out, Some(p), &d)?;
            }
            let nice = exhaustion::check_nice(&d);
            if nice.passed {
                Ok(())
            } else {
                Err(CliError::Failed(nice.failures.join("; ")))
            }
        }
        Command::Label(l) => label(l, out),
        Command::Export { format, n, subset, out: path } => {
            let theta = tangle::build_theta(*n).map_err(usage)?;
            let r = match subset {
                Some(s) => export::realize_subtangle(&tangle::select_subtangle(&theta, parse_list::<u32>(s)?).map_err(usage)?),
                None => export::realize(&theta),
            }
            .map_err(|e| CliError::Failed(e.to_string()))?;
            if *format == ExportFormat::Json {
                return emit(out, path.as_deref(), &r);
            }
            let d = export::project(&r.polylines).map_err(|e| CliError::Failed(e.to_string()))?;
            let text = match format {
                ExportFormat::Svg => export::render_svg(&d),
                _ => {
                    let code = export::encode_diagram(&d).map_err(|e| CliError::Failed(e.to_string()))?;
                    if *format == ExportFormat::Pd {
                        export::pd_text(&code)
                    } else {
                        export::gauss_text(&code)
                    }
                }
            };
            write_text(out, path.as_deref(), &text)
        }
    }
}

fn verify_certificates(n: u32, subset: Option<&str>, all: bool, path: Option<&Path>, v: u8, out: &mut dyn Write) -> Res {
    let theta = tangle::build_theta(n).map_err(usage)?;
    let subsets: Vec<Vec<u32>> = if all {
        (1u64..1 << n).map(|mask| (1..=n).filter(|j| mask >> (j - 1) & 1 == 1).collect()).collect()
    } else {
        vec![parse_list(subset.unwrap_or_default())?]
    };
    let subs = subsets
        .iter()
        .map(|j0| tangle::select_subtangle(&theta, j0.iter().copied()).map_err(usage))
        .collect::<Result<Vec<_>, _>>()?;
    // Results come back in subset order regardless of scheduling.
    let results: Vec<Result<ExcellenceCertificate, String>> = subs
        .par_iter()
        .map(|s| {
            let cert = engulf::engulf_verify(s).map_err(|e| e.to_string())?;
            engulf::validate_certificate(&cert).map_err(|e| e.to_string())?;
            Ok(cert)
        })
        .collect();
    let mut failures = 0;
    for (j0, r) in subsets.iter().zip(&results) {
        match r {
            Ok(cert) => {
                let glues = cert.glue_checks().count();
                say!(out, "n={n} J0={j0:?}: ok ({} nodes, {glues} gluings, untouched {:?})", cert.nodes.len(), cert.untouched_columns);
                if v > 0 || !all {
                    for note in &cert.notes {
                        say!(out, "  note: {note}");
                    }
                }
            }
            Err(e) => {
                failures += 1;
                say!(out, "n={n} J0={j0:?}: FAIL {e}");
            }
        }
    }
    if let (Some(p), Some(Ok(cert))) = (path, results.first()) {
        emit(out, Some(p), cert)?;
    }
    if failures > 0 {
        return Err(CliError::Failed(format!("{failures} of {} subsets", subsets.len())));
    }
    Ok(())
}

fn label(l: &Label, out: &mut dyn Write) -> Res {
    match l {
        Label::Assign { planes, end, plane, index, bit } => {
            let k = labeling::catalog_assign(&parse_list::<u32>(planes)?, *end, *plane, *index, *bit).map_err(usage)?;
            say!(out, "twist knot K_{k}");
            Ok(())
        }
        Label::Compare { input, other } => {
            let a: BinaryLabeling = read_doc(input)?;
            let b: BinaryLabeling = read_doc(other)?;
            if a.shape() != b.shape() {
                return Err(CliError::Usage("labelings have different plane counts".into()));
            }
            for (i, (ra, rb)) in a.sequences.iter().zip(&b.sequences).enumerate() {
                for (j, (sa, sb)) in ra.iter().zip(rb).enumerate() {
                    match labeling::eventual_agreement(sa, sb) {
                        Agreement::AgreesFrom(m) => say!(out, "plane ({}, {}): agree from term {m}", i + 1, j + 1),
                        Agreement::InfiniteDisagreement { period, start, residues } => say!(
                            out,
                            "plane ({}, {}): differ infinitely often (from {start}, mod {period} in {residues:?})",
                            i + 1,
                            j + 1
                        ),
                    }
                }
            }
            let ob = labeling::homeomorphism_obstruction(&a, &b).map_err(usage)?;
            say!(out, "obstructed: {}", ob.obstructed());
            Ok(())
        }
        Label::Family { r, seed: s, out_dir } => {
            let family = labeling::generate_family(*r, seed(*s)?).map_err(usage)?;
            let bad: Vec<(usize, usize)> = (0..family.len())
                .flat_map(|a| (a + 1..family.len()).map(move |b| (a, b)))
                .filter(|&(a, b)| !labeling::homeomorphism_obstruction(&family[a], &family[b]).map(|o| o.obstructed()).unwrap_or(false))
                .collect();
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(dir).map_err(io)?;
                for (k, f) in family.iter().enumerate() {
                    emit(out, Some(&dir.join(format!("labeling-{:02}.json", k + 1))), f)?;
                }
            }
            say!(out, "family of {}: {} pairs, {} unobstructed", family.len(), family.len() * (family.len() - 1) / 2, bad.len());
            if bad.is_empty() {
                Ok(())
            } else {
                Err(CliError::Failed(format!("pairs {bad:?} are not obstructed")))
            }
        }
    }
}

/// Parse arguments, run, and return the exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with(std::iter::once("polytangle").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap() + &String::from_utf8(err).unwrap())
    }

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("polytangle-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn build_writes_theta() {
        let p = tmp("theta.json");
        let (code, _) = run(&["build", "--n", "3", "--out", p.to_str().unwrap()]);
        assert_eq!(code, 0);
        let theta: tangle::ThetaComplex = export::from_json(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!((theta.components.len(), theta.m), (3, 3));
    }

    #[test]
    fn verify_exit_codes() {
        let (code, text) = run(&["verify", "appendix", "--n", "3", "--subset", "2"]);
        assert_eq!(code, 0, "{text}");
        assert!(text.contains("final pass"));
        assert_eq!(run(&["verify", "appendix", "--n", "3", "--subset", ""]).0, 2);
        assert_eq!(run(&["verify", "appendix", "--n", "3"]).0, 2);
        assert_eq!(run(&["verify", "appendix", "--n", "3", "--subset", "4"]).0, 2);
        let (code, text) = run(&["verify", "appendix", "--n", "3", "--all-subsets"]);
        assert_eq!(code, 0);
        assert_eq!(text.lines().filter(|l| l.contains(": ok")).count(), 7);
    }

    #[test]
    fn wrong_kind_input_is_rejected() {
        let p = tmp("forest.json");
        std::fs::write(&p, export::to_json(&tangle::build_theta(2).unwrap())).unwrap();
        assert_eq!(run(&["schedule", "--input", p.to_str().unwrap()]).0, 2);
    }

    #[test]
    fn random_commands_are_deterministic() {
        let a = run(&["schedule", "--random", "--seed", "5", "-v"]);
        assert_eq!(a.0, 0);
        assert_eq!(a, run(&["schedule", "--random", "--seed", "5", "-v"]));
        assert_eq!(run(&["monotonize", "tree", "--random", "--seed", "3"]).0, 0);
        assert_eq!(run(&["monotonize", "trace", "--random", "--seed", "3"]).0, 0);
        let (code, text) = run(&["label", "family", "--r", "20", "--seed", "9"]);
        assert_eq!(code, 0);
        assert!(text.contains("190 pairs, 0 unobstructed"));
    }

    #[test]
    fn labels_and_export() {
        assert_eq!(run(&["label", "assign", "--planes", "2,1", "--end", "1", "--plane", "1", "--index", "1", "--bit", "0"]).1.trim(), "twist knot K_3");
        let (code, svg) = run(&["export", "svg", "--n", "2"]);
        assert_eq!(code, 0);
        assert!(svg.starts_with("<?xml"));
        let (code, pd) = run(&["export", "pd", "--n", "2", "--subset", "1"]);
        assert_eq!(code, 0);
        assert_eq!(pd.lines().filter(|l| l.starts_with("X[")).count(), 16);
    }

    #[test]
    fn exhaustion_commands() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = exhaustion::random_interior_descriptor(&mut rng);
        let (pu, pm, pd) = (tmp("u.json"), tmp("m.json"), tmp("d.json"));
        std::fs::write(&pu, export::to_json(&u)).unwrap();
        let rays = vec!["2"; u.ends as usize].join(",");
        let piercing = vec!["0,0"; u.ends as usize].join(";");
        let args = ["carve", "--input", pu.to_str().unwrap(), "--rays", &rays, "--piercing", &piercing, "--out", pm.to_str().unwrap()];
        let (code, text) = run(&args);
        assert_eq!(code, 0, "{text}");
        assert_eq!(run(&["check-exhaustion", "--input", pm.to_str().unwrap()]).0, 0);
        let kept = vec!["1"; u.ends as usize].join(",");
        let (code, text) = run(&["delete-planes", "--input", pm.to_str().unwrap(), "--kept", &kept, "--out", pd.to_str().unwrap()]);
        assert_eq!(code, 0, "{text}");
    }
}
