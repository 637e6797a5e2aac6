//! Command-line front end: construction → checking → attractors →
//! certification → branches/orbits/trials → blender/mixing experiments.
//!
//! Every run that writes an artifact also writes `<out>.manifest.json`
//! echoing the fully resolved configuration and library version; identical
//! manifests produce byte-identical outputs. Exit codes: 0 on pass, 1 on
//! verification failure (witness files are still written), 2 on usage or
//! parse errors.

use crate::affine::{
    check_conditions, contracting_family, covering_grid_h, find_parameters,
    verify_expanded_covering, AffineParams,
};
use crate::error::{IfsError, Result};
use crate::geometry::{Ball, PointCloud, Region};
use crate::hutchinson::{attractor, chaos_game, fixed_point_set};
use crate::maps::{AffineMap, FamilyRecord, FamilySequence, MapFamily, PerturbModel};
use crate::minimality::{
    certify, dense_branch, dense_orbit, strong_trial, BranchPlan, MinimalityCertificate,
};
use crate::symbolic::{blender_verify, mixing_probe, BlenderReport, SkewProduct, SymbolWord};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "ifs", version, about = "Affine iterated function systems: attractors, minimality certificates, symbolic blenders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Cap the worker thread count (results are thread-count independent).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
pub enum Command {
    /// Search construction parameters for the contraction pair on ℝ^m.
    Construct {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the parameter conditions and the box covering for a params file.
    Check { params: PathBuf },
    /// Deterministic attractor of the contraction pair (Hutchinson iteration).
    Attractor {
        params: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        /// Sample by chaos game with this many points instead.
        #[arg(long)]
        chaos: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixed points of all length-n words of the contraction pair.
    FixedPoints {
        params: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify the minimality hypotheses of {S, S∘T} on the box interior.
    Certify {
        params: PathBuf,
        /// Grid spacing; defaults to the construction's per-dimension spacing.
        #[arg(long)]
        grid_h: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and verify a dense branch to a target ball.
    Branch {
        cert: PathBuf,
        /// Start point, comma-separated.
        #[arg(long)]
        from: String,
        /// Target ball as "c1,..,cm,radius".
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chain branches through a lattice of target balls covering the domain.
    Orbit {
        cert: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long, default_value_t = 0.2)]
        ball_radius: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Strong-robustness trials over seeded ε-perturbed family sequences.
    Trial {
        cert: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0.05)]
        target_radius: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify the symbolic blender by strip refinement.
    Blender {
        cert: PathBuf,
        #[arg(long, default_value_t = 1)]
        window: usize,
        #[arg(long, default_value_t = 40)]
        nmax: usize,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.02)]
        grid_h: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV dump of the final generation's strips.
        #[arg(long)]
        strips_out: Option<PathBuf>,
    },
    /// Topological-mixing probe between two cylinders with fiber balls.
    Mix {
        blender: PathBuf,
        /// Cylinder "word:c1,..,cm,radius", e.g. 121:0,0,0.1.
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
        #[arg(long, default_value_t = 30)]
        onset: usize,
        #[arg(long, default_value_t = 60)]
        horizon: usize,
        #[arg(long, default_value_t = 65536)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Everything the construct command persists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub params: AffineParams,
    pub box_halfwidths: Vec<f64>,
    pub maps: FamilyRecord,
}

/// Persisted skew product + verification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlenderFile {
    pub alphabet: usize,
    pub window: usize,
    pub fibers: FamilyRecord,
    pub e_in: Region,
    pub e_out: Ball,
    pub report: BlenderReport,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a Command,
    version: &'a str,
    seed_env_override: Option<u64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_manifest(out: &Path, cmd: &Command, seed_override: Option<u64>) -> Result<()> {
    let path = out.with_extension(match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{ext}.manifest.json"),
        None => "manifest.json".to_string(),
    });
    write_json(
        &path,
        &Manifest { command: cmd, version: crate::VERSION, seed_env_override: seed_override },
    )
}

fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| IfsError::InvalidInput(format!("bad coordinate {t}: {e}")))
        })
        .collect()
}

fn parse_ball(text: &str) -> Result<Ball> {
    let v = parse_point(text)?;
    if v.len() < 2 {
        return Err(IfsError::InvalidInput("ball needs center and radius".into()));
    }
    let (center, radius) = v.split_at(v.len() - 1);
    Ok(Ball::new(center.to_vec(), radius[0]))
}

fn parse_cylinder(text: &str, alphabet: usize) -> Result<(SymbolWord, Ball)> {
    let (word, ball) = text
        .split_once(':')
        .ok_or_else(|| IfsError::InvalidInput("cylinder must look like word:c1,..,radius".into()))?;
    Ok((SymbolWord::parse(alphabet, word)?, parse_ball(ball)?))
}

fn load_params(path: &Path) -> Result<(AffineParams, MapFamily)> {
    let file: ParamsFile = read_json(path)?;
    let fam = file.maps.to_family()?;
    Ok((file.params, fam))
}

fn load_cert(path: &Path) -> Result<MinimalityCertificate> {
    read_json(path)
}

fn seed_override() -> Option<u64> {
    std::env::var("IFS_SEED").ok().and_then(|s| s.parse().ok())
}

fn effective_seed(cli_seed: u64) -> u64 {
    seed_override().unwrap_or(cli_seed)
}

fn blender_product(file: &BlenderFile) -> Result<SkewProduct> {
    let members = file
        .fibers
        .maps
        .iter()
        .map(|r| {
            Ok((
                r.label.clone(),
                crate::maps::MapKind::Affine(AffineMap::new(
                    file.fibers.dim,
                    r.matrix.clone(),
                    r.shift.clone(),
                )?),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    SkewProduct::new(file.alphabet, file.window, members, file.e_in.clone(), file.e_out.clone())
}

/// Build the skew product a certificate induces: fiber maps from the
/// certified family (window-1) or their seeded window-w perturbations,
/// E_in = the certified domain, E_out = an absorbing ball.
pub fn product_from_certificate(
    cert: &MinimalityCertificate,
    window: usize,
    eps: f64,
    seed: u64,
) -> Result<SkewProduct> {
    let fam = cert.to_family()?;
    let e_in = cert.domain.clone();
    let m = fam.dim();
    let seed_ball = Ball::new(vec![0.0; m], e_in.diameter() / 2.0);
    if eps == 0.0 && window == 1 {
        let e_out = crate::hutchinson::absorbing_ball(&fam, &seed_ball)?;
        SkewProduct::from_family(&fam, e_in, e_out)
    } else {
        // Absorbing ball sized for the perturbed fibers.
        let prod_tmp = SkewProduct::perturbed_window(
            &fam,
            window,
            eps,
            seed,
            e_in.clone(),
            Ball::new(vec![0.0; m], 1.0),
        )?;
        let pf = MapFamily::new(prod_tmp.fibers.clone())?;
        let e_out = crate::hutchinson::absorbing_ball(&pf, &seed_ball)?;
        SkewProduct::new(prod_tmp.alphabet, window, prod_tmp.fibers, e_in, e_out)
    }
}

/// Run a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli.command) {
        Ok(pass) => {
            if pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let diag = serde_json::json!({ "error": e.to_string() });
            eprintln!("{diag}");
            match e {
                IfsError::InvalidInput(_) | IfsError::Io(_) | IfsError::Json(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: &Command) -> Result<bool> {
    match cmd {
        Command::Construct { dim, out } => {
            let p = find_parameters(*dim)?;
            let fam = contracting_family(&p);
            let file = ParamsFile {
                box_halfwidths: {
                    let b = p.box_b();
                    b.halfwidths
                },
                maps: FamilyRecord::from_family(&fam)?,
                params: p,
            };
            write_json(out, &file)?;
            write_manifest(out, cmd, seed_override())?;
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Check { params } => {
            let (p, _) = load_params(params)?;
            let report = check_conditions(&p);
            let covering = verify_expanded_covering(&p);
            let fp = crate::affine::fixed_point_t(&p);
            let summary = serde_json::json!({
                "conditions": report,
                "covering_pass": covering.pass,
                "covering_h": covering.h,
                "uncovered": covering.uncovered,
                "fixed_point_of_T": fp,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if !report.all_pass {
                for c in report.failed() {
                    eprintln!("condition failed: {} (slack {})", c.name, c.slack);
                }
            }
            Ok(report.all_pass && covering.pass)
        }
        Command::Attractor { params, tol, chaos, burn_in, seed, out } => {
            let (p, fam) = load_params(params)?;
            let m = p.m;
            let seed_ball = Ball::new(vec![0.0; m], Region::Box(p.box_b()).diameter() / 2.0);
            let cloud = match chaos {
                Some(n) => chaos_game(&fam, &vec![0.0; m], *n, *burn_in, effective_seed(*seed))?,
                None => attractor(&fam, &seed_ball, *tol)?,
            };
            let f = std::fs::File::create(out)?;
            cloud.write_csv(std::io::BufWriter::new(f))?;
            write_manifest(out, cmd, seed_override())?;
            println!("wrote {} points to {}", cloud.len(), out.display());
            Ok(true)
        }
        Command::FixedPoints { params, n, out } => {
            let (_, fam) = load_params(params)?;
            let set = fixed_point_set(&fam, *n)?;
            let f = std::fs::File::create(out)?;
            set.points.write_csv(std::io::BufWriter::new(f))?;
            write_manifest(out, cmd, seed_override())?;
            println!("wrote {} fixed points to {}", set.points.len(), out.display());
            Ok(true)
        }
        Command::Certify { params, grid_h, out } => {
            let (p, fam) = load_params(params)?;
            let h = grid_h.unwrap_or_else(|| covering_grid_h(p.m));
            let domain = Region::Box(p.box_b());
            let cert = certify(&fam, &domain, h)?;
            write_json(out, &cert)?;
            write_manifest(out, cmd, seed_override())?;
            for hyp in &cert.hypotheses {
                println!(
                    "{} {}: {}",
                    if hyp.pass { "PASS" } else { "FAIL" },
                    hyp.name,
                    hyp.detail
                );
            }
            Ok(cert.pass)
        }
        Command::Branch { cert, from, target, eps, seed, out } => {
            let c = load_cert(cert)?;
            let fam = c.to_family()?;
            let start = parse_point(from)?;
            let ball = parse_ball(target)?;
            let seq = sequence(&c, fam, *eps, effective_seed(*seed));
            let plan = dense_branch(&start, &ball, &seq, &c, 0)?;
            write_json(out, &plan)?;
            write_manifest(out, cmd, seed_override())?;
            println!(
                "branch of {} steps (bound {}) to target at {:?}",
                plan.len(),
                c.length_bound_eps(ball.radius, *eps),
                ball.center
            );
            Ok(true)
        }
        Command::Orbit { cert, from, ball_radius, eps, seed, out } => {
            let c = load_cert(cert)?;
            let fam = c.to_family()?;
            let start = parse_point(from)?;
            let seq = sequence(&c, fam, *eps, effective_seed(*seed));
            let balls = orbit_base(&c, *ball_radius);
            let plans = dense_orbit(&start, &seq, &c, &balls)?;
            write_json(out, &plans)?;
            write_manifest(out, cmd, seed_override())?;
            let total: usize = plans.iter().map(BranchPlan::len).sum();
            println!("visited {} balls in {} steps", plans.len(), total);
            Ok(true)
        }
        Command::Trial { cert, eps, trials, target_radius, seed, out } => {
            let c = load_cert(cert)?;
            let report = strong_trial(&c, *eps, *trials, *target_radius, effective_seed(*seed))?;
            write_json(out, &report)?;
            write_manifest(out, cmd, seed_override())?;
            println!(
                "precheck: {} ({}); successes {}/{}",
                report.precheck_pass, report.precheck_detail, report.successes, report.trials
            );
            Ok(report.all_pass())
        }
        Command::Blender { cert, window, nmax, eps, grid_h, seed, out, strips_out } => {
            let c = load_cert(cert)?;
            let prod = product_from_certificate(&c, *window, *eps, effective_seed(*seed))?;
            let report = blender_verify(&prod, *nmax, *grid_h)?;
            let file = BlenderFile {
                alphabet: prod.alphabet,
                window: prod.window,
                fibers: FamilyRecord::from_family(&MapFamily::new(prod.fibers.clone())?)?,
                e_in: prod.e_in.clone(),
                e_out: prod.e_out.clone(),
                report: report.clone(),
            };
            write_json(out, &file)?;
            write_manifest(out, cmd, seed_override())?;
            if let Some(path) = strips_out {
                dump_strips(&prod, *nmax, path)?;
            }
            for g in &report.generations {
                println!(
                    "generation {:2}: {} strips ({} pruned), max diameter {:.6}, covering {}",
                    g.generation,
                    g.strips_kept,
                    g.pruned,
                    g.max_diameter,
                    if g.covering_pass { "pass" } else { "FAIL" }
                );
            }
            println!("blender pass: {}", report.pass);
            Ok(report.pass)
        }
        Command::Mix { blender, u, v, onset, horizon, samples, seed, out } => {
            let file: BlenderFile = read_json(blender)?;
            let prod = blender_product(&file)?;
            let (uw, ub) = parse_cylinder(u, prod.alphabet)?;
            let (vw, vb) = parse_cylinder(v, prod.alphabet)?;
            let report = mixing_probe(
                &prod,
                (&uw, &ub),
                (&vw, &vb),
                *onset,
                *horizon,
                *samples,
                effective_seed(*seed),
            )?;
            if let Some(path) = out {
                write_json(path, &report)?;
                write_manifest(path, cmd, seed_override())?;
            }
            println!(
                "mixing: {} (first miss {:?})",
                if report.pass { "pass" } else { "FAIL" },
                report.first_miss
            );
            Ok(report.pass)
        }
    }
}

fn sequence(
    cert: &MinimalityCertificate,
    fam: MapFamily,
    eps: f64,
    seed: u64,
) -> FamilySequence {
    let working = Region::Box(cert.working_box.clone());
    if eps == 0.0 {
        FamilySequence::unperturbed(fam, working)
    } else {
        FamilySequence::perturbed(fam, working, eps, PerturbModel::Affine, seed)
    }
}

/// Lattice of target balls covering the certified domain.
fn orbit_base(cert: &MinimalityCertificate, radius: f64) -> Vec<Ball> {
    let bb = cert.domain.bounding_box();
    let m = bb.dim();
    let mut balls = Vec::new();
    let mut idx = vec![0usize; m];
    let counts: Vec<usize> = (0..m)
        .map(|i| ((2.0 * (bb.halfwidths[i] - radius)) / (1.5 * radius)).ceil() as usize + 1)
        .collect();
    'outer: loop {
        let center: Vec<f64> = (0..m)
            .map(|i| {
                let w = bb.halfwidths[i] - radius;
                if counts[i] <= 1 {
                    bb.center[i]
                } else {
                    bb.center[i] - w + 2.0 * w * idx[i] as f64 / (counts[i] - 1) as f64
                }
            })
            .collect();
        balls.push(Ball::new(center, radius));
        for i in 0..m {
            idx[i] += 1;
            if idx[i] < counts[i] {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    balls
}

fn dump_strips(prod: &SkewProduct, nmax: usize, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut strips = vec![crate::symbolic::Strip {
        prefix: Vec::new(),
        bound: prod.e_out.clone(),
        generation: 0,
    }];
    for _ in 0..nmax.min(14) {
        strips = crate::symbolic::strip_refine(prod, &strips);
    }
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    let m = prod.dim();
    let coords: Vec<String> = (1..=m).map(|i| format!("center_x{i}")).collect();
    writeln!(w, "prefix,{},radius,generation", coords.join(","))?;
    for s in &strips {
        let word: String = s.prefix.iter().map(|l| (l + 1).to_string()).collect();
        let center: Vec<String> = s.bound.center.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(
            w,
            "{word},{},{:.16e},{}",
            center.join(","),
            s.bound.radius,
            s.generation
        )?;
    }
    Ok(())
}

/// Entry point for the thin binary.
pub fn main() -> i32 {
    let cli = Cli::parse();
    run(cli)
}

/// Dump a point cloud helper shared by examples.
pub fn write_cloud_csv(cloud: &PointCloud, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    cloud.write_csv(std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_and_ball_parsing() {
        assert_eq!(parse_point("0.5, -1").unwrap(), vec![0.5, -1.0]);
        let b = parse_ball("0.5,0.5,0.05").unwrap();
        assert_eq!(b.center, vec![0.5, 0.5]);
        assert_eq!(b.radius, 0.05);
        assert!(parse_ball("1.0").is_err());
    }

    #[test]
    fn cylinder_parsing() {
        let (w, b) = parse_cylinder("121:0,0,0.1", 2).unwrap();
        assert_eq!(w.letters, vec![0, 1, 0]);
        assert_eq!(b.radius, 0.1);
    }

    #[test]
    fn orbit_base_balls_stay_in_domain() {
        let p = find_parameters(2).unwrap();
        let fam = contracting_family(&p);
        let cert = certify(&fam, &Region::Box(p.box_b()), 0.01).unwrap();
        let balls = orbit_base(&cert, 0.2);
        assert!(!balls.is_empty());
        for b in &balls {
            assert!(cert.domain.contains(&b.center, b.radius * 0.99));
        }
    }

    #[test]
    fn construct_and_check_roundtrip() {
        let dir = std::env::temp_dir().join("ifs_cli_test");
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("params.json");
        let code = dispatch(&Command::Construct { dim: 2, out: out.clone() }).unwrap();
        assert!(code);
        let pass = dispatch(&Command::Check { params: out.clone() }).unwrap();
        assert!(pass);
        // Manifest written alongside.
        assert!(dir.join("params.json.manifest.json").exists());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn check_rejects_broken_params() {
        let dir = std::env::temp_dir().join("ifs_cli_broken");
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("params.json");
        // Hand-broken parameters: r = 0.5 < v2 = 0.9.
        let p = AffineParams::new(2, 0.5, 0.19, 1.05, vec![0.9]).unwrap();
        let fam = contracting_family(&p);
        let file = ParamsFile {
            box_halfwidths: p.box_b().halfwidths,
            maps: FamilyRecord::from_family(&fam).unwrap(),
            params: p,
        };
        write_json(&out, &file).unwrap();
        let pass = dispatch(&Command::Check { params: out.clone() }).unwrap();
        assert!(!pass, "broken parameters must fail the check");
        let _ = std::fs::remove_dir_all(&dir);
    }
}
