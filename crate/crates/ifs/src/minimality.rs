//! Minimality certificates and the constructive dense-branch machinery.
//!
//! `certify` verifies, on a grid, the two sufficient hypotheses for strong
//! robust minimality of a finite contracting family F on a bounded open
//! domain D — (1) every member contracts closure(D), (2) closure(D) ⊂ F(D)
//! — and extracts the quantities the constructive proof consumes: the
//! Lebesgue radius ρ of the covering {f(D)}, the ball scale δ with
//! 2δ < ρ, a word length n₀ whose fixed points Y_{n₀} are (δ/2)-dense in
//! D, and the step budgets k, k(r).
//!
//! `dense_branch` then realizes the proof: big targets (radius ≥ 2δ) are
//! reached by composing k blocks of length n₀, each chosen to have a fixed
//! point δ-close to the target center; small targets are first pulled back
//! through covering members (radius grows by at least 1/κ per pull) until
//! they are big. Every plan is verified by replaying a sample of D through
//! the exact per-step families.

use crate::error::{IfsError, Result};
use crate::geometry::{
    covering_test_eroded, dist, lebesgue_radius_eroded, Ball, BoxRegion, CoverPiece, Grid, Region,
};
use crate::hutchinson::{fixed_point_set, solve_fixed_point, WORD_BUDGET};
use crate::maps::{AffineMap, FamilyRecord, FamilySequence, MapFamily, PerturbModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// δ as a fraction of the measured Lebesgue radius; 2δ = 0.8ρ keeps a 20%
/// reserve that absorbs the ε-perturbation erosion of the covering.
pub const DELTA_FRACTION: f64 = 0.4;

/// Hard cap on the fixed-point word length searched by `certify`.
pub const N0_HARD_CAP: usize = 16;

/// Extra pullback attempts tolerated beyond the k(r) budget before failing.
const PULLBACK_SLACK: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// Witness points for failures (uncovered grid points, etc.), capped.
    pub witnesses: Vec<Vec<f64>>,
}

/// The verified hypotheses and constants of a minimality certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalityCertificate {
    pub family: FamilyRecord,
    pub domain: Region,
    pub grid_h: f64,
    /// Bi-Lipschitz constants valid for every member on closure(D).
    pub lambda: f64,
    pub kappa: f64,
    /// Measured Lebesgue radius of the cover {f(D)} and the chosen δ.
    pub rho: f64,
    pub delta: f64,
    /// Smallest word length with Y_{n₀} (δ/2)-dense in D, and the measured
    /// density.
    pub n0: usize,
    pub yn_density: f64,
    /// Case-(a) block budget ⌈ln(δ/diam D)/ln κ⌉.
    pub k_blocks: usize,
    /// Minimal invariant box W ⊇ D with F(W) ⊆ W; all replays stay in W.
    pub working_box: BoxRegion,
    /// sup over members and x ∈ closure(D) of dist(f(x), closure(D)); the
    /// covering hypothesis forces this to be positive.
    pub overshoot: f64,
    pub hypotheses: Vec<HypothesisCheck>,
    pub pass: bool,
}

impl MinimalityCertificate {
    /// Pullback budget for a target of radius r: ⌈ln(r/(2δ))/ln λ⌉, zero
    /// when the target is already large.
    pub fn k_pullbacks(&self, radius: f64) -> usize {
        k_pullback_budget(radius, self.delta, self.lambda)
    }

    /// Word-length bound k·n₀ + k(r) for a target of radius r.
    pub fn length_bound(&self, radius: f64) -> usize {
        self.k_blocks * self.n0 + self.k_pullbacks(radius)
    }

    /// The same bound with the documented ε-slack: contraction rates are
    /// inflated to κ+ε and deflated to λ−ε.
    pub fn length_bound_eps(&self, radius: f64, eps: f64) -> usize {
        let kappa = (self.kappa + eps).min(0.999_999);
        let lambda = (self.lambda - eps).max(1e-9);
        let diam = self.domain.diameter();
        let k_blocks = ((self.delta / diam).ln() / kappa.ln()).ceil().max(1.0) as usize;
        k_blocks * self.n0 + k_pullback_budget(radius, self.delta, lambda)
    }

    pub fn to_family(&self) -> Result<MapFamily> {
        self.family.to_family()
    }

    fn require_pass(&self) -> Result<()> {
        if self.pass {
            Ok(())
        } else {
            let failed: Vec<&str> = self
                .hypotheses
                .iter()
                .filter(|h| !h.pass)
                .map(|h| h.name.as_str())
                .collect();
            Err(IfsError::HypothesisFailed(failed.join(", ")))
        }
    }
}

fn k_pullback_budget(radius: f64, delta: f64, lambda: f64) -> usize {
    if radius >= 2.0 * delta {
        return 0;
    }
    ((radius / (2.0 * delta)).ln() / lambda.ln()).ceil() as usize
}

/// Covering pieces {f(D)} for an affine family.
fn family_pieces(family: &MapFamily, domain: &Region) -> Result<Vec<CoverPiece>> {
    family.affine_members().map(|members| {
        members
            .into_iter()
            .map(|(_, a)| CoverPiece::AffineImage { map: a.clone(), domain: domain.clone() })
            .collect()
    })
}

/// Minimal invariant box W ⊇ start with f(W) ⊆ W for every member,
/// computed by iterating bounding boxes to a fixed point.
fn invariant_box(family: &MapFamily, start: &BoxRegion) -> Result<BoxRegion> {
    let m = start.dim();
    let mut lo: Vec<f64> = (0..m).map(|i| start.center[i] - start.halfwidths[i]).collect();
    let mut hi: Vec<f64> = (0..m).map(|i| start.center[i] + start.halfwidths[i]).collect();
    for _ in 0..500 {
        let cur = BoxRegion::new(
            (0..m).map(|i| 0.5 * (lo[i] + hi[i])).collect(),
            (0..m).map(|i| (0.5 * (hi[i] - lo[i])).max(1e-12)).collect(),
        );
        let mut grown = false;
        for (_, f) in &family.members {
            let a = f
                .as_affine()
                .ok_or_else(|| IfsError::InvalidInput("certify needs affine members".into()))?;
            let img = a.image_bounding_box(&cur);
            for i in 0..m {
                let l = img.center[i] - img.halfwidths[i];
                let h = img.center[i] + img.halfwidths[i];
                if l < lo[i] - 1e-12 {
                    lo[i] = l;
                    grown = true;
                }
                if h > hi[i] + 1e-12 {
                    hi[i] = h;
                    grown = true;
                }
            }
        }
        if !grown {
            return Ok(cur);
        }
    }
    Err(IfsError::InvalidInput(
        "no invariant box: family is not eventually absorbing".into(),
    ))
}

/// Max over members of sup_{x ∈ closure(D)} dist(f(x), closure(D)).
fn covering_overshoot(family: &MapFamily, domain: &Region) -> f64 {
    let bb = domain.bounding_box();
    let m = bb.dim();
    family
        .members
        .iter()
        .filter_map(|(_, f)| f.as_affine())
        .map(|a| {
            let img = a.image_bounding_box(&bb);
            let mut acc = 0.0;
            for i in 0..m {
                let over_hi =
                    (img.center[i] + img.halfwidths[i]) - (bb.center[i] + bb.halfwidths[i]);
                let over_lo =
                    (bb.center[i] - bb.halfwidths[i]) - (img.center[i] - img.halfwidths[i]);
                let o = over_hi.max(over_lo).max(0.0);
                acc += o * o;
            }
            acc.sqrt()
        })
        .fold(0.0, f64::max)
}

/// Verify the sufficient hypotheses on D at grid spacing h and assemble the
/// certificate. A failed hypothesis yields a certificate with
/// `pass = false` and witnesses instead of an error.
pub fn certify(family: &MapFamily, domain: &Region, h: f64) -> Result<MinimalityCertificate> {
    let record = FamilyRecord::from_family(family)?;
    let grid = Grid::new(domain.clone(), h);
    let mut hypotheses = Vec::new();

    // (1) every member contracts closure(D); constants valid for all.
    let mut lambda = f64::INFINITY;
    let mut kappa: f64 = 0.0;
    let mut worst: Option<(String, f64)> = None;
    for (label, f) in &family.members {
        let b = crate::maps::lipschitz_bounds(f, domain, 4096);
        lambda = lambda.min(b.lower);
        kappa = kappa.max(b.upper);
        if b.upper >= 1.0 && worst.as_ref().map_or(true, |(_, k)| b.upper > *k) {
            worst = Some((label.clone(), b.upper));
        }
    }
    hypotheses.push(HypothesisCheck {
        name: "contraction".into(),
        pass: kappa < 1.0,
        detail: match &worst {
            Some((label, k)) => format!("member {label} has upper Lipschitz bound {k:.6}"),
            None => format!("lambda = {lambda:.6}, kappa = {kappa:.6}"),
        },
        witnesses: Vec::new(),
    });

    // (2) closure(D) ⊂ F(D), decided through exact affine inverses.
    let pieces = family_pieces(family, domain)?;
    let cover = covering_test_eroded(domain, &pieces, &grid, 0.0);
    hypotheses.push(HypothesisCheck {
        name: "covering".into(),
        pass: cover.pass,
        detail: if cover.pass {
            format!("grid covering holds at h = {h}")
        } else {
            format!("{} uncovered grid points", cover.uncovered)
        },
        witnesses: cover.witnesses.iter().take(16).cloned().collect(),
    });

    let mut rho = 0.0;
    let mut delta = 0.0;
    if cover.pass {
        rho = lebesgue_radius_eroded(&pieces, domain, &grid, 0.0)?;
        delta = DELTA_FRACTION * rho;
    }
    hypotheses.push(HypothesisCheck {
        name: "lebesgue".into(),
        pass: rho > 0.0,
        detail: format!("rho = {rho:.6}, delta = {delta:.6}"),
        witnesses: Vec::new(),
    });

    // (3) some n₀ within the word budget with Y_{n₀} (δ/2)-dense in D.
    let mut n0 = 0;
    let mut yn_density = f64::INFINITY;
    if kappa < 1.0 && delta > 0.0 {
        let k = family.len() as u64;
        let mut cap = 0;
        while cap < N0_HARD_CAP && k.checked_pow(cap as u32 + 1).map_or(false, |w| w <= WORD_BUDGET)
        {
            cap += 1;
        }
        for n in 1..=cap {
            let yn = fixed_point_set(family, n)?;
            let d = crate::geometry::density_radius(&yn.points, domain, &grid)?;
            yn_density = d;
            if d <= delta / 2.0 {
                n0 = n;
                break;
            }
        }
    }
    hypotheses.push(HypothesisCheck {
        name: "fixed-point density".into(),
        pass: n0 > 0,
        detail: if n0 > 0 {
            format!("Y_{n0} is {yn_density:.6}-dense (needs {:.6})", delta / 2.0)
        } else {
            format!(
                "densest measured {yn_density:.6} > required {:.6} within word budget",
                delta / 2.0
            )
        },
        witnesses: Vec::new(),
    });

    let pass = hypotheses.iter().all(|c| c.pass);
    let (working_box, overshoot) = if pass {
        (
            invariant_box(family, &domain.bounding_box())?,
            covering_overshoot(family, domain),
        )
    } else {
        (domain.bounding_box(), 0.0)
    };
    let diam = domain.diameter();
    let k_blocks = if pass {
        ((delta / diam).ln() / kappa.ln()).ceil().max(1.0) as usize
    } else {
        0
    };
    Ok(MinimalityCertificate {
        family: record,
        domain: domain.clone(),
        grid_h: h,
        lambda,
        kappa,
        rho,
        delta,
        n0,
        yn_density,
        k_blocks,
        working_box,
        overshoot,
        hypotheses,
        pass,
    })
}

/// One letter of a branch plan: the family step it consumes and the member
/// applied at that step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanStep {
    pub step: usize,
    pub member: usize,
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub case: char,
    pub first_step: usize,
    pub last_step: usize,
    pub detail: String,
}

/// A verified word of map choices carrying x into the target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPlan {
    pub start: Vec<f64>,
    pub target: Ball,
    pub start_step: usize,
    pub word: Vec<PlanStep>,
    pub phase_log: Vec<PhaseEntry>,
    /// Orbit of the start point, one entry per applied step.
    pub endpoints: Vec<Vec<f64>>,
}

impl BranchPlan {
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn end(&self) -> &[f64] {
        self.endpoints.last().map(|p| p.as_slice()).unwrap_or(&self.start)
    }
}

/// Deterministic ~n-point sample of the domain (endpoint-inclusive lattice,
/// so box corners are included).
pub fn domain_sample(domain: &Region, n: usize) -> Vec<Vec<f64>> {
    let m = domain.dim();
    let bb = domain.bounding_box();
    let per_axis = (n as f64).powf(1.0 / m as f64).round().max(2.0);
    let h = bb
        .halfwidths
        .iter()
        .map(|w| 2.0 * w / (per_axis - 1.0))
        .fold(f64::INFINITY, f64::min);
    let grid = Grid::new(domain.clone(), h);
    grid.points()
}

struct BlockChoice {
    letters: Vec<usize>,
    fixed_point: Vec<f64>,
}

/// Fixed points of all k^n₀ words of the composed block
/// F_{cursor+n₀} ∘ … ∘ F_{cursor+1}; `families[d]` is the family at depth
/// d+1 within the block.
fn block_fixed_points(families: &[MapFamily]) -> Result<Vec<BlockChoice>> {
    let n = families.len();
    let m = families[0].dim();
    let k = families[0].len();
    let mut out = Vec::with_capacity(k.pow(n as u32));
    let mut letters = vec![0usize; n];
    let mut stack: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n + 1);
    let mut id = vec![0.0; m * m];
    for i in 0..m {
        id[i * m + i] = 1.0;
    }
    stack.push((id, vec![0.0; m]));
    let mut depth = 0usize;
    loop {
        if depth == n {
            let (a, b) = stack.last().unwrap();
            let fp = solve_fixed_point(m, a, b)
                .ok_or_else(|| IfsError::InvalidInput("singular block word".into()))?;
            out.push(BlockChoice { letters: letters.clone(), fixed_point: fp });
            loop {
                if depth == 0 {
                    return Ok(out);
                }
                depth -= 1;
                stack.pop();
                if letters[depth] + 1 < k {
                    letters[depth] += 1;
                    break;
                }
                letters[depth] = 0;
            }
        }
        let f = families[depth].members[letters[depth]]
            .1
            .as_affine()
            .ok_or_else(|| IfsError::InvalidInput("block member is not affine".into()))?;
        let (a, b) = stack.last().unwrap();
        // Appending a letter prepends its map to the composition.
        let mut na = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for kk in 0..m {
                    acc += f.linear()[i * m + kk] * a[kk * m + j];
                }
                na[i * m + j] = acc;
            }
        }
        let mut nb = f.shift().to_vec();
        for i in 0..m {
            for kk in 0..m {
                nb[i] += f.linear()[i * m + kk] * b[kk];
            }
        }
        stack.push((na, nb));
        depth += 1;
    }
}

/// Exact composed affine map of a block word over per-step families.
fn compose_block(families: &[MapFamily], letters: &[usize]) -> AffineMap {
    let m = families[0].dim();
    let mut acc = AffineMap::identity(m);
    for (d, &l) in letters.iter().enumerate() {
        let f = families[d].members[l].1.as_affine().unwrap();
        acc = f.compose(&acc).unwrap();
    }
    acc
}

/// Containment depth of ball B(c, r) inside the affine image g(D) of the
/// box domain, measured in image metric; positive means contained.
fn containment_depth(g: &AffineMap, domain: &BoxRegion, center: &[f64], radius: f64) -> f64 {
    let pre = g.apply_inverse(center);
    let depth = domain.depth(&pre);
    (depth - radius / g.sv_min()) * g.sv_min()
}

/// Construct a word carrying all of D (and in particular `x`) into
/// `target`, consuming the family sequence from `start_step + 1` onward.
pub fn dense_branch(
    x: &[f64],
    target: &Ball,
    seq: &FamilySequence,
    cert: &MinimalityCertificate,
    start_step: usize,
) -> Result<BranchPlan> {
    cert.require_pass()?;
    let domain = &cert.domain;
    if !domain.contains(x, 0.0) {
        return Err(IfsError::InvalidInput(
            "start point lies outside the certified domain".into(),
        ));
    }
    let bb = domain.bounding_box();
    let m = bb.dim();
    // target ∩ D ≠ ∅: the closest domain point to the center is within
    // the radius.
    let clamped: Vec<f64> = (0..m)
        .map(|i| {
            target.center[i]
                .max(bb.center[i] - bb.halfwidths[i])
                .min(bb.center[i] + bb.halfwidths[i])
        })
        .collect();
    if dist(&clamped, &target.center) > target.radius {
        return Err(IfsError::InvalidInput("target does not meet the domain".into()));
    }

    // A target containing all of D needs no steps at all.
    let enclosing = bb.halfwidths.iter().map(|w| w * w).sum::<f64>().sqrt();
    if dist(&bb.center, &target.center) + enclosing <= target.radius {
        return Ok(BranchPlan {
            start: x.to_vec(),
            target: target.clone(),
            start_step,
            word: Vec::new(),
            phase_log: Vec::new(),
            endpoints: Vec::new(),
        });
    }

    let two_delta = 2.0 * cert.delta;
    let block_len = cert.n0;
    let k_blocks = cert.k_blocks;

    // Case (b): pull small targets back through covering members until the
    // radius reaches 2δ. Pullback letters occupy the *last* J steps of the
    // plan, so J is found by fixed-point iteration over the step indices.
    let budget_j = cert.k_pullbacks(target.radius) + PULLBACK_SLACK;
    let mut j_guess = cert.k_pullbacks(target.radius);
    let mut pulls: Vec<(usize, AffineMap)> = Vec::new(); // pick order: first = applied last
    let mut case_a_target = target.clone();
    for _attempt in 0..8 {
        pulls.clear();
        case_a_target = target.clone();
        let total_len = k_blocks * block_len + j_guess;
        let mut t = 0usize;
        let mut grow = false;
        while case_a_target.radius < two_delta {
            if t >= j_guess {
                grow = true; // guessed too few steps
                break;
            }
            // The t-th pull is applied at step (last − t).
            let step = start_step + total_len - t;
            let fam = seq.family_at(step);
            let mut best: Option<(usize, f64)> = None;
            for (i, (_, f)) in fam.members.iter().enumerate() {
                let a = f
                    .as_affine()
                    .ok_or_else(|| IfsError::InvalidInput("pullback member not affine".into()))?;
                let depth = containment_depth(a, &bb, &case_a_target.center, case_a_target.radius);
                if depth > 0.0 && best.map_or(true, |(_, d)| depth > d) {
                    best = Some((i, depth));
                }
            }
            let Some((pick, _)) = best else {
                return Err(IfsError::BranchFailed {
                    step,
                    reason: "no covering member contains the pullback target".into(),
                });
            };
            let g = fam.members[pick].1.as_affine().unwrap().clone();
            let new_center = g.apply_inverse(&case_a_target.center);
            let new_radius = case_a_target.radius / g.sv_max();
            case_a_target = Ball::new(new_center, new_radius);
            pulls.push((pick, g));
            t += 1;
        }
        if !grow && t == j_guess {
            break;
        }
        if grow {
            j_guess += 1;
        } else {
            j_guess = t; // fewer pulls than budgeted: re-run with exact count
        }
        if j_guess > budget_j {
            return Err(IfsError::BranchFailed {
                step: start_step,
                reason: format!("pullback budget exceeded ({j_guess} > {budget_j})"),
            });
        }
    }
    let j = pulls.len();
    if case_a_target.radius < two_delta {
        return Err(IfsError::BranchFailed {
            step: start_step,
            reason: "pullback iteration did not stabilize".into(),
        });
    }

    // Case (a): k blocks of length n₀ toward the (possibly pulled-back)
    // target, each block a word whose fixed point lies within δ of the
    // target center. The tracked image bound is exact for affine blocks.
    let mut word: Vec<PlanStep> = Vec::new();
    let mut phase_log: Vec<PhaseEntry> = Vec::new();
    let c_t = &case_a_target.center;
    let mut prev_center = bb.center.clone();
    let mut rad = enclosing;
    for blk in 0..k_blocks {
        let first = start_step + blk * block_len + 1;
        let fams: Vec<MapFamily> = (0..block_len).map(|d| seq.family_at(first + d)).collect();
        let choices = block_fixed_points(&fams)?;
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in choices.iter().enumerate() {
            let d = dist(&c.fixed_point, c_t);
            if d <= cert.delta && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let Some((pick, fp_dist)) = best else {
            return Err(IfsError::BranchFailed {
                step: first,
                reason: format!(
                    "no block fixed point within delta = {:.6} of the target center",
                    cert.delta
                ),
            });
        };
        let choice = &choices[pick];
        let composed = compose_block(&fams, &choice.letters);
        let sigma = composed.sv_max();
        rad = sigma * (rad + dist(&prev_center, &choice.fixed_point));
        prev_center = choice.fixed_point.clone();
        for (d, &l) in choice.letters.iter().enumerate() {
            word.push(PlanStep {
                step: first + d,
                member: l,
                label: fams[d].members[l].0.clone(),
            });
        }
        phase_log.push(PhaseEntry {
            case: 'a',
            first_step: first,
            last_step: first + block_len - 1,
            detail: format!(
                "block {}: fixed point {:.6} from target center, block contraction {:.6}, image bound {:.6}",
                blk + 1,
                fp_dist,
                sigma,
                rad
            ),
        });
    }
    // Analytic containment of the case-(a) phase.
    if dist(&prev_center, c_t) + rad > case_a_target.radius {
        return Err(IfsError::BranchFailed {
            step: start_step + k_blocks * block_len,
            reason: format!(
                "tracked image bound {:.6} does not fit the case-(a) target radius {:.6}",
                dist(&prev_center, c_t) + rad,
                case_a_target.radius
            ),
        });
    }
    // Pullback letters, last pull applied first.
    for (t, (pick, _)) in pulls.iter().enumerate().rev() {
        let step = start_step + k_blocks * block_len + (j - t);
        let fam = seq.family_at(step);
        word.push(PlanStep { step, member: *pick, label: fam.members[*pick].0.clone() });
        phase_log.push(PhaseEntry {
            case: 'b',
            first_step: step,
            last_step: step,
            detail: format!("pullback through member {}", fam.members[*pick].0),
        });
    }

    // Verify by replay: a sample of D (plus the start point) must land in
    // the target, staying inside the working box at every step.
    let mut sample = domain_sample(domain, 100);
    sample.push(x.to_vec());
    let endpoints = replay_word(seq, &word, x);
    for p in &sample {
        let mut cur = p.clone();
        for ps in &word {
            let fam = seq.family_at(ps.step);
            cur = fam.members[ps.member].1.apply(&cur);
            if !box_contains_inflated(&cert.working_box, &cur, 1e-9) {
                return Err(IfsError::BranchFailed {
                    step: ps.step,
                    reason: "replay escaped the working box".into(),
                });
            }
        }
        if dist(&cur, &target.center) > target.radius {
            return Err(IfsError::BranchFailed {
                step: start_step + word.len(),
                reason: format!(
                    "replayed sample point missed the target by {:.3e}",
                    dist(&cur, &target.center) - target.radius
                ),
            });
        }
    }

    Ok(BranchPlan {
        start: x.to_vec(),
        target: target.clone(),
        start_step,
        word,
        phase_log,
        endpoints,
    })
}

fn box_contains_inflated(b: &BoxRegion, x: &[f64], slack: f64) -> bool {
    x.iter()
        .zip(&b.center)
        .zip(&b.halfwidths)
        .all(|((xi, ci), wi)| (xi - ci).abs() <= wi + slack)
}

/// Apply a plan's word to a point, returning the orbit.
pub fn replay_word(seq: &FamilySequence, word: &[PlanStep], x: &[f64]) -> Vec<Vec<f64>> {
    let mut cur = x.to_vec();
    let mut out = Vec::with_capacity(word.len());
    for ps in word {
        let fam = seq.family_at(ps.step);
        cur = fam.members[ps.member].1.apply(&cur);
        out.push(cur.clone());
    }
    out
}

/// Chain branches visiting every ball of `base_list` in order, continuing
/// the family sequence at the consumed step index.
pub fn dense_orbit(
    x: &[f64],
    seq: &FamilySequence,
    cert: &MinimalityCertificate,
    base_list: &[Ball],
) -> Result<Vec<BranchPlan>> {
    cert.require_pass()?;
    let mut plans = Vec::with_capacity(base_list.len());
    let mut cur = x.to_vec();
    let mut cursor = 0usize;
    for ball in base_list {
        let plan = dense_branch(&cur, ball, seq, cert, cursor)?;
        cursor += plan.len();
        if !plan.is_empty() {
            cur = plan.end().to_vec();
        }
        plans.push(plan);
    }
    Ok(plans)
}

/// Outcome of one strong-robustness trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub success: bool,
    pub plan_len: usize,
    pub bound: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub eps: f64,
    pub trials: usize,
    pub successes: usize,
    pub precheck_pass: bool,
    pub precheck_detail: String,
    pub outcomes: Vec<TrialOutcome>,
}

impl TrialReport {
    pub fn all_pass(&self) -> bool {
        self.precheck_pass && self.successes == self.trials
    }
}

/// Check that ε stays below the certificate's margin: κ + ε < 1, the
/// covering still holds with an ε-eroded boundary, and the eroded Lebesgue
/// radius still dominates 2δ.
pub fn margin_precheck(
    cert: &MinimalityCertificate,
    family: &MapFamily,
    eps: f64,
) -> Result<(bool, String)> {
    if cert.kappa + eps >= 1.0 {
        return Ok((false, format!("kappa + eps = {:.6} >= 1", cert.kappa + eps)));
    }
    if eps == 0.0 {
        return Ok((true, "eps = 0: unperturbed margins".into()));
    }
    let m = family.dim() as f64;
    let erosion = eps * m.sqrt();
    let grid = Grid::new(cert.domain.clone(), cert.grid_h);
    let pieces = family_pieces(family, &cert.domain)?;
    let cover = covering_test_eroded(&cert.domain, &pieces, &grid, erosion);
    if !cover.pass {
        return Ok((
            false,
            format!(
                "eroded covering fails at {} grid points (erosion {erosion:.4})",
                cover.uncovered
            ),
        ));
    }
    let rho_eroded = lebesgue_radius_eroded(&pieces, &cert.domain, &grid, erosion)?;
    if rho_eroded < 2.0 * cert.delta {
        return Ok((
            false,
            format!(
                "eroded Lebesgue radius {rho_eroded:.6} below 2*delta = {:.6}",
                2.0 * cert.delta
            ),
        ));
    }
    Ok((true, format!("eroded Lebesgue radius {rho_eroded:.6} >= 2*delta")))
}

/// Run seeded perturbed-sequence trials: each trial draws a fresh family
/// sequence within ε, a random start in D and a random target of the given
/// radius, builds a dense branch and verifies it by replay.
pub fn strong_trial(
    cert: &MinimalityCertificate,
    eps: f64,
    n_trials: usize,
    target_radius: f64,
    seed: u64,
) -> Result<TrialReport> {
    cert.require_pass()?;
    let family = cert.to_family()?;
    let (pre_pass, pre_detail) = margin_precheck(cert, &family, eps)?;
    if !pre_pass {
        return Ok(TrialReport {
            eps,
            trials: 0,
            successes: 0,
            precheck_pass: false,
            precheck_detail: pre_detail,
            outcomes: Vec::new(),
        });
    }
    let bb = cert.domain.bounding_box();
    let m = bb.dim();
    let working = Region::Box(cert.working_box.clone());
    let bound = cert.length_bound_eps(target_radius, eps);
    let mut outcomes = Vec::with_capacity(n_trials);
    let mut successes = 0;
    for t in 0..n_trials {
        let trial_seed = seed.wrapping_add(t as u64);
        let seq = FamilySequence::perturbed(
            family.clone(),
            working.clone(),
            eps,
            PerturbModel::Affine,
            trial_seed,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed ^ 0x5eed_ba11);
        let start: Vec<f64> = (0..m)
            .map(|i| {
                let w = bb.halfwidths[i] * 0.999;
                bb.center[i] + rng.gen_range(-w..w)
            })
            .collect();
        let center: Vec<f64> = (0..m)
            .map(|i| {
                let w = (bb.halfwidths[i] - target_radius).max(bb.halfwidths[i] * 0.1);
                bb.center[i] + rng.gen_range(-w..w)
            })
            .collect();
        let target = Ball::new(center, target_radius);
        let outcome = match dense_branch(&start, &target, &seq, cert, 0) {
            Ok(plan) => {
                let within = plan.len() <= bound;
                if within {
                    successes += 1;
                }
                TrialOutcome {
                    seed: trial_seed,
                    success: within,
                    plan_len: plan.len(),
                    bound,
                    error: (!within).then(|| "plan exceeded the length bound".to_string()),
                }
            }
            Err(e) => TrialOutcome {
                seed: trial_seed,
                success: false,
                plan_len: 0,
                bound,
                error: Some(e.to_string()),
            },
        };
        outcomes.push(outcome);
    }
    Ok(TrialReport {
        eps,
        trials: n_trials,
        successes,
        precheck_pass: true,
        precheck_detail: pre_detail,
        outcomes,
    })
}

/// Certify the translated family {φ + δ·b_i} of a unit-ball cover plan on
/// the ball B_δ(0), realizing the local proposition's route.
pub fn certify_translated_cover(
    phi: &AffineMap,
    plan: &crate::affine::CoverPlan,
    h: f64,
) -> Result<MinimalityCertificate> {
    let family = crate::affine::translated_family(phi, plan)?;
    let domain = Region::Ball(Ball::new(vec![0.0; phi.dim()], plan.delta));
    certify(&family, &domain, h)
}
