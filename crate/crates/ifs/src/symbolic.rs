//! Skew products over the full shift with contracting fiber maps, strip
//! refinement, blender verification and a topological-mixing probe.
//!
//! The model is H(ω, y) = (σω, h_sel(ω)(y)) where the selector reads a
//! finite forward window ω₀…ω_{w−1}; window length 1 recovers the product
//! driven by the symbol at the origin. Strips track, per symbolic prefix,
//! an enclosing ball of the fiber image of E_out under the maps the prefix
//! already determines; their diameters decay like κ_max per generation
//! once the prefix is longer than the window.

use crate::error::{IfsError, Result};
use crate::geometry::{covering_test, Ball, CoverPiece, Grid, Region};
use crate::maps::{lipschitz_bounds, perturb, MapFamily, MapKind, PerturbModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A finite word over the alphabet {1..k}, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolWord {
    pub alphabet: usize,
    pub letters: Vec<u8>,
}

impl SymbolWord {
    pub fn new(alphabet: usize, letters: Vec<u8>) -> Result<Self> {
        if alphabet < 2 {
            return Err(IfsError::InvalidInput("alphabet needs k >= 2".into()));
        }
        if letters.iter().any(|&l| l as usize >= alphabet) {
            return Err(IfsError::InvalidInput("letter out of alphabet range".into()));
        }
        Ok(SymbolWord { alphabet, letters })
    }

    /// Parse digits like "121" into 0-based letters.
    pub fn parse(alphabet: usize, text: &str) -> Result<Self> {
        let letters = text
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .filter(|d| (1..=alphabet as u32).contains(d))
                    .map(|d| (d - 1) as u8)
                    .ok_or_else(|| {
                        IfsError::InvalidInput(format!("bad symbol {c} for alphabet {alphabet}"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        SymbolWord::new(alphabet, letters)
    }

    pub fn render(&self) -> String {
        self.letters.iter().map(|l| (l + 1).to_string()).collect()
    }
}

/// A two-sided symbol window with a marked origin; `symbols[origin]` is ω₀.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolWindow {
    pub alphabet: usize,
    pub symbols: Vec<u8>,
    pub origin: usize,
}

impl SymbolWindow {
    pub fn new(alphabet: usize, symbols: Vec<u8>, origin: usize) -> Result<Self> {
        if origin >= symbols.len() {
            return Err(IfsError::InvalidInput("origin outside the window".into()));
        }
        if symbols.iter().any(|&l| l as usize >= alphabet) {
            return Err(IfsError::InvalidInput("symbol out of range".into()));
        }
        Ok(SymbolWindow { alphabet, symbols, origin })
    }
}

/// Fiber-contracting skew product over the full shift on k symbols; the
/// fiber map is selected by the length-w forward window at the origin.
#[derive(Clone)]
pub struct SkewProduct {
    pub alphabet: usize,
    pub window: usize,
    /// Fiber maps indexed by window code (big-endian base-k).
    pub fibers: Vec<(String, MapKind)>,
    pub e_in: Region,
    pub e_out: Ball,
}

impl std::fmt::Debug for SkewProduct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SkewProduct")
            .field("alphabet", &self.alphabet)
            .field("window", &self.window)
            .field("fibers", &self.fibers.len())
            .finish()
    }
}

/// Big-endian base-k code of a window.
pub fn window_code(alphabet: usize, window: &[u8]) -> usize {
    window.iter().fold(0usize, |acc, &l| acc * alphabet + l as usize)
}

impl SkewProduct {
    pub fn new(
        alphabet: usize,
        window: usize,
        fibers: Vec<(String, MapKind)>,
        e_in: Region,
        e_out: Ball,
    ) -> Result<Self> {
        if window < 1 {
            return Err(IfsError::InvalidInput("window length must be >= 1".into()));
        }
        if fibers.len() != alphabet.pow(window as u32) {
            return Err(IfsError::InvalidInput(format!(
                "need {} fiber maps for k = {alphabet}, w = {window}",
                alphabet.pow(window as u32)
            )));
        }
        Ok(SkewProduct { alphabet, window, fibers, e_in, e_out })
    }

    /// Window-1 product driven by the members of a family in order; the
    /// symbol i selects member i.
    pub fn from_family(family: &MapFamily, e_in: Region, e_out: Ball) -> Result<Self> {
        let fibers = family.members.clone();
        SkewProduct::new(family.len(), 1, fibers, e_in, e_out)
    }

    /// Window-w product whose fiber for a window τ is a seeded
    /// ε-perturbation of the member selected by τ₀. ε = 0 reduces to the
    /// base dependence on the origin symbol only.
    pub fn perturbed_window(
        family: &MapFamily,
        window: usize,
        eps: f64,
        seed: u64,
        e_in: Region,
        e_out: Ball,
    ) -> Result<Self> {
        let k = family.len();
        let total = k.pow(window as u32);
        let mut fibers = Vec::with_capacity(total);
        for code in 0..total {
            let first = code / k.pow(window as u32 - 1);
            let (label, base) = &family.members[first];
            let f = perturb(base, eps, PerturbModel::Affine, seed ^ ((code as u64) << 1))?;
            fibers.push((format!("{label}~{code}"), f));
        }
        SkewProduct::new(k, window, fibers, e_in, e_out)
    }

    pub fn dim(&self) -> usize {
        self.e_out.dim()
    }

    /// Fiber map selected by a full window slice.
    pub fn fiber(&self, window: &[u8]) -> &MapKind {
        &self.fibers[window_code(self.alphabet, window)].1
    }

    /// Max upper Lipschitz bound over all fibers on E_out; errors naming
    /// the first non-contracting window.
    pub fn contraction_rate(&self) -> Result<f64> {
        let dom = Region::Ball(self.e_out.clone());
        let mut kappa: f64 = 0.0;
        for (label, f) in &self.fibers {
            let b = lipschitz_bounds(f, &dom, 512);
            if b.upper >= 1.0 {
                return Err(IfsError::InvalidInput(format!(
                    "fiber {label} is not a contraction on E_out (kappa = {:.4})",
                    b.upper
                )));
            }
            kappa = kappa.max(b.upper);
        }
        Ok(kappa)
    }
}

/// One application of the skew product: shift the window origin and apply
/// the selected fiber map. Consuming the window edge is an error.
pub fn skew_step(
    p: &SkewProduct,
    window: &SymbolWindow,
    y: &[f64],
) -> Result<(SymbolWindow, Vec<f64>)> {
    if window.origin + p.window > window.symbols.len() {
        return Err(IfsError::WindowExhausted { shift: window.origin });
    }
    let sel = &window.symbols[window.origin..window.origin + p.window];
    let fy = p.fiber(sel).apply(y);
    let mut next = window.clone();
    next.origin += 1;
    Ok((next, fy))
}

/// A symbolic cylinder with a ball bounding the fiber image of E_out under
/// every refinement of the prefix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Strip {
    pub prefix: Vec<u8>,
    pub bound: Ball,
    pub generation: usize,
}

/// Refine each strip by one symbol: k children per strip. Once the child
/// prefix is at least as long as the window, the newly determined step's
/// map is applied to the parent bound (exact enclosing ball for affine
/// fibers, Lipschitz inflation otherwise).
pub fn strip_refine(p: &SkewProduct, strips: &[Strip]) -> Vec<Strip> {
    let k = p.alphabet as u8;
    let mut out = Vec::with_capacity(strips.len() * p.alphabet);
    for s in strips {
        for c in 0..k {
            let mut prefix = s.prefix.clone();
            prefix.push(c);
            let n = prefix.len();
            let bound = if n >= p.window {
                let window = &prefix[n - p.window..];
                ball_image(p.fiber(window), &s.bound, &p.e_out)
            } else {
                s.bound.clone()
            };
            out.push(Strip { prefix, bound, generation: s.generation + 1 });
        }
    }
    out
}

/// Enclosing ball of f(B) for a ball B: exact for affine maps (the image
/// ellipsoid's major semi-axis), Lipschitz-inflated for black boxes.
fn ball_image(f: &MapKind, b: &Ball, e_out: &Ball) -> Ball {
    match f {
        MapKind::Affine(a) => Ball::new(a.apply(&b.center), a.sv_max() * b.radius),
        MapKind::BlackBox(bb) => {
            let dom = Region::Ball(e_out.clone());
            let lip = lipschitz_bounds(&MapKind::BlackBox(bb.clone()), &dom, 256);
            Ball::new(bb.apply(&b.center), lip.upper * b.radius)
        }
    }
}

/// Per-generation refinement statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: usize,
    pub strips_kept: usize,
    pub pruned: usize,
    pub max_diameter: f64,
    pub covering_pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlenderReport {
    pub n_max: usize,
    pub grid_h: f64,
    pub rho_base: f64,
    pub domination_pass: bool,
    pub generations: Vec<GenerationRow>,
    pub final_max_diameter: f64,
    pub pass: bool,
    /// Minimality of the strong unstable lamination is verified only
    /// through this strip-density proxy; the leafwise statement itself is
    /// not machine-checked.
    pub notes: String,
}

/// Strip budget; beyond it, strips redundant for the covering are pruned
/// (reported, never silent).
pub const STRIP_BUDGET: usize = 1 << 20;
/// Kept strips per retention cell once pruning is active.
const PRUNE_REDUNDANCY: usize = 8;

/// Verify the blender structure: fiber contraction, the inclusion
/// E_in ⊂ ∪ h_w(E_in), and per-generation strip covering of E_in with
/// diameters decaying below 2h by n_max.
pub fn blender_verify(p: &SkewProduct, n_max: usize, h: f64) -> Result<BlenderReport> {
    p.contraction_rate()?;

    // Inclusion precheck: every E_in grid point lies in some window image.
    let grid = Grid::new(p.e_in.clone(), h);
    let pieces: Vec<CoverPiece> = p
        .fibers
        .iter()
        .map(|(label, f)| match f {
            MapKind::Affine(a) => {
                Ok(CoverPiece::AffineImage { map: a.clone(), domain: p.e_in.clone() })
            }
            MapKind::BlackBox(_) => Err(IfsError::InvalidInput(format!(
                "blender precheck needs affine fibers ({label})"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    let incl = covering_test(&p.e_in, &pieces, &grid);
    if !incl.pass {
        return Err(IfsError::CoveringFailed {
            uncovered: incl.uncovered,
            witnesses: incl.witnesses.into_iter().take(8).collect(),
        });
    }

    let rho_base = 2.0;
    let domination_pass = check_domination(p, rho_base)?;

    // E_in grid points for the per-generation covering check.
    let points = grid.points();
    let mut covered = vec![false; points.len()];

    let mut strips = vec![Strip { prefix: Vec::new(), bound: p.e_out.clone(), generation: 0 }];
    let mut generations = Vec::with_capacity(n_max);
    let mut final_max = f64::INFINITY;
    for gen in 1..=n_max {
        let children = strip_refine(p, &strips);
        let max_diameter = children
            .iter()
            .map(|s| 2.0 * s.bound.radius)
            .fold(0.0, f64::max);
        // Prune only past the budget, largest strips first, so the maximal
        // lineage always survives and the measured decay stays exact.
        let (kept, pruned) = if children.len() > STRIP_BUDGET {
            prune_redundant(p, children, h)
        } else {
            (children, 0)
        };

        for c in covered.iter_mut() {
            *c = false;
        }
        for s in &kept {
            mark_covered(&points, &mut covered, &s.bound);
        }
        let covering_pass = covered.iter().all(|c| *c);
        generations.push(GenerationRow {
            generation: gen,
            strips_kept: kept.len(),
            pruned,
            max_diameter,
            covering_pass,
        });
        final_max = max_diameter;
        strips = kept;
    }

    let last_cover = generations.last().map(|g| g.covering_pass).unwrap_or(false);
    let pass = domination_pass && last_cover && final_max <= 2.0 * h;
    Ok(BlenderReport {
        n_max,
        grid_h: h,
        rho_base,
        domination_pass,
        generations,
        final_max_diameter: final_max,
        pass,
        notes: "unstable-lamination minimality verified via strip density proxy only".into(),
    })
}

fn mark_covered(points: &[Vec<f64>], covered: &mut [bool], bound: &Ball) {
    let r2 = bound.radius * bound.radius;
    for (i, pt) in points.iter().enumerate() {
        if covered[i] {
            continue;
        }
        let d2: f64 = pt
            .iter()
            .zip(&bound.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 <= r2 {
            covered[i] = true;
        }
    }
}

/// Keep, in descending diameter order, strips that still add coverage of
/// retention cells (a coarse lattice over E_out) below the redundancy cap.
fn prune_redundant(p: &SkewProduct, mut strips: Vec<Strip>, h: f64) -> (Vec<Strip>, usize) {
    strips.sort_by(|a, b| {
        b.bound
            .radius
            .partial_cmp(&a.bound.radius)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.prefix.cmp(&b.prefix))
    });
    let cell = 4.0 * h;
    let m = p.dim();
    let mut counts: std::collections::HashMap<Vec<i64>, usize> = std::collections::HashMap::new();
    let mut kept = Vec::new();
    let mut pruned = 0usize;
    for s in strips {
        let key: Vec<i64> = (0..m).map(|i| (s.bound.center[i] / cell).floor() as i64).collect();
        let reach = (s.bound.radius / cell).ceil() as i64;
        let mut fresh = false;
        let mut touched = Vec::new();
        visit_cells(&key, reach.min(8), &mut |c| {
            let n = counts.get(&c).copied().unwrap_or(0);
            if n < PRUNE_REDUNDANCY {
                fresh = true;
            }
            touched.push(c);
        });
        if fresh {
            for c in touched {
                *counts.entry(c).or_insert(0) += 1;
            }
            kept.push(s);
        } else {
            pruned += 1;
        }
    }
    kept.sort_by(|a, b| a.prefix.cmp(&b.prefix));
    (kept, pruned)
}

fn visit_cells(key: &[i64], reach: i64, f: &mut impl FnMut(Vec<i64>)) {
    let m = key.len();
    let mut offs = vec![-reach; m];
    'outer: loop {
        f(key.iter().zip(&offs).map(|(k, o)| k + o).collect());
        for i in 0..m {
            offs[i] += 1;
            if offs[i] <= reach {
                continue 'outer;
            }
            offs[i] = -reach;
        }
        break;
    }
}

/// Partial-hyperbolicity domination against a nominal base rate ρ > 1:
/// every fiber map's bounds on E_out satisfy 1/ρ < λ ≤ κ < ρ.
pub fn check_domination(p: &SkewProduct, rho_base: f64) -> Result<bool> {
    if rho_base <= 1.0 {
        return Err(IfsError::InvalidInput("base rate must exceed 1".into()));
    }
    let dom = Region::Ball(p.e_out.clone());
    Ok(p.fibers.iter().all(|(_, f)| {
        let b = lipschitz_bounds(f, &dom, 256);
        1.0 / rho_base < b.lower && b.upper < rho_base
    }))
}

/// Diagnostics of a mixing probe run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixReport {
    pub pass: bool,
    pub n_lo: usize,
    pub horizon: usize,
    pub samples: usize,
    /// Hits per step n in [n_lo, horizon].
    pub hits: Vec<usize>,
    pub first_miss: Option<usize>,
}

/// Sample-based topological-mixing probe: seed fiber points in U's ball
/// over seeded random futures extending U's prefix, iterate, and demand
/// that for every n in [n_lo, horizon] some sample sits in V (symbolic
/// prefix match and fiber ball membership).
pub fn mixing_probe(
    p: &SkewProduct,
    u: (&SymbolWord, &Ball),
    v: (&SymbolWord, &Ball),
    n_lo: usize,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<MixReport> {
    let (u_word, u_ball) = u;
    let (v_word, v_ball) = v;
    if u_ball.dim() != p.dim() || v_ball.dim() != p.dim() {
        return Err(IfsError::DimensionMismatch { expected: p.dim(), got: u_ball.dim() });
    }
    if horizon < n_lo {
        return Err(IfsError::InvalidInput("horizon below the mixing onset".into()));
    }
    let m = p.dim();
    let need = horizon + v_word.letters.len() + p.window;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; horizon - n_lo + 1];
    for _ in 0..samples {
        // Future symbols extending U's cylinder.
        let mut symbols = u_word.letters.clone();
        while symbols.len() < need {
            symbols.push(rng.gen_range(0..p.alphabet) as u8);
        }
        // Fiber start in U's ball (rejection sampling in the cube).
        let y0: Vec<f64> = loop {
            let cand: Vec<f64> = (0..m)
                .map(|i| u_ball.center[i] + rng.gen_range(-u_ball.radius..=u_ball.radius))
                .collect();
            if crate::geometry::dist(&cand, &u_ball.center) <= u_ball.radius {
                break cand;
            }
        };
        let mut y = y0;
        let mut buf = vec![0.0; m];
        for n in 0..=horizon {
            if n >= n_lo {
                let sym_ok = symbols[n..n + v_word.letters.len()] == v_word.letters[..];
                if sym_ok && crate::geometry::dist(&y, &v_ball.center) <= v_ball.radius {
                    hits[n - n_lo] += 1;
                }
            }
            if n == horizon {
                break;
            }
            let sel = &symbols[n..n + p.window];
            p.fiber(sel).apply_into(&y, &mut buf);
            std::mem::swap(&mut y, &mut buf);
        }
    }
    let first_miss = hits.iter().position(|&c| c == 0).map(|i| i + n_lo);
    Ok(MixReport { pass: first_miss.is_none(), n_lo, horizon, samples, hits, first_miss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::{contracting_family, find_parameters};
    use crate::geometry::BoxRegion;
    use crate::hutchinson::absorbing_ball;
    use crate::maps::AffineMap;

    fn derived_product() -> SkewProduct {
        let p = find_parameters(2).unwrap();
        let fam = contracting_family(&p);
        let e_in = Region::Box(p.box_b());
        let seed = Ball::new(vec![0.0, 0.0], e_in.diameter() / 2.0);
        let e_out = absorbing_ball(&fam, &seed).unwrap();
        SkewProduct::from_family(&fam, e_in, e_out).unwrap()
    }

    #[test]
    fn skew_step_applies_selected_fiber() {
        let prod = derived_product();
        let p = find_parameters(2).unwrap();
        // Symbol 2 selects S∘T; at the fiber origin its value is (−s, 0).
        let w = SymbolWindow::new(2, vec![1, 0, 0], 0).unwrap();
        let (next, y) = skew_step(&prod, &w, &[0.0, 0.0]).unwrap();
        assert_eq!(next.origin, 1);
        assert!((y[0] - (-p.s)).abs() < 1e-15);
        assert!(y[1].abs() < 1e-15);
    }

    #[test]
    fn skew_step_identity_fibers_leave_y_fixed() {
        let id = MapFamily::new(vec![
            ("a".into(), MapKind::Affine(AffineMap::identity(2))),
            ("b".into(), MapKind::Affine(AffineMap::identity(2))),
        ])
        .unwrap();
        let prod = SkewProduct::from_family(
            &id,
            Region::Box(BoxRegion::centered(vec![1.0, 1.0])),
            Ball::new(vec![0.0, 0.0], 2.0),
        )
        .unwrap();
        let w = SymbolWindow::new(2, vec![0, 1, 0, 1], 0).unwrap();
        let y = [0.3, -0.4];
        let (w1, y1) = skew_step(&prod, &w, &y).unwrap();
        let (_, y2) = skew_step(&prod, &w1, &y1).unwrap();
        assert_eq!(y2, vec![0.3, -0.4]);
    }

    #[test]
    fn skew_step_errors_on_exhausted_window() {
        let prod = derived_product();
        let w = SymbolWindow::new(2, vec![0], 0).unwrap();
        let (next, _) = skew_step(&prod, &w, &[0.0, 0.0]).unwrap();
        assert!(matches!(
            skew_step(&prod, &next, &[0.0, 0.0]),
            Err(IfsError::WindowExhausted { .. })
        ));
    }

    #[test]
    fn n_skew_steps_equal_word_application() {
        let prod = derived_product();
        let p = find_parameters(2).unwrap();
        let fam = contracting_family(&p);
        let letters = [0u8, 1, 1, 0, 1, 0, 0, 1];
        let w = SymbolWindow::new(2, letters.to_vec(), 0).unwrap();
        let mut state = (w, vec![0.2, -0.1]);
        for _ in 0..letters.len() {
            state = skew_step(&prod, &state.0, &state.1).unwrap();
        }
        let word =
            crate::hutchinson::Word { letters: letters.iter().map(|&l| l as usize).collect() };
        let direct = word.apply(&fam, &[0.2, -0.1]);
        assert!(crate::geometry::dist(&state.1, &direct) <= 1e-12);
    }

    #[test]
    fn generation_one_has_k_strips() {
        let prod = derived_product();
        let gen0 = vec![Strip { prefix: vec![], bound: prod.e_out.clone(), generation: 0 }];
        let gen1 = strip_refine(&prod, &gen0);
        assert_eq!(gen1.len(), 2);
        assert!(gen1.iter().all(|s| s.generation == 1));
    }

    #[test]
    fn strip_diameters_obey_geometric_bound() {
        let prod = derived_product();
        let p = find_parameters(2).unwrap();
        let kappa = p.a * p.r;
        let mut strips = vec![Strip { prefix: vec![], bound: prod.e_out.clone(), generation: 0 }];
        let d0 = 2.0 * prod.e_out.radius;
        for n in 1..=10 {
            strips = strip_refine(&prod, &strips);
            let max_d = strips.iter().map(|s| 2.0 * s.bound.radius).fold(0.0, f64::max);
            assert!(
                max_d <= kappa.powi(n) * d0 * 1.01,
                "generation {n}: {max_d} exceeds bound"
            );
        }
    }

    #[test]
    fn window3_perturbed_diameters_decay() {
        let p = find_parameters(2).unwrap();
        let fam = contracting_family(&p);
        let e_in = Region::Box(p.box_b());
        let seed = Ball::new(vec![0.0, 0.0], e_in.diameter() / 2.0);
        let e_out = absorbing_ball(&fam, &seed).unwrap();
        let eps = 0.01;
        let prod = SkewProduct::perturbed_window(&fam, 3, eps, 99, e_in, e_out).unwrap();
        let mut strips = vec![Strip { prefix: vec![], bound: prod.e_out.clone(), generation: 0 }];
        let d0 = 2.0 * prod.e_out.radius;
        for n in 1..=8 {
            strips = strip_refine(&prod, &strips);
            let max_d = strips.iter().map(|s| 2.0 * s.bound.radius).fold(0.0, f64::max);
            // Applied maps lag the window by w−1 = 2 generations.
            let applied = (n as i32 - 2).max(0);
            let bound = (p.r * p.a + 2.0 * eps).powi(applied) * d0;
            assert!(max_d <= bound * 1.01, "generation {n}: {max_d} > {bound}");
        }
    }

    #[test]
    fn domination_examples() {
        let prod = derived_product();
        assert!(check_domination(&prod, 2.0).unwrap());
        let fat = MapFamily::new(vec![
            ("x3".into(), MapKind::Affine(AffineMap::scaling(2, 3.0))),
            ("half".into(), MapKind::Affine(AffineMap::scaling(2, 0.5))),
        ])
        .unwrap();
        let prod2 = SkewProduct::from_family(
            &fat,
            Region::Box(BoxRegion::centered(vec![1.0, 1.0])),
            Ball::new(vec![0.0, 0.0], 2.0),
        )
        .unwrap();
        assert!(!check_domination(&prod2, 2.0).unwrap());
        assert!(check_domination(&prod2, 1.0).is_err());
    }

    #[test]
    fn small_blender_run_passes_covering_each_generation() {
        let prod = derived_product();
        // Coarse grid and low n_max: exercises refinement and covering
        // (the final diameter clause is not yet active at n = 12).
        let report = blender_verify(&prod, 12, 0.1).unwrap();
        assert!(report.generations.iter().all(|g| g.covering_pass));
        assert_eq!(report.generations.len(), 12);
        let kappa = 0.86 * 1.01;
        for pair in report.generations.windows(2) {
            let ratio = pair[1].max_diameter / pair[0].max_diameter;
            assert!((ratio - kappa).abs() < 1e-9);
        }
    }

    #[test]
    fn collapsed_fibers_fail_covering_precheck() {
        // Both fibers equal one contraction with fixed point outside E_in:
        // all strips collapse onto that point and the inclusion fails.
        let c = AffineMap::new(2, vec![0.5, 0.0, 0.0, 0.5], vec![2.0, 2.0]).unwrap();
        let fam = MapFamily::new(vec![
            ("c".into(), MapKind::Affine(c.clone())),
            ("c2".into(), MapKind::Affine(c)),
        ])
        .unwrap();
        let e_in = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let e_out = Ball::new(vec![2.0, 2.0], 8.0);
        let prod = SkewProduct::from_family(&fam, e_in, e_out).unwrap();
        assert!(matches!(
            blender_verify(&prod, 5, 0.1),
            Err(IfsError::CoveringFailed { .. })
        ));
    }

    #[test]
    fn mixing_whole_space_is_immediate() {
        let prod = derived_product();
        let u = SymbolWord::new(2, vec![]).unwrap();
        let ball = Ball::new(vec![0.0, 0.0], prod.e_out.radius * 2.0);
        let report = mixing_probe(&prod, (&u, &ball), (&u, &ball), 0, 10, 256, 5).unwrap();
        assert!(report.pass);
        assert_eq!(report.hits[0], 256);
    }

    #[test]
    fn mixing_confined_orbit_fails() {
        // Fibers share the fixed point at the origin; V disjoint from it.
        let fam = MapFamily::new(vec![
            ("h1".into(), MapKind::Affine(AffineMap::scaling(2, 0.5))),
            ("h2".into(), MapKind::Affine(AffineMap::scaling(2, 0.25))),
        ])
        .unwrap();
        let prod = SkewProduct::from_family(
            &fam,
            Region::Box(BoxRegion::centered(vec![1.0, 1.0])),
            Ball::new(vec![0.0, 0.0], 2.0),
        )
        .unwrap();
        let u = SymbolWord::new(2, vec![0]).unwrap();
        let v = SymbolWord::new(2, vec![1]).unwrap();
        let u_ball = Ball::new(vec![0.0, 0.0], 0.01);
        let v_ball = Ball::new(vec![1.5, 1.5], 0.2);
        let report = mixing_probe(&prod, (&u, &u_ball), (&v, &v_ball), 5, 20, 512, 7).unwrap();
        assert!(!report.pass);
        assert_eq!(report.first_miss, Some(5));
    }

    #[test]
    fn mixing_on_derived_product() {
        let prod = derived_product();
        let u = SymbolWord::new(2, vec![0, 1, 0]).unwrap();
        let v = SymbolWord::new(2, vec![1, 0, 1]).unwrap();
        let u_ball = Ball::new(vec![0.0, 0.0], 0.1);
        let v_ball = Ball::new(vec![0.5, 0.5], 0.1);
        let report =
            mixing_probe(&prod, (&u, &u_ball), (&v, &v_ball), 30, 60, 1 << 14, 11).unwrap();
        assert!(report.pass, "first miss at {:?}", report.first_miss);
    }

    #[test]
    fn symbol_word_parsing() {
        let w = SymbolWord::parse(2, "121").unwrap();
        assert_eq!(w.letters, vec![0, 1, 0]);
        assert_eq!(w.render(), "121");
        assert!(SymbolWord::parse(2, "3").is_err());
    }
}
