//! Map representations and family algebra.
//!
//! Affine maps are stored with their exact inverse and singular values so
//! composition, image membership and Lipschitz bounds are exact. Black-box
//! maps carry an evaluator plus an optional Jacobian (central finite
//! differences by default) for C¹ perturbations outside the affine model.

use crate::error::{IfsError, Result};
use crate::geometry::{BoxRegion, Grid, Region};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Invertible affine map `x ↦ A·x + b` with cached inverse and extreme
/// singular values.
#[derive(Debug, Clone)]
pub struct AffineMap {
    dim: usize,
    linear: Vec<f64>,     // row-major
    shift: Vec<f64>,
    linear_inv: Vec<f64>, // row-major
    det: f64,
    sv_min: f64,
    sv_max: f64,
}

impl AffineMap {
    pub fn new(dim: usize, linear: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        if linear.len() != dim * dim || shift.len() != dim {
            return Err(IfsError::InvalidInput("affine map shape mismatch".into()));
        }
        let a = DMatrix::from_row_slice(dim, dim, &linear);
        let det = a.determinant();
        let inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| IfsError::InvalidInput("affine map is singular".into()))?;
        let svd = a.svd(false, false);
        let sv_max = svd.singular_values.max();
        let sv_min = svd.singular_values.min();
        let mut linear_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                linear_inv[i * dim + j] = inv[(i, j)];
            }
        }
        Ok(AffineMap { dim, linear, shift, linear_inv, det, sv_min, sv_max })
    }

    pub fn identity(dim: usize) -> Self {
        let mut linear = vec![0.0; dim * dim];
        for i in 0..dim {
            linear[i * dim + i] = 1.0;
        }
        AffineMap::new(dim, linear, vec![0.0; dim]).unwrap()
    }

    /// Uniform scaling `x ↦ factor·x` (factor ≠ 0).
    pub fn scaling(dim: usize, factor: f64) -> Self {
        let mut linear = vec![0.0; dim * dim];
        for i in 0..dim {
            linear[i * dim + i] = factor;
        }
        AffineMap::new(dim, linear, vec![0.0; dim]).unwrap()
    }

    pub fn translation(shift: Vec<f64>) -> Self {
        let dim = shift.len();
        let mut linear = vec![0.0; dim * dim];
        for i in 0..dim {
            linear[i * dim + i] = 1.0;
        }
        AffineMap::new(dim, linear, shift).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn sv_min(&self) -> f64 {
        self.sv_min
    }

    pub fn sv_max(&self) -> f64 {
        self.sv_max
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.dim;
        for i in 0..m {
            let row = &self.linear[i * m..(i + 1) * m];
            let mut acc = self.shift[i];
            for j in 0..m {
                acc += row[j] * x[j];
            }
            out[i] = acc;
        }
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        let m = self.dim;
        let mut x = vec![0.0; m];
        for i in 0..m {
            let row = &self.linear_inv[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for j in 0..m {
                acc += row[j] * (y[j] - self.shift[j]);
            }
            x[i] = acc;
        }
        x
    }

    /// Exact composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &AffineMap) -> Result<AffineMap> {
        if self.dim != other.dim {
            return Err(IfsError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let m = self.dim;
        let mut linear = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.linear[i * m + k] * other.linear[k * m + j];
                }
                linear[i * m + j] = acc;
            }
        }
        let mut shift = self.shift.clone();
        for i in 0..m {
            for k in 0..m {
                shift[i] += self.linear[i * m + k] * other.shift[k];
            }
        }
        AffineMap::new(m, linear, shift)
    }

    pub fn inverse(&self) -> AffineMap {
        let m = self.dim;
        let mut shift = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                shift[i] -= self.linear_inv[i * m + j] * self.shift[j];
            }
        }
        AffineMap::new(m, self.linear_inv.clone(), shift).expect("inverse of invertible map")
    }

    /// Exact fixed point `(I − A)⁻¹ b`; errors when `I − A` is singular.
    pub fn fixed_point(&self) -> Result<Vec<f64>> {
        let m = self.dim;
        let mut ima = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                ima[(i, j)] = (if i == j { 1.0 } else { 0.0 }) - self.linear[i * m + j];
            }
        }
        let b = DVector::from_column_slice(&self.shift);
        let lu = ima.lu();
        let x = lu
            .solve(&b)
            .ok_or_else(|| IfsError::InvalidInput("I − A singular: no unique fixed point".into()))?;
        Ok(x.as_slice().to_vec())
    }

    /// Axis-aligned bounding box of the image of a box.
    pub fn image_bounding_box(&self, b: &BoxRegion) -> BoxRegion {
        let m = self.dim;
        let mut center = self.apply(&b.center);
        let mut hw = vec![0.0; m];
        for i in 0..m {
            let row = &self.linear[i * m..(i + 1) * m];
            hw[i] = row
                .iter()
                .zip(&b.halfwidths)
                .map(|(a, w)| a.abs() * w)
                .sum();
        }
        BoxRegion::new(std::mem::take(&mut center), hw)
    }
}

/// Differentiable map given by closures; Jacobians default to central
/// finite differences with step 1e-6.
#[derive(Clone)]
pub struct BlackBoxMap {
    dim: usize,
    eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    jacobian: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
    inverse: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
}

impl std::fmt::Debug for BlackBoxMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlackBoxMap").field("dim", &self.dim).finish()
    }
}

const FD_STEP: f64 = 1e-6;

impl BlackBoxMap {
    pub fn new(dim: usize, eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>) -> Self {
        BlackBoxMap { dim, eval, jacobian: None, inverse: None }
    }

    pub fn with_inverse(mut self, inv: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>) -> Self {
        self.inverse = Some(inv);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Option<Vec<f64>> {
        self.inverse.as_ref().map(|f| f(y))
    }

    /// Row-major Jacobian at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        let m = self.dim;
        let mut out = vec![0.0; m * m];
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for j in 0..m {
            xp[j] = x[j] + FD_STEP;
            xm[j] = x[j] - FD_STEP;
            let fp = (self.eval)(&xp);
            let fm = (self.eval)(&xm);
            for i in 0..m {
                out[i * m + j] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
            }
            xp[j] = x[j];
            xm[j] = x[j];
        }
        out
    }
}

/// Either representation of a family member.
#[derive(Debug, Clone)]
pub enum MapKind {
    Affine(AffineMap),
    BlackBox(BlackBoxMap),
}

impl MapKind {
    pub fn dim(&self) -> usize {
        match self {
            MapKind::Affine(a) => a.dim(),
            MapKind::BlackBox(b) => b.dim(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MapKind::Affine(a) => a.apply(x),
            MapKind::BlackBox(b) => b.apply(x),
        }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            MapKind::Affine(a) => a.apply_into(x, out),
            MapKind::BlackBox(b) => out.copy_from_slice(&b.apply(x)),
        }
    }

    pub fn as_affine(&self) -> Option<&AffineMap> {
        match self {
            MapKind::Affine(a) => Some(a),
            MapKind::BlackBox(_) => None,
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MapKind::Affine(a) => a.linear().to_vec(),
            MapKind::BlackBox(b) => b.jacobian(x),
        }
    }
}

/// Ordered finite family of labeled maps of one dimension.
#[derive(Debug, Clone)]
pub struct MapFamily {
    pub members: Vec<(String, MapKind)>,
}

impl MapFamily {
    pub fn new(members: Vec<(String, MapKind)>) -> Result<Self> {
        if members.is_empty() {
            return Err(IfsError::InvalidInput("empty map family".into()));
        }
        let dim = members[0].1.dim();
        for (_, m) in &members {
            if m.dim() != dim {
                return Err(IfsError::DimensionMismatch { expected: dim, got: m.dim() });
            }
        }
        Ok(MapFamily { members })
    }

    pub fn dim(&self) -> usize {
        self.members[0].1.dim()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.members.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn get(&self, label: &str) -> Option<&MapKind> {
        self.members.iter().find(|(l, _)| l == label).map(|(_, m)| m)
    }

    /// All members as affine maps, or an error naming the first black box.
    pub fn affine_members(&self) -> Result<Vec<(&str, &AffineMap)>> {
        self.members
            .iter()
            .map(|(l, m)| {
                m.as_affine()
                    .map(|a| (l.as_str(), a))
                    .ok_or_else(|| IfsError::InvalidInput(format!("member {l} is not affine")))
            })
            .collect()
    }
}

/// `F ∘ G = { f∘g }` with concatenated labels; `|F∘G| = |F|·|G|` and
/// affine∘affine stays exact affine.
pub fn compose_families(f: &MapFamily, g: &MapFamily) -> Result<MapFamily> {
    if f.dim() != g.dim() {
        return Err(IfsError::DimensionMismatch { expected: f.dim(), got: g.dim() });
    }
    let mut members = Vec::with_capacity(f.len() * g.len());
    for (lf, mf) in &f.members {
        for (lg, mg) in &g.members {
            let label = format!("{lf}.{lg}");
            let composed = match (mf, mg) {
                (MapKind::Affine(a), MapKind::Affine(b)) => MapKind::Affine(a.compose(b)?),
                _ => {
                    let mf = mf.clone();
                    let mg = mg.clone();
                    MapKind::BlackBox(BlackBoxMap::new(
                        f.dim(),
                        Arc::new(move |x: &[f64]| mf.apply(&mg.apply(x))),
                    ))
                }
            };
            members.push((label, composed));
        }
    }
    MapFamily::new(members)
}

/// Bi-Lipschitz constants measured as extreme singular values of Jacobians
/// over domain samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzBounds {
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
    /// Sample point witnessing a (near-)singular Jacobian, if any.
    pub singular_witness: Option<Vec<f64>>,
}

/// Estimate bi-Lipschitz constants of `f` on `domain`.
///
/// For affine maps the Jacobian is constant so a single exact sample is
/// taken; black boxes are sampled on a lattice of about `n_samples` points.
pub fn lipschitz_bounds(f: &MapKind, domain: &Region, n_samples: usize) -> LipschitzBounds {
    match f {
        MapKind::Affine(a) => LipschitzBounds {
            lower: a.sv_min(),
            upper: a.sv_max(),
            samples: 1,
            singular_witness: None,
        },
        MapKind::BlackBox(b) => {
            let m = domain.dim();
            let per_axis = (n_samples as f64).powf(1.0 / m as f64).ceil().max(2.0);
            let bb = domain.bounding_box();
            let h = bb
                .halfwidths
                .iter()
                .map(|w| 2.0 * w / (per_axis - 1.0))
                .fold(f64::INFINITY, f64::min)
                .max(1e-9);
            let grid = Grid::new(domain.clone(), h);
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            let mut witness = None;
            let mut count = 0;
            for i in 0..grid.raw_len() {
                let p = grid.decode(i);
                if !grid.in_region(&p) {
                    continue;
                }
                count += 1;
                let jac = b.jacobian(&p);
                let mat = DMatrix::from_row_slice(m, m, &jac);
                let svd = mat.svd(false, false);
                let smin = svd.singular_values.min();
                let smax = svd.singular_values.max();
                if smin <= 1e-14 && witness.is_none() {
                    witness = Some(p.clone());
                }
                lo = lo.min(smin);
                hi = hi.max(smax);
            }
            LipschitzBounds { lower: lo, upper: hi, samples: count, singular_witness: witness }
        }
    }
}

/// Check the weak-hyperbolicity inequalities for a block-diagonal matrix
/// split into a `dim_s×dim_s` and a `dim_u×dim_u` block:
/// `1−δ < m(A_s) ≤ ‖A_s‖ < 1 < m(A_u) ≤ ‖A_u‖ < 1/(1−δ)`.
pub fn weak_hyperbolicity(a: &[f64], dim: usize, split: (usize, usize), delta: f64) -> Result<bool> {
    let (ds, du) = split;
    if ds + du != dim || a.len() != dim * dim {
        return Err(IfsError::InvalidInput("bad split or matrix shape".into()));
    }
    if !(0.0..1.0).contains(&delta) || delta <= 0.0 {
        return Err(IfsError::InvalidInput("delta must lie in (0,1)".into()));
    }
    // Invariant splittings are not computed; demand an explicit block form.
    for i in 0..dim {
        for j in 0..dim {
            let in_s = i < ds && j < ds;
            let in_u = i >= ds && j >= ds;
            if !in_s && !in_u && a[i * dim + j].abs() > 1e-12 {
                return Err(IfsError::InvalidInput(
                    "matrix is not block-diagonal for the given split".into(),
                ));
            }
        }
    }
    let block = |r0: usize, n: usize| -> (f64, f64) {
        if n == 0 {
            return (f64::INFINITY, 0.0);
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = a[(r0 + i) * dim + (r0 + j)];
            }
        }
        let svd = m.svd(false, false);
        (svd.singular_values.min(), svd.singular_values.max())
    };
    let (ms, ns) = block(0, ds);
    let (mu, nu) = block(ds, du);
    Ok(1.0 - delta < ms && ns < 1.0 && 1.0 < mu && nu < 1.0 / (1.0 - delta))
}

/// Perturbation models for `perturb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbModel {
    /// Perturb linear entries by U[−ε/(2m), ε/(2m)] and the shift by
    /// U[−ε/2, ε/2]. On a working box with ‖x‖∞ ≤ 1 the sup-norm deviation
    /// is at most ε in ℓ∞. Affine maps stay affine.
    Affine,
    /// Add one smooth compactly supported bump of C¹ size at most ε.
    Bump,
}

const PERTURB_RESAMPLE_LIMIT: usize = 100;

/// Seeded ε-perturbation of a map. Deterministic in `seed`: two calls with
/// the same arguments return maps with bitwise-equal evaluations.
pub fn perturb(f: &MapKind, eps: f64, model: PerturbModel, seed: u64) -> Result<MapKind> {
    if eps < 0.0 {
        return Err(IfsError::InvalidInput("eps must be nonnegative".into()));
    }
    if eps == 0.0 {
        return Ok(f.clone());
    }
    let m = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match model {
        PerturbModel::Affine => {
            let base = f
                .as_affine()
                .ok_or_else(|| IfsError::InvalidInput("affine model needs an affine map".into()))?;
            let entry = eps / (2.0 * m as f64);
            for attempt in 0..PERTURB_RESAMPLE_LIMIT {
                let mut linear = base.linear().to_vec();
                for v in linear.iter_mut() {
                    *v += rng.gen_range(-entry..=entry);
                }
                let mut shift = base.shift().to_vec();
                for v in shift.iter_mut() {
                    *v += rng.gen_range(-eps / 2.0..=eps / 2.0);
                }
                match AffineMap::new(m, linear, shift) {
                    Ok(a) if a.det().abs() > 1e-12 => return Ok(MapKind::Affine(a)),
                    _ => {
                        let _ = attempt;
                        continue;
                    }
                }
            }
            Err(IfsError::SingularPerturbation { attempts: PERTURB_RESAMPLE_LIMIT })
        }
        PerturbModel::Bump => {
            let center: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..=0.5)).collect();
            let dir_raw: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let norm = dir_raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            // φ(t) = (1−t²)² on |t|<1 has max|φ'| < 1.6, so C¹ size ≤ ε.
            let amp = eps / 1.6;
            let dir: Vec<f64> = dir_raw.iter().map(|v| amp * v / norm).collect();
            let radius = 1.0;
            let base = f.clone();
            let eval = move |x: &[f64]| -> Vec<f64> {
                let mut y = base.apply(x);
                let t2: f64 = x
                    .iter()
                    .zip(&center)
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum::<f64>()
                    / (radius * radius);
                if t2 < 1.0 {
                    let phi = (1.0 - t2) * (1.0 - t2);
                    for (yi, di) in y.iter_mut().zip(&dir) {
                        *yi += phi * di;
                    }
                }
                y
            };
            Ok(MapKind::BlackBox(BlackBoxMap::new(m, Arc::new(eval))))
        }
    }
}

/// Lazily realized sequence of per-step ε-perturbed families
/// `F = (F_1, F_2, ...)`, deterministic in (step, seed).
#[derive(Debug, Clone)]
pub struct FamilySequence {
    pub base: MapFamily,
    pub eps: f64,
    pub model: PerturbModel,
    pub seed: u64,
    /// Declared working domain for all ε-closeness statements.
    pub working_domain: Region,
}

impl FamilySequence {
    pub fn unperturbed(base: MapFamily, working_domain: Region) -> Self {
        FamilySequence { base, eps: 0.0, model: PerturbModel::Affine, seed: 0, working_domain }
    }

    pub fn perturbed(
        base: MapFamily,
        working_domain: Region,
        eps: f64,
        model: PerturbModel,
        seed: u64,
    ) -> Self {
        FamilySequence { base, eps, model, seed, working_domain }
    }

    /// The family used at step `step` (1-based, matching branch indices).
    pub fn family_at(&self, step: usize) -> MapFamily {
        if self.eps == 0.0 {
            return self.base.clone();
        }
        let members = self
            .base
            .members
            .iter()
            .enumerate()
            .map(|(idx, (label, map))| {
                let seed = derive_seed(self.seed, step as u64, idx as u64);
                let p = perturb(map, self.eps, self.model, seed)
                    .expect("perturbation failed; eps too large for resampling");
                (label.clone(), p)
            })
            .collect();
        MapFamily::new(members).expect("base family nonempty")
    }
}

/// SplitMix64-style mixing for per-(step, member) seeds.
fn derive_seed(seed: u64, step: u64, member: u64) -> u64 {
    let mut z = seed
        .wrapping_add(step.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(member.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Serialization schema for map/family description files.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapRecord {
    pub label: String,
    pub kind: String,
    /// Row-major linear part.
    pub matrix: Vec<f64>,
    pub shift: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub dim: usize,
    pub maps: Vec<MapRecord>,
}

impl FamilyRecord {
    pub fn from_family(fam: &MapFamily) -> Result<Self> {
        let maps = fam
            .affine_members()?
            .into_iter()
            .map(|(label, a)| MapRecord {
                label: label.to_string(),
                kind: "affine".to_string(),
                matrix: a.linear().to_vec(),
                shift: a.shift().to_vec(),
            })
            .collect();
        Ok(FamilyRecord { dim: fam.dim(), maps })
    }

    pub fn to_family(&self) -> Result<MapFamily> {
        let members = self
            .maps
            .iter()
            .map(|r| {
                if r.kind != "affine" {
                    return Err(IfsError::InvalidInput(format!(
                        "unsupported map kind in file: {}",
                        r.kind
                    )));
                }
                Ok((
                    r.label.clone(),
                    MapKind::Affine(AffineMap::new(self.dim, r.matrix.clone(), r.shift.clone())?),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        MapFamily::new(members)
    }
}
