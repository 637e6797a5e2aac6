//! Euclidean primitives: balls, boxes, grids, point clouds, Hausdorff
//! distance and grid-based covering oracles.
//!
//! All region oracles are grid-based with an explicit spacing `h`; every
//! boolean answer is only valid up to that resolution, so results carry the
//! spacing they were computed with. Membership in an affine image f(B) is
//! always decided exactly through f⁻¹, never by sampling the image.

use crate::error::{IfsError, Result};
use crate::maps::AffineMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Euclidean distance between two points given as coordinate slices.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Closed ball `B_r(c)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        assert!(center.iter().all(|x| x.is_finite()));
        Ball { center, radius }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64], erosion: f64) -> bool {
        dist(x, &self.center) <= self.radius - erosion
    }
}

/// Axis-aligned box with the given center and positive halfwidths.
///
/// The construction's box `B` has first halfwidth 1 by convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxRegion {
    pub center: Vec<f64>,
    pub halfwidths: Vec<f64>,
}

impl BoxRegion {
    pub fn new(center: Vec<f64>, halfwidths: Vec<f64>) -> Self {
        assert_eq!(center.len(), halfwidths.len());
        assert!(halfwidths.iter().all(|w| *w > 0.0 && w.is_finite()));
        BoxRegion { center, halfwidths }
    }

    /// Origin-centered box, the paper's `B(1, v_2, ..., v_m)` shape.
    pub fn centered(halfwidths: Vec<f64>) -> Self {
        let center = vec![0.0; halfwidths.len()];
        Self::new(center, halfwidths)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64], erosion: f64) -> bool {
        x.iter()
            .zip(&self.center)
            .zip(&self.halfwidths)
            .all(|((xi, ci), wi)| (xi - ci).abs() <= wi - erosion)
    }

    /// Signed distance from `x` to the boundary along the tightest axis
    /// (positive inside).
    pub fn depth(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .zip(&self.halfwidths)
            .map(|((xi, ci), wi)| wi - (xi - ci).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        (0..1usize << m)
            .map(|mask| {
                (0..m)
                    .map(|i| {
                        let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                        self.center[i] + s * self.halfwidths[i]
                    })
                    .collect()
            })
            .collect()
    }
}

/// A bounded region: box or ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Region {
    Box(BoxRegion),
    Ball(Ball),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Box(b) => b.dim(),
            Region::Ball(b) => b.dim(),
        }
    }

    pub fn contains(&self, x: &[f64], erosion: f64) -> bool {
        match self {
            Region::Box(b) => b.contains(x, erosion),
            Region::Ball(b) => b.contains(x, erosion),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Region::Box(b) => 2.0 * b.halfwidths.iter().map(|w| w * w).sum::<f64>().sqrt(),
            Region::Ball(b) => 2.0 * b.radius,
        }
    }

    /// Bounding box as (center, halfwidths).
    pub fn bounding_box(&self) -> BoxRegion {
        match self {
            Region::Box(b) => b.clone(),
            Region::Ball(b) => {
                BoxRegion::new(b.center.clone(), vec![b.radius; b.center.len()])
            }
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Region::Box(b) => &b.center,
            Region::Ball(b) => &b.center,
        }
    }
}

/// Endpoint-inclusive lattice over a region with spacing at most `h` per
/// axis, so every point of the region is within `h·√m/2` of a grid point.
///
/// Points are enumerated lazily in row-major (lexicographic) order.
#[derive(Debug, Clone)]
pub struct Grid {
    pub region: Region,
    pub h: f64,
    lo: Vec<f64>,
    step: Vec<f64>,
    counts: Vec<usize>,
}

impl Grid {
    pub fn new(region: Region, h: f64) -> Self {
        assert!(h > 0.0);
        let bb = region.bounding_box();
        let m = bb.dim();
        let mut lo = Vec::with_capacity(m);
        let mut step = Vec::with_capacity(m);
        let mut counts = Vec::with_capacity(m);
        for i in 0..m {
            let lo_i = bb.center[i] - bb.halfwidths[i];
            let span = 2.0 * bb.halfwidths[i];
            let n = (span / h).ceil().max(1.0) as usize;
            lo.push(lo_i);
            step.push(span / n as f64);
            counts.push(n + 1);
        }
        Grid { region, h, lo, step, counts }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Total lattice points of the bounding box (region filtering happens
    /// per point).
    pub fn raw_len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn decode(&self, mut idx: usize) -> Vec<f64> {
        let m = self.dim();
        let mut p = vec![0.0; m];
        for i in (0..m).rev() {
            let c = self.counts[i];
            p[i] = self.lo[i] + self.step[i] * (idx % c) as f64;
            idx /= c;
        }
        p
    }

    pub fn in_region(&self, p: &[f64]) -> bool {
        // The lattice is built on the bounding box; boxes keep every lattice
        // point, balls are filtered by membership (closure).
        match &self.region {
            Region::Box(_) => true,
            Region::Ball(b) => dist(p, &b.center) <= b.radius + 1e-12,
        }
    }

    /// Region points of the lattice, materialized. Only suitable for small
    /// grids; large scans should iterate over indices instead.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.raw_len())
            .filter_map(|i| {
                let p = self.decode(i);
                if self.in_region(&p) {
                    Some(p)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Finite multiset of points of equal dimension, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        PointCloud { dim, data: Vec::new() }
    }

    pub fn from_points(dim: usize, pts: impl IntoIterator<Item = Vec<f64>>) -> Self {
        let mut c = PointCloud::new(dim);
        for p in pts {
            c.push(&p);
        }
        c
    }

    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.dim);
        self.data.extend_from_slice(p);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Scale every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> PointCloud {
        PointCloud { dim: self.dim, data: self.data.iter().map(|x| x * factor).collect() }
    }

    /// Write as CSV with header x1..xm, one point per row, 17 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in self.iter() {
            let row: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<PointCloud> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| IfsError::InvalidInput("empty CSV".into()))??;
        let dim = header.split(',').count();
        let mut cloud = PointCloud::new(dim);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let p = p.map_err(|e| IfsError::InvalidInput(format!("bad CSV row: {e}")))?;
            if p.len() != dim {
                return Err(IfsError::DimensionMismatch { expected: dim, got: p.len() });
            }
            cloud.push(&p);
        }
        Ok(cloud)
    }
}

/// Uniform-bucket nearest-neighbor index over a point cloud.
///
/// Cells are cubes of side `cell`; queries expand over cell shells until the
/// best distance certifies.
pub struct NnIndex<'a> {
    cloud: &'a PointCloud,
    cell: f64,
    lo: Vec<f64>,
    counts: Vec<i64>,
    buckets: std::collections::HashMap<Vec<i64>, Vec<u32>>,
}

impl<'a> NnIndex<'a> {
    pub fn build(cloud: &'a PointCloud, cell: f64) -> Self {
        assert!(!cloud.is_empty());
        let m = cloud.dim();
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for p in cloud.iter() {
            for i in 0..m {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let counts: Vec<i64> = (0..m)
            .map(|i| (((hi[i] - lo[i]) / cell).floor() as i64) + 1)
            .collect();
        let mut buckets: std::collections::HashMap<Vec<i64>, Vec<u32>> =
            std::collections::HashMap::new();
        for (idx, p) in cloud.iter().enumerate() {
            let key: Vec<i64> = (0..m).map(|i| ((p[i] - lo[i]) / cell).floor() as i64).collect();
            buckets.entry(key).or_default().push(idx as u32);
        }
        NnIndex { cloud, cell, lo, counts, buckets }
    }

    /// Distance from `x` to the nearest cloud point.
    pub fn nearest_dist(&self, x: &[f64]) -> f64 {
        let m = self.cloud.dim();
        // Clamp the query key into the occupied range; for queries outside
        // the indexed bounding box the shell bound still certifies because
        // distances only grow past the box projection.
        let key: Vec<i64> = (0..m)
            .map(|i| {
                let k = ((x[i] - self.lo[i]) / self.cell).floor() as i64;
                k.clamp(0, self.counts[i] - 1)
            })
            .collect();
        let mut best = f64::INFINITY;
        let max_shell: i64 = self
            .counts
            .iter()
            .max()
            .copied()
            .unwrap_or(1)
            .max(2);
        for shell in 0..=max_shell {
            // Once a hit exists, a further shell cannot improve past the
            // certified bound.
            if best.is_finite() && best <= (shell as f64 - 1.0).max(0.0) * self.cell {
                break;
            }
            self.visit_shell(&key, shell, &mut |bucket| {
                for &idx in bucket {
                    let d = dist(x, self.cloud.point(idx as usize));
                    if d < best {
                        best = d;
                    }
                }
            });
        }
        best
    }

    fn visit_shell(&self, key: &[i64], shell: i64, f: &mut impl FnMut(&Vec<u32>)) {
        let m = key.len();
        let mut offs = vec![-shell; m];
        'outer: loop {
            if offs.iter().any(|o| o.abs() == shell) || shell == 0 {
                let cell: Vec<i64> = key.iter().zip(&offs).map(|(k, o)| k + o).collect();
                if cell.iter().zip(&self.counts).all(|(c, n)| *c >= 0 && c < n) {
                    if let Some(bucket) = self.buckets.get(&cell) {
                        f(bucket);
                    }
                }
            }
            for i in 0..m {
                offs[i] += 1;
                if offs[i] <= shell {
                    continue 'outer;
                }
                offs[i] = -shell;
            }
            break;
        }
    }
}

/// Hausdorff distance between nonempty point clouds of equal dimension.
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(IfsError::InvalidInput("hausdorff: empty cloud".into()));
    }
    if a.dim() != b.dim() {
        return Err(IfsError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

fn directed_hausdorff(from: &PointCloud, to: &PointCloud) -> f64 {
    // Cell size tuned to the target cloud's spread.
    let cell = nn_cell_size(to);
    let index = NnIndex::build(to, cell);
    (0..from.len())
        .into_par_iter()
        .map(|i| index.nearest_dist(from.point(i)))
        .reduce(|| 0.0, f64::max)
}

fn nn_cell_size(cloud: &PointCloud) -> f64 {
    let m = cloud.dim();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in cloud.iter() {
        for i in 0..m {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let span = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| h - l)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    // Aim for O(1) points per cell.
    let per_axis = (cloud.len() as f64).powf(1.0 / m as f64).max(1.0);
    span / per_axis
}

/// One element of a covering: a membership test for an open piece.
#[derive(Clone)]
pub enum CoverPiece {
    /// The whole space.
    All,
    /// Open half-space `normal·x < offset`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// Open affine image `f(domain)`; membership decided exactly via f⁻¹.
    AffineImage { map: AffineMap, domain: Region },
    /// Open ball.
    Ball(Ball),
}

impl CoverPiece {
    /// Membership with an erosion margin: `erosion > 0` asks for containment
    /// at depth `erosion` inside the piece (used for perturbation margins).
    pub fn contains(&self, x: &[f64], erosion: f64) -> bool {
        match self {
            CoverPiece::All => true,
            CoverPiece::HalfSpace { normal, offset } => {
                let v: f64 = normal.iter().zip(x).map(|(n, xi)| n * xi).sum();
                v < offset - erosion
            }
            CoverPiece::AffineImage { map, domain } => {
                // x ∈ f(D) at depth e  ⇐  f⁻¹(x) ∈ D at depth e/λ_f.
                let pre = map.apply_inverse(x);
                let margin = if erosion > 0.0 { erosion / map.sv_min() } else { 0.0 };
                domain.contains(&pre, margin) && domain.contains(&pre, 0.0)
            }
            CoverPiece::Ball(b) => dist(x, &b.center) < b.radius - erosion,
        }
    }
}

/// Result of a grid covering test.
#[derive(Debug, Clone)]
pub struct CoverReport {
    pub pass: bool,
    pub h: f64,
    /// Exact number of uncovered grid points.
    pub uncovered: usize,
    /// Uncovered grid points in lattice (lexicographic) order, capped.
    pub witnesses: Vec<Vec<f64>>,
}

/// Check that every grid point of `region` lies in at least one piece.
pub fn covering_test(region: &Region, pieces: &[CoverPiece], grid: &Grid) -> CoverReport {
    covering_test_eroded(region, pieces, grid, 0.0)
}

/// Cap on stored witnesses; the total count is always exact.
const WITNESS_CAP: usize = 1 << 20;

/// Covering test demanding membership at depth `erosion` inside some piece.
pub fn covering_test_eroded(
    region: &Region,
    pieces: &[CoverPiece],
    grid: &Grid,
    erosion: f64,
) -> CoverReport {
    assert_eq!(region.dim(), grid.dim());
    let n = grid.raw_len();
    let covered = |i: usize| -> bool {
        let p = grid.decode(i);
        !grid.in_region(&p)
            || !region.contains(&p, 0.0)
            || pieces.iter().any(|piece| piece.contains(&p, erosion))
    };
    // Fast path allocates nothing; witnesses are collected only on failure,
    // sequentially so their order stays lexicographic.
    if (0..n).into_par_iter().all(covered) {
        return CoverReport { pass: true, h: grid.h, uncovered: 0, witnesses: Vec::new() };
    }
    let mut witnesses = Vec::new();
    let mut uncovered = 0usize;
    for i in 0..n {
        if !covered(i) {
            uncovered += 1;
            if witnesses.len() < WITNESS_CAP {
                witnesses.push(grid.decode(i));
            }
        }
    }
    CoverReport { pass: false, h: grid.h, uncovered, witnesses }
}

/// Geometric schedule for the Lebesgue radius search. The ratio 2^(1/4)
/// keeps the quantization loss below 19% while still terminating quickly.
const LEBESGUE_RATIO: f64 = 1.189207115002721; // 2^(1/4)
const LEBESGUE_STEPS: usize = 160;

/// Largest scheduled radius ρ such that around every grid point x of the
/// region, `B_ρ(x) ∩ region` lies inside a single piece.
///
/// The certificate's δ is chosen as a fixed fraction of ρ by the caller.
pub fn lebesgue_radius(
    cover: &[CoverPiece],
    region: &Region,
    grid: &Grid,
) -> Result<f64> {
    lebesgue_radius_eroded(cover, region, grid, 0.0)
}

/// Lebesgue radius with pieces eroded by `erosion` (perturbation margin).
pub fn lebesgue_radius_eroded(
    cover: &[CoverPiece],
    region: &Region,
    grid: &Grid,
    erosion: f64,
) -> Result<f64> {
    let pre = covering_test_eroded(region, cover, grid, erosion);
    if !pre.pass {
        return Err(IfsError::CoveringFailed {
            uncovered: pre.uncovered,
            witnesses: pre.witnesses.into_iter().take(8).collect(),
        });
    }
    assert!(cover.len() <= 64, "covers of more than 64 pieces are not supported");
    assert!(
        grid.raw_len() <= 50_000_000,
        "lebesgue_radius grid too large to hold piece masks"
    );

    // Bitmask of piece membership per lattice point (0 for out-of-region).
    let n = grid.raw_len();
    let masks: Vec<u64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = grid.decode(i);
            if !grid.in_region(&p) || !region.contains(&p, 0.0) {
                return 0u64;
            }
            let mut m = 0u64;
            for (j, piece) in cover.iter().enumerate() {
                if piece.contains(&p, erosion) {
                    m |= 1 << j;
                }
            }
            m
        })
        .collect();

    let diam = region.diameter();
    // Descend the schedule; a single failing center disqualifies a level,
    // so each level is first probed on a strided sample before paying for
    // the full scan.
    for j in 0..=LEBESGUE_STEPS {
        let rho = diam / LEBESGUE_RATIO.powi(j as i32);
        let offsets = OffsetTable::build(grid, rho);
        let n = grid.raw_len();
        let sample_stride = (n / 199).max(1);
        let sample_ok = (0..n)
            .step_by(sample_stride)
            .all(|i| lebesgue_center_ok(grid, &masks, &offsets, i));
        if !sample_ok {
            continue;
        }
        if (0..n)
            .into_par_iter()
            .all(|i| lebesgue_center_ok(grid, &masks, &offsets, i))
        {
            return Ok(rho);
        }
    }
    Ok(0.0)
}

const LEBESGUE_MAX_DIM: usize = 8;

/// Lattice offsets within Euclidean distance rho, stored flat.
struct OffsetTable {
    deltas: Vec<[i64; LEBESGUE_MAX_DIM]>,
    flats: Vec<i64>,
    strides: [i64; LEBESGUE_MAX_DIM],
    dim: usize,
}

impl OffsetTable {
    fn build(grid: &Grid, rho: f64) -> Self {
        let m = grid.dim();
        assert!(m <= LEBESGUE_MAX_DIM);
        let mut strides = [0i64; LEBESGUE_MAX_DIM];
        strides[m - 1] = 1;
        for i in (0..m - 1).rev() {
            strides[i] = strides[i + 1] * grid.counts[i + 1] as i64;
        }
        let reach: Vec<i64> = (0..m).map(|i| (rho / grid.step[i]).floor() as i64).collect();
        let mut table = OffsetTable { deltas: Vec::new(), flats: Vec::new(), strides, dim: m };
        let mut cur = [0i64; LEBESGUE_MAX_DIM];
        table.fill(grid, rho, &reach, 0, &mut cur);
        table
    }

    fn fill(&mut self, grid: &Grid, rho: f64, reach: &[i64], d: usize, cur: &mut [i64; LEBESGUE_MAX_DIM]) {
        if d == self.dim {
            let r2: f64 = (0..self.dim)
                .map(|i| {
                    let v = cur[i] as f64 * grid.step[i];
                    v * v
                })
                .sum();
            if r2 <= rho * rho {
                let flat: i64 = (0..self.dim).map(|i| cur[i] * self.strides[i]).sum();
                self.deltas.push(*cur);
                self.flats.push(flat);
            }
            return;
        }
        for o in -reach[d]..=reach[d] {
            cur[d] = o;
            self.fill(grid, rho, reach, d + 1, cur);
        }
        cur[d] = 0;
    }
}

fn lebesgue_center_ok(grid: &Grid, masks: &[u64], offsets: &OffsetTable, i: usize) -> bool {
    if masks[i] == 0 {
        return true; // not a region point
    }
    let m = offsets.dim;
    let mut idx = [0i64; LEBESGUE_MAX_DIM];
    let mut rem = i as i64;
    for d in 0..m {
        idx[d] = rem / offsets.strides[d];
        rem %= offsets.strides[d];
    }
    let mut acc = u64::MAX;
    for (off, flat) in offsets.deltas.iter().zip(&offsets.flats) {
        let mut inside = true;
        for d in 0..m {
            let v = idx[d] + off[d];
            if v < 0 || v >= grid.counts[d] as i64 {
                inside = false;
                break;
            }
        }
        if !inside {
            continue; // outside bounding box ⇒ outside region ⇒ clipped
        }
        let j = (i as i64 + flat) as usize;
        if masks[j] == 0 {
            continue; // outside region: the ball is clipped there
        }
        acc &= masks[j];
        if acc == 0 {
            return false;
        }
    }
    acc != 0
}

/// Max over grid points of the region of the distance to the cloud `s`, i.e.
/// `s` is (returned value)-dense in the region up to the grid resolution.
pub fn density_radius(s: &PointCloud, region: &Region, grid: &Grid) -> Result<f64> {
    if s.is_empty() {
        return Err(IfsError::InvalidInput("density_radius: empty cloud".into()));
    }
    if s.dim() != region.dim() {
        return Err(IfsError::DimensionMismatch { expected: region.dim(), got: s.dim() });
    }
    let cell = nn_cell_size(s);
    let index = NnIndex::build(s, cell);
    let d = (0..grid.raw_len())
        .into_par_iter()
        .map(|i| {
            let p = grid.decode(i);
            if grid.in_region(&p) && region.contains(&p, 0.0) {
                index.nearest_dist(&p)
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[&[f64]]) -> PointCloud {
        PointCloud::from_points(pts[0].len(), pts.iter().map(|p| p.to_vec()))
    }

    #[test]
    fn hausdorff_identical_sets_is_zero() {
        let a = cloud(&[&[0.0, 0.0]]);
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn hausdorff_single_pair() {
        let a = cloud(&[&[0.0, 0.0]]);
        let b = cloud(&[&[3.0, 4.0]]);
        assert!((hausdorff_distance(&a, &b).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn hausdorff_directed_sup() {
        // Enumerating both directed sups by hand: sup_a d(a,B) = 1, sup_b d(b,A) = 0.
        let a = cloud(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = cloud(&[&[0.0, 0.0]]);
        assert!((hausdorff_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hausdorff_dimension_mismatch() {
        let a = cloud(&[&[0.0, 0.0]]);
        let b = cloud(&[&[0.0, 0.0, 0.0]]);
        assert!(hausdorff_distance(&a, &b).is_err());
    }

    #[test]
    fn hausdorff_is_pseudometric_on_random_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut mk = |n: usize| {
                let mut c = PointCloud::new(2);
                for _ in 0..n {
                    c.push(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                }
                c
            };
            let (a, b, c) = (mk(12), mk(9), mk(15));
            let ab = hausdorff_distance(&a, &b).unwrap();
            let ba = hausdorff_distance(&b, &a).unwrap();
            let bc = hausdorff_distance(&b, &c).unwrap();
            let ac = hausdorff_distance(&a, &c).unwrap();
            assert!((ab - ba).abs() <= 1e-12);
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn covering_with_universal_piece() {
        let region = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let grid = Grid::new(region.clone(), 0.1);
        let report = covering_test(&region, &[CoverPiece::All], &grid);
        assert!(report.pass);
    }

    #[test]
    fn covering_with_region_itself_is_true() {
        let region = Region::Box(BoxRegion::centered(vec![1.0, 0.5]));
        let grid = Grid::new(region.clone(), 0.05);
        let piece = CoverPiece::AffineImage {
            map: AffineMap::identity(2),
            domain: region.clone(),
        };
        // Identity image of the closed region covers its own grid points.
        let report = covering_test(&region, &[piece], &grid);
        assert!(report.pass);
    }

    #[test]
    fn covering_failure_returns_witnesses() {
        let region = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let grid = Grid::new(region.clone(), 0.5);
        let left_half = CoverPiece::HalfSpace { normal: vec![1.0, 0.0], offset: 0.0 };
        let report = covering_test(&region, &[left_half], &grid);
        assert!(!report.pass);
        assert!(report.witnesses.iter().any(|w| w == &vec![1.0, 0.0]));
    }

    #[test]
    fn covering_empty_pieces_fails_with_all_points() {
        let region = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let grid = Grid::new(region.clone(), 1.0);
        let report = covering_test(&region, &[], &grid);
        assert!(!report.pass);
        assert_eq!(report.witnesses.len(), 9);
    }

    #[test]
    fn lebesgue_whole_plane_returns_diameter() {
        let region = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let grid = Grid::new(region.clone(), 0.1);
        let rho = lebesgue_radius(&[CoverPiece::All], &region, &grid).unwrap();
        assert!((rho - region.diameter()).abs() < 1e-12);
    }

    #[test]
    fn lebesgue_two_half_planes_overlap_slab() {
        // Pieces x1 < 0.3 and x1 > -0.3 overlap in a slab of width 0.6; the
        // true Lebesgue radius is 0.3 and the schedule returns the largest
        // scheduled value below it.
        let region = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let grid = Grid::new(region.clone(), 0.02);
        let pieces = [
            CoverPiece::HalfSpace { normal: vec![1.0, 0.0], offset: 0.3 },
            CoverPiece::HalfSpace { normal: vec![-1.0, 0.0], offset: 0.3 },
        ];
        let rho = lebesgue_radius(&pieces, &region, &grid).unwrap();
        assert!(rho <= 0.3 + 1e-9, "rho = {rho} exceeds the slab half-width");
        assert!(rho >= 0.3 / 1.19 * 0.9, "rho = {rho} lost more than schedule+grid slack");
    }

    #[test]
    fn lebesgue_requires_covering() {
        let region = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let grid = Grid::new(region.clone(), 0.25);
        let err = lebesgue_radius(
            &[CoverPiece::HalfSpace { normal: vec![1.0, 0.0], offset: 0.0 }],
            &region,
            &grid,
        );
        assert!(matches!(err, Err(IfsError::CoveringFailed { .. })));
    }

    #[test]
    fn lebesgue_monotone_in_pieces() {
        let region = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let grid = Grid::new(region.clone(), 0.05);
        let a = CoverPiece::HalfSpace { normal: vec![1.0, 0.0], offset: 0.2 };
        let b = CoverPiece::HalfSpace { normal: vec![-1.0, 0.0], offset: 0.2 };
        let c = CoverPiece::Ball(Ball::new(vec![0.0, 0.0], 1.0));
        let rho2 = lebesgue_radius(&[a.clone(), b.clone()], &region, &grid).unwrap();
        let rho3 = lebesgue_radius(&[a, b, c], &region, &grid).unwrap();
        assert!(rho3 >= rho2 - 1e-12);
    }

    #[test]
    fn density_of_grid_points_is_below_grid_resolution() {
        let region = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let grid = Grid::new(region.clone(), 0.1);
        let s = PointCloud::from_points(2, grid.points());
        let d = density_radius(&s, &region, &grid).unwrap();
        assert!(d <= 0.1 * 2f64.sqrt() / 2.0 + 1e-12);
    }

    #[test]
    fn density_of_disk_center() {
        let region = Region::Ball(Ball::new(vec![0.0, 0.0], 1.0));
        let grid = Grid::new(region.clone(), 0.01);
        let s = cloud(&[&[0.0, 0.0]]);
        let d = density_radius(&s, &region, &grid).unwrap();
        assert!((d - 1.0).abs() <= 0.02);
    }

    #[test]
    fn density_shrinks_under_union() {
        let region = Region::Box(BoxRegion::centered(vec![1.0, 1.0]));
        let grid = Grid::new(region.clone(), 0.05);
        let s = cloud(&[&[0.5, 0.5]]);
        let mut s2 = s.clone();
        s2.push(&[-0.5, -0.5]);
        let d1 = density_radius(&s, &region, &grid).unwrap();
        let d2 = density_radius(&s2, &region, &grid).unwrap();
        assert!(d2 <= d1 + 1e-12);
    }

    #[test]
    fn csv_roundtrip_is_lossless() {
        let mut c = PointCloud::new(2);
        c.push(&[std::f64::consts::PI, -1.0 / 3.0]);
        c.push(&[1e-17, 2.5e300]);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = PointCloud::read_csv(&buf[..]).unwrap();
        assert_eq!(c, back);
    }
}
