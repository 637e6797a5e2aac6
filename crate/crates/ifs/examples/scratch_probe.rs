// Temporary probe for certificate quantities; removed before release.
use ifs::affine::{contracting_family, covering_pieces, AffineParams};
use ifs::geometry::{density_radius, lebesgue_radius, Grid, PointCloud, Region};
use ifs::hutchinson::fixed_point_set;

fn probe(r: f64, psi: f64) {
    let v2 = r * psi;
    let s = 1.0 - v2 * v2;
    let p = match AffineParams::new(2, r, s, 1.01, vec![v2]) {
        Ok(p) => p,
        Err(e) => {
            println!("r={r} psi={psi}: invalid ({e})");
            return;
        }
    };
    let rep = ifs::affine::check_conditions(&p);
    if !rep.all_pass {
        println!("r={r} psi={psi}: conditions fail");
        return;
    }
    let fam = contracting_family(&p);
    let region = Region::Box(p.box_b());
    let grid = Grid::new(region.clone(), 0.01);
    let rho = lebesgue_radius(&covering_pieces(&p), &region, &grid).unwrap();
    let overlap = (1.0 + p.a) * r * v2 - 2.0 * s;
    // density at n = 10, 11, 12 plus worst-gap location at 12
    let mut ds = vec![];
    for n in [10usize, 11, 12] {
        let yn = fixed_point_set(&fam, n).unwrap();
        let d = density_radius(&yn.points, &region, &grid).unwrap();
        ds.push((n, d, yn.points));
    }
    let (_, d12, y12) = &ds[2];
    // worst point
    let mut worst = (0.0, vec![]);
    for gp in grid.points() {
        let mut best = f64::INFINITY;
        for q in y12.iter() {
            let dd = ifs::geometry::dist(&gp, q);
            if dd < best {
                best = dd;
            }
        }
        if best > worst.0 {
            worst = (best, gp);
        }
    }
    let _ = d12;
    let in_count = y12.iter().filter(|q| region.contains(q, 0.0)).count();
    println!(
        "r={r:.2} v2={v2:.4} overlap={overlap:.4} rho={rho:.4} rho/8={:.4} 0.2rho={:.4} | d10={:.4} d11={:.4} d12={:.4} (|Y12 in B|={in_count}) worst@{:?}",
        rho / 8.0,
        0.2 * rho,
        ds[0].1,
        ds[1].1,
        ds[2].1,
        worst.1
    );
    let _ = PointCloud::new(2);
}

fn main() {
    let p = AffineParams::new(2, 0.86, 1.0 - 0.8342f64 * 0.8342, 1.01, vec![0.8342]).unwrap();
    let fam = contracting_family(&p);
    let region = Region::Box(p.box_b());
    let grid = Grid::new(region.clone(), 0.01);
    for n in 13..=16 {
        let t0 = std::time::Instant::now();
        let yn = fixed_point_set(&fam, n).unwrap();
        let d = density_radius(&yn.points, &region, &grid).unwrap();
        println!("n = {n}: |Y_n| = {}, density = {d:.5} ({:?})", yn.points.len(), t0.elapsed());
    }
}
