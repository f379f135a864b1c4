use num_complex::Complex64;
use scatrec::basis::{build_basis, AngularGrid};
use scatrec::forward::*;
use scatrec::grid::SpatialGrid;
use scatrec::preprocess::*;
use std::f64::consts::PI;

fn main() {
    // 1) single-mode projection error vs n_theta
    for nt in [1024usize, 4096, 16384] {
        let angular = AngularGrid::new(nt);
        let basis = build_basis(6, 1024, &angular).unwrap();
        // T-orthonormality defect on row 0
        let mut worst: f64 = 0.0;
        for m in 0..6 {
            let mut acc = 0.0;
            for t in 0..nt {
                acc += angular.weights[t] * basis.psi[0][t] * basis.psi[m][t];
            }
            let target = if m == 0 { 1.0 } else { 0.0 };
            worst = worst.max((acc - target).abs());
        }
        println!("nt={nt}: N=6 row-0 trapezoid defect {worst:.3e}");
    }
    // 2) plane-wave G-trace magnitude at n=48, nt=64
    let grid = SpatialGrid::new(48);
    let angular = AngularGrid::new(64);
    let basis = build_basis(4, 512, &angular).unwrap();
    let k = 2.0 * PI;
    let phantom = make_phantom(PhantomId::Uniform, &grid, 1.0);
    let fields = solve_forward_all(&grid, &phantom, k, &angular).unwrap();
    let data = extract_cauchy(&grid, &grid, &fields, &angular, k);
    let log = compute_log_boundary(&data, &angular).unwrap();
    let traces = compute_traces(&log, &data, &basis, &angular).unwrap();
    let walk = grid.boundary_walk();
    let mut gmax: f64 = 0.0;
    let mut fmax: f64 = 0.0;
    for m in 0..basis.n {
        for (b, node) in walk.iter().enumerate() {
            fmax = fmax.max(traces.f[m][b].norm());
            if !node.is_corner {
                gmax = gmax.max(traces.g[m][b].norm());
            }
        }
    }
    println!("plane-wave n=48 nt=64: max|F| = {fmax:.3e}, max|G| = {gmax:.3e}");
    // 3) band-limited e(8) at a few nt, basis N=12
    for nt in [96usize, 1024, 8192] {
        let n = 12;
        let grid = SpatialGrid::new(n);
        let angular = AngularGrid::new(nt);
        let basis = build_basis(12, 1024, &angular).unwrap();
        let phantom = make_phantom(PhantomId::Uniform, &grid, 1.0);
        let fields = solve_forward_all(&grid, &phantom, 2.0 * PI, &angular).unwrap();
        let mut data = extract_cauchy(&grid, &grid, &fields, &angular, 2.0 * PI);
        let walk = grid.boundary_walk();
        for (b, node) in walk.iter().enumerate() {
            let x = grid.x(node.i);
            for t in 0..nt {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..8 {
                    let amp = Complex64::new(1.0 / (m as f64 + 1.0), 0.2 * x / (m as f64 + 1.0));
                    acc += amp * basis.psi[m][t];
                }
                data.f[b][t] = acc;
            }
        }
        match choose_cutoff(&data, &basis, &angular) {
            Ok(sel) => println!(
                "nt={nt}: selected={} e(7)={:.3e} e(8)={:.3e} e(12)={:.3e}",
                sel.selected, sel.curve[6], sel.curve[7], sel.curve[11]
            ),
            Err(e) => println!("nt={nt}: {e}"),
        }
    }
}
