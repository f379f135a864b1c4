//! From measured Cauchy pairs to the Fourier-side boundary traces F_m, G_m,
//! plus the data-driven truncation cutoff e(N).

use crate::basis::{AngularGrid, BasisSet};
use crate::error::{Error, Result};
use crate::exec;
use crate::forward::BoundaryDataset;
use num_complex::Complex64;

/// v(x, θ) = (1/k²) log(u / u_inc) on ∂Ω × Θ.
#[derive(Clone, Debug)]
pub struct LogBoundaryField {
    /// `[node][angle]`, on the dataset's boundary walk.
    pub v_boundary: Vec<Vec<Complex64>>,
    pub unwrap_applied: bool,
}

/// Boundary traces of the Fourier components: F_m = v_m|∂Ω and
/// G_m = ∂_ν v_m|∂Ω. Corner entries of `g` are unset.
#[derive(Clone, Debug)]
pub struct FourierTraces {
    pub f: Vec<Vec<Complex64>>,
    pub g: Vec<Vec<Complex64>>,
    pub n: usize,
}

/// Complex logarithm of f/u_inc, scaled by 1/k². The principal argument is
/// unwrapped along θ independently at each boundary node (consecutive jumps
/// brought below π), which is the continuity the θ-differentiated equation
/// needs.
pub fn compute_log_boundary(
    data: &BoundaryDataset,
    angular: &AngularGrid,
) -> Result<LogBoundaryField> {
    let walk = data.grid.boundary_walk();
    let k2 = data.k * data.k;
    let mut v = vec![vec![Complex64::new(0.0, 0.0); angular.n_theta]; walk.len()];
    for (b, node) in walk.iter().enumerate() {
        let (x, y) = (data.grid.x(node.i), data.grid.x(node.j));
        let mut prev_arg = 0.0f64;
        for (t, &theta) in angular.thetas.iter().enumerate() {
            let d = AngularGrid::direction(theta);
            let uinc = Complex64::new(0.0, data.k * (d[0] * x + d[1] * y)).exp();
            let rho = data.f[b][t] / uinc;
            let mag = rho.norm();
            if mag < 1e-14 {
                return Err(Error::LogUndefined { value: mag });
            }
            let raw = rho.arg();
            let arg = if t == 0 {
                raw
            } else {
                // shift by the 2π multiple that keeps the jump below π
                let mut delta = raw - prev_arg;
                while delta > std::f64::consts::PI {
                    delta -= 2.0 * std::f64::consts::PI;
                }
                while delta < -std::f64::consts::PI {
                    delta += 2.0 * std::f64::consts::PI;
                }
                prev_arg + delta
            };
            prev_arg = arg;
            v[b][t] = Complex64::new(mag.ln(), arg) / k2;
        }
    }
    Ok(LogBoundaryField {
        v_boundary: v,
        unwrap_applied: true,
    })
}

/// Project the log field and the Neumann integrand onto the basis with the
/// trapezoid rule on the data angles:
/// F_m(x) = ∫ v(x,θ) Ψ_m dθ, G_m(x) = (1/k²) ∫ Ψ_m [g/f - ik θ̂·ν] dθ.
pub fn compute_traces(
    logfield: &LogBoundaryField,
    data: &BoundaryDataset,
    basis: &BasisSet,
    angular: &AngularGrid,
) -> Result<FourierTraces> {
    let walk = data.grid.boundary_walk();
    let n_modes = basis.n;
    let k = data.k;
    let rows = exec::map_indexed(walk.len(), |b| {
        let node = walk[b];
        let mut f_row = vec![Complex64::new(0.0, 0.0); n_modes];
        let mut g_row = vec![Complex64::new(0.0, 0.0); n_modes];
        for m in 0..n_modes {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..angular.n_theta {
                acc += angular.weights[t] * basis.psi[m][t] * logfield.v_boundary[b][t];
            }
            f_row[m] = acc;
        }
        if !node.is_corner {
            for m in 0..n_modes {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..angular.n_theta {
                    let d = AngularGrid::direction(angular.thetas[t]);
                    let tn = d[0] * node.normal[0] + d[1] * node.normal[1];
                    let ratio = data.g[b][t] / data.f[b][t];
                    let integrand = ratio - Complex64::new(0.0, k * tn);
                    acc += angular.weights[t] * basis.psi[m][t] * integrand;
                }
                g_row[m] = acc / (k * k);
            }
        }
        (f_row, g_row)
    });
    let mut f = vec![vec![Complex64::new(0.0, 0.0); walk.len()]; n_modes];
    let mut g = vec![vec![Complex64::new(0.0, 0.0); walk.len()]; n_modes];
    for (b, (f_row, g_row)) in rows.into_iter().enumerate() {
        for m in 0..n_modes {
            f[m][b] = f_row[m];
            g[m][b] = g_row[m];
        }
    }
    Ok(FourierTraces { f, g, n: n_modes })
}

/// The e(N) truncation-misfit curve of the raw data f on the bottom side
/// Γ = {(x, -1)}, and the selected cutoff.
#[derive(Clone, Debug)]
pub struct CutoffSelection {
    pub selected: usize,
    /// e(N) for N = 1..=n_max (index 0 is N = 1).
    pub curve: Vec<f64>,
}

/// e(N) = ‖f - Σ_{n≤N} f_n Ψ_n‖ / ‖f‖ on Γ × [0, 2π], with trapezoid
/// weights in both variables. The cutoff is the N attaining the minimum
/// before the first sustained increase (three consecutive rises); within
/// 1e-12 of that minimum the smallest such N wins, so band-limited data
/// select their exact mode count.
pub fn choose_cutoff(
    data: &BoundaryDataset,
    basis: &BasisSet,
    angular: &AngularGrid,
) -> Result<CutoffSelection> {
    let n_max = basis.n;
    let walk = data.grid.boundary_walk();
    let grid = &data.grid;
    // bottom side nodes in walk order (j = 0), including corners
    let bottom: Vec<usize> = walk
        .iter()
        .enumerate()
        .filter(|(_, node)| node.j == 0)
        .map(|(b, _)| b)
        .collect();
    let mut wx = vec![grid.h; bottom.len()];
    wx[0] = grid.h / 2.0;
    let last = bottom.len() - 1;
    wx[last] = grid.h / 2.0;

    let nt = angular.n_theta;
    // Fourier coefficients of f per bottom node
    let mut coeff = vec![vec![Complex64::new(0.0, 0.0); bottom.len()]; n_max];
    for (bi, &b) in bottom.iter().enumerate() {
        for m in 0..n_max {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..nt {
                acc += angular.weights[t] * basis.psi[m][t] * data.f[b][t];
            }
            coeff[m][bi] = acc;
        }
    }
    let mut denom = 0.0;
    for (bi, &b) in bottom.iter().enumerate() {
        for t in 0..nt {
            denom += wx[bi] * angular.weights[t] * data.f[b][t].norm_sqr();
        }
    }
    let denom = denom.sqrt();

    let mut recon = vec![vec![Complex64::new(0.0, 0.0); nt]; bottom.len()];
    let mut curve = Vec::with_capacity(n_max);
    for m in 0..n_max {
        for (bi, &b) in bottom.iter().enumerate() {
            let _ = b;
            for t in 0..nt {
                recon[bi][t] += coeff[m][bi] * basis.psi[m][t];
            }
        }
        let mut num = 0.0;
        for (bi, &b) in bottom.iter().enumerate() {
            for t in 0..nt {
                num += wx[bi] * angular.weights[t] * (data.f[b][t] - recon[bi][t]).norm_sqr();
            }
        }
        curve.push(num.sqrt() / denom);
    }

    // first sustained increase: three consecutive rises
    let mut cut = curve.len();
    for i in 0..curve.len().saturating_sub(3) {
        if curve[i + 1] > curve[i] && curve[i + 2] > curve[i + 1] && curve[i + 3] > curve[i + 2] {
            cut = i + 1; // search range ends at the local min before the rise
            break;
        }
    }
    let search = &curve[..cut];
    let min = search.iter().copied().fold(f64::INFINITY, f64::min);
    if curve[0] <= *curve.last().unwrap() && cut == curve.len() && curve.windows(2).all(|w| w[1] >= w[0])
    {
        return Err(Error::CutoffNotFound);
    }
    let selected = search
        .iter()
        .position(|&e| e <= min + 1e-12)
        .expect("minimum exists")
        + 1;
    Ok(CutoffSelection { selected, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::forward::{
        add_noise, extract_cauchy, make_phantom, solve_forward_all, PhantomId,
    };
    use crate::grid::SpatialGrid;
    use std::f64::consts::PI;

    fn plane_dataset(n: usize, nt: usize, k: f64) -> (BoundaryDataset, AngularGrid) {
        let grid = SpatialGrid::new(n);
        let phantom = make_phantom(PhantomId::Uniform, &grid, 1.0);
        let angular = AngularGrid::new(nt);
        let fields = solve_forward_all(&grid, &phantom, k, &angular).unwrap();
        (extract_cauchy(&grid, &grid, &fields, &angular, k), angular)
    }

    #[test]
    fn log_of_incident_wave_is_zero() {
        let (data, angular) = plane_dataset(16, 16, 2.0 * PI);
        let log = compute_log_boundary(&data, &angular).unwrap();
        for row in &log.v_boundary {
            for v in row {
                assert!(v.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn constructed_exponential_shift() {
        // f = u_inc * e^{i k^2 0.3} -> v = 0.3 i
        let (mut data, angular) = plane_dataset(12, 12, 2.0 * PI);
        let phase = Complex64::new(0.0, data.k * data.k * 0.3).exp();
        for row in data.f.iter_mut() {
            for v in row.iter_mut() {
                *v *= phase;
            }
        }
        let log = compute_log_boundary(&data, &angular).unwrap();
        for row in &log.v_boundary {
            for v in row {
                // modulo the 2πi/k² branch: 0.3 < 2π/k² branch spacing? k²=39.5,
                // spacing 2π/39.5 = 0.159 < 0.3 — the principal branch puts the
                // start at 0.3 - 0.159*2 ... verify exp(k² v) matches instead
                let back = (v * data.k * data.k).exp();
                assert!((back - phase).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn round_trip_reproduces_f() {
        let grid = SpatialGrid::new(24);
        let phantom = make_phantom(PhantomId::Test1, &grid, 1.0);
        let angular = AngularGrid::new(24);
        let k = 2.0 * PI;
        let fields = solve_forward_all(&grid, &phantom, k, &angular).unwrap();
        let data = extract_cauchy(&grid, &grid, &fields, &angular, k);
        let log = compute_log_boundary(&data, &angular).unwrap();
        let walk = grid.boundary_walk();
        for (b, node) in walk.iter().enumerate() {
            let (x, y) = (grid.x(node.i), grid.x(node.j));
            for (t, &theta) in angular.thetas.iter().enumerate() {
                let d = AngularGrid::direction(theta);
                let uinc = Complex64::new(0.0, k * (d[0] * x + d[1] * y)).exp();
                let back = (log.v_boundary[b][t] * k * k).exp() * uinc;
                let rel = (back - data.f[b][t]).norm() / data.f[b][t].norm();
                assert!(rel < 1e-10, "node {b} angle {t}: rel {rel:.2e}");
            }
        }
    }

    #[test]
    fn winding_phase_unwraps_without_jumps() {
        // rho = e^{i theta}: winds once; unwrapped phase must end 2π up
        let (mut data, angular) = plane_dataset(8, 48, 2.0 * PI);
        let walk = data.grid.boundary_walk();
        for (b, node) in walk.iter().enumerate() {
            let (x, y) = (data.grid.x(node.i), data.grid.x(node.j));
            for (t, &theta) in angular.thetas.iter().enumerate() {
                let d = AngularGrid::direction(theta);
                let uinc = Complex64::new(0.0, data.k * (d[0] * x + d[1] * y)).exp();
                data.f[b][t] = uinc * Complex64::new(0.0, theta).exp();
            }
        }
        let log = compute_log_boundary(&data, &angular).unwrap();
        let k2 = data.k * data.k;
        for row in &log.v_boundary {
            let phases: Vec<f64> = row.iter().map(|v| v.im * k2).collect();
            assert!(((phases[phases.len() - 1] - phases[0]) - 2.0 * PI).abs() < 1e-8);
            for w in phases.windows(2) {
                assert!((w[1] - w[0]).abs() < PI);
            }
        }
    }

    #[test]
    fn single_mode_field_projects_to_first_trace() {
        // v_boundary = w(x) Psi_1(theta): F_1 = w, higher modes ~ 0.
        // The bound is the quadrature tolerance of the angular trapezoid
        // rule; the 1e-6 target needs a dense grid (defect ~ 3.7e-7 at 16384
        // angles, measured).
        let n = 10;
        let nt = 16384;
        let k = 2.0 * PI;
        let grid = SpatialGrid::new(n);
        let angular = AngularGrid::new(nt);
        let basis = build_basis(6, 1024, &angular).unwrap();
        let walk = grid.boundary_walk();
        let mut v = vec![vec![Complex64::new(0.0, 0.0); nt]; walk.len()];
        let w_of = |x: f64, y: f64| Complex64::new(x + 0.2, y - 0.1);
        for (b, node) in walk.iter().enumerate() {
            let (x, y) = (grid.x(node.i), grid.x(node.j));
            for t in 0..nt {
                v[b][t] = w_of(x, y) * basis.psi[0][t];
            }
        }
        let log = LogBoundaryField {
            v_boundary: v,
            unwrap_applied: false,
        };
        // dataset shell: f/g only used for G, checked separately
        let phantom = make_phantom(PhantomId::Uniform, &grid, 1.0);
        let fields = solve_forward_all(&grid, &phantom, k, &angular).unwrap();
        let data = extract_cauchy(&grid, &grid, &fields, &angular, k);
        let traces = compute_traces(&log, &data, &basis, &angular).unwrap();
        for (b, node) in walk.iter().enumerate() {
            let (x, y) = (grid.x(node.i), grid.x(node.j));
            assert!((traces.f[0][b] - w_of(x, y)).norm() < 1e-6);
            for m in 1..basis.n {
                assert!(traces.f[m][b].norm() < 1e-6, "mode {m}: {:?}", traces.f[m][b]);
            }
        }
    }

    #[test]
    fn plane_wave_traces_vanish() {
        // c = 1: v_boundary = 0 and g/f = ik theta_hat . nu -> F, G = 0
        let (data, angular) = plane_dataset(48, 64, 2.0 * PI);
        let basis = build_basis(4, 512, &angular).unwrap();
        let log = compute_log_boundary(&data, &angular).unwrap();
        let traces = compute_traces(&log, &data, &basis, &angular).unwrap();
        let walk = data.grid.boundary_walk();
        for m in 0..basis.n {
            for (b, node) in walk.iter().enumerate() {
                assert!(traces.f[m][b].norm() < 1e-7);
                if !node.is_corner {
                    // g carries an O(h²) extraction error integrated against
                    // the basis; the bound reflects that, not exact zero
                    assert!(traces.g[m][b].norm() < 1e-2);
                }
            }
        }
    }

    #[test]
    fn bessel_bound_per_node() {
        // sum_m |F_m|^2 <= int |v|^2 dtheta + quadrature tolerance
        let grid = SpatialGrid::new(16);
        let angular = AngularGrid::new(256);
        let basis = build_basis(8, 1024, &angular).unwrap();
        let k = 2.0 * PI;
        let phantom = make_phantom(PhantomId::Test1, &grid, 1.0);
        let fields = solve_forward_all(&grid, &phantom, k, &angular).unwrap();
        let data = extract_cauchy(&grid, &grid, &fields, &angular, k);
        let log = compute_log_boundary(&data, &angular).unwrap();
        let traces = compute_traces(&log, &data, &basis, &angular).unwrap();
        let walk = grid.boundary_walk();
        for b in 0..walk.len() {
            let lhs: f64 = (0..basis.n).map(|m| traces.f[m][b].norm_sqr()).sum();
            let rhs: f64 = (0..angular.n_theta)
                .map(|t| angular.weights[t] * log.v_boundary[b][t].norm_sqr())
                .sum();
            assert!(lhs <= rhs + 1e-6, "node {b}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn band_limited_data_select_their_mode_count() {
        let n = 12;
        // e(8) <= 1e-6 needs the angular quadrature defect below 1e-6;
        // 32768 angles measured at ~7e-7. Selection itself is stable from
        // ~100 angles up.
        let nt = 32768;
        let grid = SpatialGrid::new(n);
        let angular = AngularGrid::new(nt);
        let basis = build_basis(12, 1024, &angular).unwrap();
        let n0 = 8;
        // f synthesized from the first 8 modes with smooth x-dependence
        let walk = grid.boundary_walk();
        let phantom = make_phantom(PhantomId::Uniform, &grid, 1.0);
        let fields = solve_forward_all(&grid, &phantom, 2.0 * PI, &angular).unwrap();
        let mut data = extract_cauchy(&grid, &grid, &fields, &angular, 2.0 * PI);
        for (b, node) in walk.iter().enumerate() {
            let x = grid.x(node.i);
            for t in 0..nt {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..n0 {
                    let amp = Complex64::new(
                        1.0 / (m as f64 + 1.0),
                        0.2 * x / (m as f64 + 1.0),
                    );
                    acc += amp * basis.psi[m][t];
                }
                data.f[b][t] = acc;
            }
        }
        let sel = choose_cutoff(&data, &basis, &angular).unwrap();
        assert_eq!(sel.selected, n0, "curve: {:?}", sel.curve);
        assert!(sel.curve[n0 - 1] <= 1e-6);
        // nested projections: non-increasing up to n0
        for w in sel.curve[..n0].windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn cutoff_independent_of_angle_sample_noise_seed_ordering() {
        // determinism: same data -> same selection
        let grid = SpatialGrid::new(12);
        let angular = AngularGrid::new(64);
        let basis = build_basis(10, 1024, &angular).unwrap();
        let phantom = make_phantom(PhantomId::Test1, &grid, 1.0);
        let fields = solve_forward_all(&grid, &phantom, 2.0 * PI, &angular).unwrap();
        let data = extract_cauchy(&grid, &grid, &fields, &angular, 2.0 * PI);
        let noisy = add_noise(&data, 0.05, 42).unwrap();
        let a = choose_cutoff(&noisy, &basis, &angular).unwrap();
        let b = choose_cutoff(&noisy, &basis, &angular).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.curve, b.curve);
    }
}
