//! Polynomial-exponential orthonormal basis of L²(0, 2π) and the
//! θ-integrated coefficient arrays of the reduced system.
//!
//! The raw family is {θ^{n-1} e^θ}. Gram-Schmidt on it is the standard
//! construction; the family's Gram matrix is catastrophically conditioned,
//! so the orthogonalization runs in double-double arithmetic (see [`crate::dd`])
//! with one full re-orthogonalization pass. Derivatives come analytically
//! from the coefficients, never from finite differences.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::exec;
use crate::quad::{gauss_legendre, trapezoid_weights};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Uniformly spaced measurement angles θ ∈ [0, 2π] with trapezoid weights.
#[derive(Clone, Debug)]
pub struct AngularGrid {
    pub n_theta: usize,
    pub thetas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AngularGrid {
    /// `n_theta` angles with θ₁ = 0 and θ_{n_theta} = 2π.
    pub fn new(n_theta: usize) -> AngularGrid {
        assert!(n_theta >= 2, "need at least two angles");
        let step = 2.0 * PI / (n_theta - 1) as f64;
        let thetas: Vec<f64> = (0..n_theta).map(|i| i as f64 * step).collect();
        let weights = trapezoid_weights(n_theta, 2.0 * PI);
        AngularGrid {
            n_theta,
            thetas,
            weights,
        }
    }

    /// Unit direction θ̂ = (cos θ, sin θ).
    pub fn direction(theta: f64) -> [f64; 2] {
        [theta.cos(), theta.sin()]
    }

    /// dθ̂/dθ = (-sin θ, cos θ).
    pub fn direction_prime(theta: f64) -> [f64; 2] {
        [-theta.sin(), theta.cos()]
    }
}

/// One orthonormal basis function as a double-double coefficient vector:
/// Ψ = Σ_j c_j θ^j e^θ (j = 0..n).
#[derive(Clone, Debug)]
struct CoeffVec(Vec<Dd>);

impl CoeffVec {
    /// Evaluate (Ψ, Ψ') at θ. The polynomial part runs in double-double;
    /// the common e^θ factor is applied in f64 at the end (no cancellation
    /// happens there).
    fn eval(&self, theta: f64) -> (f64, f64) {
        let mut p = Dd::ZERO;
        let mut dp = Dd::ZERO;
        for &c in self.0.iter().rev() {
            dp = dp.mul_f64(theta).add(p);
            p = p.mul_f64(theta).add(c);
        }
        let e = theta.exp();
        let value = p.to_f64() * e;
        let deriv = (dp.add(p)).to_f64() * e;
        (value, deriv)
    }
}

/// The first N basis functions, their tabulated values on the angular grid,
/// and the coefficient arrays S, B, a of the reduced system.
#[derive(Clone, Debug)]
pub struct BasisSet {
    pub n: usize,
    /// Ψ_m(θ_i) on the data angles, row-major `[m][i]`.
    pub psi: Vec<Vec<f64>>,
    /// Ψ_m'(θ_i) on the data angles.
    pub psi_prime: Vec<Vec<f64>>,
    /// Lower-triangular coefficients of Ψ_n in the raw family (f64 view of
    /// the double-double representation; serialized for audit).
    pub gs_coeffs: Vec<Vec<f64>>,
    /// s_{mn} = ∫ Ψ_n' Ψ_m dθ.
    pub s: Vec<Vec<f64>>,
    /// B_{mn} = 2ik [∫ θ̂ Ψ_n'Ψ_m + ∫ θ̂' Ψ_nΨ_m] dθ, a complex 2-vector.
    pub b: Vec<Vec<[Complex64; 2]>>,
    /// a_{mnl} = 2k² ∫ Ψ_n Ψ_l' Ψ_m dθ (includes the 2k² factor).
    pub a: Vec<f64>,
    /// Wave number used for B and a; 0 until `compute_coefficients` runs.
    pub k: f64,
    /// Residual max|G - I| of the re-orthogonalized Gram matrix.
    pub gram_residual: f64,
    /// Condition diagnostics of S (smallest/largest singular value).
    pub s_sigma_min: f64,
    pub s_sigma_max: f64,
    // internal double-double coefficients and the fine quadrature tables
    coeffs: Vec<CoeffVec>,
    fine_nodes: Vec<f64>,
    fine_weights: Vec<f64>,
    psi_fine: Vec<Vec<f64>>,
    psi_prime_fine: Vec<Vec<f64>>,
}

impl BasisSet {
    /// a_{mnl} with all three indices.
    #[inline]
    pub fn a_coef(&self, m: usize, n: usize, l: usize) -> f64 {
        self.a[(m * self.n + n) * self.n + l]
    }

    /// Evaluate Ψ_m at an arbitrary angle (analytic, from the coefficients).
    pub fn eval_psi(&self, m: usize, theta: f64) -> f64 {
        self.coeffs[m].eval(theta).0
    }

    /// Evaluate Ψ_m' at an arbitrary angle.
    pub fn eval_psi_prime(&self, m: usize, theta: f64) -> f64 {
        self.coeffs[m].eval(theta).1
    }

    /// Summary block written into run summaries.
    pub fn report(&self) -> BasisReport {
        BasisReport {
            n: self.n,
            gram_residual: self.gram_residual,
            s_condition: self.s_sigma_max / self.s_sigma_min,
            s_sigma_min: self.s_sigma_min,
            gs_coeffs: self.gs_coeffs.clone(),
        }
    }
}

/// Audit record of the basis construction.
#[derive(Clone, Debug, Serialize)]
pub struct BasisReport {
    pub n: usize,
    pub gram_residual: f64,
    pub s_condition: f64,
    pub s_sigma_min: f64,
    pub gs_coeffs: Vec<Vec<f64>>,
}

/// Build the first `n` orthonormal functions.
///
/// `fine_quadrature` is the node count of the internal Gauss-Legendre rule
/// used for every basis-side inner product; it must be at least `50 * n`.
/// Fails if the re-orthogonalized Gram residual exceeds 1e-6, which signals
/// that `n` is too large for working precision.
pub fn build_basis(n: usize, fine_quadrature: usize, angular: &AngularGrid) -> Result<BasisSet> {
    assert!(n >= 1, "basis size must be at least 1");
    assert!(
        fine_quadrature >= 50 * n,
        "fine quadrature must have at least 50 N nodes"
    );
    let (nodes, weights) = gauss_legendre(fine_quadrature, 0.0, 2.0 * PI);

    let mut coeffs: Vec<CoeffVec> = Vec::with_capacity(n);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(n);
    // quadrature weights as dd for the accumulation
    for step in 0..n {
        let mut c = vec![Dd::ZERO; step + 1];
        c[step] = Dd::ONE;
        let mut cur = CoeffVec(c);
        // modified Gram-Schmidt, then one full re-orthogonalization pass
        for _pass in 0..2 {
            for j in 0..step {
                let cur_vals: Vec<f64> = nodes.iter().map(|&t| cur.eval(t).0).collect();
                let mut proj = Dd::ZERO;
                for i in 0..nodes.len() {
                    proj = proj.add(Dd::from_f64(weights[i] * cur_vals[i]).mul_f64(values[j][i]));
                }
                for (idx, cj) in coeffs[j].0.iter().enumerate() {
                    cur.0[idx] = cur.0[idx].sub(proj.mul(*cj));
                }
            }
        }
        let cur_vals: Vec<f64> = nodes.iter().map(|&t| cur.eval(t).0).collect();
        let mut norm2 = Dd::ZERO;
        for i in 0..nodes.len() {
            norm2 = norm2.add(Dd::from_f64(weights[i] * cur_vals[i]).mul_f64(cur_vals[i]));
        }
        let norm = norm2.sqrt();
        for c in cur.0.iter_mut() {
            *c = c.div(norm);
        }
        values.push(nodes.iter().map(|&t| cur.eval(t).0).collect());
        coeffs.push(cur);
    }

    // Gram residual of the final (coefficient-evaluated) functions
    let mut gram_residual: f64 = 0.0;
    for m in 0..n {
        for l in 0..=m {
            let g: f64 = (0..nodes.len())
                .map(|i| weights[i] * values[m][i] * values[l][i])
                .sum();
            let target = if m == l { 1.0 } else { 0.0 };
            gram_residual = gram_residual.max((g - target).abs());
        }
    }
    if gram_residual > 1e-6 {
        return Err(Error::BasisPrecision {
            n,
            residual: gram_residual,
        });
    }

    let psi_prime_fine: Vec<Vec<f64>> = coeffs
        .iter()
        .map(|c| nodes.iter().map(|&t| c.eval(t).1).collect())
        .collect();
    let psi: Vec<Vec<f64>> = coeffs
        .iter()
        .map(|c| angular.thetas.iter().map(|&t| c.eval(t).0).collect())
        .collect();
    let psi_prime: Vec<Vec<f64>> = coeffs
        .iter()
        .map(|c| angular.thetas.iter().map(|&t| c.eval(t).1).collect())
        .collect();
    let gs_coeffs: Vec<Vec<f64>> = coeffs
        .iter()
        .map(|c| c.0.iter().map(|d| d.to_f64()).collect())
        .collect();

    let mut basis = BasisSet {
        n,
        psi,
        psi_prime,
        gs_coeffs,
        s: vec![vec![0.0; n]; n],
        b: vec![vec![[Complex64::new(0.0, 0.0); 2]; n]; n],
        a: vec![0.0; n * n * n],
        k: 0.0,
        gram_residual,
        s_sigma_min: 0.0,
        s_sigma_max: 0.0,
        coeffs,
        fine_nodes: nodes,
        fine_weights: weights,
        psi_fine: values,
        psi_prime_fine,
    };
    // no row of psi_prime may vanish identically
    for m in 0..n {
        let max = basis.psi_prime_fine[m]
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        assert!(max > 0.0, "derivative of basis function {m} vanished");
    }
    basis.fill_s();
    Ok(basis)
}

impl BasisSet {
    fn fill_s(&mut self) {
        let n = self.n;
        for m in 0..n {
            for nn in 0..n {
                self.s[m][nn] = self.integrate(|i| self.psi_prime_fine[nn][i] * self.psi_fine[m][i]);
            }
        }
        let (smin, smax) = singular_value_extrema(&self.s);
        self.s_sigma_min = smin;
        self.s_sigma_max = smax;
    }

    #[inline]
    fn integrate<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.fine_weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * f(i))
            .sum()
    }
}

/// Fill the S, B, a arrays for wave number `k` using the fine quadrature.
///
/// Per-(m,n) integrals are independent; they run through [`exec::map_indexed`]
/// with a fixed summation order inside each entry.
pub fn compute_coefficients(basis: &mut BasisSet, k: f64) {
    let n = basis.n;
    let nodes = basis.fine_nodes.clone();
    let cos_t: Vec<f64> = nodes.iter().map(|t| t.cos()).collect();
    let sin_t: Vec<f64> = nodes.iter().map(|t| t.sin()).collect();

    let entries = exec::map_indexed(n * n, |mn| {
        let m = mn / n;
        let nn = mn % n;
        let bx = basis.integrate(|i| {
            cos_t[i] * basis.psi_prime_fine[nn][i] * basis.psi_fine[m][i]
                - sin_t[i] * basis.psi_fine[nn][i] * basis.psi_fine[m][i]
        });
        let by = basis.integrate(|i| {
            sin_t[i] * basis.psi_prime_fine[nn][i] * basis.psi_fine[m][i]
                + cos_t[i] * basis.psi_fine[nn][i] * basis.psi_fine[m][i]
        });
        let mut a_row = vec![0.0; n];
        for (l, slot) in a_row.iter_mut().enumerate() {
            *slot = 2.0
                * k
                * k
                * basis.integrate(|i| {
                    basis.psi_fine[nn][i] * basis.psi_prime_fine[l][i] * basis.psi_fine[m][i]
                });
        }
        (bx, by, a_row)
    });
    for (mn, (bx, by, a_row)) in entries.into_iter().enumerate() {
        let m = mn / n;
        let nn = mn % n;
        let scale = Complex64::new(0.0, 2.0 * k);
        basis.b[m][nn] = [scale * bx, scale * by];
        for (l, v) in a_row.into_iter().enumerate() {
            basis.a[(m * n + nn) * n + l] = v;
        }
    }
    basis.k = k;
}

/// Smallest and largest singular values via Jacobi iteration on SᵀS.
fn singular_value_extrema(s: &[Vec<f64>]) -> (f64, f64) {
    let n = s.len();
    // form SᵀS and run cyclic Jacobi to convergence; n <= ~50 keeps this cheap
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (row, srow) in s.iter().enumerate() {
                acc += srow[i] * s[row][j];
            }
            a[i][j] = acc;
        }
    }
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p][q].abs());
            }
        }
        if off < 1e-14 * a.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0, f64::max) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - sn * aiq;
                    a[i][q] = sn * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - sn * aqi;
                    a[q][i] = sn * api + c * aqi;
                }
            }
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..n {
        let sv = a[i][i].max(0.0).sqrt();
        lo = lo.min(sv);
        hi = hi.max(sv);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_angular() -> AngularGrid {
        AngularGrid::new(64)
    }

    #[test]
    fn angular_grid_invariants() {
        let g = AngularGrid::new(64);
        assert_eq!(g.thetas[0], 0.0);
        assert!((g.thetas[63] - 2.0 * PI).abs() < 1e-15);
        assert!(g.thetas.windows(2).all(|w| w[1] > w[0]));
        let s: f64 = g.weights.iter().sum();
        assert!((s - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn first_function_matches_closed_form() {
        // Psi_1 = e^theta / sqrt((e^{4 pi} - 1)/2)
        let basis = build_basis(1, 256, &desk_angular()).unwrap();
        let exact = 1.0 / (((4.0 * PI).exp() - 1.0) / 2.0).sqrt();
        let got = basis.gs_coeffs[0][0];
        assert!(
            (got / exact - 1.0).abs() < 1e-12,
            "got {got:e}, want {exact:e}"
        );
    }

    #[test]
    fn gram_identity_for_n_up_to_20() {
        for n in [12, 15, 20] {
            let basis = build_basis(n, (50 * n).max(1024), &desk_angular()).unwrap();
            assert!(
                basis.gram_residual <= 1e-8,
                "N={n}: residual {:.3e}",
                basis.gram_residual
            );
        }
    }

    #[test]
    fn gs_coeffs_strictly_lower_triangular_with_nonzero_diagonal() {
        let basis = build_basis(5, 512, &desk_angular()).unwrap();
        for (i, row) in basis.gs_coeffs.iter().enumerate() {
            assert_eq!(row.len(), i + 1);
            assert!(row[i] != 0.0);
        }
    }

    #[test]
    fn derivative_consistent_with_finite_differences() {
        let basis = build_basis(10, 1024, &desk_angular()).unwrap();
        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        for m in 0..basis.n {
            let scale = basis.psi_prime[m]
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            for &t in &[0.5, 1.5, 3.0, 5.0, 6.0] {
                let fd = (basis.eval_psi(m, t + h) - basis.eval_psi(m, t - h)) / (2.0 * h);
                let an = basis.eval_psi_prime(m, t);
                max_rel = max_rel.max((fd - an).abs() / scale);
            }
        }
        assert!(max_rel < 1e-4, "max relative deviation {max_rel:.3e}");
    }

    #[test]
    fn s11_is_one() {
        let mut basis = build_basis(3, 512, &desk_angular()).unwrap();
        compute_coefficients(&mut basis, 1.0);
        assert!((basis.s[0][0] - 1.0).abs() < 1e-8, "s11 = {}", basis.s[0][0]);
    }

    #[test]
    fn s_integration_by_parts_identity() {
        let n = 8;
        let basis = build_basis(n, 1024, &desk_angular()).unwrap();
        let two_pi = 2.0 * PI;
        for m in 0..n {
            for nn in 0..n {
                let lhs = basis.s[m][nn] + basis.s[nn][m];
                let rhs = basis.eval_psi(m, two_pi) * basis.eval_psi(nn, two_pi)
                    - basis.eval_psi(m, 0.0) * basis.eval_psi(nn, 0.0);
                assert!(
                    (lhs - rhs).abs() < 1e-8,
                    "m={m} n={nn}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn direction_vectors() {
        let d0 = AngularGrid::direction(0.0);
        assert!((d0[0] - 1.0).abs() < 1e-15 && d0[1].abs() < 1e-15);
        let d1 = AngularGrid::direction(PI / 2.0);
        assert!(d1[0].abs() < 1e-15 && (d1[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn a_tensor_vanishes_at_zero_wavenumber() {
        let mut basis = build_basis(4, 512, &desk_angular()).unwrap();
        compute_coefficients(&mut basis, 0.0);
        assert!(basis.a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn b_entries_purely_imaginary_scaled() {
        let mut basis = build_basis(4, 512, &desk_angular()).unwrap();
        compute_coefficients(&mut basis, 2.0);
        for row in &basis.b {
            for entry in row {
                assert!(entry[0].re.abs() < 1e-12);
                assert!(entry[1].re.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn s_matrix_invertible_with_unit_determinant_signature() {
        // d/dθ maps the span into itself with unit eigenvalues, so S has
        // det 1; its singular values straddle 1.
        let basis = build_basis(8, 1024, &desk_angular()).unwrap();
        assert!(basis.s_sigma_min > 0.0);
        assert!(basis.s_sigma_max >= 1.0);
        assert!(basis.s_sigma_min <= 1.0);
    }

    #[test]
    fn rejects_oversized_n() {
        // far beyond double-double working precision
        let err = build_basis(40, 2048, &desk_angular());
        assert!(matches!(err, Err(Error::BasisPrecision { .. })));
    }
}
