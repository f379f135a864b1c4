//! Carleman-weighted regularized least-squares Picard iteration for the
//! coupled elliptic system.
//!
//! Each step minimizes
//!   Σ_m ∫ W |Σ_n s_{mn} Δφ_n + Σ_n ∇φ_n·B_{mn}
//!            + Σ_{n,l} a_{mnl} ∇φ_n·∇v_l^{(prev)}|² dx + ε‖φ‖²_{H²,discrete}
//! over discrete fields with φ_m = F_m on ∂Ω eliminated exactly and
//! √(neumann_weight)·(∂_ν φ_m - G_m) as penalty rows. The gradient coupling
//! freezes the previous iterate, so every step is one sparse weighted
//! least-squares solve.

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{ComplexGrid, ScalarGrid, SpatialGrid};
use crate::preprocess::FourierTraces;
use crate::sparse::{solve_weighted_least_squares, SparseRows};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Carleman weight and regularization parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarlemanParams {
    /// Weight anchor x₀, outside Ω̄.
    pub x0: [f64; 2],
    pub beta: f64,
    pub lambda: f64,
    /// Tikhonov weight on the discrete H² norm.
    pub epsilon: f64,
    /// Divide r by its minimum over the grid before exponentiating; with
    /// the published parameters the unnormalized weight is numerically 1.
    pub normalize_radius: bool,
    /// Absolute Neumann penalty weight; `None` selects 1e4·mean(W).
    pub neumann_weight: Option<f64>,
}

impl Default for CarlemanParams {
    fn default() -> CarlemanParams {
        CarlemanParams {
            x0: [0.0, -10.0],
            beta: 20.0,
            lambda: 6.0,
            epsilon: 10f64.powf(-5.5),
            normalize_radius: false,
            neumann_weight: None,
        }
    }
}

impl CarlemanParams {
    pub fn validate(&self) -> Result<()> {
        let inside = self.x0[0].abs() <= 1.0 && self.x0[1].abs() <= 1.0;
        if inside {
            return Err(Error::Config(format!(
                "carleman anchor {:?} must lie outside [-1,1]^2",
                self.x0
            )));
        }
        if self.beta <= 0.0 || self.lambda <= 0.0 || self.epsilon <= 0.0 {
            return Err(Error::Config(
                "beta, lambda, epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// N complex component grids v_m over Ω̄.
pub type FourierField = Vec<ComplexGrid>;

/// Point evaluation of the weight, given the grid minimum of r when
/// normalization is on.
pub fn weight_at(x: f64, y: f64, params: &CarlemanParams, r_min: f64) -> Result<f64> {
    let r = ((x - params.x0[0]).powi(2) + (y - params.x0[1]).powi(2)).sqrt();
    let r_tilde = if params.normalize_radius { r / r_min } else { r };
    let exponent = 2.0 * params.lambda * r_tilde.powf(-params.beta);
    if exponent >= 700.0 {
        return Err(Error::WeightOverflow { exponent });
    }
    Ok(exponent.exp())
}

/// Minimum of r over the grid nodes.
pub fn min_radius(grid: &SpatialGrid, params: &CarlemanParams) -> f64 {
    let mut r_min = f64::INFINITY;
    for j in 0..grid.n {
        for i in 0..grid.n {
            let r = ((grid.x(i) - params.x0[0]).powi(2) + (grid.x(j) - params.x0[1]).powi(2))
                .sqrt();
            r_min = r_min.min(r);
        }
    }
    r_min
}

/// W(x) = exp(2λ r̃(x)^{-β}) sampled on the grid.
pub fn carleman_weight(grid: &SpatialGrid, params: &CarlemanParams) -> Result<ScalarGrid> {
    let r_min = min_radius(grid, params);
    let mut w = ScalarGrid::zeros((grid.n, grid.n));
    for j in 0..grid.n {
        for i in 0..grid.n {
            w[[i, j]] = weight_at(grid.x(i), grid.x(j), params, r_min)?;
        }
    }
    Ok(w)
}

fn resolved_neumann_weight(params: &CarlemanParams, weight: &ScalarGrid) -> f64 {
    params.neumann_weight.unwrap_or_else(|| {
        let mean = weight.iter().sum::<f64>() / weight.len() as f64;
        1e4 * mean
    })
}

/// Initial-guess mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Regularized least squares on ‖Δφ‖² with the Cauchy data
    /// (quasi-reversibility).
    Qr,
    /// Zero field.
    Zero,
}

/// Per-mode stencil data shared by the initial guess and the Picard step.
struct Assembly<'a> {
    grid: &'a SpatialGrid,
    n_modes: usize,
    /// F_m on the full grid (zero off-boundary), for Dirichlet elimination.
    f_grid: Vec<ComplexGrid>,
}

impl<'a> Assembly<'a> {
    fn new(grid: &'a SpatialGrid, traces: &FourierTraces) -> Assembly<'a> {
        let n = grid.n;
        let walk = grid.boundary_walk();
        let mut f_grid = vec![ComplexGrid::zeros((n, n)); traces.n];
        for (b, node) in walk.iter().enumerate() {
            for (m, fg) in f_grid.iter_mut().enumerate() {
                fg[[node.i, node.j]] = traces.f[m][b];
            }
        }
        Assembly {
            grid,
            n_modes: traces.n,
            f_grid,
        }
    }

    #[inline]
    fn interior(&self, i: usize, j: usize) -> bool {
        i >= 1 && j >= 1 && i <= self.grid.n - 2 && j <= self.grid.n - 2
    }

    #[inline]
    fn col(&self, i: usize, j: usize, m: usize) -> usize {
        let ni = self.grid.n - 2;
        ((j - 1) * ni + (i - 1)) * self.n_modes + m
    }

    fn n_cols(&self) -> usize {
        let ni = self.grid.n - 2;
        ni * ni * self.n_modes
    }

    /// Push one residual row given stencil entries over (i, j, mode);
    /// boundary references move to the right-hand side.
    fn push(
        &self,
        rows: &mut SparseRows,
        rhs: &mut Vec<Complex64>,
        entries: &[(usize, usize, usize, Complex64)],
        mut rhs_val: Complex64,
        buf: &mut Vec<(usize, Complex64)>,
    ) {
        buf.clear();
        for &(i, j, m, v) in entries {
            if self.interior(i, j) {
                buf.push((self.col(i, j, m), v));
            } else {
                rhs_val -= v * self.f_grid[m][[i, j]];
            }
        }
        rows.push_row(buf);
        rhs.push(rhs_val);
    }

    /// Neumann penalty rows for every mode at every non-corner boundary
    /// node: √(nw·h)·(∂_ν φ_m - G_m) with the second-order one-sided stencil.
    fn neumann_rows(
        &self,
        traces: &FourierTraces,
        nw: f64,
        rows: &mut SparseRows,
        rhs: &mut Vec<Complex64>,
    ) {
        let n = self.grid.n;
        let h = self.grid.h;
        let scale = (nw * h).sqrt();
        let inv2h = 1.0 / (2.0 * h);
        let mut buf = Vec::with_capacity(2);
        for (b, node) in self.grid.boundary_walk().iter().enumerate() {
            if node.is_corner {
                continue;
            }
            let (i, j) = (node.i, node.j);
            // (p1, p2) are the first and second interior nodes along the
            // inward normal; ∂_ν φ = (3 φ_b - 4 φ_1 + φ_2)/(2h)
            let (p1, p2) = if i == 0 {
                ((1, j), (2, j))
            } else if i == n - 1 {
                ((n - 2, j), (n - 3, j))
            } else if j == 0 {
                ((i, 1), (i, 2))
            } else {
                ((i, n - 2), (i, n - 3))
            };
            for m in 0..self.n_modes {
                let rhs_val = scale
                    * (traces.g[m][b] - 3.0 * self.f_grid[m][[i, j]] * inv2h);
                let entries = [
                    (p1.0, p1.1, m, Complex64::new(-4.0 * inv2h * scale, 0.0)),
                    (p2.0, p2.1, m, Complex64::new(inv2h * scale, 0.0)),
                ];
                self.push(rows, rhs, &entries, rhs_val, &mut buf);
            }
        }
    }

    /// Discrete-H² regularizer rows: values, first and second central
    /// differences at interior nodes, each scaled by √ε·h.
    fn regularizer_rows(&self, epsilon: f64, rows: &mut SparseRows, rhs: &mut Vec<Complex64>) {
        let n = self.grid.n;
        let h = self.grid.h;
        let se = epsilon.sqrt() * h;
        let inv2h = se / (2.0 * h);
        let invh2 = se / (h * h);
        let mut buf = Vec::with_capacity(3);
        let one = Complex64::new(se, 0.0);
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                for m in 0..self.n_modes {
                    self.push(rows, rhs, &[(i, j, m, one)], Complex64::default(), &mut buf);
                    self.push(
                        rows,
                        rhs,
                        &[
                            (i + 1, j, m, Complex64::new(inv2h, 0.0)),
                            (i - 1, j, m, Complex64::new(-inv2h, 0.0)),
                        ],
                        Complex64::default(),
                        &mut buf,
                    );
                    self.push(
                        rows,
                        rhs,
                        &[
                            (i, j + 1, m, Complex64::new(inv2h, 0.0)),
                            (i, j - 1, m, Complex64::new(-inv2h, 0.0)),
                        ],
                        Complex64::default(),
                        &mut buf,
                    );
                    self.push(
                        rows,
                        rhs,
                        &[
                            (i + 1, j, m, Complex64::new(invh2, 0.0)),
                            (i, j, m, Complex64::new(-2.0 * invh2, 0.0)),
                            (i - 1, j, m, Complex64::new(invh2, 0.0)),
                        ],
                        Complex64::default(),
                        &mut buf,
                    );
                    self.push(
                        rows,
                        rhs,
                        &[
                            (i, j + 1, m, Complex64::new(invh2, 0.0)),
                            (i, j, m, Complex64::new(-2.0 * invh2, 0.0)),
                            (i, j - 1, m, Complex64::new(invh2, 0.0)),
                        ],
                        Complex64::default(),
                        &mut buf,
                    );
                }
            }
        }
    }

    /// Embed an interior solution vector into full grids with the Dirichlet
    /// boundary values.
    fn embed(&self, x: &[Complex64]) -> FourierField {
        let n = self.grid.n;
        let mut out = self.f_grid.clone();
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                for (m, grid_m) in out.iter_mut().enumerate() {
                    grid_m[[i, j]] = x[self.col(i, j, m)];
                }
            }
        }
        out
    }
}

/// Central-difference gradient of each component at interior nodes.
fn interior_gradients(grid: &SpatialGrid, v: &FourierField) -> Vec<(ComplexGrid, ComplexGrid)> {
    let n = grid.n;
    let inv2h = 1.0 / (2.0 * grid.h);
    v.iter()
        .map(|vm| {
            let mut gx = ComplexGrid::zeros((n, n));
            let mut gy = ComplexGrid::zeros((n, n));
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    gx[[i, j]] = (vm[[i + 1, j]] - vm[[i - 1, j]]) * inv2h;
                    gy[[i, j]] = (vm[[i, j + 1]] - vm[[i, j - 1]]) * inv2h;
                }
            }
            (gx, gy)
        })
        .collect()
}

/// One weighted least-squares solve shared by `initial_guess` (plain
/// Laplacian rows, unit weight) and `picard_step` (full coupled rows).
fn solve_step(
    grid: &SpatialGrid,
    traces: &FourierTraces,
    basis: Option<&BasisSet>,
    weight: &ScalarGrid,
    params: &CarlemanParams,
    v_prev: Option<&FourierField>,
) -> Result<FourierField> {
    let asm = Assembly::new(grid, traces);
    let n = grid.n;
    let n_modes = asm.n_modes;
    let h = grid.h;
    let h2 = h * h;
    let inv2h = 1.0 / (2.0 * h);
    let nw = resolved_neumann_weight(params, weight);

    // gradient of the frozen iterate, for the nonlinear coupling
    let grads = v_prev.map(|v| interior_gradients(grid, v));

    // PDE residual row blocks per interior node, built in parallel into
    // disjoint slots
    let ni = n - 2;
    type RowBlock = (Vec<(usize, Complex64)>, Complex64);
    let node_rows: Vec<Vec<RowBlock>> = exec::map_indexed(ni * ni, |node| {
        let i = node % ni + 1;
        let j = node / ni + 1;
        let wq = weight[[i, j]].sqrt() * h;
        let mut out: Vec<RowBlock> = Vec::with_capacity(n_modes);
        match basis {
            Some(basis) => {
                // coupling coefficients at this node
                let mut d = vec![[Complex64::default(); 2]; n_modes * n_modes];
                if let (Some(grads), Some(_)) = (grads.as_ref(), v_prev) {
                    for m in 0..n_modes {
                        for nn in 0..n_modes {
                            let mut dx = Complex64::default();
                            let mut dy = Complex64::default();
                            for (l, g) in grads.iter().enumerate() {
                                let a = basis.a_coef(m, nn, l);
                                dx += a * g.0[[i, j]];
                                dy += a * g.1[[i, j]];
                            }
                            d[m * n_modes + nn] = [dx, dy];
                        }
                    }
                }
                for m in 0..n_modes {
                    let mut entries: Vec<(usize, Complex64)> = Vec::with_capacity(5 * n_modes);
                    let mut rhs_val = Complex64::default();
                    for nn in 0..n_modes {
                        let s = basis.s[m][nn] / h2 * wq;
                        let cvec = d[m * n_modes + nn];
                        let cx = (basis.b[m][nn][0] + cvec[0]) * inv2h * wq;
                        let cy = (basis.b[m][nn][1] + cvec[1]) * inv2h * wq;
                        let stencil = [
                            (i, j, Complex64::new(-4.0, 0.0) * s),
                            (i + 1, j, s + cx),
                            (i - 1, j, s - cx),
                            (i, j + 1, s + cy),
                            (i, j - 1, s - cy),
                        ];
                        for (si, sj, val) in stencil {
                            if asm.interior(si, sj) {
                                entries.push((asm.col(si, sj, nn), val));
                            } else {
                                rhs_val -= val * asm.f_grid[nn][[si, sj]];
                            }
                        }
                    }
                    out.push((entries, rhs_val));
                }
            }
            None => {
                // initial guess: uncoupled Laplacian residual per mode
                let s = wq / h2;
                for m in 0..n_modes {
                    let mut entries: Vec<(usize, Complex64)> = Vec::with_capacity(5);
                    let mut rhs_val = Complex64::default();
                    let stencil = [
                        (i, j, Complex64::new(-4.0 * s, 0.0)),
                        (i + 1, j, Complex64::new(s, 0.0)),
                        (i - 1, j, Complex64::new(s, 0.0)),
                        (i, j + 1, Complex64::new(s, 0.0)),
                        (i, j - 1, Complex64::new(s, 0.0)),
                    ];
                    for (si, sj, val) in stencil {
                        if asm.interior(si, sj) {
                            entries.push((asm.col(si, sj, m), val));
                        } else {
                            rhs_val -= val * asm.f_grid[m][[si, sj]];
                        }
                    }
                    out.push((entries, rhs_val));
                }
            }
        }
        out
    });

    let mut rows = SparseRows::with_capacity(
        asm.n_cols(),
        ni * ni * n_modes,
        ni * ni * n_modes * 5 * n_modes,
    );
    let mut rhs: Vec<Complex64> = Vec::with_capacity(ni * ni * n_modes);
    for block in &node_rows {
        for (entries, rhs_val) in block {
            rows.push_row(entries);
            rhs.push(*rhs_val);
        }
    }
    asm.neumann_rows(traces, nw, &mut rows, &mut rhs);
    // regularizer rows carry boundary constants on their right-hand sides,
    // so they live in the main stack rather than the homogeneous slot
    asm.regularizer_rows(params.epsilon, &mut rows, &mut rhs);

    let empty_reg = SparseRows::new(asm.n_cols());
    let (x, _residual) = solve_weighted_least_squares(&rows, &rhs, &empty_reg)?;
    Ok(asm.embed(&x))
}

/// Quasi-reversibility initial guess: per component, minimize
/// ‖Δφ_m‖² + ε‖φ_m‖²_{H²} with the Cauchy data (or the zero field).
pub fn initial_guess(
    traces: &FourierTraces,
    grid: &SpatialGrid,
    params: &CarlemanParams,
    mode: InitMode,
) -> Result<FourierField> {
    match mode {
        InitMode::Zero => Ok(vec![ComplexGrid::zeros((grid.n, grid.n)); traces.n]),
        InitMode::Qr => {
            let unit = ScalarGrid::from_elem((grid.n, grid.n), 1.0);
            solve_step(grid, traces, None, &unit, params, None)
        }
    }
}

/// One Picard step: weighted least squares with the gradient coupling
/// frozen at `v_prev`.
pub fn picard_step(
    v_prev: &FourierField,
    traces: &FourierTraces,
    basis: &BasisSet,
    weight: &ScalarGrid,
    params: &CarlemanParams,
    grid: &SpatialGrid,
) -> Result<FourierField> {
    solve_step(grid, traces, Some(basis), weight, params, Some(v_prev))
}

/// Full contraction run record.
#[derive(Clone, Debug)]
pub struct ContractionRun {
    pub params: CarlemanParams,
    pub iterations: usize,
    /// ‖v^(p) - v^(p-1)‖ / ‖v^(p)‖ for p = 1..=P.
    pub diffs: Vec<f64>,
    /// Geometric mean of successive diff ratios over p ≥ 2; NaN for P < 3.
    pub rate_estimate: f64,
    pub field: FourierField,
    /// Stored iterates when requested.
    pub iterates: Option<Vec<FourierField>>,
    pub warnings: Vec<String>,
}

fn stack_diff_norm(grid: &SpatialGrid, a: &FourierField, b: &FourierField) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(am, bm)| {
            am.iter()
                .zip(bm.iter())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
        })
        .sum();
    (sum * grid.h * grid.h).sqrt()
}

/// Iterate `picard_step` P times from the initial guess, recording the
/// consecutive-difference sequence and the fitted geometric rate.
pub fn run_contraction(
    traces: &FourierTraces,
    basis: &BasisSet,
    grid: &SpatialGrid,
    params: &CarlemanParams,
    iterations: usize,
    init_mode: InitMode,
    keep_iterates: bool,
) -> Result<ContractionRun> {
    assert!(iterations >= 1);
    params.validate()?;
    let weight = carleman_weight(grid, params)?;
    let mut v = initial_guess(traces, grid, params, init_mode)?;
    let mut diffs = Vec::with_capacity(iterations);
    let mut iterates = keep_iterates.then(|| vec![v.clone()]);
    let mut warnings = Vec::new();
    let mut prev_norm = grid.l2_norm_stack(&v);
    for p in 0..iterations {
        let next = picard_step(&v, traces, basis, &weight, params, grid)?;
        let num = stack_diff_norm(grid, &next, &v);
        let den = grid.l2_norm_stack(&next);
        let diff = num / den;
        if !diff.is_finite() {
            return Err(Error::NonFinite {
                context: "consecutive difference",
                index: p + 1,
            });
        }
        if prev_norm > 0.0 && den > 10.0 * prev_norm {
            warnings.push(format!(
                "iterate norm grew {:.1}x at step {} (admissible-set monitor)",
                den / prev_norm,
                p + 1
            ));
        }
        prev_norm = den;
        diffs.push(diff);
        if let Some(store) = iterates.as_mut() {
            store.push(next.clone());
        }
        v = next;
    }
    let rate_estimate = if iterations >= 3 {
        let ratios: Vec<f64> = (1..iterations)
            .map(|p| diffs[p] / diffs[p - 1])
            .collect();
        let log_sum: f64 = ratios[1..].iter().map(|r| r.ln()).sum();
        (log_sum / (ratios.len() - 1) as f64).exp()
    } else {
        f64::NAN
    };
    Ok(ContractionRun {
        params: params.clone(),
        iterations,
        diffs,
        rate_estimate,
        field: v,
        iterates,
        warnings,
    })
}

/// Numerical check of the Carleman estimate on a compactly supported test
/// field: R(λ) = ∫W|Δv|² / (λ∫W|∇v|² + λ³∫W|v|²). `None` marks a
/// degenerate (zero) field.
pub fn carleman_diagnostic(
    test_field: &ScalarGrid,
    grid: &SpatialGrid,
    params: &CarlemanParams,
    lambdas: &[f64],
) -> Result<Vec<(f64, Option<f64>)>> {
    let n = grid.n;
    let h = grid.h;
    // precondition: v and dv/dnu vanish on the boundary
    let mut trace_residual: f64 = 0.0;
    for node in grid.boundary_walk() {
        trace_residual = trace_residual.max(test_field[[node.i, node.j]].abs());
        if node.is_corner {
            continue;
        }
        let (i, j) = (node.i, node.j);
        let dnu = if i == 0 {
            (3.0 * test_field[[0, j]] - 4.0 * test_field[[1, j]] + test_field[[2, j]]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * test_field[[n - 1, j]] - 4.0 * test_field[[n - 2, j]]
                + test_field[[n - 3, j]])
                / (2.0 * h)
        } else if j == 0 {
            (3.0 * test_field[[i, 0]] - 4.0 * test_field[[i, 1]] + test_field[[i, 2]]) / (2.0 * h)
        } else {
            (3.0 * test_field[[i, n - 1]] - 4.0 * test_field[[i, n - 2]]
                + test_field[[i, n - 3]])
                / (2.0 * h)
        };
        trace_residual = trace_residual.max(dnu.abs());
    }
    if trace_residual > 1e-10 {
        return Err(Error::DiagnosticPrecondition {
            residual: trace_residual,
        });
    }
    let degenerate = test_field.iter().all(|&v| v == 0.0);
    let r_min = min_radius(grid, params);
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if degenerate {
            out.push((lambda, None));
            continue;
        }
        let p = CarlemanParams {
            lambda,
            ..params.clone()
        };
        let mut num = 0.0;
        let mut grad_term = 0.0;
        let mut val_term = 0.0;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let w = weight_at(grid.x(i), grid.x(j), &p, r_min)?;
                let lap = (test_field[[i + 1, j]] + test_field[[i - 1, j]]
                    + test_field[[i, j + 1]]
                    + test_field[[i, j - 1]]
                    - 4.0 * test_field[[i, j]])
                    / (h * h);
                let gx = (test_field[[i + 1, j]] - test_field[[i - 1, j]]) / (2.0 * h);
                let gy = (test_field[[i, j + 1]] - test_field[[i, j - 1]]) / (2.0 * h);
                num += w * lap * lap * h * h;
                grad_term += w * (gx * gx + gy * gy) * h * h;
                val_term += w * test_field[[i, j]] * test_field[[i, j]] * h * h;
            }
        }
        let denom = lambda * grad_term + lambda.powi(3) * val_term;
        out.push((lambda, Some(num / denom)));
    }
    Ok(out)
}
