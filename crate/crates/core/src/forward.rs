//! Synthetic data generation: the Robin-truncated Helmholtz scattering
//! problem per incident angle, Cauchy-data extraction, and the
//! multiplicative noise model.

use crate::basis::AngularGrid;
use crate::error::Result;
use crate::exec;
use crate::grid::{ComplexGrid, ScalarGrid, SpatialGrid};
use crate::sparse::SparseLu;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Built-in test phantoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomId {
    Test1,
    Test2,
    Test3,
    Test4,
    /// Homogeneous background (c ≡ 1).
    Uniform,
    /// Two disks at the test-1 positions with a configurable contrast scale.
    Test1Scaled,
}

/// Geometry of one inclusion, used for scoring.
#[derive(Clone, Debug, Serialize)]
pub enum InclusionShape {
    Disk { center: [f64; 2], radius: f64 },
    Rect { center: [f64; 2], half: [f64; 2] },
    Square { center: [f64; 2], half: f64 },
    Annulus { inner: f64, outer: f64 },
}

impl InclusionShape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            InclusionShape::Disk { center, radius } => {
                (x - center[0]).powi(2) + (y - center[1]).powi(2) <= radius * radius
            }
            InclusionShape::Rect { center, half } => {
                (x - center[0]).abs() <= half[0] && (y - center[1]).abs() <= half[1]
            }
            InclusionShape::Square { center, half } => {
                (x - center[0]).abs().max((y - center[1]).abs()) <= half
            }
            InclusionShape::Annulus { inner, outer } => {
                let r2 = x * x + y * y;
                r2 > inner * inner && r2 < outer * outer
            }
        }
    }

    /// Distance from a point to the natural peak locus of the inclusion:
    /// the center for compact shapes, the centerline circle for the annulus.
    pub fn peak_offset(&self, x: f64, y: f64) -> f64 {
        match *self {
            InclusionShape::Disk { center, .. }
            | InclusionShape::Rect { center, .. }
            | InclusionShape::Square { center, .. } => {
                ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt()
            }
            InclusionShape::Annulus { inner, outer } => {
                ((x * x + y * y).sqrt() - 0.5 * (inner + outer)).abs()
            }
        }
    }

    /// Reference point used to partition the domain between inclusions.
    pub fn anchor(&self) -> [f64; 2] {
        match *self {
            InclusionShape::Disk { center, .. }
            | InclusionShape::Rect { center, .. }
            | InclusionShape::Square { center, .. } => center,
            InclusionShape::Annulus { .. } => [0.0, 0.0],
        }
    }
}

/// One labeled inclusion with its contrast value.
#[derive(Clone, Debug, Serialize)]
pub struct Inclusion {
    pub label: String,
    pub shape: InclusionShape,
    pub value: f64,
}

/// True dielectric constant field plus inclusion metadata.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub id: PhantomId,
    pub c: ScalarGrid,
    pub inclusions: Vec<Inclusion>,
}

/// Build a phantom on the given grid. `contrast_scale` rescales c - 1
/// (1.0 reproduces the published phantoms; only `Test1Scaled` uses it).
pub fn make_phantom(id: PhantomId, grid: &SpatialGrid, contrast_scale: f64) -> Phantom {
    let n = grid.n;
    let mut c = ScalarGrid::from_elem((n, n), 1.0);
    let mut inclusions = Vec::new();
    let scale = if id == PhantomId::Test1Scaled {
        contrast_scale
    } else {
        1.0
    };
    let mut paint = |c: &mut ScalarGrid, shape: &InclusionShape, value: f64| {
        for j in 0..n {
            for i in 0..n {
                if shape.contains(grid.x(i), grid.x(j)) {
                    c[[i, j]] = value;
                }
            }
        }
    };
    match id {
        PhantomId::Test1 | PhantomId::Test1Scaled => {
            let lower = InclusionShape::Disk {
                center: [-0.5, -0.5],
                radius: 0.2,
            };
            let upper = InclusionShape::Disk {
                center: [0.5, 0.5],
                radius: 0.2,
            };
            let v_lower = 1.0 + scale * 1.0;
            let v_upper = 1.0 + scale * 0.5;
            paint(&mut c, &lower, v_lower);
            paint(&mut c, &upper, v_upper);
            inclusions.push(Inclusion {
                label: "lower_disk".into(),
                shape: lower,
                value: v_lower,
            });
            inclusions.push(Inclusion {
                label: "upper_disk".into(),
                shape: upper,
                value: v_upper,
            });
        }
        PhantomId::Test2 => {
            // max{|x-0.5|/0.5, |y|/1.5} <= 0.3
            let rect = InclusionShape::Rect {
                center: [0.5, 0.0],
                half: [0.15, 0.45],
            };
            paint(&mut c, &rect, 2.0);
            inclusions.push(Inclusion {
                label: "rectangle".into(),
                shape: rect,
                value: 2.0,
            });
        }
        PhantomId::Test3 => {
            let sq = InclusionShape::Square {
                center: [0.0, 0.0],
                half: 0.09,
            };
            paint(&mut c, &sq, 2.5);
            inclusions.push(Inclusion {
                label: "square".into(),
                shape: sq,
                value: 2.5,
            });
        }
        PhantomId::Test4 => {
            let ring = InclusionShape::Annulus {
                inner: 0.5,
                outer: 0.7,
            };
            let disk = InclusionShape::Disk {
                center: [0.0, 0.0],
                radius: 0.2,
            };
            paint(&mut c, &ring, 1.5);
            paint(&mut c, &disk, 1.5);
            inclusions.push(Inclusion {
                label: "ring".into(),
                shape: ring,
                value: 1.5,
            });
            inclusions.push(Inclusion {
                label: "inner_disk".into(),
                shape: disk,
                value: 1.5,
            });
        }
        PhantomId::Uniform => {}
    }
    Phantom { id, c, inclusions }
}

/// Incident plane wave e^{ik θ̂·x} sampled on the grid.
pub fn incident_field(grid: &SpatialGrid, k: f64, theta: f64) -> ComplexGrid {
    let n = grid.n;
    let d = AngularGrid::direction(theta);
    ComplexGrid::from_shape_fn((n, n), |(i, j)| {
        (Complex64::new(0.0, k * (d[0] * grid.x(i) + d[1] * grid.x(j)))).exp()
    })
}

/// Factorized discrete Helmholtz operator with the Robin boundary
/// condition ∂_ν u_sc - ik u_sc folded in by ghost-node elimination.
///
/// The matrix depends on (grid, c, k) only, so one factorization serves all
/// incident angles.
pub struct HelmholtzRobinSolver<'a> {
    grid: &'a SpatialGrid,
    k: f64,
    lu: SparseLu,
}

impl<'a> HelmholtzRobinSolver<'a> {
    pub fn new(grid: &'a SpatialGrid, c: &ScalarGrid, k: f64) -> Result<HelmholtzRobinSolver<'a>> {
        let n = grid.n;
        let h = grid.h;
        let h2 = h * h;
        let idx = |i: usize, j: usize| j * n + i;
        let mut trips: Vec<(usize, usize, Complex64)> = Vec::with_capacity(5 * n * n);
        for j in 0..n {
            for i in 0..n {
                let p = idx(i, j);
                let mut diag = Complex64::new(-4.0 / h2 + k * k * c[[i, j]], 0.0);
                if i == 0 {
                    trips.push((p, idx(1, j), Complex64::new(2.0 / h2, 0.0)));
                    diag += Complex64::new(0.0, 2.0 * k / h);
                } else if i == n - 1 {
                    trips.push((p, idx(n - 2, j), Complex64::new(2.0 / h2, 0.0)));
                    diag += Complex64::new(0.0, 2.0 * k / h);
                } else {
                    trips.push((p, idx(i - 1, j), Complex64::new(1.0 / h2, 0.0)));
                    trips.push((p, idx(i + 1, j), Complex64::new(1.0 / h2, 0.0)));
                }
                if j == 0 {
                    trips.push((p, idx(i, 1), Complex64::new(2.0 / h2, 0.0)));
                    diag += Complex64::new(0.0, 2.0 * k / h);
                } else if j == n - 1 {
                    trips.push((p, idx(i, n - 2), Complex64::new(2.0 / h2, 0.0)));
                    diag += Complex64::new(0.0, 2.0 * k / h);
                } else {
                    trips.push((p, idx(i, j - 1), Complex64::new(1.0 / h2, 0.0)));
                    trips.push((p, idx(i, j + 1), Complex64::new(1.0 / h2, 0.0)));
                }
                trips.push((p, p, diag));
            }
        }
        let lu = SparseLu::from_triplets(n * n, &trips, "forward Helmholtz system")?;
        Ok(HelmholtzRobinSolver { grid, k, lu })
    }

    /// Solve for u_sc with a general volume source and Robin data
    /// r = ∂_ν u_sc - ik u_sc per boundary node and axis (used by the
    /// manufactured-solution tests; the physical problem has r ≡ 0).
    pub fn solve_general(
        &self,
        volume_rhs: &ComplexGrid,
        robin_rhs: Option<&dyn Fn(f64, f64, [f64; 2]) -> Complex64>,
    ) -> ComplexGrid {
        let n = self.grid.n;
        let h = self.grid.h;
        let mut rhs: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for i in 0..n {
                let mut v = volume_rhs[[i, j]];
                if let Some(r) = robin_rhs {
                    let (x, y) = (self.grid.x(i), self.grid.x(j));
                    if i == 0 {
                        v -= 2.0 / h * r(x, y, [-1.0, 0.0]);
                    }
                    if i == n - 1 {
                        v -= 2.0 / h * r(x, y, [1.0, 0.0]);
                    }
                    if j == 0 {
                        v -= 2.0 / h * r(x, y, [0.0, -1.0]);
                    }
                    if j == n - 1 {
                        v -= 2.0 / h * r(x, y, [0.0, 1.0]);
                    }
                }
                rhs[j * n + i] = v;
            }
        }
        let sol = self.lu.solve(&rhs);
        ComplexGrid::from_shape_fn((n, n), |(i, j)| sol[j * n + i])
    }

    /// Total field u = u_sc + u_inc for one incident angle.
    pub fn solve_total(&self, c: &ScalarGrid, theta: f64) -> ComplexGrid {
        let n = self.grid.n;
        let uinc = incident_field(self.grid, self.k, theta);
        let k2 = self.k * self.k;
        let vol = ComplexGrid::from_shape_fn((n, n), |(i, j)| {
            -k2 * (c[[i, j]] - 1.0) * uinc[[i, j]]
        });
        let usc = self.solve_general(&vol, None);
        usc + &uinc
    }
}

/// Measured Cauchy pairs on ∂Ω × Θ.
#[derive(Clone, Debug)]
pub struct BoundaryDataset {
    /// u at the boundary walk nodes, `[node][angle]`.
    pub f: Vec<Vec<Complex64>>,
    /// ∂_ν u at the boundary walk nodes; corner entries are unset (zero) and
    /// excluded from every consumer.
    pub g: Vec<Vec<Complex64>>,
    pub k: f64,
    pub delta: f64,
    pub seed: u64,
    pub noise_applied: bool,
    pub grid: SpatialGrid,
    pub angular_n: usize,
}

/// Solve the forward problem for every angle. The factorization is shared
/// read-only across angles; per-angle solves run in parallel into disjoint
/// slots.
pub fn solve_forward_all(
    grid: &SpatialGrid,
    phantom: &Phantom,
    k: f64,
    angular: &AngularGrid,
) -> Result<Vec<ComplexGrid>> {
    let solver = HelmholtzRobinSolver::new(grid, &phantom.c, k)?;
    Ok(exec::map_indexed(angular.n_theta, |t| {
        solver.solve_total(&phantom.c, angular.thetas[t])
    }))
}

/// Second-order one-sided normal derivative at a non-corner boundary node
/// of the fine solution grid, evaluated at a (possibly coarser) boundary
/// node through the index stride.
fn one_sided_normal(u: &ComplexGrid, nf: usize, h: f64, fi: usize, fj: usize) -> Complex64 {
    if fi == 0 {
        (3.0 * u[[0, fj]] - 4.0 * u[[1, fj]] + u[[2, fj]]) / (2.0 * h)
    } else if fi == nf - 1 {
        (3.0 * u[[nf - 1, fj]] - 4.0 * u[[nf - 2, fj]] + u[[nf - 3, fj]]) / (2.0 * h)
    } else if fj == 0 {
        (3.0 * u[[fi, 0]] - 4.0 * u[[fi, 1]] + u[[fi, 2]]) / (2.0 * h)
    } else {
        (3.0 * u[[fi, nf - 1]] - 4.0 * u[[fi, nf - 2]] + u[[fi, nf - 3]]) / (2.0 * h)
    }
}

/// Extract noiseless Cauchy data on `target` grid boundary nodes from
/// fields solved on `data_grid` (which must nest the target grid).
/// Corners carry f only; their g slots stay zero.
pub fn extract_cauchy(
    data_grid: &SpatialGrid,
    target: &SpatialGrid,
    fields: &[ComplexGrid],
    angular: &AngularGrid,
    k: f64,
) -> BoundaryDataset {
    assert_eq!(fields.len(), angular.n_theta);
    assert!(
        (data_grid.n - 1) % (target.n - 1) == 0,
        "data grid must nest the inversion grid"
    );
    let stride = (data_grid.n - 1) / (target.n - 1);
    let walk = target.boundary_walk();
    let mut f = vec![vec![Complex64::new(0.0, 0.0); angular.n_theta]; walk.len()];
    let mut g = vec![vec![Complex64::new(0.0, 0.0); angular.n_theta]; walk.len()];
    for (t, u) in fields.iter().enumerate() {
        for (b, node) in walk.iter().enumerate() {
            let (fi, fj) = (node.i * stride, node.j * stride);
            f[b][t] = u[[fi, fj]];
            if !node.is_corner {
                g[b][t] = one_sided_normal(u, data_grid.n, data_grid.h, fi, fj);
            }
        }
    }
    BoundaryDataset {
        f,
        g,
        k,
        delta: 0.0,
        seed: 0,
        noise_applied: false,
        grid: target.clone(),
        angular_n: angular.n_theta,
    }
}

/// Multiplicative noise: each sample scaled by (1 + δ·rand) with rand a
/// complex number whose real and imaginary parts are independently uniform
/// on [-1, 1]. δ = 0 returns the input bit-for-bit. Fails (regenerating is
/// the caller's business) only if a noisy f sample lands exactly on zero.
pub fn add_noise(data: &BoundaryDataset, delta: f64, seed: u64) -> Result<BoundaryDataset> {
    let mut out = data.clone();
    out.delta = delta;
    out.seed = seed;
    if delta == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rng: &mut ChaCha8Rng| {
        let re: f64 = rng.gen_range(-1.0..=1.0);
        let im: f64 = rng.gen_range(-1.0..=1.0);
        Complex64::new(re, im)
    };
    for row in out.f.iter_mut() {
        for v in row.iter_mut() {
            *v *= 1.0 + delta * draw(&mut rng);
            if v.norm() == 0.0 {
                return Err(crate::error::Error::LogUndefined { value: 0.0 });
            }
        }
    }
    for row in out.g.iter_mut() {
        for v in row.iter_mut() {
            *v *= 1.0 + delta * draw(&mut rng);
        }
    }
    out.noise_applied = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn phantom_values_match_published_formulas() {
        let grid = SpatialGrid::new(64);
        let t1 = make_phantom(PhantomId::Test1, &grid, 1.0);
        // nearest node to (-0.5, -0.5)
        let at = |ph: &Phantom, x: f64, y: f64| {
            let i = ((x + 1.0) / grid.h).round() as usize;
            let j = ((y + 1.0) / grid.h).round() as usize;
            ph.c[[i, j]]
        };
        assert_eq!(at(&t1, -0.5, -0.5), 2.0);
        assert_eq!(at(&t1, 0.5, 0.5), 1.5);
        assert_eq!(t1.c[[0, 0]], 1.0);
        let t3 = make_phantom(PhantomId::Test3, &grid, 1.0);
        assert_eq!(at(&t3, 0.0, 0.0), 2.5);
        let t4 = make_phantom(PhantomId::Test4, &grid, 1.0);
        assert_eq!(at(&t4, 0.6, 0.0), 1.5);
        assert_eq!(at(&t4, 0.0, 0.0), 1.5);
        assert_eq!(at(&t4, 0.35, 0.0), 1.0);
        // c >= 1 everywhere, c = 1 on the boundary
        for ph in [&t1, &t3, &t4] {
            assert!(ph.c.iter().all(|&v| v >= 1.0));
            for b in grid.boundary_walk() {
                assert_eq!(ph.c[[b.i, b.j]], 1.0);
            }
        }
    }

    #[test]
    fn zero_contrast_scatters_nothing() {
        let grid = SpatialGrid::new(32);
        let phantom = make_phantom(PhantomId::Uniform, &grid, 1.0);
        let angular = AngularGrid::new(4);
        let k = 3.0 * PI;
        let fields = solve_forward_all(&grid, &phantom, k, &angular).unwrap();
        for (t, u) in fields.iter().enumerate() {
            let uinc = incident_field(&grid, k, angular.thetas[t]);
            let max = (u - &uinc).iter().fold(0.0f64, |a, v| a.max(v.norm()));
            assert!(max <= 1e-10, "theta {t}: |u_sc| = {max:.3e}");
        }
    }

    #[test]
    fn manufactured_solution_converges_second_order() {
        // w = exp(a x + b y) with complex a, b: source and Robin data known
        let a = Complex64::new(0.7, 0.2);
        let b = Complex64::new(-0.3, 0.5);
        let k = 2.0 * PI;
        let mut errs = Vec::new();
        for n in [32, 64] {
            let grid = SpatialGrid::new(n);
            let c = ScalarGrid::from_elem((n, n), 1.0);
            let solver = HelmholtzRobinSolver::new(&grid, &c, k).unwrap();
            let w = |x: f64, y: f64| (a * x + b * y).exp();
            let vol = ComplexGrid::from_shape_fn((n, n), |(i, j)| {
                let (x, y) = (grid.x(i), grid.x(j));
                (a * a + b * b + k * k) * w(x, y)
            });
            let robin = move |x: f64, y: f64, nu: [f64; 2]| {
                (nu[0] * a + nu[1] * b - Complex64::new(0.0, k)) * w(x, y)
            };
            let uh = solver.solve_general(&vol, Some(&robin));
            let mut err: f64 = 0.0;
            for j in 0..n {
                for i in 0..n {
                    err = err.max((uh[[i, j]] - w(grid.x(i), grid.x(j))).norm());
                }
            }
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(
            (1.8..=2.2).contains(&order),
            "order {order:.2}, errors {errs:?}"
        );
    }

    #[test]
    fn plane_wave_normal_derivative() {
        // c = 1: g* = ik (theta_hat . nu) e^{ik theta_hat . x} + O(h^2)
        let grid = SpatialGrid::new(48);
        let phantom = make_phantom(PhantomId::Uniform, &grid, 1.0);
        let angular = AngularGrid::new(6);
        let k = 2.0 * PI;
        let fields = solve_forward_all(&grid, &phantom, k, &angular).unwrap();
        let data = extract_cauchy(&grid, &grid, &fields, &angular, k);
        let walk = grid.boundary_walk();
        let tol = 8.0 * grid.h * grid.h * k * k * k;
        for (t, &theta) in angular.thetas.iter().enumerate() {
            let d = AngularGrid::direction(theta);
            for (bidx, node) in walk.iter().enumerate() {
                // f = u_inc exactly
                let (x, y) = (grid.x(node.i), grid.x(node.j));
                let uinc = Complex64::new(0.0, k * (d[0] * x + d[1] * y)).exp();
                assert!((data.f[bidx][t] - uinc).norm() < 1e-9);
                if node.is_corner {
                    continue;
                }
                let gex = Complex64::new(0.0, k * (d[0] * node.normal[0] + d[1] * node.normal[1]))
                    * uinc;
                assert!(
                    (data.g[bidx][t] - gex).norm() < tol,
                    "node {bidx} angle {t}: {:?} vs {gex:?}",
                    data.g[bidx][t]
                );
            }
        }
    }

    #[test]
    fn noise_deterministic_and_zero_delta_identity() {
        let grid = SpatialGrid::new(24);
        let phantom = make_phantom(PhantomId::Test1, &grid, 1.0);
        let angular = AngularGrid::new(8);
        let fields = solve_forward_all(&grid, &phantom, 2.0 * PI, &angular).unwrap();
        let data = extract_cauchy(&grid, &grid, &fields, &angular, 2.0 * PI);
        let a = add_noise(&data, 0.1, 7).unwrap();
        let b = add_noise(&data, 0.1, 7).unwrap();
        assert_eq!(a.f, b.f);
        assert_eq!(a.g, b.g);
        let z = add_noise(&data, 0.0, 7).unwrap();
        assert_eq!(z.f, data.f);
        assert!(!z.noise_applied);
    }

    #[test]
    fn noise_magnitude_matches_expected_modulus() {
        // E|rand| for the uniform complex square, by quadrature
        let m = 800;
        let mut e_abs = 0.0;
        for i in 0..m {
            for j in 0..m {
                let x = -1.0 + (i as f64 + 0.5) * 2.0 / m as f64;
                let y = -1.0 + (j as f64 + 0.5) * 2.0 / m as f64;
                e_abs += (x * x + y * y).sqrt();
            }
        }
        e_abs /= (m * m) as f64;
        let grid = SpatialGrid::new(40);
        let phantom = make_phantom(PhantomId::Test1, &grid, 1.0);
        let angular = AngularGrid::new(80); // 156 * 80 = 12480 samples
        let fields = solve_forward_all(&grid, &phantom, 2.0 * PI, &angular).unwrap();
        let data = extract_cauchy(&grid, &grid, &fields, &angular, 2.0 * PI);
        let noisy = add_noise(&data, 0.1, 3).unwrap();
        let mut acc = 0.0;
        let mut count = 0usize;
        for (row_n, row_c) in noisy.f.iter().zip(&data.f) {
            for (vn, vc) in row_n.iter().zip(row_c) {
                acc += (vn / vc - 1.0).norm();
                count += 1;
            }
        }
        let measured = acc / count as f64;
        let expected = 0.1 * e_abs;
        assert!(
            (measured / expected - 1.0).abs() < 0.05,
            "measured {measured:.5}, expected {expected:.5}"
        );
    }
}
