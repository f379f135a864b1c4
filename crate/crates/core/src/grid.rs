//! Uniform spatial grid over Ω̄ = [-1, 1]² and field helpers.

use ndarray::Array2;
use num_complex::Complex64;

/// Real field sampled on the grid, indexed `[i, j]` with x = x_i, y = x_j.
pub type ScalarGrid = Array2<f64>;
/// Complex field sampled on the grid.
pub type ComplexGrid = Array2<Complex64>;

/// Uniform n×n grid on [-1, 1]².
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    pub n: usize,
    pub h: f64,
    pub coords: Vec<f64>,
}

/// Position of a boundary node on the counterclockwise walk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryNode {
    pub i: usize,
    pub j: usize,
    /// Outward unit normal; corners get the normalized average of the two
    /// adjacent edge normals.
    pub normal: [f64; 2],
    pub is_corner: bool,
}

impl SpatialGrid {
    pub fn new(n: usize) -> SpatialGrid {
        assert!(n >= 4, "grid too small");
        let h = 2.0 / (n - 1) as f64;
        let coords = (0..n).map(|i| -1.0 + i as f64 * h).collect();
        SpatialGrid { n, h, coords }
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.coords[i]
    }

    /// Counterclockwise boundary walk starting at (-1, -1): bottom edge,
    /// right edge, top edge, left edge. 4(n-1) nodes total.
    pub fn boundary_walk(&self) -> Vec<BoundaryNode> {
        let n = self.n;
        let mut out = Vec::with_capacity(4 * (n - 1));
        let mut push = |i: usize, j: usize| {
            let mut nx = 0.0f64;
            let mut ny = 0.0f64;
            if i == 0 {
                nx -= 1.0;
            }
            if i == n - 1 {
                nx += 1.0;
            }
            if j == 0 {
                ny -= 1.0;
            }
            if j == n - 1 {
                ny += 1.0;
            }
            let len = (nx * nx + ny * ny).sqrt();
            out.push(BoundaryNode {
                i,
                j,
                normal: [nx / len, ny / len],
                is_corner: (i == 0 || i == n - 1) && (j == 0 || j == n - 1),
            });
        };
        for i in 0..n {
            push(i, 0);
        }
        for j in 1..n {
            push(n - 1, j);
        }
        for i in (0..n - 1).rev() {
            push(i, n - 1);
        }
        for j in (1..n - 1).rev() {
            push(0, j);
        }
        out
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    /// L²(Ω) norm of a complex field (h²-weighted node sum).
    pub fn l2_norm(&self, field: &ComplexGrid) -> f64 {
        (field.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.h * self.h).sqrt()
    }

    /// L²(Ω) norm of a stack of complex fields.
    pub fn l2_norm_stack(&self, fields: &[ComplexGrid]) -> f64 {
        let sum: f64 = fields
            .iter()
            .map(|f| f.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        (sum * self.h * self.h).sqrt()
    }
}

/// Second-order gradient of a complex field: central in the interior,
/// one-sided (3-point) on the boundary.
pub fn gradient(grid: &SpatialGrid, f: &ComplexGrid) -> (ComplexGrid, ComplexGrid) {
    let n = grid.n;
    let h = grid.h;
    let mut gx = ComplexGrid::zeros((n, n));
    let mut gy = ComplexGrid::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            gx[[i, j]] = if i == 0 {
                (-3.0 * f[[0, j]] + 4.0 * f[[1, j]] - f[[2, j]]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * f[[n - 1, j]] - 4.0 * f[[n - 2, j]] + f[[n - 3, j]]) / (2.0 * h)
            } else {
                (f[[i + 1, j]] - f[[i - 1, j]]) / (2.0 * h)
            };
            gy[[i, j]] = if j == 0 {
                (-3.0 * f[[i, 0]] + 4.0 * f[[i, 1]] - f[[i, 2]]) / (2.0 * h)
            } else if j == n - 1 {
                (3.0 * f[[i, n - 1]] - 4.0 * f[[i, n - 2]] + f[[i, n - 3]]) / (2.0 * h)
            } else {
                (f[[i, j + 1]] - f[[i, j - 1]]) / (2.0 * h)
            };
        }
    }
    (gx, gy)
}

/// Second-order Laplacian: 5-point in the interior, one-sided 4-point
/// second differences at the boundary.
pub fn laplacian(grid: &SpatialGrid, f: &ComplexGrid) -> ComplexGrid {
    let n = grid.n;
    let h2 = grid.h * grid.h;
    let mut out = ComplexGrid::zeros((n, n));
    let dxx = |i: usize, j: usize| {
        if i == 0 {
            (2.0 * f[[0, j]] - 5.0 * f[[1, j]] + 4.0 * f[[2, j]] - f[[3, j]]) / h2
        } else if i == n - 1 {
            (2.0 * f[[n - 1, j]] - 5.0 * f[[n - 2, j]] + 4.0 * f[[n - 3, j]] - f[[n - 4, j]]) / h2
        } else {
            (f[[i + 1, j]] - 2.0 * f[[i, j]] + f[[i - 1, j]]) / h2
        }
    };
    let dyy = |i: usize, j: usize| {
        if j == 0 {
            (2.0 * f[[i, 0]] - 5.0 * f[[i, 1]] + 4.0 * f[[i, 2]] - f[[i, 3]]) / h2
        } else if j == n - 1 {
            (2.0 * f[[i, n - 1]] - 5.0 * f[[i, n - 2]] + 4.0 * f[[i, n - 3]] - f[[i, n - 4]]) / h2
        } else {
            (f[[i, j + 1]] - 2.0 * f[[i, j]] + f[[i, j - 1]]) / h2
        }
    };
    for j in 0..n {
        for i in 0..n {
            out[[i, j]] = dxx(i, j) + dyy(i, j);
        }
    }
    out
}
