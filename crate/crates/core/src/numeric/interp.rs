//! Piecewise-linear interpolation on a strictly increasing grid, flat outside it.

/// Index `i` and weight `w` such that `x ≈ (1-w)·grid[i] + w·grid[i+1]`.
/// Outside the grid the weight is clamped, giving constant extrapolation.
pub fn bracket(grid: &[f64], x: f64) -> (usize, f64) {
    let g = grid.len();
    if g < 2 || x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[g - 1] {
        return (g - 2, 1.0);
    }
    let hi = grid.partition_point(|&v| v <= x).min(g - 1);
    let lo = hi - 1;
    let w = (x - grid[lo]) / (grid[hi] - grid[lo]);
    (lo, w)
}

pub fn interp_linear(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if grid.len() == 1 {
        return values[0];
    }
    let (i, w) = bracket(grid, x);
    (1.0 - w) * values[i] + w * values[i + 1]
}

/// Bilinear interpolation of a surface `f(i, j)` on `grid × grid`.
pub fn interp_bilinear(grid: &[f64], f: impl Fn(usize, usize) -> f64, s: f64, t: f64) -> f64 {
    if grid.len() == 1 {
        return f(0, 0);
    }
    let (i, u) = bracket(grid, s);
    let (j, v) = bracket(grid, t);
    (1.0 - u) * (1.0 - v) * f(i, j)
        + u * (1.0 - v) * f(i + 1, j)
        + (1.0 - u) * v * f(i, j + 1)
        + u * v * f(i + 1, j + 1)
}

/// Index of the gridpoint nearest to `x` (ties go to the lower index).
pub fn nearest_index(grid: &[f64], x: f64) -> usize {
    let (i, w) = bracket(grid, x);
    if grid.len() > 1 && w > 0.5 {
        i + 1
    } else {
        i
    }
}
