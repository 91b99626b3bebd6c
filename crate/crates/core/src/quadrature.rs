//! Tensor-product trapezoid rules over rectangles.
//!
//! The integrands here are smooth Gaussian mixtures that are negligible at
//! the rectangle edges, where the trapezoid rule converges geometrically;
//! successive halving of the spacing is enough as an error estimate.

/// Composite trapezoid rule with `intervals` panels per axis.
pub fn trapezoid_2d<F>(f: &F, x: (f64, f64), y: (f64, f64), intervals: usize) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let n = intervals.max(1);
    let dx = (x.1 - x.0) / n as f64;
    let dy = (y.1 - y.0) / n as f64;
    let mut total = 0.0;
    for i in 0..=n {
        let wx = if i == 0 || i == n { 0.5 } else { 1.0 };
        let xi = x.0 + i as f64 * dx;
        let mut row = 0.0;
        for j in 0..=n {
            let wy = if j == 0 || j == n { 0.5 } else { 1.0 };
            row += wy * f(xi, y.0 + j as f64 * dy);
        }
        total += wx * row;
    }
    total * dx * dy
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Absolute change over the last halving.
    pub change: f64,
    pub intervals: usize,
}

impl Estimate {
    pub fn converged(&self, tol: f64) -> bool {
        self.change < tol
    }
}

/// Halve the spacing, starting from `start` panels per axis, until two
/// successive estimates differ by less than `tol` or `max_intervals` is hit.
pub fn adaptive_2d<F>(f: &F, x: (f64, f64), y: (f64, f64), tol: f64, start: usize, max_intervals: usize) -> Estimate
where
    F: Fn(f64, f64) -> f64,
{
    let mut n = start.max(2);
    let mut prev = trapezoid_2d(f, x, y, n);
    loop {
        let next_n = n * 2;
        let next = trapezoid_2d(f, x, y, next_n);
        let change = (next - prev).abs();
        if change < tol || next_n >= max_intervals {
            return Estimate { value: next, change, intervals: next_n };
        }
        prev = next;
        n = next_n;
    }
}
