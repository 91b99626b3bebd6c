//! Conditional density of the next location when some past days are
//! unobserved.
//!
//! Integrating the unobserved locations out of the full-history weighted
//! kernel density leaves a Gaussian mixture centred on the observed points
//! only. Marginalizing through `m` unobserved days widens a kernel by
//! `sqrt(m + 1)`, so the mixture is stored as coefficient levels
//! `c[m][k]`: the weight on observed point `k` at bandwidth `sqrt(m+1) h`.
//!
//! Two independent constructions are provided. [`coefficients_prop1`]
//! enumerates every increasing tuple of missing days (exponential in the
//! number of missing days, kept as a reference). [`coefficients_prop2`]
//! computes the same sums as `A W^(m-1) B` with iterated matrix-vector
//! products and is what the filter uses. [`coefficients_partial`] is the
//! renormalized observed-days-only density, which is not a consistent
//! marginal of any joint model.

use alloc::vec;
use alloc::vec::Vec;

use crate::density::{iso_kernel_km, GaussianMixture, MixtureComponent, WeightTable};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, KmScale};
use crate::math;
use crate::params::ModelParams;
use crate::quadrature;
use crate::track::History;

/// Largest number of missing days [`coefficients_prop1`] will enumerate.
pub const PROP1_MAX_MISSING: usize = 12;

/// Unobserved days `u_1 < ... < u_L` among `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingPattern {
    n: usize,
    missing: Vec<usize>,
}

impl MissingPattern {
    pub fn new(n: usize, missing: Vec<usize>) -> Result<Self> {
        if missing.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("missing days must be strictly increasing"));
        }
        if let (Some(&first), Some(&last)) = (missing.first(), missing.last()) {
            if first <= 1 || last > n {
                return Err(Error::InvalidParameter("missing days must satisfy 1 < u_1 and u_L <= n"));
            }
        }
        if missing.len() >= n.max(1) {
            return Err(Error::InvalidParameter("at least one day must be observed"));
        }
        Ok(Self { n, missing })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn missing(&self) -> &[usize] {
        &self.missing
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    /// `S_k = {u_1, ..., u_{k-1}}` for `k` in `1..=L+1`.
    pub fn preceding(&self, k: usize) -> &[usize] {
        &self.missing[..k - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LikelihoodModel {
    /// Exact marginal over unobserved days (matrix form).
    Full,
    /// Observed days only, weights renormalized.
    Partial,
}

/// Mixture weights of a conditional density, independent of `h` and of the
/// evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodCoefficients {
    observed: Vec<(usize, GeoPoint)>,
    levels: Vec<Vec<f64>>,
}

impl LikelihoodCoefficients {
    pub fn observed(&self) -> &[(usize, GeoPoint)] {
        &self.observed
    }

    /// `levels()[m][k]` weights observed point `k` at bandwidth `sqrt(m+1) h`.
    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn total_mass(&self) -> f64 {
        self.levels.iter().flatten().sum()
    }

    /// Largest coefficient-wise absolute difference; infinite when the two
    /// were built for different histories.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.observed != other.observed {
            return f64::INFINITY;
        }
        let depth = self.levels.len().max(other.levels.len());
        let width = self.observed.len();
        let mut worst: f64 = 0.0;
        for m in 0..depth {
            for k in 0..width {
                let a = self.levels.get(m).map_or(0.0, |l| l[k]);
                let b = other.levels.get(m).map_or(0.0, |l| l[k]);
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    /// Mixture with one component per nonzero coefficient, ordered by level
    /// then observed day.
    pub fn to_mixture(&self, h: f64, scale: &KmScale) -> Result<GaussianMixture> {
        let mut components = Vec::new();
        for (m, level) in self.levels.iter().enumerate() {
            let scale_mult = math::sqrt((m + 1) as f64);
            for (k, &weight) in level.iter().enumerate() {
                if weight > 0.0 {
                    components.push(MixtureComponent { center: self.observed[k].1, scale_mult, weight });
                }
            }
        }
        GaussianMixture::new(components, h, *scale)
    }

    /// Density per km^2 at `s` for bandwidth scale `h`.
    pub fn density_km2(&self, h: f64, s: GeoPoint, scale: &KmScale) -> f64 {
        let point = PointEvaluator::new(&self.observed, s, scale);
        let table = KernelTable::new(&point, h, self.levels.len());
        math::exp(table.log_density(self))
    }
}

/// Exact conditional likelihood in matrix form: the production path.
pub fn coefficients(history: &History, theta: f64, model: LikelihoodModel) -> Result<LikelihoodCoefficients> {
    match model {
        LikelihoodModel::Full => coefficients_prop2(history, theta),
        LikelihoodModel::Partial => coefficients_partial(history, theta),
    }
}

fn first_level(history: &History, table: &WeightTable) -> Vec<f64> {
    let target = history.horizon();
    history.observed().iter().map(|&(i, _)| table.weight(i, target)).collect()
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter("theta must be positive and finite"))
    }
}

/// Explicit enumeration over increasing tuples of missing days.
pub fn coefficients_prop1(history: &History, theta: f64) -> Result<LikelihoodCoefficients> {
    check_theta(theta)?;
    let pattern = history.pattern();
    let l = pattern.len();
    if l > PROP1_MAX_MISSING {
        return Err(Error::TooManyMissing { missing: l, limit: PROP1_MAX_MISSING });
    }
    let target = history.horizon();
    let table = WeightTable::exponential(theta, target);
    let u = pattern.missing();
    let observed = history.observed();

    let mut levels = vec![vec![0.0; observed.len()]; l + 1];
    levels[0] = first_level(history, &table);

    let mut tuple = Vec::with_capacity(l);
    for mask in 1u32..(1u32 << l) {
        tuple.clear();
        tuple.extend((0..l).filter(|b| mask & (1 << b) != 0));
        let m = tuple.len();
        let mut chain = table.weight(u[tuple[m - 1]], target);
        for pair in tuple.windows(2) {
            chain *= table.weight(u[pair[0]], u[pair[1]]);
        }
        // Observed days before the first missing day of the tuple; every
        // earlier missing day is in S_{i_1} and excluded.
        let head = u[tuple[0]];
        for (k, &(j, _)) in observed.iter().enumerate().take_while(|(_, (j, _))| *j < head) {
            levels[m][k] += chain * table.weight(j, head);
        }
    }
    Ok(LikelihoodCoefficients { observed: observed.to_vec(), levels })
}

/// `A`, `W` and `B` of the matrix form, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingWeightMatrices {
    n: usize,
    l: usize,
    a: Vec<f64>,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl MissingWeightMatrices {
    pub fn build(pattern: &MissingPattern, table: &WeightTable) -> Self {
        let (n, l) = (pattern.n(), pattern.len());
        let u = pattern.missing();
        let mut a = vec![0.0; n * l];
        for (q, &uq) in u.iter().enumerate() {
            let excluded = pattern.preceding(q + 1);
            for p in 1..uq {
                if excluded.binary_search(&p).is_err() {
                    a[(p - 1) * l + q] = table.weight(p, uq);
                }
            }
        }
        let mut w = vec![0.0; l * l];
        for p in 0..l {
            for q in (p + 1)..l {
                w[p * l + q] = table.weight(u[p], u[q]);
            }
        }
        let b = u.iter().map(|&up| table.weight(up, n + 1)).collect();
        Self { n, l, a, w, b }
    }

    /// `A(p, q)` with 1-based indices.
    pub fn a(&self, p: usize, q: usize) -> f64 {
        self.a[(p - 1) * self.l + (q - 1)]
    }

    /// `W(p, q)` with 1-based indices.
    pub fn w(&self, p: usize, q: usize) -> f64 {
        self.w[(p - 1) * self.l + (q - 1)]
    }

    /// `B(p)` with a 1-based index.
    pub fn b(&self, p: usize) -> f64 {
        self.b[p - 1]
    }

    /// `W^k` as a row-major `L x L` matrix.
    pub fn w_power(&self, k: usize) -> Vec<f64> {
        let l = self.l;
        let mut acc = vec![0.0; l * l];
        for i in 0..l {
            acc[i * l + i] = 1.0;
        }
        for _ in 0..k {
            let mut next = vec![0.0; l * l];
            for i in 0..l {
                for r in 0..l {
                    let lhs = acc[i * l + r];
                    if lhs != 0.0 {
                        for j in 0..l {
                            next[i * l + j] += lhs * self.w[r * l + j];
                        }
                    }
                }
            }
            acc = next;
        }
        acc
    }

    fn w_times(&self, v: &[f64]) -> Vec<f64> {
        let l = self.l;
        (0..l).map(|p| ((p + 1)..l).map(|q| self.w[p * l + q] * v[q]).sum()).collect()
    }

    fn a_times(&self, v: &[f64]) -> Vec<f64> {
        let l = self.l;
        (0..self.n).map(|p| (0..l).map(|q| self.a[p * l + q] * v[q]).sum()).collect()
    }
}

/// Matrix form: `C^(m) = A W^(m-1) B` via `v_1 = B`, `v_{m+1} = W v_m`.
pub fn coefficients_prop2(history: &History, theta: f64) -> Result<LikelihoodCoefficients> {
    check_theta(theta)?;
    let pattern = history.pattern();
    let l = pattern.len();
    let table = WeightTable::exponential(theta, history.horizon());
    let observed = history.observed();

    let mut levels = Vec::with_capacity(l + 1);
    levels.push(first_level(history, &table));
    if l > 0 {
        let mats = MissingWeightMatrices::build(&pattern, &table);
        let mut v = mats.b.clone();
        for _ in 1..=l {
            let c = mats.a_times(&v);
            levels.push(observed.iter().map(|&(j, _)| c[j - 1]).collect());
            v = mats.w_times(&v);
        }
    }
    Ok(LikelihoodCoefficients { observed: observed.to_vec(), levels })
}

/// Observed-days-only weights, renormalized.
pub fn coefficients_partial(history: &History, theta: f64) -> Result<LikelihoodCoefficients> {
    check_theta(theta)?;
    let table = WeightTable::exponential(theta, history.horizon());
    let mut level = first_level(history, &table);
    if history.pattern().is_empty() {
        return Ok(LikelihoodCoefficients { observed: history.observed().to_vec(), levels: vec![level] });
    }
    let total: f64 = level.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegeneratePosterior);
    }
    level.iter_mut().for_each(|w| *w /= total);
    Ok(LikelihoodCoefficients { observed: history.observed().to_vec(), levels: vec![level] })
}

pub fn likelihood_prop1(history: &History, params: ModelParams, scale: &KmScale) -> Result<GaussianMixture> {
    coefficients_prop1(history, params.theta)?.to_mixture(params.h, scale)
}

pub fn likelihood_prop2(history: &History, params: ModelParams, scale: &KmScale) -> Result<GaussianMixture> {
    coefficients_prop2(history, params.theta)?.to_mixture(params.h, scale)
}

pub fn likelihood_partial(history: &History, params: ModelParams, scale: &KmScale) -> Result<GaussianMixture> {
    coefficients_partial(history, params.theta)?.to_mixture(params.h, scale)
}

/// Squared km distances from one evaluation point to every observed point.
#[derive(Debug, Clone)]
pub struct PointEvaluator {
    sq_dist: Vec<f64>,
}

impl PointEvaluator {
    pub fn new(observed: &[(usize, GeoPoint)], s: GeoPoint, scale: &KmScale) -> Self {
        let sq_dist = observed
            .iter()
            .map(|&(_, p)| {
                let (dx, dy) = scale.displacement_km(p, s);
                dx * dx + dy * dy
            })
            .collect();
        Self { sq_dist }
    }

    pub fn from_sq_dist(sq_dist: Vec<f64>) -> Self {
        Self { sq_dist }
    }
}

/// Log kernel values `e[m][k]` at one point for one `h`, plus their
/// exponentials shifted by the maximum.
#[derive(Debug, Clone)]
pub struct KernelTable {
    width: usize,
    log_kernel: Vec<f64>,
    shifted: Vec<f64>,
    shift: f64,
}

impl KernelTable {
    pub fn new(point: &PointEvaluator, h: f64, levels: usize) -> Self {
        let width = point.sq_dist.len();
        let mut log_kernel = Vec::with_capacity(levels * width);
        for m in 0..levels {
            let var = (m + 1) as f64 * h * h;
            let log_norm = math::ln(2.0 * math::PI * var);
            log_kernel.extend(point.sq_dist.iter().map(|d2| -0.5 * d2 / var - log_norm));
        }
        let shift = log_kernel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted = log_kernel.iter().map(|e| math::exp(e - shift)).collect();
        Self { width, log_kernel, shifted, shift }
    }

    /// Log density per km^2 of `coeffs` at the table's point.
    pub fn log_density(&self, coeffs: &LikelihoodCoefficients) -> f64 {
        let mut total = 0.0;
        for (m, level) in coeffs.levels.iter().enumerate() {
            let row = &self.shifted[m * self.width..(m + 1) * self.width];
            total += level.iter().zip(row).map(|(c, k)| c * k).sum::<f64>();
        }
        if total > 0.0 {
            return self.shift + math::ln(total);
        }
        // Every term underflowed against the global maximum; redo the
        // log-sum-exp over the terms that carry weight.
        let mut best = f64::NEG_INFINITY;
        for (m, level) in coeffs.levels.iter().enumerate() {
            for (k, &c) in level.iter().enumerate() {
                if c > 0.0 {
                    best = best.max(math::ln(c) + self.log_kernel[m * self.width + k]);
                }
            }
        }
        if best == f64::NEG_INFINITY {
            return best;
        }
        let mut acc = 0.0;
        for (m, level) in coeffs.levels.iter().enumerate() {
            for (k, &c) in level.iter().enumerate() {
                if c > 0.0 {
                    acc += math::exp(math::ln(c) + self.log_kernel[m * self.width + k] - best);
                }
            }
        }
        best + math::ln(acc)
    }
}

/// Both sides of the one-step marginalization identity at the probe with the
/// largest discrepancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyGap {
    pub probe: GeoPoint,
    /// Model density of day `n + 1` with day `n` unobserved (per km^2).
    pub lhs: f64,
    /// The same density obtained by filling day `n` with `x`, weighting by the
    /// model's own density for day `n`, and integrating `x` out numerically.
    pub rhs: f64,
    pub gap: f64,
}

/// Checks whether `model` is closed under marginalizing the latest day.
///
/// The latest day of `history` must be unobserved (or the history complete,
/// in which case nothing is marginalized and the gap is zero). A consistent
/// model satisfies
/// `f(s | days 1..n-1) = ∫ f(s | days 1..n-1, x_n) f(x_n | days 1..n-1) dx_n`.
pub fn consistency_violation_demo(
    history: &History,
    model: LikelihoodModel,
    params: ModelParams,
    scale: &KmScale,
    probes: &[GeoPoint],
) -> Result<ConsistencyGap> {
    if probes.is_empty() {
        return Err(Error::InvalidParameter("need at least one probe point"));
    }
    let n = history.n();
    let lhs_coeffs = coefficients(history, params.theta, model)?;
    if history.pattern().is_empty() {
        let lhs = lhs_coeffs.density_km2(params.h, probes[0], scale);
        return Ok(ConsistencyGap { probe: probes[0], lhs, rhs: lhs, gap: 0.0 });
    }
    if history.is_observed(n) {
        return Err(Error::InvalidParameter("the latest day must be unobserved"));
    }

    let prior_day = history.truncated(n - 1)?;
    let prior_coeffs = coefficients(&prior_day, params.theta, model)?;
    let origin = history.observed()[0].1;
    let filled_coeffs = coefficients(&history.with_observation(n, origin)?, params.theta, model)?;
    let slot = filled_coeffs.observed.iter().position(|(d, _)| *d == n).expect("filled day present");

    // Integrate over a box around every observed point, wide enough for the
    // widest kernel of the day-n density.
    let widest = math::sqrt(prior_coeffs.levels.len() as f64) * params.h;
    let reach = 10.0 * widest + 10.0 * params.h;
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(_, p) in history.observed() {
        let (dx, dy) = scale.displacement_km(origin, p);
        x_lo = x_lo.min(dx);
        x_hi = x_hi.max(dx);
        y_lo = y_lo.min(dy);
        y_hi = y_hi.max(dy);
    }
    let x_range = (x_lo - reach, x_hi + reach);
    let y_range = (y_lo - reach, y_hi + reach);

    let mut worst: Option<ConsistencyGap> = None;
    for &probe in probes {
        let lhs = lhs_coeffs.density_km2(params.h, probe, scale);
        let integrand = |x: f64, y: f64| {
            let fill = scale.offset(origin, x, y);
            let day_n = prior_coeffs.density_km2(params.h, fill, scale);
            let (px, py) = scale.displacement_km(fill, probe);
            let mut sq: Vec<f64> = filled_coeffs
                .observed
                .iter()
                .map(|&(_, p)| {
                    let (dx, dy) = scale.displacement_km(p, probe);
                    dx * dx + dy * dy
                })
                .collect();
            sq[slot] = px * px + py * py;
            let mut next = 0.0;
            for (m, level) in filled_coeffs.levels.iter().enumerate() {
                let sd = math::sqrt((m + 1) as f64) * params.h;
                next += level.iter().zip(&sq).map(|(c, d2)| c * iso_kernel_km(*d2, sd)).sum::<f64>();
            }
            next * day_n
        };
        let rhs = quadrature::adaptive_2d(&integrand, x_range, y_range, 1e-9, 32, 1024).value;
        let gap = (lhs - rhs).abs();
        if worst.is_none_or(|w| gap > w.gap) {
            worst = Some(ConsistencyGap { probe, lhs, rhs, gap });
        }
    }
    Ok(worst.expect("probes is non-empty"))
}
