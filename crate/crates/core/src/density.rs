//! Gaussian kernels, time weights and the full-history weighted kernel density.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, KmScale};
use crate::math;
use crate::params::ModelParams;
use crate::quadrature;

/// Product of two univariate normal densities with standard deviations
/// `bw = (bw_x, bw_y)`, evaluated at displacement `z`.
///
/// Units follow the inputs: degrees in, density per square degree out.
pub fn kernel2(z: (f64, f64), bw: (f64, f64)) -> Result<f64> {
    if !(bw.0 > 0.0 && bw.1 > 0.0) {
        return Err(Error::InvalidParameter("kernel bandwidths must be positive"));
    }
    Ok(kernel2_unchecked(z, bw))
}

#[inline]
pub(crate) fn kernel2_unchecked(z: (f64, f64), bw: (f64, f64)) -> f64 {
    let ux = z.0 / bw.0;
    let uy = z.1 / bw.1;
    math::exp(-0.5 * (ux * ux + uy * uy)) / (2.0 * math::PI * bw.0 * bw.1)
}

/// Isotropic bivariate normal density in the km plane: `sq_dist` in km^2,
/// `sd` in km, result per km^2.
#[inline]
pub fn iso_kernel_km(sq_dist: f64, sd: f64) -> f64 {
    let var = sd * sd;
    math::exp(-0.5 * sq_dist / var) / (2.0 * math::PI * var)
}

/// Unnormalized time-weight profile `g(lag)` for lags of one day or more.
///
/// Only ratios matter, so implementations may return any positive multiple
/// of the underlying pdf as long as the multiple does not depend on `lag`.
pub trait TimeWeight {
    fn profile(&self, lag: usize) -> f64;
}

/// `g(t) = exp(-t / theta)`, scaled so that a lag of one day maps to 1.
///
/// Anchoring at the most recent day keeps the profile in `(0, 1]`; older days
/// underflow to zero for small `theta` instead of overflowing the normalizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialDecay {
    pub theta: f64,
}

impl TimeWeight for ExponentialDecay {
    #[inline]
    fn profile(&self, lag: usize) -> f64 {
        math::exp(-((lag - 1) as f64) / self.theta)
    }
}

/// Precomputed `w(i, t)` for every `1 <= i < t <= max_target`, normalized
/// over the `t - 1` days before `t`.
#[derive(Debug, Clone)]
pub struct WeightTable {
    profile: Vec<f64>,
    prefix: Vec<f64>,
}

impl WeightTable {
    pub fn new<G: TimeWeight>(g: &G, max_target: usize) -> Self {
        let lags = max_target.max(2) - 1;
        let profile: Vec<f64> = (1..=lags).map(|lag| g.profile(lag)).collect();
        let mut prefix = Vec::with_capacity(lags + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for p in &profile {
            acc += p;
            prefix.push(acc);
        }
        Self { profile, prefix }
    }

    pub fn exponential(theta: f64, max_target: usize) -> Self {
        Self::new(&ExponentialDecay { theta }, max_target)
    }

    /// Weight of day `i` when predicting day `target`; requires `1 <= i < target`.
    #[inline]
    pub fn weight(&self, i: usize, target: usize) -> f64 {
        debug_assert!(i >= 1 && i < target && target - 1 < self.prefix.len());
        self.profile[target - i - 1] / self.prefix[target - 1]
    }

    pub fn max_target(&self) -> usize {
        self.prefix.len()
    }
}

/// Normalized exponential time weight of day `i` among days `1..=n` when
/// predicting day `target`.
///
/// Numerator and the explicit normalizing sum share the factor
/// `exp(-(target - n) / theta)`, which is divided out before evaluation.
pub fn weight(i: usize, target: usize, theta: f64, n: usize) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter("theta must be positive"));
    }
    if i < 1 || i > n || n >= target {
        return Err(Error::InvalidParameter("weight needs 1 <= i <= n < target"));
    }
    let g = ExponentialDecay { theta };
    let num = g.profile(n - i + 1);
    let den: f64 = (1..=n).map(|lag| g.profile(lag)).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub center: GeoPoint,
    /// Bandwidth multiplier, `sqrt(m + 1)` for the m-th marginalization level.
    pub scale_mult: f64,
    pub weight: f64,
}

/// Weighted sum of axis-aligned bivariate Gaussians on the lon/lat plane.
///
/// Component `k` has standard deviations
/// `scale_mult_k * base_bandwidth * (delta_lon, delta_lat)` degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub components: Vec<MixtureComponent>,
    pub base_bandwidth: f64,
    pub scale: KmScale,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>, base_bandwidth: f64, scale: KmScale) -> Result<Self> {
        if !(base_bandwidth > 0.0) {
            return Err(Error::InvalidParameter("base bandwidth must be positive"));
        }
        if components.is_empty() {
            return Err(Error::EmptyHistory);
        }
        if components.iter().any(|c| !(c.weight > 0.0) || !(c.scale_mult >= 1.0)) {
            return Err(Error::InvalidParameter("mixture weights must be positive and multipliers >= 1"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("mixture weights must sum to one"));
        }
        Ok(Self { components, base_bandwidth, scale })
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Density per square degree.
    pub fn eval(&self, s: GeoPoint) -> f64 {
        let bx = self.base_bandwidth * self.scale.delta_lon;
        let by = self.base_bandwidth * self.scale.delta_lat;
        self.components
            .iter()
            .map(|c| {
                let z = (s.lon - c.center.lon, s.lat - c.center.lat);
                c.weight * kernel2_unchecked(z, (c.scale_mult * bx, c.scale_mult * by))
            })
            .sum()
    }

    /// Density per square kilometre.
    pub fn eval_km2(&self, s: GeoPoint) -> f64 {
        self.eval(s) * self.scale.deg2_per_km2()
    }

    pub fn max_scale_mult(&self) -> f64 {
        self.components.iter().fold(1.0, |acc, c| acc.max(c.scale_mult))
    }
}

/// Density per square degree of `m` at `s`.
pub fn mixture_eval(m: &GaussianMixture, s: GeoPoint) -> f64 {
    m.eval(s)
}

/// Weighted kernel density of the next location given a fully observed
/// history `s_1..s_n`.
pub fn full_conditional(history: &[GeoPoint], params: ModelParams, scale: &KmScale) -> Result<GaussianMixture> {
    let n = history.len();
    if n == 0 {
        return Err(Error::EmptyHistory);
    }
    let table = WeightTable::exponential(params.theta, n + 1);
    let components = history
        .iter()
        .enumerate()
        .map(|(k, &center)| MixtureComponent { center, scale_mult: 1.0, weight: table.weight(k + 1, n + 1) })
        .filter(|c| c.weight > 0.0)
        .collect();
    GaussianMixture::new(components, params.h, *scale)
}

/// Checks numerically that convolving two isotropic Gaussians of standard
/// deviations `tau1` and `tau2` (km) gives a Gaussian of standard deviation
/// `sqrt(tau1^2 + tau2^2)`.
///
/// For each center `c`, probes `s` are placed around it and
/// `∫ k(s - z, tau1) k(z - c, tau2) dz` is integrated by trapezoid over the
/// box where both factors are non-negligible. Returns the largest absolute
/// deviation (per km^2) from the closed form.
pub fn convolution_identity_check(tau1: f64, tau2: f64, centers: &[(f64, f64)]) -> Result<f64> {
    if !(tau1 > 0.0 && tau2 > 0.0) {
        return Err(Error::InvalidParameter("convolution bandwidths must be positive"));
    }
    let tau = math::sqrt(tau1 * tau1 + tau2 * tau2);
    const PROBES: [(f64, f64); 5] = [(0.0, 0.0), (1.0, 0.0), (0.0, -1.0), (-1.5, 0.5), (2.0, 1.0)];
    const REACH: f64 = 9.0;
    let mut worst: f64 = 0.0;
    for &c in centers {
        for &(px, py) in &PROBES {
            let s = (c.0 + px * tau, c.1 + py * tau);
            let x = intersect((s.0 - REACH * tau1, s.0 + REACH * tau1), (c.0 - REACH * tau2, c.0 + REACH * tau2));
            let y = intersect((s.1 - REACH * tau1, s.1 + REACH * tau1), (c.1 - REACH * tau2, c.1 + REACH * tau2));
            let numeric = match (x, y) {
                (Some(x), Some(y)) => {
                    let f = |zx: f64, zy: f64| {
                        let a = (s.0 - zx) * (s.0 - zx) + (s.1 - zy) * (s.1 - zy);
                        let b = (zx - c.0) * (zx - c.0) + (zy - c.1) * (zy - c.1);
                        iso_kernel_km(a, tau1) * iso_kernel_km(b, tau2)
                    };
                    quadrature::adaptive_2d(&f, x, y, 1e-12, 16, 512).value
                }
                _ => 0.0,
            };
            let d2 = (s.0 - c.0) * (s.0 - c.0) + (s.1 - c.1) * (s.1 - c.1);
            worst = worst.max((numeric - iso_kernel_km(d2, tau)).abs());
        }
    }
    Ok(worst)
}

fn intersect(a: (f64, f64), b: (f64, f64)) -> Option<(f64, f64)> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (lo < hi).then_some((lo, hi))
}
