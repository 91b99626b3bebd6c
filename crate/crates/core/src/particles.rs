//! Weighted particles over (theta, h) with an analytically carried expert
//! marker.
//!
//! The filter's prior on the extended parameter set puts mass `q0` on the
//! expert marker and `1 - q0` on the particles. Instead of drawing the marker
//! as literal particles, `q0` is kept as a number: injecting credibility
//! scales particle weights by `1 - p`, the Bayes step multiplies `q0` by the
//! expert map's density at the sighting, and stripping renormalizes the
//! particles. This is the expectation of the resampling scheme, without its
//! Monte Carlo noise on the expert weight.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, KmScale};
use crate::likelihood::{coefficients, KernelTable, LikelihoodCoefficients, LikelihoodModel, PointEvaluator};
use crate::math;
use crate::params::{ModelParams, ParamBox};
use crate::prior::ExpertPrior;
use crate::stats::{weighted_mean, weighted_quantiles, weighted_sd};
use crate::track::History;

/// Tolerance on `q0 + sum(weights) = 1`.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Quantile levels used to snap particle values, one per decile bin.
pub const DECILE_LEVELS: [f64; 10] = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95];

/// Where each particle's likelihood is evaluated in a Bayes step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvaluationPoints {
    /// At the particle itself.
    Exact,
    /// At the particle's decile-snapped value (see
    /// [`ParticleSet::decile_compress`]), so at most 100 distinct likelihoods
    /// are computed. Particles keep their own values.
    #[default]
    DecileProxies,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<ModelParams>,
    weights: Vec<f64>,
    expert_mass: f64,
    pub day: u32,
}

/// Posterior mean and central 95% interval of each parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub day: u32,
    pub theta_mean: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub h_mean: f64,
    pub h_lo: f64,
    pub h_hi: f64,
    pub q0_prior: f64,
    pub q0_posterior: f64,
}

impl PosteriorSummary {
    pub fn covers(&self, truth: ModelParams) -> (bool, bool) {
        (
            self.theta_lo <= truth.theta && truth.theta <= self.theta_hi,
            self.h_lo <= truth.h && truth.h <= self.h_hi,
        )
    }
}

impl ParticleSet {
    pub fn from_parts(particles: Vec<ModelParams>, weights: Vec<f64>, expert_mass: f64, day: u32) -> Result<Self> {
        if particles.is_empty() || particles.len() != weights.len() {
            return Err(Error::InvalidParameter("need one weight per particle and at least one particle"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !(0.0..=1.0).contains(&expert_mass) {
            return Err(Error::InvalidParameter("weights and expert mass must be non-negative"));
        }
        let set = Self { particles, weights, expert_mass, day };
        if (set.total_mass() - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidParameter("expert mass and particle weights must sum to one"));
        }
        Ok(set)
    }

    /// `n` iid uniform draws over the box with equal weights.
    pub fn init<R: Rng + ?Sized>(n: usize, bounds: &ParamBox, day: u32, rng: &mut R) -> Result<Self> {
        if n < 100 {
            return Err(Error::InvalidParameter("use at least 100 particles"));
        }
        bounds.validate()?;
        let particles = (0..n)
            .map(|_| ModelParams {
                theta: rng.random_range(bounds.theta_min..bounds.theta_max),
                h: rng.random_range(bounds.h_min..bounds.h_max),
            })
            .collect();
        Ok(Self { particles, weights: alloc::vec![1.0 / n as f64; n], expert_mass: 0.0, day })
    }

    pub fn particles(&self) -> &[ModelParams] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expert_mass(&self) -> f64 {
        self.expert_mass
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.expert_mass + self.weights.iter().sum::<f64>()
    }

    /// Distinct parameter values with merged weights, sorted by (theta, h).
    pub fn distinct(&self) -> Vec<(ModelParams, f64)> {
        let mut merged: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (p, w) in self.particles.iter().zip(&self.weights) {
            *merged.entry((p.theta.to_bits(), p.h.to_bits())).or_insert(0.0) += w;
        }
        merged
            .into_iter()
            .map(|((t, h), w)| (ModelParams { theta: f64::from_bits(t), h: f64::from_bits(h) }, w))
            .collect()
    }

    /// Particle weights normalized over the non-expert mass.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let total: f64 = self.weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegeneratePosterior);
        }
        Ok(self.weights.iter().map(|w| w / total).collect())
    }

    /// Puts credibility `p` on the expert marker; particle weights keep their
    /// relative sizes and share `1 - p`.
    pub fn inject_expert_mass(&self, p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidParameter("credibility must lie in [0, 1)"));
        }
        let base = self.normalized_weights()?;
        Ok(Self {
            particles: self.particles.clone(),
            weights: base.iter().map(|w| w * (1.0 - p)).collect(),
            expert_mass: p,
            day: self.day,
        })
    }

    /// Log density per km^2 of `observed` under each particle.
    pub fn log_likelihoods(&self, history: &History, observed: GeoPoint, model: LikelihoodModel, scale: &KmScale) -> Result<Vec<f64>> {
        let mut by_theta: BTreeMap<u64, LikelihoodCoefficients> = BTreeMap::new();
        for p in &self.particles {
            if let alloc::collections::btree_map::Entry::Vacant(slot) = by_theta.entry(p.theta.to_bits()) {
                slot.insert(coefficients(history, p.theta, model)?);
            }
        }
        let levels = by_theta.values().map(|c| c.levels().len()).max().unwrap_or(1);
        let point = PointEvaluator::new(history.observed(), observed, scale);
        let mut tables: BTreeMap<u64, KernelTable> = BTreeMap::new();
        let mut cache: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        let mut out = Vec::with_capacity(self.particles.len());
        for p in &self.particles {
            let key = (p.theta.to_bits(), p.h.to_bits());
            let value = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let table = tables.entry(key.1).or_insert_with(|| KernelTable::new(&point, p.h, levels));
                    let v = table.log_density(&by_theta[&key.0]);
                    cache.insert(key, v);
                    v
                }
            };
            out.push(value);
        }
        Ok(out)
    }

    /// One Bayes step on the extended parameter set.
    ///
    /// Without a sighting the set is returned unchanged. With one, particle
    /// weights are multiplied by the conditional likelihood of the sighting
    /// and the expert mass by the expert map's density in its cell, both per
    /// km^2, then everything is renormalized.
    pub fn bayes_update(
        &self,
        history: &History,
        observed: Option<GeoPoint>,
        expert: Option<&ExpertPrior>,
        model: LikelihoodModel,
        scale: &KmScale,
    ) -> Result<(Self, PosteriorSummary)> {
        self.bayes_update_at(EvaluationPoints::Exact, history, observed, expert, model, scale)
    }

    /// [`ParticleSet::bayes_update`] with a choice of where the likelihood
    /// is evaluated.
    pub fn bayes_update_at(
        &self,
        points: EvaluationPoints,
        history: &History,
        observed: Option<GeoPoint>,
        expert: Option<&ExpertPrior>,
        model: LikelihoodModel,
        scale: &KmScale,
    ) -> Result<(Self, PosteriorSummary)> {
        let q0_prior = self.expert_mass;
        let Some(s) = observed else {
            return Ok((self.clone(), self.summary(q0_prior)?));
        };
        let log_expert = match expert {
            Some(prior) => math::ln(prior.density_at(s)?),
            None if self.expert_mass > 0.0 => {
                return Err(Error::InvalidParameter("expert mass without an expert map"));
            }
            None => f64::NEG_INFINITY,
        };
        let log_lik = match points {
            EvaluationPoints::Exact => self.log_likelihoods(history, s, model, scale)?,
            EvaluationPoints::DecileProxies => self.decile_compress().log_likelihoods(history, s, model, scale)?,
        };

        let mut shift = if self.expert_mass > 0.0 { log_expert } else { f64::NEG_INFINITY };
        for (l, w) in log_lik.iter().zip(&self.weights) {
            if *w > 0.0 {
                shift = shift.max(*l);
            }
        }
        if shift == f64::NEG_INFINITY {
            return Err(Error::DegeneratePosterior);
        }
        let mut weights: Vec<f64> = log_lik.iter().zip(&self.weights).map(|(l, w)| w * math::exp(l - shift)).collect();
        let mut expert_mass = if self.expert_mass > 0.0 { self.expert_mass * math::exp(log_expert - shift) } else { 0.0 };
        let total = expert_mass + weights.iter().sum::<f64>();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegeneratePosterior);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        expert_mass /= total;
        let updated = Self { particles: self.particles.clone(), weights, expert_mass, day: self.day };
        let summary = updated.summary(q0_prior)?;
        Ok((updated, summary))
    }

    /// Drops the expert marker and renormalizes the particles.
    pub fn strip_expert(&self) -> Result<Self> {
        if self.expert_mass >= 1.0 {
            return Err(Error::DegeneratePosterior);
        }
        if self.expert_mass == 0.0 {
            return Ok(self.clone());
        }
        Ok(Self { particles: self.particles.clone(), weights: self.normalized_weights()?, expert_mass: 0.0, day: self.day })
    }

    /// Mean and 95% interval over the particles, normalized without the
    /// expert mass.
    pub fn summary(&self, q0_prior: f64) -> Result<PosteriorSummary> {
        let w = self.normalized_weights()?;
        let thetas: Vec<f64> = self.particles.iter().map(|p| p.theta).collect();
        let hs: Vec<f64> = self.particles.iter().map(|p| p.h).collect();
        let tq = weighted_quantiles(&thetas, &w, &[0.025, 0.975]);
        let hq = weighted_quantiles(&hs, &w, &[0.025, 0.975]);
        Ok(PosteriorSummary {
            day: self.day,
            theta_mean: weighted_mean(&thetas, &w),
            theta_lo: tq[0],
            theta_hi: tq[1],
            h_mean: weighted_mean(&hs, &w),
            h_lo: hq[0],
            h_hi: hq[1],
            q0_prior,
            q0_posterior: self.expert_mass,
        })
    }

    /// Redraws `N` equally weighted particles from a product-beta kernel
    /// mixture on the unit-scaled box.
    ///
    /// Component `j` is centred on particle `j` with mixture weight equal to
    /// its normalized weight; every component shares a spread of `smoothing`
    /// times the weighted standard deviation of the particles. Sets with
    /// fewer than two distinct values of either parameter pass through.
    pub fn rejuvenate<R: Rng + ?Sized>(&self, bounds: &ParamBox, smoothing: f64, rng: &mut R) -> Result<Self> {
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::InvalidParameter("smoothing factor must be positive"));
        }
        let w = self.normalized_weights()?;
        let unit: Vec<(f64, f64)> = self.particles.iter().map(|p| bounds.to_unit(p)).collect();
        let tu: Vec<f64> = unit.iter().map(|u| u.0).collect();
        let hu: Vec<f64> = unit.iter().map(|u| u.1).collect();
        if distinct_weighted(&tu, &w) < 2 || distinct_weighted(&hu, &w) < 2 {
            return Ok(self.clone());
        }
        let theta_sd = smoothing * weighted_sd(&tu, &w);
        let h_sd = smoothing * weighted_sd(&hu, &w);

        let mut cumulative = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        for wi in &w {
            acc += wi;
            cumulative.push(acc);
        }
        let n = self.particles.len();
        let mut particles = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let j = cumulative.partition_point(|c| *c <= u).min(n - 1);
            let theta_u = beta_draw(tu[j], theta_sd, rng)?;
            let h_u = beta_draw(hu[j], h_sd, rng)?;
            particles.push(bounds.from_unit(theta_u, h_u));
        }
        Ok(Self { particles, weights: alloc::vec![1.0 / n as f64; n], expert_mass: 0.0, day: self.day })
    }

    /// Snaps each parameter to the nearest of its ten weighted decile-bin
    /// quantiles, leaving at most 100 distinct values. Slot weights are kept,
    /// so coincident slots act as one merged particle (see [`ParticleSet::distinct`]).
    pub fn decile_compress(&self) -> Self {
        let thetas: Vec<f64> = self.particles.iter().map(|p| p.theta).collect();
        let hs: Vec<f64> = self.particles.iter().map(|p| p.h).collect();
        let positive = self.weights.iter().any(|w| *w > 0.0);
        let uniform = alloc::vec![1.0; self.len()];
        let w = if positive { &self.weights } else { &uniform };
        let tq = weighted_quantiles(&thetas, w, &DECILE_LEVELS);
        let hq = weighted_quantiles(&hs, w, &DECILE_LEVELS);
        let particles = self
            .particles
            .iter()
            .map(|p| ModelParams { theta: nearest(&tq, p.theta), h: nearest(&hq, p.h) })
            .collect();
        Self { particles, weights: self.weights.clone(), expert_mass: self.expert_mass, day: self.day }
    }
}

fn distinct_weighted(values: &[f64], weights: &[f64]) -> usize {
    let mut v: Vec<u64> = values.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(x, _)| x.to_bits()).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// `candidates` ascending; ties go to the smaller candidate.
fn nearest(candidates: &[f64], x: f64) -> f64 {
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if (c - x).abs() < (best - x).abs() {
            best = c;
        }
    }
    best
}

/// Beta shapes `(a, b)` with the given mean and standard deviation, both at
/// least one.
///
/// Near the ends of the unit interval a kernel that wide does not exist with
/// that mean; the mean is then moved inward just far enough for the spread to
/// fit. Spreads beyond the uniform's `sqrt(1/12)` give `(1, 1)`.
pub fn beta_shapes(mean: f64, sd: f64) -> Result<(f64, f64)> {
    if !(sd > 0.0) || !(0.0..=1.0).contains(&mean) {
        return Err(Error::InvalidParameter("beta moment matching needs a mean in [0, 1] and a positive sd"));
    }
    // Largest variance with both shapes >= 1 at distance `d <= 1/2` from the
    // nearer end; increasing in `d`.
    let max_var = |d: f64| d * d * (1.0 - d) / (1.0 + d);
    let var = sd * sd;
    let near = mean.min(1.0 - mean);
    let d = if var <= max_var(near) {
        near
    } else if var >= max_var(0.5) {
        0.5
    } else {
        let (mut lo, mut hi) = (near, 0.5);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if max_var(mid) < var {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let m = if mean <= 0.5 { d } else { 1.0 - d };
    let nu = m * (1.0 - m) / var.min(max_var(0.5)) - 1.0;
    Ok(((m * nu).max(1.0), ((1.0 - m) * nu).max(1.0)))
}

fn beta_draw<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> Result<f64> {
    if !(sd > 0.0) {
        return Ok(mean);
    }
    let (a, b) = beta_shapes(mean, sd)?;
    let dist = Beta::new(a, b).map_err(|_| Error::InvalidParameter("beta shapes out of range"))?;
    Ok(dist.sample(rng))
}
