//! Synthetic tracks from the full weighted kernel model, random
//! missingness, and the full vs. partial likelihood study.

use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, KmScale};
use crate::likelihood::LikelihoodModel;
use crate::math;
use crate::params::ModelParams;
use crate::particles::PosteriorSummary;
use crate::sequential::{run_sequential, FilterConfig};
use crate::track::Track;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub theta: f64,
    pub h: f64,
    pub missing_frac: f64,
    pub seed: u64,
    /// Centre of the first location's Gaussian.
    pub center: GeoPoint,
    /// Per-axis sd of the first location, km.
    pub initial_sd_km: f64,
    pub scale: KmScale,
}

impl SimConfig {
    /// Desk-scale version of the published simulation: 200 days, decay 4
    /// days, bandwidth 1 km, 40% of days missing.
    pub fn appendix_c(seed: u64) -> Self {
        let center = GeoPoint::new(85.3, 23.4);
        Self {
            n: 200,
            theta: 4.0,
            h: 1.0,
            missing_frac: 0.4,
            seed,
            center,
            initial_sd_km: 5.0,
            scale: KmScale::at_latitude(center.lat).expect("fixed latitude"),
        }
    }

    pub fn truth(&self) -> ModelParams {
        ModelParams { theta: self.theta, h: self.h }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter("simulate at least two days"));
        }
        ModelParams::new(self.theta, self.h)?;
        if !(0.0..1.0).contains(&self.missing_frac) {
            return Err(Error::InvalidParameter("missing fraction must lie in [0, 1)"));
        }
        if !(self.initial_sd_km > 0.0 && self.initial_sd_km.is_finite()) || !self.center.is_finite() {
            return Err(Error::InvalidParameter("initial density needs a finite centre and positive spread"));
        }
        Ok(())
    }
}

fn gaussian_step<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> (f64, f64) {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    (sd * x, sd * y)
}

/// Draws the next location given a complete history.
pub fn draw_next<R: Rng + ?Sized>(history: &[GeoPoint], params: ModelParams, scale: &KmScale, rng: &mut R) -> Result<GeoPoint> {
    let k = history.len();
    if k == 0 {
        return Err(Error::EmptyHistory);
    }
    // Unnormalized weights anchored at the most recent day.
    let mut cumulative = Vec::with_capacity(k);
    let mut acc = 0.0;
    for i in 0..k {
        acc += math::exp(-((k - 1 - i) as f64) / params.theta);
        cumulative.push(acc);
    }
    let u: f64 = rng.random::<f64>() * acc;
    let j = cumulative.partition_point(|c| *c <= u).min(k - 1);
    let (dx, dy) = gaussian_step(rng, params.h);
    Ok(scale.offset(history[j], dx, dy))
}

/// A complete track on days `1..=n` (random stream 0 of the seed).
pub fn simulate_track(cfg: &SimConfig) -> Result<Track> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let (dx, dy) = gaussian_step(&mut rng, cfg.initial_sd_km);
    let mut points = Vec::with_capacity(cfg.n);
    points.push(cfg.scale.offset(cfg.center, dx, dy));
    while points.len() < cfg.n {
        let next = draw_next(&points, cfg.truth(), &cfg.scale, &mut rng)?;
        points.push(next);
    }
    let mut track = Track::new("sim");
    for (d, p) in points.into_iter().enumerate() {
        track.insert(d as u32 + 1, p)?;
    }
    Ok(track)
}

/// Removes `floor(frac * (len - 1))` sightings chosen uniformly, never the
/// first (random stream 1 of the seed).
pub fn mask_track(track: &Track, missing_frac: f64, seed: u64) -> Result<Track> {
    if !(0.0..1.0).contains(&missing_frac) {
        return Err(Error::InvalidParameter("missing fraction must lie in [0, 1)"));
    }
    let days: Vec<u32> = track.observations().keys().copied().collect();
    if days.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let candidates = days.len() - 1;
    let remove = math::floor(missing_frac * candidates as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut dropped: Vec<u32> = index::sample(&mut rng, candidates, remove).into_iter().map(|i| days[i + 1]).collect();
    dropped.sort_unstable();
    let mut masked = Track::new(track.gang_id.clone());
    for (&d, &p) in track.observations() {
        if dropped.binary_search(&d).is_err() {
            masked.insert(d, p)?;
        }
    }
    Ok(masked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySeries {
    pub model: LikelihoodModel,
    pub summaries: Vec<PosteriorSummary>,
}

impl StudySeries {
    pub fn last(&self) -> Option<&PosteriorSummary> {
        self.summaries.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub full: Track,
    pub masked: Track,
    pub series: Vec<StudySeries>,
}

/// Simulates, masks, and fits the masked track without expert knowledge
/// once per likelihood variant, all from the same filter seed.
pub fn run_study(cfg: &SimConfig, filter: &FilterConfig, variants: &[LikelihoodModel]) -> Result<StudyResult> {
    if !filter.bounds.contains(&cfg.truth()) {
        return Err(Error::InvalidParameter("true parameters lie outside the support box"));
    }
    let full = simulate_track(cfg)?;
    let masked = mask_track(&full, cfg.missing_frac, cfg.seed)?;
    let tracks = [masked.clone()];
    let mut series = Vec::with_capacity(variants.len());
    for &model in variants {
        let fc = FilterConfig { model, ..*filter };
        let run = run_sequential(&tracks, None, &fc, &cfg.scale, cfg.seed, None, &mut ())?;
        series.push(StudySeries { model, summaries: run.records.into_iter().map(|r| r.summary).collect() });
    }
    Ok(StudyResult { full, masked, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamBox;

    #[test]
    fn two_day_steps_have_bandwidth_spread() {
        // Per-axis displacement sd over many seeds against h.
        let h = 1.5;
        let (mut sx, mut sy) = (0.0, 0.0);
        let runs = 4000;
        for seed in 0..runs {
            let cfg = SimConfig { n: 2, h, seed, ..SimConfig::appendix_c(seed) };
            let t = simulate_track(&cfg).unwrap();
            let (dx, dy) = cfg.scale.displacement_km(t.get(1).unwrap(), t.get(2).unwrap());
            sx += dx * dx;
            sy += dy * dy;
        }
        let (vx, vy) = (sx / runs as f64, sy / runs as f64);
        // Sample variance of a normal has relative sd sqrt(2 / runs).
        let tol = 4.0 * (2.0 / runs as f64).sqrt() * h * h;
        assert!((vx - h * h).abs() < tol, "{vx}");
        assert!((vy - h * h).abs() < tol, "{vy}");
    }

    #[test]
    fn next_draw_matches_mixture_moments() {
        let scale = KmScale::at_latitude(23.0).unwrap();
        let o = GeoPoint::new(85.0, 23.0);
        let hist = [o, scale.offset(o, 4.0, 0.0), scale.offset(o, 4.0, 3.0)];
        let params = ModelParams { theta: 2.0, h: 0.5 };
        let raw: Vec<f64> = (0..3).map(|i| (-((2 - i) as f64) / 2.0).exp()).collect();
        let total: f64 = raw.iter().sum();
        let xs = [0.0, 4.0, 4.0];
        let ys = [0.0, 0.0, 3.0];
        let mx: f64 = (0..3).map(|i| raw[i] * xs[i]).sum::<f64>() / total;
        let my: f64 = (0..3).map(|i| raw[i] * ys[i]).sum::<f64>() / total;
        let vx: f64 = (0..3).map(|i| raw[i] * (xs[i] - mx).powi(2)).sum::<f64>() / total + 0.25;
        let vy: f64 = (0..3).map(|i| raw[i] * (ys[i] - my).powi(2)).sum::<f64>() / total + 0.25;

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 20000;
        let (mut ax, mut ay, mut axx, mut ayy) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..draws {
            let (x, y) = scale.displacement_km(o, draw_next(&hist, params, &scale, &mut rng).unwrap());
            ax += x;
            ay += y;
            axx += x * x;
            ayy += y * y;
        }
        let d = draws as f64;
        let (ex, ey) = (ax / d, ay / d);
        assert!((ex - mx).abs() < 4.0 * (vx / d).sqrt());
        assert!((ey - my).abs() < 4.0 * (vy / d).sqrt());
        assert!((axx / d - ex * ex - vx).abs() < 0.05 * vx);
        assert!((ayy / d - ey * ey - vy).abs() < 0.05 * vy);
    }

    #[test]
    fn seeded_tracks_repeat() {
        let cfg = SimConfig::appendix_c(3);
        let a = simulate_track(&cfg).unwrap();
        assert_eq!(a, simulate_track(&cfg).unwrap());
        assert_ne!(a, simulate_track(&SimConfig::appendix_c(4)).unwrap());
        assert_eq!(a.len(), 200);
        assert!(a.observations().values().all(|p| p.is_finite()));
    }

    #[test]
    fn masking() {
        let full = simulate_track(&SimConfig { n: 500, ..SimConfig::appendix_c(1) }).unwrap();
        assert_eq!(mask_track(&full, 0.0, 1).unwrap(), full);
        let m = mask_track(&full, 0.4, 9).unwrap();
        assert_eq!(full.len() - m.len(), 199);
        assert_eq!(m.first_day(), Some(1));
        assert!(m.observations().iter().all(|(d, p)| full.get(*d) == Some(*p)));
        assert_eq!(m, mask_track(&full, 0.4, 9).unwrap());
        assert!(mask_track(&full, 1.2, 9).is_err());
    }

    #[test]
    fn no_missingness_makes_variants_identical() {
        let cfg = SimConfig { n: 30, missing_frac: 0.0, ..SimConfig::appendix_c(2) };
        let filter = FilterConfig { particles: 150, bounds: ParamBox::new(1.0, 50.0, 0.2, 10.0).unwrap(), ..FilterConfig::default() };
        let r = run_study(&cfg, &filter, &[LikelihoodModel::Full, LikelihoodModel::Partial]).unwrap();
        assert_eq!(r.full, r.masked);
        assert_eq!(r.series[0].summaries, r.series[1].summaries);
        assert_eq!(r.series[0].summaries.len(), 27);
        assert_eq!(r, run_study(&cfg, &filter, &[LikelihoodModel::Full, LikelihoodModel::Partial]).unwrap());
    }
}
