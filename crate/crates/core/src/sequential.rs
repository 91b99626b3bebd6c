//! The day-by-day filter over all gangs.
//!
//! Every sighting of a gang that already has `min_sightings` earlier
//! sightings is one update. Updates run in (day, gang id) order, and each one
//! goes through inject, Bayes (likelihoods taken at decile proxies by
//! default), strip and rejuvenate. The random
//! stream of update `k` is `k + 1` (stream 0 draws the initial particles), so
//! a run resumed from any saved state continues exactly as an uninterrupted
//! one.

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, KmScale};
use crate::grid::Grid;
use crate::likelihood::LikelihoodModel;
use crate::params::ParamBox;
use crate::particles::{EvaluationPoints, ParticleSet, PosteriorSummary};
use crate::prior::{build_expert_prior, prior_credibility, Credibility, ExpertPrior, ForestRaster, IntelInput, PriorThresholds};
use crate::track::Track;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub particles: usize,
    pub bounds: ParamBox,
    /// Beta kernel spread as a fraction of the weighted particle sd.
    pub smoothing: f64,
    pub model: LikelihoodModel,
    /// Sightings a gang needs before its next one triggers an update.
    pub min_sightings: usize,
    pub evaluation: EvaluationPoints,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { particles: 1000, bounds: ParamBox::default(), smoothing: 0.15, model: LikelihoodModel::Full, min_sightings: 3, evaluation: EvaluationPoints::DecileProxies }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.particles < 100 {
            return Err(Error::InvalidParameter("use at least 100 particles"));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::InvalidParameter("smoothing factor must be positive"));
        }
        if self.min_sightings == 0 {
            return Err(Error::InvalidParameter("updates need at least one earlier sighting"));
        }
        Ok(())
    }
}

/// Everything needed to build the expert map on any day.
#[derive(Debug, Clone)]
pub struct PriorContext {
    pub grid: Grid,
    pub forest: ForestRaster,
    pub camps: Vec<GeoPoint>,
    pub intel: Vec<IntelInput>,
    pub thresholds: PriorThresholds,
    pub credibility: Credibility,
}

impl PriorContext {
    /// Expert map for `gang` on `day`, with its credibility weight.
    pub fn prior_for(&self, track: &Track, day: u32) -> Result<(ExpertPrior, f64)> {
        let recent = track.recent_before(day, self.thresholds.k0.max(1));
        let intel: Vec<IntelInput> = self.intel.iter().filter(|i| i.applies_to(&track.gang_id)).cloned().collect();
        let prior = build_expert_prior(&self.grid, &self.forest, &self.camps, &recent, &intel, day, &self.thresholds)?;
        let p = prior_credibility(prior.used_fresh_intel(), &self.credibility);
        Ok((prior, p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateEvent {
    pub index: usize,
    pub day: u32,
    /// Position of the gang in the input slice.
    pub track: usize,
    pub gang_id: String,
    pub point: GeoPoint,
}

/// All updates in processing order.
pub fn update_schedule(tracks: &[Track], min_sightings: usize) -> Vec<UpdateEvent> {
    let mut events: Vec<UpdateEvent> = Vec::new();
    for (t, track) in tracks.iter().enumerate() {
        for (&day, &point) in track.observations() {
            if track.count_before(day) >= min_sightings {
                events.push(UpdateEvent { index: 0, day, track: t, gang_id: track.gang_id.clone(), point });
            }
        }
    }
    events.sort_by(|a, b| a.day.cmp(&b.day).then_with(|| a.gang_id.cmp(&b.gang_id)).then(a.track.cmp(&b.track)));
    for (i, e) in events.iter_mut().enumerate() {
        e.index = i;
    }
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Inject,
    Bayes,
    Strip,
    Rejuvenate,
}

/// Hooks into a run. The pre-update set, prior and credibility are what a
/// forecast for the event's day is built from.
pub trait UpdateObserver {
    fn before_update(&mut self, _event: &UpdateEvent, _set: &ParticleSet, _prior: Option<&ExpertPrior>, _p_n: f64) -> Result<()> {
        Ok(())
    }

    fn after_stage(&mut self, _event: &UpdateEvent, _stage: Stage, _set: &ParticleSet) {}

    fn after_update(&mut self, _event: &UpdateEvent, _set: &ParticleSet, _summary: &PosteriorSummary) -> Result<()> {
        Ok(())
    }
}

impl UpdateObserver for () {}

/// Filter state between updates.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialState {
    pub set: ParticleSet,
    pub updates_done: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub index: usize,
    pub gang_id: String,
    pub summary: PosteriorSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialRun {
    pub records: Vec<UpdateRecord>,
    pub state: SequentialState,
    /// Largest `|q0 + sum(weights) - 1|` seen at any stage boundary.
    pub max_mass_error: f64,
}

impl SequentialRun {
    /// The summary in force on `day`: the latest update on or before it.
    pub fn summary_on(&self, day: u32) -> Option<&PosteriorSummary> {
        self.records.iter().rev().map(|r| &r.summary).find(|s| s.day <= day)
    }
}

pub fn initial_state(config: &FilterConfig, seed: u64) -> Result<SequentialState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    Ok(SequentialState { set: ParticleSet::init(config.particles, &config.bounds, 0, &mut rng)?, updates_done: 0 })
}

/// Runs every scheduled update not yet in `resume` (or all of them).
pub fn run_sequential<O: UpdateObserver + ?Sized>(
    tracks: &[Track],
    knowledge: Option<&PriorContext>,
    config: &FilterConfig,
    scale: &KmScale,
    seed: u64,
    resume: Option<SequentialState>,
    observer: &mut O,
) -> Result<SequentialRun> {
    config.validate()?;
    let mut state = match resume {
        Some(s) => s,
        None => initial_state(config, seed)?,
    };
    let mut records = Vec::new();
    let mut max_mass_error: f64 = 0.0;

    for event in update_schedule(tracks, config.min_sightings).into_iter().skip(state.updates_done) {
        let track = &tracks[event.track];
        let history = track.history_before(event.day)?;
        let (prior, p_n) = match knowledge {
            Some(ctx) => {
                let (prior, p) = ctx.prior_for(track, event.day)?;
                (Some(prior), p)
            }
            None => (None, 0.0),
        };
        observer.before_update(&event, &state.set, prior.as_ref(), p_n)?;

        let mut check = |stage: Stage, set: &ParticleSet, observer: &mut O| {
            max_mass_error = max_mass_error.max((set.total_mass() - 1.0).abs());
            observer.after_stage(&event, stage, set);
        };
        let injected = state.set.inject_expert_mass(p_n)?;
        check(Stage::Inject, &injected, observer);
        let (mut updated, summary) =
            injected.bayes_update_at(config.evaluation, &history, Some(event.point), prior.as_ref(), config.model, scale)?;
        updated.day = event.day;
        check(Stage::Bayes, &updated, observer);
        let stripped = updated.strip_expert()?;
        check(Stage::Strip, &stripped, observer);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(event.index as u64 + 1);
        let rejuvenated = stripped.rejuvenate(&config.bounds, config.smoothing, &mut rng)?;
        check(Stage::Rejuvenate, &rejuvenated, observer);

        let summary = PosteriorSummary { day: event.day, ..summary };
        observer.after_update(&event, &rejuvenated, &summary)?;
        records.push(UpdateRecord { index: event.index, gang_id: event.gang_id.clone(), summary });
        state = SequentialState { set: rejuvenated, updates_done: event.index + 1 };
    }
    Ok(SequentialRun { records, state, max_mass_error })
}
