//! Sparse day-indexed sightings and the model-day view used by likelihoods.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::likelihood::MissingPattern;

/// Sightings of one entity keyed by calendar day index.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub gang_id: String,
    observations: BTreeMap<u32, GeoPoint>,
}

impl Track {
    pub fn new(gang_id: impl Into<String>) -> Self {
        Self { gang_id: gang_id.into(), observations: BTreeMap::new() }
    }

    pub fn insert(&mut self, day: u32, point: GeoPoint) -> Result<()> {
        if day < 1 {
            return Err(Error::InvalidParameter("day indices start at 1"));
        }
        if !point.is_finite() {
            return Err(Error::InvalidParameter("observation coordinates must be finite"));
        }
        self.observations.insert(day, point);
        Ok(())
    }

    pub fn observations(&self) -> &BTreeMap<u32, GeoPoint> {
        &self.observations
    }

    pub fn get(&self, day: u32) -> Option<GeoPoint> {
        self.observations.get(&day).copied()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn first_day(&self) -> Option<u32> {
        self.observations.keys().next().copied()
    }

    pub fn last_day(&self) -> Option<u32> {
        self.observations.keys().next_back().copied()
    }

    /// Number of sightings strictly before `day`.
    pub fn count_before(&self, day: u32) -> usize {
        self.observations.range(..day).count()
    }

    /// The last `k` sightings strictly before `day`, oldest first.
    pub fn recent_before(&self, day: u32, k: usize) -> Vec<GeoPoint> {
        let mut recent: Vec<GeoPoint> = self.observations.range(..day).rev().take(k).map(|(_, p)| *p).collect();
        recent.reverse();
        recent
    }

    /// Everything known before `day`, re-indexed so the first sighting is
    /// model day 1 and `day` itself is the horizon `n + 1`.
    pub fn history_before(&self, day: u32) -> Result<History> {
        let first = self.first_day().filter(|&f| f < day).ok_or(Error::EmptyHistory)?;
        let observed = self
            .observations
            .range(..day)
            .map(|(&d, &p)| ((d - first + 1) as usize, p))
            .collect();
        History::new((day - first) as usize, observed)
    }
}

/// Model-day view of a track: days `1..=n`, of which `observed` are known.
/// Day 1 is always observed.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    n: usize,
    observed: Vec<(usize, GeoPoint)>,
}

impl History {
    pub fn new(n: usize, observed: Vec<(usize, GeoPoint)>) -> Result<Self> {
        match observed.first() {
            None => return Err(Error::EmptyHistory),
            Some(&(1, _)) => {}
            Some(_) => return Err(Error::InvalidParameter("history must start with an observed day 1")),
        }
        if observed.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter("observed days must be strictly increasing"));
        }
        if observed.last().is_some_and(|&(d, _)| d > n) {
            return Err(Error::InvalidParameter("observed day beyond the horizon"));
        }
        if observed.iter().any(|(_, p)| !p.is_finite()) {
            return Err(Error::InvalidParameter("observation coordinates must be finite"));
        }
        Ok(Self { n, observed })
    }

    /// A history with every day `1..=points.len()` observed.
    pub fn complete(points: &[GeoPoint]) -> Result<Self> {
        Self::new(points.len(), points.iter().enumerate().map(|(i, &p)| (i + 1, p)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.n + 1
    }

    pub fn observed(&self) -> &[(usize, GeoPoint)] {
        &self.observed
    }

    pub fn points(&self) -> impl Iterator<Item = GeoPoint> + '_ {
        self.observed.iter().map(|(_, p)| *p)
    }

    pub fn is_observed(&self, day: usize) -> bool {
        self.observed.binary_search_by_key(&day, |(d, _)| *d).is_ok()
    }

    pub fn pattern(&self) -> MissingPattern {
        let mut missing = Vec::with_capacity(self.n - self.observed.len());
        let mut next = self.observed.iter().map(|(d, _)| *d).peekable();
        for day in 1..=self.n {
            if next.peek() == Some(&day) {
                next.next();
            } else {
                missing.push(day);
            }
        }
        MissingPattern::new(self.n, missing).expect("history invariants imply a valid pattern")
    }

    /// Same history with day `day` observed at `point`.
    pub fn with_observation(&self, day: usize, point: GeoPoint) -> Result<Self> {
        if day < 1 || day > self.n || self.is_observed(day) {
            return Err(Error::InvalidParameter("can only fill an unobserved day within the history"));
        }
        let mut observed = self.observed.clone();
        let at = observed.partition_point(|(d, _)| *d < day);
        observed.insert(at, (day, point));
        Self::new(self.n, observed)
    }

    /// The history as it stood before day `n`, i.e. days `1..n` with horizon `n`.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.n {
            return Err(Error::InvalidParameter("cannot extend a history by truncation"));
        }
        Self::new(n, self.observed.iter().copied().filter(|(d, _)| *d <= n).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_reindexes_from_first_sighting() {
        let mut t = Track::new("A");
        t.insert(10, GeoPoint::new(85.0, 23.0)).unwrap();
        t.insert(12, GeoPoint::new(85.1, 23.0)).unwrap();
        t.insert(15, GeoPoint::new(85.2, 23.0)).unwrap();
        let h = t.history_before(15).unwrap();
        assert_eq!(h.n(), 5);
        assert_eq!(h.observed().iter().map(|(d, _)| *d).collect::<Vec<_>>(), [1, 3]);
        assert_eq!(h.pattern().missing(), &[2, 4, 5]);
        assert!(t.history_before(10).is_err());
        assert_eq!(t.count_before(15), 2);
        assert_eq!(t.recent_before(16, 2), [GeoPoint::new(85.1, 23.0), GeoPoint::new(85.2, 23.0)]);
    }

    #[test]
    fn history_validation() {
        let p = GeoPoint::new(85.0, 23.0);
        assert!(History::new(3, alloc::vec![(2, p)]).is_err());
        assert!(History::new(3, alloc::vec![(1, p), (1, p)]).is_err());
        assert!(History::new(3, alloc::vec![(1, p), (4, p)]).is_err());
        assert!(History::new(3, alloc::vec![]).is_err());
        let h = History::new(3, alloc::vec![(1, p), (3, p)]).unwrap();
        assert!(h.with_observation(3, p).is_err());
        let filled = h.with_observation(2, p).unwrap();
        assert!(filled.pattern().is_empty());
        assert_eq!(h.truncated(2).unwrap().n(), 2);
    }
}
