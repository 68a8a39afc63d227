//! The three daily recommendation segments.
//!
//! Segments start at hours 10, 16 and 22 of each day and last 6, 6 and 12
//! hours; the 22:00 segment runs across midnight to 10:00 the next day.
//! Membership is by elapsed hours from the anchor.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::corpus::{Catalog, Timestamp};
use crate::{Error, Result};

/// `(hour of day, length in hours)` for each daily segment.
pub const DAILY_SEGMENTS: [(u64, u64); 3] = [(10, 6), (16, 6), (22, 12)];

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segment {
    pub anchor: Timestamp,
    pub len: u64,
    /// 0, 1 or 2 for the 10:00, 16:00 and 22:00 segments.
    pub ordinal: u8,
}

impl Segment {
    /// Segment containing `t`, or `None` if its anchor would precede the epoch.
    pub fn containing(t: Timestamp) -> Option<Segment> {
        let day = t.day();
        let hod = t.hour_of_day();
        let (anchor_day, ordinal) = match hod {
            10..=15 => (Some(day), 0),
            16..=21 => (Some(day), 1),
            22..=23 => (Some(day), 2),
            _ => (day.checked_sub(1), 2),
        };
        let (anchor_hod, len) = DAILY_SEGMENTS[ordinal as usize];
        anchor_day.map(|d| Segment {
            anchor: Timestamp(d * 24 + anchor_hod),
            len,
            ordinal,
        })
    }

    /// The segment anchored exactly at `t`.
    pub fn anchored_at(t: Timestamp) -> Result<Segment> {
        DAILY_SEGMENTS
            .iter()
            .position(|&(hod, _)| hod == t.hour_of_day())
            .map(|ordinal| Segment {
                anchor: t,
                len: DAILY_SEGMENTS[ordinal].1,
                ordinal: ordinal as u8,
            })
            .ok_or(Error::NotAnAnchor { hour: t.0 })
    }

    /// Exclusive end hour.
    pub fn end(&self) -> Timestamp {
        self.anchor.plus(self.len)
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.anchor <= t && t < self.end()
    }

    /// The segment that ends at this segment's anchor.
    pub fn previous(&self) -> Option<Segment> {
        self.anchor.checked_minus(1).and_then(Segment::containing)
    }

    pub fn next(&self) -> Segment {
        Segment::containing(self.end()).expect("segment after a valid segment")
    }

    pub fn hours(&self) -> impl Iterator<Item = Timestamp> {
        (self.anchor.0..self.end().0).map(Timestamp)
    }
}

pub fn is_anchor(t: Timestamp) -> bool {
    Segment::anchored_at(t).is_ok()
}

/// All segments intersecting an hour range.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentIndex {
    start: Timestamp,
    end: Timestamp,
    segments: Vec<Segment>,
}

impl SegmentIndex {
    /// Segments covering `[start, end)`. Hours before the first anchor after
    /// the epoch (hours 0..10 of day 0) have no segment.
    pub fn build(start: Timestamp, end: Timestamp) -> SegmentIndex {
        let mut segments = Vec::new();
        let first = (start.0..end.0.max(start.0))
            .map(Timestamp)
            .find_map(Segment::containing);
        if let Some(mut seg) = first {
            while seg.anchor < end {
                segments.push(seg);
                seg = seg.next();
            }
        }
        SegmentIndex {
            start,
            end,
            segments,
        }
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Segment of `t` if `t` lies in the indexed range.
    pub fn locate(&self, t: Timestamp) -> Option<Segment> {
        if t < self.start || t >= self.end {
            return None;
        }
        Segment::containing(t)
    }
}

/// Items available during each segment, by anchor.
#[derive(Clone, Debug, Default)]
pub struct AvailabilityIndex {
    by_anchor: BTreeMap<Timestamp, Vec<usize>>,
}

impl AvailabilityIndex {
    pub fn new(catalog: &Catalog, segments: &[Segment]) -> Self {
        let by_anchor = segments
            .iter()
            .map(|s| (s.anchor, catalog.available_during(s.anchor, s.end())))
            .collect();
        AvailabilityIndex { by_anchor }
    }

    /// Catalog indices available in the segment anchored at `anchor`, in id order.
    pub fn available(&self, anchor: Timestamp) -> &[usize] {
        self.by_anchor.get(&anchor).map_or(&[], Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day_hour(day: u64, hod: u64) -> Timestamp {
        Timestamp(day * 24 + hod)
    }

    #[test]
    fn morning_purchase_maps_to_ten() {
        let s = Segment::containing(day_hour(3, 11)).unwrap();
        assert_eq!(s.anchor, day_hour(3, 10));
        assert_eq!(s.len, 6);
    }

    #[test]
    fn late_evening_maps_to_same_day_22() {
        let s = Segment::containing(day_hour(3, 23)).unwrap();
        assert_eq!(s.anchor, day_hour(3, 22));
        assert_eq!(s.len, 12);
    }

    #[test]
    fn early_morning_maps_to_previous_day_22() {
        let s = Segment::containing(day_hour(3, 3)).unwrap();
        assert_eq!(s.anchor, day_hour(2, 22));
        // 22:00 + 12h = 10:00 next day.
        assert_eq!(s.end(), day_hour(3, 10));
        assert!(Segment::containing(day_hour(0, 3)).is_none());
    }

    #[test]
    fn previous_segments_chain() {
        let s = Segment::anchored_at(day_hour(5, 10)).unwrap();
        let p = s.previous().unwrap();
        assert_eq!(p.anchor, day_hour(4, 22));
        assert_eq!(p.previous().unwrap().anchor, day_hour(4, 16));
        assert!(Segment::anchored_at(day_hour(5, 11)).is_err());
    }

    #[test]
    fn index_covers_range() {
        let idx = SegmentIndex::build(day_hour(1, 0), day_hour(3, 0));
        assert_eq!(idx.segments().first().unwrap().anchor, day_hour(0, 22));
        for h in day_hour(1, 0).0..day_hour(3, 0).0 {
            let t = Timestamp(h);
            let seg = idx.locate(t).unwrap();
            assert!(idx.segments().contains(&seg));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn every_hour_has_exactly_one_segment(h in 10u64..10_000_000) {
            let t = Timestamp(h);
            let seg = Segment::containing(t).unwrap();
            prop_assert!(seg.contains(t));
            let holders = [seg.previous().unwrap(), seg, seg.next()]
                .iter()
                .filter(|s| s.contains(t))
                .count();
            prop_assert_eq!(holders, 1);
        }
    }

    #[test]
    fn segments_tile_each_day() {
        for day in 1..5u64 {
            let mut covered = 0;
            let mut seg = Segment::anchored_at(day_hour(day, 10)).unwrap();
            while seg.anchor < day_hour(day + 1, 10) {
                covered += seg.len;
                assert_eq!(seg.next().anchor, seg.end());
                seg = seg.next();
            }
            assert_eq!(covered, 24);
        }
    }
}
