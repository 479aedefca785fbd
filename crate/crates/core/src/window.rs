//! Calendar-day window arithmetic over a timestamp-sorted event store.
//!
//! Windows are trailing: the window anchored at day `a` covers days
//! `a - len + 1 ..= a`, so its values never depend on later data.

use alloc::vec::Vec;
use core::ops::Range;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// UTC calendar day (days since 1970-01-01) of a unix timestamp.
#[inline]
pub fn day_index(timestamp: i64) -> i64 {
    timestamp.div_euclid(SECONDS_PER_DAY)
}

/// One trailing window over the sorted events.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    /// Final day of the window.
    pub anchor: i64,
    /// First day covered (may precede the sample start for the leading windows).
    pub first_day: i64,
    pub length_days: u32,
    /// Indices into the sorted event store.
    pub events: Range<usize>,
}

impl WindowSpec {
    pub fn event_count(&self) -> usize {
        self.events.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowPlan {
    pub windows: Vec<WindowSpec>,
    /// Set when the sample spans fewer days than one window; a single window
    /// then covers everything.
    pub degenerate: bool,
    pub first_day: i64,
    pub last_day: i64,
}

/// Plans one window per calendar day of the sample from the (sorted) day
/// index of every event.
pub fn plan_windows(event_days: &[i64], length_days: u32) -> WindowPlan {
    assert!(length_days >= 1, "window length must be positive");
    debug_assert!(event_days.windows(2).all(|w| w[0] <= w[1]), "events must be sorted");
    let (Some(&first_day), Some(&last_day)) = (event_days.first(), event_days.last()) else {
        return WindowPlan {
            windows: Vec::new(),
            degenerate: false,
            first_day: 0,
            last_day: -1,
        };
    };
    let len = i64::from(length_days);
    let span = last_day - first_day + 1;
    if span < len {
        return WindowPlan {
            windows: alloc::vec![WindowSpec {
                anchor: last_day,
                first_day,
                length_days,
                events: 0..event_days.len(),
            }],
            degenerate: true,
            first_day,
            last_day,
        };
    }
    let windows = (first_day..=last_day)
        .map(|anchor| {
            let start_day = anchor - len + 1;
            let lo = event_days.partition_point(|&d| d < start_day);
            let hi = event_days.partition_point(|&d| d <= anchor);
            WindowSpec {
                anchor,
                first_day: start_day,
                length_days,
                events: lo..hi,
            }
        })
        .collect();
    WindowPlan {
        windows,
        degenerate: false,
        first_day,
        last_day,
    }
}

/// Number of windows an event on `day` falls into, given the sample's last day.
pub fn windows_containing(day: i64, last_day: i64, length_days: u32) -> i64 {
    (last_day - day + 1).clamp(0, i64::from(length_days))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn day_boundaries_are_utc_midnight() {
        assert_eq!(day_index(1_609_804_800), 18_632); // 2021-01-05T00:00:00Z
        assert_eq!(day_index(1_609_804_799), 18_631);
        assert_eq!(day_index(-1), -1);
    }

    #[test]
    fn ten_day_sample_seven_day_windows() {
        // one event per day, days 0..10
        let days: Vec<i64> = (0..10).collect();
        let plan = plan_windows(&days, 7);
        assert_eq!(plan.windows.len(), 10);
        let counts: Vec<usize> = plan.windows.iter().map(WindowSpec::event_count).collect();
        // first six windows are partial: 1, 2, .., 6 days of data
        assert_eq!(counts, vec![1, 2, 3, 4, 5, 6, 7, 7, 7, 7]);
        assert!(!plan.degenerate);
    }

    #[test]
    fn event_appears_in_following_windows() {
        let days = vec![0, 3, 3, 9, 12];
        let plan = plan_windows(&days, 7);
        // event index 3 (day 9) belongs to windows anchored 9..=12
        let anchors: Vec<i64> = plan
            .windows
            .iter()
            .filter(|w| w.events.contains(&3))
            .map(|w| w.anchor)
            .collect();
        assert_eq!(anchors, vec![9, 10, 11, 12]);
        assert_eq!(windows_containing(9, 12, 7), 4);
    }

    #[test]
    fn short_span_collapses_to_one_window() {
        let plan = plan_windows(&[5, 6, 6, 8], 7);
        assert!(plan.degenerate);
        assert_eq!(plan.windows.len(), 1);
        assert_eq!(plan.windows[0].events, 0..4);
    }

    #[test]
    fn span_of_761_days_gives_761_windows() {
        let days: Vec<i64> = (0..761).collect();
        assert_eq!(plan_windows(&days, 7).windows.len(), 761);
    }

    #[test]
    fn empty_input_has_no_windows() {
        assert!(plan_windows(&[], 7).windows.is_empty());
    }
}
