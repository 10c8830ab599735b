//! What the DSO knows when it plans a window: the profiles of the window's
//! hours, the outage events that overlap it (clipped to it), and the
//! state it inherits from the hours already committed.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::model::{OutageEvent, Scenario};

/// Conditions at the start of a window (end of the previous hour).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub dg_on: BTreeMap<String, bool>,
    pub dg_p: BTreeMap<String, f64>,
    pub h2_mass: BTreeMap<String, f64>,
    pub battery_soc: BTreeMap<String, f64>,
}

impl InitialState {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            dg_on: s.fleet.dgs.iter().map(|d| (d.id.clone(), d.initial_status)).collect(),
            dg_p: s
                .fleet
                .dgs
                .iter()
                .map(|d| (d.id.clone(), if d.initial_status { d.initial_p } else { 0.0 }))
                .collect(),
            h2_mass: s.fleet.h2.iter().map(|h| (h.id.clone(), h.initial_mass)).collect(),
            battery_soc: s.fleet.batteries.iter().map(|b| (b.id.clone(), b.initial_soc)).collect(),
        }
    }
}

/// Tank-reserve requirement of one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reserve {
    pub kappa: f64,
    /// first hour of the run that leads up to this hour
    pub anchor: usize,
}

#[derive(Debug, Clone)]
pub struct ForecastWindow<'a> {
    pub scenario: &'a Scenario,
    pub start: usize,
    pub end: usize,
    /// events overlapping the window, clipped to it
    pub events: Vec<OutageEvent>,
    reserve: Vec<Option<Reserve>>,
}

/// The slice of the scenario visible to a window `[start, start + len − 1]`
/// (shrunk at the end of the horizon). An event is visible once it has
/// started or starts inside the window, and is clipped to the window; events
/// that start after the window are absent, not zeroed.
pub fn reveal_forecast(scenario: &Scenario, start: usize, len: usize) -> ForecastWindow<'_> {
    let h = scenario.horizon();
    assert!(start >= 1 && start <= h && len >= 1, "window outside the horizon");
    let end = (start + len - 1).min(h);
    let events: Vec<OutageEvent> = scenario
        .timeline
        .outage_events
        .iter()
        .filter(|e| e.start_hour <= end && e.end_hour >= start)
        .map(|e| OutageEvent {
            start_hour: e.start_hour.max(start),
            end_hour: e.end_hour.min(end),
            ..e.clone()
        })
        .collect();

    let lead = scenario.options.kappa_lead;
    let reserve = (start..=end)
        .map(|t| {
            if events.iter().any(|e| e.covers(t)) {
                return None;
            }
            // the nearest visible event still ahead of t
            let ahead = events.iter().filter(|e| e.start_hour > t).map(|e| e.start_hour).min();
            let base = scenario.timeline.kappa[t - 1];
            match ahead {
                Some(te) if t + lead >= te => Some(Reserve {
                    kappa: 1.0,
                    anchor: start.max(te.saturating_sub(lead)),
                }),
                _ if base > 0.0 => Some(Reserve { kappa: base, anchor: start }),
                _ => None,
            }
        })
        .collect();
    ForecastWindow {
        scenario,
        start,
        end,
        events,
        reserve,
    }
}

impl<'a> ForecastWindow<'a> {
    pub fn hours(&self) -> RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: usize) -> bool {
        self.hours().contains(&t)
    }

    fn check(&self, t: usize) {
        assert!(self.contains(t), "hour {t} outside window {}-{}", self.start, self.end);
    }

    pub fn tie_live(&self, t: usize) -> bool {
        self.check(t);
        !self.events.iter().any(|e| e.disconnected_tie && e.covers(t))
    }

    /// Hours covered by a visible event; load shedding is only modelled here.
    pub fn emergency(&self, t: usize) -> bool {
        self.check(t);
        self.events.iter().any(|e| e.covers(t))
    }

    pub fn failed(&self, asset: &str, t: usize) -> bool {
        self.check(t);
        self.events.iter().any(|e| e.covers(t) && e.failed_assets.iter().any(|a| a == asset))
    }

    pub fn reserve(&self, t: usize) -> Option<Reserve> {
        self.check(t);
        self.reserve[t - self.start]
    }

    /// Exchange capacity across the tie in hour t.
    pub fn exchange_cap(&self, t: usize) -> f64 {
        if self.tie_live(t) {
            self.scenario.dn.exchange_limit
        } else {
            0.0
        }
    }

    pub fn load_p(&self, node: usize, t: usize) -> f64 {
        self.check(t);
        self.scenario.timeline.load_p(node, t)
    }

    pub fn load_q(&self, node: usize, t: usize) -> f64 {
        self.check(t);
        self.scenario.timeline.load_q(node, t)
    }

    pub fn demand(&self, h2_id: &str, t: usize) -> f64 {
        self.check(t);
        self.scenario.timeline.demand(h2_id, t)
    }

    pub fn cbdr(&self, t: usize) -> f64 {
        self.check(t);
        self.scenario.timeline.cbdr[t - 1]
    }

    pub fn bid(&self, t: usize) -> f64 {
        self.check(t);
        self.scenario.timeline.dso_bid_price[t - 1]
    }

    pub fn offer(&self, t: usize) -> f64 {
        self.check(t);
        self.scenario.timeline.dso_offer_price[t - 1]
    }

    pub fn sell_price(&self, t: usize) -> f64 {
        self.check(t);
        self.scenario.timeline.dn_sell_price[t - 1]
    }

    pub fn pv_max(&self, pv: usize, t: usize) -> f64 {
        self.check(t);
        self.scenario.fleet.pvs[pv].p_max_profile[t - 1]
    }

    pub fn wind_max(&self, w: usize, t: usize) -> f64 {
        self.check(t);
        self.scenario.tn.wind_farms[w].availability[t - 1]
    }

    pub fn tn_load(&self, bus: usize, t: usize) -> f64 {
        self.check(t);
        self.scenario.tn.load(bus, t)
    }
}
