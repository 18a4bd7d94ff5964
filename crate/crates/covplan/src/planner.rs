//! Assembles formations, tour, and critical times into executable per-agent
//! schedules.
//!
//! All agents share the same phase clock: dwell at the coverage formation,
//! transit, dwell at the charging formation (one agent on the outlet),
//! transit back. Each phase advances every agent one step along the tour,
//! so agent rotations differ only by a starting offset and each agent
//! reaches the outlet exactly once per macro-cycle of N phases.

use serde::{Deserialize, Serialize};

use crate::energy::{duty_cycle_optimize, optimal_speed, CriticalTimes, EnergyModel, SocChain};
use crate::error::{Error, Result};
use crate::formation::Formation;
use crate::geom::Point2;
use crate::routing::AlternatingTour;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    /// Dwell at a coverage node, sensing on.
    CoverDwell,
    /// Synchronized move toward the charging formation.
    TransitToCharging,
    /// Dwell at a non-station charging node, sensing on.
    ChargingDwell,
    /// On the charging outlet.
    StationCharge,
    /// Synchronized move back to the coverage formation.
    TransitToCoverage,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhaseSeg {
    pub kind: PhaseKind,
    /// Offset of the segment start within the macro-cycle.
    pub start: f64,
    pub duration: f64,
    pub from: Point2,
    pub to: Point2,
    pub speed: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentItinerary {
    /// Tour rotation: the coverage slot this agent occupies in phase 0.
    pub offset: usize,
    pub segments: Vec<PhaseSeg>,
}

impl AgentItinerary {
    /// Segment active at `t` within the macro-cycle, with local elapsed time.
    pub fn segment_at(&self, t: f64) -> (&PhaseSeg, f64) {
        for seg in &self.segments {
            if t < seg.start + seg.duration {
                return (seg, t - seg.start);
            }
        }
        let last = self.segments.last().expect("nonempty itinerary");
        (last, t - last.start)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleSchedule {
    pub coverage_formation: Formation,
    pub charging_formation: Formation,
    pub tour: AlternatingTour,
    pub model: EnergyModel,
    pub times: CriticalTimes,
    pub duty_fraction: f64,
    pub arrival_soc: f64,
    pub chain: SocChain,
    pub itineraries: Vec<AgentItinerary>,
    pub phase_period: f64,
    pub macro_period: f64,
}

impl CycleSchedule {
    pub fn n_agents(&self) -> usize {
        self.itineraries.len()
    }

    /// Position of an agent at a schedule time (for playback checks).
    pub fn position_at(&self, agent: usize, t: f64) -> Point2 {
        let local = t.rem_euclid(self.macro_period.max(f64::MIN_POSITIVE));
        let (seg, elapsed) = self.itineraries[agent].segment_at(local);
        if seg.duration <= 0.0 || seg.speed == 0.0 {
            seg.from
        } else {
            seg.from.lerp(seg.to, (elapsed / seg.duration).clamp(0.0, 1.0))
        }
    }
}

/// Builds the duty-cycle-optimal schedule for the given formations and tour.
pub fn build_schedule(
    ocv: &Formation,
    och: &Formation,
    tour: &AlternatingTour,
    model: &EnergyModel,
) -> Result<CycleSchedule> {
    let n = tour.n_agents();
    if ocv.n_agents() != n || och.n_agents() != n {
        return Err(Error::Config(format!(
            "tour covers {n} agents but formations have {} and {}",
            ocv.n_agents(),
            och.n_agents()
        )));
    }
    let duty = duty_cycle_optimize(tour, model)?;
    let times = duty.times;
    let itineraries: Vec<AgentItinerary> =
        (0..n).map(|agent| build_itinerary(agent, tour, &times, model)).collect::<Result<_>>()?;

    // Exactly one agent may hold the outlet in any phase.
    for phase in 0..n {
        let holders = itineraries
            .iter()
            .filter(|it| (it.offset + phase) % n == n - 1)
            .count();
        if holders != 1 {
            return Err(Error::Violation(format!(
                "{holders} agents scheduled on the outlet in phase {phase}"
            )));
        }
    }

    let phase_period = times.phase_period();
    Ok(CycleSchedule {
        coverage_formation: ocv.clone(),
        charging_formation: och.clone(),
        tour: tour.clone(),
        model: *model,
        times,
        duty_fraction: duty.duty_fraction,
        arrival_soc: duty.arrival_soc,
        chain: duty.chain,
        itineraries,
        phase_period,
        macro_period: n as f64 * phase_period,
    })
}

fn build_itinerary(
    offset: usize,
    tour: &AlternatingTour,
    times: &CriticalTimes,
    model: &EnergyModel,
) -> Result<AgentItinerary> {
    let n = tour.n_agents();
    let n2 = 2 * n;
    let mut segments = Vec::with_capacity(4 * n);
    let mut t = 0.0;
    for phase in 0..n {
        let slot = (offset + phase) % n;
        let cover_pt = tour.points[2 * slot];
        let charge_pt = tour.points[2 * slot + 1];
        let next_cover_pt = tour.points[(2 * slot + 2) % n2];

        segments.push(PhaseSeg {
            kind: PhaseKind::CoverDwell,
            start: t,
            duration: times.dwell,
            from: cover_pt,
            to: cover_pt,
            speed: 0.0,
            heading: 0.0,
        });
        t += times.dwell;

        segments.push(transit_segment(
            PhaseKind::TransitToCharging,
            t,
            times.to_charging,
            cover_pt,
            charge_pt,
            model,
        )?);
        t += times.to_charging;

        let at_station = slot == n - 1;
        segments.push(PhaseSeg {
            kind: if at_station { PhaseKind::StationCharge } else { PhaseKind::ChargingDwell },
            start: t,
            duration: times.charge,
            from: charge_pt,
            to: charge_pt,
            speed: 0.0,
            heading: 0.0,
        });
        t += times.charge;

        segments.push(transit_segment(
            PhaseKind::TransitToCoverage,
            t,
            times.to_coverage,
            charge_pt,
            next_cover_pt,
            model,
        )?);
        t += times.to_coverage;
    }
    Ok(AgentItinerary { offset, segments })
}

fn transit_segment(
    kind: PhaseKind,
    start: f64,
    duration: f64,
    from: Point2,
    to: Point2,
    model: &EnergyModel,
) -> Result<PhaseSeg> {
    let dist = from.distance_to(to);
    let (speed, heading) = if dist == 0.0 {
        (0.0, 0.0)
    } else {
        let plan = optimal_speed(from, to, duration, model)?;
        (plan.speed, plan.heading)
    };
    if speed > model.max_speed * (1.0 + 1e-9) {
        return Err(Error::Violation(format!(
            "scheduled transit needs speed {speed} above the maximum {}",
            model.max_speed
        )));
    }
    Ok(PhaseSeg { kind, start, duration, from, to, speed, heading })
}

/// Reassigns tour rotations from initial SOC: with equal charge the
/// canonical order stands; otherwise the lowest agent takes the rotation
/// that reaches the outlet first, the next lowest the one after, and so on.
pub fn assign_start_offsets(schedule: &CycleSchedule, initial_soc: &[f64]) -> Result<CycleSchedule> {
    let n = schedule.n_agents();
    if initial_soc.len() != n {
        return Err(Error::Config(format!(
            "{} initial SOC values for {n} agents",
            initial_soc.len()
        )));
    }
    if initial_soc.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::Config("initial SOC must lie in [0, 1]".into()));
    }

    let all_equal = initial_soc.windows(2).all(|w| w[0] == w[1]);
    let mut offsets = vec![0usize; n];
    if all_equal {
        for (agent, slot) in offsets.iter_mut().enumerate() {
            *slot = agent;
        }
    } else {
        // Offset n-1 charges in phase 0, n-2 in phase 1, and so on.
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.sort_by(|&a, &b| {
            initial_soc[a].partial_cmp(&initial_soc[b]).unwrap().then(a.cmp(&b))
        });
        for (rank, agent) in ranked.into_iter().enumerate() {
            offsets[agent] = n - 1 - rank;
        }
    }

    // Itineraries are a pure function of the tour, times, and offset.
    let mut out = schedule.clone();
    for (agent, offset) in offsets.into_iter().enumerate() {
        out.itineraries[agent] =
            build_itinerary(offset, &schedule.tour, &schedule.times, &schedule.model)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyModel;
    use crate::formation::{Formation, FormationKind};
    use crate::geom::cmp_lex;
    use crate::routing::{build_graph, solve_alternating_tour, TourMode};

    fn reference_inputs() -> (Formation, Formation, AlternatingTour, EnergyModel) {
        let mut ocv_pos = vec![
            Point2::new(186.7, 119.3),
            Point2::new(160.3, 371.1),
            Point2::new(451.4, 290.4),
        ];
        ocv_pos.sort_by(cmp_lex);
        let mut och_pos = vec![
            Point2::new(0.0, 0.0),
            Point2::new(169.3, 320.2),
            Point2::new(430.6, 185.0),
        ];
        och_pos.sort_by(cmp_lex);
        let station = och_pos.iter().position(|p| p.x == 0.0 && p.y == 0.0).unwrap();
        let ocv = Formation {
            kind: FormationKind::Coverage,
            positions: ocv_pos,
            pinned: None,
            achieved_h: 0.0,
            converged: true,
        };
        let och = Formation {
            kind: FormationKind::Charging,
            positions: och_pos,
            pinned: Some(station),
            achieved_h: 0.0,
            converged: true,
        };
        let graph = build_graph(&ocv, &och).unwrap();
        let tour = solve_alternating_tour(&graph, TourMode::Exact).unwrap();
        let model = EnergyModel::linear(0.0005, 0.0005, 0.01, 50.0).unwrap();
        (ocv, och, tour, model)
    }

    #[test]
    fn reference_macro_cycle_period() {
        let (ocv, och, tour, model) = reference_inputs();
        let s = build_schedule(&ocv, &och, &tour, &model).unwrap();
        assert!((s.macro_period - 678.8).abs() < 1.5, "macro={}", s.macro_period);
        assert_eq!(s.itineraries.len(), 3);
    }

    #[test]
    fn exactly_one_agent_at_max_speed_per_transition() {
        let (ocv, och, tour, model) = reference_inputs();
        let s = build_schedule(&ocv, &och, &tour, &model).unwrap();
        for phase in 0..s.n_agents() {
            for kind in [PhaseKind::TransitToCharging, PhaseKind::TransitToCoverage] {
                let speeds: Vec<f64> = s
                    .itineraries
                    .iter()
                    .map(|it| it.segments[4 * phase + if kind == PhaseKind::TransitToCharging { 1 } else { 3 }])
                    .map(|seg| {
                        assert_eq!(seg.kind, kind);
                        seg.speed
                    })
                    .collect();
                let at_cap = speeds.iter().filter(|&&v| (v - model.max_speed).abs() < 1e-9).count();
                assert_eq!(at_cap, 1, "phase {phase}: speeds {speeds:?}");
                assert!(speeds.iter().all(|&v| v <= model.max_speed + 1e-9));
            }
        }
    }

    #[test]
    fn outlet_intervals_are_disjoint_and_complete() {
        let (ocv, och, tour, model) = reference_inputs();
        let s = build_schedule(&ocv, &och, &tour, &model).unwrap();
        let mut intervals: Vec<(f64, f64, usize)> = Vec::new();
        for (agent, it) in s.itineraries.iter().enumerate() {
            for seg in &it.segments {
                if seg.kind == PhaseKind::StationCharge {
                    intervals.push((seg.start, seg.start + seg.duration, agent));
                }
            }
        }
        assert_eq!(intervals.len(), s.n_agents());
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in intervals.windows(2) {
            assert!(w[0].1 <= w[1].0 + 1e-9, "overlapping outlet use: {w:?}");
        }
        for (a, b, _) in &intervals {
            assert!((b - a - s.times.charge).abs() < 1e-9);
        }
    }

    #[test]
    fn visited_nodes_follow_rotated_tour_order(){
        let (ocv, och, tour, model) = reference_inputs();
        let s = build_schedule(&ocv, &och, &tour, &model).unwrap();
        for it in &s.itineraries {
            for (phase, chunk) in it.segments.chunks(4).enumerate() {
                let slot = (it.offset + phase) % s.n_agents();
                assert_eq!(chunk[0].from, tour.points[2 * slot]);
                assert_eq!(chunk[2].from, tour.points[2 * slot + 1]);
            }
        }
    }

    #[test]
    fn single_agent_schedule_alternates_with_station() {
        let p = Formation {
            kind: FormationKind::Coverage,
            positions: vec![Point2::new(30.0, 40.0)],
            pinned: None,
            achieved_h: 0.0,
            converged: true,
        };
        let q = Formation {
            kind: FormationKind::Charging,
            positions: vec![Point2::new(0.0, 0.0)],
            pinned: Some(0),
            achieved_h: 0.0,
            converged: true,
        };
        let graph = build_graph(&p, &q).unwrap();
        let tour = solve_alternating_tour(&graph, TourMode::Exact).unwrap();
        let model = EnergyModel::linear(0.0005, 0.0005, 0.01, 50.0).unwrap();
        let s = build_schedule(&p, &q, &tour, &model).unwrap();
        let kinds: Vec<PhaseKind> = s.itineraries[0].segments.iter().map(|x| x.kind).collect();
        assert_eq!(
            kinds,
            vec![
                PhaseKind::CoverDwell,
                PhaseKind::TransitToCharging,
                PhaseKind::StationCharge,
                PhaseKind::TransitToCoverage
            ]
        );
    }

    #[test]
    fn offsets_equal_soc_keeps_canonical_order() {
        let (ocv, och, tour, model) = reference_inputs();
        let s = build_schedule(&ocv, &och, &tour, &model).unwrap();
        let re = assign_start_offsets(&s, &[1.0, 1.0, 1.0]).unwrap();
        let offsets: Vec<usize> = re.itineraries.iter().map(|it| it.offset).collect();
        assert_eq!(offsets, vec![0, 1, 2]);
    }

    #[test]
    fn offsets_send_lowest_soc_to_the_outlet_first() {
        let (ocv, och, tour, model) = reference_inputs();
        let s = build_schedule(&ocv, &och, &tour, &model).unwrap();
        let re = assign_start_offsets(&s, &[1.0, 1.0, 0.1]).unwrap();
        let n = re.n_agents();
        // Offset n-1 charges in phase 0.
        assert_eq!(re.itineraries[2].offset, n - 1);
        // Invariants survive the permutation.
        for phase in 0..n {
            let holders = re
                .itineraries
                .iter()
                .filter(|it| (it.offset + phase) % n == n - 1)
                .count();
            assert_eq!(holders, 1);
        }
    }

    #[test]
    fn planned_soc_stays_nonnegative() {
        let (ocv, och, tour, model) = reference_inputs();
        let s = build_schedule(&ocv, &och, &tour, &model).unwrap();
        assert!(s.chain.min_soc() >= 0.0);
        assert!(s.arrival_soc > 0.0);
    }

    #[test]
    fn schedules_are_deterministic() {
        let (ocv, och, tour, model) = reference_inputs();
        let a = build_schedule(&ocv, &och, &tour, &model).unwrap();
        let b = build_schedule(&ocv, &och, &tour, &model).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
