//! Battery model, transit energy costs, cycle feasibility, and duty-cycle
//! optimization.
//!
//! State of charge lives in [0, 1]. While deployed, an agent depletes at
//! `motion_cost * speed + sensing_cost * b`; while on the charging outlet it
//! gains `charge_rate - sensing_cost` net. The closed-form planning layer
//! below assumes this linear law; the simulator additionally accepts custom
//! laws through [`BatteryLaw::Custom`], which the planner rejects with a
//! diagnostic instead of silently mis-planning.
//!
//! A planning cycle visits all 2N tour nodes. With synchronized transitions
//! every agent is in transit for the full shared transition time, so over
//! one cycle an agent pays `motion_cost * D` for the whole tour length `D`
//! plus sensing for every dwell and transit, and receives one charge. The
//! station-arrival SOC that reproduces itself after a cycle is the
//! feasibility fixed point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::routing::AlternatingTour;

#[derive(Debug, Clone, Copy, Default)]
pub enum BatteryLaw {
    /// Depletion `-(motion_cost * v + sensing_cost * b)`, net charging
    /// `charge_rate - sensing_cost * b`.
    #[default]
    Linear,
    /// `deplete(q, v, b)` must be <= 0, `charge(q, b)` >= 0.
    Custom {
        deplete: fn(f64, f64, bool) -> f64,
        charge: fn(f64, bool) -> f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyModel {
    /// SOC per length-unit of motion.
    pub motion_cost: f64,
    /// SOC per second while sensing.
    pub sensing_cost: f64,
    /// Gross SOC per second delivered by the charging outlet.
    pub charge_rate: f64,
    /// Maximum agent speed, length-units per second.
    pub max_speed: f64,
    #[serde(skip, default)]
    pub law: BatteryLaw,
}

impl EnergyModel {
    pub fn linear(motion_cost: f64, sensing_cost: f64, charge_rate: f64, max_speed: f64) -> Result<Self> {
        if !(motion_cost > 0.0) || !(sensing_cost > 0.0) {
            return Err(Error::Config(format!(
                "motion and sensing costs must be positive, got {motion_cost} and {sensing_cost}"
            )));
        }
        if !(charge_rate > sensing_cost) {
            return Err(Error::Config(format!(
                "charge rate {charge_rate} must exceed the sensing cost {sensing_cost}"
            )));
        }
        if !(max_speed > 0.0) {
            return Err(Error::Config(format!("max speed must be positive, got {max_speed}")));
        }
        Ok(EnergyModel { motion_cost, sensing_cost, charge_rate, max_speed, law: BatteryLaw::Linear })
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.law, BatteryLaw::Linear)
    }

    fn require_linear(&self, what: &str) -> Result<()> {
        if self.is_linear() {
            Ok(())
        } else {
            Err(Error::UnsupportedModel(format!(
                "{what} is only available for the linear battery law; run the simulator for custom laws"
            )))
        }
    }

    /// Depletion rate (<= 0) at speed `v` with sensing flag `b`.
    pub fn depletion_rate(&self, q: f64, v: f64, b: bool) -> f64 {
        match self.law {
            BatteryLaw::Linear => {
                -(self.motion_cost * v + if b { self.sensing_cost } else { 0.0 })
            }
            BatteryLaw::Custom { deplete, .. } => deplete(q, v, b),
        }
    }

    /// Charging rate (>= 0) with sensing flag `b`.
    pub fn charging_rate(&self, q: f64, b: bool) -> f64 {
        match self.law {
            BatteryLaw::Linear => self.charge_rate - if b { self.sensing_cost } else { 0.0 },
            BatteryLaw::Custom { charge, .. } => charge(q, b),
        }
    }

    /// Time to reach full charge from `q` (linear law).
    pub fn full_charge_time(&self, q: f64) -> f64 {
        (1.0 - q).max(0.0) / (self.charge_rate - self.sensing_cost)
    }
}

/// One explicit-Euler depletion step, clamped into [0, 1]. Exact for the
/// linear law since its rate is state-independent.
pub fn deplete(q: f64, v: f64, b: bool, dt: f64, model: &EnergyModel) -> f64 {
    (q + model.depletion_rate(q, v, b) * dt).clamp(0.0, 1.0)
}

/// SOC after charging for `tau` seconds with sensing on, saturating at full.
/// Closed form for the linear law; Euler substeps otherwise.
pub fn charge_update(q: f64, tau: f64, model: &EnergyModel) -> f64 {
    match model.law {
        BatteryLaw::Linear => (q + (model.charge_rate - model.sensing_cost) * tau).min(1.0),
        BatteryLaw::Custom { charge, .. } => {
            let mut q = q;
            let substep = 0.01f64;
            let mut left = tau;
            while left > 0.0 {
                let dt = left.min(substep);
                q = (q + charge(q, true) * dt).min(1.0);
                left -= dt;
            }
            q
        }
    }
}

/// SOC change (<= 0) of a transit leg of length `dist` taking `tau` seconds
/// at the optimal constant-speed profile, sensing on.
pub fn transit_cost(q: f64, tau: f64, dist: f64, model: &EnergyModel) -> Result<f64> {
    model.require_linear("transit cost")?;
    let _ = q; // cost is SOC-independent for the linear law
    if tau < 0.0 || dist < 0.0 {
        return Err(Error::Config(format!("negative transit: dist {dist}, tau {tau}")));
    }
    if dist > model.max_speed * tau * (1.0 + 1e-12) {
        return Err(Error::InfeasibleTransition { distance: dist, duration: tau, max_speed: model.max_speed });
    }
    Ok(-(model.motion_cost * dist + model.sensing_cost * tau))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransitPlan {
    pub speed: f64,
    /// Heading in [0, 2π).
    pub heading: f64,
    /// Energy spent over the leg, `motion_cost * dist + sensing_cost * tau`.
    pub cost: f64,
}

/// Minimum-energy motion between two points in a fixed time window: constant
/// speed along the straight line. Any feasible profile with the same
/// endpoints and duration costs at least as much under the linear law.
pub fn optimal_speed(start: Point2, end: Point2, tau: f64, model: &EnergyModel) -> Result<TransitPlan> {
    model.require_linear("optimal speed profile")?;
    let dist = start.distance_to(end);
    if dist == 0.0 {
        return Ok(TransitPlan { speed: 0.0, heading: 0.0, cost: model.sensing_cost * tau });
    }
    if tau <= 0.0 || dist > model.max_speed * tau * (1.0 + 1e-12) {
        return Err(Error::InfeasibleTransition { distance: dist, duration: tau, max_speed: model.max_speed });
    }
    Ok(TransitPlan {
        speed: dist / tau,
        heading: start.heading_to(end),
        cost: model.motion_cost * dist + model.sensing_cost * tau,
    })
}

/// The four critical times of a cycle. Dwell at charging locations equals
/// the charging time, so only one charging-side dwell appears.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriticalTimes {
    /// Charging time, also the dwell at the charging formation.
    pub charge: f64,
    /// Dwell at the coverage formation.
    pub dwell: f64,
    /// Transition time from the charging to the coverage formation.
    pub to_coverage: f64,
    /// Transition time from the coverage to the charging formation.
    pub to_charging: f64,
}

impl CriticalTimes {
    pub fn phase_period(&self) -> f64 {
        self.charge + self.dwell + self.to_coverage + self.to_charging
    }
}

/// Shared transition times: every transition lasts as long as its longest
/// leg takes at maximum speed, so the farthest agent moves at exactly
/// `max_speed` and the rest arrive simultaneously at lower speeds.
pub fn transition_times(tour: &AlternatingTour, max_speed: f64) -> (f64, f64) {
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    let to_cov = max(&mut tour.to_coverage_legs()) / max_speed;
    let to_chg = max(&mut tour.to_charging_legs()) / max_speed;
    (to_cov, to_chg)
}

/// Planned arrival/departure SOC at each tour node, station last.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocChain {
    pub arrive: Vec<f64>,
    pub depart: Vec<f64>,
}

impl SocChain {
    pub fn min_soc(&self) -> f64 {
        self.arrive.iter().chain(self.depart.iter()).copied().fold(f64::INFINITY, f64::min)
    }
}

/// Walks one full cycle forward from a station arrival at `q_station`,
/// returning the SOC at every node boundary. The final entry of `arrive`
/// is the next station arrival; for a feasible fixed point it equals
/// `q_station`.
pub fn soc_chain(
    tour: &AlternatingTour,
    model: &EnergyModel,
    times: &CriticalTimes,
    q_station: f64,
) -> Result<SocChain> {
    model.require_linear("the SOC chain")?;
    let n2 = tour.points.len();
    let mut arrive = vec![0.0; n2];
    let mut depart = vec![0.0; n2];
    let station = n2 - 1;
    arrive[station] = q_station;
    depart[station] = charge_update(q_station, times.charge, model);

    let mut q = depart[station];
    for k in 0..n2 - 1 {
        // Leg from tour position (station + 1 + k - 1) wrapping; walking the
        // cycle in visit order starting right after the station.
        let from = (station + k) % n2;
        let to = (from + 1) % n2;
        let leg = tour.leg_lengths[from];
        let tau = if to % 2 == 0 { times.to_coverage } else { times.to_charging };
        q += transit_cost(q, tau, leg, model)?;
        arrive[to] = q;
        let dwell = if to % 2 == 0 { times.dwell } else { times.charge };
        q -= model.sensing_cost * dwell;
        depart[to] = q;
    }
    // Close the cycle: last to-charging leg back to the station.
    let leg = tour.leg_lengths[n2 - 2];
    q += transit_cost(q, times.to_charging, leg, model)?;
    arrive[station] = q;
    Ok(SocChain { arrive, depart })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Feasibility {
    /// Station-arrival SOC at the cycle fixed point (0 when the scenario is
    /// feasible at all).
    pub arrival_soc: f64,
    /// Minimum charging time keeping the SOC non-decreasing over a cycle.
    pub min_charge_time: f64,
    pub times: CriticalTimes,
    pub chain: SocChain,
}

/// Solves the cycle-feasibility problem for a given coverage dwell.
///
/// For the linear law the non-decreasing-SOC condition reduces to
/// `tau_c * (c - N*beta) >= motion_cost * D + N*beta*(transitions + dwell)`
/// with `c` the charge rate and `beta` the sensing cost, so the minimum
/// charging time is explicit. The chain is then walked forward from the
/// fixed-point arrival SOC as a consistency check.
pub fn feasibility_solve(tour: &AlternatingTour, model: &EnergyModel, dwell: f64) -> Result<Feasibility> {
    model.require_linear("feasibility analysis")?;
    if dwell < 0.0 {
        return Err(Error::Config(format!("dwell time must be >= 0, got {dwell}")));
    }
    let n = tour.n_agents() as f64;
    let team_sensing = n * model.sensing_cost;
    if model.charge_rate <= team_sensing {
        return Err(Error::Infeasible(format!(
            "charging cannot offset depletion: charge rate {} <= team sensing drain {}",
            model.charge_rate, team_sensing
        )));
    }
    let (to_cov, to_chg) = transition_times(tour, model.max_speed);
    let min_charge_time = (model.motion_cost * tour.total_length
        + team_sensing * (to_cov + to_chg)
        + team_sensing * dwell)
        / (model.charge_rate - team_sensing);
    let cap = model.full_charge_time(0.0);
    if min_charge_time > cap * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "minimum charging time {min_charge_time:.4} s exceeds the full-charge time {cap:.4} s; \
             an agent cannot bank enough energy for one cycle"
        )));
    }
    let times = CriticalTimes { charge: min_charge_time, dwell, to_coverage: to_cov, to_charging: to_chg };
    let arrival_soc = 0.0;
    let chain = soc_chain(tour, model, &times, arrival_soc)?;
    if chain.min_soc() < -1e-9 {
        return Err(Error::Infeasible(format!(
            "planned SOC drops to {:.6} inside the mission space",
            chain.min_soc()
        )));
    }
    Ok(Feasibility { arrival_soc, min_charge_time, times, chain })
}

/// Conservative sufficient condition `charge_rate >= n * (motion_cost *
/// max_speed + sensing_cost)`: the outlet outruns the worst-case team drain.
/// Advisory only; scenarios failing it are routinely still feasible.
pub fn sufficient_feasibility_check(model: &EnergyModel, n: usize) -> bool {
    model.charge_rate >= n as f64 * (model.motion_cost * model.max_speed + model.sensing_cost)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DutyCycle {
    pub times: CriticalTimes,
    /// Fraction of the phase period spent dwelling at the coverage formation.
    pub duty_fraction: f64,
    /// Station-arrival SOC of the optimized cycle.
    pub arrival_soc: f64,
    pub chain: SocChain,
    /// False when the cycle has no spare energy for a coverage dwell.
    pub has_slack: bool,
}

/// Maximizes the coverage-dwell fraction of the cycle.
///
/// Agents leave the outlet exactly when full, so the charging time is the
/// full-charge time from the fixed-point arrival SOC; the dwell then takes
/// every second the energy budget allows:
/// `dwell = (1 - motion_cost * D) / (N * sensing_cost) - charge - transitions`,
/// clamped at zero.
pub fn duty_cycle_optimize(tour: &AlternatingTour, model: &EnergyModel) -> Result<DutyCycle> {
    let feas = feasibility_solve(tour, model, 0.0)?;
    let n = tour.n_agents() as f64;
    let charge = model.full_charge_time(feas.arrival_soc);
    let budget = 1.0 - model.motion_cost * tour.total_length;
    let transitions = feas.times.to_coverage + feas.times.to_charging;
    let dwell_raw = budget / (n * model.sensing_cost) - charge - transitions;
    let has_slack = dwell_raw > 0.0;
    let dwell = dwell_raw.max(0.0);
    let times = CriticalTimes {
        charge,
        dwell,
        to_coverage: feas.times.to_coverage,
        to_charging: feas.times.to_charging,
    };
    // Station arrival of the optimized cycle: depart full, pay motion for
    // the whole tour, sense everywhere but on the outlet.
    let arrival_soc = 1.0
        - model.motion_cost * tour.total_length
        - n * model.sensing_cost * (transitions + dwell)
        - (n - 1.0) * model.sensing_cost * charge;
    if arrival_soc < -1e-9 {
        return Err(Error::Infeasible(format!(
            "optimized cycle arrives at the station with SOC {arrival_soc:.6}"
        )));
    }
    let arrival_soc = arrival_soc.max(0.0);
    let chain = soc_chain(tour, model, &times, arrival_soc)?;
    Ok(DutyCycle {
        times,
        duty_fraction: dwell / times.phase_period(),
        arrival_soc,
        chain,
        has_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::{solve_alternating_tour, BipartiteTourGraph, TourMode};
    use approx::assert_relative_eq;

    fn reference_model() -> EnergyModel {
        EnergyModel::linear(0.0005, 0.0005, 0.01, 50.0).unwrap()
    }

    fn reference_tour() -> AlternatingTour {
        // Node lists in canonical (lexicographic) order, as build_graph
        // receives them from solved formations.
        let g = BipartiteTourGraph::from_points(
            vec![
                Point2::new(160.3, 371.1),
                Point2::new(186.7, 119.3),
                Point2::new(451.4, 290.4),
            ],
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(169.3, 320.2),
                Point2::new(430.6, 185.0),
            ],
            0,
        )
        .unwrap();
        solve_alternating_tour(&g, TourMode::Exact).unwrap()
    }

    fn degenerate_tour() -> AlternatingTour {
        let p = vec![Point2::new(5.0, 5.0), Point2::new(6.0, 7.0)];
        let g = BipartiteTourGraph::from_points(p.clone(), p, 0).unwrap();
        // Identical parts admit a zero-length matching but the cycle itself
        // still has positive legs; for a truly zero-length tour use n = 1.
        solve_alternating_tour(&g, TourMode::Exact).unwrap()
    }

    #[test]
    fn model_rejects_bad_parameters() {
        assert!(EnergyModel::linear(0.0, 0.0005, 0.01, 50.0).is_err());
        assert!(EnergyModel::linear(0.0005, 0.0005, 0.0005, 50.0).is_err());
        assert!(EnergyModel::linear(0.0005, 0.0005, 0.01, 0.0).is_err());
    }

    #[test]
    fn deplete_examples() {
        let m = reference_model();
        assert_eq!(deplete(0.5, 0.0, false, 10.0, &m), 0.5);
        assert_relative_eq!(deplete(1.0, 50.0, true, 1.0, &m), 0.9745, epsilon = 1e-12);
        assert_eq!(deplete(0.01, 50.0, true, 1.0, &m), 0.0);
    }

    #[test]
    fn charge_examples() {
        let m = reference_model();
        let tau_full = 1.0 / (m.charge_rate - m.sensing_cost);
        assert_relative_eq!(charge_update(0.0, tau_full, &m), 1.0, epsilon = 1e-12);
        assert_eq!(charge_update(0.37, 0.0, &m), 0.37);
        assert_eq!(charge_update(0.9, 1e6, &m), 1.0);
    }

    #[test]
    fn transit_cost_examples() {
        let m = reference_model();
        let dwell_only = transit_cost(0.8, 12.0, 0.0, &m).unwrap();
        assert_relative_eq!(dwell_only, -m.sensing_cost * 12.0, epsilon = 1e-15);
        let leg = transit_cost(1.0, 404.2416 / 50.0, 404.2416, &m).unwrap();
        assert!((leg - (-0.2062)).abs() < 1e-3, "leg={leg}");
        assert!(matches!(
            transit_cost(1.0, 1.0, 100.0, &m),
            Err(Error::InfeasibleTransition { .. })
        ));
    }

    #[test]
    fn transit_cost_is_additive_over_legs() {
        let m = reference_model();
        let a = transit_cost(0.9, 3.0, 100.0, &m).unwrap();
        let b = transit_cost(0.9 + a, 5.0, 150.0, &m).unwrap();
        let joint = transit_cost(0.9, 8.0, 250.0, &m).unwrap();
        assert_relative_eq!(a + b, joint, epsilon = 1e-12);
    }

    #[test]
    fn optimal_speed_examples() {
        let m = reference_model();
        let stay = optimal_speed(Point2::new(4.0, 4.0), Point2::new(4.0, 4.0), 5.0, &m).unwrap();
        assert_eq!(stay.speed, 0.0);
        assert_relative_eq!(stay.cost, m.sensing_cost * 5.0, epsilon = 1e-15);

        let long = optimal_speed(Point2::new(0.0, 0.0), Point2::new(404.2416, 0.0), 8.084832, &m).unwrap();
        assert_relative_eq!(long.speed, 50.0, epsilon = 1e-9);
        assert_eq!(long.heading, 0.0);
        // Theorem consistency: -transit_cost equals the plan cost.
        let h = transit_cost(1.0, 8.084832, 404.2416, &m).unwrap();
        assert_relative_eq!(-h, long.cost, epsilon = 1e-12);

        assert!(optimal_speed(Point2::new(0.0, 0.0), Point2::new(100.0, 0.0), 1.0, &m).is_err());
    }

    #[test]
    fn transition_times_reference_values() {
        let tour = reference_tour();
        let (to_cov, to_chg) = transition_times(&tour, 50.0);
        assert!((to_cov - 8.0848).abs() < 1e-3, "to_cov={to_cov}");
        assert!((to_chg - 4.4312).abs() < 1e-3, "to_chg={to_chg}");
    }

    #[test]
    fn transition_times_equal_legs() {
        // Square corners, parts on opposite diagonals: every cycle leg is 10.
        let g = BipartiteTourGraph::from_points(
            vec![Point2::new(0.0, 0.0), Point2::new(10.0, 10.0)],
            vec![Point2::new(10.0, 0.0), Point2::new(0.0, 10.0)],
            0,
        )
        .unwrap();
        let tour = solve_alternating_tour(&g, TourMode::Exact).unwrap();
        let (a, b) = transition_times(&tour, 2.0);
        assert_relative_eq!(a, 5.0, epsilon = 1e-12);
        assert_relative_eq!(b, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn feasibility_reference_scenario() {
        let tour = reference_tour();
        let m = reference_model();
        let f = feasibility_solve(&tour, &m, 0.0).unwrap();
        assert_eq!(f.arrival_soc, 0.0);
        assert!((f.min_charge_time - 79.94).abs() < 0.5, "tau_c_min={}", f.min_charge_time);
        // Fixed point: the chain returns exactly to the arrival SOC.
        let back = f.chain.arrive[tour.points.len() - 1];
        assert!((back - f.arrival_soc).abs() < 1e-9);
        assert!(f.chain.min_soc() >= -1e-12);
    }

    #[test]
    fn feasibility_rejects_hopeless_models() {
        let tour = reference_tour();
        let weak = EnergyModel::linear(0.0005, 0.0005, 0.0014, 50.0).unwrap();
        assert!(matches!(feasibility_solve(&tour, &weak, 0.0), Err(Error::Infeasible(_))));
        let heavy = EnergyModel::linear(0.1, 0.0005, 0.01, 50.0).unwrap();
        assert!(matches!(feasibility_solve(&tour, &heavy, 0.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn feasibility_degenerate_short_tour() {
        let tour = degenerate_tour();
        let m = EnergyModel::linear(0.0005, 0.0005, 0.01, 50.0).unwrap();
        let f = feasibility_solve(&tour, &m, 0.0).unwrap();
        // Tiny tour: minimum charging time stays near zero.
        assert!(f.min_charge_time < 1.0);
    }

    #[test]
    fn sufficient_check_examples() {
        let m = reference_model();
        assert!(!sufficient_feasibility_check(&m, 3));
        let strong = EnergyModel::linear(0.0005, 0.0005, 1.0, 50.0).unwrap();
        assert!(sufficient_feasibility_check(&strong, 3));
        assert!(sufficient_feasibility_check(&m, 0));
    }

    #[test]
    fn duty_cycle_reference_scenario() {
        let tour = reference_tour();
        let m = reference_model();
        let d = duty_cycle_optimize(&tour, &m).unwrap();
        assert!((d.times.charge - 105.263).abs() < 1e-2, "charge={}", d.times.charge);
        assert!((d.times.dwell - 108.4).abs() < 0.5, "dwell={}", d.times.dwell);
        assert!((d.duty_fraction - 0.479).abs() < 0.01, "fraction={}", d.duty_fraction);
        assert!(d.has_slack);
        // Saturating fixed point: one more cycle reproduces the arrival SOC.
        let back = d.chain.arrive[tour.points.len() - 1];
        assert!((back - d.arrival_soc).abs() < 1e-9);
        // The energy-budget identity behind the dwell formula is tight.
        let n = tour.n_agents() as f64;
        let spent = m.motion_cost * tour.total_length
            + n * m.sensing_cost
                * (d.times.dwell + d.times.charge + d.times.to_coverage + d.times.to_charging);
        assert_relative_eq!(spent, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn duty_cycle_zero_length_tour() {
        let p = vec![Point2::new(0.0, 0.0)];
        let g = BipartiteTourGraph::from_points(p.clone(), p, 0).unwrap();
        let tour = solve_alternating_tour(&g, TourMode::Exact).unwrap();
        let m = reference_model();
        let d = duty_cycle_optimize(&tour, &m).unwrap();
        let expect_charge = 1.0 / (m.charge_rate - m.sensing_cost);
        let expect_dwell = 1.0 / m.sensing_cost - expect_charge;
        assert_relative_eq!(d.times.charge, expect_charge, epsilon = 1e-9);
        assert_relative_eq!(d.times.dwell, expect_dwell, epsilon = 1e-6);
    }

    #[test]
    fn duty_cycle_dwell_shrinks_with_motion_cost() {
        let tour = reference_tour();
        let mut last = f64::INFINITY;
        for motion in [0.0002, 0.0004, 0.0006] {
            let m = EnergyModel::linear(motion, 0.0005, 0.01, 50.0).unwrap();
            let d = duty_cycle_optimize(&tour, &m).unwrap();
            assert!(d.times.dwell <= last + 1e-12);
            last = d.times.dwell;
        }
    }

    #[test]
    fn planner_rejects_custom_laws() {
        fn g(_q: f64, _v: f64, _b: bool) -> f64 {
            -0.001
        }
        fn f(_q: f64, _b: bool) -> f64 {
            0.01
        }
        let mut m = reference_model();
        m.law = BatteryLaw::Custom { deplete: g, charge: f };
        let tour = reference_tour();
        assert!(matches!(
            feasibility_solve(&tour, &m, 0.0),
            Err(Error::UnsupportedModel(_))
        ));
        assert!(matches!(
            optimal_speed(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), 1.0, &m),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn soc_stays_in_bounds_under_repeated_updates() {
        let m = reference_model();
        let mut q = 0.6;
        for k in 0..2000 {
            q = if k % 3 == 0 {
                charge_update(q, 7.0, &m)
            } else {
                deplete(q, (k % 50) as f64, k % 2 == 0, 1.5, &m)
            };
            assert!((0.0..=1.0).contains(&q));
        }
    }
}
