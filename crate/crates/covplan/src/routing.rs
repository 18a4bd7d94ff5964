//! Shortest alternating tour over the coverage and charging formations.
//!
//! The two formations induce a complete bipartite graph: coverage locations
//! on one side, charging locations (including the station) on the other.
//! Agents rotate through all 2N locations, strictly alternating sides, so
//! the routing problem is the minimum-length Hamiltonian cycle that
//! alternates parts. The exact solver enumerates all such cycles with
//! branch-and-bound pruning (N is the number of agents per station, so it
//! stays small); the heuristic is nearest-neighbor construction plus
//! alternation-preserving 2-opt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::Formation;
use crate::geom::Point2;

/// Hard cap for exact enumeration; N! * (N-1)! cycles beyond this are not
/// worth the wait.
pub const EXACT_MAX_AGENTS: usize = 9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BipartiteTourGraph {
    pub coverage_nodes: Vec<Point2>,
    pub charging_nodes: Vec<Point2>,
    /// Index of the charging station within `charging_nodes`.
    pub station: usize,
    /// Cross-part weights, row-major: `weights[i * n + j]` is the distance
    /// from coverage node `i` to charging node `j`.
    weights: Vec<f64>,
}

impl BipartiteTourGraph {
    pub fn from_points(
        coverage_nodes: Vec<Point2>,
        charging_nodes: Vec<Point2>,
        station: usize,
    ) -> Result<Self> {
        let n = coverage_nodes.len();
        if n == 0 || charging_nodes.len() != n {
            return Err(Error::Config(format!(
                "bipartite tour graph needs equal nonempty parts, got {} and {}",
                n,
                charging_nodes.len()
            )));
        }
        if station >= n {
            return Err(Error::Config(format!("station index {station} out of range for {n} nodes")));
        }
        let mut weights = Vec::with_capacity(n * n);
        for a in &coverage_nodes {
            for b in &charging_nodes {
                weights.push(a.distance_to(*b));
            }
        }
        Ok(BipartiteTourGraph { coverage_nodes, charging_nodes, station, weights })
    }

    pub fn n_agents(&self) -> usize {
        self.coverage_nodes.len()
    }

    #[inline]
    pub fn weight(&self, coverage_idx: usize, charging_idx: usize) -> f64 {
        self.weights[coverage_idx * self.charging_nodes.len() + charging_idx]
    }
}

/// Builds the graph from solved formations. The charging formation must
/// carry its station pin.
pub fn build_graph(ocv: &Formation, och: &Formation) -> Result<BipartiteTourGraph> {
    if ocv.n_agents() != och.n_agents() {
        return Err(Error::Config(format!(
            "formation sizes differ: {} coverage vs {} charging",
            ocv.n_agents(),
            och.n_agents()
        )));
    }
    let station = och.pinned.ok_or_else(|| {
        Error::Config("charging formation has no station-pinned position".into())
    })?;
    BipartiteTourGraph::from_points(ocv.positions.clone(), och.positions.clone(), station)
}

/// A Hamiltonian cycle alternating coverage and charging nodes.
///
/// The cycle is stored station-last: `points[2k]` is the k-th coverage node
/// visited and `points[2k+1]` the charging node after it, with
/// `points[2N-1]` the station. Leg `k` runs from `points[k]` to
/// `points[(k+1) % 2N]`, so even-indexed legs head to a charging node and
/// odd-indexed legs head to a coverage node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlternatingTour {
    pub coverage_order: Vec<usize>,
    pub charging_order: Vec<usize>,
    pub points: Vec<Point2>,
    pub leg_lengths: Vec<f64>,
    pub total_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TourMode {
    Exact,
    Heuristic,
}

impl AlternatingTour {
    fn from_orders(graph: &BipartiteTourGraph, coverage_order: Vec<usize>, charging_order: Vec<usize>) -> Self {
        let n = graph.n_agents();
        let mut points = Vec::with_capacity(2 * n);
        for k in 0..n {
            points.push(graph.coverage_nodes[coverage_order[k]]);
            points.push(graph.charging_nodes[charging_order[k]]);
        }
        let leg_lengths: Vec<f64> =
            (0..2 * n).map(|k| points[k].distance_to(points[(k + 1) % (2 * n)])).collect();
        let total_length = leg_lengths.iter().sum();
        AlternatingTour { coverage_order, charging_order, points, leg_lengths, total_length }
    }

    pub fn n_agents(&self) -> usize {
        self.coverage_order.len()
    }

    /// Legs from a coverage node to a charging node (even indices).
    pub fn to_charging_legs(&self) -> impl Iterator<Item = f64> + '_ {
        self.leg_lengths.iter().copied().step_by(2)
    }

    /// Legs from a charging node to a coverage node (odd indices).
    pub fn to_coverage_legs(&self) -> impl Iterator<Item = f64> + '_ {
        self.leg_lengths.iter().copied().skip(1).step_by(2)
    }

    /// Structural checks: strict alternation with the station last, every
    /// node visited exactly once, and bookkeeping consistent.
    pub fn validate(&self, graph: &BipartiteTourGraph) -> Result<()> {
        let n = graph.n_agents();
        let is_perm = |order: &[usize]| {
            let mut seen = vec![false; n];
            order.len() == n
                && order.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
        };
        if !is_perm(&self.coverage_order) || !is_perm(&self.charging_order) {
            return Err(Error::Violation("tour does not visit every node exactly once".into()));
        }
        if self.charging_order[n - 1] != graph.station {
            return Err(Error::Violation("tour does not close at the station".into()));
        }
        let rebuilt = AlternatingTour::from_orders(
            graph,
            self.coverage_order.clone(),
            self.charging_order.clone(),
        );
        if rebuilt.points != self.points {
            return Err(Error::Violation("tour points inconsistent with node orders".into()));
        }
        let leg_sum: f64 = self.leg_lengths.iter().sum();
        if (leg_sum - self.total_length).abs() > 1e-6 {
            return Err(Error::Violation("tour length does not match its legs".into()));
        }
        Ok(())
    }
}

/// Minimum-length alternating Hamiltonian cycle.
///
/// Exact mode is a pruned but exhaustive enumeration and is provably
/// optimal; heuristic mode never returns a tour longer than plain
/// nearest-neighbor construction.
pub fn solve_alternating_tour(graph: &BipartiteTourGraph, mode: TourMode) -> Result<AlternatingTour> {
    let n = graph.n_agents();
    match mode {
        TourMode::Exact => {
            if n > EXACT_MAX_AGENTS {
                return Err(Error::Config(format!(
                    "exact tour enumeration supports at most {EXACT_MAX_AGENTS} agents, got {n}"
                )));
            }
            Ok(canonicalize(graph, exact_search(graph)))
        }
        TourMode::Heuristic => {
            let (cov, chg) = nearest_neighbor_orders(graph);
            let nn = AlternatingTour::from_orders(graph, cov, chg);
            let improved = two_opt(graph, nn.clone());
            debug_assert!(improved.total_length <= nn.total_length + 1e-9);
            Ok(canonicalize(graph, improved))
        }
    }
}

/// Depth-first enumeration over (coverage permutation, charging permutation)
/// pairs with the station fixed last. Partial paths already longer than the
/// incumbent are pruned, which never discards an optimal cycle.
fn exact_search(graph: &BipartiteTourGraph) -> AlternatingTour {
    struct Search<'a> {
        graph: &'a BipartiteTourGraph,
        n: usize,
        cov: Vec<usize>,
        chg: Vec<usize>,
        cov_used: Vec<bool>,
        chg_used: Vec<bool>,
        best_len: f64,
        best: Option<(Vec<usize>, Vec<usize>)>,
    }

    impl Search<'_> {
        fn place_coverage(&mut self, depth: usize, len: f64) {
            if len >= self.best_len {
                return;
            }
            for i in 0..self.n {
                if self.cov_used[i] {
                    continue;
                }
                // Cost of arriving at coverage node i from the previous
                // charging node (or from the station for the first slot).
                let from = if depth == 0 { self.graph.station } else { self.chg[depth - 1] };
                let enter = self.graph.weight(i, from);
                self.cov_used[i] = true;
                self.cov[depth] = i;
                self.place_charging(depth, len + enter);
                self.cov_used[i] = false;
            }
        }

        fn place_charging(&mut self, depth: usize, len: f64) {
            if len >= self.best_len {
                return;
            }
            if depth == self.n - 1 {
                let total = len + self.graph.weight(self.cov[depth], self.graph.station);
                if total < self.best_len {
                    self.best_len = total;
                    self.best = Some((self.cov.clone(), {
                        let mut chg = self.chg.clone();
                        chg[depth] = self.graph.station;
                        chg
                    }));
                }
                return;
            }
            for j in 0..self.n {
                if self.chg_used[j] || j == self.graph.station {
                    continue;
                }
                let leave = self.graph.weight(self.cov[depth], j);
                self.chg_used[j] = true;
                self.chg[depth] = j;
                self.place_coverage(depth + 1, len + leave);
                self.chg_used[j] = false;
            }
        }
    }

    let n = graph.n_agents();
    let mut search = Search {
        graph,
        n,
        cov: vec![0; n],
        chg: vec![0; n],
        cov_used: vec![false; n],
        chg_used: vec![false; n],
        best_len: f64::INFINITY,
        best: None,
    };
    search.place_coverage(0, 0.0);
    let (cov, chg) = search.best.expect("nonempty graph always has a tour");
    AlternatingTour::from_orders(graph, cov, chg)
}

/// Greedy construction: walk from the station, always to the nearest
/// unvisited node of the opposite part, leaving the station for last.
fn nearest_neighbor_orders(graph: &BipartiteTourGraph) -> (Vec<usize>, Vec<usize>) {
    let n = graph.n_agents();
    let mut cov = Vec::with_capacity(n);
    let mut chg = Vec::with_capacity(n);
    let mut cov_used = vec![false; n];
    let mut chg_used = vec![false; n];
    chg_used[graph.station] = true;
    let mut at_charging = graph.station;
    for slot in 0..n {
        let next_cov = (0..n)
            .filter(|&i| !cov_used[i])
            .min_by(|&a, &b| {
                graph
                    .weight(a, at_charging)
                    .partial_cmp(&graph.weight(b, at_charging))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap();
        cov_used[next_cov] = true;
        cov.push(next_cov);
        if slot == n - 1 {
            chg.push(graph.station);
        } else {
            let next_chg = (0..n)
                .filter(|&j| !chg_used[j])
                .min_by(|&a, &b| {
                    graph
                        .weight(next_cov, a)
                        .partial_cmp(&graph.weight(next_cov, b))
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .unwrap();
            chg_used[next_chg] = true;
            chg.push(next_chg);
            at_charging = next_chg;
        }
    }
    (cov, chg)
}

/// 2-opt restricted to odd-length segment reversals, which keep the cycle
/// alternating. First-improvement scans repeat until no move helps.
fn two_opt(graph: &BipartiteTourGraph, tour: AlternatingTour) -> AlternatingTour {
    let n2 = 2 * graph.n_agents();
    if n2 < 4 {
        return tour;
    }
    // Work on the interleaved node sequence; even slots hold coverage ids.
    let mut seq: Vec<usize> = Vec::with_capacity(n2);
    for k in 0..graph.n_agents() {
        seq.push(tour.coverage_order[k]);
        seq.push(tour.charging_order[k]);
    }
    let dist = |seq: &[usize], a: usize, b: usize| -> f64 {
        // One endpoint is in each part whenever the slot parities differ.
        if a % 2 == 0 {
            graph.weight(seq[a], seq[b])
        } else {
            graph.weight(seq[b], seq[a])
        }
    };

    let mut improved = true;
    while improved {
        improved = false;
        'scan: for a in 0..n2 - 1 {
            // Replace edges (a, a+1), (b, b+1) with (a, b), (a+1, b+1);
            // b - a odd keeps parts on opposite slot parities.
            let mut b = a + 3;
            while b < n2 {
                if a == 0 && b == n2 - 1 {
                    break; // edges adjacent through the wraparound
                }
                let b_next = (b + 1) % n2;
                let delta = dist(&seq, a, b) + dist(&seq, a + 1, b_next)
                    - dist(&seq, a, a + 1)
                    - dist(&seq, b, b_next);
                if delta < -1e-9 {
                    seq[a + 1..=b].reverse();
                    improved = true;
                    continue 'scan;
                }
                b += 2;
            }
        }
    }

    // Rotate so the station sits in the last slot again.
    let station_slot = seq
        .iter()
        .enumerate()
        .position(|(k, &id)| k % 2 == 1 && id == graph.station)
        .expect("station stays on charging slots");
    seq.rotate_left((station_slot + 1) % n2);
    let cov: Vec<usize> = seq.iter().copied().step_by(2).collect();
    let chg: Vec<usize> = seq.iter().copied().skip(1).step_by(2).collect();
    AlternatingTour::from_orders(graph, cov, chg)
}

/// Picks the traversal direction whose first coverage node has the smaller
/// index, so equivalent cycles serialize identically.
fn canonicalize(graph: &BipartiteTourGraph, tour: AlternatingTour) -> AlternatingTour {
    let n = tour.n_agents();
    if n < 2 {
        return tour;
    }
    // Reversal keeping the station last: coverage order reverses, the
    // non-station charging nodes reverse one slot earlier.
    let rev_cov: Vec<usize> = tour.coverage_order.iter().rev().copied().collect();
    let mut rev_chg: Vec<usize> =
        tour.charging_order[..n - 1].iter().rev().copied().collect();
    rev_chg.push(graph.station);
    if rev_cov[0] < tour.coverage_order[0] {
        AlternatingTour::from_orders(graph, rev_cov, rev_chg)
    } else {
        tour
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_graph() -> BipartiteTourGraph {
        // Reference six-node instance used throughout the fixtures.
        BipartiteTourGraph::from_points(
            vec![
                Point2::new(186.7, 119.3),
                Point2::new(160.3, 371.1),
                Point2::new(451.4, 290.4),
            ],
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(169.3, 320.2),
                Point2::new(430.6, 185.0),
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn graph_has_expected_edge_weights() {
        let g = example_graph();
        assert!((g.weight(0, 0) - 221.5612).abs() < 1e-3);
        assert_eq!(g.n_agents(), 3);
    }

    #[test]
    fn graph_rejects_size_mismatch() {
        let r = BipartiteTourGraph::from_points(
            vec![Point2::new(0.0, 0.0)],
            vec![Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)],
            0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn single_agent_tour_doubles_the_edge() {
        let g = BipartiteTourGraph::from_points(
            vec![Point2::new(3.0, 4.0)],
            vec![Point2::new(0.0, 0.0)],
            0,
        )
        .unwrap();
        for mode in [TourMode::Exact, TourMode::Heuristic] {
            let t = solve_alternating_tour(&g, mode).unwrap();
            assert!((t.total_length - 10.0).abs() < 1e-12);
            t.validate(&g).unwrap();
        }
    }

    #[test]
    fn identical_parts_admit_zero_matching() {
        let pts = vec![Point2::new(1.0, 1.0), Point2::new(2.0, 5.0), Point2::new(8.0, 3.0)];
        let g = BipartiteTourGraph::from_points(pts.clone(), pts, 0).unwrap();
        // A zero-weight perfect matching exists, so half the optimal legs
        // can be zero; the tour itself must still close positively.
        let t = solve_alternating_tour(&g, TourMode::Exact).unwrap();
        let zero_legs = t.leg_lengths.iter().filter(|&&d| d == 0.0).count();
        assert_eq!(zero_legs, 3);
    }

    #[test]
    fn exact_matches_reference_instance() {
        let g = example_graph();
        let t = solve_alternating_tour(&g, TourMode::Exact).unwrap();
        t.validate(&g).unwrap();
        assert!((t.total_length - 1321.1887).abs() < 0.5, "len={}", t.total_length);
    }

    #[test]
    fn heuristic_never_beats_exact_and_stays_valid() {
        let mut rng = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..100 {
            let n = 2 + trial % 5; // up to 6 agents
            let mk = |next: &mut dyn FnMut() -> f64| {
                (0..n).map(|_| Point2::new(next() * 500.0, next() * 400.0)).collect::<Vec<_>>()
            };
            let g = BipartiteTourGraph::from_points(mk(&mut next), mk(&mut next), 0).unwrap();
            let exact = solve_alternating_tour(&g, TourMode::Exact).unwrap();
            let heur = solve_alternating_tour(&g, TourMode::Heuristic).unwrap();
            exact.validate(&g).unwrap();
            heur.validate(&g).unwrap();
            assert!(exact.total_length <= heur.total_length + 1e-9);
        }
    }

    #[test]
    fn exact_rejects_oversized_instances() {
        let n = EXACT_MAX_AGENTS + 1;
        let pts: Vec<Point2> = (0..n).map(|i| Point2::new(i as f64, 0.0)).collect();
        let g = BipartiteTourGraph::from_points(pts.clone(), pts, 0).unwrap();
        assert!(solve_alternating_tour(&g, TourMode::Exact).is_err());
    }

    #[test]
    fn scaling_scales_length_and_keeps_order() {
        let g = example_graph();
        let base = solve_alternating_tour(&g, TourMode::Exact).unwrap();
        let lambda = 3.7;
        let scale = |pts: &[Point2]| {
            pts.iter().map(|p| Point2::new(p.x * lambda, p.y * lambda)).collect::<Vec<_>>()
        };
        let gs = BipartiteTourGraph::from_points(
            scale(&g.coverage_nodes),
            scale(&g.charging_nodes),
            g.station,
        )
        .unwrap();
        let scaled = solve_alternating_tour(&gs, TourMode::Exact).unwrap();
        assert_eq!(scaled.coverage_order, base.coverage_order);
        assert_eq!(scaled.charging_order, base.charging_order);
        assert!((scaled.total_length - lambda * base.total_length).abs() < 1e-6);
    }

    #[test]
    fn validate_catches_broken_tours() {
        let g = example_graph();
        let mut t = solve_alternating_tour(&g, TourMode::Exact).unwrap();
        t.total_length += 1.0;
        assert!(t.validate(&g).is_err());
    }
}
