//! Per-helper max-weight transmission scheduling.
//!
//! PHY B helpers beamform to an active subset with linear zero-forcing. With
//! channel hardening a member's rate depends on the subset only through its
//! size, so the weighted-sum-rate maximizer over all subsets can be found by
//! sorting users by weighted rate once per candidate size and keeping the
//! best top-`S` prefix. PHY A helpers have one antenna and time-share, which
//! makes serving the single best weighted user optimal.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{HelperId, NetworkState, Topology, UserId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhyMode {
    /// Single antenna, orthogonal time sharing.
    A,
    /// Multi-antenna zero-forcing beamforming.
    #[default]
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RateParams {
    /// M.
    pub antennas: u32,
    /// Largest active subset.
    pub s_max: u32,
}

/// Largest brute-force neighborhood.
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleDecision {
    pub helper: HelperId,
    /// Active users, ascending.
    pub active: Vec<UserId>,
    /// Rate in bits/channel symbol for every user in N(h), zero when idle.
    pub rates: Vec<(UserId, f64)>,
    /// Σ Q_u μ_hu over the active users.
    pub weighted_sum: f64,
}

impl ScheduleDecision {
    fn idle(helper: HelperId, neighbors: &[UserId]) -> Self {
        ScheduleDecision {
            helper,
            active: Vec::new(),
            rates: neighbors.iter().map(|&u| (u, 0.0)).collect(),
            weighted_sum: 0.0,
        }
    }

    pub fn rate(&self, u: UserId) -> f64 {
        self.rates.iter().find(|(v, _)| *v == u).map_or(0.0, |&(_, r)| r)
    }
}

/// Interference power at `u` from every helper other than `h`, all assumed
/// to transmit at full power.
pub fn interference_at(u: UserId, h: HelperId, state: &NetworkState, topo: &Topology) -> f64 {
    topo.helpers
        .iter()
        .filter(|other| other.id != h)
        .map(|other| other.power * state.gain(other.id, u))
        .sum()
}

/// Hardened zero-forcing rate of one user in an active subset of size
/// `subset_size`, in bits per channel symbol.
pub fn zf_rate(gain: f64, antennas: u32, subset_size: u32, power: f64, interference: f64, member: bool) -> Result<f64> {
    if subset_size > antennas {
        return Err(Error::Domain(format!(
            "active subset of {subset_size} users exceeds {antennas} antennas"
        )));
    }
    if !member {
        return Ok(0.0);
    }
    if subset_size == 0 {
        return Err(Error::Domain("a member implies a nonempty subset".into()));
    }
    let dof = (antennas - subset_size + 1) as f64;
    let sinr = gain * dof * power / (subset_size as f64 * (1.0 + interference));
    Ok((1.0 + sinr).log2())
}

/// Single-antenna rate `log2(1 + g P / (1 + I))`.
pub fn shannon_rate(gain: f64, power: f64, interference: f64) -> f64 {
    (1.0 + gain * power / (1.0 + interference)).log2()
}

/// Per-size rate table: `table[s - 1][i]` is the rate of neighbor `i` when
/// the subset has `s` members.
fn zf_rate_table(h: HelperId, state: &NetworkState, topo: &Topology, params: RateParams, cap: u32) -> Vec<Vec<f64>> {
    let helper = &topo.helpers[h];
    let neighbors = topo.helper_neighbors(h);
    let interference: Vec<f64> = neighbors.iter().map(|&u| interference_at(u, h, state, topo)).collect();
    (1..=cap)
        .map(|s| {
            neighbors
                .iter()
                .zip(&interference)
                .map(|(&u, &i)| {
                    zf_rate(state.gain(h, u), params.antennas, s, helper.power, i, true)
                        .expect("size capped by antenna count")
                })
                .collect()
        })
        .collect()
}

fn subset_cap(params: RateParams, neighbors: usize) -> u32 {
    params.s_max.min(params.antennas).min(neighbors as u32)
}

/// Weighted sum of a subset given by neighbor positions in ascending order.
fn subset_score(members: &[usize], neighbors: &[UserId], weights: &[f64], rates: &[f64]) -> f64 {
    members.iter().map(|&i| weights[neighbors[i]] * rates[i]).sum()
}

fn decision(h: HelperId, neighbors: &[UserId], members: &[usize], rates: &[f64], score: f64) -> ScheduleDecision {
    let mut out = ScheduleDecision::idle(h, neighbors);
    for &i in members {
        out.rates[i].1 = rates[i];
        out.active.push(neighbors[i]);
    }
    out.weighted_sum = score;
    out
}

/// `true` when candidate `(score, members)` beats the incumbent under the
/// shared ordering: larger score, then smaller size, then lexicographically
/// smaller member list.
fn improves(score: f64, members: &[usize], best_score: f64, best: &[usize]) -> bool {
    match score.partial_cmp(&best_score) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Equal) => members.len() < best.len() || (members.len() == best.len() && members < best),
        _ => false,
    }
}

/// Sort+greedy max-weight scheduling for a PHY B helper. `weights` is
/// indexed by user id.
pub fn schedule_helper_phy_b(
    h: HelperId,
    weights: &[f64],
    state: &NetworkState,
    topo: &Topology,
    params: RateParams,
) -> ScheduleDecision {
    let neighbors = topo.helper_neighbors(h);
    if neighbors.is_empty() {
        return ScheduleDecision::idle(h, neighbors);
    }
    let cap = subset_cap(params, neighbors.len());
    let table = zf_rate_table(h, state, topo, params, cap);

    let mut order: Vec<usize> = (0..neighbors.len()).collect();
    let mut best: Vec<usize> = Vec::new();
    let mut best_score = 0.0;
    let mut best_size = 0;
    for s in 1..=cap as usize {
        let rates = &table[s - 1];
        let weighted = weighted_rates(neighbors, weights, rates);
        order.sort_by(|&a, &b| weighted[b].total_cmp(&weighted[a]).then(a.cmp(&b)));
        let mut members = order[..s].to_vec();
        members.sort_unstable();
        let score = subset_score(&members, neighbors, weights, rates);
        if improves(score, &members, best_score, &best) {
            best = members;
            best_score = score;
            best_size = s;
        }
    }
    if best.is_empty() || best_score <= 0.0 {
        return ScheduleDecision::idle(h, neighbors);
    }
    decision(h, neighbors, &best, &table[best_size - 1], best_score)
}

fn weighted_rates(neighbors: &[UserId], weights: &[f64], rates: &[f64]) -> Vec<f64> {
    neighbors.iter().zip(rates).map(|(&u, r)| weights[u] * r).collect()
}

/// Exhaustive search over every nonempty subset of N(h) up to the size cap.
pub fn brute_force_schedule(
    h: HelperId,
    weights: &[f64],
    state: &NetworkState,
    topo: &Topology,
    params: RateParams,
) -> Result<ScheduleDecision> {
    let neighbors = topo.helper_neighbors(h);
    if neighbors.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::Domain(format!(
            "brute force refuses |N(h)| = {} > {BRUTE_FORCE_LIMIT}",
            neighbors.len()
        )));
    }
    if neighbors.is_empty() {
        return Ok(ScheduleDecision::idle(h, neighbors));
    }
    let cap = subset_cap(params, neighbors.len()) as usize;
    let helper = &topo.helpers[h];
    let interference: Vec<f64> = neighbors.iter().map(|&u| interference_at(u, h, state, topo)).collect();

    let mut best: Vec<usize> = Vec::new();
    let mut best_rates: Vec<f64> = Vec::new();
    let mut best_score = 0.0;
    for mask in 1u32..(1u32 << neighbors.len()) {
        let size = mask.count_ones() as usize;
        if size > cap {
            continue;
        }
        let members: Vec<usize> = (0..neighbors.len()).filter(|i| mask & (1 << i) != 0).collect();
        let rates: Vec<f64> = neighbors
            .iter()
            .zip(&interference)
            .map(|(&u, &i)| zf_rate(state.gain(h, u), params.antennas, size as u32, helper.power, i, true))
            .collect::<Result<_>>()?;
        let score = subset_score(&members, neighbors, weights, &rates);
        if improves(score, &members, best_score, &best) {
            best = members;
            best_rates = rates;
            best_score = score;
        }
    }
    if best.is_empty() {
        return Ok(ScheduleDecision::idle(h, neighbors));
    }
    Ok(decision(h, neighbors, &best, &best_rates, best_score))
}

/// Single-antenna time-sharing helper: the weighted sum rate is linear over
/// the time-share simplex, so the whole slot goes to the user with the
/// largest `Q_u C_hu` (lowest id on ties).
pub fn schedule_helper_phy_a(h: HelperId, weights: &[f64], state: &NetworkState, topo: &Topology) -> ScheduleDecision {
    let neighbors = topo.helper_neighbors(h);
    let power = topo.helpers[h].power;
    let rates: Vec<f64> = neighbors
        .iter()
        .map(|&u| shannon_rate(state.gain(h, u), power, interference_at(u, h, state, topo)))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, &u) in neighbors.iter().enumerate() {
        let score = weights[u] * rates[i];
        if score > best.map_or(0.0, |b| b.1) {
            best = Some((i, score));
        }
    }
    match best {
        Some((i, score)) => decision(h, neighbors, &[i], &rates, score),
        None => ScheduleDecision::idle(h, neighbors),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Helper, Position, User};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// One helper serving `gains.len()` users with no other helper, so
    /// interference is zero.
    fn star(gains: &[f64], power: f64, antennas: u32) -> (Topology, NetworkState) {
        let helpers = vec![Helper {
            id: 0,
            position: Position::new(0.0, 0.0),
            power,
            antennas,
        }];
        let users: Vec<User> = (0..gains.len())
            .map(|id| User {
                id,
                position: Position::new(id as f64, 0.0),
            })
            .collect();
        let edges: Vec<_> = (0..gains.len()).map(|u| (0, u)).collect();
        let topo = Topology::new(helpers, users, &edges).unwrap();
        let state = NetworkState {
            slot: 1,
            positions: topo.users.iter().map(|u| u.position).collect(),
            waypoints: vec![None; gains.len()],
            gains: vec![gains.to_vec()],
        };
        (topo, state)
    }

    fn two_helpers(g_other: f64) -> (Topology, NetworkState) {
        let helpers = (0..2)
            .map(|id| Helper {
                id,
                position: Position::new(id as f64, 0.0),
                power: 1.0,
                antennas: 4,
            })
            .collect();
        let users = vec![User {
            id: 0,
            position: Position::new(0.0, 0.0),
        }];
        let topo = Topology::new(helpers, users, &[(0, 0)]).unwrap();
        let state = NetworkState {
            slot: 1,
            positions: vec![Position::new(0.0, 0.0)],
            waypoints: vec![None],
            gains: vec![vec![1.0], vec![g_other]],
        };
        (topo, state)
    }

    #[test]
    fn interference_cases() {
        let (topo, state) = star(&[1.0], 1.0, 1);
        assert_eq!(interference_at(0, 0, &state, &topo), 0.0);
        let (topo, state) = two_helpers(0.25);
        assert_eq!(interference_at(0, 0, &state, &topo), 0.25);
        let (topo, state) = two_helpers(0.0);
        assert_eq!(interference_at(0, 0, &state, &topo), 0.0);
    }

    #[test]
    fn zf_rate_hand_values() {
        assert_eq!(zf_rate(1.0, 10, 5, 1.0, 0.0, false).unwrap(), 0.0);
        let r = zf_rate(1.0, 10, 5, 1.0, 0.0, true).unwrap();
        assert!((r - 2.2f64.log2()).abs() < 1e-12);
        assert!((r - 1.1375).abs() < 1e-4);
        assert_eq!(zf_rate(1.0, 4, 4, 4.0, 0.0, true).unwrap(), 1.0);
    }

    #[test]
    fn zf_rate_rejects_oversized_subset() {
        assert!(zf_rate(1.0, 4, 5, 1.0, 0.0, true).is_err());
        assert!(zf_rate(1.0, 4, 5, 1.0, 0.0, false).is_err());
    }

    #[test]
    fn singleton_neighborhood() {
        let (topo, state) = star(&[0.7], 1.0, 4);
        let p = RateParams { antennas: 4, s_max: 2 };
        let d = schedule_helper_phy_b(0, &[3.0], &state, &topo, p);
        assert_eq!(d.active, vec![0]);
        let d = schedule_helper_phy_b(0, &[0.0], &state, &topo, p);
        assert!(d.active.is_empty());
        assert_eq!(d.weighted_sum, 0.0);
        assert_eq!(
            brute_force_schedule(0, &[3.0], &state, &topo, p).unwrap().active,
            vec![0]
        );
    }

    #[test]
    fn equal_users_pick_four_streams() {
        let (topo, state) = star(&[1.0; 10], 1.0, 10);
        let p = RateParams { antennas: 10, s_max: 5 };
        let expected = [3.459, 4.919, 5.623, 5.838, 5.688];
        for (i, e) in expected.iter().enumerate() {
            let s = (i + 1) as f64;
            let v = s * (1.0 + (11.0 - s) / s).log2();
            assert!((v - e).abs() < 1e-3, "S={s}: {v}");
        }
        let d = schedule_helper_phy_b(0, &[1.0; 10], &state, &topo, p);
        assert_eq!(d.active, vec![0, 1, 2, 3]);
        assert!((d.weighted_sum - 4.0 * 2.75f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_user_left_out() {
        let (topo, state) = star(&[0.5, 0.9], 2.0, 4);
        let p = RateParams { antennas: 4, s_max: 2 };
        let brute = brute_force_schedule(0, &[1.0, 0.0], &state, &topo, p).unwrap();
        assert_eq!(brute.active, vec![0]);
        let greedy = schedule_helper_phy_b(0, &[1.0, 0.0], &state, &topo, p);
        assert_eq!(greedy.active, vec![0]);
        assert_eq!(greedy.rate(1), 0.0);
    }

    #[test]
    fn brute_force_refuses_large_neighborhood() {
        let (topo, state) = star(&[1.0; 21], 1.0, 4);
        let p = RateParams { antennas: 4, s_max: 2 };
        assert!(brute_force_schedule(0, &[1.0; 21], &state, &topo, p).is_err());
    }

    #[test]
    fn decision_is_a_polytope_vertex() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(1..=12);
            let gains: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1e6)).collect();
            let m = rng.random_range(1..=16);
            let p = RateParams {
                antennas: m,
                s_max: rng.random_range(1..=m),
            };
            let (topo, state) = star(&gains, 10.0, m);
            let d = schedule_helper_phy_b(0, &weights, &state, &topo, p);
            assert!(d.active.len() as u32 <= p.s_max.min(m).min(n as u32));
            let s = d.active.len() as u32;
            for &(u, r) in &d.rates {
                if d.active.contains(&u) {
                    let expected = zf_rate(gains[u], m, s, 10.0, 0.0, true).unwrap();
                    assert_eq!(r, expected);
                } else {
                    assert_eq!(r, 0.0);
                }
            }
        }
    }

    #[test]
    fn greedy_matches_brute_force_subsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let n = rng.random_range(1..=10);
            let gains: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            // a few repeated weights exercise the tie-break
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
            let m = rng.random_range(1..=12);
            let p = RateParams {
                antennas: m,
                s_max: rng.random_range(1..=m),
            };
            let (topo, state) = star(&gains, 5.0, m);
            let g = schedule_helper_phy_b(0, &weights, &state, &topo, p);
            let b = brute_force_schedule(0, &weights, &state, &topo, p).unwrap();
            assert_eq!(g, b, "gains {gains:?} weights {weights:?} M={m} S={}", p.s_max);
        }
    }

    #[test]
    fn phy_a_cases() {
        let (topo, state) = star(&[0.5], 1.0, 1);
        assert_eq!(schedule_helper_phy_a(0, &[2.0], &state, &topo).active, vec![0]);

        let (topo, state) = star(&[0.5, 0.5], 1.0, 1);
        let d = schedule_helper_phy_a(0, &[10.0, 1.0], &state, &topo);
        assert_eq!(d.active, vec![0]);
        assert_eq!(d.rate(1), 0.0);

        // C = (2, 1): g P = 3 and 1
        let (topo, state) = star(&[3.0, 1.0], 1.0, 1);
        let d = schedule_helper_phy_a(0, &[5.0, 8.0], &state, &topo);
        assert_eq!(d.active, vec![0]);
        assert!((d.weighted_sum - 10.0).abs() < 1e-12);

        let d = schedule_helper_phy_a(0, &[0.0, 0.0], &state, &topo);
        assert!(d.active.is_empty());
    }

    #[test]
    fn zf_rate_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let m = rng.random_range(2..=32u32);
            let s = rng.random_range(1..m);
            let g = rng.random_range(0.0..2.0);
            let p = rng.random_range(0.0..100.0);
            let i = rng.random_range(0.0..10.0);
            let base = zf_rate(g, m, s, p, i, true).unwrap();
            assert!(zf_rate(g, m, s + 1, p, i, true).unwrap() <= base);
            assert!(zf_rate(g, m + 1, s, p, i, true).unwrap() >= base);
            assert!(zf_rate(g * 1.5, m, s, p, i, true).unwrap() >= base);
            assert!(zf_rate(g, m, s, p * 1.5, i, true).unwrap() >= base);
            assert!(zf_rate(g, m, s, p, i + 1.0, true).unwrap() <= base);
        }
    }
}
