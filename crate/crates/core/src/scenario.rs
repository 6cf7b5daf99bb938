//! Helper/user topology and the slow-fading network state.
//!
//! Gains are kept for every helper-user pair, not only for edges of the
//! bipartite graph, because a user sees interference from every helper in
//! the network whether or not it can be served by it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type HelperId = usize;
pub type UserId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Position {
    fn from([x, y]: [f64; 2]) -> Self {
        Position { x, y }
    }
}

/// Bounded power-law path loss `1 / (1 + (d/d0)^exponent)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    /// Breakpoint distance in meters; the gain is 1/2 here.
    pub d0: f64,
    pub exponent: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            d0: 40.0,
            exponent: 3.5,
        }
    }
}

/// Linear path gain at distance `d` meters. Equals 1 at `d = 0` and is
/// nonincreasing in `d`.
pub fn path_gain(d: f64, params: &PathLossParams) -> f64 {
    1.0 / (1.0 + (d / params.d0).powf(params.exponent))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelperSpec {
    pub position: [f64; 2],
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default = "default_antennas")]
    pub antennas: u32,
}

fn default_power() -> f64 {
    100.0
}

fn default_antennas() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "placement", rename_all = "snake_case", deny_unknown_fields)]
pub enum UserPlacement {
    /// `count` users drawn uniformly in `[0, width] x [0, height]`.
    Uniform {
        count: usize,
        area: [f64; 2],
    },
    Explicit {
        positions: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EdgeRule {
    All,
    /// Connect every pair closer than `distance` meters.
    Threshold {
        distance: f64,
    },
    /// Explicit `[helper, user]` index pairs.
    Explicit {
        pairs: Vec<[usize; 2]>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilityParams {
    #[default]
    Static,
    /// Random waypoint: each user walks at `speed` m/s toward a waypoint drawn
    /// uniformly in `area`, then draws a new one.
    Waypoint {
        #[serde(default = "default_speed")]
        speed: f64,
        area: [f64; 2],
    },
}

fn default_speed() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub helpers: Vec<HelperSpec>,
    pub users: UserPlacement,
    pub edges: EdgeRule,
    pub mobility: MobilityParams,
    pub path_loss: PathLossParams,
}

impl Default for ScenarioConfig {
    /// Two helpers and twenty users in a 100 m square, fully connected.
    fn default() -> Self {
        ScenarioConfig {
            helpers: vec![
                HelperSpec {
                    position: [25.0, 50.0],
                    power: default_power(),
                    antennas: default_antennas(),
                },
                HelperSpec {
                    position: [75.0, 50.0],
                    power: default_power(),
                    antennas: default_antennas(),
                },
            ],
            users: UserPlacement::Uniform {
                count: 20,
                area: [100.0, 100.0],
            },
            edges: EdgeRule::All,
            mobility: MobilityParams::Static,
            path_loss: PathLossParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Helper {
    pub id: HelperId,
    pub position: Position,
    pub power: f64,
    pub antennas: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct User {
    pub id: UserId,
    pub position: Position,
}

/// Bipartite helper-user graph with both neighborhood maps.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub helpers: Vec<Helper>,
    pub users: Vec<User>,
    edges: Vec<(HelperId, UserId)>,
    user_neighbors: Vec<Vec<HelperId>>,
    helper_neighbors: Vec<Vec<UserId>>,
}

impl Topology {
    /// Builds the graph from explicit nodes and edges, validating that every
    /// user can be reached by at least one helper.
    pub fn new(helpers: Vec<Helper>, users: Vec<User>, edges: &[(HelperId, UserId)]) -> Result<Self> {
        if helpers.is_empty() {
            return Err(Error::config("scenario.helpers", "at least one helper is required"));
        }
        if users.is_empty() {
            return Err(Error::config("scenario.users", "at least one user is required"));
        }
        for h in &helpers {
            if h.antennas == 0 {
                return Err(Error::config(
                    format!("scenario.helpers[{}].antennas", h.id),
                    "must be at least 1",
                ));
            }
            if !(h.power.is_finite() && h.power >= 0.0) {
                return Err(Error::config(
                    format!("scenario.helpers[{}].power", h.id),
                    "must be finite and nonnegative",
                ));
            }
        }

        let mut edges = edges.to_vec();
        edges.sort_unstable();
        edges.dedup();

        let mut user_neighbors = vec![Vec::new(); users.len()];
        let mut helper_neighbors = vec![Vec::new(); helpers.len()];
        for &(h, u) in &edges {
            if h >= helpers.len() || u >= users.len() {
                return Err(Error::config(
                    "scenario.edges",
                    format!("edge ({h}, {u}) references an unknown node"),
                ));
            }
            user_neighbors[u].push(h);
            helper_neighbors[h].push(u);
        }
        if let Some(u) = user_neighbors.iter().position(Vec::is_empty) {
            return Err(Error::config(
                "scenario.edges",
                format!("user {u} has no neighboring helper"),
            ));
        }

        Ok(Topology {
            helpers,
            users,
            edges,
            user_neighbors,
            helper_neighbors,
        })
    }

    pub fn edges(&self) -> &[(HelperId, UserId)] {
        &self.edges
    }

    /// N(u), sorted by helper id.
    pub fn user_neighbors(&self, u: UserId) -> &[HelperId] {
        &self.user_neighbors[u]
    }

    /// N(h), sorted by user id.
    pub fn helper_neighbors(&self, h: HelperId) -> &[UserId] {
        &self.helper_neighbors[h]
    }

    pub fn num_helpers(&self) -> usize {
        self.helpers.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }
}

/// Realizes a [`ScenarioConfig`]. Random user placement draws from `rng`, so
/// the same config and RNG stream give the same graph.
pub fn build_topology<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> Result<Topology> {
    let helpers: Vec<Helper> = config
        .helpers
        .iter()
        .enumerate()
        .map(|(id, spec)| Helper {
            id,
            position: spec.position.into(),
            power: spec.power,
            antennas: spec.antennas,
        })
        .collect();

    let positions: Vec<Position> = match &config.users {
        UserPlacement::Uniform { count, area } => {
            if !(area[0] > 0.0 && area[1] > 0.0) {
                return Err(Error::config(
                    "scenario.users.area",
                    "width and height must be positive",
                ));
            }
            (0..*count)
                .map(|_| Position::new(rng.random_range(0.0..area[0]), rng.random_range(0.0..area[1])))
                .collect()
        }
        UserPlacement::Explicit { positions } => positions.iter().map(|&p| p.into()).collect(),
    };
    let users: Vec<User> = positions
        .into_iter()
        .enumerate()
        .map(|(id, position)| User { id, position })
        .collect();

    let edges: Vec<(HelperId, UserId)> = match &config.edges {
        EdgeRule::All => helpers
            .iter()
            .flat_map(|h| users.iter().map(move |u| (h.id, u.id)))
            .collect(),
        EdgeRule::Threshold { distance } => helpers
            .iter()
            .flat_map(|h| {
                users
                    .iter()
                    .filter(move |u| h.position.distance(&u.position) <= *distance)
                    .map(move |u| (h.id, u.id))
            })
            .collect(),
        EdgeRule::Explicit { pairs } => pairs.iter().map(|&[h, u]| (h, u)).collect(),
    };

    Topology::new(helpers, users, &edges)
}

/// Network state for one slot: user positions and the gain of every
/// helper-user pair.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    pub slot: u32,
    pub positions: Vec<Position>,
    /// Current waypoint of each user under waypoint mobility.
    pub waypoints: Vec<Option<Position>>,
    /// `gains[h][u]`, defined for all pairs.
    pub gains: Vec<Vec<f64>>,
}

impl NetworkState {
    pub fn initial(topo: &Topology, path_loss: &PathLossParams) -> Self {
        let positions: Vec<Position> = topo.users.iter().map(|u| u.position).collect();
        let gains = compute_gains(topo, &positions, path_loss);
        NetworkState {
            slot: 1,
            waypoints: vec![None; positions.len()],
            positions,
            gains,
        }
    }

    pub fn gain(&self, h: HelperId, u: UserId) -> f64 {
        self.gains[h][u]
    }
}

fn compute_gains(topo: &Topology, positions: &[Position], path_loss: &PathLossParams) -> Vec<Vec<f64>> {
    topo.helpers
        .iter()
        .map(|h| {
            positions
                .iter()
                .map(|p| path_gain(h.position.distance(p), path_loss))
                .collect()
        })
        .collect()
}

/// Moves the network one slot forward. `slot_seconds` is the slot duration
/// used to turn walking speed into a per-slot step.
pub fn advance_state<R: Rng>(
    state: &NetworkState,
    topo: &Topology,
    mobility: &MobilityParams,
    path_loss: &PathLossParams,
    slot_seconds: f64,
    rng: &mut R,
) -> NetworkState {
    match mobility {
        MobilityParams::Static => NetworkState {
            slot: state.slot + 1,
            ..state.clone()
        },
        MobilityParams::Waypoint { speed, area } => {
            let step = speed * slot_seconds;
            let mut positions = state.positions.clone();
            let mut waypoints = state.waypoints.clone();
            for (pos, wp) in positions.iter_mut().zip(waypoints.iter_mut()) {
                let target = *wp.get_or_insert_with(|| {
                    Position::new(rng.random_range(0.0..=area[0]), rng.random_range(0.0..=area[1]))
                });
                let remaining = pos.distance(&target);
                if remaining <= step {
                    *pos = target;
                    *wp = None;
                } else if step > 0.0 {
                    let frac = step / remaining;
                    pos.x += (target.x - pos.x) * frac;
                    pos.y += (target.y - pos.y) * frac;
                }
            }
            let gains = compute_gains(topo, &positions, path_loss);
            NetworkState {
                slot: state.slot + 1,
                positions,
                waypoints,
                gains,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn single_pair() -> Topology {
        Topology::new(
            vec![Helper {
                id: 0,
                position: Position::new(0.0, 0.0),
                power: 1.0,
                antennas: 1,
            }],
            vec![User {
                id: 0,
                position: Position::new(40.0, 0.0),
            }],
            &[(0, 0)],
        )
        .unwrap()
    }

    #[test]
    fn path_gain_reference_points() {
        let p = PathLossParams::default();
        assert_eq!(path_gain(0.0, &p), 1.0);
        assert_eq!(path_gain(40.0, &p), 0.5);
        let expected = 1.0 / (1.0 + 2f64.powf(3.5));
        assert!((path_gain(80.0, &p) - expected).abs() < 1e-15);
        assert!((path_gain(80.0, &p) - 0.0812).abs() < 1e-4);
    }

    #[test]
    fn path_gain_is_nonincreasing_on_grid() {
        let p = PathLossParams::default();
        let gains: Vec<f64> = (0..1000).map(|i| path_gain(i as f64 * 0.5, &p)).collect();
        assert!(gains.windows(2).all(|w| w[1] <= w[0]));
        assert!(gains.iter().all(|g| g.is_finite() && *g >= 0.0));
    }

    #[test]
    fn default_layout_is_fully_connected() {
        let topo = build_topology(&ScenarioConfig::default(), &mut stream_rng(1, 0)).unwrap();
        assert_eq!(topo.num_helpers(), 2);
        assert_eq!(topo.num_users(), 20);
        assert_eq!(topo.edges().len(), 40);
    }

    #[test]
    fn minimal_graph_neighborhoods() {
        let topo = single_pair();
        assert_eq!(topo.user_neighbors(0), &[0]);
        assert_eq!(topo.helper_neighbors(0), &[0]);
    }

    #[test]
    fn neighborhoods_are_inverse_maps() {
        let cfg = ScenarioConfig {
            edges: EdgeRule::Threshold { distance: 60.0 },
            ..ScenarioConfig::default()
        };
        let topo = build_topology(&cfg, &mut stream_rng(3, 0)).unwrap();
        for &(h, u) in topo.edges() {
            assert!(topo.user_neighbors(u).contains(&h));
            assert!(topo.helper_neighbors(h).contains(&u));
        }
        let from_users: usize = (0..topo.num_users()).map(|u| topo.user_neighbors(u).len()).sum();
        let from_helpers: usize = (0..topo.num_helpers()).map(|h| topo.helper_neighbors(h).len()).sum();
        assert_eq!(from_users, topo.edges().len());
        assert_eq!(from_helpers, topo.edges().len());
    }

    #[test]
    fn threshold_rule_is_deterministic() {
        let cfg = ScenarioConfig {
            edges: EdgeRule::Threshold { distance: 60.0 },
            ..ScenarioConfig::default()
        };
        let a = build_topology(&cfg, &mut stream_rng(11, 0)).unwrap();
        let b = build_topology(&cfg, &mut stream_rng(11, 0)).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a, b);
    }

    #[test]
    fn isolated_user_is_rejected_by_name() {
        let cfg = ScenarioConfig {
            helpers: vec![HelperSpec {
                position: [0.0, 0.0],
                power: 1.0,
                antennas: 1,
            }],
            users: UserPlacement::Explicit {
                positions: vec![[1.0, 0.0], [500.0, 0.0]],
            },
            edges: EdgeRule::Threshold { distance: 10.0 },
            ..ScenarioConfig::default()
        };
        let err = build_topology(&cfg, &mut stream_rng(0, 0)).unwrap_err();
        assert!(err.to_string().contains("user 1"), "{err}");
    }

    #[test]
    fn zero_antennas_rejected() {
        let cfg = ScenarioConfig {
            helpers: vec![HelperSpec {
                position: [0.0, 0.0],
                power: 1.0,
                antennas: 0,
            }],
            ..ScenarioConfig::default()
        };
        assert!(build_topology(&cfg, &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn static_mobility_keeps_gains_bit_identical() {
        let topo = build_topology(&ScenarioConfig::default(), &mut stream_rng(5, 0)).unwrap();
        let pl = PathLossParams::default();
        let mut state = NetworkState::initial(&topo, &pl);
        let first = state.gains.clone();
        let mut rng = stream_rng(5, 2);
        for _ in 0..50 {
            state = advance_state(&state, &topo, &MobilityParams::Static, &pl, 0.5, &mut rng);
            assert_eq!(state.gains, first);
        }
        assert_eq!(state.slot, 51);
    }

    #[test]
    fn zero_speed_waypoint_keeps_gains() {
        let topo = build_topology(&ScenarioConfig::default(), &mut stream_rng(5, 0)).unwrap();
        let pl = PathLossParams::default();
        let state = NetworkState::initial(&topo, &pl);
        let mobility = MobilityParams::Waypoint {
            speed: 0.0,
            area: [100.0, 100.0],
        };
        let next = advance_state(&state, &topo, &mobility, &pl, 0.5, &mut stream_rng(5, 2));
        assert_eq!(next.gains, state.gains);
    }

    #[test]
    fn walking_toward_helper_raises_gain() {
        let topo = single_pair();
        let pl = PathLossParams::default();
        let mut state = NetworkState::initial(&topo, &pl);
        state.waypoints[0] = Some(Position::new(0.0, 0.0));
        let mobility = MobilityParams::Waypoint {
            speed: 1.0,
            area: [100.0, 100.0],
        };
        let next = advance_state(&state, &topo, &mobility, &pl, 0.5, &mut stream_rng(0, 2));
        assert!((next.positions[0].x - 39.5).abs() < 1e-12);
        assert!(next.gain(0, 0) > state.gain(0, 0));
    }

    #[test]
    fn waypoint_gains_stay_bounded() {
        let topo = build_topology(&ScenarioConfig::default(), &mut stream_rng(9, 0)).unwrap();
        let pl = PathLossParams::default();
        let mobility = MobilityParams::Waypoint {
            speed: 1.5,
            area: [100.0, 100.0],
        };
        let mut rng = stream_rng(9, 2);
        let mut state = NetworkState::initial(&topo, &pl);
        for _ in 0..500 {
            state = advance_state(&state, &topo, &mobility, &pl, 0.5, &mut rng);
            for row in &state.gains {
                assert!(row.iter().all(|g| g.is_finite() && (0.0..=1.0).contains(g)));
            }
        }
    }
}
