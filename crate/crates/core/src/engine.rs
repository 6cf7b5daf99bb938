//! Slotted simulation loop.
//!
//! Each slot runs, in order: network state update; per-user quality
//! selection, chunk request and virtual-queue update; independent per-helper
//! scheduling on the broadcast request-queue lengths; service of the
//! scheduled bits from each queue's head of line; playback.

use rand_chacha::ChaCha8Rng;

use crate::config::SimConfig;
use crate::error::Result;
use crate::phy::{schedule_helper_phy_a, schedule_helper_phy_b, PhyMode, RateParams, ScheduleDecision};
use crate::playback::PlaybackState;
use crate::policy::{choose_auxiliary, select_quality, Utility};
use crate::queueing::{ChunkRecord, Completed, RequestQueue, VirtualQueue};
use crate::rng::{stream_rng, MOBILITY_STREAM, PLACEMENT_STREAM, VIDEO_STREAM};
use crate::scenario::{advance_state, build_topology, NetworkState, Position, Topology};
use crate::video::{generate_vbr_library, import_trace, QualityBounds, VideoFile};

#[derive(Clone, Debug, PartialEq)]
pub struct UserMetrics {
    pub user: usize,
    /// Mean quality of the delivered chunks.
    pub mean_quality: f64,
    /// Playback start delay in seconds; the whole horizon if playback never
    /// started.
    pub prebuffer_s: f64,
    pub started: bool,
    pub rebuffer_pct: f64,
    pub stall_events: u32,
    pub avg_backlog_bits: f64,
    pub avg_theta: f64,
    pub chunks_requested: u32,
    pub chunks_delivered: u32,
    pub chunks_played: u32,
}

/// One row of the per-slot queue trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub slot: u32,
    pub user: usize,
    pub backlog_bits: u64,
    pub theta: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub slots: u32,
    pub slot_seconds: f64,
    pub users: Vec<UserMetrics>,
    /// Σ_u φ(mean quality of u).
    pub utility: f64,
    /// Σ_u Q_u at the end of each slot.
    pub total_backlog: Vec<u64>,
    /// max_u Q_u at the end of each slot.
    pub max_backlog: Vec<u64>,
    /// Chunk indices in completion order, per user.
    pub completion_order: Vec<Vec<u32>>,
    pub helper_positions: Vec<Position>,
    pub user_positions: Vec<Position>,
    pub trace: Vec<TraceRow>,
}

impl MetricsReport {
    fn mean(&self, f: impl Fn(&UserMetrics) -> f64) -> f64 {
        if self.users.is_empty() {
            return 0.0;
        }
        self.users.iter().map(f).sum::<f64>() / self.users.len() as f64
    }

    pub fn mean_quality(&self) -> f64 {
        self.mean(|u| u.mean_quality)
    }

    pub fn mean_prebuffer_s(&self) -> f64 {
        self.mean(|u| u.prebuffer_s)
    }

    pub fn mean_rebuffer_pct(&self) -> f64 {
        self.mean(|u| u.rebuffer_pct)
    }

    /// Time average of the total backlog in bits.
    pub fn mean_total_backlog(&self) -> f64 {
        if self.total_backlog.is_empty() {
            return 0.0;
        }
        self.total_backlog.iter().map(|&q| q as f64).sum::<f64>() / self.total_backlog.len() as f64
    }
}

struct UserState {
    file: usize,
    bounds: QualityBounds,
    queue: RequestQueue,
    theta: VirtualQueue,
    playback: PlaybackState,
    next_chunk: u32,
    quality_sum: f64,
    backlog_sum: f64,
    theta_sum: f64,
    completed: Vec<u32>,
}

/// A simulation that can be advanced one slot at a time.
pub struct Simulation {
    config: SimConfig,
    topo: Topology,
    library: Vec<VideoFile>,
    state: NetworkState,
    mobility_rng: ChaCha8Rng,
    users: Vec<UserState>,
    slot: u32,
    total_backlog: Vec<u64>,
    max_backlog: Vec<u64>,
    trace: Vec<TraceRow>,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate_model()?;
        let seed = config.run.seed;
        let topo = build_topology(&config.effective_scenario(), &mut stream_rng(seed, PLACEMENT_STREAM))?;
        let library = if config.video.traces.is_empty() {
            generate_vbr_library(&config.video.vbr, &mut stream_rng(seed, VIDEO_STREAM))?
        } else {
            config
                .video
                .traces
                .iter()
                .enumerate()
                .map(|(id, path)| import_trace(path, id, config.video.trace_constants))
                .collect::<Result<_>>()?
        };
        let state = NetworkState::initial(&topo, &config.scenario.path_loss);
        let users = (0..topo.num_users())
            .map(|u| {
                let file = match &config.video.assignment {
                    Some(a) => a[u],
                    None => u % library.len(),
                };
                UserState {
                    file,
                    bounds: library[file].quality_bounds(),
                    queue: RequestQueue::new(u),
                    theta: VirtualQueue::default(),
                    playback: PlaybackState::new(library[file].num_chunks(), config.playback),
                    next_chunk: 1,
                    quality_sum: 0.0,
                    backlog_sum: 0.0,
                    theta_sum: 0.0,
                    completed: Vec::new(),
                }
            })
            .collect();
        Ok(Simulation {
            config: config.clone(),
            topo,
            library,
            state,
            mobility_rng: stream_rng(seed, MOBILITY_STREAM),
            users,
            slot: 0,
            total_backlog: Vec::new(),
            max_backlog: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn library(&self) -> &[VideoFile] {
        &self.library
    }

    pub fn network_state(&self) -> &NetworkState {
        &self.state
    }

    /// Last completed slot (0 before the first step).
    pub fn slot(&self) -> u32 {
        self.slot
    }

    pub fn queue(&self, u: usize) -> &RequestQueue {
        &self.users[u].queue
    }

    pub fn virtual_queue(&self, u: usize) -> VirtualQueue {
        self.users[u].theta
    }

    pub fn playback(&self, u: usize) -> &PlaybackState {
        &self.users[u].playback
    }

    fn schedule(&self, weights: &[f64]) -> Vec<ScheduleDecision> {
        (0..self.topo.num_helpers())
            .map(|h| match self.config.policy.phy {
                PhyMode::A => schedule_helper_phy_a(h, weights, &self.state, &self.topo),
                PhyMode::B => {
                    let params = RateParams {
                        antennas: self.topo.helpers[h].antennas,
                        s_max: self.config.policy.s_max,
                    };
                    schedule_helper_phy_b(h, weights, &self.state, &self.topo, params)
                }
            })
            .collect()
    }

    /// Runs one slot and returns each user's completions in it.
    pub fn step(&mut self) -> Result<Vec<Vec<Completed>>> {
        let t = self.slot + 1;
        if t > 1 {
            let slot_seconds = self.library[0].constants.t_gop;
            self.state = advance_state(
                &self.state,
                &self.topo,
                &self.config.scenario.mobility,
                &self.config.scenario.path_loss,
                slot_seconds,
                &mut self.mobility_rng,
            );
        }

        let policy = &self.config.policy;
        let unit = policy.queue_unit_bits;
        for user in &mut self.users {
            let file = &self.library[user.file];
            if user.next_chunk > file.num_chunks() {
                continue;
            }
            let index = user.next_chunk;
            let profile = file.chunk_profile(index)?;
            let theta = user.theta.value();
            let level = select_quality(
                user.queue.backlog() as f64 / unit,
                theta,
                &profile,
                file.pixels_per_chunk() / unit,
            );
            let bits = file.chunk_bits(index, level)?;
            user.queue
                .enqueue_chunk(ChunkRecord::new(user.file, index, level, bits, t))?;
            let gamma = choose_auxiliary(theta, policy.v, user.bounds, &policy.utility);
            user.theta.update(gamma, profile[level - 1].quality);
            user.next_chunk += 1;
        }

        let weights: Vec<f64> = self.users.iter().map(|u| u.queue.backlog() as f64).collect();
        let decisions = self.schedule(&weights);
        let mut rate = vec![0.0; self.users.len()];
        for d in &decisions {
            for &(u, r) in &d.rates {
                rate[u] += r;
            }
        }

        let mut completions = Vec::with_capacity(self.users.len());
        let (mut total, mut max) = (0u64, 0u64);
        for (u, user) in self.users.iter_mut().enumerate() {
            let bits = (policy.n * rate[u]).floor() as u64;
            let done = user.queue.serve_bits(bits);
            let file = &self.library[user.file];
            for c in &done {
                user.quality_sum += file.chunk_profile(c.index)?[c.level - 1].quality;
                user.completed.push(c.index);
            }
            user.playback.step(&done, t)?;

            let q = user.queue.backlog();
            total += q;
            max = max.max(q);
            user.backlog_sum += q as f64;
            user.theta_sum += user.theta.value();
            if self.config.run.trace {
                self.trace.push(TraceRow {
                    slot: t,
                    user: u,
                    backlog_bits: q,
                    theta: user.theta.value(),
                });
            }
            completions.push(done);
        }
        self.total_backlog.push(total);
        self.max_backlog.push(max);
        self.slot = t;
        Ok(completions)
    }

    pub fn finish(self) -> MetricsReport {
        let slots = self.slot;
        let slot_seconds = self.library[0].constants.t_gop;
        let utility_kind = self.config.policy.utility;
        let mut users = Vec::with_capacity(self.users.len());
        let mut completion_order = Vec::with_capacity(self.users.len());
        for (u, s) in self.users.into_iter().enumerate() {
            let delivered = s.completed.len() as u32;
            let started = s.playback.start_slot();
            users.push(UserMetrics {
                user: u,
                mean_quality: if delivered > 0 {
                    s.quality_sum / delivered as f64
                } else {
                    0.0
                },
                prebuffer_s: started.unwrap_or(slots) as f64 * slot_seconds,
                started: started.is_some(),
                rebuffer_pct: s.playback.rebuffer_pct(),
                stall_events: s.playback.stall_events(),
                avg_backlog_bits: if slots > 0 { s.backlog_sum / slots as f64 } else { 0.0 },
                avg_theta: if slots > 0 { s.theta_sum / slots as f64 } else { 0.0 },
                chunks_requested: s.next_chunk - 1,
                chunks_delivered: delivered,
                chunks_played: s.playback.played(),
            });
            completion_order.push(s.completed);
        }
        let utility = users.iter().map(|m| utility_kind.value(m.mean_quality)).sum();
        MetricsReport {
            slots,
            slot_seconds,
            users,
            utility,
            total_backlog: self.total_backlog,
            max_backlog: self.max_backlog,
            completion_order,
            helper_positions: self.topo.helpers.iter().map(|h| h.position).collect(),
            user_positions: self.topo.users.iter().map(|u| u.position).collect(),
            trace: self.trace,
        }
    }
}

/// Runs `config.run.horizon` slots. A zero horizon gives an empty report.
pub fn run_simulation(config: &SimConfig) -> Result<MetricsReport> {
    if config.run.horizon == 0 {
        return Ok(MetricsReport::default());
    }
    let mut sim = Simulation::new(config)?;
    for _ in 0..config.run.horizon {
        sim.step()?;
    }
    Ok(sim.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{EdgeRule, HelperSpec, UserPlacement};
    use crate::video::VbrParams;

    fn single_user(chunks: u32, power: f64) -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.scenario.helpers = vec![HelperSpec {
            position: [0.0, 0.0],
            power,
            antennas: 1,
        }];
        cfg.scenario.users = UserPlacement::Explicit {
            positions: vec![[10.0, 0.0]],
        };
        cfg.scenario.edges = EdgeRule::All;
        cfg.policy.antennas = Some(1);
        cfg.policy.s_max = 1;
        cfg.video.vbr = VbrParams {
            chunks,
            ..VbrParams::default()
        };
        cfg.run.horizon = chunks + 10;
        cfg
    }

    #[test]
    fn zero_horizon_is_empty() {
        let mut cfg = SimConfig::default();
        cfg.run.horizon = 0;
        let report = run_simulation(&cfg).unwrap();
        assert!(report.users.is_empty());
        assert_eq!(report.slots, 0);
    }

    #[test]
    fn fast_link_delivers_every_chunk_in_its_slot() {
        // log2(1 + ~1e6) ≈ 20 bits/symbol * 5e6 symbols dwarfs any chunk.
        let cfg = single_user(50, 1e6);
        let mut sim = Simulation::new(&cfg).unwrap();
        for _ in 0..cfg.run.horizon {
            sim.step().unwrap();
        }
        let ps = sim.playback(0);
        assert!(ps.deliveries().iter().all(|d| d.delay == 0));
        // Ψ reaches ξ·1 = 2 at slot 2
        assert_eq!(ps.start_slot(), Some(2));
        let report = sim.finish();
        let m = &report.users[0];
        assert_eq!(m.rebuffer_pct, 0.0);
        assert_eq!(m.prebuffer_s, 1.0);
        assert_eq!(m.chunks_played, 50);
        assert_eq!(report.completion_order[0], (1..=50).collect::<Vec<_>>());
    }

    #[test]
    fn infeasible_subset_rejected_before_running() {
        let mut cfg = SimConfig::default();
        cfg.policy.s_max = 12;
        assert!(run_simulation(&cfg).is_err());
    }

    #[test]
    fn per_slot_queue_invariants() {
        let mut cfg = SimConfig::default();
        cfg.video.vbr.chunks = 150;
        cfg.run.horizon = 200;
        let mut sim = Simulation::new(&cfg).unwrap();
        for _ in 0..cfg.run.horizon {
            sim.step().unwrap();
            for u in 0..sim.topology().num_users() {
                let q = sim.queue(u);
                assert_eq!(q.bits_arrived() - q.bits_served(), q.backlog());
                assert!(sim.virtual_queue(u).value() >= 0.0);
                let ps = sim.playback(u);
                assert_eq!(ps.played() + ps.buffer(), ps.delivered());
            }
        }
    }
}
