//! JSON run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::PhyMode;
use crate::playback::BufferingParams;
use crate::policy::UtilityKind;
use crate::scenario::{EdgeRule, MobilityParams, ScenarioConfig, UserPlacement};
use crate::video::{VbrParams, VideoConstants};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VideoConfig {
    pub vbr: VbrParams,
    /// Trace CSVs; when nonempty they replace the synthetic library.
    /// Relative paths resolve against the config file's directory.
    pub traces: Vec<PathBuf>,
    /// File index per user; round-robin over the library when absent.
    pub assignment: Option<Vec<usize>>,
    /// Encoding constants applied to imported traces.
    pub trace_constants: VideoConstants,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Utility/backlog tradeoff V.
    pub v: f64,
    pub utility: UtilityKind,
    pub phy: PhyMode,
    /// Largest active subset per PHY B helper.
    pub s_max: u32,
    /// Overrides the antenna count of every helper.
    pub antennas: Option<u32>,
    /// Overrides the transmit power of every helper.
    pub power: Option<f64>,
    /// Channel symbols per slot.
    pub n: f64,
    /// Bits per queue unit in the quality-selection objective; request
    /// queues and chunk sizes are divided by it before being multiplied.
    pub queue_unit_bits: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            v: 5.0,
            utility: UtilityKind::Log,
            phy: PhyMode::B,
            s_max: 5,
            antennas: Some(10),
            power: None,
            n: 5e6,
            queue_unit_bits: 1e7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Number of slots to simulate.
    pub horizon: u32,
    pub seed: u64,
    /// Output directory for `run`; relative to the working directory.
    pub out_dir: Option<PathBuf>,
    /// Also record and write the per-slot queue trace.
    pub trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: 1000,
            seed: 1,
            out_dir: None,
            trace: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub video: VideoConfig,
    pub policy: PolicyConfig,
    pub playback: BufferingParams,
    pub run: RunConfig,
}

impl SimConfig {
    /// Parses `path` and resolves relative trace paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: SimConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for trace in &mut config.video.traces {
            if trace.is_relative() {
                *trace = base.join(&*trace);
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn num_users(&self) -> usize {
        match &self.scenario.users {
            UserPlacement::Uniform { count, .. } => *count,
            UserPlacement::Explicit { positions } => positions.len(),
        }
    }

    /// Antenna count of helper `h` after the policy override.
    pub fn antennas(&self, h: usize) -> u32 {
        self.policy
            .antennas
            .unwrap_or_else(|| self.scenario.helpers[h].antennas)
    }

    /// Scenario with policy overrides applied to every helper.
    pub fn effective_scenario(&self) -> ScenarioConfig {
        let mut scenario = self.scenario.clone();
        for h in &mut scenario.helpers {
            if let Some(m) = self.policy.antennas {
                h.antennas = m;
            }
            if let Some(p) = self.policy.power {
                h.power = p;
            }
        }
        scenario
    }

    /// Checks every invariant that can be decided without running.
    pub fn validate(&self) -> Result<()> {
        self.validate_model()?;
        if self.run.horizon == 0 {
            return Err(Error::config("run.horizon", "must be at least 1"));
        }
        Ok(())
    }

    /// Same as [`validate`](Self::validate) minus the horizon check.
    pub(crate) fn validate_model(&self) -> Result<()> {
        let s = &self.scenario;
        if s.helpers.is_empty() {
            return Err(Error::config("scenario.helpers", "at least one helper is required"));
        }
        if self.num_users() == 0 {
            return Err(Error::config("scenario.users", "at least one user is required"));
        }
        for (h, spec) in s.helpers.iter().enumerate() {
            let power = self.policy.power.unwrap_or(spec.power);
            if !(power.is_finite() && power >= 0.0) {
                return Err(Error::config(
                    format!("scenario.helpers[{h}].power"),
                    "must be finite and nonnegative",
                ));
            }
            if self.antennas(h) == 0 {
                return Err(Error::config(
                    format!("scenario.helpers[{h}].antennas"),
                    "must be at least 1",
                ));
            }
        }
        if let EdgeRule::Threshold { distance } = s.edges {
            if distance.is_nan() || distance < 0.0 {
                return Err(Error::config("scenario.edges.distance", "must be nonnegative"));
            }
        }
        if let MobilityParams::Waypoint { speed, area } = s.mobility {
            if !(speed >= 0.0 && speed.is_finite()) {
                return Err(Error::config(
                    "scenario.mobility.speed",
                    "must be finite and nonnegative",
                ));
            }
            if !(area[0] > 0.0 && area[1] > 0.0) {
                return Err(Error::config(
                    "scenario.mobility.area",
                    "width and height must be positive",
                ));
            }
        }
        if !(s.path_loss.d0 > 0.0 && s.path_loss.exponent > 0.0) {
            return Err(Error::config("scenario.path_loss", "d0 and exponent must be positive"));
        }

        let p = &self.policy;
        if !(p.v > 0.0 && p.v.is_finite()) {
            return Err(Error::config("policy.v", "must be positive"));
        }
        if !(p.n >= 1.0 && p.n.is_finite()) {
            return Err(Error::config("policy.n", "must be at least 1"));
        }
        if !(p.queue_unit_bits > 0.0 && p.queue_unit_bits.is_finite()) {
            return Err(Error::config("policy.queue_unit_bits", "must be positive"));
        }
        if let UtilityKind::Power { exponent } = p.utility {
            if !(exponent > 0.0 && exponent <= 1.0) {
                return Err(Error::config("policy.utility.exponent", "must lie in (0, 1]"));
            }
        }
        if p.phy == PhyMode::B {
            if p.s_max == 0 {
                return Err(Error::config("policy.s_max", "must be at least 1"));
            }
            for h in 0..s.helpers.len() {
                let m = self.antennas(h);
                if p.s_max > m {
                    return Err(Error::config(
                        "policy.s_max",
                        format!("S_max = {} exceeds M = {m} antennas of helper {h}", p.s_max),
                    ));
                }
            }
        }

        if self.playback.window == 0 {
            return Err(Error::config("playback.window", "must be at least 1"));
        }
        if !(self.playback.xi > 0.0 && self.playback.xi.is_finite()) {
            return Err(Error::config("playback.xi", "must be positive"));
        }

        let v = &self.video;
        let library_size = if v.traces.is_empty() {
            v.vbr.validate()?;
            v.vbr.num_files
        } else {
            for (i, path) in v.traces.iter().enumerate() {
                if !path.is_file() {
                    return Err(Error::config(
                        format!("video.traces[{i}]"),
                        format!("{} does not exist", path.display()),
                    ));
                }
            }
            v.traces.len()
        };
        if let Some(assignment) = &v.assignment {
            if assignment.len() != self.num_users() {
                return Err(Error::config(
                    "video.assignment",
                    format!("has {} entries for {} users", assignment.len(), self.num_users()),
                ));
            }
            if let Some(f) = assignment.iter().find(|&&f| f >= library_size) {
                return Err(Error::config(
                    "video.assignment",
                    format!("file {f} not in a library of {library_size}"),
                ));
            }
        }
        Ok(())
    }
}
