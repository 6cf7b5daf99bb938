//! Per-chunk rate/quality tables of the video library.
//!
//! Sizes are stored in bits per pixel and qualities on an SSIM-like scale in
//! `(0, 1]`. A chunk at level `m` carries `ceil(k * B(m, t))` bits, with
//! `k = frame_rate * t_gop * pixels_per_frame`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Encoding constants shared by every chunk of a file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VideoConstants {
    /// Frames per second.
    pub frame_rate: f64,
    /// Chunk (GOP) playback duration in seconds.
    pub t_gop: f64,
    pub pixels_per_frame: f64,
}

impl Default for VideoConstants {
    fn default() -> Self {
        VideoConstants {
            frame_rate: 24.0,
            t_gop: 0.5,
            pixels_per_frame: 1280.0 * 720.0,
        }
    }
}

impl VideoConstants {
    /// Pixels per chunk.
    pub fn pixels_per_chunk(&self) -> f64 {
        self.frame_rate * self.t_gop * self.pixels_per_frame
    }
}

/// One row of a chunk's rate/quality profile. `level` is 1-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelProfile {
    pub level: usize,
    pub bits_per_pixel: f64,
    pub quality: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityBounds {
    pub d_min: f64,
    pub d_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoFile {
    pub id: usize,
    pub constants: VideoConstants,
    // [chunk][level], both 0-based internally
    bits_per_pixel: Vec<Vec<f64>>,
    quality: Vec<Vec<f64>>,
}

impl VideoFile {
    /// Validates and wraps the two `[chunk][level]` tables.
    pub fn new(
        id: usize,
        constants: VideoConstants,
        bits_per_pixel: Vec<Vec<f64>>,
        quality: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let invalid = |reason: String| Err(Error::Domain(format!("video file {id}: {reason}")));
        if bits_per_pixel.is_empty() {
            return invalid("no chunks".into());
        }
        if bits_per_pixel.len() != quality.len() {
            return invalid("size and quality tables differ in length".into());
        }
        let levels = bits_per_pixel[0].len();
        if levels == 0 {
            return invalid("no quality levels".into());
        }
        for (ti, (b_row, d_row)) in bits_per_pixel.iter().zip(&quality).enumerate() {
            let t = ti + 1;
            if b_row.len() != levels || d_row.len() != levels {
                return invalid(format!("chunk {t} does not have {levels} levels"));
            }
            for mi in 0..levels {
                let m = mi + 1;
                let (b, d) = (b_row[mi], d_row[mi]);
                if !(b.is_finite() && b > 0.0) {
                    return invalid(format!("chunk {t} level {m}: bits per pixel {b} must be positive"));
                }
                if !(d > 0.0 && d <= 1.0) {
                    return invalid(format!("chunk {t} level {m}: quality {d} outside (0, 1]"));
                }
                if mi > 0 && (b < b_row[mi - 1] || d < d_row[mi - 1]) {
                    return invalid(format!("chunk {t} level {m}: size or quality decreases with level"));
                }
            }
        }
        Ok(VideoFile {
            id,
            constants,
            bits_per_pixel,
            quality,
        })
    }

    /// N_f.
    pub fn num_levels(&self) -> usize {
        self.bits_per_pixel[0].len()
    }

    /// L_f.
    pub fn num_chunks(&self) -> u32 {
        self.bits_per_pixel.len() as u32
    }

    pub fn pixels_per_chunk(&self) -> f64 {
        self.constants.pixels_per_chunk()
    }

    fn check_index(&self, t: u32) -> Result<usize> {
        if t == 0 || t > self.num_chunks() {
            return Err(Error::ChunkIndex {
                index: t,
                len: self.num_chunks(),
            });
        }
        Ok(t as usize - 1)
    }

    /// All levels of chunk `t` (1-based), ascending in level.
    pub fn chunk_profile(&self, t: u32) -> Result<Vec<LevelProfile>> {
        let ti = self.check_index(t)?;
        Ok(self.bits_per_pixel[ti]
            .iter()
            .zip(&self.quality[ti])
            .enumerate()
            .map(|(mi, (&b, &d))| LevelProfile {
                level: mi + 1,
                bits_per_pixel: b,
                quality: d,
            })
            .collect())
    }

    /// Size in bits of chunk `t` at `level`, rounded up once.
    pub fn chunk_bits(&self, t: u32, level: usize) -> Result<u64> {
        let ti = self.check_index(t)?;
        let b = self.bits_per_pixel[ti]
            .get(level.wrapping_sub(1))
            .ok_or_else(|| Error::Domain(format!("quality level {level} out of range")))?;
        Ok(chunk_bits(self.pixels_per_chunk(), *b))
    }

    pub fn quality_bounds(&self) -> QualityBounds {
        let last = self.num_levels() - 1;
        let d_min = self.quality.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
        let d_max = self.quality.iter().map(|r| r[last]).fold(f64::NEG_INFINITY, f64::max);
        QualityBounds { d_min, d_max }
    }
}

/// `ceil(k * B)` as an integer number of bits (at least one).
pub fn chunk_bits(pixels_per_chunk: f64, bits_per_pixel: f64) -> u64 {
    ((pixels_per_chunk * bits_per_pixel).ceil() as u64).max(1)
}

/// Saturating quality-rate curve `D(B) = 1 - gap * (B / b_ref)^(-slope)`,
/// concave and increasing in `ln B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityCurve {
    /// Distance from 1 at the reference rate.
    pub gap: f64,
    /// Bits per pixel at which the quality equals `1 - gap`.
    pub b_ref: f64,
    pub slope: f64,
}

impl Default for QualityCurve {
    fn default() -> Self {
        QualityCurve {
            gap: 0.12,
            b_ref: 0.02,
            slope: 0.5,
        }
    }
}

impl QualityCurve {
    pub fn quality(&self, bits_per_pixel: f64) -> f64 {
        let d = 1.0 - self.gap * (bits_per_pixel / self.b_ref).powf(-self.slope);
        d.clamp(1e-3, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VbrParams {
    pub num_files: usize,
    /// L_f, chunks per file.
    pub chunks: u32,
    /// Mean bits per pixel of each level; strictly increasing.
    pub base_bpp: Vec<f64>,
    /// Log-standard-deviation of the per-chunk size fluctuation.
    pub sigma: f64,
    pub constants: VideoConstants,
    pub curve: QualityCurve,
}

impl Default for VbrParams {
    fn default() -> Self {
        VbrParams {
            num_files: 1,
            chunks: 600,
            base_bpp: vec![0.01, 0.02, 0.04, 0.08],
            sigma: 0.25,
            constants: VideoConstants::default(),
            curve: QualityCurve::default(),
        }
    }
}

impl VbrParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_files == 0 {
            return Err(Error::config("video.vbr.num_files", "must be at least 1"));
        }
        if self.chunks == 0 {
            return Err(Error::config("video.vbr.chunks", "must be at least 1"));
        }
        if self.base_bpp.is_empty() {
            return Err(Error::config("video.vbr.base_bpp", "needs at least one level"));
        }
        if self.base_bpp.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::config("video.vbr.base_bpp", "rates must be positive"));
        }
        if self.base_bpp.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("video.vbr.base_bpp", "rates must be strictly increasing"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::config("video.vbr.sigma", "must be finite and nonnegative"));
        }
        let c = &self.constants;
        if !(c.frame_rate > 0.0 && c.t_gop > 0.0 && c.pixels_per_frame >= 1.0) {
            return Err(Error::config(
                "video.vbr.constants",
                "frame rate, GOP duration and pixels must be positive",
            ));
        }
        let q = &self.curve;
        if !(q.gap > 0.0 && q.b_ref > 0.0 && q.slope > 0.0) {
            return Err(Error::config(
                "video.vbr.curve",
                "gap, b_ref and slope must be positive",
            ));
        }
        Ok(())
    }
}

/// Synthetic VBR library. Each chunk draws one multiplicative size factor
/// shared by all its levels, so level ordering is preserved.
pub fn generate_vbr_library<R: Rng>(params: &VbrParams, rng: &mut R) -> Result<Vec<VideoFile>> {
    params.validate()?;
    let fluctuation = LogNormal::new(0.0, params.sigma).map_err(|e| Error::config("video.vbr.sigma", e.to_string()))?;
    (0..params.num_files)
        .map(|id| {
            let mut bpp = Vec::with_capacity(params.chunks as usize);
            let mut quality = Vec::with_capacity(params.chunks as usize);
            for _ in 0..params.chunks {
                let v = if params.sigma == 0.0 {
                    1.0
                } else {
                    fluctuation.sample(rng)
                };
                let row: Vec<f64> = params.base_bpp.iter().map(|b| b * v).collect();
                quality.push(row.iter().map(|&b| params.curve.quality(b)).collect());
                bpp.push(row);
            }
            VideoFile::new(id, params.constants, bpp, quality)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    chunk: u32,
    level: usize,
    bits_per_pixel: f64,
    quality: f64,
}

/// Reads a `chunk,level,bits_per_pixel,quality` CSV (1-based indices,
/// header required) covering the full level x chunk grid.
pub fn import_trace(path: &Path, id: usize, constants: VideoConstants) -> Result<VideoFile> {
    let trace_err = |reason: String| Error::Trace {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;

    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    for col in ["chunk", "level", "bits_per_pixel", "quality"] {
        if !headers.iter().any(|h| h == col) {
            return Err(trace_err(format!("missing column `{col}`")));
        }
    }

    let mut rows = Vec::new();
    for row in reader.deserialize::<TraceRow>() {
        rows.push(row.map_err(|e| Error::csv(path, e))?);
    }
    if rows.is_empty() {
        return Err(trace_err("no data rows".into()));
    }
    if rows.iter().any(|r| r.chunk == 0 || r.level == 0) {
        return Err(trace_err("chunk and level indices are 1-based".into()));
    }
    let chunks = rows.iter().map(|r| r.chunk).max().unwrap_or(0) as usize;
    let levels = rows.iter().map(|r| r.level).max().unwrap_or(0);

    let mut bpp = vec![vec![f64::NAN; levels]; chunks];
    let mut quality = vec![vec![f64::NAN; levels]; chunks];
    for r in &rows {
        let (ti, mi) = (r.chunk as usize - 1, r.level - 1);
        if !bpp[ti][mi].is_nan() {
            return Err(trace_err(format!("duplicate cell (t={}, m={})", r.chunk, r.level)));
        }
        bpp[ti][mi] = r.bits_per_pixel;
        quality[ti][mi] = r.quality;
    }
    for ti in 0..chunks {
        for mi in 0..levels {
            let (t, m) = (ti + 1, mi + 1);
            let (b, d) = (bpp[ti][mi], quality[ti][mi]);
            if b.is_nan() {
                return Err(trace_err(format!("missing cell (t={t}, m={m})")));
            }
            if b <= 0.0 {
                return Err(trace_err(format!("(t={t}, m={m}): bits per pixel must be positive")));
            }
            if !(d > 0.0 && d <= 1.0) {
                return Err(trace_err(format!("(t={t}, m={m}): quality {d} outside (0, 1]")));
            }
            if mi > 0 && (b < bpp[ti][mi - 1] || d < quality[ti][mi - 1]) {
                return Err(trace_err(format!("(t={t}, m={m}): level monotonicity violated")));
            }
        }
    }
    VideoFile::new(id, constants, bpp, quality)
}

/// Writes `file` in the format read by [`import_trace`].
pub fn export_trace(file: &VideoFile, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for (ti, (b_row, d_row)) in file.bits_per_pixel.iter().zip(&file.quality).enumerate() {
        for (mi, (&b, &d)) in b_row.iter().zip(d_row).enumerate() {
            writer
                .serialize(TraceRow {
                    chunk: ti as u32 + 1,
                    level: mi + 1,
                    bits_per_pixel: b,
                    quality: d,
                })
                .map_err(|e| Error::csv(path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
