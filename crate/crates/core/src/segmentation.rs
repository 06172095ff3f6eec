//! Epoch alignment across the three receivers and block cutting.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::GfSeries;
use crate::ubx::{normalize_azimuth, Role, SatGeometry, SatelliteId};

pub const DEFAULT_BLOCK_DURATION: f64 = 300.0;
pub const DEFAULT_ALIGNMENT_TOLERANCE: f64 = 0.010;

/// Common epochs of the three roles and, per epoch, the sample index in
/// each role's series (alice, bob, eve order).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignedGrid {
    pub epochs: Vec<f64>,
    pub indices: Vec<[usize; 3]>,
}

impl AlignedGrid {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

fn nearest_within(series: &GfSeries, t: f64, tolerance: f64) -> Option<usize> {
    let s = series.samples();
    let pos = s.partition_point(|x| x.epoch < t);
    let mut best: Option<(usize, f64)> = None;
    for i in [pos.wrapping_sub(1), pos] {
        if let Some(x) = s.get(i) {
            let d = (x.epoch - t).abs();
            if d <= tolerance && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
    }
    best.map(|b| b.0)
}

fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

/// Epochs at which every role has a sample within `tolerance` seconds.
///
/// Samples are matched regardless of validity so that block cutting can
/// report why a window was rejected. The grid epoch is the median of the
/// three matched receiver epochs.
pub fn align_epochs(a: &GfSeries, b: &GfSeries, e: &GfSeries, tolerance: f64) -> AlignedGrid {
    let mut grid = AlignedGrid::default();
    for (ia, sa) in a.samples().iter().enumerate() {
        let (Some(ib), Some(ie)) = (
            nearest_within(b, sa.epoch, tolerance),
            nearest_within(e, sa.epoch, tolerance),
        ) else {
            continue;
        };
        let t = median3(sa.epoch, b.samples()[ib].epoch, e.samples()[ie].epoch);
        if grid.epochs.last().is_some_and(|&p| t <= p) {
            continue;
        }
        grid.epochs.push(t);
        grid.indices.push([ia, ib, ie]);
    }
    grid
}

/// One satellite, one window, three receivers; validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedBlock {
    sat: SatelliteId,
    start_epoch: f64,
    sample_rate: f64,
    series: [Vec<f64>; 3],
    geometry: Option<(f64, f64)>,
}

impl AlignedBlock {
    pub fn new(
        sat: SatelliteId,
        start_epoch: f64,
        sample_rate: f64,
        expected_len: usize,
        series: [Vec<f64>; 3],
    ) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidBlock(format!("sample rate {sample_rate}")));
        }
        for (role, s) in Role::ALL.iter().zip(&series) {
            if s.len() != expected_len {
                return Err(Error::InvalidBlock(format!(
                    "{role} series has {} samples, expected {expected_len}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidBlock(format!("{role} series has non-finite samples")));
            }
        }
        Ok(AlignedBlock {
            sat,
            start_epoch,
            sample_rate,
            series,
            geometry: None,
        })
    }

    pub fn sat(&self) -> SatelliteId {
        self.sat
    }

    pub fn start_epoch(&self) -> f64 {
        self.start_epoch
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.series[0].is_empty()
    }

    /// Nominal end of the block (exclusive).
    pub fn end_epoch(&self) -> f64 {
        self.start_epoch + self.len() as f64 / self.sample_rate
    }

    pub fn series(&self, role: Role) -> &[f64] {
        &self.series[role as usize]
    }

    pub fn series_a(&self) -> &[f64] {
        &self.series[0]
    }

    pub fn series_b(&self) -> &[f64] {
        &self.series[1]
    }

    pub fn series_e(&self) -> &[f64] {
        &self.series[2]
    }

    pub fn mean_elevation(&self) -> Option<f64> {
        self.geometry.map(|g| g.0)
    }

    pub fn mean_azimuth(&self) -> Option<f64> {
        self.geometry.map(|g| g.1)
    }

    pub fn set_geometry(&mut self, elevation: f64, azimuth: f64) -> Result<()> {
        if !(-90.0..=90.0).contains(&elevation) {
            return Err(Error::InvalidBlock(format!("mean elevation {elevation}")));
        }
        self.geometry = Some((elevation, normalize_azimuth(azimuth)));
        Ok(())
    }

    /// Block with its role series reordered: `order[i]` names the source
    /// role that becomes role `i`.
    pub fn permuted(&self, order: [Role; 3]) -> Self {
        let mut out = self.clone();
        out.series = order.map(|r| self.series[r as usize].clone());
        out
    }
}

/// Why a window did not become a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmissionReason {
    /// At least one nominal epoch is missing for some receiver.
    Gap,
    /// A receiver had only one band at some epoch.
    BandDropout,
    /// Phase continuity was broken inside the window.
    CycleSlip,
    /// The data ends before the window does.
    Truncated,
}

impl OmissionReason {
    pub fn name(self) -> &'static str {
        match self {
            OmissionReason::Gap => "gap",
            OmissionReason::BandDropout => "band_dropout",
            OmissionReason::CycleSlip => "cycle_slip",
            OmissionReason::Truncated => "truncated",
        }
    }
}

impl fmt::Display for OmissionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OmissionCounts {
    pub gap: usize,
    pub band_dropout: usize,
    pub cycle_slip: usize,
    pub truncated: usize,
}

impl OmissionCounts {
    pub fn add(&mut self, reason: OmissionReason) {
        match reason {
            OmissionReason::Gap => self.gap += 1,
            OmissionReason::BandDropout => self.band_dropout += 1,
            OmissionReason::CycleSlip => self.cycle_slip += 1,
            OmissionReason::Truncated => self.truncated += 1,
        }
    }

    pub fn get(&self, reason: OmissionReason) -> usize {
        match reason {
            OmissionReason::Gap => self.gap,
            OmissionReason::BandDropout => self.band_dropout,
            OmissionReason::CycleSlip => self.cycle_slip,
            OmissionReason::Truncated => self.truncated,
        }
    }

    pub fn total(&self) -> usize {
        self.gap + self.band_dropout + self.cycle_slip + self.truncated
    }

    pub fn merge(&mut self, other: &OmissionCounts) {
        self.gap += other.gap;
        self.band_dropout += other.band_dropout;
        self.cycle_slip += other.cycle_slip;
        self.truncated += other.truncated;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmittedWindow {
    pub sat: SatelliteId,
    pub start_epoch: f64,
    pub reason: OmissionReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockConfig {
    pub block_duration: f64,
    pub sample_rate: f64,
    pub alignment_tolerance: f64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            block_duration: DEFAULT_BLOCK_DURATION,
            sample_rate: crate::observables::DEFAULT_SAMPLE_RATE,
            alignment_tolerance: DEFAULT_ALIGNMENT_TOLERANCE,
        }
    }
}

impl BlockConfig {
    /// Samples per block; errors unless duration × rate is an integer.
    pub fn samples_per_block(&self) -> Result<usize> {
        let n = self.block_duration * self.sample_rate;
        if !(n >= 1.0) || (n - n.round()).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "block duration {} s at {} Hz is not a whole number of samples",
                self.block_duration, self.sample_rate
            )));
        }
        Ok(n.round() as usize)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BlockOutcome {
    pub blocks: Vec<AlignedBlock>,
    pub omitted: Vec<OmittedWindow>,
    pub counts: OmissionCounts,
}

/// Tiles the grid into consecutive windows of `block_duration` starting at
/// the first grid epoch and keeps the windows that are complete and clean.
///
/// Grid epochs are mapped onto nominal sample slots relative to the first
/// epoch; a window is complete when all of its slots are present. Within a
/// window, a slip flagged on the first sample only concerns continuity
/// with data before the window and is ignored.
pub fn make_blocks(grid: &AlignedGrid, series: [&GfSeries; 3], config: &BlockConfig) -> Result<BlockOutcome> {
    let per_block = config.samples_per_block()?;
    let mut out = BlockOutcome::default();
    let Some(&t0) = grid.epochs.first() else {
        return Ok(out);
    };
    let sat = series[0].sat;
    let last_slot = ((grid.epochs[grid.len() - 1] - t0) * config.sample_rate).round() as i64;

    let mut start = 0usize;
    while start < grid.len() {
        let slot0 = ((grid.epochs[start] - t0) * config.sample_rate).round() as i64;
        let window = slot0.div_euclid(per_block as i64);
        let first_slot = window * per_block as i64;
        let window_start_epoch = t0 + first_slot as f64 / config.sample_rate;
        let mut end = start;
        let mut contiguous = true;
        let mut prev_slot = first_slot - 1;
        while end < grid.len() {
            let slot = ((grid.epochs[end] - t0) * config.sample_rate).round() as i64;
            if slot.div_euclid(per_block as i64) != window {
                break;
            }
            if slot != prev_slot + 1 {
                contiguous = false;
            }
            prev_slot = slot;
            end += 1;
        }

        let reason = if first_slot + per_block as i64 - 1 > last_slot {
            Some(OmissionReason::Truncated)
        } else if !contiguous || end - start != per_block {
            Some(OmissionReason::Gap)
        } else {
            classify_window(grid, series, start, end)
        };

        match reason {
            Some(r) => {
                out.counts.add(r);
                out.omitted.push(OmittedWindow {
                    sat,
                    start_epoch: window_start_epoch,
                    reason: r,
                });
            }
            None => {
                let values = [0, 1, 2].map(|role| {
                    grid.indices[start..end]
                        .iter()
                        .map(|idx| series[role].samples()[idx[role]].value)
                        .collect::<Vec<_>>()
                });
                out.blocks.push(AlignedBlock::new(
                    sat,
                    grid.epochs[start],
                    config.sample_rate,
                    per_block,
                    values,
                )?);
            }
        }
        start = end;
    }
    Ok(out)
}

fn classify_window(
    grid: &AlignedGrid,
    series: [&GfSeries; 3],
    start: usize,
    end: usize,
) -> Option<OmissionReason> {
    let mut dropout = false;
    let mut slip = false;
    for (pos, idx) in grid.indices[start..end].iter().enumerate() {
        for role in 0..3 {
            let s = &series[role].samples()[idx[role]];
            let is_slip = series[role].is_slip(s.epoch);
            if is_slip {
                if pos > 0 {
                    slip = true;
                } else if !s.value.is_finite() {
                    dropout = true;
                }
            } else if !s.valid {
                dropout = true;
            }
        }
    }
    if dropout {
        Some(OmissionReason::BandDropout)
    } else if slip {
        Some(OmissionReason::CycleSlip)
    } else {
        None
    }
}

/// Mean elevation (arithmetic) and azimuth (circular) over the block.
pub fn block_geometry(block: &AlignedBlock, geometry: &[SatGeometry]) -> Result<(f64, f64)> {
    let (start, end) = (block.start_epoch(), block.end_epoch());
    let mut n = 0usize;
    let (mut el, mut s, mut c) = (0.0, 0.0, 0.0);
    for g in geometry
        .iter()
        .filter(|g| g.sat == block.sat() && g.epoch >= start && g.epoch < end)
    {
        n += 1;
        el += g.elevation;
        let az = g.azimuth.to_radians();
        s += az.sin();
        c += az.cos();
    }
    if n == 0 {
        return Err(Error::GeometryMissing {
            sat: block.sat().to_string(),
            start,
            end,
        });
    }
    // snapped to 1e-9 degree so constant tracks land on their exact value
    let az = (s.atan2(c).to_degrees() * 1e9).round() / 1e9;
    let az = normalize_azimuth(if az == 0.0 { 0.0 } else { az });
    Ok(((el / n as f64).clamp(-90.0, 90.0), az))
}

/// Aligns, cuts and (where possible) attaches geometry for one satellite.
pub fn segment_satellite(
    series: [&GfSeries; 3],
    geometry: &[SatGeometry],
    config: &BlockConfig,
) -> Result<BlockOutcome> {
    let sat = series[0].sat;
    if series.iter().any(|s| s.sat != sat) {
        return Err(Error::Parameter("series belong to different satellites".into()));
    }
    let grid = align_epochs(series[0], series[1], series[2], config.alignment_tolerance);
    let mut out = make_blocks(&grid, series, config)?;
    for b in out.blocks.iter_mut() {
        if let Ok((el, az)) = block_geometry(b, geometry) {
            b.set_geometry(el, az)?;
        }
    }
    Ok(out)
}

/// Writes `sat,start_epoch,mean_elevation,mean_azimuth,omitted_reason`.
pub fn write_block_manifest<W: Write>(outcome: &BlockOutcome, out: W) -> Result<()> {
    let mut rows: Vec<(SatelliteId, f64, String, String, &str)> = outcome
        .blocks
        .iter()
        .map(|b| {
            (
                b.sat(),
                b.start_epoch(),
                b.mean_elevation().map(|v| v.to_string()).unwrap_or_default(),
                b.mean_azimuth().map(|v| v.to_string()).unwrap_or_default(),
                "",
            )
        })
        .chain(outcome.omitted.iter().map(|o| {
            (o.sat, o.start_epoch, String::new(), String::new(), o.reason.name())
        }))
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sat", "start_epoch", "mean_elevation", "mean_azimuth", "omitted_reason"])?;
    for (sat, start, el, az, reason) in rows {
        w.write_record([sat.to_string(), format!("{start:.3}"), el, az, reason.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<block manifest>", e))?;
    Ok(())
}
