//! Aggregation of per-block key rates into criteria tables, availability,
//! distributions and sky plots.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::{secure_bit_rate, SkrRecord};
use crate::segmentation::DEFAULT_BLOCK_DURATION;
use crate::ubx::{normalize_azimuth, Constellation};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.4, 0.2, 0.0];

/// Elevation interval in degrees with per-end openness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: false, hi_open: false }
    }

    /// `(lo, hi]`
    pub fn left_open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: true, hi_open: false }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_open { v > self.lo } else { v >= self.lo };
        let below = if self.hi_open { v < self.hi } else { v <= self.hi };
        above && below
    }
}

/// Azimuth sector, swept clockwise from `from` to `to` (both inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sector {
    /// 315° through north to 45°.
    NwNe,
    /// 135° through south to 225°.
    SwSe,
    Degrees { from: f64, to: f64 },
}

impl Sector {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Sector::NwNe => (315.0, 45.0),
            Sector::SwSe => (135.0, 225.0),
            Sector::Degrees { from, to } => (normalize_azimuth(from), normalize_azimuth(to)),
        }
    }

    pub fn contains(self, azimuth: f64) -> bool {
        let (from, to) = self.bounds();
        let az = normalize_azimuth(azimuth);
        if from <= to {
            az >= from && az <= to
        } else {
            az >= from || az <= to
        }
    }

    pub fn label(self) -> String {
        match self {
            Sector::NwNe => "NW-NE".into(),
            Sector::SwSe => "SW-SE".into(),
            Sector::Degrees { from, to } => format!("{from}-{to} deg"),
        }
    }
}

/// Conjunction of optional predicates over records.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CriteriaFilter {
    pub label: String,
    pub elevation: Option<Interval>,
    /// A record matches if it lies in any listed sector.
    pub sectors: Option<Vec<Sector>>,
    pub constellations: Option<BTreeSet<Constellation>>,
    /// Hour-of-day window `[from, to)` on the block start (GPS time).
    pub hours_of_day: Option<(f64, f64)>,
    /// Further filters that must all pass.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub also: Vec<CriteriaFilter>,
}

impl CriteriaFilter {
    pub fn new(label: impl Into<String>) -> Self {
        CriteriaFilter {
            label: label.into(),
            ..Default::default()
        }
    }

    pub fn elevation(mut self, interval: Interval) -> Self {
        self.elevation = Some(interval);
        self
    }

    pub fn sector(mut self, sector: Sector) -> Self {
        self.sectors.get_or_insert_with(Vec::new).push(sector);
        self
    }

    pub fn constellation(mut self, c: Constellation) -> Self {
        self.constellations.get_or_insert_with(BTreeSet::new).insert(c);
        self
    }

    pub fn hours_of_day(mut self, from: f64, to: f64) -> Self {
        self.hours_of_day = Some((from, to));
        self
    }

    pub fn uses_position(&self) -> bool {
        self.elevation.is_some() || self.sectors.is_some() || self.also.iter().any(|f| f.uses_position())
    }

    /// Conjunction with another filter.
    pub fn and(&self, other: &CriteriaFilter) -> CriteriaFilter {
        let mut out = self.clone();
        out.label = format!("{}, {}", self.label, other.label);
        out.also.push(other.clone());
        out
    }

    /// Whether the record passes; `None` when the filter needs geometry the
    /// record lacks.
    pub fn matches(&self, r: &SkrRecord) -> Option<bool> {
        if self.uses_position() && !r.has_geometry() {
            return None;
        }
        if let Some(iv) = self.elevation {
            if !iv.contains(r.mean_elevation.unwrap()) {
                return Some(false);
            }
        }
        if let Some(sectors) = &self.sectors {
            let az = r.mean_azimuth.unwrap();
            if !sectors.iter().any(|s| s.contains(az)) {
                return Some(false);
            }
        }
        if let Some(cs) = &self.constellations {
            if !cs.contains(&r.sat.constellation()) {
                return Some(false);
            }
        }
        if let Some((from, to)) = self.hours_of_day {
            let h = r.start_epoch.rem_euclid(86_400.0) / 3600.0;
            let inside = if from <= to { h >= from && h < to } else { h >= from || h < to };
            if !inside {
                return Some(false);
            }
        }
        for f in &self.also {
            if f.matches(r) != Some(true) {
                return Some(false);
            }
        }
        Some(true)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Filtered<'a> {
    pub records: Vec<&'a SkrRecord>,
    /// Records dropped because the filter needs geometry they lack.
    pub excluded_no_geometry: usize,
}

pub fn filter_records<'a>(records: &'a [SkrRecord], filter: &CriteriaFilter) -> Filtered<'a> {
    let mut out = Filtered::default();
    for r in records {
        match filter.matches(r) {
            Some(true) => out.records.push(r),
            Some(false) => {}
            None => out.excluded_no_geometry += 1,
        }
    }
    out
}

/// Contiguous elevation bins plus sector and constellation rows.
pub fn builtin_filters() -> Vec<CriteriaFilter> {
    let low = Interval::closed(-90.0, 10.0);
    let mut v = vec![
        CriteriaFilter::new("All Data"),
        CriteriaFilter::new("elev <= 2").elevation(Interval::closed(-90.0, 2.0)),
        CriteriaFilter::new("2 < elev <= 10").elevation(Interval::left_open(2.0, 10.0)),
        CriteriaFilter::new("10 < elev <= 45").elevation(Interval::left_open(10.0, 45.0)),
        CriteriaFilter::new("elev > 45").elevation(Interval::left_open(45.0, 90.0)),
        CriteriaFilter::new("NW-NE").sector(Sector::NwNe),
        CriteriaFilter::new("NW-NE, elev <= 10").sector(Sector::NwNe).elevation(low),
        CriteriaFilter::new("SW-SE").sector(Sector::SwSe),
        CriteriaFilter::new("SW-SE, elev <= 10").sector(Sector::SwSe).elevation(low),
    ];
    for c in [
        Constellation::BeiDou,
        Constellation::Galileo,
        Constellation::Glonass,
        Constellation::Gps,
        Constellation::Qzss,
    ] {
        v.push(CriteriaFilter::new(c.name()).constellation(c));
    }
    v
}

/// Elevation rows with a closed 3°–10° band, leaving (2°, 3°) uncovered.
pub fn gapped_elevation_filters() -> Vec<CriteriaFilter> {
    vec![
        CriteriaFilter::new("elev <= 2").elevation(Interval::closed(-90.0, 2.0)),
        CriteriaFilter::new("3 <= elev <= 10").elevation(Interval::closed(3.0, 10.0)),
        CriteriaFilter::new("10 < elev <= 45").elevation(Interval::left_open(10.0, 45.0)),
        CriteriaFilter::new("elev > 45").elevation(Interval::left_open(45.0, 90.0)),
    ]
}

/// Assignment of blocks to fixed-length slots of a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Session {
    pub origin: f64,
    pub slot_seconds: f64,
    pub total_slots: usize,
}

impl Session {
    /// Origin at the earliest block. The slot count comes from
    /// `session_hours` when given, otherwise from the last block.
    pub fn from_records(records: &[SkrRecord], slot_seconds: f64, session_hours: Option<f64>) -> Result<Self> {
        let origin = records
            .iter()
            .map(|r| r.start_epoch)
            .fold(f64::INFINITY, f64::min);
        let total_slots = match session_hours {
            Some(h) => (h * 3600.0 / slot_seconds).round() as usize,
            None if origin.is_finite() => {
                let last = records
                    .iter()
                    .map(|r| ((r.start_epoch - origin) / slot_seconds).floor() as usize)
                    .max()
                    .unwrap_or(0);
                last + 1
            }
            None => 0,
        };
        if total_slots == 0 {
            return Err(Error::EmptySession);
        }
        Ok(Session {
            origin: if origin.is_finite() { origin } else { 0.0 },
            slot_seconds,
            total_slots,
        })
    }

    pub fn with_default_slots(records: &[SkrRecord]) -> Result<Self> {
        Self::from_records(records, DEFAULT_BLOCK_DURATION, None)
    }

    /// Slot of a block, `None` outside the session.
    pub fn slot(&self, start_epoch: f64) -> Option<usize> {
        let s = ((start_epoch - self.origin) / self.slot_seconds).floor();
        (s >= 0.0 && (s as usize) < self.total_slots).then_some(s as usize)
    }

    pub fn hours(&self) -> f64 {
        self.total_slots as f64 * self.slot_seconds / 3600.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaRow {
    pub label: String,
    pub thresholds: Vec<f64>,
    /// Mean satellites per slot with `r_sk > threshold`, per threshold.
    pub avg_count_above: Vec<f64>,
    /// Mean satellites per slot with `r_sk <= 0`.
    pub avg_count_nonpositive: f64,
}

fn per_slot_counts<'a>(
    records: impl Iterator<Item = &'a SkrRecord>,
    session: &Session,
    pred: impl Fn(f64) -> bool,
) -> Vec<usize> {
    let mut counts = vec![0usize; session.total_slots];
    for r in records {
        if let Some(s) = session.slot(r.start_epoch) {
            if pred(r.r_sk) {
                counts[s] += 1;
            }
        }
    }
    counts
}

pub fn criteria_table(
    records: &[SkrRecord],
    filters: &[CriteriaFilter],
    thresholds: &[f64],
    session: &Session,
) -> Result<Vec<CriteriaRow>> {
    if session.total_slots == 0 {
        return Err(Error::EmptySession);
    }
    let slots = session.total_slots as f64;
    Ok(filters
        .iter()
        .map(|f| {
            let subset = filter_records(records, f).records;
            let avg = |pred: &dyn Fn(f64) -> bool| {
                per_slot_counts(subset.iter().copied(), session, pred).iter().sum::<usize>() as f64 / slots
            };
            CriteriaRow {
                label: f.label.clone(),
                thresholds: thresholds.to_vec(),
                avg_count_above: thresholds.iter().map(|&t| avg(&|r| r > t)).collect(),
                avg_count_nonpositive: avg(&|r| r <= 0.0),
            }
        })
        .collect())
}

/// Column of the availability table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateThreshold {
    Above(f64),
    AtMost(f64),
}

impl RateThreshold {
    pub fn holds(self, r_sk: f64) -> bool {
        match self {
            RateThreshold::Above(t) => r_sk > t,
            RateThreshold::AtMost(t) => r_sk <= t,
        }
    }

    pub fn label(self) -> String {
        match self {
            RateThreshold::Above(t) => format!(">{t}"),
            RateThreshold::AtMost(t) => format!("<={t}"),
        }
    }
}

pub const DEFAULT_AVAILABILITY: [RateThreshold; 5] = [
    RateThreshold::Above(0.4),
    RateThreshold::Above(0.2),
    RateThreshold::Above(0.0),
    RateThreshold::AtMost(0.0),
    RateThreshold::AtMost(-0.2),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvailabilityCell {
    pub threshold: RateThreshold,
    /// Slots with at least one satellite meeting the threshold.
    pub slots: usize,
    pub hours: f64,
    pub percentage: f64,
    /// Secure-bit-rate band implied by the threshold, bits per second.
    pub secure_bits_min: f64,
    pub secure_bits_max: Option<f64>,
}

impl AvailabilityCell {
    /// `>8`, `4-8`, `0-4` or `0`.
    pub fn secure_bits_label(&self) -> String {
        match (self.threshold, self.secure_bits_max) {
            (RateThreshold::AtMost(_), _) => "0".into(),
            (_, None) => format!(">{}", self.secure_bits_min),
            (_, Some(hi)) => format!("{}-{}", self.secure_bits_min, hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvailabilityRow {
    pub total_slots: usize,
    pub total_hours: f64,
    pub cells: Vec<AvailabilityCell>,
}

pub fn availability_table(
    records: &[SkrRecord],
    thresholds: &[RateThreshold],
    session: &Session,
    sample_rate: f64,
) -> Result<AvailabilityRow> {
    if session.total_slots == 0 {
        return Err(Error::EmptySession);
    }
    let slot_hours = session.slot_seconds / 3600.0;
    let cells = thresholds
        .iter()
        .map(|&th| {
            let slots = per_slot_counts(records.iter(), session, |r| th.holds(r))
                .iter()
                .filter(|&&c| c > 0)
                .count();
            let (lo, hi) = match th {
                RateThreshold::Above(t) => {
                    let next = thresholds
                        .iter()
                        .filter_map(|o| match o {
                            RateThreshold::Above(u) if *u > t => Some(*u),
                            _ => None,
                        })
                        .fold(f64::INFINITY, f64::min);
                    (
                        secure_bit_rate(t, sample_rate),
                        next.is_finite().then(|| secure_bit_rate(next, sample_rate)),
                    )
                }
                RateThreshold::AtMost(_) => (0.0, Some(0.0)),
            };
            AvailabilityCell {
                threshold: th,
                slots,
                hours: slots as f64 * slot_hours,
                percentage: 100.0 * slots as f64 / session.total_slots as f64,
                secure_bits_min: lo,
                secure_bits_max: hi,
            }
        })
        .collect();
    Ok(AvailabilityRow {
        total_slots: session.total_slots,
        total_hours: session.hours(),
        cells,
    })
}

/// Order statistics of `r_sk` over a filtered subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub label: String,
    pub count: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

/// Linear-interpolation quantile of ascending data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn rsk_distribution(records: &[SkrRecord], filters: &[CriteriaFilter]) -> Vec<DistributionSummary> {
    filters
        .iter()
        .map(|f| {
            let mut v: Vec<f64> = filter_records(records, f).records.iter().map(|r| r.r_sk).collect();
            v.sort_by(f64::total_cmp);
            let stat = |q: f64| (!v.is_empty()).then(|| quantile(&v, q));
            DistributionSummary {
                label: f.label.clone(),
                count: v.len(),
                min: v.first().copied(),
                q1: stat(0.25),
                median: stat(0.5),
                q3: stat(0.75),
                max: v.last().copied(),
                mean: (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64),
            }
        })
        .collect()
}

/// Value plotted on a sky chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SkyChannel {
    Rsk,
    MiAb,
}

impl SkyChannel {
    fn column(self) -> &'static str {
        match self {
            SkyChannel::Rsk => "r_sk",
            SkyChannel::MiAb => "i_ab",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkyPoint {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkyExport {
    pub channel: SkyChannel,
    pub points: Vec<SkyPoint>,
    pub skipped_no_geometry: usize,
}

fn sky_export(records: &[SkrRecord], channel: SkyChannel) -> SkyExport {
    let mut points = Vec::new();
    let mut skipped = 0;
    for r in records {
        match (r.mean_azimuth, r.mean_elevation) {
            (Some(az), Some(el)) => points.push(SkyPoint {
                azimuth_deg: az,
                elevation_deg: el,
                value: match channel {
                    SkyChannel::Rsk => r.r_sk,
                    SkyChannel::MiAb => r.i_ab.value_bits,
                },
            }),
            _ => skipped += 1,
        }
    }
    SkyExport {
        channel,
        points,
        skipped_no_geometry: skipped,
    }
}

/// One point per block carrying geometry, valued by `r_sk`.
pub fn skyplot_export(records: &[SkrRecord]) -> SkyExport {
    sky_export(records, SkyChannel::Rsk)
}

/// As [`skyplot_export`] with `I(A;B)` as the value.
pub fn mi_export(records: &[SkrRecord]) -> SkyExport {
    sky_export(records, SkyChannel::MiAb)
}

pub fn write_sky_csv<W: Write>(export: &SkyExport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["azimuth_deg", "elevation_deg", export.channel.column()])?;
    for p in &export.points {
        w.write_record([p.azimuth_deg.to_string(), p.elevation_deg.to_string(), p.value.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<sky csv>", e))?;
    Ok(())
}

pub const SKY_RADIUS: f64 = 200.0;
const SKY_MARGIN: f64 = 40.0;

/// Chart coordinates: zenith at the centre, horizon at the rim, north up,
/// azimuth clockwise. Negative elevations are pinned to the rim.
pub fn sky_position(azimuth_deg: f64, elevation_deg: f64) -> (f64, f64) {
    let c = SKY_MARGIN + SKY_RADIUS;
    let r = SKY_RADIUS * (90.0 - elevation_deg.clamp(0.0, 90.0)) / 90.0;
    let a = azimuth_deg.to_radians();
    (c + r * a.sin(), c - r * a.cos())
}

/// Diverging blue–white–red colour, saturating at ±`span`.
pub fn diverging_color(value: f64, span: f64) -> String {
    let t = (value / span).clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Self-contained SVG polar chart.
pub fn render_sky_svg(export: &SkyExport, title: &str) -> String {
    let size = 2.0 * (SKY_MARGIN + SKY_RADIUS);
    let c = SKY_MARGIN + SKY_RADIUS;
    let span = match export.channel {
        SkyChannel::Rsk => 1.0,
        SkyChannel::MiAb => 3.0,
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for el in [0.0, 30.0, 60.0] {
        let r = SKY_RADIUS * (90.0 - el) / 90.0;
        let _ = writeln!(s, r##"<circle cx="{c}" cy="{c}" r="{r}" fill="none" stroke="#999999"/>"##);
    }
    for (label, az) in [("N", 0.0), ("E", 90.0), ("S", 180.0), ("W", 270.0)] {
        let (x, y) = sky_position(az, 0.0);
        let (lx, ly) = sky_position(az, -15.0);
        let _ = writeln!(s, r##"<line x1="{c}" y1="{c}" x2="{x}" y2="{y}" stroke="#cccccc"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="{lx}" y="{}" text-anchor="middle" font-size="14">{label}</text>"#,
            ly + 5.0
        );
    }
    for p in &export.points {
        let (x, y) = sky_position(p.azimuth_deg, p.elevation_deg);
        let _ = writeln!(
            s,
            r##"<circle class="pt" cx="{x:.3}" cy="{y:.3}" r="3" fill="{}" stroke="#333333" stroke-width="0.3"/>"##,
            diverging_color(p.value, span)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_num(v: f64) -> String {
    format!("{v:.1}")
}

/// `criterion,>0.4,>0.2,>0,<=0`, values rounded to one decimal.
pub fn write_criteria_csv<W: Write>(rows: &[CriteriaRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = rows.first() else {
        w.write_record(["criterion"])?;
        w.flush().map_err(|e| Error::io("<criteria csv>", e))?;
        return Ok(());
    };
    let mut header = vec!["criterion".to_string()];
    header.extend(first.thresholds.iter().map(|t| format!(">{t}")));
    header.push("<=0".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.label.clone()];
        rec.extend(r.avg_count_above.iter().map(|&v| fmt_num(v)));
        rec.push(fmt_num(r.avg_count_nonpositive));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<criteria csv>", e))?;
    Ok(())
}

/// Three rows (secure bits, hours, percent) under the threshold columns.
pub fn write_availability_csv<W: Write>(row: &AvailabilityRow, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["criterion".to_string()];
    header.extend(row.cells.iter().map(|c| c.threshold.label()));
    w.write_record(&header)?;
    let mut bits = vec!["secure_bits_per_second".to_string()];
    bits.extend(row.cells.iter().map(|c| c.secure_bits_label()));
    let mut hours = vec!["hours".to_string()];
    hours.extend(row.cells.iter().map(|c| fmt_num(c.hours)));
    let mut pct = vec!["percent".to_string()];
    pct.extend(row.cells.iter().map(|c| fmt_num(c.percentage)));
    for rec in [bits, hours, pct] {
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<availability csv>", e))?;
    Ok(())
}

pub fn write_distribution_csv<W: Write>(rows: &[DistributionSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["criterion", "count", "min", "q1", "median", "q3", "max", "mean"])?;
    let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.count.to_string(),
            o(r.min),
            o(r.q1),
            o(r.median),
            o(r.q3),
            o(r.max),
            o(r.mean),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<distribution csv>", e))?;
    Ok(())
}

/// Machine-readable bundle of every table for one session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub session: Session,
    pub records: usize,
    pub records_with_geometry: usize,
    pub criteria: Vec<CriteriaRow>,
    pub availability: AvailabilityRow,
    pub distributions: Vec<DistributionSummary>,
}

pub fn session_summary(
    records: &[SkrRecord],
    filters: &[CriteriaFilter],
    session: &Session,
    sample_rate: f64,
) -> Result<SessionSummary> {
    Ok(SessionSummary {
        session: *session,
        records: records.len(),
        records_with_geometry: records.iter().filter(|r| r.has_geometry()).count(),
        criteria: criteria_table(records, filters, &DEFAULT_THRESHOLDS, session)?,
        availability: availability_table(records, &DEFAULT_AVAILABILITY, session, sample_rate)?,
        distributions: rsk_distribution(records, filters),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::MiEstimate;
    use crate::ubx::SatelliteId;
    use proptest::prelude::*;

    fn rec(sat: &str, start: f64, geo: Option<(f64, f64)>, r_sk: f64) -> SkrRecord {
        let est = |v| MiEstimate { value_bits: v, k: 4, n: 6000 };
        SkrRecord::new(sat.parse::<SatelliteId>().unwrap(), start, geo, est(r_sk + 0.1), est(0.1), est(0.2))
    }

    #[test]
    fn empty_filter_is_identity() {
        let v = vec![rec("G01", 0.0, None, 0.5), rec("E02", 0.0, Some((1.0, 2.0)), -0.5)];
        assert_eq!(filter_records(&v, &CriteriaFilter::new("all")).records.len(), 2);
    }

    #[test]
    fn elevation_band_inclusive() {
        let v = vec![
            rec("G01", 0.0, Some((1.5, 0.0)), 0.5),
            rec("G02", 0.0, Some((5.0, 0.0)), 0.5),
            rec("G03", 0.0, Some((2.0, 0.0)), 0.5),
            rec("G04", 0.0, None, 0.5),
        ];
        let f = filter_records(&v, &CriteriaFilter::new("low").elevation(Interval::closed(0.0, 2.0)));
        let sats: Vec<String> = f.records.iter().map(|r| r.sat.to_string()).collect();
        assert_eq!(sats, ["G01", "G03"]);
        assert_eq!(f.excluded_no_geometry, 1);
    }

    #[test]
    fn wraparound_sector() {
        let v = vec![
            rec("G01", 0.0, Some((10.0, 350.0)), 0.5),
            rec("G02", 0.0, Some((10.0, 10.0)), 0.5),
            rec("G03", 0.0, Some((10.0, 100.0)), 0.5),
        ];
        let f = filter_records(&v, &CriteriaFilter::new("n").sector(Sector::NwNe));
        assert_eq!(f.records.len(), 2);
        assert!(Sector::SwSe.contains(135.0) && Sector::SwSe.contains(225.0) && !Sector::SwSe.contains(226.0));
        assert!(Sector::NwNe.contains(315.0) && Sector::NwNe.contains(45.0) && Sector::NwNe.contains(0.0));
    }

    #[test]
    fn criteria_average_over_slots() {
        let mut v = Vec::new();
        for i in 0..3 {
            v.push(rec(&format!("G0{}", i + 1), 0.0, None, 0.5));
        }
        for i in 0..4 {
            v.push(rec(&format!("E0{}", i + 1), 300.0, None, 0.1));
        }
        let s = Session::with_default_slots(&v).unwrap();
        assert_eq!(s.total_slots, 2);
        let rows = criteria_table(&v, &[CriteriaFilter::new("All Data")], &DEFAULT_THRESHOLDS, &s).unwrap();
        assert_eq!(rows[0].avg_count_above, vec![1.5, 1.5, 3.5]);
        assert_eq!(rows[0].avg_count_nonpositive, 0.0);
    }

    #[test]
    fn all_negative_rates() {
        let v = vec![rec("G01", 0.0, None, -0.1), rec("G02", 300.0, None, -0.4)];
        let s = Session::with_default_slots(&v).unwrap();
        let rows = criteria_table(&v, &[CriteriaFilter::new("All Data")], &DEFAULT_THRESHOLDS, &s).unwrap();
        assert_eq!(rows[0].avg_count_above, vec![0.0, 0.0, 0.0]);
        assert_eq!(rows[0].avg_count_nonpositive, 1.0);
    }

    #[test]
    fn empty_session_is_error() {
        assert!(matches!(Session::with_default_slots(&[]), Err(Error::EmptySession)));
        let s = Session { origin: 0.0, slot_seconds: 300.0, total_slots: 0 };
        assert!(criteria_table(&[], &[], &DEFAULT_THRESHOLDS, &s).is_err());
    }

    #[test]
    fn availability_full_and_empty() {
        let v: Vec<SkrRecord> = (0..12).map(|i| rec("G01", 300.0 * i as f64, None, 0.5)).collect();
        let s = Session::with_default_slots(&v).unwrap();
        let row = availability_table(&v, &DEFAULT_AVAILABILITY, &s, 20.0).unwrap();
        for c in &row.cells[..3] {
            assert_eq!(c.percentage, 100.0);
            assert!((c.hours - 1.0).abs() < 1e-12);
        }
        assert_eq!(row.cells[3].slots, 0);
        let labels: Vec<String> = row.cells.iter().map(|c| c.secure_bits_label()).collect();
        assert_eq!(labels, [">8", "4-8", "0-4", "0", "0"]);

        let s = Session { origin: 0.0, slot_seconds: 300.0, total_slots: 10 };
        let row = availability_table(&[], &DEFAULT_AVAILABILITY, &s, 20.0).unwrap();
        assert!(row.cells.iter().all(|c| c.hours == 0.0 && c.percentage == 0.0));
    }

    #[test]
    fn distribution_statistics() {
        let one = rsk_distribution(&[rec("G01", 0.0, None, 0.3)], &[CriteriaFilter::new("a")]);
        let d = &one[0];
        for v in [d.min, d.q1, d.median, d.q3, d.max, d.mean] {
            assert!((v.unwrap() - 0.3).abs() < 1e-15);
        }
        let two = rsk_distribution(
            &[rec("G01", 0.0, None, 0.0), rec("G02", 0.0, None, 1.0)],
            &[CriteriaFilter::new("a")],
        );
        assert!((two[0].median.unwrap() - 0.5).abs() < 1e-12);
        let none = rsk_distribution(&[], &[CriteriaFilter::new("a")]);
        assert_eq!(none[0].count, 0);
        assert_eq!(none[0].median, None);
    }

    #[test]
    fn sky_geometry() {
        let c = SKY_MARGIN + SKY_RADIUS;
        let (x, y) = sky_position(0.0, 90.0);
        assert!((x - c).abs() < 1e-9 && (y - c).abs() < 1e-9);
        let (x, y) = sky_position(90.0, 0.0);
        assert!((x - (c + SKY_RADIUS)).abs() < 1e-9 && (y - c).abs() < 1e-9);
        let (x, y) = sky_position(0.0, 0.0);
        assert!((x - c).abs() < 1e-9 && (y - (c - SKY_RADIUS)).abs() < 1e-9);
    }

    #[test]
    fn sky_exports() {
        let v = vec![rec("G01", 0.0, Some((90.0, 0.0)), 0.3), rec("G02", 0.0, None, 0.3)];
        let e = skyplot_export(&v);
        assert_eq!(e.points.len(), 1);
        assert_eq!(e.skipped_no_geometry, 1);
        assert_eq!(mi_export(&v).points[0].value, v[0].i_ab.value_bits);
        let svg = render_sky_svg(&e, "r_sk");
        assert_eq!(svg.matches(r#"class="pt""#).count(), 1);

        let empty = skyplot_export(&[]);
        let svg = render_sky_svg(&empty, "empty");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        let mut buf = Vec::new();
        write_sky_csv(&empty, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "azimuth_deg,elevation_deg,r_sk\n");
    }

    #[test]
    fn color_scale_is_centred() {
        assert_eq!(diverging_color(0.0, 1.0), "#ffffff");
        assert_eq!(diverging_color(5.0, 1.0), "#ff0000");
        assert_eq!(diverging_color(-1.0, 1.0), "#0000ff");
    }

    fn arb_record() -> impl Strategy<Value = SkrRecord> {
        (0usize..20, 1u8..30, proptest::option::of((-5.0f64..90.0, 0.0f64..360.0)), -1.0f64..1.5, 0usize..5)
            .prop_map(|(slot, prn, geo, r, c)| {
                let letter = ['G', 'R', 'E', 'C', 'J'][c];
                let prn = if letter == 'J' { 1 + prn % 10 } else { prn };
                rec(&format!("{letter}{prn}"), 300.0 * slot as f64 + 7.0, geo, r)
            })
    }

    proptest! {
        #[test]
        fn threshold_monotone(records in proptest::collection::vec(arb_record(), 1..80)) {
            let s = Session::with_default_slots(&records).unwrap();
            let rows = criteria_table(&records, &builtin_filters(), &DEFAULT_THRESHOLDS, &s).unwrap();
            for r in rows {
                prop_assert!(r.avg_count_above[0] <= r.avg_count_above[1]);
                prop_assert!(r.avg_count_above[1] <= r.avg_count_above[2]);
            }
            let a = availability_table(&records, &DEFAULT_AVAILABILITY, &s, 20.0).unwrap();
            prop_assert!(a.cells[0].slots <= a.cells[1].slots && a.cells[1].slots <= a.cells[2].slots);
            for c in &a.cells {
                prop_assert!((c.percentage - 100.0 * c.hours / a.total_hours).abs() < 1e-9);
            }
        }

        #[test]
        fn elevation_bins_partition_all_data(records in proptest::collection::vec(arb_record(), 1..80)) {
            let s = Session::with_default_slots(&records).unwrap();
            let with_geo: Vec<SkrRecord> = records.iter().filter(|r| r.has_geometry()).cloned().collect();
            let filters = builtin_filters();
            let all = criteria_table(&with_geo, &filters[..1], &DEFAULT_THRESHOLDS, &s).unwrap();
            let bins = criteria_table(&records, &filters[1..5], &DEFAULT_THRESHOLDS, &s).unwrap();
            for t in 0..3 {
                let sum: f64 = bins.iter().map(|b| b.avg_count_above[t]).sum();
                prop_assert!((sum - all[0].avg_count_above[t]).abs() < 1e-9);
            }
            let sum: f64 = bins.iter().map(|b| b.avg_count_nonpositive).sum();
            prop_assert!((sum - all[0].avg_count_nonpositive).abs() < 1e-9);
        }

        #[test]
        fn filter_composition_commutes(records in proptest::collection::vec(arb_record(), 0..60), i in 0usize..14, j in 0usize..14) {
            let fs = builtin_filters();
            let ab = fs[i].and(&fs[j]);
            let ba = fs[j].and(&fs[i]);
            let x: Vec<_> = filter_records(&records, &ab).records;
            let y: Vec<_> = filter_records(&records, &ba).records;
            prop_assert_eq!(x, y);
            // and equals sequential application
            let first: Vec<SkrRecord> = filter_records(&records, &fs[i]).records.into_iter().cloned().collect();
            let seq: Vec<SkrRecord> = filter_records(&first, &fs[j]).records.into_iter().cloned().collect();
            let both: Vec<SkrRecord> = filter_records(&records, &ab).records.into_iter().cloned().collect();
            prop_assert_eq!(seq, both);
        }
    }
}
