//! UBX ingestion: frame scanning, RXM-RAWX / NAV-SAT decoding and the
//! per-receiver observation store.

mod frame;
mod navsat;
mod rawx;
mod store;

#[doc(hidden)]
pub mod encode;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use frame::{fletcher_checksum, parse_ubx_stream, ParsedStream, UbxFrame, SYNC};
pub use navsat::{decode_navsat, parse_navsat_payload, NavSatDecode, NavSatEntry, NAV_SAT};
pub use rawx::{
    carrier_frequency, classify_signal, decode_rawx, parse_rawx_payload, RawxDecode, RawxEpoch,
    RawxMeasurement, RXM_RAWX,
};
pub use store::{
    ingest_bytes, ingest_file, read_geometry_csv, write_geometry_csv, write_observations_csv, IngestSummary,
    ObservationStore, Role,
};

/// Seconds in one GPS week.
pub const SECONDS_PER_WEEK: f64 = 604_800.0;

/// Millisecond key for an epoch in seconds. Receiver epochs have 1 ms
/// resolution, so two epochs are "the same" when their keys agree.
#[inline]
pub fn epoch_key(epoch: f64) -> i64 {
    (epoch * 1000.0).round() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constellation {
    Gps,
    Glonass,
    Galileo,
    BeiDou,
    Qzss,
}

impl Constellation {
    pub const ALL: [Constellation; 5] = [
        Constellation::Gps,
        Constellation::Glonass,
        Constellation::Galileo,
        Constellation::BeiDou,
        Constellation::Qzss,
    ];

    /// Valid PRN / slot numbers (u-blox gnssId-based numbering).
    pub fn prn_range(self) -> std::ops::RangeInclusive<u8> {
        match self {
            Constellation::Gps => 1..=32,
            Constellation::Glonass => 1..=32,
            Constellation::Galileo => 1..=36,
            Constellation::BeiDou => 1..=63,
            Constellation::Qzss => 1..=10,
        }
    }

    /// RINEX-style single letter.
    pub fn letter(self) -> char {
        match self {
            Constellation::Gps => 'G',
            Constellation::Glonass => 'R',
            Constellation::Galileo => 'E',
            Constellation::BeiDou => 'C',
            Constellation::Qzss => 'J',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.letter() == c)
    }

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Gps => "GPS",
            Constellation::Glonass => "GLONASS",
            Constellation::Galileo => "Galileo",
            Constellation::BeiDou => "BeiDou",
            Constellation::Qzss => "QZSS",
        }
    }

    /// u-blox `gnssId`. SBAS (1), IMES (4) and NavIC (7) have no mapping.
    pub fn from_ubx_gnss_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Constellation::Gps),
            2 => Some(Constellation::Galileo),
            3 => Some(Constellation::BeiDou),
            5 => Some(Constellation::Qzss),
            6 => Some(Constellation::Glonass),
            _ => None,
        }
    }

    pub fn ubx_gnss_id(self) -> u8 {
        match self {
            Constellation::Gps => 0,
            Constellation::Galileo => 2,
            Constellation::BeiDou => 3,
            Constellation::Qzss => 5,
            Constellation::Glonass => 6,
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(c) = Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(t))
        {
            return Ok(c);
        }
        let mut chars = t.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Self::from_letter(c.to_ascii_uppercase())
                .ok_or_else(|| Error::InvalidSatellite(s.to_string())),
            _ => Err(Error::InvalidSatellite(s.to_string())),
        }
    }
}

/// Satellite identity: constellation plus PRN (or GLONASS slot).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SatelliteId {
    constellation: Constellation,
    prn: u8,
}

impl SatelliteId {
    pub fn new(constellation: Constellation, prn: u8) -> Result<Self> {
        if !constellation.prn_range().contains(&prn) {
            return Err(Error::InvalidSatellite(format!(
                "{constellation} PRN {prn} outside {:?}",
                constellation.prn_range()
            )));
        }
        Ok(SatelliteId { constellation, prn })
    }

    pub fn constellation(&self) -> Constellation {
        self.constellation
    }

    pub fn prn(&self) -> u8 {
        self.prn
    }
}

impl fmt::Display for SatelliteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}", self.constellation.letter(), self.prn)
    }
}

impl FromStr for SatelliteId {
    type Err = Error;

    /// Accepts `G27`, `R5`, `E011`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let mut chars = t.chars();
        let letter = chars
            .next()
            .ok_or_else(|| Error::InvalidSatellite(s.to_string()))?;
        let constellation = Constellation::from_letter(letter.to_ascii_uppercase())
            .ok_or_else(|| Error::InvalidSatellite(s.to_string()))?;
        let prn: u8 = chars
            .as_str()
            .parse()
            .map_err(|_| Error::InvalidSatellite(s.to_string()))?;
        SatelliteId::new(constellation, prn)
    }
}

impl Serialize for SatelliteId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SatelliteId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The two tracked carriers of a constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Primary,
    Secondary,
}

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::Primary => "primary",
            Band::Secondary => "secondary",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One carrier-phase measurement of one satellite on one band.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierPhaseObs {
    /// GPS seconds (week * 604800 + time of week).
    pub epoch: f64,
    pub sat: SatelliteId,
    pub band: Band,
    pub carrier_hz: f64,
    /// Accumulated carrier phase in cycles.
    pub carrier_phase: f64,
    pub pseudorange: f64,
    /// Milliseconds since the last loss of lock.
    pub lock_time_ms: u32,
    pub half_cycle_ambiguous: bool,
    pub cn0: f64,
}

/// Satellite position on the local sky.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatGeometry {
    pub epoch: f64,
    pub sat: SatelliteId,
    /// Degrees in [-90, 90].
    pub elevation: f64,
    /// Degrees in [0, 360).
    pub azimuth: f64,
}

impl SatGeometry {
    pub fn new(epoch: f64, sat: SatelliteId, elevation: f64, azimuth: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&elevation) {
            return Err(Error::Domain(format!("elevation {elevation} outside [-90, 90]")));
        }
        if !azimuth.is_finite() {
            return Err(Error::Domain(format!("azimuth {azimuth} not finite")));
        }
        Ok(SatGeometry {
            epoch,
            sat,
            elevation,
            azimuth: normalize_azimuth(azimuth),
        })
    }
}

/// Wraps an azimuth into [0, 360).
pub fn normalize_azimuth(az: f64) -> f64 {
    let a = az.rem_euclid(360.0);
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}
