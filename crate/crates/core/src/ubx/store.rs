use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    decode_navsat, decode_rawx, epoch_key, parse_ubx_stream, Band, CarrierPhaseObs, SatGeometry,
    SatelliteId, NAV_SAT, RXM_RAWX, SECONDS_PER_WEEK,
};
use crate::error::{Error, Result};

/// Receiver role in the three-party setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Alice,
    Bob,
    Eve,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Alice, Role::Bob, Role::Eve];

    pub fn name(self) -> &'static str {
        match self {
            Role::Alice => "alice",
            Role::Bob => "bob",
            Role::Eve => "eve",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alice" | "a" => Ok(Role::Alice),
            "bob" | "b" => Ok(Role::Bob),
            "eve" | "e" => Ok(Role::Eve),
            _ => Err(Error::Parse(format!("unknown role {s:?}"))),
        }
    }
}

type ObsKey = (SatelliteId, Band, i64);

/// All observations and geometry recorded by one receiver.
#[derive(Debug, Clone)]
pub struct ObservationStore {
    role: Role,
    observations: BTreeMap<ObsKey, CarrierPhaseObs>,
    geometry: Vec<SatGeometry>,
}

impl ObservationStore {
    pub fn new(role: Role) -> Self {
        ObservationStore {
            role,
            observations: BTreeMap::new(),
            geometry: Vec::new(),
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Inserts an observation; returns `false` (and keeps the first) when
    /// the (epoch, sat, band) key already exists.
    pub fn insert(&mut self, obs: CarrierPhaseObs) -> bool {
        let key = (obs.sat, obs.band, epoch_key(obs.epoch));
        if self.observations.contains_key(&key) {
            return false;
        }
        self.observations.insert(key, obs);
        true
    }

    pub fn push_geometry(&mut self, g: SatGeometry) {
        let pos = self.geometry.partition_point(|h| h.epoch <= g.epoch);
        self.geometry.insert(pos, g);
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty() && self.geometry.is_empty()
    }

    pub fn observations(&self) -> impl Iterator<Item = &CarrierPhaseObs> {
        self.observations.values()
    }

    /// Epoch-sorted observations of one satellite on one band.
    pub fn observations_for(&self, sat: SatelliteId, band: Band) -> Vec<&CarrierPhaseObs> {
        self.observations
            .range((sat, band, i64::MIN)..=(sat, band, i64::MAX))
            .map(|(_, o)| o)
            .collect()
    }

    pub fn satellites(&self) -> Vec<SatelliteId> {
        self.observations
            .keys()
            .map(|k| k.0)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Number of distinct observation epochs.
    pub fn epoch_count(&self) -> usize {
        self.observations
            .keys()
            .map(|k| k.2)
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn geometry(&self) -> &[SatGeometry] {
        &self.geometry
    }

    pub fn geometry_for(&self, sat: SatelliteId) -> Vec<SatGeometry> {
        self.geometry.iter().filter(|g| g.sat == sat).copied().collect()
    }
}

/// Frame and record counters from one ingest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub frames_seen: usize,
    pub frames_valid: usize,
    pub frames_dropped: usize,
    pub truncated: usize,
    pub rawx_frames: usize,
    pub navsat_frames: usize,
    pub other_frames: usize,
    pub decode_errors: usize,
    pub observations: usize,
    pub duplicates: usize,
    pub unsupported_signals: usize,
    pub invalid_phase: usize,
    pub unknown_elevation: usize,
    pub geometry_records: usize,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "frames seen {} / valid {} / dropped {} (truncated {}), rawx {}, nav-sat {}, \
             observations {}, geometry {}",
            self.frames_seen,
            self.frames_valid,
            self.frames_dropped,
            self.truncated,
            self.rawx_frames,
            self.navsat_frames,
            self.observations,
            self.geometry_records
        )
    }
}

/// Builds a store from an in-memory UBX stream.
pub fn ingest_bytes(bytes: &[u8], role: Role, source: &str) -> Result<(ObservationStore, IngestSummary)> {
    let parsed = parse_ubx_stream(bytes);
    let mut summary = IngestSummary {
        frames_seen: parsed.frames.len(),
        truncated: parsed.truncated,
        ..Default::default()
    };
    let mut store = ObservationStore::new(role);
    // NAV-SAT only carries time of week; the week comes from RAWX.
    let mut last_rawx: Option<(u16, f64)> = None;
    let mut pending_navsat = Vec::new();

    for frame in &parsed.frames {
        if !frame.checksum_valid {
            summary.frames_dropped += 1;
            continue;
        }
        summary.frames_valid += 1;
        if frame.is(RXM_RAWX) {
            match decode_rawx(frame) {
                Ok(d) => {
                    summary.rawx_frames += 1;
                    summary.unsupported_signals += d.skipped_unsupported;
                    summary.invalid_phase += d.skipped_invalid_phase;
                    last_rawx = Some((d.epoch.week, d.epoch.rcv_tow));
                    for obs in d.observations {
                        if store.insert(obs) {
                            summary.observations += 1;
                        } else {
                            summary.duplicates += 1;
                        }
                    }
                }
                Err(_) => summary.decode_errors += 1,
            }
        } else if frame.is(NAV_SAT) {
            match decode_navsat(frame) {
                Ok(d) => {
                    summary.navsat_frames += 1;
                    summary.unknown_elevation += d.skipped_unknown_elevation;
                    summary.unsupported_signals += d.skipped_unsupported;
                    pending_navsat.push((last_rawx, d.geometry));
                }
                Err(_) => summary.decode_errors += 1,
            }
        } else {
            summary.other_frames += 1;
        }
    }

    let first_rawx = store
        .observations()
        .map(|o| o.epoch)
        .fold(f64::INFINITY, f64::min);
    for (context, geometry) in pending_navsat {
        let (week, ref_tow) = match context {
            Some(c) => (c.0 as f64, c.1),
            None if first_rawx.is_finite() => {
                let w = (first_rawx / SECONDS_PER_WEEK).floor();
                (w, first_rawx - w * SECONDS_PER_WEEK)
            }
            None => (0.0, 0.0),
        };
        for mut g in geometry {
            let mut w = week;
            if g.epoch + SECONDS_PER_WEEK / 2.0 < ref_tow {
                w += 1.0;
            } else if g.epoch > ref_tow + SECONDS_PER_WEEK / 2.0 {
                w -= 1.0;
            }
            g.epoch += w * SECONDS_PER_WEEK;
            store.push_geometry(g);
            summary.geometry_records += 1;
        }
    }

    if store.is_empty() {
        return Err(Error::NoUsableData(source.to_string()));
    }
    Ok((store, summary))
}

/// Reads a file of concatenated UBX frames.
pub fn ingest_file(path: impl AsRef<Path>, role: Role) -> Result<(ObservationStore, IngestSummary)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ingest_bytes(&bytes, role, &path.display().to_string())
}

pub fn write_observations_csv<W: Write>(store: &ObservationStore, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "role",
        "epoch",
        "constellation",
        "prn",
        "band",
        "carrier_phase_cycles",
        "pseudorange_m",
        "lock_time_ms",
        "cn0_dbhz",
    ])?;
    let mut rows: Vec<&CarrierPhaseObs> = store.observations().collect();
    rows.sort_by(|a, b| {
        epoch_key(a.epoch)
            .cmp(&epoch_key(b.epoch))
            .then(a.sat.cmp(&b.sat))
            .then(a.band.cmp(&b.band))
    });
    for o in rows {
        w.write_record([
            store.role().name().to_string(),
            format!("{:.3}", o.epoch),
            o.sat.constellation().name().to_string(),
            o.sat.prn().to_string(),
            o.band.name().to_string(),
            o.carrier_phase.to_string(),
            o.pseudorange.to_string(),
            o.lock_time_ms.to_string(),
            o.cn0.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<observations csv>", e))?;
    Ok(())
}

pub fn write_geometry_csv<W: Write>(
    role: Role,
    geometry: &[SatGeometry],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "role",
        "epoch",
        "constellation",
        "prn",
        "elevation_deg",
        "azimuth_deg",
    ])?;
    for g in geometry {
        w.write_record([
            role.name().to_string(),
            format!("{:.3}", g.epoch),
            g.sat.constellation().name().to_string(),
            g.sat.prn().to_string(),
            g.elevation.to_string(),
            g.azimuth.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<geometry csv>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct GeometryRow {
    role: String,
    epoch: f64,
    constellation: String,
    prn: u8,
    elevation_deg: f64,
    azimuth_deg: f64,
}

/// Reads records written by [`write_geometry_csv`], sorted by epoch.
pub fn read_geometry_csv<R: Read>(input: R) -> Result<Vec<(Role, SatGeometry)>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: GeometryRow = row?;
        let sat = SatelliteId::new(row.constellation.parse()?, row.prn)?;
        let g = SatGeometry::new(row.epoch, sat, row.elevation_deg, row.azimuth_deg)?;
        out.push((row.role.parse()?, g));
    }
    out.sort_by(|a, b| a.1.epoch.total_cmp(&b.1.epoch));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ubx::encode::{encode_navsat, encode_rawx, gps_l1_measurement};
    use crate::ubx::{NavSatEntry, RawxEpoch};

    fn rawx_frame(tow: f64, lock: u16) -> Vec<u8> {
        let mut l2 = gps_l1_measurement(27, 900.0, 2.0e7, lock);
        l2.sig_id = 3;
        encode_rawx(
            &RawxEpoch {
                rcv_tow: tow,
                week: 2100,
                leap_s: 18,
                num_meas: 2,
                rec_stat: 0,
                version: 1,
            },
            &[gps_l1_measurement(27, 1000.0, 2.0e7, lock), l2],
        )
    }

    #[test]
    fn three_valid_frames_three_epochs() {
        let mut bytes = Vec::new();
        for i in 0..3 {
            bytes.extend(rawx_frame(100.0 + 0.05 * i as f64, 100 + 50 * i as u16));
        }
        let (store, summary) = ingest_bytes(&bytes, Role::Alice, "mem").unwrap();
        assert_eq!(store.epoch_count(), 3);
        assert_eq!(store.len(), 6);
        assert_eq!(summary.frames_valid, 3);
        assert_eq!(summary.frames_dropped, 0);
    }

    #[test]
    fn corrupt_frame_dropped() {
        let mut bytes = Vec::new();
        let mut bad = rawx_frame(100.0, 100);
        bad[20] ^= 0x10;
        bytes.extend(bad);
        bytes.extend(rawx_frame(100.05, 150));
        bytes.extend(rawx_frame(100.10, 200));
        let (store, summary) = ingest_bytes(&bytes, Role::Bob, "mem").unwrap();
        assert_eq!(store.epoch_count(), 2);
        assert_eq!(summary.frames_dropped, 1);
    }

    #[test]
    fn empty_input_is_no_usable_data() {
        assert!(matches!(
            ingest_bytes(&[], Role::Eve, "mem"),
            Err(Error::NoUsableData(_))
        ));
    }

    #[test]
    fn duplicates_are_rejected() {
        let mut bytes = rawx_frame(100.0, 100);
        bytes.extend(rawx_frame(100.0, 100));
        let (store, summary) = ingest_bytes(&bytes, Role::Alice, "mem").unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(summary.duplicates, 2);
    }

    #[test]
    fn navsat_epochs_lifted_to_gps_time() {
        let mut bytes = rawx_frame(100.0, 100);
        bytes.extend(encode_navsat(
            100_000,
            1,
            &[NavSatEntry {
                gnss_id: 0,
                sv_id: 27,
                cno: 40,
                elev: 30,
                azim: 200,
                pr_res: 0,
                flags: 0,
            }],
        ));
        let (store, _) = ingest_bytes(&bytes, Role::Alice, "mem").unwrap();
        let g = store.geometry_for("G27".parse().unwrap());
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].epoch, 2100.0 * SECONDS_PER_WEEK + 100.0);
    }

    #[test]
    fn csv_export_header() {
        let (store, _) = ingest_bytes(&rawx_frame(1.0, 5), Role::Alice, "mem").unwrap();
        let mut buf = Vec::new();
        write_observations_csv(&store, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "role,epoch,constellation,prn,band,carrier_phase_cycles,pseudorange_m,lock_time_ms,cn0_dbhz"
        );
        assert!(lines.next().unwrap().starts_with("alice,"));
    }

    #[test]
    fn geometry_csv_roundtrip() {
        let sat: SatelliteId = "R07".parse().unwrap();
        let g = vec![SatGeometry::new(10.0, sat, 12.5, 300.0).unwrap(), SatGeometry::new(11.0, sat, 13.0, 301.0).unwrap()];
        let mut buf = Vec::new();
        write_geometry_csv(Role::Eve, &g, &mut buf).unwrap();
        let back = read_geometry_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1], (Role::Eve, g[1]));
    }
}
