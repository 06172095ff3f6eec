use super::{normalize_azimuth, Constellation, SatGeometry, SatelliteId, UbxFrame};
use crate::error::{Error, Result};

/// NAV-SAT class / id.
pub const NAV_SAT: (u8, u8) = (0x01, 0x35);

pub(crate) const NAVSAT_HEADER_LEN: usize = 8;
pub(crate) const NAVSAT_ENTRY_LEN: usize = 12;

/// One NAV-SAT satellite block, field for field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NavSatEntry {
    pub gnss_id: u8,
    pub sv_id: u8,
    pub cno: u8,
    /// Degrees; values outside [-90, 90] mean "unknown".
    pub elev: i8,
    /// Degrees.
    pub azim: i16,
    /// 0.1 m units.
    pub pr_res: i16,
    pub flags: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavSatDecode {
    pub itow_ms: u32,
    pub version: u8,
    /// Epochs are time-of-week seconds; the ingest stage lifts them onto
    /// continuous GPS time.
    pub geometry: Vec<SatGeometry>,
    pub skipped_unknown_elevation: usize,
    pub skipped_unsupported: usize,
}

pub fn parse_navsat_payload(
    payload: &[u8],
    offset: usize,
) -> Result<(u32, u8, Vec<NavSatEntry>)> {
    if payload.len() < NAVSAT_HEADER_LEN {
        return Err(Error::Decode {
            offset,
            reason: format!("NAV-SAT payload of {} bytes is shorter than its header", payload.len()),
        });
    }
    let itow = u32::from_le_bytes(payload[0..4].try_into().unwrap());
    let version = payload[4];
    let num_svs = payload[5] as usize;
    let expected = NAVSAT_HEADER_LEN + NAVSAT_ENTRY_LEN * num_svs;
    if payload.len() != expected {
        return Err(Error::Decode {
            offset,
            reason: format!(
                "NAV-SAT declares {num_svs} satellites ({expected} bytes) but payload has {} bytes",
                payload.len()
            ),
        });
    }
    let entries = payload[NAVSAT_HEADER_LEN..]
        .chunks_exact(NAVSAT_ENTRY_LEN)
        .map(|e| NavSatEntry {
            gnss_id: e[0],
            sv_id: e[1],
            cno: e[2],
            elev: e[3] as i8,
            azim: i16::from_le_bytes([e[4], e[5]]),
            pr_res: i16::from_le_bytes([e[6], e[7]]),
            flags: u32::from_le_bytes(e[8..12].try_into().unwrap()),
        })
        .collect();
    Ok((itow, version, entries))
}

/// Decodes a NAV-SAT frame into per-satellite elevation/azimuth.
pub fn decode_navsat(frame: &UbxFrame) -> Result<NavSatDecode> {
    if !frame.is(NAV_SAT) || !frame.checksum_valid {
        return Err(Error::WrongMessage {
            expected: "a checksum-valid NAV-SAT frame",
        });
    }
    let (itow_ms, version, entries) = parse_navsat_payload(&frame.payload, frame.offset)?;
    let tow = itow_ms as f64 / 1000.0;
    let mut out = NavSatDecode {
        itow_ms,
        version,
        geometry: Vec::with_capacity(entries.len()),
        skipped_unknown_elevation: 0,
        skipped_unsupported: 0,
    };
    for e in entries {
        let sat = Constellation::from_ubx_gnss_id(e.gnss_id)
            .and_then(|c| SatelliteId::new(c, e.sv_id).ok());
        let Some(sat) = sat else {
            out.skipped_unsupported += 1;
            continue;
        };
        if !(-90..=90).contains(&e.elev) {
            out.skipped_unknown_elevation += 1;
            continue;
        }
        out.geometry.push(SatGeometry {
            epoch: tow,
            sat,
            elevation: e.elev as f64,
            azimuth: normalize_azimuth(e.azim as f64),
        });
    }
    Ok(out)
}
