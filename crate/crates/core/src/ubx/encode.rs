//! Minimal UBX encoder for building test fixtures. Not part of the
//! supported interface.

use super::navsat::{NavSatEntry, NAVSAT_ENTRY_LEN, NAVSAT_HEADER_LEN, NAV_SAT};
use super::rawx::{RawxEpoch, RawxMeasurement, RAWX_HEADER_LEN, RAWX_MEAS_LEN, RXM_RAWX};
use super::{fletcher_checksum, SYNC};

pub fn encode_frame(class: u8, id: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 8);
    out.extend_from_slice(&SYNC);
    out.push(class);
    out.push(id);
    out.extend_from_slice(&(payload.len() as u16).to_le_bytes());
    out.extend_from_slice(payload);
    let (a, b) = fletcher_checksum(&out[2..]);
    out.push(a);
    out.push(b);
    out
}

/// Encodes a RAWX frame. `header.num_meas` is written verbatim so callers
/// can build inconsistent frames on purpose.
pub fn encode_rawx(header: &RawxEpoch, meas: &[RawxMeasurement]) -> Vec<u8> {
    let mut p = Vec::with_capacity(RAWX_HEADER_LEN + RAWX_MEAS_LEN * meas.len());
    p.extend_from_slice(&header.rcv_tow.to_le_bytes());
    p.extend_from_slice(&header.week.to_le_bytes());
    p.push(header.leap_s as u8);
    p.push(header.num_meas);
    p.push(header.rec_stat);
    p.push(header.version);
    p.extend_from_slice(&[0, 0]);
    for m in meas {
        p.extend_from_slice(&m.pr_mes.to_le_bytes());
        p.extend_from_slice(&m.cp_mes.to_le_bytes());
        p.extend_from_slice(&m.do_mes.to_le_bytes());
        p.extend_from_slice(&[m.gnss_id, m.sv_id, m.sig_id, m.freq_id]);
        p.extend_from_slice(&m.locktime.to_le_bytes());
        p.extend_from_slice(&[m.cno, m.pr_stdev, m.cp_stdev, m.do_stdev, m.trk_stat, 0]);
    }
    encode_frame(RXM_RAWX.0, RXM_RAWX.1, &p)
}

pub fn encode_navsat(itow_ms: u32, version: u8, entries: &[NavSatEntry]) -> Vec<u8> {
    let mut p = Vec::with_capacity(NAVSAT_HEADER_LEN + NAVSAT_ENTRY_LEN * entries.len());
    p.extend_from_slice(&itow_ms.to_le_bytes());
    p.push(version);
    p.push(entries.len() as u8);
    p.extend_from_slice(&[0, 0]);
    for e in entries {
        p.extend_from_slice(&[e.gnss_id, e.sv_id, e.cno, e.elev as u8]);
        p.extend_from_slice(&e.azim.to_le_bytes());
        p.extend_from_slice(&e.pr_res.to_le_bytes());
        p.extend_from_slice(&e.flags.to_le_bytes());
    }
    encode_frame(NAV_SAT.0, NAV_SAT.1, &p)
}

/// A GPS L1 C/A measurement with pseudorange/phase valid and the half
/// cycle resolved.
pub fn gps_l1_measurement(prn: u8, cp_mes: f64, pr_mes: f64, locktime: u16) -> RawxMeasurement {
    RawxMeasurement {
        pr_mes,
        cp_mes,
        do_mes: 0.0,
        gnss_id: 0,
        sv_id: prn,
        sig_id: 0,
        freq_id: 0,
        locktime,
        cno: 42,
        pr_stdev: 3,
        cp_stdev: 2,
        do_stdev: 4,
        trk_stat: 0x07,
    }
}
