use super::{Band, CarrierPhaseObs, Constellation, SatelliteId, UbxFrame, SECONDS_PER_WEEK};
use crate::error::{Error, Result};

/// RXM-RAWX class / id.
pub const RXM_RAWX: (u8, u8) = (0x02, 0x15);

pub(crate) const RAWX_HEADER_LEN: usize = 16;
pub(crate) const RAWX_MEAS_LEN: usize = 32;

const TRK_CP_VALID: u8 = 0x02;
const TRK_HALF_CYC_VALID: u8 = 0x04;

/// RXM-RAWX epoch header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawxEpoch {
    /// Receiver time of week, seconds.
    pub rcv_tow: f64,
    pub week: u16,
    pub leap_s: i8,
    pub num_meas: u8,
    pub rec_stat: u8,
    pub version: u8,
}

impl RawxEpoch {
    /// Continuous GPS seconds.
    pub fn gps_seconds(&self) -> f64 {
        self.week as f64 * SECONDS_PER_WEEK + self.rcv_tow
    }
}

/// One RXM-RAWX measurement block, field for field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawxMeasurement {
    pub pr_mes: f64,
    pub cp_mes: f64,
    pub do_mes: f32,
    pub gnss_id: u8,
    pub sv_id: u8,
    pub sig_id: u8,
    pub freq_id: u8,
    pub locktime: u16,
    pub cno: u8,
    pub pr_stdev: u8,
    pub cp_stdev: u8,
    pub do_stdev: u8,
    pub trk_stat: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawxDecode {
    pub epoch: RawxEpoch,
    pub observations: Vec<CarrierPhaseObs>,
    /// Measurements from constellations or signals outside the band table.
    pub skipped_unsupported: usize,
    /// Measurements whose carrier phase is flagged invalid by the receiver.
    pub skipped_invalid_phase: usize,
}

/// Maps a u-blox signal identifier onto the primary/secondary band.
pub fn classify_signal(constellation: Constellation, sig_id: u8) -> Option<Band> {
    use Band::*;
    use Constellation::*;
    match (constellation, sig_id) {
        (Gps, 0) => Some(Primary),
        (Gps, 3 | 4) => Some(Secondary),
        (Galileo, 0 | 1) => Some(Primary),
        (Galileo, 5 | 6) => Some(Secondary),
        (BeiDou, 0 | 1) => Some(Primary),
        (BeiDou, 2 | 3) => Some(Secondary),
        (Qzss, 0) => Some(Primary),
        (Qzss, 4 | 5) => Some(Secondary),
        (Glonass, 0) => Some(Primary),
        (Glonass, 2) => Some(Secondary),
        _ => None,
    }
}

/// Carrier frequency in Hz. `glonass_slot` is the FDMA channel k in
/// [-7, 6] and is ignored for CDMA constellations.
pub fn carrier_frequency(constellation: Constellation, band: Band, glonass_slot: i8) -> f64 {
    use Band::*;
    use Constellation::*;
    match (constellation, band) {
        (Gps | Qzss, Primary) => 1575.42e6,
        (Gps | Qzss, Secondary) => 1227.60e6,
        (Galileo, Primary) => 1575.42e6,
        (Galileo, Secondary) => 1207.14e6,
        (BeiDou, Primary) => 1561.098e6,
        (BeiDou, Secondary) => 1207.14e6,
        (Glonass, Primary) => 1602.0e6 + glonass_slot as f64 * 0.5625e6,
        (Glonass, Secondary) => 1246.0e6 + glonass_slot as f64 * 0.4375e6,
    }
}

fn rd_f64(p: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(p[at..at + 8].try_into().unwrap())
}

fn rd_f32(p: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(p[at..at + 4].try_into().unwrap())
}

fn rd_u16(p: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([p[at], p[at + 1]])
}

/// Splits a RAWX payload into its header and raw measurement blocks.
pub fn parse_rawx_payload(
    payload: &[u8],
    offset: usize,
) -> Result<(RawxEpoch, Vec<RawxMeasurement>)> {
    if payload.len() < RAWX_HEADER_LEN {
        return Err(Error::Decode {
            offset,
            reason: format!("RAWX payload of {} bytes is shorter than its header", payload.len()),
        });
    }
    let epoch = RawxEpoch {
        rcv_tow: rd_f64(payload, 0),
        week: rd_u16(payload, 8),
        leap_s: payload[10] as i8,
        num_meas: payload[11],
        rec_stat: payload[12],
        version: payload[13],
    };
    let expected = RAWX_HEADER_LEN + RAWX_MEAS_LEN * epoch.num_meas as usize;
    if payload.len() != expected {
        return Err(Error::Decode {
            offset,
            reason: format!(
                "RAWX declares {} measurements ({} bytes) but payload has {} bytes",
                epoch.num_meas,
                expected,
                payload.len()
            ),
        });
    }
    let meas = payload[RAWX_HEADER_LEN..]
        .chunks_exact(RAWX_MEAS_LEN)
        .map(|m| RawxMeasurement {
            pr_mes: rd_f64(m, 0),
            cp_mes: rd_f64(m, 8),
            do_mes: rd_f32(m, 16),
            gnss_id: m[20],
            sv_id: m[21],
            sig_id: m[22],
            freq_id: m[23],
            locktime: rd_u16(m, 24),
            cno: m[26],
            pr_stdev: m[27],
            cp_stdev: m[28],
            do_stdev: m[29],
            trk_stat: m[30],
        })
        .collect();
    Ok((epoch, meas))
}

/// Decodes an RXM-RAWX frame into carrier-phase observations.
pub fn decode_rawx(frame: &UbxFrame) -> Result<RawxDecode> {
    if !frame.is(RXM_RAWX) || !frame.checksum_valid {
        return Err(Error::WrongMessage {
            expected: "a checksum-valid RXM-RAWX frame",
        });
    }
    let (epoch, meas) = parse_rawx_payload(&frame.payload, frame.offset)?;
    let t = epoch.gps_seconds();
    let mut out = RawxDecode {
        epoch,
        observations: Vec::with_capacity(meas.len()),
        skipped_unsupported: 0,
        skipped_invalid_phase: 0,
    };
    for m in meas {
        let Some(constellation) = Constellation::from_ubx_gnss_id(m.gnss_id) else {
            out.skipped_unsupported += 1;
            continue;
        };
        let (Some(band), Ok(sat)) = (
            classify_signal(constellation, m.sig_id),
            SatelliteId::new(constellation, m.sv_id),
        ) else {
            out.skipped_unsupported += 1;
            continue;
        };
        if m.trk_stat & TRK_CP_VALID == 0 {
            out.skipped_invalid_phase += 1;
            continue;
        }
        let slot = m.freq_id as i8 - 7;
        out.observations.push(CarrierPhaseObs {
            epoch: t,
            sat,
            band,
            carrier_hz: carrier_frequency(constellation, band, slot),
            carrier_phase: m.cp_mes,
            pseudorange: m.pr_mes,
            lock_time_ms: m.locktime as u32,
            half_cycle_ambiguous: m.trk_stat & TRK_HALF_CYC_VALID == 0,
            cn0: m.cno as f64,
        });
    }
    Ok(out)
}
