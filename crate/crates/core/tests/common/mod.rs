#![allow(dead_code)]

use skykey_core::ubx::encode::{encode_navsat, encode_rawx, gps_l1_measurement};
use skykey_core::ubx::{NavSatEntry, RawxEpoch, RawxMeasurement};

pub const WEEK: u16 = 2100;
pub const TOW0: f64 = 345_600.0;

/// Per-epoch edits applied while building a stream.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpochEdit {
    pub skip: bool,
    pub drop_secondary: bool,
    pub reset_lock: bool,
}

pub fn gps_l2_measurement(prn: u8, cp_mes: f64, pr_mes: f64, locktime: u16) -> RawxMeasurement {
    RawxMeasurement {
        sig_id: 3,
        ..gps_l1_measurement(prn, cp_mes, pr_mes, locktime)
    }
}

/// `n` epochs at 20 Hz of dual-band GPS phase for `prn`, with a role
/// specific wobble so the geometry-free series is not constant.
pub fn dual_band_stream(prn: u8, n: usize, role_phase: f64, edit: impl Fn(usize) -> EpochEdit) -> Vec<u8> {
    let mut out = Vec::new();
    let mut lock_origin = 0usize;
    for i in 0..n {
        let e = edit(i);
        if e.reset_lock {
            lock_origin = i;
        }
        if e.skip {
            continue;
        }
        let t = i as f64 / 20.0;
        let lock = ((i - lock_origin) * 50).min(64_500) as u16;
        let l1 = 1.0e7 + 5.0 * t + (0.37 * t + role_phase).sin();
        let l2 = 0.8e7 + 3.9 * t + 0.5 * (0.11 * t + 2.0 * role_phase).cos();
        let mut meas = vec![gps_l1_measurement(prn, l1, 2.2e7 + t, lock)];
        if !e.drop_secondary {
            meas.push(gps_l2_measurement(prn, l2, 2.2e7 + t, lock));
        }
        let header = RawxEpoch {
            rcv_tow: TOW0 + t,
            week: WEEK,
            leap_s: 18,
            num_meas: meas.len() as u8,
            rec_stat: 1,
            version: 1,
        };
        out.extend(encode_rawx(&header, &meas));
        if i % 20 == 0 {
            let itow = ((TOW0 + t) * 1000.0).round() as u32;
            let entry = NavSatEntry {
                gnss_id: 0,
                sv_id: prn,
                cno: 40,
                elev: 30,
                azim: 120,
                pr_res: 0,
                flags: 0,
            };
            out.extend(encode_navsat(itow, 1, &[entry]));
        }
    }
    out
}

/// A short clean stream mixing RAWX and NAV-SAT frames.
pub fn fixture_stream() -> Vec<u8> {
    dual_band_stream(27, 40, 0.3, |_| EpochEdit::default())
}
