//! Geometry-free carrier-phase combination and cycle-slip flagging.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ubx::{epoch_key, Band, CarrierPhaseObs, ObservationStore, Role, SatelliteId};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Nominal receiver output rate.
pub const DEFAULT_SAMPLE_RATE: f64 = 20.0;

/// Epoch gaps longer than this many nominal intervals count as a slip.
pub const SLIP_GAP_FACTOR: f64 = 1.5;

/// `λ1·φ1 − λ2·φ2` in meters for phases in cycles and frequencies in Hz.
pub fn geometry_free(phase1: f64, phase2: f64, f1: f64, f2: f64) -> Result<f64> {
    if !(f1 > 0.0 && f2 > 0.0) {
        return Err(Error::InvalidCombination(format!(
            "frequencies must be positive (got {f1}, {f2})"
        )));
    }
    if f1 == f2 {
        return Err(Error::InvalidCombination(format!(
            "identical frequencies {f1} Hz cancel the combination"
        )));
    }
    Ok(SPEED_OF_LIGHT / f1 * phase1 - SPEED_OF_LIGHT / f2 * phase2)
}

/// Flags epochs (as millisecond keys) where phase continuity is broken:
/// lock time went down, the half-cycle state changed, or the gap to the
/// previous epoch exceeds [`SLIP_GAP_FACTOR`] nominal intervals.
pub fn detect_cycle_slips<'a, I>(obs: I, sample_rate: f64) -> BTreeSet<i64>
where
    I: IntoIterator<Item = &'a CarrierPhaseObs>,
{
    let max_gap = SLIP_GAP_FACTOR / sample_rate;
    let mut slips = BTreeSet::new();
    let mut prev: Option<&CarrierPhaseObs> = None;
    for o in obs {
        if let Some(p) = prev {
            if o.lock_time_ms < p.lock_time_ms
                || o.half_cycle_ambiguous != p.half_cycle_ambiguous
                || o.epoch - p.epoch > max_gap
            {
                slips.insert(epoch_key(o.epoch));
            }
        }
        prev = Some(o);
    }
    slips
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfSample {
    pub epoch: f64,
    /// Meters; meaningless when `valid` is false.
    pub value: f64,
    /// Both bands present and no slip at this epoch.
    pub valid: bool,
}

/// Geometry-free time series of one satellite seen by one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct GfSeries {
    pub sat: SatelliteId,
    pub role: Role,
    pub sample_rate: f64,
    samples: Vec<GfSample>,
    /// Millisecond epoch keys flagged as cycle slips on either band.
    slip_epochs: BTreeSet<i64>,
}

impl GfSeries {
    /// Validates that epochs are strictly increasing.
    pub fn new(
        sat: SatelliteId,
        role: Role,
        sample_rate: f64,
        samples: Vec<GfSample>,
        slip_epochs: BTreeSet<i64>,
    ) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::Parameter(format!("sample rate {sample_rate} must be positive")));
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].epoch <= w[0].epoch) {
            return Err(Error::Parameter(format!(
                "series {sat}/{role}: epoch {} does not follow {}",
                w[1].epoch, w[0].epoch
            )));
        }
        Ok(GfSeries {
            sat,
            role,
            sample_rate,
            samples,
            slip_epochs,
        })
    }

    pub fn samples(&self) -> &[GfSample] {
        &self.samples
    }

    pub fn slip_epochs(&self) -> &BTreeSet<i64> {
        &self.slip_epochs
    }

    pub fn is_slip(&self, epoch: f64) -> bool {
        self.slip_epochs.contains(&epoch_key(epoch))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same series under a different role label.
    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }
}

/// Combines both bands of `sat` into a geometry-free series.
pub fn build_gf_series(store: &ObservationStore, sat: SatelliteId, sample_rate: f64) -> Result<GfSeries> {
    let primary = store.observations_for(sat, Band::Primary);
    let secondary = store.observations_for(sat, Band::Secondary);
    if primary.is_empty() && secondary.is_empty() {
        return Err(Error::SatelliteNotFound(sat.to_string()));
    }

    let mut slips = detect_cycle_slips(primary.iter().copied(), sample_rate);
    slips.extend(detect_cycle_slips(secondary.iter().copied(), sample_rate));

    let mut by_epoch: BTreeMap<i64, (Option<&CarrierPhaseObs>, Option<&CarrierPhaseObs>)> =
        BTreeMap::new();
    for o in primary {
        by_epoch.entry(epoch_key(o.epoch)).or_default().0 = Some(o);
    }
    for o in secondary {
        by_epoch.entry(epoch_key(o.epoch)).or_default().1 = Some(o);
    }

    let mut samples = Vec::with_capacity(by_epoch.len());
    for (key, pair) in by_epoch {
        let sample = match pair {
            (Some(p1), Some(p2)) => GfSample {
                epoch: p1.epoch,
                value: geometry_free(p1.carrier_phase, p2.carrier_phase, p1.carrier_hz, p2.carrier_hz)?,
                valid: !slips.contains(&key),
            },
            (Some(o), None) | (None, Some(o)) => GfSample {
                epoch: o.epoch,
                value: f64::NAN,
                valid: false,
            },
            (None, None) => unreachable!(),
        };
        samples.push(sample);
    }
    GfSeries::new(sat, store.role(), sample_rate, samples, slips)
}

pub fn write_gf_csv<'a, W, I>(series: I, out: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a GfSeries>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["role", "constellation", "prn", "epoch", "gf_m", "valid", "slip"])?;
    for s in series {
        for x in s.samples() {
            w.write_record([
                s.role.name().to_string(),
                s.sat.constellation().name().to_string(),
                s.sat.prn().to_string(),
                format!("{:.3}", x.epoch),
                if x.value.is_nan() { String::new() } else { x.value.to_string() },
                (x.valid as u8).to_string(),
                (s.is_slip(x.epoch) as u8).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<gf csv>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct GfRow {
    role: String,
    constellation: String,
    prn: u8,
    epoch: f64,
    gf_m: Option<f64>,
    valid: u8,
    #[serde(default)]
    slip: u8,
}

/// Reads series written by [`write_gf_csv`]. The `slip` column is
/// optional.
pub fn read_gf_csv<R: Read>(input: R, sample_rate: f64) -> Result<Vec<GfSeries>> {
    let mut r = csv::Reader::from_reader(input);
    let mut groups: BTreeMap<(Role, SatelliteId), (Vec<GfSample>, BTreeSet<i64>)> = BTreeMap::new();
    for row in r.deserialize() {
        let row: GfRow = row?;
        let role: Role = row.role.parse()?;
        let sat = SatelliteId::new(row.constellation.parse()?, row.prn)?;
        let value = row.gf_m.unwrap_or(f64::NAN);
        let entry = groups.entry((role, sat)).or_default();
        entry.0.push(GfSample {
            epoch: row.epoch,
            value,
            valid: row.valid != 0 && value.is_finite(),
        });
        if row.slip != 0 {
            entry.1.insert(epoch_key(row.epoch));
        }
    }
    groups
        .into_iter()
        .map(|((role, sat), (mut samples, slips))| {
            samples.sort_by(|a, b| a.epoch.total_cmp(&b.epoch));
            GfSeries::new(sat, role, sample_rate, samples, slips)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const F1: f64 = 1_575_420_000.0;
    const F2: f64 = 1_227_600_000.0;

    fn obs(epoch: f64, band: Band, phase: f64, lock: u32) -> CarrierPhaseObs {
        CarrierPhaseObs {
            epoch,
            sat: "G27".parse().unwrap(),
            band,
            carrier_hz: if band == Band::Primary { F1 } else { F2 },
            carrier_phase: phase,
            pseudorange: 2.0e7,
            lock_time_ms: lock,
            half_cycle_ambiguous: false,
            cn0: 40.0,
        }
    }

    #[test]
    fn zero_phases() {
        assert_eq!(geometry_free(0.0, 0.0, F1, F2).unwrap(), 0.0);
    }

    #[test]
    fn one_cycle_on_l1() {
        // 299792458 / 1575420000, long division by hand
        let expected = 0.190_293_672_798_364_88;
        assert!((geometry_free(1.0, 0.0, F1, F2).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn doubled_frequency_identity() {
        let f = 1.0e9;
        let v = geometry_free(1.0, 1.0, f, 2.0 * f).unwrap();
        assert!((v - SPEED_OF_LIGHT / (2.0 * f)).abs() < 1e-15);
    }

    #[test]
    fn equal_frequencies_rejected() {
        assert!(geometry_free(1.0, 1.0, F1, F1).is_err());
        assert!(geometry_free(1.0, 1.0, 0.0, F1).is_err());
    }

    #[test]
    fn slip_rules() {
        let contiguous: Vec<_> = (0..5)
            .map(|i| obs(i as f64 * 0.05, Band::Primary, 0.0, 100 + 50 * i))
            .collect();
        assert!(detect_cycle_slips(&contiguous, 20.0).is_empty());

        let reset = [
            obs(0.0, Band::Primary, 0.0, 500),
            obs(0.05, Band::Primary, 0.0, 550),
            obs(0.10, Band::Primary, 0.0, 20),
        ];
        assert_eq!(
            detect_cycle_slips(&reset, 20.0).into_iter().collect::<Vec<_>>(),
            vec![100]
        );

        let gap = [
            obs(0.0, Band::Primary, 0.0, 500),
            obs(0.05, Band::Primary, 0.0, 550),
            obs(0.20, Band::Primary, 0.0, 700),
        ];
        assert_eq!(
            detect_cycle_slips(&gap, 20.0).into_iter().collect::<Vec<_>>(),
            vec![200]
        );

        let mut half = reset.clone();
        half[2].lock_time_ms = 600;
        half[1].half_cycle_ambiguous = true;
        assert_eq!(detect_cycle_slips(&half, 20.0).len(), 2);
        assert!(detect_cycle_slips(&[], 20.0).is_empty());
    }

    fn store_with(observations: Vec<CarrierPhaseObs>) -> ObservationStore {
        let mut s = ObservationStore::new(Role::Alice);
        for o in observations {
            s.insert(o);
        }
        s
    }

    #[test]
    fn series_from_both_bands() {
        let mut v = Vec::new();
        for i in 0..3 {
            let t = i as f64 * 0.05;
            v.push(obs(t, Band::Primary, 10.0 * i as f64, 100 + i));
            v.push(obs(t, Band::Secondary, 7.0 * i as f64, 100 + i));
        }
        let sat = "G27".parse().unwrap();
        let s = build_gf_series(&store_with(v.clone()), sat, 20.0).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.samples().iter().all(|x| x.valid));

        // band 2 missing at t = 0.05
        v.retain(|o| !(o.band == Band::Secondary && (o.epoch - 0.05).abs() < 1e-9));
        let s = build_gf_series(&store_with(v.clone()), sat, 20.0).unwrap();
        assert!(!s.samples()[1].valid);
        assert!(s.samples()[0].valid);

        // lock reset on band 1 at t = 0.10
        let mut w = v.clone();
        for o in w.iter_mut() {
            if o.band == Band::Primary && o.epoch > 0.09 {
                o.lock_time_ms = 1;
            }
        }
        let s = build_gf_series(&store_with(w), sat, 20.0).unwrap();
        assert!(s.is_slip(0.10));
        assert!(!s.samples()[2].valid);

        assert!(matches!(
            build_gf_series(&store_with(v), "E01".parse().unwrap(), 20.0),
            Err(Error::SatelliteNotFound(_))
        ));
    }

    #[test]
    fn gf_csv_roundtrip_preserves_values() {
        let sat: SatelliteId = "E11".parse().unwrap();
        let samples = vec![
            GfSample { epoch: 1.0, value: 0.25, valid: true },
            GfSample { epoch: 1.05, value: f64::NAN, valid: false },
        ];
        let s = GfSeries::new(sat, Role::Bob, 20.0, samples, BTreeSet::from([epoch_key(1.05)])).unwrap();
        let mut buf = Vec::new();
        write_gf_csv([&s], &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("role,constellation,prn,epoch,gf_m,valid,slip\n"));
        let back = read_gf_csv(&buf[..], 20.0).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].samples()[0].value, 0.25);
        assert!(!back[0].samples()[1].valid);
        assert!(back[0].is_slip(1.05) && !back[0].is_slip(1.0));

        let legacy = "role,constellation,prn,epoch,gf_m,valid\nalice,GPS,3,10.000,1.5,1\n";
        let back = read_gf_csv(legacy.as_bytes(), 20.0).unwrap();
        assert_eq!(back[0].role, Role::Alice);
        assert!(back[0].slip_epochs().is_empty());
    }

    proptest! {
        #[test]
        fn linearity(p1 in -1e6f64..1e6, p2 in -1e6f64..1e6, a in -100f64..100.0) {
            let lhs = geometry_free(a * p1, a * p2, F1, F2).unwrap();
            let rhs = a * geometry_free(p1, p2, F1, F2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn antisymmetry(p1 in -1e6f64..1e6, p2 in -1e6f64..1e6) {
            let a = geometry_free(p1, p2, F1, F2).unwrap();
            let b = geometry_free(p2, p1, F2, F1).unwrap();
            prop_assert_eq!(a, -b);
        }

        #[test]
        fn integer_ambiguity_shifts_level(n in -1000i32..1000, phases in proptest::collection::vec(-1e4f64..1e4, 5)) {
            let shift = n as f64 * SPEED_OF_LIGHT / F1;
            for &p in &phases {
                let base = geometry_free(p, 0.5 * p, F1, F2).unwrap();
                let moved = geometry_free(p + n as f64, 0.5 * p, F1, F2).unwrap();
                prop_assert!((moved - base - shift).abs() < 1e-6);
            }
        }
    }
}
