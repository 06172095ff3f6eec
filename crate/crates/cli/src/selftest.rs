//! Built-in check battery. Each check prints one PASS/FAIL line.

use std::time::Instant;

use clap::Args;

use skykey_core::analysis::{
    availability_table, builtin_filters, criteria_table, Session, DEFAULT_AVAILABILITY, DEFAULT_THRESHOLDS,
};
use skykey_core::infotheory::{
    digamma, evaluate_block_with, secret_key_rate, secure_bit_rate, EvalParams, Ksg, MiEstimate, SkrRecord,
};
use skykey_core::preprocess::{detrend_poly, preprocess_cascade, savgol, CascadeParams};
use skykey_core::segmentation::{segment_satellite, BlockConfig, OmissionReason};
use skykey_core::synth::{gen_gaussian_triple, gen_satellite_like, to_gf_series, GaussianStream, ScenarioSpec};
use skykey_core::ubx::encode::{encode_rawx, gps_l1_measurement};
use skykey_core::ubx::{ingest_bytes, parse_ubx_stream, RawxEpoch, Role};
use skykey_core::observables::build_gf_series;

use crate::error::CliError;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Default, Args)]
pub struct SelftestArgs {
    /// Fewer seeds and instances; every check category still runs.
    #[arg(long)]
    pub quick: bool,
    /// Replace a component with a broken one to prove the checks bite.
    #[arg(long, hide = true, value_parser = ["digamma"])]
    pub inject_fault: Option<String>,
}

fn broken_digamma(x: f64) -> f64 {
    x.ln()
}

/// ψ at positive integers from harmonic numbers.
fn harmonic_digamma(m: usize) -> f64 {
    (1..m).map(|j| 1.0 / j as f64).sum::<f64>() - EULER_GAMMA
}

fn brute_force_bits(x: &[f64], y: &[f64], k: usize) -> f64 {
    let z = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt();
        v.iter().map(|a| (a - m) / sd).collect::<Vec<_>>()
    };
    let (x, y) = (z(x), z(y));
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (x[j] - x[i]).abs().max((y[j] - y[i]).abs()))
            .collect();
        d.sort_by(f64::total_cmp);
        let eps = d[k - 1];
        let nx = (0..n).filter(|&j| j != i && (x[j] - x[i]).abs() < eps).count();
        let ny = (0..n).filter(|&j| j != i && (y[j] - y[i]).abs() < eps).count();
        acc += harmonic_digamma(nx + 1) + harmonic_digamma(ny + 1);
    }
    (harmonic_digamma(k) - acc / n as f64 + harmonic_digamma(n)) / std::f64::consts::LN_2
}

struct Battery {
    ksg: Ksg<f64>,
    seeds: u64,
    instances: usize,
}

type Check = (&'static str, fn(&Battery) -> Result<String, String>);

fn check_digamma(b: &Battery) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for m in 1..=50 {
        worst = worst.max(((b.ksg.digamma)(m as f64) - harmonic_digamma(m)).abs());
    }
    let half = -EULER_GAMMA - 2.0 * std::f64::consts::LN_2;
    worst = worst.max(((b.ksg.digamma)(0.5) - half).abs());
    let default_ok = (digamma(1.0f64) + EULER_GAMMA).abs() < 1e-14;
    if worst < 1e-12 && default_ok {
        Ok(format!("max error {worst:.1e}"))
    } else {
        Err(format!("max error {worst:.3e} against harmonic numbers"))
    }
}

fn check_oracle(b: &Battery) -> Result<String, String> {
    let mut stream = GaussianStream::new(11);
    let mut worst: f64 = 0.0;
    for _ in 0..b.instances {
        let n = 50 + (stream.uniform() * 151.0) as usize;
        let k = 1 + (stream.uniform() * 6.0) as usize;
        let rho = 1.8 * stream.uniform() - 0.9;
        let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let (u, v) = (stream.normal(), stream.normal());
            x.push(u);
            y.push(rho * u + (1.0 - rho * rho).sqrt() * v);
        }
        let fast = Ksg { k, ..b.ksg }.estimate(&x, &y).map_err(|e| e.to_string())?.value_bits;
        worst = worst.max((fast - brute_force_bits(&x, &y, k)).abs());
    }
    if worst <= 1e-12 {
        Ok(format!("{} instances, max diff {worst:.1e} bit", b.instances))
    } else {
        Err(format!("max diff {worst:.3e} bit against all-pairs oracle"))
    }
}

fn check_gaussian(b: &Battery) -> Result<String, String> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for rho in [0.0, 0.3, 0.6, 0.9] {
        let mut sum = 0.0;
        for seed in 1..=b.seeds {
            let spec = ScenarioSpec::default().with_correlations(rho, 0.0, 0.0).with_seed(seed);
            let [x, y, _] = gen_gaussian_triple(&spec).map_err(|e| e.to_string())?;
            sum += b.ksg.estimate(&x, &y).map_err(|e| e.to_string())?.value_bits;
        }
        let want = -0.5 * (1.0 - rho * rho).log2();
        worst = worst.max((sum / b.seeds as f64 - want).abs());
    }
    let msg = format!("{} seeds, max error {worst:.4} bit, {:.1} s", b.seeds, start.elapsed().as_secs_f64());
    if worst <= 0.05 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn check_key_rate(_: &Battery) -> Result<String, String> {
    let mut stream = GaussianStream::new(3);
    for _ in 0..1000 {
        let (a, e, b) = (stream.normal(), stream.normal(), stream.normal());
        let want = if e <= b { a - e } else { a - b };
        if secret_key_rate(a, e, b).to_bits() != want.to_bits() {
            return Err(format!("secret_key_rate({a}, {e}, {b}) != {want}"));
        }
    }
    let bits = [0.4, 0.2, 0.0, -0.3].map(|r| secure_bit_rate(r, 20.0));
    if bits != [8.0, 4.0, 0.0, 0.0] {
        return Err(format!("secure bits at 20 Hz {bits:?}"));
    }
    Ok("identity exact on 1000 triples; 0.4/0.2/0 -> 8/4/0 bits/s".into())
}

fn check_cascade(_: &Battery) -> Result<String, String> {
    let x: Vec<f64> = (0..6000).map(|i| 5.0 - 0.3 * i as f64).collect();
    let s = savgol(&x, 81, 1).map_err(|e| e.to_string())?;
    let sg = x.iter().zip(&s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / 1800.0;
    let p: Vec<f64> = (0..6000)
        .map(|i| {
            let t = i as f64 / 20.0;
            [2.0, -1.0, 0.5, 0.01, -1e-4, 1e-7].iter().rev().fold(0.0, |acc, c| acc * t + c)
        })
        .collect();
    let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r = detrend_poly(&p, 5).map_err(|e| e.to_string())?;
    let dt = r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    let spec = ScenarioSpec::default();
    let [a, _, _] = gen_satellite_like(&spec).map_err(|e| e.to_string())?;
    let params = CascadeParams::default();
    let base = preprocess_cascade(&a, &params).map_err(|e| e.to_string())?.values;
    let moved: Vec<f64> = a.iter().map(|v| 7.5 * v - 300.0).collect();
    let moved = preprocess_cascade(&moved, &params).map_err(|e| e.to_string())?.values;
    let aff = base.iter().zip(&moved).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let msg = format!("savgol {sg:.1e}, detrend {dt:.1e}, affine {aff:.1e}");
    if sg <= 1e-9 && dt <= 1e-6 && aff <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn pipeline_rsk(b: &Battery, rho_ab: f64, rho_e: f64, seed: u64) -> Result<f64, String> {
    let spec = ScenarioSpec::default().with_correlations(rho_ab, rho_e, rho_e).with_seed(seed);
    let series = to_gf_series(&spec, gen_satellite_like(&spec).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let out = segment_satellite([&series[0], &series[1], &series[2]], &[], &BlockConfig::default())
        .map_err(|e| e.to_string())?;
    let block = out.blocks.first().ok_or("synthetic scenario produced no block")?;
    Ok(evaluate_block_with(block, &EvalParams::default(), &b.ksg).map_err(|e| e.to_string())?.r_sk)
}

fn check_discrimination(b: &Battery) -> Result<String, String> {
    let mean = |ab: f64, e: f64| -> Result<f64, String> {
        let mut s = 0.0;
        for seed in 1..=b.seeds {
            s += pipeline_rsk(b, ab, e, seed)?;
        }
        Ok(s / b.seeds as f64)
    };
    let strong = mean(0.95, 0.1)?;
    let indep = mean(0.0, 0.0)?;
    let weak = mean(0.5, 0.1)?;
    let msg = format!("r_sk {strong:.3} (0.95), {weak:.3} (0.5), {indep:.3} (independent)");
    if strong > 0.5 && indep.abs() <= 0.1 && weak <= strong {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn check_ingest(_: &Battery) -> Result<String, String> {
    let sat = "G27".parse().unwrap();
    let stream = |skip: Option<usize>, slip: Option<usize>| -> Vec<u8> {
        let mut out = Vec::new();
        let mut origin = 0;
        for i in 0..200usize {
            if slip == Some(i) {
                origin = i;
            }
            if skip == Some(i) {
                continue;
            }
            let t = i as f64 / 20.0;
            let lock = ((i - origin) * 50) as u16;
            let l1 = gps_l1_measurement(27, 1e6 + t + (0.9 * t).sin(), 2.1e7, lock);
            let l2 = skykey_core::ubx::RawxMeasurement {
                sig_id: 3,
                ..gps_l1_measurement(27, 7e5 + 0.8 * t, 2.1e7, lock)
            };
            let header = RawxEpoch { rcv_tow: 1000.0 + t, week: 2100, leap_s: 18, num_meas: 2, rec_stat: 1, version: 1 };
            out.extend(encode_rawx(&header, &[l1, l2]));
        }
        out
    };
    let clean = stream(None, None);
    let parsed = parse_ubx_stream(&clean);
    if parsed.valid_frames().count() != 200 {
        return Err("clean stream did not parse into 200 frames".into());
    }
    let mut flipped = clean.clone();
    flipped[40] ^= 0x10;
    if parse_ubx_stream(&flipped).valid_frames().count() != 199 {
        return Err("bit flip was not rejected".into());
    }
    let config = BlockConfig { block_duration: 5.0, ..BlockConfig::default() };
    let blocks = |bob: Vec<u8>| -> Result<(usize, Vec<OmissionReason>), String> {
        let mut series = Vec::new();
        for (role, bytes) in [(Role::Alice, &clean), (Role::Bob, &bob), (Role::Eve, &clean)] {
            let (store, _) = ingest_bytes(bytes, role, "selftest").map_err(|e| e.to_string())?;
            series.push(build_gf_series(&store, sat, 20.0).map_err(|e| e.to_string())?);
        }
        let out = segment_satellite([&series[0], &series[1], &series[2]], &[], &config).map_err(|e| e.to_string())?;
        Ok((out.blocks.len(), out.omitted.iter().map(|o| o.reason).collect()))
    };
    let got = [
        blocks(clean.clone())?,
        blocks(stream(Some(150), None))?,
        blocks(stream(None, Some(120)))?,
    ];
    let want = [
        (2, vec![]),
        (1, vec![OmissionReason::Gap]),
        (1, vec![OmissionReason::CycleSlip]),
    ];
    if got == want {
        Ok("framing, checksum, gap and slip omission".into())
    } else {
        Err(format!("block outcomes {got:?}"))
    }
}

fn check_tables(_: &Battery) -> Result<String, String> {
    let est = |v| MiEstimate { value_bits: v, k: 4, n: 6000 };
    let rec = |sat: &str, slot: usize, el: f64, az: f64, r: f64| {
        SkrRecord::new(sat.parse().unwrap(), 300.0 * slot as f64, Some((el, az)), est(r), est(0.0), est(0.0))
    };
    // slot 0: three satellites, slot 1: one; slot 2 empty
    let records = vec![
        rec("G01", 0, 1.0, 10.0, 0.5),
        rec("E02", 0, 30.0, 180.0, 0.3),
        rec("R03", 0, 60.0, 90.0, -0.1),
        rec("C04", 1, 5.0, 350.0, 0.1),
    ];
    let session = Session { origin: 0.0, slot_seconds: 300.0, total_slots: 3 };
    let filters = builtin_filters();
    let rows = criteria_table(&records, &filters, &DEFAULT_THRESHOLDS, &session).map_err(|e| e.to_string())?;
    let all = &rows[0];
    let want = [1.0 / 3.0, 2.0 / 3.0, 1.0];
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    if !close(&all.avg_count_above, &want) || (all.avg_count_nonpositive - 1.0 / 3.0).abs() > 1e-12 {
        return Err(format!("All Data row {:?}", all));
    }
    for t in 0..3 {
        let parts: f64 = rows[1..5].iter().map(|r| r.avg_count_above[t]).sum();
        if (parts - all.avg_count_above[t]).abs() > 1e-12 {
            return Err("elevation bins do not sum to All Data".into());
        }
    }
    let avail = availability_table(&records, &DEFAULT_AVAILABILITY, &session, 20.0).map_err(|e| e.to_string())?;
    let slots: Vec<usize> = avail.cells.iter().map(|c| c.slots).collect();
    let labels: Vec<String> = avail.cells.iter().map(|c| c.secure_bits_label()).collect();
    if slots != [1, 1, 2, 1, 0] || labels != [">8", "4-8", "0-4", "0", "0"] {
        return Err(format!("availability slots {slots:?}, labels {labels:?}"));
    }
    Ok("criteria averages, bin partition and availability".into())
}

pub fn run(args: &SelftestArgs) -> Result<(), CliError> {
    let mut ksg = Ksg::<f64>::default();
    if args.inject_fault.as_deref() == Some("digamma") {
        ksg.digamma = broken_digamma;
        eprintln!("fault injected: digamma");
    }
    let battery = Battery {
        ksg,
        seeds: if args.quick { 2 } else { 10 },
        instances: if args.quick { 5 } else { 25 },
    };
    let checks: [Check; 8] = [
        ("digamma", check_digamma),
        ("estimator vs all-pairs oracle", check_oracle),
        ("estimator vs Gaussian closed form", check_gaussian),
        ("key rate and secure bits", check_key_rate),
        ("pre-processing cascade", check_cascade),
        ("synthetic discrimination", check_discrimination),
        ("ingest and block rules", check_ingest),
        ("criteria and availability tables", check_tables),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check(&battery) {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                println!("FAIL {name}: {msg}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Failure(format!("{failed} self-test checks failed")));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
