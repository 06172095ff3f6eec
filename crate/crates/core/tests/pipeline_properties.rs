use std::collections::BTreeSet;

use proptest::prelude::*;

use skykey_core::infotheory::{evaluate_block, ksg_mi, EvalParams};
use skykey_core::observables::{GfSample, GfSeries};
use skykey_core::preprocess::{detrend_poly, preprocess_cascade, CascadeParams};
use skykey_core::segmentation::{segment_satellite, BlockConfig};
use skykey_core::synth::{gen_gaussian_triple, gen_satellite_like, to_gf_series, ScenarioSpec};
use skykey_core::ubx::{Role, SatelliteId};

fn gaussian_pair(rho: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let spec = ScenarioSpec { n, ..ScenarioSpec::default() }
        .with_correlations(rho, 0.0, 0.0)
        .with_seed(seed);
    let [a, b, _] = gen_gaussian_triple(&spec).unwrap();
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn ksg_symmetric(seed in 0u64..10_000, rho in -0.95f64..0.95, n in 20usize..400, k in 1usize..8) {
        let (x, y) = gaussian_pair(rho, n, seed);
        let xy = ksg_mi(&x, &y, k).unwrap().value_bits;
        let yx = ksg_mi(&y, &x, k).unwrap().value_bits;
        prop_assert_eq!(xy.to_bits(), yx.to_bits());
    }

    #[test]
    fn ksg_affine_invariant(seed in 0u64..10_000, rho in -0.95f64..0.95, a in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3], b in -1e4f64..1e4) {
        let (x, y) = gaussian_pair(rho, 500, seed);
        let base = ksg_mi(&x, &y, 4).unwrap().value_bits;
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let moved = ksg_mi(&ax, &y, 4).unwrap().value_bits;
        prop_assert!((base - moved).abs() <= 1e-6, "{} vs {}", base, moved);
    }

    #[test]
    fn detrend_residual_orthogonal_to_polynomials(seed in 0u64..10_000, n in 50usize..3000) {
        let (x, _) = gaussian_pair(0.0, n, seed);
        let r = detrend_poly(&x, 5).unwrap();
        let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        for p in 0..=5 {
            let basis: Vec<f64> = (0..n).map(|i| (2.0 * i as f64 / (n - 1) as f64 - 1.0).powi(p)).collect();
            let norm_b = basis.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = r.iter().zip(&basis).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-6 * norm_r * norm_b, "degree {}: {}", p, dot);
        }
    }

    #[test]
    fn cascade_preserves_length(seed in 0u64..10_000, n in 82usize..2000) {
        let (x, _) = gaussian_pair(0.0, n, seed);
        prop_assert_eq!(preprocess_cascade(&x, &CascadeParams::default()).unwrap().values.len(), n);
    }

    #[test]
    fn blocks_disjoint_ordered_and_valid(seed in 0u64..1000, holes in proptest::collection::vec(0usize..1200, 0..4)) {
        let config = BlockConfig { block_duration: 5.0, ..BlockConfig::default() };
        let sat: SatelliteId = "E11".parse().unwrap();
        let (v, _) = gaussian_pair(0.0, 1200, seed);
        let series: Vec<GfSeries> = Role::ALL
            .iter()
            .enumerate()
            .map(|(r, &role)| {
                let samples = (0..1200)
                    .filter(|i| r != 1 || !holes.contains(i))
                    .map(|i| GfSample { epoch: 1000.0 + i as f64 / 20.0, value: v[i] + r as f64, valid: true })
                    .collect();
                GfSeries::new(sat, role, 20.0, samples, BTreeSet::new()).unwrap()
            })
            .collect();
        let out = segment_satellite([&series[0], &series[1], &series[2]], &[], &config).unwrap();
        let hit: BTreeSet<usize> = holes.iter().map(|h| h / 100).collect();
        prop_assert_eq!(out.blocks.len(), 12 - hit.len());
        for b in &out.blocks {
            prop_assert_eq!(b.len(), 100);
            prop_assert_eq!(b.sat(), sat);
        }
        for w in out.blocks.windows(2) {
            prop_assert!(w[0].end_epoch() <= w[1].start_epoch() + 1e-9);
        }
    }
}

#[test]
fn permuting_roles_permutes_series_only() {
    let spec = ScenarioSpec::default().with_seed(4);
    let series = to_gf_series(&spec, gen_satellite_like(&spec).unwrap()).unwrap();
    let out = segment_satellite([&series[0], &series[1], &series[2]], &[], &BlockConfig::default()).unwrap();
    let mut block = out.blocks[0].clone();
    block.set_geometry(12.0, 350.0).unwrap();
    let p = block.permuted([Role::Bob, Role::Alice, Role::Eve]);
    assert_eq!(p.series_a(), block.series_b());
    assert_eq!(p.series_b(), block.series_a());
    assert_eq!(p.series_e(), block.series_e());
    assert_eq!((p.sat(), p.start_epoch(), p.mean_elevation(), p.mean_azimuth()), (block.sat(), block.start_epoch(), block.mean_elevation(), block.mean_azimuth()));

    // swapping the legitimate parties leaves the key rate unchanged
    let a = evaluate_block::<f64>(&block, &EvalParams::default()).unwrap();
    let b = evaluate_block::<f64>(&p, &EvalParams::default()).unwrap();
    assert_eq!(a.r_sk.to_bits(), b.r_sk.to_bits());
    assert_eq!(a.i_ae.value_bits.to_bits(), b.i_be.value_bits.to_bits());
}

#[test]
fn ksg_monotone_in_coupling() {
    let means: Vec<f64> = [0.0, 0.3, 0.6, 0.9]
        .iter()
        .map(|&rho| {
            (1..=10)
                .map(|s| {
                    let (x, y) = gaussian_pair(rho, 6000, s);
                    ksg_mi(&x, &y, 4).unwrap().value_bits
                })
                .sum::<f64>()
                / 10.0
        })
        .collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

#[test]
fn independent_gaussians_near_zero() {
    let mean = (1..=10)
        .map(|s| {
            let (x, y) = gaussian_pair(0.0, 6000, s);
            ksg_mi(&x, &y, 4).unwrap().value_bits
        })
        .sum::<f64>()
        / 10.0;
    assert!(mean.abs() <= 0.02, "{mean}");
}

#[test]
fn synth_deterministic() {
    let spec = ScenarioSpec::default().with_seed(77);
    let a = gen_satellite_like(&spec).unwrap();
    let b = gen_satellite_like(&spec).unwrap();
    for r in 0..3 {
        assert!(a[r].iter().zip(&b[r]).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
    assert_ne!(gen_satellite_like(&spec.clone().with_seed(78)).unwrap()[0], a[0]);
}

#[test]
fn duplicated_process_survives_cascade() {
    let mut spec = ScenarioSpec::default().with_correlations(1.0, 0.0, 0.0);
    spec.noise_a = 0.0;
    spec.noise_b = 0.0;
    let [a, b, _] = gen_satellite_like(&spec).unwrap();
    let params = CascadeParams::default();
    let pa = preprocess_cascade(&a, &params).unwrap().values;
    let pb = preprocess_cascade(&b, &params).unwrap().values;
    let corr = skykey_core::scalar::correlation(&pa, &pb).unwrap();
    assert!((corr - 1.0).abs() <= 1e-9, "{corr}");
}

/// Cross-role MI of ρ = 0 pairs after the full cascade. The smoothing
/// stages leave strongly autocorrelated series, for which the estimator
/// reports roughly 0.7 bit instead of 0 at the default scenario.
#[test]
#[ignore = "unattainable with the standard estimator on smoothed series; see project notes"]
fn zero_correlation_pairs_stay_near_zero_after_cascade() {
    let spec = ScenarioSpec::default().with_correlations(0.95, 0.0, 0.0).with_seed(3);
    let series = to_gf_series(&spec, gen_satellite_like(&spec).unwrap()).unwrap();
    let out = segment_satellite([&series[0], &series[1], &series[2]], &[], &BlockConfig::default()).unwrap();
    let r = evaluate_block::<f64>(&out.blocks[0], &EvalParams::default()).unwrap();
    assert!(r.i_ae.value_bits.abs() <= 0.05, "I(A;E) = {}", r.i_ae.value_bits);
    assert!(r.i_be.value_bits.abs() <= 0.05, "I(B;E) = {}", r.i_be.value_bits);
}
