use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use skykey_core::infotheory::{evaluate_block_with, write_skr_csv, Ksg, SkrRecord};
use skykey_core::observables::{build_gf_series, read_gf_csv, GfSeries};
use skykey_core::segmentation::{segment_satellite, write_block_manifest, AlignedBlock, BlockOutcome};
use skykey_core::ubx::{ingest_bytes, read_geometry_csv, Role, SatGeometry, SatelliteId};
use skykey_core::{Error, Real};

use crate::config::{ConfigArgs, PipelineArgs, Precision, RunConfig};
use crate::error::{io_err, CliError};

#[derive(Default)]
struct RoleData {
    series: BTreeMap<SatelliteId, GfSeries>,
    geometry: BTreeMap<SatelliteId, Vec<SatGeometry>>,
}

const GF_CSV_PREFIX: &[u8] = b"role,";

fn load_role(path: &Path, role: Role, sample_rate: f64) -> Result<RoleData, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut data = RoleData::default();
    if bytes.starts_with(GF_CSV_PREFIX) {
        for s in read_gf_csv(&bytes[..], sample_rate)? {
            if s.role == role {
                data.series.insert(s.sat, s);
            }
        }
        if data.series.is_empty() {
            return Err(CliError::NoData(format!("{}: no rows for role {role}", path.display())));
        }
        return Ok(data);
    }
    let (store, summary) = ingest_bytes(&bytes, role, &path.display().to_string())?;
    eprintln!("{role}: {summary}");
    for sat in store.satellites() {
        data.series.insert(sat, build_gf_series(&store, sat, sample_rate)?);
        let g = store.geometry_for(sat);
        if !g.is_empty() {
            data.geometry.insert(sat, g);
        }
    }
    Ok(data)
}

/// Everything `analyze` produces, before it is written out.
pub struct Analysis {
    pub records: Vec<SkrRecord>,
    pub outcome: BlockOutcome,
}

pub fn analyze(config: &RunConfig) -> Result<Analysis, CliError> {
    let mut paths = Vec::with_capacity(3);
    for role in Role::ALL {
        let path = config
            .inputs
            .get(role)
            .ok_or_else(|| CliError::Usage(format!("missing input for role {role}")))?;
        paths.push((role, path));
    }
    let mut roles = Vec::with_capacity(3);
    for (role, path) in paths {
        roles.push(load_role(path, role, config.sample_rate)?);
    }
    let mut extra_geometry: BTreeMap<SatelliteId, Vec<SatGeometry>> = BTreeMap::new();
    for path in &config.geometry {
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        for (_, g) in read_geometry_csv(f)? {
            extra_geometry.entry(g.sat).or_default().push(g);
        }
    }

    let sats: Vec<SatelliteId> = roles[0]
        .series
        .keys()
        .filter(|s| roles[1].series.contains_key(s) && roles[2].series.contains_key(s))
        .copied()
        .collect();
    let block_config = config.block_config();
    let params = config.eval_params();

    config.install(|| {
        let outcomes: Vec<Result<BlockOutcome, Error>> = sats
            .par_iter()
            .map(|sat| {
                let geometry = roles
                    .iter()
                    .find_map(|r| r.geometry.get(sat))
                    .or_else(|| extra_geometry.get(sat))
                    .map(Vec::as_slice)
                    .unwrap_or(&[]);
                let s = [&roles[0].series[sat], &roles[1].series[sat], &roles[2].series[sat]];
                segment_satellite(s, geometry, &block_config)
            })
            .collect();
        let mut all = BlockOutcome::default();
        for o in outcomes {
            let o = o?;
            all.counts.merge(&o.counts);
            all.blocks.extend(o.blocks);
            all.omitted.extend(o.omitted);
        }
        eprintln!(
            "segmented {} satellites: {} blocks, omitted {} (gap {}, band dropout {}, cycle slip {}, truncated {})",
            sats.len(),
            all.blocks.len(),
            all.counts.total(),
            all.counts.gap,
            all.counts.band_dropout,
            all.counts.cycle_slip,
            all.counts.truncated
        );

        let results = match config.precision {
            Precision::F64 => evaluate_all::<f64>(&all.blocks, config, &params),
            Precision::F32 => evaluate_all::<f32>(&all.blocks, config, &params),
        };
        let mut records = Vec::with_capacity(results.len());
        let mut degenerate = 0;
        for r in results {
            match r {
                Ok(rec) => records.push(rec),
                Err(Error::Degenerate(msg)) => {
                    eprintln!("skipped degenerate block: {msg}");
                    degenerate += 1;
                }
                Err(e) => return Err(CliError::from(e)),
            }
        }
        records.sort_by(|a, b| a.start_epoch.total_cmp(&b.start_epoch).then(a.sat.cmp(&b.sat)));
        eprintln!("evaluated {} blocks ({degenerate} degenerate)", records.len());
        Ok(Analysis {
            records,
            outcome: all,
        })
    })?
}

fn evaluate_all<T: Real>(
    blocks: &[AlignedBlock],
    config: &RunConfig,
    params: &skykey_core::infotheory::EvalParams,
) -> Vec<Result<SkrRecord, Error>> {
    let ksg = Ksg::<T> {
        jitter_seed: config.seed,
        ..Ksg::new(config.k)
    };
    blocks.par_iter().map(|b| evaluate_block_with(b, params, &ksg)).collect()
}

pub fn run(common: &ConfigArgs, pipeline: &PipelineArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(common, Some(pipeline))?;
    let result = analyze(&config)?;
    let out = config.ensure_output_dir()?;

    let manifest = out.join("blocks.csv");
    let f = File::create(&manifest).map_err(|e| io_err(&manifest, e))?;
    write_block_manifest(&result.outcome, BufWriter::new(f))?;

    let cfg_path = out.join("run_config.toml");
    let text = toml::to_string(&config).map_err(|e| CliError::Failure(e.to_string()))?;
    std::fs::write(&cfg_path, text).map_err(|e| io_err(&cfg_path, e))?;

    if result.records.is_empty() {
        return Err(CliError::NoData("no valid blocks".into()));
    }
    let skr = out.join("skr.csv");
    let f = File::create(&skr).map_err(|e| io_err(&skr, e))?;
    write_skr_csv(&result.records, BufWriter::new(f))?;
    println!("{} records written to {}", result.records.len(), skr.display());
    Ok(())
}
