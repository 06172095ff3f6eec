use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;

use skykey_core::ubx::{ingest_file, write_geometry_csv, write_observations_csv, IngestSummary, Role};
use skykey_core::Error;

use crate::config::{ConfigArgs, RunConfig};
use crate::error::{io_err, CliError};

pub fn run(args: &ConfigArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(args, None)?;
    let roles: Vec<Role> = Role::ALL.into_iter().filter(|r| config.inputs.get(*r).is_some()).collect();
    if roles.is_empty() {
        return Err(CliError::Usage("no input given; pass --alice, --bob and/or --eve".into()));
    }
    let out = config.ensure_output_dir()?;
    let mut summaries: BTreeMap<&str, IngestSummary> = BTreeMap::new();
    let mut empty = Vec::new();
    for role in roles {
        let path = config.inputs.get(role).unwrap();
        let (store, summary) = match ingest_file(path, role) {
            Ok(v) => v,
            Err(Error::NoUsableData(_)) => {
                eprintln!("{role}: {}: no usable observations", path.display());
                empty.push(role.name());
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        println!("{role}: {summary}");
        let obs_path = out.join(format!("{}_observations.csv", role.name()));
        let f = File::create(&obs_path).map_err(|e| io_err(&obs_path, e))?;
        write_observations_csv(&store, BufWriter::new(f))?;
        let geo_path = out.join(format!("{}_geometry.csv", role.name()));
        let f = File::create(&geo_path).map_err(|e| io_err(&geo_path, e))?;
        write_geometry_csv(role, store.geometry(), BufWriter::new(f))?;
        summaries.insert(role.name(), summary);
    }
    let json_path = out.join("ingest_summary.json");
    let text = serde_json::to_string_pretty(&summaries).map_err(|e| CliError::Failure(e.to_string()))?;
    std::fs::write(&json_path, text + "\n").map_err(|e| io_err(&json_path, e))?;
    if !empty.is_empty() {
        return Err(CliError::NoData(format!("no usable frames for {}", empty.join(", "))));
    }
    Ok(())
}
