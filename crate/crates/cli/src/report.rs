use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use skykey_core::analysis::{
    builtin_filters, filter_records, mi_export, render_sky_svg, session_summary, skyplot_export, write_availability_csv,
    write_criteria_csv, write_distribution_csv, write_sky_csv, CriteriaFilter, Session, SessionSummary, SkyExport,
};
use skykey_core::infotheory::read_skr_csv;
use skykey_core::observables::DEFAULT_SAMPLE_RATE;
use skykey_core::segmentation::DEFAULT_BLOCK_DURATION;

use crate::error::{io_err, CliError};

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Key-rate CSV written by `analyze`.
    #[arg(long, value_name = "FILE")]
    pub skr: PathBuf,
    #[arg(long, short, value_name = "DIR", default_value = "skykey-report")]
    pub out: PathBuf,
    /// Session length; by default it spans the first to the last block.
    #[arg(long)]
    pub session_hours: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BLOCK_DURATION)]
    pub slot_seconds: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    pub sample_rate: f64,
    /// TOML file with `[[filter]]` tables replacing the built-in criteria.
    #[arg(long, value_name = "FILE")]
    pub filters: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterFile {
    filter: Vec<CriteriaFilter>,
}

#[derive(Serialize)]
struct Report<'a> {
    #[serde(flatten)]
    summary: &'a SessionSummary,
    excluded_no_geometry: Vec<(String, usize)>,
    skyplot_points: usize,
}

fn load_filters(path: Option<&Path>) -> Result<Vec<CriteriaFilter>, CliError> {
    let Some(path) = path else {
        return Ok(builtin_filters());
    };
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let f: FilterFile = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(f.filter)
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> skykey_core::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    f(BufWriter::new(file)).map_err(CliError::from)
}

fn write_sky(out: &Path, stem: &str, export: &SkyExport, title: &str) -> Result<(), CliError> {
    write_file(&out.join(format!("{stem}.csv")), |w| write_sky_csv(export, w))?;
    let svg = out.join(format!("{stem}.svg"));
    std::fs::write(&svg, render_sky_svg(export, title)).map_err(|e| io_err(&svg, e))
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    if args.slot_seconds.is_nan() || args.slot_seconds <= 0.0 || args.sample_rate.is_nan() || args.sample_rate <= 0.0 {
        return Err(CliError::Usage("slot_seconds and sample_rate must be positive".into()));
    }
    let f = File::open(&args.skr).map_err(|e| io_err(&args.skr, e))?;
    let records = read_skr_csv(f)?;
    let filters = load_filters(args.filters.as_deref())?;
    let session = Session::from_records(&records, args.slot_seconds, args.session_hours)?;
    let summary = session_summary(&records, &filters, &session, args.sample_rate)?;

    std::fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let out = args.out.as_path();
    write_file(&out.join("criteria.csv"), |w| write_criteria_csv(&summary.criteria, w))?;
    write_file(&out.join("availability.csv"), |w| write_availability_csv(&summary.availability, w))?;
    write_file(&out.join("distribution.csv"), |w| write_distribution_csv(&summary.distributions, w))?;
    let sky = skyplot_export(&records);
    write_sky(out, "skyplot_rsk", &sky, "R_sk per block")?;
    write_sky(out, "skyplot_mi", &mi_export(&records), "I(A;B) per block")?;

    let excluded = filters
        .iter()
        .map(|f| (f.label.clone(), filter_records(&records, f).excluded_no_geometry))
        .filter(|(_, n)| *n > 0)
        .collect::<Vec<_>>();
    for (label, n) in &excluded {
        eprintln!("{label}: {n} blocks without geometry excluded");
    }
    let report = Report {
        summary: &summary,
        excluded_no_geometry: excluded,
        skyplot_points: sky.points.len(),
    };
    let json = out.join("summary.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Failure(e.to_string()))?;
    std::fs::write(&json, text + "\n").map_err(|e| io_err(&json, e))?;

    println!("{} blocks over {} slots ({:.1} h)", records.len(), session.total_slots, session.hours());
    println!("{:<28} {:>7} {:>7} {:>7} {:>7}", "criterion", ">0.4", ">0.2", ">0", "<=0");
    for row in &summary.criteria {
        let a = &row.avg_count_above;
        println!(
            "{:<28} {:>7.1} {:>7.1} {:>7.1} {:>7.1}",
            row.label, a[0], a[1], a[2], row.avg_count_nonpositive
        );
    }
    for c in &summary.availability.cells {
        println!(
            "{:<6} {:>6.1} h {:>6.1} %  secure bits/s {}",
            c.threshold.label(),
            c.hours,
            c.percentage,
            c.secure_bits_label()
        );
    }
    Ok(())
}
