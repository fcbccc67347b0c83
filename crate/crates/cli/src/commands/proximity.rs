use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use posasc::explain::{render_kde, KdeSeries};
use posasc::posbias::{kde, read_proximity_tsv, uniform_grid, Bandwidth};
use serde::Serialize;

use super::{sidecar, write_file};
use crate::error::CliError;
use crate::manifest::{digest, RunManifest};
use crate::settings::FileConfig;

#[derive(Args, Debug)]
pub struct ProximityArgs {
    /// Aspect-opinion pair TSV, optionally `label=path`; repeat for several series
    #[arg(long = "in", value_name = "[LABEL=]FILE", required = true)]
    pub inputs: Vec<String>,
    /// `auto` (Silverman) or a fixed positive bandwidth [default: auto]
    #[arg(long)]
    pub bandwidth: Option<Bandwidth>,
    /// Evaluation points on the grid [default: 201]
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Grid start [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub lo: Option<f64>,
    /// Grid end [default: 1]
    #[arg(long, allow_negative_numbers = true)]
    pub hi: Option<f64>,
    /// CSV of (series, x, density) rows
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also draw the curves as SVG
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
}

#[derive(Serialize)]
struct Settings<'a> {
    inputs: &'a [String],
    bandwidth: String,
    grid_points: usize,
    lo: f64,
    hi: f64,
    out: &'a Path,
    svg: &'a Option<PathBuf>,
}

fn split_label(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((l, p)) if !l.is_empty() => (l.to_string(), PathBuf::from(p)),
        _ => {
            let p = PathBuf::from(arg);
            let label = p.file_stem().map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
            (label, p)
        }
    }
}

pub fn run(args: ProximityArgs, file: &FileConfig) -> Result<(), CliError> {
    let bandwidth = file.pick(args.bandwidth, "bandwidth")?.unwrap_or(Bandwidth::Auto);
    let points = file.pick(args.grid_points, "grid-points")?.unwrap_or(201);
    let lo = file.pick(args.lo, "lo")?.unwrap_or(0.0);
    let hi = file.pick(args.hi, "hi")?.unwrap_or(1.0);
    if points < 2 || !(hi > lo) {
        return Err(CliError::Usage("need --grid-points >= 2 and --hi > --lo".into()));
    }
    let inputs: Vec<(String, PathBuf)> = args.inputs.iter().map(|a| split_label(a)).collect();
    let digests = inputs
        .iter()
        .map(|(l, p)| digest(l.clone(), p))
        .collect::<Result<Vec<_>, _>>()?;
    let settings = Settings {
        inputs: &args.inputs,
        bandwidth: match bandwidth {
            Bandwidth::Auto => "auto".into(),
            Bandwidth::Fixed(h) => h.to_string(),
        },
        grid_points: points,
        lo,
        hi,
        out: &args.out,
        svg: &args.svg,
    };
    RunManifest::new("proximity", settings, digests, vec![])?.write(&sidecar(&args.out))?;

    let grid = uniform_grid(lo, hi, points);
    let mut series = Vec::new();
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["series", "x", "density"]).map_err(|e| CliError::Runtime(e.to_string()))?;
    for (label, path) in &inputs {
        let f = File::open(path).map_err(|e| CliError::read(path, e))?;
        let records = read_proximity_tsv(f).map_err(|e| CliError::read(path, e))?;
        let samples = records
            .iter()
            .map(|r| r.proximity().map(|s| s.value))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::read(path, e))?;
        let (density, h) = kde(&samples, bandwidth, &grid).map_err(|e| CliError::read(path, e))?;
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        println!("{label}\tpairs={}\tmean={mean:.4}\tbandwidth={h:.6}", samples.len());
        for (x, y) in grid.iter().zip(&density) {
            csv.write_record([label.as_str(), &x.to_string(), &y.to_string()])
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        series.push(KdeSeries::new(label.clone(), &grid, &density));
    }
    let bytes = csv.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&args.out, &bytes)?;
    if let Some(svg) = &args.svg {
        render_kde(&series, svg)?;
    }
    Ok(())
}
