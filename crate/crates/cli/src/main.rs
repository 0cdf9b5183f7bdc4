use std::fs;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use terrablock_core::fusion::FusedCellTable;
use terrablock_core::interpolation::{default_season_label, interpolate_grid, parse_yield_csv};
use terrablock_core::pipeline::{fuse, FuseInputs, YieldSource};
use terrablock_core::raster::{parse_ascii_grid, write_ascii_grid};
use terrablock_core::report::{emit_block_geojson, emit_report_json, run_analysis, AnalysisConfig};
use terrablock_core::soil::AttributeSchema;
use terrablock_core::synthetic::{synthetic_field, SyntheticSpec};
use terrablock_core::terrain::derive_at_resolution;
use terrablock_service::{port_from_env, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "terrablock", version, about = "Field trial blocking from terrain, soil and yield layers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Slope and aspect rasters from a DEM.
    Terrain {
        dem: PathBuf,
        #[arg(long)]
        out_slope: PathBuf,
        #[arg(long)]
        out_aspect: PathBuf,
        /// Block-mean factor applied before differentiation.
        #[arg(long, default_value_t = 1)]
        resample: usize,
        /// Also write the resampled DEM.
        #[arg(long)]
        out_dem: Option<PathBuf>,
    },
    /// Join terrain, soil and interpolated yield into one cell table.
    Fuse {
        #[arg(long)]
        dem: PathBuf,
        #[arg(long)]
        soil: PathBuf,
        #[arg(long)]
        boundary: PathBuf,
        /// Yield point CSVs; rows without a season column take the file stem.
        #[arg(long = "yield", required = true, num_args = 1..)]
        yields: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Soil attribute schema JSON.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        resample: usize,
    },
    /// Interpolate yield points onto the cells of a reference grid.
    Interpolate {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        like: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Season to use when the CSV holds several.
        #[arg(long)]
        season: Option<String>,
    },
    /// ANOVA and Tukey HSD per grouping feature, plus block polygons.
    Analyze {
        #[arg(long)]
        fused: PathBuf,
        /// AnalysisConfig JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        blocks: PathBuf,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "TERRABLOCK_PORT")]
        port: Option<u16>,
        #[arg(long, env = "TERRABLOCK_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write a generated two-soil field for trying the pipeline.
    Synthetic {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 57)]
        seed: u64,
    },
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Terrain {
            dem,
            out_slope,
            out_aspect,
            resample,
            out_dem,
        } => {
            let grid = parse_ascii_grid(&read(&dem)?).with_context(|| format!("parsing {}", dem.display()))?;
            let (coarse, deriv) = derive_at_resolution(&grid, resample)?;
            write(&out_slope, &write_ascii_grid(&deriv.slope))?;
            write(&out_aspect, &write_ascii_grid(&deriv.aspect))?;
            if let Some(path) = out_dem {
                write(&path, &write_ascii_grid(&coarse))?;
            }
        }
        Command::Fuse {
            dem,
            soil,
            boundary,
            yields,
            out,
            schema,
            resample,
        } => {
            let schema = match schema {
                Some(p) => AttributeSchema::from_json(&read(&p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => AttributeSchema::default(),
            };
            let yield_bytes = yields.iter().map(|p| Ok((file_name(p), read(p)?))).collect::<Result<Vec<_>>>()?;
            let (dem, soil, boundary) = (read(&dem)?, read(&soil)?, read(&boundary)?);
            let fused = fuse(&FuseInputs {
                dem: &dem,
                soil: &soil,
                boundary: &boundary,
                yields: yield_bytes.iter().map(|(name, bytes)| YieldSource { name, bytes }).collect(),
                schema,
                resolution_factor: resample,
            })?;
            write(&out, &fused.table.to_csv())?;
            eprintln!("{} cells, seasons: {}", fused.table.len(), fused.table.seasons.join(", "));
        }
        Command::Interpolate {
            points,
            like,
            out,
            season,
        } => {
            let reference = parse_ascii_grid(&read(&like)?).with_context(|| format!("parsing {}", like.display()))?;
            let sets = parse_yield_csv(&read(&points)?, &default_season_label(&file_name(&points)))
                .with_context(|| format!("parsing {}", points.display()))?;
            let set = match (season, sets.len()) {
                (None, 1) => &sets[0],
                (None, _) => bail!(
                    "{} holds several seasons ({}); choose one with --season",
                    points.display(),
                    sets.iter().map(|s| s.season.as_str()).collect::<Vec<_>>().join(", ")
                ),
                (Some(s), _) => sets.iter().find(|set| set.season == s).with_context(|| format!("no season '{s}'"))?,
            };
            write(&out, &write_ascii_grid(&interpolate_grid(set, reference.geometry())?))?;
        }
        Command::Analyze {
            fused,
            config,
            report,
            blocks,
        } => {
            let table = FusedCellTable::from_csv(&read(&fused)?).with_context(|| format!("parsing {}", fused.display()))?;
            let config = match config {
                Some(p) => AnalysisConfig::from_json(&read(&p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => AnalysisConfig::default(),
            };
            if config.resolution_factor != 1 {
                eprintln!("note: resolution_factor is applied when fusing; pass the same value to `fuse --resample`");
            }
            let (result, block_map) = run_analysis(&table, &config)?;
            write(&report, &emit_report_json(&result))?;
            write(&blocks, &emit_block_geojson(&block_map))?;
            for a in &result.analyses {
                let rejected = a.tukey.as_ref().map_or(0, |t| t.pairs.iter().filter(|p| p.reject).count());
                let pairs = a.tukey.as_ref().map_or(0, |t| t.pairs.len());
                eprintln!("{} [{}]: {} groups, {rejected}/{pairs} pairs differ", a.feature.name(), a.season, a.groups.len());
            }
        }
        Command::Serve { port, data_dir, workers } => {
            let mut config = ServiceConfig::from_env();
            if let Some(dir) = data_dir {
                config.data_dir = dir;
            }
            if let Some(n) = workers {
                config.workers = n;
            }
            let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, port.unwrap_or_else(port_from_env)));
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(terrablock_service::serve(config, addr))?;
        }
        Command::Synthetic { out_dir, seed } => {
            synthetic_field(&SyntheticSpec {
                seed,
                ..SyntheticSpec::default()
            })
            .write_to(&out_dir)
            .with_context(|| format!("writing {}", out_dir.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
