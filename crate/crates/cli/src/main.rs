use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use colcrunch_core::buffer::BufferConfig;
use colcrunch_core::codec::{set_default_decode_path, CodecId, DecodePath};
use colcrunch_core::storage::{column_stats, AggregateStat, Catalog, CATALOG_FILE_NAME};
use colcrunch_ssb::compression::{compress_lineorder, size_rows, write_sizes};
use colcrunch_ssb::measure::{read_measurements, write_measurements, write_summary};
use colcrunch_ssb::{generate_dataset, run_iterations, summarize, BenchConfig, GenConfig, MeasurementRecord, Scenario};

#[derive(Parser, Debug)]
#[command(name = "colcrunch", version, about = "Compressed column store and star-schema benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a star-schema dataset as raw column files.
    Gen(GenArgs),
    /// Recompress the ten eligible LINEORDER columns with one codec.
    Compress(CompressArgs),
    /// Run the query benchmark and write measurement CSVs.
    Bench(BenchArgs),
    /// Print per-column and aggregate compression statistics.
    Stats(DataDir),
    /// Write sizes.csv (column sizes and compression times) for reporting.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct DataDir {
    /// Dataset directory.
    #[arg(long, env = "COLCRUNCH_DATA_DIR")]
    data_dir: PathBuf,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    dir: DataDir,
    /// Scale factor; 1.0 is six million LINEORDER rows.
    #[arg(long, default_value_t = 0.1)]
    sf: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Page size in bytes; each page holds page_size / 4 values.
    #[arg(long, default_value_t = colcrunch_ssb::generate::DEFAULT_PAGE_SIZE)]
    page_size: usize,
    /// Overwrite an existing dataset in --data-dir.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct CompressArgs {
    #[command(flatten)]
    dir: DataDir,
    /// raw, vbyte, pfor, fastpfor128, binpack128 or brotli.
    #[arg(long, default_value = "raw")]
    codec: CodecId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    dir: DataDir,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Codec the dataset must already be compressed with.
    #[arg(long, default_value = "raw")]
    codec: CodecId,
    /// sequential or parallel.
    #[arg(long, default_value = "sequential")]
    scenario: Scenario,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Seed for the per-iteration query shuffle.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = BufferConfig::default().capacity_pages)]
    buffer_pages: usize,
    /// I/O threads; the parallel scenario always uses one.
    #[arg(long, default_value_t = BufferConfig::default().io_threads)]
    io_threads: usize,
    /// Query workers in the parallel scenario.
    #[arg(long, default_value_t = 13)]
    workers: usize,
    #[arg(long, default_value_t = BufferConfig::default().prefetch_window)]
    prefetch_window: usize,
    /// Shell command that drops OS caches after each iteration.
    #[arg(long)]
    drop_caches_cmd: Option<String>,
    /// Vectorized decoding.
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    simd: Toggle,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    dir: DataDir,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

fn gen(args: GenArgs) -> Result<String> {
    let config = GenConfig { scale_factor: args.sf, seed: args.seed, page_size_bytes: args.page_size };
    let catalog = generate_dataset(&config, &args.dir.data_dir, args.force)?;
    let rows = |table: &str| catalog.columns_of(table).next().map_or(0, |e| e.total_values);
    let total: u64 = catalog.tables().into_iter().map(rows).sum();
    Ok(format!(
        "generated {total} rows ({} lineorder) in {}",
        rows(colcrunch_ssb::schema::LINEORDER),
        args.dir.data_dir.display()
    ))
}

fn compress(args: CompressArgs) -> Result<String> {
    let reports = compress_lineorder(&args.dir.data_dir, args.codec)?;
    let raw: u64 = reports.iter().map(|r| r.uncompressed_bytes).sum();
    let packed: u64 = reports.iter().map(|r| r.compressed_bytes).sum();
    let seconds: f64 = reports.iter().map(|r| r.wall_seconds).sum();
    for r in &reports {
        log::info!("{}: {} -> {} in {:.3}s", r.entry.column, r.previous_codec, r.entry.codec, r.wall_seconds);
    }
    Ok(format!(
        "compressed {} columns with {}: {} bytes saved ({packed} of {raw} bytes, {seconds:.3}s)",
        reports.len(),
        args.codec,
        raw as i64 - packed as i64
    ))
}

/// Writes `path` via a temp file so readers never see a partial CSV.
fn replace_with<F: FnOnce(&Path) -> colcrunch_ssb::Result<()>>(path: &Path, write: F) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    write(&tmp)?;
    fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))
}

fn bench(args: BenchArgs) -> Result<String> {
    set_default_decode_path(if args.simd == Toggle::On { DecodePath::Vectorized } else { DecodePath::Scalar });
    let config = BenchConfig {
        data_dir: args.dir.data_dir,
        codec: args.codec,
        scenario: args.scenario,
        iterations: args.iterations,
        capacity_pages: args.buffer_pages,
        io_threads: args.io_threads,
        worker_threads: args.workers,
        prefetch_window: args.prefetch_window,
        seed: args.seed,
        drop_caches_cmd: args.drop_caches_cmd,
        cold_per_query: false,
        trace_pages: false,
    };
    eprintln!(
        "bench: scenario={} codec={} iterations={} io_threads={} workers={} buffer_pages={}",
        config.scenario,
        config.codec,
        config.iterations,
        config.effective_io_threads(),
        config.worker_threads,
        config.capacity_pages
    );
    let outcome = run_iterations(&config, None)?;
    for (i, note) in outcome.cache_notes.iter().enumerate() {
        log::info!("iteration {i}: caches dropped via {note}");
    }

    let out = &args.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let stem = format!("{}_{}_{stamp}", config.scenario, config.codec);
    let raw_path = out.join(format!("measurements_{stem}.csv"));
    let summary_path = out.join(format!("summary_{stem}.csv"));
    write_measurements(&outcome.records, &raw_path)?;
    write_summary(&summarize(&outcome.records), &summary_path)?;
    let notes: String = outcome.cache_notes.iter().enumerate().map(|(i, n)| format!("{i}\t{n}\n")).collect();
    let notes_path = out.join(format!("cache_drops_{stem}.tsv"));
    fs::write(&notes_path, format!("iteration\tmechanism\n{notes}"))
        .with_context(|| format!("writing {}", notes_path.display()))?;

    // The latest copies merge every (scenario, codec) run so far, newest wins.
    let latest_raw = out.join("measurements_latest.csv");
    let mut merged: Vec<MeasurementRecord> = if latest_raw.exists() {
        read_measurements(&latest_raw)?
            .into_iter()
            .filter(|r| !(r.scenario == config.scenario.name() && r.codec == config.codec.name()))
            .collect()
    } else {
        Vec::new()
    };
    merged.extend(outcome.records.iter().cloned());
    replace_with(&latest_raw, |p| write_measurements(&merged, p))?;
    replace_with(&out.join("summary_latest.csv"), |p| write_summary(&summarize(&merged), p))?;

    Ok(format!("wrote {} records to {} and {}", outcome.records.len(), raw_path.display(), summary_path.display()))
}

fn stats(args: DataDir) -> Result<String> {
    let catalog = Catalog::load(args.data_dir.join(CATALOG_FILE_NAME))?;
    let stats = column_stats(&catalog);
    let mut out = String::from("table\tcolumn\tcodec\tcompressed_bytes\tuncompressed_bytes\tratio\n");
    for c in &stats.columns {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.3}\n",
            c.table,
            c.column,
            c.codec,
            c.compressed_bytes,
            c.uncompressed_bytes,
            c.ratio()
        ));
    }
    for a in &stats.aggregates {
        out.push_str(&format!(
            "{}\t{}\t-\t{}\t{}\t{:.3}\n",
            a.table,
            a.label,
            a.compressed_bytes,
            a.uncompressed_bytes,
            a.ratio()
        ));
    }
    let over = stats.aggregates.iter().filter(|a| a.label == AggregateStat::OVER_COLUMNS).count();
    log::info!("{} columns, {over} tables with compressed columns", stats.columns.len());
    out.pop();
    Ok(out)
}

fn export(args: ExportArgs) -> Result<String> {
    let rows = size_rows(&args.dir.data_dir)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let path = args.out_dir.join("sizes.csv");
    write_sizes(&rows, &path)?;
    Ok(format!("wrote {} size rows to {}", rows.len(), path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors exit with status 2 from inside clap.
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Compress(a) => compress(a),
        Command::Bench(a) => bench(a),
        Command::Stats(a) => stats(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
