use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::ArrayView2;
use sl2d::{
    colour_transfer, image_io, sliced_transfer_observed, ColourImage, ColourTransferConfig, Error, FeatureSet,
    MetricReport, TransferConfig, Variant,
};

mod demo;

#[derive(Parser, Debug)]
#[command(name = "sl2d", version, about = "Sliced L2 distribution and colour transfer")]
struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Repeat for more detail (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Recolour SOURCE towards the colour distribution of TARGET.
    Transfer(TransferArgs),
    /// Print PSNR and SSIM between two images.
    Metrics { a: PathBuf, b: PathBuf },
    /// Run the 2D mixture demo with and without correspondences.
    Demo2d(DemoArgs),
}

#[derive(Args, Debug)]
struct TransferArgs {
    source: PathBuf,
    target: PathBuf,
    /// c, cp, corr-c or corr-cp.
    #[arg(long, default_value = "c", value_parser = parse_variant)]
    variant: Variant,
    /// Blend between the correspondence (0) and marginal (1) fits.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 3)]
    patch_size: usize,
    #[arg(long, default_value_t = 50)]
    clusters: usize,
    /// Defaults to 30, or 10 for the corr variants.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pos_weight: f64,
    /// Convergence trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write 0 in the millis column so reruns compare byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, default_value = "demo2d")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    #[arg(long, default_value_t = 50)]
    clusters: usize,
    #[arg(long, default_value_t = 10)]
    corr_iterations: usize,
    #[arg(long, default_value_t = 30)]
    nocorr_iterations: usize,
    #[arg(long)]
    no_timing: bool,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Argument(_) | Error::DegenerateRange => 2,
        Error::Io { .. } | Error::Image { .. } | Error::Csv(_) => 3,
        Error::Dimension(_) | Error::InsufficientCorrespondences(_) | Error::ControlPointMismatch => 4,
        Error::NonFinite { .. } => 1,
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn run_transfer(args: &TransferArgs) -> sl2d::Result<()> {
    let source = ColourImage::<f64>::load_png(&args.source)?;
    let target = ColourImage::<f64>::load_png(&args.target)?;

    let mut cfg = ColourTransferConfig::<f64>::for_variant(args.variant);
    cfg.patch_size = args.patch_size;
    cfg.pos_weight = args.pos_weight;
    cfg.transfer.clusters = args.clusters;
    cfg.transfer.seed = args.seed;
    if let Some(l) = args.lambda {
        cfg.transfer.lambda = l;
    }
    if let Some(n) = args.iterations {
        cfg.transfer.max_iterations = n;
    }
    log::info!("variant {}, config {:?}", args.variant, cfg);

    let outcome = colour_transfer(&source, &target, args.variant, &cfg)?;
    log::info!("feature dimension {}", outcome.feature_dimension);
    if let Some(last) = outcome.trace.records.last() {
        log::info!("{} iterations, final L2 {}", last.iteration, last.l2);
    }
    outcome.image.save_png(&args.out)?;
    if let Some(path) = &args.trace {
        outcome.trace.save_csv(path, !args.no_timing)?;
    }
    Ok(())
}

fn run_metrics(a: &Path, b: &Path) -> sl2d::Result<()> {
    let report = MetricReport::compute(&image_io::load_rgb8(a)?, &image_io::load_rgb8(b)?)?;
    println!("psnr={:.6} ssim={:.6}", report.psnr, report.ssim);
    Ok(())
}

fn write_points(path: &Path, points: ArrayView2<f64>) -> sl2d::Result<()> {
    let file = fs::File::create(path).map_err(io_error(path))?;
    let mut w = BufWriter::new(file);
    let mut body = String::from("x,y\n");
    for row in points.rows() {
        body.push_str(&format!("{},{}\n", row[0], row[1]));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_error(path))
}

fn run_demo(args: &DemoArgs) -> sl2d::Result<()> {
    let points_dir = args.out_dir.join("points");
    fs::create_dir_all(&points_dir).map_err(io_error(&points_dir))?;

    let (source, target) = demo::paired_mixtures(args.points, args.seed);
    write_points(&points_dir.join("source.csv"), source.view())?;
    write_points(&points_dir.join("target.csv"), target.view())?;
    let (source, target) = (FeatureSet::from_points(source), FeatureSet::from_points(target));

    let runs = [
        ("corr", TransferConfig::with_correspondences(), args.corr_iterations),
        (
            "nocorr",
            TransferConfig::without_correspondences(),
            args.nocorr_iterations,
        ),
    ];
    for (name, base, iterations) in runs {
        let cfg = TransferConfig {
            max_iterations: iterations,
            clusters: args.clusters,
            seed: args.seed,
            stop_threshold: None,
            ..base
        };
        log::info!("{name}: {cfg:?}");
        let mut written = Ok(());
        let outcome = sliced_transfer_observed(&source, &target, name == "corr", &cfg, |k, pts| {
            if written.is_ok() && k > 0 {
                written = write_points(&points_dir.join(format!("{name}_{k:03}.csv")), pts);
            }
        })?;
        written?;
        let trace_path = args.out_dir.join(format!("trace_{name}.csv"));
        outcome.trace.save_csv(&trace_path, !args.no_timing)?;
        let v = outcome.trace.values();
        println!(
            "{name}: L2 {:.6e} -> {:.6e} after {} iterations",
            v[0],
            v[v.len() - 1],
            v.len() - 1
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not start thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match &cli.command {
        Command::Transfer(args) => run_transfer(args),
        Command::Metrics { a, b } => run_metrics(a, b),
        Command::Demo2d(args) => run_demo(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
