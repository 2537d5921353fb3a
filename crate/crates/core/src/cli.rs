//! `colorhomog` command line.
//!
//! Exit codes: 0 success, 2 input error, 3 solver failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::chart_io::{
    evaluate, load_patches, remove_shading, write_patches, write_stats, MatrixFile, PatchRecord,
};
use crate::colorimetry::{ColorSpace, ColorTriple, WhitePoint};
use crate::error::Error;
use crate::solvers::{
    apply_correction, exposure_scale, solve_als, solve_least_squares, solve_ransac, AlsConfig,
    CorrespondenceSet, FitResult, Method, RansacConfig,
};
use crate::synth::{generate, SynthConfig};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "colorhomog", version, about = "Shading-independent color correction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ls,
    Als,
    Ransac,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ls => Method::LeastSquares,
            MethodArg::Als => Method::Als,
            MethodArg::Ransac => Method::Ransac,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Lab,
    Luv,
}

impl From<SpaceArg> for ColorSpace {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Lab => ColorSpace::Lab,
            SpaceArg::Luv => ColorSpace::Luv,
        }
    }
}

fn parse_white(s: &str) -> Result<WhitePoint, String> {
    if s.eq_ignore_ascii_case("d65") {
        return Ok(WhitePoint::D65);
    }
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format!("invalid white point `{s}`: {e}"))?;
    match parts.as_slice() {
        [x, y, z] => WhitePoint::new(*x, *y, *z).map_err(|e| e.to_string()),
        _ => Err(format!("white point must be `d65` or `X,Y,Z`, got `{s}`")),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo = lo.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = hi.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an RGB → XYZ correction matrix from a chart CSV.
    Calibrate {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = AlsConfig::default().epsilon)]
        epsilon: f64,
        #[arg(long, default_value_t = AlsConfig::default().max_iters)]
        max_iters: usize,
        /// RANSAC inlier threshold in ΔE*uv.
        #[arg(long, default_value_t = RansacConfig::default().inlier_threshold)]
        threshold: f64,
        #[arg(long, default_value_t = RansacConfig::default().max_trials)]
        max_trials: usize,
        #[arg(long, default_value_t = RansacConfig::default().min_consensus_fraction)]
        min_consensus: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_white, default_value = "d65")]
        white: WhitePoint,
    },
    /// Append corrected XYZ columns to a chart CSV.
    Apply {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// ΔE statistics for every corrected column set.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        space: SpaceArg,
        #[arg(long, value_parser = parse_white, default_value = "d65")]
        white: WhitePoint,
        /// Take reference X,Y,Z from this chart instead of the input.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a synthetic chart and its ground-truth sidecar (`<output>.truth.json`).
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_parser = parse_range, default_value = "0.2,1")]
        shading: (f64, f64),
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        outliers: f64,
        #[arg(long)]
        output: PathBuf,
        /// Also write the noise- and outlier-free targets as a chart CSV.
        #[arg(long)]
        reference_output: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

fn input_err(error: impl Into<Error>) -> CliError {
    CliError {
        code: EXIT_INPUT,
        error: error.into(),
    }
}

fn solver_err(error: impl Into<Error>) -> CliError {
    CliError {
        code: EXIT_SOLVER,
        error: error.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_patches(path: &Path) -> CliResult<Vec<PatchRecord>> {
    let file = File::open(path).map_err(input_err)?;
    load_patches(BufReader::new(file)).map_err(input_err)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(input_err)
}

fn finish(mut w: BufWriter<File>) -> CliResult<()> {
    w.flush().map_err(input_err)
}

/// Gray-divided RGB when every record carries a gray capture, raw RGB otherwise.
fn shading_free_rgb(records: &[PatchRecord]) -> CliResult<Vec<ColorTriple>> {
    if !records.is_empty() && records.iter().all(|r| r.gray_rgb.is_some()) {
        remove_shading(records).map_err(input_err)
    } else {
        Ok(records.iter().map(|r| r.rgb).collect())
    }
}

fn reference_xyz(records: &[PatchRecord]) -> CliResult<Vec<ColorTriple>> {
    records
        .iter()
        .map(|r| r.xyz.ok_or_else(|| input_err(Error::MissingColumn("X".into()))))
        .collect()
}

struct CalibrateArgs {
    method: Method,
    als: AlsConfig,
    ransac: RansacConfig,
    white: WhitePoint,
}

fn fit(set: &CorrespondenceSet, args: &CalibrateArgs) -> crate::Result<FitResult> {
    match args.method {
        Method::LeastSquares => solve_least_squares(set),
        Method::Als => solve_als(set, &args.als),
        Method::Ransac => solve_ransac(set, &args.ransac, &args.white),
    }
}

fn fmt_white(w: &WhitePoint) -> String {
    let t = w.as_triple();
    format!("{},{},{}", t.c0(), t.c1(), t.c2())
}

fn calibrate(input: &Path, output: &Path, args: CalibrateArgs, out: &mut dyn Write) -> CliResult<()> {
    args.als.validate().map_err(input_err)?;
    args.ransac.validate().map_err(input_err)?;
    let records = read_patches(input)?;
    let xyz = reference_xyz(&records)?;
    let rgb: Vec<ColorTriple> = records.iter().map(|r| r.rgb).collect();
    let set = CorrespondenceSet::new(rgb, xyz.clone()).map_err(|e| match e {
        Error::InsufficientPoints { .. } => solver_err(e),
        other => input_err(other),
    })?;

    let result = fit(&set, &args).map_err(solver_err)?;
    let flat = shading_free_rgb(&records)?;
    let scale = exposure_scale(&result.matrix, &flat, &xyz).ok_or_else(|| {
        solver_err(Error::DegenerateSample(
            "no patch has positive predicted and reference luminance".into(),
        ))
    })?;

    let mut metadata = vec![
        ("method".to_string(), args.method.tag().to_string()),
        ("patches".to_string(), set.len().to_string()),
        ("exposure_scale".to_string(), scale.to_string()),
    ];
    match args.method {
        Method::LeastSquares => {}
        Method::Als => {
            metadata.push(("epsilon".into(), args.als.epsilon.to_string()));
            metadata.push(("max_iters".into(), args.als.max_iters.to_string()));
            metadata.push(("iterations".into(), result.iterations.to_string()));
            metadata.push(("converged".into(), result.converged.to_string()));
            let last = result.residual_history.last().copied().unwrap_or(0.0);
            metadata.push(("final_residual".into(), last.to_string()));
        }
        Method::Ransac => {
            let inliers = result.inliers.clone().unwrap_or_default();
            metadata.push(("seed".into(), args.ransac.seed.to_string()));
            metadata.push(("threshold".into(), args.ransac.inlier_threshold.to_string()));
            metadata.push(("max_trials".into(), args.ransac.max_trials.to_string()));
            metadata.push(("min_consensus".into(), args.ransac.min_consensus_fraction.to_string()));
            metadata.push(("white".into(), fmt_white(&args.white)));
            metadata.push(("trials".into(), result.iterations.to_string()));
            metadata.push(("consensus".into(), inliers.len().to_string()));
            let list: Vec<String> = inliers.iter().map(|i| i.to_string()).collect();
            metadata.push(("inliers".into(), list.join(",")));
        }
    }

    let file = MatrixFile {
        matrix: result.matrix * scale,
        metadata,
    };
    let mut w = create(output)?;
    file.write(&mut w).map_err(input_err)?;
    finish(w)?;

    let _ = match args.method {
        Method::LeastSquares => writeln!(out, "ls: {} patches", set.len()),
        Method::Als => writeln!(
            out,
            "als: {} iterations, converged={}, residual={:e}",
            result.iterations,
            result.converged,
            result.residual_history.last().copied().unwrap_or(0.0)
        ),
        Method::Ransac => writeln!(
            out,
            "ransac: {} trials, consensus {}/{} (seed {})",
            result.iterations,
            result.inliers.as_ref().map_or(0, |v| v.len()),
            set.len(),
            args.ransac.seed
        ),
    };
    Ok(())
}

fn apply(matrix: &Path, input: &Path, output: &Path) -> CliResult<()> {
    let file = File::open(matrix).map_err(input_err)?;
    let mf = MatrixFile::read(BufReader::new(file)).map_err(input_err)?;
    let tag = mf.get("method").unwrap_or("corrected").to_string();
    if tag.is_empty() || tag.contains(',') || tag.chars().any(char::is_whitespace) {
        return Err(input_err(Error::InvalidConfig(format!("unusable method tag `{tag}`"))));
    }

    let mut records = read_patches(input)?;
    let flat = shading_free_rgb(&records)?;
    let corrected = apply_correction(&mf.matrix, &flat);
    for (r, c) in records.iter_mut().zip(corrected) {
        match r.corrected.iter_mut().find(|(t, _)| *t == tag) {
            Some(slot) => slot.1 = c,
            None => r.corrected.push((tag.clone(), c)),
        }
    }
    let mut w = create(output)?;
    write_patches(&mut w, &records).map_err(input_err)?;
    finish(w)
}

fn evaluate_cmd(
    input: &Path,
    space: ColorSpace,
    white: WhitePoint,
    reference: Option<&Path>,
    output: &Path,
) -> CliResult<()> {
    let records = read_patches(input)?;
    let reference_xyz = match reference {
        Some(path) => {
            let refs = read_patches(path)?;
            let ids_match = refs.len() == records.len()
                && refs.iter().zip(&records).all(|(a, b)| a.patch_id == b.patch_id);
            if !ids_match {
                return Err(input_err(Error::ShapeMismatch(
                    "reference chart patches differ from input".into(),
                )));
            }
            reference_xyz(&refs)?
        }
        None => reference_xyz(&records)?,
    };

    let tags: Vec<String> = records
        .first()
        .map(|r| r.corrected.iter().map(|(t, _)| t.clone()).collect())
        .unwrap_or_default();
    if tags.is_empty() {
        return Err(input_err(Error::MissingColumn("X_<method>".into())));
    }

    let mut rows = Vec::new();
    for (k, tag) in tags.iter().enumerate() {
        let corrected: Vec<ColorTriple> = records.iter().map(|r| r.corrected[k].1).collect();
        let stats = evaluate(&corrected, &reference_xyz, &white, space).map_err(input_err)?;
        rows.push((tag.clone(), stats));
    }
    let mut w = create(output)?;
    write_stats(&mut w, &rows).map_err(input_err)?;
    finish(w)
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".truth.json");
    PathBuf::from(name)
}

fn synth(cfg: SynthConfig, output: &Path, reference_output: Option<&Path>) -> CliResult<()> {
    let inst = generate(&cfg).map_err(input_err)?;
    let mut w = create(output)?;
    write_patches(&mut w, &inst.to_patch_records()).map_err(input_err)?;
    finish(w)?;

    let mut w = create(&sidecar_path(output))?;
    serde_json::to_writer_pretty(&mut w, &inst.truth())
        .map_err(|e| input_err(std::io::Error::other(e)))?;
    writeln!(w).map_err(input_err)?;
    finish(w)?;

    if let Some(path) = reference_output {
        let mut w = create(path)?;
        write_patches(&mut w, &inst.to_reference_records()).map_err(input_err)?;
        finish(w)?;
    }
    Ok(())
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Calibrate {
            method,
            input,
            output,
            epsilon,
            max_iters,
            threshold,
            max_trials,
            min_consensus,
            seed,
            white,
        } => {
            let args = CalibrateArgs {
                method: method.into(),
                als: AlsConfig { epsilon, max_iters },
                ransac: RansacConfig {
                    inlier_threshold: threshold,
                    max_trials,
                    min_consensus_fraction: min_consensus,
                    seed,
                },
                white,
            };
            calibrate(&input, &output, args, out)
        }
        Command::Apply { matrix, input, output } => apply(&matrix, &input, &output),
        Command::Evaluate {
            input,
            space,
            white,
            reference,
            output,
        } => evaluate_cmd(&input, space.into(), white, reference.as_deref(), &output),
        Command::Synth {
            n,
            seed,
            shading,
            noise,
            outliers,
            output,
            reference_output,
        } => {
            let cfg = SynthConfig {
                n_patches: n,
                seed,
                shading_range: shading,
                noise_sigma: noise,
                outlier_fraction: outliers,
            };
            synth(cfg, &output, reference_output.as_deref())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.error);
            e.code
        }
    }
}
