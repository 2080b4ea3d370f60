//! `tortho`: batch pipeline for rendering true digital orthophoto maps from
//! trained Gaussian fields.
//!
//! Stages map onto subcommands: `align` estimates and applies Manhattan
//! alignment, `partition` plans divide-and-conquer training cells, `render`
//! splats a field into a georeferenced orthophoto, `eval` scores outputs,
//! and `info` summarizes inputs. Exit codes: 0 success, 1 usage, 2 data or
//! format problems, 3 numeric failures.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use tortho_core::nalgebra::{Vector2, Vector3};

use tortho_core::alignment::{apply_transform, manhattan_align};
use tortho_core::evaluation::{edge_quality, psnr, ratio_errors, ssim, PixelRect};
use tortho_core::field::Aabb;
use tortho_core::io::{
    read_config, read_field, read_raster, read_sfm, write_field, write_raster, RunConfig,
};
use tortho_core::partition::{partition_cameras, select_cameras, select_points, Rect};
use tortho_core::tdom::{camera_centroid, grid_from_field, render_tdom, TdomGridSpec};
use tortho_core::{Error, Result};

/// Working precision of the pipeline.
type S = f64;

#[derive(Parser)]
#[command(
    name = "tortho",
    version,
    about = "True orthophoto rendering from Gaussian fields"
)]
struct Cli {
    /// Cap on render worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate Manhattan alignment from a reconstruction and optionally
    /// apply it to a field.
    Align(AlignArgs),
    /// Plan divide-and-conquer training cells and write the manifest.
    Partition(PartitionArgs),
    /// Render a field into a PNG orthophoto with a world file.
    Render(RenderArgs),
    /// Quality evaluation of rendered outputs.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Summarize a field or reconstruction.
    Info(InfoArgs),
}

#[derive(Args)]
struct AlignArgs {
    /// Structure-from-motion directory (cameras.txt, images.txt, points3D.txt).
    #[arg(long)]
    sfm: PathBuf,
    /// Field to transform into the aligned frame.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Where to write the estimated rigid transform.
    #[arg(long, default_value = "transform.txt")]
    out_transform: PathBuf,
    /// Where to write the aligned field (requires --field).
    #[arg(long)]
    out_field: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    sfm: PathBuf,
    /// Grid as MxN, e.g. 2x2.
    #[arg(long, value_parser = parse_grid)]
    grid: (usize, usize),
    /// Cell expansion ratio.
    #[arg(long)]
    expansion: Option<f64>,
    /// Visibility threshold for extra-camera selection.
    #[arg(long)]
    threshold: Option<f64>,
    /// Optional TOML configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest output path.
    #[arg(long, default_value = "partition.txt")]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Gaussian field file.
    #[arg(long)]
    field: PathBuf,
    /// Spatial resolution in world units per pixel.
    #[arg(long)]
    sx: Option<f64>,
    #[arg(long)]
    sy: Option<f64>,
    /// Reconstruction used for the camera centroid; falls back to the field
    /// bounds center.
    #[arg(long)]
    sfm: Option<PathBuf>,
    /// Explicit raster dimensions.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Background color as r,g,b in [0, 1].
    #[arg(long, value_parser = parse_rgb)]
    background: Option<[f64; 3]>,
    /// Spherical-harmonics degree (0-3).
    #[arg(long)]
    degree: Option<usize>,
    /// Optional TOML configuration; command-line flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output image path.
    #[arg(long, default_value = "tdom.png")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Score segment-length ratio pairs against a reference column.
    Ratios(RatiosArgs),
    /// Edge straightness protocol on a rendered orthophoto.
    Edges(EdgesArgs),
    /// PSNR/SSIM between two images.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RatiosArgs {
    /// CSV of `ours,reference` ratio pairs; `#` comments allowed.
    #[arg(long)]
    pairs: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EdgesArgs {
    #[arg(long)]
    tdom: PathBuf,
    /// Region of interest as x0,y0,x1,y1 (pixels); whole image when omitted.
    #[arg(long, value_parser = parse_roi)]
    roi: Option<(usize, usize, usize, usize)>,
    /// High hysteresis threshold on the Sobel magnitude of an 8-bit image.
    #[arg(long, default_value_t = 120.0)]
    high: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long)]
    sfm: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (m, n) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MxN, got `{s}`"))?;
    let m = m.parse().map_err(|_| format!("bad grid rows `{m}`"))?;
    let n = n.parse().map_err(|_| format!("bad grid columns `{n}`"))?;
    if m == 0 || n == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((m, n))
}

fn parse_rgb(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected r,g,b, got `{s}`"));
    }
    let mut rgb = [0.0; 3];
    for (slot, part) in rgb.iter_mut().zip(parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("bad channel `{part}`"))?;
        if !(0.0..=1.0).contains(slot) {
            return Err(format!("channel {slot} outside [0, 1]"));
        }
    }
    Ok(rgb)
}

fn parse_roi(s: &str) -> std::result::Result<(usize, usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(format!("expected x0,y0,x1,y1, got `{s}`"));
    }
    let mut v = [0usize; 4];
    for (slot, part) in v.iter_mut().zip(parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("bad coordinate `{part}`"))?;
    }
    Ok((v[0], v[1], v[2], v[3]))
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => read_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_align(args: &AlignArgs) -> Result<()> {
    let scene = read_sfm::<S>(&args.sfm)?;
    let transform = manhattan_align(&scene.point_positions(), &scene.camera_views())?;

    let mut text = String::new();
    let _ = writeln!(text, "tortho rigid transform v1");
    let r = &transform.rotation;
    let _ = writeln!(
        text,
        "rotation {} {} {} {} {} {} {} {} {}",
        r[(0, 0)],
        r[(0, 1)],
        r[(0, 2)],
        r[(1, 0)],
        r[(1, 1)],
        r[(1, 2)],
        r[(2, 0)],
        r[(2, 1)],
        r[(2, 2)]
    );
    let t = &transform.translation;
    let _ = writeln!(text, "translation {} {} {}", t.x, t.y, t.z);
    std::fs::write(&args.out_transform, text)?;
    println!("wrote {}", args.out_transform.display());

    if let Some(field_path) = &args.field {
        let out_field = args.out_field.clone().unwrap_or_else(|| {
            let mut p = field_path.clone();
            p.set_extension("aligned.ply");
            p
        });
        let field = read_field::<S>(field_path)?;
        let aligned = apply_transform(&field, &transform)?;
        write_field(&aligned, &out_field)?;
        println!("wrote {}", out_field.display());
    }
    Ok(())
}

fn cmd_partition(args: &PartitionArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let expansion = args.expansion.unwrap_or(config.expansion);
    let threshold = args.threshold.unwrap_or(config.visibility_threshold);
    let scene = read_sfm::<S>(&args.sfm)?;
    let cameras = scene.plan_cameras()?;
    let grounds: Vec<_> = cameras
        .iter()
        .map(|c| tortho_core::partition::GroundCamera {
            id: c.id,
            xy: c.ground,
        })
        .collect();
    let (m, n) = args.grid;
    let mut plan = partition_cameras(&grounds, m, n)?;

    // Cover every sparse point so the eventual merge keeps all of them.
    let mut rect = plan.bounds;
    for p in &scene.points {
        rect.x_min = rect.x_min.min(p.position.x);
        rect.y_min = rect.y_min.min(p.position.y);
        rect.x_max = rect.x_max.max(p.position.x);
        rect.y_max = rect.y_max.max(p.position.y);
    }
    let margin = 1e-6 * (rect.width() + rect.height()).max(1.0);
    plan.stretch_to(Rect::new(
        rect.x_min - margin,
        rect.y_min - margin,
        rect.x_max + margin,
        rect.y_max + margin,
    ))?;
    plan.expand_all(expansion)?;

    let z_range = scene.z_range().unwrap_or((0.0, 1.0));
    select_cameras(&mut plan, &cameras, threshold, z_range)?;
    select_points(&mut plan, &scene.plan_points());

    std::fs::write(&args.out, plan.to_manifest())?;
    println!("wrote {}", args.out.display());
    println!(
        "{} cells, {} cameras, {} points",
        plan.cells.len(),
        scene.images.len(),
        scene.points.len()
    );
    Ok(())
}

fn cmd_render(args: &RenderArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let sx = args.sx.or(config.sx).ok_or_else(|| {
        Error::Argument("spatial resolution --sx is required (flag or config)".into())
    })?;
    let sy = args.sy.or(config.sy).unwrap_or(sx);
    if sx <= 0.0 || sy <= 0.0 {
        return Err(Error::Argument(format!(
            "spatial resolution must be positive, got ({sx}, {sy})"
        )));
    }
    let field = read_field::<S>(&args.field)?;

    let centroid = match &args.sfm {
        Some(dir) => {
            let scene = read_sfm::<S>(dir)?;
            let grounds: Vec<Vector2<S>> = scene.ground_positions();
            camera_centroid(&grounds)?
        }
        None => {
            let b = field.bounds().copied().unwrap_or(Aabb {
                min: Vector3::zeros(),
                max: Vector3::zeros(),
            });
            ((b.min.x + b.max.x) / 2.0, (b.min.y + b.max.y) / 2.0)
        }
    };

    let width = args.width.or(config.width);
    let height = args.height.or(config.height);
    let grid = match (width, height) {
        (Some(w), Some(h)) => TdomGridSpec::new(centroid.0, centroid.1, sx, sy, w, h)?,
        (None, None) => {
            let bounds = field.bounds().copied().ok_or_else(|| {
                Error::Argument("empty field needs explicit --width and --height".into())
            })?;
            grid_from_field(&bounds, centroid, sx, sy)?
        }
        _ => {
            return Err(Error::Argument(
                "--width and --height must be given together".into(),
            ))
        }
    };

    let mut opts = config.render_options::<S>();
    if let Some(deg) = args.degree {
        if deg > tortho_core::harmonics::MAX_DEGREE {
            return Err(Error::Argument(format!(
                "--degree must be at most {}",
                tortho_core::harmonics::MAX_DEGREE
            )));
        }
        opts.sh_degree = deg;
    }
    let background = args.background.unwrap_or(config.background);

    log::info!(
        "rendering {} Gaussians onto {}x{} pixels at ({sx}, {sy})",
        field.len(),
        grid.width,
        grid.height
    );
    let tdom = render_tdom(&field, &grid, background, &opts)?;
    write_raster(&tdom.raster, &tdom.grid, &args.out)?;
    println!("wrote {}", args.out.display());
    println!(
        "wrote {}",
        tortho_core::io::world_file_path(&args.out).display()
    );
    Ok(())
}

fn read_ratio_pairs(path: &Path) -> Result<Vec<(S, S)>> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected two ratios, got `{line}`"),
            });
        }
        let parse = |t: &str| {
            t.parse::<S>().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad ratio `{t}`"),
            })
        };
        pairs.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(pairs)
}

fn cmd_eval_ratios(args: &RatiosArgs) -> Result<()> {
    let pairs = read_ratio_pairs(&args.pairs)?;
    let summary = ratio_errors(&pairs)?;
    let mut text = String::new();
    let _ = writeln!(text, "id,ratio_ours,ratio_ref,abs_err,rel_err_percent");
    for (i, r) in summary.records.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{:.5},{:.5},{:.6},{:.5}",
            i + 1,
            r.ratio_ours,
            r.ratio_ref,
            r.abs_err,
            r.rel_err_percent
        );
    }
    let _ = writeln!(
        text,
        "mean,,,{:.6},{:.5}",
        summary.mean_abs_err, summary.mean_rel_err_percent
    );
    write_or_print(&args.out, &text)
}

fn cmd_eval_edges(args: &EdgesArgs) -> Result<()> {
    let raster = read_raster::<S>(&args.tdom)?;
    let roi = match args.roi {
        Some((x0, y0, x1, y1)) => PixelRect { x0, y0, x1, y1 },
        None => PixelRect {
            x0: 0,
            y0: 0,
            x1: raster.width,
            y1: raster.height,
        },
    };
    let report = edge_quality(&raster, roi, args.high)?;
    let mut text = String::new();
    let _ = writeln!(text, "line,n_points,inlier_fraction,rms_px");
    for (i, line) in report.lines.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{},{:.4},{:.4}",
            i + 1,
            line.n_points,
            line.inlier_fraction,
            line.rms
        );
    }
    if report.lines.is_empty() {
        let _ = writeln!(text, "# no edges found");
    }
    write_or_print(&args.out, &text)
}

fn cmd_eval_compare(args: &CompareArgs) -> Result<()> {
    let a = read_raster::<S>(&args.a)?;
    let b = read_raster::<S>(&args.b)?;
    // Channels are normalized to [0, 1], so the dynamic range is 1.
    let p = psnr(&a, &b, 1.0)?;
    let s = ssim(&a, &b, 1.0)?;
    if p.is_infinite() {
        println!("psnr_db,inf");
    } else {
        println!("psnr_db,{p:.4}");
    }
    println!("ssim,{s:.6}");
    Ok(())
}

fn cmd_info(args: &InfoArgs) -> Result<()> {
    if args.field.is_none() && args.sfm.is_none() {
        return Err(Error::Argument(
            "nothing to summarize; pass --field or --sfm".into(),
        ));
    }
    if let Some(path) = &args.field {
        let field = read_field::<S>(path)?;
        println!("field,{}", path.display());
        println!("gaussians,{}", field.len());
        println!("anisotropic_banks,{}", field.fagk_enabled());
        if let Some(b) = field.bounds() {
            println!(
                "bounds,{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z
            );
        }
    }
    if let Some(dir) = &args.sfm {
        let scene = read_sfm::<S>(dir)?;
        println!("sfm,{}", dir.display());
        println!("cameras,{}", scene.cameras.len());
        println!("images,{}", scene.images.len());
        println!("points,{}", scene.points.len());
        if let Some((lo, hi)) = scene.z_range() {
            println!("z_range,{lo:.4},{hi:.4}");
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        // Ignore the error if a pool already exists (e.g. repeated calls in
        // tests); rendering then uses the existing pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match &cli.command {
        Command::Align(args) => cmd_align(args),
        Command::Partition(args) => cmd_partition(args),
        Command::Render(args) => cmd_render(args),
        Command::Eval(EvalCommand::Ratios(args)) => cmd_eval_ratios(args),
        Command::Eval(EvalCommand::Edges(args)) => cmd_eval_edges(args),
        Command::Eval(EvalCommand::Compare(args)) => cmd_eval_compare(args),
        Command::Info(args) => cmd_info(args),
    }
}

fn main() {
    // Verbosity comes from TORTHO_LOG; the format omits timestamps so runs
    // on identical inputs log identically.
    env_logger::Builder::from_env(env_logger::Env::new().filter("TORTHO_LOG"))
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("tortho: {e}");
        std::process::exit(e.exit_code());
    }
}
