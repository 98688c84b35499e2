//! `smoothvg`: render scene files, dump intermediate layers, print
//! pipeline statistics and check scenes for likely leaks.

mod validate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use smoothvg_core::raster::{
    write_flags_png, write_graph_png, write_image, write_masks_png, write_patch_map_png, write_source_png, ImageFormat,
};
use smoothvg_core::{parse_scene, prepare, BoundaryMode, Error, OverlapMode, Prepared, Scene, SceneStats, Timings};

const DEFAULT_WIDTH: usize = 512;

#[derive(Parser, Debug)]
#[command(name = "smoothvg", version, about = "Rasterize gradient meshes, diffusion curves and Poisson curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a scene to PNG, PPM or PFM (chosen by extension).
    Render {
        scene: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        opts: RenderOpts,
        #[command(flatten)]
        dumps: DumpFlags,
    },
    /// Print primitive and arrangement counts and stage timings.
    Stats {
        scene: PathBuf,
        #[command(flatten)]
        opts: RenderOpts,
    },
    /// Report near-miss endpoints, folded meshes and zero-length segments.
    Validate {
        scene: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// Squared merge and snap distance.
    #[arg(long)]
    tau: Option<f64>,
    /// Curve flattening tolerance.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Maximum solver iterations.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long = "mg-levels")]
    mg_levels: Option<usize>,
    /// Max-norm residual target.
    #[arg(long)]
    residual: Option<f64>,
    /// Laplacian weighting where meshes overlap: zero, sum, average or first.
    #[arg(long)]
    overlap: Option<OverlapMode>,
}

impl Overrides {
    fn apply(&self, scene: &mut Scene) {
        let s = &mut scene.settings;
        if let Some(v) = self.tau {
            s.tau = v;
        }
        if let Some(v) = self.epsilon {
            s.epsilon = v;
        }
        if let Some(v) = self.iterations {
            s.iterations = v;
        }
        if let Some(v) = self.mg_levels {
            s.multigrid_levels = v;
        }
        if let Some(v) = self.residual {
            s.residual_target = v;
        }
        if let Some(v) = self.overlap {
            s.overlap_mode = v;
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RenderOpts {
    /// Output size as WxH, or a single width with the height taken from the
    /// domain aspect ratio. Pixels must be square.
    #[arg(long)]
    resolution: Option<Resolution>,
    /// Dirichlet treatment: cut-cell (default) or pixel.
    #[arg(long, default_value = "cut-cell")]
    boundary: BoundaryMode,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug, Clone, Copy, Default)]
struct DumpFlags {
    /// Write the edge graph over the image to <output>_graph.png.
    #[arg(long)]
    dump_graph: bool,
    /// Write the patch map to <output>_patches.png.
    #[arg(long)]
    dump_patches: bool,
    /// Write pixel classes to <output>_masks.png and closed links to <output>_links.png.
    #[arg(long)]
    dump_masks: bool,
    /// Write the Laplacian source to <output>_source.png.
    #[arg(long)]
    dump_source: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Resolution {
    Exact(usize, usize),
    Width(usize),
}

impl FromStr for Resolution {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| match t.trim().parse::<usize>() {
            Ok(v) if v >= 2 => Ok(v),
            _ => Err(format!("invalid resolution `{s}` (expected WxH with both sides at least 2)")),
        };
        match s.split_once(['x', 'X']) {
            Some((w, h)) => Ok(Resolution::Exact(num(w)?, num(h)?)),
            None => Ok(Resolution::Width(num(s)?)),
        }
    }
}

/// A failure with its exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(Error),
    Pipeline(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Pipeline(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Input(e) | Failure::Pipeline(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Validation(_) | Error::FoldedMesh { .. } => Failure::Input(e),
            e => Failure::Pipeline(e),
        }
    }
}

fn load_scene(path: &Path, overrides: &Overrides) -> Result<Scene, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(Error::Io(e)))?;
    let mut scene = parse_scene(&text).map_err(|e| match e {
        Error::Parse { line, column, message } => {
            Failure::Input(Error::Parse { line, column, message: format!("{}: {message}", path.display()) })
        }
        e => Failure::from(e),
    })?;
    overrides.apply(&mut scene);
    scene.validate().map_err(Failure::Input)?;
    Ok(scene)
}

fn resolve_size(scene: &Scene, res: Option<Resolution>) -> Result<(usize, usize), Failure> {
    let d = &scene.domain;
    let aspect_height = |w: usize| {
        let h = w as f64 * d.height() / d.width();
        let r = h.round();
        if (h - r).abs() > 1e-6 || r < 2.0 {
            Err(Failure::Usage(format!(
                "width {w} gives a non-integer height {h:.3} on a {}x{} domain; pass --resolution WxH",
                d.width(),
                d.height()
            )))
        } else {
            Ok(r as usize)
        }
    };
    let (w, h) = match res {
        Some(Resolution::Exact(w, h)) => (w, h),
        Some(Resolution::Width(w)) => (w, aspect_height(w)?),
        None => (DEFAULT_WIDTH, aspect_height(DEFAULT_WIDTH)?),
    };
    let (hx, hy) = (d.width() / w as f64, d.height() / h as f64);
    if (hx - hy).abs() > 1e-9 * hx.max(hy) {
        return Err(Failure::Usage(format!(
            "resolution {w}x{h} does not give square pixels on a {}x{} domain",
            d.width(),
            d.height()
        )));
    }
    Ok((w, h))
}

fn sibling(output: &Path, suffix: &str) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    output.with_file_name(format!("{stem}_{suffix}.png"))
}

fn cmd_render(scene_path: &Path, output: &Path, opts: &RenderOpts, dumps: DumpFlags) -> Result<(), Failure> {
    ImageFormat::from_path(output).map_err(|e| Failure::Usage(e.to_string()))?;
    let scene = load_scene(scene_path, &opts.overrides)?;
    let (w, h) = resolve_size(&scene, opts.resolution)?;
    let prep = prepare(&scene)?;
    let out = prep.render(w, h, opts.boundary)?;
    if !out.report.converged {
        warn!("solver stopped after {} iterations at residual {:.3e}", out.report.iterations, out.report.residual);
    }
    write_image(output, w, h, &out.grids.color)?;
    let grids = &out.grids;
    if dumps.dump_graph {
        write_graph_png(&sibling(output, "graph"), grids, &prep.graph)?;
    }
    if dumps.dump_patches {
        write_patch_map_png(&sibling(output, "patches"), grids)?;
    }
    if dumps.dump_masks {
        write_masks_png(&sibling(output, "masks"), grids)?;
        write_flags_png(&sibling(output, "links"), grids)?;
    }
    if dumps.dump_source {
        write_source_png(&sibling(output, "source"), grids)?;
    }
    info!("rendered {}x{} in {:.1} ms", w, h, ms(out.timings.total()));
    Ok(())
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn format_stats(stats: &SceneStats, t: &Timings, size: (usize, usize)) -> String {
    let counts = [
        ("DCs", stats.diffusion_curves),
        ("PCs", stats.poisson_curves),
        ("GMs", stats.gradient_meshes),
        ("Vs", stats.vertices),
        ("Es", stats.edges),
        ("Ps", stats.patches),
    ];
    let times = [
        ("graph", t.graph),
        ("patches", t.patches),
        ("masks", t.masks),
        ("source", t.source),
        ("solve", t.solve),
        ("total", t.total()),
    ];
    let mut s = String::new();
    let head: Vec<String> = counts
        .iter()
        .map(|(n, _)| format!("{:>6}", format!("#{n}")))
        .chain(times.iter().map(|(n, _)| format!("{n:>10}")))
        .collect();
    s += &head.join(" ");
    s += "\n";
    let row: Vec<String> = counts
        .iter()
        .map(|(_, v)| format!("{v:>6}"))
        .chain(times.iter().map(|(_, d)| format!("{:>10.2}", ms(*d))))
        .collect();
    s += &row.join(" ");
    s += &format!("\n(timings in ms at {}x{})\n", size.0, size.1);
    for (n, v) in counts {
        s += &format!("STAT {n} {v}\n");
    }
    for (n, d) in times {
        s += &format!("STAT {n}_ms {:.3}\n", ms(d));
    }
    s
}

fn cmd_stats(scene_path: &Path, opts: &RenderOpts) -> Result<(), Failure> {
    let scene = load_scene(scene_path, &opts.overrides)?;
    let size = resolve_size(&scene, opts.resolution)?;
    let prep: Prepared = prepare(&scene)?;
    let out = prep.render(size.0, size.1, opts.boundary)?;
    print!("{}", format_stats(&prep.stats(), &out.timings, size));
    Ok(())
}

fn cmd_validate(scene_path: &Path, overrides: &Overrides) -> Result<(), Failure> {
    let text = std::fs::read_to_string(scene_path).map_err(|e| Failure::Input(Error::Io(e)))?;
    let scene = load_scene(scene_path, overrides)?;
    let diags = validate::diagnose(&scene, &text)?;
    for d in &diags {
        println!("warning: {d}");
    }
    println!("{} warning{}", diags.len(), if diags.len() == 1 { "" } else { "s" });
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Render { scene, output, opts, dumps } => cmd_render(&scene, &output, &opts, dumps),
        Command::Stats { scene, opts } => cmd_stats(&scene, &opts),
        Command::Validate { scene, overrides } => cmd_validate(&scene, &overrides),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
