use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use remodel_core::deid::{deidentify_with, remodel_transform, DeidMethod, DeidParams, PrecomputedRemodel, Remodeler};
use remodel_core::eval::{
    generate_phantom, render_face, run_identification, run_segmentation, IdConfig, PhantomParams, SegConfig, View,
};
use remodel_core::hull::{convex_hull, voxelize_hull, TriangleSelection};
use remodel_core::io::{read_volume, write_off, write_volume};
use remodel_core::surface::{sample_surface_points, surface_representation, Sampling, SurfaceParams};
use remodel_core::transform::build_pyramid;
use remodel_core::{Seed, Volume};

#[derive(Parser)]
#[command(name = "remodel", version, about = "Remodeling-based de-identification of volumetric head scans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the surface probability map of a scan.
    Surface(SurfaceCmd),
    /// Build the convex hull of a scan's surface; writes an OFF mesh and a hull mask.
    Hull(HullCmd),
    /// De-identify a scan.
    Deid(DeidCmd),
    /// Generate a synthetic head phantom and its brain mask.
    Phantom(PhantomCmd),
    /// Write the multi-scale pyramid of a scan's privacy transform.
    Pyramid(PyramidCmd),
    /// Render a depth-shaded view of a volume as PGM.
    Render(RenderCmd),
    /// Run the five-option identification and rank-retrieval attack.
    EvalId(EvalIdCmd),
    /// Compare segmentations of original and de-identified phantoms.
    EvalSeg(EvalSegCmd),
    /// Time the pipeline stages on a phantom.
    Bench(BenchCmd),
}

#[derive(Args)]
struct SurfaceOpts {
    /// Number of random rotations.
    #[arg(long, default_value_t = 64)]
    rotations: usize,
    /// Binarization threshold; Otsu over nonzero voxels when omitted.
    #[arg(long)]
    delta: Option<f64>,
    /// Upper bound on sampled surface points.
    #[arg(long, default_value_t = 10_000)]
    point_cap: usize,
}

impl SurfaceOpts {
    fn params(&self, seed: u64) -> SurfaceParams {
        SurfaceParams {
            rotations: self.rotations,
            delta: self.delta,
            seed: Seed(seed),
            point_cap: self.point_cap,
            sampling: Sampling::Bernoulli,
        }
    }
}

#[derive(Args)]
struct SurfaceCmd {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    surface: SurfaceOpts,
}

#[derive(Args)]
struct HullCmd {
    #[arg(long = "in")]
    input: PathBuf,
    /// Hull mask output (VOL1).
    #[arg(long)]
    out: PathBuf,
    /// Hull mesh output (ASCII OFF).
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clipping triangles, or "all".
    #[arg(long, default_value = "100")]
    triangles: String,
    #[command(flatten)]
    surface: SurfaceOpts,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Remodel,
    Quickshear,
    Skullstrip,
    Black,
    Original,
}

impl From<MethodArg> for DeidMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Remodel => DeidMethod::Remodel,
            MethodArg::Quickshear => DeidMethod::QuickshearLike,
            MethodArg::Skullstrip => DeidMethod::SkullStrip,
            MethodArg::Black => DeidMethod::Black,
            MethodArg::Original => DeidMethod::Original,
        }
    }
}

#[derive(Args)]
struct DeidOpts {
    /// Clipping triangles, or "all".
    #[arg(long, default_value = "100")]
    triangles: String,
    /// Anterior padding of the shear plane, in voxels.
    #[arg(long, default_value_t = 2.0)]
    pad: f64,
    #[command(flatten)]
    surface: SurfaceOpts,
}

impl DeidOpts {
    fn params(&self) -> Result<DeidParams> {
        Ok(DeidParams {
            rotations: self.surface.rotations,
            delta: self.surface.delta,
            point_cap: self.surface.point_cap,
            triangles: match parse_triangles(&self.triangles)? {
                TriangleSelection::All => None,
                TriangleSelection::Count(n) => Some(n),
            },
            shear_pad: self.pad,
            ..Default::default()
        })
    }
}

#[derive(Args)]
struct DeidCmd {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    brain: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the privacy transform next to the output.
    #[arg(long)]
    emit_gamma: bool,
    /// Use this externally generated volume in place of the reference remodeler.
    #[arg(long)]
    generator_output: Option<PathBuf>,
    #[command(flatten)]
    opts: DeidOpts,
}

#[derive(Args)]
struct PhantomOpts {
    #[arg(long, default_value_t = 64)]
    side: usize,
    /// Relative per-subject head-size variation, 0 for equal head sizes.
    #[arg(long, default_value_t = 0.0)]
    head_size_jitter: f64,
}

impl PhantomOpts {
    fn params(&self) -> PhantomParams {
        PhantomParams { head_size_jitter: self.head_size_jitter, ..PhantomParams::for_side(self.side) }
    }
}

#[derive(Args)]
struct PhantomCmd {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scan output.
    #[arg(long)]
    out: PathBuf,
    /// Brain mask output.
    #[arg(long)]
    brain: PathBuf,
    #[command(flatten)]
    phantom: PhantomOpts,
}

#[derive(Args)]
struct PyramidCmd {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    brain: PathBuf,
    /// Side of the coarsest level.
    #[arg(long, default_value_t = 4)]
    min_side: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; level k (1 = coarsest) is written as <prefix>.L<k>.{hull,brain,brainint}.vol.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: DeidOpts,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewArg {
    Frontal,
    Left,
    Right,
}

#[derive(Args)]
struct RenderCmd {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "frontal")]
    view: ViewArg,
    #[arg(long, default_value_t = 0.3)]
    delta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalIdCmd {
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "original,black,skullstrip,quickshear,remodel")]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 100)]
    subjects: usize,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    phantom: PhantomOpts,
}

#[derive(Args)]
struct EvalSegCmd {
    #[arg(long, value_delimiter = ',', default_value = "original,black,skullstrip,quickshear,remodel")]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 10)]
    subjects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    phantom: PhantomOpts,
}

#[derive(Args)]
struct BenchCmd {
    #[arg(long, default_value_t = 64)]
    side: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_triangles(s: &str) -> Result<TriangleSelection> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(TriangleSelection::All);
    }
    let n: usize = s.parse().with_context(|| format!("--triangles expects a count or \"all\", got {s:?}"))?;
    Ok(TriangleSelection::Count(n))
}

fn read(path: &Path) -> Result<Volume> {
    read_volume(path).with_context(|| format!("reading {}", path.display()))
}

fn write(v: &Volume, path: &Path) -> Result<()> {
    write_volume(v, path).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

/// `dir/name.vol` becomes `dir/name`, the prefix for companion files.
fn prefix_of(path: &Path) -> PathBuf {
    match path.extension() {
        Some(e) if e == "vol" => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn surface(cmd: SurfaceCmd) -> Result<()> {
    let x = read(&cmd.input)?;
    let z = surface_representation(&x, &cmd.surface.params(cmd.seed))?;
    write(&z, &cmd.out)
}

fn hull(cmd: HullCmd) -> Result<()> {
    let x = read(&cmd.input)?;
    let side = x.side()?;
    let p = cmd.surface.params(cmd.seed);
    let z = surface_representation(&x, &p)?;
    let seed = Seed(cmd.seed);
    let points = sample_surface_points(&z, p.sampling, seed.derive_tag("points"), p.point_cap)?;
    let mesh = convex_hull(&points)?;
    let mask = voxelize_hull(&mesh, side, parse_triangles(&cmd.triangles)?, seed.derive_tag("clip"))?;
    let f = File::create(&cmd.mesh).with_context(|| format!("creating {}", cmd.mesh.display()))?;
    write_off(&mesh, BufWriter::new(f))?;
    write(&mask, &cmd.out)?;
    eprintln!(
        "{} points, {} hull vertices, {} triangles, {} hull voxels",
        points.len(),
        mesh.vertices().len(),
        mesh.triangles().len(),
        mask.count_set()
    );
    Ok(())
}

fn deid(cmd: DeidCmd) -> Result<()> {
    let x = read(&cmd.input)?;
    let b = read(&cmd.brain)?;
    let method = DeidMethod::from(cmd.method);
    let params = cmd.opts.params()?;
    let seed = Seed(cmd.seed);
    let generator: Option<Box<dyn Remodeler>> = match &cmd.generator_output {
        Some(p) => Some(Box::new(PrecomputedRemodel(read(p)?))),
        None => None,
    };
    let remodeler: &dyn Remodeler = generator.as_deref().unwrap_or(&params.remodel);
    if cmd.generator_output.is_some() && method != DeidMethod::Remodel {
        bail!("--generator-output only applies to --method remodel");
    }

    let y = if method == DeidMethod::Remodel && cmd.emit_gamma {
        let g = params.transform(&x, &b, seed)?;
        let prefix = prefix_of(&cmd.out);
        g.write(&prefix).with_context(|| format!("writing transform next to {}", prefix.display()))?;
        remodel_transform(&x, &g, remodeler, seed)?
    } else {
        if cmd.emit_gamma {
            bail!("--emit-gamma only applies to --method remodel");
        }
        deidentify_with(&x, &b, method, &params, seed, remodeler)?
    };
    write(&y, &cmd.out)
}

fn phantom(cmd: PhantomCmd) -> Result<()> {
    let p = generate_phantom(Seed(cmd.seed), &cmd.phantom.params())?;
    write(&p.scan, &cmd.out)?;
    write(&p.brain, &cmd.brain)?;
    println!("{}", serde_json::to_string(&p.identity)?);
    Ok(())
}

fn pyramid(cmd: PyramidCmd) -> Result<()> {
    let x = read(&cmd.input)?;
    let b = read(&cmd.brain)?;
    let seed = Seed(cmd.seed);
    let g = cmd.opts.params()?.transform(&x, &b, seed)?;
    let pyr = build_pyramid(&g, cmd.min_side, seed.derive_tag("pyramid"))?;
    pyr.write(&cmd.out)?;
    println!("{} levels, sides {:?}", pyr.len(), pyr.sides());
    Ok(())
}

fn render(cmd: RenderCmd) -> Result<()> {
    let x = read(&cmd.input)?;
    let view = match cmd.view {
        ViewArg::Frontal => View::Frontal,
        ViewArg::Left => View::Left,
        ViewArg::Right => View::Right,
    };
    let img = render_face(&x, cmd.delta, view)?;
    std::fs::write(&cmd.out, img.to_pgm()).with_context(|| format!("writing {}", cmd.out.display()))
}

fn methods(list: &[MethodArg]) -> Vec<DeidMethod> {
    list.iter().map(|&m| m.into()).collect()
}

fn eval_id(cmd: EvalIdCmd) -> Result<()> {
    let cfg = IdConfig {
        subjects: cmd.subjects,
        trials: cmd.trials,
        seed: cmd.seed,
        methods: methods(&cmd.methods),
        phantom: cmd.phantom.params(),
        ..Default::default()
    };
    let report = run_identification(&cfg)?;
    println!("{:<11} {:>7} {:>15} {:>9} {:>8}", "method", "rate", "bootstrap", "p(20%)", "rank KS");
    for m in &report.methods {
        println!(
            "{:<11} {:>7.3} {:>7.3} ± {:<5.3} {:>9.4} {:>8.4}",
            m.method.name(),
            m.rate,
            m.bootstrap_mean,
            m.bootstrap_sd,
            m.chance_p,
            m.rank_ks
        );
    }
    write_json(&report, &cmd.out)
}

fn eval_seg(cmd: EvalSegCmd) -> Result<()> {
    let cfg = SegConfig {
        subjects: cmd.subjects,
        seed: cmd.seed,
        methods: methods(&cmd.methods),
        phantom: cmd.phantom.params(),
        ..Default::default()
    };
    let report = run_segmentation(&cfg)?;
    println!("{:<11} {:<17} {:<10} {:>6} {:>6}", "method", "mode", "class", "dice", "iou");
    for r in &report.rows {
        println!(
            "{:<11} {:<17} {:<10} {:>6.3} {:>6.3}",
            r.method.name(),
            serde_json::to_value(r.mode)?.as_str().unwrap_or_default(),
            serde_json::to_value(r.class)?.as_str().unwrap_or_default(),
            r.dice_mean,
            r.iou_mean
        );
    }
    write_json(&report, &cmd.out)
}

fn bench(cmd: BenchCmd) -> Result<()> {
    if cmd.repeats == 0 {
        bail!("--repeats must be positive");
    }
    let p = generate_phantom(Seed(cmd.seed), &PhantomParams::for_side(cmd.side))?;
    let params = DeidParams::default();
    let sp = params.surface(Seed(cmd.seed));
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut time = |name: &str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        let mut samples = Vec::new();
        for _ in 0..cmd.repeats {
            let t = Instant::now();
            f()?;
            samples.push(t.elapsed().as_secs_f64() * 1e3);
        }
        rows.push((name.to_string(), samples));
        Ok(())
    };

    let z = surface_representation(&p.scan, &sp)?;
    let points = sample_surface_points(&z, sp.sampling, sp.seed.derive_tag("points"), sp.point_cap)?;
    let mesh = convex_hull(&points)?;
    time("surface", &mut || surface_representation(&p.scan, &sp).map(drop).map_err(Into::into))?;
    time("sample", &mut || {
        sample_surface_points(&z, sp.sampling, sp.seed.derive_tag("points"), sp.point_cap).map(drop).map_err(Into::into)
    })?;
    time("hull", &mut || convex_hull(&points).map(drop).map_err(Into::into))?;
    time("voxelize", &mut || {
        voxelize_hull(&mesh, cmd.side, params.selection(), sp.seed.derive_tag("clip")).map(drop).map_err(Into::into)
    })?;
    for m in DeidMethod::ALL {
        time(&format!("deid {m}"), &mut || {
            remodel_core::deidentify(&p.scan, &p.brain, m, &params, Seed(cmd.seed)).map(drop).map_err(Into::into)
        })?;
    }

    println!("side {}, {} repeats, {} surface points, {} hull triangles", cmd.side, cmd.repeats, points.len(), mesh.triangles().len());
    println!("{:<18} {:>10} {:>10} {:>10}", "stage", "mean ms", "min ms", "max ms");
    for (name, s) in rows {
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        let max = s.iter().copied().fold(0.0, f64::max);
        println!("{name:<18} {mean:>10.2} {min:>10.2} {max:>10.2}");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Surface(c) => surface(c),
        Command::Hull(c) => hull(c),
        Command::Deid(c) => deid(c),
        Command::Phantom(c) => phantom(c),
        Command::Pyramid(c) => pyramid(c),
        Command::Render(c) => render(c),
        Command::EvalId(c) => eval_id(c),
        Command::EvalSeg(c) => eval_seg(c),
        Command::Bench(c) => bench(c),
    }
}
