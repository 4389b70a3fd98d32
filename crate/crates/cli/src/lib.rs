//! Batch front end: `segment2d`, `segment3d`, `eval` and `make-fixture`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pics_core::fixtures::{make_fixture, FixtureSpec};
use pics_core::volume::{segment_slice, segment_volume};
use pics_core::{init_from_click, iou, Hyperparameters, ImageStack, KnotVector, Mask, PicsError, Point};
use pics_io::{
    builtin_presets, export_annotation, import_annotation, load_gray, load_mask, load_stack, load_stack_dir, save_gray,
    save_mask, write_summary_csv, write_trace_csv, AnnotationRecord, BitDepth, ImageRef, IoError, PresetCatalogue,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Engine(#[from] PicsError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for anything about files and paths, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(e) if e.is_file_error() => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(IoError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Size the worker pool from `PICS_THREADS` when set.
pub fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("PICS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("PICS_THREADS={v:?} is not a count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "pics", version, about = "Label-free contour segmentation with spline snakes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment one image from a click or a saved annotation.
    Segment2d(Segment2d),
    /// Segment a stack slice by slice, warm-starting each slice from the last.
    Segment3d(Segment3d),
    /// Print the IoU of two masks.
    Eval { a: PathBuf, b: PathBuf },
    /// Write a synthetic test image and its ground-truth mask.
    MakeFixture(MakeFixture),
    /// List the preset catalogue.
    Presets {
        #[arg(long)]
        presets: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Weights {
    /// Named preset from the catalogue.
    #[arg(long, conflicts_with = "weights")]
    pub preset: Option<String>,
    /// Explicit weights `alpha,beta,mu,gamma,sigma`.
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<[f64; 5]>,
    /// Extra catalogue (JSON) merged over the built-in presets.
    #[arg(long)]
    pub presets: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Disable OPI-driven adaptation of the region weight.
    #[arg(long)]
    pub fixed_mu: bool,
}

#[derive(Debug, Args)]
pub struct Segment2d {
    #[arg(long)]
    pub image: PathBuf,
    /// `x,y` or `x,y,radius,knots`.
    #[arg(long, value_parser = parse_click, required_unless_present = "annotation")]
    pub click: Option<ClickSpec>,
    /// Start from the knots (and, absent other flags, the weights) of a saved annotation.
    #[arg(long, conflicts_with = "click")]
    pub annotation: Option<PathBuf>,
    #[command(flatten)]
    pub weights: Weights,
    #[arg(long)]
    pub out_mask: Option<PathBuf>,
    #[arg(long)]
    pub out_annotation: Option<PathBuf>,
    #[arg(long)]
    pub out_trace: Option<PathBuf>,
    /// Reference mask; the IoU is reported and recorded.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Segment3d {
    /// Directory of slices, read in file-name order.
    #[arg(long, conflicts_with = "slices", required_unless_present = "slices")]
    pub stack: Option<PathBuf>,
    /// Explicit comma-separated slice files, in order.
    #[arg(long, value_delimiter = ',')]
    pub slices: Option<Vec<PathBuf>>,
    #[arg(long, value_parser = parse_click)]
    pub click: ClickSpec,
    #[command(flatten)]
    pub weights: Weights,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Directory of reference masks, matched to slices by file-name order.
    #[arg(long)]
    pub truth_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MakeFixture {
    pub name: String,
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// `png` or `pgm`.
    #[arg(long, default_value = "png")]
    pub format: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClickSpec {
    pub x: f64,
    pub y: f64,
    pub radius: Option<f64>,
    pub knots: Option<usize>,
}

fn parse_click(s: &str) -> std::result::Result<ClickSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        [x, y] => Ok(ClickSpec {
            x: num(x)?,
            y: num(y)?,
            radius: None,
            knots: None,
        }),
        [x, y, r, n] => Ok(ClickSpec {
            x: num(x)?,
            y: num(y)?,
            radius: Some(num(r)?),
            knots: Some(n.parse().map_err(|e| format!("{n:?}: {e}"))?),
        }),
        _ => Err("expected x,y or x,y,radius,knots".into()),
    }
}

fn parse_weights(s: &str) -> std::result::Result<[f64; 5], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into()
        .map_err(|_| "expected five weights alpha,beta,mu,gamma,sigma".to_string())
}

impl Weights {
    fn catalogue(&self) -> Result<PresetCatalogue> {
        let mut cat = builtin_presets();
        if let Some(p) = &self.presets {
            cat.merge(PresetCatalogue::load(p)?);
        }
        Ok(cat)
    }

    /// Resolve against `fallback` (library defaults unless an annotation
    /// supplied its own).
    fn resolve(&self, fallback: Hyperparameters<f64>) -> Result<Hyperparameters<f64>> {
        let mut h = match (&self.preset, self.weights) {
            (Some(name), _) => self.catalogue()?.get(name)?.hyperparameters.clone(),
            (None, Some([a, b, m, g, s])) => Hyperparameters {
                alpha: a,
                beta: b,
                mu: m,
                gamma: g,
                sigma: s,
                ..fallback
            },
            (None, None) => fallback,
        };
        if let Some(n) = self.max_iters {
            h.max_iters = n;
        }
        if let Some(lr) = self.learning_rate {
            h.learning_rate = lr;
        }
        if self.fixed_mu {
            h.adaptive_mu = false;
        }
        h.validate()?;
        Ok(h)
    }
}

fn click_init(c: ClickSpec, hyper: &mut Hyperparameters<f64>, w: usize, h: usize) -> Result<KnotVector<f64>> {
    if let Some(r) = c.radius {
        hyper.init_radius = r;
    }
    if let Some(n) = c.knots {
        hyper.n_knots = n;
    }
    Ok(init_from_click(
        Point::new(c.x, c.y),
        hyper.init_radius,
        hyper.n_knots,
        w,
        h,
    )?)
}

fn image_id(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_trace(path: &Path, trace: &pics_core::OptimizationTrace<f64>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_trace_csv(std::io::BufWriter::new(file), trace)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Segment2d(a) => segment2d(a),
        Command::Segment3d(a) => segment3d(a),
        Command::Eval { a, b } => {
            println!("{:.6}", iou(&load_mask(&a)?, &load_mask(&b)?)?);
            Ok(())
        }
        Command::MakeFixture(a) => fixture(a),
        Command::Presets { presets } => {
            let w = Weights {
                preset: None,
                weights: None,
                presets,
                max_iters: None,
                learning_rate: None,
                fixed_mu: false,
            };
            let cat = w.catalogue()?;
            for name in cat.names() {
                let p = cat.get(name)?;
                let [a, b, m, g, s] = p.hyperparameters.weights();
                println!("{name:<22} ({a:e}, {b:e}, {m:e}, {g:e}, {s:e})  {}", p.description);
            }
            Ok(())
        }
    }
}

fn segment2d(a: Segment2d) -> Result<()> {
    let image = load_gray::<f64>(&a.image)?;
    let (w, h) = (image.width(), image.height());
    let (init, hyper) = match (&a.annotation, a.click) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let rec = import_annotation(&text)?;
            if (rec.image.width, rec.image.height) != (w, h) {
                return Err(IoError::DimensionMismatch(format!(
                    "annotation is for {}x{}, image is {w}x{h}",
                    rec.image.width, rec.image.height
                ))
                .into());
            }
            let hyper = a.weights.resolve(rec.hyperparameters.clone())?;
            (rec.knot_vector()?, hyper)
        }
        (None, Some(c)) => {
            let mut hyper = a.weights.resolve(Hyperparameters::default())?;
            let init = click_init(c, &mut hyper, w, h)?;
            (init, hyper)
        }
        (None, None) => return Err(CliError::Usage("either --click or --annotation is required".into())),
    };
    let truth = a.truth.as_deref().map(load_mask).transpose()?;
    let res = segment_slice(&image, init, &hyper, truth.as_ref(), 0, &mut |_, _| {})?;

    if let Some(p) = &a.out_mask {
        save_mask(p, &res.mask)?;
    }
    if let Some(p) = &a.out_trace {
        write_trace(p, &res.trace)?;
    }
    if let Some(p) = &a.out_annotation {
        let rec = AnnotationRecord::new(
            ImageRef {
                id: image_id(&a.image),
                width: w,
                height: h,
            },
            &res.knots,
            hyper.clone(),
            res.final_loss,
            res.iou,
        );
        write_text(p, &export_annotation(&rec)?)?;
    }
    print!(
        "iterations {} stop {:?} loss {:.6e}",
        res.iterations, res.stop, res.final_loss.j_total
    );
    match res.iou {
        Some(v) => println!(" iou {v:.6}"),
        None => println!(),
    }
    Ok(())
}

fn sorted_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension()
                        .and_then(|e| e.to_str())
                        .map(str::to_ascii_lowercase)
                        .as_deref(),
                    Some("png" | "pgm")
                )
        })
        .collect();
    out.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(out)
}

fn segment3d(a: Segment3d) -> Result<()> {
    let (stack, ids): (ImageStack<f64>, Vec<String>) = match (&a.stack, &a.slices) {
        (Some(dir), _) => {
            let ids = sorted_images(dir)?.iter().map(|p| image_id(p)).collect();
            (load_stack_dir(dir)?, ids)
        }
        (None, Some(list)) => (load_stack(list)?, list.iter().map(|p| image_id(p)).collect()),
        (None, None) => return Err(CliError::Usage("either --stack or --slices is required".into())),
    };
    let truths: Option<Vec<Mask>> = match &a.truth_dir {
        Some(dir) => Some(
            sorted_images(dir)?
                .iter()
                .map(load_mask)
                .collect::<std::result::Result<_, _>>()?,
        ),
        None => None,
    };
    let mut hyper = a.weights.resolve(Hyperparameters::default())?;
    click_init(a.click, &mut hyper, stack.width(), stack.height())?;
    let click = Point::new(a.click.x, a.click.y);
    let vol = segment_volume(&stack, click, &hyper, truths.as_deref(), &mut |_, _, _| {})?;

    fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;
    for (s, id) in vol.slices.iter().zip(&ids) {
        let stem = format!("slice_{:03}", s.index);
        save_mask(a.out_dir.join(format!("{stem}_mask.png")), &s.mask)?;
        write_trace(&a.out_dir.join(format!("{stem}_trace.csv")), &s.trace)?;
        let rec = AnnotationRecord::new(
            ImageRef {
                id: id.clone(),
                width: stack.width(),
                height: stack.height(),
            },
            &s.knots,
            hyper.clone(),
            s.final_loss,
            s.iou,
        );
        write_text(&a.out_dir.join(format!("{stem}.json")), &export_annotation(&rec)?)?;
    }
    let summary_path = a.out_dir.join("summary.csv");
    let file = fs::File::create(&summary_path).map_err(|e| io_err(&summary_path, e))?;
    write_summary_csv(std::io::BufWriter::new(file), &vol.summaries())?;
    for s in vol.summaries() {
        println!(
            "slice {} iterations {} stop {:?}{}",
            s.slice,
            s.iterations,
            s.stop,
            s.iou.map(|v| format!(" iou {v:.6}")).unwrap_or_default()
        );
    }
    Ok(())
}

fn fixture(a: MakeFixture) -> Result<()> {
    let ext = match a.format.as_str() {
        "png" | "pgm" => a.format.as_str(),
        other => return Err(CliError::Usage(format!("unknown format {other:?}"))),
    };
    let spec = FixtureSpec {
        size: a.size,
        noise: a.noise,
        seed: a.seed,
    };
    let f = make_fixture::<f64>(&a.name, spec)?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    if f.images.len() == 1 {
        save_gray(a.out.join(format!("image.{ext}")), &f.images[0], BitDepth::Sixteen)?;
        save_mask(a.out.join(format!("truth.{ext}")), &f.truths[0])?;
    } else {
        let (img_dir, truth_dir) = (a.out.join("images"), a.out.join("truths"));
        for d in [&img_dir, &truth_dir] {
            fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
        }
        for (k, (img, truth)) in f.images.iter().zip(&f.truths).enumerate() {
            save_gray(img_dir.join(format!("{k:03}.{ext}")), img, BitDepth::Sixteen)?;
            save_mask(truth_dir.join(format!("{k:03}.{ext}")), truth)?;
        }
    }
    println!("{},{}", f.click.x, f.click.y);
    Ok(())
}
