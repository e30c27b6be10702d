use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pointprompt::dataset::{
    build_dataset, convert_label_maps, pair_by_stem, write_jsonl, BuildOptions, ConvertOptions, PromptTemplate,
};
use pointprompt::degrade::{build_benchmark, BenchmarkMode, BenchmarkParams};
use pointprompt::eval::{evaluate, run_votes, Aggregator, EvalConfig, EvalMode, VoteConfig};
use pointprompt::gateway::{AnswerKeyChat, Gateway, HashedBagEmbedder, Matcher, RetryPolicy};
use pointprompt::geometry::{select_points, BBox, GridLayout, GridSpec, PositionStrategy, RegionAnnotation};
use pointprompt::manifest::{derive_seed, AnnotationManifest, Category, SkipReport};
use pointprompt::raster::{BinaryMask, PixelPoint, Raster, Rgb};
use pointprompt::render::{color_by_name, render_marker, write_rendered, MarkerShape, StyleSpec};
use pointprompt::{Error, Result};

#[derive(Parser, Serialize)]
#[command(name = "pointprompt", version, about = "Point-marker visual prompts: render, degrade, build, evaluate")]
struct Cli {
    /// Global seed; every random choice derives from it and the item ids.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all logical cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Draw point markers for one region onto one image.
    Render(RenderArgs),
    /// Turn a manifest into a degraded benchmark (scribble masks or partial boxes).
    Degrade(DegradeArgs),
    /// Build an instruction dataset (JSONL plus marker images).
    Build(BuildArgs),
    /// Evaluate region recognition against a chat model.
    Eval(EvalArgs),
    /// Vote-based inference over grid points of every box region.
    Vote(VoteArgs),
    /// Convert label-map PNGs into a mask manifest.
    Convert(ConvertArgs),
}

#[derive(Args, Serialize)]
struct StyleArgs {
    /// Marker shape: dot, circle, square or cross.
    #[arg(long, value_parser = parse_shape, default_value = "dot")]
    shape: MarkerShape,
    /// Marker color by name (red, green, blue, purple, yellow, orange, cyan, magenta, white, black).
    #[arg(long, value_parser = parse_color, default_value = "red")]
    color: Rgb,
    /// Marker radius in pixels [default: max(3, ceil(1% of the shorter image side))].
    #[arg(long)]
    radius: Option<u32>,
    /// Ring thickness for circles, bar thickness for crosses.
    #[arg(long, default_value_t = 1)]
    stroke: u32,
}

impl StyleArgs {
    fn spec(&self) -> StyleSpec {
        StyleSpec {
            shape: self.shape,
            color: self.color,
            radius: self.radius,
            stroke: self.stroke,
        }
    }
}

#[derive(Args, Serialize)]
struct GridArgs {
    /// Fan a box out into several markers: `five-corner` or `grid:RxC`.
    #[arg(long = "vote", value_name = "GRID", value_parser = parse_grid)]
    grid: Option<GridLayout>,
    /// Inset of the grid from the box edges, as a fraction of each side.
    #[arg(long, default_value_t = GridSpec::DEFAULT_MARGIN)]
    margin: f64,
}

impl GridArgs {
    fn spec(&self) -> Option<GridSpec> {
        self.grid.map(|layout| GridSpec {
            layout,
            margin_fraction: self.margin,
        })
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PositionArg {
    Center,
    Random,
}

impl From<PositionArg> for PositionStrategy {
    fn from(p: PositionArg) -> Self {
        match p {
            PositionArg::Center => PositionStrategy::Center,
            PositionArg::Random => PositionStrategy::Random,
        }
    }
}

#[derive(Args, Serialize)]
struct RenderArgs {
    #[arg(long)]
    image: PathBuf,
    /// Point region as `X,Y`.
    #[arg(long, value_parser = parse_point, conflicts_with_all = ["bbox", "mask"], required_unless_present_any = ["bbox", "mask"])]
    point: Option<PixelPoint>,
    /// Box region as `X,Y,W,H`.
    #[arg(long = "box", id = "bbox", value_parser = parse_box, conflicts_with = "mask")]
    bbox: Option<BBox>,
    /// Mask region as a PNG (nonzero = foreground).
    #[arg(long)]
    mask: Option<PathBuf>,
    #[command(flatten)]
    style: StyleArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Point placement inside masks.
    #[arg(long, value_enum, default_value = "center")]
    position: PositionArg,
    /// Output PNG [default: <image stem>.rendered.png next to the image]. With
    /// several markers, `.K` is inserted before the extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DegradeMode {
    Scribble,
    Box,
}

#[derive(Args, Serialize)]
struct DegradeArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for manifest.json, masks/ and skips.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: DegradeMode,
    /// Scribble: number of random dilations.
    #[arg(long, default_value_t = 20)]
    iterations: u32,
    /// Scribble: kernel sizes are 2k+1 with k drawn from 0..=N.
    #[arg(long, default_value_t = 5)]
    kernel_size: u32,
    /// Scribble: Gaussian blur sigma.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Scribble: threshold applied after blurring.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Box: target area of the shrunken box relative to the original.
    #[arg(long, default_value_t = 0.1)]
    ratio: f64,
    /// Fail (exit 1) when more than this fraction of regions is skipped.
    #[arg(long, default_value_t = 1.0)]
    max_skip_rate: f64,
}

#[derive(Args, Serialize)]
struct TemplateArgs {
    /// Question template; must contain `{color} {form}` or `{descriptor}`.
    #[arg(long)]
    question: Option<String>,
    /// Answer template; `{category}` is the category name.
    #[arg(long)]
    answer: Option<String>,
}

impl TemplateArgs {
    fn template(&self) -> PromptTemplate {
        let d = PromptTemplate::default();
        PromptTemplate {
            question: self.question.clone().unwrap_or(d.question),
            answer: self.answer.clone().unwrap_or(d.answer),
        }
    }
}

#[derive(Args, Serialize)]
struct BuildArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for dataset.jsonl, images/ and skips.json.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    style: StyleArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_enum, default_value = "center")]
    position: PositionArg,
    #[command(flatten)]
    template: TemplateArgs,
    #[arg(long, default_value_t = 1.0)]
    max_skip_rate: f64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MatcherArg {
    Token,
    Embedding,
}

#[derive(Args, Serialize)]
struct BackendArgs {
    /// Answer-key JSON (request id -> text) used instead of a live model.
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Make the mock answer summary prompts with the last listed response.
    #[arg(long, requires = "mock")]
    echo_summaries: bool,
    /// Use the offline hashed bag-of-words embedder instead of EMBED_URL.
    #[arg(long)]
    embed_mock: bool,
    /// How responses are mapped onto categories.
    #[arg(long, value_enum, default_value = "token")]
    matcher: MatcherArg,
    /// Maximum concurrent model requests.
    #[arg(long, default_value_t = 8)]
    max_in_flight: usize,
    /// Retries per request for timeouts, 429 and 5xx.
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// Per-attempt timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

impl BackendArgs {
    fn gateway(&self) -> Result<Gateway> {
        let gw = match &self.mock {
            Some(path) => Gateway::new(Arc::new(AnswerKeyChat::from_file(path)?.with_echo_summaries(self.echo_summaries))),
            None => {
                let policy = RetryPolicy {
                    max_retries: self.retries,
                    timeout: std::time::Duration::from_secs(self.timeout_secs),
                    ..RetryPolicy::default()
                };
                Gateway::from_env(policy)?
            }
        };
        let gw = if self.embed_mock {
            gw.with_embedder(Arc::new(HashedBagEmbedder::default()))
        } else {
            gw
        };
        Ok(gw.with_max_in_flight(self.max_in_flight))
    }

    fn matcher(&self) -> Matcher {
        match self.matcher {
            MatcherArg::Token => Matcher::TokenOverlap,
            MatcherArg::Embedding => Matcher::Embedding,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum EvalModeArg {
    /// mIoU of predicted labels painted over region masks.
    Seg,
    /// Exact category accuracy on box regions.
    Box,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum AggregatorArg {
    Summarize,
    Majority,
}

impl From<AggregatorArg> for Aggregator {
    fn from(a: AggregatorArg) -> Self {
        match a {
            AggregatorArg::Summarize => Aggregator::Summarize,
            AggregatorArg::Majority => Aggregator::Majority,
        }
    }
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for report.json and report.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: EvalModeArg,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    style: StyleArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Aggregator for `--vote`.
    #[arg(long, value_enum, default_value = "summarize")]
    aggregator: AggregatorArg,
    #[arg(long, value_enum, default_value = "center")]
    position: PositionArg,
    /// Draw the region outline instead of a point marker.
    #[arg(long)]
    no_gal: bool,
    #[command(flatten)]
    template: TemplateArgs,
    #[arg(long, default_value_t = 1.0)]
    max_skip_rate: f64,
}

#[derive(Args, Serialize)]
struct VoteArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for votes.jsonl and skips.json.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    style: StyleArgs,
    /// Grid: `five-corner` or `grid:RxC`.
    #[arg(long, value_parser = parse_grid, default_value = "five-corner")]
    grid: GridLayout,
    #[arg(long, default_value_t = GridSpec::DEFAULT_MARGIN)]
    margin: f64,
    #[arg(long, value_enum, default_value = "summarize")]
    aggregator: AggregatorArg,
    #[command(flatten)]
    template: TemplateArgs,
    #[arg(long, default_value_t = 1.0)]
    max_skip_rate: f64,
}

#[derive(Args, Serialize)]
struct ConvertArgs {
    /// Directory of source images (`<stem>.png`).
    #[arg(long)]
    images: PathBuf,
    /// Directory of label maps with matching stems.
    #[arg(long)]
    labels: PathBuf,
    /// Categories: JSON list of {id, name}, or a text file with one name per line (id = line number from 0).
    #[arg(long)]
    categories: PathBuf,
    /// Output directory for manifest.json, masks/ and skips.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "converted")]
    name: String,
    /// Label values that never become regions.
    #[arg(long, value_delimiter = ',', default_value = "255")]
    ignore: Vec<u16>,
    /// Drop components smaller than this many pixels.
    #[arg(long, default_value_t = 1)]
    min_area: usize,
}

fn parse_shape(s: &str) -> std::result::Result<MarkerShape, String> {
    MarkerShape::from_name(s).ok_or_else(|| format!("unknown shape {s:?} (dot, circle, square, cross)"))
}

fn parse_color(s: &str) -> std::result::Result<Rgb, String> {
    color_by_name(s).ok_or_else(|| format!("unknown color name {s:?}"))
}

fn parse_ints<const N: usize>(s: &str) -> std::result::Result<[i64; N], String> {
    let parts: Vec<i64> = s
        .split(',')
        .map(|p| p.trim().parse::<i64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("expected {N} comma-separated integers, got {s:?}"))
}

fn parse_point(s: &str) -> std::result::Result<PixelPoint, String> {
    let [x, y] = parse_ints::<2>(s)?;
    let conv = |v: i64| i32::try_from(v).map_err(|e| e.to_string());
    Ok(PixelPoint::new(conv(x)?, conv(y)?))
}

fn parse_box(s: &str) -> std::result::Result<BBox, String> {
    let v = parse_ints::<4>(s)?;
    let conv = |v: i64| u32::try_from(v).map_err(|_| format!("box values must be non-negative, got {v}"));
    Ok(BBox::new(conv(v[0])?, conv(v[1])?, conv(v[2])?, conv(v[3])?))
}

fn parse_grid(s: &str) -> std::result::Result<GridLayout, String> {
    if s == "five-corner" {
        return Ok(GridLayout::FiveCorner);
    }
    let dims = s
        .strip_prefix("grid:")
        .and_then(|d| d.split_once('x'))
        .ok_or_else(|| format!("expected five-corner or grid:RxC, got {s:?}"))?;
    let rows = dims.0.parse().map_err(|e| format!("rows: {e}"))?;
    let cols = dims.1.parse().map_err(|e| format!("cols: {e}"))?;
    Ok(GridLayout::UniformGrid { rows, cols })
}

fn write_skips(dir: &Path, skips: &SkipReport) -> Result<()> {
    skips.save(dir.join("skips.json"))
}

fn check_skip_rate(done: usize, skips: &SkipReport, max: f64) -> Result<()> {
    let total = done + skips.len();
    let rate = if total == 0 { 0.0 } else { skips.len() as f64 / total as f64 };
    eprintln!("skipped {} of {total} ({:.1}%)", skips.len(), rate * 100.0);
    for s in skips.skipped.iter().take(10) {
        eprintln!("  {}{}: {}", s.sample_id, s.region_id.as_deref().map(|r| format!("/{r}")).unwrap_or_default(), s.reason);
    }
    if rate > max {
        return Err(Error::SkipRateExceeded { rate, max });
    }
    Ok(())
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn numbered(path: &Path, k: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "png".into());
    path.with_file_name(format!("{stem}.{k}.{ext}"))
}

fn cmd_render(cli: &Cli, a: &RenderArgs) -> Result<()> {
    let image = Raster::load_png(&a.image)?;
    let (w, h) = image.dimensions();
    let region = match (&a.point, &a.bbox, &a.mask) {
        (Some(p), _, _) => RegionAnnotation::Point(*p),
        (_, Some(b), _) => RegionAnnotation::Box(*b),
        (_, _, Some(m)) => RegionAnnotation::Mask(BinaryMask::load_png(m)?),
        _ => return Err(Error::InvalidConfig("one of --point, --box or --mask is required".into())),
    };
    region.validate_in(w, h)?;
    let style = a.style.spec().resolve(w, h)?;
    let grid = a.grid.spec();
    if grid.is_some() && !matches!(region, RegionAnnotation::Box(_)) {
        return Err(Error::InvalidConfig("--vote needs --box".into()));
    }
    let seed = derive_seed(cli.seed, &["render", &a.image.to_string_lossy()]);
    let points = select_points(&region, grid.as_ref(), a.position.into(), seed)?;
    let base = a.out.clone().unwrap_or_else(|| {
        let stem = a.image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        a.image.with_file_name(format!("{stem}.rendered.png"))
    });
    for (k, &p) in points.iter().enumerate() {
        let path = if grid.is_some() { numbered(&base, k) } else { base.clone() };
        write_rendered(&path, &render_marker(&image, p, &style)?, p, &style)?;
        println!("{} ({}, {})", path.display(), p.x, p.y);
    }
    Ok(())
}

fn cmd_degrade(cli: &Cli, a: &DegradeArgs) -> Result<()> {
    let manifest = AnnotationManifest::load(&a.manifest)?;
    let mode = match a.mode {
        DegradeMode::Scribble => BenchmarkMode::ScribbleMask,
        DegradeMode::Box => BenchmarkMode::PartialBox,
    };
    let mut params = BenchmarkParams::new(mode, cli.seed);
    params.scribble.iterations = a.iterations;
    params.scribble.kernel_size_cap = a.kernel_size;
    params.scribble.sigma = a.sigma;
    params.scribble.threshold = a.threshold;
    params.partial_box.target_area_ratio = a.ratio;
    create_dir(&a.out)?;
    let (out, skips) = build_benchmark(&manifest, &manifest_dir(&a.manifest), &a.out, &params, cli.jobs)?;
    out.save(a.out.join("manifest.json"))?;
    write_skips(&a.out, &skips)?;
    println!("{} regions written to {}", out.region_count(), a.out.join("manifest.json").display());
    check_skip_rate(out.region_count(), &skips, a.max_skip_rate)
}

fn cmd_build(cli: &Cli, a: &BuildArgs) -> Result<()> {
    let manifest = AnnotationManifest::load(&a.manifest)?;
    let opts = BuildOptions {
        style: a.style.spec(),
        template: a.template.template(),
        grid: a.grid.spec(),
        position: a.position.into(),
        seed: cli.seed,
        jobs: cli.jobs,
    };
    create_dir(&a.out)?;
    let built = build_dataset(&manifest, &manifest_dir(&a.manifest), &a.out, &opts)?;
    write_jsonl(a.out.join("dataset.jsonl"), &built.samples)?;
    write_skips(&a.out, &built.skips)?;
    println!("{} samples written to {}", built.samples.len(), a.out.join("dataset.jsonl").display());
    check_skip_rate(built.samples.len(), &built.skips, a.max_skip_rate)
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let manifest = AnnotationManifest::load(&a.manifest)?;
    let mode = match a.mode {
        EvalModeArg::Seg => EvalMode::SegProxy,
        EvalModeArg::Box => EvalMode::BoxAccuracy,
    };
    let cfg = EvalConfig {
        mode,
        template: a.template.template(),
        style: a.style.spec(),
        matcher: a.backend.matcher(),
        vote: a.grid.spec().map(|grid| VoteConfig {
            grid,
            aggregator: a.aggregator.into(),
        }),
        position: a.position.into(),
        gal_enabled: !a.no_gal,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    cfg.validate()?;
    let gateway = a.backend.gateway()?;
    let report = evaluate(&manifest, &manifest_dir(&a.manifest), &cfg, &gateway)?;
    report.write(&a.out)?;
    print!("{}", report.summary_table());
    check_skip_rate(report.n_samples, &report.skips, a.max_skip_rate)
}

fn cmd_vote(cli: &Cli, a: &VoteArgs) -> Result<()> {
    let manifest = AnnotationManifest::load(&a.manifest)?;
    let cfg = EvalConfig {
        style: a.style.spec(),
        template: a.template.template(),
        matcher: a.backend.matcher(),
        vote: Some(VoteConfig {
            grid: GridSpec {
                layout: a.grid,
                margin_fraction: a.margin,
            },
            aggregator: a.aggregator.into(),
        }),
        seed: cli.seed,
        jobs: cli.jobs,
        ..EvalConfig::new(EvalMode::BoxAccuracy)
    };
    cfg.validate()?;
    let gateway = a.backend.gateway()?;
    let (sessions, skips) = run_votes(&manifest, &manifest_dir(&a.manifest), &cfg, &gateway)?;
    create_dir(&a.out)?;
    let path = a.out.join("votes.jsonl");
    let mut body = String::new();
    for s in &sessions {
        body.push_str(&serde_json::to_string(s)?);
        body.push('\n');
        println!("{}/{}\t{}", s.sample_id, s.region_id, s.predicted_category);
    }
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    write_skips(&a.out, &skips)?;
    check_skip_rate(sessions.len(), &skips, a.max_skip_rate)
}

fn load_categories(path: &Path) -> Result<Vec<Category>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        return Ok(serde_json::from_str(&text)?);
    }
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| Category {
            id: i as u32,
            name: l.trim().to_string(),
        })
        .collect())
}

fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    let categories = load_categories(&a.categories)?;
    let pairs = pair_by_stem(&a.images, &a.labels)?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no image/label pairs in {} and {}",
            a.images.display(),
            a.labels.display()
        )));
    }
    let opts = ConvertOptions {
        dataset_name: a.name.clone(),
        ignore: a.ignore.clone(),
        min_area: a.min_area,
    };
    let (manifest, skips) = convert_label_maps(&pairs, categories, &a.out, &opts)?;
    manifest.save(a.out.join("manifest.json"))?;
    write_skips(&a.out, &skips)?;
    println!(
        "{} samples, {} regions written to {}",
        manifest.samples.len(),
        manifest.region_count(),
        a.out.join("manifest.json").display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    log::info!("config {}", serde_json::to_string(cli)?);
    match &cli.command {
        Command::Render(a) => cmd_render(cli, a),
        Command::Degrade(a) => cmd_degrade(cli, a),
        Command::Build(a) => cmd_build(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Vote(a) => cmd_vote(cli, a),
        Command::Convert(a) => cmd_convert(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
