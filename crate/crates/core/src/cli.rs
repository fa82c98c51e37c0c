//! The `lac` command-line tool.
//!
//! Every command validates all of its inputs and computes all of its outputs
//! before writing anything. Outputs are first written to temporary files next
//! to their destinations and then renamed into place. Each artifact carries the
//! hash of the run configuration, and the configuration is written beside it.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::gabor::{self, Backend, FilterBank};
use crate::graph::{FaceCode, FaceGraph};
use crate::imageio::{self, GrayImage};
use crate::nmds::{self, Ties};
use crate::session::{PlanTrials, Session, SessionPlan, TriadSession};
use crate::similarity::{self, MatrixKind, PixelFace, SimilarityMatrix};
use crate::stats::{self, Dataset, Response, Statistic, TriadTrial};
use crate::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "lac", version, about = "Gabor-jet face codes, face similarity and judgment statistics")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract a face code (graph plus jets) for every image.
    Code(CodeArgs),
    /// Pairwise similarity matrix from face codes or from pixel patches.
    Sim(SimArgs),
    /// Generate a triad or rating trial plan.
    Triads(TriadsArgs),
    /// Answer the triads of a plan or session from a similarity matrix.
    Predict(PredictArgs),
    /// Concordance between triad sessions, and with a model.
    Concord(ConcordArgs),
    /// Spearman correlation between the off-diagonal values of two matrices.
    Spearman(SpearmanArgs),
    /// Subject-level bootstrap standard errors.
    Bootstrap(BootstrapArgs),
    /// Nonmetric multidimensional scaling of a matrix.
    Mds(MdsArgs),
    /// Render the real part and amplitude of the filter responses as PGM.
    Render(RenderArgs),
    /// Validate session files and summarize them.
    IngestSession(IngestArgs),
}

#[derive(Args, Debug)]
struct FaceArgs {
    /// Image files, or directories of .pgm/.png images. The file stem is the
    /// face id.
    #[arg(long, num_args = 1.., value_name = "PATH")]
    images: Vec<PathBuf>,
    /// Directory holding `<id>.json` graphs; without it every face uses the
    /// regular grid.
    #[arg(long, value_name = "DIR")]
    graphs: Option<PathBuf>,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long)]
    grid_rows: Option<usize>,
    #[arg(long)]
    grid_cols: Option<usize>,
    #[arg(long)]
    grid_spacing: Option<f64>,
    /// Top-left grid node as `X,Y`.
    #[arg(long, value_parser = parse_point)]
    grid_origin: Option<(f64, f64)>,
}

#[derive(Args, Debug)]
struct CodeArgs {
    #[command(flatten)]
    faces: FaceArgs,
    /// Output directory for `<id>.code.json` files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Measure {
    Lac,
    Pixel,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, value_enum, default_value = "lac")]
    measure: Measure,
    /// Face-code files or directories of `*.code.json` (lac measure).
    #[arg(long, num_args = 1.., value_name = "PATH")]
    codes: Vec<PathBuf>,
    #[command(flatten)]
    faces: FaceArgs,
    /// Odd patch side for the pixel measure.
    #[arg(long, value_parser = parse_odd)]
    patch: Option<usize>,
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TaskArg {
    Triad,
    Rating,
}

#[derive(Args, Debug)]
struct TriadsArgs {
    #[arg(long, value_enum, default_value = "triad")]
    task: TaskArg,
    /// Comma-separated face ids.
    #[arg(long, value_delimiter = ',', conflicts_with = "matrix")]
    ids: Vec<String>,
    /// Take the face ids from a matrix CSV.
    #[arg(long, value_name = "CSV")]
    matrix: Option<PathBuf>,
    #[arg(long, default_value = "subject")]
    subject: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Leave out catch triads.
    #[arg(long)]
    no_catch: bool,
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long, value_name = "CSV")]
    matrix: PathBuf,
    /// Triad plan or triad session; catch triads are skipped.
    #[arg(long, value_name = "JSON")]
    trials: PathBuf,
    #[arg(long, default_value = "model")]
    subject: String,
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConcordArgs {
    /// Triad session files.
    #[arg(required = true, value_name = "SESSION")]
    sessions: Vec<PathBuf>,
    /// Model session to compare with every subject.
    #[arg(long, value_name = "JSON")]
    model: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long, value_name = "JSON")]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpearmanArgs {
    #[arg(long, value_name = "CSV")]
    x: PathBuf,
    #[arg(long, value_name = "CSV")]
    y: PathBuf,
    #[arg(long, value_name = "JSON")]
    json: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum StatisticArg {
    All,
    Mean,
    HumanHuman,
    ModelHuman,
    Difference,
}

#[derive(Args, Debug)]
struct BootstrapArgs {
    /// Triad session files (one per subject).
    #[arg(value_name = "SESSION")]
    sessions: Vec<PathBuf>,
    #[arg(long, value_name = "JSON")]
    model: Option<PathBuf>,
    /// Plain values, whitespace or comma separated, for the mean statistic.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["sessions", "model"])]
    values: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    statistic: StatisticArg,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "JSON")]
    json: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TiesArg {
    Primary,
    Secondary,
}

#[derive(Args, Debug)]
struct MdsArgs {
    #[arg(long, value_name = "CSV")]
    matrix: PathBuf,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    ties: Option<TiesArg>,
    /// Solution JSON.
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
    /// Two-dimensional principal-axes projection as `id,x,y` CSV.
    #[arg(long, value_name = "CSV")]
    projection: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BackendArg {
    Direct,
    Fft,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
    /// Channels to render (frequency-major index).
    #[arg(long, value_delimiter = ',', default_value = "0,6,12")]
    channels: Vec<usize>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Also write one image with a kernel, real-part and amplitude row.
    #[arg(long)]
    montage: bool,
    /// Write every kernel tap as CSV.
    #[arg(long, value_name = "CSV")]
    dump_kernels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(required = true, value_name = "SESSION")]
    sessions: Vec<PathBuf>,
    /// Write the pooled triad index, or the averaged normalized rating
    /// matrix, as CSV.
    #[arg(long, value_name = "CSV")]
    index_out: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    json: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(x)?, p(y)?))
}

fn parse_odd(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v % 2 == 0 {
        return Err(format!("patch size must be odd, got {v}"));
    }
    Ok(v)
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Runs the tool on the process arguments and returns the exit code.
pub fn main() -> i32 {
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    run(std::env::args_os(), &mut out, &mut err)
}

/// Runs the tool on `args` (program name first), writing reports to `out`
/// and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
                return EXIT_USAGE;
            }
            let _ = out.write_all(rendered.as_bytes());
            return 0;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> CliResult {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Code(a) => code(&mut config, a, out),
        Command::Sim(a) => sim(&mut config, a, out),
        Command::Triads(a) => triads(&mut config, a, out),
        Command::Predict(a) => predict(&mut config, a, out),
        Command::Concord(a) => concord(&mut config, a, out),
        Command::Spearman(a) => spearman(&mut config, a, out),
        Command::Bootstrap(a) => bootstrap(&mut config, a, out),
        Command::Mds(a) => mds(&mut config, a, out),
        Command::Render(a) => render(&mut config, a, out),
        Command::IngestSession(a) => ingest(&mut config, a, out),
    }
}

/// Validates the final configuration and returns its hash.
fn finalize(config: &RunConfig) -> CliResult<String> {
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config.hash())
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) -> CliResult {
    out.write_all(text.as_ref().as_bytes()).map_err(|e| Failure::Data(Error::io("<stdout>", e)))
}

/// Files to be written together.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    /// Adds the configuration sidecar `<path>.config.json`.
    fn add_config(&mut self, artifact: &Path, config: &RunConfig) {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".config.json");
        self.add(PathBuf::from(name), config.sidecar());
    }

    /// Writes every file to a temporary sibling, then renames them all into
    /// place. Nothing is renamed unless every temporary write succeeded.
    fn commit(self) -> CliResult {
        let mut staged: Vec<(PathBuf, &Path)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, &Path)]| staged.iter().for_each(|(t, _)| drop(std::fs::remove_file(t)));
        for (path, bytes) in &self.files {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = path.file_name().ok_or_else(|| usage(format!("{} is not a file path", path.display())))?;
            let mut tmp_name = OsString::from(".");
            tmp_name.push(name);
            tmp_name.push(".tmp");
            let tmp = dir.join(tmp_name);
            let written = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&tmp, bytes));
            if let Err(e) = written {
                cleanup(&staged);
                let _ = std::fs::remove_file(&tmp);
                return Err(Failure::Data(Error::io(&tmp, e)));
            }
            staged.push((tmp, path));
        }
        for (i, (tmp, path)) in staged.iter().enumerate() {
            if let Err(e) = std::fs::rename(tmp, path) {
                cleanup(&staged[i..]);
                return Err(Failure::Data(Error::io(*path, e)));
            }
        }
        Ok(())
    }
}

fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn has_extension(path: &Path, exts: &[&str]) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Expands directories to their matching files, sorted by name.
fn expand(inputs: &[PathBuf], accept: impl Fn(&Path) -> bool) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| Error::io(input, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && accept(p))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn apply_face_flags(config: &mut RunConfig, a: &FaceArgs) {
    if let Some(v) = a.downsample {
        config.downsample = v;
    }
    if let Some(v) = a.grid_rows {
        config.grid.rows = v;
    }
    if let Some(v) = a.grid_cols {
        config.grid.cols = v;
    }
    if let Some(v) = a.grid_spacing {
        config.grid.spacing = v;
    }
    if let Some(v) = a.grid_origin {
        config.grid.origin = v;
    }
}

/// Images with their graphs, sorted by face id.
fn load_faces(config: &RunConfig, a: &FaceArgs) -> CliResult<Vec<(String, GrayImage, FaceGraph)>> {
    if a.images.is_empty() {
        return Err(usage("no --images given"));
    }
    let files = expand(&a.images, |p| has_extension(p, &["pgm", "pnm", "png"]))?;
    if files.is_empty() {
        return Err(Failure::Data(Error::InvalidArgument("no images found".into())));
    }
    let mut faces = Vec::with_capacity(files.len());
    let mut seen = HashSet::new();
    for file in files {
        let id = file.file_stem().and_then(|s| s.to_str()).map(str::to_string).ok_or_else(|| usage(format!("bad image name {}", file.display())))?;
        if !seen.insert(id.clone()) {
            return Err(Failure::Data(Error::InvalidArgument(format!("face id {id:?} appears twice"))));
        }
        let mut img = imageio::load_image(&file)?;
        if config.downsample > 1 {
            img = imageio::downsample(&img, config.downsample)?;
        }
        let graph = match &a.graphs {
            Some(dir) => {
                let path = dir.join(format!("{id}.json"));
                if !path.is_file() {
                    return Err(Failure::Data(Error::InvalidArgument(format!("no graph for face {id:?} (expected {})", path.display()))));
                }
                FaceGraph::load(&path)?
            }
            None => config.grid.graph()?.with_label(id.clone()),
        };
        faces.push((id, img, graph));
    }
    faces.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(faces)
}

fn code(config: &mut RunConfig, a: CodeArgs, out: &mut dyn Write) -> CliResult {
    apply_face_flags(config, &a.faces);
    let hash = finalize(config)?;
    let faces = load_faces(config, &a.faces)?;
    let bank = FilterBank::new(&config.bank)?;
    let mut outputs = Outputs::default();
    for (id, img, graph) in &faces {
        let code = FaceCode::extract(id.clone(), img, graph, &bank)?;
        outputs.add(a.out.join(format!("{id}.code.json")), code.to_json(Some(&hash)) + "\n");
    }
    outputs.add(a.out.join("config.json"), config.sidecar());
    outputs.commit()?;
    let nodes = faces.first().map_or(0, |f| f.2.len());
    say(out, format!("wrote {} face codes ({} nodes x {} channels) to {}\nconfig {hash}\n", faces.len(), nodes, bank.channels(), a.out.display()))
}

fn load_codes(inputs: &[PathBuf]) -> CliResult<Vec<FaceCode>> {
    if inputs.is_empty() {
        return Err(usage("no --codes given"));
    }
    let files = expand(inputs, |p| p.to_str().is_some_and(|s| s.ends_with(".code.json")))?;
    let mut codes = files.iter().map(FaceCode::load).collect::<crate::Result<Vec<_>>>()?;
    codes.sort_by(|x, y| x.face_id.cmp(&y.face_id));
    if let Some(w) = codes.windows(2).find(|w| w[0].face_id == w[1].face_id) {
        return Err(Failure::Data(Error::InvalidArgument(format!("face id {:?} appears twice", w[0].face_id))));
    }
    Ok(codes)
}

fn sim(config: &mut RunConfig, a: SimArgs, out: &mut dyn Write) -> CliResult {
    apply_face_flags(config, &a.faces);
    if let Some(p) = a.patch {
        config.patch = p;
    }
    let hash = finalize(config)?;
    let (matrix, label) = match a.measure {
        Measure::Lac => {
            if !a.faces.images.is_empty() {
                return Err(usage("--images is for the pixel measure; the lac measure reads --codes"));
            }
            let codes = load_codes(&a.codes)?;
            (similarity::similarity_matrix(&codes)?, "lac".to_string())
        }
        Measure::Pixel => {
            if !a.codes.is_empty() {
                return Err(usage("--codes is for the lac measure; the pixel measure reads --images"));
            }
            let faces = load_faces(config, &a.faces)?;
            let pixel: Vec<PixelFace<'_>> = faces.iter().map(|(id, img, graph)| PixelFace { id, image: img, graph }).collect();
            (similarity::pixel_similarity_matrix(&pixel, config.patch)?, format!("pixel patch={}", config.patch))
        }
    };
    let mut outputs = Outputs::default();
    outputs.add(&a.out, matrix.to_csv(&[format!("config={hash}"), format!("measure={label}")]));
    outputs.add_config(&a.out, config);
    outputs.commit()?;
    say(out, format!("{} matrix over {} faces ({} pairs) -> {}\nconfig {hash}\n", matrix.kind(), matrix.len(), matrix.len() * (matrix.len() - 1) / 2, a.out.display()))
}

fn triads(config: &mut RunConfig, a: TriadsArgs, out: &mut dyn Write) -> CliResult {
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if a.no_catch {
        config.include_catch = false;
    }
    let hash = finalize(config)?;
    let ids = match &a.matrix {
        Some(path) => SimilarityMatrix::load(path)?.ids().to_vec(),
        None if a.ids.is_empty() => return Err(usage("give --ids or --matrix")),
        None => a.ids.clone(),
    };
    let mut plan = match a.task {
        TaskArg::Triad => SessionPlan::triad(&a.subject, &ids, config.include_catch, config.seed)?,
        TaskArg::Rating => SessionPlan::rating(&a.subject, &ids, config.seed)?,
    };
    plan.config_hash = Some(hash.clone());
    let summary = match &plan.trials {
        PlanTrials::Triad(t) => format!("{} triads ({} catch)", t.len(), t.iter().filter(|t| t.is_catch).count()),
        PlanTrials::Rating(t) => format!("{} rating trials in 3 blocks of {}", t.len(), t.len() / 3),
    };
    let mut outputs = Outputs::default();
    outputs.add(&a.out, plan.to_json() + "\n");
    outputs.add_config(&a.out, config);
    outputs.commit()?;
    say(out, format!("{summary} for {} faces, seed {} -> {}\nconfig {hash}\n", ids.len(), config.seed, a.out.display()))
}

/// Triads from a plan or a triad session, with their face ids.
fn load_triads(path: &Path) -> CliResult<(Vec<String>, Vec<TriadTrial>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_plan = serde_json::from_str::<serde_json::Value>(&text).ok().is_some_and(|v| v.get("task").is_some());
    if is_plan {
        let plan = SessionPlan::from_json(&text, path)?;
        match plan.trials {
            PlanTrials::Triad(t) => Ok((plan.face_ids, t)),
            PlanTrials::Rating(_) => Err(Failure::Data(Error::InvalidArgument(format!("{} is a rating plan", path.display())))),
        }
    } else {
        let session = triad_session(path, Session::from_json(&text, path)?)?;
        Ok((session.face_ids, session.trials))
    }
}

fn triad_session(path: &Path, session: Session) -> CliResult<TriadSession> {
    match session {
        Session::Triad(s) => Ok(s),
        Session::Rating(_) => Err(Failure::Data(Error::InvalidArgument(format!("{} is a rating session", path.display())))),
    }
}

fn load_triad_session(path: &Path) -> CliResult<TriadSession> {
    triad_session(path, Session::load(path)?)
}

fn predict(config: &mut RunConfig, a: PredictArgs, out: &mut dyn Write) -> CliResult {
    let hash = finalize(config)?;
    let matrix = SimilarityMatrix::load(&a.matrix)?;
    let (face_ids, trials) = load_triads(&a.trials)?;
    let analysed: Vec<TriadTrial> = trials.into_iter().filter(|t| !t.is_catch).map(|t| TriadTrial { response: Response::None, ..t }).collect();
    let answered = stats::predict_triads(&matrix, &analysed)?;
    let count = |r: Response| answered.iter().filter(|t| t.response == r).count();
    let session = TriadSession { subject_id: a.subject.clone(), tag: Some(format!("config={hash}")), face_ids, trials: answered.clone() };
    session.validate()?;
    let mut outputs = Outputs::default();
    outputs.add(&a.out, Session::Triad(session).to_json() + "\n");
    outputs.add_config(&a.out, config);
    outputs.commit()?;
    say(
        out,
        format!(
            "{} triads answered: {} left, {} right, {} ties -> {}\nconfig {hash}\n",
            answered.len(),
            count(Response::Left),
            count(Response::Right),
            count(Response::None),
            a.out.display()
        ),
    )
}

fn concord(config: &mut RunConfig, a: ConcordArgs, out: &mut dyn Write) -> CliResult {
    let hash = finalize(config)?;
    let sessions = a.sessions.iter().map(|p| load_triad_session(p)).collect::<CliResult<Vec<_>>>()?;
    let subjects: Vec<Vec<TriadTrial>> = sessions.iter().map(TriadSession::analysed).collect();
    let model = a.model.as_deref().map(load_triad_session).transpose()?;
    if subjects.len() < 2 && model.is_none() {
        return Err(usage("need two sessions, or --model"));
    }
    let mut text = String::new();
    let mut report = json!({ "config_hash": hash, "subjects": sessions.iter().map(|s| &s.subject_id).collect::<Vec<_>>() });
    if subjects.len() >= 2 {
        let matrix = stats::concordance_matrix(&subjects)?;
        let mean = stats::mean_pairwise_concordance(&subjects)?;
        for i in 0..subjects.len() {
            for j in i + 1..subjects.len() {
                text.push_str(&format!("{} vs {}: {:.2}%\n", sessions[i].subject_id, sessions[j].subject_id, matrix[i][j]));
            }
        }
        text.push_str(&format!("mean pairwise concordance: {mean:.2}% over {} pairs\n", subjects.len() * (subjects.len() - 1) / 2));
        report["pairwise"] = json!(matrix);
        report["mean_pairwise"] = json!(mean);
    }
    if let Some(m) = &model {
        let trials = m.analysed();
        let each = subjects.iter().map(|s| stats::concordance(&trials, s)).collect::<crate::Result<Vec<_>>>()?;
        for (s, c) in sessions.iter().zip(&each) {
            text.push_str(&format!("{} vs {}: {c:.2}%\n", m.subject_id, s.subject_id));
        }
        let mean = stats::mean_model_concordance(&trials, &subjects)?;
        text.push_str(&format!("mean model concordance: {mean:.2}%\n"));
        report["model"] = json!(m.subject_id);
        report["model_concordance"] = json!(each);
        report["mean_model"] = json!(mean);
    }
    write_report(config, a.json.as_deref(), &report)?;
    say(out, text)
}

fn write_report(config: &RunConfig, path: Option<&Path>, report: &serde_json::Value) -> CliResult {
    if let Some(path) = path {
        let mut outputs = Outputs::default();
        outputs.add(path, json_bytes(report));
        outputs.add_config(path, config);
        outputs.commit()?;
    }
    Ok(())
}

fn spearman(config: &mut RunConfig, a: SpearmanArgs, out: &mut dyn Write) -> CliResult {
    let hash = finalize(config)?;
    let (x, y) = (SimilarityMatrix::load(&a.x)?, SimilarityMatrix::load(&a.y)?);
    if x.len() != y.len() {
        return Err(Failure::Data(Error::Incompatible(format!("matrices over {} and {} faces", x.len(), y.len()))));
    }
    let xs = x.upper_triangle();
    let ys = y.upper_triangle_for(x.ids())?;
    let rho = stats::spearman(&xs, &ys)?;
    let report = json!({ "config_hash": hash, "x_kind": x.kind().to_string(), "y_kind": y.kind().to_string(), "pairs": xs.len(), "rho": rho });
    write_report(config, a.json.as_deref(), &report)?;
    say(out, format!("spearman rho = {rho:.6} over {} pairs ({} vs {})\n", xs.len(), x.kind(), y.kind()))
}

fn bootstrap(config: &mut RunConfig, a: BootstrapArgs, out: &mut dyn Write) -> CliResult {
    if let Some(r) = a.replicates {
        config.replicates = r;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let hash = finalize(config)?;
    let mut results: Vec<(Statistic, stats::BootstrapResult)> = Vec::new();
    if let Some(path) = &a.values {
        if !matches!(a.statistic, StatisticArg::Mean | StatisticArg::All) {
            return Err(usage("--values supports only the mean statistic"));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let values = parse_values(&text, path)?;
        results.push((Statistic::Mean, stats::bootstrap_se(Dataset::Values(&values), Statistic::Mean, config.replicates, config.seed)?));
    } else {
        let subjects = a.sessions.iter().map(|p| load_triad_session(p).map(|s| s.analysed())).collect::<CliResult<Vec<_>>>()?;
        let model = a.model.as_deref().map(load_triad_session).transpose()?.map(|m| m.analysed());
        let wanted = match a.statistic {
            StatisticArg::All => vec![Statistic::HumanHuman, Statistic::ModelHuman, Statistic::Difference],
            StatisticArg::HumanHuman => vec![Statistic::HumanHuman],
            StatisticArg::ModelHuman => vec![Statistic::ModelHuman],
            StatisticArg::Difference => vec![Statistic::Difference],
            StatisticArg::Mean => return Err(usage("the mean statistic needs --values")),
        };
        let model = model.ok_or_else(|| usage("session bootstrap needs --model"))?;
        let data = Dataset::Triads { model: &model, subjects: &subjects };
        for st in wanted {
            results.push((st, stats::bootstrap_se(data, st, config.replicates, config.seed)?));
        }
    }
    let mut text = String::new();
    let mut list = Vec::new();
    for (st, r) in &results {
        text.push_str(&format!("{st}: estimate {:.4}, standard error {:.4} ({} replicates, seed {})\n", r.estimate, r.standard_error, r.replicates, r.seed));
        list.push(json!({ "statistic": st.name(), "result": r }));
    }
    write_report(config, a.json.as_deref(), &json!({ "config_hash": hash, "results": list }))?;
    say(out, text)
}

fn parse_values(text: &str, path: &Path) -> CliResult<Vec<f64>> {
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v = tok.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.into(),
                line: n + 1,
                message: format!("{tok:?} is not a finite number"),
            })?;
            values.push(v);
        }
    }
    Ok(values)
}

fn mds(config: &mut RunConfig, a: MdsArgs, out: &mut dyn Write) -> CliResult {
    let o = &mut config.nmds;
    if let Some(v) = a.dims {
        o.dims = v;
    }
    if let Some(v) = a.restarts {
        o.restarts = v;
    }
    if let Some(v) = a.seed {
        o.seed = v;
    }
    if let Some(v) = a.max_iter {
        o.max_iter = v;
    }
    if let Some(t) = a.ties {
        o.ties = match t {
            TiesArg::Primary => Ties::Primary,
            TiesArg::Secondary => Ties::Secondary,
        };
    }
    let hash = finalize(config)?;
    let matrix = SimilarityMatrix::load(&a.matrix)?;
    let mut solution = nmds::nmds(&nmds::to_dissimilarity(&matrix), &config.nmds)?;
    solution.config_hash = Some(hash.clone());
    let mut outputs = Outputs::default();
    outputs.add(&a.out, solution.to_json() + "\n");
    outputs.add_config(&a.out, config);
    if let Some(p) = &a.projection {
        outputs.add(p, solution.projection_csv(&[format!("config={hash}"), "principal axes 1 and 2".into()]));
    }
    outputs.commit()?;
    say(
        out,
        format!(
            "{}-D solution for {} faces: stress {:.4}, R^2 {:.4}, {} iterations (restart {} of {})\nconfig {hash}\n",
            solution.dims,
            solution.ids.len(),
            solution.stress,
            solution.r_squared,
            solution.iterations,
            solution.best_restart + 1,
            solution.restarts
        ),
    )
}

/// Min–max scales `values` to 8-bit levels. Ranges below `floor` are
/// rounding noise and render as uniform mid-gray.
fn to_levels(values: &[f64], floor: f64) -> (Vec<u8>, f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > floor) {
        return (vec![128; values.len()], lo, hi);
    }
    (values.iter().map(|v| (255.0 * (v - lo) / (hi - lo)).round() as u8).collect(), lo, hi)
}

struct Panel {
    width: usize,
    height: usize,
    levels: Vec<u8>,
}

fn montage(rows: &[Vec<Panel>]) -> GrayImage {
    const GAP: usize = 4;
    let cell_w = rows.iter().flatten().map(|p| p.width).max().unwrap_or(1);
    let cell_h = rows.iter().flatten().map(|p| p.height).max().unwrap_or(1);
    let cols = rows.iter().map(Vec::len).max().unwrap_or(1);
    let (w, h) = (cols * cell_w + (cols + 1) * GAP, rows.len() * cell_h + (rows.len() + 1) * GAP);
    let mut levels = vec![255u8; w * h];
    for (r, row) in rows.iter().enumerate() {
        for (c, p) in row.iter().enumerate() {
            let x0 = GAP + c * (cell_w + GAP) + (cell_w - p.width) / 2;
            let y0 = GAP + r * (cell_h + GAP) + (cell_h - p.height) / 2;
            for y in 0..p.height {
                levels[(y0 + y) * w + x0..(y0 + y) * w + x0 + p.width].copy_from_slice(&p.levels[y * p.width..(y + 1) * p.width]);
            }
        }
    }
    GrayImage::from_gray8(w, h, &levels).expect("montage dimensions are valid")
}

fn render(config: &mut RunConfig, a: RenderArgs, out: &mut dyn Write) -> CliResult {
    if let Some(b) = a.backend {
        config.backend = match b {
            BackendArg::Direct => Backend::Direct,
            BackendArg::Fft => Backend::Fft,
        };
    }
    if let Some(d) = a.downsample {
        config.downsample = d;
    }
    let hash = finalize(config)?;
    let bank = FilterBank::new(&config.bank)?;
    if let Some(&c) = a.channels.iter().find(|&&c| c >= bank.channels()) {
        return Err(Failure::Data(Error::ChannelOutOfRange { channel: c, channels: bank.channels() }));
    }
    let mut img = imageio::load_image(&a.image)?;
    if config.downsample > 1 {
        img = imageio::downsample(&img, config.downsample)?;
    }
    let stem = a.image.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
    let peak = img.pixels().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut outputs = Outputs::default();
    let mut text = String::new();
    let mut panels: Vec<Vec<Panel>> = vec![Vec::new(), Vec::new(), Vec::new()];
    for &channel in &a.channels {
        let kernel = bank.kernel(channel)?;
        let t = gabor::full_transform(&img, &bank, channel, config.backend)?;
        let l1: f64 = kernel.even_taps().iter().chain(kernel.odd_taps()).map(|v| v.abs()).sum();
        let floor = 1e-10 * l1 * peak;
        let amplitude = t.amplitude();
        for (kind, values, row) in [("real", t.real_part(), 1usize), ("amp", amplitude.as_slice(), 2)] {
            let (levels, lo, hi) = to_levels(values, floor);
            let path = a.out_dir.join(format!("{stem}_c{channel}_{kind}.pgm"));
            let comments = vec![
                format!("config={hash}"),
                format!("channel={channel} k={} theta={} {kind}", kernel.wavenumber(), kernel.orientation()),
                format!("min={lo:e} max={hi:e}"),
            ];
            outputs.add(&path, imageio::encode_pgm(&GrayImage::from_gray8(t.width, t.height, &levels)?, &comments));
            text.push_str(&format!("channel {channel} {kind}: min {lo:.6e} max {hi:.6e} -> {}\n", path.display()));
            panels[row].push(Panel { width: t.width, height: t.height, levels });
        }
        let (levels, _, _) = to_levels(kernel.even_taps(), 0.0);
        panels[0].push(Panel { width: kernel.side(), height: kernel.side(), levels });
    }
    if a.montage {
        let path = a.out_dir.join(format!("{stem}_montage.pgm"));
        outputs.add(&path, imageio::encode_pgm(&montage(&panels), &[format!("config={hash}"), "rows: even kernel, real part, amplitude".into()]));
        text.push_str(&format!("montage -> {}\n", path.display()));
    }
    if let Some(p) = &a.dump_kernels {
        outputs.add(p, bank.to_csv());
    }
    outputs.add(a.out_dir.join("config.json"), config.sidecar());
    outputs.commit()?;
    text.push_str(&format!("config {hash}\n"));
    say(out, text)
}

fn ingest(config: &mut RunConfig, a: IngestArgs, out: &mut dyn Write) -> CliResult {
    let hash = finalize(config)?;
    let sessions = a.sessions.iter().map(Session::load).collect::<crate::Result<Vec<_>>>()?;
    let mut text = String::new();
    let mut reports = Vec::new();
    for s in &sessions {
        match s {
            Session::Triad(t) => {
                let catch = t.trials.iter().filter(|x| x.is_catch).count();
                let answered = t.trials.iter().filter(|x| x.response != Response::None).count();
                let accuracy = stats::catch_accuracy(&t.trials);
                text.push_str(&format!(
                    "{}: triad session, {} trials ({} answered, {} catch), catch accuracy {}\n",
                    t.subject_id,
                    t.trials.len(),
                    answered,
                    catch,
                    accuracy.map_or("n/a".to_string(), |v| format!("{:.1}%", 100.0 * v))
                ));
                reports.push(json!({ "subject_id": t.subject_id, "tag": t.tag, "task": "triad", "trials": t.trials.len(), "answered": answered, "catch": catch, "catch_accuracy": accuracy }));
            }
            Session::Rating(r) => {
                let rated = r.trials.iter().filter(|x| x.rating.is_some()).count();
                let practice = r.trials.iter().filter(|x| x.block == stats::Block::Practice).count();
                text.push_str(&format!("{}: rating session, {} trials ({} rated, {} practice)\n", r.subject_id, r.trials.len(), rated, practice));
                reports.push(json!({ "subject_id": r.subject_id, "tag": r.tag, "task": "rating", "trials": r.trials.len(), "rated": rated, "practice": practice }));
            }
        }
    }
    let mut outputs = Outputs::default();
    if let Some(path) = &a.index_out {
        let matrix = pooled_matrix(&sessions)?;
        let what = match sessions[0] {
            Session::Triad(_) => "triad choice index",
            Session::Rating(_) => "mean normalized rating",
        };
        outputs.add(path, matrix.to_csv(&[format!("config={hash}"), format!("measure={what} subjects={}", sessions.len())]));
        outputs.add_config(path, config);
        text.push_str(&format!("{what} over {} faces -> {}\n", matrix.len(), path.display()));
    }
    if let Some(path) = &a.json {
        outputs.add(path, json_bytes(&json!({ "config_hash": hash, "sessions": reports })));
        outputs.add_config(path, config);
    }
    outputs.commit()?;
    say(out, text)
}

fn pooled_matrix(sessions: &[Session]) -> CliResult<SimilarityMatrix> {
    let ids = |s: &Session| -> Vec<String> {
        let v = match s {
            Session::Triad(t) => &t.face_ids,
            Session::Rating(r) => &r.face_ids,
        };
        v.clone()
    };
    let first = ids(&sessions[0]);
    let set: BTreeMap<&str, ()> = first.iter().map(|i| (i.as_str(), ())).collect();
    for s in sessions {
        if s.task() != sessions[0].task() {
            return Err(Failure::Data(Error::InvalidArgument("sessions mix triad and rating tasks".into())));
        }
        let other = ids(s);
        if other.len() != first.len() || other.iter().any(|i| !set.contains_key(i.as_str())) {
            return Err(Failure::Data(Error::InvalidArgument(format!("session {} uses a different face set", s.subject_id()))));
        }
    }
    match &sessions[0] {
        Session::Triad(_) => {
            let subjects: Vec<Vec<TriadTrial>> = sessions
                .iter()
                .filter_map(|s| match s {
                    Session::Triad(t) => Some(t.analysed()),
                    Session::Rating(_) => None,
                })
                .collect();
            Ok(stats::triad_similarity_index(&first, &subjects)?)
        }
        Session::Rating(_) => {
            let matrices = sessions
                .iter()
                .filter_map(|s| match s {
                    Session::Rating(r) => Some(r.normalized().and_then(|n| n.to_matrix())),
                    Session::Triad(_) => None,
                })
                .collect::<crate::Result<Vec<_>>>()?;
            Ok(stats::average_matrices(&matrices)?.with_kind(MatrixKind::Similarity))
        }
    }
}
