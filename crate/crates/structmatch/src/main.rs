//! Command-line front end: model training, tensor refinement, evaluation,
//! and synthetic-scene generation.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use structmatch::error::{Error, Result};
use structmatch::graph::{train_model_graph, EdgeAttr, ModelGraph};
use structmatch::grid::ClassSpace;
use structmatch::metrics::evaluate;
use structmatch::npy;
use structmatch::pipeline::refine_tensor;
use structmatch::profile::{Profile, ProfileOverrides};
use structmatch::synth::{generate, SceneSpec};
use structmatch::tensor::LabelMap;

/// Prints a line to stdout. Summaries are written after the real outputs,
/// so a consumer that stopped reading (`structmatch ... | head`) ends the
/// process quietly instead of panicking on the broken pipe.
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            eprintln!("error: cannot write to stdout: {e}");
            std::process::exit(1);
        }
    }};
}

#[derive(Parser)]
#[command(
    name = "structmatch",
    version,
    about = "Structural post-processing for semantic segmentation by attributed graph matching"
)]
struct Cli {
    /// Worker threads; overrides the STRUCTMATCH_THREADS variable.
    /// Defaults to the machine's parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Parameter flags shared by the training and refinement subcommands.
/// Layering: named preset, then config file, then individual flags.
#[derive(Args)]
struct ProfileArgs {
    /// Named preset: 'distance' or 'direction'.
    #[arg(long, default_value = "distance")]
    profile: String,

    /// Flat TOML config applied over the preset; flags still win.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Relation family: 'distance' or 'direction'.
    #[arg(long)]
    family: Option<String>,

    /// Vertex/edge blend weight of the assembled matrix.
    #[arg(long)]
    lambda: Option<f64>,

    /// Blend inside the direction-family vertex dissimilarity.
    #[arg(long)]
    lambda_v: Option<f64>,

    /// Blend inside both edge dissimilarities.
    #[arg(long)]
    lambda_e: Option<f64>,

    /// Refinement acceptance threshold.
    #[arg(long)]
    threshold: Option<f64>,

    /// Region connectivity: 'face' or 'full'.
    #[arg(long)]
    connectivity: Option<String>,

    /// Drop regions smaller than this many cells.
    #[arg(long)]
    min_region_size: Option<usize>,

    /// Candidate-tuple cap before the initial search starts.
    #[arg(long)]
    budget: Option<u64>,

    /// Keep only the k best candidate regions per class.
    #[arg(long)]
    top_k: Option<usize>,

    /// Whether tensor channel 0 is background.
    #[arg(long)]
    background_channel: Option<bool>,
}

impl ProfileArgs {
    fn resolve(&self) -> Result<Profile> {
        let mut profile = Profile::named(&self.profile)?;
        if let Some(path) = &self.config {
            profile = ProfileOverrides::load(path)?.apply(profile)?;
        }
        let flags = ProfileOverrides {
            family: self.family.as_deref().map(str::parse).transpose()?,
            lambda: self.lambda,
            lambda_v: self.lambda_v,
            lambda_e: self.lambda_e,
            threshold: self.threshold,
            connectivity: self.connectivity.as_deref().map(str::parse).transpose()?,
            min_region_size: self.min_region_size,
            budget: self.budget,
            top_k: self.top_k,
            background_channel: self.background_channel,
        };
        flags.apply(profile)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model graph from annotated label maps.
    BuildModel {
        /// Annotation .npy label maps; each argument may be a glob.
        #[arg(long, required = true, num_args = 1..)]
        annotations: Vec<String>,

        /// Number of foreground classes; default: highest label seen.
        #[arg(long)]
        classes: Option<usize>,

        /// Comma-separated class names, one per class.
        #[arg(long, value_delimiter = ',')]
        class_names: Option<Vec<String>>,

        #[command(flatten)]
        profile: ProfileArgs,

        /// Output model JSON path.
        #[arg(short, long)]
        output: PathBuf,
    },

    /// Refine a probability tensor against a trained model graph.
    Refine {
        /// Input probability tensor (.npy, elements x channels).
        #[arg(long)]
        tensor: PathBuf,

        /// Trained model graph JSON.
        #[arg(long)]
        model: PathBuf,

        /// Write the per-step refinement decision log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,

        #[command(flatten)]
        profile: ProfileArgs,

        /// Output label map path (.npy).
        #[arg(short, long)]
        output: PathBuf,
    },

    /// Score a predicted label map against ground truth.
    Evaluate {
        /// Predicted label map (.npy).
        #[arg(long)]
        pred: PathBuf,

        /// Ground-truth label map (.npy).
        #[arg(long)]
        gt: PathBuf,

        /// Comma-separated class ids; default: every foreground class
        /// present in either map.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<u32>>,

        /// Write the report here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },

    /// Generate a deterministic synthetic scene.
    Synth {
        /// Scene spec TOML; inline flags are ignored when present.
        #[arg(long)]
        spec: Option<PathBuf>,

        /// RNG seed for an inline scene.
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Grid extents for an inline scene, e.g. 64,64.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,

        /// Foreground class count for an inline scene.
        #[arg(long)]
        classes: Option<u32>,

        /// Output probability tensor path.
        #[arg(long = "o-tensor")]
        o_tensor: PathBuf,

        /// Output ground-truth label map path.
        #[arg(long = "o-gt")]
        o_gt: PathBuf,

        /// Also write the corrupted label map the tensor encodes.
        #[arg(long = "o-corrupted")]
        o_corrupted: Option<PathBuf>,
    },
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse_from(rewritten_args()) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_threads(cli.threads) {
        report(&e);
        return e.exit_code();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

/// Documented spellings like `-o-tensor` look like bundled short flags to
/// the parser, so they are normalized to `--o-tensor` up front.
fn rewritten_args() -> Vec<OsString> {
    std::env::args_os()
        .map(|arg| match arg.to_str() {
            Some(s) if s.starts_with("-o-") => OsString::from(format!("-{s}")),
            _ => arg,
        })
        .collect()
}

fn report(e: &Error) {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("STRUCTMATCH_THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| {
                Error::InvalidParameter(format!(
                    "STRUCTMATCH_THREADS must be a thread count, got '{v}'"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "thread count must be at least 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::BuildModel {
            annotations,
            classes,
            class_names,
            profile,
            output,
        } => cmd_build_model(&annotations, classes, class_names, &profile, &output),
        Command::Refine {
            tensor,
            model,
            log,
            profile,
            output,
        } => cmd_refine(&tensor, &model, log.as_deref(), &profile, &output),
        Command::Evaluate {
            pred,
            gt,
            classes,
            output,
        } => cmd_evaluate(&pred, &gt, classes, output.as_deref()),
        Command::Synth {
            spec,
            seed,
            dims,
            classes,
            o_tensor,
            o_gt,
            o_corrupted,
        } => cmd_synth(spec.as_deref(), seed, dims, classes, &o_tensor, &o_gt, o_corrupted.as_deref()),
    }
}

fn expand_annotations(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for pattern in patterns {
        let entries = glob::glob(pattern)
            .map_err(|e| Error::InvalidParameter(format!("bad glob '{pattern}': {e}")))?;
        let mut any = false;
        for entry in entries {
            let path = entry.map_err(|e| {
                let at = e.path().to_path_buf();
                Error::io(at, e.into())
            })?;
            paths.push(path);
            any = true;
        }
        if !any {
            return Err(Error::InvalidParameter(format!(
                "no annotation files match '{pattern}'"
            )));
        }
    }
    paths.sort();
    paths.dedup();
    Ok(paths)
}

fn cmd_build_model(
    patterns: &[String],
    classes: Option<usize>,
    class_names: Option<Vec<String>>,
    profile_args: &ProfileArgs,
    output: &Path,
) -> Result<()> {
    let profile = profile_args.resolve()?;
    let paths = expand_annotations(patterns)?;
    let maps = paths
        .iter()
        .map(|p| npy::load_label_map(p))
        .collect::<Result<Vec<LabelMap>>>()?;
    let num_classes = match classes {
        Some(n) => n,
        None => maps.iter().map(|m| m.max_label()).max().unwrap_or(0) as usize,
    };
    if num_classes == 0 {
        return Err(Error::InvalidParameter(
            "annotations contain no foreground classes; pass --classes".into(),
        ));
    }
    let space = ClassSpace::new(num_classes, profile.background_channel)?;
    let model = train_model_graph(&maps, profile.family, space, class_names)?;
    model.save(output)?;
    print_model_summary(&model, &paths);
    Ok(())
}

fn print_model_summary(model: &ModelGraph, sources: &[PathBuf]) {
    let n = model.num_classes();
    outln!(
        "trained {} model: {} classes, {} directed edges, {} annotation(s)",
        model.family(),
        n,
        n * n.saturating_sub(1),
        sources.len()
    );
    let names = model.class_names();
    for i in 1..=n as u32 {
        for j in 1..=n as u32 {
            if i == j {
                continue;
            }
            let (a, b) = (&names[i as usize - 1], &names[j as usize - 1]);
            match model.edge(i, j) {
                EdgeAttr::Distance { d_min, d_max } => {
                    outln!("  {a} -> {b}: d_min {d_min:.4}, d_max {d_max:.4}");
                }
                EdgeAttr::Direction { v, norm } => {
                    let comps: Vec<String> = v.iter().map(|c| format!("{c:.4}")).collect();
                    outln!("  {a} -> {b}: v [{}], norm {norm:.4}", comps.join(", "));
                }
            }
        }
    }
}

fn cmd_refine(
    tensor_path: &Path,
    model_path: &Path,
    log_path: Option<&Path>,
    profile_args: &ProfileArgs,
    output: &Path,
) -> Result<()> {
    let profile = profile_args.resolve()?;
    let tensor = npy::load_tensor(tensor_path)?;
    let model = ModelGraph::load(model_path)?;
    let outcome = refine_tensor(&tensor, &model, &profile)?;
    npy::save_label_map(&outcome.output, output)?;
    if let Some(path) = log_path {
        let mut json = serde_json::to_string_pretty(&outcome.log).expect("log serializes");
        json.push('\n');
        std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    }
    let merged = outcome.log.steps.iter().filter(|s| s.committed).count();
    let discarded = outcome.log.steps.len() - merged;
    outln!(
        "refined {} regions: {} anchored, {} merged, {} discarded; cost {:.6} -> {:.6}",
        outcome.regions.len(),
        outcome.initial.assigned_pairs().len(),
        merged,
        discarded,
        outcome.log.initial_cost,
        outcome.log.final_cost
    );
    Ok(())
}

fn cmd_evaluate(
    pred_path: &Path,
    gt_path: &Path,
    classes: Option<Vec<u32>>,
    output: Option<&Path>,
) -> Result<()> {
    let pred = npy::load_label_map(pred_path)?;
    let gt = npy::load_label_map(gt_path)?;
    let classes = match classes {
        Some(c) => c,
        None => {
            let present: BTreeSet<u32> = pred
                .labels()
                .iter()
                .chain(gt.labels())
                .copied()
                .filter(|l| *l != 0)
                .collect();
            present.into_iter().collect()
        }
    };
    let report = evaluate(&pred, &gt, &classes)?;
    let json = report.to_json_string();
    match output {
        Some(path) => std::fs::write(path, json).map_err(|e| Error::io(path, e))?,
        None => outln!("{}", json.trim_end_matches('\n')),
    }
    Ok(())
}

fn cmd_synth(
    spec_path: Option<&Path>,
    seed: u64,
    dims: Option<Vec<usize>>,
    classes: Option<u32>,
    o_tensor: &Path,
    o_gt: &Path,
    o_corrupted: Option<&Path>,
) -> Result<()> {
    let spec = match spec_path {
        Some(path) => SceneSpec::load(path)?,
        None => {
            let dims = dims.ok_or_else(|| {
                Error::InvalidParameter("--dims is required without --spec".into())
            })?;
            let classes = classes.ok_or_else(|| {
                Error::InvalidParameter("--classes is required without --spec".into())
            })?;
            SceneSpec::new(seed, dims, classes)
        }
    };
    let scene = generate(&spec)?;
    npy::save_tensor(&scene.tensor, o_tensor)?;
    npy::save_label_map(&scene.ground_truth, o_gt)?;
    if let Some(path) = o_corrupted {
        npy::save_label_map(&scene.corrupted, path)?;
    }
    outln!(
        "scene {:?}: {} classes, {} corrupted cells, {} artifact cells",
        scene.ground_truth.dims().shape(),
        spec.classes,
        scene
            .corrupted
            .labels()
            .iter()
            .zip(scene.ground_truth.labels())
            .filter(|(a, b)| a != b)
            .count(),
        scene.artifact_cells.len()
    );
    Ok(())
}
