//! Command-line front end. Every subcommand is a thin wrapper over a library
//! operation; [`run`] returns the process exit code (0 success, 1 domain
//! error, 2 usage error).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::canon::decompose;
use crate::engine::{
    calibrate, generate, generate_from, sample_start_fragment, sig6, split_dataset, train, train_initializer, Axis,
    CalibrationConfig, GenerateOptions, IdentityPredictor, InitializerBundle, ModelBundle,
    NearestNeighborPredictor, PropertyPredictor, Standardizer, SyntheticPredictor, TrainConfig, UniformModel,
};
use crate::geometry::{GeometryProvider, ProviderKind};
use crate::io::{ingest_csv, ingest_reader, DatasetRecord, IngestReport, Vocabulary};
use crate::model::ParamStore;
use crate::molgraph::{parse_smiles, stable_hash, write_canonical_smiles};
use crate::story::{replay_story, unroll_story, Story};

/// Corpus shipped with the crate; used when no data or vocabulary is given.
const BUNDLED_CORPUS: &str = include_str!("../data/corpus.csv");

#[derive(Parser, Debug)]
#[command(name = "molstory", version, about = "Fragment stories: decompose, replay, train and generate molecules")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Random seed
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Training config file (key = value lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Vocabulary file
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,
    /// Story-model weight file
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// Geometry provider: topological, force-relaxed or none
    #[arg(long, global = true)]
    provider: Option<ProviderKind>,
    /// Number of start-fragment candidates
    #[arg(long, global = true)]
    topk: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the fragment/action vocabulary from a CSV dataset
    BuildVocab {
        /// Dataset CSV (smiles,logS,redox,sascore); the bundled corpus if omitted
        data: Option<PathBuf>,
        /// Use only the training split
        #[arg(long)]
        train_split: bool,
        /// Output path (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the fragments and standardized attachments of a molecule
    Decompose { smiles: String },
    /// Print a random story for a molecule
    Unroll { smiles: String },
    /// Replay a story file and print the molecule it builds
    Replay { story: PathBuf },
    /// Train the story model
    Train {
        data: Option<PathBuf>,
        #[arg(long, default_value = "weights.bin")]
        out: PathBuf,
    },
    /// Train the start-fragment initializer
    TrainInit {
        data: Option<PathBuf>,
        #[arg(long, default_value = "init.bin")]
        out: PathBuf,
    },
    /// Generate molecules for a property prompt
    Generate {
        #[arg(long = "logS", allow_hyphen_values = true)]
        log_s: f64,
        #[arg(long, allow_hyphen_values = true)]
        redox: f64,
        #[arg(long, allow_hyphen_values = true)]
        sa: f64,
        /// Initializer weight file
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Sweep one condition and write the calibration CSV
    Calibrate {
        data: Option<PathBuf>,
        #[arg(long, default_value = "logS")]
        axis: Axis,
        #[arg(long)]
        init: Option<PathBuf>,
        /// synthetic, nearest or identity
        #[arg(long, default_value = "nearest")]
        predictor: String,
        #[arg(long, default_value_t = 30)]
        steps: usize,
        #[arg(long, default_value_t = 30)]
        per_prompt: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the tensors in a weight file
    InspectWeights { path: PathBuf },
}

type Failure = Box<dyn std::error::Error>;

fn fail(msg: impl Into<String>) -> Failure {
    msg.into().into()
}

fn load_data(path: Option<&Path>, err: &mut dyn Write) -> Result<Vec<DatasetRecord>, Failure> {
    let report: IngestReport = match path {
        Some(p) => ingest_csv(p)?,
        None => ingest_reader(BUNDLED_CORPUS.as_bytes())?,
    };
    for (row, why) in &report.skipped {
        writeln!(err, "warning: skipped row {row}: {why}")?;
    }
    Ok(report.records)
}

fn load_config(g: &Global) -> Result<TrainConfig, Failure> {
    let mut cfg = match &g.config {
        Some(p) => TrainConfig::from_text(&fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    cfg.seed = g.seed;
    if let Some(p) = g.provider {
        cfg.provider = p;
    }
    if let Some(k) = g.topk {
        cfg.top_k = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_records(records: Vec<DatasetRecord>, cfg: &TrainConfig) -> (Vec<DatasetRecord>, Vec<DatasetRecord>) {
    let split = split_dataset(records.len(), cfg);
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    (pick(&split.train), pick(&split.test))
}

/// The vocabulary named by --vocab, or one built from `fallback`.
fn vocab_or(g: &Global, fallback: impl FnOnce() -> Result<Vocabulary, Failure>) -> Result<Vocabulary, Failure> {
    match &g.vocab {
        Some(p) if p.exists() => Ok(Vocabulary::from_text(&fs::read_to_string(p)?)?),
        Some(p) => Err(fail(format!("vocabulary {} does not exist", p.display()))),
        None => fallback(),
    }
}

fn mols(records: &[DatasetRecord]) -> Vec<crate::molgraph::MolGraph> {
    records.iter().map(|r| r.mol.clone()).collect()
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let g = &cli.global;
    match cli.command {
        Command::BuildVocab { data, train_split, out: path } => {
            let mut records = load_data(data.as_deref(), err)?;
            if train_split {
                records = train_records(records, &load_config(g)?).0;
            }
            let v = Vocabulary::build(&mols(&records))?;
            match path {
                Some(p) => fs::write(p, v.to_text())?,
                None => out.write_all(v.to_text().as_bytes())?,
            }
        }
        Command::Decompose { smiles } => {
            let m = parse_smiles(&smiles)?;
            let d = decompose(&m)?;
            let v = vocab_or(g, || Ok(Vocabulary::build(std::slice::from_ref(&m))?))?;
            for (k, (f, p)) in d.fragments.iter().zip(&d.placed).enumerate() {
                let atoms: Vec<String> = f.global_atoms.iter().map(|a| a.to_string()).collect();
                writeln!(out, "fragment {k} {} atoms={}", p.canonical.smiles, atoms.join(","))?;
            }
            for att in &d.attachments {
                let (i, j) = att.fragment_pair;
                let shared: Vec<String> = att.shared_atoms.iter().map(|a| a.to_string()).collect();
                let side = |k: usize| -> String {
                    let smiles = &d.placed[k].canonical.smiles;
                    let rep = d
                        .canonical_tuple(k, &att.shared_atoms)
                        .and_then(|t| v.fragment_index(smiles).and_then(|f| v.representative(f, t)));
                    match rep {
                        Some(r) => format!("{smiles}@{r}"),
                        None => format!("{smiles}@?"),
                    }
                };
                writeln!(out, "attach {i}-{j} shared={} {} {}", shared.join(","), side(i), side(j))?;
            }
        }
        Command::Unroll { smiles } => {
            let m = parse_smiles(&smiles)?;
            let v = vocab_or(g, || Ok(Vocabulary::build(std::slice::from_ref(&m))?))?;
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            out.write_all(unroll_story(&m, &v, &mut rng)?.to_text().as_bytes())?;
        }
        Command::Replay { story } => {
            let s = Story::from_text(&fs::read_to_string(story)?)?;
            let v = vocab_or(g, || Ok(Vocabulary::build(&[parse_smiles(&s.final_smiles)?])?))?;
            let m = replay_story(&s, &v)?;
            writeln!(out, "{}", write_canonical_smiles(&m)?)?;
        }
        Command::Train { data, out: path } => {
            let cfg = load_config(g)?;
            let (tr, te) = train_records(load_data(data.as_deref(), err)?, &cfg);
            let v = vocab_or(g, || Ok(Vocabulary::build(&mols(&tr))?))?;
            writeln!(out, "training on {} molecules, {} held out, {} actions", tr.len(), te.len(), v.action_count() + 1)?;
            let mut log = Vec::new();
            let trained = train(&tr, &te, &v, &cfg, |m| {
                log.push(format!(
                    "epoch {} loss {} train_acc {} test_acc {} skipped {}",
                    m.epoch,
                    sig6(m.loss),
                    m.train_accuracy.map_or("-".into(), sig6),
                    m.held_out_accuracy.map_or("-".into(), sig6),
                    m.skipped
                ));
                true
            });
            for l in log {
                writeln!(out, "{l}")?;
            }
            ModelBundle {
                model: trained.model,
                standardizer: trained.standardizer,
                provider: cfg.provider,
            }
            .save(&path, &v)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::TrainInit { data, out: path } => {
            let cfg = load_config(g)?;
            let (tr, _) = train_records(load_data(data.as_deref(), err)?, &cfg);
            let v = vocab_or(g, || Ok(Vocabulary::build(&mols(&tr))?))?;
            let st = Standardizer::fit(&tr.iter().map(|r| r.conditions()).collect::<Vec<_>>());
            let (init, loss) = train_initializer(&tr, &v, &st, &cfg);
            InitializerBundle { init, standardizer: st }.save(&path, &v)?;
            writeln!(out, "initializer bce {} wrote {}", sig6(loss), path.display())?;
        }
        Command::Generate {
            log_s,
            redox,
            sa,
            init,
            count,
        } => {
            let cfg = load_config(g)?;
            let prompt = [log_s, redox, sa];
            let opts = GenerateOptions {
                top_k: cfg.top_k,
                max_fragments: cfg.max_fragments,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            match &g.weights {
                Some(w) => {
                    let v = vocab_or(g, || Err(fail("--weights needs the matching --vocab")))?;
                    let mb = ModelBundle::load(w, &v)?;
                    let ib = InitializerBundle::load(
                        init.as_deref().ok_or_else(|| fail("--weights needs an --init initializer file"))?,
                        &v,
                    )?;
                    let provider = GeometryProvider::new(g.provider.unwrap_or(mb.provider));
                    for _ in 0..count {
                        let (_, story) =
                            generate(prompt, &mb.model, &ib.init, &mb.standardizer, &v, &provider, &opts, &mut rng)?;
                        writeln!(out, "{}", story.final_smiles)?;
                        out.write_all(story.to_text().as_bytes())?;
                    }
                }
                None => {
                    writeln!(err, "note: no --weights given; sampling uniformly among legal actions")?;
                    let records = load_data(None, err)?;
                    let v = vocab_or(g, || Ok(Vocabulary::build(&mols(&records))?))?;
                    let provider = GeometryProvider::new(cfg.provider);
                    let st = Standardizer::fit(&records.iter().map(|r| r.conditions()).collect::<Vec<_>>());
                    let freq: Vec<f64> = v.fragments().iter().map(|f| f.count as f64).collect();
                    for _ in 0..count {
                        let start = sample_start_fragment(&freq, opts.top_k, &mut rng);
                        let (_, story) = generate_from(start, prompt, &UniformModel, &st, &v, &provider, &opts, &mut rng)?;
                        writeln!(out, "{}", story.final_smiles)?;
                        out.write_all(story.to_text().as_bytes())?;
                    }
                }
            }
        }
        Command::Calibrate {
            data,
            axis,
            init,
            predictor,
            steps,
            per_prompt,
            out: path,
        } => {
            let cfg = load_config(g)?;
            let records = load_data(data.as_deref(), err)?;
            let v = vocab_or(g, || Err(fail("calibrate needs --vocab")))?;
            let mb = ModelBundle::load(g.weights.as_deref().ok_or_else(|| fail("calibrate needs --weights"))?, &v)?;
            let ib = InitializerBundle::load(init.as_deref().ok_or_else(|| fail("calibrate needs --init"))?, &v)?;
            let provider = GeometryProvider::new(g.provider.unwrap_or(mb.provider));
            let nn;
            let pred: &dyn PropertyPredictor = match predictor.as_str() {
                "synthetic" => &SyntheticPredictor,
                "identity" => &IdentityPredictor,
                "nearest" => {
                    nn = NearestNeighborPredictor::new(records.iter().map(|r| (&r.mol, r.conditions())));
                    &nn
                }
                other => return Err(fail(format!("unknown predictor {other}"))),
            };
            let opts = GenerateOptions {
                top_k: cfg.top_k,
                max_fragments: cfg.max_fragments,
            };
            let gen = |c: [f64; 3], rng: &mut ChaCha8Rng| {
                generate(c, &mb.model, &ib.init, &mb.standardizer, &v, &provider, &opts, rng)
            };
            let ccfg = CalibrationConfig {
                steps,
                per_prompt,
                seed: g.seed,
                ..CalibrationConfig::default()
            };
            let report = calibrate(&records, axis, gen, pred, &ccfg).ok_or_else(|| fail("empty dataset"))?;
            match path {
                Some(p) => fs::write(p, report.to_csv())?,
                None => out.write_all(report.to_csv().as_bytes())?,
            }
        }
        Command::InspectWeights { path } => {
            let store = ParamStore::read_from(&mut fs::File::open(&path)?)?;
            writeln!(out, "{} tensors, {} scalars, checksum ok", store.len(), store.scalar_count())?;
            for i in 0..store.len() {
                let t = store.get(i);
                let hash = stable_hash(&t.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
                if store.name(i).starts_with("meta.") {
                    let vals: Vec<String> = t.data.iter().map(|&x| sig6(x)).collect();
                    writeln!(out, "{} {}x{} [{}]", store.name(i), t.rows, t.cols, vals.join(" "))?;
                } else {
                    writeln!(out, "{} {}x{} hash={hash:016x}", store.name(i), t.rows, t.cols)?;
                }
            }
        }
    }
    Ok(())
}

/// Parse `args` (including the program name) and run. Output goes to `out`,
/// diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(err, "{}", e.render());
            if !e.use_stderr() {
                let _ = write!(out, "{}", e.render());
            }
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
