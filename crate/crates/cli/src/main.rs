use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use labelnet::dataset::{load_csv, load_mulan, read_csv, write_csv, MultiLabelDataset};
use labelnet::discovery::{discover, DiscoveryConfig, RelationshipSet};
use labelnet::evaluation::{compare, EvaluationReport, FoldEvaluation, RelationshipCounts};
use labelnet::inference::{CompiledNetwork, DEFAULT_CLAMP};
use labelnet::network::{build_network, LabelNetwork};
use labelnet::pipeline::{correct_predictions, run_cv, Exploit, LearnerSpec, PipelineConfig, PredictionTable};
use labelnet::Error;

/// Discover deterministic label relationships and correct multi-label
/// marginals with them.
#[derive(Debug, Parser)]
#[command(name = "labelnet", version)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine relationships from a dataset and print them as JSON.
    Discover {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        mining: MiningArgs,
        /// Output file, `-` for stdout.
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
    },
    /// Build the network for a relationships file.
    BuildNet {
        /// Relationships JSON (`-` for stdin).
        relationships: PathBuf,
        /// Dataset whose labels the relationships were mined on; also
        /// records leak training frequencies.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Label columns (CSV) or, without a dataset, the label set.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        /// Mulan label XML for an ARFF dataset.
        #[arg(long)]
        xml: Option<PathBuf>,
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Append leak-label columns to a dataset.
    Leaks {
        #[command(flatten)]
        data: DatasetArgs,
        /// Relationships JSON mined on this dataset.
        #[arg(long)]
        relationships: PathBuf,
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
    },
    /// Correct a predictions file with a network.
    Correct {
        /// Network JSON.
        #[arg(long)]
        network: PathBuf,
        /// Predictions CSV (`-` for stdin).
        #[arg(long, default_value = "-")]
        predictions: PathBuf,
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CLAMP)]
        clamp_epsilon: f64,
    },
    /// Score predictions against a dataset's labels.
    Evaluate {
        #[command(flatten)]
        data: DatasetArgs,
        /// Predictions to score (ids are dataset row indices).
        #[arg(long)]
        predictions: PathBuf,
        /// Baseline predictions to compare against.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Cross-validated discovery, learning, correction and evaluation.
    Pipeline {
        #[command(flatten)]
        data: DatasetArgs,
        /// Flat `key = value` config file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// prior | nb | external:<path>
        #[arg(long)]
        learner: Option<String>,
        #[arg(long, value_enum)]
        exploit: Option<ExploitArg>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        clamp_epsilon: Option<f64>,
        #[command(flatten)]
        mining: MiningArgs,
        /// Directory for the report and per-fold artifacts.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// CSV dataset (`-` for stdin) or ARFF with `--xml`.
    dataset: PathBuf,
    /// Label column names of a CSV dataset.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Mulan label XML for an ARFF dataset.
    #[arg(long)]
    xml: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MiningArgs {
    #[arg(long)]
    minsup_entail: Option<usize>,
    #[arg(long)]
    minsup_excl: Option<usize>,
    /// Double the exclusion support until the caps hold.
    #[arg(long)]
    escalate: bool,
    /// Relationship cap for escalation (implies --escalate).
    #[arg(long)]
    escalate_cap: Option<usize>,
    /// Mining time cap in seconds for escalation (implies --escalate).
    #[arg(long)]
    escalate_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExploitArg {
    Entail,
    Excl,
    Both,
    None,
}

impl From<ExploitArg> for Exploit {
    fn from(e: ExploitArg) -> Self {
        match e {
            ExploitArg::Entail => Exploit::Entail,
            ExploitArg::Excl => Exploit::Excl,
            ExploitArg::Both => Exploit::Both,
            ExploitArg::None => Exploit::None,
        }
    }
}

impl MiningArgs {
    fn apply(&self, config: &mut PipelineConfig) -> labelnet::Result<()> {
        if let Some(m) = self.minsup_entail {
            config.minsup_entail = m;
        }
        if let Some(m) = self.minsup_excl {
            config.minsup_excl = m;
        }
        if self.escalate && config.escalation.is_none() {
            config.set("escalate_cap", &labelnet::pipeline::DEFAULT_ESCALATE_CAP.to_string())?;
        }
        if let Some(c) = self.escalate_cap {
            config.set("escalate_cap", &c.to_string())?;
        }
        if let Some(t) = self.escalate_time {
            config.set("escalate_time_secs", &t.to_string())?;
        }
        Ok(())
    }

    fn discovery(&self) -> labelnet::Result<DiscoveryConfig> {
        let mut c = PipelineConfig::default();
        self.apply(&mut c)?;
        Ok(c.discovery())
    }
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = Result<(), Failure>;

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Data(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    if is_stdio(path) {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf).map_err(|e| io_err(path, e))?;
        Ok(buf)
    } else {
        fs::read(path).map_err(|e| io_err(path, e))
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read_input(path)?).map_err(|_| Failure::Data(Error::Shape(format!("{}: not UTF-8", path.display()))))
}

fn write_output(path: &Path, bytes: &[u8]) -> CmdResult {
    if is_stdio(path) {
        let mut out = io::stdout().lock();
        out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| io_err(path, e))
    } else {
        fs::write(path, bytes).map_err(|e| io_err(path, e))
    }
}

fn load_dataset(path: &Path, labels: &[String], xml: Option<&Path>) -> Result<MultiLabelDataset, Failure> {
    match xml {
        Some(xml) => {
            if !labels.is_empty() {
                return Err(Failure::Usage("--labels and --xml are mutually exclusive".into()));
            }
            Ok(load_mulan(path, xml)?)
        }
        None if labels.is_empty() => Err(Failure::Usage("a dataset needs --labels (CSV) or --xml (ARFF)".into())),
        None if is_stdio(path) => Ok(read_csv(read_input(path)?.as_slice(), labels, "stdin")?),
        None => Ok(load_csv(path, labels)?),
    }
}

impl DatasetArgs {
    fn load(&self) -> Result<MultiLabelDataset, Failure> {
        load_dataset(&self.dataset, &self.labels, self.xml.as_deref())
    }
}

fn read_predictions(path: &Path) -> Result<PredictionTable, Failure> {
    Ok(PredictionTable::read_csv(read_input(path)?.as_slice())?)
}

fn table_bytes(table: &PredictionTable) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    Ok(buf)
}

fn with_newline(mut s: String) -> Vec<u8> {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s.into_bytes()
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Discover { data, mining, output } => {
            let ds = data.load()?;
            let rel = discover(ds.labels(), &mining.discovery()?)?;
            write_output(&output, &with_newline(rel.to_json()?))
        }
        Command::BuildNet {
            relationships,
            dataset,
            labels,
            xml,
            output,
            format,
        } => {
            let rel = RelationshipSet::from_json(&read_text(&relationships)?)?;
            let net = match dataset {
                Some(path) => {
                    let ds = load_dataset(&path, &labels, xml.as_deref())?;
                    let mut net = build_network(&rel, ds.labels().names())?;
                    let augmented = net.leak_labels(ds.labels())?;
                    net.set_leak_frequencies(&augmented)?;
                    net
                }
                None if labels.is_empty() => {
                    return Err(Failure::Usage("build-net needs --dataset or --labels".into()));
                }
                None => build_network(&rel, &labels)?,
            };
            let text = match format {
                Format::Json => net.to_json()?,
                Format::Text => network_text(&net),
            };
            write_output(&output, &with_newline(text))
        }
        Command::Leaks {
            data,
            relationships,
            output,
        } => {
            let ds = data.load()?;
            let rel = RelationshipSet::from_json(&read_text(&relationships)?)?;
            let net = build_network(&rel, ds.labels().names())?;
            let augmented = net.leak_labels(ds.labels())?;
            let out = MultiLabelDataset::new(ds.name.clone(), ds.features().clone(), augmented)?;
            let mut buf = Vec::new();
            write_csv(&out, &mut buf)?;
            write_output(&output, &buf)
        }
        Command::Correct {
            network,
            predictions,
            output,
            clamp_epsilon,
        } => {
            if is_stdio(&network) && is_stdio(&predictions) {
                return Err(Failure::Usage("only one input can come from stdin".into()));
            }
            let net = LabelNetwork::from_json(&read_text(&network)?)?;
            let raw = read_predictions(&predictions)?;
            let compiled = CompiledNetwork::new(&net)?;
            let corrected = correct_predictions(&compiled, &raw, clamp_epsilon)?;
            write_output(&output, &table_bytes(&corrected)?)
        }
        Command::Evaluate {
            data,
            predictions,
            baseline,
            output,
            format,
        } => {
            let ds = data.load()?;
            let after = read_predictions(&predictions)?;
            let before = match &baseline {
                Some(p) => read_predictions(p)?,
                None => after.clone(),
            };
            let ids: Vec<String> = (0..ds.n_instances()).map(|i| i.to_string()).collect();
            let (before, after) = (before.select_ids(&ids)?, after.select_ids(&ids)?);
            let comparison = compare(&before, &after, ds.labels())?;
            let report = EvaluationReport::from_folds(vec![FoldEvaluation {
                fold: 0,
                n_test: ds.n_instances(),
                relationships: RelationshipCounts::default(),
                comparison: Some(comparison),
            }])?;
            write_output(&output, &with_newline(render(&report, format)?))
        }
        Command::Pipeline {
            data,
            config,
            learner,
            exploit,
            folds,
            seed,
            clamp_epsilon,
            mining,
            output_dir,
            format,
        } => {
            let mut c = match &config {
                Some(p) => PipelineConfig::from_kv(&read_text(p)?)?,
                None => PipelineConfig::default(),
            };
            if let Some(l) = learner {
                c.learner = l.parse::<LearnerSpec>()?;
            }
            if let Some(e) = exploit {
                c.exploit = e.into();
            }
            if let Some(f) = folds {
                c.folds = f;
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(e) = clamp_epsilon {
                c.clamp_epsilon = e;
            }
            mining.apply(&mut c)?;
            let ds = data.load()?;
            let (results, report) = run_cv(&ds, &c)?;
            if let Some(dir) = &output_dir {
                fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
                for r in &results {
                    let fdir = dir.join(format!("fold_{}", r.fold));
                    fs::create_dir_all(&fdir).map_err(|e| io_err(&fdir, e))?;
                    write_output(&fdir.join("relationships.json"), &with_newline(r.relationships.to_json()?))?;
                    write_output(&fdir.join("network.json"), &with_newline(r.network.to_json()?))?;
                    write_output(&fdir.join("raw.csv"), &table_bytes(&r.raw)?)?;
                    write_output(&fdir.join("corrected.csv"), &table_bytes(&r.corrected)?)?;
                }
                write_output(&dir.join("report.json"), &with_newline(report.to_json()?))?;
                write_output(&dir.join("report.txt"), report.to_text().as_bytes())?;
            }
            write_output(Path::new("-"), &with_newline(render(&report, format)?))
        }
    }
}

fn render(report: &EvaluationReport, format: Format) -> labelnet::Result<String> {
    match format {
        Format::Json => report.to_json(),
        Format::Text => Ok(report.to_text()),
    }
}

fn network_text(net: &LabelNetwork) -> String {
    let s = net.summary();
    let mut out = format!(
        "{} nodes: {} labels, {} entailment leaks, {} exclusion leaks, {} constraints; {} edges\n",
        net.len(),
        s.labels,
        s.entail_leaks,
        s.excl_leaks,
        s.constraints,
        s.edges
    );
    for n in net.nodes() {
        let parents: Vec<&str> = n.parents.iter().map(|&p| net.node(p).name.as_str()).collect();
        out.push_str(&format!("{:<24} {:?}", n.name, n.cpt));
        if !parents.is_empty() {
            out.push_str(&format!(" <- {}", parents.join(", ")));
        }
        if let Some(v) = n.observed {
            out.push_str(&format!(" [observed {v}]"));
        }
        out.push('\n');
    }
    for (alias, rep) in net.aliases() {
        out.push_str(&format!("{alias} = {rep}\n"));
    }
    out
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
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            match e {
                _ if e.is_internal() => ExitCode::from(3),
                Error::Config(_) | Error::ZeroCap => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
