use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gossip_sbm::bench::{self, ExperimentConfig, InitSpec};
use gossip_sbm::detect::{adaptive_t_selection, algorithm1, algorithm2, Detection};
use gossip_sbm::gossip::{simulate, Recording, Trajectory};
use gossip_sbm::oracle::{
    expected_final_opinions, expected_update_matrices, expected_update_matrices_averaged, OracleReport,
};
use gossip_sbm::sbm::{averaged_graph, karate_club, sample_sbm_s, two_block_opinions, Network, SbmSParams};
use gossip_sbm::{CommunityStructure, Error};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "gossip-sbm", version, about = "Gossip dynamics on block-model graphs and community detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an SBM-S graph (or emit the karate club network).
    SampleGraph(SampleGraphArgs),
    /// Run gossip dynamics on a graph and write the trajectory.
    Simulate(SimulateArgs),
    /// Cluster a recorded trajectory.
    Detect(DetectArgs),
    /// Expected update matrices and expected final opinions.
    Oracle(OracleArgs),
    /// Run a Monte-Carlo experiment.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct BlockArgs {
    /// Number of regular agents.
    #[arg(long, default_value_t = 90)]
    n_r: usize,
    /// Number of stubborn agents.
    #[arg(long, default_value_t = 10)]
    n_s: usize,
    /// Link probability within a community.
    #[arg(long, default_value_t = 0.45)]
    l_s: f64,
    /// Link probability across communities.
    #[arg(long, default_value_t = 0.05)]
    l_d: f64,
    /// Link probability between a stubborn half and its community.
    #[arg(long, default_value_t = 0.05)]
    l_stubborn: f64,
}

impl BlockArgs {
    fn params(&self) -> gossip_sbm::Result<SbmSParams> {
        SbmSParams::two_block(self.n_r, self.n_s, self.l_s, self.l_d, self.l_stubborn)
    }
}

#[derive(Args)]
struct SampleGraphArgs {
    #[command(flatten)]
    block: BlockArgs,
    /// Emit the karate club network instead of sampling.
    #[arg(long)]
    karate: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `json` for the graph document, `csv` for a whitespace edge list.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Graph file (JSON or edge list).
    #[arg(long)]
    graph: PathBuf,
    /// Number of gossip steps.
    #[arg(long)]
    horizon: u64,
    /// Record every k-th step (step 0 and the horizon are always recorded).
    #[arg(long, default_value_t = 1)]
    record_every: u64,
    /// Lower end of the uniform initial opinions.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    init_low: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    init_high: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectAlgorithm {
    Alg1,
    Alg2,
    Adaptive,
}

#[derive(Args)]
struct DetectArgs {
    /// Trajectory CSV written by `simulate`.
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long, value_enum)]
    algorithm: DetectAlgorithm,
    /// Step to cluster; defaults to round(n ln n) for alg1 and the last
    /// recorded step for alg2.
    #[arg(long)]
    t: Option<u64>,
    /// Network size used for the default alg1 step; defaults to the number
    /// of agents in --graph, else the number of regular agents.
    #[arg(long)]
    n: Option<usize>,
    /// Graph file whose labels are used to report accuracy.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Fraction of changed labels at which the adaptive rule stops.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Steps between adaptive checks.
    #[arg(long, default_value_t = 1)]
    stride: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Graph file; when absent the averaged graph of the block parameters is used.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    block: BlockArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Fig2,
    Fig3,
    Karate,
    Custom,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = std::thread::available_parallelism().map_or(1, |n| n.get()))]
    parallelism: usize,
    /// Extend the fig2 sweep to n = 10000.
    #[arg(long)]
    full: bool,
    /// Experiment description for `custom`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the network sizes, e.g. `--n-values 100,300`.
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    graph_samples: Option<u64>,
    #[arg(long)]
    trajectories: Option<u64>,
}

fn write_output(out: Option<&Path>, contents: &str) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, contents),
        None => io::stdout().write_all(contents.as_bytes()),
    }
}

fn read_network(path: &Path) -> gossip_sbm::Result<Network> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        Network::from_json(&text)
    } else {
        Network::from_edge_list(&text)
    }
}

fn sample_graph(args: SampleGraphArgs) -> gossip_sbm::Result<()> {
    let network = if args.karate {
        karate_club()
    } else {
        let params = args.block.params()?;
        let graph = sample_sbm_s(&params, &mut ChaCha8Rng::seed_from_u64(args.seed))?;
        let truth = CommunityStructure::canonical(graph.n_regular());
        Network::new(graph, two_block_opinions(args.block.n_s), Some(truth))?
    };
    let text = match args.format {
        Format::Json => network.to_json()? + "\n",
        Format::Csv => network.to_edge_list(),
    };
    write_output(args.out.as_deref(), &text)?;
    Ok(())
}

fn simulate_cmd(args: SimulateArgs) -> gossip_sbm::Result<()> {
    let network = read_network(&args.graph)?;
    let init = InitSpec::Uniform { low: args.init_low, high: args.init_high };
    init.validate()?;
    if args.record_every == 0 {
        return Err(Error::InvalidParameter("--record-every must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let x0 = init.draw(&network.truth_or_canonical(), &mut rng);
    let mut times: Vec<u64> = (0..=args.horizon).step_by(args.record_every as usize).collect();
    times.push(args.horizon);
    let recording = simulate(&network.graph, x0, network.stubborn_opinions.clone(), args.horizon, &mut rng, &times)?;
    match args.format {
        Format::Csv => match &args.out {
            Some(path) => recording.write_csv(fs::File::create(path)?)?,
            None => recording.write_csv(io::stdout().lock())?,
        },
        Format::Json => {
            let rows: Vec<_> = recording.rows().collect();
            write_output(args.out.as_deref(), &(serde_json::to_string(&rows)? + "\n"))?;
        }
    }
    Ok(())
}

fn detect_cmd(args: DetectArgs) -> gossip_sbm::Result<()> {
    let recording = Recording::read_csv(fs::File::open(&args.trajectory)?)?;
    let network = args.graph.as_deref().map(read_network).transpose()?;
    let n = args
        .n
        .or_else(|| network.as_ref().map(|net| net.graph.n_total()))
        .unwrap_or_else(|| recording.n_regular());
    let detection: Detection = match args.algorithm {
        DetectAlgorithm::Alg1 => algorithm1(&recording, n, None, args.t)?,
        DetectAlgorithm::Alg2 => algorithm2(&recording, args.t.unwrap_or_else(|| recording.last_step()))?,
        DetectAlgorithm::Adaptive => {
            let adaptive = adaptive_t_selection(&recording, args.threshold, args.stride)?;
            if !adaptive.converged {
                warn!("labels still changing at the end of the trajectory");
            }
            adaptive.detection
        }
    };
    let truth = network.as_ref().and_then(|net| net.truth.clone());
    let report = detection.report(truth.as_ref())?;
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let mut s = String::from("agent_index,label\n");
            for (i, l) in report.labels.iter().enumerate() {
                s += &format!("{},{l}\n", i + 1);
            }
            s
        }
    };
    write_output(args.out.as_deref(), &text)?;
    Ok(())
}

fn oracle_cmd(args: OracleArgs) -> gossip_sbm::Result<()> {
    let (dynamics, z) = match &args.graph {
        Some(path) => {
            let network = read_network(path)?;
            (expected_update_matrices(&network.graph)?, network.stubborn_opinions)
        }
        None => {
            let params = args.block.params()?;
            (expected_update_matrices_averaged(&averaged_graph(&params))?, two_block_opinions(args.block.n_s))
        }
    };
    let x = match expected_final_opinions(&dynamics, &z) {
        Ok(x) => Some(x),
        Err(e @ Error::Singular { .. }) => {
            warn!("{e}");
            None
        }
        Err(e) => return Err(e),
    };
    let report = OracleReport::new(&dynamics, x);
    write_output(args.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(())
}

fn experiment_cmd(args: ExperimentArgs) -> gossip_sbm::Result<()> {
    let mut config: ExperimentConfig = match args.kind {
        ExperimentKind::Fig2 => bench::config_fig2(args.full),
        ExperimentKind::Fig3 => bench::config_fig3(),
        ExperimentKind::Karate => bench::config_karate(),
        ExperimentKind::Custom => {
            let path = args
                .config
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("custom experiments need --config".into()))?;
            bench::config_custom(&fs::read_to_string(path)?)?
        }
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(n_values) = &args.n_values {
        config.n_values = n_values.clone();
    }
    if let Some(g) = args.graph_samples {
        config.graph_samples = g;
    }
    if let Some(k) = args.trajectories {
        config.trajectories_per_graph = k;
    }
    let output = bench::run_experiment(&config, args.parallelism, &args.out)?;
    for row in &output.summary.rows {
        let mean = row.mean_accuracy.map_or("-".to_string(), |m| format!("{m:.4}"));
        let probs: Vec<String> = row.p_at_least.iter().map(|p| format!("P(>={})={:.3}", p.level, p.probability)).collect();
        println!("n={:<6} {} runs={} failed={} mean={mean} {}", row.n, row.algorithm.as_str(), row.runs, row.failed, probs.join(" "));
    }
    info!("results written to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::SampleGraph(a) => sample_graph(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let missing_file = matches!(&e, Error::Io(io) if io.kind() == io::ErrorKind::NotFound);
            ExitCode::from(if e.is_invalid_input() || missing_file { 1 } else { 2 })
        }
    }
}
