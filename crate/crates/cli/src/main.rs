//! dispatch-lab: build the road graph, synthesize demand, run dispatch
//! simulations, fit the latency models, and answer tip-advice queries.
//!
//! Exit codes: 0 success, 2 usage, 3 data/config error, 4 infeasible advice.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dispatch_lab::advisory::{
    advise_tip, filter_deliverable, logistic_fit, ols_fit, partial_dependence, roc_auc,
    ArtifactMetadata, FeatureRow, LogisticConfig, ModelArtifact, TipContext, LINEAR_COLUMNS,
};
use dispatch_lab::graph::{
    build_adjacency, floyd_warshall, travel_time, RoadGraph, ShortestPathMatrix, VertexKind,
    DEFAULT_SPEED_KMH,
};
use dispatch_lab::io;
use dispatch_lab::seed::config_hash;
use dispatch_lab::sim::{flatten_records, ScenarioConfig, ScenarioRun, Simulation};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dispatch-lab", version, about)]
struct Cli {
    /// Output directory; falls back to $DISPATCH_LAB_OUT, then ".".
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the road graph, print a summary, and cache the shortest-path
    /// matrix as apsp.bin.
    Graph(GraphArgs),
    /// Run one scenario or a sweep; writes records.csv and metadata.
    Simulate(SimulateArgs),
    /// Fit the deliverability filter and the latency model from records.csv.
    Fit(FitArgs),
    /// Advise the smallest tip that meets a target latency.
    Advise(AdviseArgs),
    /// Reproduce the headline experiment: the courier-count sweep and the
    /// congested tip scenario.
    SweepDemo(SweepDemoArgs),
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long, default_value = "fixtures/tianhe_sample/nodes.csv")]
    nodes: PathBuf,
    #[arg(long, default_value = "fixtures/tianhe_sample/edges.csv")]
    edges: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "fixtures/tianhe_sample/nodes.csv")]
    nodes: PathBuf,
    #[arg(long, default_value = "fixtures/tianhe_sample/edges.csv")]
    edges: PathBuf,
    #[arg(long, default_value = "fixtures/survey.json")]
    survey: PathBuf,
    /// Scenario grid (sweep.json); overrides the single-scenario flags.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Fraction of orders that tip.
    #[arg(long, default_value_t = 0.3)]
    proportion: f64,
    /// Mean tip amount, RMB.
    #[arg(long, default_value_t = 10.0)]
    avg_tip: f64,
    /// Tip standard deviation; defaults to avg_tip / 3.
    #[arg(long)]
    tip_sigma: Option<f64>,
    #[arg(long, default_value_t = 600)]
    deliverymen: u32,
    #[arg(long, default_value_t = 2000)]
    orders: u32,
    #[arg(long, default_value_t = 180)]
    horizon: u32,
    #[arg(long, default_value_t = 1)]
    tick: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit per-courier event logs (trace_###.csv).
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    records: PathBuf,
    /// Output model file name.
    #[arg(long, default_value = "model.json")]
    model: PathBuf,
    /// Fit a logistic intercept as well.
    #[arg(long)]
    intercept: bool,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: u32,
    /// Seed stamped into the artifact metadata.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AdviseArgs {
    #[arg(long)]
    model: PathBuf,
    /// Target waiting time, minutes.
    #[arg(long)]
    target_latency: f64,
    /// Ordering time, minutes from noon.
    #[arg(long, default_value_t = 0.0)]
    time: f64,
    #[arg(long, default_value_t = 10.0)]
    avg_tip: f64,
    #[arg(long, default_value_t = 0.3)]
    proportion: f64,
    #[arg(long, default_value_t = 600.0)]
    deliverymen: f64,
    /// Restaurant-to-destination distance, meters.
    #[arg(long, default_value_t = 2000.0)]
    distance: f64,
    #[arg(long, default_value_t = 100.0)]
    max_tip: f64,
}

#[derive(Args)]
struct SweepDemoArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Seeds per courier-count cell.
    #[arg(long, default_value_t = 20)]
    replicates: u32,
    #[arg(long, default_value_t = 2000)]
    orders: u32,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli
        .out_dir
        .or_else(|| std::env::var_os("DISPATCH_LAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    match run(cli.command, &out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<dispatch_lab::Error>() {
            return match e {
                dispatch_lab::Error::TipInfeasible { .. }
                | dispatch_lab::Error::TipHasNoEffect => 4,
                _ => 3,
            };
        }
    }
    3
}

fn run(command: Command, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    match command {
        Command::Graph(args) => cmd_graph(&args, out_dir),
        Command::Simulate(args) => cmd_simulate(&args, out_dir),
        Command::Fit(args) => cmd_fit(&args, out_dir),
        Command::Advise(args) => cmd_advise(&args),
        Command::SweepDemo(args) => cmd_sweep_demo(&args, out_dir),
    }
}

fn load_world(nodes: &Path, edges: &Path) -> Result<(RoadGraph, ShortestPathMatrix, u64)> {
    let graph = io::load_graph(nodes, edges)?;
    let mut input = fs::read(nodes).with_context(|| nodes.display().to_string())?;
    input.extend(fs::read(edges).with_context(|| edges.display().to_string())?);
    let hash = config_hash(&input);
    let apsp = floyd_warshall(&build_adjacency(&graph));
    Ok((graph, apsp, hash))
}

fn cmd_graph(args: &GraphArgs, out_dir: &Path) -> Result<()> {
    let (graph, apsp, input_hash) = load_world(&args.nodes, &args.edges)?;
    let count = |kind| {
        graph
            .vertices()
            .iter()
            .filter(|v| v.kind == kind)
            .count()
    };
    println!(
        "graph: {} vertices ({} restaurants, {} destinations, {} crossings), {} edges",
        graph.vertex_count(),
        count(VertexKind::Restaurant),
        count(VertexKind::Destination),
        count(VertexKind::Crossing),
        graph.edges().len()
    );
    let diameter = apsp.diameter_m();
    println!(
        "diameter: {} m ({:.1} min at {} km/h)",
        diameter,
        travel_time(f64::from(diameter), DEFAULT_SPEED_KMH)?,
        DEFAULT_SPEED_KMH
    );
    let cache = out_dir.join("apsp.bin");
    io::write_apsp(&cache, &apsp, input_hash)?;
    println!("apsp cache: {} (input hash {input_hash:016x})", cache.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct ScenarioMeta {
    index: usize,
    seed: u64,
    config_hash: String,
    record_count: usize,
    config: ScenarioConfig,
}

#[derive(serde::Serialize)]
struct SimulateMeta {
    master_seed: u64,
    scenarios: Vec<ScenarioMeta>,
}

fn write_run_outputs(
    runs: &[ScenarioRun],
    master_seed: u64,
    trace: bool,
    out_dir: &Path,
) -> Result<()> {
    let records = flatten_records(runs);
    io::write_records(&out_dir.join("records.csv"), &records)?;
    let meta = SimulateMeta {
        master_seed,
        scenarios: runs
            .iter()
            .enumerate()
            .map(|(index, run)| ScenarioMeta {
                index,
                seed: run.config.seed,
                config_hash: io::config_hash_hex(&run.config),
                record_count: run.records.len(),
                config: run.config.clone(),
            })
            .collect(),
    };
    let meta_path = out_dir.join("records.meta.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?.into_bytes())?;
    if trace {
        for (index, run) in runs.iter().enumerate() {
            io::write_trace(&out_dir.join(format!("trace_{index:03}.csv")), &run.events)?;
        }
    }
    println!(
        "wrote {} records over {} scenario(s) to {}",
        records.len(),
        runs.len(),
        out_dir.join("records.csv").display()
    );
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out_dir: &Path) -> Result<()> {
    let (graph, apsp, _) = load_world(&args.nodes, &args.edges)?;
    let marginals = io::load_survey(&args.survey)?;
    let sim = Simulation::new(&graph, &apsp, &marginals);
    let (grid, master_seed) = match &args.sweep {
        Some(path) => {
            let plan = io::load_sweep(path)?;
            let seed = if args.seed != 0 { args.seed } else { plan.master_seed };
            (plan.expand()?, seed)
        }
        None => {
            let cfg = ScenarioConfig {
                proportion: args.proportion,
                courier_count: args.deliverymen,
                avg_tip: args.avg_tip,
                tip_sigma: args.tip_sigma,
                seed: 0, // assigned by the sweep runner
                horizon_min: args.horizon,
                tick_min: args.tick,
                order_count: args.orders,
            };
            (vec![cfg], args.seed)
        }
    };
    let runs = sim.sweep(&grid, master_seed, args.trace)?;
    write_run_outputs(&runs, master_seed, args.trace, out_dir)
}

fn print_table(header: &str, rows: &[(String, Vec<f64>)], columns: &[&str]) {
    println!("{header}");
    print!("  {:<14}", "factor");
    for c in columns {
        print!("{c:>14}");
    }
    println!();
    for (name, values) in rows {
        print!("  {name:<14}");
        for v in values {
            print!("{v:>14.6}");
        }
        println!();
    }
}

fn cmd_fit(args: &FitArgs, out_dir: &Path) -> Result<()> {
    let records = io::read_records(&args.records)?;
    if records.is_empty() {
        anyhow::bail!("no records in {}", args.records.display());
    }
    let rows: Vec<FeatureRow> = records.iter().map(FeatureRow::from_record).collect();
    let config = LogisticConfig {
        learning_rate: args.learning_rate,
        max_iters: args.max_iters,
        intercept: args.intercept,
        ..LogisticConfig::default()
    };
    let logistic = logistic_fit(&rows, &config)?;
    let logistic_names = ["time2", "avg_price", "proportion", "deliverymen", "tip"];
    print_table(
        "deliverability filter (logistic):",
        &logistic_names
            .iter()
            .zip(&logistic.theta)
            .map(|(n, &v)| (n.to_string(), vec![v]))
            .collect::<Vec<_>>(),
        &["coefficient"],
    );
    if let Some(b) = logistic.intercept {
        println!("  intercept      {b:>14.6}");
    }
    let scores: Vec<f64> = rows
        .iter()
        .map(|r| dispatch_lab::advisory::logistic_predict(&logistic, r).probability)
        .collect();
    let labels: Vec<u8> = rows.iter().map(|r| r.y_deliverable).collect();
    match roc_auc(&scores, &labels) {
        Ok(auc) => println!("  training AUC   {auc:>14.6}"),
        Err(e) => println!("  training AUC   undefined ({e})"),
    }

    let kept = filter_deliverable(&logistic, &rows);
    println!(
        "filter kept {} of {} rows for the latency model",
        kept.len(),
        rows.len()
    );
    if kept.is_empty() {
        return Err(dispatch_lab::Error::EmptyFilter)
            .context("the deliverability filter rejected every row");
    }
    let linear = ols_fit(&kept)?;
    print_table(
        "latency model (least squares):",
        &LINEAR_COLUMNS
            .iter()
            .enumerate()
            .map(|(j, n)| {
                (
                    n.to_string(),
                    vec![linear.beta[j], linear.se[j], linear.t_values[j]],
                )
            })
            .collect::<Vec<_>>(),
        &["coefficient", "std_err", "t_value"],
    );
    println!(
        "  n = {}, SSE = {:.4}, s2 = {:.4}, F = {:.4}",
        linear.n, linear.sse, linear.s2, linear.f_statistic
    );

    // partial-dependence curves for the regression figures
    let mut out = String::from("feature,value,predicted_latency\n");
    for (j, name) in LINEAR_COLUMNS.iter().enumerate().skip(1) {
        for (value, latency) in partial_dependence(&linear, &kept, j - 1, 25) {
            out.push_str(&format!("{name},{value},{latency}\n"));
        }
    }
    fs::write(out_dir.join("partial_dependence.csv"), out)?;

    let artifact = ModelArtifact {
        logistic,
        linear,
        metadata: ArtifactMetadata {
            seed: args.seed,
            record_count: records.len(),
            config_hash: format!(
                "{:016x}",
                config_hash(&fs::read(&args.records).unwrap_or_default())
            ),
        },
    };
    let model_path = out_dir.join(&args.model);
    io::write_model(&model_path, &artifact)?;
    println!("model written to {}", model_path.display());
    Ok(())
}

fn cmd_advise(args: &AdviseArgs) -> Result<()> {
    let artifact = io::read_model(&args.model)?;
    let ctx = TipContext {
        x1: args.time * args.time,
        x2: args.avg_tip,
        x3: args.proportion,
        x4: args.deliverymen,
        x6: args.distance,
    };
    let advice = advise_tip(
        &artifact.linear.beta,
        &ctx,
        args.target_latency,
        args.max_tip,
    )?;
    println!(
        "advised tip: {:.2} RMB (predicted latency {:.3} min, target {} min)",
        advice.tip_rmb, advice.predicted_latency_min, args.target_latency
    );
    Ok(())
}

fn cmd_sweep_demo(args: &SweepDemoArgs, out_dir: &Path) -> Result<()> {
    let nodes = PathBuf::from("fixtures/tianhe_sample/nodes.csv");
    let edges = PathBuf::from("fixtures/tianhe_sample/edges.csv");
    let (graph, apsp, _) = load_world(&nodes, &edges)?;
    let marginals = io::load_survey(Path::new("fixtures/survey.json"))?;
    let sim = Simulation::new(&graph, &apsp, &marginals);

    // courier-count sweep: fleet size against mean delivered latency
    let mut grid = Vec::new();
    for &c in &[300u32, 600, 900] {
        for _ in 0..args.replicates {
            grid.push(ScenarioConfig {
                courier_count: c,
                proportion: 0.5,
                avg_tip: 15.0,
                order_count: args.orders,
                ..ScenarioConfig::default()
            });
        }
    }
    let runs = sim.sweep(&grid, args.seed, false)?;
    write_run_outputs(&runs, args.seed, false, out_dir)?;
    let mut summary = String::from("courier_count,seed,mean_delivered_latency\n");
    println!("fleet size vs mean delivered latency:");
    for &c in &[300u32, 600, 900] {
        let mut cell_means = Vec::new();
        for run in runs.iter().filter(|r| r.config.courier_count == c) {
            let delivered: Vec<f64> = run
                .records
                .iter()
                .filter(|r| r.delivered())
                .map(|r| r.latency)
                .collect();
            let mean = delivered.iter().sum::<f64>() / delivered.len().max(1) as f64;
            summary.push_str(&format!("{c},{},{mean}\n", run.config.seed));
            cell_means.push(mean);
        }
        let group = cell_means.iter().sum::<f64>() / cell_means.len() as f64;
        println!("  c = {c:>4}: mean latency {group:.2} min over {} seeds", cell_means.len());
    }
    fs::write(out_dir.join("trend_summary.csv"), summary)?;

    // congested tip scenario: tip amount against latency among tipped orders
    let tip_cfg = ScenarioConfig {
        courier_count: 150,
        proportion: 0.9,
        avg_tip: 50.0,
        tip_sigma: Some(50.0),
        order_count: args.orders,
        seed: dispatch_lab::seed::derive_seed(args.seed, 0xD1),
        ..ScenarioConfig::default()
    };
    let tip_run = sim.run_scenario(&tip_cfg)?;
    io::write_records(&out_dir.join("tip_scenario.csv"), &tip_run.records)?;
    let tipped: Vec<_> = tip_run
        .records
        .iter()
        .filter(|r| r.delivered() && r.tip > 0.0)
        .collect();
    let tips: Vec<f64> = tipped.iter().map(|r| r.tip).collect();
    let lats: Vec<f64> = tipped.iter().map(|r| r.latency).collect();
    let r = dispatch_lab::demand::pearson(&tips, &lats)?;
    println!(
        "tip scenario (c = {}, p = {}, m = {}): corr(tip, latency) = {r:.4} over {} delivered tipped orders",
        tip_cfg.courier_count,
        tip_cfg.proportion,
        tip_cfg.avg_tip,
        tipped.len()
    );
    Ok(())
}
