use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use laff::bargaining::{
    bully_solution, enforceable_ebs, punishment_length, security_pair, EnforceParams, PairSolution, SlackMode,
};
use laff::engine::MatchConfig;
use laff::evaluation::{
    benchmark_for, exploiter_regret, play, pure_nash, regret_curve, replicator_ensemble, round_robin, OpponentClass,
    Tournament,
};
use laff::games;
use laff::io;
use laff::matrix_game::BimatrixGame;
use laff::opponents::OpponentSpec;

#[derive(Parser)]
#[command(
    name = "laff",
    version,
    about = "Repeated bimatrix games: bargaining, LAFF and tournaments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Security values, enforceable EBS and Bully solutions of a game, as JSON.
    Solve(SolveArgs),
    /// Benchmark value of player 1 against an opponent, as JSON.
    Benchmark(BenchmarkArgs),
    /// Play one match and optionally write its trace.
    Match(MatchArgs),
    /// Play one match and write its average-regret curve.
    Regret(RegretArgs),
    /// Round-robin tournament; writes learning_game.csv and trials.csv.
    Tournament(TournamentArgs),
    /// Replicator dynamics over a tournament; writes population.csv.
    Replicator(ReplicatorArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Horizon T.
    #[arg(long = "T", default_value_t = 20_000)]
    horizon: usize,
    /// Memory length K.
    #[arg(long = "K", default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, env = "LAFF_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    c1: f64,
    #[arg(long, default_value_t = 0.005)]
    c3: f64,
    #[arg(long, default_value_t = 0.005)]
    c4: f64,
    #[arg(long, value_enum, default_value_t = Slack::Practical)]
    slack: Slack,
}

#[derive(ValueEnum, Clone, Copy)]
enum Slack {
    Practical,
    Scaled,
}

impl Common {
    fn config(&self) -> Result<MatchConfig> {
        let mut c = MatchConfig {
            horizon: self.horizon,
            k: self.k,
            eps: self.eps,
            delta: self.delta,
            seed: self.seed,
            ..Default::default()
        };
        c.tuning.c1 = self.c1;
        c.tuning.c3 = self.c3;
        c.tuning.c4 = self.c4;
        c.tuning.slack = match self.slack {
            Slack::Practical => SlackMode::Practical,
            Slack::Scaled => SlackMode::Scaled,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Built-in game name or path to a JSON game file.
    #[arg(long)]
    game: String,
    #[arg(long = "K", default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    game: String,
    /// Opponent spec, e.g. `bully` or `ftft:{"p":0.5}`.
    #[arg(long)]
    opponent: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    game: String,
    #[arg(long)]
    p1: String,
    #[arg(long)]
    p2: String,
    #[command(flatten)]
    common: Common,
    /// Trace CSV destination.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct RegretArgs {
    #[arg(long)]
    game: String,
    /// Opponent in seat 2.
    #[arg(long)]
    opponent: String,
    /// Agent in seat 1.
    #[arg(long, default_value = "laff")]
    agent: String,
    /// Measure player 2's regret against its EBS value plus this margin instead.
    #[arg(long)]
    exploiter_margin: Option<f64>,
    #[command(flatten)]
    common: Common,
    /// Keep every n-th row of the curve.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write an SVG plot next to the CSV.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Clone)]
struct TournamentOpts {
    /// Algorithm spec; repeat for each entrant.
    #[arg(long = "alg", default_values_t = ["laff".to_string(), "bully".to_string(), "q".to_string(), "fp".to_string()])]
    algs: Vec<String>,
    /// `test`, `training`, `all`, or a comma-separated list of games.
    #[arg(long, default_value = "test")]
    games: String,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TournamentArgs {
    #[command(flatten)]
    opts: TournamentOpts,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplicatorArgs {
    /// Reuse a trials.csv instead of running a tournament.
    #[arg(long = "trials-file")]
    trials_file: Option<PathBuf>,
    #[command(flatten)]
    opts: TournamentOpts,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 500)]
    generations: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    svg: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve(a) => solve(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Match(a) => run_one(a),
        Command::Regret(a) => regret(a),
        Command::Tournament(a) => tournament(a),
        Command::Replicator(a) => replicator(a),
    }
}

fn load(name: &str) -> Result<BimatrixGame> {
    games::load_game(name).with_context(|| format!("loading game {name:?}"))
}

fn spec(text: &str) -> Result<OpponentSpec> {
    OpponentSpec::parse(text).with_context(|| format!("parsing algorithm {text:?}"))
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn solution_json(s: &PairSolution, kp: usize) -> serde_json::Value {
    json!({
        "kind": s.kind,
        "xa": [s.xa.a1, s.xa.a2],
        "xb": [s.xb.a1, s.xb.a2],
        "alpha": s.alpha,
        "u": [s.u1, s.u2],
        "deviation_profit": s.deviation_profit,
        "k_prime": kp,
    })
}

fn solve(a: SolveArgs) -> Result<()> {
    let game = load(&a.game)?;
    let ep = EnforceParams::new(a.k, a.eps)?;
    let mu_s = security_pair(&game);
    let ebs = enforceable_ebs(&game, ep);
    let bully = bully_solution(&game, ep);
    let kp_ebs = punishment_length(&ebs, ep, mu_s.1)?;
    let kp_bully = punishment_length(&bully, ep, mu_s.1)?;
    print_json(&json!({
        "game": game.name,
        "K": a.k,
        "eps": a.eps,
        "mu_s": [mu_s.0, mu_s.1],
        "ebs": solution_json(&ebs, kp_ebs),
        "bully": solution_json(&bully, kp_bully),
    }))
}

fn class_name(c: &OpponentClass) -> &'static str {
    match c {
        OpponentClass::BoundedMemory(_) => "bounded_memory",
        OpponentClass::Adversarial => "adversarial",
        OpponentClass::FollowerConditional => "follower_conditional",
        OpponentClass::FollowerUnconditional => "follower_unconditional",
    }
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let game = load(&a.game)?;
    let config = a.common.config()?;
    let opp = spec(&a.opponent)?;
    let class = OpponentClass::of(&opp);
    let value = benchmark_for(&game, &class, &config)?;
    print_json(&json!({
        "game": game.name,
        "opponent": opp.label(),
        "class": class_name(&class),
        "benchmark": value,
    }))
}

fn run_one(a: MatchArgs) -> Result<()> {
    let game = load(&a.game)?;
    let config = a.common.config()?;
    let (p1, p2) = (spec(&a.p1)?, spec(&a.p2)?);
    let trace = play(&game, &p1, &p2, &config)?;
    if let Some(path) = &a.trace {
        io::write_trace(&trace, create(path)?)?;
    }
    let (m1, m2) = trace.mean_rewards();
    print_json(&json!({
        "game": game.name,
        "p1": p1.label(),
        "p2": p2.label(),
        "T": trace.len(),
        "seed": config.seed,
        "mean_rewards": [m1, m2],
    }))
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn regret(a: RegretArgs) -> Result<()> {
    let game = load(&a.game)?;
    let config = a.common.config()?;
    let (agent, opp) = (spec(&a.agent)?, spec(&a.opponent)?);
    let trace = play(&game, &agent, &opp, &config)?;
    let (curve, benchmark) = match a.exploiter_margin {
        Some(c) => {
            let mu_e2 = enforceable_ebs(&game, config.enforce_params()).u2;
            (exploiter_regret(&trace, mu_e2, c), mu_e2 + c)
        }
        None => {
            let b = benchmark_for(&game, &OpponentClass::of(&opp), &config)?;
            (regret_curve(&trace, b), b)
        }
    };
    let stem = format!("regret_{}_{}", file_safe(&game.name), file_safe(&opp.label()));
    let csv_path = a.out.join(format!("{stem}.csv"));
    io::write_regret(&curve, a.stride, create(&csv_path)?)?;
    if a.svg {
        let pts = curve
            .averages()
            .into_iter()
            .enumerate()
            .map(|(t, v)| ((t + 1) as f64, v))
            .collect();
        io::write_svg(&[(opp.label(), pts)], create(&a.out.join(format!("{stem}.svg")))?)?;
    }
    print_json(&json!({
        "game": game.name,
        "agent": agent.label(),
        "opponent": opp.label(),
        "benchmark": benchmark,
        "final_avg_regret": curve.average_at(curve.cumulative.len()),
        "second_half_slope": curve.second_half_slope(),
        "csv": csv_path.display().to_string(),
    }))
}

fn game_list(sel: &str) -> Result<Vec<BimatrixGame>> {
    Ok(match sel {
        "test" => games::test_games(),
        "training" => games::TRAINING_GAMES
            .iter()
            .map(|n| games::builtin(n))
            .collect::<Result<_, _>>()?,
        "all" => games::all(),
        list => list.split(',').map(|n| load(n.trim())).collect::<Result<_>>()?,
    })
}

fn run_tournament(o: &TournamentOpts) -> Result<Tournament> {
    if o.algs.is_empty() {
        bail!("at least one --alg is required");
    }
    let algs = o.algs.iter().map(|s| spec(s)).collect::<Result<Vec<_>>>()?;
    let gs = game_list(&o.games)?;
    let config = o.common.config()?;
    Ok(round_robin(&algs, &gs, o.trials, &config, o.jobs)?)
}

fn tournament(a: TournamentArgs) -> Result<()> {
    let t = run_tournament(&a.opts)?;
    let lg = t.learning_game();
    io::write_learning_game(&lg, create(&a.out.join("learning_game.csv"))?)?;
    io::write_trials(&t, create(&a.out.join("trials.csv"))?)?;
    let nash: Vec<_> = pure_nash(&lg)
        .into_iter()
        .map(|(i, j)| [&lg.labels[i], &lg.labels[j]])
        .collect();
    print_json(&json!({
        "labels": lg.labels,
        "games": t.games,
        "trials": t.trials,
        "pure_nash": nash,
    }))
}

fn replicator(a: ReplicatorArgs) -> Result<()> {
    let t = match &a.trials_file {
        Some(p) => io::parse_trials(&fs::read(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => run_tournament(&a.opts)?,
    };
    let runs = replicator_ensemble(&t, a.runs, a.generations, a.opts.common.seed)?;
    if runs.is_empty() {
        bail!("--runs must be positive");
    }
    let n = t.labels.len();
    let mean_path: Vec<_> = (0..=a.generations)
        .map(|g| {
            let p = (0..n)
                .map(|k| runs.iter().map(|r| r[g].p[k]).sum::<f64>() / runs.len() as f64)
                .collect();
            laff::evaluation::PopulationState { p }
        })
        .collect();
    io::write_population(&t.labels, &mean_path, create(&a.out.join("population.csv"))?)?;
    if a.svg {
        let series: Vec<_> = (0..n)
            .map(|k| {
                let pts = mean_path.iter().enumerate().map(|(g, s)| (g as f64, s.p[k])).collect();
                (t.labels[k].clone(), pts)
            })
            .collect();
        io::write_svg(&series, create(&a.out.join("population.svg"))?)?;
    }
    let last = mean_path.last().expect("generation zero exists");
    print_json(&json!({
        "labels": t.labels,
        "runs": a.runs,
        "generations": a.generations,
        "mean_final_share": last.p,
    }))
}
