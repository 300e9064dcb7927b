//! Command-line front end: maze generation, single runs, benchmarks, plots.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand};

use rbql::bench::{
    self, difference_table, format_difference_table, format_improvement_table, improvement_table,
    AgentKind, BenchConfig,
};
use rbql::maze::{decode_maze, encode_maze, generate_with_extra_paths, Maze};
use rbql::qlearn::{train_q, EpisodeResult, Hyperparams};
use rbql::rbql::train_rbql;

#[derive(Parser)]
#[command(
    name = "rbql",
    version,
    about = "Recursive backwards Q-learning on grid-world mazes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a maze and write it in the hex text format.
    Gen {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        width: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        height: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one agent on one maze and print `episode,steps,reached_goal` lines.
    Run {
        #[arg(long)]
        agent: AgentKind,
        /// Maze file; if omitted, a maze is generated from --width/--height.
        #[arg(long, conflicts_with_all = ["width", "height"])]
        maze: Option<PathBuf>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        width: Option<u32>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        height: Option<u32>,
        #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u32).range(1..))]
        episodes: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        hp: HpArgs,
        /// Also write the per-episode report to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run both agents over a shared maze set; write CSVs and one SVG per size.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 15])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        mazes: usize,
        #[arg(long, default_value_t = 25)]
        episodes: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [AgentKind::Q, AgentKind::Rbql])]
        agents: Vec<AgentKind>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2)]
        trim: usize,
        #[arg(long, default_value = "bench-out")]
        out_dir: PathBuf,
        #[command(flatten)]
        hp: HpArgs,
    },
    /// Render the SVG chart for one size from a summary CSV.
    Plot {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Overrides applied on top of each agent's default hyperparameters.
#[derive(Args, Clone, Copy)]
struct HpArgs {
    #[arg(long)]
    gamma: Option<f64>,
    /// Learning rate of the Q-learning agent (RBQL always uses 1).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    min_epsilon: Option<f64>,
    #[arg(long)]
    max_epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    decay_rate: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q_init: Option<f64>,
    #[arg(long)]
    step_cap: Option<usize>,
}

impl HpArgs {
    fn apply(&self, mut hp: Hyperparams, agent: AgentKind) -> Hyperparams {
        if let Some(v) = self.gamma {
            hp.gamma = v;
        }
        if let (Some(v), AgentKind::Q) = (self.alpha, agent) {
            hp.alpha = v;
        }
        if let Some(v) = self.min_epsilon {
            hp.min_epsilon = v;
        }
        if let Some(v) = self.max_epsilon {
            hp.max_epsilon = v;
        }
        if let Some(v) = self.decay_rate {
            hp.decay_rate = v;
        }
        if let Some(v) = self.q_init {
            hp.q_init = v;
        }
        if self.step_cap.is_some() {
            hp.step_cap = self.step_cap;
        }
        hp
    }
}

fn defaults_for(agent: AgentKind) -> Hyperparams {
    match agent {
        AgentKind::Q => Hyperparams::q_learning(),
        AgentKind::Rbql => Hyperparams::rbql(),
    }
}

/// Uses the given seed or picks one and reports it so the run can be replayed.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        seed
    })
}

fn usage_error(message: impl std::fmt::Display) -> ! {
    Cli::command()
        .error(ErrorKind::ValueValidation, message)
        .exit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> rbql::Result<()> {
    match command {
        Command::Gen {
            width,
            height,
            seed,
            out,
        } => {
            let maze =
                generate_with_extra_paths(width as usize, height as usize, resolve_seed(seed))?;
            write_text(&out, &encode_maze(&maze))?;
            println!("{}", maze.shortest_path_length()?);
        }
        Command::Run {
            agent,
            maze,
            width,
            height,
            episodes,
            seed,
            hp,
            csv,
        } => {
            let hp = hp.apply(defaults_for(agent), agent);
            if let Err(e) = hp.validate() {
                usage_error(e);
            }
            if maze.is_none() && (width.is_none() || height.is_none()) {
                usage_error("either --maze or both --width and --height are required");
            }
            let seed = resolve_seed(seed);
            let maze = match (maze, width, height) {
                (Some(path), _, _) => read_maze(&path)?,
                (None, Some(w), Some(h)) => {
                    generate_with_extra_paths(w as usize, h as usize, seed)?
                }
                _ => unreachable!(),
            };
            let results = train(agent, &maze, episodes as usize, &hp, seed)?;
            let mut report = String::new();
            for r in &results {
                report.push_str(&format!("{},{},{}\n", r.episode, r.steps, r.reached_goal));
            }
            print!("{report}");
            if let Some(path) = csv {
                write_text(&path, &format!("episode,steps,reached_goal\n{report}"))?;
            }
        }
        Command::Bench {
            sizes,
            mazes,
            episodes,
            agents,
            seed,
            trim,
            out_dir,
            hp,
        } => {
            let mut agents = agents;
            agents.sort();
            agents.dedup();
            let config = BenchConfig {
                sizes,
                mazes_per_size: mazes,
                episodes,
                hp_q: hp.apply(Hyperparams::q_learning(), AgentKind::Q),
                hp_rbql: hp.apply(Hyperparams::rbql(), AgentKind::Rbql),
                master_seed: resolve_seed(seed),
                agents,
                trim,
            };
            if let Err(e) = config.validate() {
                usage_error(e);
            }
            run_bench(&config, &out_dir)?;
        }
        Command::Plot { summary, size, out } => {
            let rows = bench::read_summary_csv(&summary)?;
            bench::render_plot(&rows, size, &out)?;
        }
    }
    Ok(())
}

fn train(
    agent: AgentKind,
    maze: &Maze,
    episodes: usize,
    hp: &Hyperparams,
    seed: u64,
) -> rbql::Result<Vec<EpisodeResult>> {
    match agent {
        AgentKind::Q => Ok(train_q(maze, episodes, hp, seed)?.1),
        AgentKind::Rbql => Ok(train_rbql(maze, episodes, hp, seed)?.episodes),
    }
}

fn run_bench(config: &BenchConfig, out_dir: &Path) -> rbql::Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| rbql::Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let records = bench::run_benchmark(config)?;
    let summary = bench::summarize(&records, config.trim)?;
    let records_path = out_dir.join("records.csv");
    let summary_path = out_dir.join("summary.csv");
    bench::write_records_csv(&records, &records_path)?;
    bench::write_summary_csv(&summary, &summary_path)?;
    println!("wrote {}", records_path.display());
    println!("wrote {}", summary_path.display());
    for &size in &config.sizes {
        let path = out_dir.join(format!("steps_{size}x{size}.svg"));
        bench::render_plot(&summary, size, &path)?;
        println!("wrote {}", path.display());
    }

    let last = config.episodes - 1;
    if config.agents.len() == 2 {
        println!();
        print!(
            "{}",
            format_difference_table(&difference_table(&summary, &[0, last])?)
        );
    }
    println!();
    print!(
        "{}",
        format_improvement_table(&improvement_table(&summary, 0, last)?)
    );
    Ok(())
}

fn read_maze(path: &Path) -> rbql::Result<Maze> {
    let text = fs::read_to_string(path).map_err(|e| rbql::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    decode_maze(&text)
}

fn write_text(path: &Path, text: &str) -> rbql::Result<()> {
    fs::write(path, text).map_err(|e| rbql::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
