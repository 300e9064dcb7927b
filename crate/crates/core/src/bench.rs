//! Experiment harness: both agents on a shared set of random mazes,
//! per-episode statistics, comparison tables and CSV/SVG output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maze::{carve_extra_paths, encode_maze, generate_maze, Maze};
use crate::qlearn::{train_q, EpisodeResult, Hyperparams};
use crate::rbql::train_rbql;
use crate::seed::{derive_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Q,
    Rbql,
}

impl AgentKind {
    pub const ALL: [AgentKind; 2] = [AgentKind::Q, AgentKind::Rbql];

    pub fn tag(self) -> &'static str {
        match self {
            AgentKind::Q => "q",
            AgentKind::Rbql => "rbql",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(AgentKind::Q),
            "rbql" => Ok(AgentKind::Rbql),
            other => Err(Error::InvalidArgument(format!(
                "unknown agent {other:?}, expected q or rbql"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub mazes_per_size: usize,
    pub episodes: usize,
    pub hp_q: Hyperparams,
    pub hp_rbql: Hyperparams,
    pub master_seed: u64,
    pub agents: Vec<AgentKind>,
    pub trim: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![5, 10, 15],
            mazes_per_size: 50,
            episodes: 25,
            hp_q: Hyperparams::q_learning(),
            hp_rbql: Hyperparams::rbql(),
            master_seed: 0,
            agents: AgentKind::ALL.to_vec(),
            trim: 2,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be a non-empty list of positive integers".into());
        }
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.agents.is_empty() {
            return bad("at least one agent is required".into());
        }
        if self.mazes_per_size <= 2 * self.trim {
            return bad(format!(
                "trimming {} values per side needs more than {} mazes per size",
                self.trim,
                2 * self.trim
            ));
        }
        self.hp_q.validate()?;
        self.hp_rbql.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RunRecord {
    pub size: usize,
    pub agent: AgentKind,
    pub maze_id: usize,
    pub episode: usize,
    pub steps: usize,
    pub reached_goal: bool,
}

/// The columns of the records CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordRow {
    pub size: usize,
    pub maze_id: usize,
    pub agent: AgentKind,
    pub episode: usize,
    pub steps: usize,
}

impl From<&RunRecord> for RecordRow {
    fn from(r: &RunRecord) -> Self {
        RecordRow {
            size: r.size,
            maze_id: r.maze_id,
            agent: r.agent,
            episode: r.episode,
            steps: r.steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub size: usize,
    pub agent: AgentKind,
    pub episode: usize,
    /// Mean over all runs, untrimmed.
    pub mean: f64,
    pub trimmed_min: usize,
    pub trimmed_max: usize,
}

/// Lower bound on any start→goal path in an `s`×`s` maze.
pub fn manhattan_bound(size: usize) -> usize {
    (2 * size).saturating_sub(2)
}

/// The mazes for one size, identical for every agent.
pub fn maze_set(config: &BenchConfig, size: usize) -> Result<Vec<Maze>> {
    (0..config.mazes_per_size)
        .map(|id| {
            let seed = derive_seed(
                config.master_seed,
                Stream::BenchMaze,
                size as u32,
                id as u32,
            );
            Ok(carve_extra_paths(&generate_maze(size, size, seed)?, seed))
        })
        .collect()
}

pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let mut jobs = Vec::new();
    for &size in &config.sizes {
        for (id, maze) in maze_set(config, size)?.into_iter().enumerate() {
            let maze = std::sync::Arc::new(maze);
            for &agent in &config.agents {
                jobs.push((size, id, agent, maze.clone()));
            }
        }
    }
    let runs: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|(size, id, agent, maze)| {
            let seed = derive_seed(
                config.master_seed,
                Stream::BenchAgent,
                *size as u32,
                *id as u32,
            );
            let episodes = run_agent(*agent, maze, config, seed)?;
            Ok(episodes
                .into_iter()
                .map(|e| RunRecord {
                    size: *size,
                    agent: *agent,
                    maze_id: *id,
                    episode: e.episode,
                    steps: e.steps,
                    reached_goal: e.reached_goal,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<RunRecord> = runs.into_iter().flatten().collect();
    records.sort();
    Ok(records)
}

fn run_agent(
    agent: AgentKind,
    maze: &Maze,
    config: &BenchConfig,
    seed: u64,
) -> Result<Vec<EpisodeResult>> {
    match agent {
        AgentKind::Q => Ok(train_q(maze, config.episodes, &config.hp_q, seed)?.1),
        AgentKind::Rbql => Ok(train_rbql(maze, config.episodes, &config.hp_rbql, seed)?.episodes),
    }
}

/// Encodings of the maze set, for checking that agents shared mazes.
pub fn maze_encodings(config: &BenchConfig, size: usize) -> Result<Vec<String>> {
    Ok(maze_set(config, size)?.iter().map(encode_maze).collect())
}

/// Per `(size, agent, episode)`: the mean of all step counts and the range
/// left after dropping the `trim` largest and `trim` smallest.
pub fn summarize(records: &[RunRecord], trim: usize) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(usize, AgentKind, usize), Vec<usize>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.size, r.agent, r.episode))
            .or_default()
            .push(r.steps);
    }
    groups
        .into_iter()
        .map(|((size, agent, episode), mut steps)| {
            if steps.len() <= 2 * trim {
                return Err(Error::InvalidArgument(format!(
                    "{} values for size {size}, agent {agent}, episode {episode}; trimming {trim} per side needs more",
                    steps.len()
                )));
            }
            let mean = steps.iter().sum::<usize>() as f64 / steps.len() as f64;
            steps.sort_unstable();
            let kept = &steps[trim..steps.len() - trim];
            Ok(SummaryRow {
                size,
                agent,
                episode,
                mean,
                trimmed_min: kept[0],
                trimmed_max: kept[kept.len() - 1],
            })
        })
        .collect()
}

/// Rounds to two decimals for display.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceRow {
    pub size: usize,
    pub episode: usize,
    pub q_mean: f64,
    pub rbql_mean: f64,
    /// How many times more steps Q-learning took.
    pub ratio: f64,
}

fn mean_of(summary: &[SummaryRow], size: usize, agent: AgentKind, episode: usize) -> Result<f64> {
    summary
        .iter()
        .find(|r| r.size == size && r.agent == agent && r.episode == episode)
        .map(|r| r.mean)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "summary has no row for size {size}, agent {agent}, episode {episode}"
            ))
        })
}

fn sizes_of(summary: &[SummaryRow]) -> Vec<usize> {
    let mut sizes: Vec<usize> = summary.iter().map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
}

/// Q-learning vs RBQL mean steps at each of `episodes`, per size.
pub fn difference_table(summary: &[SummaryRow], episodes: &[usize]) -> Result<Vec<DifferenceRow>> {
    let mut rows = Vec::new();
    for &episode in episodes {
        for size in sizes_of(summary) {
            let q_mean = mean_of(summary, size, AgentKind::Q, episode)?;
            let rbql_mean = mean_of(summary, size, AgentKind::Rbql, episode)?;
            rows.push(DifferenceRow {
                size,
                episode,
                q_mean,
                rbql_mean,
                ratio: q_mean / rbql_mean,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovementRow {
    pub size: usize,
    pub agent: AgentKind,
    pub first_mean: f64,
    pub last_mean: f64,
    /// Factor by which mean steps shrank from the first to the last episode.
    pub factor: f64,
}

pub fn improvement_table(
    summary: &[SummaryRow],
    first: usize,
    last: usize,
) -> Result<Vec<ImprovementRow>> {
    let mut agents: Vec<AgentKind> = summary.iter().map(|r| r.agent).collect();
    agents.sort_unstable();
    agents.dedup();
    let mut rows = Vec::new();
    for agent in agents {
        for size in sizes_of(summary) {
            let first_mean = mean_of(summary, size, agent, first)?;
            let last_mean = mean_of(summary, size, agent, last)?;
            rows.push(ImprovementRow {
                size,
                agent,
                first_mean,
                last_mean,
                factor: first_mean / last_mean,
            });
        }
    }
    Ok(rows)
}

pub fn format_difference_table(rows: &[DifferenceRow]) -> String {
    let mut out = String::from("episode  size     q_mean  rbql_mean  ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{:>7}  {:>4}  {:>9.2}  {:>9.2}  {:>5.2}\n",
            r.episode,
            format!("{0}x{0}", r.size),
            r.q_mean,
            r.rbql_mean,
            round2(r.ratio)
        ));
    }
    out
}

pub fn format_improvement_table(rows: &[ImprovementRow]) -> String {
    let mut out = String::from("agent  size  first_mean  last_mean  factor\n");
    for r in rows {
        out.push_str(&format!(
            "{:<5}  {:>4}  {:>10.2}  {:>9.2}  {:>6.2}\n",
            r.agent.tag(),
            format!("{0}x{0}", r.size),
            r.first_mean,
            r.last_mean,
            round2(r.factor)
        ));
    }
    out
}

const RECORD_HEADER: [&str; 5] = ["size", "maze_id", "agent", "episode", "steps"];
const SUMMARY_HEADER: [&str; 6] = [
    "size",
    "agent",
    "episode",
    "mean",
    "trimmed_min",
    "trimmed_max",
];

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Records sorted by `(size, agent, maze_id, episode)`.
pub fn write_records_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut rows: Vec<&RunRecord> = records.iter().collect();
    rows.sort();
    let mut w = csv_writer(path)?;
    w.write_record(RECORD_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.size.to_string(),
            r.maze_id.to_string(),
            r.agent.tag().to_string(),
            r.episode.to_string(),
            r.steps.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Summary rows sorted by `(size, agent, episode)`.
pub fn write_summary_csv(summary: &[SummaryRow], path: &Path) -> Result<()> {
    let mut rows: Vec<&SummaryRow> = summary.iter().collect();
    rows.sort_by_key(|r| (r.size, r.agent, r.episode));
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.size.to_string(),
            r.agent.tag().to_string(),
            r.episode.to_string(),
            r.mean.to_string(),
            r.trimmed_min.to_string(),
            r.trimmed_max.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let found = reader.headers().map_err(|e| csv_error(path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: format!("expected header {}", header.join(",")),
        });
    }
    reader
        .records()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

fn field<T: FromStr>(path: &Path, row: &csv::StringRecord, i: usize) -> Result<T> {
    row.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Csv {
            path: path.to_path_buf(),
            message: format!(
                "bad field {} on line {}",
                i + 1,
                row.position().map_or(0, |p| p.line())
            ),
        })
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RecordRow>> {
    read_rows(path, &RECORD_HEADER)?
        .iter()
        .map(|row| {
            Ok(RecordRow {
                size: field(path, row, 0)?,
                maze_id: field(path, row, 1)?,
                agent: field(path, row, 2)?,
                episode: field(path, row, 3)?,
                steps: field(path, row, 4)?,
            })
        })
        .collect()
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    read_rows(path, &SUMMARY_HEADER)?
        .iter()
        .map(|row| {
            Ok(SummaryRow {
                size: field(path, row, 0)?,
                agent: field(path, row, 1)?,
                episode: field(path, row, 2)?,
                mean: field(path, row, 3)?,
                trimmed_min: field(path, row, 4)?,
                trimmed_max: field(path, row, 5)?,
            })
        })
        .collect()
}

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn agent_colors(agent: AgentKind) -> (&'static str, &'static str) {
    match agent {
        AgentKind::Q => ("#f4a6b7", "#d62728"),
        AgentKind::Rbql => ("#b5e61d", "#17806d"),
    }
}

/// SVG line chart of steps per episode for one maze size: a trimmed-range
/// band and a mean line per agent, plus the `2s − 2` reference line.
pub fn render_svg(summary: &[SummaryRow], size: usize) -> Result<String> {
    let mut rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.size == size).collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "summary has no rows for size {size}"
        )));
    }
    rows.sort_by_key(|r| (r.agent, r.episode));

    let bound = manhattan_bound(size) as f64;
    let max_episode = rows.iter().map(|r| r.episode).max().unwrap_or(0).max(1) as f64;
    let y_top = rows
        .iter()
        .map(|r| (r.trimmed_max as f64).max(r.mean))
        .fold(bound, f64::max);
    let y_max = nice_ceiling(y_top * 1.05);

    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |e: f64| MARGIN_LEFT + e / max_episode * plot_w;
    let sy = |v: f64| MARGIN_TOP + plot_h - v / y_max * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">Steps per episode, {size}x{size} mazes</text>\n",
        SVG_WIDTH / 2.0
    ));

    // axes and ticks
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    svg.push_str(&format!(
        "<line class=\"axis\" x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>\n",
        x0 + plot_w
    ));
    svg.push_str(&format!(
        "<line class=\"axis\" x1=\"{x0:.1}\" y1=\"{MARGIN_TOP:.1}\" x2=\"{x0:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>\n"
    ));
    let x_step = ((max_episode / 10.0).ceil() as usize).max(1);
    for e in (0..=max_episode as usize).step_by(x_step) {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{e}</text>\n",
            sx(e as f64),
            y0 + 16.0
        ));
    }
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            x0 - 6.0,
            sy(v) + 4.0,
            v.round()
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">Episode</text>\n",
        x0 + plot_w / 2.0,
        SVG_HEIGHT - 15.0
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 {:.1})\">Steps taken</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));

    let mut agents: Vec<AgentKind> = rows.iter().map(|r| r.agent).collect();
    agents.dedup();
    for (i, &agent) in agents.iter().enumerate() {
        let series: Vec<&&SummaryRow> = rows.iter().filter(|r| r.agent == agent).collect();
        let (band_color, line_color) = agent_colors(agent);
        let upper = series.iter().map(|r| {
            format!(
                "{:.2},{:.2}",
                sx(r.episode as f64),
                sy(r.trimmed_max as f64)
            )
        });
        let lower = series.iter().rev().map(|r| {
            format!(
                "{:.2},{:.2}",
                sx(r.episode as f64),
                sy(r.trimmed_min as f64)
            )
        });
        let band: Vec<String> = upper.chain(lower).collect();
        svg.push_str(&format!(
            "<polygon class=\"band\" data-agent=\"{agent}\" points=\"{}\" fill=\"{band_color}\" fill-opacity=\"0.5\" stroke=\"none\"/>\n",
            band.join(" ")
        ));
        let mean: Vec<String> = series
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.episode as f64), sy(r.mean)))
            .collect();
        svg.push_str(&format!(
            "<polyline class=\"mean\" data-agent=\"{agent}\" points=\"{}\" fill=\"none\" stroke=\"{line_color}\" stroke-width=\"2\"/>\n",
            mean.join(" ")
        ));
        let ly = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        let lx = x0 + plot_w - 150.0;
        svg.push_str(&format!(
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"14\" height=\"10\" fill=\"{band_color}\"/><line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{line_color}\" stroke-width=\"2\"/>\n",
            ly - 5.0,
            lx + 14.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{} mean / trimmed range</text>\n",
            lx + 20.0,
            ly + 4.0,
            match agent {
                AgentKind::Q => "Q-learning",
                AgentKind::Rbql => "RBQL",
            }
        ));
    }

    svg.push_str(&format!(
        "<line class=\"bound\" data-y=\"{bound}\" x1=\"{x0:.1}\" y1=\"{by:.2}\" x2=\"{:.1}\" y2=\"{by:.2}\" stroke=\"#1f3fbf\" stroke-dasharray=\"6 4\"/>\n",
        x0 + plot_w,
        by = sy(bound)
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_plot(summary: &[SummaryRow], size: usize, path: &Path) -> Result<()> {
    let svg = render_svg(summary, size)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn nice_ceiling(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let magnitude = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * magnitude >= v {
            return m * magnitude;
        }
    }
    10.0 * magnitude
}
