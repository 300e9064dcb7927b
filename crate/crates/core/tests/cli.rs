use std::fs;
use std::process::{Command, Output};

use rbql::maze::{decode_maze, encode_maze, generate_with_extra_paths};

fn rbql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbql"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_writes_maze_and_prints_distance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let out = rbql(&[
        "gen",
        "--width",
        "7",
        "--height",
        "4",
        "--seed",
        "11",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    let maze = decode_maze(&text).unwrap();
    assert_eq!(
        text,
        encode_maze(&generate_with_extra_paths(7, 4, 11).unwrap())
    );
    assert_eq!(
        stdout(&out).trim(),
        maze.shortest_path_length().unwrap().to_string()
    );
}

#[test]
fn gen_without_seed_reports_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let out = rbql(&[
        "gen",
        "--width",
        "3",
        "--height",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    let seed: u64 = err.trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        encode_maze(&generate_with_extra_paths(3, 3, seed).unwrap())
    );
}

#[test]
fn zero_width_is_a_usage_error() {
    let out = rbql(&[
        "gen",
        "--width",
        "0",
        "--height",
        "3",
        "--out",
        "unused.txt",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_hyperparameter_is_a_usage_error() {
    let out = rbql(&[
        "run", "--agent", "q", "--width", "3", "--height", "3", "--seed", "1", "--alpha", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = rbql(&["run", "--agent", "q", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = rbql(&["run", "--agent", "sarsa", "--width", "3", "--height", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_maze_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rbql(&[
        "run",
        "--agent",
        "rbql",
        "--maze",
        dir.path().join("none.txt").to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_maze_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    fs::write(&path, "2 1\n9\n").unwrap();
    let out = rbql(&[
        "run",
        "--agent",
        "q",
        "--maze",
        path.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_prints_one_line_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let maze = dir.path().join("m.txt");
    fs::write(
        &maze,
        encode_maze(&generate_with_extra_paths(5, 5, 3).unwrap()),
    )
    .unwrap();
    let csv = dir.path().join("run.csv");
    for agent in ["q", "rbql"] {
        let out = rbql(&[
            "run",
            "--agent",
            agent,
            "--maze",
            maze.to_str().unwrap(),
            "--episodes",
            "6",
            "--seed",
            "8",
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{agent}");
        let text = stdout(&out);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        for (i, line) in lines.iter().enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 3);
            assert_eq!(fields[0], i.to_string());
            fields[1].parse::<usize>().unwrap();
            assert!(fields[2] == "true" || fields[2] == "false");
        }
        let file = fs::read_to_string(&csv).unwrap();
        assert_eq!(file, format!("episode,steps,reached_goal\n{text}"));
        assert_eq!(
            stdout(&rbql(&[
                "run",
                "--agent",
                agent,
                "--maze",
                maze.to_str().unwrap(),
                "--episodes",
                "6",
                "--seed",
                "8",
            ])),
            text
        );
    }
}

#[test]
fn bench_and_plot_produce_matching_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = rbql(&[
        "bench",
        "--sizes",
        "3,4",
        "--mazes",
        "5",
        "--episodes",
        "5",
        "--seed",
        "2",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("q_mean"));
    assert!(text.contains("factor"));
    for f in [
        "records.csv",
        "summary.csv",
        "steps_3x3.svg",
        "steps_4x4.svg",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let plot = dir.path().join("p.svg");
    let out = rbql(&[
        "plot",
        "--summary",
        out_dir.join("summary.csv").to_str().unwrap(),
        "--size",
        "4",
        "--out",
        plot.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        fs::read(plot).unwrap(),
        fs::read(out_dir.join("steps_4x4.svg")).unwrap()
    );
}

#[test]
fn bench_rejects_too_few_mazes_for_trim() {
    let dir = tempfile::tempdir().unwrap();
    let out = rbql(&[
        "bench",
        "--mazes",
        "4",
        "--seed",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plot_for_missing_size_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = rbql(&[
        "bench",
        "--sizes",
        "3",
        "--mazes",
        "5",
        "--episodes",
        "2",
        "--seed",
        "2",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = rbql(&[
        "plot",
        "--summary",
        out_dir.join("summary.csv").to_str().unwrap(),
        "--size",
        "9",
        "--out",
        dir.path().join("x.svg").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
