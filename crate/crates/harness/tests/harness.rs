use std::process::Command;

use cgrl_harness::{
    export_table, parse_table, read_episode_csv, run_eval, run_random, run_training, Checkpoint, EpisodeLog,
    ExperimentConfig, MetricsReport, ModelId, Outcome,
};
use cgrl_sim::Task;

fn log(episode: usize, reward: f64, outcome: Outcome, mean_speed: f64) -> EpisodeLog {
    EpisodeLog { episode, reward, steps: 5, outcome, mean_speed }
}

fn tiny(model: ModelId, episodes: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk(model);
    cfg.trainer.episodes = episodes;
    cfg.trainer.batch_size = 8;
    cfg.schedule.cdrl_warmup_episodes = 2;
    cfg.schedule.checkpoint_every = 0;
    if let Some(c) = cfg.cdrl.as_mut() {
        c.batch_size = 8;
    }
    cfg
}

#[test]
fn metric_arithmetic() {
    let logs: Vec<_> = (0..10)
        .map(|i| log(i, 1.0, if i < 2 { Outcome::Collided } else { Outcome::Arrived }, 8.0))
        .collect();
    assert_eq!(MetricsReport::from_logs(&logs, "cgrl", Task::Left, 0).unwrap().collision_rate, 20.0);
    let two = [log(0, 1.0, Outcome::Timeout, 7.0), log(1, 3.0, Outcome::Arrived, 9.0)];
    let r = MetricsReport::from_logs(&two, "cgrl", Task::Left, 0).unwrap();
    assert_eq!((r.average_reward, r.average_velocity, r.collision_rate), (2.0, 8.0, 0.0));
    assert!(MetricsReport::from_logs(&[], "cgrl", Task::Left, 0).is_err());
}

#[test]
fn config_parsing_and_validation() {
    let c = ExperimentConfig::from_toml("model = \"gcn-dqn\"\n[trainer]\nepisodes = 7\n").unwrap();
    assert_eq!(c.trainer.episodes, 7);
    assert!(c.cdrl.is_none());
    assert!(!c.policy.arch_flags.use_gat);
    assert_eq!(ExperimentConfig::from_toml(&c.echo()).unwrap(), c);
    assert!(ExperimentConfig::from_toml("model = \"nope\"").is_err());
    assert!(ExperimentConfig::from_toml("task = \"up\"").is_err());
    assert!(ExperimentConfig::from_toml("[trainer]\nbogus = 1\n").is_err());
    assert!(ExperimentConfig::from_toml("capacity = 3").is_err());
    let desk = ExperimentConfig::desk(ModelId::Cgrl);
    assert_eq!(desk.epsilon(0), 1.0);
    assert!((desk.epsilon(75) - 0.55).abs() < 1e-12);
    assert_eq!(desk.epsilon(150), 0.1);
    assert_eq!(desk.epsilon(299), 0.1);
    assert_eq!(ExperimentConfig::default().epsilon(0), 0.1);
}

#[test]
fn zero_budget_writes_only_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_training(&tiny(ModelId::Cgrl, 0), 1, Some(dir.path())).unwrap();
    assert!(out.logs.is_empty());
    assert_eq!(out.checkpoint_paths, vec![dir.path().join("checkpoint-00000.bin")]);
    assert!(read_episode_csv(&dir.path().join("episodes.csv")).unwrap().is_empty());
}

#[test]
fn training_logs_are_consistent() {
    let cfg = tiny(ModelId::Cgrl, 6);
    let out = run_training(&cfg, 2, None).unwrap();
    assert_eq!(out.logs.len(), 6);
    for (i, l) in out.logs.iter().enumerate() {
        assert_eq!(l.episode, i);
        assert!(l.steps >= 1 && l.steps <= cfg.scenario.horizon);
        assert!(l.mean_speed >= 0.0 && l.mean_speed <= cfg.scenario.ego_speed_cap);
    }
    assert!(out.checkpoint.step > 0);
    assert!(out.checkpoint.params.names().any(|n| n.starts_with("vgae/")));
    let baseline = run_training(&tiny(ModelId::GatD3qn, 3), 2, None).unwrap();
    assert!(baseline.checkpoint.params.names().all(|n| !n.starts_with("vgae/")));
}

#[test]
fn random_and_greedy_evaluation() {
    let cfg = tiny(ModelId::GcnDqn, 0);
    assert!(run_random(&cfg, Task::Right, 0, 0).is_err());
    let r = run_random(&cfg, Task::Right, 20, 4).unwrap();
    assert_eq!(r.report.episodes, 20);
    assert_eq!(r.report.model, "random");
    let ck = run_training(&cfg, 0, None).unwrap().checkpoint;
    let a = run_eval(&ck, Task::Right, 5, 9, true).unwrap();
    let t = a.trajectory.unwrap();
    assert_eq!(t.frames.len() as u32, a.logs[0].steps);
    assert_eq!(t.frames.iter().filter(|f| f.vehicles.iter().any(|v| v.is_ego)).count(), t.frames.len());
    let bytes = ck.to_bytes();
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(Checkpoint::from_bytes(&bad).unwrap_err().to_string().contains("version"));
}

#[test]
fn table_from_reports() {
    let r = |model: &str, task| MetricsReport {
        model: model.into(),
        task,
        seed: 0,
        episodes: 1,
        collision_rate: 1.0,
        average_reward: 2.0,
        average_velocity: 3.0,
    };
    let text = export_table(&[r("gat-d3qn", Task::Left), r("cgrl", Task::Right)]).unwrap();
    let t = parse_table(&text).unwrap();
    assert_eq!(t.rows.iter().map(|(m, _)| m.as_str()).collect::<Vec<_>>(), ["cgrl", "gat-d3qn"]);
    assert_eq!(t.columns[0], "left C.R.");
}

fn cgrl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cgrl")).args(args).output().unwrap()
}

#[test]
fn cli_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).display().to_string();
    std::fs::write(
        p("c.toml"),
        "capacity = 6\n[scenario]\nn_human_vehicles = 5\n[trainer]\nepisodes = 3\nbatch_size = 8\n",
    )
    .unwrap();
    let out = cgrl(&["train", "--config", &p("c.toml"), "--model", "gcn-d3qn", "--task", "left", "--seed", "1", "--out", &p("run")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echo = std::fs::read_to_string(p("run/config.toml")).unwrap();
    assert!(echo.contains("model = \"gcn-d3qn\"") && echo.contains("ego_task = \"left\""));

    let ck = p("run/checkpoint-00003.bin");
    let out = cgrl(&["eval", "--checkpoint", &ck, "--task", "left", "--episodes", "4", "--seed", "2", "--out", &p("rep"), "--trajectory", &p("t.toml")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = MetricsReport::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let rows = read_episode_csv(&dir.path().join("rep/gcn-d3qn-left-2.episodes.csv")).unwrap();
    assert_eq!(MetricsReport::from_logs(&rows, "gcn-d3qn", Task::Left, 2).unwrap(), printed);

    assert!(cgrl(&["report", "--in", &p("rep"), "--out", &p("table.txt")]).status.success());
    let table = parse_table(&std::fs::read_to_string(p("table.txt")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 1);

    assert!(cgrl(&["render", "--log", &p("t.toml"), "--out", &p("frames")]).status.success());
    assert_eq!(std::fs::read_dir(p("frames")).unwrap().count() as u32, rows[0].steps);

    std::fs::write(p("mi.csv"), "x.0,y.0,z.0\n0,1,0\n1,0,1\n2,2,0\n3,1,1\n").unwrap();
    let out = cgrl(&["mi-estimate", "--input", &p("mi.csv"), "--alpha", "2"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);

    for bad in [
        vec!["eval", "--checkpoint", &p("c.toml"), "--task", "left", "--episodes", "1", "--seed", "0"],
        vec!["eval", "--checkpoint", &ck, "--task", "left", "--episodes", "0", "--seed", "0"],
        vec!["render", "--log", &p("missing.toml"), "--out", &p("f2")],
    ] {
        let out = cgrl(&bad);
        assert!(!out.status.success());
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.starts_with("error: "));
    }
}
