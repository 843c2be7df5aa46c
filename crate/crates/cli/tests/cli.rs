use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;

use stopgame_cli::commands::{certify, parse_profile_document, solve};
use stopgame_cli::format::{parse_game, read_game};
use stopgame_cli::gen::{generate, GenParams};
use stopgame_cli::profile::Profile;
use stopgame_cli::report::Report;
use stopgame_cli::{emit_game, CliError};
use stopgame_core::space::{int, rat};
use stopgame_core::Guards;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn stopgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stopgame")).args(args).env_remove("STOPGAME_GUARD_OVERRIDE").output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_fixture_parses_and_validates() {
    let game = read_game(&fixture("two_outcome.json")).unwrap();
    assert_eq!(game.players(), 3);
    assert_eq!(game.space.num_outcomes(), 2);
    assert_eq!(game.epsilon, rat(1, 20));
    assert!(game.payoffs.iter().all(|u| u.check_adapted(&game.space).is_empty()));
}

#[test]
fn decimals_are_read_exactly() {
    let game = read_game(&fixture("coordination.json")).unwrap();
    assert_eq!(game.space.weights(), &[rat(1, 2), rat(1, 2)]);
    assert_eq!(game.payoffs[0].get(&[1, 1], 1), &rat(2, 5));
    assert_eq!(game.epsilon, rat(1, 20));
}

fn edited(name: &str, edit: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap();
    edit(&mut v);
    v.to_string()
}

#[test]
fn bad_weights_are_a_normalization_error() {
    let text = edited("coordination.json", |v| v["weights"] = serde_json::json!(["1/2", "1/3"]));
    match parse_game(&text) {
        Err(CliError::Validation(msgs)) => assert!(msgs.iter().any(|m| m.starts_with("normalization")), "{msgs:?}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_payoff_tuple_names_its_indices() {
    let text = edited("coordination.json", |v| {
        v["payoffs"][1][1][0].as_array_mut().unwrap().pop();
    });
    match parse_game(&text) {
        Err(CliError::Parse(msg)) => assert!(msg.contains("missing entry payoffs[1][1][0][1]"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unadapted_payoff_is_rejected() {
    let text = edited("coordination.json", |v| v["payoffs"][0][0][0] = serde_json::json!([0, 1]));
    match parse_game(&text) {
        Err(CliError::Validation(msgs)) => assert!(msgs[0].starts_with("adaptedness"), "{msgs:?}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn solve_on_fixture_meets_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let run = stopgame(&["solve", "--game", path(&fixture("two_outcome.json")), "--players", "3", "--epsilon", "0.05", "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.certificate.bound.0, rat(13, 20));
    assert!(report.certificate.players.iter().all(|p| p.max_gap.0 <= rat(13, 20)));
    assert!(report.certificate.passes);
    let three = report.three.unwrap();
    assert!(three.saddles.iter().all(|s| s.passes));
    assert!(three.windows.iter().all(|w| w.max_gap.0 <= w.bound.0));
}

#[test]
fn verify_reproduces_report_gaps_exactly() {
    let game = read_game(&fixture("two_outcome.json")).unwrap();
    let guards = Guards::default();
    let report = solve(&game, 3, &game.epsilon, None, &guards).unwrap();
    let text = serde_json::to_string(&report).unwrap();
    let (file, eps) = parse_profile_document(&text).unwrap();
    let profile = Profile::from_file(file, &game.space, &game.start).unwrap();
    let again = certify(&game, &profile, &eps.unwrap(), &guards).unwrap();
    assert_eq!(again, report.certificate);
}

#[test]
fn corrupted_profile_fails_verification_with_player_and_gap() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let ok = stopgame(&[
        "verify",
        "--game",
        path(&fixture("coordination.json")),
        "--profile",
        path(&fixture("coordination_profile.json")),
        "--out",
        path(&good),
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let bad = dir.path().join("bad.json");
    let text = edited("coordination_profile.json", |v| v["strategies"][0]["initial"] = serde_json::json!([1, 1]));
    std::fs::write(&bad, text).unwrap();
    let out = dir.path().join("verify.json");
    let run = stopgame(&["verify", "--game", path(&fixture("coordination.json")), "--profile", path(&bad), "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("player 0 gap 1 exceeds bound 1/20"), "{stderr}");
    assert!(out.exists());
}

#[test]
fn non_lipschitz_game_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let run = stopgame(&["solve", "--game", path(&fixture("coordination.json")), "--players", "2", "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("no window width"));
}

#[test]
fn two_player_solve_with_explicit_h() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let run = stopgame(&["solve", "--game", path(&fixture("coordination.json")), "--players", "2", "--h", "1", "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.certificate.max_gap.0, int(0));
}

#[test]
fn guard_override_maps_to_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let run = Command::new(env!("CARGO_BIN_EXE_stopgame"))
        .args(["solve", "--game", path(&fixture("two_outcome.json")), "--players", "3", "--out", path(&out)])
        .env("STOPGAME_GUARD_OVERRIDE", "1")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(3), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn wrong_player_count_and_missing_file_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let run = stopgame(&["solve", "--game", path(&fixture("two_outcome.json")), "--players", "2", "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(2));
    let run = stopgame(&["solve", "--game", "/nonexistent.json", "--players", "3", "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn gen_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("g{k}.json"))).collect();
    for f in &files {
        let run = stopgame(&["gen", "--seed", "42", "--outcomes", "3", "--times", "4", "--modulus", "1", "--out", path(f)]);
        assert_eq!(run.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&files[0]).unwrap(), std::fs::read(&files[1]).unwrap());
}

#[test]
fn report_command_renders_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    stopgame(&["solve", "--game", path(&fixture("two_outcome.json")), "--players", "3", "--out", path(&out)]);
    let run = stopgame(&["report", "--input", path(&out)]);
    assert_eq!(run.status.code(), Some(0));
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.contains("certificate: pass"), "{text}");
    assert!(text.contains("saddle leader 2"), "{text}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn emitted_games_parse_back_identically(seed in 0u64..10_000, outcomes in 1usize..4, times in 2usize..5, players in 2usize..4) {
        let params = GenParams { seed, outcomes, times, modulus: rat(1, 1), players, step: rat(1, 40), epsilon: rat(1, 20) };
        let game = generate(&params).unwrap();
        let text = emit_game(&game);
        prop_assert_eq!(parse_game(&text).unwrap(), game);
    }
}
