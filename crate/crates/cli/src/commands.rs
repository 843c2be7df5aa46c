use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::Value;

use stopgame_core::equilibrium3::solve_three;
use stopgame_core::payoff::{estimate_modulus, select_h};
use stopgame_core::two_player::solve_2p_nash;
use stopgame_core::verify::{nash_gap, Payoff};
use stopgame_core::{Guards, PayoffField, Real, StopGameError};

use crate::error::{CliError, CliResult};
use crate::format::{parse_rational, read_game, read_text, to_json, write_text, Game, Rat};
use crate::gen::{generate, GenParams};
use crate::profile::{Profile, ProfileFile};
use crate::report::{render, render_certificate, three_details, CertificateReport, Report, TwoDetails};

#[derive(Debug, Parser)]
#[command(name = "stopgame", version, about = "Exact solver and verifier for finite nonzero-sum stopping games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an approximate Nash profile and write it with its certificate.
    Solve {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        players: usize,
        /// Overrides the file's epsilon.
        #[arg(long)]
        epsilon: Option<String>,
        /// Overrides the window width; otherwise the file's value or the automatic choice.
        #[arg(long)]
        h: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute exact best-response gaps of a profile (or of a solve report's profile).
    Verify {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a random game with payoffs Lipschitz in time.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        outcomes: usize,
        #[arg(long)]
        times: usize,
        #[arg(long)]
        modulus: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        players: usize,
        #[arg(long, default_value = "1/40")]
        step: String,
        #[arg(long, default_value = "1/20")]
        epsilon: String,
    },
    /// Render a solve or verify report as text.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn rational_flag(name: &str, text: &str) -> CliResult<Real> {
    parse_rational(text).map_err(|e| CliError::Parse(format!("--{name}: {e}")))
}

fn fields_of(game: &Game) -> Vec<&PayoffField> {
    game.payoffs.iter().collect()
}

fn bound_for(players: usize, eps: &Real) -> (Real, &'static str) {
    if players == 3 {
        (eps * Real::from_integer(13.into()), "13*epsilon")
    } else {
        (eps.clone(), "epsilon")
    }
}

/// Runs `solve` in memory; the report is produced even when the certificate fails.
pub fn solve(game: &Game, players: usize, eps: &Real, h: Option<&Real>, guards: &Guards) -> CliResult<Report> {
    if game.players() != players {
        return Err(CliError::Validation(vec![format!(
            "--players {players} but the game has {} payoff tables",
            game.players()
        )]));
    }
    let h = match h.or(game.h.as_ref()) {
        Some(h) => h.clone(),
        None => select_h(&estimate_modulus(&fields_of(game), game.space.grid()), eps, game.space.grid())?,
    };
    let space = &game.space;
    let start = &game.start;
    match players {
        3 => {
            let payoffs: [PayoffField; 3] = game.payoffs.clone().try_into().expect("three payoffs");
            let sol = solve_three(space, &payoffs, start, eps, &h, guards)?;
            let (bound, label) = bound_for(3, eps);
            let certificate = CertificateReport::new(&sol.certificate.players, bound, label);
            Ok(Report {
                players,
                epsilon: Rat(eps.clone()),
                h: Rat(h),
                start: start.values().to_vec(),
                profile: Profile::Three(sol.profile.clone()).to_file(),
                certificate,
                two: None,
                three: Some(three_details(&sol)),
            })
        }
        2 => {
            let k = start.get(0);
            if start.values().iter().any(|&s| s != k) {
                return Err(StopGameError::Unsupported("the two-player solver needs a constant start".into()).into());
            }
            let (u1, u2) = (&game.payoffs[0], &game.payoffs[1]);
            let g1 = |a: usize, b: usize, w: usize| u1.get(&[a, b], w).clone();
            let g2 = |a: usize, b: usize, w: usize| u2.get(&[a, b], w).clone();
            let eq = solve_2p_nash(space, &g1, &g2, k, eps, guards)?;
            let profile = Profile::Two([eq.first.clone(), eq.second.clone()]);
            let certificate = certify(game, &profile, eps, guards)?;
            Ok(Report {
                players,
                epsilon: Rat(eps.clone()),
                h: Rat(h),
                start: start.values().to_vec(),
                profile: profile.to_file(),
                certificate,
                two: Some(TwoDetails {
                    node_without_pure_equilibrium: eq.node_without_pure_equilibrium,
                    used_enumeration: eq.used_enumeration,
                }),
                three: None,
            })
        }
        _ => Err(CliError::Validation(vec![format!("--players must be 2 or 3, got {players}")])),
    }
}

/// Exact best-response gaps of every player from the game's start.
pub fn certify(game: &Game, profile: &Profile, eps: &Real, guards: &Guards) -> CliResult<CertificateReport> {
    if profile.players() != game.players() {
        return Err(CliError::Validation(vec![format!(
            "profile has {} strategies but the game has {} players",
            profile.players(),
            game.players()
        )]));
    }
    let closures: Vec<_> = game.payoffs.iter().map(|u| move |t: &[usize], w: usize| u.get(t, w).clone()).collect();
    let payoffs: Vec<Payoff> = closures.iter().map(|c| c as Payoff).collect();
    let results = nash_gap(&game.space, &profile.rules(), &payoffs, &game.start, guards)?;
    let (bound, label) = bound_for(profile.players(), eps);
    Ok(CertificateReport::new(&results, bound, label))
}

/// Accepts a bare profile or a solve report; returns the profile and the report's epsilon if any.
pub fn parse_profile_document(text: &str) -> CliResult<(ProfileFile, Option<Real>)> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if value.get("certificate").is_some() {
        let report: Report = serde_json::from_value(value).map_err(|e| CliError::Parse(format!("report: {e}")))?;
        Ok((report.profile, Some(report.epsilon.0)))
    } else {
        let profile: ProfileFile = serde_json::from_value(value).map_err(|e| CliError::Parse(format!("profile: {e}")))?;
        Ok((profile, None))
    }
}

fn failure(c: &CertificateReport) -> CliError {
    let parts: Vec<String> = c
        .offenders()
        .iter()
        .map(|p| format!("player {} gap {} exceeds bound {}", p.player, p.max_gap.0, c.bound.0))
        .collect();
    CliError::Certification(parts.join("; "))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &to_json(value))
}

/// Executes a command; the returned string is printed on success.
pub fn run(cli: Cli, guards: &Guards) -> CliResult<String> {
    match cli.command {
        Command::Solve { game, players, epsilon, h, out } => {
            let game = read_game(&game)?;
            let eps = match epsilon {
                Some(e) => rational_flag("epsilon", &e)?,
                None => game.epsilon.clone(),
            };
            let h = h.map(|h| rational_flag("h", &h)).transpose()?;
            let report = solve(&game, players, &eps, h.as_ref(), guards)?;
            write_json(&out, &report)?;
            if !report.certificate.passes {
                return Err(failure(&report.certificate));
            }
            Ok(format!(
                "max gap {} <= {} ({}); report written to {}",
                report.certificate.max_gap.0,
                report.certificate.bound.0,
                report.certificate.bound_label,
                out.display()
            ))
        }
        Command::Verify { game, profile, epsilon, out } => {
            let game = read_game(&game)?;
            let (file, report_eps) = parse_profile_document(&read_text(&profile)?)?;
            let eps = match epsilon {
                Some(e) => rational_flag("epsilon", &e)?,
                None => report_eps.unwrap_or_else(|| game.epsilon.clone()),
            };
            let profile = Profile::from_file(file, &game.space, &game.start)?;
            let certificate = certify(&game, &profile, &eps, guards)?;
            write_json(&out, &certificate)?;
            if !certificate.passes {
                return Err(failure(&certificate));
            }
            Ok(format!("max gap {} <= {}", certificate.max_gap.0, certificate.bound.0))
        }
        Command::Gen { seed, outcomes, times, modulus, out, players, step, epsilon } => {
            let params = GenParams {
                seed,
                outcomes,
                times,
                modulus: rational_flag("modulus", &modulus)?,
                players,
                step: rational_flag("step", &step)?,
                epsilon: rational_flag("epsilon", &epsilon)?,
            };
            write_text(&out, &crate::format::emit_game(&generate(&params)?))?;
            Ok(format!("game written to {}", out.display()))
        }
        Command::Report { input, out } => {
            let text = read_text(&input)?;
            let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
            let rendered = if value.get("profile").is_some() {
                let r: Report = serde_json::from_value(value).map_err(|e| CliError::Parse(format!("report: {e}")))?;
                render(&r)
            } else {
                let c: CertificateReport =
                    serde_json::from_value(value).map_err(|e| CliError::Parse(format!("certificate: {e}")))?;
                let mut s = String::new();
                render_certificate(&mut s, &c);
                s
            };
            match out {
                Some(path) => {
                    write_text(&path, &rendered)?;
                    Ok(format!("summary written to {}", path.display()))
                }
                None => Ok(rendered.trim_end().to_string()),
            }
        }
    }
}
