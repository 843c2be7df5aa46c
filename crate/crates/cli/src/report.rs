//! Machine-readable solve/verify reports and their text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use stopgame_core::equilibrium3::ThreePlayerSolution;
use stopgame_core::verify::BestResponseResult;
use stopgame_core::{AdaptedProcess, Real};

use crate::format::{rats, Rat};
use crate::profile::ProfileFile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerGap {
    pub player: usize,
    pub on_path: Vec<Rat>,
    pub best_response: Vec<Rat>,
    pub gap: Vec<Rat>,
    pub max_gap: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub bound: Rat,
    /// The bound as a multiple of epsilon, e.g. `13*epsilon`.
    pub bound_label: String,
    pub players: Vec<PlayerGap>,
    pub max_gap: Rat,
    pub passes: bool,
}

impl CertificateReport {
    pub fn new(results: &[BestResponseResult], bound: Real, bound_label: &str) -> Self {
        let players: Vec<PlayerGap> = results
            .iter()
            .enumerate()
            .map(|(player, r)| PlayerGap {
                player,
                on_path: rats(r.on_path.values()),
                best_response: rats(r.value.values()),
                gap: rats(r.gap.values()),
                max_gap: Rat(r.max_gap()),
            })
            .collect();
        let max_gap = players.iter().map(|p| p.max_gap.0.clone()).max().unwrap_or_default();
        CertificateReport {
            passes: max_gap <= bound,
            bound: Rat(bound),
            bound_label: bound_label.to_string(),
            players,
            max_gap: Rat(max_gap),
        }
    }

    /// Players whose gap exceeds the bound.
    pub fn offenders(&self) -> Vec<&PlayerGap> {
        self.players.iter().filter(|p| p.max_gap.0 > self.bound.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessReport {
    pub player: usize,
    pub x: Vec<Vec<Rat>>,
    pub y: Vec<Vec<Rat>>,
    pub z: Vec<Vec<Rat>>,
    pub v: Vec<Vec<Rat>>,
    pub mu: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub leader: usize,
    pub start: Vec<usize>,
    pub leader_excess: Rat,
    pub leader_bound: Rat,
    pub coalition_shortfall: Rat,
    pub coalition_bound: Rat,
    pub on_path_distance: Rat,
    pub on_path_bound: Rat,
    pub saddle_gap: Rat,
    pub saddle_bound: Rat,
    pub passes: bool,
    pub convention_gap: Rat,
    pub reaction_node_gaps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowReport {
    pub family: String,
    pub max_gap: Rat,
    pub bound: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreeDetails {
    pub delta: Vec<usize>,
    /// Per outcome, which player's `mu` comes first: `A`, `B` or `C` for players 0, 1, 2.
    pub event: Vec<String>,
    pub processes: Vec<ProcessReport>,
    pub saddles: Vec<SaddleReport>,
    pub windows: Vec<WindowReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoDetails {
    pub node_without_pure_equilibrium: bool,
    pub used_enumeration: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub players: usize,
    pub epsilon: Rat,
    pub h: Rat,
    pub start: Vec<usize>,
    pub profile: ProfileFile,
    pub certificate: CertificateReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two: Option<TwoDetails>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub three: Option<ThreeDetails>,
}

fn table(p: &AdaptedProcess) -> Vec<Vec<Rat>> {
    p.rows().iter().map(|row| rats(row)).collect()
}

pub fn three_details(sol: &ThreePlayerSolution) -> ThreeDetails {
    let ctx = &sol.context;
    let processes = ctx
        .players
        .iter()
        .enumerate()
        .map(|(player, p)| ProcessReport {
            player,
            x: table(&p.x),
            y: table(&p.y),
            z: table(&p.z),
            v: table(&p.v),
            mu: p.mu.values().to_vec(),
        })
        .collect();
    let saddles = ctx
        .saddle_certificates
        .iter()
        .zip(&ctx.saddle_components)
        .enumerate()
        .map(|(leader, (s, c))| SaddleReport {
            leader,
            start: ctx.saddle_start[leader].values().to_vec(),
            leader_excess: Rat(s.leader_excess.clone()),
            leader_bound: Rat(s.leader_bound.clone()),
            coalition_shortfall: Rat(s.coalition_shortfall.clone()),
            coalition_bound: Rat(s.coalition_bound.clone()),
            on_path_distance: Rat(s.on_path_distance.clone()),
            on_path_bound: Rat(s.on_path_bound.clone()),
            saddle_gap: Rat(s.saddle_gap.clone()),
            saddle_bound: Rat(s.saddle_bound.clone()),
            passes: s.passes(),
            convention_gap: Rat(c.convention_gap.clone()),
            reaction_node_gaps: c.reaction_node_gaps,
        })
        .collect();
    let mut windows: Vec<WindowReport> = ctx
        .families
        .window_report()
        .into_iter()
        .map(|(family, gap, bound)| WindowReport { family, max_gap: Rat(gap), bound: Rat(bound) })
        .collect();
    for (leader, c) in ctx.saddle_components.iter().enumerate() {
        for (name, gap, bound) in c.families.window_report() {
            windows.push(WindowReport { family: format!("saddle[{leader}].{name}"), max_gap: Rat(gap), bound: Rat(bound) });
        }
    }
    ThreeDetails {
        delta: ctx.delta.clone(),
        event: ctx.event.iter().map(|&e| ["A", "B", "C"][e].to_string()).collect(),
        processes,
        saddles,
        windows,
    }
}

fn status(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn render_certificate(out: &mut String, c: &CertificateReport) {
    let _ = writeln!(out, "certificate: {} (max gap {} vs bound {} = {})", status(c.passes), c.max_gap.0, c.bound.0, c.bound_label);
    for p in &c.players {
        let on_path: Vec<String> = p.on_path.iter().map(|x| x.0.to_string()).collect();
        let _ = writeln!(out, "  player {}: gap {}  on-path [{}]", p.player, p.max_gap.0, on_path.join(", "));
    }
}

/// Plain-text summary of a solve report.
pub fn render(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "players {}  epsilon {}  h {}  start {:?}", r.players, r.epsilon.0, r.h.0, r.start);
    render_certificate(&mut out, &r.certificate);
    if let Some(t) = &r.two {
        let _ = writeln!(
            out,
            "two-player solver: node without pure equilibrium {}, enumeration fallback {}",
            t.node_without_pure_equilibrium, t.used_enumeration
        );
    }
    if let Some(t) = &r.three {
        let _ = writeln!(out, "delta {:?}  events {}", t.delta, t.event.join(""));
        for p in &t.processes {
            let _ = writeln!(out, "  mu[{}] = {:?}", p.player, p.mu);
        }
        for s in &t.saddles {
            let _ = writeln!(
                out,
                "saddle leader {}: {} (leader {} <= {}, coalition {} <= {}, on-path {} <= {}, total {} <= {}; convention gap {}, node gaps {})",
                s.leader,
                status(s.passes),
                s.leader_excess.0,
                s.leader_bound.0,
                s.coalition_shortfall.0,
                s.coalition_bound.0,
                s.on_path_distance.0,
                s.on_path_bound.0,
                s.saddle_gap.0,
                s.saddle_bound.0,
                s.convention_gap.0,
                s.reaction_node_gaps,
            );
        }
        for w in &t.windows {
            let _ = writeln!(out, "window {}: {} <= {}", w.family, w.max_gap.0, w.bound.0);
        }
    }
    out
}
