//! Runs a parsed scenario and writes its outputs.

use std::path::Path;
use std::time::Instant;

use socsense_core::detection::{
    privacy_rollout, simulate_detection, solve_classical_qd, solve_privacy_stopping,
    solve_social_qd, Decision, PolicyGrid, SimulationSettings,
};
use socsense_core::game::{average_checkpoints, run_repeated_game, Checkpoint};
use socsense_core::incest::{
    oracle_fair_rating, run_reputation_protocol, run_reputation_with_observations, ReputationRun,
};
use socsense_core::social::{analyze_trace, is_cascade_point, run_protocol};
use socsense_core::{Belief, SimRng};

use crate::config::{Scenario, ScenarioConfig, ScenarioKind};
use crate::error::CliError;
use crate::output::{num, write_outputs, RunManifest, RunOutput, Table};

pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let output = match &config.scenario {
        Scenario::SocialLearning { params, horizon } => social(params, *horizon, config.seed)?,
        Scenario::Reputation {
            params,
            graph,
            mode,
            observations,
            oracle,
        } => {
            let run = match observations {
                Some(obs) => ReputationRun {
                    true_state: usize::MAX,
                    records: run_reputation_with_observations(graph, params, obs, *mode)?,
                },
                None => run_reputation_protocol(graph, params, config.seed, *mode)?,
            };
            let mut out = reputation(&run, params.state_count());
            if *oracle {
                let actions = run.actions();
                let mut worst = 0.0f64;
                for r in &run.records {
                    let exact = oracle_fair_rating(graph, params, r.node, &actions, *mode)?;
                    worst = worst.max(exact.total_variation(&r.fused));
                }
                out.note("max_oracle_tv", num(worst));
            }
            out
        }
        Scenario::Detection {
            params,
            costs,
            solver,
            simulation,
        } => {
            let grid = if config.kind == ScenarioKind::QdClassic {
                solve_classical_qd(params, costs, solver)?
            } else {
                solve_social_qd(params, costs, solver)?
            };
            let mut out = policy_tables(&grid, |d| d.label());
            out.note("switches", grid.switches().len());
            out.note(
                "announce_to_continue",
                grid.count_transitions(Decision::Announce, Decision::Continue),
            );
            out.note(
                "continue_to_announce",
                grid.count_transitions(Decision::Continue, Decision::Announce),
            );
            let mids: Vec<String> = grid
                .switches()
                .iter()
                .map(|s| format!("{:.4}", s.midpoint))
                .collect();
            out.note("switch_points", mids.join(" "));
            convergence_notes(&mut out, &grid);
            if let Some(sim) = simulation {
                let summary = simulate_detection(
                    &grid,
                    params,
                    costs,
                    &SimulationSettings {
                        runs: sim.runs,
                        horizon: sim.horizon,
                        seed: config.seed,
                    },
                )?;
                let mut t = Table::new(
                    "summary.csv",
                    [
                        "runs",
                        "horizon",
                        "mean_cost",
                        "cost_std_error",
                        "mean_delay",
                        "false_alarm_rate",
                        "truncated",
                    ],
                );
                t.push(vec![
                    summary.runs.to_string(),
                    sim.horizon.to_string(),
                    num(summary.mean_cost),
                    num(summary.cost_std_error),
                    num(summary.mean_delay),
                    num(summary.false_alarm_rate),
                    summary.truncated.to_string(),
                ]);
                out.tables.push(t);
            }
            out
        }
        Scenario::Privacy {
            params,
            costs,
            discount,
            target_state,
            solver,
            rollouts,
            horizon,
        } => {
            let policy = solve_privacy_stopping(params, costs, *discount, *target_state, solver)?;
            let mut out = policy_tables(&policy.grid, |d| d.label());
            let intervals: Vec<String> = policy
                .herd_intervals()
                .iter()
                .map(|&(lo, hi)| {
                    format!(
                        "[{:.4}, {:.4}]",
                        policy.grid.point(lo),
                        policy.grid.point(hi)
                    )
                })
                .collect();
            out.note("herd_intervals", intervals.join(" "));
            out.note(
                "herd_region_connected",
                policy.herd_region_is_target_interval(),
            );
            convergence_notes(&mut out, &policy.grid);
            let mut t = Table::new("trace.csv", ["replica", "k", "true_state", "p", "decision"]);
            let mut relapses = 0;
            for r in 0..*rollouts {
                let mut rng = SimRng::with_stream(config.seed, r as u64);
                let trace = privacy_rollout(&policy, params, *horizon, &mut rng)?;
                relapses += usize::from(trace.reveals_after_herding());
                for (k, (b, d)) in trace.beliefs.iter().zip(&trace.decisions).enumerate() {
                    t.push(vec![
                        (r + 1).to_string(),
                        k.to_string(),
                        (trace.true_state + 1).to_string(),
                        num(b.get(1)),
                        d.label().to_string(),
                    ]);
                }
            }
            out.tables.push(t);
            out.note("rollouts_revealing_after_herding", relapses);
            out
        }
        Scenario::Game {
            game,
            settings,
            replicas,
        } => {
            let settings = socsense_core::game::GameSettings {
                seed: config.seed,
                ..settings.clone()
            };
            let checkpoints = if *replicas == 1 {
                run_repeated_game(game, &settings)?.checkpoints
            } else {
                let seeds: Vec<u64> = (0..*replicas as u64)
                    .map(|r| config.seed.wrapping_add(r))
                    .collect();
                average_checkpoints(game, &settings, &seeds)?
            };
            game_output(&checkpoints, game.player_count(), *replicas)
        }
    };
    write_outputs(
        out_dir,
        config.kind,
        config.seed,
        output,
        start.elapsed(),
        &config.source,
    )
}

fn belief_columns(prefix: &str, states: usize) -> Vec<String> {
    (1..=states).map(|i| format!("{prefix}_{i}")).collect()
}

fn belief_cells(b: &Belief) -> impl Iterator<Item = String> + '_ {
    b.probs().iter().map(|&p| num(p))
}

fn social(
    params: &socsense_core::ModelParams,
    horizon: usize,
    seed: u64,
) -> Result<RunOutput, CliError> {
    let trace = run_protocol(params, horizon, seed)?;
    let x = params.state_count();
    let mut header: Vec<String> = ["k", "true_state", "observation", "action"]
        .map(String::from)
        .to_vec();
    header.extend(belief_columns("private", x));
    header.extend(belief_columns("public", x));
    header.push("cascade".into());
    let mut t = Table::new("trace.csv", header);
    for (i, s) in trace.steps.iter().enumerate() {
        let mut row = vec![
            (i + 1).to_string(),
            (s.true_state + 1).to_string(),
            (s.obs + 1).to_string(),
            (s.action + 1).to_string(),
        ];
        row.extend(belief_cells(&s.private_belief));
        row.extend(belief_cells(&s.public_belief));
        row.push(u8::from(is_cascade_point(&s.public_belief, params)).to_string());
        t.push(row);
    }
    let report = analyze_trace(&trace, params);
    let show = |v: Option<usize>| v.map_or("none".to_string(), |k| k.to_string());
    let mut out = RunOutput::default();
    out.tables.push(t);
    out.note("individual_herd_at", show(report.individual_herd_at));
    out.note("herd_at", show(report.herd_at));
    out.note("cascade_at", show(report.cascade_at));
    Ok(out)
}

fn reputation(run: &ReputationRun, states: usize) -> RunOutput {
    let mut header: Vec<String> = [
        "node",
        "agent",
        "epoch",
        "observation",
        "action",
        "achievable",
    ]
    .map(String::from)
    .to_vec();
    header.extend(belief_columns("fused", states));
    header.extend(belief_columns("private", states));
    header.extend(belief_columns("public", states));
    let mut trace = Table::new("trace.csv", header);
    let mut weights = Table::new("weights.csv", ["node", "source", "weight"]);
    for r in &run.records {
        let mut row = vec![
            r.node.to_string(),
            r.agent.to_string(),
            r.epoch.to_string(),
            (r.observation + 1).to_string(),
            (r.action + 1).to_string(),
            u8::from(r.achievable).to_string(),
        ];
        row.extend(belief_cells(&r.fused));
        row.extend(belief_cells(&r.private_belief));
        row.extend(belief_cells(&r.public_belief));
        trace.push(row);
        for (m, w) in r.weights.iter().enumerate() {
            weights.push(vec![r.node.to_string(), (m + 1).to_string(), w.to_string()]);
        }
    }
    let mut out = RunOutput::default();
    let blocked: Vec<String> = run
        .records
        .iter()
        .filter(|r| !r.achievable)
        .map(|r| r.node.to_string())
        .collect();
    out.tables.push(trace);
    out.tables.push(weights);
    if run.true_state != usize::MAX {
        out.note("true_state", run.true_state + 1);
    }
    out.note(
        "not_achievable",
        if blocked.is_empty() {
            "none".to_string()
        } else {
            blocked.join(" ")
        },
    );
    out
}

fn policy_tables<D: Copy + PartialEq>(grid: &PolicyGrid<D>, label: impl Fn(D) -> u8) -> RunOutput {
    let mut policy = Table::new("policy.csv", ["index", "p", "decision", "value"]);
    let mut value = Table::new("value.csv", ["index", "p", "value"]);
    for g in 0..grid.grid_size() {
        let p = num(grid.point(g));
        let v = num(grid.values[g]);
        policy.push(vec![
            (g + 1).to_string(),
            p.clone(),
            label(grid.decisions[g]).to_string(),
            v.clone(),
        ]);
        value.push(vec![(g + 1).to_string(), p, v]);
    }
    RunOutput {
        tables: vec![policy, value],
        notes: Vec::new(),
    }
}

fn convergence_notes<D>(out: &mut RunOutput, grid: &PolicyGrid<D>) {
    out.note("iterations", grid.iterations);
    out.note(
        "final_residual",
        grid.residuals
            .last()
            .map_or("none".to_string(), |r| num(*r)),
    );
}

fn game_output(checkpoints: &[Checkpoint], players: usize, replicas: usize) -> RunOutput {
    let mut header: Vec<String> = vec!["step".into(), "ce_violation".into()];
    header.extend((1..=players).map(|l| format!("max_regret_{l}")));
    let mut t = Table::new("regrets.csv", header);
    for c in checkpoints {
        let mut row = vec![c.step.to_string(), num(c.ce_violation)];
        row.extend(c.max_positive_regret.iter().map(|&r| num(r)));
        t.push(row);
    }
    let mut out = RunOutput::default();
    out.note("replicas", replicas);
    if let Some(last) = checkpoints.last() {
        out.note("final_ce_violation", num(last.ce_violation));
    }
    out.tables.push(t);
    out
}
