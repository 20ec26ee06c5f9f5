//! Acceptance checks, one `[PASS]`/`[FAIL]` line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::{changes, config, manifest_note, run_ok, transitions, Csv};
use socsense_cli::{parse_config, Scenario};
use socsense_core::belief::{hmm_filter, predict, social_learning_filter, social_update};
use socsense_core::game::{regret_update, GameSpec, RegretState};
use socsense_core::incest::{
    achievability, fusion_weights, oracle_fair_rating, run_reputation_protocol,
    run_reputation_with_observations, FusionMode, InformationFlowGraph,
};
use socsense_core::social::{
    is_cascade_point, is_individual_herd, run_protocol, run_until_cascade,
};
use socsense_core::{ActionRule, Belief, Matrix, ModelParams, SimRng};

type Check = Result<String, String>;
type Criterion = (&'static str, fn(&Path) -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_jump(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max)
}

fn solve_both_detectors(dir: &Path) -> (Csv, Csv, f64) {
    let social = dir.join("fig3");
    let classic = dir.join("classic");
    let start = Instant::now();
    run_ok("qd-social", &config("fig3.cfg"), &social, &[]);
    let secs = start.elapsed().as_secs_f64();
    run_ok("qd-classic", &config("qd-classic.cfg"), &classic, &[]);
    (
        Csv::read(&social.join("policy.csv")),
        Csv::read(&classic.join("policy.csv")),
        secs,
    )
}

fn ac1(dir: &Path) -> Check {
    let (social, classic, secs) = solve_both_detectors(dir);
    let d = social.ints("decision");
    let up = transitions(&d, 1, 2);
    let classic_switches = changes(&classic.ints("decision"));
    ensure(social.rows.len() == 1000, || {
        format!("{} grid rows", social.rows.len())
    })?;
    ensure(up == 3, || format!("social policy has {up} 1→2 switches"))?;
    ensure(classic_switches == 1, || {
        format!("classical policy switches {classic_switches} times")
    })?;
    ensure(secs < 10.0, || format!("social solve took {secs:.1}s"))?;
    Ok(format!(
        "social 1→2 switches = {up}, classical switches = {classic_switches}, {secs:.2}s"
    ))
}

fn ac2(dir: &Path) -> Check {
    let social = Csv::read(&dir.join("fig3/value.csv")).floats("value");
    let classic = Csv::read(&dir.join("classic/value.csv")).floats("value");
    let (s, c) = (max_jump(&social), max_jump(&classic));
    ensure(s > 10.0 * c, || {
        format!("social jump {s:.3e} vs classical {c:.3e}")
    })?;
    Ok(format!(
        "max jump social {s:.3e} / classical {c:.3e} = {:.1}x",
        s / c
    ))
}

fn example_graph() -> InformationFlowGraph {
    let edges = [
        (1, 4),
        (1, 5),
        (1, 3),
        (2, 3),
        (2, 4),
        (2, 5),
        (2, 6),
        (3, 5),
        (3, 6),
        (4, 5),
        (4, 6),
    ];
    InformationFlowGraph::from_edges(2, 6, &edges).expect("valid graph")
}

fn ac3(dir: &Path) -> Check {
    let g = example_graph();
    let view = g.transitive_closure().map_err(|e| e.to_string())?;
    let t5: Vec<Vec<u8>> = vec![
        vec![1, 0, 1, 1, 1],
        vec![0, 1, 1, 1, 1],
        vec![0, 0, 1, 0, 1],
        vec![0, 0, 0, 1, 1],
        vec![0, 0, 0, 0, 1],
    ];
    ensure(view.prefix(5) == t5, || {
        format!("T_5 = {:?}", view.prefix(5))
    })?;
    let expected: [&[i64]; 4] = [&[0], &[1, 1], &[1, 1, 0], &[-1, -1, 1, 1]];
    for (n, want) in (2..=5).zip(expected) {
        let w = fusion_weights(&view, n).map_err(|e| e.to_string())?;
        ensure(w.weights == want, || format!("w_{n} = {:?}", w.weights))?;
    }
    let mut cut = g.clone();
    cut.remove_edge(2, 5);
    let check = achievability(&cut.transitive_closure().map_err(|e| e.to_string())?, 5)
        .map_err(|e| e.to_string())?;
    ensure(!check.achievable && check.violations == [2], || {
        format!(
            "without (2,5): achievable={} violations={:?}",
            check.achievable, check.violations
        )
    })?;
    let out = dir.join("paper-graph");
    run_ok("reputation", &config("paper-graph.cfg"), &out, &[]);
    let w = Csv::read(&out.join("weights.csv"));
    let w5: Vec<i64> = w
        .rows
        .iter()
        .filter(|r| r[0] == "5")
        .map(|r| r[2].parse().unwrap())
        .collect();
    ensure(w5 == [-1, -1, 1, 1], || format!("weights.csv w_5 = {w5:?}"))?;
    Ok("T_5 and w_2..w_5 exact; dropping (2,5) violates at j=2".into())
}

fn random_row(rng: &mut SimRng, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| floor + rng.uniform()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn random_matrix(rng: &mut SimRng, rows: usize, cols: usize, floor: f64) -> Matrix {
    let r: Vec<Vec<f64>> = (0..rows).map(|_| random_row(rng, cols, floor)).collect();
    Matrix::from_rows(&r).expect("rectangular")
}

/// Random DAG, then direct edges added wherever a node's weights need them.
fn random_achievable_dag(rng: &mut SimRng) -> InformationFlowGraph {
    let nodes = 2 + rng.below(7);
    let agents = 1 + rng.below(3);
    let mut g = InformationFlowGraph::new(agents, nodes);
    for to in 2..=nodes {
        for from in 1..to {
            if rng.uniform() < 0.35 {
                g.add_edge(from, to).expect("forward edge");
            }
        }
        loop {
            let view = g.transitive_closure().expect("acyclic");
            let check = achievability(&view, to).expect("node in range");
            if check.achievable {
                break;
            }
            for j in check.violations {
                g.add_edge(j, to).expect("forward edge");
            }
        }
    }
    g
}

fn ac4(_dir: &Path) -> Check {
    let mut rng = SimRng::new(2024);
    let mut worst = 0.0f64;
    let mut realizations = 0;
    for _ in 0..100 {
        let g = random_achievable_dag(&mut rng);
        let params = ModelParams::new(
            Matrix::identity(2),
            random_matrix(&mut rng, 2, 2, 0.05),
            random_matrix(&mut rng, 2, 2, 0.0),
            random_row(&mut rng, 2, 0.1),
        )
        .map_err(|e| e.to_string())?;
        for seed in 0..10 {
            let run = run_reputation_protocol(&g, &params, seed, FusionMode::Fair)
                .map_err(|e| e.to_string())?;
            let actions = run.actions();
            for r in &run.records {
                let exact = oracle_fair_rating(&g, &params, r.node, &actions, FusionMode::Fair)
                    .map_err(|e| e.to_string())?;
                worst = worst.max(exact.total_variation(&r.fused));
            }
            realizations += 1;
        }
    }
    ensure(worst <= 1e-9, || {
        format!("fair fusion off by TV {worst:.3e}")
    })?;

    let cfg = parse_config(&config("incest-loop.cfg")).map_err(|e| e.to_string())?;
    let Scenario::Reputation {
        params,
        graph,
        observations: Some(obs),
        ..
    } = cfg.scenario
    else {
        return Err("incest-loop.cfg is not a reputation run with fixed observations".into());
    };
    let records = run_reputation_with_observations(&graph, &params, &obs, FusionMode::Naive)
        .map_err(|e| e.to_string())?;
    let actions: Vec<usize> = records.iter().map(|r| r.action).collect();
    let last = records.last().expect("nodes");
    let exact = oracle_fair_rating(&graph, &params, last.node, &actions, FusionMode::Naive)
        .map_err(|e| e.to_string())?;
    let naive_tv = exact.total_variation(&last.fused);
    ensure(naive_tv > 1e-3, || {
        format!("naive loop TV only {naive_tv:.3e}")
    })?;
    Ok(format!(
        "fair max TV {worst:.1e} over {realizations} realizations; naive loop TV {naive_tv:.3}"
    ))
}

fn social_params(name: &str) -> Result<(ModelParams, usize), String> {
    match parse_config(&config(name))
        .map_err(|e| e.to_string())?
        .scenario
    {
        Scenario::SocialLearning { params, horizon } => Ok((params, horizon)),
        _ => Err(format!("{name} is not a social-learning run")),
    }
}

fn ac5(dir: &Path) -> Check {
    let (params, _) = social_params("cascade.cfg")?;
    ensure(params.transition().is_identity(), || {
        "cascade.cfg needs P = I".into()
    })?;
    let mut reached = 0;
    let mut latest = 0;
    for seed in 0..1000 {
        if let Some(k) = run_until_cascade(&params, 10_000, seed).map_err(|e| e.to_string())? {
            reached += 1;
            latest = latest.max(k);
        }
    }
    ensure(reached >= 990, || format!("{reached}/1000 runs cascaded"))?;
    let out = dir.join("cascade");
    run_ok("social-learning", &config("cascade.cfg"), &out, &[]);
    let noted = manifest_note(&out, "cascade_at").unwrap_or_default();
    ensure(noted.parse::<usize>().is_ok(), || {
        format!("bundled run: cascade_at = {noted}")
    })?;
    Ok(format!(
        "{reached}/1000 runs cascaded, latest at step {latest}"
    ))
}

fn ac6(dir: &Path) -> Check {
    let (params, horizon) = social_params("herding.cfg")?;
    ensure(!params.transition().is_identity(), || {
        "herding.cfg needs P ≠ I".into()
    })?;
    let mut herd_steps = 0;
    let mut drift = 0.0f64;
    for seed in 0..200 {
        let trace = run_protocol(&params, horizon, seed).map_err(|e| e.to_string())?;
        for k in 1..=trace.len() {
            let before = trace.public_belief(k - 1);
            if !is_individual_herd(before, &params) {
                continue;
            }
            herd_steps += 1;
            ensure(!is_cascade_point(before, &params), || {
                format!("seed {seed}: cascade point at step {k}")
            })?;
            let expected = Belief::new(predict(before, &params)).map_err(|e| e.to_string())?;
            drift = drift.max(expected.max_abs_diff(trace.public_belief(k)));
        }
    }
    ensure(herd_steps > 0, || "no herding observed".into())?;
    ensure(drift <= 1e-12, || {
        format!("herd update off Pᵀπ by {drift:.3e}")
    })?;
    let out = dir.join("herding");
    run_ok("social-learning", &config("herding.cfg"), &out, &[]);
    let cascade = manifest_note(&out, "cascade_at").unwrap_or_default();
    let herd = manifest_note(&out, "individual_herd_at").unwrap_or_default();
    ensure(cascade == "none" && herd != "none", || {
        format!("bundled run: individual_herd_at = {herd}, cascade_at = {cascade}")
    })?;
    Ok(format!(
        "{herd_steps} herd steps, none a cascade point, max |π_k − Pᵀπ_(k-1)| = {drift:.1e}"
    ))
}

fn direct_regret(
    game: &GameSpec,
    player: usize,
    history: &[Vec<usize>],
    i: usize,
    j: usize,
) -> f64 {
    let mut total = 0.0;
    for p in history.iter().filter(|p| p[player] == i) {
        let mut deviated = p.clone();
        deviated[player] = j;
        total += game.utility(player, &deviated) - game.utility(player, p);
    }
    total / history.len() as f64
}

fn ac7(dir: &Path) -> Check {
    let mut summary = Vec::new();
    for name in ["coordination", "anti-coordination", "congestion"] {
        let out = dir.join(name);
        run_ok("game", &config(&format!("{name}.cfg")), &out, &[]);
        let r = Csv::read(&out.join("regrets.csv"));
        let last = r.rows.last().ok_or("empty regrets.csv")?;
        ensure(last[r.col("step")] == "100000", || {
            format!("{name}: last checkpoint {}", last[0])
        })?;
        ensure(
            manifest_note(&out, "replicas").as_deref() == Some("20"),
            || format!("{name}: not averaged over 20 seeds"),
        )?;
        let ce: f64 = last[r.col("ce_violation")].parse().unwrap();
        let regret = r
            .header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with("max_regret_"))
            .map(|(c, _)| last[c].parse::<f64>().unwrap())
            .fold(0.0, f64::max);
        ensure(ce <= 0.05 && regret <= 0.05, || {
            format!("{name}: ce_violation {ce:.3e}, max regret {regret:.3e}")
        })?;
        summary.push(format!("{name} {:.1e}/{:.1e}", regret, ce));
    }

    let mut rng = SimRng::new(7);
    let mut gap = 0.0f64;
    for _ in 0..200 {
        let counts: Vec<usize> = (0..2 + rng.below(2)).map(|_| 2 + rng.below(2)).collect();
        let profiles: usize = counts.iter().product();
        let utilities: Vec<Vec<f64>> = counts
            .iter()
            .map(|_| (0..profiles).map(|_| 10.0 * rng.uniform() - 5.0).collect())
            .collect();
        let game = GameSpec::new(counts.clone(), utilities).map_err(|e| e.to_string())?;
        let len = 1 + rng.below(500);
        let history: Vec<Vec<usize>> = (0..len)
            .map(|_| counts.iter().map(|&a| rng.below(a)).collect())
            .collect();
        for (l, &a) in counts.iter().enumerate() {
            let mut state = RegretState::new(a, 0, 100.0).map_err(|e| e.to_string())?;
            for (k, p) in history.iter().enumerate() {
                state = regret_update(&state, &game, l, p, k as u64 + 1);
            }
            for i in 0..a {
                for j in (0..a).filter(|&j| j != i) {
                    gap = gap
                        .max((state.regret(i, j) - direct_regret(&game, l, &history, i, j)).abs());
                }
            }
        }
    }
    ensure(gap <= 1e-12, || {
        format!("recursive regret off time average by {gap:.3e}")
    })?;
    Ok(format!(
        "regret/CE at 1e5: {}; recursion gap {gap:.1e}",
        summary.join(", ")
    ))
}

fn ac8(_dir: &Path) -> Check {
    let mut rng = SimRng::new(8);
    let mut sigma_err = 0.0f64;
    let mut mix_err = 0.0f64;
    for _ in 0..10_000 {
        let x = 2 + rng.below(3);
        let y = 2 + rng.below(3);
        let a = 2 + rng.below(3);
        let transition = random_matrix(&mut rng, x, x, 0.0);
        let observation = random_matrix(&mut rng, x, y, 0.01);
        let costs_rows: Vec<Vec<f64>> = (0..x)
            .map(|_| (0..a).map(|_| rng.uniform()).collect())
            .collect();
        let params = ModelParams::new(
            transition.clone(),
            observation.clone(),
            Matrix::from_rows(&costs_rows).expect("rectangular"),
            random_row(&mut rng, x, 0.0),
        )
        .map_err(|e| e.to_string())?;
        let pi = Belief::new(random_row(&mut rng, x, 0.0)).map_err(|e| e.to_string())?;

        let total: f64 = social_update(&pi, &params)
            .branches
            .iter()
            .map(|b| b.normalizer)
            .sum();
        sigma_err = sigma_err.max((total - 1.0).abs());

        let mut mix = vec![0.0; x];
        for act in 0..a {
            if let Ok((post, sigma)) = social_learning_filter(&pi, act, &params) {
                for (m, p) in mix.iter_mut().zip(post.probs()) {
                    *m += sigma * p;
                }
            }
        }
        for (m, p) in mix.iter().zip(predict(&pi, &params)) {
            mix_err = mix_err.max((m - p).abs());
        }

        let reveal = ModelParams::with_rule(
            transition,
            observation,
            Matrix::filled(x, y, 0.0),
            pi.probs().to_vec(),
            ActionRule::RevealObservation,
        )
        .map_err(|e| e.to_string())?;
        for obs in 0..y {
            let (social, _) =
                social_learning_filter(&pi, obs, &reveal).map_err(|e| e.to_string())?;
            let hmm = hmm_filter(&pi, obs, &reveal).map_err(|e| e.to_string())?;
            ensure(social == hmm, || {
                format!("reveal mode: {social:?} vs {hmm:?}")
            })?;
        }
    }
    ensure(sigma_err <= 1e-10, || format!("Σσ off by {sigma_err:.3e}"))?;
    ensure(mix_err <= 1e-10, || {
        format!("smoothing identity off by {mix_err:.3e}")
    })?;
    Ok(format!(
        "10^4 beliefs: |Σσ − 1| ≤ {sigma_err:.1e}, |Σσ·T − Pᵀπ| ≤ {mix_err:.1e}, reveal = HMM exactly"
    ))
}

fn ac9(dir: &Path) -> Check {
    let out = dir.join("privacy");
    run_ok("privacy", &config("privacy.cfg"), &out, &[]);
    let d = Csv::read(&out.join("policy.csv")).ints("decision");
    let herd: Vec<usize> = (0..d.len()).filter(|&g| d[g] == 2).collect();
    let (lo, hi) = match (herd.first(), herd.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err("no herd region".into()),
    };
    ensure(herd.len() == hi - lo + 1, || {
        format!("herd region not connected: {herd:?}")
    })?;
    ensure(lo == 0, || {
        format!("herd region [{lo}, {hi}] misses the target vertex")
    })?;
    ensure(herd.len() < d.len(), || "policy herds everywhere".into())?;
    let trace = Csv::read(&out.join("trace.csv"));
    let replica = trace.ints("replica");
    let decision = trace.ints("decision");
    let mut relapses = 0;
    for k in 1..decision.len() {
        if replica[k] == replica[k - 1] && decision[k - 1] == 2 && decision[k] == 1 {
            relapses += 1;
        }
    }
    let replicas = replica.last().copied().unwrap_or(0);
    ensure(relapses == 0, || {
        format!("{relapses} reveals after herding")
    })?;
    Ok(format!(
        "herd grid points {}..={} of {}; {replicas} rollouts never reveal after herding",
        lo + 1,
        hi + 1,
        d.len()
    ))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: [Criterion; 9] = [
        ("AC1 social vs classical switch counts", ac1),
        ("AC2 value-function discontinuity", ac2),
        ("AC3 worked incest example", ac3),
        ("AC4 oracle equivalence", ac4),
        ("AC5 cascade formation", ac5),
        ("AC6 herding without cascade", ac6),
        ("AC7 regret matching", ac7),
        ("AC8 filter identities", ac8),
        ("AC9 privacy stopping structure", ac9),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(|| check(dir.path()))).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
