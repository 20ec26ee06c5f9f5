use socsense_core::detection::{
    simulate_detection, solve_social_qd, DetectionCosts, SimulationSettings, SolverSettings,
    ThresholdRule,
};
use socsense_core::{Matrix, ModelParams};

fn change_model() -> ModelParams {
    ModelParams::new(
        Matrix::from_rows(&[[1.0, 0.0], [0.05, 0.95]]).unwrap(),
        Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.9]]).unwrap(),
        Matrix::from_rows(&[[4.57, 5.57], [2.57, 0.0]]).unwrap(),
        vec![0.0, 1.0],
    )
    .unwrap()
}

#[test]
fn optimal_policy_beats_every_single_threshold() {
    let params = change_model();
    let costs = DetectionCosts::new(1.05, 3.0).unwrap();
    let policy = solve_social_qd(&params, &costs, &SolverSettings::default()).unwrap();
    let sim = SimulationSettings {
        runs: 10_000,
        horizon: 400,
        seed: 2024,
    };
    let optimal = simulate_detection(&policy, &params, &costs, &sim).unwrap();
    let best = (0..100)
        .map(|t| {
            let rule = ThresholdRule {
                threshold: t as f64 / 99.0,
            };
            simulate_detection(&rule, &params, &costs, &sim).unwrap()
        })
        .min_by(|a, b| a.mean_cost.total_cmp(&b.mean_cost))
        .unwrap();
    let noise = 3.0 * (optimal.cost_std_error.powi(2) + best.cost_std_error.powi(2)).sqrt();
    eprintln!("optimal {:?}\nbest threshold {:?}", optimal, best);
    assert!(optimal.mean_cost <= best.mean_cost + noise);
    assert_eq!(optimal.truncated, 0);
}
