//! The CSV text encoding must not distort summary metrics: everything
//! recomputed from parsed columns agrees with the engine's summary to
//! 1e-6 relative.

use platoon_cli::export;
use platoon_cli::scenario_file::ScenarioFile;
use platoon_core::sim::{self, ACTIVATION_THRESHOLD};
use std::path::PathBuf;

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn csv_parses_back_without_distorting_metrics() {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/collision_course.toml");
    let mut sc = ScenarioFile::load(&path).unwrap().to_scenario().unwrap();
    sc.t_end = 10.0;
    let log = sim::run(&sc).unwrap();
    assert!(log.status.is_completed());
    let summary = sim::summarize(&log);

    let csv = export::csv_string(&log);
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .unwrap_or_else(|| panic!("missing column {name}"))
    };
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), summary.steps);

    let k = sc.followers.len();

    // Min pair margin from dist/min_safe columns.
    let mut min_margin = f64::INFINITY;
    for p in 0..k - 1 {
        let d = col(&format!("dist_{}_{}", p + 1, p + 2));
        let m = col(&format!("min_safe_dist_{}_{}", p + 1, p + 2));
        for row in &rows {
            min_margin = min_margin.min(row[d] - row[m]);
        }
    }
    assert!(
        rel_close(min_margin, summary.min_pair_margin),
        "margin {min_margin} vs {}",
        summary.min_pair_margin
    );

    // Steady-state local error over the final 10% of rows.
    let tail_start = rows.len() - (rows.len() / 10).max(1);
    let mut steady = 0.0;
    for f in 0..k {
        let c = col(&format!("local_err_{}", f + 1));
        steady +=
            rows[tail_start..].iter().map(|r| r[c]).sum::<f64>() / (rows.len() - tail_start) as f64;
    }
    steady /= k as f64;
    assert!(
        rel_close(steady, summary.steady_state_local_error),
        "steady {steady} vs {}",
        summary.steady_state_local_error
    );

    // Activation interval counts from the bias columns.
    for f in 0..k {
        let wa = col(&format!("w_a_{}", f + 1));
        let wg = col(&format!("w_gamma_{}", f + 1));
        let mut count = 0;
        let mut active = false;
        for row in &rows {
            let now = (row[wa] * row[wa] + row[wg] * row[wg]).sqrt() > ACTIVATION_THRESHOLD;
            if now && !active {
                count += 1;
            }
            active = now;
        }
        assert_eq!(
            count,
            summary.activations_per_follower[f],
            "follower {} activation count from CSV",
            f + 1
        );
    }

    // Final disagreement energy.
    let lyap = col("lyapunov");
    assert!(rel_close(
        rows.last().unwrap()[lyap],
        summary.final_lyapunov
    ));
}
