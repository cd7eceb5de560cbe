//! Trajectory CSV export and the human-readable run summary.
//!
//! CSV layout, one row per step: `t`, per-follower blocks
//! `z1,z2,V,psi,a,gamma,w_a,w_gamma`, per-adjacent-pair `dist` and
//! `min_safe_dist` (the binding headway k_v·max of the pair's speeds),
//! per-follower `local_err`, then `lyapunov`. Values are decimal text
//! with 9 significant digits, UTF-8, LF line endings.

use platoon_core::consensus::ReferenceSignal;
use platoon_core::sim::{Summary, TrajectoryLog, ACTIVATION_THRESHOLD};
use std::fmt::Write as _;

/// 9 significant digits, round-trip safe for the summary metrics.
fn num(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn csv_header(follower_count: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for i in 1..=follower_count {
        for field in ["z1", "z2", "V", "psi", "a", "gamma", "w_a", "w_gamma"] {
            cols.push(format!("{field}_{i}"));
        }
    }
    for i in 1..follower_count {
        cols.push(format!("dist_{}_{}", i, i + 1));
        cols.push(format!("min_safe_dist_{}_{}", i, i + 1));
    }
    for i in 1..=follower_count {
        cols.push(format!("local_err_{i}"));
    }
    cols.push("lyapunov".to_string());
    cols.join(",")
}

pub fn csv_string(log: &TrajectoryLog) -> String {
    let k = log.records.first().map_or(0, |r| r.states.len());
    let mut out = String::new();
    out.push_str(&csv_header(k));
    out.push('\n');
    for r in &log.records {
        let mut row = Vec::with_capacity(1 + 8 * k + 2 * k.saturating_sub(1) + k + 1);
        row.push(num(r.t));
        for i in 0..k {
            row.push(num(r.states[i].east));
            row.push(num(r.states[i].north));
            row.push(num(r.states[i].speed));
            row.push(num(r.states[i].heading));
            row.push(num(r.inputs[i].accel));
            row.push(num(r.inputs[i].slip_angle));
            row.push(num(r.biases[i].x));
            row.push(num(r.biases[i].y));
        }
        for p in 0..k.saturating_sub(1) {
            row.push(num(r.pair_distances[p]));
            row.push(num(r.pair_min_safe[p]));
        }
        for i in 0..k {
            row.push(num(r.local_errors[i]));
        }
        row.push(num(r.lyapunov));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn vec_fmt(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", items.join(", "))
}

pub fn summary_text(log: &TrajectoryLog, summary: &Summary, reference: &ReferenceSignal) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario fingerprint: {}", log.fingerprint);
    let _ = writeln!(s, "status: {}", summary.status);
    let _ = writeln!(s, "steps: {}", summary.steps);
    let _ = writeln!(
        s,
        "reference rate bound (m/s): {:.6}",
        reference.rate_bound()
    );
    let _ = writeln!(
        s,
        "min pair margin, distance - headway (m): {:.6}",
        summary.min_pair_margin
    );
    let _ = writeln!(
        s,
        "per-pair min margin (m): {}",
        vec_fmt(&summary.per_pair_min_margin)
    );
    let _ = writeln!(
        s,
        "steady-state local consensus error (m): {:.6}",
        summary.steady_state_local_error
    );
    let _ = writeln!(
        s,
        "per-follower steady-state local error (m): {}",
        vec_fmt(&summary.steady_state_local_error_per_follower)
    );
    let _ = writeln!(
        s,
        "filter activation intervals per follower (threshold |w| > {ACTIVATION_THRESHOLD:.0e}): {:?}",
        summary.activations_per_follower
    );
    let _ = writeln!(
        s,
        "any-follower activation intervals: {}",
        summary.any_activation_intervals
    );
    let _ = writeln!(
        s,
        "steps with input saturation while the filter is active: {}",
        summary.clamp_while_constrained_steps
    );
    let _ = writeln!(
        s,
        "min leader distance (m): {:.6}",
        summary.min_leader_distance
    );
    match summary.max_prediction_gap {
        Some(g) => {
            let _ = writeln!(s, "max prediction gap (m): {g:.6}");
        }
        None => {
            let _ = writeln!(
                s,
                "max prediction gap (m): n/a (run shorter than the horizon)"
            );
        }
    }
    let _ = writeln!(s, "final lyapunov (m²): {:.6}", summary.final_lyapunov);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(680.0), "6.80000000e2");
        assert_eq!(num(0.01), "1.00000000e-2");
        assert_eq!(num(-3.0912345678), "-3.09123457e0");
        assert_eq!(num(0.0), "0.00000000e0");
    }

    #[test]
    fn header_column_count_matches_schema() {
        let k = 5;
        let header = csv_header(k);
        let cols = header.split(',').count();
        assert_eq!(cols, 1 + 8 * k + 2 * (k - 1) + k + 1);
        assert!(header.starts_with("t,z1_1,z2_1,V_1,psi_1,a_1,gamma_1,w_a_1,w_gamma_1"));
        assert!(header.contains("dist_1_2,min_safe_dist_1_2"));
        assert!(header.ends_with("local_err_5,lyapunov"));
    }
}
