//! Fast self-checks behind the `diagnose` command: gradient correctness,
//! reward point values, wave periodicity, and environment determinism.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::EnvConfig;
use crate::nn::Mlp;
use crate::reward;
use crate::sim::{ActionCommand, GraspEnv};
use crate::wave::SeaStateSpec;

/// Outcome of one named self-check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: impl Into<String>) -> Self {
        CheckResult {
            name,
            passed: true,
            detail: detail.into(),
        }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> Self {
        CheckResult {
            name,
            passed: false,
            detail: detail.into(),
        }
    }
}

/// Outcome of the gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOutcome {
    pub cases: usize,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Compare analytic gradients against central finite differences for
/// `cases` random small networks (h = 1e-5, relative error below 1e-5).
/// Inputs whose hidden pre-activations sit within 1e-4 of the ReLU kink are
/// redrawn, since finite differences straddle the kink there. `tamper`
/// optionally biases every analytic gradient; it exists so the check can be
/// shown to fail when the gradients are wrong.
pub fn gradient_check(cases: usize, seed: u64, tamper: Option<f64>) -> GradCheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes: [&[usize]; 3] = [&[3, 6, 5, 2], &[4, 8, 3], &[2, 5, 5, 5, 1]];
    let h = 1e-5;
    let mut max_rel_err: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < cases && attempts < cases * 4 {
        attempts += 1;
        let widths = shapes[done % shapes.len()];
        let net = Mlp::new(widths, &mut rng);
        let in_dim = widths[0];
        let out_dim = *widths.last().unwrap();
        let input: Vec<f64> = (0..in_dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let coeffs: Vec<f64> = (0..out_dim).map(|_| rng.random_range(0.5..1.5)).collect();

        let x = Array2::from_shape_vec((1, in_dim), input.clone()).unwrap();
        let trace = net.forward_trace(&x);
        if trace.min_abs_hidden_pre() < 1e-4 {
            continue;
        }
        let upstream = Array2::from_shape_vec((1, out_dim), coeffs.clone()).unwrap();
        let (grads, _) = net.backward(&trace, &upstream);

        let loss = |net: &Mlp| -> f64 {
            net.forward(&input)
                .iter()
                .zip(&coeffs)
                .map(|(y, c)| y * c)
                .sum()
        };
        for idx in 0..net.param_count() {
            let mut plus = net.clone();
            *plus.param_mut(idx) += h;
            let mut minus = net.clone();
            *minus.param_mut(idx) -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let analytic = Mlp::grad_at(&grads, idx) + tamper.unwrap_or(0.0);
            let denom = analytic.abs().max(numeric.abs()).max(1.0);
            max_rel_err = max_rel_err.max(((analytic - numeric) / denom).abs());
        }
        done += 1;
    }
    GradCheckOutcome {
        cases: done,
        max_rel_err,
        passed: done == cases && max_rel_err < 1e-5,
    }
}

fn gradient_check_result(tamper: Option<f64>) -> CheckResult {
    let outcome = gradient_check(25, 2024, tamper);
    let detail = format!(
        "{} nets, max relative error {:.3e}",
        outcome.cases, outcome.max_rel_err
    );
    if outcome.passed {
        CheckResult::pass("gradient_check", detail)
    } else {
        CheckResult::fail("gradient_check", detail)
    }
}

fn reward_points() -> CheckResult {
    // Frozen 30-digit evaluations of 1 - tanh(x).
    const AT_0_5: f64 = 0.319523993887338107661278381959;
    const ORI_QUARTER_PI: f64 = 0.344205797367327564346878857308;
    let name = "reward_point_tests";
    if reward::reach_position(0.0) != 1.0 {
        return CheckResult::fail(name, "reach_position(0) != 1");
    }
    let rp = reward::reach_position(0.5);
    if (rp - AT_0_5).abs() > 1e-12 {
        return CheckResult::fail(name, format!("reach_position(0.5) = {rp}"));
    }
    let ro = reward::reach_orientation(std::f64::consts::PI / 4.0, 0.0);
    if (ro - ORI_QUARTER_PI).abs() > 1e-12 {
        return CheckResult::fail(name, format!("reach_orientation(pi/4) = {ro}"));
    }
    let th = reward::LiftThresholds::from(&EnvConfig::default());
    let best = reward::step_reward(0.0, 0.4, 0.4, true, 0.25, true, &th);
    if best.total != 9.5 {
        return CheckResult::fail(name, format!("ideal-state total = {}", best.total));
    }
    CheckResult::pass(name, "point values and 9.5 maximum verified")
}

fn wave_periodicity() -> CheckResult {
    let name = "wave_periodicity";
    for code in 0..3u8 {
        let sea = SeaStateSpec::preset(code).expect("preset");
        let mut max_z: f64 = 0.0;
        for k in 0..20_000 {
            let t = 0.01 * k as f64;
            let a = sea.offset(t);
            let b = sea.offset(t + sea.period);
            for i in 0..3 {
                if (a[i] - b[i]).abs() >= 1e-9 {
                    return CheckResult::fail(
                        name,
                        format!("state {code}: residual at t = {t}"),
                    );
                }
            }
            max_z = max_z.max(a[2].abs());
        }
        if (max_z - sea.amplitude).abs() > 1e-3 {
            return CheckResult::fail(
                name,
                format!("state {code}: scanned amplitude {max_z}"),
            );
        }
    }
    CheckResult::pass(name, "periodicity residual < 1e-9, amplitudes on spec")
}

fn env_determinism() -> CheckResult {
    let name = "env_determinism";
    let cfg = EnvConfig::default();
    for (i, code) in [0u8, 1, 2].iter().enumerate() {
        let sea = SeaStateSpec::preset(*code).expect("preset");
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i as u64);
        let actions: Vec<ActionCommand> =
            (0..50).map(|_| ActionCommand::random(&mut rng)).collect();
        let run = || {
            let mut env = GraspEnv::new(cfg.clone(), sea.clone()).expect("env");
            let mut bits = Vec::new();
            let obs = env.reset(42 + i as u64);
            bits.extend(obs.to_array().iter().map(|v| v.to_bits()));
            for a in &actions {
                match env.step(*a) {
                    Ok(r) => {
                        bits.extend(r.observation.to_array().iter().map(|v| v.to_bits()));
                        bits.push(r.reward.to_bits());
                        if r.terminated || r.truncated {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
            bits
        };
        if run() != run() {
            return CheckResult::fail(name, format!("divergent trace at sea state {code}"));
        }
    }
    CheckResult::pass(name, "replayed traces identical bitwise")
}

/// Run every self-check.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        gradient_check_result(None),
        reward_points(),
        wave_periodicity(),
        env_determinism(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pristine_build_passes_all_checks() {
        for check in run_all() {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
    }

    #[test]
    fn injected_gradient_bug_is_caught() {
        let out = gradient_check(5, 11, Some(1e-3));
        assert!(!out.passed, "tampered gradients passed the check");
        let clean = gradient_check(5, 11, None);
        assert!(clean.passed);
    }
}
