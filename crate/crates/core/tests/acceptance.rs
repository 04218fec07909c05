//! Acceptance gate: twelve criteria, one test and one printed line each.
//! Run with `cargo test -p dyadsim --test acceptance -- --nocapture` to see
//! every line.

use dyadsim::analysis::{energy_audit, summarize, torque_tracking_error};
use dyadsim::coupling::{
    joint_coupling, render, task_coupling, CouplingConfig, CouplingSpace, RenderLimits,
};
use dyadsim::model::{
    forward_kinematics, gait_reference, swing_jacobian, AgentState, GaitPattern, SegmentParams,
    Support,
};
use dyadsim::presets::preset;
use dyadsim::sim::{run_trial, Scenario};
use dyadsim::types::Side;
use nalgebra::{SVector, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn rand_state(rng: &mut ChaCha8Rng) -> AgentState {
    AgentState {
        phi: rng.random_range(-0.3..0.3),
        q: Vector4::from_fn(|_, _| rng.random_range(-1.0..1.5)),
        qdot: Vector4::from_fn(|_, _| rng.random_range(-5.0..5.0)),
        phase: rng.random_range(0.0..1.0),
        support: Support::Double,
    }
}

fn rand_gen(rng: &mut ChaCha8Rng) -> SVector<f64, 5> {
    SVector::<f64, 5>::new(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..1.5),
        rng.random_range(0.05..2.0),
        rng.random_range(-0.5..1.5),
        rng.random_range(0.05..2.0),
    )
}

#[test]
fn c01_joint_coupling_matches_the_hand_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = CouplingConfig {
        k_joint: [70.0, 55.0, 70.0, 55.0],
        c_joint: [10.0, 7.0, 10.0, 7.0],
        q0: [0.1, -0.2, 0.0, 0.3],
        ..CouplingConfig::default()
    };
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = rand_state(&mut rng);
        let b = rand_state(&mut rng);
        let (ta, tb) = joint_coupling(&a, &b, &cfg).unwrap();
        for j in 0..4 {
            let raw = cfg.k_joint[j] * (a.q[j] - b.q[j] - cfg.q0[j])
                + cfg.c_joint[j] * (a.qdot[j] - b.qdot[j]);
            worst = worst.max((ta[j] - (-raw)).abs()).max((tb[j] - raw).abs());
            assert_eq!(ta[j], -tb[j], "C1 coupling-oracle: FAIL torques not equal-and-opposite");
        }
    }
    let dt = start.elapsed();
    assert!(worst <= 1e-12, "C1 coupling-oracle: FAIL max error {worst:.3e}");
    assert!(dt.as_secs_f64() < 1.0, "C1 coupling-oracle: FAIL took {dt:?}");
    println!("C1 coupling-oracle: PASS max|err|={worst:.2e} over 1000 pairs ({dt:?})");
}

#[test]
fn c02_jacobian_matches_finite_differences() {
    let start = Instant::now();
    let segs = SegmentParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for n in 0..100 {
        let gen = rand_gen(&mut rng);
        let swing = if n % 2 == 0 { Side::Left } else { Side::Right };
        let j = swing_jacobian(&gen, swing, &segs).unwrap();
        for c in 0..5 {
            let mut gp = gen;
            let mut gm = gen;
            gp[c] += h;
            gm[c] -= h;
            let rp = forward_kinematics(&gp, swing, &segs).unwrap();
            let rm = forward_kinematics(&gm, swing, &segs).unwrap();
            for i in 0..2 {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                let rel = (fd - j[(i, c)]).abs() / j[(i, c)].abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    let dt = start.elapsed();
    assert!(worst <= 1e-6, "C2 jacobian-fd: FAIL max rel error {worst:.3e}");
    assert!(dt.as_secs_f64() < 1.0, "C2 jacobian-fd: FAIL took {dt:?}");
    println!("C2 jacobian-fd: PASS max rel err={worst:.2e} over 100 configs ({dt:?})");
}

#[test]
fn c03_task_coupling_matches_independent_transpose() {
    let start = Instant::now();
    let segs = SegmentParams::default();
    let cfg = CouplingConfig {
        space: CouplingSpace::Task,
        k_task: [180.0, 250.0],
        c_task: [30.0, 50.0],
        r0: [0.02, -0.01],
        ..CouplingConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for n in 0..100 {
        let a = rand_state(&mut rng);
        let b = rand_state(&mut rng);
        let stance = if n % 2 == 0 {
            [Side::Right, Side::Left]
        } else {
            [Side::Left, Side::Right]
        };
        let out = task_coupling(&a, &b, Some(stance), &cfg, &segs, &segs).unwrap();
        assert_eq!(
            out.force_a, -out.force_b,
            "C3 task-coupling: FAIL forces not equal-and-opposite"
        );

        let swing = [stance[0].other(), stance[1].other()];
        let ra = forward_kinematics(&a.gen(), swing[0], &segs).unwrap();
        let rb = forward_kinematics(&b.gen(), swing[1], &segs).unwrap();
        let ja = swing_jacobian(&a.gen(), swing[0], &segs).unwrap();
        let jb = swing_jacobian(&b.gen(), swing[1], &segs).unwrap();
        let (ga, gb) = (a.gen_dot(), b.gen_dot());
        let mut f = [0.0f64; 2];
        for i in 0..2 {
            let mut rda = 0.0;
            let mut rdb = 0.0;
            for c in 0..5 {
                rda += ja[(i, c)] * ga[c];
                rdb += jb[(i, c)] * gb[c];
            }
            f[i] = cfg.k_task[i] * (ra[i] - rb[i] - cfg.r0[i]) + cfg.c_task[i] * (rda - rdb);
        }
        for c in 0..5 {
            let mut ta = 0.0;
            let mut tb = 0.0;
            for i in 0..2 {
                ta += ja[(i, c)] * (-f[i]);
                tb += jb[(i, c)] * f[i];
            }
            worst = worst
                .max((out.tau_a[c] - ta).abs())
                .max((out.tau_b[c] - tb).abs());
        }
    }
    let dt = start.elapsed();
    assert!(worst <= 1e-12, "C3 task-coupling: FAIL max error {worst:.3e}");
    assert!(dt.as_secs_f64() < 1.0, "C3 task-coupling: FAIL took {dt:?}");
    println!("C3 task-coupling: PASS max|err|={worst:.2e} over 100 pairs ({dt:?})");
}

#[test]
fn c04_static_spring_settles_at_the_closed_form() {
    let start = Instant::now();
    let mut s = Scenario::default();
    s.label = "static-settle".to_string();
    s.duration = 8.0;
    s.limits.lag_tau = 0.0;
    for agent in &mut s.agents {
        agent.gait.rom_scale = [0.0; 4];
    }
    s.coupling.k_joint = [100.0, 0.0, 0.0, 0.0];
    s.coupling.q0 = [0.5, 0.0, 0.0, 0.0];
    let log = run_trial(&s).unwrap();
    let last = log.records.last().unwrap();
    let d = last.states[0].q[0] - last.states[1].q[0];

    let sigma = 1.0 / 100.0 + 1.0 / 100.0;
    let cf = 0.5 * (100.0 * sigma) / (1.0 + 100.0 * sigma);
    let rel = (d - cf).abs() / cf;
    let dt = start.elapsed();
    assert!(rel < 0.01, "C4 static-settle: FAIL settled {d:.6} vs {cf:.6} (rel {rel:.2e})");
    assert!(dt.as_secs_f64() < 5.0, "C4 static-settle: FAIL took {dt:?}");
    println!("C4 static-settle: PASS settled {d:.6} vs closed form {cf:.6}, rel {rel:.2e} ({dt:?})");
}

#[test]
fn c05_coordination_improves_with_stiffness() {
    let mut vals = Vec::new();
    for name in ["nc", "soft", "hard"] {
        let log = run_trial(&preset(name).unwrap()).unwrap();
        let d = summarize(&log).mean_abs_diff.expect("cycles");
        vals.push((d.hip_deg, d.knee_deg));
    }
    let (nc, soft, hard) = (vals[0], vals[1], vals[2]);
    assert!(
        nc.0 > soft.0 && soft.0 > hard.0,
        "C5 ordering: FAIL hip {:.2}/{:.2}/{:.2}",
        nc.0,
        soft.0,
        hard.0
    );
    assert!(
        nc.1 > soft.1 && soft.1 > hard.1,
        "C5 ordering: FAIL knee {:.2}/{:.2}/{:.2}",
        nc.1,
        soft.1,
        hard.1
    );
    println!(
        "C5 ordering: PASS hip {:.2}>{:.2}>{:.2} knee {:.2}>{:.2}>{:.2} deg",
        nc.0, soft.0, hard.0, nc.1, soft.1, hard.1
    );
}

#[test]
fn c06_neutral_offsets_open_controlled_gaps() {
    let nc = summarize(&run_trial(&preset("nc").unwrap()).unwrap())
        .mean_abs_diff
        .expect("cycles");
    let sigma = 2.0 / 100.0;
    let center = |q0_deg: f64| q0_deg * (70.0 * sigma) / (1.0 + 70.0 * sigma);

    let d30 = summarize(&run_trial(&preset("hard-hip30").unwrap()).unwrap())
        .mean_abs_diff
        .expect("cycles");
    let c30 = center(30.0);
    assert!(
        d30.hip_deg >= 0.8 * c30 && d30.hip_deg <= 1.2 * c30,
        "C6 hip30: FAIL hip gap {:.2} outside [{:.2},{:.2}]",
        d30.hip_deg,
        0.8 * c30,
        1.2 * c30
    );
    assert!(
        d30.knee_deg < nc.knee_deg,
        "C6 hip30: FAIL knee {:.2} not under uncoupled {:.2}",
        d30.knee_deg,
        nc.knee_deg
    );
    println!(
        "C6 hip30: PASS hip {:.2} in [{:.2},{:.2}], knee {:.2} < {:.2}",
        d30.hip_deg,
        0.8 * c30,
        1.2 * c30,
        d30.knee_deg,
        nc.knee_deg
    );

    let d20 = summarize(&run_trial(&preset("hard-knee20").unwrap()).unwrap())
        .mean_abs_diff
        .expect("cycles");
    let c20 = center(20.0);
    assert!(
        d20.knee_deg >= 0.8 * c20 && d20.knee_deg <= 1.2 * c20,
        "C6 knee20: FAIL knee gap {:.2} outside [{:.2},{:.2}]",
        d20.knee_deg,
        0.8 * c20,
        1.2 * c20
    );
    assert!(
        d20.hip_deg < nc.hip_deg,
        "C6 knee20: FAIL hip {:.2} not under uncoupled {:.2}",
        d20.hip_deg,
        nc.hip_deg
    );
    println!(
        "C6 knee20: PASS knee {:.2} in [{:.2},{:.2}], hip {:.2} < {:.2}",
        d20.knee_deg,
        0.8 * c20,
        1.2 * c20,
        d20.hip_deg,
        nc.hip_deg
    );
}

#[test]
fn c07_entrainment_locks_mismatched_cadences() {
    let mut s = preset("nc").unwrap();
    s.agents[0].gait.cadence = 0.9;
    s.agents[1].gait.cadence = 1.0;
    let sum = summarize(&run_trial(&s).unwrap());
    let span = sum.drift_span.expect("strikes");
    assert!(
        (5.5..=6.5).contains(&span),
        "C7 drift: FAIL uncoupled span {span:.2} outside [5.5,6.5]"
    );
    assert_eq!(sum.sync_bounded, Some(false), "C7 drift: FAIL uncoupled yet bounded");

    let mut s = preset("hard").unwrap();
    s.agents[0].gait.cadence = 0.9;
    s.agents[1].gait.cadence = 1.0;
    let sum = summarize(&run_trial(&s).unwrap());
    assert_eq!(
        sum.sync_bounded,
        Some(true),
        "C7 drift: FAIL coupled pair did not lock (span {:?})",
        sum.drift_span
    );
    println!(
        "C7 drift: PASS uncoupled span {span:.2} in [5.5,6.5]; coupled locked (span {:.4})",
        sum.drift_span.unwrap()
    );
}

#[test]
fn c08_unidirectional_coupling_transfers_asymmetry() {
    let log = run_trial(&preset("uni-joint").unwrap()).unwrap();
    let mut max_a = 0.0f64;
    for rec in &log.records {
        let a = rec.torques[0].tau_applied.actuated();
        for j in 0..4 {
            max_a = max_a.max(a[j].abs());
        }
    }
    assert_eq!(max_a, 0.0, "C8 transfer: FAIL leader felt {max_a:.2e} Nm");

    let sum = summarize(&log);
    let (_, knee_a) = sum.peak_asym[0].expect("leader cycles");
    let (_, knee_b) = sum.peak_asym[1].expect("follower cycles");
    let ratio = knee_b / knee_a;
    assert!(
        ratio > 0.5,
        "C8 transfer: FAIL knee asym leader {knee_a:.2} follower {knee_b:.2} ratio {ratio:.3}"
    );
    println!(
        "C8 transfer: PASS leader torque 0 exactly; knee asym {knee_a:.2} -> {knee_b:.2} deg \
         (ratio {ratio:.3})"
    );
}

/// Follower equilibrium pose under a constant vertical ankle force, solved
/// by relaxed fixed-point iteration on the torque balance.
fn static_solve(kp: f64, k_y: f64, rise: f64) -> (f64, f64) {
    let segs = SegmentParams::default();
    let pattern = GaitPattern {
        rom_scale: [0.0; 4],
        ..GaitPattern::default()
    };
    let (qoff, _) = gait_reference(0.0, &pattern);
    let gen = |q: &Vector4<f64>| SVector::<f64, 5>::new(0.0, q[0], q[1], q[2], q[3]);
    let r0 = forward_kinematics(&gen(&qoff), Side::Left, &segs).unwrap();
    let y_target = r0.y + rise;

    let mut q = qoff;
    for _ in 0..4000 {
        let r = forward_kinematics(&gen(&q), Side::Left, &segs).unwrap();
        let j = swing_jacobian(&gen(&q), Side::Left, &segs).unwrap();
        let f = k_y * (y_target - r.y);
        let mut q_new = qoff;
        for c in 0..4 {
            q_new[c] += j[(1, 1 + c)] * f / kp;
        }
        q += 0.2 * (q_new - q);
    }
    let r = forward_kinematics(&gen(&q), Side::Left, &segs).unwrap();
    let d = r.y - r0.y;
    let keff = k_y * (rise - d) / d;
    (d, keff)
}

#[test]
fn c09_static_task_coupling_splits_the_reach() {
    let s = preset("uni-task-static").unwrap();
    let log = run_trial(&s).unwrap();
    let n = log.len();
    let tail = &log.records[n - 333..];
    let y0 = log.records[0].r[1].y;
    let mean_y: f64 = tail.iter().map(|r| r.r[1].y).sum::<f64>() / tail.len() as f64;
    let frac = (mean_y - y0) / 0.40;

    let (_, keff) = static_solve(25.0, 250.0, 0.40);
    let cf = 250.0 / (250.0 + keff);
    let rel = (frac - cf).abs() / cf;
    assert!(
        rel < 0.05,
        "C9 task-static: FAIL measured {frac:.3} vs predicted {cf:.3} (rel {rel:.4})"
    );
    assert!(
        (0.6..=0.9).contains(&frac),
        "C9 task-static: FAIL fraction {frac:.3} outside [0.6,0.9]"
    );
    println!(
        "C9 task-static: PASS follower rise fraction {frac:.3} vs predicted {cf:.3} \
         (rel {:.3}%)",
        100.0 * rel
    );
}

#[test]
fn c10_rendering_lag_matches_the_filter_response() {
    let dt = 0.003;
    let lag = 0.05;
    let f = 1.0;
    let limits = RenderLimits {
        tau_max: 1e9,
        qdot_max: 1e9,
        p_max: 1e18,
        lag_tau: lag,
    };
    let still = AgentState {
        phi: 0.0,
        q: Vector4::zeros(),
        qdot: Vector4::zeros(),
        phase: 0.0,
        support: Support::Double,
    };
    let n = (12.0 / dt) as usize;
    let skip = (2.0 / dt) as usize;
    let mut prev = Vector4::zeros();
    let mut sq = 0.0;
    let mut cnt = 0usize;
    for t in 0..n {
        let des = Vector4::new((2.0 * std::f64::consts::PI * f * t as f64 * dt).sin(), 0.0, 0.0, 0.0);
        prev = render(&des, &still, &limits, &prev, dt).unwrap();
        if t >= skip {
            sq += (prev[0] - des[0]).powi(2);
            cnt += 1;
        }
    }
    let meas = (sq / cnt as f64).sqrt();

    let a = dt / (lag + dt);
    let th = 2.0 * std::f64::consts::PI * f * dt;
    let num = (1.0 - a) * 2.0 * (th / 2.0).sin().abs();
    let den = (1.0 - 2.0 * (1.0 - a) * th.cos() + (1.0 - a) * (1.0 - a)).sqrt();
    let cf = num / den / 2.0f64.sqrt();
    let rel = (meas - cf).abs() / cf;
    assert!(
        rel < 0.02,
        "C10 lag-rms: FAIL measured {meas:.6} vs closed form {cf:.6} (rel {rel:.4})"
    );

    // with the lag off, a soft walking trial renders its torques exactly
    let mut s = preset("soft").unwrap();
    s.duration = 5.0;
    s.limits.lag_tau = 0.0;
    let log = run_trial(&s).unwrap();
    let track = torque_tracking_error(&log);
    for u in 0..2 {
        assert_eq!(
            track.per_user[u].rms, 0.0,
            "C10 lag-rms: FAIL zero-lag tracking error not exactly zero"
        );
    }
    println!(
        "C10 lag-rms: PASS 1 Hz error rms {meas:.6} vs {cf:.6} (rel {:.3}%); zero-lag rms = 0",
        100.0 * rel
    );
}

#[test]
fn c11_trials_are_deterministic_and_conservative() {
    let mut s = preset("hard").unwrap();
    s.duration = 10.0;
    s.phase_jitter = 0.02;
    s.sensor_noise = 0.005;
    s.seed = 2024;
    let a = run_trial(&s).unwrap();
    let b = run_trial(&s).unwrap();
    assert_eq!(a, b, "C11 determinism: FAIL repeated trials differ");

    let mut s = preset("hard").unwrap();
    s.duration = 10.0;
    s.limits.lag_tau = 0.0;
    let log = run_trial(&s).unwrap();
    let audit = energy_audit(&log).unwrap();
    assert!(
        audit.relative < 1e-3,
        "C11 energy: FAIL relative residual {:.2e}",
        audit.relative
    );
    println!(
        "C11 determinism+energy: PASS logs bit-identical; energy residual rel {:.2e}",
        audit.relative
    );
}

#[test]
fn c12_a_full_trial_runs_fast_enough() {
    let s = preset("hard").unwrap();
    let start = Instant::now();
    let log = run_trial(&s).unwrap();
    let wall = start.elapsed();
    assert_eq!(log.len(), 20000);
    assert!(
        wall.as_secs_f64() < 5.0,
        "C12 performance: FAIL 60 s trial took {wall:?}"
    );
    println!(
        "C12 performance: PASS 60 s trial ({} ticks) in {wall:?}",
        log.len()
    );
}
