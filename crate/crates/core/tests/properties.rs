//! Property tests for invariants that should hold on any input.

use dyadsim::coupling::{joint_coupling, render, CouplingConfig, RenderLimits};
use dyadsim::model::{
    agent_step, designated_stance, forward_kinematics, gait_reference, support_from_phase,
    swing_jacobian, AgentState, GaitPattern, ImpedanceParams, SegmentParams, Support,
};
use dyadsim::sim::smoothstep;
use dyadsim::types::Side;
use nalgebra::{SVector, Vector4};
use proptest::prelude::*;

fn gen_vec() -> impl Strategy<Value = SVector<f64, 5>> {
    (
        -0.5..0.5f64,
        -0.5..1.5f64,
        0.05..2.0f64,
        -0.5..1.5f64,
        0.05..2.0f64,
    )
        .prop_map(|(phi, h1, k1, h2, k2)| SVector::<f64, 5>::new(phi, h1, k1, h2, k2))
}

fn state_strategy() -> impl Strategy<Value = AgentState> {
    (
        proptest::array::uniform4(-1.0..1.5f64),
        proptest::array::uniform4(-5.0..5.0f64),
        -0.3..0.3f64,
    )
        .prop_map(|(q, qdot, phi)| AgentState {
            phi,
            q: Vector4::from(q),
            qdot: Vector4::from(qdot),
            phase: 0.0,
            support: Support::Double,
        })
}

proptest! {
    #[test]
    fn jacobian_agrees_with_finite_differences(gen in gen_vec(), swing_right in any::<bool>()) {
        let segs = SegmentParams::default();
        let swing = if swing_right { Side::Right } else { Side::Left };
        let j = swing_jacobian(&gen, swing, &segs).unwrap();
        let h = 1e-6;
        for c in 0..5 {
            let mut gp = gen;
            let mut gm = gen;
            gp[c] += h;
            gm[c] -= h;
            let rp = forward_kinematics(&gp, swing, &segs).unwrap();
            let rm = forward_kinematics(&gm, swing, &segs).unwrap();
            for i in 0..2 {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                let scale = j[(i, c)].abs().max(1.0);
                prop_assert!(
                    (fd - j[(i, c)]).abs() <= 1e-6 * scale,
                    "entry ({i},{c}): fd {fd} vs {}", j[(i, c)]
                );
            }
        }
    }

    #[test]
    fn equal_leg_angles_close_the_kinematic_loop(
        phi in -0.4..0.4f64,
        hip in -0.5..1.5f64,
        knee in 0.0..2.0f64,
    ) {
        let segs = SegmentParams::default();
        let gen = SVector::<f64, 5>::new(phi, hip, knee, hip, knee);
        for side in Side::BOTH {
            let r = forward_kinematics(&gen, side, &segs).unwrap();
            prop_assert!(r.norm() < 1e-12, "{side}: {r}");
        }
    }

    #[test]
    fn swapping_legs_mirrors_the_kinematics_bit_for_bit(gen in gen_vec()) {
        let segs = SegmentParams::default();
        let swapped = SVector::<f64, 5>::new(gen[0], gen[3], gen[4], gen[1], gen[2]);
        let r1 = forward_kinematics(&gen, Side::Left, &segs).unwrap();
        let r2 = forward_kinematics(&swapped, Side::Right, &segs).unwrap();
        prop_assert_eq!(r1, r2);
        let j1 = swing_jacobian(&gen, Side::Left, &segs).unwrap();
        let j2 = swing_jacobian(&swapped, Side::Right, &segs).unwrap();
        for i in 0..2 {
            prop_assert_eq!(j1[(i, 0)], j2[(i, 0)]);
            for c in 0..2 {
                prop_assert_eq!(j1[(i, 1 + c)], j2[(i, 3 + c)]);
                prop_assert_eq!(j1[(i, 3 + c)], j2[(i, 1 + c)]);
            }
        }
    }

    #[test]
    fn coupling_torques_are_equal_and_opposite(
        a in state_strategy(),
        b in state_strategy(),
        k in proptest::array::uniform4(0.0..200.0f64),
        c in proptest::array::uniform4(0.0..30.0f64),
    ) {
        let cfg = CouplingConfig { k_joint: k, c_joint: c, ..CouplingConfig::default() };
        let (ta, tb) = joint_coupling(&a, &b, &cfg).unwrap();
        for j in 0..4 {
            prop_assert_eq!(ta[j], -tb[j]);
        }
    }

    #[test]
    fn doubling_the_gains_exactly_doubles_the_torque(
        a in state_strategy(),
        b in state_strategy(),
        k in proptest::array::uniform4(0.0..200.0f64),
        c in proptest::array::uniform4(0.0..30.0f64),
        q0 in proptest::array::uniform4(-0.5..0.5f64),
    ) {
        let cfg = CouplingConfig { k_joint: k, c_joint: c, q0, ..CouplingConfig::default() };
        let cfg2 = CouplingConfig {
            k_joint: k.map(|v| 2.0 * v),
            c_joint: c.map(|v| 2.0 * v),
            q0,
            ..CouplingConfig::default()
        };
        let (ta, _) = joint_coupling(&a, &b, &cfg).unwrap();
        let (ta2, _) = joint_coupling(&a, &b, &cfg2).unwrap();
        for j in 0..4 {
            prop_assert_eq!(ta2[j], 2.0 * ta[j]);
        }
    }

    #[test]
    fn rendering_never_amplifies_or_flips_sign(
        des in proptest::array::uniform4(-200.0..200.0f64),
        qdot in proptest::array::uniform4(-20.0..20.0f64),
    ) {
        let limits = RenderLimits { lag_tau: 0.0, ..RenderLimits::default() };
        let s = AgentState {
            phi: 0.0,
            q: Vector4::zeros(),
            qdot: Vector4::from(qdot),
            phase: 0.0,
            support: Support::Double,
        };
        let des = Vector4::from(des);
        let out = render(&des, &s, &limits, &Vector4::zeros(), 0.003).unwrap();
        for j in 0..4 {
            prop_assert!(out[j].abs() <= des[j].abs());
            prop_assert!(out[j] * des[j] >= 0.0, "sign flip: {} -> {}", des[j], out[j]);
        }
    }

    #[test]
    fn rendering_is_idempotent_at_zero_lag(
        des in proptest::array::uniform4(-200.0..200.0f64),
        qdot in proptest::array::uniform4(-20.0..20.0f64),
    ) {
        let limits = RenderLimits { lag_tau: 0.0, ..RenderLimits::default() };
        let s = AgentState {
            phi: 0.0,
            q: Vector4::zeros(),
            qdot: Vector4::from(qdot),
            phase: 0.0,
            support: Support::Double,
        };
        let once = render(&Vector4::from(des), &s, &limits, &Vector4::zeros(), 0.003).unwrap();
        let twice = render(&once, &s, &limits, &Vector4::zeros(), 0.003).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn the_reference_is_periodic_in_phase(
        phase in 0.0..1.0f64,
        rom in proptest::array::uniform4(0.0..1.28f64),
    ) {
        let pattern = GaitPattern { rom_scale: rom, ..GaitPattern::default() };
        let (q1, qd1) = gait_reference(phase, &pattern);
        let (q2, qd2) = gait_reference(phase + 1.0, &pattern);
        for j in 0..4 {
            prop_assert!((q1[j] - q2[j]).abs() < 1e-9);
            prop_assert!((qd1[j] - qd2[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn the_knee_reference_never_goes_negative(
        phase in 0.0..1.0f64,
        rom in proptest::array::uniform4(0.0..1.28f64),
    ) {
        let pattern = GaitPattern { rom_scale: rom, ..GaitPattern::default() };
        let (q, _) = gait_reference(phase, &pattern);
        for j in [1usize, 3] {
            prop_assert!(q[j] >= 0.0, "knee {j} at {}", q[j]);
            let amp = pattern.knee.amplitude * rom[j];
            prop_assert!(q[j] <= pattern.knee.offset + amp + 1e-12);
        }
    }

    #[test]
    fn stance_windows_agree_with_the_designated_leg(phase in 0.0..1.0f64) {
        let support = support_from_phase(phase, 0.5);
        let designated = designated_stance(phase);
        match support {
            Support::LeftStance => prop_assert_eq!(designated, Side::Left),
            Support::RightStance => prop_assert_eq!(designated, Side::Right),
            Support::Double => {}
        }
    }

    #[test]
    fn stepping_respects_the_joint_limits(
        q in proptest::array::uniform4(0.0..1.0f64),
        qdot in proptest::array::uniform4(-8.0..8.0f64),
        tau in proptest::array::uniform4(-80.0..80.0f64),
        phase in 0.0..1.0f64,
    ) {
        let pattern = GaitPattern::default();
        let imp = ImpedanceParams::default();
        let s = AgentState {
            phi: 0.0,
            q: Vector4::from(q),
            qdot: Vector4::from(qdot),
            phase,
            support: support_from_phase(phase, pattern.phase_offset_right),
        };
        let next = agent_step(&s, &Vector4::from(tau), &pattern, &imp, 0.003).unwrap();
        for j in 0..4 {
            prop_assert!(next.q[j] >= imp.q_min[j] && next.q[j] <= imp.q_max[j]);
            prop_assert!(next.qdot[j].is_finite());
        }
    }

    #[test]
    fn the_phase_rate_stays_inside_the_entrainment_envelope(
        q in proptest::array::uniform4(0.0..1.0f64),
        qdot in proptest::array::uniform4(-5.0..5.0f64),
        tau in proptest::array::uniform4(-40.0..40.0f64),
        phase in 0.0..1.0f64,
        gain in 0.0..0.5f64,
    ) {
        let pattern = GaitPattern { entrain_gain: gain, ..GaitPattern::default() };
        let imp = ImpedanceParams::default();
        let s = AgentState {
            phi: 0.0,
            q: Vector4::from(q),
            qdot: Vector4::from(qdot),
            phase,
            support: Support::Double,
        };
        let next = agent_step(&s, &Vector4::from(tau), &pattern, &imp, 0.003).unwrap();
        // the stored phase wraps to [0, 1)
        let advance = (next.phase - phase).rem_euclid(1.0);
        let nominal = pattern.cadence * 0.003;
        prop_assert!(advance >= nominal * (1.0 - gain) - 1e-15);
        prop_assert!(advance <= nominal * (1.0 + gain) + 1e-15);
    }

    #[test]
    fn smoothstep_stays_in_the_unit_box_and_is_monotone(
        x in -2.0..3.0f64,
        y in -2.0..3.0f64,
    ) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let (a, b) = (smoothstep(lo), smoothstep(hi));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(a <= b);
    }
}
