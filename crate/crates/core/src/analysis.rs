//! Post-hoc analysis of trial logs: heel-strike detection, gait-cycle
//! normalization, dyad difference and synchronization metrics, torque
//! tracking, and the coupling energy audit.
//!
//! Angles leave this module in degrees, torques in Nm, times in seconds.

use nalgebra::Vector2;

use crate::coupling::CouplingSpace;
use crate::error::{Error, Result};
use crate::model::swing_jacobian;
use crate::sim::TrialLog;
use crate::types::{to_deg, Side, UserId};

/// Ankle height below which a strike fires, meters.
pub const STRIKE_THRESHOLD: f64 = 0.02;
/// Extra height above the threshold required to re-arm the detector.
pub const STRIKE_HYSTERESIS: f64 = 0.005;
/// Default refractory gap between accepted strikes, seconds.
pub const STRIKE_MIN_GAP: f64 = 0.3;
/// Leading gait cycles excluded from every cycle-based metric.
pub const EXCLUDED_CYCLES: usize = 2;
/// Samples per normalized gait cycle (0..=100 percent).
pub const CYCLE_POINTS: usize = 101;
/// Bins of the per-phase torque tracking profile.
pub const PHASE_BINS: usize = 10;

/// Detected strike ticks of one user, per leg.
#[derive(Clone, Debug, PartialEq)]
pub struct StrikeTrain {
    pub user: UserId,
    /// Strike tick indices, `[left, right]`, ascending.
    pub ticks: [Vec<usize>; 2],
    pub dt: f64,
}

impl StrikeTrain {
    /// Strike times of one leg, seconds.
    pub fn times(&self, side: Side) -> Vec<f64> {
        self.ticks[side.index()]
            .iter()
            .map(|&t| t as f64 * self.dt)
            .collect()
    }
}

/// Height of one leg's ankle above the ground: zero while it is the stance
/// leg (it is the frame origin), the swing-ankle height otherwise.
fn leg_height(log: &TrialLog, user: usize, side: Side, tick: usize) -> f64 {
    let rec = &log.records[tick];
    if rec.stance[user] == side {
        0.0
    } else {
        rec.r[user].y
    }
}

/// Detect heel strikes of both legs of one user.
///
/// A strike is a downward crossing of the leg's ankle height below
/// `threshold`; the detector re-arms only once the height has risen above
/// `threshold + STRIKE_HYSTERESIS`, and strikes closer than `min_gap`
/// seconds to the last accepted one are discarded (the crossing still
/// consumes the arming). Errors if either leg ends up with fewer than 3
/// strikes.
pub fn detect_heel_strikes(
    log: &TrialLog,
    user: UserId,
    min_gap: f64,
    threshold: f64,
) -> Result<StrikeTrain> {
    if !(min_gap >= 0.0) || !(threshold > 0.0) {
        return Err(Error::NotPositive {
            what: "strike detection parameters",
            value: threshold.min(min_gap),
        });
    }
    let dt = log.dt();
    let gap = (min_gap / dt).round() as i64;
    let u = user.index();

    let mut ticks: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for side in Side::BOTH {
        let out = &mut ticks[side.index()];
        let mut armed = false;
        let mut last: i64 = -gap;
        for i in 0..log.records.len() {
            let h = leg_height(log, u, side, i);
            if h > threshold + STRIKE_HYSTERESIS {
                armed = true;
            } else if armed && h < threshold {
                armed = false;
                if i as i64 - last >= gap {
                    out.push(i);
                    last = i as i64;
                }
            }
        }
    }

    for side in Side::BOTH {
        let n = ticks[side.index()].len();
        if n < 3 {
            return Err(Error::InsufficientCycles(format!(
                "user {user} {side} leg produced {n} heel strikes; at least 3 are needed"
            )));
        }
    }
    Ok(StrikeTrain { user, ticks, dt })
}

/// One gait cycle resampled to [`CYCLE_POINTS`] samples, degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleCurves {
    pub hip: Vec<f64>,
    pub knee: Vec<f64>,
}

/// All usable cycles of one user, per leg.
#[derive(Clone, Debug, PartialEq)]
pub struct GaitCycles {
    /// Whose joint angles these are.
    pub user: UserId,
    /// Whose strikes delimited the cycles (pairing both users on one user's
    /// strikes keeps cycle counts equal and comparisons aligned in time).
    pub strike_user: UserId,
    /// Cycles per leg, `[left, right]`.
    pub per_side: [Vec<CycleCurves>; 2],
}

fn lerp_series(get: impl Fn(usize) -> f64, pos: f64) -> f64 {
    let lo = pos.floor();
    let frac = pos - lo;
    let lo = lo as usize;
    if frac == 0.0 {
        get(lo)
    } else {
        let a = get(lo);
        let b = get(lo + 1);
        a + (b - a) * frac
    }
}

/// Slice one user's joint trajectories into time-normalized cycles using a
/// strike train (theirs, or a reference user's — see
/// [`GaitCycles::strike_user`]).
///
/// The first [`EXCLUDED_CYCLES`] cycles of each leg are dropped. Each
/// remaining strike-to-strike span is resampled to [`CYCLE_POINTS`] points
/// by linear interpolation; the endpoints land exactly on the raw samples
/// at the strikes.
pub fn normalize_cycles(
    log: &TrialLog,
    strikes: &StrikeTrain,
    user: UserId,
) -> Result<GaitCycles> {
    let u = user.index();
    let mut per_side: [Vec<CycleCurves>; 2] = [Vec::new(), Vec::new()];

    for side in Side::BOTH {
        let ticks = &strikes.ticks[side.index()];
        let hip_j = side.hip();
        let knee_j = side.knee();
        let cycles = &mut per_side[side.index()];
        if ticks.len() > EXCLUDED_CYCLES + 1 {
            for w in ticks[EXCLUDED_CYCLES..].windows(2) {
                let (a, b) = (w[0], w[1]);
                let mut hip = Vec::with_capacity(CYCLE_POINTS);
                let mut knee = Vec::with_capacity(CYCLE_POINTS);
                for i in 0..CYCLE_POINTS {
                    let pos = a as f64 + (b - a) as f64 * i as f64 / (CYCLE_POINTS - 1) as f64;
                    hip.push(to_deg(lerp_series(
                        |t| log.records[t].states[u].q[hip_j],
                        pos,
                    )));
                    knee.push(to_deg(lerp_series(
                        |t| log.records[t].states[u].q[knee_j],
                        pos,
                    )));
                }
                cycles.push(CycleCurves { hip, knee });
            }
        }
        if cycles.is_empty() {
            return Err(Error::InsufficientCycles(format!(
                "user {user} {side} leg has no usable cycles after excluding the first \
                 {EXCLUDED_CYCLES}"
            )));
        }
    }

    Ok(GaitCycles {
        user,
        strike_user: strikes.user,
        per_side,
    })
}

/// Mean absolute joint-angle difference between two users, degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointDiff {
    pub hip_deg: f64,
    pub knee_deg: f64,
    /// Same metric split per leg, `[left, right]`.
    pub per_leg: [LegDiff; 2],
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LegDiff {
    pub hip_deg: f64,
    pub knee_deg: f64,
}

/// Pointwise mean absolute difference between paired cycles (cycle k of one
/// user against cycle k of the other, per leg), averaged over points,
/// cycles, and legs, reported per joint type in degrees.
///
/// Errors unless both sides pair up with equal cycle counts — slice both
/// users with the same reference strike train to guarantee that.
pub fn mean_abs_diff(a: &GaitCycles, b: &GaitCycles) -> Result<JointDiff> {
    let mut per_leg = [LegDiff::default(); 2];
    let mut hip_sum = 0.0;
    let mut knee_sum = 0.0;
    let mut n_total = 0usize;

    for side in Side::BOTH {
        let ca = &a.per_side[side.index()];
        let cb = &b.per_side[side.index()];
        if ca.len() != cb.len() {
            return Err(Error::CycleMismatch {
                a: ca.len(),
                b: cb.len(),
            });
        }
        let mut hip = 0.0;
        let mut knee = 0.0;
        let mut n = 0usize;
        for (x, y) in ca.iter().zip(cb) {
            for i in 0..CYCLE_POINTS {
                hip += (x.hip[i] - y.hip[i]).abs();
                knee += (x.knee[i] - y.knee[i]).abs();
            }
            n += CYCLE_POINTS;
        }
        per_leg[side.index()] = LegDiff {
            hip_deg: hip / n as f64,
            knee_deg: knee / n as f64,
        };
        hip_sum += hip;
        knee_sum += knee;
        n_total += n;
    }

    Ok(JointDiff {
        hip_deg: hip_sum / n_total as f64,
        knee_deg: knee_sum / n_total as f64,
        per_leg,
    })
}

/// Pointwise mean and sample standard deviation across cycles, degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointBands {
    pub hip: Band,
    pub knee: Band,
}

/// Mean +- std bands of one user's cycles, per leg.
#[derive(Clone, Debug, PartialEq)]
pub struct BandStats {
    pub user: UserId,
    pub per_side: [JointBands; 2],
}

fn band_of(cycles: &[CycleCurves], pick: impl Fn(&CycleCurves) -> &Vec<f64>) -> Band {
    let n = cycles.len();
    let mut mean = vec![0.0; CYCLE_POINTS];
    let mut std = vec![0.0; CYCLE_POINTS];
    for i in 0..CYCLE_POINTS {
        let mut s = 0.0;
        for c in cycles {
            s += pick(c)[i];
        }
        let m = s / n as f64;
        mean[i] = m;
        let mut ss = 0.0;
        for c in cycles {
            let d = pick(c)[i] - m;
            ss += d * d;
        }
        std[i] = (ss / (n - 1) as f64).sqrt();
    }
    Band { mean, std }
}

/// Per-point mean and sample std of each joint curve across cycles.
/// Errors with fewer than 2 cycles on either leg.
pub fn band_stats(cycles: &GaitCycles) -> Result<BandStats> {
    for side in Side::BOTH {
        let n = cycles.per_side[side.index()].len();
        if n < 2 {
            return Err(Error::InsufficientCycles(format!(
                "band statistics need at least 2 cycles on the {side} leg (got {n})"
            )));
        }
    }
    let bands = |side: Side| {
        let c = &cycles.per_side[side.index()];
        JointBands {
            hip: band_of(c, |c| &c.hip),
            knee: band_of(c, |c| &c.knee),
        }
    };
    Ok(BandStats {
        user: cycles.user,
        per_side: [bands(Side::Left), bands(Side::Right)],
    })
}

/// Torque tracking quality of one user's renderer.
#[derive(Clone, Debug, PartialEq)]
pub struct UserTracking {
    /// RMS of (desired - applied) pooled over the four actuated joints, Nm.
    pub rms: f64,
    /// The same RMS per joint.
    pub per_joint: [f64; 4],
    /// RMS per gait-phase bin (the user's own phase), [`PHASE_BINS`] bins.
    /// Bins no tick landed in report zero.
    pub phase_bins: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorqueTracking {
    pub per_user: [UserTracking; 2],
}

/// RMS difference between desired and applied coupling torques, pooled and
/// binned by gait phase. With zero rendering lag and no limit clipping this
/// is exactly zero.
pub fn torque_tracking_error(log: &TrialLog) -> TorqueTracking {
    let per_user = [0, 1].map(|u| {
        let mut sq = [0.0f64; 4];
        let mut bin_sq = vec![0.0f64; PHASE_BINS];
        let mut bin_n = vec![0usize; PHASE_BINS];
        for rec in &log.records {
            let des = rec.torques[u].tau_des.actuated();
            let app = rec.torques[u].tau_applied.actuated();
            let mut tick_sq = 0.0;
            for j in 0..4 {
                let e = des[j] - app[j];
                sq[j] += e * e;
                tick_sq += e * e;
            }
            let bin = ((rec.states[u].phase.rem_euclid(1.0) * PHASE_BINS as f64) as usize)
                .min(PHASE_BINS - 1);
            bin_sq[bin] += tick_sq;
            bin_n[bin] += 4;
        }
        let n = log.records.len().max(1) as f64;
        let rms = (sq.iter().sum::<f64>() / (4.0 * n)).sqrt();
        let per_joint = sq.map(|s| (s / n).sqrt());
        let phase_bins = bin_sq
            .iter()
            .zip(&bin_n)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { (s / c as f64).sqrt() })
            .collect();
        UserTracking {
            rms,
            per_joint,
            phase_bins,
        }
    });
    TorqueTracking { per_user }
}

/// Relative-phase trajectory of user B's strikes against user A's.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSync {
    /// Unwrapped relative phase at each of A's strikes, cycles.
    pub drift: Vec<f64>,
    /// Total drift magnitude over the trial, cycles.
    pub span: f64,
    /// True when the drift stays within half a cycle of its value at the
    /// first included strike (after excluding [`EXCLUDED_CYCLES`]).
    pub bounded: bool,
}

/// Relative phase between two strike-time sequences (seconds), one leg each.
///
/// At each strike of `a`, the offset to the nearest strike of `b` is divided
/// by `a`'s local period, then unwrapped across strikes so the trajectory is
/// continuous rather than confined to half a cycle.
pub fn phase_sync(a: &[f64], b: &[f64]) -> Result<PhaseSync> {
    if a.len() < 3 || b.len() < 3 {
        return Err(Error::InsufficientCycles(format!(
            "phase sync needs at least 3 strikes per user (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let mut drift = Vec::with_capacity(a.len());
    for (k, &t) in a.iter().enumerate() {
        let mut best = b[0];
        for &tb in b {
            if (tb - t).abs() < (best - t).abs() {
                best = tb;
            }
        }
        let lo = k.saturating_sub(1);
        let hi = (k + 1).min(a.len() - 1);
        let period = (a[hi] - a[lo]) / (hi - lo) as f64;
        drift.push((best - t) / period);
    }
    for i in 1..drift.len() {
        let step = drift[i] - drift[i - 1];
        drift[i] -= step.round();
    }

    let span = (drift[drift.len() - 1] - drift[0]).abs();
    let k0 = EXCLUDED_CYCLES.min(drift.len() - 1);
    let bounded = drift[k0..]
        .iter()
        .all(|d| (d - drift[k0]).abs() < 0.5);

    Ok(PhaseSync {
        drift,
        span,
        bounded,
    })
}

/// Energy bookkeeping of one trial's coupling element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyAudit {
    /// Work the coupling did on each user, J.
    pub work_a: f64,
    pub work_b: f64,
    /// Spring energy change between the first and last record, J.
    pub delta_spring: f64,
    /// Energy dissipated by the coupling damper, J.
    pub dissipated: f64,
    /// `work_a + work_b + delta_spring + dissipated`; zero for a passive
    /// bidirectional element.
    pub residual: f64,
    /// Residual relative to the largest term's magnitude.
    pub relative: f64,
}

/// Audit the coupling element's energy balance over a logged trial.
///
/// Work integrals use the trapezoid rule in displacement, so the balance
/// closes to numerical precision for the semi-implicit integrator as long as
/// the trial is bidirectional with zero latency and no rendering lag or
/// clipping (otherwise the residual measures the injected/absorbed energy).
pub fn energy_audit(log: &TrialLog) -> Result<EnergyAudit> {
    if log.records.len() < 2 {
        return Err(Error::InsufficientCycles(
            "energy audit needs at least two records".to_string(),
        ));
    }
    let cfg = &log.scenario.coupling;

    let (work_a, work_b, delta_spring, dissipated) = match cfg.space {
        CouplingSpace::Joint => {
            let mut wa = 0.0;
            let mut wb = 0.0;
            let mut diss = 0.0;
            for w in log.records.windows(2) {
                let (r0, r1) = (&w[0], &w[1]);
                for j in 0..4 {
                    let ta0 = r0.torques[0].tau_applied.actuated()[j];
                    let ta1 = r1.torques[0].tau_applied.actuated()[j];
                    let tb0 = r0.torques[1].tau_applied.actuated()[j];
                    let tb1 = r1.torques[1].tau_applied.actuated()[j];
                    wa += 0.5 * (ta0 + ta1) * (r1.states[0].q[j] - r0.states[0].q[j]);
                    wb += 0.5 * (tb0 + tb1) * (r1.states[1].q[j] - r0.states[1].q[j]);

                    let dq0 = r0.states[0].q[j] - r0.states[1].q[j];
                    let dq1 = r1.states[0].q[j] - r1.states[1].q[j];
                    let dv0 = r0.states[0].qdot[j] - r0.states[1].qdot[j];
                    let dv1 = r1.states[0].qdot[j] - r1.states[1].qdot[j];
                    diss += 0.5 * cfg.c_joint[j] * (dv0 + dv1) * (dq1 - dq0);
                }
            }
            let spring = |rec: &crate::sim::TickRecord| {
                let mut e = 0.0;
                for j in 0..4 {
                    let x = rec.states[0].q[j] - rec.states[1].q[j] - cfg.q0[j];
                    e += 0.5 * cfg.k_joint[j] * x * x;
                }
                e
            };
            let ds = spring(log.records.last().unwrap()) - spring(&log.records[0]);
            (wa, wb, ds, diss)
        }
        CouplingSpace::Task => {
            // reconstruct the ankle forces and velocities from the logged
            // states (exact as long as the coupling saw undelayed,
            // noise-free states)
            let n = log.records.len();
            let mut f_a = Vec::with_capacity(n);
            let mut dr = Vec::with_capacity(n);
            let mut drdot = Vec::with_capacity(n);
            for rec in &log.records {
                let mut rd = [Vector2::zeros(), Vector2::zeros()];
                for u in 0..2 {
                    let j = swing_jacobian(
                        &rec.states[u].gen(),
                        rec.stance[u].other(),
                        &log.scenario.agents[u].segments,
                    )?;
                    rd[u] = j * rec.states[u].gen_dot();
                }
                let d = rec.r[0] - rec.r[1];
                let dv = rd[0] - rd[1];
                let mut f = Vector2::zeros();
                for i in 0..2 {
                    f[i] = cfg.k_task[i] * (d[i] - cfg.r0[i]) + cfg.c_task[i] * dv[i];
                }
                f_a.push(-f);
                dr.push(d);
                drdot.push(dv);
            }
            let mut wa = 0.0;
            let mut wb = 0.0;
            let mut diss = 0.0;
            for t in 0..n - 1 {
                for i in 0..2 {
                    let fa0 = f_a[t][i];
                    let fa1 = f_a[t + 1][i];
                    wa += 0.5
                        * (fa0 + fa1)
                        * (log.records[t + 1].r[0][i] - log.records[t].r[0][i]);
                    wb += 0.5
                        * (-fa0 - fa1)
                        * (log.records[t + 1].r[1][i] - log.records[t].r[1][i]);
                    diss += 0.5
                        * cfg.c_task[i]
                        * (drdot[t][i] + drdot[t + 1][i])
                        * (dr[t + 1][i] - dr[t][i]);
                }
            }
            let spring = |d: &Vector2<f64>| {
                let mut e = 0.0;
                for i in 0..2 {
                    let x = d[i] - cfg.r0[i];
                    e += 0.5 * cfg.k_task[i] * x * x;
                }
                e
            };
            let ds = spring(&dr[n - 1]) - spring(&dr[0]);
            (wa, wb, ds, diss)
        }
    };

    let residual = work_a + work_b + delta_spring + dissipated;
    let scale = work_a
        .abs()
        .max(work_b.abs())
        .max(delta_spring.abs())
        .max(dissipated.abs());
    let relative = if scale > 0.0 { residual.abs() / scale } else { 0.0 };
    Ok(EnergyAudit {
        work_a,
        work_b,
        delta_spring,
        dissipated,
        residual,
        relative,
    })
}

/// Left-minus-right difference of the mean per-cycle peak, degrees, as
/// `(hip, knee)`.
pub fn peak_asymmetry(cycles: &GaitCycles) -> (f64, f64) {
    let peak = |side: Side, pick: &dyn Fn(&CycleCurves) -> &Vec<f64>| {
        let cs = &cycles.per_side[side.index()];
        let mut s = 0.0;
        for c in cs {
            s += pick(c).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
        s / cs.len() as f64
    };
    let hip = peak(Side::Left, &|c| &c.hip) - peak(Side::Right, &|c| &c.hip);
    let knee = peak(Side::Left, &|c| &c.knee) - peak(Side::Right, &|c| &c.knee);
    (hip, knee)
}

/// Headline metrics of one trial. Metrics that need detectable gait cycles
/// are `None` when the trial has none (for example stationary conditions).
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub condition: String,
    /// Mean absolute joint difference, both users sliced on user A's strikes.
    pub mean_abs_diff: Option<JointDiff>,
    /// Torque tracking RMS per user, Nm.
    pub torque_rms: [f64; 2],
    /// Whether the relative phase stayed bounded (left-leg strikes).
    pub sync_bounded: Option<bool>,
    /// Total relative-phase drift, cycles.
    pub drift_span: Option<f64>,
    /// Per-user (hip, knee) left-right peak asymmetry, degrees, from each
    /// user's own strikes.
    pub peak_asym: [Option<(f64, f64)>; 2],
}

/// Compute every summary metric that applies to a log; never errors.
pub fn summarize(log: &TrialLog) -> TrialSummary {
    let tracking = torque_tracking_error(log);
    let torque_rms = [tracking.per_user[0].rms, tracking.per_user[1].rms];

    let strikes_a = detect_heel_strikes(log, UserId::A, STRIKE_MIN_GAP, STRIKE_THRESHOLD).ok();
    let strikes_b = detect_heel_strikes(log, UserId::B, STRIKE_MIN_GAP, STRIKE_THRESHOLD).ok();

    let mean_abs_diff = strikes_a.as_ref().and_then(|sa| {
        let ca = normalize_cycles(log, sa, UserId::A).ok()?;
        let cb = normalize_cycles(log, sa, UserId::B).ok()?;
        mean_abs_diff(&ca, &cb).ok()
    });

    let sync = match (&strikes_a, &strikes_b) {
        (Some(sa), Some(sb)) => phase_sync(&sa.times(Side::Left), &sb.times(Side::Left)).ok(),
        _ => None,
    };

    let peak_asym = [&strikes_a, &strikes_b].map(|s| {
        let s = s.as_ref()?;
        let cycles = normalize_cycles(log, s, s.user).ok()?;
        Some(peak_asymmetry(&cycles))
    });

    TrialSummary {
        condition: log.scenario.label.clone(),
        mean_abs_diff,
        torque_rms,
        sync_bounded: sync.as_ref().map(|s| s.bounded),
        drift_span: sync.as_ref().map(|s| s.span),
        peak_asym,
    }
}
