//! Steady-state operating points of the closed-loop model by damped Newton
//! iteration on f(x) = 0.
//!
//! Droop modes pin the delivered power to `p_ref` through the droop law, so
//! the plain state equations suffice. GFL has no voltage or power loop; its
//! current references are free knobs, so the solver augments the unknowns
//! with (i_ld_ref, i_lq_ref) and closes them against the power targets
//! p = p_target, q = q_target. Hybrid and GFM modes pass `i_lq_ref` through
//! unchanged.

use crate::error::{Error, Result};
use crate::linalg::lu_solve;
use crate::params::{ControlMode, ControlParams};
use crate::plant::{NonlinearModel, SignalSet, LABEL_DELTA, LABEL_P_F, LABEL_XI_ID, LABEL_XI_IQ, LABEL_XI_VD, LABEL_XI_VQ};
use crate::smallsignal::jacobian_fd;
use crate::Real;

/// Operating-point targets used to close free references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingTarget<T> {
    /// Active power target (W). Used directly by the GFL closure; droop
    /// modes reach their `p_ref` on their own.
    pub p_target: T,
    /// Reactive power target (var); GFL closure only.
    pub q_target: T,
}

impl<T: Real> OperatingTarget<T> {
    /// Benchmark default: 0.5 p.u. active power, zero reactive power.
    pub fn bench() -> Self {
        OperatingTarget { p_target: T::of(750.0), q_target: T::zero() }
    }
}

/// Converged operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium<T> {
    /// Steady state, in the layout of `model`.
    pub x_star: Vec<T>,
    /// Infinity norm of the normalized state derivative (per-unit / s).
    pub residual_inf: T,
    pub signals: SignalSet<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Model with references resolved by the closure (identical to the
    /// input model except for GFL, where the current references are solved).
    pub model: NonlinearModel<T>,
}

/// Solver knobs; the defaults satisfy the module contract.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions<T> {
    /// Residual tolerance in per-unit rate units.
    pub tol: T,
    pub max_iterations: usize,
    /// Smallest backtracking step (as a fraction of the Newton step).
    pub min_step: T,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        NewtonOptions {
            tol: T::of(1e-10),
            max_iterations: 60,
            min_step: T::of(2.0f64.powi(-20)),
        }
    }
}

/// Normalized residual norm used by the solver and by tests.
pub fn residual<T: Real>(model: &NonlinearModel<T>, x: &[T]) -> Result<T> {
    let mut dx = vec![T::zero(); model.n_states()];
    model.derivatives(x, &mut dx)?;
    let scales = model.state_scales();
    Ok(dx
        .iter()
        .zip(&scales)
        .fold(T::zero(), |m, (d, s)| m.max((*d / *s).abs())))
}

/// Solve for the equilibrium of `model` under `target`, optionally starting
/// from `guess` (state vector in model layout).
pub fn solve<T: Real>(
    model: &NonlinearModel<T>,
    target: &OperatingTarget<T>,
    guess: Option<&[T]>,
) -> Result<Equilibrium<T>> {
    solve_with(model, target, guess, &NewtonOptions::default())
}

pub fn solve_with<T: Real>(
    model: &NonlinearModel<T>,
    target: &OperatingTarget<T>,
    guess: Option<&[T]>,
    opts: &NewtonOptions<T>,
) -> Result<Equilibrium<T>> {
    let attempt = |delta0: T, guess: Option<&[T]>| -> Result<Equilibrium<T>> {
        let y0 = initial_vector(model, target, guess, delta0);
        newton(model, target, y0, opts)
    };

    let first = attempt(T::zero(), guess);
    let eq = match &first {
        Ok(eq) => {
            let delta = eq.signals.delta;
            if delta.abs() < T::FRAC_PI_2() {
                return first;
            }
            // Converged onto the high-angle branch: retry from a flat start
            // with a small positive angle.
            attempt(T::of(0.1), None)?
        }
        Err(_) => attempt(T::of(0.1), None).or(first)?,
    };
    let delta = eq.signals.delta;
    if delta.abs() >= T::FRAC_PI_2() {
        return Err(Error::HighAngleBranch { delta_rad: delta.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(eq)
}

/// Number of augmented unknowns for the mode's closure.
fn n_aug<T: Real>(model: &NonlinearModel<T>) -> usize {
    match model.mode {
        ControlMode::GflPll => 2,
        _ => 0,
    }
}

/// Assemble the augmented residual g(y) = [f(x; refs); closure(x)], with the
/// augmented entries normalized by the rated power.
fn eval_aug<T: Real>(
    model: &NonlinearModel<T>,
    target: &OperatingTarget<T>,
    y: &[T],
    out: &mut [T],
) -> Result<()> {
    let n = model.n_states();
    let aug = n_aug(model);
    let m = resolved_model(model, y)?;
    m.derivatives(&y[..n], &mut out[..n])?;
    // Normalize plant rows to per-unit rates.
    for (o, s) in out[..n].iter_mut().zip(m.state_scales()) {
        *o = *o / s;
    }
    if aug == 2 {
        let sig = m.outputs(&y[..n]);
        out[n] = (sig.p - target.p_target) / model.sys.s_rated;
        out[n + 1] = (sig.q - target.q_target) / model.sys.s_rated;
    }
    Ok(())
}

/// Model with closure unknowns written back into the control parameters.
fn resolved_model<T: Real>(model: &NonlinearModel<T>, y: &[T]) -> Result<NonlinearModel<T>> {
    let n = model.n_states();
    if n_aug(model) == 2 {
        let ctrl = ControlParams { i_ld_ref: y[n], i_lq_ref: y[n + 1], ..model.ctrl };
        model.with_ctrl(ctrl)
    } else {
        Ok(model.clone())
    }
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn newton<T: Real>(
    model: &NonlinearModel<T>,
    target: &OperatingTarget<T>,
    mut y: Vec<T>,
    opts: &NewtonOptions<T>,
) -> Result<Equilibrium<T>> {
    let n = model.n_states();
    let aug = n_aug(model);
    let dim = n + aug;
    let mut g = vec![T::zero(); dim];
    let mut scales = model.state_scales();
    let i_peak = T::of(2.0).sqrt() * model.sys.s_rated / (T::of(3.0).sqrt() * model.sys.v_g);
    scales.extend(std::iter::repeat(i_peak).take(aug));

    eval_aug(model, target, &y, &mut g)?;
    let mut norm = inf_norm(&g);

    for iter in 0..opts.max_iterations {
        if norm < opts.tol {
            let m = resolved_model(model, &y)?;
            let x = y[..n].to_vec();
            let signals = m.outputs(&x);
            let residual_inf = residual(&m, &x)?;
            return Ok(Equilibrium {
                x_star: x,
                residual_inf,
                signals,
                converged: true,
                iterations: iter,
                model: m,
            });
        }

        // Jacobian of the augmented residual by central differences.
        let jac = jacobian_fd(dim, dim, &scales, &y, |yv, out| {
            eval_aug(model, target, yv, out)
        })?;
        let rhs: Vec<T> = g.iter().map(|v| -*v).collect();
        let step = lu_solve(jac, &rhs).map_err(|_| Error::NoEquilibrium {
            residual: norm.to_f64().unwrap_or(f64::NAN),
            iterations: iter,
            last_iterate: y.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
        })?;

        // Backtracking: halve until the residual decreases.
        let mut alpha = T::one();
        let mut accepted = false;
        while alpha >= opts.min_step {
            let trial: Vec<T> =
                y.iter().zip(&step).map(|(yi, si)| *yi + alpha * *si).collect();
            if eval_aug(model, target, &trial, &mut g).is_ok() {
                let trial_norm = inf_norm(&g);
                if trial_norm < norm || trial_norm < opts.tol {
                    y = trial;
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
            }
            alpha = alpha * T::of(0.5);
        }
        if !accepted {
            return Err(Error::NoEquilibrium {
                residual: norm.to_f64().unwrap_or(f64::NAN),
                iterations: iter,
                last_iterate: y.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
            });
        }
    }

    if norm < opts.tol {
        let m = resolved_model(model, &y)?;
        let x = y[..n].to_vec();
        let signals = m.outputs(&x);
        let residual_inf = residual(&m, &x)?;
        return Ok(Equilibrium {
            x_star: x,
            residual_inf,
            signals,
            converged: true,
            iterations: opts.max_iterations,
            model: m,
        });
    }
    Err(Error::NoEquilibrium {
        residual: norm.to_f64().unwrap_or(f64::NAN),
        iterations: opts.max_iterations,
        last_iterate: y.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
    })
}

/// Flat start: capacitor voltage at its reference, currents sized for the
/// power target, grid angle from the small-angle power-flow estimate, and
/// controller integrators preloaded with their steady-state outputs.
fn initial_vector<T: Real>(
    model: &NonlinearModel<T>,
    target: &OperatingTarget<T>,
    guess: Option<&[T]>,
    delta0: T,
) -> Vec<T> {
    let n = model.n_states();
    let aug = n_aug(model);
    let mut y = vec![T::zero(); n + aug];

    if let Some(g) = guess {
        y[..n].copy_from_slice(&g[..n]);
        if aug == 2 {
            // At a GFL equilibrium the inductor currents equal their
            // references, so the guess currents seed the closure unknowns.
            y[n] = g[0];
            y[n + 1] = g[1];
        }
        return y;
    }

    let sys = &model.sys;
    let ctrl = &model.ctrl;
    let omega = sys.omega_star();
    let v_hat = sys.v_g_peak();
    let v_cd0 = if model.mode.has_voltage_loop_d() && ctrl.v_cd_ref > T::zero() {
        ctrl.v_cd_ref
    } else {
        v_hat
    };
    let three_halves = T::of(1.5);
    let i_d0 = target.p_target / (three_halves * v_cd0.max(T::of(1.0)));
    let i_gq0 = ctrl.i_lq_ref - omega * sys.c_f * v_cd0;
    let x_g = omega * sys.l_g;
    let delta_est = if delta0 != T::zero() {
        delta0
    } else {
        // Small-angle estimate of the power-flow angle.
        (target.p_target * x_g / (three_halves * v_cd0 * v_hat)).min(T::of(1.2))
    };

    y[0] = i_d0; // i_ld
    y[1] = ctrl.i_lq_ref; // i_lq
    y[2] = v_cd0;
    y[3] = T::zero();
    y[4] = i_d0; // i_gd
    y[5] = i_gq0;
    if let Some(i) = model.index_of(LABEL_DELTA) {
        y[i] = delta_est;
    }
    // Integrators preloaded with the outputs they must supply in steady
    // state (PI output = ki * xi when the error is zero).
    let v_id0 = v_cd0 + sys.r_f * y[0] - omega * sys.l_f * y[1];
    let v_iq0 = sys.r_f * y[1] + omega * sys.l_f * y[0];
    if let Some(i) = model.index_of(LABEL_XI_ID) {
        if ctrl.kii_d > T::zero() {
            y[i] = v_id0 / ctrl.kii_d;
        }
    }
    if let Some(i) = model.index_of(LABEL_XI_IQ) {
        if ctrl.kii_q > T::zero() {
            y[i] = v_iq0 / ctrl.kii_q;
        }
    }
    if let Some(i) = model.index_of(LABEL_XI_VD) {
        if ctrl.kiv_d > T::zero() {
            y[i] = y[0] / ctrl.kiv_d;
        }
    }
    if let Some(i) = model.index_of(LABEL_XI_VQ) {
        if ctrl.kiv_q > T::zero() {
            y[i] = y[1] / ctrl.kiv_q;
        }
    }
    if let Some(i) = model.index_of(LABEL_P_F) {
        y[i] = if model.mode.uses_droop() { ctrl.p_ref } else { target.p_target };
    }
    // Delay states settle at the raw control output (dc gain 1): x = u.
    if model.ctrl.delay.state_count() == 2 {
        if let Some(i) = model.index_of(crate::plant::LABEL_X_DEL_D) {
            y[i] = v_id0;
        }
        if let Some(i) = model.index_of(crate::plant::LABEL_X_DEL_Q) {
            y[i] = v_iq0;
        }
    }
    if aug == 2 {
        y[n] = i_d0;
        y[n + 1] = ctrl.i_lq_ref;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ControlMode, ControlParams, DelaySpec, SystemParams};
    use crate::plant::{assemble, bench_model};

    #[test]
    fn hybrid_droop_zero_power_point() {
        // p_target = 0 with zero q reference and lossless branches: the
        // equilibrium carries only the capacitor's reactive current, and the
        // angle satisfies p = 0.
        let mut sys: SystemParams<f64> = SystemParams::bench_1500w();
        sys.r_f = 0.0;
        sys.r_g = 0.0;
        let mut ctrl = ControlParams::bench(ControlMode::HybridDroop);
        ctrl.p_ref = 0.0;
        let m = assemble(ControlMode::HybridDroop, sys, ctrl).unwrap();
        let eq = solve(&m, &OperatingTarget { p_target: 0.0, q_target: 0.0 }, None).unwrap();
        assert!(eq.converged);
        assert!(eq.residual_inf < 1e-10);
        assert!(eq.signals.p.abs() < 1e-6);
        // Lossless zero-power point: the converter current vanishes and the
        // line carries exactly the filter capacitor's current.
        assert!(eq.signals.i_ld.abs() < 1e-6);
        assert!(eq.signals.i_lq.abs() < 1e-10);
        let w = m.sys.omega_star();
        assert!((eq.signals.i_gd - w * sys.c_f * eq.signals.v_cq).abs() < 1e-6);
        assert!((eq.signals.i_gq + w * sys.c_f * eq.signals.v_cd).abs() < 1e-6);
    }

    #[test]
    fn all_modes_converge_at_bench_point() {
        for mode in ControlMode::ALL {
            let m = bench_model::<f64>(mode, DelaySpec::None);
            let eq = solve(&m, &OperatingTarget::bench(), None)
                .unwrap_or_else(|e| panic!("{mode}: {e}"));
            assert!(eq.converged, "{mode} did not converge");
            assert!(eq.residual_inf < 1e-10, "{mode} residual {}", eq.residual_inf);
            assert!(eq.signals.delta.abs() < std::f64::consts::FRAC_PI_2);
            match mode {
                // Droop pins power at p_ref; GFL closes on p_target.
                ControlMode::GfmDroop | ControlMode::HybridDroop => {
                    assert!((eq.signals.p - 750.0).abs() < 1e-6, "{mode} p = {}", eq.signals.p);
                }
                ControlMode::GflPll => {
                    assert!((eq.signals.p - 750.0).abs() / 750.0 < 1e-8);
                    assert!(eq.signals.q.abs() < 750.0 * 1e-8);
                }
                ControlMode::HybridPll => {
                    // Power floats; voltage reference is enforced instead.
                    assert!((eq.signals.v_cd - m.ctrl.v_cd_ref).abs() < 1e-8);
                }
            }
            if mode.uses_pll() {
                assert!(eq.signals.v_cq.abs() < 1e-8, "{mode} v_cq = {}", eq.signals.v_cq);
            }
        }
    }

    #[test]
    fn resolve_from_solved_point_is_fast() {
        let m = bench_model::<f64>(ControlMode::HybridPll, DelaySpec::None);
        let eq = solve(&m, &OperatingTarget::bench(), None).unwrap();
        let again = solve(&eq.model, &OperatingTarget::bench(), Some(&eq.x_star)).unwrap();
        assert!(again.iterations <= 2, "warm restart took {} iterations", again.iterations);
    }

    #[test]
    fn residual_behaviour_around_equilibrium() {
        let m = bench_model::<f64>(ControlMode::GfmDroop, DelaySpec::None);
        let eq = solve(&m, &OperatingTarget::bench(), None).unwrap();
        assert!(residual(&eq.model, &eq.x_star).unwrap() < 1e-10);
        // Perturbing one state off the equilibrium leaves a visible residual.
        let mut x = eq.x_star.clone();
        x[2] += 1e-3 * 163.3;
        assert!(residual(&eq.model, &x).unwrap() > 1e-6);
    }

    #[test]
    fn residual_scales_linearly_near_equilibrium() {
        // First-order Taylor: residual of x* + eps*v grows linearly in eps.
        let m = bench_model::<f64>(ControlMode::HybridPll, DelaySpec::None);
        let eq = solve(&m, &OperatingTarget::bench(), None).unwrap();
        let mut dir = vec![0.0; m.n_states()];
        for (i, d) in dir.iter_mut().enumerate() {
            *d = ((i * 37 + 11) % 7) as f64 / 7.0 - 0.5;
        }
        let scales = eq.model.state_scales();
        let r_at = |eps: f64| {
            let x: Vec<f64> = eq
                .x_star
                .iter()
                .zip(&dir)
                .zip(&scales)
                .map(|((x, d), s)| x + eps * d * s)
                .collect();
            residual(&eq.model, &x).unwrap()
        };
        let r1 = r_at(1e-6);
        let r2 = r_at(2e-6);
        assert!((r2 / r1 - 2.0).abs() < 0.05, "ratio {}", r2 / r1);
    }

    #[test]
    fn gfl_beyond_transfer_limit_reports() {
        // At SCR 1.2 the transfer limit sits near 1.2 p.u.; asking for
        // 2.5 p.u. must produce a diagnostic, not a panic.
        let bases = crate::params::derive_bases(1500.0, 200.0, 50.0).unwrap();
        let sys = SystemParams::bench_1500w().with_scr(1.2, &bases).unwrap();
        let ctrl = ControlParams::bench(ControlMode::GflPll);
        let m = assemble(ControlMode::GflPll, sys, ctrl).unwrap();
        let r = solve(&m, &OperatingTarget { p_target: 2.5 * 1500.0, q_target: 0.0 }, None);
        match r {
            Err(Error::NoEquilibrium { .. }) | Err(Error::HighAngleBranch { .. }) => {}
            Ok(eq) => panic!("unexpected convergence with p = {}", eq.signals.p),
            Err(e) => panic!("unexpected error kind: {e}"),
        }
    }

    #[test]
    fn deterministic_solutions() {
        let m = bench_model::<f64>(ControlMode::GflPll, DelaySpec::None);
        let a = solve(&m, &OperatingTarget::bench(), None).unwrap();
        let b = solve(&m, &OperatingTarget::bench(), None).unwrap();
        assert_eq!(a.x_star, b.x_star);
        assert_eq!(a.iterations, b.iterations);
    }
}
