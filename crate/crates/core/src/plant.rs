//! Full-order nonlinear closed-loop model: LC filter + line + controller +
//! synchronization, written in the controller dq frame against an infinite
//! bus of fixed magnitude and frequency.
//!
//! State layout (fixed per mode, delay states appended last when present):
//!
//! | mode          | states                                                          | n  |
//! |---------------|-----------------------------------------------------------------|----|
//! | gfm_droop     | i_ld i_lq v_cd v_cq i_gd i_gq xi_vd xi_vq xi_id xi_iq p_f delta | 12 |
//! | gfl_pll       | i_ld i_lq v_cd v_cq i_gd i_gq xi_id xi_iq xi_pll delta          | 10 |
//! | hybrid_droop  | i_ld i_lq v_cd v_cq i_gd i_gq xi_vd xi_id xi_iq p_f delta       | 11 |
//! | hybrid_pll    | i_ld i_lq v_cd v_cq i_gd i_gq xi_vd xi_id xi_iq xi_pll delta    | 11 |
//!
//! The amplitude-invariant Park convention is used throughout, so powers are
//! P = (3/2)(v_d i_d + v_q i_q) and Q = (3/2)(v_q i_d - v_d i_q), both
//! measured at the capacitor node with the grid-side current. Cross-coupling
//! feedforward and anti-windup are deliberately absent from the control laws.

use crate::blocks::{delay_eval, droop_eval, lpf_eval, pi_eval, pll_eval, PiGains};
use crate::error::{Error, Result};
use crate::params::{ControlMode, ControlParams, DelaySpec, SystemParams};
use crate::Real;

/// Named state slots. `index_of` resolves a label to its position for a
/// given model; positions are stable for a given (mode, delay kind).
pub const LABEL_I_LD: &str = "i_ld";
pub const LABEL_I_LQ: &str = "i_lq";
pub const LABEL_V_CD: &str = "v_cd";
pub const LABEL_V_CQ: &str = "v_cq";
pub const LABEL_I_GD: &str = "i_gd";
pub const LABEL_I_GQ: &str = "i_gq";
pub const LABEL_XI_VD: &str = "xi_vd";
pub const LABEL_XI_VQ: &str = "xi_vq";
pub const LABEL_XI_ID: &str = "xi_id";
pub const LABEL_XI_IQ: &str = "xi_iq";
pub const LABEL_XI_PLL: &str = "xi_pll";
pub const LABEL_P_F: &str = "p_f";
pub const LABEL_DELTA: &str = "delta";
pub const LABEL_X_DEL_D: &str = "x_del_d";
pub const LABEL_X_DEL_Q: &str = "x_del_q";

/// Derived signals evaluated at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSet<T> {
    /// Active power at the capacitor node (W).
    pub p: T,
    /// Reactive power at the capacitor node (var).
    pub q: T,
    /// Capacitor voltage (V).
    pub v_cd: T,
    pub v_cq: T,
    /// Converter-side inductor current (A).
    pub i_ld: T,
    pub i_lq: T,
    /// Grid-side line current (A).
    pub i_gd: T,
    pub i_gq: T,
    /// Controller frame frequency (rad/s).
    pub omega_ctrl: T,
    /// Controller-frame angle ahead of the grid frame (rad).
    pub delta: T,
    /// Applied inverter voltage, after the delay block (V).
    pub v_id: T,
    pub v_iq: T,
}

/// Controller outputs frozen at fixed values; used for passive-network
/// checks and frozen-controller admittance scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenControl<T> {
    pub v_id: T,
    pub v_iq: T,
    pub omega_ctrl: T,
}

/// Closed-loop nonlinear model `dx/dt = f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearModel<T> {
    pub mode: ControlMode,
    pub sys: SystemParams<T>,
    pub ctrl: ControlParams<T>,
    state_labels: Vec<&'static str>,
}

/// Assemble the closed-loop model for a mode; validates parameters and fixes
/// the state layout.
pub fn assemble<T: Real>(
    mode: ControlMode,
    sys: SystemParams<T>,
    ctrl: ControlParams<T>,
) -> Result<NonlinearModel<T>> {
    if ctrl.mode != mode {
        return Err(Error::Config(format!(
            "control parameter set is for {} but the model is assembled for {}",
            ctrl.mode, mode
        )));
    }
    sys.validate()?;
    ctrl.validate()?;

    let mut labels = vec![LABEL_I_LD, LABEL_I_LQ, LABEL_V_CD, LABEL_V_CQ, LABEL_I_GD, LABEL_I_GQ];
    match mode {
        ControlMode::GfmDroop => {
            labels.extend([LABEL_XI_VD, LABEL_XI_VQ, LABEL_XI_ID, LABEL_XI_IQ, LABEL_P_F]);
        }
        ControlMode::GflPll => {
            labels.extend([LABEL_XI_ID, LABEL_XI_IQ, LABEL_XI_PLL]);
        }
        ControlMode::HybridDroop => {
            labels.extend([LABEL_XI_VD, LABEL_XI_ID, LABEL_XI_IQ, LABEL_P_F]);
        }
        ControlMode::HybridPll => {
            labels.extend([LABEL_XI_VD, LABEL_XI_ID, LABEL_XI_IQ, LABEL_XI_PLL]);
        }
    }
    labels.push(LABEL_DELTA);
    if ctrl.delay.state_count() == 2 {
        labels.extend([LABEL_X_DEL_D, LABEL_X_DEL_Q]);
    }
    Ok(NonlinearModel { mode, sys, ctrl, state_labels: labels })
}

impl<T: Real> NonlinearModel<T> {
    pub fn n_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn state_labels(&self) -> &[&'static str] {
        &self.state_labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.state_labels.iter().position(|l| *l == label)
    }

    /// Same model with replaced control parameters (layout unchanged).
    pub fn with_ctrl(&self, ctrl: ControlParams<T>) -> Result<Self> {
        assemble(self.mode, self.sys, ctrl)
    }

    /// Same model with a replaced line inductance.
    pub fn with_l_g(&self, l_g: T) -> Result<Self> {
        assemble(self.mode, SystemParams { l_g, ..self.sys }, self.ctrl)
    }

    /// Per-state normalization used for residual norms, finite-difference
    /// steps, and divergence detection. Currents normalize to the peak phase
    /// current base, voltages to the peak phase voltage base, powers to the
    /// rated power, angles to 1 rad.
    pub fn state_scales(&self) -> Vec<T> {
        let v_peak = self.sys.v_g_peak();
        let i_peak = T::of(2.0).sqrt() * self.sys.s_rated / (T::of(3.0).sqrt() * self.sys.v_g);
        self.state_labels
            .iter()
            .map(|label| match *label {
                LABEL_I_LD | LABEL_I_LQ | LABEL_I_GD | LABEL_I_GQ | LABEL_XI_ID
                | LABEL_XI_IQ => i_peak,
                LABEL_V_CD | LABEL_V_CQ | LABEL_XI_VD | LABEL_XI_VQ | LABEL_XI_PLL
                | LABEL_X_DEL_D | LABEL_X_DEL_Q => v_peak,
                LABEL_P_F => self.sys.s_rated,
                LABEL_DELTA => T::one(),
                other => unreachable!("unknown state label {other}"),
            })
            .collect()
    }

    /// Closed-loop derivatives `dx/dt = f(x)`.
    pub fn derivatives(&self, x: &[T], dx: &mut [T]) -> Result<()> {
        self.derivatives_with(x, dx, None)
    }

    /// Derivatives with the controller optionally frozen at fixed outputs.
    pub fn derivatives_with(
        &self,
        x: &[T],
        dx: &mut [T],
        frozen: Option<&FrozenControl<T>>,
    ) -> Result<()> {
        debug_assert_eq!(x.len(), self.n_states());
        debug_assert_eq!(dx.len(), self.n_states());
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state vector".into()));
        }

        let sys = &self.sys;
        let ctrl = &self.ctrl;
        let omega_star = sys.omega_star();

        let i_ld = x[0];
        let i_lq = x[1];
        let v_cd = x[2];
        let v_cq = x[3];
        let i_gd = x[4];
        let i_gq = x[5];
        let delta = x[self.index_of(LABEL_DELTA).unwrap()];

        // Synchronization: controller frequency plus sync-state derivatives.
        let p = T::of(1.5) * (v_cd * i_gd + v_cq * i_gq);
        let (mut omega_ctrl, d_sync, sync_idx) = match self.mode {
            ControlMode::GfmDroop | ControlMode::HybridDroop => {
                let i = self.index_of(LABEL_P_F).unwrap();
                let p_f = x[i];
                let w = droop_eval(ctrl.m_p, omega_star, ctrl.p_ref, p_f);
                (w, lpf_eval(ctrl.omega_f, p_f, p), i)
            }
            ControlMode::GflPll | ControlMode::HybridPll => {
                let i = self.index_of(LABEL_XI_PLL).unwrap();
                let (w, dxi) = pll_eval(ctrl.kp_pll, ctrl.ki_pll, omega_star, x[i], v_cq);
                (w, dxi, i)
            }
        };

        // Control laws: current references, then current loops, then delay.
        let (i_ld_ref, d_xi_vd) = if self.mode.has_voltage_loop_d() {
            let i = self.index_of(LABEL_XI_VD).unwrap();
            let (u, d) = pi_eval(
                PiGains { kp: ctrl.kpv_d, ki: ctrl.kiv_d },
                x[i],
                ctrl.v_cd_ref - v_cd,
            );
            (u, Some((i, d)))
        } else {
            (ctrl.i_ld_ref, None)
        };
        let (i_lq_ref, d_xi_vq) = if self.mode.has_voltage_loop_q() {
            let i = self.index_of(LABEL_XI_VQ).unwrap();
            // GFM regulates v_cq to zero.
            let (u, d) = pi_eval(
                PiGains { kp: ctrl.kpv_q, ki: ctrl.kiv_q },
                x[i],
                T::zero() - v_cq,
            );
            (u, Some((i, d)))
        } else {
            (ctrl.i_lq_ref, None)
        };

        let xi_id = self.index_of(LABEL_XI_ID).unwrap();
        let xi_iq = self.index_of(LABEL_XI_IQ).unwrap();
        let (v_id_raw, d_xi_id) = pi_eval(
            PiGains { kp: ctrl.kpi_d, ki: ctrl.kii_d },
            x[xi_id],
            i_ld_ref - i_ld,
        );
        let (v_iq_raw, d_xi_iq) = pi_eval(
            PiGains { kp: ctrl.kpi_q, ki: ctrl.kii_q },
            x[xi_iq],
            i_lq_ref - i_lq,
        );

        let (mut v_id, mut v_iq) = (v_id_raw, v_iq_raw);
        let mut d_del = None;
        if self.ctrl.delay.state_count() == 2 {
            let id = self.index_of(LABEL_X_DEL_D).unwrap();
            let iq = self.index_of(LABEL_X_DEL_Q).unwrap();
            let (yd, dd) = delay_eval(ctrl.delay, x[id], v_id_raw);
            let (yq, dq) = delay_eval(ctrl.delay, x[iq], v_iq_raw);
            v_id = yd;
            v_iq = yq;
            d_del = Some(((id, dd), (iq, dq)));
        }

        if let Some(f) = frozen {
            v_id = f.v_id;
            v_iq = f.v_iq;
            omega_ctrl = f.omega_ctrl;
        }

        // Plant in the controller frame rotating at omega_ctrl.
        let v_hat = sys.v_g_peak();
        let v_gd = v_hat * delta.cos();
        let v_gq = -v_hat * delta.sin();

        dx[0] = (v_id - v_cd - sys.r_f * i_ld) / sys.l_f + omega_ctrl * i_lq;
        dx[1] = (v_iq - v_cq - sys.r_f * i_lq) / sys.l_f - omega_ctrl * i_ld;
        dx[2] = (i_ld - i_gd) / sys.c_f + omega_ctrl * v_cq;
        dx[3] = (i_lq - i_gq) / sys.c_f - omega_ctrl * v_cd;
        dx[4] = (v_cd - v_gd - sys.r_g * i_gd) / sys.l_g + omega_ctrl * i_gq;
        dx[5] = (v_cq - v_gq - sys.r_g * i_gq) / sys.l_g - omega_ctrl * i_gd;

        dx[sync_idx] = d_sync;
        if let Some((i, d)) = d_xi_vd {
            dx[i] = d;
        }
        if let Some((i, d)) = d_xi_vq {
            dx[i] = d;
        }
        dx[xi_id] = d_xi_id;
        dx[xi_iq] = d_xi_iq;
        dx[self.index_of(LABEL_DELTA).unwrap()] = omega_ctrl - omega_star;
        if let Some(((id, dd), (iq, dq))) = d_del {
            dx[id] = dd;
            dx[iq] = dq;
        }
        Ok(())
    }

    /// Derived signals at a state; pure function of `x`.
    pub fn outputs(&self, x: &[T]) -> SignalSet<T> {
        debug_assert_eq!(x.len(), self.n_states());
        let ctrl = &self.ctrl;
        let omega_star = self.sys.omega_star();
        let (i_ld, i_lq, v_cd, v_cq, i_gd, i_gq) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        let delta = x[self.index_of(LABEL_DELTA).unwrap()];

        let omega_ctrl = match self.mode {
            ControlMode::GfmDroop | ControlMode::HybridDroop => {
                let p_f = x[self.index_of(LABEL_P_F).unwrap()];
                droop_eval(ctrl.m_p, omega_star, ctrl.p_ref, p_f)
            }
            ControlMode::GflPll | ControlMode::HybridPll => {
                let xi = x[self.index_of(LABEL_XI_PLL).unwrap()];
                pll_eval(ctrl.kp_pll, ctrl.ki_pll, omega_star, xi, v_cq).0
            }
        };

        let i_ld_ref = if self.mode.has_voltage_loop_d() {
            let xi = x[self.index_of(LABEL_XI_VD).unwrap()];
            pi_eval(PiGains { kp: ctrl.kpv_d, ki: ctrl.kiv_d }, xi, ctrl.v_cd_ref - v_cd).0
        } else {
            ctrl.i_ld_ref
        };
        let i_lq_ref = if self.mode.has_voltage_loop_q() {
            let xi = x[self.index_of(LABEL_XI_VQ).unwrap()];
            pi_eval(PiGains { kp: ctrl.kpv_q, ki: ctrl.kiv_q }, xi, T::zero() - v_cq).0
        } else {
            ctrl.i_lq_ref
        };
        let v_id_raw = pi_eval(
            PiGains { kp: ctrl.kpi_d, ki: ctrl.kii_d },
            x[self.index_of(LABEL_XI_ID).unwrap()],
            i_ld_ref - i_ld,
        )
        .0;
        let v_iq_raw = pi_eval(
            PiGains { kp: ctrl.kpi_q, ki: ctrl.kii_q },
            x[self.index_of(LABEL_XI_IQ).unwrap()],
            i_lq_ref - i_lq,
        )
        .0;
        let (v_id, v_iq) = if ctrl.delay.state_count() == 2 {
            let xd = x[self.index_of(LABEL_X_DEL_D).unwrap()];
            let xq = x[self.index_of(LABEL_X_DEL_Q).unwrap()];
            (delay_eval(ctrl.delay, xd, v_id_raw).0, delay_eval(ctrl.delay, xq, v_iq_raw).0)
        } else {
            (v_id_raw, v_iq_raw)
        };

        SignalSet {
            p: T::of(1.5) * (v_cd * i_gd + v_cq * i_gq),
            q: T::of(1.5) * (v_cq * i_gd - v_cd * i_gq),
            v_cd,
            v_cq,
            i_ld,
            i_lq,
            i_gd,
            i_gq,
            omega_ctrl,
            delta,
            v_id,
            v_iq,
        }
    }

    /// Grid voltage in the controller frame at angle `delta`.
    pub fn grid_voltage(&self, delta: T) -> (T, T) {
        let v_hat = self.sys.v_g_peak();
        (v_hat * delta.cos(), -v_hat * delta.sin())
    }
}

/// Convenience: construct a model with benchmark parameters and the given
/// delay spec.
pub fn bench_model<T: Real>(mode: ControlMode, delay: DelaySpec<T>) -> NonlinearModel<T> {
    let sys = SystemParams::bench_1500w();
    let ctrl = ControlParams { delay, ..ControlParams::bench(mode) };
    assemble(mode, sys, ctrl).expect("benchmark model is valid")
}
