//! Continuous-time control primitives — PI, low-pass filter, PLL, droop,
//! transport delay, Park transforms — exposed as pure state-contribution
//! functions, plus the single-axis Thevenin/Norton equivalents of the
//! closed current and voltage loops.
//!
//! Everything here is stateless: integrator and filter states are passed in
//! and their derivatives returned, so the same primitives serve the
//! nonlinear model assembly, the equilibrium solver, and the linearizer.

use crate::error::{Error, Result};
use crate::params::{ControlParams, DelaySpec, SystemParams};
use crate::{Complex, Real};

/// Proportional-integral gain pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains<T> {
    pub kp: T,
    pub ki: T,
}

/// PI evaluation: output and integrator derivative for error `e`.
///
/// `u = kp*e + ki*xi`, `dxi/dt = e`.
#[inline]
pub fn pi_eval<T: Real>(g: PiGains<T>, xi: T, e: T) -> (T, T) {
    (g.kp * e + g.ki * xi, e)
}

/// First-order low-pass filter derivative: `dx/dt = omega_f * (u - x)`.
#[inline]
pub fn lpf_eval<T: Real>(omega_f: T, x: T, u: T) -> T {
    omega_f * (u - x)
}

/// PLL frequency law: `omega_ctrl = omega_star + kp*v_cq + ki*xi_pll`,
/// integrator driven by the q-axis terminal voltage.
#[inline]
pub fn pll_eval<T: Real>(kp_pll: T, ki_pll: T, omega_star: T, xi_pll: T, v_cq: T) -> (T, T) {
    (omega_star + kp_pll * v_cq + ki_pll * xi_pll, v_cq)
}

/// P-omega droop: `omega_ctrl = omega_star + m_p * (p_ref - p_f)`.
#[inline]
pub fn droop_eval<T: Real>(m_p: T, omega_star: T, p_ref: T, p_f: T) -> T {
    omega_star + m_p * (p_ref - p_f)
}

/// Transport-delay evaluation.
///
/// `None` is a unity pass-through with no state. `FirstOrderPade` realizes
/// G(s) = (1 - s t_d/2)/(1 + s t_d/2) in the standard state-space form
/// `dx/dt = (2/t_d)(u - x)`, `y = 2x - u`; returns `(y, dx/dt)`.
#[inline]
pub fn delay_eval<T: Real>(spec: DelaySpec<T>, x_del: T, u: T) -> (T, T) {
    match spec.effective() {
        DelaySpec::None => (u, T::zero()),
        DelaySpec::FirstOrderPade { t_d } => {
            let a = T::of(2.0) / t_d;
            (T::of(2.0) * x_del - u, a * (u - x_del))
        }
    }
}

/// Frequency response of the delay block at `s = j 2 pi f`.
pub fn delay_response<T: Real>(spec: DelaySpec<T>, f_hz: T) -> Complex<T> {
    match spec.effective() {
        DelaySpec::None => Complex::new(T::one(), T::zero()),
        DelaySpec::FirstOrderPade { t_d } => {
            let half = Complex::new(T::zero(), T::PI() * f_hz * t_d);
            (Complex::new(T::one(), T::zero()) - half)
                / (Complex::new(T::one(), T::zero()) + half)
        }
    }
}

/// Amplitude-invariant Park transform.
///
/// A balanced cosine set of amplitude A aligned with `theta` maps to
/// `(d, q, z) = (A, 0, 0)`. The zero-sequence component is carried so the
/// transform inverts exactly for arbitrary (unbalanced) inputs.
pub fn park<T: Real>(a: T, b: T, c: T, theta: T) -> (T, T, T) {
    let two_thirds = T::of(2.0) / T::of(3.0);
    let shift = T::of(2.0) * T::PI() / T::of(3.0);
    let (tb, tc) = (theta - shift, theta + shift);
    let d = two_thirds * (a * theta.cos() + b * tb.cos() + c * tc.cos());
    let q = -two_thirds * (a * theta.sin() + b * tb.sin() + c * tc.sin());
    let z = (a + b + c) / T::of(3.0);
    (d, q, z)
}

/// Inverse of [`park`].
pub fn inverse_park<T: Real>(d: T, q: T, z: T, theta: T) -> (T, T, T) {
    let shift = T::of(2.0) * T::PI() / T::of(3.0);
    let (tb, tc) = (theta - shift, theta + shift);
    (
        d * theta.cos() - q * theta.sin() + z,
        d * tb.cos() - q * tb.sin() + z,
        d * tc.cos() - q * tc.sin() + z,
    )
}

/// One frequency point of a transfer evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferEval<T> {
    pub frequency_hz: T,
    pub value: Complex<T>,
}

/// d-axis Thevenin equivalent of the closed dual voltage/current loop:
/// `v_cd = gain(s) * v_cd_ref - z_out(s) * i_gd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheveninD<T> {
    pub gain: Complex<T>,
    /// Output impedance (ohm).
    pub z_out: Complex<T>,
}

/// q-axis Norton equivalent of the closed current loop:
/// `i_lq = gain(s) * i_lq_ref - y_out(s) * v_cq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NortonQ<T> {
    pub gain: Complex<T>,
    /// Output admittance (S).
    pub y_out: Complex<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisEquivalents<T> {
    pub thevenin_d: TheveninD<T>,
    pub norton_q: NortonQ<T>,
}

/// Single-axis closed-loop equivalents at frequency `f` (Hz).
///
/// The q-axis Norton form follows directly from the current loop around the
/// filter inductor:
///
/// ```text
/// i_lq = Z_pi/(Z_pi + s L_f + R_f) * i_lq_ref - 1/(Z_pi + s L_f + R_f) * v_cq
/// ```
///
/// with `Z_pi = (kpi_q + kii_q/s) G_del`. The d-axis Thevenin form comes from
/// eliminating `v_id` and `i_ld` from the dual-loop law with the capacitor
/// current `i_ld = i_gd + s C_f v_cd`:
///
/// ```text
/// gain  = Z_pi H_v / (1 + Z_pi H_v + s C_f (Z_L + Z_pi))
/// z_out = (Z_L + Z_pi) / (1 + Z_pi H_v + s C_f (Z_L + Z_pi))
/// ```
///
/// where `H_v = kpv_d + kiv_d/s` and `Z_L = s L_f + R_f`. At f = 0 the
/// integrator limits apply: norton gain -> 1, y_out -> 0, thevenin gain -> 1,
/// z_out -> 0.
pub fn axis_equivalents<T: Real>(
    sys: &SystemParams<T>,
    ctrl: &ControlParams<T>,
    f_hz: T,
) -> Result<AxisEquivalents<T>> {
    if !f_hz.is_finite() {
        return Err(Error::Domain(format!("frequency must be finite, got {f_hz}")));
    }
    for (gain, v) in [
        ("kpv_d", ctrl.kpv_d),
        ("kiv_d", ctrl.kiv_d),
        ("kpi_d", ctrl.kpi_d),
        ("kii_d", ctrl.kii_d),
        ("kpi_q", ctrl.kpi_q),
        ("kii_q", ctrl.kii_q),
    ] {
        if !v.is_finite() || v < T::zero() {
            return Err(Error::MissingGain {
                mode: ctrl.mode.name(),
                gain,
                reason: format!("axis equivalents need this gain finite and >= 0, got {v}"),
            });
        }
    }

    let one = Complex::new(T::one(), T::zero());
    if f_hz == T::zero() && (ctrl.kii_q > T::zero() || ctrl.kiv_d > T::zero()) {
        // Integrators dominate at dc.
        return Ok(AxisEquivalents {
            thevenin_d: TheveninD { gain: one, z_out: Complex::new(T::zero(), T::zero()) },
            norton_q: NortonQ { gain: one, y_out: Complex::new(T::zero(), T::zero()) },
        });
    }

    let s = Complex::new(T::zero(), T::of(2.0) * T::PI() * f_hz);
    let g_del = delay_response(ctrl.delay, f_hz);
    let z_l = s * sys.l_f + Complex::new(sys.r_f, T::zero());

    let z_pi_q = (Complex::new(ctrl.kpi_q, T::zero()) + Complex::new(ctrl.kii_q, T::zero()) / s)
        * g_del;
    let den_q = z_pi_q + z_l;
    let norton_q = NortonQ { gain: z_pi_q / den_q, y_out: one / den_q };

    let z_pi_d = (Complex::new(ctrl.kpi_d, T::zero()) + Complex::new(ctrl.kii_d, T::zero()) / s)
        * g_del;
    let h_v = Complex::new(ctrl.kpv_d, T::zero()) + Complex::new(ctrl.kiv_d, T::zero()) / s;
    let s_cf = s * sys.c_f;
    let den_d = one + z_pi_d * h_v + s_cf * (z_l + z_pi_d);
    let thevenin_d = TheveninD { gain: z_pi_d * h_v / den_d, z_out: (z_l + z_pi_d) / den_d };

    Ok(AxisEquivalents { thevenin_d, norton_q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ControlMode, ControlParams, SystemParams};

    const TWO_PI: f64 = std::f64::consts::TAU;

    #[test]
    fn park_aligned_balanced_set() {
        let (d, q, z) = park(1.0f64, -0.5, -0.5, 0.0);
        assert!((d - 1.0).abs() < 1e-15);
        assert!(q.abs() < 1e-15);
        assert!(z.abs() < 1e-15);
    }

    #[test]
    fn park_quadrature_set() {
        // Balanced set of amplitude 163.3 V at angle theta - pi/2 lands on
        // (0, -163.3).
        let amp = 163.3;
        let theta = 0.7;
        let ang = theta - std::f64::consts::FRAC_PI_2;
        let a = amp * ang.cos();
        let b = amp * (ang - TWO_PI / 3.0).cos();
        let c = amp * (ang + TWO_PI / 3.0).cos();
        let (d, q, _) = park(a, b, c, theta);
        assert!(d.abs() < 1e-12);
        assert!((q + amp).abs() < 1e-12);
    }

    #[test]
    fn park_round_trip_random() {
        // 1000 arbitrary (not necessarily balanced) inputs round-trip to
        // 1e-13.
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 400.0 - 200.0
        };
        for _ in 0..1000 {
            let (a, b, c, theta) = (next(), next(), next(), next() * 0.05);
            let (d, q, z) = park(a, b, c, theta);
            let (a2, b2, c2) = inverse_park(d, q, z, theta);
            // 1e-13 per unit of signal magnitude.
            let tol = 1e-13 * (1.0 + a.abs().max(b.abs()).max(c.abs()));
            assert!((a - a2).abs() < tol && (b - b2).abs() < tol && (c - c2).abs() < tol);
        }
    }

    #[test]
    fn park_constant_for_tracked_balanced_set() {
        // (d, q) of a balanced set are constant in time when theta tracks the
        // set angle.
        let amp = 10.0;
        let phase = 0.3;
        let mut d0 = None;
        for k in 0..500 {
            let theta = 1e-3 * k as f64 * TWO_PI * 50.0;
            let ang = theta + phase;
            let (d, q, _) = park(
                amp * ang.cos(),
                amp * (ang - TWO_PI / 3.0).cos(),
                amp * (ang + TWO_PI / 3.0).cos(),
                theta,
            );
            let (d_ref, q_ref) = *d0.get_or_insert((d, q));
            assert!((d - d_ref).abs() < 1e-12 && (q - q_ref).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_step_and_hold() {
        let g = PiGains { kp: 12.0, ki: 5.0 };
        let (u, dxi) = pi_eval(g, 0.0, 1.0);
        assert_eq!(u, 12.0);
        assert_eq!(dxi, 1.0);

        // Zero error holds the integrator contribution.
        let (u, dxi) = pi_eval(g, 0.4, 0.0);
        assert_eq!(u, 5.0 * 0.4);
        assert_eq!(dxi, 0.0);

        let (u, _) = pi_eval(PiGains { kp: 0.1f64, ki: 10.0 }, 0.2, 0.5);
        assert!((u - 2.05).abs() < 1e-15);
    }

    #[test]
    fn lpf_settled_and_step() {
        assert_eq!(lpf_eval(TWO_PI, 3.3, 3.3), 0.0);
        assert_eq!(lpf_eval(TWO_PI, 0.0, 1.0), TWO_PI);
        // Step response reaches 1 - 1/e at t = 1/omega_f: integrate with a
        // small explicit Euler step as the oracle.
        let omega_f = TWO_PI;
        let dt = 1e-6;
        let steps = (1.0 / omega_f / dt).round() as usize;
        let mut x = 0.0;
        for _ in 0..steps {
            x += dt * lpf_eval(omega_f, x, 1.0);
        }
        assert!((x - (1.0 - (-1.0f64).exp())).abs() < 1e-4);
    }

    #[test]
    fn pll_locked_and_gain() {
        let omega_star = TWO_PI * 50.0;
        let (w, dxi) = pll_eval(0.5, 12.0, omega_star, 0.0, 0.0);
        assert_eq!(w, omega_star);
        assert_eq!(dxi, 0.0);
        let (w, _) = pll_eval(0.5, 12.0, omega_star, 0.0, 1.0);
        assert!((w - (omega_star + 0.5)).abs() < 1e-12);
        // Constant q-voltage drives the integrator linearly.
        let eps = 1e-3;
        let (_, dxi) = pll_eval(0.5, 12.0, omega_star, 0.7, eps);
        assert_eq!(dxi, eps);
    }

    #[test]
    fn droop_rated_and_slope() {
        let omega_star = TWO_PI * 50.0;
        assert_eq!(droop_eval(TWO_PI * 2.5e-5, omega_star, 750.0, 750.0), omega_star);
        let w = droop_eval(TWO_PI * 2.5e-5, omega_star, 1500.0, 0.0);
        assert!(((w - omega_star) / TWO_PI - 0.0375).abs() < 1e-12);
        assert_eq!(droop_eval(0.0, omega_star, 0.0, 1e6), omega_star);
    }

    #[test]
    fn delay_unity_and_dc_gain() {
        let (y, _) = delay_eval(DelaySpec::None, 0.0, 5.0);
        assert_eq!(y, 5.0);
        // Pade at dc steady state: x = u, so y = 2x - u = u.
        let spec = DelaySpec::FirstOrderPade { t_d: 150e-6 };
        let (y, dx) = delay_eval(spec, 5.0, 5.0);
        assert_eq!(y, 5.0);
        assert_eq!(dx, 0.0);
        // t_d = 0 degenerates to no delay.
        let (y, dx) = delay_eval(DelaySpec::FirstOrderPade { t_d: 0.0 }, 1.0, 7.0);
        assert_eq!(y, 7.0);
        assert_eq!(dx, 0.0);
    }

    #[test]
    fn delay_pade_phase_at_1khz() {
        // Analytic phase of (1 - s t_d/2)/(1 + s t_d/2) at 1 kHz, t_d = 150 us:
        // -2 atan(pi f t_d) = -50.45 deg (the exact delay would give -54 deg).
        let spec = DelaySpec::FirstOrderPade { t_d: 150e-6 };
        let g = delay_response(spec, 1000.0);
        let expected = -2.0 * (std::f64::consts::PI * 1000.0 * 150e-6).atan();
        assert!((g.arg() - expected).abs() < 1e-12);
        assert!((g.arg().to_degrees() + 50.46).abs() < 0.02);
        assert!((g.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_equivalents_dc_limits() {
        let sys: SystemParams<f64> = SystemParams::bench_1500w();
        let ctrl = ControlParams::bench(ControlMode::HybridPll);
        let eq = axis_equivalents(&sys, &ctrl, 0.0).unwrap();
        assert_eq!(eq.norton_q.gain.norm(), 1.0);
        assert_eq!(eq.norton_q.y_out.norm(), 0.0);
        assert_eq!(eq.thevenin_d.gain.norm(), 1.0);
        assert_eq!(eq.thevenin_d.z_out.norm(), 0.0);

        // Approaching dc from above, the norton gain tends to unity and the
        // thevenin output impedance to zero.
        let eq = axis_equivalents(&sys, &ctrl, 1e-4).unwrap();
        assert!((eq.norton_q.gain.norm() - 1.0).abs() < 1e-3);
        assert!(eq.thevenin_d.z_out.norm() < 1e-2);
    }

    #[test]
    fn norton_at_100hz_hand_arithmetic() {
        // Direct complex arithmetic with kpi_q = 12, kii_q = 5, L_f = 3.6 mH,
        // R_f = 0.08 ohm, G_del = 1 at 100 Hz:
        //   Z_pi = 12 - j 0.0079577
        //   den  = 12.08 + j 2.25399
        let sys: SystemParams<f64> = SystemParams::bench_1500w();
        let ctrl = ControlParams::bench(ControlMode::HybridPll);
        let eq = axis_equivalents(&sys, &ctrl, 100.0).unwrap();

        let s = Complex::new(0.0, TWO_PI * 100.0);
        let z_pi = Complex::new(12.0, 0.0) + Complex::new(5.0, 0.0) / s;
        let den = z_pi + s * 3.6e-3 + Complex::new(0.08, 0.0);
        let gain = z_pi / den;
        let y = Complex::new(1.0, 0.0) / den;
        assert!((eq.norton_q.gain - gain).norm() < 1e-14);
        assert!((eq.norton_q.y_out - y).norm() < 1e-14);
        // Frozen values from the same arithmetic done by hand.
        assert!((eq.norton_q.gain.re - 0.9598).abs() < 1e-3);
        assert!((eq.norton_q.gain.im + 0.1798).abs() < 1e-3);
        assert!((eq.norton_q.y_out.re - 0.08000).abs() < 1e-4);
        assert!((eq.norton_q.y_out.im + 0.014927).abs() < 1e-5);
    }

    #[test]
    fn axis_equivalents_reject_missing_gain() {
        let sys: SystemParams<f64> = SystemParams::bench_1500w();
        let mut ctrl = ControlParams::bench(ControlMode::GflPll);
        ctrl.kiv_d = f64::NAN;
        assert!(matches!(
            axis_equivalents(&sys, &ctrl, 10.0),
            Err(Error::MissingGain { gain: "kiv_d", .. })
        ));
    }
}
