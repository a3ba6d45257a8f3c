//! Numerical linearization, eigenvalue analysis, pole maps over
//! line-impedance sweeps, and 2x2 dq port-admittance frequency scans with
//! complex-vector reduction.
//!
//! The port is defined at the filter-capacitor node with the grid branch
//! removed: the scan model replaces the line by a current injection in the
//! system frame, linearizes numerically, evaluates the 2x2 impedance
//! Z(jw) = C (jwI - A)^{-1} B + D per frequency, and inverts it to the
//! admittance. Scans run around the nominal weak-grid equilibrium.

use crate::blocks::{NortonQ, TheveninD};
use crate::equilibrium::{solve, Equilibrium, OperatingTarget};
use crate::error::{Error, Result};
use crate::linalg::{clu_solve, CMat, Mat};
use crate::params::{scr_to_line, Bases, ControlParams, SystemParams};
use crate::plant::{FrozenControl, NonlinearModel, LABEL_DELTA};
use crate::{Complex, Real};

pub use crate::linalg::eigenvalues;

/// Central-difference Jacobian of `f` at `x0` with per-coordinate steps
/// `h_j = h_factor * max(1e-6 |x_j|, 1e-8 scale_j)`.
pub fn jacobian_fd_with<T, F>(
    n_out: usize,
    n_in: usize,
    scales: &[T],
    x0: &[T],
    h_factor: T,
    mut f: F,
) -> Result<Mat<T>>
where
    T: Real,
    F: FnMut(&[T], &mut [T]) -> Result<()>,
{
    assert_eq!(scales.len(), n_in);
    assert_eq!(x0.len(), n_in);
    let mut jac = Mat::zeros(n_out, n_in);
    let mut x = x0.to_vec();
    let mut f_plus = vec![T::zero(); n_out];
    let mut f_minus = vec![T::zero(); n_out];
    for j in 0..n_in {
        let h = h_factor * (T::of(1e-6) * x0[j].abs()).max(T::of(1e-8) * scales[j]);
        x[j] = x0[j] + h;
        f(&x, &mut f_plus)?;
        x[j] = x0[j] - h;
        f(&x, &mut f_minus)?;
        x[j] = x0[j];
        let two_h = T::of(2.0) * h;
        for i in 0..n_out {
            let d = (f_plus[i] - f_minus[i]) / two_h;
            if !d.is_finite() {
                return Err(Error::NonFinite(format!(
                    "finite-difference entry ({i}, {j})"
                )));
            }
            jac[(i, j)] = d;
        }
    }
    Ok(jac)
}

/// [`jacobian_fd_with`] at the standard step size.
pub fn jacobian_fd<T, F>(n_out: usize, n_in: usize, scales: &[T], x0: &[T], f: F) -> Result<Mat<T>>
where
    T: Real,
    F: FnMut(&[T], &mut [T]) -> Result<()>,
{
    jacobian_fd_with(n_out, n_in, scales, x0, T::one(), f)
}

/// Input channels available to [`linearize`]: controller reference knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSel {
    VcdRef,
    IldRef,
    IlqRef,
    PRef,
}

impl InputSel {
    pub fn label(&self) -> &'static str {
        match self {
            InputSel::VcdRef => "v_cd_ref",
            InputSel::IldRef => "i_ld_ref",
            InputSel::IlqRef => "i_lq_ref",
            InputSel::PRef => "p_ref",
        }
    }
}

/// Output channels: derived signals of the closed-loop model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputSel {
    P,
    Q,
    VCd,
    VCq,
    ILd,
    ILq,
    IGd,
    IGq,
    OmegaCtrl,
    Delta,
}

impl OutputSel {
    pub fn label(&self) -> &'static str {
        match self {
            OutputSel::P => "p",
            OutputSel::Q => "q",
            OutputSel::VCd => "v_cd",
            OutputSel::VCq => "v_cq",
            OutputSel::ILd => "i_ld",
            OutputSel::ILq => "i_lq",
            OutputSel::IGd => "i_gd",
            OutputSel::IGq => "i_gq",
            OutputSel::OmegaCtrl => "omega_ctrl",
            OutputSel::Delta => "delta",
        }
    }

    fn eval<T: Real>(&self, m: &NonlinearModel<T>, x: &[T]) -> T {
        let s = m.outputs(x);
        match self {
            OutputSel::P => s.p,
            OutputSel::Q => s.q,
            OutputSel::VCd => s.v_cd,
            OutputSel::VCq => s.v_cq,
            OutputSel::ILd => s.i_ld,
            OutputSel::ILq => s.i_lq,
            OutputSel::IGd => s.i_gd,
            OutputSel::IGq => s.i_gq,
            OutputSel::OmegaCtrl => s.omega_ctrl,
            OutputSel::Delta => s.delta,
        }
    }
}

/// State-space model (A, B, C, D) from numerical linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    pub a: Mat<T>,
    pub b: Mat<T>,
    pub c: Mat<T>,
    pub d: Mat<T>,
    pub state_labels: Vec<&'static str>,
    pub input_labels: Vec<&'static str>,
    pub output_labels: Vec<&'static str>,
}

fn apply_input<T: Real>(
    model: &NonlinearModel<T>,
    sel: InputSel,
    value: T,
) -> Result<NonlinearModel<T>> {
    let mut ctrl = model.ctrl;
    match sel {
        InputSel::VcdRef => ctrl.v_cd_ref = value,
        InputSel::IldRef => ctrl.i_ld_ref = value,
        InputSel::IlqRef => ctrl.i_lq_ref = value,
        InputSel::PRef => ctrl.p_ref = value,
    }
    model.with_ctrl(ctrl)
}

fn input_value<T: Real>(model: &NonlinearModel<T>, sel: InputSel) -> T {
    match sel {
        InputSel::VcdRef => model.ctrl.v_cd_ref,
        InputSel::IldRef => model.ctrl.i_ld_ref,
        InputSel::IlqRef => model.ctrl.i_lq_ref,
        InputSel::PRef => model.ctrl.p_ref,
    }
}

fn input_scale<T: Real>(model: &NonlinearModel<T>, sel: InputSel) -> T {
    let i_peak = T::of(2.0).sqrt() * model.sys.s_rated / (T::of(3.0).sqrt() * model.sys.v_g);
    match sel {
        InputSel::VcdRef => model.sys.v_g_peak(),
        InputSel::IldRef | InputSel::IlqRef => i_peak,
        InputSel::PRef => model.sys.s_rated,
    }
}

/// A-matrix of the model at `x_star` by central differences.
pub fn a_matrix<T: Real>(model: &NonlinearModel<T>, x_star: &[T]) -> Result<Mat<T>> {
    let n = model.n_states();
    let scales = model.state_scales();
    jacobian_fd(n, n, &scales, x_star, |x, out| model.derivatives(x, out))
}

/// Numerical linearization around an equilibrium over selected reference
/// inputs and signal outputs.
pub fn linearize<T: Real>(
    model: &NonlinearModel<T>,
    eq: &Equilibrium<T>,
    inputs: &[InputSel],
    outputs: &[OutputSel],
) -> Result<LinearModel<T>> {
    let x_star = &eq.x_star;
    let n = model.n_states();
    let a = a_matrix(model, x_star)?;

    // B and D columns by perturbing each reference channel.
    let mut b = Mat::zeros(n, inputs.len());
    let mut d = Mat::zeros(outputs.len(), inputs.len());
    let mut dx_p = vec![T::zero(); n];
    let mut dx_m = vec![T::zero(); n];
    for (k, sel) in inputs.iter().enumerate() {
        let u0 = input_value(model, *sel);
        let h = (T::of(1e-6) * u0.abs()).max(T::of(1e-8) * input_scale(model, *sel));
        let m_plus = apply_input(model, *sel, u0 + h)?;
        let m_minus = apply_input(model, *sel, u0 - h)?;
        m_plus.derivatives(x_star, &mut dx_p)?;
        m_minus.derivatives(x_star, &mut dx_m)?;
        let two_h = T::of(2.0) * h;
        for i in 0..n {
            b[(i, k)] = (dx_p[i] - dx_m[i]) / two_h;
        }
        for (i, osel) in outputs.iter().enumerate() {
            let yp = osel.eval(&m_plus, x_star);
            let ym = osel.eval(&m_minus, x_star);
            d[(i, k)] = (yp - ym) / two_h;
        }
    }

    // C rows by differencing the outputs over states.
    let scales = model.state_scales();
    let c = jacobian_fd(outputs.len(), n, &scales, x_star, |x, out| {
        for (i, osel) in outputs.iter().enumerate() {
            out[i] = osel.eval(model, x);
        }
        Ok(())
    })?;

    Ok(LinearModel {
        a,
        b,
        c,
        d,
        state_labels: model.state_labels().to_vec(),
        input_labels: inputs.iter().map(|s| s.label()).collect(),
        output_labels: outputs.iter().map(|s| s.label()).collect(),
    })
}

/// Dominant oscillatory mode summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeInfo<T> {
    /// Real part (1/s).
    pub sigma: T,
    /// Oscillation frequency (Hz), zero for a real mode.
    pub freq_hz: T,
    pub damping_ratio: T,
}

/// The eigenvalue with the largest real part among oscillatory modes
/// (|imag| > 2 pi 0.5 rad/s), ties broken by larger |imag|; if none are
/// oscillatory, the largest-real-part real eigenvalue with freq = 0.
pub fn dominant_mode<T: Real>(eigs: &[Complex<T>]) -> ModeInfo<T> {
    assert!(!eigs.is_empty(), "dominant_mode needs at least one eigenvalue");
    let osc_floor = T::PI(); // 2 pi * 0.5
    let mut best: Option<Complex<T>> = None;
    for e in eigs {
        if e.im.abs() > osc_floor {
            let better = match best {
                None => true,
                Some(b) => e.re > b.re || (e.re == b.re && e.im.abs() > b.im.abs()),
            };
            if better {
                best = Some(*e);
            }
        }
    }
    let chosen = best.unwrap_or_else(|| {
        let mut r = eigs[0];
        for e in eigs {
            if e.im.abs() <= osc_floor && (r.im.abs() > osc_floor || e.re > r.re) {
                r = *e;
            }
        }
        Complex::new(r.re, T::zero())
    });
    let sigma = chosen.re;
    let freq_hz = chosen.im.abs() / (T::of(2.0) * T::PI());
    let denom = (sigma * sigma + chosen.im * chosen.im).sqrt();
    let damping_ratio = if denom > T::zero() { -sigma / denom } else { T::zero() };
    ModeInfo { sigma, freq_hz, damping_ratio }
}

/// Eigenvalue sets over a line-impedance sweep. Entries are `None` where the
/// sweep point has no feasible impedance or no equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleMap<T> {
    /// Line impedance magnitude (p.u.) per sweep point.
    pub sweep_values: Vec<T>,
    pub eig_sets: Vec<Option<Vec<Complex<T>>>>,
    pub stability_flags: Vec<Option<bool>>,
}

impl<T: Real> PoleMap<T> {
    /// First sweep index whose point is feasible and unstable.
    pub fn first_unstable(&self) -> Option<usize> {
        self.stability_flags.iter().position(|f| *f == Some(false))
    }

    pub fn all_feasible_stable(&self) -> bool {
        self.stability_flags.iter().all(|f| *f != Some(false))
    }
}

/// Solve, linearize, and eigendecompose the model across a list of per-unit
/// line impedances. Equilibria are warm-started from the previous point.
pub fn pole_sweep<T: Real>(
    model: &NonlinearModel<T>,
    bases: &Bases<T>,
    target: &OperatingTarget<T>,
    zg_values_pu: &[T],
) -> Result<PoleMap<T>> {
    let mut eig_sets = Vec::with_capacity(zg_values_pu.len());
    let mut flags = Vec::with_capacity(zg_values_pu.len());
    let mut warm: Option<Vec<T>> = None;

    for &zg in zg_values_pu {
        if !(zg > T::zero()) {
            return Err(Error::Domain(format!("sweep impedance must be positive, got {zg}")));
        }
        let scr = T::one() / zg;
        let point = scr_to_line(scr, model.sys.r_g, bases)
            .and_then(|(l_g, _)| model.with_l_g(l_g))
            .and_then(|m| {
                let eq = match solve(&m, target, warm.as_deref()) {
                    Ok(eq) => eq,
                    // Retry cold if the warm start walked into a bad basin.
                    Err(_) if warm.is_some() => solve(&m, target, None)?,
                    Err(e) => return Err(e),
                };
                let a = a_matrix(&eq.model, &eq.x_star)?;
                let eigs = eigenvalues(&a)?;
                Ok((eq, eigs))
            });
        match point {
            Ok((eq, eigs)) => {
                warm = Some(eq.x_star.clone());
                let stable = eigs.iter().all(|e| e.re < T::zero());
                eig_sets.push(Some(eigs));
                flags.push(Some(stable));
            }
            Err(_) => {
                eig_sets.push(None);
                flags.push(None);
            }
        }
    }
    Ok(PoleMap { sweep_values: zg_values_pu.to_vec(), eig_sets, stability_flags: flags })
}

/// Complex-vector reduction of a 2x2 dq matrix `[dd, dq, qd, qq]`:
/// `Y+ = ((Ydd + Yqq) + j(Yqd - Ydq))/2`, `Y- = ((Ydd - Yqq) + j(Yqd + Ydq))/2`.
pub fn complex_vector_reduce<T: Real>(y: &[Complex<T>; 4]) -> (Complex<T>, Complex<T>) {
    let half = T::of(0.5);
    let j = Complex::new(T::zero(), T::one());
    let (dd, dq, qd, qq) = (y[0], y[1], y[2], y[3]);
    let y_plus = ((dd + qq) + j * (qd - dq)) * half;
    let y_minus = ((dd - qq) + j * (qd + dq)) * half;
    (y_plus, y_minus)
}

/// Inverse of [`complex_vector_reduce`] for real-entry dq matrices.
pub fn complex_vector_expand<T: Real>(y_plus: Complex<T>, y_minus: Complex<T>) -> [T; 4] {
    let two = T::of(2.0);
    let s = two * y_plus.re;
    let p = two * y_plus.im;
    let d = two * y_minus.re;
    let q = two * y_minus.im;
    let half = T::of(0.5);
    // [dd, dq, qd, qq]
    [
        (s + d) * half,
        (q - p) * half,
        (p + q) * half,
        (s - d) * half,
    ]
}

/// Port admittance scan result.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceResponse<T> {
    /// Signed dq-frame frequencies (Hz), in scan order.
    pub freqs_hz: Vec<T>,
    /// Per-frequency 2x2 admittance `[Ydd, Ydq, Yqd, Yqq]` (S).
    pub y_dq: Vec<[Complex<T>; 4]>,
    /// Complex-vector pair (Y+, Y-) per frequency.
    pub y_pm: Vec<(Complex<T>, Complex<T>)>,
    /// Frequencies where (jwI - A) or Z was numerically singular.
    pub singular: Vec<bool>,
}

/// Log-spaced two-sided scan grid over +-[f_min, f_max] Hz, ascending
/// (negative frequencies first).
pub fn two_sided_log_grid<T: Real>(f_min: T, f_max: T, points_per_sign: usize) -> Vec<T> {
    let pos = log_spaced(f_min, f_max, points_per_sign);
    let mut out: Vec<T> = pos.iter().rev().map(|f| -*f).collect();
    out.extend(pos);
    out
}

pub fn log_spaced<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2 && lo > T::zero() && hi > lo);
    let (l0, l1) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| {
            let t = T::from_usize(i).unwrap() / T::from_usize(n - 1).unwrap();
            T::of(10.0).powf(l0 + (l1 - l0) * t)
        })
        .collect()
}

/// Grid-branch-removed port model: the line is replaced by a current
/// injection at the capacitor node, expressed in the system frame.
struct PortModel<T> {
    inner: NonlinearModel<T>,
    /// Reduced-state index -> full-state index.
    map: Vec<usize>,
    delta_red: usize,
    frozen: Option<FrozenControl<T>>,
}

impl<T: Real> PortModel<T> {
    fn new(model: &NonlinearModel<T>, frozen: Option<FrozenControl<T>>) -> Self {
        let n = model.n_states();
        let map: Vec<usize> = (0..n).filter(|i| *i != 4 && *i != 5).collect();
        let delta_full = model.index_of(LABEL_DELTA).unwrap();
        let delta_red = map.iter().position(|i| *i == delta_full).unwrap();
        PortModel { inner: model.clone(), map, delta_red, frozen }
    }

    fn n(&self) -> usize {
        self.map.len()
    }

    fn scales(&self) -> Vec<T> {
        let full = self.inner.state_scales();
        self.map.iter().map(|i| full[*i]).collect()
    }

    /// Reduced dynamics with injection input `u` (system frame, A).
    fn f(&self, x_red: &[T], u: &[T; 2], out: &mut [T]) -> Result<()> {
        let n_full = self.inner.n_states();
        let mut x_full = vec![T::zero(); n_full];
        for (r, f) in self.map.iter().enumerate() {
            x_full[*f] = x_red[r];
        }
        let delta = x_red[self.delta_red];
        // Controller-frame injection: u^c = R(-delta) u^s.
        let (sd, cd) = delta.sin_cos();
        let iin_cd = cd * u[0] + sd * u[1];
        let iin_cq = -sd * u[0] + cd * u[1];
        // The full-model capacitor rows subtract i_g; feeding i_g = -i_in
        // reproduces the injection node equation, and the droop power sees
        // i_out = -i_in through the same entries.
        x_full[4] = -iin_cd;
        x_full[5] = -iin_cq;

        let mut dx_full = vec![T::zero(); n_full];
        self.inner.derivatives_with(&x_full, &mut dx_full, self.frozen.as_ref())?;
        for (r, f) in self.map.iter().enumerate() {
            out[r] = dx_full[*f];
        }
        Ok(())
    }

    /// Port voltage in the system frame.
    fn y(&self, x_red: &[T]) -> [T; 2] {
        let v_cd = x_red[2];
        let v_cq = x_red[3];
        let delta = x_red[self.delta_red];
        let (sd, cd) = delta.sin_cos();
        [cd * v_cd - sd * v_cq, sd * v_cd + cd * v_cq]
    }
}

/// Port admittance of the inverter at the filter-capacitor node over the
/// given dq-frame frequencies.
///
/// The operating point comes from the full model's equilibrium (the grid
/// branch sets it); the scan then removes the branch and perturbs a current
/// injection around the equilibrium line current. With `frozen_controller`
/// the controller outputs are pinned at their equilibrium values, leaving
/// the passive R_f-L_f + C_f network.
pub fn port_admittance<T: Real>(
    model: &NonlinearModel<T>,
    target: &OperatingTarget<T>,
    freqs_hz: &[T],
    frozen_controller: bool,
) -> Result<AdmittanceResponse<T>> {
    let eq = solve(model, target, None)?;
    port_admittance_at(&eq, freqs_hz, frozen_controller)
}

/// [`port_admittance`] at an already-solved operating point.
pub fn port_admittance_at<T: Real>(
    eq: &Equilibrium<T>,
    freqs_hz: &[T],
    frozen_controller: bool,
) -> Result<AdmittanceResponse<T>> {
    let model = &eq.model;
    let frozen = frozen_controller.then(|| FrozenControl {
        v_id: eq.signals.v_id,
        v_iq: eq.signals.v_iq,
        omega_ctrl: model.sys.omega_star(),
    });
    let port = PortModel::new(model, frozen);

    // Reduced equilibrium and the injection that holds it.
    let x_red: Vec<T> = port.map.iter().map(|i| eq.x_star[*i]).collect();
    let delta = eq.signals.delta;
    let (sd, cd) = delta.sin_cos();
    let (igd, igq) = (eq.signals.i_gd, eq.signals.i_gq);
    // u* = -R(delta) i_g^c: the source absorbs what the line drew.
    let u_star = [-(cd * igd - sd * igq), -(sd * igd + cd * igq)];

    let n = port.n();
    let scales = port.scales();
    let a = jacobian_fd(n, n, &scales, &x_red, |x, out| port.f(x, &u_star, out))?;

    let i_peak = T::of(2.0).sqrt() * model.sys.s_rated / (T::of(3.0).sqrt() * model.sys.v_g);
    let u_scales = [i_peak, i_peak];
    let b = jacobian_fd(n, 2, &u_scales, &u_star, |u, out| {
        port.f(&x_red, &[u[0], u[1]], out)
    })?;
    let c = jacobian_fd(2, n, &scales, &x_red, |x, out| {
        let y = port.y(x);
        out[0] = y[0];
        out[1] = y[1];
        Ok(())
    })?;
    // y does not depend on u directly: D = 0.

    let mut y_dq = Vec::with_capacity(freqs_hz.len());
    let mut y_pm = Vec::with_capacity(freqs_hz.len());
    let mut singular = Vec::with_capacity(freqs_hz.len());
    let zero = Complex::new(T::zero(), T::zero());

    for &f_hz in freqs_hz {
        let w = T::of(2.0) * T::PI() * f_hz;
        // (jwI - A) X = B
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex::new(-a[(i, j)], T::zero());
            }
            m[(i, i)] += Complex::new(T::zero(), w);
        }
        let mut bc = CMat::zeros(n, 2);
        for i in 0..n {
            for j in 0..2 {
                bc[(i, j)] = Complex::new(b[(i, j)], T::zero());
            }
        }
        let x = match clu_solve(m, &bc) {
            Ok(x) => x,
            Err(_) => {
                y_dq.push([zero; 4]);
                y_pm.push((zero, zero));
                singular.push(true);
                continue;
            }
        };
        // Z = C X (2x2), then Y = Z^{-1}.
        let mut z = [zero; 4];
        for r in 0..2 {
            for ccol in 0..2 {
                let mut acc = zero;
                for k in 0..n {
                    acc += Complex::new(c[(r, k)], T::zero()) * x[(k, ccol)];
                }
                z[r * 2 + ccol] = acc;
            }
        }
        let det = z[0] * z[3] - z[1] * z[2];
        let scale = z.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        if det.norm() <= T::epsilon() * scale * scale {
            y_dq.push([zero; 4]);
            y_pm.push((zero, zero));
            singular.push(true);
            continue;
        }
        let y = [z[3] / det, -z[1] / det, -z[2] / det, z[0] / det];
        y_pm.push(complex_vector_reduce(&y));
        y_dq.push(y);
        singular.push(false);
    }

    Ok(AdmittanceResponse { freqs_hz: freqs_hz.to_vec(), y_dq, y_pm, singular })
}

/// Analytic dq admittance of the passive R_f-L_f series branch (terminated
/// at the frozen inverter voltage) in parallel with the C_f shunt, at dq
/// frequency `f_hz`; the oracle for frozen-controller scans.
pub fn passive_network_admittance<T: Real>(
    sys: &SystemParams<T>,
    f_hz: T,
) -> [Complex<T>; 4] {
    let s = Complex::new(T::zero(), T::of(2.0) * T::PI() * f_hz);
    let w0 = sys.omega_star();
    let zl = s * sys.l_f + Complex::new(sys.r_f, T::zero());
    let xl = Complex::new(T::zero(), T::zero()) + Complex::new(w0 * sys.l_f, T::zero());
    // Z_RL = [[zl, -xl],[xl, zl]]; Y_RL = Z^{-1}.
    let det = zl * zl + xl * xl;
    let y_rl = [zl / det, xl / det, -xl / det, zl / det];
    let sc = s * sys.c_f;
    let xc = Complex::new(w0 * sys.c_f, T::zero());
    // Y_C = C [[s, -w0],[w0, s]]
    [
        y_rl[0] + sc,
        y_rl[1] - xc,
        y_rl[2] + xc,
        y_rl[3] + sc,
    ]
}

/// Closed q-axis current loop extracted from the assembled dynamics with the
/// synchronization and the complementary axis frozen: the state-space route
/// to the Norton equivalent.
pub fn norton_q_from_state_space<T: Real>(
    sys: &SystemParams<T>,
    ctrl: &ControlParams<T>,
    freqs_hz: &[T],
) -> Result<Vec<NortonQ<T>>> {
    // States: [i_lq, xi_iq, (x_del_q)]; inputs: [i_lq_ref, v_cq].
    let nd = ctrl.delay.state_count() / 2;
    let n = 2 + nd;
    let f = |x: &[T], u: &[T], out: &mut [T]| -> Result<()> {
        let e = u[0] - x[0];
        let (raw, dxi) = crate::blocks::pi_eval(
            crate::blocks::PiGains { kp: ctrl.kpi_q, ki: ctrl.kii_q },
            x[1],
            e,
        );
        let v_iq = if nd == 1 {
            let (y, dx_del) = crate::blocks::delay_eval(ctrl.delay, x[2], raw);
            out[2] = dx_del;
            y
        } else {
            raw
        };
        out[0] = (v_iq - u[1] - sys.r_f * x[0]) / sys.l_f;
        out[1] = dxi;
        Ok(())
    };
    extract_siso_pair(n, f, freqs_hz)
        .map(|g| g.into_iter().map(|(g0, g1)| NortonQ { gain: g0, y_out: -g1 }).collect())
}

/// Closed d-axis dual loop (voltage + current around the capacitor) with
/// frozen synchronization: the state-space route to the Thevenin equivalent.
pub fn thevenin_d_from_state_space<T: Real>(
    sys: &SystemParams<T>,
    ctrl: &ControlParams<T>,
    freqs_hz: &[T],
) -> Result<Vec<TheveninD<T>>> {
    // States: [i_ld, v_cd, xi_vd, xi_id, (x_del_d)]; inputs: [v_cd_ref, i_gd];
    // output: v_cd.
    let nd = ctrl.delay.state_count() / 2;
    let n = 4 + nd;
    let f = |x: &[T], u: &[T], out: &mut [T]| -> Result<()> {
        let ev = u[0] - x[1];
        let (i_ref, dxiv) = crate::blocks::pi_eval(
            crate::blocks::PiGains { kp: ctrl.kpv_d, ki: ctrl.kiv_d },
            x[2],
            ev,
        );
        let e = i_ref - x[0];
        let (raw, dxii) = crate::blocks::pi_eval(
            crate::blocks::PiGains { kp: ctrl.kpi_d, ki: ctrl.kii_d },
            x[3],
            e,
        );
        let v_id = if nd == 1 {
            let (y, dx_del) = crate::blocks::delay_eval(ctrl.delay, x[4], raw);
            out[4] = dx_del;
            y
        } else {
            raw
        };
        out[0] = (v_id - x[1] - sys.r_f * x[0]) / sys.l_f;
        out[1] = (x[0] - u[1]) / sys.c_f;
        out[2] = dxiv;
        out[3] = dxii;
        Ok(())
    };
    // Output is state x[1] (v_cd) instead of x[0]; reuse the helper with a
    // custom C row.
    let scales = vec![T::one(); n];
    let u0 = [T::zero(), T::zero()];
    let a = jacobian_fd(n, n, &scales, &vec![T::zero(); n], |x, out| f(x, &u0, out))?;
    let b = jacobian_fd(n, 2, &[T::one(), T::one()], &u0, |u, out| {
        f(&vec![T::zero(); n], u, out)
    })?;
    let g = freq_response(&a, &b, &[1], freqs_hz)?;
    Ok(g
        .into_iter()
        .map(|row| TheveninD { gain: row[0], z_out: -row[1] })
        .collect())
}

/// Linearize a two-input system around zero and return per-frequency
/// responses of output = state 0.
fn extract_siso_pair<T, F>(
    n: usize,
    f: F,
    freqs_hz: &[T],
) -> Result<Vec<(Complex<T>, Complex<T>)>>
where
    T: Real,
    F: Fn(&[T], &[T], &mut [T]) -> Result<()>,
{
    let scales = vec![T::one(); n];
    let x0 = vec![T::zero(); n];
    let u0 = [T::zero(), T::zero()];
    let a = jacobian_fd(n, n, &scales, &x0, |x, out| f(x, &u0, out))?;
    let b = jacobian_fd(n, 2, &[T::one(), T::one()], &u0, |u, out| f(&x0, u, out))?;
    let g = freq_response(&a, &b, &[0], freqs_hz)?;
    Ok(g.into_iter().map(|row| (row[0], row[1])).collect())
}

/// Rows of G(jw) = C (jwI - A)^{-1} B for C selecting plain states.
fn freq_response<T: Real>(
    a: &Mat<T>,
    b: &Mat<T>,
    out_states: &[usize],
    freqs_hz: &[T],
) -> Result<Vec<Vec<Complex<T>>>> {
    let n = a.rows;
    let m = b.cols;
    let mut result = Vec::with_capacity(freqs_hz.len());
    for &f_hz in freqs_hz {
        let w = T::of(2.0) * T::PI() * f_hz;
        let mut lhs = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                lhs[(i, j)] = Complex::new(-a[(i, j)], T::zero());
            }
            lhs[(i, i)] += Complex::new(T::zero(), w);
        }
        let mut rhs = CMat::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                rhs[(i, j)] = Complex::new(b[(i, j)], T::zero());
            }
        }
        let x = clu_solve(lhs, &rhs)?;
        // One row per requested output state; all inputs.
        let mut rows: Vec<Complex<T>> = Vec::with_capacity(out_states.len() * m);
        for &os in out_states {
            for j in 0..m {
                rows.push(x[(os, j)]);
            }
        }
        result.push(rows);
    }
    Ok(result)
}
