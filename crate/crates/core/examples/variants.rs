//! Scratch experiment harness: closure-based re-implementations of the four
//! controllers with modeling knobs, to locate the wiring that reproduces the
//! published stability stories. Not part of the library.

use invstab_core::linalg::{eigenvalues, lu_solve, Mat};
use invstab_core::smallsignal::{dominant_mode, jacobian_fd};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Sync {
    Droop,
    Pll,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum DAxis {
    Voltage, // dual loop
    Current, // current loop (GFL)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum QAxis {
    Voltage,
    Current,
}

#[derive(Clone, Copy, Debug)]
struct Knobs {
    d: DAxis,
    q: QAxis,
    sync: Sync,
    // gain multipliers
    kp_pll_mult: f64,
    ki_pll_mult: f64,
    // droop power from converter current instead of grid current
    power_from_il: bool,
    // PLL input uses grid-side reconstructed voltage v_c - Zc*ig? (off)
    // feedforward of measured terminal voltage into current loop output
    v_feedforward: bool,
    // omega*L decoupling terms in current loops
    decouple: bool,
    p_ref: f64,
    v_ref: f64,
    i_lq_ref: f64,
    l_g: f64,
}

struct Sys {
    l_f: f64,
    r_f: f64,
    c_f: f64,
    r_g: f64,
    v_hat: f64,
    w0: f64,
}

fn sys() -> Sys {
    Sys {
        l_f: 3.6e-3,
        r_f: 0.08,
        c_f: 30e-6,
        r_g: 0.33,
        v_hat: (2.0f64 / 3.0).sqrt() * 200.0,
        w0: TAU * 50.0,
    }
}

const KPV: f64 = 0.1;
const KIV: f64 = 10.0;
const KPI: f64 = 12.0;
const KII: f64 = 5.0;
const MP: f64 = TAU * 2.5e-5;
const WF: f64 = TAU;
const KP_PLL: f64 = 0.5;
const KI_PLL: f64 = 12.0;

// State layout: [i_ld, i_lq, v_cd, v_cq, i_gd, i_gq, xi_d, xi_q, (xi_vd), (xi_vq), sync, delta]
// xi_vd/vq present only when that axis has a voltage loop. sync = p_f or xi_pll.
fn n_states(k: &Knobs) -> usize {
    8 + (k.d == DAxis::Voltage) as usize + (k.q == QAxis::Voltage) as usize + 2
}

fn f(k: &Knobs, s: &Sys, x: &[f64], dx: &mut [f64], i_ld_ref_gfl: f64) {
    let (i_ld, i_lq, v_cd, v_cq, i_gd, i_gq) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    let xi_d = x[6];
    let xi_q = x[7];
    let mut idx = 8;
    let xi_vd = if k.d == DAxis::Voltage {
        idx += 1;
        x[idx - 1]
    } else {
        0.0
    };
    let xi_vq = if k.q == QAxis::Voltage {
        idx += 1;
        x[idx - 1]
    } else {
        0.0
    };
    let sync = x[idx];
    let delta = x[idx + 1];

    let (p_meas_d, p_meas_q) = if k.power_from_il { (i_ld, i_lq) } else { (i_gd, i_gq) };
    let p = 1.5 * (v_cd * p_meas_d + v_cq * p_meas_q);

    let omega = match k.sync {
        Sync::Droop => s.w0 + MP * (k.p_ref - sync),
        Sync::Pll => s.w0 + KP_PLL * k.kp_pll_mult * v_cq + KI_PLL * k.ki_pll_mult * sync,
    };

    // d axis reference
    let (i_ld_ref, d_xi_vd) = match k.d {
        DAxis::Voltage => (KPV * (k.v_ref - v_cd) + KIV * xi_vd, k.v_ref - v_cd),
        DAxis::Current => (i_ld_ref_gfl, 0.0),
    };
    let (i_lq_ref, d_xi_vq) = match k.q {
        QAxis::Voltage => (KPV * (0.0 - v_cq) + KIV * xi_vq, -v_cq),
        QAxis::Current => (k.i_lq_ref, 0.0),
    };

    let e_d = i_ld_ref - i_ld;
    let e_q = i_lq_ref - i_lq;
    let mut v_id = KPI * e_d + KII * xi_d;
    let mut v_iq = KPI * e_q + KII * xi_q;
    if k.v_feedforward {
        v_id += v_cd;
        v_iq += v_cq;
    }
    if k.decouple {
        v_id -= omega * s.l_f * i_lq;
        v_iq += omega * s.l_f * i_ld;
    }

    let v_gd = s.v_hat * delta.cos();
    let v_gq = -s.v_hat * delta.sin();

    dx[0] = (v_id - v_cd - s.r_f * i_ld) / s.l_f + omega * i_lq;
    dx[1] = (v_iq - v_cq - s.r_f * i_lq) / s.l_f - omega * i_ld;
    dx[2] = (i_ld - i_gd) / s.c_f + omega * v_cq;
    dx[3] = (i_lq - i_gq) / s.c_f - omega * v_cd;
    dx[4] = (v_cd - v_gd - s.r_g * i_gd) / k.l_g + omega * i_gq;
    dx[5] = (v_cq - v_gq - s.r_g * i_gq) / k.l_g - omega * i_gd;
    dx[6] = e_d;
    dx[7] = e_q;
    let mut w = 8;
    if k.d == DAxis::Voltage {
        dx[w] = d_xi_vd;
        w += 1;
    }
    if k.q == QAxis::Voltage {
        dx[w] = d_xi_vq;
        w += 1;
    }
    dx[w] = match k.sync {
        Sync::Droop => WF * (p - sync),
        Sync::Pll => v_cq,
    };
    dx[w + 1] = omega - s.w0;
}

/// Newton solve; for DAxis::Current the d current ref is augmented to hit p_ref.
fn equilibrium(k: &Knobs, s: &Sys) -> Option<Vec<f64>> {
    let n = n_states(k);
    let aug = (k.d == DAxis::Current) as usize;
    let dim = n + aug;
    let mut y = vec![0.0; dim];
    // flat start
    y[2] = if k.d == DAxis::Voltage { k.v_ref } else { s.v_hat };
    let i0 = k.p_ref / (1.5 * y[2]);
    y[0] = i0;
    y[4] = i0;
    y[1] = k.i_lq_ref;
    y[5] = k.i_lq_ref - s.w0 * s.c_f * y[2];
    y[6] = (y[2] + s.r_f * y[0] - s.w0 * s.l_f * y[1]) / KII;
    y[7] = (s.r_f * y[1] + s.w0 * s.l_f * y[0]) / KII;
    let mut w = 8;
    if k.d == DAxis::Voltage {
        y[w] = y[0] / KIV;
        w += 1;
    }
    if k.q == QAxis::Voltage {
        y[w] = y[1] / KIV;
        w += 1;
    }
    if k.sync == Sync::Droop {
        y[w] = k.p_ref;
    }
    y[w + 1] = (k.p_ref * s.w0 * k.l_g / (1.5 * y[2] * s.v_hat)).min(1.0);
    if aug == 1 {
        y[n] = i0;
    }

    let scales = vec![1.0; dim];
    let eval = |y: &[f64], out: &mut [f64]| {
        let iref = if aug == 1 { y[n] } else { 0.0 };
        f(k, s, &y[..n], &mut out[..n], iref);
        for o in out[..n].iter_mut() {
            *o /= 1000.0; // rough row scaling
        }
        if aug == 1 {
            let p = 1.5 * (y[2] * y[4] + y[3] * y[5]);
            out[n] = (p - k.p_ref) / 1500.0;
        }
        Ok(())
    };
    let mut g = vec![0.0; dim];
    eval(&y, &mut g).ok()?;
    for _ in 0..80 {
        let norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm < 1e-12 {
            return Some(y[..n].to_vec());
        }
        let jac = jacobian_fd(dim, dim, &scales, &y, |yy, oo| eval(yy, oo)).ok()?;
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let step = lu_solve(jac, &rhs).ok()?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
            let mut gt = vec![0.0; dim];
            if eval(&trial, &mut gt).is_ok() {
                let tn = gt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if tn < norm {
                    y = trial;
                    g = gt;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-7 {
                return None;
            }
        }
    }
    None
}

fn eigs_at(k: &Knobs, s: &Sys) -> Option<(Vec<num_complex::Complex<f64>>, f64, f64)> {
    let x = equilibrium(k, s)?;
    let n = n_states(k);
    let aug_ref = if k.d == DAxis::Current {
        // recover the solved ref from the equilibrium (i_ld_ref = i_ld at eq)
        x[0]
    } else {
        0.0
    };
    let scales = vec![1.0; n];
    let a = jacobian_fd(n, n, &scales, &x, |xx, oo| {
        f(k, s, xx, oo, aug_ref);
        Ok(())
    })
    .ok()?;
    let e = eigenvalues(&a).ok()?;
    let delta = x[n - 1];
    let p = 1.5 * (x[2] * x[4] + x[3] * x[5]);
    Some((e, delta, p))
}

fn story(name: &str, k_base: Knobs, s: &Sys) {
    // GFL weak sweep & flip
    println!("--- {name}");
    let sweep = |k: &Knobs, zs: &[f64]| {
        let mut last_stable = f64::NAN;
        let mut first_unstable: Option<(f64, f64, f64)> = None;
        for &z in zs {
            let lg = ((26.6667 * z).powi(2) - 0.33f64.powi(2)).sqrt() / (TAU * 50.0);
            let kk = Knobs { l_g: lg, ..*k };
            match eigs_at(&kk, s) {
                Some((e, _, _)) => {
                    let unstable = e.iter().any(|v| v.re > 0.0);
                    if unstable && first_unstable.is_none() {
                        // dominant unstable freq
                        let worst = e
                            .iter()
                            .filter(|v| v.re > 0.0)
                            .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap())
                            .unwrap();
                        first_unstable = Some((z, worst.re, worst.im.abs() / TAU));
                    }
                    if !unstable {
                        last_stable = z;
                    }
                }
                None => println!("    z={z:.3} no equilibrium"),
            }
        }
        (last_stable, first_unstable)
    };

    let zs_weak: Vec<f64> = (0..17).map(|i| 0.2 + 0.04375 * i as f64).collect();
    let zs_strong: Vec<f64> = (0..13).map(|i| 0.2 - 0.005 * i as f64).collect();

    let gfl = Knobs { d: DAxis::Current, q: QAxis::Current, sync: Sync::Pll, ..k_base };
    let (ls, fu) = sweep(&gfl, &zs_weak);
    println!("  GFL weak:    last stable z={ls:.3}, first unstable {fu:?}");

    let hp = Knobs { d: DAxis::Voltage, q: QAxis::Current, sync: Sync::Pll, ..k_base };
    let (ls, fu) = sweep(&hp, &zs_weak);
    println!("  HYB-PLL weak: last stable z={ls:.3}, first unstable {fu:?}");

    let gfm = Knobs { d: DAxis::Voltage, q: QAxis::Voltage, sync: Sync::Droop, ..k_base };
    let (ls, fu) = sweep(&gfm, &zs_strong);
    println!("  GFM strong:  last stable z={ls:.3}, first unstable {fu:?}");

    let hd = Knobs { d: DAxis::Voltage, q: QAxis::Current, sync: Sync::Droop, ..k_base };
    let (ls, fu) = sweep(&hd, &zs_strong);
    println!("  HYB-DRP strong: last stable z={ls:.3}, first unstable {fu:?}");
}

fn main() {
    let s = sys();
    let base = Knobs {
        d: DAxis::Voltage,
        q: QAxis::Current,
        sync: Sync::Pll,
        kp_pll_mult: 1.0,
        ki_pll_mult: 1.0,
        power_from_il: false,
        v_feedforward: false,
        decouple: false,
        p_ref: 750.0,
        v_ref: (2.0f64 / 3.0).sqrt() * 200.0,
        i_lq_ref: 0.0,
        l_g: 0.0606,
    };

    story("baseline (spec reading)", base, &s);
    story(
        "PLL gains x omega* (pu-frequency output)",
        Knobs { kp_pll_mult: TAU * 50.0, ki_pll_mult: TAU * 50.0, ..base },
        &s,
    );
    story(
        "PLL gains: v in pu, output rad/s (divide by V)",
        Knobs { kp_pll_mult: 1.0 / 163.3, ki_pll_mult: 1.0 / 163.3, ..base },
        &s,
    );
    story(
        "PLL: v in pu, out pu*w0 ",
        Knobs { kp_pll_mult: TAU * 50.0 / 163.3, ki_pll_mult: TAU * 50.0 / 163.3, ..base },
        &s,
    );
    story("power from i_l", Knobs { power_from_il: true, ..base }, &s);
    story("voltage feedforward", Knobs { v_feedforward: true, ..base }, &s);
    story("wL decoupling", Knobs { decouple: true, ..base }, &s);
    story(
        "feedforward + decoupling",
        Knobs { v_feedforward: true, decouple: true, ..base },
        &s,
    );
    story("p_ref = 1500 (1 pu)", Knobs { p_ref: 1500.0, ..base }, &s);
}
