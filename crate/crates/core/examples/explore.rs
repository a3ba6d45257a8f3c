use invstab_core::equilibrium::{solve, OperatingTarget};
use invstab_core::params::{derive_bases, ControlMode, DelaySpec};
use invstab_core::plant::bench_model;
use invstab_core::smallsignal::{a_matrix, dominant_mode, eigenvalues, pole_sweep};

fn main() {
    let bases = derive_bases(1500.0, 200.0, 50.0).unwrap();
    let target = OperatingTarget::bench();

    for mode in ControlMode::ALL {
        println!("=== {mode} at bench (SCR 1.4) ===");
        let m = bench_model::<f64>(mode, DelaySpec::None);
        match solve(&m, &target, None) {
            Ok(eq) => {
                let s = &eq.signals;
                println!(
                    "  delta={:.4} v_cd={:.2} v_cq={:.2} i_gd={:.3} i_gq={:.3} p={:.1} q={:.1} iters={}",
                    s.delta, s.v_cd, s.v_cq, s.i_gd, s.i_gq, s.p, s.q, eq.iterations
                );
                let a = a_matrix(&eq.model, &eq.x_star).unwrap();
                let mut eigs = eigenvalues(&a).unwrap();
                eigs.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap());
                for e in eigs.iter().take(6) {
                    println!("    eig {:10.3} + j{:10.3}  (f = {:7.2} Hz)", e.re, e.im, e.im.abs() / std::f64::consts::TAU);
                }
            }
            Err(e) => println!("  EQ FAILED: {e}"),
        }
    }

    println!("\n=== hybrid_pll stability vs z_g ===");
    let m = bench_model::<f64>(ControlMode::HybridPll, DelaySpec::None);
    let zg: Vec<f64> = (0..17).map(|k| 0.2 + 0.04375 * k as f64).collect();
    let map = pole_sweep(&m, &bases, &target, &zg).unwrap();
    for (k, z) in map.sweep_values.iter().enumerate() {
        match (&map.eig_sets[k], map.stability_flags[k]) {
            (Some(eigs), Some(st)) => {
                let dm = dominant_mode(eigs);
                println!("  z_g={z:.3}  stable={st}  dom sigma={:9.3} f={:7.2} Hz", dm.sigma, dm.freq_hz);
            }
            _ => println!("  z_g={z:.3}  infeasible"),
        }
    }

    println!("\n=== gfl_pll stability vs z_g ===");
    let m = bench_model::<f64>(ControlMode::GflPll, DelaySpec::None);
    let map = pole_sweep(&m, &bases, &target, &zg).unwrap();
    for (k, z) in map.sweep_values.iter().enumerate() {
        match (&map.eig_sets[k], map.stability_flags[k]) {
            (Some(eigs), Some(st)) => {
                let dm = dominant_mode(eigs);
                println!("  z_g={z:.3}  stable={st}  dom sigma={:9.3} f={:7.2} Hz", dm.sigma, dm.freq_hz);
            }
            _ => println!("  z_g={z:.3}  infeasible"),
        }
    }

    println!("\n=== gfm_droop / hybrid_droop strong-grid sweep 0.2 -> 0.14 ===");
    let zg2: Vec<f64> = (0..13).map(|k| 0.2 - 0.005 * k as f64).collect();
    for mode in [ControlMode::GfmDroop, ControlMode::HybridDroop] {
        println!("  -- {mode}");
        let m = bench_model::<f64>(mode, DelaySpec::None);
        let map = pole_sweep(&m, &bases, &target, &zg2).unwrap();
        for (k, z) in map.sweep_values.iter().enumerate() {
            match (&map.eig_sets[k], map.stability_flags[k]) {
                (Some(eigs), Some(st)) => {
                    let dm = dominant_mode(eigs);
                    println!("    z_g={z:.3}  stable={st}  dom sigma={:9.3} f={:7.2} Hz", dm.sigma, dm.freq_hz);
                }
                _ => println!("    z_g={z:.3}  infeasible"),
            }
        }
    }
}
