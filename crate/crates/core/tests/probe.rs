// Scratch numerical probes used while tuning grid sizes; kept out of the
// default test run.

use dplab_core::grid::{Field, Grid};
use dplab_core::solver::{SolverConfig, run};
use dplab_core::spectral;

#[test]
#[ignore]
fn probe_edge_floor() {
    for n in [256usize, 512, 1024] {
        let g = Grid::new(n, 30.0).unwrap();
        let u0 = Field::from_fn(g.clone(), |x| (-x * x).exp());
        let cfg = SolverConfig {
            dt: 1e-3,
            t_end: 0.3,
            snapshot_stride: 100,
            ..Default::default()
        };
        match run(&u0, &cfg) {
            Ok(series) => {
                let u = &series.final_state().u;
                let margin = (n as f64 * 0.05).ceil() as usize;
                let left: f64 =
                    u.values()[..margin].iter().fold(0.0, |m, v| m.max(v.abs()));
                let right: f64 =
                    u.values()[n - margin..].iter().fold(0.0, |m, v| m.max(v.abs()));
                // Interior tail profile
                let probe: Vec<(f64, f64)> = (0..6)
                    .map(|k| {
                        let x = -29.0 + k as f64 * 2.0;
                        (x, spectral::interpolate(u, x))
                    })
                    .collect();
                println!("n = {n}: edge max left {left:.3e} right {right:.3e}; profile {probe:?}");
            }
            Err(e) => println!("n = {n}: run failed: {e}"),
        }
    }
}

#[test]
#[ignore]
fn probe_n512_floor() {
    let g = Grid::new(512, 30.0).unwrap();
    let u0 = Field::from_fn(g.clone(), |x| (-x * x).exp());
    let rhs = dplab_core::solver::dp_rhs(&u0).unwrap();
    println!(
        "u_t(-30) = {:.3e}, u_t(+29.88) = {:.3e}, sup near edges {:.3e}",
        rhs.values()[0],
        rhs.values()[511],
        rhs.values()[..13].iter().chain(&rhs.values()[499..]).fold(0.0f64, |m, v| m.max(v.abs()))
    );
    for (n, dt, dealias) in [
        (512usize, 5e-3, true),
        (512, 2.5e-3, true),
        (512, 1e-3, true),
        (512, 5e-3, false),
        (1024, 5e-3, true),
    ] {
        let g = Grid::new(n, 30.0).unwrap();
        let u0 = Field::from_fn(g.clone(), |x| (-x * x).exp());
        let mut state = dplab_core::solver::SolverState::new(0.0, u0).unwrap();
        let steps = (0.1 / dt) as usize;
        let mut edge_at = |state: &dplab_core::solver::SolverState| -> f64 {
            let u = &state.u;
            u.values()[..13].iter().chain(&u.values()[n - 13..]).fold(0.0, |m, v| m.max(v.abs()))
        };
        let mut last = 0.0;
        for k in 0..steps {
            match dplab_core::solver::step_with(&state, dt, dealias) {
                Ok(next) => state = next,
                Err(e) => {
                    println!("n={n} dt={dt} dealias={dealias}: step {k} failed: {e}");
                    break;
                }
            }
            last = edge_at(&state);
        }
        println!("n={n} dt={dt} dealias={dealias}: t={:.3} edge {last:.3e}", state.t);
    }
}

#[test]
#[ignore]
fn probe_seam_value() {
    let g = Grid::new(1024, 30.0).unwrap();
    let u0 = Field::from_fn(g.clone(), |x| (-x * x).exp());
    let mut state = dplab_core::solver::SolverState::new(0.0, u0).unwrap();
    for k in 1..=500 {
        state = dplab_core::solver::step(&state, 1e-3).unwrap_or_else(|e| {
            panic!("step {k} failed: {e}");
        });
        if k % 100 == 0 {
            let v = state.u.values();
            println!(
                "t = {:.2}: u[0] = {:+.3e}, u[1] = {:+.3e}, u[2] = {:+.3e}, u[n-2] = {:+.3e}, u[n-1] = {:+.3e}, u(28.5) = {:+.3e}, u(-28.5) = {:+.3e}",
                state.t, v[0], v[1], v[2], v[1022], v[1023],
                spectral::interpolate(&state.u, 28.5),
                spectral::interpolate(&state.u, -28.5),
            );
        }
    }
}

#[test]
#[ignore]
fn probe_conjugation_error_source() {
    use dplab_core::characteristics::{conjugation_invariant, evolve_flow};
    for (n, t_end, stride) in
        [(1024usize, 0.5, 10usize), (2048, 0.5, 10), (2048, 1.0, 10), (4096, 1.0, 10)]
    {
        let g = Grid::new(n, 30.0).unwrap();
        let u0 = Field::from_fn(g, |x| (-x * x).exp());
        let series = run(
            &u0,
            &SolverConfig { dt: 1e-3, t_end, snapshot_stride: stride, ..Default::default() },
        )
        .unwrap();
        let seeds: Vec<f64> = (-6..=6).map(|i| i as f64 * 0.5).collect();
        let flow = evolve_flow(&series, &seeds).unwrap();
        let residuals = conjugation_invariant(&series, &flow).unwrap();
        let mut sup = 0.0f64;
        let mut at = (0usize, 0usize);
        for (i, row) in residuals.iter().enumerate() {
            for (j, &r) in row.iter().enumerate() {
                if r.abs() > sup {
                    sup = r.abs();
                    at = (i, j);
                }
            }
        }
        println!(
            "n {n} t_end {t_end} stride {stride}: sup {sup:.3e} at t = {:.3}, seed = {}, q = {:.4}, qx = {:.6}",
            flow.times[at.0], flow.seeds[at.1], flow.q[at.0][at.1], flow.qx[at.0][at.1]
        );
    }
}

#[test]
#[ignore]
fn probe_ode_branch() {
    use dplab_core::immersion::{ArgConvention, SecondFormParams, second_form_ode};
    let g = Grid::new(1024, 30.0).unwrap();
    let b0 = 1.0;
    let x_start = 0.5;
    let params = SecondFormParams::new(3.0, b0, -1, -b0 * (4.0f64 * x_start).exp()).unwrap();
    match second_form_ode(&params, &g, 0.5, (0.5, 1.5), ArgConvention::DzHalf) {
        Ok(sff) => {
            let delta = sff.delta.as_ref().unwrap();
            for j in (0..sff.len()).step_by(4) {
                let x = g.node(sff.start + j);
                println!(
                    "x = {x:.3}: b = {:+.4e}, a = {:+.4e}, c = {:+.4e}, a+c = {:+.4e}, -sqrt(D) = {:+.4e}",
                    sff.b[j], sff.a[j], sff.c[j],
                    sff.a[j] + sff.c[j],
                    -delta[j].sqrt()
                );
            }
        }
        Err(e) => println!("ode failed: {e}"),
    }
}

#[test]
#[ignore]
fn probe_bump_spectrum() {
    for (w, n) in [(6.0f64, 2048usize), (8.0, 2048), (8.0, 4096)] {
        let g = Grid::new(n, 40.0).unwrap();
        let u0 = Field::from_fn(g.clone(), |x| {
            let s = x / w;
            if s.abs() < 1.0 { (-1.0 / (1.0 - s * s)).exp() } else { 0.0 }
        });
        let mags = spectral::spectrum_magnitudes(&u0);
        let tail: f64 = mags[n / 2 - n / 16..=n / 2].iter().fold(0.0, |m, &v| m.max(v));
        let kmax = g.wavenumber(n / 2 - 1).abs();
        println!("bump half-width {w}, n = {n}: top-tail coefficient {tail:.3e}, kmax {kmax:.1}");
    }
}

#[test]
#[ignore]
fn probe_gaussian_steepening() {
    let g = Grid::new(2048, 30.0).unwrap();
    let u0 = Field::from_fn(g, |x| (-x * x).exp());
    let series = run(
        &u0,
        &SolverConfig { dt: 1e-3, t_end: 1.2, snapshot_stride: 100, ..Default::default() },
    )
    .unwrap();
    for (snap, row) in series.snapshots.iter().zip(&series.log) {
        let mags = spectral::spectrum_magnitudes(&snap.u);
        let n = snap.u.grid().n();
        let top: f64 = mags[n / 2 - 40..=n / 2].iter().fold(0.0, |m, &v| m.max(v));
        let mid = mags[n / 4];
        println!(
            "t = {:.2}: min u_x = {:+.4}, sup u = {:.4}, |c(kmax)| ~ {top:.2e}, |c(kmax/2)| ~ {mid:.2e}",
            row.t, row.min_ux, row.sup_u
        );
    }
}

#[test]
#[ignore]
fn probe_acceptance_configs() {
    use dplab_core::characteristics::{conjugation_invariant, evolve_flow};
    use dplab_core::geometry::{self, CoframeParams};

    // (A) Criterion-1 configuration: A=1, N=1024, t in [0,1].
    let g = Grid::new(1024, 30.0).unwrap();
    let u0 = Field::from_fn(g, |x| (-x * x).exp());
    let cfg = SolverConfig { dt: 1e-3, t_end: 1.0, snapshot_stride: 100, ..Default::default() };
    match run(&u0, &cfg) {
        Ok(series) => {
            let mut worst_k: f64 = 0.0;
            let mut worst_r: f64 = 0.0;
            for snap in &series.snapshots {
                let td = snap.time_derivatives().unwrap();
                for sign in [1i8, -1] {
                    for mu in [-1.0, 0.0, 0.5, 2.0] {
                        let cf =
                            geometry::coframe(snap, CoframeParams::new(mu, sign).unwrap()).unwrap();
                        let c = geometry::gauss_curvature_with(&cf, &td, 1e-3).unwrap();
                        worst_k = worst_k.max(c.max_abs_k_plus_one);
                        let (r1, r2, r3) = geometry::structure_residuals_with(&cf, &td).unwrap();
                        worst_r =
                            worst_r.max(r1.sup_norm()).max(r2.sup_norm()).max(r3.sup_norm());
                    }
                }
            }
            println!("A=1 N=1024 completes: worst |K+1| = {worst_k:.3e}, worst structure = {worst_r:.3e}");
        }
        Err(e) => println!("A=1 N=1024 run FAILED: {e}"),
    }

    // (B) Gentler characteristics configuration: A=0.5, N=1024, t in [0,1].
    let g = Grid::new(1024, 30.0).unwrap();
    let u0 = Field::from_fn(g, |x| 0.5 * (-x * x).exp());
    let series = run(
        &u0,
        &SolverConfig { dt: 1e-3, t_end: 1.0, snapshot_stride: 10, ..Default::default() },
    )
    .unwrap();
    let seeds: Vec<f64> = (-6..=6).map(|i| i as f64 * 0.5).collect();
    let flow = evolve_flow(&series, &seeds).unwrap();
    let residuals = conjugation_invariant(&series, &flow).unwrap();
    let sup = residuals.iter().flatten().fold(0.0f64, |m, &r| m.max(r.abs()));
    let first = &series.log[0];
    let mut drift: f64 = 0.0;
    for row in &series.log {
        drift = drift.max(((row.e1 - first.e1) / first.e1).abs());
        drift = drift.max(((row.e2 - first.e2) / first.e2).abs());
        drift = drift.max(((row.e3 - first.e3) / first.e3).abs());
    }
    println!(
        "A=0.5 N=1024 t=1: conjugation sup {sup:.3e}, qx dual-path {:.3e}, max E-drift {drift:.3e}",
        flow.dual_path_disagreement()
    );

    // (C) Conservation at A=1: which resolution keeps 1e-8 drift to t=1?
    for n in [1024usize, 2048] {
        let g = Grid::new(n, 30.0).unwrap();
        let u0 = Field::from_fn(g, |x| (-x * x).exp());
        let series = run(
            &u0,
            &SolverConfig { dt: 1e-3, t_end: 1.0, snapshot_stride: 100, ..Default::default() },
        )
        .unwrap();
        let first = &series.log[0];
        let mut drift: f64 = 0.0;
        for row in &series.log {
            drift = drift.max(((row.e1 - first.e1) / first.e1).abs());
            drift = drift.max(((row.e2 - first.e2) / first.e2).abs());
            drift = drift.max(((row.e3 - first.e3) / first.e3).abs());
        }
        println!("A=1 N={n} t=1: max relative E-drift {drift:.3e}");
    }
}
