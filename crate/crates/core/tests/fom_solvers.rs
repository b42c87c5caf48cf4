use lprom::fom::{
    exact_advection, run_euler, run_fom, ssp_rk3_step, Boundary, DtRule, EulerStepper, FluxRule, FomProblem,
    InitialCondition, Law, Mesh1D, MeshSpec, Stepper, TimeScheme,
};

fn density_wave_error(cells: usize, t_end: f64) -> f64 {
    let mesh = Mesh1D::uniform_periodic(-1.0, 1.0, cells).unwrap();
    let ic = InitialCondition::EulerDensityWave {
        amplitude: 0.2,
        velocity: 1.0,
        pressure: 1.0,
    };
    let problem = FomProblem {
        law: Law::Euler { gamma: 3.0 },
        initial_condition: ic.clone(),
        boundary: Boundary::Periodic,
    };
    let stepper = EulerStepper::new(&problem, &mesh).unwrap();
    let dx = 2.0 / cells as f64;
    // Δt ∝ Δx^{5/3} keeps the third-order time error below the spatial one
    let steps = (t_end / (0.5 * dx.powf(5.0 / 3.0))).ceil() as usize;
    let dt = t_end / steps as f64;
    let mut u = lprom::fom::EulerState::from_primitive(&ic, mesh.nodes(), 3.0).into_flat();
    for _ in 0..steps {
        u = stepper.step(&u, dt).unwrap();
    }
    let mut err = 0.0;
    for (i, &x) in mesh.nodes().iter().enumerate() {
        let mut s = x - t_end;
        s = -1.0 + (s + 1.0).rem_euclid(2.0);
        let exact = 1.0 + 0.2 * (std::f64::consts::PI * s).sin();
        err += (u[i] - exact).powi(2) * dx;
    }
    err.sqrt()
}

#[test]
fn weno5_spatial_order() {
    let e: Vec<f64> = [100, 200, 400].iter().map(|&n| density_wave_error(n, 0.2)).collect();
    let o1 = (e[0] / e[1]).log2();
    let o2 = (e[1] / e[2]).log2();
    assert!(o1.min(o2) >= 4.5, "errors {e:?}, orders {o1:.3} {o2:.3}");
}

#[test]
fn rk3_global_order() {
    let err = |steps: usize| {
        let dt = 1.0 / steps as f64;
        let mut u = vec![1.0];
        for _ in 0..steps {
            u = ssp_rk3_step(|v| Ok(vec![-v[0]]), &u, dt).unwrap();
        }
        (u[0] - (-1.0f64).exp()).abs()
    };
    let e = [err(10), err(20), err(40)];
    assert!((e[0] / e[1]).log2() >= 2.9 && (e[1] / e[2]).log2() >= 2.9, "{e:?}");
}

#[test]
fn sod_structure_and_positivity() {
    let mesh = Mesh1D::uniform(-1.5, 1.5, 300).unwrap();
    let problem = FomProblem {
        law: Law::Euler { gamma: 3.0 },
        initial_condition: InitialCondition::EulerRiemann {
            split: 0.0,
            left: [1.0, 0.0, 1.0],
            right: [0.125, 0.0, 0.1],
        },
        boundary: Boundary::Outflow,
    };
    let traj = run_euler(&problem, &mesh, 0.6, 0.2, &[]).unwrap();
    let last = traj.rho.n_times() - 1;
    assert!((traj.rho.times()[last] - 0.2).abs() < 1e-14);
    let state = traj.state(0, last);
    state.check_physical(3.0).unwrap();
    let rho = state.rho();
    let x = mesh.nodes();
    // rarefaction head moves left, shock right; density decreases monotonically-ish left to right
    let head = x[rho.iter().position(|&r| r < 0.99).unwrap()];
    let shock = x[rho.iter().rposition(|&r| r > 0.13).unwrap()];
    assert!(head < -0.2, "rarefaction head at {head}");
    assert!(shock > 0.2, "shock at {shock}");
    let u = state.velocity();
    let umin = u.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(umin > -0.05, "min velocity {umin}");
}

#[test]
fn exact_mode_shifts_box() {
    let ic = InitialCondition::Box {
        left: 0.5,
        right: 1.5,
        height: 2.0,
        inclusive: true,
    };
    for i in 0..500 {
        let x = i as f64 * 0.01;
        assert_eq!(exact_advection(&ic, x, 0.0, 1.0, None), ic.eval(x));
    }
    assert_eq!(exact_advection(&ic, 1.0, 0.25, 1.0, None), 2.0);
}

#[test]
fn burgers_riemann_runs_and_stays_bounded() {
    let problem = FomProblem {
        law: Law::Burgers,
        initial_condition: InitialCondition::Box {
            left: 0.5,
            right: 0.75,
            height: 1.5,
            inclusive: true,
        },
        boundary: Boundary::Outflow,
    };
    let s = run_fom(
        &problem,
        &MeshSpec::Fixed {
            mesh: Mesh1D::uniform(0.0, 8.0, 400).unwrap(),
        },
        Stepper::Implicit {
            scheme: TimeScheme::BackwardEuler,
            flux: FluxRule::LaxFriedrichs,
        },
        DtRule::MeshRatio { ratio: 1.0 },
        0.5,
        1,
        &[0.5],
    )
    .unwrap();
    assert_eq!(s.n_times(), 26);
    let last = s.snapshot(0, 25);
    assert!(last.iter().all(|&v| v >= -1e-10 && v <= 1.5 + 1e-10));
}
