use tfch::galerkin::{galerkin_rhs, mass_matrix, project, reconstruct_on, regularized_energy, evolve_galerkin, GalerkinSystem};
use tfch::model::rhs;
use tfch::timestepper::{evolve, Scheme};
use tfch::{Field64, Grid64, Params64, SolverConfig, State64};

const L: f64 = 12.0;

/// Smooth band-limited data: height modes 1-2, concentration modes 1-3.
fn initial(n_modes: usize, eps: f64, dip: f64) -> GalerkinSystem<f64> {
    let mut sys = GalerkinSystem::new(L, n_modes, eps).unwrap();
    let g = sys.quadrature_grid().clone();
    let k = std::f64::consts::TAU / L;
    let h = g.field_from_fn(|x| 1.0 - dip * (k * x).cos() + 0.05 * (2.0 * k * x).sin()).unwrap();
    let c = g
        .field_from_fn(|x| 0.4 * (k * x).sin() + 0.2 * (2.0 * k * x).cos() - 0.1 * (3.0 * k * x).sin())
        .unwrap();
    sys.eta = project(&h, n_modes).unwrap();
    sys.gamma = project(&c, n_modes).unwrap();
    sys
}

fn params() -> Params64 {
    Params64::new(1.0, 1.0, 1.0, -1.0).unwrap()
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

#[test]
fn nine_mode_rhs_matches_grid_oracle() {
    let sys = initial(9, 1e-8, 0.2);
    let p = params();
    let (d_eta, d_gamma) = galerkin_rhs(&sys, &p).unwrap();
    assert!(d_eta[0].abs() <= 1e-12);

    // oracle: pseudo-spectral right-hand side on the quadrature nodes, projected
    let s = sys.to_state().unwrap();
    let g = s.grid().clone();
    let r = rhs(&s, &p).unwrap();
    let eta_oracle = project(&r.dh_dt, 9).unwrap();
    assert!(relative_gap(&d_eta, &eta_oracle) <= 1e-4);

    let h_t = reconstruct_on(&g, &eta_oracle).unwrap();
    let forcing: Vec<f64> = (0..g.n())
        .map(|i| r.dch_dt.values()[i] - s.c().values()[i] * h_t.values()[i])
        .collect();
    let load = project(&Field64::new(g, forcing).unwrap(), 9).unwrap();
    let m = mass_matrix(&sys.eta, &sys).unwrap();
    // M d_gamma should reproduce the projected load
    let lhs: Vec<f64> = (0..9).map(|i| (0..9).map(|j| m[[i, j]] * d_gamma[j]).sum()).collect();
    assert!(relative_gap(&lhs, &load) <= 1e-4, "gap {}", relative_gap(&lhs, &load));
}

#[test]
fn regularization_converges_as_eps_shrinks() {
    // a thin spot where g_eps differs visibly from the height itself
    let p = params();
    let mut errors = Vec::new();
    for eps in [0.1, 0.03, 0.01] {
        let sys = initial(17, eps, 0.9);
        let s = sys.to_state().unwrap();
        let exact = project(&rhs(&s, &p).unwrap().dh_dt, 17).unwrap();
        let (d_eta, _) = galerkin_rhs(&sys, &p).unwrap();
        errors.push(relative_gap(&d_eta, &exact));
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

fn grid_reference(t_end: f64) -> State64 {
    let sys = initial(33, 1e-8, 0.2);
    let fine = Grid64::new(L, 128).unwrap();
    let s0 = State64::new(reconstruct_on(&fine, &sys.eta).unwrap(), reconstruct_on(&fine, &sys.gamma).unwrap()).unwrap();
    let cfg = SolverConfig { record_every: t_end, ..SolverConfig::new(t_end, 1e-4).with_scheme(Scheme::FullyImplicit).fixed_step() };
    evolve(&s0, &params(), &cfg).unwrap().final_state().clone()
}

#[test]
fn runs_conserve_volume_decrease_energy_and_converge_in_modes() {
    let t_end = 0.05;
    let reference = grid_reference(t_end);
    let p = params();
    let mut errors = Vec::new();
    for n_modes in [5, 9, 17] {
        let sys = initial(n_modes, 1e-6, 0.2);
        let cfg = SolverConfig { record_every: t_end / 10.0, ..SolverConfig::new(t_end, 1e-4).fixed_step() };
        let rec = evolve_galerkin(&sys, &p, &cfg).unwrap();
        assert!(rec.completed());
        for s in &rec.states {
            let eta = project(s.h(), n_modes).unwrap();
            assert!((eta[0] - sys.eta[0]).abs() <= 1e-10);
        }
        assert!(rec.max_energy_increase() <= 1e-8);
        let last = rec.final_state();
        let h_ref = project(reference.h(), n_modes).unwrap();
        let h_gal = project(last.h(), n_modes).unwrap();
        let c_ref = project(reference.c(), n_modes).unwrap();
        let c_gal = project(last.c(), n_modes).unwrap();
        let err = relative_gap(&h_gal, &h_ref).max(relative_gap(&c_gal, &c_ref));
        errors.push(err);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    // the regularized energy is defined on the same state
    let sys = initial(9, 1e-6, 0.2);
    assert!(regularized_energy(&sys, &p).unwrap().total.is_finite());
}
