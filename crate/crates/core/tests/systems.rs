mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use bracketlab::brackets::{apply_j, bracket, casimir_residual};
use bracketlab::calculus::{curl, div, grad, solenoidal_part, cross, times, lap};
use bracketlab::fields::{pairing, random_state, Field, State};
use bracketlab::functionals::{derivative, directional_check, richardson_ratio, Functional};
use bracketlab::reduction::dirac_j_apply;
use bracketlab::systems::{mhd, quasineutral, vlasov, vorticity};
use common::*;

fn taylor_green(grid: &Arc<bracketlab::fields::Grid>) -> Field {
    let v = Field::vector_from_fn(grid, 3, |x| {
        vec![
            x[0].sin() * x[1].cos() * x[2].cos(),
            -x[0].cos() * x[1].sin() * x[2].cos(),
            0.0,
        ]
    });
    let tilt = Field::vector_from_fn(grid, 3, |x| vec![0.0, 0.3 * (x[0] + x[2]).sin(), 0.2 * x[1].cos()]);
    let mut v = v;
    v.axpy(1.0, &tilt).unwrap();
    curl(&v).unwrap()
}

/// Linear functionals `int phi div(slot)` whose kernel is `-grad phi` in that slot.
fn divergence_probes(schema: &bracketlab::fields::Schema, grid: &Arc<bracketlab::fields::Grid>, slot: usize, n: u64) -> Vec<Functional> {
    (0..n)
        .map(|s| {
            let phi = random_state(&bracketlab::constraints::scalar_schema(&["phi"]), grid, 900 + s, 2, true).unwrap();
            let mut k = State::zeros(schema, grid);
            *k.field_mut(slot) = grad(phi.field(0)).unwrap().scaled(-1.0);
            Functional::linear(k)
        })
        .collect()
}

fn random_functionals(schema: &bracketlab::fields::Schema, grid: &Arc<bracketlab::fields::Grid>, n: u64) -> Vec<Functional> {
    let band = if grid.velocity_dims() > 0 { 1 } else { 2 };
    (0..n).map(|s| Functional::linear(probe_band(schema, grid, 500 + s, band))).collect()
}

// -- vorticity ---------------------------------------------------------------

#[test]
fn vorticity_rejects_non_3d_grid() {
    let g = Arc::new(bracketlab::fields::Grid::cubic(2, 8, 2.0 * PI).unwrap());
    assert!(vorticity::vorticity_system(g).is_err());
}

#[test]
fn vorticity_brackets_agree_on_solenoidal_omega() {
    let grid = cube(16);
    let spec = vorticity::vorticity_system(grid.clone()).unwrap();
    let mut w = probe_band(&spec.schema, &grid, 3, 2);
    *w.field_mut(0) = solenoidal_part(w.field(0)).unwrap();
    let f = Functional::linear(probe_band(&spec.schema, &grid, 4, 2));
    let g = Functional::linear(probe_band(&spec.schema, &grid, 5, 2));
    let t = bracket(spec.bracket("tainted").unwrap().as_ref(), &f, &g, &w).unwrap();
    let c = bracket(spec.bracket("corrected").unwrap().as_ref(), &f, &g, &w).unwrap();
    assert!((t - c).abs() <= 1e-12 * t.abs().max(1.0));
}

#[test]
fn divergence_of_omega_is_casimir_of_corrected_bracket() {
    let grid = cube(16);
    let spec = vorticity::vorticity_system(grid.clone()).unwrap();
    let w = probe_band(&spec.schema, &grid, 8, 2);
    let probes = random_functionals(&spec.schema, &grid, 10);
    for c in divergence_probes(&spec.schema, &grid, 0, 3) {
        let r = casimir_residual(spec.bracket("corrected").unwrap().as_ref(), &c, &w, &probes).unwrap();
        assert!(r <= 1e-10, "{r:e}");
    }
}

#[test]
fn vorticity_dynamics_match_curl_of_v_cross_omega() {
    let grid = cube(16);
    let spec = vorticity::vorticity_system(grid.clone()).unwrap();
    let omega = taylor_green(&grid);
    let state = State::new(spec.schema.clone(), vec![omega.clone()]).unwrap();
    let v = vorticity::velocity(&omega).unwrap();
    let expected = curl(&cross(&v, &omega).unwrap()).unwrap();
    let h = spec.hamiltonian().unwrap();
    let dh = derivative(h, &state).unwrap();
    for name in ["tainted", "corrected"] {
        let rhs = apply_j(spec.bracket(name).unwrap().as_ref(), &state, &dh).unwrap();
        let mut d = rhs.field(0).clone();
        d.axpy(-1.0, &expected).unwrap();
        assert!(d.max_abs() <= 1e-8 * expected.max_abs().max(1.0), "{name}: {:e}", d.max_abs());
    }
}

#[test]
fn vorticity_hamiltonian_is_kinetic_energy() {
    let grid = cube(16);
    let spec = vorticity::vorticity_system(grid.clone()).unwrap();
    let omega = taylor_green(&grid);
    let state = State::new(spec.schema.clone(), vec![omega.clone()]).unwrap();
    let v = vorticity::velocity(&omega).unwrap();
    let h = spec.hamiltonian().unwrap().evaluate(&state).unwrap();
    assert!((h - 0.5 * v.inner(&v).unwrap()).abs() <= 1e-10 * h);
    let delta = probe_band(&spec.schema, &grid, 2, 2);
    let r = directional_check(spec.hamiltonian().unwrap(), &state, &delta, 1e-3).unwrap();
    assert!(r <= 1e-8 * h.max(1.0), "{r:e}");
}

#[test]
fn vorticity_equilibrium_has_zero_rhs() {
    let grid = cube(8);
    let spec = vorticity::vorticity_system(grid.clone()).unwrap();
    let state = State::zeros(&spec.schema, &grid);
    let dh = derivative(spec.hamiltonian().unwrap(), &state).unwrap();
    assert_eq!(apply_j(spec.bracket("tainted").unwrap().as_ref(), &state, &dh).unwrap().max_abs(), 0.0);
}

// -- compressible MHD ----------------------------------------------------------

fn smooth_mhd_state(grid: &Arc<bracketlab::fields::Grid>, seed: u64, amp: f64, solenoidal: bool) -> State {
    let mut s = random_state(&mhd::schema(), grid, seed, 1, true).unwrap();
    let rho = s.field(mhd::RHO).map(|r| 1.0 + amp * r);
    *s.field_mut(mhd::RHO) = rho;
    *s.field_mut(mhd::V) = s.field(mhd::V).scaled(amp);
    *s.field_mut(mhd::S) = s.field(mhd::S).scaled(amp);
    let b = s.field(mhd::B).scaled(amp);
    *s.field_mut(mhd::B) = if solenoidal { solenoidal_part(&b).unwrap() } else { b };
    s
}

#[test]
fn energy_params_reject_gamma_at_most_one() {
    let p = mhd::EnergyParams { gamma: 1.0, ..Default::default() };
    assert!(mhd::compressible_mhd_system(cube(8), mhd::MagneticVariant::Projected, p).is_err());
}

#[test]
fn magnetic_variants_agree_when_b_is_solenoidal() {
    let grid = cube(16);
    let state = smooth_mhd_state(&grid, 4, 0.2, true);
    let a = probe_band(&mhd::schema(), &grid, 5, 2);
    let b = probe_band(&mhd::schema(), &grid, 6, 2);
    let values: Vec<f64> = mhd::MagneticVariant::ALL
        .iter()
        .map(|&v| pairing(&a, &apply_j(&mhd::MhdBracket::new(v), &state, &b).unwrap()).unwrap())
        .collect();
    for v in &values[1..] {
        assert!((v - values[0]).abs() <= 1e-10 * values[0].abs().max(1.0), "{values:?}");
    }
}

#[test]
fn div_terms_and_projected_differ_by_divergence_corrections() {
    let grid = cube(16);
    let state = smooth_mhd_state(&grid, 7, 0.2, false);
    let a = probe_band(&mhd::schema(), &grid, 8, 2);
    let jd = apply_j(&mhd::MhdBracket::new(mhd::MagneticVariant::DivTerms), &state, &a).unwrap();
    let jp = apply_j(&mhd::MhdBracket::new(mhd::MagneticVariant::Projected), &state, &a).unwrap();
    let diff = jd.sub(&jp).unwrap();
    assert!(diff.norm() > 1e-3 * jp.norm());

    // integrand-level oracle
    let rinv = state.field(mhd::RHO).map(|r| 1.0 / r);
    let b = state.field(mhd::B);
    let mut bc = b.clone();
    bc.axpy(-1.0, &solenoidal_part(b).unwrap()).unwrap();
    let w = times(&rinv, &div(b).unwrap()).unwrap();
    let mut dv = times(&rinv, &cross(&bc, &curl(a.field(mhd::B)).unwrap()).unwrap()).unwrap().scaled(-1.0);
    dv.axpy(1.0, &times(&w, a.field(mhd::B)).unwrap()).unwrap();
    let mut db = curl(&times(&rinv, &cross(&bc, a.field(mhd::V)).unwrap()).unwrap()).unwrap().scaled(-1.0);
    db.axpy(-1.0, &times(&w, a.field(mhd::V)).unwrap()).unwrap();
    let mut expected = diff.zeros_like();
    *expected.field_mut(mhd::V) = dv;
    *expected.field_mut(mhd::B) = db;
    assert!(rel(&diff, &expected) <= 1e-12, "{:e}", rel(&diff, &expected));
}

#[test]
fn divergence_of_b_is_casimir_for_projected_but_not_div_terms() {
    let grid = cube(16);
    let state = smooth_mhd_state(&grid, 9, 0.2, false);
    let probes = random_functionals(&mhd::schema(), &grid, 10);
    let cs = divergence_probes(&mhd::schema(), &grid, mhd::B, 3);
    let worst = |v| {
        cs.iter()
            .map(|c| casimir_residual(&mhd::MhdBracket::new(v), c, &state, &probes).unwrap())
            .fold(0.0f64, f64::max)
    };
    assert!(worst(mhd::MagneticVariant::Projected) <= 1e-9);
    assert!(worst(mhd::MagneticVariant::DivTerms) > 1e-4);
}

#[test]
fn bracket_with_hamiltonian_reproduces_mhd_equations() {
    let grid = cube(16);
    let params = mhd::EnergyParams::default();
    let spec = mhd::compressible_mhd_system(grid.clone(), mhd::MagneticVariant::Projected, params).unwrap();
    let state = smooth_mhd_state(&grid, 11, 0.02, true);
    let dh = derivative(spec.hamiltonian().unwrap(), &state).unwrap();
    let rhs = apply_j(spec.bracket("projected").unwrap().as_ref(), &state, &dh).unwrap();
    let pde = mhd::pde_rhs(&state, params).unwrap();
    for slot in 0..4 {
        let mut d = rhs.field(slot).clone();
        d.axpy(-1.0, pde.field(slot)).unwrap();
        assert!(d.max_abs() <= 1e-7 * pde.field(slot).max_abs().max(1e-3), "slot {slot}: {:e}", d.max_abs());
    }
}

#[test]
fn mhd_hamiltonian_gradient_converges_at_second_order() {
    let grid = cube(8);
    let h = mhd::hamiltonian(mhd::EnergyParams::default()).unwrap();
    let state = smooth_mhd_state(&grid, 12, 0.2, false);
    let delta = probe(&mhd::schema(), &grid, 13);
    let ratio = richardson_ratio(&h, &state, &delta, 1e-2).unwrap();
    assert!((ratio - 4.0).abs() <= 0.2, "{ratio}");
}

#[test]
fn incompressible_dirac_rhs_is_divergence_free() {
    let grid = cube(16);
    let params = mhd::EnergyParams::default();
    let spec = mhd::incompressible_mhd_reduction(grid.clone(), 1.0, params).unwrap();
    let mut state = smooth_mhd_state(&grid, 14, 0.2, true);
    *state.field_mut(mhd::RHO) = Field::scalar_from_fn(&grid, |_| 1.0);
    *state.field_mut(mhd::V) = solenoidal_part(state.field(mhd::V)).unwrap();
    let dh = derivative(spec.hamiltonian().unwrap(), &state).unwrap();
    let rhs = dirac_j_apply(spec.reduction("dirac").unwrap(), &state, &dh).unwrap();
    assert!(div(rhs.field(mhd::V)).unwrap().max_abs() <= 1e-9 * rhs.norm().max(1.0));
    assert!(rhs.field(mhd::RHO).max_abs() <= 1e-9 * rhs.norm().max(1.0));
}

// -- Vlasov-Maxwell --------------------------------------------------------------

fn small_vlasov_state(seed: u64) -> State {
    let grid = phase_grid(8, 4);
    let mut s = vlasov_state(&grid, seed);
    *s.field_mut(vlasov::F) = s.field(vlasov::F).scaled(0.1);
    s
}

#[test]
fn parent_bracket_constraint_dynamics() {
    for d in [vlasov::ParentD::InvLap, vlasov::ParentD::InvSqrtNegLap] {
        let state = small_vlasov_state(21);
        let j = vlasov::VlasovMaxwellBracket::new(vlasov::GyroVariant::Projected, d);
        let dh = derivative(&vlasov::hamiltonian(), &state).unwrap();
        let rhs = apply_j(&j, &state, &dh).unwrap();
        let grid = state.grid().clone();
        let rho_dot = Field::scalar(&grid, bracketlab::calculus::velocity_integral(&grid, rhs.field(vlasov::F).component(0))).unwrap();
        let mut gauss_dot = div(rhs.field(vlasov::E)).unwrap();
        gauss_dot.axpy(-1.0, &rho_dot).unwrap();
        let expected_gauss = lap(&d.apply(&div(state.field(vlasov::B)).unwrap()).unwrap().unwrap()).unwrap();
        let expected_b = lap(&d.apply(&div(state.field(vlasov::E)).unwrap()).unwrap().unwrap()).unwrap().scaled(-1.0);
        let mut e1 = gauss_dot.clone();
        e1.axpy(-1.0, &expected_gauss).unwrap();
        let mut e2 = div(rhs.field(vlasov::B)).unwrap();
        e2.axpy(-1.0, &expected_b).unwrap();
        assert!(e1.max_abs() <= 1e-8 * expected_gauss.max_abs().max(1.0), "{:?} gauss {:e}", d, e1.max_abs());
        assert!(e2.max_abs() <= 1e-8 * expected_b.max_abs().max(1.0), "{:?} div B {:e}", d, e2.max_abs());
    }
}

#[test]
fn gauss_constraints_are_casimirs_of_projected_bracket() {
    let state = small_vlasov_state(22);
    let grid = state.grid().clone();
    let spec = vlasov::vlasov_maxwell_system(grid.clone(), vlasov::GyroVariant::Projected, vlasov::ParentD::None).unwrap();
    let j = spec.bracket("projected").unwrap();
    let q = spec.constraint("gauss").unwrap();
    let probes = random_functionals(&spec.schema, &grid, 10);
    for seed in 0..3 {
        // C = <w, Q(chi)> is linear in chi
        let w = probe(q.constraint_schema(), &grid, 700 + seed);
        let kernel = bracketlab::constraints::frechet_adjoint(q.as_ref(), &state, &w).unwrap();
        let r = casimir_residual(j.as_ref(), &Functional::linear(kernel), &state, &probes).unwrap();
        assert!(r <= 1e-9, "{r:e}");
    }
}

#[test]
fn tainted_and_projected_vlasov_brackets_agree_when_b_is_solenoidal() {
    let mut state = small_vlasov_state(23);
    *state.field_mut(vlasov::B) = solenoidal_part(state.field(vlasov::B)).unwrap();
    let grid = state.grid().clone();
    let a = probe(&vlasov::schema(), &grid, 24);
    let b = probe(&vlasov::schema(), &grid, 25);
    let t = pairing(&a, &apply_j(&vlasov::VlasovMaxwellBracket::new(vlasov::GyroVariant::Tainted, vlasov::ParentD::None), &state, &b).unwrap()).unwrap();
    let p = pairing(&a, &apply_j(&vlasov::VlasovMaxwellBracket::new(vlasov::GyroVariant::Projected, vlasov::ParentD::None), &state, &b).unwrap()).unwrap();
    assert!((t - p).abs() <= 1e-12 * t.abs().max(1.0));
}

#[test]
fn vlasov_poisson_freezes_magnetic_field() {
    let grid = phase_grid(8, 4);
    let spec = vlasov::vlasov_poisson_reduction(grid.clone(), None).unwrap();
    let state = small_vlasov_state(26);
    for seed in 0..3 {
        let a = probe(&spec.schema, &grid, 30 + seed);
        let js = dirac_j_apply(spec.reduction("dirac").unwrap(), &state, &a).unwrap();
        assert!(js.field(vlasov::B).max_abs() <= 1e-10 * js.norm(), "{:e}", js.field(vlasov::B).max_abs());
    }
}

// -- quasineutral ---------------------------------------------------------------

#[test]
fn background_moments_match_gaussian_integrals() {
    let grid = quasineutral_grid(8.0);
    let params = quasineutral_params();
    let bg = quasineutral::Background::sample(&grid, &params).unwrap();
    for (s, m) in [&params.ion, &params.electron].iter().enumerate() {
        assert!((bg.alpha_bar[s] - m.density).abs() <= 1e-10, "{}", bg.alpha_bar[s]);
        let beta = m.density * m.drift[0];
        assert!((bg.beta[s][0] - beta).abs() <= 1e-10, "{}", bg.beta[s][0]);
    }
}

#[test]
fn background_rejects_poor_velocity_decay() {
    let grid = quasineutral_grid(3.0);
    assert!(quasineutral::Background::sample(&grid, &quasineutral_params()).is_err());
}

#[test]
fn quasineutral_system_has_no_hamiltonian() {
    let spec = quasineutral::quasineutral_system(quasineutral_grid(8.0), quasineutral_params()).unwrap();
    assert!(spec.hamiltonian().is_err());
}
