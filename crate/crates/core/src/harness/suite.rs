//! Named check lists per system and the suite runner.

use std::time::Instant;

use crate::brackets::{antisymmetry_residual, apply_j, bracket};
use crate::calculus::{cross, curl, div, lap, solenoidal_part, velocity_integral};
use crate::constraints::{frechet, frechet_adjoint, frechet_pair_residual};
use crate::error::{Error, Result};
use crate::fields::{pairing, random_state, Field, State};
use crate::functionals::{derivative, directional_check, richardson_ratio, Functional};
use crate::reduction::{dirac_j_apply, DiracOperator, dirac_projector, orthogonal_projector};
use crate::systems::{mhd, quasineutral, vlasov, vorticity, SystemSpec};

use super::catalog::{self, build_system, incompressible_state, mhd_state, sample_state, vlasov_state};
use super::checks::{
    constraint_casimirs, dirac_identities, jacobi_batch, probe_band, probes, projector_probes, projector_suite,
    projector_suite_on, relative_difference,
};
use super::config::{Config, SystemParams};
use super::dispersion::dispersion_check;
use super::integrate::{simulate, Monitor};
use super::report::{CheckResult, Expect, Report};

/// System under test with its parameters.
pub struct Context {
    pub spec: SystemSpec,
    pub params: SystemParams,
}

type CheckFn = fn(&Context, u64) -> Result<f64>;

/// A named check: `run(context, seed)` returns a residual.
#[derive(Clone, Copy)]
pub struct CheckDef {
    pub name: &'static str,
    pub anchor: &'static str,
    pub tolerance: f64,
    pub expect: Expect,
    pub run: CheckFn,
}

const fn at_most(name: &'static str, anchor: &'static str, tolerance: f64, run: CheckFn) -> CheckDef {
    CheckDef { name, anchor, tolerance, expect: Expect::AtMost, run }
}

const fn exceeds(name: &'static str, anchor: &'static str, floor: f64, run: CheckFn) -> CheckDef {
    CheckDef { name, anchor, tolerance: floor, expect: Expect::Exceeds, run }
}

fn rel_scalar(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn worst(values: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    values.into_iter().try_fold(0.0f64, |m, v| Ok(m.max(v?)))
}

fn linear_probes(ctx: &Context, seed: u64, count: usize) -> Result<Vec<Functional>> {
    let g = &ctx.spec.grid;
    Ok(probes(&ctx.spec.schema, g, seed, count, probe_band(g, 2))?.into_iter().map(Functional::linear).collect())
}

// -- shared ------------------------------------------------------------------

fn hamiltonian_directional(ctx: &Context, seed: u64) -> Result<f64> {
    let h = ctx.spec.hamiltonian()?;
    let chi = sample_state(&ctx.spec, seed, &ctx.params)?;
    let delta = random_state(&ctx.spec.schema, &ctx.spec.grid, seed + 1, probe_band(&ctx.spec.grid, 2), true)?;
    let scale = pairing(&derivative(h, &chi)?, &delta)?.abs().max(f64::MIN_POSITIVE);
    Ok(directional_check(h, &chi, &delta, 1e-3)? / scale)
}

fn hamiltonian_ratio(ctx: &Context, seed: u64) -> Result<f64> {
    let h = ctx.spec.hamiltonian()?;
    let chi = sample_state(&ctx.spec, seed, &ctx.params)?;
    let delta = random_state(&ctx.spec.schema, &ctx.spec.grid, seed + 1, 1, true)?;
    Ok((richardson_ratio(h, &chi, &delta, 1e-2)? - 4.0).abs())
}

fn dirac_identity_check(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    Ok(dirac_identities(ctx.spec.reduction("dirac")?, &state, 10, seed)?.max())
}

fn projectors_with_perp(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    Ok(projector_suite(ctx.spec.reduction("dirac")?, &state, 10, seed, true)?.max())
}

fn projectors_without_perp(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    Ok(projector_suite(ctx.spec.reduction("dirac")?, &state, 10, seed, false)?.max())
}

fn jacobi_worst(op: &dyn crate::brackets::PoissonOperator, state: &State, seed: u64) -> Result<f64> {
    worst(jacobi_batch(op, state, &jacobi_seeds(seed), 1)?.into_iter().map(Ok))
}

/// Jacobi identity of `J*` at a state off the constraint surface.
fn dirac_jacobi(ctx: &Context, seed: u64) -> Result<f64> {
    let mut state = sample_state(&ctx.spec, seed, &ctx.params)?;
    if ctx.spec.name == "incompressible_mhd" {
        let mut off = mhd_state(&ctx.spec.grid, seed + 1, 0.01, false)?;
        *off.field_mut(mhd::RHO) = off.field(mhd::RHO).map(|r| r - 1.0);
        state.axpy(1.0, &off)?;
    }
    jacobi_worst(&DiracOperator::new(ctx.spec.reduction("dirac")?.clone()), &state, seed)
}

fn reduced_casimirs(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let a_op = ctx.spec.reduction("dirac")?;
    let op = DiracOperator::new(a_op.clone());
    constraint_casimirs(&op, a_op.constraint.as_ref(), &state, 10, seed)
}

fn frechet_adjoint_pairing(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let (_, q) = ctx.spec.constraints.first().ok_or_else(|| Error::Unsupported("no constraint".into()))?;
    let g = &ctx.spec.grid;
    let band = probe_band(g, 2);
    let us = probes(&ctx.spec.schema, g, seed, 5, band)?;
    let ws = probes(q.constraint_schema(), g, seed + 50, 5, band)?;
    worst(us.iter().zip(&ws).map(|(u, w)| frechet_pair_residual(q.as_ref(), &state, u, w)))
}

/// Closed-form operator named `closed` against `generic` on random probes.
fn compare_operator(
    ctx: &Context,
    seed: u64,
    closed: &str,
    input_is_constraint: bool,
    generic: impl Fn(&State, &State) -> Result<State>,
) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let cf = ctx.spec.closed_form(closed)?;
    let g = &ctx.spec.grid;
    let schema = if input_is_constraint {
        ctx.spec.constraints[0].1.constraint_schema().clone()
    } else {
        ctx.spec.schema.clone()
    };
    let xs = probes(&schema, g, seed + 7, 5, probe_band(g, 2))?;
    worst(xs.iter().map(|x| relative_difference(&generic(&state, x)?, &cf.apply(&state, x)?)))
}

// -- vorticity -----------------------------------------------------------------

fn vort_state(ctx: &Context, seed: u64, solenoidal: bool) -> Result<State> {
    let mut s = sample_state(&ctx.spec, seed, &ctx.params)?;
    if solenoidal {
        *s.field_mut(0) = solenoidal_part(s.field(0))?;
    }
    Ok(s)
}

fn jacobi_seeds(seed: u64) -> Vec<u64> {
    (0..5).map(|i| seed * 100 + i).collect()
}

fn vort_jacobi(ctx: &Context, seed: u64, bracket: &str, solenoidal: bool) -> Result<f64> {
    let state = vort_state(ctx, seed, solenoidal)?;
    jacobi_worst(ctx.spec.bracket(bracket)?.as_ref(), &state, seed)
}

fn vort_jacobi_corrected(ctx: &Context, seed: u64) -> Result<f64> {
    vort_jacobi(ctx, seed, "corrected", false)
}

fn vort_jacobi_tainted_solenoidal(ctx: &Context, seed: u64) -> Result<f64> {
    vort_jacobi(ctx, seed, "tainted", true)
}

fn vort_jacobi_tainted(ctx: &Context, seed: u64) -> Result<f64> {
    vort_jacobi(ctx, seed, "tainted", false)
}

fn vort_casimir(ctx: &Context, seed: u64) -> Result<f64> {
    let state = vort_state(ctx, seed, false)?;
    constraint_casimirs(
        ctx.spec.bracket("corrected")?.as_ref(),
        ctx.spec.constraint("div_omega")?.as_ref(),
        &state,
        10,
        seed,
    )
}

fn vort_antisymmetry(ctx: &Context, seed: u64) -> Result<f64> {
    let state = vort_state(ctx, seed, false)?;
    let g = &ctx.spec.grid;
    let p = probes(&ctx.spec.schema, g, seed + 3, 2, probe_band(g, 2))?;
    antisymmetry_residual(ctx.spec.bracket("corrected")?.as_ref(), &state, &p[0], &p[1])
}

fn vort_values_agree(ctx: &Context, seed: u64) -> Result<f64> {
    let state = vort_state(ctx, seed, true)?;
    let f = linear_probes(ctx, seed + 5, 2)?;
    let t = bracket(ctx.spec.bracket("tainted")?.as_ref(), &f[0], &f[1], &state)?;
    let c = bracket(ctx.spec.bracket("corrected")?.as_ref(), &f[0], &f[1], &state)?;
    Ok(rel_scalar(t, c))
}

fn vort_dynamics(ctx: &Context, seed: u64) -> Result<f64> {
    let g = &ctx.spec.grid;
    let phase = seed as f64 * 0.1;
    let v = Field::vector_from_fn(g, 3, |x| {
        vec![
            (x[0] + phase).sin() * x[1].cos() * x[2].cos(),
            -(x[0] + phase).cos() * x[1].sin() * x[2].cos(),
            0.3 * (x[0] + x[1]).sin(),
        ]
    });
    let omega = curl(&v)?;
    let state = State::new(ctx.spec.schema.clone(), vec![omega.clone()])?;
    let expected = curl(&cross(&vorticity::velocity(&omega)?, &omega)?)?;
    let dh = derivative(ctx.spec.hamiltonian()?, &state)?;
    worst(["tainted", "corrected"].iter().map(|name| {
        let rhs = apply_j(ctx.spec.bracket(name)?.as_ref(), &state, &dh)?;
        let mut d = rhs.field(0).clone();
        d.axpy(-1.0, &expected)?;
        Ok(d.max_abs() / expected.max_abs().max(1.0))
    }))
}

const VORTICITY: &[CheckDef] = &[
    at_most("jacobi_corrected_bracket", "corrected vorticity bracket satisfies the Jacobi identity", 1e-9, vort_jacobi_corrected),
    at_most("jacobi_tainted_bracket_solenoidal_omega", "tainted bracket is a Poisson bracket on div omega = 0", 1e-9, vort_jacobi_tainted_solenoidal),
    exceeds("jacobi_tainted_bracket_raw_omega", "tainted bracket violates Jacobi when div omega != 0", 1e-4, vort_jacobi_tainted),
    at_most("casimir_div_omega", "div omega is a Casimir of the corrected bracket", 1e-10, vort_casimir),
    at_most("antisymmetry_corrected", "corrected bracket is antisymmetric", 1e-12, vort_antisymmetry),
    at_most("brackets_agree_solenoidal_omega", "corrected and tainted brackets coincide when div omega = 0", 1e-10, vort_values_agree),
    at_most("dynamics_curl_v_cross_omega", "bracket with H gives omega_t = curl(v x omega)", 1e-8, vort_dynamics),
    at_most("hamiltonian_directional", "H gradient matches central differences", 1e-8, hamiltonian_directional),
];

// -- compressible MHD --------------------------------------------------------------

fn mhd_variants_agree(ctx: &Context, seed: u64) -> Result<f64> {
    let state = mhd_state(&ctx.spec.grid, seed, 0.2, true)?;
    let f = linear_probes(ctx, seed + 5, 2)?;
    let values: Vec<f64> = mhd::MagneticVariant::ALL
        .iter()
        .map(|v| bracket(ctx.spec.bracket(v.name())?.as_ref(), &f[0], &f[1], &state))
        .collect::<Result<_>>()?;
    Ok(values.iter().map(|v| rel_scalar(*v, values[0])).fold(0.0, f64::max))
}

fn mhd_div_b_casimir(ctx: &Context, seed: u64, variant: &str) -> Result<f64> {
    let state = mhd_state(&ctx.spec.grid, seed, 0.2, false)?;
    constraint_casimirs(ctx.spec.bracket(variant)?.as_ref(), ctx.spec.constraint("div_b")?.as_ref(), &state, 10, seed)
}

fn mhd_div_b_projected(ctx: &Context, seed: u64) -> Result<f64> {
    mhd_div_b_casimir(ctx, seed, "projected")
}

fn mhd_div_b_div_terms(ctx: &Context, seed: u64) -> Result<f64> {
    mhd_div_b_casimir(ctx, seed, "div_terms")
}

fn mhd_equations(ctx: &Context, seed: u64) -> Result<f64> {
    let state = mhd_state(&ctx.spec.grid, seed, 0.02, true)?;
    let dh = derivative(ctx.spec.hamiltonian()?, &state)?;
    let rhs = apply_j(ctx.spec.bracket("projected")?.as_ref(), &state, &dh)?;
    let pde = mhd::pde_rhs(&state, ctx.params.energy())?;
    worst((0..4).map(|slot| {
        let mut d = rhs.field(slot).clone();
        d.axpy(-1.0, pde.field(slot))?;
        Ok(d.max_abs() / pde.field(slot).max_abs().max(1e-3))
    }))
}

fn mhd_antisymmetry(ctx: &Context, seed: u64) -> Result<f64> {
    let state = mhd_state(&ctx.spec.grid, seed, 0.2, false)?;
    let g = &ctx.spec.grid;
    let p = probes(&ctx.spec.schema, g, seed + 3, 2, probe_band(g, 2))?;
    worst(mhd::MagneticVariant::ALL
        .iter()
        .map(|v| antisymmetry_residual(ctx.spec.bracket(v.name())?.as_ref(), &state, &p[0], &p[1])))
}

fn mhd_jacobi(ctx: &Context, seed: u64, bracket: &str, solenoidal_b: bool) -> Result<f64> {
    let state = mhd_state(&ctx.spec.grid, seed, 0.1, solenoidal_b)?;
    jacobi_worst(ctx.spec.bracket(bracket)?.as_ref(), &state, seed)
}

fn mhd_jacobi_projected(ctx: &Context, seed: u64) -> Result<f64> {
    mhd_jacobi(ctx, seed, "projected", false)
}

fn mhd_jacobi_div_terms(ctx: &Context, seed: u64) -> Result<f64> {
    mhd_jacobi(ctx, seed, "div_terms", false)
}

fn mhd_jacobi_tainted(ctx: &Context, seed: u64) -> Result<f64> {
    mhd_jacobi(ctx, seed, "tainted", false)
}

fn mhd_jacobi_tainted_solenoidal(ctx: &Context, seed: u64) -> Result<f64> {
    mhd_jacobi(ctx, seed, "tainted", true)
}

const COMPRESSIBLE_MHD: &[CheckDef] = &[
    at_most("jacobi_projected", "projected bracket satisfies the Jacobi identity for any B", 1e-9, mhd_jacobi_projected),
    at_most("jacobi_div_terms", "div-terms bracket satisfies the Jacobi identity for any B", 1e-9, mhd_jacobi_div_terms),
    exceeds("jacobi_tainted_raw_b", "tainted bracket violates Jacobi when div B != 0", 1e-4, mhd_jacobi_tainted),
    at_most("jacobi_tainted_solenoidal_b", "tainted bracket is a Poisson bracket on div B = 0", 1e-9, mhd_jacobi_tainted_solenoidal),
    at_most("magnetic_variants_agree_div_free_b", "all magnetic parts coincide when div B = 0", 1e-10, mhd_variants_agree),
    at_most("casimir_div_b_projected", "div B is a Casimir of the projected bracket", 1e-9, mhd_div_b_projected),
    exceeds("casimir_div_b_div_terms", "div B does not Poisson-commute under the div-terms bracket", 1e-4, mhd_div_b_div_terms),
    at_most("equations_of_motion", "bracket with H reproduces the MHD equations", 1e-7, mhd_equations),
    at_most("antisymmetry", "every magnetic variant is antisymmetric", 1e-12, mhd_antisymmetry),
    at_most("hamiltonian_richardson_ratio", "H gradient converges at second order (ratio 4)", 0.2, hamiltonian_ratio),
];

// -- incompressible MHD ------------------------------------------------------------

fn imhd_a_round_trip(ctx: &Context, seed: u64) -> Result<f64> {
    let a_op = ctx.spec.reduction("dirac")?.clone();
    compare_operator(ctx, seed, "a_inverse", true, move |s, w| {
        // A A^-1 w should reproduce w
        let back = a_op.apply(s, &mhd::a_inverse(s, w)?)?;
        mhd::a_inverse(s, &back)
    })
}

fn imhd_untrailed(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let a_op = ctx.spec.reduction("dirac")?;
    let g = &ctx.spec.grid;
    let ws = probes(ctx.spec.constraint("incompressibility")?.constraint_schema(), g, seed, 3, 2)?;
    worst(ws.iter().map(|w| relative_difference(&a_op.apply(&state, &mhd::a_inverse_untrailed(&state, w)?)?, w)))
}

fn imhd_a(ctx: &Context, seed: u64) -> Result<f64> {
    let a_op = ctx.spec.reduction("dirac")?.clone();
    compare_operator(ctx, seed, "a", true, move |s, w| a_op.apply(s, w))
}

fn imhd_krylov(ctx: &Context, seed: u64) -> Result<f64> {
    let krylov = ctx.spec.reduction("dirac_krylov")?.clone();
    let a_op = ctx.spec.reduction("dirac")?.clone();
    let q = ctx.spec.constraint("incompressibility")?.clone();
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let u = probes(&ctx.spec.schema, &ctx.spec.grid, seed, 1, 2)?.remove(0);
    let w = frechet(q.as_ref(), &state, &u)?;
    let y = krylov.solve(&state, &w, 1e-11, None)?;
    relative_difference(&a_op.apply(&state, &y)?, &w)
}

fn imhd_pperp(ctx: &Context, seed: u64) -> Result<f64> {
    let q = ctx.spec.constraint("incompressibility")?.clone();
    compare_operator(ctx, seed, "orthogonal_projector", false, move |s, a| orthogonal_projector(q.clone(), s)?.apply(a))
}

fn imhd_pstar(ctx: &Context, seed: u64) -> Result<f64> {
    let a_op = ctx.spec.reduction("dirac")?.clone();
    compare_operator(ctx, seed, "dirac_projector", false, move |s, a| dirac_projector(&a_op, s)?.apply(a))
}

fn closed_bracket(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let a_op = ctx.spec.reduction("dirac")?;
    let cf = ctx.spec.closed_form("dirac_bracket")?;
    let g = &ctx.spec.grid;
    let xs = probes(&ctx.spec.schema, g, seed + 11, 5, probe_band(g, 2))?;
    let ys = probes(&ctx.spec.schema, g, seed + 21, 5, probe_band(g, 2))?;
    worst(xs.iter().zip(&ys).map(|(a, b)| {
        let generic = pairing(a, &dirac_j_apply(a_op, &state, b)?)?;
        Ok(rel_scalar(generic, cf.evaluate(&state, a, b)?))
    }))
}

fn imhd_rhs_divergence(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let rhs = super::integrate::rhs(&ctx.spec, "dirac", &state)?;
    Ok(div(rhs.field(mhd::V))?.max_abs() / rhs.norm().max(1.0))
}

fn imhd_evolution(ctx: &Context, seed: u64) -> Result<f64> {
    let state = incompressible_state(&ctx.spec.grid, seed, ctx.params.rho0, 3.0, 1.0)?;
    let monitors = [
        Monitor::max_divergence("div_v", mhd::V, 1e-8),
        Monitor::max_deviation("rho", mhd::RHO, ctx.params.rho0, 1e-8),
    ];
    let t = simulate(&ctx.spec, "dirac", &state, 1e-3, 100, &monitors)?;
    Ok(t.monitors.iter().map(|m| m.max_drift()).fold(0.0, f64::max))
}

const INCOMPRESSIBLE_MHD: &[CheckDef] = &[
    at_most("jacobi_dirac_bracket", "Dirac bracket satisfies the Jacobi identity off the constraint surface", 1e-9, dirac_jacobi),
    at_most("frechet_adjoint_pairing", "Q^dagger is the adjoint of Q^", 1e-10, frechet_adjoint_pairing),
    at_most("a_matrix_closed_form", "A = Q^ J Q^dagger as written out", 1e-10, imhd_a),
    at_most("a_inverse_round_trip", "closed-form A^-1 inverts A", 1e-9, imhd_a_round_trip),
    exceeds("a_inverse_without_trailing_inv_lap", "A^-1 with top-left block inv_lap M does not invert A", 1e-4, imhd_untrailed),
    at_most("a_inverse_krylov", "Krylov solve of A agrees with the constraint data", 1e-9, imhd_krylov),
    at_most("orthogonal_projector_closed_form", "generic P_perp matches the written-out projector", 1e-9, imhd_pperp),
    at_most("dirac_projector_closed_form", "generic P* matches the written-out projector", 1e-9, imhd_pstar),
    at_most("dirac_bracket_closed_form", "generic Dirac bracket matches the written-out bracket", 1e-9, closed_bracket),
    at_most("projector_identities", "P* and P_perp idempotent, kernel Rg Q^dagger, mutual compositions", 1e-9, projectors_with_perp),
    at_most("dirac_identities", "J* = J P* = P*^dagger J, Q^ J* = 0, antisymmetry", 1e-9, dirac_identity_check),
    at_most("casimir_constraints", "(rho - rho0, div v) are Casimirs of the Dirac bracket", 1e-9, reduced_casimirs),
    at_most("rhs_divergence_free", "reduced velocity tendency is solenoidal", 1e-9, imhd_rhs_divergence),
    at_most("evolution_constraint_drift", "div v and rho - rho0 stay zero over 100 RK4 steps", 1e-8, imhd_evolution),
];

// -- Vlasov-Maxwell ------------------------------------------------------------

fn vm_gauss_casimirs(ctx: &Context, seed: u64) -> Result<f64> {
    let state = vlasov_state(&ctx.spec.grid, seed)?;
    constraint_casimirs(ctx.spec.bracket("projected")?.as_ref(), ctx.spec.constraint("gauss")?.as_ref(), &state, 10, seed)
}

fn vm_agree(ctx: &Context, seed: u64) -> Result<f64> {
    let mut state = vlasov_state(&ctx.spec.grid, seed)?;
    *state.field_mut(vlasov::B) = solenoidal_part(state.field(vlasov::B))?;
    let f = linear_probes(ctx, seed + 5, 2)?;
    let t = bracket(ctx.spec.bracket("tainted")?.as_ref(), &f[0], &f[1], &state)?;
    let p = bracket(ctx.spec.bracket("projected")?.as_ref(), &f[0], &f[1], &state)?;
    Ok(rel_scalar(t, p))
}

fn vm_constraint_dynamics(ctx: &Context, seed: u64, d: vlasov::ParentD) -> Result<f64> {
    let state = vlasov_state(&ctx.spec.grid, seed)?;
    let j = vlasov::VlasovMaxwellBracket::new(vlasov::GyroVariant::Projected, d);
    let rhs = apply_j(&j, &state, &derivative(ctx.spec.hamiltonian()?, &state)?)?;
    let g = &ctx.spec.grid;
    let rho_dot = Field::scalar(g, velocity_integral(g, rhs.field(vlasov::F).component(0)))?;
    let mut gauss = div(rhs.field(vlasov::E))?;
    gauss.axpy(-1.0, &rho_dot)?;
    let ld = |f: &Field| -> Result<Field> { lap(&d.apply(f)?.expect("parent operator")) };
    let mut e1 = gauss;
    let want_e = ld(&div(state.field(vlasov::B))?)?;
    e1.axpy(-1.0, &want_e)?;
    let mut e2 = div(rhs.field(vlasov::B))?;
    let want_b = ld(&div(state.field(vlasov::E))?)?.scaled(-1.0);
    e2.axpy(-1.0, &want_b)?;
    Ok((e1.max_abs() / want_e.max_abs().max(1.0)).max(e2.max_abs() / want_b.max_abs().max(1.0)))
}

fn vm_dynamics_inv_lap(ctx: &Context, seed: u64) -> Result<f64> {
    vm_constraint_dynamics(ctx, seed, vlasov::ParentD::InvLap)
}

fn vm_dynamics_inv_sqrt(ctx: &Context, seed: u64) -> Result<f64> {
    vm_constraint_dynamics(ctx, seed, vlasov::ParentD::InvSqrtNegLap)
}

fn dispersion(ctx: &Context, d: vlasov::ParentD, k: [i64; 3], expected: f64) -> Result<f64> {
    let grid = std::sync::Arc::new(ctx.spec.grid.spatial_grid());
    Ok((dispersion_check(d, &grid, &k)?.fit.frequency - expected).abs())
}

fn disp_lap_1(ctx: &Context, _seed: u64) -> Result<f64> {
    dispersion(ctx, vlasov::ParentD::InvLap, [1, 0, 0], 1.0)
}

fn disp_lap_2(ctx: &Context, _seed: u64) -> Result<f64> {
    dispersion(ctx, vlasov::ParentD::InvLap, [0, 2, 0], 1.0)
}

fn disp_sqrt_1(ctx: &Context, _seed: u64) -> Result<f64> {
    dispersion(ctx, vlasov::ParentD::InvSqrtNegLap, [1, 0, 0], 1.0)
}

fn disp_sqrt_2(ctx: &Context, _seed: u64) -> Result<f64> {
    dispersion(ctx, vlasov::ParentD::InvSqrtNegLap, [0, 0, 2], 2.0)
}

fn vm_antisymmetry(ctx: &Context, seed: u64) -> Result<f64> {
    let state = vlasov_state(&ctx.spec.grid, seed)?;
    let p = probes(&ctx.spec.schema, &ctx.spec.grid, seed + 3, 2, 1)?;
    antisymmetry_residual(ctx.spec.bracket("projected")?.as_ref(), &state, &p[0], &p[1])
}

/// Order-one `f` and `E` with `B` reduced to its compressible or
/// solenoidal part.
fn kinetic_state(ctx: &Context, seed: u64, solenoidal_b: bool) -> Result<State> {
    let mut s = random_state(&vlasov::schema(), &ctx.spec.grid, seed, 1, false)?;
    let b = s.field(vlasov::B);
    *s.field_mut(vlasov::B) = if solenoidal_b { solenoidal_part(b)? } else { crate::calculus::compressible_part(b)? };
    Ok(s)
}

fn vm_jacobi(ctx: &Context, seed: u64, op: &dyn crate::brackets::PoissonOperator, solenoidal_b: bool) -> Result<f64> {
    jacobi_worst(op, &kinetic_state(ctx, seed, solenoidal_b)?, seed)
}

fn vm_jacobi_projected(ctx: &Context, seed: u64) -> Result<f64> {
    vm_jacobi(ctx, seed, ctx.spec.bracket("projected")?.as_ref(), false)
}

fn vm_jacobi_tainted(ctx: &Context, seed: u64) -> Result<f64> {
    vm_jacobi(ctx, seed, ctx.spec.bracket("tainted")?.as_ref(), false)
}

fn vm_jacobi_tainted_solenoidal(ctx: &Context, seed: u64) -> Result<f64> {
    vm_jacobi(ctx, seed, ctx.spec.bracket("tainted")?.as_ref(), true)
}

fn vm_jacobi_parents(ctx: &Context, seed: u64) -> Result<f64> {
    worst([vlasov::ParentD::InvLap, vlasov::ParentD::InvSqrtNegLap].into_iter().map(|d| {
        vm_jacobi(ctx, seed, &vlasov::VlasovMaxwellBracket::new(vlasov::GyroVariant::Projected, d), false)
    }))
}

const VLASOV_MAXWELL: &[CheckDef] = &[
    at_most("jacobi_projected", "projected bracket satisfies the Jacobi identity for any B", 1e-9, vm_jacobi_projected),
    exceeds("jacobi_tainted_raw_b", "tainted bracket violates Jacobi when div B != 0", 1e-4, vm_jacobi_tainted),
    at_most("jacobi_tainted_solenoidal_b", "tainted bracket is a Poisson bracket on div B = 0", 1e-9, vm_jacobi_tainted_solenoidal),
    at_most("jacobi_parent_family", "parent brackets satisfy the Jacobi identity for both choices of D", 1e-9, vm_jacobi_parents),
    at_most("casimir_gauss_constraints", "(div E - rho, div B) are Casimirs of the projected bracket", 1e-9, vm_gauss_casimirs),
    at_most("brackets_agree_div_free_b", "tainted and projected brackets coincide when div B = 0", 1e-12, vm_agree),
    at_most("antisymmetry", "projected bracket is antisymmetric", 1e-12, vm_antisymmetry),
    at_most("constraint_dynamics_inv_lap", "parent bracket moves the constraints by Lap D", 1e-8, vm_dynamics_inv_lap),
    at_most("constraint_dynamics_inv_sqrt_neg_lap", "parent bracket moves the constraints by Lap D", 1e-8, vm_dynamics_inv_sqrt),
    at_most("dispersion_inv_lap_k1", "D = inv_lap gives stationary constraint oscillation, frequency 1", 1e-3, disp_lap_1),
    at_most("dispersion_inv_lap_k2", "D = inv_lap gives stationary constraint oscillation, frequency 1", 1e-3, disp_lap_2),
    at_most("dispersion_inv_sqrt_neg_lap_k1", "D = (-Lap)^-1/2 gives propagating waves, frequency |k|", 1e-3, disp_sqrt_1),
    at_most("dispersion_inv_sqrt_neg_lap_k2", "D = (-Lap)^-1/2 gives propagating waves, frequency |k|", 2e-3, disp_sqrt_2),
    at_most("hamiltonian_directional", "H gradient matches central differences", 1e-8, hamiltonian_directional),
];

// -- Vlasov-Poisson --------------------------------------------------------------

fn vp_a(ctx: &Context, seed: u64) -> Result<f64> {
    let a_op = ctx.spec.reduction("dirac")?.clone();
    compare_operator(ctx, seed, "a", true, move |s, w| a_op.apply(s, w))
}

fn vp_pperp(ctx: &Context, seed: u64) -> Result<f64> {
    let q = ctx.spec.constraint("frozen_b_curl_free_e")?.clone();
    compare_operator(ctx, seed, "orthogonal_projector", false, move |s, a| orthogonal_projector(q.clone(), s)?.apply(a))
}

fn vp_pstar(ctx: &Context, seed: u64) -> Result<f64> {
    let a_op = ctx.spec.reduction("dirac")?.clone();
    compare_operator(ctx, seed, "dirac_projector", false, move |s, a| dirac_projector(&a_op, s)?.apply(a))
}

fn vp_matrix(ctx: &Context, seed: u64) -> Result<f64> {
    let a_op = ctx.spec.reduction("dirac")?.clone();
    compare_operator(ctx, seed, "dirac_matrix", false, move |s, a| {
        Ok(vlasov::without_field_means(&dirac_j_apply(&a_op, s, a)?))
    })
}

fn vp_frozen_b(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let a_op = ctx.spec.reduction("dirac")?;
    let xs = probes(&ctx.spec.schema, &ctx.spec.grid, seed, 5, 1)?;
    worst(xs.iter().map(|a| {
        let js = dirac_j_apply(a_op, &state, a)?;
        Ok(js.field(vlasov::B).max_abs() / js.norm().max(f64::MIN_POSITIVE))
    }))
}

/// `A` is singular on the `div B` part of `B - B0`, which is already a
/// Casimir of the parent bracket; the projector identities hold on the
/// complement, so the B cotangent and the `B - B0` probe are made solenoidal.
fn vp_projectors(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let a_op = ctx.spec.reduction("dirac")?;
    let (mut cot, mut gs) = projector_probes(a_op, &state, 10, seed)?;
    for a in &mut cot {
        *a.field_mut(vlasov::B) = solenoidal_part(a.field(vlasov::B))?;
    }
    for g in &mut gs {
        *g.field_mut(0) = solenoidal_part(g.field(0))?;
    }
    Ok(projector_suite_on(a_op, &state, &cot, &gs, true)?.max())
}

fn vp_gradient_b_fixed(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let pstar = dirac_projector(ctx.spec.reduction("dirac")?, &state)?;
    let g = &ctx.spec.grid;
    worst(probes(&ctx.spec.schema, g, seed, 5, 1)?.into_iter().map(|p| {
        let phi = Field::scalar(g, velocity_integral(g, p.field(vlasov::F).component(0)))?;
        let mut a = p.zeros_like();
        *a.field_mut(vlasov::B) = crate::calculus::grad(&phi)?;
        relative_difference(&pstar.apply(&a)?, &a)
    }))
}

const VLASOV_POISSON: &[CheckDef] = &[
    at_most("jacobi_dirac_bracket", "Dirac bracket satisfies the Jacobi identity off the constraint surface", 1e-9, dirac_jacobi),
    at_most("frechet_adjoint_pairing", "Q^dagger is the adjoint of Q^", 1e-10, frechet_adjoint_pairing),
    at_most("a_matrix_closed_form", "A = Q^ J Q^dagger as written out", 1e-10, vp_a),
    at_most("orthogonal_projector_closed_form", "generic P_perp matches the written-out projector", 1e-9, vp_pperp),
    at_most("dirac_projector_closed_form", "generic P* via the composite A^-1 Q^ matches the written-out projector", 1e-9, vp_pstar),
    at_most("dirac_matrix_closed_form", "generic J* matches the Vlasov-Poisson Poisson matrix (mean-free part)", 1e-9, vp_matrix),
    at_most("dirac_bracket_closed_form", "generic Dirac bracket matches the Vlasov-Poisson bracket", 1e-9, closed_bracket),
    at_most("magnetic_field_frozen", "B row of J* vanishes", 1e-10, vp_frozen_b),
    at_most("projector_identities", "P* and P_perp idempotent, kernel Rg Q^dagger, mutual compositions (solenoidal B part)", 1e-9, vp_projectors),
    at_most("gradient_b_cotangent_fixed_by_dirac_projector", "P* leaves gradient B cotangents unchanged: A is singular on div B", 1e-10, vp_gradient_b_fixed),
    at_most("dirac_identities", "J* = J P* = P*^dagger J, Q^ J* = 0, antisymmetry", 1e-9, dirac_identity_check),
    at_most("casimir_constraints", "(B - B0, curl E) are Casimirs of the Dirac bracket", 1e-9, reduced_casimirs),
];

// -- quasineutral ----------------------------------------------------------------

fn qn_params(ctx: &Context) -> quasineutral::QuasineutralParams {
    let dims = ctx.spec.grid.spatial_dims();
    ctx.params.maxwellian.clone().unwrap_or_else(|| quasineutral::QuasineutralParams::standard(dims))
}

fn qn_moments(ctx: &Context, _seed: u64) -> Result<f64> {
    let params = qn_params(ctx);
    let bg = quasineutral::Background::sample(&ctx.spec.grid, &params)?;
    let mut r: f64 = 0.0;
    for (s, m) in [&params.ion, &params.electron].iter().enumerate() {
        r = r.max((bg.alpha_bar[s] - m.density).abs());
        for (b, u) in bg.beta[s].iter().zip(&m.drift) {
            r = r.max((b - m.density * u).abs());
        }
    }
    Ok(r)
}

fn qn_a(ctx: &Context, seed: u64) -> Result<f64> {
    let a_op = ctx.spec.reduction("dirac")?.clone();
    compare_operator(ctx, seed, "a", true, move |s, w| a_op.apply(s, w))
}

fn qn_round_trip(ctx: &Context, seed: u64) -> Result<f64> {
    let a_op = ctx.spec.reduction("dirac")?.clone();
    let inv = ctx.spec.closed_form("a_inverse")?.clone();
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    let ws = probes(ctx.spec.constraints[0].1.constraint_schema(), &ctx.spec.grid, seed, 5, 1)?;
    worst(ws.iter().map(|w| relative_difference(&a_op.apply(&state, &inv.apply(&state, w)?)?, w)))
}

fn qn_pstar(ctx: &Context, seed: u64) -> Result<f64> {
    let a_op = ctx.spec.reduction("dirac")?.clone();
    compare_operator(ctx, seed, "dirac_projector", false, move |s, a| dirac_projector(&a_op, s)?.apply(a))
}

fn qn_gram(ctx: &Context, seed: u64) -> Result<f64> {
    let q = ctx.spec.constraint("quasineutrality")?.clone();
    compare_operator(ctx, seed, "gram", true, move |s, w| frechet(q.as_ref(), s, &frechet_adjoint(q.as_ref(), s, w)?))
}

fn qn_unavailable(ctx: &Context, seed: u64) -> Result<f64> {
    let state = sample_state(&ctx.spec, seed, &ctx.params)?;
    match orthogonal_projector(ctx.spec.constraint("quasineutrality")?.clone(), &state) {
        Err(Error::OrthogonalUnavailable(_)) => Ok(1.0),
        Err(e) => Err(e),
        Ok(_) => Ok(0.0),
    }
}

const QUASINEUTRAL: &[CheckDef] = &[
    at_most("jacobi_dirac_bracket", "Dirac bracket satisfies the Jacobi identity off the constraint surface", 1e-9, dirac_jacobi),
    at_most("background_moments", "sampled Maxwellian moments equal the analytic Gaussian integrals", 1e-10, qn_moments),
    at_most("frechet_adjoint_pairing", "Q^dagger is the adjoint of Q^", 1e-10, frechet_adjoint_pairing),
    at_most("a_matrix_closed_form", "A = Q^ J Q^dagger as written out", 1e-10, qn_a),
    at_most("a_inverse_round_trip", "closed-form A^-1 inverts A", 1e-9, qn_round_trip),
    at_most("gram_closed_form", "Q^ Q^dagger as written out", 1e-10, qn_gram),
    at_most("dirac_projector_closed_form", "generic P* matches the written-out projector", 1e-9, qn_pstar),
    at_most("projector_identities", "P* idempotent with kernel Rg Q^dagger", 1e-9, projectors_without_perp),
    at_most("dirac_identities", "J* = J P* = P*^dagger J, Q^ J* = 0, antisymmetry", 1e-9, dirac_identity_check),
    exceeds("orthogonal_projector_unavailable", "orthogonal projector does not exist: Q^ Q^dagger is unbounded in v", 0.5, qn_unavailable),
];

// -- toy ---------------------------------------------------------------------------

const TOY: &[CheckDef] = &[
    at_most("jacobi_dirac_bracket", "Dirac bracket satisfies the Jacobi identity off the constraint surface", 1e-9, dirac_jacobi),
    at_most("frechet_adjoint_pairing", "Q^dagger is the adjoint of Q^", 1e-12, frechet_adjoint_pairing),
    at_most("projector_identities", "P* and P_perp idempotent, kernel Rg Q^dagger, mutual compositions", 1e-9, projectors_with_perp),
    at_most("dirac_identities", "J* = J P* = P*^dagger J, Q^ J* = 0, antisymmetry", 1e-9, dirac_identity_check),
    at_most("casimir_constraints", "d_x q is a Casimir of the Dirac bracket", 1e-9, reduced_casimirs),
    at_most("hamiltonian_directional", "H gradient matches central differences", 1e-8, hamiltonian_directional),
];

/// Named checks of `system`.
pub fn checks_for(system: &str) -> Result<&'static [CheckDef]> {
    Ok(match system {
        "vorticity" => VORTICITY,
        "compressible_mhd" => COMPRESSIBLE_MHD,
        "incompressible_mhd" => INCOMPRESSIBLE_MHD,
        "vlasov_maxwell" => VLASOV_MAXWELL,
        "vlasov_poisson" => VLASOV_POISSON,
        "quasineutral" => QUASINEUTRAL,
        "toy" => TOY,
        other => {
            return Err(Error::Usage(format!(
                "unknown system {other:?}; known systems: {}",
                catalog::SYSTEMS.join(", ")
            )))
        }
    })
}

fn run_check(ctx: &Context, def: &CheckDef, seeds: &[u64], tolerance: f64) -> CheckResult {
    let mut residual: f64 = 0.0;
    for &seed in seeds {
        match (def.run)(ctx, seed) {
            Ok(r) if r.is_nan() => return CheckResult::failed(def.name, def.anchor, tolerance, "residual is NaN"),
            Ok(r) => residual = residual.max(r),
            Err(e) => return CheckResult::failed(def.name, def.anchor, tolerance, e),
        }
    }
    CheckResult::new(def.name, def.anchor, residual, tolerance, def.expect)
}

/// Runs every check of `system` for each configured seed (worst residual
/// over seeds). Checks run concurrently; the report keeps the declared
/// order.
pub fn run_suite(system: &str, config: &Config) -> Result<Report> {
    let defs = checks_for(system)?;
    config.validate()?;
    let start = Instant::now();
    let spec = build_system(system, config.grid.as_deref(), &config.system_params)?;
    let grid_sizes = catalog::expand_grid(system, &config.grid.clone().unwrap_or(catalog::default_grid(system)?))?;
    let ctx = Context {
        spec,
        params: config.system_params.clone(),
    };
    let seeds = config.seeds.clone();
    let results: Vec<CheckResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = defs
            .iter()
            .map(|def| {
                let tol = match def.expect {
                    Expect::AtMost => config.tolerance(def.name, def.tolerance),
                    Expect::Exceeds => config.tolerances.get(def.name).copied().unwrap_or(def.tolerance),
                };
                let (ctx, seeds) = (&ctx, &seeds);
                scope.spawn(move || run_check(ctx, def, seeds, tol))
            })
            .collect();
        handles
            .into_iter()
            .zip(defs)
            .map(|(h, def)| {
                h.join()
                    .unwrap_or_else(|_| CheckResult::failed(def.name, def.anchor, def.tolerance, "check panicked"))
            })
            .collect()
    });
    let mut report = Report::new(system, grid_sizes, seeds);
    report.checks = results;
    report.wallclock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
