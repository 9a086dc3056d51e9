//! Jacobi identity of every bracket on band-limited linear probe triples at
//! unconstrained states. Grids are chosen so that every product of probes
//! and state is resolved: 16^3 for MHD (1/rho has an infinite spectrum) and
//! eight velocity points for the kinetic systems.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use bracketlab::brackets::PoissonOperator;
use bracketlab::calculus::{compressible_part, solenoidal_part};
use bracketlab::fields::{random_state, Grid, State};
use bracketlab::harness::catalog::{incompressible_state, mhd_state};
use bracketlab::harness::checks::jacobi_batch;
use bracketlab::reduction::DiracOperator;
use bracketlab::systems::vlasov::{self, GyroVariant, ParentD, VlasovMaxwellBracket};
use bracketlab::systems::{mhd, quasineutral, toy, SystemSpec};
use common::*;

const TRIPLES: std::ops::RangeInclusive<u64> = 1..=20;

fn worst(op: &dyn PoissonOperator, state: &State) -> f64 {
    let seeds: Vec<u64> = TRIPLES.collect();
    jacobi_batch(op, state, &seeds, 1).unwrap().into_iter().fold(0.0, f64::max)
}

fn kinetic_grid() -> Arc<Grid> {
    Arc::new(Grid::with_velocity(vec![8; 3], vec![2.0 * PI; 3], vec![8; 3], vec![PI; 3]).unwrap())
}

/// Vlasov state with order-one `f` and `B` split into its parts.
fn kinetic_states() -> (State, State) {
    let grid = kinetic_grid();
    let raw = random_state(&vlasov::schema(), &grid, 1, 1, false).unwrap();
    let mut compressible = raw.clone();
    *compressible.field_mut(vlasov::B) = compressible_part(raw.field(vlasov::B)).unwrap();
    let mut solenoidal = raw;
    *solenoidal.field_mut(vlasov::B) = solenoidal_part(solenoidal.field(vlasov::B)).unwrap();
    (compressible, solenoidal)
}

#[test]
fn compressible_mhd_brackets() {
    let grid = cube(16);
    let spec = mhd::compressible_mhd_system(grid.clone(), mhd::MagneticVariant::Projected, mhd::EnergyParams::default()).unwrap();
    let raw = mhd_state(&grid, 1, 0.1, false).unwrap();
    let solenoidal = mhd_state(&grid, 1, 0.1, true).unwrap();
    for name in ["projected", "div_terms"] {
        let r = worst(spec.bracket(name).unwrap().as_ref(), &raw);
        assert!(r <= 1e-9, "{name}: {r:e}");
    }
    let tainted = spec.bracket("tainted").unwrap();
    let r = worst(tainted.as_ref(), &raw);
    assert!(r > 1e-4, "tainted with div B != 0: {r:e}");
    let r = worst(tainted.as_ref(), &solenoidal);
    assert!(r <= 1e-9, "tainted with div B = 0: {r:e}");
}

#[test]
fn vlasov_maxwell_brackets() {
    let grid = kinetic_grid();
    let spec = vlasov::vlasov_maxwell_system(grid, GyroVariant::Projected, ParentD::None).unwrap();
    let (raw, solenoidal) = kinetic_states();
    let r = worst(spec.bracket("projected").unwrap().as_ref(), &raw);
    assert!(r <= 1e-9, "projected: {r:e}");
    let tainted = spec.bracket("tainted").unwrap();
    let r = worst(tainted.as_ref(), &raw);
    assert!(r > 1e-4, "tainted with div B != 0: {r:e}");
    let r = worst(tainted.as_ref(), &solenoidal);
    assert!(r <= 1e-9, "tainted with div B = 0: {r:e}");
    for d in [ParentD::InvLap, ParentD::InvSqrtNegLap] {
        let r = worst(&VlasovMaxwellBracket::new(GyroVariant::Projected, d), &raw);
        assert!(r <= 1e-9, "parent {}: {r:e}", d.name());
    }
}

fn dirac_worst(spec: &SystemSpec, state: &State) -> f64 {
    worst(&DiracOperator::new(spec.reduction("dirac").unwrap().clone()), state)
}

#[test]
fn dirac_reduced_brackets() {
    let spec = toy::toy_system().unwrap();
    let state = probe(&spec.schema, &spec.grid, 1);
    assert!(dirac_worst(&spec, &state) <= 1e-9);

    let grid = cube(16);
    let spec = mhd::incompressible_mhd_reduction(grid.clone(), 1.0, mhd::EnergyParams::default()).unwrap();
    // off the constraint surface: density and velocity divergence perturbed
    let mut state = incompressible_state(&grid, 3, 1.0, 1.0, 0.5).unwrap();
    let off = mhd_state(&grid, 4, 0.01, false).unwrap();
    state.axpy(1.0, &off).unwrap();
    *state.field_mut(mhd::RHO) = state.field(mhd::RHO).map(|r| r - 1.0);
    let r = dirac_worst(&spec, &state);
    assert!(r <= 1e-9, "incompressible MHD: {r:e}");

    let grid = kinetic_grid();
    let spec = vlasov::vlasov_poisson_reduction(grid.clone(), Some(vlasov::default_background(&grid))).unwrap();
    let (raw, _) = kinetic_states();
    let r = dirac_worst(&spec, &raw);
    assert!(r <= 1e-9, "Vlasov-Poisson: {r:e}");

    let grid = quasineutral_grid(8.0);
    let spec = quasineutral::quasineutral_system(grid.clone(), quasineutral_params()).unwrap();
    let state = probe(&spec.schema, &grid, 5);
    let r = dirac_worst(&spec, &state);
    assert!(r <= 1e-9, "quasineutral: {r:e}");
}
