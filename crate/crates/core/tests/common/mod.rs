#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use bracketlab::fields::{random_state, Field, Grid, Rank, Schema, State};
use bracketlab::systems::quasineutral::QuasineutralParams;

pub fn cube(n: usize) -> Arc<Grid> {
    Arc::new(Grid::cubic(3, n, 2.0 * PI).unwrap())
}

pub fn phase_grid(nx: usize, nv: usize) -> Arc<Grid> {
    Arc::new(Grid::with_velocity(vec![nx; 3], vec![2.0 * PI; 3], vec![nv; 3], vec![PI; 3]).unwrap())
}

pub fn quasineutral_grid(v_max: f64) -> Arc<Grid> {
    Arc::new(Grid::with_velocity(vec![16], vec![2.0 * PI], vec![64], vec![v_max]).unwrap())
}

pub fn quasineutral_params() -> QuasineutralParams {
    QuasineutralParams::standard(1)
}

/// `|a - b| / max(|b|, tiny)`
pub fn rel(a: &State, b: &State) -> f64 {
    let d = a.sub(b).unwrap().norm();
    let s = b.norm().max(a.norm());
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

pub fn rel_scalar(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

pub fn probe(schema: &Schema, grid: &Arc<Grid>, seed: u64) -> State {
    random_state(schema, grid, seed, 1, true).unwrap()
}

pub fn probe_band(schema: &Schema, grid: &Arc<Grid>, seed: u64, band: usize) -> State {
    random_state(schema, grid, seed, band, true).unwrap()
}

/// MHD state with positive density `1 + 0.3 r`.
pub fn mhd_state(grid: &Arc<Grid>, seed: u64) -> State {
    let mut s = random_state(&bracketlab::systems::mhd::schema(), grid, seed, 2, false).unwrap();
    let rho = s.field(0).map(|r| 1.0 + 0.3 * r / 3.0);
    *s.field_mut(0) = rho;
    s
}

/// Vlasov state with small random `f`, random `E` and `B`.
pub fn vlasov_state(grid: &Arc<Grid>, seed: u64) -> State {
    random_state(&bracketlab::systems::vlasov::schema(), grid, seed, 1, false).unwrap()
}

pub fn zero_field(grid: &Arc<Grid>, rank: Rank) -> Field {
    Field::zeros(grid, rank)
}
