//! Residual computations shared by the check suites and the acceptance
//! tests. Every function returns normalized residuals; callers decide the
//! tolerance.

use std::sync::Arc;

use crate::brackets::{apply_j, casimir_residual, jacobi_residual, PoissonOperator};
use crate::constraints::{frechet, frechet_adjoint, AOperator, ConstraintSet};
use crate::error::{Error, Result};
use crate::fields::{pairing, random_state, Grid, Schema, State};
use crate::functionals::Functional;
use crate::reduction::{
    dirac_j_apply, dirac_projector, norm_estimate, orthogonal_projector, projector_residuals, ProjectorResiduals,
};
use crate::systems::quasineutral::{self, QuasineutralConstraint, QuasineutralParams};

/// Largest band limit up to `max_band` that every axis of `grid` supports.
pub fn probe_band(grid: &Grid, max_band: usize) -> usize {
    let smallest = grid.phase_shape().into_iter().min().unwrap_or(2);
    max_band.min((smallest.saturating_sub(1)) / 2).max(1)
}

/// `count` zero-mean probes with seeds `base, base + 1, ...`.
pub fn probes(schema: &Schema, grid: &Arc<Grid>, base: u64, count: usize, band: usize) -> Result<Vec<State>> {
    (0..count as u64).map(|i| random_state(schema, grid, base + i, band, true)).collect()
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_difference(a: &State, b: &State) -> Result<f64> {
    let d = a.sub(b)?.norm();
    let s = a.norm().max(b.norm());
    Ok(if s == 0.0 { d } else { d / s })
}

/// Normalized Jacobi residuals for linear triples drawn from `seed`.
pub fn jacobi_batch(op: &dyn PoissonOperator, state: &State, seeds: &[u64], band: usize) -> Result<Vec<f64>> {
    let grid = state.grid();
    seeds
        .iter()
        .map(|&seed| {
            let p = probes(op.schema(), grid, 3 * seed + 1000, 3, band)?;
            let f: Vec<Functional> = p.into_iter().map(Functional::linear).collect();
            Ok(jacobi_residual(op, &f[0], &f[1], &f[2], state)?.normalized)
        })
        .collect()
}

/// Projector identities of `P*` (and `P_perp` where it exists) on
/// `count` cotangent and constraint probes.
pub fn projector_suite(a_op: &AOperator, state: &State, count: usize, seed: u64, with_perp: bool) -> Result<ProjectorResiduals> {
    let (cot, gs) = projector_probes(a_op, state, count, seed)?;
    projector_suite_on(a_op, state, &cot, &gs, with_perp)
}

/// Cotangent and constraint-space probes for [`projector_suite_on`].
pub fn projector_probes(a_op: &AOperator, state: &State, count: usize, seed: u64) -> Result<(Vec<State>, Vec<State>)> {
    let q = a_op.constraint.as_ref();
    let grid = state.grid();
    let band = probe_band(grid, 2);
    Ok((
        probes(q.schema(), grid, seed, count, band)?,
        probes(q.constraint_schema(), grid, seed + 10_000, count, band)?,
    ))
}

pub fn projector_suite_on(
    a_op: &AOperator,
    state: &State,
    cotangents: &[State],
    constraint_probes: &[State],
    with_perp: bool,
) -> Result<ProjectorResiduals> {
    let q = a_op.constraint.clone();
    let pstar = dirac_projector(a_op, state)?;
    let pperp = if with_perp { Some(orthogonal_projector(q.clone(), state)?) } else { None };
    projector_residuals(&pstar, pperp.as_ref(), q.as_ref(), state, cotangents, constraint_probes)
}

/// Residuals of the Dirac-matrix identities, each relative to the size of
/// the terms involved.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct DiracResiduals {
    /// `|J* a - J P* a|`
    pub j_p: f64,
    /// `|J* a - P*^dagger J a|`
    pub p_j: f64,
    /// `|Q^ J* a|`
    pub constraint: f64,
    /// `|<a, J* b> + <b, J* a>|`
    pub antisymmetry: f64,
}

impl DiracResiduals {
    pub fn max(&self) -> f64 {
        self.j_p.max(self.p_j).max(self.constraint).max(self.antisymmetry)
    }
}

pub fn dirac_identities(a_op: &AOperator, state: &State, count: usize, seed: u64) -> Result<DiracResiduals> {
    let q = a_op.constraint.as_ref();
    let j = a_op.bracket.as_ref();
    let grid = state.grid();
    let band = probe_band(grid, 2);
    let p = dirac_projector(a_op, state)?;
    let xs = probes(q.schema(), grid, seed, count, band)?;
    let ys = probes(q.schema(), grid, seed + 20_000, count, band)?;
    let mut r = DiracResiduals::default();
    for (a, b) in xs.iter().zip(&ys) {
        let ja = apply_j(j, state, a)?;
        let js = dirac_j_apply(a_op, state, a)?;
        let scale = ja.norm().max(js.norm());
        if scale == 0.0 {
            continue;
        }
        let jpa = apply_j(j, state, &p.apply(a)?)?;
        let pja = p.adjoint_apply(&ja)?;
        r.j_p = r.j_p.max(js.sub(&jpa)?.norm() / scale);
        r.p_j = r.p_j.max(js.sub(&pja)?.norm() / scale);
        // relative to Q^ applied to the unreduced flow
        let qja = frechet(q, state, &ja)?.norm();
        let qscale = if qja > 0.0 { qja } else { scale };
        r.constraint = r.constraint.max(frechet(q, state, &js)?.norm() / qscale);
        let jb = dirac_j_apply(a_op, state, b)?;
        let ab = pairing(a, &jb)?;
        let ba = pairing(b, &js)?;
        let denom = a.norm() * jb.norm() + b.norm() * js.norm();
        if denom > 0.0 {
            r.antisymmetry = r.antisymmetry.max((ab + ba).abs() / denom);
        }
    }
    Ok(r)
}

/// Largest Casimir residual of the functionals `C_w = <w, Q(chi)>` for
/// `count` random weights `w`, tested against `count` random linear
/// functionals.
pub fn constraint_casimirs(
    op: &dyn PoissonOperator,
    q: &dyn ConstraintSet,
    state: &State,
    count: usize,
    seed: u64,
) -> Result<f64> {
    let grid = state.grid();
    let band = probe_band(grid, 2);
    let gs: Vec<Functional> = probes(op.schema(), grid, seed, count, band)?
        .into_iter()
        .map(Functional::linear)
        .collect();
    let mut worst: f64 = 0.0;
    for w in probes(q.constraint_schema(), grid, seed + 30_000, count, band)? {
        // the constraints are affine in the state, so Q^dagger w is the gradient
        let c = Functional::linear(frechet_adjoint(q, state, &w)?);
        worst = worst.max(casimir_residual(op, &c, state, &gs)?);
    }
    Ok(worst)
}

/// One velocity cutoff of the quasineutral norm scan.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NormScanRow {
    pub v_max: f64,
    pub velocity_volume: f64,
    /// Rayleigh quotient of the quasineutrality block of `Q^ Q^dagger`.
    pub quasineutrality_block: f64,
    /// Rayleigh quotient of the full `Q^ Q^dagger`.
    pub gram: f64,
    /// `max |A w| / |w|`
    pub a_norm: f64,
    pub orthogonal_unavailable: bool,
}

fn rayleigh(apply: impl Fn(&State) -> Result<State>, probes: &[State]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for w in probes {
        let n2 = pairing(w, w)?;
        if n2 > 0.0 {
            best = best.max(pairing(w, &apply(w)?)? / n2);
        }
    }
    Ok(best)
}

/// Norm estimates of `Q^ Q^dagger` and `A` for each velocity cutoff on a
/// 1-D grid with `nx` points and a fixed velocity spacing `dv`.
pub fn quasineutral_norm_scan(params: &QuasineutralParams, nx: usize, dv: f64, v_maxes: &[f64], seed: u64) -> Result<Vec<NormScanRow>> {
    let mut rows = Vec::with_capacity(v_maxes.len());
    for &v_max in v_maxes {
        let nv = (2.0 * v_max / dv).round() as usize;
        if nv < 4 {
            return Err(Error::InvalidGrid(format!("cutoff {v_max} leaves fewer than 4 velocity points")));
        }
        let grid = Arc::new(Grid::with_velocity(vec![nx], vec![2.0 * std::f64::consts::PI], vec![nv], vec![v_max])?);
        let spec = quasineutral::quasineutral_system(grid.clone(), params.clone())?;
        let q: Arc<dyn ConstraintSet> = Arc::new(QuasineutralConstraint::new(&grid));
        let state = State::zeros(&spec.schema, &grid);
        let ws = probes(q.constraint_schema(), &grid, seed, 8, 1)?;
        let block_probes: Vec<State> = ws
            .iter()
            .map(|w| {
                let mut b = w.clone();
                *b.field_mut(1) = w.field(1).scaled(0.0);
                b
            })
            .collect();
        let gram = |w: &State| frechet(q.as_ref(), &state, &frechet_adjoint(q.as_ref(), &state, w)?);
        let a_op = spec.reduction("dirac")?;
        let unavailable = matches!(orthogonal_projector(q.clone(), &state), Err(Error::OrthogonalUnavailable(_)));
        rows.push(NormScanRow {
            v_max,
            velocity_volume: grid.velocity_volume(),
            quasineutrality_block: rayleigh(gram, &block_probes)?,
            gram: rayleigh(gram, &ws)?,
            a_norm: norm_estimate(|w| a_op.apply(&state, w), &ws)?,
            orthogonal_unavailable: unavailable,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::toy;

    #[test]
    fn probe_band_respects_small_axes() {
        let g = Grid::with_velocity(vec![8; 3], vec![1.0; 3], vec![4; 3], vec![1.0; 3]).unwrap();
        assert_eq!(probe_band(&g, 2), 1);
        let g = Grid::cubic(3, 16, 1.0).unwrap();
        assert_eq!(probe_band(&g, 2), 2);
    }

    #[test]
    fn toy_reduction_passes_identities() {
        let spec = toy::toy_system().unwrap();
        let state = random_state(&spec.schema, &spec.grid, 3, 2, false).unwrap();
        let a_op = spec.reduction("dirac").unwrap();
        assert!(dirac_identities(a_op, &state, 5, 1).unwrap().max() <= 1e-9);
        assert!(projector_suite(a_op, &state, 5, 1, true).unwrap().max() <= 1e-9);
    }
}
