//! Constraint sets `Q[chi]`, their Frechet derivatives and adjoints, and the
//! operator `A = Q^ J Q^dagger` with its restricted inverse.

use std::fmt;
use std::sync::Arc;

use crate::brackets::{apply_j, BracketOperator};
use crate::error::{Error, Result};
use crate::fields::{pairing, Cotangent, Field, Grid, Rank, Schema, State, Tangent};
use crate::krylov::{cgls, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locality {
    Local,
    /// Constraint values live on the spatial axes after integrating the
    /// state over the velocity axes.
    SemiLocal,
}

pub trait ConstraintSet: Send + Sync {
    fn name(&self) -> &str;

    /// Schema of the state the constraint acts on.
    fn schema(&self) -> &Schema;

    /// Schema of the constraint values.
    fn constraint_schema(&self) -> &Schema;

    fn locality(&self) -> Locality {
        Locality::Local
    }

    fn value(&self, state: &State) -> Result<State>;

    /// `Q^ u`, the linearization at `state` applied to a tangent.
    fn frechet(&self, state: &State, u: &Tangent) -> Result<State>;

    /// `Q^dagger w`
    fn frechet_adjoint(&self, state: &State, w: &State) -> Result<Cotangent>;

    /// Semi-local constraints can restrict their velocity integration to the
    /// central `fraction` of the velocity box; used to detect operators whose
    /// norm grows with the velocity cutoff.
    fn truncated(&self, _fraction: f64) -> Option<Arc<dyn ConstraintSet>> {
        None
    }

    /// Linear constraints have a state-independent Frechet derivative.
    fn is_linear(&self) -> bool {
        true
    }
}

pub type Constraint = Arc<dyn ConstraintSet>;

pub fn q_value(q: &dyn ConstraintSet, state: &State) -> Result<State> {
    state.check_schema(q.schema())?;
    q.value(state)
}

pub fn frechet(q: &dyn ConstraintSet, state: &State, u: &Tangent) -> Result<State> {
    u.check_schema(q.schema())?;
    q.frechet(state, u)
}

pub fn frechet_adjoint(q: &dyn ConstraintSet, state: &State, w: &State) -> Result<Cotangent> {
    w.check_schema(q.constraint_schema())?;
    q.frechet_adjoint(state, w)
}

/// `|<Q^ u, w> - <u, Q^dagger w>| / (|Q^ u| |w| + |u| |Q^dagger w|)`
pub fn frechet_pair_residual(q: &dyn ConstraintSet, state: &State, u: &Tangent, w: &State) -> Result<f64> {
    let qu = frechet(q, state, u)?;
    let qtw = frechet_adjoint(q, state, w)?;
    let lhs = pairing(&qu, w)?;
    let rhs = pairing(u, &qtw)?;
    let scale = qu.norm() * w.norm() + u.norm() * qtw.norm();
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
}

/// Constraint given by an explicit matrix acting on the flattened state.
/// Rows map to the flattened constraint values.
pub struct DenseConstraint {
    name: String,
    schema: Schema,
    constraint_schema: Schema,
    grid: Arc<Grid>,
    matrix: nalgebra::DMatrix<f64>,
    offset: nalgebra::DVector<f64>,
}

impl fmt::Debug for DenseConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseConstraint({}, {}x{})", self.name, self.matrix.nrows(), self.matrix.ncols())
    }
}

/// Flattened samples of a state, slot by slot and component by component.
pub fn flatten(state: &State) -> Vec<f64> {
    state
        .fields()
        .iter()
        .flat_map(|f| f.components().iter().flatten().copied())
        .collect()
}

/// Inverse of [`flatten`].
pub fn unflatten(schema: &Schema, grid: &Arc<Grid>, data: &[f64]) -> Result<State> {
    let mut fields = Vec::with_capacity(schema.len());
    let mut at = 0;
    for slot in schema.slots() {
        let n = grid.support_len(slot.rank);
        let mut comps = Vec::new();
        for _ in 0..slot.rank.multiplicity() {
            let end = at + n;
            if end > data.len() {
                return Err(Error::SchemaMismatch("flat vector too short".into()));
            }
            comps.push(data[at..end].to_vec());
            at = end;
        }
        fields.push(Field::from_components(grid, slot.rank, comps)?);
    }
    if at != data.len() {
        return Err(Error::SchemaMismatch("flat vector too long".into()));
    }
    State::new(schema.clone(), fields)
}

/// Cell volume attached to every flattened entry.
pub fn flat_weights(schema: &Schema, grid: &Grid) -> Vec<f64> {
    schema
        .slots()
        .iter()
        .flat_map(|s| {
            let n = grid.support_len(s.rank) * s.rank.multiplicity();
            std::iter::repeat(grid.cell_volume(s.rank)).take(n)
        })
        .collect()
}

pub fn flat_len(schema: &Schema, grid: &Grid) -> usize {
    schema
        .slots()
        .iter()
        .map(|s| grid.support_len(s.rank) * s.rank.multiplicity())
        .sum()
}

impl DenseConstraint {
    /// `Q[chi] = M flatten(chi) - offset`
    pub fn new(
        name: impl Into<String>,
        schema: Schema,
        constraint_schema: Schema,
        grid: Arc<Grid>,
        matrix: nalgebra::DMatrix<f64>,
        offset: Option<nalgebra::DVector<f64>>,
    ) -> Result<Self> {
        let n = flat_len(&schema, &grid);
        let m = flat_len(&constraint_schema, &grid);
        if matrix.shape() != (m, n) {
            return Err(Error::SchemaMismatch(format!(
                "matrix is {:?}, expected ({m}, {n})",
                matrix.shape()
            )));
        }
        let offset = offset.unwrap_or_else(|| nalgebra::DVector::zeros(m));
        Ok(Self {
            name: name.into(),
            schema,
            constraint_schema,
            grid,
            matrix,
            offset,
        })
    }

    pub fn matrix(&self) -> &nalgebra::DMatrix<f64> {
        &self.matrix
    }
}

impl ConstraintSet for DenseConstraint {
    fn name(&self) -> &str {
        &self.name
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn constraint_schema(&self) -> &Schema {
        &self.constraint_schema
    }
    fn value(&self, state: &State) -> Result<State> {
        let x = nalgebra::DVector::from_vec(flatten(state));
        let y = &self.matrix * x - &self.offset;
        unflatten(&self.constraint_schema, &self.grid, y.as_slice())
    }
    fn frechet(&self, _state: &State, u: &Tangent) -> Result<State> {
        let x = nalgebra::DVector::from_vec(flatten(u));
        unflatten(&self.constraint_schema, &self.grid, (&self.matrix * x).as_slice())
    }
    fn frechet_adjoint(&self, _state: &State, w: &State) -> Result<Cotangent> {
        let wc = flat_weights(&self.constraint_schema, &self.grid);
        let ws = flat_weights(&self.schema, &self.grid);
        let y: Vec<f64> = flatten(w).iter().zip(&wc).map(|(a, b)| a * b).collect();
        let z = self.matrix.transpose() * nalgebra::DVector::from_vec(y);
        let z: Vec<f64> = z.iter().zip(&ws).map(|(a, b)| a / b).collect();
        unflatten(&self.schema, &self.grid, &z)
    }
}

type InverseFn = Arc<dyn Fn(&State, &State) -> Result<State> + Send + Sync>;

/// How `A^{-1}` (restricted to the relevant range) is realized.
#[derive(Clone)]
pub enum AInverse {
    /// Iterative CGLS solve of `A y = w`.
    Krylov(SolverOptions),
    /// Closed-form `(chi, w) -> A^{-1} w`.
    ClosedForm(InverseFn),
    /// Closed-form composite `(chi, u) -> A^{-1} Q^ u`, for operators `A`
    /// that are only invertible after composition with `Q^`.
    Composite(InverseFn),
}

impl fmt::Debug for AInverse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AInverse::Krylov(o) => write!(f, "Krylov({o:?})"),
            AInverse::ClosedForm(_) => f.write_str("ClosedForm"),
            AInverse::Composite(_) => f.write_str("Composite"),
        }
    }
}

/// `A = Q^ J Q^dagger` on constraint fields.
#[derive(Clone)]
pub struct AOperator {
    pub constraint: Constraint,
    pub bracket: BracketOperator,
    pub inverse: AInverse,
}

impl AOperator {
    pub fn new(constraint: Constraint, bracket: BracketOperator, inverse: AInverse) -> Result<Self> {
        if constraint.schema() != bracket.schema() {
            return Err(Error::SchemaMismatch(format!(
                "constraint {} and bracket {} act on different schemas",
                constraint.name(),
                bracket.name()
            )));
        }
        Ok(Self {
            constraint,
            bracket,
            inverse,
        })
    }

    pub fn krylov(constraint: Constraint, bracket: BracketOperator) -> Result<Self> {
        Self::new(constraint, bracket, AInverse::Krylov(SolverOptions::default()))
    }

    pub fn with_inverse(&self, inverse: AInverse) -> Self {
        Self {
            inverse,
            ..self.clone()
        }
    }

    pub fn apply(&self, state: &State, w: &State) -> Result<State> {
        let qt = frechet_adjoint(self.constraint.as_ref(), state, w)?;
        let jq = apply_j(self.bracket.as_ref(), state, &qt)?;
        frechet(self.constraint.as_ref(), state, &jq)
    }

    /// Iterative solve regardless of the configured strategy. `A` is
    /// antisymmetric, so its adjoint is `-A`.
    pub fn solve_krylov(&self, state: &State, w: &State, opts: SolverOptions) -> Result<State> {
        w.check_schema(self.constraint.constraint_schema())?;
        let sol = cgls(
            |y| self.apply(state, y),
            |y| Ok(self.apply(state, y)?.scaled(-1.0)),
            w,
            opts,
        )?;
        Ok(sol.x)
    }

    /// `y` with `|A y - w| <= tol |w|`; uses the closed form when configured.
    pub fn solve(&self, state: &State, w: &State, tol: f64, max_iter: Option<usize>) -> Result<State> {
        match &self.inverse {
            AInverse::ClosedForm(inv) => {
                w.check_schema(self.constraint.constraint_schema())?;
                inv(state, w)
            }
            _ => self.solve_krylov(state, w, SolverOptions { tol, max_iter }),
        }
    }

    /// `A^{-1} Q^ u` using the configured strategy.
    pub fn inverse_after_frechet(&self, state: &State, u: &Tangent) -> Result<State> {
        match &self.inverse {
            AInverse::Composite(f) => f(state, u),
            AInverse::ClosedForm(inv) => inv(state, &frechet(self.constraint.as_ref(), state, u)?),
            AInverse::Krylov(opts) => {
                let w = frechet(self.constraint.as_ref(), state, u)?;
                self.solve_krylov(state, &w, *opts)
            }
        }
    }
}

pub fn a_apply(a: &AOperator, state: &State, w: &State) -> Result<State> {
    a.apply(state, w)
}

pub fn a_solve(a: &AOperator, state: &State, w: &State, tol: f64, max_iter: Option<usize>) -> Result<State> {
    a.solve(state, w, tol, max_iter)
}

/// `|<w1, A w2> + <w2, A w1>| / (|w1| |w2|)`
pub fn a_antisymmetry_residual(a: &AOperator, state: &State, w1: &State, w2: &State) -> Result<f64> {
    let x = pairing(w1, &a.apply(state, w2)?)?;
    let y = pairing(w2, &a.apply(state, w1)?)?;
    let scale = w1.norm() * w2.norm();
    Ok(if scale == 0.0 { 0.0 } else { (x + y).abs() / scale })
}

/// Scalar constraint schema with the given slot names.
pub fn scalar_schema(names: &[&str]) -> Schema {
    let slots: Vec<(&str, Rank)> = names.iter().map(|n| (*n, Rank::Scalar)).collect();
    Schema::new(&slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::random_state;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn dense_constraint_adjoint_matches_transpose() {
        let g = Arc::new(Grid::cubic(1, 16, 2.0 * PI).unwrap());
        let schema = Schema::new(&[("q", Rank::Scalar), ("p", Rank::Scalar)]);
        let cs = scalar_schema(&["c"]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = nalgebra::DMatrix::from_fn(16, 32, |_, _| rng.gen_range(-1.0..1.0));
        let q = DenseConstraint::new("dense", schema.clone(), cs.clone(), g.clone(), m.clone(), None).unwrap();
        let u = random_state(&schema, &g, 4, 5, false).unwrap();
        let w = random_state(&cs, &g, 5, 5, false).unwrap();
        assert!(frechet_pair_residual(&q, &u, &u, &w).unwrap() <= 1e-12);
        // explicit transpose oracle: all weights equal, so Q^dagger = M^T
        let expect = m.transpose() * nalgebra::DVector::from_vec(flatten(&w));
        let got = flatten(&frechet_adjoint(&q, &u, &w).unwrap());
        for (a, b) in got.iter().zip(expect.iter()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn flatten_round_trip() {
        let g = Arc::new(Grid::cubic(2, 4, 1.0).unwrap());
        let schema = Schema::new(&[("a", Rank::Scalar), ("b", Rank::Vector(2))]);
        let s = random_state(&schema, &g, 1, 1, false).unwrap();
        assert_eq!(unflatten(&schema, &g, &flatten(&s)).unwrap(), s);
        assert!(unflatten(&schema, &g, &[0.0; 3]).is_err());
    }
}
