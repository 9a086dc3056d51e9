//! One-dimensional two-field toy system small enough for dense oracles.
//!
//! `chi = (q, p)` on a periodic line, `J = [[d_x, m], [-m, d_x]]` with
//! `m(x) = 1 + cos(x)/2`, constraint `d_x q`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::brackets::PoissonOperator;
use crate::calculus;
use crate::constraints::{scalar_schema, AInverse, AOperator, ConstraintSet};
use crate::error::{Error, Result};
use crate::fields::{Cotangent, Field, Grid, Rank, Schema, State, Tangent};
use crate::functionals::{Functional, StateMap};
use crate::krylov::SolverOptions;

use super::SystemSpec;

pub const POINTS: usize = 16;

pub fn schema() -> Schema {
    Schema::new(&[("q", Rank::Scalar), ("p", Rank::Scalar)])
}

pub fn grid() -> Arc<Grid> {
    Arc::new(Grid::cubic(1, POINTS, 2.0 * PI).expect("valid toy grid"))
}

fn d_x(f: &Field) -> Result<Field> {
    let g = calculus::grad(f)?;
    Ok(Field::from_parts_unchecked(f.grid(), Rank::Scalar, g.into_components()))
}

pub struct ToyBracket {
    schema: Schema,
    coupling: Field,
}

impl ToyBracket {
    pub fn new(grid: &Arc<Grid>) -> Result<Self> {
        if grid.spatial_dims() != 1 || grid.velocity_dims() != 0 {
            return Err(Error::InvalidGrid("toy system needs a 1-D spatial grid".into()));
        }
        Ok(Self {
            schema: schema(),
            coupling: Field::scalar_from_fn(grid, |x| 1.0 + 0.5 * x[0].cos()),
        })
    }
}

impl PoissonOperator for ToyBracket {
    fn name(&self) -> &str {
        "toy"
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn apply(&self, _state: &State, a: &Cotangent) -> Result<Tangent> {
        let (aq, ap) = (a.field(0), a.field(1));
        let mut q = d_x(aq)?;
        q.axpy(1.0, &calculus::times(&self.coupling, ap)?)?;
        let mut p = d_x(ap)?;
        p.axpy(-1.0, &calculus::times(&self.coupling, aq)?)?;
        State::new(self.schema.clone(), vec![q, p])
    }
    fn affine_in_state(&self) -> bool {
        true
    }
    fn state_gradient(&self, a: &Cotangent, _b: &Cotangent) -> Option<Result<Cotangent>> {
        Some(Ok(a.zeros_like()))
    }
}

pub struct ToyConstraint {
    schema: Schema,
    constraint_schema: Schema,
}

impl Default for ToyConstraint {
    fn default() -> Self {
        Self {
            schema: schema(),
            constraint_schema: scalar_schema(&["dq"]),
        }
    }
}

impl ConstraintSet for ToyConstraint {
    fn name(&self) -> &str {
        "gradient"
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn constraint_schema(&self) -> &Schema {
        &self.constraint_schema
    }
    fn value(&self, state: &State) -> Result<State> {
        self.frechet(state, state)
    }
    fn frechet(&self, _state: &State, u: &Tangent) -> Result<State> {
        State::new(self.constraint_schema.clone(), vec![d_x(u.field(0))?])
    }
    fn frechet_adjoint(&self, _state: &State, w: &State) -> Result<Cotangent> {
        State::new(
            self.schema.clone(),
            vec![d_x(w.field(0))?.scaled(-1.0), Field::zeros(w.grid(), Rank::Scalar)],
        )
    }
}

pub fn toy_system() -> Result<SystemSpec> {
    let g = grid();
    let mut spec = SystemSpec::new("toy", g.clone(), schema());
    let bracket: crate::brackets::BracketOperator = Arc::new(ToyBracket::new(&g)?);
    let constraint: crate::constraints::Constraint = Arc::new(ToyConstraint::default());
    spec.hamiltonian = Some(Functional::Quadratic {
        operator: StateMap::new("identity", |u: &State| Ok(u.clone())),
        linear: None,
        constant: 0.0,
    });
    spec.reductions.push((
        "dirac".into(),
        AOperator::new(
            constraint.clone(),
            bracket.clone(),
            AInverse::Krylov(SolverOptions::with_tol(1e-13)),
        )?,
    ));
    spec.brackets.push(("toy".into(), bracket));
    spec.constraints.push(("gradient".into(), constraint));
    Ok(spec)
}
