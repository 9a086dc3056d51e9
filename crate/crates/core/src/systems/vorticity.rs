//! Three-dimensional vorticity dynamics `omega_t = curl(v x omega)` with the
//! tainted bracket `int omega . (curl F) x (curl G)` and its corrected form in
//! which `omega` is replaced by its solenoidal part.

use std::sync::Arc;

use crate::brackets::{BracketOperator, PoissonOperator};
use crate::calculus::{cross, curl, div, grad, inv_lap, solenoidal_part};
use crate::constraints::{scalar_schema, ConstraintSet};
use crate::error::{Error, Result};
use crate::fields::{Cotangent, Field, Grid, Rank, Schema, State, Tangent};
use crate::functionals::{Functional, StateMap};

use super::SystemSpec;

pub fn schema() -> Schema {
    Schema::new(&[("omega", Rank::Vector(3))])
}

fn require_3d(grid: &Grid) -> Result<()> {
    if grid.spatial_dims() != 3 || grid.velocity_dims() != 0 {
        return Err(Error::InvalidGrid("vorticity system needs a 3-D spatial grid".into()));
    }
    Ok(())
}

pub struct VorticityBracket {
    name: &'static str,
    corrected: bool,
    schema: Schema,
}

impl VorticityBracket {
    pub fn tainted() -> Self {
        Self {
            name: "tainted",
            corrected: false,
            schema: schema(),
        }
    }

    pub fn corrected() -> Self {
        Self {
            name: "corrected",
            corrected: true,
            schema: schema(),
        }
    }

    fn omega(&self, state: &State) -> Result<Field> {
        if self.corrected {
            solenoidal_part(state.field(0))
        } else {
            Ok(state.field(0).clone())
        }
    }
}

impl PoissonOperator for VorticityBracket {
    fn name(&self) -> &str {
        self.name
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn apply(&self, state: &State, a: &Cotangent) -> Result<Tangent> {
        let w = self.omega(state)?;
        let out = curl(&cross(&curl(a.field(0))?, &w)?)?;
        State::new(self.schema.clone(), vec![out])
    }
    fn affine_in_state(&self) -> bool {
        true
    }
    fn state_gradient(&self, a: &Cotangent, b: &Cotangent) -> Option<Result<Cotangent>> {
        Some((|| {
            let c = cross(&curl(a.field(0))?, &curl(b.field(0))?)?;
            let c = if self.corrected { solenoidal_part(&c)? } else { c };
            State::new(self.schema.clone(), vec![c])
        })())
    }
}

/// `v = -curl(inv_lap(omega))`
pub fn velocity(omega: &Field) -> Result<Field> {
    Ok(curl(&inv_lap(omega)?)?.scaled(-1.0))
}

/// `H = 1/2 int v^2` as a quadratic form in omega with operator
/// `inv_lap curl curl inv_lap`.
pub fn hamiltonian() -> Functional {
    Functional::Quadratic {
        operator: StateMap::new("inv_lap curl curl inv_lap", |u: &State| {
            let k = inv_lap(&curl(&curl(&inv_lap(u.field(0))?)?)?)?;
            State::new(u.schema().clone(), vec![k])
        }),
        linear: None,
        constant: 0.0,
    }
}

/// `Q[omega] = div omega`
pub struct DivergenceConstraint {
    schema: Schema,
    constraint_schema: Schema,
    slot: usize,
    label: String,
}

impl DivergenceConstraint {
    /// Divergence of the vector slot `slot` of `schema`.
    pub fn new(schema: Schema, slot: &str) -> Result<Self> {
        let idx = schema
            .index_of(slot)
            .ok_or_else(|| Error::SchemaMismatch(format!("no slot {slot}")))?;
        if !matches!(schema.slots()[idx].rank, Rank::Vector(_)) {
            return Err(Error::RankMismatch(format!("slot {slot} is not a vector field")));
        }
        Ok(Self {
            constraint_schema: scalar_schema(&["div"]),
            schema,
            slot: idx,
            label: format!("div {slot}"),
        })
    }
}

impl ConstraintSet for DivergenceConstraint {
    fn name(&self) -> &str {
        &self.label
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
        State::new(self.constraint_schema.clone(), vec![div(u.field(self.slot))?])
    }
    fn frechet_adjoint(&self, state: &State, w: &State) -> Result<Cotangent> {
        let mut out = State::zeros(&self.schema, state.grid());
        *out.field_mut(self.slot) = grad(w.field(0))?.scaled(-1.0);
        Ok(out)
    }
}

pub fn vorticity_system(grid: Arc<Grid>) -> Result<SystemSpec> {
    require_3d(&grid)?;
    let mut spec = SystemSpec::new("vorticity", grid, schema());
    spec.hamiltonian = Some(hamiltonian());
    let tainted: BracketOperator = Arc::new(VorticityBracket::tainted());
    let corrected: BracketOperator = Arc::new(VorticityBracket::corrected());
    spec.brackets = vec![("tainted".into(), tainted), ("corrected".into(), corrected)];
    spec.constraints
        .push(("div_omega".into(), Arc::new(DivergenceConstraint::new(schema(), "omega")?)));
    Ok(spec)
}
