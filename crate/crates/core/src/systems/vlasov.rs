//! Vlasov-Maxwell in `(f, E, B)` with tainted or projected gyrobracket and
//! the parent family with operator `D`, plus the reduction to Vlasov-Poisson.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::brackets::{BracketOperator, PoissonOperator};
use crate::calculus::{
    broadcast, curl, div, grad, inv_lap, inv_sqrt_neg_lap, phase_partial, solenoidal_part, velocity_integral,
};
use crate::constraints::{AInverse, AOperator, Constraint, ConstraintSet};
use crate::error::{Error, Result};
use crate::fields::{integrate, Cotangent, Field, Grid, Rank, Schema, State, Tangent};
use crate::functionals::Functional;
use crate::reduction::DiracOperator;

use super::{ClosedForm, SystemSpec};

pub const F: usize = 0;
pub const E: usize = 1;
pub const B: usize = 2;

pub fn schema() -> Schema {
    Schema::new(&[("f", Rank::Phase), ("E", Rank::Vector(3)), ("B", Rank::Vector(3))])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GyroVariant {
    Tainted,
    Projected,
}

impl GyroVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tainted => "tainted",
            Self::Projected => "projected",
        }
    }
}

/// Operator `D` of the parent bracket
/// `{F,G}_VM + int (div F_B D div G_E - div F_E D^dagger div G_B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentD {
    None,
    InvLap,
    InvSqrtNegLap,
}

impl ParentD {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::InvLap => "inv_lap",
            Self::InvSqrtNegLap => "inv_sqrt_neg_lap",
        }
    }

    /// `D` on a scalar field; both choices are self-adjoint.
    pub fn apply(self, f: &Field) -> Result<Option<Field>> {
        match self {
            Self::None => Ok(None),
            Self::InvLap => inv_lap(f).map(Some),
            Self::InvSqrtNegLap => inv_sqrt_neg_lap(f).map(Some),
        }
    }
}

fn require_phase_3x3(grid: &Grid) -> Result<()> {
    if grid.spatial_dims() != 3 || grid.velocity_dims() != 3 {
        return Err(Error::InvalidGrid(
            "Vlasov-Maxwell needs 3 spatial and 3 velocity dimensions".into(),
        ));
    }
    Ok(())
}

/// Spatial and velocity gradients of a phase-space array.
struct PhaseGradient {
    x: [Vec<f64>; 3],
    v: [Vec<f64>; 3],
}

impl PhaseGradient {
    fn of(grid: &Grid, data: &[f64]) -> Self {
        Self {
            x: std::array::from_fn(|i| phase_partial(grid, data, i)),
            v: std::array::from_fn(|i| phase_partial(grid, data, 3 + i)),
        }
    }
}

/// `[g, h]_c + B . (d_v g x d_v h)` pointwise, with `b` given on space.
fn small_bracket(grid: &Grid, g: &PhaseGradient, h: &PhaseGradient, b: Option<&Field>) -> Vec<f64> {
    let n = g.x[0].len();
    let mut out = vec![0.0; n];
    for i in 0..3 {
        for k in 0..n {
            out[k] += g.x[i][k] * h.v[i][k] - g.v[i][k] * h.x[i][k];
        }
    }
    if let Some(b) = b {
        let bb: Vec<Vec<f64>> = (0..3).map(|c| broadcast(grid, b.component(c))).collect();
        for k in 0..n {
            let (gv, hv) = ([g.v[0][k], g.v[1][k], g.v[2][k]], [h.v[0][k], h.v[1][k], h.v[2][k]]);
            out[k] += bb[0][k] * (gv[1] * hv[2] - gv[2] * hv[1])
                + bb[1][k] * (gv[2] * hv[0] - gv[0] * hv[2])
                + bb[2][k] * (gv[0] * hv[1] - gv[1] * hv[0]);
        }
    }
    out
}

pub struct VlasovMaxwellBracket {
    name: String,
    gyro: GyroVariant,
    parent: ParentD,
    schema: Schema,
}

impl VlasovMaxwellBracket {
    pub fn new(gyro: GyroVariant, parent: ParentD) -> Self {
        let name = match parent {
            ParentD::None => gyro.name().to_string(),
            d => format!("{}+parent_{}", gyro.name(), d.name()),
        };
        Self {
            name,
            gyro,
            parent,
            schema: schema(),
        }
    }

    fn magnetic(&self, state: &State) -> Result<Field> {
        match self.gyro {
            GyroVariant::Tainted => Ok(state.field(B).clone()),
            GyroVariant::Projected => solenoidal_part(state.field(B)),
        }
    }
}

impl PoissonOperator for VlasovMaxwellBracket {
    fn name(&self) -> &str {
        &self.name
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn apply(&self, state: &State, a: &Cotangent) -> Result<Tangent> {
        let grid = state.grid().clone();
        let f = state.field(F).component(0);
        let bm = self.magnetic(state)?;
        let gf = PhaseGradient::of(&grid, f);
        let ga = PhaseGradient::of(&grid, a.field(F).component(0));
        let (a_e, a_b) = (a.field(E), a.field(B));

        let mut d_f = small_bracket(&grid, &gf, &ga, Some(&bm));
        d_f.iter_mut().for_each(|x| *x = -*x);
        for i in 0..3 {
            let ae = broadcast(&grid, a_e.component(i));
            for k in 0..d_f.len() {
                d_f[k] -= gf.v[i][k] * ae[k];
            }
        }

        let mut d_e = curl(a_b)?;
        for i in 0..3 {
            let prod: Vec<f64> = f.iter().zip(&ga.v[i]).map(|(x, y)| x * y).collect();
            let m = velocity_integral(&grid, &prod);
            for (o, x) in d_e.component_mut(i).iter_mut().zip(m) {
                *o -= x;
            }
        }
        let mut d_b = curl(a_e)?.scaled(-1.0);
        if let Some(dd) = self.parent.apply(&div(a_b)?)? {
            d_e.axpy(1.0, &grad(&dd)?)?;
        }
        if let Some(dd) = self.parent.apply(&div(a_e)?)? {
            d_b.axpy(-1.0, &grad(&dd)?)?;
        }
        State::new(
            self.schema.clone(),
            vec![Field::from_components(&grid, Rank::Phase, vec![d_f])?, d_e, d_b],
        )
    }
}

/// `H = int f v^2 / 2 + int (E^2 + B^2) / 2`
pub fn hamiltonian() -> Functional {
    fn kinetic(grid: &Grid) -> Vec<f64> {
        let v2: Vec<f64> = (0..grid.n_velocity())
            .map(|j| grid.velocity_coord(j).iter().map(|x| x * x).sum::<f64>() * 0.5)
            .collect();
        let mut out = Vec::with_capacity(grid.n_phase());
        for _ in 0..grid.n_spatial() {
            out.extend_from_slice(&v2);
        }
        out
    }
    let value = |chi: &State| -> f64 {
        let g = chi.grid();
        let k = Field::from_components(g, Rank::Phase, vec![kinetic(g)]).expect("phase field");
        let kin = chi.field(F).inner(&k).unwrap_or(f64::NAN);
        kin + 0.5 * (chi.field(E).norm().powi(2) + chi.field(B).norm().powi(2))
    };
    let gradient = |chi: &State| -> Result<State> {
        let g = chi.grid();
        State::new(
            schema(),
            vec![
                Field::from_components(g, Rank::Phase, vec![kinetic(g)])?,
                chi.field(E).clone(),
                chi.field(B).clone(),
            ],
        )
    };
    Functional::smooth(value, gradient)
}

/// Charge density `rho = int f d^3v`.
pub fn charge_density(state: &State) -> Result<Field> {
    Field::scalar(state.grid(), velocity_integral(state.grid(), state.field(F).component(0)))
}

/// `Q = (div E - rho, div B)`
pub struct GaussConstraint {
    schema: Schema,
    constraint_schema: Schema,
}

impl Default for GaussConstraint {
    fn default() -> Self {
        Self {
            schema: schema(),
            constraint_schema: crate::constraints::scalar_schema(&["gauss", "div_b"]),
        }
    }
}

impl ConstraintSet for GaussConstraint {
    fn name(&self) -> &str {
        "gauss"
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
        let mut gauss = div(u.field(E))?;
        gauss.axpy(-1.0, &charge_density(u)?)?;
        State::new(self.constraint_schema.clone(), vec![gauss, div(u.field(B))?])
    }
    fn frechet_adjoint(&self, state: &State, w: &State) -> Result<Cotangent> {
        let g = state.grid();
        let f = broadcast(g, w.field(0).component(0)).into_iter().map(|x| -x).collect();
        State::new(
            self.schema.clone(),
            vec![
                Field::from_components(g, Rank::Phase, vec![f])?,
                grad(w.field(0))?.scaled(-1.0),
                grad(w.field(1))?.scaled(-1.0),
            ],
        )
    }
}

pub fn vlasov_maxwell_system(grid: Arc<Grid>, gyro: GyroVariant, parent: ParentD) -> Result<SystemSpec> {
    require_phase_3x3(&grid)?;
    let mut spec = SystemSpec::new("vlasov_maxwell", grid, schema());
    spec.hamiltonian = Some(hamiltonian());
    let chosen: BracketOperator = Arc::new(VlasovMaxwellBracket::new(gyro, parent));
    spec.brackets.push((chosen.name().to_string(), chosen));
    for g in [GyroVariant::Projected, GyroVariant::Tainted] {
        if g != gyro || parent != ParentD::None {
            spec.brackets
                .push((g.name().into(), Arc::new(VlasovMaxwellBracket::new(g, ParentD::None))));
        }
    }
    spec.constraints.push(("gauss".into(), Arc::new(GaussConstraint::default())));
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Vlasov-Poisson reduction
// ---------------------------------------------------------------------------

/// `Q = (B - B0, curl E)`
pub struct PoissonConstraint {
    b0: Field,
    schema: Schema,
    constraint_schema: Schema,
}

impl PoissonConstraint {
    pub fn new(b0: Field) -> Result<Self> {
        if b0.rank() != Rank::Vector(3) {
            return Err(Error::RankMismatch("background field must be a 3-vector".into()));
        }
        Ok(Self {
            b0,
            schema: schema(),
            constraint_schema: constraint_schema(),
        })
    }
}

pub fn constraint_schema() -> Schema {
    Schema::new(&[("b", Rank::Vector(3)), ("curl_e", Rank::Vector(3))])
}

impl ConstraintSet for PoissonConstraint {
    fn name(&self) -> &str {
        "frozen_b_curl_free_e"
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn constraint_schema(&self) -> &Schema {
        &self.constraint_schema
    }
    fn value(&self, state: &State) -> Result<State> {
        let mut b = state.field(B).clone();
        b.axpy(-1.0, &self.b0)?;
        State::new(self.constraint_schema.clone(), vec![b, curl(state.field(E))?])
    }
    fn frechet(&self, _state: &State, u: &Tangent) -> Result<State> {
        State::new(self.constraint_schema.clone(), vec![u.field(B).clone(), curl(u.field(E))?])
    }
    fn frechet_adjoint(&self, state: &State, w: &State) -> Result<Cotangent> {
        State::new(
            self.schema.clone(),
            vec![
                Field::zeros(state.grid(), Rank::Phase),
                curl(w.field(1))?,
                w.field(0).clone(),
            ],
        )
    }
}

/// Non-uniform divergence-free background `B0 = (sin z, sin x, 1 + sin y)`.
pub fn default_background(grid: &Arc<Grid>) -> Field {
    Field::vector_from_fn(grid, 3, |x| vec![x[2].sin(), x[0].sin(), 1.0 + x[1].sin()])
}

/// `A^-1 Q^ u = (-inv_lap curl u_E, inv_lap P_S u_B)`
pub fn a_inverse_after_frechet(_state: &State, u: &Tangent) -> Result<State> {
    State::new(
        constraint_schema(),
        vec![
            inv_lap(&curl(u.field(E))?)?.scaled(-1.0),
            inv_lap(&solenoidal_part(u.field(B))?)?,
        ],
    )
}

/// `A = [[0, -curl curl], [curl curl, 0]]`
pub fn a_matrix(_state: &State, w: &State) -> Result<State> {
    State::new(
        constraint_schema(),
        vec![
            curl(&curl(w.field(1))?)?.scaled(-1.0),
            curl(&curl(w.field(0))?)?,
        ],
    )
}

/// `int f d_v a dv` as a spatial vector field.
fn moment_of_velocity_gradient(state: &State, a: &[f64]) -> Result<Field> {
    let grid = state.grid();
    let f = state.field(F).component(0);
    let comps = (0..3)
        .map(|i| {
            let dv = phase_partial(grid, a, 3 + i);
            let prod: Vec<f64> = f.iter().zip(&dv).map(|(x, y)| x * y).collect();
            velocity_integral(grid, &prod)
        })
        .collect();
    Field::from_components(grid, Rank::Vector(3), comps)
}

fn compressible(v: &Field) -> Result<Field> {
    grad(&inv_lap(&div(v)?)?)
}

/// `P_perp = diag(1, grad inv_lap div, 0)`
pub fn orthogonal_projector_closed(state: &State, a: &Cotangent) -> Result<Cotangent> {
    State::new(
        schema(),
        vec![
            a.field(F).clone(),
            compressible(a.field(E))?,
            Field::zeros(state.grid(), Rank::Vector(3)),
        ],
    )
}

/// `P* = [[1, 0, 0], [0, grad inv_lap div, 0], [-inv_lap curl f d_v, 0, grad inv_lap div]]`
pub fn dirac_projector_closed(state: &State, a: &Cotangent) -> Result<Cotangent> {
    let m = moment_of_velocity_gradient(state, a.field(F).component(0))?;
    let mut b = compressible(a.field(B))?;
    b.axpy(-1.0, &inv_lap(&curl(&m)?)?)?;
    State::new(schema(), vec![a.field(F).clone(), compressible(a.field(E))?, b])
}

/// Vlasov-Poisson Poisson matrix
/// `[[-[f, .], -d_v f . grad inv_lap div, 0], [-grad inv_lap div (f d_v), 0, 0], [0, 0, 0]]`.
pub fn reduced_matrix_closed(state: &State, a: &Cotangent) -> Result<Tangent> {
    let grid = state.grid().clone();
    let bp = solenoidal_part(state.field(B))?;
    let gf = PhaseGradient::of(&grid, state.field(F).component(0));
    let ga = PhaseGradient::of(&grid, a.field(F).component(0));
    let mut d_f = small_bracket(&grid, &gf, &ga, Some(&bp));
    let ce = compressible(a.field(E))?;
    d_f.iter_mut().for_each(|x| *x = -*x);
    for i in 0..3 {
        let c = broadcast(&grid, ce.component(i));
        for k in 0..d_f.len() {
            d_f[k] -= gf.v[i][k] * c[k];
        }
    }
    let d_e = compressible(&moment_of_velocity_gradient(state, a.field(F).component(0))?)?.scaled(-1.0);
    State::new(
        schema(),
        vec![
            Field::from_components(&grid, Rank::Phase, vec![d_f])?,
            d_e,
            Field::zeros(&grid, Rank::Vector(3)),
        ],
    )
}

/// `int f [F_f - inv_lap div F_E, G_f - inv_lap div G_E]`
pub fn reduced_bracket_closed(state: &State, a: &Cotangent, b: &Cotangent) -> Result<f64> {
    let grid = state.grid().clone();
    let shifted = |c: &Cotangent| -> Result<Vec<f64>> {
        let phi = broadcast(&grid, inv_lap(&div(c.field(E))?)?.component(0));
        Ok(c.field(F).component(0).iter().zip(&phi).map(|(x, y)| x - y).collect())
    };
    let ga = PhaseGradient::of(&grid, &shifted(a)?);
    let gb = PhaseGradient::of(&grid, &shifted(b)?);
    let bp = solenoidal_part(state.field(B))?;
    let density = small_bracket(&grid, &ga, &gb, Some(&bp));
    let weighted: Vec<f64> = density.iter().zip(state.field(F).component(0)).map(|(x, y)| x * y).collect();
    integrate(&Field::from_components(&grid, Rank::Phase, vec![weighted])?)
}

pub fn vlasov_poisson_reduction(grid: Arc<Grid>, b0: Option<Field>) -> Result<SystemSpec> {
    require_phase_3x3(&grid)?;
    let b0 = b0.unwrap_or_else(|| default_background(&grid));
    let mut spec = SystemSpec::new("vlasov_poisson", grid, schema());
    spec.hamiltonian = Some(hamiltonian());
    let parent: BracketOperator = Arc::new(VlasovMaxwellBracket::new(GyroVariant::Projected, ParentD::None));
    let constraint: Constraint = Arc::new(PoissonConstraint::new(b0)?);
    let a_op = AOperator::new(
        constraint.clone(),
        parent.clone(),
        AInverse::Composite(Arc::new(a_inverse_after_frechet)),
    )?;
    let reduced: BracketOperator = Arc::new(DiracOperator::new(a_op.clone()));
    spec.brackets = vec![("dirac".into(), reduced), ("parent".into(), parent)];
    spec.constraints.push(("frozen_b_curl_free_e".into(), constraint));
    spec.reductions.push(("dirac".into(), a_op));
    spec.closed_forms = vec![
        ("a".into(), ClosedForm::operator(a_matrix)),
        ("a_inverse_after_frechet".into(), ClosedForm::operator(a_inverse_after_frechet)),
        ("orthogonal_projector".into(), ClosedForm::operator(orthogonal_projector_closed)),
        ("dirac_projector".into(), ClosedForm::operator(dirac_projector_closed)),
        ("dirac_matrix".into(), ClosedForm::operator(reduced_matrix_closed)),
        ("dirac_bracket".into(), ClosedForm::bracket(reduced_bracket_closed)),
    ];
    Ok(spec)
}

/// Removes the spatial mean of the `E` and `B` slots. On a periodic box a
/// uniform `E` is curl-free, so the generic reduction keeps its dynamics
/// while the written-out Vlasov-Poisson operators (derived for fields that
/// vanish at infinity) do not; comparisons are made on the mean-free part.
pub fn without_field_means(state: &State) -> State {
    let mut out = state.clone();
    for slot in [E, B] {
        let f = out.field_mut(slot);
        for c in 0..3 {
            let comp = f.component_mut(c);
            let m = comp.iter().sum::<f64>() / comp.len() as f64;
            comp.iter_mut().for_each(|x| *x -= m);
        }
    }
    out
}
