//! Compressible MHD in `(rho, v, B, s)` with three magnetic bracket variants,
//! and its Dirac reduction to incompressible MHD.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::brackets::{BracketOperator, PoissonOperator};
use crate::calculus::{cross, curl, div, dot, grad, inv_lap, solenoidal_part, times};
use crate::constraints::{scalar_schema, AInverse, AOperator, Constraint, ConstraintSet};
use crate::error::{Error, Result};
use crate::fields::{integrate, Cotangent, Field, Grid, Rank, Schema, State, Tangent};
use crate::functionals::Functional;
use crate::krylov::SolverOptions;
use crate::reduction::DiracOperator;

use super::vorticity::DivergenceConstraint;
use super::{ClosedForm, SystemSpec};

pub const RHO: usize = 0;
pub const V: usize = 1;
pub const B: usize = 2;
pub const S: usize = 3;

pub fn schema() -> Schema {
    Schema::new(&[
        ("rho", Rank::Scalar),
        ("v", Rank::Vector(3)),
        ("B", Rank::Vector(3)),
        ("s", Rank::Scalar),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagneticVariant {
    /// `B` used as is; Jacobi only holds when `div B = 0`.
    Tainted,
    /// Tainted part plus `int rho^-1 div B (F_v . G_B - F_B . G_v)`.
    DivTerms,
    /// `B` replaced by its solenoidal part.
    Projected,
}

impl MagneticVariant {
    pub const ALL: [MagneticVariant; 3] = [Self::Tainted, Self::DivTerms, Self::Projected];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tainted => "tainted",
            Self::DivTerms => "div_terms",
            Self::Projected => "projected",
        }
    }
}

/// Internal energy `U(rho, s) = kappa rho^(gamma - 1) exp(s / c_v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub kappa: f64,
    pub gamma: f64,
    pub c_v: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            gamma: 5.0 / 3.0,
            c_v: 1.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.kappa > 0.0 && self.c_v > 0.0) {
            return Err(Error::InvalidParameter("kappa and c_v must be positive".into()));
        }
        Ok(())
    }

    pub fn u(&self, rho: f64, s: f64) -> f64 {
        self.kappa * rho.powf(self.gamma - 1.0) * (s / self.c_v).exp()
    }

    /// `dU/drho`
    pub fn u_rho(&self, rho: f64, s: f64) -> f64 {
        (self.gamma - 1.0) * self.u(rho, s) / rho
    }

    /// `dU/ds`
    pub fn u_s(&self, rho: f64, s: f64) -> f64 {
        self.u(rho, s) / self.c_v
    }
}

fn require_3d(grid: &Grid) -> Result<()> {
    if grid.spatial_dims() != 3 || grid.velocity_dims() != 0 {
        return Err(Error::InvalidGrid("MHD needs a 3-D spatial grid".into()));
    }
    Ok(())
}

pub(crate) fn inverse_density(state: &State) -> Result<Field> {
    let rho = state.field(RHO);
    if rho.component(0).iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter("density must be positive everywhere".into()));
    }
    Ok(rho.map(|r| 1.0 / r))
}

fn combine(terms: Vec<(f64, Field)>) -> Result<Field> {
    let mut it = terms.into_iter();
    let (c0, f0) = it.next().expect("at least one term");
    let mut out = f0.scaled(c0);
    for (c, f) in it {
        out.axpy(c, &f)?;
    }
    Ok(out)
}

pub struct MhdBracket {
    variant: MagneticVariant,
    schema: Schema,
}

impl MhdBracket {
    pub fn new(variant: MagneticVariant) -> Self {
        Self {
            variant,
            schema: schema(),
        }
    }
}

impl PoissonOperator for MhdBracket {
    fn name(&self) -> &str {
        self.variant.name()
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn apply(&self, state: &State, a: &Cotangent) -> Result<Tangent> {
        let rinv = inverse_density(state)?;
        let omega = curl(state.field(V))?;
        let grad_s = grad(state.field(S))?;
        let b = state.field(B);
        let bm = match self.variant {
            MagneticVariant::Projected => solenoidal_part(b)?,
            _ => b.clone(),
        };
        let (a_rho, a_v, a_b, a_s) = (a.field(RHO), a.field(V), a.field(B), a.field(S));

        let d_rho = div(a_v)?.scaled(-1.0);
        let mut d_v = combine(vec![
            (-1.0, grad(a_rho)?),
            (-1.0, times(&rinv, &cross(&omega, a_v)?)?),
            (-1.0, times(&rinv, &cross(&bm, &curl(a_b)?)?)?),
            (1.0, times(&rinv, &times(a_s, &grad_s)?)?),
        ])?;
        let mut d_b = curl(&times(&rinv, &cross(&bm, a_v)?)?)?.scaled(-1.0);
        if self.variant == MagneticVariant::DivTerms {
            let w = times(&rinv, &div(b)?)?;
            d_v.axpy(1.0, &times(&w, a_b)?)?;
            d_b.axpy(-1.0, &times(&w, a_v)?)?;
        }
        let d_s = times(&rinv, &dot(&grad_s, a_v)?)?.scaled(-1.0);
        State::new(self.schema.clone(), vec![d_rho, d_v, d_b, d_s])
    }
}

/// `H = int (rho v^2 / 2 + rho U(rho, s) + B^2 / 2)`
pub fn hamiltonian(params: EnergyParams) -> Result<Functional> {
    params.validate()?;
    let value = move |chi: &State| -> f64 {
        let (rho, v, b, s) = (chi.field(RHO), chi.field(V), chi.field(B), chi.field(S));
        let n = rho.component(0).len();
        let mut density = vec![0.0; n];
        for i in 0..n {
            let r = rho.component(0)[i];
            let ss = s.component(0)[i];
            let v2: f64 = (0..3).map(|c| v.component(c)[i].powi(2)).sum();
            let b2: f64 = (0..3).map(|c| b.component(c)[i].powi(2)).sum();
            density[i] = 0.5 * r * v2 + r * params.u(r, ss) + 0.5 * b2;
        }
        Field::scalar(chi.grid(), density)
            .and_then(|f| integrate(&f))
            .unwrap_or(f64::NAN)
    };
    let gradient = move |chi: &State| -> Result<State> {
        let (rho, v, b, s) = (chi.field(RHO), chi.field(V), chi.field(B), chi.field(S));
        let n = rho.component(0).len();
        let mut h_rho = vec![0.0; n];
        let mut h_s = vec![0.0; n];
        for i in 0..n {
            let r = rho.component(0)[i];
            let ss = s.component(0)[i];
            let v2: f64 = (0..3).map(|c| v.component(c)[i].powi(2)).sum();
            h_rho[i] = 0.5 * v2 + params.u(r, ss) + r * params.u_rho(r, ss);
            h_s[i] = r * params.u_s(r, ss);
        }
        let g = chi.grid();
        State::new(
            chi.schema().clone(),
            vec![Field::scalar(g, h_rho)?, times(rho, v)?, b.clone(), Field::scalar(g, h_s)?],
        )
    };
    Ok(Functional::smooth(value, gradient))
}

/// Right-hand sides of the compressible MHD equations written out term by
/// term: continuity, momentum with pressure `rho^2 U_rho` and Lorentz force,
/// induction and entropy advection.
pub fn pde_rhs(state: &State, params: EnergyParams) -> Result<State> {
    let rinv = inverse_density(state)?;
    let (rho, v, b, s) = (state.field(RHO), state.field(V), state.field(B), state.field(S));
    let g = state.grid();
    let pressure: Vec<f64> = rho
        .component(0)
        .iter()
        .zip(s.component(0))
        .map(|(&r, &ss)| r * r * params.u_rho(r, ss))
        .collect();
    let d_rho = div(&times(rho, v)?)?.scaled(-1.0);
    let mut advect = Field::zeros(g, Rank::Vector(3));
    for c in 0..3 {
        let comp = Field::scalar(g, v.component(c).to_vec())?;
        let gc = dot(v, &grad(&comp)?)?;
        advect.component_mut(c).copy_from_slice(gc.component(0));
    }
    let d_v = combine(vec![
        (-1.0, advect),
        (-1.0, times(&rinv, &grad(&Field::scalar(g, pressure)?)?)?),
        (1.0, times(&rinv, &cross(&curl(b)?, b)?)?),
    ])?;
    let d_b = curl(&cross(v, b)?)?;
    let d_s = dot(v, &grad(s)?)?.scaled(-1.0);
    State::new(schema(), vec![d_rho, d_v, d_b, d_s])
}

pub fn compressible_mhd_system(grid: Arc<Grid>, variant: MagneticVariant, params: EnergyParams) -> Result<SystemSpec> {
    require_3d(&grid)?;
    let mut spec = SystemSpec::new("compressible_mhd", grid, schema());
    spec.hamiltonian = Some(hamiltonian(params)?);
    let mut variants = vec![variant];
    variants.extend(MagneticVariant::ALL.iter().copied().filter(|v| *v != variant));
    for v in variants {
        let op: BracketOperator = Arc::new(MhdBracket::new(v));
        spec.brackets.push((v.name().into(), op));
    }
    spec.constraints
        .push(("div_b".into(), Arc::new(DivergenceConstraint::new(schema(), "B")?)));
    spec.parameters = vec![
        ("kappa".into(), params.kappa),
        ("gamma".into(), params.gamma),
        ("c_v".into(), params.c_v),
    ];
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Incompressible reduction
// ---------------------------------------------------------------------------

/// `Q = (rho - rho0, div v)`
pub struct IncompressibleConstraint {
    rho0: f64,
    schema: Schema,
    constraint_schema: Schema,
}

impl IncompressibleConstraint {
    pub fn new(rho0: f64) -> Result<Self> {
        if !(rho0 > 0.0) {
            return Err(Error::InvalidParameter(format!("rho0 must be positive, got {rho0}")));
        }
        Ok(Self {
            rho0,
            schema: schema(),
            constraint_schema: scalar_schema(&["density", "div_v"]),
        })
    }
}

impl ConstraintSet for IncompressibleConstraint {
    fn name(&self) -> &str {
        "incompressibility"
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn constraint_schema(&self) -> &Schema {
        &self.constraint_schema
    }
    fn value(&self, state: &State) -> Result<State> {
        let rho = state.field(RHO).map(|r| r - self.rho0);
        State::new(self.constraint_schema.clone(), vec![rho, div(state.field(V))?])
    }
    fn frechet(&self, _state: &State, u: &Tangent) -> Result<State> {
        State::new(
            self.constraint_schema.clone(),
            vec![u.field(RHO).clone(), div(u.field(V))?],
        )
    }
    fn frechet_adjoint(&self, state: &State, w: &State) -> Result<Cotangent> {
        let g = state.grid();
        State::new(
            self.schema.clone(),
            vec![
                w.field(0).clone(),
                grad(w.field(1))?.scaled(-1.0),
                Field::zeros(g, Rank::Vector(3)),
                Field::zeros(g, Rank::Scalar),
            ],
        )
    }
}

/// `M phi = div(rho^-1 (curl v) x grad phi)`
fn vorticity_block(state: &State, phi: &Field) -> Result<Field> {
    let rinv = inverse_density(state)?;
    let omega = curl(state.field(V))?;
    div(&times(&rinv, &cross(&omega, &grad(phi)?)?)?)
}

fn constraint_pair(w1: Field, w2: Field) -> Result<State> {
    State::new(scalar_schema(&["density", "div_v"]), vec![w1, w2])
}

/// `A = [[0, lap], [-lap, M]]`
pub fn a_matrix(state: &State, w: &State) -> Result<State> {
    let (w1, w2) = (w.field(0), w.field(1));
    let top = crate::calculus::lap(w2)?;
    let mut bottom = vorticity_block(state, w2)?;
    bottom.axpy(-1.0, &crate::calculus::lap(w1)?)?;
    constraint_pair(top, bottom)
}

/// `A^-1 = [[inv_lap M inv_lap, -inv_lap], [inv_lap, 0]]`
pub fn a_inverse(state: &State, w: &State) -> Result<State> {
    let (w1, w2) = (w.field(0), w.field(1));
    let mut top = inv_lap(&vorticity_block(state, &inv_lap(w1)?)?)?;
    top.axpy(-1.0, &inv_lap(w2)?)?;
    constraint_pair(top, inv_lap(w1)?)
}

/// The top-left block written as `inv_lap M` without the trailing
/// `inv_lap`; kept to show that it does not invert `A`.
pub fn a_inverse_untrailed(state: &State, w: &State) -> Result<State> {
    let (w1, w2) = (w.field(0), w.field(1));
    let mut top = inv_lap(&vorticity_block(state, w1)?)?;
    top.axpy(-1.0, &inv_lap(w2)?)?;
    constraint_pair(top, inv_lap(w1)?)
}

/// `(0, F_v - grad inv_lap div F_v, F_B, F_s)`
pub fn orthogonal_projector_closed(state: &State, a: &Cotangent) -> Result<Cotangent> {
    State::new(
        schema(),
        vec![
            Field::zeros(state.grid(), Rank::Scalar),
            solenoidal_part(a.field(V))?,
            a.field(B).clone(),
            a.field(S).clone(),
        ],
    )
}

/// `(F_*, Fbar_v, F_B, F_s)` with
/// `F_* = inv_lap div(rho^-1 (-(curl v) x Fbar_v - Bbar x curl F_B + F_s grad s))`,
/// the unique first component for which `Q^ J P* = 0`.
pub fn dirac_projector_closed(state: &State, a: &Cotangent) -> Result<Cotangent> {
    dirac_projector_with_signs(state, a, -1.0, 1.0)
}

/// First component written with `+(curl v) x Fbar_v` and `-F_s grad s`;
/// kept to show that these signs break `Q^ J P* = 0`.
pub fn dirac_projector_flipped(state: &State, a: &Cotangent) -> Result<Cotangent> {
    dirac_projector_with_signs(state, a, 1.0, -1.0)
}

fn dirac_projector_with_signs(state: &State, a: &Cotangent, vort: f64, entropy: f64) -> Result<Cotangent> {
    let rinv = inverse_density(state)?;
    let omega = curl(state.field(V))?;
    let bbar = solenoidal_part(state.field(B))?;
    let fv = solenoidal_part(a.field(V))?;
    let inner = combine(vec![
        (vort, cross(&omega, &fv)?),
        (-1.0, cross(&bbar, &curl(a.field(B))?)?),
        (entropy, times(a.field(S), &grad(state.field(S))?)?),
    ])?;
    let f_star = inv_lap(&div(&times(&rinv, &inner)?)?)?;
    State::new(schema(), vec![f_star, fv, a.field(B).clone(), a.field(S).clone()])
}

/// Reduced bracket
/// `int rho^-1 ((curl v) . (Fv x Gv) - grad s . (F_s Gv - Fv G_s)
///   + Bbar . (Fv x curl G_B + curl F_B x Gv))` with projected `Fv`, `Gv`.
pub fn dirac_bracket_closed(state: &State, a: &Cotangent, b: &Cotangent) -> Result<f64> {
    let rinv = inverse_density(state)?;
    let omega = curl(state.field(V))?;
    let bbar = solenoidal_part(state.field(B))?;
    let grad_s = grad(state.field(S))?;
    let fv = solenoidal_part(a.field(V))?;
    let gv = solenoidal_part(b.field(V))?;
    let mut entropy = times(a.field(S), &gv)?;
    entropy.axpy(-1.0, &times(b.field(S), &fv)?)?;
    let mut magnetic = cross(&fv, &curl(b.field(B))?)?;
    magnetic.axpy(1.0, &cross(&curl(a.field(B))?, &gv)?)?;
    let density = combine(vec![
        (1.0, dot(&omega, &cross(&fv, &gv)?)?),
        (-1.0, dot(&grad_s, &entropy)?),
        (1.0, dot(&bbar, &magnetic)?),
    ])?;
    integrate(&times(&rinv, &density)?)
}

pub fn incompressible_mhd_reduction(grid: Arc<Grid>, rho0: f64, params: EnergyParams) -> Result<SystemSpec> {
    require_3d(&grid)?;
    let mut spec = SystemSpec::new("incompressible_mhd", grid, schema());
    spec.hamiltonian = Some(hamiltonian(params)?);
    let parent: BracketOperator = Arc::new(MhdBracket::new(MagneticVariant::Projected));
    let constraint: Constraint = Arc::new(IncompressibleConstraint::new(rho0)?);
    let closed = AOperator::new(
        constraint.clone(),
        parent.clone(),
        AInverse::ClosedForm(Arc::new(a_inverse)),
    )?;
    let krylov = closed.with_inverse(AInverse::Krylov(SolverOptions::with_tol(1e-12)));
    let reduced: BracketOperator = Arc::new(DiracOperator::new(closed.clone()));
    spec.brackets = vec![("dirac".into(), reduced), ("parent".into(), parent)];
    spec.constraints.push(("incompressibility".into(), constraint));
    spec.reductions = vec![("dirac".into(), closed), ("dirac_krylov".into(), krylov)];
    spec.closed_forms = vec![
        ("a".into(), ClosedForm::operator(a_matrix)),
        ("a_inverse".into(), ClosedForm::operator(a_inverse)),
        ("orthogonal_projector".into(), ClosedForm::operator(orthogonal_projector_closed)),
        ("dirac_projector".into(), ClosedForm::operator(dirac_projector_closed)),
        ("dirac_bracket".into(), ClosedForm::bracket(dirac_bracket_closed)),
    ];
    spec.parameters = vec![
        ("rho0".into(), rho0),
        ("kappa".into(), params.kappa),
        ("gamma".into(), params.gamma),
        ("c_v".into(), params.c_v),
    ];
    Ok(spec)
}
