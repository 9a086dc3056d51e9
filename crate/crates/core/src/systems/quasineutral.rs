//! Two-species Vlasov equation linearized about homogeneous Maxwellians,
//! with the semi-local quasineutrality constraints
//! `(int (f_i - f_e) dv, int v . grad (f_i - f_e) dv)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::brackets::{BracketOperator, PoissonOperator};
use crate::calculus::{broadcast, div, grad, inv_lap, spatial_partial, velocity_integral};
use crate::constraints::{scalar_schema, AInverse, AOperator, Constraint, ConstraintSet, Locality};
use crate::error::{Error, Result};
use crate::fields::{Cotangent, Field, Grid, Rank, Schema, State, Tangent};
use crate::reduction::DiracOperator;

use super::{ClosedForm, SystemSpec};

pub fn schema() -> Schema {
    Schema::new(&[("f_i", Rank::Phase), ("f_e", Rank::Phase)])
}

pub fn constraint_schema() -> Schema {
    scalar_schema(&["neutrality", "secondary"])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maxwellian {
    pub density: f64,
    pub thermal_speed: f64,
    pub drift: Vec<f64>,
}

impl Maxwellian {
    pub fn new(density: f64, thermal_speed: f64, drift: Vec<f64>) -> Self {
        Self {
            density,
            thermal_speed,
            drift,
        }
    }

    fn validate(&self, dims: usize) -> Result<()> {
        if !(self.density > 0.0 && self.thermal_speed > 0.0) {
            return Err(Error::InvalidParameter("Maxwellian density and thermal speed must be positive".into()));
        }
        if self.drift.len() != dims {
            return Err(Error::InvalidParameter(format!(
                "drift has {} components, velocity space has {dims}",
                self.drift.len()
            )));
        }
        Ok(())
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        let m = v.len() as i32;
        let s2 = self.thermal_speed * self.thermal_speed;
        let r2: f64 = v.iter().zip(&self.drift).map(|(a, b)| (a - b).powi(2)).sum();
        self.density / ((2.0 * std::f64::consts::PI * s2).powf(m as f64 / 2.0)) * (-0.5 * r2 / s2).exp()
    }

    /// `d alpha / d v_axis`
    pub fn derivative(&self, v: &[f64], axis: usize) -> f64 {
        -(v[axis] - self.drift[axis]) / (self.thermal_speed * self.thermal_speed) * self.value(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasineutralParams {
    pub ion: Maxwellian,
    pub electron: Maxwellian,
    /// Largest accepted `alpha` on the velocity boundary relative to its peak.
    pub decay_tolerance: f64,
}

impl QuasineutralParams {
    pub fn standard(dims: usize) -> Self {
        let drift = |u: f64| (0..dims).map(|j| if j == 0 { u } else { 0.0 }).collect();
        Self {
            ion: Maxwellian::new(1.0, 1.0, drift(0.2)),
            electron: Maxwellian::new(1.0, 1.0, drift(-0.3)),
            decay_tolerance: 1e-12,
        }
    }
}

/// Background samples on the velocity grid.
#[derive(Debug, Clone)]
pub struct Background {
    /// `alpha_s(v)` for ions and electrons.
    pub alpha: [Vec<f64>; 2],
    /// `d_v alpha_s`, one array per velocity axis.
    pub d_alpha: [Vec<Vec<f64>>; 2],
    /// `alpha_bar_s = int alpha_s dv`
    pub alpha_bar: [f64; 2],
    /// `beta_s = int v alpha_s dv`
    pub beta: [Vec<f64>; 2],
}

impl Background {
    pub fn sample(grid: &Grid, params: &QuasineutralParams) -> Result<Self> {
        let dims = grid.velocity_dims();
        let species = [&params.ion, &params.electron];
        for s in species {
            s.validate(dims)?;
        }
        let nv = grid.n_velocity();
        let dv = grid.velocity_cell_volume();
        let coords: Vec<Vec<f64>> = (0..nv).map(|j| grid.velocity_coord(j)).collect();
        let alpha = species.map(|s| coords.iter().map(|v| s.value(v)).collect::<Vec<_>>());
        let d_alpha = species.map(|s| {
            (0..dims)
                .map(|ax| coords.iter().map(|v| s.derivative(v, ax)).collect())
                .collect::<Vec<Vec<f64>>>()
        });
        let v_max = grid.v_max();
        for (s, m) in species.iter().zip(&alpha) {
            let peak = m.iter().fold(0.0f64, |a, b| a.max(*b));
            let edge = coords
                .iter()
                .zip(m)
                .filter(|(v, _)| v.iter().zip(&v_max).any(|(x, l)| (x.abs() - l).abs() < 1e-12))
                .fold(0.0f64, |a, (_, b)| a.max(*b));
            if edge > params.decay_tolerance * peak {
                return Err(Error::InvalidParameter(format!(
                    "Maxwellian (thermal speed {}) only decays to {:.3e} of its peak at the velocity boundary",
                    s.thermal_speed,
                    edge / peak
                )));
            }
        }
        let alpha_bar = [0, 1].map(|s| alpha[s].iter().sum::<f64>() * dv);
        let beta = [0, 1].map(|s| {
            (0..dims)
                .map(|ax| coords.iter().zip(&alpha[s]).map(|(v, a)| v[ax] * a).sum::<f64>() * dv)
                .collect()
        });
        Ok(Self {
            alpha,
            d_alpha,
            alpha_bar,
            beta,
        })
    }

    pub fn total_alpha_bar(&self) -> f64 {
        self.alpha_bar[0] + self.alpha_bar[1]
    }

    pub fn total_beta(&self) -> Vec<f64> {
        self.beta[0].iter().zip(&self.beta[1]).map(|(a, b)| a + b).collect()
    }

    /// `v_bar = (beta_i + beta_e) / (alpha_bar_i + alpha_bar_e)`
    pub fn mean_velocity(&self) -> Vec<f64> {
        let a = self.total_alpha_bar();
        self.total_beta().iter().map(|b| b / a).collect()
    }
}

fn require_grid(grid: &Grid) -> Result<()> {
    if grid.velocity_dims() != grid.spatial_dims() {
        return Err(Error::InvalidGrid(
            "quasineutral system needs as many velocity as spatial dimensions".into(),
        ));
    }
    Ok(())
}

/// `d_v alpha . grad g` for a phase array `g`.
fn advect(grid: &Grid, d_alpha: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for (ax, da) in d_alpha.iter().enumerate() {
        let dg = crate::calculus::phase_partial(grid, g, ax);
        for (k, (o, x)) in out.iter_mut().zip(dg).enumerate() {
            *o += da[k % da.len()] * x;
        }
    }
    out
}

/// `J a = (d_v alpha_i . grad a_i, d_v alpha_e . grad a_e)`
pub struct LinearVlasovBracket {
    background: Arc<Background>,
    schema: Schema,
}

impl LinearVlasovBracket {
    pub fn new(background: Arc<Background>) -> Self {
        Self {
            background,
            schema: schema(),
        }
    }
}

impl PoissonOperator for LinearVlasovBracket {
    fn name(&self) -> &str {
        "linear_vlasov"
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn apply(&self, state: &State, a: &Cotangent) -> Result<Tangent> {
        let g = state.grid();
        let fields = (0..2)
            .map(|s| {
                let d = advect(g, &self.background.d_alpha[s], a.field(s).component(0));
                Field::from_components(g, Rank::Phase, vec![d])
            })
            .collect::<Result<Vec<_>>>()?;
        State::new(self.schema.clone(), fields)
    }
    fn affine_in_state(&self) -> bool {
        true
    }
    fn state_gradient(&self, a: &Cotangent, _b: &Cotangent) -> Option<Result<Cotangent>> {
        Some(Ok(a.zeros_like()))
    }
}

/// Semi-local quasineutrality constraints, optionally restricted to the
/// central part `|v_j| <= window` of the velocity box.
pub struct QuasineutralConstraint {
    grid: Arc<Grid>,
    window: f64,
    velocities: Vec<Vec<f64>>,
    mask: Vec<f64>,
    schema: Schema,
    constraint_schema: Schema,
}

impl QuasineutralConstraint {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let full = grid.v_max().into_iter().fold(0.0, f64::max);
        Self::with_window(grid, full)
    }

    pub fn with_window(grid: &Arc<Grid>, window: f64) -> Self {
        let velocities: Vec<Vec<f64>> = (0..grid.n_velocity()).map(|j| grid.velocity_coord(j)).collect();
        let mask = velocities
            .iter()
            .map(|v| if v.iter().all(|x| x.abs() <= window + 1e-12) { 1.0 } else { 0.0 })
            .collect();
        Self {
            grid: grid.clone(),
            window,
            velocities,
            mask,
            schema: schema(),
            constraint_schema: constraint_schema(),
        }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// `int W d and int W v . grad d` for the difference `d` of the species.
    fn moments(&self, grid: &Arc<Grid>, d: &[f64]) -> Result<(Field, Field)> {
        let masked: Vec<f64> = d.iter().enumerate().map(|(k, x)| x * self.mask[k % self.mask.len()]).collect();
        let zeroth = velocity_integral(grid, &masked);
        let mut first = vec![0.0; grid.n_spatial()];
        for ax in 0..grid.spatial_dims() {
            let nv = self.velocities.len();
            let weighted: Vec<f64> = masked.iter().enumerate().map(|(k, x)| x * self.velocities[k % nv][ax]).collect();
            let m = velocity_integral(grid, &weighted);
            for (o, x) in first.iter_mut().zip(spatial_partial(grid, &m, ax)) {
                *o += x;
            }
        }
        Ok((Field::scalar(grid, zeroth)?, Field::scalar(grid, first)?))
    }
}

impl ConstraintSet for QuasineutralConstraint {
    fn name(&self) -> &str {
        "quasineutrality"
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn constraint_schema(&self) -> &Schema {
        &self.constraint_schema
    }
    fn locality(&self) -> Locality {
        Locality::SemiLocal
    }
    fn value(&self, state: &State) -> Result<State> {
        self.frechet(state, state)
    }
    fn frechet(&self, state: &State, u: &Tangent) -> Result<State> {
        let d: Vec<f64> = u.field(0).component(0).iter().zip(u.field(1).component(0)).map(|(a, b)| a - b).collect();
        let (z, f) = self.moments(state.grid(), &d)?;
        State::new(self.constraint_schema.clone(), vec![z, f])
    }
    fn frechet_adjoint(&self, state: &State, w: &State) -> Result<Cotangent> {
        let g = state.grid();
        let w1 = broadcast(g, w.field(0).component(0));
        let gw2 = grad(w.field(1))?;
        let mut h = w1;
        for ax in 0..g.spatial_dims() {
            let gx = broadcast(g, gw2.component(ax));
            let nv = self.velocities.len();
            for (k, x) in h.iter_mut().enumerate() {
                *x -= self.velocities[k % nv][ax] * gx[k];
            }
        }
        for (k, x) in h.iter_mut().enumerate() {
            *x *= self.mask[k % self.mask.len()];
        }
        let neg: Vec<f64> = h.iter().map(|x| -x).collect();
        State::new(
            self.schema.clone(),
            vec![
                Field::from_components(g, Rank::Phase, vec![h])?,
                Field::from_components(g, Rank::Phase, vec![neg])?,
            ],
        )
    }
    fn truncated(&self, fraction: f64) -> Option<Arc<dyn ConstraintSet>> {
        Some(Arc::new(Self::with_window(&self.grid, self.window * fraction)))
    }
}

/// `A = [[0, a Lap], [-a Lap, 2 beta . grad Lap]]` with `a = alpha_bar_i + alpha_bar_e`
/// and `beta = beta_i + beta_e`.
pub fn a_matrix(bg: &Background, w: &State) -> Result<State> {
    let a = bg.total_alpha_bar();
    let beta = bg.total_beta();
    let (w1, w2) = (w.field(0), w.field(1));
    let top = crate::calculus::lap(w2)?.scaled(a);
    let mut bottom = crate::calculus::lap(w1)?.scaled(-a);
    bottom.axpy(2.0, &directional(&beta, &crate::calculus::lap(w2)?)?)?;
    State::new(constraint_schema(), vec![top, bottom])
}

/// `A^-1 = (1/a) [[2 v_bar . grad inv_lap, -inv_lap], [inv_lap, 0]]`
pub fn a_inverse(bg: &Background, w: &State) -> Result<State> {
    let a = bg.total_alpha_bar();
    let vbar = bg.mean_velocity();
    let (w1, w2) = (w.field(0), w.field(1));
    let mut top = directional(&vbar, &inv_lap(w1)?)?.scaled(2.0);
    top.axpy(-1.0, &inv_lap(w2)?)?;
    State::new(constraint_schema(), vec![top.scaled(1.0 / a), inv_lap(w1)?.scaled(1.0 / a)])
}

/// `c . grad phi` for a constant vector `c`.
fn directional(c: &[f64], phi: &Field) -> Result<Field> {
    let g = grad(phi)?;
    let mut out = Field::zeros(phi.grid(), Rank::Scalar);
    for (ax, &cx) in c.iter().enumerate() {
        for (o, x) in out.component_mut(0).iter_mut().zip(g.component(ax)) {
            *o += cx * x;
        }
    }
    Ok(out)
}

/// `P* a = a -+ (1/a) inv_lap div int dv' (v + v' - 2 v_bar) h(v')` with
/// `h = [alpha_i, a_i] - [alpha_e, a_e]` and `[alpha, G] = -d_v alpha . grad G`;
/// minus for ions, plus for electrons.
pub fn dirac_projector_closed(bg: &Background, state: &State, a: &Cotangent) -> Result<Cotangent> {
    let g = state.grid();
    let alpha = bg.total_alpha_bar();
    let vbar = bg.mean_velocity();
    let dims = g.spatial_dims();
    let hi = advect(g, &bg.d_alpha[0], a.field(0).component(0));
    let he = advect(g, &bg.d_alpha[1], a.field(1).component(0));
    let h: Vec<f64> = hi.iter().zip(&he).map(|(x, y)| -x + y).collect();
    let h0 = Field::scalar(g, velocity_integral(g, &h))?;
    let nv = g.n_velocity();
    let velocities: Vec<Vec<f64>> = (0..nv).map(|j| g.velocity_coord(j)).collect();
    let mut flux = Field::zeros(g, Rank::Vector(dims));
    for ax in 0..dims {
        let weighted: Vec<f64> = h.iter().enumerate().map(|(k, x)| x * velocities[k % nv][ax]).collect();
        let m = velocity_integral(g, &weighted);
        for ((o, x), z) in flux.component_mut(ax).iter_mut().zip(m).zip(h0.component(0)) {
            *o = x - 2.0 * vbar[ax] * z;
        }
    }
    let psi = inv_lap(&div(&flux)?)?;
    let grad_phi = grad(&inv_lap(&h0)?)?;
    let mut corr = broadcast(g, psi.component(0));
    for ax in 0..dims {
        let gp = broadcast(g, grad_phi.component(ax));
        for (k, c) in corr.iter_mut().enumerate() {
            *c += velocities[k % nv][ax] * gp[k];
        }
    }
    let ion: Vec<f64> = a.field(0).component(0).iter().zip(&corr).map(|(x, c)| x - c / alpha).collect();
    let ele: Vec<f64> = a.field(1).component(0).iter().zip(&corr).map(|(x, c)| x + c / alpha).collect();
    State::new(
        schema(),
        vec![
            Field::from_components(g, Rank::Phase, vec![ion])?,
            Field::from_components(g, Rank::Phase, vec![ele])?,
        ],
    )
}

/// `Q^ Q^dagger` written out: `2 int dv [[1, -v . grad], [v . grad, -(v . grad)^2]]`.
pub fn gram_closed(grid: &Arc<Grid>, w: &State) -> Result<State> {
    let nv = grid.n_velocity();
    let dv = grid.velocity_cell_volume();
    let dims = grid.spatial_dims();
    let velocities: Vec<Vec<f64>> = (0..nv).map(|j| grid.velocity_coord(j)).collect();
    let m0 = nv as f64 * dv;
    let m1: Vec<f64> = (0..dims).map(|ax| velocities.iter().map(|v| v[ax]).sum::<f64>() * dv).collect();
    let m2: Vec<Vec<f64>> = (0..dims)
        .map(|i| (0..dims).map(|j| velocities.iter().map(|v| v[i] * v[j]).sum::<f64>() * dv).collect())
        .collect();
    let (w1, w2) = (w.field(0), w.field(1));
    let mut top = w1.scaled(2.0 * m0);
    top.axpy(-2.0, &directional(&m1, w2)?)?;
    let mut bottom = directional(&m1, w1)?.scaled(2.0);
    for i in 0..dims {
        for j in 0..dims {
            let d = Field::scalar(grid, spatial_partial(grid, &spatial_partial(grid, w2.component(0), j), i))?;
            bottom.axpy(-2.0 * m2[i][j], &d)?;
        }
    }
    State::new(constraint_schema(), vec![top, bottom])
}

pub fn quasineutral_system(grid: Arc<Grid>, params: QuasineutralParams) -> Result<SystemSpec> {
    require_grid(&grid)?;
    let bg = Arc::new(Background::sample(&grid, &params)?);
    let mut spec = SystemSpec::new("quasineutral", grid.clone(), schema());
    let bracket: BracketOperator = Arc::new(LinearVlasovBracket::new(bg.clone()));
    let constraint: Constraint = Arc::new(QuasineutralConstraint::new(&grid));
    let inv_bg = bg.clone();
    let a_op = AOperator::new(
        constraint.clone(),
        bracket.clone(),
        AInverse::ClosedForm(Arc::new(move |_s: &State, w: &State| a_inverse(&inv_bg, w))),
    )?;
    let krylov = a_op.with_inverse(AInverse::Krylov(crate::krylov::SolverOptions::with_tol(1e-12)));
    let reduced: BracketOperator = Arc::new(DiracOperator::new(a_op.clone()));
    spec.brackets = vec![("dirac".into(), reduced), ("linear_vlasov".into(), bracket)];
    spec.constraints.push(("quasineutrality".into(), constraint));
    spec.reductions = vec![("dirac".into(), a_op), ("dirac_krylov".into(), krylov)];
    let (b1, b2, b3) = (bg.clone(), bg.clone(), bg.clone());
    let g2 = grid.clone();
    spec.closed_forms = vec![
        ("a".into(), ClosedForm::operator(move |_s, w| a_matrix(&b1, w))),
        ("a_inverse".into(), ClosedForm::operator(move |_s, w| a_inverse(&b2, w))),
        ("dirac_projector".into(), ClosedForm::operator(move |s, a| dirac_projector_closed(&b3, s, a))),
        ("gram".into(), ClosedForm::operator(move |_s, w| gram_closed(&g2, w))),
    ];
    spec.parameters = vec![
        ("alpha_bar_i".into(), bg.alpha_bar[0]),
        ("alpha_bar_e".into(), bg.alpha_bar[1]),
        ("v_bar".into(), bg.mean_velocity()[0]),
    ];
    Ok(spec)
}
