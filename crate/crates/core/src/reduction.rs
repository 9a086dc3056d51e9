//! Orthogonal and Dirac projectors, the Dirac matrix `J*`, Dirac brackets and
//! brackets with projected state dependence.

use std::fmt;
use std::sync::Arc;

use crate::brackets::{apply_j, BracketOperator, PoissonOperator};
use crate::constraints::{flat_len, flatten, frechet, frechet_adjoint, unflatten, AOperator, Constraint, Locality};
use crate::error::{Error, Result};
use crate::fields::{pairing, Cotangent, Grid, Schema, State, Tangent};
use crate::functionals::Functional;
use crate::krylov::{conjugate_gradient, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorKind {
    Orthogonal,
    Dirac,
    Custom,
}

type Map = Arc<dyn Fn(&State) -> Result<State> + Send + Sync>;

/// A linear projector on cotangents together with its adjoint on tangents.
#[derive(Clone)]
pub struct Projector {
    kind: ProjectorKind,
    name: String,
    schema: Schema,
    state_independent: bool,
    apply: Map,
    adjoint: Map,
}

impl fmt::Debug for Projector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Projector({:?}, {})", self.kind, self.name)
    }
}

impl Projector {
    pub fn custom(
        name: impl Into<String>,
        schema: Schema,
        state_independent: bool,
        apply: impl Fn(&Cotangent) -> Result<Cotangent> + Send + Sync + 'static,
        adjoint: impl Fn(&Tangent) -> Result<Tangent> + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: ProjectorKind::Custom,
            name: name.into(),
            schema,
            state_independent,
            apply: Arc::new(apply),
            adjoint: Arc::new(adjoint),
        }
    }

    /// A self-adjoint custom projector.
    pub fn self_adjoint(
        name: impl Into<String>,
        schema: Schema,
        apply: impl Fn(&Cotangent) -> Result<Cotangent> + Send + Sync + 'static,
    ) -> Self {
        let apply: Map = Arc::new(apply);
        Self {
            kind: ProjectorKind::Custom,
            name: name.into(),
            schema,
            state_independent: true,
            adjoint: apply.clone(),
            apply,
        }
    }

    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn schema(&self) -> &Schema {
        &self.schema
    }
    pub fn state_independent(&self) -> bool {
        self.state_independent
    }

    pub fn apply(&self, a: &Cotangent) -> Result<Cotangent> {
        a.check_schema(&self.schema)?;
        (self.apply)(a)
    }

    pub fn adjoint_apply(&self, u: &Tangent) -> Result<Tangent> {
        u.check_schema(&self.schema)?;
        (self.adjoint)(u)
    }
}

fn cg_options() -> SolverOptions {
    SolverOptions::with_tol(1e-13)
}

/// `(Q^ Q^dagger)^{-1} Q^ a` by conjugate gradients.
fn gram_solve(q: &Constraint, state: &State, a: &State) -> Result<State> {
    let rhs = frechet(q.as_ref(), state, a)?;
    let sol = conjugate_gradient(
        |w| frechet(q.as_ref(), state, &frechet_adjoint(q.as_ref(), state, w)?),
        &rhs,
        cg_options(),
    )?;
    Ok(sol.x)
}

/// Largest `|M w| / |w|` over the probes; a lower bound on the operator norm.
pub fn norm_estimate(apply: impl Fn(&State) -> Result<State>, probes: &[State]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for w in probes {
        let n = w.norm();
        if n > 0.0 {
            best = best.max(apply(w)?.norm() / n);
        }
    }
    Ok(best)
}

/// Norm estimate of `Q^ Q^dagger`.
pub fn gram_norm_estimate(q: &dyn crate::constraints::ConstraintSet, state: &State, probes: &[State]) -> Result<f64> {
    norm_estimate(|w| frechet(q, state, &frechet_adjoint(q, state, w)?), probes)
}

fn unboundedness_check(q: &Constraint, state: &State) -> Result<()> {
    if q.locality() != Locality::SemiLocal {
        return Ok(());
    }
    let Some(half) = q.truncated(0.5) else {
        return Ok(());
    };
    let grid = state.grid().clone();
    let probes: Vec<State> = (0..8)
        .map(|seed| crate::fields::random_state(q.constraint_schema(), &grid, 0x5eed + seed, 1, true))
        .collect::<Result<_>>()?;
    let full = gram_norm_estimate(q.as_ref(), state, &probes)?;
    let cut = gram_norm_estimate(half.as_ref(), state, &probes)?;
    if cut > 0.0 && full / cut > 1.5 {
        return Err(Error::OrthogonalUnavailable(format!(
            "Q^Q^dagger of {} grows with the velocity cutoff (norm ratio {:.3} when halving it); it is unbounded",
            q.name(),
            full / cut
        )));
    }
    Ok(())
}

/// `P_perp = 1 - Q^dagger (Q^ Q^dagger)^{-1} Q^`
pub fn orthogonal_projector(q: Constraint, state: &State) -> Result<Projector> {
    state.check_schema(q.schema())?;
    unboundedness_check(&q, state)?;
    // probe solve; a diverging Gram solve means no orthogonal projector
    let probe = crate::fields::random_state(q.schema(), state.grid(), 0x0b7, 1, false)?;
    gram_solve(&q, state, &probe).map_err(|e| match e {
        Error::NotConverged { iterations, residual } => Error::OrthogonalUnavailable(format!(
            "Q^Q^dagger solve for {} stalled after {iterations} iterations at residual {residual:.3e}",
            q.name()
        )),
        other => other,
    })?;
    let st = state.clone();
    let qq = q.clone();
    let apply: Map = Arc::new(move |a: &State| {
        let y = gram_solve(&qq, &st, a)?;
        a.sub(&frechet_adjoint(qq.as_ref(), &st, &y)?)
    });
    Ok(Projector {
        kind: ProjectorKind::Orthogonal,
        name: format!("orthogonal({})", q.name()),
        schema: q.schema().clone(),
        state_independent: q.is_linear(),
        adjoint: apply.clone(),
        apply,
    })
}

/// `P* = 1 - Q^dagger A^{-1} Q^ J`; adjoint `P*^dagger = 1 - J Q^dagger A^{-1} Q^`.
pub fn dirac_projector(a_op: &AOperator, state: &State) -> Result<Projector> {
    let q = a_op.constraint.clone();
    state.check_schema(q.schema())?;
    let (a1, st1) = (a_op.clone(), state.clone());
    let apply: Map = Arc::new(move |a: &State| {
        let ja = apply_j(a1.bracket.as_ref(), &st1, a)?;
        let y = a1.inverse_after_frechet(&st1, &ja)?;
        a.sub(&frechet_adjoint(a1.constraint.as_ref(), &st1, &y)?)
    });
    let (a2, st2) = (a_op.clone(), state.clone());
    let adjoint: Map = Arc::new(move |u: &State| {
        let y = a2.inverse_after_frechet(&st2, u)?;
        let qt = frechet_adjoint(a2.constraint.as_ref(), &st2, &y)?;
        u.sub(&apply_j(a2.bracket.as_ref(), &st2, &qt)?)
    });
    Ok(Projector {
        kind: ProjectorKind::Dirac,
        name: format!("dirac({}, {})", q.name(), a_op.bracket.name()),
        schema: q.schema().clone(),
        state_independent: false,
        apply,
        adjoint,
    })
}

/// Maximum residuals of the projector identities over the probes, each
/// normalized by the probe norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct ProjectorResiduals {
    /// `|P P a - P a| / |a|`
    pub idempotency: f64,
    /// `|P Q^dagger g| / |Q^dagger g|`
    pub kernel: f64,
    /// `|P_perp P a - P_perp a| / |a|`
    pub perp_after: f64,
    /// `|P P_perp a - P a| / |a|`
    pub after_perp: f64,
}

impl ProjectorResiduals {
    pub fn max(&self) -> f64 {
        self.idempotency.max(self.kernel).max(self.perp_after).max(self.after_perp)
    }
}

pub fn projector_residuals(
    p: &Projector,
    pperp: Option<&Projector>,
    q: &dyn crate::constraints::ConstraintSet,
    state: &State,
    cotangents: &[Cotangent],
    constraint_probes: &[State],
) -> Result<ProjectorResiduals> {
    if p.schema() != q.schema() || pperp.is_some_and(|pp| pp.schema() != q.schema()) {
        return Err(Error::SchemaMismatch("projectors and constraint disagree on the schema".into()));
    }
    let mut r = ProjectorResiduals::default();
    for a in cotangents {
        let n = a.norm();
        if n == 0.0 {
            continue;
        }
        let pa = p.apply(a)?;
        r.idempotency = r.idempotency.max(p.apply(&pa)?.sub(&pa)?.norm() / n);
        if let Some(pp) = pperp {
            let ppa = pp.apply(a)?;
            r.perp_after = r.perp_after.max(pp.apply(&pa)?.sub(&ppa)?.norm() / n);
            r.after_perp = r.after_perp.max(p.apply(&ppa)?.sub(&pa)?.norm() / n);
        }
    }
    for g in constraint_probes {
        let qg = frechet_adjoint(q, state, g)?;
        let n = qg.norm();
        if n > 0.0 {
            r.kernel = r.kernel.max(p.apply(&qg)?.norm() / n);
        }
    }
    Ok(r)
}

/// `J* a = J a - J Q^dagger A^{-1} Q^ J a`
pub fn dirac_j_apply(a_op: &AOperator, state: &State, a: &Cotangent) -> Result<Tangent> {
    let ja = apply_j(a_op.bracket.as_ref(), state, a)?;
    let y = a_op.inverse_after_frechet(state, &ja)?;
    let qt = frechet_adjoint(a_op.constraint.as_ref(), state, &y)?;
    ja.sub(&apply_j(a_op.bracket.as_ref(), state, &qt)?)
}

/// The Dirac-reduced Poisson operator `J*`.
pub struct DiracOperator {
    name: String,
    a_op: AOperator,
}

impl DiracOperator {
    pub fn new(a_op: AOperator) -> Self {
        Self {
            name: format!("dirac[{}]", a_op.bracket.name()),
            a_op,
        }
    }

    pub fn a_operator(&self) -> &AOperator {
        &self.a_op
    }
}

impl PoissonOperator for DiracOperator {
    fn name(&self) -> &str {
        &self.name
    }
    fn schema(&self) -> &Schema {
        self.a_op.bracket.schema()
    }
    fn apply(&self, state: &State, a: &Cotangent) -> Result<Tangent> {
        dirac_j_apply(&self.a_op, state, a)
    }
}

/// `{F, G}* = <P* F', J P* G'>`
pub fn dirac_bracket(a_op: &AOperator, f: &Functional, g: &Functional, state: &State) -> Result<f64> {
    let p = dirac_projector(a_op, state)?;
    let pf = p.apply(&f.derivative(state)?)?;
    let pg = p.apply(&g.derivative(state)?)?;
    pairing(&pf, &apply_j(a_op.bracket.as_ref(), state, &pg)?)
}

/// `{F, G} = <P F', J(P chi) P G'>`; requires a state-independent projector.
pub fn projected_bracket(
    j: &dyn PoissonOperator,
    p: &Projector,
    f: &Functional,
    g: &Functional,
    state: &State,
) -> Result<f64> {
    if !p.state_independent() {
        return Err(Error::Unsupported(format!(
            "projector {} depends on the state; state projection is undefined",
            p.name()
        )));
    }
    let projected = p.apply(state)?;
    let pf = p.apply(&f.derivative(state)?)?;
    let pg = p.apply(&g.derivative(state)?)?;
    pairing(&pf, &apply_j(j, &projected, &pg)?)
}

/// Poisson operator `a -> P^dagger J(P chi) P a` of [`projected_bracket`].
pub struct ProjectedOperator {
    name: String,
    inner: BracketOperator,
    projector: Projector,
}

impl ProjectedOperator {
    pub fn new(inner: BracketOperator, projector: Projector) -> Result<Self> {
        if !projector.state_independent() {
            return Err(Error::Unsupported(format!(
                "projector {} depends on the state",
                projector.name()
            )));
        }
        if inner.schema() != projector.schema() {
            return Err(Error::SchemaMismatch("projector and bracket disagree on the schema".into()));
        }
        Ok(Self {
            name: format!("projected[{}]", inner.name()),
            inner,
            projector,
        })
    }
}

impl PoissonOperator for ProjectedOperator {
    fn name(&self) -> &str {
        &self.name
    }
    fn schema(&self) -> &Schema {
        self.inner.schema()
    }
    fn apply(&self, state: &State, a: &Cotangent) -> Result<Tangent> {
        let chi = self.projector.apply(state)?;
        let pa = self.projector.apply(a)?;
        self.projector.adjoint_apply(&apply_j(self.inner.as_ref(), &chi, &pa)?)
    }
    fn affine_in_state(&self) -> bool {
        self.inner.affine_in_state()
    }
}

/// Largest flattened size accepted by [`dense_matrix`].
pub const DENSE_LIMIT: usize = 3 * 16 * 16 * 16;

/// Dense matrix of a linear map between flattened states, built column by
/// column from unit vectors. Intended for small oracle comparisons only.
pub fn dense_matrix(
    map: impl Fn(&State) -> Result<State>,
    domain: &Schema,
    range: &Schema,
    grid: &Arc<Grid>,
) -> Result<nalgebra::DMatrix<f64>> {
    let n = flat_len(domain, grid);
    let m = flat_len(range, grid);
    if n > DENSE_LIMIT || m > DENSE_LIMIT {
        return Err(Error::Unsupported(format!(
            "dense materialization limited to {DENSE_LIMIT} unknowns, got {n} -> {m}"
        )));
    }
    let mut out = nalgebra::DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let image = map(&unflatten(domain, grid, &e)?)?;
        image.check_schema(range)?;
        out.set_column(col, &nalgebra::DVector::from_vec(flatten(&image)));
        e[col] = 0.0;
    }
    Ok(out)
}
