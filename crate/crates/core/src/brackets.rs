//! Poisson operators, bracket evaluation and the antisymmetry, Jacobi and
//! Casimir diagnostics.
//!
//! Nested brackets of linear probe functionals are evaluated through the
//! identity `{F, K} = -dK[chi](J(chi) F_chi)`, which needs only a directional
//! derivative of `K = {G, H}`. For operators affine in the state that
//! derivative is exact; otherwise a fourth-order central stencil is used.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{pairing, Cotangent, Schema, State, Tangent};
use crate::functionals::{derivative, Functional};

/// State-dependent Poisson operator `J(chi)` mapping cotangents to tangents.
pub trait PoissonOperator: Send + Sync {
    fn name(&self) -> &str;

    fn schema(&self) -> &Schema;

    fn apply(&self, state: &State, a: &Cotangent) -> Result<Tangent>;

    /// True when `J(chi) = J0 + L(chi)` with `L` linear.
    fn affine_in_state(&self) -> bool {
        false
    }

    /// Gradient with respect to the state of `chi -> <a, J(chi) b>`, for
    /// affine operators that provide it in closed form.
    fn state_gradient(&self, _a: &Cotangent, _b: &Cotangent) -> Option<Result<Cotangent>> {
        None
    }
}

pub type BracketOperator = Arc<dyn PoissonOperator>;

pub fn apply_j(op: &dyn PoissonOperator, state: &State, a: &Cotangent) -> Result<Tangent> {
    state.check_schema(op.schema())?;
    a.check_schema(op.schema())?;
    op.apply(state, a)
}

/// `{F, G}(chi) = <F_chi, J(chi) G_chi>`
pub fn bracket(op: &dyn PoissonOperator, f: &Functional, g: &Functional, state: &State) -> Result<f64> {
    let df = derivative(f, state)?;
    let dg = derivative(g, state)?;
    pairing(&df, &apply_j(op, state, &dg)?)
}

/// `|<a, J b> + <b, J a>| / (|a| |b|)`
pub fn antisymmetry_residual(op: &dyn PoissonOperator, state: &State, a: &Cotangent, b: &Cotangent) -> Result<f64> {
    let ab = pairing(a, &apply_j(op, state, b)?)?;
    let ba = pairing(b, &apply_j(op, state, a)?)?;
    let scale = a.norm() * b.norm();
    Ok(if scale == 0.0 { 0.0 } else { (ab + ba).abs() / scale })
}

/// For an affine operator and linear `F`, `G`, the functional
/// `chi -> {F, G}(chi)` as a `Linear` functional with constant part.
pub fn bracket_functional(op: &dyn PoissonOperator, f: &Functional, g: &Functional) -> Result<Functional> {
    if !op.affine_in_state() {
        return Err(Error::Unsupported(format!("{} is not affine in the state", op.name())));
    }
    let (Some(a), Some(b)) = (f.kernel(), g.kernel()) else {
        return Err(Error::Unsupported("bracket_functional needs linear functionals".into()));
    };
    let kernel = op
        .state_gradient(a, b)
        .ok_or_else(|| Error::Unsupported(format!("{} has no closed-form state gradient", op.name())))??;
    let zero = a.zeros_like();
    let constant = pairing(a, &apply_j(op, &zero, b)?)?;
    Ok(Functional::Linear { kernel, constant })
}

/// `d/de <a, J(chi + e u) b>` at `e = 0`.
pub fn state_directional(op: &dyn PoissonOperator, state: &State, a: &Cotangent, b: &Cotangent, u: &Tangent) -> Result<f64> {
    if op.affine_in_state() {
        let zero = state.zeros_like();
        let lin = apply_j(op, u, b)?.sub(&apply_j(op, &zero, b)?)?;
        return pairing(a, &lin);
    }
    let umax = u.max_abs();
    if umax == 0.0 {
        return Ok(0.0);
    }
    let eps = 1e-3 * (1.0 + state.max_abs()) / umax;
    let h = |t: f64| -> Result<f64> {
        let mut s = state.clone();
        s.axpy(t, u)?;
        pairing(a, &apply_j(op, &s, b)?)
    };
    Ok((-h(2.0 * eps)? + 8.0 * h(eps)? - 8.0 * h(-eps)? + h(-2.0 * eps)?) / (12.0 * eps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiResidual {
    pub value: f64,
    /// `value / (V rms(F_chi) rms(G_chi) rms(H_chi) max(rms(chi), 1))`
    /// with RMS norms over the phase-space volume `V`, so the measure does
    /// not depend on the box size or resolution.
    pub normalized: f64,
}

fn linear_kernel(f: &Functional) -> Result<&Cotangent> {
    f.kernel()
        .ok_or_else(|| Error::Unsupported("Jacobi probes must be linear functionals".into()))
}

/// `{F,{G,H}} + {G,{H,F}} + {H,{F,G}}` for linear probes.
pub fn jacobi_residual(op: &dyn PoissonOperator, f: &Functional, g: &Functional, h: &Functional, state: &State) -> Result<JacobiResidual> {
    let (a, b, c) = (linear_kernel(f)?, linear_kernel(g)?, linear_kernel(h)?);
    // {X, {Y, Z}} = -d<y, J z>[chi](J x)
    let term = |x: &Cotangent, y: &Cotangent, z: &Cotangent| -> Result<f64> {
        let jx = apply_j(op, state, x)?;
        Ok(-state_directional(op, state, y, z, &jx)?)
    };
    let value = term(a, b, c)? + term(b, c, a)? + term(c, a, b)?;
    let grid = state.grid();
    let volume = grid.spatial_volume() * grid.velocity_volume();
    let rms = |x: &State| x.norm() / volume.sqrt();
    let scale = volume * rms(a) * rms(b) * rms(c) * rms(state).max(1.0);
    Ok(JacobiResidual {
        value,
        normalized: if scale == 0.0 { 0.0 } else { value.abs() / scale },
    })
}

/// Same sum as [`jacobi_residual`] but with the inner brackets built by
/// [`bracket_functional`]; affine operators only.
pub fn jacobi_residual_via_kernels(op: &dyn PoissonOperator, f: &Functional, g: &Functional, h: &Functional, state: &State) -> Result<f64> {
    let gh = bracket_functional(op, g, h)?;
    let hf = bracket_functional(op, h, f)?;
    let fg = bracket_functional(op, f, g)?;
    Ok(bracket(op, f, &gh, state)? + bracket(op, g, &hf, state)? + bracket(op, h, &fg, state)?)
}

/// `max_G |{C, G}| / (|C_chi| |G_chi|)` over the probes.
pub fn casimir_residual(op: &dyn PoissonOperator, c: &Functional, state: &State, probes: &[Functional]) -> Result<f64> {
    let dc = derivative(c, state)?;
    let jc = apply_j(op, state, &dc)?;
    let mut worst: f64 = 0.0;
    for g in probes {
        let dg = derivative(g, state)?;
        // {C, G} = <C', J G'> = -<G', J C'>
        let value = -pairing(&dg, &jc)?;
        let scale = dc.norm() * dg.norm();
        if scale > 0.0 {
            worst = worst.max(value.abs() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{random_state, Grid, Rank};
    use std::f64::consts::PI;

    /// Canonical pair `(q, p)` with `J = [[0, 1], [-1, 0]]`.
    struct Canonical(Schema);

    impl PoissonOperator for Canonical {
        fn name(&self) -> &str {
            "canonical"
        }
        fn schema(&self) -> &Schema {
            &self.0
        }
        fn apply(&self, _state: &State, a: &Cotangent) -> Result<Tangent> {
            State::new(self.0.clone(), vec![a.field(1).clone(), a.field(0).scaled(-1.0)])
        }
        fn affine_in_state(&self) -> bool {
            true
        }
        fn state_gradient(&self, a: &Cotangent, _b: &Cotangent) -> Option<Result<Cotangent>> {
            Some(Ok(a.zeros_like()))
        }
    }

    fn setup() -> (Arc<Grid>, Canonical) {
        let g = Arc::new(Grid::cubic(1, 16, 2.0 * PI).unwrap());
        (g, Canonical(Schema::new(&[("q", Rank::Scalar), ("p", Rank::Scalar)])))
    }

    #[test]
    fn constant_operator_properties() {
        let (g, op) = setup();
        let s = op.schema().clone();
        let chi = random_state(&s, &g, 1, 3, false).unwrap();
        let f = Functional::linear(random_state(&s, &g, 2, 3, false).unwrap());
        let gg = Functional::linear(random_state(&s, &g, 3, 3, false).unwrap());
        let h = Functional::linear(random_state(&s, &g, 4, 3, false).unwrap());
        assert!(bracket(&op, &f, &f, &chi).unwrap().abs() < 1e-12);
        let fg = bracket(&op, &f, &gg, &chi).unwrap();
        let gf = bracket(&op, &gg, &f, &chi).unwrap();
        assert!((fg + gf).abs() < 1e-12);
        assert!(jacobi_residual(&op, &f, &gg, &h, &chi).unwrap().value.abs() < 1e-9);
        assert!(jacobi_residual_via_kernels(&op, &f, &gg, &h, &chi).unwrap().abs() < 1e-9);
        let k = bracket_functional(&op, &f, &gg).unwrap();
        assert!(k.kernel().unwrap().max_abs() == 0.0);
        let a = f.kernel().unwrap();
        assert!(apply_j(&op, &chi, &a.zeros_like()).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn bracket_functional_requires_linear_probes() {
        let (g, op) = setup();
        let s = op.schema().clone();
        let f = Functional::linear(random_state(&s, &g, 2, 3, false).unwrap());
        let bb = Functional::black_box(|_| 0.0);
        assert!(bracket_functional(&op, &f, &bb).is_err());
        assert!(jacobi_residual(&op, &f, &f, &bb, &State::zeros(&s, &g)).is_err());
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let (g, op) = setup();
        let other = Schema::new(&[("x", Rank::Scalar)]);
        let a = State::zeros(&other, &g);
        assert!(apply_j(&op, &a, &a).is_err());
    }
}
