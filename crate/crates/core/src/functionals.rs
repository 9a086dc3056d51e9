//! Observables `F[chi]` and their unconstrained functional derivatives.
//!
//! Derivatives are densities: `dF = <F_chi, delta chi>` under the L2 pairing.
//! A constrained derivative is obtained by applying a projector to the
//! unconstrained one (see [`crate::reduction`]).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{pairing, Cotangent, State};

type StateFn = Arc<dyn Fn(&State) -> Result<State> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// Self-adjoint linear map on states, used by quadratic functionals.
#[derive(Clone)]
pub struct StateMap {
    pub name: String,
    apply: StateFn,
}

impl StateMap {
    pub fn new(name: impl Into<String>, apply: impl Fn(&State) -> Result<State> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            apply: Arc::new(apply),
        }
    }

    pub fn apply(&self, u: &State) -> Result<State> {
        (self.apply)(u)
    }
}

impl fmt::Debug for StateMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateMap({})", self.name)
    }
}

#[derive(Clone)]
pub enum Functional {
    /// `<kernel, chi> + constant`
    Linear { kernel: Cotangent, constant: f64 },
    /// `1/2 <K chi, chi> + <b, chi> + constant` with `K` self-adjoint.
    Quadratic {
        operator: StateMap,
        linear: Option<Cotangent>,
        constant: f64,
    },
    /// Closed-form value and gradient.
    Smooth { value: ScalarFn, gradient: StateFn },
    /// Value only; the derivative is taken by central differences.
    BlackBox { evaluator: ScalarFn, fd_step: Option<f64> },
    /// `sum_i c_i F_i`
    Sum(Vec<(f64, Functional)>),
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Linear { constant, .. } => write!(f, "Linear(constant={constant})"),
            Functional::Quadratic { operator, .. } => write!(f, "Quadratic({})", operator.name),
            Functional::Smooth { .. } => f.write_str("Smooth"),
            Functional::BlackBox { fd_step, .. } => write!(f, "BlackBox(fd_step={fd_step:?})"),
            Functional::Sum(terms) => f.debug_list().entries(terms.iter().map(|(c, t)| (c, t))).finish(),
        }
    }
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

impl Functional {
    pub fn linear(kernel: Cotangent) -> Self {
        Functional::Linear { kernel, constant: 0.0 }
    }

    pub fn smooth(
        value: impl Fn(&State) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&State) -> Result<State> + Send + Sync + 'static,
    ) -> Self {
        Functional::Smooth {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn black_box(evaluator: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        Functional::BlackBox {
            evaluator: Arc::new(evaluator),
            fd_step: None,
        }
    }

    /// The linear kernel, if this is a `Linear` functional.
    pub fn kernel(&self) -> Option<&Cotangent> {
        match self {
            Functional::Linear { kernel, .. } => Some(kernel),
            _ => None,
        }
    }

    pub fn evaluate(&self, chi: &State) -> Result<f64> {
        evaluate(self, chi)
    }

    pub fn derivative(&self, chi: &State) -> Result<Cotangent> {
        derivative(self, chi)
    }
}

pub fn evaluate(f: &Functional, chi: &State) -> Result<f64> {
    match f {
        Functional::Linear { kernel, constant } => Ok(pairing(kernel, chi)? + constant),
        Functional::Quadratic {
            operator,
            linear,
            constant,
        } => {
            let k = operator.apply(chi)?;
            let mut v = 0.5 * pairing(&k, chi)? + constant;
            if let Some(b) = linear {
                v += pairing(b, chi)?;
            }
            Ok(v)
        }
        Functional::Smooth { value, .. } => Ok(value(chi)),
        Functional::BlackBox { evaluator, .. } => Ok(evaluator(chi)),
        Functional::Sum(terms) => terms.iter().map(|(c, t)| Ok(c * evaluate(t, chi)?)).sum(),
    }
}

pub fn derivative(f: &Functional, chi: &State) -> Result<Cotangent> {
    match f {
        Functional::Linear { kernel, .. } => {
            kernel.check_schema(chi.schema())?;
            Ok(kernel.clone())
        }
        Functional::Quadratic { operator, linear, .. } => {
            let mut k = operator.apply(chi)?;
            if let Some(b) = linear {
                k.axpy(1.0, b)?;
            }
            Ok(k)
        }
        Functional::Smooth { gradient, .. } => gradient(chi),
        Functional::BlackBox { evaluator, fd_step } => {
            finite_difference_gradient(evaluator.as_ref(), chi, fd_step.unwrap_or(DEFAULT_FD_STEP))
        }
        Functional::Sum(terms) => {
            let mut out = chi.zeros_like();
            for (c, t) in terms {
                out.axpy(*c, &derivative(t, chi)?)?;
            }
            Ok(out)
        }
    }
}

/// Central difference per grid sample with step `fd_step * (1 + |chi|_inf)`,
/// divided by the cell volume so the result is a density.
fn finite_difference_gradient(eval: &(dyn Fn(&State) -> f64 + Send + Sync), chi: &State, fd_step: f64) -> Result<Cotangent> {
    let h = fd_step * (1.0 + chi.max_abs());
    let mut out = chi.zeros_like();
    let mut probe = chi.clone();
    for s in 0..chi.fields().len() {
        let dv = chi.field(s).cell_volume();
        for c in 0..chi.field(s).components().len() {
            for i in 0..chi.field(s).component(c).len() {
                let x0 = chi.field(s).component(c)[i];
                probe.field_mut(s).component_mut(c)[i] = x0 + h;
                let fp = eval(&probe);
                probe.field_mut(s).component_mut(c)[i] = x0 - h;
                let fm = eval(&probe);
                probe.field_mut(s).component_mut(c)[i] = x0;
                if !(fp.is_finite() && fm.is_finite()) {
                    return Err(Error::NonFinite(format!("evaluator at slot {s}, sample {i}")));
                }
                out.field_mut(s).component_mut(c)[i] = (fp - fm) / (2.0 * h * dv);
            }
        }
    }
    Ok(out)
}

/// `|<F_chi, delta> - (F[chi + eps delta] - F[chi - eps delta]) / (2 eps)|`
pub fn directional_check(f: &Functional, chi: &State, delta: &State, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    let analytic = pairing(&derivative(f, chi)?, delta)?;
    let mut plus = chi.clone();
    plus.axpy(eps, delta)?;
    let mut minus = chi.clone();
    minus.axpy(-eps, delta)?;
    let fd = (evaluate(f, &plus)? - evaluate(f, &minus)?) / (2.0 * eps);
    Ok((analytic - fd).abs())
}

/// Ratio `residual(eps) / residual(eps / 2)`; close to 4 for smooth
/// non-quadratic functionals.
pub fn richardson_ratio(f: &Functional, chi: &State, delta: &State, eps: f64) -> Result<f64> {
    let r1 = directional_check(f, chi, delta, eps)?;
    let r2 = directional_check(f, chi, delta, 0.5 * eps)?;
    Ok(r1 / r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus;
    use crate::fields::{random_state, Field, Grid, Rank, Schema};
    use std::f64::consts::PI;

    fn setup(n: usize) -> (Arc<Grid>, Schema) {
        let g = Arc::new(Grid::cubic(3, n, 2.0 * PI).unwrap());
        (g, Schema::new(&[("v", Rank::Vector(3))]))
    }

    fn kinetic() -> Functional {
        Functional::Quadratic {
            operator: StateMap::new("identity", |u| Ok(u.clone())),
            linear: None,
            constant: 0.0,
        }
    }

    #[test]
    fn linear_zero_kernel() {
        let (g, s) = setup(4);
        let f = Functional::linear(State::zeros(&s, &g));
        let chi = random_state(&s, &g, 1, 1, false).unwrap();
        assert_eq!(f.evaluate(&chi).unwrap(), 0.0);
        assert_eq!(f.derivative(&chi).unwrap(), State::zeros(&s, &g));
    }

    #[test]
    fn quadratic_kinetic_energy_of_sine() {
        let (g, s) = setup(8);
        let v = Field::vector_from_fn(&g, 3, |x| vec![x[0].sin(), 0.0, 0.0]);
        let chi = State::new(s, vec![v]).unwrap();
        let e = kinetic().evaluate(&chi).unwrap();
        assert!((e - (2.0 * PI).powi(3) / 4.0).abs() < 1e-10);
        let d = kinetic().derivative(&chi).unwrap();
        assert!(d.sub(&chi).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn black_box_matches_linear() {
        let (g, s) = setup(4);
        let kernel = random_state(&s, &g, 2, 1, false).unwrap();
        let lin = Functional::linear(kernel.clone());
        let k2 = kernel.clone();
        let bb = Functional::black_box(move |c| pairing(&k2, c).unwrap());
        let chi = random_state(&s, &g, 3, 1, false).unwrap();
        assert_eq!(lin.evaluate(&chi).unwrap(), bb.evaluate(&chi).unwrap());
        let d = bb.derivative(&chi).unwrap();
        assert!(d.sub(&kernel).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn exact_functionals_pass_directional_check() {
        let (g, s) = setup(8);
        let chi = random_state(&s, &g, 4, 2, false).unwrap();
        let delta = random_state(&s, &g, 5, 2, false).unwrap();
        let lin = Functional::linear(random_state(&s, &g, 6, 2, false).unwrap());
        let quad = Functional::Quadratic {
            operator: StateMap::new("-lap", |u| {
                let f = calculus::lap(u.field(0))?.scaled(-1.0);
                State::new(u.schema().clone(), vec![f])
            }),
            linear: Some(random_state(&s, &g, 7, 2, false).unwrap()),
            constant: 3.0,
        };
        for eps in [1e-1, 1e-3] {
            let scale = chi.norm() * delta.norm();
            assert!(directional_check(&lin, &chi, &delta, eps).unwrap() <= 1e-12 * scale.max(1.0));
            let r = directional_check(&quad, &chi, &delta, eps).unwrap();
            assert!(r <= 1e-12 * scale * 50.0, "{r}");
        }
        assert!(directional_check(&lin, &chi, &delta, 0.0).is_err());
    }

    #[test]
    fn cubic_black_box_converges_at_second_order() {
        let g = Arc::new(Grid::cubic(1, 16, 2.0 * PI).unwrap());
        let s = Schema::new(&[("u", Rank::Scalar)]);
        let cubic = Functional::black_box(|c: &State| {
            let f = c.field(0);
            f.component(0).iter().map(|x| x * x * x).sum::<f64>() * f.cell_volume()
        });
        let chi = random_state(&s, &g, 8, 3, false).unwrap();
        let delta = random_state(&s, &g, 9, 3, false).unwrap();
        let ratio = richardson_ratio(&cubic, &chi, &delta, 1e-2).unwrap();
        assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn sum_derivative_is_linear() {
        let (g, s) = setup(4);
        let a = random_state(&s, &g, 10, 1, false).unwrap();
        let chi = random_state(&s, &g, 11, 1, false).unwrap();
        let combo = Functional::Sum(vec![(2.0, Functional::linear(a.clone())), (-0.5, kinetic())]);
        let d = combo.derivative(&chi).unwrap();
        let mut expect = a.scaled(2.0);
        expect.axpy(-0.5, &chi).unwrap();
        assert!(d.sub(&expect).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn non_finite_evaluations_are_reported() {
        let (g, s) = setup(4);
        let bad = Functional::black_box(|c: &State| if c.max_abs() > 0.0 { f64::NAN } else { 0.0 });
        let chi = State::zeros(&s, &g);
        assert!(matches!(bad.derivative(&chi), Err(Error::NonFinite(_))));
    }
}
