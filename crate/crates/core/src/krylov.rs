//! Krylov solvers over [`State`] vectors using the L2 pairing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{pairing, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target `|A y - w| <= tol |w|`.
    pub tol: f64,
    /// Defaults to ten times the number of unknowns.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, max_iter: None }
    }

    fn iterations_for(&self, rhs: &State) -> usize {
        self.max_iter.unwrap_or_else(|| {
            10 * rhs
                .fields()
                .iter()
                .map(|f| f.components().len() * f.component(0).len())
                .sum::<usize>()
        })
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: State,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a self-adjoint positive semi-definite operator.
/// Starting from zero, the iterate stays in the operator's range, so a
/// consistent right-hand side yields the minimum-norm solution.
pub fn conjugate_gradient(apply: impl Fn(&State) -> Result<State>, rhs: &State, opts: SolverOptions) -> Result<Solution> {
    let bnorm = rhs.norm();
    let mut x = rhs.zeros_like();
    if bnorm == 0.0 {
        return Ok(Solution { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = pairing(&r, &r)?;
    let max_iter = opts.iterations_for(rhs);
    for it in 1..=max_iter {
        let ap = apply(&p)?;
        let pap = pairing(&p, &ap)?;
        if !(pap > 0.0) {
            return Err(Error::NotConverged {
                iterations: it,
                residual: rr.sqrt() / bnorm,
            });
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p)?;
        r.axpy(-alpha, &ap)?;
        let rr_new = pairing(&r, &r)?;
        if rr_new.sqrt() <= opts.tol * bnorm {
            // confirm on the true residual
            let true_res = rhs.sub(&apply(&x)?)?.norm() / bnorm;
            if true_res <= opts.tol {
                return Ok(Solution { x, iterations: it, relative_residual: true_res });
            }
            r = rhs.sub(&apply(&x)?)?;
            p = r.clone();
            rr = pairing(&r, &r)?;
            continue;
        }
        let beta = rr_new / rr;
        let mut next = r.clone();
        next.axpy(beta, &p)?;
        p = next;
        rr = rr_new;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: rhs.sub(&apply(&x)?)?.norm() / bnorm,
    })
}

/// CGLS for `min |A y - w|` given `A` and its adjoint. Converges (in exact
/// arithmetic) to the minimum-norm least-squares solution; the residual
/// contract only holds when `w` lies in the range of `A`.
pub fn cgls(
    apply: impl Fn(&State) -> Result<State>,
    apply_adjoint: impl Fn(&State) -> Result<State>,
    rhs: &State,
    opts: SolverOptions,
) -> Result<Solution> {
    let bnorm = rhs.norm();
    let mut x = rhs.zeros_like();
    if bnorm == 0.0 {
        return Ok(Solution { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut r = rhs.clone();
    let mut s = apply_adjoint(&r)?;
    let mut p = s.clone();
    let mut gamma = pairing(&s, &s)?;
    let max_iter = opts.iterations_for(rhs);
    let mut stalled = 0;
    let mut best = f64::INFINITY;
    for it in 1..=max_iter {
        let q = apply(&p)?;
        let qq = pairing(&q, &q)?;
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.axpy(alpha, &p)?;
        r.axpy(-alpha, &q)?;
        let res = r.norm() / bnorm;
        if res <= opts.tol {
            let true_res = rhs.sub(&apply(&x)?)?.norm() / bnorm;
            if true_res <= opts.tol {
                return Ok(Solution { x, iterations: it, relative_residual: true_res });
            }
            r = rhs.sub(&apply(&x)?)?;
        }
        if res < 0.999 * best {
            best = res;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 200 {
                break;
            }
        }
        s = apply_adjoint(&r)?;
        let gamma_new = pairing(&s, &s)?;
        if gamma_new == 0.0 {
            break;
        }
        let beta = gamma_new / gamma;
        let mut next = s.clone();
        next.axpy(beta, &p)?;
        p = next;
        gamma = gamma_new;
    }
    let residual = rhs.sub(&apply(&x)?)?.norm() / bnorm;
    if residual <= opts.tol {
        return Ok(Solution { x, iterations: max_iter, relative_residual: residual });
    }
    Err(Error::NotConverged { iterations: max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus;
    use crate::fields::{random_state, Grid, Rank, Schema};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup() -> (Arc<Grid>, Schema) {
        (
            Arc::new(Grid::cubic(1, 16, 2.0 * PI).unwrap()),
            Schema::new(&[("u", Rank::Scalar)]),
        )
    }

    fn neg_lap(u: &State) -> Result<State> {
        State::new(u.schema().clone(), vec![calculus::lap(u.field(0))?.scaled(-1.0)])
    }

    #[test]
    fn cg_inverts_negative_laplacian_on_mean_free_data() {
        let (g, s) = setup();
        let b = random_state(&s, &g, 1, 5, true).unwrap();
        let sol = conjugate_gradient(neg_lap, &b, SolverOptions::with_tol(1e-12)).unwrap();
        assert!(sol.relative_residual <= 1e-12);
        let reference = calculus::inv_lap(b.field(0)).unwrap().scaled(-1.0);
        let mut d = sol.x.field(0).clone();
        d.axpy(-1.0, &reference).unwrap();
        assert!(d.norm() < 1e-10 * reference.norm());
    }

    #[test]
    fn cgls_reports_inconsistent_right_hand_side() {
        let (g, s) = setup();
        // constants are outside the range of the Laplacian
        let b = random_state(&s, &g, 2, 0, false).unwrap();
        let out = cgls(neg_lap, neg_lap, &b, SolverOptions { tol: 1e-10, max_iter: Some(50) });
        assert!(matches!(out, Err(Error::NotConverged { .. })));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (g, s) = setup();
        let b = State::zeros(&s, &g);
        let sol = cgls(neg_lap, neg_lap, &b, SolverOptions::default()).unwrap();
        assert_eq!(sol.x.max_abs(), 0.0);
    }
}
