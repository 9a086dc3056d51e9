//! Catalog of constrained Hamiltonian systems with their brackets,
//! constraints, reductions and closed-form reference operators.

use std::fmt;
use std::sync::Arc;

use crate::brackets::BracketOperator;
use crate::constraints::{AOperator, Constraint};
use crate::error::{Error, Result};
use crate::fields::{Cotangent, Grid, Schema, State};
use crate::functionals::Functional;

pub mod mhd;
pub mod quasineutral;
pub mod toy;
pub mod vlasov;
pub mod vorticity;

type OperatorFn = Arc<dyn Fn(&State, &State) -> Result<State> + Send + Sync>;
type BracketFn = Arc<dyn Fn(&State, &Cotangent, &Cotangent) -> Result<f64> + Send + Sync>;

/// Reference operator written out by hand, for comparison with the generic
/// machinery.
#[derive(Clone)]
pub enum ClosedForm {
    /// `(chi, input) -> output`
    Operator(OperatorFn),
    /// `(chi, a, b) -> {a, b}` for linear functionals with kernels `a`, `b`.
    Bracket(BracketFn),
}

impl ClosedForm {
    pub fn operator(f: impl Fn(&State, &State) -> Result<State> + Send + Sync + 'static) -> Self {
        ClosedForm::Operator(Arc::new(f))
    }

    pub fn bracket(f: impl Fn(&State, &Cotangent, &Cotangent) -> Result<f64> + Send + Sync + 'static) -> Self {
        ClosedForm::Bracket(Arc::new(f))
    }

    pub fn apply(&self, state: &State, input: &State) -> Result<State> {
        match self {
            ClosedForm::Operator(f) => f(state, input),
            ClosedForm::Bracket(_) => Err(Error::Unsupported("closed form is a bracket, not an operator".into())),
        }
    }

    pub fn evaluate(&self, state: &State, a: &Cotangent, b: &Cotangent) -> Result<f64> {
        match self {
            ClosedForm::Bracket(f) => f(state, a, b),
            ClosedForm::Operator(_) => Err(Error::Unsupported("closed form is an operator, not a bracket".into())),
        }
    }
}

impl fmt::Debug for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClosedForm::Operator(_) => f.write_str("ClosedForm::Operator"),
            ClosedForm::Bracket(_) => f.write_str("ClosedForm::Bracket"),
        }
    }
}

/// Everything needed to exercise one system.
#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub grid: Arc<Grid>,
    pub schema: Schema,
    pub hamiltonian: Option<Functional>,
    pub brackets: Vec<(String, BracketOperator)>,
    pub constraints: Vec<(String, Constraint)>,
    pub reductions: Vec<(String, AOperator)>,
    pub closed_forms: Vec<(String, ClosedForm)>,
    pub parameters: Vec<(String, f64)>,
}

fn lookup<'a, T>(items: &'a [(String, T)], name: &str, what: &str, system: &str) -> Result<&'a T> {
    items.iter().find(|(n, _)| n == name).map(|(_, v)| v).ok_or_else(|| {
        let known: Vec<&str> = items.iter().map(|(n, _)| n.as_str()).collect();
        Error::Usage(format!("{system} has no {what} named {name:?}; known: {known:?}"))
    })
}

impl SystemSpec {
    pub fn new(name: impl Into<String>, grid: Arc<Grid>, schema: Schema) -> Self {
        Self {
            name: name.into(),
            grid,
            schema,
            hamiltonian: None,
            brackets: Vec::new(),
            constraints: Vec::new(),
            reductions: Vec::new(),
            closed_forms: Vec::new(),
            parameters: Vec::new(),
        }
    }

    pub fn bracket(&self, name: &str) -> Result<&BracketOperator> {
        lookup(&self.brackets, name, "bracket", &self.name)
    }

    pub fn constraint(&self, name: &str) -> Result<&Constraint> {
        lookup(&self.constraints, name, "constraint", &self.name)
    }

    pub fn reduction(&self, name: &str) -> Result<&AOperator> {
        lookup(&self.reductions, name, "reduction", &self.name)
    }

    pub fn closed_form(&self, name: &str) -> Result<&ClosedForm> {
        lookup(&self.closed_forms, name, "closed form", &self.name)
    }

    pub fn parameter(&self, name: &str) -> Result<f64> {
        lookup(&self.parameters, name, "parameter", &self.name).copied()
    }

    pub fn hamiltonian(&self) -> Result<&Functional> {
        self.hamiltonian
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("{} has no Hamiltonian", self.name)))
    }

    pub fn bracket_names(&self) -> Vec<&str> {
        self.brackets.iter().map(|(n, _)| n.as_str()).collect()
    }
}
