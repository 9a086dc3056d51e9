//! Right-hand sides, classical RK4 and conservation monitors.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::brackets::apply_j;
use crate::error::{Error, Result};
use crate::fields::{State, Tangent};
use crate::functionals::{derivative, evaluate, Functional};
use crate::reduction::dirac_j_apply;
use crate::systems::SystemSpec;

/// `chi_t = J(chi) H_chi` for the named bracket, or `J* H_chi` when the
/// name refers to a reduction.
pub fn rhs(system: &SystemSpec, bracket_name: &str, chi: &State) -> Result<Tangent> {
    let h = system.hamiltonian()?;
    let dh = derivative(h, chi)?;
    if let Ok(op) = system.bracket(bracket_name) {
        return apply_j(op.as_ref(), chi, &dh);
    }
    match system.reduction(bracket_name) {
        Ok(a_op) => dirac_j_apply(a_op, chi, &dh),
        Err(_) => Err(Error::Usage(format!(
            "{} has no bracket or reduction named {bracket_name:?}; brackets: {:?}",
            system.name,
            system.bracket_names()
        ))),
    }
}

type MonitorFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// A scalar tracked along a trajectory; drift is measured against its value
/// at the initial state.
#[derive(Clone)]
pub struct Monitor {
    pub name: String,
    evaluate: MonitorFn,
    /// Fixed reference; when `None` the initial value is used.
    pub reference: Option<f64>,
    pub tolerance: f64,
}

impl fmt::Debug for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Monitor")
            .field("name", &self.name)
            .field("reference", &self.reference)
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

impl Monitor {
    pub fn new(name: impl Into<String>, tolerance: f64, evaluate: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            evaluate: Arc::new(evaluate),
            reference: None,
            tolerance,
        }
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }

    /// Value of a functional; NaN if it cannot be evaluated.
    pub fn functional(name: impl Into<String>, f: Functional, tolerance: f64) -> Self {
        Self::new(name, tolerance, move |chi| evaluate(&f, chi).unwrap_or(f64::NAN))
    }

    /// `max |div u|` of vector slot `slot`; reference 0.
    pub fn max_divergence(name: impl Into<String>, slot: usize, tolerance: f64) -> Self {
        Self::new(name, tolerance, move |chi| {
            crate::calculus::div(chi.field(slot)).map(|d| d.max_abs()).unwrap_or(f64::NAN)
        })
        .with_reference(0.0)
    }

    /// `max |u - value|` of scalar slot `slot`; reference 0.
    pub fn max_deviation(name: impl Into<String>, slot: usize, value: f64, tolerance: f64) -> Self {
        Self::new(name, tolerance, move |chi| {
            chi.field(slot).components().iter().flatten().fold(0.0f64, |m, x| m.max((x - value).abs()))
        })
        .with_reference(0.0)
    }

    pub fn evaluate(&self, chi: &State) -> f64 {
        (self.evaluate)(chi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorHistory {
    pub name: String,
    pub reference: f64,
    pub tolerance: f64,
    /// One value per recorded time, including `t = 0`.
    pub values: Vec<f64>,
}

impl MonitorHistory {
    /// `max_t |value(t) - reference|`
    pub fn max_drift(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max((v - self.reference).abs()))
    }

    pub fn within_tolerance(&self) -> bool {
        self.max_drift() <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub final_state: State,
    pub monitors: Vec<MonitorHistory>,
}

impl Trajectory {
    pub fn monitor(&self, name: &str) -> Option<&MonitorHistory> {
        self.monitors.iter().find(|m| m.name == name)
    }

    /// Writes `t` and every monitor value as CSV columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.monitors.iter().map(|m| m.name.clone()));
        w.write_record(&header).map_err(csv_error)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.12e}")];
            row.extend(self.monitors.iter().map(|m| format!("{:.12e}", m.values[i])));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn rk4_step(f: &dyn Fn(&State) -> Result<Tangent>, chi: &State, dt: f64) -> Result<State> {
    let k1 = f(chi)?;
    let mut s = chi.clone();
    s.axpy(0.5 * dt, &k1)?;
    let k2 = f(&s)?;
    let mut s = chi.clone();
    s.axpy(0.5 * dt, &k2)?;
    let k3 = f(&s)?;
    let mut s = chi.clone();
    s.axpy(dt, &k3)?;
    let k4 = f(&s)?;
    let mut out = chi.clone();
    out.axpy(dt / 6.0, &k1)?;
    out.axpy(dt / 3.0, &k2)?;
    out.axpy(dt / 3.0, &k3)?;
    out.axpy(dt / 6.0, &k4)?;
    Ok(out)
}

/// Classical RK4 for `steps` steps, recording every monitor after each step.
pub fn simulate(
    system: &SystemSpec,
    bracket_name: &str,
    chi0: &State,
    dt: f64,
    steps: usize,
    monitors: &[Monitor],
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    chi0.check_schema(&system.schema)?;
    // fail on an unknown bracket before integrating
    rhs(system, bracket_name, chi0)?;
    let f = |chi: &State| rhs(system, bracket_name, chi);
    let mut histories: Vec<MonitorHistory> = monitors
        .iter()
        .map(|m| {
            let v = m.evaluate(chi0);
            MonitorHistory {
                name: m.name.clone(),
                reference: m.reference.unwrap_or(v),
                tolerance: m.tolerance,
                values: vec![v],
            }
        })
        .collect();
    let mut times = vec![0.0];
    let mut chi = chi0.clone();
    for step in 1..=steps {
        chi = rk4_step(&f, &chi, dt)?;
        if !chi.fields().iter().all(|field| field.is_finite()) {
            return Err(Error::NonFinite(format!("state blew up at step {step} (t = {})", step as f64 * dt)));
        }
        times.push(step as f64 * dt);
        for (m, h) in monitors.iter().zip(histories.iter_mut()) {
            h.values.push(m.evaluate(&chi));
        }
    }
    Ok(Trajectory {
        times,
        final_state: chi,
        monitors: histories,
    })
}
