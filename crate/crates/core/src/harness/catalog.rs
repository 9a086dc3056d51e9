//! Named systems with their default grids, sample states and monitors.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::calculus::{curl, div, solenoidal_part};
use crate::error::{Error, Result};
use crate::fields::{random_state, Field, Grid, State};
use crate::systems::{mhd, quasineutral, toy, vlasov, vorticity, SystemSpec};

use super::checks::probe_band;
use super::config::{B0Spec, SystemParams};
use super::integrate::Monitor;

pub const SYSTEMS: [&str; 7] = [
    "vorticity",
    "compressible_mhd",
    "incompressible_mhd",
    "vlasov_maxwell",
    "vlasov_poisson",
    "quasineutral",
    "toy",
];

fn known(system: &str) -> Result<()> {
    if SYSTEMS.contains(&system) {
        Ok(())
    } else {
        Err(Error::Usage(format!("unknown system {system:?}; known systems: {}", SYSTEMS.join(", "))))
    }
}

pub fn default_grid(system: &str) -> Result<Vec<usize>> {
    known(system)?;
    Ok(match system {
        "vlasov_maxwell" | "vlasov_poisson" => vec![8, 8, 8, 8, 8, 8],
        "quasineutral" => vec![16, 64],
        "toy" => vec![toy::POINTS],
        _ => vec![16, 16, 16],
    })
}

/// Expands the short grid forms (`[N]` for a cube, spatial sizes only for
/// phase-space systems) to the full list of axis sizes.
pub fn expand_grid(system: &str, sizes: &[usize]) -> Result<Vec<usize>> {
    known(system)?;
    let bad = || Error::Usage(format!("grid {sizes:?} does not fit {system}"));
    Ok(match system {
        "toy" => match sizes {
            [n] if *n == toy::POINTS => vec![*n],
            _ => return Err(Error::Usage(format!("the toy system has a fixed {}-point grid", toy::POINTS))),
        },
        "vlasov_maxwell" | "vlasov_poisson" => match sizes {
            [n] => vec![*n; 6],
            [x, y, z] => vec![*x, *y, *z, 8, 8, 8],
            [_, _, _, _, _, _] => sizes.to_vec(),
            _ => return Err(bad()),
        },
        "quasineutral" => match sizes {
            [n] => vec![*n, 64],
            [_, _] | [_, _, _, _] => sizes.to_vec(),
            _ => return Err(bad()),
        },
        _ => match sizes {
            [n] => vec![*n; 3],
            [_, _, _] => sizes.to_vec(),
            _ => return Err(bad()),
        },
    })
}

pub fn build_grid(system: &str, sizes: &[usize], params: &SystemParams) -> Result<Arc<Grid>> {
    let sizes = expand_grid(system, sizes)?;
    let grid = match system {
        "toy" => return Ok(toy::grid()),
        "vlasov_maxwell" | "vlasov_poisson" => {
            Grid::with_velocity(sizes[..3].to_vec(), vec![2.0 * PI; 3], sizes[3..].to_vec(), vec![PI; 3])?
        }
        "quasineutral" => {
            let d = sizes.len() / 2;
            let v_max = params.v_max.unwrap_or(8.0);
            Grid::with_velocity(sizes[..d].to_vec(), vec![2.0 * PI; d], sizes[d..].to_vec(), vec![v_max; d])?
        }
        _ => Grid::new(sizes, vec![2.0 * PI; 3])?,
    };
    Ok(Arc::new(grid))
}

fn background(grid: &Arc<Grid>, spec: &B0Spec) -> Field {
    match spec {
        B0Spec::Sinusoidal => vlasov::default_background(grid),
        B0Spec::Uniform(b) => Field::vector_from_fn(grid, 3, |_| b.to_vec()),
    }
}

pub fn build_system(system: &str, sizes: Option<&[usize]>, params: &SystemParams) -> Result<SystemSpec> {
    let sizes = match sizes {
        Some(s) => s.to_vec(),
        None => default_grid(system)?,
    };
    let grid = build_grid(system, &sizes, params)?;
    match system {
        "vorticity" => vorticity::vorticity_system(grid),
        "compressible_mhd" => mhd::compressible_mhd_system(grid, mhd::MagneticVariant::Projected, params.energy()),
        "incompressible_mhd" => mhd::incompressible_mhd_reduction(grid, params.rho0, params.energy()),
        "vlasov_maxwell" => {
            vlasov::vlasov_maxwell_system(grid, vlasov::GyroVariant::Projected, vlasov::ParentD::None)
        }
        "vlasov_poisson" => {
            let b0 = background(&grid, &params.b0);
            vlasov::vlasov_poisson_reduction(grid, Some(b0))
        }
        "quasineutral" => {
            let dims = grid.spatial_dims();
            let qp = params.maxwellian.clone().unwrap_or_else(|| quasineutral::QuasineutralParams::standard(dims));
            quasineutral::quasineutral_system(grid, qp)
        }
        "toy" => toy::toy_system(),
        other => Err(Error::Usage(format!("unknown system {other:?}"))),
    }
}

/// Bracket used for time evolution.
pub fn default_bracket(system: &str) -> Result<&'static str> {
    known(system)?;
    Ok(match system {
        "vorticity" => "corrected",
        "compressible_mhd" | "vlasov_maxwell" => "projected",
        _ => "dirac",
    })
}

/// MHD state `rho = 1 + amp r`, other slots scaled by `amp`; `B` optionally
/// made solenoidal.
pub fn mhd_state(grid: &Arc<Grid>, seed: u64, amp: f64, solenoidal_b: bool) -> Result<State> {
    let mut s = random_state(&mhd::schema(), grid, seed, probe_band(grid, 1), true)?;
    *s.field_mut(mhd::RHO) = s.field(mhd::RHO).map(|r| 1.0 + amp * r);
    *s.field_mut(mhd::V) = s.field(mhd::V).scaled(amp);
    *s.field_mut(mhd::S) = s.field(mhd::S).scaled(amp);
    let b = s.field(mhd::B).scaled(amp);
    *s.field_mut(mhd::B) = if solenoidal_b { solenoidal_part(&b)? } else { b };
    Ok(s)
}

/// Point on the incompressible constraint surface: `rho = rho0`, solenoidal
/// `v` and `B` of size `v_amp`, `b_amp`.
pub fn incompressible_state(grid: &Arc<Grid>, seed: u64, rho0: f64, v_amp: f64, b_amp: f64) -> Result<State> {
    let mut s = random_state(&mhd::schema(), grid, seed, probe_band(grid, 2), true)?;
    *s.field_mut(mhd::RHO) = Field::scalar_from_fn(grid, |_| rho0);
    *s.field_mut(mhd::V) = solenoidal_part(&s.field(mhd::V).scaled(v_amp))?;
    *s.field_mut(mhd::B) = solenoidal_part(&s.field(mhd::B).scaled(b_amp))?;
    Ok(s)
}

/// Vlasov state with `f` of size 0.1 and order-one fields.
pub fn vlasov_state(grid: &Arc<Grid>, seed: u64) -> Result<State> {
    let mut s = random_state(&vlasov::schema(), grid, seed, 1, false)?;
    *s.field_mut(vlasov::F) = s.field(vlasov::F).scaled(0.1);
    Ok(s)
}

/// Representative state of `spec` for checks and simulations.
pub fn sample_state(spec: &SystemSpec, seed: u64, params: &SystemParams) -> Result<State> {
    let grid = &spec.grid;
    match spec.name.as_str() {
        "compressible_mhd" => mhd_state(grid, seed, 0.2, false),
        "incompressible_mhd" => incompressible_state(grid, seed, params.rho0, 1.0, 0.5),
        "vlasov_maxwell" | "vlasov_poisson" => vlasov_state(grid, seed),
        _ => random_state(&spec.schema, grid, seed, probe_band(grid, 2), true),
    }
}

/// Energy plus the constraint quantities that the named system conserves.
pub fn default_monitors(spec: &SystemSpec, params: &SystemParams) -> Result<Vec<Monitor>> {
    let mut out = Vec::new();
    if let Ok(h) = spec.hamiltonian() {
        out.push(Monitor::functional("energy", h.clone(), 1e-6));
    }
    match spec.name.as_str() {
        "vorticity" => out.push(Monitor::new("max_div_omega", 1e-8, |chi| max_div(chi.field(0)))),
        "compressible_mhd" => {
            out.push(Monitor::new("max_div_b", 1e-8, |chi| max_div(chi.field(mhd::B))));
            out.push(Monitor::new("mass", 1e-8, |chi| integral(chi.field(mhd::RHO))));
            out.push(Monitor::new("entropy", 1e-8, |chi| {
                crate::calculus::times(chi.field(mhd::RHO), chi.field(mhd::S))
                    .ok()
                    .map_or(f64::NAN, |f| integral(&f))
            }));
        }
        "incompressible_mhd" => {
            out.push(Monitor::max_divergence("max_div_v", mhd::V, 1e-8));
            out.push(Monitor::max_deviation("max_density_deviation", mhd::RHO, params.rho0, 1e-8));
        }
        "vlasov_maxwell" => {
            out.push(Monitor::new("max_div_b", 1e-8, |chi| max_div(chi.field(vlasov::B))));
            out.push(Monitor::new("max_gauss_residual", 1e-8, gauss_residual).with_reference(0.0));
        }
        "vlasov_poisson" => {
            out.push(Monitor::new("max_curl_e", 1e-8, |chi| {
                curl(chi.field(vlasov::E)).map_or(f64::NAN, |c| c.max_abs())
            }));
        }
        _ => {}
    }
    Ok(out)
}

fn max_div(f: &Field) -> f64 {
    div(f).map_or(f64::NAN, |d| d.max_abs())
}

fn integral(f: &Field) -> f64 {
    crate::fields::integrate(f).unwrap_or(f64::NAN)
}

/// `max |div E - rho| `, measured against its initial value by the monitor.
fn gauss_residual(chi: &State) -> f64 {
    let (Ok(d), Ok(rho)) = (div(chi.field(vlasov::E)), vlasov::charge_density(chi)) else {
        return f64::NAN;
    };
    let mut r = d;
    if r.axpy(-1.0, &rho).is_err() {
        return f64::NAN;
    }
    r.max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_system_builds_on_its_default_grid() {
        let p = SystemParams::default();
        for s in SYSTEMS {
            let spec = build_system(s, None, &p).unwrap();
            assert_eq!(spec.name, s);
            sample_state(&spec, 1, &p).unwrap().check_schema(&spec.schema).unwrap();
            default_monitors(&spec, &p).unwrap();
            let b = default_bracket(s).unwrap();
            assert!(spec.bracket(b).is_ok() || spec.reduction(b).is_ok(), "{s}: {b}");
        }
    }

    #[test]
    fn grid_forms_expand() {
        assert_eq!(expand_grid("vorticity", &[8]).unwrap(), vec![8, 8, 8]);
        assert_eq!(expand_grid("vlasov_poisson", &[8]).unwrap(), vec![8; 6]);
        assert_eq!(expand_grid("quasineutral", &[16]).unwrap(), vec![16, 64]);
        assert!(expand_grid("vorticity", &[8, 8]).is_err());
        assert!(expand_grid("toy", &[8]).is_err());
        assert!(matches!(build_system("nope", None, &SystemParams::default()), Err(Error::Usage(_))));
    }
}
