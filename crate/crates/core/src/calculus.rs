//! Exact Fourier-multiplier differential operators on periodic grids, plus
//! the phase-space helpers (velocity moments, broadcasts, partials) used by
//! the kinetic systems.
//!
//! `inv_lap` and `inv_sqrt_neg_lap` are Moore-Penrose pseudo-inverses: the
//! zero mode (and any mode whose effective wavenumber vanishes) maps to 0.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field, Grid, Rank};
use crate::spectral;

type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffOp {
    Grad,
    Div,
    Curl,
    Lap,
    InvLap,
    InvSqrtNegLap,
    GradStar,
    SolenoidalPart,
    CompressiblePart,
}

impl DiffOp {
    pub const ALL: [DiffOp; 9] = [
        DiffOp::Grad,
        DiffOp::Div,
        DiffOp::Curl,
        DiffOp::Lap,
        DiffOp::InvLap,
        DiffOp::InvSqrtNegLap,
        DiffOp::GradStar,
        DiffOp::SolenoidalPart,
        DiffOp::CompressiblePart,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DiffOp::Grad => "grad",
            DiffOp::Div => "div",
            DiffOp::Curl => "curl",
            DiffOp::Lap => "lap",
            DiffOp::InvLap => "inv_lap",
            DiffOp::InvSqrtNegLap => "inv_sqrt_neg_lap",
            DiffOp::GradStar => "grad_star",
            DiffOp::SolenoidalPart => "solenoidal_part",
            DiffOp::CompressiblePart => "compressible_part",
        }
    }

    /// Adjoint under the L2 pairing, as an operator of the same family with
    /// a sign.
    pub fn adjoint(self) -> (f64, DiffOp) {
        match self {
            DiffOp::Grad => (-1.0, DiffOp::Div),
            DiffOp::Div => (-1.0, DiffOp::Grad),
            other => (1.0, other),
        }
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn ksq(k: &[f64]) -> f64 {
    k.iter().map(|x| x * x).sum()
}

fn spatial_vector(f: &Field, op: DiffOp) -> Result<usize> {
    match f.rank() {
        Rank::Vector(d) if d == f.grid().spatial_dims() => Ok(d),
        r => Err(Error::RankMismatch(format!("{op} needs a spatial vector field, got {r:?}"))),
    }
}

fn component_wise(f: &Field, mut symbol: impl FnMut(&[f64]) -> f64) -> Result<Field> {
    if f.rank() == Rank::Phase {
        return Err(Error::RankMismatch("spatial operator applied to a phase field".into()));
    }
    let g = f.grid();
    let out = f
        .components()
        .iter()
        .map(|c| {
            spectral::apply_matrix_symbol(&[c], g.spatial_shape(), g.spatial_lengths(), 1, |k, m| {
                m[0] = C64::new(symbol(k), 0.0)
            })
            .remove(0)
        })
        .collect();
    Ok(Field::from_parts_unchecked(g, f.rank(), out))
}

pub fn grad(f: &Field) -> Result<Field> {
    if f.rank() != Rank::Scalar {
        return Err(Error::RankMismatch(format!("grad needs a scalar, got {:?}", f.rank())));
    }
    let g = f.grid();
    let d = g.spatial_dims();
    let out = spectral::apply_matrix_symbol(
        &[f.component(0)],
        g.spatial_shape(),
        g.spatial_lengths(),
        d,
        |k, m| {
            for r in 0..d {
                m[r] = C64::new(0.0, k[r]);
            }
        },
    );
    Ok(Field::from_parts_unchecked(g, Rank::Vector(d), out))
}

pub fn div(v: &Field) -> Result<Field> {
    let d = spatial_vector(v, DiffOp::Div)?;
    let g = v.grid();
    let inputs: Vec<&[f64]> = v.components().iter().map(Vec::as_slice).collect();
    let out = spectral::apply_matrix_symbol(&inputs, g.spatial_shape(), g.spatial_lengths(), 1, |k, m| {
        for c in 0..d {
            m[c] = C64::new(0.0, k[c]);
        }
    });
    Ok(Field::from_parts_unchecked(g, Rank::Scalar, out))
}

pub fn curl(v: &Field) -> Result<Field> {
    let d = spatial_vector(v, DiffOp::Curl)?;
    if d != 3 {
        return Err(Error::RankMismatch("curl requires a 3-D spatial grid".into()));
    }
    let g = v.grid();
    let inputs: Vec<&[f64]> = v.components().iter().map(Vec::as_slice).collect();
    let out = spectral::apply_matrix_symbol(&inputs, g.spatial_shape(), g.spatial_lengths(), 3, |k, m| {
        let i = |x: f64| C64::new(0.0, x);
        m[1] = i(-k[2]);
        m[2] = i(k[1]);
        m[3] = i(k[2]);
        m[5] = i(-k[0]);
        m[6] = i(-k[1]);
        m[7] = i(k[0]);
    });
    Ok(Field::from_parts_unchecked(g, Rank::Vector(3), out))
}

pub fn lap(f: &Field) -> Result<Field> {
    component_wise(f, |k| -ksq(k))
}

pub fn inv_lap(f: &Field) -> Result<Field> {
    component_wise(f, |k| {
        let q = ksq(k);
        if q == 0.0 {
            0.0
        } else {
            -1.0 / q
        }
    })
}

pub fn inv_sqrt_neg_lap(f: &Field) -> Result<Field> {
    component_wise(f, |k| {
        let q = ksq(k);
        if q == 0.0 {
            0.0
        } else {
            1.0 / q.sqrt()
        }
    })
}

fn projector_symbol(v: &Field, op: DiffOp, sign_identity: f64, weight: impl Fn(f64) -> f64) -> Result<Field> {
    let d = spatial_vector(v, op)?;
    let g = v.grid();
    let inputs: Vec<&[f64]> = v.components().iter().map(Vec::as_slice).collect();
    let out = spectral::apply_matrix_symbol(&inputs, g.spatial_shape(), g.spatial_lengths(), d, |k, m| {
        let q = ksq(k);
        for r in 0..d {
            for c in 0..d {
                let id = if r == c { sign_identity } else { 0.0 };
                let kk = if q == 0.0 { 0.0 } else { k[r] * k[c] * weight(q) };
                m[r * d + c] = C64::new(id + kk, 0.0);
            }
        }
    });
    Ok(Field::from_parts_unchecked(g, v.rank(), out))
}

/// `1 - grad inv_lap div`
pub fn solenoidal_part(v: &Field) -> Result<Field> {
    projector_symbol(v, DiffOp::SolenoidalPart, 1.0, |q| -1.0 / q)
}

/// `grad inv_lap div`
pub fn compressible_part(v: &Field) -> Result<Field> {
    projector_symbol(v, DiffOp::CompressiblePart, 0.0, |q| 1.0 / q)
}

/// `grad (-lap)^{-1/2} div`, which acts like a curl on compressible fields.
pub fn grad_star(v: &Field) -> Result<Field> {
    projector_symbol(v, DiffOp::GradStar, 0.0, |q| -1.0 / q.sqrt())
}

pub fn apply_diff(op: DiffOp, f: &Field) -> Result<Field> {
    match op {
        DiffOp::Grad => grad(f),
        DiffOp::Div => div(f),
        DiffOp::Curl => curl(f),
        DiffOp::Lap => lap(f),
        DiffOp::InvLap => inv_lap(f),
        DiffOp::InvSqrtNegLap => inv_sqrt_neg_lap(f),
        DiffOp::GradStar => grad_star(f),
        DiffOp::SolenoidalPart => solenoidal_part(f),
        DiffOp::CompressiblePart => compressible_part(f),
    }
}

type FieldFn = Arc<dyn Fn(&Field) -> Result<Field> + Send + Sync>;

/// A linear map between fields together with its L2 adjoint.
#[derive(Clone)]
pub struct LinearFieldMap {
    pub name: String,
    pub domain: Rank,
    pub range: Rank,
    apply: FieldFn,
    adjoint: FieldFn,
}

impl fmt::Debug for LinearFieldMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearFieldMap")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("range", &self.range)
            .finish()
    }
}

impl LinearFieldMap {
    pub fn new(
        name: impl Into<String>,
        domain: Rank,
        range: Rank,
        apply: impl Fn(&Field) -> Result<Field> + Send + Sync + 'static,
        adjoint: impl Fn(&Field) -> Result<Field> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            range,
            apply: Arc::new(apply),
            adjoint: Arc::new(adjoint),
        }
    }

    /// The differential operator `op` on a spatial grid of dimension `dims`.
    pub fn from_op(op: DiffOp, dims: usize) -> Self {
        let (domain, range) = match op {
            DiffOp::Grad => (Rank::Scalar, Rank::Vector(dims)),
            DiffOp::Div => (Rank::Vector(dims), Rank::Scalar),
            DiffOp::Lap | DiffOp::InvLap | DiffOp::InvSqrtNegLap => (Rank::Scalar, Rank::Scalar),
            _ => (Rank::Vector(dims), Rank::Vector(dims)),
        };
        let (sign, adj) = op.adjoint();
        Self::new(
            op.name(),
            domain,
            range,
            move |f| apply_diff(op, f),
            move |f| Ok(apply_diff(adj, f)?.scaled(sign)),
        )
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        (self.apply)(f)
    }

    pub fn adjoint_apply(&self, f: &Field) -> Result<Field> {
        (self.adjoint)(f)
    }
}

/// `|<L u, w> - <u, L^dagger w>| / (|u| |w|)`
pub fn adjoint_residual(map: &LinearFieldMap, u: &Field, w: &Field) -> Result<f64> {
    if u.rank() != map.domain || w.rank() != map.range {
        return Err(Error::RankMismatch(format!(
            "{} maps {:?} -> {:?}, got {:?} and {:?}",
            map.name,
            map.domain,
            map.range,
            u.rank(),
            w.rank()
        )));
    }
    let lhs = map.apply(u)?.inner(w)?;
    let rhs = u.inner(&map.adjoint_apply(w)?)?;
    let scale = u.norm() * w.norm();
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
}

// ---------------------------------------------------------------------------
// Pointwise products on spatial fields
// ---------------------------------------------------------------------------

pub fn dot(a: &Field, b: &Field) -> Result<Field> {
    if a.rank() != b.rank() {
        return Err(Error::RankMismatch("dot of differently ranked fields".into()));
    }
    let n = a.component(0).len();
    let mut out = vec![0.0; n];
    for (ca, cb) in a.components().iter().zip(b.components()) {
        for i in 0..n {
            out[i] += ca[i] * cb[i];
        }
    }
    let rank = if a.rank() == Rank::Phase { Rank::Phase } else { Rank::Scalar };
    Ok(Field::from_parts_unchecked(a.grid(), rank, vec![out]))
}

pub fn cross(a: &Field, b: &Field) -> Result<Field> {
    if a.rank() != Rank::Vector(3) || b.rank() != Rank::Vector(3) {
        return Err(Error::RankMismatch("cross needs two 3-vectors".into()));
    }
    let (x, y) = (a.components(), b.components());
    let n = x[0].len();
    let mut out = vec![vec![0.0; n]; 3];
    for i in 0..n {
        out[0][i] = x[1][i] * y[2][i] - x[2][i] * y[1][i];
        out[1][i] = x[2][i] * y[0][i] - x[0][i] * y[2][i];
        out[2][i] = x[0][i] * y[1][i] - x[1][i] * y[0][i];
    }
    Ok(Field::from_parts_unchecked(a.grid(), Rank::Vector(3), out))
}

/// Multiplies every component of `f` by the scalar field `s`.
pub fn times(s: &Field, f: &Field) -> Result<Field> {
    if s.rank() != Rank::Scalar || f.rank() == Rank::Phase {
        return Err(Error::RankMismatch("times needs a spatial scalar and a spatial field".into()));
    }
    let w = s.component(0);
    let out = f
        .components()
        .iter()
        .map(|c| c.iter().zip(w).map(|(x, y)| x * y).collect())
        .collect();
    Ok(Field::from_parts_unchecked(f.grid(), f.rank(), out))
}

// ---------------------------------------------------------------------------
// Phase-space helpers on raw sample arrays
// ---------------------------------------------------------------------------

/// `d/dx_axis` (axis < spatial dims) or `d/dv_{axis - spatial dims}` of a
/// phase-space array.
pub fn phase_partial(grid: &Grid, data: &[f64], axis: usize) -> Vec<f64> {
    spectral::partial(data, &grid.phase_shape(), &grid.phase_lengths(), axis)
}

pub fn spatial_partial(grid: &Grid, data: &[f64], axis: usize) -> Vec<f64> {
    spectral::partial(data, grid.spatial_shape(), grid.spatial_lengths(), axis)
}

/// `int d^m v data(x, v)`
pub fn velocity_integral(grid: &Grid, data: &[f64]) -> Vec<f64> {
    let nv = grid.n_velocity();
    let dv = grid.velocity_cell_volume();
    data.chunks(nv).map(|c| c.iter().sum::<f64>() * dv).collect()
}

/// `int d^m v w(v) data(x, v)` for a velocity-only weight.
pub fn velocity_weighted_integral(grid: &Grid, data: &[f64], weight: &[f64]) -> Vec<f64> {
    let dv = grid.velocity_cell_volume();
    data.chunks(weight.len())
        .map(|c| c.iter().zip(weight).map(|(a, b)| a * b).sum::<f64>() * dv)
        .collect()
}

/// Spatial array repeated along the velocity axes.
pub fn broadcast(grid: &Grid, spatial: &[f64]) -> Vec<f64> {
    let nv = grid.n_velocity();
    spatial.iter().flat_map(|&x| std::iter::repeat(x).take(nv)).collect()
}

/// Velocity coordinate `v_axis` at every velocity sample.
pub fn velocity_coordinate(grid: &Grid, axis: usize) -> Vec<f64> {
    (0..grid.n_velocity()).map(|j| grid.velocity_coord(j)[axis]).collect()
}

/// Multiplies a phase array by a velocity-only weight.
pub fn times_velocity_weight(data: &[f64], weight: &[f64]) -> Vec<f64> {
    data.chunks(weight.len())
        .flat_map(|c| c.iter().zip(weight).map(|(a, b)| a * b))
        .collect()
}

/// Multiplies a phase array by a spatial weight.
pub fn times_spatial_weight(grid: &Grid, data: &[f64], weight: &[f64]) -> Vec<f64> {
    let nv = grid.n_velocity();
    data.chunks(nv)
        .zip(weight)
        .flat_map(|(c, w)| c.iter().map(move |a| a * w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::random_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cube(n: usize) -> Arc<Grid> {
        Arc::new(Grid::cubic(3, n, 2.0 * PI).unwrap())
    }

    fn rand_vec(g: &Arc<Grid>, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_field(g, Rank::Vector(3), &mut rng, 3, false).unwrap()
    }

    fn rand_scalar(g: &Arc<Grid>, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_field(g, Rank::Scalar, &mut rng, 3, false).unwrap()
    }

    fn diff_norm(a: &Field, b: &Field) -> f64 {
        let mut d = a.clone();
        d.axpy(-1.0, b).unwrap();
        d.norm()
    }

    #[test]
    fn curl_of_grad_vanishes() {
        let g = cube(16);
        let f = Field::scalar_from_fn(&g, |x| (x[0] + x[1] + x[2]).sin());
        let c = curl(&grad(&f).unwrap()).unwrap();
        assert!(c.max_abs() < 1e-12);
    }

    #[test]
    fn inv_lap_single_mode() {
        let g = Arc::new(Grid::cubic(1, 16, 2.0 * PI).unwrap());
        let f = Field::scalar_from_fn(&g, |x| (2.0 * x[0]).sin());
        let u = inv_lap(&f).unwrap();
        let expect = Field::scalar_from_fn(&g, |x| -(2.0 * x[0]).sin() / 4.0);
        assert!(diff_norm(&u, &expect) < 1e-13);
    }

    #[test]
    fn grad_star_reproduces_compressible_projector() {
        let g = cube(8);
        let v = rand_vec(&g, 11);
        let gs = grad_star(&v).unwrap();
        let composed = grad_star(&inv_lap(&gs).unwrap()).unwrap().scaled(-1.0);
        let reference = grad(&inv_lap(&div(&v).unwrap()).unwrap()).unwrap();
        assert!(diff_norm(&composed, &reference) <= 1e-10 * v.norm());
        assert!(diff_norm(&compressible_part(&v).unwrap(), &reference) <= 1e-10 * v.norm());
    }

    #[test]
    fn helmholtz_split_properties() {
        let g = cube(8);
        let v = rand_vec(&g, 5);
        let s = solenoidal_part(&v).unwrap();
        let c = compressible_part(&v).unwrap();
        let mut sum = s.clone();
        sum.axpy(1.0, &c).unwrap();
        assert!(diff_norm(&sum, &v) <= 1e-10 * v.norm());
        assert!(div(&s).unwrap().norm() <= 1e-10 * v.norm());
        assert!(curl(&c).unwrap().norm() <= 1e-10 * v.norm());
        assert!(diff_norm(&solenoidal_part(&s).unwrap(), &s) <= 1e-10 * v.norm());
        assert!(diff_norm(&compressible_part(&c).unwrap(), &c) <= 1e-10 * v.norm());
        // -curl inv_lap curl is the solenoidal projector away from the mean
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = random_field(&g, Rank::Vector(3), &mut rng, 3, true).unwrap();
        let alt = curl(&inv_lap(&curl(&w).unwrap()).unwrap()).unwrap().scaled(-1.0);
        assert!(diff_norm(&alt, &solenoidal_part(&w).unwrap()) <= 1e-10 * w.norm());
    }

    #[test]
    fn inv_sqrt_squared_is_inv_lap() {
        let g = cube(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_field(&g, Rank::Scalar, &mut rng, 3, true).unwrap();
        let twice = inv_sqrt_neg_lap(&inv_sqrt_neg_lap(&f).unwrap()).unwrap();
        let reference = inv_lap(&f).unwrap().scaled(-1.0);
        assert!(diff_norm(&twice, &reference) <= 1e-10 * f.norm());
        let round = inv_lap(&lap(&f).unwrap()).unwrap();
        assert!(diff_norm(&round, &f) <= 1e-10 * f.norm());
    }

    #[test]
    fn adjoint_residuals_of_every_operator() {
        let g = cube(8);
        for (i, op) in DiffOp::ALL.iter().enumerate() {
            let map = LinearFieldMap::from_op(*op, 3);
            let pick = |r: Rank, s: u64| match r {
                Rank::Scalar => rand_scalar(&g, s),
                _ => rand_vec(&g, s),
            };
            let u = pick(map.domain, 100 + i as u64);
            let w = pick(map.range, 200 + i as u64);
            let r = adjoint_residual(&map, &u, &w).unwrap();
            assert!(r <= 1e-10, "{op}: {r}");
        }
    }

    #[test]
    fn curl_rejects_non_3d() {
        let g = Arc::new(Grid::cubic(2, 8, 1.0).unwrap());
        let v = Field::zeros(&g, Rank::Vector(2));
        assert!(curl(&v).is_err());
        assert!(grad(&v).is_err());
    }

    #[test]
    fn pairing_of_grad_equals_minus_div() {
        let g = cube(8);
        let phi = rand_scalar(&g, 1);
        let v = rand_vec(&g, 2);
        let lhs = grad(&phi).unwrap().inner(&v).unwrap();
        let rhs = -phi.inner(&div(&v).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * phi.norm() * v.norm());
    }
}
