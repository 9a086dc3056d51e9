//! Periodic grids, fields, state tuples and the L2 pairing.

use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Periodic tensor grid. Spatial axes come first and span `[0, L)`; velocity
/// axes span `[-L/2, L/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    spatial_points: Vec<usize>,
    spatial_lengths: Vec<f64>,
    velocity_points: Vec<usize>,
    velocity_lengths: Vec<f64>,
}

impl Grid {
    pub fn new(spatial_points: Vec<usize>, spatial_lengths: Vec<f64>) -> Result<Self> {
        Self::with_velocity(spatial_points, spatial_lengths, Vec::new(), Vec::new())
    }

    /// Cubic spatial grid `[0, length)^dims` with `n` points per axis.
    pub fn cubic(dims: usize, n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n; dims], vec![length; dims])
    }

    /// `v_max` gives the half-width of the periodic velocity box on each axis.
    pub fn with_velocity(
        spatial_points: Vec<usize>,
        spatial_lengths: Vec<f64>,
        velocity_points: Vec<usize>,
        v_max: Vec<f64>,
    ) -> Result<Self> {
        if !(1..=3).contains(&spatial_points.len()) {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension {} outside 1..=3",
                spatial_points.len()
            )));
        }
        if velocity_points.len() > 3 {
            return Err(Error::InvalidGrid("velocity dimension above 3".into()));
        }
        if spatial_lengths.len() != spatial_points.len() || v_max.len() != velocity_points.len() {
            return Err(Error::InvalidGrid("lengths do not match axis count".into()));
        }
        if let Some(n) = spatial_points.iter().chain(&velocity_points).find(|&&n| n < 4) {
            return Err(Error::InvalidGrid(format!("axis with {n} points (need >= 4)")));
        }
        if spatial_lengths
            .iter()
            .chain(&v_max)
            .any(|&l| !(l.is_finite() && l > 0.0))
        {
            return Err(Error::InvalidGrid("box lengths must be positive".into()));
        }
        Ok(Self {
            spatial_points,
            spatial_lengths,
            velocity_points,
            velocity_lengths: v_max.iter().map(|v| 2.0 * v).collect(),
        })
    }

    pub fn spatial_dims(&self) -> usize {
        self.spatial_points.len()
    }

    pub fn velocity_dims(&self) -> usize {
        self.velocity_points.len()
    }

    pub fn spatial_shape(&self) -> &[usize] {
        &self.spatial_points
    }

    pub fn velocity_shape(&self) -> &[usize] {
        &self.velocity_points
    }

    pub fn spatial_lengths(&self) -> &[f64] {
        &self.spatial_lengths
    }

    pub fn velocity_lengths(&self) -> &[f64] {
        &self.velocity_lengths
    }

    pub fn v_max(&self) -> Vec<f64> {
        self.velocity_lengths.iter().map(|l| 0.5 * l).collect()
    }

    pub fn phase_shape(&self) -> Vec<usize> {
        let mut s = self.spatial_points.clone();
        s.extend_from_slice(&self.velocity_points);
        s
    }

    pub fn phase_lengths(&self) -> Vec<f64> {
        let mut l = self.spatial_lengths.clone();
        l.extend_from_slice(&self.velocity_lengths);
        l
    }

    pub fn n_spatial(&self) -> usize {
        self.spatial_points.iter().product()
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity_points.iter().product()
    }

    pub fn n_phase(&self) -> usize {
        self.n_spatial() * self.n_velocity()
    }

    pub fn spatial_cell_volume(&self) -> f64 {
        self.spatial_lengths
            .iter()
            .zip(&self.spatial_points)
            .map(|(l, &n)| l / n as f64)
            .product()
    }

    pub fn velocity_cell_volume(&self) -> f64 {
        self.velocity_lengths
            .iter()
            .zip(&self.velocity_points)
            .map(|(l, &n)| l / n as f64)
            .product()
    }

    pub fn spatial_volume(&self) -> f64 {
        self.spatial_lengths.iter().product()
    }

    pub fn velocity_volume(&self) -> f64 {
        self.velocity_lengths.iter().product()
    }

    pub fn cell_volume(&self, rank: Rank) -> f64 {
        match rank {
            Rank::Phase => self.spatial_cell_volume() * self.velocity_cell_volume(),
            _ => self.spatial_cell_volume(),
        }
    }

    pub fn support_len(&self, rank: Rank) -> usize {
        match rank {
            Rank::Phase => self.n_phase(),
            _ => self.n_spatial(),
        }
    }

    pub fn support_shape(&self, rank: Rank) -> Vec<usize> {
        match rank {
            Rank::Phase => self.phase_shape(),
            _ => self.spatial_points.clone(),
        }
    }

    pub fn support_lengths(&self, rank: Rank) -> Vec<f64> {
        match rank {
            Rank::Phase => self.phase_lengths(),
            _ => self.spatial_lengths.clone(),
        }
    }

    /// Coordinates of the spatial sample with flat index `flat`.
    pub fn spatial_coord(&self, flat: usize) -> Vec<f64> {
        unravel(flat, &self.spatial_points)
            .iter()
            .zip(&self.spatial_points)
            .zip(&self.spatial_lengths)
            .map(|((&i, &n), &l)| l * i as f64 / n as f64)
            .collect()
    }

    /// Coordinates of the velocity sample with flat index `flat`.
    pub fn velocity_coord(&self, flat: usize) -> Vec<f64> {
        unravel(flat, &self.velocity_points)
            .iter()
            .zip(&self.velocity_points)
            .zip(&self.velocity_lengths)
            .map(|((&i, &n), &l)| -0.5 * l + l * i as f64 / n as f64)
            .collect()
    }

    /// Spatial sub-grid (drops the velocity axes).
    pub fn spatial_grid(&self) -> Grid {
        Grid {
            spatial_points: self.spatial_points.clone(),
            spatial_lengths: self.spatial_lengths.clone(),
            velocity_points: Vec::new(),
            velocity_lengths: Vec::new(),
        }
    }
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for a in (0..shape.len()).rev() {
        idx[a] = flat % shape[a];
        flat /= shape[a];
    }
    idx
}

/// Tensor rank of a field. `Phase` is a scalar on the full phase-space grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rank {
    Scalar,
    Vector(usize),
    Phase,
}

impl Rank {
    pub fn multiplicity(self) -> usize {
        match self {
            Rank::Vector(d) => d,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    rank: Rank,
    data: Vec<Vec<f64>>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>, rank: Rank) -> Self {
        let n = grid.support_len(rank);
        Self {
            grid: grid.clone(),
            rank,
            data: vec![vec![0.0; n]; rank.multiplicity()],
        }
    }

    pub fn from_components(grid: &Arc<Grid>, rank: Rank, data: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.support_len(rank);
        if data.len() != rank.multiplicity() || data.iter().any(|c| c.len() != n) {
            return Err(Error::RankMismatch(format!(
                "{} components of lengths {:?} for rank {:?} on {} samples",
                data.len(),
                data.iter().map(Vec::len).collect::<Vec<_>>(),
                rank,
                n
            )));
        }
        if data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("field samples".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            rank,
            data,
        })
    }

    pub(crate) fn from_parts_unchecked(grid: &Arc<Grid>, rank: Rank, data: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(data.len(), rank.multiplicity());
        Self {
            grid: grid.clone(),
            rank,
            data,
        }
    }

    pub fn scalar(grid: &Arc<Grid>, data: Vec<f64>) -> Result<Self> {
        Self::from_components(grid, Rank::Scalar, vec![data])
    }

    pub fn scalar_from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let data = (0..grid.n_spatial()).map(|i| f(&grid.spatial_coord(i))).collect();
        Self::from_parts_unchecked(grid, Rank::Scalar, vec![data])
    }

    pub fn vector_from_fn(grid: &Arc<Grid>, dims: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let n = grid.n_spatial();
        let mut data = vec![vec![0.0; n]; dims];
        for i in 0..n {
            let v = f(&grid.spatial_coord(i));
            for c in 0..dims {
                data[c][i] = v[c];
            }
        }
        Self::from_parts_unchecked(grid, Rank::Vector(dims), data)
    }

    /// Phase-space field `f(x, v)`.
    pub fn phase_from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64], &[f64]) -> f64) -> Self {
        let nv = grid.n_velocity();
        let vs: Vec<Vec<f64>> = (0..nv).map(|j| grid.velocity_coord(j)).collect();
        let mut data = Vec::with_capacity(grid.n_phase());
        for i in 0..grid.n_spatial() {
            let x = grid.spatial_coord(i);
            for v in &vs {
                data.push(f(&x, v));
            }
        }
        Self::from_parts_unchecked(grid, Rank::Phase, vec![data])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.data[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.data
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.cell_volume(self.rank)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().flatten().all(|x| x.is_finite())
    }

    fn check_same_shape(&self, other: &Field) -> Result<()> {
        if self.rank != other.rank || self.grid != other.grid {
            return Err(Error::RankMismatch(format!(
                "{:?} vs {:?}",
                self.rank, other.rank
            )));
        }
        Ok(())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Field) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().flatten().for_each(|x| *x *= alpha);
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().flatten().for_each(|x| *x = f(*x));
        out
    }

    /// Integral of the slot-wise dot product with `other`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_shape(other)?;
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        Ok(s * self.cell_volume())
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).unwrap_or(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Riemann sum times cell volume; exact for resolved trigonometric
/// polynomials.
pub fn integrate(f: &Field) -> Result<f64> {
    if let Rank::Vector(_) = f.rank {
        return Err(Error::RankMismatch("integrate requires a scalar field".into()));
    }
    Ok(f.data[0].iter().sum::<f64>() * f.cell_volume())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub rank: Rank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    slots: Vec<SlotSpec>,
}

impl Schema {
    pub fn new(slots: &[(&str, Rank)]) -> Self {
        Self {
            slots: slots
                .iter()
                .map(|(n, r)| SlotSpec {
                    name: n.to_string(),
                    rank: *r,
                })
                .collect(),
        }
    }

    pub fn slots(&self) -> &[SlotSpec] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }
}

/// Tuple of fields following a [`Schema`]. Tangents, cotangents and
/// constraint values all share this representation.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    schema: Schema,
    fields: Vec<Field>,
}

pub type Cotangent = State;
pub type Tangent = State;

impl State {
    pub fn new(schema: Schema, fields: Vec<Field>) -> Result<Self> {
        if fields.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} fields for {} slots",
                fields.len(),
                schema.len()
            )));
        }
        for (f, s) in fields.iter().zip(schema.slots()) {
            if f.rank != s.rank {
                return Err(Error::SchemaMismatch(format!(
                    "slot {} expects {:?}, got {:?}",
                    s.name, s.rank, f.rank
                )));
            }
            if f.grid != fields[0].grid {
                return Err(Error::SchemaMismatch("fields live on different grids".into()));
            }
        }
        Ok(Self { schema, fields })
    }

    pub fn zeros(schema: &Schema, grid: &Arc<Grid>) -> Self {
        let fields = schema.slots().iter().map(|s| Field::zeros(grid, s.rank)).collect();
        Self {
            schema: schema.clone(),
            fields,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.fields[0].grid()
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn field_mut(&mut self, i: usize) -> &mut Field {
        &mut self.fields[i]
    }

    pub fn into_fields(self) -> Vec<Field> {
        self.fields
    }

    pub fn slot(&self, name: &str) -> Result<&Field> {
        self.schema
            .index_of(name)
            .map(|i| &self.fields[i])
            .ok_or_else(|| Error::SchemaMismatch(format!("no slot named {name}")))
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        if &self.schema != schema {
            return Err(Error::SchemaMismatch(format!(
                "expected {:?}, got {:?}",
                schema.slots().iter().map(|s| &s.name).collect::<Vec<_>>(),
                self.schema.slots().iter().map(|s| &s.name).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> State {
        State::zeros(&self.schema, self.grid())
    }

    pub fn axpy(&mut self, alpha: f64, other: &State) -> Result<()> {
        other.check_schema(&self.schema)?;
        for (a, b) in self.fields.iter_mut().zip(&other.fields) {
            a.axpy(alpha, b)?;
        }
        Ok(())
    }

    pub fn add(&self, other: &State) -> Result<State> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &State) -> Result<State> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn scaled(&self, alpha: f64) -> State {
        State {
            schema: self.schema.clone(),
            fields: self.fields.iter().map(|f| f.scaled(alpha)).collect(),
        }
    }

    pub fn pairing(&self, other: &State) -> Result<f64> {
        pairing(self, other)
    }

    pub fn norm(&self) -> f64 {
        self.fields.iter().map(|f| f.inner(f).unwrap_or(0.0)).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.fields.iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(Field::is_finite)
    }
}

/// Sum over slots of the integrated component-wise dot product.
pub fn pairing(a: &State, u: &State) -> Result<f64> {
    u.check_schema(&a.schema)?;
    a.fields
        .iter()
        .zip(&u.fields)
        .map(|(x, y)| x.inner(y))
        .sum()
}

/// Random band-limited field: Fourier coefficients vanish for any mode with
/// `|m| > band_limit` on some axis. Each component is scaled to unit RMS.
pub fn random_field(
    grid: &Arc<Grid>,
    rank: Rank,
    rng: &mut impl Rng,
    band_limit: usize,
    zero_mean: bool,
) -> Result<Field> {
    let shape = grid.support_shape(rank);
    for &n in &shape {
        if band_limit >= n / 2 {
            return Err(Error::BandLimit {
                band: band_limit,
                nyquist: n / 2,
            });
        }
    }
    let total: usize = shape.iter().product();
    let mut comps = Vec::with_capacity(rank.multiplicity());
    for _ in 0..rank.multiplicity() {
        let mut spec = vec![Complex::new(0.0, 0.0); total];
        let mut idx = vec![0usize; shape.len()];
        for z in spec.iter_mut() {
            let inside = idx
                .iter()
                .zip(&shape)
                .all(|(&j, &n)| spectral::mode_index(j, n).unsigned_abs() as usize <= band_limit);
            let is_zero = idx.iter().all(|&j| j == 0);
            if inside && !(zero_mean && is_zero) {
                *z = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            for a in (0..shape.len()).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        let mut data = spectral::inverse_real(spec, &shape);
        let rms = (data.iter().map(|x| x * x).sum::<f64>() / total as f64).sqrt();
        if rms > 0.0 {
            data.iter_mut().for_each(|x| *x /= rms);
        }
        comps.push(data);
    }
    Ok(Field::from_parts_unchecked(grid, rank, comps))
}

/// Deterministic band-limited random state for property probes.
pub fn random_state(
    schema: &Schema,
    grid: &Arc<Grid>,
    seed: u64,
    band_limit: usize,
    zero_mean: bool,
) -> Result<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = schema
        .slots()
        .iter()
        .map(|s| random_field(grid, s.rank, &mut rng, band_limit, zero_mean))
        .collect::<Result<Vec<_>>>()?;
    State::new(schema.clone(), fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cube(n: usize) -> Arc<Grid> {
        Arc::new(Grid::cubic(3, n, 2.0 * PI).unwrap())
    }

    #[test]
    fn grid_rejects_small_axes() {
        assert!(Grid::cubic(3, 3, 1.0).is_err());
        assert!(Grid::cubic(4, 8, 1.0).is_err());
        assert!(Grid::new(vec![8], vec![-1.0]).is_err());
    }

    #[test]
    fn integrate_constant_and_modes() {
        let g = cube(8);
        let one = Field::scalar_from_fn(&g, |_| 1.0);
        assert!((integrate(&one).unwrap() - (2.0 * PI).powi(3)).abs() < 1e-10);
        let g1 = Arc::new(Grid::cubic(1, 16, 2.0 * PI).unwrap());
        let s = Field::scalar_from_fn(&g1, |x| x[0].sin());
        assert!(integrate(&s).unwrap().abs() < 1e-14);
        let s2 = Field::scalar_from_fn(&g1, |x| x[0].sin().powi(2));
        assert!((integrate(&s2).unwrap() - PI).abs() < 1e-13);
    }

    #[test]
    fn integrate_rejects_vectors() {
        let g = cube(4);
        assert!(integrate(&Field::zeros(&g, Rank::Vector(3))).is_err());
    }

    #[test]
    fn pairing_rejects_schema_mismatch() {
        let g = cube(4);
        let a = State::zeros(&Schema::new(&[("u", Rank::Scalar)]), &g);
        let b = State::zeros(&Schema::new(&[("w", Rank::Scalar)]), &g);
        assert!(pairing(&a, &b).is_err());
    }

    #[test]
    fn random_state_is_deterministic_and_zero_mean() {
        let g = cube(8);
        let schema = Schema::new(&[("a", Rank::Scalar), ("b", Rank::Vector(3))]);
        let s1 = random_state(&schema, &g, 7, 2, true).unwrap();
        let s2 = random_state(&schema, &g, 7, 2, true).unwrap();
        assert_eq!(s1, s2);
        for f in s1.fields() {
            for c in 0..f.components().len() {
                let m = Field::scalar(&g, f.component(c).to_vec()).unwrap();
                assert!(integrate(&m).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_state_spectrum_is_band_limited() {
        let g = cube(8);
        let schema = Schema::new(&[("a", Rank::Scalar)]);
        let s = random_state(&schema, &g, 3, 2, false).unwrap();
        let spec = spectral::forward(s.field(0).component(0), &[8, 8, 8]);
        let mut flat = 0;
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    let m = [i, j, k].map(|q| spectral::mode_index(q, 8).unsigned_abs());
                    if m.iter().any(|&q| q > 2) {
                        assert!(spec[flat].norm() < 1e-10, "mode {m:?}");
                    }
                    flat += 1;
                }
            }
        }
    }

    #[test]
    fn band_limit_must_be_below_nyquist() {
        let g = cube(8);
        let schema = Schema::new(&[("a", Rank::Scalar)]);
        assert!(matches!(
            random_state(&schema, &g, 1, 4, false),
            Err(Error::BandLimit { .. })
        ));
    }
}
