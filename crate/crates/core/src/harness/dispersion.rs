//! Constraint waves of the parent Vlasov-Maxwell bracket. In vacuum the
//! constraint fields `e = div E - rho` and `b = div B` obey
//! `e_t = Lap D b`, `b_t = -Lap D e`; the oscillation frequency of a single
//! Fourier mode is measured by a least-squares cosine fit.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::calculus::lap;
use crate::error::{Error, Result};
use crate::fields::{Field, Grid};
use crate::systems::vlasov::ParentD;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveSamples {
    pub times: Vec<f64>,
    /// Projection of `e` onto the seeded mode.
    pub mode: Vec<f64>,
    /// `max |e|, max |b|` over the whole run.
    pub peak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineFit {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    /// RMS misfit relative to the RMS of the data.
    pub relative_misfit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionResult {
    pub wavevector: Vec<i64>,
    pub fit: CosineFit,
    pub samples: WaveSamples,
}

fn mode_shape(grid: &Arc<Grid>, k: &[i64]) -> Field {
    Field::scalar_from_fn(grid, |x| x.iter().zip(k).map(|(xi, ki)| *ki as f64 * xi).sum::<f64>().cos())
}

fn check_wavevector(grid: &Grid, k: &[i64]) -> Result<()> {
    if k.len() != grid.spatial_dims() {
        return Err(Error::InvalidParameter(format!(
            "wavevector has {} components for a {}-D grid",
            k.len(),
            grid.spatial_dims()
        )));
    }
    for ((&ki, &n), &l) in k.iter().zip(grid.spatial_shape()).zip(grid.spatial_lengths()) {
        if (l - 2.0 * PI).abs() > 1e-12 {
            return Err(Error::InvalidGrid("dispersion check expects 2 pi periodic axes".into()));
        }
        if 2 * ki.unsigned_abs() as usize >= n {
            return Err(Error::BandLimit {
                band: ki.unsigned_abs() as usize,
                nyquist: n / 2,
            });
        }
    }
    if k.iter().all(|&ki| ki == 0) {
        return Err(Error::InvalidParameter("wavevector must be nonzero".into()));
    }
    Ok(())
}

/// Integrates the constraint system with RK4 from `e = amplitude cos(k.x)`,
/// `b = 0`, sampling `steps_per_period` times per period of the slowest
/// expected frequency for `periods` periods.
pub fn constraint_wave(
    d: ParentD,
    grid: &Arc<Grid>,
    k: &[i64],
    amplitude: f64,
    periods: usize,
    steps_per_period: usize,
) -> Result<WaveSamples> {
    check_wavevector(grid, k)?;
    if d == ParentD::None {
        return Err(Error::InvalidParameter("constraint waves need a parent operator D".into()));
    }
    let kk = k.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
    let omega_guess = match d {
        ParentD::InvSqrtNegLap => kk,
        _ => 1.0,
    };
    let dt = 2.0 * PI / omega_guess / steps_per_period as f64;
    let steps = periods * steps_per_period;
    let shape = mode_shape(grid, k);
    let norm2 = shape.inner(&shape)?;
    let l_d = |f: &Field| -> Result<Field> {
        let df = d.apply(f)?.expect("parent operator present");
        lap(&df)
    };
    let rate = |e: &Field, b: &Field| -> Result<(Field, Field)> { Ok((l_d(b)?, l_d(e)?.scaled(-1.0))) };

    let mut e = shape.scaled(amplitude);
    let mut b = Field::zeros(grid, e.rank());
    let mut times = Vec::with_capacity(steps + 1);
    let mut mode = Vec::with_capacity(steps + 1);
    let mut peak: f64 = e.max_abs();
    for step in 0..=steps {
        times.push(step as f64 * dt);
        mode.push(e.inner(&shape)? / norm2);
        if step == steps {
            break;
        }
        let (k1e, k1b) = rate(&e, &b)?;
        let stage = |c: f64, de: &Field, db: &Field| -> Result<(Field, Field)> {
            let mut e2 = e.clone();
            e2.axpy(c * dt, de)?;
            let mut b2 = b.clone();
            b2.axpy(c * dt, db)?;
            rate(&e2, &b2)
        };
        let (k2e, k2b) = stage(0.5, &k1e, &k1b)?;
        let (k3e, k3b) = stage(0.5, &k2e, &k2b)?;
        let (k4e, k4b) = stage(1.0, &k3e, &k3b)?;
        for (w, ke, kb) in [(1.0, &k1e, &k1b), (2.0, &k2e, &k2b), (2.0, &k3e, &k3b), (1.0, &k4e, &k4b)] {
            e.axpy(w * dt / 6.0, ke)?;
            b.axpy(w * dt / 6.0, kb)?;
        }
        peak = peak.max(e.max_abs()).max(b.max_abs());
    }
    Ok(WaveSamples { times, mode, peak })
}

/// Least-squares `c cos(w t) + s sin(w t)` at fixed `w`; returns the
/// coefficients and the residual sum of squares.
fn linear_fit(times: &[f64], data: &[f64], w: f64) -> (f64, f64, f64) {
    let (mut cc, mut cs, mut ss, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in times.iter().zip(data) {
        let (s, c) = (w * t).sin_cos();
        cc += c * c;
        cs += c * s;
        ss += s * s;
        yc += y * c;
        ys += y * s;
    }
    let det = cc * ss - cs * cs;
    if det.abs() < 1e-300 {
        return (0.0, 0.0, data.iter().map(|y| y * y).sum());
    }
    let a = (yc * ss - ys * cs) / det;
    let b = (ys * cc - yc * cs) / det;
    let rss = times
        .iter()
        .zip(data)
        .map(|(&t, &y)| {
            let (s, c) = (w * t).sin_cos();
            (y - a * c - b * s).powi(2)
        })
        .sum();
    (a, b, rss)
}

/// Fits `A cos(w t + phi)`: a coarse scan over `(0, pi / dt)` followed by
/// golden-section refinement of the best bracket.
pub fn fit_cosine(times: &[f64], data: &[f64]) -> Result<CosineFit> {
    if times.len() != data.len() || times.len() < 8 {
        return Err(Error::FitFailure("need at least 8 samples".into()));
    }
    let energy: f64 = data.iter().map(|y| y * y).sum();
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::FitFailure("signal is identically zero or not finite".into()));
    }
    let span = times[times.len() - 1] - times[0];
    let dt = times[1] - times[0];
    let w_max = PI / dt;
    let dw = PI / span / 4.0;
    let scan = (w_max / dw).ceil() as usize;
    let rss = |w: f64| linear_fit(times, data, w).2;
    let (mut best, mut best_rss) = (dw, f64::INFINITY);
    for i in 1..scan {
        let w = i as f64 * dw;
        let r = rss(w);
        if r < best_rss {
            best = w;
            best_rss = r;
        }
    }
    let (mut lo, mut hi) = ((best - dw).max(0.5 * dw), best + dw);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (rss(x1), rss(x2));
    for _ in 0..200 {
        if hi - lo < 1e-14 * best {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = rss(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = rss(x2);
        }
    }
    let w = 0.5 * (lo + hi);
    let (a, b, r) = linear_fit(times, data, w);
    let misfit = (r / energy).sqrt();
    if misfit > 1e-2 {
        return Err(Error::FitFailure(format!("data are not a single oscillation (relative misfit {misfit:.3e})")));
    }
    Ok(CosineFit {
        amplitude: a.hypot(b),
        frequency: w,
        phase: (-b).atan2(a),
        relative_misfit: misfit,
    })
}

/// Frequency of constraint mode `k` under parent operator `d`, fitted over
/// 10 periods at 64 samples per period.
pub fn dispersion_check(d: ParentD, grid: &Arc<Grid>, k: &[i64]) -> Result<DispersionResult> {
    let samples = constraint_wave(d, grid, k, 1.0, 10, 64)?;
    let fit = fit_cosine(&samples.times, &samples.mode)?;
    Ok(DispersionResult {
        wavevector: k.to_vec(),
        fit,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::cubic(3, 8, 2.0 * PI).unwrap())
    }

    #[test]
    fn fit_recovers_a_known_cosine() {
        let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.7 * (2.3 * t + 0.4).cos()).collect();
        let fit = fit_cosine(&t, &y).unwrap();
        assert!((fit.frequency - 2.3).abs() < 1e-9);
        assert!((fit.amplitude - 0.7).abs() < 1e-9);
        assert!((fit.phase - 0.4).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_non_oscillatory_data() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| (0.3 * t * t).exp()).collect();
        assert!(matches!(fit_cosine(&t, &y), Err(Error::FitFailure(_))));
        assert!(matches!(fit_cosine(&t, &vec![0.0; 100]), Err(Error::FitFailure(_))));
    }

    #[test]
    fn zero_amplitude_stays_zero() {
        let w = constraint_wave(ParentD::InvLap, &grid(), &[1, 0, 0], 0.0, 2, 32).unwrap();
        assert_eq!(w.peak, 0.0);
        assert!(w.mode.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn inverse_laplacian_gives_unit_frequency() {
        for k in [[1, 0, 0], [0, 1, 1]] {
            let r = dispersion_check(ParentD::InvLap, &grid(), &k).unwrap();
            assert!((r.fit.frequency - 1.0).abs() < 1e-5, "{:?}", r.fit);
        }
    }

    #[test]
    fn inverse_square_root_gives_wave_dispersion() {
        let r = dispersion_check(ParentD::InvSqrtNegLap, &grid(), &[1, 1, 0]).unwrap();
        assert!((r.fit.frequency - 2f64.sqrt()).abs() < 1e-5, "{:?}", r.fit);
    }

    #[test]
    fn invalid_wavevectors_are_rejected() {
        assert!(dispersion_check(ParentD::InvLap, &grid(), &[0, 0, 0]).is_err());
        assert!(dispersion_check(ParentD::InvLap, &grid(), &[4, 0, 0]).is_err());
        assert!(dispersion_check(ParentD::InvLap, &grid(), &[1, 0]).is_err());
        assert!(dispersion_check(ParentD::None, &grid(), &[1, 0, 0]).is_err());
    }
}
