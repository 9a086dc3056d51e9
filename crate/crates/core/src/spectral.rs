//! Fourier machinery on periodic tensor grids.
//!
//! Arrays are stored row-major: the last axis varies fastest. Wavenumbers use
//! the Nyquist-zeroed convention, so every odd derivative is an exactly
//! antisymmetric real operator and `lap == div . grad` holds to rounding.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

type C64 = Complex<f64>;

struct PlanCache {
    planner: FftPlanner<f64>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<PlanCache>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        Mutex::new(PlanCache {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
        })
    });
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    if let Some(p) = guard.plans.get(&(len, inverse)) {
        return p.clone();
    }
    let p = if inverse {
        guard.planner.plan_fft_inverse(len)
    } else {
        guard.planner.plan_fft_forward(len)
    };
    guard.plans.insert((len, inverse), p.clone());
    p
}

/// Signed mode index of position `j` on an axis with `n` points.
pub(crate) fn mode_index(j: usize, n: usize) -> i64 {
    if 2 * j < n {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Effective angular wavenumber; the Nyquist mode of an even axis maps to 0.
pub(crate) fn wavenumber(j: usize, n: usize, length: f64) -> f64 {
    if n % 2 == 0 && 2 * j == n {
        return 0.0;
    }
    2.0 * std::f64::consts::PI * mode_index(j, n) as f64 / length
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}

/// In-place 1-D transforms of every line along `axis`.
fn transform_axis(buf: &mut [C64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    if n == 1 {
        return;
    }
    let st = strides(shape);
    let stride = st[axis];
    let outer: usize = shape[..axis].iter().product();
    let lines = outer * stride;
    let mut scratch = vec![C64::new(0.0, 0.0); lines * n];
    for o in 0..outer {
        for i in 0..stride {
            let line = o * stride + i;
            let base = o * n * stride + i;
            for j in 0..n {
                scratch[line * n + j] = buf[base + j * stride];
            }
        }
    }
    plan(n, inverse).process(&mut scratch);
    for o in 0..outer {
        for i in 0..stride {
            let line = o * stride + i;
            let base = o * n * stride + i;
            for j in 0..n {
                buf[base + j * stride] = scratch[line * n + j];
            }
        }
    }
}

/// Unnormalized forward DFT over all axes.
pub(crate) fn forward(data: &[f64], shape: &[usize]) -> Vec<C64> {
    let mut buf: Vec<C64> = data.iter().map(|&x| C64::new(x, 0.0)).collect();
    for a in 0..shape.len() {
        transform_axis(&mut buf, shape, a, false);
    }
    buf
}

/// Normalized inverse DFT over all axes, keeping the real part.
pub(crate) fn inverse_real(mut buf: Vec<C64>, shape: &[usize]) -> Vec<f64> {
    for a in 0..shape.len() {
        transform_axis(&mut buf, shape, a, true);
    }
    let norm = 1.0 / buf.len() as f64;
    buf.iter().map(|z| z.re * norm).collect()
}

/// Visits every multi-index of `shape` in storage order, passing the flat
/// index and the effective wavenumber vector.
pub(crate) fn for_each_wavevector(shape: &[usize], lengths: &[f64], mut f: impl FnMut(usize, &[f64])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    let mut k = vec![0.0; shape.len()];
    for flat in 0..total {
        for a in 0..shape.len() {
            k[a] = wavenumber(idx[a], shape[a], lengths[a]);
        }
        f(flat, &k);
        for a in (0..shape.len()).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// Applies a matrix-valued Fourier multiplier. `symbol(k, m)` fills the
/// `n_out x inputs.len()` row-major matrix `m` for wavevector `k`.
pub(crate) fn apply_matrix_symbol(
    inputs: &[&[f64]],
    shape: &[usize],
    lengths: &[f64],
    n_out: usize,
    mut symbol: impl FnMut(&[f64], &mut [C64]),
) -> Vec<Vec<f64>> {
    let n_in = inputs.len();
    let spectra: Vec<Vec<C64>> = inputs.iter().map(|d| forward(d, shape)).collect();
    let total: usize = shape.iter().product();
    let mut outs = vec![vec![C64::new(0.0, 0.0); total]; n_out];
    let mut m = vec![C64::new(0.0, 0.0); n_out * n_in];
    for_each_wavevector(shape, lengths, |flat, k| {
        m.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        symbol(k, &mut m);
        for r in 0..n_out {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..n_in {
                acc += m[r * n_in + c] * spectra[c][flat];
            }
            outs[r][flat] = acc;
        }
    });
    outs.into_iter().map(|o| inverse_real(o, shape)).collect()
}

/// Spectral partial derivative along one axis (1-D transforms only).
pub(crate) fn partial(data: &[f64], shape: &[usize], lengths: &[f64], axis: usize) -> Vec<f64> {
    let n = shape[axis];
    let st = strides(shape);
    let stride = st[axis];
    let outer: usize = shape[..axis].iter().product();
    let lines = outer * stride;
    let mut scratch = vec![C64::new(0.0, 0.0); lines * n];
    for o in 0..outer {
        for i in 0..stride {
            let line = o * stride + i;
            let base = o * n * stride + i;
            for j in 0..n {
                scratch[line * n + j] = C64::new(data[base + j * stride], 0.0);
            }
        }
    }
    plan(n, false).process(&mut scratch);
    let ik: Vec<C64> = (0..n)
        .map(|j| C64::new(0.0, wavenumber(j, n, lengths[axis]) / n as f64))
        .collect();
    for line in scratch.chunks_mut(n) {
        for (z, m) in line.iter_mut().zip(&ik) {
            *z *= m;
        }
    }
    plan(n, true).process(&mut scratch);
    let mut out = vec![0.0; data.len()];
    for o in 0..outer {
        for i in 0..stride {
            let line = o * stride + i;
            let base = o * n * stride + i;
            for j in 0..n {
                out[base + j * stride] = scratch[line * n + j].re;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn nyquist_is_zeroed() {
        assert_eq!(wavenumber(4, 8, 2.0 * PI), 0.0);
        assert_eq!(wavenumber(3, 8, 2.0 * PI), 3.0);
        assert_eq!(wavenumber(5, 8, 2.0 * PI), -3.0);
        assert_eq!(wavenumber(2, 5, 2.0 * PI), 2.0);
    }

    #[test]
    fn partial_of_sine_on_middle_axis() {
        let shape = [4, 8, 6];
        let lengths = [2.0 * PI; 3];
        let mut data = vec![0.0; 4 * 8 * 6];
        for a in 0..4 {
            for b in 0..8 {
                for c in 0..6 {
                    let y = 2.0 * PI * b as f64 / 8.0;
                    data[(a * 8 + b) * 6 + c] = (2.0 * y).sin();
                }
            }
        }
        let d = partial(&data, &shape, &lengths, 1);
        for a in 0..4 {
            for b in 0..8 {
                for c in 0..6 {
                    let y = 2.0 * PI * b as f64 / 8.0;
                    assert!((d[(a * 8 + b) * 6 + c] - 2.0 * (2.0 * y).cos()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_inverse_round_trip() {
        let shape = [3, 4, 5];
        let data: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = inverse_real(forward(&data, &shape), &shape);
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
