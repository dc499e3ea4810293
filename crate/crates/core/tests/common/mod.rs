#![allow(dead_code)]

use std::f64::consts::PI;

use lsfstat_core::Sampling;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const T_S: f64 = 129.1e-6;
pub const F_S: f64 = 4.96e6;

pub fn sampling() -> Sampling {
    Sampling::new(T_S, F_S).unwrap()
}

pub fn random_complex(seed: u64, dims: (usize, usize)) -> Array2<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn(dims, |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Direct DSFT multitaper estimate with centred Doppler bins.
pub fn dsft_oracle(h: &Array2<Complex64>, windows: &[Array2<f64>]) -> Array2<f64> {
    let (n, m) = h.dim();
    let half = (n / 2) as f64;
    let scale = 1.0 / ((n * m) as f64).sqrt();
    let mut c = Array2::<f64>::zeros((n, m));
    for g in windows {
        for p in 0..n {
            let nu = p as f64 - half;
            for l in 0..m {
                let mut acc = Complex64::default();
                for s in 0..n {
                    for q in 0..m {
                        let phase = -2.0 * PI * nu * s as f64 / n as f64 + 2.0 * PI * (l * q) as f64 / m as f64;
                        acc += h[[s, q]] * g[[s, q]] * Complex64::from_polar(1.0, phase);
                    }
                }
                c[[p, l]] += (acc * scale).norm_sqr();
            }
        }
    }
    c.mapv_inplace(|v| v / windows.len() as f64);
    c
}

/// Power of the complex exponential at `nu` in every column, by matched
/// projection, averaged over columns.
pub fn tone_power(data: &Array2<Complex64>, nu: f64, t_s: f64) -> f64 {
    let (s_len, q_len) = data.dim();
    let mut total = 0.0;
    for q in 0..q_len {
        let proj: Complex64 = (0..s_len)
            .map(|s| data[[s, q]] * Complex64::from_polar(1.0, -2.0 * PI * nu * s as f64 * t_s))
            .sum();
        total += (proj / s_len as f64).norm_sqr();
    }
    total / q_len as f64
}

pub fn argmax2(a: &Array2<f64>) -> (usize, usize) {
    a.indexed_iter()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap()
}
