#![allow(dead_code)]

pub mod suites;

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trpca::{DenseMatrix, DenseTensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
    Array2::from_shape_simple_fn((m, n), || rng.random_range(-1.0..1.0))
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
    let n: usize = dims.iter().product();
    DenseTensor::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Max-abs difference scaled by the larger of the two magnitudes.
pub fn rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let scale = a.iter().chain(b.iter()).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn rel_diff_t(a: &DenseTensor, b: &DenseTensor) -> f64 {
    assert_eq!(a.dims(), b.dims());
    let scale = a.inf_norm().max(b.inf_norm()).max(1e-300);
    (a - b).inf_norm() / scale
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Written straight to the process stdout so the line shows without `--nocapture`.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {id:>2} {name:<28} {} {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = out.flush();
}
