//! Helpers shared by the integration test crates.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};

/// Integrates `x' = A x + B u` over `[0, t]` with an adaptive
/// Dormand-Prince 5(4) pair.
pub fn integrate_lti(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    u: f64,
    t: f64,
    rtol: f64,
    atol: f64,
) -> DVector<f64> {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let f = |x: &DVector<f64>| a * x + b * u;

    let mut x = x0.clone();
    let mut s = 0.0;
    let mut step = (t / 100.0).max(1e-12);
    while s < t {
        if s + step > t {
            step = t - s;
        }
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        for row in &A {
            let mut xi = x.clone();
            for (kj, aij) in k.iter().zip(row) {
                xi += kj * (aij * step);
            }
            k.push(f(&xi));
        }
        let mut x5 = x.clone();
        let mut x4 = x.clone();
        for i in 0..7 {
            x5 += &k[i] * (B5[i] * step);
            x4 += &k[i] * (B4[i] * step);
        }
        let err = (&x5 - &x4)
            .iter()
            .zip(x5.iter())
            .map(|(e, v)| e.abs() / (atol + rtol * v.abs()))
            .fold(0.0, f64::max);
        if err <= 1.0 {
            s += step;
            x = x5;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        step *= factor;
    }
    x
}

/// Eigenvalues of a real square matrix, sorted by (re, im).
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
    ev
}

/// Largest distance between two pole multisets of size two.
pub fn pole_mismatch(got: &[Complex<f64>], want: &[Complex<f64>; 2]) -> f64 {
    let direct = (got[0] - want[0]).norm().max((got[1] - want[1]).norm());
    let crossed = (got[0] - want[1]).norm().max((got[1] - want[0]).norm());
    direct.min(crossed)
}

pub fn dc_motor_closed_form(h: f64) -> (DMatrix<f64>, DVector<f64>) {
    let em1 = (-h).exp_m1();
    let e = em1 + 1.0;
    let phi = DMatrix::from_row_slice(2, 2, &[e, 0.0, -em1, 1.0]);
    let gamma = DVector::from_vec(vec![-em1, h + em1]);
    (phi, gamma)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
