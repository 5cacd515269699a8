use nalgebra::{Complex, DMatrix, DVector, RowDVector};

use super::model::{discretize, PlantModel};
use crate::error::DesignError;

pub type Pole = Complex<f64>;

const POLE_TOL: f64 = 1e-9;
const CONTROLLABILITY_TOL: f64 = 1e-10;

/// Discrete state-feedback controller `u = -K x + Nff r` designed for one
/// sampling period.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub k: RowDVector<f64>,
    pub nff: f64,
    /// Design period in seconds.
    pub h: f64,
    pub phi: DMatrix<f64>,
    pub gamma: DVector<f64>,
}

/// Eigenvalues of a 2x2 matrix from its trace and determinant.
pub fn closed_loop_poles(m: &DMatrix<f64>) -> [Pole; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let half = tr / 2.0;
    let disc = half * half - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [Pole::new(half + s, 0.0), Pole::new(half - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Pole::new(half, s), Pole::new(half, -s)]
    }
}

fn pole_mismatch(found: &[Pole; 2], desired: &[Pole; 2]) -> f64 {
    let straight = (found[0] - desired[0])
        .norm()
        .max((found[1] - desired[1]).norm());
    let crossed = (found[0] - desired[1])
        .norm()
        .max((found[1] - desired[0]).norm());
    straight.min(crossed)
}

/// Monic characteristic polynomial `z^2 + a1 z + a0` with the given roots.
fn char_poly(poles: &[Pole; 2]) -> Result<(f64, f64), DesignError> {
    let sum = poles[0] + poles[1];
    let prod = poles[0] * poles[1];
    let both_real = poles[0].im.abs() <= 1e-12 && poles[1].im.abs() <= 1e-12;
    let conjugate = (poles[0] - poles[1].conj()).norm() <= 1e-12;
    if !(both_real || conjugate) {
        return Err(DesignError::NonConjugatePoles);
    }
    Ok((-sum.re, prod.re))
}

/// Ackermann pole placement for a second-order discrete pair.
pub fn place_gains(
    phi: &DMatrix<f64>,
    gamma: &DVector<f64>,
    poles: [Pole; 2],
) -> Result<RowDVector<f64>, DesignError> {
    let n = phi.nrows();
    if n != 2 || phi.ncols() != 2 || gamma.len() != 2 {
        return Err(DesignError::UnsupportedOrder(n));
    }
    let (a1, a0) = char_poly(&poles)?;

    let phi_gamma = phi * gamma;
    let wc = DMatrix::from_columns(&[gamma.clone(), phi_gamma]);
    let sv = wc.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio.is_nan() || ratio < CONTROLLABILITY_TOL {
        return Err(DesignError::Uncontrollable { ratio });
    }
    let wc_inv = wc
        .try_inverse()
        .ok_or(DesignError::Uncontrollable { ratio })?;

    let pc = phi * phi + phi * a1 + DMatrix::<f64>::identity(2, 2) * a0;
    let last_row = RowDVector::from_row_slice(&[0.0, 1.0]);
    let k = last_row * wc_inv * pc;
    if k.iter().any(|v| !v.is_finite()) {
        return Err(DesignError::NonFinite);
    }

    let closed = phi - gamma * &k;
    let found = closed_loop_poles(&closed);
    let miss = pole_mismatch(&found, &poles);
    if miss > POLE_TOL {
        // Repeated poles are ill-conditioned as roots; accept if the
        // characteristic polynomial itself matches.
        let tr = closed[(0, 0)] + closed[(1, 1)];
        let det = closed.determinant();
        let coeff_err = (tr + a1).abs().max((det - a0).abs());
        if coeff_err > 1e-12 {
            return Err(DesignError::PlacementCheck(miss));
        }
    }
    Ok(k)
}

/// Static feedforward gain giving unit DC gain from reference to output.
pub fn feedforward_gain(
    phi: &DMatrix<f64>,
    gamma: &DVector<f64>,
    k: &RowDVector<f64>,
    c: &RowDVector<f64>,
) -> Result<f64, DesignError> {
    let n = phi.nrows();
    let m = DMatrix::<f64>::identity(n, n) - phi + gamma * k;
    let inv = m
        .try_inverse()
        .ok_or(DesignError::NoTracking("I - Phi + Gamma K is singular"))?;
    let dc = (c * inv * gamma)[0];
    if !dc.is_finite() || dc.abs() < 1e-14 {
        return Err(DesignError::NoTracking("zero closed-loop DC gain"));
    }
    Ok(1.0 / dc)
}

/// Full design at period `h`: discretize, place poles, compute feedforward.
/// A pure function of its inputs.
pub fn design_controller(
    model: &PlantModel,
    poles: [Pole; 2],
    h: f64,
) -> Result<ControllerGains, DesignError> {
    let (phi, gamma) = discretize(model, h)?;
    let k = place_gains(&phi, &gamma, poles)?;
    let nff = feedforward_gain(&phi, &gamma, &k, model.c())?;
    Ok(ControllerGains {
        k,
        nff,
        h,
        phi,
        gamma,
    })
}

pub fn control_output(gains: &ControllerGains, x: &DVector<f64>, r: f64) -> f64 {
    -gains.k.dot(&x.transpose()) + gains.nff * r
}
