use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::DesignError;
use crate::time::SimTime;

/// Single-input single-output plant `x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
}

impl PlantModel {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>) -> Result<Self, DesignError> {
        let n = a.nrows();
        if n == 0 {
            return Err(DesignError::BadModel(
                "state dimension must be at least 1".into(),
            ));
        }
        if a.ncols() != n {
            return Err(DesignError::BadModel(format!(
                "A must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        if b.len() != n || c.len() != n {
            return Err(DesignError::BadModel(format!(
                "B and C must have length {n}, got {} and {}",
                b.len(),
                c.len()
            )));
        }
        let finite = a
            .iter()
            .chain(b.iter())
            .chain(c.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(DesignError::BadModel("entries must be finite".into()));
        }
        Ok(PlantModel { a, b, c })
    }

    /// DC motor: velocity lag plus integrator, position measured.
    pub fn dc_motor() -> Self {
        PlantModel {
            a: DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, 0.0]),
            b: DVector::from_column_slice(&[1.0, 0.0]),
            c: RowDVector::from_row_slice(&[0.0, 1.0]),
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    pub fn output(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(&x.transpose())
    }
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm1 = (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);

    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.5 && squarings < 64 {
        squarings += 1;
        scale *= 0.5;
    }
    let scaled = m * scale;

    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=40 {
        term = (&term * &scaled) / k as f64;
        result += &term;
        if term.amax() <= f64::EPSILON * 1e-3 * result.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Zero-order-hold discretization over period `h` (seconds).
///
/// Both matrices come from one exponential of the augmented matrix
/// `[[A, B], [0, 0]] * h`.
pub fn discretize(model: &PlantModel, h: f64) -> Result<(DMatrix<f64>, DVector<f64>), DesignError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(DesignError::BadPeriod(h));
    }
    let n = model.order();
    let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(model.a() * h));
    aug.view_mut((0, n), (n, 1)).copy_from(&(model.b() * h));
    let e = expm(&aug);
    let phi = e.view((0, 0), (n, n)).into_owned();
    let gamma = e.view((0, n), (n, 1)).column(0).into_owned();
    if phi.iter().chain(gamma.iter()).any(|v| !v.is_finite()) {
        return Err(DesignError::NonFinite);
    }
    Ok((phi, gamma))
}

/// Exact ZOH state propagation with a per-interval cache of `(Phi, Gamma)`.
#[derive(Debug, Clone)]
pub struct ZohPropagator {
    model: PlantModel,
    cache: HashMap<u64, (DMatrix<f64>, DVector<f64>)>,
}

impl ZohPropagator {
    pub fn new(model: PlantModel) -> Self {
        ZohPropagator {
            model,
            cache: HashMap::new(),
        }
    }

    pub fn model(&self) -> &PlantModel {
        &self.model
    }

    /// Advances `x` by `dt` holding `u` constant.
    pub fn advance(
        &mut self,
        x: &DVector<f64>,
        u: f64,
        dt: SimTime,
    ) -> Result<DVector<f64>, DesignError> {
        if dt == SimTime::ZERO {
            return Ok(x.clone());
        }
        if !self.cache.contains_key(&dt.as_nanos()) {
            let pair = discretize(&self.model, dt.as_secs_f64())?;
            self.cache.insert(dt.as_nanos(), pair);
        }
        let (phi, gamma) = &self.cache[&dt.as_nanos()];
        let next = phi * x + gamma * u;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(DesignError::NonFinite);
        }
        Ok(next)
    }
}
