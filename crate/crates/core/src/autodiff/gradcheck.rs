use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Deviations at or below this are treated as exact agreement.
pub const ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub analytic: Tensor,
    pub numeric: Tensor,
    /// Largest relative deviation after subtracting [`ABS_FLOOR`].
    pub max_rel_deviation: f64,
    /// `(row, col)` of the worst element.
    pub worst: (usize, usize),
    pub tol: f64,
    pub passed: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (i, j) = self.worst;
        write!(
            f,
            "{} max rel deviation {:.3e} at ({i}, {j}): analytic {:.6e} numeric {:.6e} (tol {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.max_rel_deviation,
            self.analytic[(i, j)],
            self.numeric[(i, j)],
            self.tol
        )
    }
}

/// Relative deviation of one gradient entry, zero when within the absolute floor.
pub fn relative_deviation(analytic: f64, numeric: f64) -> f64 {
    let excess = (analytic - numeric).abs() - ABS_FLOOR;
    if excess <= 0.0 {
        0.0
    } else {
        excess / analytic.abs().max(numeric.abs())
    }
}

/// Compares the reverse-mode gradient of a scalar function against central
/// differences with step `h`.
///
/// `f` receives a fresh tape and the input registered as a parameter, and
/// must return a scalar.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let eval = |input: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.param(input.clone());
        let out = f(&mut tape, v)?;
        let value = tape.value(out).item();
        if !value.is_finite() {
            return Err(Error::NonFinite { row: 0, col: 0 });
        }
        Ok(value)
    };

    let mut tape = Tape::new();
    let v = tape.param(x.clone());
    let out = f(&mut tape, v)?;
    tape.value(out).ensure_finite()?;
    let analytic = tape
        .backward(out)?
        .get_or_zeros(v, x.rows(), x.cols());

    let mut numeric = Tensor::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let orig = probe.data()[idx];
        probe.data_mut()[idx] = orig + h;
        let plus = eval(&probe)?;
        probe.data_mut()[idx] = orig - h;
        let minus = eval(&probe)?;
        probe.data_mut()[idx] = orig;
        numeric.data_mut()[idx] = (plus - minus) / (2.0 * h);
    }

    let mut worst = (0, 0);
    let mut max_rel = 0.0;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let rel = relative_deviation(analytic[(i, j)], numeric[(i, j)]);
            if rel > max_rel {
                max_rel = rel;
                worst = (i, j);
            }
        }
    }
    Ok(GradCheckReport {
        analytic,
        numeric,
        max_rel_deviation: max_rel,
        worst,
        tol,
        passed: max_rel <= tol,
    })
}
