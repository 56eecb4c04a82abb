//! Central finite-difference verification of analytic gradients.

use super::ParamStore;
use crate::{Error, Result};

/// Compare the analytic gradient of `f` against central finite differences
/// with step `eps`, returning the maximum relative error
/// `|g_fd - g_ad| / max(1e-8, |g_fd| + |g_ad|)` over all parameters.
///
/// `f` evaluates the loss and its full flat gradient at the given parameters;
/// it must be deterministic (fixed seeds) for the differences to be
/// meaningful.
pub fn grad_check<F>(f: F, params: &mut ParamStore, eps: f64) -> Result<f64>
where
    F: Fn(&ParamStore) -> Result<(f64, Vec<f64>)>,
{
    let (loss0, analytic) = f(params)?;
    if !loss0.is_finite() {
        return Err(Error::NonFinite {
            context: "grad_check loss".to_string(),
        });
    }
    if analytic.len() != params.n_flat() {
        return Err(Error::ShapeMismatch {
            op: "grad_check",
            lhs: format!("{} gradient entries", analytic.len()),
            rhs: format!("{} parameters", params.n_flat()),
        });
    }
    let mut max_rel = 0.0f64;
    for i in 0..params.n_flat() {
        let original = params.get_flat(i);
        params.set_flat(i, original + eps);
        let (plus, _) = f(params)?;
        params.set_flat(i, original - eps);
        let (minus, _) = f(params)?;
        params.set_flat(i, original);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                context: format!("grad_check perturbed loss at parameter {i}"),
            });
        }
        let fd = (plus - minus) / (2.0 * eps);
        let rel = (fd - analytic[i]).abs() / (fd.abs() + analytic[i].abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}
