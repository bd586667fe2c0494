//! Central finite-difference verification of tape gradients.

use super::param::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(1, |numeric|)` over all coordinates.
    pub max_rel_error: f64,
    /// Parameter name and flat coordinate of the worst mismatch.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

fn eval<F>(f: &F, store: &ParamStore) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(Error::shape(format!(
            "gradient check needs a scalar function, got {:?}",
            v.shape()
        )));
    }
    let loss = v.data()[0];
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }
    Ok(loss)
}

/// Compares reverse-mode gradients of `f` against central differences for
/// every coordinate of every parameter that requires a gradient.
///
/// `f` must be deterministic. Parameter values are restored before returning.
pub fn check_gradients<F>(store: &mut ParamStore, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let grads = tape.backward(out)?;
    let mut analytic = store.clone();
    analytic.zero_grad();
    grads.accumulate_into(&tape, &mut analytic);

    let ids: Vec<ParamId> = store
        .iter()
        .filter(|(_, p)| p.requires_grad)
        .map(|(id, _)| id)
        .collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for id in ids {
        for i in 0..store.value(id).len() {
            let orig = store.value(id).data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + FD_STEP;
            let plus = eval(&f, store);
            store.get_mut(id).value.data_mut()[i] = orig - FD_STEP;
            let minus = eval(&f, store);
            store.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * FD_STEP);
            let a = analytic.get(id).grad.data()[i];
            let err = (a - numeric).abs() / numeric.abs().max(1.0);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((store.get(id).name.clone(), i));
            }
        }
    }
    Ok(report)
}
