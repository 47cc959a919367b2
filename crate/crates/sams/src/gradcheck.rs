//! Finite-difference verification of reverse-mode gradients.

use crate::graph::GradMap;
use crate::optim::{ParamId, ParamStore};

/// Compare analytic gradients against central differences.
///
/// `f` must be deterministic: it evaluates the loss (and its gradients)
/// at the store's current values. Returns the maximum over all checked
/// scalars of `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// The caller is responsible for keeping inputs away from hinge kinks
/// (non-differentiable points); see the objective module's helpers.
pub fn finite_diff_check<F>(
    store: &mut ParamStore,
    ids: &[ParamId],
    mut f: F,
    h: f64,
) -> f64
where
    F: FnMut(&ParamStore) -> (f64, GradMap),
{
    assert!(h > 0.0);
    let (_, analytic) = f(store);
    let mut max_rel: f64 = 0.0;
    for &id in ids {
        let n = store.value(id).len();
        for k in 0..n {
            let orig = store.value(id).data()[k];
            store.slot_mut(id).value.data_mut()[k] = orig + h;
            let (lp, _) = f(store);
            store.slot_mut(id).value.data_mut()[k] = orig - h;
            let (lm, _) = f(store);
            store.slot_mut(id).value.data_mut()[k] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let ana = analytic.get(id).map(|g| g.data()[k]).unwrap_or(0.0);
            let rel = (ana - numeric).abs() / ana.abs().max(numeric.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}
