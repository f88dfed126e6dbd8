use super::param::Parameterized;

/// Compares analytic gradients against central differences.
///
/// `loss_fn` must compute the loss deterministically and accumulate analytic
/// gradients into the model's `grad` buffers. Gradients are zeroed before the
/// analytic pass and on exit. Returns the maximum over all coordinates of
/// `|g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8)`.
pub fn finite_diff_check<M, F>(model: &mut M, mut loss_fn: F, h: f64) -> f64
where
    M: Parameterized,
    F: FnMut(&mut M) -> f64,
{
    model.zero_grad();
    loss_fn(model);
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad.as_slice().to_vec())
        .collect();

    let mut worst = 0.0f64;
    let mut worst_at = (String::new(), 0usize);
    for (pi, grads) in analytic.iter().enumerate() {
        for (ci, &ga) in grads.iter().enumerate() {
            let original = model.params()[pi].value.as_slice()[ci];
            model.params_mut()[pi].value.as_mut_slice()[ci] = original + h;
            let plus = loss_fn(model);
            model.params_mut()[pi].value.as_mut_slice()[ci] = original - h;
            let minus = loss_fn(model);
            model.params_mut()[pi].value.as_mut_slice()[ci] = original;
            let fd = (plus - minus) / (2.0 * h);
            let err = (ga - fd).abs() / ga.abs().max(fd.abs()).max(1e-8);
            if err > worst {
                worst = err;
                worst_at = (model.params()[pi].name.clone(), ci);
            }
        }
    }
    model.zero_grad();
    log::debug!(
        "finite_diff_check: max relative error {worst:.3e} at {}[{}]",
        worst_at.0,
        worst_at.1
    );
    worst
}
