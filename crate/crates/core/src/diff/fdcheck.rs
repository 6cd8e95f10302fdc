use super::{DiffError, Tape, Var};

/// Outcome of comparing taped gradients with central differences.
#[derive(Debug, Clone)]
pub struct FdReport {
    /// `max_i |g_ad - g_fd| / max(1, |g_fd|)`.
    pub max_rel_error: f64,
    /// Coordinate attaining `max_rel_error`.
    pub worst: usize,
    pub tape_gradient: Vec<f64>,
    pub fd_gradient: Vec<f64>,
    /// The taped evaluation went through a deliberately biased derivative
    /// rule, so a mismatch with finite differences is expected.
    pub intentional_bias: bool,
}

/// Compares the reverse-mode gradient of `f` at `x` against central
/// differences with step `h`.
///
/// `f` is evaluated once on a tape and `2 * x.len()` times on constants.
/// The caller keeps `x` away from kinks.
pub fn finite_difference_check<F>(f: F, x: &[f64], h: f64) -> Result<FdReport, DiffError>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars = tape.vars(x);
    let out = f(&vars);
    if !out.value().is_finite() {
        return Err(DiffError::NonFinite { coordinate: None });
    }
    let grads = tape.backward(out)?;
    let tape_gradient = grads.wrt(&vars);
    let intentional_bias = tape.biased_nodes() > 0;

    let eval = |p: &[f64]| -> f64 {
        let c: Vec<Var<'_>> = p.iter().map(|&v| Var::constant(v)).collect();
        f(&c).value()
    };
    let mut fd_gradient = Vec::with_capacity(x.len());
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let fp = eval(&p);
        p[i] = x[i] - h;
        let fm = eval(&p);
        p[i] = x[i];
        let g = (fp - fm) / (2.0 * h);
        if !g.is_finite() || !tape_gradient[i].is_finite() {
            return Err(DiffError::NonFinite { coordinate: Some(i) });
        }
        fd_gradient.push(g);
    }

    let mut max_rel_error = 0.0;
    let mut worst = 0;
    for (i, (a, b)) in tape_gradient.iter().zip(&fd_gradient).enumerate() {
        let e = (a - b).abs() / b.abs().max(1.0);
        if e > max_rel_error {
            max_rel_error = e;
            worst = i;
        }
    }
    Ok(FdReport { max_rel_error, worst, tape_gradient, fd_gradient, intentional_bias })
}
