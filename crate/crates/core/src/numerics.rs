//! Clamped hyperbolic kernels shared by every message-passing routine.
//!
//! Fields live in the "half log-ratio" domain: a belief proportional to
//! `exp(eta * x)` over `x in {-1, +1}` has field `eta`, i.e.
//! `eta = 0.5 * ln(P(+1) / P(-1))`.

/// tanh values are kept inside `(-1 + EPS, 1 - EPS)`.
pub const EPS: f64 = 1e-12;

#[inline]
pub fn clamp_unit(t: f64) -> f64 {
    t.clamp(-1.0 + EPS, 1.0 - EPS)
}

#[inline]
pub fn tanh_clamped(x: f64) -> f64 {
    clamp_unit(x.tanh())
}

#[inline]
pub fn atanh_clamped(t: f64) -> f64 {
    // std's atanh is not exactly odd; evaluate on |t| so that negating every
    // input negates every message bit for bit
    let t = clamp_unit(t);
    t.abs().atanh().copysign(t)
}

/// Writes `prod_{j != k} t_j` into `out[k]` using prefix/suffix products.
pub fn leave_one_out_products(t: &[f64], out: &mut [f64]) {
    debug_assert_eq!(t.len(), out.len());
    let mut acc = 1.0;
    for (o, &v) in out.iter_mut().zip(t) {
        *o = acc;
        acc *= v;
    }
    let mut acc = 1.0;
    for (o, &v) in out.iter_mut().zip(t).rev() {
        *o *= acc;
        acc *= v;
    }
}

/// `P(x = +1)` for a field.
#[inline]
pub fn prob_plus(eta: f64) -> f64 {
    0.5 * (1.0 + eta.tanh())
}

/// `ln(exp(a) + exp(b))`
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamping_keeps_atanh_finite() {
        assert!(atanh_clamped(1.0).is_finite());
        assert!(atanh_clamped(-1.0).is_finite());
        assert!(tanh_clamped(100.0) < 1.0);
        assert_eq!(atanh_clamped(0.0), 0.0);
    }

    #[test]
    fn clamped_pair_is_odd() {
        for k in 1..2000 {
            let x = k as f64 * 0.004_321;
            assert_eq!(tanh_clamped(-x), -tanh_clamped(x));
            let t = (k as f64 / 2000.0) * 0.999_9;
            assert_eq!(atanh_clamped(-t), -atanh_clamped(t));
        }
    }

    #[test]
    fn leave_one_out() {
        let mut out = [0.0; 4];
        leave_one_out_products(&[0.5, 0.8, -0.25, 2.0], &mut out);
        assert_eq!(out, [0.8 * -0.25 * 2.0, 0.5 * -0.25 * 2.0, 0.5 * 0.8 * 2.0, 0.5 * 0.8 * -0.25]);
        let mut one = [0.0];
        leave_one_out_products(&[0.3], &mut one);
        assert_eq!(one, [1.0]);
    }

    #[test]
    fn log_add_matches_direct() {
        let v = log_add(0.3, -1.2);
        assert!((v - (0.3f64.exp() + (-1.2f64).exp()).ln()).abs() < 1e-15);
        assert_eq!(log_add(f64::NEG_INFINITY, 2.0), 2.0);
    }
}
