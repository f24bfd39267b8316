//! Exponential integral on the negative axis.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 6.0;

/// Power series `Ei(x) = gamma + ln|x| + sum x^n / (n n!)`, for `x < 0`.
fn ei_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..200 {
        term *= x / n as f64;
        let add = term / n as f64;
        sum += add;
        if add.abs() <= f64::EPSILON * 0.25 * sum.abs() {
            break;
        }
    }
    EULER_GAMMA + (-x).ln() + sum
}

/// `e^z E1(z)` by the modified Lentz continued fraction, for `z > 1`.
fn scaled_e1_cf(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() <= f64::EPSILON {
            break;
        }
    }
    h
}

/// `Ei(x) = ∫_{-∞}^{x} e^t / t dt` for `x < 0`.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(Error::Domain {
            function: "Ei",
            value: x,
        });
    }
    if -x <= SERIES_LIMIT {
        Ok(ei_series(x))
    } else {
        Ok(-(x.exp()) * scaled_e1_cf(-x))
    }
}

/// `e^z E1(z) = -e^z Ei(-z)` for `z > 0`, without overflow for large `z`.
pub fn scaled_e1(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    if z <= SERIES_LIMIT {
        -z.exp() * ei_series(-z)
    } else {
        scaled_e1_cf(z)
    }
}
