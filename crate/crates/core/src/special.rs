//! Scalar special functions not covered by the dependency set.

pub(crate) const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(z) = ∫_z^∞ e^{-t}/t dt` for `z > 0`.
pub fn exp_integral_e1(z: f64) -> f64 {
    if z <= 0.0 {
        return f64::INFINITY;
    }
    if z <= 1.0 {
        -EULER_GAMMA - z.ln() + ein_series(z)
    } else {
        // modified Lentz evaluation of the continued fraction
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

fn ein_series(z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..60 {
        term *= -z / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Entire function `Ein(z) = E1(z) + ln z + γ = Σ_{k≥1} (-1)^{k+1} z^k / (k k!)`.
pub fn ein(z: f64) -> f64 {
    if z < 1.0 {
        ein_series(z)
    } else {
        exp_integral_e1(z) + z.ln() + EULER_GAMMA
    }
}

/// `(1 - e^{-z}) / z`, continuous at zero.
pub(crate) fn one_minus_exp_over(z: f64) -> f64 {
    if z < 1e-8 {
        1.0 - 0.5 * z
    } else {
        -(-z).exp_m1() / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_reference_values() {
        // values from standard tables
        assert!((exp_integral_e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-14);
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-15);
        assert!((exp_integral_e1(2.0) - 0.048_900_510_708_061_12).abs() < 1e-15);
        assert!((exp_integral_e1(10.0) - 4.156_968_929_685_324e-6).abs() < 1e-19);
    }

    #[test]
    fn ein_is_continuous_at_switch() {
        let below = ein(1.0 - 1e-12);
        let above = ein(1.0 + 1e-12);
        assert!((below - above).abs() < 1e-11);
        assert!((ein(1e-3) - (1e-3 - 0.25e-6 + 1e-9 / 18.0)).abs() < 1e-13);
    }
}
