/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn sigmoid_slice(xs: &mut [f64]) {
    xs.iter_mut().for_each(|x| *x = sigmoid(*x));
}

pub fn tanh_slice(xs: &mut [f64]) {
    xs.iter_mut().for_each(|x| *x = x.tanh());
}
