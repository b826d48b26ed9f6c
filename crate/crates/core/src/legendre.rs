//! Legendre polynomials on `[−1, 1]` and conversions to and from monomials.

/// Monomial coefficients of `P_0, …, P_n`: `out[k][i]` is the coefficient of `x^i` in `P_k`.
pub fn monomial_coeffs(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0]];
    if n == 0 {
        return out;
    }
    out.push(vec![0.0, 1.0]);
    for k in 1..n {
        let mut next = vec![0.0; k + 2];
        for (i, c) in out[k].iter().enumerate() {
            next[i + 1] += (2 * k + 1) as f64 * c;
        }
        for (i, c) in out[k - 1].iter().enumerate() {
            next[i] -= k as f64 * c;
        }
        for c in next.iter_mut() {
            *c /= (k + 1) as f64;
        }
        out.push(next);
    }
    out
}

/// Legendre coefficients of `x^0, …, x^n`: `out[i][k]` is the coefficient of `P_k` in `x^i`.
pub fn from_monomials(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0]];
    for i in 0..n {
        // x P_k = ((k+1) P_{k+1} + k P_{k−1}) / (2k+1)
        let prev = &out[i];
        let mut next = vec![0.0; i + 2];
        for (k, c) in prev.iter().enumerate() {
            let den = (2 * k + 1) as f64;
            next[k + 1] += c * (k + 1) as f64 / den;
            if k > 0 {
                next[k - 1] += c * k as f64 / den;
            }
        }
        out.push(next);
    }
    out
}

/// `P_0(x), …, P_n(x)` by the three-term recurrence.
pub fn eval_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 1..n {
        let v = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
        p.push(v);
    }
    p
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Newton on the recurrence).
pub fn gauss(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let p = eval_all(n, x);
            let (pn, pn1) = (p[n], p[n - 1]);
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
