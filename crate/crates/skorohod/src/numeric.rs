//! Shared numeric kernels: dense polynomial helpers, Gauss-Legendre rules,
//! Chebyshev interpolation, bracketed root refinement and a few closed-form
//! special values.
//!
//! Dense polynomials are coefficient slices in ascending powers of a local
//! variable; callers keep track of the expansion centre.

/// Evaluate `c[0] + c[1] u + ...` by Horner's rule.
pub fn poly_eval(coeffs: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * u + c;
    }
    acc
}

/// Coefficients of the derivative.
pub fn poly_deriv(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.len() <= 1 {
        return Vec::new();
    }
    coeffs[1..]
        .iter()
        .enumerate()
        .map(|(k, &c)| c * (k + 1) as f64)
        .collect()
}

/// Coefficients of the antiderivative with zero constant term.
pub fn poly_antideriv(coeffs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    out.push(0.0);
    for (k, &c) in coeffs.iter().enumerate() {
        out.push(c / (k + 1) as f64);
    }
    out
}

/// Re-centre: returns the coefficients of `p(u + delta)`.
///
/// Synthetic (Horner-style) shift; exact up to rounding for the degrees used
/// here.
pub fn poly_shift(coeffs: &[f64], delta: f64) -> Vec<f64> {
    let n = coeffs.len();
    if n == 0 || delta == 0.0 {
        return coeffs.to_vec();
    }
    let mut out = coeffs.to_vec();
    // Repeated division by (u - (-delta)).
    for i in 0..n.saturating_sub(1) {
        for j in (i..n - 1).rev() {
            let (hi, lo) = (out[j + 1], out[j]);
            out[j] = lo + delta * hi;
        }
    }
    out
}

/// Multiply two dense polynomials.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Drop trailing coefficients that are negligible relative to the largest one.
pub fn poly_trim(coeffs: &mut Vec<f64>, rel_tol: f64) {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        coeffs.clear();
        return;
    }
    while let Some(&last) = coeffs.last() {
        if last.abs() <= rel_tol * scale {
            coeffs.pop();
        } else {
            break;
        }
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on (-1, 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate `f` over [a, b] with a single n-point Gauss-Legendre rule.
pub fn gl_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive Gauss-Legendre quadrature. Returns (value, error estimate).
pub fn adaptive_gl<F: FnMut(f64) -> f64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
) -> (f64, f64) {
    fn recurse<F: FnMut(f64) -> f64 + Copy>(
        f: F,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
        coarse: f64,
    ) -> (f64, f64) {
        let mid = 0.5 * (a + b);
        let left = gl_integrate(f, a, mid, 8);
        let right = gl_integrate(f, mid, b, 8);
        let fine = left + right;
        let err = (fine - coarse).abs();
        if err <= tol || depth == 0 {
            return (fine, err);
        }
        let (lv, le) = recurse(f, a, mid, tol * 0.5, depth - 1, left);
        let (rv, re) = recurse(f, mid, b, tol * 0.5, depth - 1, right);
        (lv + rv, le + re)
    }
    let coarse = gl_integrate(f, a, b, 8);
    recurse(f, a, b, tol, max_depth, coarse)
}

/// Interpolate a function sampled at `npts` Chebyshev nodes on [a, b] and
/// return monomial coefficients about the interval midpoint.
///
/// Intended for data that is exactly polynomial of degree < npts; the
/// Chebyshev-Newton path keeps the conversion well conditioned through
/// degree ~20.
pub fn cheb_interpolate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, npts: usize) -> Vec<f64> {
    assert!(npts >= 1);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let n = npts;
    let mut us = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        let theta = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / (2.0 * n as f64);
        let u = half * theta.cos();
        us.push(u);
        vals.push(f(mid + u));
    }
    // Newton divided differences on the centred nodes.
    let mut dd = vals;
    for j in 1..n {
        for i in (j..n).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (us[i] - us[i - j]);
        }
    }
    // Expand the Newton form into monomial coefficients about the midpoint:
    // coeffs <- coeffs * (u - us[i]) + dd[i], folding from the highest term.
    let mut coeffs = vec![0.0; n];
    for i in (0..n).rev() {
        for k in (1..n).rev() {
            coeffs[k] = coeffs[k - 1] - us[i] * coeffs[k];
        }
        coeffs[0] = dd[i] - us[i] * coeffs[0];
    }
    coeffs
}

/// Bracketed Newton refinement: `f` must change sign on [lo, hi].
pub fn newton_bisect<F, G>(mut f: F, mut df: G, lo: f64, hi: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
    G: FnMut(f64) -> f64,
{
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(fa * fb <= 0.0, "newton_bisect requires a sign change");
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fa * fx < 0.0 {
            b = x;
        } else {
            a = x;
            fa = fx;
        }
        let d = df(x);
        let mut next = if d != 0.0 { x - fx / d } else { f64::NAN };
        if !next.is_finite() || next <= a || next >= b {
            next = 0.5 * (a + b);
        }
        let step = (next - x).abs();
        x = next;
        if step <= tol * (1.0 + x.abs()) || (b - a) <= tol * (1.0 + x.abs()) {
            return x;
        }
    }
    x
}

/// Gamma function at integer or half-integer arguments.
pub fn gamma_half(x: f64) -> f64 {
    let two_x = (2.0 * x).round();
    assert!(
        (2.0 * x - two_x).abs() < 1e-9 && two_x >= 1.0,
        "gamma_half wants positive multiples of 1/2"
    );
    let mut n = two_x as i64;
    let mut acc = 1.0;
    while n > 2 {
        acc *= (n - 2) as f64 / 2.0;
        n -= 2;
    }
    if n == 1 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc
    }
}

/// SplitMix64 step, used to derive independent substream seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed for substream `idx` of a base seed.
pub fn substream_seed(seed: u64, idx: u64) -> u64 {
    splitmix64(seed ^ splitmix64(idx.wrapping_add(1)))
}
