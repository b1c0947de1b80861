//! Norm of the leading symmetric form.
//!
//! For symmetric forms the supremum over unit arguments is attained on the
//! diagonal, so the degree >= 3 estimate ascends `|B(x, ..., x)|` on the unit
//! sphere. Degree one is a Euclidean norm, degree two the spectral norm of
//! the coefficient matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Error, SymmetricForm};

#[derive(Debug, Clone, Copy)]
pub struct NormOptions {
    /// Random restarts of the projected ascent (degree >= 3).
    pub restarts: usize,
    /// Seed for restart points; fixed by default so results are reproducible.
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            restarts: crate::tol::NORM_RESTARTS,
            seed: 0x5EED_0001,
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

/// Estimated norm. `exact` distinguishes the closed-form/spectral paths from
/// the ascent lower bound; `dispersion` is the spread of restart outcomes.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    pub dispersion: f64,
    pub exact: bool,
}

pub(super) fn leading_form_norm(
    form: &SymmetricForm,
    opts: &NormOptions,
) -> Result<NormEstimate, Error> {
    if form.is_zero() {
        return Err(Error::ZeroLeadingForm);
    }
    match form.degree() {
        0 => Ok(NormEstimate {
            value: form.diag(&[]).abs(),
            dispersion: 0.0,
            exact: true,
        }),
        1 => {
            let mut sq = 0.0;
            for (idx, &v) in form.entries() {
                let _ = idx;
                sq += v * v;
            }
            Ok(NormEstimate {
                value: sq.sqrt(),
                dispersion: 0.0,
                exact: true,
            })
        }
        2 => Ok(spectral_norm(form, opts)),
        _ => Ok(sphere_ascent(form, opts)),
    }
}

/// Spectral norm of the symmetric coefficient matrix by power iteration on
/// M^2 (always convergent), deflating once to gauge the spectral gap.
fn spectral_norm(form: &SymmetricForm, opts: &NormOptions) -> NormEstimate {
    let n = form.dim();
    let mut m = vec![vec![0.0; n]; n];
    for (idx, &v) in form.entries() {
        let (i, j) = (idx[0] as usize, idx[1] as usize);
        m[i][j] = v;
        if i != j {
            m[j][i] = v;
        }
    }
    let matvec = |v: &[f64]| -> Vec<f64> {
        m.iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut run = |deflate: Option<(&[f64], f64)>| -> (f64, Vec<f64>) {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..opts.max_iter.max(10) {
            let mut w = matvec(&matvec(&v));
            if let Some((u, lam)) = deflate {
                let coef: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= lam * coef * ui;
                }
            }
            let next = dot(&w, &v);
            let norm = normalize(&mut w);
            if norm == 0.0 {
                return (0.0, v);
            }
            v = w;
            if (next - lambda).abs() <= opts.tol * (1.0 + next.abs()) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        (lambda.max(0.0), v)
    };
    let (l1, v1) = run(None);
    // one deflated run guards against a degenerate start vector
    let (l2, _) = run(Some((&v1, l1)));
    let value = l1.max(l2).sqrt();
    NormEstimate {
        value,
        dispersion: 0.0,
        exact: true,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Projected-gradient ascent of |B(x, ..., x)| on the unit sphere with
/// seeded restarts; the result is a certified lower bound on the norm (by
/// symmetry the supremum lives on the diagonal).
fn sphere_ascent(form: &SymmetricForm, opts: &NormOptions) -> NormEstimate {
    let n = form.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = 0.0f64;
    let mut worst = f64::INFINITY;

    // cheap probe sweep seeds the ascent with a decent starting region
    let mut probes: Vec<Vec<f64>> = Vec::new();
    for _ in 0..256 {
        let mut x: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        if normalize(&mut x) > 0.0 {
            probes.push(x);
        }
    }
    probes.sort_by(|a, b| {
        form.diag(b)
            .abs()
            .partial_cmp(&form.diag(a).abs())
            .unwrap()
    });

    for r in 0..opts.restarts.max(1) {
        let mut x: Vec<f64> = if r < probes.len().min(8) {
            probes[r].clone()
        } else {
            let mut x: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
            if normalize(&mut x) == 0.0 {
                x = vec![0.0; n];
                x[0] = 1.0;
            }
            x
        };
        let mut val = form.diag(&x);
        for _ in 0..opts.max_iter {
            let sign = if val >= 0.0 { 1.0 } else { -1.0 };
            let mut g = form.diag_grad(&x);
            for gi in g.iter_mut() {
                *gi *= sign;
            }
            let radial = dot(&g, &x);
            let mut dir: Vec<f64> = g.iter().zip(&x).map(|(gi, xi)| gi - radial * xi).collect();
            let dn = dot(&dir, &dir).sqrt();
            if dn <= opts.tol * (1.0 + radial.abs()) {
                break;
            }
            for d in dir.iter_mut() {
                *d /= dn;
            }
            let mut step = 0.5;
            let mut advanced = false;
            while step > 1e-14 {
                let mut cand: Vec<f64> =
                    x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
                normalize(&mut cand);
                let cval = form.diag(&cand);
                if cval.abs() > val.abs() + 1e-16 {
                    x = cand;
                    val = cval;
                    advanced = true;
                    break;
                }
                step *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        best = best.max(val.abs());
        worst = worst.min(val.abs());
    }
    // never report less than a plain probe value
    for p in probes.iter().take(32) {
        best = best.max(form.diag(p).abs());
    }
    NormEstimate {
        value: best,
        dispersion: if worst.is_finite() { best - worst } else { 0.0 },
        exact: false,
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilinear::SymmetricPolynomial;

    fn norm_of(p: &SymmetricPolynomial) -> NormEstimate {
        p.leading_form_norm(&NormOptions::default()).unwrap()
    }

    #[test]
    fn linear_norm_is_euclidean() {
        let p =
            SymmetricPolynomial::from_monomials(2, &[(vec![1, 0], 3.0), (vec![0, 1], 4.0)])
                .unwrap();
        let e = norm_of(&p);
        assert!(e.exact);
        assert!((e.value - 5.0).abs() < 1e-14);
    }

    #[test]
    fn identity_quadratic_norm() {
        let p = SymmetricPolynomial::from_monomials(
            3,
            &[
                (vec![2, 0, 0], 1.0),
                (vec![0, 2, 0], 1.0),
                (vec![0, 0, 2], 1.0),
            ],
        )
        .unwrap();
        let e = norm_of(&p);
        assert!(e.exact);
        assert!((e.value - 1.0).abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn indefinite_quadratic_uses_largest_magnitude() {
        // diag(1, -3): spectral norm 3
        let p = SymmetricPolynomial::from_monomials(
            2,
            &[(vec![2, 0], 1.0), (vec![0, 2], -3.0)],
        )
        .unwrap();
        let e = norm_of(&p);
        assert!((e.value - 3.0).abs() < 1e-8, "{}", e.value);
    }

    #[test]
    fn cubic_diagonal_norm_matches_grid_oracle() {
        // B(x,x,x) = x1^3 on R^2: norm 1
        let p = SymmetricPolynomial::from_monomials(2, &[(vec![3, 0], 1.0)]).unwrap();
        let e = norm_of(&p);
        // dense angular grid oracle
        let mut grid_best = 0.0f64;
        for k in 0..10_000 {
            let th = 2.0 * std::f64::consts::PI * k as f64 / 10_000.0;
            let x = [th.cos(), th.sin()];
            grid_best = grid_best.max(p.leading_form().diag(&x).abs());
        }
        assert!(e.value >= grid_best - 1e-9);
        assert!((e.value - 1.0).abs() < 1e-8, "{}", e.value);
    }

    #[test]
    fn ascent_value_dominates_probes_and_scales_linearly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let p = SymmetricPolynomial::from_monomials(
            3,
            &[
                (vec![3, 0, 0], 0.3),
                (vec![1, 2, 0], -0.8),
                (vec![1, 1, 1], 0.5),
                (vec![0, 0, 3], 0.2),
            ],
        )
        .unwrap();
        let e = norm_of(&p);
        for _ in 0..200 {
            let mut x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < 1e-9 {
                continue;
            }
            for v in x.iter_mut() {
                *v /= n;
            }
            assert!(e.value >= p.leading_form().diag(&x).abs() - 1e-9);
        }
        // |c| homogeneity
        let scaled = SymmetricPolynomial::from_monomials(
            3,
            &[
                (vec![3, 0, 0], -0.3 * 2.5),
                (vec![1, 2, 0], 0.8 * 2.5),
                (vec![1, 1, 1], -0.5 * 2.5),
                (vec![0, 0, 3], -0.2 * 2.5),
            ],
        )
        .unwrap();
        let e2 = norm_of(&scaled);
        assert!((e2.value - 2.5 * e.value).abs() < 1e-9 * (1.0 + e.value));
    }
}
