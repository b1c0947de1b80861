//! Kantorovich-Rubinstein norm of a signed measure on a sorted support grid.
//!
//! Maximizes `sum phi_i d_i` over test vectors with `|phi_i| <= 1` and
//! `|phi_{i+1} - phi_i| <= x_{i+1} - x_i`. The feasible set is a chain of
//! interval constraints, so the linear program decomposes into a backward
//! sweep over exact concave piecewise-linear value functions: a
//! sliding-window maximum of a concave function is again concave and
//! piecewise linear, and adding the linear reward keeps it that way. The
//! optimum over grid-restricted test functions is a lower bound on the true
//! norm of the underlying measures.

/// Concave piecewise-linear function on [-1, 1] stored as breakpoints.
#[derive(Debug, Clone)]
struct ConcavePl {
    pts: Vec<(f64, f64)>,
}

impl ConcavePl {
    fn linear(slope: f64) -> Self {
        Self {
            pts: vec![(-1.0, -slope), (1.0, slope)],
        }
    }

    fn value_at(&self, x: f64) -> f64 {
        let pts = &self.pts;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            if x <= w[1].0 {
                let t = (x - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        pts.last().unwrap().1
    }

    fn peak(&self) -> (f64, f64) {
        self.pts
            .iter()
            .copied()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
    }

    /// Sliding-window maximum over `[x - delta, x + delta]`, restricted back
    /// to [-1, 1].
    fn window_max(&self, delta: f64) -> Self {
        let (px, py) = self.peak();
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(self.pts.len() + 2);
        // rising part shifted left: W(x) = V(x + delta) for x < px - delta
        for &(x, y) in &self.pts {
            if x >= px {
                break;
            }
            let nx = x - delta;
            if nx >= -1.0 && nx < px - delta {
                pts.push((nx, y));
            }
        }
        // plateau
        let plat_lo = (px - delta).max(-1.0);
        let plat_hi = (px + delta).min(1.0);
        pts.push((plat_lo, py));
        if plat_hi > plat_lo {
            pts.push((plat_hi, py));
        }
        // falling part shifted right
        for &(x, y) in &self.pts {
            if x <= px {
                continue;
            }
            let nx = x + delta;
            if nx > plat_hi && nx <= 1.0 {
                pts.push((nx, y));
            }
        }
        // pin the endpoints of the domain
        let left = self.value_at((-1.0f64 + delta).min(px).max(-1.0));
        let right = self.value_at((1.0f64 - delta).max(px).min(1.0));
        if pts.first().map_or(true, |p| p.0 > -1.0 + 1e-15) {
            pts.insert(0, (-1.0, left));
        }
        if pts.last().map_or(true, |p| p.0 < 1.0 - 1e-15) {
            pts.push((1.0, right));
        }
        pts.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-15 && (a.1 - b.1).abs() <= 1e-15);
        Self { pts }
    }

    fn add_linear(&mut self, slope: f64) {
        for (x, y) in self.pts.iter_mut() {
            *y += slope * *x;
        }
    }
}

/// Exact optimum of the grid Kantorovich-Rubinstein program.
pub(crate) fn kr_optimum(support: &[f64], diff: &[f64]) -> f64 {
    let m = support.len();
    assert_eq!(m, diff.len());
    assert!(m >= 1);
    if m == 1 {
        return diff[0].abs();
    }
    let mut v = ConcavePl::linear(diff[m - 1]);
    for i in (0..m - 1).rev() {
        let delta = support[i + 1] - support[i];
        let mut w = v.window_max(delta);
        w.add_linear(diff[i]);
        v = w;
    }
    v.peak().1
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: dynamic programming over a quantized phi grid.
    fn kr_grid_oracle(support: &[f64], diff: &[f64], res: usize) -> f64 {
        let m = support.len();
        let grid: Vec<f64> = (0..=res)
            .map(|q| -1.0 + 2.0 * q as f64 / res as f64)
            .collect();
        let mut v: Vec<f64> = grid.iter().map(|&phi| phi * diff[m - 1]).collect();
        for i in (0..m - 1).rev() {
            let delta = support[i + 1] - support[i];
            let steps = ((delta / 2.0) * res as f64).floor() as usize;
            let mut next = vec![f64::NEG_INFINITY; grid.len()];
            for (q, &phi) in grid.iter().enumerate() {
                let lo = q.saturating_sub(steps);
                let hi = (q + steps).min(res);
                let mut best = f64::NEG_INFINITY;
                for item in v.iter().take(hi + 1).skip(lo) {
                    best = best.max(*item);
                }
                next[q] = phi * diff[i] + best;
            }
            v = next;
        }
        v.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn two_point_masses() {
        // masses at 0 and h: KR = min(h, 2)
        for (h, want) in [(0.5, 0.5), (5.0, 2.0), (2.0, 2.0), (0.01, 0.01)] {
            let got = kr_optimum(&[0.0, h], &[1.0, -1.0]);
            assert!((got - want).abs() < 1e-12, "h={h}: {got} vs {want}");
        }
    }

    #[test]
    fn zero_difference_is_zero() {
        let got = kr_optimum(&[0.0, 0.3, 1.0], &[0.0, 0.0, 0.0]);
        assert_eq!(got, 0.0);
    }

    #[test]
    fn matches_quantized_dp_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for trial in 0..30 {
            let m = rng.gen_range(2..=6);
            let mut support = vec![0.0];
            for _ in 1..m {
                support.push(support.last().unwrap() + rng.gen_range(0.05..1.2));
            }
            let mut diff: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect();
            // make it a difference of probability vectors
            let s: f64 = diff.iter().sum();
            for d in diff.iter_mut() {
                *d -= s / m as f64;
            }
            let exact = kr_optimum(&support, &diff);
            let approx = kr_grid_oracle(&support, &diff, 2000);
            assert!(
                (exact - approx).abs() < 4e-3,
                "trial {trial}: {exact} vs {approx}"
            );
            assert!(exact >= approx - 1e-9, "grid restriction can only lose");
        }
    }

    #[test]
    fn bounded_by_two_and_w1() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let m = rng.gen_range(2..=40);
            let mut support = vec![0.0];
            for _ in 1..m {
                support.push(support.last().unwrap() + rng.gen_range(0.01..0.5));
            }
            let mut w1: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let mut w2: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let (s1, s2): (f64, f64) = (w1.iter().sum(), w2.iter().sum());
            for w in w1.iter_mut() {
                *w /= s1;
            }
            for w in w2.iter_mut() {
                *w /= s2;
            }
            let diff: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a - b).collect();
            let kr = kr_optimum(&support, &diff);
            // W1 = integral of |F1 - F2|
            let mut w1d = 0.0;
            let mut cum = 0.0;
            for i in 0..m - 1 {
                cum += diff[i];
                w1d += cum.abs() * (support[i + 1] - support[i]);
            }
            assert!(kr <= 2.0 + 1e-12);
            assert!(kr <= w1d + 1e-9, "kr {kr} w1 {w1d}");
        }
    }
}
