//! Gauss–Legendre rules on `[-1, 1]` and their tensor products.

use std::f64::consts::PI;

/// An `n`-point Gauss–Legendre rule, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Tricomi initial guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|t| mid + half * t).collect();
        let w = self.weights.iter().map(|w| half * w).collect();
        (x, w)
    }

    /// `∫_a^b f`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(mid + half * t))
            .sum::<f64>()
    }

    /// Tensor-product `∫∫ f(x, y)` over `[ax, bx] × [ay, by]`.
    pub fn integrate_2d(
        &self,
        (ax, bx): (f64, f64),
        (ay, by): (f64, f64),
        f: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        let (xs, wx) = self.mapped(ax, bx);
        let (ys, wy) = self.mapped(ay, by);
        let mut total = 0.0;
        for (x, wxi) in xs.iter().zip(&wx) {
            let mut row = 0.0;
            for (y, wyj) in ys.iter().zip(&wy) {
                row += wyj * f(*x, *y);
            }
            total += wxi * row;
        }
        total
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Rules for `base, 2·base, 4·base, …` up to `max`, built once and shared.
#[derive(Debug, Clone)]
pub struct RuleLadder {
    rules: Vec<GaussLegendre>,
}

impl RuleLadder {
    pub fn new(base: usize, max: usize) -> Self {
        let mut rules = Vec::new();
        let mut n = base;
        while n <= max.max(base) {
            rules.push(GaussLegendre::new(n));
            n *= 2;
        }
        RuleLadder { rules }
    }

    pub fn rules(&self) -> &[GaussLegendre] {
        &self.rules
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 3, 8, 64, 128, 512] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: {s}");
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn known_two_and_three_point_rules() {
        let r = GaussLegendre::new(2);
        assert!((r.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
        let r = GaussLegendre::new(3);
        assert!((r.nodes[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((r.weights[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!((r.weights[0] - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_degree_2n_minus_1() {
        let r = GaussLegendre::new(5);
        // ∫_0^2 x^9 dx = 2^10 / 10
        let v = r.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 102.4).abs() < 1e-11);
    }

    #[test]
    fn gaussian_2d() {
        let r = GaussLegendre::new(64);
        let v = r.integrate_2d((-8.0, 8.0), (-8.0, 8.0), |x, y| (-(x * x + y * y) / 2.0).exp());
        assert!((v - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn ladder_doubles() {
        let l = RuleLadder::new(64, 512);
        let sizes: Vec<_> = l.rules().iter().map(GaussLegendre::len).collect();
        assert_eq!(sizes, vec![64, 128, 256, 512]);
    }
}
