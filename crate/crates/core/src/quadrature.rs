//! One-dimensional quadrature rules shared by the surface, volume and
//! spectral integrators.

use std::f64::consts::PI;

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Affine map of a rule on [-1, 1] onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> Rule1d {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Rule1d {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
        }
    }
}

/// Gauss–Legendre rule with `n` nodes on [-1, 1], ascending order.
///
/// Newton iteration on the three-term recurrence, started from the
/// Tricomi approximation of the roots.
pub fn gauss_legendre(n: usize) -> Rule1d {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
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
    Rule1d { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Periodic trapezoid rule with `n` equispaced nodes on [a, a + period).
pub fn trapezoid_periodic(n: usize, a: f64, period: f64) -> Rule1d {
    let h = period / n as f64;
    Rule1d {
        nodes: (0..n).map(|i| a + h * i as f64).collect(),
        weights: vec![h; n],
    }
}

/// Chebyshev–Gauss–Lobatto nodes `cos(pi j / (n - 1))`, j = 0..n, so the
/// first node is z = +1 and the last z = -1.
pub fn chebyshev_lobatto_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two Lobatto nodes");
    let m = (n - 1) as f64;
    (0..n)
        .map(|j| {
            // symmetric evaluation keeps the nodes exactly antisymmetric
            let k = 2 * j as i64 - (n as i64 - 1);
            -(PI * k as f64 / (2.0 * m)).sin()
        })
        .collect()
}

/// Clenshaw–Curtis weights on the Chebyshev–Gauss–Lobatto nodes.
pub fn clenshaw_curtis(n: usize) -> Rule1d {
    let nodes = chebyshev_lobatto_nodes(n);
    let m = n - 1;
    let mf = m as f64;
    let mut weights = vec![0.0; n];
    if m == 1 {
        weights[0] = 1.0;
        weights[1] = 1.0;
        return Rule1d { nodes, weights };
    }
    let end = if m % 2 == 0 { 1.0 / (mf * mf - 1.0) } else { 1.0 / (mf * mf) };
    weights[0] = end;
    weights[m] = end;
    for (j, w) in weights.iter_mut().enumerate().take(m).skip(1) {
        let theta = PI * j as f64 / mf;
        let mut v = 1.0;
        if m % 2 == 0 {
            for k in 1..m / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
            v -= (mf * theta).cos() / (mf * mf - 1.0);
        } else {
            for k in 1..=(m - 1) / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        *w = 2.0 * v / mf;
    }
    Rule1d { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 48, 64] {
            let rule = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = rule.integrate(|x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn clenshaw_curtis_exact_up_to_degree_n_minus_one() {
        for n in [3, 8, 17, 65] {
            let rule = clenshaw_curtis(n);
            for deg in 0..n {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = rule.integrate(|x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
            assert!(rule.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn lobatto_nodes_are_symmetric() {
        let z = chebyshev_lobatto_nodes(65);
        assert_eq!(z[0], 1.0);
        assert_eq!(z[64], -1.0);
        assert_eq!(z[32], 0.0);
        for j in 0..65 {
            assert_eq!(z[j], -z[64 - j]);
        }
    }

    #[test]
    fn trapezoid_is_spectral_for_periodic_functions() {
        let rule = trapezoid_periodic(32, 0.0, 2.0 * PI);
        let got = rule.integrate(|x| (x.sin()).exp());
        // 2 pi I_0(1)
        let exact = 2.0 * PI * 1.266_065_877_752_008_4;
        assert!((got - exact).abs() < 1e-13);
    }
}
