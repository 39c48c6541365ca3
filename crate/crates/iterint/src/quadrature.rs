//! Gauss–Legendre rules and panel-wise cumulative integration on `[0, 1]`.

use std::f64::consts::PI;

use crate::basis::legendre_all;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule on `[0, 1]` with `panels` equal panels of `order` Gauss points,
/// plus the matrix that maps integrand values on a panel to its running integral
/// `∫_{panel start}^{x_i} f` at the panel's own nodes.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub panels: usize,
    pub order: usize,
    /// All nodes, panel-major.
    pub nodes: Vec<f64>,
    /// Weights matching `nodes`.
    pub weights: Vec<f64>,
    /// `order × order`, row-major, already scaled to the panel width.
    cumulative: Vec<f64>,
}

impl PanelRule {
    pub fn new(panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let width = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = p as f64 * width;
            for i in 0..order {
                nodes.push(a + 0.5 * width * (x[i] + 1.0));
                weights.push(0.5 * width * w[i]);
            }
        }
        // S_ij = Σ_m (2m+1)/2 · w_j P_m(x_j) · ∫_{-1}^{x_i} P_m
        let mut pj = vec![vec![0.0; order + 1]; order];
        for j in 0..order {
            legendre_all(x[j], &mut pj[j]);
        }
        let mut cumulative = vec![0.0; order * order];
        for i in 0..order {
            let pi = &pj[i];
            for j in 0..order {
                let mut s = 0.0;
                for m in 0..order {
                    let a = if m == 0 {
                        x[i] + 1.0
                    } else {
                        (pi[m + 1] - pi[m - 1]) / (2 * m + 1) as f64
                    };
                    s += (2 * m + 1) as f64 / 2.0 * w[j] * pj[j][m] * a;
                }
                cumulative[i * order + j] = 0.5 * width * s;
            }
        }
        PanelRule { panels, order, nodes, weights, cumulative }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Running integral `∫_0^{x_i} f` at every node, from values `f(x_i)`.
    pub fn running_integral(&self, f: &[f64], out: &mut [f64]) {
        let n = self.order;
        let mut offset = 0.0;
        for p in 0..self.panels {
            let fp = &f[p * n..(p + 1) * n];
            for i in 0..n {
                let row = &self.cumulative[i * n..(i + 1) * n];
                let mut s = 0.0;
                for j in 0..n {
                    s += row[j] * fp[j];
                }
                out[p * n + i] = offset + s;
            }
            let mut total = 0.0;
            for j in 0..n {
                total += self.weights[p * n + j] * fp[j];
            }
            offset += total;
        }
    }

    /// `∫_0^1 f` from values at the nodes.
    pub fn integral(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn running_integral_of_cosine() {
        let rule = PanelRule::new(4, 12);
        let f: Vec<f64> = rule.nodes.iter().map(|x| (3.0 * x).cos()).collect();
        let mut g = vec![0.0; rule.len()];
        rule.running_integral(&f, &mut g);
        for (x, gi) in rule.nodes.iter().zip(&g) {
            assert!((gi - (3.0 * x).sin() / 3.0).abs() < 1e-14);
        }
        assert!((rule.integral(&f) - 3f64.sin() / 3.0).abs() < 1e-14);
    }
}
