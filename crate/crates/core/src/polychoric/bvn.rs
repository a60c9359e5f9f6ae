//! Upper-orthant probability of the standard bivariate normal.
//!
//! Follows Genz's approach (Drezner-Wesolowsky with Gauss-Legendre
//! quadrature on the asin-substituted Plackett integral for moderate
//! correlation and an asymptotic expansion near |rho| = 1). Accurate to
//! roughly 1e-15 across the domain.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::normal;

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Positive half of the `n`-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre_half(n: usize) -> Rule {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    Rule { nodes, weights }
}

fn rule(points: usize) -> &'static Rule {
    static RULES: OnceLock<[Rule; 3]> = OnceLock::new();
    let rules = RULES.get_or_init(|| [gauss_legendre_half(6), gauss_legendre_half(12), gauss_legendre_half(20)]);
    match points {
        6 => &rules[0],
        12 => &rules[1],
        _ => &rules[2],
    }
}

/// `P(X > h, Y > k)` for a standard bivariate normal with correlation `rho`.
///
/// `rho` is clamped to [-1, 1]; the endpoints use the degenerate limits.
pub fn bvn_upper(h: f64, k: f64, rho: f64) -> f64 {
    let r = rho.clamp(-1.0, 1.0);
    if r == 1.0 {
        return normal::sf(h.max(k));
    }
    if r == -1.0 {
        return (normal::sf(h) - normal::cdf(k)).max(0.0);
    }
    let abs_r = r.abs();
    let gl = rule(if abs_r < 0.3 {
        6
    } else if abs_r < 0.75 {
        12
    } else {
        20
    });
    let mut hk = h * k;
    let mut bvn = 0.0;
    if abs_r < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            for sign in [-1.0, 1.0] {
                let sn = (asr * (sign * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (4.0 * PI) + normal::sf(h) * normal::sf(k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if abs_r < 1.0 {
            let a_s = (1.0 - r) * (1.0 + r);
            let mut a = a_s.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -(bs / a_s + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * (2.0 * PI).sqrt()
                    * normal::cdf(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                for sign in [-1.0, 1.0] {
                    let xs = (a * (sign * x + 1.0)).powi(2);
                    let rs = (1.0 - xs).sqrt();
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        bvn += a
                            * w
                            * asr.exp()
                            * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
                    }
                }
            }
            bvn = -bvn / (2.0 * PI);
        }
        if r > 0.0 {
            bvn += normal::sf(h.max(k));
        } else {
            bvn = -bvn;
            if k > h {
                if h < 0.0 {
                    bvn += normal::cdf(k) - normal::cdf(h);
                } else {
                    bvn += normal::sf(h) - normal::sf(k);
                }
            }
        }
    }
    bvn.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rules_integrate_polynomials() {
        for n in [6, 12, 20] {
            let r = rule(n);
            assert_eq!(r.nodes.len(), n / 2);
            let total: f64 = 2.0 * r.weights.iter().sum::<f64>();
            assert!((total - 2.0).abs() < 1e-14);
            // x^4 on [-1, 1] integrates to 2/5
            let m4: f64 = 2.0 * r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(4)).sum::<f64>();
            assert!((m4 - 0.4).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_identities() {
        assert!((bvn_upper(0.0, 0.0, 0.0) - 0.25).abs() < 1e-15);
        assert!((bvn_upper(0.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
        let expected = 0.25 + 0.5f64.asin() / (2.0 * PI);
        assert!((bvn_upper(0.0, 0.0, 0.5) - expected).abs() < 1e-12);
        assert!((expected - 0.333333).abs() < 1e-6);
        for rho in [-0.99, -0.95, -0.6, 0.2, 0.93, 0.97, 0.999] {
            let expected = 0.25 + f64::asin(rho) / (2.0 * PI);
            assert!((bvn_upper(0.0, 0.0, rho) - expected).abs() < 1e-12, "rho={rho}");
        }
    }

    #[test]
    fn independence_and_limits() {
        let (h, k) = (0.7, -1.1);
        assert!((bvn_upper(h, k, 0.0) - normal::sf(h) * normal::sf(k)).abs() < 1e-15);
        assert!((bvn_upper(h, k, -1.0) - (normal::sf(h) - normal::cdf(k)).max(0.0)).abs() < 1e-15);
        // continuity towards the endpoints
        assert!((bvn_upper(h, k, 0.999999) - bvn_upper(h, k, 1.0)).abs() < 1e-4);
        assert!((bvn_upper(h, k, -0.999999) - bvn_upper(h, k, -1.0)).abs() < 1e-4);
    }

    #[test]
    fn symmetric_in_arguments() {
        for &(h, k, r) in &[(0.3, 1.2, 0.4), (-0.5, 2.0, -0.8), (1.0, 1.5, 0.95)] {
            assert!((bvn_upper(h, k, r) - bvn_upper(k, h, r)).abs() < 1e-14);
        }
    }
}
