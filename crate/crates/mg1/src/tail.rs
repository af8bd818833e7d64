//! Discrete heavy- and light-tailed reference families on the nonnegative
//! integers, shared by the model's parametric tail blocks and the asymptotic
//! reference distributions.
//!
//! Conventions: the survival function `sf(k)` is the mass strictly above `k`,
//! with `sf(-1) = 1`; the point mass at `k >= 0` is `sf(k-1) - sf(k)`.

use crate::error::{Mg1Error, Result};
use crate::tol::{EPS_TAIL, SERIES_ITER_CAP};

/// Parametric tail family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailFamily {
    /// `sf(k) = (gamma / (k + gamma))^alpha`.
    Pareto { alpha: f64, gamma: f64 },
    /// `sf(k) = exp(-lambda * k^alpha)` with `0 < alpha < 1`.
    Weibull { lambda: f64, alpha: f64 },
    /// `sf(k) = rho^(k+1)`.
    Geometric { rho: f64 },
}

impl TailFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TailFamily::Pareto { alpha, gamma } => alpha > 0.0 && gamma > 0.0,
            TailFamily::Weibull { lambda, alpha } => lambda > 0.0 && alpha > 0.0 && alpha < 1.0,
            TailFamily::Geometric { rho } => rho > 0.0 && rho < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Mg1Error::InvalidTail(format!("parameters out of range: {self:?}")))
        }
    }

    /// Survival function `sf(k)`, defined for `k >= -1`.
    pub fn sf(&self, k: i64) -> f64 {
        assert!(k >= -1, "survival function defined for k >= -1");
        if k < 0 {
            return 1.0;
        }
        let kf = k as f64;
        match *self {
            TailFamily::Pareto { alpha, gamma } => (gamma / (kf + gamma)).powf(alpha),
            TailFamily::Weibull { lambda, alpha } => (-lambda * kf.powf(alpha)).exp(),
            TailFamily::Geometric { rho } => rho.powi(k as i32 + 1),
        }
    }

    /// Point mass at `k >= 0`.
    pub fn pmf(&self, k: i64) -> f64 {
        assert!(k >= 0);
        self.sf(k - 1) - self.sf(k)
    }

    /// Integrated tail `sum_{l > k} sf(l)`, for `k >= -1`.
    ///
    /// Closed form for the geometric family, Hurwitz zeta for Pareto, and
    /// bounded direct summation for Weibull. Errors when the sum diverges
    /// (Pareto with `alpha <= 1`) or the remainder bound cannot be met.
    pub fn integrated_tail(&self, k: i64) -> Result<f64> {
        assert!(k >= -1);
        match *self {
            TailFamily::Pareto { alpha, gamma } => {
                if alpha <= 1.0 {
                    return Err(Mg1Error::SeriesNotConvergent(format!(
                        "pareto integrated tail diverges for alpha = {alpha}"
                    )));
                }
                // sum_{l > k} (gamma/(l+gamma))^alpha = gamma^alpha * zeta(alpha, k+1+gamma)
                Ok(gamma.powf(alpha) * hurwitz_zeta(alpha, k as f64 + 1.0 + gamma))
            }
            TailFamily::Weibull { lambda, alpha } => weibull_integrated_tail(lambda, alpha, k),
            TailFamily::Geometric { rho } => Ok(rho.powi(k as i32 + 2) / (1.0 - rho)),
        }
    }

    /// Mean `sum_{k >= 0} sf(k)`.
    pub fn mean(&self) -> Result<f64> {
        self.integrated_tail(-1)
    }

    /// `sum_{k > cutoff} k * pmf(k)`, the mean mass carried above a cutoff.
    pub fn partial_mean_above(&self, cutoff: i64) -> Result<f64> {
        assert!(cutoff >= -1);
        Ok((cutoff + 1) as f64 * self.sf(cutoff) + self.integrated_tail(cutoff)?)
    }

    /// Smallest `m` with `sf(m) < eps`, capped at the series iteration limit.
    pub fn support_cutoff(&self, eps: f64) -> Result<i64> {
        match *self {
            TailFamily::Pareto { alpha, gamma } => {
                let m = gamma * eps.powf(-1.0 / alpha) - gamma;
                Ok(m.max(0.0).ceil() as i64 + 1)
            }
            TailFamily::Weibull { lambda, alpha } => {
                let m = (-eps.ln() / lambda).powf(1.0 / alpha);
                let m = m.max(0.0).ceil() as i64 + 1;
                if m as usize > SERIES_ITER_CAP {
                    return Err(Mg1Error::SeriesNotConvergent(
                        "weibull support cutoff beyond iteration cap".into(),
                    ));
                }
                Ok(m)
            }
            TailFamily::Geometric { rho } => Ok((eps.ln() / rho.ln()).ceil() as i64 + 1),
        }
    }
}

/// Hurwitz zeta `zeta(s, a) = sum_{n >= 0} (n + a)^(-s)` for `s > 1`, `a > 0`,
/// by Euler-Maclaurin with a short direct head.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0);
    const HEAD: usize = 24;
    // Bernoulli numbers B_2, B_4, ..., B_12.
    const BERN: [f64; 6] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
    ];
    let mut acc = 0.0;
    for n in 0..HEAD {
        acc += (a + n as f64).powf(-s);
    }
    let x = a + HEAD as f64;
    acc += x.powf(1.0 - s) / (s - 1.0);
    acc += 0.5 * x.powf(-s);
    let mut rising = s; // s * (s+1) * ... accumulated across terms
    let mut fact = 2.0; // (2j)!
    let mut xpow = x.powf(-s - 1.0);
    for (j, b) in BERN.iter().enumerate() {
        acc += b / fact * rising * xpow;
        // advance to the next even order
        let two_j = 2 * (j + 1);
        rising *= (s + two_j as f64 - 1.0) * (s + two_j as f64);
        fact *= ((two_j + 1) * (two_j + 2)) as f64;
        xpow *= x.powi(-2);
    }
    acc
}

fn weibull_integrated_tail(lambda: f64, alpha: f64, k: i64) -> Result<f64> {
    let mut acc = 0.0;
    let mut l = k + 1;
    for _ in 0..SERIES_ITER_CAP {
        let lf = l as f64;
        acc += (-lambda * lf.powf(alpha)).exp();
        // Remainder past l is below the incomplete-gamma integral bound
        // L^(1-alpha) e^(-lambda L^alpha) / (alpha lambda (1 - (1/alpha - 1)/(lambda L^alpha))).
        if lf > 0.0 {
            let u = lambda * lf.powf(alpha);
            let slack = 1.0 - (1.0 / alpha - 1.0) / u;
            if slack > 0.5 {
                let bound = lf.powf(1.0 - alpha) * (-u).exp() / (alpha * lambda * slack);
                if bound < EPS_TAIL {
                    return Ok(acc);
                }
            }
        }
        l += 1;
    }
    Err(Mg1Error::SeriesNotConvergent(format!(
        "weibull integrated tail: remainder bound above {EPS_TAIL:.1e} after cap"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZETA3: f64 = 1.2020569031595942854;

    #[test]
    fn pareto_mean_is_zeta() {
        let f = TailFamily::Pareto { alpha: 3.0, gamma: 1.0 };
        assert!((f.mean().unwrap() - ZETA3).abs() < 1e-13);
        let f2 = TailFamily::Pareto { alpha: 2.0, gamma: 1.0 };
        let pi2_6 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
        assert!((f2.mean().unwrap() - pi2_6).abs() < 1e-13);
    }

    #[test]
    fn pareto_integrated_tail_matches_brute_force() {
        let f = TailFamily::Pareto { alpha: 2.5, gamma: 1.7 };
        let k = 5i64;
        let closed = f.integrated_tail(k).unwrap();
        let mut brute = 0.0;
        for l in (k + 1)..2_000_000 {
            brute += f.sf(l);
        }
        assert!((closed - brute).abs() < 1e-8, "closed {closed} brute {brute}");
    }

    #[test]
    fn weibull_integrated_tail_matches_brute_force() {
        let f = TailFamily::Weibull { lambda: 1.0, alpha: 0.5 };
        let closed = f.integrated_tail(3).unwrap();
        let mut brute = 0.0;
        for l in 4..20_000 {
            brute += f.sf(l);
        }
        assert!((closed - brute).abs() < 1e-11);
    }

    #[test]
    fn geometric_closed_forms() {
        let f = TailFamily::Geometric { rho: 0.5 };
        assert!((f.sf(3) - 0.0625).abs() < 1e-15);
        // sum_{l>1} 0.5^(l+1) = 0.5^3 / 0.5 = 0.25
        assert!((f.integrated_tail(1).unwrap() - 0.25).abs() < 1e-14);
        assert!((f.mean().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn survival_convention_and_monotonicity() {
        for f in [
            TailFamily::Pareto { alpha: 3.0, gamma: 1.0 },
            TailFamily::Weibull { lambda: 0.7, alpha: 0.4 },
            TailFamily::Geometric { rho: 0.3 },
        ] {
            assert_eq!(f.sf(-1), 1.0);
            let mut prev = 1.0;
            let mut mass = 0.0;
            for k in 0..200 {
                let s = f.sf(k);
                assert!(s > 0.0 && s <= prev);
                mass += f.pmf(k);
                prev = s;
            }
            assert!((mass + prev - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_mean_above_matches_brute_force() {
        let f = TailFamily::Pareto { alpha: 3.0, gamma: 1.0 };
        let cutoff = 4i64;
        let closed = f.partial_mean_above(cutoff).unwrap();
        let mut brute = 0.0;
        for k in (cutoff + 1)..3_000_000 {
            brute += k as f64 * f.pmf(k);
        }
        assert!((closed - brute).abs() < 1e-6, "closed {closed} brute {brute}");
    }

    #[test]
    fn pareto_heavy_tail_rejects_integration() {
        let f = TailFamily::Pareto { alpha: 1.0, gamma: 1.0 };
        assert!(f.integrated_tail(0).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(TailFamily::Pareto { alpha: 0.0, gamma: 1.0 }.validate().is_err());
        assert!(TailFamily::Weibull { lambda: 1.0, alpha: 1.0 }.validate().is_err());
        assert!(TailFamily::Geometric { rho: 1.0 }.validate().is_err());
        assert!(TailFamily::Pareto { alpha: 3.0, gamma: 1.0 }.validate().is_ok());
    }

    #[test]
    fn support_cutoff_brackets_eps() {
        for f in [
            TailFamily::Pareto { alpha: 3.0, gamma: 1.0 },
            TailFamily::Weibull { lambda: 1.0, alpha: 0.5 },
            TailFamily::Geometric { rho: 0.5 },
        ] {
            let m = f.support_cutoff(1e-12).unwrap();
            assert!(f.sf(m) < 1e-12);
            assert!(f.sf(m / 2) >= 1e-12 || m < 4);
        }
    }
}
