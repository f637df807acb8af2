//! Material laws of the degenerate (Fermi-Dirac-type, gamma = 1) carrier
//! statistics and the Bernoulli function used by the exponentially fitted fluxes.
//!
//! Every law is available in two forms: a checked scalar form taking a
//! concentration `c` in the open interval (0, 1), and the [`Site`] form that
//! is parameterised by the chemical potential `h(c) = log(c / (1 - c))`.
//! The solver works with the latter, because concentrations extremely close
//! to 0 or 1 keep full relative precision there.

use crate::error::{DdfvError, Result};

/// A concentration strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Concentration(f64);

impl Concentration {
    pub fn new(value: f64) -> Result<Self> {
        check_open_unit(value, "concentration")?;
        Ok(Concentration(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Concentration {
    type Error = DdfvError;

    fn try_from(value: f64) -> Result<Self> {
        Concentration::new(value)
    }
}

fn check_open_unit(c: f64, context: &'static str) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(DdfvError::Domain { value: c, context })
    }
}

/// Chemical potential `log(c / (1 - c))`.
pub fn chemical_potential(c: f64) -> Result<f64> {
    check_open_unit(c, "chemical_potential")?;
    Ok(c.ln() - (-c).ln_1p())
}

/// Inverse of the chemical potential, `1 / (1 + exp(-x))`, without overflow.
pub fn inverse_chemical_potential(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mixing entropy `c log c + (1 - c) log(1 - c)`, extended by continuity to [0, 1].
pub fn entropy_density(c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(DdfvError::Domain { value: c, context: "entropy_density" });
    }
    Ok(xlogx(c) + xlogx(1.0 - c))
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Excess chemical potential `-log(1 - c)`.
pub fn excess_potential(c: f64) -> Result<f64> {
    check_open_unit(c, "excess_potential")?;
    Ok(-(-c).ln_1p())
}

/// Activity `c / (1 - c)`.
pub fn activity(c: f64) -> Result<f64> {
    check_open_unit(c, "activity")?;
    Ok(c / (1.0 - c))
}

/// Inverse activity coefficient `1 - c`.
pub fn inverse_activity_coefficient(c: f64) -> Result<f64> {
    check_open_unit(c, "inverse_activity_coefficient")?;
    Ok(1.0 - c)
}

/// Diffusion enhancement `r(c) = -log(1 - c)`, the antiderivative of `c h'(c)`.
pub fn diffusion_enhancement(c: f64) -> Result<f64> {
    check_open_unit(c, "diffusion_enhancement")?;
    Ok(-(-c).ln_1p())
}

/// Secant approximation of `r'(c)` between two concentrations.
pub fn enhancement_slope(c_k: f64, c_l: f64) -> Result<f64> {
    let k = Site::from_concentration(c_k)?;
    let l = Site::from_concentration(c_l)?;
    Ok(k.enhancement_slope(&l))
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

const BERNOULLI_TAYLOR: f64 = 1e-4;
const BERNOULLI_DIRECT: f64 = 40.0;

/// Bernoulli function `B(u) = u / (exp(u) - 1)` with `B(0) = 1`.
pub fn bernoulli(u: f64) -> f64 {
    let a = u.abs();
    if a < BERNOULLI_TAYLOR {
        1.0 - u * (0.5 - u / 12.0)
    } else if a <= BERNOULLI_DIRECT {
        u / u.exp_m1()
    } else if u > 0.0 {
        u * (-u).exp()
    } else {
        // exp(u) is below 5e-18 here
        -u * (1.0 + u.exp())
    }
}

/// Derivative `B'(u)`.
pub fn bernoulli_derivative(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        let u2 = u * u;
        -0.5 + u * (1.0 / 6.0 - u2 * (1.0 / 180.0 - u2 / 5040.0))
    } else {
        bernoulli(u) * (1.0 - bernoulli(-u)) / u
    }
}

/// Divided difference `(B(x) - B(y)) / (x - y)`, continuous across `x = y`.
pub fn bernoulli_slope(x: f64, y: f64) -> f64 {
    let mid = 0.5 * (x + y);
    if mid < 0.0 {
        // B(x) = B(-x) - x keeps the subtracted values small
        return -bernoulli_slope(-x, -y) - 1.0;
    }
    let d = x - y;
    if d.abs() < 1e-5 {
        bernoulli_derivative(mid)
    } else {
        (bernoulli(x) - bernoulli(y)) / d
    }
}

/// Below this gap in `h` the secant of the enhancement is replaced by its midpoint
/// tangent; both are then accurate to about `1e-11`.
const SLOPE_GUARD: f64 = 1e-5;

/// All concentration-dependent quantities of one cell, parameterised by the
/// chemical potential so that `c` and `1 - c` are both accurate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    /// `h(c)`
    pub chem: f64,
    pub c: f64,
    /// `1 - c`
    pub vacancy: f64,
    pub log_c: f64,
    /// `log(1 - c)`
    pub log_vacancy: f64,
}

impl Site {
    pub fn from_chemical(chem: f64) -> Self {
        Site {
            chem,
            c: inverse_chemical_potential(chem),
            vacancy: inverse_chemical_potential(-chem),
            log_c: -softplus(-chem),
            log_vacancy: -softplus(chem),
        }
    }

    pub fn from_concentration(c: f64) -> Result<Self> {
        check_open_unit(c, "site")?;
        let log_c = c.ln();
        let log_vacancy = (-c).ln_1p();
        Ok(Site { chem: log_c - log_vacancy, c, vacancy: 1.0 - c, log_c, log_vacancy })
    }

    /// `nu(c) = -log(1 - c)`; also `r(c)`.
    pub fn excess(&self) -> f64 {
        -self.log_vacancy
    }

    pub fn activity(&self) -> f64 {
        self.chem.exp()
    }

    pub fn entropy(&self) -> f64 {
        self.c * self.log_c + self.vacancy * self.log_vacancy
    }

    /// `dc/dh = c (1 - c)`
    pub fn dc(&self) -> f64 {
        self.c * self.vacancy
    }

    /// Secant `(h_K - h_L) / (log c_K - log c_L)`, falling back to
    /// `r'(c) = 1 / (1 - c)` at the midpoint when the chemical potentials
    /// nearly coincide. The guard is on `h` rather than `log c`: near
    /// saturation the logs of distinct states agree to machine precision.
    pub fn enhancement_slope(&self, other: &Site) -> f64 {
        let dchem = self.chem - other.chem;
        if dchem.abs() < SLOPE_GUARD {
            2.0 / (self.vacancy + other.vacancy)
        } else {
            dchem / (self.log_c - other.log_c)
        }
    }

    /// Partial derivatives of [`Site::enhancement_slope`] with respect to the
    /// chemical potentials of `self` and `other`.
    pub(crate) fn enhancement_slope_partials(&self, other: &Site) -> (f64, f64) {
        let dlog = self.log_c - other.log_c;
        if (self.chem - other.chem).abs() < 10.0 * SLOPE_GUARD {
            // d/dh (1 / v(h)) = c / v, split evenly between the two ends
            let v = 0.5 * (self.vacancy + other.vacancy);
            let c = 0.5 * (self.c + other.c);
            let g2 = c / (v * v);
            (0.5 * g2 * self.vacancy, 0.5 * g2 * other.vacancy)
        } else {
            let dr = (self.chem - other.chem) / dlog;
            ((1.0 - dr * self.vacancy) / dlog, (dr * other.vacancy - 1.0) / dlog)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn chemical_potential_values() {
        assert_eq!(chemical_potential(0.5).unwrap(), 0.0);
        assert_relative_eq!(chemical_potential(0.75).unwrap(), 3f64.ln(), epsilon = 1e-15);
        assert!(chemical_potential(0.0).is_err());
        assert!(chemical_potential(1.0).is_err());
        assert!(chemical_potential(-0.2).is_err());
    }

    #[test]
    fn inverse_chemical_potential_extremes() {
        assert_eq!(inverse_chemical_potential(0.0), 0.5);
        let big = inverse_chemical_potential(1e4);
        assert!(big <= 1.0 && big > 1.0 - 1e-12);
        let tiny = inverse_chemical_potential(-1e4);
        assert!(tiny >= 0.0 && tiny < 1e-12);
        assert!(inverse_chemical_potential(-700.0) > 0.0);
    }

    #[test]
    fn entropy_values() {
        assert_relative_eq!(entropy_density(0.5).unwrap(), -(2f64.ln()), epsilon = 1e-15);
        assert_eq!(entropy_density(0.0).unwrap(), 0.0);
        assert_eq!(entropy_density(1.0).unwrap(), 0.0);
        assert!(entropy_density(1e-300).unwrap().abs() < 1e-296);
        assert!(entropy_density(1.5).is_err());
    }

    #[test]
    fn closed_form_laws() {
        assert_relative_eq!(diffusion_enhancement(0.5).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(activity(0.5).unwrap(), 1.0);
        assert_eq!(inverse_activity_coefficient(0.5).unwrap(), 0.5);
        assert_relative_eq!(excess_potential(0.25).unwrap(), -(0.75f64.ln()), epsilon = 1e-15);
        assert!(activity(1.0).is_err());
    }

    #[test]
    fn bernoulli_reference_values() {
        assert_eq!(bernoulli(0.0), 1.0);
        assert_relative_eq!(bernoulli(1.0), 1.0 / (1f64.exp() - 1.0), max_relative = 1e-15);
        assert_relative_eq!(bernoulli(1.0), 0.581_976_706_869_326_4, max_relative = 1e-14);
        for &u in &[-700.0, -100.0, -40.5, -1e-5, 1e-5, 40.5, 100.0, 700.0] {
            let b = bernoulli(u);
            assert!(b.is_finite() && b > 0.0, "B({u}) = {b}");
        }
    }

    #[test]
    fn bernoulli_branches_are_continuous() {
        for &edge in &[BERNOULLI_TAYLOR, BERNOULLI_DIRECT] {
            for s in [-1.0, 1.0] {
                let below = bernoulli(s * edge * (1.0 - 1e-12));
                let above = bernoulli(s * edge * (1.0 + 1e-12));
                assert_relative_eq!(below, above, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn bernoulli_derivative_matches_finite_differences() {
        for &u in &[-60.0, -20.0, -3.0, -0.5, -0.009, -1e-6, 0.0, 2e-3, 0.011, 0.7, 5.0, 35.0, 60.0] {
            let step = 1e-5 * (1.0 + f64::abs(u));
            let fd = (bernoulli(u + step) - bernoulli(u - step)) / (2.0 * step);
            assert_relative_eq!(bernoulli_derivative(u), fd, max_relative = 1e-6, epsilon = 1e-12);
        }
    }

    #[test]
    fn bernoulli_slope_limits() {
        assert_relative_eq!(bernoulli_slope(0.3, 0.3), bernoulli_derivative(0.3));
        assert_relative_eq!(bernoulli_slope(-48.0, -47.0), bernoulli(-47.0) - bernoulli(-48.0), epsilon = 1e-12);
        assert_relative_eq!(bernoulli_slope(2.0, 1.0), bernoulli(2.0) - bernoulli(1.0), max_relative = 1e-14);
    }

    #[test]
    fn enhancement_slope_values() {
        assert_relative_eq!(enhancement_slope(0.5, 0.5).unwrap(), 2.0);
        assert_relative_eq!(enhancement_slope(0.75, 0.25).unwrap(), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn site_from_chemical_is_accurate_near_bounds() {
        let s = Site::from_chemical(50.0);
        assert!(s.vacancy > 0.0 && s.vacancy < 1e-21);
        assert_relative_eq!(s.log_vacancy, -50.0, max_relative = 1e-14);
        let t = Site::from_chemical(-50.0);
        assert_relative_eq!(t.log_c, -50.0, max_relative = 1e-14);
        assert_relative_eq!(t.excess(), 0.0, epsilon = 1e-21);
    }

    #[test]
    fn enhancement_slope_partials_match_finite_differences() {
        let cases = [(0.3, 0.7), (0.01, 0.02), (0.5, 0.5), (0.4, 0.4 + 1e-9), (0.999, 0.2)];
        for (a, b) in cases {
            let k = Site::from_concentration(a).unwrap();
            let l = Site::from_concentration(b).unwrap();
            let (dk, dl) = k.enhancement_slope_partials(&l);
            // larger steps would hit the O(step^2) term, smaller ones the secant cancellation
            let step = 1e-4;
            let f = |hk: f64, hl: f64| Site::from_chemical(hk).enhancement_slope(&Site::from_chemical(hl));
            let fdk = (f(k.chem + step, l.chem) - f(k.chem - step, l.chem)) / (2.0 * step);
            let fdl = (f(k.chem, l.chem + step) - f(k.chem, l.chem - step)) / (2.0 * step);
            assert_relative_eq!(dk, fdk, max_relative = 1e-5, epsilon = 1e-8);
            assert_relative_eq!(dl, fdl, max_relative = 1e-5, epsilon = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn chemical_potential_is_antisymmetric(c in 1e-9f64..(1.0 - 1e-9)) {
            let s = chemical_potential(c).unwrap() + chemical_potential(1.0 - c).unwrap();
            prop_assert!(s.abs() < 1e-8 * (1.0 + chemical_potential(c).unwrap().abs()));
        }

        #[test]
        fn inverse_round_trip(c in 1e-6f64..(1.0 - 1e-6)) {
            let back = inverse_chemical_potential(chemical_potential(c).unwrap());
            prop_assert!((back - c).abs() <= 1e-13);
        }

        #[test]
        fn entropy_symmetry_and_range(c in 0.0f64..=1.0) {
            let e = entropy_density(c).unwrap();
            prop_assert!((e - entropy_density(1.0 - c).unwrap()).abs() < 1e-15);
            prop_assert!(e <= 0.0 && e >= -(2f64.ln()) - 1e-15);
        }

        #[test]
        fn activity_identity(c in 1e-9f64..(1.0 - 1e-9)) {
            let prod = inverse_activity_coefficient(c).unwrap() * activity(c).unwrap();
            prop_assert!((prod - c).abs() <= 1e-15);
        }

        #[test]
        fn bernoulli_reflection(x in -50.0f64..50.0) {
            prop_assert!((bernoulli(x) - bernoulli(-x) + x).abs() <= 1e-13);
        }

        #[test]
        fn bernoulli_log_identity(a in 1e-8f64..(1.0 - 1e-8), b in 1e-8f64..(1.0 - 1e-8)) {
            let d = a.ln() - b.ln();
            let v = bernoulli(d) * a - bernoulli(-d) * b;
            prop_assert!(v.abs() <= 1e-13);
        }

        #[test]
        fn bernoulli_is_decreasing(x in -600.0f64..600.0, dx in 1e-3f64..1.0) {
            prop_assert!(bernoulli(x + dx) < bernoulli(x));
        }

        #[test]
        fn enhancement_slope_bounds(a in 1e-6f64..(1.0 - 1e-6), b in 1e-6f64..(1.0 - 1e-6)) {
            let dr = enhancement_slope(a, b).unwrap();
            prop_assert!((dr - enhancement_slope(b, a).unwrap()).abs() <= 1e-12 * dr);
            let lo = 1.0 / (1.0 - a.min(b));
            let hi = 1.0 / (1.0 - a.max(b));
            prop_assert!(dr >= 1.0);
            prop_assert!(dr >= lo * (1.0 - 1e-9) && dr <= hi * (1.0 + 1e-9));
        }
    }
}
