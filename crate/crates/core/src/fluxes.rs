//! Interior two-point flux kernels and the face functionals derived from them.
//!
//! Each kernel is the dimensionless flux `F(c_K, c_L, phi_K, phi_L)` from
//! cell `K` to cell `L`; the face flux is `tau_sigma * F`. Only differences
//! of the potential enter, so shifting both potentials by a constant leaves
//! every quantity here unchanged.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{DdfvError, Result};
use crate::physics::{bernoulli, bernoulli_derivative, bernoulli_slope, Site};

/// Selector among the four interior flux discretizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Arithmetic mean of `c` times the electrochemical potential jump.
    Centered,
    /// Scharfetter-Gummel flux for the potential shifted by the excess chemical potential.
    Sedan,
    /// Scharfetter-Gummel flux for the activity, averaged inverse activity coefficient.
    #[serde(rename = "activity")]
    ActivityBased,
    /// Scharfetter-Gummel flux with a face-wise diffusion enhancement.
    #[serde(rename = "bess_ch")]
    BessemoulinChatard,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::Centered,
        SchemeKind::Sedan,
        SchemeKind::ActivityBased,
        SchemeKind::BessemoulinChatard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Centered => "centered",
            SchemeKind::Sedan => "sedan",
            SchemeKind::ActivityBased => "activity",
            SchemeKind::BessemoulinChatard => "bess_ch",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = DdfvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "centered" => Ok(SchemeKind::Centered),
            "sedan" => Ok(SchemeKind::Sedan),
            "activity" | "activity_based" => Ok(SchemeKind::ActivityBased),
            "bess_ch" | "bessemoulin_chatard" => Ok(SchemeKind::BessemoulinChatard),
            other => Err(DdfvError::invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Values on both sides of a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceState {
    pub k: Site,
    pub l: Site,
    pub phi_k: f64,
    pub phi_l: f64,
}

impl FaceState {
    pub fn new(c_k: f64, c_l: f64, phi_k: f64, phi_l: f64) -> Result<Self> {
        Ok(FaceState {
            k: Site::from_concentration(c_k)?,
            l: Site::from_concentration(c_l)?,
            phi_k,
            phi_l,
        })
    }

    pub fn from_sites(k: Site, l: Site, phi_k: f64, phi_l: f64) -> Self {
        FaceState { k, l, phi_k, phi_l }
    }

    /// The same face seen from `L`.
    pub fn swapped(&self) -> Self {
        FaceState { k: self.l, l: self.k, phi_k: self.phi_l, phi_l: self.phi_k }
    }

    /// `h(c_K) + phi_K - h(c_L) - phi_L`
    pub fn electrochemical_jump(&self) -> f64 {
        (self.k.chem + self.phi_k) - (self.l.chem + self.phi_l)
    }

    fn potential_jump(&self) -> f64 {
        self.phi_l - self.phi_k
    }
}

/// `B(y) c_K - B(-y) c_L`, exactly antisymmetric under swapping `K`, `L`
/// and negating `y`.
///
/// For small `|y|` the terms nearly cancel, so the value is assembled from
/// `c_K - c_L` instead, taken from the vacancies near saturation.
fn fitted_difference(y: f64, k: &Site, l: &Site) -> f64 {
    if y.abs() < 1.0 {
        let dc = concentration_jump(k, l);
        0.5 * (bernoulli(y) + bernoulli(-y)) * dc - 0.5 * y * (k.c + l.c)
    } else {
        bernoulli(y) * k.c - bernoulli(-y) * l.c
    }
}

/// `c_K - c_L`, from whichever of `c` and `1 - c` is stored without rounding.
fn concentration_jump(k: &Site, l: &Site) -> f64 {
    if k.c > 0.5 && l.c > 0.5 {
        l.vacancy - k.vacancy
    } else {
        k.c - l.c
    }
}

/// `nu(c_L) - nu(c_K) = log((1 - c_K) / (1 - c_L))`, exactly antisymmetric.
/// Close vacancies go through `2 atanh(t)` with `t` their relative difference.
fn excess_jump(k: &Site, l: &Site) -> f64 {
    let t = concentration_jump(l, k) / (k.vacancy + l.vacancy);
    if t.abs() < 0.5 {
        t.signum() * (2.0 * t.abs() / (1.0 - t.abs())).ln_1p()
    } else {
        k.log_vacancy - l.log_vacancy
    }
}

/// Argument of the Bernoulli function in the Sedan flux.
fn sedan_argument(s: &FaceState) -> f64 {
    (s.phi_l - s.phi_k) + excess_jump(&s.k, &s.l)
}

/// Flux value and its partial derivatives with respect to
/// `(h(c_K), h(c_L), phi_K, phi_L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxLinearization {
    pub value: f64,
    pub d_chem_k: f64,
    pub d_chem_l: f64,
    pub d_phi_k: f64,
    pub d_phi_l: f64,
}

pub fn flux(scheme: SchemeKind, s: &FaceState) -> f64 {
    let (k, l) = (&s.k, &s.l);
    let dphi = s.potential_jump();
    match scheme {
        SchemeKind::Centered => -0.5 * (k.c + l.c) * ((l.chem + s.phi_l) - (k.chem + s.phi_k)),
        SchemeKind::Sedan => {
            let y = sedan_argument(s);
            fitted_difference(y, k, l)
        }
        SchemeKind::ActivityBased => {
            let beta = 0.5 * (k.vacancy + l.vacancy);
            beta * (bernoulli(dphi) * k.activity() - bernoulli(-dphi) * l.activity())
        }
        SchemeKind::BessemoulinChatard => {
            let dr = k.enhancement_slope(l);
            let q = dphi / dr;
            dr * fitted_difference(q, k, l)
        }
    }
}

/// Flux with closed-form partial derivatives, used for the Newton Jacobian.
pub fn flux_linearization(scheme: SchemeKind, s: &FaceState) -> FluxLinearization {
    let (k, l) = (&s.k, &s.l);
    let dphi = s.potential_jump();
    match scheme {
        SchemeKind::Centered => {
            let mean = 0.5 * (k.c + l.c);
            let jump = (l.chem + s.phi_l) - (k.chem + s.phi_k);
            FluxLinearization {
                value: -mean * jump,
                d_chem_k: -0.5 * k.dc() * jump + mean,
                d_chem_l: -0.5 * l.dc() * jump - mean,
                d_phi_k: mean,
                d_phi_l: -mean,
            }
        }
        SchemeKind::Sedan => {
            let y = sedan_argument(s);
            let (bp, bm) = (bernoulli(y), bernoulli(-y));
            let d_y = bernoulli_derivative(y) * k.c + bernoulli_derivative(-y) * l.c;
            // dy/dh_K = -c_K, dy/dh_L = c_L
            FluxLinearization {
                value: fitted_difference(y, k, l),
                d_chem_k: -d_y * k.c + bp * k.dc(),
                d_chem_l: d_y * l.c - bm * l.dc(),
                d_phi_k: -d_y,
                d_phi_l: d_y,
            }
        }
        SchemeKind::ActivityBased => {
            let beta = 0.5 * (k.vacancy + l.vacancy);
            let (ak, al) = (k.activity(), l.activity());
            let (bp, bm) = (bernoulli(dphi), bernoulli(-dphi));
            let sg = bp * ak - bm * al;
            let d_jump = beta * (bernoulli_derivative(dphi) * ak + bernoulli_derivative(-dphi) * al);
            FluxLinearization {
                value: beta * sg,
                d_chem_k: -0.5 * k.dc() * sg + beta * bp * ak,
                d_chem_l: -0.5 * l.dc() * sg - beta * bm * al,
                d_phi_k: -d_jump,
                d_phi_l: d_jump,
            }
        }
        SchemeKind::BessemoulinChatard => {
            let dr = k.enhancement_slope(l);
            let (ddr_k, ddr_l) = k.enhancement_slope_partials(l);
            let q = dphi / dr;
            let (bp, bm) = (bernoulli(q), bernoulli(-q));
            let bracket = fitted_difference(q, k, l);
            let d_q = bernoulli_derivative(q) * k.c + bernoulli_derivative(-q) * l.c;
            let d_dr = bracket - q * d_q;
            FluxLinearization {
                value: dr * bracket,
                d_chem_k: dr * bp * k.dc() + d_dr * ddr_k,
                d_chem_l: -dr * bm * l.dc() + d_dr * ddr_l,
                d_phi_k: -d_q,
                d_phi_l: d_q,
            }
        }
    }
}

/// Weights `(w_K, w_L)` of the convex combination `w_K a_K + w_L a_L` that an
/// exponentially fitted flux induces, for `x = log a_K - log a_L` and the
/// drift argument `y`. They are nonnegative and sum to one.
fn fitted_weights(x: f64, y: f64) -> (f64, f64) {
    (-bernoulli_slope(x, y), -bernoulli_slope(-x, -y))
}

/// Face concentration: the flux divided by the electrochemical jump, so that
/// `F = C * (h(c_K) + phi_K - h(c_L) - phi_L)`.
///
/// The Scharfetter-Gummel variants are evaluated through their
/// convex-combination representation, which is also the limit at zero jump.
pub fn face_concentration(scheme: SchemeKind, s: &FaceState) -> f64 {
    let (k, l) = (&s.k, &s.l);
    let dphi = s.potential_jump();
    match scheme {
        SchemeKind::Centered => 0.5 * (k.c + l.c),
        SchemeKind::Sedan => {
            let x = k.log_c - l.log_c;
            let y = sedan_argument(s);
            let (wk, wl) = fitted_weights(x, y);
            wk * k.c + wl * l.c
        }
        SchemeKind::ActivityBased => {
            let x = k.chem - l.chem;
            let (wk, wl) = fitted_weights(x, dphi);
            let beta = 0.5 * (k.vacancy + l.vacancy);
            beta * (wk * k.activity() + wl * l.activity())
        }
        SchemeKind::BessemoulinChatard => {
            let x = k.log_c - l.log_c;
            let y = dphi / k.enhancement_slope(l);
            let (wk, wl) = fitted_weights(x, y);
            wk * k.c + wl * l.c
        }
    }
}

/// Face dissipation `C * |jump|^2`; nonnegative.
pub fn face_dissipation(scheme: SchemeKind, s: &FaceState) -> f64 {
    let jump = s.electrochemical_jump();
    face_concentration(scheme, s) * jump * jump
}

/// `(r(c_K) - r(c_L)) / (h(c_K) - h(c_L))`, equal to `c_K` at coincidence.
pub fn mean_face_concentration(k: &Site, l: &Site) -> f64 {
    let dh = k.chem - l.chem;
    if dh == 0.0 {
        k.c
    } else if dh.abs() < 1e-10 {
        0.5 * (k.c + l.c)
    } else {
        (k.excess() - l.excess()) / dh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitDirection {
    ToZero,
    ToOne,
}

pub const COERCIVITY_GRID: usize = 33;

/// Minimum of the face dissipation over a 33x33 grid of potentials in
/// `[-m, m]^2`, for `c_K = fixed_c` and `c_L = 10^-k` (or `1 - 10^-k`),
/// `k = 1..=k_max`.
pub fn coercivity_profile(
    scheme: SchemeKind,
    fixed_c: f64,
    m: f64,
    direction: LimitDirection,
    k_max: u32,
) -> Result<Vec<f64>> {
    if !(m >= 0.0) {
        return Err(DdfvError::invalid("potential bound must be nonnegative"));
    }
    let fixed = Site::from_concentration(fixed_c)?;
    let grid: Vec<f64> = (0..COERCIVITY_GRID)
        .map(|i| -m + 2.0 * m * i as f64 / (COERCIVITY_GRID - 1) as f64)
        .collect();
    let profile = (1..=k_max)
        .map(|k| {
            let small = 10f64.powi(-(k as i32));
            let chem = (-small).ln_1p() - small.ln();
            let other = match direction {
                LimitDirection::ToZero => Site::from_chemical(-chem),
                LimitDirection::ToOne => Site::from_chemical(chem),
            };
            let mut best = f64::INFINITY;
            for &pk in &grid {
                for &pl in &grid {
                    let d = face_dissipation(scheme, &FaceState::from_sites(fixed, other, pk, pl));
                    best = best.min(d);
                }
            }
            best
        })
        .collect();
    Ok(profile)
}
