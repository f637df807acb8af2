//! Independent dense reference solver for one backward Euler step on a small
//! uniform 1D mesh. Works in concentration variables with a finite-difference
//! Jacobian and shares no code with the library beyond the scheme enum.

#![allow(dead_code)]

use ddfv::SchemeKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct Contact {
    pub phi: f64,
    /// `None` for a carrier no-flux contact.
    pub c: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StepProblem {
    pub scheme: SchemeKind,
    pub length: f64,
    pub doping: f64,
    pub left: Contact,
    pub right: Contact,
    pub c_prev: Vec<f64>,
    pub dt: f64,
}

fn bern(u: f64) -> f64 {
    if u.abs() < 1e-9 {
        1.0 - 0.5 * u
    } else {
        u / u.exp_m1()
    }
}

fn chem(c: f64) -> f64 {
    (c / (1.0 - c)).ln()
}

fn nu(c: f64) -> f64 {
    -(1.0 - c).ln()
}

/// Flux from `K` to `L` per unit transmissibility.
pub fn reference_flux(scheme: SchemeKind, ck: f64, cl: f64, pk: f64, pl: f64) -> f64 {
    match scheme {
        SchemeKind::Centered => -0.5 * (ck + cl) * ((chem(cl) + pl) - (chem(ck) + pk)),
        SchemeKind::Sedan => {
            let y = (pl + nu(cl)) - (pk + nu(ck));
            bern(y) * ck - bern(-y) * cl
        }
        SchemeKind::ActivityBased => {
            let beta = 0.5 * ((1.0 - ck) + (1.0 - cl));
            let (ak, al) = (ck / (1.0 - ck), cl / (1.0 - cl));
            beta * (bern(pl - pk) * ak - bern(pk - pl) * al)
        }
        SchemeKind::BessemoulinChatard => {
            let dr = if ck == cl { 1.0 / (1.0 - ck) } else { (chem(ck) - chem(cl)) / (ck.ln() - cl.ln()) };
            let q = (pl - pk) / dr;
            dr * (bern(q) * ck - bern(-q) * cl)
        }
    }
}

impl StepProblem {
    pub fn n(&self) -> usize {
        self.c_prev.len()
    }

    /// Unknowns `(c_1..c_n, phi_1..phi_n)`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let h = self.length / n as f64;
        let (c, phi) = x.split_at(n);
        let mut r = vec![0.0; 2 * n];
        for k in 0..n {
            r[k] = h * (c[k] - self.c_prev[k]) / self.dt;
            r[n + k] = -h * (c[k] + self.doping);
        }
        for k in 0..n.saturating_sub(1) {
            let tau = 1.0 / h;
            let f = tau * reference_flux(self.scheme, c[k], c[k + 1], phi[k], phi[k + 1]);
            r[k] += f;
            r[k + 1] -= f;
            r[n + k] += tau * (phi[k] - phi[k + 1]);
            r[n + k + 1] += tau * (phi[k + 1] - phi[k]);
        }
        // boundary half cells: distance h / 2
        for (k, contact) in [(0, self.left), (n - 1, self.right)] {
            let tau = 2.0 / h;
            r[n + k] += tau * (phi[k] - contact.phi);
            if let Some(cd) = contact.c {
                r[k] += tau * reference_flux(self.scheme, c[k], cd, phi[k], contact.phi);
            }
        }
        r
    }

    fn jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let m = x.len();
        let mut jac = vec![vec![0.0; m]; m];
        for j in 0..m {
            let step = 1e-7 * (1.0 + x[j].abs()) * if j < self.n() { x[j].min(1.0 - x[j]) } else { 1.0 };
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[j] += step;
            xm[j] -= step;
            let (rp, rm) = (self.residual(&xp), self.residual(&xm));
            for i in 0..m {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * step);
            }
        }
        jac
    }

    fn admissible(&self, x: &[f64]) -> bool {
        x[..self.n()].iter().all(|&c| c > 0.0 && c < 1.0)
    }

    /// Damped Newton from `x0`; `None` when it does not converge.
    pub fn newton(&self, x0: &[f64]) -> Option<Vec<f64>> {
        let norm2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut x = x0.to_vec();
        for _ in 0..200 {
            let r = self.residual(&x);
            if r.iter().all(|v| v.abs() < 1e-13) {
                return Some(x);
            }
            let delta = gauss_solve(self.jacobian(&x), r.iter().map(|v| -v).collect())?;
            let mut alpha = 1.0;
            let r0 = norm2(&r);
            loop {
                let cand: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
                if self.admissible(&cand) && norm2(&self.residual(&cand)) < (1.0 - 1e-4 * alpha) * r0 {
                    x = cand;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    // converged to roundoff if the residual is already tiny
                    return (r.iter().all(|v| v.abs() < 1e-11)).then_some(x);
                }
            }
        }
        None
    }

    /// Every converged solution from `starts` random initial guesses.
    pub fn multistart(&self, starts: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n();
        (0..starts)
            .filter_map(|_| {
                let mut x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
                x0.extend((0..n).map(|_| rng.gen_range(-5.0..5.0)));
                self.newton(&x0)
            })
            .collect()
    }
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
