//! Implicit coupling of a multigroup radiation solver to the backward-Euler
//! material energy balance
//!
//! ```text
//! c_v (T - T_prev) / dt = sum_g kappa_g (c E_g - 4 pi B_g(T))
//! ```
//!
//! Opacities are frozen at the current iterate `T*` and the emission is
//! linearized, `4 pi kappa_g (B_g(T*) + B_g'(T*) dT)`. Eliminating the
//! radiation unknowns leaves a cell-local system for `dT` whose operator is
//! applied with one homogeneous radiation solve. It is solved with GMRES,
//! preconditioned by the infinite-medium response of each cell. A final
//! inhomogeneous solve with the linearized emission closes the iteration, so
//! radiation and material energy exchange the same amount to within the
//! Krylov tolerance at every iterate. The opacity lag is resolved by
//! repeating until the temperature update is below tolerance.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::GroupField;
use crate::linalg::{gmres, GmresOptions};
use crate::physics::{GroupCoefficients, Material};

/// Opacity, Planckian and Planckian derivative frozen per (group, cell).
#[derive(Debug, Clone)]
pub struct FrozenCoefficients {
    pub kappa: GroupField,
    pub planck: GroupField,
    pub dplanck: GroupField,
}

impl FrozenCoefficients {
    pub fn evaluate(material: &Material, temperature: &[f64]) -> Self {
        let groups = material.num_groups();
        let cells = temperature.len();
        let mut kappa = GroupField::zeros(groups, cells);
        let mut planck = GroupField::zeros(groups, cells);
        let mut dplanck = GroupField::zeros(groups, cells);
        let mut buf = vec![GroupCoefficients::default(); groups];
        for (c, &t) in temperature.iter().enumerate() {
            material.coefficients(t, &mut buf);
            for (g, k) in buf.iter().enumerate() {
                kappa.set(g, c, k.kappa);
                planck.set(g, c, k.planck);
                dplanck.set(g, c, k.dplanck);
            }
        }
        Self {
            kappa,
            planck,
            dplanck,
        }
    }

    /// `4 pi kappa_g B_g` per (group, cell).
    pub fn emission(&self) -> GroupField {
        let mut out = self.kappa.clone();
        for (o, b) in out.as_mut_slice().iter_mut().zip(self.planck.as_slice()) {
            *o *= 4.0 * PI * b;
        }
        out
    }
}

/// A multigroup radiation model that can be driven by [`solve_coupled_step`].
///
/// `emission` arguments are isotropic emission rates `4 pi kappa_g B_g`
/// [Jerk cm^-3 ns^-1] per (group, cell).
pub trait RadiationSolver {
    type Output;

    /// Called once per nonlinear iteration with the frozen coefficients.
    fn freeze(&mut self, coefficients: &FrozenCoefficients) -> Result<()>;

    /// Solve with previous-time data and boundary sources.
    fn solve(&mut self, emission: &GroupField) -> Result<Self::Output>;

    /// Solve with zero previous-time data and no boundary sources; writes the
    /// group energy densities into `energy`.
    fn solve_homogeneous(&mut self, emission: &GroupField, energy: &mut GroupField) -> Result<()>;

    fn energy<'o>(&self, output: &'o Self::Output) -> &'o GroupField;

    /// Relative change of any internally lagged quantity since the previous
    /// call to `solve`.
    fn lag_change(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingOptions {
    /// Convergence threshold on `max |dT| / T`.
    pub tol: f64,
    pub max_iter: usize,
    pub gmres: GmresOptions,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            gmres: GmresOptions {
                rel_tol: 1e-11,
                abs_tol: 0.0,
                restart: 40,
                max_iter: 400,
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CouplingStats {
    pub iterations: usize,
    /// `max |dT| / T` after each iteration.
    pub changes: Vec<f64>,
    /// Max-norm of the material energy balance residual at the start of each
    /// iteration [Jerk cm^-3 ns^-1].
    pub residuals: Vec<f64>,
    pub krylov_iterations: usize,
}

/// Advance the coupled system one backward-Euler step.
///
/// `t_prev` is the material temperature at the old time level and `t_guess`
/// the starting iterate. Returns the new temperature and the radiation
/// solution consistent with it.
pub fn solve_coupled_step<S: RadiationSolver>(
    solver: &mut S,
    material: &Material,
    t_prev: &[f64],
    t_guess: &[f64],
    dt: f64,
    opts: &CouplingOptions,
) -> Result<(Vec<f64>, S::Output, CouplingStats)> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!(
            "time step must be positive (got {dt})"
        )));
    }
    let cells = t_prev.len();
    let groups = material.num_groups();
    let c = material.constants.c;
    let cv_dt = material.eos.cv / dt;
    let mut t_star = t_guess.to_vec();
    let mut stats = CouplingStats::default();
    let mut hom_energy = GroupField::zeros(groups, cells);
    let mut source = GroupField::zeros(groups, cells);

    for iter in 1..=opts.max_iter {
        let coef = FrozenCoefficients::evaluate(material, &t_star);
        solver.freeze(&coef)?;
        let emission0 = coef.emission();
        let out0 = solver.solve(&emission0)?;
        let energy0 = solver.energy(&out0);

        let mut residual = vec![0.0; cells];
        let mut slope = GroupField::zeros(groups, cells);
        let mut diag = vec![cv_dt; cells];
        let mut full_diag = vec![cv_dt; cells];
        for cell in 0..cells {
            let mut r = -cv_dt * (t_star[cell] - t_prev[cell]);
            for g in 0..groups {
                let k = coef.kappa.get(g, cell);
                r += k * c * energy0.get(g, cell) - emission0.get(g, cell);
                let s = 4.0 * PI * k * coef.dplanck.get(g, cell);
                slope.set(g, cell, s);
                full_diag[cell] += s;
                diag[cell] += s / (1.0 + c * k * dt);
            }
            residual[cell] = r;
        }
        let res_norm = residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        stats.residuals.push(res_norm);

        let mut delta = vec![0.0; cells];
        let output = if res_norm > 0.0 {
            let kstats = gmres(
                |x, y| {
                    for g in 0..groups {
                        let src = source.group_mut(g);
                        let s = slope.group(g);
                        for cell in 0..cells {
                            src[cell] = s[cell] * x[cell];
                        }
                    }
                    solver.solve_homogeneous(&source, &mut hom_energy)?;
                    for cell in 0..cells {
                        let mut v = full_diag[cell] * x[cell];
                        for g in 0..groups {
                            v -= c * coef.kappa.get(g, cell) * hom_energy.get(g, cell);
                        }
                        y[cell] = v;
                    }
                    Ok(())
                },
                |r, z| {
                    for ((zi, ri), d) in z.iter_mut().zip(r).zip(&diag) {
                        *zi = ri / d;
                    }
                },
                &residual,
                &mut delta,
                opts.gmres,
            )?;
            stats.krylov_iterations += kstats.iterations;
            let mut emission = emission0;
            for g in 0..groups {
                let e = emission.group_mut(g);
                let s = slope.group(g);
                for cell in 0..cells {
                    e[cell] += s[cell] * delta[cell];
                }
            }
            solver.solve(&emission)?
        } else {
            out0
        };

        let mut change = 0.0_f64;
        for (t, d) in t_star.iter_mut().zip(&delta) {
            let old = *t;
            *t = (old + d).max(0.1 * old);
            change = change.max(((*t - old) / *t).abs());
        }
        stats.iterations = iter;
        stats.changes.push(change);
        log::trace!("coupling iteration {iter}: dT/T = {change:.3e}, residual = {res_norm:.3e}");
        if !change.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: change,
            });
        }
        if change < opts.tol && solver.lag_change() < opts.tol {
            return Ok((t_star, output, stats));
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: stats.changes.last().copied().unwrap_or(f64::NAN),
    })
}
