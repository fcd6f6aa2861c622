//! Material properties: spectral and group opacities, group Planckian
//! emission, and the linear material equation of state.
//!
//! Units are cm / ns / KeV / Jerk throughout. Group integrals are done in
//! the dimensionless variable `x = nu / T` with composite Gauss-Legendre
//! panels. The Planck normalization is fixed so that summing `4 pi B_g`
//! over a spectrum extending to infinity gives exactly `a_R c T^4`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{gauss_legendre, FrequencyGrid};

pub const SPEED_OF_LIGHT: f64 = 29.979_245_8;
pub const RADIATION_CONSTANT: f64 = 0.013_72;

/// Temperatures below this are clamped inside opacity/emission evaluation.
pub const TEMPERATURE_FLOOR: f64 = 1e-6;

/// `int_0^inf x^3 / (e^x - 1) dx`.
const PLANCK_TOTAL: f64 = PI * PI * PI * PI / 15.0;

/// Integrals are cut off this far above the lower group edge (in `x`); the
/// neglected weight is below `e^-60` relative.
const WINDOW: f64 = 60.0;
const PANEL_WIDTH: f64 = 2.0;
const PANEL_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Speed of light [cm/ns].
    pub c: f64,
    /// Radiation constant [Jerk cm^-3 KeV^-4].
    pub a_r: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            c: SPEED_OF_LIGHT,
            a_r: RADIATION_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpacityModel {
    /// `kappa_nu = 27 / nu^3 (1 - exp(-nu / T))`, Planck-averaged per group.
    FleckCummings,
    /// Gray constant opacity [cm^-1].
    Constant(f64),
}

/// Spectral opacity of the Fleck-Cummings material [cm^-1].
pub fn spectral_opacity(nu: f64, temperature: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!(
            "spectral opacity is singular at nu = {nu}"
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be positive (got {temperature})"
        )));
    }
    Ok(27.0 / (nu * nu * nu) * -(-nu / temperature).exp_m1())
}

/// Linear equation of state `eps = c_v T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearEos {
    pub cv: f64,
}

impl LinearEos {
    /// `c_v = factor * a_R * T_ref^3`.
    pub fn scaled(factor: f64, a_r: f64, reference_temperature: f64) -> Self {
        Self {
            cv: factor * a_r * reference_temperature.powi(3),
        }
    }

    pub fn material_energy(&self, temperature: f64) -> Result<f64> {
        if !(temperature > 0.0) {
            return Err(Error::Domain(format!(
                "temperature must be positive (got {temperature})"
            )));
        }
        Ok(self.cv * temperature)
    }

    pub fn temperature(&self, energy: f64) -> Result<f64> {
        if !(energy > 0.0) {
            return Err(Error::Domain(format!(
                "material energy must be positive (got {energy})"
            )));
        }
        Ok(energy / self.cv)
    }
}

/// Composite Gauss-Legendre rule on `[a, b]`, panels no wider than
/// `PANEL_WIDTH`.
#[derive(Debug, Clone)]
struct PanelRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PanelRule {
    fn new() -> Self {
        let (nodes, weights) = gauss_legendre(PANEL_ORDER);
        Self { nodes, weights }
    }

    /// Integrates two functions sharing the same nodes.
    fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> [f64; 2]) -> [f64; 2] {
        if b <= a {
            return [0.0; 2];
        }
        let panels = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        let mut total = [0.0; 2];
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let mut s = [0.0; 2];
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                let [u, v] = f(mid + 0.5 * h * x);
                s[0] += w * u;
                s[1] += w * v;
            }
            total[0] += 0.5 * h * s[0];
            total[1] += 0.5 * h * s[1];
        }
        total
    }
}

/// Planck integrals of one group at one temperature, scaled by `e^a`
/// where `a` is the lower group edge in units of `T`.
#[derive(Debug, Clone, Copy)]
struct ScaledGroupIntegrals {
    /// `e^a int_a^b x^3 / (e^x - 1) dx`
    emission: f64,
    /// `e^a int_a^b x^4 e^x / (e^x - 1)^2 dx`
    derivative: f64,
    a: f64,
    b: f64,
}

/// Per-group material coefficients at one temperature.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GroupCoefficients {
    /// Group opacity [cm^-1].
    pub kappa: f64,
    /// Group Planckian [Jerk cm^-2 ns^-1 sr^-1].
    pub planck: f64,
    /// `d B_g / dT`.
    pub dplanck: f64,
}

/// Material model: opacity law, emission spectrum and equation of state.
#[derive(Debug, Clone)]
pub struct Material {
    pub constants: PhysicalConstants,
    pub groups: FrequencyGrid,
    pub opacity: OpacityModel,
    pub eos: LinearEos,
    rule: PanelRule,
}

impl Material {
    pub fn new(
        constants: PhysicalConstants,
        groups: FrequencyGrid,
        opacity: OpacityModel,
        eos: LinearEos,
    ) -> Self {
        Self {
            constants,
            groups,
            opacity,
            eos,
            rule: PanelRule::new(),
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.num_groups()
    }

    /// `a_R c / (4 pi) * 15 / pi^4`: converts `T^4 int x^3/(e^x-1)` to `B_g`.
    fn planck_prefactor(&self) -> f64 {
        self.constants.a_r * self.constants.c / (4.0 * PI * PLANCK_TOTAL)
    }

    fn scaled_integrals(&self, rule: &PanelRule, g: usize, t: f64) -> ScaledGroupIntegrals {
        let (lo, hi) = self.groups.group(g);
        let a = lo / t;
        let b = hi / t;
        let top = b.min(a + WINDOW);
        let [emission, derivative] = rule.integrate(a, top, |x| {
            // x^4 e^x / (e^x - 1)^2 = x^4 e^-x / (1 - e^-x)^2
            let d = -(-x).exp_m1();
            let e = (-(x - a)).exp();
            let x3 = x * x * x;
            [x3 * e / d, x3 * x * e / (d * d)]
        });
        ScaledGroupIntegrals {
            emission,
            derivative,
            a,
            b,
        }
    }

    /// Group Planckian `B_g(T)`.
    pub fn planck(&self, t: f64, g: usize) -> f64 {
        let t = t.max(TEMPERATURE_FLOOR);
        let s = self.scaled_integrals(&self.rule, g, t);
        self.planck_prefactor() * t.powi(4) * (-s.a).exp() * s.emission
    }

    /// Planck-weighted group opacity.
    pub fn group_opacity(&self, t: f64, g: usize) -> f64 {
        let t = t.max(TEMPERATURE_FLOOR);
        match self.opacity {
            OpacityModel::Constant(k) => k,
            OpacityModel::FleckCummings => {
                let s = self.scaled_integrals(&self.rule, g, t);
                fc_group_opacity(t, &s)
            }
        }
    }

    /// Opacity, Planckian and its temperature derivative for every group.
    pub fn coefficients(&self, t: f64, out: &mut [GroupCoefficients]) {
        let t = t.max(TEMPERATURE_FLOOR);
        let rule = &self.rule;
        let pref = self.planck_prefactor();
        let t3 = t * t * t;
        for (g, slot) in out.iter_mut().enumerate().take(self.num_groups()) {
            let s = self.scaled_integrals(rule, g, t);
            let scale = (-s.a).exp();
            let kappa = match self.opacity {
                OpacityModel::Constant(k) => k,
                OpacityModel::FleckCummings => fc_group_opacity(t, &s),
            };
            *slot = GroupCoefficients {
                kappa,
                planck: pref * t3 * t * scale * s.emission,
                dplanck: pref * t3 * scale * s.derivative,
            };
        }
    }

    pub fn coefficients_vec(&self, t: f64) -> Vec<GroupCoefficients> {
        let mut out = vec![GroupCoefficients::default(); self.num_groups()];
        self.coefficients(t, &mut out);
        out
    }

    /// Total emission `sum_g 4 pi B_g(T)`.
    pub fn total_emission(&self, t: f64) -> f64 {
        (0..self.num_groups())
            .map(|g| 4.0 * PI * self.planck(t, g))
            .sum()
    }
}

fn fc_group_opacity(t: f64, s: &ScaledGroupIntegrals) -> f64 {
    // kappa_nu B_nu is proportional to 27 e^-x, so the numerator is exact.
    let numerator = -(-(s.b - s.a)).exp_m1();
    if s.emission <= 0.0 {
        // Vanishing-width window; fall back to the spectral value at the edge.
        let nu = (s.a * t).max(1e-300);
        return 27.0 / (nu * nu * nu) * -(-s.a).exp_m1();
    }
    27.0 / (t * t * t) * numerator / s.emission
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fc_material() -> Material {
        let c = PhysicalConstants::default();
        Material::new(
            c,
            FrequencyGrid::fleck_cummings(),
            OpacityModel::FleckCummings,
            LinearEos::scaled(0.5917, c.a_r, 1.0),
        )
    }

    /// Adaptive Simpson, independent of the panel rule.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            let m = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
        }
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth > 50 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, left, 0.5 * tol, depth + 1) + rec(f, m, b, right, 0.5 * tol, depth + 1)
        }
        rec(f, a, b, simpson(f, a, b), tol, 0)
    }

    /// `int_a^b x^3/(e^x-1) dx` from the exponential series
    /// `sum_n int x^3 e^(-n x) dx`, term-wise closed form.
    fn series_integral(a: f64, b: f64) -> f64 {
        let tail = |x: f64| -> f64 {
            let mut sum = 0.0;
            for n in 1..200_000u32 {
                let n = n as f64;
                let term = (-n * x).exp()
                    * (x * x * x / n
                        + 3.0 * x * x / (n * n)
                        + 6.0 * x / (n * n * n)
                        + 6.0 / (n * n * n * n));
                sum += term;
                if term < 1e-18 * sum {
                    break;
                }
            }
            sum
        };
        tail(a) - tail(b)
    }

    fn planck_integrand(x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            x * x * x / x.exp_m1()
        }
    }

    #[test]
    fn spectral_opacity_values() {
        assert_relative_eq!(
            spectral_opacity(1.0, 1.0).unwrap(),
            27.0 * (1.0 - (-1.0f64).exp()),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            spectral_opacity(1.0, 1.0).unwrap(),
            17.06724,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            spectral_opacity(3.0, 1.0).unwrap(),
            0.9502129,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            spectral_opacity(2.0, 1e-9).unwrap(),
            27.0 / 8.0,
            max_relative = 1e-14
        );
        assert!(spectral_opacity(0.0, 1.0).is_err());
    }

    #[test]
    fn total_emission_matches_stefan_boltzmann() {
        let m = fc_material();
        for &t in &[1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0] {
            let ratio = m.total_emission(t) / (m.constants.a_r * m.constants.c * t.powi(4));
            assert!((ratio - 1.0).abs() < 1e-9, "T = {t}: ratio {ratio}");
        }
    }

    #[test]
    fn single_infinite_group_is_exact() {
        let c = PhysicalConstants::default();
        let m = Material::new(
            c,
            FrequencyGrid::new(&[1e7]).unwrap(),
            OpacityModel::Constant(1.0),
            LinearEos { cv: 1.0 },
        );
        let t = 0.7;
        assert_relative_eq!(
            4.0 * PI * m.planck(t, 0),
            c.a_r * c.c * t.powi(4),
            max_relative = 1e-12
        );
    }

    #[test]
    fn first_group_planckian_against_adaptive_oracle() {
        let m = fc_material();
        let integral = adaptive_simpson(&planck_integrand, 0.0, 0.7075, 1e-14);
        // Taylor check: a^3/3 - a^4/8 + a^5/60 - a^7/5040 with a = 0.7075
        assert!(
            (integral - 0.089_665).abs() < 1e-5,
            "oracle integral {integral}"
        );
        assert_relative_eq!(integral, series_integral(0.0, 0.7075), max_relative = 1e-10);
        let expected = m.constants.a_r * m.constants.c / (4.0 * PI * PLANCK_TOTAL) * integral;
        assert_relative_eq!(m.planck(1.0, 0), expected, max_relative = 1e-10);
    }

    #[test]
    fn panel_rule_agrees_with_adaptive_for_all_groups() {
        let m = fc_material();
        for &t in &[0.05, 0.3, 1.0] {
            for g in 0..m.num_groups() {
                let (lo, hi) = m.groups.group(g);
                let oracle = series_integral(lo / t, hi / t);
                let pref = m.planck_prefactor() * t.powi(4);
                let value = m.planck(t, g) / pref;
                assert!(
                    (value - oracle).abs() <= 1e-10 * oracle.max(1e-300),
                    "T={t} g={g}: {value} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn constant_opacity_is_its_own_mean() {
        let c = PhysicalConstants::default();
        let m = Material::new(
            c,
            FrequencyGrid::new(&[1e7]).unwrap(),
            OpacityModel::Constant(3.5),
            LinearEos { cv: 1.0 },
        );
        assert_eq!(m.group_opacity(0.4, 0), 3.5);
    }

    #[test]
    fn group_opacity_against_brute_force_quadrature() {
        let m = fc_material();
        let t = 1.0;
        let (lo, hi) = (0.7075, 1.415);
        let n = 10_000;
        let h = (hi - lo) / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let nu = lo + (k as f64 + 0.5) * h;
            let b = nu.powi(3) / (nu / t).exp_m1();
            num += spectral_opacity(nu, t).unwrap() * b * h;
            den += b * h;
        }
        assert_relative_eq!(m.group_opacity(t, 1), num / den, max_relative = 1e-6);
    }

    #[test]
    fn group_opacity_decreases_above_planck_peak() {
        let m = fc_material();
        let kappas: Vec<f64> = (0..m.num_groups())
            .map(|g| m.group_opacity(1.0, g))
            .collect();
        for g in 3..m.num_groups() - 1 {
            assert!(
                kappas[g + 1] < kappas[g],
                "group {g}: {:?}",
                &kappas[g..g + 2]
            );
        }
        assert!(kappas.iter().all(|&k| k > 0.0));
    }

    #[test]
    fn planck_derivative_matches_finite_differences() {
        let m = fc_material();
        for &t in &[0.01, 0.2, 1.0] {
            let coef = m.coefficients_vec(t);
            for g in 0..m.num_groups() {
                let h = 1e-6 * t;
                let fd = (m.planck(t + h, g) - m.planck(t - h, g)) / (2.0 * h);
                assert!(coef[g].dplanck > 0.0 || coef[g].planck == 0.0);
                assert!(
                    (coef[g].dplanck - fd).abs() <= 1e-6 * fd.abs() + 1e-300,
                    "T={t} g={g}: {} vs {fd}",
                    coef[g].dplanck
                );
            }
        }
    }

    #[test]
    fn cold_material_opacities_are_finite() {
        let m = fc_material();
        let coef = m.coefficients_vec(1e-3);
        for c in &coef {
            assert!(c.kappa.is_finite() && c.kappa > 0.0);
            assert!(c.planck >= 0.0 && c.planck.is_finite());
        }
        // high groups approach the spectral value at the lower edge
        assert_relative_eq!(coef[16].kappa, 27.0 / 13.09f64.powi(3), max_relative = 1e-3);
    }

    #[test]
    fn linear_eos() {
        let c = PhysicalConstants::default();
        let eos = LinearEos::scaled(0.5917, c.a_r, 1.0);
        let e = eos.material_energy(1.0).unwrap();
        assert_relative_eq!(e, 8.118124e-3, max_relative = 1e-6);
        assert_relative_eq!(
            eos.temperature(eos.material_energy(0.37).unwrap()).unwrap(),
            0.37
        );
        assert!(eos.material_energy(0.0).is_err());
        assert!(eos.temperature(-1.0).is_err());
    }
}
