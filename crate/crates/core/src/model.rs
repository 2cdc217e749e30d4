//! Hydro production functions, plant and horizon types, and the
//! volume-to-flow conversion.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Megawatts per watt.
const MW_PER_W: f64 = 1e-6;
const SECONDS_PER_DAY: f64 = 86_400.0;
/// m³ per hm³.
const M3_PER_HM3: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid plant parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("invalid plant: linear production coefficient {eps_q} is not positive (head deficit)")]
    HeadDeficit { eps_q: f64 },
}

/// Physical description of a hydro plant with linear forebay and tailwater
/// elevation curves and constant losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalHydroParams {
    /// Gravitational acceleration (m/s²).
    pub g: f64,
    /// Water density (kg/m³).
    pub rho: f64,
    pub eta_g: f64,
    pub eta_t: f64,
    /// Forebay elevation `h_b0 + h_b1 v` (m, m/hm³).
    pub h_b0: f64,
    pub h_b1: f64,
    /// Tailwater elevation `h_t0 + h_t1 q` (m, m per m³/s).
    pub h_t0: f64,
    pub h_t1: f64,
    /// Hydraulic-load loss (m).
    pub h_l: f64,
    /// Atmospheric loss (m).
    pub h_a: f64,
}

impl PhysicalHydroParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field: &'static str, reason: &str| {
            Err(ModelError::InvalidParameter { field, reason: reason.to_string() })
        };
        let all = [
            self.g, self.rho, self.eta_g, self.eta_t, self.h_b0, self.h_b1, self.h_t0, self.h_t1,
            self.h_l, self.h_a,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("*", "non-finite value");
        }
        if self.g <= 0.0 {
            return bad("g", "must be positive");
        }
        if self.rho <= 0.0 {
            return bad("rho", "must be positive");
        }
        if !(self.eta_g > 0.0 && self.eta_g <= 1.0) {
            return bad("eta_g", "must lie in (0, 1]");
        }
        if !(self.eta_t > 0.0 && self.eta_t <= 1.0) {
            return bad("eta_t", "must lie in (0, 1]");
        }
        if self.h_b1 < 0.0 {
            return bad("h_b1", "must be nonnegative");
        }
        if self.h_t1 < 0.0 {
            return bad("h_t1", "must be nonnegative");
        }
        if self.h_l < 0.0 {
            return bad("h_l", "must be nonnegative");
        }
        if self.h_a < 0.0 {
            return bad("h_a", "must be nonnegative");
        }
        Ok(())
    }

    /// `κ = g ρ η_G` (W per (m³/s · m)).
    pub fn kappa(&self) -> f64 {
        self.g * self.rho * self.eta_g
    }

    /// Net head (m) at storage `v` (hm³) and discharge `q` (m³/s).
    pub fn net_head(&self, v: f64, q: f64) -> f64 {
        self.h_b0 + self.h_b1 * v - self.h_t0 - self.h_t1 * q - self.h_l - self.h_a
    }

    /// `κ η_T q h_n(v, q)` in MW.
    pub fn power_mw(&self, v: f64, q: f64) -> f64 {
        self.kappa() * self.eta_t * q * self.net_head(v, q) * MW_PER_W
    }
}

/// Expands the physical production model into its quadratic coefficients
/// (MW over hm³ and m³/s).
pub fn derive_production(phys: &PhysicalHydroParams) -> Result<ProductionQuadratic, ModelError> {
    phys.validate()?;
    let k = phys.kappa() * phys.eta_t * MW_PER_W;
    let head0 = phys.h_b0 - phys.h_t0 - phys.h_l - phys.h_a;
    let p = ProductionQuadratic::constant_efficiency(k * head0, -k * phys.h_t1, k * phys.h_b1);
    if !(p.eps_q > 0.0) {
        return Err(ModelError::HeadDeficit { eps_q: p.eps_q });
    }
    Ok(p)
}

/// Quadratic turbine-efficiency surface over net head (m) and discharge (m³/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub e0: f64,
    pub e_h: f64,
    pub e_q: f64,
    pub e_hq: f64,
    pub e_hh: f64,
    pub e_qq: f64,
}

impl EfficiencyCurve {
    pub fn evaluate(&self, h_n: f64, q: f64) -> f64 {
        self.e0
            + self.e_h * h_n
            + self.e_q * q
            + self.e_hq * h_n * q
            + self.e_hh * h_n * h_n
            + self.e_qq * q * q
    }

    fn hessian(&self) -> Matrix2<f64> {
        Matrix2::new(2.0 * self.e_hh, self.e_hq, self.e_hq, 2.0 * self.e_qq)
    }

    /// Whether the surface is concave (negative semidefinite Hessian).
    pub fn is_concave(&self) -> bool {
        let h = self.hessian();
        h[(0, 0)] <= 0.0 && h[(1, 1)] <= 0.0 && h.determinant() >= 0.0
    }

    /// Point where the gradient vanishes, if the Hessian is nonsingular.
    pub fn stationary_point(&self) -> Option<(f64, f64)> {
        let x = self.hessian().lu().solve(&Vector2::new(-self.e_h, -self.e_q))?;
        Some((x[0], x[1]))
    }
}

/// `P_h = ε_0 + ε_v v + ε_q q + ε_vv v² + ε_qq q² + ε_qv v q` in MW.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProductionQuadratic {
    #[serde(default)]
    pub eps_0: f64,
    #[serde(default)]
    pub eps_v: f64,
    pub eps_q: f64,
    #[serde(default)]
    pub eps_vv: f64,
    pub eps_qq: f64,
    pub eps_qv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Definiteness {
    Concave,
    Indefinite,
    Convex,
}

impl std::fmt::Display for Definiteness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Definiteness::Concave => "concave",
            Definiteness::Indefinite => "indefinite",
            Definiteness::Convex => "convex",
        })
    }
}

impl ProductionQuadratic {
    /// Constant-efficiency form: no constant, linear-in-v or v² terms.
    pub fn constant_efficiency(eps_q: f64, eps_qq: f64, eps_qv: f64) -> Self {
        Self { eps_0: 0.0, eps_v: 0.0, eps_q, eps_vv: 0.0, eps_qq, eps_qv }
    }

    pub fn evaluate(&self, v: f64, q: f64) -> f64 {
        self.eps_0
            + self.eps_v * v
            + self.eps_q * q
            + self.eps_vv * v * v
            + self.eps_qq * q * q
            + self.eps_qv * v * q
    }

    /// Gradient `(∂P/∂v, ∂P/∂q)`.
    pub fn gradient(&self, v: f64, q: f64) -> (f64, f64) {
        (
            self.eps_v + 2.0 * self.eps_vv * v + self.eps_qv * q,
            self.eps_q + 2.0 * self.eps_qq * q + self.eps_qv * v,
        )
    }

    /// Quadratic part `Ĥ` over `x = (v, q)`.
    pub fn h_hat(&self) -> Matrix2<f64> {
        Matrix2::new(self.eps_vv, 0.5 * self.eps_qv, 0.5 * self.eps_qv, self.eps_qq)
    }

    /// Linear part `e` over `x = (v, q)`.
    pub fn e(&self) -> Vector2<f64> {
        Vector2::new(self.eps_v, self.eps_q)
    }

    /// Eigenvalues of `Ĥ`, largest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.eps_vv;
        let b = 0.5 * self.eps_qv;
        let c = self.eps_qq;
        let mean = 0.5 * (a + c);
        let radius = (0.5 * (a - c)).hypot(b);
        (mean + radius, mean - radius)
    }

    pub fn zero_tolerance(&self) -> f64 {
        1e-12 * 1f64.max(self.eps_qq.abs()).max(self.eps_qv.abs())
    }

    pub fn classify(&self) -> Definiteness {
        let tol = self.zero_tolerance();
        let (l1, l2) = self.eigenvalues();
        if l1 <= tol && l2 <= tol {
            Definiteness::Concave
        } else if l1 >= -tol && l2 >= -tol {
            Definiteness::Convex
        } else {
            Definiteness::Indefinite
        }
    }

    pub fn coefficients(&self) -> [f64; 6] {
        [self.eps_0, self.eps_v, self.eps_q, self.eps_vv, self.eps_qq, self.eps_qv]
    }
}

/// `θ = 1e6 / (86400 · days)`: a storage change in hm³ over the period
/// expressed as a mean flow in m³/s.
pub fn theta(days: f64) -> f64 {
    M3_PER_HM3 / (SECONDS_PER_DAY * days)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroPlant {
    pub id: String,
    pub v_min: f64,
    pub v_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub v_initial: f64,
    pub v_final: f64,
    pub production: ProductionQuadratic,
    #[serde(default)]
    pub upstream: Vec<String>,
}

impl HydroPlant {
    /// Fixed storage.
    pub fn is_run_of_river(&self) -> bool {
        self.v_min == self.v_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalPlant {
    pub id: String,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub c1: f64,
    pub c2: f64,
}

impl ThermalPlant {
    pub fn cost(&self, p: f64) -> f64 {
        self.c0 + self.c1 * p + self.c2 * p * p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Period {
    pub days: f64,
    pub load: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gh1() -> ProductionQuadratic {
        ProductionQuadratic::constant_efficiency(0.297, -3.06e-5, 3.84e-4)
    }

    fn gh4() -> ProductionQuadratic {
        ProductionQuadratic::constant_efficiency(0.229, -1.00e-5, 0.0)
    }

    fn phys() -> PhysicalHydroParams {
        PhysicalHydroParams {
            g: 9.81,
            rho: 1000.0,
            eta_g: 0.95,
            eta_t: 0.92,
            h_b0: 50.0,
            h_b1: 4.5e-2,
            h_t0: 10.0,
            h_t1: 3.6e-3,
            h_l: 3.0,
            h_a: 2.0,
        }
    }

    #[test]
    fn derived_coefficients_match_closed_form() {
        let p = derive_production(&phys()).unwrap();
        // κ η_T = 9.81 · 1000 · 0.95 · 0.92 = 8573.94 W per unit, then MW.
        let k = 8573.94e-6;
        assert!((p.eps_q - k * 35.0).abs() < 1e-12);
        assert!((p.eps_qq + k * 3.6e-3).abs() < 1e-15);
        assert!((p.eps_qv - k * 4.5e-2).abs() < 1e-15);
        assert_eq!((p.eps_0, p.eps_v, p.eps_vv), (0.0, 0.0, 0.0));
    }

    #[test]
    fn flat_geometry_gives_linear_production() {
        let mut ph = phys();
        ph.h_t1 = 0.0;
        ph.h_b1 = 0.0;
        let p = derive_production(&ph).unwrap();
        assert_eq!(p.eps_qq, 0.0);
        assert_eq!(p.eps_qv, 0.0);
        assert!(p.eps_q > 0.0);
    }

    #[test]
    fn zero_turbine_efficiency_is_rejected() {
        let mut ph = phys();
        ph.eta_t = 0.0;
        assert!(derive_production(&ph).is_err());
    }

    #[test]
    fn head_deficit_is_rejected() {
        let mut ph = phys();
        ph.h_t0 = 60.0;
        assert!(matches!(derive_production(&ph), Err(ModelError::HeadDeficit { .. })));
    }

    #[test]
    fn production_examples() {
        assert_eq!(gh1().evaluate(241.1, 0.0), 0.0);
        assert!((gh4().evaluate(460.0, 1000.0) - 219.0).abs() < 1e-9);
        let manual = 0.297 * 483.0 - 3.06e-5 * 483.0 * 483.0 + 3.84e-4 * 241.1 * 483.0;
        assert!((gh1().evaluate(241.1, 483.0) - manual).abs() < 1e-12);
    }

    #[test]
    fn matrix_form_reproduces_production() {
        let p = ProductionQuadratic { eps_0: 0.0, eps_v: 0.01, eps_q: 0.3, eps_vv: -1e-5, eps_qq: -2e-5, eps_qv: 3e-4 };
        let x = Vector2::new(231.0, 400.0);
        let mf = (x.transpose() * p.h_hat() * x)[0] + p.e().dot(&x);
        assert!((mf - p.evaluate(231.0, 400.0)).abs() < 1e-10);
    }

    #[test]
    fn eigenvalues_of_concave_plants() {
        assert_eq!(gh4().eigenvalues(), (0.0, -1.00e-5));
        let gh5 = ProductionQuadratic::constant_efficiency(0.198, -4.08e-5, 0.0);
        assert_eq!(gh5.eigenvalues(), (0.0, -4.08e-5));
    }

    #[test]
    fn eigenvalues_match_symmetric_solver() {
        let h = gh1().h_hat();
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        let (l1, l2) = gh1().eigenvalues();
        assert!((l1 - ev[0]).abs() < 1e-16);
        assert!((l2 - ev[1]).abs() < 1e-16);
        assert!(l1 > 0.0 && l2 < 0.0);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(gh1().classify(), Definiteness::Indefinite);
        assert_eq!(gh4().classify(), Definiteness::Concave);
        assert_eq!(ProductionQuadratic::default().classify(), Definiteness::Concave);
        let convex = ProductionQuadratic { eps_vv: 1e-5, eps_qq: 2e-5, ..Default::default() };
        assert_eq!(convex.classify(), Definiteness::Convex);
    }

    #[test]
    fn theta_examples() {
        assert!((theta(31.0) - 0.373357).abs() < 1e-6);
        assert!((theta(30.0) - 0.385802).abs() < 1e-6);
        assert_eq!(theta(1e6 / 86400.0), 1.0);
    }

    fn fig1_curve() -> EfficiencyCurve {
        EfficiencyCurve {
            e0: -0.21311,
            e_h: 0.022762,
            e_q: 0.0093291,
            e_hq: 0.0000451,
            e_hh: -0.000291,
            e_qq: -0.000041,
        }
    }

    #[test]
    fn efficiency_curve_examples() {
        assert_eq!(EfficiencyCurve::default().evaluate(45.0, 170.0), 0.0);
        let c = fig1_curve();
        let manual = -0.21311 + 0.022762 * 45.0 + 0.0093291 * 170.0 + 0.0000451 * 45.0 * 170.0
            - 0.000291 * 45.0 * 45.0
            - 0.000041 * 170.0 * 170.0;
        assert!((c.evaluate(45.0, 170.0) - manual).abs() < 1e-12);
        assert!(c.is_concave());
    }

    #[test]
    fn efficiency_curve_stationary_point_is_the_maximum() {
        let c = fig1_curve();
        let (h, q) = c.stationary_point().unwrap();
        // Gradient equations solved by Cramer's rule.
        let (a, b, d) = (2.0 * -0.000291, 0.0000451, 2.0 * -0.000041);
        let det = a * d - b * b;
        let h_ref = (-0.022762 * d + 0.0093291 * b) / det;
        let q_ref = (-0.0093291 * a + 0.022762 * b) / det;
        assert!((h - h_ref).abs() < 1e-9 && (q - q_ref).abs() < 1e-9);
        let peak = c.evaluate(h, q);
        for (dh, dq) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 5.0), (0.0, -5.0)] {
            assert!(c.evaluate(h + dh, q + dq) < peak);
        }
    }

    #[test]
    fn physical_power_matches_quadratic_form() {
        let ph = phys();
        let p = derive_production(&ph).unwrap();
        for (v, q) in [(100.0, 50.0), (241.1, 483.0), (0.0, 10.0)] {
            let direct = ph.power_mw(v, q);
            assert!((p.evaluate(v, q) - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        }
    }
}
