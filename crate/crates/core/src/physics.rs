//! Component physics: temperature decay along pipes, steam and water
//! pressure drops, plant and load energy balances, junction conservation.
//!
//! Every residual used by the optimizer is available as a [`Local`] carrying
//! its value, gradient and Hessian with respect to a small fixed set of
//! state entries.

use thiserror::Error;

use crate::model::{CarrierConstants, Pipe, CONDENSATION_TEMPERATURE as TC};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysicsError {
    #[error("plant temperatures out of phase order: T_in = {t_in} K, T_out = {t_out} K")]
    PhaseOrderViolation { t_in: f64, t_out: f64 },
    #[error("insulation diameters must satisfy 0 < d_a <= d_b <= d_c and coefficients > 0")]
    InvalidGeometry,
    #[error("{0} must be positive")]
    NonpositiveInput(&'static str),
}

/// Per-edge state. Unused fields are zero for edge kinds that lack them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeState {
    /// kg/s
    pub f: f64,
    pub t_in: f64,
    pub t_out: f64,
    pub p_in: f64,
    pub p_out: f64,
    /// Pump boost, return pipes only.
    pub alpha: f64,
    /// Excess heat dissipated at a load.
    pub qe: f64,
    /// Unmet demand at a load.
    pub qs: f64,
}

/// Value, gradient and full symmetric Hessian of a scalar function of `N`
/// local variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Local<const N: usize> {
    pub value: f64,
    pub grad: [f64; N],
    pub hess: [[f64; N]; N],
}

impl<const N: usize> Local<N> {
    fn new(value: f64) -> Self {
        Local {
            value,
            grad: [0.0; N],
            hess: [[0.0; N]; N],
        }
    }

    fn set_hess(&mut self, i: usize, j: usize, v: f64) {
        self.hess[i][j] = v;
        self.hess[j][i] = v;
    }
}

/// Wall and insulation build-up of a pipe, for computing its heat-loss
/// coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatLossParams {
    /// Forced convection, carrier to inner wall, W/(m²·K).
    pub alpha_a: f64,
    /// Natural convection at the outer surface, W/(m²·K).
    pub alpha_b: f64,
    /// Radiation at the outer surface, W/(m²·K).
    pub alpha_c: f64,
    /// Wall conductivity, W/(m·K).
    pub k_a: f64,
    /// Insulation conductivity, W/(m·K).
    pub k_b: f64,
    /// Inner pipe diameter.
    pub d_a: f64,
    /// Outer pipe diameter.
    pub d_b: f64,
    /// Outer insulation diameter.
    pub d_c: f64,
}

/// Per-length thermal conductance from carrier to ambient, W/(m·K): inner
/// convection, wall and insulation conduction, outer convection plus
/// radiation, in series.
pub fn heat_loss_coefficient(p: &HeatLossParams) -> Result<f64, PhysicsError> {
    use std::f64::consts::PI;
    let positive = [p.alpha_a, p.alpha_b + p.alpha_c, p.k_a, p.k_b, p.d_a]
        .iter()
        .all(|&v| v > 0.0 && v.is_finite());
    if !positive || p.alpha_b < 0.0 || p.alpha_c < 0.0 || p.d_b < p.d_a || p.d_c < p.d_b {
        return Err(PhysicsError::InvalidGeometry);
    }
    let resistance = 1.0 / (p.alpha_a * PI * p.d_a)
        + (p.d_b / p.d_a).ln() / (2.0 * PI * p.k_a)
        + (p.d_c / p.d_b).ln() / (2.0 * PI * p.k_b)
        + 1.0 / (PI * p.d_c * (p.alpha_b + p.alpha_c));
    Ok(1.0 / resistance)
}

/// Outlet temperature of a pipe of length `length` cooling towards `t_ext`.
/// Zero or negative flow returns the ambient temperature.
pub fn pipe_outlet_temperature(t_in: f64, f: f64, length: f64, gamma: f64, c: f64, t_ext: f64) -> f64 {
    if length == 0.0 {
        return t_in;
    }
    if f <= 0.0 {
        return t_ext;
    }
    t_ext + (t_in - t_ext) * (-length * gamma / (c * f)).exp()
}

/// Pipe temperature residual `T_out - T_ext - (T_in - T_ext) exp(-Lγ/(cf))`
/// over `(f, T_in, T_out)`.
pub fn pipe_temperature_local(s: &EdgeState, pipe: &Pipe, c: f64, t_ext: f64) -> Local<3> {
    let a = pipe.length * pipe.heat_loss_coeff / c;
    let (f, dt) = (s.f, s.t_in - t_ext);
    let mut r = Local::new(0.0);
    r.grad[2] = 1.0;
    if f <= 0.0 {
        r.value = s.t_out - t_ext;
        return r;
    }
    let e = (-a / f).exp();
    r.value = s.t_out - t_ext - dt * e;
    let de = e * a / (f * f);
    r.grad[0] = -dt * de;
    r.grad[1] = -e;
    r.set_hess(0, 0, -dt * e * (a * a / f.powi(4) - 2.0 * a / f.powi(3)));
    r.set_hess(0, 1, -de);
    r
}

/// Steam pressure residual in Pa² over `(f, T_in, T_out, p_in, p_out)`:
/// `p_out² - p_in² + λR/(A²d) f|f| (T_ext L + (c f/γ)(T_in - T_out))`.
pub fn steam_pressure_local(s: &EdgeState, pipe: &Pipe, r_steam: f64, c_steam: f64, t_ext: f64) -> Local<5> {
    let area = pipe.area();
    let k = pipe.friction_factor * r_steam / (area * area * pipe.diameter);
    let b = t_ext * pipe.length;
    let m = c_steam / pipe.heat_loss_coeff;
    let d = s.t_in - s.t_out;
    let f = s.f;
    let fa = f.abs();
    let g = f * fa;
    let mut r = Local::new(s.p_out * s.p_out - s.p_in * s.p_in + k * g * (b + m * f * d));
    r.grad[0] = k * (2.0 * fa * b + 3.0 * g * m * d);
    r.grad[1] = k * g * f * m;
    r.grad[2] = -k * g * f * m;
    r.grad[3] = -2.0 * s.p_in;
    r.grad[4] = 2.0 * s.p_out;
    r.set_hess(0, 0, k * (2.0 * f.signum() * b + 6.0 * fa * m * d));
    r.set_hess(0, 1, 3.0 * k * g * m);
    r.set_hess(0, 2, -3.0 * k * g * m);
    r.set_hess(3, 3, -2.0);
    r.set_hess(4, 4, 2.0);
    r
}

pub fn steam_pressure_residual(s: &EdgeState, pipe: &Pipe, r_steam: f64, c_steam: f64, t_ext: f64) -> f64 {
    steam_pressure_local(s, pipe, r_steam, c_steam, t_ext).value
}

/// Water pressure residual in Pa over `(f, p_in, p_out, α)`:
/// `p_out - p_in - α + f|f| λL/(2A²dρ_w)`.
pub fn water_pressure_local(s: &EdgeState, pipe: &Pipe, rho_water: f64) -> Local<4> {
    let area = pipe.area();
    let kappa = pipe.friction_factor * pipe.length / (2.0 * area * area * pipe.diameter * rho_water);
    let f = s.f;
    let mut r = Local::new(s.p_out - s.p_in - s.alpha + f * f.abs() * kappa);
    r.grad = [2.0 * f.abs() * kappa, -1.0, 1.0, -1.0];
    r.set_hess(0, 0, 2.0 * f.signum() * kappa);
    r
}

pub fn water_pressure_residual(s: &EdgeState, pipe: &Pipe, rho_water: f64) -> f64 {
    water_pressure_local(s, pipe, rho_water).value
}

/// Heat added per kilogram when water at `t_in` becomes steam at `t_out`.
fn vaporization_enthalpy(t_in: f64, t_out: f64, c: &CarrierConstants) -> f64 {
    c.c_water * (TC - t_in) + c.latent_heat + c.c_steam * (t_out - TC)
}

/// Thermal power delivered by a plant heating water at `t_in` to steam at
/// `t_out`, W.
pub fn plant_power(f: f64, t_in: f64, t_out: f64, c: &CarrierConstants) -> Result<f64, PhysicsError> {
    if t_in > TC || t_out < TC {
        return Err(PhysicsError::PhaseOrderViolation { t_in, t_out });
    }
    Ok(f * vaporization_enthalpy(t_in, t_out, c))
}

/// Plant power over `(f, T_in, T_out)` without the phase check.
pub fn plant_power_local(s: &EdgeState, c: &CarrierConstants) -> Local<3> {
    let mut r = Local::new(s.f * vaporization_enthalpy(s.t_in, s.t_out, c));
    r.grad = [
        vaporization_enthalpy(s.t_in, s.t_out, c),
        -c.c_water * s.f,
        c.c_steam * s.f,
    ];
    r.set_hess(0, 1, -c.c_water);
    r.set_hess(0, 2, c.c_steam);
    r
}

/// Load balance residual in W over `(f, T_in, T_out, QE, QS)`:
/// power released by condensing `f` minus `Q + QE - QS`.
pub fn load_power_local(s: &EdgeState, demand: f64, c: &CarrierConstants) -> Local<5> {
    let h = vaporization_enthalpy(s.t_out, s.t_in, c);
    let mut r = Local::new(s.f * h - demand - s.qe + s.qs);
    r.grad = [h, c.c_steam * s.f, -c.c_water * s.f, -1.0, 1.0];
    r.set_hess(0, 1, c.c_steam);
    r.set_hess(0, 2, -c.c_water);
    r
}

pub fn load_power_residual(s: &EdgeState, demand: f64, c: &CarrierConstants) -> f64 {
    load_power_local(s, demand, c).value
}

/// Inflow minus outflow at a junction, kg/s.
pub fn junction_mass_residual(incoming: &[EdgeState], outgoing: &[EdgeState]) -> f64 {
    incoming.iter().map(|s| s.f).sum::<f64>() - outgoing.iter().map(|s| s.f).sum::<f64>()
}

/// Enthalpy inflow minus outflow at a junction, W. Each edge is paired with
/// the heat capacity of the carrier at the end touching the junction.
pub fn junction_energy_residual(incoming: &[(EdgeState, f64)], outgoing: &[(EdgeState, f64)]) -> f64 {
    incoming.iter().map(|(s, c)| s.f * c * s.t_out).sum::<f64>()
        - outgoing.iter().map(|(s, c)| s.f * c * s.t_in).sum::<f64>()
}

/// `T_in - T_junction` for every edge leaving a junction.
pub fn mixing_residuals(t_junction: f64, outgoing: &[EdgeState]) -> Vec<f64> {
    outgoing.iter().map(|s| s.t_in - t_junction).collect()
}

/// Ideal-gas steam density, kg/m³.
pub fn steam_density(p: f64, t: f64, r_steam: f64) -> Result<f64, PhysicsError> {
    if !(p > 0.0) {
        return Err(PhysicsError::NonpositiveInput("pressure"));
    }
    if !(t > 0.0) {
        return Err(PhysicsError::NonpositiveInput("temperature"));
    }
    Ok(p / (r_steam * t))
}
