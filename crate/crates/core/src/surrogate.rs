//! Convex surrogates of the product-form energy terms.
//!
//! Two constructions are provided. The first replaces a product `f1 * f2` of
//! convex nonnegative functions by `f1(x) f2(y) + f1(y) f2(x)` plus a
//! proximal term: convex, gradient-consistent at `y`, and equal to twice the
//! product there. The second replaces a product constraint `h1 * h2 <= c` by
//! a convex global upper bound that is tight at `y`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::convex::{Expr, Lin};
use crate::error::{Error, Result};
use crate::mission::{MissionSpec, Position3};
use crate::plan::scale;
use crate::scenario::leo_position_at;

/// A scalar function of a vector with its gradient.
pub struct SmoothFn {
    value: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    gradient: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl SmoothFn {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Box::new(gradient),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
}

/// `f1(x) f2(y) + f1(y) f2(x) + (tau / 2) (x - y)^T diag(h) (x - y)`.
pub struct ProductSurrogate {
    f1: SmoothFn,
    f2: SmoothFn,
    y: Vec<f64>,
    f1y: f64,
    f2y: f64,
    tau: f64,
    h: Vec<f64>,
}

pub fn lemma1_surrogate(f1: SmoothFn, f2: SmoothFn, y: Vec<f64>, tau: f64, h: Vec<f64>) -> Result<ProductSurrogate> {
    if h.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: h.len(),
        });
    }
    if h.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("h", "proximal metric must be positive definite"));
    }
    if !(tau >= 0.0) {
        return Err(Error::invalid("tau", "must be >= 0"));
    }
    let f1y = f1.value(&y);
    let f2y = f2.value(&y);
    Ok(ProductSurrogate {
        f1,
        f2,
        y,
        f1y,
        f2y,
        tau,
        h,
    })
}

impl ProductSurrogate {
    pub fn value(&self, x: &[f64]) -> f64 {
        let prox: f64 = x
            .iter()
            .zip(&self.y)
            .zip(&self.h)
            .map(|((a, b), h)| h * (a - b) * (a - b))
            .sum();
        self.f1.value(x) * self.f2y + self.f1y * self.f2.value(x) + 0.5 * self.tau * prox
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g1 = self.f1.gradient(x);
        let g2 = self.f2.gradient(x);
        (0..x.len())
            .map(|i| self.f2y * g1[i] + self.f1y * g2[i] + self.tau * self.h[i] * (x[i] - self.y[i]))
            .collect()
    }
}

/// Upper bound of `h1(x1) h2(x2)`:
/// `0.5 (h1(x1) + h2(x2))^2 - 0.5 (h1(y1)^2 + h2(y2)^2)
///  - h1(y1) h1'(y1) (x1 - y1) - h2(y2) h2'(y2) (x2 - y2)`.
pub struct ProductBound {
    h1: SmoothFn,
    h2: SmoothFn,
    y1: Vec<f64>,
    y2: Vec<f64>,
    h1y: f64,
    h2y: f64,
    g1y: Vec<f64>,
    g2y: Vec<f64>,
}

pub fn lemma2_surrogate(h1: SmoothFn, h2: SmoothFn, y1: Vec<f64>, y2: Vec<f64>) -> ProductBound {
    let h1y = h1.value(&y1);
    let h2y = h2.value(&y2);
    let g1y = h1.gradient(&y1);
    let g2y = h2.gradient(&y2);
    ProductBound {
        h1,
        h2,
        y1,
        y2,
        h1y,
        h2y,
        g1y,
        g2y,
    }
}

impl ProductBound {
    pub fn value(&self, x1: &[f64], x2: &[f64]) -> f64 {
        let a = self.h1.value(x1);
        let b = self.h2.value(x2);
        let lin1: f64 = self.g1y.iter().zip(x1.iter().zip(&self.y1)).map(|(g, (x, y))| g * (x - y)).sum();
        let lin2: f64 = self.g2y.iter().zip(x2.iter().zip(&self.y2)).map(|(g, (x, y))| g * (x - y)).sum();
        0.5 * (a + b) * (a + b) - 0.5 * (self.h1y * self.h1y + self.h2y * self.h2y) - self.h1y * lin1 - self.h2y * lin2
    }

    /// Gradient with respect to `(x1, x2)`, concatenated.
    pub fn gradient(&self, x1: &[f64], x2: &[f64]) -> Vec<f64> {
        let s = self.h1.value(x1) + self.h2.value(x2);
        let mut out: Vec<f64> = self
            .h1
            .gradient(x1)
            .iter()
            .zip(&self.g1y)
            .map(|(g, gy)| s * g - self.h1y * gy)
            .collect();
        out.extend(
            self.h2
                .gradient(x2)
                .iter()
                .zip(&self.g2y)
                .map(|(g, gy)| s * g - self.h2y * gy),
        );
        out
    }
}

/// Proximal weights in working units (Mbit, km).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub tau_relay: f64,
    pub tau_uav_compute: f64,
    /// Families that do not enter the objective.
    pub tau_pipeline: f64,
    pub tau_x: f64,
    pub tau_y: f64,
    /// Floor on the bit factor of the budget bound, as a fraction of the budget.
    pub budget_balance_floor: f64,
}

impl Default for SurrogateParams {
    /// Positions use `1e-6` times the squared 5 km scale. The bit weight is
    /// tuned: at `1e-4` the outer loop crawls along nearly flat relay-energy
    /// directions, at `1e-6` it crawls along the UAV computing ones.
    fn default() -> Self {
        Self {
            tau_relay: 1e-5,
            tau_uav_compute: 1e-5,
            tau_pipeline: 1e-5,
            tau_x: 2.5e-5,
            tau_y: 2.5e-5,
            budget_balance_floor: 0.25,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_relay", self.tau_relay),
            ("tau_uav_compute", self.tau_uav_compute),
            ("tau_pipeline", self.tau_pipeline),
            ("tau_x", self.tau_x),
            ("tau_y", self.tau_y),
            ("budget_balance_floor", self.budget_balance_floor),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be a finite value > 0"));
            }
        }
        Ok(())
    }
}

/// `(tau / 2) (arg - center)^2`.
pub fn proximal(arg: &Lin, center: f64, tau: f64) -> Expr {
    Expr::Square {
        weight: 0.5 * tau,
        arg: arg.clone().shifted(-center),
    }
}

/// Exponent scale of a link in working units: `2^(s L)` with `L` in Mbit.
pub fn rate_exponent_scale(mission: &MissionSpec) -> f64 {
    scale::BITS / mission.slot_bandwidth()
}

/// Horizontal squared distance plus altitude offset, all in km.
fn squared_range(p: (f64, f64), q: &Position3, offset_m: f64) -> f64 {
    let dx = p.0 - q.x / scale::POSITION;
    let dy = p.1 - q.y / scale::POSITION;
    let h = offset_m / scale::POSITION;
    dx * dx + dy * dy + h * h
}

fn squared_range_expr(x: &Lin, y: &Lin, q: &Position3, offset_m: f64, weight: f64) -> Vec<Expr> {
    let h = offset_m / scale::POSITION;
    vec![
        Expr::Square {
            weight,
            arg: x.clone().shifted(-q.x / scale::POSITION),
        },
        Expr::Square {
            weight,
            arg: y.clone().shifted(-q.y / scale::POSITION),
        },
        Expr::Lin(Lin::constant(weight * h * h)),
    ]
}

/// Working-unit expansion of one UAV-to-LEO transmission: bits in Mbit and
/// the UAV position in km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPoint {
    pub bits: f64,
    pub x: f64,
    pub y: f64,
}

/// UAV-to-LEO energy in kJ at frame `n` (1-based), working units.
pub fn relay_energy_kj(mission: &MissionSpec, frame: usize, p: LinkPoint) -> Result<f64> {
    let (c, q) = relay_coefficients(mission, frame)?;
    let s = rate_exponent_scale(mission);
    Ok(c * (p.bits * s * LN_2).exp_m1() * squared_range((p.x, p.y), &q, mission.orbit.altitude_above_uav_m))
}

fn relay_coefficients(mission: &MissionSpec, frame: usize) -> Result<(f64, Position3)> {
    let q = leo_position_at(&mission.orbit, frame)?;
    let c = mission.slot_noise_energy() * scale::POSITION * scale::POSITION
        / (mission.reference_gain * mission.orbit.antenna_gain)
        / scale::ENERGY;
    Ok((c, q))
}

/// Convex surrogate of the UAV-to-LEO energy at frame `n` in kJ, with
/// proximal terms on the bits and both coordinates.
pub fn surrogate_uav_leo_energy(
    mission: &MissionSpec,
    frame: usize,
    bits: &Lin,
    x: &Lin,
    y: &Lin,
    at: LinkPoint,
    tau_bits: f64,
    tau_x: f64,
    tau_y: f64,
) -> Result<Expr> {
    let (c, q) = relay_coefficients(mission, frame)?;
    let s = rate_exponent_scale(mission);
    let hl = mission.orbit.altitude_above_uav_m;
    let d0 = squared_range((at.x, at.y), &q, hl);
    let e0 = (at.bits * s * LN_2).exp_m1();
    let mut terms = vec![Expr::Exp2 {
        weight: c * d0,
        arg: bits.clone().scaled(s),
    }];
    terms.extend(squared_range_expr(x, y, &q, hl, c * e0));
    for (arg, center, tau) in [(bits, at.bits, tau_bits), (x, at.x, tau_x), (y, at.y, tau_y)] {
        if tau > 0.0 && !arg.is_constant() {
            terms.push(proximal(arg, center, tau));
        }
    }
    Ok(Expr::Sum(terms))
}

/// UAV computing energy of all sensors in one frame, in kJ; `bits[k]` in Mbit.
pub fn uav_compute_energy_kj(mission: &MissionSpec, bits: &[f64]) -> f64 {
    let load = cycle_load(mission, bits);
    mission.switched_cap_uav / (mission.frame_s * mission.frame_s) * load.powi(3) / scale::ENERGY
}

fn cycle_load(mission: &MissionSpec, bits: &[f64]) -> f64 {
    mission
        .sensors
        .iter()
        .zip(bits)
        .map(|(s, b)| s.cycles_per_bit_uav * b * scale::BITS)
        .sum()
}

/// Convex surrogate of the per-frame UAV computing energy summed over sensors,
/// in kJ. `bits[k]` are the per-sensor allocations at this frame and
/// `expansion[k]` their expansion values.
pub fn surrogate_uav_comp_energy(mission: &MissionSpec, bits: &[Lin], expansion: &[f64], tau: f64) -> Result<Expr> {
    if bits.len() != mission.sensor_count() || expansion.len() != bits.len() {
        return Err(Error::DimensionMismatch {
            expected: mission.sensor_count(),
            got: bits.len().min(expansion.len()),
        });
    }
    let gamma = mission.switched_cap_uav / (mission.frame_s * mission.frame_s) / scale::ENERGY;
    // Load S in units of 1e6 cycles so the quadratic stays well scaled.
    let s0 = cycle_load(mission, expansion) / scale::BITS;
    let mut load = Lin::default();
    for (s, l) in mission.sensors.iter().zip(bits) {
        load = load.plus(&l.clone().scaled(s.cycles_per_bit_uav));
    }
    let unit = scale::BITS.powi(3);
    let mut terms = vec![
        Expr::Lin(load.clone().scaled(gamma * unit * s0 * s0)),
        Expr::Square {
            weight: gamma * unit * s0,
            arg: load,
        },
    ];
    for (l, &c) in bits.iter().zip(expansion) {
        if !l.is_constant() {
            terms.push(proximal(l, c, tau));
        }
    }
    Ok(Expr::Sum(terms))
}

/// Sensor uplink energy relative to the budget, minus one: `E / eps - 1`.
pub fn budget_function(mission: &MissionSpec, k: usize, p: LinkPoint) -> f64 {
    let (c, q) = budget_coefficients(mission, k);
    let s = rate_exponent_scale(mission);
    c * (p.bits * s * LN_2).exp_m1() * squared_range((p.x, p.y), &q, mission.uav_altitude_m) - 1.0
}

fn budget_coefficients(mission: &MissionSpec, k: usize) -> (f64, Position3) {
    let c = mission.slot_noise_energy() * scale::POSITION * scale::POSITION
        / (mission.reference_gain * mission.energy_budget_j);
    (c, mission.sensors[k].position)
}

/// Convex upper bound of [`budget_function`] for sensor `k` (0-based), tight at
/// `at`. The bit and distance factors are rebalanced before bounding so both
/// contribute comparably; the floor keeps the bound usable when the expansion
/// carries no bits.
pub fn surrogate_budget_constraint(
    mission: &MissionSpec,
    k: usize,
    bits: &Lin,
    x: &Lin,
    y: &Lin,
    at: LinkPoint,
    balance_floor: f64,
) -> Expr {
    let (c, q) = budget_coefficients(mission, k);
    let s = rate_exponent_scale(mission);
    let h = mission.uav_altitude_m;
    let e0 = (at.bits * s * LN_2).exp_m1();
    let u1 = c * e0;
    let u2 = squared_range((at.x, at.y), &q, h);
    let sigma = (u2 / u1.max(balance_floor / u2)).sqrt();
    let a1 = sigma * u1;
    let a2 = u2 / sigma;
    // Derivatives of the rebalanced factors at the expansion.
    let d1 = sigma * c * LN_2 * s * (at.bits * s * LN_2).exp();
    let dx = 2.0 * (at.x - q.x / scale::POSITION) / sigma;
    let dy = 2.0 * (at.y - q.y / scale::POSITION) / sigma;
    let mut inner = vec![Expr::Exp2 {
        weight: sigma * c,
        arg: bits.clone().scaled(s),
    }];
    inner.extend(squared_range_expr(x, y, &q, h, 1.0 / sigma));
    let linear = bits
        .clone()
        .shifted(-at.bits)
        .scaled(-a1 * d1)
        .plus(&x.clone().shifted(-at.x).scaled(-a2 * dx))
        .plus(&y.clone().shifted(-at.y).scaled(-a2 * dy))
        .shifted(-0.5 * (a1 * a1 + a2 * a2) - 1.0);
    Expr::Sum(vec![
        Expr::HalfSquare {
            weight: 1.0,
            inner: Box::new(Expr::Sum(inner)),
        },
        Expr::Lin(linear),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{computation_energy, sensor_to_uav_energy, uav_to_leo_energy};
    use crate::mission::SensorSpec;
    use crate::scenario::{sensor_uav_gain, uav_leo_gain};

    fn mission() -> MissionSpec {
        let sensors = (0..10)
            .map(|k| SensorSpec::new(1e3 * k as f64, 5e3, 1e8))
            .collect();
        MissionSpec::with_defaults(sensors)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn lemma1_square_example() {
        let sq = || SmoothFn::new(|x| x[0] * x[0], |x| vec![2.0 * x[0]]);
        let u = lemma1_surrogate(sq(), sq(), vec![1.0], 0.0, vec![1.0]).unwrap();
        assert_eq!(u.value(&[3.0]), 18.0);
        assert_eq!(u.gradient(&[1.0]), vec![4.0]);
        assert_eq!(u.value(&[1.0]), 2.0);
        assert!(lemma1_surrogate(sq(), sq(), vec![1.0], 1.0, vec![0.0]).is_err());
    }

    #[test]
    fn lemma1_exponential_gradient() {
        let ex = || SmoothFn::new(|x| x[0].exp(), |x| vec![x[0].exp()]);
        let u = lemma1_surrogate(ex(), ex(), vec![0.0], 1.0, vec![1.0]).unwrap();
        let x = 0.5;
        let h = 1e-5;
        let fd = (u.value(&[x + h]) - u.value(&[x - h])) / (2.0 * h);
        assert!(rel(u.gradient(&[x])[0], fd) < 1e-6);
    }

    #[test]
    fn lemma2_hand_example() {
        let id = || SmoothFn::new(|x| x[0], |_| vec![1.0]);
        let g = lemma2_surrogate(id(), id(), vec![1.0], vec![1.0]);
        assert_eq!(g.value(&[2.0], &[2.0]), 5.0);
        assert_eq!(g.value(&[1.0], &[1.0]), 1.0);
        assert_eq!(g.gradient(&[1.0], &[1.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn relay_surrogate_doubles_energy_at_expansion() {
        let m = mission();
        let at = LinkPoint {
            bits: 7.0,
            x: 6.0,
            y: 2.0,
        };
        let e = surrogate_uav_leo_energy(&m, 5, &Lin::var(0, 1.0), &Lin::var(1, 1.0), &Lin::var(2, 1.0), at, 1e-6, 1e-6, 1e-6)
            .unwrap();
        let v = e.eval(&[at.bits, at.x, at.y]);
        let direct = relay_energy_kj(&m, 5, at).unwrap();
        assert!(rel(v, 2.0 * direct) < 1e-12);
        let p = Position3::from_km(6.0, 2.0, m.uav_altitude_m);
        let joules = uav_to_leo_energy(&m, 7e6, uav_leo_gain(&m, 5, &p).unwrap()).unwrap();
        assert!(rel(direct * 1e3, joules) < 1e-10);
    }

    #[test]
    fn compute_surrogate_matches_single_sensor_example() {
        let mut m = mission();
        m.sensors.truncate(1);
        let e = surrogate_uav_comp_energy(&m, &[Lin::var(0, 1.0)], &[1.0], 1e-6).unwrap();
        let joules = computation_energy(&[1e6], &[1550.7], 1e-28, 6.0).unwrap()[0];
        assert!(rel(e.eval(&[1.0]) * 1e3, 2.0 * joules) < 1e-10);
        let zero = surrogate_uav_comp_energy(&m, &[Lin::var(0, 1.0)], &[0.0], 1e-6).unwrap();
        assert_eq!(zero.eval(&[0.0]), 0.0);
    }

    #[test]
    fn budget_bound_is_tight_and_matches_energy() {
        let m = mission();
        let at = LinkPoint {
            bits: 12.0,
            x: 3.0,
            y: 4.0,
        };
        let g = surrogate_budget_constraint(&m, 2, &Lin::var(0, 1.0), &Lin::var(1, 1.0), &Lin::var(2, 1.0), at, 0.25);
        let orig = budget_function(&m, 2, at);
        assert!((g.eval(&[at.bits, at.x, at.y]) - orig).abs() <= 1e-12 * (1.0 + orig.abs()));
        let p = Position3::from_km(3.0, 4.0, m.uav_altitude_m);
        let e = sensor_to_uav_energy(&m, 12e6, sensor_uav_gain(&m, 3, &p).unwrap()).unwrap();
        assert!(rel(orig + 1.0, e / m.energy_budget_j) < 1e-10);
    }

    #[test]
    fn budget_bound_with_zero_bits() {
        let m = mission();
        let at = LinkPoint {
            bits: 0.0,
            x: 2.0,
            y: 5.0,
        };
        let g = surrogate_budget_constraint(&m, 2, &Lin::var(0, 1.0), &Lin::var(1, 1.0), &Lin::var(2, 1.0), at, 0.25);
        assert!((g.eval(&[0.0, 2.0, 5.0]) + 1.0).abs() < 1e-12);
        for b in [1.0, 10.0, 50.0] {
            let q = LinkPoint { bits: b, ..at };
            assert!(g.eval(&[b, 2.0, 5.0]) >= budget_function(&m, 2, q) - 1e-12);
        }
    }
}
