//! Built-in example systems, analytic references and synthetic observations.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::flow::{integrate_rk4, reference_trajectory, PolynomialOde, REFERENCE_SUBSTEPS};
use crate::network::ObservationSeries;

/// Default angle noise for synthetic pendulum measurements, in radians.
pub const PENDULUM_NOISE_SIGMA: f64 = 0.005;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// `v' = g - (k/m) v^2`.
pub fn free_fall(m: f64, g: f64, k_drag: f64) -> Result<PolynomialOde> {
    positive("mass", m)?;
    let mut ode = PolynomialOde::zero(1, 2);
    ode.set_term(0, &[0], g)?;
    ode.set_term(0, &[2], -k_drag / m)?;
    Ok(ode)
}

/// `v(t) = sqrt(mg/k) tanh(t sqrt(kg/m))`, the drag solution from rest.
pub fn free_fall_analytic(t: f64, m: f64, g: f64, k_drag: f64) -> Result<f64> {
    positive("mass", m)?;
    positive("drag coefficient", k_drag)?;
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("time must be non-negative, got {t}")));
    }
    Ok((m * g / k_drag).sqrt() * (t * (k_drag * g / m).sqrt()).tanh())
}

/// State `(v, mu)` with `mu = k/m` carried as a constant: `v' = g - mu v^2`, `mu' = 0`.
pub fn free_fall_augmented(g: f64) -> Result<PolynomialOde> {
    let mut ode = PolynomialOde::zero(2, 3);
    ode.set_term(0, &[0, 0], g)?;
    ode.set_term(0, &[2, 1], -1.0)?;
    Ok(ode)
}

/// `x' = y + xy`, `y' = -2x - xy`.
pub fn lotka_volterra() -> PolynomialOde {
    let mut ode = PolynomialOde::zero(2, 2);
    ode.set_term(0, &[0, 1], 1.0).unwrap();
    ode.set_term(0, &[1, 1], 1.0).unwrap();
    ode.set_term(1, &[1, 0], -2.0).unwrap();
    ode.set_term(1, &[1, 1], -1.0).unwrap();
    ode
}

/// `phi'' = -(g/L) sin(phi)` expanded to third order in `phi`.
pub fn pendulum(g: f64, length: f64) -> Result<PolynomialOde> {
    positive("length", length)?;
    let w2 = g / length;
    let mut ode = PolynomialOde::zero(2, 3);
    ode.set_term(0, &[0, 1], 1.0)?;
    ode.set_term(1, &[1, 0], -w2)?;
    ode.set_term(1, &[3, 0], w2 / 6.0)?;
    Ok(ode)
}

/// Trajectory of `phi'' = -(g/L) sin(phi) - c phi'` sampled every `dt`
/// (`steps + 1` states `(phi, phi')`).
pub fn damped_pendulum_trajectory(
    g: f64,
    length: f64,
    damping: f64,
    x0: &[f64],
    dt: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    positive("length", length)?;
    check_dim(2, x0.len())?;
    let w2 = g / length;
    integrate_rk4(
        |x| vec![x[1], -w2 * x[0].sin() - damping * x[1]],
        x0,
        dt,
        steps,
        REFERENCE_SUBSTEPS,
    )
}

/// Rayleigh–Plesset bubble dynamics made polynomial and autonomous.
///
/// State `(x, y, z, s, c)`: radius, its rate, `1/x`, and the drive phase
/// `s = sin(wt)`, `c = cos(wt)`.
#[allow(clippy::too_many_arguments)]
pub fn rayleigh_plesset(
    rho: f64,
    sigma: f64,
    mu: f64,
    omega: f64,
    p_bubble: f64,
    p_ambient: f64,
    p_drive: f64,
) -> Result<PolynomialOde> {
    positive("density", rho)?;
    let mut ode = PolynomialOde::zero(5, 3);
    // x' = y
    ode.set_term(0, &[0, 1, 0, 0, 0], 1.0)?;
    // y'
    ode.set_term(1, &[0, 2, 1, 0, 0], -1.5)?;
    ode.set_term(1, &[0, 0, 1, 0, 0], (p_bubble - p_ambient) / rho)?;
    ode.set_term(1, &[0, 0, 1, 1, 0], p_drive / rho)?;
    ode.set_term(1, &[0, 0, 2, 0, 0], -2.0 * sigma / rho)?;
    ode.set_term(1, &[0, 1, 2, 0, 0], -4.0 * mu / rho)?;
    // z' = -y z^2
    ode.set_term(2, &[0, 1, 2, 0, 0], -1.0)?;
    // s' = w c, c' = -w s
    ode.set_term(3, &[0, 0, 0, 0, 1], omega)?;
    ode.set_term(4, &[0, 0, 0, 1, 0], -omega)?;
    Ok(ode)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    Gaussian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma,
            seed,
        }
    }
}

/// Observations of `states[1..]` at taps `1..`, noisy on the components kept by `mask`.
pub fn observe(
    states: &[Vec<f64>],
    names: Vec<String>,
    mask: &[bool],
    noise: &NoiseSpec,
) -> Result<ObservationSeries> {
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be non-negative, got {}",
            noise.sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = Normal::new(0.0, noise.sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let noisy: Vec<Vec<f64>> = states
        .iter()
        .skip(1)
        .map(|s| {
            s.iter()
                .zip(mask)
                .map(|(v, keep)| match (noise.kind, keep) {
                    (NoiseKind::Gaussian, true) => v + normal.sample(&mut rng),
                    _ => *v,
                })
                .collect()
        })
        .collect();
    let taps: Vec<usize> = (1..states.len()).collect();
    ObservationSeries::from_states(names, &taps, &noisy, mask)
}

/// Reference trajectory of `ode` from `x0`, observed through `mask` with `noise`.
pub fn synthesize(
    ode: &PolynomialOde,
    x0: &[f64],
    dt: f64,
    steps: usize,
    mask: &[bool],
    noise: &NoiseSpec,
) -> Result<ObservationSeries> {
    check_dim(ode.dim(), mask.len())?;
    let states = reference_trajectory(ode, x0, dt, steps)?;
    observe(&states, ObservationSeries::default_names(ode.dim()), mask, noise)
}

/// A registry entry: the ODE together with component names.
#[derive(Clone, Debug)]
pub struct NamedSystem {
    pub name: String,
    pub ode: PolynomialOde,
    pub components: Vec<String>,
}

/// Names accepted by [`build_system`].
pub const SYSTEM_NAMES: &[&str] = &[
    "free_fall",
    "free_fall_augmented",
    "lotka_volterra",
    "pendulum",
    "rayleigh_plesset",
    "zero",
];

/// Default parameters of a registered system.
pub fn default_params(name: &str) -> Result<Vec<(&'static str, f64)>> {
    Ok(match name {
        "free_fall" => vec![("m", 100.0), ("g", 9.8), ("k", 0.392)],
        "free_fall_augmented" => vec![("g", 9.8)],
        "lotka_volterra" => vec![],
        "pendulum" => vec![("g", 9.8), ("L", 0.3)],
        "rayleigh_plesset" => vec![
            ("rho", 1.0),
            ("sigma", 0.1),
            ("mu", 0.01),
            ("omega", 1.0),
            ("pB", 1.0),
            ("p0", 1.0),
            ("pa", 0.5),
        ],
        "zero" => vec![("n", 2.0), ("order", 2.0)],
        _ => return Err(unknown_system(name)),
    })
}

fn unknown_system(name: &str) -> Error {
    Error::InvalidParameter(format!(
        "unknown system {name:?}; known systems: {}",
        SYSTEM_NAMES.join(", ")
    ))
}

/// Builds a registered system, overriding defaults with `params`.
pub fn build_system(name: &str, params: &[(String, f64)]) -> Result<NamedSystem> {
    let mut values = default_params(name)?;
    for (k, v) in params {
        match values.iter_mut().find(|(key, _)| key == k) {
            Some(slot) => slot.1 = *v,
            None => {
                return Err(Error::InvalidParameter(format!(
                    "system {name:?} has no parameter {k:?}"
                )))
            }
        }
    }
    let p = |k: &str| values.iter().find(|(key, _)| *key == k).unwrap().1;
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let (ode, components) = match name {
        "free_fall" => (free_fall(p("m"), p("g"), p("k"))?, names(&["v"])),
        "free_fall_augmented" => (free_fall_augmented(p("g"))?, names(&["v", "mu"])),
        "lotka_volterra" => (lotka_volterra(), names(&["x", "y"])),
        "pendulum" => (pendulum(p("g"), p("L"))?, names(&["phi", "dphi"])),
        "rayleigh_plesset" => (
            rayleigh_plesset(
                p("rho"),
                p("sigma"),
                p("mu"),
                p("omega"),
                p("pB"),
                p("p0"),
                p("pa"),
            )?,
            names(&["x", "y", "z", "s", "c"]),
        ),
        "zero" => {
            let (n, order) = (p("n"), p("order"));
            if n < 1.0 || n.fract() != 0.0 || order < 0.0 || order.fract() != 0.0 {
                return Err(Error::InvalidParameter(
                    "zero system needs integer n >= 1 and order >= 0".into(),
                ));
            }
            let n = n as usize;
            (
                PolynomialOde::zero(n, order as usize),
                ObservationSeries::default_names(n),
            )
        }
        _ => return Err(unknown_system(name)),
    };
    Ok(NamedSystem {
        name: name.to_string(),
        ode,
        components,
    })
}

/// Rows of `P_d` as a dense matrix, convenient for inspecting built systems.
pub fn coefficient_block(ode: &PolynomialOde, d: usize) -> DMatrix<f64> {
    ode.block(d)
}
