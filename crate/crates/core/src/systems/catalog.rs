//! Compiled-in catalog: a subset of the ODEBench systems plus Cart-Pole.
//!
//! Canonical parameter values, initial states and horizons are local choices;
//! default boxes are `[0.5, 2]·canonical`, chaotic systems use `±5%`.

use std::sync::{Arc, OnceLock};

use super::{BasisFn, FieldFn, OdeSystem};
use crate::error::{Error, Result};

pub const CATALOG_VERSION: &str = "dynident-catalog/1";

fn field(f: fn(&[f64], &[f64], &mut [f64])) -> FieldFn {
    Arc::new(f)
}

fn basis(fs: &[fn(&[f64], &mut [f64])]) -> Vec<BasisFn> {
    fs.iter().map(|&f| Arc::new(f) as BasisFn).collect()
}

fn build() -> Result<Vec<OdeSystem>> {
    let mut out = Vec::new();

    // 1D
    out.push(
        OdeSystem::new(
            "ode2",
            "Population growth (naive)",
            1,
            vec![0.5],
            vec![1.0],
            field(|p, x, o| o[0] = p[0] * x[0]),
        )?
        .with_horizon(4.0, 100)
        .with_basis(basis(&[|x, o| o[0] = x[0]])),
    );
    out.push(
        OdeSystem::new(
            "ode3",
            "Population growth with carrying capacity",
            1,
            vec![0.8, 10.0],
            vec![1.0],
            field(|p, x, o| o[0] = p[0] * x[0] * (1.0 - x[0] / p[1])),
        )?
        .with_horizon(10.0, 100),
    );
    out.push(
        OdeSystem::new(
            "ode5",
            "Velocity of a falling object with air resistance",
            1,
            vec![9.81, 0.02],
            vec![0.0],
            field(|p, x, o| o[0] = p[0] - p[1] * x[0] * x[0]),
        )?
        .with_horizon(10.0, 100)
        .with_basis(basis(&[|_, o| o[0] = 1.0, |x, o| o[0] = -x[0] * x[0]])),
    );
    out.push(
        OdeSystem::new(
            "ode6",
            "Autocatalysis with one fixed abundant chemical",
            1,
            vec![1.0, 0.5],
            vec![0.2],
            field(|p, x, o| o[0] = p[0] * x[0] - p[1] * x[0] * x[0]),
        )?
        .with_horizon(10.0, 100)
        .with_basis(basis(&[|x, o| o[0] = x[0], |x, o| o[0] = -x[0] * x[0]])),
    );

    // 2D
    out.push(
        OdeSystem::new(
            "ode24",
            "Harmonic oscillator without damping",
            2,
            vec![1.0],
            vec![1.0, 0.0],
            field(|p, x, o| {
                o[0] = x[1];
                o[1] = -p[0] * x[0];
            }),
        )?
        .with_horizon(10.0, 100),
    );
    out.push(
        OdeSystem::new(
            "ode25",
            "Harmonic oscillator with damping",
            2,
            vec![1.0, 0.3],
            vec![1.0, 0.0],
            field(|p, x, o| {
                o[0] = x[1];
                o[1] = -p[0] * x[0] - p[1] * x[1];
            }),
        )?
        .with_horizon(10.0, 100),
    );
    out.push(
        OdeSystem::new(
            "ode27",
            "Lotka-Volterra simple",
            2,
            vec![1.0, 0.5, 1.0, 0.5],
            vec![1.0, 1.0],
            field(|p, x, o| {
                o[0] = x[0] * (p[0] - p[1] * x[1]);
                o[1] = -x[1] * (p[2] - p[3] * x[0]);
            }),
        )?
        .with_horizon(10.0, 100)
        .with_basis(basis(&[
            |x, o| {
                o[0] = x[0];
                o[1] = 0.0;
            },
            |x, o| {
                o[0] = -x[0] * x[1];
                o[1] = 0.0;
            },
            |x, o| {
                o[0] = 0.0;
                o[1] = -x[1];
            },
            |x, o| {
                o[0] = 0.0;
                o[1] = x[0] * x[1];
            },
        ])),
    );
    out.push(
        OdeSystem::new(
            "ode28",
            "Pendulum without friction",
            2,
            vec![1.0],
            vec![1.0, 0.0],
            field(|p, x, o| {
                o[0] = x[1];
                o[1] = -p[0] * x[0].sin();
            }),
        )?
        .with_horizon(10.0, 100),
    );
    out.push(
        OdeSystem::new(
            "ode31",
            "SIR infection model only for healthy and sick",
            2,
            vec![0.5, 0.2],
            vec![0.9, 0.1],
            field(|p, x, o| {
                let infection = p[0] * x[0] * x[1];
                o[0] = -infection;
                o[1] = infection - p[1] * x[1];
            }),
        )?
        .with_horizon(20.0, 100)
        .with_basis(basis(&[
            |x, o| {
                o[0] = -x[0] * x[1];
                o[1] = x[0] * x[1];
            },
            |x, o| {
                o[0] = 0.0;
                o[1] = -x[1];
            },
        ])),
    );
    out.push(
        OdeSystem::new(
            "ode50",
            "Chemical oscillator model by Schnackenberg",
            2,
            vec![0.2, 1.3],
            vec![1.0, 1.0],
            field(|p, x, o| {
                let r = x[0] * x[0] * x[1];
                o[0] = p[0] + r - x[0];
                o[1] = p[1] - r;
            }),
        )?
        .with_horizon(10.0, 100),
    );

    // 3D / 4D
    out.push(
        OdeSystem::new(
            "ode56",
            "Lorenz equations (chaotic)",
            3,
            vec![10.0, 28.0, 8.0 / 3.0],
            vec![1.0, 1.0, 1.0],
            field(|p, x, o| {
                o[0] = p[0] * (x[1] - x[0]);
                o[1] = p[1] * x[0] - x[0] * x[2] - x[1];
                o[2] = -p[2] * x[2] + x[0] * x[1];
            }),
        )?
        .with_horizon(2.0, 200)
        .chaotic_band(0.05)?,
    );
    out.push(
        OdeSystem::new(
            "ode63",
            "SEIR infection model (proportions)",
            4,
            vec![0.5, 1.0, 0.3],
            vec![0.95, 0.03, 0.02, 0.0],
            field(|p, x, o| {
                let infection = p[1] * x[0] * x[2];
                o[0] = -infection;
                o[1] = -p[0] * x[1] + infection;
                o[2] = p[0] * x[1] - p[2] * x[2];
                o[3] = p[2] * x[2];
            }),
        )?
        .with_horizon(20.0, 100)
        .with_basis(basis(&[
            |x, o| {
                o[0] = 0.0;
                o[1] = -x[1];
                o[2] = x[1];
                o[3] = 0.0;
            },
            |x, o| {
                o[0] = -x[0] * x[2];
                o[1] = x[0] * x[2];
                o[2] = 0.0;
                o[3] = 0.0;
            },
            |x, o| {
                o[0] = 0.0;
                o[1] = 0.0;
                o[2] = -x[2];
                o[3] = x[2];
            },
        ])),
    );
    // State (x, x', alpha, alpha'); parameters (force F, pole mass m_p, pole length l),
    // cart mass 1 and gravity 9.81 fixed so the parameters stay structurally identifiable.
    out.push(
        OdeSystem::new(
            "cartpole",
            "Cart-Pole (inverted pendulum)",
            4,
            vec![1.0, 0.1, 0.5],
            vec![0.0, 0.0, 0.1, 0.0],
            field(|p, x, o| {
                const CART_MASS: f64 = 1.0;
                const GRAVITY: f64 = 9.81;
                let (force, m_p, len) = (p[0], p[1], p[2]);
                let total = CART_MASS + m_p;
                let (sin_a, cos_a) = x[2].sin_cos();
                let temp = (force + m_p * len * x[3] * x[3] * sin_a) / total;
                let alpha_acc = (GRAVITY * sin_a - cos_a * temp)
                    / (len * (4.0 / 3.0 - m_p * cos_a * cos_a / total));
                o[0] = x[1];
                o[1] = temp - m_p * len * alpha_acc * cos_a / total;
                o[2] = x[3];
                o[3] = alpha_acc;
            }),
        )?
        .with_horizon(2.0, 100),
    );
    Ok(out)
}

/// All catalog systems in a stable order.
pub fn catalog() -> &'static [OdeSystem] {
    static CATALOG: OnceLock<Vec<OdeSystem>> = OnceLock::new();
    CATALOG.get_or_init(|| build().expect("catalog definitions are valid"))
}

/// Find a system by id; a bare ODEBench row number (`"27"`) is accepted as `ode27`.
pub fn lookup(id: &str) -> Result<&'static OdeSystem> {
    let key = if id.chars().all(|c| c.is_ascii_digit()) && !id.is_empty() {
        format!("ode{id}")
    } else {
        id.to_string()
    };
    catalog()
        .iter()
        .find(|s| s.id == key)
        .ok_or_else(|| Error::invalid(format!("unknown system id `{id}`")))
}
