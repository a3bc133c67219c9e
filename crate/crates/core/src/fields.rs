//! Scalar fields over the unit square, serializable for configuration
//! files. Each variant is a closed-form function of (x, y).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A scalar field on the domain, usable as target state, obstacle, or
/// right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Field {
    /// f(x, y) = value.
    Constant { value: f64 },
    /// f(x, y) = scale · sin(πx) sin(πy).
    SinSin { scale: f64 },
    /// f(x, y) = (4π⁴β + 1) sin(πx) sin(πy): the target state whose
    /// unconstrained optimal state is exactly sin(πx) sin(πy) at cost
    /// weight β.
    ManufacturedRhs { beta: f64 },
    /// f(x, y) = base + curvature · ((x−cx)² + (y−cy)²).
    Paraboloid {
        base: f64,
        curvature: f64,
        center: [f64; 2],
    },
}

impl Field {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Field::Constant { value } => value,
            Field::SinSin { scale } => scale * (PI * x).sin() * (PI * y).sin(),
            Field::ManufacturedRhs { beta } => {
                (4.0 * PI.powi(4) * beta + 1.0) * (PI * x).sin() * (PI * y).sin()
            }
            Field::Paraboloid {
                base,
                curvature,
                center,
            } => base + curvature * ((x - center[0]).powi(2) + (y - center[1]).powi(2)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_evaluate_correctly() {
        assert_eq!(Field::Constant { value: 3.5 }.eval(0.2, 0.9), 3.5);
        let s = Field::SinSin { scale: 2.0 };
        assert!((s.eval(0.5, 0.5) - 2.0).abs() <= 1e-15);
        assert!(s.eval(0.0, 0.3).abs() <= 1e-15);
        let m = Field::ManufacturedRhs { beta: 0.5 };
        let expect = 4.0 * PI.powi(4) * 0.5 + 1.0;
        assert!((m.eval(0.5, 0.5) - expect).abs() <= 1e-12);
        let p = Field::Paraboloid {
            base: 0.05,
            curvature: 0.5,
            center: [0.5, 0.5],
        };
        assert!((p.eval(0.5, 0.5) - 0.05).abs() <= 1e-15);
        assert!((p.eval(1.0, 1.0) - (0.05 + 0.25)).abs() <= 1e-15);
    }

    #[test]
    fn serde_round_trip_and_tagging() {
        let f = Field::Paraboloid {
            base: 0.05,
            curvature: 0.5,
            center: [0.5, 0.5],
        };
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"kind\":\"paraboloid\""));
        let back: Field = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);

        let c: Field = serde_json::from_str(r#"{"kind":"constant","value":1.0}"#).unwrap();
        assert_eq!(c, Field::Constant { value: 1.0 });
        // Unknown keys are rejected.
        assert!(
            serde_json::from_str::<Field>(r#"{"kind":"constant","value":1.0,"extra":2}"#).is_err()
        );
    }
}
