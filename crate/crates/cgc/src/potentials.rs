//! Potential pairs: the input data for the d'Alembert construction.
//!
//! A potential pair is two loop-algebra-valued 1-forms, one in each axis
//! coordinate, with bounded lambda degree: powers <= 1 on the u axis and
//! powers >= -1 on the v axis. Coefficient functions are polynomials in
//! the axis coordinate.

use crate::error::{Error, Result};
use crate::loop_algebra::LoopMatrix;
use crate::mat2::{c, e1, e2, Mat2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    U,
    V,
}

/// One term `matrix * coord^coord_degree * lambda^power`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTerm {
    pub power: i32,
    pub coord_degree: u32,
    pub matrix: Mat2,
}

/// A 1-form on one axis interval, valued in the twisted loop Lie algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisPotential {
    pub axis: Axis,
    pub terms: Vec<PotentialTerm>,
}

impl AxisPotential {
    pub fn new(axis: Axis, terms: Vec<PotentialTerm>) -> Self {
        AxisPotential { axis, terms }
    }

    /// Coefficient loop at a coordinate value.
    pub fn eval(&self, x: f64) -> LoopMatrix {
        LoopMatrix::from_terms(
            self.terms
                .iter()
                .map(|t| (t.power, t.matrix * c(x.powi(t.coord_degree as i32), 0.0))),
        )
    }

    /// Coefficient matrix of a fixed lambda power, as a function of the
    /// coordinate.
    pub fn lambda_coefficient(&self, power: i32, x: f64) -> Mat2 {
        let mut m = Mat2::zeros();
        for t in self.terms.iter().filter(|t| t.power == power) {
            m += t.matrix * c(x.powi(t.coord_degree as i32), 0.0);
        }
        m
    }

    pub fn min_power(&self) -> Option<i32> {
        self.terms.iter().map(|t| t.power).min()
    }

    pub fn max_power(&self) -> Option<i32> {
        self.terms.iter().map(|t| t.power).max()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl Default for Domain {
    fn default() -> Self {
        Domain {
            u: (0.0, 2.0),
            v: (0.0, 2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialPair {
    pub eta_plus: AxisPotential,
    pub eta_minus: AxisPotential,
    pub domain: Domain,
}

impl PotentialPair {
    /// Substitute lambda -> s * lambda: every lambda^p coefficient is
    /// scaled by s^p. The frame of the reindexed pair is the original
    /// frame evaluated at s * lambda (the associated family at the
    /// potential level).
    pub fn reindexed(&self, s: f64) -> PotentialPair {
        let scale_axis = |p: &AxisPotential| AxisPotential {
            axis: p.axis,
            terms: p
                .terms
                .iter()
                .map(|t| PotentialTerm {
                    power: t.power,
                    coord_degree: t.coord_degree,
                    matrix: t.matrix * c(s.powi(t.power), 0.0),
                })
                .collect(),
        };
        PotentialPair {
            eta_plus: scale_axis(&self.eta_plus),
            eta_minus: scale_axis(&self.eta_minus),
            domain: self.domain,
        }
    }
}

/// Points where the pointwise regularity condition fails: the (1,2)
/// entry of the top coefficient drops below threshold.
#[derive(Clone, Debug, Default)]
pub struct RegularityReport {
    pub u_failures: Vec<f64>,
    pub v_failures: Vec<f64>,
}

impl RegularityReport {
    pub fn is_empty(&self) -> bool {
        self.u_failures.is_empty() && self.v_failures.is_empty()
    }
}

const REGULARITY_EPS: f64 = 1e-12;

/// Builtin catalog: the two example potentials.
pub fn builtin(name: &str) -> Result<PotentialPair> {
    // -e1 = [[0,-1],[1,0]] is the lambda^-1 coefficient in both examples.
    let neg_e1 = -e1();
    match name {
        "revolution" => {
            // eta+ = A du, eta- = A dv, A = [[0, -1/l + i l],[1/l + i l, 0]]
            let terms = vec![
                PotentialTerm {
                    power: 1,
                    coord_degree: 0,
                    matrix: e2(),
                },
                PotentialTerm {
                    power: -1,
                    coord_degree: 0,
                    matrix: neg_e1,
                },
            ];
            Ok(PotentialPair {
                eta_plus: AxisPotential::new(Axis::U, terms.clone()),
                eta_minus: AxisPotential::new(Axis::V, terms),
                domain: Domain::default(),
            })
        }
        "amsler" => Ok(PotentialPair {
            eta_plus: AxisPotential::new(
                Axis::U,
                vec![PotentialTerm {
                    power: 1,
                    coord_degree: 0,
                    matrix: e2(),
                }],
            ),
            eta_minus: AxisPotential::new(
                Axis::V,
                vec![PotentialTerm {
                    power: -1,
                    coord_degree: 0,
                    matrix: neg_e1,
                }],
            ),
            domain: Domain::default(),
        }),
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["revolution", "amsler"]
}

/// Sample the regularity condition over the given coordinate lists.
pub fn check_regular(pair: &PotentialPair, u_samples: &[f64], v_samples: &[f64]) -> RegularityReport {
    let mut report = RegularityReport::default();
    for &u in u_samples {
        if pair.eta_plus.lambda_coefficient(1, u)[(0, 1)].norm() < REGULARITY_EPS {
            report.u_failures.push(u);
        }
    }
    for &v in v_samples {
        if pair.eta_minus.lambda_coefficient(-1, v)[(0, 1)].norm() < REGULARITY_EPS {
            report.v_failures.push(v);
        }
    }
    report
}

// ---------------------------------------------------------------------
// JSON configuration

#[derive(Serialize, Deserialize)]
struct RawTerm {
    power: i32,
    /// Row-major [re, im] pairs for the four entries.
    matrix: [[f64; 2]; 4],
    #[serde(default)]
    coord_degree: u32,
}

#[derive(Serialize, Deserialize)]
struct RawDomain {
    u: [f64; 2],
    v: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    eta_plus: Vec<RawTerm>,
    eta_minus: Vec<RawTerm>,
    #[serde(default)]
    domain: Option<RawDomain>,
}

fn term_from_raw(raw: &RawTerm, axis: Axis, idx: usize) -> Result<PotentialTerm> {
    let field = match axis {
        Axis::U => "eta_plus",
        Axis::V => "eta_minus",
    };
    let path = format!("{field}[{idx}]");
    let m = Mat2::new(
        c(raw.matrix[0][0], raw.matrix[0][1]),
        c(raw.matrix[1][0], raw.matrix[1][1]),
        c(raw.matrix[2][0], raw.matrix[2][1]),
        c(raw.matrix[3][0], raw.matrix[3][1]),
    );
    match axis {
        Axis::U if raw.power > 1 => {
            return Err(Error::DegreeViolation {
                path: format!("{path}.power"),
                message: format!("u-axis potential admits powers <= 1, got {}", raw.power),
            })
        }
        Axis::V if raw.power < -1 => {
            return Err(Error::DegreeViolation {
                path: format!("{path}.power"),
                message: format!("v-axis potential admits powers >= -1, got {}", raw.power),
            })
        }
        _ => {}
    }
    if m.trace().norm() > 1e-12 {
        return Err(Error::Schema {
            path: format!("{path}.matrix"),
            message: "coefficient matrix must be trace-free".into(),
        });
    }
    let (off_a, off_b) = if raw.power.rem_euclid(2) == 0 {
        (m[(0, 1)], m[(1, 0)])
    } else {
        (m[(0, 0)], m[(1, 1)])
    };
    if off_a.norm() > 1e-12 || off_b.norm() > 1e-12 {
        return Err(Error::TwistingViolation {
            path: format!("{path}.matrix"),
            message: format!(
                "lambda^{} coefficient must be {} for the twisting condition",
                raw.power,
                if raw.power.rem_euclid(2) == 0 {
                    "diagonal"
                } else {
                    "anti-diagonal"
                }
            ),
        });
    }
    // restore the exact sparsity pattern
    let m = LoopMatrix::monomial(raw.power, m).project_twist().coeff(raw.power);
    Ok(PotentialTerm {
        power: raw.power,
        coord_degree: raw.coord_degree,
        matrix: m,
    })
}

/// Parsed potential pair together with warning-level findings.
pub struct ParsedPotential {
    pub pair: PotentialPair,
    pub warnings: Vec<String>,
}

/// Parse and validate a JSON potential configuration.
pub fn parse_config(document: &str) -> Result<ParsedPotential> {
    let raw: RawConfig = serde_json::from_str(document).map_err(|e| Error::Schema {
        path: "<document>".into(),
        message: e.to_string(),
    })?;
    let eta_plus = AxisPotential::new(
        Axis::U,
        raw.eta_plus
            .iter()
            .enumerate()
            .map(|(i, t)| term_from_raw(t, Axis::U, i))
            .collect::<Result<Vec<_>>>()?,
    );
    let eta_minus = AxisPotential::new(
        Axis::V,
        raw.eta_minus
            .iter()
            .enumerate()
            .map(|(i, t)| term_from_raw(t, Axis::V, i))
            .collect::<Result<Vec<_>>>()?,
    );
    let domain = raw
        .domain
        .map(|d| Domain {
            u: (d.u[0], d.u[1]),
            v: (d.v[0], d.v[1]),
        })
        .unwrap_or_default();
    if domain.u.1 <= domain.u.0 || domain.v.1 <= domain.v.0 {
        return Err(Error::Schema {
            path: "domain".into(),
            message: "intervals must be nondegenerate".into(),
        });
    }
    let pair = PotentialPair {
        eta_plus,
        eta_minus,
        domain,
    };
    // Regularity is a warning: surfaces may legitimately have singular
    // potentials at isolated points.
    let mut warnings = Vec::new();
    let samples = |a: f64, b: f64| (0..33).map(|i| a + (b - a) * i as f64 / 32.0).collect::<Vec<_>>();
    let report = check_regular(
        &pair,
        &samples(pair.domain.u.0, pair.domain.u.1),
        &samples(pair.domain.v.0, pair.domain.v.1),
    );
    for u in &report.u_failures {
        warnings.push(format!(
            "RegularityViolation: [(eta_plus)_1]_12 vanishes at u = {u}"
        ));
    }
    for v in &report.v_failures {
        warnings.push(format!(
            "RegularityViolation: [(eta_minus)_-1]_12 vanishes at v = {v}"
        ));
    }
    Ok(ParsedPotential { pair, warnings })
}

fn raw_from_axis(p: &AxisPotential) -> Vec<RawTerm> {
    p.terms
        .iter()
        .map(|t| RawTerm {
            power: t.power,
            matrix: [
                [t.matrix[(0, 0)].re, t.matrix[(0, 0)].im],
                [t.matrix[(0, 1)].re, t.matrix[(0, 1)].im],
                [t.matrix[(1, 0)].re, t.matrix[(1, 0)].im],
                [t.matrix[(1, 1)].re, t.matrix[(1, 1)].im],
            ],
            coord_degree: t.coord_degree,
        })
        .collect()
}

/// Serialize a pair back to the configuration schema.
pub fn to_config_json(pair: &PotentialPair) -> serde_json::Value {
    serde_json::json!({
        "eta_plus": raw_from_axis(&pair.eta_plus).iter().map(|t| serde_json::json!({
            "power": t.power, "matrix": t.matrix, "coord_degree": t.coord_degree
        })).collect::<Vec<_>>(),
        "eta_minus": raw_from_axis(&pair.eta_minus).iter().map(|t| serde_json::json!({
            "power": t.power, "matrix": t.matrix, "coord_degree": t.coord_degree
        })).collect::<Vec<_>>(),
        "domain": {"u": [pair.domain.u.0, pair.domain.u.1], "v": [pair.domain.v.0, pair.domain.v.1]},
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat2::frob;

    #[test]
    fn builtin_revolution_matches_example() {
        let p = builtin("revolution").unwrap();
        let a = p.eta_plus.eval(0.7);
        // A at lambda = 1 is [[0, -1+i],[1+i, 0]]
        let m = a.evaluate(c(1.0, 0.0)).unwrap();
        let expect = Mat2::new(c(0.0, 0.0), c(-1.0, 1.0), c(1.0, 1.0), c(0.0, 0.0));
        assert!(frob(&(m - expect)) < 1e-15);
        assert!(a.is_sigma_twisted());
        // regularity: |[(eta+)_1]_12| = 1
        assert!((p.eta_plus.lambda_coefficient(1, 0.0)[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn builtin_amsler_matches_example() {
        let p = builtin("amsler").unwrap();
        let plus = p.eta_plus.eval(0.0);
        assert_eq!(plus.low_degree(), 1);
        assert!(frob(&(plus.coeff(1) - e2())) < 1e-15);
        let minus = p.eta_minus.eval(0.0);
        assert_eq!(minus.low_degree(), -1);
        assert!(frob(&(minus.coeff(-1) + e1())) < 1e-15);
        let report = check_regular(&p, &[0.0, 0.5, 1.0], &[0.0, 0.5, 1.0]);
        assert!(report.is_empty());
    }

    #[test]
    fn unknown_builtin() {
        assert!(matches!(builtin("nope"), Err(Error::UnknownBuiltin(_))));
    }

    #[test]
    fn config_roundtrip_equals_builtin() {
        let p = builtin("revolution").unwrap();
        let doc = serde_json::to_string(&to_config_json(&p)).unwrap();
        let parsed = parse_config(&doc).unwrap();
        assert_eq!(parsed.pair, p);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn degree_violation_rejected() {
        let doc = r#"{"eta_plus": [{"power": 2, "matrix": [[0,1],[0,0],[0,0],[0,-1]]}],
                      "eta_minus": [{"power": -1, "matrix": [[0,0],[-1,0],[1,0],[0,0]]}]}"#;
        assert!(matches!(parse_config(doc), Err(Error::DegreeViolation { .. })));
    }

    #[test]
    fn twisting_violation_rejected() {
        // odd power with diagonal entries
        let doc = r#"{"eta_plus": [{"power": 1, "matrix": [[0,1],[0,0],[0,0],[0,-1]]}],
                      "eta_minus": [{"power": -1, "matrix": [[0,0],[-1,0],[1,0],[0,0]]}]}"#;
        assert!(matches!(parse_config(doc), Err(Error::TwistingViolation { .. })));
    }

    #[test]
    fn regularity_warning_for_vanishing_coefficient() {
        // (eta+)_1 = u * e2 vanishes at u = 0
        let doc = r#"{"eta_plus": [{"power": 1, "matrix": [[0,0],[0,1],[0,1],[0,0]], "coord_degree": 1}],
                      "eta_minus": [{"power": -1, "matrix": [[0,0],[-1,0],[1,0],[0,0]]}]}"#;
        let parsed = parse_config(doc).unwrap();
        assert!(!parsed.warnings.is_empty());
        let report = check_regular(&parsed.pair, &[-1.0, 0.0, 1.0], &[0.0]);
        assert_eq!(report.u_failures, vec![0.0]);
    }
}
