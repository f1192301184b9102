//! Scenario files: JSON documents naming a field, constants and a list of checks.

use std::path::{Path, PathBuf};

use magtrans::fields::{
    builtin, gauge_transform, Axis, Builtin, FieldError, GaugePotential, PhysicalConstants,
};
use magtrans::poly::{parse_rational, PolyError, Rational, SerialTerm, SpatialPoly};
use serde::Deserialize;
use thiserror::Error;

use crate::checks::{find_check, CheckDef, ToleranceMode};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{context}: {source}")]
    Rational { context: String, source: PolyError },
    #[error("{0}")]
    Field(#[from] FieldError),
    #[error("unknown check `{0}` (see `magtrans list-checks`)")]
    UnknownCheck(String),
    #[error("check #{index} ({check}): {message}")]
    InvalidParameter {
        index: usize,
        check: String,
        message: String,
    },
    #[error("scenario declares no checks")]
    NoChecks,
}

/// A rational written as a string (`"3/2"`) or a JSON integer.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Text(String),
    Integer(i64),
}

impl Number {
    fn resolve(&self, context: &str) -> Result<Rational, ScenarioError> {
        let parsed = match self {
            Number::Text(s) => parse_rational(s),
            Number::Integer(n) => Ok(Rational::from_integer((*n).into())),
        };
        parsed.map_err(|source| ScenarioError::Rational {
            context: context.to_string(),
            source,
        })
    }
}

fn one() -> Number {
    Number::Integer(1)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(default = "one")]
    pub e: Number,
    #[serde(default = "one")]
    pub c: Number,
    #[serde(default = "one")]
    pub m: Number,
    #[serde(default = "one")]
    pub hbar: Number,
}

impl Default for ConstantsSpec {
    fn default() -> Self {
        ConstantsSpec {
            e: one(),
            c: one(),
            m: one(),
            hbar: one(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Symmetric {
        b: [Number; 3],
    },
    Landau {
        b: Number,
        axis: i64,
    },
    Gradient {
        b0: Number,
        beta: Number,
    },
    Dipole {
        moment: [Number; 3],
    },
    Polynomial {
        label: Option<String>,
        components: [Vec<SerialTerm>; 3],
    },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Exists,
    Absent,
    Commute,
    Differ,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Passive,
    Active,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub x: [f64; 3],
    /// Kinematical momentum at the start.
    pub pi: [f64; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(default = "GridParams::default_n")]
    pub n: usize,
    #[serde(default = "GridParams::default_h")]
    pub h: f64,
    #[serde(default = "GridParams::default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub k0: [f64; 2],
}

impl GridParams {
    fn default_n() -> usize {
        256
    }
    fn default_h() -> f64 {
        0.1
    }
    fn default_sigma() -> f64 {
        1.0
    }
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            n: Self::default_n(),
            h: Self::default_h(),
            sigma: Self::default_sigma(),
            center: [0.0; 2],
            k0: [0.0; 2],
        }
    }
}

/// One entry of the `checks` list. Which parameters apply depends on the check.
#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub check: String,
    pub id: Option<String>,
    pub axis: Option<i64>,
    pub axes: Option<[i64; 2]>,
    pub expect: Option<Expectation>,
    pub tolerance: Option<f64>,
    pub family: Option<Family>,
    pub hbar: Option<Vec<Number>>,
    pub samples: Option<usize>,
    pub s: Option<Vec<f64>>,
    pub periods: Option<f64>,
    pub duration: Option<f64>,
    pub dt: Option<f64>,
    pub start: Option<StartSpec>,
    pub a: Option<[f64; 2]>,
    pub b: Option<[f64; 2]>,
    pub c: Option<[f64; 2]>,
    pub grid: Option<GridParams>,
    pub min_gap: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputsSpec {
    pub report: Option<PathBuf>,
    pub export_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constants: ConstantsSpec,
    pub field: FieldSpec,
    /// Optional gauge function `xi`; the potential becomes `A + grad xi`.
    pub gauge_shift: Option<Vec<SerialTerm>>,
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub outputs: OutputsSpec,
}

/// A validated check ready to run.
#[derive(Clone, Debug)]
pub struct PlannedCheck {
    pub index: usize,
    pub def: &'static CheckDef,
    pub spec: CheckSpec,
    pub hbar: Vec<Rational>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub consts: PhysicalConstants,
    pub potential: GaugePotential,
    pub field_label: String,
    pub checks: Vec<PlannedCheck>,
    pub report: Option<PathBuf>,
    pub export_dir: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    validate(file, base, fallback)
}

fn resolve3(v: &[Number; 3], what: &str) -> Result<[Rational; 3], ScenarioError> {
    Ok([
        v[0].resolve(&format!("{what}[0]"))?,
        v[1].resolve(&format!("{what}[1]"))?,
        v[2].resolve(&format!("{what}[2]"))?,
    ])
}

fn polynomial(terms: &[SerialTerm], what: &str) -> Result<SpatialPoly, ScenarioError> {
    SpatialPoly::from_serial(terms).map_err(|source| ScenarioError::Rational {
        context: what.to_string(),
        source,
    })
}

fn build_potential(spec: &FieldSpec) -> Result<GaugePotential, ScenarioError> {
    Ok(match spec {
        FieldSpec::Symmetric { b } => builtin(&Builtin::Symmetric {
            b: resolve3(b, "field.b")?,
        }),
        FieldSpec::Landau { b, axis } => builtin(&Builtin::Landau {
            b: b.resolve("field.b")?,
            axis: Axis::try_from(*axis)?,
        }),
        FieldSpec::Gradient { b0, beta } => builtin(&Builtin::Gradient {
            b0: b0.resolve("field.b0")?,
            beta: beta.resolve("field.beta")?,
        }),
        FieldSpec::Dipole { moment } => builtin(&Builtin::Dipole {
            moment: resolve3(moment, "field.moment")?,
        }),
        FieldSpec::Polynomial { label, components } => GaugePotential::polynomial(
            label.clone().unwrap_or_else(|| "polynomial".into()),
            [
                polynomial(&components[0], "field.components[0]")?,
                polynomial(&components[1], "field.components[1]")?,
                polynomial(&components[2], "field.components[2]")?,
            ],
        ),
    })
}

pub fn validate(
    file: ScenarioFile,
    base: &Path,
    fallback_name: String,
) -> Result<Scenario, ScenarioError> {
    let k = &file.constants;
    let consts = PhysicalConstants::new(
        k.e.resolve("constants.e")?,
        k.c.resolve("constants.c")?,
        k.m.resolve("constants.m")?,
        k.hbar.resolve("constants.hbar")?,
    )?;
    let mut potential = build_potential(&file.field)?;
    if let Some(xi) = &file.gauge_shift {
        potential = gauge_transform(&potential, &polynomial(xi, "gauge_shift")?)?;
    }
    if file.checks.is_empty() {
        return Err(ScenarioError::NoChecks);
    }
    let mut checks = Vec::with_capacity(file.checks.len());
    for (index, spec) in file.checks.into_iter().enumerate() {
        let def = find_check(&spec.check)
            .ok_or_else(|| ScenarioError::UnknownCheck(spec.check.clone()))?;
        let invalid = |message: String| ScenarioError::InvalidParameter {
            index,
            check: spec.check.clone(),
            message,
        };
        if let Some(t) = spec.tolerance {
            if def.tolerance == ToleranceMode::Exact {
                return Err(invalid("exact check takes no tolerance".into()));
            }
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("tolerance must be positive, got {t}")));
            }
        }
        for axis in spec.axis.iter().chain(spec.axes.iter().flatten()) {
            Axis::try_from(*axis).map_err(|e| invalid(e.to_string()))?;
        }
        for (what, v) in [
            ("duration", spec.duration),
            ("periods", spec.periods),
            ("dt", spec.dt),
            ("min_gap", spec.min_gap),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("{what} must be positive, got {v}")));
                }
            }
        }
        if let Some(g) = &spec.grid {
            if g.n < 16 || !(g.h > 0.0) || !(g.sigma > 0.0) {
                return Err(invalid("grid needs n >= 16, h > 0 and sigma > 0".into()));
            }
        }
        if spec.samples == Some(0) {
            return Err(invalid("samples must be at least 1".into()));
        }
        let hbar = match &spec.hbar {
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(i, n)| n.resolve(&format!("checks[{index}].hbar[{i}]")))
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        if hbar.iter().any(|h| h <= &Rational::from_integer(0.into())) {
            return Err(invalid("hbar values must be positive".into()));
        }
        if let Some(expect) = spec.expect {
            if !def.expectations.contains(&expect) {
                return Err(invalid(format!(
                    "expectation {expect:?} does not apply to this check"
                )));
            }
        }
        checks.push(PlannedCheck {
            index,
            def,
            spec,
            hbar,
        });
    }
    Ok(Scenario {
        name: file.name.unwrap_or(fallback_name),
        seed: file.seed,
        field_label: potential.label.clone(),
        consts,
        potential,
        checks,
        report: file.outputs.report.map(|p| base.join(p)),
        export_dir: file.outputs.export_dir.map(|p| base.join(p)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(json)?;
        validate(file, Path::new("."), "test".into())
    }

    #[test]
    fn minimal_scenario() {
        let s = parse(r#"{"field": {"kind": "symmetric", "b": [0, 0, "3/2"]}, "checks": [{"check": "kinematical-brackets"}]}"#).unwrap();
        assert_eq!(s.name, "test");
        assert_eq!(s.checks.len(), 1);
        assert_eq!(s.field_label, "symmetric");
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            r#"{"field": {"kind": "symmetric", "b": [0, 0, "1/0"]}, "checks": [{"check": "kinematical-brackets"}]}"#,
            r#"{"field": {"kind": "symmetric", "b": [0, 0, 1]}, "checks": [{"check": "no-such-check"}]}"#,
            r#"{"field": {"kind": "symmetric", "b": [0, 0, 1]}, "checks": []}"#,
            r#"{"field": {"kind": "symmetric", "b": [0, 0, 1]}, "checks": [{"check": "ray-phase", "tolerance": -1}]}"#,
            r#"{"field": {"kind": "symmetric", "b": [0, 0, 1]}, "checks": [{"check": "kinematical-brackets", "tolerance": 1e-3}]}"#,
            r#"{"field": {"kind": "landau", "b": 1, "axis": 4}, "checks": [{"check": "kinematical-brackets"}]}"#,
            r#"{"field": {"kind": "symmetric", "b": [0, 0, 1]}, "checks": [{"check": "passive-generator-existence", "axis": 0}]}"#,
            r#"{"field": {"kind": "symmetric", "b": [0, 0, 1]}, "checks": [{"check": "ray-phase", "expect": "exists"}]}"#,
            r#"{"field": {"kind": "symmetric", "b": [0, 0, 1]}, "checks": [{"check": "ray-phase", "colour": 1}]}"#,
            r#"{"constants": {"e": "-1"}, "field": {"kind": "symmetric", "b": [0, 0, 1]}, "checks": [{"check": "ray-phase"}]}"#,
        ];
        for json in bad {
            assert!(parse(json).is_err(), "{json}");
        }
    }

    #[test]
    fn polynomial_field_and_gauge_shift() {
        let s = parse(
            r#"{
                "field": {"kind": "polynomial", "components": [
                    [{"coefficient": "-1/2", "exponents": [0, 1, 0]}],
                    [{"coefficient": "1/2", "exponents": [1, 0, 0]}],
                    []
                ]},
                "gauge_shift": [{"coefficient": "1/2", "exponents": [1, 1, 0]}],
                "checks": [{"check": "field-divergence"}]
            }"#,
        )
        .unwrap();
        let comps = s.potential.as_polynomial().unwrap();
        assert!(comps[0].is_zero());
        assert_eq!(comps[1], SpatialPoly::var(0));
    }
}
