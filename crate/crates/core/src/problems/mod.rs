//! Problem definitions: the damped wave problem record, a small catalog of
//! built-in problems, and JSON problem documents backed by [`expr`].

pub mod expr;

use std::f64::consts::PI;

use serde::Deserialize;

use crate::error::{Error, Result};
pub use expr::{eval_expression, parse_expression, ExprError, Expression};

/// A scalar coefficient or datum, always evaluated as `f(x, t)`.
///
/// Functions of `x` alone ignore `t` and vice versa.
#[derive(Debug, Clone)]
pub enum Field {
    Const(f64),
    Native(fn(f64, f64) -> f64),
    Expr(Expression),
    Scaled(f64, Box<Field>),
}

impl Field {
    pub fn eval(&self, x: f64, t: f64) -> Result<f64, ExprError> {
        match self {
            Field::Const(v) => Ok(*v),
            Field::Native(f) => {
                let v = f(x, t);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(ExprError::NonFinite {
                        subexpr: "<builtin>".to_string(),
                    })
                }
            }
            Field::Expr(e) => e.eval(x, t),
            Field::Scaled(alpha, inner) => Ok(alpha * inner.eval(x, t)?),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Field::Const(v) => *v == 0.0,
            Field::Expr(Expression::Num(v)) => *v == 0.0,
            Field::Scaled(alpha, inner) => *alpha == 0.0 || inner.is_zero(),
            _ => false,
        }
    }

    fn scaled(&self, alpha: f64) -> Field {
        Field::Scaled(alpha, Box::new(self.clone()))
    }
}

/// `u_tt = u_xx - gamma(x) u_t + g(x,t)` on `[a, b]` with
/// `u(x,0) = phi(x)`, `u_t(x,0) = psi(x)`, `u(a,t) = u_a(t)`, `u(b,t) = u_b(t)`.
#[derive(Debug, Clone)]
pub struct DampedWaveProblem {
    pub name: String,
    pub domain: (f64, f64),
    pub gamma: Field,
    pub g: Field,
    pub phi: Field,
    pub psi: Field,
    pub u_a: Field,
    pub u_b: Field,
    pub exact: Option<Field>,
}

impl DampedWaveProblem {
    pub fn gamma(&self, x: f64) -> Result<f64, ExprError> {
        self.gamma.eval(x, 0.0)
    }

    pub fn g(&self, x: f64, t: f64) -> Result<f64, ExprError> {
        self.g.eval(x, t)
    }

    pub fn phi(&self, x: f64) -> Result<f64, ExprError> {
        self.phi.eval(x, 0.0)
    }

    pub fn psi(&self, x: f64) -> Result<f64, ExprError> {
        self.psi.eval(x, 0.0)
    }

    pub fn u_a(&self, t: f64) -> Result<f64, ExprError> {
        self.u_a.eval(self.domain.0, t)
    }

    pub fn u_b(&self, t: f64) -> Result<f64, ExprError> {
        self.u_b.eval(self.domain.1, t)
    }

    pub fn exact(&self, x: f64, t: f64) -> Option<Result<f64, ExprError>> {
        self.exact.as_ref().map(|f| f.eval(x, t))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// True when `g`, `u_a` and `u_b` are structurally zero.
    pub fn is_homogeneous(&self) -> bool {
        self.g.is_zero() && self.u_a.is_zero() && self.u_b.is_zero()
    }

    /// Same damping, every datum (and the exact solution) multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> DampedWaveProblem {
        DampedWaveProblem {
            name: format!("{}*{alpha}", self.name),
            domain: self.domain,
            gamma: self.gamma.clone(),
            g: self.g.scaled(alpha),
            phi: self.phi.scaled(alpha),
            psi: self.psi.scaled(alpha),
            u_a: self.u_a.scaled(alpha),
            u_b: self.u_b.scaled(alpha),
            exact: self.exact.as_ref().map(|e| e.scaled(alpha)),
        }
    }

    /// Corner compatibility `phi(a) = u_a(0)`, `phi(b) = u_b(0)`; mismatches
    /// beyond 1e-10 are returned as human-readable warnings.
    pub fn compatibility_warnings(&self) -> Vec<String> {
        let (a, b) = self.domain;
        let mut warnings = Vec::new();
        for (side, x, phi, bc) in [
            ("left", a, self.phi(a), self.u_a(0.0)),
            ("right", b, self.phi(b), self.u_b(0.0)),
        ] {
            match (phi, bc) {
                (Ok(p), Ok(u)) if (p - u).abs() > 1e-10 => warnings.push(format!(
                    "{side} corner x = {x}: phi = {p} but boundary value at t = 0 is {u}"
                )),
                (Err(e), _) | (_, Err(e)) => {
                    warnings.push(format!("{side} corner x = {x}: cannot evaluate ({e})"))
                }
                _ => {}
            }
        }
        warnings
    }
}

fn sample_exact(x: f64, t: f64) -> f64 {
    (-t).exp() * x.sin()
}

/// `u_tt = u_xx - 2 u_t` on `[0, pi]`, `u(x,0) = sin x`, `u_t(x,0) = -sin x`,
/// homogeneous Dirichlet data, exact solution `exp(-t) sin x`.
pub fn sample_problem() -> DampedWaveProblem {
    DampedWaveProblem {
        name: "sample".to_string(),
        domain: (0.0, PI),
        gamma: Field::Const(2.0),
        g: Field::Const(0.0),
        phi: Field::Native(|x, _| x.sin()),
        psi: Field::Native(|x, _| -x.sin()),
        u_a: Field::Const(0.0),
        u_b: Field::Const(0.0),
        exact: Some(Field::Native(sample_exact)),
    }
}

/// Undamped string: `u_tt = u_xx` on `[0, pi]`, exact `cos t sin x`.
pub fn undamped_problem() -> DampedWaveProblem {
    DampedWaveProblem {
        name: "undamped".to_string(),
        domain: (0.0, PI),
        gamma: Field::Const(0.0),
        g: Field::Const(0.0),
        phi: Field::Native(|x, _| x.sin()),
        psi: Field::Const(0.0),
        u_a: Field::Const(0.0),
        u_b: Field::Const(0.0),
        exact: Some(Field::Native(|x, t| t.cos() * x.sin())),
    }
}

/// Variable damping `1 + x` on `[0, 1]` with forcing and time-dependent
/// boundary data; exact solution `cos t (1 + x^2)`.
pub fn forced_problem() -> DampedWaveProblem {
    DampedWaveProblem {
        name: "forced".to_string(),
        domain: (0.0, 1.0),
        gamma: Field::Native(|x, _| 1.0 + x),
        g: Field::Native(|x, t| {
            let q = 1.0 + x * x;
            -t.cos() * q - 2.0 * t.cos() - (1.0 + x) * t.sin() * q
        }),
        phi: Field::Native(|x, _| 1.0 + x * x),
        psi: Field::Const(0.0),
        u_a: Field::Native(|_, t| t.cos()),
        u_b: Field::Native(|_, t| 2.0 * t.cos()),
        exact: Some(Field::Native(|x, t| t.cos() * (1.0 + x * x))),
    }
}

pub const CATALOG: [&str; 3] = ["sample", "undamped", "forced"];

pub fn builtin(name: &str) -> Option<DampedWaveProblem> {
    match name {
        "sample" => Some(sample_problem()),
        "undamped" => Some(undamped_problem()),
        "forced" => Some(forced_problem()),
        _ => None,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDocument {
    builtin: Option<String>,
    name: Option<String>,
    domain: Option<[f64; 2]>,
    gamma: Option<String>,
    g: Option<String>,
    phi: Option<String>,
    psi: Option<String>,
    u_a: Option<String>,
    u_b: Option<String>,
    exact: Option<String>,
}

fn required<'a>(field: &'static str, value: &'a Option<String>) -> Result<&'a str> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("missing field `{field}`")))
}

fn uses_var(e: &Expression, var: expr::Var) -> bool {
    match e {
        Expression::Var(v) => *v == var,
        Expression::Num(_) | Expression::Pi => false,
        Expression::Neg(inner) | Expression::Call(_, inner) => uses_var(inner, var),
        Expression::Binary(_, l, r) => uses_var(l, var) || uses_var(r, var),
    }
}

fn field_expr(field: &'static str, text: &str, forbid: Option<expr::Var>) -> Result<Field> {
    let e = parse_expression(text)
        .map_err(|err| Error::Config(format!("field `{field}`: {err}")))?;
    if let Some(var) = forbid {
        if uses_var(&e, var) {
            let name = if var == expr::Var::X { "x" } else { "t" };
            return Err(Error::Config(format!("field `{field}` must not depend on `{name}`")));
        }
    }
    Ok(Field::Expr(e))
}

/// Parses a JSON problem document: either `{"builtin": name}` or the full
/// schema with `domain`, `gamma`, `g`, `phi`, `psi`, `u_a`, `u_b` and an
/// optional `exact`.
pub fn load_problem_config(text: &str) -> Result<DampedWaveProblem> {
    let doc: ProblemDocument =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    if let Some(name) = &doc.builtin {
        let others = [
            doc.domain.is_some(),
            doc.gamma.is_some(),
            doc.g.is_some(),
            doc.phi.is_some(),
            doc.psi.is_some(),
            doc.u_a.is_some(),
            doc.u_b.is_some(),
            doc.exact.is_some(),
        ];
        if others.iter().any(|&set| set) {
            return Err(Error::Config(
                "`builtin` cannot be combined with explicit problem fields".to_string(),
            ));
        }
        return builtin(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown builtin `{name}` (available: {})",
                CATALOG.join(", ")
            ))
        });
    }

    let [a, b] = doc
        .domain
        .ok_or_else(|| Error::Config("missing field `domain`".to_string()))?;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::Config(format!("domain [{a}, {b}] must satisfy a < b")));
    }
    use expr::Var::{T, X};
    let gamma = field_expr("gamma", required("gamma", &doc.gamma)?, Some(T))?;
    let g = field_expr("g", required("g", &doc.g)?, None)?;
    let phi = field_expr("phi", required("phi", &doc.phi)?, Some(T))?;
    let psi = field_expr("psi", required("psi", &doc.psi)?, Some(T))?;
    let u_a = field_expr("u_a", required("u_a", &doc.u_a)?, Some(X))?;
    let u_b = field_expr("u_b", required("u_b", &doc.u_b)?, Some(X))?;
    let exact = doc
        .exact
        .as_deref()
        .map(|text| field_expr("exact", text, None))
        .transpose()?;

    Ok(DampedWaveProblem {
        name: doc.name.unwrap_or_else(|| "config".to_string()),
        domain: (a, b),
        gamma,
        g,
        phi,
        psi,
        u_a,
        u_b,
        exact,
    })
}

/// Resolves a builtin name or reads a JSON document from `source`.
pub fn resolve_problem(source: &str) -> Result<DampedWaveProblem> {
    if let Some(p) = builtin(source) {
        return Ok(p);
    }
    let text = std::fs::read_to_string(source).map_err(|e| Error::Io {
        path: source.into(),
        source: e,
    })?;
    load_problem_config(&text)
}
