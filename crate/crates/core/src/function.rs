//! Evaluable continuous maps `[0,1]^d -> R` with pointwise algebra.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::witness::WitnessFunction;

/// Number of terms kept in the Weierstrass series (`k = 0..=30`).
pub const WEIERSTRASS_TERMS: u32 = 31;

type Custom = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Expr {
    Constant(f64),
    Linear(Vec<f64>),
    Weierstrass { a: f64, b: f64 },
    SinProduct(f64),
    Witness(WitnessFunction),
    Sum(FunctionHandle, FunctionHandle),
    Scale(f64, FunctionHandle),
    Custom(Custom),
}

#[derive(Clone)]
pub struct FunctionHandle {
    dim: usize,
    label: String,
    expr: Arc<Expr>,
}

impl fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FunctionHandle({}, d={})", self.label, self.dim)
    }
}

impl FunctionHandle {
    fn new(dim: usize, label: impl Into<String>, expr: Expr) -> Self {
        Self {
            dim,
            label: label.into(),
            expr: Arc::new(expr),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, "zero", Expr::Constant(0.0))
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, format!("const:{c}"), Expr::Constant(c))
    }

    /// `sum_j coeffs[j] * x_j`
    pub fn linear(coeffs: Vec<f64>) -> Self {
        let label = format!(
            "linear:{}",
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        );
        Self::new(coeffs.len(), label, Expr::Linear(coeffs))
    }

    /// `W(x) = sum_{k=0}^{30} a^k cos(b^k pi x)` in the first coordinate.
    pub fn weierstrass(dim: usize, a: f64, b: f64) -> Self {
        Self::new(dim, format!("weierstrass:{a},{b}"), Expr::Weierstrass { a, b })
    }

    /// `sin(freq * pi * x * y)`
    pub fn sin_xy(freq: f64) -> Self {
        Self::new(2, format!("sinxy:{freq}"), Expr::SinProduct(freq))
    }

    pub fn witness(w: WitnessFunction) -> Self {
        let label = match w.labeling().seed() {
            Some(s) => format!("witness:{s}"),
            None => "witness:constant".to_string(),
        };
        Self::new(w.dim(), label, Expr::Witness(w))
    }

    pub fn from_fn<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(dim, label, Expr::Custom(Arc::new(f)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn add(&self, other: &FunctionHandle) -> Result<FunctionHandle> {
        if self.dim != other.dim {
            return Err(domain(format!(
                "cannot add functions of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        Ok(Self::new(
            self.dim,
            format!("{}+{}", self.label, other.label),
            Expr::Sum(self.clone(), other.clone()),
        ))
    }

    pub fn scale(&self, c: f64) -> FunctionHandle {
        Self::new(self.dim, format!("{c}*{}", self.label), Expr::Scale(c, self.clone()))
    }

    /// Evaluates at `p`; coordinates are clamped into `[0, 1]`.
    pub fn eval(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.dim);
        match &*self.expr {
            Expr::Constant(c) => *c,
            Expr::Linear(coeffs) => coeffs.iter().zip(p).map(|(c, x)| c * x).sum(),
            Expr::Weierstrass { a, b } => weierstrass(*a, *b, p[0]),
            Expr::SinProduct(freq) => (freq * PI * p[0] * p[1]).sin(),
            Expr::Witness(w) => w.value(p[0]),
            Expr::Sum(f, g) => f.eval(p) + g.eval(p),
            Expr::Scale(c, f) => c * f.eval(p),
            Expr::Custom(f) => f(p),
        }
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(&[x])
    }

    /// Parses a function spec such as `zero`, `10*linear`,
    /// `weierstrass:0.5,3 + sinxy:4` or `witness`. The `witness` atom needs a
    /// witness function to bind to.
    pub fn parse(spec: &str, dim: usize, witness: Option<&WitnessFunction>) -> Result<Self> {
        let mut acc: Option<FunctionHandle> = None;
        for term in spec.split('+') {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::FunctionSpec(spec.to_string()));
            }
            let (scale, atom) = match term.split_once('*') {
                Some((c, rest)) => (
                    Some(
                        c.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::FunctionSpec(spec.to_string()))?,
                    ),
                    rest.trim(),
                ),
                None => (None, term),
            };
            let mut f = parse_atom(atom, dim, witness)?;
            if let Some(c) = scale {
                f = f.scale(c);
            }
            acc = Some(match acc {
                None => f,
                Some(g) => g.add(&f)?,
            });
        }
        acc.ok_or_else(|| Error::FunctionSpec(spec.to_string()))
    }
}

fn parse_atom(atom: &str, dim: usize, witness: Option<&WitnessFunction>) -> Result<FunctionHandle> {
    let bad = || Error::FunctionSpec(atom.to_string());
    let (name, args) = match atom.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (atom, None),
    };
    let nums = |a: &str| -> Result<Vec<f64>> {
        a.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    };
    match (name, args) {
        ("zero", None) => Ok(FunctionHandle::zero(dim)),
        ("const", Some(a)) => {
            let v = nums(a)?;
            if v.len() != 1 {
                return Err(bad());
            }
            Ok(FunctionHandle::constant(dim, v[0]))
        }
        ("linear", None) | ("x", None) => {
            let mut c = vec![0.0; dim];
            c[0] = 1.0;
            Ok(FunctionHandle::linear(c))
        }
        ("y", None) if dim >= 2 => {
            let mut c = vec![0.0; dim];
            c[1] = 1.0;
            Ok(FunctionHandle::linear(c))
        }
        ("linear", Some(a)) => {
            let c = nums(a)?;
            if c.len() != dim {
                return Err(bad());
            }
            Ok(FunctionHandle::linear(c))
        }
        ("weierstrass", None) => Ok(FunctionHandle::weierstrass(dim, 0.5, 3.0)),
        ("weierstrass", Some(a)) => match nums(a)?.as_slice() {
            [a, b] => Ok(FunctionHandle::weierstrass(dim, *a, *b)),
            _ => Err(bad()),
        },
        ("sinxy", args) if dim == 2 => {
            let freq = match args {
                Some(a) => *nums(a)?.first().ok_or_else(bad)?,
                None => 4.0,
            };
            Ok(FunctionHandle::sin_xy(freq))
        }
        ("witness", None) => {
            let w = witness.ok_or_else(|| {
                domain("`witness` in a function spec needs a seed and a config")
            })?;
            let w = if w.dim() == dim { w.clone() } else { w.surface_extend(dim)? };
            Ok(FunctionHandle::witness(w))
        }
        _ => Err(bad()),
    }
}

pub fn weierstrass(a: f64, b: f64, x: f64) -> f64 {
    let mut amp = 1.0;
    let mut freq = PI;
    let mut sum = 0.0;
    for _ in 0..WEIERSTRASS_TERMS {
        sum += amp * (freq * x).cos();
        amp *= a;
        freq *= b;
    }
    sum
}
