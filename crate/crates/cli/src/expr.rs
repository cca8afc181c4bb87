//! Small expression helpers: point lists and metric files.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use geodrop::geometry::MetricField;
use geodrop::numerics::DenseMatrix;
use geodrop::{Error, Result};

fn context() -> HashMapContext<DefaultNumericTypes> {
    let mut ctx = HashMapContext::new();
    ctx.set_value("pi".into(), Value::Float(PI)).expect("fresh context");
    ctx
}

fn compile(src: &str) -> Result<Node<DefaultNumericTypes>> {
    build_operator_tree(src).map_err(|e| Error::Config(format!("cannot parse '{src}': {e}")))
}

/// Parses `"pi/4, 0"` style coordinate lists.
pub fn parse_point(text: &str) -> Result<Vec<f64>> {
    let ctx = context();
    text.split(',')
        .map(|s| {
            compile(s.trim())?
                .eval_number_with_context(&ctx)
                .map_err(|e| Error::Config(format!("cannot evaluate '{s}': {e}")))
        })
        .collect()
}

/// Metric whose entries are expressions in `x0, x1, …` (and `pi`).
///
/// File format: a `dim = n` line, then `g<i><j> = expr` lines for `i ≤ j`;
/// missing entries are zero and the lower triangle mirrors the upper one.
pub struct ExprMetric {
    dim: usize,
    entries: Vec<Option<Node<DefaultNumericTypes>>>,
}

impl ExprMetric {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read metric file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut pending = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected 'key = expr', got '{line}'")))?;
            let k = k.trim();
            if k == "dim" {
                dim = Some(
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad dim '{}'", v.trim())))?,
                );
                continue;
            }
            let idx = k
                .strip_prefix('g')
                .filter(|s| s.len() == 2 && s.bytes().all(|b| b.is_ascii_digit()))
                .ok_or_else(|| Error::Config(format!("unknown metric key '{k}' (use gIJ with single digits)")))?;
            let (i, j) = (usize::from(idx.as_bytes()[0] - b'0'), usize::from(idx.as_bytes()[1] - b'0'));
            pending.push((i.min(j), i.max(j), compile(v.trim())?));
        }
        let dim = dim.ok_or_else(|| Error::Config("metric file needs a 'dim = n' line".into()))?;
        if dim == 0 || dim > 10 {
            return Err(Error::Config(format!("metric dimension {dim} outside 1..=10")));
        }
        let mut entries: Vec<Option<Node<DefaultNumericTypes>>> = (0..dim * dim).map(|_| None).collect();
        for (i, j, node) in pending {
            if j >= dim {
                return Err(Error::Config(format!("entry g{i}{j} outside dimension {dim}")));
            }
            entries[i * dim + j] = Some(node);
        }
        Ok(Self { dim, entries })
    }
}

impl MetricField for ExprMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &[f64]) -> Result<DenseMatrix> {
        if theta.len() != self.dim {
            return Err(Error::Shape(format!(
                "point has {} coordinates, metric dimension is {}",
                theta.len(),
                self.dim
            )));
        }
        let mut ctx = context();
        for (i, &x) in theta.iter().enumerate() {
            ctx.set_value(format!("x{i}"), Value::Float(x)).expect("float variable");
        }
        let n = self.dim;
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                if let Some(node) = &self.entries[i * n + j] {
                    let v = node
                        .eval_number_with_context(&ctx)
                        .map_err(|e| Error::Domain(format!("metric entry g{i}{j}: {e}")))?;
                    if !v.is_finite() {
                        return Err(Error::Domain(format!("metric entry g{i}{j} is {v} at {theta:?}")));
                    }
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
        }
        Ok(g)
    }
}
