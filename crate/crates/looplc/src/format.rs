//! JSON documents read and written by the command line.
//!
//! Matrices are dense and row-major (`Vec` of rows). A block with no rows is
//! an empty list, in which case the column count comes from `n_opt`/`n_inp`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use looplc_core::dcopf::{DcopfDataset, DcopfSystem};
use looplc_core::problem::{Builtin, LinConProblem, LinearObjective, ObjectiveHandle, QuadraticObjective};
use looplc_core::reduction::ReducedProblem;
use looplc_core::{Matrix, Vector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// `1/2 u'Qu + c'u`.
    Quadratic {
        #[serde(rename = "Q", alias = "q")]
        q: Rows,
        c: Vec<f64>,
    },
    Linear {
        c: Vec<f64>,
    },
    Builtin(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_opt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_inp: Option<usize>,
    #[serde(default)]
    pub a_eq: Rows,
    #[serde(default)]
    pub b_mat_eq: Rows,
    #[serde(default)]
    pub b_vec_eq: Vec<f64>,
    #[serde(default)]
    pub a_ineq: Rows,
    #[serde(default)]
    pub b_mat_ineq: Rows,
    #[serde(default)]
    pub b_vec_ineq: Vec<f64>,
    pub objective: ObjectiveSpec,
}

pub fn matrix_to_rows(m: &Matrix) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn rows_to_matrix(what: &str, rows: &Rows, n_cols: usize) -> AppResult<Matrix> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
        return Err(AppError::Format(format!(
            "{what} row {i} has {} entries, expected {n_cols}",
            r.len()
        )));
    }
    Ok(Matrix::from_fn(rows.len(), n_cols, |i, j| rows[i][j]))
}

fn vector_of(what: &str, v: &[f64], len: usize) -> AppResult<Vector> {
    if v.len() != len {
        return Err(AppError::Format(format!(
            "{what} has {} entries, expected {len}",
            v.len()
        )));
    }
    Ok(Vector::from_column_slice(v))
}

fn first_row_len(blocks: &[&Rows]) -> Option<usize> {
    blocks.iter().find_map(|b| b.first().map(Vec::len))
}

impl ProblemFile {
    pub fn from_problem(p: &LinConProblem) -> AppResult<Self> {
        let zero = Vector::zeros(p.n_opt);
        let none = Vector::zeros(p.n_inp);
        let name = p.objective.name().to_string();
        let objective = match name.as_str() {
            "quadratic" => {
                let q = p
                    .objective
                    .hessian()
                    .ok_or_else(|| AppError::Format("quadratic objective without a Hessian".into()))?;
                ObjectiveSpec::Quadratic {
                    q: matrix_to_rows(&q),
                    c: p.objective.gradient(&zero, &none).iter().copied().collect(),
                }
            }
            "linear" => ObjectiveSpec::Linear {
                c: p.objective.gradient(&zero, &none).iter().copied().collect(),
            },
            other if Builtin::from_name(other).is_some() => ObjectiveSpec::Builtin(name),
            other => {
                return Err(AppError::Format(format!(
                    "objective `{other}` has no file representation"
                )))
            }
        };
        Ok(Self {
            n_opt: Some(p.n_opt),
            n_inp: Some(p.n_inp),
            a_eq: matrix_to_rows(&p.a_eq),
            b_mat_eq: matrix_to_rows(&p.b_mat_eq),
            b_vec_eq: p.b_vec_eq.iter().copied().collect(),
            a_ineq: matrix_to_rows(&p.a_ineq),
            b_mat_ineq: matrix_to_rows(&p.b_mat_ineq),
            b_vec_ineq: p.b_vec_ineq.iter().copied().collect(),
            objective,
        })
    }

    fn objective_dim(&self) -> Option<usize> {
        match &self.objective {
            ObjectiveSpec::Quadratic { c, .. } | ObjectiveSpec::Linear { c } => Some(c.len()),
            ObjectiveSpec::Builtin(_) => None,
        }
    }

    pub fn to_problem(&self) -> AppResult<LinConProblem> {
        let n_opt = self
            .n_opt
            .or_else(|| first_row_len(&[&self.a_eq, &self.a_ineq]))
            .or_else(|| self.objective_dim())
            .ok_or_else(|| AppError::Format("cannot infer n_opt; set it explicitly".into()))?;
        let n_inp = self
            .n_inp
            .or_else(|| first_row_len(&[&self.b_mat_eq, &self.b_mat_ineq]))
            .unwrap_or(0);
        let objective: ObjectiveHandle = match &self.objective {
            ObjectiveSpec::Quadratic { q, c } => Arc::new(QuadraticObjective::new(
                rows_to_matrix("objective Q", q, n_opt)?,
                vector_of("objective c", c, n_opt)?,
            )?),
            ObjectiveSpec::Linear { c } => Arc::new(LinearObjective {
                c: vector_of("objective c", c, n_opt)?,
            }),
            ObjectiveSpec::Builtin(name) => Arc::new(
                Builtin::from_name(name)
                    .ok_or_else(|| AppError::Format(format!("unknown builtin objective `{name}`")))?,
            ),
        };
        let eq_rows = self.a_eq.len();
        let ineq_rows = self.a_ineq.len();
        let b_mat_eq = if self.b_mat_eq.is_empty() && n_inp == 0 {
            vec![vec![]; eq_rows]
        } else {
            self.b_mat_eq.clone()
        };
        let b_mat_ineq = if self.b_mat_ineq.is_empty() && n_inp == 0 {
            vec![vec![]; ineq_rows]
        } else {
            self.b_mat_ineq.clone()
        };
        let p = LinConProblem::new(n_opt, n_inp, objective)
            .with_equalities(
                rows_to_matrix("a_eq", &self.a_eq, n_opt)?,
                rows_to_matrix("b_mat_eq", &b_mat_eq, n_inp)?,
                vector_of("b_vec_eq", &self.b_vec_eq, eq_rows)?,
            )
            .with_inequalities(
                rows_to_matrix("a_ineq", &self.a_ineq, n_opt)?,
                rows_to_matrix("b_mat_ineq", &b_mat_ineq, n_inp)?,
                vector_of("b_vec_ineq", &self.b_vec_ineq, ineq_rows)?,
            );
        if p.b_mat_eq.nrows() != eq_rows || p.b_mat_ineq.nrows() != ineq_rows {
            return Err(AppError::Format("b_mat blocks must have one row per constraint".into()));
        }
        Ok(p)
    }
}

/// Output of `reduce`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedFile {
    pub n_indep: usize,
    pub indep_idx: Vec<usize>,
    pub dep_idx: Vec<usize>,
    pub a_red: Rows,
    pub b_mat_red: Rows,
    pub b_vec_red: Vec<f64>,
}

impl ReducedFile {
    pub fn from_reduced(red: &ReducedProblem) -> Self {
        Self {
            n_indep: red.n_indep(),
            indep_idx: red.partition.indep_idx.clone(),
            dep_idx: red.partition.dep_idx.clone(),
            a_red: matrix_to_rows(&red.a_red),
            b_mat_red: matrix_to_rows(&red.b_mat_red),
            b_vec_red: red.b_vec_red.iter().copied().collect(),
        }
    }
}

/// An input vector: either a bare list or `{"x": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputFile {
    Bare(Vec<f64>),
    Wrapped { x: Vec<f64> },
}

impl InputFile {
    pub fn into_vector(self) -> Vector {
        match self {
            InputFile::Bare(x) | InputFile::Wrapped { x } => Vector::from_vec(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub x: Vec<f64>,
    /// Reference optimum over the full decision vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
}

/// Training data for `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    pub samples: Vec<SampleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcopfSystemFile {
    pub n_gen: usize,
    pub n_load: usize,
    pub n_line: usize,
    pub n_bus: usize,
    pub gen_bus: Vec<usize>,
    pub load_bus: Vec<usize>,
    pub lines: Vec<(usize, usize)>,
    pub reactance: Vec<f64>,
    pub cost_quadratic: Vec<f64>,
    pub cost_linear: Vec<f64>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    pub base_load: Vec<f64>,
    pub ptdf_gen: Rows,
    pub ptdf_load: Rows,
    pub line_limits: Vec<f64>,
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

impl DcopfSystemFile {
    pub fn from_system(s: &DcopfSystem) -> Self {
        Self {
            n_gen: s.n_gen,
            n_load: s.n_load,
            n_line: s.n_line,
            n_bus: s.n_bus,
            gen_bus: s.gen_bus.clone(),
            load_bus: s.load_bus.clone(),
            lines: s.lines.clone(),
            reactance: to_vec(&s.reactance),
            cost_quadratic: to_vec(&s.cost_quadratic),
            cost_linear: to_vec(&s.cost_linear),
            p_min: to_vec(&s.p_min),
            p_max: to_vec(&s.p_max),
            base_load: to_vec(&s.base_load),
            ptdf_gen: matrix_to_rows(&s.ptdf_gen),
            ptdf_load: matrix_to_rows(&s.ptdf_load),
            line_limits: to_vec(&s.line_limits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcopfDatasetFile {
    pub base_load: Vec<f64>,
    pub samples: Rows,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl DcopfDatasetFile {
    pub fn from_dataset(d: &DcopfDataset) -> Self {
        Self {
            base_load: to_vec(&d.base_load),
            samples: d.samples.iter().map(to_vec).collect(),
            train_idx: d.train_idx.clone(),
            test_idx: d.test_idx.clone(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::Format(format!("{}: {e}", path.display())))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> AppResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| AppError::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn read_problem(path: &Path) -> AppResult<LinConProblem> {
    read_json::<ProblemFile>(path)?.to_problem()
}
