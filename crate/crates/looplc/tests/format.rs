use looplc::format::{InputFile, ObjectiveSpec, ProblemFile, ReducedFile};
use looplc::AppError;
use looplc_core::dcopf::generate_system;
use looplc_core::problem::feasibility_gap;
use looplc_core::reduction::reduce;
use looplc_core::Vector;
use std::sync::Arc;

const SPLIT: &str = r#"{
  "a_eq": [[1, 1]],
  "b_mat_eq": [[-1]],
  "b_vec_eq": [0],
  "a_ineq": [[-1, 0], [0, -1]],
  "b_mat_ineq": [[0], [0]],
  "b_vec_ineq": [0, 0],
  "objective": {"quadratic": {"Q": [[2, 0], [0, 4]], "c": [0, 0]}}
}"#;

#[test]
fn quadratic_problem_parses_with_inferred_sizes() {
    let file: ProblemFile = serde_json::from_str(SPLIT).unwrap();
    let p = file.to_problem().unwrap();
    assert_eq!((p.n_opt, p.n_inp, p.n_eq(), p.n_ineq()), (2, 1, 1, 2));
    let u = Vector::from_row_slice(&[1.0, 2.0]);
    let x = Vector::from_row_slice(&[3.0]);
    assert_eq!(p.objective.value(&u, &x), 0.5 * (2.0 + 16.0));
    assert_eq!(feasibility_gap(&p, [(&u, &x)]).unwrap(), 0.0);
}

#[test]
fn builtin_and_linear_objectives_parse() {
    let text = r#"{"n_opt": 2, "a_ineq": [[1, 0]], "b_vec_ineq": [-1], "objective": {"builtin": "sum_squares"}}"#;
    let p = serde_json::from_str::<ProblemFile>(text).unwrap().to_problem().unwrap();
    assert_eq!(p.n_inp, 0);
    assert_eq!(p.objective.name(), "sum_squares");
    let text = r#"{"a_ineq": [[1, 0]], "b_vec_ineq": [-1], "objective": {"linear": {"c": [1, -1]}}}"#;
    let p = serde_json::from_str::<ProblemFile>(text).unwrap().to_problem().unwrap();
    assert_eq!(p.objective.name(), "linear");
}

#[test]
fn problem_round_trips_through_json() {
    let p = generate_system(3, 2, 3, 5).unwrap().to_lincon().unwrap();
    let file = ProblemFile::from_problem(&p).unwrap();
    let text = serde_json::to_string(&file).unwrap();
    let back: ProblemFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back, file);
    let q = back.to_problem().unwrap();
    assert_eq!(q.a_ineq, p.a_ineq);
    assert_eq!(q.b_mat_ineq, p.b_mat_ineq);
    assert_eq!(q.b_vec_eq, p.b_vec_eq);
    assert_eq!(q.objective.hessian(), p.objective.hessian());
}

#[test]
fn malformed_documents_are_rejected() {
    let ragged = r#"{"a_ineq": [[1, 0], [1]], "b_vec_ineq": [0, 0], "objective": {"builtin": "sum_squares"}}"#;
    let err = serde_json::from_str::<ProblemFile>(ragged)
        .unwrap()
        .to_problem()
        .unwrap_err();
    assert!(matches!(err, AppError::Format(m) if m.contains("a_ineq row 1")));

    let unknown = r#"{"n_opt": 1, "objective": {"builtin": "nope"}}"#;
    assert!(serde_json::from_str::<ProblemFile>(unknown)
        .unwrap()
        .to_problem()
        .is_err());

    let typo = r#"{"n_opt": 1, "a_ineqq": [], "objective": {"builtin": "sum_squares"}}"#;
    assert!(serde_json::from_str::<ProblemFile>(typo).is_err());

    let short_c = r#"{"n_opt": 2, "objective": {"quadratic": {"Q": [[1, 0], [0, 1]], "c": [0]}}}"#;
    assert!(serde_json::from_str::<ProblemFile>(short_c)
        .unwrap()
        .to_problem()
        .is_err());
}

#[test]
fn objective_tag_serialises_as_documented() {
    let spec = ObjectiveSpec::Quadratic {
        q: vec![vec![1.0]],
        c: vec![0.0],
    };
    let v = serde_json::to_value(&spec).unwrap();
    assert_eq!(v, serde_json::json!({"quadratic": {"Q": [[1.0]], "c": [0.0]}}));
    let v = serde_json::to_value(ObjectiveSpec::Builtin("rippled".into())).unwrap();
    assert_eq!(v, serde_json::json!({"builtin": "rippled"}));
}

#[test]
fn inputs_accept_bare_and_wrapped_forms() {
    let a: InputFile = serde_json::from_str("[1.5, 2]").unwrap();
    let b: InputFile = serde_json::from_str(r#"{"x": [1.5, 2]}"#).unwrap();
    assert_eq!(a.into_vector(), b.into_vector());
}

#[test]
fn reduced_file_lists_the_partition() {
    let file: ProblemFile = serde_json::from_str(SPLIT).unwrap();
    let red = reduce(Arc::new(file.to_problem().unwrap())).unwrap();
    let r = ReducedFile::from_reduced(&red);
    assert_eq!(r.n_indep, 1);
    let mut all = [r.indep_idx.clone(), r.dep_idx.clone()].concat();
    all.sort_unstable();
    assert_eq!(all, [0, 1]);
    assert_eq!(r.a_red.len(), 2);
}
