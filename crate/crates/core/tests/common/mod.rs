//! Generators and independent evaluators shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use conspec::directions::ConceptDirection;
use conspec::lang::{ClassLabel, ConceptName, SpecExpr, TaskVocabulary};
use conspec::regions::{BoxRegion, Provenance};
use conspec::rep_maps::AffineMap;
use conspec::verifier::{LinearHead, VerificationContext};
use conspec::Matrix;
use rand::seq::SliceRandom;
use rand::Rng;

pub const CONCEPTS: [&str; 4] = ["wheels", "ears", "metallic", "tail"];
pub const CLASSES: [&str; 3] = ["truck", "cat", "bird"];

pub fn vocab() -> TaskVocabulary {
    TaskVocabulary::new(CONCEPTS, CLASSES).unwrap()
}

pub fn concept(name: &str) -> ConceptName {
    ConceptName::new(name).unwrap()
}

fn two_concepts<R: Rng>(rng: &mut R, v: &TaskVocabulary) -> (ConceptName, ConceptName) {
    let mut picked = v.concepts().choose_multiple(rng, 2).cloned();
    (picked.next().unwrap(), picked.next().unwrap())
}

fn leaf<R: Rng>(rng: &mut R, v: &TaskVocabulary) -> SpecExpr {
    match rng.gen_range(0..4) {
        0 | 1 => {
            let (a, b) = two_concepts(rng, v);
            SpecExpr::Gt(a, b)
        }
        2 => SpecExpr::Predict(v.classes().choose(rng).unwrap().clone()),
        _ => {
            let con = v.concepts().choose(rng).unwrap().clone();
            if rng.gen_bool(0.5) {
                SpecExpr::HasCon(con, None)
            } else {
                let others: Vec<ConceptName> = v
                    .concepts()
                    .iter()
                    .filter(|c| **c != con)
                    .cloned()
                    .collect();
                let k = rng.gen_range(1..=others.len());
                let set = others.choose_multiple(rng, k).cloned().collect();
                SpecExpr::HasCon(con, Some(set))
            }
        }
    }
}

/// Random tree of height at most `depth`, sugar included.
pub fn random_expr<R: Rng>(rng: &mut R, v: &TaskVocabulary, depth: usize) -> SpecExpr {
    if depth <= 1 || rng.gen_bool(0.35) {
        return leaf(rng, v);
    }
    let d = depth - 1;
    match rng.gen_range(0..4) {
        0 => SpecExpr::not(random_expr(rng, v, d)),
        1 => SpecExpr::and(random_expr(rng, v, d), random_expr(rng, v, d)),
        2 => SpecExpr::or(random_expr(rng, v, d), random_expr(rng, v, d)),
        _ => SpecExpr::implies(random_expr(rng, v, d), random_expr(rng, v, d)),
    }
}

/// `predict(c) => <strength formula>` with a random strength side.
pub fn random_guarded_spec<R: Rng>(rng: &mut R, v: &TaskVocabulary) -> SpecExpr {
    let class = v.classes().choose(rng).unwrap().clone();
    let body = match rng.gen_range(0..4) {
        0 | 1 => {
            let (a, b) = two_concepts(rng, v);
            SpecExpr::Gt(a, b)
        }
        2 => {
            let (a, b) = two_concepts(rng, v);
            let (c, d) = two_concepts(rng, v);
            SpecExpr::or(SpecExpr::Gt(a, b), SpecExpr::Gt(c, d))
        }
        _ => {
            let con = v.concepts().choose(rng).unwrap().clone();
            let others: Vec<ConceptName> = v
                .concepts()
                .iter()
                .filter(|c| **c != con)
                .cloned()
                .collect();
            SpecExpr::HasCon(con, Some(others.choose_multiple(rng, 2).cloned().collect()))
        }
    };
    SpecExpr::implies(SpecExpr::Predict(class), body)
}

/// Strict unique argmax.
pub fn is_argmax(scores: &[f64], c: usize) -> bool {
    (0..scores.len()).all(|k| k == c || scores[c] > scores[k])
}

/// Evaluates sugar directly, without desugaring.
pub fn eval_sugar(
    e: &SpecExpr,
    scores: &[f64],
    reps: &HashMap<ConceptName, f64>,
    v: &TaskVocabulary,
) -> bool {
    let r = |c: &ConceptName| reps[c];
    match e {
        SpecExpr::Gt(a, b) => r(a) > r(b),
        SpecExpr::Predict(c) => is_argmax(scores, c.index),
        SpecExpr::Not(x) => !eval_sugar(x, scores, reps, v),
        SpecExpr::And(a, b) => eval_sugar(a, scores, reps, v) && eval_sugar(b, scores, reps, v),
        SpecExpr::Or(a, b) => eval_sugar(a, scores, reps, v) || eval_sugar(b, scores, reps, v),
        SpecExpr::Implies(a, b) => {
            !eval_sugar(a, scores, reps, v) || eval_sugar(b, scores, reps, v)
        }
        SpecExpr::HasCon(con, None) => v
            .concepts()
            .iter()
            .filter(|o| *o != con)
            .all(|o| r(con) > r(o)),
        SpecExpr::HasCon(con, Some(set)) => set.iter().all(|o| r(con) > r(o)),
    }
}

/// Scores and concept values, with frequent ties when `coarse`.
pub fn random_assignment<R: Rng>(
    rng: &mut R,
    v: &TaskVocabulary,
    coarse: bool,
) -> (Vec<f64>, HashMap<ConceptName, f64>) {
    let draw = |rng: &mut R| {
        if coarse {
            rng.gen_range(0..3) as f64
        } else {
            rng.gen_range(-1.0..1.0)
        }
    };
    let scores = (0..v.classes().len()).map(|_| draw(rng)).collect();
    let reps = v
        .concepts()
        .iter()
        .map(|c| (c.clone(), draw(rng)))
        .collect();
    (scores, reps)
}

pub fn uniform_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows)
        .map(|_| uniform_vec(rng, cols, scale))
        .collect::<Vec<_>>();
    Matrix::from_rows(&data).unwrap()
}

/// Directions named after the vocabulary concepts.
pub fn random_directions<R: Rng>(
    rng: &mut R,
    names: &[&str],
    dim: usize,
) -> Vec<ConceptDirection<f64>> {
    names
        .iter()
        .map(|n| ConceptDirection::new(*n, uniform_vec(rng, dim, 1.0)).unwrap())
        .collect()
}

/// A vision context over `p` input coordinates and a `pg`-dimensional
/// concept space.
pub fn random_vision_ctx<R: Rng>(rng: &mut R, p: usize, pg: usize) -> VerificationContext<f64> {
    let head = LinearHead::new(
        uniform_matrix(rng, CLASSES.len(), p, 1.0),
        uniform_vec(rng, CLASSES.len(), 0.3),
        CLASSES.iter().map(|s| s.to_string()).collect(),
    )
    .unwrap();
    let map = AffineMap::new(uniform_matrix(rng, pg, p, 1.0), uniform_vec(rng, pg, 1.0)).unwrap();
    VerificationContext::vision(head, map, random_directions(rng, &CONCEPTS, pg)).unwrap()
}

pub fn random_clip_ctx<R: Rng>(rng: &mut R, p: usize) -> VerificationContext<f64> {
    VerificationContext::clip(
        random_directions(rng, &CLASSES, p),
        random_directions(rng, &CONCEPTS, p),
    )
    .unwrap()
}

/// Box with the given center and per-coordinate half-widths in `[lo, hi)`.
pub fn random_box<R: Rng>(rng: &mut R, center: &[f64], lo: f64, hi: f64) -> BoxRegion<f64> {
    let half: Vec<f64> = center.iter().map(|_| rng.gen_range(lo..hi)).collect();
    BoxRegion::new(
        center.iter().zip(&half).map(|(c, h)| c - h).collect(),
        center.iter().zip(&half).map(|(c, h)| c + h).collect(),
        Provenance::Custom {
            label: "random".into(),
        },
    )
    .unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

pub fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.iter_rows().map(|r| dot(r, v)).collect()
}

/// Classifier scores and concept strengths at box point `w`, computed
/// from the context's raw parts.
pub fn observe(
    ctx: &VerificationContext<f64>,
    w: &[f64],
) -> (Vec<f64>, HashMap<ConceptName, f64>, Vec<f64>) {
    use conspec::verifier::Scorer;
    let scores = match ctx.scorer() {
        Scorer::Head(h) => mat_vec(h.weights(), w)
            .iter()
            .zip(h.bias())
            .map(|(s, b)| s + b)
            .collect(),
        Scorer::ZeroShot(dirs) => dirs.iter().map(|d| cos(w, &d.direction)).collect(),
    };
    let z = match ctx.map() {
        Some(m) => mat_vec(m.matrix(), w)
            .iter()
            .zip(m.offset())
            .map(|(x, d)| x + d)
            .collect(),
        None => w.to_vec(),
    };
    let reps = ctx
        .concepts()
        .iter()
        .map(|d| (concept(&d.concept), cos(&z, &d.direction)))
        .collect();
    (scores, reps, z)
}

pub fn class(v: &TaskVocabulary, name: &str) -> ClassLabel {
    v.class(name).unwrap().clone()
}
