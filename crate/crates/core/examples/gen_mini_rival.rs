//! Regenerates `fixtures/mini_rival`, a small synthetic dataset shaped like a
//! concept-annotated image benchmark.
//!
//! The vision-language embedding `g` of each row is built from a class
//! block and a concept block; the vision embedding is `w = (g - 1) / 2`, so
//! the exact alignment is `g = 2 w + 1`. About one row in ten looks like a
//! different class than its label says.
//!
//! Run with `cargo run --example gen_mini_rival [out_dir]`.

use std::path::PathBuf;

use conspec::directions::CaptionTemplateSet;
use conspec::embedding::io::{write_captions_csv, write_embeddings_csv, write_json};
use conspec::verifier::{HeadFile, HeadWeights};
use conspec::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 16;
const CLASSES: [&str; 4] = ["truck", "car", "cat", "bird"];
const CONCEPTS: [&str; 6] = ["wheels", "ears", "metallic", "tail", "wings", "hairy"];
const ROWS_PER_CLASS: usize = 50;

// concept strengths per class, in CONCEPTS order
const PROFILES: [[f64; 6]; 4] = [
    [1.0, 0.0, 0.8, 0.0, 0.0, 0.0],
    [0.9, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.7, 0.0, 0.9],
    [0.0, 0.1, 0.0, 0.6, 1.0, 0.0],
];

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn main() -> conspec::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/mini_rival"))
        });
    std::fs::create_dir_all(&out).map_err(|e| conspec::Error::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(20240607);

    let mut ids = Vec::new();
    let mut vlm = Vec::new();
    let mut labels = csv::Writer::from_path(out.join("labels.csv")).unwrap();
    labels
        .write_record(["id", "ground_truth", "predicted", "split"])
        .unwrap();
    let mut attrs = csv::Writer::from_path(out.join("attributes.csv")).unwrap();
    let mut header = vec!["id"];
    header.extend(CONCEPTS);
    attrs.write_record(&header).unwrap();

    for (truth, _) in CLASSES.iter().enumerate() {
        for i in 0..ROWS_PER_CLASS {
            let id = format!("{}-{i:02}", CLASSES[truth]);
            let looks = if rng.gen::<f64>() < 0.1 {
                (truth + rng.gen_range(1..CLASSES.len())) % CLASSES.len()
            } else {
                truth
            };
            let mut g = vec![0.0; DIM];
            for (k, &s) in PROFILES[looks].iter().enumerate() {
                g[k] = round4(s + rng.gen_range(-0.05..0.05));
            }
            for k in 0..CLASSES.len() {
                let base = if k == looks { 2.0 } else { 0.0 };
                g[6 + k] = round4(base + rng.gen_range(-0.1..0.1));
            }
            for x in g.iter_mut().skip(10) {
                *x = round4(rng.gen_range(-0.1..0.1));
            }
            let split = if rng.gen::<f64>() < 0.7 {
                "train"
            } else {
                "test"
            };
            labels
                .write_record([id.as_str(), CLASSES[truth], CLASSES[looks], split])
                .unwrap();
            let mut rec = vec![id.clone()];
            for &s in &PROFILES[looks] {
                let present = (s > 0.5) != (rng.gen::<f64>() < 0.08);
                rec.push(if present { "1" } else { "0" }.to_string());
            }
            attrs.write_record(&rec).unwrap();
            ids.push(id);
            vlm.push(g);
        }
    }
    labels.flush().unwrap();
    attrs.flush().unwrap();

    let vision: Vec<Vec<f64>> = vlm
        .iter()
        .map(|g| g.iter().map(|&x| (x - 1.0) / 2.0).collect())
        .collect();
    write_embeddings_csv(
        out.join("vlm_embeddings.csv"),
        &ids,
        &Matrix::from_rows(&vlm)?,
    )?;
    write_embeddings_csv(
        out.join("embeddings.csv"),
        &ids,
        &Matrix::from_rows(&vision)?,
    )?;

    // caption = own axis + a per-template style vector + small noise
    let templates = CaptionTemplateSet::default();
    let style: Vec<Vec<f64>> = (0..templates.len())
        .map(|_| {
            let mut v = vec![0.0; DIM];
            for x in v.iter_mut().skip(10) {
                *x = rng.gen_range(-0.1..0.1);
            }
            v
        })
        .collect();
    let mut captions = Vec::new();
    for (axis, name) in CONCEPTS.iter().chain(CLASSES.iter()).enumerate() {
        for (t, cap) in templates.expand(name).into_iter().enumerate() {
            let v: Vec<f64> = (0..DIM)
                .map(|j| {
                    let own = if j == axis { 1.0 } else { 0.0 };
                    round4(own + style[t][j] + rng.gen_range(-0.005..0.005))
                })
                .collect();
            captions.push((cap, v));
        }
    }
    write_captions_csv(out.join("captions.csv"), &captions)?;

    // the head reads the class block of w
    let head = HeadFile {
        a: HeadWeights::Rows(
            (0..CLASSES.len())
                .map(|k| {
                    (0..DIM)
                        .map(|j| if j == 6 + k { 1.0 } else { 0.0 })
                        .collect()
                })
                .collect(),
        ),
        b: vec![0.0; CLASSES.len()],
        classes: CLASSES.iter().map(|s| s.to_string()).collect(),
    };
    write_json(out.join("head.json"), &head)?;

    let manifest = serde_json::json!({
        "dim": DIM,
        "vlm_dim": DIM,
        "class_names": CLASSES,
        "concept_names": CONCEPTS,
        "files": {
            "embeddings": "embeddings.csv",
            "vlm_embeddings": "vlm_embeddings.csv",
            "labels": "labels.csv",
            "attributes": "attributes.csv",
            "captions": "captions.csv",
            "head": "head.json"
        }
    });
    write_json(out.join("manifest.json"), &manifest)?;

    let specs = "# holds on every truck-looking input\n\
                 predict(truck) => gt(wheels, ears)\n\
                 # fails on every truck-looking input\n\
                 predict(truck) => gt(ears, wheels)\n";
    std::fs::write(out.join("planted.spec"), specs)
        .map_err(|e| conspec::Error::Invalid(e.to_string()))?;
    println!("wrote {} rows to {}", ids.len(), out.display());
    Ok(())
}
