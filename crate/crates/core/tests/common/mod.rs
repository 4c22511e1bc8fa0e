//! Helpers shared by the integration tests: fixture paths, brute-force
//! oracles and the finite-difference gradient checker.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use infotweet::bigrucnn::{Gradients, ModelConfig, ModelState, Pass};
use infotweet::corpus::{Label, Tweet};
use infotweet::embeddings::{load_vectors, EmbeddingTable, PAD};
use infotweet::ensemble::PredictionSet;
use infotweet::preprocess::{prepare, TokenSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn d6_table() -> EmbeddingTable {
    load_vectors(fixture("embeddings_d6.txt"), 6).unwrap()
}

/// Majority by counting bits of `pattern` (bit i set = member i voted
/// INFORMATIVE); an even split goes to member 0.
pub fn vote_oracle(pattern: u32, members: u32) -> (Label, bool) {
    let informative = pattern.count_ones();
    let uninformative = members - informative;
    let label = |bit: bool| if bit { Label::Informative } else { Label::Uninformative };
    if informative > uninformative {
        (Label::Informative, false)
    } else if uninformative > informative {
        (Label::Uninformative, false)
    } else {
        (label(pattern & 1 == 1), true)
    }
}

pub fn votes_from_pattern(pattern: u32, members: u32) -> Vec<Label> {
    (0..members)
        .map(|i| {
            if pattern >> i & 1 == 1 {
                Label::Informative
            } else {
                Label::Uninformative
            }
        })
        .collect()
}

/// Tally of (tp, fp, fn, tn) computed id by id.
pub fn tally_oracle(pred: &PredictionSet, gold: &[Tweet]) -> (u64, u64, u64, u64) {
    let gold: HashMap<&str, Label> = gold.iter().map(|t| (t.id.as_str(), t.label.unwrap())).collect();
    let mut t = (0, 0, 0, 0);
    for (id, &p) in &pred.predictions {
        let g = gold[id.as_str()];
        match (p == Label::Informative, g == Label::Informative) {
            (true, true) => t.0 += 1,
            (true, false) => t.1 += 1,
            (false, true) => t.2 += 1,
            (false, false) => t.3 += 1,
        }
    }
    t
}

pub fn random_label(rng: &mut impl Rng) -> Label {
    if rng.gen_bool(0.5) {
        Label::Informative
    } else {
        Label::Uninformative
    }
}

/// Random gold set of up to `max_ids` tweets plus predictions for the same
/// ids in shuffled order.
pub fn random_fixture(rng: &mut ChaCha8Rng, max_ids: usize) -> (PredictionSet, Vec<Tweet>) {
    use rand::seq::SliceRandom;
    let n = rng.gen_range(0..=max_ids);
    let skew: f64 = rng.gen_range(0.05..0.95);
    let gold: Vec<Tweet> = (0..n)
        .map(|i| {
            let label = if rng.gen_bool(skew) { Label::Informative } else { Label::Uninformative };
            Tweet::new(format!("t{i}"), "text", Some(label))
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let flip: f64 = rng.gen_range(0.0..1.0);
    let pred = PredictionSet::from_pairs(
        "model",
        order.into_iter().map(|i| {
            let g = gold[i].label.unwrap();
            (gold[i].id.clone(), if rng.gen_bool(flip) { g.flip() } else { g })
        }),
    )
    .unwrap();
    (pred, gold)
}

pub const TOY_TEXTS: [&str; 3] = [
    "confirmed cases in the city today 12 deaths",
    "stay home and pray",
    "@USER new cases of covid in hospital people tested positive today HTTPURL",
];
pub const TOY_TARGETS: [f64; 3] = [1.0, 0.0, 1.0];

/// Dim-6 embeddings, length-8 sequences, 4 hidden units per direction, with
/// every parameter (biases included) perturbed away from its initial value.
pub fn toy_model(dropout: f64, trainable: bool, seed: u64) -> (ModelState, Vec<TokenSequence>) {
    let config = ModelConfig {
        max_length: 8,
        conv_filters: 5,
        conv_kernel: 3,
        gru_hidden: 4,
        dropout,
        trainable_embeddings: trainable,
        seed,
        ..ModelConfig::default()
    };
    let mut state = ModelState::new(config, d6_table()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    for (_, mut t) in state.weights.tensors_mut() {
        t.mapv_inplace(|v| v + rng.gen_range(-0.3..0.3));
    }
    let batch = TOY_TEXTS.iter().map(|t| prepare(t, &state.embeddings, 8)).collect();
    (state, batch)
}

pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_relative_error: f64,
}

/// Relative error with a floor so that two near-zero values compare by
/// absolute difference.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

const FD_STEP: f64 = 1e-5;

fn loss_with(state: &ModelState, batch: &[TokenSequence], mask_seed: Option<u64>) -> f64 {
    match mask_seed {
        Some(s) => state
            .batch_loss(batch, &TOY_TARGETS, Pass::Train(&mut ChaCha8Rng::seed_from_u64(s)))
            .unwrap(),
        None => state.batch_loss(batch, &TOY_TARGETS, Pass::Eval).unwrap(),
    }
}

pub fn analytic_gradients(state: &ModelState, batch: &[TokenSequence], mask_seed: Option<u64>) -> Gradients {
    let (_, _, grads) = match mask_seed {
        Some(s) => state
            .backward(batch, &TOY_TARGETS, Pass::Train(&mut ChaCha8Rng::seed_from_u64(s)))
            .unwrap(),
        None => state.backward(batch, &TOY_TARGETS, Pass::Eval).unwrap(),
    };
    grads
}

/// Compares every gradient entry with a central difference. With
/// `mask_seed` set, both routes use the same dropout masks.
pub fn gradient_check(state: &ModelState, batch: &[TokenSequence], mask_seed: Option<u64>) -> Vec<TensorCheck> {
    let grads = analytic_gradients(state, batch, mask_seed);
    let mut out = Vec::new();

    let analytic: Vec<(String, Vec<f64>)> = grads
        .weights
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.iter().copied().collect()))
        .collect();
    for (ti, (name, values)) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (k, &a) in values.iter().enumerate() {
            let mut probe = state.clone();
            let nudge = |s: &mut ModelState, delta: f64| {
                let mut tensors = s.weights.tensors_mut();
                *tensors[ti].1.iter_mut().nth(k).unwrap() += delta;
            };
            nudge(&mut probe, FD_STEP);
            let plus = loss_with(&probe, batch, mask_seed);
            nudge(&mut probe, -2.0 * FD_STEP);
            let minus = loss_with(&probe, batch, mask_seed);
            worst = worst.max(relative_error(a, (plus - minus) / (2.0 * FD_STEP)));
        }
        out.push(TensorCheck {
            name: name.clone(),
            entries: values.len(),
            max_relative_error: worst,
        });
    }

    if let Some(g) = &grads.embedding {
        let tokens = state.embeddings.tokens().to_vec();
        let base = state.embeddings.matrix().clone();
        let mut worst: f64 = 0.0;
        let mut entries = 0;
        for ((row, col), &a) in g.indexed_iter() {
            if row == PAD {
                // The padding vector is pinned to zero and never read.
                assert_eq!(a, 0.0, "padding row received gradient");
                continue;
            }
            let eval = |delta: f64| {
                let mut m = base.clone();
                m[[row, col]] += delta;
                let mut probe = state.clone();
                probe.embeddings = EmbeddingTable::from_parts(tokens.clone(), m).unwrap();
                loss_with(&probe, batch, mask_seed)
            };
            let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(a, numeric));
            entries += 1;
        }
        out.push(TensorCheck {
            name: "embedding".into(),
            entries,
            max_relative_error: worst,
        });
    }
    out
}

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> CliRun {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("infotweet").chain(args.iter().copied());
    let code = infotweet::cli::run(argv, &mut out, &mut err);
    CliRun {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

/// Artifacts of one train → predict → vote → eval run.
#[derive(Debug, PartialEq, Eq)]
pub struct PipelineArtifacts {
    pub train_log: String,
    pub checkpoint: Vec<u8>,
    pub model_predictions: Vec<u8>,
    pub ensemble_predictions: Vec<u8>,
    pub eval_report: String,
    pub confusion_csv: Vec<u8>,
}

/// Runs the full pipeline on the synthetic fixture inside `dir`.
pub fn run_pipeline(dir: &Path) -> PipelineArtifacts {
    let synthetic = fixture("synthetic");
    let config = synthetic.join("config.ini");
    let dev = synthetic.join("dev.tsv");
    let ckpt = dir.join("model.ckpt");
    let preds = dir.join("bigrucnn.tsv");
    let ensemble = dir.join("ensemble.tsv");
    let csv = dir.join("confusion.csv");
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let train = cli(&["train", "--config", &s(&config), "--out", &s(&ckpt)]);
    assert_eq!(train.code, 0, "{}", train.stderr);
    let predict = cli(&["predict", "--ckpt", &s(&ckpt), "--in", &s(&dev), "--out", &s(&preds)]);
    assert_eq!(predict.code, 0, "{}", predict.stderr);
    let members = synthetic.join("members");
    let vote = cli(&[
        "vote",
        "--pred",
        &s(&members),
        &s(&preds),
        "--order",
        "xlnet,roberta,bert,bigrucnn",
        "--out",
        &s(&ensemble),
    ]);
    assert_eq!(vote.code, 0, "{}", vote.stderr);
    let eval = cli(&[
        "eval",
        "--pred",
        &s(&ensemble),
        "--gold",
        &s(&dev),
        "--table",
        "--report-errors",
        "5",
        "--confusion-csv",
        &s(&csv),
    ]);
    assert_eq!(eval.code, 0, "{}", eval.stderr);

    let read = |p: &Path| std::fs::read(p).unwrap();
    PipelineArtifacts {
        train_log: train.stdout.replace(&s(&ckpt), "<ckpt>"),
        checkpoint: read(&ckpt),
        model_predictions: read(&preds),
        ensemble_predictions: read(&ensemble),
        eval_report: eval.stdout,
        confusion_csv: read(&csv),
    }
}
