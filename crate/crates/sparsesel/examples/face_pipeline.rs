//! End-to-end run on the synthetic face benchmark: render the dataset,
//! extract Gabor features, build intra/extra difference pairs, select 100
//! features with margin adaptation over an OMP inner stage, then score rank-1
//! identification. Finishes in well under a minute with --release; debug
//! builds spend minutes in the convolutions.
//!
//! Pass a directory argument to keep the artifacts, otherwise a temporary
//! directory is used and cleaned up on exit.

use std::path::PathBuf;
use std::time::Instant;

use sparsesel::classifiers::SelectionModel;
use sparsesel::cli::{
    cmd_eval, cmd_extract, cmd_pairs, cmd_select, EvalArgs, ExtractArgs, PairsArgs, SelectArgs,
};
use sparsesel::gabor::feature_position;
use sparsesel::synth::{in_discriminative_patch, write_face_dataset, FaceSetSpec};

fn main() {
    let keep = std::env::args().nth(1).map(PathBuf::from);
    let tmp;
    let dir: PathBuf = match &keep {
        Some(p) => {
            std::fs::create_dir_all(p).expect("create output dir");
            p.clone()
        }
        None => {
            tmp = tempfile::tempdir().expect("tempdir");
            tmp.path().to_path_buf()
        }
    };
    println!("working directory: {}", dir.display());

    let spec = FaceSetSpec::default();
    println!(
        "rendering {} subjects x {} images ({} train per subject), noise {}, seed {}",
        spec.subjects, spec.images_per_subject, spec.train_per_subject, spec.noise, spec.seed
    );
    let t = Instant::now();
    let data = write_face_dataset(&dir, &spec).expect("render dataset");
    println!("  wrote images and manifests in {:.2?}", t.elapsed());

    let train_features = dir.join("train.gfa");
    let probe_features = dir.join("probe.gfa");
    let t = Instant::now();
    cmd_extract(&ExtractArgs {
        manifest: data.train_manifest.clone(),
        out: train_features.clone(),
        continue_on_error: false,
    })
    .expect("extract train");
    cmd_extract(&ExtractArgs {
        manifest: data.probe_manifest.clone(),
        out: probe_features.clone(),
        continue_on_error: false,
    })
    .expect("extract probe");
    println!("  extracted train + probe features in {:.2?}", t.elapsed());

    let pair_matrix = dir.join("pairs.sppm");
    let t = Instant::now();
    cmd_pairs(&PairsArgs {
        manifest: data.train_manifest.clone(),
        features: train_features.clone(),
        ratio: "1:7".into(),
        seed: 42,
        keep_all_positives: true,
        out: pair_matrix.clone(),
    })
    .expect("pairs");
    println!("  built 1:7 intra/extra pair matrix in {:.2?}", t.elapsed());

    let model_path = dir.join("model.txt");
    let t = Instant::now();
    let summary = cmd_select(&SelectArgs {
        pairs: Some(pair_matrix),
        features: None,
        manifest: None,
        ratio: "1:7".into(),
        method: "shk".into(),
        solver: "omp".into(),
        max_atoms: 100,
        residual_threshold: None,
        gamma: 0.1,
        l1_max_iterations: 10_000,
        l1_tol: 1e-10,
        eta1: 0.5,
        epsilon: 1e-4,
        max_outer: 200,
        initial_margin: 1.0,
        trace: Some(dir.join("trace.csv")),
        seed: 42,
        keep_all_positives: true,
        out: model_path.clone(),
    })
    .expect("select");
    println!(
        "  selected {} features in {:.2?} ({} outer iterations, residual {:.4})",
        summary.support, t.elapsed(), summary.iterations, summary.residual
    );

    let t = Instant::now();
    let eval = cmd_eval(&EvalArgs {
        model: model_path.clone(),
        gallery_manifest: data.gallery_manifest.clone(),
        gallery_features: train_features,
        probe_manifest: data.probe_manifest.clone(),
        probe_features,
        classifier: "nnc".into(),
        distance: "l1".into(),
        fisher_dim: 0,
        out: dir.join("predictions.csv"),
    })
    .expect("eval");
    println!("  scored probes in {:.2?}", t.elapsed());

    // Where did the selected features land? Identity lives in five 20x20
    // patches; a good selection concentrates there.
    let model = SelectionModel::load(&model_path).expect("load model");
    let mut per_scale = [0usize; 4];
    let mut inside = 0usize;
    for &i in &model.support {
        let p = feature_position(i);
        per_scale[p.scale_index] += 1;
        if in_discriminative_patch(p.row, p.col) {
            inside += 1;
        }
    }

    println!();
    println!(
        "rank-1 identification: {}/{} probes correct (accuracy {:.2})",
        eval.correct, eval.n, eval.accuracy
    );
    println!(
        "selected features inside identity patches: {inside}/{}",
        model.support.len()
    );
    println!(
        "selected features per scale (nu = -1, 0, 1, 2): {:?}",
        per_scale
    );
    if keep.is_some() {
        println!("artifacts kept in {}", dir.display());
    }
}
